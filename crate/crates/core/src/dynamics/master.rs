//! Fixed-step RK4 integration of the engineered master equations.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::{Channel, ChannelRequest, SeriesMeta, TimeGrid, TimeSeries};
use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::model::{BondModel, Caps};
use crate::ops::{effective_hamiltonian, jump_channels, ChannelRecipe, LiouvillianKind};
use crate::sparse::CsrMatrix;

pub struct MasterOptions {
    /// Integration step; defaults to [`super::default_dt`].
    pub dt: Option<f64>,
    pub recipe: ChannelRecipe,
    /// Keep a copy of the density matrix at every grid point.
    pub store_states: bool,
}

impl Default for MasterOptions {
    fn default() -> Self {
        MasterOptions {
            dt: None,
            recipe: ChannelRecipe::FamilyDefault,
            store_states: false,
        }
    }
}

struct Rhs {
    drift: CsrMatrix,
    jumps: Vec<(f64, CsrMatrix)>,
    tmp1: Array2<C64>,
    tmp2: Array2<C64>,
}

impl Rhs {
    /// out = -i (H rho - rho H†) + sum_k gamma_k L_k rho L_k†
    fn eval(&mut self, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let mi = C64::new(0.0, -1.0);
        self.drift.spmm(rho.view(), &mut self.tmp1);
        self.drift.spmm_right_dagger(rho.view(), &mut self.tmp2);
        ndarray::Zip::from(&mut *out)
            .and(&self.tmp1)
            .and(&self.tmp2)
            .for_each(|o, &a, &b| *o = mi * (a - b));
        for (rate, l) in &self.jumps {
            l.spmm(rho.view(), &mut self.tmp1);
            l.spmm_right_dagger(self.tmp1.view(), &mut self.tmp2);
            let r = C64::new(*rate, 0.0);
            ndarray::Zip::from(&mut *out)
                .and(&self.tmp2)
                .for_each(|o, &j| *o += r * j);
        }
    }
}

fn trace(rho: &Array2<C64>) -> C64 {
    (0..rho.nrows()).map(|i| rho[(i, i)]).sum()
}

fn hermiticity_dev(rho: &Array2<C64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..rho.nrows() {
        for k in i..rho.ncols() {
            dev = dev.max((rho[(i, k)] - rho[(k, i)].conj()).norm());
        }
    }
    dev
}

struct Evaluators {
    fid_ref: Option<Vec<C64>>,
    leak: Option<CsrMatrix>,
    observables: Vec<(String, CsrMatrix)>,
}

impl Evaluators {
    fn new(request: &ChannelRequest) -> Self {
        Evaluators {
            fid_ref: request.fidelity_ref.as_ref().map(|v| v.to_vec()),
            leak: request.leakage_op.as_ref().map(|o| o.to_csr()),
            observables: request
                .observables
                .iter()
                .map(|(n, o)| (n.clone(), o.to_csr()))
                .collect(),
        }
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fid_ref.is_some() {
            out.push("fidelity".into());
        }
        if self.leak.is_some() {
            out.push("leakage".into());
        }
        out.extend(self.observables.iter().map(|(n, _)| n.clone()));
        out
    }

    fn eval_dm(&self, rho: &Array2<C64>, out: &mut Vec<Vec<f64>>) {
        let mut idx = 0;
        if let Some(r) = &self.fid_ref {
            // <ref| rho |ref>
            let mut acc = C64::new(0.0, 0.0);
            for (i, a) in r.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let mut row = C64::new(0.0, 0.0);
                for (k, b) in r.iter().enumerate() {
                    row += rho[(i, k)] * b;
                }
                acc += a.conj() * row;
            }
            out[idx].push(acc.re);
            idx += 1;
        }
        if let Some(p) = &self.leak {
            out[idx].push(trace_product(p, rho));
            idx += 1;
        }
        for (_, o) in &self.observables {
            out[idx].push(trace_product(o, rho));
            idx += 1;
        }
    }
}

/// `Tr(O rho)` for sparse Hermitian O.
fn trace_product(o: &CsrMatrix, rho: &Array2<C64>) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..o.nrows {
        let (cols, vals) = o.row(i);
        for (c, v) in cols.iter().zip(vals) {
            acc += v * rho[(*c as usize, i)];
        }
    }
    acc.re
}

/// Deterministic RK4 integration of `d rho / dt = L(rho)` for the chosen
/// Liouvillian kind, reporting the requested channels on the grid.
///
/// Returns the series and, when `store_states` is set, the density matrix
/// at every grid point.
pub fn evolve_master(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    kind: LiouvillianKind,
    rho0: Array2<C64>,
    grid: &TimeGrid,
    request: &ChannelRequest,
    opts: &MasterOptions,
) -> Result<(TimeSeries, Option<Vec<Array2<C64>>>)> {
    let dim = rho0.nrows();
    if rho0.ncols() != dim {
        return Err(Error::validation("density matrix must be square"));
    }
    if dim > caps.max_dm_dim {
        return Err(Error::Capacity {
            what: "density-matrix integration".into(),
            requested: dim,
            cap_name: "max_dm_dim",
            cap: caps.max_dm_dim,
            advice: "switch to quantum trajectories for this size".into(),
        });
    }
    let tr = trace(&rho0);
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-10 {
        return Err(Error::validation(format!(
            "initial density matrix must have unit trace (got {tr})"
        )));
    }
    if hermiticity_dev(&rho0) > 1e-9 {
        return Err(Error::validation("initial density matrix must be Hermitian"));
    }

    let drift = effective_hamiltonian(model, basis, caps, kind, opts.recipe)?;
    if drift.nrows() != dim {
        return Err(Error::consistency(
            "density matrix dimension does not match the full space",
        ));
    }
    let jumps = jump_channels(model, caps, kind, opts.recipe)?;
    let mut rhs = Rhs {
        drift: drift.to_csr(),
        jumps: jumps.iter().map(|(g, l)| (*g, l.to_csr())).collect(),
        tmp1: Array2::zeros((dim, dim)),
        tmp2: Array2::zeros((dim, dim)),
    };

    let dt_req = opts.dt.unwrap_or_else(|| super::default_dt(model));
    let steps = grid.steps_per_interval(dt_req);
    let dt = grid.spacing() / steps as f64;

    let evals = Evaluators::new(request);
    let names = evals.names();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.n_points); names.len()];

    let mut rho = rho0;
    let mut k = Array2::<C64>::zeros((dim, dim));
    let mut acc = Array2::<C64>::zeros((dim, dim));
    let mut stage = Array2::<C64>::zeros((dim, dim));
    let mut snapshots = if opts.store_states {
        Some(Vec::with_capacity(grid.n_points))
    } else {
        None
    };

    let check_point = |rho: &Array2<C64>| -> Result<()> {
        let t = trace(rho);
        if (t.re - 1.0).abs() > 1e-6 || t.im.abs() > 1e-8 {
            return Err(Error::Integration(format!(
                "trace drifted to {t}; reduce dt"
            )));
        }
        if hermiticity_dev(rho) > 1e-9 {
            return Err(Error::Integration(
                "Hermiticity lost beyond 1e-9; reduce dt".into(),
            ));
        }
        Ok(())
    };

    evals.eval_dm(&rho, &mut values);
    if let Some(s) = snapshots.as_mut() {
        s.push(rho.clone());
    }
    for _ in 1..grid.n_points {
        for _ in 0..steps {
            // classic RK4 with incremental accumulation
            rhs.eval(&rho, &mut k);
            acc.assign(&k);
            stage.assign(&rho);
            stage.scaled_add(C64::new(0.5 * dt, 0.0), &k);
            rhs.eval(&stage, &mut k);
            acc.scaled_add(C64::new(2.0, 0.0), &k);
            stage.assign(&rho);
            stage.scaled_add(C64::new(0.5 * dt, 0.0), &k);
            rhs.eval(&stage, &mut k);
            acc.scaled_add(C64::new(2.0, 0.0), &k);
            stage.assign(&rho);
            stage.scaled_add(C64::new(dt, 0.0), &k);
            rhs.eval(&stage, &mut k);
            acc.scaled_add(C64::new(1.0, 0.0), &k);
            rho.scaled_add(C64::new(dt / 6.0, 0.0), &acc);

            let t = trace(&rho);
            if !(t.re.is_finite()) || (t.re - 1.0).abs() > 1e-4 {
                return Err(Error::Integration(format!(
                    "trace drift {:.3e} exceeded 1e-4; reduce dt",
                    (t.re - 1.0).abs()
                )));
            }
        }
        check_point(&rho)?;
        evals.eval_dm(&rho, &mut values);
        if let Some(s) = snapshots.as_mut() {
            s.push(rho.clone());
        }
    }

    let channels = names
        .into_iter()
        .zip(values)
        .map(|(name, values)| Channel {
            name,
            values,
            stderr: None,
        })
        .collect();
    Ok((
        TimeSeries {
            times: grid.times(),
            channels,
            meta: SeriesMeta {
                kind: Some(format!("{kind:?}")),
                c: Some(model.c),
                dt: Some(dt),
                seed: None,
                n_traj: None,
            },
        },
        snapshots,
    ))
}

/// Density matrix of a pure full-space state.
pub fn pure_density(psi: &Array1<C64>) -> Array2<C64> {
    let dim = psi.len();
    let mut rho = Array2::zeros((dim, dim));
    for i in 0..dim {
        if psi[i].norm_sqr() == 0.0 {
            continue;
        }
        for k in 0..dim {
            rho[(i, k)] = psi[i] * psi[k].conj();
        }
    }
    rho
}
