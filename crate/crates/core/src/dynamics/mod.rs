//! Time evolution: unitary dynamics in the eigenbasis, deterministic
//! integration of the engineered master equations, the no-jump branch of
//! their unravelings, and quantum-trajectory Monte Carlo.

mod master;
mod trajectory;

pub use master::{evolve_master, pure_density, MasterOptions};
pub use trajectory::{sample_trajectories, TrajectoryOptions};

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{BondModel, Family};
use crate::sparse::{CsrMatrix, SparseOperator};
use crate::spectra::EigenSystem;

/// Uniformly spaced output grid: `n_points` saved times including `t = 0`.
#[derive(Clone, Copy, Debug)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max > 0.0) || n_points < 2 {
            return Err(Error::validation(
                "time grid requires t_max > 0 and at least two points",
            ));
        }
        Ok(TimeGrid { t_max, n_points })
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.n_points - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| i as f64 * self.spacing()).collect()
    }

    /// Integration steps per saved interval so the actual step divides the
    /// grid spacing and does not exceed the request.
    pub fn steps_per_interval(&self, dt_request: f64) -> usize {
        (self.spacing() / dt_request).ceil().max(1.0) as usize
    }
}

/// Default integrator step: `min(0.01, 0.1 / s)` with `s` the stiff rate of
/// the confining channel (`c sqrt(j/2)` for the spin chain, `c` for the
/// per-site recipe).
pub fn default_dt(model: &BondModel) -> f64 {
    let stiff = match model.spec.family {
        Family::SpinChainBlockade => model.c * (model.spec.j.value() / 2.0).sqrt(),
        _ => model.c,
    };
    (0.1 / stiff).min(0.01)
}

/// One named output channel; trajectory runs attach standard errors.
#[derive(Clone, Debug)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
pub struct SeriesMeta {
    pub kind: Option<String>,
    pub c: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
}

/// Output of every evolution routine.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// CSV: `t,<channel>[,<channel>_stderr]...`, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for ch in &self.channels {
            write!(w, ",{}", ch.name)?;
            if ch.stderr.is_some() {
                write!(w, ",{}_stderr", ch.name)?;
            }
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for ch in &self.channels {
                write!(w, ",{:.16e}", ch.values[i])?;
                if let Some(se) = &ch.stderr {
                    write!(w, ",{:.16e}", se[i])?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Requested channels for master-equation and trajectory runs. All
/// operators act in the full product space.
#[derive(Default)]
pub struct ChannelRequest {
    /// Reference state for the fidelity channel.
    pub fidelity_ref: Option<Array1<C64>>,
    /// Projector (or any Hermitian operator) for the leakage channel,
    /// typically the constrained-subspace projector.
    pub leakage_op: Option<SparseOperator>,
    /// Named Hermitian observables.
    pub observables: Vec<(String, SparseOperator)>,
}

impl ChannelRequest {
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fidelity_ref.is_some() {
            out.push("fidelity".to_string());
        }
        if self.leakage_op.is_some() {
            out.push("leakage".to_string());
        }
        for (n, _) in &self.observables {
            out.push(n.clone());
        }
        out
    }
}

/// Expansion of a constrained state over the eigenbasis; supports exact
/// unitary propagation to arbitrary times.
pub struct UnitaryPropagator<'a> {
    eig: &'a EigenSystem,
    coef: Vec<C64>,
}

impl<'a> UnitaryPropagator<'a> {
    pub fn new(eig: &'a EigenSystem, psi0: &Array1<C64>) -> Result<Self> {
        if psi0.len() != eig.dim() {
            return Err(Error::consistency("state does not match the eigensystem"));
        }
        let re = psi0.mapv(|z| z.re);
        let im = psi0.mapv(|z| z.im);
        let cre = eig.vectors.t().dot(&re);
        let cim = eig.vectors.t().dot(&im);
        let coef = cre
            .iter()
            .zip(cim.iter())
            .map(|(&a, &b)| C64::new(a, b))
            .collect();
        Ok(UnitaryPropagator { eig, coef })
    }

    /// `<psi0|psi(t)>` assuming the propagator was built from `psi0`.
    pub fn survival_amplitude(&self, t: f64) -> C64 {
        self.coef
            .iter()
            .zip(self.eig.energies.iter())
            .map(|(c, &e)| {
                let phase = C64::from_polar(1.0, -e * t);
                c.norm_sqr() * phase
            })
            .sum()
    }

    /// Full state at time `t` in the constrained basis.
    pub fn state(&self, t: f64) -> Array1<C64> {
        let dim = self.eig.dim();
        let mut wre = Array1::<f64>::zeros(dim);
        let mut wim = Array1::<f64>::zeros(dim);
        for i in 0..dim {
            let rotated = self.coef[i] * C64::from_polar(1.0, -self.eig.energies[i] * t);
            wre[i] = rotated.re;
            wim[i] = rotated.im;
        }
        let re = self.eig.vectors.dot(&wre);
        let im = self.eig.vectors.dot(&wim);
        Array1::from_iter(re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b)))
    }
}

/// Unitary evolution of a constrained state with fidelity and optional
/// constrained-basis observables.
pub fn evolve_unitary(
    eig: &EigenSystem,
    psi0: &Array1<C64>,
    grid: &TimeGrid,
    observables: &[(String, SparseOperator)],
) -> Result<TimeSeries> {
    let norm: f64 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::validation("initial state must be normalized"));
    }
    let prop = UnitaryPropagator::new(eig, psi0)?;
    let times = grid.times();
    let mut fidelity = Vec::with_capacity(times.len());
    let mut obs_vals: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    let obs_csr: Vec<CsrMatrix> = observables.iter().map(|(_, o)| o.to_csr()).collect();
    for &t in &times {
        fidelity.push(prop.survival_amplitude(t).norm_sqr());
        if !obs_csr.is_empty() {
            let psi = prop.state(t);
            let slice = psi.as_slice().expect("contiguous");
            for (vals, csr) in obs_vals.iter_mut().zip(&obs_csr) {
                vals.push(csr.expectation(slice).re);
            }
        }
    }
    let mut channels = vec![Channel {
        name: "fidelity".into(),
        values: fidelity,
        stderr: None,
    }];
    for ((name, _), vals) in observables.iter().zip(obs_vals) {
        channels.push(Channel {
            name: name.clone(),
            values: vals,
            stderr: None,
        });
    }
    Ok(TimeSeries {
        times,
        channels,
        meta: SeriesMeta::default(),
    })
}

/// RK4 step of the drift equation `dpsi/dt = -i H psi` (no normalization).
pub(crate) fn rk4_drift_step(
    h: &CsrMatrix,
    dt: f64,
    psi: &mut [C64],
    k: &mut [C64],
    acc: &mut [C64],
    stage: &mut [C64],
) {
    let dim = psi.len();
    let mi = C64::new(0.0, -1.0);
    // k1
    h.matvec(psi, k);
    for i in 0..dim {
        k[i] *= mi;
        acc[i] = k[i];
        stage[i] = psi[i] + 0.5 * dt * k[i];
    }
    // k2
    let kbuf = k;
    h.matvec(stage, kbuf);
    for i in 0..dim {
        kbuf[i] *= mi;
        acc[i] += 2.0 * kbuf[i];
    }
    for i in 0..dim {
        stage[i] = psi[i] + 0.5 * dt * kbuf[i];
    }
    // k3
    h.matvec(stage, kbuf);
    for i in 0..dim {
        kbuf[i] *= mi;
        acc[i] += 2.0 * kbuf[i];
    }
    for i in 0..dim {
        stage[i] = psi[i] + dt * kbuf[i];
    }
    // k4
    h.matvec(stage, kbuf);
    for i in 0..dim {
        kbuf[i] *= mi;
        acc[i] += kbuf[i];
        psi[i] += dt / 6.0 * acc[i];
    }
}

/// Integrate the no-jump branch `dpsi/dt = -i H_eff psi` of an unraveling
/// without normalizing, reporting `norm2 = |psi|^2` and
/// `survival = |<psi0|psi>|^2`.
///
/// For an initial eigenstate of the constrained Hamiltonian under the
/// positive-rate Liouvillian this survival is the jump-free contribution to
/// the fidelity; jump terms only add a non-negative correction of higher
/// order in `1/c`.
pub fn propagate_drift(
    h_eff: &SparseOperator,
    psi0: &Array1<C64>,
    grid: &TimeGrid,
    dt_request: f64,
) -> Result<TimeSeries> {
    if psi0.len() != h_eff.nrows() {
        return Err(Error::consistency("state does not match the operator"));
    }
    let csr = h_eff.to_csr();
    let steps = grid.steps_per_interval(dt_request);
    let dt = grid.spacing() / steps as f64;
    let dim = psi0.len();
    let mut psi: Vec<C64> = psi0.to_vec();
    let psi0_slice: Vec<C64> = psi0.to_vec();
    let mut k = vec![C64::default(); dim];
    let mut acc = vec![C64::default(); dim];
    let mut stage = vec![C64::default(); dim];
    let times = grid.times();
    let mut norm2 = Vec::with_capacity(times.len());
    let mut survival = Vec::with_capacity(times.len());
    let record = |psi: &[C64], norm2: &mut Vec<f64>, survival: &mut Vec<f64>| {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let amp: C64 = psi0_slice
            .iter()
            .zip(psi.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        norm2.push(n2);
        survival.push(amp.norm_sqr());
    };
    record(&psi, &mut norm2, &mut survival);
    for _ in 1..times.len() {
        for _ in 0..steps {
            rk4_drift_step(&csr, dt, &mut psi, &mut k, &mut acc, &mut stage);
        }
        record(&psi, &mut norm2, &mut survival);
        let last = *norm2.last().unwrap();
        if !last.is_finite() || last > 1.0 + 1e-3 {
            return Err(Error::Integration(format!(
                "drift integration unstable (norm^2 = {last:.3e}); reduce dt"
            )));
        }
    }
    Ok(TimeSeries {
        times,
        channels: vec![
            Channel {
                name: "survival".into(),
                values: survival,
                stderr: None,
            },
            Channel {
                name: "norm2".into(),
                values: norm2,
                stderr: None,
            },
        ],
        meta: SeriesMeta {
            dt: Some(dt),
            ..Default::default()
        },
    })
}

/// Per-trajectory seed stream: splitmix-style mix of (base, index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
