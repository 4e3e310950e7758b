//! Monte Carlo wave-function unraveling of the positive-rate master
//! equations.
//!
//! Standard norm-threshold scheme: integrate the non-Hermitian drift without
//! normalizing, jump when the squared norm crosses a pre-drawn uniform
//! threshold (jump time refined by bisection inside the step), select the
//! channel with probability proportional to `gamma |L psi|^2`, renormalize,
//! redraw.
//!
//! All trajectories of a run share the deterministic drift path until their
//! first jump, so that path is integrated once and per-trajectory work
//! starts at the first crossing. This is an implementation detail, not an
//! approximation: results are identical to integrating each trajectory from
//! `t = 0` (covered by a test against the naive mode).

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::{derive_seed, Channel, ChannelRequest, SeriesMeta, TimeGrid, TimeSeries};
use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::model::{BondModel, Caps};
use crate::ops::{effective_hamiltonian, jump_channels, ChannelRecipe, FullSpace, LiouvillianKind};
use crate::sparse::CsrMatrix;

/// Bisection tolerance on the squared norm at the jump time.
const JUMP_NORM_TOL: f64 = 1e-6;

pub struct TrajectoryOptions {
    pub dt: Option<f64>,
    pub recipe: ChannelRecipe,
    /// Integrate every trajectory from `t = 0` instead of reusing the
    /// shared no-jump path (slow; used to validate the fast path).
    pub force_naive: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            dt: None,
            recipe: ChannelRecipe::FamilyDefault,
            force_naive: false,
        }
    }
}

struct StateEvals {
    fid_ref: Option<Vec<C64>>,
    leak: Option<CsrMatrix>,
    observables: Vec<(String, CsrMatrix)>,
}

impl StateEvals {
    fn n_channels(&self) -> usize {
        self.fid_ref.is_some() as usize
            + self.leak.is_some() as usize
            + self.observables.len()
    }

    fn eval(&self, psi: &[C64], out: &mut Vec<f64>) {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if let Some(r) = &self.fid_ref {
            let amp: C64 = r.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
            out.push(amp.norm_sqr() / n2);
        }
        if let Some(p) = &self.leak {
            out.push(p.expectation(psi).re / n2);
        }
        for (_, o) in &self.observables {
            out.push(o.expectation(psi).re / n2);
        }
    }

    /// Channel values of a state with no support on the constrained
    /// subspace, valid only when `absorbing` held.
    fn absorbed_values(&self, out: &mut Vec<f64>) {
        for _ in 0..self.n_channels() {
            out.push(0.0);
        }
    }
}

struct Engine {
    drift: CsrMatrix,
    jumps: Vec<(f64, CsrMatrix)>,
    dt: f64,
    spi: usize,
    n_points: usize,
    dim: usize,
    evals: StateEvals,
    absorbing: bool,
    prefix_norm2: Vec<f64>,
    prefix_channels: Vec<Vec<f64>>, // [point][channel]
    checkpoints: Vec<Vec<C64>>,
}

struct Buffers {
    k: Vec<C64>,
    acc: Vec<C64>,
    stage: Vec<C64>,
    probe: Vec<C64>,
    before: Vec<C64>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Buffers {
            k: vec![C64::default(); dim],
            acc: vec![C64::default(); dim],
            stage: vec![C64::default(); dim],
            probe: vec![C64::default(); dim],
            before: vec![C64::default(); dim],
        }
    }
}

fn norm2(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn normalize(psi: &mut [C64]) {
    let n = norm2(psi).sqrt();
    for z in psi.iter_mut() {
        *z /= n;
    }
}

impl Engine {
    fn step(&self, psi: &mut [C64], size: f64, b: &mut Buffers) {
        super::rk4_drift_step(&self.drift, size, psi, &mut b.k, &mut b.acc, &mut b.stage);
    }

    /// Locate the jump time inside a step of length `size` starting from
    /// `before` (squared norm >= r); returns (tau, state at the jump).
    fn bisect_jump(&self, before: &[C64], size: f64, r: f64, b: &mut Buffers) -> (f64, Vec<C64>) {
        let mut lo = 0.0f64;
        let mut hi = size;
        let mut state = before.to_vec();
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            b.probe.copy_from_slice(before);
            super::rk4_drift_step(
                &self.drift,
                mid,
                &mut b.probe,
                &mut b.k,
                &mut b.acc,
                &mut b.stage,
            );
            let n2 = norm2(&b.probe);
            if (n2 - r).abs() <= JUMP_NORM_TOL {
                state.copy_from_slice(&b.probe);
                return (mid, state);
            }
            if n2 > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        b.probe.copy_from_slice(before);
        super::rk4_drift_step(
            &self.drift,
            0.5 * (lo + hi),
            &mut b.probe,
            &mut b.k,
            &mut b.acc,
            &mut b.stage,
        );
        state.copy_from_slice(&b.probe);
        (0.5 * (lo + hi), state)
    }

    /// Apply a jump to the (unnormalized) pre-jump state: select the channel
    /// with probability proportional to `gamma |L psi|^2` and renormalize.
    fn apply_jump(&self, psi: &mut Vec<C64>, rng: &mut ChaCha12Rng, b: &mut Buffers) -> Result<()> {
        let mut weights = Vec::with_capacity(self.jumps.len());
        let mut total = 0.0;
        for (rate, l) in &self.jumps {
            let w = rate * l.apply_norm_sqr(psi);
            weights.push(w);
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::Integration(
                "norm threshold crossed but all jump weights vanish".into(),
            ));
        }
        let u = rng.gen::<f64>() * total;
        let mut cum = 0.0;
        let mut pick = self.jumps.len() - 1;
        for (m, w) in weights.iter().enumerate() {
            cum += w;
            if u < cum {
                pick = m;
                break;
            }
        }
        self.jumps[pick].1.matvec(psi, &mut b.probe);
        psi.copy_from_slice(&b.probe);
        normalize(psi);
        Ok(())
    }

    /// Integrate one trajectory from an arbitrary starting position.
    ///
    /// `psi` is normalized, positioned `offset` into step `step_idx` (the
    /// remainder of that step is `self.dt - offset`). Channel rows for grid
    /// points after that position are appended to `out`.
    #[allow(clippy::too_many_arguments)]
    fn continue_from(
        &self,
        mut psi: Vec<C64>,
        step_idx: usize,
        offset: f64,
        rng: &mut ChaCha12Rng,
        out: &mut Vec<Vec<f64>>,
        b: &mut Buffers,
    ) -> Result<()> {
        let total_steps = (self.n_points - 1) * self.spi;
        let mut r = rng.gen::<f64>();
        let mut idx = step_idx;
        let mut first_partial = if offset > 0.0 { self.dt - offset } else { self.dt };
        while idx < total_steps {
            let mut size = first_partial;
            first_partial = self.dt;
            b.before.copy_from_slice(&psi);
            self.step(&mut psi, size, b);
            // one or more jumps inside this step
            while norm2(&psi) < r {
                let pre_jump = b.before.clone();
                let (tau, at_jump) = self.bisect_jump(&pre_jump, size, r, b);
                psi = at_jump;
                self.apply_jump(&mut psi, rng, b)?;
                r = rng.gen::<f64>();
                size -= tau;
                if size <= 0.0 {
                    break;
                }
                b.before.copy_from_slice(&psi);
                self.step(&mut psi, size, b);
            }
            idx += 1;
            if idx % self.spi == 0 {
                let mut row = Vec::with_capacity(self.evals.n_channels());
                self.evals.eval(&psi, &mut row);
                out.push(row);
            }
        }
        Ok(())
    }

    /// Full per-trajectory run reusing the shared prefix.
    fn run_shared(&self, traj: u64, base_seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(base_seed, traj));
        let r = rng.gen::<f64>();
        let mut b = Buffers::new(self.dim);
        match find_crossing(&self.prefix_norm2, r) {
            None => Ok(self.prefix_channels.clone()),
            Some(s_star) => {
                let g = s_star / self.spi;
                let mut psi = self.checkpoints[g].clone();
                for _ in 0..(s_star - g * self.spi) {
                    self.step(&mut psi, self.dt, &mut b);
                }
                let (tau, at_jump) = self.bisect_jump(&psi, self.dt, r, &mut b);
                let mut psi = at_jump;
                self.apply_jump(&mut psi, &mut rng, &mut b)?;

                let p_pre = s_star / self.spi;
                let mut rows: Vec<Vec<f64>> =
                    self.prefix_channels[..=p_pre].to_vec();
                if self.absorbing {
                    for _ in p_pre + 1..self.n_points {
                        let mut row = Vec::new();
                        self.evals.absorbed_values(&mut row);
                        rows.push(row);
                    }
                } else {
                    self.continue_from(psi, s_star, tau, &mut rng, &mut rows, &mut b)?;
                }
                Ok(rows)
            }
        }
    }

    /// Reference implementation: everything from `t = 0`.
    fn run_naive(&self, traj: u64, base_seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(base_seed, traj));
        let mut b = Buffers::new(self.dim);
        let psi = self.checkpoints[0].clone();
        let mut rows = Vec::with_capacity(self.n_points);
        let mut first = Vec::with_capacity(self.evals.n_channels());
        self.evals.eval(&psi, &mut first);
        rows.push(first);
        self.continue_from(psi, 0, 0.0, &mut rng, &mut rows, &mut b)?;
        Ok(rows)
    }
}

/// First step index `s` such that `norm2[s] >= r > norm2[s+1]`.
fn find_crossing(norm2: &[f64], r: f64) -> Option<usize> {
    if norm2.is_empty() || *norm2.last().unwrap() >= r {
        return None;
    }
    // the profile is monotone up to integrator noise; verify after searching
    let idx = norm2.partition_point(|&n| n >= r);
    let mut s = idx.saturating_sub(1);
    if !(norm2[s] >= r && norm2[s + 1] < r) {
        s = norm2.windows(2).position(|w| w[0] >= r && w[1] < r)?;
    }
    Some(s)
}

/// Check the structural conditions under which a jumped trajectory can
/// never contribute to the requested channels again: every jump lands
/// outside the constrained subspace, the drift never maps amplitude back in,
/// and every requested channel vanishes on states supported outside.
fn absorbing_conditions(
    drift: &crate::sparse::SparseOperator,
    jumps: &[(f64, crate::sparse::SparseOperator)],
    in_subspace: &[bool],
    request: &ChannelRequest,
) -> bool {
    if !request.observables.is_empty() {
        return false;
    }
    if let Some(r) = &request.fidelity_ref {
        for (i, z) in r.iter().enumerate() {
            if z.norm_sqr() > 0.0 && !in_subspace[i] {
                return false;
            }
        }
    }
    if let Some(p) = &request.leakage_op {
        // must be exactly the subspace indicator
        let mut diag = vec![0.0f64; in_subspace.len()];
        for &(r, c, v) in p.entries() {
            if r != c || v.im != 0.0 {
                return false;
            }
            diag[r as usize] = v.re;
        }
        for (i, &inside) in in_subspace.iter().enumerate() {
            let want = if inside { 1.0 } else { 0.0 };
            if (diag[i] - want).abs() > 0.0 {
                return false;
            }
        }
    }
    for (_, l) in jumps {
        if l.entries().iter().any(|&(r, _, _)| in_subspace[r as usize]) {
            return false;
        }
    }
    if drift
        .entries()
        .iter()
        .any(|&(r, c, _)| in_subspace[r as usize] && !in_subspace[c as usize])
    {
        return false;
    }
    true
}

/// Sample `n_traj` Monte Carlo wave-function trajectories and report
/// trajectory-averaged channels with standard errors.
///
/// `psi0` lives in the full product space. The run is bit-reproducible for a
/// fixed `base_seed` at any thread count: per-trajectory streams are derived
/// by index and the average is reduced in index order.
#[allow(clippy::too_many_arguments)]
pub fn sample_trajectories(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    kind: LiouvillianKind,
    psi0: &Array1<C64>,
    grid: &TimeGrid,
    n_traj: usize,
    base_seed: u64,
    request: &ChannelRequest,
    opts: &TrajectoryOptions,
) -> Result<TimeSeries> {
    if kind == LiouvillianKind::Full {
        return Err(Error::validation(
            "the full Liouvillian carries a negative rate and admits no jump unraveling; \
             use the positive or lindblad-prime kinds",
        ));
    }
    if n_traj < 1 {
        return Err(Error::validation("n_traj must be at least 1"));
    }
    let n: f64 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::validation("initial state must be normalized"));
    }

    let drift = effective_hamiltonian(model, basis, caps, kind, opts.recipe)?;
    let jumps = jump_channels(model, caps, kind, opts.recipe)?;
    if jumps.iter().any(|&(g, _)| g <= 0.0) {
        return Err(Error::validation(
            "trajectory sampling requires strictly positive rates",
        ));
    }
    let dim = drift.nrows();
    if psi0.len() != dim {
        return Err(Error::consistency("state does not match the full space"));
    }

    let space = FullSpace::new(model, caps)?;
    let mut in_subspace = vec![false; dim];
    for s in basis.states() {
        in_subspace[space.index(s)] = true;
    }
    let absorbing = absorbing_conditions(&drift, &jumps, &in_subspace, request);

    let evals = StateEvals {
        fid_ref: request.fidelity_ref.as_ref().map(|v| v.to_vec()),
        leak: request.leakage_op.as_ref().map(|o| o.to_csr()),
        observables: request
            .observables
            .iter()
            .map(|(n, o)| (n.clone(), o.to_csr()))
            .collect(),
    };
    let names: Vec<String> = request.names();

    let dt_req = opts.dt.unwrap_or_else(|| super::default_dt(model));
    let spi = grid.steps_per_interval(dt_req);
    let dt = grid.spacing() / spi as f64;

    // threshold draws are the first sample of each trajectory stream; the
    // smallest one bounds how far the shared path must be integrated
    let min_r = (0..n_traj as u64)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(base_seed, i));
            rng.gen::<f64>()
        })
        .fold(f64::INFINITY, f64::min);

    let mut engine = Engine {
        drift: drift.to_csr(),
        jumps: jumps.iter().map(|(g, l)| (*g, l.to_csr())).collect(),
        dt,
        spi,
        n_points: grid.n_points,
        dim,
        evals,
        absorbing,
        prefix_norm2: Vec::new(),
        prefix_channels: Vec::new(),
        checkpoints: Vec::new(),
    };

    // shared no-jump path
    {
        let mut b = Buffers::new(dim);
        let mut psi: Vec<C64> = psi0.to_vec();
        engine.prefix_norm2.push(norm2(&psi));
        let mut row = Vec::new();
        engine.evals.eval(&psi, &mut row);
        engine.prefix_channels.push(row);
        engine.checkpoints.push(psi.clone());
        'outer: for _ in 1..grid.n_points {
            for _ in 0..spi {
                engine.step(&mut psi, dt, &mut b);
                let n2 = norm2(&psi);
                if !n2.is_finite() || n2 > 1.0 + 1e-3 {
                    return Err(Error::Integration(
                        "trajectory drift integration unstable; reduce dt".into(),
                    ));
                }
                engine.prefix_norm2.push(n2);
            }
            let mut row = Vec::new();
            engine.evals.eval(&psi, &mut row);
            engine.prefix_channels.push(row);
            engine.checkpoints.push(psi.clone());
            if *engine.prefix_norm2.last().unwrap() < min_r {
                break 'outer;
            }
        }
    }

    let results: Vec<Result<Vec<Vec<f64>>>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            if opts.force_naive {
                engine.run_naive(i, base_seed)
            } else {
                engine.run_shared(i, base_seed)
            }
        })
        .collect();

    // fixed-order reduction keeps results identical at any parallelism
    let n_channels = names.len();
    let n_points = grid.n_points;
    let mut mean = vec![vec![0.0f64; n_points]; n_channels];
    let mut m2 = vec![vec![0.0f64; n_points]; n_channels];
    let mut count = 0.0f64;
    for res in results {
        let rows = res?;
        debug_assert_eq!(rows.len(), n_points);
        count += 1.0;
        for (p, row) in rows.iter().enumerate() {
            for (ch, &v) in row.iter().enumerate() {
                let delta = v - mean[ch][p];
                mean[ch][p] += delta / count;
                m2[ch][p] += delta * (v - mean[ch][p]);
            }
        }
    }
    let channels = names
        .into_iter()
        .enumerate()
        .map(|(ch, name)| {
            let stderr = mean[ch]
                .iter()
                .enumerate()
                .map(|(p, _)| {
                    if count > 1.0 {
                        (m2[ch][p] / (count * (count - 1.0))).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect();
            Channel {
                name,
                values: std::mem::take(&mut mean[ch]),
                stderr: Some(stderr),
            }
        })
        .collect();

    Ok(TimeSeries {
        times: grid.times(),
        channels,
        meta: SeriesMeta {
            kind: Some(format!("{kind:?}")),
            c: Some(model.c),
            dt: Some(dt),
            seed: Some(base_seed),
            n_traj: Some(n_traj),
        },
    })
}
