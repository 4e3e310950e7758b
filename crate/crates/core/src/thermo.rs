//! Canonical and grand-canonical ensembles over the exact spectrum, reduced
//! density matrices, and Schatten-distance comparisons.
//!
//! The grand-canonical weights use the scalar per-eigenstate counter
//! expectations, `w_i ∝ exp(-beta (E_i - mu <N>_i))`, so every ensemble here
//! is diagonal in the energy eigenbasis and the parameter search is
//! two-dimensional.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::spectra::EigenSystem;

/// Inverse temperature, chemical potential, and the induced probability
/// weights over eigenstates.
///
/// `beta_mu` is the natural coordinate `beta * mu` of the weight family
/// `exp(-beta E + beta_mu N)`; it stays finite on the `beta = 0` surface
/// where `mu` itself diverges.
#[derive(Clone, Debug)]
pub struct EnsembleParams {
    pub beta: f64,
    pub mu: f64,
    pub beta_mu: f64,
    pub weights: Vec<f64>,
}

/// Stable Boltzmann-like weights `w_i ∝ exp(-beta (e_i - mu n_i))`.
pub fn ensemble_weights(energies: &[f64], n_values: &[f64], beta: f64, mu: f64) -> Vec<f64> {
    let exponents: Vec<f64> = energies
        .iter()
        .zip(n_values)
        .map(|(&e, &n)| -beta * (e - mu * n))
        .collect();
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = exponents.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

fn weighted_mean(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn weighted_cov(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ma = weighted_mean(w, a);
    let mb = weighted_mean(w, b);
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(&wi, (&ai, &bi))| wi * (ai - ma) * (bi - mb))
        .sum()
}

/// `sum_i w_i v_i`; lengths must match.
pub fn ensemble_average(params: &EnsembleParams, values: &[f64]) -> Result<f64> {
    if params.weights.len() != values.len() {
        return Err(Error::consistency("weights and values differ in length"));
    }
    Ok(weighted_mean(&params.weights, values))
}

/// Solve `<E>_beta = e_target` for the canonical inverse temperature.
///
/// The map is strictly decreasing in beta, so a sign-bracketing expansion
/// followed by safeguarded Newton converges for any target strictly inside
/// the spectral hull. Negative beta (upper half of the band) is allowed.
pub fn canonical_beta(energies: &[f64], e_target: f64) -> Result<f64> {
    if energies.len() < 2 {
        return Err(Error::validation("need at least two eigenstates"));
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = e_max - e_min;
    if !(e_target > e_min && e_target < e_max) {
        return Err(Error::validation(format!(
            "target energy {e_target} outside the open spectral range ({e_min}, {e_max})"
        )));
    }
    let zeros = vec![0.0; energies.len()];
    let f = |beta: f64| -> f64 {
        let w = ensemble_weights(energies, &zeros, beta, 0.0);
        weighted_mean(&w, energies) - e_target
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    // f is decreasing: f(lo) must be positive, f(hi) negative
    let mut expansions = 0;
    while f(lo) <= 0.0 {
        lo *= 2.0;
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Convergence("canonical bracketing failed (low side)".into()));
        }
    }
    expansions = 0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Convergence("canonical bracketing failed (high side)".into()));
        }
    }
    let tol = 1e-8 * range;
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let w = ensemble_weights(energies, &zeros, beta, 0.0);
        let mean = weighted_mean(&w, energies);
        let resid = mean - e_target;
        if resid.abs() < tol {
            return Ok(beta);
        }
        if resid > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let var = weighted_cov(&w, energies, energies);
        let newton = beta + resid / var; // f' = -Var(E)
        beta = if var > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence(
        "canonical temperature search did not reach tolerance".into(),
    ))
}

/// Convex hull (monotone chain); returns hull vertices in CCW order.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn strictly_inside_hull(hull: &[(f64, f64)], q: (f64, f64), tol: f64) -> bool {
    if hull.len() < 3 {
        return false;
    }
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
        if cross <= tol {
            return false;
        }
    }
    true
}

/// Solve for `(beta, mu)` reproducing the energy and counter targets.
///
/// The weights `exp(-beta E + beta mu N)` form an exponential family in the
/// natural coordinates `(theta_1, theta_2) = (beta, beta mu)`; the damped
/// Newton iteration runs there, where the analytic Jacobian is a covariance
/// matrix and stays regular on the whole convex-hull interior (the `(beta,
/// mu)` chart degenerates on the `beta = 0` surface, where only the product
/// `beta mu` is meaningful). Residuals are measured in units of the spectral
/// and counter ranges.
pub fn grand_canonical_params(
    energies: &[f64],
    n_values: &[f64],
    e_target: f64,
    n_target: f64,
) -> Result<EnsembleParams> {
    if energies.len() != n_values.len() || energies.len() < 3 {
        return Err(Error::validation("need matching energies and counter values"));
    }
    let points: Vec<(f64, f64)> = energies.iter().cloned().zip(n_values.iter().cloned()).collect();
    let e_range = {
        let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let n_range = {
        let lo = n_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = n_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    if !(e_range > 0.0) || !(n_range > 0.0) {
        return Err(Error::validation(
            "degenerate (energy, counter) cloud; grand-canonical fit is ill-posed",
        ));
    }
    let hull = convex_hull(&points);
    let hull_tol = 1e-12 * e_range * n_range;
    if !strictly_inside_hull(&hull, (e_target, n_target), hull_tol) {
        return Err(Error::validation(format!(
            "target ({e_target}, {n_target}) lies outside the (E, N) convex hull"
        )));
    }

    // natural-coordinate weights: exp(-t1 e + t2 n), stabilized
    let theta_weights = |t1: f64, t2: f64| -> Vec<f64> {
        let exps: Vec<f64> = energies
            .iter()
            .zip(n_values)
            .map(|(&e, &n)| -t1 * e + t2 * n)
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = exps.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= sum;
        }
        w
    };
    let scaled_resid = |t1: f64, t2: f64| -> (f64, f64, Vec<f64>) {
        let w = theta_weights(t1, t2);
        let de = (weighted_mean(&w, energies) - e_target) / e_range;
        let dn = (weighted_mean(&w, n_values) - n_target) / n_range;
        (de, dn, w)
    };

    let mut starts = vec![(0.0, 0.0), (0.1, 0.0), (-0.1, 0.0), (0.0, 0.5), (0.0, -0.5)];
    if let Ok(bc) = canonical_beta(energies, e_target) {
        starts.insert(0, (bc, 0.0));
    }
    starts.extend_from_slice(&[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]);

    let tol = 1e-8;
    let finish = |t1: f64, t2: f64, w: Vec<f64>| {
        let mu = if t1 != 0.0 {
            t2 / t1
        } else if t2 == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(t2)
        };
        EnsembleParams {
            beta: t1,
            mu,
            beta_mu: t2,
            weights: w,
        }
    };
    let mut best: Option<(f64, f64, f64)> = None; // (residual, t1, t2)
    for &(s1, s2) in &starts {
        let mut t1 = s1;
        let mut t2 = s2;
        let (mut de, mut dn, mut w) = scaled_resid(t1, t2);
        let mut res = de.hypot(dn);
        for _ in 0..300 {
            if res < tol {
                return Ok(finish(t1, t2, w));
            }
            // Jacobian in natural coordinates: covariances of (E, N)
            let dee = -weighted_cov(&w, energies, energies) / e_range;
            let den = weighted_cov(&w, energies, n_values) / e_range;
            let dne = -weighted_cov(&w, n_values, energies) / n_range;
            let dnn = weighted_cov(&w, n_values, n_values) / n_range;
            let det = dee * dnn - den * dne;
            if det.abs() < 1e-300 || !det.is_finite() {
                break;
            }
            let step_1 = (de * dnn - dn * den) / det;
            let step_2 = (dee * dn - dne * de) / det;
            // damped update: halve until the residual shrinks
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let n1 = t1 - lambda * step_1;
                let n2 = t2 - lambda * step_2;
                let (nde, ndn, nw) = scaled_resid(n1, n2);
                let nres = nde.hypot(ndn);
                if nres < res && nres.is_finite() {
                    t1 = n1;
                    t2 = n2;
                    de = nde;
                    dn = ndn;
                    w = nw;
                    res = nres;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if res < tol {
            return Ok(finish(t1, t2, w));
        }
        if best.map_or(true, |(r, _, _)| res < r) {
            best = Some((res, t1, t2));
        }
    }
    let (res, t1, t2) = best.unwrap();
    Err(Error::Convergence(format!(
        "grand-canonical solve stalled at scaled residual {res:.3e} \
         (beta = {t1:.6}, beta*mu = {t2:.6})"
    )))
}

/// Canonical ensemble as an [`EnsembleParams`] (mu = 0).
pub fn canonical_params(energies: &[f64], e_target: f64) -> Result<EnsembleParams> {
    let beta = canonical_beta(energies, e_target)?;
    let zeros = vec![0.0; energies.len()];
    Ok(EnsembleParams {
        beta,
        mu: 0.0,
        beta_mu: 0.0,
        weights: ensemble_weights(energies, &zeros, beta, 0.0),
    })
}

/// Precomputed grouping of constrained basis states by the complement of a
/// subsystem, reused across many partial traces.
pub struct PartialTracePlan {
    pub subsystem: Vec<usize>,
    pub d_a: usize,
    groups: Vec<Vec<(u32, u32)>>, // (subsystem code, basis index)
}

/// Build the grouping for a subsystem given by (0-based) site indices.
pub fn partial_trace_plan(basis: &ConstrainedBasis, sites: &[usize]) -> Result<PartialTracePlan> {
    if sites.is_empty() {
        return Err(Error::validation("subsystem must contain at least one site"));
    }
    let mut subsystem = sites.to_vec();
    subsystem.sort_unstable();
    subsystem.dedup();
    if subsystem.len() != sites.len() {
        return Err(Error::validation("subsystem sites must be distinct"));
    }
    if *subsystem.last().unwrap() >= basis.n_sites {
        return Err(Error::validation("subsystem site out of range"));
    }
    let d = basis.site_dim;
    let d_a = d.pow(subsystem.len() as u32);
    if d_a > 4096 {
        return Err(Error::validation("subsystem too large for a dense reduced DM"));
    }
    let complement: Vec<usize> = (0..basis.n_sites)
        .filter(|s| !subsystem.contains(s))
        .collect();
    let mut map: BTreeMap<Vec<u8>, Vec<(u32, u32)>> = BTreeMap::new();
    for (idx, labels) in basis.states().iter().enumerate() {
        let key: Vec<u8> = complement.iter().map(|&s| labels[s]).collect();
        let code = subsystem
            .iter()
            .fold(0usize, |acc, &s| acc * d + labels[s] as usize);
        map.entry(key).or_default().push((code as u32, idx as u32));
    }
    Ok(PartialTracePlan {
        subsystem,
        d_a,
        groups: map.into_values().collect(),
    })
}

/// Reduced density matrix of a pure constrained state.
pub fn reduced_dm_state(plan: &PartialTracePlan, psi: &Array1<C64>) -> Array2<C64> {
    let mut out = Array2::zeros((plan.d_a, plan.d_a));
    for group in &plan.groups {
        for &(a1, i1) in group {
            let z1 = psi[i1 as usize];
            if z1.norm_sqr() == 0.0 {
                continue;
            }
            for &(a2, i2) in group {
                let z2 = psi[i2 as usize];
                out[(a1 as usize, a2 as usize)] += z1 * z2.conj();
            }
        }
    }
    out
}

fn reduced_dm_real_column(plan: &PartialTracePlan, eig: &EigenSystem, col: usize) -> Array2<f64> {
    let mut out = Array2::zeros((plan.d_a, plan.d_a));
    for group in &plan.groups {
        for &(a1, i1) in group {
            let v1 = eig.vectors[(i1 as usize, col)];
            if v1 == 0.0 {
                continue;
            }
            for &(a2, i2) in group {
                out[(a1 as usize, a2 as usize)] += v1 * eig.vectors[(i2 as usize, col)];
            }
        }
    }
    out
}

/// Reduced density matrices of every eigenstate on one subsystem.
pub struct SubsystemTable {
    pub d_a: usize,
    pub sigmas: Vec<Array2<f64>>,
}

/// Compute all per-eigenstate reduced DMs, group-averaging degenerate
/// clusters so the result does not depend on the eigenvector choice inside
/// a cluster.
pub fn eigenstate_reduced_dms(
    plan: &PartialTracePlan,
    eig: &EigenSystem,
) -> SubsystemTable {
    let mut sigmas: Vec<Array2<f64>> = (0..eig.dim())
        .into_par_iter()
        .map(|i| reduced_dm_real_column(plan, eig, i))
        .collect();
    for g in &eig.groups {
        if g.len() > 1 {
            let mut mean = Array2::<f64>::zeros((plan.d_a, plan.d_a));
            for &i in g {
                mean += &sigmas[i];
            }
            mean /= g.len() as f64;
            for &i in g {
                sigmas[i] = mean.clone();
            }
        }
    }
    SubsystemTable {
        d_a: plan.d_a,
        sigmas,
    }
}

/// Ensemble reduced DM: the weighted sum of per-eigenstate reduced DMs.
pub fn ensemble_reduced_dm(table: &SubsystemTable, weights: &[f64]) -> Result<Array2<f64>> {
    if weights.len() != table.sigmas.len() {
        return Err(Error::consistency("weights do not match the eigenstate table"));
    }
    let mut out = Array2::zeros((table.d_a, table.d_a));
    for (w, s) in weights.iter().zip(&table.sigmas) {
        if *w < 1e-300 {
            continue;
        }
        out.scaled_add(*w, s);
    }
    Ok(out)
}

/// Validate a reduced DM: Hermitian, unit trace, eigenvalues above -1e-10.
pub fn validate_reduced_dm(rho: &Array2<C64>) -> Result<()> {
    let dim = rho.nrows();
    let mut tr = 0.0;
    for i in 0..dim {
        tr += rho[(i, i)].re;
    }
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::Integration(format!("reduced DM trace {tr} != 1")));
    }
    let (vals, _) = rho
        .clone()
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigh failed: {e}")))?;
    if vals.iter().any(|&v| v < -1e-10) {
        return Err(Error::Integration("reduced DM has a negative eigenvalue".into()));
    }
    Ok(())
}

fn schatten_norm(eigvals: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return eigvals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    eigvals
        .iter()
        .map(|v| v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn hermitian_eigvals(m: &Array2<C64>) -> Result<Vec<f64>> {
    let (vals, _) = m
        .clone()
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigh failed: {e}")))?;
    Ok(vals.to_vec())
}

/// Schatten-p distance between p-normalized Hermitian operators:
/// `|| a/||a||_p - b/||b||_p ||_p`.
pub fn schatten_distance(a: &Array2<C64>, b: &Array2<C64>, p: f64) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() || a.nrows() != a.ncols() {
        return Err(Error::validation("schatten distance needs equal square dims"));
    }
    if !(p >= 1.0) {
        return Err(Error::validation("schatten order p must be >= 1"));
    }
    let na = schatten_norm(&hermitian_eigvals(a)?, p);
    let nb = schatten_norm(&hermitian_eigvals(b)?, p);
    if na < 1e-300 || nb < 1e-300 {
        return Err(Error::validation("schatten distance of a zero operator"));
    }
    let diff = a / C64::new(na, 0.0) - b / C64::new(nb, 0.0);
    Ok(schatten_norm(&hermitian_eigvals(&diff)?, p))
}

/// Real-matrix convenience wrapper for [`schatten_distance`].
pub fn schatten_distance_real(a: &Array2<f64>, b: &Array2<f64>, p: f64) -> Result<f64> {
    let ac = a.mapv(|x| C64::new(x, 0.0));
    let bc = b.mapv(|x| C64::new(x, 0.0));
    schatten_distance(&ac, &bc, p)
}
