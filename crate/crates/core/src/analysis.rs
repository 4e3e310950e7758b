//! Fitting utilities and the derived-rate experiments: per-eigenstate decay
//! fits, the decay-rate/counter regression, the rate-vs-1/c scan, and the
//! bivariate cubic surface for the two-variable thermalization ansatz.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, LeastSquaresSvd};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::basis::ConstrainedBasis;
use crate::dynamics::{propagate_drift, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{BondModel, Caps};
use crate::ops::{effective_hamiltonian, embed_vector, ChannelRecipe, LiouvillianKind};
use crate::spectra::EigenSystem;

/// Least-squares outcome. `coefficients` length matches the model: 1 for an
/// exponential rate, 2 for a line, 10 for the bivariate cubic.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    pub covariance: Option<Array2<f64>>,
    pub n_samples: usize,
}

/// Which samples enter an exponential fit.
#[derive(Clone, Copy, Debug)]
pub enum FitWindow {
    /// Keep `t` while the value exceeds `floor * value(0)` (default 0.1).
    RelativeFloor(f64),
    /// Keep everything (positive values only).
    All,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::RelativeFloor(0.1)
    }
}

/// Fit `value ~ A exp(-alpha t)` by unweighted least squares on
/// `log(value)`; returns `alpha` (minus the log-slope).
pub fn fit_exponential(times: &[f64], values: &[f64], window: FitWindow) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(Error::consistency("times and values must have equal length"));
    }
    let v0 = values.first().copied().unwrap_or(0.0);
    let floor = match window {
        FitWindow::RelativeFloor(f) => f * v0,
        FitWindow::All => 0.0,
    };
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if v > 0.0 && v >= floor {
            ts.push(t);
            logs.push(v.ln());
        } else if matches!(window, FitWindow::RelativeFloor(_)) && v < floor {
            break; // contiguous window from t = 0
        }
    }
    if ts.len() < 3 {
        return Err(Error::validation(
            "exponential fit needs at least 3 usable (positive) samples",
        ));
    }
    let line = fit_linear(&ts, &logs)?;
    let alpha = -line.coefficients[0];
    let cov = line.covariance.map(|c| {
        let mut out = Array2::zeros((1, 1));
        out[(0, 0)] = c[(0, 0)];
        out
    });
    Ok(FitResult {
        coefficients: vec![alpha],
        residual_rms: line.residual_rms,
        covariance: cov,
        n_samples: ts.len(),
    })
}

/// Ordinary least squares line; coefficients `[slope, intercept]`.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::validation("linear fit needs at least 2 samples"));
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 || x.iter().all(|&v| v == x[0]) {
        return Err(Error::validation("degenerate abscissae in linear fit"));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let mut rss = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let r = b - (slope * a + intercept);
        rss += r * r;
    }
    let rms = (rss / x.len() as f64).sqrt();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let sigma2 = rss / dof;
    let mut cov = Array2::zeros((2, 2));
    cov[(0, 0)] = sigma2 * n / det;
    cov[(1, 1)] = sigma2 * sxx / det;
    cov[(0, 1)] = -sigma2 * sx / det;
    cov[(1, 0)] = cov[(0, 1)];
    Ok(FitResult {
        coefficients: vec![slope, intercept],
        residual_rms: rms,
        covariance: Some(cov),
        n_samples: x.len(),
    })
}

/// Least-squares slope of a line forced through the origin.
pub fn fit_linear_through_origin(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::validation("through-origin fit needs samples"));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx < 1e-300 {
        return Err(Error::validation("degenerate abscissae in through-origin fit"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let mut rss = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let r = b - slope * a;
        rss += r * r;
    }
    let rms = (rss / x.len() as f64).sqrt();
    let dof = (x.len() as f64 - 1.0).max(1.0);
    let mut cov = Array2::zeros((1, 1));
    cov[(0, 0)] = rss / dof / sxx;
    Ok(FitResult {
        coefficients: vec![slope],
        residual_rms: rms,
        covariance: Some(cov),
        n_samples: x.len(),
    })
}

/// Bivariate cubic surface over standardized inputs.
#[derive(Clone, Debug)]
pub struct SurfaceFit {
    pub fit: FitResult,
    pub residuals: Vec<f64>,
    e_mean: f64,
    e_std: f64,
    n_mean: f64,
    n_std: f64,
}

fn cubic_monomials(e: f64, n: f64) -> [f64; 10] {
    [
        1.0,
        e,
        n,
        e * e,
        e * n,
        n * n,
        e * e * e,
        e * e * n,
        e * n * n,
        n * n * n,
    ]
}

fn standardize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

impl SurfaceFit {
    pub fn predict(&self, e: f64, n: f64) -> f64 {
        let es = (e - self.e_mean) / self.e_std;
        let ns = (n - self.n_mean) / self.n_std;
        cubic_monomials(es, ns)
            .iter()
            .zip(&self.fit.coefficients)
            .map(|(m, c)| m * c)
            .sum()
    }
}

/// Fit `o ~ cubic(e, n)` over the ten monomials, with inputs standardized
/// internally. Residuals are reported per sample.
pub fn fit_bivariate_cubic(e: &[f64], n: &[f64], o: &[f64]) -> Result<SurfaceFit> {
    if e.len() != n.len() || e.len() != o.len() {
        return Err(Error::consistency("input lengths differ"));
    }
    if e.len() < 10 {
        return Err(Error::validation("bivariate cubic needs at least 10 samples"));
    }
    let (e_mean, e_std) = standardize(e);
    let (n_mean, n_std) = standardize(n);
    let rows = e.len();
    let mut design = Array2::zeros((rows, 10));
    for i in 0..rows {
        let es = (e[i] - e_mean) / e_std;
        let ns = (n[i] - n_mean) / n_std;
        for (k, m) in cubic_monomials(es, ns).iter().enumerate() {
            design[(i, k)] = *m;
        }
    }
    let rhs = Array1::from(o.to_vec());
    let sol = design
        .least_squares(&rhs)
        .map_err(|err| Error::Linalg(format!("least squares failed: {err}")))?;
    if sol.rank < 10 {
        return Err(Error::validation(format!(
            "rank-deficient design matrix (rank {})",
            sol.rank
        )));
    }
    let coef = sol.solution.to_vec();
    let mut residuals = Vec::with_capacity(rows);
    let mut rss = 0.0;
    for i in 0..rows {
        let mut pred = 0.0;
        for k in 0..10 {
            pred += design[(i, k)] * coef[k];
        }
        let r = o[i] - pred;
        residuals.push(r);
        rss += r * r;
    }
    let rms = (rss / rows as f64).sqrt();
    let dof = (rows as f64 - 10.0).max(1.0);
    let gram = design.t().dot(&design);
    let covariance = gram.inv().ok().map(|g| g * (rss / dof));
    Ok(SurfaceFit {
        fit: FitResult {
            coefficients: coef,
            residual_rms: rms,
            covariance,
            n_samples: rows,
        },
        residuals,
        e_mean,
        e_std,
        n_mean,
        n_std,
    })
}

/// 1D polynomial least squares (used for the energy-only comparison curve).
pub fn fit_polynomial_1d(x: &[f64], y: &[f64], degree: usize) -> Result<(FitResult, Vec<f64>)> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::validation("not enough samples for the polynomial fit"));
    }
    let (mean, std) = standardize(x);
    let rows = x.len();
    let cols = degree + 1;
    let mut design = Array2::zeros((rows, cols));
    for i in 0..rows {
        let xs = (x[i] - mean) / std;
        let mut p = 1.0;
        for k in 0..cols {
            design[(i, k)] = p;
            p *= xs;
        }
    }
    let rhs = Array1::from(y.to_vec());
    let sol = design
        .least_squares(&rhs)
        .map_err(|err| Error::Linalg(format!("least squares failed: {err}")))?;
    let coef = sol.solution.to_vec();
    let mut residuals = Vec::with_capacity(rows);
    let mut rss = 0.0;
    for i in 0..rows {
        let mut pred = 0.0;
        for k in 0..cols {
            pred += design[(i, k)] * coef[k];
        }
        let r = y[i] - pred;
        residuals.push(r);
        rss += r * r;
    }
    Ok((
        FitResult {
            coefficients: coef,
            residual_rms: (rss / rows as f64).sqrt(),
            covariance: None,
            n_samples: rows,
        },
        residuals,
    ))
}

/// Options for the per-eigenstate decay experiment.
#[derive(Clone, Debug)]
pub struct DecayOptions {
    pub t_max: f64,
    pub n_points: usize,
    pub dt: Option<f64>,
    pub recipe: ChannelRecipe,
    pub window: FitWindow,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            t_max: 20.0,
            n_points: 81,
            dt: None,
            recipe: ChannelRecipe::FamilyDefault,
            window: FitWindow::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayRow {
    pub index: usize,
    pub energy: f64,
    pub n_expect: f64,
    pub alpha: f64,
    pub fit_rms: f64,
}

#[derive(Clone, Debug)]
pub struct DecayScan {
    pub rows: Vec<DecayRow>,
    /// Degenerate indices dropped from the request.
    pub excluded_degenerate: Vec<usize>,
    /// Through-origin slope of `alpha` against `<N>` (an estimate of
    /// `-gamma2 = 2 sqrt(2j)/c` for the spin chain).
    pub gamma_fit: f64,
    /// Free-intercept regression `(slope, intercept)`, reported as a
    /// diagnostic.
    pub gamma_fit_free: (f64, f64),
    pub origin_fit_rms: f64,
}

/// Fidelity decay rates of selected eigenstates under the positive-rate
/// Liouvillian.
///
/// Each eigenstate is evolved along the jump-free branch of the unraveling
/// (`dpsi/dt = -i H_+ psi`) and `|<E_i|psi(t)>|^2` is fitted exponentially.
/// Jumps only add a non-negative `O(1/c^2)` correction to this fidelity, so
/// the branch isolates the decay law; the equivalence is checked against
/// full density-matrix integration in the test suite.
pub fn decay_scan(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    eig: &EigenSystem,
    n_expect: &[f64],
    indices: &[usize],
    opts: &DecayOptions,
) -> Result<DecayScan> {
    if n_expect.len() != eig.dim() {
        return Err(Error::consistency("counter expectations do not match spectrum"));
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut excluded = Vec::new();
    for &i in indices {
        if i >= eig.dim() {
            return Err(Error::validation(format!("eigenstate index {i} out of range")));
        }
        if eig.is_degenerate(i) {
            excluded.push(i);
        } else {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::validation(
            "no nondegenerate eigenstates left in the decay window",
        ));
    }
    let h_plus = effective_hamiltonian(model, basis, caps, LiouvillianKind::Positive, opts.recipe)?;
    let grid = TimeGrid::new(opts.t_max, opts.n_points)?;
    let dt = opts.dt.unwrap_or_else(|| crate::dynamics::default_dt(model));

    let rows: Result<Vec<DecayRow>> = kept
        .par_iter()
        .map(|&i| {
            let v = eig.vector(i).mapv(|x| C64::new(x, 0.0));
            let full = embed_vector(model, basis, caps, &v)?;
            let series = propagate_drift(&h_plus, &full, &grid, dt)?;
            let fid = &series.channel("survival").unwrap().values;
            let fit = fit_exponential(&series.times, fid, opts.window)?;
            Ok(DecayRow {
                index: i,
                energy: eig.energies[i],
                n_expect: n_expect[i],
                alpha: fit.coefficients[0],
                fit_rms: fit.residual_rms,
            })
        })
        .collect();
    let rows = rows?;

    let xs: Vec<f64> = rows.iter().map(|r| r.n_expect).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let origin = fit_linear_through_origin(&xs, &ys)?;
    let free = if xs.len() >= 2 && xs.iter().any(|&x| (x - xs[0]).abs() > 1e-12) {
        let f = fit_linear(&xs, &ys)?;
        (f.coefficients[0], f.coefficients[1])
    } else {
        (origin.coefficients[0], 0.0)
    };
    Ok(DecayScan {
        rows,
        excluded_degenerate: excluded,
        gamma_fit: origin.coefficients[0],
        gamma_fit_free: free,
        origin_fit_rms: origin.residual_rms,
    })
}

#[derive(Clone, Debug)]
pub struct CScanRow {
    pub c: f64,
    pub gamma_fit: f64,
}

#[derive(Clone, Debug)]
pub struct CScan {
    pub rows: Vec<CScanRow>,
    /// Through-origin slope of `gamma_fit` against `1/c`.
    pub slope: f64,
    /// Free-intercept diagnostic `(slope, intercept)`.
    pub free: (f64, f64),
    /// RMS residual of the through-origin fit relative to the mean rate.
    pub rel_residual: f64,
}

/// Repeat the decay scan across dissipation strengths. The spectrum and the
/// counter do not depend on `c`, so they are reused.
pub fn c_scan(
    model: &BondModel,
    basis: &ConstrainedBasis,
    caps: &Caps,
    eig: &EigenSystem,
    n_expect: &[f64],
    indices: &[usize],
    c_list: &[f64],
    opts: &DecayOptions,
) -> Result<CScan> {
    if c_list.is_empty() {
        return Err(Error::validation("c list must be non-empty"));
    }
    let mut rows = Vec::with_capacity(c_list.len());
    for &c in c_list {
        if !(c > 0.0) {
            return Err(Error::validation("every c must be positive"));
        }
        let mut spec = model.spec.clone();
        spec.c = c;
        let model_c = BondModel::from_spec(&spec)?;
        let scan = decay_scan(&model_c, basis, caps, eig, n_expect, indices, opts)?;
        rows.push(CScanRow {
            c,
            gamma_fit: scan.gamma_fit,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.c).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gamma_fit).collect();
    let origin = fit_linear_through_origin(&xs, &ys)?;
    let free = if rows.len() >= 2 {
        let f = fit_linear(&xs, &ys)?;
        (f.coefficients[0], f.coefficients[1])
    } else {
        (origin.coefficients[0], 0.0)
    };
    let mean_rate = ys.iter().map(|v| v.abs()).sum::<f64>() / ys.len() as f64;
    Ok(CScan {
        rows,
        slope: origin.coefficients[0],
        free,
        rel_residual: if mean_rate > 0.0 {
            origin.residual_rms / mean_rate
        } else {
            0.0
        },
    })
}

/// Pick a decay window: the tagged scar closest to the target energy plus
/// the `count - 1` nearest nondegenerate thermal states.
///
/// `target_energy` defaults to the middle of the lower half of the band,
/// where the scar tower is well separated from the band edge.
pub fn pick_decay_window(
    eig: &EigenSystem,
    scar_indices: &[usize],
    count: usize,
    target_energy: Option<f64>,
) -> Result<Vec<usize>> {
    if count < 2 {
        return Err(Error::validation("decay window needs at least 2 states"));
    }
    let target = target_energy.unwrap_or(eig.energies[0] / 2.0);
    let scar = scar_indices
        .iter()
        .copied()
        .filter(|&i| !eig.is_degenerate(i))
        .min_by(|&a, &b| {
            let da = (eig.energies[a] - target).abs();
            let db = (eig.energies[b] - target).abs();
            da.partial_cmp(&db).unwrap()
        })
        .ok_or_else(|| Error::validation("no nondegenerate scar state available"))?;
    let e0 = eig.energies[scar];
    let mut thermal: Vec<usize> = (0..eig.dim())
        .filter(|&i| i != scar && !eig.is_degenerate(i) && !scar_indices.contains(&i))
        .collect();
    thermal.sort_by(|&a, &b| {
        let da = (eig.energies[a] - e0).abs();
        let db = (eig.energies[b] - e0).abs();
        da.partial_cmp(&db).unwrap()
    });
    let mut out = vec![scar];
    out.extend(thermal.into_iter().take(count - 1));
    if out.len() < count {
        return Err(Error::validation(
            "not enough nondegenerate states near the scar",
        ));
    }
    out.sort_unstable();
    Ok(out)
}
