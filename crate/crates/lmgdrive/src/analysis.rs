//! Post-processing of sweep records: optimal temperatures, scaling fits and
//! solver comparisons.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::config::{SolverKind, SweepConfig};
use crate::error::{AppError, Result};
use crate::sweep::{run_sweep, SweepRecord};

pub const MIN_TEMPERATURE_POINTS: usize = 5;
pub const MIN_SIZES: usize = 3;

/// Maximum of a fidelity-versus-temperature curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalTemperature {
    /// Interpolated optimum; `None` when the discrete maximum is an endpoint.
    pub t_opt: Option<f64>,
    /// Interpolated maximum, or the endpoint value on the boundary.
    pub max_fidelity: f64,
    /// The discrete argmax is the lowest or highest temperature.
    pub boundary: bool,
    /// Grid point with the largest fidelity.
    pub t_argmax: f64,
}

/// Locates the interior maximum of `F(T)` from `(T, F)` samples.
///
/// The parabola through the discrete argmax and its two neighbours is fitted
/// in `x = log10 T`, which is how the grids are spaced.
pub fn find_optimal_temperature(points: &[(f64, f64)]) -> Result<OptimalTemperature> {
    if points.len() < MIN_TEMPERATURE_POINTS {
        return Err(AppError::Grid(format!(
            "{} temperature points, at least {MIN_TEMPERATURE_POINTS} needed",
            points.len()
        )));
    }
    if !points.iter().all(|(t, f)| *t > 0.0 && t.is_finite() && f.is_finite()) {
        return Err(AppError::Grid("temperatures must be positive and fidelities finite".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(t, f)| (t.log10(), f)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(AppError::Grid("duplicate temperatures".into()));
    }
    let k = (0..pts.len()).fold(0, |best, i| if pts[i].1 > pts[best].1 { i } else { best });
    let t_argmax = 10f64.powf(pts[k].0);
    if k == 0 || k == pts.len() - 1 {
        return Ok(OptimalTemperature { t_opt: None, max_fidelity: pts[k].1, boundary: true, t_argmax });
    }
    let ((x0, y0), (x1, y1), (x2, y2)) = (pts[k - 1], pts[k], pts[k + 1]);
    // Newton form: y = y0 + d1 (x - x0) + d2 (x - x0)(x - x1).
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let d2 = (d12 - d01) / (x2 - x0);
    if !(d2 < 0.0) {
        // Flat top: the discrete maximum is the best estimate.
        return Ok(OptimalTemperature { t_opt: Some(t_argmax), max_fidelity: y1, boundary: false, t_argmax });
    }
    let xv = 0.5 * (x0 + x1) - d01 / (2.0 * d2);
    let yv = y0 + d01 * (xv - x0) + d2 * (xv - x0) * (xv - x1);
    Ok(OptimalTemperature { t_opt: Some(10f64.powf(xv)), max_fidelity: yv, boundary: false, t_argmax })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = a N`.
    Linear,
    /// `y = b N^(-kappa)`, fitted in log-log space.
    Power,
    /// `y = b/N - c/N^2`.
    QuadraticInverse,
}

/// Least-squares fit of one scaling model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub model: FitModel,
    /// `[a]`, `[b, kappa]` or `[b, c]`.
    pub coefficients: Vec<f64>,
    /// `y_i - model(N_i)` in the original units.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// Coefficient of determination against the mean, computed in the space
    /// the fit is done in (log-log for the power law).
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        let c = &self.coefficients;
        match self.model {
            FitModel::Linear => c[0] * n,
            FitModel::Power => c[0] * n.powf(-c[1]),
            FitModel::QuadraticInverse => c[0] / n - c[1] / (n * n),
        }
    }
}

fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Solves the normal equations of `y ~ X beta` for two columns.
fn least_squares_2(cols: [&[f64]; 2], y: &[f64]) -> Result<[f64; 2]> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a11, a12, a22) = (dot(cols[0], cols[0]), dot(cols[0], cols[1]), dot(cols[1], cols[1]));
    let (b1, b2) = (dot(cols[0], y), dot(cols[1], y));
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * a11 * a22) {
        return Err(AppError::Fit("rank-deficient design matrix".into()));
    }
    Ok([(b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det])
}

/// Fits `model` to `(N, y)` points.
pub fn fit_scaling(points: &[(f64, f64)], model: FitModel) -> Result<ScalingFit> {
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < MIN_SIZES {
        return Err(AppError::Fit(format!("{} distinct sizes, at least {MIN_SIZES} needed", sizes.len())));
    }
    if !points.iter().all(|(n, y)| *n > 0.0 && n.is_finite() && y.is_finite()) {
        return Err(AppError::Fit("sizes must be positive and values finite".into()));
    }
    let n: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (coefficients, r2) = match model {
        FitModel::Linear => {
            let a = n.iter().zip(&y).map(|(x, v)| x * v).sum::<f64>() / n.iter().map(|x| x * x).sum::<f64>();
            let fitted: Vec<f64> = n.iter().map(|x| a * x).collect();
            (vec![a], r_squared(&y, &fitted))
        }
        FitModel::Power => {
            if !y.iter().all(|v| *v > 0.0) {
                return Err(AppError::Fit("power-law fit needs positive values".into()));
            }
            let ln_n: Vec<f64> = n.iter().map(|x| x.ln()).collect();
            let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let ones = vec![1.0; n.len()];
            let [ln_b, slope] = least_squares_2([&ones, &ln_n], &ln_y)?;
            let fitted: Vec<f64> = ln_n.iter().map(|x| ln_b + slope * x).collect();
            (vec![ln_b.exp(), -slope], r_squared(&ln_y, &fitted))
        }
        FitModel::QuadraticInverse => {
            let inv: Vec<f64> = n.iter().map(|x| 1.0 / x).collect();
            let neg_inv2: Vec<f64> = n.iter().map(|x| -1.0 / (x * x)).collect();
            let [b, c] = least_squares_2([&inv, &neg_inv2], &y)?;
            let fitted: Vec<f64> = n.iter().map(|x| b / x - c / (x * x)).collect();
            (vec![b, c], r_squared(&y, &fitted))
        }
    };
    let mut fit = ScalingFit { model, coefficients, residuals: Vec::new(), rms_residual: 0.0, r_squared: r2 };
    fit.residuals = n.iter().zip(&y).map(|(x, v)| v - fit.predict(*x)).collect();
    fit.rms_residual = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / n.len() as f64).sqrt();
    Ok(fit)
}

/// Records that differ only in temperature: one `F(T)` curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveKey {
    pub path: String,
    pub protocol: String,
    pub solver: String,
    pub n: usize,
    pub t_final: f64,
    pub q: f64,
    pub theta: f64,
    pub r: u8,
}

/// First record position, key and points of one curve while grouping.
type PendingCurve = (usize, CurveKey, Vec<(f64, f64)>);

/// Groups records into `F(T)` curves, sorted by temperature; curve order is
/// the coordinate order of the records.
pub fn curves(records: &[SweepRecord]) -> Vec<(CurveKey, Vec<(f64, f64)>)> {
    let mut map: BTreeMap<String, PendingCurve> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = CurveKey {
            path: r.path.to_string(),
            protocol: r.protocol.to_string(),
            solver: r.solver.to_string(),
            n: r.n,
            t_final: r.t_final,
            q: r.q,
            theta: r.theta,
            r: r.r,
        };
        let id = format!("{:?}", key);
        map.entry(id).or_insert_with(|| (i, key, Vec::new())).2.push((r.temperature, r.fidelity));
    }
    let mut out: Vec<PendingCurve> = map.into_values().collect();
    out.sort_by_key(|c| c.0);
    out.into_iter()
        .map(|(_, k, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k, pts)
        })
        .collect()
}

/// Optimum of one curve, for fit reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveOptimum {
    pub curve: CurveKey,
    pub optimum: OptimalTemperature,
}

/// Scaling fits over `N` for every family of curves sharing all other
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub optima: Vec<CurveOptimum>,
    /// `T_opt = a N` over curves with an interior optimum.
    pub t_opt_fit: Option<ScalingFit>,
    /// `max F` against `N` with the requested model.
    pub max_fidelity_fit: Option<ScalingFit>,
    /// Why a fit is missing, if one is.
    pub notes: Vec<String>,
}

/// Runs [`find_optimal_temperature`] on every curve in `records` (which must
/// share every coordinate but `N` and `T`) and fits the optima.
pub fn scaling_report(records: &[SweepRecord], fidelity_model: FitModel) -> Result<ScalingReport> {
    let mut optima = Vec::new();
    for (curve, pts) in curves(records) {
        optima.push(CurveOptimum { curve, optimum: find_optimal_temperature(&pts)? });
    }
    let mut notes = Vec::new();
    let interior: Vec<(f64, f64)> = optima
        .iter()
        .filter_map(|o| o.optimum.t_opt.map(|t| (o.curve.n as f64, t)))
        .collect();
    let t_opt_fit = match fit_scaling(&interior, FitModel::Linear) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("T_opt fit: {e}"));
            None
        }
    };
    let maxima: Vec<(f64, f64)> = optima.iter().map(|o| (o.curve.n as f64, o.optimum.max_fidelity)).collect();
    let max_fidelity_fit = match fit_scaling(&maxima, fidelity_model) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("max fidelity fit: {e}"));
            None
        }
    };
    Ok(ScalingReport { optima, t_opt_fit, max_fidelity_fit, notes })
}

/// One temperature of a solver comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub f_heom: Option<f64>,
    pub f_lindblad: Option<f64>,
    pub discrepancy: Option<f64>,
    /// `T < gamma / (2 pi)`, where the Markovian treatment is expected to fail.
    pub low_temperature: bool,
    pub error: Option<String>,
}

/// Pairs hierarchy and Lindblad records of one curve by temperature.
pub fn comparison_table(heom: &[SweepRecord], lindblad: &[SweepRecord], temperatures: &[f64], gamma: f64) -> Vec<ComparisonRow> {
    let find = |recs: &[SweepRecord], t: f64| recs.iter().find(|r| r.temperature == t).map(|r| r.fidelity);
    temperatures
        .iter()
        .map(|&t| {
            let (h, l) = (find(heom, t), find(lindblad, t));
            let missing: Vec<&str> = [("heom", h), ("lindblad", l)]
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(s, _)| *s)
                .collect();
            ComparisonRow {
                temperature: t,
                f_heom: h,
                f_lindblad: l,
                discrepancy: h.zip(l).map(|(a, b)| (a - b).abs()),
                low_temperature: t < gamma / (2.0 * PI),
                error: (!missing.is_empty()).then(|| format!("no {} result", missing.join("/"))),
            }
        })
        .collect()
}

/// Runs one curve with both solvers (in `output_dir/heom` and
/// `output_dir/lindblad`, so reruns are cached) and tabulates the
/// discrepancy per temperature. Failed points appear with their error.
pub fn compare_solvers(config: &SweepConfig) -> Result<Vec<ComparisonRow>> {
    config.validate()?;
    let single = |name: &str, len: usize| {
        if len == 1 {
            Ok(())
        } else {
            Err(AppError::Config(format!("compare needs exactly one `{name}` value, got {len}")))
        }
    };
    single("n", config.n.len())?;
    single("tf_grid", config.drive_times().len())?;
    single("q", config.q.len())?;
    single("theta", config.theta.len())?;
    single("r", config.r.len())?;
    let mut heom = config.clone();
    heom.solver = SolverKind::Heom;
    heom.force_heom = true;
    heom.output_dir = config.output_dir.join("heom");
    let mut lindblad = config.clone();
    lindblad.solver = SolverKind::Lindblad;
    lindblad.force_heom = true;
    lindblad.output_dir = config.output_dir.join("lindblad");
    let h = run_sweep(&heom)?;
    let l = run_sweep(&lindblad)?;
    let mut rows = comparison_table(&h.records, &l.records, &config.temperatures(), config.gamma);
    for row in &mut rows {
        let errs: Vec<String> = h
            .failures
            .iter()
            .chain(&l.failures)
            .filter(|f| f.temperature == row.temperature)
            .map(|f| format!("{}: {}", f.solver, f.message))
            .collect();
        if !errs.is_empty() {
            row.error = Some(errs.join("; "));
        }
    }
    Ok(rows)
}
