use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrialResultSet;
use crate::error::{Error, Result};

/// Normal quantile for two-sided 99% intervals.
pub const WILSON_Z: f64 = 2.5758293035489004;

/// Upper end of the constant search in [`exp_moment_calibrate`]; a result at
/// the cap means "unbounded, at least the cap".
pub const C_CAP: f64 = 100.0;

const C_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    #[default]
    Median,
    Q90,
}

impl Statistic {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Statistic::Median => quantile(values, 0.5),
            Statistic::Q90 => quantile(values, 0.9),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "q90" => Ok(Self::Q90),
            other => Err(Error::Config(format!("unknown statistic '{other}' (mean, median, q90)"))),
        }
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7). NaN for empty input.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Least squares `y = a + b x`; returns `(a, b, r²)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (a, b, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthFit {
    pub statistic: Statistic,
    /// `(n, statistic of Δ_n)` in increasing `n`.
    pub points: Vec<(usize, f64)>,
    /// `statistic ≈ a + b ln n`.
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    /// Slope of `ln statistic` against `ln n`; `None` if some statistic is not positive.
    pub exponent_fit: Option<f64>,
    pub exponent_r2: Option<f64>,
}

/// Regresses the chosen statistic of `Δ_n` on `ln n`, and `ln` of it on `ln n`.
pub fn fit_growth(results: &TrialResultSet, statistic: Statistic) -> Result<GrowthFit> {
    let sizes = results.sizes();
    if sizes.len() < 4 {
        return Err(Error::InsufficientData(format!("growth fit needs at least 4 distinct n, got {}", sizes.len())));
    }
    let points: Vec<(usize, f64)> = sizes.iter().map(|&n| (n, statistic.apply(&results.deltas(n)))).collect();
    let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (a, b, r2) = least_squares(&x, &y);
    let (exponent_fit, exponent_r2) = if y.iter().all(|&v| v > 0.0) {
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let (_, e, r) = least_squares(&x, &ly);
        (Some(e), Some(r))
    } else {
        (None, None)
    };
    Ok(GrowthFit { statistic, points, a, b, r2, exponent_fit, exponent_r2 })
}

/// The right-hand side scale `B` of the exponential-moment bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BParam {
    /// The same `B` at every `n`.
    Fixed(f64),
    /// `B = √(n · E ξ²)` for i.i.d. summands with the given variance.
    SqrtNVar(f64),
}

impl BParam {
    pub fn at(self, n: usize) -> f64 {
        match self {
            BParam::Fixed(b) => b,
            BParam::SqrtNVar(v) => (n as f64 * v).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub n: usize,
    pub b: f64,
    pub c_hat: f64,
    /// The bound held at the cap: `c_hat` is only a lower bound.
    pub unbounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub tau: f64,
    pub per_n: Vec<CalibrationRow>,
    /// Value at the largest `n`.
    pub c_hat: f64,
    pub unbounded: bool,
}

/// `ln mean exp(s·v)`, evaluated stably.
fn log_mean_exp(values: &[f64], s: f64) -> f64 {
    let top = values.iter().map(|v| s * v).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (s * v - top).exp()).sum();
    top + (sum / values.len() as f64).ln()
}

/// Largest `c ∈ [0, C_CAP]` (bisection to `1e-4`) with
/// `mean exp(c Δ/τ) ≤ 1 + B/τ`, for every `n` in the set.
pub fn exp_moment_calibrate(results: &TrialResultSet, tau: f64, b: BParam) -> Result<CalibrationReport> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::DegenerateTau(tau));
    }
    let sizes = results.sizes();
    if sizes.is_empty() {
        return Err(Error::InsufficientData("no trials".into()));
    }
    let per_n: Vec<CalibrationRow> = sizes
        .iter()
        .map(|&n| {
            let scaled: Vec<f64> = results.deltas(n).iter().map(|d| d / tau).collect();
            let bn = b.at(n);
            let limit = (bn / tau).ln_1p();
            let ok = |c: f64| log_mean_exp(&scaled, c) <= limit;
            if ok(C_CAP) {
                return CalibrationRow { n, b: bn, c_hat: C_CAP, unbounded: true };
            }
            let (mut lo, mut hi) = (0.0, C_CAP);
            while hi - lo > C_TOL {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            CalibrationRow { n, b: bn, c_hat: lo, unbounded: false }
        })
        .collect();
    let last = per_n.last().unwrap();
    Ok(CalibrationReport { tau, c_hat: last.c_hat, unbounded: last.unbounded, per_n })
}

/// Wilson score interval for `k` successes out of `m` at normal quantile `z`;
/// `[0, 3/m]` (rule of three) when `k = 0`.
pub fn wilson_interval(k: u64, m: u64, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let mf = m as f64;
    if k == 0 {
        return (0.0, (3.0 / mf).min(1.0));
    }
    let p = k as f64 / mf;
    let z2 = z * z;
    let denom = 1.0 + z2 / mf;
    let center = (p + z2 / (2.0 * mf)) / denom;
    let half = z / denom * (p * (1.0 - p) / mf + z2 / (4.0 * mf * mf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub x: f64,
    pub exceed: u64,
    /// Empirical `P(c₁ Δ/τ ≥ x)`.
    pub prob: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `(1 + B/τ) e^{−x}`.
    pub envelope: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub n: usize,
    pub tau: f64,
    pub b: f64,
    pub trials: u64,
    /// Largest `c₁` with `P(Δ/τ ≥ t) ≤ (1 + B/τ) e^{−c₁ t}` at every observed `t > 0`.
    pub c1: f64,
    pub rows: Vec<TailRow>,
    /// Least-squares slope of `ln prob` against `x` over rows with exceedances.
    pub log_slope: Option<f64>,
    pub all_within: bool,
}

/// Empirical tail of `c₁ Δ_n/τ` on `x_grid` against the exponential envelope.
pub fn tail_report(results: &TrialResultSet, tau: f64, n: usize, x_grid: &[f64], b: BParam) -> Result<TailReport> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::DegenerateTau(tau));
    }
    if x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("x grid must be strictly increasing".into()));
    }
    let mut t: Vec<f64> = results.deltas(n).iter().map(|d| d / tau).collect();
    if t.is_empty() {
        return Err(Error::InsufficientData(format!("no trials at n = {n}")));
    }
    t.sort_by(f64::total_cmp);
    let m = t.len();
    let bn = b.at(n);
    let scale = 1.0 + bn / tau;

    // survival at each distinct positive value: P(T ≥ t_k) = (m − k)/m for its first index k
    let mut c1 = C_CAP;
    let mut k = 0;
    while k < m {
        let v = t[k];
        if v > 0.0 {
            let surv = (m - k) as f64 / m as f64;
            c1 = c1.min((scale / surv).ln() / v);
        }
        while k < m && t[k] == v {
            k += 1;
        }
    }

    let rows: Vec<TailRow> = x_grid
        .iter()
        .map(|&x| {
            let exceed = t.iter().filter(|&&v| c1 * v >= x).count() as u64;
            let prob = exceed as f64 / m as f64;
            let (ci_lo, ci_hi) = wilson_interval(exceed, m as u64, WILSON_Z);
            let envelope = scale * (-x).exp();
            TailRow { x, exceed, prob, ci_lo, ci_hi, envelope, within: prob <= envelope * (1.0 + 1e-12) }
        })
        .collect();
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.exceed > 0).map(|r| (r.x, r.prob.ln())).collect();
    let log_slope = if fit.len() >= 2 && fit.iter().any(|p| p.0 != fit[0].0) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        Some(least_squares(&xs, &ys).1)
    } else {
        None
    };
    let all_within = rows.iter().all(|r| r.within);
    Ok(TailReport { n, tau, b: bn, trials: m as u64, c1, rows, log_slope, all_within })
}
