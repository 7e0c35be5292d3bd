use rand::Rng;
use serde::Serialize;

use super::flow::close;
use super::{maximal_coupling, smallest_constant, JointDist};
use crate::dist::GridDist;
use crate::error::{Error, Result};

/// Largest number of mixture factors accepted.
pub const MAX_FACTORS: usize = 64;

/// Tail cut of the truncated compound Poisson series.
const ACCOMPANYING_TAIL: f64 = 1e-15;

/// `F = (1 − p) U + p V` with `U` centered and supported in `[−τ, τ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    pub p: f64,
    pub u: GridDist,
    pub v: GridDist,
    pub tau: f64,
}

impl MixtureSpec {
    pub fn new(p: f64, u: GridDist, v: GridDist, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!("mixture weight {p} outside [0, 1]")));
        }
        if !(tau >= 0.0) {
            return Err(Error::OutOfDomain(tau));
        }
        let m = u.mean();
        if m.abs() > 1e-10 {
            return Err(Error::NotCentered(m));
        }
        let radius = u.min_point().abs().max(u.max_point().abs());
        if radius > tau * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidDistribution(format!("U has support radius {radius} > tau = {tau}")));
        }
        Ok(Self { p, u, v, tau })
    }

    /// The mixture law `F`.
    pub fn law(&self) -> Result<GridDist> {
        if self.p == 0.0 {
            Ok(self.u.clone())
        } else if self.p == 1.0 {
            Ok(self.v.clone())
        } else {
            GridDist::mixture(&[(1.0 - self.p, &self.u), (self.p, &self.v)])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccompanyingReport {
    pub n: usize,
    pub lambda: f64,
    /// Slack `λ/n` given to each factor coupling.
    pub factor_slack: f64,
    pub tau: f64,
    /// `P(|ξ_i − η_i| > λ/n)` of each factor's maximal coupling.
    pub factor_p_fail: Vec<f64>,
    /// `Σ_i p_fail_i`.
    pub union_bound: f64,
    /// `1 − Π_i (1 − p_fail_i)`: probability that some factor fails.
    pub any_factor_fails: f64,
    pub trials: u64,
    pub failures: u64,
    /// Monte Carlo estimate of `P(|ξ − η| > λ)`.
    pub estimate: f64,
    pub std_error: f64,
    /// The same probability from the exact law of `Σ (ξ_i − η_i)`.
    pub exact: Option<f64>,
    pub max_p: f64,
    pub sum_p_squared: f64,
    /// All `V_i` identical: the `Σ p_i²` term is dropped from the bound shape.
    pub identical_v: bool,
    /// Smallest `c` with `c (max p_i + exp(−λ/(c τ))) [+ Σ p_i²] ≥` the exact
    /// (else estimated) failure probability.
    pub c_hat: f64,
}

/// Couples `ξ = Σ ξ_i`, `ξ_i ~ F_i`, with `η = Σ η_i`, `η_i ~ e(F_i)`, through
/// independent per-factor maximal couplings at slack `λ/n`, and measures
/// `P(|ξ − η| > λ)`.
pub fn accompanying_coupling<R: Rng + ?Sized>(mixtures: &[MixtureSpec], lambda: f64, trials: u64, rng: &mut R) -> Result<AccompanyingReport> {
    let n = mixtures.len();
    if n == 0 || n > MAX_FACTORS {
        return Err(Error::Config(format!("need 1..={MAX_FACTORS} mixture factors, got {n}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositive(lambda));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let slack = lambda / n as f64;
    let mut couplings: Vec<JointDist> = Vec::with_capacity(n);
    let mut factor_p_fail = Vec::with_capacity(n);
    for m in mixtures {
        let f = m.law()?;
        let e = f.compound_poisson(ACCOMPANYING_TAIL)?;
        let (joint, p_fail) = maximal_coupling(&f, &e, slack)?;
        couplings.push(joint);
        factor_p_fail.push(p_fail);
    }

    let mut failures = 0u64;
    for _ in 0..trials {
        let gap: f64 = couplings
            .iter()
            .map(|j| {
                let (x, y) = j.sample(rng);
                x - y
            })
            .sum();
        if !close(gap.abs(), lambda) {
            failures += 1;
        }
    }
    let estimate = failures as f64 / trials as f64;
    let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();

    let exact = exact_failure(&couplings, lambda)?;

    let max_p = mixtures.iter().map(|m| m.p).fold(0.0, f64::max);
    let sum_p_squared: f64 = mixtures.iter().map(|m| m.p * m.p).sum();
    let identical_v = mixtures.windows(2).all(|w| w[0].v == w[1].v);
    let tau = mixtures.iter().map(|m| m.tau).fold(0.0, f64::max);
    let extra = if identical_v { 0.0 } else { sum_p_squared };
    let target = exact.unwrap_or(estimate) - extra;
    let c_hat = smallest_constant(
        |c| {
            let decay = if tau > 0.0 { (-lambda / (c * tau)).exp() } else { 0.0 };
            c * (max_p + decay)
        },
        target,
    );

    Ok(AccompanyingReport {
        n,
        lambda,
        factor_slack: slack,
        tau,
        union_bound: factor_p_fail.iter().sum(),
        any_factor_fails: 1.0 - factor_p_fail.iter().map(|p| 1.0 - p).product::<f64>(),
        factor_p_fail,
        trials,
        failures,
        estimate,
        std_error,
        exact,
        max_p,
        sum_p_squared,
        identical_v,
        c_hat,
    })
}

/// `P(|Σ_i (ξ_i − η_i)| > λ)` by convolving the per-factor difference laws;
/// `None` when the differences do not share a lattice.
fn exact_failure(couplings: &[JointDist], lambda: f64) -> Result<Option<f64>> {
    let mut total: Option<GridDist> = None;
    for j in couplings {
        let d = match j.difference_law() {
            Ok(d) => d,
            Err(Error::NonCommensurableSupport) => return Ok(None),
            Err(e) => return Err(e),
        };
        total = Some(match total {
            None => d,
            Some(t) => match t.convolve(&d) {
                Ok(s) => s,
                Err(Error::NonCommensurableSupport) => return Ok(None),
                Err(e) => return Err(e),
            },
        });
    }
    let law = total.expect("at least one factor");
    Ok(Some(law.atoms().filter(|(x, _)| !close(x.abs(), lambda)).map(|(_, p)| p).sum()))
}

/// `P(‖ξ − η‖₂ > λ)` for a product coupling whose coordinates are drawn
/// independently from the given one-dimensional couplings; returns the
/// estimate and its standard error.
pub fn euclidean_failure_estimate<R: Rng + ?Sized>(coords: &[JointDist], lambda: f64, trials: u64, rng: &mut R) -> (f64, f64) {
    let mut failures = 0u64;
    for _ in 0..trials {
        let sq: f64 = coords
            .iter()
            .map(|j| {
                let (x, y) = j.sample(rng);
                (x - y) * (x - y)
            })
            .sum();
        if !close(sq.sqrt(), lambda) {
            failures += 1;
        }
    }
    let p = failures as f64 / trials.max(1) as f64;
    (p, (p * (1.0 - p) / trials.max(1) as f64).sqrt())
}
