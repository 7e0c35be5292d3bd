//! Exact transport between finite lattice laws under the zero/one cost
//! `1{|x − y| > λ}`: maximal couplings, the Prokhorov functional
//! `π(F, G, λ)` and distance, Gaussian-surrogate bound calibration, and the
//! accompanying compound Poisson coupling of mixture products.
//!
//! Masses are scaled to integer grains (denominator `2^32`) so that max-flow
//! values and set suprema are exact integers. Neighborhoods are closed:
//! `x` and `y` are joined when `|x − y| ≤ λ`.

mod accompanying;
mod flow;

pub use accompanying::{accompanying_coupling, euclidean_failure_estimate, AccompanyingReport, MixtureSpec};
pub use flow::{to_grains, FlowNetwork, GRAINS};

use rand::Rng;
use serde::Serialize;

use crate::dist::{gaussian_grid, GridDist};
use crate::error::{Error, Result};
use crate::gauge::log_star;
use flow::{close, dinic_matching, interval_matching, subset_supremum};

/// Largest union support accepted by the subset enumeration.
pub const BRUTE_FORCE_MAX_POINTS: usize = 20;

const MERGE_TOL: f64 = 1e-12;

/// One atom of a joint law, addressed by lattice indices of the two marginals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JointAtom {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// A finite joint law with prescribed marginals.
#[derive(Clone, Debug)]
pub struct JointDist {
    left: GridDist,
    right: GridDist,
    atoms: Vec<JointAtom>,
    cum: Vec<f64>,
}

impl JointDist {
    /// Checks masses (nonnegative, total one within `1e-12`) and both
    /// marginals (pointwise within `1e-10`).
    pub fn new(left: GridDist, right: GridDist, atoms: Vec<JointAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut s = 0.0;
        for a in &atoms {
            if !(a.mass >= 0.0) {
                return Err(Error::NegativeMass(a.mass));
            }
            if a.i >= left.len() || a.j >= right.len() {
                return Err(Error::InvalidDistribution(format!("joint atom ({}, {}) outside the marginal lattices", a.i, a.j)));
            }
            s += a.mass;
            cum.push(s);
        }
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("joint masses sum to {s}")));
        }
        let joint = Self { left, right, atoms, cum };
        let err = joint.marginal_error();
        if err > 1e-10 {
            return Err(Error::InvalidDistribution(format!("marginal mismatch {err:e}")));
        }
        Ok(joint)
    }

    pub fn left(&self) -> &GridDist {
        &self.left
    }

    pub fn right(&self) -> &GridDist {
        &self.right
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn pair(&self, a: &JointAtom) -> (f64, f64) {
        (self.left.point(a.i), self.right.point(a.j))
    }

    pub fn left_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.left.len()];
        for a in &self.atoms {
            m[a.i] += a.mass;
        }
        m
    }

    pub fn right_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.right.len()];
        for a in &self.atoms {
            m[a.j] += a.mass;
        }
        m
    }

    /// Largest pointwise deviation of either projected marginal from its reference.
    pub fn marginal_error(&self) -> f64 {
        let dev = |m: Vec<f64>, r: &[f64]| m.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dev(self.left_marginal(), self.left.probs()).max(dev(self.right_marginal(), self.right.probs()))
    }

    /// `P(|x − y| > λ)` under this joint law.
    pub fn failure_mass(&self, lambda: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| {
                let (x, y) = self.pair(a);
                !close((x - y).abs(), lambda)
            })
            .map(|a| a.mass)
            .sum()
    }

    /// Law of `x − y`.
    pub fn difference_law(&self) -> Result<GridDist> {
        let pts: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .filter(|a| a.mass > 0.0)
            .map(|a| {
                let (x, y) = self.pair(a);
                (x - y, a.mass)
            })
            .collect();
        GridDist::make_grid(&pts)
    }

    /// One draw `(x, y)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let total = *self.cum.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let k = self.cum.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.pair(&self.atoms[k])
    }
}

/// Both laws written on their merged, sorted support.
struct UnionSupport {
    points: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    f_index: Vec<usize>,
    g_index: Vec<usize>,
}

impl UnionSupport {
    fn new(f: &GridDist, g: &GridDist) -> Self {
        let fa: Vec<(usize, f64, f64)> = positive_atoms(f);
        let ga: Vec<(usize, f64, f64)> = positive_atoms(g);
        let mut u = UnionSupport { points: Vec::new(), f: Vec::new(), g: Vec::new(), f_index: Vec::new(), g_index: Vec::new() };
        let (mut a, mut b) = (0, 0);
        while a < fa.len() || b < ga.len() {
            let take_f = b >= ga.len() || (a < fa.len() && fa[a].1 <= ga[b].1);
            let x = if take_f { fa[a].1 } else { ga[b].1 };
            let same = a < fa.len() && b < ga.len() && (fa[a].1 - ga[b].1).abs() <= MERGE_TOL * x.abs().max(1.0);
            u.points.push(x);
            if take_f || same {
                u.f.push(fa[a].2);
                u.f_index.push(fa[a].0);
                a += 1;
            } else {
                u.f.push(0.0);
                u.f_index.push(usize::MAX);
            }
            if !take_f || same {
                u.g.push(ga[b].2);
                u.g_index.push(ga[b].0);
                b += 1;
            } else {
                u.g.push(0.0);
                u.g_index.push(usize::MAX);
            }
        }
        u
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

fn positive_atoms(f: &GridDist) -> Vec<(usize, f64, f64)> {
    f.probs().iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (i, f.point(i), p)).collect()
}

/// Maximum mass (in grains) that can be matched within distance `λ`.
fn matched_grains(u: &UnionSupport, lambda: f64) -> u64 {
    interval_matching(&u.points, &to_grains(&u.f), &to_grains(&u.g), lambda).0
}

/// A coupling of `F` and `G` minimizing `P(|x − y| > λ)`.
///
/// `p_fail` is exact in grain arithmetic. The returned joint law carries the
/// same matching computed on the original float masses, so its marginals
/// reproduce `F` and `G` to rounding; unmatched mass is paired in index order.
pub fn maximal_coupling(f: &GridDist, g: &GridDist, lambda: f64) -> Result<(JointDist, f64)> {
    if !(lambda >= 0.0) {
        return Err(Error::OutOfDomain(lambda));
    }
    let u = UnionSupport::new(f, g);
    let p_fail = (GRAINS - matched_grains(&u, lambda)) as f64 / GRAINS as f64;

    let (_, moves) = interval_matching(&u.points, &u.f, &u.g, lambda);
    let mut f_rem = u.f.clone();
    let mut g_rem = u.g.clone();
    let mut atoms: Vec<JointAtom> = Vec::with_capacity(moves.len() + u.len());
    for (a, b, m) in moves {
        f_rem[a] -= m;
        g_rem[b] -= m;
        atoms.push(JointAtom { i: u.f_index[a], j: u.g_index[b], mass: m });
    }
    let (mut a, mut b) = (0, 0);
    while a < u.len() && b < u.len() {
        if !(f_rem[a] > 0.0) {
            a += 1;
            continue;
        }
        if !(g_rem[b] > 0.0) {
            b += 1;
            continue;
        }
        let m = f_rem[a].min(g_rem[b]);
        f_rem[a] -= m;
        g_rem[b] -= m;
        atoms.push(JointAtom { i: u.f_index[a], j: u.g_index[b], mass: m });
    }
    let joint = JointDist::new(f.clone(), g.clone(), atoms)?;
    Ok((joint, p_fail))
}

/// `π(F, G, λ)` in grains, through the max-flow duality.
pub fn prokhorov_eps_grains(f: &GridDist, g: &GridDist, lambda: f64) -> u64 {
    GRAINS - matched_grains(&UnionSupport::new(f, g), lambda)
}

/// `π(F, G, λ) = sup_X max{F{X} − G{X^λ}, G{X} − F{X^λ}}`, evaluated as the
/// unmatched mass of a maximal coupling.
pub fn prokhorov_eps(f: &GridDist, g: &GridDist, lambda: f64) -> f64 {
    prokhorov_eps_grains(f, g, lambda) as f64 / GRAINS as f64
}

/// [`prokhorov_eps_grains`] through a general max-flow (Dinic) on the explicit
/// bipartite graph instead of the interval structure.
pub fn prokhorov_eps_dinic_grains(f: &GridDist, g: &GridDist, lambda: f64) -> u64 {
    let u = UnionSupport::new(f, g);
    GRAINS - dinic_matching(&u.points, &to_grains(&u.f), &to_grains(&u.g), lambda)
}

/// `π(F, G, λ)` in grains by enumerating every subset of the union support.
pub fn prokhorov_eps_brute_force_grains(f: &GridDist, g: &GridDist, lambda: f64) -> Result<u64> {
    let u = UnionSupport::new(f, g);
    if u.len() > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::SupportTooLargeForBruteForce(u.len()));
    }
    Ok(subset_supremum(&u.points, &to_grains(&u.f), &to_grains(&u.g), lambda))
}

pub fn prokhorov_eps_brute_force(f: &GridDist, g: &GridDist, lambda: f64) -> Result<f64> {
    Ok(prokhorov_eps_brute_force_grains(f, g, lambda)? as f64 / GRAINS as f64)
}

/// Total variation distance, `π(F, G, 0)`.
pub fn total_variation(f: &GridDist, g: &GridDist) -> f64 {
    prokhorov_eps(f, g, 0.0)
}

/// `π(F, G) = inf{λ : π(F, G, λ) ≤ λ}` by bisection on `[0, min(1, TV)]`,
/// returning the upper end once the bracket is narrower than `tol`.
pub fn prokhorov_distance(f: &GridDist, g: &GridDist, tol: f64) -> Result<f64> {
    if !(tol >= 1e-9) {
        return Err(Error::OutOfDomain(tol));
    }
    let u = UnionSupport::new(f, g);
    let (fg, gg) = (to_grains(&u.f), to_grains(&u.g));
    let eps = |lambda: f64| (GRAINS - interval_matching(&u.points, &fg, &gg, lambda).0) as f64 / GRAINS as f64;
    let tv = eps(0.0);
    if tv == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, tv.min(1.0));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eps(mid) <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Grid Gaussian with the mean and variance of `F`.
///
/// `cells` symmetric points cover `mean ± span·σ`; if the discretized
/// variance is off by more than `1e-13` relative, the grid is rescaled about
/// its mean so that both moments match.
pub fn gaussian_surrogate(f: &GridDist, cells: usize, span: f64) -> Result<GridDist> {
    let (mean, var) = (f.mean(), f.variance());
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let g = gaussian_grid(mean, var.sqrt(), cells, span)?;
    let (gm, gv) = (g.mean(), g.variance());
    if (gv / var - 1.0).abs() <= 1e-13 && (gm - mean).abs() <= 1e-13 * var.sqrt() {
        return Ok(g);
    }
    let a = (var / gv).sqrt();
    Ok(g.affine(a, mean - a * gm))
}

/// Coordinatewise surrogate of a product law.
pub fn gaussian_surrogate_product(components: &[GridDist], cells: usize, span: f64) -> Result<Vec<GridDist>> {
    components.iter().map(|c| gaussian_surrogate(c, cells, span)).collect()
}

/// Free constants used to draw bound shapes; never pass/fail thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    pub c: f64,
    pub d: usize,
    pub tau: f64,
    pub alpha: f64,
}

impl BoundParams {
    pub fn new(c: f64, d: usize, tau: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::NonPositive(c));
        }
        if !(tau > 0.0) {
            return Err(Error::NonPositive(tau));
        }
        if d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        Ok(Self { c, d, tau, alpha })
    }
}

/// Resolution of the Gaussian surrogate grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurrogateGrid {
    pub cells: usize,
    pub span: f64,
}

impl Default for SurrogateGrid {
    fn default() -> Self {
        Self { cells: 4096, span: 8.0 }
    }
}

/// One point of the `λ ↦ π(F, Φ(F), λ)` curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub eps: f64,
    /// `c d² exp(−λ/(c d² τ))` at the supplied `c`.
    pub shape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiBoundReport {
    pub tau: f64,
    pub d: usize,
    pub distance: f64,
    pub total_variation: f64,
    pub curve: Vec<CurvePoint>,
    pub curve_non_increasing: bool,
    /// Smallest `c` with `π(F, Φ(F)) ≤ c d² τ log*(1/τ)`.
    pub c0_hat: f64,
    /// Smallest `c` with `π(F, Φ(F), λ) ≤ c d² exp(−λ/(c d² τ))` at every curve point.
    pub c_hat: f64,
    /// `c d² τ log*(1/τ)` at the supplied `c`.
    pub distance_shape: f64,
}

/// Number of λ values on the reported curve.
pub const CURVE_POINTS: usize = 65;

/// Compares `F` with its Gaussian surrogate and calibrates the constants of
/// the two stability shapes on this instance (one-dimensional, `d` taken from
/// `params`).
pub fn check_pi_bounds(f: &GridDist, tau: f64, params: &BoundParams, grid: SurrogateGrid) -> Result<PiBoundReport> {
    if !(tau > 0.0) {
        return Err(Error::NonPositive(tau));
    }
    let phi = gaussian_surrogate(f, grid.cells, grid.span)?;
    let d2 = (params.d * params.d) as f64;
    let distance = prokhorov_distance(f, &phi, 1e-9)?;
    let tv = total_variation(f, &phi);
    let ls = log_star(1.0 / tau)?;

    let u = UnionSupport::new(f, &phi);
    let (fg, gg) = (to_grains(&u.f), to_grains(&u.g));
    let width = u.points.last().unwrap() - u.points[0];
    let shape = |c: f64, lambda: f64| c * d2 * (-lambda / (c * d2 * tau)).exp();
    let curve: Vec<CurvePoint> = (0..CURVE_POINTS)
        .map(|k| {
            let lambda = width * k as f64 / (CURVE_POINTS - 1) as f64;
            let eps = (GRAINS - interval_matching(&u.points, &fg, &gg, lambda).0) as f64 / GRAINS as f64;
            CurvePoint { lambda, eps, shape: shape(params.c, lambda) }
        })
        .collect();
    let curve_non_increasing = curve.windows(2).all(|w| w[1].eps <= w[0].eps);

    let c_hat = curve.iter().map(|p| smallest_constant(|c| shape(c, p.lambda), p.eps)).fold(0.0, f64::max);
    Ok(PiBoundReport {
        tau,
        d: params.d,
        distance,
        total_variation: tv,
        curve,
        curve_non_increasing,
        c0_hat: distance / (d2 * tau * ls),
        c_hat,
        distance_shape: params.c * d2 * tau * ls,
    })
}

/// Smallest `c` with `h(c) ≥ target` for an increasing `h` with `h(0+) = 0`,
/// by bisection in `ln c` to relative precision `1e-10`; 0 if `target ≤ 0`.
pub(crate) fn smallest_constant(h: impl Fn(f64) -> f64, target: f64) -> f64 {
    if !(target > 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    if h(hi.exp()) < target {
        return f64::INFINITY;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if h(mid.exp()) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}
