//! Couplings of independent summands `X_1..X_n` with independent Gaussian
//! partners `Y_1..Y_n` of matching variance, measured by
//! `Δ(X, Y) = max_k |Σ_{i≤k} X_i − Σ_{i≤k} Y_i|`.
//!
//! The dyadic sampler couples the total sum first and then splits every block
//! into halves through conditional quantile transforms. The baselines
//! (independent draws, summand-wise quantile coupling, Skorokhod embedding)
//! give the reference rates.

mod skorokhod;
mod tree;

pub use skorokhod::sample_skorokhod;
pub use tree::SumTree;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::{GridDist, CONDITION_FLOOR};
use crate::error::{Error, Result};

/// One realized pair of sequences together with their partial sums.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPath {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub prefix_x: Vec<f64>,
    pub prefix_y: Vec<f64>,
    pub delta: f64,
}

impl CouplingPath {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch);
        }
        let prefix = |v: &[f64]| {
            v.iter()
                .scan(0.0, |s, &a| {
                    *s += a;
                    Some(*s)
                })
                .collect::<Vec<f64>>()
        };
        let prefix_x = prefix(&x);
        let prefix_y = prefix(&y);
        let delta = max_gap(&prefix_x, &prefix_y);
        Ok(Self { x, y, prefix_x, prefix_y, delta })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// `max_k |a_k − b_k|` (0 for empty input).
pub(crate) fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Standard normal distribution function.
#[inline]
pub fn std_normal_cdf(g: f64) -> f64 {
    0.5 * libm::erfc(-g * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverts unnormalized atom weights at the Gaussian percentile `Φ(g)`,
/// returning the atom index and the uniformized percentile
/// `C(i−1) + u·w_i` (normalized) inside that atom.
///
/// The lower tail is searched from the left and the upper tail from the right
/// so that extreme percentiles keep full relative precision.
pub(crate) fn invert_at_gaussian(weights: impl Fn(usize) -> f64, len: usize, total: f64, g: f64, u: f64) -> (usize, f64) {
    if g <= 0.0 {
        let target = std_normal_cdf(g) * total;
        let mut cum = 0.0;
        for i in 0..len {
            let w = weights(i);
            let before = cum;
            cum += w;
            if w > 0.0 && cum >= target {
                return (i, (before + u * w) / total);
            }
        }
        let last = (0..len).rev().find(|&i| weights(i) > 0.0).unwrap_or(len - 1);
        (last, 1.0 - u * weights(last) / total)
    } else {
        let target = std_normal_cdf(-g) * total;
        let mut surv = 0.0;
        for i in (0..len).rev() {
            let w = weights(i);
            surv += w;
            if w > 0.0 && surv > target {
                // cdf interval of atom i is [1 − surv, 1 − surv + w)
                return (i, 1.0 - (surv - u * w) / total);
            }
        }
        let first = (0..len).find(|&i| weights(i) > 0.0).unwrap_or(0);
        (first, u * weights(first) / total)
    }
}

/// Couples one summand with its Gaussian partner: `y = σ g` and `x` the
/// quantile of `F` at the uniformized percentile of `Φ(g)`.
pub fn quantile_couple_scalar(f: &GridDist, sigma2: f64, g: f64, u: f64) -> Result<(f64, f64)> {
    let var = f.variance();
    if (sigma2 - var).abs() > 1e-9 * var.max(1.0) {
        return Err(Error::VarianceMismatch { expected: sigma2, actual: var });
    }
    let probs = f.probs();
    let (i, _) = invert_at_gaussian(|i| probs[i], probs.len(), 1.0, g, u);
    Ok((f.point(i), sigma2.sqrt() * g))
}

/// Realized lattice indices of every block sum, level by level
/// (`levels[0]` are the leaves).
pub type BlockTrace = Vec<Vec<usize>>;

/// One draw of the dyadic conditional-quantile coupling.
pub fn sample_kmt<R: Rng + ?Sized>(tree: &SumTree, rng: &mut R) -> Result<CouplingPath> {
    sample_kmt_traced(tree, rng).map(|(p, _)| p)
}

/// [`sample_kmt`] that also returns the realized block-sum indices.
pub fn sample_kmt_traced<R: Rng + ?Sized>(tree: &SumTree, rng: &mut R) -> Result<(CouplingPath, BlockTrace)> {
    let depth = tree.depth();
    let n = tree.n();

    // (1) Gaussian summands and all their dyadic block sums
    let mut gauss: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let g: f64 = rng.sample(StandardNormal);
            tree.block_variance(0, i).sqrt() * g
        })
        .collect();
    gauss.push(y);
    for l in 1..=depth {
        let below = &gauss[l - 1];
        gauss.push(below.chunks_exact(2).map(|c| c[0] + c[1]).collect());
    }

    // (2) the root block
    let mut trace: BlockTrace = vec![Vec::new(); depth + 1];
    let root = tree.block(depth, 0);
    let sd = root.variance.sqrt();
    let u: f64 = rng.random();
    let g = if sd > 0.0 { gauss[depth][0] / sd } else { 0.0 };
    let probs = root.law.probs();
    let (k, _) = invert_at_gaussian(|i| probs[i], probs.len(), 1.0, g, u);
    trace[depth].push(k);

    // (3) split every block given its realized sum
    for l in (1..=depth).rev() {
        let mut next = Vec::with_capacity(trace[l].len() * 2);
        for (j, &k) in trace[l].iter().enumerate() {
            let block = tree.block(l, j);
            let mass = block.law.probs()[k];
            if mass < CONDITION_FLOOR {
                return Err(Error::ZeroMassCondition(mass));
            }
            let left = tree.block(l - 1, 2 * j);
            let right = tree.block(l - 1, 2 * j + 1);
            let (lp, rp) = (left.law.probs(), right.law.probs());
            let kc = k + block.offset;
            let lo = kc.saturating_sub(rp.len() - 1);
            let hi = kc.min(lp.len() - 1);
            if lo > hi {
                return Err(Error::ZeroMassCondition(0.0));
            }
            let w = |i: usize| lp[lo + i] * rp[kc - lo - i];
            let len = hi - lo + 1;
            let total: f64 = (0..len).map(w).sum();
            if !(total > 0.0) {
                return Err(Error::ZeroMassCondition(total));
            }

            // Gaussian conditional law of the left half given the block sum
            let u: f64 = rng.random();
            let (vl, vr, vb) = (left.variance, right.variance, block.variance);
            let cond_var = if vb > 0.0 { vl * vr / vb } else { 0.0 };
            let g = if cond_var > 0.0 {
                let t_block = gauss[l][j];
                let t_left = gauss[l - 1][2 * j];
                (t_left - vl / vb * t_block) / cond_var.sqrt()
            } else {
                // one half is a point mass, so the split is forced
                0.0
            };
            let (i, _) = invert_at_gaussian(w, len, total, g, u);
            let il = lo + i;
            next.push(il);
            next.push(kc - il);
        }
        trace[l - 1] = next;
    }

    // (4) leaves
    let x: Vec<f64> = trace[0].iter().enumerate().map(|(i, &k)| tree.leaf(i).point(k)).collect();
    let y = std::mem::take(&mut gauss[0]);
    Ok((CouplingPath::new(x, y)?, trace))
}

fn draw_from<R: Rng + ?Sized>(f: &GridDist, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // quantile at u ∈ (0, 1]
    f.quantile(1.0 - u)
}

/// Baseline: `X` and `Y` drawn independently with the exact marginals.
pub fn sample_independent<R: Rng + ?Sized>(leaf_laws: &[GridDist], rng: &mut R) -> Result<CouplingPath> {
    let mut x = Vec::with_capacity(leaf_laws.len());
    let mut y = Vec::with_capacity(leaf_laws.len());
    for f in leaf_laws {
        x.push(draw_from(f, rng));
        let g: f64 = rng.sample(StandardNormal);
        y.push(f.variance().sqrt() * g);
    }
    CouplingPath::new(x, y)
}

/// Baseline: each `(X_i, Y_i)` quantile-coupled on its own, independently across `i`.
pub fn sample_quantile_per_summand<R: Rng + ?Sized>(leaf_laws: &[GridDist], rng: &mut R) -> Result<CouplingPath> {
    let mut x = Vec::with_capacity(leaf_laws.len());
    let mut y = Vec::with_capacity(leaf_laws.len());
    for f in leaf_laws {
        let g: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let (a, b) = quantile_couple_scalar(f, f.variance(), g, u)?;
        x.push(a);
        y.push(b);
    }
    CouplingPath::new(x, y)
}

/// Euclidean `Δ` of the product coupling whose coordinates are the given paths.
pub fn product_extend(paths: &[CouplingPath]) -> Result<f64> {
    let Some(first) = paths.first() else {
        return Ok(0.0);
    };
    let n = first.n();
    if paths.iter().any(|p| p.n() != n) {
        return Err(Error::LengthMismatch);
    }
    Ok((0..n)
        .map(|k| paths.iter().map(|p| (p.prefix_x[k] - p.prefix_y[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Block variances for a partition `0 = m_0 < m_1 < … < m_s = n` of the summands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPartitionReport {
    pub partition: Vec<usize>,
    pub block_variances: Vec<f64>,
    pub c4_hat: f64,
    pub c5_hat: f64,
    /// Whether every block variance lies in the requested `[c4, c5]` window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_ok: Option<bool>,
}

pub fn block_partition_check(leaf_laws: &[GridDist], partition: &[usize], window: Option<(f64, f64)>) -> Result<BlockPartitionReport> {
    let n = leaf_laws.len();
    if partition.len() < 2 || partition[0] != 0 || *partition.last().unwrap() != n {
        return Err(Error::BadPartition(format!("partition must run from 0 to {n}")));
    }
    if partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadPartition("partition must be strictly increasing".into()));
    }
    let block_variances: Vec<f64> =
        partition.windows(2).map(|w| leaf_laws[w[0]..w[1]].iter().map(GridDist::variance).sum()).collect();
    let c4_hat = block_variances.iter().copied().fold(f64::INFINITY, f64::min);
    let c5_hat = block_variances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let window_ok = window.map(|(c4, c5)| block_variances.iter().all(|&v| c4 <= v && v <= c5));
    Ok(BlockPartitionReport { partition: partition.to_vec(), block_variances, c4_hat, c5_hat, window_ok })
}

/// Which coupling construction to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Kmt,
    Indep,
    Quantile,
    Skorokhod,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmt" => Ok(Self::Kmt),
            "indep" | "independent" => Ok(Self::Indep),
            "quantile" => Ok(Self::Quantile),
            "skorokhod" => Ok(Self::Skorokhod),
            other => Err(Error::Config(format!("unknown sampler '{other}'"))),
        }
    }
}

/// Default Brownian time step for the Skorokhod baseline, relative to `a·b`.
pub const SKOROKHOD_DT_FRACTION: f64 = 0.01;

/// A sampler prepared for one sequence of leaf laws (the dyadic tree is
/// built once and shared read-only across trials).
#[derive(Clone, Debug)]
pub enum PreparedSampler {
    Kmt(SumTree),
    Indep(Vec<GridDist>),
    Quantile(Vec<GridDist>),
    Skorokhod { leaf: GridDist, n: usize, dt: f64 },
}

impl PreparedSampler {
    pub fn new(kind: SamplerKind, leaf_laws: Vec<GridDist>, dt: Option<f64>) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Kmt => Self::Kmt(SumTree::build(&leaf_laws)?),
            SamplerKind::Indep => Self::Indep(leaf_laws),
            SamplerKind::Quantile => Self::Quantile(leaf_laws),
            SamplerKind::Skorokhod => {
                // the embedding needs one two-point law; δ₀ padding is dropped
                let n = leaf_laws.iter().filter(|f| !f.is_point_mass()).count();
                let mut real = leaf_laws.iter().filter(|f| !f.is_point_mass());
                let leaf = real.next().cloned().ok_or_else(|| Error::UnsupportedLaw("all leaves degenerate".into()))?;
                if real.any(|f| *f != leaf) {
                    return Err(Error::UnsupportedLaw("skorokhod baseline needs identically distributed summands".into()));
                }
                let (a, b) = skorokhod::two_point(&leaf)?;
                let dt = dt.unwrap_or(SKOROKHOD_DT_FRACTION * a * b);
                Self::Skorokhod { leaf, n, dt }
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CouplingPath> {
        match self {
            Self::Kmt(tree) => sample_kmt(tree, rng),
            Self::Indep(l) => sample_independent(l, rng),
            Self::Quantile(l) => sample_quantile_per_summand(l, rng),
            Self::Skorokhod { leaf, n, dt } => sample_skorokhod(leaf, *n, rng, *dt),
        }
    }

    /// Samples, redrawing after conditioning failures; returns the path and
    /// the number of rejected attempts.
    pub fn sample_with_rejection<R: Rng + ?Sized>(&self, rng: &mut R, max_rejections: u32) -> Result<(CouplingPath, u32)> {
        let mut rejected = 0;
        loop {
            match self.sample(rng) {
                Ok(p) => return Ok((p, rejected)),
                Err(Error::ZeroMassCondition(m)) => {
                    rejected += 1;
                    if rejected > max_rejections {
                        return Err(Error::Numeric(format!(
                            "{rejected} consecutive conditioning failures (last mass {m:e})"
                        )));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests;
