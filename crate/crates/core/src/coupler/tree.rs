use std::sync::Arc;

use crate::dist::{common_step_of, GridDist};
use crate::error::{Error, Result};

const CENTER_TOL: f64 = 1e-10;

/// One dyadic block: the exact law of its sum and the matching Gaussian variance.
#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub law: Arc<GridDist>,
    /// Lattice index of `law.origin()` relative to `left.origin() + right.origin()`.
    pub offset: usize,
    pub variance: f64,
}

/// Exact block-sum laws for every dyadic block over `n = 2^N` summands.
///
/// `levels[0]` holds the leaves and `levels[N]` the single root block; block
/// `j` at level `l` covers summands `j·2^l .. (j+1)·2^l`. Identical sibling
/// pairs share one convolution, so a tree of i.i.d. leaves costs one
/// convolution per level.
#[derive(Clone, Debug)]
pub struct SumTree {
    step: f64,
    levels: Vec<Vec<Block>>,
}

impl SumTree {
    /// Precomputes all block laws bottom-up.
    pub fn build(leaf_laws: &[GridDist]) -> Result<Self> {
        let n = leaf_laws.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        for f in leaf_laws {
            let m = f.mean();
            if m.abs() > CENTER_TOL * f.min_point().abs().max(f.max_point().abs()).max(1.0) {
                return Err(Error::NotCentered(m));
            }
        }
        let step = common_step_of(leaf_laws.iter())?;

        let mut leaves: Vec<Block> = Vec::with_capacity(n);
        for (i, f) in leaf_laws.iter().enumerate() {
            if i > 0 && leaf_laws[i - 1] == *f {
                let prev = leaves[i - 1].clone();
                leaves.push(prev);
                continue;
            }
            let law = if f.is_point_mass() {
                GridDist::from_lattice(f.origin(), step, vec![1.0])?
            } else {
                f.on_step(step)?
            };
            let variance = law.variance();
            leaves.push(Block { law: Arc::new(law), offset: 0, variance });
        }

        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let below = levels.last().unwrap();
            let mut next: Vec<Block> = Vec::with_capacity(below.len() / 2);
            for pair in below.chunks_exact(2) {
                let (l, r) = (&pair[0], &pair[1]);
                let reuse = next.last().and_then(|_| {
                    let k = next.len();
                    let (pl, pr) = (&below[2 * k - 2], &below[2 * k - 1]);
                    (Arc::ptr_eq(&pl.law, &l.law) && Arc::ptr_eq(&pr.law, &r.law)).then(|| next[k - 1].clone())
                });
                if let Some(b) = reuse {
                    next.push(b);
                    continue;
                }
                let law = l.law.convolve(&r.law)?;
                let offset = ((law.origin() - l.law.origin() - r.law.origin()) / step).round();
                debug_assert!(offset >= 0.0);
                next.push(Block { law: Arc::new(law), offset: offset as usize, variance: l.variance + r.variance });
            }
            levels.push(next);
        }
        Ok(Self { step, levels })
    }

    /// `N`, with `n = 2^N` leaves.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn n(&self) -> usize {
        self.levels[0].len()
    }

    /// Lattice step shared by all block laws.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Exact law of the sum over block `index` at `level`.
    pub fn block_law(&self, level: usize, index: usize) -> &GridDist {
        &self.levels[level][index].law
    }

    pub fn block_variance(&self, level: usize, index: usize) -> f64 {
        self.levels[level][index].variance
    }

    pub fn root(&self) -> &GridDist {
        self.block_law(self.depth(), 0)
    }

    pub fn leaf(&self, i: usize) -> &GridDist {
        self.block_law(0, i)
    }

    pub(crate) fn block(&self, level: usize, index: usize) -> &Block {
        &self.levels[level][index]
    }

    /// Number of distinct block laws actually stored (shared ones counted once).
    pub fn distinct_laws(&self) -> usize {
        self.levels
            .iter()
            .map(|lvl| {
                let mut c = 0;
                for (i, b) in lvl.iter().enumerate() {
                    if i == 0 || !Arc::ptr_eq(&lvl[i - 1].law, &b.law) {
                        c += 1;
                    }
                }
                c
            })
            .sum()
    }
}
