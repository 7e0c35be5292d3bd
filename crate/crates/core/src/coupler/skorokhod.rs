use rand::Rng;
use rand_distr::StandardNormal;

use super::CouplingPath;
use crate::dist::GridDist;
use crate::error::{Error, Result};

/// Support `{−a, b}` of a centered two-point law, as `(a, b)`.
pub(crate) fn two_point(f: &GridDist) -> Result<(f64, f64)> {
    let atoms: Vec<(f64, f64)> = f.atoms().collect();
    if atoms.len() != 2 {
        return Err(Error::UnsupportedLaw(format!("expected a two-point law, got {} atoms", atoms.len())));
    }
    let (lo, hi) = (atoms[0].0, atoms[1].0);
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::UnsupportedLaw(format!("two-point law on {{{lo}, {hi}}} does not straddle 0")));
    }
    let mean = f.mean();
    if mean.abs() > 1e-10 * hi.max(-lo) {
        return Err(Error::NotCentered(mean));
    }
    Ok((-lo, hi))
}

/// Skorokhod embedding baseline for a centered two-point law `{−a, b}`.
///
/// One Brownian path is simulated with Gaussian increments of variance `dt`.
/// `X_i` is the exit value of `[−a, b]` around the previous exit level, so it
/// is exactly `−a` or `b`; `Y_i` is the increment over the deterministic slice
/// `[(i−1)ab, i·ab]`. Crossings between grid points are detected with the
/// Brownian bridge crossing probability, which keeps the embedding clock from
/// drifting ahead of the slices. The path itself is never reset, so the `Y_i`
/// are exact Gaussians.
pub fn sample_skorokhod<R: Rng + ?Sized>(leaf: &GridDist, n: usize, rng: &mut R, dt: f64) -> Result<CouplingPath> {
    let (a, b) = two_point(leaf)?;
    let max_dt = a * b / 100.0;
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse { dt, max: max_dt });
    }
    let slice = a * b;
    let steps_per_slice = (slice / dt).ceil() as u64;
    let h = slice / steps_per_slice as f64;
    let sd = h.sqrt();
    // beyond this the bridge crossing probability is below e^-40
    let near = 20.0 * h;
    let crossed = |rng: &mut R, d0: f64, d1: f64| d0 * d1 < near && rng.random::<f64>() < (-2.0 * d0 * d1 / h).exp();

    let mut exits: Vec<f64> = Vec::with_capacity(n);
    let mut slices: Vec<f64> = Vec::with_capacity(n);
    let mut w = 0.0;
    let mut anchor = 0.0;
    let mut step = 0u64;
    while exits.len() < n || slices.len() < n {
        let g: f64 = rng.sample(StandardNormal);
        let prev = w;
        w += sd * g;
        step += 1;
        if exits.len() < n {
            let (hi, lo) = (anchor + b, anchor - a);
            let exit = if w >= hi || (w > lo && crossed(rng, hi - prev, hi - w)) {
                Some((hi, b))
            } else if w <= lo || crossed(rng, prev - lo, w - lo) {
                Some((lo, -a))
            } else {
                None
            };
            if let Some((level, x)) = exit {
                exits.push(x);
                anchor = level;
            }
        }
        if step % steps_per_slice == 0 && slices.len() < n {
            slices.push(w);
        }
    }
    let diffs = |v: &[f64]| {
        let mut prev = 0.0;
        v.iter()
            .map(|&s| {
                let d = s - prev;
                prev = s;
                d
            })
            .collect::<Vec<f64>>()
    };
    CouplingPath::new(exits, diffs(&slices))
}
