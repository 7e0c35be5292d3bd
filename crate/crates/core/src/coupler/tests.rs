use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dist::{centered_poisson, rademacher, uniform};

fn rad() -> GridDist {
    rademacher().unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn assert_law(d: &GridDist, expected: &[(f64, f64)]) {
    let atoms: Vec<_> = d.atoms().collect();
    assert_eq!(atoms.len(), expected.len(), "{atoms:?}");
    for ((x, p), (ex, ep)) in atoms.iter().zip(expected) {
        assert!((x - ex).abs() < 1e-12 && (p - ep).abs() < 1e-12, "{atoms:?}");
    }
}

#[test]
fn tree_examples() {
    let t = SumTree::build(&[rad(), rad()]).unwrap();
    assert_law(t.root(), &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
    assert_eq!(t.block_variance(1, 0), 2.0);

    let t = SumTree::build(&[GridDist::point_mass(0.0)]).unwrap();
    assert_eq!(t.depth(), 0);
    assert!(t.root().is_point_mass());

    let t = SumTree::build(&vec![rad(); 4]).unwrap();
    assert_law(t.root(), &[(-4.0, 1.0 / 16.0), (-2.0, 0.25), (0.0, 0.375), (2.0, 0.25), (4.0, 1.0 / 16.0)]);
    assert_eq!(t.block_variance(2, 0), 4.0);
    assert_eq!(t.distinct_laws(), 3);
}

#[test]
fn tree_parents_are_convolutions() {
    let leaves = vec![
        rad(),
        centered_poisson(0.7, 1e-15).unwrap(),
        uniform(-1.0, 1.0, 3).unwrap(),
        GridDist::point_mass(0.0),
        rad().scaled(2.0),
        centered_poisson(1.3, 1e-15).unwrap(),
        rad(),
        rad(),
    ];
    let t = SumTree::build(&leaves).unwrap();
    for l in 1..=t.depth() {
        for j in 0..(t.n() >> l) {
            let conv = t.block_law(l - 1, 2 * j).convolve(t.block_law(l - 1, 2 * j + 1)).unwrap();
            let b = t.block_law(l, j);
            assert_eq!(conv.len(), b.len());
            assert!((conv.origin() - b.origin()).abs() < 1e-12);
            for (p, q) in conv.probs().iter().zip(b.probs()) {
                assert!((p - q).abs() < 1e-10);
            }
            assert_eq!(t.block_variance(l, j), t.block_variance(l - 1, 2 * j) + t.block_variance(l - 1, 2 * j + 1));
        }
    }
}

#[test]
fn tree_errors() {
    assert!(matches!(SumTree::build(&vec![rad(); 3]), Err(Error::NotPowerOfTwo(3))));
    let coin = GridDist::make_grid(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!(matches!(SumTree::build(&[coin, rad()]), Err(Error::NotCentered(_))));
}

#[test]
fn scalar_quantile_coupling() {
    assert_eq!(quantile_couple_scalar(&GridDist::point_mass(0.0), 0.0, 1.3, 0.4).unwrap(), (0.0, 0.0));
    for g in [-3.0, -0.5, -1e-9] {
        assert_eq!(quantile_couple_scalar(&rad(), 1.0, g, 0.7).unwrap().0, -1.0);
    }
    for g in [1e-9, 0.5, 3.0, 40.0] {
        assert_eq!(quantile_couple_scalar(&rad(), 1.0, g, 0.7).unwrap().0, 1.0);
    }
    assert!(matches!(quantile_couple_scalar(&rad(), 2.0, 0.0, 0.5), Err(Error::VarianceMismatch { .. })));

    let mut r = rng(11);
    let trials = 100_000;
    let mut plus = 0usize;
    for _ in 0..trials {
        let g: f64 = r.sample(StandardNormal);
        let u: f64 = r.random();
        if quantile_couple_scalar(&rad(), 1.0, g, u).unwrap().0 > 0.0 {
            plus += 1;
        }
    }
    assert!((plus as f64 / trials as f64 - 0.5).abs() < 0.005);
}

#[test]
fn uniformized_percentile_stays_in_atom() {
    let w = [0.2, 0.0, 0.5, 0.3];
    for (g, u) in [(-2.0, 0.1), (-0.1, 0.9), (0.3, 0.5), (1.5, 0.01)] {
        let (i, p) = invert_at_gaussian(|i| w[i], 4, 1.0, g, u);
        let lo: f64 = w[..i].iter().sum();
        assert!(p >= lo - 1e-15 && p <= lo + w[i] + 1e-15, "g={g} i={i} p={p}");
        let phi = std_normal_cdf(g);
        assert!(phi >= lo - 1e-15 && phi <= lo + w[i] + 1e-15);
    }
}

#[test]
fn kmt_point_masses() {
    let t = SumTree::build(&vec![GridDist::point_mass(0.0); 8]).unwrap();
    let p = sample_kmt(&t, &mut rng(1)).unwrap();
    assert!(p.x.iter().chain(&p.y).all(|&v| v == 0.0));
    assert_eq!(p.delta, 0.0);
}

#[test]
fn kmt_two_rademachers_follow_the_enumerated_rule() {
    let t = SumTree::build(&[rad(), rad()]).unwrap();
    let mut r = rng(5);
    for _ in 0..2000 {
        let p = sample_kmt(&t, &mut r).unwrap();
        let total_y = p.y[0] + p.y[1];
        let phi = std_normal_cdf(total_y / 2f64.sqrt());
        let expected_sum = if phi <= 0.25 {
            -2.0
        } else if phi <= 0.75 {
            0.0
        } else {
            2.0
        };
        assert_eq!(p.x[0] + p.x[1], expected_sum);
        if expected_sum == 0.0 {
            // the conditional Gaussian percentile is below ½ iff Y₁ < Y₂
            assert_eq!(p.x[0], if p.y[0] < p.y[1] { -1.0 } else { 1.0 });
        }
    }
}

#[test]
fn kmt_blocks_are_consistent() {
    let leaves = vec![rad(), centered_poisson(1.0, 1e-15).unwrap(), rad(), uniform(-2.0, 2.0, 5).unwrap()];
    let t = SumTree::build(&leaves).unwrap();
    let mut r = rng(9);
    for _ in 0..500 {
        let (path, trace) = sample_kmt_traced(&t, &mut r).unwrap();
        for l in 1..=t.depth() {
            for (j, &k) in trace[l].iter().enumerate() {
                assert_eq!(k + t.block(l, j).offset, trace[l - 1][2 * j] + trace[l - 1][2 * j + 1]);
                let width = 1 << l;
                let xs: f64 = path.x[j * width..(j + 1) * width].iter().sum();
                assert!((xs - t.block_law(l, j).point(k)).abs() < 1e-9);
                assert!(t.block_law(l, j).probs()[k] > 0.0);
            }
        }
        assert_eq!(super::max_gap(&path.prefix_x, &path.prefix_y), path.delta);
    }
}

#[test]
fn kmt_marginals_are_exact() {
    let leaves = vec![
        rad(),
        centered_poisson(0.5, 1e-15).unwrap(),
        uniform(-1.0, 1.0, 3).unwrap(),
        rad().scaled(3.0),
    ];
    let t = SumTree::build(&leaves).unwrap();
    let trials = 20_000;
    let mut r = rng(21);
    let mut draws = vec![Vec::with_capacity(trials); leaves.len()];
    let mut ys = vec![Vec::with_capacity(trials); leaves.len()];
    for _ in 0..trials {
        let p = sample_kmt(&t, &mut r).unwrap();
        for i in 0..leaves.len() {
            draws[i].push((p.x[i], 1.0));
            ys[i].push(p.y[i]);
        }
    }
    let tol = 1.63 / (trials as f64).sqrt();
    for (i, f) in leaves.iter().enumerate() {
        let emp = GridDist::make_grid(&draws[i]).unwrap();
        assert!(emp.kolmogorov_distance(f) <= tol, "leaf {i}: {}", emp.kolmogorov_distance(f));
        let mean = ys[i].iter().sum::<f64>() / trials as f64;
        let var = ys[i].iter().map(|y| (y - mean).powi(2)).sum::<f64>() / trials as f64;
        let sd = f.variance().sqrt();
        assert!(mean.abs() < 4.0 * sd / (trials as f64).sqrt());
        assert!((var / f.variance() - 1.0).abs() < 0.05);
    }
}

#[test]
fn kmt_is_deterministic() {
    let t = SumTree::build(&vec![rad(); 64]).unwrap();
    let a = sample_kmt(&t, &mut rng(3)).unwrap();
    let b = sample_kmt(&t, &mut rng(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn baselines() {
    let p = sample_independent(&vec![GridDist::point_mass(0.0); 16], &mut rng(1)).unwrap();
    assert_eq!(p.delta, 0.0);
    let p = sample_quantile_per_summand(&vec![GridDist::point_mass(0.0); 16], &mut rng(1)).unwrap();
    assert_eq!(p.delta, 0.0);
    let p = sample_independent(&[rad()], &mut rng(2)).unwrap();
    assert!(p.delta > 0.0);
    assert_eq!(p.delta, (p.x[0] - p.y[0]).abs());
}

#[test]
fn single_summand_quantile_equals_depth_zero_kmt() {
    let t = SumTree::build(&[rad()]).unwrap();
    for seed in 0..50 {
        let a = sample_kmt(&t, &mut rng(seed)).unwrap();
        let b = sample_quantile_per_summand(&[rad()], &mut rng(seed)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn skorokhod_exits_are_the_two_atoms() {
    let dt = 1e-4;
    let p = sample_skorokhod(&rad(), 200, &mut rng(4), dt).unwrap();
    for x in &p.x {
        assert_eq!(x.abs(), 1.0);
    }
    let skew = GridDist::make_grid(&[(-0.5, 2.0 / 3.0), (1.0, 1.0 / 3.0)]).unwrap();
    let p = sample_skorokhod(&skew, 300, &mut rng(5), 1e-3).unwrap();
    let ups = p.x.iter().filter(|&&x| x == 1.0).count();
    assert!(p.x.iter().all(|&x| x == 1.0 || x == -0.5));
    // P(exit at b) = a / (a + b) = 1/3
    assert!((ups as f64 / 300.0 - 1.0 / 3.0).abs() < 4.0 * (2.0f64 / 9.0 / 300.0).sqrt());
    let var = p.y.iter().map(|y| y * y).sum::<f64>() / 200.0;
    assert!((var - 1.0).abs() < 0.35);
}

#[test]
fn skorokhod_errors() {
    let degenerate = GridDist::make_grid(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!(matches!(sample_skorokhod(&degenerate, 4, &mut rng(1), 1e-3), Err(Error::UnsupportedLaw(_))));
    assert!(matches!(sample_skorokhod(&uniform(-1.0, 1.0, 3).unwrap(), 4, &mut rng(1), 1e-3), Err(Error::UnsupportedLaw(_))));
    assert!(matches!(sample_skorokhod(&rad(), 4, &mut rng(1), 0.1), Err(Error::StepTooCoarse { .. })));
    let skew = GridDist::make_grid(&[(-1.0, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap();
    assert!(sample_skorokhod(&skew, 4, &mut rng(1), 0.02).is_ok());
}

#[test]
fn product_extension() {
    let t = SumTree::build(&vec![rad(); 32]).unwrap();
    let mut r = rng(8);
    let p = sample_kmt(&t, &mut r).unwrap();
    assert_eq!(product_extend(std::slice::from_ref(&p)).unwrap(), p.delta);
    let two = product_extend(&[p.clone(), p.clone()]).unwrap();
    assert!((two - 2f64.sqrt() * p.delta).abs() < 1e-12);
    for _ in 0..200 {
        let paths: Vec<_> = (0..3).map(|_| sample_kmt(&t, &mut r).unwrap()).collect();
        let d = product_extend(&paths).unwrap();
        let m = paths.iter().map(|p| p.delta).fold(0.0, f64::max);
        assert!(m <= d + 1e-12 && d <= 3f64.sqrt() * m + 1e-12);
    }
    let short = sample_kmt(&SumTree::build(&vec![rad(); 2]).unwrap(), &mut r).unwrap();
    assert!(matches!(product_extend(&[p, short]), Err(Error::LengthMismatch)));
}

#[test]
fn block_partitions() {
    let r = block_partition_check(&vec![rad(); 4], &[0, 2, 4], None).unwrap();
    assert_eq!(r.block_variances, vec![2.0, 2.0]);
    assert_eq!((r.c4_hat, r.c5_hat), (2.0, 2.0));

    let r = block_partition_check(&vec![rad(); 4], &[0, 4], Some((1.0, 5.0))).unwrap();
    assert_eq!((r.c4_hat, r.c5_hat), (4.0, 4.0));
    assert_eq!(r.window_ok, Some(true));

    let r = block_partition_check(&[rad(), rad().scaled(2.0)], &[0, 1, 2], Some((2.0, 4.0))).unwrap();
    assert_eq!((r.c4_hat, r.c5_hat), (1.0, 4.0));
    assert_eq!(r.window_ok, Some(false));

    assert!(matches!(block_partition_check(&vec![rad(); 4], &[0, 2, 2, 4], None), Err(Error::BadPartition(_))));
    assert!(matches!(block_partition_check(&vec![rad(); 4], &[1, 4], None), Err(Error::BadPartition(_))));
}
