use super::*;
use crate::coupler::sample_independent;

fn config(text: &str) -> ExperimentConfig {
    let c: ExperimentConfig = serde_json::from_str(text).unwrap();
    c.validate().unwrap();
    c
}

fn synthetic(points: &[(usize, Vec<f64>)]) -> TrialResultSet {
    let mut rows = Vec::new();
    for (k, (n, deltas)) in points.iter().enumerate() {
        for (t, &d) in deltas.iter().enumerate() {
            rows.push(TrialRow { n: *n, trial: t as u64, delta: d, rejections: 0, seed_lo: stream_id(k, t as u64), seed_hi: 7 });
        }
    }
    TrialResultSet { config_hash: "0123456789abcdef".into(), seed: 7, rows, padding: vec![], wall_clock: 0.0, failure: None }
}

#[test]
fn config_forms_and_hash() {
    let a = config(r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [4, 2], "trials": 100, "seed": 1}"#);
    assert_eq!(a.sizes(), vec![2, 4]);
    let mut b = a.clone();
    b.workers = 8;
    b.output_dir = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
    b.seed = 2;
    assert_ne!(a.hash(), b.hash());

    let c = config(r#"{"distribution": {"family": "gauss", "sigma": 1, "n_cells": 9, "span": 4}, "sampler": "indep", "n_list": [8], "trials": 100, "seed": 1, "grid": {"cells": 33, "span": 6}}"#);
    assert_eq!(c.summand_law().unwrap().len(), 33);

    for bad in [
        r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [], "trials": 100, "seed": 1}"#,
        r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [0], "trials": 100, "seed": 1}"#,
        r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [4], "trials": 99, "seed": 1}"#,
        r#"{"distribution": "nonsense", "sampler": "kmt", "n_list": [4], "trials": 100, "seed": 1}"#,
    ] {
        let c: ExperimentConfig = serde_json::from_str(bad).unwrap();
        assert!(c.validate().unwrap_err().is_config_error());
    }
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [4], "trials": 100, "seed": 1, "typo": 3}"#).is_err());
}

#[test]
fn point_mass_experiment_is_all_zero() {
    let c = config(r#"{"distribution": {"family": "points", "points": [[0, 1]]}, "sampler": "kmt", "n_list": [2], "trials": 100, "seed": 3}"#);
    let r = run_experiment(&c).unwrap();
    assert_eq!(r.rows.len(), 100);
    assert!(r.rows.iter().all(|row| row.delta == 0.0));
}

#[test]
fn deterministic_across_runs_and_workers() {
    let mut c = config(r#"{"distribution": "rademacher", "sampler": "kmt", "n_list": [16, 64, 5], "trials": 200, "seed": 11, "workers": 1}"#);
    let one = csv_string(&run_experiment(&c).unwrap()).unwrap();
    assert_eq!(one, csv_string(&run_experiment(&c).unwrap()).unwrap());
    c.workers = 4;
    let r = run_experiment(&c).unwrap();
    assert_eq!(one, csv_string(&r).unwrap());
    assert_eq!(r.rows.len(), 3 * 200);
    assert_eq!(r.padding, vec![(5, 8)]);
    let order: Vec<(usize, u64)> = r.rows.iter().map(|row| (row.n, row.trial)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
}

#[test]
fn padding_leaves_delta_unchanged() {
    let c = config(r#"{"distribution": "rademacher", "sampler": "indep", "n_list": [3], "trials": 100, "seed": 5}"#);
    let r = run_experiment(&c).unwrap();
    let law = c.summand_law().unwrap();
    for row in &r.rows {
        let mut rng = trial_rng(5, 0, row.trial);
        let p = sample_independent(&vec![law.clone(); 3], &mut rng).unwrap();
        assert_eq!(p.delta, row.delta);
    }
}

#[test]
fn disjoint_streams_are_uncorrelated() {
    let c = config(r#"{"distribution": "rademacher", "sampler": "indep", "n_list": [16], "trials": 4000, "seed": 9, "workers": 4}"#);
    let r = run_experiment(&c).unwrap();
    let d = r.deltas(16);
    let (a, b) = d.split_at(2000);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() <= 4.0 / 2000f64.sqrt(), "{rho}");
}

#[test]
fn growth_fit_on_exact_inputs() {
    let sizes = [16usize, 32, 64, 128, 256];
    let r = synthetic(&sizes.iter().map(|&n| (n, vec![0.7 + 1.3 * (n as f64).ln(); 3])).collect::<Vec<_>>());
    let fit = fit_growth(&r, Statistic::Median).unwrap();
    assert!((fit.a - 0.7).abs() < 1e-9 && (fit.b - 1.3).abs() < 1e-9);
    assert!((fit.r2 - 1.0).abs() < 1e-12);

    let r = synthetic(&sizes.iter().map(|&n| (n, vec![2.5 * (n as f64).sqrt(); 3])).collect::<Vec<_>>());
    let fit = fit_growth(&r, Statistic::Mean).unwrap();
    assert!((fit.exponent_fit.unwrap() - 0.5).abs() < 1e-6);

    let r = synthetic(&[(2, vec![1.0]), (4, vec![1.0]), (8, vec![1.0])]);
    assert!(matches!(fit_growth(&r, Statistic::Median), Err(Error::InsufficientData(_))));
}

#[test]
fn statistics() {
    let v = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert!((quantile(&v, 0.9) - 3.7).abs() < 1e-12);
    assert_eq!(Statistic::Mean.apply(&v), 2.5);
    assert_eq!("q90".parse::<Statistic>().unwrap(), Statistic::Q90);
    assert!("p99".parse::<Statistic>().is_err());
    let (lo, hi) = wilson_interval(5, 10, 1.959963984540054);
    assert!((lo - 0.236593).abs() < 1e-6 && (hi - 0.763407).abs() < 1e-6);
    assert_eq!(wilson_interval(0, 300, WILSON_Z), (0.0, 0.01));
}

#[test]
fn exponential_moment_calibration() {
    let r = synthetic(&[(16, vec![0.0; 10])]);
    let c = exp_moment_calibrate(&r, 1.0, BParam::Fixed(1.0)).unwrap();
    assert!(c.unbounded && c.c_hat == C_CAP);

    let tau = 1.7;
    let b = tau * (std::f64::consts::E - 1.0);
    let r = synthetic(&[(16, vec![tau; 10])]);
    let c = exp_moment_calibrate(&r, tau, BParam::Fixed(b)).unwrap();
    assert!((c.c_hat - 1.0).abs() <= 1e-4 && !c.unbounded);

    let deltas = vec![0.5, 1.0, 2.0, 4.0, 0.1];
    let base = exp_moment_calibrate(&synthetic(&[(16, deltas.clone())]), 1.0, BParam::SqrtNVar(1.0)).unwrap().c_hat;
    let mut smaller = deltas.clone();
    smaller[3] = 3.0;
    let reduced = exp_moment_calibrate(&synthetic(&[(16, smaller)]), 1.0, BParam::SqrtNVar(1.0)).unwrap().c_hat;
    assert!(reduced >= base);
    assert!(matches!(exp_moment_calibrate(&r, 0.0, BParam::Fixed(1.0)), Err(Error::DegenerateTau(_))));
    assert_eq!(BParam::SqrtNVar(4.0).at(16), 8.0);
}

#[test]
fn tail_table() {
    let deltas: Vec<f64> = (1..=300).map(|k| k as f64 / 100.0).collect();
    let r = synthetic(&[(64, deltas)]);
    let grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
    let t = tail_report(&r, 1.0, 64, &grid, BParam::SqrtNVar(1.0)).unwrap();
    assert!(t.c1 > 0.0);
    assert_eq!(t.rows[0].prob, 1.0);
    let top = t.rows.last().unwrap();
    assert_eq!(top.prob, 0.0);
    assert_eq!((top.ci_lo, top.ci_hi), (0.0, 0.01));
    assert!(t.all_within);
    assert!(t.log_slope.unwrap() < 0.0);
    assert!(tail_report(&r, 1.0, 64, &[1.0, 0.5], BParam::Fixed(1.0)).is_err());
}

#[test]
fn csv_round_trip_and_hash_check() {
    let empty = synthetic(&[]);
    let text = csv_string(&empty).unwrap();
    assert_eq!(text, format!("# config_hash=0123456789abcdef seed=7\n{CSV_HEADER}\n"));

    let three = synthetic(&[(2, vec![0.1, 0.25]), (4, vec![1.0 / 3.0])]);
    let a = csv_string(&three).unwrap();
    assert_eq!(a, csv_string(&three).unwrap());
    let back = parse_csv(&a).unwrap();
    assert_eq!(back.rows, three.rows);
    back.check_hash("0123456789abcdef").unwrap();
    assert!(back.check_hash("ffffffffffffffff").is_err());
    assert!(parse_csv(&format!("{CSV_HEADER}\n")).is_err());

    let mut failed = three.clone();
    failed.failure = Some("n=4 trial=1: boom".into());
    failed.padding = vec![(3, 4)];
    let back = parse_csv(&csv_string(&failed).unwrap()).unwrap();
    assert_eq!(back.failure, failed.failure);
    assert_eq!(back.padding, failed.padding);

    let sizes = [16usize, 32, 64, 128];
    let r = synthetic(&sizes.iter().map(|&n| (n, vec![(n as f64).ln() / 3.0, 0.1, 7.0 / n as f64])).collect::<Vec<_>>());
    let back = parse_csv(&csv_string(&r).unwrap()).unwrap();
    assert_eq!(fit_growth(&r, Statistic::Q90).unwrap(), fit_growth(&back, Statistic::Q90).unwrap());
}

#[test]
fn svg_and_emission() {
    let empty = synthetic(&[]);
    let svg = growth_svg(&summarize(&empty, None));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("no data") && svg.contains("0123456789abcdef"));

    let r = synthetic(&[(2, vec![0.1, 0.2]), (4, vec![0.3, 0.4]), (8, vec![0.5, 0.6]), (16, vec![0.7, 0.8])]);
    let s = summarize(&r, None);
    assert_eq!(s.per_n.len(), 4);
    assert!(s.growth_fit.is_some());
    let rm: Vec<f64> = s.running_max_delta_over_log_n.iter().map(|p| p.1).collect();
    assert!(rm.windows(2).all(|w| w[1] >= w[0]));

    let dir = tempfile::tempdir().unwrap();
    let tails = tail_report(&r, 1.0, 16, &[0.0, 1.0, 2.0], BParam::Fixed(4.0)).unwrap();
    let files = report_emit(&r, None, Some(&tails), &[Format::Csv, Format::Json, Format::Svg], dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], "0123456789abcdef");
    assert!(std::fs::read_to_string(dir.path().join("tails.svg")).unwrap().contains("0123456789abcdef"));
}
