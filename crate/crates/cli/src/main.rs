//! `strong-approx`: command-line front end for the coupling experiments,
//! class certificates and transport computations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use strong_approx::coupler::{PreparedSampler, SamplerKind};
use strong_approx::dist::{DistSpec, GridDist};
use strong_approx::gauge;
use strong_approx::harness::{self, BParam, DistField, ExperimentConfig, Format, Statistic, TrialResultSet};
use strong_approx::transport::{self, MixtureSpec};
use strong_approx::{Error, Result};

#[derive(Parser)]
#[command(name = "strong-approx", version, about = "Strong Gaussian approximation of partial sums: couplings, class certificates, transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a JSON config and write CSV/JSON/SVG.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a statistic of Δ_n against ln n (and ln-ln for the exponent).
    Fit {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "median")]
        stat: Statistic,
    },
    /// Largest c with mean exp(cΔ/τ) ≤ 1 + B/τ, per n.
    Calibrate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        tau: f64,
        /// A number, `sqrt-n` (B = √n) or `sqrt-n:<variance>` (B = √(n·variance)).
        #[arg(long = "B", default_value = "sqrt-n")]
        b: String,
    },
    /// Empirical tail of c₁Δ/τ with Wilson intervals and the exponential envelope.
    Tails {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        tau: f64,
        /// Size to report (default: the largest in the file).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "B", default_value = "sqrt-n")]
        b: String,
        #[arg(long, default_value_t = 20.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.5)]
        x_step: f64,
    },
    /// Re-emit summary files for an existing results CSV.
    Report {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        json: bool,
        /// Also draw the tail chart at the largest n with this τ.
        #[arg(long)]
        tau: Option<f64>,
        /// Output directory (default: next to the CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class certificate of a distribution.
    Gauge {
        /// Distribution file or name (`rademacher`, `centered_poisson 1`, ...).
        #[arg(long)]
        dist: String,
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 12)]
        max_order: usize,
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
    /// Sample coupled paths and write one CSV row per trial.
    Couple {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "kmt")]
        sampler: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Binary dump of every path (little-endian f64).
        #[arg(long)]
        dump_paths: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        max_rejections: u32,
    },
    /// Prokhorov functional π(F, G, λ) or distance π(F, G).
    Prokhorov {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, conflicts_with = "distance", required_unless_present = "distance")]
        lambda: Option<f64>,
        #[arg(long)]
        distance: bool,
        /// Enumerate all subsets of the union support (at most 20 points).
        #[arg(long, requires = "lambda")]
        brute_force: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Coupling of a product of mixtures with the product of their
    /// accompanying compound Poisson laws.
    #[command(alias = "theorem4")]
    Accompanying {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-factor table destination.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long = "in")]
    path: PathBuf,
    /// Reject the file unless it carries this config hash.
    #[arg(long)]
    expect_hash: Option<String>,
}

impl Input {
    fn load(&self) -> Result<TrialResultSet> {
        let set = harness::read_csv(&self.path)?;
        if let Some(h) = &self.expect_hash {
            set.check_hash(h)?;
        }
        Ok(set)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    S1,
    B,
    ACum,
    ANum,
}

fn parse_b(s: &str) -> Result<BParam> {
    if s == "sqrt-n" {
        return Ok(BParam::SqrtNVar(1.0));
    }
    if let Some(v) = s.strip_prefix("sqrt-n:") {
        return v.parse().map(BParam::SqrtNVar).map_err(|_| Error::Config(format!("bad variance in --B {s}")));
    }
    s.parse().map(BParam::Fixed).map_err(|_| Error::Config(format!("--B expects a number, sqrt-n or sqrt-n:<variance>, got '{s}'")))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn resolve_single(arg: &str) -> Result<GridDist> {
    DistSpec::resolve(arg)?.single()
}

fn cmd_run(path: &Path) -> Result<ExitCode> {
    let config = ExperimentConfig::load(path)?;
    let results = harness::run_experiment(&config)?;
    eprintln!("{} trials in {:.2} s on {} workers", results.rows.len(), results.wall_clock, config.workers);
    let written = harness::report_emit(&results, Some(&config), None, &[Format::Csv, Format::Json, Format::Svg], &config.output_dir)?;
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    if let Some(f) = &results.failure {
        eprintln!("error: sampler failure: {f}");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gauge(dist: &str, class: ClassArg, tau: Option<f64>, max_order: usize, probes: usize) -> Result<()> {
    let components = DistSpec::resolve(dist)?.components()?;
    let need_tau = || tau.ok_or_else(|| Error::Config("--tau is required for this class".into()));
    let single = || -> Result<&GridDist> {
        match components.as_slice() {
            [f] => Ok(f),
            _ => Err(Error::Config("this class check takes a one-dimensional law".into())),
        }
    };
    let cert = match class {
        ClassArg::S1 => {
            let f = single()?;
            let t = match tau {
                Some(t) => t,
                None => gauge::s1_min_tau(f, 1e-9)?,
            };
            let mut c = gauge::s1_check(f, t)?;
            c.min_tau = Some(gauge::s1_min_tau(f, 1e-9)?);
            c
        }
        ClassArg::B => gauge::b_class_check(&components, need_tau()?, max_order, probes)?,
        ClassArg::ACum => {
            let f = single()?;
            let t = match tau {
                Some(t) => t,
                None => gauge::a_class_tau_estimate_1d(f, max_order)?,
            };
            gauge::a_cumulant_certificate(f, t, max_order)?
        }
        ClassArg::ANum => gauge::a_class_check_numeric(&components, need_tau()?, probes)?,
    };
    print_json(&cert)
}

#[allow(clippy::too_many_arguments)]
fn cmd_couple(dist: &str, n: usize, sampler: &str, trials: u64, seed: u64, out: Option<&Path>, dump: Option<&Path>, max_rejections: u32) -> Result<()> {
    let kind: SamplerKind = sampler.parse()?;
    if n == 0 || n > harness::MAX_N {
        return Err(Error::Config(format!("--n must lie in 1..={}", harness::MAX_N)));
    }
    let law = resolve_single(dist)?;
    let mut leaves = vec![law; n];
    leaves.resize(n.next_power_of_two(), GridDist::point_mass(0.0));
    let prepared = PreparedSampler::new(kind, leaves, None)?;

    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut table = BufWriter::new(sink);
    writeln!(table, "trial_id,delta,rejected_count")?;
    let mut paths = match dump {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            w.write_all(b"SAPATH01")?;
            w.write_all(&(n as u32).to_le_bytes())?;
            w.write_all(&0u32.to_le_bytes())?;
            Some(w)
        }
        None => None,
    };
    for trial in 0..trials {
        let mut rng = harness::trial_rng(seed, 0, trial);
        let (path, rejected) = prepared.sample_with_rejection(&mut rng, max_rejections)?;
        writeln!(table, "{trial},{},{rejected}", path.delta)?;
        if let Some(w) = paths.as_mut() {
            for v in path.x.iter().take(n).chain(path.y.iter().take(n)) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    table.flush()?;
    if let Some(mut w) = paths {
        w.flush()?;
    }
    Ok(())
}

fn cmd_prokhorov(f: &str, g: &str, lambda: Option<f64>, distance: bool, brute_force: bool, tol: f64) -> Result<()> {
    let (f, g) = (resolve_single(f)?, resolve_single(g)?);
    let value = if distance {
        serde_json::json!({ "distance": transport::prokhorov_distance(&f, &g, tol)?, "tol": tol })
    } else {
        let lambda = lambda.expect("clap enforces --lambda or --distance");
        if !(lambda >= 0.0) {
            return Err(Error::OutOfDomain(lambda));
        }
        let (eps, method) = if brute_force {
            (transport::prokhorov_eps_brute_force(&f, &g, lambda)?, "brute-force")
        } else {
            (transport::prokhorov_eps(&f, &g, lambda), "max-flow")
        };
        serde_json::json!({ "lambda": lambda, "eps": eps, "method": method })
    };
    print_json(&value)
}

/// One entry of an accompanying-coupling spec file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureEntry {
    #[serde(default)]
    p: f64,
    u: DistField,
    #[serde(default)]
    v: Option<DistField>,
    /// Support radius bound of `u` (default: its actual radius).
    #[serde(default)]
    tau: Option<f64>,
    /// Number of identical factors.
    #[serde(default = "one")]
    count: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    mixtures: Vec<MixtureEntry>,
}

fn load_mixtures(path: &Path) -> Result<Vec<MixtureSpec>> {
    let text = std::fs::read_to_string(path)?;
    let file: MixtureFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for e in file.mixtures {
        let u = e.u.spec()?.build()?;
        let v = match e.v {
            Some(v) => v.spec()?.build()?,
            None => GridDist::point_mass(0.0),
        };
        let tau = e.tau.unwrap_or_else(|| u.min_point().abs().max(u.max_point().abs()));
        let m = MixtureSpec::new(e.p, u, v, tau)?;
        out.extend(std::iter::repeat_n(m, e.count));
    }
    Ok(out)
}

fn cmd_accompanying(spec: &Path, lambda: f64, trials: u64, seed: u64, csv: Option<&Path>) -> Result<()> {
    let mixtures = load_mixtures(spec)?;
    let mut rng = harness::trial_rng(seed, 0, 0);
    let report = transport::accompanying_coupling(&mixtures, lambda, trials, &mut rng)?;
    if let Some(p) = csv {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "factor,p,tau,p_fail")?;
        for (i, (m, pf)) in mixtures.iter().zip(&report.factor_p_fail).enumerate() {
            writeln!(w, "{i},{},{},{pf}", m.p, m.tau)?;
        }
        w.flush()?;
    }
    print_json(&report)
}

fn x_grid(x_max: f64, x_step: f64) -> Result<Vec<f64>> {
    if !(x_step > 0.0) || !(x_max >= 0.0) {
        return Err(Error::Config("--x-step must be positive and --x-max nonnegative".into()));
    }
    let k = (x_max / x_step + 1e-9).floor() as usize;
    Ok((0..=k).map(|i| i as f64 * x_step).collect())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config } => return cmd_run(&config),
        Command::Fit { input, stat } => print_json(&harness::fit_growth(&input.load()?, stat)?)?,
        Command::Calibrate { input, tau, b } => print_json(&harness::exp_moment_calibrate(&input.load()?, tau, parse_b(&b)?)?)?,
        Command::Tails { input, tau, n, b, x_max, x_step } => {
            let set = input.load()?;
            let n = match n {
                Some(n) => n,
                None => *set.sizes().last().ok_or_else(|| Error::InsufficientData("empty results".into()))?,
            };
            print_json(&harness::tail_report(&set, tau, n, &x_grid(x_max, x_step)?, parse_b(&b)?)?)?
        }
        Command::Report { input, svg, json, tau, out } => {
            let set = input.load()?;
            let dir = out.unwrap_or_else(|| input.path.parent().map(Path::to_path_buf).unwrap_or_default());
            let mut formats = Vec::new();
            if json {
                formats.push(Format::Json);
            }
            if svg || !json {
                formats.push(Format::Svg);
            }
            let tails = match (tau, set.sizes().last()) {
                (Some(t), Some(&n)) => Some(harness::tail_report(&set, t, n, &x_grid(20.0, 0.5)?, BParam::SqrtNVar(1.0))?),
                _ => None,
            };
            for p in harness::report_emit(&set, None, tails.as_ref(), &formats, &dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Gauge { dist, class, tau, max_order, probes } => cmd_gauge(&dist, class, tau, max_order, probes)?,
        Command::Couple { dist, n, sampler, trials, seed, out, dump_paths, max_rejections } => {
            cmd_couple(&dist, n, &sampler, trials, seed, out.as_deref(), dump_paths.as_deref(), max_rejections)?
        }
        Command::Prokhorov { f, g, lambda, distance, brute_force, tol } => cmd_prokhorov(&f, &g, lambda, distance, brute_force, tol)?,
        Command::Accompanying { spec, lambda, trials, seed, csv } => cmd_accompanying(&spec, lambda, trials, seed, csv.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        // a reader that stops early (`| head`) is not an error
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
