use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::stats::{fit_growth, quantile, GrowthFit, Statistic, TailReport};
use super::{ExperimentConfig, TrialResultSet, TrialRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "n,trial,delta,rejections,seed_lo,seed_hi";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub rejections: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub padding: Vec<(usize, usize)>,
    pub per_n: Vec<NSummary>,
    /// `max_{m ≤ n} max_trial Δ_m / ln m` over the sizes `m ≥ 2`; descriptive only.
    pub running_max_delta_over_log_n: Vec<(usize, f64)>,
    pub growth_fit: Option<GrowthFit>,
    pub failure: Option<String>,
}

pub fn summarize(results: &TrialResultSet, config: Option<&ExperimentConfig>) -> Summary {
    let per_n: Vec<NSummary> = results
        .sizes()
        .into_iter()
        .map(|n| {
            let d = results.deltas(n);
            NSummary {
                n,
                trials: d.len(),
                mean: Statistic::Mean.apply(&d),
                median: quantile(&d, 0.5),
                q90: quantile(&d, 0.9),
                max: d.iter().copied().fold(0.0, f64::max),
                rejections: results.rows.iter().filter(|r| r.n == n).map(|r| r.rejections as u64).sum(),
            }
        })
        .collect();
    let mut running = Vec::new();
    let mut best = 0.0f64;
    for s in per_n.iter().filter(|s| s.n >= 2) {
        best = best.max(s.max / (s.n as f64).ln());
        running.push((s.n, best));
    }
    Summary {
        config_hash: results.config_hash.clone(),
        seed: results.seed,
        config: config.cloned(),
        padding: results.padding.clone(),
        per_n,
        running_max_delta_over_log_n: running,
        growth_fit: fit_growth(results, Statistic::Median).ok(),
        failure: results.failure.clone(),
    }
}

/// CSV text: `#` metadata lines (config hash and seed, then padding and
/// failure if any), the header, and one row per trial.
pub fn csv_string(results: &TrialResultSet) -> Result<String> {
    let mut out = format!("# config_hash={} seed={}\n", results.config_hash, results.seed);
    if !results.padding.is_empty() {
        let p: Vec<String> = results.padding.iter().map(|(n, m)| format!("{n}:{m}")).collect();
        writeln!(out, "# padding={}", p.join(",")).unwrap();
    }
    if let Some(f) = &results.failure {
        writeln!(out, "# failure={}", f.replace('\n', " ")).unwrap();
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in &results.rows {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn emit_csv(results: &TrialResultSet, path: &Path) -> Result<()> {
    fs::write(path, csv_string(results)?)?;
    Ok(())
}

/// Parses a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<TrialResultSet> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<TrialResultSet> {
    let mut hash = None;
    let mut seed = None;
    let mut padding = Vec::new();
    let mut failure = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(f) = body.strip_prefix("failure=") {
            failure = Some(f.to_string());
            continue;
        }
        for field in body.split_whitespace() {
            if let Some(v) = field.strip_prefix("config_hash=") {
                hash = Some(v.to_string());
            } else if let Some(v) = field.strip_prefix("seed=") {
                seed = Some(v.parse::<u64>().map_err(|_| Error::Config(format!("bad seed '{v}'")))?);
            } else if let Some(v) = field.strip_prefix("padding=") {
                for pair in v.split(',') {
                    let (a, b) = pair.split_once(':').ok_or_else(|| Error::Config(format!("bad padding '{pair}'")))?;
                    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad padding '{pair}'")));
                    padding.push((parse(a)?, parse(b)?));
                }
            }
        }
    }
    let config_hash = hash.ok_or_else(|| Error::Config("CSV carries no config hash".into()))?;
    let seed = seed.ok_or_else(|| Error::Config("CSV carries no seed".into()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header '{}'", header.join(","))));
    }
    let rows = rdr.deserialize::<TrialRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(r) = rows.iter().find(|r| r.seed_hi != seed) {
        return Err(Error::Config(format!("row n={} trial={} has seed {} but the file says {seed}", r.n, r.trial, r.seed_hi)));
    }
    Ok(TrialResultSet { config_hash, seed, rows, padding, wall_clock: 0.0, failure })
}

pub fn emit_json(summary: &Summary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], config_hash: &str) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0, 1.0, 0.0, 1.0);
    if !all.is_empty() {
        x0 = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        x1 = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y0 = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0);
        y1 = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#).unwrap();
    writeln!(s, "<metadata>config_hash={config_hash}</metadata>").unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(s, r#"<path d="M{left:.1} {top:.1} L{left:.1} {bottom:.1} L{right:.1} {bottom:.1}" stroke="black" fill="none"/>"#).unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{fx:.3}</text>"#, sx(fx), bottom + 16.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{fy:.3}</text>"#, left - 6.0, sy(fy) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 18.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();
    if all.is_empty() {
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0).unwrap();
    }
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if !pts.is_empty() {
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
        }
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#, right - 120.0, top + 14.0 * (k as f64 + 1.0), escape(ser.name)).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end" fill="gray">config {config_hash}</text>"#, right, HEIGHT - 4.0).unwrap();
    s.push_str("</svg>\n");
    s
}

/// Median, mean and 90% quantile of `Δ_n` against `ln n`.
pub fn growth_svg(summary: &Summary) -> String {
    let pick = |f: fn(&super::NSummary) -> f64| summary.per_n.iter().map(|s| ((s.n as f64).ln(), f(s))).collect::<Vec<_>>();
    let series = [
        Series { name: "median", points: pick(|s| s.median) },
        Series { name: "mean", points: pick(|s| s.mean) },
        Series { name: "q90", points: pick(|s| s.q90) },
    ];
    line_chart("Δ_n statistics", "ln n", "Δ_n", &series, &summary.config_hash)
}

/// Empirical log-tail and the log envelope against `x`.
pub fn tails_svg(tails: &TailReport, config_hash: &str) -> String {
    let emp: Vec<(f64, f64)> = tails.rows.iter().filter(|r| r.exceed > 0).map(|r| (r.x, r.prob.ln())).collect();
    let env: Vec<(f64, f64)> = tails.rows.iter().map(|r| (r.x, r.envelope.ln().min(0.0))).collect();
    let series = [Series { name: "ln P(c1 Δ/τ ≥ x)", points: emp }, Series { name: "ln envelope", points: env }];
    line_chart(&format!("tail at n = {}", tails.n), "x", "log probability", &series, config_hash)
}

pub fn emit_svg_growth(summary: &Summary, path: &Path) -> Result<()> {
    fs::write(path, growth_svg(summary))?;
    Ok(())
}

pub fn emit_svg_tails(tails: &TailReport, config_hash: &str, path: &Path) -> Result<()> {
    fs::write(path, tails_svg(tails, config_hash))?;
    Ok(())
}

/// Writes `results.csv`, `summary.json`, `growth.svg` (and `tails.svg` when
/// a tail report is given) into `dir` for the requested formats.
pub fn report_emit(
    results: &TrialResultSet,
    config: Option<&ExperimentConfig>,
    tails: Option<&TailReport>,
    formats: &[Format],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summary = summarize(results, config);
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let p = dir.join("results.csv");
                emit_csv(results, &p)?;
                written.push(p);
            }
            Format::Json => {
                let p = dir.join("summary.json");
                emit_json(&summary, &p)?;
                written.push(p);
            }
            Format::Svg => {
                let p = dir.join("growth.svg");
                emit_svg_growth(&summary, &p)?;
                written.push(p);
                if let Some(t) = tails {
                    let p = dir.join("tails.svg");
                    emit_svg_tails(t, &results.config_hash, &p)?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}
