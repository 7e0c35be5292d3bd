//! Membership certificates and minimal parameters for the distribution
//! classes used by the strong approximation bounds:
//!
//! - `S1(τ)`: `E ξ = 0` and `E|ξ|³ exp(|ξ|/τ) ≤ τ E ξ²`;
//! - the cumulant growth condition `|γ_m| ≤ ½ m! τ^{m−2} γ₂` (one-dimensional
//!   analytic class, with the equivalence constant normalized to 1);
//! - `B_d(τ)`: `|E⟨ξ,v⟩²⟨ξ,u⟩^{m−2}| ≤ ½ m! τ^{m−2} ‖u‖^{m−2} E⟨ξ,v⟩²`;
//! - `A_d(τ)`: `|d_u d_v² φ(z)| ≤ ‖u‖ τ ⟨D v, v⟩` for `‖z‖τ < 1`, probed on real `z`.
//!
//! Multivariate laws are products of one-dimensional [`GridDist`]s.

use serde::{Deserialize, Serialize};

use crate::dist::{CumulantSeq, GridDist};
use crate::error::{Error, Result};

/// Slack below which a certificate fails, for exactly computed quantities.
pub const EXACT_SLACK_TOL: f64 = 1e-9;
/// Slack below which a finite-difference certificate fails.
pub const NUMERIC_SLACK_TOL: f64 = 1e-6;
/// Step of the central stencils used for log-mgf derivatives.
pub const FD_STEP: f64 = 1e-3;
/// Probes of the analytic class stay inside `‖z‖τ ≤ PROBE_RADIUS`.
pub const PROBE_RADIUS: f64 = 0.9;

/// Centering tolerance for class checks.
const CENTER_TOL: f64 = 1e-10;

pub const FLAG_CONSTANT_NORMALIZED: &str = "constant-normalized";
pub const FLAG_REAL_PROBES: &str = "real-probes-only";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassName {
    S1,
    B,
    ACumulant,
    ANumeric,
}

/// One evaluated instance of a class inequality; `slack = bound − observed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub point: Vec<f64>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub class_name: ClassName,
    pub tau: f64,
    pub passed: bool,
    pub verified_order: usize,
    pub min_slack: f64,
    pub probe_report: Vec<Probe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_tau: Option<f64>,
    pub flags: Vec<String>,
}

impl ClassCertificate {
    fn new(class_name: ClassName, tau: f64, verified_order: usize, probes: Vec<Probe>, tol: f64) -> Self {
        let min_slack = probes.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
        let passed = probes.iter().all(|p| p.slack >= -tol);
        Self {
            class_name,
            tau,
            passed,
            verified_order,
            min_slack,
            probe_report: probes,
            min_tau: None,
            flags: Vec::new(),
        }
    }
}

/// `max(1, ln b)`.
pub fn log_star(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::NonPositive(b));
    }
    Ok(b.ln().max(1.0))
}

fn require_centered(f: &GridDist) -> Result<()> {
    let m = f.mean();
    if m.abs() > CENTER_TOL * f.min_point().abs().max(f.max_point().abs()).max(1.0) {
        return Err(Error::NotCentered(m));
    }
    Ok(())
}

/// `ln(τ E ξ²) − ln(E|ξ|³ e^{|ξ|/τ})`; non-negative exactly when the S1
/// inequality holds. Increasing in `τ`.
fn s1_margin(f: &GridDist, second: f64, tau: f64) -> f64 {
    let terms: Vec<f64> = f
        .atoms()
        .filter(|(x, _)| *x != 0.0)
        .map(|(x, p)| p.ln() + 3.0 * x.abs().ln() + x.abs() / tau)
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lhs = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (tau * second).ln() - lhs
}

/// Smallest `τ` with `E|ξ|³ exp(|ξ|/τ) ≤ τ E ξ²`, by bisection to `tol`.
pub fn s1_min_tau(f: &GridDist, tol: f64) -> Result<f64> {
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::Config(format!("tolerance {tol} outside [1e-12, 1e-3]")));
    }
    require_centered(f)?;
    if f.is_point_mass() {
        return Ok(0.0);
    }
    let second = f.raw_moment(2);
    let scale = f.min_point().abs().max(f.max_point().abs());
    let mut hi = scale;
    while s1_margin(f, second, hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while s1_margin(f, second, lo) >= 0.0 {
        hi = lo;
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return Ok(0.0);
        }
    }
    // bisect past `tol` so rescaled laws agree to within it as well
    let target = tol / 16.0;
    while hi - lo > target {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s1_margin(f, second, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Checks the S1 inequality at a given `τ`.
pub fn s1_check(f: &GridDist, tau: f64) -> Result<ClassCertificate> {
    require_centered(f)?;
    if !(tau > 0.0) {
        return Err(Error::DegenerateTau(tau));
    }
    let s = f.moments(tau);
    let slack = tau * f.raw_moment(2) - s.abs_third_exp;
    let probes = vec![Probe { label: "tau".into(), point: vec![tau], slack }];
    let mut cert = ClassCertificate::new(ClassName::S1, tau, 3, probes, EXACT_SLACK_TOL);
    cert.min_tau = Some(s1_min_tau(f, 1e-9)?);
    Ok(cert)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Checks `|γ_m| ≤ ½ m! τ^{m−2} γ₂` for `m = 3..=M`.
pub fn statulevicius_check(gammas: &CumulantSeq, tau: f64) -> Result<ClassCertificate> {
    if gammas.order() < 3 {
        return Err(Error::Config("cumulant check needs order M >= 3".into()));
    }
    if tau < 0.0 {
        return Err(Error::DegenerateTau(tau));
    }
    let g2 = gammas.get(2);
    let probes = (3..=gammas.order())
        .map(|m| {
            let bound = 0.5 * factorial(m) * tau.powi(m as i32 - 2) * g2;
            Probe { label: format!("m={m}"), point: vec![m as f64], slack: bound - gammas.get(m).abs() }
        })
        .collect();
    Ok(ClassCertificate::new(ClassName::ACumulant, tau, gammas.order(), probes, EXACT_SLACK_TOL))
}

/// `max_m (2|γ_m| / (m! γ₂))^{1/(m−2)}`, the least `τ` passing the cumulant check.
pub fn statulevicius_min_tau(gammas: &CumulantSeq) -> Result<f64> {
    let g2 = gammas.get(2);
    if !(g2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok((3..=gammas.order())
        .map(|m| (2.0 * gammas.get(m).abs() / (factorial(m) * g2)).powf(1.0 / (m as f64 - 2.0)))
        .fold(0.0, f64::max))
}

/// Cumulant-based estimate of the one-dimensional analytic class parameter
/// (equivalence constant normalized to 1).
pub fn a_class_tau_estimate_1d(f: &GridDist, order: usize) -> Result<f64> {
    require_centered(f)?;
    if f.is_point_mass() {
        return Err(Error::DegenerateVariance);
    }
    statulevicius_min_tau(&f.cumulants(order)?)
}

/// Cumulant certificate for the one-dimensional analytic class at `τ`.
pub fn a_cumulant_certificate(f: &GridDist, tau: f64, order: usize) -> Result<ClassCertificate> {
    require_centered(f)?;
    let gammas = f.cumulants(order)?;
    let mut cert = statulevicius_check(&gammas, tau)?;
    cert.min_tau = statulevicius_min_tau(&gammas).ok();
    cert.flags.push(FLAG_CONSTANT_NORMALIZED.into());
    Ok(cert)
}

// ---------------------------------------------------------------------------
// quasi-random directions

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton coordinate `dim` of point `index` (index 0 is skipped).
pub(crate) fn halton(index: u64, dim: usize) -> f64 {
    radical_inverse(index + 1, PRIMES[dim % PRIMES.len()])
}

/// Deterministic quasi-random unit vector in `R^d` built from Halton
/// coordinates `first_dim..first_dim + 2⌈d/2⌉` through Box–Muller.
pub(crate) fn sphere_point(index: u64, d: usize, first_dim: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(d + 1);
    let mut k = 0;
    while g.len() < d {
        let u1 = halton(index, first_dim + k).max(1e-300);
        let u2 = halton(index, first_dim + k + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let a = 2.0 * std::f64::consts::PI * u2;
        g.push(r * a.cos());
        g.push(r * a.sin());
        k += 2;
    }
    g.truncate(d);
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|x| x / norm).collect()
}

/// Coordinate axes followed by the normalized bisectors `(e_i ± e_j)/√2`.
fn axes_and_bisectors(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        out.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                e[j] = sign * s;
                out.push(e);
            }
        }
    }
    out
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `E[⟨ξ,v⟩^a ⟨ξ,u⟩^b]` for `a ≤ 2`, `b ≤ max_b`, for a product law, by
/// binomial expansion coordinate by coordinate.
pub(crate) fn mixed_moments(coord_moments: &[Vec<f64>], u: &[f64], v: &[f64], max_b: usize) -> [Vec<f64>; 3] {
    let mut table: [Vec<f64>; 3] = [vec![0.0; max_b + 1], vec![0.0; max_b + 1], vec![0.0; max_b + 1]];
    table[0][0] = 1.0;
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    for (j, mom) in coord_moments.iter().enumerate() {
        let mut next: [Vec<f64>; 3] = [vec![0.0; max_b + 1], vec![0.0; max_b + 1], vec![0.0; max_b + 1]];
        for a in 0..=2usize {
            for b in 0..=max_b {
                let mut acc = 0.0;
                for a2 in 0..=a {
                    for b2 in 0..=b {
                        let prev = table[a - a2][b - b2];
                        if prev == 0.0 {
                            continue;
                        }
                        acc += binom(a, a2)
                            * binom(b, b2)
                            * v[j].powi(a2 as i32)
                            * u[j].powi(b2 as i32)
                            * prev
                            * mom[a2 + b2];
                    }
                }
                next[a][b] = acc;
            }
        }
        table = next;
    }
    table
}

/// Checks the Bernstein-type class inequality for a product law over all
/// axis/bisector direction pairs and `n_directions` quasi-random pairs.
pub fn b_class_check(components: &[GridDist], tau: f64, order: usize, n_directions: usize) -> Result<ClassCertificate> {
    let d = components.len();
    if d == 0 || d > 8 {
        return Err(Error::Config(format!("B-class check supports 1..=8 coordinates, got {d}")));
    }
    if !(3..=12).contains(&order) {
        return Err(Error::Config(format!("B-class order {order} outside 3..=12")));
    }
    if tau < 0.0 {
        return Err(Error::DegenerateTau(tau));
    }
    for c in components {
        require_centered(c)?;
    }
    let coord_moments: Vec<Vec<f64>> =
        components.iter().map(|c| (0..=order as u32).map(|k| c.raw_moment(k)).collect()).collect();

    let mut dirs = axes_and_bisectors(d);
    let fixed = dirs.len();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for u in &dirs {
        for v in &dirs[..fixed] {
            pairs.push((u.clone(), v.clone()));
        }
    }
    for i in 0..n_directions as u64 {
        pairs.push((sphere_point(i, d, 0), sphere_point(i, d, 2 * d.div_ceil(2))));
    }
    dirs.clear();

    let mut probes = Vec::with_capacity(pairs.len() * (order - 2));
    for (u, v) in &pairs {
        let table = mixed_moments(&coord_moments, u, v, order - 2);
        let second = table[2][0];
        let un = norm(u);
        for m in 3..=order {
            let bound = 0.5 * factorial(m) * (tau * un).powi(m as i32 - 2) * second;
            let slack = bound - table[2][m - 2].abs();
            let mut point = Vec::with_capacity(2 * d + 1);
            point.push(m as f64);
            point.extend_from_slice(u);
            point.extend_from_slice(v);
            probes.push(Probe { label: format!("m={m}"), point, slack });
        }
    }
    let mut cert = ClassCertificate::new(ClassName::B, tau, order, probes, EXACT_SLACK_TOL);
    // report-only cross-check: B membership forces σ²(F) ≤ 12 τ² (constant-free form)
    let sigma2 = components.iter().map(GridDist::variance).fold(0.0, f64::max);
    cert.flags.push(format!("sigma2={sigma2:.6e} vs 12tau^2={:.6e}", 12.0 * tau * tau));
    Ok(cert)
}

/// `φ(z) = Σ_j log E e^{z_j ξ_j}` for a product law.
fn product_log_mgf(components: &[GridDist], z: &[f64]) -> f64 {
    components.iter().zip(z).map(|(c, &zj)| c.log_mgf_unchecked(zj)).sum()
}

fn axpy(z: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    z.iter().zip(x).map(|(zi, xi)| zi + a * xi).collect()
}

/// `d_u d_v² φ(z)` by central differences with step `h`.
pub(crate) fn third_directional_derivative(components: &[GridDist], z: &[f64], u: &[f64], v: &[f64], h: f64) -> f64 {
    let second = |w: &[f64]| {
        (product_log_mgf(components, &axpy(w, h, v)) - 2.0 * product_log_mgf(components, w)
            + product_log_mgf(components, &axpy(w, -h, v)))
            / (h * h)
    };
    (second(&axpy(z, h, u)) - second(&axpy(z, -h, u))) / (2.0 * h)
}

/// Probes the analytic class inequality for a product law at real points
/// `‖z‖τ ≤ 0.9` with quasi-random `(z, u, v)` triples.
pub fn a_class_check_numeric(components: &[GridDist], tau: f64, probe_count: usize) -> Result<ClassCertificate> {
    let d = components.len();
    if d == 0 || d > 4 {
        return Err(Error::Config(format!("numeric analytic check supports 1..=4 coordinates, got {d}")));
    }
    if !(tau > 0.0) {
        return Err(Error::DegenerateTau(tau));
    }
    let variances: Vec<f64> = components.iter().map(GridDist::variance).collect();
    if variances.iter().all(|&s| s == 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let radius = PROBE_RADIUS / tau;
    // the outermost stencil point must stay in the open domain
    if (radius + 2.0 * FD_STEP) * tau >= 1.0 {
        return Err(Error::OutOfDomain((radius + 2.0 * FD_STEP) * tau));
    }
    let mut triples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for axis in axes_and_bisectors(d).into_iter().take(d) {
        triples.push((vec![0.0; d], axis.clone(), axis));
    }
    for i in 0..probe_count as u64 {
        let r = radius * halton(i, 0);
        let dir = sphere_point(i, d, 1);
        let z: Vec<f64> = dir.iter().map(|x| r * x).collect();
        let off = 1 + 2 * d.div_ceil(2);
        triples.push((z, sphere_point(i, d, off), sphere_point(i, d, off + 2 * d.div_ceil(2))));
    }
    let mut probes = Vec::with_capacity(triples.len());
    for (z, u, v) in triples {
        let observed = third_directional_derivative(components, &z, &u, &v, FD_STEP);
        let dvv: f64 = v.iter().zip(&variances).map(|(vi, s)| s * vi * vi).sum();
        let slack = norm(&u) * tau * dvv - observed.abs();
        let mut point = z;
        point.extend_from_slice(&u);
        point.extend_from_slice(&v);
        probes.push(Probe { label: "z,u,v".into(), point, slack });
    }
    let mut cert = ClassCertificate::new(ClassName::ANumeric, tau, 3, probes, NUMERIC_SLACK_TOL);
    cert.flags.push(FLAG_REAL_PROBES.into());
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{centered_poisson, gaussian_grid, rademacher, uniform};

    const OMEGA_RECIP: f64 = 1.763_222_834_351_896_7; // root of τ = e^{1/τ}

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(0.5).unwrap(), 1.0);
        assert_eq!(log_star(std::f64::consts::E).unwrap(), 1.0);
        assert!((log_star(std::f64::consts::E.powi(2)).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(log_star(0.0), Err(Error::NonPositive(_))));
    }

    #[test]
    fn omega_oracle() {
        // brute-force scan of e^{1/τ} ≤ τ on a fine grid
        let first = (1_000_000..2_000_000)
            .map(|i| i as f64 * 1e-6)
            .find(|&t| (1.0 / t).exp() <= t)
            .unwrap();
        assert!((first - OMEGA_RECIP).abs() < 2e-6);
    }

    #[test]
    fn s1_examples() {
        assert_eq!(s1_min_tau(&GridDist::point_mass(0.0), 1e-9).unwrap(), 0.0);
        let r = rademacher().unwrap();
        let t = s1_min_tau(&r, 1e-9).unwrap();
        assert!((t - OMEGA_RECIP).abs() < 1e-9, "{t}");
        let t2 = s1_min_tau(&r.scaled(2.0), 1e-9).unwrap();
        assert!((t2 - 2.0 * t).abs() < 2e-9);
        let coin = GridDist::make_grid(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(matches!(s1_min_tau(&coin, 1e-9), Err(Error::NotCentered(_))));
    }

    #[test]
    fn s1_check_brackets_min_tau() {
        let r = rademacher().unwrap();
        assert!(s1_check(&r, 1.77).unwrap().passed);
        assert!(!s1_check(&r, 1.75).unwrap().passed);
    }

    #[test]
    fn statulevicius_examples() {
        let gauss = CumulantSeq::gaussian(1.0, 6).unwrap();
        assert!(statulevicius_check(&gauss, 0.0).unwrap().passed);
        assert_eq!(statulevicius_min_tau(&gauss).unwrap(), 0.0);

        let r = rademacher().unwrap().cumulants(4).unwrap();
        let cert = statulevicius_check(&r, 1.0).unwrap();
        assert!(cert.passed);
        assert!((cert.probe_report[1].slack - 10.0).abs() < 1e-12);
        assert!((statulevicius_min_tau(&r).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-12);

        let p = centered_poisson(1.0, 1e-16).unwrap().cumulants(4).unwrap();
        let cert = statulevicius_check(&p, 0.2).unwrap();
        assert!(!cert.passed);
        assert!(cert.probe_report[0].slack < 0.0);
        assert!((statulevicius_min_tau(&p).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn a_tau_estimate() {
        let g = gaussian_grid(0.0, 1.0, 4096, 8.0).unwrap();
        assert!(a_class_tau_estimate_1d(&g, 8).unwrap() < 0.05);
        let r = rademacher().unwrap();
        assert!((a_class_tau_estimate_1d(&r, 4).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!(matches!(a_class_tau_estimate_1d(&GridDist::point_mass(0.0), 4), Err(Error::DegenerateVariance)));
        assert!(a_cumulant_certificate(&r, 1.0, 6).unwrap().flags.contains(&FLAG_CONSTANT_NORMALIZED.to_string()));
    }

    #[test]
    fn gaussian_estimate_shrinks_under_refinement() {
        let coarse = a_class_tau_estimate_1d(&gaussian_grid(0.0, 1.0, 9, 8.0).unwrap(), 8).unwrap();
        let fine = a_class_tau_estimate_1d(&gaussian_grid(0.0, 1.0, 4096, 8.0).unwrap(), 8).unwrap();
        assert!(fine <= coarse + 1e-12);
    }

    /// Mixed moments by enumerating the product support directly.
    fn enumerated_mixed(components: &[GridDist], u: &[f64], v: &[f64], m: usize) -> (f64, f64) {
        let mut atoms: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
        for c in components {
            let mut next = Vec::new();
            for (x, p) in &atoms {
                for (y, q) in c.atoms() {
                    let mut z = x.clone();
                    z.push(y);
                    next.push((z, p * q));
                }
            }
            atoms = next;
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = atoms.iter().map(|(x, p)| p * dot(x, v).powi(2) * dot(x, u).powi(m as i32 - 2)).sum();
        let second = atoms.iter().map(|(x, p)| p * dot(x, v).powi(2)).sum();
        (lhs, second)
    }

    #[test]
    fn mixed_moments_match_enumeration() {
        let comps = vec![rademacher().unwrap(), uniform(-1.0, 2.0, 4).unwrap().centered(), centered_poisson(0.5, 1e-15).unwrap()];
        let coord: Vec<Vec<f64>> = comps.iter().map(|c| (0..=8).map(|k| c.raw_moment(k)).collect()).collect();
        for i in 0..5 {
            let u = sphere_point(i, 3, 0);
            let v = sphere_point(i, 3, 4);
            let t = mixed_moments(&coord, &u, &v, 6);
            for m in 3..=8 {
                let (lhs, second) = enumerated_mixed(&comps, &u, &v, m);
                assert!((t[2][m - 2] - lhs).abs() < 1e-10 * (1.0 + lhs.abs()));
                assert!((t[2][0] - second).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn b_class_examples() {
        let r = rademacher().unwrap();
        assert!(b_class_check(&[r.clone()], 1.0, 6, 16).unwrap().passed);
        assert!(b_class_check(&[r.clone(), r.clone()], 2f64.sqrt(), 4, 32).unwrap().passed);
        let p = centered_poisson(1.0, 1e-15).unwrap();
        assert!(!b_class_check(&[p], 0.01, 4, 8).unwrap().passed);
        let coin = GridDist::make_grid(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(matches!(b_class_check(&[coin], 1.0, 4, 4), Err(Error::NotCentered(_))));
    }

    #[test]
    fn bounded_support_implies_b_membership() {
        for (i, n) in [2usize, 3, 5, 9].iter().enumerate() {
            let u = uniform(-1.0, 1.0 + i as f64 * 0.5, *n).unwrap().centered();
            let tau = u.min_point().abs().max(u.max_point().abs());
            for order in [3, 6, 12] {
                assert!(b_class_check(&[u.clone()], tau, order, 8).unwrap().passed);
            }
        }
    }

    #[test]
    fn a_numeric_examples() {
        let g = gaussian_grid(0.0, 1.0, 8192, 20.0).unwrap();
        assert!(a_class_check_numeric(&[g], 0.1, 32).unwrap().passed);
        let r = rademacher().unwrap();
        assert!(a_class_check_numeric(&[r.clone()], 1.0, 64).unwrap().passed);
        assert!(!a_class_check_numeric(&[r], 0.05, 64).unwrap().passed);
    }

    #[test]
    fn a_numeric_threshold_matches_dense_scan() {
        // sup_z |d³/dz³ log cosh z| = 4/(3√3), attained inside |z| < 0.9/τ near the threshold
        let threshold = 4.0 / (3.0 * 3f64.sqrt());
        let scan = (0..200_000)
            .map(|i| {
                let z = i as f64 * 1e-5;
                2.0 * z.tanh() / z.cosh().powi(2)
            })
            .fold(0.0, f64::max);
        assert!((scan - threshold).abs() < 1e-9);
        let r = rademacher().unwrap();
        assert!(a_class_check_numeric(&[r.clone()], threshold + 0.01, 128).unwrap().passed);
        assert!(!a_class_check_numeric(&[r], threshold - 0.02, 128).unwrap().passed);
    }
}
