//! Backward atom chains of the pure large-jump noise.
//!
//! Starting from `(t, x)`, each step looks back for the most recent atom of
//! `Λ_≥` inside the parabolic cone `|η - y| ≤ √(τ - s)`. Gaps are i.i.d. with
//! CDF `1 - exp(-C x^{1+d/2})` at unit jump mass, and the spatial offset is
//! uniform on the ball of radius `√Δτ`.

use crate::error::{invalid, Result};
use crate::kernel::log_heat_kernel_r2;
use crate::levy::{JumpRange, LevyMeasure};
use crate::rng::{replicate, stream_seed, Stream};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};
use std::f64::consts::PI;
use std::ops::RangeInclusive;

/// `C = π^{d/2} / Γ(d/2 + 2)`: volume of the cone `{(s,y): |y| ≤ √s, s ≤ 1}`.
pub fn gap_distribution_constant(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    PI.powf(h) / gamma(h + 2.0)
}

fn gap_exponent(d: usize) -> f64 {
    1.0 + 0.5 * d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub dtau: f64,
    pub deta: Vec<f64>,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardChain {
    pub t: f64,
    pub x: Vec<f64>,
    pub steps: Vec<ChainStep>,
    /// The chain ran past time zero.
    pub terminated: bool,
    /// The first gap that was not retained.
    pub terminal_gap: Option<f64>,
}

impl BackwardChain {
    /// The event that exactly `n` gaps of length at most `t/n` were followed by a gap longer than `t`.
    pub fn in_event(&self, n: usize) -> bool {
        self.steps.len() == n
            && self.steps.iter().all(|s| s.dtau <= self.t / n as f64)
            && self.terminal_gap.is_some_and(|g| g > self.t)
    }

    /// `Σ log(g(Δτ_i, Δη_i) ζ_i)`.
    pub fn log_weight(&self) -> f64 {
        let d = self.x.len();
        self.steps
            .iter()
            .map(|s| log_heat_kernel_r2(s.dtau, s.deta.iter().map(|v| v * v).sum(), d) + s.zeta.ln())
            .sum()
    }
}

fn ball_offset(radius: f64, d: usize, rng: &mut Stream) -> Vec<f64> {
    let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|v| v * r / norm).collect()
}

fn large_range() -> JumpRange {
    JumpRange::closed(1.0, f64::INFINITY)
}

/// Samples the backward chain from `(t, x)`.
///
/// The gap rate is `C·λ([1,∞))`, so the gap law reduces to the unit-mass one
/// when `λ([1,∞)) = 1`, as for the Pareto family.
pub fn sample_backward_chain(t: f64, x: &[f64], measure: &LevyMeasure, rng: &mut Stream) -> Result<BackwardChain> {
    let d = x.len();
    if d == 0 || !(t > 0.0) {
        return invalid("backward chain needs d ≥ 1 and t > 0");
    }
    let mass = measure.finite_mass(large_range())?;
    if !(mass > 0.0) {
        return invalid("backward chain needs λ([1,∞)) > 0");
    }
    let rate = gap_distribution_constant(d) * mass;
    let k = gap_exponent(d);
    let mut steps = Vec::new();
    let mut elapsed = 0.0;
    loop {
        let u: f64 = rng.random();
        let gap = (-(-u).ln_1p() / rate).powf(1.0 / k);
        if elapsed + gap > t {
            return Ok(BackwardChain { t, x: x.to_vec(), steps, terminated: true, terminal_gap: Some(gap) });
        }
        elapsed += gap;
        let deta = ball_offset(gap.sqrt(), d, rng);
        let zeta = measure.sample_size(large_range(), mass, rng);
        steps.push(ChainStep { dtau: gap, deta, zeta });
    }
}

/// `P(A_N) = e^{-C t^{1+d/2}} (1 - e^{-C (t/N)^{1+d/2}})^N` at unit jump mass.
pub fn prob_a_n(t: f64, n: usize, d: usize) -> f64 {
    prob_a_n_with_rate(t, n, d, gap_distribution_constant(d))
}

/// As [`prob_a_n`] with gap rate `rate` in place of `C`.
pub fn prob_a_n_with_rate(t: f64, n: usize, d: usize, rate: f64) -> f64 {
    let k = gap_exponent(d);
    let q = -(-rate * (t / n as f64).powf(k)).exp_m1();
    (-rate * t.powf(k) + n as f64 * q.ln()).exp()
}

/// CDF of one gap given `A_N`: `(1 - e^{-C x^k}) / (1 - e^{-C (t/N)^k})` on `(0, t/N)`.
pub fn conditional_gap_cdf(x: f64, t: f64, n: usize, d: usize) -> f64 {
    let c = gap_distribution_constant(d);
    let k = gap_exponent(d);
    let top = t / n as f64;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= top {
        return 1.0;
    }
    (-c * x.powf(k)).exp_m1() / (-c * top.powf(k)).exp_m1()
}

/// `f_N(x) = C k x^{d/2} e^{-C x^k} / (1 - e^{-C (t/N)^k})` with `k = 1 + d/2`.
pub fn conditional_gap_density(x: f64, t: f64, n: usize, d: usize) -> f64 {
    let c = gap_distribution_constant(d);
    let k = gap_exponent(d);
    let top = t / n as f64;
    if x <= 0.0 || x >= top {
        return 0.0;
    }
    c * k * x.powf(k - 1.0) * (-c * x.powf(k)).exp() / -(-c * top.powf(k)).exp_m1()
}

/// A chain of exactly `n` steps drawn from its law given `A_N`.
pub fn sample_conditional_chain(t: f64, n: usize, x: &[f64], measure: &LevyMeasure, rng: &mut Stream) -> Result<BackwardChain> {
    let d = x.len();
    if n == 0 || d == 0 || !(t > 0.0) {
        return invalid("conditional chain needs N ≥ 1, d ≥ 1, t > 0");
    }
    let mass = measure.finite_mass(large_range())?;
    if !(mass > 0.0) {
        return invalid("conditional chain needs λ([1,∞)) > 0");
    }
    let c = gap_distribution_constant(d);
    let k = gap_exponent(d);
    let q = -(-c * (t / n as f64).powf(k)).exp_m1();
    let steps = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let gap = (-(-u * q).ln_1p() / c).powf(1.0 / k);
            let deta = ball_offset(gap.sqrt(), d, rng);
            let zeta = measure.sample_size(large_range(), mass, rng);
            ChainStep { dtau: gap, deta, zeta }
        })
        .collect();
    Ok(BackwardChain { t, x: x.to_vec(), steps, terminated: true, terminal_gap: None })
}

/// `P(Y_1⋯Y_N > R)` for i.i.d. Pareto(α) factors with scale `c`.
///
/// `Σ α log(Y_i / c)` is Gamma(N, 1), so the tail is `Q(N, α log R - N α log c)`.
pub fn product_pareto_tail(n: usize, alpha: f64, c: f64, r: f64) -> Result<f64> {
    if n == 0 || !(alpha > 0.0) || !(c > 0.0) || !(r > 0.0) {
        return invalid("product tail needs N ≥ 1 and positive α, c, R");
    }
    let arg = alpha * r.ln() - n as f64 * alpha * c.ln();
    if arg <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(n as f64, arg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub p_an_closed: f64,
    pub p_an_mc: f64,
    pub cond_estimate: f64,
    pub cond_stderr: f64,
    pub summand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundScan {
    pub r: f64,
    pub rows: Vec<ScanRow>,
    /// Arg max of the summand, ties toward smaller `N`.
    pub optimal_n: usize,
    /// `Σ_N P(A_N) · P(chain product > R | A_N)`.
    pub bound: f64,
}

impl LowerBoundScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,p_AN_closed,p_AN_mc,cond_estimate,cond_stderr,summand\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, r.p_an_closed, r.p_an_mc, r.cond_estimate, r.cond_stderr, r.summand
            ));
        }
        out
    }
}

/// For each `N`, estimates `P(∏ g(Δτ_i,Δη_i) ζ_i > R | A_N)` and the chain-event
/// frequency, and combines them with the closed-form `P(A_N)` at rate `C·λ([1,∞))`.
pub fn lower_bound_scan(
    t: f64,
    x: &[f64],
    measure: &LevyMeasure,
    r: f64,
    n_range: RangeInclusive<usize>,
    replications: u64,
    seed: u64,
) -> Result<LowerBoundScan> {
    let d = x.len();
    if *n_range.start() == 0 || n_range.is_empty() || replications == 0 || !(r > 0.0) {
        return invalid("scan needs 1 ≤ N_min ≤ N_max, R > 0 and replications ≥ 1");
    }
    if measure.tail(0.0) - measure.tail(1.0) - measure.atom_mass(1.0) > 0.0 {
        return invalid("the chain scan covers noise without jumps below one");
    }
    let mass = measure.finite_mass(large_range())?;
    let rate = gap_distribution_constant(d) * mass;
    let ln_r = r.ln();

    let chains = replicate(stream_seed(seed, u64::MAX), replications, |_, rng| sample_backward_chain(t, x, measure, rng));
    let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for n in n_range {
        let hits = replicate(stream_seed(seed, n as u64), replications, |_, rng| {
            sample_conditional_chain(t, n, x, measure, rng).map(|c| c.log_weight() > ln_r)
        });
        let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
        let p = hits.iter().filter(|&&h| h).count() as f64 / replications as f64;
        let freq = chains.iter().filter(|c| c.in_event(n)).count() as f64 / replications as f64;
        let closed = prob_a_n_with_rate(t, n, d, rate);
        rows.push(ScanRow {
            n,
            p_an_closed: closed,
            p_an_mc: freq,
            cond_estimate: p,
            cond_stderr: (p * (1.0 - p) / replications as f64).sqrt(),
            summand: closed * p,
        });
    }
    let optimal_n = rows.iter().fold(&rows[0], |best, row| if row.summand > best.summand { row } else { best }).n;
    let bound = rows.iter().map(|row| row.summand).sum();
    Ok(LowerBoundScan { r, rows, optimal_n, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ks_test;
    use crate::quad;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn gap_constant_examples() {
        assert_relative_eq!(gap_distribution_constant(1), 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(gap_distribution_constant(2), PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gap_distribution_constant(4), PI * PI / 6.0, max_relative = 1e-14);
        // Cone volume ∫_0^1 vol(B(0,√s)) ds by quadrature in d = 3.
        let ball = |s: f64| 4.0 / 3.0 * PI * s.powf(1.5);
        assert_relative_eq!(quad::integrate(&ball, 0.0, 1.0, 1e-13), gap_distribution_constant(3), max_relative = 1e-9);
    }

    #[test]
    fn prob_a_n_examples() {
        let c: f64 = 4.0 / 3.0;
        assert_relative_eq!(prob_a_n(1.0, 1, 1), (-c).exp() * (1.0 - (-c).exp()), max_relative = 1e-14);
        assert!((prob_a_n(1.0, 1, 1) - 0.19411).abs() < 1e-5);
        assert!(prob_a_n(1.0, 200, 1) < 1e-100);
        assert!(prob_a_n(50.0, 2, 1) < 1e-100);
    }

    #[test]
    fn product_tail_examples() {
        assert_relative_eq!(product_pareto_tail(1, 2.0, 1.0, 5.0).unwrap(), 0.04, max_relative = 1e-12);
        let want = (1.0 + 10f64.ln()) / 10.0;
        assert_relative_eq!(product_pareto_tail(2, 1.0, 1.0, 10.0).unwrap(), want, max_relative = 1e-12);
        assert_eq!(product_pareto_tail(4, 1.5, 2.0, 2f64.powf(4.0 / 1.5)).unwrap(), 1.0);
        assert_eq!(product_pareto_tail(3, 1.0, 1.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn product_tail_matches_poisson_sum() {
        // P(Gamma(N,1) > a) = e^{-a} Σ_{i<N} a^i / i!.
        for n in 1..8 {
            for &r in &[1.5, 10.0, 1e4] {
                let a: f64 = 0.7 * f64::ln(r);
                let mut term = 1.0;
                let mut sum = 0.0;
                for i in 0..n {
                    if i > 0 {
                        term *= a / i as f64;
                    }
                    sum += term;
                }
                let want = (-a).exp() * sum;
                assert_relative_eq!(product_pareto_tail(n, 0.7, 1.0, r).unwrap(), want, max_relative = 1e-10);
            }
        }
        let mut prev = 1.0;
        for k in 0..100 {
            let v = product_pareto_tail(3, 1.2, 1.0, 1.2f64.powi(k)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn backward_chain_structure() {
        let lam = LevyMeasure::pareto(1.0);
        for i in 0..200 {
            let c = sample_backward_chain(1.0, &[0.0, 0.0], &lam, &mut stream(30, i)).unwrap();
            assert!(c.terminated);
            let total: f64 = c.steps.iter().map(|s| s.dtau).sum();
            assert!(total <= 1.0);
            assert!(total + c.terminal_gap.unwrap() > 1.0);
            for s in &c.steps {
                assert!(s.deta.iter().map(|v| v * v).sum::<f64>() <= s.dtau * (1.0 + 1e-12));
                assert!(s.zeta >= 1.0);
            }
        }
        let empty = (0..200).all(|i| sample_backward_chain(1e-9, &[0.0], &lam, &mut stream(31, i)).unwrap().steps.is_empty());
        assert!(empty);
        assert!(sample_backward_chain(1.0, &[0.0], &LevyMeasure::dirac(vec![(0.5, 1.0)]), &mut stream(31, 0)).is_err());
    }

    #[test]
    fn gap_law_and_radial_law() {
        let lam = LevyMeasure::pareto(1.0);
        let c = gap_distribution_constant(1);
        let n = 20_000;
        let mut gaps = Vec::new();
        let mut radii = Vec::new();
        for i in 0..n {
            let ch = sample_backward_chain(30.0, &[0.0], &lam, &mut stream(32, i)).unwrap();
            let s = &ch.steps[0];
            gaps.push(s.dtau);
            radii.push(s.deta[0].abs() / s.dtau.sqrt());
        }
        let (_, p) = ks_test(&gaps, |x| 1.0 - (-c * x.powf(1.5)).exp());
        assert!(p > 0.01, "gap p = {p}");
        let (_, p) = ks_test(&radii, |r| r.clamp(0.0, 1.0));
        assert!(p > 0.01, "radius p = {p}");
    }

    #[test]
    fn conditional_gaps() {
        let lam = LevyMeasure::pareto(2.0);
        let n = 20_000;
        let gaps: Vec<f64> = (0..n)
            .flat_map(|i| {
                let ch = sample_conditional_chain(1.0, 3, &[0.0, 0.0], &lam, &mut stream(33, i)).unwrap();
                assert_eq!(ch.steps.len(), 3);
                ch.steps.into_iter().map(|s| s.dtau).take(1)
            })
            .collect();
        assert!(gaps.iter().all(|&g| g > 0.0 && g <= 1.0 / 3.0));
        let (_, p) = ks_test(&gaps, |x| conditional_gap_cdf(x, 1.0, 3, 2));
        assert!(p > 0.01);

        // Density integrates to the CDF, and the mean of f_1 for small t.
        let f = |x: f64| conditional_gap_density(x, 1.0, 3, 2);
        assert_relative_eq!(quad::integrate(&f, 0.0, 0.2, 1e-13), conditional_gap_cdf(0.2, 1.0, 3, 2), max_relative = 1e-9);
        let t = 0.05;
        let mean = quad::integrate(&|x: f64| x * conditional_gap_density(x, t, 1, 1), 0.0, t, 1e-14);
        let draws: f64 = (0..n)
            .map(|i| sample_conditional_chain(t, 1, &[0.0], &lam, &mut stream(34, i)).unwrap().steps[0].dtau)
            .sum::<f64>()
            / n as f64;
        let var = quad::integrate(&|x: f64| (x - mean).powi(2) * conditional_gap_density(x, t, 1, 1), 0.0, t, 1e-14);
        assert!((draws - mean).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn scan_degenerate_threshold() {
        let lam = LevyMeasure::pareto(1.0);
        // Every single-step product g(Δτ,Δη)ζ exceeds e^{-2} on Δτ ≤ 1.
        let scan = lower_bound_scan(1.0, &[0.0], &lam, (-2f64).exp(), 1..=1, 500, 7).unwrap();
        assert_eq!(scan.rows[0].cond_estimate, 1.0);
        let scan = lower_bound_scan(1.0, &[0.0], &lam, 50.0, 1..=4, 2000, 7).unwrap();
        assert!(scan.rows.iter().all(|r| r.summand <= r.p_an_closed));
        assert!(scan.to_csv().lines().count() == 5);
        assert!(lower_bound_scan(1.0, &[0.0], &LevyMeasure::dirac(vec![(0.5, 1.0), (2.0, 1.0)]), 5.0, 1..=2, 10, 0).is_err());
    }
}
