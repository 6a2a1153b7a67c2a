//! Special functions and numerical audits of auxiliary inequalities.

use crate::error::{invalid, Result};
use crate::quad;
use crate::rng::{replicate, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::E;

/// Outcome of a numerical audit. Every entry is oriented so that the audited
/// inequality reads `lhs[i] ≤ rhs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckResult {
    pub lemma: String,
    pub inputs: Vec<(String, f64)>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `min_i (rhs[i] - lhs[i])`.
    pub margin: f64,
    pub pass: bool,
    pub notes: Vec<(String, f64)>,
}

impl LemmaCheckResult {
    pub fn new(lemma: &str, inputs: Vec<(String, f64)>, lhs: Vec<f64>, rhs: Vec<f64>, pass: bool) -> Self {
        let margin = lhs.iter().zip(&rhs).map(|(l, r)| r - l).fold(f64::INFINITY, f64::min);
        LemmaCheckResult { lemma: lemma.to_string(), inputs, lhs, rhs, margin, pass, notes: Vec::new() }
    }
}

fn named(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Principal branch of Lambert W on the positive axis, by Halley iteration.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("lambert_w needs finite x > 0, got {x}"));
    }
    let mut w = if x > E {
        let l = x.ln();
        l - l.ln()
    } else {
        (1.0 + x).ln() * 0.75
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(w)
}

/// Checks `log x - log log x ≤ W(x) ≤ log x - ½ log log x` on a grid and
/// reports the smallest grid point from which both hold onward.
pub fn lambert_w_bounds_check(x_grid: &[f64]) -> Result<LemmaCheckResult> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut holds = Vec::new();
    for &x in x_grid {
        if x < E {
            return invalid("bracketing needs x ≥ e so that log log x ≥ 0");
        }
        let w = lambert_w(x)?;
        let (l, ll) = (x.ln(), x.ln().ln());
        let lower = l - ll;
        let upper = l - 0.5 * ll;
        lhs.extend([lower, w]);
        rhs.extend([w, upper]);
        holds.push(lower <= w && w <= upper);
    }
    let onward = holds.iter().rposition(|h| !h).map_or(0, |i| i + 1);
    let x0 = x_grid.get(onward).copied().unwrap_or(f64::INFINITY);
    let pass = onward == 0 && !x_grid.is_empty();
    let mut out = LemmaCheckResult::new("lambert_w_bracket", named(&[("points", x_grid.len() as f64)]), lhs, rhs, pass);
    out.notes.push(("x0".into(), x0));
    Ok(out)
}

/// Coefficients `c_{N,i} = N^i Γ(N-i+β) / (i! (N-i-1)! (α+1)^{N-i+β})` and
/// `H(R) = Σ_i c_{N,i} (log R)^i`.
pub fn iter_int_closed(n: usize, alpha: f64, beta: f64, r: f64) -> Result<(f64, Vec<f64>)> {
    if n == 0 || !(alpha > -1.0) || !(beta > -1.0) || !(r > 1.0) {
        return invalid("iterated integral needs N ≥ 1, α > -1, β > -1, R > 1");
    }
    let nf = n as f64;
    let coeffs: Vec<f64> = (0..n)
        .map(|i| {
            let i_f = i as f64;
            let k = nf - i_f;
            (i_f * nf.ln() + ln_gamma(k + beta) - ln_gamma(i_f + 1.0) - ln_gamma(k) - (k + beta) * (alpha + 1.0).ln()).exp()
        })
        .collect();
    let lr = r.ln();
    let value = coeffs.iter().enumerate().map(|(i, c)| c * lr.powi(i as i32)).sum();
    Ok((value, coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OracleMethod {
    /// Nested adaptive quadrature, `N ≤ 3`.
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub stderr: f64,
}

fn integrand(prod: f64, alpha: f64, beta: f64) -> f64 {
    if prod > 1.0 || prod <= 0.0 {
        return 0.0;
    }
    let lg = -prod.ln();
    if beta == 0.0 {
        prod.powf(alpha)
    } else {
        prod.powf(alpha) * lg.powf(beta)
    }
}

/// Integral over `y_k, …, y_N ∈ [0,R]` given the product `p` of earlier coordinates.
fn nested(remaining: usize, p: f64, alpha: f64, beta: f64, r: f64, tol: f64) -> f64 {
    if remaining == 1 {
        return quad::integrate(&|y: f64| integrand(p * y, alpha, beta), 0.0, (1.0 / p).min(r), tol);
    }
    let top = r;
    // The inner integral has kinks where p·y·R^j = 1.
    let mut breaks = vec![0.0];
    for j in (1..remaining).rev() {
        let b = 1.0 / (p * r.powi(j as i32));
        if b > 0.0 && b < top {
            breaks.push(b);
        }
    }
    breaks.push(top);
    let f = |y: f64| nested(remaining - 1, p * y, alpha, beta, r, tol);
    quad::integrate_pieces(&f, &breaks, tol * 10.0)
}

/// Independent evaluation of `∫_{[0,R]^N} (y_1⋯y_N)^α (log 1/(y_1⋯y_N))^β 1{y_1⋯y_N ≤ 1} dy`.
pub fn iter_int_oracle(n: usize, alpha: f64, beta: f64, r: f64, method: OracleMethod) -> Result<OracleValue> {
    if n == 0 || !(alpha > -1.0) || !(beta > -1.0) || !(r > 1.0) {
        return invalid("iterated integral needs N ≥ 1, α > -1, β > -1, R > 1");
    }
    match method {
        OracleMethod::Quadrature => {
            if n > 3 {
                return invalid("nested quadrature is limited to N ≤ 3");
            }
            Ok(OracleValue { value: nested(n, 1.0, alpha, beta, r, 1e-11), stderr: 0.0 })
        }
        OracleMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return invalid("Monte Carlo needs at least two samples");
            }
            let chunks = 64u64.min(samples);
            let per = samples / chunks;
            let extra = samples % chunks;
            let sums = replicate(seed, chunks, |i, rng: &mut Stream| {
                let m = per + u64::from(i < extra);
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..m {
                    let mut prod = 1.0;
                    for _ in 0..n {
                        prod *= r * (1.0 - rng.random::<f64>());
                    }
                    let v = integrand(prod, alpha, beta);
                    s += v;
                    s2 += v * v;
                }
                (s, s2)
            });
            let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let nf = samples as f64;
            let mean = s / nf;
            let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            let vol = r.powi(n as i32);
            Ok(OracleValue { value: vol * mean, stderr: vol * (var / nf).sqrt() })
        }
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `log Σ_{N≥0} z^N / Γ(αN+β)^{1/γ}`, truncated once terms fall below `1e-16` of the sum.
pub fn log_gamma_series(alpha: f64, beta: f64, gamma: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) || !(z >= 0.0) {
        return invalid("series needs α, β, γ > 0 and z ≥ 0");
    }
    let first = -ln_gamma(beta) / gamma;
    if z == 0.0 {
        return Ok(first);
    }
    let lz = z.ln();
    let mut terms = vec![first];
    let mut best = first;
    let mut k = 1usize;
    loop {
        let t = k as f64 * lz - ln_gamma(alpha * k as f64 + beta) / gamma;
        terms.push(t);
        let decreasing = t < terms[k - 1];
        best = best.max(t);
        if decreasing && t < best + (1e-16f64).ln() - (k as f64).ln() {
            break;
        }
        k += 1;
        if k > 50_000_000 {
            return invalid("series did not settle within the term budget");
        }
    }
    Ok(log_sum_exp(&terms))
}

/// Searches a geometric grid for the smallest `C` with
/// `Σ z^N / Γ(αN+β)^{1/γ} ≤ (γ/α) C e^{C z^{γ/α}}` at every grid `z`.
pub fn gamma_series_bound_check(alpha: f64, beta: f64, gamma: f64, z_grid: &[f64]) -> Result<LemmaCheckResult> {
    let logs = z_grid.iter().map(|&z| log_gamma_series(alpha, beta, gamma, z)).collect::<Result<Vec<_>>>()?;
    let q = gamma / alpha;
    let log_bound = |c: f64, z: f64| (gamma / alpha).ln() + c.ln() + c * z.powf(q);
    let found = (0..400)
        .map(|k| 2f64.powf(k as f64 / 4.0) / 64.0)
        .find(|&c| z_grid.iter().zip(&logs).all(|(&z, &s)| s <= log_bound(c, z) + 1e-12 * s.abs().max(1.0)));
    let c = found.unwrap_or(f64::NAN);
    let rhs = if found.is_some() { z_grid.iter().map(|&z| log_bound(c, z)).collect() } else { vec![f64::NAN; logs.len()] };
    let mut out = LemmaCheckResult::new(
        "gamma_series_bound",
        named(&[("alpha", alpha), ("beta", beta), ("gamma", gamma)]),
        logs,
        rhs,
        found.is_some(),
    );
    out.notes.push(("C".into(), c));
    Ok(out)
}

/// A law on finitely many positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    pub atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || atoms.iter().any(|&(v, p)| !(v > 0.0) || !(p > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return invalid("discrete law needs positive values and probabilities summing to one");
        }
        Ok(DiscreteLaw { atoms })
    }

    pub fn moment(&self, p: f64) -> f64 {
        self.atoms.iter().map(|&(v, w)| w * v.powf(p)).sum()
    }

    pub fn prob_above(&self, level: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 > level).map(|a| a.1).sum()
    }

    /// A random law with `k` support points, values log-uniform on `[1e-2, 1e2]`.
    pub fn random(k: usize, rng: &mut Stream) -> Self {
        let mut w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let atoms = w.into_iter().map(|p| (10f64.powf(4.0 * rng.random::<f64>() - 2.0), p)).collect();
        DiscreteLaw { atoms }
    }
}

/// Both Paley–Zygmund variants, evaluated exactly on a discrete law.
pub fn paley_zygmund_check(law: &DiscreteLaw, alpha: f64, delta: f64, p: f64) -> Result<LemmaCheckResult> {
    if !(alpha > 0.0 && alpha < 1.0 && delta > 0.0 && delta < 1.0 && p > 1.0) {
        return invalid("needs α, δ ∈ (0,1) and p > 1");
    }
    let m1 = law.moment(1.0);
    let mp = law.moment(p);
    let q = p / (p - 1.0);
    let first_lhs = (1.0 - delta).powf(q) * m1.powf(q) / mp.powf(1.0 / (p - 1.0));
    let first_rhs = law.prob_above(delta * m1);
    let second_lhs = 2f64.powf(-alpha - q) * m1.powf(alpha + q) / mp.powf(1.0 / (p - 1.0));
    let second_rhs = law.moment(alpha);
    let slack = 1e-12;
    let pass = first_lhs <= first_rhs * (1.0 + slack) && second_lhs <= second_rhs * (1.0 + slack);
    Ok(LemmaCheckResult::new(
        "paley_zygmund",
        named(&[("alpha", alpha), ("delta", delta), ("p", p), ("support", law.atoms.len() as f64)]),
        vec![first_lhs, second_lhs],
        vec![first_rhs, second_rhs],
        pass,
    ))
}

/// Toy Poisson integral for the decoupling audit.
///
/// Atoms arrive at rate `rate` on `[0,1]` with Pareto(`mark_alpha`) marks `z`.
/// The integrand is `H(t, z) = z · min(1 + #{atoms before t}, cap)`, or `H = z`
/// when `adapted` is false. The decoupled integral uses the count of an
/// independent copy of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingToy {
    pub rate: f64,
    pub mark_alpha: f64,
    pub cap: usize,
    pub adapted: bool,
}

impl Default for DecouplingToy {
    fn default() -> Self {
        DecouplingToy { rate: 5.0, mark_alpha: 1.5, cap: 4, adapted: true }
    }
}

fn arrival_times(rate: f64, rng: &mut Stream) -> Vec<f64> {
    let n = crate::levy::poisson_count(rate, rng);
    let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    t
}

impl DecouplingToy {
    /// One draw of `(X, X')`.
    pub fn sample(&self, rng: &mut Stream) -> (f64, f64) {
        let times = arrival_times(self.rate, rng);
        let marks: Vec<f64> = times.iter().map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / self.mark_alpha)).collect();
        let copy = arrival_times(self.rate, rng);
        let weight = |count: usize| if self.adapted { (1 + count).min(self.cap) as f64 } else { 1.0 };
        let mut x = 0.0;
        let mut xp = 0.0;
        for (i, (&t, &z)) in times.iter().zip(&marks).enumerate() {
            x += z * weight(i);
            xp += z * weight(copy.partition_point(|&s| s < t));
        }
        (x, xp)
    }
}

/// Monte Carlo audit of
/// `P(X>R) ≤ 7θ P(X>R/3) + 2 P(X'>R/6) + θ^{-1} P(X'>θR/6)`.
///
/// An empty `r_grid` uses empirical quantiles 0.5 to 0.99 of `X`.
pub fn decoupling_check(toy: &DecouplingToy, theta: f64, r_grid: &[f64], replications: u64, seed: u64) -> Result<LemmaCheckResult> {
    if !(theta > 0.0 && theta < 1.0) || replications < 10 {
        return invalid("needs θ ∈ (0,1) and at least ten replications");
    }
    let draws = replicate(seed, replications, |_, rng| toy.sample(rng));
    let mut xs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mut xps: Vec<f64> = draws.iter().map(|d| d.1).collect();
    xs.sort_by(f64::total_cmp);
    xps.sort_by(f64::total_cmp);
    let n = replications as f64;
    let above = |s: &[f64], level: f64| (s.len() - s.partition_point(|&v| v <= level)) as f64 / n;
    let var = |p: f64| p * (1.0 - p) / n;
    let grid: Vec<f64> = if r_grid.is_empty() {
        [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99].iter().map(|q| xs[((q * n) as usize).min(xs.len() - 1)]).collect()
    } else {
        r_grid.to_vec()
    };
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut pass = true;
    for &r in &grid {
        let p0 = above(&xs, r);
        let p1 = above(&xs, r / 3.0);
        let p2 = above(&xps, r / 6.0);
        let p3 = above(&xps, theta * r / 6.0);
        let bound = 7.0 * theta * p1 + 2.0 * p2 + p3 / theta;
        let sd = (var(p0) + 49.0 * theta * theta * var(p1) + 4.0 * var(p2) + var(p3) / (theta * theta)).sqrt();
        pass &= p0 <= bound + 4.0 * sd;
        lhs.push(p0);
        rhs.push(bound);
    }
    Ok(LemmaCheckResult::new(
        "decoupling",
        named(&[("theta", theta), ("replications", n), ("rate", toy.rate), ("cap", toy.cap as f64)]),
        lhs,
        rhs,
        pass,
    ))
}

/// `log₊(x) = log(x ∨ e)`.
pub fn log_plus(x: f64) -> f64 {
    x.max(E).ln()
}

/// `log^{(n)}(r)`, with `log₊` at every level.
pub fn iter_log(n: u32, r: f64) -> f64 {
    (0..n).fold(r, |v, _| log_plus(v))
}

/// Value of `exp^{(n)}(x)`; `Overflow` stands for `exp^{(level)}(residual)`
/// when that number exceeds the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IterExp {
    Value(f64),
    Overflow { level: u32, residual: f64 },
}

impl IterExp {
    /// `log^{(n)}` applied to the represented number.
    pub fn iter_log(self, n: u32) -> f64 {
        match self {
            IterExp::Value(v) => iter_log(n, v),
            IterExp::Overflow { level, residual } => {
                if n >= level {
                    iter_log(n - level, residual)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Natural log of the represented number; may itself be infinite.
    pub fn ln(self) -> f64 {
        match self {
            IterExp::Value(v) => v.ln(),
            IterExp::Overflow { level, residual } => match exp_iter(level - 1, residual) {
                IterExp::Value(v) => v,
                IterExp::Overflow { .. } => f64::INFINITY,
            },
        }
    }

    /// `self ≥ threshold` with the comparison done in log-space for overflowed values.
    pub fn at_least(self, threshold: f64) -> bool {
        match self {
            IterExp::Value(v) => v >= threshold,
            IterExp::Overflow { .. } => true,
        }
    }
}

const LN_MAX: f64 = 709.782712893384;

/// `exp^{(n)}(x)`.
pub fn exp_iter(n: u32, x: f64) -> IterExp {
    let mut v = x;
    for k in 0..n {
        if v > LN_MAX {
            return IterExp::Overflow { level: n - k, residual: v };
        }
        v = v.exp();
    }
    IterExp::Value(v)
}
