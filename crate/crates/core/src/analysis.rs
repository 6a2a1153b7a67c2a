//! Tail statistics of simulated samples and the integral-test classifier for
//! power-log growth gauges.

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::solver::{CubeSupTable, FieldSample};
use serde::{Deserialize, Serialize};

fn sorted_desc(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return invalid("tail estimators need positive finite samples");
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn hill_sorted(desc: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= desc.len() {
        return invalid(format!("Hill needs 1 ≤ k < n, got k={k}, n={}", desc.len()));
    }
    if !(desc[k] > 0.0) {
        return Err(Error::InsufficientData(format!("order statistic {} is not positive", k + 1)));
    }
    let base = desc[k].ln();
    let mean = desc[..k].iter().map(|x| x.ln() - base).sum::<f64>() / k as f64;
    if !(mean > 0.0) {
        return Err(Error::InsufficientData("zero log-spacings above the order statistic".into()));
    }
    Ok(1.0 / mean)
}

/// `α̂(k) = (k⁻¹ Σ_{i≤k} log(X_(i)/X_(k+1)))⁻¹` with `X_(1) ≥ X_(2) ≥ …`.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<f64> {
    hill_sorted(&sorted_desc(samples)?, k)
}

/// Hill estimates at every `k` in `ks`; entries without spacing are skipped.
pub fn hill_trajectory(samples: &[f64], ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let desc = sorted_desc(samples)?;
    Ok(ks.iter().filter_map(|&k| hill_sorted(&desc, k).ok().map(|a| (k, a))).collect())
}

/// The conventional summary order `k = ⌊n^{0.6}⌋`.
pub fn default_hill_k(n: usize) -> usize {
    ((n as f64).powf(0.6) as usize).clamp(1, n.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub r: f64,
    pub s: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub n: usize,
    pub points: Vec<SurvivalPoint>,
}

impl SurvivalCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,survival,stderr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.r, p.s, p.stderr));
        }
        out
    }
}

/// Empirical `P(X > R)` with binomial standard errors.
pub fn survival_curve(samples: &[f64], r_grid: &[f64]) -> Result<SurvivalCurve> {
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("R grid must be increasing");
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let points = r_grid
        .iter()
        .map(|&r| {
            let above = (s.len() - s.partition_point(|&v| v <= r)) as f64 / n;
            SurvivalPoint { r, s: above, stderr: (above * (1.0 - above) / n).sqrt() }
        })
        .collect();
    Ok(SurvivalCurve { n: s.len(), points })
}

/// Empirical quantile of an ascending sample (lower interpolation-free order statistic).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SvForm {
    /// Regressor `(log R)^{1/(1+θ)}`.
    A { theta: f64 },
    /// Regressor `(log R)(log log log R)/(log log R)`.
    B,
}

impl SvForm {
    pub fn regressor(&self, r: f64) -> f64 {
        let l = r.ln();
        match *self {
            SvForm::A { theta } => l.powf(1.0 / (1.0 + theta)),
            SvForm::B => l * l.ln().ln() / l.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvFit {
    pub form: SvForm,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr: f64,
    pub fit_range: (f64, f64),
    pub points_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ols {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr: f64,
}

pub(crate) fn ols(x: &[f64], y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ols { slope, intercept, r2, stderr }
}

/// Least squares of `log Ŝ(R) + α log R` on the form regressor, over points in
/// `fit_range` with `0 < Ŝ < 1` and at least 30 exceedances.
pub fn slow_variation_fit(curve: &SurvivalCurve, alpha: f64, form: SvForm, fit_range: (f64, f64)) -> Result<SvFit> {
    let n = curve.n as f64;
    let used: Vec<&SurvivalPoint> = curve
        .points
        .iter()
        .filter(|p| p.r >= fit_range.0 && p.r <= fit_range.1 && p.s > 0.0 && p.s < 1.0 && p.s * n >= 30.0 - 1e-9)
        .collect();
    if used.len() < 5 {
        return Err(Error::InsufficientData(format!("slow-variation fit needs 5 usable points, found {}", used.len())));
    }
    let x: Vec<f64> = used.iter().map(|p| form.regressor(p.r)).collect();
    let y: Vec<f64> = used.iter().map(|p| p.s.ln() + alpha * p.r.ln()).collect();
    let fit = ols(&x, &y);
    Ok(SvFit {
        form,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        stderr: fit.stderr,
        fit_range,
        points_used: used.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub sample_size: usize,
    /// Largest order statistics, descending.
    pub top: Vec<f64>,
    pub hill: Vec<(usize, f64)>,
    /// `(k, α̂(k))` at the conventional `k = n^{0.6}`.
    pub hill_summary: Option<(usize, f64)>,
    pub survival: SurvivalCurve,
    pub sv_fit: Option<SvFit>,
}

/// Hill trajectory, survival curve and, when `fit` is given, the slow-variation fit.
///
/// Samples may contain zeros (a field with no contributing atom); they count in
/// the survival curve, and Hill entries are kept only where `X_(k+1) > 0`.
pub fn tail_report(
    samples: &[f64],
    k_grid: &[usize],
    r_grid: &[f64],
    fit: Option<(f64, SvForm, (f64, f64))>,
) -> Result<TailReport> {
    if samples.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return invalid("tail report needs nonnegative finite samples");
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let hill = k_grid.iter().filter_map(|&k| hill_sorted(&desc, k).ok().map(|a| (k, a))).collect();
    let k0 = default_hill_k(desc.len());
    let hill_summary = hill_sorted(&desc, k0).ok().map(|a| (k0, a));
    let survival = survival_curve(samples, r_grid)?;
    let sv_fit = match fit {
        Some((alpha, form, range)) => slow_variation_fit(&survival, alpha, form, range).ok(),
        None => None,
    };
    Ok(TailReport { sample_size: desc.len(), top: desc.iter().take(1000).copied().collect(), hill, hill_summary, survival, sv_fit })
}

/// Two-sided Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_survival(lam))
}

/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_survival(lam: f64) -> f64 {
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Gauge `f(x) = x^a (log x)^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthGauge {
    pub a: f64,
    pub b: f64,
}

impl GrowthGauge {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !b.is_finite() || (a == 0.0 && b < 0.0) {
            return invalid("gauge needs a ≥ 0 and eventually nondecreasing growth");
        }
        Ok(GrowthGauge { a, b })
    }

    /// `log f` as a function of `L = log x`.
    pub fn ln_value(&self, ln_x: f64) -> f64 {
        self.a * ln_x + if self.b == 0.0 { 0.0 } else { self.b * ln_x.ln() }
    }

    /// A point from which the gauge is nondecreasing.
    pub fn x0(&self) -> f64 {
        if self.b >= 0.0 {
            1.0
        } else {
            (-self.b / self.a).max(1.0).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralExponent {
    TwoOverD,
    Alpha(f64),
}

impl IntegralExponent {
    pub fn value(&self, d: usize) -> f64 {
        match *self {
            IntegralExponent::TwoOverD => 2.0 / d as f64,
            IntegralExponent::Alpha(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diverges,
    Converges,
}

/// Exact verdict for `∫_1^∞ x^{d-1} f(x)^{-e} dx`.
pub fn classify_integral(gauge: &GrowthGauge, d: usize, exponent: IntegralExponent) -> Verdict {
    let e = exponent.value(d);
    let lead = e * gauge.a - d as f64;
    if lead < 0.0 || (lead == 0.0 && e * gauge.b <= 1.0) {
        Verdict::Diverges
    } else {
        Verdict::Converges
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericVerdict {
    pub verdict: Verdict,
    pub label: String,
    /// `log` of the integral over the last blocks in `u = log log x`.
    pub log_blocks: Vec<f64>,
}

/// Numerical verdict for `∫ x^{d-1} f(x)^{-e} dx` given `log f` as a function of `log x`.
///
/// With `x = exp(e^u)` the integrand becomes `exp(d e^u + u - e log f)`. Blocks
/// `u ∈ [k, k+1]` are integrated by quadrature in log-space; the integral is
/// declared divergent when the last block is not smaller than the one before.
pub fn classify_numeric<F: Fn(f64) -> f64>(ln_f_of_ln_x: F, d: usize, exponent: f64) -> NumericVerdict {
    let ln_h = |u: f64| {
        let l = u.exp();
        d as f64 * l + u - exponent * ln_f_of_ln_x(l)
    };
    let blocks: Vec<f64> = (8..12)
        .map(|k| {
            let (a, b) = (k as f64, k as f64 + 1.0);
            let m = ln_h(a).max(ln_h(b)).max(ln_h(0.5 * (a + b)));
            let inner = quad::integrate(&|u: f64| (ln_h(u) - m).exp(), a, b, 1e-12);
            m + inner.ln()
        })
        .collect();
    let n = blocks.len();
    let verdict = if blocks[n - 1] - blocks[n - 2] >= -1e-9 { Verdict::Diverges } else { Verdict::Converges };
    NumericVerdict { verdict, label: "numerical verdict".into(), log_blocks: blocks }
}

/// `(x, max_{|y| ≤ x} Y(y))` over the evaluated points; `-∞` before the first point.
pub fn running_max_profile(field: &FieldSample, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let norms: Vec<f64> =
        (0..field.len()).map(|i| field.point(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    profile(&norms, &field.values, radii)
}

/// As [`running_max_profile`] over cube maxima; a cube counts once it lies inside the ball.
pub fn running_max_profile_cubes(table: &CubeSupTable, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let far: Vec<f64> = (0..table.len())
        .map(|i| {
            table
                .corner(i)
                .iter()
                .map(|&k| {
                    let m = (k as f64).abs().max((k as f64 + 1.0).abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    profile(&far, &table.sups, radii)
}

fn profile(norms: &[f64], values: &[f64], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radii must be increasing");
    }
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    let mut out = Vec::with_capacity(radii.len());
    let mut best = f64::NEG_INFINITY;
    let mut j = 0;
    for &r in radii {
        while j < order.len() && norms[order[j]] <= r {
            best = best.max(values[order[j]]);
            j += 1;
        }
        out.push((r, best));
    }
    Ok(out)
}
