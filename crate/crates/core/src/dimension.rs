//! Macroscopic dimensions of peak sets.
//!
//! Shells are `S_n = {x : e^{n-1} < |x|_∞ ≤ e^n}`. A set occupies the unit
//! cube at the integer point `q` when it meets `[q, q+1)^d`; lattice sets
//! occupy the cube at each of their points.

use crate::analysis::ols;
use crate::error::{invalid, Error, Result};
use crate::mathfns::{iter_log, log_plus};
use crate::rng::Stream;
use crate::solver::{lattice_points, CubeSupTable, FieldSample, Layout, Mode};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakKind {
    Lattice,
    Cubes,
}

/// Occupied integer points. Shells beyond `radius` (sup norm) are not fully observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub d: usize,
    pub kind: PeakKind,
    /// `d` coordinates per point.
    pub points: Vec<i64>,
    pub radius: f64,
    pub descriptor: String,
}

impl PeakSet {
    pub fn new(d: usize, kind: PeakKind, points: Vec<i64>, radius: f64, descriptor: impl Into<String>) -> Result<Self> {
        if d == 0 || !points.len().is_multiple_of(d) {
            return invalid("peak set coordinates are not a multiple of d");
        }
        Ok(PeakSet { d, kind, points, radius, descriptor: descriptor.into() })
    }

    /// Unit cubes met by real points; the radius is that of the mapped range.
    pub fn from_real_points(d: usize, coords: &[f64], radius: f64, descriptor: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut points = Vec::new();
        for x in coords.chunks_exact(d) {
            let q: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
            if seen.insert(q.clone()) {
                points.extend(q);
            }
        }
        let r = radius.max(points.iter().map(|v| v.unsigned_abs() as f64).fold(0.0, f64::max));
        PeakSet::new(d, PeakKind::Cubes, points, r, descriptor)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Largest `n` whose shell is fully observed, i.e. `⌊e^n⌋ ≤ radius`.
    pub fn max_shell(&self) -> u32 {
        let r = self.radius.floor();
        if r < 1.0 {
            return 0;
        }
        let mut n = (r + 1.0).ln().floor() as i64;
        while n > 0 && (n as f64).exp().floor() > r {
            n -= 1;
        }
        while ((n + 1) as f64).exp().floor() <= r {
            n += 1;
        }
        n.max(0) as u32
    }

    /// The points of both sets; duplicate points are kept once.
    pub fn union(&self, other: &PeakSet) -> Result<PeakSet> {
        if self.d != other.d {
            return Err(Error::Mismatch("peak sets of different dimension".into()));
        }
        let mut seen = HashSet::new();
        let mut points = Vec::new();
        for s in [self, other] {
            for i in 0..s.len() {
                if seen.insert(s.point(i).to_vec()) {
                    points.extend_from_slice(s.point(i));
                }
            }
        }
        PeakSet::new(self.d, self.kind, points, self.radius.min(other.radius), "union")
    }
}

fn sup_norm(q: &[i64]) -> u64 {
    q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

/// Shell index `n ≥ 1` with `e^{n-1} < m ≤ e^n`, or `None` for `m ≤ 1`.
pub fn shell_of(m: u64) -> Option<u32> {
    if m <= 1 {
        return None;
    }
    let x = m as f64;
    let mut n = x.ln().ceil() as i64;
    while ((n - 1) as f64).exp() >= x {
        n -= 1;
    }
    while (n as f64).exp() < x {
        n += 1;
    }
    Some(n as u32)
}

/// `C_n`: occupied unit cubes in each shell.
pub fn annulus_counts(set: &PeakSet, n_lo: u32, n_hi: u32) -> Result<Vec<(u32, u64)>> {
    if n_lo == 0 || n_lo > n_hi {
        return invalid("shell range needs 1 ≤ n_lo ≤ n_hi");
    }
    let max = set.max_shell();
    if n_hi > max {
        return Err(Error::ShellOutOfRange { requested: n_hi, max });
    }
    let mut counts = vec![0u64; (n_hi - n_lo + 1) as usize];
    for i in 0..set.len() {
        if let Some(n) = shell_of(sup_norm(set.point(i))) {
            if n >= n_lo && n <= n_hi {
                counts[(n - n_lo) as usize] += 1;
            }
        }
    }
    Ok(counts.into_iter().enumerate().map(|(i, c)| (n_lo + i as u32, c)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiSummary {
    /// `a_n = log₊(C_n) / n`.
    pub per_shell: Vec<(u32, f64)>,
    /// Maximum of `a_n` over the last three shells.
    pub max_summary: Option<f64>,
    /// Slope of `log C_n` against `n` over nonempty shells.
    pub ols_slope: Option<f64>,
    /// Every shell is empty: the set is bounded and its dimension negative.
    pub bounded: bool,
}

pub const TRAILING_WINDOW: usize = 3;

pub fn minkowski_dim(counts: &[(u32, u64)]) -> MinkowskiSummary {
    let per_shell: Vec<(u32, f64)> = counts.iter().map(|&(n, c)| (n, log_plus(c as f64) / n as f64)).collect();
    let bounded = counts.iter().all(|c| c.1 == 0);
    if bounded {
        return MinkowskiSummary { per_shell, max_summary: None, ols_slope: None, bounded };
    }
    let start = per_shell.len().saturating_sub(TRAILING_WINDOW);
    let max_summary = per_shell[start..].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let nonempty: Vec<&(u32, u64)> = counts.iter().filter(|c| c.1 > 0).collect();
    let ols_slope = if nonempty.len() >= 3 {
        let x: Vec<f64> = nonempty.iter().map(|c| c.0 as f64).collect();
        let y: Vec<f64> = nonempty.iter().map(|c| (c.1 as f64).ln()).collect();
        Some(ols(&x, &y).slope)
    } else {
        None
    };
    MinkowskiSummary { per_shell, max_summary: Some(max_summary), ols_slope, bounded }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausdorffSummary {
    /// `(ρ, Σ_n C_n e^{-nρ})` over the grid.
    pub table: Vec<(f64, f64)>,
    /// Upper-bound estimate of the dimension.
    pub rho_star: f64,
}

/// Smallest grid `ρ` whose cover sums have a decreasing tail below `tail_threshold`.
///
/// The tail is decreasing when `ρ` exceeds the growth rate of `C_n` (slope of
/// `log C_n` over the later half of the nonempty shells); it is small when the
/// last term `C_{n_max} e^{-n_max ρ}` is below the threshold. Only unit cubes
/// are used as covers, so the estimate can only overstate the dimension.
pub fn hausdorff_dim_upper(counts: &[(u32, u64)], rho_grid: &[f64], tail_threshold: f64) -> Result<HausdorffSummary> {
    if rho_grid.is_empty() || rho_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("ρ grid must be nonempty and increasing");
    }
    let sum = |rho: f64| counts.iter().map(|&(n, c)| c as f64 * (-(n as f64) * rho).exp()).sum::<f64>();
    let table: Vec<(f64, f64)> = rho_grid.iter().map(|&r| (r, sum(r))).collect();
    let nonempty: Vec<&(u32, u64)> = counts.iter().filter(|c| c.1 > 0).collect();
    let later = &nonempty[nonempty.len() / 2..];
    let growth = if later.len() >= 2 {
        let x: Vec<f64> = later.iter().map(|c| c.0 as f64).collect();
        let y: Vec<f64> = later.iter().map(|c| (c.1 as f64).ln()).collect();
        ols(&x, &y).slope
    } else {
        f64::NEG_INFINITY
    };
    let last = counts.last().copied();
    let rho_star = rho_grid
        .iter()
        .copied()
        .find(|&rho| {
            let small = last.is_none_or(|(n, c)| (c as f64) * (-(n as f64) * rho).exp() < tail_threshold);
            rho > growth && small
        })
        .unwrap_or(rho_grid[rho_grid.len() - 1]);
    Ok(HausdorffSummary { table, rho_star })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub counts: Vec<(u32, u64)>,
    pub minkowski: MinkowskiSummary,
    pub hausdorff: HausdorffSummary,
}

impl DimensionReport {
    /// Columns `n, C_n, a_n` and one `nu_rho` column per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,C_n,a_n");
        for (rho, _) in &self.hausdorff.table {
            out.push_str(&format!(",nu_{rho}"));
        }
        out.push('\n');
        for (i, &(n, c)) in self.counts.iter().enumerate() {
            out.push_str(&format!("{n},{c},{}", self.minkowski.per_shell[i].1));
            for (rho, _) in &self.hausdorff.table {
                out.push_str(&format!(",{}", c as f64 * (-(n as f64) * rho).exp()));
            }
            out.push('\n');
        }
        out
    }
}

pub fn dimension_report(set: &PeakSet, n_lo: u32, n_hi: u32, rho_grid: &[f64], tail_threshold: f64) -> Result<DimensionReport> {
    let counts = annulus_counts(set, n_lo, n_hi)?;
    let minkowski = minkowski_dim(&counts);
    let hausdorff = hausdorff_dim_upper(&counts, rho_grid, tail_threshold)?;
    Ok(DimensionReport { counts, minkowski, hausdorff })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Euclidean,
    Sup,
}

impl Norm {
    pub fn of(&self, x: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Sup => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaledFlavor {
    /// Multiplicative continuum: `|x|^{d²/2} ∏_{p<N} (log^{(p)})^{d/2} (log^{(N)})^{γ/d}`.
    MultC,
    /// Additive continuum: `|x|^{d/α} ∏_{p<N} (log^{(p)})^{1/α} (log^{(N)})^{γ/d}`.
    AddC { alpha: f64 },
    /// Additive lattice, same gauge as `AddC`.
    AddD { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FRegime {
    /// Multiplicative continuum, `|x|^{d/α} e^{M (log|x|)^{1/(1+θ_α)}}`.
    Continuum,
    /// Multiplicative lattice, same gauge.
    Lattice,
    /// Multiplicative lattice, `|x|^{d²/(2+d)} e^{M log|x| log log log|x| / log log|x|}`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeakVariant {
    /// `Y ≥ |x|^γ` in either mode.
    Gamma { gamma: f64 },
    Scaled { n: u32, gamma: f64, flavor: ScaledFlavor },
    /// `α` and `θ_α` enter the gauge; `θ` is ignored in the boundary regime.
    F { m: f64, alpha: f64, theta: f64, regime: FRegime },
}

impl PeakVariant {
    /// `log` of the threshold at `|x| = r` in dimension `d`; `-∞` at the origin.
    pub fn log_threshold(&self, r: f64, d: usize) -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let df = d as f64;
        let lr = r.ln();
        match *self {
            PeakVariant::Gamma { gamma } => {
                if gamma == 0.0 {
                    0.0
                } else {
                    gamma * lr
                }
            }
            PeakVariant::Scaled { n, gamma, flavor } => {
                let (lead, inner) = match flavor {
                    ScaledFlavor::MultC => (0.5 * df * df, 0.5 * df),
                    ScaledFlavor::AddC { alpha } | ScaledFlavor::AddD { alpha } => (df / alpha, 1.0 / alpha),
                };
                let middle: f64 = (1..n).map(|p| inner * iter_log(p, r).ln()).sum();
                lead * lr + middle + gamma / df * iter_log(n, r).ln()
            }
            PeakVariant::F { m, alpha, theta, regime } => match regime {
                FRegime::Continuum | FRegime::Lattice => df / alpha * lr + m * log_plus(r).powf(1.0 / (1.0 + theta)),
                FRegime::Boundary => {
                    df * df / (2.0 + df) * lr + m * iter_log(1, r) * iter_log(3, r) / iter_log(2, r)
                }
            },
        }
    }

    fn requirement(&self) -> (Option<Mode>, Option<PeakKind>) {
        match *self {
            PeakVariant::Gamma { .. } => (None, None),
            PeakVariant::Scaled { flavor, .. } => match flavor {
                ScaledFlavor::MultC => (Some(Mode::Multiplicative), Some(PeakKind::Cubes)),
                ScaledFlavor::AddC { .. } => (Some(Mode::Additive), Some(PeakKind::Cubes)),
                ScaledFlavor::AddD { .. } => (Some(Mode::Additive), Some(PeakKind::Lattice)),
            },
            PeakVariant::F { regime, .. } => match regime {
                FRegime::Continuum => (Some(Mode::Multiplicative), Some(PeakKind::Cubes)),
                FRegime::Lattice | FRegime::Boundary => (Some(Mode::Multiplicative), Some(PeakKind::Lattice)),
            },
        }
    }
}

/// Source of field values for peak extraction.
#[derive(Debug, Clone, Copy)]
pub enum PeakSource<'a> {
    /// Values on integer points.
    Lattice(&'a FieldSample),
    /// Grid maxima per unit cube.
    Cubes(&'a CubeSupTable),
}

fn check_variant(variant: &PeakVariant, mode: Mode, kind: PeakKind) -> Result<()> {
    let (m, k) = variant.requirement();
    if m.is_some_and(|m| m != mode) || k.is_some_and(|k| k != kind) {
        return Err(Error::Mismatch(format!("{variant:?} does not apply to a {mode:?} field on {kind:?}")));
    }
    Ok(())
}

/// Points (or cubes) where the field reaches the variant's threshold.
///
/// A cube is compared with the threshold at its point closest to the origin,
/// the smallest threshold over the cube for gauges increasing in `|x|`.
pub fn extract_peak_set(source: PeakSource, variant: PeakVariant, norm: Norm) -> Result<PeakSet> {
    let descriptor = format!("{variant:?}");
    match source {
        PeakSource::Lattice(field) => {
            if field.meta.layout != Layout::Lattice {
                return Err(Error::Mismatch("lattice extraction needs a lattice field".into()));
            }
            check_variant(&variant, field.meta.mode, PeakKind::Lattice)?;
            let d = field.d;
            let mut points = Vec::new();
            let mut radius: f64 = 0.0;
            for i in 0..field.len() {
                let x = field.point(i);
                radius = radius.max(Norm::Sup.of(x));
                let v = field.values[i];
                if v > 0.0 && v.ln() >= variant.log_threshold(norm.of(x), d) {
                    points.extend(x.iter().map(|c| c.round() as i64));
                }
            }
            PeakSet::new(d, PeakKind::Lattice, points, radius, descriptor)
        }
        PeakSource::Cubes(table) => {
            check_variant(&variant, table.mode, PeakKind::Cubes)?;
            let d = table.d;
            let mut points = Vec::new();
            for i in 0..table.len() {
                let q = table.corner(i);
                let nearest: Vec<f64> = q.iter().map(|&k| if k >= 0 { k as f64 } else { (k + 1) as f64 }).collect();
                let v = table.sups[i];
                if v > 0.0 && v.ln() >= variant.log_threshold(norm.of(&nearest), d) {
                    points.extend_from_slice(q);
                }
            }
            PeakSet::new(d, PeakKind::Cubes, points, (table.radius - 1) as f64, descriptor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleMap {
    /// `r ↦ (log^{(N)} r)^{1/d}`.
    IterlogThenRoot { n: u32, d: usize },
    /// `r ↦ exp((log₊ r)^{1/(1+θ)})`.
    FTransformA { theta: f64 },
    /// `r ↦ exp(log^{(1)} r · log^{(3)} r / log^{(2)} r)`.
    FTransformH,
    /// `r ↦ r^q`.
    Power { q: f64 },
}

impl ScaleMap {
    pub fn scalar(&self, r: f64) -> f64 {
        match *self {
            ScaleMap::IterlogThenRoot { n, d } => iter_log(n, r).powf(1.0 / d as f64),
            ScaleMap::FTransformA { theta } => log_plus(r).powf(1.0 / (1.0 + theta)).exp(),
            ScaleMap::FTransformH => (iter_log(1, r) * iter_log(3, r) / iter_log(2, r)).exp(),
            ScaleMap::Power { q } => r.powf(q),
        }
    }
}

/// `x ↦ (x/|x|) φ(|x|)` applied to every point.
pub fn transform_points(points: &[f64], d: usize, map: ScaleMap, norm: Norm) -> Result<Vec<f64>> {
    if d == 0 || !points.len().is_multiple_of(d) {
        return invalid("point coordinates are not a multiple of d");
    }
    let mut out = Vec::with_capacity(points.len());
    for x in points.chunks_exact(d) {
        let r = norm.of(x);
        if r == 0.0 {
            return invalid("scale maps are undefined at the origin");
        }
        let s = map.scalar(r) / r;
        out.extend(x.iter().map(|v| v * s));
    }
    Ok(out)
}

/// Transforms the points of a lattice set and collects the unit cubes they meet.
pub fn transform_peak_set(set: &PeakSet, map: ScaleMap, norm: Norm) -> Result<PeakSet> {
    let reals: Vec<f64> = set.points.iter().map(|&v| v as f64).collect();
    let nonzero: Vec<f64> = reals.chunks_exact(set.d).filter(|x| x.iter().any(|&v| v != 0.0)).flatten().copied().collect();
    let mapped = transform_points(&nonzero, set.d, map, norm)?;
    PeakSet::from_real_points(set.d, &mapped, map.scalar(set.radius), format!("{:?} of {}", map, set.descriptor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThickReport {
    pub theta: f64,
    /// `(n, cubes, empty cubes)` per shell.
    pub per_shell: Vec<(u32, u64, u64)>,
    /// First empty cube `(n, k)` in scan order.
    pub first_failure: Option<(u32, u64)>,
    /// First shell after the last failure.
    pub burn_in: u32,
    /// At least the last three shells are failure-free.
    pub thick: bool,
}

/// Start, cube side and cubes per axis of the thickness grid in shell `n`.
fn thick_grid(n: u32, theta: f64) -> (f64, f64, u64) {
    let nf = n as f64;
    let per_axis = ((nf * (1.0 - theta)).exp() - (nf * (1.0 - theta) - 1.0).exp()).floor().max(0.0) as u64;
    ((nf - 1.0).exp(), (theta * nf).exp(), per_axis)
}

/// Largest shell whose thickness cubes all lie within `radius`; the top cubes
/// reach `e^n + e^{θn}`, a little beyond the shell itself.
pub fn max_thick_shell(radius: f64, theta: f64) -> u32 {
    let mut n = 0;
    loop {
        let (start, side, per_axis) = thick_grid(n + 1, theta);
        if n >= 700 || (per_axis > 0 && start + (per_axis as f64 + 1.0) * side > radius + 1.0) {
            return n;
        }
        n += 1;
    }
}

/// Checks whether every cube `Q(x^n_k, e^{θn})` of the positive-orthant grid
/// `x^n_k ∈ {e^{n-1} + i e^{θn} : 1 ≤ i ≤ e^{n(1-θ)} - e^{n(1-θ)-1}}^d` meets the set.
pub fn theta_thick_check(set: &PeakSet, theta: f64, n_lo: u32, n_hi: u32) -> Result<ThickReport> {
    if !(theta > 0.0 && theta < 1.0) || n_lo == 0 || n_lo > n_hi {
        return invalid("θ must lie in (0,1) and the shell range be nonempty");
    }
    let d = set.d;
    let mut per_shell = Vec::new();
    let mut first_failure = None;
    let mut last_failing = None;
    if n_hi > max_thick_shell(set.radius, theta) {
        return Err(Error::ShellOutOfRange { requested: n_hi, max: max_thick_shell(set.radius, theta) });
    }
    for n in n_lo..=n_hi {
        let (start, side, per_axis) = thick_grid(n, theta);
        let total = per_axis.pow(d as u32);
        let mut hit = vec![false; total as usize];
        for i in 0..set.len() {
            let q = set.point(i);
            let mut flat = 0u64;
            let mut stride = 1u64;
            let mut inside = true;
            for &c in q {
                let pos = (c as f64 - start) / side;
                let cell = pos.floor();
                // Open cubes: points on a grid line belong to none.
                if !(cell >= 1.0 && cell <= per_axis as f64) || pos == cell {
                    inside = false;
                    break;
                }
                flat += (cell as u64 - 1) * stride;
                stride *= per_axis;
            }
            if inside {
                hit[flat as usize] = true;
            }
        }
        let empty = hit.iter().filter(|h| !**h).count() as u64;
        if empty > 0 {
            if first_failure.is_none() {
                first_failure = Some((n, hit.iter().position(|h| !*h).unwrap() as u64));
            }
            last_failing = Some(n);
        }
        per_shell.push((n, total, empty));
    }
    let burn_in = last_failing.map_or(n_lo, |n| n + 1);
    let thick = n_hi + 1 >= burn_in + TRAILING_WINDOW as u32 && burn_in <= n_hi;
    Ok(ThickReport { theta, per_shell, first_failure, burn_in, thick })
}

/// Lattice points with `|x|_∞ ≤ e^{n_max}`, each kept independently with
/// probability `min(1, |x|^{-λ})` (Euclidean norm).
pub fn planted_bernoulli(d: usize, lambda: f64, n_max: u32, rng: &mut Stream) -> Result<PeakSet> {
    let radius = (n_max as f64).exp().floor();
    let mut points = Vec::new();
    for x in lattice_points(d, radius).chunks_exact(d) {
        let r = Norm::Euclidean.of(x);
        let p = if r <= 1.0 { 1.0 } else { r.powf(-lambda) };
        if rng.random::<f64>() < p {
            points.extend(x.iter().map(|&v| v as i64));
        }
    }
    PeakSet::new(d, PeakKind::Lattice, points, radius, format!("planted Bernoulli(|x|^-{lambda})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::Moment;
    use crate::rng::stream;
    use crate::solver::{BiasDescriptor, FieldMeta, TruncationDescriptor};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn from_1d(points: Vec<i64>, radius: f64) -> PeakSet {
        PeakSet::new(1, PeakKind::Lattice, points, radius, "test").unwrap()
    }

    fn positive_integers(radius: f64) -> PeakSet {
        from_1d((1..=radius as i64).collect(), radius)
    }

    fn full_line(radius: f64) -> PeakSet {
        let r = radius as i64;
        from_1d((-r..=r).collect(), radius)
    }

    fn powers_of_two(radius: f64) -> PeakSet {
        let mut pts = Vec::new();
        let mut v = 1i64;
        while (v as f64) <= radius {
            pts.extend([v, -v]);
            v *= 2;
        }
        from_1d(pts, radius)
    }

    #[test]
    fn shell_membership() {
        assert_eq!(shell_of(1), None);
        assert_eq!(shell_of(2), Some(1));
        assert_eq!(shell_of(3), Some(2));
        assert_eq!(shell_of(7), Some(2));
        assert_eq!(shell_of(8), Some(3));
        assert_eq!(shell_of(20), Some(3));
        assert_eq!(shell_of(21), Some(4));
    }

    #[test]
    fn count_examples() {
        let c = annulus_counts(&positive_integers(3000.0), 1, 8).unwrap();
        assert_eq!(c[2], (3, 13));
        let empty = from_1d(vec![], 1e6);
        assert!(annulus_counts(&empty, 1, 13).unwrap().iter().all(|c| c.1 == 0));
        let p2 = annulus_counts(&powers_of_two(1e9), 1, 20).unwrap();
        assert!(p2.iter().all(|c| c.1 == 2 || c.1 == 4), "{p2:?}");
        assert!(matches!(annulus_counts(&empty, 1, 14), Err(Error::ShellOutOfRange { requested: 14, max: 13 })));
    }

    #[test]
    fn minkowski_examples() {
        let full = minkowski_dim(&annulus_counts(&full_line(14f64.exp()), 1, 14).unwrap());
        assert!((full.max_summary.unwrap() - 1.0).abs() <= 0.05);
        assert!((full.ols_slope.unwrap() - 1.0).abs() <= 0.05);
        let sparse = minkowski_dim(&annulus_counts(&powers_of_two(1e9), 1, 20).unwrap());
        assert!(sparse.max_summary.unwrap().abs() <= 0.1);
        assert!(sparse.ols_slope.unwrap().abs() <= 0.1);
        let none = minkowski_dim(&annulus_counts(&from_1d(vec![], 1e3), 1, 6).unwrap());
        assert!(none.bounded && none.max_summary.is_none());
    }

    #[test]
    fn planted_sets() {
        let rho: Vec<f64> = (0..=150).map(|i| i as f64 * 0.01).collect();
        for (lam, seed) in [(0.3, 1u64), (0.6, 2)] {
            let set = planted_bernoulli(1, lam, 14, &mut stream(60, seed)).unwrap();
            let rep = dimension_report(&set, 1, 14, &rho, 1.0).unwrap();
            let m = rep.minkowski.max_summary.unwrap();
            assert!((m - (1.0 - lam)).abs() <= 0.15, "λ={lam} m={m}");
            assert!((rep.hausdorff.rho_star - (1.0 - lam)).abs() <= 0.15);
            assert!(rep.hausdorff.rho_star <= m + 0.01 + 1e-12);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let rho: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let full = hausdorff_dim_upper(&annulus_counts(&full_line(12f64.exp()), 1, 12).unwrap(), &rho, 1.0).unwrap();
        assert!((full.rho_star - 1.0).abs() <= 0.05 + 1e-12);
        let none = hausdorff_dim_upper(&annulus_counts(&from_1d(vec![], 1e3), 1, 6).unwrap(), &rho, 1.0).unwrap();
        assert_eq!(none.rho_star, 0.0);
        assert!(hausdorff_dim_upper(&[], &[1.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn bounded_sets_do_not_matter() {
        let set = planted_bernoulli(1, 0.3, 12, &mut stream(61, 0)).unwrap();
        let extra = from_1d((-7..=7).collect(), set.radius);
        let both = set.union(&extra).unwrap();
        let a = minkowski_dim(&annulus_counts(&set, 3, 12).unwrap());
        let b = minkowski_dim(&annulus_counts(&both, 3, 12).unwrap());
        assert_eq!(a, b);
    }

    fn lattice_field(values: Vec<f64>, radius: f64, mode: Mode) -> FieldSample {
        FieldSample {
            d: 1,
            points: lattice_points(1, radius),
            values,
            meta: FieldMeta {
                seed: 0,
                atom_count: 0,
                mode,
                layout: Layout::Lattice,
                truncation: TruncationDescriptor { chain_cap: None, picard_levels: None, picard_cone: None, small_jump_cutoff: 1.0 },
                bias: BiasDescriptor { neglected_small_first_moment: Moment::Finite(0.0), retained_small_first_moment: 0.0 },
            },
        }
    }

    #[test]
    fn extraction_examples() {
        let ones = lattice_field(vec![1.0; 41], 20.0, Mode::Multiplicative);
        let all = extract_peak_set(PeakSource::Lattice(&ones), PeakVariant::Gamma { gamma: 0.0 }, Norm::Euclidean).unwrap();
        assert_eq!(all.len(), 41);
        let small = extract_peak_set(PeakSource::Lattice(&ones), PeakVariant::Gamma { gamma: 1.0 }, Norm::Euclidean).unwrap();
        assert_eq!(small.points, vec![-1, 0, 1]);

        let pts = lattice_points(1, 20.0);
        let planted = lattice_field(pts.iter().map(|x| x.abs().powf(0.6)).collect(), 20.0, Mode::Additive);
        let lo = extract_peak_set(PeakSource::Lattice(&planted), PeakVariant::Gamma { gamma: 0.5 }, Norm::Euclidean).unwrap();
        assert_eq!(lo.len(), 40);
        assert!((0..lo.len()).all(|i| lo.point(i)[0].abs() >= 1));
        let hi = extract_peak_set(PeakSource::Lattice(&planted), PeakVariant::Gamma { gamma: 0.7 }, Norm::Euclidean).unwrap();
        assert_eq!(hi.points, vec![-1, 1]);

        let wrong = PeakVariant::Scaled { n: 1, gamma: 0.5, flavor: ScaledFlavor::AddD { alpha: 1.0 } };
        assert!(matches!(extract_peak_set(PeakSource::Lattice(&ones), wrong, Norm::Euclidean), Err(Error::Mismatch(_))));
        let cont = PeakVariant::F { m: 1.0, alpha: 0.5, theta: 1.25, regime: FRegime::Continuum };
        assert!(extract_peak_set(PeakSource::Lattice(&ones), cont, Norm::Euclidean).is_err());
    }

    #[test]
    fn thresholds_use_log_plus() {
        let v = PeakVariant::Scaled { n: 2, gamma: 1.0, flavor: ScaledFlavor::AddD { alpha: 1.0 } };
        // At |x| = 2: log^{(1)} and log^{(2)} saturate at 1, so only |x|^{d/α} is left.
        assert_relative_eq!(v.log_threshold(2.0, 1), 2f64.ln(), max_relative = 1e-14);
        let b = PeakVariant::F { m: 1.0, alpha: 3.0, theta: 0.0, regime: FRegime::Boundary };
        assert_relative_eq!(b.log_threshold(2.0, 1), 2f64.ln() / 3.0 + 1.0, max_relative = 1e-14);
    }

    #[test]
    fn scale_map_examples() {
        let t = transform_points(&[4f64.exp(), -(4f64.exp())], 1, ScaleMap::IterlogThenRoot { n: 1, d: 1 }, Norm::Euclidean).unwrap();
        assert_relative_eq!(t[0], 4.0, max_relative = 1e-14);
        assert_relative_eq!(t[1], -4.0, max_relative = 1e-14);
        let p = [3.0, -4.0, 0.5, 2.0];
        assert_eq!(transform_points(&p, 2, ScaleMap::Power { q: 1.0 }, Norm::Euclidean).unwrap(), p.to_vec());
        let r = 3f64.exp().exp();
        assert_relative_eq!(ScaleMap::IterlogThenRoot { n: 2, d: 1 }.scalar(r), 3.0, max_relative = 1e-13);
        assert!(transform_points(&[0.0, 0.0], 2, ScaleMap::FTransformH, Norm::Euclidean).is_err());
        let threshold = 2f64.exp().exp();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..200 {
            let v = ScaleMap::IterlogThenRoot { n: 2, d: 2 }.scalar(threshold * (1.0 + 0.1 * k as f64));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn thickness_examples() {
        let full = full_line(14f64.exp());
        let r = theta_thick_check(&full, 0.5, 4, 12).unwrap();
        assert!(r.thick && r.first_failure.is_none());
        let empty = from_1d(vec![], 14f64.exp());
        let r = theta_thick_check(&empty, 0.5, 4, 12).unwrap();
        assert!(!r.thick);
        assert!(r.per_shell.iter().all(|&(_, total, bad)| total == bad));
        let set = planted_bernoulli(1, 0.3, 15, &mut stream(62, 0)).unwrap();
        assert!(theta_thick_check(&set, 0.6, 4, 14).unwrap().thick);
        assert!(!theta_thick_check(&set, 0.1, 4, 14).unwrap().thick);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn counts_add_over_disjoint_unions(raw in proptest::collection::hash_set(-3000i64..3000, 0..400), split in 0usize..400) {
            let pts: Vec<i64> = raw.into_iter().collect();
            let cut = split.min(pts.len());
            let a = from_1d(pts[..cut].to_vec(), 3000.0);
            let b = from_1d(pts[cut..].to_vec(), 3000.0);
            let u = a.union(&b).unwrap();
            let (ca, cb, cu) = (annulus_counts(&a, 1, 8).unwrap(), annulus_counts(&b, 1, 8).unwrap(), annulus_counts(&u, 1, 8).unwrap());
            for i in 0..ca.len() {
                prop_assert_eq!(ca[i].1 + cb[i].1, cu[i].1);
            }
            let ma = minkowski_dim(&ca);
            let mu = minkowski_dim(&cu);
            if let (Some(x), Some(y)) = (ma.max_summary, mu.max_summary) {
                prop_assert!(y >= x);
            }
        }
    }
}
