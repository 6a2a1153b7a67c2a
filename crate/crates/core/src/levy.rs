//! Spectrally positive Lévy measures on `(0, ∞)`.
//!
//! Every kind reduces to power-law pieces or atoms, so tails, truncated
//! moments and the generalized tail inverse are all closed-form. Piecewise
//! densities are log-linear between knots and extend the first and last slopes
//! to `0` and `∞`; moments touching those ends are flagged as extrapolated.

use crate::error::{invalid, Error, Result};
use crate::rng::Stream;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn value(self) -> f64 {
        match self {
            Moment::Finite(v) => v,
            Moment::Infinite => f64::INFINITY,
        }
    }

    fn add(self, other: Moment) -> Moment {
        match (self, other) {
            (Moment::Finite(a), Moment::Finite(b)) => Moment::Finite(a + b),
            _ => Moment::Infinite,
        }
    }
}

impl std::fmt::Display for Moment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Infinite => write!(f, "infinite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasure {
    /// Tail `z^{-α}` on `(1, ∞)`, no mass on `(0, 1]`.
    ParetoTail { alpha: f64 },
    /// Atoms `(size, weight)`.
    DiracMixture { atoms: Vec<(f64, f64)> },
    /// Knots `(size, density)`, log-linear in between.
    PiecewiseDensity { knots: Vec<(f64, f64)> },
    /// The base measure restricted to `(lo, hi]`.
    Restricted { base: Box<LevyMeasure>, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `∫_(0,∞) z^p`.
    MuP,
    /// `∫_(0,1) z^p`.
    SmallP,
    /// `∫_[1,∞) z^p`.
    LargeP,
    /// `∫_(0,1) z^p |log z|`.
    SmallLogP,
    /// `∫_(0,1) z^p |log z|^{1{p=1}}`.
    SmallParenLogP,
}

/// An interval of jump sizes with inclusive upper end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRange {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
}

impl JumpRange {
    /// `(lo, hi]`.
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        JumpRange { lo, lo_closed: false, hi }
    }

    /// `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Self {
        JumpRange { lo, lo_closed: true, hi }
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    lo: f64,
    lo_closed: bool,
    hi: f64,
    hi_closed: bool,
}

impl Span {
    fn contains(&self, z: f64) -> bool {
        let above = if self.lo_closed { z >= self.lo } else { z > self.lo };
        let below = if self.hi_closed { z <= self.hi } else { z < self.hi };
        above && below
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    c: f64,
    s: f64,
    extrapolated: bool,
}

fn segments(knots: &[(f64, f64)]) -> Vec<Segment> {
    let n = knots.len();
    let slope = |i: usize| (knots[i + 1].1 / knots[i].1).ln() / (knots[i + 1].0 / knots[i].0).ln();
    let coef = |i: usize, s: f64| knots[i].1 * knots[i].0.powf(-s);
    let mut out = Vec::with_capacity(n + 1);
    let s0 = slope(0);
    out.push(Segment { a: 0.0, b: knots[0].0, c: coef(0, s0), s: s0, extrapolated: true });
    for i in 0..n - 1 {
        let s = slope(i);
        out.push(Segment { a: knots[i].0, b: knots[i + 1].0, c: coef(i, s), s, extrapolated: false });
    }
    let sl = slope(n - 2);
    out.push(Segment { a: knots[n - 1].0, b: f64::INFINITY, c: coef(n - 1, sl), s: sl, extrapolated: true });
    out
}

/// `∫_a^b c z^q |log z|^{w}` with `w ∈ {0,1}` for `0 ≤ a < b ≤ ∞`.
fn power_log_segment(c: f64, q: f64, a: f64, b: f64, log_weight: bool) -> Moment {
    if !(b > a) {
        return Moment::Finite(0.0);
    }
    if (a == 0.0 && q <= -1.0) || (b.is_infinite() && q >= -1.0) {
        return Moment::Infinite;
    }
    if log_weight && a < 1.0 && b > 1.0 {
        return power_log_segment(c, q, a, 1.0, true).add(power_log_segment(c, q, 1.0, b, true));
    }
    let near_log = (q + 1.0).abs() < 1e-12;
    let prim = |z: f64| -> f64 {
        if z == 0.0 || z.is_infinite() {
            return 0.0;
        }
        let lz = z.ln();
        match (log_weight, near_log) {
            (false, false) => z.powf(q + 1.0) / (q + 1.0),
            (false, true) => lz,
            (true, false) => z.powf(q + 1.0) * (lz / (q + 1.0) - 1.0 / ((q + 1.0) * (q + 1.0))),
            (true, true) => 0.5 * lz * lz,
        }
    };
    // Near the logarithmic exponent the primitive at 0 or ∞ is unbounded.
    if near_log && (a == 0.0 || b.is_infinite()) {
        return Moment::Infinite;
    }
    let mut v = prim(b) - prim(a);
    if log_weight && b <= 1.0 {
        v = -v;
    }
    Moment::Finite(c * v.max(0.0))
}

impl LevyMeasure {
    pub fn pareto(alpha: f64) -> Self {
        LevyMeasure::ParetoTail { alpha }
    }

    pub fn dirac(atoms: Vec<(f64, f64)>) -> Self {
        LevyMeasure::DiracMixture { atoms }
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Self {
        LevyMeasure::PiecewiseDensity { knots }
    }

    pub fn restricted(base: LevyMeasure, lo: f64, hi: f64) -> Self {
        LevyMeasure::Restricted { base: Box::new(base), lo, hi }
    }

    /// Checks parameters and that `∫ (1 ∧ z²) λ(dz)` is finite.
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::ParetoTail { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return invalid(format!("pareto alpha must be positive, got {alpha}"));
                }
            }
            LevyMeasure::DiracMixture { atoms } => {
                if atoms.is_empty() {
                    return invalid("dirac mixture needs at least one atom");
                }
                for &(z, w) in atoms {
                    if !(z.is_finite() && z > 0.0 && w.is_finite() && w > 0.0) {
                        return invalid(format!("atom ({z}, {w}) needs positive finite size and weight"));
                    }
                }
            }
            LevyMeasure::PiecewiseDensity { knots } => {
                if knots.len() < 2 {
                    return invalid("piecewise density needs at least two knots");
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return invalid("knot sizes must be strictly increasing");
                    }
                }
                for &(z, f) in knots {
                    if !(z.is_finite() && z > 0.0 && f.is_finite() && f > 0.0) {
                        return invalid(format!("knot ({z}, {f}) needs positive finite size and density"));
                    }
                }
            }
            LevyMeasure::Restricted { base, lo, hi } => {
                base.validate()?;
                if !(*lo >= 0.0 && hi > lo) {
                    return invalid(format!("restriction interval ({lo}, {hi}] is empty or negative"));
                }
            }
        }
        let small = self.truncated_moment(MomentKind::SmallP, 2.0)?;
        let large = self.truncated_moment(MomentKind::LargeP, 0.0)?;
        if !small.add(large).is_finite() {
            return invalid("the integral of min(1, z^2) against the measure diverges");
        }
        Ok(())
    }

    fn power_integral(&self, p: f64, span: Span, log_weight: bool) -> (Moment, bool) {
        match self {
            LevyMeasure::ParetoTail { alpha } => {
                let a = span.lo.max(1.0);
                (power_log_segment(*alpha, p - alpha - 1.0, a, span.hi, log_weight), false)
            }
            LevyMeasure::DiracMixture { atoms } => {
                let v = atoms
                    .iter()
                    .filter(|(z, _)| span.contains(*z))
                    .map(|&(z, w)| w * z.powf(p) * if log_weight { z.ln().abs() } else { 1.0 })
                    .sum();
                (Moment::Finite(v), false)
            }
            LevyMeasure::PiecewiseDensity { knots } => {
                let mut total = Moment::Finite(0.0);
                let mut extrapolated = false;
                for seg in segments(knots) {
                    let a = seg.a.max(span.lo);
                    let b = seg.b.min(span.hi);
                    if b > a {
                        let part = power_log_segment(seg.c, p + seg.s, a, b, log_weight);
                        extrapolated |= seg.extrapolated;
                        total = total.add(part);
                    }
                }
                (total, extrapolated)
            }
            LevyMeasure::Restricted { base, lo, hi } => {
                let (new_lo, lo_closed) = if span.lo > *lo {
                    (span.lo, span.lo_closed)
                } else {
                    (*lo, false)
                };
                let (new_hi, hi_closed) = if span.hi < *hi {
                    (span.hi, span.hi_closed)
                } else if span.hi > *hi {
                    (*hi, true)
                } else {
                    (*hi, span.hi_closed)
                };
                if new_hi < new_lo || (new_hi == new_lo && !(lo_closed && hi_closed)) {
                    return (Moment::Finite(0.0), false);
                }
                base.power_integral(p, Span { lo: new_lo, lo_closed, hi: new_hi, hi_closed }, log_weight)
            }
        }
    }

    /// `λ((z, ∞))`.
    pub fn tail(&self, z: f64) -> f64 {
        match self {
            LevyMeasure::ParetoTail { alpha } => {
                if z <= 1.0 {
                    1.0
                } else {
                    z.powf(-alpha)
                }
            }
            _ => self.mass_on(JumpRange::open_closed(z, f64::INFINITY)).value(),
        }
    }

    /// Mass of the atom at exactly `z`.
    pub fn atom_mass(&self, z: f64) -> f64 {
        match self {
            LevyMeasure::DiracMixture { atoms } => atoms.iter().filter(|a| a.0 == z).map(|a| a.1).sum(),
            LevyMeasure::Restricted { base, lo, hi } if z > *lo && z <= *hi => base.atom_mass(z),
            _ => 0.0,
        }
    }

    /// Atom locations in decreasing order with their masses.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = match self {
            LevyMeasure::DiracMixture { atoms } => {
                let mut merged: Vec<(f64, f64)> = Vec::new();
                let mut sorted = atoms.clone();
                sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
                for (z, w) in sorted {
                    match merged.last_mut() {
                        Some(last) if last.0 == z => last.1 += w,
                        _ => merged.push((z, w)),
                    }
                }
                merged
            }
            LevyMeasure::Restricted { base, lo, hi } => {
                base.atoms().into_iter().filter(|&(z, _)| z > *lo && z <= *hi).collect()
            }
            _ => Vec::new(),
        };
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    /// Smallest and largest points of the closed support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            LevyMeasure::ParetoTail { .. } => (1.0, f64::INFINITY),
            LevyMeasure::DiracMixture { atoms } => atoms
                .iter()
                .fold((f64::INFINITY, 0.0), |(a, b), &(z, _)| (a.min(z), b.max(z))),
            LevyMeasure::PiecewiseDensity { .. } => (0.0, f64::INFINITY),
            LevyMeasure::Restricted { base, lo, hi } => {
                let (a, b) = base.support();
                (a.max(*lo), b.min(*hi))
            }
        }
    }

    pub fn mass_on(&self, range: JumpRange) -> Moment {
        let span = Span { lo: range.lo, lo_closed: range.lo_closed, hi: range.hi, hi_closed: true };
        self.power_integral(0.0, span, false).0
    }

    pub fn total_mass(&self) -> Moment {
        self.mass_on(JumpRange::open_closed(0.0, f64::INFINITY))
    }

    pub fn truncated_moment(&self, kind: MomentKind, p: f64) -> Result<Moment> {
        Ok(self.truncated_moment_flagged(kind, p)?.0)
    }

    /// The moment together with a flag telling whether extrapolated density was used.
    pub fn truncated_moment_flagged(&self, kind: MomentKind, p: f64) -> Result<(Moment, bool)> {
        if !(p >= 0.0) {
            return invalid(format!("moment order must be nonnegative, got {p}"));
        }
        let small = Span { lo: 0.0, lo_closed: false, hi: 1.0, hi_closed: false };
        let out = match kind {
            MomentKind::MuP => self.power_integral(
                p,
                Span { lo: 0.0, lo_closed: false, hi: f64::INFINITY, hi_closed: true },
                false,
            ),
            MomentKind::SmallP => self.power_integral(p, small, false),
            MomentKind::LargeP => self.power_integral(
                p,
                Span { lo: 1.0, lo_closed: true, hi: f64::INFINITY, hi_closed: true },
                false,
            ),
            MomentKind::SmallLogP => self.power_integral(p, small, true),
            MomentKind::SmallParenLogP => self.power_integral(p, small, p == 1.0),
        };
        Ok(out)
    }

    /// `inf{z > 0 : λ((z,∞)) ≤ level}`.
    pub fn tail_inverse(&self, level: f64) -> f64 {
        match self {
            LevyMeasure::ParetoTail { alpha } => {
                if level >= 1.0 {
                    0.0
                } else if level <= 0.0 {
                    f64::INFINITY
                } else {
                    level.powf(-1.0 / alpha)
                }
            }
            LevyMeasure::DiracMixture { .. } => {
                let mut cum = 0.0;
                for (z, w) in self.atoms() {
                    if cum + w > level {
                        return z;
                    }
                    cum += w;
                }
                0.0
            }
            LevyMeasure::PiecewiseDensity { knots } => {
                let segs = segments(knots);
                let mut above = 0.0;
                for seg in segs.iter().rev() {
                    let m = power_log_segment(seg.c, seg.s, seg.a, seg.b, false).value();
                    if above + m > level {
                        return invert_segment(seg, level - above);
                    }
                    above += m;
                }
                0.0
            }
            LevyMeasure::Restricted { base, lo, hi } => {
                let top = base.tail(*hi);
                if level >= base.tail(*lo) - top {
                    0.0
                } else {
                    base.tail_inverse(level + top).clamp(*lo, *hi)
                }
            }
        }
    }

    /// Draws one size from the measure restricted to `range` and normalized.
    pub fn sample_size(&self, range: JumpRange, mass: f64, rng: &mut Stream) -> f64 {
        let v: f64 = rng.sample(Open01);
        let z = self.tail_inverse(self.tail(range.hi) + v * mass);
        if z < range.lo || (z == range.lo && !range.lo_closed) {
            // Rounding can land on the open endpoint; the next representable size is exact enough.
            return next_up(range.lo);
        }
        z.min(range.hi)
    }

    /// Poisson number of jumps with mean `T·V·λ(range)` and i.i.d. sizes.
    pub fn sample_jumps(&self, range: JumpRange, time: f64, volume: f64, rng: &mut Stream) -> Result<Vec<f64>> {
        let mass = self.finite_mass(range)?;
        let count = poisson_count(time * volume * mass, rng);
        Ok((0..count).map(|_| self.sample_size(range, mass, rng)).collect())
    }

    pub(crate) fn finite_mass(&self, range: JumpRange) -> Result<f64> {
        match self.mass_on(range) {
            Moment::Finite(m) => Ok(m),
            Moment::Infinite => Err(Error::InfiniteMass { lo: range.lo, hi: range.hi, min_lo: 0.0 }),
        }
    }

    /// Regular-variation index of the tail and whether it is exact.
    fn tail_index(&self) -> Option<(f64, bool, bool)> {
        match self {
            LevyMeasure::ParetoTail { alpha } => Some((*alpha, true, false)),
            LevyMeasure::DiracMixture { .. } => None,
            LevyMeasure::PiecewiseDensity { knots } => {
                let top = knots[knots.len() - 1].0;
                let pts: Vec<(f64, f64)> = (0..=20)
                    .map(|j| {
                        let z = top * 10f64.powf(-1.0 + j as f64 / 20.0);
                        (z.ln(), self.tail(z).ln())
                    })
                    .collect();
                let (slope, _) = ols(&pts);
                Some((-slope, false, true))
            }
            LevyMeasure::Restricted { base, hi, .. } => {
                if hi.is_finite() {
                    None
                } else {
                    base.tail_index()
                }
            }
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

fn invert_segment(seg: &Segment, level_in: f64) -> f64 {
    // Solve ∫_z^b c u^s du = level_in for z in (a, b).
    let q = seg.s + 1.0;
    let z = if q.abs() < 1e-12 {
        seg.b * (-level_in / seg.c).exp()
    } else {
        let top = if seg.b.is_infinite() { 0.0 } else { seg.b.powf(q) };
        (top - level_in * q / seg.c).powf(1.0 / q)
    };
    z.clamp(seg.a, seg.b)
}

pub(crate) fn poisson_count(mean: f64, rng: &mut Stream) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive mean");
    dist.sample(rng) as usize
}

fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Condition {
    /// Heavy tail of index α with finite small-jump log moment.
    Heavy { alpha: f64 },
    /// Light tail: `0 < m^log_{1+2/d} + M_α < ∞`.
    Light { alpha: f64 },
    /// Small-jump regularity needed for suprema.
    Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: Moment,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub holds: bool,
    pub diagnostics: Vec<Diagnostic>,
}

const RV_TOLERANCE: f64 = 0.05;

fn diag(measure: &LevyMeasure, kind: MomentKind, p: f64, label: &str) -> Result<Diagnostic> {
    let (value, extrapolated) = measure.truncated_moment_flagged(kind, p)?;
    Ok(Diagnostic {
        name: format!("{label}(p={p})"),
        value,
        note: extrapolated.then(|| "extrapolated".to_string()),
    })
}

pub fn check_condition(measure: &LevyMeasure, d: usize, condition: Condition) -> Result<ConditionVerdict> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    let crit = 1.0 + 2.0 / d as f64;
    let mut diagnostics = Vec::new();
    let holds = match condition {
        Condition::Heavy { alpha } => {
            if !(alpha > 0.0) {
                return invalid("alpha must be positive");
            }
            let small = diag(measure, MomentKind::SmallLogP, crit, "m_log")?;
            let small_ok = small.value.is_finite();
            diagnostics.push(small);
            let rv_ok = match measure.tail_index() {
                Some((index, exact, extrapolated)) => {
                    let tol = if exact { 1e-12 } else { RV_TOLERANCE };
                    diagnostics.push(Diagnostic {
                        name: "tail_index".into(),
                        value: Moment::Finite(index),
                        note: Some(
                            match (exact, extrapolated) {
                                (true, _) => "exact",
                                (false, true) => "log-log slope over top decade, extrapolated",
                                (false, false) => "log-log slope over top decade",
                            }
                            .into(),
                        ),
                    });
                    (index - alpha).abs() <= tol
                }
                None => {
                    diagnostics.push(Diagnostic {
                        name: "tail_index".into(),
                        value: Moment::Finite(0.0),
                        note: Some("tail vanishes beyond a finite size".into()),
                    });
                    false
                }
            };
            small_ok && rv_ok
        }
        Condition::Light { alpha } => {
            let small = diag(measure, MomentKind::SmallLogP, crit, "m_log")?;
            let large = diag(measure, MomentKind::LargeP, alpha, "M")?;
            let sum = small.value.add(large.value);
            diagnostics.push(small);
            diagnostics.push(large);
            matches!(sum, Moment::Finite(v) if v > 0.0)
        }
        Condition::Sup => {
            if d == 1 {
                let mut found = None;
                for k in 0..40 {
                    let q = 2.0 - 2f64.powi(-k);
                    if q <= 0.0 {
                        continue;
                    }
                    let dq = diag(measure, MomentKind::SmallP, q, "m")?;
                    if dq.value.is_finite() {
                        found = Some(dq);
                        break;
                    }
                    if k == 39 {
                        diagnostics.push(dq);
                    }
                }
                match found {
                    Some(dq) => {
                        diagnostics.push(dq);
                        true
                    }
                    None => false,
                }
            } else {
                let dq = diag(measure, MomentKind::SmallParenLogP, 2.0 / d as f64, "m_paren_log")?;
                let ok = dq.value.is_finite();
                diagnostics.push(dq);
                ok
            }
        }
    };
    Ok(ConditionVerdict { condition, holds, diagnostics })
}

/// One bounded-mass piece: `top·δ_hi + λ|(lo,hi) + bottom·δ_lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub top_atom: f64,
    pub bottom_atom: f64,
}

/// What is left below the last piece: `top·δ_hi + λ|(0,hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub hi: f64,
    pub top_atom: f64,
    pub mass: Moment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub base: LevyMeasure,
    pub pieces: Vec<Piece>,
    pub remainder: Remainder,
}

/// `λ((a, hi))` with both ends open.
fn open_mass(m: &LevyMeasure, a: f64, hi: f64) -> f64 {
    if !(hi > a) {
        return 0.0;
    }
    let upper = if hi.is_finite() { m.tail(hi) + m.atom_mass(hi) } else { 0.0 };
    (m.tail(a) - upper).max(0.0)
}

impl Decomposition {
    pub fn piece_tail(&self, i: usize, z: f64) -> f64 {
        let p = &self.pieces[i];
        let mut v = 0.0;
        if z < p.hi {
            v += p.top_atom + open_mass(&self.base, z.max(p.lo), p.hi);
        }
        if z < p.lo {
            v += p.bottom_atom;
        }
        v
    }

    pub fn piece_mass(&self, i: usize) -> f64 {
        let p = &self.pieces[i];
        p.top_atom + p.bottom_atom + open_mass(&self.base, p.lo, p.hi)
    }

    pub fn remainder_tail(&self, z: f64) -> f64 {
        let r = &self.remainder;
        if z < r.hi {
            r.top_atom + open_mass(&self.base, z, r.hi)
        } else {
            0.0
        }
    }
}

/// Splits the measure top-down into `k` pieces of mass at most 2.
///
/// Continuous mass is cut at unit levels of the tail; an atom is kept whole
/// while its piece stays within mass 2 and is otherwise split into chunks.
pub fn decompose(measure: &LevyMeasure, k: usize) -> Result<Decomposition> {
    if k == 0 {
        return invalid("decompose needs at least one piece");
    }
    let atoms = measure.atoms();
    let support_lo = measure.support().0;
    let mut pieces = Vec::new();
    let mut cursor = f64::INFINITY;
    let mut leftover: f64 = 0.0;
    let mut exhausted = false;

    while pieces.len() < k && !exhausted {
        let hi = cursor;
        let mut c = 0.0;
        let mut top = 0.0;
        if leftover > 0.0 {
            top = leftover.min(2.0);
            leftover -= top;
            c = top;
            if leftover > 0.0 || c >= 1.0 {
                pieces.push(Piece { lo: hi, hi, top_atom: top, bottom_atom: 0.0 });
                continue;
            }
        }
        loop {
            let next = atoms.iter().find(|a| a.0 < cursor).copied();
            let za = next.map_or(0.0, |a| a.0);
            let upper = if cursor.is_finite() { measure.tail(cursor) + measure.atom_mass(cursor) } else { 0.0 };
            let lower_tail = if za > 0.0 { measure.tail(za) } else { measure.total_mass().value() };
            let cont = (lower_tail - upper).max(0.0);
            let need = 1.0 - c;
            if cont >= need {
                let mut lo = measure.tail_inverse(upper + need).max(za);
                if lo < support_lo {
                    lo = support_lo;
                }
                pieces.push(Piece { lo, hi, top_atom: top, bottom_atom: 0.0 });
                cursor = lo;
                break;
            }
            c += cont;
            cursor = za;
            match next {
                None => {
                    if c > 0.0 {
                        pieces.push(Piece { lo: 0.0, hi, top_atom: top, bottom_atom: 0.0 });
                    }
                    exhausted = true;
                    break;
                }
                Some((_, w)) => {
                    if c + w <= 2.0 {
                        c += w;
                        if c >= 1.0 {
                            pieces.push(Piece { lo: za, hi, top_atom: top, bottom_atom: w });
                            break;
                        }
                    } else {
                        let take = 2.0 - c;
                        leftover = w - take;
                        pieces.push(Piece { lo: za, hi, top_atom: top, bottom_atom: take });
                        break;
                    }
                }
            }
        }
    }

    let remainder = if exhausted {
        Remainder { hi: 0.0, top_atom: 0.0, mass: Moment::Finite(0.0) }
    } else {
        let below = if cursor > 0.0 {
            match measure.total_mass() {
                Moment::Finite(tot) => {
                    let upper = if cursor.is_finite() { measure.tail(cursor) + measure.atom_mass(cursor) } else { 0.0 };
                    Moment::Finite((tot - upper).max(0.0))
                }
                Moment::Infinite => Moment::Infinite,
            }
        } else {
            Moment::Finite(0.0)
        };
        Remainder { hi: cursor, top_atom: leftover, mass: below.add(Moment::Finite(leftover)) }
    };
    Ok(Decomposition { base: measure.clone(), pieces, remainder })
}
