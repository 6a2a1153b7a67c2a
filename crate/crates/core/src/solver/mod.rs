//! Field evaluation at a fixed time over simulated Poisson atoms.
//!
//! Atoms live on `(0,t] × padded window × [ε, ∞)`. The additive field is a
//! kernel-weighted sum; the multiplicative field is the full chaos series,
//! evaluated by a dynamic program over time-ordered atoms (see [`chaos`]).

mod additive;
pub mod chaos;
mod sup;

pub use additive::evaluate_additive;
pub use chaos::{evaluate_multiplicative_dp, picard_small, picard_small_on, PicardRequest, PicardValue};
pub use sup::{cube_sup_table, field_sup, field_sup_on, schedule_truncation, truncation_decay, CubeSupTable};

use crate::error::{invalid, Error, Result};
use crate::kernel;
use crate::levy::{JumpRange, LevyMeasure, Moment, MomentKind};
use crate::rng::Stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Additive,
    Multiplicative,
}

/// Axis-aligned box in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SpaceBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return invalid("box needs matching nonempty bounds with lo < hi");
        }
        Ok(SpaceBox { lo, hi })
    }

    /// The cube `[-half, half]^d`.
    pub fn centered(d: usize, half: f64) -> Self {
        SpaceBox { lo: vec![-half; d], hi: vec![half; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn padded(&self, r: f64) -> Self {
        SpaceBox { lo: self.lo.iter().map(|v| v - r).collect(), hi: self.hi.iter().map(|v| v + r).collect() }
    }

    /// The box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Self {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                let c = 0.5 * (a + b);
                let h = 0.5 * (b - a) * factor;
                (c - h, c + h)
            })
            .unzip();
        SpaceBox { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub d: usize,
    pub t: f64,
    pub measure: LevyMeasure,
    pub mode: Mode,
    /// Evaluation region; atoms are generated on a padded copy.
    pub window: SpaceBox,
    pub margin_tolerance: f64,
    /// Atoms smaller than ε are dropped.
    pub small_jump_cutoff: f64,
    /// Picard depth for small-jump runs; `None` is unbounded.
    pub picard_levels: Option<usize>,
    /// Spatial cone `|Δx| ≤ β√Δt` on steps leaving a small atom; `None` is no cone.
    pub picard_cone: Option<f64>,
    /// Maximal number of large atoms per chain; `None` is unbounded.
    pub chain_cap: Option<usize>,
    /// Subtract the small-jump compensator in the additive field.
    pub compensate_small: bool,
    pub seed: u64,
}

impl FieldConfig {
    pub fn new(d: usize, t: f64, measure: LevyMeasure, mode: Mode, window: SpaceBox) -> Self {
        FieldConfig {
            d,
            t,
            measure,
            mode,
            window,
            margin_tolerance: 1e-6,
            small_jump_cutoff: 1.0,
            picard_levels: None,
            picard_cone: None,
            chain_cap: None,
            compensate_small: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return invalid("dimension must be at least 1");
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return invalid(format!("time must be positive, got {}", self.t));
        }
        if self.window.dim() != self.d {
            return invalid("window dimension differs from d");
        }
        if !(self.margin_tolerance > 0.0 && self.margin_tolerance < 1.0) {
            return invalid("margin_tolerance must lie in (0,1)");
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff <= 1.0) {
            return invalid("small_jump_cutoff must lie in (0,1]");
        }
        if let Some(b) = self.picard_cone {
            if !(b > 0.0) {
                return invalid("picard_cone must be positive");
            }
        }
        self.measure.validate()?;
        if self.mode == Mode::Multiplicative {
            let m1 = self.measure.truncated_moment(MomentKind::SmallP, 1.0)?;
            if !m1.is_finite() {
                return Err(Error::Unsupported(format!(
                    "multiplicative noise with infinite small-jump first moment (d={}) needs compensated Picard \
                     iterations, which are outside the supported scope",
                    self.d
                )));
            }
        }
        Ok(())
    }

    pub fn jump_range(&self) -> JumpRange {
        JumpRange::closed(self.small_jump_cutoff, f64::INFINITY)
    }

    /// First moment of the retained small jumps, `∫_[ε,1) z λ(dz)`.
    pub fn retained_small_first_moment(&self) -> f64 {
        let lam = &self.measure;
        let eps = self.small_jump_cutoff;
        if eps >= 1.0 {
            return 0.0;
        }
        first_moment_from(lam, eps)
    }

    pub fn bias(&self) -> BiasDescriptor {
        BiasDescriptor {
            neglected_small_first_moment: neglected_first_moment(&self.measure, self.small_jump_cutoff),
            retained_small_first_moment: self.retained_small_first_moment(),
        }
    }

    /// Padding radius: `exp(-r²/(2t)) · intensity = margin_tolerance`.
    pub fn padding(&self) -> Result<f64> {
        let mass = self.measure.finite_mass(self.jump_range())?;
        Ok(padding_radius(self.t, self.t * mass, self.margin_tolerance))
    }

    pub fn noise_domain(&self) -> Result<SpaceBox> {
        Ok(self.window.padded(self.padding()?))
    }

    pub fn truncation(&self) -> TruncationDescriptor {
        TruncationDescriptor {
            chain_cap: self.chain_cap,
            picard_levels: self.picard_levels,
            picard_cone: self.picard_cone,
            small_jump_cutoff: self.small_jump_cutoff,
        }
    }
}

fn neglected_first_moment(lam: &LevyMeasure, eps: f64) -> Moment {
    match lam.truncated_moment(MomentKind::SmallP, 1.0).unwrap_or(Moment::Infinite) {
        Moment::Infinite => Moment::Infinite,
        Moment::Finite(total) if eps >= 1.0 => Moment::Finite(total),
        Moment::Finite(total) => Moment::Finite((total - first_moment_from(lam, eps)).max(0.0)),
    }
}

/// `∫_[ε,1) z λ(dz)` computed from the restricted measure.
fn first_moment_from(lam: &LevyMeasure, eps: f64) -> f64 {
    let at = lam.atom_mass(eps) * eps;
    let r = LevyMeasure::restricted(lam.clone(), eps, 1.0);
    let inner = r.truncated_moment(MomentKind::SmallP, 1.0).map(Moment::value).unwrap_or(0.0);
    inner + at
}

pub fn padding_radius(t: f64, intensity: f64, tol: f64) -> f64 {
    if intensity <= tol {
        0.0
    } else {
        (2.0 * t * (intensity / tol).ln()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationDescriptor {
    pub chain_cap: Option<usize>,
    pub picard_levels: Option<usize>,
    pub picard_cone: Option<f64>,
    pub small_jump_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasDescriptor {
    /// `∫_(0,ε) z λ(dz)`: first moment of the dropped jumps.
    pub neglected_small_first_moment: Moment,
    /// `∫_[ε,1) z λ(dz)`: enters the compensator or the `e^{-m₁t}` factor.
    pub retained_small_first_moment: f64,
}

/// A space-time jump `(τ, η, ζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonAtom {
    pub tau: f64,
    pub eta: Vec<f64>,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub t: f64,
    pub domain: SpaceBox,
    pub range: JumpRange,
    pub atoms: Vec<PoissonAtom>,
}

impl AtomSet {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The atoms whose location lies in `domain`.
    pub fn restricted_to(&self, domain: &SpaceBox) -> AtomSet {
        AtomSet {
            t: self.t,
            domain: domain.clone(),
            range: self.range,
            atoms: self.atoms.iter().filter(|a| domain.contains(&a.eta)).cloned().collect(),
        }
    }
}

/// Poisson atoms on `(0,t] × domain × range` with intensity `dt ⊗ dx ⊗ λ`.
pub fn sample_atoms_in_domain(
    measure: &LevyMeasure,
    range: JumpRange,
    t: f64,
    domain: &SpaceBox,
    rng: &mut Stream,
) -> Result<AtomSet> {
    let mass = measure.finite_mass(range)?;
    let count = crate::levy::poisson_count(t * domain.volume() * mass, rng);
    let mut atoms = Vec::with_capacity(count);
    for _ in 0..count {
        let tau = t * (1.0 - rng.random::<f64>());
        let eta = domain.lo.iter().zip(&domain.hi).map(|(&a, &b)| a + (b - a) * rng.random::<f64>()).collect();
        let zeta = measure.sample_size(range, mass, rng);
        atoms.push(PoissonAtom { tau, eta, zeta });
    }
    Ok(AtomSet { t, domain: domain.clone(), range, atoms })
}

/// Atoms for `config` over the padded window and the given size range.
pub fn sample_atoms(config: &FieldConfig, range: JumpRange, rng: &mut Stream) -> Result<AtomSet> {
    let mass = config.measure.finite_mass(range)?;
    let pad = padding_radius(config.t, config.t * mass, config.margin_tolerance);
    sample_atoms_in_domain(&config.measure, range, config.t, &config.window.padded(pad), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Points,
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub seed: u64,
    pub atom_count: usize,
    pub mode: Mode,
    pub layout: Layout,
    pub truncation: TruncationDescriptor,
    pub bias: BiasDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub d: usize,
    /// Flattened coordinates, `d` per point.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// CSV with columns `x1..xd,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for k in 1..=self.d {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("value\n");
        for i in 0..self.len() {
            for c in self.point(i) {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{}\n", self.values[i]));
        }
        out
    }
}

/// Evaluates the field in the mode of `config`.
pub fn evaluate(atoms: &AtomSet, config: &FieldConfig, points: &[f64]) -> Result<FieldSample> {
    match config.mode {
        Mode::Additive => evaluate_additive(atoms, config, points),
        Mode::Multiplicative => evaluate_multiplicative_dp(atoms, config, points),
    }
}

/// Samples atoms for `config` and evaluates the field on the integer lattice
/// `|x|_∞ ≤ radius`.
pub fn sample_lattice_field(config: &FieldConfig, radius: f64, rng: &mut Stream) -> Result<FieldSample> {
    config.validate()?;
    let atoms = sample_atoms(config, config.jump_range(), rng)?;
    let mut field = evaluate(&atoms, config, &lattice_points(config.d, radius))?;
    field.meta.layout = Layout::Lattice;
    Ok(field)
}

/// All integer points with sup-norm at most `radius`, flattened.
pub fn lattice_points(d: usize, radius: f64) -> Vec<f64> {
    let r = radius.floor() as i64;
    let side = (2 * r + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::with_capacity(total * d);
    for idx in 0..total {
        let mut rest = idx;
        for _ in 0..d {
            out.push((rest % side) as f64 - r as f64);
            rest /= side;
        }
    }
    out
}

/// Sorted view of atoms by first coordinate for range queries.
pub(crate) struct FirstAxisIndex {
    keys: Vec<f64>,
    order: Vec<usize>,
}

impl FirstAxisIndex {
    pub(crate) fn new(atoms: &[PoissonAtom]) -> Self {
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&a, &b| atoms[a].eta[0].total_cmp(&atoms[b].eta[0]));
        let keys = order.iter().map(|&i| atoms[i].eta[0]).collect();
        FirstAxisIndex { keys, order }
    }

    /// Indices of atoms with first coordinate in `[c - r, c + r]`.
    pub(crate) fn near(&self, c: f64, r: f64) -> &[usize] {
        let a = self.keys.partition_point(|&k| k < c - r);
        let b = self.keys.partition_point(|&k| k <= c + r);
        &self.order[a..b]
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `∫_0^t ∫_D g(s, x - y)^p dy ds`, by quadrature in time.
pub fn window_kernel_power_integral(domain: &SpaceBox, t: f64, x: &[f64], p: f64) -> f64 {
    let f = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            kernel::kernel_power_box_integral(p, s, x, &domain.lo, &domain.hi)
        }
    };
    crate::quad::integrate(&f, 0.0, t, 1e-12)
}
