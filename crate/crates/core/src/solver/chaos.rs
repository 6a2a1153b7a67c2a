//! Chaos series of the multiplicative field as a dynamic program.
//!
//! A chain is a time-increasing sequence of atoms. Its weight is the product of
//! the jump sizes and of the kernels between consecutive atoms and from the last
//! atom to the evaluation point. With small jumps dropped below ε and the
//! uncompensated representation `Y = e^{-m₁t} Ŷ`, the field is `e^{-m₁t}` times
//! one plus the sum over all chains.
//!
//! Truncation acts on chains: at most `N` large atoms (ζ ≥ 1), at most `m`
//! consecutive small atoms between large ones, and a step leaving a small atom
//! must satisfy `|Δx| ≤ β√Δt`. The DP state of an atom is (large atoms used,
//! current small run length); uncapped dimensions collapse to one state.

use super::{dist2, AtomSet, FieldConfig, FieldMeta, FieldSample, FirstAxisIndex, Layout, Mode, PoissonAtom};
use crate::error::{invalid, Error, Result};
use crate::kernel::{log_heat_kernel_r2, negligible_radius};
use crate::levy::{JumpRange, MomentKind};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
struct Caps {
    large: Option<usize>,
    small: Option<usize>,
    cone: Option<f64>,
}

impl Caps {
    fn nk(&self) -> usize {
        self.small.map_or(1, |m| m + 1)
    }

    fn nj(&self) -> usize {
        self.large.map_or(1, |n| n + 1)
    }

    fn cone_ok(&self, r2: f64, dt: f64) -> bool {
        self.cone.is_none_or(|b| r2 <= b * b * dt)
    }
}

#[derive(Clone, Copy)]
enum Origin<'a> {
    /// Chains start anywhere with weight one.
    Unit,
    /// Chains start at the space-time point `(s, y)`.
    Point { s: f64, y: &'a [f64] },
}

struct ChainTable {
    /// Sum over states of the chain weight ending at each atom.
    totals: Vec<f64>,
}

fn kernel(dt: f64, r2: f64, d: usize) -> f64 {
    log_heat_kernel_r2(dt, r2, d).exp()
}

fn time_order(atoms: &[PoissonAtom]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&atoms[a], &atoms[b]);
        x.tau.total_cmp(&y.tau).then_with(|| {
            x.eta.iter().zip(&y.eta).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    order
}

fn chain_table(atoms: &[PoissonAtom], small: &[bool], caps: Caps, origin: Origin, t: f64, d: usize) -> ChainTable {
    let k_atoms = atoms.len();
    let (nj, nk) = (caps.nj(), caps.nk());
    let ns = nj * nk;
    let order = time_order(atoms);
    let index = FirstAxisIndex::new(atoms);
    let radius = negligible_radius(t, d);
    let mut states = vec![0.0; k_atoms * ns];
    let mut jmax = vec![0usize; k_atoms];
    let mut totals = vec![0.0; k_atoms];
    let mut done = vec![false; k_atoms];
    let mut acc = vec![0.0; ns];

    for &a in &order {
        let atom = &atoms[a];
        let is_small = small[a];
        done[a] = true;
        if (is_small && caps.small == Some(0)) || (!is_small && caps.large == Some(0)) {
            continue;
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        let start = match origin {
            Origin::Unit => 1.0,
            Origin::Point { s, y } => kernel(atom.tau - s, dist2(&atom.eta, y), d),
        };
        let first = if is_small { usize::from(caps.small.is_some()) } else { usize::from(caps.large.is_some()) * nk };
        acc[first] += start;

        for &b in index.near(atom.eta[0], radius) {
            let prev = &atoms[b];
            if !done[b] || !(prev.tau < atom.tau) || totals[b] == 0.0 {
                continue;
            }
            let dt = atom.tau - prev.tau;
            let r2 = dist2(&atom.eta, &prev.eta);
            if small[b] && !caps.cone_ok(r2, dt) {
                continue;
            }
            let w = kernel(dt, r2, d);
            if w == 0.0 {
                continue;
            }
            let src = &states[b * ns..(b + 1) * ns];
            if ns == 1 {
                acc[0] += w * src[0];
                continue;
            }
            for j in 0..=jmax[b] {
                for k in 0..nk {
                    let v = src[j * nk + k];
                    if v == 0.0 {
                        continue;
                    }
                    let (tj, tk) = if is_small {
                        (j, if caps.small.is_some() { k + 1 } else { 0 })
                    } else {
                        (if caps.large.is_some() { j + 1 } else { 0 }, 0)
                    };
                    if tj >= nj || tk >= nk {
                        continue;
                    }
                    acc[tj * nk + tk] += w * v;
                }
            }
        }

        let dst = &mut states[a * ns..(a + 1) * ns];
        let mut total = 0.0;
        let mut top = 0;
        for (s, (out, v)) in dst.iter_mut().zip(&acc).enumerate() {
            *out = atom.zeta * v;
            total += *out;
            if *out != 0.0 {
                top = s / nk;
            }
        }
        totals[a] = total;
        jmax[a] = top;
    }
    ChainTable { totals }
}

#[allow(clippy::too_many_arguments)]
fn endpoint_sum(
    atoms: &[PoissonAtom],
    small: &[bool],
    table: &ChainTable,
    index: &FirstAxisIndex,
    caps: Caps,
    t_end: f64,
    x: &[f64],
    radius: f64,
) -> f64 {
    let d = x.len();
    let mut sum = 0.0;
    for &a in index.near(x[0], radius) {
        let total = table.totals[a];
        let atom = &atoms[a];
        if total == 0.0 || !(atom.tau < t_end) {
            continue;
        }
        let dt = t_end - atom.tau;
        let r2 = dist2(x, &atom.eta);
        if small[a] && !caps.cone_ok(r2, dt) {
            continue;
        }
        sum += kernel(dt, r2, d) * total;
    }
    sum
}

fn caps_of(config: &FieldConfig) -> Caps {
    Caps { large: config.chain_cap, small: config.picard_levels, cone: config.picard_cone }
}

fn check_multiplicative(config: &FieldConfig) -> Result<()> {
    if config.mode != Mode::Multiplicative {
        return invalid("the chain solver needs a multiplicative configuration");
    }
    if !config.measure.truncated_moment(MomentKind::SmallP, 1.0)?.is_finite() {
        return Err(Error::Unsupported(format!(
            "multiplicative noise with infinite small-jump first moment (d={}) is outside the supported scope",
            config.d
        )));
    }
    Ok(())
}

/// Evaluates `Y(t, x)` (or its truncation `Y^{(N,m,β)}`) at every point.
pub fn evaluate_multiplicative_dp(atoms: &AtomSet, config: &FieldConfig, points: &[f64]) -> Result<FieldSample> {
    check_multiplicative(config)?;
    let d = config.d;
    if !points.len().is_multiple_of(d) {
        return invalid("point coordinates are not a multiple of d");
    }
    let eps = config.small_jump_cutoff;
    let kept: Vec<PoissonAtom> = atoms.atoms.iter().filter(|a| a.zeta >= eps).cloned().collect();
    let small: Vec<bool> = kept.iter().map(|a| a.zeta < 1.0).collect();
    let caps = caps_of(config);
    let t = config.t;
    let table = chain_table(&kept, &small, caps, Origin::Unit, t, d);
    let index = FirstAxisIndex::new(&kept);
    let radius = negligible_radius(t, d);
    let factor = (-config.retained_small_first_moment() * t).exp();
    let values = points
        .chunks_exact(d)
        .map(|x| factor * (1.0 + endpoint_sum(&kept, &small, &table, &index, caps, t, x, radius)))
        .collect();
    Ok(FieldSample {
        d,
        points: points.to_vec(),
        values,
        meta: FieldMeta {
            seed: config.seed,
            atom_count: atoms.len(),
            mode: Mode::Multiplicative,
            layout: Layout::Points,
            truncation: config.truncation(),
            bias: config.bias(),
        },
    })
}

/// A request for `Y_<(t,x)` and `u_<(s,y; t,x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRequest {
    pub s: f64,
    pub y: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardValue {
    /// `Y_<^{(m,β)}(t,x)`.
    pub y_small: f64,
    /// `u_<^{(m,β)}(s,y; t,x)`.
    pub u_small: f64,
}

/// Small-jump factors of the chaos series evaluated over simulated jumps in `[ε, 1)`.
pub fn picard_small(config: &FieldConfig, rng: &mut Stream, requests: &[PicardRequest]) -> Result<Vec<PicardValue>> {
    check_multiplicative(config)?;
    let below_one = f64::from_bits(1f64.to_bits() - 1);
    let range = JumpRange::closed(config.small_jump_cutoff, below_one);
    let set = if config.small_jump_cutoff >= 1.0 {
        AtomSet { t: config.t, domain: config.window.clone(), range, atoms: Vec::new() }
    } else {
        super::sample_atoms(config, range, rng)?
    };
    picard_small_on(&set, config, requests)
}

/// As [`picard_small`] over a given set of small atoms.
pub fn picard_small_on(set: &AtomSet, config: &FieldConfig, requests: &[PicardRequest]) -> Result<Vec<PicardValue>> {
    let d = config.d;
    let atoms: Vec<PoissonAtom> =
        set.atoms.iter().filter(|a| a.zeta >= config.small_jump_cutoff && a.zeta < 1.0).cloned().collect();
    let small = vec![true; atoms.len()];
    let caps = Caps { large: None, small: config.picard_levels, cone: config.picard_cone };
    let index = FirstAxisIndex::new(&atoms);
    let radius = negligible_radius(config.t, d);
    let unit = chain_table(&atoms, &small, caps, Origin::Unit, config.t, d);
    let m1 = config.retained_small_first_moment();
    requests
        .iter()
        .map(|r| {
            if !(r.s < r.t && r.s >= 0.0 && r.t <= config.t) || r.x.len() != d || r.y.len() != d {
                return invalid("picard request needs 0 ≤ s < t ≤ config.t and d-dimensional points");
            }
            let y_small = (-m1 * r.t).exp() * (1.0 + endpoint_sum(&atoms, &small, &unit, &index, caps, r.t, &r.x, radius));
            let from = chain_table(&atoms, &small, caps, Origin::Point { s: r.s, y: &r.y }, config.t, d);
            let base = kernel(r.t - r.s, dist2(&r.x, &r.y), d);
            let u_small =
                (-m1 * (r.t - r.s)).exp() * (base + endpoint_sum(&atoms, &small, &from, &index, caps, r.t, &r.x, radius));
            Ok(PicardValue { y_small, u_small })
        })
        .collect()
}
