//! Grid suprema of the field over unit cubes and the truncation schedule.
//!
//! Every supremum here is a maximum over a regular subgrid, so it is a lower
//! bound of the true supremum and nondecreasing under nested refinement.

use super::{evaluate, sample_atoms, AtomSet, FieldConfig, Mode, SpaceBox};
use crate::error::{invalid, Result};
use crate::kernel::theta;
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

/// All grid points `lo + i·(hi-lo)/(res-1)` of a box, flattened.
fn box_grid(lo: &[f64], hi: &[f64], res: usize) -> Vec<f64> {
    let d = lo.len();
    let total = res.pow(d as u32);
    let mut out = Vec::with_capacity(total * d);
    for idx in 0..total {
        let mut rest = idx;
        for k in 0..d {
            let i = rest % res;
            rest /= res;
            out.push(lo[k] + (hi[k] - lo[k]) * i as f64 / (res - 1) as f64);
        }
    }
    out
}

/// Grid maximum of the field over the unit cube with lower corner `cube_lo`.
pub fn field_sup_on(atoms: &AtomSet, config: &FieldConfig, cube_lo: &[f64], resolution: usize) -> Result<(f64, Vec<f64>)> {
    if resolution < 2 {
        return invalid("resolution must be at least 2");
    }
    if cube_lo.len() != config.d {
        return invalid("cube dimension differs from d");
    }
    let hi: Vec<f64> = cube_lo.iter().map(|v| v + 1.0).collect();
    let points = box_grid(cube_lo, &hi, resolution);
    let sample = evaluate(atoms, config, &points)?;
    let (best, value) = sample
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok((value, sample.point(best).to_vec()))
}

/// Samples atoms for `config` and returns the grid maximum over one unit cube.
pub fn field_sup(config: &FieldConfig, cube_lo: &[f64], resolution: usize, rng: &mut Stream) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    let atoms = sample_atoms(config, config.jump_range(), rng)?;
    field_sup_on(&atoms, config, cube_lo, resolution)
}

/// Grid maxima over every unit cube `[k, k+1]` with `|k|_∞ ≤ radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSupTable {
    pub d: usize,
    pub mode: Mode,
    pub resolution: usize,
    /// Largest cube index: corners run over `[-radius, radius - 1]^d`.
    pub radius: i64,
    /// Lower corners, `d` integers per cube.
    pub corners: Vec<i64>,
    pub sups: Vec<f64>,
}

impl CubeSupTable {
    pub fn len(&self) -> usize {
        self.sups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sups.is_empty()
    }

    pub fn corner(&self, i: usize) -> &[i64] {
        &self.corners[i * self.d..(i + 1) * self.d]
    }
}

/// Evaluates the field on one shared grid over `[-radius, radius]^d` and takes
/// per-cube maxima, so neighbouring cubes share their boundary points.
pub fn cube_sup_table(atoms: &AtomSet, config: &FieldConfig, radius: i64, resolution: usize) -> Result<CubeSupTable> {
    if resolution < 2 || radius < 1 {
        return invalid("cube table needs resolution ≥ 2 and radius ≥ 1");
    }
    let d = config.d;
    let span = SpaceBox::centered(d, radius as f64);
    if !config.window.contains(&span.lo) || !config.window.contains(&span.hi) {
        return invalid("cube table range is not inside the evaluation window");
    }
    let cells = (2 * radius) as usize;
    let per_axis = cells * (resolution - 1) + 1;
    let points = box_grid(&span.lo, &span.hi, per_axis);
    let values = evaluate(atoms, config, &points)?.values;

    let n_cubes = cells.pow(d as u32);
    let mut corners = Vec::with_capacity(n_cubes * d);
    let mut sups = Vec::with_capacity(n_cubes);
    let local = resolution.pow(d as u32);
    for c in 0..n_cubes {
        let mut cell = vec![0usize; d];
        let mut rest = c;
        for slot in cell.iter_mut() {
            *slot = rest % cells;
            rest /= cells;
        }
        corners.extend(cell.iter().map(|&k| k as i64 - radius));
        let mut best = f64::NEG_INFINITY;
        for l in 0..local {
            let mut rest = l;
            let mut flat = 0;
            let mut stride = 1;
            for &k in &cell {
                let i = rest % resolution;
                rest /= resolution;
                flat += (k * (resolution - 1) + i) * stride;
                stride *= per_axis;
            }
            best = best.max(values[flat]);
        }
        sups.push(best);
    }
    Ok(CubeSupTable { d, mode: config.mode, resolution, radius, corners, sups })
}

/// Structural decay factor `e^{-β} + m^{-θ_p m/(3p)}` of the truncation error,
/// with all unknown constants set to one.
pub fn truncation_decay(p: f64, m: usize, beta: f64, d: usize) -> Result<f64> {
    let th = theta(p, d);
    if !(p > 1.0) || th <= 0.0 {
        return invalid(format!("truncation rate needs 1 < p < 1 + 2/d, got p={p}, d={d}"));
    }
    let m = m as f64;
    Ok((-beta).exp() + m.powf(-th * m / (3.0 * p)))
}

/// Smallest `m` and matching `β` with decay factor at most `tol`, half each.
pub fn schedule_truncation(p: f64, d: usize, tol: f64) -> Result<(usize, f64)> {
    if !(tol > 0.0 && tol < 2.0) {
        return invalid("tolerance must lie in (0,2)");
    }
    truncation_decay(p, 1, 0.0, d)?;
    let beta = (2.0 / tol).ln().max(0.0);
    let half = 0.5 * tol;
    let th = theta(p, d);
    let m = (2..)
        .find(|&m| (m as f64).powf(-th * m as f64 / (3.0 * p)) <= half)
        .expect("rate tends to zero");
    Ok((m, beta))
}
