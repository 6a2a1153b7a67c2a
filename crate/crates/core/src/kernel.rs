//! Heat kernel `g(t,x) = (2πt)^{-d/2} exp(-|x|²/(2t)) 1{t>0}` and closed-form
//! integrals of its powers.
//!
//! Values are assembled in log-space so chain products of many kernels do not
//! underflow term by term.

use crate::levy::Moment;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

/// Kernel weights below this value are treated as exactly zero by the solver.
pub const KERNEL_FLOOR_LN: f64 = -575.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub d: usize,
    pub t: f64,
}

pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `log g(t, x)` given `|x|²`; `-∞` for `t ≤ 0`.
pub fn log_heat_kernel_r2(t: f64, r2: f64, d: usize) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * d as f64 * (2.0 * PI * t).ln() - r2 / (2.0 * t)
}

pub fn heat_kernel_r2(t: f64, r2: f64, d: usize) -> f64 {
    log_heat_kernel_r2(t, r2, d).exp()
}

pub fn heat_kernel(t: f64, x: &[f64]) -> f64 {
    heat_kernel_r2(t, squared_norm(x), x.len())
}

/// `θ_p = 1 - (d/2)(p - 1)`.
pub fn theta(p: f64, d: usize) -> f64 {
    1.0 - 0.5 * d as f64 * (p - 1.0)
}

/// `∫ g(s,y)^p dy = (2πs)^{-d(p-1)/2} p^{-d/2}`.
pub fn kernel_power_space_integral(p: f64, s: f64, d: usize) -> f64 {
    let d = d as f64;
    (-(d * (p - 1.0) / 2.0) * (2.0 * PI * s).ln() - 0.5 * d * p.ln()).exp()
}

/// `∫_0^{t0} s^{-(d/2)(α-1)} ds`, infinite when `θ_α ≤ 0`.
pub fn singularity_time_integral(alpha: f64, t0: f64, d: usize) -> Moment {
    let th = theta(alpha, d);
    if th <= 0.0 {
        Moment::Infinite
    } else {
        Moment::Finite(t0.powf(th) / th)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `∫_{box} g(s, y - x)^p dy` over an axis-aligned box.
pub fn kernel_power_box_integral(p: f64, s: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let scale = (p / s).sqrt();
    let one_dim = (2.0 * PI * s).powf(-p / 2.0) * (2.0 * PI * s / p).sqrt();
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&xi, (&a, &b))| {
            let upper = normal_cdf((b - xi) * scale);
            let lower = normal_cdf((a - xi) * scale);
            one_dim * (upper - lower).max(0.0)
        })
        .product()
}

/// Distance beyond which every kernel value on `(0, t]` lies below the floor.
pub fn negligible_radius(t: f64, d: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r2 = 2.0 * t * (-KERNEL_FLOOR_LN - 0.5 * d as f64 * (2.0 * PI * t).ln());
    r2.max(d as f64 * t).sqrt()
}
