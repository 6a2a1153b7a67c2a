//! Thin adaptive layer over tanh-sinh quadrature.

use quadrature::double_exponential;
use std::collections::BinaryHeap;

const MAX_PIECES: usize = 400;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Piece {
    let out = double_exponential::integrate(f, a, b, tol);
    Piece { a, b, value: out.integral, error: out.error_estimate }
}

/// Integrates `f` over `[a, b]`, bisecting the piece with the largest error
/// until the summed error meets `tol` (absolute, or relative near roundoff)
/// or the piece budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut heap = BinaryHeap::new();
    heap.push(piece(f, a, b, tol));
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= tol.max(1e-14 * total.abs()) || heap.len() >= MAX_PIECES {
            return total;
        }
        let worst = heap.pop().expect("heap is nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            heap.push(Piece { error: 0.0, ..worst });
            continue;
        }
        let sub = tol / heap.len().max(1) as f64;
        heap.push(piece(f, worst.a, m, sub));
        heap.push(piece(f, m, worst.b, sub));
    }
}

/// Integrates over consecutive breakpoints, which should include every kink.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / n))
        .sum()
}

/// Integrates over `[a, ∞)` through `z = a + e^s - 1`, `s = u/(1-u)`, which
/// reaches far enough out for slowly decaying power tails.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let g = |u: f64| {
        let one_minus = 1.0 - u;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let s = u / one_minus;
        let v = f(a + s.exp_m1()) * s.exp() / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// Integrates over the whole line by splitting at `center`.
pub fn integrate_line<F: Fn(f64) -> f64>(f: &F, center: f64, tol: f64) -> f64 {
    let right = integrate_to_infinity(f, center, 0.5 * tol);
    let mirrored = |z: f64| f(2.0 * center - z);
    right + integrate_to_infinity(&mirrored, center, 0.5 * tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_endpoint_singularity() {
        let v = integrate(&|x: f64| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-10);
        let v = integrate(&|x: f64| -x.ln(), 0.0, 1.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_ranges() {
        let v = integrate_to_infinity(&|x: f64| (-x).exp(), 0.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_line(&|x: f64| (-x * x).exp(), 0.3, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-9);
    }
}
