use super::{dist2, AtomSet, FieldConfig, FieldMeta, FieldSample, FirstAxisIndex, Layout, Mode};
use crate::error::{invalid, Result};
use crate::kernel::{log_heat_kernel_r2, negligible_radius};

/// `Y₊(t,x) = Σ g(t-τ, x-η) ζ` over the retained atoms, minus the small-jump
/// compensator `t ∫_[ε,1) z λ(dz)` when compensation is switched on.
pub fn evaluate_additive(atoms: &AtomSet, config: &FieldConfig, points: &[f64]) -> Result<FieldSample> {
    if config.mode != Mode::Additive {
        return invalid("evaluate_additive needs an additive configuration");
    }
    let d = config.d;
    if !points.len().is_multiple_of(d) {
        return invalid("point coordinates are not a multiple of d");
    }
    let t = config.t;
    let eps = config.small_jump_cutoff;
    let radius = negligible_radius(t, d);
    let index = FirstAxisIndex::new(&atoms.atoms);
    let shift = if config.compensate_small { t * config.retained_small_first_moment() } else { 0.0 };

    let values = points
        .chunks_exact(d)
        .map(|x| {
            let mut v = 0.0;
            for &i in index.near(x[0], radius) {
                let a = &atoms.atoms[i];
                if a.zeta < eps {
                    continue;
                }
                v += a.zeta * log_heat_kernel_r2(t - a.tau, dist2(x, &a.eta), d).exp();
            }
            v - shift
        })
        .collect();

    Ok(FieldSample {
        d,
        points: points.to_vec(),
        values,
        meta: FieldMeta {
            seed: config.seed,
            atom_count: atoms.len(),
            mode: Mode::Additive,
            layout: Layout::Points,
            truncation: config.truncation(),
            bias: config.bias(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::heat_kernel;
    use crate::levy::{JumpRange, LevyMeasure};
    use crate::rng::stream;
    use crate::solver::{sample_atoms, PoissonAtom, SpaceBox};
    use approx::assert_relative_eq;

    fn config(measure: LevyMeasure) -> FieldConfig {
        FieldConfig::new(1, 1.0, measure, Mode::Additive, SpaceBox::centered(1, 1.0))
    }

    fn set(atoms: Vec<PoissonAtom>) -> AtomSet {
        AtomSet { t: 1.0, domain: SpaceBox::centered(1, 10.0), range: JumpRange::closed(1.0, f64::INFINITY), atoms }
    }

    #[test]
    fn hand_examples() {
        let cfg = config(LevyMeasure::pareto(1.0));
        let one = set(vec![PoissonAtom { tau: 0.5, eta: vec![0.2], zeta: 3.0 }]);
        let v = evaluate_additive(&one, &cfg, &[0.2]).unwrap().values[0];
        assert_relative_eq!(v, 3.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_eq!(evaluate_additive(&set(vec![]), &cfg, &[0.0]).unwrap().values[0], 0.0);
        let two = set(vec![
            PoissonAtom { tau: 0.1, eta: vec![0.3], zeta: 2.0 },
            PoissonAtom { tau: 0.7, eta: vec![-0.4], zeta: 5.0 },
        ]);
        let x = 0.05;
        let want = 2.0 * heat_kernel(0.9, &[x - 0.3]) + 5.0 * heat_kernel(0.3, &[x + 0.4]);
        assert_relative_eq!(evaluate_additive(&two, &cfg, &[x]).unwrap().values[0], want, max_relative = 1e-14);
    }

    #[test]
    fn linear_in_weights() {
        let cfg = config(LevyMeasure::pareto(1.5));
        let atoms = sample_atoms(&cfg, cfg.jump_range(), &mut stream(9, 0)).unwrap();
        let mut scaled = atoms.clone();
        for a in &mut scaled.atoms {
            a.zeta *= 2.5;
        }
        let pts = [-0.5, 0.0, 0.7];
        let a = evaluate_additive(&atoms, &cfg, &pts).unwrap();
        let b = evaluate_additive(&scaled, &cfg, &pts).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(2.5 * u, *v, max_relative = 1e-13);
        }
    }

    #[test]
    fn compensation_shifts_by_first_moment() {
        let lam = LevyMeasure::dirac(vec![(0.25, 4.0), (2.0, 1.0)]);
        let mut cfg = config(lam);
        cfg.small_jump_cutoff = 0.1;
        let atoms = sample_atoms(&cfg, cfg.jump_range(), &mut stream(10, 0)).unwrap();
        let raw = evaluate_additive(&atoms, &cfg, &[0.0]).unwrap().values[0];
        cfg.compensate_small = true;
        let comp = evaluate_additive(&atoms, &cfg, &[0.0]).unwrap().values[0];
        assert_relative_eq!(raw - comp, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let mut cfg = config(LevyMeasure::pareto(1.0));
        cfg.mode = Mode::Multiplicative;
        assert!(evaluate_additive(&set(vec![]), &cfg, &[0.0]).is_err());
    }
}
