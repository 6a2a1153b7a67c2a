use levyheat::rng::{replicate, stream};
use levyheat::solver::{
    evaluate, sample_atoms, sample_atoms_in_domain, window_kernel_power_integral, FieldConfig, Mode, SpaceBox,
};
use levyheat::LevyMeasure;
use proptest::prelude::*;

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn additive_mean_matches_first_moment_times_coverage() {
    // Pareto(3): ∫ z λ(dz) = ∫_1^∞ 3 z^{-3} dz = 3/2, and the variance is finite.
    let t = 1.0;
    let fc = FieldConfig::new(1, t, LevyMeasure::pareto(3.0), Mode::Additive, SpaceBox::centered(1, 0.5));
    let values = replicate(40, 100_000, |_, rng| {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng).unwrap();
        evaluate(&atoms, &fc, &[0.0]).unwrap().values[0]
    });
    let coverage = window_kernel_power_integral(&fc.noise_domain().unwrap(), t, &[0.0], 1.0) / t;
    assert!(coverage > 0.999 && coverage <= 1.0, "{coverage}");
    let want = t * 1.5 * coverage;
    let (mean, se) = mean_and_stderr(&values);
    assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} ± {se}");
}

fn padding_drift(mode: Mode) -> (f64, f64, f64) {
    let fc = FieldConfig::new(1, 1.0, LevyMeasure::pareto(1.0), mode, SpaceBox::centered(1, 1.0));
    let pad = fc.padding().unwrap();
    let inner = fc.window.padded(pad);
    let outer = fc.window.padded(2.0 * pad);
    let drift: Vec<f64> = (0..100)
        .map(|i| {
            let atoms = sample_atoms_in_domain(&fc.measure, fc.jump_range(), fc.t, &outer, &mut stream(41, i)).unwrap();
            let wide = evaluate(&atoms, &fc, &[0.3]).unwrap().values[0];
            let narrow = evaluate(&atoms.restricted_to(&inner), &fc, &[0.3]).unwrap().values[0];
            if wide > 0.0 {
                (wide - narrow) / wide
            } else {
                0.0
            }
        })
        .collect();
    let (mean, se) = mean_and_stderr(&drift);
    (mean, se, fc.margin_tolerance)
}

#[test]
fn doubling_the_padding_changes_interior_values_within_the_margin() {
    for mode in [Mode::Additive, Mode::Multiplicative] {
        let (mean, se, margin) = padding_drift(mode);
        assert!(mean >= 0.0, "{mode:?}: removing positive atoms cannot raise the field");
        assert!(mean <= margin + 4.0 * se, "{mode:?}: drift {mean} ± {se}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn additive_field_is_linear_in_jump_sizes(seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut fc = FieldConfig::new(1, 1.0, LevyMeasure::pareto(1.0), Mode::Additive, SpaceBox::centered(1, 2.0));
        // Scaled atoms must stay above the small-jump cutoff.
        fc.small_jump_cutoff = 1e-3;
        let atoms = sample_atoms(&fc, fc.jump_range(), &mut stream(seed, 0)).unwrap();
        let mut scaled = atoms.clone();
        scaled.atoms.iter_mut().for_each(|a| a.zeta *= c);
        let points = [-1.5, 0.0, 0.7, 2.0];
        let base = evaluate(&atoms, &fc, &points).unwrap().values;
        let big = evaluate(&scaled, &fc, &points).unwrap().values;
        for (b, s) in base.iter().zip(&big) {
            prop_assert!((s - c * b).abs() <= 1e-12 * (c * b).abs().max(1e-300));
        }
    }
}
