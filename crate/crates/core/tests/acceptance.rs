//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

use levyheat::analysis::{
    classify_integral, classify_numeric, default_hill_k, hill_estimator, ks_test, quantile, slow_variation_fit,
    survival_curve, GrowthGauge, IntegralExponent, SvForm, Verdict,
};
use levyheat::chains::{
    conditional_gap_cdf, prob_a_n, product_pareto_tail, sample_backward_chain, sample_conditional_chain,
};
use levyheat::dimension::{
    annulus_counts, extract_peak_set, hausdorff_dim_upper, minkowski_dim, planted_bernoulli, Norm, PeakSource,
    PeakVariant,
};
use levyheat::levy::decompose;
use levyheat::mathfns::{
    decoupling_check, gamma_series_bound_check, iter_int_closed, iter_int_oracle, lambert_w, lambert_w_bounds_check,
    paley_zygmund_check, DecouplingToy, DiscreteLaw, OracleMethod,
};
use levyheat::rng::{replicate, stream};
use levyheat::solver::{
    evaluate, sample_atoms, sample_lattice_field, window_kernel_power_integral, FieldConfig, Mode, SpaceBox,
};
use levyheat::LevyMeasure;
use rand::Rng;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> levyheat::Result<Outcome>;

fn iterated_integral() -> levyheat::Result<Outcome> {
    let mut worst_rel: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    let mut pass = true;
    let mut case = 0;
    for alpha in [0.0, 0.5] {
        for beta in [0.0, 1.0] {
            for r in [2.0, 10.0] {
                for n in 1..=3 {
                    let closed = iter_int_closed(n, alpha, beta, r)?.0;
                    let quad = iter_int_oracle(n, alpha, beta, r, OracleMethod::Quadrature)?.value;
                    let rel = (closed - quad).abs() / quad.abs();
                    worst_rel = worst_rel.max(rel);
                    pass &= rel <= 1e-6;
                }
                let closed = iter_int_closed(5, alpha, beta, r)?.0;
                let mc = iter_int_oracle(5, alpha, beta, r, OracleMethod::MonteCarlo { samples: 10_000_000, seed: 100 + case })?;
                let sigma = (closed - mc.value).abs() / mc.stderr;
                worst_sigma = worst_sigma.max(sigma);
                pass &= sigma <= 3.0;
                case += 1;
            }
        }
    }
    Ok(outcome(pass, format!("max rel err vs quadrature {worst_rel:.2e}; max |closed - MC|/σ at N=5 {worst_sigma:.2}")))
}

fn product_pareto() -> levyheat::Result<Outcome> {
    let exact = (1.0 + 10f64.ln()) / 10.0;
    let formula = product_pareto_tail(2, 1.0, 1.0, 10.0)?;
    let mut pass = (formula - exact).abs() <= 1e-12 && (exact - 0.330259).abs() < 5e-7;
    let levels = [10.0, 100.0];
    let chunks = 100u64;
    let per = 100_000u64;
    let counts = replicate(200, chunks, |_, rng| {
        let mut c = [0u64; 2];
        for _ in 0..per {
            let p: f64 = (0..3).map(|_| 1.0 / (1.0 - rng.random::<f64>())).product();
            for (j, &r) in levels.iter().enumerate() {
                c[j] += u64::from(p > r);
            }
        }
        c
    });
    let n = (chunks * per) as f64;
    let mut detail = format!("N=2 R=10: {formula:.7} vs (1+ln10)/10 = {exact:.7}");
    for (j, &r) in levels.iter().enumerate() {
        let hits: u64 = counts.iter().map(|c| c[j]).sum();
        let p = hits as f64 / n;
        let want = product_pareto_tail(3, 1.0, 1.0, r)?;
        let sigma = (p - want).abs() / (want * (1.0 - want) / n).sqrt();
        pass &= sigma <= 4.0;
        detail += &format!("; N=3 R={r}: MC {p:.6} vs {want:.6} ({sigma:.2}σ)");
    }
    Ok(outcome(pass, detail))
}

fn chain_law() -> levyheat::Result<Outcome> {
    let measure = LevyMeasure::pareto(1.0);
    let reps = 1_000_000u64;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut ks_detail = String::new();
    for d in [1usize, 2] {
        for t in [0.5, 1.0] {
            let x = vec![0.0; d];
            let chains = replicate(300 + d as u64 * 10 + (t * 2.0) as u64, reps, |_, rng| {
                let c = sample_backward_chain(t, &x, &measure, rng).expect("valid chain parameters");
                ((1..=3).find(|&n| c.in_event(n)), c.steps.iter().map(|s| s.dtau).collect::<Vec<f64>>())
            });
            for n in 1..=3 {
                let hits = chains.iter().filter(|c| c.0 == Some(n)).count() as f64;
                let p = prob_a_n(t, n, d);
                let sigma = (hits / reps as f64 - p).abs() / (p * (1.0 - p) / reps as f64).sqrt();
                worst = worst.max(sigma);
                pass &= sigma <= 4.0;
            }
            if d == 1 && t == 1.0 {
                // Gaps of unconditioned chains that landed in A_2.
                let gaps: Vec<f64> = chains.iter().filter(|c| c.0 == Some(2)).flat_map(|c| c.1.iter().copied()).collect();
                let (_, p_reject) = ks_test(&gaps, |v| conditional_gap_cdf(v, t, 2, d));
                let direct: Vec<f64> = replicate(399, 20_000, |_, rng| {
                    sample_conditional_chain(t, 2, &x, &measure, rng).expect("valid chain parameters").steps[0].dtau
                });
                let (_, p_direct) = ks_test(&direct, |v| conditional_gap_cdf(v, t, 2, d));
                pass &= p_reject > 0.01 && p_direct > 0.01;
                ks_detail = format!(
                    "; KS p-values at d=1 t=1 N=2: accepted chains {p_reject:.3} ({} gaps), conditional sampler {p_direct:.3}",
                    gaps.len()
                );
            }
        }
    }
    Ok(outcome(pass, format!("max |freq - P(A_N)|/σ over 12 cases {worst:.2}{ks_detail}")))
}

fn lambert() -> levyheat::Result<Outcome> {
    let grid: Vec<f64> = (0..10_000).map(|i| 10f64.powf(-3.0 + 11.0 * i as f64 / 9999.0)).collect();
    let mut worst: f64 = 0.0;
    for &x in &grid {
        let w = lambert_w(x)?;
        worst = worst.max((w * w.exp() - x).abs() / x);
    }
    let upper: Vec<f64> = grid.iter().copied().filter(|&x| x >= std::f64::consts::E).collect();
    let check = lambert_w_bounds_check(&upper)?;
    let x0 = check.notes.iter().find(|n| n.0 == "x0").map_or(f64::NAN, |n| n.1);
    let pass = worst <= 1e-12 && check.pass && x0 <= 10.0;
    Ok(outcome(pass, format!("max relative residual {worst:.2e}; bracket holds from x0 = {x0:.4} on {} points", upper.len())))
}

fn additive_tail() -> levyheat::Result<Outcome> {
    let t = 1.0;
    let fc = FieldConfig::new(1, t, LevyMeasure::pareto(0.5), Mode::Additive, SpaceBox::centered(1, 0.5));
    let x = [0.0];
    let mut values = replicate(500, 100_000, |_, rng| -> levyheat::Result<f64> {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng)?;
        Ok(evaluate(&atoms, &fc, &x)?.values[0])
    })
    .into_iter()
    .collect::<levyheat::Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    // A replication with no contributing atom gives exactly zero; Hill only sees the upper tail.
    let zeros = values.partition_point(|&v| v <= 0.0);
    let k = default_hill_k(values.len());
    let hill = hill_estimator(&values[zeros..], k)?;
    let r = quantile(&values, 0.99);
    let empirical = values.iter().filter(|&&v| v > r).count() as f64 / values.len() as f64;
    let window_factor = window_kernel_power_integral(&fc.noise_domain()?, t, &x, 0.5) / t;
    let bound = 0.5 * t * window_factor * r.powf(-0.5);
    let pass = (0.4..=0.6).contains(&hill) && empirical >= bound;
    Ok(outcome(
        pass,
        format!("Hill(k={k}) {hill:.4} ({zeros} zero samples); P(Y>R) {empirical:.5} vs single-jump bound {bound:.5} at R = {r:.3}"),
    ))
}

fn multiplicative_tail() -> levyheat::Result<Outcome> {
    let fc = FieldConfig::new(1, 1.0, LevyMeasure::pareto(0.5), Mode::Multiplicative, SpaceBox::centered(1, 0.5));
    let x = [0.0];
    let values = replicate(600, 100_000, |_, rng| -> levyheat::Result<f64> {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng)?;
        Ok(evaluate(&atoms, &fc, &x)?.values[0])
    })
    .into_iter()
    .collect::<levyheat::Result<Vec<f64>>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let k = default_hill_k(values.len());
    let hill = hill_estimator(&values, k)?;
    let (lo, hi) = (quantile(&sorted, 0.9), quantile(&sorted, 0.9997));
    let grid: Vec<f64> = (0..25).map(|i| lo * (hi / lo).powf(i as f64 / 24.0)).collect();
    let curve = survival_curve(&values, &grid)?;
    let fit = slow_variation_fit(&curve, 0.5, SvForm::A { theta: 1.25 }, (lo, hi))?;
    let pass = (0.4..=0.6).contains(&hill) && fit.slope > 0.0 && fit.slope / fit.stderr > 2.0;
    Ok(outcome(
        pass,
        format!(
            "Hill(k={k}) {hill:.4}; form-A slope {:.4} ± {:.4} (t = {:.2}, {} points)",
            fit.slope,
            fit.stderr,
            fit.slope / fit.stderr,
            fit.points_used
        ),
    ))
}

fn truncation_convergence() -> levyheat::Result<Outcome> {
    let measure = LevyMeasure::dirac(vec![(0.5, 2.0), (2.0, 0.5)]);
    let mut base = FieldConfig::new(1, 1.0, measure, Mode::Multiplicative, SpaceBox::centered(1, 0.5));
    base.small_jump_cutoff = 0.5;
    let levels: Vec<FieldConfig> = (0..3)
        .map(|j| {
            let mut c = base.clone();
            let f = 1usize << j;
            c.chain_cap = Some(8 * f);
            c.picard_levels = Some(4 * f);
            c.picard_cone = Some(4.0 * f as f64);
            c
        })
        .collect();
    let x = [0.0];
    let rows = replicate(700, 10_000, |_, rng| -> levyheat::Result<Vec<f64>> {
        let atoms = sample_atoms(&base, base.jump_range(), rng)?;
        levels.iter().map(|c| Ok(evaluate(&atoms, c, &x)?.values[0].min(100.0))).collect()
    })
    .into_iter()
    .collect::<levyheat::Result<Vec<Vec<f64>>>>()?;
    let means: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
    let changes = [(means[1] - means[0]).abs(), (means[2] - means[1]).abs()];
    let last_rel = changes[1] / means[1];
    let pass = last_rel < 0.01 && changes[1] < changes[0];
    Ok(outcome(
        pass,
        format!(
            "means {:.5} / {:.5} / {:.5}; changes {:.3e} then {:.3e} (relative {last_rel:.2e})",
            means[0], means[1], means[2], changes[0], changes[1]
        ),
    ))
}

fn rho_grid() -> (Vec<f64>, f64) {
    let step = 0.01;
    ((0..=100).map(|i| i as f64 * step).collect(), step)
}

fn planted_dimensions() -> levyheat::Result<Outcome> {
    let (grid, step) = rho_grid();
    let mut pass = true;
    let mut detail = Vec::new();
    for (j, lambda) in [0.3, 0.6].into_iter().enumerate() {
        let set = planted_bernoulli(1, lambda, 16, &mut stream(800, j as u64))?;
        let counts = annulus_counts(&set, 1, 16)?;
        let mink = minkowski_dim(&counts).max_summary.unwrap_or(f64::NAN);
        let haus = hausdorff_dim_upper(&counts, &grid, 1.0)?.rho_star;
        let target = 1.0 - lambda;
        pass &= (mink - target).abs() <= 0.15
            && (haus - target).abs() <= 0.15
            && haus <= mink + step
            && haus >= mink - step;
        detail.push(format!("λ={lambda}: Minkowski {mink:.4}, Hausdorff upper {haus:.2} (target {target})"));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn peak_set_dimension() -> levyheat::Result<Outcome> {
    let radius = 12f64.exp().floor();
    let fc = FieldConfig::new(1, 1.0, LevyMeasure::pareto(1.0), Mode::Additive, SpaceBox::centered(1, radius));
    let mut dims = Vec::new();
    for seed in 0..3u64 {
        let field = sample_lattice_field(&fc, radius, &mut stream(900 + seed, 0))?;
        let set = extract_peak_set(PeakSource::Lattice(&field), PeakVariant::Gamma { gamma: 0.5 }, Norm::Euclidean)?;
        let counts = annulus_counts(&set, 1, 12)?;
        dims.push(minkowski_dim(&counts).max_summary.unwrap_or(f64::NAN));
    }
    let mean = dims.iter().sum::<f64>() / dims.len() as f64;
    let pass = (mean - 0.5).abs() <= 0.25;
    Ok(outcome(pass, format!("Minkowski per seed {dims:.4?}; mean {mean:.4} (target 0.5)")))
}

fn decomposition() -> levyheat::Result<Outcome> {
    // Density z^{-2} on (0, ∞), i.e. tail 1/z.
    let cases = [
        ("tail 1/z", LevyMeasure::piecewise(vec![(1.0, 1.0), (2.0, 0.25)])),
        ("Dirac (1,5)", LevyMeasure::dirac(vec![(1.0, 5.0)])),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, m) in cases {
        let dec = decompose(&m, 12)?;
        let k = dec.pieces.len();
        let max_mass = (0..k).map(|i| dec.piece_mass(i)).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for j in 0..100 {
            let z = 10f64.powf(-2.0 + 4.0 * j as f64 / 99.0);
            let sum: f64 = (0..k).map(|i| dec.piece_tail(i, z)).sum::<f64>() + dec.remainder_tail(z);
            worst = worst.max((sum - m.tail(z)).abs());
        }
        pass &= max_mass <= 2.0 + 1e-12 && worst <= 1e-9;
        detail.push(format!("{name}: {k} pieces, max mass {max_mass:.6}, max tail error {worst:.1e}"));
    }
    Ok(outcome(pass, detail.join("; ")))
}

/// `∫^∞ x^{d-1} (x^a (log x)^b)^{-e} dx < ∞` iff `ea > d`, or `ea = d` and `eb > 1`.
fn power_log_converges(a: f64, b: f64, d: f64, e: f64) -> bool {
    e * a > d || (e * a == d && e * b > 1.0)
}

fn classifier() -> levyheat::Result<Outcome> {
    let d = 1;
    let e = 2.0;
    let crit = d as f64 / e;
    let mut exact_ok = 0;
    let mut numeric_ok = 0;
    let mut total = 0;
    for da in [-0.3, -0.1, 0.0, 0.1, 0.3] {
        for b in [-1.0, 0.0, 0.5, 1.0, 2.0, 3.0] {
            let a = crit + da;
            let truth = if power_log_converges(a, b, d as f64, e) { Verdict::Converges } else { Verdict::Diverges };
            let gauge = GrowthGauge::new(a, b)?;
            exact_ok += usize::from(classify_integral(&gauge, d, IntegralExponent::TwoOverD) == truth);
            numeric_ok += usize::from(classify_numeric(|l| gauge.ln_value(l), d, e).verdict == truth);
            total += 1;
        }
    }
    let pass = exact_ok == total && numeric_ok == total;
    Ok(outcome(pass, format!("analytic {exact_ok}/{total}, numerical {numeric_ok}/{total}")))
}

fn lemma_audits() -> levyheat::Result<Outcome> {
    let triples = [
        (1.0, 1.0, 1.0),
        (0.5, 1.0, 1.0),
        (2.0, 1.0, 1.0),
        (1.0, 2.0, 1.0),
        (1.0, 1.0, 2.0),
        (0.5, 0.5, 1.0),
        (1.5, 1.0, 0.5),
        (1.0, 0.5, 2.0),
        (2.0, 2.0, 2.0),
        (0.75, 1.5, 1.0),
    ];
    let z_grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
    let mut gamma_ok = 0;
    for (a, b, g) in triples {
        gamma_ok += usize::from(gamma_series_bound_check(a, b, g, &z_grid)?.pass);
    }
    let mut pz_ok = 0;
    for i in 0..100u64 {
        let mut rng = stream(1000, i);
        let k = rng.random_range(1..=8);
        let law = DiscreteLaw::random(k, &mut rng);
        let alpha = rng.random_range(0.05..0.95);
        let delta = rng.random_range(0.05..0.95);
        let p = rng.random_range(1.1..4.0);
        pz_ok += usize::from(paley_zygmund_check(&law, alpha, delta, p)?.pass);
    }
    let mut dec_ok = 0;
    for (j, theta) in [0.05, 0.1].into_iter().enumerate() {
        dec_ok += usize::from(decoupling_check(&DecouplingToy::default(), theta, &[], 100_000, 1100 + j as u64)?.pass);
    }
    let pass = gamma_ok == 10 && pz_ok == 100 && dec_ok == 2;
    Ok(outcome(pass, format!("gamma series {gamma_ok}/10, Paley-Zygmund {pz_ok}/100, decoupling {dec_ok}/2")))
}

fn bounded_domain() -> levyheat::Result<Outcome> {
    let fc = FieldConfig::new(1, 1.0, LevyMeasure::pareto(1.0), Mode::Multiplicative, SpaceBox::centered(1, 1.0));
    let restricted = fc.window.scaled(0.5);
    let x = [0.0];
    let rows = replicate(1300, 100_000, |_, rng| -> levyheat::Result<(f64, f64)> {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng)?;
        let full = evaluate(&atoms, &fc, &x)?.values[0];
        let half = evaluate(&atoms.restricted_to(&restricted), &fc, &x)?.values[0];
        Ok((full, half))
    })
    .into_iter()
    .collect::<levyheat::Result<Vec<_>>>()?;
    let mut full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    full.sort_by(f64::total_cmp);
    let level = quantile(&full, 0.999);
    let n = rows.len() as f64;
    let diffs: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.0 > level)) - f64::from(u8::from(r.1 > level))).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = mean / (var / n).sqrt();
    let p_full = rows.iter().filter(|r| r.0 > level).count() as f64 / n;
    let p_half = rows.iter().filter(|r| r.1 > level).count() as f64 / n;
    let pass = p_half < p_full && z > 3.0;
    Ok(outcome(pass, format!("R = {level:.3}: full {p_full:.5}, halved {p_half:.5}, paired z = {z:.2}")))
}

fn main() {
    let criteria: [(&str, &str, Check); 13] = [
        ("A1", "iterated integral", iterated_integral),
        ("A2", "product of Pareto factors", product_pareto),
        ("A3", "backward chain law", chain_law),
        ("A4", "Lambert W", lambert),
        ("A5", "additive tail index", additive_tail),
        ("A6", "multiplicative tail shape", multiplicative_tail),
        ("A7", "truncation convergence", truncation_convergence),
        ("A8", "planted set dimensions", planted_dimensions),
        ("A9", "peak set dimension", peak_set_dimension),
        ("A10", "measure decomposition", decomposition),
        ("A11", "integral-test classifier", classifier),
        ("A12", "lemma audits", lemma_audits),
        ("A13", "bounded-domain contrast", bounded_domain),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("{id} {verdict} {name}: {} [{:.1} s]", result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
