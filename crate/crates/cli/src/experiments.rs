//! One function per experiment kind; each returns named artifacts.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use levyheat::analysis::{
    classify_integral, classify_numeric, quantile, tail_report, GrowthGauge, IntegralExponent, Verdict,
};
use levyheat::chains::lower_bound_scan;
use levyheat::dimension::{dimension_report, extract_peak_set, max_thick_shell, theta_thick_check, PeakKind, PeakSource};
use levyheat::levy::decompose;
use levyheat::mathfns::{
    decoupling_check, gamma_series_bound_check, iter_int_closed, iter_int_oracle, lambert_w, lambert_w_bounds_check,
    paley_zygmund_check, DecouplingToy, DiscreteLaw, LemmaCheckResult, OracleMethod,
};
use levyheat::rng::{replicate, stream};
use levyheat::solver::{cube_sup_table, evaluate, lattice_points, sample_atoms, FieldConfig, Layout};
use levyheat::LevyMeasure;
use rand::Rng;
use serde::Serialize;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Artifacts of a run, and whether its checks passed (verify only).
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub failure: Option<String>,
}

fn json<T: Serialize>(name: &str, value: &T) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    Artifact { name: name.into(), bytes }
}

fn text(name: &str, body: String) -> Artifact {
    Artifact { name: name.into(), bytes: body.into_bytes() }
}

fn csv_artifact<R: Serialize>(name: &str, rows: &[R]) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(Artifact { name: name.into(), bytes })
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let artifacts = match config.experiment {
        ExperimentKind::Simulate => simulate(config)?,
        ExperimentKind::Tail => tail(config)?,
        ExperimentKind::Dimension => dimension(config)?,
        ExperimentKind::Chains => chains(config)?,
        ExperimentKind::Classify => classify(config)?,
        ExperimentKind::BoundedDomainCompare => compare(config)?,
        ExperimentKind::Verify => return verify(config),
    };
    Ok(Outcome { artifacts, failure: None })
}

/// `(value, atom count)` of the field at the configured point, per replication.
fn point_samples(config: &ExperimentConfig, fc: &FieldConfig) -> Result<Vec<(f64, usize)>> {
    let x = config.point();
    let s = &config.sampling;
    let rows = replicate(s.seed, s.replications, |_, rng| -> levyheat::Result<(f64, usize)> {
        let atoms = sample_atoms(fc, fc.jump_range(), rng)?;
        Ok((evaluate(&atoms, fc, &x)?.values[0], atoms.len()))
    });
    Ok(rows.into_iter().collect::<levyheat::Result<Vec<_>>>()?)
}

#[derive(Serialize)]
struct SampleRow {
    replication: u64,
    value: f64,
    atoms: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    replications: usize,
    point: Vec<f64>,
    mean: f64,
    stderr: f64,
    quantiles: Vec<(f64, f64)>,
    max: f64,
    mean_atoms: f64,
    truncation: levyheat::solver::TruncationDescriptor,
    bias: levyheat::solver::BiasDescriptor,
}

fn simulate(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let fc = config.field_config(config.field.half_width)?;
    let rows = point_samples(config, &fc)?;
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted: Vec<f64> = rows.iter().map(|r| r.0).collect();
    sorted.sort_by(f64::total_cmp);
    let summary = SimulateSummary {
        replications: rows.len(),
        point: config.point(),
        mean,
        stderr: (var / n).sqrt(),
        quantiles: [0.5, 0.9, 0.99, 0.999].iter().map(|&q| (q, quantile(&sorted, q))).collect(),
        max: sorted[sorted.len() - 1],
        mean_atoms: rows.iter().map(|r| r.1 as f64).sum::<f64>() / n,
        truncation: fc.truncation(),
        bias: fc.bias(),
    };
    let table: Vec<SampleRow> =
        rows.iter().enumerate().map(|(i, r)| SampleRow { replication: i as u64, value: r.0, atoms: r.1 }).collect();
    Ok(vec![csv_artifact("samples.csv", &table)?, json("summary.json", &summary)])
}

/// Hill orders `10·1.25^j` up to half the sample.
fn default_k_grid(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut k = 10.0f64;
    while (k as usize) <= n / 2 {
        if out.last() != Some(&(k as usize)) {
            out.push(k as usize);
        }
        k *= 1.25;
    }
    out
}

/// 25 log-spaced levels between the empirical 0.9 and 0.9999 quantiles.
fn default_r_grid(sorted: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = (quantile(sorted, 0.9), quantile(sorted, 0.9999));
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Core(levyheat::Error::InsufficientData(
            "upper quantiles are not positive and distinct; set analysis.r_grid".into(),
        )));
    }
    Ok((0..25).map(|i| lo * (hi / lo).powf(i as f64 / 24.0)).collect())
}

#[derive(Serialize)]
struct HillRow {
    k: usize,
    alpha: f64,
}

fn tail(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let fc = config.field_config(config.field.half_width)?;
    let values: Vec<f64> = point_samples(config, &fc)?.into_iter().map(|r| r.0).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let a = &config.analysis;
    let k_grid = a.k_grid.clone().unwrap_or_else(|| default_k_grid(values.len()));
    let r_grid = match &a.r_grid {
        Some(g) => g.clone(),
        None => default_r_grid(&sorted)?,
    };
    let fit = a.fit.as_ref().map(|f| (f.alpha, f.form, (f.range[0], f.range[1])));
    let report = tail_report(&values, &k_grid, &r_grid, fit)?;
    let hill: Vec<HillRow> = report.hill.iter().map(|&(k, alpha)| HillRow { k, alpha }).collect();
    Ok(vec![
        json("tail_report.json", &report),
        csv_artifact("hill.csv", &hill)?,
        text("survival.csv", report.survival.to_csv()),
    ])
}

#[derive(Serialize)]
struct DimensionSummary {
    lattice_radius: f64,
    source: PeakKind,
    reports: Vec<levyheat::dimension::DimensionReport>,
    thickness: Vec<levyheat::dimension::ThickReport>,
    mean_minkowski: Option<f64>,
    mean_hausdorff_upper: f64,
}

fn dimension(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let a = &config.analysis;
    let d = config.field.d;
    let radius = (a.lattice_shell as f64).exp().floor();
    let fc = config.field_config(radius)?;
    let variant = a.peak.expect("validated");
    let rho_grid = a.rho_grid.clone().unwrap_or_else(|| (0..=100 * d).map(|i| i as f64 * 0.01).collect());
    let s = &config.sampling;
    let results = replicate(s.seed, s.replications, |_, rng| -> levyheat::Result<_> {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng)?;
        let set = match a.source {
            PeakKind::Lattice => {
                let mut field = evaluate(&atoms, &fc, &lattice_points(d, radius))?;
                field.meta.layout = Layout::Lattice;
                extract_peak_set(PeakSource::Lattice(&field), variant, a.norm)?
            }
            PeakKind::Cubes => {
                let table = cube_sup_table(&atoms, &fc, radius as i64, a.resolution)?;
                extract_peak_set(PeakSource::Cubes(&table), variant, a.norm)?
            }
        };
        let report = dimension_report(&set, a.shells[0], a.shells[1], &rho_grid, a.tail_threshold)?;
        // Thickness cubes overhang their shell, so the last shells may be unavailable.
        let thick = match a.thick_theta {
            Some(th) => {
                let hi = a.shells[1].min(max_thick_shell(set.radius, th));
                (hi >= a.shells[0]).then(|| theta_thick_check(&set, th, a.shells[0], hi)).transpose()?
            }
            None => None,
        };
        Ok((report, thick))
    });
    let results = results.into_iter().collect::<levyheat::Result<Vec<_>>>()?;
    let mut artifacts = Vec::new();
    for (i, (report, _)) in results.iter().enumerate() {
        artifacts.push(text(&format!("dimension_{i}.csv"), report.to_csv()));
    }
    let minks: Vec<f64> = results.iter().filter_map(|r| r.0.minkowski.max_summary).collect();
    let summary = DimensionSummary {
        lattice_radius: radius,
        source: a.source,
        mean_minkowski: (minks.len() == results.len()).then(|| minks.iter().sum::<f64>() / minks.len() as f64),
        mean_hausdorff_upper: results.iter().map(|r| r.0.hausdorff.rho_star).sum::<f64>() / results.len() as f64,
        thickness: results.iter().filter_map(|r| r.1.clone()).collect(),
        reports: results.into_iter().map(|r| r.0).collect(),
    };
    artifacts.push(json("dimension.json", &summary));
    Ok(artifacts)
}

fn chains(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let a = &config.analysis;
    let measure = config.levy.as_ref().expect("validated");
    let scan = lower_bound_scan(
        config.field.t,
        &config.point(),
        measure,
        a.threshold,
        a.n_range[0]..=a.n_range[1],
        config.sampling.replications,
        config.sampling.seed,
    )?;
    Ok(vec![text("chains.csv", scan.to_csv()), json("chains.json", &scan)])
}

#[derive(Serialize)]
struct ClassifyRow {
    a: f64,
    b: f64,
    exponent: f64,
    analytic: Verdict,
    numeric: Verdict,
    agree: bool,
}

fn classify_rows(gauges: &[[f64; 2]], d: usize, exponent: Option<f64>) -> Result<Vec<ClassifyRow>> {
    let exp = exponent.map_or(IntegralExponent::TwoOverD, IntegralExponent::Alpha);
    let e = exp.value(d);
    gauges
        .iter()
        .map(|&[a, b]| {
            let g = GrowthGauge::new(a, b)?;
            let analytic = classify_integral(&g, d, exp);
            let numeric = classify_numeric(|l| g.ln_value(l), d, e).verdict;
            Ok(ClassifyRow { a, b, exponent: e, analytic, numeric, agree: analytic == numeric })
        })
        .collect()
}

fn classify(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let rows = classify_rows(&config.analysis.gauges, config.field.d, config.analysis.exponent)?;
    Ok(vec![csv_artifact("classify.csv", &rows)?])
}

#[derive(Serialize)]
struct CompareRow {
    replication: u64,
    full: f64,
    restricted: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    replications: usize,
    full_domain: levyheat::solver::SpaceBox,
    restricted_domain: levyheat::solver::SpaceBox,
    quantile: f64,
    level: f64,
    p_full: f64,
    p_restricted: f64,
    /// Mean of the paired differences of exceedance indicators.
    difference: f64,
    stderr: f64,
    z: f64,
    lighter_at_3_sigma: bool,
}

/// Paired runs: the full run uses all atoms on the padded window, the
/// restricted run the same atoms inside the window scaled by `window_factor`.
fn compare(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let fc = config.field_config(config.field.half_width)?;
    let restricted_domain = fc.window.scaled(config.analysis.window_factor);
    let x = config.point();
    let s = &config.sampling;
    let rows = replicate(s.seed, s.replications, |_, rng| -> levyheat::Result<(f64, f64)> {
        let atoms = sample_atoms(&fc, fc.jump_range(), rng)?;
        let full = evaluate(&atoms, &fc, &x)?.values[0];
        let restricted = evaluate(&atoms.restricted_to(&restricted_domain), &fc, &x)?.values[0];
        Ok((full, restricted))
    });
    let rows = rows.into_iter().collect::<levyheat::Result<Vec<_>>>()?;
    let summary = paired_exceedance(&rows, config.analysis.quantile, fc.noise_domain()?, restricted_domain);
    let table: Vec<CompareRow> =
        rows.iter().enumerate().map(|(i, r)| CompareRow { replication: i as u64, full: r.0, restricted: r.1 }).collect();
    Ok(vec![csv_artifact("compare.csv", &table)?, json("compare.json", &summary)])
}

fn paired_exceedance(
    rows: &[(f64, f64)],
    q: f64,
    full_domain: levyheat::solver::SpaceBox,
    restricted_domain: levyheat::solver::SpaceBox,
) -> CompareSummary {
    let mut full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    full.sort_by(f64::total_cmp);
    let level = quantile(&full, q);
    let n = rows.len() as f64;
    let diffs: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.0 > level)) - f64::from(u8::from(r.1 > level))).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let stderr = (var / n).sqrt();
    let z = if stderr > 0.0 { mean / stderr } else if mean > 0.0 { f64::INFINITY } else { 0.0 };
    CompareSummary {
        replications: rows.len(),
        full_domain,
        restricted_domain,
        quantile: q,
        level,
        p_full: rows.iter().filter(|r| r.0 > level).count() as f64 / n,
        p_restricted: rows.iter().filter(|r| r.1 > level).count() as f64 / n,
        difference: mean,
        stderr,
        z,
        lighter_at_3_sigma: z > 3.0,
    }
}

#[derive(Serialize)]
struct VerifyReport {
    all_pass: bool,
    checks: Vec<LemmaCheckResult>,
}

fn named(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn lambert_checks() -> Result<Vec<LemmaCheckResult>> {
    let grid: Vec<f64> = (0..10_000).map(|i| 10f64.powf(-3.0 + 11.0 * i as f64 / 9999.0)).collect();
    let mut worst = 0.0f64;
    for &x in &grid {
        let w = lambert_w(x)?;
        worst = worst.max((w * w.exp() - x).abs() / x);
    }
    let residual =
        LemmaCheckResult::new("lambert_w_residual", named(&[("points", grid.len() as f64)]), vec![worst], vec![1e-12], worst <= 1e-12);
    let upper: Vec<f64> = grid.iter().copied().filter(|&x| x >= std::f64::consts::E).collect();
    Ok(vec![residual, lambert_w_bounds_check(&upper)?])
}

fn iter_int_check() -> Result<LemmaCheckResult> {
    let mut lhs = Vec::new();
    for n in 1..=3 {
        for alpha in [0.0, 0.5] {
            for beta in [0.0, 1.0] {
                for r in [2.0, 10.0] {
                    let closed = iter_int_closed(n, alpha, beta, r)?.0;
                    let quad = iter_int_oracle(n, alpha, beta, r, OracleMethod::Quadrature)?.value;
                    lhs.push((closed - quad).abs() / quad.abs());
                }
            }
        }
    }
    let rhs = vec![1e-6; lhs.len()];
    let pass = lhs.iter().all(|&e| e <= 1e-6);
    Ok(LemmaCheckResult::new("iterated_integral_closed_form", named(&[("cases", lhs.len() as f64)]), lhs, rhs, pass))
}

const GAMMA_TRIPLES: [(f64, f64, f64); 10] = [
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

fn decomposition_check(name: &str, measure: &LevyMeasure) -> Result<LemmaCheckResult> {
    let dec = decompose(measure, 12)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..dec.pieces.len() {
        lhs.push(dec.piece_mass(i));
        rhs.push(2.0 + 1e-12);
    }
    for j in 0..100 {
        let z = 10f64.powf(-2.0 + 4.0 * j as f64 / 99.0);
        let sum: f64 = (0..dec.pieces.len()).map(|i| dec.piece_tail(i, z)).sum::<f64>() + dec.remainder_tail(z);
        let want = measure.tail(z);
        lhs.push((sum - want).abs());
        rhs.push(1e-9 * want.max(1e-300));
    }
    let pass = lhs.iter().zip(&rhs).all(|(l, r)| l <= r);
    Ok(LemmaCheckResult::new(name, named(&[("pieces", dec.pieces.len() as f64)]), lhs, rhs, pass))
}

/// Gauges `x^a (log x)^b` around the critical power `d/e`.
pub fn classifier_truth_gauges(d: usize) -> Vec<[f64; 2]> {
    let crit = d as f64 / (2.0 / d as f64);
    let mut out = Vec::new();
    for da in [-0.3, -0.1, 0.0, 0.1, 0.3] {
        for b in [-1.0, 0.0, 0.5, 1.0, 2.0, 3.0] {
            out.push([crit + da, b]);
        }
    }
    out
}

fn verify(config: &ExperimentConfig) -> Result<Outcome> {
    let s = &config.sampling;
    let mut checks = lambert_checks()?;
    checks.push(iter_int_check()?);
    let z_grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
    for (a, b, g) in GAMMA_TRIPLES {
        checks.push(gamma_series_bound_check(a, b, g, &z_grid)?);
    }
    let mut pz_fail = Vec::new();
    for i in 0..100u64 {
        let mut rng = stream(s.seed, 1_000_000 + i);
        let k = rng.random_range(1..=8);
        let law = DiscreteLaw::random(k, &mut rng);
        let alpha = rng.random_range(0.05..0.95);
        let delta = rng.random_range(0.05..0.95);
        let p = rng.random_range(1.1..4.0);
        let c = paley_zygmund_check(&law, alpha, delta, p)?;
        if !c.pass {
            pz_fail.push(c);
        }
    }
    checks.push(LemmaCheckResult::new(
        "paley_zygmund_random_laws",
        named(&[("laws", 100.0)]),
        vec![pz_fail.len() as f64],
        vec![0.0],
        pz_fail.is_empty(),
    ));
    checks.extend(pz_fail);
    for (j, theta) in [0.05, 0.1].into_iter().enumerate() {
        checks.push(decoupling_check(&DecouplingToy::default(), theta, &[], s.replications, s.seed.wrapping_add(j as u64))?);
    }
    checks.push(decomposition_check("decomposition_inverse_square", &LevyMeasure::piecewise(vec![(1.0, 1.0), (2.0, 0.25)]))?);
    checks.push(decomposition_check("decomposition_single_atom", &LevyMeasure::dirac(vec![(1.0, 5.0)]))?);
    let rows = classify_rows(&classifier_truth_gauges(1), 1, None)?;
    let agree: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(!r.agree))).collect();
    let pass = agree.iter().all(|&v| v == 0.0);
    checks.push(LemmaCheckResult::new("integral_classifier_agreement", named(&[("gauges", rows.len() as f64)]), agree.clone(), vec![0.0; agree.len()], pass));

    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.lemma.clone()).collect();
    let report = VerifyReport { all_pass: failed.is_empty(), checks };
    let failure = (!failed.is_empty()).then(|| failed.join(", "));
    Ok(Outcome { artifacts: vec![json("verify.json", &report)], failure })
}
