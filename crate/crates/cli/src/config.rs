//! Experiment configuration: one TOML document with fixed tables.

use crate::error::{CliError, Result};
use levyheat::analysis::SvForm;
use levyheat::dimension::{Norm, PeakKind, PeakVariant};
use levyheat::solver::{FieldConfig, Mode, SpaceBox};
use levyheat::LevyMeasure;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Tail,
    Dimension,
    Chains,
    Verify,
    Classify,
    BoundedDomainCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levy: Option<LevyMeasure>,
    #[serde(default)]
    pub field: FieldTable,
    #[serde(default)]
    pub sampling: SamplingTable,
    #[serde(default)]
    pub analysis: AnalysisTable,
    #[serde(default)]
    pub output: OutputTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldTable {
    pub d: usize,
    pub t: f64,
    pub mode: Mode,
    /// Evaluation window `[-half_width, half_width]^d`.
    pub half_width: f64,
    /// Evaluation point; the origin when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub small_jump_cutoff: f64,
    pub margin_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_cone: Option<f64>,
    pub compensate_small: bool,
}

impl Default for FieldTable {
    fn default() -> Self {
        FieldTable {
            d: 1,
            t: 1.0,
            mode: Mode::Additive,
            half_width: 0.5,
            point: None,
            small_jump_cutoff: 1.0,
            margin_tolerance: 1e-6,
            chain_cap: None,
            picard_levels: None,
            picard_cone: None,
            compensate_small: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingTable {
    pub replications: u64,
    pub seed: u64,
    /// Thread budget; the command line and environment take precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SamplingTable {
    fn default() -> Self {
        SamplingTable { replications: 1000, seed: 0, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTable {
    pub alpha: f64,
    pub form: SvForm,
    pub range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitTable>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak: Option<PeakVariant>,
    pub norm: Norm,
    pub source: PeakKind,
    /// Grid points per cube edge for cube suprema.
    pub resolution: usize,
    /// Fields are evaluated on `|x|_∞ ≤ e^{lattice_shell}`.
    pub lattice_shell: u32,
    pub shells: [u32; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    pub tail_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thick_theta: Option<f64>,

    /// Exceedance level for the chain scan.
    pub threshold: f64,
    pub n_range: [usize; 2],

    /// Gauges `x^a (log x)^b` as `[a, b]`.
    pub gauges: Vec<[f64; 2]>,
    /// Integral exponent; `2/d` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,

    /// Scale factor of the restricted noise window.
    pub window_factor: f64,
    /// Quantile of the full run used as the common level.
    pub quantile: f64,
}

impl Default for AnalysisTable {
    fn default() -> Self {
        AnalysisTable {
            r_grid: None,
            k_grid: None,
            fit: None,
            peak: None,
            norm: Norm::Euclidean,
            source: PeakKind::Lattice,
            resolution: 5,
            lattice_shell: 8,
            shells: [1, 8],
            rho_grid: None,
            tail_threshold: 1.0,
            thick_theta: None,
            threshold: 10.0,
            n_range: [1, 6],
            gauges: Vec::new(),
            exponent: None,
            window_factor: 0.5,
            quantile: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("simulate", include_str!("presets/simulate.toml")),
    ("tail", include_str!("presets/tail.toml")),
    ("dimension", include_str!("presets/dimension.toml")),
    ("chains", include_str!("presets/chains.toml")),
    ("verify", include_str!("presets/verify.toml")),
    ("classify", include_str!("presets/classify.toml")),
    ("bounded-domain-compare", include_str!("presets/bounded_domain_compare.toml")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
        CliError::Config(format!("unknown preset '{name}'; available: {}", names.join(", ")))
    })
}

/// `line N: ` for the first assignment to `key`, or nothing when absent.
fn anchor(source: &str, key: &str) -> String {
    source
        .lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or_else(String::new, |i| format!("line {}: ", i + 1))
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the line of the offending entry.
    pub fn parse(source: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        config.validate(source)?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, source: &str) -> Result<()> {
        let fail = |key: &str, msg: String| Err(CliError::Config(format!("{}{key}: {msg}", anchor(source, key))));
        let f = &self.field;
        let a = &self.analysis;
        let needs_levy = !matches!(self.experiment, ExperimentKind::Verify | ExperimentKind::Classify);
        match &self.levy {
            None if needs_levy => return Err(CliError::Config("missing [levy] table".into())),
            Some(m) => {
                if let Err(e) = m.validate() {
                    return fail("kind", e.to_string());
                }
            }
            None => {}
        }
        if f.d == 0 || f.d > 3 {
            return fail("d", format!("dimension must be 1, 2 or 3, got {}", f.d));
        }
        if !(f.t > 0.0 && f.t.is_finite()) {
            return fail("t", format!("time must be positive, got {}", f.t));
        }
        if !(f.half_width > 0.0) {
            return fail("half_width", "must be positive".into());
        }
        if let Some(p) = &f.point {
            if p.len() != f.d {
                return fail("point", format!("expected {} coordinates, got {}", f.d, p.len()));
            }
            if p.iter().any(|v| v.abs() > f.half_width) {
                return fail("point", "lies outside the evaluation window".into());
            }
        }
        if self.sampling.replications == 0 {
            return fail("replications", "must be at least 1".into());
        }
        if self.sampling.threads == Some(0) {
            return fail("threads", "must be at least 1".into());
        }
        if let Some(g) = &a.r_grid {
            if g.is_empty() || g.windows(2).any(|w| !(w[1] > w[0])) {
                return fail("r_grid", "must be nonempty and strictly increasing".into());
            }
        }
        if let Some(k) = &a.k_grid {
            if k.contains(&0) {
                return fail("k_grid", "entries must be positive".into());
            }
        }
        match self.experiment {
            ExperimentKind::Dimension => {
                if a.peak.is_none() {
                    return Err(CliError::Config("dimension experiment needs an [analysis.peak] table".into()));
                }
                if a.shells[0] == 0 || a.shells[0] > a.shells[1] || a.shells[1] > a.lattice_shell {
                    return fail("shells", "need 1 ≤ first ≤ last ≤ lattice_shell".into());
                }
                if a.resolution < 2 {
                    return fail("resolution", "must be at least 2".into());
                }
                let points = (2.0 * (a.lattice_shell as f64).exp() + 1.0).powi(f.d as i32);
                if points > 5e7 {
                    return fail("lattice_shell", format!("{points:.0} lattice points exceed the supported size"));
                }
            }
            ExperimentKind::Chains => {
                if a.n_range[0] == 0 || a.n_range[0] > a.n_range[1] {
                    return fail("n_range", "need 1 ≤ first ≤ last".into());
                }
                if !(a.threshold > 1.0) {
                    return fail("threshold", "must exceed 1".into());
                }
            }
            ExperimentKind::Classify => {
                if a.gauges.is_empty() {
                    return fail("gauges", "at least one gauge is required".into());
                }
            }
            ExperimentKind::BoundedDomainCompare => {
                if !(a.window_factor > 0.0 && a.window_factor < 1.0) {
                    return fail("window_factor", "must lie in (0,1)".into());
                }
                if !(a.quantile > 0.0 && a.quantile < 1.0) {
                    return fail("quantile", "must lie in (0,1)".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn point(&self) -> Vec<f64> {
        self.field.point.clone().unwrap_or_else(|| vec![0.0; self.field.d])
    }

    /// Solver configuration with the evaluation window `[-half, half]^d`.
    pub fn field_config(&self, half: f64) -> Result<FieldConfig> {
        let f = &self.field;
        let measure = self.levy.clone().ok_or_else(|| CliError::Config("missing [levy] table".into()))?;
        let mut c = FieldConfig::new(f.d, f.t, measure, f.mode, SpaceBox::centered(f.d, half));
        c.small_jump_cutoff = f.small_jump_cutoff;
        c.margin_tolerance = f.margin_tolerance;
        c.chain_cap = f.chain_cap;
        c.picard_levels = f.picard_levels;
        c.picard_cone = f.picard_cone;
        c.compensate_small = f.compensate_small;
        c.seed = self.sampling.seed;
        c.validate()?;
        Ok(c)
    }
}
