//! JSON scenario files and their resolution into concrete model objects.
//!
//! A scenario names a chain, one soliton, a qubit and a time window. Optional blocks
//! control the tuning rule, the chain integration and the output directory. Frequencies
//! and times in the `qubit` and `time` blocks may be given in units of the transit time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use soliton_qubit::chain::ChainParams;
use soliton_qubit::closedform::Branch;
use soliton_qubit::qubit::{solve_dxy_for_target, tune_dz, DetuningMode, QubitParams, TuneResult};
use soliton_qubit::solitons::{SolitonKind, SolitonSpec};
use soliton_qubit::Error;

use crate::failure::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub chain: ChainBlock,
    pub soliton: SolitonBlock,
    #[serde(default)]
    pub qubit: QubitBlock,
    #[serde(default)]
    pub drive: DriveBlock,
    #[serde(default)]
    pub time: TimeBlock,
    #[serde(default)]
    pub chain_integration: ChainIntegrationBlock,
    #[serde(default)]
    pub tuning: Option<TuningBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "one")]
    pub dx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Bright,
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonBlock {
    pub kind: Kind,
    pub k: f64,
    #[serde(rename = "L")]
    pub width: f64,
    /// Centre at `t = 0`.
    #[serde(default)]
    pub x0: f64,
}

/// Either `dxy` or `omega0_T`, and either `H0` or `delta0_T`, may be given. With a
/// tuning block, `dxy`, `omega0_T` and `dz` are optional overrides of the tuned values.
///
/// `omega0_T` is the drive amplitude times `T` (`Omega_b0 T` or `Omega_d0 T`).
/// `delta0_T` is the asymptotic detuning times `T`, reached by adjusting `H0`, so it
/// needs `mu != nu`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitBlock {
    #[serde(default)]
    pub dxy: Option<f64>,
    #[serde(default)]
    pub omega0_T: Option<f64>,
    #[serde(default)]
    pub dz: Option<f64>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default, rename = "H0")]
    pub h0: Option<f64>,
    #[serde(default)]
    pub delta0_T: Option<f64>,
    #[serde(default)]
    pub xq: f64,
}

impl Default for QubitBlock {
    fn default() -> Self {
        QubitBlock {
            dxy: None,
            omega0_T: None,
            dz: None,
            mu: 1.0,
            nu: 1.0,
            h0: None,
            delta0_T: None,
            xq: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Analytic,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Taylor,
}

impl From<Mode> for DetuningMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => DetuningMode::Exact,
            Mode::Taylor => DetuningMode::Taylor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Times in units of `T`.
    #[default]
    Transit,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    #[serde(default = "minus_eight")]
    pub t_i: f64,
    #[serde(default = "eight")]
    pub t_f: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub units: Units,
}

impl Default for TimeBlock {
    fn default() -> Self {
        TimeBlock {
            t_i: minus_eight(),
            t_f: eight(),
            dt: default_dt(),
            units: Units::Transit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    #[default]
    Soliton,
    KinkAntikink,
}

/// Lattice integration settings. Times here are always absolute.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainIntegrationBlock {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<usize>,
    /// End of a `chain run`, which starts at `t = 0`.
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub initial: Initial,
    /// Keep every n-th snapshot file.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningBlock {
    pub eta: f64,
    #[serde(default = "one")]
    pub xi: f64,
    #[serde(default)]
    pub p: i32,
    #[serde(default = "plus_one")]
    pub sign: i32,
    /// Include the `d_z1` correction.
    #[serde(default = "yes")]
    pub correction: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn plus_one() -> i32 {
    1
}

fn yes() -> bool {
    true
}

fn eight() -> f64 {
    8.0
}

fn minus_eight() -> f64 {
    -8.0
}

fn default_dt() -> f64 {
    0.005
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

/// A scenario with every parameter made concrete.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ChainParams,
    pub spec: SolitonSpec,
    pub qubit: QubitParams,
    pub mode: DetuningMode,
    pub source: Source,
    pub transit_time: Option<f64>,
    /// Absolute window and output step.
    pub t_i: f64,
    pub t_f: f64,
    pub dt: f64,
    pub tune: Option<TuneResult>,
    pub chain: ChainIntegrationBlock,
}

impl ScenarioConfig {
    pub fn chain_params(&self) -> Result<ChainParams, CliError> {
        let c = &self.chain;
        Ok(ChainParams::new(c.j, c.a, c.s, c.n)?.with_spacing(c.dx)?)
    }

    pub fn soliton(&self, params: &ChainParams) -> Result<SolitonSpec, CliError> {
        let s = &self.soliton;
        let kind = match s.kind {
            Kind::Bright => SolitonKind::Bright,
            Kind::Dark => SolitonKind::Dark,
        };
        Ok(SolitonSpec::new(kind, s.k, s.width, s.x0, params)?)
    }

    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let params = self.chain_params()?;
        let spec = self.soliton(&params)?;
        let tt = spec.transit_time();
        let needs_t = |what: &str| -> Result<f64, CliError> {
            tt.ok_or_else(|| CliError::validation(format!("{what} needs a moving soliton: {}", Error::StaticSoliton)))
        };
        let qb = &self.qubit;
        let mut q = QubitParams::new(qb.dxy.unwrap_or(0.0), qb.dz.unwrap_or(0.0))
            .with_field(qb.mu, qb.nu, qb.h0.unwrap_or(0.0))
            .at(qb.xq);

        // Keys given explicitly in the qubit block win over the tuning rule.
        let mut tune = None;
        if let Some(tb) = &self.tuning {
            let branch = Branch::from_sign(tb.sign)?;
            if qb.dxy.is_none() {
                q.dxy = solve_dxy_for_target(tb.xi, tb.p, branch, &spec, params.s)?;
            }
            let t = tune_dz(&spec, &params, &q, tb.eta)?;
            if qb.dz.is_none() {
                q.dz = if tb.correction { t.dz() } else { t.dz0 };
            }
            tune = Some(t);
        }
        if let Some(w) = qb.omega0_T {
            if qb.dxy.is_some() {
                return Err(CliError::validation("give qubit.dxy or qubit.omega0_T, not both"));
            }
            q.dxy = dxy_for_amplitude(&spec, params.s, w / needs_t("qubit.omega0_T")?);
        }
        if let Some(d) = qb.delta0_T {
            if qb.h0.is_some() {
                return Err(CliError::validation("give qubit.H0 or qubit.delta0_T, not both"));
            }
            q.h0 = field_for_detuning(&spec, &q, params.s, d / needs_t("qubit.delta0_T")?)?;
        }
        q.validate()?;

        let scale = match self.time.units {
            Units::Transit => needs_t("time.units = transit")?,
            Units::Absolute => 1.0,
        };
        let time = &self.time;
        if !(time.dt.is_finite() && time.dt > 0.0) {
            return Err(CliError::validation(format!("time.dt must be positive, got {}", time.dt)));
        }
        if time.t_f <= time.t_i {
            return Err(CliError::validation("time.t_f must exceed time.t_i"));
        }
        Ok(Scenario {
            params,
            spec,
            qubit: q,
            mode: self.drive.mode.into(),
            source: self.drive.source,
            transit_time: tt,
            t_i: time.t_i * scale,
            t_f: time.t_f * scale,
            dt: time.dt * scale,
            tune,
            chain: self.chain_integration.clone(),
        })
    }
}

/// `d_xy` giving asymptotic drive amplitude `omega0` (`Omega_b0` or `Omega_d0`).
pub fn dxy_for_amplitude(spec: &SolitonSpec, s: f64, omega0: f64) -> f64 {
    match spec.kind() {
        SolitonKind::Bright => -omega0 / (s * spec.amplitude()),
        SolitonKind::Dark => omega0 / (s * spec.amplitude() * spec.velocity().signum()),
    }
}

/// `H0` giving asymptotic detuning `delta0 = (mu - nu) H0 - d_z S + omega`.
pub fn field_for_detuning(spec: &SolitonSpec, q: &QubitParams, s: f64, delta0: f64) -> Result<f64, CliError> {
    let dm = q.mu - q.nu;
    if dm == 0.0 {
        return Err(CliError::validation("qubit.delta0_T needs mu != nu"));
    }
    Ok((delta0 + q.dz * s - spec.frequency()) / dm)
}

impl Scenario {
    pub fn chain_dt(&self) -> f64 {
        self.chain.dt.unwrap_or_else(|| self.params.default_dt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Final,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / last)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    pub parameter: String,
    pub range: Range,
    #[serde(default)]
    pub reduction: Reduction,
}

/// Parameters a sweep can vary. Each one overrides the matching key of the base scenario.
pub const SWEEP_PARAMETERS: &[&str] = &[
    "dxy", "omega0_T", "dz", "H0", "delta0_T", "eta", "xi", "k", "L", "x0", "xq",
];

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.range.count < 2 {
            return Err(CliError::validation(format!("range.count must be at least 2, got {}", self.range.count)));
        }
        if !(self.range.start.is_finite() && self.range.stop.is_finite()) {
            return Err(CliError::validation("range bounds must be finite"));
        }
        if !SWEEP_PARAMETERS.contains(&self.parameter.as_str()) {
            return Err(CliError::validation(format!(
                "unknown sweep parameter `{}`; expected one of {}",
                self.parameter,
                SWEEP_PARAMETERS.join(", ")
            )));
        }
        if matches!(self.parameter.as_str(), "eta" | "xi") && self.base.tuning.is_none() {
            return Err(CliError::validation(format!("sweeping `{}` needs a tuning block", self.parameter)));
        }
        Ok(())
    }

    /// Base scenario with the swept parameter set to `value`.
    pub fn scenario_at(&self, value: f64) -> ScenarioConfig {
        let mut c = self.base.clone();
        let q = &mut c.qubit;
        match self.parameter.as_str() {
            "dxy" => {
                q.dxy = Some(value);
                q.omega0_T = None;
            }
            "omega0_T" => {
                q.omega0_T = Some(value);
                q.dxy = None;
            }
            "dz" => q.dz = Some(value),
            "H0" => {
                q.h0 = Some(value);
                q.delta0_T = None;
            }
            "delta0_T" => {
                q.delta0_T = Some(value);
                q.h0 = None;
            }
            "xq" => q.xq = value,
            "eta" => c.tuning.as_mut().expect("validated").eta = value,
            "xi" => c.tuning.as_mut().expect("validated").xi = value,
            "k" => c.soliton.k = value,
            "L" => c.soliton.width = value,
            "x0" => c.soliton.x0 = value,
            other => unreachable!("unvalidated sweep parameter {other}"),
        }
        c
    }
}
