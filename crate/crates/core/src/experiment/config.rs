//! Experiment configuration: TOML with dotted sections, merged over a
//! built-in preset.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AngleCoordinate, ArrayGeometry};
use crate::optimizer::OptimizerConfig;
use crate::statistics::{
    build_correlation, derive_scenario, Powers, ScatteringKind, ScatteringSpec, ScenarioStatistics,
};

const DESK: &str = r#"
[ris]
rows_h = 4
cols_v = 4
spacing = 0.5

[bs]
rows_h = 1
cols_v = 1
spacing = 0.5

[scattering.h]
kind = "gaussian"
azimuth_deg = 70.0
elevation_deg = -20.0
spread_deg = 10.0

[scattering.g]
kind = "gaussian"
azimuth_deg = -60.0
elevation_deg = -30.0
spread_deg = 5.0

[scattering.e]
kind = "gaussian"
azimuth_deg = -10.0
elevation_deg = 20.0
spread_deg = 20.0

[scattering.bs]
kind = "isotropic"

[training]
tau = 16
tau_c = 160

[powers]
snr_db = 15.0
sir_db = 5.0

[sweep]
variable = "snr_db"
values = [0.0, 10.0, 20.0, 30.0]

[mc]
rmse_trials = 1000
se_trials = 300
seed = 1
workers = 0
"#;

const PAPER: &str = r#"
[ris]
rows_h = 6
cols_v = 6

[training]
tau = 36
tau_c = 360
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows_h: usize,
    pub cols_v: usize,
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArrayConfig {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.rows_h, self.cols_v, self.spacing)
    }

    pub fn len(&self) -> usize {
        self.rows_h * self.cols_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringEntry {
    pub kind: ScatteringKind,
    #[serde(default)]
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: f64,
    #[serde(default)]
    pub spread_deg: f64,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl ScatteringEntry {
    pub fn spec(&self) -> Result<ScatteringSpec> {
        match self.kind {
            ScatteringKind::Isotropic => ScatteringSpec::isotropic(self.gain),
            ScatteringKind::TruncatedGaussian => ScatteringSpec::gaussian(
                AngleCoordinate::from_degrees(self.azimuth_deg, self.elevation_deg)?,
                self.spread_deg.to_radians(),
                self.gain,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    pub h: ScatteringEntry,
    pub g: ScatteringEntry,
    pub e: ScatteringEntry,
    pub bs: ScatteringEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub tau: usize,
    pub tau_c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub snr_db: f64,
    pub sir_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    SirDb,
    Tau,
    /// Square RIS sizes; the pilot length follows `τ = M`.
    RisElements,
    DeltaEDeg,
    OuterIter,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::SirDb => "sir_db",
            SweepVariable::Tau => "tau",
            SweepVariable::RisElements => "ris_elements",
            SweepVariable::DeltaEDeg => "delta_e_deg",
            SweepVariable::OuterIter => "outer_iter",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// LMMSE at the AO-optimized training phases.
    Mmse,
    /// LMMSE at the initializer (RMSE); default data phase `φ⁰` (SE).
    MmsePhi0,
    MmseRandomInit,
    Rsls,
    Ls,
    MmseNoEmi,
    RslsNoEmi,
    /// AO-optimized data phase after LMMSE estimation (SE).
    MmseAo,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mmse => "mmse",
            Method::MmsePhi0 => "mmse_phi0",
            Method::MmseRandomInit => "mmse_random_init",
            Method::Rsls => "rsls",
            Method::Ls => "ls",
            Method::MmseNoEmi => "mmse_no_emi",
            Method::RslsNoEmi => "rsls_no_emi",
            Method::MmseAo => "mmse_ao",
        }
    }

    pub fn rmse_defaults() -> Vec<Method> {
        vec![
            Method::Mmse,
            Method::MmsePhi0,
            Method::Rsls,
            Method::Ls,
            Method::MmseNoEmi,
            Method::RslsNoEmi,
        ]
    }

    pub fn se_defaults() -> Vec<Method> {
        vec![Method::MmseAo, Method::MmsePhi0]
    }

    pub fn supports_rmse(&self) -> bool {
        !matches!(self, Method::MmseAo)
    }

    pub fn supports_se(&self) -> bool {
        matches!(self, Method::MmseAo | Method::MmsePhi0)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub rmse_trials: usize,
    pub se_trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ris: ArrayConfig,
    pub bs: ArrayConfig,
    pub scattering: ScatteringConfig,
    pub training: TrainingConfig,
    pub powers: PowerConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub mc: MonteCarloConfig,
    #[serde(default)]
    pub output: Option<String>,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(e.to_string()))
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        Self::from_toml_str("", preset).expect("built-in presets are valid")
    }

    /// Parses `text` on top of `preset`; keys absent from `text` keep the
    /// preset values.
    pub fn from_toml_str(text: &str, preset: Preset) -> Result<Self> {
        let mut table = parse_table(DESK)?;
        if preset == Preset::Paper {
            merge(&mut table, parse_table(PAPER)?);
        }
        merge(&mut table, parse_table(text)?);
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, preset: Preset) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, preset)
    }

    pub fn validate(&self) -> Result<()> {
        self.ris.geometry()?;
        self.bs.geometry()?;
        for s in [
            &self.scattering.h,
            &self.scattering.g,
            &self.scattering.e,
            &self.scattering.bs,
        ] {
            s.spec()?;
        }
        if self.training.tau == 0 {
            return Err(Error::Validation("tau must be at least 1".into()));
        }
        if self.training.tau >= self.training.tau_c {
            return Err(Error::Validation(format!(
                "tau = {} must be below tau_c = {}",
                self.training.tau, self.training.tau_c
            )));
        }
        if self.mc.rmse_trials == 0 || self.mc.se_trials == 0 {
            return Err(Error::Validation("trial counts must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Validation("sweep range must be non-empty".into()));
        }
        for &v in &self.sweep.values {
            self.check_sweep_value(v)?;
        }
        self.optimizer.validate()
    }

    fn check_sweep_value(&self, v: f64) -> Result<()> {
        let integral = |v: f64| v.fract() == 0.0 && v >= 1.0 && v.is_finite();
        let bad = |msg: String| Err(Error::Validation(msg));
        match self.sweep.variable {
            SweepVariable::SnrDb | SweepVariable::SirDb if v.is_nan() || v == f64::NEG_INFINITY => {
                bad(format!("invalid power value {v}"))
            }
            SweepVariable::Tau if !integral(v) || v as usize >= self.training.tau_c => bad(
                format!("tau sweep value {v} must be an integer in [1, tau_c)"),
            ),
            SweepVariable::RisElements => {
                let side = v.sqrt().round();
                if !integral(v) || side * side != v {
                    return bad(format!("RIS size {v} must be a perfect square"));
                }
                if v as usize >= self.training.tau_c {
                    return bad(format!("RIS size {v} needs tau = M below tau_c"));
                }
                Ok(())
            }
            SweepVariable::DeltaEDeg if !(v > 0.0 && v.is_finite()) => {
                bad(format!("spread {v} must be positive"))
            }
            SweepVariable::OuterIter if !integral(v) => {
                bad(format!("iteration count {v} must be a positive integer"))
            }
            _ => Ok(()),
        }
    }

    /// Configuration with the sweep variable set to `value`.
    pub fn at_sweep_point(&self, value: f64) -> Result<Self> {
        self.check_sweep_value(value)?;
        let mut cfg = self.clone();
        match self.sweep.variable {
            SweepVariable::SnrDb => cfg.powers.snr_db = value,
            SweepVariable::SirDb => cfg.powers.sir_db = value,
            SweepVariable::Tau => cfg.training.tau = value as usize,
            SweepVariable::RisElements => {
                let side = value.sqrt().round() as usize;
                cfg.ris.rows_h = side;
                cfg.ris.cols_v = side;
                cfg.training.tau = side * side;
            }
            SweepVariable::DeltaEDeg => cfg.scattering.e.spread_deg = value,
            SweepVariable::OuterIter => cfg.optimizer.max_outer = value as usize,
        }
        Ok(cfg)
    }

    pub fn powers(&self) -> Powers {
        Powers::from_db(self.powers.snr_db, self.powers.sir_db)
    }

    pub fn scenario(&self) -> Result<ScenarioStatistics> {
        let ris = self.ris.geometry()?;
        let bs = self.bs.geometry()?;
        let r_h = build_correlation(&ris, &self.scattering.h.spec()?)?;
        let r_g = build_correlation(&ris, &self.scattering.g.spec()?)?;
        let r_e = build_correlation(&ris, &self.scattering.e.spec()?)?;
        let r_gp = build_correlation(&bs, &self.scattering.bs.spec()?)?;
        derive_scenario(r_h, r_g, r_gp, r_e, self.powers())
    }

    pub fn rmse_methods(&self) -> Result<Vec<Method>> {
        let methods = self.methods.clone().unwrap_or_else(Method::rmse_defaults);
        if let Some(m) = methods.iter().find(|m| !m.supports_rmse()) {
            return Err(Error::Config(format!("method '{m}' is not an RMSE method")));
        }
        Ok(methods)
    }

    pub fn se_methods(&self) -> Result<Vec<Method>> {
        let methods = self.methods.clone().unwrap_or_else(Method::se_defaults);
        if let Some(m) = methods.iter().find(|m| !m.supports_se()) {
            return Err(Error::Config(format!("method '{m}' is not an SE method")));
        }
        Ok(methods)
    }
}
