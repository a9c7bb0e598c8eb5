use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvmdi::protocol::DEFAULT_LOSS_DB_PER_KM;
use cvmdi::{Attack, CeConvention, Geometry, Scenario, Scheme, TpsChoice};
use serde::{Deserialize, Serialize};

use crate::CliError;

const DEFAULT_V: f64 = 40.0;
const DEFAULT_V_SYMMETRIC: f64 = 1e4;
const DEFAULT_EPS: f64 = 0.002;
const DEFAULT_BETA: f64 = 0.95;
const DEFAULT_DMAX_KM: f64 = 100.0;
const DEFAULT_SEED: u64 = 42;
const DEFAULT_SAMPLES: u64 = 1_000_000;

/// Key-rate curves for CV-MDI QKD with virtual photon subtraction.
#[derive(Debug, Parser)]
#[command(name = "cvmdi", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Key rate against total distance.
    KeyrateCurve,
    /// Tolerable excess noise against total distance.
    NoiseCurve,
    /// Key rate over the T_PS grid at one distance, with the optimum.
    OptimalTps,
    /// Subtraction success probability against T_PS.
    SuccessProb,
    /// Monte Carlo check of the post-selection against closed forms.
    McVerify,
    /// Largest distance with a usable key rate.
    MaxDistance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KeyrateCurve => "keyrate-curve",
            Command::NoiseCurve => "noise-curve",
            Command::OptimalTps => "optimal-tps",
            Command::SuccessProb => "success-prob",
            Command::McVerify => "mc-verify",
            Command::MaxDistance => "max-distance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    None,
    Alice,
    Bob,
    Both,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::None => Scheme::None,
            SchemeArg::Alice => Scheme::AliceOnly,
            SchemeArg::Bob => Scheme::BobOnly,
            SchemeArg::Both => Scheme::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackArg {
    Independent,
    NegativeEpr,
}

impl From<AttackArg> for Attack {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::Independent => Attack::Independent,
            AttackArg::NegativeEpr => Attack::NegativeEpr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryArg {
    ExtremeAsymmetric,
    Symmetric,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::ExtremeAsymmetric => Geometry::ExtremeAsymmetric,
            GeometryArg::Symmetric => Geometry::Symmetric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    AsPrinted,
    SingleFactor,
}

impl From<ConventionArg> for CeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::AsPrinted => CeConvention::AsPrinted,
            ConventionArg::SingleFactor => CeConvention::SingleFactor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// `T_PS` as given on the command line or in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TpsArg {
    Value(f64),
    Keyword(TpsKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpsKeyword {
    Optimal,
}

impl From<TpsArg> for TpsChoice {
    fn from(t: TpsArg) -> Self {
        match t {
            TpsArg::Value(x) => TpsChoice::Fixed(x),
            TpsArg::Keyword(TpsKeyword::Optimal) => TpsChoice::Optimal,
        }
    }
}

fn parse_tps(s: &str) -> Result<TpsArg, String> {
    if s.eq_ignore_ascii_case("optimal") {
        return Ok(TpsArg::Keyword(TpsKeyword::Optimal));
    }
    s.parse::<f64>()
        .map(TpsArg::Value)
        .map_err(|_| format!("expected a number or `optimal`, got `{s}`"))
}

/// Every setting is optional here so that flags can be layered over a
/// config file, which is in turn layered over the defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long, global = true, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Photons subtracted by each subtracting party.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Beam-splitter transmittance, or `optimal`.
    #[arg(long, global = true, value_parser = parse_tps, value_name = "T|optimal")]
    pub tps: Option<TpsArg>,
    /// Alice's TMSV variance (SNU).
    #[arg(long, global = true)]
    pub va: Option<f64>,
    /// Bob's TMSV variance (SNU).
    #[arg(long, global = true)]
    pub vb: Option<f64>,
    /// Excess noise on each link (SNU).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Reconciliation efficiency.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub attack: Option<AttackArg>,
    #[arg(long, global = true, value_enum)]
    pub geometry: Option<GeometryArg>,
    /// Fiber loss in dB/km.
    #[arg(long, global = true)]
    pub loss: Option<f64>,
    #[arg(long, global = true)]
    pub dmin: Option<f64>,
    #[arg(long, global = true)]
    pub dmax: Option<f64>,
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Total distance for single-point commands (km).
    #[arg(long, global = true)]
    pub distance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub ce_convention: Option<ConventionArg>,
    /// Re-optimize T_PS at every trial noise level in noise curves.
    #[arg(long, global = true, value_name = "BOOL")]
    pub reoptimize: Option<bool>,
}

impl Options {
    /// Fills every unset field from `lower`.
    fn or(self, lower: Options) -> Options {
        Options {
            config: self.config.or(lower.config),
            scheme: self.scheme.or(lower.scheme),
            k: self.k.or(lower.k),
            tps: self.tps.or(lower.tps),
            va: self.va.or(lower.va),
            vb: self.vb.or(lower.vb),
            eps: self.eps.or(lower.eps),
            beta: self.beta.or(lower.beta),
            attack: self.attack.or(lower.attack),
            geometry: self.geometry.or(lower.geometry),
            loss: self.loss.or(lower.loss),
            dmin: self.dmin.or(lower.dmin),
            dmax: self.dmax.or(lower.dmax),
            step: self.step.or(lower.step),
            distance: self.distance.or(lower.distance),
            format: self.format.or(lower.format),
            out: self.out.or(lower.out),
            seed: self.seed.or(lower.seed),
            samples: self.samples.or(lower.samples),
            ce_convention: self.ce_convention.or(lower.ce_convention),
            reoptimize: self.reoptimize.or(lower.reoptimize),
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub scheme: SchemeArg,
    pub k: u32,
    pub tps: TpsArg,
    pub va: f64,
    pub vb: f64,
    pub eps: f64,
    pub beta: f64,
    pub attack: AttackArg,
    pub geometry: GeometryArg,
    pub loss: f64,
    pub dmin: f64,
    pub dmax: f64,
    pub step: f64,
    pub distance: f64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub samples: u64,
    pub ce_convention: ConventionArg,
    pub reoptimize: bool,
}

fn read_config_file(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("--config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::validation("--config", format!("{}: {e}", path.display())))
}

fn check(ok: bool, flag: &'static str, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::validation(flag, msg()))
    }
}

impl RunConfig {
    /// Applies config file and defaults under the parsed flags, then
    /// validates the result.
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.options.config {
            Some(path) => read_config_file(path)?,
            None => Options::default(),
        };
        let o = cli.options.or(file);
        let geometry = o.geometry.unwrap_or(GeometryArg::ExtremeAsymmetric);
        let default_v = match geometry {
            GeometryArg::ExtremeAsymmetric => DEFAULT_V,
            GeometryArg::Symmetric => DEFAULT_V_SYMMETRIC,
        };
        let cfg = RunConfig {
            command: cli.command,
            scheme: o.scheme.unwrap_or(SchemeArg::None),
            k: o.k.unwrap_or(1),
            tps: o.tps.unwrap_or(TpsArg::Keyword(TpsKeyword::Optimal)),
            va: o.va.unwrap_or(default_v),
            vb: o.vb.unwrap_or(default_v),
            eps: o.eps.unwrap_or(DEFAULT_EPS),
            beta: o.beta.unwrap_or(DEFAULT_BETA),
            attack: o.attack.unwrap_or(AttackArg::Independent),
            geometry,
            loss: o.loss.unwrap_or(DEFAULT_LOSS_DB_PER_KM),
            dmin: o.dmin.unwrap_or(0.0),
            dmax: o.dmax.unwrap_or(DEFAULT_DMAX_KM),
            step: o.step.unwrap_or(1.0),
            distance: o.distance.unwrap_or(0.0),
            format: o.format.unwrap_or(match cli.command {
                Command::McVerify => Format::Json,
                _ => Format::Csv,
            }),
            out: o.out,
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            samples: o.samples.unwrap_or(DEFAULT_SAMPLES),
            ce_convention: o.ce_convention.unwrap_or(ConventionArg::AsPrinted),
            reoptimize: o.reoptimize.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        check(self.va > 1.0 && self.va.is_finite(), "--va", || {
            format!("must be finite and > 1, got {}", self.va)
        })?;
        check(self.vb > 1.0 && self.vb.is_finite(), "--vb", || {
            format!("must be finite and > 1, got {}", self.vb)
        })?;
        check(self.k <= cvmdi::photon_subtraction::MAX_SUBTRACTED, "--k", || {
            format!(
                "at most {} photons, got {}",
                cvmdi::photon_subtraction::MAX_SUBTRACTED,
                self.k
            )
        })?;
        if let TpsArg::Value(t) = self.tps {
            check(t > 0.0 && t <= 1.0, "--tps", || format!("must lie in (0, 1], got {t}"))?;
        }
        check(self.eps >= 0.0 && self.eps.is_finite(), "--eps", || {
            format!("must be finite and >= 0, got {}", self.eps)
        })?;
        check(self.beta > 0.0 && self.beta <= 1.0, "--beta", || {
            format!("must lie in (0, 1], got {}", self.beta)
        })?;
        check(self.loss > 0.0 && self.loss.is_finite(), "--loss", || {
            format!("must be finite and > 0, got {}", self.loss)
        })?;
        check(self.dmin >= 0.0 && self.dmin.is_finite(), "--dmin", || {
            format!("must be finite and >= 0, got {}", self.dmin)
        })?;
        check(self.dmax >= self.dmin && self.dmax.is_finite(), "--dmax", || {
            format!("must be finite and >= dmin ({}), got {}", self.dmin, self.dmax)
        })?;
        check(self.step > 0.0 && self.step.is_finite(), "--step", || {
            format!("must be finite and > 0, got {}", self.step)
        })?;
        check(self.distance >= 0.0 && self.distance.is_finite(), "--distance", || {
            format!("must be finite and >= 0, got {}", self.distance)
        })?;
        let samples = cvmdi::montecarlo::MIN_SAMPLES..=cvmdi::montecarlo::MAX_SAMPLES;
        check(samples.contains(&self.samples), "--samples", || {
            format!(
                "must lie in [{}, {}], got {}",
                samples.start(),
                samples.end(),
                self.samples
            )
        })?;
        let subtracts = self.scheme != SchemeArg::None;
        if subtracts && self.tps == TpsArg::Keyword(TpsKeyword::Optimal) && self.k == 0 {
            return Err(CliError::validation("--k", "optimal T_PS needs --k >= 1".into()));
        }
        match self.command {
            Command::OptimalTps => check(
                matches!(self.scheme, SchemeArg::Alice | SchemeArg::Bob),
                "--scheme",
                || "optimal-tps scans one party; use --scheme alice or --scheme bob".into(),
            )?,
            Command::McVerify => {
                check(matches!(self.tps, TpsArg::Value(_)) || self.k == 0, "--tps", || {
                    "mc-verify needs a fixed transmittance".into()
                })?;
                check(self.format == Format::Json, "--format", || {
                    "mc-verify only emits json".into()
                })?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            va: self.va,
            vb: self.vb,
            scheme: self.scheme.into(),
            k: self.k,
            tps_a: self.tps.into(),
            tps_b: self.tps.into(),
            eps: self.eps,
            beta: self.beta,
            geometry: self.geometry.into(),
            loss_db_per_km: self.loss,
            attack: self.attack.into(),
            ce_convention: self.ce_convention.into(),
        }
    }

    /// Fixed transmittance, or 1 when none applies.
    pub fn fixed_tps(&self) -> f64 {
        match self.tps {
            TpsArg::Value(t) => t,
            TpsArg::Keyword(_) => 1.0,
        }
    }
}
