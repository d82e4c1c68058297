//! Run configuration: command-line flags merged with an optional
//! `key = value` config file.
//!
//! Keys in the file are the long flag names without dashes prefix
//! (`omega`, `pop-size`, `t-end`, ...). When a key is given both ways the
//! file wins and a warning is printed to stderr.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use switchrep_core::agent::{InitMode, RNG_NAME};
use switchrep_core::{GameParams, SwitchSchedule, UpdateRule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}: {msg}")]
    File {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("field '{field}': {msg}")]
    Field { field: &'static str, msg: String },
    #[error("cannot read config file {0}: {1}")]
    Io(String, std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    ClosedForm,
    ReducedOde,
    PairOde,
    Agent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Bernoulli,
    Exact,
}

impl From<Init> for InitMode {
    fn from(i: Init) -> Self {
        match i {
            Init::Bernoulli => InitMode::Bernoulli,
            Init::Exact => InitMode::Exact,
        }
    }
}

/// Initial `x_{C|C}` for the pair-approximation engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairStart {
    /// On the slow manifold above `x0`.
    Manifold,
    /// Uncorrelated pairs, `x_{C|C} = x0`.
    Uncorrelated,
    Value(f64),
}

impl FromStr for PairStart {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "manifold" => Ok(PairStart::Manifold),
            "uncorrelated" => Ok(PairStart::Uncorrelated),
            other => parse_f64(other).map(PairStart::Value),
        }
    }
}

impl fmt::Display for PairStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairStart::Manifold => f.write_str("manifold"),
            PairStart::Uncorrelated => f.write_str("uncorrelated"),
            PairStart::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Comma-separated list of rule names (`pc`, `im`) or custom coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleList(pub Vec<UpdateRule>);

impl FromStr for RuleList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let rules = split_list(s)
            .map(|item| match item.to_ascii_lowercase().as_str() {
                "pc" => Ok(UpdateRule::PairwiseComparison),
                "im" => Ok(UpdateRule::Imitation),
                other => parse_f64(other)
                    .map(UpdateRule::Custom)
                    .map_err(|_| format!("unknown rule '{item}' (expected pc, im or a number)")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rules.is_empty() {
            return Err("at least one rule is required".into());
        }
        Ok(RuleList(rules))
    }
}

impl fmt::Display for RuleList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        f.write_str(&items.join(","))
    }
}

/// Comma-separated list of floats; may be empty.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        split_list(s)
            .map(parse_f64)
            .collect::<Result<Vec<_>, _>>()
            .map(FloatList)
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&items.join(","))
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("invalid number '{}'", s.trim()))?;
    if !v.is_finite() {
        return Err(format!("number must be finite, got '{}'", s.trim()));
    }
    Ok(v)
}

macro_rules! partial_config {
    ($( $field:ident : $ty:ty => $key:literal, $help:literal; )*) => {
        /// Every setting as given on the command line or in a config file.
        #[derive(Args, Clone, Debug, Default, PartialEq)]
        pub struct PartialConfig {
            /// Config file of `key = value` lines; its values win over flags.
            #[arg(long, value_name = "FILE")]
            pub config: Option<PathBuf>,
            $(
                #[doc = $help]
                #[arg(long = $key)]
                pub $field: Option<$ty>,
            )*
        }

        impl PartialConfig {
            fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key {
                    $( $key => {
                        self.$field = Some(parse_value::<$ty>(value)?);
                        Ok(())
                    } )*
                    other => Err(format!("unknown key '{other}'")),
                }
            }

            /// Overlay `file` on `self`, warning about every conflict.
            fn overlay(&mut self, file: PartialConfig, warn: &mut dyn FnMut(String)) {
                $(
                    if let Some(v) = file.$field {
                        if let Some(old) = &self.$field {
                            if *old != v {
                                warn(format!(
                                    "'{}' given as flag ({:?}) and in config file ({:?}); using the file value",
                                    $key, old, v
                                ));
                            }
                        }
                        self.$field = Some(v);
                    }
                )*
            }
        }
    };
}

partial_config! {
    omega: f64 => "omega", "Selection strength ω in [0, 1]";
    degree: usize => "degree", "Network degree k (> 2)";
    benefit: f64 => "benefit", "Cooperation benefit b";
    cost: f64 => "cost", "Cooperation cost c (0 < c < b)";
    pop_size: usize => "pop-size", "Population size n (agent engine)";
    rules: RuleList => "rules", "Activation sequence: pc, im or custom coefficients, comma separated";
    instants: FloatList => "instants", "Interior switching instants t_1 < ... < t_{m-1}";
    period: f64 => "period", "Switching period T";
    x0: FloatList => "x0", "Initial cooperator fraction(s)";
    x_cc0: PairStart => "x-cc0", "Pair engine start: manifold, uncorrelated or a value for x_{C|C}";
    engine: EngineArg => "engine", "closed-form, reduced-ode, pair-ode or agent";
    t_end: f64 => "t-end", "Final time";
    dt: f64 => "dt", "Output sampling interval";
    step: f64 => "step", "RK4 step for the ODE engines";
    seed: u64 => "seed", "Base RNG seed (replicate i uses seed + i)";
    runs: usize => "runs", "Agent replicates";
    init: InitArg => "init", "Agent initial condition: bernoulli or exact";
    t1: f64 => "t1", "Switching instant queried by `thresholds` (defaults to the first instant)";
    out: PathBuf => "out", "Output file (stdout when absent)";
    format: FormatArg => "format", "text, csv or json";
}

trait ParseValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
}

fn parse_value<T: ParseValue>(s: &str) -> Result<T, String> {
    T::parse_value(s)
}

macro_rules! via_from_str {
    ($($t:ty),*) => {$(
        impl ParseValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.trim().parse::<$t>().map_err(|e| format!("invalid value '{}': {e}", s.trim()))
            }
        }
    )*};
}
via_from_str!(usize, u64, PathBuf);

impl ParseValue for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        parse_f64(s)
    }
}

macro_rules! via_str_err {
    ($($t:ty),*) => {$(
        impl ParseValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse()
            }
        }
    )*};
}
via_str_err!(RuleList, FloatList, PairStart);

macro_rules! value_enum_arg {
    ($name:ident, $inner:ty) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        pub struct $name(pub $inner);

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$inner as ValueEnum>::from_str(s.trim(), true).map($name)
            }
        }

        impl ParseValue for $name {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = self.0.to_possible_value().expect("no skipped variants");
                f.write_str(v.get_name())
            }
        }
    };
}
value_enum_arg!(EngineArg, Engine);
value_enum_arg!(FormatArg, Format);
value_enum_arg!(InitArg, Init);

/// Parse a `key = value` config file.
pub fn parse_config_text(path: &str, text: &str) -> Result<PartialConfig, ConfigError> {
    let mut cfg = PartialConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError::File {
            path: path.to_string(),
            line: i + 1,
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        cfg.set(key, value)
            .map_err(|m| err(format!("field '{key}': {m}")))?;
    }
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<PartialConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
    parse_config_text(&path.display().to_string(), &text)
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: GameParams,
    pub pop_size: usize,
    pub rules: Vec<UpdateRule>,
    pub instants: Vec<f64>,
    pub period: f64,
    pub x0: Vec<f64>,
    pub x_cc0: PairStart,
    pub engine: Engine,
    pub t_end: f64,
    pub dt: f64,
    pub step: f64,
    pub seed: u64,
    pub runs: usize,
    pub init: Init,
    pub t1: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    /// Merge the config file named in `flags` (if any) over the flags, fill in
    /// defaults and validate.
    pub fn resolve(
        flags: &PartialConfig,
        warn: &mut dyn FnMut(String),
    ) -> Result<Self, ConfigError> {
        let mut merged = flags.clone();
        if let Some(path) = &flags.config {
            let file = load_config_file(path)?;
            merged.overlay(file, warn);
        }
        Self::from_partial(&merged)
    }

    pub fn from_partial(p: &PartialConfig) -> Result<Self, ConfigError> {
        let field = |field: &'static str, msg: String| ConfigError::Field { field, msg };
        let params = GameParams {
            omega: p.omega.unwrap_or(0.01),
            degree: p.degree.unwrap_or(4),
            benefit: p.benefit.unwrap_or(2.0),
            cost: p.cost.unwrap_or(0.2),
        };
        params
            .validate()
            .map_err(|e| field("omega/degree/benefit/cost", e.to_string()))?;

        let rules = p.rules.clone().map_or_else(
            || vec![UpdateRule::PairwiseComparison, UpdateRule::Imitation],
            |r| r.0,
        );
        let instants = match &p.instants {
            Some(l) => l.0.clone(),
            None if rules.len() == 2 => vec![2.0],
            None if rules.len() == 1 => vec![],
            None => return Err(field("instants", format!("{} rules need explicit instants", rules.len()))),
        };
        let period = p.period.unwrap_or(5.0);
        let x0 = p.x0.clone().map_or_else(|| vec![0.5], |l| l.0);
        if x0.is_empty() || x0.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(field("x0", "initial fractions must lie in [0, 1]".into()));
        }
        let t_end = p.t_end.unwrap_or(20.0 * period);
        let dt = p.dt.unwrap_or(period / 10.0);
        let step = p.step.unwrap_or(1e-3);
        for (name, v) in [("t-end", t_end), ("dt", dt), ("step", step)] {
            if v <= 0.0 {
                return Err(field(name, format!("must be positive, got {v}")));
            }
        }
        let runs = p.runs.unwrap_or(50);
        if runs == 0 {
            return Err(field("runs", "must be at least 1".into()));
        }
        let pop_size = p.pop_size.unwrap_or(2000);
        if pop_size <= params.degree || (pop_size * params.degree) % 2 == 1 {
            return Err(field(
                "pop-size",
                format!("need n > k and n k even, got n = {pop_size}, k = {}", params.degree),
            ));
        }

        let cfg = Self {
            params,
            pop_size,
            rules,
            instants,
            period,
            x0,
            x_cc0: p.x_cc0.unwrap_or(PairStart::Manifold),
            engine: p.engine.map_or(Engine::ClosedForm, |e| e.0),
            t_end,
            dt,
            step,
            seed: p.seed.unwrap_or(0),
            runs,
            init: p.init.map_or(Init::Bernoulli, |i| i.0),
            t1: p.t1,
            out: p.out.clone(),
            format: p.format.map(|f| f.0),
        };
        cfg.schedule()?;
        Ok(cfg)
    }

    pub fn schedule(&self) -> Result<SwitchSchedule, ConfigError> {
        SwitchSchedule::new(self.rules.clone(), &self.instants, self.period, &self.params).map_err(
            |e| ConfigError::Field {
                field: "rules/instants/period",
                msg: e.to_string(),
            },
        )
    }

    /// `key=value` pairs sufficient to reproduce the run.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = write!(
            s,
            "omega={} degree={} benefit={} cost={} pop-size={} rules={} instants={} period={} \
             x0={} x-cc0={} engine={} t-end={} dt={} step={} seed={} runs={} init={}",
            p.omega,
            p.degree,
            p.benefit,
            p.cost,
            self.pop_size,
            RuleList(self.rules.clone()),
            FloatList(self.instants.clone()),
            self.period,
            FloatList(self.x0.clone()),
            self.x_cc0,
            EngineArg(self.engine),
            self.t_end,
            self.dt,
            self.step,
            self.seed,
            self.runs,
            InitArg(self.init),
        );
        if let Some(t1) = self.t1 {
            let _ = write!(s, " t1={t1}");
        }
        let _ = write!(s, " rng=\"{RNG_NAME}\"");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_pc_im_example() {
        let cfg = RunConfig::from_partial(&PartialConfig::default()).unwrap();
        assert_eq!(cfg.params, GameParams::new(0.01, 4, 2.0, 0.2).unwrap());
        assert_eq!(cfg.rules, vec![UpdateRule::PairwiseComparison, UpdateRule::Imitation]);
        assert_eq!(cfg.instants, vec![2.0]);
        assert_eq!(cfg.period, 5.0);
    }

    #[test]
    fn parses_file_with_comments() {
        let text = "# fig\nomega = 0.02\nrules = im, pc  # order\ninstants=3\nx0 = 0.1,0.5\nengine = pair-ode\n";
        let p = parse_config_text("f.conf", text).unwrap();
        assert_eq!(p.omega, Some(0.02));
        assert_eq!(p.rules.unwrap().0, vec![UpdateRule::Imitation, UpdateRule::PairwiseComparison]);
        assert_eq!(p.x0.unwrap().0, vec![0.1, 0.5]);
        assert_eq!(p.engine, Some(EngineArg(Engine::PairOde)));
    }

    #[test]
    fn file_errors_name_line_and_field() {
        let err = parse_config_text("f.conf", "omega = 0.01\n\ncost = abc\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("cost"), "{msg}");
        let err = parse_config_text("f.conf", "colour = red\n").unwrap_err();
        assert!(err.to_string().contains("unknown key 'colour'"));
        let err = parse_config_text("f.conf", "just words\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn file_wins_with_warning() {
        let mut flags = PartialConfig {
            omega: Some(0.05),
            degree: Some(6),
            ..Default::default()
        };
        let file = parse_config_text("f", "omega = 0.02\n").unwrap();
        let mut warnings = Vec::new();
        flags.overlay(file, &mut |w| warnings.push(w));
        assert_eq!(flags.omega, Some(0.02));
        assert_eq!(flags.degree, Some(6));
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("omega"));
    }

    #[test]
    fn rejects_invalid_settings() {
        let bad = |p: PartialConfig| RunConfig::from_partial(&p).unwrap_err().to_string();
        assert!(bad(PartialConfig { cost: Some(3.0), ..Default::default() }).contains("cost"));
        assert!(bad(PartialConfig { x0: Some(FloatList(vec![1.5])), ..Default::default() }).contains("x0"));
        assert!(bad(PartialConfig { instants: Some(FloatList(vec![6.0])), ..Default::default() })
            .contains("instants"));
        assert!(bad(PartialConfig { pop_size: Some(7), degree: Some(3), ..Default::default() })
            .contains("pop-size"));
        assert!("pc,foo".parse::<RuleList>().is_err());
    }

    #[test]
    fn echo_round_trips_through_the_file_parser() {
        let p = PartialConfig {
            rules: Some("im,pc,0.001".parse().unwrap()),
            instants: Some("1,2.5".parse().unwrap()),
            x0: Some("0.1,0.9".parse().unwrap()),
            engine: Some(EngineArg(Engine::Agent)),
            seed: Some(42),
            ..Default::default()
        };
        let cfg = RunConfig::from_partial(&p).unwrap();
        let echo = cfg.echo();
        let (settings, rng) = echo.split_once(" rng=").unwrap();
        assert!(rng.contains("ChaCha8"));
        let text: String = settings
            .split(' ')
            .map(|kv| format!("{}\n", kv.replacen('=', " = ", 1)))
            .collect();
        let back = RunConfig::from_partial(&parse_config_text("echo", &text).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
