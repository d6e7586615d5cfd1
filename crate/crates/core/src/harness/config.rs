use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    RoundingHist,
    Poisson,
    AlifCompare,
    Rsnn,
    InstrMix,
    Report,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::RoundingHist,
        Experiment::Poisson,
        Experiment::AlifCompare,
        Experiment::Rsnn,
        Experiment::InstrMix,
        Experiment::Report,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::RoundingHist => "rounding-hist",
            Experiment::Poisson => "poisson",
            Experiment::AlifCompare => "alif-compare",
            Experiment::Rsnn => "rsnn",
            Experiment::InstrMix => "instr-mix",
            Experiment::Report => "report",
        }
    }

    fn default_repeats(self) -> usize {
        match self {
            Experiment::AlifCompare | Experiment::Report => 32,
            _ => 1,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Everything that determines an experiment's output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub seed: u64,
    pub repeats: usize,
    pub out: PathBuf,
    /// Experiment-specific `key = value` settings.
    pub params: BTreeMap<String, String>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentSpec {
            experiment,
            seed: DEFAULT_SEED,
            repeats: experiment.default_repeats(),
            out: PathBuf::from("out"),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Applies a flat `key = value` text; `#` starts a comment. The keys
    /// `experiment`, `seed`, `repeats` and `out` set the matching fields.
    pub fn apply_config(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "experiment" => self.experiment = value.parse()?,
                "seed" => self.seed = parse_value(key, value)?,
                "repeats" => self.repeats = parse_value(key, value)?,
                "out" => self.out = PathBuf::from(value),
                _ => {
                    self.params.insert(key.to_string(), value.to_string());
                }
            }
        }
        Ok(())
    }

    /// Typed parameter lookup with a default.
    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.params.get(key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }

    pub fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).map_or(default, String::as_str)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| HarnessError::Config(format!("bad value `{value}` for `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text() {
        let mut spec = ExperimentSpec::new(Experiment::Poisson);
        spec.apply_config("# rates\nlambda = 3.5\nseed=7 # trailing\n\nout = /tmp/x\n").unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.get("lambda", 5.0).unwrap(), 3.5);
        assert_eq!(spec.get("n", 3200usize).unwrap(), 3200);
        assert_eq!(spec.out, PathBuf::from("/tmp/x"));
        assert!(spec.apply_config("nonsense").is_err());
        assert!(spec.apply_config("seed = x").is_err());
        assert!(spec.get::<f64>("lambda", 0.0).is_ok());
    }

    #[test]
    fn experiment_ids_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.id().parse::<Experiment>().unwrap(), e);
        }
        assert!("fig9".parse::<Experiment>().is_err());
    }
}
