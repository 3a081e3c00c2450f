//! Experiment orchestration: configs, trace-count formulas, Monte Carlo runs,
//! numeric checks of the spider bounds and report output.

pub mod bounds;
pub mod counts;
pub mod experiment;
pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::DeletionModel;
use crate::error::{check_probability, Error, Result};
use crate::spider_recon::MAX_EXHAUSTIVE_SPIDER;
use crate::string_recon::DEFAULT_STRING_CAP;
use crate::trees::TreeShape;

pub use bounds::{verify_bounds, BoundsGrid, BoundsReport};
pub use counts::{theorem_trace_count, Calibration, TheoremId};
pub use experiment::{run_experiment, run_experiment_with};
pub use report::{wilson_interval, Aggregate, ExperimentReport, TrialRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoId {
    TedLarge,
    TedSmall,
    LpLarge,
    LpSmall,
    SpiderMeanbased,
    SpiderLargeDepth,
    SpiderRows,
    String,
}

impl AlgoId {
    pub const ALL: [AlgoId; 8] = [
        AlgoId::TedLarge,
        AlgoId::TedSmall,
        AlgoId::LpLarge,
        AlgoId::LpSmall,
        AlgoId::SpiderMeanbased,
        AlgoId::SpiderLargeDepth,
        AlgoId::SpiderRows,
        AlgoId::String,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgoId::TedLarge => "ted_large",
            AlgoId::TedSmall => "ted_small",
            AlgoId::LpLarge => "lp_large",
            AlgoId::LpSmall => "lp_small",
            AlgoId::SpiderMeanbased => "spider_meanbased",
            AlgoId::SpiderLargeDepth => "spider_large_depth",
            AlgoId::SpiderRows => "spider_rows",
            AlgoId::String => "string",
        }
    }

    /// The deletion model this algorithm is designed for; `None` when the
    /// models coincide on its shapes.
    pub fn model(self) -> Option<DeletionModel> {
        match self {
            AlgoId::TedLarge | AlgoId::TedSmall => Some(DeletionModel::Ted),
            AlgoId::LpLarge | AlgoId::LpSmall => Some(DeletionModel::LeftPropagation),
            _ => None,
        }
    }

    pub fn theorem(self) -> Option<TheoremId> {
        match self {
            AlgoId::TedSmall => Some(TheoremId::TedSmall),
            AlgoId::LpSmall => Some(TheoremId::LpSmall),
            AlgoId::SpiderMeanbased => Some(TheoremId::SpiderMeanbased),
            AlgoId::SpiderLargeDepth => Some(TheoremId::SpiderLargeDepth),
            _ => None,
        }
    }

    /// Rejects shapes the algorithm cannot run on.
    pub fn check_shape(self, shape: &TreeShape) -> Result<()> {
        let unsupported = |why: String| Err(Error::ShapeUnsupported(format!("{}: {why}", self.name())));
        match (self, shape) {
            (AlgoId::TedLarge | AlgoId::TedSmall | AlgoId::LpLarge | AlgoId::LpSmall, TreeShape::Spider { .. }) => {
                unsupported(format!("needs a complete k-ary shape, got {shape}"))
            }
            (
                AlgoId::TedLarge | AlgoId::TedSmall | AlgoId::LpLarge | AlgoId::LpSmall,
                TreeShape::CompleteKary { d, .. },
            ) if *d < 2 => unsupported("needs depth at least 2".into()),
            (AlgoId::TedLarge, TreeShape::CompleteKary { k, .. }) if *k > DEFAULT_STRING_CAP => {
                unsupported(format!("k = {k} exceeds the string cap"))
            }
            (AlgoId::LpLarge, TreeShape::CompleteKary { k, d }) if k + d - 1 > DEFAULT_STRING_CAP => {
                unsupported(format!("H sets of {} nodes exceed the string cap", k + d - 1))
            }
            (
                AlgoId::SpiderMeanbased | AlgoId::SpiderLargeDepth | AlgoId::SpiderRows,
                TreeShape::CompleteKary { .. },
            ) => unsupported(format!("needs a spider shape, got {shape}")),
            (AlgoId::SpiderMeanbased, TreeShape::Spider { n, .. }) if *n > MAX_EXHAUSTIVE_SPIDER => {
                unsupported(format!("n = {n} exceeds the exhaustive cap {MAX_EXHAUSTIVE_SPIDER}"))
            }
            (AlgoId::SpiderLargeDepth, TreeShape::Spider { d, .. }) if *d > DEFAULT_STRING_CAP => {
                unsupported(format!("paths of depth {d} exceed the string cap"))
            }
            (AlgoId::SpiderRows, TreeShape::Spider { n, d }) if n / d > DEFAULT_STRING_CAP => {
                unsupported(format!("rows of {} nodes exceed the string cap", n / d))
            }
            (AlgoId::String, s) if !s.is_path() => unsupported(format!("needs a single path, got {shape}")),
            (AlgoId::String, s) if s.n() > DEFAULT_STRING_CAP => {
                unsupported(format!("length {} exceeds the string cap", s.n()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoId::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Tunable constants of the trace-count formulas and bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    pub c: f64,
    pub c_prime: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "C_prime")]
    pub big_c_prime: f64,
    pub epsilon: f64,
    /// Upper limit for the spider mean-based count.
    pub cap: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c: 1.0, c_prime: 2.0, big_c: 1.0, big_c_prime: 1.0, epsilon: 0.1, cap: 1e7 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Trial `t` uses the `t mod 2^n`-th labeling in lexicographic order.
    WorstCaseEnumerate,
    Random,
    /// The same labels, given as a bit string, in every trial.
    Fixed(String),
}

/// A trace count, either explicit or taken from the theorem formula.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceCount {
    Fixed(usize),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub shape: TreeShape,
    #[serde(default = "default_model")]
    pub model: DeletionModel,
    pub algo: AlgoId,
    pub q: f64,
    #[serde(default)]
    pub gamma: f64,
    pub trace_counts: Vec<TraceCount>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub constants: Constants,
    pub label_mode: LabelMode,
    /// Extra attempts with fresh traces when `lp_large` hits an undefined
    /// route.
    #[serde(default)]
    pub retries: usize,
    /// When false, every `millis` entry is written as 0 so reports are
    /// byte-for-byte reproducible.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

fn default_model() -> DeletionModel {
    DeletionModel::Ted
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("q", self.q, false)?;
        check_probability("gamma", self.gamma, true)?;
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.trace_counts.is_empty() {
            return Err(Error::Config("trace_counts must not be empty".into()));
        }
        if let Some(m) = self.algo.model() {
            if m != self.model {
                return Err(Error::Config(format!("{} runs under the {m:?} model", self.algo)));
            }
        }
        self.algo.check_shape(&self.shape)?;
        if let LabelMode::Fixed(bits) = &self.label_mode {
            let parsed = parse_bits(bits)?;
            if parsed.len() != self.shape.n() {
                return Err(Error::LabelLength { expected: self.shape.n(), got: parsed.len() });
            }
        }
        if self.label_mode == LabelMode::WorstCaseEnumerate && self.shape.n() > 20 {
            return Err(Error::Config("worst_case_enumerate needs n <= 20".into()));
        }
        self.resolved_counts().map(|_| ())
    }

    /// Trace counts with `"theorem"` entries evaluated.
    pub fn resolved_counts(&self) -> Result<Vec<usize>> {
        self.trace_counts
            .iter()
            .map(|t| match t {
                TraceCount::Fixed(n) if *n > 0 => Ok(*n),
                TraceCount::Fixed(_) => Err(Error::Config("trace counts must be positive".into())),
                TraceCount::Named(name) if name == "theorem" => {
                    let id = self
                        .algo
                        .theorem()
                        .ok_or_else(|| Error::Config(format!("{} has no theorem-scale trace count", self.algo)))?;
                    theorem_trace_count(id, &self.shape, self.q, &self.constants, Calibration::bundled())
                }
                TraceCount::Named(other) => Err(Error::Config(format!("unknown trace count {other:?}"))),
            })
            .collect()
    }
}

/// Parses `0101...` or `0x` hex (most significant bit first).
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x") {
        let mut out = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch.to_digit(16).ok_or_else(|| Error::Config(format!("bad hex digit {ch:?}")))?;
            out.extend((0..4).rev().map(|b| v >> b & 1 == 1));
        }
        return Ok(out);
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Config(format!("bad bit {other:?}"))),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_parsing() {
        assert_eq!(parse_bits("0110").unwrap(), vec![false, true, true, false]);
        assert_eq!(parse_bits("0xa").unwrap(), vec![true, false, true, false]);
        assert!(parse_bits("012").is_err());
        assert_eq!(format_bits(&parse_bits("1001").unwrap()), "1001");
    }

    #[test]
    fn config_validation() {
        let good = r#"{"shape":{"kind":"kary","k":2,"d":3},"model":"ted","algo":"ted_small","q":0.1,
            "trace_counts":[10,"theorem"],"trials":3,"master_seed":1,"label_mode":"random"}"#;
        let cfg = ExperimentConfig::from_json(good).unwrap();
        assert_eq!(cfg.resolved_counts().unwrap()[0], 10);
        let wrong_model = good.replace("\"ted\"", "\"lp\"");
        assert!(ExperimentConfig::from_json(&wrong_model).is_err());
        let spider = good.replace(r#"{"kind":"kary","k":2,"d":3}"#, r#"{"kind":"spider","n":6,"d":3}"#);
        assert!(matches!(ExperimentConfig::from_json(&spider), Err(Error::ShapeUnsupported(_))));
    }
}
