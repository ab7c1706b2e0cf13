//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! kind = "mlp_blobs"
//! samples = 512
//! features = 16
//! classes = 4
//! hidden = 32
//! separation = 3.0
//! noise = 1.0
//!
//! [projection]
//! method = "deft"
//! rank = 4            # or "min"; rank_fraction = 0.25 instead
//! update_interval = 50
//!
//! [adamw]
//! learning_rate = 0.003
//!
//! [run]
//! steps = 500
//! seed = 0
//! output = "mlp-deft.csv"
//! ```
//!
//! Every section except `[problem]` and `[run].steps` has defaults. Unknown
//! keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use deft_core::zoo::{make_blobs, LinearRegression, MlpBlobs, Problem, QuadraticBowl};
use deft_core::{AdamWConfig, Method, ProjectionConfig, RankPolicy, SideMode, SketchLayout};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Environment variable that redirects every output file into one directory.
pub const OUTPUT_DIR_ENV: &str = "DEFT_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.path, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        rows: usize,
        cols: usize,
    },
    Linreg {
        samples: usize,
        features: usize,
        outputs: usize,
        noise: f64,
    },
    MlpBlobs {
        samples: usize,
        features: usize,
        classes: usize,
        hidden: usize,
        separation: f64,
        noise: f64,
    },
}

impl ProblemSpec {
    /// Data and targets are drawn from `seed`.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Problem>, String> {
        Ok(match *self {
            ProblemSpec::Quadratic { rows, cols } => Box::new(QuadraticBowl::seeded(rows, cols, seed)),
            ProblemSpec::Linreg {
                samples,
                features,
                outputs,
                noise,
            } => Box::new(LinearRegression::seeded(samples, features, outputs, noise, seed)),
            ProblemSpec::MlpBlobs {
                samples,
                features,
                classes,
                hidden,
                separation,
                noise,
            } => Box::new(MlpBlobs {
                data: make_blobs(seed, samples, features, classes, separation, noise).map_err(|e| e.to_string())?,
                hidden,
            }),
        })
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = |key: &'static str, v: usize| {
            if v == 0 {
                Err((key, format!("`{key}` must be at least 1")))
            } else {
                Ok(())
            }
        };
        let non_negative = |key: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err((key, format!("`{key}` must be finite and non-negative, got {v}")))
            }
        };
        match *self {
            ProblemSpec::Quadratic { rows, cols } => {
                positive("rows", rows)?;
                positive("cols", cols)
            }
            ProblemSpec::Linreg {
                samples,
                features,
                outputs,
                noise,
            } => {
                positive("samples", samples)?;
                positive("features", features)?;
                positive("outputs", outputs)?;
                non_negative("noise", noise)
            }
            ProblemSpec::MlpBlobs {
                samples,
                features,
                classes,
                hidden,
                separation,
                noise,
            } => {
                positive("features", features)?;
                positive("hidden", hidden)?;
                if classes < 2 {
                    return Err(("classes", "`classes` must be at least 2".into()));
                }
                if samples < classes {
                    return Err(("samples", "`samples` must be at least `classes`".into()));
                }
                non_negative("separation", separation)?;
                non_negative("noise", noise)
            }
        }
    }
}

/// `rank = 8` or `rank = "min"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankValue {
    Fixed(usize),
    Min,
}

impl RankValue {
    pub fn policy(self) -> RankPolicy {
        match self {
            RankValue::Fixed(k) => RankPolicy::Fixed(k),
            RankValue::Min => RankPolicy::Full,
        }
    }
}

impl fmt::Display for RankValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankValue::Fixed(k) => write!(f, "{k}"),
            RankValue::Min => f.write_str("min"),
        }
    }
}

impl std::str::FromStr for RankValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "min" => Ok(RankValue::Min),
            t => match t.parse::<usize>() {
                Ok(k) if k > 0 => Ok(RankValue::Fixed(k)),
                _ => Err(format!("invalid rank `{t}` (expected a positive integer or `min`)")),
            },
        }
    }
}

impl Serialize for RankValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RankValue::Fixed(k) => s.serialize_u64(*k as u64),
            RankValue::Min => s.serialize_str("min"),
        }
    }
}

impl<'de> Deserialize<'de> for RankValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) if k > 0 => Ok(RankValue::Fixed(k as usize)),
            Raw::Int(k) => Err(serde::de::Error::custom(format!("rank must be positive, got {k}"))),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<RankValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_fraction: Option<f64>,
    pub update_interval: u64,
    pub side_mode: SideMode,
    pub sketch_layout: SketchLayout,
    pub scale: f64,
    pub two_sided: bool,
    pub rsvd_oversampling: usize,
    pub rsvd_seed: u64,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        let core = ProjectionConfig::default();
        Self {
            method: core.method,
            rank: None,
            rank_fraction: None,
            update_interval: core.update_interval,
            side_mode: core.side_mode,
            sketch_layout: core.sketch_layout,
            scale: core.scale,
            two_sided: core.two_sided,
            rsvd_oversampling: core.rsvd_oversampling,
            rsvd_seed: core.rsvd_seed,
        }
    }
}

impl ProjectionSection {
    /// Core settings; the rank field is a placeholder resolved per parameter.
    pub fn core(&self) -> ProjectionConfig {
        ProjectionConfig {
            method: self.method,
            rank: 1,
            update_interval: self.update_interval,
            side_mode: self.side_mode,
            sketch_layout: self.sketch_layout,
            scale: self.scale,
            two_sided: self.two_sided,
            rsvd_oversampling: self.rsvd_oversampling,
            rsvd_seed: self.rsvd_seed,
        }
    }

    pub fn rank_policy(&self) -> RankPolicy {
        match (self.rank, self.rank_fraction) {
            (_, Some(f)) => RankPolicy::Fraction(f),
            (Some(r), None) => r.policy(),
            (None, None) => RankPolicy::Fixed(ProjectionConfig::default().rank),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricsFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub format: MetricsFormat,
    /// When false the timing columns are written as zero.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("metrics.csv")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub adamw: AdamWConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            path: None,
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|(section, key, message)| ConfigError {
            path: None,
            line: line_of_key(text, section, key),
            message: format!("[{section}] {message}"),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_toml_str(&text).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            ..e
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Problem instance seeded from `[run].seed`.
    pub fn build_problem(&self) -> Box<dyn Problem> {
        self.problem.build(self.run.seed).expect("validated problem")
    }

    /// Metrics path, moved into `$DEFT_OUTPUT_DIR` when that is set.
    pub fn output_path(&self) -> PathBuf {
        resolve_output(&self.run.output)
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        self.problem.validate().map_err(|(k, m)| ("problem", k, m))?;
        let p = &self.projection;
        if p.rank.is_some() && p.rank_fraction.is_some() {
            return Err(("projection", "rank_fraction", "set either `rank` or `rank_fraction`, not both".into()));
        }
        p.rank_policy()
            .validate()
            .map_err(|e| ("projection", if p.rank_fraction.is_some() { "rank_fraction" } else { "rank" }, e.to_string()))?;
        if p.update_interval == 0 {
            return Err(("projection", "update_interval", "`update_interval` must be at least 1".into()));
        }
        if !(p.scale.is_finite() && p.scale > 0.0) {
            return Err(("projection", "scale", format!("`scale` must be positive, got {}", p.scale)));
        }
        self.adamw.validate().map_err(|e| ("adamw", adamw_key(&e.to_string()), e.to_string()))?;
        if self.run.steps == 0 {
            return Err(("run", "steps", "`steps` must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let name = path.file_name().map(PathBuf::from).unwrap_or_else(default_output);
            PathBuf::from(dir).join(name)
        }
        _ => path.to_path_buf(),
    }
}

fn adamw_key(message: &str) -> &'static str {
    ["learning_rate", "beta1", "beta2", "epsilon", "weight_decay"]
        .into_iter()
        .find(|k| message.contains(k))
        .unwrap_or("learning_rate")
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key = …` inside `[section]`, or of the section header.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[problem]
kind = "mlp_blobs"
samples = 64
features = 8
classes = 4
hidden = 16
separation = 3.0
noise = 1.0

[projection]
method = "deft"
rank = "min"
update_interval = 10

[adamw]
learning_rate = 0.003
weight_decay = 0.01

[run]
steps = 20
seed = 3
output = "out.csv"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.projection.rank, Some(RankValue::Min));
        assert_eq!(cfg.projection.rank_policy(), RankPolicy::Full);
        assert_eq!(cfg.projection.side_mode, SideMode::ReverseStd);
        assert_eq!(cfg.adamw.beta2, 0.999);
        assert!(cfg.run.record_timing);
        let text = cfg.to_toml_string();
        let again = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml_string());
    }

    #[test]
    fn unknown_keys_are_errors_with_lines() {
        let bad = SAMPLE.replace("update_interval = 10", "update_interval = 10\nrnak = 3");
        let e = RunConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(15));
        assert!(e.message.contains("rnak"), "{}", e.message);

        let bad = SAMPLE.replace("hidden = 16", "hidden = 16\ndepth = 2");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let bad = SAMPLE.replace("steps = 20", "steps = 0");
        let e = RunConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(21));
        assert!(e.to_string().starts_with("line 21: [run]"));

        let bad = SAMPLE.replace("weight_decay = 0.01", "weight_decay = -1.0");
        assert_eq!(RunConfig::from_toml_str(&bad).unwrap_err().line, Some(18));

        let bad = SAMPLE.replace("rank = \"min\"", "rank = \"all\"");
        assert_eq!(RunConfig::from_toml_str(&bad).unwrap_err().line, Some(13));

        let bad = SAMPLE.replace("rank = \"min\"", "rank = 2\nrank_fraction = 0.5");
        assert!(RunConfig::from_toml_str(&bad).is_err());

        let bad = SAMPLE.replace("method = \"deft\"", "method = \"galore\"");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rank_forms() {
        let cfg = RunConfig::from_toml_str(&SAMPLE.replace("rank = \"min\"", "rank = 7")).unwrap();
        assert_eq!(cfg.projection.rank_policy(), RankPolicy::Fixed(7));
        let cfg = RunConfig::from_toml_str(&SAMPLE.replace("rank = \"min\"", "rank_fraction = 0.25")).unwrap();
        assert_eq!(cfg.projection.rank_policy(), RankPolicy::Fraction(0.25));
        assert!(RunConfig::from_toml_str(&SAMPLE.replace("rank = \"min\"", "rank = 0")).is_err());
        assert_eq!("min".parse::<RankValue>().unwrap(), RankValue::Min);
        assert!("-1".parse::<RankValue>().is_err());
    }
}
