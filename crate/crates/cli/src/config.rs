//! Engine configuration: key=value text file with strict key checking, plus
//! the `config dump` round-trip format.

use std::fmt::Write as _;
use std::path::PathBuf;

use lfr_core::matcher::LssrParams;
use lfr_core::search::StageConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub stage: StageConfig,
    pub lssr: LssrParams,
    /// 0 means "let rayon decide".
    pub threads: usize,
    pub gallery_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            stage: StageConfig::default(),
            lssr: LssrParams::default(),
            threads: 0,
            gallery_dir: None,
            manifest: None,
            seed: 42,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl EngineConfig {
    /// Parses key=value text; absent keys keep their defaults. Unknown keys
    /// and malformed values are rejected with the offending line number.
    pub fn parse(file: &str, text: &str) -> Result<Self, ConfigError> {
        let mut cfg = EngineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let (key, value) = row.split_once('=').ok_or_else(|| ConfigError::Parse {
                file: file.to_owned(),
                line,
                msg: format!("expected key=value, got {row:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| ConfigError::Parse {
                file: file.to_owned(),
                line,
                msg: format!("bad {what} {value:?}"),
            };
            match key {
                "w1" => cfg.stage.w1 = value.parse().map_err(|_| bad("w1"))?,
                "w2" => cfg.stage.w2 = value.parse().map_err(|_| bad("w2"))?,
                "w3" => cfg.stage.w3 = value.parse().map_err(|_| bad("w3"))?,
                "w4" => cfg.stage.w4 = value.parse().map_err(|_| bad("w4"))?,
                "k" => cfg.stage.k = value.parse().map_err(|_| bad("k"))?,
                "l" => cfg.stage.l = value.parse().map_err(|_| bad("l"))?,
                "relaxation_iterations" => {
                    cfg.lssr.relaxation_iterations =
                        value.parse().map_err(|_| bad("relaxation_iterations"))?
                }
                "relaxation_weight" => {
                    cfg.lssr.relaxation_weight =
                        value.parse().map_err(|_| bad("relaxation_weight"))?
                }
                "neighbor_count" => {
                    cfg.lssr.neighbor_count = value.parse().map_err(|_| bad("neighbor_count"))?
                }
                "distance_sigma" => {
                    cfg.lssr.distance_sigma = value.parse().map_err(|_| bad("distance_sigma"))?
                }
                "angle_sigma" => {
                    cfg.lssr.angle_sigma = value.parse().map_err(|_| bad("angle_sigma"))?
                }
                "max_pairs" => {
                    cfg.lssr.max_pairs = if value == "none" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("max_pairs"))?)
                    }
                }
                "threads" => cfg.threads = value.parse().map_err(|_| bad("threads"))?,
                "gallery_dir" => cfg.gallery_dir = Some(PathBuf::from(value)),
                "manifest" => cfg.manifest = Some(PathBuf::from(value)),
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                other => {
                    return Err(ConfigError::Parse {
                        file: file.to_owned(),
                        line,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.stage
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let l = &self.lssr;
        if !(0.0..=1.0).contains(&l.relaxation_weight) {
            return Err(ConfigError::Invalid(format!(
                "relaxation_weight {} outside [0, 1]",
                l.relaxation_weight
            )));
        }
        if l.distance_sigma <= 0.0 || l.angle_sigma <= 0.0 {
            return Err(ConfigError::Invalid(
                "distance_sigma and angle_sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The `config dump` format; reparsing reproduces the config exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let s = &self.stage;
        let l = &self.lssr;
        let _ = writeln!(out, "w1={}", s.w1);
        let _ = writeln!(out, "w2={}", s.w2);
        let _ = writeln!(out, "w3={}", s.w3);
        let _ = writeln!(out, "w4={}", s.w4);
        let _ = writeln!(out, "k={}", s.k);
        let _ = writeln!(out, "l={}", s.l);
        let _ = writeln!(out, "relaxation_iterations={}", l.relaxation_iterations);
        let _ = writeln!(out, "relaxation_weight={}", l.relaxation_weight);
        let _ = writeln!(out, "neighbor_count={}", l.neighbor_count);
        let _ = writeln!(out, "distance_sigma={}", l.distance_sigma);
        let _ = writeln!(out, "angle_sigma={}", l.angle_sigma);
        let _ = writeln!(
            out,
            "max_pairs={}",
            l.max_pairs.map_or("none".to_owned(), |v| v.to_string())
        );
        let _ = writeln!(out, "threads={}", self.threads);
        if let Some(dir) = &self.gallery_dir {
            let _ = writeln!(out, "gallery_dir={}", dir.display());
        }
        if let Some(path) = &self.manifest {
            let _ = writeln!(out, "manifest={}", path.display());
        }
        let _ = writeln!(out, "seed={}", self.seed);
        out
    }
}
