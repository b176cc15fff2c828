use crate::CliError;
use clap::Args;
use iet_core::combinat::{canonical_rotation_perm, default_alphabet, Perm};
use iet_core::num::{parse_rational, Rational};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const PRECISION_ENV: &str = "IET_PRECISION_BITS";
const DEFAULT_PRECISION: usize = 256;

/// Flags shared by every subcommand. A JSON config file given with
/// `--config` overrides any flag it mentions.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of letters.
    #[arg(long)]
    pub d: Option<usize>,
    /// Permutation as "A B C / C B A" or as JSON {"top": [...], "bottom": [...]}.
    #[arg(long)]
    pub perm: Option<String>,
    /// Use the canonical rotation datum (A1..Ad / A2..Ad A1) when no --perm is given.
    #[arg(long)]
    #[serde(default)]
    pub rotation: bool,
    /// Lengths as comma-separated rationals, or "golden" for d = 2.
    #[arg(long)]
    pub lengths: Option<String>,
    /// Log-slope vector as comma-separated rationals.
    #[arg(long)]
    pub omega: Option<String>,
    /// Sample log-slopes in E_s instead of E_cs \ E_s.
    #[arg(long)]
    #[serde(default)]
    pub stable: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bits of the random lengths; defaults grow with the block count.
    #[arg(long)]
    pub bits: Option<u64>,
    #[arg(long, env = PRECISION_ENV)]
    pub precision_bits: Option<usize>,
    #[arg(long = "blocks")]
    #[serde(rename = "blocks")]
    pub n_blocks: Option<usize>,
    /// Iteration cap (class size, rotation-number iterates).
    #[arg(long)]
    pub max_iter: Option<u64>,
    #[arg(long)]
    pub c0: Option<String>,
    /// "log2" or "const:K".
    #[arg(long)]
    pub schedule: Option<String>,
    /// Comma-separated levels for `criterion`; scanner hits when absent.
    #[arg(long)]
    pub levels: Option<String>,
    /// Partition level.
    #[arg(long)]
    pub n: Option<usize>,
    /// Rotation number / rotation angle: "p/q", a decimal, or "golden".
    #[arg(long)]
    pub alpha: Option<String>,
    /// Break point of a two-break PL circle map.
    #[arg(long)]
    pub break_point: Option<String>,
    /// Slope on the first branch of the two-break map.
    #[arg(long)]
    pub s1: Option<String>,
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long)]
    pub x0: Option<String>,
    /// Partial quotients requested from `cf`.
    #[arg(long)]
    pub terms: Option<usize>,
    /// "per-zorich-block" or "per-rv-step".
    #[arg(long)]
    pub normalization: Option<String>,
    #[arg(long)]
    pub m_cap: Option<u64>,
    #[arg(long)]
    pub floor_cap: Option<u64>,
    /// Directory for outputs and the run manifest; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// "json" or "csv".
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON config file (or a previous run manifest).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Applies the config file, if any. A run manifest is accepted and its
    /// recorded config replayed.
    pub fn resolve(self) -> Result<ExperimentConfig, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut file: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        if file.get("tool_version").is_some() {
            file = file.get("config").cloned().ok_or_else(|| bad("manifest has no config"))?;
            // a replay writes wherever the new invocation says
            if let Some(m) = file.as_object_mut() {
                m.remove("out");
            }
        }
        let serde_json::Value::Object(over) = file else { return Err(bad("config file must hold a JSON object")) };
        let mut merged = serde_json::to_value(&self).expect("config serializes");
        let map = merged.as_object_mut().unwrap();
        for (k, v) in over {
            if !v.is_null() {
                map.insert(k, v);
            }
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| bad(format!("config file: {e}")))?;
        cfg.config = None;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("d", self.d.map(|x| x as u64)),
            ("samples", self.samples.map(|x| x as u64)),
            ("precision-bits", self.precision_bits.map(|x| x as u64)),
            ("blocks", self.n_blocks.map(|x| x as u64)),
            ("max-iter", self.max_iter),
            ("n", self.n.map(|x| x as u64)),
            ("terms", self.terms.map(|x| x as u64)),
            ("m-cap", self.m_cap),
            ("floor-cap", self.floor_cap),
            ("jobs", self.jobs.map(|x| x as u64)),
            ("bits", self.bits),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return Err(bad(format!("--{name} must be positive")));
            }
        }
        if let Some(f) = &self.format {
            if f != "json" && f != "csv" {
                return Err(bad(format!("unknown format {f:?}")));
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> usize {
        self.precision_or(DEFAULT_PRECISION)
    }

    /// Precision with a command-specific default when neither flag nor env set it.
    pub fn precision_or(&self, default: usize) -> usize {
        self.precision_bits.unwrap_or(default)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| bad("this command samples at random and needs --seed"))
    }

    pub fn samples(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    pub fn blocks(&self, default: usize) -> usize {
        self.n_blocks.unwrap_or(default)
    }

    pub fn format_csv(&self) -> bool {
        self.format.as_deref() == Some("csv")
    }

    pub fn c0(&self, default: &str) -> Result<Rational, CliError> {
        Ok(parse_rational(self.c0.as_deref().unwrap_or(default))?)
    }

    /// Permutation from `--perm`, else the rotation datum or the symmetric
    /// permutation on `--d` letters.
    pub fn perm(&self) -> Result<Perm, CliError> {
        if let Some(s) = &self.perm {
            let s = s.trim();
            return if s.starts_with('{') {
                serde_json::from_str(s).map_err(|e| CliError::Core(iet_core::Error::InvalidPerm(e.to_string())))
            } else {
                Ok(Perm::parse(s)?)
            };
        }
        let d = self.d.ok_or_else(|| bad("give --perm or --d"))?;
        if self.rotation {
            return Ok(canonical_rotation_perm(d)?);
        }
        Ok(Perm::new(default_alphabet(d), (0..d).collect(), (0..d).rev().collect())?)
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        match (&self.perm, self.d) {
            (Some(_), _) => Ok(self.perm()?.d()),
            (None, Some(d)) => Ok(d),
            _ => Err(bad("give --perm or --d")),
        }
    }
}

pub fn rational_list(s: &str) -> Result<Vec<Rational>, CliError> {
    Ok(s.split(',').map(|x| parse_rational(x.trim())).collect::<iet_core::Result<Vec<_>>>()?)
}

pub fn usize_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| bad(format!("level {x:?}: {e}")))).collect()
}
