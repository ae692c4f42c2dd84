//! Run configuration: built-in defaults, then a preset, then `key=value`
//! lines from `--config`, then command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use sram_ntt::params::{min_width, preset, PRESETS};
use sram_ntt::{validate_params, EnergyModel, NttParams, RingMode};

use crate::CliError;

#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Transform size (power of two)
    #[arg(long)]
    pub n: Option<usize>,
    /// Prime modulus
    #[arg(long)]
    pub q: Option<u64>,
    /// Operand width in bits (default: bitlength(q) + 2)
    #[arg(long = "N", id = "width", value_name = "BITS")]
    pub width: Option<u32>,
    /// cyclic (x^n - 1) or negacyclic (x^n + 1)
    #[arg(long)]
    pub mode: Option<RingMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Named parameter set: toy8, rlwe256, rlwe512, rlwe1024
    #[arg(long)]
    pub preset: Option<String>,
    /// key=value file with the same keys as the flags
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Reduced sweep
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub q: Option<u64>,
    pub width: Option<u32>,
    pub mode: RingMode,
    pub seed: u64,
    pub energy: EnergyModel,
    pub out: Option<PathBuf>,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: None,
            q: None,
            width: None,
            mode: RingMode::Cyclic,
            seed: 0,
            energy: EnergyModel::default(),
            out: None,
            quick: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("bad value `{value}` for `{key}`"))),
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::FileFormat {
            line: i + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text)
}

impl RunConfig {
    pub fn resolve(args: &ParamArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let mut cfg = RunConfig::default();

        let preset_name = args.preset.clone().or_else(|| file.get("preset").cloned());
        if let Some(name) = preset_name {
            let p = preset(&name).ok_or_else(|| {
                let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
                CliError::Usage(format!("unknown preset `{name}` (known: {})", known.join(", ")))
            })?;
            cfg.n = Some(p.n);
            cfg.q = Some(p.q);
            cfg.mode = p.mode;
        }

        for (key, value) in &file {
            match key.as_str() {
                "preset" => {}
                "n" => cfg.n = Some(parse_value(key, value)?),
                "q" => cfg.q = Some(parse_value(key, value)?),
                "N" => cfg.width = Some(parse_value(key, value)?),
                "mode" => cfg.mode = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                "quick" => cfg.quick = parse_bool(key, value)?,
                other => match other.strip_prefix("energy.") {
                    Some(cost) => cfg
                        .energy
                        .set(cost, parse_value(key, value)?)
                        .map_err(CliError::Usage)?,
                    None => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
                },
            }
        }

        if let Some(n) = args.n {
            cfg.n = Some(n);
        }
        if let Some(q) = args.q {
            cfg.q = Some(q);
        }
        if let Some(w) = args.width {
            cfg.width = Some(w);
        }
        if let Some(mode) = args.mode {
            cfg.mode = mode;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.out = Some(out.clone());
        }
        cfg.quick |= args.quick;
        Ok(cfg)
    }

    /// Validated parameters; `n` and `q` must be set.
    pub fn params(&self) -> Result<NttParams, CliError> {
        let n = self
            .n
            .ok_or_else(|| CliError::Usage("missing --n (or --preset)".into()))?;
        let q = self
            .q
            .ok_or_else(|| CliError::Usage("missing --q (or --preset)".into()))?;
        let width = self.width.unwrap_or_else(|| min_width(q));
        Ok(validate_params(q, n, width, self.mode)?)
    }
}
