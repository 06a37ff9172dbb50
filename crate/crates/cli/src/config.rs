use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use permfix_core::coupling::{RunConfig, Selector};
use serde::{Deserialize, Serialize};

/// Raw command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub n: Option<String>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub horizon: Option<u64>,
    pub digits: Option<u32>,
    pub jobs: Option<usize>,
    pub config: Option<PathBuf>,
}

/// `N` in a config file: a number or a range string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum SizeSpec {
    One(usize),
    Text(String),
}

/// Config file for every command except `couple`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolConfig {
    #[serde(rename = "N")]
    n: Option<SizeSpec>,
    seed: Option<u64>,
    replicas: Option<u64>,
    horizon: Option<u64>,
    digits: Option<u32>,
}

/// Fully resolved parameters; hashed into the report.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub command: String,
    pub ns: Vec<usize>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub horizon: Option<u64>,
    pub digits: u32,
    pub run: Option<RunConfig>,
}

pub const DEFAULT_DIGITS: u32 = 50;

/// `a`, `a..b` or `a..=b` (both inclusive), or `a,b,c`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<usize>().with_context(|| format!("bad size {t:?} in {s:?}"));
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            bail!("empty range {s:?}");
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() {
        bail!("no sizes in {s:?}");
    }
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        anyhow::anyhow!("config {}: at `{at}`: {}", path.display(), e.into_inner())
    })
}

fn default_sizes(command: &str) -> Vec<usize> {
    match command {
        "exact" => (4..=15).collect(),
        "kernel" => (4..=12).collect(),
        "project" => (3..=7).collect(),
        "couple" => vec![8],
        "alt" => vec![10, 20, 40, 80],
        _ => (4..=10).collect(),
    }
}

impl Settings {
    pub fn resolve(command: &str, flags: &Flags) -> Result<Self> {
        let flag_ns = flags.n.as_deref().map(parse_sizes).transpose()?;
        if command == "couple" {
            return Self::resolve_couple(flags, flag_ns);
        }
        let file: ToolConfig = match &flags.config {
            Some(p) => read_json(p)?,
            None => ToolConfig::default(),
        };
        let file_ns = match file.n {
            Some(SizeSpec::One(n)) => Some(vec![n]),
            Some(SizeSpec::Text(t)) => Some(parse_sizes(&t)?),
            None => None,
        };
        let default_replicas = (command == "alt").then_some(1_000_000);
        Ok(Self {
            command: command.to_string(),
            ns: flag_ns.or(file_ns).unwrap_or_else(|| default_sizes(command)),
            seed: flags.seed.or(file.seed).or((command == "alt").then_some(0)),
            replicas: flags.replicas.or(file.replicas).or(default_replicas),
            horizon: flags.horizon.or(file.horizon),
            digits: flags.digits.or(file.digits).unwrap_or(DEFAULT_DIGITS),
            run: None,
        })
    }

    fn resolve_couple(flags: &Flags, flag_ns: Option<Vec<usize>>) -> Result<Self> {
        let mut run = match &flags.config {
            Some(p) => read_json::<RunConfig>(p)?,
            None => RunConfig::new(8, 10_000, 1_000, 0, Selector::CheckR),
        };
        if let Some(ns) = flag_ns {
            if ns.len() != 1 {
                bail!("couple takes a single N");
            }
            run.size = ns[0];
        }
        if let Some(h) = flags.horizon {
            run.horizon = h;
        }
        if let Some(r) = flags.replicas {
            run.replicas = r;
        }
        if let Some(s) = flags.seed {
            run.seed = s;
        }
        if let Some(j) = flags.jobs {
            run.jobs = j;
        }
        run.validate()?;
        Ok(Self {
            command: "couple".into(),
            ns: vec![run.size],
            seed: Some(run.seed),
            replicas: Some(run.replicas),
            horizon: Some(run.horizon),
            digits: flags.digits.unwrap_or(DEFAULT_DIGITS),
            run: Some(run),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_syntax() {
        assert_eq!(parse_sizes("4").unwrap(), vec![4]);
        assert_eq!(parse_sizes("4..6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_sizes("4..=6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_sizes("10,20").unwrap(), vec![10, 20]);
        assert!(parse_sizes("6..4").is_err());
        assert!(parse_sizes("x").is_err());
    }
}
