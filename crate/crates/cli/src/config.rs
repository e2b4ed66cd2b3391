//! Command options, shared by the command line and the TOML config file.
//!
//! Every option is optional in both places; command-line values win, then
//! the file, then the built-in default. The fully resolved options are what
//! gets hashed and embedded in CSV output.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    /// Spectrum, e.g. `0.9:0.5,0.1:0.5` or `uniform(0.1,0.9)`.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Prior: `rademacher`, `gaussian(rho)` or `discrete(a:w,...)`.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Cells used for a continuous spectrum.
    #[arg(long)]
    pub k_bins: Option<usize>,
    /// Extra random starting points for the fixed-point search.
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Write the record here as well as to standard output.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long)]
    pub prior: Option<String>,
    /// `c` or `inv_sigma2`.
    #[arg(long)]
    pub axis: Option<String>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    /// Fixed `c` for an `inv_sigma2` sweep.
    #[arg(long)]
    pub c: Option<f64>,
    /// Fixed `sigma2` for a `c` sweep.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub k_bins: Option<usize>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Bisection tolerance for transition points.
    #[arg(long)]
    pub transition_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Haar-rotate Gaussian-prior designs before running VAMP.
    #[arg(long)]
    pub rotate: Option<bool>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Use p = 2100 and 50 trials unless set explicitly.
    #[arg(long)]
    pub paper_scale: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReproduceArgs {
    /// One of 1a, 1b, 2a, 2b, 3a, 3b, 4a, 4b.
    pub figure: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paper_scale: Option<bool>,
    /// Redraw the plot from a stored figure CSV instead of recomputing.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub from_csv: Option<PathBuf>,
}

/// Contents of a config file: one optional section per command.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub solve: Option<SolveArgs>,
    pub sweep: Option<SweepArgs>,
    pub simulate: Option<SimulateArgs>,
    pub reproduce: Option<ReproduceArgs>,
}

impl ConfigFile {
    /// Reads a TOML file, or the config embedded in a CSV written by `srm`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "csv") {
            Self::from_csv(&text)
        } else {
            Self::parse(&text)
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Recovers the config embedded in a CSV written by this tool.
    pub fn from_csv(csv: &str) -> Result<Self, CliError> {
        let body: Vec<&str> = csv
            .lines()
            .filter_map(|l| l.strip_prefix("# config: "))
            .collect();
        if body.is_empty() {
            return Err(CliError::Config("no embedded config in CSV".into()));
        }
        Self::parse(&body.join("\n"))
    }
}

macro_rules! merge_fields {
    ($cli:expr, $file:expr, $($f:ident),*) => {{
        let file = $file.unwrap_or_default();
        $( if $cli.$f.is_none() { $cli.$f = file.$f; } )*
    }};
}

impl SolveArgs {
    pub fn merge(mut self, file: Option<Self>) -> Self {
        merge_fields!(self, file, spectrum, prior, c, sigma2, k_bins, multistart, output);
        self
    }
}

impl SweepArgs {
    pub fn merge(mut self, file: Option<Self>) -> Self {
        merge_fields!(
            self,
            file,
            spectrum,
            prior,
            axis,
            grid,
            c,
            sigma2,
            k_bins,
            multistart,
            transition_tol,
            output
        );
        self
    }
}

impl SimulateArgs {
    pub fn merge(mut self, file: Option<Self>) -> Self {
        merge_fields!(
            self,
            file,
            spectrum,
            prior,
            axis,
            grid,
            c,
            sigma2,
            p,
            trials,
            seed,
            rotate,
            damping,
            max_iter,
            paper_scale,
            output
        );
        self
    }
}

impl ReproduceArgs {
    pub fn merge(mut self, file: Option<Self>) -> Self {
        merge_fields!(self, file, figure, p, trials, seed, paper_scale, from_csv);
        self
    }
}

/// Parses a value, naming the key on failure.
pub fn parse_key<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("invalid `{key}` = {value:?}: {e}")))
}

pub fn require<T: Clone>(key: &str, value: &Option<T>) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
}

/// `start:stop:step` (inclusive, tolerant to rounding) or `a,b,c`.
pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("invalid `{key}` = {text:?}: {why}"));
    let grid = if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(bad("too many points"));
        }
        (0..=n)
            .map(|i| srm::experiments::snap(start + i as f64 * step))
            .collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
            .collect::<Result<Vec<_>, _>>()?
    };
    srm::replica::validate_grid(&grid).map_err(|e| bad(&e.to_string()))?;
    Ok(grid)
}

/// Resolved options of one command as TOML, plus its SHA-256 prefix.
pub fn config_digest(section: &ConfigFile) -> Result<(String, String), CliError> {
    let text = toml::to_string(section)
        .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Ok((text, hex))
}

/// Comment lines describing the config, for a CSV preamble.
pub fn config_preamble(section: &ConfigFile) -> Result<Vec<String>, CliError> {
    let (text, hash) = config_digest(section)?;
    let mut lines = vec![format!("config_hash={hash}")];
    lines.extend(
        text.lines()
            .filter(|l| !l.is_empty())
            .map(|l| format!("config: {l}")),
    );
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(
            parse_grid("g", "0.1,0.2, 0.5").unwrap(),
            vec![0.1, 0.2, 0.5]
        );
        let g = parse_grid("g", "0.1:0.3:0.1").unwrap();
        assert_eq!(g, vec![0.1, 0.2, 0.3]);
        assert!(parse_grid("g", "").is_err());
        assert!(parse_grid("g", "1,1").is_err());
        assert!(parse_grid("g", "1:0:0.1").is_err());
        assert!(parse_grid("g", "1:2").is_err());
        let err = parse_grid("grid", "x").unwrap_err().to_string();
        assert!(err.contains("`grid`"), "{err}");
    }

    #[test]
    fn cli_overrides_file() {
        let file = SolveArgs {
            c: Some(1.0),
            sigma2: Some(0.5),
            ..Default::default()
        };
        let cli = SolveArgs {
            c: Some(2.0),
            ..Default::default()
        };
        let m = cli.merge(Some(file));
        assert_eq!(m.c, Some(2.0));
        assert_eq!(m.sigma2, Some(0.5));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ConfigFile::parse("[solve]\nsigma = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("sigma"), "{err}");
        assert!(ConfigFile::parse("[bogus]\n").is_err());
    }

    #[test]
    fn digest_round_trips_through_preamble() {
        let cfg = ConfigFile {
            sweep: Some(SweepArgs {
                spectrum: Some("0.9:0.5,0.1:0.5".into()),
                grid: Some("0.5:3:0.5".into()),
                output: Some("ignored.csv".into()),
                ..Default::default()
            }),
            ..Default::default()
        };
        let pre = config_preamble(&cfg).unwrap();
        let csv: String = pre.iter().map(|l| format!("# {l}\n")).collect::<String>() + "x\n1\n";
        let back = ConfigFile::from_csv(&csv).unwrap();
        assert_eq!(config_digest(&back).unwrap(), config_digest(&cfg).unwrap());
        assert_eq!(back.sweep.unwrap().output, None);
    }
}
