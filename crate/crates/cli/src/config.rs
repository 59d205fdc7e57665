//! Flags, config-file merging and per-command validation.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every flag accepted by any command. Unset flags are `None`; a TOML
/// config file uses the same keys with underscores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Weight spec, e.g. `power:s=2`, `powerlog:s=1,eps=-1`, `const`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    /// Quasi-norm exponent `r`, a positive number or `inf`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    /// Dimension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Class exponent `q`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Error exponent `p`; for `hfunc` and `check-psi` the power applied to `ψ`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Functional exponent `s`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Single number of terms.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Comma list `1,2,8` or dyadic range `dyadic:16:4096`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<String>,
    /// Largest shell index; for non-closed-form `r` the shell table size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u64>,
    /// First shell excluded from the growth fit (`shells`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<u64>,
    /// Coefficient file in JSON (`greedy`).
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Quantity for `rates`: class_sp, h_functional or greedy_lp_witness.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    /// Box constant for `lemma51`, dilation for `check-psi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Random frequency sets per n (`lemma51`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Start of the decay-condition grid (`check-psi`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Relative tail truncation tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Cap on runs scanned by the functional.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_runs: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Cap on worker threads.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// TOML file with default flag values; flags on the command line win.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<PathBuf>,
    /// RNG seed (`lemma51`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Shell sizes and cumulative counts with the growth fit.
    Shells(Flags),
    /// The functional H_n of the rearranged weight.
    Hfunc(Flags),
    /// Best n-term error of a class in S^p.
    EnClass(Flags),
    /// Greedy S^p error of a coefficient file.
    Greedy(Flags),
    /// L_p norms of random exponential sums.
    Lemma51(Flags),
    /// Computed quantity against its predicted order.
    Rates(Flags),
    /// Class B and decay evidence for a weight.
    CheckPsi(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Command::Shells(f)
            | Command::Hfunc(f)
            | Command::EnClass(f)
            | Command::Greedy(f)
            | Command::Lemma51(f)
            | Command::Rates(f)
            | Command::CheckPsi(f) => f,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Shells(_) => "shells",
            Command::Hfunc(_) => "hfunc",
            Command::EnClass(_) => "en-class",
            Command::Greedy(_) => "greedy",
            Command::Lemma51(_) => "lemma51",
            Command::Rates(_) => "rates",
            Command::CheckPsi(_) => "check-psi",
        }
    }

    /// Flags the command reads besides `out`, `format`, `threads`, `config`.
    fn accepted(&self) -> &'static [&'static str] {
        match self {
            Command::Shells(_) => &["r", "d", "m_max", "k0"],
            Command::Hfunc(_) => &["psi", "r", "d", "p", "s", "n", "n_grid", "m_max", "tol", "max_runs"],
            Command::EnClass(_) => &["psi", "r", "d", "q", "p", "n", "n_grid", "m_max", "tol", "max_runs"],
            Command::Greedy(_) => &["in", "n", "n_grid", "p"],
            Command::Lemma51(_) => &["d", "p", "n", "n_grid", "c", "trials", "seed"],
            Command::Rates(_) => &[
                "quantity", "psi", "r", "d", "q", "p", "s", "n_grid", "m_max", "tol", "max_runs",
            ],
            Command::CheckPsi(_) => &["psi", "c", "s", "d", "p", "t0"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const GLOBAL: [&str; 4] = ["out", "format", "threads", "config"];

/// Names of the flags that are set.
fn set_keys(flags: &Flags) -> Vec<String> {
    match serde_json::to_value(flags) {
        Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Command-line flags over config-file values.
pub fn merge(cli: &Flags, file: &Flags) -> Flags {
    macro_rules! pick {
        ($($field:ident),*) => {
            Flags { $($field: cli.$field.clone().or_else(|| file.$field.clone()),)* }
        };
    }
    let mut merged = pick!(
        psi, r, d, q, p, s, n, n_grid, m_max, k0, input, quantity, c, trials, t0, tol, max_runs, out, format, threads,
        config, seed
    );
    // `n` and `n_grid` are alternatives: one given on the command line replaces both from the file
    if cli.n.is_some() || cli.n_grid.is_some() {
        merged.n = cli.n;
        merged.n_grid = cli.n_grid.clone();
    }
    merged
}

pub fn load_config(path: &std::path::Path) -> Result<Flags, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", path.display())))?;
    let flags: Flags =
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("bad config {}: {e}", path.display())))?;
    if flags.config.is_some() {
        return Err(CliError::Parse("config files cannot name another config".into()));
    }
    Ok(flags)
}

/// Rejects flags the command does not read.
pub fn check_accepted(command: &Command, flags: &Flags) -> Result<(), CliError> {
    let accepted = command.accepted();
    let extra: Vec<String> = set_keys(flags)
        .into_iter()
        .filter(|k| !GLOBAL.contains(&k.as_str()) && !accepted.contains(&k.as_str()))
        .map(|k| format!("--{}", k.replace('_', "-")))
        .collect();
    if extra.is_empty() {
        Ok(())
    } else {
        Err(CliError::Parse(format!(
            "{command} does not accept {}",
            extra.join(", ")
        )))
    }
}

pub fn require<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Parse(format!("--{name} is required")))
}

/// `1,2,8` or `dyadic:16:4096`; strictly increasing and positive.
pub fn parse_n_grid(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = |why: &str| CliError::Parse(format!("bad --n-grid {spec:?}: {why}"));
    let grid: Vec<u64> = if let Some(range) = spec.strip_prefix("dyadic:") {
        let (lo, hi) = range.split_once(':').ok_or_else(|| bad("expected dyadic:MIN:MAX"))?;
        let lo: u64 = lo.trim().parse().map_err(|_| bad("MIN is not an integer"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad("MAX is not an integer"))?;
        if lo == 0 || hi < lo {
            return Err(bad("need 1 <= MIN <= MAX"));
        }
        nterm_core::rates::dyadic_grid(lo, hi)
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| bad("entries must be integers")))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("must be strictly increasing"));
    }
    Ok(grid)
}

/// The n values from exactly one of `--n` and `--n-grid`.
pub fn n_values(flags: &Flags) -> Result<Vec<u64>, CliError> {
    match (&flags.n, &flags.n_grid) {
        (Some(n), None) => Ok(vec![*n]),
        (None, Some(g)) => parse_n_grid(g),
        (Some(_), Some(_)) => Err(CliError::Parse("give either --n or --n-grid, not both".into())),
        (None, None) => Err(CliError::Parse("--n or --n-grid is required".into())),
    }
}
