//! One function per subcommand. Each returns the CSV text and the JSON body.

use std::path::Path;

use nterm_core::approx::{class_best_nterm_sp, greedy_remainder_sp, CoefficientSequence, FunctionClassSpec};
use nterm_core::functionals::{h_functional_with, FunctionalResult, Regime, ScanOptions};
use nterm_core::lattice::{
    fit_growth_bounds, shell_counts, Exponent, MultiIndex, ShellSource, DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_GROWTH_OFFSET_CAP,
};
use nterm_core::rates::{rate_table, ratio_window, Quantity, RateOptions, RateParams, DECAY_T0};
use nterm_core::trig_lp::{exponential_sum_norm, hausdorff_young_gap, GridSpec, DEFAULT_GRID_BUDGET};
use nterm_core::weights::{
    check_class_b, check_decay_condition_powered, log_grid, ClassBThresholds, RearrangedWeight, WeightFunction,
    DECAY_GRID_END,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{n_values, require, Command, Flags};
use crate::CliError;

const DEFAULT_SHELL_M_MAX: u64 = 256;
const DEFAULT_TRIALS: usize = 50;
const DEFAULT_LEMMA_C: f64 = 2.0;
const DEFAULT_CLASS_B_C: f64 = 2.0;
const CLASS_B_GRID_POINTS: usize = 200;

pub struct Output {
    pub csv: String,
    pub body: Value,
}

/// Point budgets; `NTERM_BUDGET_POINTS` replaces both when set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Budgets {
    pub enumeration: u64,
    pub grid: u64,
}

impl Budgets {
    pub fn from_override(points: Option<u64>) -> Self {
        Budgets {
            enumeration: points.unwrap_or(DEFAULT_ENUMERATION_BUDGET),
            grid: points.unwrap_or(DEFAULT_GRID_BUDGET),
        }
    }
}

fn compute(e: nterm_core::Error) -> CliError {
    CliError::Compute(e.to_string())
}

fn invalid(e: nterm_core::Error) -> CliError {
    CliError::Parse(e.to_string())
}

/// `{:.16e}`: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn exponent(flags: &Flags) -> Result<Exponent, CliError> {
    flags
        .r
        .as_deref()
        .map_or(Ok(Exponent::Infinity), str::parse)
        .map_err(invalid)
}

fn weight(flags: &Flags) -> Result<WeightFunction, CliError> {
    require(&flags.psi, "psi")?.parse().map_err(invalid)
}

fn positive(value: Option<f64>, name: &str) -> Result<(), CliError> {
    match value {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Parse(format!("--{name} must be positive, got {v}"))),
        _ => Ok(()),
    }
}

/// Range checks shared by all commands, applied before any computation.
pub fn validate(flags: &Flags) -> Result<(), CliError> {
    for (v, name) in [
        (flags.q, "q"),
        (flags.p, "p"),
        (flags.s, "s"),
        (flags.c, "c"),
        (flags.t0, "t0"),
    ] {
        positive(v, name)?;
    }
    if let Some(tol) = flags.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Parse(format!("--tol must lie in (0, 1), got {tol}")));
        }
    }
    for (v, name) in [(flags.d, "d"), (flags.trials, "trials"), (flags.threads, "threads")] {
        if v == Some(0) {
            return Err(CliError::Parse(format!("--{name} must be at least 1")));
        }
    }
    for (v, name) in [(flags.m_max, "m-max"), (flags.max_runs, "max-runs"), (flags.k0, "k0")] {
        if v == Some(0) {
            return Err(CliError::Parse(format!("--{name} must be at least 1")));
        }
    }
    Ok(())
}

pub fn run(command: &Command, flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    match command {
        Command::Shells(_) => shells(flags, budgets),
        Command::Hfunc(_) => hfunc(flags, budgets),
        Command::EnClass(_) => en_class(flags, budgets),
        Command::Greedy(_) => greedy(flags),
        Command::Lemma51(_) => lemma51(flags, budgets),
        Command::Rates(_) => rates(flags, budgets),
        Command::CheckPsi(_) => check_psi(flags),
    }
}

fn shells(flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    let r: Exponent = require(&flags.r, "r")?.parse().map_err(invalid)?;
    let d = require(&flags.d, "d")?;
    let m_max = require(&flags.m_max, "m-max")?;
    let k0 = flags.k0.unwrap_or(1);
    let sd = shell_counts(r, d, m_max, budgets.enumeration).map_err(compute)?;
    let fit = fit_growth_bounds(&sd, k0, DEFAULT_GROWTH_OFFSET_CAP);
    let mut csv = String::from("m,nu,V\n");
    for (m, (nu, v)) in sd.nu.iter().zip(&sd.v).enumerate() {
        csv.push_str(&format!("{m},{nu},{v}\n"));
    }
    csv.push_str(&format!(
        "# fit k0={k0} m0={} c1={} c2={} ok={}\n",
        num(fit.m0),
        num(fit.c1),
        num(fit.c2),
        fit.ok
    ));
    Ok(Output {
        csv,
        body: json!({ "shells": sd, "fit": fit, "k0": k0 }),
    })
}

fn scan_options(flags: &Flags) -> ScanOptions {
    let base = ScanOptions::default();
    ScanOptions {
        tail_tol: flags.tol.unwrap_or(base.tail_tol),
        max_runs: flags.max_runs.unwrap_or(base.max_runs),
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::SupRegime => "sup_regime",
        Regime::TailRegime => "tail_regime",
    }
}

#[derive(Serialize)]
struct FunctionalRow {
    n: u64,
    #[serde(flatten)]
    result: FunctionalResult,
}

fn functional_output(rows: Vec<FunctionalRow>) -> Output {
    let mut csv = String::from("n,value,l_star,regime,error_bound\n");
    for row in &rows {
        let r = &row.result;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n,
            num(r.value),
            r.l_star.map(|l| l.to_string()).unwrap_or_default(),
            regime_name(r.regime),
            num(r.tail_truncation_error_bound)
        ));
    }
    Output {
        csv,
        body: json!({ "rows": rows }),
    }
}

fn shell_source(flags: &Flags, r: Exponent, d: usize, budgets: Budgets) -> Result<ShellSource, CliError> {
    let m_max = flags.m_max.unwrap_or(DEFAULT_SHELL_M_MAX);
    ShellSource::new(r, d, m_max, budgets.enumeration).map_err(compute)
}

fn hfunc(flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    let psi = weight(flags)?;
    let s = require(&flags.s, "s")?;
    let r = exponent(flags)?;
    let d = flags.d.unwrap_or(1);
    let power = flags.p.unwrap_or(1.0);
    let ns = n_values(flags)?;
    let opts = scan_options(flags);
    let rw = RearrangedWeight::new(psi, shell_source(flags, r, d, budgets)?, power).map_err(invalid)?;
    let rows = ns
        .par_iter()
        .map(|&n| h_functional_with(&rw, n, s, opts).map(|result| FunctionalRow { n, result }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(compute)?;
    Ok(functional_output(rows))
}

fn en_class(flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    let psi = weight(flags)?;
    let q = require(&flags.q, "q")?;
    let p = require(&flags.p, "p")?;
    let r = exponent(flags)?;
    let d = flags.d.unwrap_or(1);
    let ns = n_values(flags)?;
    let opts = scan_options(flags);
    let spec = FunctionClassSpec::new(q, r, psi, d).map_err(invalid)?;
    let shells = shell_source(flags, r, d, budgets)?;
    let rows = ns
        .par_iter()
        .map(|&n| class_best_nterm_sp(&spec, n, p, &shells, opts).map(|result| FunctionalRow { n, result }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(compute)?;
    Ok(functional_output(rows))
}

fn read_coefficients(path: &Path) -> Result<CoefficientSequence, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("bad coefficient file {}: {e}", path.display())))
}

fn greedy(flags: &Flags) -> Result<Output, CliError> {
    let f = read_coefficients(&require(&flags.input, "in")?)?;
    let p = require(&flags.p, "p")?;
    let ns = n_values(flags)?;
    let mut csv = String::from("n,error\n");
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let n_terms = usize::try_from(n).map_err(|_| CliError::Parse(format!("--n {n} too large")))?;
        let error = greedy_remainder_sp(&f, n_terms, p).map_err(compute)?;
        csv.push_str(&format!("{n},{}\n", num(error)));
        rows.push(json!({ "n": n, "error": error }));
    }
    Ok(Output {
        csv,
        body: json!({ "terms": f.len(), "rows": rows }),
    })
}

#[derive(Serialize)]
struct LemmaRow {
    n: u64,
    side: u64,
    min_ratio: f64,
    max_ratio: f64,
    /// Smallest Hausdorff–Young gap over the trials; absent for `p < 2`.
    min_hausdorff_young_gap: Option<f64>,
    all_exact: bool,
    norms: Vec<f64>,
}

/// Random `n`-subsets of `[-side, side]^d`, `side = ⌊c n^{1/d}⌋`.
fn lemma_row(
    n: u64,
    d: usize,
    p: f64,
    c: f64,
    trials: usize,
    seed: u64,
    budgets: Budgets,
) -> Result<LemmaRow, CliError> {
    let side = (c * (n as f64).powf(1.0 / d as f64)).floor() as u64;
    let width = 2 * side + 1;
    let total = (width as u128).pow(d as u32);
    if total < n as u128 {
        return Err(CliError::Parse(format!(
            "box of side {side} holds fewer than n = {n} points"
        )));
    }
    let total = usize::try_from(total).map_err(|_| CliError::Compute(format!("box for n = {n} too large")))?;
    let amount = usize::try_from(n).map_err(|_| CliError::Compute(format!("n = {n} too large")))?;
    // one stream per n keeps the sets independent of the n-grid
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    let mut norms = Vec::with_capacity(trials);
    let mut gaps = Vec::new();
    let mut all_exact = true;
    for _ in 0..trials {
        let gamma: Vec<MultiIndex> = sample(&mut rng, total, amount)
            .into_iter()
            .map(|mut flat| {
                let mut k = vec![0i64; d];
                for slot in k.iter_mut().rev() {
                    *slot = (flat % width as usize) as i64 - side as i64;
                    flat /= width as usize;
                }
                MultiIndex(k)
            })
            .collect();
        let f = CoefficientSequence::from_entries(d, gamma.iter().map(|k| (k.clone(), 1.0.into()))).map_err(compute)?;
        let grid = GridSpec::for_polynomial(&f, p)
            .map_err(compute)?
            .with_budget(budgets.grid);
        let norm = exponential_sum_norm(&gamma, p, &grid, c).map_err(compute)?;
        all_exact &= norm.exact;
        norms.push(norm.value);
        if p >= 2.0 {
            gaps.push(hausdorff_young_gap(&f, p, &grid).map_err(compute)?);
        }
    }
    let scale = (n as f64).powf(1.0 - 1.0 / p);
    let ratios = norms.iter().map(|v| v / scale);
    Ok(LemmaRow {
        n,
        side,
        min_ratio: ratios.clone().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.fold(f64::NEG_INFINITY, f64::max),
        min_hausdorff_young_gap: (!gaps.is_empty()).then(|| gaps.iter().copied().fold(f64::INFINITY, f64::min)),
        all_exact,
        norms,
    })
}

fn lemma51(flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    let d = flags.d.unwrap_or(1);
    let p = require(&flags.p, "p")?;
    if p < 1.0 {
        return Err(CliError::Parse(format!("--p must be at least 1, got {p}")));
    }
    let c = flags.c.unwrap_or(DEFAULT_LEMMA_C);
    let trials = flags.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = flags.seed.unwrap_or(0);
    let ns = n_values(flags)?;
    let rows = ns
        .par_iter()
        .map(|&n| lemma_row(n, d, p, c, trials, seed, budgets))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("n,side,min_ratio,max_ratio,min_hausdorff_young_gap,all_exact\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.n,
            row.side,
            num(row.min_ratio),
            num(row.max_ratio),
            row.min_hausdorff_young_gap.map(num).unwrap_or_default(),
            row.all_exact
        ));
    }
    let min = rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(Output {
        csv,
        body: json!({ "rows": rows, "ratio_window": { "min": min, "max": max } }),
    })
}

fn rates(flags: &Flags, budgets: Budgets) -> Result<Output, CliError> {
    let quantity: Quantity = require(&flags.quantity, "quantity")?.parse().map_err(invalid)?;
    let params = RateParams {
        psi: weight(flags)?,
        d: flags.d.unwrap_or(1),
        r: exponent(flags)?,
        q: flags.q,
        p: flags.p,
        s: flags.s,
    };
    let grid = crate::config::parse_n_grid(&require(&flags.n_grid, "n-grid")?)?;
    let opts = RateOptions {
        scan: scan_options(flags),
        shell_m_max: flags.m_max.unwrap_or(DEFAULT_SHELL_M_MAX),
        enumeration_budget: budgets.enumeration,
        grid_budget: budgets.grid,
    };
    let table = rate_table(quantity, &params, &grid, opts).map_err(compute)?;
    let (min, max) = ratio_window(&table).map_err(compute)?;
    Ok(Output {
        csv: table.to_csv(),
        body: json!({ "table": table, "ratio_window": { "min": min, "max": max } }),
    })
}

fn check_psi(flags: &Flags) -> Result<Output, CliError> {
    let psi = weight(flags)?;
    let c = flags.c.unwrap_or(DEFAULT_CLASS_B_C);
    if c <= 1.0 {
        return Err(CliError::Parse(format!("--c must exceed 1, got {c}")));
    }
    let grid = log_grid(1.0, DECAY_GRID_END, CLASS_B_GRID_POINTS);
    let class_b = check_class_b(&psi, c, &grid, ClassBThresholds::default()).map_err(compute)?;
    let decay = match flags.s {
        Some(s) => {
            if s <= 1.0 {
                return Err(CliError::Parse(format!(
                    "--s must exceed 1 for the decay check, got {s}"
                )));
            }
            let power = flags.p.unwrap_or(1.0);
            let t0 = flags.t0.unwrap_or(DECAY_T0);
            Some(check_decay_condition_powered(&psi, power, s, flags.d.unwrap_or(1), t0).map_err(compute)?)
        }
        None => None,
    };
    let mut csv = String::from("check,key,value\n");
    for (key, value) in flat_fields(&serde_json::to_value(&class_b).expect("plain struct")) {
        csv.push_str(&format!("class_b,{key},{value}\n"));
    }
    if let Some(decay) = &decay {
        for (key, value) in flat_fields(&serde_json::to_value(decay).expect("plain struct")) {
            csv.push_str(&format!("decay,{key},{value}\n"));
        }
    }
    Ok(Output {
        csv,
        body: json!({ "psi": psi.to_string(), "class_b": class_b, "decay": decay }),
    })
}

/// Top-level fields of a JSON object in CSV form, floats at full precision.
fn flat_fields(v: &Value) -> Vec<(String, String)> {
    let Value::Object(map) = v else {
        return Vec::new();
    };
    map.iter()
        .map(|(k, v)| {
            let text = match v {
                Value::Number(x) if x.is_f64() => num(x.as_f64().expect("f64")),
                Value::Null => String::new(),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect()
}
