//! Order-estimate verification: computed quantities over an `n`-grid paired
//! with predicted rates of the form `ψ(n^{1/d}) / n^e`.
//!
//! | theorem          | quantity                         | `e`               |
//! |------------------|----------------------------------|-------------------|
//! | `thm31_p_le_2`   | `L_p` greedy error, `1 <= p <= 2` | `1/q - 1/2`       |
//! | `thm31_p_ge_2`   | `L_p` greedy error, `p >= 2`     | `1/q + 1/p - 1`   |
//! | `lemma41`        | `H_n(Ψ, s)`                      | `1/s - 1`         |
//! | `assertion41`    | `e_n(F^ψ_{q,r})_{S^p}`           | `1/q - 1/p`       |
//!
//! A ratio window `[K1, K2]` that stays narrow across scales is the
//! numerical form of `≍`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{class_best_nterm_sp, extremal_function_f1, greedy_remainder, FunctionClassSpec};
use crate::error::{Error, Result};
use crate::functionals::{h_functional_with, ScanOptions};
use crate::lattice::{Exponent, ShellSource, DEFAULT_ENUMERATION_BUDGET};
use crate::trig_lp::{lp_norm, GridSpec, DEFAULT_GRID_BUDGET};
use crate::weights::{
    check_class_b, check_decay_condition_powered, log_grid, ClassBThresholds, RearrangedWeight, WeightFunction,
};

/// Lower end of the range on which the decay condition is sampled.
pub const DECAY_T0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    #[serde(rename = "thm31_p_le_2")]
    Thm31PLe2,
    #[serde(rename = "thm31_p_ge_2")]
    Thm31PGe2,
    Lemma41,
    Assertion41,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::Thm31PLe2 => "thm31_p_le_2",
            Theorem::Thm31PGe2 => "thm31_p_ge_2",
            Theorem::Lemma41 => "lemma41",
            Theorem::Assertion41 => "assertion41",
        })
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm31_p_le_2" => Ok(Theorem::Thm31PLe2),
            "thm31_p_ge_2" => Ok(Theorem::Thm31PGe2),
            "lemma41" => Ok(Theorem::Lemma41),
            "assertion41" => Ok(Theorem::Assertion41),
            _ => Err(Error::InvalidParameter(format!("unknown theorem tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub psi: WeightFunction,
    pub d: usize,
    pub r: Exponent,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub s: Option<f64>,
}

impl RateParams {
    fn need(&self, name: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| Error::InvalidParameter(format!("parameter {name} is required")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRate {
    pub value: f64,
    pub hypotheses_met: bool,
    pub unmet: Vec<String>,
}

/// Exponent `e` in `ψ(n^{1/d}) / n^e`.
fn rate_exponent(theorem: Theorem, params: &RateParams) -> Result<f64> {
    Ok(match theorem {
        Theorem::Thm31PLe2 => 1.0 / params.need("q", params.q)? - 0.5,
        Theorem::Thm31PGe2 => 1.0 / params.need("q", params.q)? + 1.0 / params.need("p", params.p)? - 1.0,
        Theorem::Lemma41 => 1.0 / params.need("s", params.s)? - 1.0,
        Theorem::Assertion41 => 1.0 / params.need("q", params.q)? - 1.0 / params.need("p", params.p)?,
    })
}

/// Sampled check of the hypotheses of `theorem`; returns the unmet ones.
pub fn check_hypotheses(theorem: Theorem, params: &RateParams) -> Result<Vec<String>> {
    let mut unmet = Vec::new();
    let d = params.d;
    let class_b = check_class_b(&params.psi, 2.0, &log_grid(1.0, 1e6, 200), ClassBThresholds::default())?;
    if !class_b.in_class_b {
        unmet.push("psi not in class B".to_string());
    }
    // decay check for ψ^power with s = ratio
    let decay = |unmet: &mut Vec<String>, power: f64, s: f64, what: &str| -> Result<()> {
        let ev = check_decay_condition_powered(&params.psi, power, s, d, DECAY_T0)?;
        if !ev.passes {
            unmet.push(format!("{what}: sup alpha = {} not below {}", ev.k_psi, ev.threshold));
        }
        if !ev.convex {
            unmet.push(format!("{what}: not convex"));
        }
        Ok(())
    };
    match theorem {
        Theorem::Thm31PLe2 | Theorem::Thm31PGe2 => {
            let q = params.need("q", params.q)?;
            let p = params.need("p", params.p)?;
            if params.r.as_f64() < 1.0 {
                unmet.push("r < 1".into());
            }
            let in_branch = match theorem {
                Theorem::Thm31PLe2 => (1.0..=2.0).contains(&p),
                _ => p >= 2.0,
            };
            if !in_branch {
                unmet.push(format!("p = {p} outside the branch"));
            }
            let p_conj = if p > 1.0 { p / (p - 1.0) } else { f64::INFINITY };
            if q > p_conj {
                if p <= 2.0 {
                    decay(&mut unmet, 2.0, q / 2.0, "decay")?;
                } else {
                    decay(&mut unmet, p_conj, q / p_conj, "decay")?;
                }
            }
        }
        Theorem::Lemma41 => {
            let s = params.need("s", params.s)?;
            if s > 1.0 {
                decay(&mut unmet, 1.0, s, "decay")?;
            }
        }
        Theorem::Assertion41 => {
            let q = params.need("q", params.q)?;
            let p = params.need("p", params.p)?;
            if p < 1.0 {
                unmet.push("p < 1".into());
            }
            if ShellSource::closed_form(params.r, d).is_none() {
                unmet.push(format!("growth constants for r = {} not established", params.r));
            }
            if q > p {
                decay(&mut unmet, p, q / p, "decay")?;
            }
        }
    }
    Ok(unmet)
}

/// `ψ(n^{1/d}) / n^e` for the theorem's exponent `e`.
pub fn predicted_rate(theorem: Theorem, params: &RateParams, n: u64) -> Result<PredictedRate> {
    let unmet = check_hypotheses(theorem, params)?;
    Ok(PredictedRate {
        value: rate_value(theorem, params, n)?,
        hypotheses_met: unmet.is_empty(),
        unmet,
    })
}

fn rate_value(theorem: Theorem, params: &RateParams, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("rates need n >= 1".into()));
    }
    let e = rate_exponent(theorem, params)?;
    let ln_n = (n as f64).ln();
    Ok((params.psi.ln_eval((ln_n / params.d as f64).exp()) - e * ln_n).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `e_n(F^ψ_{q,r})_{S^p}`.
    ClassSp,
    /// `H_n(ψ̄, s)`.
    HFunctional,
    /// `‖f_1 - G_n f_1‖_{L_p}` for the extremal function, `d = 1`.
    GreedyLpWitness,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::ClassSp => "class_sp",
            Quantity::HFunctional => "h_functional",
            Quantity::GreedyLpWitness => "greedy_lp_witness",
        })
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class_sp" | "class-sp" => Ok(Quantity::ClassSp),
            "h_functional" | "hfunc" => Ok(Quantity::HFunctional),
            "greedy_lp_witness" | "greedy-lp" => Ok(Quantity::GreedyLpWitness),
            _ => Err(Error::InvalidParameter(format!("unknown quantity {s:?}"))),
        }
    }
}

impl Quantity {
    fn theorem(self, params: &RateParams) -> Result<Theorem> {
        Ok(match self {
            Quantity::ClassSp => Theorem::Assertion41,
            Quantity::HFunctional => Theorem::Lemma41,
            Quantity::GreedyLpWitness => {
                if params.need("p", params.p)? <= 2.0 {
                    Theorem::Thm31PLe2
                } else {
                    Theorem::Thm31PGe2
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub scan: ScanOptions,
    /// Shell table size when `r` has no closed form.
    pub shell_m_max: u64,
    pub enumeration_budget: u64,
    pub grid_budget: u64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            scan: ScanOptions::default(),
            shell_m_max: 256,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            grid_budget: DEFAULT_GRID_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub computed: f64,
    pub predicted: f64,
    pub ratio: f64,
    /// For `L_p`, `p > 2`: the rate of the other branch, a lower bound order
    /// that leaves a gap to `predicted`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion_predicted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMetadata {
    pub quantity: Quantity,
    pub theorem: Theorem,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion_theorem: Option<Theorem>,
    pub psi: String,
    pub d: usize,
    pub r: Exponent,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub metadata: RateMetadata,
    pub hypotheses_met: bool,
    pub unmet: Vec<String>,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// CSV with header `n,computed,predicted,ratio`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,computed,predicted,ratio\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                row.n, row.computed, row.predicted, row.ratio
            ));
        }
        out
    }
}

fn compute_quantity(
    quantity: Quantity,
    params: &RateParams,
    n: u64,
    shells: &ShellSource,
    opts: &RateOptions,
) -> Result<f64> {
    match quantity {
        Quantity::ClassSp => {
            let spec = FunctionClassSpec::new(params.need("q", params.q)?, params.r, params.psi, params.d)?;
            Ok(class_best_nterm_sp(&spec, n, params.need("p", params.p)?, shells, opts.scan)?.value)
        }
        Quantity::HFunctional => {
            let rw = RearrangedWeight::new(params.psi, shells.clone(), 1.0)?;
            Ok(h_functional_with(&rw, n, params.need("s", params.s)?, opts.scan)?.value)
        }
        Quantity::GreedyLpWitness => {
            if params.d != 1 {
                return Err(Error::InvalidParameter(
                    "the L_p witness is computed for d = 1 only".into(),
                ));
            }
            let p = params.need("p", params.p)?;
            let f1 = extremal_function_f1(n, params.need("q", params.q)?, &params.psi, 1, opts.enumeration_budget)?;
            let rest = greedy_remainder(&f1, n as usize);
            if rest.is_empty() {
                return Ok(0.0);
            }
            let grid = GridSpec::for_polynomial(&f1, p)?.with_budget(opts.grid_budget);
            Ok(lp_norm(&rest, p, &grid)?.value)
        }
    }
}

/// Computes `quantity` at each `n` and pairs it with the predicted rate.
pub fn rate_table(quantity: Quantity, params: &RateParams, n_grid: &[u64], opts: RateOptions) -> Result<RateTable> {
    if n_grid.is_empty() {
        return Err(Error::InvalidParameter("n-grid is empty".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n-grid must be strictly increasing".into()));
    }
    let theorem = quantity.theorem(params)?;
    let companion = match (quantity, theorem) {
        (Quantity::GreedyLpWitness, Theorem::Thm31PGe2) if params.p != Some(2.0) => Some(Theorem::Thm31PLe2),
        _ => None,
    };
    let shells = ShellSource::new(params.r, params.d, opts.shell_m_max, opts.enumeration_budget)?;
    let unmet = check_hypotheses(theorem, params)?;
    let rows = n_grid
        .par_iter()
        .map(|&n| -> Result<RateRow> {
            let computed = compute_quantity(quantity, params, n, &shells, &opts)?;
            let predicted = rate_value(theorem, params, n)?;
            let companion_predicted = companion.map(|t| rate_value(t, params, n)).transpose()?;
            Ok(RateRow {
                n,
                computed,
                predicted,
                ratio: computed / predicted,
                companion_predicted,
                companion_ratio: companion_predicted.map(|c| computed / c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable {
        metadata: RateMetadata {
            quantity,
            theorem,
            companion_theorem: companion,
            psi: params.psi.to_string(),
            d: params.d,
            r: params.r,
            q: params.q,
            p: params.p,
            s: params.s,
        },
        hypotheses_met: unmet.is_empty(),
        unmet,
        rows,
    })
}

/// `(min ratio, max ratio)` over the rows.
pub fn ratio_window(table: &RateTable) -> Result<(f64, f64)> {
    if table.rows.is_empty() {
        return Err(Error::InvalidParameter("empty rate table".into()));
    }
    Ok(table
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.ratio), hi.max(r.ratio))
        }))
}

/// `16, 32, …` up to and including `max` when it is on the grid.
pub fn dyadic_grid(min: u64, max: u64) -> Vec<u64> {
    std::iter::successors(Some(min.max(1)), |&n| n.checked_mul(2))
        .take_while(|&n| n <= max)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(psi: WeightFunction, d: usize, q: Option<f64>, p: Option<f64>, s: Option<f64>) -> RateParams {
        RateParams {
            psi,
            d,
            r: Exponent::Infinity,
            q,
            p,
            s,
        }
    }

    #[test]
    fn power_weights_reduce_to_power_laws() {
        let sexp = 1.5;
        let psi = WeightFunction::power(sexp).unwrap();
        let pr = params(psi, 2, Some(1.5), Some(1.5), None);
        for n in [3u64, 17, 1000] {
            let got = predicted_rate(Theorem::Thm31PLe2, &pr, n).unwrap().value;
            let want = (n as f64).powf(-sexp / 2.0 - 1.0 / 1.5 + 0.5);
            assert!((got / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_exponents() {
        let psi = WeightFunction::power(2.0).unwrap();
        let pr = params(psi, 1, Some(2.0), Some(2.0), Some(1.0));
        for n in [1u64, 9, 100] {
            let a = predicted_rate(Theorem::Assertion41, &pr, n).unwrap().value;
            assert!((a - psi.eval(n as f64)).abs() < 1e-15);
            let l = predicted_rate(Theorem::Lemma41, &pr, n).unwrap().value;
            assert!((l - psi.eval(n as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_parameter_is_reported() {
        let pr = params(WeightFunction::power(2.0).unwrap(), 1, None, Some(2.0), None);
        assert!(predicted_rate(Theorem::Assertion41, &pr, 4).is_err());
    }

    #[test]
    fn unmet_hypotheses_are_flagged() {
        // α ≡ 1/0.2 = 5 is far above s'/d = 2
        let pr = params(WeightFunction::power(0.2).unwrap(), 1, None, None, Some(2.0));
        let r = predicted_rate(Theorem::Lemma41, &pr, 10).unwrap();
        assert!(!r.hypotheses_met && r.value > 0.0);
        let ok = params(WeightFunction::power(2.0).unwrap(), 1, None, None, Some(2.0));
        assert!(predicted_rate(Theorem::Lemma41, &ok, 10).unwrap().hypotheses_met);
    }

    #[test]
    fn constant_weight_table_has_unit_ratio() {
        let pr = params(WeightFunction::constant(1.0).unwrap(), 1, None, None, Some(1.0));
        let t = rate_table(Quantity::HFunctional, &pr, &[16, 32, 64], RateOptions::default()).unwrap();
        for row in &t.rows {
            assert!((row.computed - 1.0).abs() < 1e-12);
            assert!((row.ratio - 1.0).abs() < 1e-12);
        }
        // constant ψ does not vanish
        assert!(!t.hypotheses_met);
    }

    #[test]
    fn single_row_window_is_degenerate() {
        let pr = params(WeightFunction::power(2.0).unwrap(), 1, Some(1.0), Some(1.0), None);
        let t = rate_table(Quantity::ClassSp, &pr, &[32], RateOptions::default()).unwrap();
        let (lo, hi) = ratio_window(&t).unwrap();
        assert_eq!(lo, hi);
    }

    #[test]
    fn csv_layout() {
        let pr = params(WeightFunction::power(2.0).unwrap(), 1, Some(1.0), Some(1.0), None);
        let t = rate_table(Quantity::ClassSp, &pr, &[16, 32], RateOptions::default()).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,computed,predicted,ratio");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("16,"));
        let digits = lines[1]
            .split(',')
            .nth(1)
            .unwrap()
            .split('e')
            .next()
            .unwrap()
            .replace('.', "");
        assert_eq!(digits.len(), 17);
    }

    #[test]
    fn grid_validation() {
        let pr = params(WeightFunction::power(2.0).unwrap(), 1, Some(1.0), Some(1.0), None);
        assert!(rate_table(Quantity::ClassSp, &pr, &[], RateOptions::default()).is_err());
        assert!(rate_table(Quantity::ClassSp, &pr, &[8, 8], RateOptions::default()).is_err());
        assert_eq!(dyadic_grid(16, 100), vec![16, 32, 64]);
    }

    #[test]
    fn witness_has_companion_above_two() {
        let pr = params(WeightFunction::power(2.0).unwrap(), 1, Some(1.0), Some(4.0), None);
        let t = rate_table(Quantity::GreedyLpWitness, &pr, &[8, 16], RateOptions::default()).unwrap();
        assert_eq!(t.metadata.theorem, Theorem::Thm31PGe2);
        assert_eq!(t.metadata.companion_theorem, Some(Theorem::Thm31PLe2));
        assert!(t.rows.iter().all(|r| r.companion_ratio.is_some() && r.computed > 0.0));
    }
}
