//! Weight functions `ψ(t)`, admissibility evidence, and the decreasing
//! rearrangement `ψ̄` of `{ψ(|k|_r)}` laid out on lattice shells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Exponent, ShellSource};
use crate::sequence::{Run, Runs, StepSequence};

/// Closed set of weight families. Every family is evaluated for `t >= 1`;
/// smaller arguments are clamped to 1, which gives `ψ(0) := ψ(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFunction {
    /// `t^{-s}`, `s > 0`.
    Power { s: f64 },
    /// `t^{-s} ln^ε(t + e)`.
    PowerLog { s: f64, eps: f64 },
    /// `ln^ε(t + e)`, `ε < 0`.
    LogOnly { eps: f64 },
    /// `R^{-t}`, `R > 1`.
    ExpDecay { base: f64 },
    /// `ψ ≡ c`. Not decreasing; useful as a degenerate reference.
    Constant { c: f64 },
}

impl WeightFunction {
    pub fn power(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("power weight needs s > 0, got {s}")));
        }
        Ok(WeightFunction::Power { s })
    }

    pub fn power_log(s: f64, eps: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite() && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power-log weight needs s > 0 and finite eps, got s={s}, eps={eps}"
            )));
        }
        Ok(WeightFunction::PowerLog { s, eps })
    }

    pub fn log_only(eps: f64) -> Result<Self> {
        if !(eps < 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("log weight needs eps < 0, got {eps}")));
        }
        Ok(WeightFunction::LogOnly { eps })
    }

    pub fn exp_decay(base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::InvalidParameter(format!("exp weight needs R > 1, got {base}")));
        }
        Ok(WeightFunction::ExpDecay { base })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("constant weight needs c > 0, got {c}")));
        }
        Ok(WeightFunction::Constant { c })
    }

    /// `ln ψ(t)`.
    pub fn ln_eval(&self, t: f64) -> f64 {
        let t = t.max(1.0);
        let ln_log = |t: f64| (t + std::f64::consts::E).ln().ln();
        match *self {
            WeightFunction::Power { s } => -s * t.ln(),
            WeightFunction::PowerLog { s, eps } => -s * t.ln() + eps * ln_log(t),
            WeightFunction::LogOnly { eps } => eps * ln_log(t),
            WeightFunction::ExpDecay { base } => -t * base.ln(),
            WeightFunction::Constant { c } => c.ln(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t).exp()
    }

    /// `(ln ψ)'(t) = ψ'(t)/ψ(t)` for `t >= 1`.
    pub fn log_derivative(&self, t: f64) -> f64 {
        let t = t.max(1.0);
        let e = std::f64::consts::E;
        let dlnlog = |t: f64| 1.0 / ((t + e) * (t + e).ln());
        match *self {
            WeightFunction::Power { s } => -s / t,
            WeightFunction::PowerLog { s, eps } => -s / t + eps * dlnlog(t),
            WeightFunction::LogOnly { eps } => eps * dlnlog(t),
            WeightFunction::ExpDecay { base } => -base.ln(),
            WeightFunction::Constant { .. } => 0.0,
        }
    }

    /// Analytic `ψ'(t)` (right derivative at `t = 1`).
    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t) * self.log_derivative(t)
    }

    /// Whether `ψ` is nonincreasing along the sorted grid.
    pub fn is_nonincreasing_on(&self, grid: &[f64]) -> bool {
        let mut ts = grid.to_vec();
        ts.sort_by(f64::total_cmp);
        ts.windows(2).all(|w| self.ln_eval(w[1]) <= self.ln_eval(w[0]))
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Power { s } => write!(f, "power:s={s}"),
            WeightFunction::PowerLog { s, eps } => write!(f, "powerlog:s={s},eps={eps}"),
            WeightFunction::LogOnly { eps } => write!(f, "log:eps={eps}"),
            WeightFunction::ExpDecay { base } => write!(f, "exp:R={base}"),
            WeightFunction::Constant { c } => write!(f, "const:c={c}"),
        }
    }
}

impl FromStr for WeightFunction {
    type Err = Error;

    /// Parses `power:s=1.5`, `powerlog:s=1,eps=-0.5`, `log:eps=-2`,
    /// `exp:R=2`, `const` or `const:c=2`.
    fn from_str(spec: &str) -> Result<Self> {
        let fail = |reason: &str| Error::WeightSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (family, args) = match spec.trim().split_once(':') {
            Some((f, a)) => (f.trim(), a.trim()),
            None => (spec.trim(), ""),
        };
        let mut params: Vec<(String, f64)> = Vec::new();
        for pair in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| fail("expected key=value"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| fail(&format!("bad number for {}", key.trim())))?;
            params.push((key.trim().to_string(), value));
        }
        let take = |name: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| fail(&format!("missing parameter {name}")))
        };
        let allow = |names: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !names.contains(&k.as_str())) {
                Some((k, _)) => Err(fail(&format!("unexpected parameter {k}"))),
                None => Ok(()),
            }
        };
        let built = match family {
            "power" => {
                allow(&["s"])?;
                WeightFunction::power(take("s")?)
            }
            "powerlog" => {
                allow(&["s", "eps"])?;
                WeightFunction::power_log(take("s")?, take("eps")?)
            }
            "log" => {
                allow(&["eps"])?;
                WeightFunction::log_only(take("eps")?)
            }
            "exp" => {
                allow(&["R"])?;
                WeightFunction::exp_decay(take("R")?)
            }
            "const" => {
                allow(&["c"])?;
                WeightFunction::constant(if params.is_empty() { 1.0 } else { take("c")? })
            }
            _ => return Err(fail("unknown family")),
        };
        built.map_err(|e| fail(&e.to_string()))
    }
}

/// `α(ψ, t) = ψ(t) / (t |ψ'(t)|)`.
pub fn alpha(psi: &WeightFunction, t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha needs t >= 1, got {t}")));
    }
    let dl = psi.log_derivative(t);
    if dl == 0.0 {
        return Err(Error::DerivativeZero(t));
    }
    Ok(1.0 / (t * dl.abs()))
}

/// Log-spaced grid of `count` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Thresholds used by [`check_class_b`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBThresholds {
    /// Ratios `ψ(t)/ψ(ct)` above this are reported as unbounded.
    pub ratio_cap: f64,
    /// `ψ(t_max)/ψ(t_min)` below this counts as evidence that `ψ → 0`.
    pub vanishing_drop: f64,
}

impl Default for ClassBThresholds {
    fn default() -> Self {
        ClassBThresholds {
            ratio_cap: 1e3,
            vanishing_drop: 0.1,
        }
    }
}

/// Sampled evidence for membership in the class `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBEvidence {
    pub c: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub ratios_above_one: bool,
    pub ratio_bounded: bool,
    /// Ratios grow along the grid.
    pub ratio_increasing: bool,
    pub psi_at_max: f64,
    pub vanishing: bool,
    pub decreasing: bool,
    pub in_class_b: bool,
}

/// Samples `ψ(t)/ψ(ct)` over the grid.
pub fn check_class_b(
    psi: &WeightFunction,
    c: f64,
    t_grid: &[f64],
    thresholds: ClassBThresholds,
) -> Result<ClassBEvidence> {
    if !(c > 1.0) {
        return Err(Error::InvalidParameter(format!("class B check needs c > 1, got {c}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::InvalidParameter(
            "grid must be nonempty with entries >= 1".into(),
        ));
    }
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let ratios: Vec<f64> = ts
        .iter()
        .map(|&t| (psi.ln_eval(t) - psi.ln_eval(c * t)).exp())
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio_increasing = ratios.len() > 1 && ratios.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-12));
    let (t_min, t_max) = (ts[0], ts[ts.len() - 1]);
    let drop = (psi.ln_eval(t_max) - psi.ln_eval(t_min)).exp();
    let ratios_above_one = min_ratio > 1.0;
    let ratio_bounded = max_ratio.is_finite() && max_ratio <= thresholds.ratio_cap;
    let vanishing = drop < thresholds.vanishing_drop;
    let decreasing = psi.is_nonincreasing_on(&ts) && ratios_above_one;
    Ok(ClassBEvidence {
        c,
        min_ratio,
        max_ratio,
        ratios_above_one,
        ratio_bounded,
        ratio_increasing,
        psi_at_max: psi.eval(t_max),
        vanishing,
        decreasing,
        in_class_b: ratios_above_one && ratio_bounded && vanishing && decreasing,
    })
}

/// Upper end of the grid used by [`check_decay_condition`].
pub const DECAY_GRID_END: f64 = 1e6;
const DECAY_GRID_POINTS: usize = 400;

/// Sampled evidence for `α(ψ^p, t) <= K_ψ < s'/d` on `[t0, 10^6]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEvidence {
    pub s: f64,
    pub s_prime: f64,
    pub d: usize,
    pub power: f64,
    /// `sup α(ψ^p, t)` over the grid; infinite when `ψ'` vanishes.
    pub k_psi: f64,
    /// `s'/d`.
    pub threshold: f64,
    /// `inf 1/α(ψ^p, t) = 1/K_ψ`, the reciprocal convention.
    pub inverse_k_psi: f64,
    /// `d/s'`, the bound `1/K_ψ` must exceed in the reciprocal convention.
    pub inverse_threshold: f64,
    pub convex: bool,
    pub passes: bool,
}

/// `check_decay_condition_powered` with `p = 1`.
pub fn check_decay_condition(psi: &WeightFunction, s: f64, d: usize, t0: f64) -> Result<DecayEvidence> {
    check_decay_condition_powered(psi, 1.0, s, d, t0)
}

/// Checks the decay condition for `ψ^power`, using `α(ψ^p, t) = α(ψ, t)/p`.
///
/// Also records discrete convexity `ψ^p(t-h) + ψ^p(t+h) >= 2ψ^p(t)`,
/// `h = t/100`, on the grid points with `t - h >= 1`.
pub fn check_decay_condition_powered(
    psi: &WeightFunction,
    power: f64,
    s: f64,
    d: usize,
    t0: f64,
) -> Result<DecayEvidence> {
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("decay condition needs s > 1, got {s}")));
    }
    if !(t0 >= 1.0) || d == 0 || !(power > 0.0) {
        return Err(Error::InvalidParameter(
            "decay condition needs t0 >= 1, d >= 1, p > 0".into(),
        ));
    }
    let s_prime = s / (s - 1.0);
    let grid = log_grid(t0, DECAY_GRID_END.max(t0), DECAY_GRID_POINTS);
    let mut k_psi = 0.0f64;
    for &t in &grid {
        match alpha(psi, t) {
            Ok(a) => k_psi = k_psi.max(a / power),
            Err(Error::DerivativeZero(_)) => k_psi = f64::INFINITY,
            Err(e) => return Err(e),
        }
    }
    // ψ is only defined on [1, ∞)
    let convex = grid.iter().filter(|&&t| t * 0.99 >= 1.0).all(|&t| {
        let h = t / 100.0;
        let f = |x: f64| (power * psi.ln_eval(x)).exp();
        f(t - h) + f(t + h) >= 2.0 * f(t) * (1.0 - 1e-12)
    });
    let threshold = s_prime / d as f64;
    Ok(DecayEvidence {
        s,
        s_prime,
        d,
        power,
        k_psi,
        threshold,
        inverse_k_psi: 1.0 / k_psi,
        inverse_threshold: 1.0 / threshold,
        convex,
        passes: k_psi < threshold,
    })
}

/// The decreasing rearrangement `ψ̄^p` of `{ψ(|k|_r) : k ∈ Z^d}`: position
/// `j ∈ (V_{m-1}, V_m]` carries `ψ(m)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangedWeight {
    pub psi: WeightFunction,
    pub shells: ShellSource,
    pub p_power: f64,
}

impl RearrangedWeight {
    pub fn new(psi: WeightFunction, shells: ShellSource, p_power: f64) -> Result<Self> {
        if !(p_power > 0.0 && p_power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power must be positive, got {p_power}"
            )));
        }
        Ok(RearrangedWeight { psi, shells, p_power })
    }

    /// Rearrangement over a closed-form shell source (`r ∈ {1, 2, ∞}`).
    pub fn closed_form(psi: WeightFunction, r: Exponent, d: usize, p_power: f64) -> Result<Self> {
        let shells = ShellSource::closed_form(r, d)
            .ok_or_else(|| Error::InvalidParameter(format!("no closed-form shell counts for r = {r}")))?;
        Self::new(psi, shells, p_power)
    }

    pub fn ln_shell_value(&self, m: u64) -> f64 {
        self.p_power * self.psi.ln_eval(m as f64)
    }

    /// `ψ̄^p(j)`.
    pub fn rearranged_value(&self, j: u64) -> Result<f64> {
        self.ln_value(j).map(f64::exp)
    }
}

impl StepSequence for RearrangedWeight {
    /// One run per shell, except that shells 0 and 1 share a run (`ψ` is
    /// flat below 1) and a constant `ψ` is a single unending run.
    fn runs(&self) -> Runs<'_> {
        if let WeightFunction::Constant { .. } = self.psi {
            return Box::new(std::iter::once(Ok(Run {
                ln_value: self.ln_shell_value(1),
                len: None,
            })));
        }
        let merge_first = self.shells.max_shell().is_none_or(|m| m >= 1);
        let mut prev = 0u64;
        let mut done = false;
        let start = if merge_first { 1 } else { 0 };
        Box::new((start..).map_while(move |m| {
            if done {
                return None;
            }
            match self.shells.cumulative(m)? {
                Ok(v) => {
                    let len = v - prev;
                    prev = v;
                    Some(Ok(Run {
                        ln_value: self.ln_shell_value(m),
                        len: Some(len),
                    }))
                }
                Err(e) => {
                    done = true;
                    Some(Err(e))
                }
            }
        }))
    }

    fn ln_value(&self, j: u64) -> Result<f64> {
        let m = self.shells.shell_of(j)?;
        Ok(self.ln_shell_value(m))
    }
}
