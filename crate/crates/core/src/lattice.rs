//! Multi-index geometry of `Z^d`: `ℓ_r` quasi-norms, balls, shells and the
//! growth condition `M0 (m - c1)^d < V_m <= M0 (m + c2)^d`.
//!
//! Shells are indexed by integers. For `r ∈ {1, ∞}` the values `|k|_r` of
//! lattice points are integers, so shell `m` is exactly the level set
//! `|k|_r = m`. For any other `r` a point is placed in shell `⌈|k|_r⌉`; the
//! cumulative counts `V_m = |{k : |k|_r <= m}|` are unaffected by this
//! bucketing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of lattice points an enumeration may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Relative slack when comparing `Σ|k_i|^r` against `m^r` for non-integer `r`.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Quasi-norm exponent `r ∈ (0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(r: f64) -> Result<Self> {
        if r == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if r.is_finite() && r > 0.0 {
            Ok(Exponent::Finite(r))
        } else {
            Err(Error::InvalidExponent(r))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(r) => r,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(r) if !(r.is_finite() && r > 0.0) => Err(Error::InvalidExponent(r)),
            e => Ok(e),
        }
    }

    fn is_one(self) -> bool {
        self == Exponent::Finite(1.0)
    }

    fn is_two(self) -> bool {
        self == Exponent::Finite(2.0)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(r) => write!(f, "{r}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(Exponent::Infinity),
            other => {
                let r: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("not an exponent: {other:?}")))?;
                Exponent::new(r)
            }
        }
    }
}

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("multi-index needs d >= 1 coordinates".into()));
        }
        Ok(MultiIndex(coords))
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn max_abs(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn l1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex(v)
    }
}

/// `|k|_r`: `(Σ|k_i|^r)^{1/r}` for finite `r`, `max |k_i|` for `r = ∞`.
pub fn quasi_norm(k: &MultiIndex, r: Exponent) -> Result<f64> {
    let r = r.validate()?;
    if k.dim() == 0 {
        return Err(Error::InvalidParameter("multi-index needs d >= 1 coordinates".into()));
    }
    Ok(match r {
        Exponent::Infinity => k.max_abs() as f64,
        _ if r.is_one() => k.l1() as f64,
        _ if r.is_two() => (sum_squares(k) as f64).sqrt(),
        Exponent::Finite(r) => {
            let s: f64 = k.0.iter().map(|c| (c.unsigned_abs() as f64).powf(r)).sum();
            s.powf(1.0 / r)
        }
    })
}

fn sum_squares(k: &MultiIndex) -> u128 {
    k.0.iter().map(|c| (c.unsigned_abs() as u128).pow(2)).sum()
}

/// Whether `|k|_r <= m`, exact for `r ∈ {1, 2, ∞}`.
pub fn in_ball(k: &MultiIndex, m: u64, r: Exponent) -> bool {
    match r {
        Exponent::Infinity => k.max_abs() <= m,
        _ if r.is_one() => k.l1() <= m,
        _ if r.is_two() => sum_squares(k) <= (m as u128).pow(2),
        Exponent::Finite(r) => {
            let s: f64 = k.0.iter().map(|c| (c.unsigned_abs() as f64).powf(r)).sum();
            s <= (m as f64).powf(r) * (1.0 + BOUNDARY_SLACK)
        }
    }
}

/// Shell index of `k`: the least integer `m` with `|k|_r <= m`.
pub fn shell_index(k: &MultiIndex, r: Exponent) -> u64 {
    match r {
        Exponent::Infinity => k.max_abs(),
        _ if r.is_one() => k.l1(),
        _ if r.is_two() => {
            let s = sum_squares(k);
            let root = isqrt(s);
            if root * root == s {
                root as u64
            } else {
                root as u64 + 1
            }
        }
        Exponent::Finite(_) => {
            let norm = quasi_norm(k, r).unwrap_or(0.0);
            let mut m = norm.ceil() as u64;
            while m > 0 && in_ball(k, m - 1, r) {
                m -= 1;
            }
            while !in_ball(k, m, r) {
                m += 1;
            }
            m
        }
    }
}

fn isqrt(n: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

fn box_size(m: u64, d: usize) -> u128 {
    let side = 2 * m as u128 + 1;
    side.checked_pow(d as u32).unwrap_or(u128::MAX)
}

fn check_budget(m: u64, d: usize, budget: u64) -> Result<()> {
    let requested = box_size(m, d);
    if requested > budget as u128 {
        Err(Error::BudgetExceeded { requested, budget })
    } else {
        Ok(())
    }
}

/// Calls `visit` on every point of the box `[-m, m]^d` in lexicographic order.
fn for_each_in_box(m: u64, d: usize, mut visit: impl FnMut(&MultiIndex)) {
    let m = m as i64;
    let mut k = MultiIndex(vec![-m; d]);
    loop {
        visit(&k);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k.0[axis] < m {
                k.0[axis] += 1;
                break;
            }
            k.0[axis] = -m;
        }
    }
}

/// Every `k ∈ Z^d` with `|k|_r <= m`, in lexicographic order.
pub fn enumerate_ball(m: u64, r: Exponent, d: usize, budget: u64) -> Result<Vec<MultiIndex>> {
    let r = r.validate()?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    check_budget(m, d, budget)?;
    let mut out = Vec::new();
    for_each_in_box(m, d, |k| {
        if in_ball(k, m, r) {
            out.push(k.clone());
        }
    });
    Ok(out)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Closed-form `V_m` where one is available (`r ∈ {1, 2, ∞}`).
fn closed_form_count(r: Exponent, d: usize, m: u64) -> Option<Result<u64>> {
    let overflow = || Error::Overflow("lattice count");
    let to_u64 = |v: u128| u64::try_from(v).map_err(|_| overflow());
    match r {
        Exponent::Infinity => {
            let v = (2 * m as u128 + 1).checked_pow(d as u32);
            Some(v.ok_or_else(overflow).and_then(to_u64))
        }
        _ if r.is_one() => {
            // V_m = Σ_k 2^k C(d, k) C(m, k)
            let mut total: u128 = 0;
            for k in 0..=(d as u128).min(m as u128) {
                let term = (1u128 << k)
                    .checked_mul(binomial(d as u128, k))
                    .and_then(|t| t.checked_mul(binomial(m as u128, k)));
                match term.and_then(|t| total.checked_add(t)) {
                    Some(t) => total = t,
                    None => return Some(Err(overflow())),
                }
            }
            Some(to_u64(total))
        }
        _ if r.is_two() => Some(to_u64(count_sum_squares(d, (m as u128).pow(2)))),
        _ => None,
    }
}

/// `|{k ∈ Z^d : Σ k_i^2 <= radius_sq}|`, enumerating all but the last axis.
fn count_sum_squares(d: usize, radius_sq: u128) -> u128 {
    let top = isqrt(radius_sq);
    if d == 1 {
        return 2 * top + 1;
    }
    let mut total = count_sum_squares(d - 1, radius_sq);
    for k in 1..=top {
        total += 2 * count_sum_squares(d - 1, radius_sq - k * k);
    }
    total
}

/// Shell sizes `ν_m` and cumulative counts `V_m` for `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDecomposition {
    pub r: Exponent,
    pub d: usize,
    pub nu: Vec<u64>,
    #[serde(rename = "V")]
    pub v: Vec<u64>,
    pub m_max: u64,
}

impl ShellDecomposition {
    pub fn cumulative(&self, m: u64) -> Option<u64> {
        self.v.get(m as usize).copied()
    }

    /// Number of lattice points covered, `V_{m_max}`.
    pub fn covered(&self) -> u64 {
        *self.v.last().expect("at least shell 0")
    }
}

/// Builds the shell decomposition for `m = 0..=m_max`.
///
/// `r ∈ {1, 2, ∞}` use closed forms (row counting for `r = 2`); all other
/// exponents enumerate the box `[-m_max, m_max]^d` once, subject to `budget`.
pub fn shell_counts(r: Exponent, d: usize, m_max: u64, budget: u64) -> Result<ShellDecomposition> {
    let r = r.validate()?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be >= 1".into()));
    }
    let v: Vec<u64> = if closed_form_count(r, d, 0).is_some() {
        (0..=m_max)
            .map(|m| closed_form_count(r, d, m).expect("closed form exists"))
            .collect::<Result<_>>()?
    } else {
        check_budget(m_max, d, budget)?;
        let mut nu = vec![0u64; m_max as usize + 1];
        for_each_in_box(m_max, d, |k| {
            let m = shell_index(k, r);
            if m <= m_max {
                nu[m as usize] += 1;
            }
        });
        nu.iter()
            .scan(0u64, |acc, &n| {
                *acc += n;
                Some(*acc)
            })
            .collect()
    };
    let nu = v
        .iter()
        .enumerate()
        .map(|(i, &vm)| if i == 0 { vm } else { vm - v[i - 1] })
        .collect();
    Ok(ShellDecomposition { r, d, nu, v, m_max })
}

/// Source of cumulative shell counts: unbounded closed forms or a finite
/// precomputed table.
#[derive(Debug, Clone, PartialEq)]
pub enum ShellSource {
    ClosedForm { r: Exponent, d: usize },
    Table(ShellDecomposition),
}

impl ShellSource {
    /// Closed form when available, otherwise a table up to `m_max`.
    pub fn new(r: Exponent, d: usize, m_max: u64, budget: u64) -> Result<Self> {
        let r = r.validate()?;
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if closed_form_count(r, d, 0).is_some() {
            Ok(ShellSource::ClosedForm { r, d })
        } else {
            Ok(ShellSource::Table(shell_counts(r, d, m_max, budget)?))
        }
    }

    pub fn closed_form(r: Exponent, d: usize) -> Option<Self> {
        closed_form_count(r, d, 0).map(|_| ShellSource::ClosedForm { r, d })
    }

    pub fn dim(&self) -> usize {
        match self {
            ShellSource::ClosedForm { d, .. } => *d,
            ShellSource::Table(t) => t.d,
        }
    }

    pub fn exponent(&self) -> Exponent {
        match self {
            ShellSource::ClosedForm { r, .. } => *r,
            ShellSource::Table(t) => t.r,
        }
    }

    /// Largest shell index available, `None` when unbounded.
    pub fn max_shell(&self) -> Option<u64> {
        match self {
            ShellSource::ClosedForm { .. } => None,
            ShellSource::Table(t) => Some(t.m_max),
        }
    }

    /// `V_m`, or `None` beyond a table's range.
    pub fn cumulative(&self, m: u64) -> Option<Result<u64>> {
        match self {
            ShellSource::ClosedForm { r, d } => closed_form_count(*r, *d, m),
            ShellSource::Table(t) => t.cumulative(m).map(Ok),
        }
    }

    /// The shell `m` with `V_{m-1} < j <= V_m`.
    pub fn shell_of(&self, j: u64) -> Result<u64> {
        if j == 0 {
            return Err(Error::InvalidParameter("positions start at 1".into()));
        }
        let at = |m: u64| -> Result<Option<u64>> { self.cumulative(m).transpose() };
        // exponential search for an upper shell
        let mut hi = 1u64;
        loop {
            match at(hi)? {
                Some(v) if v >= j => break,
                Some(_) => hi = hi.checked_mul(2).ok_or(Error::Overflow("shell search"))?,
                None => {
                    let last = self.max_shell().unwrap_or(0);
                    let covered = at(last)?.unwrap_or(0);
                    if covered >= j {
                        hi = last;
                        break;
                    }
                    return Err(Error::BeyondRange { index: j, covered });
                }
            }
        }
        let mut lo = 0u64;
        if at(0)?.unwrap_or(0) >= j {
            return Ok(0);
        }
        // invariant: V_lo < j <= V_hi
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if at(mid)?.expect("within searched range") >= j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Result of fitting `M0 (m - c1)^d < V_m <= M0 (m + c2)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub m0: f64,
    pub c1: f64,
    pub c2: f64,
    pub ok: bool,
}

/// Default cap on `c1`, `c2` for [`fit_growth_bounds`].
pub const DEFAULT_GROWTH_OFFSET_CAP: f64 = 10.0;

/// Fits the growth constants on shells `m ∈ (k0, m_max]`.
///
/// `M0` comes from a least-squares line through `(m, V_m^{1/d})`: its slope
/// raised to the power `d`. `c1` and `c2` are then the smallest nonnegative
/// offsets for which both inequalities hold on the fitted range; `ok` is set
/// when both are finite and at most `offset_cap`.
pub fn fit_growth_bounds(sd: &ShellDecomposition, k0: u64, offset_cap: f64) -> GrowthFit {
    let failed = GrowthFit {
        m0: f64::NAN,
        c1: f64::INFINITY,
        c2: f64::INFINITY,
        ok: false,
    };
    if k0 < 1 || sd.m_max <= k0 {
        return failed;
    }
    let d = sd.d as f64;
    let pts: Vec<(f64, f64)> = ((k0 + 1)..=sd.m_max)
        .map(|m| (m as f64, (sd.v[m as usize] as f64).powf(1.0 / d)))
        .collect();
    let slope = if pts.len() == 1 {
        pts[0].1 / pts[0].0
    } else {
        let len = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    if !(slope.is_finite() && slope > 0.0) {
        return failed;
    }
    let m0 = slope.powf(d);

    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for m in (k0 + 1)..=sd.m_max {
        let root = (sd.v[m as usize] as f64 / m0).powf(1.0 / d);
        c2 = c2.max(root - m as f64);
        c1 = c1.max(m as f64 - root);
    }
    // strict lower inequality
    if c1 > 0.0 {
        c1 += 1e-9 * (1.0 + c1);
    }
    // absorb rounding in the upper one
    c2 += 1e-12 * (1.0 + c2);

    let holds = ((k0 + 1)..=sd.m_max).all(|m| {
        let vm = sd.v[m as usize] as f64;
        let lower = m0 * (m as f64 - c1).max(0.0).powf(d);
        let upper = m0 * (m as f64 + c2).powf(d);
        lower < vm && vm <= upper * (1.0 + 1e-12)
    });
    GrowthFit {
        m0,
        c1,
        c2,
        ok: holds && c1.is_finite() && c2.is_finite() && c1 <= offset_cap && c2 <= offset_cap,
    }
}
