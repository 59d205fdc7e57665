//! Function-level and class-level n-term approximation quantities.
//!
//! In `S^p` the greedy approximant is optimal, so for a single function
//! `e_n(f) = e_n^⊥(f) = ‖f - G_n f‖`. For a whole class `F^ψ_{q,r}` the
//! error is `H_n(ψ̄^p, q/p)^{1/p}`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{h_functional_with, FunctionalResult, ScanOptions};
use crate::lattice::{enumerate_ball, quasi_norm, Exponent, MultiIndex, ShellSource};
use crate::numeric::LogSum;
use crate::weights::{RearrangedWeight, WeightFunction};

/// Fourier coefficients of a trigonometric polynomial on `T^d`.
///
/// Zero amplitudes are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CoefficientFile", try_from = "CoefficientFile")]
pub struct CoefficientSequence {
    d: usize,
    entries: BTreeMap<MultiIndex, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientFile {
    d: usize,
    entries: Vec<CoefficientEntry>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientEntry {
    k: Vec<i64>,
    re: f64,
    im: f64,
}

impl From<CoefficientSequence> for CoefficientFile {
    fn from(f: CoefficientSequence) -> Self {
        CoefficientFile {
            d: f.d,
            entries: f
                .entries
                .into_iter()
                .map(|(k, a)| CoefficientEntry {
                    k: k.0,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<CoefficientFile> for CoefficientSequence {
    type Error = Error;

    fn try_from(file: CoefficientFile) -> Result<Self> {
        let mut f = CoefficientSequence::new(file.d)?;
        for e in file.entries {
            let k = MultiIndex::new(e.k)?;
            if f.get(&k) != Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidParameter(format!("duplicate index {:?}", k.0)));
            }
            f.insert(k, Complex64::new(e.re, e.im))?;
        }
        Ok(f)
    }
}

impl CoefficientSequence {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(CoefficientSequence {
            d,
            entries: BTreeMap::new(),
        })
    }

    pub fn from_entries<I>(d: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut f = Self::new(d)?;
        for (k, a) in entries {
            f.insert(k, a)?;
        }
        Ok(f)
    }

    /// Real amplitudes at the given one-dimensional frequencies.
    pub fn from_real_1d(entries: &[(i64, f64)]) -> Result<Self> {
        Self::from_entries(
            1,
            entries
                .iter()
                .map(|&(k, a)| (MultiIndex(vec![k]), Complex64::new(a, 0.0))),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Sets `f̂(k)`; a zero amplitude removes the entry.
    pub fn insert(&mut self, k: MultiIndex, amplitude: Complex64) -> Result<()> {
        if k.dim() != self.d {
            return Err(Error::InvalidParameter(format!(
                "index {:?} has dimension {}, expected {}",
                k.0,
                k.dim(),
                self.d
            )));
        }
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite amplitude at {:?}", k.0)));
        }
        if amplitude == Complex64::new(0.0, 0.0) {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, amplitude);
        }
        Ok(())
    }

    pub fn get(&self, k: &MultiIndex) -> Complex64 {
        self.entries.get(k).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.entries.iter()
    }

    /// `max |k|_∞` over the support, 0 for the zero function.
    pub fn max_frequency(&self) -> u64 {
        self.entries.keys().map(MultiIndex::max_abs).max().unwrap_or(0)
    }

    /// The restriction of `f` to `keep`.
    pub fn restrict<'a, I: IntoIterator<Item = &'a MultiIndex>>(&self, keep: I) -> Self {
        let entries = keep
            .into_iter()
            .filter_map(|k| self.entries.get(k).map(|a| (k.clone(), *a)))
            .collect();
        CoefficientSequence { d: self.d, entries }
    }

    /// `f` with the indices in `drop` removed.
    pub fn without<'a, I: IntoIterator<Item = &'a MultiIndex>>(&self, drop: I) -> Self {
        let mut out = self.clone();
        for k in drop {
            out.entries.remove(k);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSpec {
    pub q: f64,
    pub r: Exponent,
    pub psi: WeightFunction,
    pub d: usize,
}

impl FunctionClassSpec {
    pub fn new(q: f64, r: Exponent, psi: WeightFunction, d: usize) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidExponent(q));
        }
        if r.as_f64() < 1.0 {
            return Err(Error::InvalidParameter(format!("class needs r >= 1, got {r}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(FunctionClassSpec { q, r, psi, d })
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `(Σ|a|^p)^{1/p}`, summed from the smallest magnitude up.
fn lp_of_magnitudes(mut mags: Vec<f64>, p: f64) -> f64 {
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(|a, b| a.total_cmp(b));
    let top = *mags.last().expect("nonempty");
    let sum: f64 = mags.iter().map(|m| (m / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// `‖f‖_{S^p} = (Σ_k |f̂(k)|^p)^{1/p}`.
pub fn sp_norm(f: &CoefficientSequence, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(lp_of_magnitudes(f.iter().map(|(_, a)| a.norm()).collect(), p))
}

/// `‖{|f̂(k)| / ψ(|k|_r)}‖_{l_q}`; `f ∈ F^ψ_{q,r}` iff this is at most 1.
///
/// `ψ` is taken at the real value `|k|_r`, with `ψ(t) = ψ(1)` for `t < 1`.
pub fn class_membership_norm(f: &CoefficientSequence, spec: &FunctionClassSpec) -> Result<f64> {
    if f.dim() != spec.d {
        return Err(Error::InvalidParameter(format!(
            "function has dimension {}, class has {}",
            f.dim(),
            spec.d
        )));
    }
    let mut ratios = Vec::with_capacity(f.len());
    for (k, a) in f.iter() {
        let t = quasi_norm(k, spec.r)?;
        ratios.push((a.norm().ln() - spec.psi.ln_eval(t)).exp());
    }
    Ok(lp_of_magnitudes(ratios, spec.q))
}

fn greedy_cmp(a: (&MultiIndex, f64), b: (&MultiIndex, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.max_abs().cmp(&b.0.max_abs()))
        .then_with(|| a.0.cmp(b.0))
}

/// Support of `f` by decreasing `|f̂(k)|`; ties by increasing `|k|_∞`, then
/// lexicographically.
pub fn greedy_order(f: &CoefficientSequence) -> Vec<MultiIndex> {
    let mut items: Vec<(&MultiIndex, f64)> = f.iter().map(|(k, a)| (k, a.norm())).collect();
    items.sort_by(|a, b| greedy_cmp(*a, *b));
    items.into_iter().map(|(k, _)| k.clone()).collect()
}

/// `G_n f`: the `n` leading terms of [`greedy_order`].
pub fn greedy_approximant(f: &CoefficientSequence, n: usize) -> CoefficientSequence {
    let order = greedy_order(f);
    f.restrict(order.iter().take(n))
}

/// `f - G_n f`.
pub fn greedy_remainder(f: &CoefficientSequence, n: usize) -> CoefficientSequence {
    let order = greedy_order(f);
    f.without(order.iter().take(n))
}

/// `‖f - G_n f‖_{S^p}`, which also equals `e_n(f)_{S^p}` and `e_n^⊥(f)_{S^p}`.
pub fn greedy_remainder_sp(f: &CoefficientSequence, n: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut mags: Vec<f64> = f.iter().map(|(_, a)| a.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(lp_of_magnitudes(mags.into_iter().skip(n).collect(), p))
}

/// `e_n(F^ψ_{q,r})_{S^p} = H_n(ψ̄^p, q/p)^{1/p}`.
///
/// The returned error bound refers to the returned `e_n`, not to `H_n`.
pub fn class_best_nterm_sp(
    spec: &FunctionClassSpec,
    n: u64,
    p: f64,
    shells: &ShellSource,
    opts: ScanOptions,
) -> Result<FunctionalResult> {
    check_p(p)?;
    if shells.dim() != spec.d || shells.exponent() != spec.r {
        return Err(Error::InvalidParameter(format!(
            "shells are for r = {}, d = {}; class has r = {}, d = {}",
            shells.exponent(),
            shells.dim(),
            spec.r,
            spec.d
        )));
    }
    let rw = RearrangedWeight::new(spec.psi, shells.clone(), p)?;
    let h = h_functional_with(&rw, n, spec.q / p, opts)?;
    let value = h.value.powf(1.0 / p);
    let upper = (h.value + h.tail_truncation_error_bound).powf(1.0 / p);
    Ok(FunctionalResult {
        value,
        tail_truncation_error_bound: upper - value,
        ..h
    })
}

/// `⌊(2n/M_0)^{1/d}⌋` with `M_0 = 2^d/d!`: the largest `R` with
/// `2^d R^d <= 2n·d!`.
pub fn f1_radius(n: u64, d: usize) -> Result<u64> {
    if d == 0 || d > 20 {
        return Err(Error::InvalidParameter(format!("dimension {d} out of range")));
    }
    let fact: u128 = (1..=d as u128).product();
    let limit = 2 * n as u128 * fact;
    let fits = |r: u64| -> bool {
        let mut acc: u128 = 1;
        for _ in 0..d {
            acc = match acc.checked_mul(2 * r as u128) {
                Some(v) => v,
                None => return false,
            };
        }
        acc <= limit
    };
    let m0 = 2f64.powi(d as i32) / fact as f64;
    let mut r = (2.0 * n as f64 / m0).powf(1.0 / d as f64).floor() as u64;
    while r > 0 && !fits(r) {
        r -= 1;
    }
    while fits(r + 1) {
        r += 1;
    }
    Ok(r)
}

/// The extremal function `f_1`: constant amplitude `C_1(n)` on
/// `{|k|_1 <= R}`, `R = ⌊(2n/M_0)^{1/d}⌋`, with
/// `C_1(n) = (Σ_{|k|_1 <= R} ψ^{-q}(|k|_1))^{-1/q}`.
pub fn extremal_function_f1(
    n: u64,
    q: f64,
    psi: &WeightFunction,
    d: usize,
    budget: u64,
) -> Result<CoefficientSequence> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(q));
    }
    let radius = f1_radius(n, d)?;
    if radius < 1 {
        return Err(Error::NTooSmall { n });
    }
    let support = enumerate_ball(radius, Exponent::Finite(1.0), d, budget)?;
    let mut sum = LogSum::new();
    for k in &support {
        sum.add(-q * psi.ln_eval(k.l1() as f64), 1.0);
    }
    let c1 = (-sum.ln() / q).exp();
    CoefficientSequence::from_entries(d, support.into_iter().map(|k| (k, Complex64::new(c1, 0.0))))
}
