//! The extremal functionals
//!
//! ```text
//! s ∈ (0, 1]:  H_n(Ψ, s) = sup_{l > n} (l - n) (Σ_{j<=l} Ψ^{-s}(j))^{-1/s}
//! s > 1:       H_n(Ψ, s) = ((l* - n)^{s'} (Σ_{j<=l*} Ψ^{-s}(j))^{-s'/s}
//!                          + Σ_{j>l*} Ψ^{s'}(j))^{1/s'},   1/s + 1/s' = 1
//! ```
//!
//! together with `Q_n(Ψ, l) = (l - n) / Σ_{j<=l} Ψ^{-s}(j)` and the threshold
//! index `l*`, the least `l > n` with
//! `Ψ^{-s}(l) <= Σ_{j<=l} Ψ^{-s}(j) / (l - n) < Ψ^{-s}(l + 1)`.
//!
//! All sums run over the runs of a [`StepSequence`] and are accumulated in
//! log-scaled compensated form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::LogSum;
use crate::sequence::{Run, StepSequence};

/// Default relative tolerance for tail sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;
/// Consecutive non-shrinking block sums taken as evidence of divergence.
/// Block sums of a nonincreasing sequence grow at most twofold, so a streak
/// this long means the terms decay no faster than `1/j` over a range of
/// indices spanning a factor `2^8`.
const DIVERGENCE_STREAK: u32 = 8;
/// Default cap on the number of runs a single scan may visit.
pub const DEFAULT_MAX_RUNS: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `s <= 1`: a supremum over `l > n`.
    SupRegime,
    /// `s > 1`: threshold term plus convergent tail.
    TailRegime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResult {
    pub value: f64,
    /// Maximizing index (sup regime) or threshold index `l*` (tail regime).
    /// Absent when the supremum is only approached in the limit.
    pub l_star: Option<u64>,
    pub regime: Regime,
    /// Bound on the error in `value` caused by truncating the tail sum;
    /// zero in the sup regime.
    pub tail_truncation_error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub tail_tol: f64,
    pub max_runs: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            tail_tol: DEFAULT_TAIL_TOL,
            max_runs: DEFAULT_MAX_RUNS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSum {
    pub value: f64,
    pub error_bound: f64,
}

/// Runs with zero length removed.
fn nonempty_runs<S: StepSequence + ?Sized>(seq: &S) -> impl Iterator<Item = Result<Run>> + '_ {
    seq.runs().filter(|r| !matches!(r, Ok(Run { len: Some(0), .. })))
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "s must be positive and finite, got {s}"
        )))
    }
}

/// `ln Σ_{j<=l} Ψ^{-s}(j)`.
fn ln_inverse_sum<S: StepSequence + ?Sized>(seq: &S, s: f64, l: u64) -> Result<f64> {
    let mut sum = LogSum::new();
    let mut end = 0u64;
    for run in nonempty_runs(seq) {
        let run = run?;
        let take = match run.len {
            None => l - end,
            Some(len) => len.min(l - end),
        };
        sum.add(-s * run.ln_value, take as f64);
        end += take;
        if end == l {
            return Ok(sum.ln());
        }
    }
    Err(Error::BeyondRange { index: l, covered: end })
}

/// `ln Q_n(Ψ, l)`.
pub fn ln_q_n<S: StepSequence + ?Sized>(seq: &S, s: f64, n: u64, l: u64) -> Result<f64> {
    check_s(s)?;
    if l <= n {
        return Err(Error::InvalidParameter(format!("Q_n needs l > n, got l={l}, n={n}")));
    }
    Ok(((l - n) as f64).ln() - ln_inverse_sum(seq, s, l)?)
}

/// `Q_n(Ψ, l) = (l - n) (Σ_{j<=l} Ψ^{-s}(j))^{-1}`.
pub fn q_n<S: StepSequence + ?Sized>(seq: &S, s: f64, n: u64, l: u64) -> Result<f64> {
    let v = ln_q_n(seq, s, n, l)?.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow("Q_n"))
    }
}

struct Threshold {
    l_star: u64,
    ln_sum: f64,
}

fn locate_threshold<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64, max_runs: u64) -> Result<Threshold> {
    let mut runs = nonempty_runs(seq).peekable();
    let mut sum = LogSum::new();
    let mut end = 0u64;
    let mut scanned = 0u64;
    while let Some(run) = runs.next() {
        let run = run?;
        scanned += 1;
        if scanned > max_runs {
            return Err(Error::NoThreshold { scanned: max_runs });
        }
        let len = match run.len {
            Some(len) => len,
            // Ψ constant from here on: Q_n creeps up to Ψ^s and never passes it
            None => return Err(Error::NoThreshold { scanned }),
        };
        sum.add(-s * run.ln_value, len as f64);
        end = end.checked_add(len).ok_or(Error::Overflow("position"))?;
        if end <= n {
            continue;
        }
        let next = match runs.peek() {
            Some(Ok(next)) => next.ln_value,
            Some(Err(e)) => return Err(e.clone()),
            None => {
                return Err(Error::BeyondRange {
                    index: end + 1,
                    covered: end,
                })
            }
        };
        let ln_q = ((end - n) as f64).ln() - sum.ln();
        // strict: on equality the larger index wins
        if ln_q > s * next {
            return Ok(Threshold {
                l_star: end,
                ln_sum: sum.ln(),
            });
        }
    }
    Err(Error::BeyondRange {
        index: end + 1,
        covered: end,
    })
}

/// The threshold index `l*`: the least `l > n` with `Q_n(Ψ, l) > Ψ^s(l + 1)`.
///
/// Before `l*` the sequence `Q_n(Ψ, ·)` satisfies `Q_n(l) <= Ψ^s(l + 1)`;
/// inside a run of equal values that can only change at the run's last
/// position, so the scan visits run ends only and `l*` is always one.
pub fn find_l_star<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64) -> Result<u64> {
    find_l_star_with(seq, n, s, DEFAULT_MAX_RUNS)
}

pub fn find_l_star_with<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64, max_runs: u64) -> Result<u64> {
    check_s(s)?;
    locate_threshold(seq, n, s, max_runs).map(|t| t.l_star)
}

/// `Σ_{j>l} Ψ^{s'}(j)`.
///
/// Summed over index blocks `(b_k, b_{k+1}]` whose lengths double. Once the
/// ratio of consecutive block sums stays below `ρ < 1`, the remainder is
/// bounded by `B_k ρ / (1 - ρ)`; summation stops when that bound falls below
/// `tol` times the partial sum. Eight consecutive block ratios `>= 1` are
/// reported as divergence.
pub fn tail_sum<S: StepSequence + ?Sized>(seq: &S, l: u64, s_prime: f64, tol: f64) -> Result<TailSum> {
    tail_sum_with(seq, l, s_prime, tol, DEFAULT_MAX_RUNS)
}

pub fn tail_sum_with<S: StepSequence + ?Sized>(
    seq: &S,
    l: u64,
    s_prime: f64,
    tol: f64,
    max_runs: u64,
) -> Result<TailSum> {
    check_s(s_prime)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut runs = nonempty_runs(seq);
    let mut scanned = 0u64;
    // current run and how many of its positions are left
    let mut current: Option<(f64, Option<u64>)> = None;
    let mut pos = 0u64;

    let mut next_run = |scanned: &mut u64, pos: u64| -> Result<(f64, Option<u64>)> {
        *scanned += 1;
        match runs.next() {
            Some(run) => {
                let run = run?;
                Ok((run.ln_value, run.len))
            }
            None => Err(Error::BeyondRange {
                index: pos + 1,
                covered: pos,
            }),
        }
    };

    // skip the first l positions
    while pos < l {
        let (lnv, len) = next_run(&mut scanned, pos)?;
        match len {
            None => {
                current = Some((lnv, None));
                pos = l;
            }
            Some(len) if pos + len > l => {
                current = Some((lnv, Some(pos + len - l)));
                pos = l;
            }
            Some(len) => pos += len,
        }
    }

    let mut total = LogSum::new();
    let mut prev_ln_block: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut bound = f64::INFINITY;
    let mut growing = 0u32;
    let mut block_end = (2 * l).max(l + 1);
    loop {
        let mut block = LogSum::new();
        while pos < block_end {
            let (lnv, left) = match current.take() {
                Some(c) => c,
                None => {
                    if scanned >= max_runs {
                        let partial = total.value();
                        return match prev_ratio {
                            Some(r) if r >= 1.0 => Err(Error::TailDiverges { ratio: r }),
                            _ => Err(Error::TailBudget { partial, bound }),
                        };
                    }
                    next_run(&mut scanned, pos)?
                }
            };
            match left {
                None => {
                    if lnv > f64::NEG_INFINITY {
                        return Err(Error::TailDiverges { ratio: f64::INFINITY });
                    }
                    current = Some((lnv, None));
                    pos = block_end;
                }
                Some(left) => {
                    let take = left.min(block_end - pos);
                    block.add(s_prime * lnv, take as f64);
                    pos += take;
                    if take < left {
                        current = Some((lnv, Some(left - take)));
                    }
                }
            }
        }
        let ln_block = block.ln();
        total.add(ln_block, 1.0);
        if total.is_empty() {
            // every term so far is zero; a later term could only be zero too
            return Ok(TailSum {
                value: 0.0,
                error_bound: 0.0,
            });
        }
        if let Some(prev) = prev_ln_block {
            let ratio = if prev == f64::NEG_INFINITY {
                0.0
            } else {
                (ln_block - prev).exp()
            };
            if let Some(pr) = prev_ratio {
                let rho = ratio.max(pr);
                if rho < 1.0 {
                    bound = ln_block.exp() * rho / (1.0 - rho);
                    if bound <= tol * total.value() {
                        return Ok(TailSum {
                            value: total.value(),
                            error_bound: bound,
                        });
                    }
                }
            }
            prev_ratio = Some(ratio);
            growing = if ratio >= 1.0 { growing + 1 } else { 0 };
            if growing >= DIVERGENCE_STREAK {
                return Err(Error::TailDiverges { ratio });
            }
        }
        prev_ln_block = Some(ln_block);
        block_end = match block_end.checked_mul(2) {
            Some(e) => e,
            None => {
                let partial = total.value();
                return match prev_ratio {
                    Some(r) if r >= 1.0 => Err(Error::TailDiverges { ratio: r }),
                    _ => Err(Error::TailBudget { partial, bound }),
                };
            }
        };
    }
}

/// `H_n(Ψ, s)` with default scan options.
pub fn h_functional<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64) -> Result<FunctionalResult> {
    h_functional_with(seq, n, s, ScanOptions::default())
}

pub fn h_functional_with<S: StepSequence + ?Sized>(
    seq: &S,
    n: u64,
    s: f64,
    opts: ScanOptions,
) -> Result<FunctionalResult> {
    check_s(s)?;
    if s <= 1.0 {
        sup_regime(seq, n, s, opts.max_runs)
    } else {
        tail_regime(seq, n, s, opts)
    }
}

fn tail_regime<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64, opts: ScanOptions) -> Result<FunctionalResult> {
    let s_prime = s / (s - 1.0);
    let th = locate_threshold(seq, n, s, opts.max_runs)?;
    let head = (s_prime * ((th.l_star - n) as f64).ln() - s_prime / s * th.ln_sum).exp();
    let tail = tail_sum_with(seq, th.l_star, s_prime, opts.tail_tol, opts.max_runs)?;
    let inner = head + tail.value;
    if !inner.is_finite() {
        return Err(Error::Overflow("H_n"));
    }
    let value = inner.powf(1.0 / s_prime);
    let upper = (inner + tail.error_bound).powf(1.0 / s_prime);
    Ok(FunctionalResult {
        value,
        l_star: Some(th.l_star),
        regime: Regime::TailRegime,
        tail_truncation_error_bound: upper - value,
    })
}

/// `g(u) = s ln u - ln(B + u)`; `ln F = (g(u) - ln w) / s` for `u = l - n`
/// inside a run with `Ψ^{-s} = w` and `Σ_{j<=l} Ψ^{-s} = w (B + u)`.
fn g(s: f64, b: f64, u: f64) -> f64 {
    s * u.ln() - (b + u).ln()
}

/// Supremum of `g` over real `u >= u_lo` (upper end `u_hi`, or unbounded).
/// Returns `(value, maximizer)`; the maximizer is `None` for a limit at
/// infinity.
fn continuous_sup(s: f64, b: f64, u_lo: f64, u_hi: Option<f64>) -> (f64, Option<f64>) {
    let clamp = |u: f64| match u_hi {
        Some(h) => u.clamp(u_lo, h),
        None => u.max(u_lo),
    };
    if b <= 0.0 {
        // nonincreasing in u
        return (g(s, b, u_lo), Some(u_lo));
    }
    if s < 1.0 {
        let u = clamp(s * b / (1.0 - s));
        (g(s, b, u), Some(u))
    } else {
        match u_hi {
            Some(h) => (g(s, b, h), Some(h)),
            None => (0.0, None),
        }
    }
}

fn sup_regime<S: StepSequence + ?Sized>(seq: &S, n: u64, s: f64, max_runs: u64) -> Result<FunctionalResult> {
    let mut sum = LogSum::new();
    let mut end = 0u64;
    // best ln F so far and where
    let mut best: Option<(f64, Option<u64>)> = None;
    let mut scanned = 0u64;
    let result = |best: (f64, Option<u64>)| FunctionalResult {
        value: best.0.exp(),
        l_star: best.1,
        regime: Regime::SupRegime,
        tail_truncation_error_bound: 0.0,
    };
    for run in nonempty_runs(seq) {
        let run = run?;
        scanned += 1;
        if scanned > max_runs {
            // scan budget reached: report the best value seen, no maximizer
            return Ok(result((best.expect("at least one run").0, None)));
        }
        let ln_w = -s * run.ln_value;
        let a = if sum.is_empty() { 0.0 } else { (sum.ln() - ln_w).exp() };
        let b = a - (end as f64 - n as f64);
        let first = end.max(n) + 1;
        let u_lo = (first - n) as f64;
        let to_ln_f = |gv: f64| (gv - ln_w) / s;

        // every later term is at least w, so this bounds all l >= first
        if let Some((best_ln, _)) = best {
            let (bound, _) = continuous_sup(s, b, u_lo, None);
            if to_ln_f(bound) <= best_ln {
                return Ok(result(best.expect("checked")));
            }
        }

        let last = run.len.map(|len| end + len);
        if last.is_none_or(|last| last >= first) {
            let u_hi = last.map(|last| (last - n) as f64);
            let (sup_g, arg) = continuous_sup(s, b, u_lo, u_hi);
            let candidate = match arg {
                None => (to_ln_f(sup_g), None),
                Some(u) => {
                    let hi = u_hi.unwrap_or(f64::INFINITY);
                    let mut top: Option<(f64, u64)> = None;
                    for cand in [u.floor(), u.ceil()] {
                        let cand = cand.clamp(u_lo, hi);
                        let val = to_ln_f(g(s, b, cand));
                        let l = n + cand as u64;
                        if top.is_none_or(|(tv, tl)| val > tv || (val == tv && l > tl)) {
                            top = Some((val, l));
                        }
                    }
                    let (val, l) = top.expect("two candidates");
                    (val, Some(l))
                }
            };
            let better = match best {
                None => true,
                Some((bv, _)) => candidate.0 > bv,
            };
            if better {
                best = Some(candidate);
            }
        }

        match run.len {
            None => return Ok(result(best.expect("infinite run always yields a candidate"))),
            Some(len) => {
                sum.add(ln_w, len as f64);
                end = end.checked_add(len).ok_or(Error::Overflow("position"))?;
            }
        }
    }
    Err(Error::BeyondRange {
        index: end + 1,
        covered: end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Exponent;
    use crate::sequence::{geometric, ConstantSequence, ExplicitSequence};
    use crate::weights::{RearrangedWeight, WeightFunction};

    fn line_power(s: f64) -> RearrangedWeight {
        RearrangedWeight::closed_form(WeightFunction::power(s).unwrap(), Exponent::Infinity, 1, 1.0).unwrap()
    }

    #[test]
    fn q_n_examples() {
        let one = ConstantSequence(1.0);
        assert!((q_n(&one, 1.0, 0, 4).unwrap() - 1.0).abs() < 1e-15);
        assert!((q_n(&one, 1.0, 2, 4).unwrap() - 0.5).abs() < 1e-15);
        // 1, 1, 1, 1/2 -> inverse sum 5
        assert!((q_n(&line_power(1.0), 1.0, 1, 4).unwrap() - 0.6).abs() < 1e-15);
        assert!(q_n(&one, 1.0, 4, 4).is_err());
    }

    #[test]
    fn l_star_is_a_local_max_of_q() {
        let rw = line_power(2.0);
        let n = 4;
        let l = find_l_star(&rw, n, 2.0).unwrap();
        let q = |l| q_n(&rw, 2.0, n, l).unwrap();
        assert!(q(l) >= q(l + 1), "l* = {l}");
        if l - 1 > n {
            assert!(q(l) >= q(l - 1), "l* = {l}");
        }
        // shell boundary: V_m = 2m + 1
        assert_eq!(l % 2, 1);
    }

    #[test]
    fn l_star_on_geometric_sequence() {
        let g = geometric(0.5);
        let l = find_l_star(&g, 1, 2.0).unwrap();
        let best = (2..200u64)
            .map(|l| (l, ln_q_n(&g, 2.0, 1, l).unwrap()))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 >= acc.1 { x } else { acc });
        assert_eq!(l, best.0);
    }

    #[test]
    fn l_star_absent_for_constant() {
        assert!(matches!(
            find_l_star(&ConstantSequence(1.0), 3, 2.0),
            Err(Error::NoThreshold { .. })
        ));
    }

    #[test]
    fn geometric_tail_sums() {
        let g = geometric(0.5);
        let t = tail_sum(&g, 0, 1.0, 1e-12).unwrap();
        assert!((t.value - 1.0).abs() < 1e-11, "{t:?}");
        let t = tail_sum(&g, 2, 1.0, 1e-12).unwrap();
        assert!((t.value - 0.25).abs() < 1e-12, "{t:?}");
        assert!(t.error_bound <= 1e-12 * t.value);
    }

    #[test]
    fn tail_of_half_geometric_after_one() {
        // Σ_{j>=2} 2^{-j} = 1/2
        let t = tail_sum(&geometric(0.5), 1, 1.0, 1e-12).unwrap();
        assert!((t.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tail_diverges_for_constant() {
        assert!(matches!(
            tail_sum(&ConstantSequence(1.0), 5, 2.0, 1e-9),
            Err(Error::TailDiverges { .. })
        ));
    }

    #[test]
    fn tail_runs_out_on_finite_sequence() {
        let seq = ExplicitSequence(vec![1.0, 0.5, 0.25]);
        assert!(matches!(tail_sum(&seq, 0, 1.0, 1e-9), Err(Error::BeyondRange { .. })));
    }

    #[test]
    fn constant_sequence_limit_is_one() {
        let h = h_functional(&ConstantSequence(1.0), 0, 1.0).unwrap();
        assert_eq!(h.value, 1.0);
        for n in [1, 10, 1000] {
            let h = h_functional(&ConstantSequence(1.0), n, 1.0).unwrap();
            assert!(h.value <= 1.0 && h.value > 1.0 - 1e-12, "{h:?}");
            assert_eq!(h.l_star, None);
            assert_eq!(h.regime, Regime::SupRegime);
            assert_eq!(h.tail_truncation_error_bound, 0.0);
        }
    }

    #[test]
    fn constant_sequence_matches_continuous_relaxation() {
        for (n, s) in [(5u64, 0.5), (10, 0.3), (7, 0.75), (1, 0.9)] {
            let h = |x: f64| (x - n as f64) / x.powf(1.0 / s);
            let x0 = n as f64 / (1.0 - s);
            let discrete = h(x0.floor()).max(h(x0.ceil()));
            let got = h_functional(&ConstantSequence(1.0), n, s).unwrap();
            assert!((got.value / discrete - 1.0).abs() < 1e-12, "n={n} s={s}");
            // continuous maximum s((1-s)/n)^{(1-s)/s}
            let cont = s * ((1.0 - s) / n as f64).powf((1.0 - s) / s);
            assert!(got.value <= cont * (1.0 + 1e-12));
            assert!((h(x0) / cont - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_regime_certifies_from_a_finite_prefix() {
        // later values can only be smaller, which bounds every later ratio
        let seq = ExplicitSequence(vec![1.0; 4]);
        let h = h_functional(&seq, 1, 0.5).unwrap();
        assert_eq!(h.l_star, Some(2));
        assert!((h.value - 0.25).abs() < 1e-15);
        // s = 1 on a constant stretch keeps climbing: no certificate
        assert!(matches!(h_functional(&seq, 1, 1.0), Err(Error::BeyondRange { .. })));
    }

    #[test]
    fn rejects_bad_s() {
        assert!(h_functional(&ConstantSequence(1.0), 1, 0.0).is_err());
        assert!(h_functional(&ConstantSequence(1.0), 1, f64::NAN).is_err());
    }
}
