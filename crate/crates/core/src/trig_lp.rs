//! Trigonometric polynomials on uniform grids of `T^d` and `L_p` norms by
//! quadrature.
//!
//! On the grid `x_j = 2πj/N` the mean of a trigonometric polynomial of
//! degree below `N` equals its integral, so for even integer `p` the
//! quadrature of `|f|^p = (f·conj f)^{p/2}` is exact once `N > p·max|k|_∞`.

use std::collections::HashSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{sp_norm, CoefficientSequence};
use crate::error::{Error, Result};
use crate::lattice::MultiIndex;

/// Default cap on `N^d`.
pub const DEFAULT_GRID_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub points_per_dim: u64,
    pub budget: u64,
}

impl GridSpec {
    pub fn new(d: usize, points_per_dim: u64) -> Result<Self> {
        if d == 0 || points_per_dim == 0 {
            return Err(Error::InvalidParameter("grid needs d >= 1 and N >= 1".into()));
        }
        Ok(GridSpec {
            d,
            points_per_dim,
            budget: DEFAULT_GRID_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Smallest grid on which the `L_p` quadrature of `f` is exact when `p`
    /// is an even integer; for other `p` the next even integer is used.
    pub fn for_polynomial(f: &CoefficientSequence, p: f64) -> Result<Self> {
        let even = 2 * (p / 2.0).ceil().max(1.0) as u64;
        Self::new(f.dim(), even * f.max_frequency() + 1)
    }

    pub fn total_points(&self) -> Result<u64> {
        let total = (self.points_per_dim as u128).pow(self.d as u32);
        if total > self.budget as u128 {
            return Err(Error::BudgetExceeded {
                requested: total,
                budget: self.budget,
            });
        }
        Ok(total as u64)
    }

    /// Coordinates `(j_1, …, j_d)` of the `flat`-th point, `j_1` slowest.
    pub fn point(&self, mut flat: u64) -> Vec<u64> {
        let mut j = vec![0; self.d];
        for slot in j.iter_mut().rev() {
            *slot = flat % self.points_per_dim;
            flat /= self.points_per_dim;
        }
        j
    }
}

/// `f(x_j) = Σ_k f̂(k) e^{i(k, x_j)}` at every grid point, in the order of
/// [`GridSpec::point`].
pub fn evaluate_on_grid(f: &CoefficientSequence, g: &GridSpec) -> Result<Vec<Complex64>> {
    if f.dim() != g.d {
        return Err(Error::InvalidParameter(format!(
            "function has dimension {}, grid has {}",
            f.dim(),
            g.d
        )));
    }
    let total = g.total_points()?;
    let n = g.points_per_dim;
    let roots: Vec<Complex64> = (0..n)
        .map(|t| Complex64::from_polar(1.0, TAU * t as f64 / n as f64))
        .collect();
    // frequencies reduced mod N so the phase index stays exact
    let terms: Vec<(Vec<u64>, Complex64)> = f
        .iter()
        .map(|(k, a)| (k.coords().iter().map(|&c| c.rem_euclid(n as i64) as u64).collect(), *a))
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); total as usize];
    out.par_chunks_mut(4096).enumerate().for_each(|(chunk, slice)| {
        let start = chunk as u64 * 4096;
        for (offset, value) in slice.iter_mut().enumerate() {
            let j = g.point(start + offset as u64);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, a) in &terms {
                let phase = k.iter().zip(&j).fold(0u64, |acc, (&k, &j)| (acc + k * j % n) % n);
                acc += a * roots[phase as usize];
            }
            *value = acc;
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpNorm {
    pub value: f64,
    /// Quadrature is exact up to rounding (even integer `p`, fine enough grid).
    pub exact: bool,
    /// `|‖f‖(2N) - ‖f‖(N)|` when not exact and the refined grid fits the
    /// budget; zero when exact.
    pub error_estimate: Option<f64>,
}

fn grid_mean_power(f: &CoefficientSequence, p: f64, g: &GridSpec) -> Result<f64> {
    let samples = evaluate_on_grid(f, g)?;
    let count = samples.len() as f64;
    // fixed chunking keeps the summation order independent of scheduling
    let partial: Vec<f64> = samples
        .par_chunks(4096)
        .map(|c| c.iter().map(|z| z.norm().powf(p)).sum())
        .collect();
    let sum: f64 = partial.iter().sum();
    Ok((sum / count).powf(1.0 / p))
}

fn is_even_integer(p: f64) -> bool {
    p.fract() == 0.0 && (p as u64).is_multiple_of(2)
}

/// `((1/N^d) Σ_j |f(x_j)|^p)^{1/p}`.
pub fn lp_norm(f: &CoefficientSequence, p: f64, g: &GridSpec) -> Result<LpNorm> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let value = grid_mean_power(f, p, g)?;
    let exact = is_even_integer(p) && (g.points_per_dim as f64) > p * f.max_frequency() as f64;
    let error_estimate = if exact {
        Some(0.0)
    } else {
        let fine = GridSpec {
            points_per_dim: 2 * g.points_per_dim,
            ..*g
        };
        match grid_mean_power(f, p, &fine) {
            Ok(v) => Some((v - value).abs()),
            Err(Error::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(LpNorm {
        value,
        exact,
        error_estimate,
    })
}

/// Whether `gamma ⊂ [-c n^{1/d}, c n^{1/d}]^d` with `n = |gamma|`.
pub fn in_lemma_box(gamma: &[MultiIndex], c: f64) -> bool {
    let Some(first) = gamma.first() else {
        return true;
    };
    let side = c * (gamma.len() as f64).powf(1.0 / first.dim() as f64);
    gamma.iter().all(|k| k.max_abs() as f64 <= side)
}

/// `‖Σ_{k∈γ} e^{i(k,·)}‖_p`. Warns when `γ` leaves the box
/// `[-c n^{1/d}, c n^{1/d}]^d`, where the two-sided estimate
/// `≍ n^{1-1/p}` is no longer claimed.
pub fn exponential_sum_norm(gamma: &[MultiIndex], p: f64, g: &GridSpec, c: f64) -> Result<LpNorm> {
    let mut seen = HashSet::with_capacity(gamma.len());
    for k in gamma {
        if !seen.insert(k) {
            return Err(Error::InvalidParameter(format!("repeated frequency {:?}", k.0)));
        }
    }
    if !in_lemma_box(gamma, c) {
        log::warn!("frequency set leaves the box of constant {c}; the order estimate may not apply");
    }
    let f = CoefficientSequence::from_entries(g.d, gamma.iter().map(|k| (k.clone(), Complex64::new(1.0, 0.0))))?;
    lp_norm(&f, p, g)
}

/// `‖f‖_{S^{p'}} - ‖f‖_{L_p}` for `p >= 2`; nonnegative up to rounding.
pub fn hausdorff_young_gap(f: &CoefficientSequence, p: f64, g: &GridSpec) -> Result<f64> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let p_conj = p / (p - 1.0);
    Ok(sp_norm(f, p_conj)? - lp_norm(f, p, g)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn constant_and_single_mode_samples() {
        let one = CoefficientSequence::from_real_1d(&[(0, 1.0)]).unwrap();
        let s = evaluate_on_grid(&one, &GridSpec::new(1, 5).unwrap()).unwrap();
        assert!(s.iter().all(|&z| close(z, Complex64::new(1.0, 0.0))));

        let e1 = CoefficientSequence::from_real_1d(&[(1, 1.0)]).unwrap();
        let s = evaluate_on_grid(&e1, &GridSpec::new(1, 4).unwrap()).unwrap();
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        assert!(s.iter().zip(expect).all(|(&a, b)| close(a, b)));
    }

    #[test]
    fn two_dimensional_sample_order() {
        let f = CoefficientSequence::from_entries(2, [(MultiIndex(vec![0, 1]), Complex64::new(1.0, 0.0))]).unwrap();
        let g = GridSpec::new(2, 4).unwrap();
        let s = evaluate_on_grid(&f, &g).unwrap();
        // second coordinate varies fastest
        assert!(close(s[1], Complex64::new(0.0, 1.0)));
        assert!(close(s[4], Complex64::new(1.0, 0.0)));
        assert_eq!(g.point(6), vec![1, 2]);
    }

    #[test]
    fn budget_is_enforced() {
        let f = CoefficientSequence::from_real_1d(&[(0, 1.0)]).unwrap();
        let g = GridSpec::new(1, 100).unwrap().with_budget(50);
        assert!(matches!(evaluate_on_grid(&f, &g), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn norm_examples() {
        let e = CoefficientSequence::from_real_1d(&[(3, 1.0)]).unwrap();
        for p in [1.0, 2.0, 3.5, 6.0] {
            let v = lp_norm(&e, p, &GridSpec::new(1, 32).unwrap()).unwrap();
            assert!((v.value - 1.0).abs() < 1e-12, "p = {p}");
        }
        let f = CoefficientSequence::from_real_1d(&[(0, 1.0), (1, 1.0)]).unwrap();
        let v = lp_norm(&f, 2.0, &GridSpec::new(1, 3).unwrap()).unwrap();
        assert!(v.exact && (v.value - 2f64.sqrt()).abs() < 1e-14);
        let m = 7;
        let dirichlet: Vec<(i64, f64)> = (-m..=m).map(|k| (k, 1.0)).collect();
        let f = CoefficientSequence::from_real_1d(&dirichlet).unwrap();
        let v = lp_norm(&f, 2.0, &GridSpec::for_polynomial(&f, 2.0).unwrap()).unwrap();
        assert!((v.value - ((2 * m + 1) as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exactness_tag() {
        let f = CoefficientSequence::from_real_1d(&[(0, 1.0), (2, 0.5)]).unwrap();
        let v = lp_norm(&f, 4.0, &GridSpec::new(1, 9).unwrap()).unwrap();
        assert!(v.exact && v.error_estimate == Some(0.0));
        let v = lp_norm(&f, 4.0, &GridSpec::new(1, 8).unwrap()).unwrap();
        assert!(!v.exact);
        let v = lp_norm(&f, 3.0, &GridSpec::new(1, 64).unwrap()).unwrap();
        assert!(!v.exact && v.error_estimate.unwrap() < 1e-10);
    }

    #[test]
    fn exponential_sums() {
        let g = GridSpec::new(1, 16).unwrap();
        let one = [MultiIndex(vec![4])];
        for p in [1.0, 2.0, 5.0] {
            assert!((exponential_sum_norm(&one, p, &g, 1.0).unwrap().value - 1.0).abs() < 1e-12);
        }
        let m = 5;
        let block: Vec<MultiIndex> = (-m..=m).map(|k| MultiIndex(vec![k])).collect();
        let v = exponential_sum_norm(&block, 2.0, &GridSpec::new(1, 32).unwrap(), 1.0).unwrap();
        assert!((v.value - 11f64.sqrt()).abs() < 1e-12);
        let dup = [MultiIndex(vec![1]), MultiIndex(vec![1])];
        assert!(exponential_sum_norm(&dup, 2.0, &g, 1.0).is_err());
        assert!(in_lemma_box(&block, 1.0));
        assert!(!in_lemma_box(&[MultiIndex(vec![3])], 2.0));
    }

    #[test]
    fn hausdorff_young_equality_cases() {
        let e = CoefficientSequence::from_real_1d(&[(-2, 1.0)]).unwrap();
        let gap = hausdorff_young_gap(&e, 4.0, &GridSpec::new(1, 9).unwrap()).unwrap();
        assert!(gap.abs() < 1e-12);
        let f = CoefficientSequence::from_real_1d(&[(0, 1.0), (1, -2.0), (3, 0.5)]).unwrap();
        let gap = hausdorff_young_gap(&f, 2.0, &GridSpec::new(1, 7).unwrap()).unwrap();
        assert!(gap.abs() < 1e-12);
        assert!(hausdorff_young_gap(&f, 1.5, &GridSpec::new(1, 7).unwrap()).is_err());
    }
}
