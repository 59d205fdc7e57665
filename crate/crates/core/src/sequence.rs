//! Nonincreasing positive sequences `Ψ(1) >= Ψ(2) >= …` described as runs of
//! equal values.
//!
//! Values are carried as natural logarithms so that weights such as `R^{-m}`
//! can be followed far past the point where they underflow.

use crate::error::{Error, Result};

/// `len` consecutive positions sharing the value `exp(ln_value)`.
/// `len == None` marks a run that never ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub ln_value: f64,
    pub len: Option<u64>,
}

impl Run {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

pub type Runs<'a> = Box<dyn Iterator<Item = Result<Run>> + 'a>;

/// A positive nonincreasing sequence indexed from 1.
pub trait StepSequence: Sync {
    /// Runs in order of position. An iterator that ends means the sequence
    /// is not known past that point.
    fn runs(&self) -> Runs<'_>;

    /// `ln Ψ(j)`.
    fn ln_value(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::InvalidParameter("positions start at 1".into()));
        }
        let mut end = 0u64;
        for run in self.runs() {
            let run = run?;
            match run.len {
                None => return Ok(run.ln_value),
                Some(len) => {
                    end += len;
                    if j <= end {
                        return Ok(run.ln_value);
                    }
                }
            }
        }
        Err(Error::BeyondRange { index: j, covered: end })
    }

    fn value(&self, j: u64) -> Result<f64> {
        self.ln_value(j).map(f64::exp)
    }
}

impl<T: StepSequence + ?Sized> StepSequence for &T {
    fn runs(&self) -> Runs<'_> {
        (**self).runs()
    }

    fn ln_value(&self, j: u64) -> Result<f64> {
        (**self).ln_value(j)
    }
}

/// `Ψ ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSequence(pub f64);

impl StepSequence for ConstantSequence {
    fn runs(&self) -> Runs<'_> {
        Box::new(std::iter::once(Ok(Run {
            ln_value: self.0.ln(),
            len: None,
        })))
    }
}

/// A sequence given by a closure for `ln Ψ(j)`, one run per position.
///
/// Monotonicity is the caller's responsibility.
pub struct FnSequence<F> {
    ln_value: F,
}

impl<F: Fn(u64) -> f64 + Sync> FnSequence<F> {
    pub fn from_ln(ln_value: F) -> Self {
        FnSequence { ln_value }
    }
}

/// `Ψ(j) = ratio^j`, `0 < ratio < 1`.
pub fn geometric(ratio: f64) -> FnSequence<impl Fn(u64) -> f64 + Sync> {
    let ln_ratio = ratio.ln();
    FnSequence::from_ln(move |j| j as f64 * ln_ratio)
}

impl<F: Fn(u64) -> f64 + Sync> StepSequence for FnSequence<F> {
    fn runs(&self) -> Runs<'_> {
        Box::new((1u64..).map(move |j| {
            Ok(Run {
                ln_value: (self.ln_value)(j),
                len: Some(1),
            })
        }))
    }

    fn ln_value(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::InvalidParameter("positions start at 1".into()));
        }
        Ok((self.ln_value)(j))
    }
}

/// A finite sequence; positions past the end are unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSequence(pub Vec<f64>);

impl StepSequence for ExplicitSequence {
    fn runs(&self) -> Runs<'_> {
        Box::new(self.0.iter().map(|&v| {
            Ok(Run {
                ln_value: v.ln(),
                len: Some(1),
            })
        }))
    }
}

/// `c·Ψ`.
pub struct Scaled<S> {
    pub inner: S,
    pub factor: f64,
}

impl<S: StepSequence> StepSequence for Scaled<S> {
    fn runs(&self) -> Runs<'_> {
        let shift = self.factor.ln();
        Box::new(self.inner.runs().map(move |r| {
            r.map(|run| Run {
                ln_value: run.ln_value + shift,
                len: run.len,
            })
        }))
    }

    fn ln_value(&self, j: u64) -> Result<f64> {
        Ok(self.inner.ln_value(j)? + self.factor.ln())
    }
}
