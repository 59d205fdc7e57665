//! Compensated summation of positive terms given by their logarithms.

/// Neumaier sum of positive terms `exp(ln_term)` kept relative to a running
/// scale, so that the total can range far outside `f64`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    scale: f64,
    sum: f64,
    comp: f64,
}

const RESCALE_GAP: f64 = 300.0;

impl LogSum {
    pub(crate) fn new() -> Self {
        LogSum {
            scale: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }

    /// Adds `count` copies of `exp(ln_term)`.
    pub(crate) fn add(&mut self, ln_term: f64, count: f64) {
        if count <= 0.0 || ln_term == f64::NEG_INFINITY {
            return;
        }
        let ln_total = ln_term + count.ln();
        if self.scale == f64::NEG_INFINITY {
            self.scale = ln_total;
        } else if ln_total > self.scale + RESCALE_GAP {
            let factor = (self.scale - ln_total).exp();
            self.sum *= factor;
            self.comp *= factor;
            self.scale = ln_total;
        }
        let x = (ln_total - self.scale).exp();
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.scale == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.scale + (self.sum + self.comp).ln()
    }

    pub(crate) fn value(&self) -> f64 {
        self.ln().exp()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.scale == f64::NEG_INFINITY
    }
}
