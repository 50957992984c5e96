//! Order-stable floating-point reductions.
//!
//! Every sum that feeds a reported cost or statistic runs through compensated
//! summation in a fixed record order. Parallel stages collect per-item results
//! into indexed buffers and reduce them sequentially, so output is identical
//! regardless of thread count.

/// Neumaier-compensated accumulator.
///
/// Tracks a running compensation term that captures the low-order bits lost
/// by each addition, which keeps long sums of small terms accurate even when
/// the running total is large.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator, consumed in iteration order.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Arithmetic mean with compensated accumulation. Returns 0 for empty input.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Two-pass sample variance with the n - 1 denominator.
///
/// Callers must ensure `values.len() >= 2`.
pub fn sample_variance(values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 2);
    let m = mean(values);
    let ss = sum(values.iter().map(|v| (v - m) * (v - m)));
    ss / (values.len() - 1) as f64
}
