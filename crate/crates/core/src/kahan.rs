//! Compensated summation.
//!
//! All estimator accumulations run through [`KahanSum`] (Neumaier variant)
//! so that panels with up to 10^7 samples keep better than 1e-9 relative
//! accuracy regardless of summand ordering or magnitude spread.

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated mean; 0 for an empty slice.
pub fn kahan_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    kahan_sum(values.iter().copied()) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_term() {
        // Naive summation returns 0.0 here.
        assert_eq!(kahan_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn matches_exact_small_sum() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(kahan_sum(xs.iter().copied()), 500500.0);
    }

    #[test]
    fn long_alternating_sum_stays_accurate() {
        // sum of n*(0.1 - 0.1) interleaved with a large offset
        let mut acc = KahanSum::new();
        acc.add(1e12);
        for _ in 0..1_000_000 {
            acc.add(0.1);
            acc.add(-0.1);
        }
        acc.add(-1e12);
        assert!(acc.value().abs() < 1e-9);
    }
}
