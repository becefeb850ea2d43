//! Compensated (Neumaier) summation.
//!
//! Inequality checks at 1e-12 tolerances must not be poisoned by naive
//! accumulation error, so every integral in the crate funnels through this.

#[derive(Debug, Clone, Copy, Default)]
pub struct Ksum {
    sum: f64,
    comp: f64,
}

impl Ksum {
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
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator in its native order.
pub fn ksum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = Ksum::new();
    for x in iter {
        acc.add(x);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_cancellation() {
        // 1 + 1e100 - 1e100 + 1 = 2 exactly under Neumaier summation.
        let s = ksum([1.0, 1e100, -1e100, 1.0]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn many_small_terms() {
        let n = 1_000_000;
        let s = ksum((0..n).map(|_| 0.1));
        assert!((s - 0.1 * n as f64).abs() < 1e-6);
    }
}
