//! Compensated (Kahan-Babuska-Neumaier) accumulation.
//!
//! Lattice identities are checked at the 1e-12 level over up to ~10^6
//! terms, so every long reduction in the crate goes through these
//! accumulators.

use std::ops::AddAssign;

#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl AddAssign<NeumaierSum> for NeumaierSum {
    fn add_assign(&mut self, rhs: NeumaierSum) {
        self.add(rhs.sum);
        self.add(rhs.compensation);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

/// Compensated accumulator for real 3-vectors.
#[derive(Clone, Copy, Debug, Default)]
pub struct VecSum3 {
    parts: [NeumaierSum; 3],
}

impl VecSum3 {
    #[inline]
    pub fn add_scaled(&mut self, scale: f64, v: [f64; 3]) {
        for (p, x) in self.parts.iter_mut().zip(v) {
            p.add(scale * x);
        }
    }

    pub fn merge(&mut self, other: &VecSum3) {
        for (p, q) in self.parts.iter_mut().zip(other.parts.iter()) {
            *p += *q;
        }
    }

    pub fn value(&self) -> [f64; 3] {
        [
            self.parts[0].value(),
            self.parts[1].value(),
            self.parts[2].value(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(values), 2.0);
        let naive: f64 = values.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn harmonic_tail_matches_reverse_order() {
        let forward = compensated_sum((1..200_000).map(|n| 1.0 / n as f64));
        let backward = compensated_sum((1..200_000).rev().map(|n| 1.0 / n as f64));
        assert!((forward - backward).abs() <= 1e-15 * forward);
    }
}
