//! Neumaier-compensated accumulation.

use crate::scalar::{abs, Scalar};

/// Running compensated sum. Merging two accumulators is exact in the
/// compensation term, so partial sums from disjoint blocks can be combined
/// in a fixed order to give partition-independent totals.
#[derive(Debug, Clone)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), compensation: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum.clone() + value.clone();
        if abs(&self.sum) >= abs(&value) {
            self.compensation = self.compensation.clone() + ((self.sum.clone() - t.clone()) + value);
        } else {
            self.compensation = self.compensation.clone() + ((value - t.clone()) + self.sum.clone());
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum.clone());
        self.add(other.compensation.clone());
    }

    pub fn value(&self) -> T {
        self.sum.clone() + self.compensation.clone()
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}
