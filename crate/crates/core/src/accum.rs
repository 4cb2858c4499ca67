//! Compensated sums and mergeable moment accumulators.

use std::ops::AddAssign;

use crate::{Mat3, Vec3};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

/// Fixed-length array of compensated sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedArray {
    cells: Vec<CompensatedSum>,
}

impl CompensatedArray {
    pub fn zeros(len: usize) -> Self {
        Self { cells: vec![CompensatedSum::default(); len] }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn add_slice(&mut self, xs: &[f64]) {
        debug_assert_eq!(xs.len(), self.cells.len());
        for (c, &x) in self.cells.iter_mut().zip(xs) {
            c.add(x);
        }
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.cells[idx].value()
    }

    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().map(CompensatedSum::value).collect()
    }
}

/// Streaming mean and co-moment matrix of 3-vectors (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    mean: Vec3,
    comoment: Mat3,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: &Vec3) {
        self.merge(&Self { count: 1, mean: *x, comoment: Mat3::zeros() });
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * (nb / n);
        self.comoment += other.comoment + delta * delta.transpose() * (na * nb / n);
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Vec3 {
        self.mean
    }

    /// Unbiased sample covariance; zero with fewer than two samples.
    pub fn covariance(&self) -> Mat3 {
        if self.count < 2 {
            return Mat3::zeros();
        }
        self.comoment / (self.count - 1) as f64
    }
}

/// Streaming central moments up to order four of a scalar (Pébay merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalarMoments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl ScalarMoments {
    pub fn push(&mut self, x: f64) {
        self.merge(&Self { count: 1, mean: x, ..Default::default() });
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Sample skewness `m3 / m2^{3/2}` (population normalisation).
    pub fn skewness(&self) -> f64 {
        let n = self.count as f64;
        if self.m2 <= 0.0 {
            return 0.0;
        }
        (self.m3 / n) / (self.m2 / n).powf(1.5)
    }

    /// Sample excess kurtosis.
    pub fn excess_kurtosis(&self) -> f64 {
        let n = self.count as f64;
        if self.m2 <= 0.0 {
            return 0.0;
        }
        (self.m4 / n) / (self.m2 / n).powi(2) - 3.0
    }
}

/// Reduces `items` along a balanced binary tree whose shape depends only on
/// `items.len()`.
pub fn pairwise_reduce<T: Clone>(items: Vec<T>, combine: impl Fn(&T, &T) -> T) -> Option<T> {
    fn go<T: Clone>(xs: &[T], f: &impl Fn(&T, &T) -> T) -> Option<T> {
        match xs.len() {
            0 => None,
            1 => Some(xs[0].clone()),
            n => {
                let (l, r) = xs.split_at(n / 2);
                Some(f(&go(l, f)?, &go(r, f)?))
            }
        }
    }
    go(&items, &combine)
}
