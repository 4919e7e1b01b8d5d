use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("invalid interval [{lo}, {hi}]: bounds must be finite and ordered")]
pub struct IntervalError {
    pub lo: f64,
    pub hi: f64,
}

/// Closed interval `[lo, hi]` used for uniform sampling ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError { lo, hi })
        }
    }

    /// Symmetric interval `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self, IntervalError> {
        Self::new(-half_width, half_width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.lo..=self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn rejects_unordered_and_non_finite() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
        assert!(Interval::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn degenerate_interval_samples_its_point() {
        let iv = Interval::new(0.0, 0.0).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..10 {
            assert_eq!(iv.sample(&mut rng), 0.0);
        }
    }

    #[test]
    fn samples_stay_inside() {
        let iv = Interval::new(-0.2, 0.7).unwrap();
        let mut rng = seeded_rng(11);
        assert!((0..1000).all(|_| iv.contains(iv.sample(&mut rng))));
    }
}
