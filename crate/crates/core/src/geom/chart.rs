use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("chart dimension must be positive")]
    Empty,
    #[error("bounds have {lo} lower and {hi} upper entries, flags {flags}")]
    Mismatch { lo: usize, hi: usize, flags: usize },
    #[error("coordinate {0}: lower bound must be below upper bound")]
    EmptyInterval(usize),
    #[error("coordinate {0} is flagged positive but its lower bound is negative")]
    NegativePositive(usize),
}

/// One affine coordinate patch: an open box in R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    lo: Vec<f64>,
    hi: Vec<f64>,
    positive: Vec<bool>,
}

impl Chart {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, positive: Vec<bool>) -> Result<Self, ChartError> {
        if lo.is_empty() {
            return Err(ChartError::Empty);
        }
        if lo.len() != hi.len() || lo.len() != positive.len() {
            return Err(ChartError::Mismatch {
                lo: lo.len(),
                hi: hi.len(),
                flags: positive.len(),
            });
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) {
                return Err(ChartError::EmptyInterval(i));
            }
            if positive[i] && lo[i] < 0.0 {
                return Err(ChartError::NegativePositive(i));
            }
        }
        Ok(Chart { lo, hi, positive })
    }

    /// Box without positivity constraints.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self, ChartError> {
        Self::new(lo.to_vec(), hi.to_vec(), vec![false; lo.len()])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn positive(&self) -> &[bool] {
        &self.positive
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && (0..self.dim()).all(|i| p[i] > self.lo[i] && p[i] < self.hi[i])
    }

    /// Appends a coordinate with interval `(lo, hi)`.
    pub fn extended(&self, lo: f64, hi: f64, positive: bool) -> Result<Self, ChartError> {
        let mut l = self.lo.clone();
        let mut h = self.hi.clone();
        let mut f = self.positive.clone();
        l.push(lo);
        h.push(hi);
        f.push(positive);
        Self::new(l, h, f)
    }

    /// Box of half-width `radius` around `center`, clipped to this chart.
    pub fn sub_box(&self, center: &[f64], radius: f64) -> Result<Self, ChartError> {
        let lo = (0..self.dim()).map(|i| (center[i] - radius).max(self.lo[i])).collect();
        let hi = (0..self.dim()).map(|i| (center[i] + radius).min(self.hi[i])).collect();
        Self::new(lo, hi, self.positive.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_bounds() {
        assert!(Chart::boxed(&[0.0], &[1.0]).is_ok());
        assert_eq!(Chart::boxed(&[1.0], &[1.0]), Err(ChartError::EmptyInterval(0)));
        assert_eq!(
            Chart::new(vec![-1.0], vec![1.0], vec![true]),
            Err(ChartError::NegativePositive(0))
        );
        assert_eq!(Chart::boxed(&[], &[]), Err(ChartError::Empty));
    }

    #[test]
    fn extension_and_sub_box() {
        let c = Chart::boxed(&[-1.0, 0.5], &[1.0, 2.0]).unwrap();
        let e = c.extended(0.5, 2.0, true).unwrap();
        assert_eq!(e.dim(), 3);
        assert!(e.positive()[2]);
        let s = c.sub_box(&[0.9, 1.0], 0.5).unwrap();
        assert_eq!(s.lo(), &[0.4, 0.5]);
        assert_eq!(s.hi(), &[1.0, 1.5]);
    }
}
