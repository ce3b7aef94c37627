//! Analytic test oracles built on `prod_i sin(pi x_i)`.

use std::f64::consts::PI;

use crate::oracle::{Evaluation, Oracle, OracleError};
use crate::samples::RegionLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `prod sin(pi x_i)`, one region.
    SmoothSine,
    /// Smooth values, but labelled as if a kink sat at `threshold`.
    SmoothSineFakeKink { threshold: f64 },
    /// `min(prod sin(pi x_i), threshold)`.
    ClippedSine { threshold: f64 },
}

/// Region below the threshold.
pub const BELOW: RegionLabel = RegionLabel(1);
/// Region at or above the threshold.
pub const ABOVE: RegionLabel = RegionLabel(2);

pub fn sine_product(x: &[f64]) -> f64 {
    x.iter().map(|&t| (PI * t).sin()).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOracle {
    pub kind: TestFunction,
    pub dim: usize,
}

impl TestOracle {
    pub fn new(kind: TestFunction, dim: usize) -> Self {
        if let TestFunction::SmoothSineFakeKink { threshold } | TestFunction::ClippedSine { threshold } = kind {
            assert!(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0,1)");
        }
        Self { kind, dim }
    }

    pub fn smooth(dim: usize) -> Self {
        Self::new(TestFunction::SmoothSine, dim)
    }

    pub fn fake_kink(dim: usize, threshold: f64) -> Self {
        Self::new(TestFunction::SmoothSineFakeKink { threshold }, dim)
    }

    pub fn clipped(dim: usize, threshold: f64) -> Self {
        Self::new(TestFunction::ClippedSine { threshold }, dim)
    }

    /// Function value without the label.
    pub fn value(&self, x: &[f64]) -> f64 {
        let s = sine_product(x);
        match self.kind {
            TestFunction::ClippedSine { threshold } => s.min(threshold),
            _ => s,
        }
    }
}

impl Oracle for TestOracle {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        if x.len() != self.dim {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let s = sine_product(x);
        let (value, label) = match self.kind {
            TestFunction::SmoothSine => (s, BELOW),
            TestFunction::SmoothSineFakeKink { threshold } => {
                (s, if s < threshold { BELOW } else { ABOVE })
            }
            TestFunction::ClippedSine { threshold } => {
                if s < threshold {
                    (s, BELOW)
                } else {
                    (threshold, ABOVE)
                }
            }
        };
        Ok(Evaluation { value, label })
    }

    fn describe(&self) -> String {
        match self.kind {
            TestFunction::SmoothSine => format!("smooth-sine d={}", self.dim),
            TestFunction::SmoothSineFakeKink { threshold } => {
                format!("fake-kink d={} threshold={threshold}", self.dim)
            }
            TestFunction::ClippedSine { threshold } => {
                format!("clipped-sine d={} threshold={threshold}", self.dim)
            }
        }
    }
}

/// `f = c` everywhere, one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantOracle {
    pub dim: usize,
    pub value: f64,
}

impl Oracle for ConstantOracle {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        if x.len() != self.dim {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(Evaluation {
            value: self.value,
            label: BELOW,
        })
    }

    fn describe(&self) -> String {
        format!("constant d={} value={}", self.dim, self.value)
    }
}

/// `f(x) = x_0` everywhere, one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCoordinateOracle {
    pub dim: usize,
}

impl Oracle for FirstCoordinateOracle {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        Ok(Evaluation {
            value: x[0],
            label: BELOW,
        })
    }

    fn describe(&self) -> String {
        format!("first-coordinate d={}", self.dim)
    }
}
