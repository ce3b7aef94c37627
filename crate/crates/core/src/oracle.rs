//! The black-box function interface and a call-counting wrapper.

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::samples::RegionLabel;

/// Function value and region label at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub label: RegionLabel,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle evaluation failed: {0}")]
    Failed(String),
}

/// A deterministic function on `[0,1]^d` that also reports which smooth
/// region each point belongs to. Implementations must be reentrant.
pub trait Oracle: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError>;

    /// One-line human-readable identification, used in model files.
    fn describe(&self) -> String {
        format!("oracle d={}", self.dimension())
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        (**self).evaluate(x)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<O: Oracle + ?Sized + Send> Oracle for Box<O> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        (**self).evaluate(x)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Wraps an oracle and counts every evaluation, including failed ones.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}
