//! Evaluated sample points with their values and region labels.

use std::fmt;

/// Opaque identifier of the smooth subdomain a sample belongs to, as
/// reported by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionLabel(pub u64);

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Insertion-ordered sample storage. The first `2^d` entries are the cube
/// corners and entry `2^d` is the cube center.
#[derive(Debug, Clone)]
pub struct SampleSet {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    labels: Vec<RegionLabel>,
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, point: &[f64], value: f64, label: RegionLabel) -> usize {
        assert_eq!(point.len(), self.dim, "sample dimension mismatch");
        self.coords.extend_from_slice(point);
        self.values.push(value);
        self.labels.push(label);
        self.values.len() - 1
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn label(&self, i: usize) -> RegionLabel {
        self.labels[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[RegionLabel] {
        &self.labels
    }

    /// Number of samples placed by initialization: corners plus center.
    pub fn initial_count(dim: usize) -> usize {
        (1usize << dim) + 1
    }
}
