//! Collocation regions and point sets.
//!
//! A rule constrains either the whole definition domain or one face of it
//! (an initial/boundary hyperplane). Collocation points are uniform grids:
//! rules restrict the model wherever they are evaluated, so grids span the
//! entire region.

use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Where a rule's residual is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// The full definition domain (optionally overridden per rule, e.g. a
    /// collocation domain larger than the training domain).
    FullDomain,
    /// Like `FullDomain` but over explicit per-axis intervals.
    Domain { intervals: Vec<[f64; 2]> },
    /// The hyperplane `x[axis] == value` restricted to the domain.
    Face { axis: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    FullGrid,
    FaceGrid,
}

/// Points where one rule's residual is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub points: Array2<f64>,
    pub layout: Layout,
    pub grid_shape: Vec<usize>,
}

impl CollocationSet {
    /// Uniform inclusive grid over `intervals` with `shape` nodes per axis.
    pub fn full_grid(intervals: &[[f64; 2]], shape: &[usize]) -> Result<Self> {
        if intervals.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: intervals.len(),
                got: shape.len(),
            });
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::Data("grid needs at least 2 nodes per axis".into()));
        }
        let total: usize = shape.iter().product();
        let d = intervals.len();
        let mut points = Array2::zeros((total, d));
        for (row, mut pt) in points.outer_iter_mut().enumerate() {
            let mut rem = row;
            for j in 0..d {
                let n = shape[j];
                let k = rem % n;
                rem /= n;
                let [lo, hi] = intervals[j];
                pt[j] = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            }
        }
        Ok(Self {
            points,
            layout: Layout::FullGrid,
            grid_shape: shape.to_vec(),
        })
    }

    /// Uniform grid on the face `x[axis] == value`, with `shape` nodes over
    /// the remaining axes (in ascending axis order).
    pub fn face_grid(
        intervals: &[[f64; 2]],
        axis: usize,
        value: f64,
        shape: &[usize],
    ) -> Result<Self> {
        let d = intervals.len();
        if axis >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: axis + 1,
            });
        }
        if shape.len() != d - 1 {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                got: shape.len(),
            });
        }
        let others: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
        let total: usize = shape.iter().product::<usize>().max(1);
        let mut points = Array2::zeros((total, d));
        for (row, mut pt) in points.outer_iter_mut().enumerate() {
            pt[axis] = value;
            let mut rem = row;
            for (k, &j) in others.iter().enumerate() {
                let n = shape[k].max(2);
                let idx = rem % n;
                rem /= n;
                let [lo, hi] = intervals[j];
                pt[j] = lo + (hi - lo) * idx as f64 / (n - 1) as f64;
            }
        }
        Ok(Self {
            points,
            layout: Layout::FaceGrid,
            grid_shape: shape.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Every point satisfies the region predicate (faces exactly, domains
    /// inclusively).
    pub fn check_region(&self, region: &Region, domain: &[[f64; 2]]) -> bool {
        match region {
            Region::FullDomain => self.points.outer_iter().all(|p| {
                p.iter()
                    .zip(domain)
                    .all(|(&v, [lo, hi])| v >= *lo - 1e-12 && v <= *hi + 1e-12)
            }),
            Region::Domain { intervals } => self.points.outer_iter().all(|p| {
                p.iter()
                    .zip(intervals)
                    .all(|(&v, [lo, hi])| v >= *lo - 1e-12 && v <= *hi + 1e-12)
            }),
            Region::Face { axis, value } => self
                .points
                .outer_iter()
                .all(|p| (p[*axis] - value).abs() < 1e-12),
        }
    }
}
