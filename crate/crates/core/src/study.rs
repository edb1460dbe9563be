//! Convergence-study harness: function corpus with analytic derivatives,
//! predicted asymptotic limits, study records with CSV round-trip, and SVG
//! reporting.

use thiserror::Error;

use crate::geom::Point2;
use crate::lagrange::{Lp, ScalarField};
use crate::mesh::Polygon;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown corpus function {0:?}")]
    UnknownFunction(String),
    #[error("malformed study csv: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Shape(#[from] crate::shape::ShapeError),
    #[error(transparent)]
    Lagrange(#[from] crate::lagrange::LagrangeError),
}

/// A corpus entry: closed-form value, analytic jets where available, and a
/// default domain.
pub struct CorpusFunction {
    pub name: &'static str,
    value: fn(Point2) -> f64,
    jet2: Option<fn(Point2) -> Vec<f64>>,
    jet3: Option<fn(Point2) -> Vec<f64>>,
    pub domain: Polygon,
}

impl ScalarField for CorpusFunction {
    fn value(&self, p: Point2) -> f64 {
        (self.value)(p)
    }

    fn derivative_jet(&self, p: Point2, m: usize) -> Option<Vec<f64>> {
        match m {
            2 => self.jet2.map(|j| j(p)),
            3 => self.jet3.map(|j| j(p)),
            _ => None,
        }
    }
}

/// One record of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub error: f64,
    pub scaled: f64,
    pub predicted: f64,
    pub ratio: f64,
}

pub fn corpus() -> Vec<CorpusFunction> {
    unimplemented!()
}

pub fn predicted_limit(
    _f: &CorpusFunction,
    _omega: &Polygon,
    _m: usize,
    _p: Lp,
) -> Result<f64, StudyError> {
    unimplemented!()
}
