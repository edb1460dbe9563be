//! Shape functions, optimal metrics and near-optimal adapted triangulations
//! for Lagrange finite-element interpolation on 2D meshes.
//!
//! The crate is organised around six building blocks:
//!
//! * [`forms`] — algebra of homogeneous binary forms (evaluation, composition,
//!   determinant/discriminant, roots, normal-form tests);
//! * [`lagrange`] — triangles, Lagrange interpolation of degree `m-1`,
//!   quadrature and local/global `L^p` interpolation errors;
//! * [`shape`] — the shape function `K` (tempered numerical oracle, closed
//!   forms for degrees 2 and 3, inscribed-ellipse variant, polynomial
//!   invariant equivalents for degree ≥ 4);
//! * [`metric`] — optimal anisotropy metrics: cubic normalisation, maximal
//!   inscribed ellipses, diameter-constrained variants and metric fields;
//! * [`mesh`] — conforming triangulations: uniform baselines, the macro-patch
//!   tiling construction, conformity and equidistribution diagnostics;
//! * [`study`] — function corpus, convergence studies, CSV and SVG reporting.

pub mod delaunay;
pub mod forms;
pub mod geom;
pub mod lagrange;
pub mod mesh;
pub mod metric;
pub mod quadrature;
pub mod shape;
pub mod study;

pub use forms::{HomogeneousForm, RootSet};
pub use geom::{LinearMap2, Point2, SymMetric2, Triangle};
pub use lagrange::{Polynomial2, ScalarField};
pub use mesh::{Mesh, Polygon};
pub use metric::{MetricField, RegimeThresholds};
pub use shape::{ShapeQuery, ShapeResult};
pub use study::{CorpusFunction, StudyRow};
