//! Macro-patch construction of near-optimal adapted meshes: each macro cell
//! is tiled by translates and point reflections of the locally optimal
//! triangle, and the layer along macro boundaries is re-triangulated by
//! Delaunay to restore conformity.

use crate::forms::HomogeneousForm;
use crate::geom::{Point2, Triangle};
use crate::lagrange::{Lp, ScalarField};
use crate::mesh::{Mesh, MeshError, Polygon};

/// Per-macro tiling data.
#[derive(Debug, Clone)]
pub struct PatchItem {
    pub macro_index: usize,
    /// Frozen derivative form at the macro barycenter (plain coefficients).
    pub form: HomogeneousForm,
    /// Tempered shape value after flooring.
    pub k_value: f64,
    /// Scaled optimal tile.
    pub tile: Triangle,
    /// Lattice vectors spanning the tiling parallelogram.
    pub lattice: (Point2, Point2),
    /// Point-reflected companion tile (`T' = c - T`).
    pub companion: Triangle,
}

/// Tiling plan over a macro mesh.
#[derive(Debug, Clone)]
pub struct PatchPlan {
    pub items: Vec<PatchItem>,
}

/// Assembly statistics of [`adapt_mesh_with_stats`].
#[derive(Debug, Clone)]
pub struct AdaptStats {
    pub interior_count: usize,
    pub boundary_count: usize,
    pub macro_radius: f64,
    pub scale: f64,
    pub merged_constant_field: bool,
}

pub fn build_patch_plan(
    _f: &dyn ScalarField,
    _macro_mesh: &Mesh,
    _m: usize,
    _p: Lp,
    _cap: f64,
    _s: f64,
) -> Result<PatchPlan, MeshError> {
    unimplemented!()
}

pub fn adapt_mesh(
    f: &dyn ScalarField,
    omega: &Polygon,
    m: usize,
    p: Lp,
    target: usize,
    cap: f64,
) -> Result<Mesh, MeshError> {
    adapt_mesh_with_stats(f, omega, m, p, target, cap).map(|(mesh, _)| mesh)
}

pub fn adapt_mesh_with_stats(
    _f: &dyn ScalarField,
    _omega: &Polygon,
    _m: usize,
    _p: Lp,
    _target: usize,
    _cap: f64,
) -> Result<(Mesh, AdaptStats), MeshError> {
    unimplemented!()
}
