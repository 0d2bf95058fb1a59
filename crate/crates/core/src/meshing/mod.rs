//! Surface extraction by Delaunay graph cut.
//!
//! The kept points are tetrahedralized, every accepted (point, view) pair
//! casts a ray from the point to the camera through the tetrahedra, and the
//! crossed facets become capacities of a flow network on the dual graph. A
//! minimum s–t cut labels each tet inside or outside; the surface is the
//! interface between the two labels, after relabelling any tets needed to
//! remove edges where that interface pinches.

mod delaunay;
mod graph;
mod maxflow;
#[cfg(test)]
mod oracle;
pub mod predicates;
mod surface;

use thiserror::Error;

pub use delaunay::{circumcenter, tetrahedralize, TetMesh, FACETS};
pub use graph::{
    accumulate_ray_costs, facet_geometric_cost, geometric_costs, visibility_capacity, DualFacet,
    DualGraph, FacetRef, HullFacet,
};
pub use maxflow::FlowNetwork;
pub use surface::{
    extract_surface, inside_components, median_edge_length, postfilter_edges,
    repair_singular_edges, solve_labels, solve_mincut, LabeledTetMesh,
};

#[derive(Debug, Error, PartialEq)]
pub enum MeshingError {
    #[error("insufficient points: {0} distinct, need at least 4")]
    TooFewPoints(usize),
    #[error("all points are coplanar")]
    Coplanar,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("ray from point {point} toward view {view_id} found no containing cell")]
    RayStart { point: usize, view_id: u32 },
    #[error("visibility record names unknown point {0}")]
    UnknownPoint(usize),
    #[error("visibility record names unknown view {0}")]
    UnknownView(u32),
}
