//! Finite metric measure graphs, the scaling function and geometric certificates.

mod doubling;
mod graph;
mod scaling;

pub use doubling::{certify_rvd, certify_vd, nested_pairs, BallFamily, BallTriple, RvdPair};
pub use graph::{
    build_space, Edge, EdgeRecord, Family, GraphFile, MetricKind, MetricMeasureGraph, SpaceSpec, VertexRecord,
    DEFAULT_VERTEX_CAP,
};
pub use scaling::{verify_psi, ScalingFunction, ScalingKind};
