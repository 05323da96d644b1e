//! Multi-scale analysis of spatially embedded contact networks.
//!
//! The crate is organised around one immutable data model, [`graph::SpatialGraph`],
//! and the stages that consume it:
//!
//! - [`synthgen`] builds household/workplace contact networks with planar locations.
//! - [`nullmodels`] derives the two reference networks: a location shuffle that keeps
//!   topology, and a bin-preserving edge rewiring that keeps locations, degrees and the
//!   binned edge-length distribution.
//! - [`partition`] lays regular grids or polygon partitions over the study area and
//!   divides a network into independent unit networks plus the edges that were cut.
//! - [`metrics`] computes component, clustering, path-length and edge-distance
//!   statistics for each unit network and aggregates them per scale.
//! - [`pipeline`] runs the whole study, writes CSV/JSON outputs and renders SVG charts.

pub mod error;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod nullmodels;
pub mod partition;
pub mod pipeline;
pub mod rng;
pub mod synthgen;
mod union_find;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{Point, Rect};
pub use graph::{ComponentLabeling, Edge, EdgeKind, NodeId, NodeRecord, SpatialGraph};
