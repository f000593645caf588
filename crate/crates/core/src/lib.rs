//! Core library for motif diagrams of doubly periodic pseudo tangles on the
//! torus: the diagram data model, Reidemeister-type move schemas, lattice
//! covers and quotients, resolution-set invariants, bounded equivalence
//! search, and the canonical motif file format.

pub mod diagram;
pub mod invariants;
pub mod io;
pub mod lattice;
pub mod moves;
pub mod poly;
pub mod search;

pub use diagram::{
    Component, Decoration, DiagramError, Edge, Face, Level, MotifDiagram, ShiftVector,
    ValidationReport, VertexId,
};
