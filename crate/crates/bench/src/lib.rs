//! Shared fixtures for the criterion benchmarks.

use dpt_core::diagram::{reference_e1, torus_wedge};
use dpt_core::lattice::{cover, LatticeMatrix};
use dpt_core::{Decoration, Edge, MotifDiagram, ShiftVector};

/// The three-transversal-line arrangement: a cellular 3-crossing motif.
pub fn triangle() -> MotifDiagram {
    let e = |t: (&str, u8), h: (&str, u8), s: (i64, i64)| {
        Edge::new(
            (t.0.to_string(), t.1),
            (h.0.to_string(), h.1),
            ShiftVector::new(s.0, s.1),
        )
    };
    MotifDiagram::new(
        [
            ("A".to_string(), Decoration::OverEven),
            ("B".to_string(), Decoration::OverOdd),
            ("C".to_string(), Decoration::OverEven),
        ],
        [
            e(("B", 0), ("A", 2), (0, 0)),
            e(("A", 0), ("B", 2), (1, 0)),
            e(("A", 1), ("C", 3), (0, 0)),
            e(("C", 1), ("A", 3), (0, 1)),
            e(("B", 1), ("C", 2), (0, 0)),
            e(("C", 0), ("B", 3), (1, 1)),
        ],
        [],
        [],
    )
}

/// A 12-crossing classical motif: the 2x2 cover of the triangle arrangement.
pub fn big_classical() -> MotifDiagram {
    cover(&triangle(), &LatticeMatrix::diag(2, 2)).unwrap()
}

/// A labeled motif with two precrossing classes: E1's double cover next to a
/// wedge crossing.
pub fn labeled() -> MotifDiagram {
    cover(&reference_e1(), &LatticeMatrix::diag(2, 1)).unwrap()
}

pub fn wedge() -> MotifDiagram {
    torus_wedge(Decoration::OverEven)
}
