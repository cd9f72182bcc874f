//! Topology of the IRSBot-2: two identical hybrid limbs, each with a
//! parallelogram loop in series with a spatial loop closed at the platform.

use crate::error::Result;
use crate::topology::{Edge, MechanismGraph};

/// Cut edges of limb `l` (0 or 1) in [`irsbot2_graph`].
pub fn irsbot2_cut_edges(l: usize) -> [usize; 2] {
    [7 + 8 * l, 8 + 8 * l]
}

/// Mechanism graph with ground 0 and platform 11. Limb 1 uses vertices 1..5 and
/// edges 1..8; limb 2 repeats the pattern with vertices 6..10 and edges 9..16.
/// Revolute edges carry one DOF, universal joints two.
pub fn irsbot2_graph() -> Result<MechanismGraph> {
    let p = 11;
    let mut edges = Vec::new();
    for l in 0..2 {
        let v = |k: usize| if k == 0 { 0 } else if k == p { p } else { k + 5 * l };
        let e = |id: usize, a: usize, b: usize, dof: usize| Edge::new(id + 8 * l, v(a), v(b), dof);
        edges.extend([
            e(1, 0, 1, 1),
            e(2, 1, 2, 1),
            e(3, 0, 3, 1),
            e(4, 2, 4, 2),
            e(5, 2, 5, 2),
            e(6, 4, p, 2),
            e(7, 2, 3, 1),
            e(8, p, 5, 2),
        ]);
    }
    MechanismGraph::new((0..=p).collect(), edges, p)
}
