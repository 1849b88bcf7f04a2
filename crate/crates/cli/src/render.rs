//! JSON views of tree representations.

use molenum::{write_smiles, ElementTable, TreeRepresentation};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomJson {
    pub index: usize,
    pub element: String,
    pub hydrogens: i64,
    /// Depth in the spanning tree; the root has depth 0.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BondJson {
    pub a: usize,
    pub b: usize,
    pub order: u8,
    /// `true` for spanning-tree edges, `false` for cycle edges.
    pub tree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphJson {
    pub smiles: String,
    pub atoms: Vec<AtomJson>,
    pub bonds: Vec<BondJson>,
}

pub fn graph_json(rep: &TreeRepresentation, table: &ElementTable) -> GraphJson {
    let g = rep.graph();
    let free = g.free_valences(table).unwrap_or_else(|_| vec![0; g.vertex_count()]);
    let mut depth = vec![0; g.vertex_count()];
    // DFS numbering puts every parent before its children
    for v in 1..g.vertex_count() {
        if let Some(p) = rep.parent(v) {
            depth[v] = depth[p] + 1;
        }
    }
    let atoms = (0..g.vertex_count())
        .map(|v| AtomJson {
            index: v,
            element: g.label(v).to_string(),
            hydrogens: free[v],
            depth: depth[v],
        })
        .collect();
    let mut bonds: Vec<BondJson> = g
        .bonds()
        .iter()
        .map(|b| BondJson {
            a: b.a.min(b.b),
            b: b.a.max(b.b),
            order: b.order,
            tree: rep.is_tree_edge(b.a, b.b),
        })
        .collect();
    bonds.sort_by_key(|b| (b.a, b.b));
    GraphJson {
        smiles: write_smiles(rep),
        atoms,
        bonds,
    }
}
