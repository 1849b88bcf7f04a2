//! Brute-force reference enumeration and isomorphism for small formulas.
//!
//! Deliberately independent of the canonical-form code: graphs are built
//! by trying every bond order on every vertex pair and deduplicated by
//! direct isomorphism tests.

use std::collections::HashMap;

use crate::chem::{
    check_feasible, ElementTable, MolecularFormula, MolecularGraph, MAX_BOND_ORDER,
};
use crate::error::{Error, Result};

/// Default largest heavy-atom count accepted by [`naive_enumerate`].
pub const DEFAULT_ORACLE_CAP: usize = 8;

/// Every valid molecular graph of `formula` with heavy atoms labelled in
/// element order, including isomorphic duplicates.
pub fn naive_enumerate(
    formula: &MolecularFormula,
    table: &ElementTable,
    cap: usize,
) -> Result<Vec<MolecularGraph>> {
    let atoms = formula.heavy_atom_count();
    if atoms > cap {
        return Err(Error::OracleCapExceeded { atoms, cap });
    }
    let u = match check_feasible(formula, table) {
        Ok(u) => u,
        Err(Error::InfeasibleFormula(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let labels = formula.sorted_atoms(table)?;
    let valence: Vec<u32> = labels
        .iter()
        .map(|l| table.valence(l).map(u32::from))
        .collect::<Result<_>>()?;
    let n = labels.len();
    // a connected graph with U rings-or-multiplicities has n-1+U bond units
    let units = n as u32 - 1 + u;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut search = Naive {
        labels: &labels,
        valence: &valence,
        pairs: &pairs,
        used: vec![0; n],
        bonds: Vec::new(),
        units_left: units,
        out: Vec::new(),
    };
    search.run(0);
    Ok(search.out)
}

struct Naive<'a> {
    labels: &'a [String],
    valence: &'a [u32],
    pairs: &'a [(usize, usize)],
    used: Vec<u32>,
    bonds: Vec<(usize, usize, u8)>,
    units_left: u32,
    out: Vec<MolecularGraph>,
}

impl Naive<'_> {
    fn run(&mut self, next: usize) {
        if self.units_left == 0 {
            let g = MolecularGraph::new(self.labels.to_vec(), self.bonds.iter().copied())
                .expect("pairs are distinct");
            if g.is_connected() {
                self.out.push(g);
            }
            return;
        }
        if next == self.pairs.len() {
            return;
        }
        let (i, j) = self.pairs[next];
        self.run(next + 1);
        for order in 1..=MAX_BOND_ORDER {
            let o = u32::from(order);
            if o > self.units_left
                || self.used[i] + o > self.valence[i]
                || self.used[j] + o > self.valence[j]
            {
                break;
            }
            self.used[i] += o;
            self.used[j] += o;
            self.units_left -= o;
            self.bonds.push((i, j, order));
            self.run(next + 1);
            self.bonds.pop();
            self.units_left += o;
            self.used[i] -= o;
            self.used[j] -= o;
        }
    }
}

/// Label, degree and sorted incident bond orders of each vertex.
fn vertex_invariants(g: &MolecularGraph) -> Vec<(String, Vec<u8>)> {
    let adj = g.adjacency();
    (0..g.vertex_count())
        .map(|v| {
            let mut orders: Vec<u8> = adj[v].iter().map(|&(_, b)| b).collect();
            orders.sort_unstable();
            (g.label(v).to_string(), orders)
        })
        .collect()
}

/// Whether a label- and bond-order-preserving bijection exists.
pub fn are_isomorphic(g: &MolecularGraph, h: &MolecularGraph) -> bool {
    if g.vertex_count() != h.vertex_count() || g.bonds().len() != h.bonds().len() {
        return false;
    }
    let gi = vertex_invariants(g);
    let hi = vertex_invariants(h);
    let mut a = gi.clone();
    let mut b = hi.clone();
    a.sort();
    b.sort();
    if a != b {
        return false;
    }
    let n = g.vertex_count();
    let mut map = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let gadj = g.adjacency();
    extend_map(0, h, &gadj, &gi, &hi, &mut map, &mut taken)
}

fn extend_map(
    v: usize,
    h: &MolecularGraph,
    gadj: &[Vec<(usize, u8)>],
    gi: &[(String, Vec<u8>)],
    hi: &[(String, Vec<u8>)],
    map: &mut [usize],
    taken: &mut [bool],
) -> bool {
    if v == map.len() {
        return true;
    }
    for w in 0..map.len() {
        if taken[w] || gi[v] != hi[w] {
            continue;
        }
        let fits = gadj[v]
            .iter()
            .filter(|&&(u, _)| u < v)
            .all(|&(u, b)| h.bond_order(map[u], w) == Some(b));
        // earlier vertices not adjacent to v must not be adjacent to w either
        let adjacent_before = gadj[v].iter().filter(|&&(u, _)| u < v).count();
        let h_before = (0..v).filter(|&u| h.bond_order(map[u], w).is_some()).count();
        if fits && adjacent_before == h_before {
            map[v] = w;
            taken[w] = true;
            if extend_map(v + 1, h, gadj, gi, hi, map, taken) {
                return true;
            }
            taken[w] = false;
        }
    }
    false
}

/// Number of pairwise non-isomorphic graphs in `graphs`.
pub fn count_classes(graphs: &[MolecularGraph]) -> usize {
    classes(graphs).len()
}

/// One representative per isomorphism class, in first-seen order.
pub fn classes(graphs: &[MolecularGraph]) -> Vec<MolecularGraph> {
    let mut buckets: HashMap<Vec<(String, Vec<u8>)>, Vec<usize>> = HashMap::new();
    let mut reps: Vec<MolecularGraph> = Vec::new();
    for g in graphs {
        let mut inv = vertex_invariants(g);
        inv.sort();
        let bucket = buckets.entry(inv).or_default();
        if !bucket.iter().any(|&r| are_isomorphic(&reps[r], g)) {
            bucket.push(reps.len());
            reps.push(g.clone());
        }
    }
    reps
}

/// Vertex count of a longest simple path.
pub fn longest_simple_path(g: &MolecularGraph) -> usize {
    let adj = g.adjacency();
    let n = g.vertex_count();
    let mut best = 0;
    let mut on = vec![false; n];
    for s in 0..n {
        dfs_longest(s, 1, &adj, &mut on, &mut best);
    }
    best
}

fn dfs_longest(v: usize, len: usize, adj: &[Vec<(usize, u8)>], on: &mut [bool], best: &mut usize) {
    *best = (*best).max(len);
    if *best == on.len() {
        return;
    }
    on[v] = true;
    for &(w, _) in &adj[v] {
        if !on[w] {
            dfs_longest(w, len + 1, adj, on, best);
        }
    }
    on[v] = false;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> ElementTable {
        ElementTable::builtin()
    }

    fn count(formula: &str) -> usize {
        let f = MolecularFormula::parse(formula, &t()).unwrap();
        count_classes(&naive_enumerate(&f, &t(), DEFAULT_ORACLE_CAP).unwrap())
    }

    #[test]
    fn small_isomer_counts() {
        assert_eq!(count("CH4"), 1);
        assert_eq!(count("C2H6O"), 2);
        assert_eq!(count("C3H8O"), 3);
        assert_eq!(count("C4H10"), 2);
        assert_eq!(count("C5H12"), 3);
        assert_eq!(count("C2H4"), 1);
        assert_eq!(count("C2H2"), 1);
        assert_eq!(count("C3H6"), 2);
        assert_eq!(count("C4H8"), 5);
        assert_eq!(count("H2O"), 1);
        assert_eq!(count("CH"), 0);
    }

    #[test]
    fn every_output_is_valid() {
        let f = MolecularFormula::parse("C3H4O", &t()).unwrap();
        for g in naive_enumerate(&f, &t(), DEFAULT_ORACLE_CAP).unwrap() {
            assert!(crate::chem::validate(&g, &f, &t()).unwrap().is_valid());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let f = MolecularFormula::parse("C9H20", &t()).unwrap();
        assert_eq!(
            naive_enumerate(&f, &t(), DEFAULT_ORACLE_CAP),
            Err(Error::OracleCapExceeded { atoms: 9, cap: 8 })
        );
    }

    #[test]
    fn isomorphism_examples() {
        let a = MolecularGraph::new(["C", "C", "O"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        let b = MolecularGraph::new(["O", "C", "C"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        let c = MolecularGraph::new(["C", "O", "C"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        assert!(are_isomorphic(&a, &b));
        assert!(!are_isomorphic(&a, &c));
        // the two bicyclic C4 skeletons with the same degree sequence
        let square = MolecularGraph::new(["C"; 4], [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)]).unwrap();
        let square2 = square.permuted(&[2, 0, 3, 1]);
        assert!(are_isomorphic(&square, &square2));
    }

    #[test]
    fn longest_paths() {
        let star = MolecularGraph::new(["C"; 4], [(0, 1, 1), (0, 2, 1), (0, 3, 1)]).unwrap();
        assert_eq!(longest_simple_path(&star), 3);
        assert_eq!(longest_simple_path(&MolecularGraph::single("C")), 1);
    }
}
