//! Enumeration of molecular graphs for a formula as tree representations.
//!
//! The search guesses the main-chain length first, then grows a
//! DFS-numbered spanning tree vertex by vertex. Each vertex fixes its
//! element, incoming bond, exact subtree depth and a multiset of cycle
//! markers `(bond order, partner element)`. Siblings must appear in
//! non-increasing subtree order, so acyclic graphs come out exactly once.
//! Completed trees have their markers paired into cycle edges, and
//! representations that are not maximal refinements are dropped.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::canon::{canonical_representation, is_maximal_refinement, tree_diameter, TreeRepresentation};
use crate::chem::{check_feasible, ElementTable, MolecularFormula, MolecularGraph, MAX_BOND_ORDER};
use crate::error::{Error, Result};
use crate::oracle::{are_isomorphic, longest_simple_path};

/// Smallest number of vertices a longest simple path can have in a
/// connected graph with `n` vertices of degree at most `x`.
pub fn min_main_chain_len(n: usize, x: u32) -> usize {
    assert!(n >= 1, "a graph has at least one vertex");
    if x <= 2 {
        return n;
    }
    let (n, x) = (n as u128, x as u128);
    // smallest e with base^e >= target
    let ceil_log = |base: u128, target: u128| {
        let (mut e, mut p) = (0usize, 1u128);
        while p < target {
            p *= base;
            e += 1;
        }
        e
    };
    // x (x-1)^e >= (x-2)(n-1) + x  <=>  (x-1)^e >= ((x-2)(n-1) + x) / x
    let odd = {
        let target = ((x - 2) * (n - 1) + x).div_ceil(x);
        2 * ceil_log(x - 1, target) + 1
    };
    // 2 (x-1)^e >= (x-2) n + 2
    let even = {
        let target = ((x - 2) * n + 2).div_ceil(2);
        2 * ceil_log(x - 1, target)
    };
    odd.min(even).min(n as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupMode {
    #[default]
    Exact,
    Off,
}

#[derive(Debug, Clone, Default)]
pub struct SearchBudget {
    pub max_models: Option<u64>,
    pub wall_time_limit: Option<Duration>,
    pub dedup_mode: DedupMode,
}

#[derive(Debug, Clone, Default)]
pub struct Constraints {
    /// Every output must contain each fragment (see [`matches_fragment`]).
    pub fragments: Vec<MolecularGraph>,
    /// Bond orders, from `{2, 3}`, that may not occur.
    pub forbidden_bond_orders: BTreeSet<u8>,
}

/// Completed-representation checks; both are safe and on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pruning {
    pub shortening: bool,
    pub maximal_refinement: bool,
}

impl Default for Pruning {
    fn default() -> Self {
        Self {
            shortening: true,
            maximal_refinement: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopReason {
    #[default]
    Completed,
    MaxModels,
    TimeLimit,
    Cancelled,
    /// A required structure was found.
    Found,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnumerationStats {
    /// Search nodes visited.
    pub nodes: u64,
    /// Representations that passed every check, before dedup.
    pub raw: u64,
    /// Complete representations rejected by the shortening or
    /// maximal-refinement check.
    pub pruned: u64,
    pub emitted: u64,
    /// Outputs forwarded without a canonical key after the
    /// canonicalization budget ran out.
    pub unkeyed: u64,
    pub stop: StopReason,
}

impl EnumerationStats {
    /// True when the search stopped before exhausting the space.
    pub fn is_partial(&self) -> bool {
        matches!(
            self.stop,
            StopReason::MaxModels | StopReason::TimeLimit | StopReason::Cancelled
        )
    }
}

/// True iff some injective label-preserving map sends every fragment bond
/// to a graph bond of at least the same order.
pub fn matches_fragment(graph: &MolecularGraph, fragment: &MolecularGraph) -> bool {
    let k = fragment.vertex_count();
    if k == 0 {
        return true;
    }
    if k > graph.vertex_count() {
        return false;
    }
    // map fragment vertices in BFS order so each has a mapped neighbour
    let fadj = fragment.adjacency();
    let mut order = vec![0];
    let mut seen = vec![false; k];
    seen[0] = true;
    let mut i = 0;
    while i < order.len() {
        for &(w, _) in &fadj[order[i]] {
            if !seen[w] {
                seen[w] = true;
                order.push(w);
            }
        }
        i += 1;
    }
    order.extend((0..k).filter(|&v| !seen[v]));
    let mut map = vec![usize::MAX; k];
    let mut used = vec![false; graph.vertex_count()];
    map_fragment(0, &order, graph, fragment, &fadj, &mut map, &mut used)
}

fn map_fragment(
    i: usize,
    order: &[usize],
    graph: &MolecularGraph,
    fragment: &MolecularGraph,
    fadj: &[Vec<(usize, u8)>],
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&v) = order.get(i) else {
        return true;
    };
    for w in 0..graph.vertex_count() {
        if used[w] || graph.label(w) != fragment.label(v) {
            continue;
        }
        let fits = fadj[v].iter().all(|&(u, b)| {
            map[u] == usize::MAX || graph.bond_order(map[u], w).is_some_and(|o| o >= b)
        });
        if fits {
            map[v] = w;
            used[w] = true;
            if map_fragment(i + 1, order, graph, fragment, fadj, map, used) {
                return true;
            }
            used[w] = false;
            map[v] = usize::MAX;
        }
    }
    false
}

/// True iff the candidate's graph is isomorphic to `required`.
pub fn matches_required_structure(candidate: &TreeRepresentation, required: &MolecularGraph) -> bool {
    are_isomorphic(candidate.graph(), required)
}

/// Outcome of keying one representation for dedup.
pub struct Deduped {
    pub rep: TreeRepresentation,
    /// `false` when the canonicalization budget ran out; the input is
    /// forwarded as is.
    pub keyed: bool,
}

/// One canonical representative per isomorphism class, in ascending key
/// order, followed by any representations that could not be keyed.
pub fn dedup_exact(
    reps: impl IntoIterator<Item = TreeRepresentation>,
    table: &ElementTable,
) -> Result<Vec<Deduped>> {
    let mut keyed = std::collections::BTreeMap::new();
    let mut unkeyed = Vec::new();
    for rep in reps {
        match canonical_representation(rep.graph(), table) {
            Ok(canon) => {
                keyed.entry(canon.key()).or_insert(canon);
            }
            Err(Error::CanonBudgetExceeded(_)) => unkeyed.push(rep),
            Err(e) => return Err(e),
        }
    }
    Ok(keyed
        .into_values()
        .map(|rep| Deduped { rep, keyed: true })
        .chain(unkeyed.into_iter().map(|rep| Deduped { rep, keyed: false }))
        .collect())
}

/// Configured enumeration of one formula.
#[derive(Debug, Clone)]
pub struct Enumerator {
    formula: MolecularFormula,
    table: ElementTable,
    constraints: Constraints,
    budget: SearchBudget,
    pruning: Pruning,
    required: Option<MolecularGraph>,
    cancel: Option<Arc<AtomicBool>>,
}

impl Enumerator {
    pub fn new(formula: MolecularFormula, table: ElementTable) -> Self {
        Self {
            formula,
            table,
            constraints: Constraints::default(),
            budget: SearchBudget::default(),
            pruning: Pruning::default(),
            required: None,
            cancel: None,
        }
    }

    pub fn constraints(mut self, constraints: Constraints) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn budget(mut self, budget: SearchBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn pruning(mut self, pruning: Pruning) -> Self {
        self.pruning = pruning;
        self
    }

    /// Searches only for graphs isomorphic to `graph`, stopping at the first.
    pub fn require(mut self, graph: MolecularGraph) -> Self {
        self.required = Some(graph);
        self
    }

    /// The search stops soon after `flag` becomes true.
    pub fn cancel_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    /// Runs the search, handing each output to `sink`; returning
    /// `ControlFlow::Break` from the sink stops early.
    pub fn run(
        &self,
        mut sink: impl FnMut(TreeRepresentation) -> ControlFlow<()>,
    ) -> Result<EnumerationStats> {
        if self.budget.max_models == Some(0) {
            return Err(Error::InvalidInput("max_models must be at least 1".into()));
        }
        if self.budget.wall_time_limit == Some(Duration::ZERO) {
            return Err(Error::InvalidInput("wall time limit must be positive".into()));
        }
        if let Some(&b) = self
            .constraints
            .forbidden_bond_orders
            .iter()
            .find(|&&b| !(2..=MAX_BOND_ORDER).contains(&b))
        {
            return Err(Error::InvalidInput(format!(
                "only bond orders 2 and 3 can be forbidden, got {b}"
            )));
        }
        for f in &self.constraints.fragments {
            if !f.is_connected() {
                return Err(Error::InvalidInput("fragments must be connected".into()));
            }
            for l in f.labels() {
                self.table.lookup(l)?;
            }
        }
        let u = check_feasible(&self.formula, &self.table)?;
        let mut search = Search::new(self, u, &mut sink)?;
        search.run_all();
        Ok(search.stats)
    }

    /// Collects every output.
    pub fn collect(&self) -> Result<(Vec<TreeRepresentation>, EnumerationStats)> {
        let mut out = Vec::new();
        let stats = self.run(|rep| {
            out.push(rep);
            ControlFlow::Continue(())
        })?;
        Ok((out, stats))
    }
}

/// Enumerates `formula` under `constraints` and `budget`.
pub fn enumerate(
    formula: &MolecularFormula,
    constraints: &Constraints,
    budget: &SearchBudget,
    table: &ElementTable,
) -> Result<(Vec<TreeRepresentation>, EnumerationStats)> {
    Enumerator::new(formula.clone(), table.clone())
        .constraints(constraints.clone())
        .budget(budget.clone())
        .collect()
}

type Flow = ControlFlow<()>;

/// Element-independent description of a cycle marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Marker {
    bond: u8,
    partner: usize,
}

/// Subtree key with cycle markers, compared like the subtree order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct DecoNode {
    depth: u32,
    size: u32,
    child_count: usize,
    rank: usize,
    in_bond: u8,
    markers: Vec<Marker>,
    children: Vec<DecoNode>,
}

struct Search<'a, F> {
    cfg: &'a Enumerator,
    sink: &'a mut F,
    labels: Vec<String>,
    valence: Vec<u8>,
    bonds: Vec<u8>,
    marker_kinds: Vec<Marker>,
    n: usize,
    l: usize,
    d1: u32,
    d2: u32,
    totals: Vec<u32>,
    /// Markers placed, indexed by `(bond, own element, partner element)`.
    marker_tally: Vec<i32>,
    remaining: Vec<u32>,
    half_left: u32,
    // per vertex, in creation order
    rank: Vec<usize>,
    parent: Vec<usize>,
    in_bond: Vec<u8>,
    depth: Vec<u32>,
    size: Vec<u32>,
    markers: Vec<Vec<Marker>>,
    children: Vec<Vec<usize>>,
    used: Vec<u8>,
    stack: Vec<usize>,
    required: Option<Required>,
    seen: HashSet<String>,
    deadline: Option<Instant>,
    stats: EnumerationStats,
}

struct Required {
    graph: MolecularGraph,
    chain: usize,
    /// Remaining `(rank, sorted incident bond orders)` vertex types.
    types: HashMap<(usize, Vec<u8>), u32>,
}

impl<'a, F: FnMut(TreeRepresentation) -> Flow> Search<'a, F> {
    fn new(cfg: &'a Enumerator, u: u32, sink: &'a mut F) -> Result<Self> {
        let table = &cfg.table;
        let mut kinds: Vec<(usize, u32)> = Vec::new();
        for (sym, count) in cfg.formula.heavy_atoms() {
            kinds.push((table.rank(sym)?, count));
        }
        kinds.sort_unstable();
        let labels: Vec<String> = kinds.iter().map(|&(r, _)| table.by_rank(r).symbol.clone()).collect();
        let valence: Vec<u8> = kinds.iter().map(|&(r, _)| table.by_rank(r).valence).collect();
        let remaining: Vec<u32> = kinds.iter().map(|&(_, c)| c).collect();
        let n = cfg.formula.heavy_atom_count();
        let tally_len = 4 * labels.len() * labels.len();
        let bonds: Vec<u8> = (1..=MAX_BOND_ORDER)
            .filter(|b| !cfg.constraints.forbidden_bond_orders.contains(b))
            .collect();
        let mut marker_kinds = Vec::new();
        if n >= 3 {
            for &bond in &bonds {
                for partner in 0..labels.len() {
                    if valence[partner] > bond {
                        marker_kinds.push(Marker { bond, partner });
                    }
                }
            }
        }
        let required = match &cfg.required {
            None => None,
            Some(g) => {
                let mut types = HashMap::new();
                let adj = g.adjacency();
                for v in 0..g.vertex_count() {
                    let Some(rank) = labels.iter().position(|l| l == g.label(v)) else {
                        return Err(Error::InvalidInput(format!(
                            "required structure uses `{}`, which is not in the formula",
                            g.label(v)
                        )));
                    };
                    let mut orders: Vec<u8> = adj[v].iter().map(|&(_, b)| b).collect();
                    orders.sort_unstable();
                    *types.entry((rank, orders)).or_insert(0) += 1;
                }
                Some(Required {
                    graph: g.clone(),
                    chain: longest_simple_path(g),
                    types,
                })
            }
        };
        Ok(Self {
            cfg,
            sink,
            labels,
            valence,
            bonds,
            marker_kinds,
            n,
            l: 0,
            d1: 0,
            d2: 0,
            totals: remaining.clone(),
            marker_tally: vec![0; tally_len],
            remaining,
            half_left: 2 * u,
            rank: Vec::with_capacity(n),
            parent: Vec::with_capacity(n),
            in_bond: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            size: Vec::with_capacity(n),
            markers: Vec::with_capacity(n),
            children: Vec::with_capacity(n),
            used: Vec::with_capacity(n),
            stack: Vec::with_capacity(n),
            required,
            seen: HashSet::new(),
            deadline: cfg.budget.wall_time_limit.map(|d| Instant::now() + d),
            stats: EnumerationStats::default(),
        })
    }

    fn run_all(&mut self) {
        let x = self.valence.iter().copied().max().unwrap_or(0);
        let lo = min_main_chain_len(self.n, u32::from(x));
        let lengths: Vec<usize> = match &self.required {
            Some(r) if r.graph.vertex_count() == self.n => vec![r.chain],
            Some(_) => Vec::new(),
            None => (lo..=self.n).collect(),
        };
        for l in lengths {
            self.l = l;
            self.d1 = (l as u32) / 2;
            self.d2 = (l as u32 - 1) / 2;
            if self.place_root().is_break() {
                return;
            }
        }
    }

    fn tick(&mut self) -> Flow {
        self.stats.nodes += 1;
        if self.stats.nodes.is_multiple_of(1024) {
            if self.cfg.cancel.as_ref().is_some_and(|c| c.load(AtomicOrdering::Relaxed)) {
                self.stats.stop = StopReason::Cancelled;
                return ControlFlow::Break(());
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                self.stats.stop = StopReason::TimeLimit;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }

    fn place_root(&mut self) -> Flow {
        let depth = if self.l == 1 { 1 } else { self.d1 + 1 };
        let needs = match self.l {
            1 => 0,
            2 => 1,
            _ => 2,
        };
        for e in 0..self.labels.len() {
            if self.valence[e] < needs {
                continue;
            }
            let cap = self.valence[e] - needs;
            self.push_vertex(None, e, 0, depth);
            let flow = self.choose_markers(0, cap, 0);
            self.pop_vertex();
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn push_vertex(&mut self, parent: Option<usize>, e: usize, bond: u8, depth: u32) {
        let v = self.rank.len();
        self.rank.push(e);
        self.parent.push(parent.unwrap_or(usize::MAX));
        self.in_bond.push(bond);
        self.depth.push(depth);
        self.size.push(1);
        self.markers.push(Vec::new());
        self.children.push(Vec::new());
        self.used.push(bond);
        self.remaining[e] -= 1;
        self.half_left -= 2 * u32::from(bond.saturating_sub(1));
        if let Some(p) = parent {
            self.children[p].push(v);
            self.used[p] += bond;
        }
        self.stack.push(v);
    }

    fn pop_vertex(&mut self) {
        let v = self.stack.pop().unwrap();
        debug_assert_eq!(v + 1, self.rank.len());
        let e = self.rank.pop().unwrap();
        let p = self.parent.pop().unwrap();
        let bond = self.in_bond.pop().unwrap();
        self.depth.pop();
        self.size.pop();
        self.markers.pop();
        self.children.pop();
        self.used.pop();
        self.remaining[e] += 1;
        self.half_left += 2 * u32::from(bond.saturating_sub(1));
        if p != usize::MAX {
            self.children[p].pop();
            self.used[p] -= bond;
        }
    }

    /// Vertices that must still be created for the open depth obligations.
    fn pending(&self) -> usize {
        let mut need = 0;
        if let Some(&v) = self.stack.last() {
            if self.children[v].is_empty() {
                need += self.depth[v] as usize - 1;
            }
        }
        if self.l >= 3 && self.children.first().is_some_and(|c| c.len() < 2) {
            need += self.d2 as usize;
        }
        need
    }

    /// Adds markers to vertex `v` in non-decreasing kind order, continuing
    /// the search after each choice.
    fn choose_markers(&mut self, v: usize, cap: u8, from: usize) -> Flow {
        self.grow()?;
        for k in from..self.marker_kinds.len() {
            let m = self.marker_kinds[k];
            if m.bond > cap || u32::from(m.bond) > self.half_left || self.valence[self.rank[v]] <= m.bond {
                continue;
            }
            if m.partner == self.rank[v] && self.totals[m.partner] < 2 {
                continue;
            }
            let slot = self.tally_slot(m.bond, self.rank[v], m.partner);
            self.marker_tally[slot] += 1;
            self.markers[v].push(m);
            self.used[v] += m.bond;
            self.half_left -= u32::from(m.bond);
            let flow = self.choose_markers(v, cap - m.bond, k);
            self.half_left += u32::from(m.bond);
            self.used[v] -= m.bond;
            self.markers[v].pop();
            self.marker_tally[slot] -= 1;
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn tally_slot(&self, bond: u8, own: usize, partner: usize) -> usize {
        let k = self.labels.len();
        (usize::from(bond) * k + own) * k + partner
    }

    /// Whether atoms not yet placed can carry every marker still waiting
    /// for its mirror.
    fn markers_satisfiable(&self) -> bool {
        let k = self.labels.len();
        for r in 0..k {
            let mut demand = 0i32;
            for &bond in &self.bonds {
                for a in 0..k {
                    let waiting = self.marker_tally[self.tally_slot(bond, a, r)];
                    if a == r {
                        demand += (waiting % 2) * i32::from(bond);
                    } else {
                        let mirrored = self.marker_tally[self.tally_slot(bond, r, a)];
                        demand += (waiting - mirrored).max(0) * i32::from(bond);
                    }
                }
            }
            let room = self.remaining[r] as i32 * (i32::from(self.valence[r]) - 1);
            if demand > room {
                return false;
            }
        }
        true
    }

    /// Whether the free valence still reachable can absorb the
    /// unsaturation not yet spent: each half-unit uses at least one bond end.
    fn unsaturation_reachable(&self) -> bool {
        let future = (self.n - self.rank.len()) as i64;
        let mut room = -2 * future;
        for &v in &self.stack {
            if self.depth[v] > 1 {
                room += i64::from(self.valence[self.rank[v]] - self.used[v]);
            }
        }
        for (e, &r) in self.remaining.iter().enumerate() {
            room += i64::from(r) * i64::from(self.valence[e]);
        }
        i64::from(self.half_left) <= room
    }

    fn grow(&mut self) -> Flow {
        self.tick()?;
        if self.rank.len() + self.pending() > self.n
            || !self.markers_satisfiable()
            || !self.unsaturation_reachable()
        {
            return ControlFlow::Continue(());
        }
        let Some(&v) = self.stack.last() else {
            if self.rank.len() == self.n {
                return self.complete();
            }
            return ControlFlow::Continue(());
        };
        let kids = self.children[v].len();
        if self.depth[v] > 1 && kids == 0 {
            let d = self.depth[v] - 1;
            return self.add_child(v, d, d);
        }
        if v == 0 && self.l >= 3 && kids == 1 {
            return self.add_child(v, self.d2, self.d2);
        }
        if self.rank.len() < self.n && self.depth[v] > 1 {
            let last = *self.children[v].last().unwrap();
            self.add_child(v, 1, self.depth[last])?;
        }
        self.close(v)
    }

    fn add_child(&mut self, p: usize, dmin: u32, dmax: u32) -> Flow {
        for depth in (dmin..=dmax).rev() {
            for e in 0..self.labels.len() {
                if self.remaining[e] == 0 {
                    continue;
                }
                for bi in 0..self.bonds.len() {
                    let b = self.bonds[bi];
                    let needs = u8::from(depth > 1);
                    if b + self.used[p] > self.valence[self.rank[p]]
                        || b + needs > self.valence[e]
                        || 2 * u32::from(b - 1) > self.half_left
                    {
                        continue;
                    }
                    let cap = self.valence[e] - b - needs;
                    self.push_vertex(Some(p), e, b, depth);
                    let flow = if self.rank.len() + self.pending() > self.n {
                        ControlFlow::Continue(())
                    } else {
                        let v = self.rank.len() - 1;
                        self.choose_markers(v, cap, 0)
                    };
                    self.pop_vertex();
                    flow?;
                }
            }
        }
        ControlFlow::Continue(())
    }

    fn close(&mut self, v: usize) -> Flow {
        let size = 1 + self.children[v].iter().map(|&c| self.size[c]).sum::<u32>();
        self.size[v] = size;
        let p = self.parent[v];
        if p != usize::MAX {
            let sibs = &self.children[p];
            let at = sibs.iter().position(|&c| c == v).unwrap();
            if at > 0 && self.cmp_deco(v, sibs[at - 1]) == Ordering::Greater {
                return ControlFlow::Continue(());
            }
        }
        let mut taken = None;
        if let Some(req) = &mut self.required {
            let mut orders: Vec<u8> = self.children[v].iter().map(|&c| self.in_bond[c]).collect();
            if p != usize::MAX {
                orders.push(self.in_bond[v]);
            }
            orders.extend(self.markers[v].iter().map(|m| m.bond));
            orders.sort_unstable();
            let key = (self.rank[v], orders);
            match req.types.get_mut(&key) {
                Some(c) if *c > 0 => *c -= 1,
                _ => return ControlFlow::Continue(()),
            }
            taken = Some(key);
        }
        self.stack.pop();
        let flow = self.grow();
        self.stack.push(v);
        if let (Some(key), Some(req)) = (taken, &mut self.required) {
            *req.types.get_mut(&key).unwrap() += 1;
        }
        flow
    }

    fn cmp_deco(&self, u: usize, w: usize) -> Ordering {
        let key = |x: usize| {
            (
                self.depth[x],
                self.size[x],
                self.children[x].len(),
                self.rank[x],
                self.in_bond[x],
            )
        };
        key(u)
            .cmp(&key(w))
            .then_with(|| self.markers[u].cmp(&self.markers[w]))
            .then_with(|| {
                for (&a, &b) in self.children[u].iter().zip(&self.children[w]) {
                    let ord = self.cmp_deco(a, b);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            })
    }

    fn deco_sorted(&self, v: usize, from: usize, in_bond: u8) -> DecoNode {
        let mut children: Vec<DecoNode> = Vec::new();
        let p = self.parent[v];
        if p != usize::MAX && p != from {
            children.push(self.deco_sorted(p, v, self.in_bond[v]));
        }
        for &c in &self.children[v] {
            if c != from {
                children.push(self.deco_sorted(c, v, self.in_bond[c]));
            }
        }
        children.sort_by(|a, b| b.cmp(a));
        DecoNode {
            depth: 1 + children.iter().map(|c| c.depth).max().unwrap_or(0),
            size: 1 + children.iter().map(|c| c.size).sum::<u32>(),
            child_count: children.len(),
            rank: self.rank[v],
            in_bond,
            markers: self.markers[v].clone(),
            children,
        }
    }

    fn complete(&mut self) -> Flow {
        if self.half_left != 0 {
            return ControlFlow::Continue(());
        }
        // every marker needs a mirrored marker on a partner vertex
        let mut balance: HashMap<(u8, usize, usize), i64> = HashMap::new();
        for v in 0..self.n {
            for m in &self.markers[v] {
                let (a, b) = (self.rank[v], m.partner);
                if a <= b {
                    *balance.entry((m.bond, a, b)).or_default() += 1;
                }
                if a >= b {
                    *balance.entry((m.bond, b, a)).or_default() -= 1;
                }
            }
        }
        if balance.values().any(|&c| c != 0) {
            return ControlFlow::Continue(());
        }
        if self.l >= 2 && self.l.is_multiple_of(2) {
            let here = self.deco_sorted(0, usize::MAX, 0);
            let there = self.deco_sorted(1, usize::MAX, 0);
            if here < there {
                return ControlFlow::Continue(());
            }
        }
        let slots: Vec<(usize, Marker)> = (0..self.n)
            .flat_map(|v| self.markers[v].iter().map(move |&m| (v, m)))
            .collect();
        let mut matchings = Vec::new();
        let mut partner = vec![usize::MAX; slots.len()];
        let mut edges = Vec::new();
        self.pair_slots(&slots, &mut partner, &mut edges, &mut matchings);
        debug_assert_eq!(
            matchings.iter().collect::<BTreeSet<_>>().len(),
            matchings.len(),
            "pairings are produced once"
        );
        for cycles in matchings {
            self.finish(&cycles)?;
        }
        ControlFlow::Continue(())
    }

    /// Pairs marker slots into cycle edges. Slots are grouped by vertex and
    /// marker; among identical slots only the first free one is offered as
    /// a partner, and identical slots on one vertex take partners in
    /// increasing order, so every edge set is produced once.
    fn pair_slots(
        &self,
        slots: &[(usize, Marker)],
        partner: &mut [usize],
        edges: &mut Vec<(usize, usize, u8)>,
        out: &mut Vec<Vec<(usize, usize, u8)>>,
    ) {
        let Some(i) = partner.iter().position(|&p| p == usize::MAX) else {
            let mut e = edges.clone();
            e.sort_unstable();
            out.push(e);
            return;
        };
        let (v, m) = slots[i];
        let floor = match i.checked_sub(1) {
            Some(h) if slots[h] == slots[i] => slots[partner[h]].0 + 1,
            _ => 0,
        };
        for j in i + 1..slots.len() {
            let (w, n) = slots[j];
            if partner[j] != usize::MAX
                || w < floor
                || w == v
                || n.bond != m.bond
                || self.rank[w] != m.partner
                || n.partner != self.rank[v]
                || (slots[j - 1] == slots[j] && j - 1 != i && partner[j - 1] == usize::MAX)
                || self.parent[w] == v
                || self.parent[v] == w
                || edges.iter().any(|&(a, b, _)| (a, b) == (v.min(w), v.max(w)))
            {
                continue;
            }
            partner[i] = j;
            partner[j] = i;
            edges.push((v.min(w), v.max(w), m.bond));
            self.pair_slots(slots, partner, edges, out);
            edges.pop();
            partner[j] = usize::MAX;
            partner[i] = usize::MAX;
        }
    }

    /// Whether exchanging some cycle edge for a tree edge on its tree path
    /// gives a spanning tree with a longer main chain.
    fn has_shortening_edge(&self, cycles: &[(usize, usize, u8)]) -> bool {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        let mut level = vec![0usize; self.n];
        for v in 1..self.n {
            let p = self.parent[v];
            adj[v].push(p);
            adj[p].push(v);
            level[v] = level[p] + 1;
        }
        for &(a, b, _) in cycles {
            let (mut x, mut y) = (a, b);
            let mut path = Vec::new();
            while x != y {
                if level[x] >= level[y] {
                    path.push((x, self.parent[x]));
                    x = self.parent[x];
                } else {
                    path.push((y, self.parent[y]));
                    y = self.parent[y];
                }
            }
            for (c, p) in path {
                adj[c].retain(|&u| u != p);
                adj[p].retain(|&u| u != c);
                adj[a].push(b);
                adj[b].push(a);
                let longer = tree_diameter(&adj) > self.l;
                adj[a].pop();
                adj[b].pop();
                adj[c].push(p);
                adj[p].push(c);
                if longer {
                    return true;
                }
            }
        }
        false
    }

    fn finish(&mut self, cycles: &[(usize, usize, u8)]) -> Flow {
        let pruning = self.cfg.pruning;
        if pruning.shortening && self.has_shortening_edge(cycles) {
            self.stats.pruned += 1;
            return ControlFlow::Continue(());
        }
        let parents: Vec<Option<(usize, u8)>> = (0..self.n)
            .map(|v| (self.parent[v] != usize::MAX).then(|| (self.parent[v], self.in_bond[v])))
            .collect();
        let labels = self.rank.iter().map(|&r| self.labels[r].clone()).collect();
        let rep = TreeRepresentation::from_parts(labels, &parents, cycles)
            .expect("search states are valid representations");
        if pruning.maximal_refinement && !is_maximal_refinement(&rep) {
            self.stats.pruned += 1;
            return ControlFlow::Continue(());
        }
        if !self
            .cfg
            .constraints
            .fragments
            .iter()
            .all(|f| matches_fragment(rep.graph(), f))
        {
            return ControlFlow::Continue(());
        }
        if let Some(req) = &self.required {
            if !matches_required_structure(&rep, &req.graph) {
                return ControlFlow::Continue(());
            }
            self.stats.raw += 1;
            self.stats.emitted += 1;
            self.stats.stop = StopReason::Found;
            let _ = (self.sink)(rep);
            return ControlFlow::Break(());
        }
        self.stats.raw += 1;
        let out = match self.cfg.budget.dedup_mode {
            DedupMode::Off => rep,
            DedupMode::Exact => match canonical_representation(rep.graph(), &self.cfg.table) {
                Ok(canon) => {
                    if !self.seen.insert(canon.key()) {
                        return ControlFlow::Continue(());
                    }
                    canon
                }
                Err(_) => {
                    self.stats.unkeyed += 1;
                    rep
                }
            },
        };
        self.stats.emitted += 1;
        if (self.sink)(out).is_break() {
            self.stats.stop = StopReason::Cancelled;
            return ControlFlow::Break(());
        }
        if self.cfg.budget.max_models.is_some_and(|m| self.stats.emitted >= m) {
            self.stats.stop = StopReason::MaxModels;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{count_classes, naive_enumerate, DEFAULT_ORACLE_CAP};

    fn t() -> ElementTable {
        ElementTable::builtin()
    }

    fn run(formula: &str, dedup: DedupMode) -> (Vec<TreeRepresentation>, EnumerationStats) {
        let f = MolecularFormula::parse(formula, &t()).unwrap();
        let budget = SearchBudget {
            dedup_mode: dedup,
            ..SearchBudget::default()
        };
        enumerate(&f, &Constraints::default(), &budget, &t()).unwrap()
    }

    #[test]
    fn chain_bound_examples() {
        assert_eq!(min_main_chain_len(1, 4), 1);
        assert_eq!(min_main_chain_len(5, 4), 3);
        assert_eq!(min_main_chain_len(10, 4), 5);
        assert_eq!(min_main_chain_len(2, 4), 2);
        assert_eq!(min_main_chain_len(8, 4), 4);
        assert_eq!(min_main_chain_len(4, 3), 3);
        assert_eq!(min_main_chain_len(6, 2), 6);
        assert_eq!(min_main_chain_len(1, 1), 1);
    }

    #[test]
    fn tiny_formulas() {
        assert_eq!(run("CH4", DedupMode::Exact).0.len(), 1);
        assert_eq!(run("H2O", DedupMode::Exact).0.len(), 1);
        assert_eq!(run("C2H6O", DedupMode::Exact).0.len(), 2);
        assert_eq!(run("C2H6O", DedupMode::Off).0.len(), 2);
        assert_eq!(run("N2", DedupMode::Exact).0.len(), 1);
        assert_eq!(run("C3H6", DedupMode::Exact).0.len(), 2);
    }

    #[test]
    fn infeasible_formulas_error() {
        let f = MolecularFormula::parse("C2", &t()).unwrap();
        let err = enumerate(&f, &Constraints::default(), &SearchBudget::default(), &t());
        assert!(matches!(err, Err(Error::InfeasibleFormula(_))));
    }

    #[test]
    fn matches_oracle_on_small_cyclic_formulas() {
        for formula in ["C4H8", "C3H4", "C4H6", "C3H4O", "C4H4"] {
            let f = MolecularFormula::parse(formula, &t()).unwrap();
            let oracle = count_classes(&naive_enumerate(&f, &t(), DEFAULT_ORACLE_CAP).unwrap());
            let (reps, _) = run(formula, DedupMode::Exact);
            assert_eq!(reps.len(), oracle, "{formula}");
            for r in &reps {
                assert!(crate::chem::validate(r.graph(), &f, &t()).unwrap().is_valid());
            }
        }
    }

    #[test]
    fn fragment_matching() {
        let ethanol = MolecularGraph::new(["C", "C", "O"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        let ether = MolecularGraph::new(["C", "O", "C"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        let acetone =
            MolecularGraph::new(["C", "C", "O", "C"], [(0, 1, 1), (1, 2, 2), (1, 3, 1)]).unwrap();
        let co = MolecularGraph::new(["C", "O"], [(0, 1, 1)]).unwrap();
        let cc = MolecularGraph::new(["C", "C"], [(0, 1, 1)]).unwrap();
        let c_eq_o = MolecularGraph::new(["C", "O"], [(0, 1, 2)]).unwrap();
        assert!(matches_fragment(&ethanol, &co));
        assert!(!matches_fragment(&ether, &cc));
        assert!(matches_fragment(&acetone, &c_eq_o));
        assert!(!matches_fragment(&ethanol, &c_eq_o));
    }

    #[test]
    fn budget_limits() {
        let f = MolecularFormula::parse("C6H14", &t()).unwrap();
        let budget = SearchBudget {
            max_models: Some(2),
            ..SearchBudget::default()
        };
        let (reps, stats) = enumerate(&f, &Constraints::default(), &budget, &t()).unwrap();
        assert_eq!(reps.len(), 2);
        assert_eq!(stats.stop, StopReason::MaxModels);
        assert!(stats.is_partial());
        let zero = SearchBudget {
            max_models: Some(0),
            ..SearchBudget::default()
        };
        assert!(enumerate(&f, &Constraints::default(), &zero, &t()).is_err());
    }
}
