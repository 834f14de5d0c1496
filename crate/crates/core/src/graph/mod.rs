//! Directed multigraphs with vector edge costs, plus the series-parallel and
//! layered-graph machinery built on top of them.

mod layered;
mod sp;

pub use layered::{layer_transform, to_layered, LayeredEdgeKind, LayeredGraph, TourStep};
pub use sp::{
    build_series_parallel, recognize_series_parallel, SpBlock, SpDecomposition, SpKind, SpSpec,
};

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Stable identifier of an edge; parallel edges get distinct ids and all maps
/// key on the id, never on endpoint pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for EdgeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Non-negative vector cost of one edge (sign-unrestricted vectors appear
/// only in the lattice reduction; instances carrying them are flagged).
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector<T> {
    pub entries: Vec<T>,
}

impl<T: Scalar> CostVector<T> {
    pub fn new(entries: Vec<T>) -> Self {
        CostVector { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        CostVector {
            entries: vec![T::zero(); dim],
        }
    }

    /// `e_i`-style basis vector scaled by `value`.
    pub fn basis(dim: usize, coord: usize, value: T) -> Self {
        let mut entries = vec![T::zero(); dim];
        entries[coord] = value;
        CostVector { entries }
    }

    pub fn scalar(value: T) -> Self {
        CostVector {
            entries: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn add_assign(&mut self, other: &CostVector<T>) {
        debug_assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b.clone();
        }
    }

    /// `Σ_i |c_i|^p` — the p-th power of the ℓp norm, exact in `T`.
    pub fn lp_pow(&self, p: u32) -> T {
        let mut acc = T::zero();
        for c in &self.entries {
            acc += c.abs().powi(p);
        }
        acc
    }

    /// `max_i |c_i|` — the ℓ∞ norm, exact in `T`.
    pub fn linf(&self) -> T {
        let mut best = T::zero();
        for c in &self.entries {
            let a = c.abs();
            if a > best {
                best = a;
            }
        }
        best
    }

    /// ℓp norm as a float.
    pub fn lp(&self, p: u32) -> f64 {
        self.lp_pow(p).to_f64().powf(1.0 / p as f64)
    }

    /// `Σ_i |c_i|` (the scalarization used by the baseline).
    pub fn l1(&self) -> T {
        self.lp_pow(1)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> CostVector<U> {
        CostVector {
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub tail: usize,
    pub head: usize,
    pub cost: CostVector<T>,
}

/// Directed multigraph with designated terminals, optional vertex groups, and
/// flags for the special instance families. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    dim: usize,
    n: usize,
    edges: Vec<Edge<T>>,
    source: usize,
    sink: usize,
    /// Optional vertex groups `R_1..R_k`.
    pub groups: Vec<Vec<usize>>,
    /// Tour instance: source and sink may coincide.
    pub tour: bool,
    /// Costs may carry negative entries (lattice reduction output only).
    pub signed: bool,
    /// Edges stand for undirected pairs (group Steiner input).
    pub undirected: bool,
}

impl<T: Scalar> Graph<T> {
    pub fn new(n: usize, dim: usize, source: usize, sink: usize) -> Self {
        Graph {
            dim,
            n,
            edges: Vec::new(),
            source,
            sink,
            groups: Vec::new(),
            tour: false,
            signed: false,
            undirected: false,
        }
    }

    pub fn add_edge(&mut self, tail: usize, head: usize, cost: CostVector<T>) -> EdgeId {
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge { tail, head, cost });
        id
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cost_dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn edge(&self, id: EdgeId) -> &Edge<T> {
        &self.edges[id.index()]
    }

    /// Appends `extra` fresh isolated vertices.
    pub fn grow_vertices(&mut self, extra: usize) {
        self.n += extra;
    }

    pub fn set_terminals(&mut self, source: usize, sink: usize) {
        self.source = source;
        self.sink = sink;
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge<T>)> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| (EdgeId(i as u32), e))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Structure("graph has no vertices".into()));
        }
        if self.source >= self.n || self.sink >= self.n {
            return Err(Error::Structure("terminal out of range".into()));
        }
        if self.source == self.sink && !self.tour {
            return Err(Error::Structure(
                "source equals sink on a non-tour instance".into(),
            ));
        }
        if self.dim == 0 {
            return Err(Error::Structure("cost dimension must be >= 1".into()));
        }
        for (id, e) in self.edges.iter().enumerate() {
            if e.tail >= self.n || e.head >= self.n {
                return Err(Error::Structure(format!(
                    "edge {id} endpoint out of range"
                )));
            }
            if e.cost.dim() != self.dim {
                return Err(Error::Structure(format!(
                    "edge {id} cost has dimension {}, graph has {}",
                    e.cost.dim(),
                    self.dim
                )));
            }
            if !self.signed {
                for c in &e.cost.entries {
                    if *c < T::zero() {
                        return Err(Error::Structure(format!(
                            "edge {id} carries a negative cost entry on an unsigned instance"
                        )));
                    }
                }
            }
        }
        for (gi, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Structure(format!("group {gi} is empty")));
            }
            if group.iter().any(|&v| v >= self.n) {
                return Err(Error::Structure(format!("group {gi} vertex out of range")));
            }
        }
        Ok(())
    }

    pub fn map_costs<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Graph<U> {
        Graph {
            dim: self.dim,
            n: self.n,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    tail: e.tail,
                    head: e.head,
                    cost: e.cost.map(&f),
                })
                .collect(),
            source: self.source,
            sink: self.sink,
            groups: self.groups.clone(),
            tour: self.tour,
            signed: self.signed,
            undirected: self.undirected,
        }
    }

    /// Topological order of vertices, or an error if the graph has a cycle.
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let mut indeg = vec![0usize; self.n];
        for e in &self.edges {
            indeg[e.head] += 1;
        }
        let mut queue: Vec<usize> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(self.n);
        let adj = Adjacency::new(self);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for &eid in adj.out(v) {
                let w = self.edge(eid).head;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        if order.len() == self.n {
            Ok(order)
        } else {
            Err(Error::CycleDetected)
        }
    }

    pub fn is_dag(&self) -> bool {
        self.topo_order().is_ok()
    }
}

impl Graph<f64> {
    /// Exact lift to rational arithmetic (f64 values embed losslessly).
    pub fn to_exact(&self) -> Graph<crate::Exact> {
        self.map_costs(|c| crate::Exact::from_f64(*c))
    }
}

impl Graph<crate::Exact> {
    pub fn to_f64(&self) -> Graph<f64> {
        self.map_costs(|c| c.to_f64())
    }
}

/// Out/in incidence lists, built once per algorithm run.
#[derive(Debug, Clone)]
pub struct Adjacency {
    out: Vec<Vec<EdgeId>>,
    inc: Vec<Vec<EdgeId>>,
}

impl Adjacency {
    pub fn new<T: Scalar>(g: &Graph<T>) -> Self {
        let mut out = vec![Vec::new(); g.vertex_count()];
        let mut inc = vec![Vec::new(); g.vertex_count()];
        for (id, e) in g.edges() {
            out[e.tail].push(id);
            inc[e.head].push(id);
        }
        Adjacency { out, inc }
    }

    pub fn out(&self, v: usize) -> &[EdgeId] {
        &self.out[v]
    }

    pub fn incoming(&self, v: usize) -> &[EdgeId] {
        &self.inc[v]
    }
}

/// All-pairs reachability (reflexive), used for edge compatibility and for
/// restricting moment bases to path-supported monomials.
#[derive(Debug, Clone)]
pub struct Reachability {
    n: usize,
    table: Vec<bool>,
}

impl Reachability {
    pub fn new<T: Scalar>(g: &Graph<T>) -> Self {
        let n = g.vertex_count();
        let adj = Adjacency::new(g);
        let mut table = vec![false; n * n];
        for u in 0..n {
            let mut stack = vec![u];
            table[u * n + u] = true;
            while let Some(v) = stack.pop() {
                for &eid in adj.out(v) {
                    let w = g.edge(eid).head;
                    if !table[u * n + w] {
                        table[u * n + w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        Reachability { n, table }
    }

    #[inline]
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.table[from * self.n + to]
    }
}

/// Compatibility analysis of a two-terminal DAG: which edges can appear on a
/// common source-sink path.
#[derive(Debug, Clone)]
pub struct Compatibility {
    m: usize,
    active: Vec<bool>,
    /// Row-major m x m; `pair[e * m + f]` with e != f.
    pair: Vec<bool>,
}

impl Compatibility {
    pub fn new<T: Scalar>(g: &Graph<T>, reach: &Reachability) -> Self {
        let m = g.edge_count();
        let s = g.source();
        let t = g.sink();
        let mut active = vec![false; m];
        for (id, e) in g.edges() {
            active[id.index()] = reach.reaches(s, e.tail) && reach.reaches(e.head, t);
        }
        let mut pair = vec![false; m * m];
        for (e1, a) in g.edges() {
            for (e2, b) in g.edges() {
                if e1 == e2 {
                    continue;
                }
                let ok = active[e1.index()]
                    && active[e2.index()]
                    && (reach.reaches(a.head, b.tail) || reach.reaches(b.head, a.tail));
                pair[e1.index() * m + e2.index()] = ok;
            }
        }
        Compatibility { m, active, pair }
    }

    /// The edge lies on at least one source-sink path.
    #[inline]
    pub fn active(&self, e: EdgeId) -> bool {
        self.active[e.index()]
    }

    #[inline]
    pub fn compatible(&self, e1: EdgeId, e2: EdgeId) -> bool {
        if e1 == e2 {
            self.active[e1.index()]
        } else {
            self.pair[e1.index() * self.m + e2.index()]
        }
    }

    /// Every pair in `edges` is compatible (in a DAG this is equivalent to the
    /// whole set lying on one source-sink path).
    pub fn set_supported(&self, edges: &[EdgeId]) -> bool {
        for (i, &a) in edges.iter().enumerate() {
            if !self.active(a) {
                return false;
            }
            for &b in &edges[i + 1..] {
                if !self.compatible(a, b) {
                    return false;
                }
            }
        }
        true
    }
}

/// True iff some source-sink path contains both edges. Precondition: DAG.
pub fn compatible<T: Scalar>(g: &Graph<T>, e1: EdgeId, e2: EdgeId) -> bool {
    let reach = Reachability::new(g);
    Compatibility::new(g, &reach).compatible(e1, e2)
}

/// Checks that the edge sequence is a source-to-sink walk. The empty walk is
/// admitted only on tour instances (source equals sink).
pub fn validate_st_walk<T: Scalar>(g: &Graph<T>, edges: &[EdgeId]) -> Result<()> {
    if edges.is_empty() {
        return if g.tour && g.source() == g.sink() {
            Ok(())
        } else {
            Err(Error::Structure("empty edge sequence is not a path".into()))
        };
    }
    let mut at = g.source();
    for &e in edges {
        let edge = g.edge(e);
        if edge.tail != at {
            return Err(Error::Structure(format!(
                "edge {e} starts at {} but the walk is at {at}",
                edge.tail
            )));
        }
        at = edge.head;
    }
    if at != g.sink() {
        return Err(Error::Structure(format!(
            "walk ends at {at}, not at the sink {}",
            g.sink()
        )));
    }
    Ok(())
}
