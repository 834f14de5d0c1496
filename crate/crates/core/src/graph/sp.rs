//! Series-parallel construction and recognition.
//!
//! Order (depth) bookkeeping counts series compositions only: a leaf bundle
//! has order 0, a parallel node takes the maximum child order, a series node
//! adds one to it.

use std::collections::BTreeMap;

use super::{CostVector, EdgeId, Graph};
use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Construction recipe for a series-parallel graph: costs at the leaves,
/// compositions above them.
#[derive(Debug, Clone, PartialEq)]
pub enum SpSpec<T> {
    Edge(CostVector<T>),
    Series(Vec<SpSpec<T>>),
    Parallel(Vec<SpSpec<T>>),
}

impl<T: Scalar> SpSpec<T> {
    pub fn scalar_edge(c: f64) -> Self {
        SpSpec::Edge(CostVector::scalar(T::from_f64(c)))
    }

    /// Order of the graph this spec builds.
    pub fn order(&self) -> u32 {
        match self {
            SpSpec::Edge(_) => 0,
            SpSpec::Parallel(children) => {
                children.iter().map(|c| c.order()).max().unwrap_or(0)
            }
            SpSpec::Series(children) => {
                children.iter().map(|c| c.order()).max().unwrap_or(0) + 1
            }
        }
    }
}

/// Block kinds of a resolved decomposition, referencing graph edges by id.
#[derive(Debug, Clone, PartialEq)]
pub enum SpKind {
    /// Parallel bundle of edges between the block terminals.
    Leaf(Vec<EdgeId>),
    Series(Vec<SpBlock>),
    Parallel(Vec<SpBlock>),
}

/// A block of the decomposition with its own terminals and order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpBlock {
    pub source: usize,
    pub sink: usize,
    pub order: u32,
    pub kind: SpKind,
}

impl SpBlock {
    pub fn children(&self) -> &[SpBlock] {
        match &self.kind {
            SpKind::Leaf(_) => &[],
            SpKind::Series(c) | SpKind::Parallel(c) => c,
        }
    }

    /// All edge ids inside this block.
    pub fn edge_ids(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        self.collect_edges(&mut out);
        out.sort_unstable();
        out
    }

    fn collect_edges(&self, out: &mut Vec<EdgeId>) {
        match &self.kind {
            SpKind::Leaf(edges) => out.extend_from_slice(edges),
            SpKind::Series(c) | SpKind::Parallel(c) => {
                for b in c {
                    b.collect_edges(out);
                }
            }
        }
    }

    /// Edges leaving the block source inside the block (`δ+(s_B) ∩ B`); their
    /// indicator sum witnesses the event that a path visits the block.
    pub fn entry_edges(&self) -> Vec<EdgeId> {
        let mut out = match &self.kind {
            SpKind::Leaf(edges) => edges.clone(),
            SpKind::Series(children) => children[0].entry_edges(),
            SpKind::Parallel(children) => {
                let mut v = Vec::new();
                for c in children {
                    v.extend(c.entry_edges());
                }
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The block and all nested blocks, outermost first.
    pub fn all_blocks(&self) -> Vec<&SpBlock> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            for c in out[i].children() {
                out.push(c);
            }
            i += 1;
        }
        out
    }
}

/// Block tree of a series-parallel graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SpDecomposition {
    pub root: SpBlock,
}

impl SpDecomposition {
    pub fn order(&self) -> u32 {
        self.root.order
    }

    /// Consistency of the tree against its graph: terminal chaining in series
    /// nodes, shared terminals in parallel nodes, leaf endpoints, and the
    /// order counting rule.
    pub fn validate<T: Scalar>(&self, g: &Graph<T>) -> Result<()> {
        fn walk<T: Scalar>(b: &SpBlock, g: &Graph<T>) -> Result<()> {
            match &b.kind {
                SpKind::Leaf(edges) => {
                    if edges.is_empty() {
                        return Err(Error::Structure("leaf block with no edges".into()));
                    }
                    for &e in edges {
                        let edge = g.edge(e);
                        if edge.tail != b.source || edge.head != b.sink {
                            return Err(Error::Structure(format!(
                                "leaf edge {e} does not join the block terminals"
                            )));
                        }
                    }
                    if b.order != 0 {
                        return Err(Error::Structure("leaf block with non-zero order".into()));
                    }
                }
                SpKind::Series(children) => {
                    if children.len() < 2 {
                        return Err(Error::Structure("series block needs >= 2 children".into()));
                    }
                    if children.first().unwrap().source != b.source
                        || children.last().unwrap().sink != b.sink
                    {
                        return Err(Error::Structure("series terminals mismatch".into()));
                    }
                    for w in children.windows(2) {
                        if w[0].sink != w[1].source {
                            return Err(Error::Structure(
                                "series chain mismatch: consecutive blocks do not share a terminal"
                                    .into(),
                            ));
                        }
                    }
                    let want = children.iter().map(|c| c.order).max().unwrap() + 1;
                    if b.order != want {
                        return Err(Error::Structure("series order mismatch".into()));
                    }
                    for c in children {
                        walk(c, g)?;
                    }
                }
                SpKind::Parallel(children) => {
                    if children.len() < 2 {
                        return Err(Error::Structure(
                            "parallel block needs >= 2 children".into(),
                        ));
                    }
                    for c in children {
                        if c.source != b.source || c.sink != b.sink {
                            return Err(Error::Structure("parallel terminals mismatch".into()));
                        }
                    }
                    let want = children.iter().map(|c| c.order).max().unwrap();
                    if b.order != want {
                        return Err(Error::Structure("parallel order mismatch".into()));
                    }
                    for c in children {
                        walk(c, g)?;
                    }
                }
            }
            Ok(())
        }
        walk(&self.root, g)?;
        if self.root.source != g.source() || self.root.sink != g.sink() {
            return Err(Error::Structure(
                "decomposition terminals differ from graph terminals".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the graph realizing a spec tree, returning the resolved
/// decomposition alongside it (block -> edge ids, for rounding analysis).
pub fn build_series_parallel<T: Scalar>(spec: &SpSpec<T>) -> Result<(Graph<T>, SpDecomposition)> {
    let dim = first_dim(spec)
        .ok_or_else(|| Error::Structure("spec contains no edges".into()))?;
    let mut g: Graph<T> = Graph::new(2, dim, 0, 1);
    let root = build_block(spec, &mut g, 0, 1)?;
    g.validate()?;
    let decomposition = SpDecomposition { root };
    decomposition.validate(&g)?;
    Ok((g, decomposition))
}

fn first_dim<T: Scalar>(spec: &SpSpec<T>) -> Option<usize> {
    match spec {
        SpSpec::Edge(c) => Some(c.dim()),
        SpSpec::Series(cs) | SpSpec::Parallel(cs) => cs.iter().find_map(first_dim),
    }
}

fn build_block<T: Scalar>(
    spec: &SpSpec<T>,
    g: &mut Graph<T>,
    source: usize,
    sink: usize,
) -> Result<SpBlock> {
    match spec {
        SpSpec::Edge(cost) => {
            let id = g.add_edge(source, sink, cost.clone());
            Ok(SpBlock {
                source,
                sink,
                order: 0,
                kind: SpKind::Leaf(vec![id]),
            })
        }
        SpSpec::Parallel(children) => {
            if children.len() < 2 {
                return Err(Error::Structure(
                    "parallel composition needs >= 2 children".into(),
                ));
            }
            let blocks = children
                .iter()
                .map(|c| build_block(c, g, source, sink))
                .collect::<Result<Vec<_>>>()?;
            let order = blocks.iter().map(|b| b.order).max().unwrap();
            Ok(SpBlock {
                source,
                sink,
                order,
                kind: SpKind::Parallel(blocks),
            })
        }
        SpSpec::Series(children) => {
            if children.len() < 2 {
                return Err(Error::Structure(
                    "series composition needs >= 2 children".into(),
                ));
            }
            let mut blocks = Vec::with_capacity(children.len());
            let mut cur = source;
            for (i, c) in children.iter().enumerate() {
                let next = if i + 1 == children.len() {
                    sink
                } else {
                    let v = g.n;
                    g.n += 1;
                    v
                };
                blocks.push(build_block(c, g, cur, next)?);
                cur = next;
            }
            let order = blocks.iter().map(|b| b.order).max().unwrap() + 1;
            Ok(SpBlock {
                source,
                sink,
                order,
                kind: SpKind::Series(blocks),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Recognition by iterative series/parallel reduction.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct VirtualEdge {
    tail: usize,
    head: usize,
    block: SpBlock,
}

/// Recognizes a two-terminal series-parallel DAG, returning a decomposition
/// that realizes it. Parallel reductions are applied before series ones
/// (parallel composition does not increase the order); series splices keep
/// chains flat so the reported order is minimal for the parse found.
pub fn recognize_series_parallel<T: Scalar>(g: &Graph<T>) -> Result<SpDecomposition> {
    g.validate()?;
    if !g.is_dag() {
        return Err(Error::NotSeriesParallel("graph has a directed cycle".into()));
    }
    if g.edge_count() == 0 {
        return Err(Error::NotSeriesParallel("graph has no edges".into()));
    }
    let mut edges: Vec<VirtualEdge> = g
        .edges()
        .map(|(id, e)| VirtualEdge {
            tail: e.tail,
            head: e.head,
            block: SpBlock {
                source: e.tail,
                sink: e.head,
                order: 0,
                kind: SpKind::Leaf(vec![id]),
            },
        })
        .collect();

    loop {
        if try_parallel_reduction(&mut edges) {
            continue;
        }
        if try_series_reduction(&mut edges, g.source(), g.sink()) {
            continue;
        }
        break;
    }

    if edges.len() == 1 && edges[0].tail == g.source() && edges[0].head == g.sink() {
        let decomposition = SpDecomposition {
            root: edges.pop().unwrap().block,
        };
        decomposition.validate(g)?;
        Ok(decomposition)
    } else {
        Err(Error::NotSeriesParallel(format!(
            "reduction stuck with {} virtual edges",
            edges.len()
        )))
    }
}

/// Merges one family of parallel virtual edges; returns whether it acted.
fn try_parallel_reduction(edges: &mut Vec<VirtualEdge>) -> bool {
    let mut by_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        by_pair.entry((e.tail, e.head)).or_default().push(i);
    }
    let Some((_, idxs)) = by_pair.into_iter().find(|(_, v)| v.len() >= 2) else {
        return false;
    };
    let (tail, head) = (edges[idxs[0]].tail, edges[idxs[0]].head);
    // Flatten: splice nested parallel children; fuse adjacent leaf bundles.
    let mut children: Vec<SpBlock> = Vec::new();
    let mut leaf_edges: Vec<EdgeId> = Vec::new();
    for &i in &idxs {
        match &edges[i].block.kind {
            SpKind::Leaf(es) => leaf_edges.extend_from_slice(es),
            SpKind::Parallel(cs) => {
                for c in cs {
                    match &c.kind {
                        SpKind::Leaf(es) => leaf_edges.extend_from_slice(es),
                        _ => children.push(c.clone()),
                    }
                }
            }
            _ => children.push(edges[i].block.clone()),
        }
    }
    if !leaf_edges.is_empty() {
        leaf_edges.sort_unstable();
        children.push(SpBlock {
            source: tail,
            sink: head,
            order: 0,
            kind: SpKind::Leaf(leaf_edges),
        });
    }
    let block = if children.len() == 1 {
        children.pop().unwrap()
    } else {
        let order = children.iter().map(|b| b.order).max().unwrap();
        SpBlock {
            source: tail,
            sink: head,
            order,
            kind: SpKind::Parallel(children),
        }
    };
    let mut keep: Vec<VirtualEdge> = Vec::with_capacity(edges.len() - idxs.len() + 1);
    for (i, e) in edges.drain(..).enumerate() {
        if !idxs.contains(&i) {
            keep.push(e);
        }
    }
    keep.push(VirtualEdge {
        tail,
        head,
        block,
    });
    *edges = keep;
    true
}

/// Contracts one series vertex (single in, single out, not a terminal).
fn try_series_reduction(edges: &mut Vec<VirtualEdge>, s: usize, t: usize) -> bool {
    let mut max_vertex = 0usize;
    for e in edges.iter() {
        max_vertex = max_vertex.max(e.tail).max(e.head);
    }
    for v in 0..=max_vertex {
        if v == s || v == t {
            continue;
        }
        let ins: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.head == v)
            .map(|(i, _)| i)
            .collect();
        let outs: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tail == v)
            .map(|(i, _)| i)
            .collect();
        if ins.len() == 1 && outs.len() == 1 && ins[0] != outs[0] {
            let a = edges[ins[0]].clone();
            let b = edges[outs[0]].clone();
            // Splice nested series children so chains stay flat.
            let mut children: Vec<SpBlock> = Vec::new();
            for blk in [a.block, b.block] {
                match blk.kind {
                    SpKind::Series(cs) => children.extend(cs),
                    _ => children.push(blk),
                }
            }
            let order = children.iter().map(|c| c.order).max().unwrap() + 1;
            let merged = VirtualEdge {
                tail: a.tail,
                head: b.head,
                block: SpBlock {
                    source: a.tail,
                    sink: b.head,
                    order,
                    kind: SpKind::Series(children),
                },
            };
            let drop = [ins[0], outs[0]];
            let mut keep: Vec<VirtualEdge> = Vec::with_capacity(edges.len() - 1);
            for (i, e) in edges.drain(..).enumerate() {
                if !drop.contains(&i) {
                    keep.push(e);
                }
            }
            keep.push(merged);
            *edges = keep;
            return true;
        }
    }
    false
}
