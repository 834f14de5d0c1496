//! Layered-graph transform: vertex layers `V_0..V_Δ` with all edges crossing
//! one layer boundary, zero-cost padding between sink copies, and optional
//! zero-cost check-in edges for group vertices (the tour reduction).

use super::{CostVector, EdgeId, Graph};
use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Provenance of a layered edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayeredEdgeKind {
    /// Copy of a base edge.
    Copy(EdgeId),
    /// Zero-cost edge between consecutive sink copies.
    Padding,
    /// Zero-cost edge between consecutive copies of a group vertex; traversing
    /// it marks the group as visited.
    CheckIn { group: usize },
}

/// A layered graph together with its provenance bookkeeping.
#[derive(Debug, Clone)]
pub struct LayeredGraph<T> {
    pub graph: Graph<T>,
    /// Number of edge layers.
    pub delta: usize,
    /// Layer of each layered vertex.
    pub vertex_layer: Vec<usize>,
    /// Base vertex each layered vertex copies.
    pub base_vertex: Vec<usize>,
    /// Kind (and base edge) of each layered edge.
    pub kind: Vec<LayeredEdgeKind>,
    /// Edge ids per layer, 0-indexed by `layer - 1`.
    pub edges_in_layer: Vec<Vec<EdgeId>>,
}

impl<T: Scalar> LayeredGraph<T> {
    /// Layer (1-based) of a layered edge.
    pub fn layer_of_edge(&self, e: EdgeId) -> usize {
        self.vertex_layer[self.graph.edge(e).head]
    }

    /// Maps a layered s-t path to the base-graph walk it encodes, dropping
    /// padding and check-in edges.
    pub fn walk_of_path(&self, path: &[EdgeId]) -> Vec<EdgeId> {
        path.iter()
            .filter_map(|&e| match self.kind[e.index()] {
                LayeredEdgeKind::Copy(base) => Some(base),
                _ => None,
            })
            .collect()
    }

    /// Groups checked-in along a layered path.
    pub fn groups_visited(&self, path: &[EdgeId]) -> Vec<usize> {
        let mut seen: Vec<usize> = path
            .iter()
            .filter_map(|&e| match self.kind[e.index()] {
                LayeredEdgeKind::CheckIn { group } => Some(group),
                _ => None,
            })
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Embeds a base walk (sequence of base edges from source towards sink,
    /// length <= delta) as a layered s-t path, appending padding.
    pub fn path_of_walk(&self, walk: &[EdgeId], base: &Graph<T>) -> Result<Vec<EdgeId>> {
        if walk.len() > self.delta {
            return Err(Error::Structure(format!(
                "walk of length {} exceeds {} layers",
                walk.len(),
                self.delta
            )));
        }
        let mut out = Vec::with_capacity(self.delta);
        let mut at = base.source();
        for (i, &b) in walk.iter().enumerate() {
            let e = base.edge(b);
            if e.tail != at {
                return Err(Error::Structure("walk edges do not chain".into()));
            }
            let found = self.edges_in_layer[i]
                .iter()
                .copied()
                .find(|&le| self.kind[le.index()] == LayeredEdgeKind::Copy(b))
                .ok_or_else(|| Error::Structure(format!("no copy of edge {b} in layer {}", i + 1)))?;
            out.push(found);
            at = e.head;
        }
        if at != base.sink() {
            return Err(Error::Structure("walk does not end at the sink".into()));
        }
        for i in walk.len()..self.delta {
            let pad = self.edges_in_layer[i]
                .iter()
                .copied()
                .find(|&le| self.kind[le.index()] == LayeredEdgeKind::Padding)
                .ok_or_else(|| Error::Structure(format!("no padding edge in layer {}", i + 1)))?;
            out.push(pad);
        }
        Ok(out)
    }
}

/// One step of a tour written against a layered graph with check-in edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TourStep {
    /// Traverse a base edge.
    Move(EdgeId),
    /// Take the check-in edge of the given group at the current vertex.
    CheckIn(usize),
}

impl<T: Scalar> LayeredGraph<T> {
    /// Embeds a step sequence (moves and check-ins, at most `delta` of them,
    /// ending at the sink) as a layered s-t path, padded at the end.
    pub fn path_of_program(&self, steps: &[TourStep], base: &Graph<T>) -> Result<Vec<EdgeId>> {
        if steps.len() > self.delta {
            return Err(Error::Structure("program longer than the layer count".into()));
        }
        let mut out = Vec::with_capacity(self.delta);
        let mut at = base.source();
        for (i, step) in steps.iter().enumerate() {
            let want = |kind: &LayeredEdgeKind, tail_base: usize| -> bool {
                let _ = tail_base;
                match (step, kind) {
                    (TourStep::Move(b), LayeredEdgeKind::Copy(k)) => k == b,
                    (TourStep::CheckIn(g), LayeredEdgeKind::CheckIn { group }) => group == g,
                    _ => false,
                }
            };
            let found = self.edges_in_layer[i]
                .iter()
                .copied()
                .find(|&le| {
                    want(&self.kind[le.index()], at)
                        && self.base_vertex[self.graph.edge(le).tail] == at
                })
                .ok_or_else(|| {
                    Error::Structure(format!("no edge for step {step:?} in layer {}", i + 1))
                })?;
            out.push(found);
            at = self.base_vertex[self.graph.edge(found).head];
        }
        if at != base.sink() {
            return Err(Error::Structure("program does not end at the sink".into()));
        }
        for i in steps.len()..self.delta {
            let pad = self.edges_in_layer[i]
                .iter()
                .copied()
                .find(|&le| self.kind[le.index()] == LayeredEdgeKind::Padding)
                .ok_or_else(|| Error::Structure(format!("no padding edge in layer {}", i + 1)))?;
            out.push(pad);
        }
        Ok(out)
    }
}

/// The plain transform: `Δ = n - 1` layers, no check-in edges. Every s-t walk
/// of length at most Δ corresponds to a layered s-t path of equal vector cost
/// and conversely.
pub fn to_layered<T: Scalar>(g: &Graph<T>) -> Result<LayeredGraph<T>> {
    let delta = g.vertex_count().saturating_sub(1).max(1);
    layer_transform(g, delta, &[])
}

/// General transform with an explicit layer count and check-in vertices
/// `(group, vertex)` (used by the group tour reduction with `Δ = nk - 1`).
pub fn layer_transform<T: Scalar>(
    g: &Graph<T>,
    delta: usize,
    checkins: &[(usize, usize)],
) -> Result<LayeredGraph<T>> {
    g.validate()?;
    if delta == 0 {
        return Err(Error::InvalidParameter("delta must be >= 1".into()));
    }
    for &(_, v) in checkins {
        if v == g.sink() {
            return Err(Error::InvalidParameter(
                "check-in vertex coincides with the sink".into(),
            ));
        }
    }
    let n = g.vertex_count();
    let (s, t) = (g.source(), g.sink());

    // Vertex ids: 0 = source copy at layer 0; middle layers hold full copies;
    // last id = sink copy at layer delta.
    let middle_layers = delta - 1;
    let total = 2 + middle_layers * n;
    let vid = |layer: usize, v: usize| -> Option<usize> {
        if layer == 0 {
            (v == s).then_some(0)
        } else if layer == delta {
            (v == t).then_some(total - 1)
        } else {
            Some(1 + (layer - 1) * n + v)
        }
    };

    let mut lg: Graph<T> = Graph::new(total, g.cost_dim(), 0, total - 1);
    lg.signed = g.signed;
    let mut vertex_layer = vec![0usize; total];
    let mut base_vertex = vec![0usize; total];
    base_vertex[0] = s;
    for layer in 1..delta {
        for v in 0..n {
            let id = vid(layer, v).unwrap();
            vertex_layer[id] = layer;
            base_vertex[id] = v;
        }
    }
    vertex_layer[total - 1] = delta;
    base_vertex[total - 1] = t;

    let mut kind = Vec::new();
    let mut edges_in_layer = vec![Vec::new(); delta];
    for layer in 1..=delta {
        for (bid, e) in g.edges() {
            let (Some(a), Some(b)) = (vid(layer - 1, e.tail), vid(layer, e.head)) else {
                continue;
            };
            let id = lg.add_edge(a, b, e.cost.clone());
            kind.push(LayeredEdgeKind::Copy(bid));
            edges_in_layer[layer - 1].push(id);
        }
        // Padding between adjacent sink copies.
        if let (Some(a), Some(b)) = (vid(layer - 1, t), vid(layer, t)) {
            let id = lg.add_edge(a, b, CostVector::zeros(g.cost_dim()));
            kind.push(LayeredEdgeKind::Padding);
            edges_in_layer[layer - 1].push(id);
        }
        // Check-in edges between adjacent copies of group vertices.
        for &(group, v) in checkins {
            if let (Some(a), Some(b)) = (vid(layer - 1, v), vid(layer, v)) {
                let id = lg.add_edge(a, b, CostVector::zeros(g.cost_dim()));
                kind.push(LayeredEdgeKind::CheckIn { group });
                edges_in_layer[layer - 1].push(id);
            }
        }
    }
    lg.validate()?;
    Ok(LayeredGraph {
        graph: lg,
        delta,
        vertex_layer,
        base_vertex,
        kind,
        edges_in_layer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CostVector, Graph};

    fn scalar_graph(n: usize, s: usize, t: usize, edges: &[(usize, usize, f64)]) -> Graph<f64> {
        let mut g = Graph::new(n, 1, s, t);
        for &(u, v, c) in edges {
            g.add_edge(u, v, CostVector::scalar(c));
        }
        g.validate().unwrap();
        g
    }

    /// All s-t walks of length <= cap, as edge sequences.
    fn walks(g: &Graph<f64>, cap: usize) -> Vec<Vec<EdgeId>> {
        let adj = crate::graph::Adjacency::new(g);
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Vec<EdgeId>)> = vec![(g.source(), vec![])];
        while let Some((v, path)) = stack.pop() {
            if v == g.sink() && !path.is_empty() {
                out.push(path.clone());
            }
            if path.len() == cap {
                continue;
            }
            for &e in adj.out(v) {
                let mut next = path.clone();
                next.push(e);
                stack.push((g.edge(e).head, next));
            }
        }
        out
    }

    /// All s-t paths in a DAG.
    fn dag_paths(g: &Graph<f64>) -> Vec<Vec<EdgeId>> {
        walks(g, g.edge_count())
    }

    #[test]
    fn single_edge_layering() {
        let g = scalar_graph(2, 0, 1, &[(0, 1, 2.0)]);
        let lg = to_layered(&g).unwrap();
        assert_eq!(lg.delta, 1);
        assert_eq!(lg.graph.edge_count(), 1);
        assert!(matches!(lg.kind[0], LayeredEdgeKind::Copy(_)));
    }

    #[test]
    fn triangle_walk_correspondence() {
        // s -> a -> t plus shortcut s -> t; n = 3 so delta = 2.
        let g = scalar_graph(3, 0, 2, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)]);
        let lg = to_layered(&g).unwrap();
        assert_eq!(lg.delta, 2);

        let base_walks = walks(&g, lg.delta);
        assert_eq!(base_walks.len(), 2);
        // Every walk embeds with equal cost, the short one ends in padding.
        for w in &base_walks {
            let path = lg.path_of_walk(w, &g).unwrap();
            assert_eq!(path.len(), lg.delta);
            let walk_cost: f64 = w.iter().map(|&e| g.edge(e).cost.entries[0]).sum();
            let path_cost: f64 = path
                .iter()
                .map(|&e| lg.graph.edge(e).cost.entries[0])
                .sum();
            assert_eq!(walk_cost, path_cost);
            if w.len() == 1 {
                assert!(matches!(
                    lg.kind[path[1].index()],
                    LayeredEdgeKind::Padding
                ));
            }
        }
        // Every layered path maps back to a walk of equal cost.
        let layered_paths = dag_paths(&lg.graph);
        for p in &layered_paths {
            let w = lg.walk_of_path(p);
            assert!(base_walks.contains(&w));
        }
        assert_eq!(layered_paths.len(), base_walks.len());
    }

    #[test]
    fn exhaustive_walk_path_correspondence_small() {
        // Random-ish small DAGs: walk set of length <= n-1 matches layered
        // path set through the two mappings, costs preserved.
        let cases = vec![
            scalar_graph(4, 0, 3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (0, 3, 9.0)]),
            scalar_graph(
                5,
                0,
                4,
                &[
                    (0, 1, 1.0),
                    (0, 2, 2.0),
                    (1, 3, 3.0),
                    (2, 3, 1.0),
                    (3, 4, 1.0),
                    (1, 4, 7.0),
                ],
            ),
        ];
        for g in cases {
            let lg = to_layered(&g).unwrap();
            assert_eq!(lg.delta, g.vertex_count() - 1);
            let base_walks = walks(&g, lg.delta);
            for w in &base_walks {
                let p = lg.path_of_walk(w, &g).unwrap();
                assert_eq!(lg.walk_of_path(&p), *w);
            }
            for p in dag_paths(&lg.graph) {
                let w = lg.walk_of_path(&p);
                assert!(base_walks.contains(&w));
                let wc: f64 = w.iter().map(|&e| g.edge(e).cost.entries[0]).sum();
                let pc: f64 = p
                    .iter()
                    .map(|&e| lg.graph.edge(e).cost.entries[0])
                    .sum();
                assert!((wc - pc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_dag_walk_correspondence() {
        use rand::Rng;
        let streams = crate::rng::Streams::new(404);
        for i in 0..5u64 {
            let mut rng = streams.substream(1, i);
            let n = rng.gen_range(3..=6);
            let mut g: Graph<f64> = Graph::new(n, 1, 0, n - 1);
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.5) {
                        g.add_edge(u, v, CostVector::scalar(rng.gen_range(0..8) as f64));
                    }
                }
            }
            if g.validate().is_err() || walks(&g, n - 1).is_empty() {
                continue;
            }
            let lg = to_layered(&g).unwrap();
            let base_walks = walks(&g, lg.delta);
            for w in &base_walks {
                let p = lg.path_of_walk(w, &g).unwrap();
                assert_eq!(lg.walk_of_path(&p), *w, "instance {i}");
            }
            for p in dag_paths(&lg.graph) {
                let w = lg.walk_of_path(&p);
                assert!(base_walks.contains(&w), "instance {i}");
                let wc: f64 = w.iter().map(|&e| g.edge(e).cost.entries[0]).sum();
                let pc: f64 = p
                    .iter()
                    .map(|&e| lg.graph.edge(e).cost.entries[0])
                    .sum();
                assert_eq!(wc, pc, "instance {i}");
            }
        }
    }

    #[test]
    fn tour_layering_with_checkins() {
        // 3-cycle tour instance: s = t = 0, one check-in vertex.
        let mut g: Graph<f64> = Graph::new(3, 1, 0, 0);
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(1.0));
        g.add_edge(2, 0, CostVector::scalar(1.0));
        g.validate().unwrap();

        let k = 2;
        let delta = g.vertex_count() * k - 1;
        let lg = layer_transform(&g, delta, &[(0, 1)]).unwrap();
        assert_eq!(lg.delta, 5);
        assert!(lg
            .kind
            .iter()
            .any(|k| matches!(k, LayeredEdgeKind::CheckIn { group: 0 })));
        // Padding from layer 0 exists because source and sink coincide.
        assert!(lg.edges_in_layer[0]
            .iter()
            .any(|&e| matches!(lg.kind[e.index()], LayeredEdgeKind::Padding)));
    }

    #[test]
    fn padding_edges_have_zero_cost() {
        let g = scalar_graph(3, 0, 2, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)]);
        let lg = to_layered(&g).unwrap();
        for (i, k) in lg.kind.iter().enumerate() {
            if matches!(k, LayeredEdgeKind::Padding) {
                let e = lg.graph.edge(EdgeId(i as u32));
                assert!(e.cost.entries.iter().all(|&c| c == 0.0));
            }
        }
    }
}
