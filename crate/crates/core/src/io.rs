//! JSON formats: instances, pseudo-expectations, rounding traces, and run
//! records. All reals are serialized as decimal strings so round-trips are
//! bit-exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graph::{CostVector, EdgeId, Graph, SpBlock, SpDecomposition, SpKind};
use crate::poly::Monomial;
use crate::pseudoexp::PseudoExpectation;
use crate::rounding::{RoundingTrace, TraceStep};
use crate::Result;

fn encode_real(v: f64) -> String {
    // Shortest representation that parses back to the same bits.
    format!("{v}")
}

fn decode_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::InvalidInstance(format!("bad real '{s}': {e}")))
}

/// On-disk instance:
/// `{"l", "n", "s", "t", "edges": [[tail, head, ["c1", ...]], ...], "groups",
///   "sp_tree"?, "signed"?, "tour"?, "undirected"?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub l: usize,
    pub n: usize,
    pub s: usize,
    pub t: usize,
    pub edges: Vec<(usize, usize, Vec<String>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sp_tree: Option<SpTreeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undirected: Option<bool>,
}

/// Nested decomposition: `{"leaf": [edge ids]}` / `{"series": [...]}` /
/// `{"parallel": [...]}`. Terminals and orders are recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpTreeJson {
    Leaf(Vec<u32>),
    Series(Vec<SpTreeJson>),
    Parallel(Vec<SpTreeJson>),
}

impl InstanceJson {
    pub fn from_graph(g: &Graph<f64>, decomposition: Option<&SpDecomposition>) -> Self {
        InstanceJson {
            l: g.cost_dim(),
            n: g.vertex_count(),
            s: g.source(),
            t: g.sink(),
            edges: g
                .edges()
                .map(|(_, e)| {
                    (
                        e.tail,
                        e.head,
                        e.cost.entries.iter().map(|&c| encode_real(c)).collect(),
                    )
                })
                .collect(),
            groups: g.groups.clone(),
            sp_tree: decomposition.map(|d| encode_sp(&d.root)),
            signed: g.signed.then_some(true),
            tour: g.tour.then_some(true),
            undirected: g.undirected.then_some(true),
        }
    }

    pub fn into_graph(self) -> Result<(Graph<f64>, Option<SpDecomposition>)> {
        let mut g: Graph<f64> = Graph::new(self.n, self.l, self.s, self.t);
        g.signed = self.signed.unwrap_or(false);
        g.tour = self.tour.unwrap_or(false);
        g.undirected = self.undirected.unwrap_or(false);
        g.groups = self.groups;
        for (tail, head, entries) in &self.edges {
            let cost = CostVector::new(
                entries
                    .iter()
                    .map(|s| decode_real(s))
                    .collect::<Result<Vec<f64>>>()?,
            );
            g.add_edge(*tail, *head, cost);
        }
        g.validate()
            .map_err(|e| Error::InvalidInstance(e.to_string()))?;
        let decomposition = match self.sp_tree {
            None => None,
            Some(tree) => {
                let root = decode_sp(&tree, &g)?;
                let d = SpDecomposition { root };
                d.validate(&g)
                    .map_err(|e| Error::InvalidInstance(format!("sp_tree: {e}")))?;
                Some(d)
            }
        };
        Ok((g, decomposition))
    }
}

fn encode_sp(block: &SpBlock) -> SpTreeJson {
    match &block.kind {
        SpKind::Leaf(edges) => SpTreeJson::Leaf(edges.iter().map(|e| e.0).collect()),
        SpKind::Series(children) => {
            SpTreeJson::Series(children.iter().map(encode_sp).collect())
        }
        SpKind::Parallel(children) => {
            SpTreeJson::Parallel(children.iter().map(encode_sp).collect())
        }
    }
}

fn decode_sp(tree: &SpTreeJson, g: &Graph<f64>) -> Result<SpBlock> {
    match tree {
        SpTreeJson::Leaf(ids) => {
            if ids.is_empty() {
                return Err(Error::InvalidInstance("empty leaf in sp_tree".into()));
            }
            let edges: Vec<EdgeId> = ids.iter().map(|&i| EdgeId(i)).collect();
            if edges.iter().any(|e| e.index() >= g.edge_count()) {
                return Err(Error::InvalidInstance("sp_tree edge id out of range".into()));
            }
            let first = g.edge(edges[0]);
            Ok(SpBlock {
                source: first.tail,
                sink: first.head,
                order: 0,
                kind: SpKind::Leaf(edges),
            })
        }
        SpTreeJson::Series(children) => {
            let blocks = children
                .iter()
                .map(|c| decode_sp(c, g))
                .collect::<Result<Vec<_>>>()?;
            let order = blocks.iter().map(|b| b.order).max().unwrap_or(0) + 1;
            Ok(SpBlock {
                source: blocks.first().map(|b| b.source).unwrap_or(0),
                sink: blocks.last().map(|b| b.sink).unwrap_or(0),
                order,
                kind: SpKind::Series(blocks),
            })
        }
        SpTreeJson::Parallel(children) => {
            let blocks = children
                .iter()
                .map(|c| decode_sp(c, g))
                .collect::<Result<Vec<_>>>()?;
            let order = blocks.iter().map(|b| b.order).max().unwrap_or(0);
            Ok(SpBlock {
                source: blocks.first().map(|b| b.source).unwrap_or(0),
                sink: blocks.first().map(|b| b.sink).unwrap_or(0),
                order,
                kind: SpKind::Parallel(blocks),
            })
        }
    }
}

pub fn write_instance<W: Write>(
    w: W,
    g: &Graph<f64>,
    decomposition: Option<&SpDecomposition>,
) -> Result<()> {
    serde_json::to_writer_pretty(w, &InstanceJson::from_graph(g, decomposition))?;
    Ok(())
}

pub fn read_instance<R: Read>(r: R) -> Result<(Graph<f64>, Option<SpDecomposition>)> {
    let parsed: InstanceJson = serde_json::from_reader(r)?;
    parsed.into_graph()
}

/// Pseudo-expectation dump: `{"degree": 2d, "moments": [[[ids], "value"]...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeJson {
    pub degree: usize,
    pub moments: Vec<(Vec<u32>, String)>,
}

impl PeJson {
    pub fn from_pe(pe: &PseudoExpectation<f64>, limit: usize) -> Result<Self> {
        let moments = pe
            .dense_moments(limit)?
            .into_iter()
            .map(|(m, v)| (m.edges().iter().map(|e| e.0).collect(), encode_real(v)))
            .collect();
        Ok(PeJson {
            degree: pe.degree(),
            moments,
        })
    }

    pub fn into_pe(self) -> Result<PseudoExpectation<f64>> {
        let mut map = BTreeMap::new();
        for (ids, value) in &self.moments {
            let mono = Monomial::from_edges(ids.iter().map(|&i| EdgeId(i)).collect());
            map.insert(mono, decode_real(value)?);
        }
        PseudoExpectation::from_moments(self.degree, map)
    }
}

/// Trace dump for replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<TraceStepJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStepJson {
    pub conditioning: Vec<u32>,
    pub probabilities: Vec<(u32, String)>,
    pub chosen: u32,
}

impl TraceJson {
    pub fn from_trace(t: &RoundingTrace) -> Self {
        TraceJson {
            seed: t.seed,
            stream: t.stream,
            steps: t
                .steps
                .iter()
                .map(|s| TraceStepJson {
                    conditioning: s.conditioning.iter().map(|e| e.0).collect(),
                    probabilities: s
                        .probabilities
                        .iter()
                        .map(|(e, p)| (e.0, encode_real(*p)))
                        .collect(),
                    chosen: s.chosen.0,
                })
                .collect(),
        }
    }

    pub fn into_trace(self) -> Result<RoundingTrace> {
        let steps = self
            .steps
            .into_iter()
            .map(|s| {
                Ok(TraceStep {
                    conditioning: s.conditioning.into_iter().map(EdgeId).collect(),
                    probabilities: s
                        .probabilities
                        .into_iter()
                        .map(|(e, p)| Ok((EdgeId(e), decode_real(&p)?)))
                        .collect::<Result<Vec<_>>>()?,
                    chosen: EdgeId(s.chosen),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RoundingTrace {
            seed: self.seed,
            stream: self.stream,
            steps,
        })
    }
}

/// One line of an experiment log: everything a run produced, with timings
/// isolated so records diff cleanly across machines.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub algorithm: String,
    pub p: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locality: Option<f64>,
    pub sos_objective: String,
    pub sos_bound: String,
    pub rounded_cost: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_cost: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_baseline_cost: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_dijkstra_cost: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_opt: Option<String>,
    pub ratio_to_bound: String,
    pub status: String,
    pub degree: usize,
    pub trials: usize,
    /// Wall-clock milliseconds; excluded from determinism comparisons.
    pub timing_ms: u128,
}

impl RunRecord {
    /// The record with volatile fields cleared, for byte-identical diffing.
    pub fn deterministic_view(&self) -> RunRecord {
        let mut copy = self.clone();
        copy.timing_ms = 0;
        copy
    }
}

pub fn real_field(v: f64) -> String {
    encode_real(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_series_parallel, SpSpec};
    use proptest::prelude::*;

    #[test]
    fn instance_roundtrip_with_decomposition() {
        let spec = SpSpec::<f64>::Series(vec![
            SpSpec::Parallel(vec![SpSpec::scalar_edge(0.1), SpSpec::scalar_edge(0.25)]),
            SpSpec::scalar_edge(1.5),
        ]);
        let (g, d) = build_series_parallel(&spec).unwrap();
        let mut buf = Vec::new();
        write_instance(&mut buf, &g, Some(&d)).unwrap();
        let (g2, d2) = read_instance(buf.as_slice()).unwrap();
        assert_eq!(g, g2);
        let d2 = d2.unwrap();
        assert_eq!(d.order(), d2.order());
        assert_eq!(d.root.edge_ids(), d2.root.edge_ids());
    }

    #[test]
    fn pe_roundtrip() {
        let spec = SpSpec::<f64>::Parallel(vec![
            SpSpec::scalar_edge(1.0),
            SpSpec::scalar_edge(0.0),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let pe = PseudoExpectation::from_distribution(
            &g,
            &[vec![EdgeId(0)], vec![EdgeId(1)]],
            &[0.5, 0.5],
            2,
        )
        .unwrap()
        .map_scalar(|v| *v);
        let json = PeJson::from_pe(&pe, 1000).unwrap();
        let back = json.into_pe().unwrap();
        assert_eq!(
            back.moment(&Monomial::var(EdgeId(0))).unwrap(),
            pe.moment(&Monomial::var(EdgeId(0))).unwrap()
        );
    }

    proptest! {
        #[test]
        fn reals_roundtrip_bit_exactly(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let s = encode_real(v);
            let back = decode_real(&s).unwrap();
            prop_assert_eq!(v.to_bits(), back.to_bits());
        }

        #[test]
        fn instance_json_roundtrips(
            n in 2usize..6,
            raw_edges in proptest::collection::vec((0usize..6, 0usize..6, 0u32..1000), 1..10)
        ) {
            let mut g: Graph<f64> = Graph::new(n, 1, 0, n - 1);
            for (t0, h0, c) in raw_edges {
                let (tail, head) = (t0 % n, h0 % n);
                g.add_edge(tail, head, CostVector::scalar(c as f64 / 64.0));
            }
            let mut buf = Vec::new();
            write_instance(&mut buf, &g, None).unwrap();
            let (g2, _) = read_instance(buf.as_slice()).unwrap();
            prop_assert_eq!(g, g2);
        }
    }
}
