//! Randomized rounding: the sequential walk sampler for DAGs, the
//! conditioning-based sampler for layered graphs, and the group tour /
//! group tree pipelines built on them.

use rand::Rng;

use crate::error::Error;
use crate::graph::{
    layer_transform, to_layered, Adjacency, CostVector, EdgeId, Graph, LayeredEdgeKind,
    LayeredGraph,
};
use crate::poly::Monomial;
use crate::pseudoexp::PseudoExpectation;
use crate::rng::{sample_weighted, Streams};
use crate::scalar::Scalar;
use crate::sdp::{build_relaxation, solve, SolveOptions, SolveResult, SolveStatus};
use crate::{Result, Tolerances};

/// An s-t path (or s-s closed walk on tour instances) with its accumulated
/// vector cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    pub edges: Vec<EdgeId>,
    pub cost: CostVector<T>,
}

impl<T: Scalar> Path<T> {
    pub fn new(g: &Graph<T>, edges: Vec<EdgeId>) -> Result<Self> {
        crate::graph::validate_st_walk(g, &edges)?;
        let mut cost = CostVector::zeros(g.cost_dim());
        for &e in &edges {
            cost.add_assign(&g.edge(e).cost);
        }
        Ok(Path { edges, cost })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `Σ_i |c_i|^p`, exact in the scalar type.
    pub fn lp_pow(&self, p: u32) -> T {
        self.cost.lp_pow(p)
    }

    /// ℓp cost as a float.
    pub fn lp(&self, p: u32) -> f64 {
        self.cost.lp(p)
    }

    pub fn linf(&self) -> T {
        self.cost.linf()
    }
}

/// One sampling decision: the conditioning set in force, the distribution
/// snapshot, and the chosen edge.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub conditioning: Vec<EdgeId>,
    pub probabilities: Vec<(EdgeId, f64)>,
    pub chosen: EdgeId,
}

/// Record of one rounding run; replaying it against the same
/// pseudo-expectation reproduces the path exactly.
#[derive(Debug, Clone, Default)]
pub struct RoundingTrace {
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<TraceStep>,
}

// ---------------------------------------------------------------------------
// Algorithm: sequential walk sampler for DAG relaxations.
// ---------------------------------------------------------------------------

/// Walks from the source, at each vertex sampling an outgoing edge with
/// probability proportional to its moment, until the sink is reached. The
/// marginal law of every edge equals its moment.
pub fn round_series_parallel<R: Rng>(
    g: &Graph<f64>,
    pe: &PseudoExpectation<f64>,
    tol: &Tolerances,
    rng: &mut R,
) -> Result<Path<f64>> {
    round_walk_inner(g, pe, tol, rng, None)
}

/// Traced variant of [`round_series_parallel`].
pub fn round_series_parallel_traced<R: Rng>(
    g: &Graph<f64>,
    pe: &PseudoExpectation<f64>,
    tol: &Tolerances,
    rng: &mut R,
    trace: &mut RoundingTrace,
) -> Result<Path<f64>> {
    round_walk_inner(g, pe, tol, rng, Some(trace))
}

fn round_walk_inner<R: Rng>(
    g: &Graph<f64>,
    pe: &PseudoExpectation<f64>,
    tol: &Tolerances,
    rng: &mut R,
    mut trace: Option<&mut RoundingTrace>,
) -> Result<Path<f64>> {
    if g.signed {
        return Err(Error::InvalidParameter(
            "rounding requires entry-wise non-negative costs".into(),
        ));
    }
    let adj = Adjacency::new(g);
    let mut at = g.source();
    let mut edges = Vec::new();
    let step_cap = g.vertex_count() + g.edge_count() + 1;
    while at != g.sink() {
        if edges.len() > step_cap {
            return Err(Error::CorruptPseudoExpectation(format!(
                "walk exceeded {step_cap} steps without reaching the sink"
            )));
        }
        let out = adj.out(at);
        let mut weights = Vec::with_capacity(out.len());
        let mut mass = 0.0;
        for &e in out {
            let p_e = pe.moment(&Monomial::var(e))?.max(0.0);
            weights.push(p_e);
            mass += p_e;
        }
        if mass <= tol.condition_null {
            return Err(Error::CorruptPseudoExpectation(format!(
                "vertex {at} has outgoing mass {mass:.3e}"
            )));
        }
        let pick = sample_weighted(rng, &weights);
        let chosen = out[pick];
        if let Some(t) = trace.as_deref_mut() {
            t.steps.push(TraceStep {
                conditioning: Vec::new(),
                probabilities: out
                    .iter()
                    .zip(&weights)
                    .map(|(&e, &w)| (e, w / mass))
                    .collect(),
                chosen,
            });
        }
        edges.push(chosen);
        at = g.edge(chosen).head;
    }
    Path::new(g, edges)
}

/// Re-executes a trace, verifying each recorded distribution snapshot against
/// the pseudo-expectation before accepting the recorded choice.
pub fn replay_walk(
    g: &Graph<f64>,
    pe: &PseudoExpectation<f64>,
    trace: &RoundingTrace,
) -> Result<Path<f64>> {
    let adj = Adjacency::new(g);
    let mut at = g.source();
    let mut edges = Vec::new();
    for step in &trace.steps {
        let out = adj.out(at);
        let mut mass = 0.0;
        let mut weights = Vec::new();
        for &e in out {
            let p_e = pe.moment(&Monomial::var(e))?.max(0.0);
            weights.push((e, p_e));
            mass += p_e;
        }
        for ((e, w), (re, rw)) in weights.iter().zip(&step.probabilities) {
            if e != re || (w / mass - rw).abs() > 1e-9 {
                return Err(Error::CorruptPseudoExpectation(
                    "trace distribution mismatch".into(),
                ));
            }
        }
        edges.push(step.chosen);
        at = g.edge(step.chosen).head;
    }
    Path::new(g, edges)
}

// ---------------------------------------------------------------------------
// Layered sampling (edge sampling procedure + recursive path finder).
// ---------------------------------------------------------------------------

/// Conditional distribution over one layer given a product conditioning set.
/// Unsupported combinations have exactly zero moment, so edges inconsistent
/// with the conditioning receive zero mass structurally.
fn layer_distribution(
    lg: &LayeredGraph<f64>,
    pe: &PseudoExpectation<f64>,
    layer: usize,
    conditioning: &[EdgeId],
    tol: &Tolerances,
) -> Result<Vec<(EdgeId, f64)>> {
    let cond = Monomial::from_edges(conditioning.to_vec());
    let denom = pe.moment(&cond)?;
    if denom <= tol.condition_null {
        return Err(Error::ConditionOnNull {
            what: format!("edge set {conditioning:?}"),
            mass: denom,
        });
    }
    let mut out = Vec::with_capacity(lg.edges_in_layer[layer - 1].len());
    let mut sum = 0.0;
    for &e in &lg.edges_in_layer[layer - 1] {
        let num = pe.moment(&cond.union(&Monomial::var(e)))?;
        let q = (num / denom).max(0.0);
        sum += q;
        out.push((e, q));
    }
    if (sum - 1.0).abs() > tol.renormalize {
        return Err(Error::CorruptPseudoExpectation(format!(
            "layer {layer} distribution sums to {sum:.9} under conditioning {conditioning:?}"
        )));
    }
    for (_, q) in &mut out {
        *q /= sum;
    }
    Ok(out)
}

/// Edge sampling procedure: one edge from every requested layer, examined in
/// ascending order, each draw conditioned on everything sampled so far. The
/// resulting law does not depend on the examination order.
pub fn sample_edges<R: Rng>(
    lg: &LayeredGraph<f64>,
    layers: &[usize],
    conditioning: &[EdgeId],
    pe: &PseudoExpectation<f64>,
    tol: &Tolerances,
    rng: &mut R,
    mut trace: Option<&mut RoundingTrace>,
) -> Result<Vec<EdgeId>> {
    let mut cond: Vec<EdgeId> = conditioning.to_vec();
    let mut sampled = Vec::with_capacity(layers.len());
    for &layer in layers {
        let dist = layer_distribution(lg, pe, layer, &cond, tol)?;
        let weights: Vec<f64> = dist.iter().map(|(_, q)| *q).collect();
        let pick = sample_weighted(rng, &weights);
        let chosen = dist[pick].0;
        if let Some(t) = trace.as_deref_mut() {
            t.steps.push(TraceStep {
                conditioning: cond.clone(),
                probabilities: dist.clone(),
                chosen,
            });
        }
        cond.push(chosen);
        sampled.push(chosen);
    }
    Ok(sampled)
}

/// Pivot layers of the recursive finder: `m_i = y + ceil((z-y) i / (a+1))`.
pub fn pivot_layers(y: usize, z: usize, a: usize) -> Vec<usize> {
    (1..=a)
        .map(|i| y + ((z - y) * i).div_ceil(a + 1))
        .collect()
}

/// Degree budget the recursion actually consumes on `len` layers: layers are
/// sampled jointly at the base case, pivots first otherwise. The pivot
/// formula is translation invariant, so segment length determines the cost.
pub fn required_budget(len: usize, a: usize) -> usize {
    if len == 0 {
        return 0;
    }
    if len <= a {
        return len;
    }
    let (y, z) = (1usize, len);
    let pivots = pivot_layers(y, z, a);
    let mut worst = 0usize;
    let mut prev = y - 1;
    for i in 0..=a {
        let lo = prev + 1;
        let hi = if i < a { pivots[i] - 1 } else { z };
        if lo <= hi {
            worst = worst.max(required_budget(hi - lo + 1, a));
        }
        if i < a {
            prev = pivots[i];
        }
    }
    a + worst
}

/// Recursive rounding for layered graphs.
pub struct LayeredRounder<'a> {
    pub lg: &'a LayeredGraph<f64>,
    pub pe: &'a PseudoExpectation<f64>,
    /// Base-case width: segments of at most `a` layers are sampled jointly.
    pub a: usize,
    pub tol: Tolerances,
}

impl<'a> LayeredRounder<'a> {
    /// Checks the pseudo-expectation degree covers the conditioning chains of
    /// a full run before any sampling happens.
    pub fn check_budget(&self, p: u32) -> Result<()> {
        let need = p as usize + required_budget(self.lg.delta, self.a);
        let have = self.pe.degree() / 2;
        if need > have {
            return Err(Error::InvalidParameter(format!(
                "degree budget exhausted: need d >= {need}, pseudo-expectation provides {have}"
            )));
        }
        Ok(())
    }

    /// Samples a full s-t path (layers 1..delta).
    pub fn find_path<R: Rng>(&self, rng: &mut R) -> Result<Path<f64>> {
        self.find_path_traced(rng, None)
    }

    pub fn find_path_traced<R: Rng>(
        &self,
        rng: &mut R,
        mut trace: Option<&mut RoundingTrace>,
    ) -> Result<Path<f64>> {
        let mut edges = self.segment(1, self.lg.delta, &[], rng, trace.as_deref_mut())?;
        edges.sort_by_key(|&e| self.lg.layer_of_edge(e));
        // Adjacent sampled edges chain head-to-tail for any feasible input;
        // Path::new validates exactly that.
        Path::new(&self.lg.graph, edges).map_err(|e| {
            Error::CorruptPseudoExpectation(format!("sampled edges do not chain: {e}"))
        })
    }

    /// Edges covering layers `y..=z` given the conditioning set.
    fn segment<R: Rng>(
        &self,
        y: usize,
        z: usize,
        conditioning: &[EdgeId],
        rng: &mut R,
        mut trace: Option<&mut RoundingTrace>,
    ) -> Result<Vec<EdgeId>> {
        if y > z {
            return Ok(Vec::new());
        }
        let len = z - y + 1;
        if len <= self.a {
            let layers: Vec<usize> = (y..=z).collect();
            return sample_edges(
                self.lg,
                &layers,
                conditioning,
                self.pe,
                &self.tol,
                rng,
                trace.as_deref_mut(),
            );
        }
        let pivots = pivot_layers(y, z, self.a);
        let sampled = sample_edges(
            self.lg,
            &pivots,
            conditioning,
            self.pe,
            &self.tol,
            rng,
            trace.as_deref_mut(),
        )?;
        let mut extended = conditioning.to_vec();
        extended.extend_from_slice(&sampled);
        let mut edges = sampled;
        // Gaps tile [y, z] minus the pivot layers: the segment below the
        // first pivot starts at y, the one above the last pivot ends at z.
        // Layers are 1-based, so y - 1 is a valid virtual pivot below the
        // segment.
        let mut prev = y - 1;
        for i in 0..=self.a {
            let lo = prev + 1;
            let hi = if i < self.a { pivots[i] - 1 } else { z };
            if lo <= hi {
                let part = self.segment(lo, hi, &extended, rng, trace.as_deref_mut())?;
                edges.extend(part);
            }
            if i < self.a {
                prev = pivots[i];
            }
        }
        Ok(edges)
    }
}

// ---------------------------------------------------------------------------
// Full shortest-path pipeline on the layered reduction.
// ---------------------------------------------------------------------------

/// `ceil(log_base(x))` for integer arguments: smallest k with base^k >= x.
pub fn ceil_log(base: usize, x: usize) -> usize {
    let mut k = 0usize;
    let mut pow = 1usize;
    while pow < x {
        pow = pow.saturating_mul(base);
        k += 1;
    }
    k
}

/// One recursion level at minimum: a single layer still consumes one
/// conditioning slot even though the log factor degenerates to zero.
fn level_factor(a: usize, delta: usize) -> usize {
    ceil_log(a + 1, delta).max(1)
}

/// Base-case width from the locality parameter: `a = ceil(e^{1/c})`.
pub fn width_from_locality(c: f64) -> Result<usize> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "locality parameter c={c} outside (0, 1/2)"
        )));
    }
    Ok((1.0 / c).exp().ceil() as usize)
}

/// Relaxation degree for a layered run: `2 (p + (a+1) ceil(log_{a+1} Δ))`,
/// with the log factor floored at one so single-layer instances keep enough
/// headroom for their one sampling step.
pub fn layered_degree(p: u32, a: usize, delta: usize) -> usize {
    2 * (p as usize + (a + 1) * level_factor(a, delta))
}

#[derive(Debug, Clone)]
pub struct ShortestPathRun {
    /// Raw relaxation objective (a lower bound on OPT^p).
    pub sos_objective: f64,
    /// The solved functional over the layered graph, for dumps and replays.
    pub pe: PseudoExpectation<f64>,
    /// `objective^{1/p}` — the bound the costs are compared against.
    pub sos_bound: f64,
    pub best_path: Path<f64>,
    pub best_cost: f64,
    pub trial_costs: Vec<f64>,
    pub status: SolveStatus,
    pub degree: usize,
    pub width: usize,
    pub iterations: usize,
}

/// Layered-transform pipeline: relax at the width-indexed degree, solve,
/// round repeatedly, return the best trial path in base-graph edges.
pub fn solve_lp_shortest_path(
    g: &Graph<f64>,
    p: u32,
    c: f64,
    trials: usize,
    streams: &Streams,
    solver: SolveOptions,
) -> Result<ShortestPathRun> {
    let a = width_from_locality(c)?;
    let lg = to_layered(g)?;
    let degree = layered_degree(p, a, lg.delta);
    run_layered_pipeline(g, &lg, p, a, degree, trials, streams, solver, &[])
}

#[allow(clippy::too_many_arguments)]
fn run_layered_pipeline(
    base: &Graph<f64>,
    lg: &LayeredGraph<f64>,
    p: u32,
    a: usize,
    degree: usize,
    trials: usize,
    streams: &Streams,
    solver: SolveOptions,
    groups: &[Vec<EdgeId>],
) -> Result<ShortestPathRun> {
    let problem = build_relaxation(&lg.graph, p, degree, groups)?;
    let result = solve(&problem, solver)?;
    if result.status == SolveStatus::InfeasibleSuspected {
        return Err(Error::Solver(
            "relaxation looks infeasible (no admissible path?)".into(),
        ));
    }
    let rounder = LayeredRounder {
        lg,
        pe: &result.pe,
        a,
        tol: Tolerances::default(),
    };
    rounder.check_budget(p)?;
    let mut best: Option<Path<f64>> = None;
    let mut best_cost = f64::INFINITY;
    let mut trial_costs = Vec::with_capacity(trials);
    for trial in 0..trials.max(1) {
        let mut rng = streams.substream(0xf1, trial as u64);
        let layered_path = rounder.find_path(&mut rng)?;
        let walk = lg.walk_of_path(&layered_path.edges);
        let path = Path::new(base, walk)?;
        let cost = path.lp(p);
        trial_costs.push(cost);
        if cost < best_cost {
            best_cost = cost;
            best = Some(path);
        }
    }
    Ok(ShortestPathRun {
        sos_objective: result.objective,
        pe: result.pe.clone(),
        sos_bound: result.objective.max(0.0).powf(1.0 / p as f64),
        best_path: best.expect("at least one trial"),
        best_cost,
        trial_costs,
        status: result.status,
        degree,
        width: a,
        iterations: result.iterations,
    })
}

// ---------------------------------------------------------------------------
// Group tour (ATSP) and group tree (Steiner) wrappers.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GroupTourRun {
    /// Closed walk from the guessed start back to it (base-graph edges).
    pub tour: Path<f64>,
    /// Per-group indicator of coverage by the returned tour.
    pub covered: Vec<bool>,
    pub coverage_ok: bool,
    /// Measured per-trial visit frequency per group (the concentration the
    /// second-moment argument promises, surfaced as data).
    pub per_trial_frequency: Vec<f64>,
    /// Fraction of independent runs whose trial schedule covered every group.
    pub run_coverage_frequency: f64,
    pub runs: usize,
    pub trials_used: usize,
    pub t_schedule: usize,
    pub sos_objective: f64,
    pub start_vertex: usize,
    pub degree: usize,
}

/// Number of rounding trials per start guess: `T = ceil(4 c log2(Δ+1) log2(k+1))`.
pub fn tour_trial_schedule(c: f64, delta: usize, k: usize) -> usize {
    let t = 4.0 * c * ((delta + 1) as f64).log2() * ((k + 1) as f64).log2();
    (t.ceil() as usize).max(1)
}

/// The layered reduction of a group tour instance for one start guess: the
/// (group-split) tour graph with terminals at the guess, the layered graph
/// with `Δ = nk - 1` and per-group check-in edges, and the check-in edge
/// groups carrying the visit constraints.
#[derive(Debug, Clone)]
pub struct TourReduction {
    pub tour_graph: Graph<f64>,
    pub groups: Vec<Vec<usize>>,
    pub lg: LayeredGraph<f64>,
    pub edge_groups: Vec<Vec<EdgeId>>,
    pub delta: usize,
}

/// Builds the reduction for a start vertex (which must lie in the last
/// group). Groups are split to be disjoint first.
pub fn build_tour_reduction(g: &Graph<f64>, start: usize) -> Result<TourReduction> {
    g.validate()?;
    let k = g.groups.len();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "tour reduction needs at least two groups".into(),
        ));
    }
    let (split, groups) = split_overlapping_groups(g);
    if !groups[k - 1].contains(&start) {
        return Err(Error::InvalidParameter(format!(
            "start vertex {start} is not in the last group"
        )));
    }
    let n = split.vertex_count();
    let delta = n * k - 1;
    let mut tour_graph = split.clone();
    tour_graph.set_terminals(start, start);
    tour_graph.tour = true;
    let mut checkins = Vec::new();
    for (gi, group) in groups.iter().enumerate().take(k - 1) {
        for &v in group {
            checkins.push((gi, v));
        }
    }
    let lg = layer_transform(&tour_graph, delta, &checkins)?;
    let mut edge_groups: Vec<Vec<EdgeId>> = vec![Vec::new(); k - 1];
    for (i, kind) in lg.kind.iter().enumerate() {
        if let LayeredEdgeKind::CheckIn { group } = kind {
            edge_groups[*group].push(EdgeId(i as u32));
        }
    }
    Ok(TourReduction {
        tour_graph,
        groups,
        lg,
        edge_groups,
        delta,
    })
}

/// Splits overlapping groups by copying shared vertices, joined to the
/// original by zero-cost edges in both directions.
pub fn split_overlapping_groups(g: &Graph<f64>) -> (Graph<f64>, Vec<Vec<usize>>) {
    let mut owner: Vec<Option<usize>> = vec![None; g.vertex_count()];
    let mut expanded = g.clone();
    let mut new_groups: Vec<Vec<usize>> = Vec::with_capacity(g.groups.len());
    let dim = g.cost_dim();
    for (gi, group) in g.groups.iter().enumerate() {
        let mut group = group.clone();
        group.sort_unstable();
        group.dedup();
        let mut members = Vec::with_capacity(group.len());
        for &v in &group {
            match owner[v] {
                None => {
                    owner[v] = Some(gi);
                    members.push(v);
                }
                Some(_) => {
                    let copy = expanded.vertex_count();
                    expanded.grow_vertices(1);
                    expanded.add_edge(v, copy, CostVector::zeros(dim));
                    expanded.add_edge(copy, v, CostVector::zeros(dim));
                    members.push(copy);
                }
            }
        }
        new_groups.push(members);
    }
    expanded.groups = new_groups.clone();
    (expanded, new_groups)
}

/// Group tour rounding: for each guessed start in the last group, build the
/// layered graph with `Δ = nk - 1` and check-in edge groups, solve the
/// relaxation with the visit constraints, round `T` times, and keep the
/// cheapest prefix of concatenated trials that covers every group.
pub fn round_group_atsp(
    g: &Graph<f64>,
    p: u32,
    c: f64,
    streams: &Streams,
    solver: SolveOptions,
) -> Result<GroupTourRun> {
    let a = width_from_locality(c)?;
    round_group_atsp_with(g, p, a, streams, solver, None, None, 1)
}

/// Inner tour pipeline with explicit width, optional degree override, an
/// optional externally supplied pseudo-expectation (skipping the solve), and
/// a number of independent runs of the trial schedule (one solve is shared;
/// the returned tour is the cheapest covering one across runs).
#[allow(clippy::too_many_arguments)]
pub fn round_group_atsp_with(
    g: &Graph<f64>,
    p: u32,
    a: usize,
    streams: &Streams,
    solver: SolveOptions,
    degree_override: Option<usize>,
    pe_override: Option<&PseudoExpectation<f64>>,
    runs: usize,
) -> Result<GroupTourRun> {
    g.validate()?;
    let k = g.groups.len();
    if k == 0 {
        return Err(Error::InvalidParameter("no groups given".into()));
    }
    let (g, groups) = split_overlapping_groups(g);
    let n = g.vertex_count();

    // Trivial single group: the empty tour at any member vertex covers it.
    if k == 1 {
        let start = groups[0][0];
        let mut tour_graph = g.clone();
        tour_graph.set_terminals(start, start);
        tour_graph.tour = true;
        let tour = Path::new(&tour_graph, Vec::new())?;
        return Ok(GroupTourRun {
            tour,
            covered: vec![true],
            coverage_ok: true,
            per_trial_frequency: vec![1.0],
            run_coverage_frequency: 1.0,
            runs: runs.max(1),
            trials_used: 0,
            t_schedule: 0,
            sos_objective: 0.0,
            start_vertex: start,
            degree: 0,
        });
    }

    let delta = n * k - 1;
    let degree = degree_override.unwrap_or_else(|| layered_degree(p, a, delta));
    let locality = 1.0 / (a as f64).ln().max(1.0);
    let t_schedule = tour_trial_schedule(locality, delta, k);

    let mut best: Option<GroupTourRun> = None;
    let mut best_key = (usize::MAX, f64::INFINITY); // (groups missed, cost)

    for (guess_idx, &start) in groups[k - 1].clone().iter().enumerate() {
        let reduction = build_tour_reduction(&g, start)?;
        let tour_graph = &reduction.tour_graph;
        let lg = &reduction.lg;

        let (pe_owned, sos_objective);
        match pe_override {
            Some(pe) => {
                pe_owned = pe.clone();
                sos_objective = f64::NAN;
            }
            None => {
                let problem = build_relaxation(&lg.graph, p, degree, &reduction.edge_groups)?;
                let result: SolveResult = solve(&problem, solver)?;
                if result.status == SolveStatus::InfeasibleSuspected {
                    continue;
                }
                sos_objective = result.objective;
                pe_owned = result.pe;
            }
        }

        let rounder = LayeredRounder {
            lg,
            pe: &pe_owned,
            a,
            tol: Tolerances::default(),
        };
        rounder.check_budget(p)?;

        let runs = runs.max(1);
        let mut visits = vec![0usize; k];
        visits[k - 1] = t_schedule * runs;
        let mut covered_runs = 0usize;
        let mut guess_best: Option<(Vec<bool>, Vec<EdgeId>, usize)> = None;
        let mut guess_best_key = (usize::MAX, f64::INFINITY);
        for run_idx in 0..runs {
            let mut covered = vec![false; k];
            covered[k - 1] = true; // start vertex lies in the last group
            let mut concat: Vec<EdgeId> = Vec::new();
            let mut trials_used = 0usize;
            for trial in 0..t_schedule {
                let mut rng = streams.substream(
                    0xa7 + guess_idx as u64,
                    (run_idx * t_schedule + trial) as u64,
                );
                let layered_path = rounder.find_path(&mut rng)?;
                let visited = lg.groups_visited(&layered_path.edges);
                for &gi in &visited {
                    visits[gi] += 1;
                }
                if !covered.iter().all(|&x| x) {
                    concat.extend(lg.walk_of_path(&layered_path.edges));
                    trials_used = trial + 1;
                    for &gi in &visited {
                        covered[gi] = true;
                    }
                }
            }
            let ok = covered.iter().all(|&x| x);
            if ok {
                covered_runs += 1;
            }
            let missed = covered.iter().filter(|&&x| !x).count();
            let cost: f64 = {
                let mut acc = CostVector::zeros(g.cost_dim());
                for &e in &concat {
                    acc.add_assign(&g.edge(e).cost);
                }
                acc.lp(p)
            };
            if (missed, cost) < guess_best_key {
                guess_best_key = (missed, cost);
                guess_best = Some((covered, concat, trials_used));
            }
        }
        let (covered_best, concat_best, trials_used) = guess_best.expect("at least one run");
        let tour = Path::new(tour_graph, concat_best)?;
        let coverage_ok = covered_best.iter().all(|&x| x);
        let missed = covered_best.iter().filter(|&&x| !x).count();
        let cost = tour.lp(p);
        let run = GroupTourRun {
            tour,
            covered: covered_best,
            coverage_ok,
            per_trial_frequency: visits
                .iter()
                .map(|&v| v as f64 / (t_schedule * runs) as f64)
                .collect(),
            run_coverage_frequency: covered_runs as f64 / runs as f64,
            runs,
            trials_used,
            t_schedule,
            sos_objective,
            start_vertex: start,
            degree,
        };
        let key = (missed, cost);
        if key < best_key {
            best_key = key;
            best = Some(run);
        }
    }
    best.ok_or_else(|| Error::Solver("every start guess was infeasible".into()))
}

#[derive(Debug, Clone)]
pub struct GroupTreeRun {
    /// Chosen undirected edges (ids into the undirected input graph).
    pub tree_edges: Vec<EdgeId>,
    pub tree_cost: CostVector<f64>,
    pub tour: GroupTourRun,
}

/// Directed double cover of an undirected instance: undirected edge `k`
/// becomes arcs `2k` and `2k+1` of equal cost.
pub fn bidirect(g: &Graph<f64>) -> Result<Graph<f64>> {
    if !g.undirected {
        return Err(Error::InvalidParameter(
            "group tree input must be an undirected instance".into(),
        ));
    }
    let mut directed = Graph::new(g.vertex_count(), g.cost_dim(), g.source(), g.sink());
    directed.groups = g.groups.clone();
    directed.tour = true;
    for (_, e) in g.edges() {
        directed.add_edge(e.tail, e.head, e.cost.clone());
        directed.add_edge(e.head, e.tail, e.cost.clone());
    }
    Ok(directed)
}

/// Folds a tour in the double cover back to undirected edges, dropping
/// directions and cycle-closing edges (union-find in traversal order). The
/// result is acyclic and spans everything the tour visited at no greater
/// cost.
pub fn fold_tour_to_tree(
    g: &Graph<f64>,
    tour_edges: &[EdgeId],
) -> (Vec<EdgeId>, CostVector<f64>) {
    let mut parent: Vec<usize> = (0..g.vertex_count()).collect();
    fn find(parent: &mut Vec<usize>, v: usize) -> usize {
        if parent[v] != v {
            let root = find(parent, parent[v]);
            parent[v] = root;
        }
        parent[v]
    }
    let mut tree_edges = Vec::new();
    let mut tree_cost = CostVector::zeros(g.cost_dim());
    for &arc in tour_edges {
        if arc.index() >= 2 * g.edge_count() {
            // Zero-cost gadget arc introduced by group splitting.
            continue;
        }
        let base = EdgeId(arc.0 / 2);
        let e = g.edge(base);
        let (ru, rv) = (find(&mut parent, e.tail), find(&mut parent, e.head));
        if ru != rv {
            parent[ru] = rv;
            tree_edges.push(base);
            tree_cost.add_assign(&e.cost);
        }
    }
    tree_edges.sort_unstable();
    tree_edges.dedup();
    (tree_edges, tree_cost)
}

/// Group tree via the tour reduction: bidirect the undirected graph, find a
/// group tour, then drop edge directions and cycle-closing edges.
pub fn steiner_from_atsp(
    g: &Graph<f64>,
    p: u32,
    c: f64,
    streams: &Streams,
    solver: SolveOptions,
) -> Result<GroupTreeRun> {
    let a = width_from_locality(c)?;
    steiner_from_atsp_with(g, p, a, streams, solver, None, None, 1)
}

/// Group tree pipeline with the same overrides as the tour pipeline.
#[allow(clippy::too_many_arguments)]
pub fn steiner_from_atsp_with(
    g: &Graph<f64>,
    p: u32,
    a: usize,
    streams: &Streams,
    solver: SolveOptions,
    degree_override: Option<usize>,
    pe_override: Option<&PseudoExpectation<f64>>,
    runs: usize,
) -> Result<GroupTreeRun> {
    let directed = bidirect(g)?;
    let tour = round_group_atsp_with(
        &directed,
        p,
        a,
        streams,
        solver,
        degree_override,
        pe_override,
        runs,
    )?;
    let (tree_edges, tree_cost) = fold_tour_to_tree(g, &tour.tour.edges);
    Ok(GroupTreeRun {
        tree_edges,
        tree_cost,
        tour,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_series_parallel, SpSpec};

    fn h_block() -> SpSpec<f64> {
        SpSpec::Parallel(vec![SpSpec::scalar_edge(1.0), SpSpec::scalar_edge(0.0)])
    }

    fn tightness_pe(
        g: &Graph<f64>,
        n: usize,
    ) -> PseudoExpectation<f64> {
        // Uniform distribution over the N single-unit-cost paths.
        let mut paths = Vec::new();
        for i in 0..n {
            let mut edges = Vec::new();
            for block in 0..n {
                let pick = if block == i { 0 } else { 1 };
                edges.push(EdgeId((2 * block + pick) as u32));
            }
            paths.push(edges);
        }
        let w = 1.0 / n as f64;
        PseudoExpectation::from_distribution(g, &paths, &vec![w; n], 4).unwrap()
    }

    #[test]
    fn single_path_is_returned_with_probability_one() {
        let spec = SpSpec::Series(vec![SpSpec::scalar_edge(1.0), SpSpec::scalar_edge(2.0)]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let pe = PseudoExpectation::from_distribution(
            &g,
            &[vec![EdgeId(0), EdgeId(1)]],
            &[1.0],
            4,
        )
        .unwrap();
        let streams = Streams::new(5);
        for trial in 0..10 {
            let mut rng = streams.stream(trial);
            let path = round_series_parallel(&g, &pe, &Tolerances::default(), &mut rng).unwrap();
            assert_eq!(path.edges, vec![EdgeId(0), EdgeId(1)]);
            assert_eq!(path.lp(2), 3.0);
        }
    }

    #[test]
    fn empirical_marginals_match_moments() {
        let n = 3;
        let spec = SpSpec::Series((0..n).map(|_| h_block()).collect());
        let (g, _) = build_series_parallel(&spec).unwrap();
        let pe = tightness_pe(&g, n);
        let streams = Streams::new(42);
        let runs = 60_000usize;
        let mut counts = vec![0usize; g.edge_count()];
        let mut rng = streams.stream(1);
        for _ in 0..runs {
            let path = round_series_parallel(&g, &pe, &Tolerances::default(), &mut rng).unwrap();
            for e in path.edges {
                counts[e.index()] += 1;
            }
        }
        for e in g.edge_ids() {
            let want = pe.moment(&Monomial::var(e)).unwrap();
            let got = counts[e.index()] as f64 / runs as f64;
            let stderr = (want * (1.0 - want) / runs as f64).sqrt().max(1e-9);
            assert!(
                (got - want).abs() <= 3.5 * stderr,
                "edge {e}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn trace_replays_to_the_same_path() {
        let n = 4;
        let spec = SpSpec::Series((0..n).map(|_| h_block()).collect());
        let (g, _) = build_series_parallel(&spec).unwrap();
        let pe = tightness_pe(&g, n);
        let streams = Streams::new(9);
        let mut rng = streams.stream(2);
        let mut trace = RoundingTrace {
            seed: 9,
            stream: 2,
            ..Default::default()
        };
        let path =
            round_series_parallel_traced(&g, &pe, &Tolerances::default(), &mut rng, &mut trace)
                .unwrap();
        let replayed = replay_walk(&g, &pe, &trace).unwrap();
        assert_eq!(path.edges, replayed.edges);
    }

    #[test]
    fn pivot_formula_matches_hand_computation() {
        // y=1, z=10, a=3: ceil(9 i / 4) = 3, 5, 7 -> layers 4, 6, 8.
        assert_eq!(pivot_layers(1, 10, 3), vec![4, 6, 8]);
        // Minimal recursive case z - y = a: pivots fill y+1..=z.
        assert_eq!(pivot_layers(2, 5, 3), vec![3, 4, 5]);
    }

    #[test]
    fn required_budget_saturates_at_base_case() {
        assert_eq!(required_budget(3, 8), 3);
        assert_eq!(required_budget(8, 8), 8);
        // One recursion level: a pivots plus the worst gap.
        let b = required_budget(10, 3);
        assert!(b > 3 && b <= 10, "budget {b}");
    }

    #[test]
    fn layered_single_path_graph_rounds_to_it() {
        let mut g = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(2.0));
        let lg = to_layered(&g).unwrap();
        let problem = build_relaxation(&lg.graph, 2, 8, &[]).unwrap();
        let result = solve(&problem, SolveOptions::default()).unwrap();
        let rounder = LayeredRounder {
            lg: &lg,
            pe: &result.pe,
            a: 3,
            tol: Tolerances::default(),
        };
        rounder.check_budget(2).unwrap();
        let streams = Streams::new(3);
        let mut rng = streams.stream(0);
        let path = rounder.find_path(&mut rng).unwrap();
        let walk = lg.walk_of_path(&path.edges);
        assert_eq!(walk, vec![EdgeId(0), EdgeId(1)]);
    }

    #[test]
    fn pipeline_on_two_vertex_graph() {
        // Single layer: the degenerate log factor must still leave room for
        // the one sampling step.
        let mut g = Graph::new(2, 2, 0, 1);
        g.add_edge(0, 1, CostVector::new(vec![3.0, 4.0]));
        g.add_edge(0, 1, CostVector::new(vec![5.0, 0.0]));
        let streams = Streams::new(31);
        let run = solve_lp_shortest_path(&g, 2, 0.45, 4, &streams, SolveOptions::default())
            .unwrap();
        assert!((run.best_cost - 5.0).abs() < 1e-9);
        assert!((run.sos_objective - 25.0).abs() < 1e-3);
    }

    #[test]
    fn signed_costs_are_rejected_by_relaxation_and_rounding() {
        let mut g = Graph::new(2, 1, 0, 1);
        g.signed = true;
        g.add_edge(0, 1, CostVector::scalar(-1.0));
        assert!(build_relaxation(&g, 1, 2, &[]).is_err());
        let pe = PseudoExpectation::from_distribution(&g, &[vec![EdgeId(0)]], &[1.0], 2)
            .unwrap();
        let streams = Streams::new(0);
        let mut rng = streams.stream(0);
        assert!(round_series_parallel(&g, &pe, &Tolerances::default(), &mut rng).is_err());
    }

    #[test]
    fn pipeline_on_single_path_matches_opt() {
        let mut g = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(2.0));
        let streams = Streams::new(17);
        let run = solve_lp_shortest_path(&g, 2, 0.45, 3, &streams, SolveOptions::default())
            .unwrap();
        assert!((run.best_cost - 3.0).abs() < 1e-9);
        assert!((run.sos_objective - 9.0).abs() < 1e-3);
    }

    #[test]
    fn diamond_pipeline_hits_sqrt_two() {
        // Two disjoint 2-edge paths with orthogonal basis costs.
        let mut g = Graph::new(4, 4, 0, 3);
        g.add_edge(0, 1, CostVector::basis(4, 0, 1.0));
        g.add_edge(1, 3, CostVector::basis(4, 1, 1.0));
        g.add_edge(0, 2, CostVector::basis(4, 2, 1.0));
        g.add_edge(2, 3, CostVector::basis(4, 3, 1.0));
        let streams = Streams::new(23);
        let run = solve_lp_shortest_path(&g, 2, 0.45, 4, &streams, SolveOptions::default())
            .unwrap();
        assert!((run.best_cost - 2.0f64.sqrt()).abs() < 1e-9);
        // Any feasible moment assignment scores exactly 2 on this instance.
        assert!((run.sos_objective - 2.0).abs() < 1e-3);
    }

    #[test]
    fn group_tour_single_group_is_trivial() {
        let mut g = Graph::new(2, 1, 0, 0);
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 0, CostVector::scalar(1.0));
        g.groups = vec![vec![0]];
        let streams = Streams::new(1);
        let run = round_group_atsp(&g, 1, 0.45, &streams, SolveOptions::default()).unwrap();
        assert!(run.coverage_ok);
        assert!(run.tour.is_empty());
    }

    #[test]
    fn group_tour_two_vertices() {
        let mut g = Graph::new(2, 1, 0, 0);
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 0, CostVector::scalar(1.0));
        g.groups = vec![vec![1], vec![0]];
        let streams = Streams::new(7);
        let run = round_group_atsp(&g, 1, 0.45, &streams, SolveOptions::default()).unwrap();
        assert!(run.coverage_ok, "covered: {:?}", run.covered);
        // Tour must traverse to vertex 1 and back: cost 2.
        assert!((run.tour.lp(1) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn solved_tour_relaxation_satisfies_group_constraints() {
        // The solved functional satisfies the degree-closed visit
        // constraints: residuals of (h_R - 1) and (h_R^2 - 1) against every
        // admissible monomial vanish at solver precision.
        let mut g = Graph::new(2, 1, 0, 0);
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 0, CostVector::scalar(1.0));
        g.groups = vec![vec![1], vec![0]];
        let reduction = build_tour_reduction(&g, 0).unwrap();
        let degree = layered_degree(1, 4, reduction.delta);
        let problem =
            build_relaxation(&reduction.lg.graph, 1, degree, &reduction.edge_groups).unwrap();
        let result = solve(&problem, SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged);

        let mut constraints =
            crate::poly::flow_constraints(&reduction.lg.graph).unwrap();
        for group in &reduction.edge_groups {
            let h = crate::poly::group_indicator::<f64>(group).unwrap();
            let mut minus_one = h.clone();
            minus_one.add_term(Monomial::unit(), -1.0);
            constraints.push(minus_one);
            let mut sq = h.multiply(&h, degree).unwrap();
            sq.add_term(Monomial::unit(), -1.0);
            constraints.push(sq);
        }
        let report = result.pe.check_feasibility(&constraints, 1e-7).unwrap();
        assert!(report.feasible(), "{:?}", report.violations);
    }

    #[test]
    fn coverage_failure_returns_best_partial_tour() {
        // A pseudo-expectation supported on non-covering tours can never
        // check in; the pipeline reports the failure instead of erroring.
        let mut g = Graph::new(2, 1, 0, 0);
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 0, CostVector::scalar(1.0));
        g.groups = vec![vec![1], vec![0]];
        let reduction = build_tour_reduction(&g, 0).unwrap();
        let a = reduction.delta + 1;
        let degree = 2 * (1 + required_budget(reduction.delta, a));
        // Tour that passes through vertex 1 but never takes its check-in.
        let program = vec![
            crate::graph::TourStep::Move(EdgeId(0)),
            crate::graph::TourStep::Move(EdgeId(1)),
        ];
        let path = reduction
            .lg
            .path_of_program(&program, &reduction.tour_graph)
            .unwrap();
        let pe = PseudoExpectation::from_distribution(
            &reduction.lg.graph,
            &[path],
            &[1.0],
            degree,
        )
        .unwrap();
        let streams = Streams::new(2);
        let run = round_group_atsp_with(
            &g,
            1,
            a,
            &streams,
            SolveOptions::default(),
            Some(degree),
            Some(&pe),
            5,
        )
        .unwrap();
        assert!(!run.coverage_ok);
        assert_eq!(run.covered, vec![false, true]);
        assert_eq!(run.run_coverage_frequency, 0.0);
    }

    #[test]
    fn steiner_on_single_undirected_edge() {
        // One undirected edge {u, v}, singleton groups at both ends: the tree
        // is the edge, the tour crosses it twice.
        let mut g = Graph::new(2, 1, 0, 0);
        g.undirected = true;
        g.tour = true;
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.groups = vec![vec![0], vec![1]];
        let streams = Streams::new(13);
        let run = steiner_from_atsp(&g, 1, 0.45, &streams, SolveOptions::default()).unwrap();
        assert_eq!(run.tree_edges, vec![EdgeId(0)]);
        assert_eq!(run.tree_cost.l1(), 1.0);
        assert!(run.tour.coverage_ok);
        assert!((run.tour.tour.lp(1) - 2.0).abs() < 1e-9);
    }
}
