//! Exact baselines the guarantees are measured against: brute-force optima,
//! the scalarized shortest-path baseline, a verbatim transcription of the
//! label-setting heuristic, and exact enumeration of the rounding laws.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::graph::{Adjacency, EdgeId, Graph, LayeredGraph};
use crate::poly::Monomial;
use crate::pseudoexp::PseudoExpectation;
use crate::rounding::{pivot_layers, Path};
use crate::scalar::Scalar;
use crate::Result;

/// Default cap on enumerated path counts.
pub const PATH_LIMIT: usize = 100_000;

fn nonneg<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else {
        v
    }
}

/// All simple source-sink paths, DFS order, failing fast on oversized
/// instances. In a DAG every walk is simple, so this enumerates all paths.
pub fn enumerate_paths<T: Scalar>(g: &Graph<T>, limit: usize) -> Result<Vec<Vec<EdgeId>>> {
    enumerate_simple_paths(g, g.source(), g.sink(), limit)
}

/// Simple paths between two vertices (visited-vertex DFS).
pub fn enumerate_simple_paths<T: Scalar>(
    g: &Graph<T>,
    from: usize,
    to: usize,
    limit: usize,
) -> Result<Vec<Vec<EdgeId>>> {
    let adj = Adjacency::new(g);
    let mut out = Vec::new();
    let mut visited = vec![false; g.vertex_count()];
    let mut current = Vec::new();
    fn dfs<T: Scalar>(
        g: &Graph<T>,
        adj: &Adjacency,
        at: usize,
        to: usize,
        visited: &mut Vec<bool>,
        current: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
        limit: usize,
    ) -> Result<()> {
        if at == to && !current.is_empty() {
            if out.len() >= limit {
                return Err(Error::SizeLimit {
                    what: "path enumeration".into(),
                    size: out.len() + 1,
                    limit,
                });
            }
            out.push(current.clone());
            return Ok(());
        }
        visited[at] = true;
        for &e in adj.out(at) {
            let head = g.edge(e).head;
            if visited[head] {
                continue;
            }
            current.push(e);
            dfs(g, adj, head, to, visited, current, out, limit)?;
            current.pop();
        }
        visited[at] = false;
        Ok(())
    }
    dfs(g, &adj, from, to, &mut visited, &mut current, &mut out, limit)?;
    Ok(out)
}

/// Minimum ℓp-cost source-sink path by exhaustive enumeration; ties broken by
/// the lexicographically smallest edge-id sequence. Comparisons use the exact
/// p-th power of the norm.
pub fn brute_force_opt<T: Scalar>(g: &Graph<T>, p: u32) -> Result<(Path<T>, f64)> {
    let paths = enumerate_paths(g, PATH_LIMIT)?;
    if paths.is_empty() {
        return Err(Error::Structure("no source-sink path exists".into()));
    }
    let mut best: Option<(Path<T>, T)> = None;
    for edges in paths {
        let path = Path::new(g, edges)?;
        let pow = path.lp_pow(p);
        let better = match &best {
            None => true,
            Some((bp, bpow)) => pow < *bpow || (pow == *bpow && path.edges < bp.edges),
        };
        if better {
            best = Some((path, pow));
        }
    }
    let (path, _) = best.unwrap();
    let cost = path.lp(p);
    Ok((path, cost))
}

/// Minimum ℓ∞-cost source-sink path by exhaustive enumeration.
pub fn brute_force_opt_linf<T: Scalar>(g: &Graph<T>) -> Result<(Path<T>, T)> {
    let paths = enumerate_paths(g, PATH_LIMIT)?;
    if paths.is_empty() {
        return Err(Error::Structure("no source-sink path exists".into()));
    }
    let mut best: Option<(Path<T>, T)> = None;
    for edges in paths {
        let path = Path::new(g, edges)?;
        let v = path.linf();
        let better = match &best {
            None => true,
            Some((bp, bv)) => v < *bv || (v == *bv && path.edges < bp.edges),
        };
        if better {
            best = Some((path, v));
        }
    }
    Ok(best.unwrap())
}

/// Classical shortest path under the scalarized costs `‖c_e‖_1`, by a
/// linear-scan label-setting loop with smallest-id tie-breaking. Exact in the
/// scalar type.
pub fn l1_baseline<T: Scalar>(g: &Graph<T>) -> Result<Path<T>> {
    let adj = Adjacency::new(g);
    let n = g.vertex_count();
    let mut dist: Vec<Option<T>> = vec![None; n];
    let mut parent: Vec<Option<EdgeId>> = vec![None; n];
    let mut done = vec![false; n];
    dist[g.source()] = Some(T::zero());
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] || dist[v].is_none() {
                continue;
            }
            match pick {
                None => pick = Some(v),
                Some(u) => {
                    if dist[v].as_ref().unwrap() < dist[u].as_ref().unwrap() {
                        pick = Some(v);
                    }
                }
            }
        }
        let Some(v) = pick else { break };
        done[v] = true;
        let base = dist[v].clone().unwrap();
        for &e in adj.out(v) {
            let head = g.edge(e).head;
            if done[head] {
                continue;
            }
            let cand = base.clone() + g.edge(e).cost.l1();
            let better = match &dist[head] {
                None => true,
                Some(cur) => cand < *cur,
            };
            if better {
                dist[head] = Some(cand);
                parent[head] = Some(e);
            }
        }
    }
    if dist[g.sink()].is_none() {
        return Err(Error::Structure("sink unreachable".into()));
    }
    let mut edges = Vec::new();
    let mut at = g.sink();
    while at != g.source() {
        let e = parent[at].expect("parent chain");
        edges.push(e);
        at = g.edge(e).tail;
    }
    edges.reverse();
    Path::new(g, edges)
}

/// Verbatim transcription of the label-setting heuristic for vector costs:
/// vertices leave the queue in order of their current label, labels compare
/// full-path ℓp costs, and settled labels are never revisited. Comparisons
/// use exact p-th powers. The settled-too-early behavior is intentional; the
/// counterexample family exploits it.
pub fn lp_dijkstra<T: Scalar>(g: &Graph<T>, p: u32) -> Result<Path<T>> {
    let adj = Adjacency::new(g);
    let n = g.vertex_count();
    let mut path: Vec<Vec<EdgeId>> = vec![Vec::new(); n];
    let mut distance: Vec<Option<T>> = vec![None; n];
    distance[g.source()] = Some(T::zero());
    let mut in_queue = vec![true; n];
    for _ in 0..n {
        // argmin over the queue, infinity last, smallest id on ties.
        let mut v: Option<usize> = None;
        for u in 0..n {
            if !in_queue[u] {
                continue;
            }
            v = match v {
                None => Some(u),
                Some(w) => match (&distance[u], &distance[w]) {
                    (Some(du), Some(dw)) => {
                        if du < dw {
                            Some(u)
                        } else {
                            Some(w)
                        }
                    }
                    (Some(_), None) => Some(u),
                    _ => Some(w),
                },
            };
        }
        let v = v.expect("queue not empty");
        if distance[v].is_some() {
            for &e in adj.out(v) {
                let u = g.edge(e).head;
                let mut cand = path[v].clone();
                cand.push(e);
                let mut cost = crate::graph::CostVector::zeros(g.cost_dim());
                for &ce in &cand {
                    cost.add_assign(&g.edge(ce).cost);
                }
                let cand_pow = cost.lp_pow(p);
                let better = match &distance[u] {
                    None => true,
                    Some(cur) => cand_pow < *cur,
                };
                if better {
                    path[u] = cand;
                    distance[u] = Some(cand_pow);
                }
            }
        }
        in_queue[v] = false;
    }
    if distance[g.sink()].is_none() {
        return Err(Error::Structure("sink never labeled".into()));
    }
    Path::new(g, path[g.sink()].clone())
}

/// Brute-force group tour: the cheapest closed walk (length at most
/// `max_len`) from any vertex of the last group that visits every group.
/// Explores the walk tree with non-negative-cost pruning at the start vertex.
pub fn brute_force_group_tour<T: Scalar>(
    g: &Graph<T>,
    p: u32,
    max_len: usize,
    limit: usize,
) -> Result<Option<(Vec<EdgeId>, f64)>> {
    let k = g.groups.len();
    if k == 0 {
        return Err(Error::InvalidParameter("no groups".into()));
    }
    let adj = Adjacency::new(g);
    let group_of: Vec<Vec<usize>> = (0..g.vertex_count())
        .map(|v| {
            g.groups
                .iter()
                .enumerate()
                .filter(|(_, grp)| grp.contains(&v))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let full: u32 = (1u32 << k) - 1;
    let mut best: Option<(Vec<EdgeId>, T)> = None;
    let mut explored = 0usize;

    #[allow(clippy::too_many_arguments)]
    fn dfs<T: Scalar>(
        g: &Graph<T>,
        adj: &Adjacency,
        group_of: &[Vec<usize>],
        start: usize,
        at: usize,
        mask: u32,
        full: u32,
        walk: &mut Vec<EdgeId>,
        cost: &mut crate::graph::CostVector<T>,
        p: u32,
        max_len: usize,
        limit: usize,
        explored: &mut usize,
        best: &mut Option<(Vec<EdgeId>, T)>,
    ) -> Result<()> {
        *explored += 1;
        if *explored > limit {
            return Err(Error::SizeLimit {
                what: "tour enumeration".into(),
                size: *explored,
                limit,
            });
        }
        if at == start && mask == full && !walk.is_empty() {
            let pow = cost.lp_pow(p);
            let better = match best {
                None => true,
                Some((bw, bp)) => pow < *bp || (pow == *bp && walk.as_slice() < bw.as_slice()),
            };
            if better {
                *best = Some((walk.clone(), pow));
            }
            return Ok(()); // extending a covering closed walk never helps
        }
        if walk.len() == max_len {
            return Ok(());
        }
        for &e in adj.out(at) {
            let head = g.edge(e).head;
            let mut next_mask = mask;
            for &gi in &group_of[head] {
                next_mask |= 1 << gi;
            }
            walk.push(e);
            cost.add_assign(&g.edge(e).cost);
            dfs(
                g, adj, group_of, start, head, next_mask, full, walk, cost, p, max_len, limit,
                explored, best,
            )?;
            // Subtract the edge cost back out.
            for (acc, c) in cost.entries.iter_mut().zip(&g.edge(e).cost.entries) {
                *acc -= c.clone();
            }
            walk.pop();
        }
        Ok(())
    }

    for &start in &g.groups[k - 1] {
        let mut mask = 0u32;
        for &gi in &group_of[start] {
            mask |= 1 << gi;
        }
        if mask == full {
            // The start alone covers everything; the empty tour is optimal.
            let zero = crate::graph::CostVector::<T>::zeros(g.cost_dim()).lp_pow(p);
            if best.is_none() {
                best = Some((Vec::new(), zero));
            }
            continue;
        }
        let mut walk = Vec::new();
        let mut cost = crate::graph::CostVector::zeros(g.cost_dim());
        dfs(
            g,
            &adj,
            &group_of,
            start,
            start,
            mask,
            full,
            &mut walk,
            &mut cost,
            p,
            max_len,
            limit,
            &mut explored,
            &mut best,
        )?;
    }
    Ok(best.map(|(walk, pow)| {
        let cost = pow.to_f64().powf(1.0 / p as f64);
        (walk, cost)
    }))
}

// ---------------------------------------------------------------------------
// Exact rounding laws.
// ---------------------------------------------------------------------------

/// Exact distribution of the sequential walk sampler: every source-sink path
/// with positive probability, with its probability, by enumerating the
/// decision tree (no sampling).
pub fn exact_rounding_law<T: Scalar>(
    g: &Graph<T>,
    pe: &PseudoExpectation<T>,
    limit: usize,
) -> Result<Vec<(Vec<EdgeId>, T)>> {
    let adj = Adjacency::new(g);
    let mut out: Vec<(Vec<EdgeId>, T)> = Vec::new();
    let mut stack: Vec<(usize, Vec<EdgeId>, T)> =
        vec![(g.source(), Vec::new(), T::one())];
    while let Some((at, prefix, prob)) = stack.pop() {
        if at == g.sink() {
            out.push((prefix, prob));
            if out.len() > limit {
                return Err(Error::SizeLimit {
                    what: "rounding law".into(),
                    size: out.len(),
                    limit,
                });
            }
            continue;
        }
        let outs = adj.out(at);
        let mut mass = T::zero();
        let mut weights = Vec::with_capacity(outs.len());
        for &e in outs {
            let w = nonneg(pe.moment(&Monomial::var(e))?);
            mass += w.clone();
            weights.push(w);
        }
        if mass.to_f64() <= 1e-12 {
            // A dead end reached on solver noise carries negligible mass and
            // is dropped; reaching one with real probability is an error.
            if prob.to_f64() <= 1e-9 {
                continue;
            }
            return Err(Error::CorruptPseudoExpectation(format!(
                "vertex {at} reached with probability {:.3e} but zero outgoing mass",
                prob.to_f64()
            )));
        }
        for (&e, w) in outs.iter().zip(weights) {
            if w == T::zero() {
                continue;
            }
            let mut next = prefix.clone();
            next.push(e);
            stack.push((g.edge(e).head, next, prob.clone() * w / mass.clone()));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Exact per-edge marginals of the walk sampler, `Prob[e ∈ P]`, by forward
/// dynamic programming over the decision chain (linear, no enumeration).
pub fn walk_marginals<T: Scalar>(g: &Graph<T>, pe: &PseudoExpectation<T>) -> Result<Vec<T>> {
    let order = g.topo_order()?;
    let adj = Adjacency::new(g);
    let mut reach = vec![T::zero(); g.vertex_count()];
    reach[g.source()] = T::one();
    let mut marginal = vec![T::zero(); g.edge_count()];
    for &u in &order {
        if u == g.sink() || reach[u] == T::zero() {
            continue;
        }
        let outs = adj.out(u);
        let mut mass = T::zero();
        let mut weights = Vec::with_capacity(outs.len());
        for &e in outs {
            let w = nonneg(pe.moment(&Monomial::var(e))?);
            mass += w.clone();
            weights.push(w);
        }
        if mass.to_f64() <= 1e-12 {
            if reach[u].to_f64() > 1e-9 {
                return Err(Error::CorruptPseudoExpectation(format!(
                    "vertex {u} reachable with zero outgoing mass"
                )));
            }
            continue;
        }
        for (&e, w) in outs.iter().zip(weights) {
            let share = reach[u].clone() * w / mass.clone();
            marginal[e.index()] = share.clone();
            let head = g.edge(e).head;
            reach[head] += share;
        }
    }
    Ok(marginal)
}

/// Exact moments `E[X^j]`, j = 0..=r, of the additive weight `X = Σ a_e [e∈P]`
/// accumulated along the sampled walk, by a forward moment recurrence.
pub fn walk_cost_moments<T: Scalar>(
    g: &Graph<T>,
    pe: &PseudoExpectation<T>,
    edge_weight: &[T],
    r: u32,
) -> Result<Vec<T>> {
    let order = g.topo_order()?;
    let adj = Adjacency::new(g);
    let r = r as usize;
    let binom = binomial_table(r);
    // moments[u][j] = E[ 1{walk reaches u} * X_prefix^j ].
    let mut moments = vec![vec![T::zero(); r + 1]; g.vertex_count()];
    moments[g.source()][0] = T::one();
    for &u in &order {
        if u == g.sink() {
            continue;
        }
        if moments[u][0] == T::zero() {
            continue;
        }
        let outs = adj.out(u);
        let mut mass = T::zero();
        let mut weights = Vec::with_capacity(outs.len());
        for &e in outs {
            let w = nonneg(pe.moment(&Monomial::var(e))?);
            mass += w.clone();
            weights.push(w);
        }
        if mass.to_f64() <= 1e-12 {
            if moments[u][0].to_f64() > 1e-9 {
                return Err(Error::CorruptPseudoExpectation(format!(
                    "vertex {u} reachable with zero outgoing mass"
                )));
            }
            continue;
        }
        let source_moments = moments[u].clone();
        for (&e, w) in outs.iter().zip(weights) {
            if w == T::zero() {
                continue;
            }
            let q = w / mass.clone();
            let a = edge_weight[e.index()].clone();
            let head = g.edge(e).head;
            // a^k powers reused across j.
            let mut apow = vec![T::one(); r + 1];
            for k in 1..=r {
                apow[k] = apow[k - 1].clone() * a.clone();
            }
            for j in 0..=r {
                let mut acc = T::zero();
                for i in 0..=j {
                    let term = T::from_int(binom[j][i] as i64)
                        * apow[j - i].clone()
                        * source_moments[i].clone();
                    acc += term;
                }
                moments[head][j] += q.clone() * acc;
            }
        }
    }
    Ok(moments[g.sink()].clone())
}

fn binomial_table(r: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; r + 1]; r + 1];
    for j in 0..=r {
        c[j][0] = 1;
        for i in 1..=j {
            c[j][i] = c[j - 1][i - 1] + if i <= j - 1 { c[j - 1][i] } else { 0 };
        }
    }
    c
}

/// Exact `E[cost_lp(P)^p]` of the walk sampler under vector costs.
pub fn walk_lp_power_mean<T: Scalar>(
    g: &Graph<T>,
    pe: &PseudoExpectation<T>,
    p: u32,
) -> Result<T> {
    let mut total = T::zero();
    for i in 0..g.cost_dim() {
        let weights: Vec<T> = g
            .edge_ids()
            .map(|e| g.edge(e).cost.entries[i].clone())
            .collect();
        let m = walk_cost_moments(g, pe, &weights, p)?;
        total += m[p as usize].clone();
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Exact law of the layered recursive sampler.
// ---------------------------------------------------------------------------

/// Joint law of the edge-sampling procedure over the given layers (visited in
/// the given order) under a product conditioning set. Entries carry the
/// sampled edges in visit order.
pub fn sampling_law<T: Scalar>(
    lg: &LayeredGraph<T>,
    pe: &PseudoExpectation<T>,
    layers: &[usize],
    conditioning: &[EdgeId],
    limit: usize,
) -> Result<Vec<(Vec<EdgeId>, T)>> {
    let mut states: Vec<(Vec<EdgeId>, T)> = vec![(Vec::new(), T::one())];
    for &layer in layers {
        let mut next = Vec::new();
        for (chosen, prob) in &states {
            let mut cond: Vec<EdgeId> = conditioning.to_vec();
            cond.extend_from_slice(chosen);
            let cond_mono = Monomial::from_edges(cond);
            let denom = pe.moment(&cond_mono)?;
            if denom.to_f64() <= 1e-15 {
                return Err(Error::ConditionOnNull {
                    what: format!("{chosen:?}"),
                    mass: denom.to_f64(),
                });
            }
            for &e in &lg.edges_in_layer[layer - 1] {
                let num = nonneg(pe.moment(&cond_mono.union(&Monomial::var(e)))?);
                if num == T::zero() {
                    continue;
                }
                let mut picked = chosen.clone();
                picked.push(e);
                next.push((picked, prob.clone() * num / denom.clone()));
                if next.len() > limit {
                    return Err(Error::SizeLimit {
                        what: "sampling law".into(),
                        size: next.len(),
                        limit,
                    });
                }
            }
        }
        states = next;
    }
    Ok(states)
}

/// Exact distribution over full layered paths produced by the recursive
/// finder with base-case width `a`, by enumerating every conditioning chain.
pub fn exact_layered_law<T: Scalar>(
    lg: &LayeredGraph<T>,
    pe: &PseudoExpectation<T>,
    a: usize,
    limit: usize,
) -> Result<Vec<(Vec<EdgeId>, T)>> {
    let mut law = segment_law(lg, pe, a, 1, lg.delta, &[], limit)?;
    for (edges, _) in &mut law {
        edges.sort_by_key(|&e| lg.layer_of_edge(e));
    }
    let mut merged: BTreeMap<Vec<EdgeId>, T> = BTreeMap::new();
    for (edges, prob) in law {
        match merged.entry(edges) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(prob);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + prob;
                *o.get_mut() = sum;
            }
        }
    }
    Ok(merged.into_iter().collect())
}

fn segment_law<T: Scalar>(
    lg: &LayeredGraph<T>,
    pe: &PseudoExpectation<T>,
    a: usize,
    y: usize,
    z: usize,
    conditioning: &[EdgeId],
    limit: usize,
) -> Result<Vec<(Vec<EdgeId>, T)>> {
    if y > z {
        return Ok(vec![(Vec::new(), T::one())]);
    }
    let len = z - y + 1;
    if len <= a {
        let layers: Vec<usize> = (y..=z).collect();
        return sampling_law(lg, pe, &layers, conditioning, limit);
    }
    let pivots = pivot_layers(y, z, a);
    let pivot_law = sampling_law(lg, pe, &pivots, conditioning, limit)?;
    let mut out: Vec<(Vec<EdgeId>, T)> = Vec::new();
    for (pedges, pprob) in pivot_law {
        let mut extended = conditioning.to_vec();
        extended.extend_from_slice(&pedges);
        // Gaps are conditionally independent given the pivot outcome; their
        // joint law is the product of the per-gap laws.
        let mut partial: Vec<(Vec<EdgeId>, T)> = vec![(pedges.clone(), pprob)];
        let mut prev = y - 1;
        for i in 0..=a {
            let lo = prev + 1;
            let hi = if i < a { pivots[i] - 1 } else { z };
            if lo <= hi {
                let gap = segment_law(lg, pe, a, lo, hi, &extended, limit)?;
                let mut combined = Vec::with_capacity(partial.len() * gap.len());
                for (pe1, pr1) in &partial {
                    for (ge, gp) in &gap {
                        let mut edges = pe1.clone();
                        edges.extend_from_slice(ge);
                        combined.push((edges, pr1.clone() * gp.clone()));
                        if combined.len() > limit {
                            return Err(Error::SizeLimit {
                                what: "layered law".into(),
                                size: combined.len(),
                                limit,
                            });
                        }
                    }
                }
                partial = combined;
            }
            if i < a {
                prev = pivots[i];
            }
        }
        out.extend(partial);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_series_parallel, to_layered, CostVector, SpSpec};
    use crate::Exact;

    fn h_block() -> SpSpec<Exact> {
        SpSpec::Parallel(vec![SpSpec::scalar_edge(1.0), SpSpec::scalar_edge(0.0)])
    }

    fn tightness_instance(n: usize) -> (Graph<Exact>, PseudoExpectation<Exact>) {
        let spec = SpSpec::Series((0..n).map(|_| h_block()).collect());
        let (g, _) = build_series_parallel(&spec).unwrap();
        let mut paths = Vec::new();
        for i in 0..n {
            let mut edges = Vec::new();
            for block in 0..n {
                let pick = if block == i { 0 } else { 1 };
                edges.push(EdgeId((2 * block + pick) as u32));
            }
            paths.push(edges);
        }
        let w = Exact::from_ratio(1, n as i64);
        let pe =
            PseudoExpectation::from_distribution(&g, &paths, &vec![w; n], 4).unwrap();
        (g, pe)
    }

    #[test]
    fn law_of_single_path_graph() {
        let spec = SpSpec::<Exact>::Series(vec![
            SpSpec::scalar_edge(1.0),
            SpSpec::scalar_edge(2.0),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let pe = PseudoExpectation::from_distribution(
            &g,
            &[vec![EdgeId(0), EdgeId(1)]],
            &[Exact::from_int(1)],
            4,
        )
        .unwrap();
        let law = exact_rounding_law(&g, &pe, 100).unwrap();
        assert_eq!(law.len(), 1);
        assert_eq!(law[0].1, Exact::from_int(1));
    }

    #[test]
    fn law_of_two_block_tightness_is_uniform() {
        let (g, pe) = tightness_instance(2);
        let law = exact_rounding_law(&g, &pe, 100).unwrap();
        assert_eq!(law.len(), 4);
        let quarter = Exact::from_ratio(1, 4);
        for (_, prob) in &law {
            assert_eq!(*prob, quarter);
        }
    }

    #[test]
    fn law_marginals_match_moments_exactly() {
        let (g, pe) = tightness_instance(3);
        let law = exact_rounding_law(&g, &pe, 1000).unwrap();
        for e in g.edge_ids() {
            let mut from_law = Exact::from_int(0);
            for (edges, prob) in &law {
                if edges.contains(&e) {
                    from_law += prob.clone();
                }
            }
            let want = pe.moment(&Monomial::var(e)).unwrap();
            assert_eq!(from_law, want, "edge {e}");
            // Linear-time marginal DP agrees.
            let dp = walk_marginals(&g, &pe).unwrap();
            assert_eq!(dp[e.index()], want);
        }
    }

    #[test]
    fn cost_moment_recurrence_matches_binomial() {
        // On the tightness instance, the sampled cost is Binomial(N, 1/N):
        // E[X^2] = 2 - 1/N exactly.
        for n in [2i64, 3, 5] {
            let (g, pe) = tightness_instance(n as usize);
            let total = walk_lp_power_mean(&g, &pe, 2).unwrap();
            let want = Exact::from_int(2) - Exact::from_ratio(1, n);
            assert_eq!(total, want, "N = {n}");
        }
    }

    #[test]
    fn brute_force_on_tightness() {
        let (g, _) = tightness_instance(3);
        let (path, cost) = brute_force_opt(&g, 2).unwrap();
        // All-zero path exists.
        assert_eq!(cost, 0.0);
        assert_eq!(path.edges.len(), 3);
    }

    #[test]
    fn baseline_equals_brute_force_on_scalar_costs() {
        let spec = SpSpec::<Exact>::Series(vec![
            SpSpec::Parallel(vec![SpSpec::scalar_edge(2.0), SpSpec::scalar_edge(3.0)]),
            SpSpec::Parallel(vec![SpSpec::scalar_edge(1.0), SpSpec::scalar_edge(5.0)]),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let base = l1_baseline(&g).unwrap();
        let (opt, _) = brute_force_opt(&g, 1).unwrap();
        assert_eq!(base.lp_pow(1), opt.lp_pow(1));
    }

    #[test]
    fn label_setting_heuristic_is_exact_on_single_paths() {
        let spec = SpSpec::<Exact>::Series(vec![
            SpSpec::scalar_edge(1.0),
            SpSpec::scalar_edge(2.0),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let path = lp_dijkstra(&g, 2).unwrap();
        assert_eq!(path.edges, vec![EdgeId(0), EdgeId(1)]);
    }

    #[test]
    fn layered_law_is_consistent_with_walk_law_on_forced_graph() {
        // Single-path graph: both laws are the point mass on that path.
        let mut g: Graph<Exact> = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(Exact::from_int(1)));
        g.add_edge(1, 2, CostVector::scalar(Exact::from_int(2)));
        let lg = to_layered(&g).unwrap();
        let embedded = lg.path_of_walk(&[EdgeId(0), EdgeId(1)], &g).unwrap();
        let pe = PseudoExpectation::from_distribution(
            &lg.graph,
            &[embedded],
            &[Exact::from_int(1)],
            8,
        )
        .unwrap();
        let law = exact_layered_law(&lg, &pe, 3, 100).unwrap();
        assert_eq!(law.len(), 1);
        assert_eq!(law[0].1, Exact::from_int(1));
    }

    #[test]
    fn vertex_marginals_match_outgoing_mass() {
        // Prob[u in P] equals the outgoing moment mass at u.
        let spec = SpSpec::<Exact>::Parallel(vec![
            SpSpec::Series(vec![SpSpec::scalar_edge(1.0), SpSpec::scalar_edge(0.0)]),
            SpSpec::Series(vec![SpSpec::scalar_edge(0.0), SpSpec::scalar_edge(1.0)]),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let third = Exact::from_ratio(1, 3);
        let two_thirds = Exact::from_ratio(2, 3);
        let pe = PseudoExpectation::from_distribution(
            &g,
            &[vec![EdgeId(0), EdgeId(1)], vec![EdgeId(2), EdgeId(3)]],
            &[third, two_thirds],
            4,
        )
        .unwrap();
        let law = exact_rounding_law(&g, &pe, 100).unwrap();
        let adj = crate::graph::Adjacency::new(&g);
        for u in 0..g.vertex_count() {
            let mut from_law = Exact::from_int(0);
            for (edges, prob) in &law {
                let visits = u == g.source()
                    || edges.iter().any(|&e| g.edge(e).head == u);
                if visits {
                    from_law += prob.clone();
                }
            }
            if u == g.sink() || u == g.source() {
                assert_eq!(from_law, Exact::from_int(1));
                continue;
            }
            let mut mass = Exact::from_int(0);
            for &e in adj.out(u) {
                mass += pe.moment(&Monomial::var(e)).unwrap();
            }
            assert_eq!(from_law, mass, "vertex {u}");
        }
    }

    #[test]
    fn series_blocks_are_independent_under_the_law() {
        // In a series composition the sub-path choices in distinct blocks are
        // independent: joint containment probabilities factor exactly.
        let (g, pe) = tightness_instance(3);
        let law = exact_rounding_law(&g, &pe, 1000).unwrap();
        let prob_of = |pred: &dyn Fn(&[EdgeId]) -> bool| -> Exact {
            let mut acc = Exact::from_int(0);
            for (edges, prob) in &law {
                if pred(edges) {
                    acc += prob.clone();
                }
            }
            acc
        };
        // Blocks 0, 1, 2 own edges {0,1}, {2,3}, {4,5}.
        for a in [EdgeId(0), EdgeId(1)] {
            for b in [EdgeId(4), EdgeId(5)] {
                let joint = prob_of(&|edges| edges.contains(&a) && edges.contains(&b));
                let pa = prob_of(&|edges| edges.contains(&a));
                let pb = prob_of(&|edges| edges.contains(&b));
                assert_eq!(joint, pa * pb, "{a} x {b}");
            }
        }
    }

    #[test]
    fn heuristic_equals_classical_shortest_path_on_scalars() {
        // With one cost coordinate the heuristic's labels are plain sums, so
        // it coincides with the classical scalarized shortest path.
        let spec = SpSpec::<Exact>::Series(vec![
            SpSpec::Parallel(vec![SpSpec::scalar_edge(3.0), SpSpec::scalar_edge(1.0)]),
            SpSpec::Parallel(vec![SpSpec::scalar_edge(2.0), SpSpec::scalar_edge(4.0)]),
        ]);
        let (g, _) = build_series_parallel(&spec).unwrap();
        let heuristic = lp_dijkstra(&g, 2).unwrap();
        let classic = l1_baseline(&g).unwrap();
        assert_eq!(heuristic.lp_pow(1), classic.lp_pow(1));
        assert_eq!(heuristic.lp_pow(1), Exact::from_int(3));
    }

    #[test]
    fn layered_subset_probabilities_equal_moments() {
        // Prob[A ⊆ P] = ψE[Π_{e in A} x_e] for every admissible set, here
        // checked for every supported monomial under a flat (single chain)
        // recursion on an exactly feasible expectation.
        let (g, _) = tightness_instance(2);
        let g64 = g.to_f64();
        let lg64 = to_layered(&g64).unwrap();
        let lg = lg64.graph.to_exact();
        let lge = crate::graph::LayeredGraph {
            graph: lg,
            delta: lg64.delta,
            vertex_layer: lg64.vertex_layer.clone(),
            base_vertex: lg64.base_vertex.clone(),
            kind: lg64.kind.clone(),
            edges_in_layer: lg64.edges_in_layer.clone(),
        };
        // Uniform over the four embedded paths.
        let base_paths = enumerate_paths(&g, 1000).unwrap();
        let paths: Vec<Vec<EdgeId>> = base_paths
            .iter()
            .map(|p| lg64.path_of_walk(p, &g64).unwrap())
            .collect();
        let w = Exact::from_ratio(1, paths.len() as i64);
        let pe = PseudoExpectation::from_distribution(
            &lge.graph,
            &paths,
            &vec![w; paths.len()],
            8,
        )
        .unwrap();
        let law = exact_layered_law(&lge, &pe, lge.delta + 1, 10_000).unwrap();
        // Law total is one; every subset of a support path has matching
        // containment probability.
        let mut total = Exact::from_int(0);
        for (_, p) in &law {
            total += p.clone();
        }
        assert_eq!(total, Exact::from_int(1));
        for path in &paths {
            for mask in 0u32..(1 << path.len()) {
                let subset: Vec<EdgeId> = path
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &e)| e)
                    .collect();
                if subset.len() > 4 {
                    continue;
                }
                let mut prob = Exact::from_int(0);
                for (edges, p) in &law {
                    if subset.iter().all(|e| edges.contains(e)) {
                        prob += p.clone();
                    }
                }
                let want = pe
                    .moment(&Monomial::from_edges(subset.clone()))
                    .unwrap();
                assert_eq!(prob, want, "subset {subset:?}");
            }
        }
        // Flat recursion is law-exact: E[cost^p] equals the objective.
        let mean = {
            let mut acc = Exact::from_int(0);
            for (edges, p) in &law {
                let path = crate::rounding::Path::new(&lge.graph, edges.clone()).unwrap();
                acc += path.lp_pow(2) * p.clone();
            }
            acc
        };
        let obj = pe
            .evaluate(&crate::poly::lp_objective(&lge.graph, 2).unwrap())
            .unwrap();
        assert_eq!(mean, obj);
    }

    #[test]
    fn shallow_recursion_respects_bell_bound() {
        // Base-case width one forces genuine recursion; the mean p-th power
        // of the sampled cost stays within the depth-indexed Bell bound.
        let (g, _) = tightness_instance(2);
        let g64 = g.to_f64();
        let lg64 = to_layered(&g64).unwrap();
        let lge = crate::graph::LayeredGraph {
            graph: lg64.graph.to_exact(),
            delta: lg64.delta,
            vertex_layer: lg64.vertex_layer.clone(),
            base_vertex: lg64.base_vertex.clone(),
            kind: lg64.kind.clone(),
            edges_in_layer: lg64.edges_in_layer.clone(),
        };
        let base_paths = enumerate_paths(&g, 1000).unwrap();
        let paths: Vec<Vec<EdgeId>> = base_paths
            .iter()
            .map(|p| lg64.path_of_walk(p, &g64).unwrap())
            .collect();
        let w = Exact::from_ratio(1, paths.len() as i64);
        let pe = PseudoExpectation::from_distribution(
            &lge.graph,
            &paths,
            &vec![w; paths.len()],
            8,
        )
        .unwrap();
        let law = exact_layered_law(&lge, &pe, 1, 10_000).unwrap();
        let mut total = Exact::from_int(0);
        let mut mean = Exact::from_int(0);
        for (edges, p) in &law {
            total += p.clone();
            let path = crate::rounding::Path::new(&lge.graph, edges.clone()).unwrap();
            mean += path.lp_pow(2) * p.clone();
        }
        assert_eq!(total, Exact::from_int(1));
        let obj = pe
            .evaluate(&crate::poly::lp_objective(&lge.graph, 2).unwrap())
            .unwrap();
        // Height of the recursion on two layers with width one is one.
        let bound = Exact::from_int(2) * obj; // bell_1(2) = 2
        assert!(mean <= bound, "mean {mean} exceeds bound {bound}");
    }

    #[test]
    fn walk_law_agrees_with_monte_carlo() {
        // Self-consistency: the enumerated law predicts sampling frequencies
        // and the mean squared cost within statistical error.
        use crate::rng::Streams;
        use crate::rounding::round_series_parallel;
        use crate::Tolerances;

        let (g, pe) = tightness_instance(3);
        let g64 = g.to_f64();
        let pe64 = pe.to_f64();
        let law = exact_rounding_law(&g, &pe, 1000).unwrap();
        let runs = 30_000usize;
        let streams = Streams::new(99);
        let mut rng = streams.stream(0);
        let mut counts: std::collections::BTreeMap<Vec<EdgeId>, usize> =
            std::collections::BTreeMap::new();
        let mut sq_sum = 0.0f64;
        for _ in 0..runs {
            let path =
                round_series_parallel(&g64, &pe64, &Tolerances::default(), &mut rng).unwrap();
            sq_sum += path.lp_pow(2);
            *counts.entry(path.edges).or_insert(0) += 1;
        }
        for (edges, prob) in &law {
            let want = prob.to_f64();
            let got = counts.get(edges).copied().unwrap_or(0) as f64 / runs as f64;
            let stderr = (want * (1.0 - want) / runs as f64).sqrt().max(1e-9);
            assert!(
                (got - want).abs() <= 4.0 * stderr,
                "path {edges:?}: {got} vs {want}"
            );
        }
        let mean_sq = walk_lp_power_mean(&g, &pe, 2).unwrap().to_f64();
        // Var(cost^2) for Binomial(3, 1/3) is modest; 4 sigma with a crude
        // bound on the standard error.
        assert!(
            (sq_sum / runs as f64 - mean_sq).abs() <= 4.0 * (6.0 / runs as f64).sqrt(),
            "mean squared cost {} vs exact {}",
            sq_sum / runs as f64,
            mean_sq
        );
    }

    #[test]
    fn layered_law_agrees_with_recursive_sampler() {
        // The conditioning-chain enumeration and the recursive sampler are
        // the same process: with base-case width one (forcing recursion) the
        // sampled frequencies match the enumerated law.
        use crate::rng::Streams;
        use crate::rounding::LayeredRounder;
        use crate::Tolerances;

        let (g, _) = tightness_instance(2);
        let g64 = g.to_f64();
        let lg64 = to_layered(&g64).unwrap();
        let base_paths = enumerate_paths(&g64, 1000).unwrap();
        let paths: Vec<Vec<EdgeId>> = base_paths
            .iter()
            .map(|p| lg64.path_of_walk(p, &g64).unwrap())
            .collect();
        // Skewed weights so the law is not uniform.
        let weights = vec![0.4, 0.3, 0.2, 0.1];
        let pe = PseudoExpectation::from_distribution(&lg64.graph, &paths, &weights, 8)
            .unwrap();

        let lge = crate::graph::LayeredGraph {
            graph: lg64.graph.to_exact(),
            delta: lg64.delta,
            vertex_layer: lg64.vertex_layer.clone(),
            base_vertex: lg64.base_vertex.clone(),
            kind: lg64.kind.clone(),
            edges_in_layer: lg64.edges_in_layer.clone(),
        };
        let law = exact_layered_law(&lge, &pe.to_exact(), 1, 10_000).unwrap();

        let rounder = LayeredRounder {
            lg: &lg64,
            pe: &pe,
            a: 1,
            tol: Tolerances::default(),
        };
        let runs = 30_000usize;
        let streams = Streams::new(123);
        let mut rng = streams.stream(7);
        let mut counts: std::collections::BTreeMap<Vec<EdgeId>, usize> =
            std::collections::BTreeMap::new();
        for _ in 0..runs {
            let path = rounder.find_path(&mut rng).unwrap();
            *counts.entry(path.edges).or_insert(0) += 1;
        }
        let mut law_total = Exact::from_int(0);
        for (edges, prob) in &law {
            law_total += prob.clone();
            let want = prob.to_f64();
            let got = counts.get(edges).copied().unwrap_or(0) as f64 / runs as f64;
            let stderr = (want * (1.0 - want) / runs as f64).sqrt().max(1e-9);
            assert!(
                (got - want).abs() <= 4.0 * stderr,
                "layered path {edges:?}: {got} vs {want}"
            );
        }
        assert_eq!(law_total, Exact::from_int(1));
        // Every sampled path is in the law's support.
        let support: Vec<&Vec<EdgeId>> = law.iter().map(|(e, _)| e).collect();
        for edges in counts.keys() {
            assert!(support.contains(&edges), "sampled {edges:?} not in law");
        }
    }

    #[test]
    fn sampling_order_does_not_change_joint_law() {
        // Two-layer graph with genuine choice; compare visiting orders.
        let mut g: Graph<Exact> = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(Exact::from_int(1))); // e0
        g.add_edge(0, 1, CostVector::scalar(Exact::from_int(0))); // e1
        g.add_edge(1, 2, CostVector::scalar(Exact::from_int(1))); // e2
        g.add_edge(1, 2, CostVector::scalar(Exact::from_int(0))); // e3
        let lg = to_layered(&g).unwrap();
        // Correlated two-path distribution on the layered copies.
        let copies: Vec<EdgeId> = lg.graph.edge_ids().collect();
        assert_eq!(lg.kind.len(), copies.len());
        // Layer 1 copies of e0, e1 and layer 2 copies of e2, e3.
        let find = |layer: usize, base: u32| -> EdgeId {
            lg.edges_in_layer[layer - 1]
                .iter()
                .copied()
                .find(|&le| {
                    matches!(lg.kind[le.index()], crate::graph::LayeredEdgeKind::Copy(b) if b.0 == base)
                })
                .unwrap()
        };
        let paths = vec![
            vec![find(1, 0), find(2, 2)],
            vec![find(1, 1), find(2, 3)],
        ];
        let third = Exact::from_ratio(1, 3);
        let two_third = Exact::from_ratio(2, 3);
        let pe = PseudoExpectation::from_distribution(
            &lg.graph,
            &paths,
            &[third, two_third],
            6,
        )
        .unwrap();
        let forward = sampling_law(&lg, &pe, &[1, 2], &[], 100).unwrap();
        let backward = sampling_law(&lg, &pe, &[2, 1], &[], 100).unwrap();
        let canon = |law: Vec<(Vec<EdgeId>, Exact)>| -> BTreeMap<Vec<EdgeId>, Exact> {
            law.into_iter()
                .map(|(mut e, p)| {
                    e.sort_unstable();
                    (e, p)
                })
                .collect()
        };
        assert_eq!(canon(forward), canon(backward));
    }
}
