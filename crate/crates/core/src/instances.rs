//! Instance generators: the tightness families, the lattice (closest-vector)
//! reduction, the congestion-minimization reduction, the label-setting
//! counterexample family, and random series-parallel corpora.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::Rng;

use crate::error::Error;
use crate::graph::{
    build_series_parallel, CostVector, EdgeId, Graph, SpDecomposition, SpKind, SpSpec,
};
use crate::pseudoexp::PseudoExpectation;
use crate::scalar::Scalar;
use crate::{Exact, Result};

/// Dimension cap for tensor-cost instances.
pub const TENSOR_DIM_CAP: usize = 512;

// ---------------------------------------------------------------------------
// Scalar tightness family.
// ---------------------------------------------------------------------------

/// A tightness instance: the graph, its decomposition, the distinguished
/// paths, and the edges of unit cost that parameterize them.
#[derive(Debug, Clone)]
pub struct TightnessFamily<T> {
    pub graph: Graph<T>,
    pub decomposition: SpDecomposition,
    /// One path per family index, aligned with `unit_edges` for the scalar
    /// construction.
    pub paths: Vec<Vec<EdgeId>>,
    pub unit_edges: Vec<EdgeId>,
}

impl<T: Scalar> TightnessFamily<T> {
    /// True expectation of the uniform distribution over the family paths.
    pub fn uniform_pe(&self, degree: usize) -> Result<PseudoExpectation<T>> {
        let n = self.paths.len() as i64;
        let w = T::from_ratio(1, n);
        PseudoExpectation::from_distribution(&self.graph, &self.paths, &vec![w; n as usize], degree)
    }
}

fn scalar_block<T: Scalar>(order: u32, n: usize) -> SpSpec<T> {
    if order == 1 {
        let unit_pair = || {
            SpSpec::Parallel(vec![
                SpSpec::Edge(CostVector::scalar(T::one())),
                SpSpec::Edge(CostVector::scalar(T::zero())),
            ])
        };
        SpSpec::Series((0..n).map(|_| unit_pair()).collect())
    } else {
        let block = || {
            SpSpec::Parallel(vec![
                scalar_block(order - 1, n),
                SpSpec::Edge(CostVector::scalar(T::zero())),
            ])
        };
        SpSpec::Series((0..n).map(|_| block()).collect())
    }
}

/// The order-`h` scalar construction: `N` blocks in series, each the parallel
/// composition of the order-`(h-1)` graph and a zero edge; costs are 0/1 and
/// each family path takes exactly one unit-cost edge.
pub fn gen_tightness_scalar<T: Scalar>(h: u32, n: usize) -> Result<TightnessFamily<T>> {
    if h < 1 || n < 2 {
        return Err(Error::InvalidParameter(
            "scalar tightness needs h >= 1 and N >= 2".into(),
        ));
    }
    let spec = scalar_block::<T>(h, n);
    let (graph, decomposition) = build_series_parallel(&spec)?;
    let unit_edges: Vec<EdgeId> = graph
        .edges()
        .filter(|(_, e)| e.cost.entries[0] == T::one())
        .map(|(id, _)| id)
        .collect();
    let mut paths = Vec::with_capacity(unit_edges.len());
    for &target in &unit_edges {
        let mut path = Vec::new();
        family_path(&graph, &decomposition.root, target, &mut path)?;
        paths.push(path);
    }
    Ok(TightnessFamily {
        graph,
        decomposition,
        paths,
        unit_edges,
    })
}

/// Walks the decomposition, taking the branch containing `target` wherever it
/// is available and the all-zero branch everywhere else.
fn family_path<T: Scalar>(
    g: &Graph<T>,
    block: &crate::graph::SpBlock,
    target: EdgeId,
    out: &mut Vec<EdgeId>,
) -> Result<()> {
    match &block.kind {
        SpKind::Leaf(edges) => {
            if edges.contains(&target) {
                out.push(target);
            } else {
                let zero = edges
                    .iter()
                    .copied()
                    .find(|&e| g.edge(e).cost.entries.iter().all(|c| *c == T::zero()))
                    .ok_or_else(|| {
                        Error::Structure("leaf without a zero-cost alternative".into())
                    })?;
                out.push(zero);
            }
            Ok(())
        }
        SpKind::Series(children) => {
            for c in children {
                family_path(g, c, target, out)?;
            }
            Ok(())
        }
        SpKind::Parallel(children) => {
            if let Some(c) = children.iter().find(|c| c.edge_ids().contains(&target)) {
                return family_path(g, c, target, out);
            }
            // Take a branch made entirely of zero-cost edges; in this family
            // that branch is a single leaf edge.
            for c in children {
                if let SpKind::Leaf(edges) = &c.kind {
                    if let Some(&e) = edges.iter().find(|&&e| {
                        g.edge(e).cost.entries.iter().all(|v| *v == T::zero())
                    }) {
                        out.push(e);
                        return Ok(());
                    }
                }
            }
            Err(Error::Structure(
                "parallel block without a zero-cost bypass".into(),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Tensor tightness family.
// ---------------------------------------------------------------------------

fn tensor_spec<T: Scalar>(h: u32, n: usize, dim: usize, offset: usize, stride: usize) -> SpSpec<T> {
    // Block at recursion level `h` occupies coordinates
    // offset + i * stride ... for its i-th parallel branch.
    if h == 1 {
        let k_block = || {
            SpSpec::Parallel(
                (0..n)
                    .map(|i| {
                        SpSpec::Edge(CostVector::basis(dim, offset + i * stride, T::one()))
                    })
                    .collect(),
            )
        };
        SpSpec::Series((0..n).map(|_| k_block()).collect())
    } else {
        let h_block = || {
            SpSpec::Parallel(
                (0..n)
                    .map(|i| tensor_spec(h - 1, n, dim, offset + i * stride, stride / n))
                    .collect(),
            )
        };
        SpSpec::Series((0..n).map(|_| h_block()).collect())
    }
}

/// The order-`h` tensor construction with `ℓ = N^h` coordinates: each edge
/// carries an elementary tensor cost, each family path collects every basis
/// vector exactly once (total cost the all-ones vector, `ℓp^p` cost `N^h`).
pub fn gen_tightness_tensor<T: Scalar>(h: u32, n: usize) -> Result<TightnessFamily<T>> {
    if h < 1 || n < 2 {
        return Err(Error::InvalidParameter(
            "tensor tightness needs h >= 1 and N >= 2".into(),
        ));
    }
    let dim = n
        .checked_pow(h)
        .filter(|&d| d <= TENSOR_DIM_CAP)
        .ok_or_else(|| Error::SizeLimit {
            what: "tensor cost dimension".into(),
            size: n.pow(h.min(9)),
            limit: TENSOR_DIM_CAP,
        })?;
    let stride = dim / n;
    let spec = tensor_spec::<T>(h, n, dim, 0, stride);
    let (graph, decomposition) = build_series_parallel(&spec)?;

    // Family indexed by (i_1, .., i_h) in {0..N-1}^h.
    let mut paths = Vec::with_capacity(dim);
    let mut indices = vec![0usize; h as usize];
    loop {
        let mut path = Vec::new();
        tensor_path(&decomposition.root, n, &indices, &mut path)?;
        paths.push(path);
        // Odometer increment.
        let mut pos = indices.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < n {
                break;
            }
            indices[pos] = 0;
        }
        if indices.iter().all(|&v| v == 0) {
            break;
        }
    }
    let unit_edges = graph.edge_ids().collect();
    Ok(TightnessFamily {
        graph,
        decomposition,
        paths,
        unit_edges,
    })
}

/// Follows the cyclic-shift family: in series block `j` the path enters
/// parallel branch `(i_1 + j) mod N`, recursing with the remaining indices.
fn tensor_path(
    block: &crate::graph::SpBlock,
    n: usize,
    indices: &[usize],
    out: &mut Vec<EdgeId>,
) -> Result<()> {
    let SpKind::Series(children) = &block.kind else {
        return Err(Error::Structure("tensor block must be a series node".into()));
    };
    let i = indices[0];
    for (j, child) in children.iter().enumerate() {
        let SpKind::Parallel(branches) = &child.kind else {
            return Err(Error::Structure("tensor series child must be parallel".into()));
        };
        let pick = (i + j) % n;
        match &branches[pick].kind {
            SpKind::Leaf(edges) => out.push(edges[0]),
            _ => tensor_path(&branches[pick], n, &indices[1..], out)?,
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lattice (closest vector) reduction.
// ---------------------------------------------------------------------------

/// A lattice instance: integer basis columns, integer target, and the stage
/// parameters of the reduction.
#[derive(Debug, Clone)]
pub struct LatticeInstance {
    /// Basis columns `v_1..v_d`, each in `Z^n`.
    pub columns: Vec<Vec<i64>>,
    pub target: Vec<i64>,
    /// Power range: stage edges carry `±2^j v_k` for `0 <= j <= t_param`.
    pub t_param: u32,
    /// Number of stages.
    pub w_param: usize,
}

impl LatticeInstance {
    /// Builds an instance with the default parameters
    /// `T = ceil(1 + log2 n + d log2(nd) + (2d+1) log2 M)` and `W = dT`.
    pub fn new(columns: Vec<Vec<i64>>, target: Vec<i64>) -> Result<Self> {
        let d = columns.len();
        let n = target.len();
        if d == 0 || n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("basis/target shape mismatch".into()));
        }
        if rational_rank(&columns) != d {
            return Err(Error::InvalidParameter(
                "basis is rank-deficient over the rationals".into(),
            ));
        }
        let m = columns
            .iter()
            .flatten()
            .chain(target.iter())
            .map(|v| v.abs())
            .max()
            .unwrap()
            .max(1) as f64;
        let nd = (n * d) as f64;
        let t = (1.0 + (n as f64).log2() + d as f64 * nd.log2() + (2 * d + 1) as f64 * m.log2())
            .ceil()
            .max(1.0) as u32;
        let w = d * t as usize;
        Ok(LatticeInstance {
            columns,
            target,
            t_param: t,
            w_param: w,
        })
    }

    pub fn with_params(mut self, t: u32, w: usize) -> Self {
        self.t_param = t;
        self.w_param = w;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.target.len(), self.columns.len())
    }

    /// `B x - u` in exact integers.
    pub fn residue(&self, x: &[BigInt]) -> Vec<BigInt> {
        let n = self.target.len();
        let mut out: Vec<BigInt> = self.target.iter().map(|&v| BigInt::from(-v)).collect();
        for (col, xk) in self.columns.iter().zip(x) {
            for i in 0..n {
                out[i] += xk * BigInt::from(col[i]);
            }
        }
        out
    }

    /// `‖Bx - u‖_p^p` in exact rationals.
    pub fn objective_pow(&self, x: &[BigInt], p: u32) -> Exact {
        let mut acc = Exact::zero();
        for r in self.residue(x) {
            let a = Exact::from_integer(r.abs());
            acc += a.powi(p);
        }
        acc
    }
}

/// Exact rank of integer columns over the rationals.
pub fn rational_rank(columns: &[Vec<i64>]) -> usize {
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    let d = columns.len();
    let mut m: Vec<Vec<Exact>> = (0..n)
        .map(|i| (0..d).map(|k| Exact::from_int(columns[k][i])).collect())
        .collect();
    let mut rank = 0usize;
    for col in 0..d {
        let Some(pivot) = (rank..n).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = Exact::from_int(1) / m[rank][col].clone();
        for c in col..d {
            m[rank][c] = m[rank][c].clone() * inv.clone();
        }
        for r in 0..n {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..d {
                    let delta = f.clone() * m[rank][c].clone();
                    m[r][c] = m[r][c].clone() - delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Role of an edge in the lattice-reduction graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvpEdgeKind {
    /// The first edge, carrying `-u`.
    Target,
    /// A zero-cost stage edge.
    Zero,
    /// `sign * 2^power * v_column`.
    Basis { column: usize, power: u32, sign: i8 },
}

/// Output of the lattice reduction: a signed-cost graph whose s-t paths
/// encode integer lattice combinations.
#[derive(Debug, Clone)]
pub struct CvpGraph<T> {
    pub graph: Graph<T>,
    pub instance: LatticeInstance,
    pub kinds: Vec<CvpEdgeKind>,
}

impl<T: Scalar> CvpGraph<T> {
    /// Decodes a path into the lattice combination it selects.
    pub fn lattice_vector(&self, edges: &[EdgeId]) -> Vec<BigInt> {
        let d = self.instance.columns.len();
        let mut x = vec![BigInt::zero(); d];
        for &e in edges {
            if let CvpEdgeKind::Basis {
                column,
                power,
                sign,
            } = self.kinds[e.index()]
            {
                let term = BigInt::from(sign as i64) * (BigInt::from(1) << power);
                x[column] += term;
            }
        }
        x
    }

    /// Builds the path encoding the binary expansion of `x`: one stage per
    /// set bit, zero edges on the remaining stages.
    pub fn encode_solution(&self, x: &[BigInt]) -> Result<Vec<EdgeId>> {
        let mut stages: Vec<CvpEdgeKind> = Vec::new();
        for (k, xk) in x.iter().enumerate() {
            let sign: i8 = if xk.is_negative() { -1 } else { 1 };
            let mag = xk.abs();
            let bits = mag.bits();
            for j in 0..bits {
                if mag.bit(j) {
                    if j > self.instance.t_param as u64 {
                        return Err(Error::InvalidParameter(format!(
                            "coordinate {k} needs power 2^{j} beyond T={}",
                            self.instance.t_param
                        )));
                    }
                    stages.push(CvpEdgeKind::Basis {
                        column: k,
                        power: j as u32,
                        sign,
                    });
                }
            }
        }
        if stages.len() > self.instance.w_param {
            return Err(Error::InvalidParameter(format!(
                "expansion needs {} stages, instance has {}",
                stages.len(),
                self.instance.w_param
            )));
        }
        stages.resize(self.instance.w_param, CvpEdgeKind::Zero);

        let mut edges = Vec::with_capacity(self.instance.w_param + 1);
        let target_edge = self
            .kinds
            .iter()
            .position(|k| *k == CvpEdgeKind::Target)
            .expect("target edge");
        edges.push(EdgeId(target_edge as u32));
        // Stage i edges start after the target edge; each stage lists the
        // same kinds in the same order.
        let per_stage = 2 * self.instance.columns.len() * (self.instance.t_param as usize + 1) + 1;
        for (i, kind) in stages.iter().enumerate() {
            let base = 1 + i * per_stage;
            let offset = (0..per_stage)
                .find(|&o| self.kinds[base + o] == *kind)
                .expect("stage kind present");
            edges.push(EdgeId((base + offset) as u32));
        }
        Ok(edges)
    }
}

/// The lattice reduction: `W + 2` vertices in a line; the first edge carries
/// `-u`, every stage offers `±2^j v_k` for all columns and powers plus a zero
/// edge. Costs are sign-unrestricted and the instance is flagged as such.
pub fn gen_cvp_reduction<T: Scalar>(instance: &LatticeInstance) -> Result<CvpGraph<T>> {
    let (n, d) = instance.dims();
    let w = instance.w_param;
    let t = instance.t_param;
    let mut graph: Graph<T> = Graph::new(w + 2, n, 0, w + 1);
    graph.signed = true;
    let mut kinds = Vec::new();

    let neg_u = CostVector::new(instance.target.iter().map(|&v| T::from_int(-v)).collect());
    graph.add_edge(0, 1, neg_u);
    kinds.push(CvpEdgeKind::Target);

    for stage in 0..w {
        let (a, b) = (stage + 1, stage + 2);
        for k in 0..d {
            for j in 0..=t {
                for sign in [1i8, -1i8] {
                    let cost = CostVector::new(
                        instance.columns[k]
                            .iter()
                            .map(|&v| {
                                let mut val = T::from_int(v * sign as i64);
                                for _ in 0..j {
                                    val = val * T::from_int(2);
                                }
                                val
                            })
                            .collect(),
                    );
                    graph.add_edge(a, b, cost);
                    kinds.push(CvpEdgeKind::Basis {
                        column: k,
                        power: j,
                        sign,
                    });
                }
            }
        }
        graph.add_edge(a, b, CostVector::zeros(n));
        kinds.push(CvpEdgeKind::Zero);
    }
    graph.validate()?;
    Ok(CvpGraph {
        graph,
        instance: instance.clone(),
        kinds,
    })
}

/// Exact brute-force closest-vector optimum over a provably sufficient box.
pub fn cvp_brute_force(instance: &LatticeInstance, p: u32) -> Result<(Vec<i64>, Exact)> {
    let (n, d) = instance.dims();
    // ‖x*‖_inf <= ‖B^+‖_inf · ‖w‖_inf with ‖w‖_inf <= ‖u‖_inf (1 + n).
    let pinv_norm = pseudo_inverse_row_norm(&instance.columns)?;
    let u_inf = instance.target.iter().map(|v| v.abs()).max().unwrap_or(0);
    let bound = pinv_norm * Exact::from_int(u_inf * (1 + n as i64));
    let radius = bound.ceil().to_integer();
    let radius: i64 = radius.try_into().map_err(|_| Error::SizeLimit {
        what: "lattice enumeration radius".into(),
        size: usize::MAX,
        limit: 200,
    })?;
    if radius > 200 {
        return Err(Error::SizeLimit {
            what: "lattice enumeration radius".into(),
            size: radius as usize,
            limit: 200,
        });
    }
    let mut best: Option<(Vec<i64>, Exact)> = None;
    let mut x = vec![-radius; d];
    loop {
        let xb: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
        let val = instance.objective_pow(&xb, p);
        let better = match &best {
            None => true,
            Some((bx, bv)) => val < *bv || (val == *bv && x < *bx),
        };
        if better {
            best = Some((x.clone(), val));
        }
        // Odometer.
        let mut pos = d;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            x[pos] += 1;
            if x[pos] <= radius {
                break;
            }
            x[pos] = -radius;
        }
        if x.iter().all(|&v| v == -radius) && pos == 0 {
            break;
        }
    }
    Ok(best.unwrap())
}

/// Max row abs-sum of the pseudo-inverse `(B^T B)^{-1} B^T`, exact.
fn pseudo_inverse_row_norm(columns: &[Vec<i64>]) -> Result<Exact> {
    let d = columns.len();
    let n = columns[0].len();
    // Gram matrix.
    let mut gram: Vec<Vec<Exact>> = vec![vec![Exact::zero(); d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = Exact::zero();
            for r in 0..n {
                acc += Exact::from_int(columns[i][r] * columns[j][r]);
            }
            gram[i][j] = acc;
        }
    }
    let inv = invert_rational(&gram)
        .ok_or_else(|| Error::InvalidParameter("singular Gram matrix".into()))?;
    // Pseudo-inverse rows: (G^{-1} B^T)_{k, r}.
    let mut worst = Exact::zero();
    for k in 0..d {
        let mut row_sum = Exact::zero();
        for r in 0..n {
            let mut acc = Exact::zero();
            for j in 0..d {
                acc += inv[k][j].clone() * Exact::from_int(columns[j][r]);
            }
            row_sum += num_traits::Signed::abs(&acc);
        }
        if row_sum > worst {
            worst = row_sum;
        }
    }
    Ok(worst)
}

/// Gauss-Jordan inverse over the rationals; `None` if singular.
pub fn invert_rational(m: &[Vec<Exact>]) -> Option<Vec<Vec<Exact>>> {
    let d = m.len();
    let mut a: Vec<Vec<Exact>> = m.to_vec();
    let mut inv: Vec<Vec<Exact>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { Exact::from_int(1) } else { Exact::zero() })
                .collect()
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = Exact::from_int(1) / a[col][col].clone();
        for j in 0..d {
            a[col][j] = a[col][j].clone() * scale.clone();
            inv[col][j] = inv[col][j].clone() * scale.clone();
        }
        for r in 0..d {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..d {
                    let da = f.clone() * a[col][j].clone();
                    a[r][j] = a[r][j].clone() - da;
                    let di = f.clone() * inv[col][j].clone();
                    inv[r][j] = inv[r][j].clone() - di;
                }
            }
        }
    }
    Some(inv)
}

/// Random full-rank lattice instance with entries in `[-max_entry, max_entry]`,
/// resampled until the brute-force enumeration radius is workable.
pub fn random_lattice<R: Rng>(
    n: usize,
    d: usize,
    max_entry: i64,
    rng: &mut R,
) -> Result<LatticeInstance> {
    for _ in 0..200 {
        let columns: Vec<Vec<i64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.gen_range(-max_entry..=max_entry)).collect())
            .collect();
        let target: Vec<i64> = (0..n).map(|_| rng.gen_range(-max_entry..=max_entry)).collect();
        if rational_rank(&columns) != d {
            continue;
        }
        let inst = LatticeInstance::new(columns, target)?;
        // Keep the brute-force enumeration radius small.
        let u_inf = inst.target.iter().map(|v| v.abs()).max().unwrap_or(0);
        let radius_ok = pseudo_inverse_row_norm(&inst.columns)
            .map(|b| b * Exact::from_int(u_inf * (1 + n as i64)) <= Exact::from_int(12))
            .unwrap_or(false);
        if radius_ok {
            return Ok(inst);
        }
    }
    Err(Error::InvalidParameter(
        "could not sample a well-conditioned lattice".into(),
    ))
}

// ---------------------------------------------------------------------------
// Congestion-minimization reduction.
// ---------------------------------------------------------------------------

/// Stitches `k` copies of the routing instance in series; copy `i` keeps the
/// original edge indicators as cost coordinates, so a path through all copies
/// accumulates per-edge usage counts and its ℓ∞ cost is the congestion.
pub fn gen_congestion_reduction<T: Scalar>(
    g: &Graph<T>,
    pairs: &[(usize, usize)],
) -> Result<Graph<T>> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no terminal pairs".into()));
    }
    let n = g.vertex_count();
    let m = g.edge_count();
    let k = pairs.len();
    for &(s, t) in pairs {
        if s >= n || t >= n {
            return Err(Error::InvalidParameter("pair vertex out of range".into()));
        }
    }
    let vid = |copy: usize, v: usize| copy * n + v;
    let mut out: Graph<T> = Graph::new(n * k, m, vid(0, pairs[0].0), vid(k - 1, pairs[k - 1].1));
    for copy in 0..k {
        for (bid, e) in g.edges() {
            out.add_edge(
                vid(copy, e.tail),
                vid(copy, e.head),
                CostVector::basis(m, bid.index(), T::one()),
            );
        }
    }
    for copy in 0..k - 1 {
        out.add_edge(
            vid(copy, pairs[copy].1),
            vid(copy + 1, pairs[copy + 1].0),
            CostVector::zeros(m),
        );
    }
    out.validate()?;
    Ok(out)
}

/// Brute-force minimum congestion: enumerates one simple path per pair and
/// minimizes the maximum edge multiplicity over all combinations.
pub fn brute_force_congestion<T: Scalar>(
    g: &Graph<T>,
    pairs: &[(usize, usize)],
    limit: usize,
) -> Result<usize> {
    let per_pair: Vec<Vec<Vec<EdgeId>>> = pairs
        .iter()
        .map(|&(s, t)| crate::oracles::enumerate_simple_paths(g, s, t, limit))
        .collect::<Result<_>>()?;
    let combos: usize = per_pair.iter().map(|p| p.len().max(1)).product();
    if combos > limit {
        return Err(Error::SizeLimit {
            what: "routing combinations".into(),
            size: combos,
            limit,
        });
    }
    if per_pair.iter().any(|p| p.is_empty()) {
        return Err(Error::Structure("some pair has no route".into()));
    }
    let mut best = usize::MAX;
    let mut choice = vec![0usize; pairs.len()];
    loop {
        let mut usage = vec![0usize; g.edge_count()];
        for (i, &c) in choice.iter().enumerate() {
            for e in &per_pair[i][c] {
                usage[e.index()] += 1;
            }
        }
        best = best.min(usage.iter().copied().max().unwrap_or(0));
        let mut pos = choice.len();
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < per_pair[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Label-setting counterexample family.
// ---------------------------------------------------------------------------

/// The chain-plus-shortcuts family: chain edge `(i-1, i)` costs `e_i`, the
/// shortcut `(0, i)` costs `(1-ε) i e_{i+1}`, with `ℓ = n + 1` coordinates.
pub fn gen_dijkstra_counterexample<T: Scalar>(n: usize, eps: T) -> Result<Graph<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    if eps <= T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter("eps must lie in (0, 1)".into()));
    }
    let dim = n + 1;
    let mut g: Graph<T> = Graph::new(n + 1, dim, 0, n);
    for i in 1..=n {
        g.add_edge(i - 1, i, CostVector::basis(dim, i - 1, T::one()));
    }
    let one_minus = T::one() - eps;
    for i in 1..=n {
        let value = one_minus.clone() * T::from_int(i as i64);
        g.add_edge(0, i, CostVector::basis(dim, i, value));
    }
    g.validate()?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Random series-parallel corpus.
// ---------------------------------------------------------------------------

/// Cost distribution for random instances.
#[derive(Debug, Clone, Copy)]
pub enum CostLaw {
    /// Multiples of `1/denominator` in `[0, 1]` (exactly representable).
    DyadicUnit { denominator: u32 },
    /// Bernoulli 0/1 entries.
    ZeroOne,
    /// Uniform integers in `0..=max`.
    Integers { max: i64 },
}

impl CostLaw {
    fn sample<T: Scalar, R: Rng>(&self, rng: &mut R) -> T {
        match self {
            CostLaw::DyadicUnit { denominator } => {
                T::from_ratio(rng.gen_range(0..=*denominator) as i64, *denominator as i64)
            }
            CostLaw::ZeroOne => T::from_int(rng.gen_range(0..=1)),
            CostLaw::Integers { max } => T::from_int(rng.gen_range(0..=*max)),
        }
    }
}

fn random_spec<T: Scalar, R: Rng>(
    order: u32,
    width: usize,
    dim: usize,
    law: &CostLaw,
    rng: &mut R,
) -> SpSpec<T> {
    let width = width.max(2);
    let edge = |rng: &mut R| {
        SpSpec::Edge(CostVector::new((0..dim).map(|_| law.sample(rng)).collect()))
    };
    if order == 0 {
        let count = rng.gen_range(1..=width);
        if count == 1 {
            edge(rng)
        } else {
            SpSpec::Parallel((0..count).map(|_| edge(rng)).collect())
        }
    } else {
        let count = rng.gen_range(2..=width);
        let exact_pos = rng.gen_range(0..count);
        let children = (0..count)
            .map(|i| {
                let child_order = if i == exact_pos {
                    order - 1
                } else {
                    rng.gen_range(0..order)
                };
                random_spec(child_order, width, dim, law, rng)
            })
            .collect();
        let series = SpSpec::Series(children);
        // Occasionally wrap in a parallel bundle; the order is unchanged.
        if rng.gen_bool(0.3) {
            SpSpec::Parallel(vec![series, edge(rng)])
        } else {
            series
        }
    }
}

/// Random series-parallel instance of exactly the requested order, with the
/// decomposition that built it.
pub fn gen_random_sp<T: Scalar, R: Rng>(
    order: u32,
    width: usize,
    dim: usize,
    law: &CostLaw,
    rng: &mut R,
) -> Result<(Graph<T>, SpDecomposition)> {
    let spec = random_spec::<T, _>(order, width, dim, law, rng);
    let (g, d) = build_series_parallel(&spec)?;
    debug_assert_eq!(d.order(), spec.order());
    Ok((g, d))
}

/// Resamples until the edge count lands in the requested window.
pub fn gen_random_sp_sized<T: Scalar, R: Rng>(
    order: u32,
    width: usize,
    dim: usize,
    law: &CostLaw,
    max_edges: usize,
    rng: &mut R,
) -> Result<(Graph<T>, SpDecomposition)> {
    for _ in 0..500 {
        let (g, d) = gen_random_sp::<T, _>(order, width, dim, law, rng)?;
        if g.edge_count() <= max_edges {
            return Ok((g, d));
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not sample an instance with at most {max_edges} edges"
    )))
}
