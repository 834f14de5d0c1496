//! Moment relaxation assembly and a deterministic first-order solver.
//!
//! The relaxation minimizes a linear functional of the moment vector subject
//! to the degree-closed flow (and group) equalities and positive
//! semidefiniteness of the moment matrix. The solver is an operator-splitting
//! scheme: the affine-plus-objective step solves a diagonally weighted
//! KKT system (conjugate gradients on the Gram operator, warm-started), the
//! conic step projects onto the PSD cone by symmetric eigendecomposition,
//! with over-relaxation and residual-balanced penalty updates.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::graph::{Compatibility, EdgeId, Graph, Reachability};
use crate::poly::{flow_constraints, group_indicator, lp_objective, Monomial, MonomialIndex, Polynomial};
use crate::pseudoexp::PseudoExpectation;
use crate::Result;

/// Cap on the interned monomial basis.
pub const INDEX_LIMIT: usize = 120_000;
/// Cap on the moment-matrix side length.
pub const PSD_DIM_LIMIT: usize = 2_000;

/// Sparse equality row over moment indices.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub rhs: f64,
}

/// The relaxation in solver-ready form.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub index: Arc<MonomialIndex>,
    /// Objective coefficients over the moment vector, pre-scaled so the
    /// largest cost coordinate is one.
    pub objective: Vec<f64>,
    /// Multiplier undoing the cost scaling on reported objective values.
    pub objective_unscale: f64,
    pub rows: Vec<ConstraintRow>,
    /// Moment-matrix side length (monomials of degree <= d).
    pub psd_dim: usize,
    /// Upper-triangle map (i <= j) to the moment index of the reduced
    /// product; `None` marks structurally zero (incompatible) entries.
    pub psd_map: Vec<Option<u32>>,
    pub p: u32,
    pub degree: usize,
    pub edge_count: usize,
}

impl SdpProblem {
    #[inline]
    fn tri(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        j * (j + 1) / 2 + i
    }

    /// Moment-matrix entry map for `(i, j)` with `i <= j`.
    pub fn entry(&self, i: usize, j: usize) -> Option<u32> {
        self.psd_map[self.tri(i, j)]
    }

    /// Frobenius multiplicity of each moment in the matrix.
    fn multiplicities(&self) -> Vec<f64> {
        let mut mult = vec![0.0; self.index.len()];
        for j in 0..self.psd_dim {
            for i in 0..=j {
                if let Some(k) = self.entry(i, j) {
                    mult[k as usize] += if i == j { 1.0 } else { 2.0 };
                }
            }
        }
        mult
    }

    /// Matrix-market-style dump: objective, sparse rows, structure map.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "%% moment problem: monomials={} rows={} psd={} degree={}",
            self.index.len(),
            self.rows.len(),
            self.psd_dim,
            self.degree
        )?;
        for (k, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                writeln!(w, "obj {k} {c:.17e}")?;
            }
        }
        for row in &self.rows {
            write!(w, "row {:.17e}", row.rhs)?;
            for (c, v) in row.cols.iter().zip(&row.vals) {
                write!(w, " {c}:{v:.17e}")?;
            }
            writeln!(w)?;
        }
        for j in 0..self.psd_dim {
            for i in 0..=j {
                if let Some(k) = self.entry(i, j) {
                    writeln!(w, "psd {i} {j} {k}")?;
                }
            }
        }
        Ok(())
    }
}

/// Builds the degree-`degree` relaxation for the `ℓp^p` objective, with
/// optional edge groups carrying the visit-exactly-once constraints
/// (`h_R = 1` and `h_R^2 = 1`, both degree-closed).
pub fn build_relaxation(
    g: &Graph<f64>,
    p: u32,
    degree: usize,
    groups: &[Vec<EdgeId>],
) -> Result<SdpProblem> {
    g.validate()?;
    g.topo_order()?;
    if g.signed {
        return Err(Error::InvalidParameter(
            "the relaxation requires entry-wise non-negative costs".into(),
        ));
    }
    if degree % 2 != 0 {
        return Err(Error::InvalidParameter("relaxation degree must be even".into()));
    }
    if degree < 2 * p as usize {
        return Err(Error::InvalidParameter(format!(
            "degree {degree} too small for objective exponent p={p}"
        )));
    }

    let reach = Reachability::new(g);
    let compat = Compatibility::new(g, &reach);
    let index = Arc::new(MonomialIndex::build(
        &compat,
        g.edge_count(),
        degree,
        INDEX_LIMIT,
    )?);

    // Objective, scaled so the largest cost coordinate is one.
    let mut scale = 0.0f64;
    for (_, e) in g.edges() {
        for c in &e.cost.entries {
            scale = scale.max(c.abs());
        }
    }
    if scale == 0.0 {
        scale = 1.0;
    }
    let scaled = g.map_costs(|c| *c / scale);
    let objective_poly = lp_objective(&scaled, p)?;
    let mut objective = vec![0.0; index.len()];
    for (m, c) in objective_poly.terms() {
        if let Some(k) = index.position(m) {
            objective[k as usize] += *c;
        }
        // Unsupported monomials have zero moment in every feasible solution;
        // their objective terms vanish identically.
    }

    // Base equality polynomials.
    let mut base: Vec<Polynomial<f64>> = flow_constraints(g)?;
    for group in groups {
        let h = group_indicator::<f64>(group)?;
        let mut h_minus_one = h.clone();
        h_minus_one.add_term(Monomial::unit(), -1.0);
        base.push(h_minus_one);
        let mut h_sq_minus_one = h.multiply(&h, degree)?;
        h_sq_minus_one.add_term(Monomial::unit(), -1.0);
        base.push(h_sq_minus_one);
    }

    // Degree closure, canonicalized and deduplicated.
    let mut rows: Vec<ConstraintRow> = Vec::new();
    let mut seen: HashMap<Vec<(u32, u64)>, ()> = HashMap::new();
    let unit_pos = index.position(&Monomial::unit()).expect("unit monomial");
    rows.push(ConstraintRow {
        cols: vec![unit_pos],
        vals: vec![1.0],
        rhs: 1.0,
    });
    seen.insert(vec![(unit_pos, 1.0f64.to_bits())], ());

    for f in &base {
        let df = f.degree();
        for m in index.monomials() {
            if m.degree() + df > degree {
                continue;
            }
            let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
            for (fm, fc) in f.terms() {
                if let Some(k) = index.position(&m.union(fm)) {
                    *acc.entry(k).or_insert(0.0) += *fc;
                }
            }
            acc.retain(|_, v| v.abs() > 1e-12);
            if acc.is_empty() {
                continue;
            }
            let key: Vec<(u32, u64)> = acc.iter().map(|(k, v)| (*k, v.to_bits())).collect();
            if seen.insert(key, ()).is_some() {
                continue;
            }
            let (cols, vals): (Vec<u32>, Vec<f64>) = acc.into_iter().unzip();
            rows.push(ConstraintRow {
                cols,
                vals,
                rhs: 0.0,
            });
        }
    }

    // Moment-matrix structure over monomials of degree <= d.
    let psd_dim = index.count_up_to_degree(degree / 2);
    if psd_dim > PSD_DIM_LIMIT {
        return Err(Error::SizeLimit {
            what: "moment matrix".into(),
            size: psd_dim,
            limit: PSD_DIM_LIMIT,
        });
    }
    let mut psd_map = vec![None; psd_dim * (psd_dim + 1) / 2];
    for j in 0..psd_dim {
        for i in 0..=j {
            let prod = index.monomial(i as u32).union(index.monomial(j as u32));
            psd_map[j * (j + 1) / 2 + i] = index.position(&prod);
        }
    }

    Ok(SdpProblem {
        index,
        objective,
        objective_unscale: scale.powi(p as i32),
        rows,
        psd_dim,
        psd_map,
        p,
        degree,
        edge_count: g.edge_count(),
    })
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InfeasibleSuspected,
}

/// Solver output. Residuals are recomputed from the final iterate, not
/// trusted from the solver loop.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub pe: PseudoExpectation<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Post-hoc maximum affine residual.
    pub primal_residual: f64,
    /// Post-hoc PSD violation (negative part of the minimum eigenvalue).
    pub psd_residual: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub over_relaxation: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 20_000,
            rho: 1.0,
            over_relaxation: 1.6,
        }
    }
}

struct SparseRows {
    rows: Vec<ConstraintRow>,
}

impl SparseRows {
    fn apply_transpose(&self, mu: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let m = mu[r];
            if m == 0.0 {
                continue;
            }
            for (c, v) in row.cols.iter().zip(&row.vals) {
                out[*c as usize] += v * m;
            }
        }
    }

    fn apply(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (c, v) in row.cols.iter().zip(&row.vals) {
                acc += v * y[*c as usize];
            }
            out[r] = acc;
        }
    }

    fn max_residual(&self, y: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let mut acc = -row.rhs;
            for (c, v) in row.cols.iter().zip(&row.vals) {
                acc += v * y[*c as usize];
            }
            worst = worst.max(acc.abs());
        }
        worst
    }
}

/// Conjugate gradients on the Gram operator `A D^{-1} A^T`.
/// Returns the achieved relative residual.
fn solve_gram(
    rows: &SparseRows,
    inv_d: &DVector<f64>,
    rhs: &DVector<f64>,
    mu: &mut DVector<f64>,
    scratch_n: &mut DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let r_dim = rhs.len();
    let apply = |x: &DVector<f64>, out: &mut DVector<f64>, tmp: &mut DVector<f64>| {
        rows.apply_transpose(x, tmp);
        for i in 0..tmp.len() {
            tmp[i] *= inv_d[i];
        }
        rows.apply(tmp, out);
    };
    let norm_rhs = rhs.norm().max(1e-30);
    let mut ax = DVector::zeros(r_dim);
    apply(mu, &mut ax, scratch_n);
    let mut r = rhs - &ax;
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let mut ap = DVector::zeros(r_dim);
    for _ in 0..max_iter {
        if rs.sqrt() <= tol * norm_rhs {
            break;
        }
        apply(&p, &mut ap, scratch_n);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        mu.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.dot(&r);
        let beta = rs_new / rs;
        rs = rs_new;
        p *= beta;
        p += &r;
    }
    rs.sqrt() / norm_rhs
}

/// Solves the moment problem. Deterministic for fixed options: a fixed
/// iteration schedule with no randomness anywhere.
pub fn solve(problem: &SdpProblem, options: SolveOptions) -> Result<SolveResult> {
    let n = problem.index.len();
    let k = problem.psd_dim;
    let rows = SparseRows {
        rows: problem.rows.clone(),
    };
    let r_dim = problem.rows.len();

    let mult = problem.multiplicities();
    debug_assert!(mult.iter().all(|&m| m >= 1.0));
    let inv_d = DVector::from_iterator(n, mult.iter().map(|m| 1.0 / m));

    let c = DVector::from_column_slice(&problem.objective);
    let b = DVector::from_iterator(r_dim, problem.rows.iter().map(|r| r.rhs));

    let mut y: DVector<f64> = DVector::zeros(n);
    let mut s: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut u: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut mu: DVector<f64> = DVector::zeros(r_dim);
    let mut scratch = DVector::zeros(n);
    let mut rho = options.rho;
    let alpha = options.over_relaxation;

    let mut g_vec = DVector::zeros(n);
    let mut q = DMatrix::zeros(k, k);
    let mut status = SolveStatus::MaxIter;
    let mut iterations = options.max_iter;

    for iter in 0..options.max_iter {
        // y-step: argmin c·y + (rho/2) Σ (y[q(i,j)] - (S-U)[i,j])^2, A y = b.
        g_vec.fill(0.0);
        for j in 0..k {
            for i in 0..=j {
                if let Some(idx) = problem.entry(i, j) {
                    let t = s[(i, j)] - u[(i, j)];
                    g_vec[idx as usize] += if i == j { t } else { 2.0 * t };
                }
            }
        }
        let mut w = DVector::zeros(n);
        for i in 0..n {
            w[i] = (g_vec[i] - c[i] / rho) * inv_d[i];
        }
        let mut rhs = DVector::zeros(r_dim);
        rows.apply(&w, &mut rhs);
        rhs -= &b;
        solve_gram(&rows, &inv_d, &rhs, &mut mu, &mut scratch, 1e-13, 4 * r_dim.max(50));
        rows.apply_transpose(&mu, &mut scratch);
        for i in 0..n {
            y[i] = w[i] - scratch[i] * inv_d[i];
        }

        if iter == 0 {
            let affine = rows.max_residual(&y);
            if affine > 1e-6 {
                status = SolveStatus::InfeasibleSuspected;
                iterations = iter + 1;
                break;
            }
        }

        // S-step: PSD projection of the over-relaxed consensus point.
        for j in 0..k {
            for i in 0..=j {
                let v = problem.entry(i, j).map_or(0.0, |idx| y[idx as usize]);
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        let s_prev = s.clone();
        let relaxed = &q * alpha + &s_prev * (1.0 - alpha);
        let v = &relaxed + &u;
        let eig = v.symmetric_eigen();
        let mut rebuilt = DMatrix::zeros(k, k);
        for (idx, lambda) in eig.eigenvalues.iter().enumerate() {
            if *lambda > 0.0 {
                let col = eig.eigenvectors.column(idx);
                rebuilt.ger(*lambda, &col, &col, 1.0);
            }
        }
        // Symmetrize against accumulation drift.
        s = (&rebuilt + rebuilt.transpose()) * 0.5;

        // Dual update.
        u += relaxed - &s;

        let primal = (&q - &s).norm() / q.norm().max(1.0);
        let dual = rho * (&s - &s_prev).norm() / s.norm().max(1.0);
        if primal < options.tol && dual < options.tol {
            status = SolveStatus::Converged;
            iterations = iter + 1;
            break;
        }
        if (iter + 1) % 20 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    // Post-hoc certification from the final iterate.
    let primal_residual = rows.max_residual(&y);
    for j in 0..k {
        for i in 0..=j {
            let v = problem.entry(i, j).map_or(0.0, |idx| y[idx as usize]);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    let min_eig = if k == 0 {
        0.0
    } else {
        q.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let objective = c.dot(&y) * problem.objective_unscale;

    let mut moments = BTreeMap::new();
    for (i, m) in problem.index.monomials().iter().enumerate() {
        moments.insert(m.clone(), y[i]);
    }
    // Pin the unit moment exactly; the affine step holds it at one up to
    // conjugate-gradient tolerance.
    moments.insert(Monomial::unit(), 1.0);
    let pe = PseudoExpectation::from_moments(problem.degree, moments)?;

    Ok(SolveResult {
        pe,
        objective,
        iterations,
        primal_residual,
        psd_residual: (-min_eig).max(0.0),
        status,
    })
}
