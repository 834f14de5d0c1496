//! Multilinear polynomials over Boolean edge variables: arithmetic in the
//! quotient ring (x_e^2 = x_e), the relaxation's objective and constraint
//! polynomials, and the interned monomial basis used by the moment machinery.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::Error;
use crate::graph::{Adjacency, Compatibility, EdgeId, Graph};
use crate::scalar::Scalar;
use crate::Result;

/// Product of distinct edge variables, kept sorted; the empty monomial is the
/// constant 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<EdgeId>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(e: EdgeId) -> Self {
        Monomial(vec![e])
    }

    /// Normalizes: sorts and removes duplicates (x_e^2 = x_e).
    pub fn from_edges(mut edges: Vec<EdgeId>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Monomial(edges)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn is_subset_of(&self, edges: &[EdgeId]) -> bool {
        self.0.iter().all(|e| edges.contains(e))
    }

    /// Multilinear product: union of the variable sets.
    pub fn union(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "1")
        } else {
            let vars: Vec<String> = self.0.iter().map(|e| format!("x{e}")).collect();
            write!(f, "{}", vars.join(" "))
        }
    }
}

/// Multilinear polynomial: monomial -> coefficient, no zero coefficients
/// stored, addition and multiplication reduce modulo x_e^2 - x_e.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Default for Polynomial<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero() -> Self {
        Polynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::unit(), c);
        p
    }

    pub fn var(e: EdgeId) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(e), T::one());
        p
    }

    pub fn add_term(&mut self, mono: Monomial, coeff: T) {
        if coeff == T::zero() {
            return;
        }
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + coeff;
                if sum == T::zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, mono: &Monomial) -> T {
        self.terms.get(mono).cloned().unwrap_or_else(T::zero)
    }

    pub fn add(&self, other: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, factor: &T) -> Polynomial<T> {
        let mut out = Self::zero();
        if *factor == T::zero() {
            return out;
        }
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c.clone() * factor.clone());
        }
        out
    }

    /// Product reduced multilinearly; any product monomial above `cap`
    /// aborts with a degree-overflow error naming it.
    pub fn multiply(&self, other: &Polynomial<T>, cap: usize) -> Result<Polynomial<T>> {
        let mut out = Self::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                let m = ma.union(mb);
                if m.degree() > cap {
                    return Err(Error::DegreeOverflow {
                        monomial: m.to_string(),
                        degree: m.degree(),
                        cap,
                    });
                }
                out.add_term(m, ca.clone() * cb.clone());
            }
        }
        Ok(out)
    }

    /// `self^e` by iterated capped multiplication (reduction collapses terms
    /// early, keeping intermediates near the final size).
    pub fn pow(&self, e: u32, cap: usize) -> Result<Polynomial<T>> {
        let mut acc = Self::constant(T::one());
        for _ in 0..e {
            acc = acc.multiply(self, cap)?;
        }
        Ok(acc)
    }

    /// Evaluation at the Boolean point with the given coordinates set to one:
    /// the sum of coefficients over monomials contained in `ones`.
    pub fn eval_on_set(&self, ones: &[EdgeId]) -> T {
        let mut acc = T::zero();
        for (m, c) in self.terms() {
            if m.is_subset_of(ones) {
                acc += c.clone();
            }
        }
        acc
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Polynomial<U> {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), f(c));
        }
        out
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    /// Deterministic textual form, degree-then-lexicographic term order:
    /// `c * x3 x7 + ...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut order: Vec<&Monomial> = self.terms.keys().collect();
        order.sort_by_key(|m| (m.degree(), (*m).clone()));
        let rendered: Vec<String> = order
            .into_iter()
            .map(|m| {
                let c = &self.terms[m];
                if m.degree() == 0 {
                    format!("{c}")
                } else {
                    format!("{c} * {m}")
                }
            })
            .collect();
        write!(f, "{}", rendered.join(" + "))
    }
}

/// The relaxation objective `Σ_{i<=ℓ} (Σ_e c_e(i) x_e)^p`, expanded and
/// reduced. All coefficients are non-negative when all costs are.
pub fn lp_objective<T: Scalar>(g: &Graph<T>, p: u32) -> Result<Polynomial<T>> {
    if p < 1 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let mut total = Polynomial::zero();
    for i in 0..g.cost_dim() {
        let mut linear = Polynomial::zero();
        for (id, e) in g.edges() {
            let c = e.cost.entries[i].clone();
            if c != T::zero() {
                linear.add_term(Monomial::var(id), c);
            }
        }
        if linear.is_empty() {
            continue;
        }
        total = total.add(&linear.pow(p, p as usize)?);
    }
    Ok(total)
}

/// Unit-flow constraints as polynomials constrained to zero: the source row
/// `Σ_{δ+(s)} x_e - 1` followed by one conservation row per internal vertex,
/// `n - 1` rows in total.
pub fn flow_constraints<T: Scalar>(g: &Graph<T>) -> Result<Vec<Polynomial<T>>> {
    let (s, t) = (g.source(), g.sink());
    if s == t {
        return Err(Error::Structure(
            "flow constraints need distinct terminals".into(),
        ));
    }
    let adj = Adjacency::new(g);
    let mut rows = Vec::with_capacity(g.vertex_count() - 1);
    let mut source_row = Polynomial::zero();
    for &e in adj.out(s) {
        source_row.add_term(Monomial::var(e), T::one());
    }
    source_row.add_term(Monomial::unit(), -T::one());
    rows.push(source_row);
    for u in 0..g.vertex_count() {
        if u == s || u == t {
            continue;
        }
        let mut row = Polynomial::zero();
        for &e in adj.out(u) {
            row.add_term(Monomial::var(e), T::one());
        }
        for &e in adj.incoming(u) {
            row.add_term(Monomial::var(e), -T::one());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Group indicator `h_R = Σ_{e in R} x_e`; the caller pairs it with the
/// squared constraint.
pub fn group_indicator<T: Scalar>(edges: &[EdgeId]) -> Result<Polynomial<T>> {
    if edges.is_empty() {
        return Err(Error::InvalidParameter("empty edge group".into()));
    }
    let mut p = Polynomial::zero();
    for &e in edges {
        p.add_term(Monomial::var(e), T::one());
    }
    Ok(p)
}

/// Interned basis of path-supported monomials up to a degree cap.
///
/// A monomial is supported when its edges are pairwise compatible; in a DAG
/// that is exactly the condition for the whole set to lie on one source-sink
/// path, and every feasible pseudo-expectation vanishes on the rest. Keying
/// moments on this basis keeps the moment problem at desk scale.
#[derive(Debug, Clone)]
pub struct MonomialIndex {
    degree: usize,
    monomials: Vec<Monomial>,
    pos: HashMap<Monomial, u32>,
}

impl MonomialIndex {
    pub fn build(compat: &Compatibility, m: usize, degree: usize, limit: usize) -> Result<Self> {
        let edges: Vec<EdgeId> = (0..m as u32).map(EdgeId).collect();
        let mut monomials: Vec<Monomial> = Vec::new();
        let mut current: Vec<EdgeId> = Vec::new();
        fn extend(
            start: usize,
            edges: &[EdgeId],
            compat: &Compatibility,
            degree: usize,
            limit: usize,
            current: &mut Vec<EdgeId>,
            out: &mut Vec<Monomial>,
        ) -> Result<()> {
            if out.len() > limit {
                return Err(Error::SizeLimit {
                    what: "monomial basis".into(),
                    size: out.len(),
                    limit,
                });
            }
            out.push(Monomial::from_edges(current.clone()));
            if current.len() == degree {
                return Ok(());
            }
            for (offset, &e) in edges[start..].iter().enumerate() {
                if !compat.active(e) {
                    continue;
                }
                if current.iter().any(|&f| !compat.compatible(f, e)) {
                    continue;
                }
                current.push(e);
                extend(
                    start + offset + 1,
                    edges,
                    compat,
                    degree,
                    limit,
                    current,
                    out,
                )?;
                current.pop();
            }
            Ok(())
        }
        extend(0, &edges, compat, degree, limit, &mut current, &mut monomials)?;
        monomials.sort_by(|a, b| (a.degree(), a).cmp(&(b.degree(), b)));
        let pos = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as u32))
            .collect();
        Ok(MonomialIndex {
            degree,
            monomials,
            pos,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, i: u32) -> &Monomial {
        &self.monomials[i as usize]
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Dense position; `None` for unsupported monomials (zero moment).
    pub fn position(&self, m: &Monomial) -> Option<u32> {
        self.pos.get(m).copied()
    }

    /// Number of basis monomials with degree at most `d` (a prefix, since the
    /// basis is sorted by degree first).
    pub fn count_up_to_degree(&self, d: usize) -> usize {
        self.monomials
            .partition_point(|m| m.degree() <= d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CostVector, Reachability};

    fn x(i: u32) -> Polynomial<f64> {
        Polynomial::var(EdgeId(i))
    }

    #[test]
    fn idempotence() {
        let p = x(1).multiply(&x(1), 2).unwrap();
        assert_eq!(p, x(1));
    }

    #[test]
    fn square_of_sum_reduces() {
        let s = x(1).add(&x(2));
        let sq = s.multiply(&s, 2).unwrap();
        let mut want = x(1).add(&x(2));
        want.add_term(
            Monomial::from_edges(vec![EdgeId(1), EdgeId(2)]),
            2.0,
        );
        assert_eq!(sq, want);
    }

    #[test]
    fn difference_of_squares_on_boolean_points() {
        let sum = x(1).add(&x(2));
        let diff = x(1).sub(&x(2));
        let prod = sum.multiply(&diff, 2).unwrap();
        // (x1 + x2)(x1 - x2) = x1 - x2 after reduction; check on all four
        // Boolean points.
        for ones in [vec![], vec![EdgeId(1)], vec![EdgeId(2)], vec![EdgeId(1), EdgeId(2)]] {
            assert_eq!(
                prod.eval_on_set(&ones),
                sum.eval_on_set(&ones) * diff.eval_on_set(&ones)
            );
            assert_eq!(prod.eval_on_set(&ones), x(1).sub(&x(2)).eval_on_set(&ones));
        }
        assert_eq!(prod, x(1).sub(&x(2)));
    }

    #[test]
    fn degree_overflow_names_the_monomial() {
        let p = x(1).multiply(&x(2), 2).unwrap();
        let err = p.multiply(&x(3), 2).unwrap_err();
        match err {
            Error::DegreeOverflow { monomial, degree, cap } => {
                assert_eq!(degree, 3);
                assert_eq!(cap, 2);
                assert!(monomial.contains("x3"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn objective_single_edge_squared() {
        let mut g: Graph<f64> = Graph::new(2, 1, 0, 1);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        let obj = lp_objective(&g, 2).unwrap();
        assert_eq!(obj, x(0));
    }

    #[test]
    fn objective_two_series_edges() {
        let mut g: Graph<f64> = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(1.0));
        let obj = lp_objective(&g, 2).unwrap();
        let mut want = x(0).add(&x(1));
        want.add_term(Monomial::from_edges(vec![EdgeId(0), EdgeId(1)]), 2.0);
        assert_eq!(obj, want);
        // On the unique full path the objective equals (1 + 1)^2.
        assert_eq!(obj.eval_on_set(&[EdgeId(0), EdgeId(1)]), 4.0);
    }

    #[test]
    fn objective_two_parallel_basis_costs() {
        let mut g: Graph<f64> = Graph::new(2, 2, 0, 1);
        g.add_edge(0, 1, CostVector::basis(2, 0, 1.0));
        g.add_edge(0, 1, CostVector::basis(2, 1, 1.0));
        let obj = lp_objective(&g, 2).unwrap();
        assert_eq!(obj, x(0).add(&x(1)));
    }

    #[test]
    fn objective_coefficients_nonnegative() {
        let mut g: Graph<f64> = Graph::new(3, 2, 0, 2);
        g.add_edge(0, 1, CostVector::new(vec![0.5, 1.5]));
        g.add_edge(1, 2, CostVector::new(vec![2.0, 0.25]));
        g.add_edge(0, 2, CostVector::new(vec![1.0, 1.0]));
        for p in 1..=3 {
            let obj = lp_objective(&g, p).unwrap();
            assert!(obj.terms().all(|(_, c)| *c >= 0.0));
        }
    }

    #[test]
    fn flow_rows_for_named_cases() {
        // Single edge: one row, x0 - 1.
        let mut g: Graph<f64> = Graph::new(2, 1, 0, 1);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        let rows = flow_constraints(&g).unwrap();
        assert_eq!(rows.len(), 1);
        let mut want = x(0);
        want.add_term(Monomial::unit(), -1.0);
        assert_eq!(rows[0], want);

        // Path s -> a -> t: {x0 - 1, x1 - x0}.
        let mut g: Graph<f64> = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(1.0));
        let rows = flow_constraints(&g).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], x(1).sub(&x(0)));

        // Two parallel edges: x0 + x1 - 1.
        let mut g: Graph<f64> = Graph::new(2, 1, 0, 1);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(0, 1, CostVector::scalar(0.0));
        let rows = flow_constraints(&g).unwrap();
        assert_eq!(rows.len(), 1);
        let mut want = x(0).add(&x(1));
        want.add_term(Monomial::unit(), -1.0);
        assert_eq!(rows[0], want);
    }

    #[test]
    fn group_indicator_and_square() {
        assert!(group_indicator::<f64>(&[]).is_err());
        let h = group_indicator::<f64>(&[EdgeId(1)]).unwrap();
        assert_eq!(h, x(1));
        let h = group_indicator::<f64>(&[EdgeId(1), EdgeId(2)]).unwrap();
        let sq = h.multiply(&h, 2).unwrap();
        let mut want = x(1).add(&x(2));
        want.add_term(Monomial::from_edges(vec![EdgeId(1), EdgeId(2)]), 2.0);
        assert_eq!(sq, want);
    }

    #[test]
    fn display_is_deterministic() {
        let mut p = x(7).scale(&3.0);
        p.add_term(Monomial::from_edges(vec![EdgeId(3), EdgeId(7)]), 2.0);
        p.add_term(Monomial::unit(), 1.0);
        assert_eq!(p.to_string(), "1 + 3 * x7 + 2 * x3 x7");
    }

    #[test]
    fn support_index_excludes_incompatible_pairs() {
        // Two parallel edges then one series edge.
        let mut g: Graph<f64> = Graph::new(3, 1, 0, 2);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(0, 1, CostVector::scalar(0.0));
        g.add_edge(1, 2, CostVector::scalar(1.0));
        let reach = Reachability::new(&g);
        let compat = Compatibility::new(&g, &reach);
        let index = MonomialIndex::build(&compat, g.edge_count(), 4, 10_000).unwrap();
        // 1, x0, x1, x2, x0x2, x1x2 — but not x0x1 (parallel pair).
        assert_eq!(index.len(), 6);
        assert!(index
            .position(&Monomial::from_edges(vec![EdgeId(0), EdgeId(1)]))
            .is_none());
        assert!(index
            .position(&Monomial::from_edges(vec![EdgeId(0), EdgeId(2)]))
            .is_some());
        assert_eq!(index.count_up_to_degree(1), 4);
    }

    proptest::proptest! {
        // Reduction modulo x^2 = x never changes values on Boolean points:
        // exhaustive over the hypercube for every sampled polynomial pair.
        #[test]
        fn reduced_product_agrees_on_hypercube(
            terms_a in proptest::collection::vec((0u32..6, -4i32..=4), 1..6),
            terms_b in proptest::collection::vec((0u32..6, -4i32..=4), 1..6),
        ) {
            let build = |terms: &[(u32, i32)]| {
                let mut p: Polynomial<f64> = Polynomial::zero();
                for (i, (var, coeff)) in terms.iter().enumerate() {
                    let mono = if i % 3 == 2 {
                        Monomial::from_edges(vec![EdgeId(*var), EdgeId((var + 1) % 6)])
                    } else {
                        Monomial::var(EdgeId(*var))
                    };
                    p.add_term(mono, *coeff as f64);
                }
                p
            };
            let a = build(&terms_a);
            let b = build(&terms_b);
            let prod = a.multiply(&b, 12).unwrap();
            for mask in 0u32..64 {
                let ones: Vec<EdgeId> =
                    (0..6).filter(|i| mask & (1 << i) != 0).map(EdgeId).collect();
                let lhs = prod.eval_on_set(&ones);
                let rhs = a.eval_on_set(&ones) * b.eval_on_set(&ones);
                proptest::prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eval_matches_symbolic_expansion_exhaustively() {
        // Reduced product evaluated on every Boolean point equals the product
        // of factor evaluations (small exhaustive grid).
        let f = x(0).add(&x(2)).add(&Polynomial::constant(0.5));
        let g = x(1).sub(&x(2)).scale(&2.0);
        let prod = f.multiply(&g, 3).unwrap();
        for mask in 0u32..8 {
            let ones: Vec<EdgeId> = (0..3).filter(|i| mask & (1 << i) != 0).map(EdgeId).collect();
            let lhs = prod.eval_on_set(&ones);
            let rhs = f.eval_on_set(&ones) * g.eval_on_set(&ones);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
