//! Pseudo-expectations of bounded degree: storage, evaluation, conditioning,
//! moment matrices, feasibility certification and the product/majorization
//! inequality checker.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::Error;
use crate::graph::{validate_st_walk, EdgeId, Graph};
use crate::poly::{Monomial, Polynomial};
use crate::scalar::Scalar;
use crate::Result;

/// Default cap on the enumerated support basis of a feasibility check.
pub const DEFAULT_BASIS_LIMIT: usize = 200_000;

#[derive(Debug, Clone)]
enum Store<T> {
    /// Explicit moments; monomials absent from the map have moment zero.
    Moments(BTreeMap<Monomial, T>),
    /// Backed by a path distribution; moments are computed on demand as the
    /// total weight of paths containing the monomial. Always exactly feasible
    /// when the weights are exact.
    Distribution {
        paths: Vec<Vec<EdgeId>>,
        weights: Vec<T>,
    },
}

/// A linear functional on multilinear monomials up to a degree bound, with
/// `ψE[1] = 1`. Values are immutable; conditioning returns fresh values.
#[derive(Debug, Clone)]
pub struct PseudoExpectation<T: Scalar> {
    degree: usize,
    store: Store<T>,
}

impl<T: Scalar> PseudoExpectation<T> {
    /// Wraps explicit moments. The unit moment must be one.
    pub fn from_moments(degree: usize, moments: BTreeMap<Monomial, T>) -> Result<Self> {
        let unit = moments
            .get(&Monomial::unit())
            .cloned()
            .unwrap_or_else(T::zero);
        if (unit.clone() - T::one()).abs().to_f64() > 1e-9 {
            return Err(Error::CorruptPseudoExpectation(format!(
                "unit moment is {unit}, expected 1"
            )));
        }
        Ok(PseudoExpectation {
            degree,
            store: Store::Moments(moments),
        })
    }

    /// The true expectation of a distribution over source-sink paths: the
    /// moment of a monomial is the total weight of paths containing it.
    pub fn from_distribution(
        g: &Graph<T>,
        paths: &[Vec<EdgeId>],
        weights: &[T],
        degree: usize,
    ) -> Result<Self> {
        if paths.is_empty() || paths.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "paths and weights must be non-empty and aligned".into(),
            ));
        }
        let mut total = T::zero();
        for w in weights {
            if *w < T::zero() {
                return Err(Error::InvalidParameter("negative path weight".into()));
            }
            total += w.clone();
        }
        if (total - T::one()).abs().to_f64() > 1e-9 {
            return Err(Error::InvalidParameter(
                "path weights must sum to one".into(),
            ));
        }
        let mut sorted_paths = Vec::with_capacity(paths.len());
        for p in paths {
            validate_st_walk(g, p)?;
            let mut ids = p.clone();
            ids.sort_unstable();
            ids.dedup();
            sorted_paths.push(ids);
        }
        Ok(PseudoExpectation {
            degree,
            store: Store::Distribution {
                paths: sorted_paths,
                weights: weights.to_vec(),
            },
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Moment of a monomial; zero for monomials outside the support.
    pub fn moment(&self, m: &Monomial) -> Result<T> {
        if m.degree() > self.degree {
            return Err(Error::DegreeOverflow {
                monomial: m.to_string(),
                degree: m.degree(),
                cap: self.degree,
            });
        }
        Ok(self.moment_unchecked(m))
    }

    fn moment_unchecked(&self, m: &Monomial) -> T {
        match &self.store {
            Store::Moments(map) => map.get(m).cloned().unwrap_or_else(T::zero),
            Store::Distribution { paths, weights } => {
                let mut acc = T::zero();
                for (p, w) in paths.iter().zip(weights) {
                    if m.edges().iter().all(|e| p.binary_search(e).is_ok()) {
                        acc += w.clone();
                    }
                }
                acc
            }
        }
    }

    /// `ψE[f]` — exact linear combination of moments.
    pub fn evaluate(&self, f: &Polynomial<T>) -> Result<T> {
        let mut acc = T::zero();
        for (m, c) in f.terms() {
            acc += c.clone() * self.moment(m)?;
        }
        Ok(acc)
    }

    /// Conditional pseudo-expectation `ψE[· | g] = ψE[· g] / ψE[g]` for an SoS
    /// polynomial `g`; the available degree drops by `deg g`.
    pub fn condition(&self, g: &Polynomial<T>, null_tolerance: f64) -> Result<Self> {
        let dg = g.degree();
        if dg > self.degree {
            return Err(Error::DegreeOverflow {
                monomial: format!("{g}"),
                degree: dg,
                cap: self.degree,
            });
        }
        let mass = self.evaluate(g)?;
        if mass.to_f64() <= null_tolerance {
            return Err(Error::ConditionOnNull {
                what: g.to_string(),
                mass: mass.to_f64(),
            });
        }
        let new_degree = self.degree - dg;
        match &self.store {
            Store::Moments(map) => {
                let mut out = BTreeMap::new();
                for mono in map.keys() {
                    if mono.degree() > new_degree {
                        continue;
                    }
                    let mut val = T::zero();
                    for (gm, gc) in g.terms() {
                        val += gc.clone() * self.moment_unchecked(&mono.union(gm));
                    }
                    let cond = val / mass.clone();
                    if cond != T::zero() {
                        out.insert(mono.clone(), cond);
                    }
                }
                out.insert(Monomial::unit(), T::one());
                Ok(PseudoExpectation {
                    degree: new_degree,
                    store: Store::Moments(out),
                })
            }
            Store::Distribution { paths, weights } => {
                // Reweighting by g's value at each path point stays exact.
                let mut new_paths = Vec::new();
                let mut new_weights = Vec::new();
                for (p, w) in paths.iter().zip(weights) {
                    let gval = g.eval_on_set(p);
                    let contrib = w.clone() * gval;
                    if contrib != T::zero() {
                        new_paths.push(p.clone());
                        new_weights.push(contrib / mass.clone());
                    }
                }
                Ok(PseudoExpectation {
                    degree: new_degree,
                    store: Store::Distribution {
                        paths: new_paths,
                        weights: new_weights,
                    },
                })
            }
        }
    }

    /// Conditioning on the product monomial `∏_{e in A} x_e`.
    pub fn condition_on_edges(&self, edges: &[EdgeId], null_tolerance: f64) -> Result<Self> {
        let mut g = Polynomial::zero();
        g.add_term(Monomial::from_edges(edges.to_vec()), T::one());
        self.condition(&g, null_tolerance)
    }

    /// Monomials with non-zero potential support up to `max_degree`. For
    /// explicit moments these are the stored keys; for distributions, all
    /// subsets of path supports within the degree bound.
    pub fn support_basis(&self, max_degree: usize, limit: usize) -> Result<Vec<Monomial>> {
        match &self.store {
            Store::Moments(map) => Ok(map
                .keys()
                .filter(|m| m.degree() <= max_degree)
                .cloned()
                .collect()),
            Store::Distribution { paths, .. } => {
                let mut set: BTreeSet<Monomial> = BTreeSet::new();
                set.insert(Monomial::unit());
                for p in paths {
                    let mut stack: Vec<(usize, Vec<EdgeId>)> = vec![(0, Vec::new())];
                    while let Some((start, current)) = stack.pop() {
                        for i in start..p.len() {
                            if current.len() >= max_degree {
                                break;
                            }
                            let mut next = current.clone();
                            next.push(p[i]);
                            set.insert(Monomial::from_edges(next.clone()));
                            if set.len() > limit {
                                return Err(Error::SizeLimit {
                                    what: "pseudo-expectation support basis".into(),
                                    size: set.len(),
                                    limit,
                                });
                            }
                            stack.push((i + 1, next));
                        }
                    }
                }
                Ok(set.into_iter().collect())
            }
        }
    }

    /// Moment matrix over an explicit row basis, as floats.
    pub fn moment_matrix(&self, basis: &[Monomial]) -> Result<DMatrix<f64>> {
        let n = basis.len();
        let mut mat = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.moment(&basis[i].union(&basis[j]))?.to_f64();
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        Ok(mat)
    }

    /// Certifies feasibility: PSD check of the moment matrix over the degree
    /// `d = degree/2` support basis plus residuals `ψE[f·M]` for every
    /// constraint `f` and basis monomial `M` within degree. Reports, never
    /// fails, on infeasibility.
    pub fn check_feasibility(
        &self,
        constraints: &[Polynomial<T>],
        tol: f64,
    ) -> Result<FeasibilityReport> {
        let basis = self.support_basis(self.degree, DEFAULT_BASIS_LIMIT)?;
        let half = self.degree / 2;
        let rows: Vec<Monomial> = basis
            .iter()
            .filter(|m| m.degree() <= half)
            .cloned()
            .collect();
        let mat = self.moment_matrix(&rows)?;
        let min_eigenvalue = if rows.is_empty() {
            0.0
        } else {
            let eig = mat.symmetric_eigenvalues();
            eig.iter().copied().fold(f64::INFINITY, f64::min)
        };

        let mut max_residual = 0.0f64;
        let mut violations = Vec::new();
        for (ci, f) in constraints.iter().enumerate() {
            let df = f.degree();
            for m in &basis {
                if m.degree() + df > self.degree {
                    continue;
                }
                let mut val = T::zero();
                for (fm, fc) in f.terms() {
                    val += fc.clone() * self.moment_unchecked(&m.union(fm));
                }
                let r = val.abs().to_f64();
                if r > max_residual {
                    max_residual = r;
                }
                if r > tol {
                    violations.push(format!("constraint {ci} x ({m}): residual {r:.3e}"));
                }
            }
        }
        if min_eigenvalue < -tol {
            violations.push(format!("moment matrix eigenvalue {min_eigenvalue:.3e}"));
        }
        Ok(FeasibilityReport {
            min_eigenvalue,
            max_residual,
            psd_dim: rows.len(),
            violations,
            tolerance: tol,
        })
    }

    /// Product inequality `Π ψE[f^{a_i}] >= Π ψE[f^{b_i}]` for `a ⪰ b` and an
    /// SoS polynomial `f`. Returns the verdict with both witness products.
    pub fn check_majorization(
        &self,
        f: &Polynomial<T>,
        a: &[u32],
        b: &[u32],
        tol: f64,
    ) -> Result<MajorizationCheck> {
        let (a, b) = validate_majorizing(a, b)?;
        let top = *a.first().unwrap_or(&0) as usize * f.degree();
        if top > self.degree {
            return Err(Error::DegreeOverflow {
                monomial: format!("{f}^{}", a[0]),
                degree: top,
                cap: self.degree,
            });
        }
        let product = |seq: &[u32]| -> Result<f64> {
            let mut acc = 1.0f64;
            for &e in seq {
                if e == 0 {
                    continue;
                }
                let power = f.pow(e, self.degree)?;
                acc *= self.evaluate(&power)?.to_f64();
            }
            Ok(acc)
        };
        let product_a = product(&a)?;
        let product_b = product(&b)?;
        Ok(MajorizationCheck {
            holds: product_a >= product_b - tol,
            product_a,
            product_b,
        })
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> PseudoExpectation<U> {
        let store = match &self.store {
            Store::Moments(map) => Store::Moments(
                map.iter()
                    .map(|(m, v)| (m.clone(), f(v)))
                    .collect(),
            ),
            Store::Distribution { paths, weights } => Store::Distribution {
                paths: paths.clone(),
                weights: weights.iter().map(&f).collect(),
            },
        };
        PseudoExpectation {
            degree: self.degree,
            store,
        }
    }

    /// Explicit (monomial, moment) view of the support. For distributions the
    /// basis is enumerated up to the degree bound.
    pub fn dense_moments(&self, limit: usize) -> Result<Vec<(Monomial, T)>> {
        let basis = self.support_basis(self.degree, limit)?;
        let mut out = Vec::with_capacity(basis.len());
        for m in basis {
            let v = self.moment_unchecked(&m);
            if v != T::zero() || m.degree() == 0 {
                out.push((m, v));
            }
        }
        Ok(out)
    }
}

impl PseudoExpectation<f64> {
    pub fn to_exact(&self) -> PseudoExpectation<crate::Exact> {
        self.map_scalar(|v| crate::Exact::from_f64(*v))
    }
}

impl PseudoExpectation<crate::Exact> {
    pub fn to_f64(&self) -> PseudoExpectation<f64> {
        self.map_scalar(|v| v.to_f64())
    }
}

/// Outcome of a feasibility check; deterministic for a given
/// pseudo-expectation and tolerance.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub min_eigenvalue: f64,
    pub max_residual: f64,
    pub psd_dim: usize,
    pub violations: Vec<String>,
    pub tolerance: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verdict and witness products of a majorization check.
#[derive(Debug, Clone, Copy)]
pub struct MajorizationCheck {
    pub holds: bool,
    pub product_a: f64,
    pub product_b: f64,
}

/// Validates `a ⪰ b`: equal sums and dominating prefixes after sorting both
/// descending and padding with zeros. Returns the canonical forms.
pub fn validate_majorizing(a: &[u32], b: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(|x, y| y.cmp(x));
    b.sort_unstable_by(|x, y| y.cmp(x));
    let len = a.len().max(b.len());
    a.resize(len, 0);
    b.resize(len, 0);
    let not_majorizing = |a: &[u32], b: &[u32]| Error::NotMajorizing {
        a: a.to_vec(),
        b: b.to_vec(),
    };
    if a.iter().sum::<u32>() != b.iter().sum::<u32>() {
        return Err(not_majorizing(&a, &b));
    }
    let mut pa = 0u32;
    let mut pb = 0u32;
    for i in 0..len {
        pa += a[i];
        pb += b[i];
        if pa < pb {
            return Err(not_majorizing(&a, &b));
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CostVector, Graph};
    use crate::poly::{flow_constraints, Monomial, Polynomial};
    use crate::Exact;

    fn parallel_pair() -> Graph<Exact> {
        let mut g: Graph<Exact> = Graph::new(2, 1, 0, 1);
        g.add_edge(0, 1, CostVector::scalar(Exact::from_int(1)));
        g.add_edge(0, 1, CostVector::scalar(Exact::from_int(0)));
        g
    }

    fn uniform_pair_pe() -> PseudoExpectation<Exact> {
        let g = parallel_pair();
        let half = Exact::from_ratio(1, 2);
        PseudoExpectation::from_distribution(
            &g,
            &[vec![EdgeId(0)], vec![EdgeId(1)]],
            &[half.clone(), half],
            2,
        )
        .unwrap()
    }

    #[test]
    fn unit_moment_is_one() {
        let pe = uniform_pair_pe();
        assert_eq!(pe.moment(&Monomial::unit()).unwrap(), Exact::from_int(1));
        assert_eq!(
            pe.evaluate(&Polynomial::constant(Exact::from_int(1))).unwrap(),
            Exact::from_int(1)
        );
    }

    #[test]
    fn distribution_moments_are_exact() {
        let pe = uniform_pair_pe();
        let half = Exact::from_ratio(1, 2);
        assert_eq!(pe.moment(&Monomial::var(EdgeId(0))).unwrap(), half);
        assert_eq!(
            pe.moment(&Monomial::from_edges(vec![EdgeId(0), EdgeId(1)]))
                .unwrap(),
            Exact::from_int(0)
        );
    }

    #[test]
    fn parallel_pair_moment_matrix_eigenvalues() {
        // Basis {1, x_a, x_b}: [[1, .5, .5], [.5, .5, 0], [.5, 0, .5]].
        // Rank two (average of two rank-one path moments), so the spectrum is
        // {1.5, 0.5, 0}.
        let pe = uniform_pair_pe();
        let basis = vec![
            Monomial::unit(),
            Monomial::var(EdgeId(0)),
            Monomial::var(EdgeId(1)),
        ];
        let mat = pe.moment_matrix(&basis).unwrap();
        assert_eq!(mat[(0, 1)], 0.5);
        assert_eq!(mat[(1, 2)], 0.0);
        let mut eig: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((eig[0] - 1.5).abs() < 1e-12);
        assert!((eig[1] - 0.5).abs() < 1e-12);
        assert!(eig[2].abs() < 1e-12);
    }

    #[test]
    fn conditioning_identity_and_values() {
        let pe = uniform_pair_pe();
        // Conditioning on the constant one is the identity.
        let same = pe
            .condition(&Polynomial::constant(Exact::from_int(1)), 1e-9)
            .unwrap();
        assert_eq!(
            same.moment(&Monomial::var(EdgeId(0))).unwrap(),
            pe.moment(&Monomial::var(EdgeId(0))).unwrap()
        );
        // ψE[x_b | x_a] = ψE[x_a x_b] / ψE[x_a] = 0 / 0.5 = 0.
        let cond = pe.condition_on_edges(&[EdgeId(0)], 1e-9).unwrap();
        assert_eq!(cond.degree(), 1);
        assert_eq!(
            cond.moment(&Monomial::var(EdgeId(1))).unwrap(),
            Exact::from_int(0)
        );
    }

    #[test]
    fn conditioning_on_null_event_fails() {
        let pe = uniform_pair_pe();
        // x_a x_b has zero mass.
        let err = pe
            .condition_on_edges(&[EdgeId(0), EdgeId(1)], 1e-9)
            .unwrap_err();
        assert!(matches!(err, Error::ConditionOnNull { .. }));
    }

    #[test]
    fn conditioning_chain_is_multiplicative() {
        // Three-edge chain, conditioning on x_0 then x_1 equals conditioning
        // on the product x_0 x_1.
        let mut g: Graph<f64> = Graph::new(4, 1, 0, 3);
        g.add_edge(0, 1, CostVector::scalar(1.0));
        g.add_edge(1, 2, CostVector::scalar(1.0));
        g.add_edge(2, 3, CostVector::scalar(1.0));
        let pe =
            PseudoExpectation::from_distribution(&g, &[vec![EdgeId(0), EdgeId(1), EdgeId(2)]], &[1.0], 6)
                .unwrap();
        let chained = pe
            .condition_on_edges(&[EdgeId(0)], 1e-9)
            .unwrap()
            .condition_on_edges(&[EdgeId(1)], 1e-9)
            .unwrap();
        let joint = pe.condition_on_edges(&[EdgeId(0), EdgeId(1)], 1e-9).unwrap();
        for m in [Monomial::unit(), Monomial::var(EdgeId(2))] {
            assert!(
                (chained.moment(&m).unwrap() - joint.moment(&m).unwrap()).abs() < 1e-12
            );
        }
        assert_eq!(chained.degree(), joint.degree());
    }

    #[test]
    fn conditioning_chain_telescopes() {
        // ψE[Π_{e in A∪{f}} x_e] = ψE_A[x_f] · ψE[Π_{e in A} x_e], the chain
        // identity the layered sampler relies on, exactly.
        let mut g: Graph<Exact> = Graph::new(4, 1, 0, 3);
        for (u, v) in [(0, 1), (0, 1), (1, 2), (1, 2), (2, 3), (2, 3)] {
            g.add_edge(u, v, CostVector::scalar(Exact::from_int(1)));
        }
        let paths = vec![
            vec![EdgeId(0), EdgeId(2), EdgeId(4)],
            vec![EdgeId(0), EdgeId(3), EdgeId(5)],
            vec![EdgeId(1), EdgeId(3), EdgeId(4)],
        ];
        let w = Exact::from_ratio(1, 3);
        let pe =
            PseudoExpectation::from_distribution(&g, &paths, &vec![w; 3], 6).unwrap();
        for chain in [
            vec![EdgeId(0), EdgeId(2), EdgeId(4)],
            vec![EdgeId(1), EdgeId(3), EdgeId(4)],
            vec![EdgeId(0), EdgeId(3)],
        ] {
            for split in 1..chain.len() {
                let (head, rest) = chain.split_at(split);
                if rest.is_empty() {
                    continue;
                }
                let head_mass = pe
                    .moment(&Monomial::from_edges(head.to_vec()))
                    .unwrap();
                if head_mass == Exact::from_int(0) {
                    continue;
                }
                let conditioned = pe.condition_on_edges(head, 1e-12).unwrap();
                let step = conditioned
                    .moment(&Monomial::from_edges(rest.to_vec()))
                    .unwrap();
                let joint = pe
                    .moment(&Monomial::from_edges(chain.clone()))
                    .unwrap();
                assert_eq!(step * head_mass, joint, "chain {chain:?} split {split}");
            }
        }
    }

    #[test]
    fn distribution_is_exactly_feasible() {
        let g = parallel_pair();
        let pe = uniform_pair_pe();
        let constraints = flow_constraints(&g).unwrap();
        let report = pe.check_feasibility(&constraints, 1e-12).unwrap();
        assert!(report.feasible(), "{:?}", report.violations);
        assert_eq!(report.max_residual, 0.0);
        assert!(report.min_eigenvalue >= -1e-12);
    }

    #[test]
    fn perturbed_moment_reports_flow_residual() {
        let g = parallel_pair();
        let pe = uniform_pair_pe().to_f64();
        let mut moments: BTreeMap<Monomial, f64> =
            pe.dense_moments(1000).unwrap().into_iter().collect();
        *moments.get_mut(&Monomial::var(EdgeId(0))).unwrap() += 0.1;
        let bumped = PseudoExpectation::from_moments(2, moments).unwrap();
        let constraints = flow_constraints(&g.to_f64()).unwrap();
        let report = bumped.check_feasibility(&constraints, 1e-9).unwrap();
        assert!(!report.feasible());
        assert!((report.max_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn majorization_validation() {
        assert!(validate_majorizing(&[2, 0], &[1, 1]).is_ok());
        assert!(validate_majorizing(&[3, 1], &[2, 2]).is_ok());
        assert!(matches!(
            validate_majorizing(&[1, 1], &[2, 0]),
            Err(Error::NotMajorizing { .. })
        ));
        assert!(matches!(
            validate_majorizing(&[2, 1], &[1, 1]),
            Err(Error::NotMajorizing { .. })
        ));
    }

    #[test]
    fn majorization_trivial_and_lyapunov() {
        let pe = uniform_pair_pe().to_f64();
        let mut f = Polynomial::var(EdgeId(0));
        f.add_term(Monomial::var(EdgeId(1)), 2.0);
        // a = b: equality.
        let eq = pe.check_majorization(&f, &[1, 1], &[1, 1], 0.0).unwrap();
        assert!(eq.holds);
        assert!((eq.product_a - eq.product_b).abs() < 1e-15);
        // Lyapunov: ψE[f^2]ψE[1] >= ψE[f]^2.
        let ly = pe.check_majorization(&f, &[2, 0], &[1, 1], 1e-12).unwrap();
        assert!(ly.holds);
        assert!(ly.product_a >= ly.product_b - 1e-12);
    }
}
