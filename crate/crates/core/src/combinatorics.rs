//! Integer partitions, multidimensional Bell numbers, the resulting
//! approximation factor, and the iterated Poisson branching process.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::Error;
use crate::Result;

/// Weakly decreasing positive parts summing to the partitioned integer.
pub type Partition = Vec<u32>;

/// All partitions of `p`, largest part first: `3 -> [3], [2,1], [1,1,1]`.
pub fn partitions(p: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut current: Vec<u32> = if p == 0 { vec![] } else { vec![p] };
    loop {
        out.push(current.clone());
        // Find the last part greater than 1, fold the tail into it.
        let Some(k) = current.iter().rposition(|&x| x > 1) else {
            break;
        };
        let mut rem: u32 = current[k + 1..].iter().sum::<u32>() + 1;
        current.truncate(k + 1);
        current[k] -= 1;
        let unit = current[k];
        while rem > 0 {
            let part = rem.min(unit);
            current.push(part);
            rem -= part;
        }
    }
    if p == 0 {
        out.truncate(1);
    }
    out
}

fn factorial(n: u32) -> BigUint {
    let mut acc = BigUint::one();
    for k in 2..=n as u64 {
        acc *= BigUint::from(k);
    }
    acc
}

/// Multinomial coefficient `p! / Π parts_i!`.
pub fn multinomial(p: u32, parts: &[u32]) -> BigUint {
    debug_assert_eq!(parts.iter().sum::<u32>(), p);
    let mut num = factorial(p);
    for &a in parts {
        num /= factorial(a);
    }
    num
}

/// Number of times `j` appears in the partition.
fn count_of(j: u32, partition: &[u32]) -> u32 {
    partition.iter().filter(|&&x| x == j).count() as u32
}

/// Eagerly built table of multidimensional Bell numbers.
///
/// `bell(d, p)` counts length-`d` chains of successively refining partitions
/// of a `p`-element set; `bell(0, p) = bell(d, 0) = 1`. Computed with exact
/// integer arithmetic through the recurrence over integer partitions.
#[derive(Debug, Clone)]
pub struct BellTable {
    max_dim: usize,
    max_p: usize,
    values: Vec<BigUint>,
}

impl BellTable {
    pub fn new(max_dim: usize, max_p: usize) -> Self {
        let mut values = vec![BigUint::one(); (max_dim + 1) * (max_p + 1)];
        let idx = |d: usize, p: usize| d * (max_p + 1) + p;
        for d in 1..=max_dim {
            for p in 1..=max_p {
                let mut total = BigUint::zero();
                for lambda in partitions(p as u32) {
                    let mut term = multinomial(p as u32, &lambda);
                    for &part in &lambda {
                        term *= &values[idx(d - 1, part as usize)];
                    }
                    for j in 1..=p as u32 {
                        let c = count_of(j, &lambda);
                        if c > 1 {
                            term /= factorial(c);
                        }
                    }
                    total += term;
                }
                values[idx(d, p)] = total;
            }
        }
        BellTable {
            max_dim,
            max_p,
            values,
        }
    }

    pub fn get(&self, dim: usize, p: usize) -> &BigUint {
        assert!(
            dim <= self.max_dim && p <= self.max_p,
            "bell table built for d <= {}, p <= {}",
            self.max_dim,
            self.max_p
        );
        &self.values[dim * (self.max_p + 1) + p]
    }
}

/// `bell(d, p)` as a standalone computation.
pub fn bell(dim: usize, p: usize) -> BigUint {
    BellTable::new(dim, p).get(dim, p).clone()
}

/// The rounding approximation factor `bell(d, p)^{1/p}`.
pub fn approx_factor(dim: usize, p: usize) -> Result<f64> {
    if dim < 1 || p < 1 {
        return Err(Error::InvalidParameter(
            "approx_factor requires d >= 1 and p >= 1".into(),
        ));
    }
    let b = bell(dim, p).to_f64().ok_or_else(|| {
        Error::InvalidParameter(format!("bell({dim}, {p}) does not fit in f64"))
    })?;
    Ok(b.powf(1.0 / p as f64))
}

/// One Poisson(1) draw (inverse-product method; exact for rate one).
fn poisson_unit<R: Rng>(rng: &mut R) -> u64 {
    let threshold = (-1.0_f64).exp();
    let mut k = 0u64;
    let mut prod = 1.0_f64;
    loop {
        prod *= rng.gen::<f64>();
        if prod < threshold {
            return k;
        }
        k += 1;
    }
}

/// One sample of the branching process `Z_0 = 1`, `Z_{i+1} ~ Pois(Z_i)`,
/// realized as a sum of `Z_i` independent Poisson(1) draws.
pub fn iterated_poisson_sample<R: Rng>(dim: usize, rng: &mut R) -> u64 {
    let mut z = 1u64;
    for _ in 0..dim {
        let mut next = 0u64;
        for _ in 0..z {
            next += poisson_unit(rng);
        }
        z = next;
    }
    z
}

// ---------------------------------------------------------------------------
// Independent enumeration oracle: chains of refining set partitions.
// ---------------------------------------------------------------------------

/// All set partitions of `{0, .., n-1}` as block-id assignments in restricted
/// growth form (`assignment[i]` = block of element `i`).
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut assignment = vec![0usize; n];
    fn rec(i: usize, max_used: usize, assignment: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == assignment.len() {
            out.push(assignment.clone());
            return;
        }
        for b in 0..=max_used + 1 {
            assignment[i] = b;
            rec(i + 1, max_used.max(b), assignment, out);
        }
    }
    if n == 0 {
        out.push(vec![]);
    } else {
        assignment[0] = 0;
        rec(1, 0, &mut assignment, &mut out);
    }
    out
}

/// `fine` refines `coarse`: elements sharing a fine block share a coarse one.
pub fn refines(fine: &[usize], coarse: &[usize]) -> bool {
    let n = fine.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if fine[i] == fine[j] && coarse[i] != coarse[j] {
                return false;
            }
        }
    }
    true
}

/// Counts length-`d` chains `(P_1, .., P_d)` of partitions of `[p]` in which
/// each `P_{i+1}` refines `P_i`. Brute-force cross-check for [`bell`].
pub fn refinement_chain_count(dim: usize, p: usize) -> BigUint {
    if dim == 0 || p == 0 {
        return BigUint::one();
    }
    let parts = set_partitions(p);
    let k = parts.len();
    // counts[j] = number of admissible chains ending at partition j.
    let mut counts = vec![BigUint::one(); k];
    for _ in 1..dim {
        let mut next = vec![BigUint::zero(); k];
        for (j, fine) in parts.iter().enumerate() {
            for (i, coarse) in parts.iter().enumerate() {
                if refines(fine, coarse) {
                    next[j] += &counts[i];
                }
            }
        }
        counts = next;
    }
    let mut total = BigUint::zero();
    for c in counts {
        total += c;
    }
    total
}
