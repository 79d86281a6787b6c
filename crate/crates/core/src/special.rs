//! Laguerre families, multiset combinatorics and occupation-vector sectors.

use crate::error::{Error, Result};
use crate::scalar::{abs, from_u128, from_usize, Scalar};

/// `binom(n, k)` in 128-bit arithmetic with overflow detection.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step.
        let num = u128::from(n - i);
        let den = u128::from(i + 1);
        let g = gcd(acc, den);
        let (a, d) = (acc / g, den / g);
        let g2 = gcd(num, d);
        let (num, d) = (num / g2, d / g2);
        debug_assert_eq!(d, 1);
        acc = a
            .checked_mul(num)
            .ok_or_else(|| Error::Overflow(format!("binom({n}, {k}) exceeds 128 bits")))?;
    }
    Ok(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// |𝒥_N| for `size` modes: `binom(N + size - 1, N)`.
pub fn sector_size(size: usize, total: usize) -> Result<u128> {
    if size == 0 {
        return Err(Error::InvalidInput("sector needs at least one mode".into()));
    }
    binomial((total + size - 1) as u64, total as u64)
}

/// Σ_{α∈𝒥_N} α₁ = `binom(N + size - 1, size)`.
pub fn sector_first_coordinate_sum(size: usize, total: usize) -> Result<u128> {
    if size == 0 {
        return Err(Error::InvalidInput("sector needs at least one mode".into()));
    }
    binomial((total + size - 1) as u64, size as u64)
}

/// Laguerre polynomial `L_k(x)` by the three-term recurrence.
pub fn laguerre<T: Scalar>(k: usize, x: &T) -> T {
    generalized_laguerre(k, 0, x)
}

/// Generalized Laguerre polynomial `L_n^{(m)}(x)` by the recurrence
/// `(j+1) L_{j+1} = (2j + 1 + m - x) L_j - (j + m) L_{j-1}`.
pub fn generalized_laguerre<T: Scalar>(n: usize, m: usize, x: &T) -> T {
    let one = T::one();
    let alpha: T = from_usize(m);
    let mut prev = one.clone();
    if n == 0 {
        return prev;
    }
    let mut cur = one.clone() + alpha.clone() - x.clone();
    for j in 1..n {
        let jj: T = from_usize(j);
        let two_j_1: T = from_usize(2 * j + 1);
        let next = ((two_j_1 + alpha.clone() - x.clone()) * cur.clone() - (jj.clone() + alpha.clone()) * prev)
            / (jj + one.clone());
        prev = cur;
        cur = next;
    }
    cur
}

/// All Laguerre values `L_0(x), …, L_k(x)`.
pub fn laguerre_table<T: Scalar>(k: usize, x: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(T::one());
    if k == 0 {
        return out;
    }
    out.push(T::one() - x.clone());
    for j in 1..k {
        let jj: T = from_usize(j);
        let two_j_1: T = from_usize(2 * j + 1);
        let next = ((two_j_1 - x.clone()) * out[j].clone() - jj.clone() * out[j - 1].clone()) / (jj + T::one());
        out.push(next);
    }
    out
}

/// Occupation vector α over the modes.
pub type OccupationVector = Vec<u32>;

/// Iterator over 𝒥_N: compositions of `total` into `size` non-negative
/// parts. Order is the reverse-lexicographic odometer starting from
/// `(N, 0, …, 0)` in which the last coordinate varies fastest.
#[derive(Debug, Clone)]
pub struct SectorIter {
    current: Option<Vec<u32>>,
    remaining: u128,
}

impl SectorIter {
    pub fn new(size: usize, total: usize) -> Result<Self> {
        let remaining = sector_size(size, total)?;
        let mut start = vec![0u32; size];
        start[0] = total as u32;
        Ok(Self { current: Some(start), remaining })
    }

    /// The sub-iterator with `α₁ = first`, for partitioning enumeration.
    pub fn with_first(size: usize, total: usize, first: usize) -> Result<Self> {
        if first > total {
            return Ok(Self { current: None, remaining: 0 });
        }
        if size == 1 {
            let current = (first == total).then(|| vec![total as u32]);
            return Ok(Self { remaining: u128::from(current.is_some()), current });
        }
        let rest = total - first;
        let remaining = sector_size(size - 1, rest)?;
        let mut start = vec![0u32; size];
        start[0] = first as u32;
        start[1] = rest as u32;
        Ok(Self { current: Some(start), remaining })
    }

    pub fn len_u128(&self) -> u128 {
        self.remaining
    }
}

impl Iterator for SectorIter {
    type Item = OccupationVector;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            self.current = None;
            return None;
        }
        let out = self.current.take()?;
        self.remaining -= 1;
        if self.remaining > 0 {
            let mut next = out.clone();
            let last = next.len() - 1;
            let tail = next[last];
            next[last] = 0;
            if let Some(i) = (0..last).rev().find(|&i| next[i] > 0) {
                next[i] -= 1;
                next[i + 1] = tail + 1;
                self.current = Some(next);
            }
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match usize::try_from(self.remaining) {
            Ok(n) => (n, Some(n)),
            Err(_) => (usize::MAX, None),
        }
    }
}

/// Enumerates 𝒥_N for `size` modes.
pub fn enumerate_sector(size: usize, total: usize) -> Result<SectorIter> {
    let count = sector_size(size, total)?;
    if count > u128::from(u64::MAX) {
        return Err(Error::Overflow(format!(
            "sector of {size} modes with {total} quanta has {count} elements"
        )));
    }
    SectorIter::new(size, total)
}

/// Σ_{α∈𝒥_N} ∏_k L_{α_k}(x_k), by explicit enumeration.
pub fn laguerre_product_sum<T: Scalar>(xs: &[T], total: usize) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("need at least one variable".into()));
    }
    let tables: Vec<Vec<T>> = xs.iter().map(|x| laguerre_table(total, x)).collect();
    let mut acc = T::zero();
    for alpha in enumerate_sector(xs.len(), total)? {
        let mut term = T::one();
        for (k, &a) in alpha.iter().enumerate() {
            term = term * tables[k][a as usize].clone();
        }
        acc = acc + term;
    }
    Ok(acc)
}

/// Partial sum Σ_{n=k}^{k+terms-1} binom(n,k) ζ^{n-k} L_n(x).
pub fn erdelyi_lhs<T: Scalar>(zeta: &T, x: &T, k: usize, terms: usize) -> Result<T> {
    if abs(zeta) >= T::one() {
        return Err(Error::Divergence(format!("|zeta| = {:?} must be < 1", zeta)));
    }
    let top = k + terms.saturating_sub(1);
    let lag = laguerre_table(top, x);
    let mut acc = T::zero();
    let mut power = T::one();
    // binom(n, k) updated multiplicatively: binom(n+1,k) = binom(n,k)(n+1)/(n+1-k).
    let mut binom = T::one();
    for (n, l) in lag.iter().enumerate().skip(k).take(terms) {
        acc = acc + binom.clone() * power.clone() * l.clone();
        power = power * zeta.clone();
        binom = binom * from_usize::<T>(n + 1) / from_usize::<T>(n + 1 - k);
    }
    Ok(acc)
}

/// Closed form of the multiplication theorem:
/// `e^{-ζx/(1-ζ)} (1-ζ)^{-k-1} L_k(x/(1-ζ))`.
pub fn erdelyi_rhs<T: crate::scalar::Real>(zeta: T, x: T, k: usize) -> Result<T> {
    if abs(&zeta) >= T::one() {
        return Err(Error::Divergence(format!("|zeta| = {:?} must be < 1", zeta)));
    }
    let one_minus = T::one() - zeta;
    Ok((-zeta * x / one_minus).exp() / one_minus.powi(k as i32 + 1) * laguerre(k, &(x / one_minus)))
}

/// Partial sum of Σ_{n≥k} binom(n,k) x^{n-k}, which converges to `(1-x)^{-k-1}`.
pub fn binomial_series_partial<T: Scalar>(x: &T, k: usize, terms: usize) -> T {
    let mut acc = T::zero();
    let mut power = T::one();
    let mut binom = T::one();
    for n in k..k + terms {
        acc = acc + binom.clone() * power.clone();
        power = power * x.clone();
        binom = binom * from_usize::<T>(n + 1) / from_usize::<T>(n + 1 - k);
    }
    acc
}

/// Explicit sum `Σ_j (-1)^j binom(N+m, N-j) x^j / j!`, used as the
/// reference for the recurrence.
pub fn generalized_laguerre_series<T: Scalar>(n: usize, m: usize, x: &T) -> Result<T> {
    let mut acc = T::zero();
    let mut power_over_fact = T::one();
    for j in 0..=n {
        let b: T = from_u128(binomial((n + m) as u64, (n - j) as u64)?);
        let term = b * power_over_fact.clone();
        acc = if j % 2 == 0 { acc + term } else { acc - term };
        power_over_fact = power_over_fact * x.clone() / from_usize::<T>(j + 1);
    }
    Ok(acc)
}
