//! Scaled single-mode operators ρ_a^(ℓ).
//!
//! ρ_a^(ℓ) is diagonal in the number basis with eigenvalues
//! `λ_n = Σ_j σ_{j,ℓ}(ζ) ω_{n,j,ℓ}(ζ)`, `ζ = (a-1)/(a+1)`, and its
//! characteristic function is `L_ℓ(a|z|²/2) e^{-a|z|²/4}`. It is a state
//! only for `ℓ = 0, a ≥ 1`; otherwise some eigenvalues are negative.

use num_complex::Complex;
use num_traits::pow;

use crate::error::{Error, Result};
use crate::scalar::{abs, from_u128, from_usize, lit, to_f64, Real, Scalar};
use crate::special::{binomial, laguerre, laguerre_table};
use crate::summation::CompensatedSum;

/// Truncation contract for infinite number-basis sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Largest Fock index retained per mode.
    pub n_max: usize,
    /// Admissible certified tail mass.
    pub tail_eps: f64,
    /// Maximum number of index vectors an enumeration may visit.
    pub budget: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { n_max: 200, tail_eps: 1e-10, budget: 100_000_000 }
    }
}

impl TruncationPolicy {
    pub fn new(n_max: usize, tail_eps: f64) -> Result<Self> {
        if n_max == 0 || !(tail_eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "truncation needs n_max > 0 and tail_eps > 0 (got {n_max}, {tail_eps})"
            )));
        }
        Ok(Self { n_max, tail_eps, ..Self::default() })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

/// `σ_{j,ℓ}(x) = binom(ℓ,j) (-x)^j (1+x)^{ℓ-j}`.
pub fn sigma<T: Scalar>(j: usize, ell: usize, x: &T) -> Result<T> {
    if j > ell {
        return Err(Error::IndexOutOfRange(format!("sigma index j={j} exceeds ell={ell}")));
    }
    let b: T = from_u128(binomial(ell as u64, j as u64)?);
    let minus_x = T::zero() - x.clone();
    Ok(b * pow(minus_x, j) * pow(T::one() + x.clone(), ell - j))
}

/// `ω_{n,j,ℓ}(x) = binom(n, ℓ-j) x^{n-(ℓ-j)} (1-x)^{ℓ-j+1}` for `n ≥ ℓ-j`, else 0.
pub fn omega<T: Scalar>(n: usize, j: usize, ell: usize, x: &T) -> T {
    assert!(j <= ell, "omega index j={j} exceeds ell={ell}");
    let r = ell - j;
    if n < r {
        return T::zero();
    }
    let b: T = from_u128(binomial(n as u64, r as u64).expect("binomial within 128 bits"));
    b * pow(x.clone(), n - r) * pow(T::one() - x.clone(), r + 1)
}

/// `g_a(ℓ)`: `a^ℓ` for `a ≥ 1`, `a^{-(ℓ+1)}` otherwise.
pub fn trace_norm_bound<T: Scalar>(a: &T, ell: usize) -> T {
    if *a >= T::one() {
        pow(a.clone(), ell)
    } else {
        pow(T::one() / a.clone(), ell + 1)
    }
}

/// Möbius parameter `(a-1)/(a+1)`.
pub fn zeta_of<T: Scalar>(a: &T) -> T {
    (a.clone() - T::one()) / (a.clone() + T::one())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModeOperator<T> {
    a: T,
    ell: usize,
    zeta: T,
}

/// Σ|λ_n| up to a cutoff, with a certified bound on the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNorm<T> {
    pub value: T,
    pub tail_bound: T,
    pub cutoff: usize,
}

impl<T: Scalar> ScaledModeOperator<T> {
    pub fn new(a: T, ell: usize) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::InvalidInput(format!("scale a must be positive, got {a:?}")));
        }
        let zeta = zeta_of(&a);
        Ok(Self { a, ell, zeta })
    }

    pub fn a(&self) -> &T {
        &self.a
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn zeta(&self) -> &T {
        &self.zeta
    }

    /// The n-th eigenvalue; the j-sum is accumulated with compensation.
    pub fn eigenvalue(&self, n: usize) -> T {
        let mut acc = CompensatedSum::new();
        for j in 0..=self.ell {
            let s = sigma(j, self.ell, &self.zeta).expect("j within range");
            acc.add(s * omega(n, j, self.ell, &self.zeta));
        }
        acc.value()
    }

    pub fn eigenvalues(&self, cutoff: usize) -> Vec<T> {
        (0..=cutoff).map(|n| self.eigenvalue(n)).collect()
    }

    pub fn trace_norm_bound(&self) -> T {
        trace_norm_bound(&self.a, self.ell)
    }

    /// Certified bound on Σ_{n>cutoff} |λ_n|, or `None` when the
    /// eventual-geometric argument does not apply yet at this cutoff.
    ///
    /// Each j-term is dominated by `|σ_j| (1-ζ)^{r+1} binom(n,r) |ζ|^{n-r}`
    /// with `r = ℓ-j`. For `n ≥ c+1` the ratio of consecutive terms is at
    /// most `ρ_r = (c+2)/(c+2-r)·|ζ|`, so the tail of term r is bounded by
    /// its first omitted value over `1 - ρ_r`.
    pub fn tail_bound(&self, cutoff: usize) -> Option<T> {
        if cutoff < self.ell {
            return None;
        }
        let z = abs(&self.zeta);
        let mut total = T::zero();
        for j in 0..=self.ell {
            let r = self.ell - j;
            let s = abs(&sigma(j, self.ell, &self.zeta).ok()?);
            let first: T = from_u128::<T>(binomial((cutoff + 1) as u64, r as u64).ok()?)
                * pow(z.clone(), cutoff + 1 - r)
                * pow(T::one() - self.zeta.clone(), r + 1);
            if first == T::zero() {
                continue;
            }
            let ratio = from_usize::<T>(cutoff + 2) / from_usize::<T>(cutoff + 2 - r) * z.clone();
            if ratio >= T::one() {
                return None;
            }
            total = total + s * first / (T::one() - ratio);
        }
        Some(total)
    }

    /// Smallest cutoff in `[ℓ, n_max]` whose certified tail is at most `eps`.
    pub fn cutoff_for(&self, eps: &T, n_max: usize) -> Option<usize> {
        (self.ell..=n_max).find(|&c| matches!(self.tail_bound(c), Some(t) if t <= *eps))
    }

    pub fn truncated_trace_norm(&self, policy: &TruncationPolicy) -> Result<TruncatedNorm<T>> {
        if policy.n_max < self.ell {
            return Err(Error::InvalidInput(format!(
                "n_max={} below operator level {}",
                policy.n_max, self.ell
            )));
        }
        let eps: T = lit(policy.tail_eps);
        let cutoff = self.cutoff_for(&eps, policy.n_max).unwrap_or(policy.n_max);
        let tail = self.tail_bound(cutoff);
        let value = self.eigenvalues(cutoff).iter().map(abs).collect::<CompensatedSum<T>>().value();
        match tail {
            Some(t) if t <= eps => Ok(TruncatedNorm { value, tail_bound: t, cutoff }),
            other => Err(Error::InsufficientTruncation {
                achieved: other.map_or(f64::INFINITY, |t| to_f64(&t)),
                requested: policy.tail_eps,
            }),
        }
    }
}

impl<T: Real> ScaledModeOperator<T> {
    /// `L_ℓ(a|z|²/2) e^{-a|z|²/4}`.
    pub fn char_function(&self, z: Complex<T>) -> T {
        let r2 = z.norm_sqr();
        let half: T = lit(0.5);
        let quarter: T = lit(0.25);
        laguerre(self.ell, &(self.a * r2 * half)) * (-(self.a * r2 * quarter)).exp()
    }

    /// `Σ_{n≤cutoff} λ_n L_n(|z|²/2) e^{-|z|²/4}`, the trace against the
    /// number-basis Weyl diagonal.
    pub fn char_function_spectral(&self, z: Complex<T>, cutoff: usize) -> T {
        let r2 = z.norm_sqr();
        let lag = laguerre_table(cutoff, &(r2 * lit::<T>(0.5)));
        let weight = (-(r2 * lit::<T>(0.25))).exp();
        let mut acc = CompensatedSum::new();
        for (n, l) in lag.into_iter().enumerate() {
            acc.add(self.eigenvalue(n) * l);
        }
        acc.value() * weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(0, 1, &0.5).unwrap(), 1.5);
        assert_eq!(sigma(1, 1, &0.5).unwrap(), -0.5);
        for ell in 0..6 {
            for x in [q(-2, 3), q(1, 7), q(5, 2)] {
                let s: BigRational = (0..=ell).map(|j| sigma(j, ell, &x).unwrap()).fold(q(0, 1), |a, b| a + b);
                assert_eq!(s, q(1, 1));
            }
            for j in 0..=ell {
                assert_eq!(sigma(j, ell, &0.0).unwrap(), if j == 0 { 1.0 } else { 0.0 });
            }
        }
        assert!(matches!(sigma(3, 2, &0.1), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn omega_examples() {
        let z: f64 = 0.37;
        for n in 0..10 {
            assert!((omega(n, 0, 0, &z) - (1.0 - z) * z.powi(n as i32)).abs() < 1e-15);
        }
        for ell in 0..4 {
            for n in 0..6 {
                assert_eq!(omega(n, ell, ell, &0.0), if n == 0 { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = (0..=200).map(|n| omega(n, 1, 1, &0.5)).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigenvalue_examples() {
        for ell in 0..5 {
            let op = ScaledModeOperator::new(1.0, ell).unwrap();
            for n in 0..8 {
                assert_eq!(op.eigenvalue(n), if n == ell { 1.0 } else { 0.0 });
            }
        }
        let op = ScaledModeOperator::new(q(3, 1), 0).unwrap();
        for n in 0..6u32 {
            assert_eq!(op.eigenvalue(n as usize), q(1, 2) * q(1, 2).pow(n as i32));
        }
        let op = ScaledModeOperator::new(q(3, 1), 1).unwrap();
        assert_eq!(op.eigenvalue(0), q(-1, 4));
    }

    #[test]
    fn first_excited_level_matches_explicit_form() {
        for a in [q(1, 4), q(1, 2), q(2, 1), q(9, 2)] {
            let op = ScaledModeOperator::new(a, 1).unwrap();
            let z = op.zeta().clone();
            let one = q(1, 1);
            assert_eq!(op.eigenvalue(0), -z.clone() * (one.clone() - z.clone()));
            for n in 1..10usize {
                let nn = q(n as i64, 1);
                let explicit = nn * (one.clone() + z.clone()) * pow(one.clone() - z.clone(), 2) * pow(z.clone(), n - 1)
                    - (one.clone() - z.clone()) * pow(z.clone(), n + 1);
                assert_eq!(op.eigenvalue(n), explicit);
            }
        }
    }

    #[test]
    fn sign_threshold_for_first_level() {
        for &a in &[0.05, 0.2, 0.6, 1.7, 5.0, 30.0] {
            let op = ScaledModeOperator::new(a, 1).unwrap();
            let z = *op.zeta();
            let threshold = z * z / (1.0 - z * z);
            for n in (0..200).step_by(2) {
                let nf = n as f64;
                if (nf - threshold).abs() < 1e-9 {
                    continue;
                }
                let expected = if nf > threshold { z.signum() } else { -z.signum() };
                let lam = op.eigenvalue(n);
                if lam.abs() > 1e-300 {
                    assert_eq!(lam.signum(), expected, "a={a} n={n}");
                }
            }
        }
    }

    #[test]
    fn trace_norm_bound_examples() {
        assert_eq!(trace_norm_bound(&2.0, 3), 8.0);
        assert_eq!(trace_norm_bound(&0.5, 1), 4.0);
        for ell in 0..6 {
            assert_eq!(trace_norm_bound(&1.0, ell), 1.0);
        }
    }

    #[test]
    fn truncated_trace_norm_examples() {
        let policy = TruncationPolicy::new(400, 1e-12).unwrap();
        for ell in 0..5 {
            let n = ScaledModeOperator::new(1.0, ell).unwrap().truncated_trace_norm(&policy).unwrap();
            assert_eq!(n.value, 1.0);
            assert_eq!(n.tail_bound, 0.0);
        }
        let n = ScaledModeOperator::new(3.0f64, 0).unwrap().truncated_trace_norm(&policy).unwrap();
        assert!((n.value - 1.0).abs() < 1e-11);
        let n = ScaledModeOperator::new(3.0, 1).unwrap().truncated_trace_norm(&policy).unwrap();
        assert!(n.value <= 3.0 && n.value >= 1.0);
    }

    #[test]
    fn insufficient_truncation_reports_bound() {
        let policy = TruncationPolicy::new(5, 1e-12).unwrap();
        let err = ScaledModeOperator::new(50.0, 2).unwrap().truncated_trace_norm(&policy).unwrap_err();
        assert!(matches!(err, Error::InsufficientTruncation { requested, .. } if requested == 1e-12));
    }

    #[test]
    fn tail_bound_is_rigorous() {
        for &a in &[0.2, 0.7, 1.3, 4.0] {
            for ell in 0..4 {
                let op = ScaledModeOperator::new(a, ell).unwrap();
                let reference: Vec<f64> = op.eigenvalues(3000);
                for c in [ell, ell + 5, ell + 20, ell + 60] {
                    if let Some(t) = op.tail_bound(c) {
                        let actual: f64 = reference[c + 1..].iter().map(|x| x.abs()).sum();
                        assert!(actual <= t * (1.0 + 1e-12) + 1e-300, "a={a} ell={ell} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn char_function_examples() {
        let op = ScaledModeOperator::new(2.5, 3).unwrap();
        assert_eq!(op.char_function(Complex::new(0.0, 0.0)), 1.0);
        let z = Complex::new(0.4, -0.9);
        let r2: f64 = z.norm_sqr();
        let pure = ScaledModeOperator::new(1.0, 2).unwrap();
        assert!((pure.char_function(z) - laguerre(2, &(r2 / 2.0)) * (-r2 / 4.0).exp()).abs() < 1e-15);
        let g = ScaledModeOperator::new(1.7, 0).unwrap();
        assert!((g.char_function(z) - (-1.7 * r2 / 4.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_scale() {
        assert!(ScaledModeOperator::new(0.0, 1).is_err());
        assert!(ScaledModeOperator::new(-1.0, 0).is_err());
    }
}
