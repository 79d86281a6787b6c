//! Spectrum of the partially transposed N-modes ensemble, its trace norm
//! with a certified truncation tail, analytic upper bounds, Peres–Horodecki
//! witnesses and the ensemble energy.
//!
//! In the diagonal frame of M̃ the eigenvalues of `ρ_N^{T₁}` are
//!
//! ```text
//! λ_n = (1/|𝒥_N|) Σ_{α∈𝒥_N} ∏_k T_k[α_k][n_k]
//! ```
//!
//! with `T_k[m][n]` the n-th eigenvalue of `ρ_{d_k}^{(m)}`. Writing
//! `P_k(t; n) = Σ_m T_k[m][n] t^m`, the α-sum is the coefficient of `t^N`
//! in `∏_k P_k(t; n_k)`. The enumeration walks index vectors with an
//! odometer and keeps prefix products of these polynomials, so each index
//! vector costs `O(N)` multiplications in the innermost mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::mode::{trace_norm_bound, ScaledModeOperator, TruncationPolicy};
use crate::scalar::{abs, from_u128, from_usize, lit, to_f64, Real, Scalar};
use crate::special::{enumerate_sector, sector_size};
use crate::spectral::{SpectralFrame, SymplecticSpectrum};
use crate::summation::CompensatedSum;

/// Pure ensemble `ρ_N` or a weighted mixture `Σ_L ω_L ρ_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    top: usize,
    weights: Option<Vec<f64>>,
}

impl EnsembleSpec {
    pub fn pure(total: usize) -> Self {
        Self { top: total, weights: None }
    }

    /// Weights `(ω_0, …, ω_N)`: non-negative and summing to one.
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { top: weights.len() - 1, weights: Some(weights) })
    }

    pub fn uniform(top: usize) -> Self {
        let w = 1.0 / (top + 1) as f64;
        Self { top, weights: Some(vec![w; top + 1]) }
    }

    /// Largest number of modes with nonzero weight range, i.e. N.
    pub fn top(&self) -> usize {
        self.top
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_pure(&self) -> bool {
        self.weights.is_none()
    }

    /// `(L, ω_L)` for every level with nonzero weight.
    pub fn levels(&self) -> Vec<(usize, f64)> {
        match &self.weights {
            None => vec![(self.top, 1.0)],
            Some(w) => w.iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    /// Coefficients `ω_L/|𝒥_L|` indexed by L, zero for absent levels.
    fn coefficients<T: Scalar>(&self, modes: usize) -> Result<Vec<T>> {
        let mut coef = vec![T::zero(); self.top + 1];
        for (level, w) in self.levels() {
            coef[level] = lit::<T>(w) / from_u128::<T>(sector_size(modes, level)?);
        }
        Ok(coef)
    }
}

/// A single eigenvalue by the defining α-sum; independent of the
/// polynomial enumeration and used to cross-check it.
pub fn pt_eigenvalue<T: Scalar>(nvec: &[u32], ensemble: &EnsembleSpec, d: &[T]) -> Result<T> {
    if nvec.len() != d.len() {
        return Err(Error::InvalidInput(format!(
            "index vector of length {} for {} modes",
            nvec.len(),
            d.len()
        )));
    }
    let ops = d
        .iter()
        .map(|a| (0..=ensemble.top()).map(|m| ScaledModeOperator::new(a.clone(), m)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut total = CompensatedSum::new();
    for (level, w) in ensemble.levels() {
        let mut acc = CompensatedSum::new();
        for alpha in enumerate_sector(d.len(), level)? {
            let mut term = T::one();
            for (k, (&a, &n)) in alpha.iter().zip(nvec).enumerate() {
                term = term * ops[k][a as usize].eigenvalue(n as usize);
            }
            acc.add(term);
        }
        total.add(lit::<T>(w) * acc.value() / from_u128::<T>(sector_size(d.len(), level)?));
    }
    Ok(total.value())
}

/// Per-mode eigenvalue tables `T_k[m][n]` for `m ≤ N`, `n ≤ c_k`, with
/// certified tails and absolute masses.
#[derive(Debug, Clone)]
pub struct ModeTables<T> {
    levels: usize,
    cutoffs: Vec<usize>,
    /// `by_n[k][n * levels + m] = T_k[m][n]`.
    by_n: Vec<Vec<T>>,
    tails: Vec<Vec<Option<T>>>,
    masses: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> ModeTables<T> {
    /// Chooses for each mode the smallest cutoff whose tail, at every
    /// level, fits the share of `tail_eps` left after the worst-case
    /// amplification `|Λ| ∏_j max_m g_{d_j}(m)` of the global certificate.
    pub fn build(d: &[T], top: usize, policy: &TruncationPolicy) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidInput("no modes".into()));
        }
        if policy.n_max < top {
            return Err(Error::InvalidInput(format!("n_max={} below N={top}", policy.n_max)));
        }
        let log_amp: f64 = d
            .iter()
            .map(|a| (0..=top).map(|m| to_f64(&trace_norm_bound(a, m)).ln()).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let eps_mode = 0.5 * policy.tail_eps / d.len() as f64 * (-log_amp).exp();
        let eps: T = lit(eps_mode);
        let levels = top + 1;
        let ops: Vec<Vec<ScaledModeOperator<T>>> = d
            .iter()
            .map(|a| (0..=top).map(|m| ScaledModeOperator::new(a.clone(), m)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let cutoffs: Vec<usize> = ops
            .iter()
            .map(|mode| {
                mode.iter()
                    .map(|op| op.cutoff_for(&eps, policy.n_max).unwrap_or(policy.n_max))
                    .max()
                    .unwrap_or(top)
            })
            .collect();
        let size = enumeration_size(&cutoffs);
        if size > u128::from(policy.budget) {
            return Err(Error::EnumerationTooLarge { size, budget: policy.budget });
        }
        let mut by_n = Vec::with_capacity(d.len());
        let mut tails = Vec::with_capacity(d.len());
        let mut masses = Vec::with_capacity(d.len());
        for (mode, &c) in ops.iter().zip(&cutoffs) {
            let mut flat = vec![T::zero(); (c + 1) * levels];
            let mut mode_tails = Vec::with_capacity(levels);
            let mut mode_masses = Vec::with_capacity(levels);
            for (m, op) in mode.iter().enumerate() {
                let values = op.eigenvalues(c);
                let mass: T = values.iter().map(abs).collect::<CompensatedSum<T>>().value();
                for (n, v) in values.into_iter().enumerate() {
                    flat[n * levels + m] = v;
                }
                let tail = op.tail_bound(c);
                mode_masses.push(tail.clone().map(|t| mass + t));
                mode_tails.push(tail);
            }
            by_n.push(flat);
            tails.push(mode_tails);
            masses.push(mode_masses);
        }
        Ok(Self { levels, cutoffs, by_n, tails, masses })
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn entry(&self, k: usize, m: usize, n: usize) -> T {
        self.by_n[k][n * self.levels + m].clone()
    }

    /// `P_k(t; n)` as its coefficient slice.
    fn poly(&self, k: usize, n: usize) -> &[T] {
        &self.by_n[k][n * self.levels..(n + 1) * self.levels]
    }

    /// Bound on `Σ |λ_n|` over index vectors outside the window:
    /// `Σ_L (ω_L/|𝒥_L|) Σ_k [t^L] Tail_k(t) ∏_{j≠k} Mass_j(t)`.
    fn tail_certificate(&self, coef: &[T]) -> Option<T> {
        let k_modes = self.modes();
        let poly_of = |rows: &Vec<Option<T>>| -> Option<Vec<T>> { rows.iter().cloned().collect() };
        let tails: Vec<Vec<T>> = self.tails.iter().map(poly_of).collect::<Option<_>>()?;
        let masses: Vec<Vec<T>> = self.masses.iter().map(poly_of).collect::<Option<_>>()?;
        let mut unit = vec![T::zero(); self.levels];
        unit[0] = T::one();
        let mut prefix = vec![unit.clone()];
        for mass in &masses {
            let last = prefix.last().expect("nonempty");
            prefix.push(poly_mul(last, mass));
        }
        let mut suffix = vec![unit; k_modes + 1];
        for k in (0..k_modes).rev() {
            suffix[k] = poly_mul(&suffix[k + 1], &masses[k]);
        }
        let mut total = T::zero();
        for k in 0..k_modes {
            let p = poly_mul(&poly_mul(&prefix[k], &suffix[k + 1]), &tails[k]);
            for (c, v) in coef.iter().zip(&p) {
                total = total + c.clone() * v.clone();
            }
        }
        Some(total)
    }
}

fn enumeration_size(cutoffs: &[usize]) -> u128 {
    cutoffs.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128 + 1))
}

/// Product of two polynomials truncated to the common length.
fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    poly_mul_into(a, b, &mut out);
    out
}

fn poly_mul_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T]) {
    for (l, slot) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for m in 0..=l {
            acc = acc + a[m].clone() * b[l - m].clone();
        }
        *slot = acc;
    }
}

/// Result of a full enumeration over the truncation window.
#[derive(Debug, Clone)]
pub struct TraceNormCertificate<T> {
    /// `Σ |λ_n|` over the window.
    pub trace_norm: T,
    /// `Σ λ_n` over the window.
    pub trace_sum: T,
    /// Bound on `Σ |λ_n|` outside the window; `None` if no certificate.
    pub tail_bound: Option<T>,
    pub cutoffs: Vec<usize>,
    pub visited: u128,
    /// Most negative eigenvalue in the window and its index vector.
    pub most_negative: Option<(Vec<u32>, T)>,
}

struct Block<T> {
    abs: CompensatedSum<T>,
    sum: CompensatedSum<T>,
    most_negative: Option<(Vec<u32>, T)>,
}

/// Leading modes are split into independent tasks; the split depends only
/// on the cutoffs, so sums are merged in the same order for any number of
/// worker threads.
const MIN_TASKS: u128 = 64;

fn run_block<T: Scalar>(tables: &ModeTables<T>, coef: &[T], lead: &[usize]) -> Block<T> {
    let k_modes = tables.modes();
    let levels = tables.levels;
    let split = lead.len();
    let s = k_modes - split;
    let cut = tables.cutoffs();
    let last = k_modes - 1;

    let mut base = vec![T::zero(); levels];
    base[0] = T::one();
    for (k, &n) in lead.iter().enumerate() {
        base = poly_mul(&base, tables.poly(k, n));
    }
    let mut idx = vec![0usize; s - 1];
    let mut prefix: Vec<Vec<T>> = Vec::with_capacity(s);
    prefix.push(base);
    for i in 0..s - 1 {
        let next = poly_mul(&prefix[i], tables.poly(split + i, 0));
        prefix.push(next);
    }

    let mut block = Block { abs: CompensatedSum::new(), sum: CompensatedSum::new(), most_negative: None };
    let mut g = vec![T::zero(); levels];
    loop {
        let p = &prefix[s - 1];
        for (m, slot) in g.iter_mut().enumerate() {
            let mut acc = T::zero();
            for l in m..levels {
                acc = acc + coef[l].clone() * p[l - m].clone();
            }
            *slot = acc;
        }
        for n in 0..=cut[last] {
            let row = tables.poly(last, n);
            let mut lam = T::zero();
            for (t, gm) in row.iter().zip(&g) {
                lam = lam + t.clone() * gm.clone();
            }
            if lam < T::zero() {
                let better = match &block.most_negative {
                    None => true,
                    Some((_, v)) => lam < *v,
                };
                if better {
                    let nvec: Vec<u32> =
                        lead.iter().chain(&idx).copied().chain(std::iter::once(n)).map(|x| x as u32).collect();
                    block.most_negative = Some((nvec, lam.clone()));
                }
            }
            block.abs.add(abs(&lam));
            block.sum.add(lam);
        }
        let mut pos = s - 1;
        loop {
            if pos == 0 {
                return block;
            }
            pos -= 1;
            if idx[pos] < cut[split + pos] {
                idx[pos] += 1;
                break;
            }
            idx[pos] = 0;
        }
        for i in pos..s - 1 {
            let next = poly_mul(&prefix[i], tables.poly(split + i, idx[i]));
            prefix[i + 1] = next;
        }
    }
}

/// Enumerates the truncation window in parallel and assembles the trace
/// norm, the trace and the tail certificate. Does not enforce `tail_eps`.
pub fn enumerate_pt_spectrum<T: Scalar>(
    ensemble: &EnsembleSpec,
    d: &[T],
    policy: &TruncationPolicy,
) -> Result<TraceNormCertificate<T>> {
    let tables = ModeTables::build(d, ensemble.top(), policy)?;
    let coef = ensemble.coefficients::<T>(d.len())?;
    let cut = tables.cutoffs().to_vec();
    let mut split = 0;
    let mut tasks: u128 = 1;
    while split + 1 < cut.len() && tasks < MIN_TASKS {
        tasks *= cut[split] as u128 + 1;
        split += 1;
    }
    let tasks = tasks as usize;
    let blocks: Vec<Block<T>> = (0..tasks)
        .into_par_iter()
        .map(|t| {
            let mut lead = vec![0usize; split];
            let mut rem = t;
            for k in (0..split).rev() {
                lead[k] = rem % (cut[k] + 1);
                rem /= cut[k] + 1;
            }
            run_block(&tables, &coef, &lead)
        })
        .collect();
    let mut abs_total = CompensatedSum::new();
    let mut sum_total = CompensatedSum::new();
    let mut most_negative: Option<(Vec<u32>, T)> = None;
    for b in blocks {
        abs_total.merge(&b.abs);
        sum_total.merge(&b.sum);
        if let Some((nvec, v)) = b.most_negative {
            if most_negative.as_ref().is_none_or(|(_, best)| v < *best) {
                most_negative = Some((nvec, v));
            }
        }
    }
    Ok(TraceNormCertificate {
        trace_norm: abs_total.value(),
        trace_sum: sum_total.value(),
        tail_bound: tables.tail_certificate(&coef),
        visited: enumeration_size(&cut),
        cutoffs: cut,
        most_negative,
    })
}

/// `enumerate_pt_spectrum` with the tail required to be within `tail_eps`.
pub fn certified_trace_norm<T: Scalar>(
    ensemble: &EnsembleSpec,
    d: &[T],
    policy: &TruncationPolicy,
) -> Result<TraceNormCertificate<T>> {
    let cert = enumerate_pt_spectrum(ensemble, d, policy)?;
    match &cert.tail_bound {
        Some(t) if to_f64(t) <= policy.tail_eps => Ok(cert),
        other => Err(Error::InsufficientTruncation {
            achieved: other.as_ref().map_or(f64::INFINITY, to_f64),
            requested: policy.tail_eps,
        }),
    }
}

/// `Σ_n λ_n ∏_k L_{n_k}(|z_k|²/2) e^{-|z_k|²/4}` over the window, i.e. the
/// characteristic function of the diagonalized `ρ_N^{T₁}` assembled from
/// its spectrum. The per-mode factors reduce to polynomial sums.
pub fn pt_char_spectral<T: Real>(
    ensemble: &EnsembleSpec,
    d: &[T],
    z: &[nalgebra::Complex<T>],
    policy: &TruncationPolicy,
) -> Result<T> {
    if z.len() != d.len() {
        return Err(Error::InvalidInput("coordinates and modes differ in length".into()));
    }
    let tables = ModeTables::build(d, ensemble.top(), &policy.with_budget(u64::MAX))?;
    let coef = ensemble.coefficients::<T>(d.len())?;
    let mut prod = vec![T::zero(); tables.levels];
    prod[0] = T::one();
    let mut weight = T::one();
    for (k, zk) in z.iter().enumerate() {
        let r2 = zk.norm_sqr();
        let lag = crate::special::laguerre_table(tables.cutoffs()[k], &(r2 * lit::<T>(0.5)));
        weight *= (-(r2 * lit::<T>(0.25))).exp();
        let mut pk = vec![T::zero(); tables.levels];
        for (n, l) in lag.iter().enumerate() {
            for (m, slot) in pk.iter_mut().enumerate() {
                *slot += tables.entry(k, m, n) * *l;
            }
        }
        prod = poly_mul(&prod, &pk);
    }
    let value = coef.iter().zip(&prod).fold(T::zero(), |acc, (c, p)| acc + *c * *p);
    Ok(value * weight)
}

/// `Σ_{d_k<1} ln(1/d_k)`: the logarithmic negativity of the ground state.
pub fn ground_state_negativity_closed_form<T: Real>(d: &[T]) -> T {
    d.iter().filter(|x| **x < T::one()).fold(T::zero(), |acc, x| acc - x.ln())
}

/// `Σ_k ln g_{d_k}(N) = N Σ_{d_k≥1} ln d_k + (N+1) Σ_{d_k<1} ln(1/d_k)`.
pub fn product_bound<T: Real>(d: &[T], total: usize) -> T {
    let n: T = from_usize(total);
    d.iter().fold(T::zero(), |acc, x| {
        if *x >= T::one() {
            acc + n * x.ln()
        } else {
            acc - (n + T::one()) * x.ln()
        }
    })
}

/// `½(2N+1) Σ_{z∈spec(Z), z>1} ln z`, equal to [`product_bound`] when the
/// spectrum of Z is closed under inversion.
pub fn product_bound_from_z<T: Real>(z: &[T], total: usize) -> T {
    let factor: T = from_usize::<T>(2 * total + 1) * lit::<T>(0.5);
    z.iter().filter(|x| **x > T::one()).fold(T::zero(), |acc, x| acc + factor * x.ln())
}

/// `(2N+1) ‖h^{1/2}‖ Σ_{x∈Λ₀, y∉Λ₀} |⟨δ_x, h^{-1/2} δ_y⟩|`.
pub fn h_bound<T: Real>(frame: &SpectralFrame<T>, region: &Region, total: usize) -> Result<T> {
    if region.universe_size() != frame.len() {
        return Err(Error::InvalidRegion("region does not match frame".into()));
    }
    let g = frame.h_inv_sqrt();
    let mut cross = CompensatedSum::new();
    for x in region.members() {
        for y in region.complement_members() {
            cross.add(g[(x, y)].abs());
        }
    }
    let norm = frame.gamma().max();
    Ok(from_usize::<T>(2 * total + 1) * norm * cross.value())
}

/// Flat report of one negativity evaluation. The logarithm is natural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub log_negativity: f64,
    pub trace_norm: f64,
    pub tail_bound: f64,
    /// `Σ λ_n` over the window; one up to the tail.
    pub trace_check: f64,
    pub product_bound: f64,
    pub h_bound: Option<f64>,
    /// Largest per-mode Fock cutoff used.
    pub n_max: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl NegativityReport {
    pub fn with_h_bound(mut self, value: f64) -> Self {
        self.h_bound = Some(value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// `𝒩(ρ^{T₁}) = ln ‖ρ^{T₁}‖₁` for a pure or mixed ensemble, with the shared
/// product bound at the top level N.
pub fn exact_log_negativity<T: Real>(
    ensemble: &EnsembleSpec,
    spectrum: &SymplecticSpectrum<T>,
    policy: &TruncationPolicy,
) -> Result<NegativityReport> {
    let cert = certified_trace_norm(ensemble, spectrum.values(), policy)?;
    let trace_norm = to_f64(&cert.trace_norm);
    let trace_sum = to_f64(&cert.trace_sum);
    // tr ρ^{T₁} = 1 exactly, so ‖ρ^{T₁}‖₁ = 1 + 2Σ_{λ<0}|λ|. This is exact
    // zero without negative eigenvalues and differs from ln of the window
    // norm by at most the tail.
    Ok(NegativityReport {
        log_negativity: (trace_norm - trace_sum).ln_1p(),
        trace_norm,
        tail_bound: cert.tail_bound.as_ref().map_or(f64::INFINITY, to_f64),
        trace_check: trace_sum,
        product_bound: to_f64(&product_bound(spectrum.values(), ensemble.top())),
        h_bound: None,
        n_max: cert.cutoffs.iter().copied().max().unwrap_or(0),
        n: ensemble.top(),
        seed: None,
        seconds: None,
    })
}

/// Mixed ensemble `Σ_L ω_L ρ_L`.
pub fn mixed_log_negativity<T: Real>(
    weights: &[f64],
    spectrum: &SymplecticSpectrum<T>,
    policy: &TruncationPolicy,
) -> Result<NegativityReport> {
    exact_log_negativity(&EnsembleSpec::weighted(weights.to_vec())?, spectrum, policy)
}

/// A negative eigenvalue of the partial transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub nvec: Vec<u32>,
    pub eigenvalue: T,
    /// Whether the index came from the explicit single-excitation construction.
    pub from_candidate: bool,
}

/// Candidate indices. For N = 1: `n_k = 0` where `d_k ≥ 1`, and where
/// `d_k < 1` an even `n_k ≥ ⌈ζ²/(1-ζ²)⌉ + 1`, the smallest such plus
/// `2·shift`. For other N the parity becomes `N + 1`: at large `n` the
/// level-N factor dominates and carries the sign `(-1)^{n-N}`. Each vector
/// is followed by its restriction to the most squeezed mode. Modes within
/// 1e-9 of `d = 1` count as unsqueezed.
pub fn witness_candidates<T: Real>(d: &[T], total: usize, shifts: usize) -> Vec<Vec<u32>> {
    let squeezed: Vec<Option<u32>> = d
        .iter()
        .map(|a| {
            let a = to_f64(a);
            if a >= 1.0 - 1e-9 {
                return None;
            }
            let z = (a - 1.0) / (a + 1.0);
            let mut n = (z * z / (1.0 - z * z)).ceil() as u32 + 1;
            if n % 2 != (total as u32 + 1) % 2 {
                n += 1;
            }
            Some(n)
        })
        .collect();
    let deepest = (0..d.len())
        .filter(|&k| squeezed[k].is_some())
        .min_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite"));
    let mut out: Vec<Vec<u32>> = Vec::new();
    for shift in 0..shifts as u32 {
        let full: Vec<u32> = squeezed.iter().map(|s| s.map_or(0, |n| n + 2 * shift)).collect();
        let single: Vec<u32> = (0..d.len()).map(|k| if Some(k) == deepest { full[k] } else { 0 }).collect();
        for c in [full, single] {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// Looks for `λ_n < 0`: explicit candidates first, then the most negative
/// eigenvalue in the truncation window.
pub fn peres_witness<T: Real>(
    ensemble: &EnsembleSpec,
    d: &[T],
    policy: &TruncationPolicy,
) -> Result<Option<Witness<T>>> {
    for nvec in witness_candidates(d, ensemble.top(), 4) {
        let eigenvalue = pt_eigenvalue(&nvec, ensemble, d)?;
        if eigenvalue < T::zero() {
            return Ok(Some(Witness { nvec, eigenvalue, from_candidate: true }));
        }
    }
    let cert = enumerate_pt_spectrum(ensemble, d, policy)?;
    Ok(cert.most_negative.map(|(nvec, eigenvalue)| Witness { nvec, eigenvalue, from_candidate: false }))
}

/// `(1 + 2N/|Λ|) Σ_k γ_k`.
pub fn ensemble_energy_from_gamma<T: Scalar>(gamma: &[T], total: usize) -> T {
    let sum = gamma.iter().fold(T::zero(), |acc, g| acc + g.clone());
    let ratio = from_usize::<T>(2 * total) / from_usize::<T>(gamma.len());
    (T::one() + ratio) * sum
}

/// Sector average of `Σ_k γ_k (2α_k + 1)` by enumeration.
pub fn ensemble_energy_brute_force<T: Scalar>(gamma: &[T], total: usize) -> Result<T> {
    let mut acc = CompensatedSum::new();
    let mut count = 0u128;
    for alpha in enumerate_sector(gamma.len(), total)? {
        let mut e = T::zero();
        for (g, &a) in gamma.iter().zip(&alpha) {
            e = e + g.clone() * from_usize::<T>(2 * a as usize + 1);
        }
        acc.add(e);
        count += 1;
    }
    Ok(acc.value() / from_u128::<T>(count))
}

pub fn ensemble_energy<T: Real>(frame: &SpectralFrame<T>, total: usize) -> T {
    let gamma: Vec<T> = frame.gamma().iter().copied().collect();
    ensemble_energy_from_gamma(&gamma, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{anderson_matrix, LatticeBox};
    use crate::spectral::Instance;
    use nalgebra::{Complex, DMatrix};
    use num_rational::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hand() -> (LatticeBox, Instance<f64>) {
        let b = LatticeBox::new(1, 0, 1).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let inst = Instance::new(&h, &Region::from_indices(&b, &[0]).unwrap()).unwrap();
        (b, inst)
    }

    fn hand_d() -> Vec<f64> {
        vec![3f64.powf(-0.25), 3f64.powf(0.25)]
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn ensemble_spec_validation() {
        assert!(EnsembleSpec::weighted(vec![0.5, 0.6]).is_err());
        assert!(EnsembleSpec::weighted(vec![]).is_err());
        assert!(EnsembleSpec::weighted(vec![1.5, -0.5]).is_err());
        let w = EnsembleSpec::weighted(vec![0.25, 0.0, 0.75]).unwrap();
        assert_eq!(w.top(), 2);
        assert_eq!(w.levels(), vec![(0, 0.25), (2, 0.75)]);
        assert_eq!(EnsembleSpec::pure(3).levels(), vec![(3, 1.0)]);
    }

    #[test]
    fn ground_eigenvalues_factorize() {
        let d = hand_d();
        for n in [[0u32, 0], [1, 0], [2, 3], [5, 1]] {
            let lam = pt_eigenvalue(&n, &EnsembleSpec::pure(0), &d).unwrap();
            let expect: f64 =
                d.iter().zip(n).map(|(a, n)| {
                    let z = (a - 1.0) / (a + 1.0);
                    (1.0 - z) * z.powi(n as i32)
                }).product();
            assert!((lam - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_spectrum_gives_uniform_sector() {
        let d = vec![1.0f64; 3];
        let ens = EnsembleSpec::pure(2);
        assert!((pt_eigenvalue(&[1, 1, 0], &ens, &d).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(pt_eigenvalue(&[1, 0, 0], &ens, &d).unwrap(), 0.0);
        let cert = certified_trace_norm(&ens, &d, &TruncationPolicy::default()).unwrap();
        assert!((cert.trace_norm - 1.0).abs() < 1e-15);
        assert!(cert.most_negative.is_none());
    }

    #[test]
    fn single_excitation_two_modes() {
        let d = hand_d();
        let ops: Vec<Vec<ScaledModeOperator<f64>>> =
            d.iter().map(|a| (0..2).map(|m| ScaledModeOperator::new(*a, m).unwrap()).collect()).collect();
        for n in [[0u32, 0], [2, 0], [1, 1], [4, 3]] {
            let (n1, n2) = (n[0] as usize, n[1] as usize);
            let expect = 0.5
                * (ops[0][1].eigenvalue(n1) * ops[1][0].eigenvalue(n2)
                    + ops[0][0].eigenvalue(n1) * ops[1][1].eigenvalue(n2));
            let lam = pt_eigenvalue(&n, &EnsembleSpec::pure(1), &d).unwrap();
            assert!((lam - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_in_rationals() {
        let d = vec![rational(1, 2), rational(3, 1), rational(5, 4)];
        let ens = EnsembleSpec::pure(2);
        let nvec = [2u32, 0, 1];
        let lam = pt_eigenvalue(&nvec, &ens, &d).unwrap();
        // Same value from the polynomial form evaluated by hand.
        let tables = ModeTables::build(&d, 2, &TruncationPolicy::new(6, 1e-3).unwrap()).unwrap();
        let coef = ens.coefficients::<BigRational>(3).unwrap();
        let mut p = vec![BigRational::from_integer(1.into()), rational(0, 1), rational(0, 1)];
        for (k, &n) in nvec.iter().enumerate() {
            p = poly_mul(&p, tables.poly(k, n as usize));
        }
        assert_eq!(lam, coef[2].clone() * p[2].clone());
    }

    #[test]
    fn engine_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let policy = TruncationPolicy::new(60, 1e-9).unwrap();
        for (k_modes, total) in [(1, 2), (2, 1), (3, 2), (4, 1), (2, 3)] {
            let d: Vec<f64> = (0..k_modes).map(|_| rng.gen_range(0.6..1.6)).collect();
            let ens = EnsembleSpec::pure(total);
            let cert = certified_trace_norm(&ens, &d, &policy).unwrap();
            let mut abs_sum = 0.0;
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            let mut nvec = vec![0u32; k_modes];
            loop {
                let lam = pt_eigenvalue(&nvec, &ens, &d).unwrap();
                abs_sum += lam.abs();
                sum += lam;
                min = min.min(lam);
                let mut pos = k_modes;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    if (nvec[pos] as usize) < cert.cutoffs[pos] {
                        nvec[pos] += 1;
                        break;
                    }
                    nvec[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
            assert!((abs_sum - cert.trace_norm).abs() < 1e-12, "{k_modes} {total}");
            assert!((sum - cert.trace_sum).abs() < 1e-12);
            assert!((cert.trace_sum - 1.0).abs() <= cert.tail_bound.unwrap() + 1e-13);
            if let Some((n, v)) = &cert.most_negative {
                assert!((*v - min).abs() < 1e-15);
                assert!((pt_eigenvalue(n, &ens, &d).unwrap() - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hand_frame_ground_state() {
        let (_, inst) = hand();
        let report = exact_log_negativity(&EnsembleSpec::pure(0), &inst.spectrum, &TruncationPolicy::default()).unwrap();
        let quarter_ln3 = 0.25 * 3f64.ln();
        assert!((report.log_negativity - quarter_ln3).abs() < 1e-9);
        assert!((ground_state_negativity_closed_form(inst.spectrum.values()) - quarter_ln3).abs() < 1e-12);
        assert!((report.product_bound - quarter_ln3).abs() < 1e-12);
        assert!(report.tail_bound <= 1e-10);
        assert!((report.trace_check - 1.0).abs() <= report.tail_bound + 1e-14);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(ground_state_negativity_closed_form(&[1.0, 2.0, 5.0]), 0.0);
        let d = [0.5f64, 0.8, 1.25, 2.0];
        let half_sum: f64 = d.iter().map(|x| x.ln().abs()).sum::<f64>() / 2.0;
        assert!((ground_state_negativity_closed_form(&d) - half_sum).abs() < 1e-14);
        let hd = hand_d();
        assert!((product_bound(&hd, 1) - 0.75 * 3f64.ln()).abs() < 1e-14);
        assert_eq!(product_bound(&[1.0, 1.0], 3), 0.0);
    }

    #[test]
    fn h_bound_examples() {
        let (b, inst) = hand();
        let r = Region::from_indices(&b, &[0]).unwrap();
        let v = h_bound(&inst.frame, &r, 0).unwrap();
        assert!((v - (3f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(v >= 0.25 * 3f64.ln());
        assert_eq!(h_bound(&inst.frame, &Region::empty(&b), 2).unwrap(), 0.0);
        let diag = crate::spectral::eigendecompose(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])))
            .unwrap();
        assert_eq!(h_bound(&diag, &r, 3).unwrap(), 0.0);
    }

    #[test]
    fn product_bound_z_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = LatticeBox::new(1, 0, 5).unwrap();
        for _ in 0..10 {
            let k: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..8.0)).collect();
            let h = anderson_matrix::<f64>(&b, 1.0, &k).unwrap();
            let inst = Instance::new(&h, &Region::left_half(&b)).unwrap();
            for n in 0..4 {
                let a = product_bound(inst.spectrum.values(), n);
                let z = product_bound_from_z(inst.spectrum.z_eigenvalues(), n);
                assert!((a - z).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mixed_ensembles() {
        let (_, inst) = hand();
        let policy = TruncationPolicy::default();
        let ground = exact_log_negativity(&EnsembleSpec::pure(0), &inst.spectrum, &policy).unwrap();
        let m = mixed_log_negativity(&[1.0, 0.0, 0.0], &inst.spectrum, &policy).unwrap();
        assert!((m.log_negativity - ground.log_negativity).abs() < 2e-10);
        let pure2 = exact_log_negativity(&EnsembleSpec::pure(2), &inst.spectrum, &policy).unwrap();
        let m = mixed_log_negativity(&[0.0, 0.0, 1.0], &inst.spectrum, &policy).unwrap();
        assert!((m.log_negativity - pure2.log_negativity).abs() < 2e-10);
        let u = exact_log_negativity(&EnsembleSpec::uniform(2), &inst.spectrum, &policy).unwrap();
        assert!(u.log_negativity <= u.product_bound);
        assert!((u.trace_check - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_spectra_have_zero_negativity() {
        let b = LatticeBox::new(1, 0, 3).unwrap();
        let k = [0.5, 1.5, 2.5, 3.0];
        let policy = TruncationPolicy::default();
        for (lambda, region) in [
            (0.0, Region::left_half(&b)),
            (1.0, Region::empty(&b)),
            (1.0, Region::full(&b)),
        ] {
            let h = anderson_matrix::<f64>(&b, lambda, &k).unwrap();
            let inst = Instance::new(&h, &region).unwrap();
            for n in 0..3 {
                let r = exact_log_negativity(&EnsembleSpec::pure(n), &inst.spectrum, &policy).unwrap();
                assert!(r.log_negativity.abs() < 1e-12, "{lambda} {n}: {r:?}");
                assert!(r.product_bound.abs() < 1e-12);
                assert!(h_bound(&inst.frame, &region, n).unwrap().abs() < 1e-12 || lambda > 0.0);
            }
        }
    }

    #[test]
    fn budget_and_truncation_errors() {
        let d = vec![0.3, 3.0, 0.5, 2.0];
        let tight = TruncationPolicy::new(200, 1e-12).unwrap().with_budget(100);
        assert!(matches!(
            certified_trace_norm(&EnsembleSpec::pure(1), &d, &tight),
            Err(Error::EnumerationTooLarge { .. })
        ));
        let short = TruncationPolicy::new(3, 1e-12).unwrap();
        assert!(matches!(
            certified_trace_norm(&EnsembleSpec::pure(1), &d, &short),
            Err(Error::InsufficientTruncation { .. })
        ));
    }

    #[test]
    fn witnesses() {
        let policy = TruncationPolicy::default();
        assert!(peres_witness(&EnsembleSpec::pure(0), &[1.0, 1.0], &policy).unwrap().is_none());
        let d = hand_d();
        let w = peres_witness(&EnsembleSpec::pure(1), &d, &policy).unwrap().unwrap();
        assert!(w.from_candidate && w.eigenvalue < 0.0);
        assert_eq!(w.nvec[1], 0);
        assert_eq!(w.nvec[0] % 2, 0);
        // N = 0 with d < 1: negative at odd index, found by the scan.
        let w = peres_witness(&EnsembleSpec::pure(0), &d, &policy).unwrap().unwrap();
        assert!(w.eigenvalue < 0.0 && w.nvec[0] % 2 == 1);
        assert!(w.from_candidate);
        // Near-unit modes stay at zero; the deepest mode gets parity N + 1.
        let c = witness_candidates(&[0.9, 1.0 - 1e-15, 1.2], 2, 1);
        assert_eq!(c, vec![vec![3, 0, 0]]);
        let c = witness_candidates(&[0.9, 0.8], 1, 1);
        assert_eq!(c, vec![vec![2, 2], vec![0, 2]]);
    }

    #[test]
    fn spectral_char_matches_sector_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let policy = TruncationPolicy::new(200, 1e-13).unwrap();
        for (k_modes, total) in [(2, 0), (2, 2), (3, 1), (4, 3)] {
            let d: Vec<f64> = (0..k_modes).map(|_| rng.gen_range(0.5..2.0)).collect();
            for _ in 0..3 {
                let z: Vec<Complex<f64>> =
                    (0..k_modes).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let lhs = pt_char_spectral(&EnsembleSpec::pure(total), &d, &z, &policy).unwrap();
                let rhs = crate::characteristic::ensemble_pt_char_diagonal(&d, total, &z).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn energy() {
        assert_eq!(ensemble_energy_from_gamma(&[1.0, 2.0], 1), 6.0);
        assert_eq!(ensemble_energy_brute_force(&[1.0, 2.0], 1).unwrap(), 6.0);
        let g = [rational(1, 3), rational(7, 5), rational(2, 1)];
        for n in 0..6 {
            assert_eq!(ensemble_energy_from_gamma(&g, n), ensemble_energy_brute_force(&g, n).unwrap());
        }
        let (_, inst) = hand();
        let g: f64 = inst.frame.gamma().sum();
        assert!((ensemble_energy(&inst.frame, 0) - g).abs() < 1e-14);
        // N = K|Λ| matches the energy of the eigenstate (K, …, K).
        let gammas = [0.7, 1.1, 2.5];
        assert!((ensemble_energy_from_gamma(&gammas, 6) - gammas.iter().sum::<f64>() * 5.0).abs() < 1e-13);
    }

    #[test]
    fn report_json_is_flat() {
        let (_, inst) = hand();
        let r = exact_log_negativity(&EnsembleSpec::pure(0), &inst.spectrum, &TruncationPolicy::default())
            .unwrap()
            .with_h_bound(0.366)
            .with_seed(7);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for key in ["log_negativity", "trace_norm", "tail_bound", "trace_check", "product_bound", "h_bound", "n_max", "N", "seed"] {
            assert!(keys.contains(&key), "{key}");
        }
        assert!(!keys.contains(&"seconds"));
    }
}
