//! Spectral calculus of h, the correlation matrices M and M̃, and the
//! symplectic spectrum of M̃.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sample_springs, anderson_matrix, DisorderSpec, LatticeBox, Region};
use crate::scalar::{lit, to_f64, tolerance, Real};

/// Eigendecomposition `h = O diag(γ²) Oᵀ` with cached fractional powers.
#[derive(Debug, Clone)]
pub struct SpectralFrame<T: Real> {
    h: DMatrix<T>,
    basis: DMatrix<T>,
    gamma2: DVector<T>,
    sqrt: DMatrix<T>,
    inv_sqrt: DMatrix<T>,
    quarter: DMatrix<T>,
    inv_quarter: DMatrix<T>,
    near_degenerate: bool,
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    let t = m.transpose();
    (m + t) * lit::<T>(0.5)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sorted_eigen<T: Real>(m: DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues"));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn spectral_norm_sym<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}

/// Diagonalizes a symmetric positive definite `h`.
pub fn eigendecompose<T: Real>(h: &DMatrix<T>) -> Result<SpectralFrame<T>> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::InvalidInput(format!("h must be square and nonempty, got {}x{}", n, h.ncols())));
    }
    let scale = spectral_norm_sym(h).max(T::one());
    let asym = (h - h.transpose()).abs().max();
    if asym > tolerance::<T>(1e-12) * scale {
        return Err(Error::InvalidInput(format!("h is not symmetric (deviation {:e})", to_f64(&asym))));
    }
    let h = symmetrize(h.clone());
    let (gamma2, basis) = sorted_eigen(h.clone());
    if !(gamma2[0] > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: to_f64(&gamma2[0]) });
    }
    let recon = &basis * DMatrix::from_diagonal(&gamma2) * basis.transpose();
    let err = (&recon - &h).abs().max();
    if err > tolerance::<T>(1e-10) * scale {
        return Err(Error::NumericalDegeneracy(format!("reconstruction error {:e}", to_f64(&err))));
    }
    let gap_tol = lit::<T>(1e-8) * scale;
    let near_degenerate = (1..n).any(|i| gamma2[i] - gamma2[i - 1] < gap_tol);
    if near_degenerate {
        log::warn!("spectrum of h is nearly degenerate (gap below 1e-8 * |h|)");
    }
    let power = |s: f64| {
        let d = gamma2.map(|g| g.powf(lit(s)));
        symmetrize(&basis * DMatrix::from_diagonal(&d) * basis.transpose())
    };
    Ok(SpectralFrame {
        sqrt: power(0.5),
        inv_sqrt: power(-0.5),
        quarter: power(0.25),
        inv_quarter: power(-0.25),
        h,
        basis,
        gamma2,
        near_degenerate,
    })
}

impl<T: Real> SpectralFrame<T> {
    pub fn len(&self) -> usize {
        self.h.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> &DMatrix<T> {
        &self.h
    }

    /// Orthogonal matrix O whose columns are eigenvectors of h.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// Eigenvalues γ_k² of h, ascending.
    pub fn gamma2(&self) -> &DVector<T> {
        &self.gamma2
    }

    /// Mode frequencies γ_k.
    pub fn gamma(&self) -> DVector<T> {
        self.gamma2.map(|g| g.sqrt())
    }

    pub fn is_near_degenerate(&self) -> bool {
        self.near_degenerate
    }

    /// `O diag(γ^{2s}) Oᵀ`, re-symmetrized.
    pub fn fractional_power(&self, s: T) -> DMatrix<T> {
        let d = self.gamma2.map(|g| g.powf(s));
        symmetrize(&self.basis * DMatrix::from_diagonal(&d) * self.basis.transpose())
    }

    pub fn h_sqrt(&self) -> &DMatrix<T> {
        &self.sqrt
    }

    pub fn h_inv_sqrt(&self) -> &DMatrix<T> {
        &self.inv_sqrt
    }

    pub fn h_quarter(&self) -> &DMatrix<T> {
        &self.quarter
    }

    pub fn h_inv_quarter(&self) -> &DMatrix<T> {
        &self.inv_quarter
    }
}

/// Free function form of [`SpectralFrame::fractional_power`].
pub fn fractional_power<T: Real>(frame: &SpectralFrame<T>, s: T) -> DMatrix<T> {
    frame.fractional_power(s)
}

/// `J = [[0, -I], [I, 0]]`.
pub fn symplectic_form<T: Real>(n: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -T::one();
        j[(n + i, i)] = T::one();
    }
    j
}

/// M = diag(h^{-1/2}, h^{1/2}), the sign matrix P of the region and
/// M̃ = diag(I, P) M diag(I, P).
#[derive(Debug, Clone)]
pub struct CorrelationFrame<T: Real> {
    m: DMatrix<T>,
    signs: Vec<T>,
    m_tilde: DMatrix<T>,
}

pub fn build_correlation_frame<T: Real>(frame: &SpectralFrame<T>, region: &Region) -> Result<CorrelationFrame<T>> {
    let n = frame.len();
    if region.universe_size() != n {
        return Err(Error::InvalidRegion(format!(
            "region over {} sites used with a frame of {} sites",
            region.universe_size(),
            n
        )));
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(frame.h_inv_sqrt());
    m.view_mut((n, n), (n, n)).copy_from(frame.h_sqrt());
    let signs: Vec<T> = (0..n).map(|x| if region.contains(x) { -T::one() } else { T::one() }).collect();
    let mut m_tilde = m.clone();
    for i in 0..n {
        for j in 0..n {
            m_tilde[(n + i, n + j)] *= signs[i] * signs[j];
        }
    }
    Ok(CorrelationFrame { m, signs, m_tilde })
}

impl<T: Real> CorrelationFrame<T> {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn m(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn m_tilde(&self) -> &DMatrix<T> {
        &self.m_tilde
    }

    /// Diagonal of P: −1 on Λ₀, +1 elsewhere.
    pub fn signs(&self) -> &[T] {
        &self.signs
    }

    pub fn sign_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.signs))
    }

    /// Ground state correlation Γ₀ = (M − iJ)/2.
    pub fn ground_correlation(&self) -> DMatrix<Complex<T>> {
        let j = symplectic_form::<T>(self.len());
        let half: T = lit(0.5);
        DMatrix::from_fn(self.m.nrows(), self.m.ncols(), |r, c| {
            Complex::new(self.m[(r, c)] * half, -j[(r, c)] * half)
        })
    }
}

/// Symplectic eigenvalues `d_k` of M̃ (ascending), the matrix
/// `Z = h^{1/4} P h^{-1/2} P h^{1/4}` with `spec(Z) = {d_k²}`, and `ζ_{d_k}`.
#[derive(Debug, Clone)]
pub struct SymplecticSpectrum<T: Real> {
    d: Vec<T>,
    z_eigenvalues: Vec<T>,
    z: Option<DMatrix<T>>,
    zeta: Vec<T>,
}

impl<T: Real> SymplecticSpectrum<T> {
    /// Spectrum from given values (e.g. a hand-specified instance).
    pub fn from_values(mut d: Vec<T>) -> Result<Self> {
        if d.iter().any(|x| !(*x > T::zero())) {
            return Err(Error::InvalidInput("symplectic eigenvalues must be positive".into()));
        }
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let z_eigenvalues = d.iter().map(|x| *x * *x).collect();
        let zeta = d.iter().map(|x| (*x - T::one()) / (*x + T::one())).collect();
        Ok(Self { d, z_eigenvalues, z: None, zeta })
    }

    pub fn values(&self) -> &[T] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Eigenvalues of Z, ascending.
    pub fn z_eigenvalues(&self) -> &[T] {
        &self.z_eigenvalues
    }

    pub fn z_matrix(&self) -> Option<&DMatrix<T>> {
        self.z.as_ref()
    }

    pub fn zeta(&self) -> &[T] {
        &self.zeta
    }
}

pub fn symplectic_eigenvalues<T: Real>(
    frame: &SpectralFrame<T>,
    corr: &CorrelationFrame<T>,
) -> Result<SymplecticSpectrum<T>> {
    let n = frame.len();
    let signs = corr.signs();
    if signs.iter().all(|s| *s == signs[0]) {
        // Λ₀ ∈ {∅, Λ}: P = ±1 and Z = 1 identically.
        return Ok(SymplecticSpectrum {
            d: vec![T::one(); n],
            z_eigenvalues: vec![T::one(); n],
            z: Some(DMatrix::identity(n, n)),
            zeta: vec![T::zero(); n],
        });
    }
    let mut middle = frame.h_inv_sqrt().clone();
    for i in 0..n {
        for j in 0..n {
            middle[(i, j)] *= signs[i] * signs[j];
        }
    }
    let z = symmetrize(frame.h_quarter() * middle * frame.h_quarter());
    let (values, _) = sorted_eigen(z.clone());
    let scale = values[n - 1].max(T::one());
    if !(values[0] > tolerance::<T>(1e-14) * scale) {
        return Err(Error::NumericalDegeneracy(format!(
            "Z is not positive definite (smallest eigenvalue {:e})",
            to_f64(&values[0])
        )));
    }
    let z_eigenvalues: Vec<T> = values.iter().copied().collect();
    let d: Vec<T> = z_eigenvalues.iter().map(|x| x.sqrt()).collect();
    let zeta = d.iter().map(|x| (*x - T::one()) / (*x + T::one())).collect();
    Ok(SymplecticSpectrum { d, z_eigenvalues, z: Some(z), zeta })
}

/// Positive eigenvalues of the Hermitian `i M̃^{1/2} J M̃^{1/2}`, ascending.
/// Independent route to the symplectic spectrum used for verification.
pub fn symplectic_cross_check<T: Real>(corr: &CorrelationFrame<T>) -> Result<Vec<T>> {
    let n = corr.len();
    let (values, vectors) = sorted_eigen(corr.m_tilde().clone());
    if !(values[0] > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: to_f64(&values[0]) });
    }
    let root = symmetrize(&vectors * DMatrix::from_diagonal(&values.map(|v| v.sqrt())) * vectors.transpose());
    let a = &root * symplectic_form::<T>(n) * &root;
    let herm = DMatrix::from_fn(2 * n, 2 * n, |r, c| Complex::new(T::zero(), a[(r, c)]));
    let eig = SymmetricEigen::new(herm);
    let mut all: Vec<T> = eig.eigenvalues.iter().copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(all[n..].to_vec())
}

/// Compares both routes, failing when they deviate beyond `tol`.
pub fn verify_symplectic<T: Real>(spectrum: &SymplecticSpectrum<T>, corr: &CorrelationFrame<T>, tol: f64) -> Result<T> {
    let other = symplectic_cross_check(corr)?;
    let deviation = spectrum
        .values()
        .iter()
        .zip(&other)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), |acc, x| acc.max(x));
    if to_f64(&deviation) > tol {
        return Err(Error::CrossCheckFailure { deviation: to_f64(&deviation), tolerance: tol });
    }
    Ok(deviation)
}

/// Everything downstream needs for one realization.
#[derive(Debug, Clone)]
pub struct Instance<T: Real> {
    pub frame: SpectralFrame<T>,
    pub corr: CorrelationFrame<T>,
    pub spectrum: SymplecticSpectrum<T>,
}

impl<T: Real> Instance<T> {
    pub fn new(h: &DMatrix<T>, region: &Region) -> Result<Self> {
        let frame = eigendecompose(h)?;
        let corr = build_correlation_frame(&frame, region)?;
        let spectrum = symplectic_eigenvalues(&frame, &corr)?;
        Ok(Self { frame, corr, spectrum })
    }
}

/// Log-linear fit `mean |⟨δ_x, h^{-1/2} δ_y⟩| ≈ C e^{-μ|x-y|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub mu: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    /// Mean relative standard error of the per-distance means.
    pub mean_rel_stderr: f64,
    /// `(distance, mean, standard error, pair samples)` for distances ≥ 1.
    pub profile: Vec<(u64, f64, f64, u64)>,
    /// Set when the fit is unusable (no decay, or vanishing correlator).
    pub degenerate: bool,
    pub realizations: usize,
    /// Largest distance used by the fit; beyond it the means are rounding noise.
    pub fit_max_distance: u64,
}

/// Disorder-averaged eigencorrelator decay of `h^{-1/2}`.
pub fn eigencorrelator_decay(lattice: &LatticeBox, spec: &DisorderSpec, realizations: usize) -> Result<DecayFit> {
    if realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let n = lattice.len();
    let max_dist = (0..n).map(|j| lattice.distance(0, j)).max().unwrap_or(0) as usize;
    // Per realization: per-distance sum of |entries| over pairs.
    let per_real: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let k = sample_springs(spec, lattice, r);
            let h = anderson_matrix::<f64>(lattice, spec.lambda, &k)?;
            let frame = eigendecompose(&h)?;
            let g = frame.h_inv_sqrt();
            let mut sums = vec![0.0; max_dist + 1];
            for x in 0..n {
                for y in 0..n {
                    sums[lattice.distance(x, y) as usize] += g[(x, y)].abs();
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = vec![0u64; max_dist + 1];
    for x in 0..n {
        for y in 0..n {
            pairs[lattice.distance(x, y) as usize] += 1;
        }
    }
    let mut profile = Vec::new();
    for dist in 1..=max_dist {
        let samples: Vec<f64> = per_real.iter().map(|s| s[dist] / pairs[dist] as f64).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64
        } else {
            0.0
        };
        profile.push((dist as u64, mean, (var / samples.len() as f64).sqrt(), pairs[dist]));
    }
    // Entries from a dense eigendecomposition carry absolute error of order
    // n·ε·‖h^{-1/2}‖; the fit stops at the first distance below that floor.
    let diagonal = per_real.iter().map(|s| s[0]).sum::<f64>() / (realizations * n) as f64;
    let floor = 100.0 * n as f64 * f64::EPSILON * diagonal;
    let usable: Vec<&(u64, f64, f64, u64)> = profile.iter().take_while(|p| p.1 > floor).collect();
    let fit_max_distance = usable.last().map_or(0, |p| p.0);
    let mean_rel_stderr = if usable.is_empty() {
        0.0
    } else {
        usable.iter().map(|p| p.2 / p.1).sum::<f64>() / usable.len() as f64
    };
    if usable.len() < 2 {
        return Ok(DecayFit {
            c: 0.0,
            mu: 0.0,
            residual: f64::INFINITY,
            mean_rel_stderr,
            profile,
            degenerate: true,
            realizations,
            fit_max_distance,
        });
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    let mu = -slope;
    Ok(DecayFit {
        c: intercept.exp(),
        mu,
        residual,
        mean_rel_stderr,
        profile,
        degenerate: !(mu > 0.0),
        fit_max_distance,
        realizations,
    })
}

/// `Σ_{x∈ℤ^d} e^{-μ|x|}` truncated where terms drop below 1e-12; the ℓ¹
/// norm factorizes so this is the d-th power of the one-dimensional sum.
pub fn lattice_exponential_sum(mu: f64, d: usize) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::UnavailableConstant(format!("decay rate must be positive, got {mu}")));
    }
    let mut one_d = 1.0;
    let mut r = 1u64;
    loop {
        let term = (-mu * r as f64).exp();
        if term < 1e-12 {
            break;
        }
        one_d += 2.0 * term;
        r += 1;
    }
    Ok(one_d.powi(d as i32))
}

/// `C̃ = C (4dλ + k_max)^{1/2} (Σ_{x∈ℤ^d} e^{-μ|x|})²`.
pub fn effective_area_constant(fit: &DecayFit, d: usize, lambda: f64, k_max: f64) -> Result<f64> {
    if fit.degenerate || !(fit.mu > 0.0) {
        return Err(Error::UnavailableConstant(format!("fit has no positive decay rate (mu = {})", fit.mu)));
    }
    let s = lattice_exponential_sum(fit.mu, d)?;
    Ok(fit.c * (4.0 * d as f64 * lambda + k_max).sqrt() * s * s)
}
