//! Characteristic functions `⟨W(f)⟩` of Gaussian states, energy
//! eigenstates and the partially transposed N-modes ensemble.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{from_u128, lit, to_f64, tolerance, Real};
use crate::special::{generalized_laguerre, laguerre, sector_size};
use crate::spectral::{CorrelationFrame, SpectralFrame};

/// A test function `f ∈ ℓ²(Λ; ℂ)` and its real stacking `f̃ = (Re f, Im f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T: Real> {
    f: DVector<Complex<T>>,
    ftilde: DVector<T>,
}

impl<T: Real> TestFunction<T> {
    pub fn new(f: DVector<Complex<T>>) -> Self {
        let n = f.len();
        let ftilde = DVector::from_fn(2 * n, |i, _| if i < n { f[i].re } else { f[i - n].im });
        Self { f, ftilde }
    }

    pub fn from_parts(re: &[T], im: &[T]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidInput("real and imaginary parts differ in length".into()));
        }
        Ok(Self::new(DVector::from_iterator(
            re.len(),
            re.iter().zip(im).map(|(r, i)| Complex::new(*r, *i)),
        )))
    }

    pub fn zero(n: usize) -> Self {
        Self::new(DVector::from_element(n, Complex::new(T::zero(), T::zero())))
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn f(&self) -> &DVector<Complex<T>> {
        &self.f
    }

    pub fn ftilde(&self) -> &DVector<T> {
        &self.ftilde
    }

    pub fn scaled(&self, t: T) -> Self {
        Self::new(self.f.map(|z| z * t))
    }

    /// `⟨f̃, A f̃⟩` for a real `2|Λ| × 2|Λ|` matrix.
    pub fn quadratic_form(&self, a: &DMatrix<T>) -> T {
        self.ftilde.dot(&(a * &self.ftilde))
    }
}

/// `V f = γ^{-1/2} Oᵀ Re f + i γ^{1/2} Oᵀ Im f`, the test function in the
/// normal-mode frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedFunction<T: Real> {
    vf: DVector<Complex<T>>,
}

impl<T: Real> RotatedFunction<T> {
    pub fn new(frame: &SpectralFrame<T>, f: &TestFunction<T>) -> Result<Self> {
        if f.len() != frame.len() {
            return Err(Error::InvalidInput(format!(
                "test function over {} sites for a frame of {} sites",
                f.len(),
                frame.len()
            )));
        }
        let ot = frame.basis().transpose();
        let re = &ot * f.f().map(|z| z.re);
        let im = &ot * f.f().map(|z| z.im);
        let gamma = frame.gamma();
        let vf = DVector::from_fn(f.len(), |k, _| {
            let g = gamma[k].sqrt();
            Complex::new(re[k] / g, im[k] * g)
        });
        Ok(Self { vf })
    }

    pub fn values(&self) -> &DVector<Complex<T>> {
        &self.vf
    }

    /// `‖Vf‖² = ⟨f̃, M f̃⟩`.
    pub fn norm_sqr(&self) -> T {
        self.vf.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    /// `|(Vf)_k|² = ⟨f̃, M χ_k(M) f̃⟩`.
    pub fn mode_weight(&self, k: usize) -> T {
        self.vf[k].norm_sqr()
    }
}

/// `exp(-⟨f̃, Γ f̃⟩/2)` for a covariance with possibly complex entries; the
/// antisymmetric imaginary part drops out of the real quadratic form.
pub fn gaussian_char<T: Real>(gamma: &DMatrix<Complex<T>>, f: &TestFunction<T>) -> Result<T> {
    let ft = f.ftilde();
    if gamma.nrows() != ft.len() || gamma.ncols() != ft.len() {
        return Err(Error::InvalidInput("covariance dimension does not match test function".into()));
    }
    let mut q = Complex::new(T::zero(), T::zero());
    for i in 0..ft.len() {
        for j in 0..ft.len() {
            q += gamma[(i, j)] * (ft[i] * ft[j]);
        }
    }
    let scale = q.re.abs().max(T::one());
    if q.im.abs() > tolerance::<T>(1e-10) * scale {
        return Err(Error::NumericalDegeneracy(format!(
            "quadratic form has imaginary residue {:e}",
            to_f64(&q.im)
        )));
    }
    Ok((-(q.re * lit::<T>(0.5))).exp())
}

/// `gaussian_char` for a real covariance.
pub fn gaussian_char_real<T: Real>(gamma: &DMatrix<T>, f: &TestFunction<T>) -> T {
    (-(f.quadratic_form(gamma) * lit::<T>(0.5))).exp()
}

/// `⟨ψ_α, W(f) ψ_α⟩ = e^{-‖Vf‖²/4} ∏_k L_{α_k}(|(Vf)_k|²/2)`.
pub fn eigenstate_char<T: Real>(frame: &SpectralFrame<T>, alpha: &[u32], f: &TestFunction<T>) -> Result<T> {
    if alpha.len() != frame.len() {
        return Err(Error::InvalidInput(format!(
            "occupation vector of length {} for {} modes",
            alpha.len(),
            frame.len()
        )));
    }
    let v = RotatedFunction::new(frame, f)?;
    let half: T = lit(0.5);
    let mut value = (-(v.norm_sqr() * lit::<T>(0.25))).exp();
    for (k, &a) in alpha.iter().enumerate() {
        value *= laguerre(a as usize, &(v.mode_weight(k) * half));
    }
    Ok(value)
}

/// `(1/|𝒥_N|) 𝒬_N(x/2) e^{-x/4}` with `𝒬_N = L_N^{(|Λ|-1)}`.
fn sector_gaussian<T: Real>(modes: usize, total: usize, x: T) -> Result<T> {
    let count: T = from_u128(sector_size(modes, total)?);
    let q = generalized_laguerre(total, modes - 1, &(x * lit::<T>(0.5)));
    Ok(q / count * (-(x * lit::<T>(0.25))).exp())
}

/// Characteristic function of `ρ_N^{T₁}`: the sector formula evaluated at
/// `x = ⟨f̃, M̃ f̃⟩`.
pub fn ensemble_pt_char<T: Real>(corr: &CorrelationFrame<T>, total: usize, f: &TestFunction<T>) -> Result<T> {
    if f.len() != corr.len() {
        return Err(Error::InvalidInput("test function does not match correlation frame".into()));
    }
    sector_gaussian(corr.len(), total, f.quadratic_form(corr.m_tilde()))
}

/// The same function in the diagonal frame of M̃, where
/// `⟨f̃, M̃ f̃⟩ = Σ_k d_k |z_k|²`.
pub fn ensemble_pt_char_diagonal<T: Real>(d: &[T], total: usize, z: &[Complex<T>]) -> Result<T> {
    if d.len() != z.len() || d.is_empty() {
        return Err(Error::InvalidInput("symplectic values and coordinates differ in length".into()));
    }
    let x = d.iter().zip(z).fold(T::zero(), |acc, (dk, zk)| acc + *dk * zk.norm_sqr());
    sector_gaussian(d.len(), total, x)
}
