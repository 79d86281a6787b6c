//! Brute-force oracle on a truncated Fock space.
//!
//! Builds the Hamiltonian from ladder matrices, finds the ground state
//! numerically, creates eigenstates with Bogoliubov creation operators and
//! evaluates characteristic functions, partial transposes and trace norms
//! directly. Nothing here calls the symplectic or mode-operator code.
//!
//! Tensor factors are ordered with the sites of Λ₀ first; the first factor
//! is the most significant digit of the state index.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::Region;

/// Largest space the matrix-free routines accept.
pub const MAX_DIMENSION: usize = 30_000;
/// Largest space for which dense operators (H, ρ, W) are formed.
pub const DENSE_LIMIT: usize = 4_096;

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerances {
    /// Admissible imaginary residue of a characteristic function.
    pub char_tol: f64,
    /// Admissible norm loss of a constructed eigenstate.
    pub state_tol: f64,
    /// Admissible asymmetry of a matrix passed to the trace norm.
    pub norm_tol: f64,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self { char_tol: 1e-6, state_tol: 1e-6, norm_tol: 1e-6 }
    }
}

/// `(a, a†)` truncated to `n_cut` levels.
pub fn ladder_matrices(n_cut: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n_cut < 2 {
        return Err(Error::InvalidInput(format!("n_cut must be at least 2, got {n_cut}")));
    }
    let mut a = DMatrix::zeros(n_cut, n_cut);
    for n in 1..n_cut {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    let ad = a.transpose();
    Ok((a, ad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFockSpace {
    n_cut: usize,
    /// `order[t]` is the lattice site at tensor position t.
    order: Vec<usize>,
    split: usize,
    dim: usize,
}

impl TruncatedFockSpace {
    pub fn new(region: &Region, n_cut: usize) -> Result<Self> {
        if n_cut < 2 {
            return Err(Error::InvalidInput(format!("n_cut must be at least 2, got {n_cut}")));
        }
        let mut order = region.members();
        let split = order.len();
        order.extend(region.complement_members());
        let dim = (0..order.len()).try_fold(1usize, |acc, _| acc.checked_mul(n_cut));
        match dim {
            Some(dim) if dim <= MAX_DIMENSION => Ok(Self { n_cut, order, split, dim }),
            _ => Err(Error::InvalidInput(format!(
                "Fock space {n_cut}^{} exceeds the limit of {MAX_DIMENSION}",
                region.universe_size()
            ))),
        }
    }

    pub fn sites(&self) -> usize {
        self.order.len()
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of leading tensor factors belonging to Λ₀.
    pub fn split(&self) -> usize {
        self.split
    }

    /// Dimensions `(d₁, d₂)` of the Λ₀ factor and its complement.
    pub fn bipartition(&self) -> (usize, usize) {
        let d1 = self.n_cut.pow(self.split as u32);
        (d1, self.dim / d1)
    }

    fn stride(&self, position: usize) -> usize {
        self.n_cut.pow((self.sites() - 1 - position) as u32)
    }

    fn ensure_dense(&self) -> Result<()> {
        if self.dim > DENSE_LIMIT {
            return Err(Error::InvalidInput(format!(
                "dense operator of dimension {} exceeds {DENSE_LIMIT}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// `out += scale · (A at tensor position t) v`.
fn apply_site_real(space: &TruncatedFockSpace, op: &DMatrix<f64>, t: usize, scale: f64, v: &[f64], out: &mut [f64]) {
    let n = space.n_cut;
    let right = space.stride(t);
    let block = n * right;
    for base in (0..space.dim).step_by(block) {
        for i in 0..n {
            for j in 0..n {
                let a = op[(i, j)];
                if a == 0.0 {
                    continue;
                }
                let a = a * scale;
                let (oi, vj) = (base + i * right, base + j * right);
                for r in 0..right {
                    out[oi + r] += a * v[vj + r];
                }
            }
        }
    }
}

fn apply_site_complex(space: &TruncatedFockSpace, op: &DMatrix<C64>, t: usize, v: &[C64]) -> Vec<C64> {
    let n = space.n_cut;
    let right = space.stride(t);
    let block = n * right;
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for base in (0..space.dim).step_by(block) {
        for i in 0..n {
            for j in 0..n {
                let a = op[(i, j)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let (oi, vj) = (base + i * right, base + j * right);
                for r in 0..right {
                    out[oi + r] += a * v[vj + r];
                }
            }
        }
    }
    out
}

/// `exp(G)` by scaling and squaring with a Taylor core.
pub fn expm(g: &DMatrix<C64>) -> DMatrix<C64> {
    let n = g.nrows();
    let norm = g.iter().map(|z| z.norm()).sum::<f64>();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = g * C64::new(scale, 0.0);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &a * C64::new(1.0 / k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Single-site Weyl factor `exp(i(z̄a + za†)/√2)`.
pub fn weyl_site(z: C64, n_cut: usize) -> Result<DMatrix<C64>> {
    let (a, ad) = ladder_matrices(n_cut)?;
    let i = C64::new(0.0, 1.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = a.map(|x| C64::new(x, 0.0)) * (i * z.conj() * s) + ad.map(|x| C64::new(x, 0.0)) * (i * z * s);
    Ok(expm(&g))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lowest eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization.
pub fn lanczos_ground(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let n0 = norm(start);
    if n0 == 0.0 {
        return Err(Error::InvalidInput("Lanczos start vector is zero".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / n0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for j in 0..max_iter {
        let mut w = apply(&basis[j]);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);
        let m = alphas.len();
        let done = beta < 1e-14 * alpha.abs().max(1.0);
        if done || m.is_multiple_of(5) || j + 1 == max_iter {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
                .expect("nonempty");
            let y = eig.eigenvectors.column(imin);
            let residual = beta * y[m - 1].abs();
            if done || residual <= tol * theta.abs().max(1.0) {
                let mut x = vec![0.0; start.len()];
                for (coef, v) in y.iter().zip(&basis) {
                    x.iter_mut().zip(v).for_each(|(a, b)| *a += coef * b);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|a| *a /= nx);
                return Ok((theta, x));
            }
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(Error::Divergence(format!("Lanczos did not converge in {max_iter} iterations")))
}

/// `⟨i₁i₂|ρ^{T₁}|j₁j₂⟩ = ⟨j₁i₂|ρ|i₁j₂⟩` for a `d₁·d₂` square matrix.
pub fn partial_transpose_dense(rho: &DMatrix<f64>, d1: usize, d2: usize) -> Result<DMatrix<f64>> {
    if rho.nrows() != d1 * d2 || rho.ncols() != d1 * d2 {
        return Err(Error::InvalidInput(format!(
            "matrix of size {}x{} does not split as {d1}x{d2}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(DMatrix::from_fn(d1 * d2, d1 * d2, |r, c| {
        let (i1, i2) = (r / d2, r % d2);
        let (j1, j2) = (c / d2, c % d2);
        rho[(j1 * d2 + i2, i1 * d2 + j2)]
    }))
}

/// `Σ |eigenvalues|` of a real symmetric matrix.
pub fn trace_norm_dense(m: &DMatrix<f64>, symmetry_tol: f64) -> Result<f64> {
    let scale = m.abs().max().max(1.0);
    let asym = (m - m.transpose()).abs().max();
    if asym > symmetry_tol * scale {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (deviation {asym:e})")));
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.iter().map(|x| x.abs()).sum())
}

/// The truncated oscillator lattice for a given `h` and `Λ₀`.
#[derive(Debug, Clone)]
pub struct FockOracle {
    space: TruncatedFockSpace,
    /// `h` with rows and columns in tensor order.
    h: DMatrix<f64>,
    /// Normal-mode frequencies, ascending, and the matching eigenvectors
    /// of `h` (in tensor order).
    gamma: Vec<f64>,
    modes: DMatrix<f64>,
    a: DMatrix<f64>,
    ad: DMatrix<f64>,
    q: DMatrix<f64>,
    /// `p² + h_tt q²` for each position.
    local: Vec<DMatrix<f64>>,
    ground: Vec<f64>,
    ground_energy: f64,
    tol: OracleTolerances,
}

impl FockOracle {
    pub fn new(h: &DMatrix<f64>, region: &Region, n_cut: usize, tol: OracleTolerances) -> Result<Self> {
        let sites = h.nrows();
        if h.ncols() != sites || region.universe_size() != sites {
            return Err(Error::InvalidInput("h and region sizes do not match".into()));
        }
        let space = TruncatedFockSpace::new(region, n_cut)?;
        let order = space.order().to_vec();
        let hp = DMatrix::from_fn(sites, sites, |r, c| h[(order[r], order[c])]);

        let eig = SymmetricEigen::new(hp.clone());
        let mut idx: Vec<usize> = (0..sites).collect();
        idx.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).expect("finite"));
        if eig.eigenvalues[idx[0]] <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: eig.eigenvalues[idx[0]] });
        }
        let gamma: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
        let mut modes = DMatrix::zeros(sites, sites);
        for (col, &i) in idx.iter().enumerate() {
            modes.set_column(col, &eig.eigenvectors.column(i));
        }

        let (a, ad) = ladder_matrices(n_cut)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = (&a + &ad) * s;
        // p = (a - a†)/(i√2), so p² = -(a - a†)²/2.
        let diff = &a - &ad;
        let p2 = -(&diff * &diff) * 0.5;
        let q2 = &q * &q;
        let local = (0..sites).map(|t| &p2 + &q2 * hp[(t, t)]).collect();

        let mut oracle = Self {
            space,
            h: hp,
            gamma,
            modes,
            a,
            ad,
            q,
            local,
            ground: Vec::new(),
            ground_energy: 0.0,
            tol,
        };
        let (e, v) = oracle.compute_ground()?;
        oracle.ground_energy = e;
        oracle.ground = v;
        Ok(oracle)
    }

    fn compute_ground(&self) -> Result<(f64, Vec<f64>)> {
        let dim = self.space.dimension();
        if dim <= DENSE_LIMIT.min(1_600) {
            let eig = SymmetricEigen::new(self.hamiltonian_matrix()?);
            let (i, e) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
                .expect("nonempty");
            return Ok((e, eig.eigenvectors.column(i).iter().copied().collect()));
        }
        let mut start = vec![0.0; dim];
        start[0] = 1.0;
        lanczos_ground(|v| self.apply_hamiltonian(v), &start, 600, 1e-12)
    }

    pub fn space(&self) -> &TruncatedFockSpace {
        &self.space
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn ground_state(&self) -> &[f64] {
        &self.ground
    }

    /// `H v = Σ_t (p_t² + h_tt q_t²) v + Σ_{t≠s} h_ts q_t q_s v`.
    pub fn apply_hamiltonian(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let k = self.space.sites();
        for t in 0..k {
            apply_site_real(&self.space, &self.local[t], t, 1.0, v, &mut out);
        }
        let mut tmp = vec![0.0; v.len()];
        for s in 0..k {
            if (0..s).all(|t| self.h[(t, s)] == 0.0) {
                continue;
            }
            tmp.iter_mut().for_each(|x| *x = 0.0);
            apply_site_real(&self.space, &self.q, s, 1.0, v, &mut tmp);
            for t in 0..s {
                let hts = self.h[(t, s)];
                if hts != 0.0 {
                    apply_site_real(&self.space, &self.q, t, 2.0 * hts, &tmp, &mut out);
                }
            }
        }
        out
    }

    pub fn hamiltonian_matrix(&self) -> Result<DMatrix<f64>> {
        self.space.ensure_dense()?;
        let dim = self.space.dimension();
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for c in 0..dim {
            e[c] = 1.0;
            let col = self.apply_hamiltonian(&e);
            m.set_column(c, &DVector::from_vec(col));
            e[c] = 0.0;
        }
        Ok((&m + m.transpose()) * 0.5)
    }

    fn bogoliubov_coefficients(&self, k: usize) -> (f64, f64) {
        let g = self.gamma[k];
        (0.5 * (g.sqrt() + 1.0 / g.sqrt()), 0.5 * (g.sqrt() - 1.0 / g.sqrt()))
    }

    /// `b_k† v = Σ_x O_xk (c₊ a_x† + c₋ a_x) v`.
    pub fn apply_b_dagger(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let (cp, cm) = self.bogoliubov_coefficients(k);
        let mut out = vec![0.0; v.len()];
        for t in 0..self.space.sites() {
            let o = self.modes[(t, k)];
            apply_site_real(&self.space, &self.ad, t, o * cp, v, &mut out);
            apply_site_real(&self.space, &self.a, t, o * cm, v, &mut out);
        }
        out
    }

    /// `b_k v = Σ_x O_xk (c₊ a_x + c₋ a_x†) v`.
    pub fn apply_b(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let (cp, cm) = self.bogoliubov_coefficients(k);
        let mut out = vec![0.0; v.len()];
        for t in 0..self.space.sites() {
            let o = self.modes[(t, k)];
            apply_site_real(&self.space, &self.a, t, o * cp, v, &mut out);
            apply_site_real(&self.space, &self.ad, t, o * cm, v, &mut out);
        }
        out
    }

    /// Dense `b_k` for every mode.
    pub fn bogoliubov_b_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.space.ensure_dense()?;
        let dim = self.space.dimension();
        (0..self.space.sites())
            .map(|k| {
                let mut m = DMatrix::zeros(dim, dim);
                let mut e = vec![0.0; dim];
                for c in 0..dim {
                    e[c] = 1.0;
                    m.set_column(c, &DVector::from_vec(self.apply_b(k, &e)));
                    e[c] = 0.0;
                }
                Ok(m)
            })
            .collect()
    }

    /// `∏_k (b_k†)^{α_k} ψ₀ / √(α_k!)`, checked for norm loss and renormalized.
    pub fn eigenstate_vector(&self, alpha: &[u32]) -> Result<Vec<f64>> {
        if alpha.len() != self.space.sites() {
            return Err(Error::InvalidInput("occupation vector length does not match".into()));
        }
        let mut v = self.ground.clone();
        for (k, &count) in alpha.iter().enumerate() {
            for j in 1..=count {
                v = self.apply_b_dagger(k, &v);
                let s = 1.0 / (j as f64).sqrt();
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        let nv = norm(&v);
        if (nv - 1.0).abs() > self.tol.state_tol || self.top_level_weight(&v) > self.tol.state_tol {
            return Err(Error::TruncationLeak(format!(
                "eigenstate {alpha:?} has norm {nv} at n_cut={}",
                self.space.n_cut()
            )));
        }
        v.iter_mut().for_each(|x| *x /= nv);
        Ok(v)
    }

    /// Probability of finding some site in its highest retained level.
    pub fn top_level_weight(&self, v: &[f64]) -> f64 {
        let n = self.space.n_cut();
        let k = self.space.sites();
        let mut w = 0.0;
        for (i, x) in v.iter().enumerate() {
            let mut rest = i;
            let mut top = false;
            for _ in 0..k {
                top |= rest % n == n - 1;
                rest /= n;
            }
            if top {
                w += x * x;
            }
        }
        w / dot(v, v).max(f64::MIN_POSITIVE)
    }

    pub fn expectation_h(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply_hamiltonian(v))
    }

    /// `(1/|𝒥_N|) Σ_α |ψ_α⟩⟨ψ_α|`.
    pub fn ensemble_density(&self, total: usize) -> Result<DMatrix<f64>> {
        self.space.ensure_dense()?;
        let dim = self.space.dimension();
        let mut rho = DMatrix::zeros(dim, dim);
        let states = self.sector_states(total)?;
        let w = 1.0 / states.len() as f64;
        for v in &states {
            let col = DVector::from_column_slice(v);
            rho.ger(w, &col, &col, 1.0);
        }
        Ok(rho)
    }

    fn sector_states(&self, total: usize) -> Result<Vec<Vec<f64>>> {
        sector(self.space.sites(), total).iter().map(|alpha| self.eigenstate_vector(alpha)).collect()
    }

    /// `tr ρ_N H`.
    pub fn ensemble_energy(&self, total: usize) -> Result<f64> {
        let states = self.sector_states(total)?;
        Ok(states.iter().map(|v| self.expectation_h(v)).sum::<f64>() / states.len() as f64)
    }

    /// `ln ‖ρ_N^{T₁}‖₁` from the dense partial transpose.
    pub fn log_negativity(&self, total: usize) -> Result<f64> {
        let rho = self.ensemble_density(total)?;
        let (d1, d2) = self.space.bipartition();
        let pt = partial_transpose_dense(&rho, d1, d2)?;
        Ok(trace_norm_dense(&pt, self.tol.norm_tol)?.ln())
    }

    fn site_weyls(&self, f: &[C64]) -> Result<Vec<DMatrix<C64>>> {
        if f.len() != self.space.sites() {
            return Err(Error::InvalidInput("test function length does not match".into()));
        }
        self.space.order().iter().map(|&x| weyl_site(f[x], self.space.n_cut())).collect()
    }

    /// `W(f) v`, factor by factor. `f` is indexed by lattice site.
    pub fn apply_weyl(&self, f: &[C64], v: &[C64]) -> Result<Vec<C64>> {
        let ws = self.site_weyls(f)?;
        let mut out = v.to_vec();
        for (t, w) in ws.iter().enumerate() {
            out = apply_site_complex(&self.space, w, t, &out);
        }
        Ok(out)
    }

    pub fn weyl_matrix(&self, f: &[C64]) -> Result<DMatrix<C64>> {
        self.space.ensure_dense()?;
        let ws = self.site_weyls(f)?;
        let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for w in &ws {
            m = m.kronecker(w);
        }
        Ok(m)
    }

    fn real_part(&self, z: C64) -> Result<f64> {
        if z.im.abs() > self.tol.char_tol {
            return Err(Error::NumericalDegeneracy(format!("characteristic function has imaginary part {}", z.im)));
        }
        Ok(z.re)
    }

    /// `⟨ψ_α, W(f) ψ_α⟩`, matrix-free.
    pub fn eigenstate_char(&self, alpha: &[u32], f: &[C64]) -> Result<f64> {
        let v: Vec<C64> = self.eigenstate_vector(alpha)?.into_iter().map(|x| C64::new(x, 0.0)).collect();
        let w = self.apply_weyl(f, &v)?;
        let z: C64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        self.real_part(z)
    }

    /// `tr(ρ_N^{T₁} W(f))` with dense matrices.
    pub fn ensemble_pt_char(&self, total: usize, f: &[C64]) -> Result<f64> {
        let rho = self.ensemble_density(total)?;
        let (d1, d2) = self.space.bipartition();
        let pt = partial_transpose_dense(&rho, d1, d2)?;
        let w = self.weyl_matrix(f)?;
        let dim = self.space.dimension();
        let mut z = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                z += w[(j, i)] * pt[(i, j)];
            }
        }
        self.real_part(z)
    }
}

/// Compositions of `total` into `parts` parts, kept local so the oracle
/// does not share enumeration code with the analytic engine.
fn sector(parts: usize, total: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total as u32]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in sector(parts - 1, total - first) {
            rest.insert(0, first as u32);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;

    fn hand() -> (DMatrix<f64>, Region) {
        let b = LatticeBox::new(1, 0, 1).unwrap();
        (DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]), Region::from_indices(&b, &[0]).unwrap())
    }

    #[test]
    fn ladder() {
        let (a, ad) = ladder_matrices(2).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let (a, ad2) = ladder_matrices(6).unwrap();
        let num = &ad2 * &a;
        for n in 0..6 {
            assert!((num[(n, n)] - n as f64).abs() < 1e-14);
        }
        let comm = &a * &ad2 - &ad2 * &a;
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - e).abs() < 1e-14);
            }
        }
        assert!(ladder_matrices(1).is_err());
        assert_eq!(ad.nrows(), 2);
    }

    #[test]
    fn single_oscillator_levels() {
        let b = LatticeBox::new(1, 0, 1).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let o = FockOracle::new(&h, &Region::empty(&b), 10, OracleTolerances::default()).unwrap();
        let mut e: Vec<f64> = SymmetricEigen::new(o.hamiltonian_matrix().unwrap()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 2.0).abs() < 1e-12);
        assert!((e[1] - 4.0).abs() < 1e-12 && (e[2] - 4.0).abs() < 1e-12);
        // Decoupled unit frame: b = a.
        let bs = o.bogoliubov_b_matrices().unwrap();
        let (a, _) = ladder_matrices(10).unwrap();
        let id = DMatrix::identity(10, 10);
        let candidates = [a.kronecker(&id), id.kronecker(&a)];
        for b in &bs {
            let close = |m: &DMatrix<f64>| (b - m).abs().max() < 1e-14 || (b + m).abs().max() < 1e-14;
            assert!(candidates.iter().any(close));
        }
    }

    #[test]
    fn hand_frame_levels() {
        let (h, r) = hand();
        let o = FockOracle::new(&h, &r, 14, OracleTolerances::default()).unwrap();
        let mut e: Vec<f64> = SymmetricEigen::new(o.hamiltonian_matrix().unwrap()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s3 = 3f64.sqrt();
        assert!((e[0] - (1.0 + s3)).abs() < 1e-6);
        assert!((e[1] - (3.0 + s3)).abs() < 1e-6);
        let o30 = FockOracle::new(&h, &r, 30, OracleTolerances::default()).unwrap();
        assert!((o30.ground_energy() - (1.0 + s3)).abs() < 1e-6);
    }

    #[test]
    fn vacuum_and_number_operator() {
        let (h, r) = hand();
        let o = FockOracle::new(&h, &r, 24, OracleTolerances::default()).unwrap();
        for k in 0..2 {
            assert!(norm(&o.apply_b(k, o.ground_state())) < 1e-6);
        }
        for alpha in [[1u32, 0], [0, 1], [1, 1], [2, 0]] {
            let v = o.eigenstate_vector(&alpha).unwrap();
            let mut nv = vec![0.0; v.len()];
            for k in 0..2 {
                let bv = o.apply_b(k, &v);
                let bbv = o.apply_b_dagger(k, &bv);
                nv.iter_mut().zip(&bbv).for_each(|(x, y)| *x += y);
            }
            let total = (alpha[0] + alpha[1]) as f64;
            assert!((dot(&v, &nv) - total).abs() < 1e-6);
            let e: f64 = o.gamma().iter().zip(alpha).map(|(g, a)| g * (2 * a + 1) as f64).sum();
            assert!((o.expectation_h(&v) - e).abs() < 1e-6);
        }
        let v = o.eigenstate_vector(&[1, 0]).unwrap();
        let w = o.eigenstate_vector(&[0, 1]).unwrap();
        assert!(dot(&v, &w).abs() < 1e-8);
    }

    #[test]
    fn lanczos_matches_dense() {
        let b = LatticeBox::new(1, 0, 2).unwrap();
        let h = DMatrix::from_row_slice(3, 3, &[2.5, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 1.8]);
        let o = FockOracle::new(&h, &Region::from_indices(&b, &[1]).unwrap(), 10, OracleTolerances::default()).unwrap();
        let dense = SymmetricEigen::new(o.hamiltonian_matrix().unwrap()).eigenvalues.min();
        let mut start = vec![0.0; 1000];
        start[0] = 1.0;
        let (e, v) = lanczos_ground(|x| o.apply_hamiltonian(x), &start, 400, 1e-12).unwrap();
        assert!((e - dense).abs() < 1e-9);
        let hv = o.apply_hamiltonian(&v);
        let res: f64 = hv.iter().zip(&v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-8);
    }

    #[test]
    fn partial_transpose_properties() {
        let m = DMatrix::from_fn(6, 6, |r, c| ((r * 7 + c * 3) % 5) as f64 + if r == c { 3.0 } else { 0.0 });
        let rho = (&m + m.transpose()) * 0.5;
        let pt = partial_transpose_dense(&rho, 2, 3).unwrap();
        assert_eq!(partial_transpose_dense(&pt, 2, 3).unwrap(), rho);
        assert_eq!(pt.trace(), rho.trace());
        let a = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.3]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]);
        let prod = a.kronecker(&b);
        let pt = partial_transpose_dense(&prod, 2, 3).unwrap();
        assert!((pt - a.transpose().kronecker(&b)).abs().max() < 1e-15);
        assert!((trace_norm_dense(&prod, 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.75, -0.25]));
        assert!((trace_norm_dense(&m, 1e-12).unwrap() - 1.5).abs() < 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(trace_norm_dense(&bad, 1e-10).is_err());
    }

    #[test]
    fn ground_state_negativity() {
        let (h, r) = hand();
        let o = FockOracle::new(&h, &r, 30, OracleTolerances::default()).unwrap();
        let rho = o.ensemble_density(0).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-10);
        assert!((o.log_negativity(0).unwrap() - 0.25 * 3f64.ln()).abs() < 1e-6);
        let rho1 = o.ensemble_density(1).unwrap();
        assert!((&rho * &rho1).abs().max() < 1e-8);
        assert!((&rho1 * &rho1 - &rho1 * 0.5).abs().max() < 1e-8);
    }

    #[test]
    fn weyl_operators() {
        let (h, r) = hand();
        let o = FockOracle::new(&h, &r, 20, OracleTolerances::default()).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        let w = o.weyl_matrix(&zero).unwrap();
        assert!((w - DMatrix::identity(400, 400)).map(|z| z.norm()).max() < 1e-14);
        let f = [C64::new(0.3, -0.2), C64::new(-0.1, 0.4)];
        let ws = weyl_site(f[0], 20).unwrap();
        let u = &ws * ws.adjoint();
        assert!((u - DMatrix::identity(20, 20)).map(|z| z.norm()).max() < 1e-12);
        // ⟨ψ₀, W(f) ψ₀⟩ = exp(-⟨f̃, M f̃⟩/4), M from an independent eigensolve.
        let e = SymmetricEigen::new(h.clone());
        let hm = |s: f64| &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.powf(s))) * e.eigenvectors.transpose();
        let re = DVector::from_vec(vec![f[0].re, f[1].re]);
        let im = DVector::from_vec(vec![f[0].im, f[1].im]);
        let q = re.dot(&(hm(-0.5) * &re)) + im.dot(&(hm(0.5) * &im));
        let val = o.eigenstate_char(&[0, 0], &f).unwrap();
        assert!((val - (-q / 4.0).exp()).abs() < 1e-8);
    }

    #[test]
    fn sector_listing() {
        assert_eq!(sector(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(sector(3, 1).len(), 3);
    }

    #[test]
    fn guards() {
        let b = LatticeBox::new(1, 0, 4).unwrap();
        assert!(TruncatedFockSpace::new(&Region::empty(&b), 10).is_err());
        let s = TruncatedFockSpace::new(&Region::from_indices(&b, &[3, 1]).unwrap(), 7).unwrap();
        assert_eq!(s.order(), &[1, 3, 0, 2, 4]);
        assert_eq!(s.bipartition(), (49, 343));
        assert!(s.ensure_dense().is_err());
    }
}
