//! Hypercubic boxes, subregions and the disordered spring matrix.
//!
//! Sites are ordered lexicographically with the first coordinate most
//! significant; this ordering is part of the stable API because every
//! downstream matrix is indexed by it.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBox {
    dim: usize,
    lo: i64,
    hi: i64,
    sites: Vec<Vec<i64>>,
}

impl LatticeBox {
    pub fn new(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGeometry("dimension must be at least 1".into()));
        }
        if lo >= hi {
            return Err(Error::InvalidGeometry(format!("empty box: lo={lo} must be < hi={hi}")));
        }
        let side = (hi - lo + 1) as usize;
        let count = side
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidGeometry("box too large".into()))?;
        let mut sites = Vec::with_capacity(count);
        let mut coord = vec![lo; dim];
        for _ in 0..count {
            sites.push(coord.clone());
            for axis in (0..dim).rev() {
                if coord[axis] < hi {
                    coord[axis] += 1;
                    break;
                }
                coord[axis] = lo;
            }
        }
        Ok(Self { dim, lo, hi, sites })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    /// Number of sites per axis.
    pub fn side(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, index: usize) -> &[i64] {
        &self.sites[index]
    }

    pub fn sites(&self) -> &[Vec<i64>] {
        &self.sites
    }

    pub fn index_of(&self, coord: &[i64]) -> Option<usize> {
        if coord.len() != self.dim {
            return None;
        }
        let side = self.side();
        let mut index = 0usize;
        for &c in coord {
            if c < self.lo || c > self.hi {
                return None;
            }
            index = index * side + (c - self.lo) as usize;
        }
        Some(index)
    }

    /// ℓ¹ distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> u64 {
        self.sites[a]
            .iter()
            .zip(&self.sites[b])
            .map(|(x, y)| x.abs_diff(*y))
            .sum()
    }

    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim);
        let mut coord = self.sites[index].clone();
        for axis in 0..self.dim {
            for step in [-1i64, 1] {
                coord[axis] += step;
                if let Some(j) = self.index_of(&coord) {
                    out.push(j);
                }
                coord[axis] -= step;
            }
        }
        out
    }

    /// Undirected nearest-neighbour edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for j in self.neighbors(i) {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        edges
    }
}

/// Subregion Λ₀ of a box, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn from_indices(lattice: &LatticeBox, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; lattice.len()];
        for &i in indices {
            if i >= lattice.len() {
                return Err(Error::InvalidRegion(format!(
                    "site {i} outside box of {} sites",
                    lattice.len()
                )));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn empty(lattice: &LatticeBox) -> Self {
        Self { mask: vec![false; lattice.len()] }
    }

    pub fn full(lattice: &LatticeBox) -> Self {
        Self { mask: vec![true; lattice.len()] }
    }

    /// Sites whose first coordinate lies in the lower half of the axis.
    pub fn left_half(lattice: &LatticeBox) -> Self {
        let cut = lattice.lo() + (lattice.side() / 2) as i64;
        let mask = lattice.sites().iter().map(|s| s[0] < cut).collect();
        Self { mask }
    }

    /// Sub-box `[lo, hi]^d`.
    pub fn sub_box(lattice: &LatticeBox, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi || lo < lattice.lo() || hi > lattice.hi() {
            return Err(Error::InvalidRegion(format!(
                "sub-box [{lo}, {hi}] not contained in [{}, {}]",
                lattice.lo(),
                lattice.hi()
            )));
        }
        let mask = lattice
            .sites()
            .iter()
            .map(|s| s.iter().all(|&c| c >= lo && c <= hi))
            .collect();
        Ok(Self { mask })
    }

    /// Parses `left-half`, `box:(lo..hi)^d` or an explicit comma separated
    /// index list such as `0,1,4` (an empty string is the empty region).
    pub fn parse(lattice: &LatticeBox, spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "left-half" {
            return Ok(Self::left_half(lattice));
        }
        if let Some(rest) = spec.strip_prefix("box:") {
            let bad = || Error::InvalidRegion(format!("malformed box region `{spec}`"));
            let (range, exponent) = rest.split_once(")^").ok_or_else(bad)?;
            let range = range.strip_prefix('(').ok_or_else(bad)?;
            let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
            let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
            let d: usize = exponent.trim().parse().map_err(|_| bad())?;
            if d != lattice.dim() {
                return Err(Error::InvalidRegion(format!(
                    "region dimension {d} does not match box dimension {}",
                    lattice.dim()
                )));
            }
            return Self::sub_box(lattice, lo, hi);
        }
        let indices = spec
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::InvalidRegion(format!("bad site index `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(lattice, &indices)
    }

    pub fn contains(&self, site: usize) -> bool {
        self.mask.get(site).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn complement_members(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn complement(&self) -> Self {
        Self { mask: self.mask.iter().map(|m| !m).collect() }
    }

    pub fn universe_size(&self) -> usize {
        self.mask.len()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<String> = self.members().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

/// ∂Λ₀: members with at least one nearest neighbour outside the region.
pub fn boundary(lattice: &LatticeBox, region: &Region) -> Result<Vec<usize>> {
    if region.universe_size() != lattice.len() {
        return Err(Error::InvalidRegion(format!(
            "region over {} sites used with a box of {} sites",
            region.universe_size(),
            lattice.len()
        )));
    }
    Ok(region
        .members()
        .into_iter()
        .filter(|&x| lattice.neighbors(x).into_iter().any(|y| !region.contains(y)))
        .collect())
}

/// Graph Laplacian of the nearest-neighbour graph with free boundary.
pub fn build_laplacian<T: Real>(lattice: &LatticeBox) -> DMatrix<T> {
    let n = lattice.len();
    let mut h0 = DMatrix::<T>::zeros(n, n);
    for (i, j) in lattice.edges() {
        h0[(i, i)] += T::one();
        h0[(j, j)] += T::one();
        h0[(i, j)] -= T::one();
        h0[(j, i)] -= T::one();
    }
    h0
}

/// h = λ·h₀ + diag(k).
pub fn anderson_matrix<T: Real>(lattice: &LatticeBox, lambda: f64, springs: &[f64]) -> Result<DMatrix<T>> {
    if springs.len() != lattice.len() {
        return Err(Error::InvalidInput(format!(
            "{} spring constants for {} sites",
            springs.len(),
            lattice.len()
        )));
    }
    let mut h = build_laplacian::<T>(lattice) * lit::<T>(lambda);
    for (i, &k) in springs.iter().enumerate() {
        h[(i, i)] += lit::<T>(k);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderSpec {
    pub lambda: f64,
    pub k_max: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(lambda: f64, k_max: f64, seed: u64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("coupling must be non-negative, got {lambda}")));
        }
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::InvalidInput(format!("k_max must be positive, got {k_max}")));
        }
        Ok(Self { lambda, k_max, seed })
    }

    /// Generator for realization `r`: ChaCha20 keyed by the seed, with the
    /// realization id as stream number, so draws do not depend on which
    /// worker computes which realization.
    pub fn rng(&self, realization: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(realization);
        rng
    }
}

/// i.i.d. uniform spring constants on `[0, k_max]` for one realization.
pub fn sample_springs(spec: &DisorderSpec, lattice: &LatticeBox, realization: u64) -> Vec<f64> {
    let mut rng = spec.rng(realization);
    (0..lattice.len()).map(|_| rng.gen_range(0.0..=spec.k_max)).collect()
}

/// Either sampled disorder or a fixed spring vector supplied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub enum SpringSource {
    Random(DisorderSpec),
    Fixed(Vec<f64>),
}

impl SpringSource {
    pub fn springs(&self, lattice: &LatticeBox, realization: u64) -> Vec<f64> {
        match self {
            SpringSource::Random(spec) => sample_springs(spec, lattice, realization),
            SpringSource::Fixed(k) => k.clone(),
        }
    }
}
