//! Dense complex linear algebra on the 2^L spin Hilbert space.
//!
//! Basis ordering: site 1 is the most significant bit of the computational
//! basis index and |↑⟩ is bit 0, so `|↑↓⟩` is index 1 and `|↓↑⟩` is index 2
//! for two sites.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest supported chain.
pub const MAX_SITES: usize = 14;
pub const MAX_DIM: usize = 1 << MAX_SITES;

/// Absolute Hermiticity tolerance, scaled by `max(1, ‖H‖_max)`.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        Self::from_fn(N, N, |i, j| rows[i][j])
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Adds `s * other` in place.
    pub fn add_scaled(&mut self, other: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `max |H_ij − conj(H_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `(H + H†)/2`.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub(crate) fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, ONE);
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, -ONE);
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// Action on a single basis bit (0 = ↑): returns the flipped-or-not bit
    /// and the matrix element `⟨out|σ|in⟩`.
    #[inline]
    pub(crate) fn act(self, bit: usize) -> (usize, C64) {
        match self {
            Pauli::I => (bit, ONE),
            Pauli::X => (bit ^ 1, ONE),
            // σ_y|↑⟩ = i|↓⟩, σ_y|↓⟩ = −i|↑⟩
            Pauli::Y => (bit ^ 1, if bit == 0 { I } else { -I }),
            Pauli::Z => (bit, if bit == 0 { ONE } else { -ONE }),
        }
    }
}

pub fn pauli(axis: Pauli) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |out, inp| {
        let (b, amp) = axis.act(inp);
        if b == out {
            amp
        } else {
            ZERO
        }
    })
}

/// Kronecker product. Errors when the result would exceed [`MAX_DIM`].
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.saturating_mul(b.rows);
    let cols = a.cols.saturating_mul(b.cols);
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::TooLarge { dim: rows.max(cols), max: MAX_DIM, max_sites: MAX_SITES });
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at 1-based `site` (site 1 leftmost).
pub fn embed_site_operator(op: &ComplexMatrix, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, len: n_sites });
    }
    if op.rows() != 2 || op.cols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: op.rows() });
    }
    check_sites(n_sites)?;
    let id = ComplexMatrix::identity(2);
    let mut acc = ComplexMatrix::identity(1);
    for s in 1..=n_sites {
        acc = kron(&acc, if s == site { op } else { &id })?;
    }
    Ok(acc)
}

pub(crate) fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites > MAX_SITES {
        return Err(Error::TooLarge { dim: 1usize << n_sites.min(63), max: MAX_DIM, max_sites: MAX_SITES });
    }
    Ok(())
}

/// Bit position of a 1-based site in the basis index.
#[inline]
pub fn site_bit(site: usize, n_sites: usize) -> usize {
    n_sites - site
}

/// Normalized state vector over `2^L` amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amps: Vec<C64>,
}

impl QuantumState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: amps.len().next_power_of_two(), got: amps.len() });
        }
        let norm = norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; errors on the zero vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n = norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        amps.iter_mut().for_each(|z| *z /= n);
        Self::new(amps)
    }

    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        check_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn up() -> Self {
        Self { amps: vec![ONE, ZERO] }
    }

    pub fn down() -> Self {
        Self { amps: vec![ZERO, ONE] }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_sites(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_sites(self.n_sites() + other.n_sites())?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { amps })
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        if op.cols() != self.dim() || op.rows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.rows() });
        }
        let hv = op.mul_vec(&self.amps);
        Ok(self.amps.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum())
    }

    /// Makes the largest-magnitude amplitude real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        fix_phase(&mut self.amps);
        self
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotates `v` so its largest-magnitude entry (first one on ties) is real positive.
pub(crate) fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap();
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= phase);
}

/// Spectral decomposition `H = V diag(λ) V†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)].conj()).sum()
        })
    }

    /// Coefficients `V†ψ`.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let v = &self.eigenvectors;
        let n = self.dim();
        let mut c = vec![ZERO; n];
        for (i, p) in psi.iter().enumerate() {
            if *p == ZERO {
                continue;
            }
            for (k, ck) in c.iter_mut().enumerate() {
                *ck += v[(i, k)].conj() * p;
            }
        }
        c
    }

    /// `V c`.
    pub fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        self.eigenvectors.mul_vec(c)
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is checked against
/// [`HERMITIAN_TOL`] and symmetrized before factorization; every eigenvector
/// gets the canonical phase of [`QuantumState::with_canonical_phase`].
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.rows(), got: h.cols() });
    }
    if !h.is_finite() {
        return Err(Error::NotHermitian { deviation: f64::NAN });
    }
    let deviation = h.hermiticity_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.rows();
    let sym = h.symmetrized().to_faer();
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
    let s = evd.S().column_vector();
    let eigenvalues: Vec<f64> = (0..n).map(|k| s[k].re).collect();
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence);
    }
    let u = evd.U();
    let mut vecs = ComplexMatrix::from_faer(u);
    for k in 0..n {
        let mut col = vecs.column(k);
        fix_phase(&mut col);
        for (i, z) in col.into_iter().enumerate() {
            vecs[(i, k)] = z;
        }
    }
    Ok(EigenSystem { eigenvalues, eigenvectors: vecs })
}

/// How an energy `E` in MHz turns into a propagator phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseConvention {
    /// Linear frequency: phase `2π·E·t` with `t` in µs.
    #[default]
    TwoPi,
    /// Angular: phase `E·t`.
    Angular,
}

impl PhaseConvention {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            PhaseConvention::TwoPi => std::f64::consts::TAU,
            PhaseConvention::Angular => 1.0,
        }
    }
}

/// `V e^{−i·phase(Λ,t)} V† ψ₀`.
pub fn evolve(eig: &EigenSystem, psi0: &QuantumState, t: f64, convention: PhaseConvention) -> Result<QuantumState> {
    if psi0.dim() != eig.dim() {
        return Err(Error::DimensionMismatch { expected: eig.dim(), got: psi0.dim() });
    }
    let w = convention.factor() * t;
    let c: Vec<C64> = eig
        .project(psi0.amplitudes())
        .into_iter()
        .zip(&eig.eigenvalues)
        .map(|(c, &l)| c * C64::from_polar(1.0, -w * l))
        .collect();
    Ok(QuantumState { amps: eig.synthesize(&c) })
}
