//! Effective spin Hamiltonian of a spin-orbit-coupled chain:
//!
//! `H = Σ_bonds ¼ σ_i·Ĵ·σ_{i+1} + Σ_sites ½ (ĝ_i B)·σ_i`,  `Ĵ = J R(θ, n)`.
//!
//! Energies are in MHz. Bonds (1,2) and (L−1,L) carry the weak end coupling
//! `j0`; interior bonds carry `J0`. All bonds share the same rotation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_sites, site_bit, ComplexMatrix, Pauli, PhaseConvention, C64, MAX_SITES};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn mat3_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

fn norm3(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Unit spin-orbit axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpinOrbitAxis([f64; 3]);

impl SpinOrbitAxis {
    pub const X: Self = Self([1.0, 0.0, 0.0]);
    pub const Y: Self = Self([0.0, 1.0, 0.0]);
    pub const Z: Self = Self([0.0, 0.0, 1.0]);

    /// Accepts only vectors of unit length (within 1e-9).
    pub fn new(n: [f64; 3]) -> Result<Self> {
        let norm = norm3(&n);
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::AxisNotNormalized { norm });
        }
        Ok(Self(n))
    }

    /// Normalizes an arbitrary nonzero vector, e.g. the quoted `[0.5, 0.5, 0.707]`.
    pub fn normalize(n: [f64; 3]) -> Result<Self> {
        let norm = norm3(&n);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroAxis);
        }
        Ok(Self(n.map(|x| x / norm)))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }
}

impl TryFrom<[f64; 3]> for SpinOrbitAxis {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::normalize(v)
    }
}

impl From<SpinOrbitAxis> for [f64; 3] {
    fn from(a: SpinOrbitAxis) -> Self {
        a.0
    }
}

/// Real 3×3 exchange tensor in MHz; `j[α][β]` couples `σ^α_i σ^β_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeTensor {
    pub j: Mat3,
}

impl ExchangeTensor {
    pub fn isotropic(j: f64) -> Self {
        Self { j: IDENTITY3.map(|r| r.map(|x| x * j)) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { j: self.j.map(|r| r.map(|x| x * s)) }
    }

    pub fn is_finite(&self) -> bool {
        self.j.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.j.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Dimensionless g-tensor; the effective field on a site is `h = g·B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTensor {
    pub g: Mat3,
}

impl Default for GTensor {
    fn default() -> Self {
        Self { g: IDENTITY3 }
    }
}

impl GTensor {
    pub fn effective_field(&self, b: &[f64; 3]) -> [f64; 3] {
        mat3_vec(&self.g, b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    ChannelGroundState,
    PairwiseSinglet,
}

impl InitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::ChannelGroundState => "channel-ground-state",
            InitKind::PairwiseSinglet => "pairwise-singlet",
        }
    }
}

/// Full physical description of one simulation instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Total spins: sender + channel + receiver.
    pub n_sites: usize,
    /// Intra-channel exchange `J0`, MHz.
    pub j_channel: f64,
    /// End-to-channel exchange `j0`, MHz.
    pub j_end: f64,
    /// Spin-orbit angle, radians.
    pub theta: f64,
    pub axis: SpinOrbitAxis,
    /// Magnetic field, MHz.
    pub field: [f64; 3],
    pub g_boundary: GTensor,
    pub g_channel: GTensor,
    pub init: InitKind,
    pub phase: PhaseConvention,
    /// Per-bond exchange multipliers `(1+η_i)`, bond `i` joining sites `i, i+1`.
    /// `None` means all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_scale: Option<Vec<f64>>,
}

impl ChainSpec {
    pub const DEFAULT_J0: f64 = 160.0;
    pub const DEFAULT_J_END: f64 = 20.0;

    /// `J0 = 160 MHz`, `j0 = 20 MHz`, θ = 0, axis ẑ, B = 0, identity g-tensors.
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            j_channel: Self::DEFAULT_J0,
            j_end: Self::DEFAULT_J_END,
            theta: 0.0,
            axis: SpinOrbitAxis::Z,
            field: [0.0; 3],
            g_boundary: GTensor::default(),
            g_channel: GTensor::default(),
            init: InitKind::ChannelGroundState,
            phase: PhaseConvention::TwoPi,
            bond_scale: None,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_axis(mut self, axis: SpinOrbitAxis) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_field(mut self, field: [f64; 3]) -> Self {
        self.field = field;
        self
    }

    pub fn with_couplings(mut self, j_channel: f64, j_end: f64) -> Self {
        self.j_channel = j_channel;
        self.j_end = j_end;
        self
    }

    pub fn with_init(mut self, init: InitKind) -> Self {
        self.init = init;
        self
    }

    pub fn channel_len(&self) -> usize {
        self.n_sites.saturating_sub(2)
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_sites < 3 {
            return bad(format!("need at least 3 sites, got {}", self.n_sites));
        }
        if self.n_sites > MAX_SITES {
            return Err(Error::TooLarge { dim: 1 << self.n_sites.min(63), max: 1 << MAX_SITES, max_sites: MAX_SITES });
        }
        if !(self.j_channel > 0.0 && self.j_channel.is_finite()) {
            return bad(format!("J0 must be positive, got {}", self.j_channel));
        }
        if !(self.j_end > 0.0 && self.j_end.is_finite()) {
            return bad(format!("j0 must be positive, got {}", self.j_end));
        }
        if !self.theta.is_finite() || self.field.iter().any(|x| !x.is_finite()) {
            return bad("non-finite angle or field".into());
        }
        if self.init == InitKind::PairwiseSinglet && !self.channel_len().is_multiple_of(2) {
            return bad(format!("pairwise-singlet init needs an even channel, got {}", self.channel_len()));
        }
        if let Some(s) = &self.bond_scale {
            if s.len() != self.n_bonds() {
                return bad(format!("bond_scale has {} entries for {} bonds", s.len(), self.n_bonds()));
            }
            if s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("bond multipliers must be positive".into());
            }
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        rotation_matrix(&self.axis, self.theta)
    }

    /// Multiplier of bond `bond` (1-based, joins `bond` and `bond+1`).
    pub fn bond_multiplier(&self, bond: usize) -> f64 {
        self.bond_scale.as_ref().map_or(1.0, |s| s[bond - 1])
    }

    pub fn is_end_bond(&self, bond: usize) -> bool {
        bond == 1 || bond == self.n_bonds()
    }

    /// Exchange tensor of bond `bond` including any noise multiplier.
    pub fn bond_tensor(&self, bond: usize) -> ExchangeTensor {
        let base = if self.is_end_bond(bond) { self.j_end } else { self.j_channel };
        exchange_from_rotation(base * self.bond_multiplier(bond), &self.rotation())
    }

    pub fn site_g(&self, site: usize) -> &GTensor {
        if site == 1 || site == self.n_sites {
            &self.g_boundary
        } else {
            &self.g_channel
        }
    }
}

/// `R = cosθ I + (1−cosθ) n nᵀ + sinθ [n]×`, a right-handed rotation by θ about n.
pub fn rotation_matrix(axis: &SpinOrbitAxis, theta: f64) -> Mat3 {
    let n = axis.components();
    let (s, c) = theta.sin_cos();
    // [n]× with [n]×·v = n × v
    let cross = [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]];
    let mut r = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            r[a][b] = c * delta + (1.0 - c) * n[a] * n[b] + s * cross[a][b];
        }
    }
    r
}

/// `Ĵ = J0 R(θ, n)`.
pub fn rotation_exchange(j0: f64, axis: &SpinOrbitAxis, theta: f64) -> Result<ExchangeTensor> {
    if !(j0 > 0.0 && j0.is_finite()) {
        return Err(Error::InvalidSpec(format!("exchange magnitude must be positive, got {j0}")));
    }
    Ok(exchange_from_rotation(j0, &rotation_matrix(axis, theta)))
}

fn exchange_from_rotation(j0: f64, r: &Mat3) -> ExchangeTensor {
    ExchangeTensor { j: r.map(|row| row.map(|x| j0 * x)) }
}

/// Adds `coeff · Π σ^{p}_{site}` to `h` (sites 1-based, distinct).
pub(crate) fn add_pauli_product(h: &mut ComplexMatrix, coeff: C64, ops: &[(usize, Pauli)], n_sites: usize) {
    let dim = h.rows();
    for inp in 0..dim {
        let mut out = inp;
        let mut amp = coeff;
        for &(site, p) in ops {
            let bit = site_bit(site, n_sites);
            let (nb, a) = p.act((out >> bit) & 1);
            out = (out & !(1 << bit)) | (nb << bit);
            amp *= a;
        }
        h[(out, inp)] += amp;
    }
}

fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, len: n_sites });
    }
    Ok(())
}

fn add_bond(h: &mut ComplexMatrix, jt: &ExchangeTensor, a: usize, b: usize, n_sites: usize) {
    for (al, pa) in Pauli::XYZ.into_iter().enumerate() {
        for (be, pb) in Pauli::XYZ.into_iter().enumerate() {
            let j = jt.j[al][be];
            if j != 0.0 {
                add_pauli_product(h, C64::new(0.25 * j, 0.0), &[(a, pa), (b, pb)], n_sites);
            }
        }
    }
}

fn add_zeeman(h: &mut ComplexMatrix, field: &[f64; 3], g: &GTensor, site: usize, n_sites: usize) {
    let heff = g.effective_field(field);
    for (al, p) in Pauli::XYZ.into_iter().enumerate() {
        if heff[al] != 0.0 {
            add_pauli_product(h, C64::new(0.5 * heff[al], 0.0), &[(site, p)], n_sites);
        }
    }
}

/// `¼ Σ_αβ J_αβ σ^α_a σ^β_b` on `n_sites` spins.
pub fn bond_hamiltonian(jt: &ExchangeTensor, site_a: usize, site_b: usize, n_sites: usize) -> Result<ComplexMatrix> {
    check_sites(n_sites)?;
    check_site(site_a, n_sites)?;
    check_site(site_b, n_sites)?;
    if site_a == site_b {
        return Err(Error::InvalidSpec(format!("bond endpoints coincide at site {site_a}")));
    }
    let dim = 1 << n_sites;
    let mut h = ComplexMatrix::zeros(dim, dim);
    add_bond(&mut h, jt, site_a, site_b, n_sites);
    Ok(h)
}

/// `½ Σ_α (g B)_α σ^α_site`.
pub fn zeeman_term(field: &[f64; 3], g: &GTensor, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    check_sites(n_sites)?;
    check_site(site, n_sites)?;
    let dim = 1 << n_sites;
    let mut h = ComplexMatrix::zeros(dim, dim);
    add_zeeman(&mut h, field, g, site, n_sites);
    Ok(h)
}

/// Full sender + channel + receiver Hamiltonian.
pub fn build_chain_hamiltonian(spec: &ChainSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = spec.n_sites;
    let dim = 1 << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for bond in 1..n {
        add_bond(&mut h, &spec.bond_tensor(bond), bond, bond + 1, n);
    }
    for site in 1..=n {
        add_zeeman(&mut h, &spec.field, spec.site_g(site), site, n);
    }
    Ok(h)
}

/// Hamiltonian of the channel alone (sites 2..L−1 relabelled 1..L−2):
/// interior bonds and channel Zeeman terms only.
pub fn channel_hamiltonian(spec: &ChainSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let m = spec.channel_len();
    let dim = 1 << m;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for local in 1..m {
        // chain bond index of channel bond (local, local+1) is local+1
        add_bond(&mut h, &spec.bond_tensor(local + 1), local, local + 1, m);
    }
    for site in 1..=m {
        add_zeeman(&mut h, &spec.field, &spec.g_channel, site, m);
    }
    Ok(h)
}

/// Total `Σ_i σ^z_i` on `n_sites` spins (diagonal).
pub fn total_sigma_z(n_sites: usize) -> ComplexMatrix {
    let dim = 1usize << n_sites;
    let diag: Vec<C64> = (0..dim)
        .map(|idx| {
            let downs = idx.count_ones() as f64;
            C64::new(n_sites as f64 - 2.0 * downs, 0.0)
        })
        .collect();
    ComplexMatrix::from_diag(&diag)
}

/// Electric-field geometry that fixes the spin-orbit angle and axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    pub e_field: [f64; 3],
    /// Unit vector along the dot array.
    pub k: [f64; 3],
    /// Inter-dot distance, nm.
    pub d_nm: f64,
    /// `λ_so · ‖E‖`, nm·(field unit). Linear Rashba model: `λ_so = calibration / ‖E‖`.
    pub lambda_calibration: f64,
}

impl Default for FieldGeometry {
    /// Illustrative: d = 100 nm and `‖E‖ = 1` giving λ_so = 100 nm.
    fn default() -> Self {
        Self { e_field: [0.0, 1.0, 0.0], k: [1.0, 0.0, 0.0], d_nm: 100.0, lambda_calibration: 100.0 }
    }
}

/// `θ = 2d/λ_so` and `n ∝ k × E`.
pub fn soc_from_field(geom: &FieldGeometry) -> Result<(f64, SpinOrbitAxis)> {
    let bad = |m: &str| Err(Error::InvalidGeometry(m.into()));
    if (norm3(&geom.k) - 1.0).abs() > 1e-9 {
        return bad("k must be a unit vector");
    }
    if geom.d_nm.is_nan() || geom.d_nm <= 0.0 || geom.lambda_calibration.is_nan() || geom.lambda_calibration <= 0.0 {
        return bad("distance and calibration must be positive");
    }
    let e = norm3(&geom.e_field);
    if e == 0.0 || !e.is_finite() {
        return bad("zero electric field");
    }
    let kxe = cross(&geom.k, &geom.e_field);
    if norm3(&kxe) <= 1e-12 * e {
        return bad("electric field parallel to k leaves the axis undefined");
    }
    let lambda_so = geom.lambda_calibration / e;
    Ok((2.0 * geom.d_nm / lambda_so, SpinOrbitAxis::normalize(kxe)?))
}

/// `{2πn/(L−1) : n = 0..=max_n} ∩ [0, 2π]`.
pub fn commensurate_angles(n_sites: usize, max_n: usize) -> Vec<f64> {
    if n_sites < 2 {
        return Vec::new();
    }
    let links = n_sites - 1;
    (0..=max_n.min(links)).map(|n| TAU * n as f64 / links as f64).collect()
}
