//! State preparation, evolution and transfer fidelity.
//!
//! The sender (site 1) starts in |↑⟩, the receiver (site L) in |↓⟩ and the
//! channel either in its ground state or in a product of nearest-pair
//! singlets. The fidelity is `F(t) = ⟨↑|ρ_L(t)|↑⟩`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    fix_phase, hermitian_eig, site_bit, ComplexMatrix, EigenSystem, PhaseConvention, QuantumState, C64, ONE, ZERO,
};
use crate::model::{build_chain_hamiltonian, channel_hamiltonian, total_sigma_z, ChainSpec, InitKind};

/// Relative width of the degenerate ground manifold, in units of `J0`.
pub const DEGENERACY_TOL: f64 = 1e-8;

pub const DEFAULT_WINDOW_US: f64 = 10.0;
pub const DEFAULT_GRID_POINTS: usize = 4001;
pub const REFINE_ITERATIONS: usize = 31;
pub const REFINE_TOL_US: f64 = 1e-6;

/// Squared norm of dropped eigencomponents when evaluating `F(t)`; bounds the
/// induced error in `F` by `2·sqrt(DROP_WEIGHT)`.
const DROP_WEIGHT: f64 = 1e-22;
const TIME_CHUNK: usize = 256;

#[derive(Clone, Debug)]
pub struct ChannelGround {
    pub state: QuantumState,
    /// Gap between the two lowest channel levels, MHz (0 for a single level).
    pub gap: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct InitialState {
    pub kind: InitKind,
    pub state: QuantumState,
    pub channel_gap: f64,
    pub degenerate: bool,
}

/// Sampled fidelity over a time window plus its refined maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub t_max: f64,
    pub f_max: f64,
}

impl FidelitySeries {
    pub fn grid_max(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// Peaks of the curve: one per excursion above the midline (with 10%
    /// hysteresis), located on the grid. Excursions touching the window edges
    /// are dropped.
    pub fn peak_indices(&self) -> Vec<usize> {
        let n = self.values.len();
        if n < 3 {
            return Vec::new();
        }
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mid = 0.5 * (lo + hi);
        let band = 0.1 * (hi - lo);
        let mut peaks = Vec::new();
        let mut start: Option<usize> = None;
        let mut below_seen = self.values[0] < mid - band;
        for i in 0..n {
            let v = self.values[i];
            match start {
                None if v > mid + band && below_seen => start = Some(i),
                Some(s) if v < mid - band => {
                    let best = (s..i).max_by(|&a, &b| self.values[a].total_cmp(&self.values[b])).unwrap();
                    peaks.push(best);
                    start = None;
                }
                _ => {}
            }
            if v < mid - band {
                below_seen = true;
            }
        }
        peaks
    }
}

/// Ground state of the channel Hamiltonian.
///
/// When the two lowest levels lie within `1e-8·J0`, the run is flagged and
/// the state inside the degenerate manifold with the largest overlap with the
/// θ = 0 reference ground state is taken. The reference itself, when
/// degenerate, is the member of its manifold with the lowest total `σ_z`.
pub fn channel_ground_state(spec: &ChainSpec) -> Result<ChannelGround> {
    spec.validate()?;
    let m = spec.channel_len();
    let h = channel_hamiltonian(spec)?;
    let eig = hermitian_eig(&h)?;
    let tol = DEGENERACY_TOL * spec.j_channel;
    let gap = if eig.dim() > 1 { eig.eigenvalues[1] - eig.eigenvalues[0] } else { 0.0 };
    let manifold = ground_manifold(&eig, tol);
    if manifold.len() == 1 {
        let state = QuantumState::new(eig.eigenvector(0))?;
        return Ok(ChannelGround { state, gap, degenerate: false });
    }

    let mut reference_spec = spec.clone();
    reference_spec.theta = 0.0;
    let reference = if spec.theta == 0.0 {
        None
    } else {
        let ref_eig = hermitian_eig(&channel_hamiltonian(&reference_spec)?)?;
        let ref_manifold = ground_manifold(&ref_eig, tol);
        Some(lowest_sz_member(&ref_eig, &ref_manifold, m)?)
    };

    let picked = match reference {
        Some(r) => {
            let projected = project_onto(&eig, &manifold, &r);
            if crate::linalg::norm(&projected) > 1e-6 {
                Some(projected)
            } else {
                None
            }
        }
        None => None,
    };
    let mut amps = match picked {
        Some(p) => p,
        None => lowest_sz_member(&eig, &manifold, m)?,
    };
    let n = crate::linalg::norm(&amps);
    amps.iter_mut().for_each(|z| *z /= n);
    fix_phase(&mut amps);
    Ok(ChannelGround { state: QuantumState::new(amps)?, gap, degenerate: true })
}

fn ground_manifold(eig: &EigenSystem, tol: f64) -> Vec<usize> {
    let e0 = eig.eigenvalues[0];
    (0..eig.dim()).take_while(|&k| eig.eigenvalues[k] - e0 < tol).collect()
}

fn project_onto(eig: &EigenSystem, manifold: &[usize], v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for &k in manifold {
        let col = eig.eigenvector(k);
        let c: C64 = col.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
        out.iter_mut().zip(&col).for_each(|(o, a)| *o += a * c);
    }
    out
}

fn lowest_sz_member(eig: &EigenSystem, manifold: &[usize], n_sites: usize) -> Result<Vec<C64>> {
    let sz = total_sigma_z(n_sites);
    let cols: Vec<Vec<C64>> = manifold.iter().map(|&k| eig.eigenvector(k)).collect();
    let z = ComplexMatrix::from_fn(cols.len(), cols.len(), |a, b| {
        cols[a].iter().zip(&cols[b]).enumerate().map(|(i, (x, y))| x.conj() * sz[(i, i)] * y).sum()
    });
    let small = hermitian_eig(&z)?;
    let coeffs = small.eigenvector(0);
    let mut out = vec![ZERO; eig.dim()];
    for (c, col) in coeffs.iter().zip(&cols) {
        out.iter_mut().zip(col).for_each(|(o, a)| *o += a * c);
    }
    Ok(out)
}

/// `⊗` of `(|↑↓⟩ − |↓↑⟩)/√2` over channel pairs (1,2), (3,4), ….
pub fn pairwise_singlet_state(channel_len: usize) -> Result<QuantumState> {
    if channel_len == 0 || !channel_len.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!("pairwise singlets need an even channel length ≥ 2, got {channel_len}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = QuantumState::new(vec![ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO])?;
    let mut acc = singlet.clone();
    for _ in 1..channel_len / 2 {
        acc = acc.tensor(&singlet)?;
    }
    Ok(acc)
}

/// `|↑⟩ ⊗ |channel⟩ ⊗ |↓⟩`.
pub fn compose_initial_state(spec: &ChainSpec) -> Result<InitialState> {
    spec.validate()?;
    let ground = channel_ground_state(spec)?;
    let (channel, degenerate) = match spec.init {
        InitKind::ChannelGroundState => (ground.state, ground.degenerate),
        InitKind::PairwiseSinglet => (pairwise_singlet_state(spec.channel_len())?, false),
    };
    let state = QuantumState::up().tensor(&channel)?.tensor(&QuantumState::down())?;
    Ok(InitialState { kind: spec.init, state, channel_gap: ground.gap, degenerate })
}

/// Single-site reduced density matrix by partial trace over all other sites.
pub fn reduced_density_matrix(psi: &QuantumState, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if psi.dim() != 1 << n_sites {
        return Err(Error::DimensionMismatch { expected: 1 << n_sites, got: psi.dim() });
    }
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, len: n_sites });
    }
    let bit = site_bit(site, n_sites);
    let mask = 1usize << bit;
    let a = psi.amplitudes();
    let mut rho = ComplexMatrix::zeros(2, 2);
    for i in (0..a.len()).filter(|i| i & mask == 0) {
        let (up, dn) = (a[i], a[i | mask]);
        rho[(0, 0)] += up * up.conj();
        rho[(0, 1)] += up * dn.conj();
        rho[(1, 1)] += dn * dn.conj();
    }
    rho[(1, 0)] = rho[(0, 1)].conj();
    Ok(rho)
}

/// `⟨ψ|ρ|ψ⟩` for a single-qubit density matrix.
pub fn fidelity(rho: &ComplexMatrix, target: &QuantumState) -> Result<f64> {
    if rho.rows() != 2 || rho.cols() != 2 || target.dim() != 2 {
        return Err(Error::InvalidDensityMatrix("expected a 2×2 matrix and a qubit target".into()));
    }
    const TOL: f64 = 1e-9;
    if !rho.is_hermitian(TOL) {
        return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
    if rho[(0, 0)].re < -TOL || rho[(1, 1)].re < -TOL || det < -TOL {
        return Err(Error::InvalidDensityMatrix("not positive semidefinite".into()));
    }
    let v = target.amplitudes();
    let rv = rho.mul_vec(v);
    Ok(v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C64>().re)
}

/// `⟨σ_z⟩` on every site.
pub fn site_polarization_profile(psi: &QuantumState, n_sites: usize) -> Result<Vec<f64>> {
    if psi.dim() != 1 << n_sites {
        return Err(Error::DimensionMismatch { expected: 1 << n_sites, got: psi.dim() });
    }
    let mut out = vec![0.0; n_sites];
    for (idx, a) in psi.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (s, o) in out.iter_mut().enumerate() {
            let bit = site_bit(s + 1, n_sites);
            *o += if idx >> bit & 1 == 0 { p } else { -p };
        }
    }
    Ok(out)
}

/// Evolution of one initial state under one Hamiltonian, with fast repeated
/// evaluation of the receiver's |↑⟩ population.
pub struct TransferEvaluator {
    n_sites: usize,
    omega: f64,
    eig: EigenSystem,
    coeffs: Vec<C64>,
    kept: Vec<usize>,
    /// `V[receiver-up rows, kept] · diag(c_kept)`.
    weighted: Mat<C64>,
    pub initial: InitialState,
}

impl TransferEvaluator {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        let h = build_chain_hamiltonian(spec)?;
        let initial = compose_initial_state(spec)?;
        let eig = hermitian_eig(&h)?;
        Ok(Self::from_parts(spec.n_sites, spec.phase, eig, initial))
    }

    pub fn from_parts(n_sites: usize, phase: PhaseConvention, eig: EigenSystem, initial: InitialState) -> Self {
        let coeffs = eig.project(initial.state.amplitudes());
        let mut order: Vec<usize> = (0..coeffs.len()).collect();
        order.sort_by(|&a, &b| coeffs[a].norm_sqr().total_cmp(&coeffs[b].norm_sqr()).then(a.cmp(&b)));
        let mut dropped = 0.0;
        let mut skip = 0;
        for &k in &order {
            dropped += coeffs[k].norm_sqr();
            if dropped > DROP_WEIGHT {
                break;
            }
            skip += 1;
        }
        let mut kept: Vec<usize> = order[skip..].to_vec();
        kept.sort_unstable();
        let dim = eig.dim();
        let rows: Vec<usize> = (0..dim).filter(|i| i & 1 == 0).collect();
        let v = &eig.eigenvectors;
        let weighted = Mat::from_fn(rows.len(), kept.len(), |r, c| v[(rows[r], kept[c])] * coeffs[kept[c]]);
        Self { n_sites, omega: phase.factor(), eig, coeffs, kept, weighted, initial }
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Full state at time `t` (µs).
    pub fn state_at(&self, t: f64) -> QuantumState {
        let c: Vec<C64> = self
            .coeffs
            .iter()
            .zip(&self.eig.eigenvalues)
            .map(|(c, &l)| c * C64::from_polar(1.0, -self.omega * l * t))
            .collect();
        QuantumState::normalized(self.eig.synthesize(&c)).expect("unitary evolution preserves the norm")
    }

    /// `F(t)` at a single time.
    pub fn fidelity_at(&self, t: f64) -> f64 {
        let phases: Vec<C64> =
            self.kept.iter().map(|&k| C64::from_polar(1.0, -self.omega * self.eig.eigenvalues[k] * t)).collect();
        let w = &self.weighted;
        let mut total = 0.0;
        for r in 0..w.nrows() {
            let amp: C64 = (0..w.ncols()).map(|c| w[(r, c)] * phases[c]).sum();
            total += amp.norm_sqr();
        }
        total
    }

    /// `F(t)` on many times, batched as one matrix product per chunk.
    pub fn fidelity_many(&self, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let w = &self.weighted;
        for chunk in times.chunks(TIME_CHUNK) {
            let phases = Mat::from_fn(self.kept.len(), chunk.len(), |k, j| {
                C64::from_polar(1.0, -self.omega * self.eig.eigenvalues[self.kept[k]] * chunk[j])
            });
            let mut amps = Mat::<C64>::zeros(w.nrows(), chunk.len());
            matmul(amps.as_mut(), Accum::Replace, w.as_ref(), phases.as_ref(), ONE, Par::Seq);
            for j in 0..chunk.len() {
                out.push(amps.col(j).iter().map(|z| z.norm_sqr()).sum());
            }
        }
        out
    }

    /// Grid scan over `[0, window]` followed by golden-section refinement in
    /// the bracket around the best grid point.
    pub fn series(&self, window: f64, grid_points: usize) -> Result<FidelitySeries> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidSpec(format!("time window must be positive, got {window}")));
        }
        if grid_points < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 grid points, got {grid_points}")));
        }
        let times = uniform_grid(window, grid_points);
        let values = self.fidelity_many(&times);
        let mut series = FidelitySeries { times, values, t_max: 0.0, f_max: 0.0 };
        let (t_max, f_max) = self.refine_peak(&series, series.grid_max().0);
        series.t_max = t_max;
        series.f_max = f_max;
        Ok(series)
    }

    /// Refines the local maximum around grid index `i`; never returns less than the grid value.
    pub fn refine_peak(&self, series: &FidelitySeries, i: usize) -> (f64, f64) {
        let n = series.times.len();
        let lo = series.times[i.saturating_sub(1)];
        let hi = series.times[(i + 1).min(n - 1)];
        let (t, f) = golden_section_max(|t| self.fidelity_at(t), lo, hi, REFINE_ITERATIONS, REFINE_TOL_US);
        let grid = (series.times[i], series.values[i]);
        if f >= grid.1 {
            (t, f)
        } else {
            grid
        }
    }

    /// Oscillation frequency (MHz) from the mean spacing of refined peaks.
    pub fn peak_spacing_frequency(&self, series: &FidelitySeries) -> Option<f64> {
        let peaks = series.peak_indices();
        if peaks.len() < 2 {
            return None;
        }
        let first = self.refine_peak(series, peaks[0]).0;
        let last = self.refine_peak(series, *peaks.last().unwrap()).0;
        Some((peaks.len() - 1) as f64 / (last - first))
    }
}

pub fn uniform_grid(window: f64, points: usize) -> Vec<f64> {
    let step = window / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { window } else { i as f64 * step }).collect()
}

/// Maximizes a unimodal `f` on `[a, b]`; returns the best point evaluated.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, max_iter: usize, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut best = {
        let (fa, fb) = (f(a), f(b));
        if fb > fa {
            (b, fb)
        } else {
            (a, fa)
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

/// Fidelity series for `spec` over `[0, window]` µs.
pub fn fidelity_series(spec: &ChainSpec, window: f64, grid_points: usize) -> Result<FidelitySeries> {
    TransferEvaluator::new(spec)?.series(window, grid_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::afm_block_phase;
    use crate::model::{rotation_exchange, SpinOrbitAxis};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tilted() -> SpinOrbitAxis {
        SpinOrbitAxis::normalize([0.5, 0.5, 0.707]).unwrap()
    }

    fn singlet() -> QuantumState {
        pairwise_singlet_state(2).unwrap()
    }

    #[test]
    fn dimer_ground_state_is_singlet() {
        let g = channel_ground_state(&ChainSpec::new(4)).unwrap();
        assert!(!g.degenerate);
        assert!((g.state.overlap(&singlet()) - 1.0).abs() < 1e-12);
        assert!((g.gap - 160.0).abs() < 1e-9);
    }

    #[test]
    fn z_axis_dimer_ground_state_matches_afm_phase() {
        let theta = 0.7;
        let spec = ChainSpec::new(4).with_theta(theta);
        let g = channel_ground_state(&spec).unwrap();
        let jt = rotation_exchange(160.0, &SpinOrbitAxis::Z, theta).unwrap();
        let phase = afm_block_phase(&jt).unwrap();
        // lower AFM eigenvector is the antisymmetric combination
        let s = FRAC_1_SQRT_2;
        let chi_minus = QuantumState::new(vec![ZERO, c(s, 0.0), -phase * s, ZERO]).unwrap();
        assert!((g.state.overlap(&chi_minus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_field_polarizes_channel() {
        let spec = ChainSpec::new(4).with_theta(0.4 * PI).with_axis(tilted()).with_field([0.0, 0.0, 2000.0]);
        let g = channel_ground_state(&spec).unwrap();
        assert!(g.state.amplitudes()[3].norm_sqr() > 0.99);
    }

    #[test]
    fn singlet_products() {
        let s = singlet();
        let a = s.amplitudes();
        assert!((a[1].re - FRAC_1_SQRT_2).abs() < 1e-15 && (a[2].re + FRAC_1_SQRT_2).abs() < 1e-15);
        let s4 = pairwise_singlet_state(4).unwrap();
        let prof = site_polarization_profile(&s4, 4).unwrap();
        assert!(prof.iter().sum::<f64>().abs() < 1e-14);
        assert!(pairwise_singlet_state(3).is_err());
        assert!(pairwise_singlet_state(0).is_err());
        let g = channel_ground_state(&ChainSpec::new(4)).unwrap();
        assert!((g.state.inner(&s).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_spin_channel() {
        let g = channel_ground_state(&ChainSpec::new(3)).unwrap();
        assert!(g.degenerate);
        let g = channel_ground_state(&ChainSpec::new(3).with_field([0.0, 0.0, 50.0])).unwrap();
        assert!(!g.degenerate);
        assert!((g.state.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_channel_is_kramers_degenerate_and_continuous() {
        let base = ChainSpec::new(5).with_axis(tilted());
        let g0 = channel_ground_state(&base).unwrap();
        assert!(g0.degenerate);
        // reference member carries total σ_z = −1
        let sz: f64 = site_polarization_profile(&g0.state, 3).unwrap().iter().sum();
        assert!((sz + 1.0).abs() < 1e-9);
        let g1 = channel_ground_state(&base.clone().with_theta(1e-4)).unwrap();
        assert!(g1.state.overlap(&g0.state) > 0.999);
    }

    #[test]
    fn initial_state_layout() {
        let init = compose_initial_state(&ChainSpec::new(4)).unwrap();
        assert_eq!(init.state.dim(), 16);
        assert!((init.state.norm() - 1.0).abs() < 1e-12);
        assert!(site_polarization_profile(&init.state, 6).is_err(), "site count must match the state");
        let init6 = compose_initial_state(&ChainSpec::new(6)).unwrap();
        let prof = site_polarization_profile(&init6.state, 6).unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0, 0.0, -1.0];
        assert!(prof.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn reduced_density_examples() {
        let psi = QuantumState::up().tensor(&QuantumState::down()).unwrap();
        let rho = reduced_density_matrix(&psi, 1, 2).unwrap();
        assert_eq!(rho, ComplexMatrix::from_diag(&[ONE, ZERO]));
        let bell = QuantumState::new(vec![c(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        for site in 1..=2 {
            let rho = reduced_density_matrix(&bell, site, 2).unwrap();
            assert!(rho.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        }
        assert!(reduced_density_matrix(&bell, 3, 2).is_err());
    }

    #[test]
    fn reduced_density_matches_direct_summation() {
        // direct oracle: ρ_ab = Σ_{rest} ψ(…a…) ψ*(…b…) with explicit index arithmetic
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let amps: Vec<C64> = (0..8).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let psi = QuantumState::normalized(amps).unwrap();
        for site in 1..=3 {
            let rho = reduced_density_matrix(&psi, site, 3).unwrap();
            let mut oracle = ComplexMatrix::zeros(2, 2);
            for a in 0..2 {
                for b in 0..2 {
                    let mut acc = ZERO;
                    for s1 in 0..2 {
                        for s2 in 0..2 {
                            let put = |x: usize| match site {
                                1 => x << 2 | s1 << 1 | s2,
                                2 => s1 << 2 | x << 1 | s2,
                                _ => s1 << 2 | s2 << 1 | x,
                            };
                            acc += psi.amplitudes()[put(a)] * psi.amplitudes()[put(b)].conj();
                        }
                    }
                    oracle[(a, b)] = acc;
                }
            }
            assert!(rho.max_abs_diff(&oracle) < 1e-14);
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            let e = hermitian_eig(&rho).unwrap();
            assert!(e.eigenvalues[0] >= -1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        let up_proj = ComplexMatrix::from_diag(&[ONE, ZERO]);
        assert_eq!(fidelity(&up_proj, &QuantumState::up()).unwrap(), 1.0);
        let mixed = ComplexMatrix::identity(2).scale_real(0.5);
        let plus = QuantumState::new(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        assert!((fidelity(&mixed, &plus).unwrap() - 0.5).abs() < 1e-15);
        let down_proj = ComplexMatrix::from_diag(&[ZERO, ONE]);
        assert_eq!(fidelity(&down_proj, &QuantumState::up()).unwrap(), 0.0);
        assert!(fidelity(&ComplexMatrix::identity(2), &QuantumState::up()).is_err());
        let neg = ComplexMatrix::from_diag(&[c(1.5, 0.0), c(-0.5, 0.0)]);
        assert!(fidelity(&neg, &QuantumState::up()).is_err());
    }

    #[test]
    fn polarization_examples() {
        let psi = QuantumState::up().tensor(&QuantumState::down()).unwrap();
        assert_eq!(site_polarization_profile(&psi, 2).unwrap(), vec![1.0, -1.0]);
        let bell = QuantumState::new(vec![c(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        assert!(site_polarization_profile(&bell, 2).unwrap().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn batched_fidelity_matches_partial_trace_route() {
        let spec = ChainSpec::new(5).with_theta(0.3 * PI).with_axis(tilted()).with_field([5.0, 0.0, 50.0]);
        let ev = TransferEvaluator::new(&spec).unwrap();
        let times = [0.0, 0.013, 0.5, 1.77, 9.99];
        let fast = ev.fidelity_many(&times);
        for (t, f) in times.iter().zip(fast) {
            let psi = ev.state_at(*t);
            let rho = reduced_density_matrix(&psi, 5, 5).unwrap();
            let slow = fidelity(&rho, &QuantumState::up()).unwrap();
            assert!((slow - f).abs() < 1e-10, "t={t}: {slow} vs {f}");
            assert!((ev.fidelity_at(*t) - f).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_l4_reaches_unity() {
        let s = fidelity_series(&ChainSpec::new(4), DEFAULT_WINDOW_US, DEFAULT_GRID_POINTS).unwrap();
        assert!(s.values[0].abs() < 1e-15);
        assert!(s.f_max >= 0.99);
        let aniso = fidelity_series(&ChainSpec::new(4).with_theta(0.3 * PI).with_axis(tilted()), 10.0, 4001).unwrap();
        assert!(aniso.f_max < s.f_max - 0.2);
    }

    #[test]
    fn refinement_is_sound() {
        let spec = ChainSpec::new(4).with_theta(0.21 * PI).with_axis(tilted());
        let ev = TransferEvaluator::new(&spec).unwrap();
        let s = ev.series(10.0, 801).unwrap();
        assert!(s.f_max >= s.grid_max().1);
        assert!((ev.fidelity_at(s.t_max) - s.f_max).abs() < 1e-9);
        assert!(ev.series(0.0, 10).is_err());
        assert!(ev.series(1.0, 1).is_err());
    }

    #[test]
    fn golden_section_on_parabola() {
        let (t, f) = golden_section_max(|x| 1.0 - (x - 0.3).powi(2), 0.0, 1.0, 80, 1e-12);
        assert!((t - 0.3).abs() < 1e-6 && (f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_magnetization_conserved() {
        let spec = ChainSpec::new(6).with_axis(tilted());
        let ev = TransferEvaluator::new(&spec).unwrap();
        for t in [0.0, 0.7, 3.1, 9.4] {
            let total: f64 = site_polarization_profile(&ev.state_at(t), 6).unwrap().iter().sum();
            assert!(total.abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fidelity_stays_in_unit_interval(theta in 0.0f64..6.3, nx in -1.0f64..1.0, nz in -1.0f64..1.0,
                                           n in 3usize..7, bz in 0.0f64..200.0) {
            prop_assume!(nx * nx + nz * nz > 1e-3);
            let axis = SpinOrbitAxis::normalize([nx, 0.3, nz]).unwrap();
            let spec = ChainSpec::new(n).with_theta(theta).with_axis(axis).with_field([0.0, 0.0, bz]);
            let s = fidelity_series(&spec, 10.0, 201).unwrap();
            prop_assert!(s.values.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
            prop_assert!(s.f_max >= s.grid_max().1);
        }

        #[test]
        fn z_axis_field_conserves_magnetization(theta in 0.0f64..6.3, bz in 0.0f64..1000.0) {
            let spec = ChainSpec::new(4).with_theta(theta).with_field([0.0, 0.0, bz]);
            let ev = TransferEvaluator::new(&spec).unwrap();
            let m0: f64 = site_polarization_profile(&ev.state_at(0.0), 4).unwrap().iter().sum();
            for t in [0.3, 2.2, 7.9] {
                let m: f64 = site_polarization_profile(&ev.state_at(t), 4).unwrap().iter().sum();
                prop_assert!((m - m0).abs() < 1e-9);
            }
        }
    }
}
