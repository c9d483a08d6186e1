//! Closed-form and perturbative results used as oracles for the numerics.
//!
//! All formulas here are written in "formula-level" couplings
//! `J̃_αβ = J_αβ / 4`, the coefficients of `σ^α σ^β` in the Hamiltonian, so the
//! closed forms and the exact diagonalization share one normalization.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::channel_ground_state;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, EigenSystem, PhaseConvention, QuantumState, C64, ZERO};
use crate::model::{bond_hamiltonian, build_chain_hamiltonian, ChainSpec, ExchangeTensor, Mat3};

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;

/// `Ĵ / 4`.
pub fn formula_couplings(jt: &ExchangeTensor) -> Mat3 {
    jt.j.map(|row| row.map(|x| 0.25 * x))
}

/// Two-spin dynamics on `{|↑↓⟩, |↓↑⟩}` for a tensor without single-flip terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSpinSolution {
    /// `Ω = sqrt((J̃xy − J̃yx)² + (J̃xx + J̃yy)²)`, MHz.
    pub omega: f64,
    /// Unit-modulus coefficient of `sin(Ωt)|↓↑⟩`; zero when `Ω = 0`.
    pub transfer_amplitude: C64,
    /// `J̃zz`, MHz.
    pub global_phase_rate: f64,
}

impl TwoSpinSolution {
    pub fn new(jt: &ExchangeTensor) -> Result<Self> {
        let tol = 1e-12 * jt.max_abs().max(1.0);
        let leak = [jt.j[X][Z], jt.j[Y][Z], jt.j[Z][X], jt.j[Z][Y]].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if leak > tol {
            return Err(Error::LeakageTerms { max: leak });
        }
        let j = formula_couplings(jt);
        let sum = j[X][X] + j[Y][Y];
        let dm = j[X][Y] - j[Y][X];
        let omega = sum.hypot(dm);
        let transfer_amplitude = if omega > 0.0 { C64::new(-dm, -sum) / omega } else { ZERO };
        Ok(Self { omega, transfer_amplitude, global_phase_rate: j[Z][Z] })
    }

    /// `e^{iJ̃zz t}[cos(Ωt)|↑↓⟩ + a·sin(Ωt)|↓↑⟩]` with every rate multiplied
    /// by the convention factor.
    pub fn state_at(&self, t: f64, convention: PhaseConvention) -> QuantumState {
        let w = convention.factor() * t;
        let g = C64::from_polar(1.0, self.global_phase_rate * w);
        let (s, c) = (self.omega * w).sin_cos();
        let amps = vec![ZERO, g * c, g * self.transfer_amplitude * s, ZERO];
        QuantumState::normalized(amps).expect("closed form is normalized")
    }
}

/// Closed-form two-spin state starting from `|↑↓⟩`.
pub fn two_spin_closed_form(jt: &ExchangeTensor, t: f64, convention: PhaseConvention) -> Result<QuantumState> {
    Ok(TwoSpinSolution::new(jt)?.state_at(t, convention))
}

/// Explicit two-spin channel Hamiltonian in `{|↑↑⟩,|↑↓⟩,|↓↑⟩,|↓↓⟩}` with a
/// uniform effective field `h` on both spins (`h·(S₂+S₃)`).
pub fn channel_matrix_4x4(jt: &ExchangeTensor, h: &[f64; 3]) -> ComplexMatrix {
    let r = formula_couplings(jt);
    let c = |re: f64, im: f64| C64::new(re, im);
    let hm = c(h[X], -h[Y]) * 0.5;
    let a12 = c(r[Z][X], -r[Z][Y]) + hm;
    let a13 = c(r[X][Z], -r[Y][Z]) + hm;
    let a14 = c(r[X][X] - r[Y][Y], -(r[X][Y] + r[Y][X]));
    let a23 = c(r[X][X] + r[Y][Y], r[X][Y] - r[Y][X]);
    let a24 = c(-r[X][Z], r[Y][Z]) + hm;
    let a34 = c(-r[Z][X], r[Z][Y]) + hm;
    ComplexMatrix::from_rows([
        [c(r[Z][Z] + h[Z], 0.0), a12, a13, a14],
        [a12.conj(), c(-r[Z][Z], 0.0), a23, a24],
        [a13.conj(), a23.conj(), c(-r[Z][Z], 0.0), a34],
        [a14.conj(), a24.conj(), a34.conj(), c(r[Z][Z] - h[Z], 0.0)],
    ])
}

fn afm_coupling(jt: &ExchangeTensor) -> C64 {
    let r = formula_couplings(jt);
    C64::new(r[X][X] + r[Y][Y], r[X][Y] - r[Y][X])
}

/// Phase `e^{iφ}` such that `(|↑↓⟩ ± e^{iφ}|↓↑⟩)/√2` diagonalize the AFM block
/// `⟨↑↓|H|↓↑⟩ = J̃xx + J̃yy + i(J̃xy − J̃yx)`; equals the conjugate of that
/// element's phase. The `−` combination is the lower level.
pub fn afm_block_phase(jt: &ExchangeTensor) -> Result<C64> {
    let k = afm_coupling(jt);
    if k.norm() <= 1e-12 {
        return Err(Error::VanishingBlockCoupling);
    }
    Ok(k.conj() / k.norm())
}

/// `(|↑↓⟩ ∓ e^{iφ}|↓↑⟩)/√2`; `lower = true` gives the singlet-like state.
pub fn afm_block_state(jt: &ExchangeTensor, lower: bool) -> Result<QuantumState> {
    let p = afm_block_phase(jt)? * if lower { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    QuantumState::new(vec![ZERO, C64::new(FRAC_1_SQRT_2, 0.0), p, ZERO])
}

/// Detuning and tunnelling of the `|L⟩ = |↑,χ₀,↓⟩`, `|R⟩ = |↓,χ₀,↑⟩` doublet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportDoublet {
    /// `⟨L|H|L⟩ − ⟨R|H|R⟩`, MHz.
    pub delta: f64,
    /// `⟨L|H|R⟩`, MHz.
    pub t_eff_re: f64,
    pub t_eff_im: f64,
    /// `π/(E₊ − E₋)` when an isolated doublet exists, µs.
    pub transfer_time: Option<f64>,
    /// Channel ground state was degenerate.
    pub degenerate: bool,
}

impl TransportDoublet {
    pub fn t_eff(&self) -> C64 {
        C64::new(self.t_eff_re, self.t_eff_im)
    }
}

/// `|L⟩` and `|R⟩` built on the numerically computed channel ground state.
pub fn transport_states(spec: &ChainSpec) -> Result<(QuantumState, QuantumState, bool)> {
    let ground = channel_ground_state(spec)?;
    let up = QuantumState::up();
    let down = QuantumState::down();
    let l = up.tensor(&ground.state)?.tensor(&down)?;
    let r = down.tensor(&ground.state)?.tensor(&up)?;
    Ok((l, r, ground.degenerate))
}

fn spin_expectation(state: &QuantumState, site: usize, n_sites: usize) -> Result<[f64; 3]> {
    let rho = crate::dynamics::reduced_density_matrix(state, site, n_sites)?;
    // ⟨S^α⟩ = ½ tr(ρ σ^α)
    Ok([rho[(0, 1)].re, -rho[(0, 1)].im, 0.5 * (rho[(0, 0)].re - rho[(1, 1)].re)])
}

/// Detuning from end-bond mean fields:
/// `Δ = Σ_b J¹_zb ⟨S₂^b⟩ − Σ_a J³_az ⟨S₃^a⟩ + (h₁z − h₄z)`, plus `t_eff` and
/// the doublet transfer time on the full chain. Requires `L = 4`.
pub fn detuning_delta(spec: &ChainSpec) -> Result<TransportDoublet> {
    spec.validate()?;
    if spec.n_sites != 4 {
        return Err(Error::InvalidSpec(format!("detuning formula needs L = 4, got {}", spec.n_sites)));
    }
    let ground = channel_ground_state(spec)?;
    let s2 = spin_expectation(&ground.state, 1, 2)?;
    let s3 = spin_expectation(&ground.state, 2, 2)?;
    let left = spec.bond_tensor(1).j;
    let right = spec.bond_tensor(3).j;
    let mut delta: f64 = (0..3).map(|b| left[Z][b] * s2[b]).sum::<f64>() - (0..3).map(|a| right[a][Z] * s3[a]).sum::<f64>();
    let h1 = spec.g_boundary.effective_field(&spec.field);
    let h4 = spec.g_boundary.effective_field(&spec.field);
    delta += h1[Z] - h4[Z];

    let (l, r, degenerate) = transport_states(spec)?;
    let h = build_chain_hamiltonian(spec)?;
    let hr = h.mul_vec(r.amplitudes());
    let t_eff: C64 = l.amplitudes().iter().zip(&hr).map(|(a, b)| a.conj() * b).sum();
    let eig = hermitian_eig(&h)?;
    let transfer_time = isolated_doublet(&eig, &l, &r).ok().map(|(split, _, _)| PI / (spec.phase.factor() * split));
    Ok(TransportDoublet { delta, t_eff_re: t_eff.re, t_eff_im: t_eff.im, transfer_time, degenerate })
}

/// The two eigenstates carrying most weight on `span{|L⟩,|R⟩}`; errors unless
/// the nearest other level is farther than 10× their splitting.
pub fn isolated_doublet(eig: &EigenSystem, l: &QuantumState, r: &QuantumState) -> Result<(f64, usize, usize)> {
    if eig.dim() < 2 {
        return Err(Error::NoIsolatedDoublet("spectrum has fewer than two levels".into()));
    }
    let cl = eig.project(l.amplitudes());
    let cr = eig.project(r.amplitudes());
    let mut order: Vec<usize> = (0..eig.dim()).collect();
    let weight = |k: usize| cl[k].norm_sqr() + cr[k].norm_sqr();
    order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
    let (k1, k2) = (order[0].min(order[1]), order[0].max(order[1]));
    let (e1, e2) = (eig.eigenvalues[k1], eig.eigenvalues[k2]);
    let split = (e2 - e1).abs();
    let gap = (0..eig.dim())
        .filter(|&k| k != k1 && k != k2)
        .map(|k| (eig.eigenvalues[k] - e1).abs().min((eig.eigenvalues[k] - e2).abs()))
        .fold(f64::INFINITY, f64::min);
    if split <= 0.0 {
        return Err(Error::NoIsolatedDoublet("doublet is exactly degenerate".into()));
    }
    if gap <= 10.0 * split {
        return Err(Error::NoIsolatedDoublet(format!("gap {gap:.6} MHz is not > 10× splitting {split:.6} MHz")));
    }
    Ok((split, k1, k2))
}

/// `t* = π/(E₊ − E₋)` in µs under the spec's phase convention.
pub fn doublet_transfer_time(spec: &ChainSpec) -> Result<f64> {
    let (l, r, _) = transport_states(spec)?;
    let eig = hermitian_eig(&build_chain_hamiltonian(spec)?)?;
    let (split, _, _) = isolated_doublet(&eig, &l, &r)?;
    Ok(PI / (spec.phase.factor() * split))
}

/// Second-order effective two-level model for the end spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveTwoLevel {
    /// Off-diagonal element between `|↑S↓⟩` and `|↓S↑⟩`, MHz.
    pub t: C64,
    /// Effective diagonal energy `(H_eff)₁₁ = (H_eff)₂₂`, MHz.
    pub g_diag: f64,
    /// `2|T|`: oscillation frequency of F(t) under the 2π convention, MHz.
    pub predicted_frequency: f64,
    pub heff: [[C64; 2]; 2],
}

/// The six-state `S_z = 0` basis `{|↑S↓⟩, |↓S↑⟩, |↑T₀↓⟩, |↓T₀↑⟩, |↑T₋↑⟩, |↓T₊↓⟩}`
/// for a four-site chain, with S/T₀ the AFM-block eigenstates of `j_chan`.
pub fn van_vleck_basis(j_chan: &ExchangeTensor) -> Result<Vec<QuantumState>> {
    let s = afm_block_state(j_chan, true)?;
    let t0 = afm_block_state(j_chan, false)?;
    let t_minus = QuantumState::basis(2, 3)?;
    let t_plus = QuantumState::basis(2, 0)?;
    let up = QuantumState::up();
    let dn = QuantumState::down();
    let wrap = |a: &QuantumState, mid: &QuantumState, b: &QuantumState| a.tensor(mid)?.tensor(b);
    Ok(vec![
        wrap(&up, &s, &dn)?,
        wrap(&dn, &s, &up)?,
        wrap(&up, &t0, &dn)?,
        wrap(&dn, &t0, &up)?,
        wrap(&up, &t_minus, &up)?,
        wrap(&dn, &t_plus, &dn)?,
    ])
}

fn four_site_hamiltonian(j_chan: &ExchangeTensor, j_end: &ExchangeTensor) -> Result<ComplexMatrix> {
    let mut h = bond_hamiltonian(j_end, 1, 2, 4)?;
    h.add_scaled(&bond_hamiltonian(j_chan, 2, 3, 4)?, C64::new(1.0, 0.0));
    h.add_scaled(&bond_hamiltonian(j_end, 3, 4, 4)?, C64::new(1.0, 0.0));
    Ok(h)
}

/// Van Vleck block diagonalization to second order:
/// `(H_eff)_mn = H_mn + ½ Σ_k H_mk H_kn [1/(E_m − E_k) + 1/(E_n − E_k)]`,
/// with `E` the diagonal of the `j_end = 0` Hamiltonian in the six-state basis.
pub fn van_vleck_effective(j_chan: &ExchangeTensor, j_end: &ExchangeTensor) -> Result<EffectiveTwoLevel> {
    if j_end.max_abs() >= j_chan.max_abs() {
        return Err(Error::NotPerturbative(format!(
            "end coupling {:.4} is not weaker than channel coupling {:.4}",
            j_end.max_abs(),
            j_chan.max_abs()
        )));
    }
    let basis = van_vleck_basis(j_chan)?;
    let h = four_site_hamiltonian(j_chan, j_end)?;
    let h0 = four_site_hamiltonian(j_chan, &ExchangeTensor { j: [[0.0; 3]; 3] })?;
    let elem = |m: &ComplexMatrix, a: &QuantumState, b: &QuantumState| -> C64 {
        let mb = m.mul_vec(b.amplitudes());
        a.amplitudes().iter().zip(&mb).map(|(x, y)| x.conj() * y).sum()
    };
    let e: Vec<f64> = basis.iter().map(|b| elem(&h0, b, b).re).collect();
    let hm = |a: usize, b: usize| elem(&h, &basis[a], &basis[b]);
    let scale = j_chan.max_abs();
    let mut heff = [[ZERO; 2]; 2];
    for m in 0..2 {
        for n in 0..2 {
            let mut acc = hm(m, n);
            for k in 2..6 {
                let num = hm(m, k) * hm(k, n);
                if num.norm() == 0.0 {
                    continue;
                }
                let mut inv = 0.0;
                for d in [e[m] - e[k], e[n] - e[k]] {
                    if d.abs() <= 1e-12 * scale {
                        return Err(Error::VanishingDenominator { denominator: d });
                    }
                    inv += 1.0 / d;
                }
                acc += num * (0.5 * inv);
            }
            heff[m][n] = acc;
        }
    }
    let t = heff[0][1];
    Ok(EffectiveTwoLevel { t, g_diag: heff[0][0].re, predicted_frequency: 2.0 * t.norm(), heff })
}

/// The printed closed-form estimates of `T` and `G₁₁`, evaluated in
/// formula-level couplings. Kept as a cross-check of [`van_vleck_effective`];
/// they are not expected to agree beyond order of magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrintedEstimates {
    pub t: C64,
    pub g11: f64,
}

pub fn printed_estimates(j_chan: &ExchangeTensor, j_end: &ExchangeTensor) -> PrintedEstimates {
    let big = formula_couplings(j_chan);
    let small = formula_couplings(j_end);
    let (jxx, jyy, jzz, jxy, jyx) = (big[X][X], big[Y][Y], big[Z][Z], big[X][Y], big[Y][X]);
    let (sxx, syy, szz, sxy, syx) = (small[X][X], small[Y][Y], small[Z][Z], small[X][Y], small[Y][X]);
    let num = (sxx + syy).powi(2) * C64::new(jxx + jyy, 2.0 * jzz + (jxy - jyx));
    let den = (jxx + jyy) * C64::new(jxx + jyy + 2.0 * jzz, -2.0 * jzz);
    let g11 = -jxx - jyy - jzz - 2.0 * szz * szz * (jxy - jyx).powi(2) / (jxx + jyy)
        - (sxy - syx).powi(2) * (sxx + syy).powi(2) / (-2.0 * szz + jxx + jyy + 2.0 * jzz);
    PrintedEstimates { t: num / den, g11 }
}
