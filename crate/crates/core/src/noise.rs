//! Quasi-static charge noise on the exchange couplings.
//!
//! Each realization rescales bond exchange tensors by `(1+η)` (channel bonds)
//! or `(1+μ)` (end bonds), constant over one evolution. Realization `k` draws
//! from ChaCha stream `k` of the model seed, so results do not depend on the
//! order in which realizations are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{uniform_grid, FidelitySeries, TransferEvaluator};
use crate::error::{Error, Result};
use crate::model::ChainSpec;

pub const DEFAULT_REALIZATIONS: usize = 200;
/// Lower clip for Gaussian draws.
pub const GAUSSIAN_CLIP: f64 = -0.9;
/// Sub-grid used to refine the maximum of the averaged curve.
const MEAN_REFINE_POINTS: usize = 257;
/// Keep per-realization evaluators between passes up to this dimension.
const KEEP_EVALUATORS_MAX_DIM: usize = 128;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// One draw shared by every bond.
    #[default]
    Correlated,
    /// One draw for all channel bonds, an independent one for both end bonds.
    Split,
    /// Independent draw per bond.
    Uncorrelated,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Correlated, NoiseKind::Split, NoiseKind::Uncorrelated];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Correlated => "correlated",
            NoiseKind::Split => "split",
            NoiseKind::Uncorrelated => "uncorrelated",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    /// Uniform on `[−s, s]`.
    #[default]
    Uniform,
    /// `N(0, s)` clipped below at −0.9.
    Gaussian,
}

/// Which bonds receive their drawn multiplier. Draws are made for every bond
/// regardless, so switching targets leaves the random stream unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTargets {
    #[default]
    All,
    ChannelOnly,
    EndsOnly,
}

impl NoiseTargets {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseTargets::All => "all",
            NoiseTargets::ChannelOnly => "channel-only",
            NoiseTargets::EndsOnly => "ends-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Relative half-width (uniform) or standard deviation (Gaussian).
    pub strength: f64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub targets: NoiseTargets,
}

fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, strength: f64, seed: u64) -> Self {
        Self {
            kind,
            strength,
            distribution: NoiseDistribution::Uniform,
            seed,
            realizations: DEFAULT_REALIZATIONS,
            targets: NoiseTargets::All,
        }
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.realizations = n;
        self
    }

    pub fn with_targets(mut self, targets: NoiseTargets) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_distribution(mut self, d: NoiseDistribution) -> Self {
        self.distribution = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidNoise(format!("strength must be finite and ≥ 0, got {}", self.strength)));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidNoise("need at least one realization".into()));
        }
        if self.distribution == NoiseDistribution::Uniform && self.strength >= 1.0 {
            return Err(Error::InvalidNoise(format!("uniform half-width {} would allow non-positive couplings", self.strength)));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.strength == 0.0 {
            // consume the same amount of randomness as a real draw
            let _: f64 = rng.random();
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::Uniform => rng.random_range(-self.strength..=self.strength),
            NoiseDistribution::Gaussian => {
                let n = Normal::new(0.0, self.strength).expect("strength validated");
                n.sample(rng).max(GAUSSIAN_CLIP)
            }
        }
    }
}

/// Multipliers for one disorder realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    /// `η` per channel bond, in bond order.
    pub eta_per_bond: Vec<f64>,
    /// `μ` for the left and right end bonds.
    pub mu_per_bond: Vec<f64>,
}

impl NoiseRealization {
    pub fn zero(spec: &ChainSpec) -> Self {
        Self { eta_per_bond: vec![0.0; spec.n_bonds().saturating_sub(2)], mu_per_bond: vec![0.0; 2] }
    }
}

/// Realization `draw_index` of `model`; a pure function of `(seed, draw_index)`.
pub fn sample_realization(model: &NoiseModel, spec: &ChainSpec, draw_index: u64) -> Result<NoiseRealization> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(draw_index);
    let interior = spec.n_bonds().saturating_sub(2);
    let (mut eta, mut mu) = match model.kind {
        NoiseKind::Correlated => {
            let x = model.draw(&mut rng);
            (vec![x; interior], vec![x; 2])
        }
        NoiseKind::Split => {
            let e = model.draw(&mut rng);
            let m = model.draw(&mut rng);
            (vec![e; interior], vec![m; 2])
        }
        NoiseKind::Uncorrelated => {
            let e: Vec<f64> = (0..interior).map(|_| model.draw(&mut rng)).collect();
            let m: Vec<f64> = (0..2).map(|_| model.draw(&mut rng)).collect();
            (e, m)
        }
    };
    match model.targets {
        NoiseTargets::All => {}
        NoiseTargets::ChannelOnly => mu.iter_mut().for_each(|x| *x = 0.0),
        NoiseTargets::EndsOnly => eta.iter_mut().for_each(|x| *x = 0.0),
    }
    Ok(NoiseRealization { eta_per_bond: eta, mu_per_bond: mu })
}

/// Copy of `spec` with every bond tensor rescaled by its multiplier.
pub fn apply_noise(spec: &ChainSpec, real: &NoiseRealization) -> Result<ChainSpec> {
    let bonds = spec.n_bonds();
    let interior = bonds.saturating_sub(2);
    if real.eta_per_bond.len() != interior || real.mu_per_bond.len() != 2 {
        return Err(Error::InvalidNoise(format!(
            "realization has {}+{} multipliers for {} channel and 2 end bonds",
            real.eta_per_bond.len(),
            real.mu_per_bond.len(),
            interior
        )));
    }
    if let Some(x) = real.eta_per_bond.iter().chain(&real.mu_per_bond).find(|x| !(**x > -1.0 && x.is_finite())) {
        return Err(Error::InvalidNoise(format!("multiplier {x} would make a coupling non-positive")));
    }
    let mut out = spec.clone();
    let scale = (1..=bonds)
        .map(|b| {
            let delta = if b == 1 {
                real.mu_per_bond[0]
            } else if b == bonds {
                real.mu_per_bond[1]
            } else {
                real.eta_per_bond[b - 2]
            };
            spec.bond_multiplier(b) * (1.0 + delta)
        })
        .collect();
    out.bond_scale = Some(scale);
    Ok(out)
}

/// Disorder-averaged transfer fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseAverage {
    /// Pointwise mean of `F(t)`; its `f_max`/`t_max` is the maximum of the
    /// averaged curve.
    pub mean: FidelitySeries,
    /// Mean of the per-realization maxima.
    pub peak_mean: f64,
    pub peak_std: f64,
    /// `peak_std / √N`.
    pub peak_stderr: f64,
    pub realizations: usize,
}

struct Draw {
    values: Vec<f64>,
    f_max: f64,
    evaluator: Option<TransferEvaluator>,
}

fn evaluate_draw(spec: &ChainSpec, model: &NoiseModel, k: u64, window: f64, grid_points: usize, keep: bool) -> Result<Draw> {
    let noisy = apply_noise(spec, &sample_realization(model, spec, k)?)?;
    let ev = TransferEvaluator::new(&noisy)?;
    let s = ev.series(window, grid_points)?;
    Ok(Draw { values: s.values, f_max: s.f_max, evaluator: keep.then_some(ev) })
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T>(n: usize, f: impl Fn(u64) -> Result<T>) -> Result<Vec<T>> {
    (0..n as u64).map(f).collect()
}

/// Averages `F(t)` over `model.realizations` draws. Sums run in draw order so
/// the result is independent of scheduling.
pub fn disorder_averaged_fidelity(spec: &ChainSpec, model: &NoiseModel, window: f64, grid_points: usize) -> Result<NoiseAverage> {
    model.validate()?;
    spec.validate()?;
    if model.strength == 0.0 {
        // every realization is the noiseless chain
        let mean = TransferEvaluator::new(spec)?.series(window, grid_points)?;
        let peak = mean.f_max;
        return Ok(NoiseAverage { mean, peak_mean: peak, peak_std: 0.0, peak_stderr: 0.0, realizations: model.realizations });
    }
    let keep = (1usize << spec.n_sites) <= KEEP_EVALUATORS_MAX_DIM;
    let draws = map_indices(model.realizations, |k| evaluate_draw(spec, model, k, window, grid_points, keep))?;
    let n = draws.len() as f64;
    let times = uniform_grid(window, grid_points);
    let mut mean = vec![0.0; grid_points];
    for d in &draws {
        mean.iter_mut().zip(&d.values).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut series = FidelitySeries { times, values: mean, t_max: 0.0, f_max: 0.0 };
    let (i, grid_f) = series.grid_max();
    let lo = series.times[i.saturating_sub(1)];
    let hi = series.times[(i + 1).min(grid_points - 1)];
    let sub = uniform_grid(hi - lo, MEAN_REFINE_POINTS).into_iter().map(|t| lo + t).collect::<Vec<_>>();
    let fine = map_indices(draws.len(), |k| match &draws[k as usize].evaluator {
        Some(ev) => Ok(ev.fidelity_many(&sub)),
        None => {
            let noisy = apply_noise(spec, &sample_realization(model, spec, k)?)?;
            Ok(TransferEvaluator::new(&noisy)?.fidelity_many(&sub))
        }
    })?;
    let mut fine_mean = vec![0.0; sub.len()];
    for f in &fine {
        fine_mean.iter_mut().zip(f).for_each(|(m, v)| *m += v);
    }
    let (t_max, f_max) = sub
        .iter()
        .zip(&fine_mean)
        .map(|(&t, &m)| (t, m / n))
        .fold((series.times[i], grid_f), |best, cur| if cur.1 > best.1 { cur } else { best });
    series.t_max = t_max;
    series.f_max = f_max;

    let peak_mean = draws.iter().map(|d| d.f_max).sum::<f64>() / n;
    let var = if draws.len() > 1 {
        draws.iter().map(|d| (d.f_max - peak_mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let peak_std = var.sqrt();
    Ok(NoiseAverage { mean: series, peak_mean, peak_std, peak_stderr: peak_std / n.sqrt(), realizations: draws.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::fidelity_series;
    use crate::linalg::hermitian_eig;
    use crate::model::{build_chain_hamiltonian, channel_hamiltonian, SpinOrbitAxis};
    use proptest::prelude::*;

    #[test]
    fn zero_strength_is_identity() {
        let spec = ChainSpec::new(5);
        for kind in NoiseKind::ALL {
            let r = sample_realization(&NoiseModel::new(kind, 0.0, 3), &spec, 7).unwrap();
            assert!(r.eta_per_bond.iter().chain(&r.mu_per_bond).all(|x| *x == 0.0));
            let noisy = apply_noise(&spec, &r).unwrap();
            assert_eq!(build_chain_hamiltonian(&noisy).unwrap(), build_chain_hamiltonian(&spec).unwrap());
        }
    }

    #[test]
    fn zero_strength_average_matches_noiseless() {
        let spec = ChainSpec::new(4).with_theta(0.3);
        let model = NoiseModel::new(NoiseKind::Uncorrelated, 0.0, 1).with_realizations(3);
        let avg = disorder_averaged_fidelity(&spec, &model, 2.0, 201).unwrap();
        let plain = fidelity_series(&spec, 2.0, 201).unwrap();
        assert_eq!(avg.mean.values, plain.values);
        assert!((avg.peak_mean - plain.f_max).abs() < 1e-15);
        assert!(avg.peak_std < 1e-15);
    }

    #[test]
    fn kinds_have_expected_structure() {
        let spec = ChainSpec::new(7);
        let c = sample_realization(&NoiseModel::new(NoiseKind::Correlated, 0.1, 9), &spec, 0).unwrap();
        let all: Vec<f64> = c.eta_per_bond.iter().chain(&c.mu_per_bond).copied().collect();
        assert!(all.iter().all(|x| *x == all[0]) && all[0] != 0.0);
        let s = sample_realization(&NoiseModel::new(NoiseKind::Split, 0.1, 9), &spec, 0).unwrap();
        assert!(s.eta_per_bond.iter().all(|x| *x == s.eta_per_bond[0]));
        assert_eq!(s.mu_per_bond[0], s.mu_per_bond[1]);
        assert_ne!(s.eta_per_bond[0], s.mu_per_bond[0]);
        let u = sample_realization(&NoiseModel::new(NoiseKind::Uncorrelated, 0.1, 9), &spec, 0).unwrap();
        assert_eq!(u.eta_per_bond.len(), 4);
        assert_ne!(u.eta_per_bond[0], u.eta_per_bond[1]);
    }

    #[test]
    fn targets_zero_the_other_group() {
        let spec = ChainSpec::new(4);
        let base = NoiseModel::new(NoiseKind::Split, 0.1, 5);
        let all = sample_realization(&base, &spec, 2).unwrap();
        let ch = sample_realization(&base.with_targets(NoiseTargets::ChannelOnly), &spec, 2).unwrap();
        let ends = sample_realization(&base.with_targets(NoiseTargets::EndsOnly), &spec, 2).unwrap();
        assert_eq!(ch.eta_per_bond, all.eta_per_bond);
        assert_eq!(ch.mu_per_bond, vec![0.0, 0.0]);
        assert_eq!(ends.mu_per_bond, all.mu_per_bond);
        assert_eq!(ends.eta_per_bond, vec![0.0]);
    }

    #[test]
    fn deterministic_streams() {
        let spec = ChainSpec::new(6);
        let m = NoiseModel::new(NoiseKind::Uncorrelated, 0.05, 42);
        let a = sample_realization(&m, &spec, 11).unwrap();
        let b = sample_realization(&m, &spec, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_realization(&m, &spec, 12).unwrap());
    }

    #[test]
    fn uncorrelated_sample_mean_is_centred() {
        let spec = ChainSpec::new(3);
        let s = 0.1;
        let m = NoiseModel::new(NoiseKind::Uncorrelated, s, 77);
        let n = 10_000;
        let mean = (0..n).map(|k| sample_realization(&m, &spec, k).unwrap().mu_per_bond[0]).sum::<f64>() / n as f64;
        // uniform on [−s, s] has σ = s/√3
        let sigma = s / 3f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn gaussian_is_clipped() {
        let spec = ChainSpec::new(3);
        let m = NoiseModel::new(NoiseKind::Uncorrelated, 5.0, 1).with_distribution(NoiseDistribution::Gaussian);
        for k in 0..200 {
            let r = sample_realization(&m, &spec, k).unwrap();
            assert!(r.mu_per_bond.iter().all(|x| *x >= GAUSSIAN_CLIP));
        }
    }

    #[test]
    fn invalid_inputs() {
        let spec = ChainSpec::new(4);
        assert!(NoiseModel::new(NoiseKind::Split, -0.1, 0).validate().is_err());
        assert!(NoiseModel::new(NoiseKind::Split, 0.1, 0).with_realizations(0).validate().is_err());
        let bad = NoiseRealization { eta_per_bond: vec![-1.0], mu_per_bond: vec![0.0, 0.0] };
        assert!(apply_noise(&spec, &bad).is_err());
        let short = NoiseRealization { eta_per_bond: vec![], mu_per_bond: vec![0.0, 0.0] };
        assert!(apply_noise(&spec, &short).is_err());
    }

    #[test]
    fn correlated_scales_spectrum() {
        let spec = ChainSpec::new(5).with_theta(0.7).with_axis(SpinOrbitAxis::X);
        let eta = 0.037;
        let r = NoiseRealization { eta_per_bond: vec![eta; 2], mu_per_bond: vec![eta; 2] };
        let noisy = apply_noise(&spec, &r).unwrap();
        let e0 = hermitian_eig(&build_chain_hamiltonian(&spec).unwrap()).unwrap().eigenvalues;
        let e1 = hermitian_eig(&build_chain_hamiltonian(&noisy).unwrap()).unwrap().eigenvalues;
        for (a, b) in e0.iter().zip(&e1) {
            assert!((a * (1.0 + eta) - b).abs() < 1e-9);
        }
        assert_eq!(noisy.theta, spec.theta);
        assert_eq!(noisy.axis, spec.axis);
    }

    #[test]
    fn end_noise_leaves_channel_unchanged() {
        let spec = ChainSpec::new(5).with_theta(0.7);
        let r = NoiseRealization { eta_per_bond: vec![0.0; 2], mu_per_bond: vec![0.08, -0.05] };
        let noisy = apply_noise(&spec, &r).unwrap();
        assert_eq!(channel_hamiltonian(&noisy).unwrap(), channel_hamiltonian(&spec).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn correlated_noise_rescales_time(eta in -0.3f64..0.3, theta in 0.0f64..std::f64::consts::TAU) {
            let spec = ChainSpec::new(4).with_theta(theta).with_axis(SpinOrbitAxis::Y);
            let r = NoiseRealization { eta_per_bond: vec![eta], mu_per_bond: vec![eta; 2] };
            let clean = TransferEvaluator::new(&spec).unwrap();
            let noisy = TransferEvaluator::new(&apply_noise(&spec, &r).unwrap()).unwrap();
            for i in 0..40 {
                let t = 0.05 * i as f64;
                prop_assert!((noisy.fidelity_at(t) - clean.fidelity_at((1.0 + eta) * t)).abs() < 1e-8);
            }
        }
    }
}
