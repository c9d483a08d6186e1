//! TOML sweep configuration and its resolved, fully explicit form.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{DEFAULT_GRID_POINTS, DEFAULT_WINDOW_US};
use crate::error::{Error, Result};
use crate::linalg::PhaseConvention;
use crate::model::{commensurate_angles, ChainSpec, GTensor, InitKind, Mat3, SpinOrbitAxis};
use crate::noise::{NoiseDistribution, NoiseKind, NoiseTargets, DEFAULT_REALIZATIONS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Theta,
    AxisGrid,
    Size,
    Field,
    Noise,
    TimeTrace,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Theta => "theta",
            SweepKind::AxisGrid => "axis-grid",
            SweepKind::Size => "size",
            SweepKind::Field => "field",
            SweepKind::Noise => "noise",
            SweepKind::TimeTrace => "time-trace",
        }
    }
}

pub const DEFAULT_AXES: [[f64; 3]; 5] =
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.707], [0.707, 0.5, 0.5]];
pub const DEFAULT_THETA_POINTS: usize = 201;
pub const DEFAULT_AXIS_STEP: f64 = 0.05;

/// Base chain, in the units a user types: θ in units of π, unnormalized axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseSpec {
    pub sites: usize,
    pub j_channel_mhz: f64,
    pub j_end_mhz: f64,
    pub theta_over_pi: f64,
    pub axis: [f64; 3],
    pub field_mhz: [f64; 3],
    pub init: InitKind,
    pub phase: PhaseConvention,
    pub g_boundary: Option<Mat3>,
    pub g_channel: Option<Mat3>,
}

impl Default for BaseSpec {
    fn default() -> Self {
        Self {
            sites: 4,
            j_channel_mhz: ChainSpec::DEFAULT_J0,
            j_end_mhz: ChainSpec::DEFAULT_J_END,
            theta_over_pi: 0.0,
            axis: [0.0, 0.0, 1.0],
            field_mhz: [0.0; 3],
            init: InitKind::ChannelGroundState,
            phase: PhaseConvention::TwoPi,
            g_boundary: None,
            g_channel: None,
        }
    }
}

impl BaseSpec {
    pub fn to_spec(&self) -> Result<ChainSpec> {
        let mut spec = ChainSpec::new(self.sites)
            .with_couplings(self.j_channel_mhz, self.j_end_mhz)
            .with_theta(self.theta_over_pi * PI)
            .with_axis(SpinOrbitAxis::normalize(self.axis)?)
            .with_field(self.field_mhz)
            .with_init(self.init);
        spec.phase = self.phase;
        if let Some(g) = self.g_boundary {
            spec.g_boundary = GTensor { g };
        }
        if let Some(g) = self.g_channel {
            spec.g_channel = GTensor { g };
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub label: String,
    #[serde(default)]
    pub theta_over_pi: f64,
    #[serde(default = "z_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub field_mhz: [f64; 3],
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Swept values. Anything left out falls back to a per-kind default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub theta_over_pi: Option<Vec<f64>>,
    /// Uniform θ/π grid over `[0, 2]` used when no explicit list is given.
    pub theta_points: Option<usize>,
    pub append_commensurate: Option<bool>,
    pub axes: Option<Vec<[f64; 3]>>,
    pub nx: Option<Vec<f64>>,
    pub nz: Option<Vec<f64>>,
    pub axis_step: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub anisotropic_theta_over_pi: Option<f64>,
    pub anisotropic_axis: Option<[f64; 3]>,
    pub fields_mhz: Option<Vec<[f64; 3]>>,
    pub kinds: Option<Vec<NoiseKind>>,
    pub strengths: Option<Vec<f64>>,
    pub targets: Option<Vec<NoiseTargets>>,
    pub realizations: Option<usize>,
    pub distribution: Option<NoiseDistribution>,
    pub traces: Option<Vec<TraceSpec>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: Option<SweepKind>,
    pub base: BaseSpec,
    pub grid: SweepGrid,
    pub window_us: Option<f64>,
    pub grid_points: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn for_kind(kind: SweepKind) -> Self {
        Self { kind: Some(kind), ..Self::default() }
    }

    /// Fills every default and normalizes every axis.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let kind = self.kind.ok_or_else(|| Error::InvalidConfig("sweep kind is not set".into()))?;
        let base = self.base.to_spec()?;
        base.validate()?;
        let window_us = self.window_us.unwrap_or(DEFAULT_WINDOW_US);
        if !(window_us > 0.0 && window_us.is_finite()) {
            return Err(Error::InvalidConfig(format!("window must be positive, got {window_us}")));
        }
        let grid_points = self.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
        if grid_points < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 grid points, got {grid_points}")));
        }
        let g = &self.grid;
        let mut r = ResolvedConfig {
            kind,
            base,
            window_us,
            grid_points,
            seed: self.seed.unwrap_or(0),
            theta_over_pi: None,
            axes: None,
            axis_normalization: Vec::new(),
            axis_grid: None,
            sizes: None,
            anisotropic: None,
            fields_mhz: None,
            noise: None,
            traces: None,
        };
        let mut norm = |v: [f64; 3]| -> Result<[f64; 3]> {
            let n = SpinOrbitAxis::normalize(v)?.components();
            if n != v {
                r_push(&mut r.axis_normalization, v, n);
            }
            Ok(n)
        };
        let axes = |norm: &mut dyn FnMut([f64; 3]) -> Result<[f64; 3]>| -> Result<Vec<[f64; 3]>> {
            let list = g.axes.clone().unwrap_or_else(|| DEFAULT_AXES.to_vec());
            nonempty(&list, "axes")?;
            list.into_iter().map(norm).collect()
        };
        let thetas = |n_sites: usize, default: Option<Vec<f64>>| -> Result<Vec<f64>> {
            let mut list = match (&g.theta_over_pi, default) {
                (Some(l), _) => l.clone(),
                (None, Some(d)) => d,
                (None, None) => {
                    let n = g.theta_points.unwrap_or(DEFAULT_THETA_POINTS);
                    if n < 2 {
                        return Err(Error::InvalidConfig("theta_points must be ≥ 2".into()));
                    }
                    (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect()
                }
            };
            nonempty(&list, "theta_over_pi")?;
            if list.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("non-finite θ".into()));
            }
            if g.append_commensurate.unwrap_or(true) {
                list.extend(commensurate_angles(n_sites, n_sites - 1).into_iter().map(|t| t / PI));
            }
            list.sort_by(f64::total_cmp);
            list.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
            Ok(list)
        };
        match kind {
            SweepKind::Theta => {
                r.theta_over_pi = Some(thetas(r.base.n_sites, None)?);
                r.axes = Some(axes(&mut norm)?);
            }
            SweepKind::AxisGrid => {
                let step = g.axis_step.unwrap_or(DEFAULT_AXIS_STEP);
                if !(step > 0.0 && step <= 1.0) {
                    return Err(Error::InvalidConfig(format!("axis_step must be in (0, 1], got {step}")));
                }
                let n = (1.0 / step).round() as i64;
                let default: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
                let nx = g.nx.clone().unwrap_or_else(|| default.clone());
                let nz = g.nz.clone().unwrap_or(default);
                nonempty(&nx, "nx")?;
                nonempty(&nz, "nz")?;
                r.axis_grid = Some(AxisGrid { nx, nz });
                let list = g.theta_over_pi.clone().unwrap_or_else(|| vec![0.4, 0.55]);
                nonempty(&list, "theta_over_pi")?;
                r.theta_over_pi = Some(list);
            }
            SweepKind::Size => {
                let sizes = g.sizes.clone().unwrap_or_else(|| (4..=11).collect());
                nonempty(&sizes, "sizes")?;
                r.sizes = Some(sizes);
                let axis = norm(g.anisotropic_axis.unwrap_or([0.5, 0.5, 0.707]))?;
                r.anisotropic = Some(Anisotropic { theta_over_pi: g.anisotropic_theta_over_pi.unwrap_or(0.3), axis });
            }
            SweepKind::Field => {
                r.theta_over_pi = Some(thetas(r.base.n_sites, None)?);
                r.axes = Some(axes(&mut norm)?);
                let fields = g.fields_mhz.clone().unwrap_or_else(|| vec![[0.0; 3], [0.0, 0.0, 50.0]]);
                nonempty(&fields, "fields_mhz")?;
                r.fields_mhz = Some(fields);
            }
            SweepKind::Noise => {
                let kinds = g.kinds.clone().unwrap_or_else(|| NoiseKind::ALL.to_vec());
                let strengths = g.strengths.clone().unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
                let targets = g.targets.clone().unwrap_or_else(|| vec![NoiseTargets::All]);
                nonempty(&kinds, "kinds")?;
                nonempty(&strengths, "strengths")?;
                nonempty(&targets, "targets")?;
                let realizations = g.realizations.unwrap_or(DEFAULT_REALIZATIONS);
                if realizations == 0 {
                    return Err(Error::InvalidConfig("realizations must be ≥ 1".into()));
                }
                r.noise = Some(NoiseGrid {
                    kinds,
                    strengths,
                    targets,
                    realizations,
                    distribution: g.distribution.unwrap_or_default(),
                });
            }
            SweepKind::TimeTrace => {
                let traces = g.traces.clone().unwrap_or_else(default_traces);
                nonempty(&traces, "traces")?;
                let mut out = Vec::with_capacity(traces.len());
                for t in traces {
                    out.push(TraceSpec { axis: norm(t.axis)?, ..t });
                }
                let mut labels: Vec<&str> = out.iter().map(|t| t.label.as_str()).collect();
                labels.sort_unstable();
                if labels.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidConfig("trace labels must be unique".into()));
                }
                r.traces = Some(out);
            }
        }
        Ok(r)
    }
}

fn r_push(log: &mut Vec<AxisNormalization>, input: [f64; 3], normalized: [f64; 3]) {
    if !log.iter().any(|e| e.input == input) {
        log.push(AxisNormalization { input, normalized });
    }
}

fn nonempty<T>(v: &[T], what: &str) -> Result<()> {
    if v.is_empty() {
        Err(Error::InvalidConfig(format!("{what} must not be empty")))
    } else {
        Ok(())
    }
}

fn default_traces() -> Vec<TraceSpec> {
    vec![
        TraceSpec { label: "isotropic".into(), theta_over_pi: 0.0, axis: [0.0, 0.0, 1.0], field_mhz: [0.0; 3] },
        TraceSpec { label: "tilted".into(), theta_over_pi: 0.3, axis: [0.5, 0.5, 0.707], field_mhz: [0.0; 3] },
        TraceSpec { label: "aligned".into(), theta_over_pi: 0.3, axis: [0.0, 0.0, 1.0], field_mhz: [0.0; 3] },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisNormalization {
    pub input: [f64; 3],
    pub normalized: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisGrid {
    pub nx: Vec<f64>,
    pub nz: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Anisotropic {
    pub theta_over_pi: f64,
    pub axis: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseGrid {
    pub kinds: Vec<NoiseKind>,
    pub strengths: Vec<f64>,
    pub targets: Vec<NoiseTargets>,
    pub realizations: usize,
    pub distribution: NoiseDistribution,
}

/// Everything a run depends on; its JSON form is hashed into every row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub kind: SweepKind,
    pub base: ChainSpec,
    pub window_us: f64,
    pub grid_points: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_over_pi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub axis_normalization: Vec<AxisNormalization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_grid: Option<AxisGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anisotropic: Option<Anisotropic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields_mhz: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<TraceSpec>>,
}

impl ResolvedConfig {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// First 16 hex digits of [`ResolvedConfig::hash`], as stored per row.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes() {
        let cfg = SweepConfig::from_toml_str(
            r#"
            kind = "theta"
            seed = 7
            [base]
            sites = 4
            [grid]
            theta_over_pi = [0.0, 0.5]
            axes = [[0.5, 0.5, 0.707], [2.0, 0.0, 0.0]]
            "#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        let axes = r.axes.as_ref().unwrap();
        for a in axes {
            assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(axes[1], [1.0, 0.0, 0.0]);
        assert_eq!(r.axis_normalization.len(), 2);
        // commensurate points 2/3 and 4/3 (and 0, 2) appended
        let t = r.theta_over_pi.as_ref().unwrap();
        assert!(t.iter().any(|x| (x - 2.0 / 3.0).abs() < 1e-12));
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SweepConfig::from_toml_str("kind = \"theta\"\nbogus = 1").is_err());
        let mut c = SweepConfig::for_kind(SweepKind::Theta);
        c.grid.theta_over_pi = Some(vec![]);
        assert!(c.resolve().is_err());
        let mut c = SweepConfig::for_kind(SweepKind::Theta);
        c.grid.axes = Some(vec![[0.0; 3]]);
        assert!(c.resolve().is_err());
        let mut c = SweepConfig::for_kind(SweepKind::Theta);
        c.window_us = Some(0.0);
        assert!(c.resolve().is_err());
        assert!(SweepConfig::default().resolve().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = SweepConfig::for_kind(SweepKind::Size).resolve().unwrap();
        let b = SweepConfig::for_kind(SweepKind::Size).resolve().unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = SweepConfig::for_kind(SweepKind::Size);
        c.seed = Some(1);
        assert_ne!(a.hash(), c.resolve().unwrap().hash());
    }

    #[test]
    fn defaults_per_kind() {
        let r = SweepConfig::for_kind(SweepKind::AxisGrid).resolve().unwrap();
        assert_eq!(r.axis_grid.as_ref().unwrap().nx.len(), 21);
        let r = SweepConfig::for_kind(SweepKind::Noise).resolve().unwrap();
        assert_eq!(r.noise.as_ref().unwrap().realizations, 200);
        let r = SweepConfig::for_kind(SweepKind::TimeTrace).resolve().unwrap();
        assert_eq!(r.traces.as_ref().unwrap().len(), 3);
    }
}
