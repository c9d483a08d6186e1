//! wasm-bindgen bindings for the browser demo in `www/`.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;

use spinbus_core::dynamics::uniform_grid;
use spinbus_core::{ChainSpec, SpinOrbitAxis, TransferEvaluator};

/// Sampled curve handed to JavaScript as two `Float64Array`s.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
}

/// `f_max` over the (n_x, n_z) grid, row-major with n_z outer. Cells with
/// n_x² + n_z² > 1 hold NaN.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    axis_values: Vec<f64>,
    f_max: Vec<f64>,
}

#[wasm_bindgen]
impl Heatmap {
    /// Shared tick values of both axes.
    #[wasm_bindgen(getter)]
    pub fn ticks(&self) -> Vec<f64> {
        self.axis_values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.f_max.clone()
    }
}

fn spec(sites: usize, theta_over_pi: f64, axis: &[f64], field_z: f64) -> spinbus_core::Result<ChainSpec> {
    let [x, y, z] = axis else {
        return Err(spinbus_core::Error::InvalidSpec(format!("axis needs 3 components, got {}", axis.len())));
    };
    let spec = ChainSpec::new(sites)
        .with_theta(theta_over_pi * PI)
        .with_axis(SpinOrbitAxis::normalize([*x, *y, *z])?)
        .with_field([0.0, 0.0, field_z]);
    spec.validate()?;
    Ok(spec)
}

pub fn theta_curve_impl(sites: usize, axis: &[f64], field_z: f64, points: usize, window_us: f64) -> spinbus_core::Result<Curve> {
    let x: Vec<f64> = uniform_grid(2.0, points.max(2));
    let y = x
        .iter()
        .map(|&t| {
            let s = spec(sites, t, axis, field_z)?;
            Ok(TransferEvaluator::new(&s)?.series(window_us, 1001)?.f_max)
        })
        .collect::<spinbus_core::Result<_>>()?;
    Ok(Curve { x, y })
}

pub fn fidelity_trace_impl(
    sites: usize,
    theta_over_pi: f64,
    axis: &[f64],
    field_z: f64,
    window_us: f64,
    points: usize,
) -> spinbus_core::Result<Curve> {
    let s = spec(sites, theta_over_pi, axis, field_z)?;
    let series = TransferEvaluator::new(&s)?.series(window_us, points.max(2))?;
    Ok(Curve { x: series.times, y: series.values })
}

pub fn axis_heatmap_impl(sites: usize, theta_over_pi: f64, step: f64, window_us: f64) -> spinbus_core::Result<Heatmap> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(spinbus_core::Error::InvalidConfig(format!("step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round() as usize + 1;
    let ticks: Vec<f64> = (0..n).map(|i| (i as f64 * step).min(1.0)).collect();
    let mut f_max = Vec::with_capacity(n * n);
    for &nz in &ticks {
        for &nx in &ticks {
            let r2 = nx * nx + nz * nz;
            if r2 > 1.0 + 1e-12 {
                f_max.push(f64::NAN);
                continue;
            }
            let ny = (1.0 - r2).max(0.0).sqrt();
            let s = spec(sites, theta_over_pi, &[nx, ny, nz], 0.0)?;
            f_max.push(TransferEvaluator::new(&s)?.series(window_us, 1001)?.f_max);
        }
    }
    Ok(Heatmap { axis_values: ticks, f_max })
}

fn js(e: spinbus_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Maximum fidelity over θ ∈ [0, 2π] (x in units of π).
#[wasm_bindgen]
pub fn theta_curve(sites: usize, axis: &[f64], field_z: f64, points: usize, window_us: f64) -> Result<Curve, JsError> {
    theta_curve_impl(sites, axis, field_z, points, window_us).map_err(js)
}

/// F(t) on a uniform grid over `[0, window_us]`.
#[wasm_bindgen]
pub fn fidelity_trace(
    sites: usize,
    theta_over_pi: f64,
    axis: &[f64],
    field_z: f64,
    window_us: f64,
    points: usize,
) -> Result<Curve, JsError> {
    fidelity_trace_impl(sites, theta_over_pi, axis, field_z, window_us, points).map_err(js)
}

#[wasm_bindgen]
pub fn axis_heatmap(sites: usize, theta_over_pi: f64, step: f64, window_us: f64) -> Result<Heatmap, JsError> {
    axis_heatmap_impl(sites, theta_over_pi, step, window_us).map_err(js)
}
