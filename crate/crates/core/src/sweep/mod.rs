//! Experiment orchestration: configuration, sweep runners and result files.

mod config;
mod table;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

pub use config::{
    Anisotropic, AxisGrid, AxisNormalization, BaseSpec, NoiseGrid, ResolvedConfig, SweepConfig, SweepGrid, SweepKind,
    TraceSpec, DEFAULT_AXES, DEFAULT_AXIS_STEP, DEFAULT_THETA_POINTS,
};
pub use table::{format_sig, sibling_path, Cell, OutputFormat, Table};

use crate::analytics::{
    afm_block_phase, detuning_delta, doublet_transfer_time, printed_estimates, van_vleck_effective, TwoSpinSolution,
};
use crate::dynamics::{uniform_grid, TransferEvaluator};
use crate::error::{Error, Result};
use crate::model::{rotation_exchange, ChainSpec, SpinOrbitAxis};
use crate::noise::{disorder_averaged_fidelity, NoiseModel};

/// Columns of every per-spec table (theta, axis-grid, size and field sweeps).
pub const POINT_COLUMNS: [&str; 18] = [
    "theta_over_pi",
    "axis_x",
    "axis_y",
    "axis_z",
    "L",
    "J0_mhz",
    "j0_mhz",
    "Bx_mhz",
    "By_mhz",
    "Bz_mhz",
    "init",
    "f_max",
    "t_max_us",
    "degenerate",
    "error",
    "config_hash",
    "seed",
    "grid_points",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
}

/// Tables produced by one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub config: ResolvedConfig,
    pub table: Table,
    /// Secondary tables written next to the main file as `stem.<tag>.<ext>`.
    pub extra: Vec<(String, Table)>,
    /// Extra metadata merged into the sidecar record.
    pub metadata: serde_json::Value,
    /// Seconds spent per main-table row (same order as `table.rows`).
    pub wall_times: Vec<f64>,
}

/// Outcome of one sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub theta_over_pi: f64,
    /// Axis as swept; `n_y` is NaN for cells outside the unit disk.
    pub axis: [f64; 3],
    pub spec: ChainSpec,
    pub f_max: Option<f64>,
    pub t_max: Option<f64>,
    pub degenerate: bool,
    pub error: Option<String>,
    pub wall: f64,
}

/// `f_max` and `t_max` of one resolved spec, exactly as a standalone
/// fidelity series would report them.
pub fn evaluate_point(theta_over_pi: f64, axis: [f64; 3], spec: ChainSpec, window: f64, grid_points: usize) -> PointResult {
    let start = Instant::now();
    let outcome = TransferEvaluator::new(&spec).and_then(|ev| {
        let s = ev.series(window, grid_points)?;
        Ok((s.f_max, s.t_max, ev.initial.degenerate))
    });
    let wall = start.elapsed().as_secs_f64();
    match outcome {
        Ok((f, t, d)) => PointResult {
            theta_over_pi,
            axis,
            spec,
            f_max: Some(f),
            t_max: Some(t),
            degenerate: d,
            error: None,
            wall,
        },
        Err(e) => PointResult {
            theta_over_pi,
            axis,
            spec,
            f_max: None,
            t_max: None,
            degenerate: false,
            error: Some(e.to_string()),
            wall,
        },
    }
}

fn skipped_point(theta_over_pi: f64, axis: [f64; 3], spec: ChainSpec, reason: String) -> PointResult {
    PointResult {
        theta_over_pi,
        axis,
        spec,
        f_max: None,
        t_max: None,
        degenerate: false,
        error: Some(reason),
        wall: 0.0,
    }
}

fn with_pool<T: Send>(opts: RunOptions, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.workers {
            b = b.num_threads(n.max(1));
        }
        let pool = b.build().map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = opts;
        Ok(f())
    }
}

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn sort_key(p: &PointResult) -> Vec<f64> {
    let (a, s) = (p.axis, &p.spec);
    vec![p.theta_over_pi, a[0], a[1], a[2], s.n_sites as f64, s.field[0], s.field[1], s.field[2]]
}

fn cmp_keys(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Row-sorted per-spec table with provenance columns.
pub fn point_table(points: &mut [PointResult], cfg: &ResolvedConfig) -> (Table, Vec<f64>) {
    points.sort_by(|a, b| cmp_keys(&sort_key(a), &sort_key(b)));
    let hash = cfg.short_hash();
    let mut t = Table::new(&POINT_COLUMNS);
    for p in points.iter() {
        let s = &p.spec;
        let comp = |x: f64| if x.is_nan() { Cell::Empty } else { Cell::Float(x) };
        let (ax, ay, az) = (comp(p.axis[0]), comp(p.axis[1]), comp(p.axis[2]));
        t.push(vec![
            p.theta_over_pi.into(),
            ax,
            ay,
            az,
            s.n_sites.into(),
            s.j_channel.into(),
            s.j_end.into(),
            s.field[0].into(),
            s.field[1].into(),
            s.field[2].into(),
            s.init.as_str().into(),
            p.f_max.into(),
            p.t_max.into(),
            p.degenerate.into(),
            p.error.clone().into(),
            hash.clone().into(),
            cfg.seed.into(),
            cfg.grid_points.into(),
        ]);
    }
    (t, points.iter().map(|p| p.wall).collect())
}

fn spec_at(base: &ChainSpec, theta_over_pi: f64, axis: [f64; 3]) -> Result<ChainSpec> {
    Ok(base.clone().with_theta(theta_over_pi * PI).with_axis(SpinOrbitAxis::new(axis)?))
}

fn grid_points_for(cfg: &ResolvedConfig, base: &ChainSpec) -> Vec<(f64, [f64; 3], ChainSpec)> {
    let thetas = cfg.theta_over_pi.as_deref().unwrap_or(&[]);
    let axes = cfg.axes.as_deref().unwrap_or(&[]);
    let mut out = Vec::with_capacity(thetas.len() * axes.len());
    for &t in thetas {
        for &a in axes {
            let spec = spec_at(base, t, a).expect("axes are normalized on resolve");
            out.push((t, a, spec));
        }
    }
    out
}

fn expect_kind(cfg: &ResolvedConfig, kind: SweepKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidConfig(format!("expected a {} sweep, got {}", kind.as_str(), cfg.kind.as_str())));
    }
    Ok(())
}

/// `f_max` over θ × axes at the base field. Commensurate angles are part of
/// the resolved θ list.
pub fn run_theta_sweep(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::Theta)?;
    let cells = grid_points_for(cfg, &cfg.base);
    let mut points =
        with_pool(opts, || par_map(&cells, |(t, a, s)| evaluate_point(*t, *a, s.clone(), cfg.window_us, cfg.grid_points)))?;
    let (table, wall_times) = point_table(&mut points, cfg);
    Ok(SweepOutput { config: cfg.clone(), table, extra: Vec::new(), metadata: json!({}), wall_times })
}

/// `f_max` over an `(n_x, n_z)` grid with `n_y = +√(1−n_x²−n_z²)`; points
/// outside the unit disk are kept as rows with an error and no fidelity.
pub fn run_axis_sweep(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::AxisGrid)?;
    let grid = cfg.axis_grid.as_ref().expect("resolved axis grid");
    let thetas = cfg.theta_over_pi.as_deref().expect("resolved θ list");
    let mut cells = Vec::new();
    for &t in thetas {
        for &nx in &grid.nx {
            for &nz in &grid.nz {
                cells.push((t, nx, nz));
            }
        }
    }
    let mut points = with_pool(opts, || {
        par_map(&cells, |&(t, nx, nz)| {
            let rest = 1.0 - nx * nx - nz * nz;
            let base = cfg.base.clone().with_theta(t * PI);
            if rest < -1e-12 {
                let reason = format!("skipped: n_x²+n_z² = {} > 1", format_sig(nx * nx + nz * nz));
                return skipped_point(t, [nx, f64::NAN, nz], base, reason);
            }
            let axis = [nx, rest.max(0.0).sqrt(), nz];
            match SpinOrbitAxis::normalize(axis) {
                Ok(a) => evaluate_point(t, axis, base.with_axis(a), cfg.window_us, cfg.grid_points),
                Err(e) => skipped_point(t, axis, base, e.to_string()),
            }
        })
    })?;
    let (table, wall_times) = point_table(&mut points, cfg);
    Ok(SweepOutput { config: cfg.clone(), table, extra: Vec::new(), metadata: json!({}), wall_times })
}

/// `f_max` versus chain length on the θ = 0 branch and one anisotropic branch.
pub fn run_size_sweep(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::Size)?;
    let sizes = cfg.sizes.as_deref().expect("resolved sizes");
    let aniso = cfg.anisotropic.as_ref().expect("resolved branch");
    let base_axis = cfg.base.axis.components();
    let mut cells = Vec::new();
    for &l in sizes {
        let mut spec = cfg.base.clone();
        spec.n_sites = l;
        cells.push((0.0, base_axis, spec.clone()));
        cells.push((aniso.theta_over_pi, aniso.axis, spec));
    }
    let mut points = with_pool(opts, || {
        par_map(&cells, |(t, a, s)| {
            let spec = spec_at(s, *t, *a).expect("normalized axis");
            evaluate_point(*t, *a, spec, cfg.window_us, cfg.grid_points)
        })
    })?;
    let (table, wall_times) = point_table(&mut points, cfg);
    Ok(SweepOutput { config: cfg.clone(), table, extra: Vec::new(), metadata: json!({}), wall_times })
}

/// The θ sweep repeated per field; the `peaks` table holds the best θ per
/// (field, axis).
pub fn run_field_sweep(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::Field)?;
    let fields = cfg.fields_mhz.as_deref().expect("resolved fields");
    let mut cells = Vec::new();
    for &b in fields {
        cells.extend(grid_points_for(cfg, &cfg.base.clone().with_field(b)));
    }
    let mut points =
        with_pool(opts, || par_map(&cells, |(t, a, s)| evaluate_point(*t, *a, s.clone(), cfg.window_us, cfg.grid_points)))?;
    let (table, wall_times) = point_table(&mut points, cfg);

    let mut peaks = Table::new(&["Bx_mhz", "By_mhz", "Bz_mhz", "axis_x", "axis_y", "axis_z", "peak_theta_over_pi", "f_max", "t_max_us"]);
    let mut keys: Vec<([f64; 3], [f64; 3])> = Vec::new();
    for &b in fields {
        for &a in cfg.axes.as_deref().unwrap_or(&[]) {
            keys.push((b, a));
        }
    }
    keys.sort_by(|x, y| cmp_keys(&[x.0, x.1].concat(), &[y.0, y.1].concat()));
    keys.dedup();
    for (b, a) in keys {
        let best = points
            .iter()
            .filter(|p| p.spec.field == b && p.axis == a)
            .filter_map(|p| p.f_max.map(|f| (p, f)))
            .fold(None::<(&PointResult, f64)>, |acc, (p, f)| match acc {
                Some((_, g)) if g >= f => acc,
                _ => Some((p, f)),
            });
        let (theta, f, t) = match best {
            Some((p, f)) => (Cell::Float(p.theta_over_pi), Cell::Float(f), Cell::from(p.t_max)),
            None => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        peaks.push(vec![b[0].into(), b[1].into(), b[2].into(), a[0].into(), a[1].into(), a[2].into(), theta, f, t]);
    }
    Ok(SweepOutput {
        config: cfg.clone(),
        table,
        extra: vec![("peaks".into(), peaks)],
        metadata: json!({}),
        wall_times,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct TraceMeta {
    label: String,
    f_max: Option<f64>,
    t_max_us: Option<f64>,
    degenerate: bool,
    error: Option<String>,
    /// Effective two-level prediction, for axis ẑ and four sites.
    predicted_frequency_mhz: Option<f64>,
    /// Mean spacing of refined F(t) peaks.
    peak_spacing_frequency_mhz: Option<f64>,
}

/// `F(t)` for each trace on one shared grid (`t_us` plus one column per label).
pub fn run_time_trace(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::TimeTrace)?;
    let traces = cfg.traces.as_deref().expect("resolved traces");
    let times = uniform_grid(cfg.window_us, cfg.grid_points);
    let start = Instant::now();
    let results = with_pool(opts, || {
        par_map(traces, |tr| {
            let spec = spec_at(&cfg.base, tr.theta_over_pi, tr.axis)?.with_field(tr.field_mhz);
            let ev = TransferEvaluator::new(&spec)?;
            let series = ev.series(cfg.window_us, cfg.grid_points)?;
            let predicted = if tr.axis == [0.0, 0.0, 1.0] && spec.n_sites == 4 {
                let jc = rotation_exchange(spec.j_channel, &spec.axis, spec.theta)?;
                let je = rotation_exchange(spec.j_end, &spec.axis, spec.theta)?;
                van_vleck_effective(&jc, &je).ok().map(|v| v.predicted_frequency * spec.phase.factor() / (2.0 * PI))
            } else {
                None
            };
            let spacing = ev.peak_spacing_frequency(&series);
            Ok::<_, Error>((series, ev.initial.degenerate, predicted, spacing))
        })
    })?;
    let mut cols = vec!["t_us".to_string()];
    cols.extend(traces.iter().map(|t| t.label.clone()));
    let mut table = Table { columns: cols, rows: Vec::new() };
    let mut meta = Vec::new();
    for (tr, r) in traces.iter().zip(&results) {
        meta.push(match r {
            Ok((s, d, p, sp)) => TraceMeta {
                label: tr.label.clone(),
                f_max: Some(s.f_max),
                t_max_us: Some(s.t_max),
                degenerate: *d,
                error: None,
                predicted_frequency_mhz: *p,
                peak_spacing_frequency_mhz: *sp,
            },
            Err(e) => TraceMeta {
                label: tr.label.clone(),
                f_max: None,
                t_max_us: None,
                degenerate: false,
                error: Some(e.to_string()),
                predicted_frequency_mhz: None,
                peak_spacing_frequency_mhz: None,
            },
        });
    }
    for (i, &t) in times.iter().enumerate() {
        let mut row = vec![Cell::Float(t)];
        row.extend(results.iter().map(|r| r.as_ref().map_or(Cell::Empty, |(s, ..)| Cell::Float(s.values[i]))));
        table.push(row);
    }
    let per_row = start.elapsed().as_secs_f64() / times.len().max(1) as f64;
    Ok(SweepOutput {
        config: cfg.clone(),
        wall_times: vec![per_row; table.len()],
        table,
        extra: Vec::new(),
        metadata: json!({ "traces": meta }),
    })
}

/// Disorder-averaged fidelity per (kind, targets, strength): a summary table
/// and a `curves` table of mean `F(t)`.
pub fn run_noise_sweep(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    expect_kind(cfg, SweepKind::Noise)?;
    let ng = cfg.noise.as_ref().expect("resolved noise grid");
    let mut cells = Vec::new();
    for &k in &ng.kinds {
        for &tg in &ng.targets {
            let mut strengths = ng.strengths.clone();
            strengths.sort_by(f64::total_cmp);
            for s in strengths {
                let m = NoiseModel::new(k, s, cfg.seed)
                    .with_realizations(ng.realizations)
                    .with_distribution(ng.distribution)
                    .with_targets(tg);
                cells.push(m);
            }
        }
    }
    let results = with_pool(opts, || {
        cells
            .iter()
            .map(|m| {
                let t0 = Instant::now();
                let r = disorder_averaged_fidelity(&cfg.base, m, cfg.window_us, cfg.grid_points);
                (r, t0.elapsed().as_secs_f64())
            })
            .collect::<Vec<_>>()
    })?;
    let hash = cfg.short_hash();
    let mut summary = Table::new(&[
        "kind",
        "targets",
        "strength",
        "distribution",
        "realizations",
        "mean_curve_f_max",
        "mean_curve_t_max_us",
        "peak_mean",
        "peak_std",
        "peak_stderr",
        "error",
        "config_hash",
        "seed",
        "grid_points",
    ]);
    let times = uniform_grid(cfg.window_us, cfg.grid_points);
    let mut curve_cols = vec!["t_us".to_string()];
    let mut curves: Vec<Option<&Vec<f64>>> = Vec::new();
    let mut wall_times = Vec::new();
    for (m, (r, wall)) in cells.iter().zip(&results) {
        let dist = serde_json::to_value(m.distribution).expect("enum serializes");
        let common: Vec<Cell> = vec![
            m.kind.as_str().into(),
            m.targets.as_str().into(),
            m.strength.into(),
            dist.as_str().unwrap_or_default().into(),
            m.realizations.into(),
        ];
        let mut row = common;
        match r {
            Ok(a) => row.extend([
                a.mean.f_max.into(),
                a.mean.t_max.into(),
                a.peak_mean.into(),
                a.peak_std.into(),
                a.peak_stderr.into(),
                Cell::Empty,
            ]),
            Err(e) => {
                row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
                row.push(e.to_string().into());
            }
        }
        row.extend([hash.clone().into(), cfg.seed.into(), cfg.grid_points.into()]);
        summary.push(row);
        wall_times.push(*wall);
        curve_cols.push(format!("{}:{}:{}", m.kind.as_str(), m.targets.as_str(), format_sig(m.strength)));
        curves.push(r.as_ref().ok().map(|a| &a.mean.values));
    }
    let mut curve_table = Table { columns: curve_cols, rows: Vec::new() };
    for (i, &t) in times.iter().enumerate() {
        let mut row = vec![Cell::Float(t)];
        row.extend(curves.iter().map(|c| c.map_or(Cell::Empty, |v| Cell::Float(v[i]))));
        curve_table.push(row);
    }
    Ok(SweepOutput {
        config: cfg.clone(),
        table: summary,
        extra: vec![("curves".into(), curve_table)],
        metadata: json!({}),
        wall_times,
    })
}

/// Dispatches on the resolved sweep kind.
pub fn run(cfg: &ResolvedConfig, opts: RunOptions) -> Result<SweepOutput> {
    match cfg.kind {
        SweepKind::Theta => run_theta_sweep(cfg, opts),
        SweepKind::AxisGrid => run_axis_sweep(cfg, opts),
        SweepKind::Size => run_size_sweep(cfg, opts),
        SweepKind::Field => run_field_sweep(cfg, opts),
        SweepKind::Noise => run_noise_sweep(cfg, opts),
        SweepKind::TimeTrace => run_time_trace(cfg, opts),
    }
}

/// Writes the main table, any secondary tables, the `.meta.json` provenance
/// record and a `.timing.json` record. Everything except the timing file is
/// byte-identical across reruns of the same resolved config.
pub fn emit_results(out: &SweepOutput, format: OutputFormat, path: &Path) -> Result<()> {
    table::write_file(path, |w| out.table.write(format, w))?;
    let ext = format.extension();
    let mut extra_files = Vec::new();
    for (tag, t) in &out.extra {
        let p = sibling_path(path, tag, ext);
        table::write_file(&p, |w| t.write(format, w))?;
        extra_files.push(p.file_name().map(|n| n.to_string_lossy().into_owned()));
    }
    let meta = json!({
        "tool": "spinbus",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": out.config.kind.as_str(),
        "format": ext,
        "config_hash": out.config.hash(),
        "seed": out.config.seed,
        "columns": out.table.columns,
        "rows": out.table.len(),
        "extra_files": extra_files,
        "config": out.config.to_json(),
        "results": out.metadata,
    });
    table::write_file(&sibling_path(path, "meta", "json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &meta).map_err(|e| Error::Io(e.to_string()))?;
        use std::io::Write;
        writeln!(w)?;
        Ok(())
    })?;
    let timing = json!({ "row_seconds": out.wall_times, "total_seconds": out.wall_times.iter().sum::<f64>() });
    table::write_file(&sibling_path(path, "timing", "json"), |w| {
        serde_json::to_writer(&mut *w, &timing).map_err(|e| Error::Io(e.to_string()))
    })
}

/// Δ, Ω, Van Vleck `T`/`G` and transfer times for one spec, as JSON. Pieces
/// that do not apply carry an `error` string instead of values.
pub fn analytics_report(spec: &ChainSpec) -> Result<serde_json::Value> {
    spec.validate()?;
    let err = |e: Error| json!({ "error": e.to_string() });
    let jc = rotation_exchange(spec.j_channel, &spec.axis, spec.theta)?;
    let je = rotation_exchange(spec.j_end, &spec.axis, spec.theta)?;
    let two_spin = match TwoSpinSolution::new(&jc) {
        Ok(s) => json!({
            "omega_mhz": s.omega,
            "transfer_amplitude": [s.transfer_amplitude.re, s.transfer_amplitude.im],
            "phase_rate_mhz": s.global_phase_rate,
        }),
        Err(e) => err(e),
    };
    let afm = match afm_block_phase(&jc) {
        Ok(p) => json!({ "phase": [p.re, p.im], "phi_rad": p.arg() }),
        Err(e) => err(e),
    };
    let doublet = if spec.n_sites == 4 {
        match detuning_delta(spec) {
            Ok(d) => json!({
                "delta_mhz": d.delta,
                "t_eff_mhz": [d.t_eff_re, d.t_eff_im],
                "transfer_time_us": d.transfer_time,
                "degenerate": d.degenerate,
            }),
            Err(e) => err(e),
        }
    } else {
        json!({ "error": "detuning formula applies to four sites" })
    };
    let vv = if spec.n_sites == 4 {
        match van_vleck_effective(&jc, &je) {
            Ok(v) => {
                let p = printed_estimates(&jc, &je);
                json!({
                    "t_mhz": [v.t.re, v.t.im],
                    "g_diag_mhz": v.g_diag,
                    "predicted_frequency_mhz": v.predicted_frequency,
                    "printed_t_mhz": [p.t.re, p.t.im],
                    "printed_g11_mhz": p.g11,
                })
            }
            Err(e) => err(e),
        }
    } else {
        json!({ "error": "effective model is built for four sites" })
    };
    let tstar = match doublet_transfer_time(spec) {
        Ok(t) => json!(t),
        Err(e) => err(e),
    };
    Ok(json!({
        "spec": spec,
        "two_spin": two_spin,
        "afm_block": afm,
        "transport_doublet": doublet,
        "van_vleck": vv,
        "doublet_transfer_time_us": tstar,
    }))
}
