//! Scenario driver behind the command-line interface.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{BasePoint, ConfigError, OperatorConfig, RunConfig, Scenario, SurfaceConfig};
use crate::eigen::EigenOptions;
use crate::flow::{ContinuityLevel, ContinuityReport, FlowError, SweepConfig, SweepEngine, SweepReport};
use crate::operators::{cmc_cylinder_stability, make_operator, OperatorError, OperatorKind, OperatorSpec};
use crate::surface::{
    build_surface, morse_function, stretch_metric, CriticalCatalog, MorseOptions, ScalarField, SurfaceError,
    SurfaceKind, TriangulatedSurface,
};
use crate::trace_lab::{cutoff_constant, decay_experiment, halving_sequence, DecayTable, LipschitzTriple, TraceError};

/// Exit code for configuration and input errors.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numerical failures; reports are still written.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_)
            | AppError::Invalid { .. }
            | AppError::Surface(_)
            | AppError::Operator(_)
            | AppError::Trace(_) => EXIT_VALIDATION,
            AppError::Flow(FlowError::Config(_)) => EXIT_VALIDATION,
            AppError::Flow(_) | AppError::Io(_) | AppError::Json(_) => EXIT_NUMERICAL,
        }
    }
}

/// Result of a completed run; `failures` lists numerical problems found
/// after all outputs were written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            EXIT_NUMERICAL
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub kind: SurfaceKind,
    pub resolution: usize,
    pub dimensions: Vec<f64>,
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
    pub min_edge_length: f64,
    pub stretched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRunReport {
    pub config: RunConfig,
    pub surface: SurfaceSummary,
    pub base_point: usize,
    pub max_h: f64,
    pub catalog: CriticalCatalog,
    pub sweep: SweepReport,
    pub continuity: Option<ContinuityReport>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceBounds {
    pub delta: f64,
    pub mollifier_deviation_ok: bool,
    pub slope_ok: bool,
    pub cutoff_gradient_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRunReport {
    pub config: RunConfig,
    pub cutoff_constant: f64,
    pub bounds: Vec<TraceBounds>,
    pub zero_trace: DecayTable,
    pub control: DecayTable,
    pub failures: Vec<String>,
}

/// The surface described by `config`, with the optional boundary stretch.
pub fn surface_from_config(config: &SurfaceConfig, resolution: usize) -> Result<TriangulatedSurface, AppError> {
    let surface = build_surface(config.kind, resolution, &config.dimensions)?;
    match &config.stretch {
        Some(s) => Ok(stretch_metric(&surface, s.band_width, s.strength)?),
        None => Ok(surface),
    }
}

pub fn operator_from_config(
    config: &RunConfig,
    surface: &TriangulatedSurface,
) -> Result<OperatorSpec, AppError> {
    let op = config.operator.as_ref().ok_or(AppError::Invalid {
        field: "operator",
        message: "required".to_string(),
    })?;
    let spec = match op {
        OperatorConfig::Laplacian => make_operator(OperatorKind::Laplacian, surface)?,
        OperatorConfig::ShiftedLaplacian { c0 } => make_operator(OperatorKind::ShiftedLaplacian { c0: *c0 }, surface)?,
        OperatorConfig::CmcCylinder { radius } => cmc_cylinder_stability(*radius, surface)?,
    };
    Ok(spec.with_constraint(config.constraint))
}

fn resolve_base_point(p0: Option<&BasePoint>, surface: &TriangulatedSurface) -> Result<usize, AppError> {
    match p0 {
        None => Err(AppError::Invalid { field: "p0", message: "required".to_string() }),
        Some(BasePoint::Vertex(v)) => {
            surface.check_vertex(*v).map_err(|e| AppError::Invalid { field: "p0.vertex", message: e.to_string() })?;
            Ok(*v)
        }
        Some(BasePoint::At(at)) => Ok(surface.nearest_vertex(*at)),
    }
}

fn summarize(config: &SurfaceConfig, surface: &TriangulatedSurface, resolution: usize) -> SurfaceSummary {
    SurfaceSummary {
        kind: config.kind,
        resolution,
        dimensions: config.dimensions.clone(),
        vertices: surface.vertex_count(),
        triangles: surface.triangle_count(),
        edges: surface.edge_count(),
        euler_characteristic: surface.euler_characteristic(),
        boundary_loops: surface.boundary_loop_count(),
        min_edge_length: surface.min_edge_length(),
        stretched: config.stretch.is_some(),
    }
}

struct Prepared {
    surface: TriangulatedSurface,
    h: ScalarField,
    catalog: CriticalCatalog,
    spec: OperatorSpec,
    base_point: usize,
}

fn prepare(config: &RunConfig, resolution: usize, base_at: Option<[f64; 2]>) -> Result<Prepared, AppError> {
    let sc = config.surface.as_ref().ok_or(AppError::Invalid { field: "surface", message: "required".to_string() })?;
    let surface = surface_from_config(sc, resolution)?;
    let base_point = match base_at {
        Some(at) => surface.nearest_vertex(at),
        None => resolve_base_point(config.p0.as_ref(), &surface)?,
    };
    let options = MorseOptions { perturbation_scale: config.perturbation_scale, seed: config.seed };
    let (h, catalog) = morse_function(&surface, base_point, options)?;
    let spec = operator_from_config(config, &surface)?;
    Ok(Prepared { surface, h, catalog, spec, base_point })
}

fn allowance(max_h: f64) -> f64 {
    (max_h.abs() + 1.0) * 1e-9
}

fn eigen_options(config: &RunConfig) -> EigenOptions {
    let tol = &config.tolerances;
    EigenOptions { tol: tol.eig_tol, seed: config.seed, cluster_tol: tol.cluster_tol, max_blocks: tol.max_blocks }
}

fn sweep_config(config: &RunConfig, max_h: f64) -> Result<SweepConfig, AppError> {
    let t_start = config.t_start.ok_or(AppError::Invalid { field: "t_start", message: "required".to_string() })?;
    let t_end = config.t_end.unwrap_or(max_h + allowance(max_h));
    if t_end > max_h + 1e3 * allowance(max_h) {
        return Err(AppError::Invalid { field: "t_end", message: format!("{t_end} exceeds max h = {max_h}") });
    }
    if !(t_start < t_end) {
        return Err(AppError::Invalid { field: "t_start", message: format!("{t_start} is not below t_end = {t_end}") });
    }
    Ok(SweepConfig {
        t_start,
        t_end,
        base_samples: config.grid.base_samples,
        refine_depth: config.grid.refine_depth,
        k: config.k,
        eigen: eigen_options(config),
        null_tol: config.tolerances.null_tol,
        mono_tol: config.tolerances.mono_tol,
    })
}

fn sweep_failures(report: &SweepReport) -> Vec<String> {
    let mut failures = Vec::new();
    if report.unconverged_samples > 0 {
        failures.push(format!("{} samples did not converge", report.unconverged_samples));
    }
    for c in report.crossings.iter().filter(|c| !c.refined) {
        failures.push(format!("crossing of branch {} near t = {} was not refined", c.branch, c.t_star));
    }
    failures.extend(report.index_errors.iter().cloned());
    if let (Some(d), Some(s)) = (report.index_direct, report.index_summed) {
        if d != s {
            failures.push(format!("index mismatch: direct {d}, summed {s}"));
        }
    }
    if !report.monotonicity_violations.is_empty() {
        failures.push(format!("{} monotonicity violations", report.monotonicity_violations.len()));
    }
    failures
}

/// Joint refinement: each level rebuilds the mesh and samples a uniform grid.
fn continuity(config: &RunConfig, base_at: [f64; 2], range: (f64, f64)) -> Result<Option<ContinuityReport>, AppError> {
    let Some(cc) = &config.continuity else { return Ok(None) };
    let window = cc.window.map(|[a, b]| (a, b));
    if let Some((a, b)) = window {
        if a < range.0 || b > range.1 {
            return Err(AppError::Invalid { field: "continuity.window", message: "must lie inside the sweep range".to_string() });
        }
    }
    let eigen = eigen_options(config);
    let mut whole = Vec::new();
    let mut windowed = Vec::new();
    for level in &cc.levels {
        let p = prepare(config, level.resolution, Some(base_at))?;
        let engine = SweepEngine::new(&p.surface, &p.h, &p.spec, config.k, eigen)?;
        whole.push(engine.continuity_level(range, level.samples)?);
        if let Some(w) = window {
            windowed.push(engine.continuity_level(w, level.samples)?);
        }
    }
    Ok(Some(ContinuityReport::from_levels(whole, windowed)))
}

fn continuity_failures(report: &ContinuityReport) -> Vec<String> {
    let mut failures = Vec::new();
    if !report.strictly_decreasing_per_branch {
        failures.push("continuity jumps are not strictly decreasing under refinement".to_string());
    }
    let describe = |levels: &[ContinuityLevel]| levels.iter().map(|l| format!("{:.3e}", l.modulus)).collect::<Vec<_>>().join(", ");
    log::info!("continuity modulus: whole [{}], window [{}]", describe(&report.whole), describe(&report.window));
    failures
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, AppError> {
    config.validate()?;
    match config.scenario {
        Scenario::Sweep => run_sweep_scenario(config),
        Scenario::Trace => run_trace_scenario(config),
        Scenario::MeshInfo => {
            let text = mesh_info(config)?;
            println!("{text}");
            Ok(RunOutcome { output_dir: config.output_dir.clone(), files: Vec::new(), failures: Vec::new() })
        }
    }
}

fn run_sweep_scenario(config: &RunConfig) -> Result<RunOutcome, AppError> {
    let sc = config.surface.as_ref().expect("validated");
    let p = prepare(config, sc.resolution, None)?;
    let max_h = p.h.max();
    let sweep = sweep_config(config, max_h)?;
    let engine = SweepEngine::new(&p.surface, &p.h, &p.spec, sweep.k, sweep.eigen)?;
    let report = engine.run(&p.catalog, &sweep)?;
    let base_at = p.surface.positions()[p.base_point];
    let continuity = continuity(config, base_at, (sweep.t_start, sweep.t_end))?;

    let mut failures = sweep_failures(&report);
    if let Some(c) = &continuity {
        failures.extend(continuity_failures(c));
    }
    fs::create_dir_all(&config.output_dir)?;
    let files = vec![
        config.output_dir.join("report.json"),
        config.output_dir.join("samples.csv"),
        config.output_dir.join("lambda_vs_t.svg"),
    ];
    let mut csv = create(&files[1])?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    fs::write(&files[2], lambda_plot(&report))?;
    let full = SweepRunReport {
        config: config.clone(),
        surface: summarize(sc, &p.surface, sc.resolution),
        base_point: p.base_point,
        max_h,
        catalog: p.catalog,
        sweep: report,
        continuity,
        failures: failures.clone(),
    };
    write_json(&files[0], &full)?;
    Ok(RunOutcome { output_dir: config.output_dir.clone(), files, failures })
}

fn run_trace_scenario(config: &RunConfig) -> Result<RunOutcome, AppError> {
    let tc = config.trace.clone().unwrap_or_default();
    let triple = LipschitzTriple::reference(tc.case, tc.grid_points, tc.l0, tc.r_resolution)?;
    let deltas = halving_sequence(tc.delta0, tc.halvings);
    let u = triple.u().to_vec();
    let (x0, dx) = (triple.x()[0], triple.dx());
    // distance above the bottom graph: zero trace, nonzero inside
    let zero_trace = move |x: f64, r: f64| r - u[((x - x0) / dx).round() as usize];
    let table = decay_experiment(&triple, &zero_trace, &deltas)?;
    let control = decay_experiment(&triple, &|_, _| 1.0, &deltas)?;

    let c = cutoff_constant(tc.l0);
    let bounds: Vec<TraceBounds> = table
        .rows
        .iter()
        .map(|r| TraceBounds {
            delta: r.delta,
            mollifier_deviation_ok: r.mollifier_deviation <= r.delta,
            slope_ok: r.max_slope <= tc.l0 * (1.0 + 1e-8),
            cutoff_gradient_ok: r.sup_grad_eta_sq_times_delta_sq <= c,
        })
        .collect();
    let mut failures = Vec::new();
    for b in &bounds {
        if !(b.mollifier_deviation_ok && b.slope_ok && b.cutoff_gradient_ok) {
            failures.push(format!("bound violated at delta = {}", b.delta));
        }
    }
    if !table.strictly_decreasing {
        failures.push("zero-trace norms are not strictly decreasing".to_string());
    }
    if !(control.floor > 0.0) {
        failures.push("control field norm vanished".to_string());
    }

    fs::create_dir_all(&config.output_dir)?;
    let files = vec![
        config.output_dir.join("decay.csv"),
        config.output_dir.join("decay_control.csv"),
        config.output_dir.join("trace_report.json"),
    ];
    for (path, t) in files.iter().zip([&table, &control]) {
        let mut out = create(path)?;
        t.write_csv(&mut out)?;
        out.flush()?;
    }
    let report = TraceRunReport {
        config: config.clone(),
        cutoff_constant: c,
        bounds,
        zero_trace: table,
        control,
        failures: failures.clone(),
    };
    write_json(&files[2], &report)?;
    Ok(RunOutcome { output_dir: config.output_dir.clone(), files, failures })
}

#[derive(Serialize)]
struct MeshInfo {
    surface: SurfaceSummary,
    base_point: Option<usize>,
    max_h: Option<f64>,
    catalog: Option<CriticalCatalog>,
    morse_alternating_sum: Option<i64>,
}

/// JSON description of the surface and, when `p0` is set, of its Morse function.
pub fn mesh_info(config: &RunConfig) -> Result<String, AppError> {
    let sc = config.surface.as_ref().ok_or(AppError::Invalid { field: "surface", message: "required".to_string() })?;
    let surface = surface_from_config(sc, sc.resolution)?;
    let mut info = MeshInfo {
        surface: summarize(sc, &surface, sc.resolution),
        base_point: None,
        max_h: None,
        catalog: None,
        morse_alternating_sum: None,
    };
    if config.p0.is_some() {
        let p0 = resolve_base_point(config.p0.as_ref(), &surface)?;
        let options = MorseOptions { perturbation_scale: config.perturbation_scale, seed: config.seed };
        let (h, catalog) = morse_function(&surface, p0, options)?;
        info.base_point = Some(p0);
        info.max_h = Some(h.max());
        info.morse_alternating_sum = Some(catalog.alternating_sum());
        info.catalog = Some(catalog);
    }
    Ok(serde_json::to_string_pretty(&info)?)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Branches `λ_k(t)` as polylines. The y-range is clipped to the lower 90%
/// of all values so that the blow-up on small domains does not flatten
/// the picture.
pub fn lambda_plot(report: &SweepReport) -> String {
    let (w, h, margin) = (800.0, 500.0, 60.0);
    let (t0, t1) = (report.config.t_start, report.config.t_end);
    let mut all: Vec<f64> = report.samples.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut y0 = all.first().copied().unwrap_or(-1.0).min(0.0);
    let mut y1 = if all.is_empty() { 1.0 } else { all[(all.len() - 1) * 9 / 10].max(0.0) };
    if y1 - y0 < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |t: f64| margin + (t - t0) / (t1 - t0) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y.clamp(y0, y1) - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    for &c in &report.critical_values {
        let x = px(c);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{margin}" x2="{x:.2}" y2="{:.2}" stroke="grey" stroke-dasharray="4 3"/>"#,
            h - margin
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let y = py(0.0);
        let _ = writeln!(svg, r#"<line x1="{margin}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#, w - margin);
    }
    let k = report.config.k;
    for branch in 0..k {
        let points: Vec<String> = report
            .samples
            .iter()
            .filter_map(|s| s.eigenvalues.get(branch).map(|&l| format!("{:.2},{:.2}", px(s.t), py(l))))
            .collect();
        if points.is_empty() {
            continue;
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[branch % PALETTE.len()],
            points.join(" ")
        );
    }
    for c in report.crossings.iter().filter(|c| c.refined) {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#, px(c.t_star), py(0.0));
    }
    let text = |svg: &mut String, x: f64, y: f64, anchor: &str, s: String| {
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{s}</text>"#);
    };
    text(&mut svg, margin, h - margin + 18.0, "start", format!("{t0:.4}"));
    text(&mut svg, w - margin, h - margin + 18.0, "end", format!("{t1:.4}"));
    text(&mut svg, w / 2.0, h - 15.0, "middle", "t".to_string());
    text(&mut svg, margin - 6.0, py(y1) + 4.0, "end", format!("{y1:.3}"));
    text(&mut svg, margin - 6.0, py(y0) + 4.0, "end", format!("{y0:.3}"));
    text(&mut svg, 15.0, h / 2.0, "middle", "λ".to_string());
    svg.push_str("</svg>\n");
    svg
}
