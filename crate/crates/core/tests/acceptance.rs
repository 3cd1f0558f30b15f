//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use morse_flow::app;
use morse_flow::assembly::{assemble, AssembledSystem};
use morse_flow::config::{DemoName, RunConfig};
use morse_flow::eigen::{minmax_verify, smallest_eigenpairs};
use morse_flow::flow::{run_sweep, SweepConfig};
use morse_flow::operators::{make_operator, OperatorKind};
use morse_flow::sparse::CsrMatrix;
use morse_flow::surface::{
    build_surface, morse_function, sublevel_domain, Filtration, MorseOptions, SurfaceKind, TriangulatedSurface,
};
use morse_flow::trace_lab::{
    build_cutoff, cutoff_constant, cutoff_gradient_bound, decay_experiment, halving_sequence, lipschitz_bound_check,
    mollifier_deviation, mollify_boundary, GraphCase, LipschitzTriple,
};

type Outcome = (bool, String);

/// First positive zero of `J_0` by bisection on its power series.
fn bessel_j0_first_zero() -> f64 {
    let j0 = |x: f64| {
        let q = -x * x / 4.0;
        let (mut term, mut sum) = (1.0, 1.0);
        for m in 1..60 {
            term *= q / (m * m) as f64;
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if j0(a) * j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Dirichlet eigenvalues `π²(m² + n²)` of the unit square, ascending.
fn square_spectrum(count: usize) -> Vec<f64> {
    let mut values: Vec<f64> = (1..40u32)
        .flat_map(|m| (1..40u32).map(move |n| PI * PI * f64::from(m * m + n * n)))
        .collect();
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    values
}

/// `#{(m, n) >= 1 : π²(m² + n²) < c0}`.
fn square_count_below(c0: f64) -> usize {
    (1..100u32)
        .flat_map(|m| (1..100u32).map(move |n| PI * PI * f64::from(m * m + n * n)))
        .filter(|&l| l < c0)
        .count()
}

fn whole_surface_system(surface: &TriangulatedSurface, center: [f64; 2], kind: OperatorKind) -> AssembledSystem {
    let (h, _) = morse_function(surface, surface.nearest_vertex(center), MorseOptions::default()).unwrap();
    let domain = sublevel_domain(surface, &h, h.max() + 1.0).unwrap();
    let spec = make_operator(kind, surface).unwrap();
    assemble(surface, &domain, &spec).unwrap()
}

fn analytic_spectrum() -> Outcome {
    let limit = Duration::from_secs(10);
    let start = Instant::now();
    let square = build_surface(SurfaceKind::Rectangle, 64, &[1.0, 1.0]).unwrap();
    let sys = whole_surface_system(&square, [0.5, 0.5], OperatorKind::Laplacian);
    let r = smallest_eigenpairs(&sys, 4, 1e-10, 1).unwrap();
    let exact = square_spectrum(4);
    let square_err = r.eigenvalues.iter().zip(&exact).map(|(l, e)| (l - e).abs() / e).fold(0.0, f64::max);
    let square_time = start.elapsed();

    let start = Instant::now();
    let disk = build_surface(SurfaceKind::Disk, 32, &[1.0]).unwrap();
    let sys = whole_surface_system(&disk, [0.0, 0.0], OperatorKind::Laplacian);
    let d = smallest_eigenpairs(&sys, 1, 1e-10, 1).unwrap();
    let j = bessel_j0_first_zero();
    let disk_exact = j * j;
    let disk_err = (d.eigenvalues[0] - disk_exact).abs() / disk_exact;
    let disk_time = start.elapsed();

    (
        r.eigenvalues.len() == 4
            && square_err < 0.01
            && disk_err < 0.02
            && (disk_exact - 5.7832).abs() < 1e-4
            && square_time < limit
            && disk_time < limit,
        format!(
            "square res 64 λ1..4 = {:.3?}, max rel err {square_err:.2e} in {square_time:.1?}; \
             disk λ1 = {:.4} vs j01² = {disk_exact:.4}, rel err {disk_err:.2e} in {disk_time:.1?}",
            r.eigenvalues, d.eigenvalues[0]
        ),
    )
}

fn minmax() -> Outcome {
    let square = build_surface(SurfaceKind::Rectangle, 32, &[1.0, 1.0]).unwrap();
    let sys = whole_surface_system(&square, [0.5, 0.5], OperatorKind::Laplacian);
    let r = smallest_eigenpairs(&sys, 6, 1e-10, 2).unwrap();
    let report = minmax_verify(&sys, &r, 100, 7, 1e-8);
    (
        report.entries.len() == 6 && report.violations() == 0,
        format!("square res 32, k = 1..{}, 100 subspaces each, {} violations", report.entries.len(), report.violations()),
    )
}

fn index_counts() -> Outcome {
    let square = build_surface(SurfaceKind::Rectangle, 32, &[1.0, 1.0]).unwrap();
    let (h, catalog) = morse_function(&square, square.nearest_vertex([0.5, 0.5]), MorseOptions::default()).unwrap();
    let t_end = h.max() + (h.max() + 1.0) * 1e-9;
    let mut pass = true;
    let mut parts = Vec::new();
    for c0 in [25.0, 50.0, 100.0] {
        let expected = square_count_below(c0);
        let start = Instant::now();
        let spec = make_operator(OperatorKind::ShiftedLaplacian { c0 }, &square).unwrap();
        let report = run_sweep(&square, &h, &catalog, &spec, &SweepConfig::new(0.01, t_end, expected + 2)).unwrap();
        let elapsed = start.elapsed();
        pass &= report.index_direct == Some(expected)
            && report.index_summed == Some(expected)
            && elapsed < Duration::from_secs(120);
        parts.push(format!(
            "c0={c0}: direct {:?}, summed {:?}, enumeration {expected} ({elapsed:.1?})",
            report.index_direct, report.index_summed
        ));
    }
    (pass, parts.join("; "))
}

struct Demos {
    reports: Vec<(DemoName, Value)>,
    identical: bool,
}

fn run_demos(root: &Path) -> Demos {
    let run = |name: DemoName, dir: &Path| -> Value {
        app::run(&RunConfig { output_dir: dir.to_path_buf(), ..RunConfig::demo(name) }).unwrap();
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    };
    let reports: Vec<(DemoName, Value)> = [DemoName::SquareIndex, DemoName::CmcCylinder, DemoName::CylinderRing]
        .into_iter()
        .map(|name| (name, run(name, &root.join(format!("{name:?}")))))
        .collect();
    let again = root.join("square_index_again");
    run(DemoName::SquareIndex, &again);
    let identical = std::fs::read(root.join("SquareIndex/report.json")).unwrap()
        == std::fs::read(again.join("report.json")).unwrap();
    Demos { reports, identical }
}

fn monotonicity(demos: &Demos) -> Outcome {
    let counts: Vec<String> = demos
        .reports
        .iter()
        .map(|(n, r)| format!("{n:?}: {}", r["sweep"]["monotonicity_violations"].as_array().unwrap().len()))
        .collect();
    let pass = demos.reports.iter().all(|(_, r)| r["sweep"]["monotonicity_violations"].as_array().unwrap().is_empty());
    (pass, format!("violations at mono_tol 1e-8: {}", counts.join(", ")))
}

fn topology_and_continuity(demos: &Demos) -> Outcome {
    let (_, r) = demos.reports.iter().find(|(n, _)| *n == DemoName::CylinderRing).unwrap();
    let mut chis: Vec<i64> =
        r["sweep"]["samples"].as_array().unwrap().iter().map(|s| s["euler_characteristic"].as_i64().unwrap()).collect();
    chis.dedup();
    let saddles: Vec<f64> = r["catalog"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "saddle")
        .map(|e| e["value"].as_f64().unwrap())
        .collect();
    let (a, b) = (r["sweep"]["config"]["t_start"].as_f64().unwrap(), r["sweep"]["config"]["t_end"].as_f64().unwrap());
    let saddle_inside = saddles.iter().any(|&s| s > a && s < b);
    let c = &r["continuity"];
    let strict = c["strictly_decreasing_per_branch"].as_bool().unwrap();
    let jumps = |key: &str| -> Vec<String> {
        c[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| format!("{}: {:.3}", l["samples"], l["modulus"].as_f64().unwrap()))
            .collect()
    };
    let window = c["window"].as_array().unwrap();
    let window_has_saddle = window.first().is_some_and(|l| {
        let (wa, wb) = (l["range"][0].as_f64().unwrap(), l["range"][1].as_f64().unwrap());
        saddles.iter().any(|&s| s > wa && s < wb)
    });
    (
        chis == [1, 0] && saddle_inside && strict && window_has_saddle,
        format!(
            "χ sequence {chis:?}; joint mesh/grid refinement max jump whole [{}], saddle window [{}], strictly decreasing per branch: {strict}",
            jumps("whole").join(", "),
            jumps("window").join(", ")
        ),
    )
}

fn single_crossing(demos: &Demos) -> Outcome {
    let per: Vec<String> = demos
        .reports
        .iter()
        .map(|(n, r)| format!("{n:?}: {}", r["sweep"]["crossings_per_branch"]))
        .collect();
    let pass = demos.reports.iter().all(|(_, r)| {
        r["sweep"]["crossings_per_branch"].as_array().unwrap().iter().all(|c| c.as_u64().unwrap() <= 1)
    });
    (pass, format!("crossings per branch {}", per.join(", ")))
}

fn trace_bounds() -> Outcome {
    let start = Instant::now();
    let l0 = 1.0;
    let deltas = halving_sequence(0.1, 4);
    let constant = cutoff_constant(l0);
    let mut pass = true;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for case in [GraphCase::Constant, GraphCase::Linear, GraphCase::Corner] {
        let t = LipschitzTriple::reference(case, 400, l0, 81).unwrap();
        for &delta in &deltas {
            let w = mollify_boundary(&t, delta).unwrap();
            let dev = mollifier_deviation(&t, &w, delta) / delta;
            let slope = lipschitz_bound_check(&w, t.dx()) / l0;
            let eta = build_cutoff(&t, &w, delta).unwrap();
            let grad = cutoff_gradient_bound(&t, &eta) / constant;
            pass &= dev <= 1.0 && slope <= 1.0 + 1e-8 && grad <= 1.0;
            worst = (worst.0.max(dev), worst.1.max(slope), worst.2.max(grad));
        }
    }
    let t = LipschitzTriple::reference(GraphCase::Corner, 400, l0, 81).unwrap();
    let u = t.u().to_vec();
    let (x0, dx) = (t.x()[0], t.dx());
    let zero_trace = move |x: f64, r: f64| r - u[((x - x0) / dx).round() as usize];
    let table = decay_experiment(&t, &zero_trace, &deltas).unwrap();
    let control = decay_experiment(&t, &|_, _| 1.0, &deltas).unwrap();
    let elapsed = start.elapsed();
    pass &= table.strictly_decreasing && control.floor > 0.0 && elapsed < Duration::from_secs(5);
    let norms: Vec<String> = table.rows.iter().map(|r| format!("{:.2e}", r.norm)).collect();
    (
        pass,
        format!(
            "worst ratios: deviation/δ {:.3}, slope/L0 {:.6}, δ²sup|Dη|²/{constant} {:.3}; zero-trace norms [{}]; control floor {:.3} ({elapsed:.1?})",
            worst.0,
            worst.1,
            worst.2,
            norms.join(", "),
            control.floor
        ),
    )
}

fn same_bits(small: &CsrMatrix, large: &CsrMatrix, map: &[usize]) -> bool {
    (0..small.n()).all(|i| (0..small.n()).all(|j| small.get(i, j).to_bits() == large.get(map[i], map[j]).to_bits()))
}

fn galerkin_nesting() -> Outcome {
    let surface = build_surface(SurfaceKind::Cylinder, 16, &[1.0, 1.5]).unwrap();
    let (h, _) = morse_function(&surface, surface.nearest_vertex([0.5, 0.75]), MorseOptions::default()).unwrap();
    let filtration = Filtration::new(&surface, &h).unwrap();
    let spec = make_operator(OperatorKind::ShiftedLaplacian { c0: 20.0 }, &surface).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut pass = true;
    while checked < 10 {
        let a = rng.gen_range(1..filtration.len());
        let b = rng.gen_range(a + 1..=filtration.len());
        let small = assemble(&surface, &filtration.prefix(&surface, a), &spec);
        let Ok(small) = small else { continue };
        let large = assemble(&surface, &filtration.prefix(&surface, b), &spec).unwrap();
        let map: Vec<usize> = small.dof_vertices().iter().map(|&v| large.dof_of_vertex(v).unwrap()).collect();
        pass &= same_bits(small.stiffness(), large.stiffness(), &map)
            && same_bits(small.mass(), large.mass(), &map)
            && same_bits(small.stiffness_grad(), large.stiffness_grad(), &map);
        checked += 1;
    }
    (pass, format!("{checked} random nested pairs, K, M and ∇-stiffness compared bitwise"))
}

fn determinism(demos: &Demos) -> Outcome {
    (demos.identical, "square_index demo run twice: report.json byte-identical".to_string())
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().unwrap();
    let demos = run_demos(root.path());
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 analytic spectrum", analytic_spectrum()),
        ("2 monotonicity", monotonicity(&demos)),
        ("3 min-max", minmax()),
        ("4 index counts", index_counts()),
        ("5 topology change and continuity", topology_and_continuity(&demos)),
        ("6 single crossing", single_crossing(&demos)),
        ("7 trace bounds", trace_bounds()),
        ("8 Galerkin nesting", galerkin_nesting()),
        ("9 determinism", determinism(&demos)),
    ];
    let mut failed = 0;
    for (name, (pass, detail)) in &criteria {
        println!("[{}] criterion {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
