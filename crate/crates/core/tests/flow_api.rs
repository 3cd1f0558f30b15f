use std::f64::consts::PI;

use morse_flow::assembly::assemble;
use morse_flow::eigen::smallest_eigenpairs;
use morse_flow::flow::{run_sweep, SweepConfig};
use morse_flow::operators::{cmc_cylinder_stability, make_operator, ConstraintMode, OperatorKind};
use morse_flow::surface::{build_surface, morse_function, sublevel_domain, MorseOptions, SurfaceKind};

#[test]
fn volume_constrained_sweep_is_monotone_and_consistent() {
    let s = build_surface(SurfaceKind::Rectangle, 16, &[1.0, 1.0]).unwrap();
    let (h, catalog) = morse_function(&s, s.nearest_vertex([0.5, 0.5]), MorseOptions::default()).unwrap();
    let spec = make_operator(OperatorKind::ShiftedLaplacian { c0: 60.0 }, &s)
        .unwrap()
        .with_constraint(ConstraintMode::VolumeConstrained);
    let config = SweepConfig { base_samples: 32, refine_depth: 4, ..SweepConfig::new(0.02, h.max() * 1.000001, 5) };
    let report = run_sweep(&s, &h, &catalog, &spec, &config).unwrap();
    assert!(report.monotonicity_violations.is_empty());
    assert_eq!(report.unconverged_samples, 0);
    assert!(report.crossings.iter().all(|c| c.refined));
    assert_eq!(report.index_direct, report.index_summed);

    // a codimension-one constraint lowers the index by at most one; the
    // ground state has nonzero mean, so one negative direction is lost
    let dirichlet = make_operator(OperatorKind::ShiftedLaplacian { c0: 60.0 }, &s).unwrap();
    let free = run_sweep(&s, &h, &catalog, &dirichlet, &config).unwrap();
    assert_eq!(free.index_direct, Some(3));
    assert_eq!(report.index_direct, Some(2));
}

#[test]
fn cmc_cylinder_whole_surface_index() {
    let r = 1.0 / (2.0 * PI);
    let s = build_surface(SurfaceKind::Cylinder, 24, &[1.0, 1.3]).unwrap();
    let spec = cmc_cylinder_stability(r, &s).unwrap();
    let (h, _) = morse_function(&s, s.nearest_vertex([0.5, 0.65]), MorseOptions::default()).unwrap();
    let d = sublevel_domain(&s, &h, h.max() + 1.0).unwrap();
    let sys = assemble(&s, &d, &spec).unwrap();
    let result = smallest_eigenpairs(&sys, 4, 1e-10, 3).unwrap();
    // -Δ - 1/r² on the cylinder of circumference 1 and height 1.3:
    // (2π j)² + (π m / 1.3)² - (2π)², j = 0 and j = ±1 with m = 1, 2
    let mut exact: Vec<f64> = Vec::new();
    for j in -3i32..=3 {
        for m in 1..6 {
            exact.push((2.0 * PI * j as f64).powi(2) + (PI * m as f64 / 1.3).powi(2) - (2.0 * PI).powi(2));
        }
    }
    exact.sort_by(f64::total_cmp);
    let negative = exact.iter().filter(|&&l| l < 0.0).count();
    assert_eq!(negative, 2);
    let computed = result.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    assert_eq!(computed, negative);
    for (l, e) in result.eigenvalues.iter().zip(&exact).take(2) {
        assert!((l - e).abs() < 0.05 * e.abs(), "{l} vs {e}");
    }
}
