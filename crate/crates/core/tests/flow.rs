mod common;

use common::{conformal_sine, grid2, metric};
use lambda_lab::error::LabError;
use lambda_lab::flow::{
    decay_fit, deturck_step, diagnose, energy_distance_check, exponential_decay_check, flow_step,
    gauge_soundness, lojasiewicz_scan, max_time_step, run_flow, stability_experiment,
    theorem_a_scan, FlowConfig, Gauge, LojasiewiczConfig, TheoremAConfig,
};
use lambda_lab::manifold::MetricField;
use lambda_lab::par::Execution;
use lambda_lab::sample::{Perturbation, ScalarMode};

fn cu(amp: f64) -> Perturbation {
    Perturbation {
        conformal: vec![ScalarMode {
            k: vec![1, 0],
            amp,
            phase: 0.0,
        }],
        ..Default::default()
    }
}

#[test]
fn flat_metrics_are_fixed_points() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    for g in [
        flat.clone(),
        MetricField::constant(&grid, &[[1.3, 0.2, 0.0], [0.2, 0.8, 0.0], [0.0; 3]]).unwrap(),
    ] {
        let next = deturck_step(&g, &flat, 0.5 * max_time_step(&g)).unwrap();
        assert!(next.tensor().sub(g.tensor()).max_abs() < 1e-14);
    }
    assert!(matches!(
        flow_step(&flat, 2.0 * max_time_step(&flat), Gauge::DeTurck, 0.0),
        Err(LabError::Precondition(_))
    ));
}

#[test]
fn lambda_increases_strictly_along_conformal_start() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let mut g = conformal_sine(&grid, 0.05);
    let dt = max_time_step(&g);
    let mut last = diagnose(&g, None).unwrap().lambda;
    for _ in 0..10 {
        for _ in 0..10 {
            g = deturck_step(&g, &flat, dt).unwrap();
        }
        let l = diagnose(&g, None).unwrap().lambda;
        assert!(l > last, "{l} after {last}");
        last = l;
    }
}

#[test]
fn flat_start_converges_immediately() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let rec = run_flow(&flat, &flat, &FlowConfig::default()).unwrap();
    assert!(rec.converged());
    assert_eq!(rec.rows.len(), 1);
    assert!(rec.rows[0].lambda.abs() < 1e-12);
    let ed = energy_distance_check(&rec, 1.0);
    assert!(ed.holds && ed.worst_margin == 0.0);
}

#[test]
fn conformal_mode_run_verifies_the_flow_identities() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let g0 = metric(&grid, cu(0.02));
    let rec = run_flow(&g0, &flat, &FlowConfig::default()).unwrap();
    assert!(rec.converged(), "{:?}", rec.status);
    assert!(rec.final_row().ricci_l2 < 1e-8);
    assert!(rec.monotone, "worst decrease {:e}", rec.worst_decrease);
    assert!(
        rec.identity_error.unwrap() <= 1e-3,
        "{:?}",
        rec.identity_error
    );
    assert!(rec.perelman_margin.unwrap() >= -1e-8);
    assert!(
        rec.curvature_growth <= 1.0 + 1e-9,
        "sup |Rm| grew by {}",
        rec.curvature_growth
    );
    // Linearized DeTurck flow damps the |k| = 1 mode like e^{-t}; λ is quadratic.
    let fit = decay_fit(&rec).unwrap();
    assert!(
        fit.r_squared >= 0.99 && (fit.rate - 2.0).abs() < 1e-2,
        "{fit:?}"
    );

    let scan = lojasiewicz_scan(
        &LojasiewiczConfig {
            res: 16,
            samples: 100,
            ..Default::default()
        },
        Execution::Parallel,
    )
    .unwrap();
    let ed = energy_distance_check(&rec, scan.c1c2());
    assert!(ed.holds, "{ed:?}");
    assert!(exponential_decay_check(&rec, scan.c1()).unwrap() >= 0.0);

    // byte-identical CSV on a rerun
    let mut a = Vec::new();
    rec.write_csv(&mut a).unwrap();
    let mut b = Vec::new();
    run_flow(&g0, &flat, &FlowConfig::default())
        .unwrap()
        .write_csv(&mut b)
        .unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8(a)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "t,lambda,ricci_l2,gradient_l2f,distance_c0,distance_c2,lojasiewicz_ratio,transversality_ratio,dlambda_dt,twice_gradient_sq,curvature_sup"
    );
}

#[test]
fn stability_limits_lie_in_the_flat_family() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let shifted = Perturbation {
        constant: Some(vec![vec![0.5, 0.2], vec![0.2, -0.5]]),
        ..cu(1.0)
    };
    let report = stability_experiment(
        &flat,
        &[0.0, 0.02],
        &[cu(1.0), shifted],
        &FlowConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    assert!(report.all_converged, "{report:?}");
    assert_eq!(report.largest_converged_amplitude, Some(0.02));
    let moved = &report.cases[3];
    assert!(moved.flat_distance < 1e-6);
    // the constant trace-free part is a fixed direction: the limit is a different flat metric
    assert!((moved.background_distance - 0.01).abs() < 1e-3, "{moved:?}");
    for c in &report.cases[2..] {
        assert!(c.decay_rate.unwrap() > 0.0);
    }
}

#[test]
fn leaving_the_neighborhood_is_an_error() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let cfg = FlowConfig {
        divergence_radius: 0.01,
        ..FlowConfig::default()
    };
    assert!(matches!(
        run_flow(&metric(&grid, cu(0.05)), &flat, &cfg),
        Err(LabError::Divergence { .. })
    ));
}

#[test]
fn gauges_agree_on_lambda() {
    let grid = grid2(16);
    let flat = MetricField::flat(&grid);
    let s = gauge_soundness(&conformal_sine(&grid, 0.05), &flat, 0.5, 5).unwrap();
    assert!(s.max_difference <= 1e-4, "{s:?}");
}

#[test]
fn scans_are_deterministic_and_positive() {
    let cfg = LojasiewiczConfig {
        res: 16,
        samples: 60,
        ..Default::default()
    };
    let a = lojasiewicz_scan(&cfg, Execution::Parallel).unwrap();
    let b = lojasiewicz_scan(&cfg, Execution::Sequential).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.c_b > 0.0 && a.c_c > 0.0 && a.c_c <= 1.0);
    assert_eq!(a.ordering_violations, 0);
    assert!(a.max_orthogonality <= 1e-6);
    // every fifth sample is a flat-family member, excluded as 0/0
    assert!(a.excluded >= 12);
    let json: serde_json::Value = serde_json::to_value(&a).unwrap();
    for key in ["c_B", "c_C", "count", "seed", "excluded"] {
        assert!(json.get(key).is_some(), "{key}");
    }

    let t = theorem_a_scan(
        &TheoremAConfig {
            res: 16,
            samples: 40,
            flat_samples: 5,
            ..Default::default()
        },
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(t.upper_violations, 0);
    assert_eq!(t.strict_violations, 0);
    assert!(t.strict_checked > 0);
    assert!(t.flat_max_abs <= 1e-10 && !t.positive_found);
}
