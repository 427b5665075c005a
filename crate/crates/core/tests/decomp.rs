mod common;

use std::sync::Arc;

use common::{conformal_sine, cu_mode, grid2};
use lambda_lab::decomp::{
    conformal_adjoint, conformal_op, gauge_split, normal_rayleigh_quotient, normal_rayleigh_scan,
    project_normal, sector_spectrum, tt_split, Sector,
};
use lambda_lab::manifold::norms::inner;
use lambda_lab::manifold::{
    divergence, divergence_adjoint, lichnerowicz, norm, MetricField, NormKind, PeriodicGrid,
    ScalarField, Scheme, SymTensorField, VectorField,
};
use lambda_lab::par::Execution;
use lambda_lab::sample::{random_perturbation, Family};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn l2(g: &MetricField, h: &SymTensorField) -> f64 {
    norm(g, h, NormKind::L2, None).unwrap()
}

fn random_h(grid: &Arc<PeriodicGrid>, seed: u64) -> SymTensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_perturbation(&mut rng, grid.dim(), Family::Mixed)
        .evaluate(grid)
        .unwrap()
}

fn skewed(grid: &Arc<PeriodicGrid>) -> MetricField {
    MetricField::constant(grid, &[[1.2, 0.3, 0.0], [0.3, 0.9, 0.0], [0.0, 0.0, 1.0]]).unwrap()
}

#[test]
fn divergence_free_input_is_its_own_gauge_part() {
    let grid = grid2(16);
    let g = MetricField::flat(&grid);
    let h = SymTensorField::constant(&grid, &[[0.4, 0.1, 0.0], [0.1, -0.2, 0.0], [0.0; 3]]);
    let s = gauge_split(&g, &h).unwrap();
    assert!(s.x.max_abs() < 1e-14);
    assert!(l2(&g, &s.h0.sub(&h)) < 1e-14);
}

#[test]
fn pure_gauge_has_no_divergence_free_part() {
    let grid = grid2(24);
    let g = conformal_sine(&grid, 0.1);
    let x0 = VectorField::sample(&grid, |x, k| {
        if k == 0 {
            (x[1] + 0.3).sin()
        } else {
            (x[0] - x[1]).cos()
        }
    });
    let h = divergence_adjoint(&g, &x0);
    let s = gauge_split(&g, &h).unwrap();
    assert!(
        l2(&g, &s.h0) <= 1e-8 * l2(&g, &h),
        "‖h₀‖ = {:e}",
        l2(&g, &s.h0)
    );
}

#[test]
fn random_split_reassembles_and_is_orthogonal() {
    let grid = grid2(24);
    let g = conformal_sine(&grid, 0.1);
    let h = random_h(&grid, 5);
    let s = gauge_split(&g, &h).unwrap();
    let hn = l2(&g, &h);
    let h1 = norm(&g, &h, NormKind::H1, None).unwrap();
    assert!(s.reassembly <= 1e-13 * hn, "reassembly {:e}", s.reassembly);
    assert!(s.div_h0 <= 1e-8 * h1, "div h₀ {:e}", s.div_h0);
    assert!(
        s.orthogonality.abs() <= 1e-8 * hn * hn,
        "orthogonality {:e}",
        s.orthogonality
    );
    assert!(
        l2(&g, &divergence_adjoint(&g, &s.x)) > 1e-2 * hn,
        "sample should have a gauge part"
    );
    // idempotence
    let again = gauge_split(&g, &s.h0).unwrap();
    assert!(l2(&g, &again.h0.sub(&s.h0)) <= 1e-8 * hn);
    assert!(l2(&g, &divergence_adjoint(&g, &again.x)) <= 1e-8 * hn);
}

#[test]
fn conformal_operator_examples() {
    let grid = grid2(16);
    let g = MetricField::flat(&grid);
    assert!(conformal_op(&g, &ScalarField::constant(&grid, 2.5)).max_abs() < 1e-13);
    let cu = conformal_op(&g, &ScalarField::sample(&grid, |x| x[0].cos()));
    assert!(cu
        .ij(0, 0)
        .iter()
        .chain(cu.ij(0, 1))
        .all(|v| v.abs() < 1e-12));
    let expect = grid.sample(|x| -x[0].cos());
    assert!(cu
        .ij(1, 1)
        .iter()
        .zip(&expect)
        .all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(cu.sub(&cu_mode(&grid)).max_abs() < 1e-12);

    let u = ScalarField::sample(&grid, |x| {
        (2.0 * x[0] + x[1]).sin() + 0.3 * (x[1] - 1.0).cos()
    });
    let div = norm(
        &g,
        &divergence(&g, &conformal_op(&g, &u)),
        NormKind::L2,
        None,
    )
    .unwrap();
    // ‖u‖_{H²} ≤ ‖u‖_{H³}, so this is at least as strict as the H³ bound.
    assert!(
        div <= 1e-6 * norm(&g, &u, NormKind::H2, None).unwrap(),
        "div Cu = {div:e}"
    );
}

#[test]
fn conformal_adjoint_is_the_l2_adjoint() {
    let grid = grid2(16);
    let g = skewed(&grid);
    let u = ScalarField::sample(&grid, |x| (x[0] - 2.0 * x[1]).cos() + 0.2 * x[1].sin());
    let k = random_h(&grid, 11);
    let lhs = inner(&g, &conformal_op(&g, &u), &k, None);
    let rhs = inner(&g, &u, &conformal_adjoint(&g, &k), None);
    assert!(
        (lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0),
        "{lhs} vs {rhs}"
    );
}

#[test]
fn tt_split_examples() {
    let grid = grid2(16);
    let g = MetricField::flat(&grid);

    let s = tt_split(&g, &g.tensor().scaled(3.0)).unwrap();
    assert!((s.scale - 3.0).abs() < 1e-14);
    assert!(s.conformal_part.max_abs() < 1e-12 && s.tt_part.max_abs() < 1e-12);

    let cu = cu_mode(&grid);
    let s = tt_split(&g, &cu).unwrap();
    assert!(s.scale.abs() < 1e-14);
    assert!(s.conformal_part.sub(&cu).max_abs() < 1e-10);
    assert!(s.tt_part.max_abs() < 1e-10);
    assert!(
        s.u.values().iter().sum::<f64>().abs() < 1e-10,
        "generator is mean-zero"
    );

    let k = SymTensorField::constant(&grid, &[[0.5, -0.2, 0.0], [-0.2, -0.5, 0.0], [0.0; 3]]);
    let s = tt_split(&g, &k).unwrap();
    assert!(s.tt_part.sub(&k).max_abs() < 1e-13);
    assert!(s.kernel_part.sub(&k).max_abs() < 1e-13);
    assert!(l2(&g, &lichnerowicz(&g, &k)) < 1e-12);
}

#[test]
fn tt_split_of_random_divergence_free_tensor() {
    let grid3 = Arc::new(PeriodicGrid::cube(3, 8, Scheme::Spectral).unwrap());
    for g in [
        MetricField::flat(&grid2(24)),
        skewed(&grid2(24)),
        MetricField::flat(&grid3),
    ] {
        let grid = g.grid().clone();
        let h0 = gauge_split(&g, &random_h(&grid, 3).add(&g.tensor().scaled(0.4)))
            .unwrap()
            .h0;
        let s = tt_split(&g, &h0).unwrap();
        let hn = l2(&g, &h0);
        assert!(s.norms.reassembly <= 1e-13 * hn);
        assert!(
            s.norms.orthogonality <= 1e-8,
            "orthogonality {:e}",
            s.norms.orthogonality
        );
        assert!(s.norms.tt_divergence <= 1e-8 * hn && s.norms.tt_trace <= 1e-8 * hn);
        assert!(s.norms.kernel_residual <= 1e-10 * hn);
        for part in [&s.conformal_part, &s.tt_part] {
            assert!(
                l2(&g, part) > 1e-3 * hn,
                "sample should populate every sector"
            );
        }
        // Δ^L preserves each sector
        let lc = tt_split(&g, &lichnerowicz(&g, &s.conformal_part)).unwrap();
        assert!(l2(&g, &lc.tt_part) <= 1e-8 * l2(&g, &lc.conformal_part) && lc.scale.abs() < 1e-12);
        // On T² every TT tensor is constant (and killed by Δ^L); T³ has more.
        if grid.dim() == 3 {
            let lt = tt_split(&g, &lichnerowicz(&g, &s.tt_part)).unwrap();
            assert!(l2(&g, &lt.tt_part) > 1e-3 * hn);
            assert!(
                l2(&g, &lt.conformal_part) <= 1e-8 * l2(&g, &lt.tt_part) && lt.scale.abs() < 1e-12
            );
        }
    }
}

#[test]
fn tt_split_rejects_bad_input() {
    let grid = grid2(16);
    assert!(tt_split(&conformal_sine(&grid, 0.1), &cu_mode(&grid)).is_err());
    let g = MetricField::flat(&grid);
    let gauge = divergence_adjoint(
        &g,
        &VectorField::sample(&grid, |x, k| if k == 0 { x[1].sin() } else { 0.0 }),
    );
    assert!(tt_split(&g, &gauge).is_err());
    assert!(project_normal(&g, &gauge).is_err());
}

#[test]
fn flat_square_torus_spectrum() {
    let grid = grid2(16);
    let g = MetricField::flat(&grid);
    let tt = sector_spectrum(&g, Sector::Tt, Execution::Parallel).unwrap();
    assert_eq!(tt.kernel_dimension(1e-8), 2);
    assert!(tt.max().unwrap() <= 1e-8);
    // Δ^L is the flat Laplacian componentwise: all eigenvalues are −|k|².
    let all = sector_spectrum(&g, Sector::All, Execution::Parallel).unwrap();
    assert_eq!(all.values.len(), 3 * grid.len());
    assert_eq!(all.kernel_dimension(1e-8), 3);
    assert_eq!(
        all.values
            .iter()
            .filter(|v| (*v + 1.0).abs() < 1e-9)
            .count(),
        12
    );
    assert_eq!(
        all.values
            .iter()
            .filter(|v| (*v + 2.0).abs() < 1e-9)
            .count(),
        12
    );
    let conf = sector_spectrum(&g, Sector::Conformal, Execution::Parallel).unwrap();
    assert!(
        conf.max().unwrap() <= -1.0 + 1e-9,
        "im C top {:?}",
        conf.max()
    );
    let scale = sector_spectrum(&g, Sector::Scale, Execution::Parallel).unwrap();
    assert_eq!(scale.values.len(), 1);
    assert!(scale.values[0].abs() < 1e-12);
    let kd = sector_spectrum(&g, Sector::KerDiv, Execution::Sequential).unwrap();
    assert_eq!(kd.kernel_dimension(1e-8), 3);
    // ker div = ℝg ⊕ im C ⊕ TT, plus the 2ⁿ − 1 pure-trace checkerboard modes
    // (wavenumber 0 or Nyquist on each axis) that every first difference kills.
    assert_eq!(
        kd.values.len(),
        scale.values.len() + conf.values.len() + tt.values.len() + 3
    );
}

#[test]
fn skewed_and_three_dimensional_tori() {
    let grid = grid2(12);
    let tt = sector_spectrum(&skewed(&grid), Sector::Tt, Execution::Parallel).unwrap();
    assert_eq!(tt.kernel_dimension(1e-8), 2);
    assert!(tt.max().unwrap() <= 1e-8);
    let grid3 = Arc::new(PeriodicGrid::cube(3, 8, Scheme::Spectral).unwrap());
    let tt3 = sector_spectrum(&MetricField::flat(&grid3), Sector::Tt, Execution::Parallel).unwrap();
    assert_eq!(tt3.kernel_dimension(1e-8), 5);
    assert!(tt3.max().unwrap() <= 1e-8);
}

#[test]
fn normal_projection_kernel_is_the_constants() {
    for n in [2usize, 3] {
        let grid = Arc::new(PeriodicGrid::cube(n, 8, Scheme::Spectral).unwrap());
        let g = MetricField::flat(&grid);
        let mut kernel = 0;
        for i in 0..n {
            for j in i..n {
                let mut m = [[0.0; 3]; 3];
                m[i][j] = 1.0;
                m[j][i] = 1.0;
                let p = project_normal(&g, &SymTensorField::constant(&grid, &m)).unwrap();
                if p.max_abs() < 1e-14 {
                    kernel += 1;
                }
            }
        }
        assert_eq!(kernel, n * (n + 1) / 2);
    }
    let grid = grid2(16);
    let g = MetricField::flat(&grid);
    let cu = cu_mode(&grid);
    assert!(project_normal(&g, &cu).unwrap().sub(&cu).max_abs() < 1e-14);
    assert!(normal_rayleigh_quotient(&g, g.tensor()).unwrap().is_none());
    assert!((normal_rayleigh_quotient(&g, &cu).unwrap().unwrap() + 1.0).abs() < 1e-10);
}

#[test]
fn normal_space_spectral_gap() {
    let g = MetricField::flat(&grid2(16));
    let seq = normal_rayleigh_scan(&g, 100, 42, Execution::Sequential).unwrap();
    let par = normal_rayleigh_scan(&g, 100, 42, Execution::Parallel).unwrap();
    assert_eq!(seq.quotients, par.quotients);
    assert_eq!(seq.quotients.len() + seq.skipped, 100);
    assert!(seq.quotients.len() >= 90);
    // Non-constant modes have |k| ≥ 1 on the 2π-torus.
    assert!(seq.c >= 1.0 - 1e-8, "c = {}", seq.c);
}
