use proptest::prelude::*;

use qact::baselines::mlem_step;
use qact::experiments::{convergence_report, trace_points};
use qact::{
    apply_noise, back_project, build_system_matrix, fbp_reconstruct, forward_project, make_block_phantom, make_geometry,
    make_shepp_logan, mlem_reconstruct, reconstruct, reconstruct_with, rmse, ExhaustiveSolver, Image, MlemConfig, NoiseConfig,
    QactConfig, SystemMatrix,
};

#[test]
fn exhaustive_variational_loop_converges_on_a_tiny_image() {
    let geom = make_geometry(2, 5).unwrap();
    let a: SystemMatrix = build_system_matrix(&geom);
    let gt = Image::from_pixels(2, vec![0.9, 0.05, 0.4, 0.65]).unwrap();
    let y = forward_project(&a, &gt).unwrap();
    let (x, trace) = reconstruct_with(&a, &y, &QactConfig::default(), Some(&gt), &ExhaustiveSolver).unwrap();
    assert_eq!(trace.len(), 30);
    assert!(rmse(&x, &gt).unwrap() < 1e-4);
    let first = trace.rmse_at(1).unwrap();
    assert!(trace.rmse_at(30).unwrap() < first);
}

#[test]
fn block_phantom_converges_within_twenty_rounds() {
    let geom = make_geometry(4, 36).unwrap();
    let a: SystemMatrix = build_system_matrix(&geom);
    let gt: Image = make_block_phantom();
    let y = forward_project(&a, &gt).unwrap();
    let (_, trace) = reconstruct(&a, &y, &QactConfig::default(), Some(&gt)).unwrap();
    assert!(trace.rmse_at(20).unwrap() <= 1e-3);
    assert!(trace.rmse_at(30).unwrap() <= 1e-3);
}

#[test]
fn shepp_logan_8_improves_over_the_rounds() {
    let geom = make_geometry(8, 36).unwrap();
    let a: SystemMatrix = build_system_matrix(&geom);
    let gt: Image = make_shepp_logan(8).unwrap();
    let y = forward_project(&a, &gt).unwrap();
    let (_, trace) = reconstruct(&a, &y, &QactConfig::default(), Some(&gt)).unwrap();
    assert!(trace.rmse_at(30).unwrap() < trace.rmse_at(1).unwrap());

    let dir = tempfile::tempdir().unwrap();
    convergence_report(&trace_points(&trace), dir.path().join("r.csv"), dir.path().join("r.pgm")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn mlem_selects_the_best_projection_fit_on_noisy_data() {
    let geom = make_geometry(8, 18).unwrap();
    let a: SystemMatrix = build_system_matrix(&geom);
    let gt: Image = make_shepp_logan(8).unwrap();
    let clean = forward_project(&a, &gt).unwrap();
    let noisy = apply_noise(&clean, &NoiseConfig::new(30.0, 1).unwrap()).unwrap();
    assert_ne!(noisy, clean);
    let res = mlem_reconstruct(&a, &noisy, &MlemConfig { max_iters: 100, ..Default::default() }, Some(&clean)).unwrap();
    assert_eq!(res.projection_rmse.len(), 100);
    let best = res.projection_rmse.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(res.projection_rmse[res.selected_iteration - 1], best);
    assert!(res.selected.pixels().iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn fbp_scales_exactly_with_the_data() {
    let geom = make_geometry(8, 18).unwrap();
    let a: SystemMatrix = build_system_matrix(&geom);
    let gt: Image = make_shepp_logan(8).unwrap();
    let y = forward_project(&a, &gt).unwrap();
    let r1 = fbp_reconstruct(&geom, &y).unwrap();
    let r2 = fbp_reconstruct(&geom, &y.with_values(y.values().iter().map(|v| v * 4.0).collect()).unwrap()).unwrap();
    for (p, q) in r1.pixels().iter().zip(r2.pixels()) {
        assert_eq!(4.0 * p, *q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mlem_iterates_stay_positive(values in proptest::collection::vec(0.0f64..2.0, 16), x_init in 0.01f64..1.0) {
        let a: SystemMatrix = build_system_matrix(&make_geometry(4, 9).unwrap());
        let gt = Image::from_pixels(4, values).unwrap();
        let y = forward_project(&a, &gt).unwrap();
        let res = mlem_reconstruct(&a, &y, &MlemConfig { max_iters: 25, x_init, ..Default::default() }, None).unwrap();
        prop_assert!(res.final_image.pixels().iter().all(|&v| v > 0.0 && v.is_finite()));
    }

    #[test]
    fn mlem_consistent_data_is_a_fixed_point(values in proptest::collection::vec(0.01f64..2.0, 16)) {
        let a: SystemMatrix = build_system_matrix(&make_geometry(4, 9).unwrap());
        let x = Image::from_pixels(4, values).unwrap();
        let y = forward_project(&a, &x).unwrap();
        let ey = y.with_values(y.values().iter().map(|v| (-v).exp()).collect()).unwrap();
        let denom = back_project(&a, &ey).unwrap().into_pixels();
        let mut next = x.pixels().to_vec();
        mlem_step(&a, &mut next, &denom).unwrap();
        for (p, q) in x.pixels().iter().zip(&next) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs());
        }
    }
}
