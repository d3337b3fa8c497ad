use formbound_core::capacity::{capacity, SetMask};
use formbound_core::criteria::{ball_test, levelset_test};
use formbound_core::dyadic::{build_dyadic_stats, carleson_ratio, finest_level};
use formbound_core::formnorm::{dense_form_norm, estimate_form_norm};
use formbound_core::potential::compute_phi;
use formbound_core::spectral::{make_grid, Field, Grid};
use proptest::prelude::*;

fn field(grid: Grid, vals: &[f64]) -> Field {
    Field::from_real(grid, vals).unwrap()
}

fn rolled(vals: &[f64], shift: usize) -> Vec<f64> {
    let n = vals.len();
    (0..n).map(|i| vals[(i + n - shift) % n]).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn form_norm_is_absolutely_homogeneous(
        vals in proptest::collection::vec(-3.0f64..3.0, 16),
        c in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0],
    ) {
        let g = make_grid(1, 16, 2.0).unwrap();
        let base = dense_form_norm(&field(g, &vals)).unwrap().value;
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let s = dense_form_norm(&field(g, &scaled)).unwrap().value;
        prop_assert!(close(s, c.abs() * base, 1e-10), "{s} vs {}", c.abs() * base);
    }

    #[test]
    fn form_norm_is_translation_invariant(
        vals in proptest::collection::vec(-3.0f64..3.0, 16),
        shift in 1usize..16,
    ) {
        let g = make_grid(1, 16, 2.0).unwrap();
        let a = dense_form_norm(&field(g, &vals)).unwrap().value;
        let b = dense_form_norm(&field(g, &rolled(&vals, shift))).unwrap().value;
        prop_assert!(close(a, b, 1e-10));
    }

    #[test]
    fn power_iteration_matches_dense_norm(vals in proptest::collection::vec(0.0f64..2.0, 16)) {
        // Nonnegative Q makes the top of the spectrum simple enough to converge quickly.
        let g = make_grid(1, 16, 2.0).unwrap();
        let q = field(g, &vals);
        let dense = dense_form_norm(&q).unwrap().value;
        let est = estimate_form_norm(&q, 1e-12, 200_000).unwrap();
        prop_assert!(est.value <= dense * (1.0 + 1e-9));
        prop_assert!(close(est.value, dense, 1e-4), "{} vs {dense}", est.value);
    }

    #[test]
    fn criteria_scale_quadratically(
        vals in proptest::collection::vec(-1.0f64..1.0, 64),
        c in 0.2f64..5.0,
    ) {
        let g = make_grid(1, 64, 2.0).unwrap();
        let phi = compute_phi(&field(g, &vals)).unwrap();
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let phi_c = compute_phi(&field(g, &scaled)).unwrap();
        let radii = [0.125, 0.5, 1.0];
        let measures = [0.25, 1.0];

        let stats = |p: &Field| carleson_ratio(&build_dyadic_stats(p, finest_level(&g).unwrap()).unwrap()).unwrap().ratio;
        prop_assert!(close(stats(&phi_c), c * c * stats(&phi), 1e-10));
        let ball = |p: &Field| ball_test(p, &radii).unwrap().constant;
        prop_assert!(close(ball(&phi_c), c * c * ball(&phi), 1e-10));
        let level = |p: &Field| levelset_test(p, &measures).unwrap().constant;
        prop_assert!(close(level(&phi_c), c * c * level(&phi), 1e-10));
    }

    #[test]
    fn capacity_is_monotone_and_subadditive(
        a in proptest::collection::vec(any::<bool>(), 32),
        b in proptest::collection::vec(any::<bool>(), 32),
    ) {
        prop_assume!(a.iter().any(|&x| x) && b.iter().any(|&x| x));
        let g = make_grid(1, 32, 2.0).unwrap();
        let sa = SetMask::new(g, a).unwrap();
        let sb = SetMask::new(g, b).unwrap();
        let su = sa.union(&sb).unwrap();
        let cap = |e: &SetMask| capacity(e, 1e-10, 50_000).unwrap().value;
        let (ca, cb, cu) = (cap(&sa), cap(&sb), cap(&su));
        prop_assert!(ca <= cu * (1.0 + 1e-6), "{ca} > {cu}");
        prop_assert!(cb <= cu * (1.0 + 1e-6), "{cb} > {cu}");
        prop_assert!(cu <= (ca + cb) * (1.0 + 1e-6), "{cu} > {ca} + {cb}");
    }
}

#[test]
fn capacity_of_whole_torus_is_its_volume() {
    // The constant 1 is admissible and has the smallest norm, ‖1‖² = |T|.
    for (dim, n) in [(1, 32), (2, 16)] {
        let g = make_grid(dim, n, 2.0).unwrap();
        let r = capacity(&SetMask::full(g), 1e-12, 10_000).unwrap();
        assert!(close(r.value, g.volume(), 1e-8), "{} vs {}", r.value, g.volume());
    }
}

#[test]
fn constant_potential_agrees_across_modules() {
    let g = make_grid(2, 16, 2.0).unwrap();
    let q = Field::constant(g, 2.5.into());
    let dense = dense_form_norm(&q).unwrap().value;
    let est = estimate_form_norm(&q, 1e-12, 10_000).unwrap().value;
    assert!(close(dense, 2.5, 1e-12));
    assert!(close(est, 2.5, 1e-9));
}
