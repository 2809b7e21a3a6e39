mod common;

use common::{random_batch, tiny_grid, TINY};
use dyntomo::eval::{normalized_lp_error, relative_mass_error, TensorContainer};
use dyntomo::forward::AbelOperator;
use dyntomo::nn::{Discriminator, DiscriminatorConfig};
use dyntomo::phantom::{DensityTimeSeries, GridSpec};
use dyntomo::refine::tva_norm;
use dyntomo::training::{g_loss, GLossWeights};
use dyntomo::wasserstein::{dual_estimate, w1_exact_1d, EmpiricalDist1D};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn dist(v: Vec<f64>) -> EmpiricalDist1D {
    EmpiricalDist1D::new(v).unwrap()
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

/// Piecewise-linear map with slopes in [-1, 1], so 1-Lipschitz.
fn lipschitz_critic(knots: &[(f64, f64)]) -> impl Fn(f64) -> f64 + '_ {
    move |x| knots.iter().map(|&(k, s)| s * (x - k).abs() / knots.len() as f64).sum()
}

fn series(frames: Array3<f64>) -> DensityTimeSeries {
    let w = frames.dim().2;
    DensityTimeSeries::new(frames, GridSpec::spanning(w, 1.0), 50.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_is_a_metric((a, b, c) in (1usize..20).prop_flat_map(|n| (samples(n), samples(n), samples(n)))) {
        let (a, b, c) = (dist(a), dist(b), dist(c));
        let ab = w1_exact_1d(&a, &b).unwrap();
        prop_assert_eq!(w1_exact_1d(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - w1_exact_1d(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(ab <= w1_exact_1d(&a, &c).unwrap() + w1_exact_1d(&c, &b).unwrap() + 1e-9);
    }

    #[test]
    fn lipschitz_duals_bound_w1(
        (a, b) in (1usize..20).prop_flat_map(|n| (samples(n), samples(n))),
        knots in prop::collection::vec((-10.0..10.0f64, -1.0..=1.0f64), 1..6),
    ) {
        let (a, b) = (dist(a), dist(b));
        let f = lipschitz_critic(&knots);
        prop_assert!(dual_estimate(&f, &a, &b) <= w1_exact_1d(&a, &b).unwrap() + 1e-9);
    }

    #[test]
    fn tva_is_a_seminorm(
        x in prop::collection::vec(-5.0..5.0f64, 30),
        y in prop::collection::vec(-5.0..5.0f64, 30),
        s in -3.0..3.0f64,
    ) {
        let x = Array2::from_shape_vec((5, 6), x).unwrap();
        let y = Array2::from_shape_vec((5, 6), y).unwrap();
        prop_assert!(tva_norm((&x + &y).view()) <= tva_norm(x.view()) + tva_norm(y.view()) + 1e-9);
        prop_assert!((tva_norm((&x * s).view()) - s.abs() * tva_norm(x.view())).abs() <= 1e-9);
        prop_assert!((tva_norm((&x + 2.5).view()) - tva_norm(x.view())).abs() <= 1e-9);
    }

    #[test]
    fn container_round_trips(shape in prop::collection::vec(1usize..6, 2..=4), seed in any::<u64>()) {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = random_batch(1, n, seed).remove(0).iter().map(|&v| (v * 1e3 - 400.0) as f32).collect();
        let c = TensorContainer::new(shape.clone(), data).unwrap();
        let back = TensorContainer::from_bytes(&c.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn abel_projection_is_linear(
        w in 2usize..24,
        seed in any::<u64>(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let op = AbelOperator::new(w, 0.5);
        let mut rows = random_batch(2, w, seed);
        let (y, x) = (rows.pop().unwrap(), rows.pop().unwrap());
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (px, py) = (op.project_row(&x), op.project_row(&y));
        for (k, v) in op.project_row(&mix).iter().enumerate() {
            prop_assert!((v - (a * px[k] + b * py[k])).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn mirrored_rows_project_symmetrically(w in 2usize..24, seed in any::<u64>()) {
        let op = AbelOperator::new(w, 0.5);
        let half = random_batch(1, w.div_ceil(2), seed).remove(0);
        let row: Vec<f64> = (0..w).map(|j| half[j.min(w - 1 - j)]).collect();
        let p = op.project_row(&row);
        for j in 0..w {
            prop_assert!((p[j] - p[w - 1 - j]).abs() <= 1e-12 * (1.0 + p[j].abs()));
        }
    }

    #[test]
    fn error_metrics_are_nonnegative_and_zero_at_the_truth(seed in any::<u64>(), scale in 0.5..2.0f64) {
        let clean = Array3::from_shape_vec((3, 4, 6), random_batch(1, 72, seed).remove(0)).unwrap();
        let (c, e) = (series(clean.clone()), series(clean.mapv(|v| v * scale)));
        prop_assert_eq!(relative_mass_error(&c, &c).unwrap(), 0.0);
        prop_assert_eq!(normalized_lp_error(&c, &c, 2).unwrap(), 0.0);
        let m = relative_mass_error(&c, &e).unwrap();
        prop_assert!(m >= 0.0);
        // Uniform scaling moves every frame's mass by the same fraction.
        prop_assert!((m - (scale - 1.0).abs()).abs() <= 1e-9);
        prop_assert!((normalized_lp_error(&c, &e, 1).unwrap() - (scale - 1.0).abs()).abs() <= 1e-9);
    }

    #[test]
    fn mass_error_ignores_frame_order(seed in any::<u64>(), noise in 0.0..0.3f64) {
        let clean = Array3::from_shape_vec((4, 4, 6), random_batch(1, 96, seed).remove(0)).unwrap();
        let est = &clean + &Array3::from_shape_vec((4, 4, 6), random_batch(1, 96, seed ^ 1).remove(0)).unwrap().mapv(|v| v * noise);
        let order = [2usize, 0, 3, 1];
        let permute = |a: &Array3<f64>| ndarray::stack(ndarray::Axis(0), &order.map(|t| a.index_axis(ndarray::Axis(0), t))).unwrap();
        let a = relative_mass_error(&series(clean.clone()), &series(est.clone())).unwrap();
        let b = relative_mass_error(&series(permute(&clean)), &series(permute(&est))).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

fn loss_fixture(lambda: f64, critic_seed: u64) -> dyntomo::training::GLoss {
    let (gen, store) = common::grad::generator();
    let (disc, d_store) = Discriminator::new(DiscriminatorConfig::new(TINY).with_blocks(4), critic_seed).unwrap();
    let len = TINY.iter().product();
    let weights = GLossWeights { lambda, lambda_mass: 0.7, relative_mass: true };
    g_loss::<f64>(&gen, &store, &disc, &d_store, &random_batch(2, len, 1), &random_batch(2, len, 2), weights, &tiny_grid())
        .unwrap()
}

#[test]
fn generator_loss_total_is_the_weighted_sum() {
    for lambda in [0.0, 0.3, 0.99, 1.0] {
        let l = loss_fixture(lambda, 11);
        assert!((l.total - l.weighted_sum()).abs() <= 1e-12 * (1.0 + l.total.abs()), "{lambda}");
    }
}

#[test]
fn purely_supervised_gradient_ignores_the_critic() {
    let (a, b) = (loss_fixture(1.0, 11), loss_fixture(1.0, 12));
    assert_ne!(a.adversarial, b.adversarial);
    assert_eq!(a.grad, b.grad);
    let (c, d) = (loss_fixture(0.5, 11), loss_fixture(0.5, 12));
    assert_ne!(c.grad, d.grad);
}
