use hgdlab::bounds::{bound_rhs, separable_requirements, BoundParams, BoundQuery, SeparableOptions, TheoremId};
use hgdlab::metrics::{risk_decomposition, soft_margin_curve, subexp_norm, surrogate_risk, zero_one_error};
use hgdlab::optimizer::{gd_train, risk_and_gradient, CheckpointSchedule, Mode, OptimConfig};
use hgdlab::synthdata::{sample, DistributionSpec, NoiseModel};
use hgdlab::{LossSpec64, SurrogateLoss};
use proptest::prelude::*;

fn smooth_losses() -> Vec<LossSpec64> {
    vec![
        LossSpec64::logistic(),
        LossSpec64::poly_tail(1.0, 1.0).unwrap(),
        LossSpec64::poly_tail(2.0, 1.0).unwrap(),
        LossSpec64::poly_tail(4.0, 0.5).unwrap(),
        LossSpec64::exp_tail(1.0, 1.0, 1.0).unwrap(),
        LossSpec64::exp_tail(2.0, 1.0, 1.0).unwrap(),
    ]
}

fn all_losses() -> Vec<LossSpec64> {
    let mut v = smooth_losses();
    v.push(LossSpec64::hinge());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn loss_pointwise_axioms(z in -60.0f64..60.0, dz in 0.0f64..5.0) {
        for loss in all_losses() {
            let v = loss.value(z);
            prop_assert!(v >= 0.0);
            if z < 0.0 {
                prop_assert!(v >= loss.value_at_zero() * (1.0 - 1e-12));
            }
            prop_assert!(loss.derivative(z) <= 1e-15);
            prop_assert!(loss.derivative(z).abs() <= loss.lipschitz() * (1.0 + 1e-12));
            prop_assert!(loss.value(z + dz) <= v + 1e-15);
            if let Some(h) = loss.smoothness() {
                let g = loss.derivative(z);
                prop_assert!(g * g <= 4.0 * h * v * (1.0 + 1e-9) + 1e-300, "{} at {z}", loss);
                let g2 = loss.derivative(z + dz);
                prop_assert!((g2 - g).abs() <= h * dz * (1.0 + 1e-9) + 1e-15);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences(z in -20.0f64..20.0) {
        for loss in smooth_losses() {
            let h = 1e-5;
            let fd = (loss.value(z + h) - loss.value(z - h)) / (2.0 * h);
            prop_assert!((fd - loss.derivative(z)).abs() <= 1e-6, "{} at {z}: {fd} vs {}", loss, loss.derivative(z));
        }
    }

    #[test]
    fn inverse_of_value_is_consistent(frac in 1e-6f64..1.0) {
        for loss in smooth_losses() {
            let t = frac * loss.value_at_zero();
            let z = loss.inverse(t).unwrap().finite().unwrap();
            let back = loss.value(z);
            prop_assert!((back - t).abs() <= 1e-10 * t, "{}: l(l^-1({t})) = {back}", loss);
        }
    }

    #[test]
    fn logistic_inverse_bracket(eps in 1e-6f64..0.69) {
        let z = LossSpec64::logistic().inverse(eps).unwrap().finite().unwrap();
        prop_assert!(z >= (1.0 / (2.0 * eps)).ln() - 1e-12);
        prop_assert!(z <= (2.0 / eps).ln() + 1e-12);
    }

    #[test]
    fn bounds_never_beat_opt_and_grow_with_opt(opt in 1e-4f64..0.2, bump in 1.0001f64..2.0, gs in 0.05f64..1.0, eps in 1e-3f64..0.1) {
        let p = |o: f64| BoundParams { opt: Some(o), gamma_star: Some(gs), b_x: Some(1.0), eps: Some(eps), c_m: Some(1.2533), u: Some(0.3989),
            gamma: Some(gs), eps1: Some(eps), eps2: Some(eps), phi: Some(0.1), c0: Some(2.0), p: Some(1.0), ..Default::default() };
        for th in [TheoremId::CorHardMargin, TheoremId::ThmBounded, TheoremId::ThmUnbounded, TheoremId::PropSoftMargin, TheoremId::CorAntiConcentration, TheoremId::CorLogconcave] {
            let lo = bound_rhs(&BoundQuery::new(th, p(opt))).unwrap();
            prop_assert!(lo.predicted_error >= opt, "{th}");
            prop_assert_eq!(lo.vacuous, lo.predicted_error >= 0.5);
            let o2 = (opt * bump).min(0.49);
            let hi = bound_rhs(&BoundQuery::new(th, p(o2))).unwrap();
            prop_assert!(hi.predicted_error >= lo.predicted_error * (1.0 - 1e-12), "{th}: {} at {opt} vs {} at {o2}", lo.predicted_error, hi.predicted_error);
        }
    }

    #[test]
    fn bounded_bound_dominates_hard_margin_bound(opt in 1e-4f64..0.3, gs in 0.05f64..1.0, eps in 1e-3f64..0.1) {
        let cor = bound_rhs(&BoundQuery::new(TheoremId::CorHardMargin, BoundParams {
            opt: Some(opt), gamma_star: Some(gs), b_x: Some(1.0), eps: Some(eps), ..Default::default() })).unwrap();
        let thm = bound_rhs(&BoundQuery::new(TheoremId::ThmBounded, BoundParams {
            opt: Some(opt), gamma: Some(gs), eps1: Some(eps), eps2: Some(opt), phi: Some(0.0), b_x: Some(1.0), ..Default::default() })).unwrap();
        // the hard-margin form replaces l^-1(OPT) by its upper bracket log(2/OPT)
        prop_assert!(thm.predicted_error <= cor.predicted_error + opt + 1e-12);
    }

    #[test]
    fn exp_tail_rate_beats_poly_tail_rate(eps in 1e-4f64..0.1, gamma in 0.01f64..0.5, p in 0.5f64..10.0) {
        let opts = SeparableOptions::default();
        let e = separable_requirements(&LossSpec64::logistic(), gamma, eps, opts).unwrap();
        let q = separable_requirements(&LossSpec64::poly_tail(p, 1.0).unwrap(), gamma, eps, opts).unwrap();
        prop_assert!(e.rate_t < q.rate_t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn datasets_are_deterministic(seed in any::<u64>(), d in 1usize..8, eta in 0.0f64..0.45) {
        let spec = DistributionSpec::<f64>::gaussian(d).with_noise(NoiseModel::Rcn { eta });
        prop_assert_eq!(sample(&spec, 200, seed).unwrap(), sample(&spec, 200, seed).unwrap());
    }

    #[test]
    fn hard_margin_samples_respect_the_margin(seed in any::<u64>(), d in 2usize..12, g in 0.01f64..0.8) {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(d, g);
        let ds = sample(&spec, 300, seed).unwrap();
        for (x, y) in ds.rows() {
            let m: f64 = x.iter().zip(&spec.v_bar).map(|(a, b)| a * b).sum();
            prop_assert!(f64::from(y) * m >= g * spec.b_x - 1e-12);
        }
        prop_assert_eq!(zero_one_error(&spec.v_bar, &ds).unwrap(), 0.0);
    }

    #[test]
    fn rcn_error_equals_flip_fraction(seed in any::<u64>(), eta in 0.0f64..0.45) {
        let spec = DistributionSpec::<f64>::separable_sphere(4).with_noise(NoiseModel::Rcn { eta });
        let ds = sample(&spec, 1000, seed).unwrap();
        prop_assert_eq!(zero_one_error(&spec.v_bar, &ds).unwrap(), ds.meta.flip_fraction);
    }

    #[test]
    fn markov_consistency(seed in any::<u64>(), w in prop::collection::vec(-3.0f64..3.0, 4)) {
        let ds = sample(&DistributionSpec::<f64>::gaussian(4).with_noise(NoiseModel::Rcn { eta: 0.2 }), 500, seed).unwrap();
        for loss in all_losses() {
            let err = zero_one_error(&w, &ds).unwrap();
            let sur = surrogate_risk(&w, &ds, &loss).unwrap();
            prop_assert!(err <= sur / loss.value_at_zero() * (1.0 + 1e-12) + 1e-15, "{}", loss);
        }
    }

    #[test]
    fn soft_margin_curve_is_monotone(seed in any::<u64>()) {
        let ds = sample(&DistributionSpec::<f64>::gaussian(3), 2000, seed).unwrap();
        let gammas: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let c = soft_margin_curve(ds.features(), 3, &[1.0, 0.0, 0.0], &gammas).unwrap();
        prop_assert!(c.phi_hat.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn subexp_norm_is_scale_equivariant(seed in any::<u64>(), c in 0.1f64..10.0) {
        let ds = sample(&DistributionSpec::<f64>::gaussian(3), 10_000, seed).unwrap();
        let scaled: Vec<f64> = ds.features().iter().map(|x| c * x).collect();
        let a = subexp_norm(ds.features(), 3, 4, seed, None).unwrap();
        let b = subexp_norm(&scaled, 3, 4, seed, None).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-12 * c * a);
    }

    #[test]
    fn decomposition_partitions_the_risk(seed in any::<u64>(), scale in 0.5f64..50.0, gamma in 0.01f64..1.0) {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(5, 0.1).with_noise(NoiseModel::Rcn { eta: 0.1 });
        let ds = sample(&spec, 800, seed).unwrap();
        let loss = LossSpec64::logistic();
        let r = risk_decomposition(&ds, &loss, &spec.v_bar, scale, gamma).unwrap();
        let v: Vec<f64> = spec.v_bar.iter().map(|x| x * scale).collect();
        let direct = surrogate_risk(&v, &ds, &loss).unwrap();
        prop_assert!((r.term_wrong + r.term_band + r.term_far - r.total).abs() <= 1e-12);
        prop_assert!((direct - r.total).abs() <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), d in 1usize..6, n in 2usize..21, w in prop::collection::vec(-2.0f64..2.0, 6)) {
        let ds = sample(&DistributionSpec::<f64>::gaussian(d).with_noise(NoiseModel::Rcn { eta: 0.2 }), n, seed).unwrap();
        let w = &w[..d];
        for loss in smooth_losses() {
            let mut g = vec![0.0; d];
            risk_and_gradient(w, &ds, &loss, &mut g);
            for j in 0..d {
                let h = 1e-6;
                let mut wp = w.to_vec();
                let mut wm = w.to_vec();
                wp[j] += h;
                wm[j] -= h;
                let fd = (surrogate_risk(&wp, &ds, &loss).unwrap() - surrogate_risk(&wm, &ds, &loss).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "{}: {fd} vs {}", loss, g[j]);
            }
        }
    }

    #[test]
    fn gd_descends_and_averages(seed in any::<u64>(), d in 2usize..10, g in 0.1f64..0.4) {
        let spec = DistributionSpec::<f64>::hard_margin_sphere(d, g);
        let ds = sample(&spec, 300, seed).unwrap();
        let loss = LossSpec64::logistic();
        let eta = 0.4 / (0.25 * ds.max_norm() * ds.max_norm());
        let eps = 0.1;
        let scale = loss.inverse(eps).unwrap().finite().unwrap() / g;
        let v: Vec<f64> = spec.v_bar.iter().map(|x| x * scale).collect();
        let f_v = surrogate_risk(&v, &ds, &loss).unwrap();
        let t = ((4.0 / 3.0) / eta / eps * scale * scale).ceil() as u64;
        let cfg = OptimConfig::new(Mode::FullBatch, d, eta, t).with_reference(v).with_checkpoints(CheckpointSchedule::Evenly(20));
        let tr = gd_train(&ds, &loss, &cfg).unwrap();
        prop_assert!(tr.diagnostics.max_risk_increase <= 1e-12);
        prop_assert!(tr.running_mean_risk <= f_v + eps + 1e-9);
        let d0 = tr.diagnostics.initial_dist_to_ref.unwrap();
        for c in tr.checkpoints.iter().take_while(|c| c.emp_risk >= f_v) {
            prop_assert!(c.dist_to_ref.unwrap() <= d0 + 1e-9);
        }
    }
}
