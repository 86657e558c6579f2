use super::*;
use crate::error::AuditError;
use crate::mechanisms::{make_synthetic, SyntheticSpec};
use crate::rng::{seeded, standard_normal};
use crate::smallnet::NetConfig;
use proptest::prelude::*;
use rand::Rng;

fn biased_classifier(dim: usize, bias: &[f64]) -> NetParams {
    let mut p = NetParams::zeros(NetConfig::classifier(dim, vec![], bias.len())).unwrap();
    p.layer_mut(0).1.copy_from_slice(bias);
    p
}

fn example(features: Vec<f64>, label: usize) -> Example {
    Example { features, label, difficulty: 0.0 }
}

fn ranks(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

#[test]
fn loss_score_examples() {
    for c in 2..6 {
        let model = biased_classifier(2, &vec![0.0; c]);
        let s = score_loss(&model, &example(vec![0.3, -1.0], c - 1)).unwrap();
        assert!((s.value + (c as f64).ln()).abs() < 1e-12);
        assert_eq!(s.orientation, Orientation::HigherMeansMember);
    }
    // -ln(1 + 2 e^-10)
    let model = biased_classifier(1, &[10.0, 0.0, 0.0]);
    let s = score_loss(&model, &example(vec![0.0], 0)).unwrap().value;
    assert!(s < 0.0 && s > -1e-4);
}

#[test]
fn loss_score_matches_scalar_softmax() {
    let mut rng = seeded(3);
    for _ in 0..50 {
        let model = NetParams::init(NetConfig::classifier(3, vec![4], 4), &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
        let logits = forward(&model, &x).unwrap();
        for label in 0..4 {
            let denom: f64 = logits.iter().map(|l| l.exp()).sum();
            let want = (logits[label].exp() / denom).ln();
            let got = score_loss(&model, &example(x.clone(), label)).unwrap().value;
            assert!((got - want).abs() < 1e-12);
        }
    }
}

#[test]
fn margin_score_examples() {
    let x = example(vec![1.0], 0);
    assert_eq!(score_margin(&biased_classifier(1, &[2.0, 0.0, 0.0]), &x).unwrap().value, 2.0);
    let x2 = example(vec![1.0], 2);
    assert_eq!(score_margin(&biased_classifier(1, &[1.0, 2.0, 3.0]), &x2).unwrap().value, 0.0);
    assert_eq!(score_margin(&biased_classifier(1, &[0.0, 0.0]), &x).unwrap().value, 0.0);
    let wrong_dim = example(vec![1.0, 2.0], 0);
    assert!(matches!(
        score_margin(&biased_classifier(1, &[0.0, 0.0]), &wrong_dim),
        Err(AuditError::Config(_))
    ));
}

#[test]
fn scores_reject_regressor_models() {
    let reg = NetParams::zeros(NetConfig::gaussian_regressor(1, vec![])).unwrap();
    assert!(score_margin(&reg, &example(vec![0.0], 0)).is_err());
}

#[test]
fn quantile_examples() {
    assert_eq!(quantile(3.0, 3.0, 2.0), 0.5);
    assert!((quantile(5.0, 3.0, 2.0) - 0.841_345).abs() < 1e-5);
    let mut prev = 0.0;
    for i in -50..=50 {
        let q = quantile(i as f64 * 0.1, 0.0, 1.0);
        assert!(q > prev);
        prev = q;
    }
}

#[test]
fn rescore_with_constant_regressor() {
    // Margin of this model is exactly 2 for label 0.
    let model = biased_classifier(1, &[2.0, 0.0, 0.0]);
    let x = example(vec![0.5], 0);
    let at_mean = TrainedRegressor::constant(1, BaseScore::Margin, 2.0, 1.5).unwrap();
    let r = rescore(&at_mean, &model, &x).unwrap();
    assert_eq!(r.score.value, 0.5);
    assert!(!r.sigma_clamped);
    let one_sd = TrainedRegressor::constant(1, BaseScore::Margin, 0.5, 1.5).unwrap();
    assert!((rescore(&one_sd, &model, &x).unwrap().score.value - 0.841_345).abs() < 1e-5);
    let tiny = TrainedRegressor::constant(1, BaseScore::Margin, 1.0, 1e-9).unwrap();
    let (q, clamped) = rescore_all(&tiny, &model, &[x.clone(), x]).unwrap();
    assert_eq!(clamped, 2);
    assert!(q.iter().all(|&v| v > 0.5 && v <= 1.0));
}

#[test]
fn constant_regressor_preserves_base_ranking() {
    let mut rng = seeded(8);
    let model = NetParams::init(NetConfig::classifier(4, vec![8], 3), &mut rng).unwrap();
    let examples: Vec<Example> = (0..300)
        .map(|i| example((0..4).map(|_| standard_normal(&mut rng)).collect(), i % 3))
        .collect();
    for base in [BaseScore::Margin, BaseScore::Loss] {
        let s: Vec<f64> = examples.iter().map(|e| base.score(&model, e).unwrap().value).collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let reg = TrainedRegressor::constant(4, base, mean, 2.0).unwrap();
        let (q, _) = rescore_all(&reg, &model, &examples).unwrap();
        assert_eq!(ranks(&q), ranks(&s));
    }
}

#[test]
fn lr_zero_leaves_init_untouched() {
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
    let ys: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
    let cfg = RegressorConfig { epochs: 1, lr: 0.0, ..RegressorConfig::default() };
    let reg = fit_regressor(&xs, &ys, BaseScore::Margin, &cfg, &mut seeded(4)).unwrap();
    let init = NetParams::init(NetConfig::gaussian_regressor(2, cfg.hidden_dims.clone()), &mut seeded(4)).unwrap();
    assert_eq!(reg.params(), &init);
    assert_eq!(reg.nll_trace().len(), 2);
    assert_eq!(reg.nll_trace()[0], reg.nll_trace()[1]);
}

#[test]
fn fitting_is_deterministic() {
    let mut rng = seeded(5);
    let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![standard_normal(&mut rng)]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] + standard_normal(&mut rng)).collect();
    let cfg = RegressorConfig { epochs: 5, ..RegressorConfig::default() };
    let a = fit_regressor(&xs, &ys, BaseScore::Loss, &cfg, &mut seeded(6)).unwrap();
    let b = fit_regressor(&xs, &ys, BaseScore::Loss, &cfg, &mut seeded(6)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn constant_targets_are_learned() {
    let mut rng = seeded(7);
    let c = 3.7;
    let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![standard_normal(&mut rng), standard_normal(&mut rng)]).collect();
    let ys = vec![c; 200];
    let cfg = RegressorConfig { epochs: 100, ..RegressorConfig::default() };
    let reg = fit_regressor(&xs, &ys, BaseScore::Margin, &cfg, &mut seeded(8)).unwrap();
    for x in &xs {
        let (mu, sigma) = reg.predict(x).unwrap();
        assert!((mu - c).abs() < 0.05, "mu {mu}");
        assert!(sigma > 0.0);
    }
    assert!(reg.final_nll().unwrap() < reg.initial_nll().unwrap());
}

#[test]
fn heteroscedastic_targets_beat_constant_fit() {
    let mut rng = seeded(9);
    let xs: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0] + (0.1 + x[0].abs()) * standard_normal(&mut rng)).collect();
    let reg = fit_regressor(&xs, &ys, BaseScore::Margin, &RegressorConfig::default(), &mut seeded(10)).unwrap();
    let mean = ys.iter().sum::<f64>() / 400.0;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 400.0).sqrt();
    let constant_nll = 0.5 + sd.ln();
    assert!(reg.final_nll().unwrap() < constant_nll - 0.2);
}

#[test]
fn homogeneous_data_is_no_worse_than_constant_fit() {
    let spec = SyntheticSpec { n_total: 600, dim: 5, num_classes: 3, heterogeneity: 0.0, separation: 2.0 };
    let data = make_synthetic(&spec, &mut seeded(11)).unwrap();
    let model = NetParams::init(NetConfig::classifier(5, vec![8], 3), &mut seeded(12)).unwrap();
    let ids: Vec<usize> = (0..600).collect();
    let holdout = HoldoutSet::new(&data.examples, &ids, &[]).unwrap();
    let reg = train_regressor(&holdout, &model, BaseScore::Margin, &RegressorConfig::default(), &mut seeded(13)).unwrap();
    let s: Vec<f64> = data.examples.iter().map(|e| score_margin(&model, e).unwrap().value).collect();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
    let constant_nll = 0.5 + sd.ln();
    assert!(reg.final_nll().unwrap() <= constant_nll + 0.1);
    let trace = reg.nll_trace();
    assert!(reg.final_nll().unwrap() <= trace[0]);
}

#[test]
fn diverging_fit_is_a_training_error() {
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let cfg = RegressorConfig { lr: 1e300, epochs: 3, ..RegressorConfig::default() };
    let err = fit_regressor(&xs, &ys, BaseScore::Margin, &cfg, &mut seeded(1)).unwrap_err();
    assert!(matches!(err, AuditError::Training(_)), "{err:?}");
}

#[test]
fn holdout_must_be_disjoint() {
    let pool: Vec<Example> = (0..10).map(|i| example(vec![i as f64], 0)).collect();
    assert!(HoldoutSet::new(&pool, &[7, 8], &[0, 1, 2]).is_ok());
    assert!(HoldoutSet::new(&pool, &[2, 8], &[0, 1, 2]).is_err());
    assert!(HoldoutSet::new(&pool, &[], &[]).is_err());
    assert!(HoldoutSet::new(&pool, &[8, 8], &[]).is_err());
}

#[test]
fn regressor_file_round_trip() {
    let mut rng = seeded(14);
    let xs: Vec<Vec<f64>> = (0..30).map(|_| vec![standard_normal(&mut rng); 3]).collect();
    let ys: Vec<f64> = (0..30).map(|_| standard_normal(&mut rng)).collect();
    let cfg = RegressorConfig { epochs: 3, hidden_dims: vec![4, 3], ..RegressorConfig::default() };
    let reg = fit_regressor(&xs, &ys, BaseScore::Loss, &cfg, &mut rng).unwrap();
    let mut buf = Vec::new();
    write_regressor(&reg, &mut buf).unwrap();
    let back = read_regressor(buf.as_slice()).unwrap();
    assert_eq!(back, reg);

    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("canary-audit-regressor 1\n"));
    let newer = text.replacen("regressor 1", "regressor 9", 1);
    assert!(matches!(read_regressor(newer.as_bytes()), Err(AuditError::Artifact(_))));
    let cut = &text[..text.len() / 2];
    assert!(read_regressor(cut.as_bytes()).is_err());

    let constant = TrainedRegressor::constant(2, BaseScore::Margin, 1.0, 0.5).unwrap();
    let mut buf = Vec::new();
    write_regressor(&constant, &mut buf).unwrap();
    assert_eq!(read_regressor(buf.as_slice()).unwrap(), constant);
}

proptest! {
    #[test]
    fn quantile_affine_invariant(
        s in -50.0f64..50.0,
        mu in -50.0f64..50.0,
        sigma in 0.01f64..20.0,
        a in 0.01f64..100.0,
        b in -100.0f64..100.0,
    ) {
        let q = quantile(s, mu, sigma);
        let qa = quantile(a * s + b, a * mu + b, a * sigma);
        prop_assert!((q - qa).abs() <= 1e-9);
    }

    #[test]
    // |z| <= 8 keeps Phi representably below 1.
    fn quantile_in_unit_interval(s in -2.0f64..2.0, mu in -2.0f64..2.0, sigma in 0.5f64..10.0) {
        let q = quantile(s, mu, sigma);
        prop_assert!(q > 0.0 && q < 1.0);
    }
}
