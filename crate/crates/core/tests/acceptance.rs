//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.
//!
//! `cargo test -p canary-audit --test acceptance`

use std::cmp::Ordering;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use canary_audit::estimator::{eps_lower_bound, sweep_binary, AuditOutcome, BudgetGrid};
use canary_audit::game::{guess_binary, partition_binary};
use canary_audit::harness::{preset, run_experiment, summary_csv, ExperimentConfig, ScoreMethod, PRESET_NAMES};
use canary_audit::mechanisms::{dpsgd_train, make_synthetic, DpSgdConfig, SyntheticSpec};
use canary_audit::rng::seeded;
use canary_audit::scores::{rescore_all, BaseScore, TrainedRegressor};
use canary_audit::smallnet::{example_grad, example_loss, Activation, Head, Loss, NetConfig, NetParams, Target};

/// Null pilot (tools/null_pilot.py, 40000 trials): mean and sd of the
/// per-trial best eps_max under eps_true = 0.
const NULL_MEAN: f64 = 0.049_534;
const NULL_SD: f64 = 0.106_328;
/// One-sided 99% normal quantile.
const Z_99: f64 = 2.326;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn lb(k: u64, c: u64, arity: u64) -> f64 {
    eps_lower_bound(&AuditOutcome::new(k, c, arity).unwrap()).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rr_config(name: &str, trials: usize, seed: u64, eps: f64, m: usize, kary: bool, sweep: &str) -> ExperimentConfig {
    let text = format!(
        r#"
name = "{name}"
trials = {trials}
base_seed = {seed}
alpha = 0.05

[data]
n = {n}
m = {m}
r = 0
dim = 2
num_classes = 2
heterogeneity = 0.0

[mechanism]
kind = "rr"
eps_true = {eps:?}

[games]
binary = true
kary = {kary}
arity = 2

[scores]
methods = ["release"]

[sweep]
{sweep}
"#,
        n = m / 2
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

fn criterion_1() -> Verdict {
    // P[Bin(10, p) >= 10] = p^10 = alpha.
    let p = 0.05f64.powf(0.1);
    let want_a = (p / (1.0 - p)).ln();
    // P[Bin(1, p) >= 1] = p = alpha with p = e^eps / (e^eps + 99).
    let want_b = (0.05f64 * 99.0 / 0.95).ln();
    let a = lb(10, 10, 2);
    let b = lb(1, 1, 100);
    let c = lb(100, 50, 2);
    let pass = (a - want_a).abs() <= 1e-3 && (b - want_b).abs() <= 1e-3 && c == 0.0;
    verdict(pass, format!("lb(10,10,2)={a:.6} want {want_a:.6}; lb(1,1,100)={b:.6} want {want_b:.6}; lb(100,50,2)={c}"))
}

fn criterion_2() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, eps) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let cfg = rr_config("soundness", 200, 200 + i as u64, eps, 2000, false, "budgets = [2000]");
        let result = run_experiment(&cfg).unwrap();
        let over = result.trials.iter().filter(|t| t.methods[0].eps_max > eps).count();
        pass &= over * 10 <= result.trials.len();
        parts.push(format!("eps_true {eps}: {over}/200 above"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_3() -> Verdict {
    let mut means = Vec::new();
    for eps in [0.5, 1.0, 2.0, 4.0] {
        let cfg = rr_config("power", 20, 300, eps, 1000, true, "step = 10");
        let result = run_experiment(&cfg).unwrap();
        means.push(result.aggregate_for(ScoreMethod::Release).unwrap().eps_max);
    }
    let pass = means.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = means.iter().map(|v| format!("{v:.4}")).collect();
    verdict(pass, format!("mean best eps over eps_true 0.5,1,2,4: {}", shown.join(", ")))
}

fn objective(t: &[i8], y: &[f64]) -> f64 {
    t.iter().zip(y).map(|(&t, &y)| f64::from(t) * y).sum()
}

fn best_by_enumeration(y: &[f64], k_plus: usize, k_minus: usize) -> f64 {
    let m = y.len();
    let mut best = f64::NEG_INFINITY;
    let mut t = vec![0i8; m];
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let (mut plus, mut minus) = (0, 0);
        for ti in t.iter_mut() {
            *ti = (c % 3) as i8 - 1;
            c /= 3;
            plus += usize::from(*ti == 1);
            minus += usize::from(*ti == -1);
        }
        if plus == k_plus && minus == k_minus {
            best = best.max(objective(&t, y));
        }
    }
    best
}

fn criterion_4() -> Verdict {
    let mut rng = seeded(404);
    let m = 8;
    let mut mismatches = 0;
    let mut cases = 0;
    for v in 0..100 {
        // Half the vectors are small integers so ties occur.
        let y: Vec<f64> = if v % 2 == 0 {
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            (0..m).map(|_| f64::from(rng.gen_range(-2i32..=2))).collect()
        };
        for k_plus in 0..=m {
            for k_minus in 0..=m - k_plus {
                let t = guess_binary(&y, k_plus, k_minus).unwrap();
                let counts_ok = t.iter().filter(|&&x| x == 1).count() == k_plus
                    && t.iter().filter(|&&x| x == -1).count() == k_minus;
                if !counts_ok || objective(&t, &y) != best_by_enumeration(&y, k_plus, k_minus) {
                    mismatches += 1;
                }
                cases += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} mismatches in {cases} (vector, k_plus, k_minus) cases"))
}

fn random_net(rng: &mut impl Rng, head: Head) -> NetParams {
    let input_dim = rng.gen_range(1..6);
    let hidden: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..7)).collect();
    let mut cfg = match head {
        Head::Logits => NetConfig::classifier(input_dim, hidden, rng.gen_range(2..6)),
        Head::Gaussian => NetConfig::gaussian_regressor(input_dim, hidden),
    };
    cfg.activation = if rng.gen_bool(0.5) { Activation::Relu } else { Activation::Tanh };
    let values = (0..cfg.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NetParams::from_values(cfg, values).unwrap()
}

/// Largest relative error between the analytic gradient and central
/// differences (step 1e-5); denominators are floored at 1e-6.
fn fd_error(p: &NetParams, x: &[f64], target: Target, loss: Loss) -> f64 {
    let (_, analytic) = example_grad(p, x, target, loss).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut plus = p.clone();
        plus.values_mut()[i] += h;
        let mut minus = p.clone();
        minus.values_mut()[i] -= h;
        let numeric =
            (example_loss(&plus, x, target, loss).unwrap() - example_loss(&minus, x, target, loss).unwrap()) / (2.0 * h);
        let a = analytic.values()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

fn criterion_5() -> Verdict {
    let mut rng = seeded(505);
    let (mut ce, mut nll) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        for head in [Head::Logits, Head::Gaussian] {
            let p = random_net(&mut rng, head);
            let x: Vec<f64> = (0..p.config().input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            match head {
                Head::Logits => {
                    let label = rng.gen_range(0..p.config().output_dim);
                    ce = ce.max(fd_error(&p, &x, Target::Label(label), Loss::CrossEntropy));
                }
                Head::Gaussian => {
                    let s = rng.gen_range(-2.0..2.0);
                    nll = nll.max(fd_error(&p, &x, Target::Value(s), Loss::GaussianNll));
                }
            }
        }
    }
    verdict(ce <= 1e-4 && nll <= 1e-4, format!("worst relative error: cross-entropy {ce:.2e}, gaussian nll {nll:.2e}"))
}

const HETEROGENEOUS: &str = r#"
name = "heterogeneous"
trials = 10
base_seed = 606
alpha = 0.05

[data]
n = 1000
m = 1000
r = 500
dim = 10
num_classes = 4
heterogeneity = 1.0
separation = 3.0

[mechanism]
kind = "dpsgd"
clip_norm = 1.0
noise_multiplier = 0.5
steps = 1500
batch_size = 100
lr = 0.5
hidden_dims = [64]

[games]
binary = true
kary = true
arity = 2

[scores]
methods = ["margin", "loss", "quantile"]

[scores.quantile]
base = "margin"

[sweep]
step = 10
"#;

fn criterion_6() -> Verdict {
    let cfg = ExperimentConfig::from_toml_str(HETEROGENEOUS).unwrap();
    let result = run_experiment(&cfg).unwrap();
    let margin = result.aggregate_for(ScoreMethod::Margin).unwrap().eps_max;
    let quantile = result.aggregate_for(ScoreMethod::Quantile).unwrap().eps_max;
    let loss = result.aggregate_for(ScoreMethod::Loss).unwrap().eps_max;
    verdict(
        quantile >= margin,
        format!(
            "mean eps_max quantile {quantile:.4}, margin {margin:.4} (improvement {:+.4}); loss {loss:.4}",
            quantile - margin
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = seeded(707);
    let spec = SyntheticSpec { n_total: 1500, dim: 10, num_classes: 4, heterogeneity: 1.0, separation: 3.0 };
    let data = make_synthetic(&spec, &mut rng).unwrap();
    let canary_ids: Vec<usize> = (0..1000).collect();
    let non_canary_ids: Vec<usize> = (1000..1500).collect();
    let (state, included) = partition_binary(&canary_ids, &non_canary_ids, &mut rng).unwrap();
    let train = data.select(&included);
    let cfg = DpSgdConfig {
        clip_norm: 1.0,
        noise_multiplier: 0.5,
        steps: 500,
        batch_size: 100,
        lr: 0.5,
        net: NetConfig::classifier(10, vec![32], 4),
    };
    let model = dpsgd_train(&train, &cfg, &mut rng).unwrap();
    let canaries = data.select(&canary_ids);
    let base: Vec<f64> =
        canaries.iter().map(|ex| BaseScore::Margin.score(&model, ex).unwrap().value).collect();
    let mu = mean(&base);
    let sd = (base.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / base.len() as f64).sqrt();
    let constant = TrainedRegressor::constant(10, BaseScore::Margin, mu, sd.max(1e-3)).unwrap();
    let (q, _) = rescore_all(&constant, &model, &canaries).unwrap();

    let mut flipped = 0usize;
    for i in 0..base.len() {
        for j in i + 1..base.len() {
            let a: Ordering = base[i].total_cmp(&base[j]);
            if a != q[i].total_cmp(&q[j]) {
                flipped += 1;
            }
        }
    }
    let grid = BudgetGrid::multiples(10, base.len()).unwrap();
    let s_base = sweep_binary(&state.selection, &base, &grid, 0.05).unwrap();
    let s_q = sweep_binary(&state.selection, &q, &grid, 0.05).unwrap();
    let same_curve = s_base.curve == s_q.curve;
    verdict(
        flipped == 0 && same_curve,
        format!(
            "{flipped} pair orderings differ; sweep curves identical at {} budgets: {same_curve}",
            s_base.curve.len()
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut differing = Vec::new();
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        let a = summary_csv(&run_experiment(&cfg).unwrap()).unwrap();
        let b = summary_csv(&run_experiment(&cfg).unwrap()).unwrap();
        if a.as_bytes() != b.as_bytes() {
            differing.push(*name);
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} presets run twice; differing summaries: {:?}", PRESET_NAMES.len(), differing),
    )
}

fn criterion_9() -> Verdict {
    let cfg = rr_config("null", 100, 909, 0.0, 1000, true, "step = 10");
    let result = run_experiment(&cfg).unwrap();
    let mut v: Vec<f64> = result.trials.iter().map(|t| t.methods[0].eps_max).collect();
    v.sort_by(f64::total_cmp);
    let median = 0.5 * (v[49] + v[50]);
    let m = mean(&v);
    let limit = NULL_MEAN + Z_99 * NULL_SD / (v.len() as f64).sqrt();
    verdict(
        median <= 0.2 && m <= limit,
        format!("median {median:.4} (limit 0.2), mean {m:.4} (limit {limit:.4}, pilot mean {NULL_MEAN})"),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Verdict); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "criterion {n}: {} ({:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
