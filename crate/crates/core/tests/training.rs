use fairsel::data::{generate_synthetic, inject_label_bias, split_table, BiasSpec, DatasetTable, GenSpec, Split};
use fairsel::model::{softmax, Model, ModelSpec};
use fairsel::proxy::{build_holdout_proxy, ProxyPredictor, ProxyTraining};
use fairsel::rng::{stream, Stream};
use fairsel::selection::{ObjectiveVariant, SelectorConfig, SelectorKind};
use fairsel::trainer::{run_training, sweep, Budget, CandidateStream, MetricsLog, SweepGrid, TrainerConfig};
use rand::Rng;

fn tables(n: usize, seed: u64) -> (DatasetTable, DatasetTable, DatasetTable) {
    let all = generate_synthetic(&GenSpec::two_gaussians(n + 300, 2, 2.0, 0.4), seed).unwrap();
    let mut parts = split_table(&all, &[(Split::Train, n), (Split::Test, 200), (Split::Holdout, 100)], seed)
        .unwrap()
        .into_iter();
    let train = inject_label_bias(&parts.next().unwrap(), &BiasSpec::symmetric(0.3, 2, &[1]).unwrap(), seed).unwrap();
    (train, parts.next().unwrap(), parts.next().unwrap())
}

fn proxy(holdout: &DatasetTable) -> ProxyPredictor {
    let training = ProxyTraining {
        epochs: 10,
        ..Default::default()
    };
    build_holdout_proxy(holdout, ModelSpec::linear(2, 2), &training).unwrap()
}

/// Plain AdamW written out here rather than borrowed from the library.
fn adamw(params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: i32) {
    let (lr, wd, b1, b2, eps) = (1e-3, 0.01, 0.9, 0.999, 1e-8);
    for i in 0..params.len() {
        params[i] -= lr * wd * params[i];
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        let mh = m[i] / (1.0 - b1.powi(t));
        let vh = v[i] / (1.0 - b2.powi(t));
        params[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

/// Gradient of the linear softmax cross-entropy, weights row-major then bias.
fn linear_grad(params: &[f64], x: &[f64], y: usize, k: usize) -> Vec<f64> {
    let d = x.len();
    let logits: Vec<f64> = (0..k)
        .map(|c| params[k * d + c] + (0..d).map(|j| params[c * d + j] * x[j]).sum::<f64>())
        .collect();
    let p = softmax(&logits);
    let mut g = vec![0.0; params.len()];
    for c in 0..k {
        let r = p[c] - f64::from(u8::from(c == y));
        for j in 0..d {
            g[c * d + j] = r * x[j];
        }
        g[k * d + c] = r;
    }
    g
}

#[test]
fn uniform_training_matches_reference_loop() {
    let (train, test, _) = tables(400, 3);
    let spec = ModelSpec::linear(2, 2);
    let mut cfg = TrainerConfig::new(spec, SelectorConfig::new(SelectorKind::Uniform));
    cfg.small_batch = 8;
    cfg.candidate_batch = 40;
    cfg.budget = Budget::Steps(25);
    cfg.seed = 9;
    assert!(!cfg.resample);
    let out = run_training(&cfg, &train, &test, None).unwrap();

    // the layout assumed by linear_grad
    let probe = Model::new(spec, vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
    let logits = [1.0 * 0.3 + 2.0 * -1.0 + 0.5, 3.0 * 0.3 + 4.0 * -1.0 - 0.5];
    let expect = softmax(&logits);
    let got = probe.forward(&[0.3, -1.0]).unwrap();
    assert!(expect.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));

    let mut params = Model::init(spec, &mut stream(9, Stream::Init)).unwrap().into_params();
    let (mut m, mut v) = (vec![0.0; params.len()], vec![0.0; params.len()]);
    let mut candidates = CandidateStream::new(train.len(), stream(9, Stream::Candidates));
    let mut sel = stream(9, Stream::Selection);
    for t in 1..=25 {
        let batch = candidates.next_batch(40);
        let mut keyed: Vec<(f64, u64, usize)> = batch
            .iter()
            .map(|&i| (sel.random::<f64>(), train.examples()[i].id, i))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut grad = vec![0.0; params.len()];
        for &(_, _, i) in &keyed[..8] {
            let ex = &train.examples()[i];
            for (acc, g) in grad.iter_mut().zip(linear_grad(&params, &ex.features, ex.y, 2)) {
                *acc += g / 8.0;
            }
        }
        adamw(&mut params, &grad, &mut m, &mut v, t);
    }
    for (a, b) in params.iter().zip(out.model.params()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn zero_steps_log_only_initial_row() {
    let (train, test, _) = tables(200, 1);
    let mut cfg = TrainerConfig::new(ModelSpec::linear(2, 2), SelectorConfig::new(SelectorKind::GradNorm));
    cfg.budget = Budget::Steps(0);
    let out = run_training(&cfg, &train, &test, None).unwrap();
    assert_eq!(out.log.rows.len(), 1);
    assert_eq!(out.log.rows[0].step, 0);
    assert!(out.log.rows[0].disc_sel_rate.is_none());
    let init = Model::init(cfg.model, &mut stream(cfg.seed, Stream::Init)).unwrap();
    assert_eq!(init.params(), out.model.params());
}

#[test]
fn metrics_log_round_trips_through_csv() {
    let (train, test, holdout) = tables(300, 2);
    let p = proxy(&holdout);
    let mut cfg = TrainerConfig::new(
        ModelSpec::mlp(2, 4, 2),
        SelectorConfig::fair(0.9, 0.3, ObjectiveVariant::Additive),
    );
    cfg.budget = Budget::Epochs(2);
    let out = run_training(&cfg, &train, &test, Some(&p)).unwrap();
    let text = out.log.to_csv_string();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    std::fs::write(&path, &text).unwrap();
    let back = MetricsLog::load_csv(&path).unwrap();
    assert_eq!(back.to_csv_string(), text);
    assert_eq!(out.log.epoch_accuracies().len(), 2);
}

#[test]
fn fair_selection_without_proxy_is_rejected() {
    let (train, test, _) = tables(200, 1);
    let cfg = TrainerConfig::new(ModelSpec::linear(2, 2), SelectorConfig::fair(0.5, 0.5, ObjectiveVariant::Additive));
    assert!(run_training(&cfg, &train, &test, None).is_err());
}

#[test]
fn every_selector_improves_on_initial_model() {
    let (train, test, holdout) = tables(600, 4);
    let p = proxy(&holdout);
    for sel in [
        SelectorConfig::new(SelectorKind::Uniform),
        SelectorConfig::new(SelectorKind::GradNorm),
        SelectorConfig::new(SelectorKind::GradNormIs),
        SelectorConfig::new(SelectorKind::RhoLoss),
        SelectorConfig::fair(0.9, 0.3, ObjectiveVariant::Reducible),
    ] {
        let kind = sel.kind;
        let mut cfg = TrainerConfig::new(ModelSpec::linear(2, 2), sel);
        cfg.budget = Budget::Epochs(10);
        cfg.optimizer.learning_rate = 0.01;
        let out = run_training(&cfg, &train, &test, Some(&p)).unwrap();
        let first = out.log.rows.first().unwrap().accuracy;
        let last = out.log.final_row().unwrap().accuracy;
        assert!(last > first && last > 0.5, "{kind:?}: {first} -> {last}");
        assert!(out.log.steps.iter().all(|s| s.mean_loss.is_finite()));
    }
}

#[test]
fn sweep_covers_grid_and_handles_single_seed() {
    let (train, test, holdout) = tables(160, 5);
    let p = proxy(&holdout);
    let mut cfg = TrainerConfig::new(ModelSpec::linear(2, 2), SelectorConfig::fair(0.9, 0.3, ObjectiveVariant::Additive));
    cfg.budget = Budget::Steps(3);
    let rows = sweep(&SweepGrid::standard(vec![0, 1]), &cfg, &train, &test, Some(&p)).unwrap();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r.runs == 2 && r.failures.is_empty()));

    let single = sweep(&SweepGrid::standard(vec![7]), &cfg, &train, &test, Some(&p)).unwrap();
    assert!(single.iter().all(|r| r.accuracy.std == Some(0.0)));
    // repeated seed: identical runs, zero spread
    let dup = SweepGrid {
        alphas: vec![0.5],
        gammas: vec![0.5],
        seeds: vec![3, 3, 3],
    };
    let rows = sweep(&dup, &cfg, &train, &test, Some(&p)).unwrap();
    assert_eq!(rows[0].accuracy.std, Some(0.0));
    assert_eq!(rows[0].accuracy.count, 3);
}
