use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vaxstance::eval::roc_auc;
use vaxstance::model::{encode_model, train, TrainConfig};

const D: usize = 16;

/// Two Gaussian clusters at -mu and +mu along every coordinate, unit variance.
fn clusters(n: usize, mu: f64, seed: u64) -> Vec<(Vec<f64>, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let y = (i % 2) as u8;
            let sign = if y == 1 { 1.0 } else { -1.0 };
            let x = (0..D)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sign * mu + z
                })
                .collect();
            (x, y)
        })
        .collect()
}

fn refs(data: &[(Vec<f64>, u8)]) -> Vec<(&[f64], u8)> {
    data.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
}

/// Smallest class-1 projection minus largest class-0 projection onto the
/// normalized all-ones direction.
fn margin(data: &[(Vec<f64>, u8)]) -> f64 {
    let proj = |x: &[f64]| x.iter().sum::<f64>() / (D as f64).sqrt();
    let lo1 = data
        .iter()
        .filter(|d| d.1 == 1)
        .map(|d| proj(&d.0))
        .fold(f64::INFINITY, f64::min);
    let hi0 = data
        .iter()
        .filter(|d| d.1 == 0)
        .map(|d| proj(&d.0))
        .fold(f64::NEG_INFINITY, f64::max);
    lo1 - hi0
}

fn separable_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 50,
        early_stop_patience: 50,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_clusters_reach_98_percent() {
    let data = clusters(400, 1.5, 11);
    assert!(margin(&data) > 1.0, "generator did not produce a separable sample");
    let (tr, va) = data.split_at(300);
    let out = train(&refs(tr), &refs(va), &separable_config(), "test").unwrap();
    let correct = va
        .iter()
        .filter(|(x, y)| u8::from(out.params.predict_p1(x).unwrap() >= 0.5) == *y)
        .count();
    let acc = correct as f64 / va.len() as f64;
    assert!(acc >= 0.98, "validation accuracy {acc}");
    assert!(out.log.len() <= 50);
}

#[test]
fn training_loss_is_nearly_monotone() {
    let data = clusters(400, 1.5, 12);
    let (tr, va) = data.split_at(300);
    let out = train(&refs(tr), &refs(va), &separable_config(), "test").unwrap();
    let losses: Vec<f64> = out.log.iter().map(|e| e.train_loss).collect();
    let blips: Vec<f64> = losses
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    assert!(blips.len() <= 3, "{} upward steps: {losses:?}", blips.len());
    assert!(blips.iter().all(|&b| b < 0.05), "blips {blips:?}");
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let data = clusters(200, 0.5, 13);
    let (tr, va) = data.split_at(150);
    let cfg = TrainConfig {
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let a = train(&refs(tr), &refs(va), &cfg, "test").unwrap();
    let b = train(&refs(tr), &refs(va), &cfg, "test").unwrap();
    assert_eq!(encode_model(&a.params), encode_model(&b.params));
    assert_eq!(a.log, b.log);
    let c = train(&refs(tr), &refs(va), &TrainConfig { seed: 99, ..cfg }, "test").unwrap();
    assert_ne!(encode_model(&a.params), encode_model(&c.params));
}

#[test]
fn shuffled_labels_give_chance_auc() {
    let mut aucs = Vec::new();
    for rerun in 0..20u64 {
        let mut data = clusters(600, 1.5, 100 + rerun);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + rerun);
        for d in data.iter_mut() {
            d.1 = rng.random_range(0..2);
        }
        let (tr, va) = data.split_at(400);
        let cfg = TrainConfig {
            max_epochs: 30,
            seed: rerun,
            ..TrainConfig::default()
        };
        let out = train(&refs(tr), &refs(va), &cfg, "test").unwrap();
        let scores: Vec<f64> = va.iter().map(|(x, _)| out.params.predict_p1(x).unwrap()).collect();
        let labels: Vec<u8> = va.iter().map(|d| d.1).collect();
        aucs.push(roc_auc(&scores, &labels).unwrap());
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let sd = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let half_width = 1.96 * sd / n.sqrt();
    assert!(
        mean - half_width >= 0.4 && mean + half_width <= 0.6,
        "mean {mean:.4} +- {half_width:.4} over {aucs:?}"
    );
}
