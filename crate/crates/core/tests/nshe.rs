use std::collections::BTreeSet;

use ndarray::Axis;

use noisylab::config::ExperimentConfig;
use noisylab::data::{make_gaussian_dataset, Dataset, SampleId};
use noisylab::netcore::{init_network, train_step, LossConfig, NetworkParameters, OptimizerState, TrainConfig};
use noisylab::nshe::{discard_ratio, run_nshe, select_discard_set, NsheConfig, NsheObserver};
use noisylab::pipeline::{load_data, run_pipeline, Ablation};
use noisylab::seed::derive_seed;

fn noisy_set(n: usize) -> Dataset {
    let cfg = ExperimentConfig {
        samples: n,
        seed: 3,
        ..ExperimentConfig::default()
    };
    load_data(&cfg).unwrap().0
}

fn config(tau: f64, m: f64) -> NsheConfig {
    NsheConfig {
        hidden: vec![16, 8],
        train: TrainConfig {
            epochs: 6,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            decay_start: 3,
            loss: LossConfig::cross_entropy(),
        },
        discard_ratio: tau,
        ema_momentum: m,
        gamma: 2.0,
        seed: 12,
    }
}

#[derive(Default)]
struct Probe {
    ids: Vec<SampleId>,
    discard: Vec<BTreeSet<SampleId>>,
    batches: Vec<Vec<usize>>,
    leaked: usize,
    pairs: Vec<(NetworkParameters, NetworkParameters)>,
}

impl NsheObserver for Probe {
    fn on_discard_set(&mut self, _epoch: usize, discard: &BTreeSet<SampleId>) {
        self.discard.push(discard.clone());
    }

    fn on_batch(&mut self, _epoch: usize, rows: &[usize]) {
        let current = self.discard.last().unwrap();
        self.leaked += rows.iter().filter(|&&r| current.contains(&self.ids[r])).count();
        self.batches.push(rows.to_vec());
    }

    fn on_iteration(&mut self, student: &NetworkParameters, teacher: &NetworkParameters) {
        self.pairs.push((student.clone(), teacher.clone()));
    }
}

fn run(ds: &Dataset, cfg: &NsheConfig) -> (Probe, noisylab::nshe::NsheOutcome) {
    let mut probe = Probe {
        ids: ds.ids().to_vec(),
        ..Probe::default()
    };
    let out = run_nshe(ds, cfg, None, &mut probe).unwrap();
    (probe, out)
}

#[test]
fn discard_ratio_examples() {
    assert!((discard_ratio(0.2) - 0.02).abs() < 1e-15);
    assert_eq!(discard_ratio(0.0), 0.0);
    assert!((discard_ratio(0.4) - 0.04).abs() < 1e-15);
}

#[test]
fn discard_set_examples() {
    let ds = make_gaussian_dataset(50, 3, 2, 1.0, 1).unwrap();
    let teacher = init_network(&[3, 4, 2], 5).unwrap();
    assert!(select_discard_set(&teacher, &ds, 0.0).unwrap().is_empty());
    let set = select_discard_set(&teacher, &ds, 0.03).unwrap();
    assert_eq!(set.len(), 3);
    let probs = teacher.label_probabilities(ds.features(), ds.labels()).unwrap();
    let worst_kept = ds
        .ids()
        .iter()
        .zip(&probs)
        .filter(|(id, _)| !set.contains(id))
        .map(|(_, &p)| p)
        .fold(f64::INFINITY, f64::min);
    for (id, &p) in ds.ids().iter().zip(&probs) {
        if set.contains(id) {
            assert!(p <= worst_kept);
        }
    }
}

#[test]
fn discarded_samples_never_reach_a_batch() {
    let ds = noisy_set(600);
    let (probe, out) = run(&ds, &config(0.1, 0.9));
    assert_eq!(probe.leaked, 0);
    assert_eq!(probe.discard.len(), 6);
    assert!(probe.discard.iter().all(|d| d.len() == 60));
    let distinct: BTreeSet<&BTreeSet<SampleId>> = probe.discard.iter().collect();
    assert!(distinct.len() > 1, "discard set never changed");
    let used: usize = probe.batches.iter().map(Vec::len).sum();
    assert_eq!(used, 6 * (600 - 60));
    assert_eq!(out.log.iter().map(|e| e.discarded).collect::<Vec<_>>(), vec![60; 6]);
}

#[test]
fn both_models_start_from_the_same_weights() {
    let ds = noisy_set(400);
    let cfg = config(0.05, 0.9);
    let (probe, out) = run(&ds, &cfg);
    assert_eq!(out.init, init_network(out.init.layer_dims(), derive_seed(cfg.seed, "init")).unwrap());

    // first student step from the shared init, replayed by hand
    let rows = &probe.batches[0];
    let mut student = out.init.clone();
    let mut opt = OptimizerState::new(&student, cfg.train.learning_rate, cfg.train.momentum).unwrap();
    let x = ds.features().select(Axis(0), rows);
    let y: Vec<usize> = rows.iter().map(|&r| ds.labels()[r]).collect();
    train_step(&mut student, &mut opt, x.view(), &y, None, &LossConfig::focal(cfg.gamma).unwrap()).unwrap();
    let (s1, t1) = &probe.pairs[0];
    assert_eq!(&student, s1);
    // teacher took one EMA step from the same init toward it
    for ((t, i), s) in t1.to_flat().iter().zip(out.init.to_flat()).zip(s1.to_flat()) {
        assert!((t - i - 0.1 * (s - i)).abs() < 1e-15);
    }
}

#[test]
fn zero_momentum_teacher_tracks_the_student() {
    let ds = noisy_set(300);
    let (probe, out) = run(&ds, &config(0.05, 0.0));
    assert!(probe.pairs.iter().all(|(s, t)| s == t));
    assert_eq!(out.teacher, out.student);
}

#[test]
fn teacher_moves_a_fixed_share_toward_the_student() {
    let ds = noisy_set(300);
    let m = 0.99;
    let (probe, out) = run(&ds, &config(0.05, m));
    let mut prev = out.init.clone();
    for (s, t) in &probe.pairs {
        let moved = t.distance(&prev).unwrap();
        let gap = s.distance(&prev).unwrap();
        assert!(moved <= (1.0 - m) * gap * (1.0 + 1e-9) + 1e-15);
        assert!((moved - (1.0 - m) * gap).abs() <= 1e-9 * gap.max(1e-12));
        prev = t.clone();
    }
}

#[test]
fn corrected_training_beats_plain_training_on_raw_labels() {
    let cfg = ExperimentConfig::default();
    let full = run_pipeline(&cfg).unwrap().report.test_accuracy();
    let plain = run_pipeline(&Ablation::WithoutWhole.apply(&cfg)).unwrap().report.test_accuracy();
    assert!(full >= plain, "{full} vs {plain}");
}
