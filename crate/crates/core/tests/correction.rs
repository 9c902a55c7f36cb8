use std::collections::{BTreeSet, HashSet};

use ndarray::Array2;
use proptest::prelude::*;

use noisylab::config::ExperimentConfig;
use noisylab::correction::{
    baseline_drop_by_mean, generate_pseudo_labels, post_process, run_label_correction, train_correction_model,
    PseudoLabels, SampleAction,
};
use noisylab::data::{Dataset, SampleId};
use noisylab::ehn::{easy_ratio, run_ehn, EhnConfig, EhnPartition, Part};
use noisylab::netcore::{accuracy, NetworkParameters, TrainObserver};
use noisylab::pipeline::{correction_config, load_data};
use noisylab::seed::derive_indexed;

fn standard(seed: u64, rho: f64) -> (ExperimentConfig, Dataset) {
    let cfg = ExperimentConfig {
        seed,
        noise_rho: rho,
        ..ExperimentConfig::default()
    };
    let (train, _) = load_data(&cfg).unwrap();
    (cfg, train)
}

/// Records the dataset rows of every training batch.
struct SeenRows<'a> {
    ids: &'a [SampleId],
    seen: BTreeSet<SampleId>,
}

impl TrainObserver for SeenRows<'_> {
    fn on_batch(&mut self, _epoch: usize, rows: &[usize]) {
        self.seen.extend(rows.iter().map(|&r| self.ids[r]));
    }
}

#[test]
fn single_round_is_the_plain_composition() {
    let (cfg, train) = standard(4, 0.3);
    let ccfg = correction_config(&cfg, 0.3);
    let run = run_label_correction(&train, &ccfg).unwrap();

    let ehn = run_ehn(
        &train,
        &EhnConfig {
            easy_ratio: easy_ratio(0.3),
            seed: derive_indexed(ccfg.ehn.seed, "round", 1),
            ..ccfg.ehn.clone()
        },
    )
    .unwrap();
    assert_eq!(ehn.partition, run.ehn.partition);
    let train_ids: HashSet<SampleId> = ehn.partition.easy.iter().chain(&ehn.partition.hard).copied().collect();
    let correction_set = train.subset_by_ids(&train_ids);
    let mut seen = SeenRows {
        ids: correction_set.ids(),
        seen: BTreeSet::new(),
    };
    let model = train_correction_model(
        &correction_set,
        &ccfg.hidden,
        &ccfg.train,
        derive_indexed(ccfg.seed, "round", 1),
        &mut seen,
    )
    .unwrap();
    assert_eq!(model, run.model);
    // the loss never sees a sample of the noisy set
    assert!(seen.seen.is_disjoint(&ehn.partition.noisy));
    assert_eq!(seen.seen.len(), train_ids.len());

    let suspects: HashSet<SampleId> = ehn.partition.suspects().into_iter().collect();
    let pseudo = generate_pseudo_labels(&model, &train.subset_by_ids(&suspects)).unwrap();
    assert_eq!(pseudo.keys().copied().collect::<HashSet<_>>(), suspects);
    assert_eq!(pseudo, run.pseudo_labels);
    let outcome = post_process(&ehn.partition, &train, &pseudo).unwrap();
    assert_eq!(outcome.dataset, run.outcome.dataset);
    assert_eq!(outcome.dropped, run.outcome.dropped);

    // final noise ratio drops below the injected one; every id has an action
    assert!(run.outcome.dataset.noise_ratio().unwrap() < 0.3);
    assert_eq!(run.outcome.actions.len(), train.len());
    assert!(train.ids().iter().all(|id| run.outcome.actions.contains_key(id)));
    assert_eq!(run.outcome.dataset.len() + run.outcome.dropped.len(), train.len());

    // the correction model beats the class prior on its own training set
    let prior = *correction_set.class_histogram().iter().max().unwrap() as f64 / correction_set.len() as f64;
    assert!(accuracy(&model, correction_set.features(), correction_set.labels()).unwrap() > prior);
}

#[test]
fn later_rounds_relabel_without_dropping() {
    let (mut cfg, train) = standard(5, 0.3);
    cfg.rounds = 2;
    let run = run_label_correction(&train, &correction_config(&cfg, 0.3)).unwrap();
    assert_eq!(run.rounds.len(), 2);
    assert_eq!(run.round_input.len(), train.len());
    assert_eq!(run.round_input.ids(), train.ids());
    assert!(run.rounds[1].noise_before.unwrap() < run.rounds[0].noise_before.unwrap());
}

#[test]
fn baseline_examples() {
    let (cfg, train) = standard(6, 0.2);
    let run = run_label_correction(&train, &correction_config(&cfg, 0.2)).unwrap();
    let d = &run.ehn.diagnostics;
    let all = baseline_drop_by_mean(&train, &d.history, train.len(), &d.classifier_final).unwrap();
    assert!(all.dropped.is_empty());
    assert_eq!(all.dataset.len(), train.len());
    let keep = run.outcome.dataset.len();
    let a = baseline_drop_by_mean(&train, &d.history, keep, &d.classifier_final).unwrap();
    let b = baseline_drop_by_mean(&train, &d.history, keep, &d.classifier_final).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.dataset.len(), keep);
    assert!(run.outcome.dataset.noisy_count().unwrap() <= a.dataset.noisy_count().unwrap());
}

#[test]
fn pseudo_labels_take_the_argmax() {
    let (_, train) = standard(0, 0.0);
    let ds = train.subset(&[0, 1]);
    // a 1-layer net whose outputs ignore the input: bias picks the class
    let mut net = noisylab::netcore::init_network(&[ds.feature_dim(), 2], 0).unwrap();
    let zeros = vec![0.0; net.parameter_count()];
    net = net.with_flat(&zeros).unwrap();
    let tie = generate_pseudo_labels(&net, &ds).unwrap();
    assert!(tie.values().all(|&g| g == 0));
    let mut values = zeros.clone();
    *values.last_mut().unwrap() = 2.0;
    let favors_one: NetworkParameters = net.with_flat(&values).unwrap();
    assert!(generate_pseudo_labels(&favors_one, &ds).unwrap().values().all(|&g| g == 1));
}

fn case_strategy() -> impl Strategy<Value = (Dataset, EhnPartition, PseudoLabels)> {
    (2usize..40, 2usize..4).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(0..c, n),
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(0..c, n),
        )
            .prop_map(move |(labels, parts, pseudo)| {
                let ids: Vec<SampleId> = (0..n as u64).map(|i| 100 + i * 2).collect();
                let ds = Dataset::from_parts(Array2::zeros((n, 1)), labels, None, c, ids.clone()).unwrap();
                let mut p = EhnPartition::default();
                let mut g = PseudoLabels::new();
                for (i, &id) in ids.iter().enumerate() {
                    match parts[i] {
                        0 => {
                            p.easy.insert(id);
                        }
                        1 => {
                            p.hard.insert(id);
                            g.insert(id, pseudo[i]);
                        }
                        _ => {
                            p.noisy.insert(id);
                            g.insert(id, pseudo[i]);
                        }
                    }
                }
                (ds, p, g)
            })
    })
}

proptest! {
    #[test]
    fn post_process_follows_the_drop_rule((ds, partition, pseudo) in case_strategy()) {
        let out = post_process(&partition, &ds, &pseudo).unwrap();
        prop_assert_eq!(out.dataset.len() + out.dropped.len(), ds.len());
        prop_assert_eq!(out.actions.len(), ds.len());
        let kept = out.dataset.id_index();
        for (i, &id) in ds.ids().iter().enumerate() {
            let y = ds.labels()[i];
            let action = out.actions[&id];
            match partition.part_of(id).unwrap() {
                Part::Easy => {
                    prop_assert_eq!(action, SampleAction::Kept);
                    prop_assert_eq!(out.dataset.labels()[kept[&id]], y);
                }
                part => {
                    let g = pseudo[&id];
                    let drop = (part == Part::Noisy) == (g == y);
                    prop_assert_eq!(out.dropped.contains(&id), drop);
                    prop_assert_eq!(kept.contains_key(&id), !drop);
                    if drop {
                        prop_assert_eq!(action, SampleAction::Dropped);
                    } else {
                        prop_assert_eq!(out.dataset.labels()[kept[&id]], g);
                        prop_assert_eq!(action, if g == y { SampleAction::Kept } else { SampleAction::Relabeled });
                    }
                }
            }
        }
    }
}
