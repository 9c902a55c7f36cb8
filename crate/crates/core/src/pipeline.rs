//! End-to-end runs: data, label correction, final training and evaluation,
//! with every intermediate result rendered as CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::config::{ExperimentConfig, RhoHat};
use crate::correction::{
    baseline_drop_by_mean, outcome_csv, rounds_csv, run_label_correction, train_correction_model, CorrectionConfig,
    RhoSource, SampleAction,
};
use crate::data::{
    estimate_noise_ratio, inject_noise, load_dataset, make_gaussian_dataset, Dataset, EstimatorConfig, NoiseEstimate,
    NoiseSpec,
};
use crate::ehn::{diagnostics_csv, EhnConfig, HistoryClassifierConfig};
use crate::error::{Error, PhaseContext, Result};
use crate::history::{event_profile, EventProfile};
use crate::metrics::{evaluate, ClassificationReport};
use crate::netcore::{
    accuracy, encode_checkpoint, fit, init_network, FitOutcome, LossConfig, NetworkParameters, TrainConfig,
    TrainObserver,
};
use crate::nshe::{epoch_log_csv, network_dims, run_nshe, NsheConfig};
use crate::seed::{derive_indexed, derive_seed};

const GRADIENT_BINS: usize = 20;

/// Rungs of the ablation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    WithoutNshe,
    WithoutNsheEhn,
    WithoutWhole,
}

impl Ablation {
    pub const LADDER: [Ablation; 4] = [
        Ablation::Full,
        Ablation::WithoutNshe,
        Ablation::WithoutNsheEhn,
        Ablation::WithoutWhole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutNshe => "w/o NSHE",
            Ablation::WithoutNsheEhn => "w/o NSHE+EHN",
            Ablation::WithoutWhole => "w/o whole",
        }
    }

    pub fn apply(self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        c.disable_nshe = self != Ablation::Full;
        c.disable_ehn = matches!(self, Ablation::WithoutNsheEhn | Ablation::WithoutWhole);
        c.disable_correction = self == Ablation::WithoutWhole;
        c
    }
}

fn train_config(cfg: &ExperimentConfig, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.lr,
        momentum: cfg.momentum,
        decay_start: cfg.decay_start,
        loss: LossConfig::cross_entropy(),
    }
}

/// The estimator's agreement model assumes a classifier that fits the noisy
/// labels, so it trains longer and at a constant, higher rate.
pub fn estimator_config(cfg: &ExperimentConfig) -> EstimatorConfig {
    EstimatorConfig {
        hidden: cfg.hidden.clone(),
        train: TrainConfig {
            learning_rate: cfg.estimator_lr,
            decay_start: cfg.estimator_epochs,
            ..train_config(cfg, cfg.estimator_epochs)
        },
        seed: derive_seed(cfg.seed, "estimate"),
    }
}

/// EHN settings for a given noise ratio and easy ratio.
pub fn ehn_config(cfg: &ExperimentConfig, rho: f64, tau_e: f64) -> EhnConfig {
    EhnConfig {
        history_epochs: cfg.k,
        easy_ratio: tau_e,
        rho,
        classifier_hidden: cfg.hidden.clone(),
        classifier_train: train_config(cfg, cfg.k),
        history_classifier: HistoryClassifierConfig {
            hidden: cfg.mm_hidden.clone(),
            train: TrainConfig {
                epochs: cfg.mm_epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.mm_lr,
                momentum: cfg.momentum,
                decay_start: cfg.mm_epochs,
                loss: LossConfig::cross_entropy(),
            },
            holdout_fraction: cfg.mm_holdout,
        },
        seed: derive_seed(cfg.seed, "ehn"),
    }
}

pub fn correction_config(cfg: &ExperimentConfig, rho: f64) -> CorrectionConfig {
    CorrectionConfig {
        rounds: cfg.rounds,
        ehn: ehn_config(cfg, rho, cfg.tau_e_for(rho)),
        easy_ratio_fixed: matches!(cfg.tau_e, crate::config::Setting::Value(_)),
        rho_source: match cfg.rho_hat {
            RhoHat::Value(_) => RhoSource::Fixed,
            _ => RhoSource::Estimate(estimator_config(cfg)),
        },
        hidden: cfg.hidden.clone(),
        train: train_config(cfg, cfg.correction_epochs),
        seed: derive_seed(cfg.seed, "correction"),
    }
}

pub fn nshe_config(cfg: &ExperimentConfig, tau: f64) -> NsheConfig {
    NsheConfig {
        hidden: cfg.hidden.clone(),
        train: train_config(cfg, cfg.nshe_epochs),
        discard_ratio: tau,
        ema_momentum: cfg.m,
        gamma: cfg.gamma,
        seed: derive_seed(cfg.seed, "final-model"),
    }
}

/// Plain single-model training; with the seed of [`nshe_config`] it starts
/// from the same weights and visits batches in the same order as co-learning.
pub fn train_plain(
    ds: &Dataset,
    hidden: &[usize],
    train: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<FitOutcome> {
    let init = init_network(&network_dims(ds, hidden), derive_seed(seed, "init"))?;
    fit(
        init,
        ds.features(),
        ds.labels(),
        None,
        train,
        derive_seed(seed, "shuffle"),
        observer,
    )
}

/// Training and test sets of a configuration; synthetic data gets its noise injected here.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    if let (Some(train), Some(test)) = (&cfg.data_path, &cfg.test_path) {
        return Ok((load_dataset(train)?, load_dataset(test)?));
    }
    let per_class = cfg.samples / cfg.classes;
    let clean = make_gaussian_dataset(per_class, cfg.features, cfg.classes, cfg.overlap, derive_seed(cfg.seed, "data"))?;
    let test = make_gaussian_dataset(
        cfg.test_samples.div_ceil(cfg.classes),
        cfg.features,
        cfg.classes,
        cfg.overlap,
        derive_seed(cfg.seed, "test-data"),
    )?;
    let train = inject_noise(
        &clean,
        &NoiseSpec {
            kind: cfg.noise_kind,
            ratio: cfg.noise_rho,
            seed: derive_seed(cfg.seed, "noise"),
        },
    )?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSummary {
    pub easy: Option<usize>,
    pub hard: Option<usize>,
    pub noisy: Option<usize>,
    pub kept: usize,
    pub relabeled: usize,
    pub dropped: usize,
    /// Ground-truth noise ratio of the corrected set.
    pub noise_after: Option<f64>,
    pub retained_noisy: Option<usize>,
    /// Truly noisy samples the mean-history baseline keeps at the same size.
    pub baseline_retained_noisy: Option<usize>,
    pub mm_holdout_accuracy: Option<f64>,
    /// Share of truly noisy samples assigned to the noisy set.
    pub noisy_recall: Option<f64>,
    pub synthetic_mean_clean: Option<f64>,
    pub synthetic_mean_noisy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSummary {
    pub hard: EventProfile,
    pub noisy: EventProfile,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub train_samples: usize,
    pub noise_before: Option<f64>,
    pub rho_hat: f64,
    pub rho_estimate: Option<NoiseEstimate>,
    pub tau_e: f64,
    pub tau: f64,
    pub correction: Option<CorrectionSummary>,
    pub events: Option<EventSummary>,
    pub final_model: &'static str,
    pub final_train_samples: usize,
    pub metrics: ClassificationReport,
    /// Wall-clock seconds per phase; kept out of the deterministic report text.
    pub timings: Vec<(&'static str, f64)>,
}

impl RunReport {
    pub fn test_accuracy(&self) -> f64 {
        self.metrics.accuracy
    }

    /// Noise ratio of the data the final model was trained on.
    pub fn final_noise_ratio(&self) -> Option<f64> {
        match &self.correction {
            Some(c) => c.noise_after,
            None => self.noise_before,
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        let optn = |v: Option<usize>| v.map_or("n/a".to_string(), |v| v.to_string());
        let mut out = String::from("status: ok\n");
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "train_samples: {}", self.train_samples);
        let _ = writeln!(out, "noise_ratio_before: {}", opt(self.noise_before));
        let _ = writeln!(out, "rho_hat: {:.6}", self.rho_hat);
        if let Some(e) = &self.rho_estimate {
            let _ = writeln!(out, "rho_estimate_agreement: {:.6}", e.agreement);
        }
        let _ = writeln!(out, "tau_e: {:.6}", self.tau_e);
        let _ = writeln!(out, "tau: {:.6}", self.tau);
        if let Some(c) = &self.correction {
            let _ = writeln!(out, "partition_easy: {}", optn(c.easy));
            let _ = writeln!(out, "partition_hard: {}", optn(c.hard));
            let _ = writeln!(out, "partition_noisy: {}", optn(c.noisy));
            let _ = writeln!(out, "kept: {}", c.kept);
            let _ = writeln!(out, "relabeled: {}", c.relabeled);
            let _ = writeln!(out, "dropped: {}", c.dropped);
            let _ = writeln!(out, "noise_ratio_after: {}", opt(c.noise_after));
            let _ = writeln!(out, "retained_noisy: {}", optn(c.retained_noisy));
            let _ = writeln!(out, "baseline_retained_noisy: {}", optn(c.baseline_retained_noisy));
            let _ = writeln!(out, "history_classifier_holdout_acc: {}", opt(c.mm_holdout_accuracy));
            let _ = writeln!(out, "noisy_recall: {}", opt(c.noisy_recall));
        }
        if let Some(e) = &self.events {
            let _ = writeln!(out, "hard_event_frequency: {:.6}", e.hard.total_event_frequency());
            let _ = writeln!(out, "noisy_event_frequency: {:.6}", e.noisy.total_event_frequency());
        }
        let _ = writeln!(out, "final_model: {}", self.final_model);
        let _ = writeln!(out, "final_train_samples: {}", self.final_train_samples);
        let _ = writeln!(out, "test_accuracy: {:.6}", self.metrics.accuracy);
        let _ = writeln!(out, "test_macro_precision: {:.6}", self.metrics.macro_precision);
        let _ = writeln!(out, "test_macro_recall: {:.6}", self.metrics.macro_recall);
        let _ = writeln!(out, "test_macro_f1: {:.6}", self.metrics.macro_f1);
        let _ = writeln!(out, "test_macro_auc: {}", opt(self.metrics.macro_auc));
        out
    }

    pub fn timing_text(&self) -> String {
        let mut out = String::new();
        for (phase, secs) in &self.timings {
            let _ = writeln!(out, "{phase}: {secs:.3}s");
        }
        out
    }
}

/// Everything a run produces: the report, the final model and the CSV files by name.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    pub model: NetworkParameters,
    pub files: BTreeMap<String, Vec<u8>>,
}

struct TestAccuracyLog<'a> {
    test: &'a Dataset,
    train: &'a TrainConfig,
    rows: String,
}

impl TrainObserver for TestAccuracyLog<'_> {
    fn on_epoch_end(&mut self, epoch: usize, params: &NetworkParameters) -> Result<()> {
        let acc = accuracy(params, self.test.features(), self.test.labels())?;
        let _ = writeln!(self.rows, "{epoch},{:.6},{acc:.6}", self.train.lr_at(epoch));
        Ok(())
    }
}

fn events_csv(e: &EventSummary) -> String {
    let freq = |count: usize, n: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let mut out = String::from("epoch,hard_learning,hard_forgetting,noisy_learning,noisy_forgetting\n");
    for t in 0..e.hard.learning.len() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            t + 2,
            freq(e.hard.learning[t], e.hard.samples),
            freq(e.hard.forgetting[t], e.hard.samples),
            freq(e.noisy.learning[t], e.noisy.samples),
            freq(e.noisy.forgetting[t], e.noisy.samples)
        );
    }
    out
}

fn gradient_csv(e: &EventSummary) -> String {
    let bins = e.hard.gradient_histogram.len();
    let total = |h: &[usize]| h.iter().sum::<usize>().max(1) as f64;
    let (th, tn) = (total(&e.hard.gradient_histogram), total(&e.noisy.gradient_histogram));
    let mut out = String::from("bin_low,bin_high,hard,noisy\n");
    for b in 0..bins {
        let _ = writeln!(
            out,
            "{:.3},{:.3},{:.6},{:.6}",
            b as f64 / bins as f64,
            (b + 1) as f64 / bins as f64,
            e.hard.gradient_histogram[b] as f64 / th,
            e.noisy.gradient_histogram[b] as f64 / tn
        );
    }
    out
}

fn put(files: &mut BTreeMap<String, Vec<u8>>, name: &str, bytes: impl Into<Vec<u8>>) {
    files.insert(name.to_string(), bytes.into());
}

fn timed<T>(timings: &mut Vec<(&'static str, f64)>, phase: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().phase(phase);
    timings.push((phase, start.elapsed().as_secs_f64()));
    out
}

/// Runs every enabled phase of the configuration.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();

    let (train, test) = timed(&mut timings, "data", || load_data(cfg))?;

    let mut rho_estimate = None;
    let rho_hat = match cfg.known_rho() {
        Some(r) => r,
        None => {
            let est = timed(&mut timings, "estimate", || estimate_noise_ratio(&train, &estimator_config(cfg)))?;
            rho_estimate = Some(est);
            est.rho
        }
    };
    let tau_e = cfg.tau_e_for(rho_hat);
    let tau = cfg.tau_for(rho_hat);
    let mut resolved = cfg.clone();
    resolved.tau_e = crate::config::Setting::Value(tau_e);
    resolved.tau = crate::config::Setting::Value(tau);
    put(&mut files, "config.resolved", resolved.to_toml());

    let mut correction = None;
    let mut events = None;
    let corrected = if cfg.disable_correction {
        train.clone()
    } else if cfg.disable_ehn {
        timed(&mut timings, "correction", || {
            let model = train_correction_model(
                &train,
                &cfg.hidden,
                &train_config(cfg, cfg.correction_epochs),
                derive_seed(cfg.seed, "correction"),
                &mut (),
            )?;
            let relabeled = train.with_labels(model.predict(train.features())?)?;
            let changed = relabeled.labels().iter().zip(train.labels()).filter(|(a, b)| a != b).count();
            correction = Some(CorrectionSummary {
                easy: None,
                hard: None,
                noisy: None,
                kept: train.len() - changed,
                relabeled: changed,
                dropped: 0,
                noise_after: relabeled.noise_ratio(),
                retained_noisy: relabeled.noisy_count(),
                baseline_retained_noisy: None,
                mm_holdout_accuracy: None,
                noisy_recall: None,
                synthetic_mean_clean: None,
                synthetic_mean_noisy: None,
            });
            Ok(relabeled)
        })?
    } else {
        let run = timed(&mut timings, "correction", || run_label_correction(&train, &correction_config(cfg, rho_hat)))?;
        let diag = &run.ehn.diagnostics;
        let baseline = baseline_drop_by_mean(
            &run.round_input,
            &diag.history,
            run.outcome.dataset.len(),
            &diag.classifier_final,
        )
        .phase("correction")?;
        correction = Some(CorrectionSummary {
            easy: Some(run.ehn.partition.easy.len()),
            hard: Some(run.ehn.partition.hard.len()),
            noisy: Some(run.ehn.partition.noisy.len()),
            kept: run.outcome.count(SampleAction::Kept),
            relabeled: run.outcome.count(SampleAction::Relabeled),
            dropped: run.outcome.count(SampleAction::Dropped),
            noise_after: run.outcome.dataset.noise_ratio(),
            retained_noisy: run.outcome.dataset.noisy_count(),
            baseline_retained_noisy: baseline.dataset.noisy_count(),
            mm_holdout_accuracy: diag.holdout_accuracy,
            noisy_recall: diag.confusion.map(|c| c.noisy_recall()),
            synthetic_mean_clean: diag.synthetic_mean_clean,
            synthetic_mean_noisy: diag.synthetic_mean_noisy,
        });
        if let Some(mask) = run.round_input.noise_mask() {
            let easy = &run.ehn.partition.easy;
            let ids = run.round_input.ids();
            let hard_rows: Vec<usize> = (0..ids.len()).filter(|&i| !mask[i] && !easy.contains(&ids[i])).collect();
            let noisy_rows: Vec<usize> = (0..ids.len()).filter(|&i| mask[i]).collect();
            let e = EventSummary {
                hard: event_profile(&diag.history, &hard_rows, GRADIENT_BINS),
                noisy: event_profile(&diag.history, &noisy_rows, GRADIENT_BINS),
            };
            put(&mut files, "events.csv", events_csv(&e));
            put(&mut files, "gradient_histogram.csv", gradient_csv(&e));
            events = Some(e);
        }
        put(&mut files, "history.csv", diag.history.to_csv());
        put(&mut files, "synthetic_history.csv", diag.synthetic_history.to_csv());
        put(&mut files, "ehn_diagnostics.csv", diagnostics_csv(&run.round_input, &run.ehn)?);
        if let Some(c) = diag.confusion {
            put(&mut files, "ehn_confusion.csv", c.to_csv());
        }
        put(&mut files, "correction_rounds.csv", rounds_csv(&run.rounds));
        put(&mut files, "correction_outcome.csv", outcome_csv(&run));
        run.outcome.dataset
    };

    let (model, final_model) = if cfg.disable_nshe {
        let train_cfg = train_config(cfg, cfg.nshe_epochs);
        let mut log = TestAccuracyLog {
            test: &test,
            train: &train_cfg,
            rows: String::from("epoch,lr,test_acc\n"),
        };
        let fitted = timed(&mut timings, "final-training", || {
            train_plain(&corrected, &cfg.hidden, &train_cfg, derive_seed(cfg.seed, "final-model"), &mut log)
        })?;
        let mut csv = String::from("epoch,lr,mean_train_loss,test_acc\n");
        for (line, loss) in log.rows.lines().skip(1).zip(&fitted.epoch_losses) {
            let (head, acc) = line.rsplit_once(',').expect("three columns");
            let _ = writeln!(csv, "{head},{loss:.6},{acc}");
        }
        put(&mut files, "training_log.csv", csv);
        (fitted.params, "plain")
    } else {
        let out = timed(&mut timings, "final-training", || {
            run_nshe(&corrected, &nshe_config(cfg, tau), Some(&test), &mut ())
        })?;
        put(&mut files, "nshe_log.csv", epoch_log_csv(&out.log));
        put(&mut files, "student.ckpt", encode_checkpoint(&out.student));
        (out.teacher, "nshe")
    };
    put(&mut files, "model.ckpt", encode_checkpoint(&model));

    let metrics = timed(&mut timings, "evaluation", || {
        evaluate(model.forward(test.features())?.view(), test.labels())
    })?;
    put(&mut files, "metrics.csv", metrics.to_csv().into_bytes());
    for m in &metrics.per_class {
        if let Some(roc) = &m.roc {
            put(&mut files, &format!("roc_class_{}.csv", m.class), roc.to_csv());
        }
    }

    let report = RunReport {
        seed: cfg.seed,
        train_samples: train.len(),
        noise_before: train.noise_ratio(),
        rho_hat,
        rho_estimate,
        tau_e,
        tau,
        correction,
        events,
        final_model,
        final_train_samples: corrected.len(),
        metrics,
        timings,
    };
    put(&mut files, "report.txt", report.to_text().into_bytes());
    Ok(PipelineRun { report, model, files })
}

/// Writes every file of a run plus `timing.txt` into `dir`.
pub fn write_run(dir: &Path, run: &PipelineRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &run.files {
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join("timing.txt"), run.report.timing_text())?;
    Ok(())
}

/// Runs the pipeline into `dir`; a failed phase is recorded in `report.txt` before the error returns.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    match run_pipeline(cfg) {
        Ok(run) => {
            write_run(dir, &run)?;
            Ok(run.report)
        }
        Err(e) => {
            fs::write(dir.join("config.resolved"), cfg.resolved().to_toml())?;
            fs::write(dir.join("report.txt"), format!("status: failed\nerror: {e}\n"))?;
            Err(e)
        }
    }
}

pub const SWEEP_AXES: &[(&str, &str)] = &[
    ("rho", "noise.rho"),
    ("tau_e", "pipeline.tau_e"),
    ("k", "pipeline.k"),
    ("m", "pipeline.m"),
    ("gamma", "pipeline.gamma"),
    ("tau", "pipeline.tau"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub test_acc: f64,
    pub final_noise_ratio: Option<f64>,
}

/// One pipeline run per (value, seed); seeds are derived from the base seed and
/// shared across values. Runs execute on up to `threads` worker threads.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
    seeds: usize,
    threads: usize,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let key = SWEEP_AXES
        .iter()
        .find(|(a, _)| *a == axis)
        .map(|(_, k)| *k)
        .ok_or_else(|| Error::config_key("axis", format!("unknown sweep axis `{axis}`")))?;
    if values.is_empty() {
        return Err(Error::Contract("sweep needs at least one value".into()));
    }
    if seeds == 0 {
        return Err(Error::Contract("sweep needs at least one seed".into()));
    }
    let mut jobs = Vec::new();
    for v in values {
        for j in 0..seeds {
            let seed = derive_indexed(base.seed, "sweep", j as u64);
            let cfg = base
                .clone()
                .with_overrides([(key, v.as_str()), ("seed", seed.to_string().as_str())])?;
            jobs.push((v.clone(), seed, cfg));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((value, seed, cfg)) = jobs.get(i) else { break };
                let result = (|| {
                    let run = run_pipeline(cfg)?;
                    if let Some(dir) = out {
                        write_run(&dir.join(format!("{axis}={value}")).join(format!("seed={seed}")), &run)?;
                    }
                    Ok(SweepRow {
                        value: value.clone(),
                        seed: *seed,
                        test_acc: run.report.test_accuracy(),
                        final_noise_ratio: run.report.final_noise_ratio(),
                    })
                })();
                results.lock().expect("no panics while holding the lock")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// CSV `value,seed,test_acc,final_noise_ratio`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,seed,test_acc,final_noise_ratio\n");
    for r in rows {
        let nr = r.final_noise_ratio.map_or(String::new(), |v| format!("{v:.6}"));
        let _ = writeln!(out, "{},{},{:.6},{nr}", r.value, r.seed, r.test_acc);
    }
    out
}
