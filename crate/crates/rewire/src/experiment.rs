//! Experiment orchestration: training loops per optimizer, the task-swap
//! experiment with correlation tracking, connectivity sweeps, and plot-data
//! emission.

use crate::checkpoint::{Checkpoint, ModelState, RngState};
use crate::config::{DataSource, ExperimentConfig};
use crate::data::{batches, load_idx, shuffle_labels, synthetic_task, Dataset, LabelPermutation};
use crate::error::{Error, Result};
use crate::math::{pearson, pearson_slices, Matrix};
use crate::metrics::{
    boxcar, read_table, CorrelationRecord, CorrelationWriter, MetricsRecord, MetricsWriter,
};
use crate::mlp;
use crate::optim::{
    add_weight_decay, deep_r_step, prune_phase, sgd_step, shrinkage_step, soft_deep_r_step,
    HyperParams, OptimizerKind, PruneMask, RewireReport,
};
use crate::rng::{RngStream, StreamTag};
use crate::store::{ConnectionStore, DenseNet, ParamSource, SoftStore};
use crate::Real;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Chunk size for test-set evaluation; bounds forward-pass memory.
const EVAL_CHUNK: usize = 1000;

/// Load the configured train and test datasets.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset<Real>, Dataset<Real>)> {
    let (mut train, mut test) = match &cfg.data {
        DataSource::Mnist { dir } => {
            let train = load_idx(
                &dir.join("train-images-idx3-ubyte"),
                &dir.join("train-labels-idx1-ubyte"),
            )?;
            let test = load_idx(
                &dir.join("t10k-images-idx3-ubyte"),
                &dir.join("t10k-labels-idx1-ubyte"),
            )?;
            (train, test)
        }
        DataSource::Synthetic {
            seed,
            samples,
            input_dim,
            classes,
        } => {
            let all = synthetic_task::<Real>(*seed, *samples, *input_dim, *classes)?;
            let n_train = samples * 4 / 5;
            all.split(n_train)
        }
    };
    if cfg.train_limit > 0 {
        train = train.head(cfg.train_limit);
    }
    if cfg.test_limit > 0 {
        test = test.head(cfg.test_limit);
    }
    let input = cfg.layer_sizes[0];
    if train.inputs.cols() != input {
        return Err(Error::Config(format!(
            "dataset has {} features, network expects {input}",
            train.inputs.cols()
        )));
    }
    if train.classes > *cfg.layer_sizes.last().unwrap() {
        return Err(Error::Config(format!(
            "dataset has {} classes, network outputs {}",
            train.classes,
            cfg.layer_sizes.last().unwrap()
        )));
    }
    Ok((train, test))
}

/// The trainable parameter state for one run.
pub enum Model {
    Hard(ConnectionStore<Real>),
    Soft(SoftStore<Real>),
    Dense {
        net: DenseNet<Real>,
        mask: PruneMask,
    },
}

impl Model {
    fn build(cfg: &ExperimentConfig, init: &mut RngStream) -> Result<Model> {
        let fractions = cfg.fractions()?;
        Ok(match cfg.optimizer {
            OptimizerKind::DeepR => Model::Hard(ConnectionStore::init_connectivity(
                &cfg.layer_sizes,
                &fractions,
                init,
            )?),
            OptimizerKind::SoftDeepR => Model::Soft(SoftStore::init_connectivity(
                &cfg.layer_sizes,
                &fractions,
                cfg.theta_min,
                init,
            )?),
            OptimizerKind::Sgd | OptimizerKind::Shrinkage | OptimizerKind::Prune => {
                // materialize through a fully connected store so that dense
                // baselines share the sparse models' init draw sequence:
                // with K = M, alpha = 0, T = 0 the trajectories then agree
                // bit for bit
                let store = ConnectionStore::fully_connected(&cfg.layer_sizes, init)?;
                let net = DenseNet::from_store(&store);
                let mask = PruneMask::none(&net);
                Model::Dense { net, mask }
            }
        })
    }

    fn forward(&self, batch: &Matrix<Real>) -> Result<mlp::ForwardTrace<Real>> {
        match self {
            Model::Hard(s) => mlp::forward(s, batch),
            Model::Soft(s) => mlp::forward(s, batch),
            Model::Dense { net, .. } => mlp::forward(net, batch),
        }
    }

    fn connectivity(&self) -> f64 {
        match self {
            Model::Hard(s) => s.connectivity_fraction(),
            Model::Soft(s) => s.connectivity_fraction(),
            Model::Dense { net, .. } => net.connectivity_fraction(),
        }
    }

    fn layer_connectivity(&self, n_layers: usize) -> Vec<f64> {
        (0..n_layers)
            .map(|l| match self {
                Model::Hard(s) => s.layer_connectivity(l),
                Model::Soft(s) => s.layer_connectivity(l),
                Model::Dense { net, .. } => net.layer_connectivity(l),
            })
            .collect()
    }

    fn materialized_weights(&self, layer: usize) -> Matrix<Real> {
        match self {
            Model::Hard(s) => s.materialize_weights(layer),
            Model::Soft(s) => s.materialize_weights(layer),
            Model::Dense { net, .. } => net.weight_matrices()[layer].clone(),
        }
    }

    fn into_state(self) -> ModelState {
        match self {
            Model::Hard(s) => ModelState::Hard(s),
            Model::Soft(s) => ModelState::Soft(s),
            Model::Dense { net, .. } => ModelState::Dense(net),
        }
    }
}

/// Mean accuracy over a dataset, evaluated in bounded chunks.
pub fn evaluate_accuracy(model: &Model, data: &Dataset<Real>) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct_weighted = 0.0;
    let mut total = 0;
    let mut start = 0;
    while start < data.len() {
        let end = (start + EVAL_CHUNK).min(data.len());
        let cols = data.inputs.cols();
        let chunk = Matrix::from_vec(
            end - start,
            cols,
            data.inputs.data()[start * cols..end * cols].to_vec(),
        )?;
        let trace = model.forward(&chunk)?;
        let acc = mlp::accuracy(&trace, &data.labels[start..end]);
        correct_weighted += acc * (end - start) as f64;
        total += end - start;
        start = end;
    }
    Ok(correct_weighted / total as f64)
}

/// Outcome summary of a single training run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub metrics_path: PathBuf,
    pub final_test_accuracy: f64,
    pub final_train_accuracy: f64,
    pub final_connectivity: f64,
    /// Highest connectivity observed at any record point during training.
    pub max_connectivity: f64,
}

struct Trainer {
    hp: HyperParams<Real>,
    /// Undecayed values; `eta_decay` from the config applies per epoch.
    base_eta: Real,
    base_temperature: Real,
    epoch_decay: Real,
    model: Model,
    noise: RngStream,
    rewire: RngStream,
    iteration: usize,
    /// Newly activated connections per layer since the last metrics record.
    pending_activations: Vec<usize>,
    prune_boundaries: Vec<usize>,
    prune_quality: f64,
    weight_decay: Real,
    max_connectivity: f64,
}

impl Trainer {
    fn new(cfg: &ExperimentConfig, model: Model) -> Self {
        let n_layers = cfg.layer_sizes.len() - 1;
        // epochs after which a pruning phase runs
        let prune_boundaries = if cfg.optimizer == OptimizerKind::Prune {
            let a = cfg.prune_phase_epochs[0];
            let b = a + cfg.prune_phase_epochs[1];
            vec![a, b]
        } else {
            vec![]
        };
        let max_connectivity = model.connectivity();
        // per-epoch decay is handled here; the per-step rules see a constant
        // eta within each epoch
        let mut hp = cfg.hyper_params();
        hp.eta_decay = 1.0;
        Trainer {
            base_eta: hp.eta,
            base_temperature: hp.temperature,
            epoch_decay: cfg.eta_decay,
            hp,
            model,
            noise: RngStream::new(cfg.seed_noise, StreamTag::Noise),
            rewire: RngStream::new(cfg.seed_rewire, StreamTag::Rewire),
            iteration: 0,
            pending_activations: vec![0; n_layers],
            prune_boundaries,
            prune_quality: cfg.prune_quality,
            weight_decay: cfg.weight_decay,
            max_connectivity,
        }
    }

    fn absorb(&mut self, report: &RewireReport) {
        for (p, a) in self
            .pending_activations
            .iter_mut()
            .zip(&report.activated_per_layer)
        {
            *p += a;
        }
    }

    /// One optimizer step on one batch. Returns the batch training loss.
    fn step(&mut self, batch: &Matrix<Real>, labels: &[usize]) -> Result<f64> {
        let trace = self.model.forward(batch)?;
        let loss = mlp::cross_entropy(&trace, labels);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite training loss at iteration {}",
                self.iteration
            )));
        }
        match &mut self.model {
            Model::Hard(store) => {
                let grads = mlp::backward(store, &trace, labels);
                let report = deep_r_step(
                    store,
                    &grads,
                    &self.hp,
                    self.iteration,
                    &mut self.noise,
                    &mut self.rewire,
                )?;
                if !store.exact_k_holds() {
                    return Err(Error::Contract(format!(
                        "active-set budget violated at iteration {}",
                        self.iteration
                    )));
                }
                self.absorb(&report);
            }
            Model::Soft(store) => {
                let grads = mlp::backward_soft(store, &trace, labels);
                let report =
                    soft_deep_r_step(store, &grads, &self.hp, self.iteration, &mut self.noise)?;
                let conn = store.connectivity_fraction();
                self.absorb(&report);
                self.max_connectivity = self.max_connectivity.max(conn);
            }
            Model::Dense { net, mask } => {
                let mut grads = mlp::backward_dense(net, &trace, labels);
                if !grads.weights.iter().all(|w| w.all_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite gradient at iteration {}",
                        self.iteration
                    )));
                }
                let eta = self.hp.eta_at(self.iteration);
                match self.hp.optimizer {
                    OptimizerKind::Shrinkage => {
                        shrinkage_step(net, &grads, eta, &self.hp.alpha.clone())
                    }
                    OptimizerKind::Prune => {
                        add_weight_decay(&mut grads, net, self.weight_decay);
                        sgd_step(net, &grads, eta);
                        mask.apply(net);
                    }
                    _ => sgd_step(net, &grads, eta),
                }
            }
        }
        self.iteration += 1;
        Ok(loss)
    }

    fn begin_epoch(&mut self, epoch: usize) {
        if self.epoch_decay == 1.0 {
            return;
        }
        let factor = self.epoch_decay.powi(epoch as i32);
        self.hp.eta = self.base_eta * factor;
        if self.hp.temperature_follows_eta {
            self.hp.temperature = self.base_temperature * factor;
        }
    }

    /// Run end-of-epoch pruning if this epoch closes a phase.
    fn maybe_prune(&mut self, finished_epochs: usize) -> Result<()> {
        if !self.prune_boundaries.contains(&finished_epochs) {
            return Ok(());
        }
        if let Model::Dense { net, mask } = &mut self.model {
            prune_phase(net, mask, self.prune_quality);
        }
        Ok(())
    }

    fn take_activations(&mut self) -> Vec<usize> {
        let out = self.pending_activations.clone();
        self.pending_activations.iter_mut().for_each(|p| *p = 0);
        out
    }
}

fn layer_m(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1])
        .collect()
}

/// Standard training run: selected optimizer, metrics at the configured
/// cadence plus every epoch end, optional final checkpoint.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    run_loop(cfg, &train, &test, None)
}

/// Task-swap run: a fresh label permutation is applied to train and test
/// labels each epoch; weight and activity correlations between subsequent
/// epochs are recorded per layer.
pub fn run_transfer(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    if !cfg.transfer {
        return Err(Error::Config("transfer run requires transfer = true".into()));
    }
    let (train, test) = load_data(cfg)?;
    run_loop(cfg, &train, &test, Some(&cfg.correlations_out))
}

fn run_loop(
    cfg: &ExperimentConfig,
    train: &Dataset<Real>,
    test: &Dataset<Real>,
    correlations_out: Option<&Path>,
) -> Result<RunOutcome> {
    let n_layers = cfg.layer_sizes.len() - 1;
    let started = std::time::Instant::now();

    // resolved-config sidecar next to the metrics file
    let sidecar = cfg.metrics_out.with_extension("config");
    std::fs::write(&sidecar, cfg.to_text())?;

    let mut init = RngStream::new(cfg.seed_init, StreamTag::Init);
    let model = Model::build(cfg, &mut init)?;
    let mut trainer = Trainer::new(cfg, model);
    let mut data_rng = RngStream::new(cfg.seed_data, StreamTag::DataShuffle);
    let mut label_rng = RngStream::new(cfg.seed_label, StreamTag::LabelShuffle);

    let mut writer = MetricsWriter::create(&cfg.metrics_out, &layer_m(cfg), cfg.record_wall_time)?;
    let mut corr_writer = match correlations_out {
        Some(p) => Some(CorrelationWriter::create(p, n_layers)?),
        None => None,
    };
    // fixed probe batch for activity correlations
    let probe = test.head(cfg.probe_samples);
    let mut prev_epoch_weights: Option<Vec<Matrix<Real>>> = None;
    let mut prev_epoch_activity: Option<Vec<Vec<Real>>> = None;

    let transfer = correlations_out.is_some();
    let mut record = |trainer: &mut Trainer,
                      epoch: usize,
                      loss: f64,
                      test_acc: Option<f64>,
                      train_acc: Option<f64>|
     -> Result<()> {
        trainer.max_connectivity = trainer.max_connectivity.max(trainer.model.connectivity());
        let rec = MetricsRecord {
            iteration: trainer.iteration,
            epoch,
            train_loss: loss,
            test_accuracy: test_acc,
            train_accuracy: train_acc,
            connectivity: trainer.model.connectivity(),
            layer_connectivity: trainer.model.layer_connectivity(n_layers),
            newly_activated: trainer.take_activations(),
            wall_ms: cfg
                .record_wall_time
                .then(|| started.elapsed().as_millis() as u64),
        };
        writer.append(&rec)
    };

    let mut last_test_acc = 0.0;
    let mut last_train_acc = 0.0;
    let mut last_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        trainer.begin_epoch(epoch);
        // task-swap mode: one fresh permutation per epoch, applied to both
        // splits so accuracy measures the current task
        let (epoch_train, epoch_test);
        let (train_ref, test_ref) = if transfer {
            let perm = LabelPermutation::random(train.classes, epoch, &mut label_rng);
            epoch_train = shuffle_labels(train, &perm)?;
            epoch_test = shuffle_labels(test, &perm)?;
            (&epoch_train, &epoch_test)
        } else {
            (train, test)
        };

        for (batch, labels) in batches(train_ref, cfg.batch, &mut data_rng)? {
            let loss = match trainer.step(&batch, &labels) {
                Ok(l) => l,
                Err(e) => {
                    // keep the partial metrics; surface the abort
                    let _ = record(&mut trainer, epoch, last_loss, None, None);
                    return Err(e);
                }
            };
            last_loss = loss;
            if trainer.iteration % cfg.cadence == 0 {
                // in task-swap mode every cadence row carries test accuracy
                // so the within-epoch recovery is visible
                let test_acc = if transfer {
                    Some(evaluate_accuracy(
                        &trainer.model,
                        &test_ref.head(cfg.probe_samples),
                    )?)
                } else {
                    None
                };
                record(&mut trainer, epoch, loss, test_acc, None)?;
            }
        }
        trainer.maybe_prune(epoch + 1)?;

        last_test_acc = evaluate_accuracy(&trainer.model, test_ref)?;
        last_train_acc =
            evaluate_accuracy(&trainer.model, &train_ref.head(10 * EVAL_CHUNK))?;
        record(
            &mut trainer,
            epoch,
            last_loss,
            Some(last_test_acc),
            Some(last_train_acc),
        )?;

        if let Some(cw) = corr_writer.as_mut() {
            let weights: Vec<Matrix<Real>> = (0..n_layers)
                .map(|l| trainer.model.materialized_weights(l))
                .collect();
            let activity = layer_activity(&trainer.model, &probe)?;
            if let (Some(pw), Some(pa)) = (&prev_epoch_weights, &prev_epoch_activity) {
                let weight_correlation: Vec<f64> = weights
                    .iter()
                    .zip(pw)
                    .map(|(a, b)| pearson(a, b).unwrap_or(0.0))
                    .collect();
                let activity_correlation: Vec<f64> = activity
                    .iter()
                    .zip(pa)
                    .map(|(a, b)| pearson_slices(a, b).unwrap_or(0.0))
                    .collect();
                cw.append(&CorrelationRecord {
                    epoch_from: epoch - 1,
                    epoch_to: epoch,
                    weight_correlation,
                    activity_correlation,
                })?;
            }
            prev_epoch_weights = Some(weights);
            prev_epoch_activity = Some(activity);
        }
    }

    if let Some(ckpt_path) = &cfg.checkpoint_out {
        let rng = vec![
            RngState::of(&trainer.noise),
            RngState::of(&trainer.rewire),
            RngState::of(&data_rng),
            RngState::of(&label_rng),
        ];
        crate::checkpoint::write_checkpoint(
            ckpt_path,
            &Checkpoint {
                iteration: trainer.iteration as u64,
                epoch: cfg.epochs as u64,
                model: trainer.model.into_state(),
                rng,
            },
        )?;
        return Ok(RunOutcome {
            metrics_path: cfg.metrics_out.clone(),
            final_test_accuracy: last_test_acc,
            final_train_accuracy: last_train_acc,
            final_connectivity: f64::NAN,
            max_connectivity: trainer.max_connectivity,
        }
        .with_connectivity_from_checkpoint(ckpt_path)?);
    }

    Ok(RunOutcome {
        metrics_path: cfg.metrics_out.clone(),
        final_test_accuracy: last_test_acc,
        final_train_accuracy: last_train_acc,
        final_connectivity: trainer.model.connectivity(),
        max_connectivity: trainer.max_connectivity,
    })
}

impl RunOutcome {
    fn with_connectivity_from_checkpoint(mut self, path: &Path) -> Result<RunOutcome> {
        let ckpt = crate::checkpoint::read_checkpoint(path)?;
        self.final_connectivity = match &ckpt.model {
            ModelState::Hard(s) => s.connectivity_fraction(),
            ModelState::Soft(s) => s.connectivity_fraction(),
            ModelState::Dense(n) => n.connectivity_fraction(),
        };
        Ok(self)
    }
}

/// Per-layer activity vectors on the probe batch: ReLU outputs for hidden
/// layers, class probabilities for the output layer, flattened over samples.
fn layer_activity(model: &Model, probe: &Dataset<Real>) -> Result<Vec<Vec<Real>>> {
    let trace = model.forward(&probe.inputs)?;
    let n_layers = trace.pre_activations.len();
    let mut out = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let m = if l + 1 < n_layers {
            &trace.activations[l + 1]
        } else {
            &trace.probabilities
        };
        out.push(m.data().to_vec());
    }
    Ok(out)
}

/// One sweep row: grid point plus outcome or failure note.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub p0: f64,
    pub outcome: std::result::Result<RunOutcome, String>,
}

/// Run one training per `sweep_p0` grid point (in parallel, disjoint state
/// and RNG streams) and write a summary table sorted by p0.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    if cfg.sweep_p0.is_empty() {
        return Err(Error::Config("sweep requires a non-empty sweep_p0 grid".into()));
    }
    let rows: Vec<SweepRow> = cfg
        .sweep_p0
        .par_iter()
        .enumerate()
        .map(|(i, &p0)| {
            let mut point = cfg.clone();
            point.p0 = p0;
            point.sweep_p0 = vec![];
            // disjoint streams per grid point
            let offset = 1000 * (i as u64 + 1);
            point.seed_init += offset;
            point.seed_noise += offset;
            point.seed_rewire += offset;
            point.seed_data += offset;
            point.seed_label += offset;
            let stem = cfg
                .metrics_out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "metrics".into());
            point.metrics_out = cfg
                .metrics_out
                .with_file_name(format!("{stem}_p{i}.csv"));
            let outcome = point
                .validate()
                .and_then(|_| run_training(&point))
                .map_err(|e| e.to_string());
            SweepRow { p0, outcome }
        })
        .collect();

    let mut rows = rows;
    rows.sort_by(|a, b| a.p0.partial_cmp(&b.p0).unwrap());
    let mut text = String::from("p0,final_accuracy,final_connectivity,max_connectivity\n");
    for row in &rows {
        match &row.outcome {
            Ok(o) => {
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    row.p0, o.final_test_accuracy, o.final_connectivity, o.max_connectivity
                );
            }
            // failed grid points become comment lines so the table still
            // parses; the failure is not silently dropped
            Err(e) => {
                let _ = writeln!(text, "# p0 = {} failed: {}", row.p0, e.replace('\n', " "));
            }
        }
    }
    std::fs::write(&cfg.sweep_out, text)?;
    Ok(cfg.sweep_out.clone())
}

/// Emit per-figure data tables from metrics/correlation/sweep files. Schema
/// is detected from the header; unknown schemas are format errors.
pub fn emit_plot_data(
    metrics: &[PathBuf],
    out_dir: &Path,
    boxcar_width: usize,
) -> Result<Vec<PathBuf>> {
    if boxcar_width == 0 {
        return Err(Error::Config("boxcar width must be >= 1".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for path in metrics {
        let table = read_table(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "metrics".into());
        if table.has_column("train_loss") {
            // accuracy and loss vs iteration
            let iters = table.column("iteration")?;
            let mut text = String::from("iteration,epoch,train_loss,test_accuracy,train_accuracy\n");
            let epochs = table.column("epoch")?;
            let loss = table.column("train_loss")?;
            let test_acc = table.column("test_accuracy")?;
            let train_acc = table.column("train_accuracy")?;
            for i in 0..iters.len() {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    iters[i],
                    epochs[i],
                    loss[i],
                    nan_blank(test_acc[i]),
                    nan_blank(train_acc[i])
                );
            }
            written.push(write_out(out_dir, &format!("{stem}_accuracy_vs_iteration.csv"), &text)?);

            // connectivity vs iteration
            let n_layers = table.layer_m.len();
            let mut text = String::from("iteration,connectivity");
            for l in 0..n_layers {
                let _ = write!(text, ",conn_l{l}");
            }
            text.push('\n');
            let conn = table.column("connectivity")?;
            let per_layer: Vec<Vec<f64>> = (0..n_layers)
                .map(|l| table.column(&format!("conn_l{l}")))
                .collect::<Result<_>>()?;
            for i in 0..iters.len() {
                let _ = write!(text, "{},{}", iters[i], conn[i]);
                for pl in &per_layer {
                    let _ = write!(text, ",{}", pl[i]);
                }
                text.push('\n');
            }
            written.push(write_out(
                out_dir,
                &format!("{stem}_connectivity_vs_iteration.csv"),
                &text,
            )?);

            // rewiring counts vs iteration: absolute, relative to the
            // layer's potential connections, and boxcar-smoothed relative
            if table.layer_m.is_empty() && n_layers > 0 {
                return Err(Error::Format {
                    field: "layer_m".into(),
                    message: "metrics file lacks the layer_m provenance comment".into(),
                });
            }
            let k_new: Vec<Vec<f64>> = (0..n_layers)
                .map(|l| table.column(&format!("k_new_l{l}")))
                .collect::<Result<_>>()?;
            let mut text = String::from("iteration");
            for l in 0..n_layers {
                let _ = write!(text, ",k_new_l{l},k_new_rel_l{l},k_new_rel_smooth_l{l}");
            }
            text.push('\n');
            let rel: Vec<Vec<f64>> = k_new
                .iter()
                .zip(&table.layer_m)
                .map(|(col, &m)| col.iter().map(|&x| x / m as f64).collect())
                .collect();
            let smooth: Vec<Vec<f64>> = rel.iter().map(|col| boxcar(col, boxcar_width)).collect();
            for i in 0..iters.len() {
                let _ = write!(text, "{}", iters[i]);
                for l in 0..n_layers {
                    let _ = write!(text, ",{},{},{}", k_new[l][i], rel[l][i], smooth[l][i]);
                }
                text.push('\n');
            }
            written.push(write_out(out_dir, &format!("{stem}_k_new_vs_iteration.csv"), &text)?);
        } else if table.has_column("weight_corr_l0") {
            let mut text = table.columns.join(",");
            text.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|&c| nan_blank(c)).collect();
                let _ = writeln!(text, "{}", cells.join(","));
            }
            written.push(write_out(
                out_dir,
                &format!("{stem}_correlation_vs_epoch.csv"),
                &text,
            )?);
        } else if table.has_column("final_accuracy") {
            let p0 = table.column("p0")?;
            let acc = table.column("final_accuracy")?;
            let max_conn = table.column("max_connectivity")?;
            let mut order: Vec<usize> = (0..p0.len()).collect();
            order.sort_by(|&a, &b| max_conn[a].partial_cmp(&max_conn[b]).unwrap());
            let mut text = String::from("max_connectivity,p0,final_accuracy\n");
            for i in order {
                let _ = writeln!(
                    text,
                    "{},{},{}",
                    nan_blank(max_conn[i]),
                    p0[i],
                    nan_blank(acc[i])
                );
            }
            written.push(write_out(
                out_dir,
                &format!("{stem}_accuracy_vs_connectivity.csv"),
                &text,
            )?);
        } else {
            return Err(Error::Format {
                field: format!("schema of {}", path.display()),
                message: format!(
                    "expected a metrics, correlation or sweep table; columns are [{}]",
                    table.columns.join(", ")
                ),
            });
        }
    }
    Ok(written)
}

fn nan_blank(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    std::fs::write(&p, text)?;
    Ok(p)
}
