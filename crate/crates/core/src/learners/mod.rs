//! Baseline lifelong learners as pluggable strategies over the model core
//! and the stream views: finetune, experience replay (bounded and
//! unbounded), incremental joint, A-GEM, the two iCaRL variants, and
//! LUCIR, plus the shared per-task training loop.

pub mod buffer;

use std::collections::HashMap;

use thiserror::Error;

pub use buffer::{herding_select, BufferEntry, ReplayBuffer, Selection};

use crate::hierarchy::ClassId;
use crate::metrics::{self, PredictionRecord};
use crate::nn::optim::{Optimizer, SgdConfig};
use crate::nn::{
    bce_loss, cosine_distillation_loss, margin_ranking_loss, sigmoid, Architecture, HeadKind,
};
use crate::rng::Xorshift64Star;
use crate::stream::{CompleteView, IncompleteView, StreamError, TaskConfiguration};
use crate::{Model, ModelGrads, Scalar, Store};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("unknown learner `{0}`")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Finetune,
    Er,
    ErInfinite,
    IncrementalJoint,
    Agem,
    IcarlCnn,
    IcarlNorm,
    Lucir,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Finetune,
        Strategy::Er,
        Strategy::ErInfinite,
        Strategy::IncrementalJoint,
        Strategy::Agem,
        Strategy::IcarlCnn,
        Strategy::IcarlNorm,
        Strategy::Lucir,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Finetune => "finetune",
            Strategy::Er => "er",
            Strategy::ErInfinite => "er-infinite",
            Strategy::IncrementalJoint => "incremental-joint",
            Strategy::Agem => "agem",
            Strategy::IcarlCnn => "icarl-cnn",
            Strategy::IcarlNorm => "icarl-norm",
            Strategy::Lucir => "lucir",
        }
    }

    pub fn parse(name: &str) -> Result<Self, LearnerError> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| LearnerError::UnknownStrategy(name.to_string()))
    }

    pub fn head_kind(&self) -> HeadKind {
        match self {
            Strategy::IcarlNorm | Strategy::Lucir => HeadKind::CosineNorm,
            _ => HeadKind::Standard,
        }
    }

    /// Frozen previous-task snapshot for distillation.
    fn uses_snapshot(&self) -> bool {
        matches!(self, Strategy::IcarlCnn | Strategy::IcarlNorm | Strategy::Lucir)
    }

    /// Buffer contents are concatenated into the training pool.
    fn rehearses(&self) -> bool {
        matches!(
            self,
            Strategy::Er
                | Strategy::ErInfinite
                | Strategy::IcarlCnn
                | Strategy::IcarlNorm
                | Strategy::Lucir
        )
    }

    fn keeps_buffer(&self) -> bool {
        self.rehearses() || matches!(self, Strategy::Agem)
    }

    fn default_selection(&self) -> Selection {
        match self {
            Strategy::IcarlCnn | Strategy::IcarlNorm | Strategy::Lucir => Selection::Herding,
            _ => Selection::Random,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub strategy: Strategy,
    /// Epochs per task; task 0 trains for twice as many.
    pub epochs: usize,
    pub batch_size: usize,
    /// None picks the head default: 1.0 for standard heads, 0.5 for
    /// cosine-normalized heads.
    pub learning_rate: Option<f64>,
    /// Per-class exemplar budget; None means unbounded.
    pub buffer_budget: Option<usize>,
    pub selection: Selection,
    pub agem_batch: usize,
    pub margin: f64,
    pub lambda_base: f64,
    pub hard_negatives: usize,
    pub distill_weight: f64,
}

impl LearnerConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            epochs: 20,
            batch_size: 128,
            learning_rate: None,
            buffer_budget: match strategy {
                Strategy::ErInfinite => None,
                _ => Some(20),
            },
            selection: strategy.default_selection(),
            agem_batch: 128,
            margin: 0.5,
            lambda_base: 5.0,
            hard_negatives: 2,
            distill_weight: 1.0,
        }
    }

    pub fn effective_lr(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.strategy.head_kind() {
            HeadKind::Standard => 1.0,
            HeadKind::CosineNorm => 0.5,
        })
    }
}

/// Loss configuration shared by the training loop and the gradient-check
/// oracle: BCE over targets, optional feature-space distillation against a
/// snapshot, optional margin ranking on cosine scores.
#[derive(Debug, Clone, Default)]
pub struct LossOpts {
    pub class_divisor: usize,
    /// Weight of `1 - cos(f(x), f_snapshot(x))`; 0 disables the term.
    pub distill_weight: f64,
    pub margin: Option<MarginOpts>,
}

#[derive(Debug, Clone)]
pub struct MarginOpts {
    pub margin: f64,
    pub hard_negatives: usize,
    /// Head indices of the classes introduced in the current task.
    pub candidates: Vec<usize>,
}

/// One training item: features, per-class targets, and (for the margin
/// term) the head index of the old ground-truth class.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub features: Vec<Scalar>,
    pub targets: Vec<Scalar>,
    pub margin_truth: Option<usize>,
}

/// Mean loss over the batch and its exact parameter gradients.
pub fn batch_loss_and_grads(
    model: &Model,
    snapshot: Option<&Model>,
    items: &[BatchItem],
    opts: &LossOpts,
) -> Result<(f64, ModelGrads), LearnerError> {
    let mut grads = model.zero_grads();
    let mut total = 0.0;
    let inv_batch = 1.0 / items.len() as f64;
    for item in items {
        let trace = model.forward(&item.features)?;
        let (bce, mut d_scores) = bce_loss(&trace.scores, &item.targets, opts.class_divisor);
        let mut loss = bce;
        let mut d_feat = Vec::new();
        if opts.distill_weight != 0.0 {
            let snap = snapshot.expect("distillation requires a snapshot");
            let target_feat = snap.forward(&item.features)?.features;
            let (dist, df) = cosine_distillation_loss(&trace.features, &target_feat);
            loss += opts.distill_weight * dist;
            d_feat = df
                .into_iter()
                .map(|v| v * opts.distill_weight * inv_batch)
                .collect();
        }
        let mut d_cos = Vec::new();
        if let (Some(m), Some(truth)) = (&opts.margin, item.margin_truth) {
            let (margin_loss, dc) = margin_ranking_loss(
                &trace.cosines,
                truth,
                &m.candidates,
                m.hard_negatives,
                m.margin,
            );
            loss += margin_loss;
            d_cos = dc.into_iter().map(|v| v * inv_batch).collect();
        }
        for d in d_scores.iter_mut() {
            *d *= inv_batch;
        }
        model.backward(&trace, &d_scores, &d_cos, &d_feat, &mut grads);
        total += loss * inv_batch;
    }
    Ok((total, grads))
}

/// A-GEM projection: keep `g` when it does not conflict with the reference
/// gradient, otherwise remove the conflicting component.
pub fn agem_project(g: &[Scalar], g_ref: &[Scalar]) -> Vec<Scalar> {
    let dot: f64 = g.iter().zip(g_ref).map(|(a, b)| a * b).sum();
    if dot >= 0.0 {
        return g.to_vec();
    }
    let ref_sq: f64 = g_ref.iter().map(|v| v * v).sum();
    let scale = dot / ref_sq;
    g.iter()
        .zip(g_ref)
        .map(|(gi, ri)| gi - scale * ri)
        .collect()
}

/// Per-task training log: learning-rate trace and the monitored in-task
/// validation metric per epoch.
#[derive(Debug, Clone, Default)]
pub struct TaskLog {
    pub lr_trace: Vec<f64>,
    pub val_metric_trace: Vec<f64>,
    pub buffer_size: usize,
}

pub struct LearnerState {
    pub cfg: LearnerConfig,
    pub model: Model,
    pub opt: Optimizer<Scalar>,
    pub buffer: ReplayBuffer,
    pub snapshot: Option<Model>,
    /// Classes in order of introduction; position = head index.
    pub observed: Vec<ClassId>,
    head_index: HashMap<ClassId, usize>,
    /// Task that introduced each observed class, aligned with `observed`.
    pub intro_task: Vec<usize>,
    seed: u64,
    agem_step: u64,
}

impl LearnerState {
    pub fn new(cfg: LearnerConfig, input_dim: usize, hidden: Vec<usize>, seed: u64) -> Self {
        let arch = Architecture {
            input_dim,
            hidden,
            head: cfg.strategy.head_kind(),
        };
        let model = Model::new(arch, seed);
        let opt = Optimizer::new(SgdConfig::with_lr(cfg.effective_lr()), &model);
        let buffer = ReplayBuffer::new(cfg.buffer_budget);
        Self {
            cfg,
            model,
            opt,
            buffer,
            snapshot: None,
            observed: Vec::new(),
            head_index: HashMap::new(),
            intro_task: Vec::new(),
            seed,
            agem_step: 0,
        }
    }

    pub fn head_index(&self, class: ClassId) -> Option<usize> {
        self.head_index.get(&class).copied()
    }

    /// Map predicted head indices back to class ids.
    fn predicted_classes(&self, x: &[Scalar]) -> Result<Vec<ClassId>, LearnerError> {
        Ok(self
            .model
            .predict(x)?
            .into_iter()
            .map(|i| self.observed[i])
            .collect())
    }

    fn register_task_classes(&mut self, config: &TaskConfiguration, task: usize) {
        for &class in &config.tasks[task] {
            let idx = self.observed.len();
            self.observed.push(class);
            self.head_index.insert(class, idx);
            self.intro_task.push(task);
        }
        self.model.expand_head(self.observed.len());
        self.opt.sync_shape(&self.model);
    }

    fn multi_hot(&self, labels: &[ClassId]) -> Vec<Scalar> {
        let mut t = vec![0.0; self.observed.len()];
        for l in labels {
            if let Some(i) = self.head_index(*l) {
                t[i] = 1.0;
            }
        }
        t
    }

    /// Per-class targets for one served item, per strategy: hard labels
    /// for replay-style methods, complete-information multi-hot for the
    /// joint baseline, snapshot sigmoid outputs for old classes under
    /// iCaRL. LUCIR keeps hard labels (its distillation acts on features).
    fn make_targets(&self, served: &[ClassId], features: &[Scalar], task: usize) -> Result<Vec<Scalar>, LearnerError> {
        let mut targets = self.multi_hot(served);
        let icarl = matches!(self.cfg.strategy, Strategy::IcarlCnn | Strategy::IcarlNorm);
        if icarl && task > 0 {
            if let Some(snap) = &self.snapshot {
                let scores = snap.forward(features)?.scores;
                for (i, &intro) in self.intro_task.iter().enumerate() {
                    if intro < task {
                        targets[i] = sigmoid(scores[i]);
                    }
                }
            }
        }
        Ok(targets)
    }

    fn loss_opts(&self, task: usize) -> LossOpts {
        let mut opts = LossOpts {
            class_divisor: self.observed.len(),
            distill_weight: 0.0,
            margin: None,
        };
        if self.cfg.strategy == Strategy::Lucir && task > 0 && self.snapshot.is_some() {
            let new = self.intro_task.iter().filter(|&&t| t == task).count();
            let old = self.intro_task.len() - new;
            opts.distill_weight = self.cfg.lambda_base * (new as f64 / old as f64).sqrt();
            opts.margin = Some(MarginOpts {
                margin: self.cfg.margin,
                hard_negatives: self.cfg.hard_negatives,
                candidates: (0..self.intro_task.len())
                    .filter(|&i| self.intro_task[i] == task)
                    .collect(),
            });
        }
        opts
    }

    /// Train on one task's incomplete-information view, monitoring the
    /// in-task validation metric for the plateau schedule, then update the
    /// replay buffer with the classes this task introduced.
    pub fn train_task(
        &mut self,
        train_store: &Store,
        val_store: &Store,
        config: &TaskConfiguration,
        task: usize,
    ) -> Result<TaskLog, LearnerError> {
        self.register_task_classes(config, task);
        if self.cfg.strategy.uses_snapshot() && task > 0 {
            self.snapshot = Some(self.model.clone());
        }
        self.opt.reset_schedule();

        let pool = self.build_pool(train_store, config, task)?;
        let epochs = if task == 0 { self.cfg.epochs * 2 } else { self.cfg.epochs };
        let mut log = TaskLog::default();
        let opts = self.loss_opts(task);
        for epoch in 0..epochs {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            Xorshift64Star::derived(self.seed, "epoch", ((task as u64) << 32) | epoch as u64)
                .shuffle(&mut order);
            for chunk in order.chunks(self.cfg.batch_size) {
                let items: Vec<BatchItem> = chunk
                    .iter()
                    .map(|&i| {
                        let (features, served) = &pool[i];
                        let targets = self.make_targets(served, features, task)?;
                        let margin_truth = match (&opts.margin, self.cfg.strategy) {
                            // margin anchors buffer samples at their old class
                            (Some(_), Strategy::Lucir) => served
                                .iter()
                                .filter_map(|l| self.head_index(*l))
                                .find(|&i| self.intro_task[i] < task),
                            _ => None,
                        };
                        Ok(BatchItem {
                            features: features.clone(),
                            targets,
                            margin_truth,
                        })
                    })
                    .collect::<Result<_, LearnerError>>()?;
                let (_, grads) = batch_loss_and_grads(
                    &self.model,
                    self.snapshot.as_ref(),
                    &items,
                    &opts,
                )?;
                let grads = if self.cfg.strategy == Strategy::Agem && !self.buffer.is_empty() {
                    self.agem_projected(&grads)?
                } else {
                    grads
                };
                self.opt.step(&mut self.model, &grads);
            }
            let metric = self.in_task_val_metric(val_store, config, task)?;
            log.val_metric_trace.push(metric);
            log.lr_trace.push(self.opt.learning_rate());
            self.opt.observe_epoch_metric(metric);
        }
        if self.cfg.strategy.keeps_buffer() {
            self.update_buffer(train_store, config, task)?;
        }
        log.buffer_size = self.buffer.len();
        Ok(log)
    }

    /// The epoch training pool: served (features, labels) pairs. Replay
    /// methods append the buffer; the joint baseline sees every observed
    /// sample once with complete information.
    #[allow(clippy::type_complexity)]
    fn build_pool(
        &self,
        store: &Store,
        config: &TaskConfiguration,
        task: usize,
    ) -> Result<Vec<(Vec<Scalar>, Vec<ClassId>)>, LearnerError> {
        let mut pool = Vec::new();
        if self.cfg.strategy == Strategy::IncrementalJoint {
            let view = CompleteView::new(store, config, task);
            for (_, features, labels) in view.items() {
                pool.push((features.to_vec(), labels));
            }
            return Ok(pool);
        }
        let view = IncompleteView::new(store, config, task);
        for i in 0..view.len() {
            let (_, features, label) = view.item(i)?;
            pool.push((features.to_vec(), vec![label]));
        }
        if self.cfg.strategy.rehearses() {
            for entry in self.buffer.entries() {
                pool.push((entry.features.clone(), entry.labels.clone()));
            }
        }
        Ok(pool)
    }

    fn agem_projected(&mut self, grads: &ModelGrads) -> Result<ModelGrads, LearnerError> {
        let mut rng = Xorshift64Star::derived(self.seed, "agem", self.agem_step);
        self.agem_step += 1;
        let memory = self.buffer.draw(self.cfg.agem_batch, &mut rng);
        let items: Vec<BatchItem> = memory
            .iter()
            .map(|e| BatchItem {
                features: e.features.clone(),
                targets: self.multi_hot(&e.labels),
                margin_truth: None,
            })
            .collect();
        let opts = LossOpts {
            class_divisor: self.observed.len(),
            ..Default::default()
        };
        let (_, ref_grads) = batch_loss_and_grads(&self.model, None, &items, &opts)?;
        let flat = grads.flatten();
        let ref_flat = ref_grads.flatten();
        let projected = agem_project(&flat, &ref_flat);
        let mut out = self.model.zero_grads();
        out.assign_flat(&projected);
        Ok(out)
    }

    /// In-task validation pw-JS restricted to the current task's classes.
    fn in_task_val_metric(
        &self,
        val_store: &Store,
        config: &TaskConfiguration,
        task: usize,
    ) -> Result<f64, LearnerError> {
        let view = IncompleteView::new(val_store, config, task);
        if view.is_empty() {
            return Ok(0.0);
        }
        let task_classes: std::collections::HashSet<ClassId> =
            config.tasks[task].iter().copied().collect();
        let mut records = Vec::with_capacity(view.len());
        for i in 0..view.len() {
            let (id, features, label) = view.item(i)?;
            let predicted = self
                .predicted_classes(features)?
                .into_iter()
                .filter(|c| task_classes.contains(c));
            records.push(PredictionRecord::new(id, [label], predicted));
        }
        Ok(metrics::pw_js(&records)?)
    }

    fn update_buffer(
        &mut self,
        train_store: &Store,
        config: &TaskConfiguration,
        task: usize,
    ) -> Result<(), LearnerError> {
        for &class in &config.tasks[task] {
            let positions = train_store.class_list(class);
            let candidates: Vec<&crate::stream::StoredSample<Scalar>> =
                positions.iter().map(|&p| train_store.sample(p)).collect();
            let chosen: Vec<usize> = match self.buffer.budget() {
                None => (0..candidates.len()).collect(),
                Some(budget) if budget >= candidates.len() => (0..candidates.len()).collect(),
                Some(budget) => match self.cfg.selection {
                    Selection::Random => {
                        let mut idx: Vec<usize> = (0..candidates.len()).collect();
                        Xorshift64Star::derived(self.seed, "buffer", class.0 as u64)
                            .shuffle(&mut idx);
                        idx.truncate(budget);
                        idx
                    }
                    Selection::Herding => {
                        let feats: Vec<Vec<Scalar>> = candidates
                            .iter()
                            .map(|s| Ok(self.model.forward(&s.features)?.features))
                            .collect::<Result<_, LearnerError>>()?;
                        herding_select(&feats, budget)
                    }
                },
            };
            let entries = chosen
                .into_iter()
                .map(|i| BufferEntry {
                    sample_id: candidates[i].id,
                    features: candidates[i].features.clone(),
                    // the label as served: the class whose list we walked
                    labels: vec![class],
                })
                .collect();
            self.buffer.insert_class(class, entries);
        }
        Ok(())
    }

    /// Complete-information evaluation: predictions for every observed
    /// sample, each exactly once.
    pub fn evaluate(&self, view: &CompleteView<Scalar>) -> Result<Vec<PredictionRecord>, LearnerError> {
        let mut records = Vec::new();
        for (id, features, labels) in view.items() {
            let predicted = self.predicted_classes(features)?;
            records.push(PredictionRecord::new(id, labels, predicted));
        }
        Ok(records)
    }

    /// Predictions restricted to one task's samples (for the R matrix).
    pub fn evaluate_task(
        &self,
        view: &CompleteView<Scalar>,
        config: &TaskConfiguration,
        task: usize,
    ) -> Result<Vec<PredictionRecord>, LearnerError> {
        let mut records = Vec::new();
        for (id, features, labels) in view.task_items(config, task) {
            let predicted = self.predicted_classes(features)?;
            records.push(PredictionRecord::new(id, labels, predicted));
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use crate::hierarchy::Hierarchy;
    use crate::stream::{build_labeled_store, split, AssignmentRule, SplitSpec, StoreMode};

    fn tiny_hierarchy() -> Hierarchy {
        Hierarchy::parse_tsv("a0\ta\na1\ta\nb0\tb\nb1\tb\ns0\ns1\n").unwrap()
    }

    fn tiny_setup(seed: u64) -> (Hierarchy, Store, Store, TaskConfiguration) {
        let h = tiny_hierarchy();
        let spec = SynthSpec {
            dim: 4,
            samples_per_subclass: 40,
            sup_scale: 10.0,
            sub_scale: 3.0,
            noise_scale: 1.0,
            seed,
        };
        let raw: Vec<crate::Sample> = generate_synthetic(&h, &spec).unwrap();
        let (train, val1, _) = split(&raw, &h, &SplitSpec::default(), seed).unwrap();
        let rule = AssignmentRule::default();
        let train_store =
            build_labeled_store(&train, &h, &rule, seed, StoreMode::Incomplete).unwrap();
        let val_store =
            build_labeled_store(&val1, &h, &rule, seed, StoreMode::Incomplete).unwrap();
        let config = crate::stream::generate_task_configuration(&h, 2, 3, seed).unwrap();
        (h, train_store, val_store, config)
    }

    fn quick_config(strategy: Strategy) -> LearnerConfig {
        let mut cfg = LearnerConfig::new(strategy);
        cfg.epochs = 2;
        cfg.batch_size = 16;
        cfg
    }

    #[test]
    fn agem_projection_worked_example() {
        let projected = agem_project(&[1.0, 0.0], &[-1.0, 1.0]);
        assert!((projected[0] - 0.5).abs() < 1e-12);
        assert!((projected[1] - 0.5).abs() < 1e-12);
        let dot: f64 = projected.iter().zip(&[-1.0, 1.0]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn agem_keeps_agreeing_gradient() {
        let g = [0.3, -0.2, 1.0];
        assert_eq!(agem_project(&g, &[0.3, -0.2, 1.0]), g.to_vec());
    }

    #[test]
    fn agem_projection_never_conflicts() {
        let mut rng = Xorshift64Star::derived(11, "test", 0);
        for _ in 0..1000 {
            let g: Vec<f64> = (0..8).map(|_| rng.next_gaussian()).collect();
            let r: Vec<f64> = (0..8).map(|_| rng.next_gaussian()).collect();
            let p = agem_project(&g, &r);
            let dot: f64 = p.iter().zip(&r).map(|(a, b)| a * b).sum();
            assert!(dot >= -1e-9, "dot {dot}");
        }
    }

    #[test]
    fn strategies_agree_on_task_zero() {
        // no buffer, no snapshot, same loss: identical trajectories
        let (_, train, val, config) = tiny_setup(3);
        let mut flats = Vec::new();
        for strategy in [Strategy::Finetune, Strategy::Er, Strategy::Agem, Strategy::IcarlCnn] {
            let mut state = LearnerState::new(quick_config(strategy), 4, vec![8], 3);
            state.train_task(&train, &val, &config, 0).unwrap();
            flats.push(state.model.flatten());
        }
        for other in &flats[1..] {
            assert_eq!(&flats[0], other);
        }
    }

    #[test]
    fn buffer_labels_frozen_at_insertion() {
        // ER-infinite keeps the label each sample was served with, even
        // after a refining subclass appears in a later task
        let (h, train, val, config) = tiny_setup(5);
        let mut cfg = quick_config(Strategy::ErInfinite);
        cfg.epochs = 1;
        let mut state = LearnerState::new(cfg, 4, vec![8], 5);
        state.train_task(&train, &val, &config, 0).unwrap();
        let early: Vec<(u64, Vec<ClassId>)> = state
            .buffer
            .entries()
            .map(|e| (e.sample_id, e.labels.clone()))
            .collect();
        state.train_task(&train, &val, &config, 1).unwrap();
        for (id, labels) in &early {
            let entry = state.buffer.entries().find(|e| e.sample_id == *id).unwrap();
            assert_eq!(&entry.labels, labels);
            assert_eq!(labels.len(), 1, "served with exactly one label");
        }
        let _ = h;
    }

    #[test]
    fn icarl_soft_targets_match_snapshot_sigmoid() {
        let (_, train, val, config) = tiny_setup(7);
        let mut state = LearnerState::new(quick_config(Strategy::IcarlCnn), 4, vec![8], 7);
        state.train_task(&train, &val, &config, 0).unwrap();
        state.register_task_classes(&config, 1);
        state.snapshot = Some(state.model.clone());
        let x: Vec<f64> = vec![0.5, -0.25, 1.0, 0.0];
        let served = vec![config.tasks[1][0]];
        let targets = state.make_targets(&served, &x, 1).unwrap();
        let snap_scores = state.snapshot.as_ref().unwrap().forward(&x).unwrap().scores;
        for (i, &intro) in state.intro_task.iter().enumerate() {
            if intro == 0 {
                assert!((targets[i] - sigmoid(snap_scores[i])).abs() < 1e-15);
            }
        }
        // serving the same input twice yields identical targets
        assert_eq!(targets, state.make_targets(&served, &x, 1).unwrap());
    }

    #[test]
    fn joint_pool_uses_complete_labels() {
        let (h, train, val, config) = tiny_setup(9);
        let state = LearnerState::new(quick_config(Strategy::IncrementalJoint), 4, vec![8], 9);
        let last = config.task_count() - 1;
        let mut state = state;
        for t in 0..=last {
            state.register_task_classes(&config, t);
        }
        let pool = state.build_pool(&train, &config, last).unwrap();
        assert_eq!(pool.len(), train.count_without_duplicates());
        let has_pair = pool.iter().any(|(_, labels)| labels.len() == 2);
        assert!(has_pair, "parented samples carry both labels");
        let _ = (h, val);
    }

    #[test]
    fn lucir_uses_cosine_head_and_distillation() {
        let (_, train, val, config) = tiny_setup(13);
        let mut state = LearnerState::new(quick_config(Strategy::Lucir), 4, vec![8], 13);
        assert_eq!(state.cfg.strategy.head_kind(), HeadKind::CosineNorm);
        state.train_task(&train, &val, &config, 0).unwrap();
        state.train_task(&train, &val, &config, 1).unwrap();
        let opts = state.loss_opts(1);
        let new = state.intro_task.iter().filter(|&&t| t == 1).count() as f64;
        let old = state.intro_task.iter().filter(|&&t| t == 0).count() as f64;
        assert!((opts.distill_weight - 5.0 * (new / old).sqrt()).abs() < 1e-12);
        assert!(opts.margin.is_some());
    }

    #[test]
    fn unknown_strategy_is_an_error() {
        assert!(Strategy::parse("sgd").is_err());
        assert_eq!(Strategy::parse("icarl-norm").unwrap(), Strategy::IcarlNorm);
    }

    #[test]
    fn finetune_keeps_no_buffer() {
        let (_, train, val, config) = tiny_setup(17);
        let mut state = LearnerState::new(quick_config(Strategy::Finetune), 4, vec![8], 17);
        state.train_task(&train, &val, &config, 0).unwrap();
        assert!(state.buffer.is_empty());
    }
}
