//! Experiment orchestration: JSON-configured, seeded multi-run driver
//! with per-seed failure isolation, per-task JSON logs, prediction CSVs,
//! and mean/stdev aggregation across seeds.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, SynthSpec};
use crate::hierarchy::{ClassId, Hierarchy, CIFAR_HIERARCHY_TSV};
use crate::learners::{LearnerConfig, LearnerState, Strategy};
use crate::metrics::{self, ConfusionMatrix, EvalMatrix, PredictionRecord};
use crate::nn::checkpoint;
use crate::rng::hash64;
use crate::stream::{
    build_labeled_store, generate_task_configuration, split, AssignmentRule, CompleteView,
    SplitSpec, StoreMode, TaskConfiguration,
};
use crate::{Sample, Store};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("run: {0}")]
    Run(String),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 data error, 3 run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Run(_) => 3,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Run(e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Hierarchy TSV path; None uses the bundled CIFAR-shaped hierarchy.
    pub hierarchy: Option<PathBuf>,
    /// External dataset CSV; None generates synthetic data.
    pub dataset: Option<PathBuf>,
    /// Separate test-pool CSV for external data.
    pub test_dataset: Option<PathBuf>,
    pub dim: usize,
    /// Synthetic pool sizes per subclass; the test pool is drawn from the
    /// same class centers.
    pub train_per_subclass: usize,
    pub test_per_subclass: usize,
    pub sup_scale: f64,
    pub sub_scale: f64,
    pub noise_scale: f64,
    pub in_task_val_frac: f64,
    pub post_task_val_frac: f64,
    pub subclass_keep: f64,
    pub superclass_take: f64,
    pub cap_threshold: usize,
    /// Superclasses in task 0 and classes per later task.
    pub n0: usize,
    pub k: usize,
    pub learners: Vec<String>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Per-class exemplar budget; 0 means unbounded; None keeps each
    /// strategy's default.
    pub buffer: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub threads: usize,
    pub dump: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hierarchy: None,
            dataset: None,
            test_dataset: None,
            dim: 16,
            train_per_subclass: 500,
            test_per_subclass: 100,
            sup_scale: 10.0,
            sub_scale: 3.0,
            noise_scale: 1.0,
            in_task_val_frac: 0.1,
            post_task_val_frac: 0.1,
            subclass_keep: 0.8,
            superclass_take: 0.4,
            cap_threshold: 8,
            n0: 10,
            k: 5,
            learners: vec!["er".into()],
            hidden: vec![64],
            epochs: 10,
            batch_size: 128,
            buffer: None,
            learning_rate: None,
            seeds: vec![1],
            out: PathBuf::from("runs"),
            threads: 1,
            dump: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Usage("at least one seed required".into()));
        }
        if self.learners.is_empty() {
            return Err(HarnessError::Usage("at least one learner required".into()));
        }
        for name in &self.learners {
            Strategy::parse(name).map_err(|e| HarnessError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            in_task_val_frac: self.in_task_val_frac,
            post_task_val_frac: self.post_task_val_frac,
        }
    }

    fn assignment_rule(&self) -> AssignmentRule {
        AssignmentRule {
            subclass_keep: self.subclass_keep,
            superclass_take: self.superclass_take,
            cap_threshold: self.cap_threshold,
        }
    }

    fn learner_config(&self, name: &str) -> Result<LearnerConfig, HarnessError> {
        let strategy = Strategy::parse(name).map_err(|e| HarnessError::Usage(e.to_string()))?;
        let mut cfg = LearnerConfig::new(strategy);
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg.learning_rate = self.learning_rate;
        if let Some(b) = self.buffer {
            cfg.buffer_budget = if b == 0 { None } else { Some(b) };
        }
        Ok(cfg)
    }
}

pub fn load_hierarchy(cfg: &ExperimentConfig) -> Result<Hierarchy, HarnessError> {
    let text = match &cfg.hierarchy {
        None => CIFAR_HIERARCHY_TSV.to_string(),
        Some(path) => fs::read_to_string(path)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?,
    };
    Hierarchy::parse_tsv(&text).map_err(data_err)
}

/// Training pool (to be split) and test pool. Synthetic pools share class
/// centers: one generation of `train + test` samples per subclass is
/// partitioned positionally per class.
pub fn load_pools(
    cfg: &ExperimentConfig,
    hierarchy: &Hierarchy,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>), HarnessError> {
    if let Some(path) = &cfg.dataset {
        let file = fs::File::open(path)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        let train = data::load_external(BufReader::new(file), hierarchy).map_err(data_err)?;
        let test = match &cfg.test_dataset {
            Some(p) => {
                let f = fs::File::open(p)
                    .map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?;
                data::load_external(BufReader::new(f), hierarchy).map_err(data_err)?
            }
            None => Vec::new(),
        };
        return Ok((train, test));
    }
    let spec = SynthSpec {
        dim: cfg.dim,
        samples_per_subclass: cfg.train_per_subclass + cfg.test_per_subclass,
        sup_scale: cfg.sup_scale,
        sub_scale: cfg.sub_scale,
        noise_scale: cfg.noise_scale,
        seed: hash64(seed, "data", 0),
    };
    let all: Vec<Sample> = data::generate_synthetic(hierarchy, &spec).map_err(data_err)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen = vec![0usize; hierarchy.len()];
    for s in all {
        let n = &mut seen[s.subclass.0];
        if *n < cfg.train_per_subclass {
            train.push(s);
        } else {
            test.push(s);
        }
        *n += 1;
    }
    Ok((train, test))
}

pub struct SeedData {
    pub config: TaskConfiguration,
    pub train_store: Store,
    pub in_task_val_store: Store,
    pub post_task_val_store: Store,
    pub test_store: Option<Store>,
}

pub fn prepare_seed(
    cfg: &ExperimentConfig,
    hierarchy: &Hierarchy,
    seed: u64,
) -> Result<SeedData, HarnessError> {
    let (pool, test_pool) = load_pools(cfg, hierarchy, seed)?;
    let (train, val1, val2) =
        split(&pool, hierarchy, &cfg.split_spec(), seed).map_err(data_err)?;
    let rule = cfg.assignment_rule();
    let train_store =
        build_labeled_store(&train, hierarchy, &rule, seed, StoreMode::Incomplete)
            .map_err(data_err)?;
    let in_task_val_store =
        build_labeled_store(&val1, hierarchy, &rule, seed, StoreMode::Incomplete)
            .map_err(data_err)?;
    let post_task_val_store =
        build_labeled_store(&val2, hierarchy, &rule, seed, StoreMode::Complete)
            .map_err(data_err)?;
    let test_store = if test_pool.is_empty() {
        None
    } else {
        Some(
            build_labeled_store(&test_pool, hierarchy, &rule, seed, StoreMode::Complete)
                .map_err(data_err)?,
        )
    };
    let config = generate_task_configuration(hierarchy, cfg.n0, cfg.k, seed).map_err(data_err)?;
    Ok(SeedData {
        config,
        train_store,
        in_task_val_store,
        post_task_val_store,
        test_store,
    })
}

/// Per-task JSON log entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: usize,
    #[serde(rename = "pwJS_avg")]
    pub pw_js_avg: f64,
    #[serde(rename = "R_row")]
    pub r_row: Vec<Option<f64>>,
    pub lr_trace: Vec<f64>,
    pub buffer_size: usize,
}

pub fn predictions_to_csv(records: &[PredictionRecord], hierarchy: &Hierarchy) -> String {
    let mut out = String::from("sample_id,truth,predicted\n");
    let join = |set: &std::collections::BTreeSet<ClassId>| {
        set.iter()
            .map(|&c| hierarchy.name(c))
            .collect::<Vec<_>>()
            .join(";")
    };
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.sample_id, join(&r.truth), join(&r.predicted)));
    }
    out
}

/// Parse a predictions CSV. Label names are interned, so no hierarchy is
/// needed; metrics depend only on set arithmetic.
pub fn predictions_from_csv(text: &str) -> Result<Vec<PredictionRecord>, HarnessError> {
    let mut interner: BTreeMap<String, ClassId> = BTreeMap::new();
    let intern = |name: &str, table: &mut BTreeMap<String, ClassId>| {
        let next = ClassId(table.len());
        *table.entry(name.to_string()).or_insert(next)
    };
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("sample_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(HarnessError::Data(format!(
                "line {}: expected 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| HarnessError::Data(format!("line {}: bad sample id", lineno + 1)))?;
        let parse_set = |field: &str, table: &mut BTreeMap<String, ClassId>| {
            field
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| intern(s, table))
                .collect::<Vec<_>>()
        };
        let truth = parse_set(fields[1], &mut interner);
        let predicted = parse_set(fields[2], &mut interner);
        records.push(PredictionRecord::new(id, truth, predicted));
    }
    Ok(records)
}

/// `split --verify` report: per-split with/without-duplicate counts as
/// CSV. Returns Err(Run) when the count identity fails for a training
/// split.
pub fn cmd_split_verify(cfg: &ExperimentConfig, seed: u64) -> Result<String, HarnessError> {
    let hierarchy = load_hierarchy(cfg)?;
    let data = prepare_seed(cfg, &hierarchy, seed)?;
    let mut out = String::from("split,with_duplicates,without_duplicates\n");
    let mut rows = vec![
        ("train", &data.train_store),
        ("in_task_val", &data.in_task_val_store),
        ("post_task_val", &data.post_task_val_store),
    ];
    if let Some(test) = &data.test_store {
        rows.push(("test", test));
    }
    for (name, store) in &rows {
        out.push_str(&format!(
            "{name},{},{}\n",
            store.count_with_duplicates(),
            store.count_without_duplicates()
        ));
    }
    // exact identity for incomplete stores: duplicates are the per-class
    // keep/take overlaps, max(0, keep_n + take_n - pool size)
    let rule = cfg.assignment_rule();
    for (name, store) in &rows[..2] {
        let mut pool_sizes = vec![0usize; hierarchy.len()];
        for s in store.samples() {
            pool_sizes[s.labels[0].0] += 1;
        }
        let mut expected = store.count_without_duplicates();
        for class in hierarchy.superclasses() {
            let children = hierarchy.children(class);
            let take = rule.effective_take(children.len());
            for &child in children {
                let len = pool_sizes[child.0];
                let keep_n = (rule.subclass_keep * len as f64).floor() as usize;
                let take_n = (take * len as f64).floor() as usize;
                expected += (keep_n + take_n).saturating_sub(len);
            }
        }
        if expected != store.count_with_duplicates() {
            return Err(HarnessError::Run(format!(
                "{name}: count identity violated: expected {expected}, got {}",
                store.count_with_duplicates()
            )));
        }
    }
    Ok(out)
}

/// `gen-config`: one task-configuration JSON per seed.
pub fn cmd_generate_config(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let hierarchy = load_hierarchy(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(data_err)?;
    let mut paths = Vec::new();
    for &seed in &cfg.seeds {
        let config =
            generate_task_configuration(&hierarchy, cfg.n0, cfg.k, seed).map_err(data_err)?;
        let path = cfg.out.join(format!("tasks_seed_{seed}.json"));
        fs::write(&path, config.to_json(&hierarchy)).map_err(data_err)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Default)]
pub struct RunOptions {
    /// Save a final parameter checkpoint per seed and learner.
    pub save: bool,
    /// Warm-start parameters from a checkpoint (class count must be 0).
    pub load: Option<PathBuf>,
}

/// One learner on one seed: the full task loop with post-task evaluation.
/// Artifacts land in `dir`.
fn run_single(
    cfg: &ExperimentConfig,
    hierarchy: &Hierarchy,
    learner_name: &str,
    seed: u64,
    dir: &Path,
    opts: &RunOptions,
) -> Result<Vec<f64>, HarnessError> {
    fs::create_dir_all(dir).map_err(data_err)?;
    let data = prepare_seed(cfg, hierarchy, seed)?;
    fs::write(dir.join("tasks.json"), data.config.to_json(hierarchy)).map_err(data_err)?;
    if cfg.dump {
        let mut buf = Vec::new();
        let pool: Vec<Sample> = data
            .train_store
            .samples()
            .iter()
            .map(|s| Sample {
                id: s.id,
                features: s.features.clone(),
                subclass: s.labels[0],
            })
            .collect();
        data::write_csv(&pool, hierarchy, &mut buf).map_err(data_err)?;
        fs::write(dir.join("train_pool.csv"), buf).map_err(data_err)?;
    }

    let lcfg = cfg.learner_config(learner_name)?;
    let mut state = LearnerState::new(lcfg, cfg.dim, cfg.hidden.clone(), seed);
    if let Some(path) = &opts.load {
        let model = checkpoint::load(path).map_err(data_err)?;
        if model.class_count() != 0 {
            return Err(HarnessError::Data(format!(
                "{}: checkpoint already has {} head rows",
                path.display(),
                model.class_count()
            )));
        }
        state.model = model;
    }

    let eval_store = data.test_store.as_ref().unwrap_or(&data.post_task_val_store);
    let task_count = data.config.task_count();
    let mut r_matrix = EvalMatrix::new(task_count);
    let mut curve = Vec::with_capacity(task_count);
    let mut final_records = Vec::new();
    for task in 0..task_count {
        let log = state
            .train_task(&data.train_store, &data.in_task_val_store, &data.config, task)
            .map_err(run_err)?;

        let view = CompleteView::new(eval_store, &data.config, task);
        for k in 0..=task {
            let records = state.evaluate_task(&view, &data.config, k).map_err(run_err)?;
            r_matrix.update(task, k, &records).map_err(run_err)?;
        }
        let test_records = state.evaluate(&view).map_err(run_err)?;
        fs::write(
            dir.join(format!("preds_test_after_{task}.csv")),
            predictions_to_csv(&test_records, hierarchy),
        )
        .map_err(data_err)?;

        let val_view = CompleteView::new(&data.post_task_val_store, &data.config, task);
        let val_records = state.evaluate(&val_view).map_err(run_err)?;
        let pw_js_avg = metrics::pw_js(&val_records).map_err(run_err)?;
        curve.push(pw_js_avg);

        let record = TaskRecord {
            task,
            pw_js_avg,
            r_row: r_matrix.row(task).to_vec(),
            lr_trace: log.lr_trace,
            buffer_size: log.buffer_size,
        };
        fs::write(
            dir.join(format!("task_{task}.json")),
            serde_json::to_string_pretty(&record).expect("task record json"),
        )
        .map_err(data_err)?;
        if task + 1 == task_count {
            final_records = test_records;
        }
    }

    fs::write(dir.join("r_matrix.csv"), r_matrix.to_csv()).map_err(data_err)?;
    let order = data.config.observed_after(task_count - 1);
    let confusion: ConfusionMatrix = metrics::confusion(&final_records, &order);
    fs::write(
        dir.join("confusion.csv"),
        confusion.to_csv(|c| hierarchy.name(c).to_string()),
    )
    .map_err(data_err)?;

    let summary = serde_json::json!({
        "learner": learner_name,
        "seed": seed,
        "MR": metrics::exact_match(&final_records).map_err(run_err)?,
        "JS": metrics::jaccard(&final_records).map_err(run_err)?,
        "pwJS": metrics::pw_js(&final_records).map_err(run_err)?,
    });
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary json"),
    )
    .map_err(data_err)?;

    if opts.save {
        checkpoint::save(&state.model, &dir.join("model")).map_err(data_err)?;
    }
    Ok(curve)
}

fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate_csv(curves: &[Vec<f64>]) -> String {
    let mut out = String::from("task,pwJS_mean,pwJS_stdev,runs\n");
    let tasks = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    for t in 0..tasks {
        let at_t: Vec<f64> = curves.iter().filter_map(|c| c.get(t)).copied().collect();
        let (mean, stdev) = mean_stdev(&at_t);
        out.push_str(&format!("{t},{mean},{stdev},{}\n", at_t.len()));
    }
    out
}

/// `run`: every learner on every seed, isolated per seed. Seeds run in up
/// to `threads` parallel workers; artifacts are per-seed directories, so
/// outputs are identical regardless of thread count.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(), HarnessError> {
    cfg.validate()?;
    let hierarchy = load_hierarchy(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(data_err)?;
    let mut failures: Vec<String> = Vec::new();
    for learner in &cfg.learners {
        let learner_dir = cfg.out.join(learner);
        let threads = cfg.threads.max(1);
        let mut results: Vec<(u64, Result<Vec<f64>, HarnessError>)> = Vec::new();
        for chunk in cfg.seeds.chunks(threads) {
            let batch: Vec<(u64, Result<Vec<f64>, HarnessError>)> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&seed| {
                        let dir = learner_dir.join(format!("seed_{seed}"));
                        let hierarchy = &hierarchy;
                        s.spawn(move || {
                            (seed, run_single(cfg, hierarchy, learner, seed, &dir, opts))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("seed worker")).collect()
            });
            results.extend(batch);
        }
        let mut curves = Vec::new();
        for (seed, result) in results {
            match result {
                Ok(curve) => curves.push(curve),
                Err(e) => failures.push(format!("{learner} seed {seed}: {e}")),
            }
        }
        if !curves.is_empty() {
            fs::write(
                cfg.out.join(format!("aggregate_{learner}.csv")),
                aggregate_csv(&curves),
            )
            .map_err(data_err)?;
        }
    }
    if !failures.is_empty() {
        fs::write(cfg.out.join("failures.txt"), failures.join("\n") + "\n").map_err(data_err)?;
        return Err(HarnessError::Run(format!(
            "{} run(s) failed; see failures.txt",
            failures.len()
        )));
    }
    Ok(())
}

/// `eval`: predictions CSV to `{MR, JS, pwJS}` JSON.
pub fn cmd_eval(path: &Path) -> Result<String, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    let records = predictions_from_csv(&text)?;
    let v = serde_json::json!({
        "MR": metrics::exact_match(&records).map_err(data_err)?,
        "JS": metrics::jaccard(&records).map_err(data_err)?,
        "pwJS": metrics::pw_js(&records).map_err(data_err)?,
    });
    Ok(serde_json::to_string_pretty(&v).expect("metrics json"))
}

/// `report`: re-aggregate per-task logs found under `seed_*` directories.
pub fn cmd_report(dirs: &[PathBuf]) -> Result<String, HarnessError> {
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for dir in dirs {
        let mut seed_dirs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_dir()
                    && p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("seed_"))
            })
            .collect();
        if seed_dirs.is_empty() && dir.join("task_0.json").exists() {
            seed_dirs.push(dir.clone());
        }
        seed_dirs.sort();
        for sd in seed_dirs {
            let mut curve = Vec::new();
            for task in 0.. {
                let path = sd.join(format!("task_{task}.json"));
                if !path.exists() {
                    break;
                }
                let text = fs::read_to_string(&path).map_err(data_err)?;
                let record: TaskRecord = serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
                curve.push(record.pw_js_avg);
            }
            if !curve.is_empty() {
                curves.push(curve);
            }
        }
    }
    if curves.is_empty() {
        return Err(HarnessError::Data("no task logs found".into()));
    }
    Ok(aggregate_csv(&curves))
}
