//! Task streams over a labeled store: per-subclass splits, superclass
//! sample assignment, seeded task configurations, and the two access
//! regimes: incomplete information for training (one label per item) and
//! complete information for evaluation (all observed labels, deduplicated).

use std::collections::{HashMap, HashSet};

use num_traits::Float;
use thiserror::Error;

use crate::data::RawSample;
use crate::hierarchy::{ClassId, Hierarchy};
use crate::rng::Xorshift64Star;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("invalid assignment rule: {0}")]
    InvalidRule(String),
    #[error("infeasible task configuration: {0}")]
    InfeasibleConfig(String),
    #[error("item index out of range")]
    OutOfRange,
    #[error("task configuration JSON: {0}")]
    BadConfigFile(String),
}

/// Validation-split fractions; the test set is a separate pool.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub in_task_val_frac: f64,
    pub post_task_val_frac: f64,
}

impl SplitSpec {
    fn validate(&self) -> Result<(), StreamError> {
        let (f1, f2) = (self.in_task_val_frac, self.post_task_val_frac);
        if f1 < 0.0 || f2 < 0.0 || f1 + f2 >= 1.0 {
            return Err(StreamError::InvalidSplit(format!("{f1}, {f2}")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            in_task_val_frac: 0.1,
            post_task_val_frac: 0.1,
        }
    }
}

/// How samples are shared between a subclass and its superclass: the
/// subclass retains `subclass_keep` of its samples while the superclass
/// receives `superclass_take`, scaled down when the superclass has more
/// than `cap_threshold` children.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentRule {
    pub subclass_keep: f64,
    pub superclass_take: f64,
    pub cap_threshold: usize,
}

impl AssignmentRule {
    fn validate(&self) -> Result<(), StreamError> {
        if !(self.superclass_take > 0.0
            && self.superclass_take <= self.subclass_keep
            && self.subclass_keep <= 1.0)
        {
            return Err(StreamError::InvalidRule(
                "need 0 < superclass_take <= subclass_keep <= 1".into(),
            ));
        }
        if self.subclass_keep + self.superclass_take < 1.0 {
            return Err(StreamError::InvalidRule("keep + take must cover all samples".into()));
        }
        Ok(())
    }

    /// Effective take fraction for a child of a superclass with
    /// `child_count` children.
    pub fn effective_take(&self, child_count: usize) -> f64 {
        let cap = (self.cap_threshold as f64 / child_count as f64).min(1.0);
        self.superclass_take * cap
    }
}

impl Default for AssignmentRule {
    fn default() -> Self {
        Self {
            subclass_keep: 0.8,
            superclass_take: 0.4,
            cap_threshold: 8,
        }
    }
}

/// Whether a store serves training (shared subclass/superclass index
/// lists) or evaluation (each sample listed once with its full label set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreMode {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone)]
pub struct StoredSample<F> {
    pub id: u64,
    pub features: Vec<F>,
    /// Full label set: `{subclass}` or `{subclass, superclass}`.
    pub labels: Vec<ClassId>,
}

/// Per-class index lists over a backing sample pool.
#[derive(Debug, Clone)]
pub struct LabeledStore<F> {
    samples: Vec<StoredSample<F>>,
    class_lists: Vec<Vec<usize>>,
}

impl<F: Float> LabeledStore<F> {
    pub fn samples(&self) -> &[StoredSample<F>] {
        &self.samples
    }

    pub fn class_list(&self, class: ClassId) -> &[usize] {
        &self.class_lists[class.0]
    }

    pub fn sample(&self, pos: usize) -> &StoredSample<F> {
        &self.samples[pos]
    }

    /// Total index-list length, counting samples shared between a subclass
    /// and its superclass twice.
    pub fn count_with_duplicates(&self) -> usize {
        self.class_lists.iter().map(Vec::len).sum()
    }

    /// Number of distinct samples referenced by any class list.
    pub fn count_without_duplicates(&self) -> usize {
        let mut seen = HashSet::new();
        for list in &self.class_lists {
            seen.extend(list.iter().copied());
        }
        seen.len()
    }
}

/// Per-subclass stratified split into `[train | in-task val | post-task
/// val]`. Each subclass is shuffled with seed `hash64(seed, "split",
/// class_index)`; the validation parts take `floor(frac * len)` samples.
#[allow(clippy::type_complexity)]
pub fn split<F: Float + Clone>(
    raw: &[RawSample<F>],
    hierarchy: &Hierarchy,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(Vec<RawSample<F>>, Vec<RawSample<F>>, Vec<RawSample<F>>), StreamError> {
    spec.validate()?;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); hierarchy.len()];
    for (pos, s) in raw.iter().enumerate() {
        per_class[s.subclass.0].push(pos);
    }
    let mut train = Vec::new();
    let mut val1 = Vec::new();
    let mut val2 = Vec::new();
    for class in hierarchy.subclasses() {
        let positions = &mut per_class[class.0];
        if positions.is_empty() {
            return Err(StreamError::EmptyClass(hierarchy.name(class).to_string()));
        }
        let mut rng = Xorshift64Star::derived(seed, "split", class.0 as u64);
        rng.shuffle(positions);
        let len = positions.len();
        let n1 = (spec.in_task_val_frac * len as f64).floor() as usize;
        let n2 = (spec.post_task_val_frac * len as f64).floor() as usize;
        let n_train = len - n1 - n2;
        for (i, &pos) in positions.iter().enumerate() {
            let sample = raw[pos].clone();
            if i < n_train {
                train.push(sample);
            } else if i < n_train + n1 {
                val1.push(sample);
            } else {
                val2.push(sample);
            }
        }
    }
    Ok((train, val1, val2))
}

/// Build the per-class index lists over a pool.
///
/// Incomplete mode: each parented subclass's positions are shuffled with
/// `hash64(seed, "assign", class_index)`; the subclass keeps the first
/// `floor(keep * len)`, its superclass receives the last
/// `floor(effective_take * len)`. Standalone classes keep everything.
/// Complete mode: every subclass keeps all its samples and each superclass
/// lists the union of its children's samples.
pub fn build_labeled_store<F: Float + Clone>(
    pool: &[RawSample<F>],
    hierarchy: &Hierarchy,
    rule: &AssignmentRule,
    seed: u64,
    mode: StoreMode,
) -> Result<LabeledStore<F>, StreamError> {
    rule.validate()?;
    let samples: Vec<StoredSample<F>> = pool
        .iter()
        .map(|s| StoredSample {
            id: s.id,
            features: s.features.clone(),
            labels: hierarchy.labels_of(s.subclass).expect("pool label"),
        })
        .collect();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); hierarchy.len()];
    for (pos, s) in pool.iter().enumerate() {
        per_class[s.subclass.0].push(pos);
    }
    let mut class_lists: Vec<Vec<usize>> = vec![Vec::new(); hierarchy.len()];
    for class in hierarchy.subclasses() {
        let mut positions = per_class[class.0].clone();
        match (mode, hierarchy.parent(class)) {
            (StoreMode::Incomplete, Some(parent)) => {
                let mut rng = Xorshift64Star::derived(seed, "assign", class.0 as u64);
                rng.shuffle(&mut positions);
                let len = positions.len();
                let keep = (rule.subclass_keep * len as f64).floor() as usize;
                let take = (rule.effective_take(hierarchy.children(parent).len()) * len as f64)
                    .floor() as usize;
                class_lists[parent.0].extend_from_slice(&positions[len - take..]);
                positions.truncate(keep);
                class_lists[class.0] = positions;
            }
            (StoreMode::Incomplete, None) => {
                class_lists[class.0] = positions;
            }
            (StoreMode::Complete, parent) => {
                if let Some(parent) = parent {
                    class_lists[parent.0].extend_from_slice(&positions);
                }
                class_lists[class.0] = positions;
            }
        }
    }
    Ok(LabeledStore {
        samples,
        class_lists,
    })
}

/// Ordered partition of classes into tasks, subclasses strictly after
/// their superclass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskConfiguration {
    pub tasks: Vec<Vec<ClassId>>,
    pub seed: u64,
}

impl TaskConfiguration {
    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    /// Task index of each class, or None if absent.
    pub fn task_of(&self, hierarchy: &Hierarchy) -> Vec<Option<usize>> {
        let mut map = vec![None; hierarchy.len()];
        for (t, classes) in self.tasks.iter().enumerate() {
            for &c in classes {
                map[c.0] = Some(t);
            }
        }
        map
    }

    /// Classes introduced in tasks `0..=task`, in introduction order.
    pub fn observed_after(&self, task: usize) -> Vec<ClassId> {
        self.tasks[..=task].iter().flatten().copied().collect()
    }

    pub fn to_json(&self, hierarchy: &Hierarchy) -> String {
        let tasks: Vec<Vec<&str>> = self
            .tasks
            .iter()
            .map(|t| t.iter().map(|&c| hierarchy.name(c)).collect())
            .collect();
        let v = serde_json::json!({ "tasks": tasks, "seed": self.seed });
        serde_json::to_string_pretty(&v).expect("config json")
    }

    pub fn from_json(text: &str, hierarchy: &Hierarchy) -> Result<Self, StreamError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| StreamError::BadConfigFile(e.to_string()))?;
        let seed = v["seed"]
            .as_u64()
            .ok_or_else(|| StreamError::BadConfigFile("missing seed".into()))?;
        let tasks = v["tasks"]
            .as_array()
            .ok_or_else(|| StreamError::BadConfigFile("missing tasks".into()))?
            .iter()
            .map(|t| {
                t.as_array()
                    .ok_or_else(|| StreamError::BadConfigFile("task is not a list".into()))?
                    .iter()
                    .map(|n| {
                        let name = n
                            .as_str()
                            .ok_or_else(|| StreamError::BadConfigFile("class not a string".into()))?;
                        hierarchy
                            .lookup(name)
                            .ok_or_else(|| StreamError::BadConfigFile(format!("unknown class `{name}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { tasks, seed })
    }
}

/// Generate a seeded task configuration: `n0` superclasses (standalone
/// classes fill in only when superclasses run out) for task 0, then the
/// remaining classes shuffled and packed `k` per task with a repair pass
/// that defers any subclass scheduled at or before its parent.
pub fn generate_task_configuration(
    hierarchy: &Hierarchy,
    n0: usize,
    k: usize,
    seed: u64,
) -> Result<TaskConfiguration, StreamError> {
    if n0 == 0 || k == 0 {
        return Err(StreamError::InfeasibleConfig("n0 and k must be positive".into()));
    }
    let mut supers: Vec<ClassId> = hierarchy.superclasses().collect();
    let mut standalone: Vec<ClassId> = hierarchy.standalone().collect();
    let mut task0: Vec<ClassId> = Vec::with_capacity(n0);
    if supers.len() >= n0 {
        Xorshift64Star::derived(seed, "task0", 0).shuffle(&mut supers);
        task0.extend_from_slice(&supers[..n0]);
    } else {
        task0.extend_from_slice(&supers);
        let need = n0 - supers.len();
        if standalone.len() < need {
            return Err(StreamError::InfeasibleConfig(format!(
                "task 0 needs {n0} classes, only {} eligible",
                supers.len() + standalone.len()
            )));
        }
        Xorshift64Star::derived(seed, "task0", 1).shuffle(&mut standalone);
        task0.extend_from_slice(&standalone[..need]);
    }
    let in_task0: HashSet<ClassId> = task0.iter().copied().collect();
    let mut rest: Vec<ClassId> = hierarchy
        .class_ids()
        .filter(|c| !in_task0.contains(c))
        .collect();
    Xorshift64Star::derived(seed, "tasks", 0).shuffle(&mut rest);

    let mut tasks = vec![task0];
    for chunk in rest.chunks(k) {
        tasks.push(chunk.to_vec());
    }
    repair_precedence(&mut tasks, hierarchy)?;
    Ok(TaskConfiguration { tasks, seed })
}

/// Swap-based repair: any subclass at or before its parent's task is
/// swapped with a later class that may legally move up. Moving a
/// superclass earlier never creates a new violation, so each pass makes
/// progress.
fn repair_precedence(
    tasks: &mut [Vec<ClassId>],
    hierarchy: &Hierarchy,
) -> Result<(), StreamError> {
    let mut task_of: HashMap<ClassId, usize> = HashMap::new();
    for (t, classes) in tasks.iter().enumerate() {
        for &c in classes {
            task_of.insert(c, t);
        }
    }
    let violated = |task_of: &HashMap<ClassId, usize>, c: ClassId, t: usize| -> bool {
        hierarchy.parent(c).is_some_and(|p| task_of[&p] >= t)
    };
    for _pass in 0..task_of.len() + 1 {
        let mut changed = false;
        for t in 1..tasks.len() {
            for i in 0..tasks[t].len() {
                let c = tasks[t][i];
                if !violated(&task_of, c, t) {
                    continue;
                }
                let parent = hierarchy.parent(c).unwrap();
                let parent_task = task_of[&parent];
                let mut swapped = false;
                'search: for t2 in (parent_task + 1).max(t + 1)..tasks.len() {
                    for j in 0..tasks[t2].len() {
                        let d = tasks[t2][j];
                        if !violated(&task_of, d, t) {
                            tasks[t][i] = d;
                            tasks[t2][j] = c;
                            task_of.insert(d, t);
                            task_of.insert(c, t2);
                            swapped = true;
                            changed = true;
                            break 'search;
                        }
                    }
                }
                if !swapped && parent_task > t {
                    // no later slot for the child: pull the parent up
                    // instead, which can only relieve its other children
                    let j = tasks[parent_task].iter().position(|&d| d == parent).unwrap();
                    tasks[t][i] = parent;
                    tasks[parent_task][j] = c;
                    task_of.insert(parent, t);
                    task_of.insert(c, parent_task);
                    swapped = true;
                    changed = true;
                }
                if !swapped {
                    // parent shares task t: move it to an earlier task in
                    // exchange for a class that stays legal when deferred
                    let j = tasks[t].iter().position(|&d| d == parent).unwrap();
                    'earlier: for t2 in 0..t {
                        for m in 0..tasks[t2].len() {
                            let d = tasks[t2][m];
                            let safe = if hierarchy.is_superclass(d) {
                                hierarchy.children(d).iter().all(|ch| task_of[ch] > t)
                            } else {
                                !violated(&task_of, d, t)
                            };
                            if safe {
                                tasks[t][j] = d;
                                tasks[t2][m] = parent;
                                task_of.insert(d, t);
                                task_of.insert(parent, t2);
                                swapped = true;
                                changed = true;
                                break 'earlier;
                            }
                        }
                    }
                }
                if !swapped {
                    return Err(StreamError::InfeasibleConfig(format!(
                        "cannot place `{}` after its superclass",
                        hierarchy.name(c)
                    )));
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
    Err(StreamError::InfeasibleConfig("repair did not converge".into()))
}

/// Training view of one task: each item serves exactly the label that
/// belongs to the current task.
pub struct IncompleteView<'a, F> {
    store: &'a LabeledStore<F>,
    items: Vec<usize>,
    task_classes: HashSet<ClassId>,
}

impl<'a, F: Float> IncompleteView<'a, F> {
    pub fn new(store: &'a LabeledStore<F>, config: &TaskConfiguration, task: usize) -> Self {
        let mut items = Vec::new();
        for &class in &config.tasks[task] {
            items.extend_from_slice(store.class_list(class));
        }
        Self {
            store,
            items,
            task_classes: config.tasks[task].iter().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The served item: features plus the single label belonging to the
    /// current task. An intersection of any other size is an engine defect.
    pub fn item(&self, index: usize) -> Result<(u64, &'a [F], ClassId), StreamError> {
        let &pos = self.items.get(index).ok_or(StreamError::OutOfRange)?;
        let sample = self.store.sample(pos);
        let mut served: Vec<ClassId> = sample
            .labels
            .iter()
            .copied()
            .filter(|l| self.task_classes.contains(l))
            .collect();
        assert_eq!(
            served.len(),
            1,
            "task label intersection must be a single label"
        );
        Ok((sample.id, &sample.features, served.pop().unwrap()))
    }
}

/// Evaluation view over every class observed up to a task cursor: each
/// sample appears exactly once with all its observed labels.
pub struct CompleteView<'a, F> {
    store: &'a LabeledStore<F>,
    observed: Vec<ClassId>,
    observed_set: HashSet<ClassId>,
}

impl<'a, F: Float> CompleteView<'a, F> {
    pub fn new(store: &'a LabeledStore<F>, config: &TaskConfiguration, after_task: usize) -> Self {
        let observed = config.observed_after(after_task);
        let observed_set = observed.iter().copied().collect();
        Self {
            store,
            observed,
            observed_set,
        }
    }

    pub fn observed(&self) -> &[ClassId] {
        &self.observed
    }

    fn dedup_items(&self, classes: &[ClassId]) -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for &class in classes {
            for &pos in self.store.class_list(class) {
                if seen.insert(pos) {
                    items.push(pos);
                }
            }
        }
        items
    }

    fn labeled(&self, pos: usize) -> (u64, &'a [F], Vec<ClassId>) {
        let sample = self.store.sample(pos);
        let labels = sample
            .labels
            .iter()
            .copied()
            .filter(|l| self.observed_set.contains(l))
            .collect();
        (sample.id, &sample.features, labels)
    }

    /// All samples of all observed classes, each exactly once.
    pub fn items(&self) -> Vec<(u64, &'a [F], Vec<ClassId>)> {
        self.dedup_items(&self.observed)
            .into_iter()
            .map(|pos| self.labeled(pos))
            .collect()
    }

    /// The samples of one task's classes (for per-task evaluation),
    /// labeled with the full observed set.
    pub fn task_items(&self, config: &TaskConfiguration, task: usize) -> Vec<(u64, &'a [F], Vec<ClassId>)> {
        self.dedup_items(&config.tasks[task])
            .into_iter()
            .map(|pos| self.labeled(pos))
            .collect()
    }
}
