//! Fixed-budget per-class replay buffer. Stored label sets are the labels
//! as served at insertion time and are never retroactively updated.

use std::collections::BTreeMap;

use crate::hierarchy::ClassId;
use crate::rng::Xorshift64Star;
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct BufferEntry {
    pub sample_id: u64,
    pub features: Vec<Scalar>,
    /// Labels as served when the sample was inserted.
    pub labels: Vec<ClassId>,
}

/// How exemplars are chosen when a class exceeds the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Random,
    Herding,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    /// None means unbounded (ER-infinite).
    budget: Option<usize>,
    classes: BTreeMap<ClassId, Vec<BufferEntry>>,
}

impl ReplayBuffer {
    pub fn new(budget: Option<usize>) -> Self {
        Self {
            budget,
            classes: BTreeMap::new(),
        }
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_len(&self, class: ClassId) -> usize {
        self.classes.get(&class).map_or(0, Vec::len)
    }

    /// All entries in deterministic order (classes by index, entries in
    /// insertion order).
    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.classes.values().flatten()
    }

    /// Insert the exemplars for one newly introduced class. Each class is
    /// inserted exactly once, right after the task that introduced it.
    pub fn insert_class(&mut self, class: ClassId, entries: Vec<BufferEntry>) {
        if let Some(budget) = self.budget {
            assert!(entries.len() <= budget, "budget exceeded");
        }
        let prev = self.classes.insert(class, entries);
        assert!(prev.is_none(), "class inserted twice");
    }

    /// Uniform draw without replacement for the A-GEM reference batch;
    /// returns everything when the buffer is smaller than `batch`.
    pub fn draw(&self, batch: usize, rng: &mut Xorshift64Star) -> Vec<&BufferEntry> {
        let all: Vec<&BufferEntry> = self.entries().collect();
        if all.len() <= batch {
            return all;
        }
        let mut idx: Vec<usize> = (0..all.len()).collect();
        rng.shuffle(&mut idx);
        idx[..batch].iter().map(|&i| all[i]).collect()
    }
}

/// Pick `budget` exemplar indices whose running mean best tracks the class
/// mean: at each step greedily add the candidate minimizing
/// `|| mean - running_exemplar_mean ||`.
pub fn herding_select(candidate_features: &[Vec<Scalar>], budget: usize) -> Vec<usize> {
    let n = candidate_features.len();
    if n == 0 || budget == 0 {
        return Vec::new();
    }
    let dim = candidate_features[0].len();
    let mut mean = vec![0.0; dim];
    for f in candidate_features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut selected = Vec::new();
    let mut running_sum = vec![0.0; dim];
    let mut taken = vec![false; n];
    while selected.len() < budget.min(n) {
        let count = (selected.len() + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for (i, f) in candidate_features.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let dist: f64 = mean
                .iter()
                .zip(running_sum.iter().zip(f))
                .map(|(m, (s, v))| {
                    let d = m - (s + v) / count;
                    d * d
                })
                .sum();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        let (i, _) = best.unwrap();
        taken[i] = true;
        for (s, v) in running_sum.iter_mut().zip(&candidate_features[i]) {
            *s += v;
        }
        selected.push(i);
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn herding_picks_the_mean_first() {
        // mean of {(0,0),(2,0),(1,0)} is (1,0); budget 1 picks (1,0)
        let feats = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(herding_select(&feats, 1), vec![2]);
    }

    #[test]
    fn herding_brute_force_on_small_sets() {
        // budget 1: exhaustive check that the greedy pick minimizes the
        // distance to the class mean
        let feats = vec![
            vec![0.5, 1.0],
            vec![-1.0, 0.25],
            vec![0.0, 0.4],
            vec![2.0, -0.5],
        ];
        let mean: Vec<f64> = (0..2)
            .map(|d| feats.iter().map(|f| f[d]).sum::<f64>() / feats.len() as f64)
            .collect();
        let brute = (0..feats.len())
            .min_by(|&a, &b| {
                let da: f64 = mean.iter().zip(&feats[a]).map(|(m, v)| (m - v).powi(2)).sum();
                let db: f64 = mean.iter().zip(&feats[b]).map(|(m, v)| (m - v).powi(2)).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(herding_select(&feats, 1), vec![brute]);
    }

    #[test]
    fn budget_covers_whole_class_in_deterministic_order() {
        let feats = vec![vec![1.0], vec![5.0], vec![3.0]];
        let picked = herding_select(&feats, 10);
        assert_eq!(picked.len(), 3);
        let again = herding_select(&feats, 10);
        assert_eq!(picked, again);
    }

    #[test]
    fn budget_is_enforced() {
        let mut buf = ReplayBuffer::new(Some(2));
        buf.insert_class(
            ClassId(0),
            vec![
                BufferEntry {
                    sample_id: 0,
                    features: vec![0.0],
                    labels: vec![ClassId(0)],
                },
                BufferEntry {
                    sample_id: 1,
                    features: vec![1.0],
                    labels: vec![ClassId(0)],
                },
            ],
        );
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.class_len(ClassId(0)), 2);
    }

    #[test]
    #[should_panic(expected = "class inserted twice")]
    fn insertion_is_once_only() {
        let mut buf = ReplayBuffer::new(None);
        buf.insert_class(ClassId(0), vec![]);
        buf.insert_class(ClassId(0), vec![]);
    }

    #[test]
    fn draw_returns_all_when_small() {
        let mut buf = ReplayBuffer::new(None);
        buf.insert_class(
            ClassId(1),
            (0..5)
                .map(|i| BufferEntry {
                    sample_id: i,
                    features: vec![i as f64],
                    labels: vec![ClassId(1)],
                })
                .collect(),
        );
        let mut rng = Xorshift64Star::new(3);
        assert_eq!(buf.draw(128, &mut rng).len(), 5);
        assert_eq!(buf.draw(3, &mut rng).len(), 3);
    }
}
