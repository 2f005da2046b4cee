//! Minimal deterministic differentiable core: dense ReLU trunk, a standard
//! sigmoid head or a cosine-normalized head with a learnable peakiness
//! scalar, exact reverse-mode gradients, and the losses the learners
//! combine (binary cross entropy, feature-space distillation, margin
//! ranking over cosine scores).

pub mod checkpoint;
pub mod optim;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Xorshift64Star;

/// Guard inside norm divisions.
const EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input dimension {got} does not match architecture ({want})")]
    DimensionMismatch { got: usize, want: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    Standard,
    CosineNorm,
}

/// Shape of a model: input width, hidden ReLU widths, head variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: HeadKind,
}

impl Architecture {
    pub fn feature_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }
}

/// Row-major dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Float> Dense<F> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![F::zero(); rows * cols],
            b: vec![F::zero(); rows],
        }
    }

    fn matvec(&self, x: &[F]) -> Vec<F> {
        (0..self.rows)
            .map(|r| {
                let row = &self.w[r * self.cols..(r + 1) * self.cols];
                row.iter()
                    .zip(x)
                    .fold(self.b[r], |acc, (&w, &xi)| acc + w * xi)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head<F> {
    Standard(Dense<F>),
    /// Per-class rows of `w` are unit-normalized at forward time;
    /// `eta` scales the cosine score before the sigmoid.
    CosineNorm { w: Dense<F>, eta: F },
}

/// Fixed-topology MLP. Parameters are owned; forward passes are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub arch: Architecture,
    pub layers: Vec<Dense<F>>,
    pub head: Head<F>,
    seed: u64,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    pub input: Vec<F>,
    /// Post-ReLU activation of each trunk layer.
    pub activations: Vec<Vec<F>>,
    /// Final feature vector (last activation, or the input itself).
    pub features: Vec<F>,
    /// Pre-sigmoid score per class.
    pub scores: Vec<F>,
    /// Raw cosine per class (CosineNorm head only).
    pub cosines: Vec<F>,
}

impl<F: Float> ForwardTrace<F> {
    pub fn probabilities(&self) -> Vec<F> {
        self.scores.iter().map(|&z| sigmoid(z)).collect()
    }
}

pub fn sigmoid<F: Float>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

fn eps<F: Float>() -> F {
    F::from(EPS).unwrap()
}

fn norm<F: Float>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

impl<F: Float> Mlp<F> {
    /// Build a model with zero head classes. Trunk layer `l` draws its
    /// weights from `hash64(seed, "init", l)` as N(0, 2/fan_in) in
    /// row-major order; biases start at zero. Head rows are added via
    /// [`Mlp::expand_head`].
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = arch.input_dim;
        for (l, &width) in arch.hidden.iter().enumerate() {
            let mut rng = Xorshift64Star::derived(seed, "init", l as u64);
            let scale = (2.0 / fan_in as f64).sqrt();
            let mut layer = Dense::zeros(width, fan_in);
            for w in layer.w.iter_mut() {
                *w = F::from(rng.next_gaussian() * scale).unwrap();
            }
            layers.push(layer);
            fan_in = width;
        }
        let head = match arch.head {
            HeadKind::Standard => Head::Standard(Dense::zeros(0, fan_in)),
            HeadKind::CosineNorm => Head::CosineNorm {
                w: Dense::zeros(0, fan_in),
                eta: F::from(10.0).unwrap(),
            },
        };
        Self {
            arch,
            layers,
            head,
            seed,
        }
    }

    /// Alias of [`Mlp::new`]; used when rebuilding from a checkpoint.
    pub fn with_seed(arch: Architecture, seed: u64) -> Self {
        Self::new(arch, seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn class_count(&self) -> usize {
        match &self.head {
            Head::Standard(d) => d.rows,
            Head::CosineNorm { w, .. } => w.rows,
        }
    }

    /// Grow the head to `new_class_count` rows. Standard heads append
    /// zero rows; cosine heads append small random rows drawn from
    /// `hash64(seed, "expand", row)`. Existing rows are untouched.
    pub fn expand_head(&mut self, new_class_count: usize) {
        let feature_dim = self.arch.feature_dim();
        let old = self.class_count();
        assert!(new_class_count >= old, "head never shrinks");
        match &mut self.head {
            Head::Standard(d) => {
                d.w.resize(new_class_count * feature_dim, F::zero());
                d.b.resize(new_class_count, F::zero());
                d.rows = new_class_count;
            }
            Head::CosineNorm { w, .. } => {
                for row in old..new_class_count {
                    let mut rng = Xorshift64Star::derived(self.seed, "expand", row as u64);
                    for _ in 0..feature_dim {
                        w.w.push(F::from(rng.next_gaussian() * 0.1).unwrap());
                    }
                }
                w.b.resize(new_class_count, F::zero());
                w.rows = new_class_count;
            }
        }
    }

    pub fn forward(&self, x: &[F]) -> Result<ForwardTrace<F>, NnError> {
        if x.len() != self.arch.input_dim {
            return Err(NnError::DimensionMismatch {
                got: x.len(),
                want: self.arch.input_dim,
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.matvec(&current);
            for v in z.iter_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
            activations.push(z.clone());
            current = z;
        }
        let features = current;
        let (scores, cosines) = match &self.head {
            Head::Standard(d) => (d.matvec(&features), Vec::new()),
            Head::CosineNorm { w, eta } => {
                let f_norm = norm(&features) + eps();
                let mut scores = Vec::with_capacity(w.rows);
                let mut cosines = Vec::with_capacity(w.rows);
                for r in 0..w.rows {
                    let row = &w.w[r * w.cols..(r + 1) * w.cols];
                    let w_norm = norm(row) + eps();
                    let dot = row
                        .iter()
                        .zip(&features)
                        .fold(F::zero(), |acc, (&wi, &fi)| acc + wi * fi);
                    let cos = dot / (f_norm * w_norm);
                    cosines.push(cos);
                    scores.push(*eta * cos);
                }
                (scores, cosines)
            }
        };
        Ok(ForwardTrace {
            input: x.to_vec(),
            activations,
            features,
            scores,
            cosines,
        })
    }

    /// Labels with probability strictly above 0.5 (a probability of
    /// exactly 0.5 is not predicted).
    pub fn predict(&self, x: &[F]) -> Result<Vec<usize>, NnError> {
        let trace = self.forward(x)?;
        let half = F::from(0.5).unwrap();
        Ok(trace
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > half)
            .map(|(i, _)| i)
            .collect())
    }

    /// Reverse-mode gradients for one sample.
    ///
    /// `d_scores[i]` is dL/d(score_i), `d_cosines[i]` is dL/d(cos_i) for
    /// losses acting on the raw cosine (empty if unused), and
    /// `d_features_extra` is dL/d(features) from feature-space losses
    /// (empty if unused). Accumulates into `grads`.
    pub fn backward(
        &self,
        trace: &ForwardTrace<F>,
        d_scores: &[F],
        d_cosines: &[F],
        d_features_extra: &[F],
        grads: &mut Grads<F>,
    ) {
        let features = &trace.features;
        let mut d_features = if d_features_extra.is_empty() {
            vec![F::zero(); features.len()]
        } else {
            d_features_extra.to_vec()
        };
        match (&self.head, &mut grads.head) {
            (Head::Standard(d), HeadGrads::Standard(g)) => {
                debug_assert!(d_cosines.is_empty());
                for (r, &dz) in d_scores.iter().enumerate().take(d.rows) {
                    if dz == F::zero() {
                        continue;
                    }
                    let row = &d.w[r * d.cols..(r + 1) * d.cols];
                    let grow = &mut g.w[r * d.cols..(r + 1) * d.cols];
                    for c in 0..d.cols {
                        grow[c] = grow[c] + dz * features[c];
                        d_features[c] = d_features[c] + dz * row[c];
                    }
                    g.b[r] = g.b[r] + dz;
                }
            }
            (Head::CosineNorm { w, eta }, HeadGrads::CosineNorm { w: gw, eta: geta }) => {
                let f_norm = norm(features) + eps();
                let unit_f: Vec<F> = features.iter().map(|&v| v / f_norm).collect();
                for r in 0..w.rows {
                    let cos = trace.cosines[r];
                    // total sensitivity to the cosine: through eta*cos and
                    // any loss acting on the cosine directly
                    let mut dcos = if d_cosines.is_empty() {
                        F::zero()
                    } else {
                        d_cosines[r]
                    };
                    let dz = d_scores[r];
                    if dz != F::zero() {
                        *geta = *geta + dz * cos;
                        dcos = dcos + dz * *eta;
                    }
                    if dcos == F::zero() {
                        continue;
                    }
                    let row = &w.w[r * w.cols..(r + 1) * w.cols];
                    let w_norm = norm(row) + eps();
                    let grow = &mut gw.w[r * w.cols..(r + 1) * w.cols];
                    for c in 0..w.cols {
                        let unit_w = row[c] / w_norm;
                        grow[c] = grow[c] + dcos * (unit_f[c] - cos * unit_w) / w_norm;
                        d_features[c] =
                            d_features[c] + dcos * (row[c] / w_norm - cos * unit_f[c]) / f_norm;
                    }
                }
            }
            _ => unreachable!("grads shape matches model head"),
        }
        // trunk
        let mut delta = d_features;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let act = &trace.activations[l];
            for (d, &a) in delta.iter_mut().zip(act) {
                if a == F::zero() {
                    *d = F::zero();
                }
            }
            let prev: &[F] = if l == 0 {
                &trace.input
            } else {
                &trace.activations[l - 1]
            };
            let g = &mut grads.layers[l];
            let mut d_prev = vec![F::zero(); layer.cols];
            for (r, &dz) in delta.iter().enumerate().take(layer.rows) {
                if dz == F::zero() {
                    continue;
                }
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                let grow = &mut g.w[r * layer.cols..(r + 1) * layer.cols];
                for c in 0..layer.cols {
                    grow[c] = grow[c] + dz * prev[c];
                    d_prev[c] = d_prev[c] + dz * row[c];
                }
                g.b[r] = g.b[r] + dz;
            }
            delta = d_prev;
        }
    }

    /// Flat parameter vector: trunk layers in order (`w` then `b`),
    /// then the head (`w`, `b`, and `eta` for cosine heads).
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        match &self.head {
            Head::Standard(d) => {
                out.extend_from_slice(&d.w);
                out.extend_from_slice(&d.b);
            }
            Head::CosineNorm { w, eta } => {
                out.extend_from_slice(&w.w);
                out.extend_from_slice(&w.b);
                out.push(*eta);
            }
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[F]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("flat length");
            }
        }
        match &mut self.head {
            Head::Standard(d) => {
                for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                    *v = it.next().expect("flat length");
                }
            }
            Head::CosineNorm { w, eta } => {
                for v in w.w.iter_mut().chain(w.b.iter_mut()) {
                    *v = it.next().expect("flat length");
                }
                *eta = it.next().expect("flat length");
            }
        }
        assert!(it.next().is_none(), "flat length");
    }

    pub fn param_count(&self) -> usize {
        self.flatten().len()
    }

    pub fn zero_grads(&self) -> Grads<F> {
        let layers = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.rows, l.cols))
            .collect();
        let head = match &self.head {
            Head::Standard(d) => HeadGrads::Standard(Dense::zeros(d.rows, d.cols)),
            Head::CosineNorm { w, .. } => HeadGrads::CosineNorm {
                w: Dense::zeros(w.rows, w.cols),
                eta: F::zero(),
            },
        };
        Grads { layers, head }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadGrads<F> {
    Standard(Dense<F>),
    CosineNorm { w: Dense<F>, eta: F },
}

/// Parameter gradients (or any parameter-shaped buffer, e.g. momentum).
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<F> {
    pub layers: Vec<Dense<F>>,
    pub head: HeadGrads<F>,
}

impl<F: Float> Grads<F> {
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        match &self.head {
            HeadGrads::Standard(d) => {
                out.extend_from_slice(&d.w);
                out.extend_from_slice(&d.b);
            }
            HeadGrads::CosineNorm { w, eta } => {
                out.extend_from_slice(&w.w);
                out.extend_from_slice(&w.b);
                out.push(*eta);
            }
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[F]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("flat length");
            }
        }
        match &mut self.head {
            HeadGrads::Standard(d) => {
                for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                    *v = it.next().expect("flat length");
                }
            }
            HeadGrads::CosineNorm { w, eta } => {
                for v in w.w.iter_mut().chain(w.b.iter_mut()) {
                    *v = it.next().expect("flat length");
                }
                *eta = it.next().expect("flat length");
            }
        }
        assert!(it.next().is_none(), "flat length");
    }

    pub fn scale(&mut self, factor: F) {
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *v * factor;
            }
        }
        match &mut self.head {
            HeadGrads::Standard(d) => {
                for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                    *v = *v * factor;
                }
            }
            HeadGrads::CosineNorm { w, eta } => {
                for v in w.w.iter_mut().chain(w.b.iter_mut()) {
                    *v = *v * factor;
                }
                *eta = *eta * factor;
            }
        }
    }
}

/// Binary cross entropy over per-class scores, averaged by
/// `class_divisor` (the observed-class count). Returns the loss and
/// dL/d(score). Computed in the numerically stable logit form
/// `max(z,0) - z t + ln(1 + exp(-|z|))`.
pub fn bce_loss<F: Float>(scores: &[F], targets: &[F], class_divisor: usize) -> (F, Vec<F>) {
    assert_eq!(scores.len(), targets.len());
    let div = F::from(class_divisor as f64).unwrap();
    let mut loss = F::zero();
    let mut d_scores = Vec::with_capacity(scores.len());
    for (&z, &t) in scores.iter().zip(targets) {
        let zmax = if z > F::zero() { z } else { F::zero() };
        loss = loss + zmax - z * t + (F::one() + (-z.abs()).exp()).ln();
        d_scores.push((sigmoid(z) - t) / div);
    }
    (loss / div, d_scores)
}

/// Feature-space distillation: `1 - cos(f, g)` against a frozen feature
/// vector `g`. Returns the loss and dL/df.
pub fn cosine_distillation_loss<F: Float>(f: &[F], g: &[F]) -> (F, Vec<F>) {
    let nf = norm(f) + eps();
    let ng = norm(g) + eps();
    let dot = f
        .iter()
        .zip(g)
        .fold(F::zero(), |acc, (&a, &b)| acc + a * b);
    let cos = dot / (nf * ng);
    let d_f = f
        .iter()
        .zip(g)
        .map(|(&fi, &gi)| -(gi / (nf * ng) - cos * fi / (nf * nf)))
        .collect();
    (F::one() - cos, d_f)
}

/// Margin ranking over cosine scores: for a true old class `truth`, the
/// `hard_negatives` highest-scoring classes among `candidates` must trail
/// the true score by at least `margin`. Returns the loss and dL/d(cosine)
/// per class.
pub fn margin_ranking_loss<F: Float>(
    cosines: &[F],
    truth: usize,
    candidates: &[usize],
    hard_negatives: usize,
    margin: F,
) -> (F, Vec<F>) {
    let mut d_cos = vec![F::zero(); cosines.len()];
    let mut ranked: Vec<usize> = candidates.to_vec();
    ranked.sort_by(|&a, &b| cosines[b].partial_cmp(&cosines[a]).unwrap());
    ranked.truncate(hard_negatives);
    let mut loss = F::zero();
    for &k in &ranked {
        let hinge = margin - cosines[truth] + cosines[k];
        if hinge > F::zero() {
            loss = loss + hinge;
            d_cos[truth] = d_cos[truth] - F::one();
            d_cos[k] = d_cos[k] + F::one();
        }
    }
    (loss, d_cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_arch() -> Architecture {
        Architecture {
            input_dim: 3,
            hidden: vec![4],
            head: HeadKind::Standard,
        }
    }

    #[test]
    fn identity_standard_head_passes_input_through() {
        let arch = Architecture {
            input_dim: 3,
            hidden: vec![],
            head: HeadKind::Standard,
        };
        let mut m: Mlp<f64> = Mlp::new(arch, 0);
        m.expand_head(3);
        if let Head::Standard(d) = &mut m.head {
            for i in 0..3 {
                d.w[i * 3 + i] = 1.0;
            }
        }
        let trace = m.forward(&[0.3, -0.7, 2.0]).unwrap();
        assert_eq!(trace.scores, vec![0.3, -0.7, 2.0]);
    }

    #[test]
    fn cosine_head_matches_hand_values() {
        let arch = Architecture {
            input_dim: 2,
            hidden: vec![],
            head: HeadKind::CosineNorm,
        };
        let mut m: Mlp<f64> = Mlp::new(arch, 0);
        m.expand_head(2);
        if let Head::CosineNorm { w, eta } = &mut m.head {
            // class 0 parallel to the input, class 1 orthogonal
            w.w.copy_from_slice(&[3.0, 0.0, 0.0, 5.0]);
            *eta = 2.0;
        }
        let probs = m.forward(&[0.4, 0.0]).unwrap().probabilities();
        assert!((probs[0] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-9);
        assert!((probs[0] - 0.8808).abs() < 1e-4);
        assert!((probs[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn cosine_score_invariant_to_positive_scaling() {
        let arch = Architecture {
            input_dim: 4,
            hidden: vec![],
            head: HeadKind::CosineNorm,
        };
        let mut m: Mlp<f64> = Mlp::new(arch, 3);
        m.expand_head(3);
        let x = [0.5, -1.0, 2.0, 0.25];
        let base = m.forward(&x).unwrap().scores;
        let scaled_x: Vec<f64> = x.iter().map(|v| v * 7.5).collect();
        let scaled = m.forward(&scaled_x).unwrap().scores;
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9);
        }
        if let Head::CosineNorm { w, .. } = &mut m.head {
            for v in w.w.iter_mut() {
                *v *= 3.0;
            }
        }
        let scaled_w = m.forward(&x).unwrap().scores;
        for (a, b) in base.iter().zip(&scaled_w) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bce_hand_value() {
        // two classes at probability 0.5 with targets (1, 0): loss = ln 2
        let (loss, _) = bce_loss(&[0.0f64, 0.0], &[1.0, 0.0], 2);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // confident correct prediction drives the loss toward zero
        let (loss, _) = bce_loss(&[30.0f64, -30.0], &[1.0, 0.0], 2);
        assert!(loss < 1e-10);
    }

    #[test]
    fn expand_head_keeps_old_predictions() {
        let mut m: Mlp<f64> = Mlp::new(standard_arch(), 5);
        m.expand_head(2);
        let x = [0.1, 0.2, -0.3];
        let before = m.forward(&x).unwrap().scores;
        let mut grown = m.clone();
        grown.expand_head(5);
        let after = grown.forward(&x).unwrap().scores;
        assert_eq!(before[..], after[..2]);

        let arch = Architecture {
            head: HeadKind::CosineNorm,
            ..standard_arch()
        };
        let mut m: Mlp<f64> = Mlp::new(arch, 5);
        m.expand_head(2);
        let before = m.forward(&x).unwrap().scores;
        let mut grown = m.clone();
        grown.expand_head(5);
        let after = grown.forward(&x).unwrap().scores;
        assert_eq!(before[..], after[..2]);
    }

    #[test]
    fn predict_uses_strict_threshold() {
        let arch = Architecture {
            input_dim: 2,
            hidden: vec![],
            head: HeadKind::Standard,
        };
        let mut m: Mlp<f64> = Mlp::new(arch, 0);
        m.expand_head(3);
        if let Head::Standard(d) = &mut m.head {
            d.b.copy_from_slice(&[1.0, 0.0, -1.0]);
        }
        // probability exactly 0.5 (score 0) is excluded
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), vec![0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m: Mlp<f64> = Mlp::new(standard_arch(), 0);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(NnError::DimensionMismatch { got: 1, want: 3 })
        ));
    }

    #[test]
    fn margin_loss_hand_example() {
        // true score 0.9; negatives (0.8, 0.6, 0.1); K=2, margin 0.5:
        // hinges (0.5-0.1) + (0.5-0.3) = 0.6
        let cos = [0.9f64, 0.8, 0.6, 0.1];
        let (loss, d) = margin_ranking_loss(&cos, 0, &[1, 2, 3], 2, 0.5);
        assert!((loss - 0.6).abs() < 1e-12);
        assert_eq!(d[0], -2.0);
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 1.0);
        assert_eq!(d[3], 0.0);
        // inactive hinge: separation at least the margin
        let cos = [0.9f64, 0.2];
        let (loss, d) = margin_ranking_loss(&cos, 0, &[1], 1, 0.5);
        assert_eq!(loss, 0.0);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distillation_zero_when_features_match() {
        let f = [1.0f64, -2.0, 0.5];
        let (loss, _) = cosine_distillation_loss(&f, &f);
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn flatten_assign_round_trip() {
        let mut m: Mlp<f64> = Mlp::new(standard_arch(), 9);
        m.expand_head(4);
        let flat = m.flatten();
        let mut m2 = m.clone();
        let perturbed: Vec<f64> = flat.iter().map(|v| v + 0.125).collect();
        m2.assign_flat(&perturbed);
        assert_eq!(m2.flatten(), perturbed);
        m2.assign_flat(&flat);
        assert_eq!(m2, m);
    }
}
