//! SGD with momentum, coupled weight decay, and reduce-on-plateau
//! scheduling driven by the in-task validation metric.

use num_traits::Float;

use super::{Dense, Grads, Head, HeadGrads, Mlp};

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs without an improvement of at least `improvement_threshold`
    /// before the learning rate is divided by 10.
    pub patience: usize,
    pub improvement_threshold: f64,
    /// The learning rate never drops below `learning_rate / lr_floor_div`.
    pub lr_floor_div: f64,
}

impl SgdConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            momentum: 0.9,
            weight_decay: 1e-5,
            patience: 5,
            improvement_threshold: 1e-4,
            lr_floor_div: 1000.0,
        }
    }
}

/// Momentum buffers share the model's parameter shape so the head can
/// grow between tasks without invalidating existing state.
#[derive(Debug, Clone)]
pub struct Optimizer<F> {
    pub cfg: SgdConfig,
    lr: f64,
    velocity: Grads<F>,
    best_metric: Option<f64>,
    stale_epochs: usize,
}

impl<F: Float> Optimizer<F> {
    pub fn new(cfg: SgdConfig, model: &Mlp<F>) -> Self {
        Self {
            cfg,
            lr: cfg.learning_rate,
            velocity: model.zero_grads(),
            best_metric: None,
            stale_epochs: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Grow the velocity buffers to match a freshly expanded head; new
    /// entries start at zero.
    pub fn sync_shape(&mut self, model: &Mlp<F>) {
        match (&mut self.velocity.head, &model.head) {
            (HeadGrads::Standard(v), Head::Standard(d)) => grow_dense(v, d.rows),
            (HeadGrads::CosineNorm { w: v, .. }, Head::CosineNorm { w, .. }) => {
                grow_dense(v, w.rows)
            }
            _ => unreachable!("optimizer built for this model"),
        }
    }

    /// `v <- momentum*v + grad + weight_decay*param; param <- param - lr*v`
    pub fn step(&mut self, model: &mut Mlp<F>, grads: &Grads<F>) {
        let lr = F::from(self.lr).unwrap();
        let mu = F::from(self.cfg.momentum).unwrap();
        let wd = F::from(self.cfg.weight_decay).unwrap();
        let update = |p: &mut F, v: &mut F, g: F| {
            *v = mu * *v + g + wd * *p;
            *p = *p - lr * *v;
        };
        for ((layer, vel), grad) in model
            .layers
            .iter_mut()
            .zip(&mut self.velocity.layers)
            .zip(&grads.layers)
        {
            for ((p, v), &g) in layer
                .w
                .iter_mut()
                .chain(layer.b.iter_mut())
                .zip(vel.w.iter_mut().chain(vel.b.iter_mut()))
                .zip(grad.w.iter().chain(grad.b.iter()))
            {
                update(p, v, g);
            }
        }
        match (&mut model.head, &mut self.velocity.head, &grads.head) {
            (Head::Standard(d), HeadGrads::Standard(v), HeadGrads::Standard(g)) => {
                for ((p, v), &g) in d
                    .w
                    .iter_mut()
                    .chain(d.b.iter_mut())
                    .zip(v.w.iter_mut().chain(v.b.iter_mut()))
                    .zip(g.w.iter().chain(g.b.iter()))
                {
                    update(p, v, g);
                }
            }
            (
                Head::CosineNorm { w, eta },
                HeadGrads::CosineNorm { w: vw, eta: veta },
                HeadGrads::CosineNorm { w: gw, eta: geta },
            ) => {
                for ((p, v), &g) in w
                    .w
                    .iter_mut()
                    .chain(w.b.iter_mut())
                    .zip(vw.w.iter_mut().chain(vw.b.iter_mut()))
                    .zip(gw.w.iter().chain(gw.b.iter()))
                {
                    update(p, v, g);
                }
                update(eta, veta, *geta);
            }
            _ => unreachable!("optimizer built for this model"),
        }
    }

    /// Feed the monitored epoch metric (higher is better). Returns true
    /// when the plateau rule fired and divided the learning rate by 10.
    pub fn observe_epoch_metric(&mut self, metric: f64) -> bool {
        let improved = match self.best_metric {
            None => true,
            Some(best) => metric >= best + self.cfg.improvement_threshold,
        };
        if improved {
            self.best_metric = Some(metric);
            self.stale_epochs = 0;
            return false;
        }
        self.stale_epochs += 1;
        if self.stale_epochs >= self.cfg.patience {
            self.stale_epochs = 0;
            let floor = self.cfg.learning_rate / self.cfg.lr_floor_div;
            if self.lr / 10.0 >= floor {
                self.lr /= 10.0;
                return true;
            }
        }
        false
    }

    /// Forget the plateau history at a task boundary; the learning rate
    /// resets to its initial value.
    pub fn reset_schedule(&mut self) {
        self.lr = self.cfg.learning_rate;
        self.best_metric = None;
        self.stale_epochs = 0;
    }
}

fn grow_dense<F: Float>(v: &mut Dense<F>, rows: usize) {
    v.w.resize(rows * v.cols, F::zero());
    v.b.resize(rows, F::zero());
    v.rows = rows;
}
