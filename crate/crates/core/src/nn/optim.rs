use crate::nn::Params;

/// Adam with bias correction; `weight_decay > 0` gives the decoupled
/// (AdamW) variant.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) {
        self.step_with_lr(params, grads, self.lr);
    }

    pub fn step_with_lr<P: Params>(&mut self, params: &mut P, grads: &P, lr: f64) {
        let g = grads.params();
        let mut p = params.params_mut();
        if self.m.is_empty() {
            self.m = g.iter().map(|s| vec![0.0; s.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (slot, (ps, gs)) in p.iter_mut().zip(&g).enumerate() {
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            for i in 0..gs.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gs[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gs[i] * gs[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                ps[i] -= lr * (update + self.weight_decay * ps[i]);
            }
        }
    }
}

/// Stochastic gradient descent with heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd {
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P, lr: f64) {
        let g = grads.params();
        if self.velocity.is_empty() {
            self.velocity = g.iter().map(|s| vec![0.0; s.len()]).collect();
        }
        for (slot, (ps, gs)) in params.params_mut().into_iter().zip(&g).enumerate() {
            let vel = &mut self.velocity[slot];
            for i in 0..gs.len() {
                vel[i] = self.momentum * vel[i] + gs[i];
                ps[i] -= lr * vel[i];
            }
        }
    }
}

/// Linear warm-up followed by reduce-on-plateau.
///
/// The step at epoch `e < warmup` is `base * (e + 1) / warmup`. After warm-up,
/// every `patience` consecutive epochs without a new best loss multiply the
/// step by `factor`.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: usize,
    pub patience: usize,
    pub factor: f64,
    scale: f64,
    best: f64,
    bad_epochs: usize,
}

impl LrSchedule {
    pub fn new(base: f64, warmup: usize, patience: usize, factor: f64) -> Self {
        LrSchedule {
            base,
            warmup,
            patience,
            factor,
            scale: 1.0,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let ramp = if epoch < self.warmup {
            (epoch + 1) as f64 / self.warmup as f64
        } else {
            1.0
        };
        self.base * self.scale * ramp
    }

    /// Records the loss of `epoch`; returns true when the step was reduced.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        if epoch < self.warmup {
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.scale *= self.factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}
