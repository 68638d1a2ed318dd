use rand::Rng;

use crate::nn::{Linear, Params, Tensor4, LEAKY_SLOPE};

/// Logistic gate kept strictly inside (0, 1): past |z| = 36 the f64 result
/// would round to exactly 0 or 1 and switch a channel off for good.
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-36.0, 36.0)).exp())
}

/// Squeeze-and-excitation gate: global average pool, bottleneck MLP with a
/// leaky ReLU, sigmoid, channelwise rescale.
#[derive(Debug, Clone, PartialEq)]
pub struct SeModule {
    pub squeeze: Linear,
    pub excite: Linear,
}

pub struct SeCache {
    pooled: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    gates: Vec<f64>,
}

impl SeModule {
    /// Bottleneck width `max(1, channels / reduction)`.
    pub fn bottleneck(channels: usize, reduction: usize) -> usize {
        (channels / reduction.max(1)).max(1)
    }

    pub fn zeros(channels: usize, reduction: usize) -> Self {
        let hidden = Self::bottleneck(channels, reduction);
        SeModule {
            squeeze: Linear::zeros(channels, hidden),
            excite: Linear::zeros(hidden, channels),
        }
    }

    pub fn init<R: Rng>(channels: usize, reduction: usize, rng: &mut R) -> Self {
        let hidden = Self::bottleneck(channels, reduction);
        SeModule {
            squeeze: Linear::init(channels, hidden, 2.0, rng),
            excite: Linear::init(hidden, channels, 1.0, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.squeeze.inputs
    }

    pub fn gates(&self, x: &Tensor4) -> Vec<f64> {
        self.forward_cached(x).1.gates
    }

    pub fn forward(&self, x: &Tensor4) -> Tensor4 {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Tensor4) -> (Tensor4, SeCache) {
        let n = x.spatial() as f64;
        let pooled: Vec<f64> = (0..x.channels).map(|c| x.channel(c).iter().sum::<f64>() / n).collect();
        let hidden_pre = self.squeeze.forward(&pooled);
        let hidden: Vec<f64> = hidden_pre
            .iter()
            .map(|&h| if h < 0.0 { LEAKY_SLOPE * h } else { h })
            .collect();
        let gates: Vec<f64> = self.excite.forward(&hidden).into_iter().map(sigmoid).collect();
        let mut y = x.clone();
        for (c, g) in gates.iter().enumerate() {
            for v in y.channel_mut(c) {
                *v *= g;
            }
        }
        (
            y,
            SeCache {
                pooled,
                hidden_pre,
                hidden,
                gates,
            },
        )
    }

    pub fn backward(&self, x: &Tensor4, cache: &SeCache, dy: &Tensor4, grads: &mut SeModule) -> Tensor4 {
        let n = x.spatial() as f64;
        let mut dx = dy.clone();
        let mut dgate = vec![0.0; x.channels];
        for (c, d) in dgate.iter_mut().enumerate() {
            let g = cache.gates[c];
            *d = dy.channel(c).iter().zip(x.channel(c)).map(|(a, b)| a * b).sum();
            for v in dx.channel_mut(c) {
                *v *= g;
            }
        }
        let dz: Vec<f64> = dgate.iter().zip(&cache.gates).map(|(d, g)| d * g * (1.0 - g)).collect();
        let mut dh = self.excite.backward(&cache.hidden, &dz, &mut grads.excite);
        for (d, &h) in dh.iter_mut().zip(&cache.hidden_pre) {
            if h < 0.0 {
                *d *= LEAKY_SLOPE;
            }
        }
        let dpool = self.squeeze.backward(&cache.pooled, &dh, &mut grads.squeeze);
        for (c, dp) in dpool.iter().enumerate() {
            let add = dp / n;
            for v in dx.channel_mut(c) {
                *v += add;
            }
        }
        dx
    }
}

impl Params for SeModule {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.squeeze.params();
        p.extend(self.excite.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.squeeze.params_mut();
        p.extend(self.excite.params_mut());
        p
    }
}
