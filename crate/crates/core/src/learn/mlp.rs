use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::loss::sigmoid;
use crate::nn::{Linear, Params, LEAKY_SLOPE};

/// Two-layer classifier head: `sigmoid(out(lrelu(hidden(f))))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub hidden: Linear,
    pub out: Linear,
}

pub struct MlpCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    pub logit: f64,
}

impl MlpHead {
    pub const DEFAULT_HIDDEN: usize = 128;

    pub fn init<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        MlpHead {
            hidden: Linear::init(inputs, hidden, 2.0, rng),
            out: Linear::init(hidden, 1, 1.0, rng),
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        MlpHead {
            hidden: Linear::zeros(inputs, hidden),
            out: Linear::zeros(hidden, 1),
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs
    }

    pub fn forward_cached(&self, f: &[f64]) -> Result<MlpCache> {
        if f.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                got: f.len(),
            });
        }
        let pre = self.hidden.forward(f);
        let act: Vec<f64> = pre.iter().map(|&v| if v < 0.0 { LEAKY_SLOPE * v } else { v }).collect();
        let logit = self.out.forward(&act)[0];
        Ok(MlpCache {
            input: f.to_vec(),
            pre,
            act,
            logit,
        })
    }

    pub fn logit(&self, f: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(f)?.logit)
    }

    /// Probability in (0, 1).
    pub fn forward(&self, f: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(f)?))
    }

    /// Accumulates gradients for `dL/dlogit` and returns `dL/df`.
    pub fn backward(&self, cache: &MlpCache, dlogit: f64, grads: &mut MlpHead) -> Vec<f64> {
        let mut dact = self.out.backward(&cache.act, &[dlogit], &mut grads.out);
        for (d, &p) in dact.iter_mut().zip(&cache.pre) {
            if p < 0.0 {
                *d *= LEAKY_SLOPE;
            }
        }
        self.hidden.backward(&cache.input, &dact, &mut grads.hidden)
    }
}

impl Params for MlpHead {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.hidden.params();
        p.extend(self.out.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.hidden.params_mut();
        p.extend(self.out.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_output_layer_is_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut head = MlpHead::init(512, 128, &mut rng);
        head.out = Linear::zeros(128, 1);
        let f: Vec<f64> = (0..512).map(|i| (i as f64).sin()).collect();
        assert_eq!(head.forward(&f).unwrap(), 0.5);
        assert!(matches!(
            head.forward(&f[..511]),
            Err(Error::DimensionMismatch {
                expected: 512,
                got: 511
            })
        ));
    }
}
