//! Hand-differentiated layers for 3-D convolutional networks.
//!
//! Every layer exposes `forward` for inference and a cached forward plus
//! `backward` for training. Gradients are accumulated into a value of the
//! layer's own type (see [`Params::zeros_like`]).

mod block;
mod layers;
mod optim;
pub mod persist;
mod se;
mod seresnet;
mod tensor;
mod train;

pub use block::{BlockCache, BlockSpec, ResidualBlock};
pub use layers::{
    leaky_relu, leaky_relu_backward, upsample_nearest_xy, upsample_nearest_xy_backward, Conv3d, InstanceNorm, Linear,
    NormCache, NormKind, LEAKY_SLOPE,
};
pub use optim::{Adam, LrSchedule, Sgd};
pub use se::{SeCache, SeModule};
pub use seresnet::{
    closed_form_trace, seresnet_forward, ForwardOutput, SeResNet, SeResNetCache, SeResNetConfig, StridePlan,
};
pub use tensor::Tensor4;
pub use train::{train_toy, ToyReport, ToyTrainConfig};

/// Trainable parameter container.
pub trait Params: Clone {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.params().concat()
    }

    /// Overwrites all parameters from a flat vector in [`Params::params`]
    /// order.
    fn set_flat(&mut self, values: &[f64]) {
        let mut at = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&values[at..at + p.len()]);
            at += p.len();
        }
    }

    /// `self += other * scale`, slot by slot.
    fn axpy(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

impl<T: Params> Params for Vec<T> {
    fn params(&self) -> Vec<&[f64]> {
        self.iter().flat_map(|m| m.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.iter_mut().flat_map(|m| m.params_mut()).collect()
    }
}

impl<T: Params> Params for Option<T> {
    fn params(&self) -> Vec<&[f64]> {
        self.as_ref().map(|m| m.params()).unwrap_or_default()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.as_mut().map(|m| m.params_mut()).unwrap_or_default()
    }
}
