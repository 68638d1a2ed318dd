use rand::Rng;

use crate::error::Result;
use crate::nn::{
    leaky_relu, leaky_relu_backward, Conv3d, InstanceNorm, NormCache, NormKind, Params, SeCache, SeModule, Tensor4,
};

/// Residual unit: `lrelu(SE(norm(conv(lrelu(norm(conv(x)))))) + shortcut(x))`.
/// The shortcut is a strided 1x1x1 projection when the stride or channel
/// count changes, the identity otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: Conv3d,
    pub norm1: InstanceNorm,
    pub conv2: Conv3d,
    pub norm2: InstanceNorm,
    pub se: Option<SeModule>,
    pub shortcut: Option<Conv3d>,
}

pub struct BlockCache {
    x: Tensor4,
    n1: Option<NormCache>,
    pre1: Tensor4,
    a1: Tensor4,
    n2: Option<NormCache>,
    pre_se: Tensor4,
    se: Option<SeCache>,
    sum: Tensor4,
}

pub struct BlockSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub norm: NormKind,
    /// `None` disables the SE gate.
    pub se_reduction: Option<usize>,
}

impl ResidualBlock {
    fn needs_projection(spec: &BlockSpec) -> bool {
        spec.cin != spec.cout || spec.stride != [1, 1, 1]
    }

    pub fn zeros(spec: &BlockSpec) -> Result<Self> {
        Ok(ResidualBlock {
            conv1: Conv3d::zeros(spec.cin, spec.cout, spec.kernel, spec.stride)?,
            norm1: InstanceNorm::new(spec.norm, spec.cout),
            conv2: Conv3d::zeros(spec.cout, spec.cout, spec.kernel, [1, 1, 1])?,
            norm2: InstanceNorm::new(spec.norm, spec.cout),
            se: spec.se_reduction.map(|r| SeModule::zeros(spec.cout, r)),
            shortcut: if Self::needs_projection(spec) {
                Some(Conv3d::zeros(spec.cin, spec.cout, [1, 1, 1], spec.stride)?)
            } else {
                None
            },
        })
    }

    pub fn init<R: Rng>(spec: &BlockSpec, rng: &mut R) -> Result<Self> {
        Ok(ResidualBlock {
            conv1: Conv3d::init(spec.cin, spec.cout, spec.kernel, spec.stride, rng)?,
            norm1: InstanceNorm::new(spec.norm, spec.cout),
            conv2: Conv3d::init(spec.cout, spec.cout, spec.kernel, [1, 1, 1], rng)?,
            norm2: InstanceNorm::new(spec.norm, spec.cout),
            se: spec.se_reduction.map(|r| SeModule::init(spec.cout, r, rng)),
            shortcut: if Self::needs_projection(spec) {
                Some(Conv3d::init(spec.cin, spec.cout, [1, 1, 1], spec.stride, rng)?)
            } else {
                None
            },
        })
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        let h = self.conv1.forward(x)?;
        let h = leaky_relu(&self.norm1.forward(&h));
        let h = self.norm2.forward(&self.conv2.forward(&h)?);
        let mut h = match &self.se {
            Some(se) => se.forward(&h),
            None => h,
        };
        match &self.shortcut {
            Some(proj) => h.add_assign(&proj.forward(x)?),
            None => h.add_assign(x),
        }
        Ok(leaky_relu(&h))
    }

    pub fn forward_cached(&self, x: &Tensor4) -> Result<(Tensor4, BlockCache)> {
        let h1 = self.conv1.forward(x)?;
        let (pre1, n1) = self.norm1.forward_cached(&h1);
        let a1 = leaky_relu(&pre1);
        let h2 = self.conv2.forward(&a1)?;
        let (pre_se, n2) = self.norm2.forward_cached(&h2);
        let (mut sum, se) = match &self.se {
            Some(m) => {
                let (y, c) = m.forward_cached(&pre_se);
                (y, Some(c))
            }
            None => (pre_se.clone(), None),
        };
        match &self.shortcut {
            Some(proj) => sum.add_assign(&proj.forward(x)?),
            None => sum.add_assign(x),
        }
        let out = leaky_relu(&sum);
        Ok((
            out,
            BlockCache {
                x: x.clone(),
                n1,
                pre1,
                a1,
                n2,
                pre_se,
                se,
                sum,
            },
        ))
    }

    pub fn backward(&self, cache: &BlockCache, dy: &Tensor4, grads: &mut ResidualBlock) -> Tensor4 {
        let dsum = leaky_relu_backward(&cache.sum, dy);
        let mut dx = match (&self.shortcut, &mut grads.shortcut) {
            (Some(proj), Some(g)) => proj.backward(&cache.x, &dsum, g),
            _ => dsum.clone(),
        };
        let dpre_se = match (&self.se, &cache.se, &mut grads.se) {
            (Some(m), Some(c), Some(g)) => m.backward(&cache.pre_se, c, &dsum, g),
            _ => dsum,
        };
        let dh2 = self.norm2.backward(cache.n2.as_ref(), &dpre_se, &mut grads.norm2);
        let da1 = self.conv2.backward(&cache.a1, &dh2, &mut grads.conv2);
        let dpre1 = leaky_relu_backward(&cache.pre1, &da1);
        let dh1 = self.norm1.backward(cache.n1.as_ref(), &dpre1, &mut grads.norm1);
        dx.add_assign(&self.conv1.backward(&cache.x, &dh1, &mut grads.conv1));
        dx
    }
}

impl Params for ResidualBlock {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.conv1.params();
        p.extend(self.norm1.params());
        p.extend(self.conv2.params());
        p.extend(self.norm2.params());
        p.extend(self.se.params());
        p.extend(self.shortcut.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.conv1.params_mut();
        p.extend(self.norm1.params_mut());
        p.extend(self.conv2.params_mut());
        p.extend(self.norm2.params_mut());
        p.extend(self.se.params_mut());
        p.extend(self.shortcut.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn spec(cin: usize, cout: usize, stride: [usize; 3]) -> BlockSpec {
        BlockSpec {
            cin,
            cout,
            kernel: [3, 3, 1],
            stride,
            norm: NormKind::Instance,
            se_reduction: Some(2),
        }
    }

    #[test]
    fn zero_path_is_leaky_identity() {
        let block = ResidualBlock::zeros(&spec(3, 3, [1, 1, 1])).unwrap();
        assert!(block.shortcut.is_none());
        let x = Tensor4::new(3, [2, 3, 2], (0..36).map(|i| i as f64 - 17.5).collect()).unwrap();
        assert_eq!(block.forward(&x).unwrap(), leaky_relu(&x));
    }

    #[test]
    fn anisotropic_stride_shape() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let block = ResidualBlock::init(&spec(2, 4, [2, 2, 1]), &mut rng).unwrap();
        let y = block.forward(&Tensor4::zeros(2, [8, 6, 5])).unwrap();
        assert_eq!((y.channels, y.dims), (4, [4, 3, 5]));
    }

    #[test]
    fn cached_forward_matches_inference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let block = ResidualBlock::init(&spec(2, 2, [1, 1, 1]), &mut rng).unwrap();
        let x = Tensor4::new(2, [4, 4, 1], (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        assert_eq!(block.forward(&x).unwrap(), block.forward_cached(&x).unwrap().0);
    }
}
