use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::block::{BlockCache, BlockSpec, ResidualBlock};
use crate::nn::{
    leaky_relu, leaky_relu_backward, Conv3d, InstanceNorm, Linear, NormCache, NormKind, Params, Tensor4, LEAKY_SLOPE,
};
use crate::volume::Volume;

/// Which reading of the stage stride plan to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StridePlan {
    /// Stages 1, 2 and 5 stride (2,2,1); stages 3 and 4 stride (2,2,2).
    #[default]
    Adopted,
    /// Stages 1 and 2 stride (2,2,1); stages 3 to 5 stride (2,2,2).
    Alternative,
}

impl StridePlan {
    pub fn strides(self) -> Vec<[usize; 3]> {
        match self {
            StridePlan::Adopted => vec![[2, 2, 1], [2, 2, 1], [2, 2, 2], [2, 2, 2], [2, 2, 1]],
            StridePlan::Alternative => {
                vec![[2, 2, 1], [2, 2, 1], [2, 2, 2], [2, 2, 2], [2, 2, 2]]
            }
        }
    }
}

/// Architecture of the anisotropic SE-ResNet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeResNetConfig {
    pub in_channels: usize,
    pub stem_kernel: [usize; 3],
    pub stem_stride: [usize; 3],
    pub channels: Vec<usize>,
    pub blocks: Vec<usize>,
    pub kernels: Vec<[usize; 3]>,
    pub strides: Vec<[usize; 3]>,
    pub se_reduction: usize,
    pub se_enabled: bool,
    pub norm: NormKind,
    pub head_units: usize,
}

impl Default for SeResNetConfig {
    fn default() -> Self {
        Self::full(StridePlan::Adopted)
    }
}

impl SeResNetConfig {
    pub const STAGES: usize = 5;

    /// The full-size network: 32..512 channels, 1/3/4/6/3 blocks.
    pub fn full(plan: StridePlan) -> Self {
        SeResNetConfig {
            in_channels: 1,
            stem_kernel: [3, 3, 1],
            stem_stride: [1, 1, 1],
            channels: vec![32, 64, 128, 256, 512],
            blocks: vec![1, 3, 4, 6, 3],
            kernels: vec![[3, 3, 1], [3, 3, 1], [3, 3, 3], [3, 3, 3], [3, 3, 3]],
            strides: plan.strides(),
            se_reduction: 16,
            se_enabled: true,
            norm: NormKind::Instance,
            head_units: 512,
        }
    }

    /// Desk-scale variant with the same stage layout and strides.
    pub fn toy() -> Self {
        SeResNetConfig {
            channels: vec![4, 8, 16, 32, 64],
            blocks: vec![1, 1, 1, 1, 1],
            se_reduction: 4,
            head_units: 16,
            ..Self::full(StridePlan::Adopted)
        }
    }

    pub fn leaky_slope(&self) -> f64 {
        LEAKY_SLOPE
    }

    pub fn validate(&self) -> Result<()> {
        let n = Self::STAGES;
        if self.channels.len() != n || self.blocks.len() != n || self.kernels.len() != n || self.strides.len() != n {
            return Err(Error::InvalidArgument(format!("stage lists must all have {n} entries")));
        }
        if self.channels.windows(2).any(|w| w[0] >= w[1]) || self.channels[0] == 0 {
            return Err(Error::InvalidArgument(
                "stage channels must be strictly increasing".into(),
            ));
        }
        if self.blocks.contains(&0) || self.in_channels == 0 || self.head_units == 0 {
            return Err(Error::InvalidArgument("zero-sized stage or head".into()));
        }
        let all_strides = self.strides.iter().chain(std::iter::once(&self.stem_stride));
        if all_strides.flatten().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("strides must be >= 1".into()));
        }
        let all_kernels = self.kernels.iter().chain(std::iter::once(&self.stem_kernel));
        if all_kernels.flatten().any(|&k| k % 2 == 0) {
            return Err(Error::InvalidArgument("kernels must be odd".into()));
        }
        if self.se_reduction == 0 {
            return Err(Error::InvalidArgument("SE reduction must be >= 1".into()));
        }
        Ok(())
    }

    /// Product of all strides per axis.
    pub fn total_stride(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.stem_stride[a] * self.strides.iter().map(|s| s[a]).product::<usize>())
    }

    fn block_spec(&self, stage: usize, index: usize) -> BlockSpec {
        BlockSpec {
            cin: if index == 0 {
                if stage == 0 {
                    self.channels[0]
                } else {
                    self.channels[stage - 1]
                }
            } else {
                self.channels[stage]
            },
            cout: self.channels[stage],
            kernel: self.kernels[stage],
            stride: if index == 0 { self.strides[stage] } else { [1, 1, 1] },
            norm: self.norm,
            se_reduction: self.se_enabled.then_some(self.se_reduction),
        }
    }
}

/// Spatial dims after the stem and after every stage, by ceil division.
pub fn closed_form_trace(cfg: &SeResNetConfig, input: [usize; 3]) -> Vec<[usize; 3]> {
    let mut dims: [usize; 3] = std::array::from_fn(|a| input[a].div_ceil(cfg.stem_stride[a]));
    let mut trace = vec![dims];
    for s in &cfg.strides {
        dims = std::array::from_fn(|a| dims[a].div_ceil(s[a]));
        trace.push(dims);
    }
    trace
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeResNet {
    pub config: SeResNetConfig,
    pub stem: Conv3d,
    pub stem_norm: InstanceNorm,
    pub stages: Vec<Vec<ResidualBlock>>,
    pub fc: Linear,
    pub out: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logit: f64,
    pub probability: f64,
    /// Spatial dims after the stem, then after each stage.
    pub trace: Vec<[usize; 3]>,
    pub final_channels: usize,
}

pub struct SeResNetCache {
    input: Tensor4,
    stem_norm: Option<NormCache>,
    stem_pre: Tensor4,
    blocks: Vec<BlockCache>,
    final_spatial: usize,
    final_channels: usize,
    final_dims: [usize; 3],
    pooled: Vec<f64>,
    fc_pre: Vec<f64>,
    hidden: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SeResNet {
    fn build(
        config: &SeResNetConfig,
        mut conv: impl FnMut(usize, usize, [usize; 3], [usize; 3]) -> Result<Conv3d>,
        mut block: impl FnMut(&BlockSpec) -> Result<ResidualBlock>,
        mut linear: impl FnMut(usize, usize, f64) -> Linear,
    ) -> Result<Self> {
        config.validate()?;
        let stem = conv(
            config.in_channels,
            config.channels[0],
            config.stem_kernel,
            config.stem_stride,
        )?;
        let mut stages = Vec::with_capacity(SeResNetConfig::STAGES);
        for s in 0..SeResNetConfig::STAGES {
            let blocks = (0..config.blocks[s])
                .map(|i| block(&config.block_spec(s, i)))
                .collect::<Result<Vec<_>>>()?;
            stages.push(blocks);
        }
        let last = *config.channels.last().unwrap();
        let fc = linear(last, config.head_units, 2.0);
        let out = linear(config.head_units, 1, 1.0);
        Ok(SeResNet {
            config: config.clone(),
            stem,
            stem_norm: InstanceNorm::new(config.norm, config.channels[0]),
            stages,
            fc,
            out,
        })
    }

    pub fn zeros(config: &SeResNetConfig) -> Result<Self> {
        Self::build(config, Conv3d::zeros, ResidualBlock::zeros, |i, o, _| {
            Linear::zeros(i, o)
        })
    }

    pub fn init<R: Rng>(config: &SeResNetConfig, rng: &mut R) -> Result<Self> {
        // Sequential construction keeps the draw order fixed.
        let rng = std::cell::RefCell::new(rng);
        Self::build(
            config,
            |i, o, k, s| Conv3d::init(i, o, k, s, &mut **rng.borrow_mut()),
            |spec| ResidualBlock::init(spec, &mut **rng.borrow_mut()),
            |i, o, g| Linear::init(i, o, g, &mut **rng.borrow_mut()),
        )
    }

    pub fn check_geometry(&self, dims: [usize; 3]) -> Result<()> {
        let total = self.config.total_stride();
        if (0..3).any(|a| dims[a] == 0 || !dims[a].is_multiple_of(total[a])) {
            return Err(Error::BadGeometry(format!(
                "patch {dims:?} is not divisible by the stride plan {total:?}"
            )));
        }
        Ok(())
    }

    fn to_tensor(&self, patch: &Volume) -> Result<Tensor4> {
        if self.config.in_channels != 1 {
            return Err(Error::ShapeMismatch(
                "volume input needs a single-channel network".into(),
            ));
        }
        self.check_geometry(patch.dims())?;
        Tensor4::new(1, patch.dims(), patch.data().to_vec())
    }

    fn head(&self, features: &Tensor4) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let n = features.spatial() as f64;
        let pooled: Vec<f64> = (0..features.channels)
            .map(|c| features.channel(c).iter().sum::<f64>() / n)
            .collect();
        let fc_pre = self.fc.forward(&pooled);
        let hidden: Vec<f64> = fc_pre
            .iter()
            .map(|&v| if v < 0.0 { LEAKY_SLOPE * v } else { v })
            .collect();
        let logit = self.out.forward(&hidden)[0];
        (pooled, fc_pre, hidden, logit)
    }

    /// Inference pass; activations are dropped stage by stage.
    pub fn forward_tensor(&self, x: &Tensor4) -> Result<ForwardOutput> {
        let mut h = leaky_relu(&self.stem_norm.forward(&self.stem.forward(x)?));
        let mut trace = vec![h.dims];
        for stage in &self.stages {
            for block in stage {
                h = block.forward(&h)?;
            }
            trace.push(h.dims);
        }
        let (_, _, _, logit) = self.head(&h);
        Ok(ForwardOutput {
            logit,
            probability: sigmoid(logit),
            trace,
            final_channels: h.channels,
        })
    }

    pub fn forward(&self, patch: &Volume) -> Result<ForwardOutput> {
        self.forward_tensor(&self.to_tensor(patch)?)
    }

    pub fn forward_cached(&self, x: &Tensor4) -> Result<(f64, SeResNetCache)> {
        let (stem_pre, stem_norm) = self.stem_norm.forward_cached(&self.stem.forward(x)?);
        let mut h = leaky_relu(&stem_pre);
        let mut blocks = Vec::new();
        for stage in &self.stages {
            for block in stage {
                let (y, c) = block.forward_cached(&h)?;
                blocks.push(c);
                h = y;
            }
        }
        let (pooled, fc_pre, hidden, logit) = self.head(&h);
        Ok((
            logit,
            SeResNetCache {
                input: x.clone(),
                stem_norm,
                stem_pre,
                blocks,
                final_spatial: h.spatial(),
                final_channels: h.channels,
                final_dims: h.dims,
                pooled,
                fc_pre,
                hidden,
            },
        ))
    }

    pub fn forward_cached_volume(&self, patch: &Volume) -> Result<(f64, SeResNetCache)> {
        self.forward_cached(&self.to_tensor(patch)?)
    }

    /// Backpropagates `dL/dlogit` and accumulates into `grads`.
    pub fn backward(&self, cache: &SeResNetCache, dlogit: f64, grads: &mut SeResNet) {
        let mut dhidden = self.out.backward(&cache.hidden, &[dlogit], &mut grads.out);
        for (d, &v) in dhidden.iter_mut().zip(&cache.fc_pre) {
            if v < 0.0 {
                *d *= LEAKY_SLOPE;
            }
        }
        let dpooled = self.fc.backward(&cache.pooled, &dhidden, &mut grads.fc);
        let n = cache.final_spatial as f64;
        let mut dh = Tensor4::zeros(cache.final_channels, cache.final_dims);
        for (c, dp) in dpooled.iter().enumerate() {
            dh.channel_mut(c).fill(dp / n);
        }
        let mut caches = cache.blocks.iter().rev();
        for (stage, gstage) in self.stages.iter().zip(grads.stages.iter_mut()).rev() {
            for (block, gblock) in stage.iter().zip(gstage.iter_mut()).rev() {
                let c = caches.next().expect("one cache per block");
                dh = block.backward(c, &dh, gblock);
            }
        }
        let dpre = leaky_relu_backward(&cache.stem_pre, &dh);
        let dstem = self
            .stem_norm
            .backward(cache.stem_norm.as_ref(), &dpre, &mut grads.stem_norm);
        self.stem.backward(&cache.input, &dstem, &mut grads.stem);
    }
}

impl Params for SeResNet {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.stem.params();
        p.extend(self.stem_norm.params());
        for stage in &self.stages {
            p.extend(stage.params());
        }
        p.extend(self.fc.params());
        p.extend(self.out.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.stem.params_mut();
        p.extend(self.stem_norm.params_mut());
        for stage in &mut self.stages {
            p.extend(stage.params_mut());
        }
        p.extend(self.fc.params_mut());
        p.extend(self.out.params_mut());
        p
    }
}

/// Logit and probability for one patch.
pub fn seresnet_forward(model: &SeResNet, patch: &Volume) -> Result<ForwardOutput> {
    model.forward(patch)
}
