use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::spectrum::{generate_variants, PerturbationConfig};
use crate::nn::persist::{decode_conv_stack, encode_conv_stack};
use crate::nn::{
    leaky_relu, leaky_relu_backward, upsample_nearest_xy, upsample_nearest_xy_backward, Adam, Conv3d, Params, Tensor4,
};
use crate::rng;
use crate::volume::{Slice2d, Volume};

const KERNEL: [usize; 3] = [3, 3, 1];
const DOWN: [usize; 3] = [2, 2, 1];
const SAME: [usize; 3] = [1, 1, 1];

/// Skip-connected convolutional autoencoder over 2-D slices.
///
/// Encoder: three 3x3 stride-2 convolutions (16, 32, 64 channels) with
/// leaky ReLU. Decoder: nearest 2x upsampling then a 3x3 convolution with
/// leaky ReLU per level; the first two decoder outputs receive the matching
/// encoder activation additively. A linear 3x3 convolution maps to one
/// channel. Slices are batched along the tensor z axis, which the (3,3,1)
/// kernels never mix.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizerModel {
    pub encoder: [Conv3d; 3],
    pub decoder: [Conv3d; 3],
    pub head: Conv3d,
}

pub type AeGrads = HarmonizerModel;

struct AeCache {
    input: Tensor4,
    e: [Tensor4; 3],
    e_pre: [Tensor4; 3],
    up: [Tensor4; 3],
    d_pre: [Tensor4; 3],
    d0: Tensor4,
}

impl HarmonizerModel {
    pub const WIDTHS: [usize; 3] = [16, 32, 64];

    pub fn zeros() -> Self {
        let [a, b, c] = Self::WIDTHS;
        let conv = |i, o, s| Conv3d::zeros(i, o, KERNEL, s).expect("static shapes");
        HarmonizerModel {
            encoder: [conv(1, a, DOWN), conv(a, b, DOWN), conv(b, c, DOWN)],
            decoder: [conv(c, b, SAME), conv(b, a, SAME), conv(a, a, SAME)],
            head: conv(a, 1, SAME),
        }
    }

    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let [a, b, c] = Self::WIDTHS;
        let mut conv = |i, o, s| Conv3d::init(i, o, KERNEL, s, rng).expect("static shapes");
        let encoder = [conv(1, a, DOWN), conv(a, b, DOWN), conv(b, c, DOWN)];
        let decoder = [conv(c, b, SAME), conv(b, a, SAME), conv(a, a, SAME)];
        let mut head = conv(a, 1, SAME);
        // the skip sums grow activations; start the linear output small
        for w in &mut head.weight {
            *w *= 0.1;
        }
        HarmonizerModel { encoder, decoder, head }
    }

    fn layers(&self) -> Vec<&Conv3d> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .chain(std::iter::once(&self.head))
            .collect()
    }

    /// `sum w^2` over convolution weights, biases excluded.
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers()
            .iter()
            .map(|l| l.weight.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.all_finite()
    }

    fn check(dims: [usize; 3]) -> Result<()> {
        if !dims[0].is_multiple_of(8) || !dims[1].is_multiple_of(8) || dims[0] == 0 || dims[1] == 0 {
            return Err(Error::BadGeometry(format!(
                "slice {}x{} is not divisible by 8",
                dims[0], dims[1]
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor4) -> Result<(Tensor4, AeCache)> {
        Self::check(x.dims)?;
        let e0_pre = self.encoder[0].forward(x)?;
        let e0 = leaky_relu(&e0_pre);
        let e1_pre = self.encoder[1].forward(&e0)?;
        let e1 = leaky_relu(&e1_pre);
        let e2_pre = self.encoder[2].forward(&e1)?;
        let e2 = leaky_relu(&e2_pre);

        let up0 = upsample_nearest_xy(&e2);
        let d2_pre = self.decoder[0].forward(&up0)?;
        let mut d2 = leaky_relu(&d2_pre);
        d2.add_assign(&e1);
        let up1 = upsample_nearest_xy(&d2);
        let d1_pre = self.decoder[1].forward(&up1)?;
        let mut d1 = leaky_relu(&d1_pre);
        d1.add_assign(&e0);
        let up2 = upsample_nearest_xy(&d1);
        let d0_pre = self.decoder[2].forward(&up2)?;
        let d0 = leaky_relu(&d0_pre);
        let out = self.head.forward(&d0)?;
        Ok((
            out,
            AeCache {
                input: x.clone(),
                e: [e0, e1, e2],
                e_pre: [e0_pre, e1_pre, e2_pre],
                up: [up0, up1, up2],
                d_pre: [d2_pre, d1_pre, d0_pre],
                d0,
            },
        ))
    }

    /// Forward pass over a stack of slices (tensor z axis = batch).
    pub fn forward_batch(&self, x: &Tensor4) -> Result<Tensor4> {
        Ok(self.run(x)?.0)
    }

    fn backward(&self, cache: &AeCache, dout: &Tensor4, g: &mut HarmonizerModel) {
        let dd0 = self.head.backward(&cache.d0, dout, &mut g.head);
        let dd0_pre = leaky_relu_backward(&cache.d_pre[2], &dd0);
        let dup2 = self.decoder[2].backward(&cache.up[2], &dd0_pre, &mut g.decoder[2]);
        // d1 = lrelu(d1_pre) + e0
        let dd1 = upsample_nearest_xy_backward(&dup2);
        let mut de0 = dd1.clone();
        let dd1_pre = leaky_relu_backward(&cache.d_pre[1], &dd1);
        let dup1 = self.decoder[1].backward(&cache.up[1], &dd1_pre, &mut g.decoder[1]);
        // d2 = lrelu(d2_pre) + e1
        let dd2 = upsample_nearest_xy_backward(&dup1);
        let mut de1 = dd2.clone();
        let dd2_pre = leaky_relu_backward(&cache.d_pre[0], &dd2);
        let dup0 = self.decoder[0].backward(&cache.up[0], &dd2_pre, &mut g.decoder[0]);
        let de2 = upsample_nearest_xy_backward(&dup0);

        let de2_pre = leaky_relu_backward(&cache.e_pre[2], &de2);
        de1.add_assign(&self.encoder[2].backward(&cache.e[1], &de2_pre, &mut g.encoder[2]));
        let de1_pre = leaky_relu_backward(&cache.e_pre[1], &de1);
        de0.add_assign(&self.encoder[1].backward(&cache.e[0], &de1_pre, &mut g.encoder[1]));
        let de0_pre = leaky_relu_backward(&cache.e_pre[0], &de0);
        self.encoder[0].backward(&cache.input, &de0_pre, &mut g.encoder[0]);
    }

    /// Loss of a batch and its parameter gradient. The loss is the mean
    /// squared error over every pixel plus `lambda * sum w^2`.
    pub fn loss_and_grad(&self, input: &Tensor4, target: &Tensor4, lambda: f64) -> Result<(f64, AeGrads)> {
        if !input.same_shape(target) {
            return Err(Error::ShapeMismatch("input and target differ".into()));
        }
        let (out, cache) = self.run(input)?;
        let n = out.data.len() as f64;
        let mut dout = out.clone();
        let mut mse = 0.0;
        for (d, t) in dout.data.iter_mut().zip(&target.data) {
            let r = *d - t;
            mse += r * r;
            *d = 2.0 * r / n;
        }
        let mut grads = self.zeros_like();
        self.backward(&cache, &dout, &mut grads);
        for (g, l) in grads.layers_mut().into_iter().zip(self.layers()) {
            for (gw, w) in g.weight.iter_mut().zip(&l.weight) {
                *gw += 2.0 * lambda * w;
            }
        }
        Ok((mse / n + lambda * self.weight_sq_norm(), grads))
    }

    fn layers_mut(&mut self) -> Vec<&mut Conv3d> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(std::iter::once(&mut self.head))
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_conv_stack(&self.layers())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let layers = decode_conv_stack(bytes)?;
        let mut model = HarmonizerModel::zeros();
        if layers.len() != 7 {
            return Err(Error::MalformedHeader(format!(
                "harmonizer needs 7 layers, found {}",
                layers.len()
            )));
        }
        for (slot, layer) in model.layers_mut().into_iter().zip(layers) {
            if (slot.cin, slot.cout, slot.kernel, slot.stride) != (layer.cin, layer.cout, layer.kernel, layer.stride) {
                return Err(Error::MalformedHeader(format!(
                    "layer {}->{} does not match the harmonizer architecture",
                    layer.cin, layer.cout
                )));
            }
            *slot = layer;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

impl Params for HarmonizerModel {
    fn params(&self) -> Vec<&[f64]> {
        self.layers().into_iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut().into_iter().flat_map(|l| l.params_mut()).collect()
    }
}

fn stack(slices: &[&Slice2d]) -> Result<Tensor4> {
    let first = slices
        .first()
        .ok_or_else(|| Error::InvalidArgument("no slices".into()))?;
    let (w, h) = (first.width, first.height);
    if slices.iter().any(|s| s.width != w || s.height != h) {
        return Err(Error::ShapeMismatch("slices differ in size".into()));
    }
    let data = slices.iter().flat_map(|s| s.data.iter().copied()).collect();
    Tensor4::new(1, [w, h, slices.len()], data)
}

fn unstack(t: &Tensor4) -> Vec<Slice2d> {
    let [w, h, n] = t.dims;
    (0..n)
        .map(|z| Slice2d {
            width: w,
            height: h,
            data: t.data[z * w * h..(z + 1) * w * h].to_vec(),
        })
        .collect()
}

/// Harmonized reconstruction of one slice.
pub fn ae_forward(model: &HarmonizerModel, slice: &Slice2d) -> Result<Slice2d> {
    let out = model.forward_batch(&stack(&[slice])?)?;
    let out = unstack(&out).pop().unwrap();
    if out.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite harmonizer output".into()));
    }
    Ok(out)
}

/// Mean squared pixel error plus `lambda * sum w^2` over the model's
/// convolution weights.
pub fn ae_loss(model: &HarmonizerModel, predicted: &Slice2d, target: &Slice2d, lambda: f64) -> Result<f64> {
    if (predicted.width, predicted.height) != (target.width, target.height) {
        return Err(Error::ShapeMismatch("prediction and target differ".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
    }
    Ok(predicted.mse(target) + lambda * model.weight_sq_norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub step: f64,
    /// Pairs per optimizer step, reshuffled each epoch; `None` is full
    /// batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lambda: 1e-5,
            step: 1e-3,
            batch_size: Some(10),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs: usize,
}

/// Self-supervised training on `(perturbed variant -> original)` pairs
/// generated from every reference slice.
pub fn train_harmonizer(
    slices: &[Slice2d],
    perturb: &PerturbationConfig,
    cfg: &TrainConfig,
) -> Result<(HarmonizerModel, TrainReport)> {
    if slices.is_empty() {
        return Err(Error::InvalidArgument("need at least one reference slice".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be >= 1".into()));
    }
    if !(cfg.lambda >= 0.0) || !(cfg.step > 0.0) {
        return Err(Error::InvalidArgument("lambda must be >= 0 and step > 0".into()));
    }
    let (w, h) = (slices[0].width, slices[0].height);
    HarmonizerModel::check([w, h, 1])?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, s) in slices.iter().enumerate() {
        let pcfg = PerturbationConfig {
            rng_seed: rng::mix(perturb.rng_seed, i as u64),
            ..perturb.clone()
        };
        for v in generate_variants(s, &pcfg)? {
            inputs.push(v);
            targets.push(s);
        }
    }
    let pairs = inputs.len();
    let batch = cfg.batch_size.unwrap_or(pairs).clamp(1, pairs);
    let mut rng = rng::seeded(cfg.seed);
    let mut model = HarmonizerModel::init(&mut rng);
    let mut opt = Adam::new(cfg.step);
    let mut order: Vec<usize> = (0..pairs).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if batch < pairs {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let x = stack(&chunk.iter().map(|&i| &inputs[i]).collect::<Vec<_>>())?;
            let t = stack(&chunk.iter().map(|&i| targets[i]).collect::<Vec<_>>())?;
            let (loss, grads) = model.loss_and_grad(&x, &t, cfg.lambda)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence(format!("harmonizer loss at epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            opt.step(&mut model, &grads);
        }
        epoch_losses.push(total / pairs as f64);
    }
    Ok((model, TrainReport { epoch_losses, pairs }))
}

/// Applies the harmonizer to every z slice of a volume.
pub fn harmonize_volume(model: &HarmonizerModel, vol: &Volume) -> Result<Volume> {
    let [w, h, n] = vol.dims();
    HarmonizerModel::check([w, h, n])?;
    let x = Tensor4::new(1, [w, h, n], vol.data().to_vec())?;
    let out = model.forward_batch(&x)?;
    if !out.is_finite() {
        return Err(Error::Divergence("non-finite harmonizer output".into()));
    }
    vol.with_data(out.data)
}
