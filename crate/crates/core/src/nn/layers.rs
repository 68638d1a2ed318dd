use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Params, Tensor4};

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(x: &Tensor4) -> Tensor4 {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < 0.0 {
            *v *= LEAKY_SLOPE;
        }
    }
    y
}

/// Gradient through a leaky ReLU given its *input*.
pub fn leaky_relu_backward(input: &Tensor4, dy: &Tensor4) -> Tensor4 {
    let mut dx = dy.clone();
    for (g, &x) in dx.data.iter_mut().zip(&input.data) {
        if x < 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
    dx
}

/// Nearest-neighbour 2x upsampling along x and y.
pub fn upsample_nearest_xy(x: &Tensor4) -> Tensor4 {
    let [nx, ny, nz] = x.dims;
    let mut out = Tensor4::zeros(x.channels, [2 * nx, 2 * ny, nz]);
    for c in 0..x.channels {
        let src = x.channel(c);
        let dst = out.channel_mut(c);
        for z in 0..nz {
            for y in 0..2 * ny {
                for xx in 0..2 * nx {
                    dst[(z * 2 * ny + y) * 2 * nx + xx] = src[(z * ny + y / 2) * nx + xx / 2];
                }
            }
        }
    }
    out
}

pub fn upsample_nearest_xy_backward(dy: &Tensor4) -> Tensor4 {
    let [ux, uy, nz] = dy.dims;
    let (nx, ny) = (ux / 2, uy / 2);
    let mut dx = Tensor4::zeros(dy.channels, [nx, ny, nz]);
    for c in 0..dy.channels {
        let src = dy.channel(c);
        let dst = dx.channel_mut(c);
        for z in 0..nz {
            for y in 0..uy {
                for x in 0..ux {
                    dst[(z * ny + y / 2) * nx + x / 2] += src[(z * uy + y) * ux + x];
                }
            }
        }
    }
    dx
}

/// Same-padded 3-D convolution. Output extent per axis is `ceil(n / stride)`
/// and output voxel `o` reads input `o * stride + k - kernel / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    /// `[cout][cin][kz][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gather table for one kernel offset: output voxel -> input voxel.
struct Taps {
    index: Vec<Option<usize>>,
}

impl Conv3d {
    pub fn zeros(cin: usize, cout: usize, kernel: [usize; 3], stride: [usize; 3]) -> Result<Self> {
        if kernel.iter().any(|&k| k % 2 == 0) {
            return Err(Error::ShapeMismatch(format!("kernel {kernel:?} must be odd")));
        }
        if stride.contains(&0) || cin == 0 || cout == 0 {
            return Err(Error::ShapeMismatch(format!(
                "conv {cin}->{cout} stride {stride:?} is degenerate"
            )));
        }
        let k: usize = kernel.iter().product();
        Ok(Conv3d {
            cin,
            cout,
            kernel,
            stride,
            weight: vec![0.0; cout * cin * k],
            bias: vec![0.0; cout],
        })
    }

    /// He-normal weights, zero bias.
    pub fn init<R: Rng>(cin: usize, cout: usize, kernel: [usize; 3], stride: [usize; 3], rng: &mut R) -> Result<Self> {
        let mut conv = Conv3d::zeros(cin, cout, kernel, stride)?;
        let fan_in = (cin * conv.taps()) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
        for w in &mut conv.weight {
            *w = normal.sample(rng);
        }
        Ok(conv)
    }

    pub fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn output_dims(&self, dims: [usize; 3]) -> [usize; 3] {
        std::array::from_fn(|a| dims[a].div_ceil(self.stride[a]))
    }

    fn tap_tables(&self, dims: [usize; 3]) -> Vec<Taps> {
        let out = self.output_dims(dims);
        let axis = |a: usize, k: usize| -> Vec<Option<usize>> {
            let pad = (self.kernel[a] / 2) as isize;
            (0..out[a])
                .map(|o| {
                    let i = (o * self.stride[a]) as isize + k as isize - pad;
                    (0..dims[a] as isize).contains(&i).then_some(i as usize)
                })
                .collect()
        };
        let mut tables = Vec::with_capacity(self.taps());
        for kz in 0..self.kernel[2] {
            let tz = axis(2, kz);
            for ky in 0..self.kernel[1] {
                let ty = axis(1, ky);
                for kx in 0..self.kernel[0] {
                    let tx = axis(0, kx);
                    let mut index = Vec::with_capacity(out.iter().product());
                    for z in &tz {
                        for y in &ty {
                            for x in &tx {
                                index.push(match (x, y, z) {
                                    (Some(x), Some(y), Some(z)) => Some((z * dims[1] + y) * dims[0] + x),
                                    _ => None,
                                });
                            }
                        }
                    }
                    tables.push(Taps { index });
                }
            }
        }
        tables
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.channels != self.cin {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.cin, x.channels
            )));
        }
        Ok(())
    }

    fn gather(x: &Tensor4, taps: &Taps, buf: &mut [f64]) {
        let nout = taps.index.len();
        for c in 0..x.channels {
            let src = x.channel(c);
            let dst = &mut buf[c * nout..(c + 1) * nout];
            for (d, t) in dst.iter_mut().zip(&taps.index) {
                *d = t.map_or(0.0, |i| src[i]);
            }
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let out_dims = self.output_dims(x.dims);
        let nout: usize = out_dims.iter().product();
        let k = self.taps();
        let mut out = Tensor4::zeros(self.cout, out_dims);
        for (co, b) in self.bias.iter().enumerate() {
            out.channel_mut(co).fill(*b);
        }
        let mut cols = vec![0.0; self.cin * nout];
        for (o, taps) in self.tap_tables(x.dims).iter().enumerate() {
            Self::gather(x, taps, &mut cols);
            // out[cout x nout] += W_o[cout x cin] * cols[cin x nout]
            unsafe {
                matrixmultiply::dgemm(
                    self.cout,
                    self.cin,
                    nout,
                    1.0,
                    self.weight.as_ptr().add(o),
                    (self.cin * k) as isize,
                    k as isize,
                    cols.as_ptr(),
                    nout as isize,
                    1,
                    1.0,
                    out.data.as_mut_ptr(),
                    nout as isize,
                    1,
                );
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor4, dy: &Tensor4, grads: &mut Conv3d) -> Tensor4 {
        let nout = dy.spatial();
        let k = self.taps();
        for co in 0..self.cout {
            grads.bias[co] += dy.channel(co).iter().sum::<f64>();
        }
        let mut dx = Tensor4::zeros(self.cin, x.dims);
        let mut cols = vec![0.0; self.cin * nout];
        let mut dcols = vec![0.0; self.cin * nout];
        for (o, taps) in self.tap_tables(x.dims).iter().enumerate() {
            Self::gather(x, taps, &mut cols);
            unsafe {
                // dW_o[cout x cin] += dy[cout x nout] * cols^T[nout x cin]
                matrixmultiply::dgemm(
                    self.cout,
                    nout,
                    self.cin,
                    1.0,
                    dy.data.as_ptr(),
                    nout as isize,
                    1,
                    cols.as_ptr(),
                    1,
                    nout as isize,
                    1.0,
                    grads.weight.as_mut_ptr().add(o),
                    (self.cin * k) as isize,
                    k as isize,
                );
                // dcols[cin x nout] = W_o^T[cin x cout] * dy[cout x nout]
                matrixmultiply::dgemm(
                    self.cin,
                    self.cout,
                    nout,
                    1.0,
                    self.weight.as_ptr().add(o),
                    k as isize,
                    (self.cin * k) as isize,
                    dy.data.as_ptr(),
                    nout as isize,
                    1,
                    0.0,
                    dcols.as_mut_ptr(),
                    nout as isize,
                    1,
                );
            }
            for c in 0..self.cin {
                let src = &dcols[c * nout..(c + 1) * nout];
                let dst = dx.channel_mut(c);
                for (g, t) in src.iter().zip(&taps.index) {
                    if let Some(i) = t {
                        dst[*i] += g;
                    }
                }
            }
        }
        dx
    }
}

impl Params for Conv3d {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fully connected layer, `weight` is `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Normal weights with standard deviation `sqrt(gain / inputs)`.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let mut l = Linear::zeros(inputs, outputs);
        let normal = Normal::new(0.0, (gain / inputs as f64).sqrt()).unwrap();
        for w in &mut l.weight {
            *w = normal.sample(rng);
        }
        l
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            grads.bias[o] += g;
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grads.weight[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

impl Params for Linear {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Instance,
    None,
}

/// Per-channel instance normalization with affine scale and shift.
/// With [`NormKind::None`] it is the identity and holds no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceNorm {
    pub kind: NormKind,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub struct NormCache {
    xhat: Tensor4,
    inv_std: Vec<f64>,
}

impl InstanceNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(kind: NormKind, channels: usize) -> Self {
        match kind {
            NormKind::Instance => InstanceNorm {
                kind,
                gamma: vec![1.0; channels],
                beta: vec![0.0; channels],
            },
            NormKind::None => InstanceNorm {
                kind,
                gamma: Vec::new(),
                beta: Vec::new(),
            },
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Tensor4 {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Tensor4) -> (Tensor4, Option<NormCache>) {
        if self.kind == NormKind::None {
            return (x.clone(), None);
        }
        let n = x.spatial() as f64;
        let mut xhat = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(x.channels);
        for c in 0..x.channels {
            let src = x.channel(c);
            let mean = src.iter().sum::<f64>() / n;
            let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + Self::EPS).sqrt();
            inv_std.push(is);
            for (h, v) in xhat.channel_mut(c).iter_mut().zip(src) {
                *h = (v - mean) * is;
            }
            let (g, b) = (self.gamma[c], self.beta[c]);
            for (o, h) in y.channel_mut(c).iter_mut().zip(xhat.channel(c)) {
                *o = g * h + b;
            }
        }
        (y, Some(NormCache { xhat, inv_std }))
    }

    pub fn backward(&self, cache: Option<&NormCache>, dy: &Tensor4, grads: &mut InstanceNorm) -> Tensor4 {
        let Some(cache) = cache else {
            return dy.clone();
        };
        let n = dy.spatial() as f64;
        let mut dx = dy.clone();
        for c in 0..dy.channels {
            let g = dy.channel(c);
            let h = cache.xhat.channel(c);
            let dot: f64 = g.iter().zip(h).map(|(a, b)| a * b).sum();
            let sum: f64 = g.iter().sum();
            grads.gamma[c] += dot;
            grads.beta[c] += sum;
            let gamma = self.gamma[c];
            let scale = gamma * cache.inv_std[c] / n;
            for ((d, gi), hi) in dx.channel_mut(c).iter_mut().zip(g).zip(h) {
                *d = scale * (n * gi - sum - hi * dot);
            }
        }
        dx
    }
}

impl Params for InstanceNorm {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
