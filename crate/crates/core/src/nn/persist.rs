//! Binary weight files.
//!
//! Both formats start with a 4-byte magic and a little-endian `u32` version.
//!
//! * `FHAE` (harmonizer): `u32` layer count, then per layer eight `u32`
//!   (cin, cout, kx, ky, kz, sx, sy, sz), then every layer's weights followed
//!   by its biases as `f32`, layers in encoder, decoder, head order.
//! * `FSRN` (SE-ResNet): `u32` length of a JSON architecture document, the
//!   document, `u64` parameter count, then the parameters as `f32` in
//!   [`Params::params`] order.

use crate::error::{Error, Result};
use crate::nn::{Conv3d, Params, SeResNet, SeResNetConfig};

pub const FHAE_MAGIC: &[u8; 4] = b"FHAE";
pub const FSRN_MAGIC: &[u8; 4] = b"FSRN";
pub const VERSION: u32 = 1;

/// Hard cap on decoded parameter counts, so corrupt headers cannot request
/// absurd allocations.
const MAX_PARAMS: usize = 1 << 28;

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, at: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedHeader(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > MAX_PARAMS {
            return Err(Error::MalformedHeader(format!("{n} parameters is implausible")));
        }
        let raw = self.take(n * 4)?;
        let out: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(out)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::MalformedHeader(format!(
                "{} trailing bytes",
                self.bytes.len() - self.at
            )));
        }
        Ok(())
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::MalformedHeader(format!(
                "expected magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        Ok(())
    }
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

/// Encodes a list of convolution layers in the `FHAE` layout.
pub fn encode_conv_stack(layers: &[&Conv3d]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(FHAE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        let words = [
            l.cin,
            l.cout,
            l.kernel[0],
            l.kernel[1],
            l.kernel[2],
            l.stride[0],
            l.stride[1],
            l.stride[2],
        ];
        for w in words {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
    }
    for l in layers {
        push_f32s(&mut out, &l.weight);
        push_f32s(&mut out, &l.bias);
    }
    out
}

/// Decodes an `FHAE` payload into its convolution layers.
pub fn decode_conv_stack(bytes: &[u8]) -> Result<Vec<Conv3d>> {
    let mut r = Reader::new(bytes);
    r.magic(FHAE_MAGIC)?;
    let count = r.u32()? as usize;
    if count > 64 {
        return Err(Error::MalformedHeader(format!("{count} layers is implausible")));
    }
    let mut shapes = Vec::with_capacity(count);
    let mut total = 0usize;
    for _ in 0..count {
        let mut w = [0usize; 8];
        for v in &mut w {
            *v = r.u32()? as usize;
        }
        let n = w[..5]
            .iter()
            .try_fold(1usize, |acc, &v| acc.checked_mul(v))
            .and_then(|weights| weights.checked_add(w[1]))
            .ok_or_else(|| Error::MalformedHeader("layer size overflows".into()))?;
        total = total.saturating_add(n);
        shapes.push(w);
    }
    // size the payload before allocating anything the header asks for
    if total > MAX_PARAMS || r.remaining() != total * 4 {
        return Err(Error::MalformedHeader(format!(
            "header declares {total} parameters, payload holds {} bytes",
            r.remaining()
        )));
    }
    let mut layers = Vec::with_capacity(count);
    for w in shapes {
        let conv = Conv3d::zeros(w[0], w[1], [w[2], w[3], w[4]], [w[5], w[6], w[7]])
            .map_err(|e| Error::MalformedHeader(e.to_string()))?;
        layers.push(conv);
    }
    for l in &mut layers {
        l.weight = r.f32s(l.weight.len())?;
        l.bias = r.f32s(l.bias.len())?;
    }
    r.finish()?;
    Ok(layers)
}

pub fn encode_seresnet(model: &SeResNet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(FSRN_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let json = serde_json::to_vec(&model.config).expect("config serializes");
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let flat = model.flat();
    out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    push_f32s(&mut out, &flat);
    out
}

pub fn decode_seresnet(bytes: &[u8]) -> Result<SeResNet> {
    let mut r = Reader::new(bytes);
    r.magic(FSRN_MAGIC)?;
    let len = r.u32()? as usize;
    let json = r.take(len)?;
    let config: SeResNetConfig =
        serde_json::from_slice(json).map_err(|e| Error::MalformedHeader(format!("architecture document: {e}")))?;
    config.validate().map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let count = r.u64()? as usize;
    let expected = estimate_params(&config)?;
    if count != expected {
        return Err(Error::MalformedHeader(format!(
            "parameter count {count} does not match architecture ({expected})"
        )));
    }
    let values = r.f32s(count)?;
    r.finish()?;
    let mut model = SeResNet::zeros(&config)?;
    model.set_flat(&values);
    Ok(model)
}

/// Parameter count of an architecture, computed without allocating it.
fn estimate_params(cfg: &SeResNetConfig) -> Result<usize> {
    let conv = |cin: usize, cout: usize, k: [usize; 3]| -> Option<usize> {
        cin.checked_mul(cout)?
            .checked_mul(k.iter().product())?
            .checked_add(cout)
    };
    let norm = |c: usize| match cfg.norm {
        crate::nn::NormKind::Instance => 2 * c,
        crate::nn::NormKind::None => 0,
    };
    let mut total =
        conv(cfg.in_channels, cfg.channels[0], cfg.stem_kernel).and_then(|v| v.checked_add(norm(cfg.channels[0])));
    for s in 0..SeResNetConfig::STAGES {
        for b in 0..cfg.blocks[s] {
            let cout = cfg.channels[s];
            let cin = if b > 0 {
                cout
            } else if s == 0 {
                cfg.channels[0]
            } else {
                cfg.channels[s - 1]
            };
            let stride = if b == 0 { cfg.strides[s] } else { [1, 1, 1] };
            let hidden = crate::nn::SeModule::bottleneck(cout, cfg.se_reduction);
            let mut block = conv(cin, cout, cfg.kernels[s])
                .zip(conv(cout, cout, cfg.kernels[s]))
                .map(|(a, b)| a + b + 2 * norm(cout));
            if cfg.se_enabled {
                block = block.map(|v| v + cout * hidden + hidden + hidden * cout + cout);
            }
            if cin != cout || stride != [1, 1, 1] {
                block = block.zip(conv(cin, cout, [1, 1, 1])).map(|(a, b)| a + b);
            }
            total = total.zip(block).and_then(|(a, b)| a.checked_add(b));
        }
        if total.is_none_or(|t| t > MAX_PARAMS) {
            return Err(Error::MalformedHeader("architecture too large".into()));
        }
    }
    let last = *cfg.channels.last().unwrap();
    total
        .and_then(|t| t.checked_add(last * cfg.head_units + cfg.head_units))
        .and_then(|t| t.checked_add(cfg.head_units + 1))
        .filter(|&t| t <= MAX_PARAMS)
        .ok_or_else(|| Error::MalformedHeader("architecture too large".into()))
}
