use crate::error::{Error, Result};

/// Activation tensor: `channels` planes of an `nx * ny * nz` grid, each plane
/// x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub channels: usize,
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        Tensor4 {
            channels,
            dims,
            data: vec![0.0; channels * dims.iter().product::<usize>()],
        }
    }

    pub fn new(channels: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if channels * dims.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels}x{dims:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite activation".into()));
        }
        Ok(Tensor4 { channels, dims, data })
    }

    #[inline]
    pub fn spatial(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.spatial();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.spatial();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor4) -> bool {
        self.channels == other.channels && self.dims == other.dims
    }

    pub fn add_assign(&mut self, other: &Tensor4) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
