// SPDX-License-Identifier: Apache-2.0

//! Bit-packed spike tensors and the dense integer tensors that surround them.
//!
//! A [`SpikeTensor`] always carries its timestep axis explicitly as the
//! leading dimension. Bits are packed little-endian into `u64` words: element
//! `i` lives in word `i / 64` at bit position `i % 64`.

use crate::error::{Error, Result};

/// Default network-wide timestep count.
pub const DEFAULT_TIMESTEPS: usize = 4;

pub const WORD_BITS: usize = u64::BITS as usize;

fn shape_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn row_major_offset(shape: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), index.len());
    let mut off = 0;
    for (&dim, &i) in shape.iter().zip(index) {
        debug_assert!(i < dim, "index {i} out of range for dim {dim}");
        off = off * dim + i;
    }
    off
}

/// Binary activation tensor with a leading timestep axis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpikeTensor {
    shape: Vec<usize>,
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for SpikeTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpikeTensor")
            .field("shape", &self.shape)
            .field("ones", &self.popcount())
            .finish()
    }
}

fn check_spike_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::Shape(
            "spike tensor needs a leading timestep axis".into(),
        ));
    }
    if shape[0] == 0 {
        return Err(Error::Shape("timestep axis must be non-empty".into()));
    }
    Ok(())
}

/// Packs a row-major 0/1 sequence into a [`SpikeTensor`].
pub fn pack_spikes(flat_bits: &[u8], shape: &[usize]) -> Result<SpikeTensor> {
    check_spike_shape(shape)?;
    let len = shape_len(shape);
    if flat_bits.len() != len {
        return Err(Error::Shape(format!(
            "{} bits supplied for shape {:?} ({} elements)",
            flat_bits.len(),
            shape,
            len
        )));
    }
    let mut words = vec![0u64; len.div_ceil(WORD_BITS)];
    for (i, &b) in flat_bits.iter().enumerate() {
        match b {
            0 => {}
            1 => words[i / WORD_BITS] |= 1 << (i % WORD_BITS),
            other => {
                return Err(Error::Argument(format!(
                    "element {i} is {other}, spikes must be 0 or 1"
                )))
            }
        }
    }
    Ok(SpikeTensor {
        shape: shape.to_vec(),
        words,
        len,
    })
}

impl SpikeTensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_spike_shape(shape)?;
        let len = shape_len(shape);
        Ok(Self {
            shape: shape.to_vec(),
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
        })
    }

    /// Builds a tensor by evaluating `f` at every flat row-major offset.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut out = Self::zeros(shape)?;
        for i in 0..out.len {
            if f(i) {
                out.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        Ok(out)
    }

    /// Rebuilds a tensor from packed words. Bits past the element count must be zero.
    pub fn from_words(shape: &[usize], words: Vec<u64>) -> Result<Self> {
        check_spike_shape(shape)?;
        let len = shape_len(shape);
        if words.len() != len.div_ceil(WORD_BITS) {
            return Err(Error::Shape(format!(
                "{} words supplied, shape {:?} needs {}",
                words.len(),
                shape,
                len.div_ceil(WORD_BITS)
            )));
        }
        if !len.is_multiple_of(WORD_BITS) {
            let tail = words[words.len() - 1] >> (len % WORD_BITS);
            if tail != 0 {
                return Err(Error::Format(
                    "padding bits past the last element are set".into(),
                ));
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            words,
            len,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn timesteps(&self) -> usize {
        self.shape[0]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, offset: usize) -> bool {
        debug_assert!(offset < self.len);
        (self.words[offset / WORD_BITS] >> (offset % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn get(&self, index: &[usize]) -> bool {
        self.bit(row_major_offset(&self.shape, index))
    }

    pub fn unpack(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.bit(i) as u8).collect()
    }

    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Number of elements in one timestep slice.
    pub fn slice_len(&self) -> usize {
        self.len / self.shape[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        check_spike_shape(shape)?;
        if shape_len(shape) != self.len {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            words: self.words.clone(),
            len: self.len,
        })
    }

    /// Reorders timestep slices: slice `t` of the result is slice `perm[t]` of `self`.
    pub fn permute_timesteps(&self, perm: &[usize]) -> Result<Self> {
        let t = self.timesteps();
        let mut seen = vec![false; t];
        if perm.len() != t
            || perm
                .iter()
                .any(|&p| p >= t || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Argument(format!(
                "{perm:?} is not a permutation of 0..{t}"
            )));
        }
        let slice = self.slice_len();
        Self::from_fn(&self.shape, |i| {
            self.bit(perm[i / slice] * slice + i % slice)
        })
    }

    /// Element-wise map over two same-shaped tensors.
    pub fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "element-wise operands {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        let mut words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        if !self.len.is_multiple_of(WORD_BITS) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (self.len % WORD_BITS)) - 1;
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            words,
            len: self.len,
        })
    }
}

/// Fraction of elements that are 1.
pub fn spike_density(sp: &SpikeTensor) -> f64 {
    if sp.is_empty() {
        return 0.0;
    }
    sp.popcount() as f64 / sp.len() as f64
}

/// Dense row-major tensor of small integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Unsigned 8-bit `[C, H, W]` image consumed by the first layer.
pub type ByteImage = Tensor<u8>;
/// Signed 8-bit weights.
pub type WeightMatrix = Tensor<i8>;
/// Signed 32-bit pre-activation accumulators.
pub type AccumTensor = Tensor<i32>;

impl<T: Copy + Default> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if data.len() != shape_len(shape) {
            return Err(Error::Shape(format!(
                "{} values supplied for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::default(); shape_len(shape)],
        }
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: (0..shape_len(shape)).map(f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, index: &[usize]) -> T {
        self.data[row_major_offset(&self.shape, index)]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape_len(shape) != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }
}

/// Binary plane `b` of an 8-bit image: `(img >> b) & 1`, same `[C, H, W]` shape.
pub fn extract_bitplane(img: &ByteImage, b: u32) -> Result<Tensor<u8>> {
    if b > 7 {
        return Err(Error::Argument(format!("bit index {b} outside 0..=7")));
    }
    Ok(Tensor::from_fn(img.shape(), |i| (img.data()[i] >> b) & 1))
}

impl SpikeTensor {
    /// Replicates a binary `[C, H, W]` plane across `timesteps` slices.
    pub fn from_plane(plane: &Tensor<u8>, timesteps: usize) -> Result<Self> {
        let mut shape = vec![timesteps];
        shape.extend_from_slice(plane.shape());
        let slice = plane.len();
        if let Some(bad) = plane.data().iter().find(|&&v| v > 1) {
            return Err(Error::Argument(format!("plane value {bad} is not binary")));
        }
        Self::from_fn(&shape, |i| plane.data()[i % slice] == 1)
    }
}
