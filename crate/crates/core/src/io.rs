// SPDX-License-Identifier: Apache-2.0

//! Binary tensor files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VSTA"
//! 4       4     version (u32 LE, currently 1)
//! 8       4     dtype tag (u32 LE, see `DType`)
//! 12      4     rank (u32 LE)
//! 16      4*r   dims (u32 LE each)
//! ...           payload
//! ```
//!
//! Spike payloads are the packed `u64` words written little-endian; `u8`/`i8`
//! payloads are raw bytes; `i32` payloads are little-endian words.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{AccumTensor, ByteImage, SpikeTensor, Tensor, WeightMatrix, WORD_BITS};

pub const MAGIC: [u8; 4] = *b"VSTA";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum DType {
    Spike = 0,
    U8 = 1,
    I8 = 2,
    I32 = 3,
}

impl DType {
    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            0 => DType::Spike,
            1 => DType::U8,
            2 => DType::I8,
            3 => DType::I32,
            other => return Err(Error::Format(format!("unknown dtype tag {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TensorFile {
    Spike(SpikeTensor),
    U8(ByteImage),
    I8(WeightMatrix),
    I32(AccumTensor),
}

impl TensorFile {
    pub fn dtype(&self) -> DType {
        match self {
            TensorFile::Spike(_) => DType::Spike,
            TensorFile::U8(_) => DType::U8,
            TensorFile::I8(_) => DType::I8,
            TensorFile::I32(_) => DType::I32,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            TensorFile::Spike(t) => t.shape(),
            TensorFile::U8(t) => t.shape(),
            TensorFile::I8(t) => t.shape(),
            TensorFile::I32(t) => t.shape(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let shape = self.shape();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * shape.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dtype() as u32).to_le_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format(format!("dimension {d} does not fit in u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        match self {
            TensorFile::Spike(t) => t
                .words()
                .iter()
                .for_each(|w| out.extend_from_slice(&w.to_le_bytes())),
            TensorFile::U8(t) => out.extend_from_slice(t.data()),
            TensorFile::I8(t) => out.extend(t.data().iter().map(|&v| v as u8)),
            TensorFile::I32(t) => t
                .data()
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let word = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = DType::from_tag(word(8))?;
        let rank = word(12) as usize;
        let dims_end = HEADER_LEN + 4 * rank;
        if bytes.len() < dims_end {
            return Err(Error::Format("truncated dimension list".into()));
        }
        let shape: Vec<usize> = (0..rank)
            .map(|i| word(HEADER_LEN + 4 * i) as usize)
            .collect();
        let count: usize = shape.iter().product();
        let payload = &bytes[dims_end..];
        let expected = match dtype {
            DType::Spike => count.div_ceil(WORD_BITS) * 8,
            DType::U8 | DType::I8 => count,
            DType::I32 => count * 4,
        };
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, shape {:?} of {:?} needs {}",
                payload.len(),
                shape,
                dtype,
                expected
            )));
        }
        Ok(match dtype {
            DType::Spike => {
                let words = payload
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                TensorFile::Spike(SpikeTensor::from_words(&shape, words)?)
            }
            DType::U8 => TensorFile::U8(Tensor::new(&shape, payload.to_vec())?),
            DType::I8 => TensorFile::I8(Tensor::new(
                &shape,
                payload.iter().map(|&b| b as i8).collect(),
            )?),
            DType::I32 => TensorFile::I32(Tensor::new(
                &shape,
                payload
                    .chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )?),
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Loads a `[C, H, W]` image from a `u8` tensor file.
pub fn load_image(path: impl AsRef<Path>) -> Result<ByteImage> {
    match TensorFile::load(path)? {
        TensorFile::U8(img) if img.shape().len() == 3 => Ok(img),
        other => Err(Error::Format(format!(
            "expected a rank-3 u8 image, found {:?} of shape {:?}",
            other.dtype(),
            other.shape()
        ))),
    }
}
