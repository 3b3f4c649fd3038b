//! "VHFR" raw frame container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"VHFR" | u32 version (=1) | u32 width | u32 height | u32 frame_count
//! frame_count pages of height × width × 3 bytes (row-major, RGB)
//! ```

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const VHFR_MAGIC: &[u8; 4] = b"VHFR";
pub const VHFR_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// All frames of one video as 8-bit RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub data: Vec<u8>,
}

impl FrameStack {
    pub fn new(width: usize, height: usize, frame_count: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || frame_count == 0 {
            return Err(Error::Frames(format!(
                "empty stack {width}×{height}×{frame_count}"
            )));
        }
        if data.len() != width * height * 3 * frame_count {
            return Err(Error::Frames(format!(
                "{} bytes for {frame_count} frames of {width}×{height}",
                data.len()
            )));
        }
        Ok(FrameStack {
            width,
            height,
            frame_count,
            data,
        })
    }

    pub fn page_len(&self) -> usize {
        self.width * self.height * 3
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.data[i * self.page_len()..(i + 1) * self.page_len()]
    }

    /// `3 × T × H × W` tensor in [0, 1] for the listed frames.
    pub fn to_tensor(&self, frames: &[usize]) -> Result<Tensor> {
        let (h, w, tn) = (self.height, self.width, frames.len());
        let plane = h * w;
        let mut out = vec![0.0; 3 * tn * plane];
        for (t, &f) in frames.iter().enumerate() {
            if f >= self.frame_count {
                return Err(Error::Frames(format!(
                    "frame {f} beyond count {}",
                    self.frame_count
                )));
            }
            for (p, px) in self.frame(f).chunks_exact(3).enumerate() {
                for c in 0..3 {
                    out[(c * tn + t) * plane + p] = px[c] as f64 / 255.0;
                }
            }
        }
        Tensor::from_vec(&[3, tn, h, w], out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        out.extend_from_slice(VHFR_MAGIC);
        for v in [
            VHFR_VERSION,
            self.width as u32,
            self.height as u32,
            self.frame_count as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Frames("truncated header".into()));
        }
        if &bytes[..4] != VHFR_MAGIC {
            return Err(Error::Frames("bad magic".into()));
        }
        let word =
            |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) != VHFR_VERSION as usize {
            return Err(Error::Frames(format!("unsupported version {}", word(0))));
        }
        let (width, height, count) = (word(1), word(2), word(3));
        let body = &bytes[HEADER_LEN..];
        let want = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(3))
            .and_then(|v| v.checked_mul(count))
            .ok_or_else(|| Error::Frames("dimensions overflow".into()))?;
        if body.len() != want {
            return Err(Error::Frames(format!(
                "body has {} bytes, header implies {want}",
                body.len()
            )));
        }
        FrameStack::new(width, height, count, body.to_vec())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Quantize a value in [0, 1] to a byte.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = FrameStack::new(2, 1, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let b = s.to_bytes();
        assert_eq!(&b[..4], b"VHFR");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..16], &[1, 0, 0, 0]);
        assert_eq!(&b[16..20], &[1, 0, 0, 0]);
        assert_eq!(&b[20..], &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_corruption() {
        let s = FrameStack::new(2, 2, 2, vec![7; 24]).unwrap();
        let b = s.to_bytes();
        assert!(FrameStack::from_bytes(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(FrameStack::from_bytes(&extra).is_err());
        let mut magic = b.clone();
        magic[0] = b'X';
        assert!(FrameStack::from_bytes(&magic).is_err());
        let mut version = b;
        version[4] = 9;
        assert!(FrameStack::from_bytes(&version).is_err());
    }

    #[test]
    fn tensor_layout() {
        // one 1×2 frame: pixel0 = (255, 0, 51), pixel1 = (0, 255, 102)
        let s = FrameStack::new(2, 1, 1, vec![255, 0, 51, 0, 255, 102]).unwrap();
        let t = s.to_tensor(&[0, 0]).unwrap();
        assert_eq!(t.shape(), &[3, 2, 1, 2]);
        assert_eq!(t.at(&[0, 1, 0, 0]), 1.0);
        assert_eq!(t.at(&[1, 0, 0, 1]), 1.0);
        assert!((t.at(&[2, 0, 0, 1]) - 0.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..5, h in 1usize..5, n in 1usize..4, seed in any::<u64>()) {
            let data: Vec<u8> = (0..w * h * 3 * n).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let s = FrameStack::new(w, h, n, data).unwrap();
            let bytes = s.to_bytes();
            let back = FrameStack::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
