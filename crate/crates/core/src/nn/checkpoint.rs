//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "STHOI"            5 bytes magic
//! version            u32 (currently 1)
//! count              u32 number of parameters
//! per parameter:
//!   name_len         u32, then name_len bytes of UTF-8
//!   rank             u32, then rank × u64 dimensions
//!   values           product(dims) × f64
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: &[u8; 5] = b"STHOI";
pub const VERSION: u32 = 1;

pub fn write_checkpoint(store: &ParamStore, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, name, p) in store.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(p.value.rank() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn checkpoint_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(store, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(input)?))
}

/// Parameters in file order.
pub fn read_checkpoint(input: &mut impl Read) -> Result<Vec<(String, Tensor)>> {
    let magic: [u8; 5] = read_array(input)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(input)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(input)? as usize;
        let mut name = vec![0u8; name_len];
        input
            .read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated name: {e}")))?;
        let name =
            String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rank = read_u32(input)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_array(input)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_array(input)?));
        }
        let t = Tensor::from_vec(&shape, data)
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        out.push((name, t));
    }
    let mut rest = [0u8; 1];
    if input
        .read(&mut rest)
        .map_err(|e| Error::Checkpoint(e.to_string()))?
        != 0
    {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}
