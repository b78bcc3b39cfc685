//! Versioned binary checkpoint format for parameter stores.
//!
//! Layout (little-endian):
//!   magic "PPCK" | u16 version | u32 entry count
//!   per entry: u16 name length | name bytes | u8 ndim | u32 dims... | f64 data
//!
//! Round trips are bit-exact: values are written as raw IEEE-754 bits.

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::{Params, Tensor};
use super::AutodiffError;

const MAGIC: &[u8; 4] = b"PPCK";
const VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(params: &Params, mut w: W) -> Result<(), AutodiffError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&[t.shape.len() as u8])?;
        for d in &t.shape {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for x in &t.data {
            w.write_all(&x.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Params, AutodiffError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AutodiffError::Checkpoint("bad magic".into()));
    }
    let mut buf2 = [0u8; 2];
    r.read_exact(&mut buf2)?;
    let version = u16::from_le_bytes(buf2);
    if version != VERSION {
        return Err(AutodiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4);
    let mut params = Params::new();
    for _ in 0..count {
        r.read_exact(&mut buf2)?;
        let name_len = u16::from_le_bytes(buf2) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| AutodiffError::Checkpoint("non-utf8 parameter name".into()))?;
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let ndim = b1[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            r.read_exact(&mut buf4)?;
            shape.push(u32::from_le_bytes(buf4) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf8 = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf8)?;
            data.push(f64::from_bits(u64::from_le_bytes(buf8)));
        }
        params.insert(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

pub fn save_checkpoint(params: &Params, path: &Path) -> Result<(), AutodiffError> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(params, std::io::BufWriter::new(f))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Params, AutodiffError> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut params = Params::new();
        params.insert("layer.w", Tensor::matrix(2, 3, vec![0.1, -0.2, 1e-300, 3.7, f64::MIN_POSITIVE, 42.0]).unwrap());
        params.insert("layer.b", Tensor::vector(vec![-0.0, 1.0 / 3.0]));
        let mut buf = Vec::new();
        write_checkpoint(&params, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        for (name, t) in params.iter() {
            let rt = back.get(name).unwrap();
            assert_eq!(rt.shape, t.shape);
            let bits: Vec<u64> = t.data.iter().map(|x| x.to_bits()).collect();
            let rt_bits: Vec<u64> = rt.data.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits, rt_bits);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE"[..]).is_err());
    }
}
