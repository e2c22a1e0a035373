//! Little-endian binary checkpoints:
//!
//! ```text
//! "RBSG" | version u32 | d_in hidden layers g_hidden outputs u32 | rooted u8
//! | input tag u8, len u32, values u32... | theta, shift, scale: len u64, f64...
//! ```

use std::io::Read;
use std::path::Path;

use super::{InputMode, ModelDims, ModelParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RBSG";

fn put_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn to_bytes(p: &ModelParams) -> Vec<u8> {
    let d = &p.dims;
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for x in [d.d_in, d.hidden, d.layers, d.g_hidden, d.outputs] {
        put_u32(&mut out, x);
    }
    out.push(u8::from(d.rooted));
    let (tag, vals): (u8, Vec<usize>) = match &p.input {
        InputMode::ConstantOne => (0, vec![]),
        InputMode::DegreeBuckets(b) => (1, b.clone()),
        InputMode::Features(k) => (2, vec![*k]),
    };
    out.push(tag);
    put_u32(&mut out, vals.len());
    for v in vals {
        put_u32(&mut out, v);
    }
    put_f64s(&mut out, &p.theta);
    put_f64s(&mut out, &p.shift);
    put_f64s(&mut out, &p.scale);
    out
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::InvalidArgument("truncated checkpoint".into()));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize;
        if n > self.0.len() / 8 {
            return Err(Error::InvalidArgument("truncated checkpoint".into()));
        }
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::InvalidArgument("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::InvalidArgument(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let dims = ModelDims {
        d_in: r.u32()?,
        hidden: r.u32()?,
        layers: r.u32()?,
        g_hidden: r.u32()?,
        outputs: r.u32()?,
        rooted: r.u8()? != 0,
    };
    let tag = r.u8()?;
    let len = r.u32()?;
    let vals = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let input = match (tag, vals.as_slice()) {
        (0, []) => InputMode::ConstantOne,
        (1, b) => InputMode::DegreeBuckets(b.to_vec()),
        (2, [k]) => InputMode::Features(*k),
        _ => {
            return Err(Error::InvalidArgument(
                "bad input mode in checkpoint".into(),
            ))
        }
    };
    let p = ModelParams {
        dims,
        input,
        theta: r.f64s()?,
        shift: r.f64s()?,
        scale: r.f64s()?,
    };
    if !r.0.is_empty() {
        return Err(Error::InvalidArgument(
            "trailing bytes in checkpoint".into(),
        ));
    }
    p.validate()?;
    Ok(p)
}

pub fn save_checkpoint(p: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(p))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let dims = ModelDims {
            d_in: 3,
            hidden: 4,
            layers: 2,
            g_hidden: 5,
            outputs: 2,
            rooted: true,
        };
        let p = ModelParams::init(dims, InputMode::DegreeBuckets(vec![1, 4]), 3).unwrap();
        let bytes = to_bytes(&p);
        assert_eq!(from_bytes(&bytes).unwrap(), p);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(from_bytes(&bad).is_err());
        assert!(from_bytes(b"nope").is_err());
    }
}
