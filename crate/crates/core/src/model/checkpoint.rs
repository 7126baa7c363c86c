//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "EPCKPT\0\0"
//! version  u32
//! variant  u8, then 3 zero bytes
//! dims     8 x u32  d_raw d_enc d_feat d_hidden head0 head1 classes segments
//! config   u32 length + UTF-8 JSON echo of the producing configuration
//! count    u32 number of tensors
//! tensor*  u16 name length, name, u8 ndim, ndim x u32, values as f64
//! digest   u64 first 8 bytes of SHA-256 over everything above
//! ```

use std::path::Path;

use super::bundle::{ModelBundle, ModelDims, Variant};
use crate::binio::{digest64, read_file, write_file, Reader, Writer};
use crate::diffcore::Module;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EPCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub bundle: ModelBundle,
    pub config_echo: String,
}

pub fn encode_checkpoint(bundle: &ModelBundle, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u8(bundle.variant().code());
    w.bytes(&[0, 0, 0]);
    let d = bundle.dims;
    for v in [
        d.d_raw,
        d.d_enc,
        d.d_feat,
        d.d_hidden,
        d.head_widths[0],
        d.head_widths[1],
        d.classes,
        d.segments,
    ] {
        w.u32(v as u32);
    }
    w.u32(config_echo.len() as u32);
    w.bytes(config_echo.as_bytes());
    let params = bundle.named_params();
    w.u32(params.len() as u32);
    for (name, p) in params {
        w.u16(name.len() as u16);
        w.bytes(name.as_bytes());
        w.u8(p.value.ndim() as u8);
        for &s in p.value.shape() {
            w.u32(s as u32);
        }
        w.f64s(p.value.data());
    }
    let digest = digest64(&w.buf);
    w.u64(digest);
    w.buf
}

pub fn save_checkpoint(path: &Path, bundle: &ModelBundle, config_echo: &str) -> Result<()> {
    write_file(path, &encode_checkpoint(bundle, config_echo))
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, path);
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "checkpoint",
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if bytes.len() < 8 {
        return Err(r.malformed("missing digest"));
    }
    let body = &bytes[..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let variant_code = r.u8()?;
    r.take(3)?;
    let mut dims = [0usize; 8];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let config_len = r.u32()? as usize;
    let config_echo = String::from_utf8(r.take(config_len)?.to_vec())
        .map_err(|_| r.malformed("config echo is not UTF-8"))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| r.malformed("tensor name is not UTF-8"))?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let values = r.f64s(n)?;
        tensors.push((name, shape, values));
    }
    if r.remaining() < 8 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed: r.position() + 8,
            found: bytes.len(),
        });
    }
    let computed = digest64(body);
    if computed != stored {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    if r.remaining() != 8 {
        return Err(r.malformed("trailing bytes after tensors"));
    }
    let variant = Variant::from_code(variant_code).ok_or_else(|| r.malformed(format!("unknown variant code {variant_code}")))?;
    let dims = ModelDims {
        d_raw: dims[0],
        d_enc: dims[1],
        d_feat: dims[2],
        d_hidden: dims[3],
        head_widths: [dims[4], dims[5]],
        classes: dims[6],
        segments: dims[7],
    };
    let mut bundle = ModelBundle::zeros(dims, variant)?;
    let names: Vec<(String, Vec<usize>)> = bundle
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.value.shape().to_vec()))
        .collect();
    if names.len() != tensors.len() {
        return Err(r.malformed(format!("expected {} tensors, found {}", names.len(), tensors.len())));
    }
    for ((expect_name, expect_shape), (name, shape, _)) in names.iter().zip(&tensors) {
        if expect_name != name || expect_shape != shape {
            return Err(r.malformed(format!("tensor {name} {shape:?} where {expect_name} {expect_shape:?} was expected")));
        }
    }
    for (p, (_, _, values)) in bundle.params_mut().into_iter().zip(tensors) {
        p.value.data_mut().copy_from_slice(&values);
    }
    Ok(Checkpoint { bundle, config_echo })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?, path)
}
