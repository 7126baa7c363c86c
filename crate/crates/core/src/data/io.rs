//! Dataset files.
//!
//! Header (little-endian): 8-byte magic `EPDATA\0\0`, `u32` version,
//! `u32` classes, `u32` segments, `u32` d_raw, `u64` record count, `u64`
//! seed, `u64` checksum of the record bytes. Each record: `u64` id, `u32`
//! label, `u8` modality, 3 zero bytes, then `segments * d_raw` f64 values.

use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, FeatureSequence, Modality};
use crate::binio::{digest64, read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 8] = b"EPDATA\0\0";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 4 + 8 * 3;

pub fn encode_dataset(set: &Dataset) -> Vec<u8> {
    let mut rec = Writer::default();
    for s in &set.sequences {
        rec.u64(s.id);
        rec.u32(s.label as u32);
        rec.u8(s.modality.code());
        rec.bytes(&[0, 0, 0]);
        rec.f64s(s.segments.data());
    }
    let mut w = Writer::default();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.u32(set.classes as u32);
    w.u32(set.segments as u32);
    w.u32(set.d_raw as u32);
    w.u64(set.sequences.len() as u64);
    w.u64(set.seed);
    w.u64(digest64(&rec.buf));
    w.bytes(&rec.buf);
    w.buf
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut r = Reader::new(bytes, path);
    if r.take(8)? != DATASET_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "dataset",
        });
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let classes = r.u32()? as usize;
    let segments = r.u32()? as usize;
    let d_raw = r.u32()? as usize;
    let count = r.u64()? as usize;
    let seed = r.u64()?;
    let stored = r.u64()?;
    let record_len = 16 + segments * d_raw * 8;
    let needed = HEADER_LEN + count * record_len;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(r.malformed(format!("{} trailing bytes", bytes.len() - needed)));
    }
    let computed = digest64(&bytes[HEADER_LEN..]);
    if computed != stored {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let mut sequences = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.u64()?;
        let label = r.u32()? as usize;
        let modality = r.u8()?;
        r.take(3)?;
        let values = r.f64s(segments * d_raw)?;
        if label >= classes {
            return Err(r.malformed(format!("record {id}: label {label} >= {classes} classes")));
        }
        let modality = Modality::from_code(modality).ok_or_else(|| r.malformed(format!("record {id}: modality code {modality}")))?;
        sequences.push(FeatureSequence {
            id,
            label,
            modality,
            segments: Tensor::new(vec![segments, d_raw], values)?,
        });
    }
    Ok(Dataset {
        classes,
        segments,
        d_raw,
        seed,
        sequences,
    })
}

pub fn save_dataset(path: &Path, set: &Dataset) -> Result<()> {
    write_file(path, &encode_dataset(set))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?, path)
}

/// One line per record: `id,label,modality,v0,v1,...` after a header line.
pub fn export_text(path: &Path, set: &Dataset) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# classes={} segments={} d_raw={} count={} seed={}",
        set.classes,
        set.segments,
        set.d_raw,
        set.len(),
        set.seed
    );
    for s in &set.sequences {
        let _ = write!(out, "{},{},{}", s.id, s.label, s.modality.tag());
        for v in s.segments.data() {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, SynthSpec};

    fn sample() -> Dataset {
        let spec = SynthSpec {
            n_train: 100,
            n_test: 3,
            ..SynthSpec::default()
        };
        synthesize(&spec).unwrap().0
    }

    #[test]
    fn empty_round_trip() {
        let set = Dataset {
            classes: 4,
            segments: 10,
            d_raw: 3,
            seed: 1,
            sequences: vec![],
        };
        let back = decode_dataset(&encode_dataset(&set), Path::new("m")).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn hundred_sequence_round_trip() {
        let set = sample();
        assert_eq!(set.len(), 100);
        let back = decode_dataset(&encode_dataset(&set), Path::new("m")).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn distinct_errors() {
        let bytes = encode_dataset(&sample());
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 3] ^= 1;
        assert!(matches!(decode_dataset(&flipped, Path::new("m")), Err(Error::Checksum { .. })));
        assert!(matches!(decode_dataset(&bytes[..n - 1], Path::new("m")), Err(Error::Truncated { .. })));
        assert!(matches!(decode_dataset(&bytes[..20], Path::new("m")), Err(Error::Truncated { .. })));
        let mut v = bytes.clone();
        v[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_dataset(&v, Path::new("m")), Err(Error::Version { found: 2, .. })));
        let mut m = bytes;
        m[0] = b'X';
        assert!(matches!(decode_dataset(&m, Path::new("m")), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn text_export_has_one_line_per_record() {
        let set = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        export_text(&p, &set).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), set.len() + 1);
        let fields: Vec<_> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 3 + set.segments * set.d_raw);
        assert_eq!(fields[2], "a");
    }
}
