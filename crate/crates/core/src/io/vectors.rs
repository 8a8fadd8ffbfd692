use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::DescriptorSet;

/// Decodes records of `i32 d` followed by `d` little-endian `f32`s. Returns the
/// common dimension and the row-major values.
pub fn decode_vectors(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let mut offset = 0usize;
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    while offset < bytes.len() {
        let header = bytes.get(offset..offset + 4).ok_or_else(|| Error::Format {
            offset: offset as u64,
            reason: "truncated dimension header".into(),
        })?;
        let d = i32::from_le_bytes(header.try_into().unwrap());
        if d <= 0 {
            return Err(Error::Format {
                offset: offset as u64,
                reason: format!("non-positive dimension {d}"),
            });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::Format {
                    offset: offset as u64,
                    reason: format!("dimension {d} differs from first record's {expected}"),
                })
            }
            _ => {}
        }
        let body_start = offset + 4;
        let body = bytes.get(body_start..body_start + 4 * d).ok_or_else(|| Error::Format {
            offset: body_start as u64,
            reason: format!("record needs {} bytes, {} left", 4 * d, bytes.len() - body_start),
        })?;
        for (k, chunk) in body.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: (body_start + 4 * k) as u64,
                    reason: "non-finite component".into(),
                });
            }
            data.push(v as f64);
        }
        offset = body_start + 4 * d;
    }
    match dim {
        Some(d) => Ok((d, data)),
        None => Err(Error::Format {
            offset: 0,
            reason: "empty file".into(),
        }),
    }
}

/// Encodes every row as `i32 d` + `d` `f32`s.
pub fn encode_vectors(set: &DescriptorSet) -> Vec<u8> {
    let d = set.dim();
    let mut out = Vec::with_capacity(set.len() * (4 + 4 * d));
    for row in set.rows() {
        out.extend_from_slice(&(d as i32).to_le_bytes());
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut ids = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        let id = line.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::Parse {
                line: n + 1,
                reason: format!("invalid identifier {line:?}"),
            });
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

pub fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for id in ids {
        writeln!(f, "{id}")?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a descriptor file and an optional identifier sidecar.
pub fn read_descriptors(path: &Path, ids: Option<&Path>) -> Result<DescriptorSet> {
    let bytes = fs::read(path)?;
    let (dim, data) = decode_vectors(&bytes)?;
    let ids = ids.map(read_ids).transpose()?;
    DescriptorSet::from_flat(dim, data, ids)
}

pub fn write_descriptors(path: &Path, set: &DescriptorSet) -> Result<()> {
    fs::write(path, encode_vectors(set))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_exact_layout() {
        let set = DescriptorSet::from_rows(&[vec![1.0, -2.5], vec![0.5, 0.0]]).unwrap();
        let bytes = encode_vectors(&set);
        let mut want = Vec::new();
        for row in [[1.0f32, -2.5], [0.5, 0.0]] {
            want.extend_from_slice(&2i32.to_le_bytes());
            for v in row {
                want.extend_from_slice(&v.to_le_bytes());
            }
        }
        assert_eq!(bytes, want);
    }

    #[test]
    fn errors_name_offsets() {
        let set = DescriptorSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut bytes = encode_vectors(&set);
        bytes.truncate(bytes.len() - 2);
        match decode_vectors(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
        let mut mixed = encode_vectors(&set);
        mixed.extend_from_slice(&3i32.to_le_bytes());
        mixed.extend_from_slice(&[0u8; 12]);
        match decode_vectors(&mixed) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 24),
            other => panic!("{other:?}"),
        }
        assert!(decode_vectors(&[]).is_err());
        assert!(decode_vectors(&(-1i32).to_le_bytes()).is_err());
    }

    #[test]
    fn sidecar_ids() {
        let dir = tempfile::tempdir().unwrap();
        let set = DescriptorSet::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        write_descriptors(&dir.path().join("x.fvecs"), &set).unwrap();
        write_ids(&dir.path().join("x.ids"), &["a".into(), "b".into()]).unwrap();
        let back = read_descriptors(&dir.path().join("x.fvecs"), Some(&dir.path().join("x.ids"))).unwrap();
        assert_eq!(back.ids(), &["a".to_string(), "b".to_string()]);
        let plain = read_descriptors(&dir.path().join("x.fvecs"), None).unwrap();
        assert_eq!(plain.ids(), &["0".to_string(), "1".to_string()]);
        write_ids(&dir.path().join("short.ids"), &["a".into()]).unwrap();
        assert!(read_descriptors(&dir.path().join("x.fvecs"), Some(&dir.path().join("short.ids"))).is_err());
    }

    proptest! {
        #[test]
        fn f32_values_roundtrip(rows in (1usize..6).prop_flat_map(|d| proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, d), 1..8))) {
            let set = DescriptorSet::from_rows(&rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect::<Vec<_>>()).unwrap();
            let (d, data) = decode_vectors(&encode_vectors(&set)).unwrap();
            prop_assert_eq!(d, set.dim());
            prop_assert_eq!(data, set.as_flat().to_vec());
        }
    }
}
