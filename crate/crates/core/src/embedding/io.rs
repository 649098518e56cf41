//! Binary (`CPCE`) and CSV embedding files.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! "CPCE" | version u32 = 1 | n u64 | d u64 | meta_flag u8
//! n*d f64, row-major
//! if meta_flag == 1: n * (identity u32, clothes u32, camera u32, timestamp u64)
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureMatrix, SampleMeta, SampleRecord};
use crate::error::{CpcError, Result};

const MAGIC: &[u8; 4] = b"CPCE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;
const RECORD_LEN: usize = 4 + 4 + 4 + 8;

pub fn encode(f: &FeatureMatrix, meta: Option<&SampleMeta>) -> Result<Vec<u8>> {
    if let Some(m) = meta {
        if m.len() != f.rows() {
            return Err(CpcError::DimensionMismatch {
                expected: f.rows(),
                found: m.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(
        HEADER_LEN + f.as_slice().len() * 8 + meta.map_or(0, |m| m.len() * RECORD_LEN),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(f.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(f.dim() as u64).to_le_bytes());
    out.push(meta.is_some() as u8);
    for v in f.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(m) = meta {
        for r in &m.records {
            out.extend_from_slice(&r.identity.to_le_bytes());
            out.extend_from_slice(&r.clothes.to_le_bytes());
            out.extend_from_slice(&r.camera.to_le_bytes());
            out.extend_from_slice(&r.timestamp.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        a
    }
}

pub fn decode(bytes: &[u8]) -> Result<(FeatureMatrix, Option<SampleMeta>)> {
    if bytes.len() < HEADER_LEN {
        return Err(CpcError::MalformedHeader(format!(
            "file is {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    if &r.take::<4>() != MAGIC {
        return Err(CpcError::MalformedHeader("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take());
    if version != VERSION {
        return Err(CpcError::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let n = u64::from_le_bytes(r.take());
    let d = u64::from_le_bytes(r.take());
    let meta_flag = r.take::<1>()[0];
    if meta_flag > 1 {
        return Err(CpcError::MalformedHeader(format!("meta flag {meta_flag}")));
    }
    if n == 0 {
        return Err(CpcError::EmptyDataset);
    }
    if d == 0 {
        return Err(CpcError::MalformedHeader("d = 0".into()));
    }
    let payload = (n as u128) * (d as u128) * 8
        + if meta_flag == 1 {
            n as u128 * RECORD_LEN as u128
        } else {
            0
        };
    let expected = HEADER_LEN as u128 + payload;
    if (bytes.len() as u128) < expected {
        return Err(CpcError::TruncatedPayload {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            found: bytes.len(),
        });
    }
    if (bytes.len() as u128) > expected {
        return Err(CpcError::MalformedHeader(format!(
            "{} trailing bytes",
            bytes.len() as u128 - expected
        )));
    }
    let (n, d) = (n as usize, d as usize);
    let data: Vec<f64> = (0..n * d).map(|_| f64::from_le_bytes(r.take())).collect();
    let f = FeatureMatrix::new(n, d, data)?;
    let meta = if meta_flag == 1 {
        let records = (0..n)
            .map(|_| SampleRecord {
                identity: u32::from_le_bytes(r.take()),
                clothes: u32::from_le_bytes(r.take()),
                camera: u32::from_le_bytes(r.take()),
                timestamp: u64::from_le_bytes(r.take()),
            })
            .collect();
        Some(SampleMeta { records })
    } else {
        None
    };
    Ok((f, meta))
}

pub fn save_embeddings(
    path: impl AsRef<Path>,
    f: &FeatureMatrix,
    meta: Option<&SampleMeta>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(f, meta)?).map_err(|e| CpcError::io(path, e))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(FeatureMatrix, Option<SampleMeta>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CpcError::io(path, e))?;
    decode(&bytes)
}

/// Parses `id,clothes,camera,timestamp,f0,..,f{d-1}` with a header line.
pub fn parse_csv(text: &str) -> Result<(FeatureMatrix, SampleMeta)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(CpcError::EmptyDataset)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 5 || cols[..4] != ["id", "clothes", "camera", "timestamp"] {
        return Err(CpcError::Csv {
            line: 1,
            reason: "header must start with id,clothes,camera,timestamp,f0".into(),
        });
    }
    let d = cols.len() - 4;
    for (k, c) in cols[4..].iter().enumerate() {
        if *c != format!("f{k}") {
            return Err(CpcError::Csv {
                line: 1,
                reason: format!("expected column f{k}, found `{c}`"),
            });
        }
    }
    let mut data = Vec::new();
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 4 {
            return Err(CpcError::Csv {
                line: lineno,
                reason: format!("expected {} fields, found {}", d + 4, fields.len()),
            });
        }
        let int = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| CpcError::Csv {
                line: lineno,
                reason: format!("`{s}` is not a non-negative integer"),
            })
        };
        let small = |s: &str| -> Result<u32> {
            u32::try_from(int(s)?).map_err(|_| CpcError::Csv {
                line: lineno,
                reason: format!("`{s}` exceeds u32"),
            })
        };
        records.push(SampleRecord {
            identity: small(fields[0])?,
            clothes: small(fields[1])?,
            camera: small(fields[2])?,
            timestamp: int(fields[3])?,
        });
        for s in &fields[4..] {
            data.push(s.parse::<f64>().map_err(|_| CpcError::Csv {
                line: lineno,
                reason: format!("`{s}` is not a number"),
            })?);
        }
    }
    let f = FeatureMatrix::new(records.len(), d, data)?;
    Ok((f, SampleMeta::new(records)?))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<(FeatureMatrix, SampleMeta)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CpcError::io(path, e))?;
    parse_csv(&text)
}

pub fn write_csv(path: impl AsRef<Path>, f: &FeatureMatrix, meta: &SampleMeta) -> Result<()> {
    use std::fmt::Write;
    let mut out = String::from("id,clothes,camera,timestamp");
    for k in 0..f.dim() {
        let _ = write!(out, ",f{k}");
    }
    out.push('\n');
    for (row, r) in f.iter_rows().zip(&meta.records) {
        let _ = write!(out, "{},{},{},{}", r.identity, r.clothes, r.camera, r.timestamp);
        for v in row {
            // `{:?}` prints the shortest representation that round-trips.
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| CpcError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trips_small_matrix() {
        let f = FeatureMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let (g, meta) = decode(&encode(&f, None).unwrap()).unwrap();
        assert_eq!(g, f);
        assert!(meta.is_none());
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&3u64.to_le_bytes());
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(CpcError::EmptyDataset)));
    }

    #[test]
    fn header_truncation_and_nan_have_distinct_errors() {
        let f = FeatureMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let bytes = encode(&f, None).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(CpcError::MalformedHeader(_))));

        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(CpcError::TruncatedPayload { .. })
        ));

        let mut nan = bytes.clone();
        nan[HEADER_LEN + 8..HEADER_LEN + 16].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode(&nan),
            Err(CpcError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let f = FeatureMatrix::from_rows(&[[0.1, -2.5], [3.0, 1e-17]]).unwrap();
        let meta = SampleMeta::new(vec![
            SampleRecord { identity: 0, clothes: 0, camera: 1, timestamp: 5 },
            SampleRecord { identity: 1, clothes: 3, camera: 0, timestamp: 9 },
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv(&path, &f, &meta).unwrap();
        let (g, m) = load_csv(&path).unwrap();
        assert_eq!(g, f);
        assert_eq!(m, meta);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(matches!(
            parse_csv("a,b,c,d,f0\n1,2,3,4,5\n"),
            Err(CpcError::Csv { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn save_then_load_is_identity(
            (n, d, data, with_meta) in (1usize..6, 1usize..5, any::<bool>()).prop_flat_map(|(n, d, m)| {
                (Just(n), Just(d), prop::collection::vec(-1e6f64..1e6, n * d), Just(m))
            }),
            ids in prop::collection::vec((0u32..4, 0u32..3, any::<u64>()), 6),
        ) {
            let f = FeatureMatrix::new(n, d, data).unwrap();
            let meta = with_meta.then(|| SampleMeta {
                records: ids[..n]
                    .iter()
                    .map(|&(identity, camera, timestamp)| SampleRecord {
                        identity,
                        clothes: identity * 10,
                        camera,
                        timestamp,
                    })
                    .collect(),
            });
            let bytes = encode(&f, meta.as_ref()).unwrap();
            let (g, m) = decode(&bytes).unwrap();
            prop_assert_eq!(
                g.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                f.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(m, meta);
        }
    }
}
