//! CSV and rawbin readers and writers.
//!
//! rawbin layout (little-endian): `b"CLPS"`, `u32` version (1), `u64` n,
//! `u64` d, `n*d` `f64` row-major, then `n` source bytes (0 = real,
//! k = synthetic iteration k, saturating at 255).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PointSet, SourceTag};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CLPS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Rawbin,
}

impl Format {
    /// `.bin` / `.rawbin` files are rawbin, everything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") || ext.eq_ignore_ascii_case("rawbin") => {
                Format::Rawbin
            }
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "rawbin" | "bin" => Ok(Format::Rawbin),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_pointset(path: &Path, format: Format) -> Result<PointSet> {
    match format {
        Format::Csv => read_csv(&fs::read_to_string(path)?),
        Format::Rawbin => read_rawbin(&fs::read(path)?),
    }
}

pub fn save_pointset(ps: &PointSet, path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Csv => write_csv(ps).into_bytes(),
        Format::Rawbin => write_rawbin(ps),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

fn parse_number(field: &str, line_no: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        Error::Format(format!(
            "line {line_no}: cannot parse {field:?} as a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Value(format!(
            "line {line_no}: non-finite value {field:?}"
        )));
    }
    Ok(v)
}

/// Parses CSV text. A first line that is not numeric is a header; a final
/// column named `source` (or, without a header, a non-numeric final column)
/// carries `real` / `synN` tags.
pub fn read_csv(text: &str) -> Result<PointSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let mut has_source: Option<bool> = None;
    if let Some(&(_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split(',').map(str::trim).collect();
        let numeric = |f: &&str| f.parse::<f64>().is_ok();
        let last_is_tag = fields
            .last()
            .is_some_and(|f| f.parse::<SourceTag>().is_ok());
        let body_numeric = fields[..fields.len() - 1].iter().all(numeric);
        let is_data =
            fields.iter().all(numeric) || (body_numeric && last_is_tag && fields.len() > 1);
        if !is_data {
            has_source = Some(
                fields
                    .last()
                    .is_some_and(|f| f.eq_ignore_ascii_case("source")),
            );
            lines.next();
        }
    }

    let mut data = Vec::new();
    let mut sources = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let tagged = *has_source.get_or_insert_with(|| {
            fields.len() > 1 && fields.last().unwrap().trim().parse::<f64>().is_err()
        });
        let (values, tag) = if tagged {
            let (tag, values) = fields.split_last().unwrap();
            (values, tag.parse::<SourceTag>()?)
        } else {
            (&fields[..], SourceTag::Real)
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Format(format!(
                    "line {line_no}: {} columns, expected {w}",
                    values.len()
                )))
            }
            _ => {}
        }
        for v in values {
            data.push(parse_number(v, line_no)?);
        }
        sources.push(tag);
    }
    let dim = match width {
        None => return Err(Error::EmptyDataset("CSV input has no data rows".into())),
        Some(0) => return Err(Error::Format("CSV rows have no numeric columns".into())),
        Some(w) => w,
    };
    PointSet::new(data, dim, sources)
}

/// Writes a header line, then one row per point with a trailing source
/// column. Numbers use the shortest representation that round-trips.
pub fn write_csv(ps: &PointSet) -> String {
    let mut out = String::new();
    for j in 0..ps.dim() {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("source\n");
    for (row, tag) in ps.rows().zip(ps.sources()) {
        for v in row {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&tag.to_string());
        out.push('\n');
    }
    out
}

pub fn write_rawbin(ps: &PointSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ps.as_flat().len() * 8 + ps.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ps.len() as u64).to_le_bytes());
    out.extend_from_slice(&(ps.dim() as u64).to_le_bytes());
    for v in ps.as_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(ps.sources().iter().map(|s| match s {
        SourceTag::Real => 0u8,
        SourceTag::Synthetic(k) => (*k).min(255) as u8,
    }));
    out
}

pub fn read_rawbin(bytes: &[u8]) -> Result<PointSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("rawbin header truncated".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad rawbin magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported rawbin version {version}"
        )));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if n == 0 {
        return Err(Error::EmptyDataset("rawbin file holds zero points".into()));
    }
    if d == 0 {
        return Err(Error::Format("rawbin dimension is zero".into()));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(8))
        .and_then(|b| b.checked_add(n))
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::Format("rawbin size overflows".into()))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Format(format!(
            "rawbin payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let (n, d) = (n as usize, d as usize);
    let payload_end = HEADER_LEN + n * d * 8;
    let data = bytes[HEADER_LEN..payload_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let sources = bytes[payload_end..]
        .iter()
        .map(|&b| match b {
            0 => SourceTag::Real,
            k => SourceTag::Synthetic(u32::from(k)),
        })
        .collect();
    PointSet::new(data, d, sources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_plain_rows() {
        let ps = read_csv("0.0,1.0\n2.0,3.0").unwrap();
        assert_eq!((ps.len(), ps.dim()), (2, 2));
        assert_eq!(ps.as_flat(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(ps.sources().iter().all(|s| s.is_real()));
    }

    #[test]
    fn csv_ragged_rows_rejected() {
        assert!(matches!(read_csv("0.0,1.0\n2.0"), Err(Error::Format(_))));
    }

    #[test]
    fn csv_non_finite_and_empty() {
        assert!(matches!(read_csv("1.0\nnan\n"), Err(Error::Value(_))));
        assert!(matches!(read_csv(""), Err(Error::EmptyDataset(_))));
        assert!(matches!(read_csv("a,b\n"), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn csv_header_and_source_column() {
        let ps = read_csv("x,y,source\n1,2,real\n3,4,syn2\n").unwrap();
        assert_eq!(ps.dim(), 2);
        assert_eq!(ps.sources(), &[SourceTag::Real, SourceTag::Synthetic(2)]);
        let headerless = read_csv("1,2,syn1\n3,4,real\n").unwrap();
        assert_eq!(headerless.dim(), 2);
        assert_eq!(headerless.source(0), SourceTag::Synthetic(1));
    }

    #[test]
    fn rawbin_parse() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"CLPS");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&3u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        for v in [0.0f64, 1.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0, 0, 4]);
        let ps = read_rawbin(&bytes).unwrap();
        assert_eq!((ps.len(), ps.dim()), (3, 1));
        assert_eq!(ps.as_flat(), &[0.0, 1.0, 3.0]);
        assert_eq!(ps.source(2), SourceTag::Synthetic(4));

        assert!(matches!(
            read_rawbin(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_rawbin(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn rawbin_caps_source_at_255() {
        let ps = PointSet::from_scalars(&[1.0])
            .unwrap()
            .with_source(SourceTag::Synthetic(300));
        let back = read_rawbin(&write_rawbin(&ps)).unwrap();
        assert_eq!(back.source(0), SourceTag::Synthetic(255));
    }

    fn arb_pointset() -> impl Strategy<Value = PointSet> {
        (1usize..4, 1usize..20).prop_flat_map(|(d, n)| {
            (
                prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, n * d),
                prop::collection::vec(0u32..6, n),
            )
                .prop_map(move |(data, tags)| {
                    let tags = tags
                        .into_iter()
                        .map(|k| {
                            if k == 0 {
                                SourceTag::Real
                            } else {
                                SourceTag::Synthetic(k)
                            }
                        })
                        .collect();
                    PointSet::new(data, d, tags).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn both_formats_round_trip_bit_exactly(ps in arb_pointset()) {
            prop_assert_eq!(&read_rawbin(&write_rawbin(&ps)).unwrap(), &ps);
            let back = read_csv(&write_csv(&ps)).unwrap();
            prop_assert_eq!(back.sources(), ps.sources());
            for (a, b) in back.as_flat().iter().zip(ps.as_flat()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
