//! Dataset files.
//!
//! CSV (canonical): an optional `# class_count=C` line, then a header
//! `id,label,clean_label,f0,...,f{F-1}` and one row per sample; `clean_label`
//! is left empty when no ground truth exists.
//!
//! Binary twin (little-endian): magic `NLF1`, `u64` N, `u32` F, `u32` C,
//! `u8` has-clean flag, then `u64` ids, `u32` labels, `u32` clean labels (if
//! flagged) and row-major `f64` features.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

use super::dataset::{Dataset, SampleId};

pub const BINARY_MAGIC: &[u8; 4] = b"NLF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl DatasetFormat {
    /// `.bin` / `.nlf` select the binary twin; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("nlf") => DatasetFormat::Binary,
            _ => DatasetFormat::Csv,
        }
    }
}

pub fn encode_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# class_count={}", ds.class_count());
    out.push_str("id,label,clean_label");
    for j in 0..ds.feature_dim() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    let features = ds.features();
    for i in 0..ds.len() {
        let _ = write!(out, "{},{},", ds.ids()[i], ds.labels()[i]);
        if let Some(clean) = ds.clean_labels() {
            let _ = write!(out, "{}", clean[i]);
        }
        for v in features.row(i) {
            // `{:?}` is the shortest representation that round-trips exactly.
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn decode_csv(text: &str) -> Result<Dataset> {
    let mut offset = 0usize;
    let mut class_count: Option<usize> = None;
    let mut header: Option<usize> = None;
    let mut ids: Vec<SampleId> = Vec::new();
    let mut labels = Vec::new();
    let mut clean: Vec<Option<usize>> = Vec::new();
    let mut values = Vec::new();

    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            continue;
        }
        if !line.ends_with('\n') {
            return Err(parse_err(line_start, "truncated file: last line has no terminating newline"));
        }
        if let Some(comment) = content.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("class_count=") {
                class_count = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| parse_err(line_start, format!("bad class count `{v}`")))?,
                );
            }
            continue;
        }
        let Some(width) = header else {
            let cols: Vec<&str> = content.split(',').map(str::trim).collect();
            if cols.len() < 3 || cols[..3] != ["id", "label", "clean_label"] {
                return Err(parse_err(
                    line_start,
                    "header must start with `id,label,clean_label`",
                ));
            }
            for (j, c) in cols[3..].iter().enumerate() {
                if *c != format!("f{j}") {
                    return Err(parse_err(line_start, format!("expected column `f{j}`, found `{c}`")));
                }
            }
            header = Some(cols.len() - 3);
            continue;
        };
        let mut field_start = line_start;
        let mut fields = Vec::with_capacity(width + 3);
        for f in content.split(',') {
            fields.push((field_start, f.trim()));
            field_start += f.len() + 1;
        }
        if fields.len() != width + 3 {
            return Err(parse_err(
                line_start,
                format!("expected {} fields, found {}", width + 3, fields.len()),
            ));
        }
        let int = |(at, s): (usize, &str), what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| parse_err(at, format!("invalid {what} `{s}`")))
        };
        ids.push(int(fields[0], "id")?);
        labels.push(int(fields[1], "label")? as usize);
        clean.push(if fields[2].1.is_empty() {
            None
        } else {
            Some(int(fields[2], "clean label")? as usize)
        });
        for &(at, s) in &fields[3..] {
            values.push(
                s.parse::<f64>()
                    .map_err(|_| parse_err(at, format!("invalid feature value `{s}`")))?,
            );
        }
    }

    let width = header.ok_or_else(|| parse_err(offset, "missing header line"))?;
    let has_clean = clean.iter().any(Option::is_some);
    if has_clean && clean.iter().any(Option::is_none) {
        return Err(Error::Validation(
            "clean_label must be given for every row or for none".into(),
        ));
    }
    let clean: Option<Vec<usize>> = has_clean.then(|| clean.into_iter().flatten().collect());
    let inferred = labels
        .iter()
        .chain(clean.iter().flatten())
        .max()
        .map_or(2, |m| (m + 1).max(2));
    let features = Array2::from_shape_vec((labels.len(), width), values)
        .map_err(|e| Error::Validation(e.to_string()))?;
    Dataset::from_parts(features, labels, clean, class_count.unwrap_or(inferred), ids)
}

pub fn encode_binary(ds: &Dataset) -> Vec<u8> {
    let n = ds.len();
    let mut out = Vec::with_capacity(21 + n * (16 + 8 * ds.feature_dim()));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(ds.feature_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.class_count() as u32).to_le_bytes());
    out.push(u8::from(ds.clean_labels().is_some()));
    for &id in ds.ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    for &y in ds.labels() {
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    if let Some(clean) = ds.clean_labels() {
        for &c in clean {
            out.extend_from_slice(&(c as u32).to_le_bytes());
        }
    }
    for v in ds.features().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const W: usize>(&mut self, what: &str) -> Result<[u8; W]> {
        if self.bytes.len() - self.pos < W {
            return Err(parse_err(self.pos, format!("unexpected end of data while reading {what}")));
        }
        let out: [u8; W] = self.bytes[self.pos..self.pos + W].try_into().expect("width");
        self.pos += W;
        Ok(out)
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.take::<4>("magic")? != BINARY_MAGIC {
        return Err(parse_err(0, "bad magic, expected NLF1"));
    }
    let n = u64::from_le_bytes(c.take("sample count")?) as usize;
    let f = u32::from_le_bytes(c.take("feature count")?) as usize;
    let classes = u32::from_le_bytes(c.take("class count")?) as usize;
    let flag_at = c.pos;
    let has_clean = match c.take::<1>("clean flag")?[0] {
        0 => false,
        1 => true,
        other => return Err(parse_err(flag_at, format!("bad clean flag {other}"))),
    };
    let row_bytes = 8 + 4 + if has_clean { 4 } else { 0 } + 8 * f;
    if n.checked_mul(row_bytes).is_none_or(|len| len > bytes.len() - c.pos) {
        return Err(parse_err(c.pos, "unexpected end of data: body shorter than header declares"));
    }
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(u64::from_le_bytes(c.take("id")?));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(u32::from_le_bytes(c.take("label")?) as usize);
    }
    let clean = if has_clean {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(u32::from_le_bytes(c.take("clean label")?) as usize);
        }
        Some(v)
    } else {
        None
    };
    let mut values = Vec::with_capacity(n * f);
    for _ in 0..n * f {
        values.push(f64::from_le_bytes(c.take("feature")?));
    }
    if c.pos != bytes.len() {
        return Err(parse_err(c.pos, "trailing bytes after dataset body"));
    }
    let features = Array2::from_shape_vec((n, f), values).expect("length matches shape");
    Dataset::from_parts(features, labels, clean, classes, ids)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    match DatasetFormat::from_path(path) {
        DatasetFormat::Csv => fs::write(path, encode_csv(ds))?,
        DatasetFormat::Binary => fs::write(path, encode_binary(ds))?,
    }
    Ok(())
}

/// Loads either format, recognising the binary twin by its magic bytes.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        return decode_binary(&bytes);
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| parse_err(e.valid_up_to(), "dataset file is not valid UTF-8"))?;
    decode_csv(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{inject_noise, make_gaussian_dataset, NoiseKind, NoiseSpec};

    fn noisy() -> Dataset {
        let ds = make_gaussian_dataset(20, 3, 3, 1.0, 5).unwrap();
        inject_noise(
            &ds,
            &NoiseSpec {
                kind: NoiseKind::Symmetric,
                ratio: 0.3,
                seed: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let ds = noisy();
        assert_eq!(decode_csv(&encode_csv(&ds)).unwrap(), ds);
        let bare = Dataset::new(ds.features().to_owned(), ds.labels().to_vec(), 3).unwrap();
        assert_eq!(decode_csv(&encode_csv(&bare)).unwrap(), bare);
    }

    #[test]
    fn binary_round_trip() {
        let ds = noisy();
        let bytes = encode_binary(&ds);
        assert_eq!(&bytes[..4], b"NLF1");
        assert_eq!(decode_binary(&bytes).unwrap(), ds);
    }

    #[test]
    fn truncated_files_fail_cleanly() {
        let bytes = encode_binary(&noisy());
        for cut in [0, 3, 10, 30, bytes.len() - 1] {
            assert!(matches!(decode_binary(&bytes[..cut]), Err(Error::Parse { .. })), "cut {cut}");
        }
        let text = encode_csv(&noisy());
        let cut = &text[..text.len() - 10];
        assert!(matches!(decode_csv(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_error_points_at_field() {
        let text = "id,label,clean_label,f0\n0,1,1,0.5\n1,0,0,abc\n";
        match decode_csv(text) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&text[offset as usize..offset as usize + 3], "abc"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_is_validation_error() {
        let text = "# class_count=2\nid,label,clean_label,f0\n0,2,,0.5\n";
        assert!(matches!(decode_csv(text), Err(Error::Validation(_))));
    }
}
