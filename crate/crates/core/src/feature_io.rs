//! Dense feature matrices and their on-disk formats.
//!
//! The binary format (DSF) is little-endian:
//!
//! ```text
//! "DSF1" | version u16 = 1 | dtype u16 = 1 (f32) | rows u64 | cols u64 | rows*cols f32 row-major
//! ```
//!
//! The text format holds one frame per line with whitespace-separated
//! values and exists for hand-written fixtures.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{bail, Error, Result};

pub const DSF_MAGIC: &[u8; 4] = b"DSF1";
pub const DSF_VERSION: u16 = 1;
pub const DSF_DTYPE_F32: u16 = 1;
pub const DSF_HEADER_LEN: usize = 24;

/// A `frames x dims` matrix of finite `f32` values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    n_dims: usize,
    data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Dsf,
    Text,
}

impl FeatureFormat {
    /// Picks the text format for `.txt` paths and DSF otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => FeatureFormat::Text,
            _ => FeatureFormat::Dsf,
        }
    }
}

impl FeatureMatrix {
    pub fn new(n_frames: usize, n_dims: usize, data: Vec<f32>) -> Result<Self> {
        if n_dims == 0 {
            bail!(Value, "feature matrix needs at least one dimension");
        }
        if n_frames.checked_mul(n_dims) != Some(data.len()) {
            bail!(
                Value,
                "{} values cannot fill a {}x{} matrix",
                data.len(),
                n_frames,
                n_dims
            );
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            bail!(
                Value,
                "non-finite value at frame {}, dim {}",
                pos / n_dims,
                pos % n_dims
            );
        }
        Ok(Self {
            n_frames,
            n_dims,
            data,
        })
    }

    pub fn zeros(n_frames: usize, n_dims: usize) -> Result<Self> {
        Self::new(n_frames, n_dims, vec![0.0; n_frames * n_dims])
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n_dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_dims {
                bail!(Value, "row {} has {} values, expected {}", i, row.len(), n_dims);
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), n_dims, data)
    }

    /// Stacks matrices of equal width on top of each other.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            bail!(Value, "nothing to concatenate");
        };
        let n_dims = first.n_dims;
        let mut data = Vec::new();
        let mut n_frames = 0;
        for p in parts {
            if p.n_dims != n_dims {
                bail!(Value, "cannot stack {}-dim and {}-dim matrices", n_dims, p.n_dims);
            }
            data.extend_from_slice(&p.data);
            n_frames += p.n_frames;
        }
        Ok(Self {
            n_frames,
            n_dims,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.n_dims)
    }

    pub fn to_dsf_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DSF_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(DSF_MAGIC);
        out.extend_from_slice(&DSF_VERSION.to_le_bytes());
        out.extend_from_slice(&DSF_DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(self.n_frames as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_dims as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_dsf_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < DSF_HEADER_LEN {
            bail!(Format, "DSF header truncated ({} bytes)", bytes.len());
        }
        if &bytes[0..4] != DSF_MAGIC {
            bail!(Format, "bad DSF magic {:?}", &bytes[0..4]);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DSF_VERSION {
            bail!(Format, "unsupported DSF version {}", version);
        }
        let dtype = u16::from_le_bytes([bytes[6], bytes[7]]);
        if dtype != DSF_DTYPE_F32 {
            bail!(Format, "unsupported DSF dtype code {}", dtype);
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if cols == 0 {
            bail!(Corrupt, "DSF declares zero columns");
        }
        let payload = &bytes[DSF_HEADER_LEN..];
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Corrupt(format!("DSF shape {rows}x{cols} overflows")))?;
        if payload.len() as u64 != expected {
            bail!(
                Corrupt,
                "DSF declares {}x{} ({} payload bytes) but holds {}",
                rows,
                cols,
                expected,
                payload.len()
            );
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows as usize, cols as usize, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f32>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f32>().map_err(|_| {
                        Error::Format(format!("line {}: cannot parse {:?}", lineno + 1, tok))
                    })
                })
                .collect::<Result<Vec<f32>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    bail!(
                        Corrupt,
                        "line {} has {} values, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    );
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            bail!(Format, "text matrix is empty, column count unknown");
        }
        Self::from_rows(&rows)
    }
}

pub fn load_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix> {
    match format {
        FeatureFormat::Dsf => FeatureMatrix::from_dsf_bytes(&fs::read(path)?),
        FeatureFormat::Text => FeatureMatrix::from_text(&fs::read_to_string(path)?),
    }
}

/// Writes `m` as DSF.
pub fn save_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&m.to_dsf_bytes())?;
    Ok(())
}

pub fn save_features_text(m: &FeatureMatrix, path: &Path) -> Result<()> {
    fs::write(path, m.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dsf_by_hand(rows: u64, cols: u64, values: &[f32]) -> Vec<u8> {
        let mut b = b"DSF1".to_vec();
        b.extend_from_slice(&[1, 0, 1, 0]);
        b.extend_from_slice(&rows.to_le_bytes());
        b.extend_from_slice(&cols.to_le_bytes());
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn reads_hand_built_file() {
        let vals = [1.0, -2.5, 3.0, 0.25, 5.0, 6.0];
        let m = FeatureMatrix::from_dsf_bytes(&dsf_by_hand(2, 3, &vals)).unwrap();
        assert_eq!((m.n_frames(), m.n_dims()), (2, 3));
        assert_eq!(m.data(), &vals);
        assert_eq!(m.row(1), &[0.25, 5.0, 6.0]);
    }

    #[test]
    fn short_payload_is_corrupt() {
        let bytes = dsf_by_hand(2, 3, &[0.0; 5]);
        assert!(matches!(
            FeatureMatrix::from_dsf_bytes(&bytes),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn long_payload_is_corrupt() {
        let bytes = dsf_by_hand(1, 1, &[0.0; 2]);
        assert!(matches!(
            FeatureMatrix::from_dsf_bytes(&bytes),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = dsf_by_hand(1, 1, &[0.0]);
        bytes[0] = b'X';
        assert!(matches!(FeatureMatrix::from_dsf_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = dsf_by_hand(1, 1, &[0.0]);
        bytes[4] = 2;
        assert!(matches!(FeatureMatrix::from_dsf_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = dsf_by_hand(1, 1, &[0.0]);
        bytes[6] = 2;
        assert!(matches!(FeatureMatrix::from_dsf_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let bytes = dsf_by_hand(1, 2, &[1.0, f32::NAN]);
        assert!(matches!(FeatureMatrix::from_dsf_bytes(&bytes), Err(Error::Value(_))));
        let bytes = dsf_by_hand(1, 1, &[f32::INFINITY]);
        assert!(matches!(FeatureMatrix::from_dsf_bytes(&bytes), Err(Error::Value(_))));
    }

    #[test]
    fn one_by_one_layout() {
        let m = FeatureMatrix::new(1, 1, vec![0.0]).unwrap();
        let bytes = m.to_dsf_bytes();
        assert_eq!(bytes.len(), DSF_HEADER_LEN + 4);
        assert_eq!(bytes, dsf_by_hand(1, 1, &[0.0]));
        assert_eq!(FeatureMatrix::from_dsf_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn empty_matrix_roundtrips() {
        let m = FeatureMatrix::zeros(0, 5).unwrap();
        let bytes = m.to_dsf_bytes();
        assert_eq!(bytes.len(), DSF_HEADER_LEN);
        let back = FeatureMatrix::from_dsf_bytes(&bytes).unwrap();
        assert_eq!((back.n_frames(), back.n_dims()), (0, 5));
    }

    #[test]
    fn text_zero_matrix() {
        let m = FeatureMatrix::from_text("0 0\n0 0\n").unwrap();
        assert_eq!(m, FeatureMatrix::zeros(2, 2).unwrap());
    }

    #[test]
    fn text_ragged_rows_rejected() {
        assert!(FeatureMatrix::from_text("1 2\n3\n").is_err());
        assert!(FeatureMatrix::from_text("1 x\n").is_err());
        assert!(FeatureMatrix::from_text("").is_err());
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let m = FeatureMatrix::from_rows(&[[0.1f32, -3.25e-7], [1e30, 7.0]]).unwrap();
        assert_eq!(FeatureMatrix::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(FeatureMatrix::new(0, 0, vec![]).is_err());
        let bytes = dsf_by_hand(0, 0, &[]);
        assert!(FeatureMatrix::from_dsf_bytes(&bytes).is_err());
    }
}
