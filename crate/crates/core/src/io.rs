//! Number formatting, flat key-value config text, and the binary container
//! for posterior covariance draws.
//!
//! Draws container layout (all integers and floats little-endian):
//!
//! ```text
//! b"SWAG1"            magic
//! u32 version         currently 1
//! u32 groups          J
//! u32 dim             p
//! u32 draws           retained draws per group
//! f64 * J*draws*p*p   group-major, then draw-major, column-major within a matrix
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Result, SwagError};

pub const DRAWS_MAGIC: &[u8; 5] = b"SWAG1";
pub const DRAWS_VERSION: u32 = 1;

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Parses `key = value` lines; `#` starts a comment. Returns
/// `(key, value, line number)` triples in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SwagError::Parse {
            path: "<config>".into(),
            line: idx + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string(), idx + 1));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawsHeader {
    pub version: u32,
    pub groups: u32,
    pub dim: u32,
    pub draws: u32,
}

/// Posterior draws indexed `[group][draw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    pub dim: usize,
    pub draws: Vec<Vec<DMatrix<f64>>>,
}

impl DrawSet {
    pub fn num_groups(&self) -> usize {
        self.draws.len()
    }

    pub fn num_draws(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// Trace of element `(r, c)` of group `g` across draws.
    pub fn element_series(&self, g: usize, r: usize, c: usize) -> Vec<f64> {
        self.draws[g].iter().map(|m| m[(r, c)]).collect()
    }
}

pub fn write_draws<W: Write>(mut w: W, draws: &[Vec<DMatrix<f64>>]) -> Result<()> {
    let groups = draws.len();
    let count = draws.first().map_or(0, Vec::len);
    let dim = draws
        .first()
        .and_then(|g| g.first())
        .map_or(0, |m| m.nrows());
    if draws.iter().any(|g| g.len() != count)
        || draws.iter().flatten().any(|m| m.shape() != (dim, dim))
    {
        return Err(SwagError::DimensionMismatch("ragged draw set".into()));
    }
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| SwagError::Format(format!("{v} exceeds u32 header field")))
    };
    w.write_all(DRAWS_MAGIC)?;
    for field in [DRAWS_VERSION, to_u32(groups)?, to_u32(dim)?, to_u32(count)?] {
        w.write_all(&field.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(dim * dim * 8);
    for m in draws.iter().flatten() {
        buf.clear();
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws_header<R: Read>(r: &mut R) -> Result<DrawsHeader> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| SwagError::Format("file too short for magic".into()))?;
    if &magic != DRAWS_MAGIC {
        return Err(SwagError::Format(format!("bad magic {magic:?}")));
    }
    let mut fields = [0u32; 4];
    for f in &mut fields {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)
            .map_err(|_| SwagError::Format("truncated header".into()))?;
        *f = u32::from_le_bytes(b);
    }
    let header = DrawsHeader {
        version: fields[0],
        groups: fields[1],
        dim: fields[2],
        draws: fields[3],
    };
    if header.version != DRAWS_VERSION {
        return Err(SwagError::Format(format!(
            "unsupported container version {}",
            header.version
        )));
    }
    Ok(header)
}

pub fn read_draws<R: Read>(mut r: R) -> Result<DrawSet> {
    let h = read_draws_header(&mut r)?;
    let (groups, dim, count) = (h.groups as usize, h.dim as usize, h.draws as usize);
    let expected = groups * count * dim * dim * 8;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != expected {
        return Err(SwagError::Format(format!(
            "header announces {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let draws = (0..groups)
        .map(|_| {
            (0..count)
                .map(|_| DMatrix::from_iterator(dim, dim, values.by_ref().take(dim * dim)))
                .collect()
        })
        .collect();
    Ok(DrawSet { dim, draws })
}
