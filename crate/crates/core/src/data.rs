//! Grouped matrix-variate datasets: validation, preprocessing and the
//! manifest + CSV on-disk layout.
//!
//! A manifest is a small text file:
//!
//! ```text
//! # comments start with '#'
//! p1 = 2
//! p2 = 3
//! word_a,word_a.csv
//! word_b,data/word_b.csv
//! ```
//!
//! Each group file holds one observation per line, `p1 * p2` comma-separated
//! values in column-stacking order. Relative paths resolve against the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SwagError};
use crate::io::fmt_f64;
use crate::linalg::{MatrixShape, SpdMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: String,
    /// `n_j x p`, one vectorized observation per row.
    pub data: DMatrix<f64>,
}

/// Per-group column means and scales removed by [`GroupedDataset::preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessRecord {
    pub means: Vec<DVector<f64>>,
    pub scales: Vec<DVector<f64>>,
}

impl PreprocessRecord {
    /// Maps a covariance estimated on standardized data back to the raw
    /// scale: `D^{1/2} Σ D^{1/2}` with `D^{1/2} = diag(scales_j)`.
    pub fn rescale(&self, group: usize, sigma: &SpdMatrix) -> Result<SpdMatrix> {
        let s = &self.scales[group];
        let m = sigma.matrix();
        SpdMatrix::new(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| s[i] * m[(i, j)] * s[j]))
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.means.iter().all(|m| m.amax() <= tol)
            && self.scales.iter().all(|s| s.iter().all(|v| (v - 1.0).abs() <= tol))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<Group>,
    shape: MatrixShape,
    preprocessing: Option<PreprocessRecord>,
}

impl GroupedDataset {
    pub fn new(groups: Vec<Group>, shape: MatrixShape) -> Result<Self> {
        if groups.is_empty() {
            return Err(SwagError::InvalidData("dataset has no groups".into()));
        }
        for g in &groups {
            if g.data.nrows() == 0 {
                return Err(SwagError::InvalidData(format!("group '{}' is empty", g.label)));
            }
            if g.data.ncols() != shape.p() {
                return Err(SwagError::DimensionMismatch(format!(
                    "group '{}' has {} columns but p1*p2 = {}",
                    g.label,
                    g.data.ncols(),
                    shape.p()
                )));
            }
            if g.data.iter().any(|v| !v.is_finite()) {
                return Err(SwagError::InvalidData(format!(
                    "group '{}' contains non-finite values",
                    g.label
                )));
            }
        }
        Ok(Self {
            groups,
            shape,
            preprocessing: None,
        })
    }

    /// Builds a dataset with labels `g1, g2, ...`.
    pub fn from_matrices(data: Vec<DMatrix<f64>>, shape: MatrixShape) -> Result<Self> {
        let groups = data
            .into_iter()
            .enumerate()
            .map(|(j, data)| Group {
                label: format!("g{}", j + 1),
                data,
            })
            .collect();
        Self::new(groups, shape)
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn data(&self, j: usize) -> &DMatrix<f64> {
        &self.groups[j].data
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.data.nrows()).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.label.as_str()).collect()
    }

    pub fn preprocessing(&self) -> Option<&PreprocessRecord> {
        self.preprocessing.as_ref()
    }

    /// Centers each group's columns and, if `standardize`, divides them by
    /// their per-group standard deviation (divisor `n_j - 1`). Zero-variance
    /// columns keep scale 1.
    pub fn preprocess(&self, standardize: bool) -> Result<(GroupedDataset, PreprocessRecord)> {
        let mut means = Vec::with_capacity(self.groups.len());
        let mut scales = Vec::with_capacity(self.groups.len());
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let n = g.data.nrows();
            if n < 2 {
                return Err(SwagError::InvalidData(format!(
                    "group '{}' needs at least 2 observations to center",
                    g.label
                )));
            }
            let mean = g.data.row_mean().transpose();
            let mut centered = g.data.clone();
            for (c, mut col) in centered.column_iter_mut().enumerate() {
                col.add_scalar_mut(-mean[c]);
            }
            let mut scale = DVector::from_element(self.shape.p(), 1.0);
            if standardize {
                for (c, mut col) in centered.column_iter_mut().enumerate() {
                    let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
                    if sd > 0.0 && sd.is_finite() {
                        scale[c] = sd;
                        col /= sd;
                    } else {
                        log::warn!(
                            "group '{}' column {c} has zero variance; keeping scale 1",
                            g.label
                        );
                    }
                }
            }
            means.push(mean);
            scales.push(scale);
            groups.push(Group {
                label: g.label.clone(),
                data: centered,
            });
        }
        let record = PreprocessRecord { means, scales };
        let mut out = GroupedDataset::new(groups, self.shape)?;
        out.preprocessing = Some(record.clone());
        Ok((out, record))
    }
}

/// Loads a dataset from a manifest file.
pub fn load_dataset(manifest: &Path) -> Result<GroupedDataset> {
    let text = fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut p1 = None;
    let mut p2 = None;
    let mut entries: Vec<(String, PathBuf, usize)> = Vec::new();
    let parse_err = |line: usize, msg: String| SwagError::Parse {
        path: manifest.to_path_buf(),
        line,
        msg,
    };
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let v: usize = value
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("'{}' is not a dimension", value.trim())))?;
            match key.trim() {
                "p1" => p1 = Some(v),
                "p2" => p2 = Some(v),
                other => return Err(parse_err(lineno, format!("unknown key '{other}'"))),
            }
        } else if let Some((label, path)) = line.split_once(',') {
            let path = PathBuf::from(path.trim());
            let path = if path.is_absolute() { path } else { base.join(path) };
            entries.push((label.trim().to_string(), path, lineno));
        } else {
            return Err(parse_err(lineno, "expected 'key = value' or 'label,path'".into()));
        }
    }
    let shape = match (p1, p2) {
        (Some(a), Some(b)) => MatrixShape::new(a, b)?,
        _ => return Err(parse_err(0, "manifest must define p1 and p2".into())),
    };
    let groups = entries
        .into_iter()
        .map(|(label, path, _)| {
            let data = read_matrix_csv(&path, Some(shape.p()))?;
            Ok(Group { label, data })
        })
        .collect::<Result<Vec<_>>>()?;
    GroupedDataset::new(groups, shape)
}

/// Reads a headerless comma-separated numeric matrix. Lines starting with
/// `#` are skipped.
pub fn read_matrix_csv(path: &Path, expected_cols: Option<usize>) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut ncols = expected_cols;
    let mut nrows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| SwagError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("non-numeric cell '{}'", c.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        match ncols {
            Some(n) if n != row.len() => {
                return Err(err(format!("expected {n} columns, found {}", row.len())));
            }
            None => ncols = Some(row.len()),
            _ => {}
        }
        values.extend(row);
        nrows += 1;
    }
    if nrows == 0 {
        return Err(SwagError::InvalidData(format!("{} has no rows", path.display())));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &values))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, header: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `manifest.txt` and one CSV per group into `dir`.
pub fn save_dataset(dir: &Path, data: &GroupedDataset) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let shape = data.shape();
    let mut manifest = format!("p1 = {}\np2 = {}\n", shape.p1(), shape.p2());
    for (j, g) in data.groups().iter().enumerate() {
        let file = format!("group_{}.csv", j + 1);
        write_matrix_csv(&dir.join(&file), &g.data, None)?;
        manifest.push_str(&format!("{},{}\n", g.label, file));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest)?;
    Ok(path)
}
