use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machine::Word;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CsrError {
    #[error("row_ptr must have n_rows + 1 entries, start at 0 and be non-decreasing")]
    BadRowPtr,
    #[error("col_idx and values lengths differ from row_ptr[n_rows]")]
    LengthMismatch,
    #[error("column index {col} out of range for {n_cols} columns")]
    BadColumn { col: usize, n_cols: usize },
    #[error("grid length must be at least one")]
    EmptyGrid,
    #[error("matrix market parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Integer-valued compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Word>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<Word>,
    ) -> Result<Self, CsrError> {
        let m = Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CsrError> {
        if self.row_ptr.len() != self.n_rows + 1
            || self.row_ptr[0] != 0
            || self.row_ptr.windows(2).any(|w| w[0] > w[1])
        {
            return Err(CsrError::BadRowPtr);
        }
        let nnz = self.row_ptr[self.n_rows];
        if self.col_idx.len() != nnz || self.values.len() != nnz {
            return Err(CsrError::LengthMismatch);
        }
        if let Some(&col) = self.col_idx.iter().find(|&&c| c >= self.n_cols) {
            return Err(CsrError::BadColumn {
                col,
                n_cols: self.n_cols,
            });
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    /// Builds a matrix from unordered `(row, col, value)` triplets.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut t: Vec<(usize, usize, Word)>) -> Result<Self, CsrError> {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(r, c, _) in &t {
            if r >= n_rows {
                return Err(CsrError::BadRowPtr);
            }
            if c >= n_cols {
                return Err(CsrError::BadColumn { col: c, n_cols });
            }
            row_ptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::new(
            n_rows,
            n_cols,
            row_ptr,
            t.iter().map(|x| x.1).collect(),
            t.iter().map(|x| x.2).collect(),
        )
    }

    /// Sequential reference product.
    pub fn matvec(&self, x: &[Word]) -> Vec<Word> {
        (0..self.n_rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k].wrapping_mul(x[self.col_idx[k]]))
                    .fold(0, Word::wrapping_add)
            })
            .collect()
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate integer general\n");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let _ = writeln!(s, "{} {} {}", r + 1, self.col_idx[k] + 1, self.values[k]);
            }
        }
        s
    }

    pub fn from_matrix_market(text: &str) -> Result<Self, CsrError> {
        let err = |line: usize, msg: &str| CsrError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, banner) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let banner = banner.to_ascii_lowercase();
        if !banner.starts_with("%%matrixmarket matrix coordinate") {
            return Err(err(1, "expected a coordinate matrix banner"));
        }
        if !(banner.contains("integer") || banner.contains("real")) || !banner.contains("general") {
            return Err(err(1, "only general integer or real matrices are supported"));
        }
        let mut lines = lines.filter(|(_, l)| !l.starts_with('%'));
        let (ln, size) = lines.next().ok_or_else(|| err(2, "missing size line"))?;
        let dims: Vec<usize> = size
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| err(ln + 1, "bad size")))
            .collect::<Result<_, _>>()?;
        let [rows, cols, nnz] = dims[..] else {
            return Err(err(ln + 1, "size line needs three fields"));
        };
        let mut t = Vec::with_capacity(nnz);
        for (ln, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err(ln + 1, "entry needs row, column and value"));
            }
            let r: usize = f[0].parse().map_err(|_| err(ln + 1, "bad row"))?;
            let c: usize = f[1].parse().map_err(|_| err(ln + 1, "bad column"))?;
            let v: f64 = f[2].parse().map_err(|_| err(ln + 1, "bad value"))?;
            if r == 0 || c == 0 || v.fract() != 0.0 {
                return Err(err(ln + 1, "indices are 1-based and values must be integral"));
            }
            t.push((r - 1, c - 1, v as Word));
        }
        if t.len() != nnz {
            return Err(err(0, "entry count does not match size line"));
        }
        Self::from_triplets(rows, cols, t)
    }
}

/// Five-point stencil on an `n × n` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaplacianSpec {
    pub n: usize,
}

/// Row `i * n + j` has 4 on the diagonal and -1 for each grid neighbor.
pub fn laplacian_csr(spec: LaplacianSpec) -> Result<CsrMatrix, CsrError> {
    let n = spec.n;
    if n == 0 {
        return Err(CsrError::EmptyGrid);
    }
    let size = n * n;
    let mut row_ptr = Vec::with_capacity(size + 1);
    let mut col_idx = Vec::with_capacity(5 * size);
    let mut values = Vec::with_capacity(5 * size);
    row_ptr.push(0);
    for i in 0..n {
        for j in 0..n {
            let here = i * n + j;
            if i > 0 {
                col_idx.push(here - n);
                values.push(-1);
            }
            if j > 0 {
                col_idx.push(here - 1);
                values.push(-1);
            }
            col_idx.push(here);
            values.push(4);
            if j + 1 < n {
                col_idx.push(here + 1);
                values.push(-1);
            }
            if i + 1 < n {
                col_idx.push(here + n);
                values.push(-1);
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::new(size, size, row_ptr, col_idx, values)
}
