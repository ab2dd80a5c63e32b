//! Sparse parity-check matrices: the quasi-cyclic rate-1/2 length-1296 base
//! matrix and alist text I/O.

use crate::error::{Error, Result};

/// Lifting factor of the bundled code.
pub const LIFT: usize = 54;

/// Shift values of the 12 x 24 base matrix; -1 marks an all-zero block.
#[rustfmt::skip]
pub const BASE_1296_R12: [[i32; 24]; 12] = [
    [40, -1, -1, -1, 22, -1, 49, 23, 43, -1, -1, -1,  1,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [50,  1, -1, -1, 48, 35, -1, -1, 13, -1, 30, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [39, 50, -1, -1,  4, -1,  2, -1, -1, -1, -1, 49, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1],
    [33, -1, -1, 38, 37, -1, -1,  4,  1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1],
    [45, -1, -1, -1,  0, 22, -1, -1, 20, 42, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1],
    [51, -1, -1, 48, 35, -1, -1, -1, 44, -1, 18, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1],
    [47, 11, -1, -1, -1, 17, -1, -1, 51, -1, -1, -1,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1],
    [ 5, -1, 25, -1,  6, -1, 45, -1, 13, 40, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1],
    [33, -1, -1, 34, 24, -1, -1, -1, 23, -1, -1, 46, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1],
    [ 1, -1, 27, -1,  1, -1, -1, -1, 38, -1, 44, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1],
    [-1, 18, -1, -1, 23, -1, -1,  8,  0, 35, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0],
    [49, -1, 17, -1, 30, -1, -1, -1, 34, -1, -1, 19,  1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0],
];

/// Binary matrix stored as the column indices of each row's ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    cols: usize,
    rows: Vec<Vec<usize>>,
}

impl SparseMatrix {
    pub fn new(cols: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        for r in rows.iter_mut() {
            r.sort_unstable();
            if r.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::config("duplicate entry in parity-check row"));
            }
            if r.last().is_some_and(|c| *c >= cols) {
                return Err(Error::config("parity-check column index out of range"));
            }
        }
        Ok(SparseMatrix { cols, rows })
    }

    /// Expands a base matrix of circulant shifts. Block `(i, j)` with shift
    /// `s` places a one at `(i Z + r, j Z + (r + s) mod Z)`.
    pub fn from_base(base: &[[i32; 24]], z: usize) -> Self {
        let mut rows = Vec::with_capacity(base.len() * z);
        for brow in base {
            for r in 0..z {
                let mut row: Vec<usize> = brow
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s >= 0)
                    .map(|(j, s)| j * z + (r + *s as usize) % z)
                    .collect();
                row.sort_unstable();
                rows.push(row);
            }
        }
        SparseMatrix {
            cols: base[0].len() * z,
            rows,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.cols];
        for (i, r) in self.rows.iter().enumerate() {
            for c in r {
                cols[*c].push(i);
            }
        }
        cols
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        bits.len() == self.cols
            && self
                .rows
                .iter()
                .all(|r| r.iter().fold(0u8, |acc, c| acc ^ (bits[*c] & 1)) == 0)
    }

    pub fn to_alist(&self) -> String {
        let cols = self.columns();
        let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let join = |v: &mut dyn Iterator<Item = usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{} {}\n{} {}\n",
            self.cols,
            self.rows.len(),
            max_col,
            max_row
        ));
        out.push_str(&join(&mut cols.iter().map(Vec::len)));
        out.push('\n');
        out.push_str(&join(&mut self.rows.iter().map(Vec::len)));
        out.push('\n');
        for c in &cols {
            let mut v: Vec<usize> = c.iter().map(|r| r + 1).collect();
            v.resize(max_col, 0);
            out.push_str(&join(&mut v.into_iter()));
            out.push('\n');
        }
        for r in &self.rows {
            let mut v: Vec<usize> = r.iter().map(|c| c + 1).collect();
            v.resize(max_row, 0);
            out.push_str(&join(&mut v.into_iter()));
            out.push('\n');
        }
        out
    }

    /// Parses alist text. Both the column and row sections are read and must agree.
    pub fn from_alist(text: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse {
            what: "alist".into(),
            reason: reason.into(),
        };
        let mut nums = text.split_whitespace().map(|t| t.parse::<usize>());
        let mut next = || -> Result<usize> {
            nums.next()
                .ok_or_else(|| err("unexpected end of input"))?
                .map_err(|e| err(&e.to_string()))
        };
        let (n, m) = (next()?, next()?);
        let (max_col, max_row) = (next()?, next()?);
        let col_w: Vec<usize> = (0..n).map(|_| next()).collect::<Result<_>>()?;
        let row_w: Vec<usize> = (0..m).map(|_| next()).collect::<Result<_>>()?;
        let mut from_cols = vec![Vec::new(); m];
        for (c, w) in col_w.iter().enumerate() {
            for slot in 0..max_col {
                let r = next()?;
                if slot < *w {
                    if r == 0 || r > m {
                        return Err(err("row index out of range"));
                    }
                    from_cols[r - 1].push(c);
                }
            }
        }
        let mut rows = Vec::with_capacity(m);
        for w in &row_w {
            let mut row = Vec::with_capacity(*w);
            for slot in 0..max_row {
                let c = next()?;
                if slot < *w {
                    if c == 0 || c > n {
                        return Err(err("column index out of range"));
                    }
                    row.push(c - 1);
                }
            }
            rows.push(row);
        }
        let parsed = SparseMatrix::new(n, rows)?;
        let cross = SparseMatrix::new(n, from_cols)?;
        if parsed != cross {
            return Err(err("row and column sections disagree"));
        }
        Ok(parsed)
    }
}
