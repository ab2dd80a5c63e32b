//! Rate-1/2 LDPC coding: systematic encoding and sum-product decoding.

pub mod matrix;

use std::sync::OnceLock;

pub use matrix::{SparseMatrix, BASE_1296_R12, LIFT};

use crate::error::{Error, Result};

/// Bundled parity-check matrix in alist form.
pub const BUNDLED_ALIST: &str = include_str!("../../data/qc_1296_r12.alist");

pub const DEFAULT_MAX_ITERATIONS: usize = 50;
const LLR_CLIP: f64 = 30.0;

/// Systematic generator from Gaussian elimination: information bits occupy
/// the non-pivot columns, each pivot bit is a parity of information bits.
#[derive(Clone, Debug)]
struct GeneralEncoder {
    info_cols: Vec<usize>,
    /// `(codeword position, mask over information bits)`.
    parity: Vec<(usize, Vec<u64>)>,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn get(v: &[u64], i: usize) -> bool {
    (v[i / 64] >> (i % 64)) & 1 == 1
}

fn set(v: &mut [u64], i: usize) {
    v[i / 64] |= 1 << (i % 64);
}

impl GeneralEncoder {
    fn build(h: &SparseMatrix) -> Result<Self> {
        let n = h.ncols();
        let w = words(n);
        let mut rows: Vec<Vec<u64>> = h
            .rows()
            .iter()
            .map(|r| {
                let mut b = vec![0u64; w];
                r.iter().for_each(|c| set(&mut b, *c));
                b
            })
            .collect();
        // Pivot from the rightmost column so that, when the parity part is
        // invertible, the information bits come first.
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut rank = 0;
        for col in (0..n).rev() {
            let Some(p) = (rank..rows.len()).find(|r| get(&rows[*r], col)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && get(row, col) {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push((rank, col));
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        let pivot_cols: Vec<usize> = pivots.iter().map(|p| p.1).collect();
        let info_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        let kw = words(info_cols.len());
        let parity = pivots
            .iter()
            .map(|(r, col)| {
                let mut mask = vec![0u64; kw];
                for (i, c) in info_cols.iter().enumerate() {
                    if get(&rows[*r], *c) {
                        set(&mut mask, i);
                    }
                }
                (*col, mask)
            })
            .collect();
        Ok(GeneralEncoder { info_cols, parity })
    }

    fn encode(&self, msg: &[u8], n: usize) -> Vec<u8> {
        let mut packed = vec![0u64; words(msg.len())];
        for (i, b) in msg.iter().enumerate() {
            if b & 1 == 1 {
                set(&mut packed, i);
            }
        }
        let mut cw = vec![0u8; n];
        for (c, b) in self.info_cols.iter().zip(msg) {
            cw[*c] = b & 1;
        }
        for (col, mask) in &self.parity {
            let ones: u32 = mask
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            cw[*col] = (ones & 1) as u8;
        }
        cw
    }
}

#[derive(Clone, Debug)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug)]
pub struct LdpcCode {
    h: SparseMatrix,
    cols: Vec<Vec<usize>>,
    /// Edge ids per check, edges numbered row by row.
    edge_var: Vec<usize>,
    row_start: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
    structured: Option<(Vec<[i32; 24]>, usize)>,
    general: OnceLock<std::result::Result<GeneralEncoder, String>>,
    k: usize,
}

impl LdpcCode {
    fn from_parts(h: SparseMatrix, structured: Option<(Vec<[i32; 24]>, usize)>) -> Result<Self> {
        let cols = h.columns();
        let mut edge_var = Vec::with_capacity(h.edges());
        let mut row_start = Vec::with_capacity(h.nrows() + 1);
        let mut var_edges = vec![Vec::new(); h.ncols()];
        for r in h.rows() {
            row_start.push(edge_var.len());
            for c in r {
                var_edges[*c].push(edge_var.len());
                edge_var.push(*c);
            }
        }
        row_start.push(edge_var.len());
        let code = LdpcCode {
            k: 0,
            h,
            cols,
            edge_var,
            row_start,
            var_edges,
            structured,
            general: OnceLock::new(),
        };
        let k = code.general()?.info_cols.len();
        Ok(LdpcCode { k, ..code })
    }

    /// The quasi-cyclic length-1296 rate-1/2 code with lifting factor 54.
    pub fn standard() -> Self {
        let h = SparseMatrix::from_base(&BASE_1296_R12, LIFT);
        LdpcCode::from_parts(h, Some((BASE_1296_R12.to_vec(), LIFT)))
            .expect("bundled code is valid")
    }

    /// Any parity-check matrix in alist form; encoded with the general encoder.
    pub fn from_alist(text: &str) -> Result<Self> {
        LdpcCode::from_parts(SparseMatrix::from_alist(text)?, None)
    }

    pub fn from_matrix(h: SparseMatrix) -> Result<Self> {
        LdpcCode::from_parts(h, None)
    }

    fn general(&self) -> Result<&GeneralEncoder> {
        self.general
            .get_or_init(|| GeneralEncoder::build(&self.h).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::config(e.clone()))
    }

    pub fn parity_check(&self) -> &SparseMatrix {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        self.h.syndrome_is_zero(bits)
    }

    fn check_msg(&self, msg: &[u8]) -> Result<()> {
        if msg.len() != self.k {
            return Err(Error::config(format!(
                "message has {} bits, code expects {}",
                msg.len(),
                self.k
            )));
        }
        Ok(())
    }

    /// Systematic encoding. Uses the block-structured encoder when the code
    /// came from a base matrix, otherwise the elimination-based generator.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        match &self.structured {
            Some((base, z))
                if self
                    .general()?
                    .info_cols
                    .iter()
                    .enumerate()
                    .all(|(i, c)| i == *c) =>
            {
                self.check_msg(msg)?;
                Ok(encode_dual_diagonal(base, *z, msg))
            }
            _ => self.encode_general(msg),
        }
    }

    pub fn encode_general(&self, msg: &[u8]) -> Result<Vec<u8>> {
        self.check_msg(msg)?;
        Ok(self.general()?.encode(msg, self.n()))
    }

    /// Positions of the message bits inside a codeword.
    pub fn info_positions(&self) -> Result<&[usize]> {
        Ok(&self.general()?.info_cols)
    }

    /// Flooding sum-product decoding with the tanh rule. Positive LLRs favour 0.
    pub fn decode(&self, llr: &[f64], max_iterations: usize) -> Result<DecodeOutput> {
        if llr.len() != self.n() {
            return Err(Error::dim("ldpc decode", self.n(), llr.len()));
        }
        if llr.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite {
                context: "ldpc decode input",
            });
        }
        let ch: Vec<f64> = llr.iter().map(|l| l.clamp(-LLR_CLIP, LLR_CLIP)).collect();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|v| ch[*v]).collect();
        let mut c2v = vec![0.0; v2c.len()];
        let mut bits = vec![0u8; self.n()];
        let mut tanh = Vec::new();
        let mut suffix = Vec::new();
        for it in 1..=max_iterations.max(1) {
            for r in 0..self.h.nrows() {
                let (s, e) = (self.row_start[r], self.row_start[r + 1]);
                tanh.clear();
                tanh.extend(v2c[s..e].iter().map(|q| (q / 2.0).tanh()));
                suffix.clear();
                suffix.resize(tanh.len() + 1, 1.0);
                for i in (0..tanh.len()).rev() {
                    suffix[i] = suffix[i + 1] * tanh[i];
                }
                let mut prefix = 1.0;
                for (i, t) in tanh.iter().enumerate() {
                    let p = (prefix * suffix[i + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    c2v[s + i] = (2.0 * p.atanh()).clamp(-LLR_CLIP, LLR_CLIP);
                    prefix *= t;
                }
            }
            for (var, edges) in self.var_edges.iter().enumerate() {
                let total = ch[var] + edges.iter().map(|e| c2v[*e]).sum::<f64>();
                bits[var] = u8::from(total < 0.0);
                for e in edges {
                    v2c[*e] = (total - c2v[*e]).clamp(-LLR_CLIP, LLR_CLIP);
                }
            }
            if self.is_codeword(&bits) {
                return Ok(DecodeOutput {
                    bits,
                    converged: true,
                    iterations: it,
                });
            }
        }
        Ok(DecodeOutput {
            bits,
            converged: false,
            iterations: max_iterations.max(1),
        })
    }

    /// Column weights, mainly for diagnostics.
    pub fn column_weights(&self) -> Vec<usize> {
        self.cols.iter().map(Vec::len).collect()
    }
}

/// Circulant shift `(P^s x)[r] = x[(r + s) mod Z]`, accumulated into `out`.
fn add_shifted(out: &mut [u8], x: &[u8], s: usize) {
    let z = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o ^= x[(r + s) % z];
    }
}

/// Block encoder for dual-diagonal parity structure: the first parity block
/// is the sum of all systematic syndromes, the rest follow by back-substitution.
fn encode_dual_diagonal(base: &[[i32; 24]], z: usize, msg: &[u8]) -> Vec<u8> {
    let mb = base.len();
    let kb = base[0].len() - mb;
    let lambda: Vec<Vec<u8>> = base
        .iter()
        .map(|row| {
            let mut acc = vec![0u8; z];
            for (j, s) in row[..kb].iter().enumerate() {
                if *s >= 0 {
                    add_shifted(&mut acc, &msg[j * z..(j + 1) * z], *s as usize);
                }
            }
            acc
        })
        .collect();
    let mut p0 = vec![0u8; z];
    lambda
        .iter()
        .for_each(|l| p0.iter_mut().zip(l).for_each(|(a, b)| *a ^= b));
    let mut parity = vec![p0.clone()];
    // Row 0: lambda_0 + P^{s_0} p0 + p1 = 0.
    let mut p = lambda[0].clone();
    add_shifted(&mut p, &p0, base[0][kb] as usize);
    parity.push(p);
    for i in 1..mb - 1 {
        let mut next = lambda[i].clone();
        next.iter_mut().zip(&parity[i]).for_each(|(a, b)| *a ^= b);
        if base[i][kb] >= 0 {
            add_shifted(&mut next, &p0, base[i][kb] as usize);
        }
        parity.push(next);
    }
    let mut cw = msg.to_vec();
    parity.iter().for_each(|b| cw.extend_from_slice(b));
    cw
}
