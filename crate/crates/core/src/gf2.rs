//! Dense bit-packed linear algebra over GF(2).
//!
//! Matrices are stored row-major in 64-bit words; within a word the least
//! significant bit holds the lowest column index of that word's span. Words
//! are padded so that bits at or beyond `cols` are always zero, which lets
//! row operations run as whole-word XORs without masking.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    DimensionMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("matrix is singular")]
    Singular,
    #[error("linear system is inconsistent")]
    InconsistentSystem,
    #[error("parse error: {0}")]
    Parse(String),
}

const WORD_BITS: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// A bit vector, packed LSB-first into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut v = BitVec::zeros(len);
        for i in 0..len {
            if f(i) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let w = &mut self.words[i / WORD_BITS];
        if bit {
            *w |= 1 << (i % WORD_BITS);
        } else {
            *w &= !(1 << (i % WORD_BITS));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "xor_assign length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Copies bits `[start, start+len)` into a fresh vector.
    pub fn subrange(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len);
        BitVec::from_fn(len, |i| self.get(start + i))
    }

    /// Overwrites bits `[start, start+src.len())` with `src`.
    pub fn write_subrange(&mut self, start: usize, src: &BitVec) {
        assert!(start + src.len <= self.len);
        for i in 0..src.len {
            self.set(start + i, src.get(i));
        }
    }

    /// XORs `src` into bits `[start, start+src.len())`.
    pub fn xor_subrange(&mut self, start: usize, src: &BitVec) {
        assert!(start + src.len <= self.len);
        for i in 0..src.len {
            if src.get(i) {
                self.set(start + i, !self.get(start + i));
            }
        }
    }

    /// Serializes to bytes, LSB-first within each byte; byte 0 holds bits 0-7.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bytes_lsb(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() * 8 >= len, "not enough bytes for {len} bits");
        BitVec::from_fn(len, |i| bytes[i / 8] >> (i % 8) & 1 == 1)
    }

    pub fn random(len: usize, rng: &mut impl rand::RngCore) -> Self {
        let mut v = BitVec {
            len,
            words: (0..words_for(len)).map(|_| rng.next_u64()).collect(),
        };
        v.mask_tail();
        v
    }

    fn mask_tail(&mut self) {
        let used = self.len % WORD_BITS;
        if used != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << used) - 1;
            }
        }
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        Ok(())
    }
}

/// Result of [`BitMatrix::solve`]. When the system is underdetermined,
/// free variables are fixed to zero and `unique` is false.
#[derive(Debug, Clone)]
pub struct Solution {
    pub columns: Vec<BitVec>,
    pub unique: bool,
}

/// Dense matrix over GF(2); see the module docs for the bit layout.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BitMatrix {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        self.words[i * self.stride + j / WORD_BITS] >> (j % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, bit: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        let w = &mut self.words[i * self.stride + j / WORD_BITS];
        if bit {
            *w |= 1 << (j % WORD_BITS);
        } else {
            *w &= !(1 << (j % WORD_BITS));
        }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    fn xor_row(&mut self, dst: usize, src: usize) {
        let (a, b) = if dst < src {
            let (lo, hi) = self.words.split_at_mut(src * self.stride);
            (
                &mut lo[dst * self.stride..(dst + 1) * self.stride],
                &hi[..self.stride],
            )
        } else {
            let (lo, hi) = self.words.split_at_mut(dst * self.stride);
            (
                &mut hi[..self.stride],
                &lo[src * self.stride..(src + 1) * self.stride],
            )
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= y;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.words.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Standard matrix product with XOR accumulation.
    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix, Gf2Error> {
        if self.cols != other.rows {
            return Err(Gf2Error::DimensionMismatch {
                op: "mul",
                lhs: format!("{}x{}", self.rows, self.cols),
                rhs: format!("{}x{}", other.rows, other.cols),
            });
        }
        let mut out = BitMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (wi, &w) in self.row(i).iter().enumerate() {
                let mut bits = w;
                while bits != 0 {
                    let j = wi * WORD_BITS + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let dst = &mut out.words[i * out.stride..(i + 1) * out.stride];
                    for (x, y) in dst.iter_mut().zip(other.row(j)) {
                        *x ^= y;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        BitVec::from_fn(self.rows, |i| {
            let mut acc = 0u64;
            for (a, b) in self.row(i).iter().zip(v.words()) {
                acc ^= a & b;
            }
            acc.count_ones() % 2 == 1
        })
    }

    pub fn add(&self, other: &BitMatrix) -> Result<BitMatrix, Gf2Error> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Gf2Error::DimensionMismatch {
                op: "add",
                lhs: format!("{}x{}", self.rows, self.cols),
                rhs: format!("{}x{}", other.rows, other.cols),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> BitMatrix {
        BitMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rank via Gaussian elimination; works on an internal copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let pivot = (rank..m.rows).find(|&i| m.get(i, col));
            let Some(pivot) = pivot else { continue };
            m.swap_rows(rank, pivot);
            for i in rank + 1..m.rows {
                if m.get(i, col) {
                    m.xor_row(i, rank);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Solves `A x = b` for each right-hand side column of `rhs`.
    ///
    /// Underdetermined systems get free variables fixed to zero and the
    /// `unique` flag cleared; inconsistent systems are an error.
    pub fn solve(&self, rhs: &BitMatrix) -> Result<Solution, Gf2Error> {
        if self.rows != rhs.rows {
            return Err(Gf2Error::DimensionMismatch {
                op: "solve",
                lhs: format!("{}x{}", self.rows, self.cols),
                rhs: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        // Augmented [A | rhs], reduced to RREF.
        let mut aug = BitMatrix::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    aug.set(i, j, true);
                }
            }
            for j in 0..rhs.cols {
                if rhs.get(i, j) {
                    aug.set(i, self.cols + j, true);
                }
            }
        }
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut rank = 0;
        for col in 0..self.cols {
            if rank == aug.rows {
                break;
            }
            let Some(pivot) = (rank..aug.rows).find(|&i| aug.get(i, col)) else {
                continue;
            };
            aug.swap_rows(rank, pivot);
            for i in 0..aug.rows {
                if i != rank && aug.get(i, col) {
                    aug.xor_row(i, rank);
                }
            }
            pivots.push((rank, col));
            rank += 1;
        }
        for i in rank..aug.rows {
            for j in 0..rhs.cols {
                if aug.get(i, self.cols + j) {
                    return Err(Gf2Error::InconsistentSystem);
                }
            }
        }
        let mut columns = Vec::with_capacity(rhs.cols);
        for j in 0..rhs.cols {
            let mut x = BitVec::zeros(self.cols);
            for &(pr, pc) in &pivots {
                if aug.get(pr, self.cols + j) {
                    x.set(pc, true);
                }
            }
            columns.push(x);
        }
        Ok(Solution {
            columns,
            unique: rank == self.cols,
        })
    }

    pub fn solve_vec(&self, b: &BitVec) -> Result<Solution, Gf2Error> {
        let rhs = BitMatrix::from_fn(b.len(), 1, |i, _| b.get(i));
        self.solve(&rhs)
    }

    /// Inverse of a square full-rank matrix.
    pub fn invert(&self) -> Result<BitMatrix, Gf2Error> {
        if self.rows != self.cols {
            return Err(Gf2Error::Singular);
        }
        let sol = self
            .solve(&BitMatrix::identity(self.rows))
            .map_err(|_| Gf2Error::Singular)?;
        if !sol.unique {
            return Err(Gf2Error::Singular);
        }
        let mut inv = BitMatrix::zeros(self.rows, self.rows);
        for (j, col) in sol.columns.iter().enumerate() {
            for i in 0..self.rows {
                if col.get(i) {
                    inv.set(i, j, true);
                }
            }
        }
        Ok(inv)
    }

    /// Kronecker product.
    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out.set_block(i * other.rows, j * other.cols, other);
                }
            }
        }
        out
    }

    /// Writes `block` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &BitMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                if block.get(i, j) {
                    self.set(r0 + i, c0 + j, true);
                }
            }
        }
    }

    pub fn column(&self, j: usize) -> BitVec {
        BitVec::from_fn(self.rows, |i| self.get(i, j))
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl rand::RngCore) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for w in m.words.iter_mut() {
            *w = rng.next_u64();
        }
        for i in 0..rows {
            let used = cols % WORD_BITS;
            if used != 0 {
                m.words[i * m.stride + m.stride - 1] &= (1u64 << used) - 1;
            }
        }
        m
    }

    /// One lowercase-hex string per row: bits packed LSB-first within each
    /// byte, byte 0 covering columns 0-7.
    pub fn row_hex(&self, i: usize) -> String {
        let bytes = BitVec::from_fn(self.cols, |j| self.get(i, j)).to_bytes_lsb();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// All rows concatenated into one hex string (rows have fixed width, so
    /// the split is unambiguous given the dimensions).
    pub fn to_hex(&self) -> String {
        (0..self.rows).map(|i| self.row_hex(i)).collect()
    }

    pub fn from_hex(rows: usize, cols: usize, hex: &str) -> Result<BitMatrix, Gf2Error> {
        let row_chars = cols.div_ceil(8) * 2;
        if hex.len() != rows * row_chars {
            return Err(Gf2Error::Parse(format!(
                "expected {} hex chars for a {rows}x{cols} matrix, got {}",
                rows * row_chars,
                hex.len()
            )));
        }
        let mut m = BitMatrix::zeros(rows, cols);
        for i in 0..rows {
            let row = &hex[i * row_chars..(i + 1) * row_chars];
            let bytes = decode_hex(row)?;
            for j in 0..cols {
                if bytes[j / 8] >> (j % 8) & 1 == 1 {
                    m.set(i, j, true);
                }
            }
            // padding bits must be zero
            for j in cols..bytes.len() * 8 {
                if bytes[j / 8] >> (j % 8) & 1 == 1 {
                    return Err(Gf2Error::Parse(format!(
                        "nonzero padding bit at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Text form: header line `gf2 <rows> <cols>`, then one hex string per row.
    pub fn to_text(&self) -> String {
        let mut out = format!("gf2 {} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            out.push_str(&self.row_hex(i));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<BitMatrix, Gf2Error> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Gf2Error::Parse("empty input".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "gf2" {
            return Err(Gf2Error::Parse(format!("bad header: {header:?}")));
        }
        let rows: usize = parts[1]
            .parse()
            .map_err(|_| Gf2Error::Parse("bad row count".into()))?;
        let cols: usize = parts[2]
            .parse()
            .map_err(|_| Gf2Error::Parse("bad column count".into()))?;
        let mut hex = String::new();
        for _ in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Gf2Error::Parse("missing matrix row".into()))?;
            hex.push_str(line.trim());
        }
        BitMatrix::from_hex(rows, cols, &hex)
    }
}

fn decode_hex(s: &str) -> Result<Vec<u8>, Gf2Error> {
    if s.len() % 2 != 0 {
        return Err(Gf2Error::Parse("odd hex length".into()));
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| Gf2Error::Parse(format!("bad hex at byte {i}")))
        })
        .collect()
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{}", self.get(i, j) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A grid of equally sized square [`BitMatrix`] blocks.
#[derive(Clone, PartialEq, Eq)]
pub struct BlockMatrix {
    block_rows: usize,
    block_cols: usize,
    block_dim: usize,
    blocks: Vec<BitMatrix>,
}

impl BlockMatrix {
    pub fn from_blocks(grid: Vec<Vec<BitMatrix>>) -> Result<BlockMatrix, Gf2Error> {
        let block_rows = grid.len();
        let block_cols = grid.first().map_or(0, |r| r.len());
        let mut dim = None;
        for row in &grid {
            if row.len() != block_cols {
                return Err(Gf2Error::Parse("ragged block grid".into()));
            }
            for b in row {
                let d = *dim.get_or_insert(b.rows());
                if b.rows() != d || b.cols() != d {
                    return Err(Gf2Error::DimensionMismatch {
                        op: "from_blocks",
                        lhs: format!("{d}x{d}"),
                        rhs: format!("{}x{}", b.rows(), b.cols()),
                    });
                }
            }
        }
        Ok(BlockMatrix {
            block_rows,
            block_cols,
            block_dim: dim.unwrap_or(0),
            blocks: grid.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(block_rows: usize, block_cols: usize, block_dim: usize) -> BlockMatrix {
        BlockMatrix {
            block_rows,
            block_cols,
            block_dim,
            blocks: vec![BitMatrix::zeros(block_dim, block_dim); block_rows * block_cols],
        }
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn block(&self, i: usize, j: usize) -> &BitMatrix {
        &self.blocks[i * self.block_cols + j]
    }

    pub fn set_block(&mut self, i: usize, j: usize, b: BitMatrix) {
        assert!(b.rows() == self.block_dim && b.cols() == self.block_dim);
        self.blocks[i * self.block_cols + j] = b;
    }

    /// Flattens into a `(block_rows*dim) x (block_cols*dim)` matrix whose
    /// `(a*dim+i, b*dim+j)` entry equals entry `(i, j)` of block `(a, b)`.
    pub fn flatten(&self) -> BitMatrix {
        let d = self.block_dim;
        let mut out = BitMatrix::zeros(self.block_rows * d, self.block_cols * d);
        for i in 0..self.block_rows {
            for j in 0..self.block_cols {
                out.set_block(i * d, j * d, self.block(i, j));
            }
        }
        out
    }

    /// Inverse of [`BlockMatrix::flatten`] for a given block dimension.
    pub fn unflatten(flat: &BitMatrix, block_dim: usize) -> Result<BlockMatrix, Gf2Error> {
        if block_dim == 0 || flat.rows() % block_dim != 0 || flat.cols() % block_dim != 0 {
            return Err(Gf2Error::DimensionMismatch {
                op: "unflatten",
                lhs: format!("{}x{}", flat.rows(), flat.cols()),
                rhs: format!("block dim {block_dim}"),
            });
        }
        let block_rows = flat.rows() / block_dim;
        let block_cols = flat.cols() / block_dim;
        let mut out = BlockMatrix::zeros(block_rows, block_cols, block_dim);
        for i in 0..block_rows {
            for j in 0..block_cols {
                let b = BitMatrix::from_fn(block_dim, block_dim, |x, y| {
                    flat.get(i * block_dim + x, j * block_dim + y)
                });
                out.set_block(i, j, b);
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for BlockMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BlockMatrix {}x{} of {dim}x{dim}",
            self.block_rows,
            self.block_cols,
            dim = self.block_dim
        )
    }
}
