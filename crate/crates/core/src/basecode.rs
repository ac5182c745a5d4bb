//! Base codes: small binary MDS array codes given by an r x (K+r) grid of
//! m x m parity-check blocks. Both generic constructions consume one of
//! these as their seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{BitMatrix, BlockMatrix};
use crate::indexing::combinations;

#[derive(Debug, Error)]
pub enum BaseCodeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no fixed primitive polynomial for degree {0}")]
    UnsupportedDegree(usize),
    #[error("base code is not MDS; witness block columns {witness:?}")]
    NotMds { witness: Vec<usize> },
    #[error("base code file: {0}")]
    Format(String),
}

/// Where a base code came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Evenodd,
    RsCompanion,
    File,
}

/// A verified (K+r, K, m) binary MDS array code, exposed as its block
/// parity-check matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseCode {
    /// Information node count.
    pub k: usize,
    pub r: usize,
    pub m: usize,
    pub provenance: Provenance,
    a: BlockMatrix,
}

/// Outcome of an exhaustive block-submatrix rank sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MdsVerdict {
    Pass,
    Fail { witness: Vec<usize> },
}

impl MdsVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, MdsVerdict::Pass)
    }
}

/// Fixed primitive polynomials, one per supported degree, as coefficient
/// bit masks (bit i = coefficient of x^i, including the leading term).
pub fn primitive_poly(degree: usize) -> Result<u64, BaseCodeError> {
    Ok(match degree {
        2 => 0b111,         // x^2 + x + 1
        3 => 0b1011,        // x^3 + x + 1
        4 => 0b10011,       // x^4 + x + 1
        5 => 0b100101,      // x^5 + x^2 + 1
        8 => 0b1_0001_1101, // x^8 + x^4 + x^3 + x^2 + 1
        d => return Err(BaseCodeError::UnsupportedDegree(d)),
    })
}

/// Companion matrix of the fixed degree-`m` primitive polynomial: the matrix
/// of multiplication by x in F_2\[x\]/(p), acting on coefficient columns.
pub fn companion_matrix(m: usize) -> Result<BitMatrix, BaseCodeError> {
    let poly = primitive_poly(m)?;
    let mut c = BitMatrix::zeros(m, m);
    for i in 0..m - 1 {
        c.set(i + 1, i, true);
    }
    for i in 0..m {
        if poly >> i & 1 == 1 {
            c.set(i, m - 1, true);
        }
    }
    Ok(c)
}

pub fn matrix_pow(base: &BitMatrix, mut exp: usize) -> BitMatrix {
    let mut result = BitMatrix::identity(base.rows());
    let mut sq = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = result.mul(&sq).expect("square power");
        }
        sq = sq.mul(&sq).expect("square power");
        exp >>= 1;
    }
    result
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

impl BaseCode {
    /// Wraps an already-built block matrix, checking dimensions and the MDS
    /// property.
    pub fn new(
        k: usize,
        r: usize,
        m: usize,
        provenance: Provenance,
        a: BlockMatrix,
    ) -> Result<BaseCode, BaseCodeError> {
        if a.block_rows() != r || a.block_cols() != k + r || a.block_dim() != m {
            return Err(BaseCodeError::InvalidParams(format!(
                "block matrix is {}x{} of dim {}, expected {r}x{} of dim {m}",
                a.block_rows(),
                a.block_cols(),
                a.block_dim(),
                k + r
            )));
        }
        let code = BaseCode {
            k,
            r,
            m,
            provenance,
            a,
        };
        match code.verify_mds() {
            MdsVerdict::Pass => Ok(code),
            MdsVerdict::Fail { witness } => Err(BaseCodeError::NotMds { witness }),
        }
    }

    pub fn n(&self) -> usize {
        self.k + self.r
    }

    pub fn block(&self, i: usize, j: usize) -> &BitMatrix {
        self.a.block(i, j)
    }

    pub fn matrix(&self) -> &BlockMatrix {
        &self.a
    }

    /// Checks that every r x r block submatrix flattens to full rank r*m.
    pub fn verify_mds(&self) -> MdsVerdict {
        verify_block_mds(&self.a, self.r, self.m)
    }
}

/// Exhaustive Prop.-1-style check on an arbitrary r x n block grid.
pub fn verify_block_mds(a: &BlockMatrix, r: usize, m: usize) -> MdsVerdict {
    let n = a.block_cols();
    for subset in combinations(n, r) {
        let mut sub = BitMatrix::zeros(r * m, r * m);
        for (c, &j) in subset.iter().enumerate() {
            for i in 0..r {
                sub.set_block(i * m, c * m, a.block(i, j));
            }
        }
        if sub.rank() != r * m {
            return MdsVerdict::Fail { witness: subset };
        }
    }
    MdsVerdict::Pass
}

/// EVENODD base code with r = 2: requires m+1 prime and K <= m.
pub fn evenodd_base(m: usize, k: usize) -> Result<BaseCode, BaseCodeError> {
    if !is_prime(m + 1) {
        return Err(BaseCodeError::InvalidParams(format!(
            "m+1 = {} is not prime",
            m + 1
        )));
    }
    if k > m || k == 0 {
        return Err(BaseCodeError::InvalidParams(format!(
            "need 1 <= K <= m, got K = {k}, m = {m}"
        )));
    }
    let r = 2;
    // P = [I_m 1] (m x m+1), C the (m+1)-cyclic shift, Q = [I_m 0]^T.
    let p = BitMatrix::from_fn(m, m + 1, |i, j| j == i || j == m);
    let c = BitMatrix::from_fn(m + 1, m + 1, |i, j| {
        (i < m && j == i + 1) || (i == m && j == 0)
    });
    let q = BitMatrix::from_fn(m + 1, m, |i, j| i == j);
    let mut a = BlockMatrix::zeros(r, k + r, m);
    for j in 0..=k {
        a.set_block(0, j, BitMatrix::identity(m));
    }
    a.set_block(1, 0, BitMatrix::identity(m));
    a.set_block(1, k + 1, BitMatrix::identity(m));
    for j in 1..k {
        let shifted = p
            .mul(&matrix_pow(&c, m + 1 - j))
            .and_then(|pm| pm.mul(&q))
            .expect("evenodd block product");
        a.set_block(1, j, shifted);
    }
    BaseCode::new(k, r, m, Provenance::Evenodd, a)
}

/// Reed-Solomon parity check over GF(2^m) rendered as binary m x m blocks:
/// A_{i,j} = C^(i*j) with C the companion matrix of the fixed primitive
/// polynomial. MDS as long as K + r <= 2^m - 1.
pub fn rs_companion_base(k: usize, r: usize, m: usize) -> Result<BaseCode, BaseCodeError> {
    if k == 0 || r == 0 {
        return Err(BaseCodeError::InvalidParams("need K, r >= 1".into()));
    }
    if k + r > (1usize << m) - 1 {
        return Err(BaseCodeError::InvalidParams(format!(
            "K + r = {} exceeds 2^{m} - 1 = {}",
            k + r,
            (1usize << m) - 1
        )));
    }
    let c = companion_matrix(m)?;
    let mut a = BlockMatrix::zeros(r, k + r, m);
    for i in 0..r {
        for j in 0..k + r {
            a.set_block(i, j, matrix_pow(&c, i * j));
        }
    }
    BaseCode::new(k, r, m, Provenance::RsCompanion, a)
}

#[derive(Serialize, Deserialize)]
struct BaseCodeFile {
    #[serde(rename = "K")]
    k: usize,
    r: usize,
    m: usize,
    provenance: Provenance,
    /// Row-major grid of blocks, each in the gf2 hex row encoding.
    blocks: Vec<Vec<String>>,
}

impl BaseCode {
    pub fn to_json(&self) -> String {
        let blocks = (0..self.r)
            .map(|i| (0..self.n()).map(|j| self.block(i, j).to_hex()).collect())
            .collect();
        let file = BaseCodeFile {
            k: self.k,
            r: self.r,
            m: self.m,
            provenance: self.provenance,
            blocks,
        };
        serde_json::to_string_pretty(&file).expect("base code serialization")
    }

    /// Parses and re-verifies a base code document.
    pub fn from_json(text: &str) -> Result<BaseCode, BaseCodeError> {
        let file: BaseCodeFile =
            serde_json::from_str(text).map_err(|e| BaseCodeError::Format(e.to_string()))?;
        if file.blocks.len() != file.r {
            return Err(BaseCodeError::Format(format!(
                "expected {} block rows, got {}",
                file.r,
                file.blocks.len()
            )));
        }
        let mut grid = Vec::with_capacity(file.r);
        for row in &file.blocks {
            if row.len() != file.k + file.r {
                return Err(BaseCodeError::Format(format!(
                    "expected {} block columns, got {}",
                    file.k + file.r,
                    row.len()
                )));
            }
            let mut blocks = Vec::with_capacity(row.len());
            for hex in row {
                blocks.push(
                    BitMatrix::from_hex(file.m, file.m, hex)
                        .map_err(|e| BaseCodeError::Format(e.to_string()))?,
                );
            }
            grid.push(blocks);
        }
        let a = BlockMatrix::from_blocks(grid).map_err(|e| BaseCodeError::Format(e.to_string()))?;
        BaseCode::new(file.k, file.r, file.m, file.provenance, a)
    }
}
