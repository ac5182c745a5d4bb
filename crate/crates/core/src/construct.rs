//! The two generic constructions. Starting from a base code, each builds the
//! block parity-check matrix H of a (k+r, k, l) binary array code:
//!
//! * [`build_c1`] burns one s-ary digit of the chunk index per group of s
//!   nodes; repairing any node touches only the chunks whose digit matches,
//!   so reads equal downloads (optimal access).
//! * [`build_c2`] packs s+1 nodes per group by giving the extra node a
//!   block-diagonal column; its repair downloads helper-side XOR sums
//!   (optimal repair, reads exceed downloads on that node).
//!
//! Every nonzero m x m entry of H is a base block times one of the
//! coefficient matrices, so H is kept as a sparse list of tagged entries and
//! flattened on demand.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basecode::BaseCode;
use crate::gf2::{BitMatrix, Gf2Error};
use crate::indexing::{digit_at, replace_digit_unchecked, wrap_index};

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("coefficient set rejected: {0}")]
    CoefficientRank(String),
    #[error("base code too narrow: construction needs {needed} block columns, base has {have}")]
    BaseTooNarrow { needed: usize, have: usize },
    #[error("code file: {0}")]
    Format(String),
    #[error(transparent)]
    Base(#[from] crate::basecode::BaseCodeError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Which coefficient matrix decorates an entry of H.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PsiTag {
    Identity,
    Psi1,
    Psi2,
    Psi3,
    Psi4,
}

/// Four full-rank m x m matrices whose 2m x 2m stack
/// [[psi1, psi4], [psi3, psi2]] is also full rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    m: usize,
    identity: BitMatrix,
    psi: [BitMatrix; 4],
    inv: [BitMatrix; 4],
}

impl CoefficientSet {
    /// psi1 = psi2 = psi3 = I and psi4 = the companion matrix of the fixed
    /// degree-m primitive polynomial. Both psi4 and I + psi4 are full rank
    /// because x and x+1 are coprime to a primitive polynomial.
    pub fn identity_simplified(m: usize) -> Result<CoefficientSet, ConstructError> {
        let i = BitMatrix::identity(m);
        let c = crate::basecode::companion_matrix(m)?;
        CoefficientSet::custom(i.clone(), i.clone(), i, c)
    }

    /// Validates the rank invariants and builds the set.
    pub fn custom(
        psi1: BitMatrix,
        psi2: BitMatrix,
        psi3: BitMatrix,
        psi4: BitMatrix,
    ) -> Result<CoefficientSet, ConstructError> {
        let m = psi1.rows();
        let psi = [psi1, psi2, psi3, psi4];
        for (idx, p) in psi.iter().enumerate() {
            if p.rows() != m || p.cols() != m {
                return Err(ConstructError::CoefficientRank(format!(
                    "psi{} is {}x{}, expected {m}x{m}",
                    idx + 1,
                    p.rows(),
                    p.cols()
                )));
            }
            if p.rank() != m {
                return Err(ConstructError::CoefficientRank(format!(
                    "psi{} is rank deficient",
                    idx + 1
                )));
            }
        }
        let mut stack = BitMatrix::zeros(2 * m, 2 * m);
        stack.set_block(0, 0, &psi[0]);
        stack.set_block(0, m, &psi[3]);
        stack.set_block(m, 0, &psi[2]);
        stack.set_block(m, m, &psi[1]);
        if stack.rank() != 2 * m {
            return Err(ConstructError::CoefficientRank(
                "stacked [[psi1, psi4], [psi3, psi2]] is rank deficient".into(),
            ));
        }
        Self::unchecked(psi)
    }

    /// Skips the rank invariants; only for tests that need to drive the
    /// verifier with an intentionally broken set.
    #[doc(hidden)]
    pub fn unchecked(psi: [BitMatrix; 4]) -> Result<CoefficientSet, ConstructError> {
        let m = psi[0].rows();
        let inv = [
            psi[0].invert()?,
            psi[1].invert()?,
            psi[2].invert()?,
            psi[3].invert()?,
        ];
        Ok(CoefficientSet {
            m,
            identity: BitMatrix::identity(m),
            psi,
            inv,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self, tag: PsiTag) -> &BitMatrix {
        match tag {
            PsiTag::Identity => &self.identity,
            PsiTag::Psi1 => &self.psi[0],
            PsiTag::Psi2 => &self.psi[1],
            PsiTag::Psi3 => &self.psi[2],
            PsiTag::Psi4 => &self.psi[3],
        }
    }

    pub fn inverse(&self, tag: PsiTag) -> &BitMatrix {
        match tag {
            PsiTag::Identity => &self.identity,
            PsiTag::Psi1 => &self.inv[0],
            PsiTag::Psi2 => &self.inv[1],
            PsiTag::Psi3 => &self.inv[2],
            PsiTag::Psi4 => &self.inv[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    C1,
    C2,
}

/// One nonzero m x m entry of a block H_{i,j}: located at block row `row`
/// and block column `col` inside the l' x l' grid, with value
/// `A_{i, base_col} * psi(tag)`. The pattern is shared across all i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockEntry {
    pub row: u32,
    pub col: u32,
    pub base_col: u32,
    pub tag: PsiTag,
}

#[derive(Debug, Clone)]
struct HBlock {
    entries: Vec<BlockEntry>,
    row_ptr: Vec<usize>,
}

impl HBlock {
    fn new(mut entries: Vec<BlockEntry>, chunk_count: usize) -> HBlock {
        entries.sort_by_key(|e| (e.row, e.col));
        let mut row_ptr = vec![0; chunk_count + 1];
        for e in &entries {
            row_ptr[e.row as usize + 1] += 1;
        }
        for a in 0..chunk_count {
            row_ptr[a + 1] += row_ptr[a];
        }
        HBlock { entries, row_ptr }
    }

    fn row(&self, a: usize) -> &[BlockEntry] {
        &self.entries[self.row_ptr[a]..self.row_ptr[a + 1]]
    }
}

/// A constructed (k+r, k, l) binary MDS array code.
#[derive(Debug, Clone)]
pub struct ArrayCode {
    pub kind: CodeKind,
    pub k: usize,
    pub r: usize,
    /// Repair locality parameter; each group ties one chunk digit to s nodes.
    pub s: usize,
    pub m: usize,
    /// Group count.
    pub g: usize,
    /// Chunks per node; each column splits into this many m-bit chunks.
    pub chunk_count: usize,
    /// Bits per node: m * chunk_count.
    pub l: usize,
    /// Helper count for single-node repair: k + s - 1.
    pub d: usize,
    /// Digit positions carried by a chunk index.
    pub digit_count: usize,
    pub base: BaseCode,
    pub coeffs: CoefficientSet,
    blocks: Vec<HBlock>,
    products: HashMap<(usize, usize, PsiTag), BitMatrix>,
}

impl ArrayCode {
    pub fn n(&self) -> usize {
        self.k + self.r
    }

    /// Node index decomposed into (group, offset). Groups have s nodes for
    /// C1 (the last may be partial) and s+1 nodes for C2.
    pub fn group_of(&self, j: usize) -> (usize, usize) {
        match self.kind {
            CodeKind::C1 => {
                if j < self.g * self.s {
                    (j / self.s, j % self.s)
                } else {
                    (self.g, j - self.g * self.s)
                }
            }
            CodeKind::C2 => (j / (self.s + 1), j % (self.s + 1)),
        }
    }

    /// Nonzero entries in block row `a` of H_{i,j}; the pattern is the same
    /// for every i.
    pub fn h_row(&self, j: usize, a: usize) -> &[BlockEntry] {
        self.blocks[j].row(a)
    }

    pub fn h_entries(&self, j: usize) -> &[BlockEntry] {
        &self.blocks[j].entries
    }

    /// Cached product A_{i, base_col} * psi(tag).
    pub fn product(&self, i: usize, base_col: usize, tag: PsiTag) -> &BitMatrix {
        &self.products[&(i, base_col, tag)]
    }

    /// Base block column stacked over all i, the column family L of an entry.
    pub fn base_column_stack(&self, base_col: usize) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.r * self.m, self.m);
        for i in 0..self.r {
            out.set_block(i * self.m, 0, self.base.block(i, base_col));
        }
        out
    }

    /// Materializes H_{i,j} as a dense l x l matrix.
    pub fn h_block_dense(&self, i: usize, j: usize) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.l, self.l);
        for e in self.h_entries(j) {
            out.set_block(
                e.row as usize * self.m,
                e.col as usize * self.m,
                self.product(i, e.base_col as usize, e.tag),
            );
        }
        out
    }

    /// Flattens the block columns `cols` of H into an (r*l) x (|cols|*l)
    /// matrix, the shape rank checks and erasure solves run on.
    pub fn flatten_columns(&self, cols: &[usize]) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.r * self.l, cols.len() * self.l);
        for (c, &j) in cols.iter().enumerate() {
            for e in self.h_entries(j) {
                for i in 0..self.r {
                    out.set_block(
                        i * self.l + e.row as usize * self.m,
                        c * self.l + e.col as usize * self.m,
                        self.product(i, e.base_col as usize, e.tag),
                    );
                }
            }
        }
        out
    }

    fn finish(
        kind: CodeKind,
        k: usize,
        s: usize,
        g: usize,
        digit_count: usize,
        base: BaseCode,
        coeffs: CoefficientSet,
        entry_grid: Vec<Vec<BlockEntry>>,
    ) -> ArrayCode {
        let r = base.r;
        let m = base.m;
        let chunk_count = s.pow(digit_count as u32);
        let blocks: Vec<HBlock> = entry_grid
            .into_iter()
            .map(|entries| HBlock::new(entries, chunk_count))
            .collect();
        let mut products = HashMap::new();
        for block in &blocks {
            for e in &block.entries {
                for i in 0..r {
                    products
                        .entry((i, e.base_col as usize, e.tag))
                        .or_insert_with(|| {
                            base.block(i, e.base_col as usize)
                                .mul(coeffs.matrix(e.tag))
                                .expect("coefficient product")
                        });
                }
            }
        }
        ArrayCode {
            kind,
            k,
            r,
            s,
            m,
            g,
            chunk_count,
            l: m * chunk_count,
            d: k + s - 1,
            digit_count,
            base,
            coeffs,
            blocks,
            products,
        }
    }
}

/// Closed-form sub-packetization of each construction.
pub fn expected_subpacketization(kind: CodeKind, k: usize, r: usize, s: usize, m: usize) -> usize {
    let n = k + r;
    match kind {
        CodeKind::C1 => m * s.pow(n.div_ceil(s) as u32),
        CodeKind::C2 => m * s.pow((n / (s + 1)) as u32),
    }
}

/// Optimal-access construction: groups of s nodes, one chunk digit each.
///
/// For node j = v*s + u, row a of H_{i,j} carries the diagonal
/// A_{i,j} * {psi1 | I | psi2} picked by comparing digit a_v with u, and,
/// when a_v = u, arms A_{i, sigma(v*s+w)} * {psi3 | psi4} at block column
/// a(v, w) for the other offsets w of the group (wrapping past the last,
/// partial group).
pub fn build_c1(
    base: &BaseCode,
    k: usize,
    s: usize,
    coeffs: &CoefficientSet,
) -> Result<ArrayCode, ConstructError> {
    let r = base.r;
    if s < 1 || s > r {
        return Err(ConstructError::InvalidParams(format!(
            "need 1 <= s <= r, got s = {s}, r = {r}"
        )));
    }
    if k <= r || k > base.k {
        return Err(ConstructError::InvalidParams(format!(
            "need r < k <= K, got k = {k}, r = {r}, K = {}",
            base.k
        )));
    }
    if coeffs.m() != base.m {
        return Err(ConstructError::InvalidParams(format!(
            "coefficient matrices are {}x{}, base blocks are {mb}x{mb}",
            coeffs.m(),
            coeffs.m(),
            mb = base.m
        )));
    }
    let n = k + r;
    let g = n / s;
    let digit_count = n.div_ceil(s);
    let chunk_count = s.pow(digit_count as u32);
    let mut grid = Vec::with_capacity(n);
    for j in 0..n {
        let (v, u) = if j < g * s {
            (j / s, j % s)
        } else {
            (g, j - g * s)
        };
        let mut entries = Vec::new();
        for a in 0..chunk_count {
            let av = digit_at(a, v, s);
            let diag_tag = match av.cmp(&u) {
                std::cmp::Ordering::Less => PsiTag::Psi1,
                std::cmp::Ordering::Equal => PsiTag::Identity,
                std::cmp::Ordering::Greater => PsiTag::Psi2,
            };
            entries.push(BlockEntry {
                row: a as u32,
                col: a as u32,
                base_col: j as u32,
                tag: diag_tag,
            });
            if av == u {
                for w in 0..s {
                    if w == u {
                        continue;
                    }
                    entries.push(BlockEntry {
                        row: a as u32,
                        col: replace_digit_unchecked(a, v, w, s) as u32,
                        base_col: wrap_index(v * s + w, n) as u32,
                        tag: if w < u { PsiTag::Psi3 } else { PsiTag::Psi4 },
                    });
                }
            }
        }
        grid.push(entries);
    }
    Ok(ArrayCode::finish(
        CodeKind::C1,
        k,
        s,
        g,
        digit_count,
        base.clone(),
        coeffs.clone(),
        grid,
    ))
}

/// Optimal-repair construction: groups of s+1 nodes with s = r/2.
///
/// The first s nodes of group v follow the C1 pattern against base columns
/// 2*v*s + w; the last node is block diagonal with (a, a) entry
/// A_{i, 2*v*s + s + a_v}.
pub fn build_c2(
    base: &BaseCode,
    k: usize,
    coeffs: &CoefficientSet,
) -> Result<ArrayCode, ConstructError> {
    let r = base.r;
    if r < 4 || r % 2 != 0 {
        return Err(ConstructError::InvalidParams(format!(
            "need even r >= 4, got r = {r}"
        )));
    }
    let s = r / 2;
    let n = k + r;
    if n % (s + 1) != 0 {
        return Err(ConstructError::InvalidParams(format!(
            "need (s+1) | (k+r): s+1 = {}, k+r = {n}",
            s + 1
        )));
    }
    if coeffs.m() != base.m {
        return Err(ConstructError::InvalidParams(
            "coefficient dimension does not match base blocks".into(),
        ));
    }
    let g = n / (s + 1);
    if 2 * s * g > base.n() {
        return Err(ConstructError::BaseTooNarrow {
            needed: 2 * s * g,
            have: base.n(),
        });
    }
    let digit_count = g;
    let chunk_count = s.pow(digit_count as u32);
    let mut grid = Vec::with_capacity(n);
    for j in 0..n {
        let (v, u) = (j / (s + 1), j % (s + 1));
        let mut entries = Vec::new();
        for a in 0..chunk_count {
            let av = digit_at(a, v, s);
            if u < s {
                let diag_tag = match av.cmp(&u) {
                    std::cmp::Ordering::Less => PsiTag::Psi1,
                    std::cmp::Ordering::Equal => PsiTag::Identity,
                    std::cmp::Ordering::Greater => PsiTag::Psi2,
                };
                entries.push(BlockEntry {
                    row: a as u32,
                    col: a as u32,
                    base_col: (2 * v * s + u) as u32,
                    tag: diag_tag,
                });
                if av == u {
                    for w in 0..s {
                        if w == u {
                            continue;
                        }
                        entries.push(BlockEntry {
                            row: a as u32,
                            col: replace_digit_unchecked(a, v, w, s) as u32,
                            base_col: (2 * v * s + w) as u32,
                            tag: if w < u { PsiTag::Psi3 } else { PsiTag::Psi4 },
                        });
                    }
                }
            } else {
                entries.push(BlockEntry {
                    row: a as u32,
                    col: a as u32,
                    base_col: (2 * v * s + s + av) as u32,
                    tag: PsiTag::Identity,
                });
            }
        }
        grid.push(entries);
    }
    Ok(ArrayCode::finish(
        CodeKind::C2,
        k,
        s,
        g,
        digit_count,
        base.clone(),
        coeffs.clone(),
        grid,
    ))
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    kind: CodeKind,
    k: usize,
    r: usize,
    s: usize,
    m: usize,
    base: serde_json::Value,
    coeffs: CoeffsFile,
    #[serde(rename = "H")]
    h: Vec<(usize, usize, usize, usize, String)>,
}

#[derive(Serialize, Deserialize)]
pub struct CoeffsFile {
    pub psi1: String,
    pub psi2: String,
    pub psi3: String,
    pub psi4: String,
}

impl CoeffsFile {
    pub fn to_set(&self, m: usize) -> Result<CoefficientSet, ConstructError> {
        CoefficientSet::custom(
            BitMatrix::from_hex(m, m, &self.psi1)?,
            BitMatrix::from_hex(m, m, &self.psi2)?,
            BitMatrix::from_hex(m, m, &self.psi3)?,
            BitMatrix::from_hex(m, m, &self.psi4)?,
        )
    }
}

impl ArrayCode {
    /// Serializes parameters, the embedded base code, the coefficient
    /// matrices, and the sparse nonzero blocks of H.
    pub fn to_json(&self) -> String {
        let mut h = Vec::new();
        for j in 0..self.n() {
            for e in self.h_entries(j) {
                for i in 0..self.r {
                    h.push((
                        i,
                        j,
                        e.row as usize,
                        e.col as usize,
                        self.product(i, e.base_col as usize, e.tag).to_hex(),
                    ));
                }
            }
        }
        h.sort();
        let file = CodeFile {
            kind: self.kind,
            k: self.k,
            r: self.r,
            s: self.s,
            m: self.m,
            base: serde_json::from_str(&self.base.to_json()).expect("base document"),
            coeffs: CoeffsFile {
                psi1: self.coeffs.matrix(PsiTag::Psi1).to_hex(),
                psi2: self.coeffs.matrix(PsiTag::Psi2).to_hex(),
                psi3: self.coeffs.matrix(PsiTag::Psi3).to_hex(),
                psi4: self.coeffs.matrix(PsiTag::Psi4).to_hex(),
            },
            h,
        };
        serde_json::to_string_pretty(&file).expect("code serialization")
    }

    /// Rebuilds the code from the stored parameters and cross-checks the
    /// stored sparse H against the reconstruction.
    pub fn from_json(text: &str) -> Result<ArrayCode, ConstructError> {
        let file: CodeFile =
            serde_json::from_str(text).map_err(|e| ConstructError::Format(e.to_string()))?;
        let base = BaseCode::from_json(&file.base.to_string())?;
        let coeffs = file.coeffs.to_set(file.m)?;
        if base.r != file.r || base.m != file.m {
            return Err(ConstructError::Format(
                "base code parameters disagree with code parameters".into(),
            ));
        }
        let code = match file.kind {
            CodeKind::C1 => build_c1(&base, file.k, file.s, &coeffs)?,
            CodeKind::C2 => {
                let rebuilt = build_c2(&base, file.k, &coeffs)?;
                if rebuilt.s != file.s {
                    return Err(ConstructError::Format("stored s disagrees with r/2".into()));
                }
                rebuilt
            }
        };
        let mut stored = file.h;
        stored.sort();
        let mut rebuilt = Vec::new();
        for j in 0..code.n() {
            for e in code.h_entries(j) {
                for i in 0..code.r {
                    rebuilt.push((
                        i,
                        j,
                        e.row as usize,
                        e.col as usize,
                        code.product(i, e.base_col as usize, e.tag).to_hex(),
                    ));
                }
            }
        }
        rebuilt.sort();
        if stored != rebuilt {
            return Err(ConstructError::Format(
                "stored parity-check blocks do not match the construction".into(),
            ));
        }
        Ok(code)
    }
}
