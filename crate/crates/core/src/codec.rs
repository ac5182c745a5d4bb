//! Codewords, systematic encoding, erasure decoding, and the exhaustive MDS
//! verification of a constructed code.
//!
//! The erasure decoder builds one flat GF(2) system over all erased columns
//! and solves it with no construction-specific shortcuts, so it doubles as
//! the independent oracle for the structured repair paths.

use thiserror::Error;

use crate::basecode::MdsVerdict;
use crate::construct::ArrayCode;
use crate::gf2::{BitVec, Gf2Error};
use crate::indexing::combinations;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("expected {expected} information columns of {bits} bits, got {got}")]
    InfoShape {
        expected: usize,
        bits: usize,
        got: String,
    },
    #[error("{got} erasures exceed the correction radius r = {r}")]
    TooManyErasures { got: usize, r: usize },
    #[error("erased column index {0} out of range")]
    BadColumnIndex(usize),
    #[error("survivor data is inconsistent with the code")]
    Inconsistent,
    #[error("parity solve failed; code is not MDS: {0}")]
    SolveFailed(Gf2Error),
    #[error("codeword file: {0}")]
    Format(String),
}

/// An l x (k+r) bit array; column j is the content of node j, split into
/// chunks of m bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    l: usize,
    m: usize,
    columns: Vec<BitVec>,
}

impl Codeword {
    pub fn zero(code: &ArrayCode) -> Codeword {
        Codeword {
            l: code.l,
            m: code.m,
            columns: vec![BitVec::zeros(code.l); code.n()],
        }
    }

    pub fn from_columns(code: &ArrayCode, columns: Vec<BitVec>) -> Result<Codeword, CodecError> {
        if columns.len() != code.n() || columns.iter().any(|c| c.len() != code.l) {
            return Err(CodecError::InfoShape {
                expected: code.n(),
                bits: code.l,
                got: format!("{} columns", columns.len()),
            });
        }
        Ok(Codeword {
            l: code.l,
            m: code.m,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn column(&self, t: usize) -> &BitVec {
        &self.columns[t]
    }

    pub fn set_column(&mut self, t: usize, col: BitVec) {
        assert_eq!(col.len(), self.l);
        self.columns[t] = col;
    }

    /// Chunk `a` of node `t`: bits [a*m, (a+1)*m).
    pub fn chunk(&self, t: usize, a: usize) -> BitVec {
        self.columns[t].subrange(a * self.m, self.m)
    }

    /// Binary form: header line `bmds <l> <n>`, then each column as
    /// ceil(l/8) bytes, LSB-first within bytes. Several codewords of the
    /// same shape may be concatenated after one header.
    pub fn write_many(code: &ArrayCode, words: &[Codeword]) -> Vec<u8> {
        let mut out = format!("bmds {} {}\n", code.l, code.n()).into_bytes();
        for w in words {
            for t in 0..w.n() {
                out.extend_from_slice(&w.column(t).to_bytes_lsb());
            }
        }
        out
    }

    pub fn read_many(code: &ArrayCode, bytes: &[u8]) -> Result<Vec<Codeword>, CodecError> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CodecError::Format("missing header".into()))?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| CodecError::Format("bad header".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "bmds" {
            return Err(CodecError::Format(format!("bad header: {header:?}")));
        }
        let l: usize = parts[1]
            .parse()
            .map_err(|_| CodecError::Format("bad l".into()))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| CodecError::Format("bad column count".into()))?;
        if l != code.l || n != code.n() {
            return Err(CodecError::Format(format!(
                "codeword shape {l}x{n} does not match code {}x{}",
                code.l,
                code.n()
            )));
        }
        let body = &bytes[newline + 1..];
        let col_bytes = l.div_ceil(8);
        let word_bytes = col_bytes * n;
        if word_bytes == 0 || body.len() % word_bytes != 0 {
            return Err(CodecError::Format("truncated codeword body".into()));
        }
        let mut out = Vec::new();
        for w in 0..body.len() / word_bytes {
            let mut columns = Vec::with_capacity(n);
            for t in 0..n {
                let start = w * word_bytes + t * col_bytes;
                columns.push(BitVec::from_bytes_lsb(&body[start..start + col_bytes], l));
            }
            out.push(Codeword {
                l,
                m: code.m,
                columns,
            });
        }
        Ok(out)
    }
}

/// Applies block row i of H to a set of columns: sum over j of H_{i,j} c_j.
fn apply_block_row(code: &ArrayCode, i: usize, cw: &Codeword, cols: &[usize]) -> BitVec {
    let mut out = BitVec::zeros(code.l);
    let mut acc = vec![BitVec::zeros(code.m); code.chunk_count];
    for &j in cols {
        for e in code.h_entries(j) {
            let prod = code.product(i, e.base_col as usize, e.tag);
            acc[e.row as usize].xor_assign(&prod.mul_vec(&cw.chunk(j, e.col as usize)));
        }
    }
    for (a, chunk) in acc.iter().enumerate() {
        out.write_subrange(a * code.m, chunk);
    }
    out
}

/// True when all r parity equations hold.
pub fn parity_ok(code: &ArrayCode, cw: &Codeword) -> bool {
    let all: Vec<usize> = (0..code.n()).collect();
    (0..code.r).all(|i| apply_block_row(code, i, cw, &all).is_zero())
}

/// Systematic encode: columns 0..k-1 carry `info`, the r parity columns are
/// solved from the parity equations (unique because the parity block
/// submatrix is full rank for an MDS code).
pub fn encode(code: &ArrayCode, info: &[BitVec]) -> Result<Codeword, CodecError> {
    if info.len() != code.k || info.iter().any(|c| c.len() != code.l) {
        return Err(CodecError::InfoShape {
            expected: code.k,
            bits: code.l,
            got: format!("{} columns", info.len()),
        });
    }
    let mut cw = Codeword::zero(code);
    for (j, col) in info.iter().enumerate() {
        cw.set_column(j, col.clone());
    }
    let parity_cols: Vec<usize> = (code.k..code.n()).collect();
    let info_cols: Vec<usize> = (0..code.k).collect();
    let system = code.flatten_columns(&parity_cols);
    let mut rhs = BitVec::zeros(code.r * code.l);
    for i in 0..code.r {
        rhs.write_subrange(i * code.l, &apply_block_row(code, i, &cw, &info_cols));
    }
    let sol = system.solve_vec(&rhs).map_err(CodecError::SolveFailed)?;
    if !sol.unique {
        return Err(CodecError::SolveFailed(Gf2Error::Singular));
    }
    for (c, &j) in parity_cols.iter().enumerate() {
        cw.set_column(j, sol.columns[0].subrange(c * code.l, code.l));
    }
    Ok(cw)
}

/// Recovers up to r erased columns by solving the parity system restricted
/// to the unknowns. The survivors' contributions form the right-hand side.
pub fn erasure_decode(
    code: &ArrayCode,
    cw: &Codeword,
    erased: &[usize],
) -> Result<Codeword, CodecError> {
    let mut erased: Vec<usize> = erased.to_vec();
    erased.sort_unstable();
    erased.dedup();
    if erased.len() > code.r {
        return Err(CodecError::TooManyErasures {
            got: erased.len(),
            r: code.r,
        });
    }
    if let Some(&bad) = erased.iter().find(|&&j| j >= code.n()) {
        return Err(CodecError::BadColumnIndex(bad));
    }
    if erased.is_empty() {
        return Ok(cw.clone());
    }
    let survivors: Vec<usize> = (0..code.n()).filter(|j| !erased.contains(j)).collect();
    let system = code.flatten_columns(&erased);
    let mut rhs = BitVec::zeros(code.r * code.l);
    for i in 0..code.r {
        rhs.write_subrange(i * code.l, &apply_block_row(code, i, cw, &survivors));
    }
    let sol = match system.solve_vec(&rhs) {
        Ok(sol) => sol,
        Err(Gf2Error::InconsistentSystem) => return Err(CodecError::Inconsistent),
        Err(e) => return Err(CodecError::SolveFailed(e)),
    };
    if !sol.unique {
        return Err(CodecError::SolveFailed(Gf2Error::Singular));
    }
    let mut out = cw.clone();
    for (c, &j) in erased.iter().enumerate() {
        out.set_column(j, sol.columns[0].subrange(c * code.l, code.l));
    }
    Ok(out)
}

/// Exhaustive MDS check: every r-subset of block columns must flatten to a
/// full-rank rl x rl matrix. Pure rank checks fan out over `jobs` workers.
pub fn is_mds(code: &ArrayCode, jobs: usize) -> MdsVerdict {
    let subsets = combinations(code.n(), code.r);
    let jobs = jobs.max(1).min(subsets.len().max(1));
    let target = code.r * code.l;
    let check = |subset: &Vec<usize>| code.flatten_columns(subset).rank() == target;
    let failing: Vec<Vec<usize>> = if jobs == 1 {
        subsets.iter().filter(|s| !check(s)).cloned().collect()
    } else {
        let chunk = subsets.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = subsets
                .chunks(chunk)
                .map(|batch| {
                    scope.spawn(move || {
                        batch
                            .iter()
                            .filter(|s| !check(s))
                            .cloned()
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap())
                .collect()
        })
    };
    match failing.into_iter().min() {
        None => MdsVerdict::Pass,
        Some(witness) => MdsVerdict::Fail { witness },
    }
}

/// Random codeword: uniformly random information columns, then [`encode`].
pub fn random_codeword(code: &ArrayCode, rng: &mut impl rand::RngCore) -> Codeword {
    let info: Vec<BitVec> = (0..code.k).map(|_| BitVec::random(code.l, rng)).collect();
    encode(code, &info).expect("encode of random information")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basecode::rs_companion_base;
    use crate::construct::{build_c1, build_c2, CoefficientSet, PsiTag};
    use crate::gf2::BitMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c1_code() -> ArrayCode {
        let base = rs_companion_base(3, 2, 4).unwrap();
        let coeffs = CoefficientSet::identity_simplified(4).unwrap();
        build_c1(&base, 3, 2, &coeffs).unwrap()
    }

    #[test]
    fn c1_desk_instance_is_mds() {
        let code = c1_code();
        assert!(is_mds(&code, 1).is_pass());
        assert!(is_mds(&code, 4).is_pass());
    }

    #[test]
    fn c2_desk_instance_is_mds() {
        let base = rs_companion_base(8, 4, 4).unwrap();
        let coeffs = CoefficientSet::identity_simplified(4).unwrap();
        let code = build_c2(&base, 5, &coeffs).unwrap();
        assert!(is_mds(&code, 2).is_pass());
    }

    #[test]
    fn degenerate_coefficients_break_mds() {
        // psi4 = I makes the stacked coefficient matrix singular; forcing the
        // construction through the unchecked path must then fail the rank sweep.
        let base = rs_companion_base(3, 2, 4).unwrap();
        let i = BitMatrix::identity(4);
        let coeffs = CoefficientSet::unchecked([i.clone(), i.clone(), i.clone(), i]).unwrap();
        let code = build_c1(&base, 3, 2, &coeffs).unwrap();
        let witness = match is_mds(&code, 1) {
            MdsVerdict::Fail { witness } => witness,
            MdsVerdict::Pass => panic!("degenerate coefficients must fail"),
        };
        assert_eq!(witness.len(), 2);
        // the reported witness does not depend on the worker count
        assert_eq!(
            is_mds(&code, 3),
            MdsVerdict::Fail {
                witness: witness.clone()
            }
        );
        assert_eq!(code.coeffs.matrix(PsiTag::Psi4), &BitMatrix::identity(4));
        // the rank view and the operational view agree: erasing the witness
        // pattern leaves the decoder with several candidate codewords
        let zero = Codeword::zero(&code);
        assert!(matches!(
            erasure_decode(&code, &zero, &witness),
            Err(CodecError::SolveFailed(Gf2Error::Singular))
        ));
    }

    #[test]
    fn encode_zero_gives_zero_and_parity_holds() {
        let code = c1_code();
        let info = vec![BitVec::zeros(code.l); code.k];
        let cw = encode(&code, &info).unwrap();
        assert_eq!(cw, Codeword::zero(&code));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cw = random_codeword(&code, &mut rng);
        assert!(parity_ok(&code, &cw));
    }

    #[test]
    fn parity_round_trip_after_erasing_all_parity_columns() {
        let code = c1_code();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cw = random_codeword(&code, &mut rng);
        let mut damaged = cw.clone();
        for j in code.k..code.n() {
            damaged.set_column(j, BitVec::zeros(code.l));
        }
        let recovered = erasure_decode(&code, &damaged, &[3, 4]).unwrap();
        assert_eq!(recovered, cw);
    }

    #[test]
    fn erasure_decode_all_patterns() {
        let code = c1_code();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cw = random_codeword(&code, &mut rng);
        for pattern in combinations(code.n(), code.r) {
            let mut damaged = cw.clone();
            for &j in &pattern {
                damaged.set_column(j, BitVec::zeros(code.l));
            }
            let recovered = erasure_decode(&code, &damaged, &pattern).unwrap();
            assert_eq!(recovered, cw, "pattern {pattern:?}");
            assert!(parity_ok(&code, &recovered));
        }
    }

    #[test]
    fn erasure_decode_edge_cases() {
        let code = c1_code();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cw = random_codeword(&code, &mut rng);
        assert_eq!(erasure_decode(&code, &cw, &[]).unwrap(), cw);
        assert!(matches!(
            erasure_decode(&code, &cw, &[0, 1, 2]),
            Err(CodecError::TooManyErasures { got: 3, r: 2 })
        ));
        assert!(matches!(
            erasure_decode(&code, &cw, &[9]),
            Err(CodecError::BadColumnIndex(9))
        ));
        // corrupt a survivor bit: the overdetermined system must notice
        let mut corrupted = cw.clone();
        let mut col = corrupted.column(0).clone();
        col.set(0, !col.get(0));
        corrupted.set_column(0, col);
        assert!(matches!(
            erasure_decode(&code, &corrupted, &[4]),
            Err(CodecError::Inconsistent)
        ));
    }

    #[test]
    fn codeword_file_exact_bytes() {
        let code = c1_code();
        let mut cw = Codeword::zero(&code);
        // chunk 1 of column 0 set to 1000: column bit a*m+i = bit 4, byte 0 = 0x10
        let mut col = BitVec::zeros(code.l);
        col.set(4, true);
        col.set(31, true); // last bit: byte 3 = 0x80
        cw.set_column(0, col);
        let bytes = Codeword::write_many(&code, &[cw]);
        let mut expected = b"bmds 32 5\n".to_vec();
        expected.extend_from_slice(&[0x10, 0, 0, 0x80]);
        expected.extend_from_slice(&[0u8; 16]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn codeword_file_rejects_malformed_input() {
        let code = c1_code();
        assert!(Codeword::read_many(&code, b"no header here").is_err());
        assert!(Codeword::read_many(&code, b"bmds 32\n").is_err());
        assert!(Codeword::read_many(&code, b"bmds 16 5\n").is_err()); // wrong shape
        let mut truncated = Codeword::write_many(&code, &[Codeword::zero(&code)]);
        truncated.pop();
        assert!(Codeword::read_many(&code, &truncated).is_err());
    }

    #[test]
    fn codeword_file_round_trip() {
        let code = c1_code();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let words: Vec<Codeword> = (0..3).map(|_| random_codeword(&code, &mut rng)).collect();
        let bytes = Codeword::write_many(&code, &words);
        assert!(bytes.starts_with(b"bmds 32 5\n"));
        let back = Codeword::read_many(&code, &bytes).unwrap();
        assert_eq!(back, words);
    }

    #[test]
    fn encode_rejects_bad_info_shape() {
        let code = c1_code();
        assert!(encode(&code, &[]).is_err());
        let short = vec![BitVec::zeros(code.l - 1); code.k];
        assert!(encode(&code, &short).is_err());
    }
}
