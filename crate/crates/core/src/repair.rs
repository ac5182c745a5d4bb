//! Single-node repair: helper selection, per-row linear solves, and
//! bit-exact accounting of accessed versus downloaded data.
//!
//! Repairing node j = (group v, offset u) touches only the block rows whose
//! chunk digit at position v equals u. Each such row yields a small linear
//! system whose columns are base-code block columns; chunks of helpers feed
//! the right-hand side, chunks of the failed node and of the d..n-1 nodes
//! left out of the repair stay unknown. Rows whose unknowns span more than r
//! base columns wait until earlier rows have pinned down the extra chunks.
//!
//! The last node of a C2 group is repaired differently: the s block rows of
//! a digit-v orbit are summed, which collapses every helper's contribution
//! onto XOR sums the helpers can precompute, at the price of reading their
//! whole column.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Codeword;
use crate::construct::{ArrayCode, CodeKind, PsiTag};
use crate::gf2::{BitMatrix, BitVec};
use crate::indexing::{digit_at, replace_digit_unchecked};

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("plan is for construction {expected:?}, code is {got:?}")]
    WrongKind { expected: CodeKind, got: CodeKind },
    #[error("node index {0} out of range")]
    BadNode(usize),
    #[error("invalid helper choice: {0}")]
    InvalidHelpers(String),
    #[error("the helper set for this node is forced; free helpers cannot be chosen")]
    HelpersForced,
    #[error("no starting row with a solvable system; construction bug")]
    NoStartingRow,
    #[error("repair system degenerate: {0}")]
    SingularSystem(String),
    #[error("plan payload missing chunk {chunk} of node {node}")]
    MissingPayload { node: usize, chunk: usize },
}

/// What one helper contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HelperPayload {
    /// Plain chunk reads; access equals download.
    Chunks(Vec<usize>),
    /// For each base index a (digit v zero), the XOR of the s chunks whose
    /// index agrees with a outside digit v. The helper reads its whole
    /// column to form these.
    SummedChunks { v: usize, bases: Vec<usize> },
}

impl HelperPayload {
    pub fn descriptor_count(&self) -> usize {
        match self {
            HelperPayload::Chunks(c) => c.len(),
            HelperPayload::SummedChunks { bases, .. } => bases.len(),
        }
    }
}

/// A fully determined repair: who helps and what each helper ships.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairPlan {
    pub kind: CodeKind,
    pub failed: usize,
    /// Group index of the failed node.
    pub v: usize,
    /// Offset of the failed node within its group.
    pub u: usize,
    pub helpers: Vec<usize>,
    /// Parallel to `helpers`.
    pub per_helper: Vec<HelperPayload>,
    pub bits_downloaded: u64,
    pub bits_accessed: u64,
}

impl RepairPlan {
    pub fn payload_for(&self, node: usize) -> Option<&HelperPayload> {
        self.helpers
            .iter()
            .position(|&h| h == node)
            .map(|i| &self.per_helper[i])
    }
}

fn matched_chunks(code: &ArrayCode, v: usize, u: usize) -> Vec<usize> {
    (0..code.chunk_count)
        .filter(|&a| digit_at(a, v, code.s) == u)
        .collect()
}

/// Designated node set of group v (the nodes sharing chunk digit v), and the
/// free-helper pool, exactly complementary.
fn group_sets(code: &ArrayCode, v: usize) -> (BTreeSet<usize>, Vec<usize>) {
    let n = code.n();
    let designated: BTreeSet<usize> = match code.kind {
        CodeKind::C1 => (0..code.s).map(|w| (v * code.s + w) % n).collect(),
        CodeKind::C2 => (0..code.s).map(|w| v * (code.s + 1) + w).collect(),
    };
    let pool: Vec<usize> = (0..n).filter(|j| !designated.contains(j)).collect();
    (designated, pool)
}

fn choose_free(
    code: &ArrayCode,
    pool: &[usize],
    free: Option<&[usize]>,
) -> Result<Vec<usize>, RepairError> {
    match free {
        None => Ok(pool[..code.k].to_vec()),
        Some(choice) => {
            let set: BTreeSet<usize> = choice.iter().copied().collect();
            if set.len() != choice.len() {
                return Err(RepairError::InvalidHelpers("duplicate helper index".into()));
            }
            if set.len() != code.k {
                return Err(RepairError::InvalidHelpers(format!(
                    "need exactly k = {} free helpers, got {}",
                    code.k,
                    set.len()
                )));
            }
            if let Some(&bad) = set.iter().find(|j| !pool.contains(j)) {
                return Err(RepairError::InvalidHelpers(format!(
                    "node {bad} is not eligible as a free helper"
                )));
            }
            Ok(set.into_iter().collect())
        }
    }
}

/// Optimal-access repair plan: s-1 designated helpers from the failed
/// node's group plus k freely chosen ones; every helper reads exactly the
/// chunks whose digit v equals u.
pub fn plan_repair_c1(
    code: &ArrayCode,
    failed: usize,
    free: Option<&[usize]>,
) -> Result<RepairPlan, RepairError> {
    if code.kind != CodeKind::C1 {
        return Err(RepairError::WrongKind {
            expected: CodeKind::C1,
            got: code.kind,
        });
    }
    if failed >= code.n() {
        return Err(RepairError::BadNode(failed));
    }
    let (v, u) = code.group_of(failed);
    let (designated, pool) = group_sets(code, v);
    let free = choose_free(code, &pool, free)?;
    let mut helpers: Vec<usize> = designated
        .iter()
        .copied()
        .filter(|&j| j != failed)
        .collect();
    helpers.extend(&free);
    helpers.sort_unstable();
    let chunks = matched_chunks(code, v, u);
    let per_chunk_bits = (chunks.len() * code.m) as u64;
    let bits = helpers.len() as u64 * per_chunk_bits;
    Ok(RepairPlan {
        kind: CodeKind::C1,
        failed,
        v,
        u,
        per_helper: vec![HelperPayload::Chunks(chunks); helpers.len()],
        helpers,
        bits_downloaded: bits,
        bits_accessed: bits,
    })
}

/// Optimal-repair plan for C2. The first s nodes of a group repair like C1;
/// the last node downloads helper-side XOR sums from every node outside its
/// group, reading s times more than it downloads.
pub fn plan_repair_c2(
    code: &ArrayCode,
    failed: usize,
    free: Option<&[usize]>,
) -> Result<RepairPlan, RepairError> {
    if code.kind != CodeKind::C2 {
        return Err(RepairError::WrongKind {
            expected: CodeKind::C2,
            got: code.kind,
        });
    }
    if failed >= code.n() {
        return Err(RepairError::BadNode(failed));
    }
    let (v, u) = code.group_of(failed);
    if u < code.s {
        let (designated, pool) = group_sets(code, v);
        let free = choose_free(code, &pool, free)?;
        let mut helpers: Vec<usize> = designated
            .iter()
            .copied()
            .filter(|&j| j != failed)
            .collect();
        helpers.extend(&free);
        helpers.sort_unstable();
        let chunks = matched_chunks(code, v, u);
        let bits = (helpers.len() * chunks.len() * code.m) as u64;
        Ok(RepairPlan {
            kind: CodeKind::C2,
            failed,
            v,
            u,
            per_helper: vec![HelperPayload::Chunks(chunks); helpers.len()],
            helpers,
            bits_downloaded: bits,
            bits_accessed: bits,
        })
    } else {
        if free.is_some() {
            return Err(RepairError::HelpersForced);
        }
        let group: BTreeSet<usize> = (0..=code.s).map(|w| v * (code.s + 1) + w).collect();
        let helpers: Vec<usize> = (0..code.n()).filter(|j| !group.contains(j)).collect();
        let bases = matched_chunks(code, v, 0);
        let downloaded = (helpers.len() * bases.len() * code.m) as u64;
        let accessed = (helpers.len() * code.l) as u64;
        Ok(RepairPlan {
            kind: CodeKind::C2,
            failed,
            v,
            u,
            per_helper: vec![
                HelperPayload::SummedChunks {
                    v,
                    bases: bases.clone()
                };
                helpers.len()
            ],
            helpers,
            bits_downloaded: downloaded,
            bits_accessed: accessed,
        })
    }
}

/// The data actually shipped by helpers; the executors read nothing else.
struct HelperData {
    chunks: HashMap<(usize, usize), BitVec>,
    sums: HashMap<(usize, usize), BitVec>,
}

fn gather(code: &ArrayCode, cw: &Codeword, plan: &RepairPlan) -> HelperData {
    let mut data = HelperData {
        chunks: HashMap::new(),
        sums: HashMap::new(),
    };
    for (&t, payload) in plan.helpers.iter().zip(&plan.per_helper) {
        match payload {
            HelperPayload::Chunks(list) => {
                for &a in list {
                    data.chunks.insert((t, a), cw.chunk(t, a));
                }
            }
            HelperPayload::SummedChunks { v, bases } => {
                for &a in bases {
                    let mut sum = BitVec::zeros(code.m);
                    for w in 0..code.s {
                        sum.xor_assign(&cw.chunk(t, replace_digit_unchecked(a, *v, w, code.s)));
                    }
                    data.sums.insert((t, a), sum);
                }
            }
        }
    }
    data
}

type Chunk = (usize, usize);

/// A linear relation sum(psi_tag * chunk) = value left over from a row whose
/// slot mixed several unknown chunks. Pairs of such relations over the same
/// chunks resolve through the full-rank stacked coefficient matrix.
struct Relation {
    terms: Vec<(Chunk, PsiTag)>,
    value: BitVec,
}

struct RelationPool {
    relations: Vec<Relation>,
}

impl RelationPool {
    fn new() -> Self {
        RelationPool {
            relations: Vec::new(),
        }
    }

    fn add(&mut self, terms: Vec<(Chunk, PsiTag)>, value: BitVec) {
        self.relations.push(Relation { terms, value });
    }

    /// Substitutes known chunks, extracts single-term relations, and solves
    /// small connected components. Returns whether anything new was learned.
    fn reduce(
        &mut self,
        code: &ArrayCode,
        recovered: &mut HashMap<Chunk, BitVec>,
    ) -> Result<bool, RepairError> {
        let mut learned_any = false;
        loop {
            let mut progress = false;
            let mut kept = Vec::new();
            for mut rel in self.relations.drain(..) {
                rel.terms.retain(|(chunk, tag)| {
                    if let Some(val) = recovered.get(chunk) {
                        rel.value.xor_assign(&code.coeffs.matrix(*tag).mul_vec(val));
                        false
                    } else {
                        true
                    }
                });
                match rel.terms.len() {
                    0 => {
                        if !rel.value.is_zero() {
                            return Err(RepairError::SingularSystem(
                                "contradictory chunk relations".into(),
                            ));
                        }
                        progress = true;
                    }
                    1 => {
                        let (chunk, tag) = rel.terms[0];
                        let val = code.coeffs.inverse(tag).mul_vec(&rel.value);
                        recovered.insert(chunk, val);
                        progress = true;
                    }
                    _ => kept.push(rel),
                }
            }
            self.relations = kept;
            if !self.solve_components(code, recovered)? && !progress {
                break;
            }
            learned_any |= progress;
        }
        Ok(learned_any)
    }

    fn solve_components(
        &mut self,
        code: &ArrayCode,
        recovered: &mut HashMap<Chunk, BitVec>,
    ) -> Result<bool, RepairError> {
        // group relations into connected components over shared chunks
        let mut comp_of: HashMap<Chunk, usize> = HashMap::new();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for (ri, rel) in self.relations.iter().enumerate() {
            let mut target: Option<usize> = None;
            for (chunk, _) in &rel.terms {
                if let Some(&c) = comp_of.get(chunk) {
                    target = Some(match target {
                        None => c,
                        Some(t) if t == c => t,
                        Some(t) => {
                            // merge c into t
                            let moved = std::mem::take(&mut comps[c]);
                            for &mr in &moved {
                                for (ch, _) in &self.relations[mr].terms {
                                    comp_of.insert(*ch, t);
                                }
                            }
                            comps[t].extend(moved);
                            t
                        }
                    });
                }
            }
            let t = target.unwrap_or_else(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[t].push(ri);
            for (chunk, _) in &rel.terms {
                comp_of.insert(*chunk, t);
            }
        }
        let mut solved_rels: Vec<usize> = Vec::new();
        let mut progress = false;
        for rels in comps.iter().filter(|c| c.len() >= 2) {
            let mut vars: Vec<Chunk> = rels
                .iter()
                .flat_map(|&ri| self.relations[ri].terms.iter().map(|(c, _)| *c))
                .collect();
            vars.sort_unstable();
            vars.dedup();
            let m = code.m;
            let mut system = BitMatrix::zeros(rels.len() * m, vars.len() * m);
            let mut rhs = BitVec::zeros(rels.len() * m);
            for (row, &ri) in rels.iter().enumerate() {
                let rel = &self.relations[ri];
                for (chunk, tag) in &rel.terms {
                    let col = vars.binary_search(chunk).unwrap();
                    system.set_block(row * m, col * m, code.coeffs.matrix(*tag));
                }
                rhs.write_subrange(row * m, &rel.value);
            }
            let Ok(sol) = system.solve_vec(&rhs) else {
                return Err(RepairError::SingularSystem(
                    "inconsistent chunk relation component".into(),
                ));
            };
            if sol.unique {
                for (i, chunk) in vars.iter().enumerate() {
                    recovered.insert(*chunk, sol.columns[0].subrange(i * m, m));
                }
                solved_rels.extend(rels);
                progress = true;
            }
        }
        solved_rels.sort_unstable();
        for &ri in solved_rels.iter().rev() {
            self.relations.swap_remove(ri);
        }
        Ok(progress)
    }
}

/// Structured per-row recovery shared by C1 (every node) and by C2 nodes
/// with u < s. Returns the failed column.
fn structured_recover(
    code: &ArrayCode,
    plan: &RepairPlan,
    data: &HelperData,
) -> Result<BitVec, RepairError> {
    let m = code.m;
    let helpers: BTreeSet<usize> = plan.helpers.iter().copied().collect();
    let rows = matched_chunks(code, plan.v, plan.u);
    let mut recovered: HashMap<Chunk, BitVec> = HashMap::new();
    let mut pool = RelationPool::new();
    let mut done = vec![false; rows.len()];
    let mut first_pass = true;
    loop {
        let mut progress = false;
        for (ri, &a) in rows.iter().enumerate() {
            if done[ri] {
                continue;
            }
            // Slot the unknown terms of block row a by base column; helpers
            // and already-recovered chunks land on the right-hand side.
            let mut slots: BTreeMap<usize, Vec<(Chunk, PsiTag)>> = BTreeMap::new();
            let mut rhs = BitVec::zeros(code.r * m);
            for t in 0..code.n() {
                for e in code.h_row(t, a) {
                    let chunk = (t, e.col as usize);
                    if helpers.contains(&t) {
                        let val = data.chunks.get(&chunk).ok_or(RepairError::MissingPayload {
                            node: t,
                            chunk: chunk.1,
                        })?;
                        for i in 0..code.r {
                            let add = code.product(i, e.base_col as usize, e.tag).mul_vec(val);
                            rhs.xor_subrange(i * m, &add);
                        }
                    } else if let Some(val) = recovered.get(&chunk) {
                        for i in 0..code.r {
                            let add = code.product(i, e.base_col as usize, e.tag).mul_vec(val);
                            rhs.xor_subrange(i * m, &add);
                        }
                    } else {
                        slots
                            .entry(e.base_col as usize)
                            .or_default()
                            .push((chunk, e.tag));
                    }
                }
            }
            if slots.len() > code.r {
                continue; // needs chunks from rows solved later
            }
            let mut system = BitMatrix::zeros(code.r * m, slots.len() * m);
            for (c, &f) in slots.keys().enumerate() {
                system.set_block(0, c * m, &code.base_column_stack(f));
            }
            let sol = system
                .solve_vec(&rhs)
                .map_err(|e| RepairError::SingularSystem(format!("row {a}: {e}")))?;
            if !sol.unique {
                return Err(RepairError::SingularSystem(format!(
                    "row {a}: underdetermined slot system"
                )));
            }
            for (c, (_, terms)) in slots.into_iter().enumerate() {
                let z = sol.columns[0].subrange(c * m, m);
                if let [(chunk, tag)] = terms[..] {
                    recovered.insert(chunk, code.coeffs.inverse(tag).mul_vec(&z));
                } else {
                    pool.add(terms, z);
                }
            }
            done[ri] = true;
            progress = true;
            pool.reduce(code, &mut recovered)?;
        }
        if done.iter().all(|&d| d) {
            break;
        }
        if !progress {
            if first_pass {
                return Err(RepairError::NoStartingRow);
            }
            return Err(RepairError::SingularSystem(
                "row dependencies do not resolve".into(),
            ));
        }
        first_pass = false;
    }
    let mut column = BitVec::zeros(code.l);
    for a in 0..code.chunk_count {
        let chunk = recovered
            .get(&(plan.failed, a))
            .ok_or_else(|| RepairError::SingularSystem(format!("chunk {a} not recovered")))?;
        column.write_subrange(a * m, chunk);
    }
    Ok(column)
}

/// Summed-row recovery for the last node of a C2 group. For each digit-v
/// orbit the s block rows are added; helper contributions collapse onto the
/// downloaded sums and the residual unknowns span exactly the 2s base
/// columns of group v.
fn summed_recover(
    code: &ArrayCode,
    plan: &RepairPlan,
    data: &HelperData,
) -> Result<BitVec, RepairError> {
    let (m, s, v) = (code.m, code.s, plan.v);
    let helpers: BTreeSet<usize> = plan.helpers.iter().copied().collect();
    let mut column = BitVec::zeros(code.l);
    for &a in &matched_chunks(code, v, 0) {
        let mut slots: BTreeMap<usize, Vec<(Chunk, PsiTag)>> = BTreeMap::new();
        let mut helper_groups: BTreeMap<(usize, usize, PsiTag, usize), usize> = BTreeMap::new();
        for w in 0..s {
            let row = replace_digit_unchecked(a, v, w, s);
            for t in 0..code.n() {
                for e in code.h_row(t, row) {
                    if helpers.contains(&t) {
                        let base_idx = replace_digit_unchecked(e.col as usize, v, 0, s);
                        *helper_groups
                            .entry((t, e.base_col as usize, e.tag, base_idx))
                            .or_insert(0) += 1;
                    } else {
                        slots
                            .entry(e.base_col as usize)
                            .or_default()
                            .push(((t, e.col as usize), e.tag));
                    }
                }
            }
        }
        let mut rhs = BitVec::zeros(code.r * m);
        for ((t, f, tag, base_idx), count) in helper_groups {
            if count != s {
                return Err(RepairError::SingularSystem(format!(
                    "helper {t} term does not collapse onto a digit orbit"
                )));
            }
            let sum = data
                .sums
                .get(&(t, base_idx))
                .ok_or(RepairError::MissingPayload {
                    node: t,
                    chunk: base_idx,
                })?;
            for i in 0..code.r {
                let add = code.product(i, f, tag).mul_vec(sum);
                rhs.xor_subrange(i * m, &add);
            }
        }
        let mut system = BitMatrix::zeros(code.r * m, slots.len() * m);
        for (c, &f) in slots.keys().enumerate() {
            system.set_block(0, c * m, &code.base_column_stack(f));
        }
        let sol = system
            .solve_vec(&rhs)
            .map_err(|e| RepairError::SingularSystem(format!("orbit {a}: {e}")))?;
        if !sol.unique {
            return Err(RepairError::SingularSystem(format!(
                "orbit {a}: underdetermined system"
            )));
        }
        for (c, (_, terms)) in slots.into_iter().enumerate() {
            if let [(chunk, tag)] = terms[..] {
                if chunk.0 == plan.failed {
                    let z = sol.columns[0].subrange(c * m, m);
                    column.write_subrange(chunk.1 * m, &code.coeffs.inverse(tag).mul_vec(&z));
                }
            }
        }
    }
    Ok(column)
}

fn check_plan(code: &ArrayCode, plan: &RepairPlan) -> Result<(), RepairError> {
    if plan.kind != code.kind {
        return Err(RepairError::WrongKind {
            expected: plan.kind,
            got: code.kind,
        });
    }
    if plan.failed >= code.n() {
        return Err(RepairError::BadNode(plan.failed));
    }
    if plan.helpers.contains(&plan.failed) || plan.helpers.len() != code.d {
        return Err(RepairError::InvalidHelpers(format!(
            "helper set must be {} nodes excluding the failed one",
            code.d
        )));
    }
    Ok(())
}

/// Executes a C1 repair plan against a codeword; only plan chunks are read.
pub fn execute_repair_c1(
    code: &ArrayCode,
    cw: &Codeword,
    plan: &RepairPlan,
) -> Result<BitVec, RepairError> {
    check_plan(code, plan)?;
    let data = gather(code, cw, plan);
    structured_recover(code, plan, &data)
}

/// Executes a C2 repair plan. Nodes with u < s run the structured per-row
/// path; the last node of each group runs the summed-row path.
pub fn execute_repair_c2(
    code: &ArrayCode,
    cw: &Codeword,
    plan: &RepairPlan,
) -> Result<BitVec, RepairError> {
    check_plan(code, plan)?;
    let data = gather(code, cw, plan);
    if plan.u < code.s {
        structured_recover(code, plan, &data)
    } else {
        summed_recover(code, plan, &data)
    }
}

pub fn plan_repair(
    code: &ArrayCode,
    failed: usize,
    free: Option<&[usize]>,
) -> Result<RepairPlan, RepairError> {
    match code.kind {
        CodeKind::C1 => plan_repair_c1(code, failed, free),
        CodeKind::C2 => plan_repair_c2(code, failed, free),
    }
}

pub fn execute_repair(
    code: &ArrayCode,
    cw: &Codeword,
    plan: &RepairPlan,
) -> Result<BitVec, RepairError> {
    match code.kind {
        CodeKind::C1 => execute_repair_c1(code, cw, plan),
        CodeKind::C2 => execute_repair_c2(code, cw, plan),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeRepairStats {
    pub node: usize,
    pub helpers: Vec<usize>,
    pub bits_downloaded: u64,
    pub bits_accessed: u64,
    pub recovered_matches: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportVerdicts {
    /// Every node downloaded exactly d*l/(d-k+1) bits.
    pub download_optimal: bool,
    /// Accessed bits follow the construction's profile: equal to downloads
    /// for C1 and for the first s nodes of each C2 group, d*l for the rest.
    pub access_profile: bool,
    /// Mean accessed bits match the closed form.
    pub average_matches: bool,
    pub all_nodes_recovered: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CodeParams {
    pub kind: CodeKind,
    pub k: usize,
    pub r: usize,
    pub s: usize,
    pub m: usize,
    pub l: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandwidthReport {
    pub code: CodeParams,
    pub per_node: Vec<NodeRepairStats>,
    /// Information-theoretic bound d*l/(d-k+1).
    pub lower_bound: u64,
    pub average_accessed: f64,
    pub verdicts: ReportVerdicts,
}

/// Plans and executes the repair of every node on one random codeword and
/// tallies exact bit counts against the closed forms.
pub fn bandwidth_report(code: &ArrayCode, seed: u64) -> Result<BandwidthReport, RepairError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cw = crate::codec::random_codeword(code, &mut rng);
    let lower_bound = (code.d * code.l / (code.d - code.k + 1)) as u64;
    let mut per_node = Vec::with_capacity(code.n());
    for j in 0..code.n() {
        let plan = plan_repair(code, j, None)?;
        let recovered = execute_repair(code, &cw, &plan)?;
        per_node.push(NodeRepairStats {
            node: j,
            helpers: plan.helpers.clone(),
            bits_downloaded: plan.bits_downloaded,
            bits_accessed: plan.bits_accessed,
            recovered_matches: &recovered == cw.column(j),
        });
    }
    let total_accessed: u64 = per_node.iter().map(|n| n.bits_accessed).sum();
    let expected_total: u64 = match code.kind {
        CodeKind::C1 => code.n() as u64 * lower_bound,
        CodeKind::C2 => {
            let per_group = code.s as u64 * lower_bound + (code.d * code.l) as u64;
            code.g as u64 * per_group
        }
    };
    let access_profile = per_node.iter().all(|stats| {
        let (_, u) = code.group_of(stats.node);
        let expected = if code.kind == CodeKind::C1 || u < code.s {
            stats.bits_downloaded
        } else {
            (code.d * code.l) as u64
        };
        stats.bits_accessed == expected
    });
    let verdicts = ReportVerdicts {
        download_optimal: per_node.iter().all(|n| n.bits_downloaded == lower_bound),
        access_profile,
        average_matches: total_accessed == expected_total,
        all_nodes_recovered: per_node.iter().all(|n| n.recovered_matches),
    };
    Ok(BandwidthReport {
        code: CodeParams {
            kind: code.kind,
            k: code.k,
            r: code.r,
            s: code.s,
            m: code.m,
            l: code.l,
            d: code.d,
        },
        per_node,
        lower_bound,
        average_accessed: total_accessed as f64 / code.n() as f64,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basecode::rs_companion_base;
    use crate::codec::{erasure_decode, random_codeword};
    use crate::construct::{build_c1, build_c2, CoefficientSet};
    use crate::gf2::BitVec;
    use crate::indexing::combinations;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c1_small() -> ArrayCode {
        let base = rs_companion_base(3, 2, 4).unwrap();
        build_c1(
            &base,
            3,
            2,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap()
    }

    fn c1_s_lt_r() -> ArrayCode {
        let base = rs_companion_base(5, 3, 4).unwrap();
        build_c1(
            &base,
            4,
            2,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap()
    }

    fn c2_desk() -> ArrayCode {
        let base = rs_companion_base(8, 4, 4).unwrap();
        build_c2(&base, 5, &CoefficientSet::identity_simplified(4).unwrap()).unwrap()
    }

    #[test]
    fn c1_plan_for_reference_node() {
        let code = c1_small();
        let plan = plan_repair_c1(&code, 2, None).unwrap();
        assert_eq!(plan.helpers, vec![0, 1, 3, 4]);
        for payload in &plan.per_helper {
            assert_eq!(payload, &HelperPayload::Chunks(vec![0, 1, 4, 5]));
        }
        // 16 chunks of m = 4 bits: 64 = d*l/(d-k+1)
        assert_eq!(plan.bits_downloaded, 64);
        assert_eq!(plan.bits_accessed, 64);
        assert_eq!(
            plan.bits_downloaded as usize,
            code.d * code.l / (code.d - code.k + 1)
        );
    }

    #[test]
    fn c1_every_node_repairs_exactly() {
        let code = c1_small();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn c1_zero_codeword_recovers_zero() {
        let code = c1_small();
        let cw = crate::codec::Codeword::zero(&code);
        let plan = plan_repair_c1(&code, 2, None).unwrap();
        let got = execute_repair_c1(&code, &cw, &plan).unwrap();
        assert!(got.is_zero());
    }

    #[test]
    fn c1_s_equals_1_is_conventional_repair() {
        let base = rs_companion_base(4, 3, 4).unwrap();
        let code = build_c1(
            &base,
            4,
            1,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        let plan = plan_repair_c1(&code, 0, None).unwrap();
        assert_eq!(plan.helpers.len(), code.k); // d = k
        for payload in &plan.per_helper {
            assert_eq!(payload.descriptor_count(), code.chunk_count); // whole column
        }
        assert_eq!(plan.bits_downloaded as usize, code.k * code.l);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn c1_s_lt_r_all_free_helper_choices() {
        let code = c1_s_lt_r();
        assert_eq!((code.l, code.d), (64, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let (v, _) = code.group_of(j);
            let (_, pool) = super::group_sets(&code, v);
            for free_pick in combinations(pool.len(), code.k) {
                let free: Vec<usize> = free_pick.iter().map(|&i| pool[i]).collect();
                let plan = plan_repair_c1(&code, j, Some(&free)).unwrap();
                assert_eq!(plan.bits_downloaded, 160);
                let got = execute_repair_c1(&code, &cw, &plan).unwrap();
                assert_eq!(&got, cw.column(j), "node {j}, free {free:?}");
            }
        }
    }

    #[test]
    fn c1_helper_validation() {
        let code = c1_small();
        // designated node 3 is not eligible as a free helper
        assert!(matches!(
            plan_repair_c1(&code, 2, Some(&[0, 1, 3])),
            Err(RepairError::InvalidHelpers(_))
        ));
        assert!(matches!(
            plan_repair_c1(&code, 2, Some(&[0, 1])),
            Err(RepairError::InvalidHelpers(_))
        ));
        assert!(matches!(
            plan_repair_c1(&code, 9, None),
            Err(RepairError::BadNode(9))
        ));
        let c2 = c2_desk();
        assert!(matches!(
            plan_repair_c1(&c2, 0, None),
            Err(RepairError::WrongKind { .. })
        ));
    }

    #[test]
    fn c2_last_node_plan_and_counts() {
        let code = c2_desk();
        let plan = plan_repair_c2(&code, 2, None).unwrap();
        assert_eq!(plan.helpers, vec![3, 4, 5, 6, 7, 8]);
        assert_eq!(plan.bits_downloaded, 96);
        assert_eq!(plan.bits_accessed, 192);
        for payload in &plan.per_helper {
            assert_eq!(
                payload,
                &HelperPayload::SummedChunks {
                    v: 0,
                    bases: vec![0, 2, 4, 6]
                }
            );
        }
        assert!(matches!(
            plan_repair_c2(&code, 2, Some(&[3, 4, 5, 6, 7])),
            Err(RepairError::HelpersForced)
        ));
    }

    #[test]
    fn c2_first_node_plan() {
        let code = c2_desk();
        let plan = plan_repair_c2(&code, 0, None).unwrap();
        // designated helper 1 plus the k lowest eligible: {2,3,4,5,6}
        assert_eq!(plan.helpers, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(plan.bits_downloaded, 96);
        assert_eq!(plan.bits_accessed, 96);
    }

    #[test]
    fn c2_every_node_repairs_and_matches_oracle() {
        let code = c2_desk();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c2(&code, j, None).unwrap();
            let got = execute_repair_c2(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
            // independent oracle: full erasure decode of the same column
            let mut damaged = cw.clone();
            damaged.set_column(j, BitVec::zeros(code.l));
            let decoded = erasure_decode(&code, &damaged, &[j]).unwrap();
            assert_eq!(decoded.column(j), cw.column(j));
        }
    }

    #[test]
    fn c2_zero_codeword_recovers_zero() {
        let code = c2_desk();
        let cw = crate::codec::Codeword::zero(&code);
        for j in [0, 2] {
            let plan = plan_repair_c2(&code, j, None).unwrap();
            assert!(execute_repair_c2(&code, &cw, &plan).unwrap().is_zero());
        }
    }

    #[test]
    fn c2_free_helper_sampling() {
        let code = c2_desk();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let cw = random_codeword(&code, &mut rng);
        for j in [0usize, 1, 3, 4] {
            let (v, _) = code.group_of(j);
            let (_, pool) = super::group_sets(&code, v);
            let choices = combinations(pool.len(), code.k);
            assert!(choices.len() >= 10);
            for free_pick in choices.iter().take(10) {
                let free: Vec<usize> = free_pick.iter().map(|&i| pool[i]).collect();
                let plan = plan_repair_c2(&code, j, Some(&free)).unwrap();
                let got = execute_repair_c2(&code, &cw, &plan).unwrap();
                assert_eq!(&got, cw.column(j), "node {j}, free {free:?}");
            }
        }
    }

    /// Rejection-samples a coefficient set with no identity members, so
    /// that misplaced psi factors cannot hide behind I = psi.
    fn random_coefficients(m: usize, rng: &mut ChaCha8Rng) -> CoefficientSet {
        loop {
            let psi: Vec<crate::gf2::BitMatrix> = (0..4)
                .map(|_| crate::gf2::BitMatrix::random(m, m, rng))
                .collect();
            if psi
                .iter()
                .any(|p| p.rank() != m || p == &crate::gf2::BitMatrix::identity(m))
            {
                continue;
            }
            if let Ok(set) = CoefficientSet::custom(
                psi[0].clone(),
                psi[1].clone(),
                psi[2].clone(),
                psi[3].clone(),
            ) {
                return set;
            }
        }
    }

    #[test]
    fn c1_with_random_coefficients() {
        let base = rs_companion_base(3, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..3 {
            let coeffs = random_coefficients(4, &mut rng);
            let code = build_c1(&base, 3, 2, &coeffs).unwrap();
            assert!(crate::codec::is_mds(&code, 1).is_pass());
            let cw = random_codeword(&code, &mut rng);
            for j in 0..code.n() {
                let plan = plan_repair_c1(&code, j, None).unwrap();
                let got = execute_repair_c1(&code, &cw, &plan).unwrap();
                assert_eq!(&got, cw.column(j), "node {j}");
            }
        }
    }

    #[test]
    fn c1_s_lt_r_with_random_coefficients() {
        // non-identity coefficients drive the relation pool through real
        // inverses and the full stacked pairing
        let base = rs_companion_base(5, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let coeffs = random_coefficients(4, &mut rng);
        let code = build_c1(&base, 5, 2, &coeffs).unwrap();
        let cw = random_codeword(&code, &mut rng);
        for (fail, free) in [
            (0usize, vec![4, 5, 6, 7, 8]),
            (0, vec![2, 3, 4, 5, 6]),
            (4, vec![0, 1, 2, 3, 8]),
        ] {
            let plan = plan_repair_c1(&code, fail, Some(&free)).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(fail), "fail {fail}, free {free:?}");
        }
    }

    #[test]
    fn c2_with_random_coefficients() {
        let base = rs_companion_base(8, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..2 {
            let coeffs = random_coefficients(4, &mut rng);
            let code = build_c2(&base, 5, &coeffs).unwrap();
            assert!(crate::codec::is_mds(&code, 2).is_pass());
            let cw = random_codeword(&code, &mut rng);
            for j in 0..code.n() {
                let plan = plan_repair_c2(&code, j, None).unwrap();
                let got = execute_repair_c2(&code, &cw, &plan).unwrap();
                assert_eq!(&got, cw.column(j), "node {j}");
            }
        }
    }

    #[test]
    fn plan_chunk_sets_have_expected_size() {
        for code in [c1_small(), c1_s_lt_r(), c2_desk()] {
            for j in 0..code.n() {
                let plan = plan_repair(&code, j, None).unwrap();
                assert_eq!(plan.helpers.len(), code.d);
                for payload in &plan.per_helper {
                    assert_eq!(payload.descriptor_count(), code.chunk_count / code.s);
                }
            }
        }
    }

    #[test]
    fn structured_repair_matches_erasure_decode_oracle() {
        for (code, seed) in [(c1_small(), 31u64), (c1_s_lt_r(), 32)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..3 {
                let cw = random_codeword(&code, &mut rng);
                for j in 0..code.n() {
                    let plan = plan_repair_c1(&code, j, None).unwrap();
                    let got = execute_repair_c1(&code, &cw, &plan).unwrap();
                    let mut damaged = cw.clone();
                    damaged.set_column(j, BitVec::zeros(code.l));
                    let decoded = erasure_decode(&code, &damaged, &[j]).unwrap();
                    assert_eq!(&got, decoded.column(j));
                }
            }
        }
    }

    #[test]
    fn c1_left_out_nodes_sharing_a_group_resolve_through_pairing() {
        // (9,5) with s = 2 leaves r-s = 2 nodes out of each repair. Forcing
        // both into one group makes their slots mix two unknown chunks,
        // which only the cross-row relations untangle. Forcing the partial
        // group's node out instead sends its wrap arm into the failed
        // node's own slot families.
        let base = rs_companion_base(5, 4, 4).unwrap();
        let code = build_c1(
            &base,
            5,
            2,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        assert_eq!((code.n(), code.chunk_count, code.g), (9, 32, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let cw = random_codeword(&code, &mut rng);
        let cases: &[(usize, &[usize])] = &[
            (0, &[4, 5, 6, 7, 8]), // leaves out {2,3}: one group
            (0, &[2, 3, 4, 5, 6]), // leaves out {7,8}: wrap arm of 8 hits family 0
            (0, &[2, 4, 5, 6, 7]), // leaves out {3,8}: both effects at once
            (4, &[0, 1, 2, 3, 8]), // leaves out {6,7}: pairing away from group 0
            (8, &[1, 4, 5, 6, 7]), // failed node in the partial group
        ];
        for &(fail, free) in cases {
            let plan = plan_repair_c1(&code, fail, Some(free)).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(fail), "fail {fail}, free {free:?}");
        }
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn c1_three_nodes_left_out_mix_three_way_slots() {
        // (11,6) with s = 2 leaves three nodes out. Leaving out both of
        // group 0 plus the partial group's node makes single slots collect
        // a diagonal, a same-group arm, and a wrap arm at once.
        let base = rs_companion_base(6, 5, 4).unwrap();
        let code = build_c1(
            &base,
            6,
            2,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        assert_eq!((code.n(), code.chunk_count, code.l), (11, 64, 256));
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let cw = random_codeword(&code, &mut rng);
        for (fail, free) in [
            (2usize, vec![4, 5, 6, 7, 8, 9]),
            (4, vec![0, 1, 6, 7, 8, 9]),
        ] {
            let plan = plan_repair_c1(&code, fail, Some(&free)).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(fail), "fail {fail}, free {free:?}");
            let mut damaged = cw.clone();
            damaged.set_column(fail, BitVec::zeros(code.l));
            let decoded = erasure_decode(&code, &damaged, &[fail]).unwrap();
            assert_eq!(decoded.column(fail), cw.column(fail));
        }
    }

    #[test]
    fn c1_over_evenodd_base_repairs() {
        let base = crate::basecode::evenodd_base(4, 3).unwrap();
        let code = build_c1(
            &base,
            3,
            2,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        assert!(crate::codec::is_mds(&code, 1).is_pass());
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn c1_with_s_3_and_partial_group() {
        // s = r = 3 over 7 nodes: rows carry both arm kinds at once and the
        // single-node last group wraps two arms into group 0.
        let base = rs_companion_base(4, 3, 4).unwrap();
        let code = build_c1(
            &base,
            4,
            3,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        assert_eq!((code.n(), code.chunk_count, code.l), (7, 27, 108));
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            assert_eq!(plan.helpers.len(), 6);
            assert_eq!(
                plan.bits_downloaded as usize,
                code.d * code.l / (code.d - code.k + 1)
            );
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn c1_two_node_partial_group() {
        // (8,5) with s = 3: the last group holds two nodes, so its second
        // node has an arm inside the partial group and a wrapping one.
        let base = rs_companion_base(5, 3, 4).unwrap();
        let code = build_c1(
            &base,
            5,
            3,
            &CoefficientSet::identity_simplified(4).unwrap(),
        )
        .unwrap();
        assert_eq!((code.n(), code.g, code.chunk_count), (8, 2, 27));
        assert!(crate::codec::is_mds(&code, 2).is_pass());
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let cw = random_codeword(&code, &mut rng);
        for j in 0..code.n() {
            let plan = plan_repair_c1(&code, j, None).unwrap();
            let got = execute_repair_c1(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
        // node 7 = group 2 offset 1: designated helpers wrap to {6, 0}
        let plan = plan_repair_c1(&code, 7, None).unwrap();
        assert!(plan.helpers.contains(&6) && plan.helpers.contains(&0));
    }

    #[test]
    fn c2_with_s_3() {
        // r = 6, s = 3: summed repairs add three rows per orbit and the
        // structured repairs see psi3 and psi4 arms simultaneously.
        let base = rs_companion_base(12, 6, 5).unwrap();
        let code = build_c2(&base, 6, &CoefficientSet::identity_simplified(5).unwrap()).unwrap();
        assert_eq!((code.n(), code.s, code.l, code.d), (12, 3, 135, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let cw = random_codeword(&code, &mut rng);
        let lower = code.d * code.l / code.s;
        assert_eq!(lower, 360);
        for j in 0..code.n() {
            let plan = plan_repair_c2(&code, j, None).unwrap();
            assert_eq!(plan.bits_downloaded as usize, lower, "node {j}");
            let (_, u) = code.group_of(j);
            let expected_access = if u < code.s { lower } else { code.d * code.l };
            assert_eq!(plan.bits_accessed as usize, expected_access, "node {j}");
            let got = execute_repair_c2(&code, &cw, &plan).unwrap();
            assert_eq!(&got, cw.column(j), "node {j}");
        }
    }

    #[test]
    fn report_c1_totals() {
        let code = c1_small();
        let report = bandwidth_report(&code, 7).unwrap();
        assert_eq!(report.lower_bound, 64);
        for stats in &report.per_node {
            assert_eq!(stats.bits_downloaded, 64);
            assert_eq!(stats.bits_accessed, 64);
            assert!(stats.recovered_matches);
        }
        assert_eq!(report.average_accessed, 64.0);
        assert!(report.verdicts.download_optimal);
        assert!(report.verdicts.access_profile);
        assert!(report.verdicts.average_matches);
        assert!(report.verdicts.all_nodes_recovered);
    }

    #[test]
    fn report_c2_totals() {
        let code = c2_desk();
        let report = bandwidth_report(&code, 8).unwrap();
        assert_eq!(report.lower_bound, 96);
        for stats in &report.per_node {
            assert_eq!(stats.bits_downloaded, 96);
            let (_, u) = code.group_of(stats.node);
            let expected = if u < code.s { 96 } else { 192 };
            assert_eq!(stats.bits_accessed, expected, "node {}", stats.node);
            assert!(stats.recovered_matches);
        }
        assert_eq!(report.average_accessed, 128.0);
        assert!(report.verdicts.download_optimal);
        assert!(report.verdicts.access_profile);
        assert!(report.verdicts.average_matches);
    }

    #[test]
    fn report_json_round_trip() {
        let report = bandwidth_report(&c1_small(), 9).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("lowerBound"));
        assert!(text.contains("bitsDownloaded"));
        let back: BandwidthReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.lower_bound, report.lower_bound);
        assert_eq!(back.per_node.len(), report.per_node.len());
    }
}
