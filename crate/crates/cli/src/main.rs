//! Command-line front end: build codes, verify the MDS property, encode and
//! decode files, simulate single-node repairs, and print bandwidth tables.
//!
//! Exit codes: 0 on success, 2 on validation failure (bad parameters or
//! malformed inputs), 3 on verification failure (MDS fail, repair mismatch,
//! inconsistent codeword data).

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use bmds_core::basecode::{evenodd_base, rs_companion_base, BaseCode, MdsVerdict};
use bmds_core::codec::{encode, erasure_decode, is_mds, parity_ok, Codeword};
use bmds_core::construct::{build_c1, build_c2, ArrayCode, CoefficientSet, CoeffsFile};
use bmds_core::gf2::BitVec;
use bmds_core::repair::{bandwidth_report, execute_repair, plan_repair};

#[derive(Parser)]
#[command(
    name = "bmds",
    version,
    about = "Binary MDS array codes: build, verify, encode, repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    C1,
    C2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a code and write it as a JSON document.
    Build {
        #[arg(long)]
        construction: Construction,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        r: usize,
        /// Repair locality; defaults to r/2 for c2.
        #[arg(long)]
        s: Option<usize>,
        /// Base-code sub-packetization.
        #[arg(long)]
        m: usize,
        /// Base code: `rs`, `evenodd`, or `file:<path>`.
        #[arg(long, default_value = "rs")]
        base: String,
        /// Coefficient matrices: `identity` or `file:<path>`.
        #[arg(long, default_value = "identity")]
        coeffs: String,
        #[arg(long)]
        out: String,
    },
    /// Exhaustively check the MDS property of a built code.
    VerifyMds {
        #[arg(long)]
        code: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Encode a data file into codeword blocks.
    Encode {
        #[arg(long)]
        code: String,
        #[arg(long)]
        data: String,
        #[arg(long)]
        out: String,
    },
    /// Decode codeword blocks back into the original data, optionally
    /// recovering erased columns first.
    Decode {
        #[arg(long)]
        code: String,
        #[arg(long)]
        codeword: String,
        /// Comma-separated node indices to treat as erased.
        #[arg(long, value_delimiter = ',')]
        erase: Vec<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Simulate the repair of a single node and report exact bit counts.
    Repair {
        #[arg(long)]
        code: String,
        #[arg(long)]
        codeword: String,
        #[arg(long)]
        fail: usize,
        /// Comma-separated free-helper choice (k indices).
        #[arg(long, value_delimiter = ',')]
        helpers: Vec<usize>,
    },
    /// Repair every node on a seeded random codeword and tally bandwidth.
    Report {
        #[arg(long)]
        code: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum CliError {
    Validation(String),
    Verification(String),
}

impl CliError {
    fn emit(&self) -> ExitCode {
        let (kind, message) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Verification(m) => ("verification", m),
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "kind": kind, "message": message } })
        );
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Verification(_) => ExitCode::from(3),
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.emit(),
    }
}

fn read_file(path: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| validation(format!("{path}: {e}")))
}

fn read_text(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| validation(format!("{path}: {e}")))
}

fn write_file(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| validation(format!("{path}: {e}")))
}

fn load_code(path: &str) -> Result<ArrayCode, CliError> {
    ArrayCode::from_json(&read_text(path)?).map_err(validation)
}

fn load_codewords(code: &ArrayCode, path: &str) -> Result<Vec<Codeword>, CliError> {
    Codeword::read_many(code, &read_file(path)?).map_err(validation)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn column_digest(columns: &[BitVec]) -> String {
    let mut bytes = Vec::new();
    for c in columns {
        bytes.extend_from_slice(&c.to_bytes_lsb());
    }
    sha256_hex(&bytes)
}

fn build_base(
    source: &str,
    construction: Construction,
    k: usize,
    r: usize,
    m: usize,
) -> Result<BaseCode, CliError> {
    let base = if let Some(path) = source.strip_prefix("file:") {
        BaseCode::from_json(&read_text(path)?).map_err(validation)?
    } else {
        match source {
            // RS needs enough block columns: K = k suffices for c1, while c2
            // reads 2*s*g of them, so widen K accordingly.
            "rs" => {
                let base_k = match construction {
                    Construction::C1 => k,
                    Construction::C2 => {
                        let s = r / 2;
                        let g = (k + r) / (s + 1);
                        k.max((2 * s * g).saturating_sub(r))
                    }
                };
                rs_companion_base(base_k, r, m).map_err(validation)?
            }
            "evenodd" => {
                if r != 2 {
                    return Err(validation("the evenodd base provides exactly r = 2"));
                }
                evenodd_base(m, k).map_err(validation)?
            }
            other => {
                return Err(validation(format!(
                    "unknown base {other:?}; expected rs, evenodd, or file:<path>"
                )))
            }
        }
    };
    if base.r != r || base.m != m {
        return Err(validation(format!(
            "base code has r = {}, m = {}, expected r = {r}, m = {m}",
            base.r, base.m
        )));
    }
    Ok(base)
}

fn build_coeffs(source: &str, m: usize) -> Result<CoefficientSet, CliError> {
    if let Some(path) = source.strip_prefix("file:") {
        let file: CoeffsFile = serde_json::from_str(&read_text(path)?).map_err(validation)?;
        file.to_set(m).map_err(validation)
    } else if source == "identity" {
        CoefficientSet::identity_simplified(m).map_err(validation)
    } else {
        Err(validation(format!(
            "unknown coefficient source {source:?}; expected identity or file:<path>"
        )))
    }
}

/// Trailer recording the original byte length, stored in the final 128 bits
/// of the padded bit stream.
const TRAILER_BITS: usize = 128;

fn pack_data(data: &[u8], block_bits: usize) -> BitVec {
    let data_bits = data.len() * 8;
    let blocks = (data_bits + TRAILER_BITS).div_ceil(block_bits);
    let total = blocks * block_bits;
    let mut stream = BitVec::zeros(total);
    for (i, &byte) in data.iter().enumerate() {
        for b in 0..8 {
            if byte >> b & 1 == 1 {
                stream.set(i * 8 + b, true);
            }
        }
    }
    let len = data.len() as u64;
    for b in 0..64 {
        if len >> b & 1 == 1 {
            stream.set(total - TRAILER_BITS + b, true);
        }
    }
    stream
}

fn unpack_data(stream: &BitVec) -> Result<Vec<u8>, CliError> {
    if stream.len() < TRAILER_BITS {
        return Err(CliError::Verification("decoded stream too short".into()));
    }
    let mut len: u64 = 0;
    for b in 0..64 {
        if stream.get(stream.len() - TRAILER_BITS + b) {
            len |= 1 << b;
        }
    }
    let len = len as usize;
    if len * 8 + TRAILER_BITS > stream.len() {
        return Err(CliError::Verification(format!(
            "trailer length {len} exceeds decoded payload"
        )));
    }
    let mut out = vec![0u8; len];
    for (i, byte) in out.iter_mut().enumerate() {
        for b in 0..8 {
            if stream.get(i * 8 + b) {
                *byte |= 1 << b;
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build {
            construction,
            k,
            r,
            s,
            m,
            base,
            coeffs,
            out,
        } => {
            let base = build_base(&base, construction, k, r, m)?;
            let coeffs = build_coeffs(&coeffs, m)?;
            let code = match construction {
                Construction::C1 => {
                    let s = s.ok_or_else(|| validation("--s is required for c1"))?;
                    build_c1(&base, k, s, &coeffs).map_err(validation)?
                }
                Construction::C2 => {
                    if let Some(s) = s {
                        if s != r / 2 {
                            return Err(validation(format!("c2 requires s = r/2 = {}", r / 2)));
                        }
                    }
                    build_c2(&base, k, &coeffs).map_err(validation)?
                }
            };
            write_file(&out, code.to_json().as_bytes())?;
            println!(
                "built {:?} (n={}, k={}, r={}, s={}, m={}) l={} d={} -> {out}",
                code.kind,
                code.n(),
                code.k,
                code.r,
                code.s,
                code.m,
                code.l,
                code.d
            );
            Ok(())
        }
        Command::VerifyMds { code, jobs } => {
            let code = load_code(&code)?;
            let subsets = bmds_core::indexing::combinations(code.n(), code.r).len();
            match is_mds(&code, jobs) {
                MdsVerdict::Pass => {
                    println!(
                        "MDS: pass ({subsets} submatrices of rank {} checked)",
                        code.r * code.l
                    );
                    Ok(())
                }
                MdsVerdict::Fail { witness } => {
                    println!("MDS: fail witness={witness:?}");
                    Err(CliError::Verification(format!(
                        "block columns {witness:?} flatten below rank {}",
                        code.r * code.l
                    )))
                }
            }
        }
        Command::Encode { code, data, out } => {
            let code = load_code(&code)?;
            let payload = read_file(&data)?;
            let block_bits = code.k * code.l;
            let stream = pack_data(&payload, block_bits);
            let blocks = stream.len() / block_bits;
            let mut words = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let info: Vec<BitVec> = (0..code.k)
                    .map(|j| stream.subrange(b * block_bits + j * code.l, code.l))
                    .collect();
                words.push(encode(&code, &info).map_err(validation)?);
            }
            write_file(&out, &Codeword::write_many(&code, &words))?;
            println!(
                "encoded {} bytes into {blocks} codeword block(s) of {} columns x {} bits -> {out}",
                payload.len(),
                code.n(),
                code.l
            );
            Ok(())
        }
        Command::Decode {
            code,
            codeword,
            erase,
            out,
        } => {
            let code = load_code(&code)?;
            let words = load_codewords(&code, &codeword)?;
            let mut recovered_words = Vec::with_capacity(words.len());
            let mut recovered_columns: Vec<Vec<BitVec>> = vec![Vec::new(); erase.len()];
            for word in &words {
                let mut damaged = word.clone();
                for &j in &erase {
                    if j >= code.n() {
                        return Err(validation(format!("erased column {j} out of range")));
                    }
                    damaged.set_column(j, BitVec::zeros(code.l));
                }
                let fixed = erasure_decode(&code, &damaged, &erase)
                    .map_err(|e| CliError::Verification(e.to_string()))?;
                for (slot, &j) in erase.iter().enumerate() {
                    recovered_columns[slot].push(fixed.column(j).clone());
                }
                if !parity_ok(&code, &fixed) {
                    return Err(CliError::Verification(
                        "decoded block violates the parity equations".into(),
                    ));
                }
                recovered_words.push(fixed);
            }
            for (slot, &j) in erase.iter().enumerate() {
                println!(
                    "column {j}: recovered digest={}",
                    column_digest(&recovered_columns[slot])
                );
            }
            if let Some(out) = out {
                let block_bits = code.k * code.l;
                let mut stream = BitVec::zeros(recovered_words.len() * block_bits);
                for (b, word) in recovered_words.iter().enumerate() {
                    for j in 0..code.k {
                        stream.write_subrange(b * block_bits + j * code.l, word.column(j));
                    }
                }
                let data = unpack_data(&stream)?;
                write_file(&out, &data)?;
                println!("decoded {} bytes -> {out}", data.len());
            }
            Ok(())
        }
        Command::Repair {
            code,
            codeword,
            fail,
            helpers,
        } => {
            let code = load_code(&code)?;
            let words = load_codewords(&code, &codeword)?;
            let free = if helpers.is_empty() {
                None
            } else {
                Some(&helpers[..])
            };
            let plan = plan_repair(&code, fail, free).map_err(validation)?;
            let mut recovered = Vec::with_capacity(words.len());
            let mut matches = true;
            for word in &words {
                let column = execute_repair(&code, word, &plan)
                    .map_err(|e| CliError::Verification(e.to_string()))?;
                matches &= &column == word.column(fail);
                recovered.push(column);
            }
            let blocks = words.len() as u64;
            println!(
                "node {fail}: helpers={:?} downloaded={} bits accessed={} bits over {blocks} block(s)",
                plan.helpers,
                plan.bits_downloaded * blocks,
                plan.bits_accessed * blocks
            );
            println!(
                "node {fail}: recovered digest={}",
                column_digest(&recovered)
            );
            if matches {
                println!("node {fail}: matches stored column");
                Ok(())
            } else {
                Err(CliError::Verification(format!(
                    "repaired column {fail} differs from the stored column"
                )))
            }
        }
        Command::Report { code, format, seed } => {
            let code = load_code(&code)?;
            let report =
                bandwidth_report(&code, seed).map_err(|e| CliError::Verification(e.to_string()))?;
            match format {
                ReportFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                }
                ReportFormat::Table => {
                    println!(
                        "construction {:?}  k={} r={} s={} m={}  l={}  d={}",
                        report.code.kind,
                        report.code.k,
                        report.code.r,
                        report.code.s,
                        report.code.m,
                        report.code.l,
                        report.code.d
                    );
                    println!(
                        "{:>4}  {:<20} {:>10}  {:>8}  recovered",
                        "node", "helpers", "downloaded", "accessed"
                    );
                    for stats in &report.per_node {
                        let helpers = stats
                            .helpers
                            .iter()
                            .map(|h| h.to_string())
                            .collect::<Vec<_>>()
                            .join(",");
                        println!(
                            "{:>4}  {:<20} {:>10}  {:>8}  {}",
                            stats.node,
                            helpers,
                            stats.bits_downloaded,
                            stats.bits_accessed,
                            if stats.recovered_matches {
                                "ok"
                            } else {
                                "MISMATCH"
                            }
                        );
                    }
                    println!("lower bound dl/(d-k+1): {} bits", report.lower_bound);
                    println!("average accessed: {} bits", report.average_accessed);
                    println!(
                        "verdicts: download_optimal={} access_profile={} average_matches={} all_recovered={}",
                        report.verdicts.download_optimal,
                        report.verdicts.access_profile,
                        report.verdicts.average_matches,
                        report.verdicts.all_nodes_recovered
                    );
                }
            }
            let v = &report.verdicts;
            if v.download_optimal && v.access_profile && v.average_matches && v.all_nodes_recovered
            {
                Ok(())
            } else {
                Err(CliError::Verification(
                    "bandwidth report verdicts not all satisfied".into(),
                ))
            }
        }
    }
}
