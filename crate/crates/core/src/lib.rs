//! Binary MDS array codes with cheap single-node repair.
//!
//! Two generic constructions turn a small binary MDS array base code into a
//! longer one: [`construct::build_c1`] yields codes whose repair reads
//! exactly what it downloads (optimal access), [`construct::build_c2`]
//! yields codes with the same download volume at smaller sub-packetization,
//! where a fraction of the nodes trade extra reads for helper-side XOR.
//! Everything runs over GF(2): encoding, decoding, and repair are XOR-only.
//!
//! ```
//! use bmds_core::{basecode, codec, construct, repair};
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let base = basecode::rs_companion_base(3, 2, 4)?;
//! let coeffs = construct::CoefficientSet::identity_simplified(4)?;
//! let code = construct::build_c1(&base, 3, 2, &coeffs)?;
//! assert!(codec::is_mds(&code, 2).is_pass());
//!
//! let mut rng = rand::rng();
//! let cw = codec::random_codeword(&code, &mut rng);
//! let plan = repair::plan_repair(&code, 2, None)?;
//! let column = repair::execute_repair(&code, &cw, &plan)?;
//! assert_eq!(&column, cw.column(2));
//! assert_eq!(plan.bits_downloaded, 64); // d*l/(d-k+1)
//! # Ok(())
//! # }
//! ```

pub mod basecode;
pub mod codec;
pub mod construct;
pub mod gf2;
pub mod indexing;
pub mod repair;

pub use basecode::{
    evenodd_base, rs_companion_base, BaseCode, BaseCodeError, MdsVerdict, Provenance,
};
pub use codec::{encode, erasure_decode, is_mds, parity_ok, random_codeword, CodecError, Codeword};
pub use construct::{
    build_c1, build_c2, expected_subpacketization, ArrayCode, BlockEntry, CodeKind, CoefficientSet,
    ConstructError, PsiTag,
};
pub use gf2::{BitMatrix, BitVec, BlockMatrix, Gf2Error};
pub use repair::{
    bandwidth_report, execute_repair, execute_repair_c1, execute_repair_c2, plan_repair,
    plan_repair_c1, plan_repair_c2, BandwidthReport, HelperPayload, RepairError, RepairPlan,
};
