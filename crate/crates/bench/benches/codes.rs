use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bmds_core::basecode::rs_companion_base;
use bmds_core::codec::{encode, erasure_decode, is_mds, random_codeword};
use bmds_core::construct::{build_c1, build_c2, ArrayCode, CoefficientSet};
use bmds_core::gf2::{BitMatrix, BitVec};
use bmds_core::repair::{execute_repair, plan_repair};

fn c1_code() -> ArrayCode {
    let base = rs_companion_base(3, 2, 4).unwrap();
    build_c1(
        &base,
        3,
        2,
        &CoefficientSet::identity_simplified(4).unwrap(),
    )
    .unwrap()
}

fn c2_code() -> ArrayCode {
    let base = rs_companion_base(8, 4, 4).unwrap();
    build_c2(&base, 5, &CoefficientSet::identity_simplified(4).unwrap()).unwrap()
}

fn bench_gf2(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = BitMatrix::random(256, 256, &mut rng);
    let b = BitMatrix::random(256, 256, &mut rng);
    c.bench_function("gf2/mul 256x256", |bench| {
        bench.iter(|| black_box(&a).mul(black_box(&b)).unwrap())
    });
    c.bench_function("gf2/rank 256x256", |bench| {
        bench.iter(|| black_box(&a).rank())
    });
}

fn bench_build(c: &mut Criterion) {
    let base_c1 = rs_companion_base(3, 2, 4).unwrap();
    let base_c2 = rs_companion_base(8, 4, 4).unwrap();
    let coeffs = CoefficientSet::identity_simplified(4).unwrap();
    c.bench_function("build/c1 (5,3,32)", |bench| {
        bench.iter(|| build_c1(black_box(&base_c1), 3, 2, &coeffs).unwrap())
    });
    c.bench_function("build/c2 (9,5,32)", |bench| {
        bench.iter(|| build_c2(black_box(&base_c2), 5, &coeffs).unwrap())
    });
}

fn bench_codec(c: &mut Criterion) {
    let code = c1_code();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let info: Vec<BitVec> = (0..code.k)
        .map(|_| BitVec::random(code.l, &mut rng))
        .collect();
    c.bench_function("codec/encode (5,3,32)", |bench| {
        bench.iter(|| encode(black_box(&code), black_box(&info)).unwrap())
    });
    let cw = random_codeword(&code, &mut rng);
    c.bench_function("codec/erasure_decode two columns", |bench| {
        bench.iter(|| erasure_decode(black_box(&code), &cw, &[1, 3]).unwrap())
    });
    c.bench_function("codec/is_mds (5,3,32)", |bench| {
        bench.iter(|| is_mds(black_box(&code), 1))
    });
}

fn bench_repair(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c1 = c1_code();
    let cw1 = random_codeword(&c1, &mut rng);
    let plan1 = plan_repair(&c1, 2, None).unwrap();
    c.bench_function("repair/c1 node 2", |bench| {
        bench.iter(|| execute_repair(black_box(&c1), &cw1, &plan1).unwrap())
    });
    let c2 = c2_code();
    let cw2 = random_codeword(&c2, &mut rng);
    let plan_access = plan_repair(&c2, 0, None).unwrap();
    let plan_summed = plan_repair(&c2, 2, None).unwrap();
    c.bench_function("repair/c2 node 0 (optimal access)", |bench| {
        bench.iter(|| execute_repair(black_box(&c2), &cw2, &plan_access).unwrap())
    });
    c.bench_function("repair/c2 node 2 (summed download)", |bench| {
        bench.iter(|| execute_repair(black_box(&c2), &cw2, &plan_summed).unwrap())
    });
}

criterion_group!(benches, bench_gf2, bench_build, bench_codec, bench_repair);
criterion_main!(benches);
