use stepstone::env::{Boundary, EnvironmentSpec, Family, Migration};
use stepstone::kernel::local_clt_error;

fn main() {
    let mig = Migration::standard(1.0).unwrap();
    let constant = EnvironmentSpec::new(Family::Constant { size: 2.0 }, 2.0, 8, Boundary::Ring).unwrap();
    let rows = local_clt_error(&constant, mig, &[100.0, 400.0], 0.5, 2.0, 4, 2.0, 1).unwrap();
    for r in &rows { println!("constant n={} ring={} err={:.5}", r.n, r.ring_len, r.sup_error); }

    let periodic = EnvironmentSpec::new(Family::Periodic { pattern: vec![1.0, 2.0] }, 2.0, 8, Boundary::Ring).unwrap();
    let rows = local_clt_error(&periodic, mig, &[100.0, 1000.0, 10000.0], 0.5, 2.0, 4, 2.0, 1).unwrap();
    for r in &rows { println!("periodic n={} ring={} err={:.5}", r.n, r.ring_len, r.sup_error); }

    let iid = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] }, 2.0, 8, Boundary::Ring).unwrap();
    for seed in [1u64, 2, 3] {
        let rows = local_clt_error(&iid, mig, &[10000.0], 0.5, 2.0, 4, 2.0, seed).unwrap();
        for r in &rows { println!("iid seed={seed} n={} ring={} err={:.5}", r.n, r.ring_len, r.sup_error); }
    }
}
