//! `verify`: replay the oracle-equivalence and finite-difference
//! properties on freshly generated random instances.

use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treexp::expectations::{
    edge_totals, second_total, second_total_hes, second_total_vjp, z_gradient,
};
use treexp::graph::{brute_total, brute_z, rel_close};
use treexp::laplacian::partition_function;
use treexp::quantities::{kl_divergence, shannon_entropy};
use treexp::{EdgeFunction, Graph64, RootConstraint};

const ORACLE_MAX_N: usize = 6;

struct Report {
    passed: usize,
    failures: Vec<(u64, &'static str)>,
}

impl Report {
    fn check(&mut self, seed: u64, property: &'static str, ok: bool) {
        if ok {
            self.passed += 1;
        } else {
            self.failures.push((seed, property));
        }
    }
}

fn instance(seed: u64) -> Graph64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // n and constraint are folded into the seed by the caller.
    let n = (seed % ORACLE_MAX_N as u64) as usize + 1;
    let c = if seed % 2 == 0 {
        RootConstraint::MultiRoot
    } else {
        RootConstraint::SingleRoot
    };
    let mut g = Graph64::new(n, c);
    for (i, j) in g.clone().edges() {
        g.set_weight(i, j, rng.gen_range(0.1..1.0));
    }
    g
}

fn check_instance(seed: u64, report: &mut Report) {
    let g = instance(seed);
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);

    // Partition function against enumeration.
    let z = partition_function(&g);
    let brute = brute_z(&g).unwrap();
    report.check(seed, "partition_function_vs_enumeration", rel_close(z, brute, 1e-10));

    // Edge totals against enumeration.
    let et = edge_totals(&g).unwrap();
    let mut totals_ok = true;
    for (i, j) in g.edges() {
        let b = brute_total(&g, 1, |d| {
            vec![if d.edges().any(|e| e == (i, j)) { 1.0 } else { 0.0 }]
        })
        .unwrap()[0];
        totals_ok &= rel_close(et.total(i, j), b, 1e-9);
    }
    report.check(seed, "edge_totals_vs_enumeration", totals_ok);

    // Three second-order algorithms agree.
    if n >= 2 {
        let mut r = EdgeFunction::new(2);
        let mut s = EdgeFunction::new(2);
        for (i, j) in g.edges() {
            r.add(i, j, rng.gen_range(0..2), rng.gen_range(-1.0..1.0));
            s.add(i, j, rng.gen_range(0..2), rng.gen_range(-1.0..1.0));
        }
        let a = second_total(&g, &r, &s).unwrap();
        let b = second_total_hes(&g, &r, &s).unwrap();
        let v = second_total_vjp(&g, &r, &s).unwrap();
        let scale = a.max_abs().max(1e-12);
        report.check(
            seed,
            "second_order_algorithms_agree",
            a.max_abs_diff(&b) <= 1e-8 * scale && a.max_abs_diff(&v) <= 1e-8 * scale,
        );
    }

    // Finite differences: Z and entropy gradients.
    let (_, dz) = z_gradient(&g).unwrap();
    let ent = shannon_entropy(&g, true).unwrap();
    let ent_grad = ent.gradient.unwrap();
    let mut fd_ok = true;
    for (i, j) in g.edges() {
        let w = g.weight(i, j);
        let h = 1e-6 * w.max(1.0);
        let mut up = g.clone();
        up.set_weight(i, j, w + h);
        let mut dn = g.clone();
        dn.set_weight(i, j, w - h);
        let num_z = (partition_function(&up) - partition_function(&dn)) / (2.0 * h);
        fd_ok &= rel_close(num_z, dz[i][j], 1e-4) || (num_z - dz[i][j]).abs() < 1e-8;
        let num_h = (shannon_entropy(&up, false).unwrap().value
            - shannon_entropy(&dn, false).unwrap().value)
            / (2.0 * h);
        fd_ok &= rel_close(num_h, ent_grad[i][j], 1e-4) || (num_h - ent_grad[i][j]).abs() < 1e-8;
    }
    report.check(seed, "gradients_match_finite_differences", fd_ok);

    // Self-KL vanishes.
    let self_kl = kl_divergence(&g, &g, false).unwrap().value;
    report.check(seed, "self_kl_is_zero", self_kl.abs() <= 1e-10);
}

pub fn cmd_verify(max_n: usize, trials: u64, seed: u64) -> ExitCode {
    if max_n > ORACLE_MAX_N {
        eprintln!("error: --max-n must be at most {ORACLE_MAX_N} (enumeration oracle bound)");
        return ExitCode::from(2);
    }
    if max_n == 0 || trials == 0 {
        eprintln!("error: --max-n and --trials must be positive");
        return ExitCode::from(2);
    }
    let mut report = Report {
        passed: 0,
        failures: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        // Derive a per-instance seed whose low bits also choose the
        // size (within max_n) and constraint; recorded on failure.
        let raw: u64 = rng.gen();
        let instance_seed = raw - raw % ORACLE_MAX_N as u64 + rng.gen_range(0..max_n as u64);
        check_instance(instance_seed, &mut report);
    }
    println!(
        "verify: {} properties passed, {} failed",
        report.passed,
        report.failures.len()
    );
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for (s, property) in &report.failures {
            println!("FAIL instance_seed={s} property={property}");
        }
        ExitCode::FAILURE
    }
}
