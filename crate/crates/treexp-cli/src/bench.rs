//! `bench`: wall-clock the cubic entropy path against the quartic
//! baseline, and the unified second-order GE gradient against the
//! materialized-Hessian route.  Output is CSV; the reproducible content
//! is the ratio between paired rows, not absolute times.

use std::process::ExitCode;
use std::time::Instant;

use treexp::quantities::{
    ge_objective_with_route, shannon_entropy, shannon_entropy_baseline_n4, SecondRoute,
};
use treexp::RootConstraint;

use crate::generate_instance;

struct BenchRow {
    n: usize,
    algo: &'static str,
    ms: f64,
    reps: usize,
}

/// One warm-up run, then `reps` timed runs; reports the mean in ms.
fn time_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    f();
    let t0 = Instant::now();
    for _ in 0..reps {
        f();
    }
    t0.elapsed().as_secs_f64() * 1e3 / reps as f64
}

pub fn cmd_bench(
    sizes: &[usize],
    reps: usize,
    seed: u64,
    out: Option<&std::path::Path>,
) -> ExitCode {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        eprintln!("error: --sizes must be strictly ascending");
        return ExitCode::from(2);
    }
    let reps = reps.max(5);
    let mut rows = Vec::new();
    for &n in sizes {
        let inst = generate_instance(seed ^ n as u64, n, RootConstraint::MultiRoot);
        let g = inst.to_graph().expect("generated instance is valid");
        let spec = inst.to_ge().expect("generated instance has features").unwrap();

        rows.push(BenchRow {
            n,
            algo: "entropy_cubic",
            ms: time_ms(reps, || {
                shannon_entropy(&g, false).unwrap();
            }),
            reps,
        });
        rows.push(BenchRow {
            n,
            algo: "entropy_quartic_baseline",
            ms: time_ms(reps, || {
                shannon_entropy_baseline_n4(&g).unwrap();
            }),
            reps,
        });
        rows.push(BenchRow {
            n,
            algo: "ge_grad_unified",
            ms: time_ms(reps, || {
                ge_objective_with_route(&g, &spec, true, SecondRoute::Unified).unwrap();
            }),
            reps,
        });
        rows.push(BenchRow {
            n,
            algo: "ge_grad_hessian",
            ms: time_ms(reps, || {
                ge_objective_with_route(&g, &spec, true, SecondRoute::Hessian).unwrap();
            }),
            reps,
        });

        // Value determinism across routes on the benched instance.
        let a = ge_objective_with_route(&g, &spec, true, SecondRoute::Unified).unwrap();
        let b = ge_objective_with_route(&g, &spec, true, SecondRoute::Hessian).unwrap();
        assert_eq!(a.value, b.value, "GE value must not depend on the route");
    }

    let mut csv = String::from("n,algo,ms,reps\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{:.6},{}\n", row.n, row.algo, row.ms, row.reps));
    }
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{csv}"),
    }
    ExitCode::SUCCESS
}
