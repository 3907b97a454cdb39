//! `treexp`: generate instances, compute tree-distribution quantities,
//! verify against the enumeration oracle, and benchmark the fast paths.

mod bench;
mod instance;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use instance::{constraint_name, to_canonical_json, GeBlock, InstanceFile};
use treexp::expectations::{edge_totals, z_gradient};
use treexp::laplacian::partition_function;
use treexp::quantities::{
    expected_attachment, ge_objective, kl_divergence, lp_norm, renyi_entropy, shannon_entropy,
};
use treexp::{Error, Graph64, RootConstraint, Tree};

#[derive(Parser)]
#[command(name = "treexp", about = "Expectations over spanning-tree distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Single,
    Multi,
}

impl From<ConstraintArg> for RootConstraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Single => RootConstraint::SingleRoot,
            ConstraintArg::Multi => RootConstraint::MultiRoot,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Z,
    Marginals,
    Entropy,
    Kl,
    Risk,
    Ge,
    Renyi,
    Lpnorm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file (deterministic for a seed).
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        constraint: ConstraintArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a quantity (optionally with its gradient) on an instance.
    Compute {
        #[arg(value_enum)]
        quantity: QuantityArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        grad: bool,
        /// Renyi order (required for `renyi`).
        #[arg(long)]
        alpha: Option<f64>,
        /// Norm order (required for `lpnorm`).
        #[arg(long)]
        k: Option<f64>,
        /// Instance file supplying the comparison weights for `kl`
        /// (overrides the q_weights field of the input).
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Check fast algorithms against the enumeration oracle and finite
    /// differences on random instances.
    Verify {
        #[arg(long = "max-n")]
        max_n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Time the cubic fast paths against their slower baselines.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![8usize, 16, 32, 64, 128])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Gen {
            seed,
            n,
            constraint,
            out,
        } => cmd_gen(seed, n, constraint.into(), &out),
        Command::Compute {
            quantity,
            input,
            grad,
            alpha,
            k,
            q,
        } => cmd_compute(quantity, &input, grad, alpha, k, q.as_deref()),
        Command::Verify {
            max_n,
            trials,
            seed,
        } => verify::cmd_verify(max_n, trials, seed),
        Command::Bench {
            sizes,
            reps,
            seed,
            out,
        } => bench::cmd_bench(&sizes, reps, seed, out.as_deref()),
    }
}

/// Build a random valid tree: nodes enter in shuffled order; the first
/// attaches to the root, later ones to the root (multi-root only) or to
/// any earlier node.
fn random_tree(rng: &mut ChaCha8Rng, n: usize, c: RootConstraint) -> Tree {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut parents = vec![0usize; n];
    for (pos, &node) in order.iter().enumerate() {
        let head = if pos == 0 {
            0
        } else {
            let allow_root = c == RootConstraint::MultiRoot;
            let choices = pos + usize::from(allow_root);
            let pick = rng.gen_range(0..choices);
            if allow_root && pick == pos {
                0
            } else {
                order[pick]
            }
        };
        parents[node - 1] = head;
    }
    Tree::new(parents)
}

fn random_weight_table(rng: &mut ChaCha8Rng, n: usize, c: RootConstraint) -> Vec<Vec<f64>> {
    let shape = Graph64::new(n, c);
    let mut weights = vec![vec![0.0; n + 1]; n + 1];
    for (i, j) in shape.edges() {
        weights[i][j] = rng.gen_range(0.1..1.0);
    }
    weights
}

pub(crate) fn generate_instance(seed: u64, n: usize, c: RootConstraint) -> InstanceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = random_weight_table(&mut rng, n, c);
    let q_weights = random_weight_table(&mut rng, n, c);
    let gold = random_tree(&mut rng, n, c);
    let dim = 4usize;
    let shape = Graph64::new(n, c);
    let mut features = Vec::new();
    for (i, j) in shape.edges() {
        features.push((i, j, rng.gen_range(0..dim), rng.gen_range(-1.0..1.0)));
    }
    let target: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
    InstanceFile {
        n,
        root_constraint: constraint_name(c).to_string(),
        weights,
        labels: None,
        labeled_weights: None,
        gold: Some(gold.parents().to_vec()),
        q_weights: Some(q_weights),
        ge: Some(GeBlock { features, target }),
    }
}

fn cmd_gen(seed: u64, n: usize, c: RootConstraint, out: &std::path::Path) -> ExitCode {
    if n < 1 {
        eprintln!("error: --n must be at least 1");
        return ExitCode::from(2);
    }
    let inst = generate_instance(seed, n, c);
    match std::fs::write(out, to_canonical_json(&inst)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", out.display());
            ExitCode::FAILURE
        }
    }
}

/// 17 significant digits, valid as a JSON number.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // JSON has no infinities; surface them loudly instead.
        format!("\"{v}\"")
    }
}

fn fmt_table(table: &[Vec<f64>]) -> String {
    let rows: Vec<String> = table
        .iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Structural(_) => "structural",
        Error::Size(_) => "size",
        Error::Dimension(_) => "dimension",
        Error::Singular => "singular",
        Error::Support(_, _) => "support",
        Error::Domain(_) => "domain",
        Error::Numerical(_) => "numerical",
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    println!(
        "{}",
        serde_json::json!({ "error": { "kind": kind, "message": message } })
    );
    ExitCode::from(2)
}

fn cmd_compute(
    quantity: QuantityArg,
    input: &std::path::Path,
    grad: bool,
    alpha: Option<f64>,
    k: Option<f64>,
    q_path: Option<&std::path::Path>,
) -> ExitCode {
    let inst: InstanceFile = match std::fs::read_to_string(input) {
        Ok(text) => match serde_json::from_str(&text) {
            Ok(inst) => inst,
            Err(e) => return fail("structural", &format!("cannot parse instance: {e}")),
        },
        Err(e) => return fail("io", &format!("cannot read {}: {e}", input.display())),
    };
    let g = match inst.to_graph() {
        Ok(g) => g,
        Err(e) => return fail("structural", &e),
    };

    let result: Result<(f64, Option<Vec<Vec<f64>>>, Option<(&str, Vec<Vec<f64>>)>), Error> =
        (|| match quantity {
            QuantityArg::Z => {
                if grad {
                    let (z, dz) = z_gradient(&g)?;
                    Ok((z, Some(dz), None))
                } else {
                    Ok((partition_function(&g), None, None))
                }
            }
            QuantityArg::Marginals => {
                if grad {
                    return Err(Error::Domain(
                        "marginals has no scalar gradient; use the entropy/kl/risk/ge gradients"
                            .into(),
                    ));
                }
                let et = edge_totals(&g)?;
                let n = g.n();
                let mut table = vec![vec![0.0; n + 1]; n + 1];
                for (i, j) in g.edges() {
                    table[i][j] = et.marginal(i, j);
                }
                Ok((partition_function(&g), None, Some(("marginals", table))))
            }
            QuantityArg::Entropy => {
                let r = shannon_entropy(&g, grad)?;
                Ok((r.value, r.gradient, None))
            }
            QuantityArg::Kl => {
                let q = match q_path {
                    Some(path) => {
                        let text = std::fs::read_to_string(path)
                            .map_err(|e| Error::Structural(format!("cannot read q file: {e}")))?;
                        let q_inst: InstanceFile = serde_json::from_str(&text)
                            .map_err(|e| Error::Structural(format!("cannot parse q file: {e}")))?;
                        q_inst.to_graph().map_err(Error::Structural)?
                    }
                    None => inst
                        .to_q_graph()
                        .map_err(Error::Structural)?
                        .ok_or_else(|| {
                            Error::Structural("kl requires q_weights or --q".into())
                        })?,
                };
                let r = kl_divergence(&g, &q, grad)?;
                Ok((r.value, r.gradient, None))
            }
            QuantityArg::Risk => {
                let gold = inst
                    .to_gold()
                    .map_err(Error::Structural)?
                    .ok_or_else(|| Error::Structural("risk requires a gold tree".into()))?;
                let r = expected_attachment(&g, &gold, grad)?;
                Ok((r.value, r.gradient, None))
            }
            QuantityArg::Ge => {
                let spec = inst
                    .to_ge()
                    .map_err(Error::Structural)?
                    .ok_or_else(|| Error::Structural("ge requires a ge block".into()))?;
                let r = ge_objective(&g, &spec, grad)?;
                Ok((r.value, r.gradient, None))
            }
            QuantityArg::Renyi => {
                if grad {
                    return Err(Error::Domain("renyi has no gradient".into()));
                }
                let alpha =
                    alpha.ok_or_else(|| Error::Domain("renyi requires --alpha".into()))?;
                Ok((renyi_entropy(&g, alpha)?, None, None))
            }
            QuantityArg::Lpnorm => {
                if grad {
                    return Err(Error::Domain("lpnorm has no gradient".into()));
                }
                let k = k.ok_or_else(|| Error::Domain("lpnorm requires --k".into()))?;
                Ok((lp_norm(&g, k)?, None, None))
            }
        })();

    match result {
        Ok((value, gradient, extra)) => {
            let mut fields = vec![format!("\"value\":{}", fmt_f64(value))];
            if let Some(table) = gradient {
                fields.push(format!("\"gradient\":{}", fmt_table(&table)));
            }
            if let Some((name, table)) = extra {
                fields.push(format!("\"{name}\":{}", fmt_table(&table)));
            }
            println!("{{{}}}", fields.join(","));
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_kind(&e), &e.to_string()),
    }
}
