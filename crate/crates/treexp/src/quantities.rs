//! Application-level quantities: expected attachment score, Shannon
//! entropy (plus the older N^4 baseline), KL divergence, the
//! generalized-expectation objective, Renyi entropy, and distribution
//! norms.  Each gradient-bearing quantity routes its second-order part
//! through the unified algorithm with a one-hot/w payload and applies
//! the quotient rule through Z explicitly.

use crate::error::{Error, Result};
use crate::expectations::{
    first_total, second_total, second_total_hes, DerivCtx,
};
use crate::graph::{EdgeFunction, Tree, WeightedGraph};
use crate::laplacian::{laplacian_from_table, sign_log_partition_function};
use crate::linalg;
use crate::{real, Real};

/// Scalar value of a named quantity plus, when requested, its gradient
/// with respect to the raw edge weights as a dense (N+1) x (N+1) table
/// with structural zeros.
#[derive(Debug, Clone)]
pub struct QuantityResult<F> {
    pub value: F,
    pub gradient: Option<Vec<Vec<F>>>,
}

/// Generalized-expectation constraint: sparse edge features with a
/// target expectation vector.
#[derive(Debug, Clone)]
pub struct GESpec<F> {
    pub features: EdgeFunction<F>,
    pub target: Vec<F>,
}

/// Which second-order algorithm backs a gradient computation.  The
/// Hessian route exists for benchmarking against the unified one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondRoute {
    Unified,
    Hessian,
}

/// d r-bar / d w as a dense table, for a scalar (dim-1) payload that is
/// treated as independent of w: one second-order total against the
/// one-hot/w payload.  Columns at zero-weight edges are zero.
fn scalar_total_gradient<F: Real>(
    g: &WeightedGraph<F>,
    r: &EdgeFunction<F>,
    route: SecondRoute,
) -> Result<Vec<Vec<F>>> {
    debug_assert_eq!(r.dim(), 1);
    let onehot = EdgeFunction::one_hot_over_weight(g);
    let t = match route {
        SecondRoute::Unified => second_total(g, r, &onehot)?,
        SecondRoute::Hessian => second_total_hes(g, r, &onehot)?,
    };
    let n = g.n();
    let m = n + 1;
    let mut table = vec![vec![F::zero(); m]; m];
    for (i, j) in g.edges() {
        table[i][j] = t.get(0, i * m + j);
    }
    Ok(table)
}

/// Expected unlabeled attachment score against a gold tree, in [0, 1].
pub fn expected_attachment<F: Real>(
    g: &WeightedGraph<F>,
    gold: &Tree,
    compute_grad: bool,
) -> Result<QuantityResult<F>> {
    let n = g.n();
    if !gold.is_valid(n, g.constraint()) {
        return Err(Error::Domain(
            "gold tree is not a valid arborescence for this graph".into(),
        ));
    }
    let ctx = DerivCtx::new(g)?;
    let inv_n = real::<F>(1.0 / n as f64);
    let mut r = EdgeFunction::new(1);
    for (i, j) in gold.edges() {
        r.add(i, j, 0, inv_n);
    }
    let rbar = first_total(g, &r)?[0];
    let value = rbar / ctx.z;
    let gradient = if compute_grad {
        // r does not depend on w: no first-order correction.
        let jac = scalar_total_gradient(g, &r, SecondRoute::Unified)?;
        let mut table = vec![vec![F::zero(); n + 1]; n + 1];
        for (i, j) in g.edges() {
            table[i][j] = (jac[i][j] - value * ctx.dz(i, j)) / ctx.z;
        }
        Some(table)
    } else {
        None
    };
    Ok(QuantityResult { value, gradient })
}

/// Shannon entropy H(p) = E[-log p(d)], with the per-edge decomposition
/// r_ij = (1/N) log Z - log w_ij.  Zero-weight edges contribute zero.
pub fn shannon_entropy<F: Real>(
    g: &WeightedGraph<F>,
    compute_grad: bool,
) -> Result<QuantityResult<F>> {
    let ctx = DerivCtx::new(g)?;
    if ctx.z <= F::zero() {
        return Err(Error::Singular);
    }
    let n = g.n();
    let (_, log_z) = sign_log_partition_function(g);
    let inv_n = real::<F>(1.0 / n as f64);

    let mut r = EdgeFunction::new(1);
    for (i, j) in g.edges() {
        let w = g.weight(i, j);
        if w > F::zero() {
            r.add(i, j, 0, inv_n * log_z - w.ln());
        }
    }
    let rbar = first_total(g, &r)?[0];
    let value = rbar / ctx.z;

    let gradient = if compute_grad {
        let jac = scalar_total_gradient(g, &r, SecondRoute::Unified)?;
        // First-order correction for the w-dependence of r:
        // grad r_kl = (1/(N Z)) grad Z - (1/w_kl) e_kl, contracted
        // against the edge totals.  (Analytically zero, kept for the
        // product-rule bookkeeping.)
        let mut sum_wbar = F::zero();
        for (i, j) in g.edges() {
            sum_wbar += g.weight(i, j) * ctx.dz(i, j);
        }
        let shared = sum_wbar / (real::<F>(n as f64) * ctx.z);
        let mut table = vec![vec![F::zero(); n + 1]; n + 1];
        for (i, j) in g.edges() {
            let dz = ctx.dz(i, j);
            let first_order = shared * dz - dz;
            table[i][j] = (jac[i][j] + first_order - value * dz) / ctx.z;
        }
        Some(table)
    } else {
        None
    };
    Ok(QuantityResult { value, gradient })
}

/// Deliberately O(N^4) entropy: one determinant per node, replacing the
/// weights into that node by w * log w.  Benchmark baseline only.
pub fn shannon_entropy_baseline_n4<F: Real>(g: &WeightedGraph<F>) -> Result<F> {
    let ctx = DerivCtx::new(g)?;
    if ctx.z <= F::zero() {
        return Err(Error::Singular);
    }
    let n = g.n();
    let (_, log_z) = sign_log_partition_function(g);
    let mut acc = F::zero();
    for j in 1..=n {
        let mut table: Vec<Vec<F>> = g.weights().to_vec();
        for (i, row) in table.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let w = row[j];
            row[j] = if w > F::zero() { w * w.ln() } else { F::zero() };
        }
        let lap = laplacian_from_table(&table, g.constraint());
        acc += linalg::determinant(&lap.matrix).expect("square by construction");
    }
    Ok(log_z - acc / ctx.z)
}

/// KL(p || q) between two edge-factored distributions over the same
/// node set and root constraint; gradient is with respect to p's
/// weights.  Both graphs carry raw (unnormalized) weights.
pub fn kl_divergence<F: Real>(
    p: &WeightedGraph<F>,
    q: &WeightedGraph<F>,
    compute_grad: bool,
) -> Result<QuantityResult<F>> {
    if p.n() != q.n() || p.constraint() != q.constraint() {
        return Err(Error::Dimension(
            "KL requires identical node count and root constraint".into(),
        ));
    }
    let ctx = DerivCtx::new(p)?;
    if ctx.z <= F::zero() {
        return Err(Error::Singular);
    }
    let (sq, log_zq) = sign_log_partition_function(q);
    if sq <= 0 {
        return Err(Error::Singular);
    }
    let n = p.n();
    let (_, log_zp) = sign_log_partition_function(p);
    let inv_n = real::<F>(1.0 / n as f64);

    // Absolute continuity: p-support must be inside q-support.
    let mut r = EdgeFunction::new(1);
    for (i, j) in p.edges() {
        let w = p.weight(i, j);
        if w == F::zero() {
            continue;
        }
        let wbar = w * ctx.dz(i, j);
        if wbar > F::zero() && q.weight(i, j) == F::zero() {
            return Err(Error::Support(i, j));
        }
        if wbar > F::zero() {
            // log(w/q) folds q's normalizer back in so the brute-force
            // definition holds for raw q weights.
            r.add(
                i,
                j,
                0,
                (w / q.weight(i, j)).ln() - inv_n * log_zp + inv_n * log_zq,
            );
        }
    }
    let rbar = first_total(p, &r)?[0];
    let value = rbar / ctx.z;

    let gradient = if compute_grad {
        let jac = scalar_total_gradient(p, &r, SecondRoute::Unified)?;
        let mut sum_wbar = F::zero();
        for (i, j) in p.edges() {
            sum_wbar += p.weight(i, j) * ctx.dz(i, j);
        }
        let shared = sum_wbar / (real::<F>(n as f64) * ctx.z);
        let mut table = vec![vec![F::zero(); n + 1]; n + 1];
        for (i, j) in p.edges() {
            let dz = ctx.dz(i, j);
            // grad r_kl = (1/w_kl) e_kl - (1/(N Z_p)) grad Z_p.
            let first_order = dz - shared * dz;
            table[i][j] = (jac[i][j] + first_order - value * dz) / ctx.z;
        }
        Some(table)
    } else {
        None
    };
    Ok(QuantityResult { value, gradient })
}

/// GE objective 0.5 * || E[f(d)] - f* ||^2 with gradient via one
/// scalar second-order call on the residual-contracted features.
pub fn ge_objective<F: Real>(
    g: &WeightedGraph<F>,
    spec: &GESpec<F>,
    compute_grad: bool,
) -> Result<QuantityResult<F>> {
    ge_objective_with_route(g, spec, compute_grad, SecondRoute::Unified)
}

/// GE objective with an explicit choice of second-order backend for the
/// gradient (benchmark support).
pub fn ge_objective_with_route<F: Real>(
    g: &WeightedGraph<F>,
    spec: &GESpec<F>,
    compute_grad: bool,
    route: SecondRoute,
) -> Result<QuantityResult<F>> {
    if spec.features.dim() != spec.target.len() {
        return Err(Error::Dimension(
            "GE feature dimension disagrees with target length".into(),
        ));
    }
    let ctx = DerivCtx::new(g)?;
    let fbar = first_total(g, &spec.features)?;
    let mut value = F::zero();
    let mut resid = vec![F::zero(); fbar.len()];
    for (k, (&fb, &tgt)) in fbar.iter().zip(&spec.target).enumerate() {
        let d = fb / ctx.z - tgt;
        resid[k] = d;
        value += d * d;
    }
    value *= real::<F>(0.5);

    let gradient = if compute_grad {
        let n = g.n();
        // Residual-contracted scalar payload: r1_ij = f_ij . resid.
        let mut r1 = EdgeFunction::new(1);
        for ((i, j), row) in spec.features.iter() {
            let mut dot = F::zero();
            for &(c, v) in row {
                dot += v * resid[c];
            }
            if dot != F::zero() {
                r1.add(i, j, 0, dot);
            }
        }
        let rbar1 = first_total(g, &r1)?[0];
        let jac = scalar_total_gradient(g, &r1, route)?;
        let mut table = vec![vec![F::zero(); n + 1]; n + 1];
        for (i, j) in g.edges() {
            table[i][j] = (jac[i][j] - rbar1 / ctx.z * ctx.dz(i, j)) / ctx.z;
        }
        Some(table)
    } else {
        None
    };
    Ok(QuantityResult { value, gradient })
}

/// Graph with every weight raised to `exponent`; exponent 0 maps
/// positive weights to 1 (support indicator).
fn powered_graph<F: Real>(g: &WeightedGraph<F>, exponent: F) -> WeightedGraph<F> {
    g.map_weights(|_, _, w| {
        if w == F::zero() {
            F::zero()
        } else if exponent == F::zero() {
            F::one()
        } else {
            w.powf(exponent)
        }
    })
}

/// Renyi entropy of order alpha (alpha >= 0, alpha != 1), computed in
/// the log domain from two partition functions.
pub fn renyi_entropy<F: Real>(g: &WeightedGraph<F>, alpha: F) -> Result<F> {
    if alpha < F::zero() {
        return Err(Error::Domain("Renyi order must be non-negative".into()));
    }
    if alpha == F::one() {
        return Err(Error::Domain(
            "Renyi order 1 is Shannon entropy; use shannon_entropy".into(),
        ));
    }
    let (sz, log_z) = sign_log_partition_function(g);
    if sz <= 0 {
        return Err(Error::Singular);
    }
    let (sq, log_q) = sign_log_partition_function(&powered_graph(g, alpha));
    if sq <= 0 {
        return Err(Error::Singular);
    }
    Ok((log_q - alpha * log_z) / (F::one() - alpha))
}

/// l_k norm of the distribution, (sum_d p(d)^k)^(1/k), for k > 0.
pub fn lp_norm<F: Real>(g: &WeightedGraph<F>, k: F) -> Result<F> {
    if k <= F::zero() {
        return Err(Error::Domain("norm order must be positive".into()));
    }
    let (sz, log_z) = sign_log_partition_function(g);
    if sz <= 0 {
        return Err(Error::Singular);
    }
    let (sq, log_q) = sign_log_partition_function(&powered_graph(g, k));
    if sq <= 0 {
        return Err(Error::Singular);
    }
    Ok(((log_q - k * log_z) / k).exp())
}
