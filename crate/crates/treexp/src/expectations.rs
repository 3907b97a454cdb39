//! Edge totals, pairwise totals, and three algorithms for second-order
//! totals of edge-additive functions.
//!
//! Everything here is a derivative of Z in disguise: the total weight of
//! trees through an edge is w_ij dZ/dw_ij, pairwise totals come from the
//! Hessian of Z, and second-order totals contract those against the
//! sparse per-edge payloads.  The three second-order routes trade the
//! shape of that contraction:
//!
//! * [`second_total_vjp`] — one gradient pass per payload coordinate,
//! * [`second_total_hes`] — stream the full Hessian once,
//! * [`second_total`] — the refactored form that shares the Laplacian
//!   inverse across everything and wins in either regime.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{EdgeFunction, WeightedGraph};
use crate::laplacian::{b_matrix, gamma, partition_function, GammaEntry};
use crate::linalg::Matrix;
use crate::{real, Real};

/// Shared per-graph context: Z, B = L^{-T}, and the dL/dw sparsity of
/// every edge.
pub(crate) struct DerivCtx<F> {
    n: usize,
    pub z: F,
    pub b: Matrix<F>,
    gammas: Vec<GammaEntry>,
}

impl<F: Real> DerivCtx<F> {
    pub fn new(g: &WeightedGraph<F>) -> Result<Self> {
        let n = g.n();
        let z = partition_function(g);
        let b = b_matrix(g)?;
        let mut gammas = vec![GammaEntry::default(); (n + 1) * (n + 1)];
        for (i, j) in g.edges() {
            gammas[i * (n + 1) + j] = gamma(g, i, j);
        }
        Ok(Self { n, z, b, gammas })
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize) -> &GammaEntry {
        &self.gammas[i * (self.n + 1) + j]
    }

    /// d(log Z)/dw_ij = sum over Gamma(i, j) of c * B_{i'j'}.
    #[inline]
    pub fn gz(&self, i: usize, j: usize) -> F {
        let mut acc = F::zero();
        for &(ip, jp, c) in self.gamma(i, j).entries() {
            let v = self.b[(ip - 1, jp - 1)];
            if c > 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc
    }

    /// dZ/dw_ij.
    #[inline]
    pub fn dz(&self, i: usize, j: usize) -> F {
        self.z * self.gz(i, j)
    }

    /// d2Z / dw_ij dw_kl via the Laplacian second derivative.
    #[inline]
    pub fn d2z(&self, (i, j): (usize, usize), (k, l): (usize, usize)) -> F {
        let mut acc = F::zero();
        for &(ip, jp, c1) in self.gamma(i, j).entries() {
            for &(kp, lp, c2) in self.gamma(k, l).entries() {
                let term = self.b[(ip - 1, jp - 1)] * self.b[(kp - 1, lp - 1)]
                    - self.b[(ip - 1, lp - 1)] * self.b[(kp - 1, jp - 1)];
                if c1 * c2 > 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
        }
        self.z * acc
    }
}

/// Round-off floor: totals in (-1e-9 * Z, 0) clamp to zero, anything
/// more negative is a genuine bug.
fn clamp_total<F: Real>(x: F, z: F, what: &str) -> Result<F> {
    if x >= F::zero() {
        return Ok(x);
    }
    if x > -real::<F>(1e-9) * z {
        return Ok(F::zero());
    }
    Err(Error::Numerical(format!(
        "{what} is negative beyond round-off: {x:?}"
    )))
}

/// Z together with the per-edge totals w-bar_ij.
#[derive(Debug, Clone)]
pub struct EdgeTotals<F> {
    pub z: F,
    n: usize,
    totals: Vec<Vec<F>>,
}

impl<F: Real> EdgeTotals<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total weight of trees containing edge (i, j).
    pub fn total(&self, i: usize, j: usize) -> F {
        self.totals[i][j]
    }

    /// Edge marginal p(i -> j in d) = w-bar_ij / Z.
    pub fn marginal(&self, i: usize, j: usize) -> F {
        self.totals[i][j] / self.z
    }

    pub fn table(&self) -> &[Vec<F>] {
        &self.totals
    }
}

/// Per-edge totals w-bar_ij = w_ij * dZ/dw_ij.
pub fn edge_totals<F: Real>(g: &WeightedGraph<F>) -> Result<EdgeTotals<F>> {
    let ctx = DerivCtx::new(g)?;
    edge_totals_with(g, &ctx)
}

fn edge_totals_with<F: Real>(g: &WeightedGraph<F>, ctx: &DerivCtx<F>) -> Result<EdgeTotals<F>> {
    let n = g.n();
    let mut totals = vec![vec![F::zero(); n + 1]; n + 1];
    for (i, j) in g.edges() {
        let raw = g.weight(i, j) * ctx.dz(i, j);
        totals[i][j] = clamp_total(raw, ctx.z, "edge total")?;
    }
    Ok(EdgeTotals {
        z: ctx.z,
        n,
        totals,
    })
}

/// Full 4-index table of pairwise totals w-bar_ij,kl.
#[derive(Debug, Clone)]
pub struct PairwiseTotals<F> {
    pub z: F,
    n: usize,
    data: Vec<F>,
}

impl<F: Real> PairwiseTotals<F> {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let m = self.n + 1;
        ((i * m + j) * m + k) * m + l
    }

    /// Total weight of trees containing both (i, j) and (k, l).
    pub fn total(&self, i: usize, j: usize, k: usize, l: usize) -> F {
        self.data[self.idx(i, j, k, l)]
    }
}

/// Visit every ordered pair of distinct legal edges with its raw
/// (unclamped) pairwise total.  This is the streaming form consumed by
/// [`second_total_hes`]; it needs only B, never the materialized
/// Hessian.
pub fn pairwise_totals_stream<F: Real>(
    g: &WeightedGraph<F>,
    mut visit: impl FnMut(usize, usize, usize, usize, F),
) -> Result<F> {
    let ctx = DerivCtx::new(g)?;
    for (i, j) in g.edges() {
        let wij = g.weight(i, j);
        if wij == F::zero() {
            continue;
        }
        for (k, l) in g.edges() {
            if (i, j) == (k, l) {
                continue;
            }
            let wkl = g.weight(k, l);
            if wkl == F::zero() {
                continue;
            }
            visit(i, j, k, l, ctx.d2z((i, j), (k, l)) * wij * wkl);
        }
    }
    Ok(ctx.z)
}

/// Materialized pairwise totals; O(N^4) output space, small-N oracle
/// form of the streaming computation.
pub fn pairwise_totals<F: Real>(g: &WeightedGraph<F>) -> Result<PairwiseTotals<F>> {
    let n = g.n();
    let m = n + 1;
    let mut out = PairwiseTotals {
        z: F::zero(),
        n,
        data: vec![F::zero(); m * m * m * m],
    };
    // Store the canonical orientation into both slots so symmetry is
    // exact rather than up to summation order.
    let z = pairwise_totals_stream(g, |i, j, k, l, raw| {
        if (i, j) < (k, l) {
            let a = out.idx(i, j, k, l);
            out.data[a] = raw;
            let b = out.idx(k, l, i, j);
            out.data[b] = raw;
        }
    })?;
    out.z = z;
    for v in out.data.iter_mut() {
        *v = clamp_total(*v, z, "pairwise total")?;
    }
    Ok(out)
}

/// Dense R x S result of a second-order total.
#[derive(Debug, Clone)]
pub struct SecondOrderResult<F> {
    pub r_dim: usize,
    pub s_dim: usize,
    data: Vec<F>,
}

impl<F: Real> SecondOrderResult<F> {
    fn zeros(r_dim: usize, s_dim: usize) -> Self {
        Self {
            r_dim,
            s_dim,
            data: vec![F::zero(); r_dim * s_dim],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> F {
        self.data[a * self.s_dim + b]
    }

    #[inline]
    fn add(&mut self, a: usize, b: usize, v: F) {
        self.data[a * self.s_dim + b] += v;
    }

    /// Accumulate c * (r outer s) for sparse coordinate lists.
    fn add_outer(&mut self, c: F, r: &[(usize, F)], s: &[(usize, F)]) {
        if c == F::zero() {
            return;
        }
        for &(a, ra) in r {
            let cra = c * ra;
            for &(b, sb) in s {
                self.add(a, b, cra * sb);
            }
        }
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().map(|x| x.abs()).fold(F::zero(), F::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        assert_eq!((self.r_dim, self.s_dim), (other.r_dim, other.s_dim));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), F::max)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }
}

/// First-order total r-bar = sum over edges of w-bar_ij r_ij.
pub fn first_total<F: Real>(g: &WeightedGraph<F>, r: &EdgeFunction<F>) -> Result<Vec<F>> {
    let ctx = DerivCtx::new(g)?;
    Ok(first_total_with(g, &ctx, r))
}

fn first_total_with<F: Real>(
    g: &WeightedGraph<F>,
    ctx: &DerivCtx<F>,
    r: &EdgeFunction<F>,
) -> Vec<F> {
    let mut acc = vec![F::zero(); r.dim()];
    for ((i, j), row) in r.iter() {
        let wbar = g.weight(i, j) * ctx.dz(i, j);
        if wbar == F::zero() {
            continue;
        }
        for &(c, v) in row {
            acc[c] += wbar * v;
        }
    }
    acc
}

/// Jacobian of the first-order total: entry (n, i, j) is
/// d r-bar_n / d w_ij, evaluated in closed form with one pair of N^3
/// matrix products per coordinate and never materializing the Hessian.
#[derive(Debug, Clone)]
pub struct TotalJacobian<F> {
    pub r_dim: usize,
    n: usize,
    data: Vec<F>,
}

impl<F: Real> TotalJacobian<F> {
    #[inline]
    pub fn get(&self, coord: usize, i: usize, j: usize) -> F {
        self.data[coord * (self.n + 1) * (self.n + 1) + i * (self.n + 1) + j]
    }
}

/// Closed-form d r-bar / d w, valid when r does not depend on w.
pub fn first_total_jacobian<F: Real>(
    g: &WeightedGraph<F>,
    r: &EdgeFunction<F>,
) -> Result<TotalJacobian<F>> {
    let ctx = DerivCtx::new(g)?;
    Ok(first_total_jacobian_with(g, &ctx, r))
}

fn first_total_jacobian_with<F: Real>(
    g: &WeightedGraph<F>,
    ctx: &DerivCtx<F>,
    r: &EdgeFunction<F>,
) -> TotalJacobian<F> {
    let n = g.n();
    let m = n + 1;
    let r_dim = r.dim();
    let mut data = vec![F::zero(); r_dim * m * m];

    // Per-coordinate edge lists of r.
    let mut per_coord: Vec<Vec<((usize, usize), F)>> = vec![Vec::new(); r_dim];
    for ((i, j), row) in r.iter() {
        for &(c, v) in row {
            per_coord[c].push(((i, j), v));
        }
    }

    for (coord, entries) in per_coord.iter().enumerate() {
        // Direct term: dZ/dw_ij * r_ij.
        for &((i, j), v) in entries {
            data[coord * m * m + i * m + j] = ctx.dz(i, j) * v;
        }
        if entries.is_empty() {
            continue;
        }
        // Hessian contraction against coordinate `coord` of r:
        // h_ij = sum_kl d2Z/dw_ij dw_kl * w_kl * r_kl.
        let mut c_mat = Matrix::<F>::zeros(n, n);
        let mut t = F::zero();
        for &((k, l), v) in entries {
            let w = g.weight(k, l);
            if w == F::zero() {
                continue;
            }
            let wv = w * v;
            for &(kp, lp, c) in ctx.gamma(k, l).entries() {
                let signed = if c > 0 { wv } else { -wv };
                c_mat[(kp - 1, lp - 1)] += signed;
                t += signed * ctx.b[(kp - 1, lp - 1)];
            }
        }
        // d_mat[i'][j'] = sum_{k',l'} B_{i'l'} C_{k'l'} B_{k'j'}.
        let d_mat = ctx.b.matmul(&c_mat.transpose().matmul(&ctx.b));
        for (i, j) in g.edges() {
            let mut h = F::zero();
            for &(ip, jp, c) in ctx.gamma(i, j).entries() {
                let term = ctx.b[(ip - 1, jp - 1)] * t - d_mat[(ip - 1, jp - 1)];
                if c > 0 {
                    h += term;
                } else {
                    h -= term;
                }
            }
            data[coord * m * m + i * m + j] += ctx.z * h;
        }
    }
    TotalJacobian { r_dim, n, data }
}

/// Second-order total via per-coordinate gradient-vector products.
/// Requires r independent of w.
pub fn second_total_vjp<F: Real>(
    g: &WeightedGraph<F>,
    r: &EdgeFunction<F>,
    s: &EdgeFunction<F>,
) -> Result<SecondOrderResult<F>> {
    let jac = first_total_jacobian(g, r)?;
    let mut out = SecondOrderResult::zeros(r.dim(), s.dim());
    for ((i, j), srow) in s.iter() {
        let w = g.weight(i, j);
        if w == F::zero() {
            continue;
        }
        for coord in 0..r.dim() {
            let scale = jac.get(coord, i, j) * w;
            if scale == F::zero() {
                continue;
            }
            for &(b, sv) in srow {
                out.add(coord, b, scale * sv);
            }
        }
    }
    Ok(out)
}

/// Second-order total by streaming the materialized-Hessian form:
/// t-bar = sum w-bar_ij r_ij s_ij^T + sum_{ij != kl} w-bar_ij,kl r_ij s_kl^T.
pub fn second_total_hes<F: Real>(
    g: &WeightedGraph<F>,
    r: &EdgeFunction<F>,
    s: &EdgeFunction<F>,
) -> Result<SecondOrderResult<F>> {
    let ctx = DerivCtx::new(g)?;
    let mut out = SecondOrderResult::zeros(r.dim(), s.dim());
    for ((i, j), rrow) in r.iter() {
        let wbar = g.weight(i, j) * ctx.dz(i, j);
        out.add_outer(wbar, rrow, s.row(i, j));
    }
    for ((i, j), rrow) in r.iter() {
        let wij = g.weight(i, j);
        if wij == F::zero() {
            continue;
        }
        for ((k, l), srow) in s.iter() {
            if (i, j) == (k, l) {
                continue;
            }
            let wkl = g.weight(k, l);
            if wkl == F::zero() {
                continue;
            }
            let pair = ctx.d2z((i, j), (k, l)) * wij * wkl;
            out.add_outer(pair, rrow, srow);
        }
    }
    Ok(out)
}

/// Sparse accumulators r-hat/s-hat, one coordinate map per (j', l')
/// cell of the refactored contraction.
struct HatTable<F> {
    n: usize,
    cells: Vec<HashMap<usize, F>>,
}

impl<F: Real> HatTable<F> {
    fn new(n: usize) -> Self {
        Self {
            n,
            cells: (0..n * n).map(|_| HashMap::new()).collect(),
        }
    }

    #[inline]
    fn cell_mut(&mut self, jp: usize, lp: usize) -> &mut HashMap<usize, F> {
        &mut self.cells[(jp - 1) * self.n + (lp - 1)]
    }

    #[inline]
    fn cell(&self, jp: usize, lp: usize) -> &HashMap<usize, F> {
        &self.cells[(jp - 1) * self.n + (lp - 1)]
    }
}

/// Unified second-order total: t-bar = f-bar + (1/Z) r-bar s-bar^T
/// - Z sum_{j'l'} r-hat_{j'l'} s-hat_{j'l'}^T, with the hat tables
/// accumulated by a triple loop over edges, their Laplacian cells, and
/// the free node index.
pub fn second_total<F: Real>(
    g: &WeightedGraph<F>,
    r: &EdgeFunction<F>,
    s: &EdgeFunction<F>,
) -> Result<SecondOrderResult<F>> {
    let ctx = DerivCtx::new(g)?;
    let n = g.n();

    let rbar = first_total_with(g, &ctx, r);
    let sbar = first_total_with(g, &ctx, s);

    let mut out = SecondOrderResult::zeros(r.dim(), s.dim());
    // f-bar: the diagonal (same-edge) first-order part.
    for ((i, j), rrow) in r.iter() {
        let wbar = g.weight(i, j) * ctx.dz(i, j);
        out.add_outer(wbar, rrow, s.row(i, j));
    }
    // (1/Z) r-bar s-bar^T.
    let inv_z = ctx.z.recip();
    for (a, &ra) in rbar.iter().enumerate() {
        if ra == F::zero() {
            continue;
        }
        for (b, &sb) in sbar.iter().enumerate() {
            out.add(a, b, inv_z * ra * sb);
        }
    }

    // r-hat_{j'l'} = sum_{(k,l) in E} sum_{(k',l') in Gamma(k,l)}
    //                 B_{k'j'} * coeff * w_kl * r_kl   for all free j'.
    let mut rhat = HatTable::new(n);
    for ((k, l), rrow) in r.iter() {
        let w = g.weight(k, l);
        if w == F::zero() {
            continue;
        }
        for &(kp, lp, c) in ctx.gamma(k, l).entries() {
            let base = if c > 0 { w } else { -w };
            for jp in 1..=n {
                let factor = ctx.b[(kp - 1, jp - 1)] * base;
                if factor == F::zero() {
                    continue;
                }
                let cell = rhat.cell_mut(jp, lp);
                for &(coord, v) in rrow {
                    *cell.entry(coord).or_insert_with(F::zero) += factor * v;
                }
            }
        }
    }
    // s-hat_{j'l'} = sum_{(i,j) in E} sum_{(i',j') in Gamma(i,j)}
    //                 B_{i'l'} * coeff * w_ij * s_ij   for all free l'.
    let mut shat = HatTable::new(n);
    for ((i, j), srow) in s.iter() {
        let w = g.weight(i, j);
        if w == F::zero() {
            continue;
        }
        for &(ip, jp, c) in ctx.gamma(i, j).entries() {
            let base = if c > 0 { w } else { -w };
            for lp in 1..=n {
                let factor = ctx.b[(ip - 1, lp - 1)] * base;
                if factor == F::zero() {
                    continue;
                }
                let cell = shat.cell_mut(jp, lp);
                for &(coord, v) in srow {
                    *cell.entry(coord).or_insert_with(F::zero) += factor * v;
                }
            }
        }
    }

    // - Z sum over cells of r-hat s-hat^T.
    let z = ctx.z;
    for jp in 1..=n {
        for lp in 1..=n {
            let rc = rhat.cell(jp, lp);
            if rc.is_empty() {
                continue;
            }
            let sc = shat.cell(jp, lp);
            if sc.is_empty() {
                continue;
            }
            for (&a, &ra) in rc {
                let zra = z * ra;
                for (&b, &sb) in sc {
                    out.add(a, b, -zra * sb);
                }
            }
        }
    }
    Ok(out)
}

/// Z and the dense gradient table dZ/dw_ij (structural zeros included).
pub fn z_gradient<F: Real>(g: &WeightedGraph<F>) -> Result<(F, Vec<Vec<F>>)> {
    let ctx = DerivCtx::new(g)?;
    let n = g.n();
    let mut grad = vec![vec![F::zero(); n + 1]; n + 1];
    for (i, j) in g.edges() {
        grad[i][j] = ctx.dz(i, j);
    }
    Ok((ctx.z, grad))
}
