//! Graph and tree data model plus the brute-force enumeration oracle.
//!
//! The root is node 0 and the non-root nodes are 1..=N.  Edge weights
//! live in a dense (N+1) x (N+1) table; the root column and the diagonal
//! are structurally zero.  Enumeration iterates all parent assignments
//! and filters cyclic ones, which is only feasible for N <= 8 but serves
//! as the independent oracle for every determinant-based computation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::{real, Real};

/// Whether the root may emit many outgoing edges or exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootConstraint {
    MultiRoot,
    SingleRoot,
}

/// Dense edge-weight table over a root plus `n` non-root nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph<F> {
    n: usize,
    weights: Vec<Vec<F>>,
    constraint: RootConstraint,
}

impl<F: Real> WeightedGraph<F> {
    /// All-zero graph over `n` non-root nodes.
    pub fn new(n: usize, constraint: RootConstraint) -> Self {
        assert!(n >= 1, "graph needs at least one non-root node");
        Self {
            n,
            weights: vec![vec![F::zero(); n + 1]; n + 1],
            constraint,
        }
    }

    /// Build from a full (n+1) x (n+1) table, validating structure.
    pub fn from_weights(weights: Vec<Vec<F>>, constraint: RootConstraint) -> Result<Self> {
        if weights.is_empty() || weights.len() < 2 {
            return Err(Error::Structural(
                "weight table must be at least 2 x 2".into(),
            ));
        }
        let n = weights.len() - 1;
        let g = Self {
            n,
            weights,
            constraint,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraint(&self) -> RootConstraint {
        self.constraint
    }

    pub fn weight(&self, i: usize, j: usize) -> F {
        self.weights[i][j]
    }

    pub fn weights(&self) -> &[Vec<F>] {
        &self.weights
    }

    /// Set w_ij.  Panics on structurally absent edges.
    pub fn set_weight(&mut self, i: usize, j: usize, w: F) {
        assert!(j != 0, "edges into the root are structurally absent");
        assert!(i != j, "self-loops are structurally absent");
        self.weights[i][j] = w;
    }

    /// Iterate the structurally legal edges (i, j): j non-root, i != j.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..=n).flat_map(move |i| (1..=n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// Check every structural invariant, naming the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.n + 1 {
            return Err(Error::Structural("weight table has wrong row count".into()));
        }
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != self.n + 1 {
                return Err(Error::Structural(format!(
                    "row {i} has wrong length {}",
                    row.len()
                )));
            }
            if row[0] != F::zero() {
                return Err(Error::Structural(format!(
                    "root column: weights[{i}][0] must be zero"
                )));
            }
            if row[i] != F::zero() {
                return Err(Error::Structural(format!(
                    "self-loop: weights[{i}][{i}] must be zero"
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if w < F::zero() || !w.is_finite() {
                    return Err(Error::Structural(format!(
                        "negative or non-finite weight at edge {i} -> {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply `f` to every legal edge weight, returning a new graph.
    pub fn map_weights(&self, mut f: impl FnMut(usize, usize, F) -> F) -> Self {
        let mut out = Self::new(self.n, self.constraint);
        for (i, j) in self.edges() {
            out.weights[i][j] = f(i, j, self.weights[i][j]);
        }
        out
    }
}

/// Edge-weight table with a label dimension: w_ijy.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWeightedGraph<F> {
    n: usize,
    labels: usize,
    weights: Vec<Vec<Vec<F>>>,
    constraint: RootConstraint,
}

impl<F: Real> LabeledWeightedGraph<F> {
    pub fn new(n: usize, labels: usize, constraint: RootConstraint) -> Self {
        assert!(n >= 1 && labels >= 1);
        Self {
            n,
            labels,
            weights: vec![vec![vec![F::zero(); labels]; n + 1]; n + 1],
            constraint,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn constraint(&self) -> RootConstraint {
        self.constraint
    }

    pub fn weight(&self, i: usize, j: usize, y: usize) -> F {
        self.weights[i][j][y]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, y: usize, w: F) {
        assert!(j != 0 && i != j);
        self.weights[i][j][y] = w;
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..=self.n {
            for j in 0..=self.n {
                for y in 0..self.labels {
                    let w = self.weights[i][j][y];
                    if (j == 0 || i == j) && w != F::zero() {
                        return Err(Error::Structural(format!(
                            "structural zero violated at labeled edge {i} -> {j} (label {y})"
                        )));
                    }
                    if w < F::zero() || !w.is_finite() {
                        return Err(Error::Structural(format!(
                            "negative or non-finite weight at labeled edge {i} -> {j} (label {y})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One arborescence: a parent assignment, one head per non-root node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    parents: Vec<usize>,
}

impl Tree {
    /// `parents[j - 1]` is the head of node j; head 0 is the root.
    pub fn new(parents: Vec<usize>) -> Self {
        Self { parents }
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, j: usize) -> usize {
        self.parents[j - 1]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    /// Edges of the tree as (head, modifier) pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().map(|(k, &p)| (p, k + 1))
    }

    /// Structural validity: heads in range, no self-loops, acyclic, and
    /// the root-constraint on outgoing root edges.
    pub fn is_valid(&self, n: usize, constraint: RootConstraint) -> bool {
        if self.parents.len() != n {
            return false;
        }
        for (j0, &p) in self.parents.iter().enumerate() {
            if p > n || p == j0 + 1 {
                return false;
            }
        }
        if constraint == RootConstraint::SingleRoot
            && self.parents.iter().filter(|&&p| p == 0).count() != 1
        {
            return false;
        }
        // Walk each parent chain; a chain that never reaches the root
        // re-enters itself.
        for start in 1..=n {
            let mut node = start;
            let mut steps = 0;
            while node != 0 {
                node = self.parents[node - 1];
                steps += 1;
                if steps > n {
                    return false;
                }
            }
        }
        true
    }
}

/// Upper bound on `n` for brute-force enumeration.
pub const ENUMERATION_LIMIT: usize = 8;

/// All trees of the graph, by filtering the N^N parent assignments.
///
/// Trees through zero-weight edges are still yielded; they simply carry
/// weight zero.
pub fn enumerate_trees<F: Real>(g: &WeightedGraph<F>) -> Result<Vec<Tree>> {
    let n = g.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::Size(n));
    }
    let mut out = Vec::new();
    let mut parents = vec![0usize; n];
    loop {
        let t = Tree::new(parents.clone());
        if t.is_valid(n, g.constraint()) {
            out.push(t);
        }
        // Odometer over head assignments in {0..=n}.
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(out);
            }
            parents[pos] += 1;
            if parents[pos] <= n {
                break;
            }
            parents[pos] = 0;
            pos += 1;
        }
    }
}

/// Product of the tree's edge weights.
pub fn tree_weight<F: Real>(g: &WeightedGraph<F>, t: &Tree) -> F {
    t.edges().map(|(i, j)| g.weight(i, j)).product()
}

/// Sum over enumerated trees of w(d) * f(d).  With f = 1 this is Z.
pub fn brute_total<F: Real>(
    g: &WeightedGraph<F>,
    dim: usize,
    mut f: impl FnMut(&Tree) -> Vec<F>,
) -> Result<Vec<F>> {
    let mut acc = vec![F::zero(); dim];
    for t in enumerate_trees(g)? {
        let w = tree_weight(g, &t);
        for (a, v) in acc.iter_mut().zip(f(&t)) {
            *a += w * v;
        }
    }
    Ok(acc)
}

/// Brute-force partition function.
pub fn brute_z<F: Real>(g: &WeightedGraph<F>) -> Result<F> {
    Ok(brute_total(g, 1, |_| vec![F::one()])?[0])
}

/// Sparse per-edge vector table: the additively decomposable payload
/// r mapping each edge to a vector in R^dim.  Absent edges are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction<F> {
    dim: usize,
    rows: BTreeMap<(usize, usize), Vec<(usize, F)>>,
}

impl<F: Real> EdgeFunction<F> {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Add `value` to coordinate `coord` of the vector at edge (i, j).
    pub fn add(&mut self, i: usize, j: usize, coord: usize, value: F) {
        assert!(j != 0 && i != j, "edge function keyed on an illegal edge");
        assert!(coord < self.dim);
        let row = self.rows.entry((i, j)).or_default();
        if let Some(slot) = row.iter_mut().find(|(c, _)| *c == coord) {
            slot.1 += value;
        } else {
            row.push((coord, value));
        }
    }

    /// Sparse coordinates of the vector at edge (i, j).
    pub fn row(&self, i: usize, j: usize) -> &[(usize, F)] {
        self.rows.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Iterate the keyed edges with their sparse rows.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &[(usize, F)])> {
        self.rows.iter().map(|(&e, v)| (e, v.as_slice()))
    }

    /// Maximum number of nonzeros in any row.
    pub fn max_density(&self) -> usize {
        self.rows.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Value of r(d) = sum of the rows along the tree's edges.
    pub fn tree_value(&self, t: &Tree) -> Vec<F> {
        let mut v = vec![F::zero(); self.dim];
        for (i, j) in t.edges() {
            for &(c, x) in self.row(i, j) {
                v[c] += x;
            }
        }
        v
    }

    /// Scalar function with the same value on every legal edge of `g`.
    pub fn constant_scalar(g: &WeightedGraph<F>, value: F) -> Self {
        let mut f = Self::new(1);
        for (i, j) in g.edges() {
            f.add(i, j, 0, value);
        }
        f
    }

    /// One-hot edge indicators scaled by 1/w_ij; rows at zero-weight
    /// edges are left zero.  Dimension is (n+1)^2 with edge (i, j) at
    /// coordinate i * (n+1) + j.
    pub fn one_hot_over_weight(g: &WeightedGraph<F>) -> Self {
        let n = g.n();
        let mut f = Self::new((n + 1) * (n + 1));
        for (i, j) in g.edges() {
            let w = g.weight(i, j);
            if w > F::zero() {
                f.add(i, j, i * (n + 1) + j, w.recip());
            }
        }
        f
    }
}

/// Relative closeness helper used throughout the test suites.
pub fn rel_close<F: Real>(a: F, b: F, tol: f64) -> bool {
    let tol = real::<F>(tol);
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs());
    if scale <= F::one() {
        diff <= tol
    } else {
        diff <= tol * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = WeightedGraph<f64>;

    fn all_ones(n: usize, c: RootConstraint) -> G {
        let mut g = G::new(n, c);
        for (i, j) in g.clone().edges() {
            g.set_weight(i, j, 1.0);
        }
        g
    }

    #[test]
    fn minimal_legal_graph_validates() {
        let mut g = G::new(1, RootConstraint::MultiRoot);
        g.set_weight(0, 1, 2.5);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn root_column_rejected() {
        let mut g = all_ones(2, RootConstraint::MultiRoot);
        g.weights[1][0] = 1.0;
        match g.validate() {
            Err(Error::Structural(msg)) => assert!(msg.contains("root column")),
            other => panic!("expected structural error, got {other:?}"),
        }
    }

    #[test]
    fn self_loop_rejected() {
        let mut g = all_ones(2, RootConstraint::MultiRoot);
        g.weights[1][1] = 1.0;
        match g.validate() {
            Err(Error::Structural(msg)) => assert!(msg.contains("self-loop")),
            other => panic!("expected structural error, got {other:?}"),
        }
    }

    #[test]
    fn negative_weight_rejected() {
        let mut g = all_ones(2, RootConstraint::MultiRoot);
        g.weights[1][2] = -0.5;
        assert!(matches!(g.validate(), Err(Error::Structural(_))));
    }

    #[test]
    fn enumerate_n2_multi_root() {
        let g = all_ones(2, RootConstraint::MultiRoot);
        let trees = enumerate_trees(&g).unwrap();
        let mut sets: Vec<Vec<usize>> = trees.iter().map(|t| t.parents().to_vec()).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 0], vec![0, 1], vec![2, 0]]);
    }

    #[test]
    fn enumerate_n2_single_root() {
        let g = all_ones(2, RootConstraint::SingleRoot);
        let trees = enumerate_trees(&g).unwrap();
        let mut sets: Vec<Vec<usize>> = trees.iter().map(|t| t.parents().to_vec()).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 1], vec![2, 0]]);
    }

    #[test]
    fn enumerate_n3_count() {
        let g = all_ones(3, RootConstraint::MultiRoot);
        assert_eq!(enumerate_trees(&g).unwrap().len(), 16);
    }

    #[test]
    fn cayley_counts_small() {
        // (N+1)^(N-1) multi-root, N^(N-1) single-root.
        for n in 1..=5usize {
            let multi = enumerate_trees(&all_ones(n, RootConstraint::MultiRoot))
                .unwrap()
                .len();
            let single = enumerate_trees(&all_ones(n, RootConstraint::SingleRoot))
                .unwrap()
                .len();
            assert_eq!(multi, (n + 1).pow(n as u32 - 1));
            assert_eq!(single, n.pow(n as u32 - 1));
        }
    }

    #[test]
    fn enumeration_bound() {
        let g = all_ones(3, RootConstraint::MultiRoot);
        assert!(enumerate_trees(&g).is_ok());
        let big = G::new(9, RootConstraint::MultiRoot);
        assert!(matches!(enumerate_trees(&big), Err(Error::Size(9))));
    }

    #[test]
    fn tree_weights() {
        let g = all_ones(2, RootConstraint::MultiRoot);
        let t = Tree::new(vec![0, 1]);
        assert_eq!(tree_weight(&g, &t), 1.0);

        let mut g = G::new(2, RootConstraint::MultiRoot);
        g.set_weight(0, 1, 2.0);
        g.set_weight(1, 2, 3.0);
        assert_eq!(tree_weight(&g, &Tree::new(vec![0, 1])), 6.0);
        // Tree through a zero-weight edge annihilates.
        assert_eq!(tree_weight(&g, &Tree::new(vec![0, 0])), 0.0);
    }

    #[test]
    fn brute_totals() {
        let g = all_ones(2, RootConstraint::MultiRoot);
        assert_eq!(brute_z(&g).unwrap(), 3.0);
        // Every tree has N edges.
        let e = brute_total(&g, 1, |t| vec![t.edges().count() as f64]).unwrap()[0];
        assert_eq!(e, 6.0);
        // Uniform entropy: E[-log p] = log 3.
        let z = 3.0f64;
        let h = brute_total(&g, 1, |t| {
            vec![-((tree_weight(&g, t) / z).ln())]
        })
        .unwrap()[0]
            / z;
        assert!((h - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn edge_function_rows() {
        let mut r = EdgeFunction::<f64>::new(3);
        r.add(0, 1, 2, 1.5);
        r.add(0, 1, 2, 0.5);
        r.add(1, 2, 0, -1.0);
        assert_eq!(r.row(0, 1), &[(2, 2.0)]);
        assert_eq!(r.max_density(), 1);
        let t = Tree::new(vec![0, 1]);
        assert_eq!(r.tree_value(&t), vec![-1.0, 0.0, 2.0]);
    }
}
