//! Laplacian constructions, the partition function, and the sparsity
//! structure of dL/dw.
//!
//! The multi-root Laplacian puts column sums on the diagonal and -w_ij
//! off the diagonal.  The single-root variant replaces row 1 with the
//! root edge weights and excludes the root from the column sums.  Either
//! way Z is the determinant, and each edge weight touches at most two
//! Laplacian cells with coefficient +-1.

use crate::error::{Error, Result};
use crate::graph::{LabeledWeightedGraph, RootConstraint, WeightedGraph};
use crate::linalg::{self, Matrix};
use crate::Real;

/// Row (1-based node index) holding the root edge weights under
/// SingleRoot.  Fixed by convention.
pub const REPLACED_ROW: usize = 1;

/// N x N Laplacian over the non-root nodes; cell (i, j) of the matrix
/// corresponds to nodes (i + 1, j + 1).
#[derive(Debug, Clone)]
pub struct Laplacian<F> {
    pub matrix: Matrix<F>,
    pub constraint: RootConstraint,
    /// Node index of the replaced row (SingleRoot only).
    pub replaced_row: usize,
}

/// The Laplacian cells a single edge weight touches: at most two
/// (row, col, coefficient) triples, node-indexed 1..=N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GammaEntry {
    len: u8,
    cells: [(usize, usize, i8); 2],
}

impl Default for GammaEntry {
    fn default() -> Self {
        Self::new()
    }
}

impl GammaEntry {
    fn new() -> Self {
        Self {
            len: 0,
            cells: [(0, 0, 0); 2],
        }
    }

    fn push(&mut self, row: usize, col: usize, coeff: i8) {
        self.cells[self.len as usize] = (row, col, coeff);
        self.len += 1;
    }

    pub fn entries(&self) -> &[(usize, usize, i8)] {
        &self.cells[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Build the Laplacian from a raw weight table.  Kept separate from the
/// graph wrapper so callers may feed transformed (possibly negative)
/// weights, e.g. the N^4 entropy baseline.
pub fn laplacian_from_table<F: Real>(
    table: &[Vec<F>],
    constraint: RootConstraint,
) -> Laplacian<F> {
    let n = table.len() - 1;
    let mut m = Matrix::zeros(n, n);
    for j in 1..=n {
        for i in 1..=n {
            if i == j {
                let mut sum = F::zero();
                for ip in 0..=n {
                    if ip == j {
                        continue;
                    }
                    if constraint == RootConstraint::SingleRoot && ip == 0 {
                        continue;
                    }
                    sum += table[ip][j];
                }
                m[(i - 1, j - 1)] = sum;
            } else {
                m[(i - 1, j - 1)] = -table[i][j];
            }
        }
    }
    if constraint == RootConstraint::SingleRoot {
        for j in 1..=n {
            m[(REPLACED_ROW - 1, j - 1)] = table[0][j];
        }
    }
    Laplacian {
        matrix: m,
        constraint,
        replaced_row: REPLACED_ROW,
    }
}

/// Constraint-appropriate Laplacian of the graph.
pub fn build_laplacian<F: Real>(g: &WeightedGraph<F>) -> Laplacian<F> {
    laplacian_from_table(g.weights(), g.constraint())
}

/// Partition function Z as the Laplacian determinant.  Z = 0 is a legal
/// return (no supported trees).
pub fn partition_function<F: Real>(g: &WeightedGraph<F>) -> F {
    determinant_of(&build_laplacian(g))
}

fn determinant_of<F: Real>(lap: &Laplacian<F>) -> F {
    linalg::determinant(&lap.matrix).expect("laplacian is square by construction")
}

/// Sign and log-magnitude of Z, for scales where Z itself would
/// overflow.
pub fn sign_log_partition_function<F: Real>(g: &WeightedGraph<F>) -> (i8, F) {
    linalg::sign_log_determinant(&build_laplacian(g).matrix)
        .expect("laplacian is square by construction")
}

/// Collapse a labeled multi-graph to the unlabeled graph with
/// w_ij = sum_y w_ijy; the collapsed Z equals the labeled normalizer.
pub fn collapse_labels<F: Real>(g: &LabeledWeightedGraph<F>) -> WeightedGraph<F> {
    let n = g.n();
    let mut out = WeightedGraph::new(n, g.constraint());
    for i in 0..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            let mut sum = F::zero();
            for y in 0..g.labels() {
                sum += g.weight(i, j, y);
            }
            out.set_weight(i, j, sum);
        }
    }
    out
}

/// Laplacian cells affected by w_ij with their +-1 coefficients.
///
/// MultiRoot: the diagonal cell (j, j) gets +1 for any head, and the
/// off-diagonal (i, j) gets -1 for non-root heads.  SingleRoot: root
/// edges touch only (REPLACED_ROW, j); entries that would fall on the
/// replaced row or column-sum diagonal of the replaced row are dropped.
pub fn gamma<F: Real>(g: &WeightedGraph<F>, i: usize, j: usize) -> GammaEntry {
    debug_assert!(j != 0 && i != j && j <= g.n() && i <= g.n());
    let mut entry = GammaEntry::new();
    match g.constraint() {
        RootConstraint::MultiRoot => {
            entry.push(j, j, 1);
            if i != 0 {
                entry.push(i, j, -1);
            }
        }
        RootConstraint::SingleRoot => {
            if i == 0 {
                entry.push(REPLACED_ROW, j, 1);
            } else {
                if j != REPLACED_ROW {
                    entry.push(j, j, 1);
                }
                if i != REPLACED_ROW {
                    entry.push(i, j, -1);
                }
            }
        }
    }
    entry
}

/// B = transpose of the Laplacian inverse; indexed by non-root nodes.
pub fn b_matrix<F: Real>(g: &WeightedGraph<F>) -> Result<Matrix<F>> {
    let lap = build_laplacian(g);
    let inv = linalg::inverse(&lap.matrix).map_err(|e| match e {
        Error::Singular => Error::Singular,
        other => other,
    })?;
    Ok(inv.transpose())
}

/// Per-label edge marginals of a labeled graph, by chain rule through
/// the label collapse: p(i -> j, y) = (w_ijy / w_ij) * p(i -> j), with
/// 0/0 = 0.  Entry [i][j][y].
pub fn labeled_edge_marginals<F: Real>(
    g: &LabeledWeightedGraph<F>,
) -> Result<Vec<Vec<Vec<F>>>> {
    let n = g.n();
    let collapsed = collapse_labels(g);
    let totals = crate::expectations::edge_totals(&collapsed)?;
    let z = totals.z;
    let mut out = vec![vec![vec![F::zero(); g.labels()]; n + 1]; n + 1];
    for i in 0..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            let w = collapsed.weight(i, j);
            if w == F::zero() {
                continue;
            }
            let marginal = totals.total(i, j) / z;
            for y in 0..g.labels() {
                out[i][j][y] = g.weight(i, j, y) / w * marginal;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{brute_z, enumerate_trees, rel_close, tree_weight, Tree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type G = WeightedGraph<f64>;

    fn all_ones(n: usize, c: RootConstraint) -> G {
        let mut g = G::new(n, c);
        for (i, j) in g.clone().edges() {
            g.set_weight(i, j, 1.0);
        }
        g
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, c: RootConstraint) -> G {
        let mut g = G::new(n, c);
        for (i, j) in g.clone().edges() {
            g.set_weight(i, j, rng.gen_range(0.1..1.0));
        }
        g
    }

    #[test]
    fn laplacian_multi_root_by_hand() {
        let lap = build_laplacian(&all_ones(2, RootConstraint::MultiRoot));
        assert_eq!(lap.matrix[(0, 0)], 2.0);
        assert_eq!(lap.matrix[(0, 1)], -1.0);
        assert_eq!(lap.matrix[(1, 0)], -1.0);
        assert_eq!(lap.matrix[(1, 1)], 2.0);
    }

    #[test]
    fn laplacian_single_root_by_hand() {
        let lap = build_laplacian(&all_ones(2, RootConstraint::SingleRoot));
        // Row 1 holds root weights; row 2 column sums exclude the root.
        assert_eq!(lap.matrix[(0, 0)], 1.0);
        assert_eq!(lap.matrix[(0, 1)], 1.0);
        assert_eq!(lap.matrix[(1, 0)], -1.0);
        assert_eq!(lap.matrix[(1, 1)], 1.0);
    }

    #[test]
    fn laplacian_n1() {
        for c in [RootConstraint::MultiRoot, RootConstraint::SingleRoot] {
            let mut g = G::new(1, c);
            g.set_weight(0, 1, 2.5);
            let lap = build_laplacian(&g);
            assert_eq!(lap.matrix[(0, 0)], 2.5);
            assert_eq!(partition_function(&g), 2.5);
        }
    }

    #[test]
    fn z_all_ones() {
        assert_eq!(partition_function(&all_ones(2, RootConstraint::MultiRoot)), 3.0);
        assert_eq!(partition_function(&all_ones(2, RootConstraint::SingleRoot)), 2.0);
    }

    #[test]
    fn z_matches_cayley_counts() {
        for n in 1..=6usize {
            let zm = partition_function(&all_ones(n, RootConstraint::MultiRoot));
            let zs = partition_function(&all_ones(n, RootConstraint::SingleRoot));
            assert!(rel_close(zm, ((n + 1).pow(n as u32 - 1)) as f64, 1e-10));
            assert!(rel_close(zs, (n.pow(n as u32 - 1)) as f64, 1e-10));
        }
    }

    #[test]
    fn z_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=5usize {
            for c in [RootConstraint::MultiRoot, RootConstraint::SingleRoot] {
                let g = random_graph(&mut rng, n, c);
                assert!(rel_close(partition_function(&g), brute_z(&g).unwrap(), 1e-10));
            }
        }
    }

    #[test]
    fn z_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_graph(&mut rng, 4, RootConstraint::MultiRoot);
        let c = 2.5f64;
        let scaled = g.map_weights(|_, _, w| c * w);
        let expected = partition_function(&g) * c.powi(4);
        assert!(rel_close(partition_function(&scaled), expected, 1e-10));
    }

    #[test]
    fn sign_log_z_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_graph(&mut rng, 5, RootConstraint::SingleRoot);
        let z = partition_function(&g);
        let (s, l) = sign_log_partition_function(&g);
        assert_eq!(s, 1);
        assert!(rel_close(z, l.exp(), 1e-10));
    }

    #[test]
    fn collapse_labels_all_ones() {
        let mut lg = LabeledWeightedGraph::<f64>::new(2, 2, RootConstraint::MultiRoot);
        for (i, j) in [(0, 1), (0, 2), (1, 2), (2, 1)] {
            for y in 0..2 {
                lg.set_weight(i, j, y, 1.0);
            }
        }
        let g = collapse_labels(&lg);
        for (i, j) in [(0, 1), (0, 2), (1, 2), (2, 1)] {
            assert_eq!(g.weight(i, j), 2.0);
        }
    }

    #[test]
    fn collapse_labels_n1() {
        let mut lg = LabeledWeightedGraph::<f64>::new(1, 2, RootConstraint::MultiRoot);
        lg.set_weight(0, 1, 0, 1.0);
        lg.set_weight(0, 1, 1, 1.0);
        assert_eq!(partition_function(&collapse_labels(&lg)), 2.0);
    }

    /// Labeled brute force: sum over (tree, label assignment) pairs.
    fn labeled_brute_z(lg: &LabeledWeightedGraph<f64>) -> f64 {
        // Enumerate structural trees on an all-ones stand-in.
        let mut shape = G::new(lg.n(), lg.constraint());
        for (i, j) in shape.clone().edges() {
            shape.set_weight(i, j, 1.0);
        }
        let mut z = 0.0;
        for t in enumerate_trees(&shape).unwrap() {
            let edges: Vec<_> = t.edges().collect();
            let mut assignment = vec![0usize; edges.len()];
            'assignments: loop {
                let mut w = 1.0;
                for (k, &(i, j)) in edges.iter().enumerate() {
                    w *= lg.weight(i, j, assignment[k]);
                }
                z += w;
                let mut pos = 0;
                loop {
                    if pos == assignment.len() {
                        break 'assignments;
                    }
                    assignment[pos] += 1;
                    if assignment[pos] < lg.labels() {
                        break;
                    }
                    assignment[pos] = 0;
                    pos += 1;
                }
            }
        }
        z
    }

    #[test]
    fn collapsed_z_matches_labeled_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for c in [RootConstraint::MultiRoot, RootConstraint::SingleRoot] {
            let mut lg = LabeledWeightedGraph::<f64>::new(3, 3, c);
            for i in 0..=3usize {
                for j in 1..=3usize {
                    if i == j {
                        continue;
                    }
                    for y in 0..3 {
                        lg.set_weight(i, j, y, rng.gen_range(0.1..1.0));
                    }
                }
            }
            let z = partition_function(&collapse_labels(&lg));
            assert!(rel_close(z, labeled_brute_z(&lg), 1e-10));
        }
    }

    #[test]
    fn gamma_shapes() {
        let gm = all_ones(3, RootConstraint::MultiRoot);
        assert_eq!(gamma(&gm, 0, 2).entries(), &[(2, 2, 1)]);
        assert_eq!(gamma(&gm, 1, 2).entries(), &[(2, 2, 1), (1, 2, -1)]);

        let gs = all_ones(3, RootConstraint::SingleRoot);
        assert_eq!(gamma(&gs, 0, 2).entries(), &[(1, 2, 1)]);
        assert_eq!(gamma(&gs, 3, 2).entries(), &[(2, 2, 1), (3, 2, -1)]);
        // Entries falling on the replaced row are dropped.
        assert_eq!(gamma(&gs, 1, 2).entries(), &[(2, 2, 1)]);
        assert_eq!(gamma(&gs, 3, 1).entries(), &[(3, 1, -1)]);
        for (i, j) in gs.edges() {
            assert!(gamma(&gs, i, j).len() <= 2);
        }
    }

    #[test]
    fn b_matrix_values() {
        let mut g1 = G::new(1, RootConstraint::MultiRoot);
        g1.set_weight(0, 1, 2.5);
        assert!((b_matrix(&g1).unwrap()[(0, 0)] - 0.4).abs() < 1e-15);

        let b = b_matrix(&all_ones(2, RootConstraint::MultiRoot)).unwrap();
        for (cell, expect) in [((0, 0), 2.0 / 3.0), ((0, 1), 1.0 / 3.0)] {
            assert!((b[cell] - expect).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let g = random_graph(&mut rng, 5, RootConstraint::SingleRoot);
        let lap = build_laplacian(&g);
        let prod = lap.matrix.transpose().matmul(&b_matrix(&g).unwrap());
        assert!(prod.max_abs_diff(&Matrix::identity(5)) < 1e-8);
    }

    #[test]
    fn b_matrix_singular() {
        // Node 2 unreachable: Z = 0.
        let mut g = G::new(2, RootConstraint::MultiRoot);
        g.set_weight(0, 1, 1.0);
        assert_eq!(partition_function(&g), 0.0);
        assert!(matches!(b_matrix(&g), Err(Error::Singular)));
    }

    #[test]
    fn labeled_marginals_sum_to_unlabeled() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut lg = LabeledWeightedGraph::<f64>::new(3, 2, RootConstraint::MultiRoot);
        for i in 0..=3usize {
            for j in 1..=3usize {
                if i == j {
                    continue;
                }
                for y in 0..2 {
                    lg.set_weight(i, j, y, rng.gen_range(0.1..1.0));
                }
            }
        }
        let collapsed = collapse_labels(&lg);
        let totals = crate::expectations::edge_totals(&collapsed).unwrap();
        let per_label = labeled_edge_marginals(&lg).unwrap();
        for (i, j) in collapsed.edges() {
            let sum: f64 = per_label[i][j].iter().sum();
            assert!(rel_close(sum, totals.total(i, j) / totals.z, 1e-10));
        }
    }

    #[test]
    fn zero_weight_trees_still_counted_structurally() {
        // Structural tree through a zero edge contributes zero weight,
        // Z still matches enumeration.
        let mut g = all_ones(3, RootConstraint::MultiRoot);
        g.set_weight(1, 2, 0.0);
        let z: f64 = enumerate_trees(&g)
            .unwrap()
            .iter()
            .map(|t| tree_weight(&g, t))
            .sum();
        assert!(rel_close(partition_function(&g), z, 1e-12));
        // And the all-parents-root tree is present.
        assert!(enumerate_trees(&g)
            .unwrap()
            .contains(&Tree::new(vec![0, 0, 0])));
    }
}
