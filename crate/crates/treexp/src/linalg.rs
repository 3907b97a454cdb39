//! Dense linear algebra sized for N x N Laplacians: LU with partial
//! pivoting, determinants, signed log-determinants, and inverses.

use crate::error::{Error, Result};
use crate::{real, Real};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        assert!(rows.iter().all(|row| row.len() == c));
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), F::max)
    }
}

impl<F> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factorization with its row permutation.
#[derive(Debug, Clone)]
pub struct LUFactors<F> {
    /// Unit-lower factors below the diagonal, U on and above it.
    pub lu: Matrix<F>,
    /// `piv[k]` is the row swapped into position k at step k.
    pub piv: Vec<usize>,
    /// Permutation parity: +1 or -1.
    pub sign: i8,
    /// Set when some pivot is exactly zero.
    pub singular: bool,
}

impl<F: Real> LUFactors<F> {
    /// Rebuild P * A as L * U (test support).
    pub fn reconstruct(&self) -> Matrix<F> {
        let n = self.lu.rows();
        let mut l = Matrix::identity(n);
        let mut u = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i > j {
                    l[(i, j)] = self.lu[(i, j)];
                } else {
                    u[(i, j)] = self.lu[(i, j)];
                }
            }
        }
        l.matmul(&u)
    }

    /// Apply the recorded row swaps to a matrix (P * A).
    pub fn permute(&self, a: &Matrix<F>) -> Matrix<F> {
        let mut m = a.clone();
        let n = m.rows();
        for k in 0..n {
            if self.piv[k] != k {
                for j in 0..m.cols() {
                    let tmp = m[(k, j)];
                    m[(k, j)] = m[(self.piv[k], j)];
                    m[(self.piv[k], j)] = tmp;
                }
            }
        }
        m
    }

    /// Solve L U x = P b in place.
    fn solve(&self, b: &mut [F]) {
        let n = self.lu.rows();
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 1..n {
            for k in 0..i {
                let f = self.lu[(i, k)] * b[k];
                b[i] = b[i] - f;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let f = self.lu[(i, k)] * b[k];
                b[i] = b[i] - f;
            }
            b[i] = b[i] / self.lu[(i, i)];
        }
    }
}

/// LU factorization with partial pivoting.  Singular matrices are not an
/// error; a zero pivot is flagged in the result.
pub fn lu_factor<F: Real>(m: &Matrix<F>) -> Result<LUFactors<F>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "lu_factor needs a square matrix, got {} x {}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut lu = m.clone();
    let mut piv = vec![0usize; n];
    let mut sign = 1i8;
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        if pivot == F::zero() {
            singular = true;
            continue;
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in k + 1..n {
                let sub = f * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
        }
    }
    Ok(LUFactors {
        lu,
        piv,
        sign,
        singular,
    })
}

/// Determinant via LU: sign times the pivot product.
pub fn determinant<F: Real>(m: &Matrix<F>) -> Result<F> {
    let f = lu_factor(m)?;
    let n = f.lu.rows();
    let mut det = if f.sign > 0 { F::one() } else { -F::one() };
    for k in 0..n {
        det *= f.lu[(k, k)];
    }
    Ok(det)
}

/// Sign (-1, 0, +1) and log-magnitude of the determinant.  Singular
/// matrices yield (0, -inf).
pub fn sign_log_determinant<F: Real>(m: &Matrix<F>) -> Result<(i8, F)> {
    let f = lu_factor(m)?;
    if f.singular {
        return Ok((0, F::neg_infinity()));
    }
    let n = f.lu.rows();
    let mut sign = f.sign;
    let mut logmag = F::zero();
    for k in 0..n {
        let d = f.lu[(k, k)];
        if d < F::zero() {
            sign = -sign;
        }
        logmag += d.abs().ln();
    }
    Ok((sign, logmag))
}

/// Pivot magnitude below which `inverse` treats the matrix as singular.
pub fn singular_pivot_threshold<F: Real>() -> F {
    real::<F>(1e-300).max(F::zero())
}

/// Matrix inverse via LU, solving one unit column at a time.
pub fn inverse<F: Real>(m: &Matrix<F>) -> Result<Matrix<F>> {
    let f = lu_factor(m)?;
    let n = f.lu.rows();
    let thr = singular_pivot_threshold::<F>();
    for k in 0..n {
        if f.lu[(k, k)].abs() <= thr {
            return Err(Error::Singular);
        }
    }
    let mut inv = Matrix::zeros(n, n);
    let mut col = vec![F::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|x| *x = F::zero());
        col[j] = F::one();
        f.solve(&mut col);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::rel_close;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        m
    }

    #[test]
    fn identity_factors() {
        let f = lu_factor(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(f.sign, 1);
        assert!(!f.singular);
        for k in 0..3 {
            assert_eq!(f.lu[(k, k)], 1.0);
        }
    }

    #[test]
    fn permutation_swaps_sign() {
        let m = Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = lu_factor(&m).unwrap();
        assert_eq!(f.sign, -1);
        assert_eq!(determinant(&m).unwrap(), -1.0);
    }

    #[test]
    fn non_square_rejected() {
        let m = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(lu_factor(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 5);
            let f = lu_factor(&m).unwrap();
            let pa = f.permute(&m);
            assert!(pa.max_abs_diff(&f.reconstruct()) < 1e-10);
        }
    }

    #[test]
    fn determinant_values() {
        assert_eq!(determinant(&Matrix::<f64>::identity(4)).unwrap(), 1.0);
        let m = Matrix::<f64>::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!((determinant(&m).unwrap() + 2.0).abs() < 1e-14);
        let s = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(determinant(&s).unwrap(), 0.0);
    }

    #[test]
    fn sign_log_det_values() {
        let (s, l) = sign_log_determinant(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!((s, l), (1, 0.0));

        let mut m = Matrix::<f64>::zeros(10, 10);
        for i in 0..10 {
            m[(i, i)] = 2.0;
        }
        let (s, l) = sign_log_determinant(&m).unwrap();
        assert_eq!(s, 1);
        assert!((l - 10.0 * 2.0f64.ln()).abs() < 1e-12);

        let sing = Matrix::<f64>::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let (s, l) = sign_log_determinant(&sing).unwrap();
        assert_eq!(s, 0);
        assert!(l.is_infinite() && l < 0.0);
    }

    #[test]
    fn sign_log_det_consistent_with_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 6);
            let det = determinant(&m).unwrap();
            let (s, l) = sign_log_determinant(&m).unwrap();
            assert!(rel_close(det, s as f64 * l.exp(), 1e-10));
        }
    }

    #[test]
    fn inverse_values() {
        let m = Matrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 4.0]]);
        let inv = inverse(&m).unwrap();
        assert_eq!(inv[(0, 0)], 0.5);
        assert_eq!(inv[(1, 1)], 0.25);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 6);
            if determinant(&m).unwrap().abs() < 1e-3 {
                continue;
            }
            let prod = m.matmul(&inverse(&m).unwrap());
            assert!(prod.max_abs_diff(&Matrix::identity(6)) < 1e-8);
            // Double inverse round-trips.
            let back = inverse(&inverse(&m).unwrap()).unwrap();
            assert!(back.max_abs_diff(&m) < 1e-6);
        }
    }

    #[test]
    fn singular_inverse_rejected() {
        let s = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(inverse(&s), Err(Error::Singular)));
    }

    #[test]
    fn permuted_determinant_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 5;
            let m = random_matrix(&mut rng, n);
            // Random transposition as a permutation matrix.
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let mut p = Matrix::<f64>::identity(n);
            if a != b {
                p[(a, a)] = 0.0;
                p[(b, b)] = 0.0;
                p[(a, b)] = 1.0;
                p[(b, a)] = 1.0;
            }
            let expected = determinant(&m).unwrap() * if a != b { -1.0 } else { 1.0 };
            assert!(rel_close(determinant(&p.matmul(&m)).unwrap(), expected, 1e-10));
        }
    }
}
