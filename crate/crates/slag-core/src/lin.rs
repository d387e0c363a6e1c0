//! Small real linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub fn det(a: &RMat) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().lu().determinant()
}

pub fn inverse(a: &RMat) -> Option<RMat> {
    a.clone().try_inverse()
}

pub fn sym(a: &RMat) -> RMat {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(a: &RMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = sym(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_sym_eigenvalue(a: &RMat) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_abs(a: &RMat) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn asym_residual(a: &RMat) -> f64 {
    max_abs(&(a - a.transpose()))
}

/// Elementary symmetric functions `σ_0..σ_n` of a list of values.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; values.len() + 1];
    s[0] = 1.0;
    for (k, &x) in values.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            s[j] += x * s[j - 1];
        }
    }
    s
}

/// Cofactor matrix, entry `(i, j)` is `(−1)^{i+j}` times the `(i, j)` minor.
pub fn cofactor(a: &RMat) -> RMat {
    let n = a.nrows();
    if n == 1 {
        return RMat::from_element(1, 1, 1.0);
    }
    RMat::from_fn(n, n, |i, j| {
        let m = a.clone().remove_row(i).remove_column(j);
        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * det(&m)
    })
}

pub fn from_rows(rows: &[Vec<f64>]) -> RMat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    RMat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(a: &RMat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_symmetric_small() {
        let s = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(s, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn cofactor_identity() {
        let a = from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![-1.0, 3.0, 2.0],
            vec![0.5, 0.0, 1.0],
        ]);
        let prod = &a * cofactor(&a).transpose();
        let d = det(&a);
        assert!((prod - RMat::identity(3, 3) * d).amax() < 1e-12);
    }
}
