//! Dense subspace helpers shared by the Lie-algebra and lattice code.
//!
//! Every rank decision in the crate goes through [`zero_threshold`]: a
//! singular value counts as zero when it is at most `1e-9 * max(s_max, 1)`.

use nalgebra::{DMatrix, DVector, SVD};

/// Relative factor applied to the largest singular value (floored at 1).
pub const SVD_RELATIVE_THRESHOLD: f64 = 1e-9;

/// Cut-off below which a singular value is treated as zero.
pub fn zero_threshold(max_singular_value: f64) -> f64 {
    SVD_RELATIVE_THRESHOLD * max_singular_value.max(1.0)
}

/// Singular values and right/left factors with the crate-wide threshold applied.
struct Decomposition {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    threshold: f64,
}

impl Decomposition {
    fn new(m: &DMatrix<f64>) -> Self {
        let svd = SVD::new(m.clone(), true, true);
        let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        Decomposition {
            svd,
            threshold: zero_threshold(max),
        }
    }

    fn is_nonzero(&self, k: usize) -> bool {
        self.svd.singular_values[k] > self.threshold
    }

    fn rank(&self) -> usize {
        (0..self.svd.singular_values.len())
            .filter(|&k| self.is_nonzero(k))
            .count()
    }
}

/// Numerical rank.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    Decomposition::new(m).rank()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let d = Decomposition::new(m);
    let u = d.svd.u.as_ref().expect("left vectors requested");
    let keep: Vec<usize> = (0..d.svd.singular_values.len())
        .filter(|&k| d.is_nonzero(k))
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Orthonormal basis (as columns) of the row space of `m`.
pub fn row_space_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), 0);
    }
    let d = Decomposition::new(m);
    let vt = d.svd.v_t.as_ref().expect("right vectors requested");
    let keep: Vec<usize> = (0..d.svd.singular_values.len())
        .filter(|&k| d.is_nonzero(k))
        .collect();
    DMatrix::from_fn(m.ncols(), keep.len(), |i, j| vt[(keep[j], i)])
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    if m.nrows() >= n {
        // Thin SVD already carries a complete set of right vectors.
        let d = Decomposition::new(m);
        let vt = d.svd.v_t.as_ref().expect("right vectors requested");
        let keep: Vec<usize> = (0..n).filter(|&k| !d.is_nonzero(k)).collect();
        return DMatrix::from_fn(n, keep.len(), |i, j| vt[(keep[j], i)]);
    }
    orthonormal_complement(&row_space_basis(m))
}

/// Completes an orthonormal column set `basis` (n x r) and returns the
/// remaining n - r columns.
pub fn orthonormal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let r = basis.ncols();
    if r == 0 {
        return DMatrix::identity(n, n);
    }
    let mut stacked = DMatrix::zeros(n, r + n);
    stacked.columns_mut(0, r).copy_from(basis);
    stacked.columns_mut(r, n).fill_with_identity();
    let q = stacked.qr().q();
    q.columns(r, n - r).into_owned()
}

/// Modified Gram-Schmidt step: orthogonalises `v` against `basis` twice and
/// returns the residual.
pub fn orthogonalize(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
    }
    r
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_rank_deficient_matrix() {
        // Rows span {e0 + e1, e2}; kernel is spanned by e0 - e1 and e3.
        let m = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0],
        );
        assert_eq!(rank(&m), 2);
        let k = nullspace(&m);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&m * &k)) < 1e-12);
        assert!(max_abs(&(k.transpose() * &k - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn nullspace_of_tall_matrix() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0, -1.0, -2.0]);
        let k = nullspace(&m);
        assert_eq!(k.ncols(), 1);
        assert!(max_abs(&(&m * &k)) < 1e-12);
    }

    #[test]
    fn threshold_is_floored_at_one() {
        let m = DMatrix::from_element(2, 2, 1e-12);
        assert_eq!(rank(&m), 0);
        assert_eq!(nullspace(&m).ncols(), 2);
    }

    #[test]
    fn complement_completes_basis() {
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = orthonormal_complement(&b);
        assert_eq!(c.ncols(), 2);
        assert!(max_abs(&(b.transpose() * &c)) < 1e-14);
    }
}
