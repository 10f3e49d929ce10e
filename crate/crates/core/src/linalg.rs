//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute feasibility tolerance shared by every active-set decision.
pub const EPS_FEAS: f64 = 1e-9;

pub fn vec_from(xs: &[f64]) -> Vector {
    DVector::from_column_slice(xs)
}

pub fn mat_from_rows(rows: &[Vec<f64>], ncols: usize) -> Mat {
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn symmetrize(h: &Mat) -> Mat {
    (h + h.transpose()) * 0.5
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}

fn rank_tol(m: &Mat, svals: &[f64]) -> f64 {
    let smax = svals.iter().fold(0.0f64, |a, &b| a.max(b));
    1e-10 * smax.max(1.0) * (m.nrows().max(m.ncols()) as f64)
}

/// Orthonormal basis (columns) of the null space of `m`, which has `n` columns.
pub fn null_space(m: &Mat, n: usize) -> Mat {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to square so the full V factor is available
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let tol = rank_tol(m, &sv);
    let cols: Vec<Vector> = (0..n)
        .filter(|&i| sv.get(i).map_or(true, |&s| s <= tol))
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn rank(m: &Mat) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    let tol = rank_tol(m, &sv);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the column span of `m`.
pub fn column_basis(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let tol = rank_tol(m, &sv);
    let cols: Vec<Vector> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq(m: &Mat, b: &Vector) -> Vector {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(m.ncols());
    }
    let svd = m.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let tol = rank_tol(m, &sv);
    svd.solve(b, tol).expect("svd factors present")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_shapes_do_not_factor() {
        let e = Mat::zeros(0, 0);
        assert_eq!(lstsq(&e, &Vector::zeros(0)).len(), 0);
        assert_eq!(lstsq(&Mat::zeros(2, 0), &Vector::zeros(2)).len(), 0);
        assert_eq!(column_basis(&Mat::zeros(0, 3)).ncols(), 0);
        assert_eq!(rank(&e), 0);
    }

    #[test]
    fn null_space_of_single_row() {
        let m = mat_from_rows(&[vec![1.0, 1.0, 0.0]], 3);
        let n = null_space(&m, 3);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-12);
        assert!((n.transpose() * &n - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn eigen_sorted() {
        let m = mat_from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]], 2);
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals, vec![-1.0, 3.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm() {
        let m = mat_from_rows(&[vec![1.0, 1.0]], 2);
        let x = lstsq(&m, &vec_from(&[2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
