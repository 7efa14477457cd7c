//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `m = u diag(s) v_t`, singular values in descending order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// SVD by one-sided Jacobi rotations, `u` thin (`m x min(m, n)`).
///
/// Columns of `u` belonging to singular values at round-off level are
/// completed to an orthonormal set, so a square input always yields an
/// orthogonal `u`.
pub(crate) fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
        };
    }
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s = DVector::from_iterator(cols, order.iter().map(|&j| norms[j]));
    let floor = s[0] * f64::EPSILON * rows as f64;
    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut v_t = DMatrix::<f64>::zeros(cols, cols);
    for (k, &j) in order.iter().enumerate() {
        v_t.row_mut(k).copy_from(&v.column(j).transpose());
        if s[k] > floor {
            u.set_column(k, &(w.column(j) / s[k]));
        }
    }
    for k in 0..cols {
        if s[k] > floor {
            continue;
        }
        // completion: the standard basis vector least covered so far
        let mut best = DVector::zeros(rows);
        for e in 0..rows {
            let mut cand = DVector::zeros(rows);
            cand[e] = 1.0;
            for i in 0..cols {
                if i != k {
                    let ui = u.column(i).into_owned();
                    cand -= &ui * ui.dot(&cand);
                }
            }
            if cand.norm() > best.norm() {
                best = cand;
            }
        }
        let n = best.norm();
        u.set_column(k, &(best / n));
    }
    Svd { u, s, v_t }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let a = m[(r, p)];
        let b = m[(r, q)];
        m[(r, p)] = c * a - s * b;
        m[(r, q)] = s * a + c * b;
    }
}

/// SVD of a square fixed-size matrix through the dynamic path.
pub(crate) fn svd_square<const N: usize>(m: &SMatrix<f64, N, N>) -> (SMatrix<f64, N, N>, SMatrix<f64, N, 1>, SMatrix<f64, N, N>) {
    let d = svd(&DMatrix::from_column_slice(N, N, m.as_slice()));
    (
        SMatrix::from_column_slice(d.u.as_slice()),
        SMatrix::from_column_slice(d.s.as_slice()),
        SMatrix::from_column_slice(d.v_t.as_slice()),
    )
}

/// Right singular vector of the smallest singular value together with the
/// full (descending) list of singular values, padded with zeros when the
/// matrix has fewer rows than columns.
pub(crate) fn null_vector(m: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = svd(&padded);
    // singular values are sorted in descending order
    let last = svd.v_t.nrows() - 1;
    let null = svd.v_t.row(last).transpose();
    (null, svd.s.iter().copied().collect())
}

/// Least-squares solution of `m x = b` via SVD. Also returns the 2-norm
/// condition number of `m`.
pub(crate) fn least_squares(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let d = svd(m);
    let max = d.s.max();
    let min = d.s.min();
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    let eps = max * f64::EPSILON * (m.nrows().max(m.ncols()) as f64);
    let rhs = d.u.transpose() * b;
    let mut y = DVector::zeros(d.s.len());
    for i in 0..d.s.len() {
        if d.s[i] > eps {
            y[i] = rhs[i] / d.s[i];
        }
    }
    let x = d.v_t.transpose() * y;
    x.iter().all(|v| v.is_finite()).then_some((x, cond))
}

/// Angle between two rotations, in radians.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Angle between two vectors, in radians (sign-sensitive).
pub fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form keeps precision for tiny angles
    a.cross(b).norm().atan2(a.dot(b))
}
