//! Small dense and tridiagonal solves used by the stationarity solvers.

/// Solves a small dense system in place via partial-pivot LU.
/// Returns None when the matrix is numerically singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if !pivot.is_finite() || pivot <= f64::EPSILON * 16.0 * max_abs(&a) {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            a[r][col] = 0.0;
            for c in col + 1..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-300)
}

/// Symmetric tridiagonal system solve (Thomas algorithm, no pivoting).
/// `diag` has length n, `off` length n−1. Returns None on a tiny pivot.
pub fn solve_tridiag(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(off.len() + 1 == n && rhs.len() == n);
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= f64::EPSILON * 64.0 * scale {
        return None;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if pivot.abs() <= f64::EPSILON * 64.0 * scale || !pivot.is_finite() {
            return None;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    if d.iter().all(|v| v.is_finite()) {
        Some(d)
    } else {
        None
    }
}

/// Inertia of a dense symmetric matrix by unpivoted LDLᵀ: counts of
/// positive, negative, and near-zero pivots. Near-zero pivots are
/// regularized so the sweep can continue; this is a diagnostic, not a
/// factorization for solving.
pub fn ldlt_inertia(mut a: Vec<Vec<f64>>) -> (usize, usize, usize) {
    let n = a.len();
    let scale = max_abs(&a);
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    for k in 0..n {
        let d = a[k][k];
        if d.abs() <= 1e-10 * scale {
            zero += 1;
        } else if d > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
        let dd = if d.abs() <= 1e-10 * scale {
            1e-10 * scale * if d < 0.0 { -1.0 } else { 1.0 }
        } else {
            d
        };
        for i in k + 1..n {
            let factor = a[i][k] / dd;
            for j in k + 1..n {
                a[i][j] -= factor * a[k][j];
            }
        }
    }
    (pos, neg, zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_roundtrip() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(x_true).map(|(c, x)| c * x).sum())
            .collect();
        let x = solve_dense(a, b).unwrap();
        for (got, want) in x.iter().zip(x_true) {
            assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn dense_solve_rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn tridiag_matches_dense() {
        let diag = vec![4.0, 5.0, 6.0, 7.0];
        let off = vec![1.0, -2.0, 0.5];
        let rhs = vec![1.0, 0.0, -3.0, 2.0];
        let x = solve_tridiag(&diag, &off, &rhs).unwrap();
        let n = diag.len();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i + 1 < n {
                dense[i][i + 1] = off[i];
                dense[i + 1][i] = off[i];
            }
        }
        let want = solve_dense(dense, rhs).unwrap();
        for (a, b) in x.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn inertia_counts_signs() {
        let a = vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, -3.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        assert_eq!(ldlt_inertia(a), (2, 1, 0));
    }
}
