//! Small dense helpers. Everything here is O(k^3) on k <= 8 systems.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `tol` times the row scale
/// (rank-deficient system).
pub fn solve(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let k = b.len();
    debug_assert_eq!(a.len(), k);
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            debug_assert_eq!(row.len(), k);
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let scale = aug
        .iter()
        .flat_map(|r| r[..k].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);

    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())?;
        if aug[pivot_row][col].abs() < tol * scale {
            return None;
        }
        aug.swap(col, pivot_row);
        for row in col + 1..k {
            let factor = aug[row][col] / aug[col][col];
            for j in col..=k {
                aug[row][j] -= factor * aug[col][j];
            }
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut s = aug[col][k];
        for j in col + 1..k {
            s -= aug[col][j] * x[j];
        }
        x[col] = s / aug[col][col];
    }
    Some(x)
}

/// Invert a `k x k` matrix via Gauss-Jordan. `None` on (near-)singularity.
pub fn invert(a: &[Vec<f64>], tol: f64) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            debug_assert_eq!(row.len(), k);
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);

    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| work[i][col].abs().partial_cmp(&work[j][col].abs()).unwrap())?;
        if work[pivot_row][col].abs() < tol * scale {
            return None;
        }
        work.swap(col, pivot_row);
        let pivot = work[col][col];
        for v in work[col].iter_mut() {
            *v /= pivot;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let factor = work[row][col];
            if factor != 0.0 {
                for j in 0..2 * k {
                    work[row][j] -= factor * work[col][j];
                }
            }
        }
    }
    Some(work.into_iter().map(|r| r[k..].to_vec()).collect())
}

fn norm_inf(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Infinity-norm condition estimate `||A|| * ||A^-1||`.
/// Returns `f64::INFINITY` when the matrix is numerically singular.
pub fn cond_inf(a: &[Vec<f64>]) -> f64 {
    match invert(a, 1e-300) {
        Some(inv) => norm_inf(a) * norm_inf(&inv),
        None => f64::INFINITY,
    }
}

/// `a * x` for an `r x c` matrix stored as rows.
pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}
