//! Dense least squares via Householder QR on column-major data.

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Upper-triangular R factor, row-major `p x p`.
    pub r: Vec<f64>,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankDeficiency {
    /// Column that was found to be (numerically) in the span of earlier ones.
    pub column: usize,
    /// The column together with the earlier columns it depends on.
    pub dependent_set: Vec<usize>,
}

/// Solves `min ||y - X b||` where `columns[j]` is column `j` of `X`.
///
/// Columns are processed in order; a column whose residual norm after
/// projecting out the earlier ones falls below `rel_tol` times its original
/// norm is reported as rank-deficient.
pub fn least_squares(
    columns: &[Vec<f64>],
    y: &[f64],
    rel_tol: f64,
) -> Result<LeastSquares, RankDeficiency> {
    let p = columns.len();
    let n = y.len();
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let mut r = vec![0.0; p * p];
    let col_norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();

    for k in 0..p {
        let (head, tail) = a.split_at_mut(k);
        let _ = head;
        let col = &mut tail[0];
        let alpha = norm(&col[k..]);
        if alpha <= rel_tol * col_norms[k].max(f64::MIN_POSITIVE) || col_norms[k] == 0.0 {
            // express column k in terms of previous columns: R11 c = (Q^T x_k)[..k]
            let rhs: Vec<f64> = (0..k).map(|i| col[i]).collect();
            let c = back_substitute(&r, p, k, &rhs);
            let mut set: Vec<usize> = c
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-8)
                .map(|(i, _)| i)
                .collect();
            set.push(k);
            return Err(RankDeficiency { column: k, dependent_set: set });
        }
        let sign = if col[k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = col[k..].to_vec();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        // apply H = I - 2 v v^T / (v^T v) to remaining columns and y
        for j in k..p {
            let cj = &mut tail[j - k];
            let dot: f64 = v.iter().zip(&cj[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (i, vi) in v.iter().enumerate() {
                cj[k + i] -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&qty[k..]).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / vnorm2;
        for (i, vi) in v.iter().enumerate() {
            qty[k + i] -= f * vi;
        }
        for j in k..p {
            r[k * p + j] = tail[j - k][k];
        }
        for i in 0..k {
            r[i * p + k] = tail[0][i];
        }
    }
    let _ = n;
    let coefficients = back_substitute(&r, p, p, &qty[..p]);
    Ok(LeastSquares { coefficients, r, p })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the leading `k x k` block of the row-major upper-triangular `r`.
fn back_substitute(r: &[f64], p: usize, k: usize, rhs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= r[i * p + j] * x[j];
        }
        x[i] = s / r[i * p + i];
    }
    x
}

impl LeastSquares {
    /// Diagonal of `(X^T X)^{-1} = R^{-1} R^{-T}`.
    pub fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let p = self.p;
        // R^{-1}, row-major upper triangular
        let mut rinv = vec![0.0; p * p];
        for c in 0..p {
            let mut e = vec![0.0; p];
            e[c] = 1.0;
            let col = back_substitute(&self.r, p, p, &e);
            for (i, v) in col.into_iter().enumerate() {
                rinv[i * p + c] = v;
            }
        }
        (0..p)
            .map(|i| (0..p).map(|j| rinv[i * p + j] * rinv[i * p + j]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_exact_system() {
        let cols = vec![vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]];
        let y = vec![1.0, 3.0, 5.0];
        let ls = least_squares(&cols, &y, 1e-10).unwrap();
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((ls.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_dependent_columns() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![0.0, 1.0, 0.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let err = least_squares(&[a, b, c], &[1.0, 2.0, 3.0, 5.0], 1e-10).unwrap_err();
        assert_eq!(err.column, 2);
        assert_eq!(err.dependent_set, vec![0, 1, 2]);
    }

    #[test]
    fn inverse_gram_diagonal_of_orthonormal_is_one() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let ls = least_squares(&cols, &[1.0, 1.0, 1.0], 1e-10).unwrap();
        for d in ls.inverse_gram_diagonal() {
            assert!((d - 1.0).abs() < 1e-12);
        }
    }
}
