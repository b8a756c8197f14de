//! Dense symmetric eigensolver: Householder tridiagonalisation followed by
//! the implicit QL algorithm (the classic EISPACK `tred2`/`tql2` pair).

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const QL_MAX_ITER: usize = 60;

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Non-increasing.
    pub values: Vec<f64>,
    /// `n × k`; column `i` pairs with `values[i]`.
    pub vectors: DenseMatrix,
}

/// Returns the `k` largest eigenpairs of the symmetric matrix `a`.
///
/// `a` must be symmetric to within `1e-12 · max(1, max|a_ij|)`.
pub fn sym_eig_top_k(a: &DenseMatrix, k: usize) -> Result<SymEigen> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::shape(format!(
            "sym_eig_top_k needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if k > n {
        return Err(Error::Contract(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric(
            "sym_eig_top_k input has non-finite entries".into(),
        ));
    }
    let scale = a.as_slice().iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})"
        )));
    }
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }

    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    // tql2 leaves eigenvalues ascending
    let values: Vec<f64> = (0..k).map(|i| d[n - 1 - i]).collect();
    let vectors = DenseMatrix::from_fn(n, k, |row, col| v[row][n - 1 - col]);
    Ok(SymEigen { values, vectors })
}

fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for x in d.iter().take(i) {
            scale += x.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for x in d.iter_mut().take(i) {
                *x /= scale;
                h += *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);

            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let g: f64 = v[..=i].iter().map(|row| row[i + 1] * row[j]).sum();
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Numeric(format!(
                        "symmetric QL iteration did not converge within {QL_MAX_ITER} steps"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d.iter_mut().skip(l + 2) {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort, ascending, carrying eigenvector columns.
    for i in 0..n.saturating_sub(1) {
        let mut kmin = i;
        let mut pmin = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < pmin {
                kmin = j;
                pmin = dj;
            }
        }
        if kmin != i {
            d.swap(i, kmin);
            for row in v.iter_mut() {
                row.swap(i, kmin);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_top_two() {
        let a = DenseMatrix::from_diag(&[5.0, 2.0, 1.0]);
        let r = sym_eig_top_k(&a, 2).unwrap();
        assert!((r.values[0] - 5.0).abs() < 1e-14);
        assert!((r.values[1] - 2.0).abs() < 1e-14);
        assert!((r.vectors[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((r.vectors[(1, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_degenerate_spectrum() {
        let r = sym_eig_top_k(&DenseMatrix::identity(4), 1).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-14);
        let norm: f64 = r
            .vectors
            .column(0)
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut a = DenseMatrix::identity(3);
        a[(0, 2)] = 1e-6;
        assert!(matches!(sym_eig_top_k(&a, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        assert!(sym_eig_top_k(&DenseMatrix::identity(2), 3).is_err());
    }

    #[test]
    fn one_by_one() {
        let a = DenseMatrix::from_diag(&[-7.0]);
        let r = sym_eig_top_k(&a, 1).unwrap();
        assert_eq!(r.values, vec![-7.0]);
    }
}
