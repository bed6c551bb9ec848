//! Shared oracles for integration tests. Written independently of the
//! library kernels they are used to check.

use hlu::DenseBlock;

/// Plain dense Gaussian elimination with partial pivoting.
pub fn dense_solve(m: &DenseBlock, b: &[f64]) -> Vec<f64> {
    let n = m.rows();
    assert_eq!(b.len(), n);
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m.at(i, j)).collect())
        .collect();
    let mut x: Vec<f64> = b.to_vec();
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        a.swap(k, p);
        x.swap(k, p);
        assert!(a[k][k] != 0.0, "oracle hit a zero pivot");
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= a[i][j] * x[j];
        }
        x[i] /= a[i][i];
    }
    x
}

/// Schur complement onto `keep` after jointly eliminating the `drop`
/// variables of a dense matrix.
pub fn dense_eliminate(mat: &DenseBlock, keep: &[usize], drop: &[usize]) -> DenseBlock {
    let nd = drop.len();
    let nk = keep.len();
    // gather blocks
    let mut a_dd: Vec<Vec<f64>> = (0..nd)
        .map(|i| (0..nd).map(|j| mat.at(drop[i], drop[j])).collect())
        .collect();
    let mut a_dk = DenseBlock::zeros(nd, nk);
    for i in 0..nd {
        for j in 0..nk {
            *a_dk.at_mut(i, j) = mat.at(drop[i], keep[j]);
        }
    }
    let mut out = DenseBlock::zeros(nk, nk);
    for i in 0..nk {
        for j in 0..nk {
            *out.at_mut(i, j) = mat.at(keep[i], keep[j]);
        }
    }
    // LU of the dropped block with partial pivoting, applied to a_dk
    let mut perm: Vec<usize> = (0..nd).collect();
    for k in 0..nd {
        let mut p = k;
        for i in (k + 1)..nd {
            if a_dd[i][k].abs() > a_dd[p][k].abs() {
                p = i;
            }
        }
        a_dd.swap(k, p);
        perm.swap(k, p);
        for i in (k + 1)..nd {
            let f = a_dd[i][k] / a_dd[k][k];
            a_dd[i][k] = f;
            if f != 0.0 {
                for j in (k + 1)..nd {
                    a_dd[i][j] -= f * a_dd[k][j];
                }
            }
        }
    }
    // W = A_dd^-1 A_dk, column by column
    let mut w = DenseBlock::zeros(nd, nk);
    for c in 0..nk {
        let mut y: Vec<f64> = perm.iter().map(|&p| a_dk.at(p, c)).collect();
        for i in 1..nd {
            for j in 0..i {
                y[i] -= a_dd[i][j] * y[j];
            }
        }
        for i in (0..nd).rev() {
            for j in (i + 1)..nd {
                y[i] -= a_dd[i][j] * y[j];
            }
            y[i] /= a_dd[i][i];
        }
        for i in 0..nd {
            *w.at_mut(i, c) = y[i];
        }
    }
    // out -= A_kd W
    for i in 0..nk {
        for j in 0..nk {
            let mut acc = 0.0;
            for t in 0..nd {
                acc += mat.at(keep[i], drop[t]) * w.at(t, j);
            }
            *out.at_mut(i, j) -= acc;
        }
    }
    out
}

pub fn rel_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn relative_residual(m: &hlu::BlockSparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.matvec(x);
    let num: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    num / norm2(b)
}
