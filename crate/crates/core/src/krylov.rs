//! GMRES with an optional left preconditioner.
//!
//! Full (non-restarted) GMRES by default, modified Gram-Schmidt
//! orthogonalization, Givens-rotation least squares. The residual history
//! tracks the preconditioned residual per iteration.

use crate::error::Result;
use crate::factor::Factorization;
use crate::sparse::BlockSparseMatrix;

/// A linear operator y = M x of fixed dimension.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl LinearOp for BlockSparseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// The factorization applies as an approximate inverse.
impl LinearOp for Factorization {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.solve(x).expect("solve on factored handle")
    }
}

#[derive(Debug, Clone)]
pub struct GmresConfig {
    /// Tolerance on the preconditioned relative residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Restart length; None runs full GMRES.
    pub restart: Option<usize>,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 500,
            restart: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Arnoldi breakdown: the Krylov space became invariant; the returned
    /// iterate is exact within the explored subspace.
    pub breakdown: bool,
    /// Preconditioned relative residual after each iteration.
    pub history: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve A x = b with left preconditioner `precond` (approximating A^-1):
/// GMRES runs on precond(A x) = precond(b).
pub fn gmres_solve(
    a: &dyn LinearOp,
    precond: Option<&dyn LinearOp>,
    b: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresResult> {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs dimension mismatch");
    let apply_pa = |x: &[f64]| -> Vec<f64> {
        let ax = a.apply(x);
        match precond {
            Some(p) => p.apply(&ax),
            None => ax,
        }
    };
    let z0 = match precond {
        Some(p) => p.apply(b),
        None => b.to_vec(),
    };
    let beta0 = norm2(&z0);
    let mut result = GmresResult {
        x: vec![0.0; n],
        iterations: 0,
        converged: false,
        breakdown: false,
        history: Vec::new(),
    };
    if beta0 == 0.0 {
        result.converged = true;
        return Ok(result);
    }

    let cycle = cfg.restart.unwrap_or(cfg.max_iters).max(1);
    let mut total_iters = 0;

    loop {
        // residual of the current iterate in the preconditioned system
        let r = if total_iters == 0 {
            z0.clone()
        } else {
            let pax = apply_pa(&result.x);
            z0.iter().zip(&pax).map(|(z, p)| z - p).collect()
        };
        let beta = norm2(&r);
        if beta / beta0 <= cfg.tol {
            result.converged = true;
            return Ok(result);
        }

        // Arnoldi basis, Hessenberg columns, Givens rotations
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h_cols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k_done = 0;
        let mut broke_down = false;

        for k in 0..cycle {
            if total_iters >= cfg.max_iters {
                break;
            }
            let mut w = apply_pa(&basis[k]);
            let mut h = vec![0.0; k + 2];
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                let dot: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                h[i] = dot;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= dot * vi;
                }
            }
            let wnorm = norm2(&w);
            h[k + 1] = wnorm;
            // apply accumulated rotations to the new column
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            // new rotation zeroing h[k+1]
            let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (h[k] / denom, h[k + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            h[k] = c * h[k] + s * h[k + 1];
            h[k + 1] = 0.0;
            let g_next = -s * g[k];
            g[k] *= c;
            g.push(g_next);
            h_cols.push(h);
            k_done = k + 1;
            total_iters += 1;
            result.iterations = total_iters;
            let rel = g[k_done].abs() / beta0;
            result.history.push(rel);

            let happy = wnorm <= 1e-300 || wnorm <= f64::EPSILON * beta;
            if happy {
                broke_down = true;
            }
            if rel <= cfg.tol || happy || total_iters >= cfg.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        // back-substitute y from the triangularized Hessenberg system
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_done {
                acc -= h_cols[j][i] * y[j];
            }
            y[i] = acc / h_cols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in result.x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }

        let rel = result.history.last().copied().unwrap_or(1.0);
        if rel <= cfg.tol {
            result.converged = true;
            return Ok(result);
        }
        if broke_down {
            result.breakdown = true;
            return Ok(result);
        }
        if total_iters >= cfg.max_iters {
            return Ok(result);
        }
        // otherwise restart
    }
}

/// Relative error and relative residual of an approximate solution. When a
/// denominator norm is zero the corresponding value falls back to the
/// absolute norm and the flag is set.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub error: f64,
    pub residual: f64,
    pub error_is_absolute: bool,
    pub residual_is_absolute: bool,
}

impl Metrics {
    pub fn compute(
        x_approx: &[f64],
        x_true: &[f64],
        a: &BlockSparseMatrix,
        b: &[f64],
    ) -> Metrics {
        assert_eq!(x_approx.len(), x_true.len());
        assert_eq!(b.len(), a.n());
        let err_abs = x_true
            .iter()
            .zip(x_approx)
            .map(|(t, a)| (t - a) * (t - a))
            .sum::<f64>()
            .sqrt();
        let xnorm = norm2(x_true);
        let ax = a.matvec(x_approx);
        let res_abs = ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let bnorm = norm2(b);
        Metrics {
            error: if xnorm > 0.0 { err_abs / xnorm } else { err_abs },
            residual: if bnorm > 0.0 { res_abs / bnorm } else { res_abs },
            error_is_absolute: xnorm == 0.0,
            residual_is_absolute: bnorm == 0.0,
        }
    }
}

/// (relative error, relative residual); see [`Metrics`] for the flagged form.
pub fn metrics(x_approx: &[f64], x_true: &[f64], a: &BlockSparseMatrix, b: &[f64]) -> (f64, f64) {
    let m = Metrics::compute(x_approx, x_true, a, b);
    (m.error, m.residual)
}
