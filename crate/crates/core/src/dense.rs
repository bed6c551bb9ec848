//! Dense linear algebra kernels: block LU with partial pivoting,
//! matrix multiply, and truncated SVD.
//!
//! Blocks here are small (leaf cluster sizes and interaction ranks), so the
//! kernels are hand-rolled scalar code. The SVD is one-sided Jacobi applied
//! after a Householder QR reduction of tall stacks, which keeps high relative
//! accuracy on small singular values without external dependencies.

use crate::error::{Error, Result};

/// Row-major dense matrix block.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    /// Identity scaled by `s` (used for the -I auxiliary coupling blocks).
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = s;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    pub fn transpose(&self) -> DenseBlock {
        let mut t = DenseBlock::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *t.at_mut(c, r) = self.at(r, c);
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> DenseBlock {
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &DenseBlock) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Copy `src` into this block with its (0,0) at (`r0`, `c0`).
    pub fn paste(&mut self, r0: usize, c0: usize, src: &DenseBlock) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for r in 0..src.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + src.cols].copy_from_slice(src.row_slice(r));
        }
    }

    /// Sub-block of shape `nr` x `nc` starting at (`r0`, `c0`).
    pub fn slice(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> DenseBlock {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        let mut out = DenseBlock::zeros(nr, nc);
        for r in 0..nr {
            let src = (r0 + r) * self.cols + c0;
            out.data[r * nc..(r + 1) * nc].copy_from_slice(&self.data[src..src + nc]);
        }
        out
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row_slice(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// C <- alpha * A * B + beta * C
pub fn gemm(alpha: f64, a: &DenseBlock, b: &DenseBlock, beta: f64, c: &mut DenseBlock) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension mismatch");
    assert_eq!(c.rows, a.rows, "gemm output rows mismatch");
    assert_eq!(c.cols, b.cols, "gemm output cols mismatch");
    if beta != 1.0 {
        for v in &mut c.data {
            *v *= beta;
        }
    }
    if alpha == 0.0 {
        return;
    }
    // i-k-j loop order: streams over rows of B and C
    for i in 0..a.rows {
        let crow = i * c.cols;
        for k in 0..a.cols {
            let aik = alpha * a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = k * b.cols;
            for j in 0..b.cols {
                c.data[crow + j] += aik * b.data[brow + j];
            }
        }
    }
}

/// Convenience: alpha * A * B as a fresh block.
pub fn matmul(a: &DenseBlock, b: &DenseBlock) -> DenseBlock {
    let mut c = DenseBlock::zeros(a.rows, b.cols);
    gemm(1.0, a, b, 0.0, &mut c);
    c
}

/// LU factorization with partial pivoting: P A = L U, packed in place.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    /// L (unit diagonal, below) and U (on and above) packed row-major.
    lu: Vec<f64>,
    /// Row permutation: factored row i came from original row perm[i].
    perm: Vec<usize>,
}

const PIVOT_RTOL: f64 = 1e-13;

/// Factor a square block. Fails with `SingularPivot` when the best available
/// pivot falls below `1e-13 * max|A|`.
pub fn lu_factor(block: &DenseBlock) -> Result<LuFactor> {
    assert_eq!(block.rows, block.cols, "lu_factor requires a square block");
    let n = block.rows;
    let norm_max = block.max_abs();
    let mut lu = block.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    // NaN comparisons are all false and would silently corrupt pivoting;
    // note max_abs alone cannot flag NaN because f64::max ignores it
    if n > 0 && (norm_max == 0.0 || block.data.iter().any(|v| !v.is_finite())) {
        return Err(singular(n));
    }
    for k in 0..n {
        // partial pivot: largest magnitude in column k at or below the diagonal
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < PIVOT_RTOL * norm_max {
            return Err(singular(n));
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            lu[i * n + k] = factor;
            if factor != 0.0 {
                for j in (k + 1)..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
    }
    Ok(LuFactor { n, lu, perm })
}

fn singular(n: usize) -> Error {
    Error::SingularPivot {
        node: "block".into(),
        level: 0,
        size: n,
    }
}

impl LuFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A x = rhs for a single vector.
    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "lu solve dimension mismatch");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        // forward: L y = P rhs
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    /// Solve A X = RHS column-wise for a dense right-hand side block.
    pub fn solve(&self, rhs: &DenseBlock) -> DenseBlock {
        assert_eq!(rhs.rows, self.n, "lu solve shape mismatch");
        let n = self.n;
        let m = rhs.cols;
        let mut x = DenseBlock::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.data[i * m..(i + 1) * m].copy_from_slice(rhs.row_slice(p));
        }
        for i in 1..n {
            for j in 0..i {
                let lij = self.lu[i * n + j];
                if lij != 0.0 {
                    for c in 0..m {
                        x.data[i * m + c] -= lij * x.data[j * m + c];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let uij = self.lu[i * n + j];
                if uij != 0.0 {
                    for c in 0..m {
                        x.data[i * m + c] -= uij * x.data[j * m + c];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for c in 0..m {
                x.data[i * m + c] /= d;
            }
        }
        x
    }

    /// Reconstruct P^-1 L U; test support.
    pub fn reconstruct(&self) -> DenseBlock {
        let n = self.n;
        let mut l = DenseBlock::identity(n);
        let mut u = DenseBlock::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    *l.at_mut(i, j) = self.lu[i * n + j];
                } else {
                    *u.at_mut(i, j) = self.lu[i * n + j];
                }
            }
        }
        let pa = matmul(&l, &u);
        let mut a = DenseBlock::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(self.perm[i], j) = pa.at(i, j);
            }
        }
        a
    }
}

/// Cutoff rule applied to the singular values of a stacked block.
#[derive(Debug, Clone, Copy)]
pub enum SvdCutoff {
    /// Keep sigma_k with sigma_k / sigma_0 >= eps (ties kept).
    RelativeSigma { eps: f64 },
    /// Keep the smallest k with ||B - B_k||_F / reference < eps, where
    /// `reference` is the caller-maintained Frobenius norm of all blocks at
    /// the current level and below.
    FrobeniusRelative { eps: f64, reference: f64 },
}

/// Truncated singular value decomposition M ~= U diag(sigma) V^T.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DenseBlock,
    pub sigma: Vec<f64>,
    pub v: DenseBlock,
    /// sqrt of the sum of squared discarded singular values.
    pub dropped_energy: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Full SVD of `m` by Householder QR reduction followed by one-sided Jacobi.
/// Returns (u, sigma, v) with sigma non-increasing; u is rows x k and v is
/// cols x k with k = min(rows, cols).
pub fn svd(m: &DenseBlock) -> Result<(DenseBlock, Vec<f64>, DenseBlock)> {
    if m.rows == 0 || m.cols == 0 {
        return Ok((
            DenseBlock::zeros(m.rows, 0),
            Vec::new(),
            DenseBlock::zeros(m.cols, 0),
        ));
    }
    check_finite(m)?;
    if m.rows >= m.cols {
        svd_tall(m)
    } else {
        let (u, s, v) = svd_tall(&m.transpose())?;
        Ok((v, s, u))
    }
}

fn check_finite(m: &DenseBlock) -> Result<()> {
    if m.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "non-finite values in a {}x{} block",
            m.rows, m.cols
        )))
    }
}

/// SVD for rows >= cols.
fn svd_tall(m: &DenseBlock) -> Result<(DenseBlock, Vec<f64>, DenseBlock)> {
    let (q, r) = householder_qr(m);
    let n = m.cols;
    let (ur, sigma, v) = jacobi_svd_square(&r)?;
    debug_assert_eq!(ur.rows, n);
    let u = matmul(&q, &ur);
    Ok((u, sigma, v))
}

/// Singular values and right singular vectors only: Q-less QR reduction
/// followed by Jacobi on R. Left factors can be recovered as M * V_r.
pub fn svd_values_and_v(m: &DenseBlock) -> Result<(Vec<f64>, DenseBlock)> {
    if m.rows == 0 || m.cols == 0 {
        return Ok((Vec::new(), DenseBlock::zeros(m.cols, 0)));
    }
    check_finite(m)?;
    if m.rows >= m.cols {
        let r = householder_r(m);
        let (_ur, sigma, v) = jacobi_svd_square(&r)?;
        Ok((sigma, v))
    } else {
        // wide: V of M equals U of M^T, so fall back to the full path
        let (u, sigma, _v) = svd_tall(&m.transpose())?;
        Ok((sigma, u))
    }
}

/// Thin Householder QR: returns (Q rows x cols with orthonormal columns,
/// R cols x cols upper triangular).
fn householder_qr(m: &DenseBlock) -> (DenseBlock, DenseBlock) {
    let rows = m.rows;
    let cols = m.cols;
    debug_assert!(rows >= cols);
    let mut a = m.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(cols);
    reduce_in_place(&mut a, Some(&mut vs));
    let mut r = DenseBlock::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            *r.at_mut(i, j) = a.at(i, j);
        }
    }
    // accumulate thin Q by applying reflectors to the first `cols` columns of I
    let mut q = DenseBlock::zeros(rows, cols);
    for i in 0..cols {
        *q.at_mut(i, i) = 1.0;
    }
    for k in (0..cols).rev() {
        let v = &vs[k];
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in 0..cols {
            let mut dot = 0.0;
            for i in k..rows {
                dot += v[i - k] * q.at(i, j);
            }
            let scale = 2.0 * dot / vnorm2;
            for i in k..rows {
                *q.at_mut(i, j) -= scale * v[i - k];
            }
        }
    }
    (q, r)
}

/// R factor only; skips the Q accumulation.
fn householder_r(m: &DenseBlock) -> DenseBlock {
    let cols = m.cols;
    let mut a = m.clone();
    reduce_in_place(&mut a, None);
    let mut r = DenseBlock::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            *r.at_mut(i, j) = a.at(i, j);
        }
    }
    r
}

/// Householder reduction to upper-triangular form; optionally keeps the
/// reflector vectors for Q accumulation.
fn reduce_in_place(a: &mut DenseBlock, mut keep: Option<&mut Vec<Vec<f64>>>) {
    let rows = a.rows;
    let cols = a.cols;
    for k in 0..cols {
        let mut norm2 = 0.0;
        for i in k..rows {
            let v = a.at(i, k);
            norm2 += v * v;
        }
        let norm = norm2.sqrt();
        let mut v = vec![0.0; rows - k];
        if norm > 0.0 {
            let akk = a.at(k, k);
            let alpha = if akk >= 0.0 { -norm } else { norm };
            v[0] = akk - alpha;
            for i in (k + 1)..rows {
                v[i - k] = a.at(i, k);
            }
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                // apply H = I - 2 v v^T / (v^T v) to A[k.., k..]
                for j in k..cols {
                    let mut dot = 0.0;
                    for i in k..rows {
                        dot += v[i - k] * a.at(i, j);
                    }
                    let scale = 2.0 * dot / vnorm2;
                    for i in k..rows {
                        *a.at_mut(i, j) -= scale * v[i - k];
                    }
                }
            }
        }
        if let Some(vs) = keep.as_deref_mut() {
            vs.push(v);
        }
    }
}

/// One-sided Jacobi SVD of a square matrix. Works on columns; high relative
/// accuracy for small singular values.
fn jacobi_svd_square(m: &DenseBlock) -> Result<(DenseBlock, Vec<f64>, DenseBlock)> {
    let n = m.rows;
    debug_assert_eq!(n, m.cols);
    // column-major working copy of M and of V
    let mut g: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| m.at(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    // Columns vastly below the matrix scale underflow in the squared norms
    // and stall the sweeps. Their singular values are noise (ratio 1e-140 to
    // the largest), so flush them to exact zero; zero columns never rotate.
    // Rotations expose such columns as sweeps proceed, so flush every sweep.
    let fmax = m.max_abs();
    let floor = fmax * 1e-140;
    let flush = |g: &mut Vec<Vec<f64>>| {
        if fmax > 0.0 {
            for col in g.iter_mut() {
                if col.iter().all(|x| x.abs() <= floor) {
                    col.fill(0.0);
                }
            }
        }
    };
    flush(&mut g);
    let tol = 1e-15;
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        flush(&mut g);
        // squared column norms, refreshed each sweep and updated per rotation
        let mut norms_sq: Vec<f64> = g.iter().map(|col| col.iter().map(|x| x * x).sum()).collect();
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut apq = 0.0;
                for i in 0..n {
                    apq += g[p][i] * g[q][i];
                }
                if apq == 0.0 {
                    continue;
                }
                let app = norms_sq[p];
                let aqq = norms_sq[q];
                // squared norms of far-below-scale columns underflow to 0;
                // fall back to a scaled norm so the threshold stays positive
                let norm_p = if app > 0.0 { app.sqrt() } else { safe_norm(&g[p]) };
                let norm_q = if aqq > 0.0 { aqq.sqrt() } else { safe_norm(&g[q]) };
                if apq.abs() <= tol * norm_p * norm_q {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let gp = g[p][i];
                    let gq = g[q][i];
                    g[p][i] = c * gp - s * gq;
                    g[q][i] = s * gp + c * gq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
                norms_sq[p] = (app - t * apq).max(0.0);
                norms_sq[q] = (aqq + t * apq).max(0.0);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNonConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            rows: n,
            cols: n,
        });
    }
    // singular values and sorting
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = g.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));
    let mut u = DenseBlock::zeros(n, n);
    let mut vmat = DenseBlock::zeros(n, n);
    let mut sigma = vec![0.0; n];
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        if norms[j] > 0.0 {
            for i in 0..n {
                *u.at_mut(i, k) = g[j][i] / norms[j];
            }
        }
        for i in 0..n {
            *vmat.at_mut(i, k) = v[j][i];
        }
    }
    Ok((u, sigma, vmat))
}

/// Euclidean norm scaled by the largest magnitude to avoid underflow.
fn safe_norm(col: &[f64]) -> f64 {
    let m = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = col.iter().map(|x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// Rank selected by `cutoff` on a non-increasing singular value sequence.
fn cutoff_rank(sigma: &[f64], cutoff: SvdCutoff) -> usize {
    let k = sigma.len();
    match cutoff {
        SvdCutoff::RelativeSigma { eps } => {
            if k == 0 || sigma[0] == 0.0 {
                0
            } else {
                sigma.iter().take_while(|&&s| s / sigma[0] >= eps).count()
            }
        }
        SvdCutoff::FrobeniusRelative { eps, reference } => {
            let denom = if reference > 0.0 { reference } else { 1.0 };
            // walk from the smallest singular value inward; the discarded
            // tail grows monotonically
            let mut rank = k;
            let mut tail_sq = 0.0;
            for r in (0..=k).rev() {
                if r < k {
                    tail_sq += sigma[r] * sigma[r];
                }
                if tail_sq.sqrt() / denom < eps {
                    rank = r;
                } else {
                    break;
                }
            }
            rank
        }
    }
}

/// Truncated SVD of `m` under `cutoff`. Rank 0 is permitted (zero matrix or
/// every singular value below the cutoff).
pub fn truncated_svd(m: &DenseBlock, cutoff: SvdCutoff) -> Result<TruncatedSvd> {
    let (u, sigma, v) = svd(m)?;
    let rank = cutoff_rank(&sigma, cutoff);
    let dropped_energy = sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(TruncatedSvd {
        u: u.slice(0, 0, u.rows(), rank),
        sigma: sigma[..rank].to_vec(),
        v: v.slice(0, 0, v.rows(), rank),
        dropped_energy,
    })
}

/// Truncated factorization of a vertical stack of blocks, as produced by the
/// fill-in compression step: stack(A_1..A_t, B_1..B_t) ~= stack(R_1..R_t,
/// Q_1..Q_t) V^T.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub rank: usize,
    /// U * diag(sigma) split back into the stacked row blocks.
    pub stacked_left: Vec<DenseBlock>,
    /// Shared right factor with orthonormal columns (m x rank).
    pub right: DenseBlock,
    pub dropped_energy: f64,
}

impl LowRankFactor {
    /// Compress a vertical stack of blocks sharing a column space. `heights`
    /// gives the row count of each stacked block, in order.
    ///
    /// Only sigma and V are computed through the factorization; the stacked
    /// left factors are recovered as `stack * V_r`, which equals
    /// U_r * diag(sigma_r) up to rounding because the discarded directions
    /// are orthogonal to V_r.
    pub fn compress(stack: &DenseBlock, heights: &[usize], cutoff: SvdCutoff) -> Result<Self> {
        debug_assert_eq!(heights.iter().sum::<usize>(), stack.rows());
        let (sigma, v) = svd_values_and_v(stack)?;
        let rank = cutoff_rank(&sigma, cutoff);
        let dropped_energy = sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
        let v_r = v.slice(0, 0, v.rows(), rank);
        let left = matmul(stack, &v_r);
        let mut stacked_left = Vec::with_capacity(heights.len());
        let mut offset = 0;
        for &h in heights {
            stacked_left.push(left.slice(offset, 0, h, rank));
            offset += h;
        }
        Ok(Self {
            rank,
            stacked_left,
            right: v_r,
            dropped_energy,
        })
    }
}
