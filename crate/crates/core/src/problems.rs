//! Generators for the benchmark matrices and right-hand sides.
//!
//! All stencils are scaled by h^2 so entries are dimensionless and accuracy
//! thresholds are grid independent. Generators are deterministic under a
//! fixed seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{BlockSparseMatrix, Symmetry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Uniform-grid specification: 2 or 3 dimensions, each >= 2.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub bc: Boundary,
}

impl GridSpec {
    pub fn new_2d(nx: usize, ny: usize, bc: Boundary) -> Self {
        Self { dims: vec![nx, ny], bc }
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize, bc: Boundary) -> Self {
        Self {
            dims: vec![nx, ny, nz],
            bc,
        }
    }

    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims.len() > 3 {
            return Err(Error::InvalidInput(format!(
                "grid must be 2D or 3D, got {} dims",
                self.dims.len()
            )));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidInput("all grid dims must be >= 2".into()));
        }
        Ok(())
    }

    fn index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (c, d) in coords.iter().zip(&self.dims) {
            idx += c * stride;
            stride *= d;
        }
        idx
    }
}

/// Coefficient field for the variable-coefficient Poisson cases.
#[derive(Debug, Clone, Copy)]
pub enum CoeffCase {
    Constant,
    /// phi ~ unif(0, 1)
    Unif01,
    /// phi = 1 / rho, rho ~ unif(0, 1) rejected below 1e-6
    InverseUnif01,
    /// phi ~ unif(-1, 1); indefinite system
    UnifNeg11,
}

#[derive(Debug, Clone, Copy)]
pub struct CoeffField {
    pub case: CoeffCase,
    pub seed: u64,
}

impl CoeffField {
    fn sample(&self, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n)
            .map(|_| match self.case {
                CoeffCase::Constant => 1.0,
                CoeffCase::Unif01 => rng.gen_range(0.0..1.0),
                CoeffCase::InverseUnif01 => {
                    let mut rho = rng.gen_range(0.0..1.0);
                    while rho < 1e-6 {
                        rho = rng.gen_range(0.0..1.0);
                    }
                    1.0 / rho
                }
                CoeffCase::UnifNeg11 => rng.gen_range(-1.0..1.0),
            })
            .collect()
    }
}

fn neighbors_of(
    spec: &GridSpec,
    coords: &[usize],
) -> Vec<(usize, usize, bool)> {
    // (axis, neighbor index, is_forward); Dirichlet drops outside neighbors
    let mut out = Vec::with_capacity(2 * spec.dims.len());
    for (axis, &d) in spec.dims.iter().enumerate() {
        for (step, forward) in [(-1isize, false), (1isize, true)] {
            let c = coords[axis] as isize + step;
            let wrapped = match spec.bc {
                Boundary::Dirichlet => {
                    if c < 0 || c >= d as isize {
                        continue;
                    }
                    c as usize
                }
                Boundary::Periodic => ((c + d as isize) % d as isize) as usize,
            };
            let mut nb = coords.to_vec();
            nb[axis] = wrapped;
            out.push((axis, spec.index(&nb), forward));
        }
    }
    out
}

fn for_each_cell(spec: &GridSpec, mut f: impl FnMut(usize, &[usize])) {
    let dims = &spec.dims;
    let mut coords = vec![0usize; dims.len()];
    let n = spec.n();
    for idx in 0..n {
        let mut rem = idx;
        for (a, &d) in dims.iter().enumerate() {
            coords[a] = rem % d;
            rem /= d;
        }
        f(idx, &coords);
    }
}

/// Second-order uniform discretization of the Poisson operator: 5-point (2D)
/// or 7-point (3D) stencil, h^2-scaled. Interior diagonal is 4 (2D) / 6 (3D);
/// off-diagonals are -1. Dirichlet rows drop outside neighbors.
pub fn poisson(spec: &GridSpec) -> Result<BlockSparseMatrix> {
    spec.validate()?;
    let n = spec.n();
    let mut entries = Vec::with_capacity(n * (2 * spec.dims.len() + 1));
    let diag = 2.0 * spec.dims.len() as f64;
    for_each_cell(spec, |idx, coords| {
        entries.push((idx, idx, diag));
        for (_axis, nb, _fwd) in neighbors_of(spec, coords) {
            entries.push((idx, nb, -1.0));
        }
    });
    BlockSparseMatrix::from_coo_with_hint(n, &entries, Symmetry::Symmetric)
}

pub fn poisson2d(nx: usize, ny: usize, bc: Boundary) -> BlockSparseMatrix {
    poisson(&GridSpec::new_2d(nx, ny, bc)).expect("valid 2d grid")
}

pub fn poisson3d(nx: usize, ny: usize, nz: usize, bc: Boundary) -> BlockSparseMatrix {
    poisson(&GridSpec::new_3d(nx, ny, nz, bc)).expect("valid 3d grid")
}

/// Flux-form discretization of the variable-coefficient Poisson operator
/// with periodic boundaries. Face coefficients are arithmetic means of the
/// two adjacent cell values; row i is sum_f phi_f on the diagonal and
/// -phi_f per neighbor.
pub fn variable_coeff_poisson(spec: &GridSpec, field: &CoeffField) -> Result<BlockSparseMatrix> {
    spec.validate()?;
    if spec.bc != Boundary::Periodic {
        return Err(Error::InvalidInput(
            "variable-coefficient Poisson uses periodic boundaries".into(),
        ));
    }
    let n = spec.n();
    let phi = field.sample(n);
    let mut entries = Vec::with_capacity(n * (2 * spec.dims.len() + 1));
    for_each_cell(spec, |idx, coords| {
        let mut diag = 0.0;
        for (_axis, nb, _fwd) in neighbors_of(spec, coords) {
            let face = 0.5 * (phi[idx] + phi[nb]);
            diag += face;
            entries.push((idx, nb, -face));
        }
        entries.push((idx, idx, diag));
    });
    BlockSparseMatrix::from_coo_with_hint(n, &entries, Symmetry::Symmetric)
}

/// Central-difference discretization of sigma*T + R*grad(T) - laplace(T) = g
/// on the unit cube with Dirichlet boundaries, h^2-scaled: the diagonal is
/// sigma*h^2 + 6 and each directional pair is (-1 - R*h/2, -1 + R*h/2).
pub fn advection_diffusion(spec: &GridSpec, sigma: f64, r: f64) -> Result<BlockSparseMatrix> {
    spec.validate()?;
    if spec.bc != Boundary::Dirichlet {
        return Err(Error::InvalidInput(
            "advection-diffusion uses Dirichlet boundaries".into(),
        ));
    }
    let n = spec.n();
    let h = 1.0 / (spec.dims[0] as f64 + 1.0);
    let diag = sigma * h * h + 2.0 * spec.dims.len() as f64;
    let mut entries = Vec::with_capacity(n * (2 * spec.dims.len() + 1));
    for_each_cell(spec, |idx, coords| {
        entries.push((idx, idx, diag));
        for (_axis, nb, forward) in neighbors_of(spec, coords) {
            let adv = if forward { r * h / 2.0 } else { -r * h / 2.0 };
            entries.push((idx, nb, -1.0 + adv));
        }
    });
    BlockSparseMatrix::from_coo(n, &entries)
}

/// 1D Laplacian chain, optionally periodic (a ring). Small instances drive
/// the step-by-step factorization traces.
pub fn chain1d(n: usize, periodic: bool) -> BlockSparseMatrix {
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n {
        entries.push((i, i, 2.0));
        if i + 1 < n {
            entries.push((i, i + 1, -1.0));
            entries.push((i + 1, i, -1.0));
        }
    }
    if periodic && n > 2 {
        entries.push((0, n - 1, -1.0));
        entries.push((n - 1, 0, -1.0));
    }
    BlockSparseMatrix::from_coo_with_hint(n, &entries, Symmetry::Symmetric).expect("chain")
}

/// n x n identity.
pub fn identity(n: usize) -> BlockSparseMatrix {
    BlockSparseMatrix::from_coo_with_hint(
        n,
        &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>(),
        Symmetry::Symmetric,
    )
    .expect("identity")
}

/// Random sparse matrix made strictly diagonally dominant: `extra_per_row`
/// off-diagonal entries per row plus a dominant diagonal.
pub fn random_diag_dominant(n: usize, extra_per_row: usize, seed: u64) -> BlockSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n * (extra_per_row + 1));
    let mut row_abs = vec![0.0f64; n];
    for i in 0..n {
        for _ in 0..extra_per_row {
            let j = rng.gen_range(0..n);
            if j == i {
                continue;
            }
            let v: f64 = rng.gen_range(-1.0..1.0);
            row_abs[i] += v.abs();
            entries.push((i, j, v));
        }
    }
    for i in 0..n {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        entries.push((i, i, sign * (row_abs[i] + rng.gen_range(1.0..2.0))));
    }
    BlockSparseMatrix::from_coo(n, &entries).expect("random matrix")
}

/// Deterministic manufactured solution: x* with unif(-1,1) entries and
/// b = A x*.
pub fn manufactured_rhs(m: &BlockSparseMatrix, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = m.matvec(&x);
    (b, x)
}

/// Zero-mean variant of [`manufactured_rhs`]; appropriate for periodic
/// pure-diffusion operators whose solution is defined up to a constant.
pub fn manufactured_rhs_zero_mean(m: &BlockSparseMatrix, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in &mut x {
        *v -= mean;
    }
    let b = m.matvec(&x);
    (b, x)
}
