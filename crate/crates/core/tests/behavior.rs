//! Solver-level behavior across problem families: accuracy at a fixed
//! truncation precision should be a property of the family, not the size.

mod common;

use common::relative_residual;
use hlu::problems::{self, Boundary};
use hlu::{factorize, DepthSpec, FactorConfig, PartitionStrategy, TruncationRule};

fn config(eps: f64, target_leaf: usize) -> FactorConfig {
    FactorConfig {
        rule: TruncationRule::RelativeSigma(eps),
        depth: DepthSpec::TargetLeaf(target_leaf),
        seed: 0,
        instrument: false,
        partition: PartitionStrategy::GraphBisection,
    }
}

#[test]
fn residual_barely_changes_with_size_3d() {
    // growing 3D Poisson problems at fixed eps: error and residual stay
    // within one order of magnitude of each other across sizes
    let eps = 1e-4;
    let mut residuals = Vec::new();
    let mut errors = Vec::new();
    for side in [8usize, 11, 14, 17] {
        let m = problems::poisson3d(side, side, side, Boundary::Dirichlet);
        let (b, x_true) = problems::manufactured_rhs(&m, 4);
        let (fact, _) = factorize(&m, &config(eps, 32)).unwrap();
        let x = fact.solve(&b).unwrap();
        residuals.push(relative_residual(&m, &x, &b));
        let (err, _) = hlu::metrics(&x, &x_true, &m, &b);
        errors.push(err);
    }
    for series in [&residuals, &errors] {
        let max = series.iter().cloned().fold(0.0f64, f64::max);
        let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min <= 10.0,
            "accuracy drifted across sizes: {series:?}"
        );
    }
}

#[test]
fn residual_scaling_constant_stable_2d() {
    // fit residual = C * eps on the smallest instance; the constant holds
    // within an order of magnitude for larger sizes and other eps values
    let base = problems::poisson2d(32, 32, Boundary::Dirichlet);
    let (b0, _) = problems::manufactured_rhs(&base, 9);
    let (f0, _) = factorize(&base, &config(1e-4, 32)).unwrap();
    let c = relative_residual(&base, &f0.solve(&b0).unwrap(), &b0) / 1e-4;

    for side in [48usize, 64] {
        for eps in [1e-3, 1e-5] {
            let m = problems::poisson2d(side, side, Boundary::Dirichlet);
            let (b, _) = problems::manufactured_rhs(&m, 9);
            let (fact, _) = factorize(&m, &config(eps, 32)).unwrap();
            let res = relative_residual(&m, &fact.solve(&b).unwrap(), &b);
            let ratio = res / (c * eps);
            assert!(
                (0.1..=10.0).contains(&ratio),
                "side {side}, eps {eps:e}: residual {res:e} vs fit {:.3e} (ratio {ratio:.2})",
                c * eps
            );
        }
    }
}
