//! Hierarchical approximate LU factorization for sparse matrices.
//!
//! The factorization runs a block Gauss elimination over a binary cluster
//! hierarchy. Fill-in blocks that couple well-separated clusters are
//! compressed with truncated SVDs and re-expressed through a small set of
//! auxiliary variables at the parent level (extended sparsification), so the
//! block sparsity of the system is preserved all the way to the root. The
//! result is a tunable-accuracy direct solver: a single factorization at
//! precision `epsilon` supports repeated solves, and a loose factorization
//! makes an effective black-box left preconditioner for GMRES.
//!
//! Typical usage:
//!
//! ```
//! use hlu::{factorize, FactorConfig, problems};
//!
//! let a = problems::poisson2d(16, 16, hlu::problems::Boundary::Dirichlet);
//! let (b, x_true) = problems::manufactured_rhs(&a, 7);
//! let (fact, _stats) = factorize(&a, &FactorConfig::with_epsilon(1e-10)).unwrap();
//! let x = fact.solve(&b).unwrap();
//! let (err, _res) = hlu::metrics(&x, &x_true, &a, &b);
//! assert!(err < 1e-6);
//! ```

pub mod dense;
pub mod error;
pub mod factor;
pub mod htree;
pub mod krylov;
pub mod partition;
pub mod problems;
pub mod solve;
pub mod sparse;
pub mod trace;

pub use dense::{gemm, lu_factor, truncated_svd, DenseBlock, LowRankFactor, LuFactor, SvdCutoff};
pub use error::{Error, Result};
pub use factor::{
    factor_stats_json, factorize, DepthSpec, FactorConfig, FactorStats, Factorization,
    LevelStats, PartitionStrategy, TruncationRule,
};
pub use htree::{HTree, NodeId, NodeKind};
pub use krylov::{gmres_solve, metrics, GmresConfig, GmresResult, LinearOp};
pub use partition::{build_nested_partitioning, choose_depth, NestedPartitioning};
pub use solve::SolveSession;
pub use sparse::{
    build_adjacency, extract_block, load_matrix_market, save_matrix_market, AdjacencyGraph,
    BlockSparseMatrix, Partitioning, Symmetry,
};
pub use trace::{TraceEvent, TraceLog};
