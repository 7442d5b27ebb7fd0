//! Tensor-network kernels: dense contractions and factorizations, Krylov
//! exponentials, matrix product states and operators.

pub mod effective;
pub mod krylov;
pub mod linalg;
pub mod mpo;
pub mod mps;

pub use krylov::{krylov_expm_apply, TimeDirection};
pub use linalg::{contract, svd_truncate, DenseTensor, SvdTruncation};
pub use mpo::{build_mpo, expectation, ChainLayout, MatrixProductOperator, SiteKind, SiteOrdering};
pub use mps::{inner_product, MatrixProductState};
