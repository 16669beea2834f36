//! Population-based evolution strategies where diversity is the determinant
//! of a kernel matrix over behavioral embeddings.

pub mod bandit;
pub mod diversity;
pub mod embeddings;
pub mod envs;
pub mod error;
pub mod es;
pub mod exp;
pub mod kernels;
pub mod policy;

pub use error::{DvdError, Result};
