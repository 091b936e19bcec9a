//! Certified lower bounds on the worst-case roundoff error of polynomial programs.

pub mod bench;
pub mod expr;
pub mod float;
pub mod geneig;
pub mod interval;
pub mod linalg;
pub mod moments;
pub mod mvbeta;
pub mod pipeline;
pub mod poly;
pub mod robsdp;
pub mod rounding;
