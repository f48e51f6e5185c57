#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod distributions;
pub mod error;
pub mod market;
pub mod oracle;
pub mod qmc;
pub mod quadrature;
pub mod regions;
pub mod runner;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/demand.md")]
    mod demand {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/comparative-statics.md")]
    mod comparative_statics {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
