pub mod bounds;
pub mod calculus;
pub mod cost;
pub mod direct;
pub mod discount;
pub mod error;
pub mod grid;
pub mod penalty;
pub mod radial;
mod scheme;
pub mod simulate;
pub mod tolerances;

pub use cost::{CostFamily, CostFunction};
pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use tolerances::SolverTolerances;

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/discounted.md")]
    mod discounted {}
    #[doc = include_str!("../../../book/src/penalty.md")]
    mod penalty {}
    #[doc = include_str!("../../../book/src/vanishing.md")]
    mod vanishing {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
