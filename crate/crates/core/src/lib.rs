pub mod channels;
pub mod error;
pub mod fock;
pub mod phase_space;
pub mod sampler;
pub mod tes;
pub mod tomography;
pub mod special;

pub use error::{Error, Result};

// The book's chapters are compiled as doctests so their examples stay true.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/subtraction.md")]
    mod subtraction {}
    #[doc = include_str!("../../../book/src/phase_space.md")]
    mod phase_space {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/tomography.md")]
    mod tomography {}
    #[doc = include_str!("../../../book/src/tes.md")]
    mod tes {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
