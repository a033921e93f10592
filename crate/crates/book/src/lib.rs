//! The guide in `book/src`, compiled so that its listings run as doctests.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/cp-maps.md")]
pub mod cp_maps {}

#[doc = include_str!("../../../book/src/superharmonic.md")]
pub mod superharmonic {}

#[doc = include_str!("../../../book/src/absolutely-continuous.md")]
pub mod absolutely_continuous {}

#[doc = include_str!("../../../book/src/markov.md")]
pub mod markov {}

#[doc = include_str!("../../../book/src/similarity.md")]
pub mod similarity {}

#[doc = include_str!("../../../book/src/dilation.md")]
pub mod dilation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
