// mdbook renders book/ but cannot run its code blocks as tests. Including
// each chapter as a doc attribute turns every ```rust fence into an ordinary
// doctest of this crate, so `cargo test --doc -p poincare-guide` keeps the
// book and the library in lockstep. One module per chapter so a failing
// snippet names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/mixtures.md")]
pub mod mixtures {}

#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/clt.md")]
pub mod clt {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
