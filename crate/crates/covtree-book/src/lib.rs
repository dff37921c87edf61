// mdbook cannot run a chapter's code blocks against the real crate, so
// each chapter is included here as module documentation and `cargo test
// --doc` runs every snippet. One module per chapter keeps failures
// attributable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/composition.md")]
pub mod composition {}

#[doc = include_str!("../../../book/src/grammar.md")]
pub mod grammar {}

#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/case-studies.md")]
pub mod case_studies {}
