//! The book under `book/`, mounted as rustdoc modules. Each module's docs
//! are one chapter's markdown, so `cargo test` compiles and runs every code
//! block in the guide and the examples cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/trees.md")]
pub mod trees {}

#[doc = include_str!("../../../book/src/tags.md")]
pub mod tags {}

#[doc = include_str!("../../../book/src/grafting.md")]
pub mod grafting {}

#[doc = include_str!("../../../book/src/labeling.md")]
pub mod labeling {}

#[doc = include_str!("../../../book/src/extraction.md")]
pub mod extraction {}

#[doc = include_str!("../../../book/src/decoding.md")]
pub mod decoding {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
