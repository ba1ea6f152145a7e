//! Guide chapters, compiled as doc-tests so their snippets stay current.

#[doc = include_str!("../../../book/src/sharing.md")]
pub struct Sharing;

#[doc = include_str!("../../../book/src/gates.md")]
pub struct Gates;

#[doc = include_str!("../../../book/src/compatibility.md")]
pub struct Compatibility;

#[doc = include_str!("../../../book/src/protocol.md")]
pub struct Protocol;

#[doc = include_str!("../../../book/src/oracles.md")]
pub struct Oracles;

#[doc = include_str!("../../../book/src/simulation.md")]
pub struct Simulation;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
