pub mod agents;
pub mod corpus;
pub mod error;
pub mod game;
pub mod harness;
pub mod metrics;
pub mod llm;
pub(crate) mod mcts;
pub mod solver;
pub mod store;

pub use error::{Error, Result};

/// 64-bit FNV-1a, used where a hash must be stable across builds and
/// platforms (derived seeds, stub replies).
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/prompting.md")]
    mod prompting {}
    #[doc = include_str!("../../../book/src/runs.md")]
    mod runs {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
