//! Cascaded online actor-critic flight control for a longitudinal airframe,
//! with a Lyapunov-guided actor loss and a discretization-aware decrease
//! check.
//!
//! The outer agent tracks an angle-of-attack reference by commanding pitch
//! rate; the inner agent tracks the (low-pass filtered) pitch-rate command
//! with the control surface. Each agent pairs a critic, an actor and an
//! online incremental model of its loop, and all three learn every control
//! step.
//!
//! ```
//! use lyaflight::cascade::{run_episode, EpisodeConfig};
//!
//! let cfg = EpisodeConfig { duration: 0.05, ..EpisodeConfig::default() };
//! let episode = run_episode(&cfg).unwrap();
//! assert_eq!(episode.log.len(), 50);
//! assert!(episode.termination.is_completed());
//! ```

pub mod agent;
pub mod cascade;
pub mod error;
pub mod harness;
pub mod incremental;
pub mod lyapunov;
pub mod network;
pub mod plant;
pub mod reference;
pub mod selftest;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/reference.md")]
    mod reference {}
    #[doc = include_str!("../../../book/src/incremental.md")]
    mod incremental {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/agent.md")]
    mod agent {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    mod lyapunov {}
    #[doc = include_str!("../../../book/src/cascade.md")]
    mod cascade {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
