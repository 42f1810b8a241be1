//! CascadeLab core: a deterministic fault-injection laboratory for
//! detecting self-sustaining cascading failures in simulated
//! distributed systems.
//!
//! The pipeline, end to end:
//!
//! 1. [`scenario`] — parse a declarative scenario file describing
//!    components, handlers, loops, throw points, detectors, and test
//!    workloads; enumerate the injectable fault points.
//! 2. [`sim`] — execute test workloads under a virtual clock, with or
//!    without an injection plan, producing run traces (fault events
//!    with stitching context, per-loop iteration counts, coverage).
//! 3. [`fca`] — diff injection runs against profile runs to derive
//!    typed counterfactual causal edges between faults.
//! 4. [`alloc`] — spend a fixed test budget over (fault, test) pairs
//!    in three phases, guided by interference clustering.
//! 5. [`stitch`] / [`detect`] — connect compatible edges across tests
//!    into chains and beam-search for cycles.
//! 6. [`campaign`] — orchestrate the stages and persist versioned
//!    artifacts.

pub mod alloc;
pub mod campaign;
pub mod detect;
pub mod fca;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod stitch;

pub use scenario::{parse_scenario, Scenario};
