//! Deterministic driving-context simulator for two-phase point-and-select
//! input of roadside objects.
//!
//! A driver indicates a building with a calibrated finger ray (rough
//! pointing), the nearest-angle object becomes a candidate on a frozen
//! snapshot of the front view, and the driver adjusts the candidate with a
//! D-pad before confirming it (fine selection). Around that interaction the
//! crate provides the experimental apparatus: a procedural course and
//! building placement, a kinematic vehicle, a task protocol with
//! success/wrong/missed outcomes, driving and task metrics, synthetic agents,
//! hashed event logs with bit-exact replay, and a live session server.
//!
//! Modules map onto the simulator's subsystems:
//!
//! * [`world`]: course and scene generation, path geometry queries.
//! * [`vehicle`]: bicycle-model stepping and the speed alarm.
//! * [`pointing`]: finger ray, calibration, minimum-angle resolution.
//! * [`session`]: selection state machine and the target task controller.
//! * [`metrics`]: lane keeping, speed keeping, success rate, completion times.
//! * [`harness`]: session loop, agents, logging, replay and the live server.

pub mod detmath;
pub mod geom;
pub mod harness;
pub mod metrics;
pub mod pointing;
pub mod rng;
pub mod session;
pub mod vehicle;
pub mod world;

pub use geom::Vec3;
