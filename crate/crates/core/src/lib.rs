//! Lumped-parameter simulation of pneumatic networks with bistable
//! snap-through dome actuators, plus gait and PV-loop analysis.

pub mod analysis;
pub mod elements;
pub mod gait;
pub mod netsim;
