//! Fault-tolerant air-conditioning control: plant model, controller synthesis,
//! fault isolation, compensator design and the closed-loop experiment runner.

pub mod controller;
pub mod fdi;
pub mod gimc;
pub mod harness;
pub mod plant;
pub mod props;
