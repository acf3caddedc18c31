//! Behavioral systems tools for discrete-time linear time-periodic systems and
//! the data-driven predictive controllers built on them.

pub mod behavior;
pub mod bench;
pub mod control;
pub mod datapipe;
pub mod error;
pub mod excitation;
pub mod linalg;
pub mod model;
pub mod plant;
pub mod qp;
pub mod testbed;

pub use error::{Error, Result};
pub use model::{LiftedSystem, LtpSystem, Trajectory};
