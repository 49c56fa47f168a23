//! Vehicle motion models.

mod crossing;
mod idm;
mod meso;
mod micro;

pub use crossing::{cell_crossing, Crossing, CrossingProgress};
pub use idm::{idm_acceleration, IdmParams};
pub use meso::{meso_position, meso_step, meso_target_speed, reference_speed, LinkCounts, MesoStep, MesoVehicle};
pub use micro::{micro_step, stop_line_speed, Control, MicroVehicle};
