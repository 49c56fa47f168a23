//! Intersection space-time occupancy and the reservation protocol.

mod geometry;
mod protocol;
mod table;

pub use geometry::{
    ApproachSpec, GeometrySpec, IntersectionGeometry, PathKey, Side, TrajectoryPath, Turn,
};
pub use protocol::{
    consume_reservation, fcfs_process, reservation_distance, Confirmation, DistanceFilter,
    RejectReason, Rejection, Reply, ReservationRequest,
};
pub use table::{conflicts, trajectory_tiles, Bundle, Reservation, ReservationTable, TileSlot, VehicleId};

pub(crate) use protocol::{confirmation, log_reply, log_request};
