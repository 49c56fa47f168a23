/// Constant-speed traversal of a booked intersection path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub arrival_time: f64,
    pub speed: f64,
    /// Stop line to rear clearing the box, m.
    pub distance: f64,
}

impl Crossing {
    pub fn exit_time(&self) -> f64 {
        self.arrival_time + self.distance / self.speed
    }

    /// Ticks of length `dt` overlapping the traversal.
    pub fn occupied_steps(&self, dt: f64) -> u64 {
        let k0 = (self.arrival_time / dt + 1e-9).floor() as u64;
        let k1 = ((self.exit_time() / dt - 1e-9).ceil() as u64).max(k0 + 1);
        k1 - k0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossingProgress {
    NotStarted,
    /// Metres travelled past the stop line.
    Traversing(f64),
    /// Cleared the box at `exit_time`, `beyond` metres past the far edge.
    Done { exit_time: f64, beyond: f64 },
}

/// Where a vehicle following its booking exactly is at time `now`.
pub fn cell_crossing(crossing: &Crossing, now: f64) -> CrossingProgress {
    if now < crossing.arrival_time {
        return CrossingProgress::NotStarted;
    }
    let travelled = crossing.speed * (now - crossing.arrival_time);
    if travelled >= crossing.distance - 1e-9 {
        CrossingProgress::Done {
            exit_time: crossing.exit_time(),
            beyond: (travelled - crossing.distance).max(0.0),
        }
    } else {
        CrossingProgress::Traversing(travelled)
    }
}
