use crate::market::{speed_density, FundamentalDiagram};
use crate::num::Scalar;
use crate::roadnet::{LinkId, NetworkGraph};

/// Target speed interpolated along the link between the current and next
/// link reference speeds: (1 − x/ℓ) y_cur + (x/ℓ) y_next.
pub fn meso_target_speed<T: Scalar>(x: T, length: T, y_current: T, y_next: T) -> T {
    let f = x / length;
    (T::one() - f) * y_current + f * y_next
}

/// Trapezoidal position update x + (v + v') Δt / 2.
pub fn meso_position<T: Scalar>(x: T, v: T, v_new: T, dt: T) -> T {
    x + (v + v_new) * dt / T::lit(2.0)
}

/// min(v_p, v(μ), v_max) with the speed law anchored at the link's v_max.
pub fn reference_speed<T: Scalar>(preferred: T, mu_per_lane: T, mu_jam: T, vmax: T) -> T {
    let d = FundamentalDiagram::new(mu_jam, vmax);
    preferred.min(speed_density(mu_per_lane, &d)).min(vmax)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesoVehicle {
    pub link: LinkId,
    pub x: f64,
    pub v: f64,
    pub accel: f64,
    pub decel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MesoStep {
    Within,
    /// Passed the link end by this many metres; `x` is left at the end.
    Overflow(f64),
}

/// Moves the speed toward `target` within the acceleration limits and
/// advances the position.
pub fn meso_step(vehicle: &mut MesoVehicle, target: f64, length: f64, dt: f64) -> MesoStep {
    let dv = (target - vehicle.v).clamp(-vehicle.decel * dt, vehicle.accel * dt);
    let v_new = (vehicle.v + dv).max(0.0);
    let x = meso_position(vehicle.x, vehicle.v, v_new, dt);
    vehicle.v = v_new;
    if x > length {
        vehicle.x = length;
        MesoStep::Overflow(x - length)
    } else {
        vehicle.x = x;
        MesoStep::Within
    }
}

/// Vehicle counts per link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkCounts {
    counts: Vec<u32>,
}

impl LinkCounts {
    pub fn new(links: usize) -> Self {
        LinkCounts { counts: vec![0; links] }
    }

    pub fn count(&self, link: LinkId) -> u32 {
        self.counts[link.0]
    }

    pub fn enter(&mut self, link: LinkId) {
        self.counts[link.0] += 1;
    }

    pub fn leave(&mut self, link: LinkId) {
        self.counts[link.0] -= 1;
    }

    /// Moves an overflowing vehicle onto `next` at the overflow remainder.
    pub fn handoff(&mut self, vehicle: &mut MesoVehicle, next: LinkId, remainder: f64) {
        self.leave(vehicle.link);
        self.enter(next);
        vehicle.link = next;
        vehicle.x = remainder;
    }

    /// Vehicles per km per lane.
    pub fn density(&self, graph: &NetworkGraph, link: LinkId) -> f64 {
        let l = graph.link(link);
        self.count(link) as f64 / (l.length_m / 1000.0 * l.lanes as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::graph::tests::{doc, link};
    use crate::roadnet::load_network;

    #[test]
    fn target_speed_examples() {
        assert_eq!(meso_target_speed(0.0, 500.0, 10.0, 14.0), 10.0);
        assert_eq!(meso_target_speed(500.0, 500.0, 10.0, 14.0), 14.0);
        assert_eq!(meso_target_speed(250.0, 500.0, 10.0, 14.0), 12.0);
        assert_eq!(meso_target_speed(250.0f32, 500.0, 10.0, 14.0), 12.0);
    }

    #[test]
    fn position_examples() {
        assert_eq!(meso_position(0.0, 10.0, 12.0, 1.0), 11.0);
        assert_eq!(meso_position(3.0, 7.0, 7.0, 1.0), 10.0);
    }

    #[test]
    fn reference_speed_examples() {
        assert_eq!(reference_speed(10.0, 0.0, 120.0, 15.0), 10.0);
        assert_eq!(reference_speed(10.0, 120.0, 120.0, 15.0), 0.0);
        assert_eq!(reference_speed(20.0, 60.0, 120.0, 15.0), 7.5);
    }

    #[test]
    fn overflow_hands_off_with_remainder() {
        let g = load_network(&doc(
            &[("A", 0.0, 0.0), ("B", 500.0, 0.0), ("C", 1000.0, 0.0)],
            vec![link("AB", "A", "B", 500.0), link("BC", "B", "C", 500.0)],
        ))
        .unwrap();
        let (ab, bc) = (g.link_id("AB").unwrap(), g.link_id("BC").unwrap());
        let mut counts = LinkCounts::new(2);
        counts.enter(ab);
        let mut v = MesoVehicle {
            link: ab,
            x: 495.0,
            v: 10.0,
            accel: 2.0,
            decel: 3.0,
        };
        let step = meso_step(&mut v, 12.0, 500.0, 1.0);
        assert_eq!(step, MesoStep::Overflow(6.0));
        counts.handoff(&mut v, bc, 6.0);
        assert_eq!((v.link, v.x), (bc, 6.0));
        assert_eq!((counts.count(ab), counts.count(bc)), (0, 1));
        assert_eq!(counts.density(&g, bc), 2.0);
    }

    #[test]
    fn speed_change_is_rate_limited() {
        let mut v = MesoVehicle {
            link: LinkId(0),
            x: 0.0,
            v: 10.0,
            accel: 1.5,
            decel: 3.0,
        };
        meso_step(&mut v, 20.0, 1000.0, 1.0);
        assert_eq!(v.v, 11.5);
        meso_step(&mut v, 0.0, 1000.0, 1.0);
        assert_eq!(v.v, 8.5);
    }
}
