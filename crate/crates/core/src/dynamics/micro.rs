use super::idm::{idm_acceleration, IdmParams};

/// How a vehicle's motion is decided during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Control {
    /// Car following only.
    #[default]
    Free,
    /// Car following plus a virtual obstacle at the line it may not pass.
    StopAt(f64),
    /// Follows a booked schedule: reach `target` at the end of the tick,
    /// moving at `speed`, blocked only by the vehicle ahead.
    Track { target: f64, speed: f64 },
    /// Position and speed are set by the caller to their end-of-tick values.
    Scripted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroVehicle {
    pub id: u64,
    /// Front position along the lane, m.
    pub position: f64,
    pub speed: f64,
    pub preferred: f64,
    pub length: f64,
    pub control: Control,
}

/// Largest end-of-tick speed from which the vehicle can still stop at
/// `line` braking at `decel`, assuming linear speed change over the tick.
pub fn stop_line_speed(x: f64, v: f64, line: f64, decel: f64, dt: f64) -> f64 {
    // x + (v + w) dt / 2 + w² / (2 decel) ≤ line
    let room = line - x - v * dt / 2.0;
    if room <= 0.0 {
        return 0.0;
    }
    let disc = dt * dt / 4.0 + 2.0 * room / decel;
    (decel * (-dt / 2.0 + disc.sqrt())).max(0.0)
}

fn snap(x: f64, quantum: f64, floor: f64, ceil: f64) -> f64 {
    if quantum <= 0.0 {
        return x.clamp(floor, ceil);
    }
    let mut s = (x / quantum).round() * quantum;
    if s > ceil + 1e-9 {
        s = (ceil / quantum + 1e-9).floor() * quantum;
    }
    s.max(floor)
}

/// Advances one lane by `dt`. `lane` must be ordered leader first. Positions
/// are snapped to a grid of `quantum` metres (0 disables snapping).
pub fn micro_step(lane: &mut [MicroVehicle], params: &IdmParams<f64>, dt: f64, quantum: f64) {
    let old: Vec<(f64, f64, f64)> = lane.iter().map(|v| (v.position, v.speed, v.length)).collect();
    let mut leader: Option<(f64, f64)> = None;
    for (i, veh) in lane.iter_mut().enumerate() {
        let (x, v, _) = old[i];
        let bound = leader.map_or(f64::INFINITY, |l| l.0);
        match veh.control {
            Control::Scripted => {}
            Control::Track { target, speed } => {
                // Must still be able to stop behind wherever the leader
                // could stop.
                let safe = leader.map_or(f64::INFINITY, |(end, lv)| {
                    stop_line_speed(x, v, end + lv * lv / (2.0 * params.decel), params.decel, dt)
                });
                let reach = x + (v + safe.min(speed)) / 2.0 * dt;
                let nx = target.min(bound).min(reach.max(x)).max(x);
                let w = if nx >= target - 1e-9 {
                    speed
                } else {
                    (2.0 * (nx - x) / dt - v).clamp(0.0, speed.min(safe))
                };
                veh.position = snap(nx, quantum, x, bound.max(x));
                veh.speed = w;
            }
            Control::Free | Control::StopAt(_) => {
                let mut a = if i == 0 {
                    idm_acceleration(v, f64::INFINITY, 0.0, veh.preferred, params)
                } else {
                    let (lx, lv, ll) = old[i - 1];
                    let gap = (lx - ll - x).max(1e-3);
                    idm_acceleration(v, gap, v - lv, veh.preferred, params)
                };
                let mut bound = bound;
                let mut w;
                if let Control::StopAt(line) = veh.control {
                    let gap = (line - x).max(0.0) + params.min_gap;
                    a = a.min(idm_acceleration(v, gap, v, veh.preferred, params));
                    w = (v + a * dt).max(0.0).min(stop_line_speed(x, v, line, params.decel, dt));
                    bound = bound.min(line);
                } else {
                    w = (v + a * dt).max(0.0);
                }
                let mut nx = x + (v + w) / 2.0 * dt;
                if nx > bound {
                    nx = bound.max(x);
                    w = w.min((2.0 * (nx - x) / dt - v).max(0.0));
                }
                veh.position = snap(nx, quantum, x, bound.max(x));
                veh.speed = w;
            }
        }
        leader = Some((veh.position - veh.length, veh.speed));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn car(id: u64, position: f64, speed: f64) -> MicroVehicle {
        MicroVehicle {
            id,
            position,
            speed,
            preferred: 11.0,
            length: 4.0,
            control: Control::Free,
        }
    }

    #[test]
    fn lone_vehicle_speeds_up_without_overshoot() {
        let p = IdmParams::default();
        let mut lane = vec![car(1, 0.0, 5.0)];
        let mut prev = 5.0;
        for _ in 0..200 {
            micro_step(&mut lane, &p, 1.0, 0.25);
            let v = lane[0].speed;
            assert!(v >= prev - 1e-12);
            assert!(v <= 11.0 + p.accel * 1.0);
            prev = v;
        }
        assert!((lane[0].speed - 11.0).abs() < 0.05);
        assert_eq!(lane[0].position % 0.25, 0.0);
    }

    #[test]
    fn unreserved_vehicle_stops_at_the_line() {
        let p = IdmParams::default();
        let mut lane = vec![MicroVehicle {
            control: Control::StopAt(100.0),
            ..car(1, 0.0, 11.0)
        }];
        for _ in 0..120 {
            micro_step(&mut lane, &p, 1.0, 0.25);
            assert!(lane[0].position <= 100.0);
        }
        assert_eq!(lane[0].speed, 0.0);
        assert!(lane[0].position > 90.0, "stopped at {}", lane[0].position);
    }

    #[test]
    fn tracked_vehicle_follows_its_schedule() {
        let p = IdmParams::default();
        // Booked to reach 100 m at t = 10 s moving at 8 m/s.
        let mut lane = vec![MicroVehicle {
            speed: 8.0,
            ..car(1, 20.0, 8.0)
        }];
        for k in 1..=9 {
            let target = 100.0 - 8.0 * (10.0 - k as f64);
            lane[0].control = Control::Track { target, speed: 8.0 };
            micro_step(&mut lane, &p, 1.0, 0.25);
            assert_eq!(lane[0].position, target);
            assert_eq!(lane[0].speed, 8.0);
        }
    }

    #[test]
    fn tracked_vehicle_is_held_by_its_leader() {
        let p = IdmParams::default();
        let mut lane = vec![car(1, 50.0, 0.0), car(2, 30.0, 8.0)];
        lane[0].control = Control::StopAt(50.0);
        lane[1].control = Control::Track { target: 60.0, speed: 10.0 };
        micro_step(&mut lane, &p, 1.0, 0.25);
        assert!(lane[1].position <= 46.0);
        assert!(lane[1].position + lane[1].speed.powi(2) / (2.0 * p.decel) <= 46.0 + 1e-9);
    }

    #[test]
    fn scripted_vehicle_is_left_alone() {
        let p = IdmParams::default();
        let mut lane = vec![
            MicroVehicle {
                control: Control::Scripted,
                ..car(1, 103.0, 5.0)
            },
            car(2, 90.0, 11.0),
        ];
        micro_step(&mut lane, &p, 1.0, 0.25);
        assert_eq!(lane[0].position, 103.0);
        assert!(lane[1].position <= 99.0);
    }

    #[test]
    fn stop_line_speed_is_stoppable() {
        for (x, v) in [(0.0, 11.0), (80.0, 11.0), (95.0, 3.0), (99.0, 0.5)] {
            let w = stop_line_speed(x, v, 100.0, 3.0, 1.0);
            let after = x + (v + w) / 2.0;
            assert!(after + w * w / 6.0 <= 100.0 + 1e-9);
        }
        assert_eq!(stop_line_speed(100.0, 2.0, 100.0, 3.0, 1.0), 0.0);
    }

    #[test]
    fn fuzzed_following_never_overlaps() {
        let p = IdmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let mut pos = 300.0;
            let mut lane: Vec<MicroVehicle> = (0..n)
                .map(|i| {
                    let c = MicroVehicle {
                        preferred: rng.random_range(8.0..14.0),
                        ..car(i, pos, rng.random_range(0.0..14.0))
                    };
                    pos -= 4.0 + rng.random_range(0.0..30.0);
                    c
                })
                .collect();
            // The leader is stopped at a line just ahead.
            lane[0].speed = 0.0;
            lane[0].control = Control::StopAt(300.0);
            for tick in 0..1000 {
                if tick == 500 {
                    lane[0].control = Control::Free;
                }
                micro_step(&mut lane, &p, 1.0, 0.25);
                for w in lane.windows(2) {
                    assert!(w[1].position + w[1].length <= w[0].position + 1e-9);
                    assert!(w[1].speed >= 0.0);
                }
            }
        }
    }
}
