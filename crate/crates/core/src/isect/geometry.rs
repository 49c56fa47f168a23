use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the intersection box a road attaches to, in counter-clockwise
/// order starting from the south edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    South,
    East,
    North,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Side {
        Self::ALL[i % 4]
    }

    /// Outward unit vector of this side, pointing away from the box centre.
    pub fn outward(self) -> (f64, f64) {
        match self {
            Side::South => (0.0, -1.0),
            Side::East => (1.0, 0.0),
            Side::North => (0.0, 1.0),
            Side::West => (-1.0, 0.0),
        }
    }

    /// Side a vehicle entering from `self` leaves by when making `turn`
    /// (right-hand traffic).
    pub fn exit_for(self, turn: Turn) -> Side {
        let offset = match turn {
            Turn::Right => 1,
            Turn::Straight => 2,
            Turn::Left => 3,
        };
        Side::from_index(self.index() + offset)
    }

    /// Turn taken when entering from `self` and leaving by `exit`.
    pub fn turn_to(self, exit: Side) -> Option<Turn> {
        match (exit.index() + 4 - self.index()) % 4 {
            1 => Some(Turn::Right),
            2 => Some(Turn::Straight),
            3 => Some(Turn::Left),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Left, Turn::Straight, Turn::Right];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachSpec {
    /// Name of a link touching the intersection node.
    pub link: String,
    pub side: Side,
}

/// Geometry block of the scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "defaults::tile_size")]
    pub tile_size_m: f64,
    #[serde(default = "defaults::lane_width")]
    pub lane_width_m: f64,
    #[serde(default = "defaults::vehicle_length")]
    pub vehicle_length_m: f64,
    #[serde(default = "defaults::vehicle_width")]
    pub vehicle_width_m: f64,
    /// Explicit side assignments; unlisted roads are placed by compass bearing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub approaches: Vec<ApproachSpec>,
}

mod defaults {
    pub fn tile_size() -> f64 {
        0.25
    }
    pub fn lane_width() -> f64 {
        3.0
    }
    pub fn vehicle_length() -> f64 {
        4.0
    }
    pub fn vehicle_width() -> f64 {
        2.0
    }
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            tile_size_m: defaults::tile_size(),
            lane_width_m: defaults::lane_width(),
            vehicle_length_m: defaults::vehicle_length(),
            vehicle_width_m: defaults::vehicle_width(),
            approaches: Vec::new(),
        }
    }
}

impl GeometrySpec {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("tile_size_m", self.tile_size_m),
            ("lane_width_m", self.lane_width_m),
            ("vehicle_length_m", self.vehicle_length_m),
            ("vehicle_width_m", self.vehicle_width_m),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositive {
                    element: "intersection geometry".into(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Line {
        from: (f64, f64),
        to: (f64, f64),
    },
    Arc {
        centre: (f64, f64),
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to.0 - from.0).hypot(to.1 - from.1),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        match *self {
            Segment::Line { from, to } => {
                let len = self.length();
                let dir = if len > 0.0 {
                    ((to.0 - from.0) / len, (to.1 - from.1) / len)
                } else {
                    (0.0, 1.0)
                };
                ((from.0 + dir.0 * s, from.1 + dir.1 * s), dir)
            }
            Segment::Arc {
                centre,
                radius,
                start,
                sweep,
            } => {
                let theta = start + sweep.signum() * s / radius;
                let p = (centre.0 + radius * theta.cos(), centre.1 + radius * theta.sin());
                let dir = if sweep > 0.0 {
                    (-theta.sin(), theta.cos())
                } else {
                    (theta.sin(), -theta.cos())
                };
                (p, dir)
            }
        }
    }
}

/// Centre-line of a vehicle's path through the box: entry segment, optional
/// circular arc, exit segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath {
    segments: Vec<Segment>,
    length: f64,
}

impl TrajectoryPath {
    fn new(segments: Vec<Segment>) -> Self {
        let segments: Vec<Segment> = segments.into_iter().filter(|s| s.length() > 1e-12).collect();
        let length = segments.iter().map(Segment::length).sum();
        TrajectoryPath { segments, length }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Point and unit heading at arc length `s`. Outside `[0, length]` the
    /// path is extended straight along its first or last heading.
    pub fn point_at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        if s <= 0.0 {
            let (p, d) = self.segments[0].at(0.0);
            return ((p.0 + d.0 * s, p.1 + d.1 * s), d);
        }
        let mut rest = s;
        for seg in &self.segments {
            let len = seg.length();
            if rest <= len {
                return seg.at(rest);
            }
            rest -= len;
        }
        let last = self.segments.last().unwrap();
        let (p, d) = last.at(last.length());
        ((p.0 + d.0 * rest, p.1 + d.1 * rest), d)
    }

    fn rotated(&self, quarter_turns: usize, centre: f64) -> Self {
        let rot = |p: (f64, f64)| {
            let (mut x, mut y) = (p.0 - centre, p.1 - centre);
            for _ in 0..quarter_turns % 4 {
                let nx = -y;
                y = x;
                x = nx;
            }
            (x + centre, y + centre)
        };
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Line { from, to } => Segment::Line {
                    from: rot(from),
                    to: rot(to),
                },
                Segment::Arc {
                    centre: c,
                    radius,
                    start,
                    sweep,
                } => Segment::Arc {
                    centre: rot(c),
                    radius,
                    start: start + FRAC_PI_2 * (quarter_turns % 4) as f64,
                    sweep,
                },
            })
            .collect();
        TrajectoryPath {
            segments,
            length: self.length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey {
    pub side: Side,
    pub lane: u8,
    pub turn: Turn,
}

/// A tile bitset restricted to the words that carry bits.
#[derive(Debug, Clone, Default)]
struct Footprint {
    first_word: usize,
    words: Vec<u64>,
}

#[derive(Debug, Clone)]
struct PathTiles {
    path: TrajectoryPath,
    /// Footprint with the vehicle front at `j * quantum` along the path.
    footprints: Vec<Footprint>,
}

/// Square intersection box with per-side lane counts, the legal trajectories
/// and their precomputed tile footprints.
#[derive(Debug, Clone)]
pub struct IntersectionGeometry {
    spec: GeometrySpec,
    lanes_in: [u8; 4],
    lanes_out: [u8; 4],
    width: f64,
    grid: usize,
    quantum: f64,
    words: usize,
    paths: HashMap<PathKey, PathTiles>,
}

impl IntersectionGeometry {
    /// Builds the box for the given incoming/outgoing lane counts per side
    /// (indexed by [`Side::index`]; zero means no road on that side).
    pub fn new(spec: &GeometrySpec, lanes_in: [u8; 4], lanes_out: [u8; 4]) -> Result<Self> {
        spec.validate()?;
        let widest = lanes_in.iter().chain(lanes_out.iter()).copied().max().unwrap_or(0);
        if widest == 0 {
            return Err(Error::Schema("intersection without lanes".into()));
        }
        let width = 2.0 * widest as f64 * spec.lane_width_m;
        let grid = (width / spec.tile_size_m - 1e-9).ceil() as usize;
        if grid * grid >= 1 << 24 {
            return Err(Error::Schema(format!("tile grid of {grid}x{grid} is too fine")));
        }
        let quantum = spec.tile_size_m.min(0.5);
        let words = (grid * grid + 63) / 64;
        let mut geometry = IntersectionGeometry {
            spec: spec.clone(),
            lanes_in,
            lanes_out,
            width,
            grid,
            quantum,
            words,
            paths: HashMap::new(),
        };
        for side in Side::ALL {
            for lane in 0..lanes_in[side.index()] {
                for turn in Turn::ALL {
                    let key = PathKey { side, lane, turn };
                    if geometry.is_legal(key) {
                        let path = geometry.build_path(key);
                        let footprints = geometry.sweep(&path);
                        geometry.paths.insert(key, PathTiles { path, footprints });
                    }
                }
            }
        }
        Ok(geometry)
    }

    /// Default single-intersection box: four approaches with three lanes in
    /// each direction.
    pub fn four_way(spec: &GeometrySpec, lanes: u8) -> Result<Self> {
        Self::new(spec, [lanes; 4], [lanes; 4])
    }

    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn tile_size(&self) -> f64 {
        self.spec.tile_size_m
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn tile_count(&self) -> usize {
        self.grid * self.grid
    }

    pub fn vehicle_length(&self) -> f64 {
        self.spec.vehicle_length_m
    }

    pub fn lanes_in(&self, side: Side) -> u8 {
        self.lanes_in[side.index()]
    }

    pub fn lanes_out(&self, side: Side) -> u8 {
        self.lanes_out[side.index()]
    }

    /// Lane policy: left turns from the left-most lane, right turns from the
    /// right-most lane, straight from any lane; the exit side must have lanes.
    pub fn is_legal(&self, key: PathKey) -> bool {
        let n_in = self.lanes_in[key.side.index()];
        if key.lane >= n_in || self.lanes_out[key.side.exit_for(key.turn).index()] == 0 {
            return false;
        }
        match key.turn {
            Turn::Left => key.lane == 0,
            Turn::Right => key.lane == n_in - 1,
            Turn::Straight => true,
        }
    }

    /// Lane a vehicle uses for `turn` on `side`; straight traffic spreads by
    /// `spread` over all lanes.
    pub fn lane_for(&self, side: Side, turn: Turn, spread: u64) -> u8 {
        let n = self.lanes_in[side.index()].max(1);
        match turn {
            Turn::Left => 0,
            Turn::Right => n - 1,
            Turn::Straight => (spread % n as u64) as u8,
        }
    }

    pub fn path(&self, key: PathKey) -> Result<&TrajectoryPath> {
        self.paths
            .get(&key)
            .map(|p| &p.path)
            .ok_or(Error::IllegalTurn {
                side: key.side,
                lane: key.lane,
                turn: key.turn,
            })
    }

    /// Distance the front travels from the stop line until the rear clears
    /// the box.
    pub fn crossing_distance(&self, key: PathKey) -> Result<f64> {
        Ok(self.path(key)?.length() + self.spec.vehicle_length_m)
    }

    /// Tiles covered while the front moves over `[s0, s1]` along the path,
    /// OR-ed into `scratch`, which must hold `words` entries.
    pub(crate) fn sweep_into(&self, key: PathKey, s0: f64, s1: f64, scratch: &mut [u64]) -> Result<()> {
        let tiles = self.paths.get(&key).ok_or(Error::IllegalTurn {
            side: key.side,
            lane: key.lane,
            turn: key.turn,
        })?;
        let last = tiles.footprints.len() - 1;
        let j0 = ((s0 / self.quantum).floor().max(0.0) as usize).min(last);
        let j1 = ((s1 / self.quantum).ceil().max(0.0) as usize).min(last);
        for fp in &tiles.footprints[j0..=j1] {
            for (w, bits) in fp.words.iter().enumerate() {
                scratch[fp.first_word + w] |= bits;
            }
        }
        Ok(())
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }

    fn build_path(&self, key: PathKey) -> TrajectoryPath {
        let w = self.spec.lane_width_m;
        let half = self.width / 2.0;
        let exit_side = key.side.exit_for(key.turn);
        let n_out = self.lanes_out[exit_side.index()];
        let exit_lane = match key.turn {
            Turn::Left => 0,
            Turn::Right => n_out - 1,
            Turn::Straight => key.lane.min(n_out - 1),
        } as f64;
        let xe = half + (key.lane as f64 + 0.5) * w;
        let local = match key.turn {
            Turn::Straight => {
                let xq = half + (exit_lane + 0.5) * w;
                TrajectoryPath::new(vec![Segment::Line {
                    from: (xe, 0.0),
                    to: (xq, self.width),
                }])
            }
            Turn::Right => {
                let yq = half - (exit_lane + 0.5) * w;
                let r = (self.width - xe).min(yq);
                TrajectoryPath::new(vec![
                    Segment::Line {
                        from: (xe, 0.0),
                        to: (xe, yq - r),
                    },
                    Segment::Arc {
                        centre: (xe + r, yq - r),
                        radius: r,
                        start: PI,
                        sweep: -FRAC_PI_2,
                    },
                    Segment::Line {
                        from: (xe + r, yq),
                        to: (self.width, yq),
                    },
                ])
            }
            Turn::Left => {
                let yq = half + (exit_lane + 0.5) * w;
                let r = xe.min(yq);
                TrajectoryPath::new(vec![
                    Segment::Line {
                        from: (xe, 0.0),
                        to: (xe, yq - r),
                    },
                    Segment::Arc {
                        centre: (xe - r, yq - r),
                        radius: r,
                        start: 0.0,
                        sweep: FRAC_PI_2,
                    },
                    Segment::Line {
                        from: (xe - r, yq),
                        to: (0.0, yq),
                    },
                ])
            }
        };
        local.rotated(key.side.index(), half)
    }

    /// Footprints of the vehicle body at every quantised front position from
    /// the stop line until the rear leaves the box. Footprint `j` covers the
    /// body for every front position within half a quantum of `j * quantum`.
    fn sweep(&self, path: &TrajectoryPath) -> Vec<Footprint> {
        let len = self.spec.vehicle_length_m;
        let total = path.length() + len;
        let steps = (total / self.quantum).ceil() as usize;
        (0..=steps)
            .map(|j| self.footprint(path, j as f64 * self.quantum))
            .collect()
    }

    fn body(&self, path: &TrajectoryPath, s: f64) -> ((f64, f64), (f64, f64)) {
        let (front, heading) = path.point_at(s);
        let (rear, _) = path.point_at(s - self.spec.vehicle_length_m);
        let chord = (front.0 - rear.0).hypot(front.1 - rear.1);
        let axis = if chord > 1e-9 {
            ((front.0 - rear.0) / chord, (front.1 - rear.1) / chord)
        } else {
            heading
        };
        (((front.0 + rear.0) / 2.0, (front.1 + rear.1) / 2.0), axis)
    }

    fn footprint(&self, path: &TrajectoryPath, s: f64) -> Footprint {
        const SUB: usize = 4;
        let h = self.quantum / SUB as f64;
        let samples: Vec<_> = (0..=SUB)
            .map(|i| self.body(path, s - self.quantum / 2.0 + i as f64 * h))
            .collect();
        let hl = self.spec.vehicle_length_m / 2.0 + h / 2.0;
        let mut bits = vec![0u64; self.words];
        for (i, &(mid, axis)) in samples.iter().enumerate() {
            // Lateral margin for the rotation between neighbouring samples.
            let turn = |o: Option<&((f64, f64), (f64, f64))>| {
                o.map_or(0.0, |&(_, b)| (axis.0 * b.1 - axis.1 * b.0).abs())
            };
            let rot = turn(samples.get(i + 1)).max(turn(i.checked_sub(1).and_then(|k| samples.get(k))));
            let hw = self.spec.vehicle_width_m / 2.0 + hl * rot / 2.0;
            self.rasterize(mid, axis, hl, hw, &mut bits);
        }
        let Some(first) = bits.iter().position(|&b| b != 0) else {
            return Footprint::default();
        };
        let last = bits.iter().rposition(|&b| b != 0).unwrap();
        Footprint {
            first_word: first,
            words: bits[first..=last].to_vec(),
        }
    }

    /// Marks every tile whose interior overlaps the oriented rectangle
    /// (separating-axis test).
    fn rasterize(&self, mid: (f64, f64), axis: (f64, f64), hl: f64, hw: f64, bits: &mut [u64]) {
        const EPS: f64 = 1e-9;
        let normal = (-axis.1, axis.0);
        let corners = [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
            .map(|(a, b)| (mid.0 + axis.0 * a + normal.0 * b, mid.1 + axis.1 * a + normal.1 * b));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for c in corners {
            x0 = x0.min(c.0);
            x1 = x1.max(c.0);
            y0 = y0.min(c.1);
            y1 = y1.max(c.1);
        }
        let t = self.spec.tile_size_m;
        let g = self.grid as i64;
        let ix0 = ((x0 / t).floor() as i64).clamp(0, g);
        let ix1 = ((x1 / t).ceil() as i64).clamp(0, g);
        let iy0 = ((y0 / t).floor() as i64).clamp(0, g);
        let iy1 = ((y1 / t).ceil() as i64).clamp(0, g);
        for iy in iy0..iy1 {
            for ix in ix0..ix1 {
                let (sx0, sy0) = (ix as f64 * t, iy as f64 * t);
                let (sx1, sy1) = (sx0 + t, sy0 + t);
                if x1 <= sx0 + EPS || x0 >= sx1 - EPS || y1 <= sy0 + EPS || y0 >= sy1 - EPS {
                    continue;
                }
                let sq = [(sx0, sy0), (sx1, sy0), (sx0, sy1), (sx1, sy1)];
                let overlaps = [(axis, hl), (normal, hw)].iter().all(|&(ax, half)| {
                    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
                    for p in sq {
                        let d = (p.0 - mid.0) * ax.0 + (p.1 - mid.1) * ax.1;
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                    hi > -half + EPS && lo < half - EPS
                });
                if overlaps {
                    let tile = (iy * g + ix) as usize;
                    bits[tile / 64] |= 1 << (tile % 64);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_box() -> IntersectionGeometry {
        IntersectionGeometry::four_way(&GeometrySpec::default(), 3).unwrap()
    }

    #[test]
    fn default_box_dimensions() {
        let g = default_box();
        assert_eq!(g.width(), 18.0);
        assert_eq!(g.grid(), 72);
        // 4 sides x (3 straight + 1 left + 1 right)
        assert_eq!(g.paths.len(), 20);
    }

    #[test]
    fn lane_policy() {
        let g = default_box();
        let k = |lane, turn| PathKey { side: Side::South, lane, turn };
        assert!(g.is_legal(k(0, Turn::Left)));
        assert!(!g.is_legal(k(1, Turn::Left)));
        assert!(g.is_legal(k(2, Turn::Right)));
        assert!(!g.is_legal(k(0, Turn::Right)));
        for lane in 0..3 {
            assert!(g.is_legal(k(lane, Turn::Straight)));
        }
        assert!(!g.is_legal(k(3, Turn::Straight)));
        assert!(matches!(g.path(k(1, Turn::Left)), Err(Error::IllegalTurn { .. })));
    }

    #[test]
    fn turns_and_exits_are_consistent() {
        for side in Side::ALL {
            for turn in Turn::ALL {
                assert_eq!(side.turn_to(side.exit_for(turn)), Some(turn));
            }
            assert_eq!(side.turn_to(side), None);
        }
    }

    #[test]
    fn paths_start_on_stop_line_and_end_on_exit_edge() {
        let g = default_box();
        let w = g.width();
        for (key, tiles) in &g.paths {
            let (start, _) = tiles.path.point_at(0.0);
            let (end, _) = tiles.path.point_at(tiles.path.length());
            let on_edge = |p: (f64, f64), side: Side| match side {
                Side::South => p.1.abs() < 1e-9,
                Side::North => (p.1 - w).abs() < 1e-9,
                Side::West => p.0.abs() < 1e-9,
                Side::East => (p.0 - w).abs() < 1e-9,
            };
            assert!(on_edge(start, key.side), "{key:?} starts at {start:?}");
            assert!(on_edge(end, key.side.exit_for(key.turn)), "{key:?} ends at {end:?}");
        }
    }

    #[test]
    fn straight_path_is_box_width() {
        let g = default_box();
        let p = g.path(PathKey { side: Side::West, lane: 1, turn: Turn::Straight }).unwrap();
        assert!((p.length() - 18.0).abs() < 1e-9);
        // Right turn from the outer lane hugs the corner.
        let r = g.path(PathKey { side: Side::South, lane: 2, turn: Turn::Right }).unwrap();
        assert!((r.length() - 1.5 * FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_heading_continuity() {
        let g = default_box();
        for tiles in g.paths.values() {
            let p = &tiles.path;
            let mut s = 0.0;
            let mut prev = p.point_at(0.0).0;
            while s < p.length() {
                s += 0.05;
                let (pt, _) = p.point_at(s);
                let step = (pt.0 - prev.0).hypot(pt.1 - prev.1);
                assert!(step <= 0.05 + 1e-6, "jump of {step} at {s}");
                prev = pt;
            }
        }
    }
}
