//! Outcome tables of a run and their on-disk form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig};
use super::manager::AuctionLogRow;
use crate::error::{Error, Result};
use crate::market::PriceLogRow;

/// Terminal row of one spawned vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRow {
    pub id: u64,
    pub origin: String,
    pub destination: String,
    pub spawn_s: f64,
    /// Time the vehicle left the network; empty when still inside at the horizon.
    pub completion_s: Option<f64>,
    pub completed: bool,
    pub route: String,
    pub bid: f64,
    pub tracked: bool,
    pub spent: f64,
    pub travel_s: Option<f64>,
    pub unhindered_s: Option<f64>,
    pub delay_s: Option<f64>,
    pub shortest_s: Option<f64>,
    pub normalized_delay: Option<f64>,
    pub rejections: u32,
}

/// Density sample of a link or of an intersection's approaches, veh/km/lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub time_s: f64,
    pub kind: String,
    pub element: String,
    pub density: f64,
}

/// Reservation-distance limit of one lane, capped at the approach length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub time_s: f64,
    pub intersection: String,
    pub side: String,
    pub lane: u8,
    pub d_i_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRow {
    pub intersection: String,
    pub requests: u64,
    pub rejections: u64,
    pub revenue: f64,
}

/// Moving-average travel time after each completed trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub vehicle: u64,
    pub travel_s: f64,
    pub mean_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunResults {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub ticks: u64,
    pub spawned: u64,
    /// Vehicles were still inside when the horizon was reached.
    pub partial: bool,
    pub vehicles: Vec<VehicleRow>,
    pub densities: Vec<DensityRow>,
    pub distances: Vec<DistanceRow>,
    pub intersections: Vec<IntersectionRow>,
    pub auctions: Vec<AuctionLogRow>,
    pub prices: Vec<PriceLogRow>,
    pub trace: Vec<TraceRow>,
}

pub const VEHICLES_FILE: &str = "vehicles.csv";
pub const DENSITY_FILE: &str = "density.csv";
pub const DISTANCE_FILE: &str = "distance.csv";
pub const INTERSECTIONS_FILE: &str = "intersections.csv";
pub const AUCTION_FILE: &str = "auctions.csv";
pub const PRICE_FILE: &str = "prices.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub mode: Mode,
    pub ticks: u64,
    pub spawned: u64,
    pub completed: u64,
    pub partial: bool,
    pub config: RunConfig,
    pub files: Vec<String>,
}

/// Writes rows as comma-separated text with a header, even when empty.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("csv: {other:?}")),
    }
}

const VEHICLE_HEADER: &[&str] = &[
    "id",
    "origin",
    "destination",
    "spawn_s",
    "completion_s",
    "completed",
    "route",
    "bid",
    "tracked",
    "spent",
    "travel_s",
    "unhindered_s",
    "delay_s",
    "shortest_s",
    "normalized_delay",
    "rejections",
];

impl RunResults {
    pub fn completed(&self) -> impl Iterator<Item = &VehicleRow> {
        self.vehicles.iter().filter(|v| v.completed)
    }

    /// Mean delay over completed vehicles.
    pub fn mean_delay(&self) -> Option<f64> {
        mean(self.completed().filter_map(|v| v.delay_s))
    }

    pub fn rejections(&self) -> u64 {
        self.intersections.iter().map(|i| i.rejections).sum()
    }

    pub fn revenue(&self) -> f64 {
        self.intersections.iter().map(|i| i.revenue).sum()
    }

    pub fn spending(&self) -> f64 {
        self.vehicles.iter().map(|v| v.spent).sum()
    }

    /// Density series of one element, as (time_s, density).
    pub fn density_series(&self, kind: &str, element: &str) -> Vec<(f64, f64)> {
        self.densities
            .iter()
            .filter(|d| d.kind == kind && d.element == element)
            .map(|d| (d.time_s, d.density))
            .collect()
    }

    /// Writes every table and the manifest into `dir`, creating it.
    pub fn write_dir(&self, dir: &Path, config: &RunConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join(VEHICLES_FILE), &self.vehicles, VEHICLE_HEADER)?;
        write_csv(&dir.join(DENSITY_FILE), &self.densities, &["time_s", "kind", "element", "density"])?;
        write_csv(
            &dir.join(DISTANCE_FILE),
            &self.distances,
            &["time_s", "intersection", "side", "lane", "d_i_m"],
        )?;
        write_csv(
            &dir.join(INTERSECTIONS_FILE),
            &self.intersections,
            &["intersection", "requests", "rejections", "revenue"],
        )?;
        write_csv(
            &dir.join(AUCTION_FILE),
            &self.auctions,
            &["time_s", "intersection", "requests", "candidates", "winners", "winner_value"],
        )?;
        write_csv(
            &dir.join(PRICE_FILE),
            &self.prices,
            &["time_s", "intersection", "link", "price", "demand", "supply"],
        )?;
        write_csv(&dir.join(TRACE_FILE), &self.trace, &["time_s", "vehicle", "travel_s", "mean_s"])?;
        let manifest = Manifest {
            scenario: self.scenario.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            mode: self.mode,
            ticks: self.ticks,
            spawned: self.spawned,
            completed: self.completed().count() as u64,
            partial: self.partial,
            config: config.clone(),
            files: [
                VEHICLES_FILE,
                DENSITY_FILE,
                DISTANCE_FILE,
                INTERSECTIONS_FILE,
                AUCTION_FILE,
                PRICE_FILE,
                TRACE_FILE,
            ]
            .map(String::from)
            .to_vec(),
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}
