//! Tables computed from the stored runs of an experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{t_interval, Interval};
use super::{run_dir, ExperimentManifest, Preset, MANIFEST_FILE};
use crate::engine::metrics::{density_integral_above_opt, paired_density_integrals};
use crate::engine::results::{
    self, read_csv, write_csv, DensityRow, DistanceRow, IntersectionRow, Manifest, TraceRow, VehicleRow,
};
use crate::engine::{AuctionLogRow, Mode};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONGESTION_FILE: &str = "congestion.csv";
pub const OD_FILE: &str = "od_travel.csv";
pub const SERIES_FILE: &str = "series.csv";

/// Bid buckets in cents, lower bound inclusive.
pub const BID_BUCKETS: [(f64, f64); 4] = [(0.0, 50.0), (50.0, 100.0), (100.0, 150.0), (150.0, 200.0)];

const CONFIDENCE: f64 = 0.95;
const SERIES_STEP_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub mode: Mode,
    pub lambda_per_min: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SummaryRow {
    pub fn interval(&self) -> Interval {
        Interval { n: self.n, mean: self.mean, sd: self.sd, low: self.ci_low, high: self.ci_high }
    }
}

/// Above-optimal density integral of one intersection, paired with FCFS on
/// the same seeds and the same window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionRow {
    pub variant: String,
    pub intersection: String,
    pub busiest: bool,
    pub n: usize,
    pub fcfs_mean: f64,
    pub fcfs_ci_low: f64,
    pub fcfs_ci_high: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// mean / fcfs_mean; empty when FCFS never exceeds the optimum.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdRow {
    pub variant: String,
    pub origin: String,
    pub destination: String,
    pub trips: usize,
    pub mean_travel_s: f64,
    pub fcfs_travel_s: Option<f64>,
}

/// One point of a plot-ready series, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub variant: String,
    pub series: String,
    pub time_s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub preset: Preset,
    pub rows: Vec<SummaryRow>,
    pub congestion: Vec<CongestionRow>,
    pub od: Vec<OdRow>,
    pub series: Vec<SeriesRow>,
}

impl Summary {
    pub fn metric(&self, variant: &str, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.variant == variant && r.metric == metric)
    }

    /// The FCFS-busiest intersection's row for `variant`.
    pub fn busiest(&self, variant: &str) -> Option<&CongestionRow> {
        self.congestion.iter().find(|r| r.variant == variant && r.busiest)
    }
}

/// One stored run.
struct Run {
    manifest: Manifest,
    vehicles: Vec<VehicleRow>,
    densities: Vec<DensityRow>,
    distances: Vec<DistanceRow>,
    intersections: Vec<IntersectionRow>,
    auctions: Vec<AuctionLogRow>,
    trace: Vec<TraceRow>,
}

impl Run {
    fn load(dir: &Path) -> Result<Run> {
        let text = fs::read_to_string(dir.join(results::MANIFEST_FILE))?;
        let densities: Vec<DensityRow> = read_csv(&dir.join(results::DENSITY_FILE))?;
        Ok(Run {
            manifest: serde_json::from_str(&text)?,
            vehicles: read_csv(&dir.join(results::VEHICLES_FILE))?,
            densities: densities.into_iter().filter(|d| d.kind == "intersection").collect(),
            distances: read_csv(&dir.join(results::DISTANCE_FILE))?,
            intersections: read_csv(&dir.join(results::INTERSECTIONS_FILE))?,
            auctions: read_csv(&dir.join(results::AUCTION_FILE))?,
            trace: read_csv(&dir.join(results::TRACE_FILE))?,
        })
    }

    fn mu_opt(&self) -> f64 {
        self.manifest.config.mu_jam_per_km / 2.0
    }

    fn density_series(&self, element: &str) -> Vec<(f64, f64)> {
        self.densities
            .iter()
            .filter(|d| d.element == element)
            .map(|d| (d.time_s, d.density))
            .collect()
    }

    fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let done: Vec<&VehicleRow> = self.vehicles.iter().filter(|v| v.completed).collect();
        let mut put = |key: String, value: Option<f64>| {
            if let Some(v) = value {
                m.insert(key, v);
            }
        };
        put("spawned".into(), Some(self.manifest.spawned as f64));
        put("completed".into(), Some(done.len() as f64));
        put("partial".into(), Some(if self.manifest.partial { 1.0 } else { 0.0 }));
        put("mean_delay_s".into(), results::mean(done.iter().filter_map(|v| v.delay_s)));
        put("mean_travel_s".into(), results::mean(done.iter().filter_map(|v| v.travel_s)));
        put(
            "mean_normalized_delay".into(),
            results::mean(done.iter().filter_map(|v| v.normalized_delay)),
        );
        put("final_moving_average_s".into(), self.trace.last().map(|t| t.mean_s));
        put("requests".into(), Some(self.intersections.iter().map(|i| i.requests as f64).sum()));
        put("rejections".into(), Some(self.intersections.iter().map(|i| i.rejections as f64).sum()));
        put("revenue".into(), Some(self.intersections.iter().map(|i| i.revenue).sum()));
        put(
            "bids_per_round".into(),
            results::mean(self.auctions.iter().filter(|a| a.requests > 0).map(|a| a.requests as f64)),
        );
        // Steady state: the last two thirds of the spawn window.
        let window = self.manifest.config.spawn_window_s;
        put(
            "mean_d_i_m".into(),
            results::mean(
                self.distances
                    .iter()
                    .filter(|d| d.time_s >= window / 3.0 && d.time_s <= window)
                    .map(|d| d.d_i_m),
            ),
        );
        let endowments: BTreeSet<u64> = done.iter().filter(|v| v.tracked).map(|v| v.bid as u64).collect();
        for e in endowments {
            put(
                format!("tracked_delay_{e}"),
                results::mean(done.iter().filter(|v| v.tracked && v.bid as u64 == e).filter_map(|v| v.delay_s)),
            );
        }
        for (lo, hi) in BID_BUCKETS {
            put(
                format!("nd_bid_{lo}_{hi}"),
                results::mean(
                    done.iter()
                        .filter(|v| !v.tracked && v.bid >= lo && v.bid < hi)
                        .filter_map(|v| v.normalized_delay),
                ),
            );
        }
        m
    }
}

/// Recomputes every table of an experiment directory from its stored runs
/// and writes them next to the runs.
pub fn summarize(out: &Path) -> Result<Summary> {
    let text = fs::read_to_string(out.join(MANIFEST_FILE))?;
    let manifest: ExperimentManifest = serde_json::from_str(&text)?;
    let mut runs: Vec<(String, Vec<Run>)> = Vec::new();
    for v in &manifest.variants {
        let list = manifest
            .seeds
            .iter()
            .map(|&s| Run::load(&run_dir(out, &v.name, s)))
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::Config(format!("experiment has no seeds for `{}`", v.name)));
        }
        runs.push((v.name.clone(), list));
    }

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (name, list) in &runs {
        let config = &list[0].manifest.config;
        let per_run: Vec<BTreeMap<String, f64>> = list.iter().map(Run::metrics).collect();
        let keys: BTreeSet<&String> = per_run.iter().flat_map(|m| m.keys()).collect();
        for key in keys {
            let values: Vec<f64> = per_run.iter().filter_map(|m| m.get(key).copied()).collect();
            let Some(i) = t_interval(&values, CONFIDENCE) else { continue };
            rows.push(SummaryRow {
                variant: name.clone(),
                mode: config.mode,
                lambda_per_min: config.lambda_per_min,
                metric: key.clone(),
                n: i.n,
                mean: i.mean,
                sd: i.sd,
                ci_low: i.low,
                ci_high: i.high,
            });
        }
        series.extend(moving_average_series(name, list));
        series.extend(distance_series(name, list));
    }

    let (congestion, od) = match runs.iter().find(|(n, _)| n == "fcfs") {
        Some((_, fcfs)) if manifest.preset.is_grid() => {
            let mut congestion = Vec::new();
            let mut od = od_rows("fcfs", fcfs, None);
            let busiest = busiest_intersection(fcfs);
            for (name, list) in runs.iter().filter(|(n, _)| n != "fcfs") {
                congestion.extend(congestion_rows(name, fcfs, list, busiest.as_deref()));
                od.extend(od_rows(name, list, Some(fcfs)));
            }
            if let Some(b) = &busiest {
                for (name, list) in &runs {
                    series.extend(density_series(name, list, b));
                }
            }
            (congestion, od)
        }
        _ => (Vec::new(), Vec::new()),
    };

    write_csv(
        &out.join(SUMMARY_FILE),
        &rows,
        &["variant", "mode", "lambda_per_min", "metric", "n", "mean", "sd", "ci_low", "ci_high"],
    )?;
    write_csv(
        &out.join(CONGESTION_FILE),
        &congestion,
        &[
            "variant",
            "intersection",
            "busiest",
            "n",
            "fcfs_mean",
            "fcfs_ci_low",
            "fcfs_ci_high",
            "mean",
            "ci_low",
            "ci_high",
            "ratio",
        ],
    )?;
    write_csv(
        &out.join(OD_FILE),
        &od,
        &["variant", "origin", "destination", "trips", "mean_travel_s", "fcfs_travel_s"],
    )?;
    write_csv(&out.join(SERIES_FILE), &series, &["variant", "series", "time_s", "value"])?;
    Ok(Summary { preset: manifest.preset, rows, congestion, od, series })
}

/// Intersection with the largest mean FCFS integral.
fn busiest_intersection(fcfs: &[Run]) -> Option<String> {
    let names: BTreeSet<&str> = fcfs.iter().flat_map(|r| r.densities.iter().map(|d| d.element.as_str())).collect();
    names
        .into_iter()
        .map(|name| {
            let total: f64 = fcfs
                .iter()
                .map(|r| density_integral_above_opt(&r.density_series(name), r.mu_opt()))
                .sum();
            (name, total)
        })
        .filter(|&(_, total)| total > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(name, _)| name.to_string())
}

fn congestion_rows(name: &str, fcfs: &[Run], list: &[Run], busiest: Option<&str>) -> Vec<CongestionRow> {
    let names: BTreeSet<&str> = fcfs.iter().flat_map(|r| r.densities.iter().map(|d| d.element.as_str())).collect();
    let mut out = Vec::new();
    for element in names {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (f, r) in fcfs.iter().zip(list) {
            let (x, y) = paired_density_integrals(&f.density_series(element), &r.density_series(element), f.mu_opt());
            a.push(x);
            b.push(y);
        }
        let (Some(fi), Some(mi)) = (t_interval(&a, CONFIDENCE), t_interval(&b, CONFIDENCE)) else { continue };
        out.push(CongestionRow {
            variant: name.to_string(),
            intersection: element.to_string(),
            busiest: busiest == Some(element),
            n: fi.n,
            fcfs_mean: fi.mean,
            fcfs_ci_low: fi.low,
            fcfs_ci_high: fi.high,
            mean: mi.mean,
            ci_low: mi.low,
            ci_high: mi.high,
            ratio: (fi.mean > 0.0).then(|| mi.mean / fi.mean),
        });
    }
    out
}

fn od_means(list: &[Run]) -> BTreeMap<(String, String), (usize, f64)> {
    let mut acc: BTreeMap<(String, String), (usize, f64)> = BTreeMap::new();
    for v in list.iter().flat_map(|r| &r.vehicles) {
        if let Some(t) = v.travel_s {
            let e = acc.entry((v.origin.clone(), v.destination.clone())).or_default();
            e.0 += 1;
            e.1 += t;
        }
    }
    acc.into_iter().map(|(k, (n, s))| (k, (n, s / n as f64))).collect()
}

fn od_rows(name: &str, list: &[Run], fcfs: Option<&[Run]>) -> Vec<OdRow> {
    let base = fcfs.map(od_means);
    od_means(list)
        .into_iter()
        .map(|((origin, destination), (trips, mean))| OdRow {
            variant: name.to_string(),
            fcfs_travel_s: base
                .as_ref()
                .and_then(|b| b.get(&(origin.clone(), destination.clone())))
                .map(|&(_, m)| m),
            origin,
            destination,
            trips,
            mean_travel_s: mean,
        })
        .collect()
}

/// Seed-averaged moving-average travel time on a fixed time step; a seed
/// joins once its first trip has completed.
fn moving_average_series(name: &str, list: &[Run]) -> Vec<SeriesRow> {
    let end = list.iter().filter_map(|r| r.trace.last()).map(|t| t.time_s).fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut t = SERIES_STEP_S;
    while t < end + SERIES_STEP_S {
        let values: Vec<f64> = list
            .iter()
            .filter_map(|r| r.trace.iter().take_while(|p| p.time_s <= t).last().map(|p| p.mean_s))
            .collect();
        if let Some(v) = results::mean(values) {
            out.push(SeriesRow { variant: name.to_string(), series: "moving_average_s".into(), time_s: t, value: v });
        }
        t += SERIES_STEP_S;
    }
    out
}

fn sample_means<'a>(list: &'a [Run], pick: impl Fn(&'a Run) -> Vec<(f64, f64)>) -> BTreeMap<u64, (usize, f64)> {
    // Keyed by milliseconds so sample times from different seeds line up.
    let mut acc: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for r in list {
        let mut per: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
        for (t, v) in pick(r) {
            let e = per.entry((t * 1000.0).round() as u64).or_default();
            e.0 += 1;
            e.1 += v;
        }
        for (k, (n, s)) in per {
            let e = acc.entry(k).or_default();
            e.0 += 1;
            e.1 += s / n as f64;
        }
    }
    acc
}

fn distance_series(name: &str, list: &[Run]) -> Vec<SeriesRow> {
    sample_means(list, |r| r.distances.iter().map(|d| (d.time_s, d.d_i_m)).collect())
        .into_iter()
        .map(|(k, (n, s))| SeriesRow {
            variant: name.to_string(),
            series: "mean_d_i_m".into(),
            time_s: k as f64 / 1000.0,
            value: s / n as f64,
        })
        .collect()
}

fn density_series(name: &str, list: &[Run], element: &str) -> Vec<SeriesRow> {
    sample_means(list, |r| r.density_series(element))
        .into_iter()
        .map(|(k, (n, s))| SeriesRow {
            variant: name.to_string(),
            series: format!("density_{element}"),
            time_s: k as f64 / 1000.0,
            value: s / n as f64,
        })
        .collect()
}
