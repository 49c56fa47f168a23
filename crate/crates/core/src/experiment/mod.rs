//! Multi-seed experiment presets and their summaries.
//!
//! An experiment runs every variant of a preset over a list of seeds and
//! stores each run under `runs/<variant>/seed-<n>/`. The summary tables are
//! computed from those stored files only, so [`summarize`] can be rerun on an
//! existing directory.

mod stats;
mod summary;
mod wdp;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use stats::{t_interval, Interval};
pub use summary::{summarize, CongestionRow, OdRow, SeriesRow, Summary, SummaryRow, BID_BUCKETS};
pub use wdp::{recorded_instances, SIZE_BUCKETS};

use crate::engine;
use crate::error::{Error, Result};
use crate::scenario::ScenarioDoc;

/// The shipped single-intersection scenario.
pub const SINGLE_INTERSECTION: &str = include_str!("../../../../scenarios/single_intersection.toml");
/// The shipped 4x4 grid scenario.
pub const GRID_4X4: &str = include_str!("../../../../scenarios/grid_4x4.toml");

pub const MANIFEST_FILE: &str = "experiment.json";
pub const RUNS_DIR: &str = "runs";

/// Arrival rates of the single-intersection sweep, vehicles per minute.
pub const LAMBDA_GRID: [f64; 7] = [1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    BidDelay,
    CaVsFcfs,
    ReservationDistance,
    CtaGrid,
    CaCtaGrid,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::BidDelay,
        Preset::CaVsFcfs,
        Preset::ReservationDistance,
        Preset::CtaGrid,
        Preset::CaCtaGrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::BidDelay => "bid-delay",
            Preset::CaVsFcfs => "ca-vs-fcfs",
            Preset::ReservationDistance => "reservation-distance",
            Preset::CtaGrid => "cta-grid",
            Preset::CaCtaGrid => "ca-cta-grid",
        }
    }

    pub fn is_grid(self) -> bool {
        matches!(self, Preset::CtaGrid | Preset::CaCtaGrid)
    }

    pub fn default_seeds(self) -> usize {
        if self.is_grid() {
            10
        } else {
            30
        }
    }

    pub fn base_scenario(self) -> &'static str {
        if self.is_grid() {
            GRID_4X4
        } else {
            SINGLE_INTERSECTION
        }
    }

    /// Variants as (name, `[run]` overrides).
    pub fn variants(self) -> Vec<Variant> {
        let v = |name: String, sets: &[String]| {
            let mut overrides: Vec<String> =
                ["wp=0.15", "np=0.5", "bid_mean=100.0", "bid_sd=25.0"].map(String::from).to_vec();
            overrides.extend_from_slice(sets);
            Variant { name, overrides }
        };
        let mode = |m: &str| format!("mode=\"{m}\"");
        let lambda = |l: f64| format!("lambda_per_min={l:.1}");
        match self {
            Preset::BidDelay => vec![v(
                "ca-l15".into(),
                &[
                    mode("ca"),
                    lambda(15.0),
                    "tracked_fraction=0.2".into(),
                    "tracked_endowments=[10.0, 100.0, 1000.0]".into(),
                ],
            )],
            Preset::CaVsFcfs => LAMBDA_GRID
                .iter()
                .flat_map(|&l| ["fcfs", "ca"].map(|m| v(format!("{m}-l{l}"), &[mode(m), lambda(l)])))
                .collect(),
            Preset::ReservationDistance => [5.0, 15.0, 30.0]
                .iter()
                .map(|&l| v(format!("ca-l{l}"), &[mode("ca"), lambda(l)]))
                .collect(),
            Preset::CtaGrid => ["fcfs", "cta"].map(|m| v(m.into(), &[mode(m)])).to_vec(),
            Preset::CaCtaGrid => ["fcfs", "cta", "ca-cta"].map(|m| v(m.into(), &[mode(m)])).to_vec(),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Seeds `1..=seeds`; 0 uses the preset default.
    pub seeds: usize,
    /// Worker threads; at least one.
    pub jobs: usize,
    /// Extra `key=value` settings applied after the preset's own.
    pub overrides: Vec<String>,
    /// Replaces the preset's base scenario.
    pub scenario: Option<ScenarioDoc>,
}

/// What an experiment directory was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub preset: Preset,
    pub version: String,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
}

pub fn run_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(RUNS_DIR).join(variant).join(format!("seed-{seed}"))
}

/// Runs a preset into `out` and summarizes it.
pub fn run_experiment(preset: Preset, options: &Options, out: &Path) -> Result<Summary> {
    let base = match &options.scenario {
        Some(doc) => doc.clone(),
        None => ScenarioDoc::from_toml_str(preset.base_scenario())?,
    };
    let n = if options.seeds == 0 { preset.default_seeds() } else { options.seeds };
    let seeds: Vec<u64> = (1..=n as u64).collect();
    let mut variants = preset.variants();
    for v in &mut variants {
        v.overrides.extend(options.overrides.iter().cloned());
    }

    // Resolve every document before running anything, so a bad override
    // fails fast.
    let mut jobs = Vec::new();
    for v in &variants {
        let mut doc = base.clone();
        doc.apply_overrides(&v.overrides)?;
        doc.run.validate()?;
        for &seed in &seeds {
            let mut d = doc.clone();
            d.run.seed = seed;
            jobs.push((v.name.clone(), d));
        }
    }

    fs::create_dir_all(out)?;
    let manifest = ExperimentManifest {
        preset,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds,
        variants,
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..options.jobs.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((name, doc)) = jobs.get(i) else { break };
                if failure.lock().unwrap().is_some() {
                    break;
                }
                let outcome = engine::run(doc).and_then(|r| {
                    if r.partial {
                        log::warn!("{name} seed {}: vehicles left at the horizon", doc.run.seed);
                    }
                    r.write_dir(&run_dir(out, name, doc.run.seed), &doc.run)
                });
                match outcome {
                    Ok(()) => log::info!("{name} seed {} done", doc.run.seed),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    summarize(out)
}
