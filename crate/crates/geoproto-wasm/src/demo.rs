//! JSON-string API over the core pipeline, sized for interactive use.
//!
//! Each operation takes a JSON parameter object and returns a JSON document,
//! so the wasm boundary stays a single string in each direction. The same
//! functions compile and run natively, which is where the tests live.

use serde::{Deserialize, Serialize};

use geoproto_core::experience::{experience_report, ExperienceRecord, IntervalCenter};
use geoproto_core::gap::{gap_select, GapConfig};
use geoproto_core::kproto::{fit, ClusteringModel, KProtoConfig};
use geoproto_core::lambda::resolve_weights;
use geoproto_core::synth::{adjusted_rand_index, generate, well_separated, SynthOutput};

const MAX_RECORDS: usize = 20_000;
const MAX_CLUSTERS: usize = 8;
const MAX_K: usize = 10;
const MAX_K_MAX: usize = 8;
const MAX_REPLICATES: usize = 40;

fn default_seed() -> u64 {
    1
}
fn default_clusters() -> usize {
    3
}
fn default_records() -> usize {
    1_200
}
fn default_restarts() -> usize {
    8
}
fn default_k_max() -> usize {
    5
}
fn default_replicates() -> usize {
    12
}
fn default_sample_fraction() -> f64 {
    0.35
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScatterParams {
    seed: u64,
    clusters: usize,
    records: usize,
    k: Option<usize>,
    restarts: usize,
}

impl Default for ScatterParams {
    fn default() -> Self {
        ScatterParams {
            seed: default_seed(),
            clusters: default_clusters(),
            records: default_records(),
            k: None,
            restarts: default_restarts(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GapParams {
    seed: u64,
    clusters: usize,
    records: usize,
    k_max: usize,
    replicates: usize,
    sample_fraction: f64,
    restarts: usize,
}

impl Default for GapParams {
    fn default() -> Self {
        GapParams {
            seed: default_seed(),
            clusters: default_clusters(),
            records: default_records(),
            k_max: default_k_max(),
            replicates: default_replicates(),
            sample_fraction: default_sample_fraction(),
            restarts: default_restarts(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExperienceParams {
    seed: u64,
    clusters: usize,
    records: usize,
    k: Option<usize>,
    restarts: usize,
}

impl Default for ExperienceParams {
    fn default() -> Self {
        ExperienceParams {
            seed: default_seed(),
            clusters: default_clusters(),
            records: default_records(),
            k: None,
            restarts: default_restarts(),
        }
    }
}

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
    lat: f64,
    lon: f64,
    cluster: u32,
    truth: u32,
}

#[derive(Serialize)]
struct CostParts {
    total: f64,
    numerical: f64,
    categorical: f64,
    spatial: f64,
}

#[derive(Serialize)]
struct ScatterResponse {
    seed: u64,
    k: usize,
    weights: geoproto_core::distance::Weights,
    cost: CostParts,
    iterations: usize,
    converged: bool,
    sizes: Vec<usize>,
    adjusted_rand_index: f64,
    points: Vec<Point>,
}

#[derive(Serialize)]
struct ExperienceResponse {
    seed: u64,
    k: usize,
    sizes: Vec<usize>,
    report: geoproto_core::experience::ExperienceReport,
}

fn parse<'a, T: Deserialize<'a>>(params: &'a str) -> Result<T, String> {
    let text = if params.trim().is_empty() { "{}" } else { params };
    serde_json::from_str(text).map_err(|e| format!("parameters: {e}"))
}

fn check_range(name: &str, value: usize, lo: usize, hi: usize) -> Result<(), String> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(format!("{name} must be between {lo} and {hi}, got {value}"))
    }
}

fn generated(seed: u64, clusters: usize, records: usize) -> Result<SynthOutput, String> {
    check_range("clusters", clusters, 1, MAX_CLUSTERS)?;
    check_range("records", records, 50, MAX_RECORDS)?;
    generate(&well_separated(clusters, records), seed).map_err(|e| e.to_string())
}

fn fitted(out: &SynthOutput, k: usize, restarts: usize, seed: u64) -> Result<ClusteringModel, String> {
    check_range("k", k, 1, MAX_K)?;
    check_range("restarts", restarts, 1, 50)?;
    let weights = resolve_weights(&out.dataset, None, None).map_err(|e| e.to_string())?;
    let mut cfg = KProtoConfig::new(k, weights);
    cfg.restarts = restarts;
    cfg.seed = seed;
    fit(&out.dataset, &cfg).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(doc: &T) -> Result<String, String> {
    serde_json::to_string(doc).map_err(|e| e.to_string())
}

/// Generates a portfolio with planted structure, fits the requested number
/// of prototypes, and returns every record with its raw coordinates, fitted
/// cluster, and true component, plus fit diagnostics.
pub fn cluster_scatter(params: &str) -> Result<String, String> {
    let p: ScatterParams = parse(params)?;
    let out = generated(p.seed, p.clusters, p.records)?;
    let k = p.k.unwrap_or(p.clusters);
    let model = fitted(&out, k, p.restarts, p.seed)?;
    let ari = adjusted_rand_index(&out.labels, &model.assignment).map_err(|e| e.to_string())?;
    let points = (0..out.dataset.n())
        .map(|i| Point {
            x: out.raw_numerical[0][i],
            y: out.raw_numerical[1][i],
            lat: out.raw_lat_deg[i],
            lon: out.raw_lon_deg[i],
            cluster: model.assignment[i],
            truth: out.labels[i],
        })
        .collect();
    to_json(&ScatterResponse {
        seed: p.seed,
        k,
        weights: model.weights,
        cost: CostParts {
            total: model.cost_total,
            numerical: model.cost_numerical,
            categorical: model.cost_categorical,
            spatial: model.cost_spatial,
        },
        iterations: model.iterations,
        converged: model.converged,
        sizes: model.cluster_sizes(),
        adjusted_rand_index: ari,
        points,
    })
}

/// Runs the gap statistic on a generated portfolio and returns the profile:
/// one row per candidate count plus the chosen number of clusters.
pub fn gap_profile(params: &str) -> Result<String, String> {
    let p: GapParams = parse(params)?;
    check_range("k_max", p.k_max, 1, MAX_K_MAX)?;
    check_range("replicates", p.replicates, 2, MAX_REPLICATES)?;
    check_range("restarts", p.restarts, 1, 50)?;
    if !(p.sample_fraction > 0.0 && p.sample_fraction <= 1.0) {
        return Err(format!(
            "sample_fraction must be in (0, 1], got {}",
            p.sample_fraction
        ));
    }
    let out = generated(p.seed, p.clusters, p.records)?;
    let mut cfg = GapConfig::new(p.k_max);
    cfg.replicates = p.replicates;
    cfg.sample_fraction = p.sample_fraction;
    cfg.restarts = p.restarts;
    cfg.seed = p.seed;
    let profile = gap_select(&out.dataset, &cfg).map_err(|e| e.to_string())?;
    to_json(&profile)
}

/// Generates a portfolio, clusters it, and returns the mortality experience
/// study: actual to expected ratios with confidence intervals per cluster
/// and for the whole portfolio.
pub fn experience_table(params: &str) -> Result<String, String> {
    let p: ExperienceParams = parse(params)?;
    let out = generated(p.seed, p.clusters, p.records)?;
    let k = p.k.unwrap_or(p.clusters);
    let model = fitted(&out, k, p.restarts, p.seed)?;
    let records: Vec<ExperienceRecord> = (0..out.dataset.n())
        .map(|i| ExperienceRecord {
            id: i as u64,
            cluster: model.assignment[i],
            face_amount: out.face_amounts[i],
            death: out.deaths[i],
            expected_rate: out.expected_rates[i],
        })
        .collect();
    let report = experience_report(&records, &[0.90, 0.95], IntervalCenter::Null)
        .map_err(|e| e.to_string())?;
    to_json(&ExperienceResponse {
        seed: p.seed,
        k,
        sizes: model.cluster_sizes(),
        report,
    })
}
