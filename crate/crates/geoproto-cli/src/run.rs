use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use geoproto_core::dataset::{ingest_csv, Dataset};
use geoproto_core::kproto::{self, ClusteringModel, KProtoConfig, SpatialRule};
use geoproto_core::synth::{self, SynthSpec};
use geoproto_core::{
    gap_select, geodetic_distance_m, lambda, ExperienceRecord, GapConfig, GapProfile, GeoPoint,
    IntervalCenter, SchemaConfig, Weights, WGS84,
};

use crate::args::{
    ClusterArgs, DataArgs, DistArgs, ExperienceArgs, InspectArgs, LambdaArgs, SelectKArgs,
    SynthArgs,
};
use crate::config::{require, resolve, Effective, RunConfig, SynthSource};
use crate::output::RunWriter;
use crate::Failure;

fn v<T>(res: Result<T>) -> Result<T, Failure> {
    res.map_err(Failure::Validation)
}

fn r<T>(res: Result<T>) -> Result<T, Failure> {
    res.map_err(Failure::Runtime)
}

struct Loaded {
    dataset: Dataset,
    data_path: PathBuf,
    schema_path: PathBuf,
}

fn load_dataset(args: &DataArgs, cfg: &RunConfig) -> Result<Loaded> {
    let data_path = require(
        args.data.clone(),
        cfg.data.clone(),
        "data",
        "data",
    )?;
    let schema_path = require(
        args.schema.clone(),
        cfg.schema.clone(),
        "schema",
        "schema",
    )?;
    let schema_cfg = SchemaConfig::from_path(&schema_path)
        .with_context(|| format!("loading schema config {}", schema_path.display()))?;
    let ingested = ingest_csv(&data_path, &schema_cfg)
        .with_context(|| format!("ingesting {}", data_path.display()))?;
    if ingested.rows_skipped > 0 {
        log::warn!(
            "skipped {} of {} rows during ingestion",
            ingested.rows_skipped,
            ingested.rows_read
        );
    }
    Ok(Loaded {
        dataset: ingested.dataset,
        data_path,
        schema_path,
    })
}

/// Record identifiers for assignment output: the `id` payload column when
/// ingestion carried one through, row indexes otherwise.
fn record_ids(data: &Dataset) -> Vec<String> {
    match data.payload_column("id") {
        Some(ids) => ids.to_vec(),
        None => (0..data.n()).map(|i| i.to_string()).collect(),
    }
}

pub fn inspect(args: &InspectArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.data.config.as_deref()))?;
    let loaded = v(load_dataset(&args.data, &cfg))?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let emit = |w: &mut csv::Writer<_>| -> Result<()> {
        w.write_record(["attribute", "kind", "item", "value"])?;
        for row in loaded.dataset.summary() {
            w.write_record([&row.attribute, &row.kind, &row.item, &row.value])?;
        }
        w.flush()?;
        Ok(())
    };
    r(emit(&mut w).context("writing summary"))
}

pub fn lambda_cmd(args: &LambdaArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.data.config.as_deref()))?;
    let loaded = v(load_dataset(&args.data, &cfg))?;
    let estimate = r(lambda::estimate(&loaded.dataset).map_err(Into::into))?;
    let text = r(serde_json::to_string_pretty(&estimate).context("encoding estimate"))?;
    println!("{text}");
    Ok(())
}

pub fn dist(args: &DistArgs) -> Result<(), Failure> {
    let p = v(GeoPoint::from_degrees(args.lat1, args.lon1).map_err(Into::into))?;
    let q = v(GeoPoint::from_degrees(args.lat2, args.lon2).map_err(Into::into))?;
    println!("{}", geodetic_distance_m(p, q, &WGS84));
    Ok(())
}

#[derive(Serialize)]
struct SpatialDoc {
    lat_deg: f64,
    lon_deg: f64,
}

#[derive(Serialize)]
struct PrototypeDoc {
    numerical: Vec<f64>,
    categorical: Vec<String>,
    spatial: Option<SpatialDoc>,
}

#[derive(Serialize)]
struct ModelDoc {
    k: usize,
    weights: Weights,
    cost_total: f64,
    cost_numerical: f64,
    cost_categorical: f64,
    cost_spatial: f64,
    iterations: usize,
    converged: bool,
    restart_index: usize,
    cluster_sizes: Vec<usize>,
    prototypes: Vec<PrototypeDoc>,
}

fn model_doc(data: &Dataset, model: &ClusteringModel) -> ModelDoc {
    let schema = data.schema();
    let prototypes = model
        .prototypes
        .iter()
        .map(|p| PrototypeDoc {
            numerical: p.numerical.clone(),
            categorical: p
                .categorical
                .iter()
                .enumerate()
                .map(|(j, &code)| schema.levels(j)[code as usize].clone())
                .collect(),
            spatial: p.spatial.map(|g| SpatialDoc {
                lat_deg: g.lat_deg(),
                lon_deg: g.lon_deg(),
            }),
        })
        .collect();
    ModelDoc {
        k: model.k,
        weights: model.weights,
        cost_total: model.cost_total,
        cost_numerical: model.cost_numerical,
        cost_categorical: model.cost_categorical,
        cost_spatial: model.cost_spatial,
        iterations: model.iterations,
        converged: model.converged,
        restart_index: model.restart_index,
        cluster_sizes: model.cluster_sizes(),
        prototypes,
    }
}

fn assignments_csv(banner: &str, ids: &[String], assignment: &[u32]) -> Vec<u8> {
    let mut text = String::from(banner);
    text.push_str("id,cluster\n");
    for (id, cluster) in ids.iter().zip(assignment) {
        let _ = writeln!(text, "{id},{cluster}");
    }
    text.into_bytes()
}

pub fn cluster(args: &ClusterArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.data.config.as_deref()))?;
    let k = v(require(args.k, cfg.cluster.k, "k", "[cluster] k"))?;
    let restarts = resolve(args.restarts, cfg.cluster.restarts, 20);
    let max_iterations = resolve(args.max_iterations, cfg.cluster.max_iterations, 100);
    let lambda1 = args.lambda1.or(cfg.cluster.lambda1);
    let lambda2 = args.lambda2.or(cfg.cluster.lambda2);
    let spatial_rule: SpatialRule = args
        .spatial_rule
        .map(Into::into)
        .or(cfg.cluster.spatial_rule)
        .unwrap_or_default();
    let seed = resolve(args.seed, cfg.seed, 0);
    let out = resolve(args.out.clone(), cfg.output.clone(), PathBuf::from("geoproto-out"));

    let loaded = v(load_dataset(&args.data, &cfg))?;
    let effective = Effective::Cluster {
        data: loaded.data_path.display().to_string(),
        schema: loaded.schema_path.display().to_string(),
        k,
        restarts,
        max_iterations,
        lambda1,
        lambda2,
        spatial_rule,
        seed,
    };
    let mut writer = r(RunWriter::new(&out, Some(seed), effective))?;
    r(writer.note_input(&loaded.data_path))?;
    r(writer.note_input(&loaded.schema_path))?;

    let weights = v(lambda::resolve_weights(&loaded.dataset, lambda1, lambda2).map_err(Into::into))?;
    let mut fit_cfg = KProtoConfig::new(k, weights);
    fit_cfg.restarts = restarts;
    fit_cfg.max_iterations = max_iterations;
    fit_cfg.spatial_rule = spatial_rule;
    fit_cfg.seed = seed;
    let model = r(kproto::fit(&loaded.dataset, &fit_cfg).map_err(Into::into))?;
    log::info!(
        "fit converged={} iterations={} cost={}",
        model.converged,
        model.iterations,
        model.cost_total
    );

    let ids = record_ids(&loaded.dataset);
    let banner = writer.banner();
    r(writer.write("assignments.csv", &assignments_csv(&banner, &ids, &model.assignment)))?;
    r(writer.write_json("model.json", &model_doc(&loaded.dataset, &model)))?;
    r(writer.finish())
}

fn gap_profile_csv(banner: &str, profile: &GapProfile) -> Vec<u8> {
    let mut text = String::from(banner);
    text.push_str("k,log_w,ref_log_w_mean,sd,s,gap\n");
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &profile.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.k,
            cell(row.log_w),
            cell(row.ref_log_w_mean),
            cell(row.sd),
            cell(row.s),
            cell(row.gap)
        );
    }
    text.into_bytes()
}

pub fn select_k(args: &SelectKArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.data.config.as_deref()))?;
    let k_max = v(require(args.k_max, cfg.select_k.k_max, "k-max", "[select_k] k_max"))?;
    let replicates = resolve(args.replicates, cfg.select_k.replicates, 50);
    let sample_fraction = resolve(args.sample_fraction, cfg.select_k.sample_fraction, 0.10);
    let strata = resolve(args.strata.clone(), cfg.select_k.strata.clone(), Vec::new());
    let restarts = resolve(args.restarts, cfg.select_k.restarts, 20);
    let max_iterations = resolve(args.max_iterations, cfg.select_k.max_iterations, 100);
    let lambda1 = args.lambda1.or(cfg.select_k.lambda1);
    let lambda2 = args.lambda2.or(cfg.select_k.lambda2);
    let spatial_rule: SpatialRule = args
        .spatial_rule
        .map(Into::into)
        .or(cfg.select_k.spatial_rule)
        .unwrap_or_default();
    let seed = resolve(args.seed, cfg.seed, 0);
    let out = resolve(args.out.clone(), cfg.output.clone(), PathBuf::from("geoproto-out"));

    let loaded = v(load_dataset(&args.data, &cfg))?;
    let effective = Effective::SelectK {
        data: loaded.data_path.display().to_string(),
        schema: loaded.schema_path.display().to_string(),
        k_max,
        replicates,
        sample_fraction,
        strata: strata.clone(),
        restarts,
        max_iterations,
        lambda1,
        lambda2,
        spatial_rule,
        seed,
    };
    let mut writer = r(RunWriter::new(&out, Some(seed), effective))?;
    r(writer.note_input(&loaded.data_path))?;
    r(writer.note_input(&loaded.schema_path))?;

    let gap_cfg = GapConfig {
        k_max,
        replicates,
        sample_fraction,
        strata,
        lambda1,
        lambda2,
        restarts,
        max_iterations,
        spatial_rule,
        seed,
    };
    let profile = r(gap_select(&loaded.dataset, &gap_cfg).map_err(Into::into))?;
    for note in &profile.diagnostics {
        log::warn!("{note}");
    }

    let banner = writer.banner();
    r(writer.write("gap-profile.csv", &gap_profile_csv(&banner, &profile)))?;
    r(writer.write_json("gap-profile.json", &profile))?;

    match profile.chosen_k {
        Some(chosen) => {
            println!("{chosen}");
            let mut fit_cfg = KProtoConfig::new(chosen, profile.weights);
            fit_cfg.restarts = restarts;
            fit_cfg.max_iterations = max_iterations;
            fit_cfg.spatial_rule = spatial_rule;
            fit_cfg.seed = seed;
            let model = r(kproto::fit(&loaded.dataset, &fit_cfg).map_err(Into::into))?;
            let ids = record_ids(&loaded.dataset);
            r(writer.write(
                "assignments.csv",
                &assignments_csv(&banner, &ids, &model.assignment),
            ))?;
            r(writer.write_json("model.json", &model_doc(&loaded.dataset, &model)))?;
        }
        None => {
            println!("none");
            log::warn!("no k in range satisfied the selection rule; skipping the refit");
        }
    }
    r(writer.finish())
}

struct PortfolioTable {
    ids: Vec<String>,
    by_id: BTreeMap<String, PortfolioRow>,
}

struct PortfolioRow {
    face_amount: f64,
    death: bool,
    expected_rate: f64,
}

fn parse_death(raw: &str, row: usize) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => bail!("row {row}: death indicator '{other}' is not 0/1/true/false"),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require_column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    column_index(headers, name)
        .ok_or_else(|| anyhow!("{} is missing the '{name}' column", path.display()))
}

/// Reads a rate table keyed by (age, sex, smoker).
fn read_rate_table(path: &Path) -> Result<BTreeMap<(String, String, String), f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading rate table {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let age = require_column(&headers, "age", path)?;
    let sex = require_column(&headers, "sex", path)?;
    let smoker = require_column(&headers, "smoker", path)?;
    let rate = require_column(&headers, "expected_rate", path)?;
    let mut table = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let key = (
            record[age].trim().to_string(),
            record[sex].trim().to_string(),
            record[smoker].trim().to_string(),
        );
        let value: f64 = record[rate]
            .trim()
            .parse()
            .with_context(|| format!("rate table row {}: bad expected_rate", i + 1))?;
        if table.insert(key.clone(), value).is_some() {
            bail!("rate table has duplicate key ({}, {}, {})", key.0, key.1, key.2);
        }
    }
    Ok(table)
}

fn read_portfolio(path: &Path, rate_table: Option<&Path>) -> Result<PortfolioTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading portfolio {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let id = require_column(&headers, "id", path)?;
    let face = require_column(&headers, "face_amount", path)?;
    let death = require_column(&headers, "death", path)?;
    let rate_col = column_index(&headers, "expected_rate");

    let rates = match (rate_table, rate_col) {
        (Some(table_path), None) => {
            let age = require_column(&headers, "age", path)?;
            let sex = require_column(&headers, "sex", path)?;
            let smoker = require_column(&headers, "smoker", path)?;
            Some((read_rate_table(table_path)?, age, sex, smoker))
        }
        (Some(_), Some(_)) => bail!(
            "{} already has an expected_rate column; drop it or drop --rate-table",
            path.display()
        ),
        (None, None) => bail!(
            "{} is missing the 'expected_rate' column and no --rate-table was given",
            path.display()
        ),
        (None, Some(_)) => None,
    };

    let mut ids = Vec::new();
    let mut by_id = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let id = record[id].trim().to_string();
        let face_amount: f64 = record[face]
            .trim()
            .parse()
            .with_context(|| format!("row {row}: bad face_amount"))?;
        let death = parse_death(&record[death], row)?;
        let expected_rate = match (&rates, rate_col) {
            (Some((table, age, sex, smoker)), _) => {
                let key = (
                    record[*age].trim().to_string(),
                    record[*sex].trim().to_string(),
                    record[*smoker].trim().to_string(),
                );
                *table.get(&key).ok_or_else(|| {
                    anyhow!(
                        "row {row}: no rate for (age={}, sex={}, smoker={})",
                        key.0,
                        key.1,
                        key.2
                    )
                })?
            }
            (None, Some(col)) => record[col]
                .trim()
                .parse()
                .with_context(|| format!("row {row}: bad expected_rate"))?,
            (None, None) => unreachable!("guarded above"),
        };
        if by_id
            .insert(
                id.clone(),
                PortfolioRow {
                    face_amount,
                    death,
                    expected_rate,
                },
            )
            .is_some()
        {
            bail!("{}: duplicate id '{id}'", path.display());
        }
        ids.push(id);
    }
    if ids.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(PortfolioTable { ids, by_id })
}

fn read_assignments(path: &Path) -> Result<BTreeMap<String, u32>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading assignments {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let id = require_column(&headers, "id", path)?;
    let cluster = require_column(&headers, "cluster", path)?;
    let mut map = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let key = record[id].trim().to_string();
        let value: u32 = record[cluster]
            .trim()
            .parse()
            .with_context(|| format!("assignments row {}: bad cluster", i + 1))?;
        if map.insert(key.clone(), value).is_some() {
            bail!("{}: duplicate id '{key}'", path.display());
        }
    }
    if map.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(map)
}

fn level_label(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

fn experience_csv(
    banner: &str,
    report: &geoproto_core::experience::ExperienceReport,
) -> Vec<u8> {
    let mut text = String::from(banner);
    text.push_str("cluster,records,actual,expected,ratio,std_error");
    for level in &report.levels {
        let tag = level_label(*level);
        let _ = write!(text, ",lower_{tag},upper_{tag},excludes_null_{tag}");
    }
    text.push('\n');
    let mut emit = |row: &geoproto_core::experience::ClusterExperience| {
        let cluster = row
            .cluster
            .map(|c| c.to_string())
            .unwrap_or_else(|| "portfolio".to_string());
        let _ = write!(
            text,
            "{cluster},{},{},{},{},{}",
            row.records, row.actual_claims, row.expected_claims, row.ratio, row.std_error
        );
        for ci in &row.intervals {
            let _ = write!(text, ",{},{},{}", ci.lower, ci.upper, ci.excludes_null);
        }
        text.push('\n');
    };
    for row in &report.clusters {
        emit(row);
    }
    emit(&report.portfolio);
    text.into_bytes()
}

pub fn experience(args: &ExperienceArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.config.as_deref()))?;
    let assignments_path = v(require(
        args.assignments.clone(),
        cfg.experience.assignments.clone(),
        "assignments",
        "[experience] assignments",
    ))?;
    let portfolio_path = v(require(
        args.portfolio.clone(),
        cfg.experience.portfolio.clone(),
        "portfolio",
        "[experience] portfolio",
    ))?;
    let rate_table = args.rate_table.clone().or(cfg.experience.rate_table.clone());
    let levels = resolve(
        args.levels.clone(),
        cfg.experience.levels.clone(),
        vec![0.90, 0.95],
    );
    let center: IntervalCenter = args
        .center
        .map(Into::into)
        .or(cfg.experience.center)
        .unwrap_or_default();
    let out = resolve(args.out.clone(), cfg.output.clone(), PathBuf::from("geoproto-out"));
    for level in &levels {
        if !(0.0..1.0).contains(level) || *level <= 0.0 {
            return Err(Failure::Validation(anyhow!(
                "confidence level {level} is outside (0, 1)"
            )));
        }
    }

    let effective = Effective::Experience {
        assignments: assignments_path.display().to_string(),
        portfolio: portfolio_path.display().to_string(),
        rate_table: rate_table.as_ref().map(|p| p.display().to_string()),
        levels: levels.clone(),
        center,
    };
    let mut writer = r(RunWriter::new(&out, None, effective))?;
    r(writer.note_input(&assignments_path))?;
    r(writer.note_input(&portfolio_path))?;
    if let Some(table) = &rate_table {
        r(writer.note_input(table))?;
    }

    let assignments = v(read_assignments(&assignments_path))?;
    let portfolio = v(read_portfolio(&portfolio_path, rate_table.as_deref()))?;

    let mut missing_assignment = 0usize;
    let mut records = Vec::with_capacity(portfolio.ids.len());
    for (i, id) in portfolio.ids.iter().enumerate() {
        let row = &portfolio.by_id[id];
        match assignments.get(id) {
            Some(&cluster) => records.push(ExperienceRecord {
                id: i as u64,
                cluster,
                face_amount: row.face_amount,
                death: row.death,
                expected_rate: row.expected_rate,
            }),
            None => missing_assignment += 1,
        }
    }
    if missing_assignment > 0 {
        return Err(Failure::Validation(anyhow!(
            "{missing_assignment} portfolio records have no cluster assignment"
        )));
    }
    let unmatched = assignments
        .keys()
        .filter(|id| !portfolio.by_id.contains_key(*id))
        .count();
    if unmatched > 0 {
        return Err(Failure::Validation(anyhow!(
            "{unmatched} assignment ids are absent from the portfolio"
        )));
    }

    let report = r(geoproto_core::experience_report(&records, &levels, center).map_err(Into::into))?;
    let banner = writer.banner();
    r(writer.write("experience.csv", &experience_csv(&banner, &report)))?;
    r(writer.write_json("experience.json", &report))?;
    r(writer.finish())
}

fn labels_csv(banner: &str, labels: &[u32]) -> Vec<u8> {
    let mut text = String::from(banner);
    text.push_str("id,cluster\n");
    for (i, label) in labels.iter().enumerate() {
        let _ = writeln!(text, "{i},{label}");
    }
    text.into_bytes()
}

pub fn synth_cmd(args: &SynthArgs) -> Result<(), Failure> {
    let cfg = v(RunConfig::load(args.config.as_deref()))?;
    let seed = resolve(args.seed, cfg.seed, 0);
    let out = resolve(args.out.clone(), cfg.output.clone(), PathBuf::from("geoproto-out"));

    let spec_path = args.spec.clone().or(cfg.synth.spec.clone());
    let clusters = args.clusters.or(cfg.synth.clusters);
    let (spec, source, input_path) = match (spec_path, clusters) {
        (Some(path), _) => {
            let text = v(std::fs::read_to_string(&path)
                .with_context(|| format!("reading generator spec {}", path.display())))?;
            let spec = v(SynthSpec::from_toml_str(&text).map_err(Into::into))?;
            let source = SynthSource::File {
                path: path.display().to_string(),
            };
            (spec, source, Some(path))
        }
        (None, Some(k)) => {
            let records = v(require(
                args.records,
                cfg.synth.records,
                "records",
                "[synth] records",
            ))?;
            let spec = synth::well_separated(k, records);
            (
                spec,
                SynthSource::WellSeparated {
                    clusters: k,
                    records,
                },
                None,
            )
        }
        (None, None) => {
            return Err(Failure::Validation(anyhow!(
                "missing generator parameters: pass --spec (or --clusters with --records), or set [synth] in the run config"
            )))
        }
    };

    let effective = Effective::Synth { spec: source, seed };
    let mut writer = r(RunWriter::new(&out, Some(seed), effective))?;
    if let Some(path) = &input_path {
        r(writer.note_input(path))?;
    }

    let generated = r(synth::generate(&spec, seed).map_err(Into::into))?;
    let banner = writer.banner();

    let mut portfolio = banner.clone().into_bytes();
    r(synth::to_csv(&generated, &spec, &mut portfolio).map_err(Into::into))?;
    r(writer.write("portfolio.csv", &portfolio))?;
    r(writer.write("labels.csv", &labels_csv(&banner, &generated.labels)))?;

    let schema_text = r(toml::to_string_pretty(&spec.schema_config()).context("encoding schema"))?;
    let schema_file = format!("{banner}{schema_text}");
    r(writer.write("schema.toml", schema_file.as_bytes()))?;
    r(writer.finish())
}
