//! Synthetic mixed-type portfolios with known cluster structure.
//!
//! Generators here exist to exercise the pipeline end to end: records carry
//! numerical, categorical, and coordinate attributes drawn per cluster, plus
//! the mortality payload (face amount, death indicator, expected rate) the
//! experience study consumes. The true labels come back alongside the data
//! so recovery can be scored.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distance::GeoPoint;
use crate::error::{Error, Result};
use crate::rng::{stage, stream};
use crate::schema::{
    AttributeConfig, AttributeDescriptor, AttributeKind, IngestOptions, Normalization,
    NormalizationParams, Schema, SchemaConfig, SCHEMA_VERSION,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    /// Sorted, unique level strings.
    pub levels: Vec<String>,
}

/// One mixture component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// Relative share of records; weights are normalized internally.
    pub weight: f64,
    pub numerical_means: Vec<f64>,
    pub numerical_sds: Vec<f64>,
    /// Per categorical attribute, one weight per level.
    pub level_weights: Vec<Vec<f64>>,
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    /// Standard deviation of the coordinate jitter, in degrees.
    pub spread_deg: f64,
    pub mortality_rate: f64,
    pub face_amount_range: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// Numerical attribute names.
    pub numerical: Vec<String>,
    pub categorical: Vec<CategoricalSpec>,
    pub spatial_name: Option<String>,
    pub clusters: Vec<ClusterSpec>,
}

pub struct SynthOutput {
    pub dataset: Dataset,
    pub labels: Vec<u32>,
    pub face_amounts: Vec<f64>,
    pub deaths: Vec<bool>,
    pub expected_rates: Vec<f64>,
    /// Raw (pre-normalization) numerical values, column-major.
    pub raw_numerical: Vec<Vec<f64>>,
    pub raw_lat_deg: Vec<f64>,
    pub raw_lon_deg: Vec<f64>,
}

impl SynthSpec {
    pub fn from_toml_str(text: &str) -> Result<SynthSpec> {
        let spec: SynthSpec = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("synthesis spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.clusters.is_empty() {
            return Err(Error::InvalidConfig("at least one cluster is required".into()));
        }
        for c in &self.categorical {
            if c.levels.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "categorical '{}' has no levels",
                    c.name
                )));
            }
            if c.levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "levels of '{}' must be sorted and unique",
                    c.name
                )));
            }
        }
        let mut weight_total = 0.0;
        for (j, cl) in self.clusters.iter().enumerate() {
            if !(cl.weight.is_finite() && cl.weight >= 0.0) {
                return Err(Error::InvalidConfig(format!("cluster {j}: bad weight")));
            }
            weight_total += cl.weight;
            if cl.numerical_means.len() != self.numerical.len()
                || cl.numerical_sds.len() != self.numerical.len()
            {
                return Err(Error::InvalidConfig(format!(
                    "cluster {j}: expected {} numerical means and sds",
                    self.numerical.len()
                )));
            }
            if cl.numerical_means.iter().any(|m| !m.is_finite())
                || cl.numerical_sds.iter().any(|s| !(s.is_finite() && *s >= 0.0))
            {
                return Err(Error::InvalidConfig(format!(
                    "cluster {j}: numerical means must be finite, sds non-negative"
                )));
            }
            if cl.level_weights.len() != self.categorical.len() {
                return Err(Error::InvalidConfig(format!(
                    "cluster {j}: expected level weights for {} categorical attributes",
                    self.categorical.len()
                )));
            }
            for (a, (weights, attr)) in cl.level_weights.iter().zip(&self.categorical).enumerate()
            {
                if weights.len() != attr.levels.len()
                    || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                    || weights.iter().sum::<f64>() <= 0.0
                {
                    return Err(Error::InvalidConfig(format!(
                        "cluster {j}, attribute '{}': need {} non-negative weights with a positive sum",
                        self.categorical[a].name,
                        attr.levels.len()
                    )));
                }
            }
            if self.spatial_name.is_some() {
                GeoPoint::from_degrees(cl.center_lat_deg, cl.center_lon_deg)?;
                if !(cl.spread_deg.is_finite() && cl.spread_deg >= 0.0) {
                    return Err(Error::InvalidConfig(format!("cluster {j}: bad spread")));
                }
            }
            if !(cl.mortality_rate.is_finite() && (0.0..=1.0).contains(&cl.mortality_rate)) {
                return Err(Error::InvalidConfig(format!(
                    "cluster {j}: mortality rate must lie in [0, 1]"
                )));
            }
            let [lo, hi] = cl.face_amount_range;
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "cluster {j}: bad face amount range"
                )));
            }
        }
        if !(weight_total > 0.0) {
            return Err(Error::InvalidConfig("cluster weights sum to zero".into()));
        }
        Ok(())
    }

    /// Schema config matching [`to_csv`] output, ready to feed back into
    /// ingestion.
    pub fn schema_config(&self) -> SchemaConfig {
        let mut attributes: Vec<AttributeConfig> = self
            .numerical
            .iter()
            .map(|name| AttributeConfig::Numerical {
                name: name.clone(),
                column: None,
                normalization: Normalization::MinMax,
            })
            .collect();
        attributes.extend(self.categorical.iter().map(|c| AttributeConfig::Categorical {
            name: c.name.clone(),
            column: None,
        }));
        if let Some(name) = &self.spatial_name {
            attributes.push(AttributeConfig::Spatial {
                name: name.clone(),
                lat: format!("{name}_lat"),
                lon: format!("{name}_lon"),
            });
        }
        SchemaConfig {
            schema_version: SCHEMA_VERSION,
            attributes,
            ingest: IngestOptions {
                payload: ["id", "cluster", "face_amount", "death", "expected_rate"]
                    .map(String::from)
                    .to_vec(),
                ..IngestOptions::default()
            },
        }
    }
}

/// Deterministic template with k well-separated components: numerical means
/// far apart relative to their sds, one dominant categorical level per
/// cluster, and coordinate centers spread across the map.
pub fn well_separated(k: usize, n: usize) -> SynthSpec {
    let span = k.saturating_sub(1).max(1) as f64;
    let clusters = (0..k)
        .map(|j| {
            let t = j as f64 / span;
            let mut level_weights = vec![0.15 / (k.max(2) - 1) as f64; k];
            level_weights[j] = 0.85;
            if k == 1 {
                level_weights = vec![1.0];
            }
            ClusterSpec {
                weight: 1.0,
                numerical_means: vec![20.0 * j as f64, 100.0 - 15.0 * j as f64],
                numerical_sds: vec![2.0, 2.0],
                level_weights: vec![level_weights],
                center_lat_deg: -40.0 + 80.0 * t,
                center_lon_deg: -150.0 + 300.0 * t,
                spread_deg: 1.0,
                mortality_rate: (0.01 + 0.005 * j as f64).min(0.5),
                face_amount_range: [5.0e4, 5.0e5],
            }
        })
        .collect();
    SynthSpec {
        n,
        numerical: vec!["x1".into(), "x2".into()],
        categorical: vec![CategoricalSpec {
            name: "segment".into(),
            levels: (0..k).map(|j| format!("l{j:02}")).collect(),
        }],
        spatial_name: Some("location".into()),
        clusters,
    }
}

/// Draws a portfolio. Per-record draw order is fixed (component, numericals,
/// categoricals, latitude, longitude, death, face amount) so output is a
/// pure function of the spec and seed.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    spec.validate()?;
    let k = spec.clusters.len();
    let d1 = spec.numerical.len();
    let c = spec.categorical.len();
    let has_spatial = spec.spatial_name.is_some();

    let component = WeightedIndex::new(spec.clusters.iter().map(|cl| cl.weight))
        .map_err(|e| Error::InvalidConfig(format!("cluster weights: {e}")))?;
    let mut numerical_draws = Vec::with_capacity(k);
    let mut level_draws = Vec::with_capacity(k);
    let mut jitter_draws = Vec::with_capacity(k);
    let mut face_draws = Vec::with_capacity(k);
    for cl in &spec.clusters {
        numerical_draws.push(
            cl.numerical_means
                .iter()
                .zip(&cl.numerical_sds)
                .map(|(&m, &s)| {
                    Normal::new(m, s).map_err(|e| Error::InvalidConfig(format!("normal: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
        );
        level_draws.push(
            cl.level_weights
                .iter()
                .map(|w| {
                    WeightedIndex::new(w.iter().copied())
                        .map_err(|e| Error::InvalidConfig(format!("level weights: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
        );
        jitter_draws.push(
            Normal::new(0.0, cl.spread_deg)
                .map_err(|e| Error::InvalidConfig(format!("spread: {e}")))?,
        );
        face_draws.push(
            Uniform::new_inclusive(cl.face_amount_range[0], cl.face_amount_range[1])
                .map_err(|e| Error::InvalidConfig(format!("face amounts: {e}")))?,
        );
    }

    let mut rng = stream(seed, stage::SYNTH, 0);
    let mut labels = Vec::with_capacity(spec.n);
    let mut raw_numerical = vec![Vec::with_capacity(spec.n); d1];
    let mut categorical = Vec::with_capacity(spec.n * c);
    let mut raw_lat_deg = Vec::with_capacity(if has_spatial { spec.n } else { 0 });
    let mut raw_lon_deg = Vec::with_capacity(if has_spatial { spec.n } else { 0 });
    let mut face_amounts = Vec::with_capacity(spec.n);
    let mut deaths = Vec::with_capacity(spec.n);
    let mut expected_rates = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let j = component.sample(&mut rng);
        labels.push(j as u32);
        for (col, draw) in raw_numerical.iter_mut().zip(&numerical_draws[j]) {
            col.push(draw.sample(&mut rng));
        }
        for draw in &level_draws[j] {
            categorical.push(draw.sample(&mut rng) as u32);
        }
        if has_spatial {
            let cl = &spec.clusters[j];
            let lat = (cl.center_lat_deg + jitter_draws[j].sample(&mut rng)).clamp(-90.0, 90.0);
            let lon = (cl.center_lon_deg + jitter_draws[j].sample(&mut rng)).clamp(-180.0, 180.0);
            raw_lat_deg.push(lat);
            raw_lon_deg.push(lon);
        }
        deaths.push(rng.random::<f64>() < spec.clusters[j].mortality_rate);
        face_amounts.push(face_draws[j].sample(&mut rng));
        expected_rates.push(spec.clusters[j].mortality_rate);
    }

    let mut attributes = Vec::with_capacity(d1 + c + usize::from(has_spatial));
    let mut normalization = Vec::with_capacity(d1);
    let mut numerical = vec![0.0; spec.n * d1];
    for (jn, name) in spec.numerical.iter().enumerate() {
        let params = NormalizationParams::fit(Normalization::MinMax, &raw_numerical[jn])?;
        for (i, &raw) in raw_numerical[jn].iter().enumerate() {
            numerical[i * d1 + jn] = params.normalize(raw);
        }
        normalization.push(params);
        attributes.push(AttributeDescriptor {
            name: name.clone(),
            kind: AttributeKind::Numerical {
                normalization: Normalization::MinMax,
            },
        });
    }
    for cat in &spec.categorical {
        attributes.push(AttributeDescriptor {
            name: cat.name.clone(),
            kind: AttributeKind::Categorical {
                levels: cat.levels.clone(),
            },
        });
    }
    if let Some(name) = &spec.spatial_name {
        attributes.push(AttributeDescriptor {
            name: name.clone(),
            kind: AttributeKind::Spatial,
        });
    }
    let spatial = raw_lat_deg
        .iter()
        .zip(&raw_lon_deg)
        .map(|(&lat, &lon)| GeoPoint::from_degrees(lat, lon))
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::from_parts(
        Schema::new(attributes)?,
        normalization,
        spec.n,
        numerical,
        categorical,
        spatial,
    )?;
    Ok(SynthOutput {
        dataset,
        labels,
        face_amounts,
        deaths,
        expected_rates,
        raw_numerical,
        raw_lat_deg,
        raw_lon_deg,
    })
}

/// Writes the generated portfolio as a CSV that round-trips through
/// ingestion with [`SynthSpec::schema_config`]. Death is written as 0/1;
/// floats use the shortest representation that parses back exactly.
pub fn to_csv<W: std::io::Write>(out: &SynthOutput, spec: &SynthSpec, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(spec.numerical.iter().cloned());
    header.extend(spec.categorical.iter().map(|c| c.name.clone()));
    if let Some(name) = &spec.spatial_name {
        header.push(format!("{name}_lat"));
        header.push(format!("{name}_lon"));
    }
    header.extend(["cluster", "face_amount", "death", "expected_rate"].map(String::from));
    w.write_record(&header)?;

    for i in 0..out.labels.len() {
        let mut row = vec![i.to_string()];
        for col in &out.raw_numerical {
            row.push(col[i].to_string());
        }
        for (a, cat) in spec.categorical.iter().enumerate() {
            let code = out.dataset.categorical_code(i, a);
            row.push(cat.levels[code as usize].clone());
        }
        if spec.spatial_name.is_some() {
            row.push(out.raw_lat_deg[i].to_string());
            row.push(out.raw_lon_deg[i].to_string());
        }
        row.push(out.labels[i].to_string());
        row.push(out.face_amounts[i].to_string());
        row.push(if out.deaths[i] { "1" } else { "0" }.to_string());
        row.push(out.expected_rates[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Agreement between two flat partitions, corrected for chance. Identical
/// partitions score 1, independent ones about 0. A zero denominator (both
/// partitions trivial in the same way) scores 1.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as f64;
    let mut cells: std::collections::HashMap<(u32, u32), u64> = std::collections::HashMap::new();
    let mut rows: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
    let mut cols: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let comb2 = |m: u64| (m as f64) * (m as f64 - 1.0) / 2.0;
    let index: f64 = cells.values().map(|&m| comb2(m)).sum();
    let row_sum: f64 = rows.values().map(|&m| comb2(m)).sum();
    let col_sum: f64 = cols.values().map(|&m| comb2(m)).sum();
    let expected = row_sum * col_sum / comb2(a.len() as u64).max(1.0);
    let max_index = (row_sum + col_sum) / 2.0;
    let denom = max_index - expected;
    if denom.abs() < f64::EPSILON * n * n {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}
