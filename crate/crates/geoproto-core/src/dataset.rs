//! In-memory dataset: normalized numericals, categorical level indices,
//! spatial coordinates in radians, and untouched payload columns.
//!
//! Ingestion fits normalization parameters on the rows that survive
//! filtering, discovers categorical levels, and validates coordinates.
//! Payload columns (claim indicators, face amounts, ids) ride along as raw
//! strings so they round-trip bit-exactly.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distance::GeoPoint;
use crate::error::{Error, Result};
use crate::numeric;
use crate::schema::{
    AttributeConfig, AttributeDescriptor, AttributeKind, BadRowPolicy, Normalization,
    NormalizationParams, Schema, SchemaConfig,
};

/// Borrowed view of one record's attribute values.
#[derive(Clone, Copy, Debug)]
pub struct RecordView<'a> {
    pub numerical: &'a [f64],
    pub categorical: &'a [u32],
    pub spatial: Option<GeoPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    normalization: Vec<NormalizationParams>,
    n: usize,
    numerical: Vec<f64>,
    categorical: Vec<u32>,
    spatial: Vec<GeoPoint>,
    spatial_trig: Vec<(f64, f64)>,
    payload_names: Vec<String>,
    payload: Vec<Vec<String>>,
}

/// Result of a CSV ingestion.
#[derive(Debug)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_skipped: usize,
}

/// One row of [`Dataset::summary`].
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub attribute: String,
    pub kind: String,
    pub item: String,
    pub value: String,
}

impl Dataset {
    /// Builds a dataset from already-normalized columns.
    ///
    /// `numerical` and `categorical` are row-major. Numerical values must lie
    /// in [0, 1], categorical codes must index into the schema's level lists,
    /// and coordinates must be valid radians.
    pub fn from_parts(
        schema: Schema,
        normalization: Vec<NormalizationParams>,
        n: usize,
        numerical: Vec<f64>,
        categorical: Vec<u32>,
        spatial: Vec<GeoPoint>,
    ) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if normalization.len() != schema.numerical_count() {
            return Err(Error::InvalidSchema(format!(
                "{} normalization entries for {} numerical attributes",
                normalization.len(),
                schema.numerical_count()
            )));
        }
        if numerical.len() != n * schema.numerical_count() {
            return Err(Error::InvalidSchema(format!(
                "numerical buffer holds {} values, expected {}",
                numerical.len(),
                n * schema.numerical_count()
            )));
        }
        if categorical.len() != n * schema.categorical_count() {
            return Err(Error::InvalidSchema(format!(
                "categorical buffer holds {} values, expected {}",
                categorical.len(),
                n * schema.categorical_count()
            )));
        }
        let expected_spatial = if schema.has_spatial() { n } else { 0 };
        if spatial.len() != expected_spatial {
            return Err(Error::InvalidSchema(format!(
                "spatial buffer holds {} points, expected {expected_spatial}",
                spatial.len()
            )));
        }
        if numerical.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidSchema(
                "normalized numerical values must lie in [0, 1]".into(),
            ));
        }
        let c = schema.categorical_count();
        for (pos, &code) in categorical.iter().enumerate() {
            let j = pos % c.max(1);
            if code as usize >= schema.levels(j).len() {
                return Err(Error::InvalidSchema(format!(
                    "categorical code {code} out of range for attribute '{}'",
                    schema.categorical()[j].name
                )));
            }
        }
        use std::f64::consts::{FRAC_PI_2, PI};
        for p in &spatial {
            if !p.lat.is_finite()
                || !p.lon.is_finite()
                || p.lat.abs() > FRAC_PI_2
                || p.lon.abs() > PI
            {
                return Err(Error::InvalidCoordinate {
                    lat_deg: p.lat_deg(),
                    lon_deg: p.lon_deg(),
                });
            }
        }

        let spatial_trig = spatial.iter().map(|p| (p.lat.sin(), p.lat.cos())).collect();
        Ok(Dataset {
            schema,
            normalization,
            n,
            numerical,
            categorical,
            spatial,
            spatial_trig,
            payload_names: Vec::new(),
            payload: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn normalization(&self) -> &[NormalizationParams] {
        &self.normalization
    }

    pub fn record(&self, i: usize) -> RecordView<'_> {
        let d1 = self.schema.numerical_count();
        let c = self.schema.categorical_count();
        RecordView {
            numerical: &self.numerical[i * d1..(i + 1) * d1],
            categorical: &self.categorical[i * c..(i + 1) * c],
            spatial: self.spatial.get(i).copied(),
        }
    }

    pub fn spatial(&self, i: usize) -> Option<GeoPoint> {
        self.spatial.get(i).copied()
    }

    pub fn spatial_points(&self) -> &[GeoPoint] {
        &self.spatial
    }

    /// Precomputed (sin lat, cos lat) for record `i`.
    pub(crate) fn spatial_trig(&self, i: usize) -> (f64, f64) {
        self.spatial_trig[i]
    }

    /// Copy of one normalized numerical column (`j` indexes numerical
    /// attributes in schema order).
    pub fn numerical_column(&self, j: usize) -> Vec<f64> {
        let d1 = self.schema.numerical_count();
        (0..self.n).map(|i| self.numerical[i * d1 + j]).collect()
    }

    /// Observed (min, max) of a normalized numerical column.
    pub fn numerical_bounds(&self, j: usize) -> (f64, f64) {
        let d1 = self.schema.numerical_count();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..self.n {
            let v = self.numerical[i * d1 + j];
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }

    /// Level counts of categorical attribute `j`.
    pub fn categorical_counts(&self, j: usize) -> Vec<u64> {
        let c = self.schema.categorical_count();
        let mut counts = vec![0u64; self.schema.levels(j).len()];
        for i in 0..self.n {
            counts[self.categorical[i * c + j] as usize] += 1;
        }
        counts
    }

    /// Categorical code of record `i` for categorical attribute `j`.
    pub fn categorical_code(&self, i: usize, j: usize) -> u32 {
        self.categorical[i * self.schema.categorical_count() + j]
    }

    /// Observed bounding box (lat_min, lat_max, lon_min, lon_max) in radians.
    pub fn spatial_bounds(&self) -> Option<(f64, f64, f64, f64)> {
        if self.spatial.is_empty() {
            return None;
        }
        let mut b = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &self.spatial {
            b.0 = b.0.min(p.lat);
            b.1 = b.1.max(p.lat);
            b.2 = b.2.min(p.lon);
            b.3 = b.3.max(p.lon);
        }
        Some(b)
    }

    pub fn payload_names(&self) -> &[String] {
        &self.payload_names
    }

    pub fn payload_column(&self, name: &str) -> Option<&[String]> {
        self.payload_names
            .iter()
            .position(|p| p == name)
            .map(|idx| self.payload[idx].as_slice())
    }

    /// New dataset holding the given rows (payload included). Schema and
    /// normalization parameters are carried over unchanged, so level lists
    /// may contain levels the subset never uses.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let d1 = self.schema.numerical_count();
        let c = self.schema.categorical_count();
        let mut numerical = Vec::with_capacity(rows.len() * d1);
        let mut categorical = Vec::with_capacity(rows.len() * c);
        let mut spatial = Vec::with_capacity(if self.schema.has_spatial() {
            rows.len()
        } else {
            0
        });
        for &r in rows {
            if r >= self.n {
                return Err(Error::InvalidConfig(format!(
                    "row index {r} out of range for {} records",
                    self.n
                )));
            }
            numerical.extend_from_slice(&self.numerical[r * d1..(r + 1) * d1]);
            categorical.extend_from_slice(&self.categorical[r * c..(r + 1) * c]);
            if self.schema.has_spatial() {
                spatial.push(self.spatial[r]);
            }
        }
        let mut out = Dataset::from_parts(
            self.schema.clone(),
            self.normalization.clone(),
            rows.len(),
            numerical,
            categorical,
            spatial,
        )?;
        out.payload_names = self.payload_names.clone();
        out.payload = self
            .payload
            .iter()
            .map(|col| rows.iter().map(|&r| col[r].clone()).collect())
            .collect();
        Ok(out)
    }

    /// Draws round(fraction * stratum size) rows per stratum without
    /// replacement, where strata are the joint levels of the named
    /// categorical attributes. An empty list means one global stratum.
    /// Selected rows keep their original relative order.
    pub fn stratified_sample(
        &self,
        fraction: f64,
        strata: &[String],
        seed: u64,
    ) -> Result<Dataset> {
        if !fraction.is_finite() || fraction <= 0.0 || fraction > 1.0 {
            return Err(Error::BadSampleFraction(fraction));
        }
        let mut positions = Vec::with_capacity(strata.len());
        for name in strata {
            match self.schema.categorical_position(name) {
                Some(j) => positions.push(j),
                None => {
                    if self.schema.attributes().iter().any(|a| &a.name == name) {
                        return Err(Error::NonCategoricalStratum { name: name.clone() });
                    }
                    return Err(Error::UnknownAttribute { name: name.clone() });
                }
            }
        }

        let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
        for i in 0..self.n {
            let key: Vec<u32> = positions.iter().map(|&j| self.categorical_code(i, j)).collect();
            groups.entry(key).or_default().push(i);
        }
        let mut keys: Vec<Vec<u32>> = groups.keys().cloned().collect();
        keys.sort_unstable();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut selected = Vec::new();
        for key in keys {
            let rows = &groups[&key];
            let count = ((fraction * rows.len() as f64).round() as usize).min(rows.len());
            if count == 0 {
                continue;
            }
            for idx in rand::seq::index::sample(&mut rng, rows.len(), count) {
                selected.push(rows[idx]);
            }
        }
        if selected.is_empty() {
            return Err(Error::EmptyInput);
        }
        selected.sort_unstable();
        self.select_rows(&selected)
    }

    /// Per-attribute summary: raw-scale min/mean/max for numericals, level
    /// frequencies for categoricals, the bounding box for the spatial
    /// attribute.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = vec![SummaryRow {
            attribute: String::new(),
            kind: "dataset".into(),
            item: "records".into(),
            value: self.n.to_string(),
        }];
        for (j, attr) in self.schema.numerical().iter().enumerate() {
            let params = self.normalization[j];
            let raw: Vec<f64> = self
                .numerical_column(j)
                .into_iter()
                .map(|v| params.denormalize(v))
                .collect();
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &v in &raw {
                min = min.min(v);
                max = max.max(v);
            }
            for (item, value) in [
                ("min", min),
                ("mean", numeric::mean(&raw)),
                ("max", max),
            ] {
                rows.push(SummaryRow {
                    attribute: attr.name.clone(),
                    kind: "numerical".into(),
                    item: item.into(),
                    value: value.to_string(),
                });
            }
        }
        for (j, attr) in self.schema.categorical().iter().enumerate() {
            let counts = self.categorical_counts(j);
            for (code, count) in counts.iter().enumerate() {
                rows.push(SummaryRow {
                    attribute: attr.name.clone(),
                    kind: "categorical".into(),
                    item: format!("level:{}", self.schema.levels(j)[code]),
                    value: (*count as f64 / self.n as f64).to_string(),
                });
            }
        }
        if let Some((lat_min, lat_max, lon_min, lon_max)) = self.spatial_bounds() {
            let name = self
                .schema
                .attributes()
                .iter()
                .find(|a| a.kind == AttributeKind::Spatial)
                .map(|a| a.name.clone())
                .unwrap_or_default();
            for (item, value) in [
                ("lat_min_deg", lat_min.to_degrees()),
                ("lat_max_deg", lat_max.to_degrees()),
                ("lon_min_deg", lon_min.to_degrees()),
                ("lon_max_deg", lon_max.to_degrees()),
            ] {
                rows.push(SummaryRow {
                    attribute: name.clone(),
                    kind: "spatial".into(),
                    item: item.into(),
                    value: value.to_string(),
                });
            }
        }
        rows
    }

    /// Writes the dataset as CSV: denormalized numericals, level strings,
    /// coordinates in degrees, then payload columns byte-for-byte.
    pub fn export_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::new();
        for attr in self.schema.numerical() {
            header.push(attr.name.clone());
        }
        for attr in self.schema.categorical() {
            header.push(attr.name.clone());
        }
        let spatial_name = self
            .schema
            .attributes()
            .iter()
            .find(|a| a.kind == AttributeKind::Spatial)
            .map(|a| a.name.clone());
        if let Some(name) = &spatial_name {
            header.push(format!("{name}_lat"));
            header.push(format!("{name}_lon"));
        }
        header.extend(self.payload_names.iter().cloned());
        w.write_record(&header)?;

        let d1 = self.schema.numerical_count();
        let c = self.schema.categorical_count();
        for i in 0..self.n {
            let mut row = Vec::with_capacity(header.len());
            for j in 0..d1 {
                let raw = self.normalization[j].denormalize(self.numerical[i * d1 + j]);
                row.push(raw.to_string());
            }
            for j in 0..c {
                let code = self.categorical[i * c + j] as usize;
                row.push(self.schema.levels(j)[code].clone());
            }
            if spatial_name.is_some() {
                let p = self.spatial[i];
                row.push(p.lat_deg().to_string());
                row.push(p.lon_deg().to_string());
            }
            for col in &self.payload {
                row.push(col[i].clone());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct ColumnPlan {
    numerical: Vec<(usize, Normalization, String)>,
    categorical: Vec<(usize, String)>,
    spatial: Option<(usize, usize)>,
    payload: Vec<(usize, String)>,
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })
}

fn plan_columns(headers: &csv::StringRecord, cfg: &SchemaConfig) -> Result<ColumnPlan> {
    let mut plan = ColumnPlan {
        numerical: Vec::new(),
        categorical: Vec::new(),
        spatial: None,
        payload: Vec::new(),
    };
    for attr in &cfg.attributes {
        match attr {
            AttributeConfig::Numerical {
                name,
                column,
                normalization,
            } => {
                let col = column.as_deref().unwrap_or(name);
                plan.numerical
                    .push((find_column(headers, col)?, *normalization, col.to_string()));
            }
            AttributeConfig::Categorical { name, column } => {
                let col = column.as_deref().unwrap_or(name);
                plan.categorical
                    .push((find_column(headers, col)?, col.to_string()));
            }
            AttributeConfig::Spatial { lat, lon, .. } => {
                plan.spatial = Some((find_column(headers, lat)?, find_column(headers, lon)?));
            }
        }
    }
    for name in &cfg.ingest.payload {
        plan.payload
            .push((find_column(headers, name)?, name.clone()));
    }
    Ok(plan)
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<&'r str> {
    let value = record.get(idx).unwrap_or("").trim();
    if value.is_empty() {
        return Err(Error::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    Ok(value)
}

fn parse_f64(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64> {
    let value = field(record, idx, row, column)?;
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadNumeric {
            row,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Ingests CSV rows under a schema config.
///
/// Hard errors (missing columns, unparseable numerics, missing values) abort
/// regardless of policy. Domain violations (coordinates out of range,
/// non-positive values under log normalization) follow
/// `cfg.ingest.on_bad_row`. Normalization is fitted on the surviving rows.
/// Lines starting with `#` are skipped, so files that declare their seed and
/// config hash in a leading comment round-trip cleanly.
pub fn ingest_csv_reader<R: Read>(reader: R, cfg: &SchemaConfig) -> Result<Ingested> {
    cfg.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let plan = plan_columns(&headers, cfg)?;

    let mut raw_numerical: Vec<Vec<f64>> = vec![Vec::new(); plan.numerical.len()];
    let mut level_maps: Vec<HashMap<String, u32>> = vec![HashMap::new(); plan.categorical.len()];
    let mut level_lists: Vec<Vec<String>> = vec![Vec::new(); plan.categorical.len()];
    let mut raw_categorical: Vec<Vec<u32>> = vec![Vec::new(); plan.categorical.len()];
    let mut spatial: Vec<GeoPoint> = Vec::new();
    let mut payload: Vec<Vec<String>> = vec![Vec::new(); plan.payload.len()];

    let mut rows_read = 0usize;
    let mut rows_skipped = 0usize;
    let mut nums = Vec::with_capacity(plan.numerical.len());
    let mut cats: Vec<String> = Vec::with_capacity(plan.categorical.len());
    let mut pays: Vec<String> = Vec::with_capacity(plan.payload.len());

    for record in rdr.records() {
        let record = record?;
        rows_read += 1;
        let row = rows_read;
        nums.clear();
        cats.clear();
        pays.clear();

        let mut reject: Option<Error> = None;
        for (idx, method, column) in &plan.numerical {
            let v = parse_f64(&record, *idx, row, column)?;
            if *method == Normalization::LogMinMax && v <= 0.0 && reject.is_none() {
                reject = Some(Error::NonPositiveLogValue {
                    row,
                    column: column.clone(),
                    value: v,
                });
            }
            nums.push(v);
        }
        for (idx, column) in &plan.categorical {
            cats.push(field(&record, *idx, row, column)?.to_string());
        }
        let mut geo = None;
        if let Some((lat_idx, lon_idx)) = plan.spatial {
            let lat_deg = parse_f64(&record, lat_idx, row, &headers[lat_idx])?;
            let lon_deg = parse_f64(&record, lon_idx, row, &headers[lon_idx])?;
            match GeoPoint::from_degrees(lat_deg, lon_deg) {
                Ok(p) => geo = Some(p),
                Err(_) if reject.is_none() => {
                    reject = Some(Error::CoordinateOutOfRange {
                        row,
                        lat_deg,
                        lon_deg,
                    });
                }
                Err(_) => {}
            }
        }
        for (idx, _) in &plan.payload {
            pays.push(record.get(*idx).unwrap_or("").to_string());
        }

        if let Some(err) = reject {
            match cfg.ingest.on_bad_row {
                BadRowPolicy::Fail => return Err(err),
                BadRowPolicy::Skip => {
                    rows_skipped += 1;
                    continue;
                }
            }
        }

        for (j, v) in nums.iter().enumerate() {
            raw_numerical[j].push(*v);
        }
        for (j, level) in cats.iter().enumerate() {
            let next = level_lists[j].len() as u32;
            let code = *level_maps[j].entry(level.clone()).or_insert_with(|| {
                level_lists[j].push(level.clone());
                next
            });
            raw_categorical[j].push(code);
        }
        if let Some(p) = geo {
            spatial.push(p);
        }
        for (j, v) in pays.iter().enumerate() {
            payload[j].push(v.clone());
        }
    }

    let n = rows_read - rows_skipped;
    if n == 0 {
        return Err(Error::EmptyInput);
    }

    // Sort each level list lexicographically and remap codes accordingly.
    for j in 0..level_lists.len() {
        let mut order: Vec<u32> = (0..level_lists[j].len() as u32).collect();
        order.sort_by(|&a, &b| level_lists[j][a as usize].cmp(&level_lists[j][b as usize]));
        let mut remap = vec![0u32; order.len()];
        for (new_code, &old_code) in order.iter().enumerate() {
            remap[old_code as usize] = new_code as u32;
        }
        for code in &mut raw_categorical[j] {
            *code = remap[*code as usize];
        }
        level_lists[j] = order
            .iter()
            .map(|&old| level_lists[j][old as usize].clone())
            .collect();
    }

    let mut normalization = Vec::with_capacity(plan.numerical.len());
    for (j, (_, method, _)) in plan.numerical.iter().enumerate() {
        normalization.push(NormalizationParams::fit(*method, &raw_numerical[j])?);
    }

    let d1 = plan.numerical.len();
    let c = plan.categorical.len();
    let mut numerical = Vec::with_capacity(n * d1);
    let mut categorical = Vec::with_capacity(n * c);
    for i in 0..n {
        for j in 0..d1 {
            numerical.push(normalization[j].normalize(raw_numerical[j][i]));
        }
        for j in 0..c {
            categorical.push(raw_categorical[j][i]);
        }
    }

    let mut attributes = Vec::with_capacity(cfg.attributes.len());
    let mut cat_j = 0;
    for attr in &cfg.attributes {
        match attr {
            AttributeConfig::Numerical {
                name,
                normalization,
                ..
            } => attributes.push(AttributeDescriptor {
                name: name.clone(),
                kind: AttributeKind::Numerical {
                    normalization: *normalization,
                },
            }),
            AttributeConfig::Categorical { name, .. } => {
                attributes.push(AttributeDescriptor {
                    name: name.clone(),
                    kind: AttributeKind::Categorical {
                        levels: level_lists[cat_j].clone(),
                    },
                });
                cat_j += 1;
            }
            AttributeConfig::Spatial { name, .. } => attributes.push(AttributeDescriptor {
                name: name.clone(),
                kind: AttributeKind::Spatial,
            }),
        }
    }

    let mut dataset = Dataset::from_parts(
        Schema::new(attributes)?,
        normalization,
        n,
        numerical,
        categorical,
        spatial,
    )?;
    dataset.payload_names = plan.payload.iter().map(|(_, name)| name.clone()).collect();
    dataset.payload = payload;

    Ok(Ingested {
        dataset,
        rows_read,
        rows_skipped,
    })
}

/// [`ingest_csv_reader`] over a file path.
pub fn ingest_csv<P: AsRef<Path>>(path: P, cfg: &SchemaConfig) -> Result<Ingested> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_csv_reader(std::io::BufReader::new(file), cfg)
}
