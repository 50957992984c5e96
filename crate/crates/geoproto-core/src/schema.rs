//! Attribute schema and the versioned TOML config that declares it.
//!
//! A schema lists numerical attributes first, then categorical, then at most
//! one spatial attribute (a latitude/longitude pair). Numerical attributes
//! carry a normalization method; parameters are fitted at ingestion and kept
//! so values can be mapped back to raw scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The schema format version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Normalization applied to a numerical attribute at ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `(x - min) / (max - min)`.
    MinMax,
    /// `(ln x - ln min) / (ln max - ln min)`; requires positive values.
    /// Intended for heavily right-skewed attributes such as face amounts.
    LogMinMax,
}

/// Fitted normalization parameters for one numerical attribute.
///
/// `min` and `max` are the observed bounds in the transformed domain: raw
/// scale for [`Normalization::MinMax`], natural-log scale for
/// [`Normalization::LogMinMax`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: Normalization,
    pub min: f64,
    pub max: f64,
}

impl NormalizationParams {
    /// Fits bounds from raw values. Log normalization requires every value
    /// to be positive; callers reject or skip offending rows beforehand.
    pub fn fit(method: Normalization, raw_values: &[f64]) -> Result<NormalizationParams> {
        if raw_values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in raw_values {
            if !v.is_finite() {
                return Err(Error::InvalidSchema(format!(
                    "cannot fit normalization over non-finite value {v}"
                )));
            }
            let t = match method {
                Normalization::MinMax => v,
                Normalization::LogMinMax => {
                    if v <= 0.0 {
                        return Err(Error::InvalidSchema(format!(
                            "log min-max requires positive values, got {v}"
                        )));
                    }
                    v.ln()
                }
            };
            min = min.min(t);
            max = max.max(t);
        }
        Ok(NormalizationParams { method, min, max })
    }

    /// Maps a raw value into [0, 1].
    ///
    /// A constant attribute (max == min) maps everything to 0 instead of
    /// dividing by zero. Results are clamped to [0, 1] to absorb the last-ulp
    /// rounding of the subtraction.
    pub fn normalize(&self, raw: f64) -> f64 {
        let t = match self.method {
            Normalization::MinMax => raw,
            Normalization::LogMinMax => raw.ln(),
        };
        if self.max > self.min {
            ((t - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Maps a normalized value back to raw scale.
    pub fn denormalize(&self, normalized: f64) -> f64 {
        let t = self.min + normalized * (self.max - self.min);
        match self.method {
            Normalization::MinMax => t,
            Normalization::LogMinMax => t.exp(),
        }
    }
}

/// What kind of attribute a column holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    Numerical { normalization: Normalization },
    /// Levels are discovered at ingestion and kept sorted lexicographically;
    /// records store indices into this list.
    Categorical { levels: Vec<String> },
    Spatial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub name: String,
    pub kind: AttributeKind,
}

/// Validated attribute list with the fixed ordering the distance and
/// clustering code relies on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<AttributeDescriptor>,
    numerical_count: usize,
    categorical_count: usize,
    has_spatial: bool,
}

impl Schema {
    /// Validates ordering (numerical, then categorical, then at most one
    /// spatial), name uniqueness, and sorted unique categorical levels.
    pub fn new(attributes: Vec<AttributeDescriptor>) -> Result<Schema> {
        if attributes.is_empty() {
            return Err(Error::InvalidSchema("schema has no attributes".into()));
        }

        let mut names: Vec<&str> = attributes.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSchema(
                "attribute names must be unique".into(),
            ));
        }

        let mut numerical_count = 0;
        let mut categorical_count = 0;
        let mut has_spatial = false;
        // Phases: 0 = numerical, 1 = categorical, 2 = spatial.
        let mut phase = 0;
        for attr in &attributes {
            let attr_phase = match &attr.kind {
                AttributeKind::Numerical { .. } => 0,
                AttributeKind::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "categorical attribute '{}' has no levels",
                            attr.name
                        )));
                    }
                    if levels.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::InvalidSchema(format!(
                            "levels of '{}' must be sorted and unique",
                            attr.name
                        )));
                    }
                    1
                }
                AttributeKind::Spatial => 2,
            };
            if attr_phase < phase {
                return Err(Error::SchemaOrder(format!(
                    "attribute '{}' appears after a later attribute class",
                    attr.name
                )));
            }
            if attr_phase == 2 && has_spatial {
                return Err(Error::SchemaOrder(
                    "at most one spatial attribute is allowed".into(),
                ));
            }
            phase = attr_phase;
            match attr_phase {
                0 => numerical_count += 1,
                1 => categorical_count += 1,
                _ => has_spatial = true,
            }
        }

        Ok(Schema {
            attributes,
            numerical_count,
            categorical_count,
            has_spatial,
        })
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn numerical_count(&self) -> usize {
        self.numerical_count
    }

    pub fn categorical_count(&self) -> usize {
        self.categorical_count
    }

    pub fn has_spatial(&self) -> bool {
        self.has_spatial
    }

    /// Numerical attribute descriptors, in schema order.
    pub fn numerical(&self) -> &[AttributeDescriptor] {
        &self.attributes[..self.numerical_count]
    }

    /// Categorical attribute descriptors, in schema order.
    pub fn categorical(&self) -> &[AttributeDescriptor] {
        &self.attributes[self.numerical_count..self.numerical_count + self.categorical_count]
    }

    /// Levels of the categorical attribute at categorical position `j`.
    pub fn levels(&self, j: usize) -> &[String] {
        match &self.categorical()[j].kind {
            AttributeKind::Categorical { levels } => levels,
            _ => unreachable!("categorical() only yields categorical attributes"),
        }
    }

    /// Position of `name` among the categorical attributes.
    pub fn categorical_position(&self, name: &str) -> Option<usize> {
        self.categorical().iter().position(|a| a.name == name)
    }
}

/// Per-row handling of domain violations at ingestion (coordinates out of
/// range, non-positive values under log normalization).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadRowPolicy {
    /// Abort ingestion with an error naming the row.
    #[default]
    Fail,
    /// Drop the row and report how many were dropped.
    Skip,
}

/// Ingestion options from the `[ingest]` table of a schema config.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestOptions {
    /// Columns carried through untouched as strings (face amounts, claim
    /// indicators, policy ids, ...).
    pub payload: Vec<String>,
    pub on_bad_row: BadRowPolicy,
}

/// One `[[attribute]]` entry of a schema config. `column` defaults to the
/// attribute name.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttributeConfig {
    Numerical {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<String>,
        normalization: Normalization,
    },
    Categorical {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<String>,
    },
    Spatial {
        name: String,
        lat: String,
        lon: String,
    },
}

impl AttributeConfig {
    pub fn name(&self) -> &str {
        match self {
            AttributeConfig::Numerical { name, .. }
            | AttributeConfig::Categorical { name, .. }
            | AttributeConfig::Spatial { name, .. } => name,
        }
    }
}

/// Parsed schema config file. Unknown keys are rejected so typos fail loudly.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub schema_version: u32,
    #[serde(rename = "attribute")]
    pub attributes: Vec<AttributeConfig>,
    #[serde(default)]
    pub ingest: IngestOptions,
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<SchemaConfig> {
        let cfg: SchemaConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("schema config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<SchemaConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.attributes.is_empty() {
            return Err(Error::InvalidSchema("schema has no attributes".into()));
        }
        let mut names: Vec<&str> = self.attributes.iter().map(|a| a.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSchema(
                "attribute names must be unique".into(),
            ));
        }
        let mut phase = 0;
        let mut spatial_seen = false;
        for attr in &self.attributes {
            let attr_phase = match attr {
                AttributeConfig::Numerical { .. } => 0,
                AttributeConfig::Categorical { .. } => 1,
                AttributeConfig::Spatial { .. } => 2,
            };
            if attr_phase < phase {
                return Err(Error::SchemaOrder(format!(
                    "attribute '{}' appears after a later attribute class",
                    attr.name()
                )));
            }
            if attr_phase == 2 {
                if spatial_seen {
                    return Err(Error::SchemaOrder(
                        "at most one spatial attribute is allowed".into(),
                    ));
                }
                spatial_seen = true;
            }
            phase = attr_phase;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numerical(name: &str) -> AttributeDescriptor {
        AttributeDescriptor {
            name: name.into(),
            kind: AttributeKind::Numerical {
                normalization: Normalization::MinMax,
            },
        }
    }

    fn categorical(name: &str, levels: &[&str]) -> AttributeDescriptor {
        AttributeDescriptor {
            name: name.into(),
            kind: AttributeKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    #[test]
    fn min_max_normalization_round_trips() {
        let params = NormalizationParams::fit(Normalization::MinMax, &[10.0, 20.0, 15.0]).unwrap();
        assert_eq!(params.normalize(10.0), 0.0);
        assert_eq!(params.normalize(20.0), 1.0);
        assert_eq!(params.normalize(15.0), 0.5);
        assert!((params.denormalize(0.5) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn log_min_max_compresses_skewed_values() {
        let params =
            NormalizationParams::fit(Normalization::LogMinMax, &[100.0, 10_000.0]).unwrap();
        assert_eq!(params.normalize(100.0), 0.0);
        assert_eq!(params.normalize(10_000.0), 1.0);
        // The geometric midpoint lands at 0.5 on log scale.
        assert!((params.normalize(1000.0) - 0.5).abs() < 1e-12);
        assert!((params.denormalize(0.5) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn log_min_max_rejects_non_positive_values() {
        assert!(NormalizationParams::fit(Normalization::LogMinMax, &[1.0, 0.0]).is_err());
        assert!(NormalizationParams::fit(Normalization::LogMinMax, &[-3.0]).is_err());
    }

    #[test]
    fn constant_attribute_normalizes_to_zero() {
        let params = NormalizationParams::fit(Normalization::MinMax, &[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(params.normalize(7.0), 0.0);
        assert_eq!(params.denormalize(0.0), 7.0);
    }

    #[test]
    fn normalized_values_stay_inside_unit_interval() {
        let params = NormalizationParams::fit(
            Normalization::MinMax,
            &[0.1000000000000001, 0.2999999999999999, 0.17],
        )
        .unwrap();
        for &v in &[0.1000000000000001, 0.2999999999999999, 0.17] {
            let x = params.normalize(v);
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn schema_enforces_attribute_class_ordering() {
        let ok = Schema::new(vec![
            numerical("age"),
            categorical("gender", &["F", "M"]),
            AttributeDescriptor {
                name: "location".into(),
                kind: AttributeKind::Spatial,
            },
        ]);
        assert!(ok.is_ok());

        let out_of_order = Schema::new(vec![categorical("gender", &["F", "M"]), numerical("age")]);
        assert!(matches!(out_of_order, Err(Error::SchemaOrder(_))));

        let two_spatial = Schema::new(vec![
            AttributeDescriptor {
                name: "a".into(),
                kind: AttributeKind::Spatial,
            },
            AttributeDescriptor {
                name: "b".into(),
                kind: AttributeKind::Spatial,
            },
        ]);
        assert!(matches!(two_spatial, Err(Error::SchemaOrder(_))));
    }

    #[test]
    fn schema_rejects_unsorted_levels_and_duplicate_names() {
        assert!(Schema::new(vec![categorical("plan", &["b", "a"])]).is_err());
        assert!(Schema::new(vec![numerical("x"), numerical("x")]).is_err());
    }

    #[test]
    fn schema_accessors_report_counts_and_levels() {
        let schema = Schema::new(vec![
            numerical("age"),
            numerical("duration"),
            categorical("gender", &["F", "M"]),
            categorical("plan", &["T", "U", "V"]),
            AttributeDescriptor {
                name: "location".into(),
                kind: AttributeKind::Spatial,
            },
        ])
        .unwrap();
        assert_eq!(schema.numerical_count(), 2);
        assert_eq!(schema.categorical_count(), 2);
        assert!(schema.has_spatial());
        assert_eq!(schema.levels(1), &["T", "U", "V"]);
        assert_eq!(schema.categorical_position("plan"), Some(1));
        assert_eq!(schema.categorical_position("age"), None);
    }

    #[test]
    fn schema_config_parses_a_full_example() {
        let text = r#"
            schema_version = 1

            [[attribute]]
            name = "issue_age"
            kind = "numerical"
            normalization = "min-max"

            [[attribute]]
            name = "face_amount"
            kind = "numerical"
            column = "face"
            normalization = "log-min-max"

            [[attribute]]
            name = "gender"
            kind = "categorical"

            [[attribute]]
            name = "location"
            kind = "spatial"
            lat = "latitude"
            lon = "longitude"

            [ingest]
            payload = ["policy_id", "death"]
            on_bad_row = "skip"
        "#;
        let cfg = SchemaConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.attributes.len(), 4);
        assert_eq!(cfg.ingest.payload, vec!["policy_id", "death"]);
        assert_eq!(cfg.ingest.on_bad_row, BadRowPolicy::Skip);
    }

    #[test]
    fn schema_config_rejects_unknown_keys_and_bad_versions() {
        let unknown_key = r#"
            schema_version = 1
            surprise = true

            [[attribute]]
            name = "age"
            kind = "numerical"
            normalization = "min-max"
        "#;
        assert!(SchemaConfig::from_toml_str(unknown_key).is_err());

        let bad_version = r#"
            schema_version = 2

            [[attribute]]
            name = "age"
            kind = "numerical"
            normalization = "min-max"
        "#;
        assert!(matches!(
            SchemaConfig::from_toml_str(bad_version),
            Err(Error::SchemaVersion {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn schema_config_rejects_misordered_attributes() {
        let text = r#"
            schema_version = 1

            [[attribute]]
            name = "gender"
            kind = "categorical"

            [[attribute]]
            name = "age"
            kind = "numerical"
            normalization = "min-max"
        "#;
        assert!(matches!(
            SchemaConfig::from_toml_str(text),
            Err(Error::SchemaOrder(_))
        ));
    }
}
