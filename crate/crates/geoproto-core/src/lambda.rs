//! Balance weights between the numerical, categorical, and spatial terms.
//!
//! The categorical weight is the ratio of average numerical variance to
//! average categorical Gini impurity; the spatial weight is the ratio of
//! average numerical variance to the variance of geodetic distances from each
//! record to the portfolio's coordinate center. Both put the three distance
//! terms on a comparable dispersion scale so no attribute class dominates by
//! units alone.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::distance::{geodetic_distance_m, GeoPoint, Weights, WGS84};
use crate::error::{Error, Result};
use crate::numeric;

/// Estimated weights together with the statistics they came from.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaEstimate {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub avg_numerical_variance: f64,
    pub avg_categorical_gini: Option<f64>,
    pub spatial_center_lat_deg: Option<f64>,
    pub spatial_center_lon_deg: Option<f64>,
    pub spatial_distance_variance: Option<f64>,
}

/// Gini impurity `1 - sum((count / n)^2)` of a level count vector.
pub fn gini_from_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut sum_sq = 0.0;
    for &c in counts {
        let q = c as f64 / n as f64;
        sum_sq += q * q;
    }
    1.0 - sum_sq
}

/// Mean of the per-attribute sample variances (n - 1 denominator) over the
/// normalized numerical columns.
pub fn average_numerical_variance(data: &Dataset) -> Result<f64> {
    let d1 = data.schema().numerical_count();
    if d1 == 0 {
        return Err(Error::NoNumericalAttributes);
    }
    if data.n() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            got: data.n(),
        });
    }
    let vars = (0..d1).map(|j| numeric::sample_variance(&data.numerical_column(j)));
    Ok(numeric::sum(vars) / d1 as f64)
}

fn average_categorical_gini(data: &Dataset) -> Result<f64> {
    let c = data.schema().categorical_count();
    if c == 0 {
        return Err(Error::NoCategoricalAttributes);
    }
    let ginis = (0..c).map(|j| gini_from_counts(&data.categorical_counts(j)));
    Ok(numeric::sum(ginis) / c as f64)
}

/// Weight for the categorical term: average numerical variance over average
/// Gini impurity. Constant categoricals make the denominator zero, which is
/// reported as an error rather than an infinite weight.
pub fn estimate_lambda1(data: &Dataset) -> Result<f64> {
    let avg_gini = average_categorical_gini(data)?;
    let avg_var = average_numerical_variance(data)?;
    if avg_gini == 0.0 {
        return Err(Error::DegenerateGini);
    }
    Ok(avg_var / avg_gini)
}

/// Arithmetic mean of latitudes and longitudes, in radians.
pub fn spatial_center(data: &Dataset) -> Result<GeoPoint> {
    if !data.schema().has_spatial() {
        return Err(Error::NoSpatialAttribute);
    }
    let points = data.spatial_points();
    let lat = numeric::sum(points.iter().map(|p| p.lat)) / points.len() as f64;
    let lon = numeric::sum(points.iter().map(|p| p.lon)) / points.len() as f64;
    Ok(GeoPoint { lat, lon })
}

fn center_distance_variance(data: &Dataset) -> Result<(GeoPoint, f64)> {
    let center = spatial_center(data)?;
    if data.n() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            got: data.n(),
        });
    }
    let dists: Vec<f64> = data
        .spatial_points()
        .iter()
        .map(|&p| geodetic_distance_m(p, center, &WGS84))
        .collect();
    Ok((center, numeric::sample_variance(&dists)))
}

/// Weight for the spatial term: average numerical variance over the variance
/// of geodetic distances to the coordinate center.
pub fn estimate_lambda2(data: &Dataset) -> Result<f64> {
    let avg_var = average_numerical_variance(data)?;
    let (_, dist_var) = center_distance_variance(data)?;
    if dist_var == 0.0 {
        return Err(Error::DegenerateSpatialVariance);
    }
    Ok(avg_var / dist_var)
}

/// Full estimate with intermediate statistics, for reporting.
///
/// Weights whose attribute class is absent come back as `None`; degenerate
/// denominators are errors.
pub fn estimate(data: &Dataset) -> Result<LambdaEstimate> {
    let avg_numerical_variance = average_numerical_variance(data)?;
    let (lambda1, avg_categorical_gini) = if data.schema().categorical_count() > 0 {
        (
            Some(estimate_lambda1(data)?),
            Some(average_categorical_gini(data)?),
        )
    } else {
        (None, None)
    };
    let (lambda2, center, spatial_distance_variance) = if data.schema().has_spatial() {
        let (center, var) = center_distance_variance(data)?;
        if var == 0.0 {
            return Err(Error::DegenerateSpatialVariance);
        }
        (Some(avg_numerical_variance / var), Some(center), Some(var))
    } else {
        (None, None, None)
    };
    Ok(LambdaEstimate {
        lambda1,
        lambda2,
        avg_numerical_variance,
        avg_categorical_gini,
        spatial_center_lat_deg: center.map(|c| c.lat_deg()),
        spatial_center_lon_deg: center.map(|c| c.lon_deg()),
        spatial_distance_variance,
    })
}

fn check_override(name: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} must be finite and non-negative, got {value}"
        )));
    }
    Ok(value)
}

/// Final weights for a run: overrides win, anything else is estimated, and a
/// weight whose attribute class is absent from the schema is zero. The
/// resolved values are always logged.
pub fn resolve_weights(
    data: &Dataset,
    lambda1_override: Option<f64>,
    lambda2_override: Option<f64>,
) -> Result<Weights> {
    let lambda1 = match lambda1_override {
        Some(v) => check_override("lambda1", v)?,
        None if data.schema().categorical_count() == 0 => 0.0,
        None => estimate_lambda1(data)?,
    };
    let lambda2 = match lambda2_override {
        Some(v) => check_override("lambda2", v)?,
        None if !data.schema().has_spatial() => 0.0,
        None => estimate_lambda2(data)?,
    };
    log::info!("balance weights: lambda1 = {lambda1}, lambda2 = {lambda2}");
    Ok(Weights { lambda1, lambda2 })
}
