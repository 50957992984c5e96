//! Pairwise dissimilarity for mixed-attribute records.
//!
//! A record-to-record distance has three parts: squared Euclidean distance
//! over the normalized numerical attributes, a simple-matching mismatch count
//! over the categorical attributes scaled by `lambda1`, and a great-circle
//! distance in meters scaled by `lambda2`. The parts stay separately
//! retrievable so cost reports can show how much each attribute class
//! contributes.

use serde::{Deserialize, Serialize};

use crate::dataset::RecordView;
use crate::error::{Error, Result};

/// A point on the reference ellipsoid. Coordinates are stored in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point from degrees, rejecting coordinates outside
    /// [-90, 90] x [-180, 180].
    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<GeoPoint> {
        if !lat_deg.is_finite()
            || !lon_deg.is_finite()
            || !(-90.0..=90.0).contains(&lat_deg)
            || !(-180.0..=180.0).contains(&lon_deg)
        {
            return Err(Error::InvalidCoordinate { lat_deg, lon_deg });
        }
        Ok(GeoPoint {
            lat: lat_deg.to_radians(),
            lon: lon_deg.to_radians(),
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

/// Reference ellipsoid parameters.
///
/// Distances are great-circle arcs on the sphere of radius `r(1 - f)`, the
/// ellipsoid's polar radius. The default is WGS84.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub equatorial_radius_m: f64,
    pub flattening: f64,
}

/// WGS84: equatorial radius 6,378,137 m, flattening 1/298.257223563.
pub const WGS84: EarthModel = EarthModel {
    equatorial_radius_m: 6_378_137.0,
    flattening: 1.0 / 298.257_223_563,
};

impl Default for EarthModel {
    fn default() -> Self {
        WGS84
    }
}

impl EarthModel {
    /// Radius of the distance sphere: `r(1 - f)`. For WGS84 this is
    /// 6,356,752.314245 m.
    pub fn effective_radius_m(&self) -> f64 {
        self.equatorial_radius_m * (1.0 - self.flattening)
    }
}

/// Balance weights applied to the categorical and spatial terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Weights {
    pub fn new(lambda1: f64, lambda2: f64) -> Weights {
        Weights { lambda1, lambda2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda1.is_finite() || self.lambda1 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda1 must be finite and non-negative, got {}",
                self.lambda1
            )));
        }
        if !self.lambda2.is_finite() || self.lambda2 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda2 must be finite and non-negative, got {}",
                self.lambda2
            )));
        }
        Ok(())
    }
}

/// Number of positions at which two categorical index vectors disagree.
pub fn simple_matching(a: &[u32], b: &[u32]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Central angle between two points given precomputed latitude sines and
/// cosines.
///
/// Uses the atan2 form of the great-circle angle, which stays accurate for
/// nearby points (where the dot-product form loses precision) and for
/// antipodal points (where the haversine form does).
#[inline]
pub(crate) fn central_angle(
    sin_lat_p: f64,
    cos_lat_p: f64,
    lon_p: f64,
    sin_lat_q: f64,
    cos_lat_q: f64,
    lon_q: f64,
) -> f64 {
    let delta_lon = lon_q - lon_p;
    let sin_dlon = delta_lon.sin();
    let cos_dlon = delta_lon.cos();
    let across = cos_lat_q * sin_dlon;
    let along = cos_lat_p * sin_lat_q - sin_lat_p * cos_lat_q * cos_dlon;
    let y = (across * across + along * along).sqrt();
    let x = sin_lat_p * sin_lat_q + cos_lat_p * cos_lat_q * cos_dlon;
    y.atan2(x)
}

/// Great-circle distance in meters on the sphere of radius `r(1 - f)`.
pub fn geodetic_distance_m(p: GeoPoint, q: GeoPoint, earth: &EarthModel) -> f64 {
    let angle = central_angle(
        p.lat.sin(),
        p.lat.cos(),
        p.lon,
        q.lat.sin(),
        q.lat.cos(),
        q.lon,
    );
    earth.effective_radius_m() * angle
}

/// The three components of a mixed distance. Each component already carries
/// its balance weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DistanceParts {
    pub numerical: f64,
    pub categorical: f64,
    pub spatial: f64,
}

impl DistanceParts {
    pub fn total(&self) -> f64 {
        self.numerical + self.categorical + self.spatial
    }
}

/// Mixed dissimilarity between two records sharing a schema.
///
/// The caller guarantees both views have the same attribute layout; lengths
/// are only debug-asserted because this sits on the clustering hot path.
pub fn mixed_distance(a: &RecordView<'_>, b: &RecordView<'_>, weights: &Weights) -> DistanceParts {
    debug_assert_eq!(a.numerical.len(), b.numerical.len());
    debug_assert_eq!(a.categorical.len(), b.categorical.len());
    debug_assert_eq!(a.spatial.is_some(), b.spatial.is_some());

    let mut numerical = 0.0;
    for (x, y) in a.numerical.iter().zip(b.numerical) {
        let d = x - y;
        numerical += d * d;
    }

    let mismatches = a
        .categorical
        .iter()
        .zip(b.categorical)
        .filter(|(x, y)| x != y)
        .count();
    let categorical = weights.lambda1 * mismatches as f64;

    let spatial = match (a.spatial, b.spatial) {
        (Some(p), Some(q)) => weights.lambda2 * geodetic_distance_m(p, q, &WGS84),
        _ => 0.0,
    };

    DistanceParts {
        numerical,
        categorical,
        spatial,
    }
}
