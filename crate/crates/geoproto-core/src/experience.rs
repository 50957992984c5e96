//! Actual-to-expected claims analysis over cluster assignments.
//!
//! Each record carries a face amount, a death indicator, and an expected
//! mortality rate. The ratio R compares amount-weighted actual claims to
//! expected claims; its variance treats deaths as independent Bernoulli
//! draws, so the normal confidence bands are as good as the Lyapunov
//! condition is, and the report ships the terms needed to judge that.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::standard_normal_quantile;
use crate::numeric::CompensatedSum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub id: u64,
    pub cluster: u32,
    pub face_amount: f64,
    pub death: bool,
    pub expected_rate: f64,
}

/// Where to anchor the confidence band: on the no-deviation value 1 (for
/// testing departure from expected) or on the observed ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalCenter {
    #[default]
    Null,
    Observed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// True when |R - 1| exceeds the band half-width, regardless of where
    /// the band is centered.
    pub excludes_null: bool,
}

/// Per-term moments behind the normal approximation. `min_term_variance`
/// is the smallest face_amount^2 * q * (1 - q) among records with a
/// non-degenerate term; `max_term_third_moment` is the largest
/// face_amount^3 * q * (1 - q) * (q^2 + (1 - q)^2).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovDiagnostics {
    pub min_term_variance: f64,
    pub max_term_third_moment: f64,
    /// Records contributing no variance (zero face amount, or rate 0 or 1).
    pub degenerate_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterExperience {
    /// `None` marks the pooled portfolio row.
    pub cluster: Option<u32>,
    pub records: usize,
    pub actual_claims: f64,
    pub expected_claims: f64,
    pub ratio: f64,
    pub variance: f64,
    pub std_error: f64,
    pub intervals: Vec<ConfidenceInterval>,
    pub lyapunov: LyapunovDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperienceReport {
    pub clusters: Vec<ClusterExperience>,
    pub portfolio: ClusterExperience,
    pub center: IntervalCenter,
    pub levels: Vec<f64>,
}

fn validate(records: &[ExperienceRecord]) -> Result<()> {
    for (row, r) in records.iter().enumerate() {
        if !r.face_amount.is_finite() || r.face_amount < 0.0 {
            return Err(Error::BadExperienceRecord {
                row,
                reason: format!("face amount {} is not a finite non-negative number", r.face_amount),
            });
        }
        if !r.expected_rate.is_finite() || !(0.0..=1.0).contains(&r.expected_rate) {
            return Err(Error::BadExperienceRecord {
                row,
                reason: format!("expected rate {} is outside [0, 1]", r.expected_rate),
            });
        }
    }
    Ok(())
}

fn sums<'a>(records: impl Iterator<Item = &'a ExperienceRecord>) -> (f64, f64, f64) {
    let mut actual = CompensatedSum::new();
    let mut expected = CompensatedSum::new();
    let mut variance_num = CompensatedSum::new();
    for r in records {
        if r.death {
            actual.add(r.face_amount);
        }
        expected.add(r.face_amount * r.expected_rate);
        variance_num.add(r.face_amount * r.face_amount * r.expected_rate * (1.0 - r.expected_rate));
    }
    (actual.value(), expected.value(), variance_num.value())
}

/// Amount-weighted actual-to-expected ratio and its variance.
pub fn ae_ratio(records: &[ExperienceRecord]) -> Result<(f64, f64)> {
    validate(records)?;
    ratio_from_sums(records, "records")
}

fn ratio_from_sums(records: &[ExperienceRecord], scope: &str) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (actual, expected, variance_num) = sums(records.iter());
    if expected <= 0.0 {
        return Err(Error::UndefinedRatio {
            scope: scope.to_string(),
        });
    }
    Ok((actual / expected, variance_num / (expected * expected)))
}

/// Normal-approximation confidence interval for the ratio.
pub fn ae_confidence_interval(
    ratio: f64,
    variance: f64,
    level: f64,
    center: IntervalCenter,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadConfidenceLevel(level));
    }
    let z = standard_normal_quantile(0.5 + level / 2.0)?;
    let half_width = z * variance.sqrt();
    let anchor = match center {
        IntervalCenter::Null => 1.0,
        IntervalCenter::Observed => ratio,
    };
    Ok(ConfidenceInterval {
        level,
        lower: anchor - half_width,
        upper: anchor + half_width,
        excludes_null: (ratio - 1.0).abs() > half_width,
    })
}

/// Per-record moment extremes backing the normal approximation.
pub fn lyapunov_check(records: &[ExperienceRecord]) -> LyapunovDiagnostics {
    let mut min_var = f64::INFINITY;
    let mut max_third = 0.0f64;
    let mut degenerate = 0usize;
    for r in records {
        let q = r.expected_rate;
        let bernoulli_var = q * (1.0 - q);
        let term_var = r.face_amount * r.face_amount * bernoulli_var;
        if term_var <= 0.0 {
            degenerate += 1;
        } else {
            min_var = min_var.min(term_var);
        }
        let third =
            r.face_amount.powi(3) * bernoulli_var * (q * q + (1.0 - q) * (1.0 - q));
        max_third = max_third.max(third);
    }
    LyapunovDiagnostics {
        min_term_variance: if min_var.is_finite() { min_var } else { 0.0 },
        max_term_third_moment: max_third,
        degenerate_terms: degenerate,
    }
}

fn cluster_row(
    records: &[ExperienceRecord],
    cluster: Option<u32>,
    levels: &[f64],
    center: IntervalCenter,
) -> Result<ClusterExperience> {
    let scope = match cluster {
        Some(c) => format!("cluster {c}"),
        None => "portfolio".to_string(),
    };
    let (ratio, variance) = ratio_from_sums(records, &scope)?;
    let (actual, expected, _) = sums(records.iter());
    let intervals = levels
        .iter()
        .map(|&level| ae_confidence_interval(ratio, variance, level, center))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterExperience {
        cluster,
        records: records.len(),
        actual_claims: actual,
        expected_claims: expected,
        ratio,
        variance,
        std_error: variance.sqrt(),
        intervals,
        lyapunov: lyapunov_check(records),
    })
}

/// Builds per-cluster rows (ascending by cluster id) plus a pooled
/// portfolio row.
pub fn experience_report(
    records: &[ExperienceRecord],
    levels: &[f64],
    center: IntervalCenter,
) -> Result<ExperienceReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    validate(records)?;

    let mut groups: BTreeMap<u32, Vec<ExperienceRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cluster).or_default().push(r.clone());
    }
    let clusters = groups
        .iter()
        .map(|(&c, members)| cluster_row(members, Some(c), levels, center))
        .collect::<Result<Vec<_>>>()?;
    let portfolio = cluster_row(records, None, levels, center)?;
    Ok(ExperienceReport {
        clusters,
        portfolio,
        center,
        levels: levels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(cluster: u32, face_amount: f64, death: bool, q: f64) -> ExperienceRecord {
        ExperienceRecord {
            id: 0,
            cluster,
            face_amount,
            death,
            expected_rate: q,
        }
    }

    #[test]
    fn ratio_and_variance_match_the_hand_computed_case() {
        // Two lives of 100 at q = 0.01, one death: actual 100, expected 2,
        // so R = 50 and Var = 2 * (100^2 * 0.01 * 0.99) / 2^2 = 49.5.
        let records = vec![record(0, 100.0, true, 0.01), record(0, 100.0, false, 0.01)];
        let (ratio, variance) = ae_ratio(&records).unwrap();
        assert!((ratio - 50.0).abs() < 1e-12);
        assert!((variance - 49.5).abs() < 1e-12);
    }

    #[test]
    fn no_deaths_gives_a_zero_ratio() {
        let records = vec![record(0, 250.0, false, 0.02); 4];
        let (ratio, variance) = ae_ratio(&records).unwrap();
        assert_eq!(ratio, 0.0);
        // Var = 4 * 250^2 * 0.02 * 0.98 / (4 * 250 * 0.02)^2 = 4900 / 400.
        assert!((variance - 4900.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn zero_expected_claims_is_an_error_not_a_nan() {
        let records = vec![record(0, 100.0, false, 0.0)];
        assert!(matches!(
            ae_ratio(&records),
            Err(Error::UndefinedRatio { .. })
        ));
    }

    #[test]
    fn record_validation_names_the_offending_row() {
        let records = vec![record(0, 100.0, false, 0.01), record(0, -5.0, false, 0.01)];
        match ae_ratio(&records) {
            Err(Error::BadExperienceRecord { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected a record error, got {other:?}"),
        }
        let records = vec![record(0, 100.0, false, 1.5)];
        assert!(matches!(
            ae_ratio(&records),
            Err(Error::BadExperienceRecord { row: 0, .. })
        ));
    }

    #[test]
    fn null_centered_interval_brackets_one_symmetrically() {
        let ci = ae_confidence_interval(1.4, 0.04, 0.95, IntervalCenter::Null).unwrap();
        let half = 1.959_963_984_540_054 * 0.2;
        assert!((ci.lower - (1.0 - half)).abs() < 1e-12);
        assert!((ci.upper - (1.0 + half)).abs() < 1e-12);
        assert!(ci.excludes_null, "|1.4 - 1| > {half}");

        let inside = ae_confidence_interval(1.1, 0.04, 0.95, IntervalCenter::Null).unwrap();
        assert!(!inside.excludes_null);
    }

    #[test]
    fn observed_centered_interval_moves_with_the_ratio() {
        let ci = ae_confidence_interval(1.4, 0.04, 0.95, IntervalCenter::Observed).unwrap();
        let half = 1.959_963_984_540_054 * 0.2;
        assert!((ci.lower - (1.4 - half)).abs() < 1e-12);
        assert!((ci.upper - (1.4 + half)).abs() < 1e-12);
        // The exclusion flag is identical under either centering.
        assert!(ci.excludes_null);
    }

    #[test]
    fn interval_rejects_a_bad_level() {
        for bad in [0.0, 1.0, -0.5, 2.0] {
            assert!(matches!(
                ae_confidence_interval(1.0, 0.01, bad, IntervalCenter::Null),
                Err(Error::BadConfidenceLevel(_))
            ));
        }
    }

    #[test]
    fn lyapunov_terms_match_hand_values() {
        // FA = 100, q = 0.01: variance term 99, third-moment term
        // 1e6 * 0.0099 * (0.0001 + 0.9801) = 9703.98.
        let records = vec![record(0, 100.0, false, 0.01), record(0, 0.0, true, 0.5)];
        let d = lyapunov_check(&records);
        assert!((d.min_term_variance - 99.0).abs() < 1e-12);
        assert!((d.max_term_third_moment - 9703.98).abs() < 1e-9);
        assert_eq!(d.degenerate_terms, 1);
    }

    #[test]
    fn report_sorts_clusters_and_pools_the_portfolio() {
        let records = vec![
            record(2, 100.0, true, 0.05),
            record(0, 200.0, false, 0.05),
            record(2, 100.0, false, 0.05),
            record(0, 200.0, false, 0.05),
        ];
        let report = experience_report(&records, &[0.95], IntervalCenter::Null).unwrap();
        assert_eq!(report.clusters.len(), 2);
        assert_eq!(report.clusters[0].cluster, Some(0));
        assert_eq!(report.clusters[1].cluster, Some(2));
        assert_eq!(report.clusters[0].records, 2);
        assert_eq!(report.clusters[0].ratio, 0.0);
        // Cluster 2: actual 100, expected 10.
        assert!((report.clusters[1].ratio - 10.0).abs() < 1e-12);
        // Portfolio: actual 100, expected 30.
        assert_eq!(report.portfolio.cluster, None);
        assert_eq!(report.portfolio.records, 4);
        assert!((report.portfolio.ratio - 100.0 / 30.0).abs() < 1e-12);
        assert_eq!(report.portfolio.intervals.len(), 1);
        assert_eq!(report.portfolio.intervals[0].level, 0.95);
    }

    #[test]
    fn report_rejects_empty_input() {
        assert!(matches!(
            experience_report(&[], &[0.95], IntervalCenter::Null),
            Err(Error::EmptyInput)
        ));
    }
}
