//! Gap-statistic selection of the number of clusters.
//!
//! The statistic compares the log within-cluster dispersion of the data
//! against its expectation under a structureless reference distribution:
//! uniform over each numerical attribute's observed range, marginal level
//! frequencies for categoricals, uniform over the coordinate bounding box.
//! Selection runs on a stratified subsample; the caller refits the full
//! dataset once a k is chosen.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::distance::{mixed_distance, Weights};
use crate::error::{Error, Result};
use crate::kproto::{self, ClusteringModel, KProtoConfig, SpatialRule};
use crate::lambda;
use crate::numeric;
use crate::rng::{derive_seed, stage, stream};

#[derive(Clone, Debug, Serialize)]
pub struct GapConfig {
    /// Candidate counts are 1..=k_max; k_max + 1 is evaluated as well because
    /// the decision rule looks one step ahead.
    pub k_max: usize,
    /// Number of reference replicates (B).
    pub replicates: usize,
    pub sample_fraction: f64,
    /// Categorical attributes whose joint levels define sampling strata.
    pub strata: Vec<String>,
    /// Overrides for the balance weights; whatever is `None` is estimated on
    /// the subsample.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub spatial_rule: SpatialRule,
    pub seed: u64,
}

impl GapConfig {
    pub fn new(k_max: usize) -> GapConfig {
        GapConfig {
            k_max,
            replicates: 50,
            sample_fraction: 0.10,
            strata: Vec::new(),
            lambda1: None,
            lambda2: None,
            restarts: 20,
            max_iterations: 100,
            spatial_rule: SpatialRule::default(),
            seed: 0,
        }
    }
}

/// One `k` row of the profile. Fields are `None` when the value is undefined
/// (zero dispersion or a degenerate fit), never silently zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub k: usize,
    pub log_w: Option<f64>,
    pub ref_log_w_mean: Option<f64>,
    pub sd: Option<f64>,
    pub s: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapProfile {
    /// Rows for k = 1..=k_max + 1.
    pub rows: Vec<GapRow>,
    pub chosen_k: Option<usize>,
    pub replicates: usize,
    pub subsample_size: usize,
    pub weights: Weights,
    pub seed: u64,
    pub diagnostics: Vec<String>,
}

/// Within-cluster dispersion: for each cluster, the sum of mixed distances
/// over ordered member pairs divided by twice the cluster size, summed over
/// clusters.
pub fn within_dispersion(data: &Dataset, model: &ClusteringModel, weights: &Weights) -> Result<f64> {
    if model.assignment.len() != data.n() {
        return Err(Error::SchemaMismatch(format!(
            "assignment holds {} entries for {} records",
            model.assignment.len(),
            data.n()
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.k];
    for (i, &c) in model.assignment.iter().enumerate() {
        members[c as usize].push(i);
    }
    if let Some(l) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::EmptyCluster { cluster: l });
    }

    let mut total = numeric::CompensatedSum::new();
    for member in &members {
        // Row sums in parallel, reduced sequentially in member order. Each
        // unordered pair appears in two rows, which is exactly the ordered
        // double count the dispersion uses.
        let row_sums: Vec<f64> = member
            .par_iter()
            .with_min_len(16)
            .map(|&a| {
                let rec_a = data.record(a);
                let mut acc = numeric::CompensatedSum::new();
                for &b in member {
                    if a == b {
                        continue;
                    }
                    acc.add(mixed_distance(&rec_a, &data.record(b), weights).total());
                }
                acc.value()
            })
            .collect();
        let pair_sum = numeric::sum(row_sums.iter().copied());
        total.add(pair_sum / (2.0 * member.len() as f64));
    }
    Ok(total.value())
}

/// Draws a structureless reference dataset matched to `data`: uniform
/// numericals over observed ranges, categoricals by marginal frequency,
/// coordinates uniform over the observed bounding box. Draw order per record
/// is numericals, categoricals, then latitude and longitude.
pub fn sample_reference(data: &Dataset, seed: u64) -> Result<Dataset> {
    use rand::distr::weighted::WeightedIndex;
    use rand::distr::{Distribution, Uniform};

    let d1 = data.schema().numerical_count();
    let c = data.schema().categorical_count();
    let n = data.n();

    let numerical_ranges: Vec<Uniform<f64>> = (0..d1)
        .map(|j| {
            let (min, max) = data.numerical_bounds(j);
            Uniform::new_inclusive(min, max).expect("observed bounds are finite and ordered")
        })
        .collect();
    let categorical_dists: Vec<WeightedIndex<u64>> = (0..c)
        .map(|j| {
            WeightedIndex::new(data.categorical_counts(j))
                .expect("observed level counts are positive")
        })
        .collect();
    let spatial_ranges = data.spatial_bounds().map(|(lat_min, lat_max, lon_min, lon_max)| {
        (
            Uniform::new_inclusive(lat_min, lat_max).expect("finite latitude bounds"),
            Uniform::new_inclusive(lon_min, lon_max).expect("finite longitude bounds"),
        )
    });

    let mut rng = stream(seed, 0, 0);
    let mut numerical = Vec::with_capacity(n * d1);
    let mut categorical = Vec::with_capacity(n * c);
    let mut spatial = Vec::with_capacity(if data.schema().has_spatial() { n } else { 0 });
    for _ in 0..n {
        for dist in &numerical_ranges {
            numerical.push(dist.sample(&mut rng));
        }
        for dist in &categorical_dists {
            categorical.push(dist.sample(&mut rng) as u32);
        }
        if let Some((lat_dist, lon_dist)) = &spatial_ranges {
            spatial.push(crate::distance::GeoPoint {
                lat: lat_dist.sample(&mut rng),
                lon: lon_dist.sample(&mut rng),
            });
        }
    }

    Dataset::from_parts(
        data.schema().clone(),
        data.normalization().to_vec(),
        n,
        numerical,
        categorical,
        spatial,
    )
}

fn log_dispersion(
    data: &Dataset,
    cfg: &KProtoConfig,
    weights: &Weights,
    label: &str,
) -> Result<(Option<f64>, Option<String>)> {
    let model = kproto::fit(data, cfg)?;
    match within_dispersion(data, &model, weights) {
        Ok(w) if w > 0.0 => Ok((Some(w.ln()), None)),
        Ok(_) => Ok((
            None,
            Some(format!("{label}: within-cluster dispersion is zero, k excluded")),
        )),
        Err(Error::EmptyCluster { cluster }) => Ok((
            None,
            Some(format!(
                "{label}: cluster {cluster} came back empty, k excluded"
            )),
        )),
        Err(e) => Err(e),
    }
}

/// Smallest k in 1..=k_max with Gap(k) >= Gap(k+1) - s(k+1), over rows
/// indexed by k - 1.
fn choose_k(rows: &[GapRow], k_max: usize) -> Option<usize> {
    for k in 1..=k_max {
        let (Some(gap_k), Some(gap_next), Some(s_next)) =
            (rows[k - 1].gap, rows[k].gap, rows[k].s)
        else {
            continue;
        };
        if gap_k >= gap_next - s_next {
            return Some(k);
        }
    }
    None
}

/// Runs the full gap procedure on a stratified subsample of `data`.
pub fn gap_select(data: &Dataset, cfg: &GapConfig) -> Result<GapProfile> {
    if cfg.k_max == 0 {
        return Err(Error::KZero);
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidConfig(
            "at least one reference replicate is required".into(),
        ));
    }

    let sub = data.stratified_sample(
        cfg.sample_fraction,
        &cfg.strata,
        derive_seed(cfg.seed, stage::SUBSAMPLE, 0),
    )?;
    if cfg.k_max + 1 > sub.n() {
        return Err(Error::KTooLarge {
            k: cfg.k_max + 1,
            n: sub.n(),
        });
    }
    let weights = lambda::resolve_weights(&sub, cfg.lambda1, cfg.lambda2)?;
    let ks: Vec<usize> = (1..=cfg.k_max + 1).collect();
    let fit_cfg = |k: usize, seed: u64| KProtoConfig {
        k,
        weights,
        restarts: cfg.restarts,
        max_iterations: cfg.max_iterations,
        spatial_rule: cfg.spatial_rule,
        seed,
    };

    let data_results: Vec<(Option<f64>, Option<String>)> = ks
        .par_iter()
        .map(|&k| {
            log_dispersion(
                &sub,
                &fit_cfg(k, derive_seed(cfg.seed, stage::DATA_FIT, k as u64)),
                &weights,
                &format!("data fit at k={k}"),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let references: Vec<Dataset> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| sample_reference(&sub, derive_seed(cfg.seed, stage::REFERENCE, b as u64)))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.replicates)
        .flat_map(|b| ks.iter().map(move |&k| (b, k)))
        .collect();
    let ref_results: Vec<(Option<f64>, Option<String>)> = jobs
        .par_iter()
        .map(|&(b, k)| {
            let seed = derive_seed(cfg.seed, stage::REFERENCE_FIT, ((b as u64) << 32) | k as u64);
            log_dispersion(
                &references[b],
                &fit_cfg(k, seed),
                &weights,
                &format!("reference replicate {b} at k={k}"),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut diagnostics: Vec<String> = Vec::new();
    let mut rows = Vec::with_capacity(ks.len());
    for (k_idx, &k) in ks.iter().enumerate() {
        let (log_w, data_diag) = data_results[k_idx].clone();
        if let Some(d) = data_diag {
            diagnostics.push(d);
        }
        let mut ref_logs = Vec::with_capacity(cfg.replicates);
        let mut complete = true;
        for b in 0..cfg.replicates {
            let (log, diag) = ref_results[b * ks.len() + k_idx].clone();
            if let Some(d) = diag {
                diagnostics.push(d);
            }
            match log {
                Some(v) => ref_logs.push(v),
                None => complete = false,
            }
        }
        let (ref_log_w_mean, sd, s) = if complete {
            let b = cfg.replicates as f64;
            let mean = numeric::sum(ref_logs.iter().copied()) / b;
            let sd = (numeric::sum(ref_logs.iter().map(|l| (l - mean) * (l - mean))) / b).sqrt();
            (Some(mean), Some(sd), Some(sd * (1.0 + 1.0 / b).sqrt()))
        } else {
            (None, None, None)
        };
        let gap = match (log_w, ref_log_w_mean) {
            (Some(lw), Some(rm)) => Some(rm - lw),
            _ => None,
        };
        rows.push(GapRow {
            k,
            log_w,
            ref_log_w_mean,
            sd,
            s,
            gap,
        });
    }

    let chosen_k = choose_k(&rows, cfg.k_max);
    if chosen_k.is_none() {
        diagnostics.push(format!(
            "no k in 1..={} satisfied Gap(k) >= Gap(k+1) - s(k+1)",
            cfg.k_max
        ));
    }
    Ok(GapProfile {
        rows,
        chosen_k,
        replicates: cfg.replicates,
        subsample_size: sub.n(),
        weights,
        seed: cfg.seed,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::GeoPoint;
    use crate::schema::{
        AttributeDescriptor, AttributeKind, Normalization, NormalizationParams, Schema,
    };

    fn unit_params() -> NormalizationParams {
        NormalizationParams {
            method: Normalization::MinMax,
            min: 0.0,
            max: 1.0,
        }
    }

    fn numeric_only(values: &[f64]) -> Dataset {
        let schema = Schema::new(vec![AttributeDescriptor {
            name: "x".into(),
            kind: AttributeKind::Numerical {
                normalization: Normalization::MinMax,
            },
        }])
        .unwrap();
        Dataset::from_parts(
            schema,
            vec![unit_params()],
            values.len(),
            values.to_vec(),
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn single_cluster_model(n: usize) -> ClusteringModel {
        ClusteringModel {
            k: 1,
            weights: Weights::new(0.0, 0.0),
            prototypes: vec![crate::kproto::Prototype {
                numerical: vec![0.0],
                categorical: vec![],
                spatial: None,
            }],
            assignment: vec![0; n],
            cost_total: 0.0,
            cost_numerical: 0.0,
            cost_categorical: 0.0,
            cost_spatial: 0.0,
            iterations: 1,
            converged: true,
            repair_exhausted: false,
            restart_index: 0,
            cost_trace: vec![],
        }
    }

    #[test]
    fn within_dispersion_matches_the_hand_computed_pair_sum() {
        // Values {0, 0.3, 1}: squared gaps 0.09, 1.0, 0.49. Ordered pairs
        // double the sum; dividing by 2n gives (0.09 + 1.0 + 0.49) / 3.
        let d = numeric_only(&[0.0, 0.3, 1.0]);
        let w = within_dispersion(&d, &single_cluster_model(3), &Weights::new(0.0, 0.0)).unwrap();
        let expected = (0.09 + 1.0 + 0.49) / 3.0;
        assert!((w - expected).abs() < 1e-12, "got {w}, want {expected}");
    }

    #[test]
    fn within_dispersion_rejects_empty_clusters() {
        let d = numeric_only(&[0.0, 1.0]);
        let mut model = single_cluster_model(2);
        model.k = 2;
        model.prototypes.push(model.prototypes[0].clone());
        let err = within_dispersion(&d, &model, &Weights::new(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::EmptyCluster { cluster: 1 }));
    }

    fn mixed_spatial_dataset() -> Dataset {
        let schema = Schema::new(vec![
            AttributeDescriptor {
                name: "x".into(),
                kind: AttributeKind::Numerical {
                    normalization: Normalization::MinMax,
                },
            },
            AttributeDescriptor {
                name: "g".into(),
                kind: AttributeKind::Categorical {
                    levels: vec!["a".into(), "b".into()],
                },
            },
            AttributeDescriptor {
                name: "loc".into(),
                kind: AttributeKind::Spatial,
            },
        ])
        .unwrap();
        let n = 40;
        let mut numerical = Vec::new();
        let mut categorical = Vec::new();
        let mut spatial = Vec::new();
        for i in 0..n {
            // Two groups: even rows low/near (10, 10), odd rows high/near
            // (40, 40), with small in-group jitter.
            let t = (i / 2) as f64 / 20.0 * 0.08;
            if i % 2 == 0 {
                numerical.push(0.1 + t);
                categorical.push(0);
                spatial.push(GeoPoint::from_degrees(10.0 + t, 10.0 - t).unwrap());
            } else {
                numerical.push(0.9 - t);
                categorical.push(1);
                spatial.push(GeoPoint::from_degrees(40.0 - t, 40.0 + t).unwrap());
            }
        }
        Dataset::from_parts(schema, vec![unit_params()], n, numerical, categorical, spatial)
            .unwrap()
    }

    #[test]
    fn sample_reference_stays_inside_observed_support() {
        let d = mixed_spatial_dataset();
        let r = sample_reference(&d, 99).unwrap();
        assert_eq!(r.n(), d.n());
        assert_eq!(r.schema(), d.schema());

        let (min, max) = d.numerical_bounds(0);
        let (rmin, rmax) = r.numerical_bounds(0);
        assert!(rmin >= min && rmax <= max);

        let (lat_min, lat_max, lon_min, lon_max) = d.spatial_bounds().unwrap();
        let (rlat_min, rlat_max, rlon_min, rlon_max) = r.spatial_bounds().unwrap();
        assert!(rlat_min >= lat_min && rlat_max <= lat_max);
        assert!(rlon_min >= lon_min && rlon_max <= lon_max);

        assert_eq!(sample_reference(&d, 99).unwrap(), r);
        assert_ne!(sample_reference(&d, 100).unwrap(), r);
    }

    #[test]
    fn reference_categoricals_follow_observed_support() {
        // Level "b" never occurs, so reference draws must never produce it.
        let schema = Schema::new(vec![AttributeDescriptor {
            name: "g".into(),
            kind: AttributeKind::Categorical {
                levels: vec!["a".into(), "b".into(), "c".into()],
            },
        }])
        .unwrap();
        let codes: Vec<u32> = (0..50).map(|i| if i % 3 == 0 { 2 } else { 0 }).collect();
        let d = Dataset::from_parts(schema, vec![], 50, vec![], codes, vec![]).unwrap();
        let r = sample_reference(&d, 5).unwrap();
        assert_eq!(r.categorical_counts(0)[1], 0);
        assert_eq!(r.n(), 50);
    }

    #[test]
    fn decision_rule_picks_the_smallest_satisfying_k() {
        // Gaps 1.0, 1.2, 1.5, 1.4 with s = 0.05 everywhere: k = 1 and 2 fail
        // their look-ahead, k = 3 passes.
        let rows: Vec<GapRow> = [1.0, 1.2, 1.5, 1.4]
            .iter()
            .enumerate()
            .map(|(i, &g)| GapRow {
                k: i + 1,
                log_w: Some(0.0),
                ref_log_w_mean: Some(g),
                sd: Some(0.05),
                s: Some(0.05),
                gap: Some(g),
            })
            .collect();
        assert_eq!(choose_k(&rows, 3), Some(3));
    }

    #[test]
    fn decision_rule_skips_rows_without_gaps() {
        let rows = vec![
            GapRow {
                k: 1,
                log_w: None,
                ref_log_w_mean: None,
                sd: None,
                s: None,
                gap: None,
            },
            GapRow {
                k: 2,
                log_w: Some(0.0),
                ref_log_w_mean: Some(1.0),
                sd: Some(0.1),
                s: Some(0.1),
                gap: Some(1.0),
            },
            GapRow {
                k: 3,
                log_w: Some(0.0),
                ref_log_w_mean: Some(0.5),
                sd: Some(0.1),
                s: Some(0.1),
                gap: Some(0.5),
            },
        ];
        assert_eq!(choose_k(&rows, 2), Some(2));
    }

    #[test]
    fn gap_select_recovers_two_groups() {
        let d = mixed_spatial_dataset();
        let mut cfg = GapConfig::new(3);
        cfg.replicates = 8;
        cfg.sample_fraction = 1.0;
        cfg.restarts = 4;
        cfg.seed = 11;
        let profile = gap_select(&d, &cfg).unwrap();
        assert_eq!(profile.rows.len(), 4);
        assert_eq!(profile.subsample_size, d.n());
        assert_eq!(profile.chosen_k, Some(2), "rows: {:?}", profile.rows);

        let again = gap_select(&d, &cfg).unwrap();
        assert_eq!(profile, again);
    }

    #[test]
    fn degenerate_data_yields_diagnostics_not_a_crash() {
        let d = numeric_only(&[0.5; 6]);
        let mut cfg = GapConfig::new(1);
        cfg.replicates = 3;
        cfg.sample_fraction = 1.0;
        cfg.restarts = 2;
        cfg.lambda1 = Some(0.0);
        cfg.lambda2 = Some(0.0);
        let profile = gap_select(&d, &cfg).unwrap();
        assert_eq!(profile.chosen_k, None);
        assert!(!profile.diagnostics.is_empty());
        assert!(profile.rows.iter().all(|r| r.gap.is_none()));
    }

    #[test]
    fn gap_select_validates_subsample_size_against_k() {
        let d = numeric_only(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let mut cfg = GapConfig::new(5);
        cfg.sample_fraction = 1.0;
        cfg.lambda1 = Some(0.0);
        cfg.lambda2 = Some(0.0);
        assert!(matches!(
            gap_select(&d, &cfg),
            Err(Error::KTooLarge { k: 6, n: 5 })
        ));
    }
}
