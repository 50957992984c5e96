//! Alternating-minimization clustering over mixed attribute records.
//!
//! Each cluster is represented by a prototype holding the member mean per
//! numerical attribute, the member mode per categorical attribute, and a
//! member coordinate for the spatial attribute. Records are assigned to the
//! prototype at minimal mixed distance, prototypes are refitted, and the two
//! steps alternate until no assignment changes.
//!
//! Determinism: restart seeds are `seed + restart_index`, parallel passes
//! collect per-record results into indexed buffers, and every reported cost
//! is a compensated sum taken in record order. Reruns with the same seed are
//! identical regardless of thread count. Ties always break toward the lowest
//! index (cluster, level, record, or restart).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distance::{central_angle, mixed_distance, DistanceParts, Weights, WGS84};
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// How the spatial component of a prototype is refitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialRule {
    /// Move to the member coordinate closest to the previous prototype
    /// coordinate, excluding coordinates equal to it; keep the previous
    /// coordinate when every member sits exactly on it. Cheap (one pass per
    /// cluster) but the objective is not guaranteed to decrease.
    #[default]
    NearestToPrevious,
    /// Move to the candidate minimizing the summed geodetic distance to all
    /// members, where candidates are the member coordinates plus the previous
    /// prototype coordinate (kept unless a member is strictly better). This
    /// makes the spatial half-step a true minimization, so the total cost is
    /// non-increasing, at quadratic cost per cluster.
    Medoid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KProtoConfig {
    pub k: usize,
    pub weights: Weights,
    pub restarts: usize,
    pub max_iterations: usize,
    pub spatial_rule: SpatialRule,
    pub seed: u64,
}

impl KProtoConfig {
    pub fn new(k: usize, weights: Weights) -> KProtoConfig {
        KProtoConfig {
            k,
            weights,
            restarts: 20,
            max_iterations: 100,
            spatial_rule: SpatialRule::default(),
            seed: 0,
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if self.k == 0 {
            return Err(Error::KZero);
        }
        if self.k > data.n() {
            return Err(Error::KTooLarge {
                k: self.k,
                n: data.n(),
            });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        self.weights.validate()
    }
}

/// Cluster representative: numerical means, categorical modes, and an
/// observed member coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub numerical: Vec<f64>,
    pub categorical: Vec<u32>,
    pub spatial: Option<crate::distance::GeoPoint>,
}

impl Prototype {
    pub fn view(&self) -> crate::dataset::RecordView<'_> {
        crate::dataset::RecordView {
            numerical: &self.numerical,
            categorical: &self.categorical,
            spatial: self.spatial,
        }
    }

    fn from_record(rec: &crate::dataset::RecordView<'_>) -> Prototype {
        Prototype {
            numerical: rec.numerical.to_vec(),
            categorical: rec.categorical.to_vec(),
            spatial: rec.spatial,
        }
    }
}

/// Fitted clustering with cost bookkeeping.
#[derive(Clone, Debug)]
pub struct ClusteringModel {
    pub k: usize,
    pub weights: Weights,
    pub prototypes: Vec<Prototype>,
    pub assignment: Vec<u32>,
    pub cost_total: f64,
    pub cost_numerical: f64,
    pub cost_categorical: f64,
    pub cost_spatial: f64,
    pub iterations: usize,
    pub converged: bool,
    pub repair_exhausted: bool,
    pub restart_index: usize,
    pub cost_trace: Vec<f64>,
}

impl ClusteringModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.assignment {
            sizes[c as usize] += 1;
        }
        sizes
    }
}

/// Initial prototypes: `k` records drawn uniformly without replacement.
pub fn initialize(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Prototype>> {
    if k == 0 {
        return Err(Error::KZero);
    }
    if k > data.n() {
        return Err(Error::KTooLarge { k, n: data.n() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, data.n(), k);
    Ok(picks
        .iter()
        .map(|i| Prototype::from_record(&data.record(i)))
        .collect())
}

fn check_prototypes(data: &Dataset, prototypes: &[Prototype]) -> Result<()> {
    if prototypes.is_empty() {
        return Err(Error::KZero);
    }
    let d1 = data.schema().numerical_count();
    let c = data.schema().categorical_count();
    for p in prototypes {
        if p.numerical.len() != d1
            || p.categorical.len() != c
            || p.spatial.is_some() != data.schema().has_spatial()
        {
            return Err(Error::SchemaMismatch(format!(
                "prototype has {} numerical / {} categorical / spatial {}, data has {d1} / {c} / spatial {}",
                p.numerical.len(),
                p.categorical.len(),
                p.spatial.is_some(),
                data.schema().has_spatial()
            )));
        }
    }
    Ok(())
}

/// Assigns every record to its nearest prototype.
///
/// Returns the assignment and each record's distance to its prototype.
/// Equidistant prototypes resolve to the lowest cluster index.
pub fn assign(
    data: &Dataset,
    prototypes: &[Prototype],
    weights: &Weights,
) -> Result<(Vec<u32>, Vec<f64>)> {
    check_prototypes(data, prototypes)?;
    weights.validate()?;

    let radius = WGS84.effective_radius_m();
    let proto_trig: Vec<Option<(f64, f64, f64)>> = prototypes
        .iter()
        .map(|p| p.spatial.map(|g| (g.lat.sin(), g.lat.cos(), g.lon)))
        .collect();

    let pairs: Vec<(u32, f64)> = (0..data.n())
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let rec = data.record(i);
            let (rec_sin, rec_cos, rec_lon) = match rec.spatial {
                Some(p) => {
                    let (s, c) = data.spatial_trig(i);
                    (s, c, p.lon)
                }
                None => (0.0, 0.0, 0.0),
            };
            let mut best = f64::INFINITY;
            let mut best_l = 0u32;
            for (l, p) in prototypes.iter().enumerate() {
                let mut d = 0.0;
                for (x, y) in rec.numerical.iter().zip(&p.numerical) {
                    let t = x - y;
                    d += t * t;
                }
                let mut mismatches = 0u32;
                for (x, y) in rec.categorical.iter().zip(&p.categorical) {
                    mismatches += u32::from(x != y);
                }
                d += weights.lambda1 * f64::from(mismatches);
                if let Some((p_sin, p_cos, p_lon)) = proto_trig[l] {
                    d += weights.lambda2
                        * radius
                        * central_angle(rec_sin, rec_cos, rec_lon, p_sin, p_cos, p_lon);
                }
                if d < best {
                    best = d;
                    best_l = l as u32;
                }
            }
            (best_l, best)
        })
        .collect();

    let mut assignment = Vec::with_capacity(pairs.len());
    let mut distances = Vec::with_capacity(pairs.len());
    for (l, d) in pairs {
        assignment.push(l);
        distances.push(d);
    }
    Ok((assignment, distances))
}

fn member_lists(n: usize, k: usize, assignment: &[u32]) -> Result<Vec<Vec<u32>>> {
    if assignment.len() != n {
        return Err(Error::SchemaMismatch(format!(
            "assignment holds {} entries for {n} records",
            assignment.len()
        )));
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        let c = c as usize;
        if c >= k {
            return Err(Error::SchemaMismatch(format!(
                "assignment references cluster {c}, only {k} exist"
            )));
        }
        members[c].push(i as u32);
    }
    Ok(members)
}

fn update_spatial(
    data: &Dataset,
    members: &[u32],
    previous: crate::distance::GeoPoint,
    rule: SpatialRule,
) -> crate::distance::GeoPoint {
    let radius = WGS84.effective_radius_m();
    let prev_sin = previous.lat.sin();
    let prev_cos = previous.lat.cos();
    match rule {
        SpatialRule::NearestToPrevious => {
            let mut best: Option<(f64, crate::distance::GeoPoint)> = None;
            for &i in members {
                let p = data.spatial(i as usize).expect("spatial attribute present");
                if p == previous {
                    continue;
                }
                let (s, c) = data.spatial_trig(i as usize);
                let d = radius * central_angle(s, c, p.lon, prev_sin, prev_cos, previous.lon);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, p));
                }
            }
            best.map_or(previous, |(_, p)| p)
        }
        SpatialRule::Medoid => {
            // Summed distance from every member to one candidate coordinate.
            let sum_to = |cand: crate::distance::GeoPoint| -> f64 {
                let cand_sin = cand.lat.sin();
                let cand_cos = cand.lat.cos();
                numeric::sum(members.iter().map(|&i| {
                    let p = data.spatial(i as usize).expect("spatial attribute present");
                    let (s, c) = data.spatial_trig(i as usize);
                    radius * central_angle(s, c, p.lon, cand_sin, cand_cos, cand.lon)
                }))
            };
            // The previous coordinate stays in the candidate set as the
            // incumbent; a member replaces it only when strictly better.
            // That keeps this half-step non-increasing even when the record
            // that carried the previous coordinate has left the cluster.
            let mut best_sum = sum_to(previous);
            let mut best_point = previous;
            let sums: Vec<f64> = members
                .par_iter()
                .with_min_len(64)
                .map(|&i| sum_to(data.spatial(i as usize).expect("spatial attribute present")))
                .collect();
            for (&i, &s) in members.iter().zip(&sums) {
                if s < best_sum {
                    best_sum = s;
                    best_point = data.spatial(i as usize).expect("spatial attribute present");
                }
            }
            best_point
        }
    }
}

/// Refits every prototype from its members.
///
/// Numerical components become member means, categorical components become
/// member modes (ties to the lowest level index), and the spatial component
/// follows `rule` starting from the prototype's previous coordinate. Every
/// cluster must be non-empty; [`fit`] repairs empty clusters before updating.
pub fn update_prototypes(
    data: &Dataset,
    assignment: &[u32],
    previous: &[Prototype],
    rule: SpatialRule,
) -> Result<Vec<Prototype>> {
    check_prototypes(data, previous)?;
    let k = previous.len();
    let members = member_lists(data.n(), k, assignment)?;
    if let Some(l) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::EmptyCluster { cluster: l });
    }

    let d1 = data.schema().numerical_count();
    let c = data.schema().categorical_count();
    let updated: Vec<Prototype> = members
        .par_iter()
        .enumerate()
        .map(|(l, member)| {
            let m = member.len() as f64;
            let mut numerical = vec![0.0f64; d1];
            for j in 0..d1 {
                let mut acc = CompensatedSum::new();
                for &i in member {
                    acc.add(data.record(i as usize).numerical[j]);
                }
                numerical[j] = acc.value() / m;
            }

            let mut categorical = vec![0u32; c];
            for j in 0..c {
                let mut counts = vec![0u64; data.schema().levels(j).len()];
                for &i in member {
                    counts[data.categorical_code(i as usize, j) as usize] += 1;
                }
                let mut mode = 0usize;
                for (code, &count) in counts.iter().enumerate() {
                    if count > counts[mode] {
                        mode = code;
                    }
                }
                categorical[j] = mode as u32;
            }

            let spatial = previous[l]
                .spatial
                .map(|prev| update_spatial(data, member, prev, rule));

            Prototype {
                numerical,
                categorical,
                spatial,
            }
        })
        .collect();
    Ok(updated)
}

/// Exact cost decomposition of a labeled clustering: compensated sums of the
/// numerical, categorical, and spatial distance parts in record order.
pub fn recompute_cost(
    data: &Dataset,
    assignment: &[u32],
    prototypes: &[Prototype],
    weights: &Weights,
) -> Result<DistanceParts> {
    check_prototypes(data, prototypes)?;
    let k = prototypes.len();
    if assignment.len() != data.n() {
        return Err(Error::SchemaMismatch(format!(
            "assignment holds {} entries for {} records",
            assignment.len(),
            data.n()
        )));
    }
    if assignment.iter().any(|&c| c as usize >= k) {
        return Err(Error::SchemaMismatch(format!(
            "assignment references a cluster >= {k}"
        )));
    }

    let parts: Vec<DistanceParts> = (0..data.n())
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            mixed_distance(
                &data.record(i),
                &prototypes[assignment[i] as usize].view(),
                weights,
            )
        })
        .collect();

    let mut numerical = CompensatedSum::new();
    let mut categorical = CompensatedSum::new();
    let mut spatial = CompensatedSum::new();
    for p in &parts {
        numerical.add(p.numerical);
        categorical.add(p.categorical);
        spatial.add(p.spatial);
    }
    Ok(DistanceParts {
        numerical: numerical.value(),
        categorical: categorical.value(),
        spatial: spatial.value(),
    })
}

fn fit_single(data: &Dataset, cfg: &KProtoConfig, restart_index: usize) -> Result<ClusteringModel> {
    let seed = cfg.seed.wrapping_add(restart_index as u64);
    let mut prototypes = initialize(data, cfg.k, seed)?;
    let mut previous_assignment: Vec<u32> = Vec::new();
    let mut cost_trace = Vec::with_capacity(8);
    let mut converged = false;
    let mut repair_exhausted = false;
    let mut iterations = 0;

    loop {
        if iterations > 0 {
            prototypes = update_prototypes(data, &previous_assignment, &prototypes, cfg.spatial_rule)?;
        }
        iterations += 1;
        let (mut assignment, mut distances) = assign(data, &prototypes, &cfg.weights)?;

        // Reseed empty clusters on the record farthest from its prototype.
        // Each reseed zeroes that record's distance, so the loop runs at most
        // n times; when no record sits at positive distance the repair is
        // exhausted and the fit stops.
        let mut counts = vec![0usize; cfg.k];
        for &c in &assignment {
            counts[c as usize] += 1;
        }
        let mut repaired = false;
        while let Some(l) = counts.iter().position(|&count| count == 0) {
            let mut far_i = 0usize;
            let mut far_d = 0.0f64;
            for (i, &d) in distances.iter().enumerate() {
                if d > far_d {
                    far_d = d;
                    far_i = i;
                }
            }
            if far_d <= 0.0 {
                repair_exhausted = true;
                break;
            }
            counts[assignment[far_i] as usize] -= 1;
            counts[l] = 1;
            assignment[far_i] = l as u32;
            prototypes[l] = Prototype::from_record(&data.record(far_i));
            distances[far_i] = 0.0;
            repaired = true;
        }

        cost_trace.push(numeric::sum(distances.iter().copied()));

        if repair_exhausted {
            previous_assignment = assignment;
            break;
        }
        if !repaired && previous_assignment == assignment {
            converged = true;
            previous_assignment = assignment;
            break;
        }
        previous_assignment = assignment;
        if iterations == cfg.max_iterations {
            break;
        }
    }

    let parts = recompute_cost(data, &previous_assignment, &prototypes, &cfg.weights)?;
    Ok(ClusteringModel {
        k: cfg.k,
        weights: cfg.weights,
        prototypes,
        assignment: previous_assignment,
        cost_total: parts.total(),
        cost_numerical: parts.numerical,
        cost_categorical: parts.categorical,
        cost_spatial: parts.spatial,
        iterations,
        converged,
        repair_exhausted,
        restart_index,
        cost_trace,
    })
}

/// Fits the clustering across `cfg.restarts` seeded restarts (run in
/// parallel) and returns the one with the lowest total cost, breaking ties
/// toward the lowest restart index.
pub fn fit(data: &Dataset, cfg: &KProtoConfig) -> Result<ClusteringModel> {
    cfg.validate(data)?;
    let models: Vec<ClusteringModel> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| fit_single(data, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<ClusteringModel> = None;
    for model in models {
        let better = match &best {
            None => true,
            Some(b) => model.cost_total < b.cost_total,
        };
        if better {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
