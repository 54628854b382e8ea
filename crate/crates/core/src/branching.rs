//! Dominating branching random walk.
//!
//! Each particle runs a Brownian motion in its own fresh unit Poisson
//! environment (with its own r-ball emptied) until it comes within r of a
//! point. It then branches: the hit point's percolation cluster, drawn from a
//! fresh process with that point added, becomes K + 1 new particles, and the
//! particle itself restarts from the contact point. X = K + 2 offspring.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::motion::{simulate_until_hit, HitResult, StepPolicy};
use crate::pointprocess::{Point, PoissonField};
use crate::rng::{self, tag};
use crate::stats::{mean, t95, variance};

/// Clusters larger than this are reported as truncated.
const MAX_CLUSTER: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffspringSample {
    /// Cluster members besides the hit point.
    pub k: u32,
    /// Contact point first, then the hit point, then the rest of its cluster.
    pub positions: Vec<Point>,
    pub truncated: bool,
}

impl OffspringSample {
    pub fn x(&self) -> u32 {
        self.k + 2
    }
}

/// Cluster of `x0` in a fresh unit process with `x0` added, explored lazily.
/// Truncated when a member gets within r of the box of side `box_side`
/// around `x0`.
fn offspring_at(contact: Point, x0: Point, r: f64, dim: usize, box_side: f64, field_seed: u64) -> OffspringSample {
    let field = PoissonField::new(dim, 1.0, field_seed);
    let half = box_side / 2.0 - r;
    let mut positions = vec![contact, x0];
    let mut stack = vec![x0];
    let mut seen = HashSet::new();
    let mut truncated = false;
    while let Some(p) = stack.pop() {
        if positions.len() > MAX_CLUSTER {
            truncated = true;
            break;
        }
        field.for_each_within(&p, r, |id, q| {
            if seen.insert(id) {
                truncated |= (0..dim).any(|a| (q.coords[a] - x0.coords[a]).abs() >= half);
                positions.push(*q);
                stack.push(*q);
            }
        });
        if truncated {
            break;
        }
    }
    OffspringSample { k: (positions.len() - 2) as u32, positions, truncated }
}

/// Offspring of a particle whose contact point is at the origin-centred
/// sphere of radius r and whose hit point is the origin.
pub fn sample_offspring(r: f64, dim: usize, box_side: f64, seed: u64) -> Result<OffspringSample> {
    if !(r > 0.0 && box_side > 4.0 * r) || !(1..=3).contains(&dim) {
        return config_err("need r > 0, box_side > 4r and dim in 1..=3");
    }
    let (g0, g1) = rng::normal_pair(rng::hash_key(seed, &[tag::OFFSPRING, 0]));
    let (g2, _) = rng::normal_pair(rng::hash_key(seed, &[tag::OFFSPRING, 1]));
    let g = Point::new(&[g0, g1, g2][..dim]);
    let contact = g * (r / g.norm());
    Ok(offspring_at(contact, Point::ORIGIN, r, dim, box_side, rng::hash_key(seed, &[tag::FIELD])))
}

pub fn offspring_samples(r: f64, dim: usize, box_side: f64, replicas: usize, seed: u64) -> Result<Vec<OffspringSample>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| sample_offspring(r, dim, box_side, rng::hash_key(seed, &[tag::REPLICA, i])))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchLimit {
    Generations(u32),
    Time(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingParams {
    pub dim: usize,
    pub r: f64,
    pub limit: BranchLimit,
    /// Box used when exploring offspring clusters.
    pub box_side: f64,
    /// Cap on a single waiting time in generation mode.
    pub tau_cap: f64,
    pub max_particles: usize,
    #[serde(skip)]
    pub policy: StepPolicy,
}

impl BranchingParams {
    pub fn new(dim: usize, r: f64, limit: BranchLimit) -> BranchingParams {
        BranchingParams {
            dim,
            r,
            limit,
            box_side: 40.0 * r.max(0.25),
            tau_cap: 1e3,
            max_particles: 1_000_000,
            policy: StepPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if !(1..=3).contains(&self.dim) || !(self.r > 0.0) || !(self.box_side > 4.0 * self.r) {
            return config_err("need dim in 1..=3, r > 0 and box_side > 4r");
        }
        if !(self.tau_cap > 0.0) || self.max_particles == 0 {
            return config_err("need tau_cap > 0 and max_particles > 0");
        }
        if let BranchLimit::Time(t) = self.limit {
            if !(t >= 0.0 && t.is_finite()) {
                return config_err("time limit must be finite and >= 0");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u32,
    pub parent: Option<u32>,
    pub generation: u32,
    pub birth_time: f64,
    pub birth_position: Point,
    /// Waiting time until this particle branched, if it did.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchingRecord {
    pub particles: Vec<Particle>,
    /// Population cap reached; later particles are missing.
    pub truncated: bool,
    /// Offspring clusters that hit the exploration box.
    pub cluster_truncations: u32,
    /// Waiting times cut off by `tau_cap` in generation mode.
    pub tau_capped: u32,
    pub limit: Option<BranchLimit>,
}

impl BranchingRecord {
    /// Particle counts per generation.
    pub fn generation_sizes(&self) -> Vec<u64> {
        let mut z = Vec::new();
        for p in &self.particles {
            let g = p.generation as usize;
            if z.len() <= g {
                z.resize(g + 1, 0);
            }
            z[g] += 1;
        }
        z
    }
}

struct Branch {
    tau: f64,
    offspring: Option<OffspringSample>,
}

fn branch_once(params: &BranchingParams, p: &Particle, seed: u64) -> Result<Branch> {
    let cap = match params.limit {
        BranchLimit::Generations(_) => params.tau_cap,
        BranchLimit::Time(t) => t - p.birth_time,
    };
    let id = p.id as u64;
    let env_seed = rng::hash_key(seed, &[tag::ENV, id]);
    let field = PoissonField::new(params.dim, 1.0, env_seed).excluding(p.birth_position, params.r);
    let key = rng::hash_key(seed, &[tag::PATH, id]);
    match simulate_until_hit(p.birth_position, params.dim, &field, params.r, cap.max(0.0), &params.policy, key)? {
        HitResult::Timeout { time, .. } => Ok(Branch { tau: time, offspring: None }),
        HitResult::Hit { center, time, position } => {
            let mut x0 = None;
            field.for_each_within(&position, params.r * (1.0 + 1e-6) + 1e-12, |cid, q| {
                if cid == center {
                    x0 = Some(*q);
                }
            });
            let x0 = x0.expect("hit center is in the environment");
            let off = offspring_at(
                position,
                x0,
                params.r,
                params.dim,
                params.box_side,
                rng::hash_key(seed, &[tag::OFFSPRING, id]),
            );
            Ok(Branch { tau: time, offspring: Some(off) })
        }
    }
}

/// Grow the genealogy generation by generation. Particles are numbered in
/// breadth-first order and all randomness is keyed by particle id, so the
/// record does not depend on the thread count.
pub fn simulate_branching(params: &BranchingParams, seed: u64) -> Result<BranchingRecord> {
    params.validate()?;
    let mut rec = BranchingRecord { limit: Some(params.limit), ..Default::default() };
    rec.particles.push(Particle {
        id: 0,
        parent: None,
        generation: 0,
        birth_time: 0.0,
        birth_position: Point::ORIGIN,
        tau: None,
    });
    let mut frontier = 0..1usize;
    while !frontier.is_empty() {
        let gen = rec.particles[frontier.start].generation;
        if let BranchLimit::Generations(g) = params.limit {
            if gen >= g {
                break;
            }
        }
        let outcomes: Vec<Branch> = rec.particles[frontier.clone()]
            .par_iter()
            .map(|p| branch_once(params, p, seed))
            .collect::<Result<_>>()?;
        let next_start = rec.particles.len();
        'outer: for (idx, b) in frontier.clone().zip(outcomes) {
            let Some(off) = b.offspring else {
                if matches!(params.limit, BranchLimit::Generations(_)) {
                    rec.tau_capped += 1;
                }
                continue;
            };
            rec.particles[idx].tau = Some(b.tau);
            rec.cluster_truncations += off.truncated as u32;
            let birth = rec.particles[idx].birth_time + b.tau;
            for pos in off.positions {
                if rec.particles.len() >= params.max_particles {
                    rec.truncated = true;
                    break 'outer;
                }
                let id = rec.particles.len() as u32;
                rec.particles.push(Particle {
                    id,
                    parent: Some(idx as u32),
                    generation: gen + 1,
                    birth_time: birth,
                    birth_position: pos,
                    tau: None,
                });
            }
        }
        if rec.truncated {
            break;
        }
        frontier = next_start..rec.particles.len();
    }
    Ok(rec)
}

pub fn simulate_branching_replicas(params: &BranchingParams, replicas: usize, seed: u64) -> Result<Vec<BranchingRecord>> {
    (0..replicas as u64)
        .map(|i| simulate_branching(params, rng::hash_key(seed, &[tag::REPLICA, i])))
        .collect()
}

/// Independent waiting times of fresh particles started at the origin.
/// Draws cut off by `tau_cap` are returned as the cap.
pub fn fresh_taus(params: &BranchingParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let root = Particle {
                id: 0,
                parent: None,
                generation: 0,
                birth_time: 0.0,
                birth_position: Point::ORIGIN,
                tau: None,
            };
            let mut p = params.clone();
            p.limit = BranchLimit::Generations(1);
            Ok(branch_once(&p, &root, rng::hash_key(seed, &[tag::REPLICA, i]))?.tau)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub t: f64,
    /// Largest generation among particles born by time t, per record.
    pub n_t: Vec<u32>,
    /// Largest birth-position norm among particles born by time t, per record.
    pub m_t: Vec<f64>,
}

pub fn generation_stats(records: &[BranchingRecord], t: f64) -> Result<GenerationStats> {
    let mut n_t = Vec::with_capacity(records.len());
    let mut m_t = Vec::with_capacity(records.len());
    for rec in records {
        match rec.limit {
            Some(BranchLimit::Time(tm)) if tm >= t && !rec.truncated => {}
            _ => return config_err("records must be complete time-mode runs reaching t"),
        }
        let born = rec.particles.iter().filter(|p| p.birth_time <= t);
        let (mut n, mut m) = (0u32, 0.0f64);
        for p in born {
            n = n.max(p.generation);
            m = m.max(p.birth_position.norm());
        }
        n_t.push(n);
        m_t.push(m);
    }
    Ok(GenerationStats { t, n_t, m_t })
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanGrowthLine {
    pub n: u32,
    pub mean_zn: f64,
    pub mu_pow: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pass: bool,
}

/// Compare the replica mean of Z_n with the n-th power of the mean offspring
/// number, using a 95% interval that combines both sampling errors.
pub fn mean_growth_check(records: &[BranchingRecord], offspring: &[f64], n_max: u32) -> Result<Vec<MeanGrowthLine>> {
    if records.len() < 2 || offspring.len() < 2 {
        return config_err("need at least two records and two offspring samples");
    }
    let mu = mean(offspring);
    let mu_se = (variance(offspring) / offspring.len() as f64).sqrt();
    let sizes: Vec<Vec<u64>> = records.iter().map(|r| r.generation_sizes()).collect();
    let mut out = Vec::new();
    for n in 0..=n_max {
        let zn: Vec<f64> = sizes.iter().map(|z| z.get(n as usize).copied().unwrap_or(0) as f64).collect();
        let m = mean(&zn);
        let se_z = (variance(&zn) / zn.len() as f64).sqrt();
        let mu_pow = mu.powi(n as i32);
        let se_pow = if n == 0 { 0.0 } else { n as f64 * mu.powi(n as i32 - 1) * mu_se };
        let half = t95(zn.len() - 1).max(1.96) * (se_z * se_z + se_pow * se_pow).sqrt();
        let diff = m - mu_pow;
        out.push(MeanGrowthLine {
            n,
            mean_zn: m,
            mu_pow,
            ci_lo: diff - half,
            ci_hi: diff + half,
            pass: diff.abs() <= half || (half == 0.0 && diff == 0.0),
        });
    }
    Ok(out)
}

/// Waiting times of all particles that branched, excluding the root.
pub fn lineage_taus(records: &[BranchingRecord]) -> Vec<f64> {
    records.iter().flat_map(|r| r.particles.iter().skip(1).filter_map(|p| p.tau)).collect()
}
