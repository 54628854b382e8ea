//! The Brownian frog model.
//!
//! Sleeping frogs sit at the points of a unit Poisson process in a box with
//! the ball B(0, r) removed; one active frog starts at the origin. When an
//! active frog first comes within r of a sleeping point, the whole
//! percolation cluster of that point wakes at that instant and each member
//! starts its own Brownian motion from its position.
//!
//! Each frog's path is keyed by (seed, frog id), and each frog is scanned up
//! to its first entry into a ball around a currently sleeping point. Pending
//! entries are processed in (time, frog id) order from a heap; an entry whose
//! point was woken in the meantime is void and the frog is scanned on from
//! that time. Since the sleeping set only shrinks, a scan that found nothing
//! never needs revisiting, and the outcome does not depend on how the time
//! axis is split into `advance` calls.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::motion::{PathCursor, StepPolicy};
use crate::percolation::{clusters, ClusterLabeling};
use crate::pointprocess::{build_grid, sample_ppp, Point, PointSet, Region, SpatialGrid};
use crate::rng::{self, hash_key, tag};

/// Frog id of the particle started at the origin. Point i has id i + 1.
pub const ORIGIN_FROG: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dim: usize,
    pub r: f64,
    pub box_side: f64,
    #[serde(skip)]
    pub policy: StepPolicy,
}

impl SimParams {
    pub fn new(dim: usize, r: f64, box_side: f64) -> SimParams {
        SimParams { dim, r, box_side, policy: StepPolicy::default() }
    }

    pub fn with_dt_max(mut self, dt_max: f64) -> SimParams {
        self.policy.dt_max = dt_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return config_err(format!("dimension {} not in 1..=3", self.dim));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return config_err("radius must be positive");
        }
        if !(self.box_side > 4.0 * self.r && self.box_side.is_finite()) {
            return config_err("box side must exceed 4r");
        }
        self.policy.validate()
    }

    pub fn region(&self) -> Region {
        Region::centered_cube(self.dim, self.box_side).excluding(Point::ORIGIN, self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrogStatus {
    Sleeping,
    Active { wake_time: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WakeEvent {
    pub time: f64,
    /// Frog whose contact caused the wake-up.
    pub frog_id: u32,
    pub cluster_id: u32,
    pub cluster_size: u32,
}

#[derive(Clone, Debug)]
struct Frog {
    id: u32,
    wake: f64,
    start: Point,
    /// Path time up to which the frog has been scanned.
    done: f64,
    cursor: PathCursor,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    frog_id: u32,
    frog: usize,
    path_time: f64,
    center: u64,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time.total_cmp(&o.time).then(self.frog_id.cmp(&o.frog_id))
    }
}

/// Full model state.
#[derive(Clone, Debug)]
pub struct SimState {
    pub params: SimParams,
    pub seed: u64,
    pub clock: f64,
    pub points: PointSet,
    pub clustering: ClusterLabeling,
    wake: Vec<f64>,
    frogs: Vec<Frog>,
    sleeping: SpatialGrid,
    events: Vec<WakeEvent>,
    exited: bool,
    front_max: f64,
}

/// Active positions and activated points at the current clock.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    /// Activated Poisson points (indices, ascending).
    pub xi: Vec<u32>,
    /// Frog positions: the origin frog (if any) first, then frogs of `xi` in order.
    pub positions: Vec<Point>,
}

/// Model with the origin frog active and every Poisson point asleep.
pub fn init_sim(params: &SimParams, seed: u64) -> Result<SimState> {
    let mut s = empty_state(params, seed)?;
    s.add_frog(ORIGIN_FROG, 0.0, Point::ORIGIN);
    Ok(s)
}

/// Same Poisson configuration and frog paths as `init_sim`, but the only
/// initial activity is the cluster of `point`, woken at time 0.
pub fn init_sim_from_point(params: &SimParams, seed: u64, point: usize) -> Result<SimState> {
    let mut s = empty_state(params, seed)?;
    s.clustering.cluster_containing(point)?;
    s.wake_cluster(point, 0.0, point as u32 + 1);
    Ok(s)
}

fn empty_state(params: &SimParams, seed: u64) -> Result<SimState> {
    params.validate()?;
    let region = params.region();
    let points = sample_ppp(&region, 1.0, &mut rng::stream(seed, &[tag::PPP]))?;
    let clustering = clusters(&points, params.r)?;
    let sleeping = build_grid(&points, params.r);
    Ok(SimState {
        params: *params,
        seed,
        clock: 0.0,
        wake: vec![f64::INFINITY; points.len()],
        points,
        clustering,
        frogs: Vec::new(),
        sleeping,
        events: Vec::new(),
        exited: false,
        front_max: f64::NEG_INFINITY,
    })
}

impl SimState {
    fn add_frog(&mut self, id: u32, wake: f64, start: Point) {
        let key = hash_key(self.seed, &[tag::FROG, id as u64]);
        let cursor = PathCursor::new(key, start, self.params.dim, &self.params.policy);
        self.front_max = self.front_max.max(start.x());
        self.frogs.push(Frog { id, wake, start, done: 0.0, cursor });
    }

    fn wake_cluster(&mut self, point: usize, time: f64, by: u32) {
        let cl = self.clustering.label[point];
        let members = std::mem::take(&mut self.clustering.members[cl as usize]);
        for &m in &members {
            self.wake[m as usize] = time;
            self.sleeping.remove(m);
        }
        for &m in &members {
            self.add_frog(m + 1, time, self.points.points[m as usize]);
        }
        self.events.push(WakeEvent { time, frog_id: by, cluster_id: cl, cluster_size: members.len() as u32 });
        self.clustering.members[cl as usize] = members;
    }

    fn scan(&mut self, fi: usize, t_end: f64, heap: &mut BinaryHeap<Reverse<Pending>>) {
        let SimState { frogs, sleeping, params, exited, .. } = self;
        let f = &mut frogs[fi];
        let end = t_end - f.wake;
        if f.done >= end {
            return;
        }
        let half = 0.5 * params.box_side;
        let dim = params.dim;
        let mut out = false;
        let hit = f.cursor.first_hit(&*sleeping, params.r, f.done, end, &params.policy, |p| {
            out |= p.coords[..dim].iter().any(|c| c.abs() > half);
        });
        *exited |= out;
        match hit {
            Some(h) => heap.push(Reverse(Pending {
                time: f.wake + h.time,
                frog_id: f.id,
                frog: fi,
                path_time: h.time,
                center: h.center,
            })),
            None => f.done = end,
        }
    }

    /// Run the model up to `t_end`, returning the wake events that occurred.
    pub fn advance(&mut self, t_end: f64) -> &[WakeEvent] {
        assert!(t_end >= self.clock, "cannot advance backwards");
        let first = self.events.len();
        let mut heap = BinaryHeap::new();
        for fi in 0..self.frogs.len() {
            self.scan(fi, t_end, &mut heap);
        }
        while let Some(Reverse(p)) = heap.pop() {
            self.frogs[p.frog].done = p.path_time;
            let c = p.center as usize;
            if self.wake[c].is_infinite() {
                let before = self.frogs.len();
                self.wake_cluster(c, p.time, p.frog_id);
                for fi in before..self.frogs.len() {
                    self.scan(fi, t_end, &mut heap);
                }
            }
            self.scan(p.frog, t_end, &mut heap);
        }
        self.clock = t_end;
        &self.events[first..]
    }

    pub fn events(&self) -> &[WakeEvent] {
        &self.events
    }

    pub fn status(&self, point: usize) -> FrogStatus {
        match self.wake[point] {
            t if t.is_finite() => FrogStatus::Active { wake_time: t },
            _ => FrogStatus::Sleeping,
        }
    }

    /// Wake time of a Poisson point (infinite while asleep).
    pub fn wake_time(&self, point: usize) -> f64 {
        self.wake[point]
    }

    pub fn wake_times(&self) -> &[f64] {
        &self.wake
    }

    pub fn active_count(&self) -> usize {
        self.frogs.len()
    }

    pub fn sleeping_count(&self) -> usize {
        self.sleeping.len()
    }

    /// True once any frog has left the simulation box.
    pub fn exited_box(&self) -> bool {
        self.exited
    }

    /// Activated points and current frog positions.
    pub fn snapshot(&mut self) -> Snapshot {
        let t = self.clock;
        let mut order: Vec<usize> = (0..self.frogs.len()).collect();
        order.sort_by_key(|&i| self.frogs[i].id);
        let mut positions = Vec::with_capacity(order.len());
        for &i in &order {
            let f = &mut self.frogs[i];
            positions.push(f.cursor.position_at(t - f.wake));
        }
        if let Some(m) = positions.iter().map(|p| p.x()).reduce(f64::max) {
            self.front_max = self.front_max.max(m);
        }
        let xi = order.iter().map(|&i| self.frogs[i].id).filter(|&id| id != ORIGIN_FROG).map(|id| id - 1).collect();
        Snapshot { time: t, xi, positions }
    }

    /// Frog positions if every frog had stayed where it woke.
    pub fn frozen_positions(&self) -> Vec<Point> {
        let mut v: Vec<(u32, Point)> = self.frogs.iter().map(|f| (f.id, f.start)).collect();
        v.sort_by_key(|x| x.0);
        v.into_iter().map(|x| x.1).collect()
    }

    /// Running maximum of the first coordinate over observed frog positions
    /// (wake-up positions and all snapshots taken so far).
    pub fn front(&self) -> f64 {
        self.front_max
    }

    /// Largest norm among activated points (0 if none).
    pub fn out_radius(&self) -> f64 {
        self.points
            .points
            .iter()
            .zip(&self.wake)
            .filter(|(_, w)| w.is_finite())
            .map(|(p, _)| p.norm())
            .fold(0.0, f64::max)
    }

    /// Largest rho such that every Poisson point in B(0, rho) is activated,
    /// i.e. the norm of the nearest sleeping point (infinite if none).
    pub fn in_radius(&self) -> f64 {
        self.points
            .points
            .iter()
            .zip(&self.wake)
            .filter(|(_, w)| w.is_infinite())
            .map(|(p, _)| p.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the Poisson point nearest to `x`.
    pub fn nearest_point(&self, x: &Point) -> Option<usize> {
        self.points
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.dist2(x).total_cmp(&b.1.dist2(x)))
            .map(|(i, _)| i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageSample {
    pub n: u32,
    pub target: Point,
    /// Wake time of the target's cluster (meaningful only if reached).
    pub time: f64,
    pub reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageRun {
    pub samples: Vec<PassageSample>,
    pub boundary_flag: bool,
    pub partial: bool,
    /// Box smaller than n_max + 10r along the ray.
    pub small_box: bool,
}

/// Targets nearest to n v for n = 0..=n_max.
pub fn ray_targets(sim: &SimState, v: &Point, n_max: u32) -> Vec<(u32, usize)> {
    (0..=n_max).filter_map(|n| sim.nearest_point(&(*v * n as f64)).map(|i| (n, i))).collect()
}

/// Passage times T(0, x_n) to the points nearest to n v, n = 0..=n_max.
pub fn passage_times_along_ray(params: &SimParams, v: Point, n_max: u32, seed: u64, t_cap: f64) -> Result<PassageRun> {
    let mut runs = passage_times_along_rays(params, &[v], n_max, seed, t_cap)?;
    Ok(runs.remove(0))
}

/// Passage times along several rays, read off a single run of the model.
pub fn passage_times_along_rays(
    params: &SimParams,
    rays: &[Point],
    n_max: u32,
    seed: u64,
    t_cap: f64,
) -> Result<Vec<PassageRun>> {
    let mut sim = init_sim(params, seed)?;
    let mut targets = Vec::with_capacity(rays.len());
    for v in rays {
        let norm = v.norm();
        if !(norm > 0.0) {
            return config_err("ray direction must be nonzero");
        }
        targets.push(ray_targets(&sim, &(*v * (1.0 / norm)), n_max));
    }
    let all: Vec<usize> = targets.iter().flatten().map(|t| t.1).collect();
    run_until_awake(&mut sim, &all, t_cap);
    let small_box = n_max as f64 + 10.0 * params.r > 0.5 * params.box_side;
    Ok(targets
        .iter()
        .map(|ts| {
            let samples: Vec<PassageSample> = ts
                .iter()
                .map(|&(n, i)| PassageSample {
                    n,
                    target: sim.points.points[i],
                    time: sim.wake_time(i),
                    reached: sim.wake_time(i).is_finite(),
                })
                .collect();
            PassageRun {
                partial: samples.iter().any(|s| !s.reached),
                samples,
                boundary_flag: sim.exited_box(),
                small_box,
            }
        })
        .collect())
}

/// Advance in steps of 0.1 until every listed point is awake or `t_cap`.
pub fn run_until_awake(sim: &mut SimState, points: &[usize], t_cap: f64) {
    while sim.clock < t_cap && points.iter().any(|&i| sim.wake_time(i).is_infinite()) {
        let t = (sim.clock + 0.1).min(t_cap);
        sim.advance(t);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSeries {
    /// (t, R_t) with R_t the running maximum of the first coordinate.
    pub samples: Vec<(f64, f64)>,
    pub boundary_flag: bool,
}

/// Right front sampled every `sample_dt` up to `t_end`.
pub fn front_series(params: &SimParams, t_end: f64, sample_dt: f64, seed: u64) -> Result<FrontSeries> {
    if !(sample_dt > 0.0 && t_end >= 0.0) {
        return config_err("need sample_dt > 0 and t_end >= 0");
    }
    let mut sim = init_sim(params, seed)?;
    let mut samples = vec![(0.0, 0.0)];
    let steps = (t_end / sample_dt).round() as usize;
    for k in 1..=steps {
        sim.advance(k as f64 * sample_dt);
        sim.snapshot();
        samples.push((sim.clock, sim.front()));
    }
    Ok(FrontSeries { samples, boundary_flag: sim.exited_box() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::clusters_of;
    use crate::stats::ks_two_sample;
    use proptest::prelude::*;

    #[test]
    fn initial_state() {
        let p = SimParams::new(2, 0.8, 12.0);
        let mut s = init_sim(&p, 1).unwrap();
        assert!(s.points.points.iter().all(|x| x.norm() > 0.8));
        let snap = s.snapshot();
        assert!(snap.xi.is_empty());
        assert_eq!(snap.positions, vec![Point::ORIGIN]);
        assert!(init_sim(&SimParams::new(4, 0.8, 12.0), 1).is_err());
        assert!(init_sim(&SimParams::new(2, 0.8, 3.0), 1).is_err());
    }

    #[test]
    fn precomputed_clusters_match_percolation() {
        let p = SimParams::new(2, 0.9, 14.0);
        let s = init_sim(&p, 2).unwrap();
        assert_eq!(s.clustering, clusters_of(&s.points.points, 2, 0.9).unwrap());
    }

    #[test]
    fn tiny_box_has_only_the_origin_frog() {
        let p = SimParams::new(2, 0.3, 1.3);
        let seed = (0..1000).find(|&s| init_sim(&p, s).unwrap().points.is_empty()).unwrap();
        let mut s = init_sim(&p, seed).unwrap();
        assert!(s.advance(5.0).is_empty());
        assert_eq!(s.snapshot().positions.len(), 1);
    }

    #[test]
    fn clusters_wake_atomically_and_grow_monotonically() {
        let p = SimParams::new(2, 0.8, 16.0);
        let mut s = init_sim(&p, 3).unwrap();
        let mut prev: Vec<u32> = Vec::new();
        for k in 1..=8 {
            s.advance(k as f64);
            let snap = s.snapshot();
            assert!(prev.iter().all(|i| snap.xi.binary_search(i).is_ok()));
            assert_eq!(snap.positions.len(), snap.xi.len() + 1);
            prev = snap.xi;
        }
        let mut woken = 0;
        for e in s.events() {
            let members = &s.clustering.members[e.cluster_id as usize];
            assert_eq!(members.len() as u32, e.cluster_size);
            assert!(members.iter().all(|&m| s.wake_time(m as usize) == e.time));
            woken += members.len();
        }
        assert_eq!(woken, prev.len());
        assert!(s.events().windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(s.sleeping_count() + woken, s.points.len());
    }

    #[test]
    fn outcome_independent_of_advance_schedule() {
        let p = SimParams::new(2, 0.8, 14.0);
        let mut a = init_sim(&p, 4).unwrap();
        a.advance(6.0);
        let mut b = init_sim(&p, 4).unwrap();
        for k in 1..=24 {
            b.advance(k as f64 * 0.25);
        }
        assert_eq!(a.wake_times(), b.wake_times());
        assert_eq!(a.events(), b.events());
        let mut c = init_sim(&p.with_dt_max(0.05), 4).unwrap();
        c.advance(6.0);
        let same = a.wake_times().iter().zip(c.wake_times()).filter(|(x, y)| x == y).count();
        assert!(same + 2 >= a.points.len());
    }

    #[test]
    fn cluster_partner_shares_passage_time() {
        let p = SimParams::new(2, 0.9, 14.0);
        let mut s = init_sim(&p, 5).unwrap();
        s.advance(10.0);
        for members in &s.clustering.members {
            let t = s.wake_time(members[0] as usize);
            assert!(members.iter().all(|&m| s.wake_time(m as usize) == t));
        }
    }

    #[test]
    fn subadditive_on_coupled_runs() {
        let p = SimParams::new(2, 0.8, 16.0);
        for seed in 0..6 {
            let mut full = init_sim(&p, seed).unwrap();
            let v = Point::xy(1.0, 0.0);
            let targets = ray_targets(&full, &v, 5);
            let ids: Vec<usize> = targets.iter().map(|t| t.1).collect();
            run_until_awake(&mut full, &ids, 60.0);
            let m = ids[2];
            let mut restart = init_sim_from_point(&p, seed, m).unwrap();
            run_until_awake(&mut restart, &ids, 60.0);
            for &n in &ids[3..] {
                let lhs = full.wake_time(n);
                let rhs = full.wake_time(m) + restart.wake_time(n);
                assert!(lhs <= rhs + 1e-9, "seed {seed}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn front_is_monotone() {
        let p = SimParams::new(2, 0.8, 14.0);
        let f = front_series(&p, 5.0, 0.5, 6).unwrap();
        assert_eq!(f.samples.len(), 11);
        assert!(f.samples.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn first_wake_time_insensitive_to_dt_max() {
        let p = SimParams::new(2, 0.6, 10.0);
        let first = |pp: &SimParams, seed: u64| {
            let mut s = init_sim(pp, seed).unwrap();
            s.advance(20.0);
            s.events().first().map_or(20.0, |e| e.time)
        };
        let a: Vec<f64> = (0..300).map(|i| first(&p, i)).collect();
        let b: Vec<f64> = (0..300).map(|i| first(&p.with_dt_max(0.005), i)).collect();
        assert!(ks_two_sample(&a, &b).0 < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn active_count_matches_activated(seed in 0u64..10_000, t in 0.5f64..4.0) {
            let p = SimParams::new(2, 0.7, 10.0);
            let mut s = init_sim(&p, seed).unwrap();
            s.advance(t);
            let snap = s.snapshot();
            prop_assert_eq!(snap.positions.len(), snap.xi.len() + 1);
            prop_assert_eq!(s.active_count(), snap.xi.len() + 1);
            prop_assert!(snap.xi.iter().all(|&i| s.wake_time(i as usize) <= t));
        }
    }
}
