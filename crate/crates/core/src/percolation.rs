//! Continuum percolation on Poisson points: Gilbert-graph clusters, sponge
//! crossings of rectangles, crossing probabilities and the critical radius.
//!
//! Two points are adjacent when their centers are at distance <= r.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::pointprocess::{sample_ppp, Point, PointSet, Region, SpatialGrid};
use crate::rng::{self, tag};
use crate::stats::wilson_interval;
use crate::unionfind::UnionFind;

/// Partition of a point set into connected components.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterLabeling {
    /// Cluster id of each point. Ids are ordered by smallest member index.
    pub label: Vec<u32>,
    /// Member indices of each cluster, ascending.
    pub members: Vec<Vec<u32>>,
    pub connection_radius: f64,
}

impl ClusterLabeling {
    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_containing(&self, x: usize) -> Result<&[u32]> {
        let l = *self.label.get(x).ok_or(Error::UnknownIndex(x))?;
        Ok(&self.members[l as usize])
    }
}

/// Clusters of `ps` at connection radius `r`.
pub fn clusters(ps: &PointSet, r: f64) -> Result<ClusterLabeling> {
    clusters_of(&ps.points, ps.dim(), r)
}

/// Clusters of a bare point slice.
pub fn clusters_of(points: &[Point], dim: usize, r: f64) -> Result<ClusterLabeling> {
    if !(r > 0.0 && r.is_finite()) {
        return config_err(format!("connection radius {r} must be positive"));
    }
    let n = points.len();
    let grid = SpatialGrid::new(points, dim, r, None);
    let mut uf = UnionFind::new(n);
    for (i, p) in points.iter().enumerate() {
        grid.for_each_within(p, r, |j, _| {
            if (j as usize) > i {
                uf.union(i as u32, j);
            }
        });
    }
    let mut root_label = vec![u32::MAX; n];
    let mut label = vec![0u32; n];
    let mut members: Vec<Vec<u32>> = Vec::new();
    for i in 0..n {
        let root = uf.find(i as u32) as usize;
        if root_label[root] == u32::MAX {
            root_label[root] = members.len() as u32;
            members.push(Vec::new());
        }
        label[i] = root_label[root];
        members[label[i] as usize].push(i as u32);
    }
    Ok(ClusterLabeling { label, members, connection_radius: r })
}

/// Axis-aligned box crossed along the first axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingSpec {
    pub rect: Region,
    pub radius: f64,
}

impl CrossingSpec {
    pub fn new(rect: Region, radius: f64) -> Result<CrossingSpec> {
        rect.validate()?;
        if !(radius > 0.0) {
            return config_err("crossing radius must be positive");
        }
        Ok(CrossingSpec { rect, radius })
    }

    fn near_left(&self, p: &Point) -> bool {
        p.coords[0] - self.rect.lo[0] <= self.radius
    }

    fn near_right(&self, p: &Point) -> bool {
        self.rect.hi[0] - p.coords[0] <= self.radius
    }

    /// Check the three chain conditions on a witness.
    pub fn is_valid_chain(&self, points: &[Point], chain: &[u32]) -> bool {
        let (Some(&first), Some(&last)) = (chain.first(), chain.last()) else {
            return false;
        };
        self.near_left(&points[first as usize])
            && self.near_right(&points[last as usize])
            && chain.windows(2).all(|w| points[w[0] as usize].dist(&points[w[1] as usize]) <= self.radius)
    }
}

/// A chain of points from the left side to the right side, if one exists.
/// The chain found is a shortest one in hop count.
pub fn sponge_crossing(points: &[Point], spec: &CrossingSpec) -> Option<Vec<u32>> {
    let r = spec.radius;
    let grid = SpatialGrid::new(points, spec.rect.dim, r, Some((&spec.rect.lo, &spec.rect.hi)));
    let mut parent = vec![u32::MAX; points.len()];
    let mut queue = VecDeque::new();
    for (i, p) in points.iter().enumerate() {
        if spec.near_left(p) {
            parent[i] = i as u32;
            queue.push_back(i as u32);
        }
    }
    while let Some(i) = queue.pop_front() {
        let p = points[i as usize];
        if spec.near_right(&p) {
            let mut chain = vec![i];
            let mut c = i;
            while parent[c as usize] != c {
                c = parent[c as usize];
                chain.push(c);
            }
            chain.reverse();
            assert!(spec.is_valid_chain(points, &chain), "crossing witness violates chain conditions");
            return Some(chain);
        }
        grid.for_each_within(&p, r, |j, _| {
            if parent[j as usize] == u32::MAX {
                parent[j as usize] = i;
                queue.push_back(j);
            }
        });
    }
    None
}

pub fn sponge_crossing_exists(points: &[Point], spec: &CrossingSpec) -> bool {
    sponge_crossing(points, spec).is_some()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingMode {
    /// Any left-right crossing of the n x (aspect n) rectangle.
    Any,
    /// A point placed uniformly in the left strip of width r starts a chain,
    /// using only points to its right, that gets within r of the right side.
    LeftmostFromBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub successes: usize,
    pub replicas: usize,
}

fn crossing_trial(r: f64, n: f64, aspect: f64, mode: CrossingMode, seed: u64, replica: u64) -> Result<bool> {
    let mut rg = rng::stream(seed, &[tag::REPLICA, replica]);
    let rect = Region::new(&[0.0, 0.0], &[n, aspect * n]);
    let ps = sample_ppp(&rect, 1.0, &mut rg)?;
    match mode {
        CrossingMode::Any => Ok(sponge_crossing_exists(&ps.points, &CrossingSpec::new(rect, r)?)),
        CrossingMode::LeftmostFromBall => {
            let start = Point::xy(r * rg.random::<f64>(), aspect * n / 2.0);
            let mut pts = vec![start];
            pts.extend(ps.points.iter().filter(|p| p.x() >= start.x()));
            let grid = SpatialGrid::new(&pts, 2, r, Some((&rect.lo, &rect.hi)));
            let mut seen = vec![false; pts.len()];
            seen[0] = true;
            let mut stack = vec![0u32];
            while let Some(i) = stack.pop() {
                let p = pts[i as usize];
                if n - p.x() <= r {
                    return Ok(true);
                }
                grid.for_each_within(&p, r, |j, _| {
                    if !seen[j as usize] {
                        seen[j as usize] = true;
                        stack.push(j);
                    }
                });
            }
            Ok(false)
        }
    }
}

/// Fraction of replicas with a crossing, with a 95% Wilson interval.
pub fn estimate_crossing_prob(
    r: f64,
    n: f64,
    aspect: f64,
    mode: CrossingMode,
    replicas: usize,
    seed: u64,
) -> Result<CrossingEstimate> {
    if !(n > r) {
        return config_err(format!("rectangle side {n} must exceed radius {r}"));
    }
    if replicas == 0 || !(aspect > 0.0) || !(r > 0.0) {
        return config_err("need replicas >= 1, aspect > 0, r > 0");
    }
    let hits: Vec<bool> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| crossing_trial(r, n, aspect, mode, seed, i))
        .collect::<Result<_>>()?;
    let successes = hits.iter().filter(|&&h| h).count();
    let (ci_lo, ci_hi) = wilson_interval(successes, replicas, 1.96);
    Ok(CrossingEstimate { p_hat: successes as f64 / replicas as f64, ci_lo, ci_hi, successes, replicas })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRadius {
    pub r_hat: f64,
    pub n: f64,
    pub tol: f64,
    pub replicas: usize,
    /// (radius, crossing fraction) at every evaluated radius.
    pub trace: Vec<(f64, f64)>,
}

/// Bisection for the radius at which an n x n square is crossed with
/// probability 1/2 (d = 2). All radii are evaluated on the same samples, so
/// the empirical crossing fraction is monotone in r.
pub fn estimate_critical_radius(n: f64, replicas: usize, tol: f64, seed: u64) -> Result<CriticalRadius> {
    const MAX_ITER: usize = 60;
    if !(n > 0.0 && tol > 0.0) || replicas == 0 {
        return config_err("need n > 0, tol > 0, replicas >= 1");
    }
    let rect = Region::new(&[0.0, 0.0], &[n, n]);
    let samples: Vec<PointSet> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| sample_ppp(&rect, 1.0, &mut rng::stream(seed, &[tag::REPLICA, i])))
        .collect::<Result<_>>()?;
    let mut trace = Vec::new();
    let frac = |r: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let spec = CrossingSpec::new(rect.clone(), r)?;
        let hits = samples.par_iter().filter(|ps| sponge_crossing_exists(&ps.points, &spec)).count();
        let f = hits as f64 / replicas as f64;
        trace.push((r, f));
        Ok(f)
    };
    let (mut lo, mut hi) = (0.5f64.min(n / 2.0), 2.0f64.min(n));
    let mut iter = 0;
    while frac(lo, &mut trace)? >= 0.5 {
        lo /= 2.0;
        iter += 1;
        if iter > MAX_ITER {
            return Err(Error::NonConvergence { iterations: iter, trace });
        }
    }
    while frac(hi, &mut trace)? < 0.5 {
        hi *= 2.0;
        iter += 1;
        if iter > MAX_ITER || hi > n {
            return Err(Error::NonConvergence { iterations: iter, trace });
        }
    }
    while hi - lo > tol {
        iter += 1;
        if iter > MAX_ITER {
            return Err(Error::NonConvergence { iterations: iter, trace });
        }
        let mid = 0.5 * (lo + hi);
        if frac(mid, &mut trace)? >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalRadius { r_hat: 0.5 * (lo + hi), n, tol, replicas, trace })
}

/// Cluster of a point added at `center` to a fresh unit Poisson process on
/// the cube of side `box_side` around it. Returns member positions (the added
/// point first) and whether the cluster came within r of the box boundary.
pub fn sample_center_cluster<R: Rng + ?Sized>(
    center: Point,
    r: f64,
    dim: usize,
    box_side: f64,
    rng: &mut R,
) -> Result<(Vec<Point>, bool)> {
    let mut region = Region::centered_cube(dim, box_side);
    for a in 0..dim {
        region.lo[a] += center.coords[a];
        region.hi[a] += center.coords[a];
    }
    let ps = sample_ppp(&region, 1.0, rng)?;
    let grid = SpatialGrid::new(&ps.points, dim, r, Some((&region.lo, &region.hi)));
    let mut seen = vec![false; ps.len()];
    let mut members = vec![center];
    let mut stack = vec![center];
    let mut truncated = region.depth(&center) <= r;
    while let Some(p) = stack.pop() {
        grid.for_each_within(&p, r, |j, _| {
            if !seen[j as usize] {
                seen[j as usize] = true;
                let q = ps.points[j as usize];
                truncated |= region.depth(&q) <= r;
                members.push(q);
                stack.push(q);
            }
        });
    }
    Ok((members, truncated))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizeSamples {
    /// Sizes of untruncated origin clusters (the origin point included).
    pub sizes: Vec<u32>,
    pub truncated: usize,
    /// True when more than 1% of replicas were discarded.
    pub truncation_flag: bool,
}

/// Samples of the size of the cluster of a point added at the origin.
pub fn cluster_size_samples(r: f64, dim: usize, box_side: f64, replicas: usize, seed: u64) -> Result<ClusterSizeSamples> {
    if !(r > 0.0) || !(box_side > 2.0 * r) || !(1..=3).contains(&dim) {
        return config_err("need r > 0, box_side > 2r and dim in 1..=3");
    }
    let out: Vec<(usize, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rg = rng::stream(seed, &[tag::REPLICA, i]);
            sample_center_cluster(Point::ORIGIN, r, dim, box_side, &mut rg).map(|(m, t)| (m.len(), t))
        })
        .collect::<Result<_>>()?;
    let truncated = out.iter().filter(|o| o.1).count();
    let sizes = out.iter().filter(|o| !o.1).map(|o| o.0 as u32).collect();
    Ok(ClusterSizeSamples { sizes, truncated, truncation_flag: truncated * 100 > replicas })
}
