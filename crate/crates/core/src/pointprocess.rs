//! Poisson point processes on boxes and a uniform-grid spatial index.
//!
//! Points always carry three coordinates; unused axes are zero, so
//! distances need no knowledge of the dimension.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: [f64; 3],
}

impl Point {
    pub const ORIGIN: Point = Point { coords: [0.0; 3] };

    /// Build from 1 to 3 coordinates.
    pub fn new(c: &[f64]) -> Point {
        assert!((1..=3).contains(&c.len()), "points have 1 to 3 coordinates");
        let mut coords = [0.0; 3];
        coords[..c.len()].copy_from_slice(c);
        Point { coords }
    }

    pub fn xy(x: f64, y: f64) -> Point {
        Point { coords: [x, y, 0.0] }
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    #[inline]
    pub fn dist2(&self, o: &Point) -> f64 {
        let a = self.coords[0] - o.coords[0];
        let b = self.coords[1] - o.coords[1];
        let c = self.coords[2] - o.coords[2];
        a * a + b * b + c * c
    }

    #[inline]
    pub fn dist(&self, o: &Point) -> f64 {
        self.dist2(o).sqrt()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dist(&Point::ORIGIN)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point {
            coords: [
                self.coords[0] + o.coords[0],
                self.coords[1] + o.coords[1],
                self.coords[2] + o.coords[2],
            ],
        }
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point {
            coords: [
                self.coords[0] - o.coords[0],
                self.coords[1] - o.coords[1],
                self.coords[2] - o.coords[2],
            ],
        }
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point { coords: [self.coords[0] * s, self.coords[1] * s, self.coords[2] * s] }
    }
}

/// Volume of the unit ball in dimension `dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => panic!("dimension must be 1, 2 or 3"),
    }
}

/// Axis-aligned box with an optional excluded ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub excluded: Option<(Point, f64)>,
}

impl Region {
    pub fn new(lo: &[f64], hi: &[f64]) -> Region {
        assert_eq!(lo.len(), hi.len());
        let dim = lo.len();
        let mut l = [0.0; 3];
        let mut h = [0.0; 3];
        l[..dim].copy_from_slice(lo);
        h[..dim].copy_from_slice(hi);
        Region { dim, lo: l, hi: h, excluded: None }
    }

    /// Cube of side `side` centered at the origin.
    pub fn centered_cube(dim: usize, side: f64) -> Region {
        let lo = vec![-side / 2.0; dim];
        let hi = vec![side / 2.0; dim];
        Region::new(&lo, &hi)
    }

    pub fn excluding(mut self, center: Point, radius: f64) -> Region {
        self.excluded = Some((center, radius));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return config_err(format!("dimension {} not in 1..=3", self.dim));
        }
        for a in 0..self.dim {
            if !(self.lo[a].is_finite() && self.hi[a].is_finite() && self.lo[a] < self.hi[a]) {
                return config_err(format!("degenerate box on axis {a}"));
            }
        }
        if let Some((c, rho)) = self.excluded {
            if !(rho >= 0.0 && rho.is_finite() && c.is_finite()) {
                return config_err("excluded ball must have finite radius >= 0");
            }
            for a in 0..self.dim {
                if c.coords[a] - rho < self.lo[a] || c.coords[a] + rho > self.hi[a] {
                    return config_err("excluded ball must lie inside the box");
                }
            }
        }
        if self.volume() <= 0.0 {
            return config_err("region has zero volume");
        }
        Ok(())
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn volume(&self) -> f64 {
        let ball = self.excluded.map_or(0.0, |(_, rho)| unit_ball_volume(self.dim) * rho.powi(self.dim as i32));
        self.box_volume() - ball
    }

    pub fn in_box(&self, p: &Point) -> bool {
        (0..self.dim).all(|a| p.coords[a] >= self.lo[a] && p.coords[a] < self.hi[a])
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.in_box(p) && self.excluded.is_none_or(|(c, rho)| p.dist2(&c) > rho * rho)
    }

    /// Distance from `p` to the box boundary (negative outside).
    pub fn depth(&self, p: &Point) -> f64 {
        (0..self.dim)
            .map(|a| (p.coords[a] - self.lo[a]).min(self.hi[a] - p.coords[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn uniform_in_box<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = self.lo[a] + (self.hi[a] - self.lo[a]) * rng.random::<f64>();
        }
        Point { coords: c }
    }
}

/// A sampled configuration together with the region it lives in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub region: Region,
    pub intensity: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.region.dim
    }
}

/// Poisson point process of the given intensity on `region`.
///
/// The box is filled by count-then-uniform sampling and points falling in
/// the excluded ball are dropped, which is an independent thinning and so
/// leaves a Poisson process on the region.
pub fn sample_ppp<R: Rng + ?Sized>(region: &Region, intensity: f64, rng: &mut R) -> Result<PointSet> {
    region.validate()?;
    if !(intensity.is_finite() && intensity >= 0.0) {
        return config_err(format!("intensity {intensity} must be finite and >= 0"));
    }
    let mean = intensity * region.box_volume();
    let count = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| crate::Error::Config(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let p = region.uniform_in_box(rng);
        if region.contains(&p) {
            points.push(p);
        }
    }
    Ok(PointSet { points, region: region.clone(), intensity })
}

/// A point returned by a radius query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: u32,
    pub distance: f64,
}

/// Uniform grid over a bounding box, stored as contiguous per-cell slices.
///
/// Cells keep their capacity after removals, so deleting a point is a
/// swap inside its cell.
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    cell_size: f64,
    inv_cell: f64,
    min_cell: [i64; 3],
    shape: [usize; 3],
    starts: Vec<u32>,
    lens: Vec<u32>,
    items: Vec<u32>,
    coords: Vec<Point>,
    live: usize,
}

impl SpatialGrid {
    /// Index `points` with the given cell size. The grid covers the union of
    /// `bounds` and the points' bounding box; the cell size is enlarged if the
    /// cell count would otherwise dwarf the number of points.
    pub fn new(points: &[Point], dim: usize, cell_size: f64, bounds: Option<(&[f64; 3], &[f64; 3])>) -> SpatialGrid {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let mut lo = [0.0f64; 3];
        let mut hi = [0.0f64; 3];
        let mut have = false;
        if let Some((l, h)) = bounds {
            lo = *l;
            hi = *h;
            have = true;
        }
        for p in points {
            for a in 0..dim {
                if !have {
                    lo[a] = p.coords[a];
                    hi[a] = p.coords[a];
                } else {
                    lo[a] = lo[a].min(p.coords[a]);
                    hi[a] = hi[a].max(p.coords[a]);
                }
            }
            have = true;
        }
        let max_cells = 8 * points.len() + 4096;
        let mut cell = cell_size;
        let (min_cell, shape) = loop {
            let mut mc = [0i64; 3];
            let mut sh = [1usize; 3];
            let mut total = 1f64;
            for a in 0..dim {
                mc[a] = (lo[a] / cell).floor() as i64;
                let hc = (hi[a] / cell).floor() as i64;
                sh[a] = (hc - mc[a] + 1) as usize;
                total *= sh[a] as f64;
            }
            if total <= max_cells as f64 {
                break (mc, sh);
            }
            cell *= 2.0;
        };
        let ncell = shape[0] * shape[1] * shape[2];
        let mut grid = SpatialGrid {
            cell_size: cell,
            inv_cell: 1.0 / cell,
            min_cell,
            shape,
            starts: vec![0; ncell + 1],
            lens: vec![0; ncell],
            items: vec![0; points.len()],
            coords: points.to_vec(),
            live: points.len(),
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.flat(&grid.cell_of(p))).collect();
        for &c in &cells {
            grid.lens[c] += 1;
        }
        for c in 0..ncell {
            grid.starts[c + 1] = grid.starts[c] + grid.lens[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of points still indexed.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Number of non-empty cells.
    pub fn bucket_count(&self) -> usize {
        self.lens.iter().filter(|&&l| l > 0).count()
    }

    pub fn point(&self, idx: u32) -> Point {
        self.coords[idx as usize]
    }

    /// Integer cell coordinates containing `p`.
    pub fn cell_of(&self, p: &Point) -> [i64; 3] {
        p.coords.map(|v| (v * self.inv_cell).floor() as i64)
    }

    fn flat(&self, c: &[i64; 3]) -> usize {
        let mut f = 0usize;
        for a in (0..3).rev() {
            let k = (c[a] - self.min_cell[a]).clamp(0, self.shape[a] as i64 - 1) as usize;
            f = f * self.shape[a] + k;
        }
        f
    }

    /// Point indices stored in the cell with integer coordinates `cell`.
    pub fn bucket(&self, cell: [i64; 3]) -> &[u32] {
        for a in 0..3 {
            let k = cell[a] - self.min_cell[a];
            if k < 0 || k >= self.shape[a] as i64 {
                return &[];
            }
        }
        let f = self.flat(&cell);
        let s = self.starts[f] as usize;
        &self.items[s..s + self.lens[f] as usize]
    }

    /// Calls `f(index, distance)` for every indexed point within `rho` of `x`.
    #[inline]
    pub fn for_each_within(&self, x: &Point, rho: f64, mut f: impl FnMut(u32, f64)) {
        if self.live == 0 {
            return;
        }
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = ((x.coords[a] - rho) * self.inv_cell).floor() as i64 - self.min_cell[a];
            let h = ((x.coords[a] + rho) * self.inv_cell).floor() as i64 - self.min_cell[a];
            if h < 0 || l >= self.shape[a] as i64 {
                return;
            }
            lo[a] = l.max(0) as usize;
            hi[a] = (h as usize).min(self.shape[a] - 1);
        }
        let rho2 = rho * rho;
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                let row = (k * self.shape[1] + j) * self.shape[0];
                for i in lo[0]..=hi[0] {
                    let c = row + i;
                    let s = self.starts[c] as usize;
                    for &idx in &self.items[s..s + self.lens[c] as usize] {
                        let d2 = self.coords[idx as usize].dist2(x);
                        if d2 <= rho2 {
                            f(idx, d2.sqrt());
                        }
                    }
                }
            }
        }
    }

    /// All points within `rho` of `x`, nearest first (ties by index).
    pub fn query_within(&self, x: &Point, rho: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        self.for_each_within(x, rho, |index, distance| out.push(Neighbor { index, distance }));
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
        out
    }

    /// Nearest indexed point to `x`, if any.
    pub fn nearest(&self, x: &Point) -> Option<Neighbor> {
        if self.live == 0 {
            return None;
        }
        let mut rho = self.cell_size;
        loop {
            if let Some(n) = self.query_within(x, rho).first() {
                return Some(*n);
            }
            rho *= 2.0;
        }
    }

    /// Remove a point from the index. Returns false if it was not present.
    pub fn remove(&mut self, idx: u32) -> bool {
        let Some(p) = self.coords.get(idx as usize).copied() else {
            return false;
        };
        let c = self.flat(&self.cell_of(&p));
        let s = self.starts[c] as usize;
        let n = self.lens[c] as usize;
        let slot = &mut self.items[s..s + n];
        match slot.iter().position(|&i| i == idx) {
            Some(pos) => {
                slot.swap(pos, n - 1);
                self.lens[c] -= 1;
                self.live -= 1;
                true
            }
            None => false,
        }
    }
}

/// Grid over a point set and its region box.
pub fn build_grid(ps: &PointSet, cell_size: f64) -> SpatialGrid {
    SpatialGrid::new(&ps.points, ps.dim(), cell_size, Some((&ps.region.lo, &ps.region.hi)))
}

/// Unit-cell lazily sampled Poisson process on all of space.
///
/// Each integer cell draws its points from a stream keyed by the cell
/// coordinates, so the realization does not depend on query order.
pub struct PoissonField {
    seed: u64,
    dim: usize,
    intensity: f64,
    excluded: Option<(Point, f64)>,
    cells: RefCell<HashMap<[i64; 3], Vec<Point>>>,
}

impl PoissonField {
    pub fn new(dim: usize, intensity: f64, seed: u64) -> PoissonField {
        assert!((1..=3).contains(&dim));
        PoissonField { seed, dim, intensity, excluded: None, cells: RefCell::new(HashMap::new()) }
    }

    pub fn excluding(mut self, center: Point, radius: f64) -> PoissonField {
        self.excluded = Some((center, radius));
        self
    }

    fn with_cell<T>(&self, cell: [i64; 3], f: impl FnOnce(&[Point]) -> T) -> T {
        let mut cells = self.cells.borrow_mut();
        let pts = cells.entry(cell).or_insert_with(|| {
            let key: Vec<u64> = cell.iter().map(|&c| c as u64).collect();
            let mut r = rng::stream(self.seed, &[rng::tag::FIELD, key[0], key[1], key[2]]);
            let n = if self.intensity > 0.0 {
                Poisson::new(self.intensity).expect("positive intensity").sample(&mut r) as usize
            } else {
                0
            };
            (0..n)
                .map(|_| {
                    let mut c = [0.0; 3];
                    for a in 0..self.dim {
                        c[a] = cell[a] as f64 + r.random::<f64>();
                    }
                    Point { coords: c }
                })
                .collect()
        });
        f(pts)
    }

    /// Calls `f(id, point)` for every point within `rho` of `x`.
    pub fn for_each_within(&self, x: &Point, rho: f64, mut f: impl FnMut(u64, &Point)) {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..self.dim {
            lo[a] = (x.coords[a] - rho).floor() as i64;
            hi[a] = (x.coords[a] + rho).floor() as i64;
        }
        let rho2 = rho * rho;
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let cell = [i, j, k];
                    self.with_cell(cell, |pts| {
                        for (n, p) in pts.iter().enumerate() {
                            if p.dist2(x) > rho2 {
                                continue;
                            }
                            if let Some((c, er)) = self.excluded {
                                if p.dist2(&c) <= er * er {
                                    continue;
                                }
                            }
                            let id = rng::hash_key(self.seed, &[i as u64, j as u64, k as u64, n as u64]);
                            f(id, p);
                        }
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn brute(points: &[Point], x: &Point, rho: f64) -> Vec<Neighbor> {
        let mut v: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.dist(x) <= rho)
            .map(|(i, p)| Neighbor { index: i as u32, distance: p.dist(x) })
            .collect();
        v.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
        v
    }

    #[test]
    fn zero_intensity_is_empty() {
        let ps = sample_ppp(&Region::new(&[0.0, 0.0], &[10.0, 10.0]), 0.0, &mut stream(1, &[])).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let r = Region::new(&[0.0], &[0.0]);
        assert!(sample_ppp(&r, 1.0, &mut stream(1, &[])).is_err());
        let r = Region::new(&[0.0], &[1.0]);
        assert!(sample_ppp(&r, f64::NAN, &mut stream(1, &[])).is_err());
        assert!(sample_ppp(&r, -1.0, &mut stream(1, &[])).is_err());
    }

    #[test]
    fn excluded_ball_mean_and_exclusion() {
        let region = Region::centered_cube(2, 10.0).excluding(Point::ORIGIN, 1.0);
        assert!((region.volume() - (100.0 - std::f64::consts::PI)).abs() < 1e-12);
        let reps = 4000;
        let mut total = 0usize;
        for i in 0..reps {
            let ps = sample_ppp(&region, 1.0, &mut stream(11, &[i])).unwrap();
            assert!(ps.points.iter().all(|p| p.norm() > 1.0));
            total += ps.len();
        }
        let mean = total as f64 / reps as f64;
        let se = (region.volume() / reps as f64).sqrt();
        assert!((mean - region.volume()).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn count_variance_matches_mean() {
        let region = Region::new(&[0.0, 0.0], &[10.0, 10.0]);
        let counts: Vec<f64> =
            (0..10_000).map(|i| sample_ppp(&region, 1.0, &mut stream(5, &[i])).unwrap().len() as f64).collect();
        let m = counts.iter().sum::<f64>() / counts.len() as f64;
        let v = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (counts.len() - 1) as f64;
        assert!((v / 100.0 - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let region = Region::centered_cube(3, 4.0).excluding(Point::ORIGIN, 0.5);
        let a = sample_ppp(&region, 2.0, &mut stream(9, &[1])).unwrap();
        let b = sample_ppp(&region, 2.0, &mut stream(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_grid_has_no_buckets() {
        let ps = PointSet { points: vec![], region: Region::new(&[0.0, 0.0], &[1.0, 1.0]), intensity: 1.0 };
        let g = build_grid(&ps, 1.0);
        assert_eq!(g.bucket_count(), 0);
        assert!(g.query_within(&Point::xy(0.5, 0.5), 3.0).is_empty());
        assert!(g.nearest(&Point::ORIGIN).is_none());
    }

    #[test]
    fn single_point_bucket() {
        let ps = PointSet {
            points: vec![Point::xy(0.5, 0.5)],
            region: Region::new(&[0.0, 0.0], &[1.0, 1.0]),
            intensity: 1.0,
        };
        let g = build_grid(&ps, 1.0);
        assert_eq!(g.bucket([0, 0, 0]), &[0]);
        assert_eq!(g.bucket_count(), 1);
    }

    #[test]
    fn hand_query() {
        let pts = vec![Point::xy(0.0, 0.0), Point::xy(3.0, 0.0)];
        let g = SpatialGrid::new(&pts, 2, 1.0, None);
        let q = g.query_within(&Point::xy(1.0, 0.0), 1.5);
        assert_eq!(q, vec![Neighbor { index: 0, distance: 1.0 }]);
        assert!(g.query_within(&Point::xy(1.0, 0.0), 0.0).is_empty());
    }

    #[test]
    fn grid_matches_brute_force() {
        for dim in 1..=3 {
            let region = Region::centered_cube(dim, 10.0);
            let n = 1000.0 / region.box_volume();
            let ps = sample_ppp(&region, n, &mut stream(3, &[dim as u64])).unwrap();
            let g = build_grid(&ps, 0.7);
            let mut r = stream(4, &[dim as u64]);
            for _ in 0..100 {
                let x = Region::centered_cube(dim, 12.0).uniform_in_box(&mut r);
                let rho = 2.0 * r.random::<f64>();
                assert_eq!(g.query_within(&x, rho), brute(&ps.points, &x, rho));
                let nn = g.nearest(&x).unwrap();
                assert_eq!(nn.index, brute(&ps.points, &x, 100.0)[0].index);
            }
        }
    }

    #[test]
    fn removal() {
        let region = Region::centered_cube(2, 6.0);
        let ps = sample_ppp(&region, 3.0, &mut stream(8, &[])).unwrap();
        let mut g = build_grid(&ps, 0.5);
        let mut alive: Vec<bool> = vec![true; ps.len()];
        for i in (0..ps.len()).step_by(3) {
            assert!(g.remove(i as u32));
            assert!(!g.remove(i as u32));
            alive[i] = false;
        }
        assert_eq!(g.len(), alive.iter().filter(|&&a| a).count());
        let q = g.query_within(&Point::ORIGIN, 2.0);
        let expect: Vec<Neighbor> =
            brute(&ps.points, &Point::ORIGIN, 2.0).into_iter().filter(|n| alive[n.index as usize]).collect();
        assert_eq!(q, expect);
    }

    #[test]
    fn coarsens_huge_grids() {
        let pts = vec![Point::new(&[0.0, 0.0, 0.0]), Point::new(&[100.0, 100.0, 100.0])];
        let g = SpatialGrid::new(&pts, 3, 0.01, None);
        assert!(g.cell_size() > 0.01);
        assert_eq!(g.query_within(&Point::new(&[99.0, 99.0, 99.0]), 2.0).len(), 1);
    }

    #[test]
    fn field_is_order_independent() {
        let f1 = PoissonField::new(2, 1.0, 17);
        let f2 = PoissonField::new(2, 1.0, 17);
        let mut a = Vec::new();
        f1.for_each_within(&Point::xy(3.0, 3.0), 2.0, |id, p| a.push((id, *p)));
        f2.for_each_within(&Point::xy(-3.0, 0.0), 2.0, |_, _| {});
        let mut b = Vec::new();
        f2.for_each_within(&Point::xy(3.0, 3.0), 2.0, |id, p| b.push((id, *p)));
        assert_eq!(a, b);
        let fe = PoissonField::new(2, 1.0, 17).excluding(Point::xy(3.0, 3.0), 1.0);
        fe.for_each_within(&Point::xy(3.0, 3.0), 2.0, |_, p| assert!(p.dist(&Point::xy(3.0, 3.0)) > 1.0));
    }

    #[test]
    fn field_density() {
        let f = PoissonField::new(2, 1.0, 23);
        let mut n = 0;
        f.for_each_within(&Point::ORIGIN, 30.0, |_, _| n += 1);
        let area = std::f64::consts::PI * 900.0;
        assert!((n as f64 - area).abs() < 4.0 * area.sqrt());
    }
}
