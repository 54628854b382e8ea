//! Brownian paths and first entry into balls around centers.
//!
//! A path is a deterministic function of a 64-bit key. Unit-time increments
//! and dyadic midpoints (Lévy construction) are drawn from keyed normals, so
//! any piece of the path can be refined on demand and the same key always
//! yields the same path, whatever step sizes are used to explore it.
//!
//! Hitting is checked per center on the dyadic tree. A center is resolved
//! on a tree node once the node duration is below `adaptive_dt` of the
//! chord's distance to the ball; at that point either the chord endpoints
//! lie inside the ball (a crossing) or the bridge correction is applied with
//! a keyed uniform. Otherwise both halves are examined. Because the decision
//! for one center never depends on other centers, the first entry time into
//! each ball is a fixed function of the path.

use smallvec::SmallVec;

use crate::error::{config_err, Error, Result};
use crate::pointprocess::{PoissonField, Point, SpatialGrid};
use crate::rng::{hash4, hash_key, mix64, normal_pair, tag, unit_f64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub dt_max: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub bridge_correction: bool,
    pub tol_hit: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { dt_max: 1e-2, dt_min: 1e-8, safety: 0.25, bridge_correction: true, tol_hit: 1e-9 }
    }
}

impl StepPolicy {
    pub fn with_dt_max(mut self, dt_max: f64) -> Self {
        self.dt_max = dt_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return config_err("dt_max must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return config_err("dt_min must be in (0, dt_max]");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return config_err("safety must be in (0, 1]");
        }
        if !(self.tol_hit >= 0.0) {
            return config_err("tol_hit must be >= 0");
        }
        Ok(())
    }

    fn coarse_level(&self) -> u32 {
        level_for(self.dt_max)
    }

    fn leaf_level(&self) -> u32 {
        level_for(self.dt_min).max(self.coarse_level())
    }
}

/// Smallest level L >= 0 with 2^-L <= dt.
fn level_for(dt: f64) -> u32 {
    let mut l = 0;
    while (0.5f64).powi(l as i32) > dt && l < 60 {
        l += 1;
    }
    l
}

/// Step length for a particle at distance `dist` from the nearest ball.
pub fn adaptive_dt(dist: f64, policy: &StepPolicy) -> f64 {
    let s = policy.safety * dist.max(0.0);
    (s * s).min(policy.dt_max).max(policy.dt_min)
}

/// Radial reflection estimate of the chance that the bridge from `x0` to
/// `x1` over time `dt` comes within `rho` of `center`.
pub fn bridge_hit_prob(x0: &Point, x1: &Point, center: &Point, rho: f64, dt: f64) -> f64 {
    let d0 = x0.dist(center) - rho;
    let d1 = x1.dist(center) - rho;
    if d0 <= 0.0 || d1 <= 0.0 {
        return 1.0;
    }
    if dt <= 0.0 {
        return 0.0;
    }
    (-2.0 * d0 * d1 / dt).exp()
}

/// Source of ball centers near a location.
pub trait Centers {
    /// Calls `f(id, center)` for every center within `radius` of `x`.
    /// Extra centers beyond `radius` are allowed.
    fn visit_near(&self, x: &Point, radius: f64, f: &mut dyn FnMut(u64, &Point));
}

impl Centers for SpatialGrid {
    fn visit_near(&self, x: &Point, radius: f64, f: &mut dyn FnMut(u64, &Point)) {
        self.for_each_within(x, radius, |i, _| f(i as u64, &self.point(i)));
    }
}

impl Centers for PoissonField {
    fn visit_near(&self, x: &Point, radius: f64, f: &mut dyn FnMut(u64, &Point)) {
        self.for_each_within(x, radius, |id, p| f(id, p));
    }
}

impl Centers for [Point] {
    fn visit_near(&self, _x: &Point, _radius: f64, f: &mut dyn FnMut(u64, &Point)) {
        for (i, p) in self.iter().enumerate() {
            f(i as u64, p);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HitResult {
    Hit { center: u64, time: f64, position: Point },
    Timeout { position: Point, time: f64 },
}

impl HitResult {
    pub fn hit_time(&self) -> Option<f64> {
        match *self {
            HitResult::Hit { time, .. } => Some(time),
            HitResult::Timeout { .. } => None,
        }
    }
}

/// First entry found by a scan, in path time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub center: u64,
    pub time: f64,
    pub position: Point,
}

#[derive(Clone, Copy)]
struct Cand {
    id: u64,
    c: Point,
}

fn seg_dist(c: &Point, a: &Point, b: &Point) -> f64 {
    let ab = *b - *a;
    let len2 = ab.dist2(&Point::ORIGIN);
    if len2 == 0.0 {
        return c.dist(a);
    }
    let ac = *c - *a;
    let t = (ac.coords[0] * ab.coords[0] + ac.coords[1] * ab.coords[1] + ac.coords[2] * ab.coords[2]) / len2;
    c.dist(&(*a + ab * t.clamp(0.0, 1.0)))
}

/// Sequential reader of one Brownian path in its own time (starting at 0).
///
/// Holds the coarse points of the current unit time interval; finer points
/// are regenerated when needed. Reads must not go back to an earlier unit.
#[derive(Clone, Debug)]
pub struct PathCursor {
    key: u64,
    dim: usize,
    coarse: u32,
    leaf: u32,
    unit: u64,
    pts: Vec<Point>,
}

struct Scan<'a> {
    r: f64,
    after: f64,
    end: f64,
    policy: &'a StepPolicy,
    best: Option<Hit>,
}

impl PathCursor {
    pub fn new(key: u64, start: Point, dim: usize, policy: &StepPolicy) -> PathCursor {
        assert!((1..=3).contains(&dim));
        let coarse = policy.coarse_level();
        let mut c = PathCursor {
            key,
            dim,
            coarse,
            leaf: policy.leaf_level(),
            unit: 0,
            pts: vec![start; (1usize << coarse) + 1],
        };
        c.fill_unit();
        c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coarse step actually used (largest dyadic not above dt_max, capped at 1).
    pub fn coarse_dt(&self) -> f64 {
        0.5f64.powi(self.coarse as i32)
    }

    #[inline]
    fn gauss(&self, unit: u64, level: u32, idx: u64) -> Point {
        let k = hash4(self.key, unit, level as u64, idx);
        let (a, b) = normal_pair(k);
        match self.dim {
            1 => Point { coords: [a, 0.0, 0.0] },
            2 => Point { coords: [a, b, 0.0] },
            _ => Point { coords: [a, b, normal_pair(mix64(k ^ 0x3c6e_f372_fe94_f82b)).0] },
        }
    }

    #[inline]
    fn midpoint(&self, unit: u64, level: u32, idx: u64, x0: &Point, x1: &Point, h: f64) -> Point {
        (*x0 + *x1) * 0.5 + self.gauss(unit, level + 1, 2 * idx + 1) * (0.25 * h).sqrt()
    }

    fn fill_unit(&mut self) {
        let n = 1usize << self.coarse;
        self.pts[n] = self.pts[0] + self.gauss(self.unit, 0, 0);
        for l in 1..=self.coarse {
            let step = n >> l;
            let sd = (0.25 * 0.5f64.powi(l as i32 - 1)).sqrt();
            for i in (1..(1usize << l)).step_by(2) {
                let m = (self.pts[(i - 1) * step] + self.pts[(i + 1) * step]) * 0.5
                    + self.gauss(self.unit, l, i as u64) * sd;
                self.pts[i * step] = m;
            }
        }
    }

    fn advance_to_unit(&mut self, k: u64) {
        assert!(k >= self.unit, "path cursor cannot move backwards");
        while self.unit < k {
            let n = self.pts.len() - 1;
            self.pts[0] = self.pts[n];
            self.unit += 1;
            self.fill_unit();
        }
    }

    /// Position at path time `s` (refined to the leaf level).
    pub fn position_at(&mut self, s: f64) -> Point {
        assert!(s >= 0.0 && s.is_finite());
        let n = 1usize << self.coarse;
        let k = s.floor() as u64;
        if k > self.unit {
            if s == k as f64 && k == self.unit + 1 {
                return self.pts[n];
            }
            self.advance_to_unit(k);
        }
        let k = self.unit;
        let h0 = self.coarse_dt();
        let j = (((s - k as f64) / h0).floor() as usize).min(n - 1);
        let (mut t0, mut h) = (k as f64 + j as f64 * h0, h0);
        let (mut x0, mut x1) = (self.pts[j], self.pts[j + 1]);
        let mut idx = j as u64;
        for level in self.coarse..self.leaf {
            let m = self.midpoint(k, level, idx, &x0, &x1, h);
            h *= 0.5;
            if s < t0 + h {
                x1 = m;
                idx *= 2;
            } else {
                x0 = m;
                t0 += h;
                idx = 2 * idx + 1;
            }
        }
        x0 + (x1 - x0) * ((s - t0) / h).clamp(0.0, 1.0)
    }

    /// Earliest entry, at a time in (`t_after`, `t_end`], into a ball of
    /// radius `r` around any center of `centers`. `on_coarse` sees every
    /// coarse point reached (used for boundary checks).
    pub fn first_hit<C: Centers + ?Sized>(
        &mut self,
        centers: &C,
        r: f64,
        t_after: f64,
        t_end: f64,
        policy: &StepPolicy,
        mut on_coarse: impl FnMut(&Point),
    ) -> Option<Hit> {
        let n = 1usize << self.coarse;
        let h0 = self.coarse_dt();
        let cut = h0.sqrt() / policy.safety;
        let mut k = (t_after.max(0.0).floor() as u64).max(self.unit);
        let mut cands: SmallVec<[Cand; 16]> = SmallVec::new();
        loop {
            if k as f64 > t_end {
                return None;
            }
            self.advance_to_unit(k);
            let j0 = if (k as f64) < t_after { (((t_after - k as f64) / h0).floor() as usize).min(n - 1) } else { 0 };
            for j in j0..n {
                let t0 = k as f64 + j as f64 * h0;
                if t0 > t_end {
                    return None;
                }
                let (x0, x1) = (self.pts[j], self.pts[j + 1]);
                on_coarse(&x1);
                let mid = (x0 + x1) * 0.5;
                let reach = r + cut + 0.5 * x0.dist(&x1);
                cands.clear();
                centers.visit_near(&mid, reach, &mut |id, c| cands.push(Cand { id, c: *c }));
                if cands.is_empty() {
                    continue;
                }
                let mut scan = Scan { r, after: t_after, end: t_end, policy, best: None };
                self.refine(&mut scan, k, self.coarse, j as u64, t0, h0, x0, x1, &cands);
                if let Some(hit) = scan.best {
                    return Some(hit);
                }
            }
            k += 1;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&self, scan: &mut Scan, unit: u64, level: u32, idx: u64, t0: f64, h: f64, x0: Point, x1: Point, cands: &[Cand]) {
        let mut open: SmallVec<[Cand; 8]> = SmallVec::new();
        let at_leaf = level >= self.leaf;
        let r = scan.r;
        for cand in cands {
            let m = seg_dist(&cand.c, &x0, &x1) - r;
            if !at_leaf && h > adaptive_dt(m, scan.policy) {
                open.push(*cand);
                continue;
            }
            let da = x0.dist(&cand.c) - r;
            let db = x1.dist(&cand.c) - r;
            let frac = if da <= 0.0 {
                Some(0.0)
            } else if db <= 0.0 {
                Some(da / (da - db))
            } else if scan.policy.bridge_correction {
                let p = (-2.0 * da * db / h).exp();
                if p > 1e-15 && unit_f64(hash_key(self.key, &[tag::BRIDGE, unit, level as u64, idx, cand.id])) < p {
                    Some(da / (da + db))
                } else {
                    None
                }
            } else {
                None
            };
            let Some(frac) = frac else { continue };
            let t = t0 + h * frac;
            if t <= scan.after || t > scan.end {
                continue;
            }
            if scan.best.is_some_and(|b| (b.time, b.center) <= (t, cand.id)) {
                continue;
            }
            let p = x0 + (x1 - x0) * frac;
            let d = p.dist(&cand.c);
            let position = if d > 0.0 { cand.c + (p - cand.c) * (r / d) } else { p };
            debug_assert!(position.dist(&cand.c) <= r + scan.policy.tol_hit.max(1e-12));
            scan.best = Some(Hit { center: cand.id, time: t, position });
        }
        if open.is_empty() {
            return;
        }
        let half = 0.5 * h;
        let tm = t0 + half;
        let xm = self.midpoint(unit, level, idx, &x0, &x1, h);
        let live = |scan: &Scan, start: f64, stop: f64| {
            stop > scan.after && start <= scan.end && scan.best.is_none_or(|b| start <= b.time)
        };
        if live(scan, t0, tm) {
            self.refine(scan, unit, level + 1, 2 * idx, t0, half, x0, xm, &open);
        }
        if live(scan, tm, t0 + h) {
            self.refine(scan, unit, level + 1, 2 * idx + 1, tm, half, xm, x1, &open);
        }
    }
}

/// Run one Brownian particle from `start` until it first comes within `r`
/// of a center, or until `t_max`. The path is determined by `key`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_until_hit<C: Centers + ?Sized>(
    start: Point,
    dim: usize,
    centers: &C,
    r: f64,
    t_max: f64,
    policy: &StepPolicy,
    key: u64,
) -> Result<HitResult> {
    policy.validate()?;
    if !(r > 0.0 && t_max >= 0.0 && t_max.is_finite()) || !(1..=3).contains(&dim) {
        return config_err("need r > 0, finite t_max >= 0 and dim in 1..=3");
    }
    let mut inside = None;
    centers.visit_near(&start, r, &mut |id, c| {
        if c.dist(&start) <= r {
            inside = Some(id);
        }
    });
    if let Some(id) = inside {
        return Err(Error::Precondition(format!("start lies within r of center {id}")));
    }
    let mut cursor = PathCursor::new(key, start, dim, policy);
    Ok(match cursor.first_hit(centers, r, 0.0, t_max, policy, |_| {}) {
        Some(h) => HitResult::Hit { center: h.center, time: h.time, position: h.position },
        None => HitResult::Timeout { position: cursor.position_at(t_max), time: t_max },
    })
}
