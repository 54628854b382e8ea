//! Poisson replenishment of a growing explored region.
//!
//! A set G_t grows from the origin with |G_t| = t, independently of a unit
//! Poisson process mu. At the first time tau that the closure of G_t holds a
//! point of mu, the points of mu inside G are replaced by those of an
//! independent process nu: eta = mu off the closure of G_tau plus nu inside
//! G_tau. Then tau ~ Exp(1) and eta is again a unit Poisson process.
//!
//! Two growth families are provided. Concentric balls are handled exactly.
//! For the Brownian sausage, G lives on a square lattice of side h = r/20:
//! cells are added one at a time (first the cells of B(0, r) by distance, then
//! those swept by a ball of radius r following a Brownian path), and each new
//! cell is swept left to right, so the area of G is exactly the time.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::pointprocess::{sample_ppp, unit_ball_volume, Point, PointSet, Region};
use crate::rng::{self, tag};
use crate::stats::{ks_two_sample, normal_cdf, pearson, poisson_gof};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Growth {
    ConcentricBalls,
    BrownianSausage { r: f64, dt: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowthRegion {
    Ball { radius: f64 },
    Lattice {
        cell: f64,
        lo: [f64; 2],
        /// Fully covered cells, in the order they were added.
        cells: Vec<[i64; 2]>,
        /// Cell being swept at tau and the swept fraction of its width.
        partial: ([i64; 2], f64),
    },
}

impl GrowthRegion {
    pub fn area(&self, dim: usize) -> f64 {
        match self {
            GrowthRegion::Ball { radius } => unit_ball_volume(dim) * radius.powi(dim as i32),
            GrowthRegion::Lattice { cell, cells, partial, .. } => cell * cell * (cells.len() as f64 + partial.1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurgeryTrial {
    pub tau: f64,
    pub region: GrowthRegion,
    pub eta: PointSet,
    pub boundary_point: Point,
    /// Points of mu removed by the splice (always the boundary point alone).
    pub removed: usize,
    /// Points of nu added inside G_tau.
    pub added: usize,
}

/// Dense bitset over a square lattice.
struct Bits {
    words: Vec<u64>,
    width: usize,
}

impl Bits {
    fn new(width: usize, height: usize) -> Bits {
        Bits { words: vec![0; (width * height).div_ceil(64)], width }
    }
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }
    fn get(&self, i: usize, j: usize) -> bool {
        let k = self.idx(i, j);
        self.words[k / 64] >> (k % 64) & 1 == 1
    }
    fn set(&mut self, i: usize, j: usize) {
        let k = self.idx(i, j);
        self.words[k / 64] |= 1 << (k % 64);
    }
}

enum Fill {
    Done,
    Stop { cell: [i64; 2], frac: f64, mu: usize },
    Exit,
}

struct Lattice<'a> {
    h: f64,
    lo: [f64; 2],
    shape: [i64; 2],
    filled: Bits,
    has_mu: Bits,
    mu: &'a [Point],
    order: Vec<[i64; 2]>,
}

impl Lattice<'_> {
    fn cell_of(&self, p: &Point) -> [i64; 2] {
        [((p.coords[0] - self.lo[0]) / self.h).floor() as i64, ((p.coords[1] - self.lo[1]) / self.h).floor() as i64]
    }

    fn center(&self, c: [i64; 2]) -> Point {
        Point::xy(self.lo[0] + (c[0] as f64 + 0.5) * self.h, self.lo[1] + (c[1] as f64 + 0.5) * self.h)
    }

    /// Add the cells whose centers lie within `rho` of `x`, nearest first.
    fn stamp(&mut self, x: &Point, rho: f64) -> Fill {
        let lo = self.cell_of(&Point::xy(x.coords[0] - rho, x.coords[1] - rho));
        let hi = self.cell_of(&Point::xy(x.coords[0] + rho, x.coords[1] + rho));
        let mut new: Vec<(f64, [i64; 2])> = Vec::new();
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let d = self.center([i, j]).dist(x);
                if d > rho {
                    continue;
                }
                if i < 0 || j < 0 || i >= self.shape[0] || j >= self.shape[1] {
                    return Fill::Exit;
                }
                if !self.filled.get(i as usize, j as usize) {
                    new.push((d, [i, j]));
                }
            }
        }
        new.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[1].cmp(&b.1[1])).then(a.1[0].cmp(&b.1[0])));
        for (_, c) in new {
            let (i, j) = (c[0] as usize, c[1] as usize);
            if self.has_mu.get(i, j) {
                let x0 = self.lo[0] + c[0] as f64 * self.h;
                let (mut best, mut frac) = (usize::MAX, f64::INFINITY);
                for (k, p) in self.mu.iter().enumerate() {
                    if self.cell_of(p) == c {
                        let f = (p.coords[0] - x0) / self.h;
                        if f < frac {
                            frac = f;
                            best = k;
                        }
                    }
                }
                return Fill::Stop { cell: c, frac: frac.clamp(0.0, 1.0), mu: best };
            }
            self.filled.set(i, j);
            self.order.push(c);
        }
        Fill::Done
    }

    fn inside(&self, p: &Point, stop: ([i64; 2], f64)) -> bool {
        let c = self.cell_of(p);
        if c[0] < 0 || c[1] < 0 || c[0] >= self.shape[0] || c[1] >= self.shape[1] {
            return false;
        }
        if c == stop.0 {
            return (p.coords[0] - (self.lo[0] + c[0] as f64 * self.h)) / self.h < stop.1;
        }
        self.filled.get(c[0] as usize, c[1] as usize)
    }
}

/// One realization of the splice. Returns None when G would leave the
/// window before tau (the trial is discarded).
pub fn run_surgery_trial(window: &Region, growth: &Growth, nu_intensity: f64, seed: u64) -> Result<Option<SurgeryTrial>> {
    window.validate()?;
    if !window.in_box(&Point::ORIGIN) {
        return config_err("window must contain the origin");
    }
    let dim = window.dim;
    let mu = sample_ppp(window, 1.0, &mut rng::stream(seed, &[tag::PPP]))?;
    let nu = sample_ppp(window, nu_intensity, &mut rng::stream(seed, &[tag::NU]))?;
    match *growth {
        Growth::ConcentricBalls => {
            let Some((b, rho)) =
                mu.points.iter().map(|p| p.norm()).enumerate().min_by(|a, b| a.1.total_cmp(&b.1))
            else {
                return Ok(None);
            };
            if rho >= window.depth(&Point::ORIGIN) {
                return Ok(None);
            }
            let mut pts: Vec<Point> = mu.points.iter().enumerate().filter(|(i, _)| *i != b).map(|(_, p)| *p).collect();
            let fresh: Vec<Point> = nu.points.iter().filter(|p| p.norm() < rho).copied().collect();
            let added = fresh.len();
            pts.extend(fresh);
            Ok(Some(SurgeryTrial {
                tau: unit_ball_volume(dim) * rho.powi(dim as i32),
                region: GrowthRegion::Ball { radius: rho },
                eta: PointSet { points: pts, region: window.clone(), intensity: 1.0 },
                boundary_point: mu.points[b],
                removed: 1,
                added,
            }))
        }
        Growth::BrownianSausage { r, dt } => {
            if dim != 2 {
                return config_err("sausage growth is implemented for d = 2");
            }
            if !(r > 0.0 && dt > 0.0) {
                return config_err("sausage needs r > 0 and dt > 0");
            }
            let h = r / 20.0;
            let lo = [window.lo[0], window.lo[1]];
            let shape = [
                ((window.hi[0] - lo[0]) / h).floor() as i64,
                ((window.hi[1] - lo[1]) / h).floor() as i64,
            ];
            let mut lat = Lattice {
                h,
                lo,
                shape,
                filled: Bits::new(shape[0] as usize, shape[1] as usize),
                has_mu: Bits::new(shape[0] as usize, shape[1] as usize),
                mu: &mu.points,
                order: Vec::new(),
            };
            for p in &mu.points {
                let c = lat.cell_of(p);
                if c[0] >= 0 && c[1] >= 0 && c[0] < shape[0] && c[1] < shape[1] {
                    lat.has_mu.set(c[0] as usize, c[1] as usize);
                }
            }
            let mut path = rng::stream(seed, &[tag::PATH]);
            let mut w = Point::ORIGIN;
            let sd = dt.sqrt();
            let (cell, frac, b) = loop {
                match lat.stamp(&w, r) {
                    Fill::Done => {}
                    Fill::Exit => return Ok(None),
                    Fill::Stop { cell, frac, mu } => break (cell, frac, mu),
                }
                let dx: f64 = path.sample(StandardNormal);
                let dy: f64 = path.sample(StandardNormal);
                w = w + Point::xy(dx, dy) * sd;
            };
            let stop = (cell, frac);
            let tau = h * h * (lat.order.len() as f64 + frac);
            let mut pts: Vec<Point> = Vec::with_capacity(mu.len());
            let mut removed = 0;
            for (i, p) in mu.points.iter().enumerate() {
                if i == b || lat.inside(p, stop) {
                    removed += 1;
                } else {
                    pts.push(*p);
                }
            }
            let fresh: Vec<Point> = nu.points.iter().filter(|p| lat.inside(p, stop)).copied().collect();
            let added = fresh.len();
            pts.extend(fresh);
            Ok(Some(SurgeryTrial {
                tau,
                region: GrowthRegion::Lattice { cell: h, lo, cells: lat.order, partial: stop },
                eta: PointSet { points: pts, region: window.clone(), intensity: 1.0 },
                boundary_point: mu.points[b],
                removed,
                added,
            }))
        }
    }
}

/// Many trials in parallel; discarded trials are counted.
pub fn run_surgery_trials(
    window: &Region,
    growth: &Growth,
    nu_intensity: f64,
    trials: usize,
    seed: u64,
) -> Result<(Vec<SurgeryTrial>, usize)> {
    let out: Vec<Option<SurgeryTrial>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_surgery_trial(window, growth, nu_intensity, rng::hash_key(seed, &[tag::REPLICA, i])))
        .collect::<Result<_>>()?;
    let discarded = out.iter().filter(|t| t.is_none()).count();
    Ok((out.into_iter().flatten().collect(), discarded))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrLine {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrReport {
    pub lines: Vec<CsrLine>,
    pub max_abs_corr: f64,
    pub samples: usize,
    /// Per-test threshold after Bonferroni correction.
    pub threshold: f64,
    pub pass: bool,
}

fn pair_count(points: &[Point], window: &Region, rho: f64) -> f64 {
    let inside: Vec<&Point> = points.iter().filter(|p| window.contains(p)).collect();
    let mut n = 0;
    for i in 0..inside.len() {
        for j in 0..i {
            if inside[i].dist(inside[j]) <= rho {
                n += 1;
            }
        }
    }
    n as f64
}

/// Complete-spatial-randomness checks on a collection of patterns:
/// per-window Poisson count fit, cross-window count correlation, and a
/// close-pair count compared with freshly sampled unit Poisson patterns.
/// All p-values are compared with `alpha` divided by the number of tests;
/// correlations must also stay below `max_corr` in absolute value.
pub fn csr_test_suite(
    samples: &[&[Point]],
    windows: &[Region],
    pair_radius: f64,
    alpha: f64,
    max_corr: f64,
    seed: u64,
) -> Result<CsrReport> {
    if samples.len() < 10 || windows.is_empty() {
        return config_err("need at least 10 samples and one window");
    }
    for w in windows {
        w.validate()?;
    }
    let nw = windows.len();
    let n_tests = 2 * nw + nw * (nw - 1) / 2;
    let threshold = alpha / n_tests as f64;
    let counts: Vec<Vec<u32>> = windows
        .iter()
        .map(|w| samples.iter().map(|s| s.iter().filter(|p| w.contains(p)).count() as u32).collect())
        .collect();
    let mut lines = Vec::new();
    for (k, w) in windows.iter().enumerate() {
        let g = poisson_gof(&counts[k], w.volume())?;
        lines.push(CsrLine {
            name: format!("count_gof_w{k}"),
            statistic: g.statistic,
            p_value: g.p_value,
            pass: g.p_value > threshold,
        });
    }
    let mut max_abs_corr = 0.0f64;
    let n = samples.len() as f64;
    for a in 0..nw {
        for b in a + 1..nw {
            let x: Vec<f64> = counts[a].iter().map(|&c| c as f64).collect();
            let y: Vec<f64> = counts[b].iter().map(|&c| c as f64).collect();
            let rho = pearson(&x, &y);
            max_abs_corr = max_abs_corr.max(rho.abs());
            let z = rho.clamp(-0.999_999, 0.999_999).atanh() * (n - 3.0).sqrt();
            let p = 2.0 * (1.0 - normal_cdf(z.abs()));
            lines.push(CsrLine {
                name: format!("corr_w{a}_w{b}"),
                statistic: rho,
                p_value: p,
                pass: p > threshold && rho.abs() < max_corr,
            });
        }
    }
    for (k, w) in windows.iter().enumerate() {
        let observed: Vec<f64> = samples.iter().map(|s| pair_count(s, w, pair_radius)).collect();
        let reference: Vec<f64> = (0..samples.len() as u64)
            .into_par_iter()
            .map(|i| {
                let ps = sample_ppp(w, 1.0, &mut rng::stream(seed, &[tag::CONTROL, k as u64, i]))?;
                Ok(pair_count(&ps.points, w, pair_radius))
            })
            .collect::<Result<_>>()?;
        let (d, p) = ks_two_sample(&observed, &reference);
        lines.push(CsrLine { name: format!("pairs_w{k}"), statistic: d, p_value: p, pass: p > threshold });
    }
    let pass = lines.iter().all(|l| l.pass);
    Ok(CsrReport { lines, max_abs_corr, samples: samples.len(), threshold, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;

    fn window() -> Region {
        Region::new(&[-4.0, -4.0], &[4.0, 4.0])
    }

    fn csr_windows() -> Vec<Region> {
        vec![
            Region::new(&[-1.0, -1.0], &[1.0, 1.0]),
            Region::new(&[1.5, -1.0], &[3.5, 1.0]),
            Region::new(&[-1.0, 1.5], &[1.0, 3.5]),
        ]
    }

    #[test]
    fn ball_tau_is_exponential() {
        let (trials, discarded) = run_surgery_trials(&window(), &Growth::ConcentricBalls, 1.0, 4000, 1).unwrap();
        assert_eq!(discarded, 0);
        let taus: Vec<f64> = trials.iter().map(|t| t.tau).collect();
        assert!(ks_one_sample(&taus, |s| 1.0 - (-s).exp()).1 > 0.01);
    }

    #[test]
    fn sausage_tau_is_exponential_and_area_exact() {
        let g = Growth::BrownianSausage { r: 0.2, dt: 0.00125 };
        let (trials, discarded) = run_surgery_trials(&window(), &g, 1.0, 1500, 2).unwrap();
        assert!(discarded < 15);
        for t in &trials {
            assert_eq!(t.region.area(2), t.tau);
            assert_eq!(t.removed, 1);
        }
        let taus: Vec<f64> = trials.iter().map(|t| t.tau).collect();
        assert!(ks_one_sample(&taus, |s| 1.0 - (-s).exp()).1 > 0.01);
    }

    #[test]
    fn boundary_point_is_on_the_growth_front() {
        let g = Growth::BrownianSausage { r: 0.2, dt: 0.00125 };
        for seed in 0..50 {
            if let Some(t) = run_surgery_trial(&window(), &g, 1.0, seed).unwrap() {
                let GrowthRegion::Lattice { cell, lo, partial, .. } = &t.region else { unreachable!() };
                let x0 = lo[0] + partial.0[0] as f64 * cell;
                assert!((t.boundary_point.x() - (x0 + partial.1 * cell)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_nu_leaves_growth_region_empty() {
        for g in [Growth::ConcentricBalls, Growth::BrownianSausage { r: 0.2, dt: 0.00125 }] {
            for seed in 0..20 {
                let full = run_surgery_trial(&window(), &g, 1.0, seed).unwrap().unwrap();
                let t = run_surgery_trial(&window(), &g, 0.0, seed).unwrap().unwrap();
                assert_eq!(t.added, 0);
                assert_eq!(t.tau, full.tau);
                assert_eq!(t.eta.len(), full.eta.len() - full.added);
                if let GrowthRegion::Ball { radius } = t.region {
                    assert!(t.eta.points.iter().all(|p| p.norm() > radius));
                }
            }
        }
    }

    #[test]
    fn csr_accepts_fresh_poisson() {
        let pats: Vec<PointSet> =
            (0..2000).map(|i| sample_ppp(&window(), 1.0, &mut rng::stream(9, &[i])).unwrap()).collect();
        let refs: Vec<&[Point]> = pats.iter().map(|p| p.points.as_slice()).collect();
        let rep = csr_test_suite(&refs, &csr_windows(), 0.5, 0.01, 0.1, 3).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn csr_rejects_unspliced() {
        let (trials, _) = run_surgery_trials(&window(), &Growth::ConcentricBalls, 0.0, 2000, 4).unwrap();
        let refs: Vec<&[Point]> = trials.iter().map(|t| t.eta.points.as_slice()).collect();
        let rep = csr_test_suite(&refs, &csr_windows(), 0.5, 0.01, 0.1, 3).unwrap();
        assert!(!rep.lines[0].pass);
    }
}
