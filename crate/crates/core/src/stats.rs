//! Estimators and tests turning simulation output into verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson, StudentsT};

use crate::error::{config_err, Error, Result};
use crate::frogsim::PassageSample;
use crate::motion::{simulate_until_hit, StepPolicy};
use crate::pointprocess::Point;
use crate::rng::{hash_key, tag};

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Two-sided Student-t quantile for a 95% interval.
pub fn t95(df: usize) -> f64 {
    if df == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, df as f64).expect("valid df").inverse_cdf(0.975)
}

/// Mean with a 95% t interval.
pub fn mean_ci(xs: &[f64]) -> (f64, f64, f64) {
    let m = mean(xs);
    let half = t95(xs.len().saturating_sub(1)) * (variance(xs) / xs.len() as f64).sqrt();
    (m, m - half, m + half)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

/// Ordinary least squares of y on x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Degenerate("need at least two (x, y) pairs".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if n > 2 { (sse / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, r2, slope_se })
}

/// Pearson correlation (0 when either sample is constant).
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov-Smirnov test. Returns (D, p-value).
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, ks_pvalue(d, n))
}

/// Two-sample Kolmogorov-Smirnov test. Returns (D, p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    (d, ks_pvalue(d, na * nb / (na + nb)))
}

/// Sup-norm distance between two empirical CDFs.
pub fn ecdf_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    ks_two_sample(a, b).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of counts against Poisson(`mean`), merging
/// adjacent bins until each expected count is at least 5.
pub fn poisson_gof(counts: &[u32], mean: f64) -> Result<GofResult> {
    if counts.is_empty() || !(mean > 0.0) {
        return Err(Error::Degenerate("need counts and a positive mean".into()));
    }
    let n = counts.len() as f64;
    let pois = Poisson::new(mean).map_err(|e| Error::Degenerate(e.to_string()))?;
    let max_obs = *counts.iter().max().unwrap() as u64;
    let mut hist = vec![0u64; max_obs as usize + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    // Bins as [start, end) in k, the last one open-ended.
    let mut bins: Vec<(f64, u64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0u64);
    let mut k = 0u64;
    loop {
        exp_acc += n * pois.pmf(k);
        obs_acc += hist.get(k as usize).copied().unwrap_or(0);
        let tail_exp = n * pois.sf(k);
        if exp_acc >= 5.0 && tail_exp >= 5.0 {
            bins.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0;
        } else if tail_exp < 5.0 && k >= max_obs {
            let tail_obs: u64 = hist.iter().skip(k as usize + 1).sum();
            let last = (exp_acc + tail_exp, obs_acc + tail_obs);
            match bins.last_mut() {
                Some(b) if last.0 < 5.0 => {
                    b.0 += last.0;
                    b.1 += last.1;
                }
                _ => bins.push(last),
            }
            break;
        }
        k += 1;
    }
    if bins.len() < 2 {
        return Ok(GofResult { statistic: 0.0, df: 0, p_value: 1.0 });
    }
    let statistic: f64 = bins.iter().map(|&(e, o)| (o as f64 - e).powi(2) / e).sum();
    let df = bins.len() - 1;
    let p_value = ChiSquared::new(df as f64).expect("df > 0").sf(statistic);
    Ok(GofResult { statistic, df, p_value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Time per unit length.
    pub gamma_tilde: f64,
    /// Speed, 1 / gamma_tilde.
    pub gamma: f64,
    pub ci: (f64, f64),
    pub r: f64,
    pub replicas: usize,
    /// Targets that were never reached (excluded from the fit).
    pub unreached: usize,
    pub per_replica: Vec<f64>,
}

/// Time constant from passage samples: least-squares slope of T against n
/// over the upper half of the n range, per replica; the estimate is the mean
/// slope and the interval comes from the spread across replicas.
pub fn estimate_speed(replicas: &[Vec<PassageSample>], r: f64) -> Result<SpeedEstimate> {
    if replicas.len() < 2 {
        return Err(Error::Degenerate("need at least two replicas".into()));
    }
    let mut slopes = Vec::with_capacity(replicas.len());
    let mut unreached = 0;
    for samples in replicas {
        let n_max = samples.iter().map(|s| s.n).max().unwrap_or(0);
        let lo = n_max.div_ceil(2);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for s in samples.iter().filter(|s| s.n >= lo) {
            if s.reached {
                x.push(s.n as f64);
                y.push(s.time);
            } else {
                unreached += 1;
            }
        }
        slopes.push(linear_fit(&x, &y)?.slope);
    }
    let (m, lo, hi) = mean_ci(&slopes);
    Ok(SpeedEstimate {
        gamma_tilde: m,
        gamma: if m > 0.0 { 1.0 / m } else { f64::INFINITY },
        ci: (lo, hi),
        r,
        replicas: replicas.len(),
        unreached,
        per_replica: slopes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub volume: f64,
    pub n: usize,
    pub mean: f64,
    pub mean_ci: (f64, f64),
    pub dispersion: f64,
    pub dispersion_ci: (f64, f64),
    pub gof: GofResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonWindowReport {
    pub windows: Vec<WindowStats>,
    /// Correlation of counts for each window pair (i, j, rho).
    pub correlations: Vec<(usize, usize, f64)>,
    pub max_abs_corr: f64,
    pub excluded: usize,
    pub exclusion_rate: f64,
}

/// Window counts across replicas tested against Poisson(volume).
/// `counts[i]` holds one count per window for replica i, or None for an
/// excluded replica.
pub fn poisson_window_test(counts: &[Option<Vec<u32>>], volumes: &[f64]) -> Result<PoissonWindowReport> {
    let kept: Vec<&Vec<u32>> = counts.iter().flatten().collect();
    let excluded = counts.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::Degenerate("fewer than two usable replicas".into()));
    }
    let nw = volumes.len();
    let cols: Vec<Vec<f64>> = (0..nw).map(|w| kept.iter().map(|c| c[w] as f64).collect()).collect();
    let mut windows = Vec::with_capacity(nw);
    for w in 0..nw {
        let col = &cols[w];
        let n = col.len();
        let (m, mlo, mhi) = mean_ci(col);
        let v = variance(col);
        let disp = if m > 0.0 { v / m } else { f64::NAN };
        let chi = ChiSquared::new((n - 1) as f64).expect("n >= 2");
        let df = (n - 1) as f64;
        let dispersion_ci = (disp * df / chi.inverse_cdf(0.975), disp * df / chi.inverse_cdf(0.025));
        let ints: Vec<u32> = kept.iter().map(|c| c[w]).collect();
        let gof = poisson_gof(&ints, volumes[w])?;
        windows.push(WindowStats {
            volume: volumes[w],
            n,
            mean: m,
            mean_ci: (mlo, mhi),
            dispersion: disp,
            dispersion_ci,
            gof,
        });
    }
    let mut correlations = Vec::new();
    for i in 0..nw {
        for j in i + 1..nw {
            correlations.push((i, j, pearson(&cols[i], &cols[j])));
        }
    }
    let max_abs_corr = correlations.iter().map(|c| c.2.abs()).fold(0.0, f64::max);
    Ok(PoissonWindowReport {
        windows,
        correlations,
        max_abs_corr,
        excluded,
        exclusion_rate: excluded as f64 / counts.len() as f64,
    })
}

/// Number of positions in each window.
pub fn window_counts(positions: &[Point], windows: &[crate::pointprocess::Region]) -> Vec<u32> {
    windows.iter().map(|w| positions.iter().filter(|p| w.contains(p)).count() as u32).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

/// Log-log slope of a growth curve over its trailing half-decade of time.
pub fn growth_exponent_fit(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    let positive: Vec<&(f64, f64)> = samples.iter().filter(|s| s.0 > 0.0).collect();
    let (Some(first), Some(last)) = (positive.first(), positive.last()) else {
        return Err(Error::Degenerate("no samples at positive time".into()));
    };
    if last.0 < 10.0 * first.0 {
        return Err(Error::Degenerate("samples span less than a decade of time".into()));
    }
    let t_hi = last.0;
    let t_lo = t_hi / 10f64.sqrt();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for &&(t, rt) in positive.iter().filter(|s| s.0 >= t_lo) {
        if rt <= 0.0 {
            return Err(Error::Degenerate(format!("nonpositive front {rt} at t = {t}")));
        }
        x.push(t.ln());
        y.push(rt.ln());
    }
    let fit = linear_fit(&x, &y)?;
    Ok(ExponentFit { alpha: fit.slope, r2: fit.r2, window: (t_lo, t_hi) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Decay rate c in P[X > k] ~ exp(-c k).
    pub c: f64,
    pub r2: f64,
    pub k_range: (u32, u32),
    pub points: usize,
}

/// Fit log P[X > k] linearly in k over k >= median, keeping k whose
/// exceedance count is at least 5.
pub fn tail_exponent_fit(samples: &[u32]) -> Result<TailFit> {
    if samples.is_empty() {
        return Err(Error::Degenerate("no samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    if v[0] == v[v.len() - 1] {
        return Err(Error::Degenerate("all samples equal".into()));
    }
    let n = v.len();
    let median = v[(n - 1) / 2];
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut k = median;
    loop {
        let above = n - v.partition_point(|&s| s <= k);
        if above < 5 {
            break;
        }
        x.push(k as f64);
        y.push((above as f64 / n as f64).ln());
        k += 1;
    }
    if x.len() < 3 {
        return Err(Error::Degenerate("fewer than three tail points".into()));
    }
    let fit = linear_fit(&x, &y)?;
    Ok(TailFit { c: -fit.slope, r2: fit.r2, k_range: (median, k - 1), points: x.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub empirical: f64,
    pub sigma: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(successes: usize, n: usize, bound: f64) -> BoundCheck {
        let p = successes as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        BoundCheck { empirical: p, sigma, bound, pass: p <= bound + 3.0 * sigma }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmBoundLine {
    pub ell: u32,
    /// P[max over [0, ell k^2] of |B| <= k] against 0.7^ell.
    pub confinement: BoundCheck,
    /// P[max over [0, k^2] of B >= ell k] against 2 exp(-ell^2 / 2).
    pub excursion: BoundCheck,
}

/// Monte Carlo check of the two one-dimensional Brownian tail bounds.
/// Barriers are realized as balls of radius k whose near faces sit at the
/// levels of interest.
pub fn verify_bm_bounds(k: f64, ells: &[u32], replicas: usize, seed: u64, policy: &StepPolicy) -> Result<Vec<BmBoundLine>> {
    if !(k > 0.0) || ells.is_empty() || replicas == 0 {
        return config_err("need k > 0, at least one ell and replicas >= 1");
    }
    let l_max = *ells.iter().max().unwrap() as f64;
    let walls = [Point::new(&[2.0 * k]), Point::new(&[-2.0 * k])];
    let rows: Vec<(f64, Vec<bool>)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, Vec<bool>)> {
            let key = hash_key(seed, &[tag::REPLICA, i]);
            let exit = simulate_until_hit(Point::new(&[0.0]), 1, &walls[..], k, l_max * k * k, policy, key)?
                .hit_time()
                .unwrap_or(f64::INFINITY);
            let mut up = Vec::with_capacity(ells.len());
            for &l in ells {
                let level = l as f64 * k;
                let wall = [Point::new(&[2.0 * level])];
                let h = simulate_until_hit(Point::new(&[0.0]), 1, &wall[..], level, k * k, policy, key)?;
                up.push(h.hit_time().is_some());
            }
            Ok((exit, up))
        })
        .collect::<Result<_>>()?;
    Ok(ells
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let horizon = l as f64 * k * k;
            let stay = rows.iter().filter(|r| r.0 > horizon).count();
            let reach = rows.iter().filter(|r| r.1[j]).count();
            BmBoundLine {
                ell: l,
                confinement: BoundCheck::new(stay, replicas, 0.7f64.powi(l as i32)),
                excursion: BoundCheck::new(reach, replicas, 2.0 * (-(l as f64).powi(2) / 2.0).exp()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson as PoissonDist};

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wilson_covers() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn kolmogorov_values() {
        // Reference values of the Kolmogorov survival function.
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-6);
        assert!((kolmogorov_sf(1.36) - 0.04946).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_and_rejects() {
        let mut r = stream(1, &[]);
        let u: Vec<f64> = (0..5000).map(|_| r.random::<f64>()).collect();
        assert!(ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).1 > 0.01);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_one_sample(&sq, |x| x.clamp(0.0, 1.0)).1 < 1e-6);
        let v: Vec<f64> = (0..3000).map(|_| r.random::<f64>()).collect();
        assert!(ks_two_sample(&u, &v).1 > 0.01);
        assert!(ks_two_sample(&u, &sq).1 < 1e-6);
    }

    #[test]
    fn poisson_gof_accepts_poisson_and_rejects_shift() {
        let mut r = stream(2, &[]);
        let d = PoissonDist::new(7.0).unwrap();
        let c: Vec<u32> = (0..10_000).map(|_| d.sample(&mut r) as u32).collect();
        assert!(poisson_gof(&c, 7.0).unwrap().p_value > 0.01);
        assert!(poisson_gof(&c, 7.5).unwrap().p_value < 1e-6);
        let shifted: Vec<u32> = c.iter().map(|&x| x.saturating_sub(1)).collect();
        assert!(poisson_gof(&shifted, 7.0).unwrap().p_value < 1e-6);
    }

    #[test]
    fn synthetic_speed() {
        let reps: Vec<Vec<PassageSample>> = (0..5)
            .map(|_| {
                (0..=40)
                    .map(|n| PassageSample { n, target: Point::ORIGIN, time: 3.0 * n as f64, reached: true })
                    .collect()
            })
            .collect();
        let s = estimate_speed(&reps, 1.0).unwrap();
        assert!((s.gamma_tilde - 3.0).abs() < 1e-12);
        assert!((s.gamma - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_fits() {
        let lin: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, 2.5 * i as f64)).collect();
        assert!((growth_exponent_fit(&lin).unwrap().alpha - 1.0).abs() < 1e-12);
        let quad: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, 0.1 * (i * i) as f64)).collect();
        assert!((growth_exponent_fit(&quad).unwrap().alpha - 2.0).abs() < 1e-12);
        let short: Vec<(f64, f64)> = (5..=10).map(|i| (i as f64, 1.0)).collect();
        assert!(growth_exponent_fit(&short).is_err());
        let bad: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, 0.0)).collect();
        assert!(growth_exponent_fit(&bad).is_err());
    }

    #[test]
    fn geometric_tail() {
        let p = 0.2;
        let mut r = stream(3, &[]);
        let samples: Vec<u32> = (0..50_000)
            .map(|_| {
                let mut k = 1;
                while r.random::<f64>() >= p {
                    k += 1;
                }
                k
            })
            .collect();
        let fit = tail_exponent_fit(&samples).unwrap();
        let c = -(1.0f64 - p).ln();
        assert!((fit.c / c - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.r2 > 0.98);
        assert!(tail_exponent_fit(&[4; 100]).is_err());
    }

    #[test]
    fn window_test_on_poisson_counts() {
        let mut r = stream(4, &[]);
        let d2 = PoissonDist::new(2.0).unwrap();
        let d5 = PoissonDist::new(5.0).unwrap();
        let counts: Vec<Option<Vec<u32>>> =
            (0..5000).map(|_| Some(vec![d2.sample(&mut r) as u32, d5.sample(&mut r) as u32])).collect();
        let rep = poisson_window_test(&counts, &[2.0, 5.0]).unwrap();
        for w in &rep.windows {
            assert!(w.dispersion > 0.9 && w.dispersion < 1.1);
            assert!(w.gof.p_value > 0.01);
        }
        assert!(rep.max_abs_corr < 0.05);
    }

    #[test]
    fn bm_bounds_small() {
        let lines = verify_bm_bounds(1.0, &[1, 2, 3], 4000, 5, &StepPolicy::default().with_dt_max(0.05)).unwrap();
        assert_eq!(lines.len(), 3);
        for l in &lines {
            assert!(l.confinement.pass && l.excursion.pass, "{l:?}");
        }
        // P[max |B| <= 1 over [0,1]] is about 0.37; P[max B >= 1 over [0,1]] = 2(1 - Phi(1)).
        assert!((lines[0].confinement.empirical - 0.3708).abs() < 0.03);
        let exact = 2.0 * (1.0 - normal_cdf(1.0));
        assert!((lines[0].excursion.empirical - exact).abs() < 0.03);
    }
}
