use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use frogsim_core::branching::{
    fresh_taus, generation_stats, lineage_taus, mean_growth_check, offspring_samples, quantile,
    simulate_branching_replicas, BranchLimit, BranchingParams,
};
use frogsim_core::frogsim::{init_sim, passage_times_along_rays, PassageRun};
use frogsim_core::percolation::{cluster_size_samples, estimate_critical_radius, estimate_crossing_prob};
use frogsim_core::rng::{hash_key, tag};
use frogsim_core::stats::{
    estimate_speed, growth_exponent_fit, ks_one_sample, ks_two_sample, mean, mean_ci, poisson_window_test,
    tail_exponent_fit, variance, verify_bm_bounds, window_counts, PoissonWindowReport,
};
use frogsim_core::surgery::{csr_test_suite, run_surgery_trials};
use frogsim_core::{CrossingMode, Point, Region, SimParams, StepPolicy};

use crate::artifacts::{write_atomic, Table, Verdict};
use crate::config::{ConfigError, CriticalCache, Expect, Experiment, ExperimentConfig};

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub radius: Option<f64>,
    pub critical: Option<f64>,
    pub out_dir: PathBuf,
}

#[derive(Default)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub flags: BTreeMap<String, Value>,
}

impl Ctx {
    fn r(&self) -> f64 {
        self.radius.expect("radius resolved for this experiment")
    }

    fn replica_seed(&self, i: usize) -> u64 {
        hash_key(self.cfg.seed, &[tag::REPLICA, i as u64])
    }

    fn policy(&self) -> StepPolicy {
        StepPolicy::default().with_dt_max(self.cfg.dt_max)
    }

    fn sim_params(&self, default_box: f64) -> SimParams {
        SimParams::new(self.cfg.dim, self.r(), self.cfg.box_side.unwrap_or(default_box)).with_dt_max(self.cfg.dt_max)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Whether the radius counts as critical for verdict direction.
    fn expect_critical(&self) -> Result<bool> {
        match self.cfg.expect.unwrap_or(Expect::Auto) {
            Expect::Critical => Ok(true),
            Expect::Subcritical => Ok(false),
            Expect::Auto => match self.critical {
                Some(rc) => Ok(self.r() >= 0.99 * rc),
                None => Err(ConfigError("expect \"auto\" needs a critical radius cache".into()).into()),
            },
        }
    }
}

pub fn run_experiment(ctx: &Ctx) -> Result<Outcome> {
    match ctx.cfg.experiment {
        Experiment::Speed => speed(ctx),
        Experiment::Shape => shape(ctx),
        Experiment::PoissonTest => poisson_test(ctx),
        Experiment::CriticalFront => critical_front(ctx),
        Experiment::Crossing => crossing(ctx),
        Experiment::ClusterTail => cluster_tail(ctx),
        Experiment::Branching => branching(ctx),
        Experiment::Surgery => surgery(ctx),
        Experiment::BmBounds => bm_bounds(ctx),
        Experiment::CriticalRadius => critical_radius(ctx),
    }
}

fn default_rays(dim: usize) -> Vec<Point> {
    match dim {
        1 => vec![Point::new(&[1.0]), Point::new(&[-1.0])],
        2 => vec![Point::xy(1.0, 0.0), Point::xy(0.0, 1.0)],
        _ => vec![Point::new(&[1.0, 0.0, 0.0]), Point::new(&[0.0, 1.0, 0.0])],
    }
}

fn speed(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let r = ctx.r();
    let n_max = cfg.n_max.unwrap_or(40);
    let n_min = cfg.n_min.unwrap_or(n_max / 2);
    let params = ctx.sim_params(2.0 * (n_max as f64 + 10.0 * r) + 60.0);
    let rays: Vec<Point> = match &cfg.rays {
        Some(v) => {
            if v.iter().any(|ray| ray.len() != cfg.dim) {
                bail!(ConfigError("each ray needs dim coordinates".into()));
            }
            v.iter().map(|ray| Point::new(ray)).collect()
        }
        None => default_rays(cfg.dim),
    };
    let t_cap = cfg.t_max.unwrap_or(100.0);
    let runs: Vec<Vec<PassageRun>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| passage_times_along_rays(&params, &rays, n_max, ctx.replica_seed(i), t_cap))
        .collect::<frogsim_core::Result<_>>()?;

    let mut t = Table::new(&["replica", "ray", "n", "target_x", "target_y", "target_z", "time", "reached"]);
    for (i, per_ray) in runs.iter().enumerate() {
        for (k, run) in per_ray.iter().enumerate() {
            for s in &run.samples {
                let c = s.target.coords;
                t.row([
                    i.to_string(),
                    k.to_string(),
                    s.n.to_string(),
                    c[0].to_string(),
                    c[1].to_string(),
                    c[2].to_string(),
                    s.time.to_string(),
                    s.reached.to_string(),
                ]);
            }
        }
    }
    t.save(&ctx.path("passage.csv"))?;

    let mut out = Outcome::default();
    let mut estimates = Vec::new();
    for k in 0..rays.len() {
        let per: Vec<_> = runs.iter().map(|r| r[k].samples.clone()).collect();
        let est = estimate_speed(&per, r)?;
        out.verdicts.push(
            Verdict::new(
                format!("gamma_tilde_ray{k}"),
                est.gamma_tilde,
                "finite > 0, all targets reached",
                est.gamma_tilde > 0.0 && est.gamma_tilde.is_finite() && est.unreached == 0,
            )
            .with_ci(est.ci.0, est.ci.1),
        );
        out.flags.insert(format!("gamma_ray{k}"), json!(est.gamma));
        estimates.push(est);
    }
    if estimates.len() >= 2 {
        let (a, b) = (&estimates[0], &estimates[1]);
        let half = |e: &frogsim_core::stats::SpeedEstimate| 0.5 * (e.ci.1 - e.ci.0);
        let joint = (half(a).powi(2) + half(b).powi(2)).sqrt();
        let diff = a.gamma_tilde - b.gamma_tilde;
        out.verdicts.push(
            Verdict::new("rays_agree", diff, "|difference| within joint 95% CI", diff.abs() <= joint)
                .with_ci(diff - joint, diff + joint),
        );
    }
    // Replica-averaged T(0, x_n)/n over the tail range of n.
    let mut ratios = Vec::new();
    for n in n_min.max(1)..=n_max {
        let vals: Vec<f64> = runs
            .iter()
            .flatten()
            .flat_map(|run| run.samples.iter().filter(|s| s.n == n && s.reached).map(|s| s.time / n as f64))
            .collect();
        if !vals.is_empty() {
            ratios.push(mean(&vals));
        }
    }
    let rel_sd = if ratios.len() >= 2 { variance(&ratios).sqrt() / mean(&ratios) } else { f64::NAN };
    let max_sd = cfg.ratio_sd_max.unwrap_or(0.15);
    out.verdicts.push(Verdict::new(
        "ratio_sd",
        rel_sd,
        format!("SD/mean of T/n over n in [{n_min}, {n_max}] < {max_sd}"),
        rel_sd < max_sd,
    ));
    let flat: Vec<&PassageRun> = runs.iter().flatten().collect();
    out.flags.insert("boundary_runs".into(), json!(flat.iter().filter(|r| r.boundary_flag).count()));
    out.flags.insert("partial_runs".into(), json!(flat.iter().filter(|r| r.partial).count()));
    out.flags.insert("small_box".into(), json!(flat.iter().any(|r| r.small_box)));
    Ok(out)
}

struct FrontRun {
    front: Vec<(f64, f64)>,
    out_radius: f64,
    in_radius: f64,
    exited: bool,
}

fn front_runs(ctx: &Ctx, default_box: f64, default_t: f64, default_dt: f64) -> Result<Vec<FrontRun>> {
    let params = ctx.sim_params(default_box);
    let t_end = ctx.cfg.t_max.unwrap_or(default_t);
    let dt = ctx.cfg.sample_dt.unwrap_or(default_dt);
    let steps = (t_end / dt).round() as usize;
    Ok((0..ctx.cfg.replicas)
        .into_par_iter()
        .map(|i| -> frogsim_core::Result<FrontRun> {
            let mut sim = init_sim(&params, ctx.replica_seed(i))?;
            let mut front = Vec::with_capacity(steps + 1);
            for k in 1..=steps {
                sim.advance(k as f64 * dt);
                sim.snapshot();
                front.push((sim.clock, sim.front()));
            }
            Ok(FrontRun { front, out_radius: sim.out_radius(), in_radius: sim.in_radius(), exited: sim.exited_box() })
        })
        .collect::<frogsim_core::Result<_>>()?)
}

fn save_fronts(ctx: &Ctx, runs: &[FrontRun]) -> Result<()> {
    let mut t = Table::new(&["replica", "t", "front"]);
    for (i, run) in runs.iter().enumerate() {
        for (tt, f) in &run.front {
            t.row([i.to_string(), tt.to_string(), f.to_string()]);
        }
    }
    t.save(&ctx.path("front.csv"))
}

/// Fit of the replica-averaged front, with a t interval from per-replica fits.
fn front_exponent(runs: &[FrontRun]) -> Result<(f64, f64, (f64, f64))> {
    let len = runs[0].front.len();
    let avg: Vec<(f64, f64)> =
        (0..len).map(|k| (runs[0].front[k].0, runs.iter().map(|r| r.front[k].1).sum::<f64>() / runs.len() as f64)).collect();
    let fit = growth_exponent_fit(&avg)?;
    let per: Vec<f64> = runs.iter().filter_map(|r| growth_exponent_fit(&r.front).ok()).map(|f| f.alpha).collect();
    let ci = if per.len() >= 2 {
        let (_, lo, hi) = mean_ci(&per);
        (lo, hi)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok((fit.alpha, fit.r2, ci))
}

fn shape(ctx: &Ctx) -> Result<Outcome> {
    let runs = front_runs(ctx, 700.0, 10.0, 0.5)?;
    save_fronts(ctx, &runs)?;
    let t_end = runs[0].front.last().map(|f| f.0).unwrap_or(0.0);
    let mut t = Table::new(&["replica", "t", "out_radius", "in_radius", "ratio", "exited"]);
    let ratios: Vec<f64> = runs.iter().map(|r| r.out_radius / r.in_radius).collect();
    for (i, run) in runs.iter().enumerate() {
        t.row([
            i.to_string(),
            t_end.to_string(),
            run.out_radius.to_string(),
            run.in_radius.to_string(),
            ratios[i].to_string(),
            run.exited.to_string(),
        ]);
    }
    t.save(&ctx.path("shape.csv"))?;

    let mut out = Outcome::default();
    let [lo, hi] = ctx.cfg.shape_range.unwrap_or([1.0, 1.25]);
    let (m, clo, chi) = mean_ci(&ratios);
    out.verdicts.push(
        Verdict::new("shape_ratio", m, format!("out/in radius in [{lo}, {hi}]"), m >= lo && m <= hi).with_ci(clo, chi),
    );
    let [slo, shi] = ctx.cfg.slope_range.unwrap_or([0.8, 1.2]);
    let (alpha, r2, ci) = front_exponent(&runs)?;
    out.verdicts.push(
        Verdict::new("front_slope", alpha, format!("log-log slope in [{slo}, {shi}]"), alpha >= slo && alpha <= shi)
            .with_ci(ci.0, ci.1),
    );
    out.flags.insert("front_fit_r2".into(), json!(r2));
    out.flags.insert("exited_replicas".into(), json!(runs.iter().filter(|r| r.exited).count()));
    Ok(out)
}

fn critical_front(ctx: &Ctx) -> Result<Outcome> {
    let critical = ctx.expect_critical()?;
    let runs = front_runs(ctx, 700.0, 10.0, 0.25)?;
    save_fronts(ctx, &runs)?;
    let (alpha, r2, ci) = front_exponent(&runs)?;
    let mut out = Outcome::default();
    let v = if critical {
        Verdict::new("front_exponent", alpha, "alpha > 1.2 with r2 > 0.9", alpha > 1.2 && r2 > 0.9)
    } else {
        Verdict::new("front_exponent", alpha, "alpha in [0.8, 1.2]", (0.8..=1.2).contains(&alpha))
    };
    out.verdicts.push(v.with_ci(ci.0, ci.1));
    out.flags.insert("expect_critical".into(), json!(critical));
    out.flags.insert("front_fit_r2".into(), json!(r2));
    out.flags.insert("exited_replicas".into(), json!(runs.iter().filter(|r| r.exited).count()));
    Ok(out)
}

fn default_windows(dim: usize) -> Vec<Region> {
    let shift = |a: f64, b: f64| {
        let mut lo = vec![-1.0; dim];
        let mut hi = vec![1.0; dim];
        lo[0] = a;
        hi[0] = b;
        Region::new(&lo, &hi)
    };
    vec![shift(-1.0, 1.0), shift(2.0, 4.0), shift(-4.0, -2.0)]
}

fn windows(ctx: &Ctx) -> Result<Vec<Region>> {
    match &ctx.cfg.windows {
        None => Ok(default_windows(ctx.cfg.dim)),
        Some(ws) => {
            let mut out = Vec::new();
            for w in ws {
                if w.lo.len() != ctx.cfg.dim {
                    bail!(ConfigError("window dimension differs from dim".into()));
                }
                out.push(Region::new(&w.lo, &w.hi));
            }
            Ok(out)
        }
    }
}

fn window_verdicts(prefix: &str, rep: &PoissonWindowReport, max_corr: f64, out: &mut Vec<Verdict>) {
    for (k, w) in rep.windows.iter().enumerate() {
        let rel = (w.mean - w.volume).abs() / w.volume;
        out.push(
            Verdict::new(format!("{prefix}w{k}_mean"), w.mean, format!("within 10% of {}", w.volume), rel <= 0.1)
                .with_ci(w.mean_ci.0, w.mean_ci.1),
        );
        out.push(
            Verdict::new(
                format!("{prefix}w{k}_dispersion"),
                w.dispersion,
                "in [0.8, 1.2]",
                (0.8..=1.2).contains(&w.dispersion),
            )
            .with_ci(w.dispersion_ci.0, w.dispersion_ci.1),
        );
        out.push(Verdict::new(format!("{prefix}w{k}_gof"), w.gof.p_value, "p > 0.01", w.gof.p_value > 0.01));
    }
    out.push(Verdict::new(
        format!("{prefix}max_abs_corr"),
        rep.max_abs_corr,
        format!("< {max_corr}"),
        rep.max_abs_corr < max_corr,
    ));
}

fn poisson_test(ctx: &Ctx) -> Result<Outcome> {
    let wins = windows(ctx)?;
    let params = ctx.sim_params(200.0);
    let t_end = ctx.cfg.t_max.unwrap_or(100.0);
    let reach = wins
        .iter()
        .map(|w| (0..w.dim).map(|a| w.lo[a].abs().max(w.hi[a].abs()).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let rows: Vec<(Vec<u32>, Vec<u32>, bool, f64)> = (0..ctx.cfg.replicas)
        .into_par_iter()
        .map(|i| -> frogsim_core::Result<_> {
            let mut sim = init_sim(&params, ctx.replica_seed(i))?;
            sim.advance(t_end);
            let snap = sim.snapshot();
            let moving = window_counts(&snap.positions, &wins);
            let frozen = window_counts(&sim.frozen_positions(), &wins);
            Ok((moving, frozen, sim.in_radius() < 3.0 * reach, sim.in_radius()))
        })
        .collect::<frogsim_core::Result<_>>()?;

    let mut t = Table::new(&["replica", "window", "count", "frozen_count", "excluded"]);
    for (i, (m, f, ex, _)) in rows.iter().enumerate() {
        for k in 0..wins.len() {
            t.row([i.to_string(), k.to_string(), m[k].to_string(), f[k].to_string(), ex.to_string()]);
        }
    }
    t.save(&ctx.path("counts.csv"))?;

    let volumes: Vec<f64> = wins.iter().map(|w| w.volume()).collect();
    let max_corr = ctx.cfg.max_corr.unwrap_or(0.05);
    let moving: Vec<Option<Vec<u32>>> = rows.iter().map(|r| (!r.2).then(|| r.0.clone())).collect();
    let frozen: Vec<Option<Vec<u32>>> = rows.iter().map(|r| (!r.2).then(|| r.1.clone())).collect();
    let rep = poisson_window_test(&moving, &volumes)?;
    let control = poisson_window_test(&frozen, &volumes)?;
    let mut out = Outcome::default();
    window_verdicts("", &rep, max_corr, &mut out.verdicts);
    let mut ctrl = Vec::new();
    window_verdicts("frozen_", &control, max_corr, &mut ctrl);
    let failing = ctrl.iter().filter(|v| !v.pass).count();
    out.verdicts.push(Verdict::new(
        "frozen_control_fails",
        failing as f64,
        "at least one frozen-position check fails",
        failing > 0,
    ));
    let radii: Vec<f64> = rows.iter().map(|r| r.3.min(0.5 * params.box_side)).collect();
    out.flags.insert("mean_in_radius".into(), json!(mean(&radii)));
    out.flags.insert("excluded".into(), json!(rep.excluded));
    out.flags.insert("exclusion_rate".into(), json!(rep.exclusion_rate));
    out.flags.insert(
        "frozen_checks".into(),
        json!(ctrl.iter().map(|v| (v.name.clone(), v.value, v.pass)).collect::<Vec<_>>()),
    );
    Ok(out)
}

fn crossing(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.r();
    let critical = ctx.expect_critical()?;
    let ns = ctx.cfg.ns.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0]);
    let aspect = ctx.cfg.aspect.unwrap_or(3.0);
    let mode = ctx.cfg.mode.unwrap_or(CrossingMode::Any);
    let mut t = Table::new(&["n", "successes", "replicas", "p_hat", "ci_lo", "ci_hi"]);
    let mut ests = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let e = estimate_crossing_prob(r, n, aspect, mode, ctx.cfg.replicas, hash_key(ctx.cfg.seed, &[j as u64]))?;
        t.row([
            n.to_string(),
            e.successes.to_string(),
            e.replicas.to_string(),
            e.p_hat.to_string(),
            e.ci_lo.to_string(),
            e.ci_hi.to_string(),
        ]);
        ests.push(e);
    }
    t.save(&ctx.path("crossing.csv"))?;
    let mut out = Outcome::default();
    if critical {
        for (n, e) in ns.iter().zip(&ests) {
            out.verdicts.push(
                Verdict::new(format!("p_n{n}"), e.p_hat, ">= 0.05 with CI above 0", e.p_hat >= 0.05 && e.ci_lo > 0.0)
                    .with_ci(e.ci_lo, e.ci_hi),
            );
        }
    } else {
        let dec = ests.windows(2).all(|w| w[1].p_hat < w[0].p_hat) && ests[0].p_hat > 0.0;
        let last = ests.last().expect("ns is non-empty");
        out.verdicts.push(Verdict::new(
            "log_p_decreasing",
            last.p_hat.ln() - ests[0].p_hat.ln(),
            "log p strictly decreasing in n",
            dec,
        ));
    }
    out.flags.insert("expect_critical".into(), json!(critical));
    out.flags.insert("p_hat".into(), json!(ests.iter().map(|e| e.p_hat).collect::<Vec<_>>()));
    Ok(out)
}

fn cluster_tail(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.r();
    let box_side = ctx.cfg.box_side.unwrap_or(40.0 * r.max(0.5));
    let s = cluster_size_samples(r, ctx.cfg.dim, box_side, ctx.cfg.replicas, ctx.cfg.seed)?;
    let mut t = Table::new(&["sample", "size"]);
    for (i, v) in s.sizes.iter().enumerate() {
        t.row([i.to_string(), v.to_string()]);
    }
    t.save(&ctx.path("cluster_sizes.csv"))?;
    let fit = tail_exponent_fit(&s.sizes)?;
    let mut out = Outcome::default();
    out.verdicts.push(Verdict::new("tail_r2", fit.r2, "> 0.98", fit.r2 > 0.98));
    out.verdicts.push(Verdict::new("tail_rate", fit.c, "> 0", fit.c > 0.0));
    let sizes: Vec<f64> = s.sizes.iter().map(|&v| v as f64).collect();
    out.flags.insert("mean_size".into(), json!(mean(&sizes)));
    out.flags.insert("truncated".into(), json!(s.truncated));
    out.flags.insert("truncation_flag".into(), json!(s.truncation_flag));
    Ok(out)
}

fn branching(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let r = ctx.r();
    let gen_max = cfg.gen_max.unwrap_or(5);
    let mut params = BranchingParams::new(cfg.dim, r, BranchLimit::Generations(gen_max));
    params.policy = ctx.policy();
    if let Some(b) = cfg.box_side {
        params.box_side = b;
    }
    if let Some(t) = cfg.t_max {
        params.tau_cap = t;
    }
    let n_off = cfg.offspring_replicas.unwrap_or(10_000);
    let off = offspring_samples(r, cfg.dim, params.box_side, n_off, hash_key(cfg.seed, &[tag::OFFSPRING]))?;
    let recs = simulate_branching_replicas(&params, cfg.replicas, hash_key(cfg.seed, &[1]))?;

    let mut t = Table::new(&["sample", "k", "x", "truncated"]);
    for (i, o) in off.iter().enumerate() {
        t.row([i.to_string(), o.k.to_string(), o.x().to_string(), o.truncated.to_string()]);
    }
    t.save(&ctx.path("offspring.csv"))?;
    let mut g = Table::new(&["replica", "n", "z_n"]);
    let mut p = Table::new(&["replica", "id", "parent", "generation", "birth_time", "birth_norm"]);
    for (i, rec) in recs.iter().enumerate() {
        for (n, z) in rec.generation_sizes().iter().enumerate() {
            g.row([i.to_string(), n.to_string(), z.to_string()]);
        }
        for q in &rec.particles {
            p.row([
                i.to_string(),
                q.id.to_string(),
                q.parent.map(|v| v.to_string()).unwrap_or_default(),
                q.generation.to_string(),
                q.birth_time.to_string(),
                q.birth_position.norm().to_string(),
            ]);
        }
    }
    g.save(&ctx.path("generations.csv"))?;
    p.save(&ctx.path("particles.csv"))?;

    let kept: Vec<_> = off.iter().filter(|o| !o.truncated).collect();
    let xs: Vec<f64> = kept.iter().map(|o| o.x() as f64).collect();
    let mut out = Outcome::default();
    for line in mean_growth_check(&recs, &xs, gen_max)?.into_iter().skip(1) {
        out.verdicts.push(
            Verdict::new(
                format!("mean_z{}", line.n),
                line.mean_zn,
                format!("matches mu^n = {:.4} within 95% CI", line.mu_pow),
                line.pass,
            )
            .with_ci(line.mu_pow + line.ci_lo, line.mu_pow + line.ci_hi),
        );
    }
    let along = lineage_taus(&recs);
    let fresh = fresh_taus(&params, along.len().clamp(2, 5000), hash_key(cfg.seed, &[2]))?;
    let (_, p_tau) = ks_two_sample(&along, &fresh);
    out.verdicts.push(Verdict::new("tau_ks", p_tau, "p > 0.01", p_tau > 0.01));
    let fit = tail_exponent_fit(&kept.iter().map(|o| o.x()).collect::<Vec<_>>())?;
    out.verdicts.push(Verdict::new("offspring_tail_r2", fit.r2, "> 0.98", fit.r2 > 0.98));
    let x_min = off.iter().map(|o| o.x()).min().unwrap_or(0);
    out.verdicts.push(Verdict::new("x_min", x_min as f64, ">= 2", x_min >= 2));

    if let Some(grid) = &cfg.time_grid {
        let t_hi = grid.iter().cloned().fold(0.0, f64::max);
        let mut tp = params.clone();
        tp.limit = BranchLimit::Time(t_hi);
        let trecs = simulate_branching_replicas(&tp, cfg.replicas, hash_key(cfg.seed, &[3]))?;
        let mut gs = Table::new(&["t", "replica", "n_t", "m_t"]);
        let mut q_n = Vec::new();
        let mut q_m = Vec::new();
        for &tt in grid {
            let st = generation_stats(&trecs, tt)?;
            for (i, (n, m)) in st.n_t.iter().zip(&st.m_t).enumerate() {
                gs.row([tt.to_string(), i.to_string(), n.to_string(), m.to_string()]);
            }
            let nt: Vec<f64> = st.n_t.iter().map(|&n| n as f64 / tt).collect();
            let mt: Vec<f64> = st.m_t.iter().map(|&m| m / tt).collect();
            q_n.push(quantile(&nt, 0.99));
            q_m.push(quantile(&mt, 0.99));
        }
        gs.save(&ctx.path("generation_stats.csv"))?;
        for (name, q) in [("n_t_over_t_q99", &q_n), ("m_t_over_t_q99", &q_m)] {
            let ratio = q.last().unwrap() / q.first().unwrap();
            out.verdicts.push(Verdict::new(name, ratio, "last/first 99th percentile <= 1.25", ratio <= 1.25));
        }
        out.flags.insert("n_t_q99".into(), json!(q_n));
        out.flags.insert("m_t_q99".into(), json!(q_m));
        out.flags.insert("time_truncated".into(), json!(trecs.iter().filter(|r| r.truncated).count()));
    }
    out.flags.insert("mu_hat".into(), json!(mean(&xs)));
    out.flags.insert("offspring_truncated".into(), json!(off.len() - kept.len()));
    out.flags.insert("cluster_truncations".into(), json!(recs.iter().map(|r| r.cluster_truncations).sum::<u32>()));
    out.flags.insert("tau_capped".into(), json!(recs.iter().map(|r| r.tau_capped).sum::<u32>()));
    out.flags.insert("truncated_records".into(), json!(recs.iter().filter(|r| r.truncated).count()));
    Ok(out)
}

fn surgery(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let dim = cfg.dim;
    let half = cfg.window_side.unwrap_or(12.0) / 2.0;
    let window = Region::new(&vec![-half; dim], &vec![half; dim]);
    let csr_windows = match &cfg.windows {
        Some(_) => windows(ctx)?,
        None => {
            let mut ws = default_windows(dim);
            if dim >= 2 {
                let mut lo = vec![-1.0; dim];
                let mut hi = vec![1.0; dim];
                lo[1] = 2.0;
                hi[1] = 4.0;
                ws[2] = Region::new(&lo, &hi);
            }
            ws
        }
    };
    let nu = cfg.nu_intensity.unwrap_or(1.0);
    let pair_radius = cfg.pair_radius.unwrap_or(0.5);
    let max_corr = cfg.max_corr.unwrap_or(0.05);
    let mut trials_t = Table::new(&["family", "trial", "tau", "eta_count", "removed", "added"]);
    let mut csr_t = Table::new(&["family", "sample", "test", "statistic", "p_value", "pass"]);
    let mut out = Outcome::default();
    for (j, (fam, growth)) in cfg.growth_models().into_iter().enumerate() {
        let seed = hash_key(cfg.seed, &[j as u64]);
        let (trials, discarded) = run_surgery_trials(&window, &growth, nu, cfg.replicas, seed)?;
        let (control, _) = run_surgery_trials(&window, &growth, 0.0, cfg.replicas, seed)?;
        for (i, tr) in trials.iter().enumerate() {
            trials_t.row([
                fam.to_string(),
                i.to_string(),
                tr.tau.to_string(),
                tr.eta.len().to_string(),
                tr.removed.to_string(),
                tr.added.to_string(),
            ]);
        }
        let taus: Vec<f64> = trials.iter().map(|t| t.tau).collect();
        let (_, p) = ks_one_sample(&taus, |s| 1.0 - (-s).exp());
        out.verdicts.push(Verdict::new(format!("{fam}_tau_ks"), p, "p > 0.01 against Exp(1)", p > 0.01));
        let mut reports = Vec::new();
        for (label, set) in [("eta", &trials), ("control", &control)] {
            let pats: Vec<&[Point]> = set.iter().map(|t| t.eta.points.as_slice()).collect();
            let rep = csr_test_suite(&pats, &csr_windows, pair_radius, 0.01, max_corr, hash_key(seed, &[tag::CONTROL]))?;
            for l in &rep.lines {
                csr_t.row([
                    fam.to_string(),
                    label.to_string(),
                    l.name.clone(),
                    l.statistic.to_string(),
                    l.p_value.to_string(),
                    l.pass.to_string(),
                ]);
            }
            reports.push(rep);
        }
        let min_p = reports[0].lines.iter().map(|l| l.p_value).fold(1.0, f64::min);
        out.verdicts.push(Verdict::new(
            format!("{fam}_csr"),
            min_p,
            format!("all p > {:.2e} (Bonferroni 0.01), |corr| < {max_corr}", reports[0].threshold),
            reports[0].pass,
        ));
        out.flags.insert(format!("{fam}_max_abs_corr"), json!(reports[0].max_abs_corr));
        let ctrl_min = reports[1].lines.iter().map(|l| l.p_value).fold(1.0, f64::min);
        out.verdicts.push(Verdict::new(
            format!("{fam}_control_fails"),
            ctrl_min,
            "unspliced pattern rejected by the CSR suite",
            !reports[1].pass,
        ));
        out.flags.insert(format!("{fam}_discarded"), json!(discarded));
    }
    trials_t.save(&ctx.path("surgery.csv"))?;
    csr_t.save(&ctx.path("csr.csv"))?;
    Ok(out)
}

fn bm_bounds(ctx: &Ctx) -> Result<Outcome> {
    let k = ctx.cfg.k.unwrap_or(1.0);
    let ells = ctx.cfg.ells.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let lines = verify_bm_bounds(k, &ells, ctx.cfg.replicas, ctx.cfg.seed, &ctx.policy())?;
    let mut t = Table::new(&["ell", "kind", "empirical", "sigma", "bound", "pass"]);
    let mut out = Outcome::default();
    for l in &lines {
        for (kind, b) in [("confinement", &l.confinement), ("excursion", &l.excursion)] {
            t.row([
                l.ell.to_string(),
                kind.to_string(),
                b.empirical.to_string(),
                b.sigma.to_string(),
                b.bound.to_string(),
                b.pass.to_string(),
            ]);
        }
        let c = &l.confinement;
        out.verdicts.push(
            Verdict::new(
                format!("bm_l{}", l.ell),
                c.empirical,
                format!(
                    "stay <= {:.4} + 3 sd; excursion {:.5} <= {:.4} + 3 sd",
                    c.bound, l.excursion.empirical, l.excursion.bound
                ),
                c.pass && l.excursion.pass,
            )
            .with_ci(c.empirical - 3.0 * c.sigma, c.empirical + 3.0 * c.sigma),
        );
    }
    t.save(&ctx.path("bm_bounds.csv"))?;
    Ok(out)
}

fn critical_radius(ctx: &Ctx) -> Result<Outcome> {
    let n = ctx.cfg.n.unwrap_or(20.0);
    let tol = ctx.cfg.tol.unwrap_or(0.02);
    let cr = estimate_critical_radius(n, ctx.cfg.replicas, tol, ctx.cfg.seed)?;
    let mut t = Table::new(&["step", "radius", "crossing_fraction"]);
    for (i, (r, p)) in cr.trace.iter().enumerate() {
        t.row([i.to_string(), r.to_string(), p.to_string()]);
    }
    t.save(&ctx.path("bisection.csv"))?;
    let cache = CriticalCache { r_hat: cr.r_hat, n, tol, replicas: cr.replicas, seed: ctx.cfg.seed };
    let bytes = serde_json::to_vec_pretty(&cache)?;
    write_atomic(&ctx.path("critical_radius.json"), &bytes)?;
    if let Some(extra) = &ctx.cfg.critical_cache {
        write_atomic(extra, &bytes)?;
    }
    let mut out = Outcome::default();
    out.verdicts.push(Verdict::new("critical_radius", cr.r_hat, format!("bisection converged to tol {tol}"), true));
    out.flags.insert("evaluations".into(), json!(cr.trace.len()));
    Ok(out)
}
