//! Builds the core objects from a parsed config and runs one experiment.

use branchlln::analysis::{
    config_d, d_moments, d_second_moment_analytic, eta_mc, g_iterate, local_survival_mc, phi_quadrature, qsd_sample, sigma_mc,
    Conditioning, Pooling,
};
use branchlln::spine::{many_to_one, s_b_curve, s_b_reference, two_spine_second_moment};
use branchlln::{
    ergodic_ctmc, killed_drifted_bm, killed_recurrent_ou, make_offspring, replica_seed, run_replicas, stationary_distribution,
    subcritical_gw, transient_ou, Config, Error, Estimate, Interval, Motion, Offspring, ReplicaRun, State, StateKind, Trajectory,
};
use serde_json::{json, Map, Value};

use crate::config::{ConditioningSpec, Experiment, ExperimentConfig, ModelSpec, PoolingSpec};
use crate::error::CliError;
use crate::output::{estimate, num, quadrature, Cell};

/// Everything an experiment hands back for output.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub results: Map<String, Value>,
    /// Replicas that hit `max_population`, and how many replicas were run.
    pub overflowed: usize,
    pub replicas: usize,
}

impl Outcome {
    fn new(header: &[&'static str]) -> Self {
        Outcome { header: header.to_vec(), ..Default::default() }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.results.insert(key.into(), value);
    }

    pub fn overflow_fraction(&self) -> f64 {
        if self.replicas == 0 {
            0.0
        } else {
            self.overflowed as f64 / self.replicas as f64
        }
    }
}

/// The validated simulation setup.
pub struct Setup {
    pub exp: ExperimentConfig,
    pub config: Config,
    pub workers: usize,
}

pub fn build_motion(spec: &ModelSpec) -> Result<Motion, CliError> {
    Ok(match spec {
        ModelSpec::KilledDriftedBm { c } => killed_drifted_bm(*c)?,
        ModelSpec::KilledRecurrentOu { lambda } => killed_recurrent_ou(*lambda)?,
        ModelSpec::TransientOu { lambda, sigma2 } => transient_ou(*lambda, *sigma2)?,
        ModelSpec::SubcriticalGw { rho } => subcritical_gw(rho.iter().copied())?,
        ModelSpec::ErgodicCtmc { q, pi } => {
            let pi = match pi {
                Some(pi) => pi.clone(),
                None => stationary_distribution(q)?,
            };
            ergodic_ctmc(q.clone(), pi)?
        }
    })
}

fn state_at(motion: &Motion, key: &str, x: f64) -> Result<State, CliError> {
    match motion.state_kind {
        StateKind::Real if x.is_finite() => Ok(State::Real(x)),
        StateKind::Integer if x >= 0.0 && x.fract() == 0.0 && x.is_finite() => Ok(State::Count(x as u64)),
        StateKind::Integer => Err(CliError::Config(format!("{key} = {x} is not a state of {} (nonnegative integers)", motion.name))),
        StateKind::Real => Err(CliError::Config(format!("{key} = {x} is not a finite real number"))),
    }
}

fn interval(key: &str, spec: Option<(f64, f64)>, experiment: Experiment) -> Result<Interval<f64>, CliError> {
    let (lo, hi) = spec.ok_or_else(|| CliError::Config(format!("experiment {experiment} needs key '{key}'")))?;
    Ok(Interval::new(lo, hi)?)
}

fn require_positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key} must be a positive finite number, got {v}")))
    }
}

/// Checks every precondition the chosen experiment relies on, before any
/// simulation starts.
pub fn prepare(exp: ExperimentConfig, workers: usize) -> Result<Setup, CliError> {
    let motion = build_motion(&exp.model)?;
    let offspring: Offspring = make_offspring(exp.offspring.iter().copied())?;
    let x0 = state_at(&motion, "x0", exp.x0)?;
    if !(exp.t_end >= 0.0 && exp.t_end.is_finite()) {
        return Err(CliError::Config(format!("t_end must be a finite number >= 0, got {}", exp.t_end)));
    }
    if exp.max_population == 0 {
        return Err(CliError::Config("max_population must be at least 1".into()));
    }
    let config = Config::new(motion, offspring, exp.r, x0, exp.t_end)
        .with_snapshots(exp.snapshot_times.clone())
        .with_step_dt(exp.step_dt)
        .with_max_population(exp.max_population)
        .with_seed(exp.seed);
    config.validate()?;
    if exp.experiment.is_asymptotic() {
        config.check_supercritical()?;
    }

    let e = exp.experiment;
    let needs_d = matches!(e, Experiment::Simulate | Experiment::Phi | Experiment::Lln | Experiment::Sigma | Experiment::SbCurve);
    if needs_d && !(config.motion.h(&x0) > 0.0) {
        return Err(Error::ZeroEigenfunction.into());
    }
    match e {
        Experiment::Lln => {
            interval("b", exp.b, e)?;
            interval("b_prime", exp.b_prime, e)?;
        }
        Experiment::SpineCheck | Experiment::SbCurve => {
            interval("b", exp.b, e)?;
        }
        Experiment::LocalSurvival => {
            interval("k", exp.k, e)?;
        }
        Experiment::GIterate if exp.x_grid.as_ref().is_none_or(|g| g.is_empty()) => {
            return Err(CliError::Config("experiment g-iterate needs a nonempty 'x_grid'".into()));
        }
        Experiment::Qsd if exp.b.is_some() != exp.b_prime.is_some() => {
            return Err(CliError::Config("qsd ratio needs both 'b' and 'b_prime'".into()));
        }
        _ => {}
    }
    if e == Experiment::SbCurve {
        let b = interval("b", exp.b, e)?;
        if config.motion.eigen.nu_mass(&b).is_none() {
            return Err(Error::MissingNuMass(format!("{} has no explicit eigenmeasure", config.motion.name)).into());
        }
    }
    if matches!(e, Experiment::Sigma | Experiment::Qsd) && exp.conditioning == ConditioningSpec::DPositive || e == Experiment::Sigma {
        require_positive("eps", exp.eps)?;
    }
    if e == Experiment::Phi {
        require_positive("tol", exp.tol)?;
    }
    for key in ["x_grid", "t_grid"] {
        let grid = if key == "x_grid" { &exp.x_grid } else { &exp.t_grid };
        if let Some(g) = grid {
            for &v in g {
                if key == "x_grid" {
                    state_at(&config.motion, key, v)?;
                } else if !(v >= 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("t_grid entry {v} must be a finite time >= 0")));
                }
            }
        }
    }
    if let Some(t) = exp.eta_horizon {
        require_positive("eta_horizon", t)?;
    }
    if exp.survival_cap == Some(0) {
        return Err(CliError::Config("survival_cap must be at least 1".into()));
    }
    let needs_reps = !matches!(e, Experiment::Simulate | Experiment::Lln | Experiment::SbCurve | Experiment::Phi);
    if needs_reps && exp.n_rep == 0 && e != Experiment::GIterate {
        return Err(CliError::Config(format!("experiment {e} needs n_rep >= 1")));
    }
    if matches!(e, Experiment::SpineCheck | Experiment::GIterate | Experiment::SbCurve) && exp.n_mc == 0 {
        return Err(CliError::Config(format!("experiment {e} needs n_mc >= 1")));
    }
    Ok(Setup { exp, config, workers })
}

/// `run_replicas`, with an empty result for `n_rep = 0`.
fn replicas<T: Send>(
    config: &Config,
    n_rep: usize,
    workers: usize,
    reducer: impl Fn(usize, &Trajectory) -> T + Sync,
) -> Result<ReplicaRun<T>, CliError> {
    if n_rep == 0 {
        return Ok(ReplicaRun { outputs: Vec::new(), overflowed: 0, failures: 0 });
    }
    Ok(run_replicas(config, n_rep, workers, reducer)?)
}

fn grid_points(s: &Setup) -> Result<Vec<(f64, State, u64)>, CliError> {
    match &s.exp.x_grid {
        None => Ok(vec![(s.exp.x0, s.config.x0, s.exp.seed)]),
        Some(g) => g
            .iter()
            .enumerate()
            .map(|(i, &x)| Ok((x, state_at(&s.config.motion, "x_grid", x)?, replica_seed(s.exp.seed, i as u64))))
            .collect(),
    }
}

fn times(s: &Setup) -> Vec<f64> {
    s.exp.t_grid.clone().unwrap_or_else(|| vec![s.exp.t_end])
}

pub fn run(s: &Setup) -> Result<Outcome, CliError> {
    match s.exp.experiment {
        Experiment::Simulate => simulate(s),
        Experiment::Phi => phi(s),
        Experiment::Lln => lln(s),
        Experiment::Qsd => qsd(s),
        Experiment::Extinction => extinction(s),
        Experiment::Sigma => sigma(s),
        Experiment::SpineCheck => spine_check(s),
        Experiment::GIterate => g_iterate_experiment(s),
        Experiment::SbCurve => sb_curve(s),
        Experiment::LocalSurvival => local_survival(s),
    }
}

fn d2_analytic(s: &Setup, t: f64) -> Value {
    let off = &s.config.offspring;
    d_second_moment_analytic(&s.config.motion, s.config.x0, s.config.r, off.m1(), off.m2(), t).map_or(Value::Null, num)
}

fn simulate(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["replica_id", "t", "live", "absorbed", "dead", "births", "D_t", "overflowed"]);
    let cfg = &s.config;
    let run = replicas(cfg, s.exp.n_rep, s.workers, |_, traj| {
        let snaps: Vec<(f64, usize, usize, usize, usize, f64)> = traj
            .snapshots
            .iter()
            .map(|p| (p.time, p.len(), p.absorbed_count, p.dead_count, p.births, config_d(cfg, p).unwrap_or(0.0)))
            .collect();
        (snaps, traj.overflowed)
    })?;
    let times = &cfg.snapshot_times;
    let mut d = vec![Vec::new(); times.len()];
    let mut live = vec![Vec::new(); times.len()];
    for (i, (snaps, over)) in run.outputs.iter().enumerate() {
        for (j, &(t, n, a, dead, births, dt)) in snaps.iter().enumerate() {
            out.rows.push(vec![i.into(), t.into(), n.into(), a.into(), dead.into(), births.into(), dt.into(), (*over as usize).into()]);
            if !over {
                d[j].push(dt);
                live[j].push(n as f64);
            }
        }
    }
    let snapshots: Vec<Value> = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let squares: Vec<f64> = d[j].iter().map(|x| x * x).collect();
            json!({
                "t": num(t),
                "d": estimate(&Estimate::from_samples(&d[j])),
                "d_squared": estimate(&Estimate::from_samples(&squares)),
                "d_squared_analytic": d2_analytic(s, t),
                "live": estimate(&Estimate::from_samples(&live[j])),
            })
        })
        .collect();
    out.set("snapshots", Value::Array(snapshots));
    out.overflowed = run.overflowed;
    out.replicas = run.outputs.len();
    Ok(out)
}

fn phi(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["t", "d_squared_analytic", "d_mean", "d_stderr", "d_squared_mean", "d_squared_stderr", "n"]);
    let cfg = &s.config;
    let off = &cfg.offspring;
    let q = phi_quadrature(&cfg.motion, cfg.x0, cfg.r, off.m1(), off.m2(), s.exp.tol)?;
    out.set("phi", quadrature(&q));
    out.set("growth_rate", num(cfg.growth_rate()));
    out.set("lambda", num(cfg.motion.lambda()));
    let moments = if s.exp.n_rep > 0 {
        let (m, overflowed) = d_moments(cfg, s.exp.n_rep, s.workers)?;
        out.overflowed = overflowed;
        out.replicas = s.exp.n_rep;
        Some(m)
    } else {
        None
    };
    let mut snaps = Vec::new();
    for (j, &t) in cfg.snapshot_times.iter().enumerate() {
        let analytic = d2_analytic(s, t);
        let mut entry = json!({ "t": num(t), "d_squared_analytic": analytic.clone() });
        let mut row: Vec<Cell> = vec![t.into(), analytic.as_f64().into()];
        if let Some(m) = &moments {
            entry["d"] = estimate(&m[j].mean);
            entry["d_squared"] = estimate(&m[j].second);
            row.extend([m[j].mean.mean.into(), m[j].mean.stderr.into(), m[j].second.mean.into(), m[j].second.stderr.into(), m[j].second.n.into()]);
        } else {
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Int(0)]);
        }
        out.rows.push(row);
        snaps.push(entry);
    }
    out.set("snapshots", Value::Array(snaps));
    Ok(out)
}

fn nu_ratio(cfg: &Config, b: &Interval<f64>, bp: &Interval<f64>) -> Option<f64> {
    let (nb, nbp) = (cfg.motion.eigen.nu_mass(b)?, cfg.motion.eigen.nu_mass(bp)?);
    (nbp > 0.0).then(|| nb / nbp)
}

fn lln(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["replica_id", "t", "count_B", "count_Bprime", "D_t", "W_t"]);
    let cfg = &s.config;
    let b = interval("b", s.exp.b, Experiment::Lln)?;
    let bp = interval("b_prime", s.exp.b_prime, Experiment::Lln)?;
    let m1 = cfg.offspring.m1();
    let expected: Vec<Estimate> =
        cfg.snapshot_times.iter().map(|&t| many_to_one(&cfg.motion, cfg.x0, &bp, t, cfg.r, m1, s.exp.n_mc, s.exp.seed)).collect();
    let run = replicas(cfg, s.exp.n_rep, s.workers, |_, traj| {
        let snaps: Vec<(usize, usize, f64)> =
            traj.snapshots.iter().map(|p| (p.count_in(&b), p.count_in(&bp), config_d(cfg, p).unwrap_or(0.0))).collect();
        (snaps, traj.overflowed)
    })?;
    let n_t = cfg.snapshot_times.len();
    let mut w = vec![Vec::new(); n_t];
    let mut d = vec![Vec::new(); n_t];
    let mut pooled = vec![(0usize, 0usize); n_t];
    for (i, (snaps, over)) in run.outputs.iter().enumerate() {
        for (j, &(cb, cbp, dt)) in snaps.iter().enumerate() {
            let wt = cb as f64 / expected[j].mean;
            out.rows.push(vec![i.into(), cfg.snapshot_times[j].into(), cb.into(), cbp.into(), dt.into(), wt.into()]);
            if !over {
                w[j].push(wt);
                d[j].push(dt);
                pooled[j].0 += cb;
                pooled[j].1 += cbp;
            }
        }
    }
    let ratio = nu_ratio(cfg, &b, &bp);
    let phi = if cfg.check_supercritical().is_ok() {
        Some(phi_quadrature(&cfg.motion, cfg.x0, cfg.r, m1, cfg.offspring.m2(), s.exp.tol)?)
    } else {
        None
    };
    let target = match (ratio, phi.as_ref().and_then(|q| q.value)) {
        (Some(r), Some(p)) => num(r * r * p),
        _ => Value::Null,
    };
    let snaps: Vec<Value> = (0..n_t)
        .map(|j| {
            let squares: Vec<f64> = w[j].iter().map(|x| x * x).collect();
            let ratio_hat = if pooled[j].1 > 0 { num(pooled[j].0 as f64 / pooled[j].1 as f64) } else { Value::Null };
            json!({
                "t": num(cfg.snapshot_times[j]),
                "expected_count_Bprime": estimate(&expected[j]),
                "w": estimate(&Estimate::from_samples(&w[j])),
                "w_squared": estimate(&Estimate::from_samples(&squares)),
                "d": estimate(&Estimate::from_samples(&d[j])),
                "pooled_ratio": ratio_hat,
            })
        })
        .collect();
    out.set("snapshots", Value::Array(snaps));
    out.set("nu_ratio", ratio.map_or(Value::Null, num));
    out.set("phi", phi.as_ref().map_or(Value::Null, quadrature));
    out.set("w_squared_target", target);
    out.overflowed = run.overflowed;
    out.replicas = run.outputs.len();
    Ok(out)
}

fn qsd(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["replica_id", "particle_index", "position", "weight"]);
    let cfg = &s.config;
    let condition = match s.exp.conditioning {
        ConditioningSpec::Survival => Conditioning::Survival,
        ConditioningSpec::DPositive => Conditioning::DPositive(s.exp.eps),
    };
    let pooling = match s.exp.pooling {
        PoolingSpec::Pooled => Pooling::Pooled,
        PoolingSpec::PerReplica => Pooling::PerReplica,
    };
    let rep = qsd_sample(cfg, s.exp.t_end, s.exp.n_rep, condition, pooling, s.workers)?;
    for q in &rep.samples {
        out.rows.push(vec![q.replica.into(), q.index.into(), q.position.into(), q.weight.into()]);
    }
    out.set("pooled_samples", json!(rep.pooled_samples));
    out.set("survivors", json!(rep.survivors));
    out.set("n_rep", json!(rep.n_rep));
    out.set("ks_distance", rep.ks_distance.map_or(Value::Null, num));
    out.set("conditioning", json!(rep.conditioning));
    out.set("pooling", json!(if pooling == Pooling::Pooled { "pooled" } else { "per_replica" }));
    out.set("histogram", Value::Array(rep.histogram.iter().map(|&(lo, hi, m)| json!([num(lo), num(hi), num(m)])).collect()));
    if let (Some(b), Some(bp)) = (s.exp.b, s.exp.b_prime) {
        let (b, bp) = (Interval::new(b.0, b.1)?, Interval::new(bp.0, bp.1)?);
        let mass = |iv: &Interval<f64>| rep.samples.iter().filter(|q| iv.contains_value(q.position)).map(|q| q.weight).sum::<f64>();
        let (num_b, den_b) = (mass(&b), mass(&bp));
        out.set("pooled_ratio", if den_b > 0.0 { num(num_b / den_b) } else { Value::Null });
        out.set("nu_ratio", nu_ratio(cfg, &b, &bp).map_or(Value::Null, num));
    }
    out.overflowed = rep.overflowed;
    out.replicas = rep.n_rep;
    Ok(out)
}

/// Config for the extinction estimators: a survival cap replaces
/// `max_population` and capped replicas are not overflow.
fn capped(s: &Setup, x: State, seed: u64) -> Config {
    let mut cfg = s.config.clone();
    cfg.x0 = x;
    cfg.seed = seed;
    if let Some(cap) = s.exp.survival_cap {
        cfg.max_population = cap;
    }
    cfg
}

fn extinction(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["x", "eta", "eta_stderr", "late_extinction", "late_stderr", "capped", "n"]);
    let mut points = Vec::new();
    for (x, state, seed) in grid_points(s)? {
        let rep = eta_mc(&capped(s, state, seed), s.exp.t_end, s.exp.n_rep, s.workers)?;
        out.rows.push(vec![
            x.into(),
            rep.eta.mean.into(),
            rep.eta.stderr.into(),
            rep.late_extinction.mean.into(),
            rep.late_extinction.stderr.into(),
            rep.overflowed.into(),
            rep.eta.n.into(),
        ]);
        points.push(json!({ "x": num(x), "eta": estimate(&rep.eta), "late_extinction": estimate(&rep.late_extinction), "capped": rep.overflowed }));
        if s.exp.survival_cap.is_none() {
            out.overflowed += rep.overflowed;
        }
        out.replicas += s.exp.n_rep;
    }
    out.set("points", Value::Array(points));
    out.set("horizon", num(s.exp.t_end));
    Ok(out)
}

fn sigma(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&[
        "x",
        "sigma",
        "sigma_stderr",
        "eta",
        "eta_stderr",
        "difference",
        "difference_stderr",
        "overflowed",
        "n",
    ]);
    let mut points = Vec::new();
    for (x, state, seed) in grid_points(s)? {
        let mut cfg = s.config.clone();
        cfg.x0 = state;
        cfg.seed = seed;
        let rep = sigma_mc(&cfg, s.exp.t_end, s.exp.eps, s.exp.n_rep, s.workers)?;
        out.rows.push(vec![
            x.into(),
            rep.sigma.mean.into(),
            rep.sigma.stderr.into(),
            rep.eta.mean.into(),
            rep.eta.stderr.into(),
            rep.difference.mean.into(),
            rep.difference.stderr.into(),
            rep.overflowed.into(),
            rep.sigma.n.into(),
        ]);
        let z = if rep.difference.stderr > 0.0 { num(rep.difference.mean / rep.difference.stderr) } else { Value::Null };
        points.push(json!({
            "x": num(x),
            "sigma": estimate(&rep.sigma),
            "eta": estimate(&rep.eta),
            "difference": estimate(&rep.difference),
            "difference_z": z,
        }));
        out.overflowed += rep.overflowed;
        out.replicas += s.exp.n_rep;
    }
    out.set("points", Value::Array(points));
    out.set("horizon", num(s.exp.t_end));
    out.set("eps", num(s.exp.eps));
    Ok(out)
}

fn spine_check(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["quantity", "estimator", "mean", "stderr", "n"]);
    let cfg = &s.config;
    let b = interval("b", s.exp.b, Experiment::SpineCheck)?;
    let t = s.exp.t_end;
    let run = replicas(cfg, s.exp.n_rep, s.workers, |_, traj| {
        traj.snapshot_at(t).filter(|_| !traj.overflowed).map(|p| p.count_in(&b) as f64)
    })?;
    let counts: Vec<f64> = run.outputs.iter().flatten().copied().collect();
    let squares: Vec<f64> = counts.iter().map(|c| c * c).collect();
    let direct_first = Estimate::from_samples(&counts);
    let direct_second = Estimate::from_samples(&squares);
    let m2o = many_to_one(&cfg.motion, cfg.x0, &b, t, cfg.r, cfg.offspring.m1(), s.exp.n_mc, s.exp.seed);
    let two = two_spine_second_moment(&cfg.motion, cfg.x0, &b, t, cfg.r, &cfg.offspring, s.exp.n_mc, s.exp.seed);
    for (quantity, name, e) in [
        ("first", "engine", &direct_first),
        ("first", "many_to_one", &m2o),
        ("second", "engine", &direct_second),
        ("second", "two_spine", &two),
    ] {
        out.rows.push(vec![quantity.into(), name.into(), e.mean.into(), e.stderr.into(), e.n.into()]);
    }
    out.set("t", num(t));
    out.set("engine_first", estimate(&direct_first));
    out.set("many_to_one", estimate(&m2o));
    out.set("engine_second", estimate(&direct_second));
    out.set("two_spine", estimate(&two));
    out.set("z_first", num(direct_first.z_distance(&m2o)));
    out.set("z_second", num(direct_second.z_distance(&two)));
    out.overflowed = run.overflowed;
    out.replicas = run.outputs.len();
    Ok(out)
}

fn g_iterate_experiment(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["iteration", "x", "g"]);
    let points = grid_points(s)?;
    let states: Vec<State> = points.iter().map(|p| p.1).collect();
    let mut unit = s.config.clone();
    unit.t_end = 1.0;
    unit.snapshot_times = vec![1.0];
    let iterates = g_iterate(&states, &unit, s.exp.n_iter, s.exp.n_mc, s.workers)?;
    for (k, g) in iterates.iter().enumerate() {
        for (p, v) in points.iter().zip(g) {
            out.rows.push(vec![k.into(), p.0.into(), (*v).into()]);
        }
    }
    let last = iterates.last().cloned().unwrap_or_default();
    let sup_change = match iterates.len() {
        n if n >= 2 => iterates[n - 1].iter().zip(&iterates[n - 2]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        _ => 0.0,
    };
    out.set("x", Value::Array(points.iter().map(|p| num(p.0)).collect()));
    out.set("g", Value::Array(last.iter().map(|&v| num(v)).collect()));
    out.set("iterations", json!(s.exp.n_iter));
    out.set("sup_change", num(sup_change));
    if let Some(horizon) = s.exp.eta_horizon {
        let mut etas = Vec::new();
        let mut worst: f64 = 0.0;
        for (i, (_, state, seed)) in points.iter().enumerate() {
            let rep = eta_mc(&capped(s, *state, *seed), horizon, s.exp.n_rep, s.workers)?;
            worst = worst.max((rep.eta.mean - last[i]).abs());
            etas.push(estimate(&rep.eta));
            out.replicas += s.exp.n_rep;
        }
        out.set("eta_horizon", num(horizon));
        out.set("eta", Value::Array(etas));
        out.set("max_abs_difference", num(worst));
    }
    Ok(out)
}

fn sb_curve(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["t", "estimate", "stderr", "reference"]);
    let cfg = &s.config;
    let b = interval("b", s.exp.b, Experiment::SbCurve)?;
    let grid = times(s);
    let curve = s_b_curve(&cfg.motion, cfg.x0, &b, &grid, s.exp.n_mc, s.exp.seed)?;
    let mut points = Vec::new();
    for d in &curve {
        let reference = match cfg.x0 {
            State::Real(x) => s_b_reference(&cfg.motion, x, &b, d.t)?,
            _ => None,
        };
        out.rows.push(vec![d.t.into(), d.estimate.into(), d.stderr.into(), reference.into()]);
        points.push(json!({
            "t": num(d.t),
            "estimate": num(d.estimate),
            "stderr": num(d.stderr),
            "reference": reference.map_or(Value::Null, num),
        }));
    }
    out.set("points", Value::Array(points));
    Ok(out)
}

fn local_survival(s: &Setup) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["t", "estimate", "stderr", "n"]);
    let k = interval("k", s.exp.k, Experiment::LocalSurvival)?;
    let mut points = Vec::new();
    for t in times(s) {
        let mut cfg = s.config.clone();
        cfg.t_end = cfg.t_end.max(t);
        let est = local_survival_mc(&cfg, &k, t, s.exp.n_rep, s.workers)?;
        out.rows.push(vec![t.into(), est.mean.into(), est.stderr.into(), est.n.into()]);
        points.push(json!({ "t": num(t), "local_survival": estimate(&est) }));
        out.overflowed += s.exp.n_rep - est.n;
        out.replicas += s.exp.n_rep;
    }
    out.set("points", Value::Array(points));
    Ok(out)
}
