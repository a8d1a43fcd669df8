//! Simulation of the branching dynamics.
//!
//! Each particle owns a random stream keyed by its label. Its first draw is
//! its Exp(r) lifetime; later draws drive its motion and offspring count.
//! Between observation times every live particle's subtree is expanded
//! depth-first, so the output is in label order and does not depend on how
//! work is scheduled.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::config::BranchConfig;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{replica_seed, StreamKey};
use crate::state::{ParticleId, ParticleState};

/// Stream context reserved for the branching engine.
pub const ENGINE_CONTEXT: u64 = 0;

/// Live front `ξ_t` with cumulative tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<R> {
    /// Live particles in label order.
    pub particles: Vec<(ParticleId, ParticleState<R>)>,
    /// Particles absorbed at the boundary so far.
    pub absorbed_count: usize,
    /// Particles that branched into zero children so far.
    pub dead_count: usize,
    /// `1 + Σ (k − 1)` over branching events with `k ≥ 1` children, which
    /// always equals live + absorbed + dead.
    pub births: usize,
    pub time: R,
}

impl<R: Real> Population<R> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &ParticleState<R>> {
        self.particles.iter().map(|p| &p.1)
    }

    /// Number of live particles whose state lies in `b`.
    pub fn count_in(&self, b: &crate::state::Interval<R>) -> usize {
        self.states().filter(|s| b.contains(s)).count()
    }
}

/// Snapshots of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R> {
    /// One population per configured snapshot time, in order. Truncated
    /// after an overflow.
    pub snapshots: Vec<Population<R>>,
    /// Time at which the last particle died or was absorbed, if that happened
    /// by `t_end`. Absorption times are resolved to the end of the motion
    /// segment in which they occurred.
    pub extinct_time: Option<R>,
    pub overflowed: bool,
}

impl<R: Real> Trajectory<R> {
    pub fn snapshot_at(&self, t: R) -> Option<&Population<R>> {
        self.snapshots.iter().find(|p| p.time == t)
    }

    pub fn is_extinct(&self) -> bool {
        self.extinct_time.is_some()
    }
}

#[derive(Debug, Clone)]
struct Live<R> {
    id: ParticleId,
    key: StreamKey,
    word_pos: u128,
    state: ParticleState<R>,
    /// Time of the particle's next branching event.
    ring: R,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    absorbed: usize,
    dead: usize,
    births: usize,
}

fn spawn<R: Real>(id: ParticleId, key: StreamKey, state: ParticleState<R>, time: R, r: R) -> Live<R> {
    let mut rng = key.stream();
    let lifetime: R = rng.exponential(r);
    Live { id, key, word_pos: rng.word_pos(), state, ring: time + lifetime }
}

/// Runs one realization from `config.x0` with the configured seed.
pub fn simulate<R: Real>(config: &BranchConfig<R>) -> Result<Trajectory<R>> {
    config.validate()?;
    Ok(run(config, config.seed))
}

/// Runs one realization with an explicit seed, skipping validation.
fn run<R: Real>(config: &BranchConfig<R>, seed: u64) -> Trajectory<R> {
    let r = config.r;
    let root_key = StreamKey::new(seed, ENGINE_CONTEXT);
    let mut front = vec![spawn(ParticleId::root(), root_key, config.x0, R::zero(), r)];
    let mut tally = Tally { births: 1, ..Tally::default() };
    let mut last_loss = R::zero();
    let mut now = R::zero();
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut overflowed = false;

    let mut stops: Vec<R> = config.snapshot_times.clone();
    if stops.last().is_none_or(|&t| t < config.t_end) {
        stops.push(config.t_end);
    }

    for &stop in &stops {
        if stop > now && !front.is_empty() {
            match advance_front(config, front, now, stop, &mut tally, &mut last_loss) {
                Some(next) => front = next,
                None => {
                    overflowed = true;
                    front = Vec::new();
                    break;
                }
            }
            now = stop;
        } else {
            now = now.max(stop);
        }
        if config.snapshot_times.contains(&stop) {
            snapshots.push(Population {
                particles: front.iter().map(|p| (p.id.clone(), p.state)).collect(),
                absorbed_count: tally.absorbed,
                dead_count: tally.dead,
                births: tally.births,
                time: stop,
            });
        }
    }

    let extinct_time = if !overflowed && front.is_empty() { Some(last_loss) } else { None };
    Trajectory { snapshots, extinct_time, overflowed }
}

/// Expands every subtree from `from` to `to`. Returns `None` on overflow.
fn advance_front<R: Real>(
    config: &BranchConfig<R>,
    front: Vec<Live<R>>,
    from: R,
    to: R,
    tally: &mut Tally,
    last_loss: &mut R,
) -> Option<Vec<Live<R>>> {
    let motion = &config.motion;
    let mut out = Vec::with_capacity(front.len());
    let mut stack: Vec<(Live<R>, R)> = Vec::new();
    for root in front.into_iter() {
        stack.push((root, from));
        while let Some((mut p, time)) = stack.pop() {
            if out.len() + stack.len() + 1 > config.max_population {
                return None;
            }
            let mut rng = p.key.stream_at(p.word_pos);
            let target = if p.ring < to { p.ring } else { to };
            p.state = motion.advance(p.state, target - time, config.step_dt, &mut rng);
            if p.state.is_terminal() {
                tally.absorbed += 1;
                *last_loss = last_loss.max(target);
                continue;
            }
            if p.ring >= to {
                p.word_pos = rng.word_pos();
                out.push(p);
                continue;
            }
            let k = config.offspring.sample(&mut rng);
            if k == 0 {
                tally.dead += 1;
                *last_loss = last_loss.max(p.ring);
                continue;
            }
            tally.births += k as usize - 1;
            for i in (0..k).rev() {
                let child = spawn(p.id.child(i), p.key.child(i), p.state, p.ring, config.r);
                stack.push((child, p.ring));
            }
        }
    }
    Some(out)
}

/// Per-replica results of [`run_replicas`].
#[derive(Debug, Clone)]
pub struct ReplicaRun<T> {
    /// Reduced value per replica, in replica order.
    pub outputs: Vec<T>,
    /// Replicas whose population exceeded `max_population`.
    pub overflowed: usize,
    /// Replicas that failed (always zero for a validated config).
    pub failures: usize,
}

impl<T> ReplicaRun<T> {
    pub fn overflow_fraction(&self) -> f64 {
        if self.outputs.is_empty() {
            0.0
        } else {
            self.overflowed as f64 / self.outputs.len() as f64
        }
    }
}

/// Runs `n_rep` independent replicas (replica `i` uses
/// `replica_seed(config.seed, i)`) on up to `workers` threads and applies
/// `reducer` to each trajectory. Output order is the replica order whatever
/// the worker count.
pub fn run_replicas<R, T, F>(config: &BranchConfig<R>, n_rep: usize, workers: usize, reducer: F) -> Result<ReplicaRun<T>>
where
    R: Real,
    T: Send,
    F: Fn(usize, &Trajectory<R>) -> T + Sync,
{
    config.validate()?;
    if n_rep == 0 {
        return Err(Error::InvalidConfig("n_rep must be at least 1".into()));
    }
    let done = AtomicUsize::new(0);
    let tenth = n_rep.div_ceil(10).max(1);
    let job = |i: usize| {
        let traj = run(config, replica_seed(config.seed, i as u64));
        let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
        if finished.is_multiple_of(tenth) || finished == n_rep {
            log::info!("{}: {finished}/{n_rep} replicas", config.motion.name);
        }
        let over = traj.overflowed;
        (reducer(i, &traj), over)
    };
    let results: Vec<(T, bool)> = if workers <= 1 {
        (0..n_rep).map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| (0..n_rep).into_par_iter().map(job).collect())
    };
    let overflowed = results.iter().filter(|r| r.1).count();
    if overflowed > 0 {
        log::warn!("{overflowed} of {n_rep} replicas overflowed max_population = {}", config.max_population);
    }
    Ok(ReplicaRun { outputs: results.into_iter().map(|r| r.0).collect(), overflowed, failures: 0 })
}

/// Trajectory of replica `index` exactly as [`run_replicas`] produces it.
pub fn simulate_replica<R: Real>(config: &BranchConfig<R>, index: usize) -> Result<Trajectory<R>> {
    config.validate()?;
    Ok(run(config, replica_seed(config.seed, index as u64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motions::{ergodic_ctmc, killed_drifted_bm};
    use crate::offspring::{make_offspring, OffspringLaw};

    fn yule(t_end: f64) -> BranchConfig<f64> {
        let motion = ergodic_ctmc(vec![vec![0.0]], vec![1.0]).unwrap();
        BranchConfig::new(motion, make_offspring([(2, 1.0)]).unwrap(), 1.0, ParticleState::Count(0), t_end)
    }

    #[test]
    fn zero_horizon_is_single_particle() {
        let traj = simulate(&yule(0.0).with_snapshots(vec![0.0])).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        let pop = &traj.snapshots[0];
        assert_eq!(pop.particles, vec![(ParticleId::root(), ParticleState::Count(0))]);
        assert_eq!(pop.births, 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = yule(3.0).with_snapshots(vec![1.0, 2.0, 3.0]).with_seed(42);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn snapshot_schedule_does_not_change_the_realization() {
        let a = simulate(&yule(3.0).with_seed(9)).unwrap();
        let b = simulate(&yule(3.0).with_snapshots(vec![0.5, 1.7, 3.0]).with_seed(9)).unwrap();
        assert_eq!(a.snapshots[0].particles, b.snapshots[2].particles);
    }

    #[test]
    fn labels_sorted_and_accounting_balances() {
        let motion = killed_drifted_bm(1.0).unwrap();
        let off = OffspringLaw::from_pmf([(0, 0.2), (1, 0.1), (3, 0.7)]).unwrap();
        let cfg = BranchConfig::new(motion, off, 2.0, ParticleState::Real(1.0), 3.0)
            .with_snapshots(vec![1.0, 2.0, 3.0])
            .with_seed(5);
        for i in 0..20 {
            let traj = simulate_replica(&cfg, i).unwrap();
            for pop in &traj.snapshots {
                assert!(pop.particles.windows(2).all(|w| w[0].0 < w[1].0));
                assert!(pop.particles.iter().all(|p| p.1.is_live()));
                assert_eq!(pop.births, pop.len() + pop.absorbed_count + pop.dead_count);
            }
        }
    }

    #[test]
    fn sure_death_goes_extinct_at_first_ring() {
        let motion = ergodic_ctmc(vec![vec![0.0]], vec![1.0]).unwrap();
        let cfg = BranchConfig::new(motion, OffspringLaw::deterministic(0), 1.0, ParticleState::Count(0), 50.0);
        let traj = simulate(&cfg).unwrap();
        let t = traj.extinct_time.unwrap();
        assert!(t > 0.0 && t < 50.0);
        assert!(traj.snapshots[0].is_empty());
        assert_eq!(traj.snapshots[0].dead_count, 1);
    }

    #[test]
    fn overflow_is_flagged_not_subsampled() {
        let cfg = yule(10.0).with_snapshots(vec![1.0, 10.0]).with_max_population(50).with_seed(3);
        let traj = simulate(&cfg).unwrap();
        assert!(traj.overflowed);
        assert!(traj.snapshots.len() < 2);
    }

    #[test]
    fn replicas_do_not_depend_on_worker_count() {
        let cfg = yule(2.0).with_seed(11);
        let one = run_replicas(&cfg, 64, 1, |_, t| t.snapshots[0].particles.clone()).unwrap();
        let four = run_replicas(&cfg, 64, 4, |_, t| t.snapshots[0].particles.clone()).unwrap();
        assert_eq!(one.outputs, four.outputs);
        let single = simulate_replica(&cfg, 17).unwrap();
        assert_eq!(single.snapshots[0].particles, one.outputs[17]);
    }
}
