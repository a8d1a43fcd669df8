use crate::eigen::EigenData;
use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};
use crate::rng::RandomStream;
use crate::state::{Interval, ParticleState, StateKind};

use super::{Kernel, MotionModel};

struct SubcriticalGw<R> {
    jumps: Vec<(i64, R)>,
    cdf: Vec<R>,
    total: R,
    lambda: R,
    v2: R,
}

impl<R: Real> Kernel<R> for SubcriticalGw<R> {
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        let mut n = match state {
            ParticleState::Count(0) => return ParticleState::Absorbed,
            ParticleState::Count(n) => n,
            other => return other,
        };
        let mut remaining = dt;
        loop {
            let rate = self.total * lit(n as f64);
            let wait: R = rng.exponential(rate);
            if wait >= remaining {
                return ParticleState::Count(n);
            }
            remaining = remaining - wait;
            let u: R = rng.uniform();
            let idx = self.cdf.partition_point(|&c| c < u).min(self.jumps.len() - 1);
            n = n.saturating_add_signed(self.jumps[idx].0);
            if n == 0 {
                return ParticleState::Absorbed;
            }
        }
    }

    fn h_second_moment(&self, x: &ParticleState<R>, t: R) -> Option<R> {
        // d/dt E(X²) = −2λ E(X²) + v₂ E(X), E(X_t) = x e^{−λt}.
        let x = x.coordinate()?;
        let l = self.lambda;
        let growth = (l * t).exp_m1() / l;
        Some((-(l + l) * t).exp() * (x * x + self.v2 * x * growth))
    }
}

/// Subcritical continuous-time Galton–Watson chain on `{0, 1, 2, …}` with
/// jump rates `q(x, x + y) = x ρ(y)`, absorbed at 0.
///
/// Eigen-data: `λ = −Σ y ρ(y)`, `h(x) = x`, `p ≡ 1`; `ν` is not explicit.
pub fn subcritical_gw<R, I>(rho: I) -> Result<MotionModel<R>>
where
    R: Real,
    I: IntoIterator<Item = (i64, R)>,
{
    let mut jumps: Vec<(i64, R)> = Vec::new();
    for (y, w) in rho {
        if y < -1 {
            return Err(Error::InvalidParameter(format!("jump size {y} below -1")));
        }
        if !(w >= R::zero()) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("jump rate {} for y = {y} is not a finite nonnegative number", to_f64(w))));
        }
        if w > R::zero() {
            jumps.push((y, w));
        }
    }
    jumps.sort_by_key(|j| j.0);
    let total: R = jumps.iter().map(|j| j.1).sum();
    if total <= R::zero() {
        return Err(Error::InvalidParameter("jump measure rho has no mass".into()));
    }
    let drift: R = jumps.iter().map(|&(y, w)| lit::<R>(y as f64) * w).sum();
    if drift >= R::zero() {
        return Err(Error::InvalidParameter(format!(
            "rho must be subcritical (sum y rho(y) < 0), got {}",
            to_f64(drift)
        )));
    }
    let v2: R = jumps.iter().map(|&(y, w)| lit::<R>((y * y) as f64) * w).sum();
    let mut acc = R::zero();
    let cdf: Vec<R> = jumps
        .iter()
        .map(|j| {
            acc = acc + j.1 / total;
            acc
        })
        .collect();
    let lambda = -drift;
    let eigen = EigenData::new(
        lambda,
        |s: &ParticleState<R>| s.coordinate().unwrap_or(R::zero()),
        |_| R::one(),
        "h(x) = x; nu not explicit; p = 1",
    );
    let kernel = SubcriticalGw { jumps, cdf, total, lambda, v2 };
    Ok(MotionModel::new("subcritical_gw", kernel, true, false, eigen, StateKind::Integer))
}

struct ErgodicCtmc<R> {
    exit: Vec<R>,
    /// Per-state cumulative jump distribution over target states.
    targets: Vec<Vec<(usize, R)>>,
}

impl<R: Real> Kernel<R> for ErgodicCtmc<R> {
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        let mut k = match state {
            ParticleState::Count(k) => k as usize,
            other => return other,
        };
        let mut remaining = dt;
        loop {
            let rate = self.exit[k];
            if rate <= R::zero() {
                return ParticleState::Count(k as u64);
            }
            let wait: R = rng.exponential(rate);
            if wait >= remaining {
                return ParticleState::Count(k as u64);
            }
            remaining = remaining - wait;
            let u: R = rng.uniform();
            let row = &self.targets[k];
            let idx = row.partition_point(|&(_, c)| c < u).min(row.len() - 1);
            k = row[idx].0;
        }
    }

    fn h_second_moment(&self, _x: &ParticleState<R>, _t: R) -> Option<R> {
        Some(R::one())
    }
}

fn validate_generator<R: Real>(q: &[Vec<R>]) -> Result<usize> {
    let k = q.len();
    if k == 0 {
        return Err(Error::InvalidGenerator("rate matrix is empty".into()));
    }
    for (i, row) in q.iter().enumerate() {
        if row.len() != k {
            return Err(Error::InvalidGenerator(format!("row {i} has {} entries, expected {k}", row.len())));
        }
        let mut sum = R::zero();
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidGenerator(format!("entry ({i},{j}) is not finite")));
            }
            if i != j && v < R::zero() {
                return Err(Error::InvalidGenerator(format!("off-diagonal rate ({i},{j}) is negative")));
            }
            sum = sum + v;
        }
        let scale = row.iter().fold(R::one(), |m, v| m.max(v.abs()));
        if sum.abs() > lit::<R>(1e-10).max(R::epsilon() * lit(64.0)) * scale {
            return Err(Error::InvalidGenerator(format!("row {i} sums to {}, expected 0", to_f64(sum))));
        }
    }
    // Irreducibility: every state reaches every other.
    for start in 0..k {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if !seen[j] && q[i][j] > R::zero() {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(miss) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGenerator(format!("chain is not irreducible: {start} cannot reach {miss}")));
        }
    }
    Ok(k)
}

/// Solves `πQ = 0`, `Σπ = 1` by Gaussian elimination with partial pivoting.
pub fn stationary_distribution<R: Real>(q: &[Vec<R>]) -> Result<Vec<R>> {
    let k = validate_generator(q)?;
    // Rows of the system are the columns of Q, with the last replaced by Σπ = 1.
    let mut a: Vec<Vec<R>> = (0..k)
        .map(|j| {
            let mut row: Vec<R> = (0..k).map(|i| q[i][j]).collect();
            row.push(R::zero());
            row
        })
        .collect();
    a[k - 1] = vec![R::one(); k + 1];
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(col);
        if a[pivot][col].abs() <= R::epsilon() {
            return Err(Error::InvalidGenerator("singular system for the stationary distribution".into()));
        }
        a.swap(col, pivot);
        for row in 0..k {
            if row != col {
                let factor = a[row][col] / a[col][col];
                if factor != R::zero() {
                    for c in col..=k {
                        let delta = factor * a[col][c];
                        a[row][c] = a[row][c] - delta;
                    }
                }
            }
        }
    }
    Ok((0..k).map(|i| (a[i][k] / a[i][i]).max(R::zero())).collect())
}

/// Irreducible continuous-time Markov chain on `{0, …, K−1}` simulated jump
/// by jump.
///
/// Eigen-data: `λ = 0`, `h ≡ 1`, `p ≡ 1`, `ν = π`.
pub fn ergodic_ctmc<R: Real>(q: Vec<Vec<R>>, pi: Vec<R>) -> Result<MotionModel<R>> {
    let k = validate_generator(&q)?;
    if pi.len() != k {
        return Err(Error::InvalidGenerator(format!("pi has {} entries for {k} states", pi.len())));
    }
    if pi.iter().any(|&p| !(p >= R::zero())) {
        return Err(Error::InvalidGenerator("pi has a negative entry".into()));
    }
    let total: R = pi.iter().copied().sum();
    if (total - R::one()).abs() > R::probability_tolerance() {
        return Err(Error::InvalidGenerator(format!("pi sums to {}, expected 1", to_f64(total))));
    }
    let tol = lit::<R>(1e-10).max(R::epsilon() * lit(64.0));
    for j in 0..k {
        let flux: R = (0..k).map(|i| pi[i] * q[i][j]).sum();
        if flux.abs() > tol {
            return Err(Error::InvalidGenerator(format!("pi Q has entry {} at state {j}, expected 0", to_f64(flux))));
        }
    }

    let exit: Vec<R> = (0..k).map(|i| -q[i][i]).collect();
    let targets = (0..k)
        .map(|i| {
            let mut acc = R::zero();
            (0..k)
                .filter(|&j| j != i && q[i][j] > R::zero())
                .map(|j| {
                    acc = acc + q[i][j] / exit[i];
                    (j, acc)
                })
                .collect()
        })
        .collect();

    let mass = pi.clone();
    let atoms = pi.clone();
    let eigen = EigenData::new(
        R::zero(),
        |s: &ParticleState<R>| if s.is_live() { R::one() } else { R::zero() },
        |_| R::one(),
        "h = 1; nu = pi (stationary probability); p = 1",
    )
    .with_nu_cdf(move |x: R| {
        let mut acc = R::zero();
        for (i, &p) in mass.iter().enumerate() {
            if lit::<R>(i as f64) <= x {
                acc = acc + p;
            }
        }
        acc.min(R::one())
    })
    // Atoms need the half-open convention, which a cdf difference gets wrong at the left end.
    .with_nu_mass(move |b: &Interval<R>| {
        atoms.iter().enumerate().filter(|(i, _)| b.contains_value(lit(*i as f64))).map(|(_, &p)| p).sum()
    });
    Ok(MotionModel::new("ergodic_ctmc", ErgodicCtmc { exit, targets }, true, false, eigen, StateKind::Integer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::state::Interval;

    #[test]
    fn two_state_stationary() {
        let pi = stationary_distribution(&[vec![-1.0f64, 1.0], vec![2.0, -2.0]]).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn generator_validation() {
        assert!(matches!(stationary_distribution(&[vec![-1.0, 0.5], vec![2.0, -2.0]]), Err(Error::InvalidGenerator(_))));
        assert!(matches!(
            stationary_distribution(&[vec![0.0, 0.0], vec![1.0, -1.0]]),
            Err(Error::InvalidGenerator(_))
        ));
        let q = vec![vec![-1.0, 1.0], vec![2.0, -2.0]];
        assert!(matches!(ergodic_ctmc(q, vec![0.5, 0.5]), Err(Error::InvalidGenerator(_))));
    }

    #[test]
    fn single_state_never_moves() {
        let m = ergodic_ctmc(vec![vec![0.0f64]], vec![1.0]).unwrap();
        let mut rng = StreamKey::new(1, 1).stream();
        assert_eq!(m.step(ParticleState::Count(0), 100.0, &mut rng), ParticleState::Count(0));
        assert_eq!(m.eigen.nu_mass(&Interval::whole()), Some(1.0));
    }

    #[test]
    fn gw_lambda_and_absorption() {
        let m = subcritical_gw([(-1, 0.75f64), (1, 0.25)]).unwrap();
        assert!((m.lambda() - 0.5).abs() < 1e-15);
        let mut rng = StreamKey::new(2, 0).stream();
        assert_eq!(m.step(ParticleState::Count(0), 1.0, &mut rng), ParticleState::Absorbed);
        assert_eq!(m.h(&ParticleState::Count(7)), 7.0);
    }

    #[test]
    fn gw_rejects_supercritical_and_bad_jumps() {
        assert!(subcritical_gw([(-1, 0.25f64), (1, 0.75)]).is_err());
        assert!(subcritical_gw([(-2, 0.5f64)]).is_err());
        assert!(subcritical_gw::<f64, _>([]).is_err());
    }

    #[test]
    fn ctmc_nu_cdf_steps() {
        let m = ergodic_ctmc(vec![vec![-1.0f64, 1.0], vec![2.0, -2.0]], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((m.eigen.nu_cdf(0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.eigen.nu_cdf(-0.5).unwrap()).abs() < 1e-15);
        let b = Interval::new(0.5, 1.5).unwrap();
        assert!((m.eigen.nu_mass(&b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let first = Interval::new(0.0, 1.0).unwrap();
        assert!((m.eigen.nu_mass(&first).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
