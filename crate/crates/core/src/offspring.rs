//! Offspring laws on the nonnegative integers.

use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};
use crate::rng::RandomStream;

/// Probability mass function of the number of children produced at a
/// branching event, with cached first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw<R> {
    pmf: Vec<(u32, R)>,
    cdf: Vec<R>,
    m1: R,
    m2: R,
}

impl<R: Real> OffspringLaw<R> {
    /// Validates normalization only; no constraint on the mean.
    ///
    /// Used for degenerate laws (e.g. `{0: 1}`) that the engine accepts but
    /// the asymptotic theory does not.
    pub fn from_pmf<I>(pmf: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, R)>,
    {
        let mut entries: Vec<(u32, R)> = Vec::new();
        for (k, p) in pmf {
            if !p.is_finite() || p < R::zero() {
                return Err(Error::InvalidPmf(format!("mass {} at k = {k} is not a probability", to_f64(p))));
            }
            match entries.iter_mut().find(|(j, _)| *j == k) {
                Some((_, q)) => *q = *q + p,
                None => entries.push((k, p)),
            }
        }
        if entries.is_empty() {
            return Err(Error::InvalidPmf("empty pmf".into()));
        }
        entries.sort_by_key(|(k, _)| *k);
        let total: R = entries.iter().map(|(_, p)| *p).sum();
        if (total - R::one()).abs() > R::probability_tolerance() {
            return Err(Error::InvalidPmf(format!("masses sum to {}, expected 1", to_f64(total))));
        }

        let mut acc = R::zero();
        let mut cdf = Vec::with_capacity(entries.len());
        let (mut m1, mut m2) = (R::zero(), R::zero());
        for &(k, p) in &entries {
            let kf: R = lit(f64::from(k));
            acc = acc + p;
            cdf.push(acc);
            m1 = m1 + kf * p;
            m2 = m2 + kf * kf * p;
        }
        if let Some(last) = cdf.last_mut() {
            *last = R::one();
        }
        // Jensen: E(m^2) >= E(m)^2.
        let slack = R::probability_tolerance() * (R::one() + m2);
        assert!(m2 + slack >= m1 * m1, "offspring moments violate m2 >= m1^2");
        Ok(OffspringLaw { pmf: entries, cdf, m1, m2 })
    }

    pub fn deterministic(k: u32) -> Self {
        Self::from_pmf([(k, R::one())]).expect("point mass is a valid pmf")
    }

    pub fn pmf(&self) -> &[(u32, R)] {
        &self.pmf
    }

    pub fn m1(&self) -> R {
        self.m1
    }

    pub fn m2(&self) -> R {
        self.m2
    }

    pub fn variance(&self) -> R {
        self.m2 - self.m1 * self.m1
    }

    pub fn probability(&self, k: u32) -> R {
        self.pmf.iter().find(|(j, _)| *j == k).map_or(R::zero(), |(_, p)| *p)
    }

    /// Probability generating function `E(s^m)`.
    pub fn pgf(&self, s: R) -> R {
        self.pmf.iter().map(|&(k, p)| p * s.powi(k as i32)).sum()
    }

    pub fn sample(&self, rng: &mut RandomStream) -> u32 {
        let u: R = rng.uniform();
        let idx = self.cdf.partition_point(|&c| c < u);
        self.pmf[idx.min(self.pmf.len() - 1)].0
    }
}

/// Builds an offspring law satisfying assumption I1 (`m1 > 1`, `m2 < ∞`).
pub fn make_offspring<R, I>(pmf: I) -> Result<OffspringLaw<R>>
where
    R: Real,
    I: IntoIterator<Item = (u32, R)>,
{
    let law = OffspringLaw::from_pmf(pmf)?;
    if law.m1 <= R::one() {
        return Err(Error::SubcriticalOffspring { m1: to_f64(law.m1) });
    }
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use proptest::prelude::*;

    #[test]
    fn binary_splitting() {
        let law = make_offspring([(2, 1.0f64)]).unwrap();
        assert_eq!(law.m1(), 2.0);
        assert_eq!(law.m2(), 4.0);
        assert_eq!(law.variance(), 0.0);
    }

    #[test]
    fn quarter_death_three_quarter_binary() {
        let law = make_offspring([(0, 0.25f64), (2, 0.75)]).unwrap();
        assert!((law.m1() - 1.5).abs() < 1e-15);
        assert!((law.m2() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn critical_law_rejected() {
        let err = make_offspring([(0, 0.5), (2, 0.5)]).unwrap_err();
        assert_eq!(err, Error::SubcriticalOffspring { m1: 1.0 });
    }

    #[test]
    fn bad_normalization_rejected() {
        assert!(matches!(make_offspring([(2, 0.9)]), Err(Error::InvalidPmf(_))));
        assert!(matches!(make_offspring([(2, 1.2), (3, -0.2)]), Err(Error::InvalidPmf(_))));
        assert!(matches!(OffspringLaw::<f64>::from_pmf([]), Err(Error::InvalidPmf(_))));
    }

    #[test]
    fn user_decimals_within_tolerance() {
        let law = make_offspring([(1, 0.1f64), (2, 0.2), (3, 0.7)]).unwrap();
        assert!((law.m1() - 2.6).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let law = make_offspring([(0, 0.25f32), (2, 0.75f32)]).unwrap();
        assert!((law.m1() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn sampling_matches_pmf() {
        let law = OffspringLaw::from_pmf([(0, 0.2), (1, 0.3), (4, 0.5)]).unwrap();
        let mut rng = StreamKey::new(1, 0).stream();
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[law.sample(&mut rng) as usize] += 1;
        }
        for (k, p) in [(0, 0.2), (1, 0.3), (4, 0.5)] {
            let freq = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * se, "k={k} freq={freq}");
        }
        assert_eq!(counts[2] + counts[3], 0);
    }

    proptest! {
        #[test]
        fn moments_satisfy_jensen(weights in proptest::collection::vec(0.0f64..1.0, 1..8)) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-3);
            let pmf = weights.iter().enumerate().map(|(k, w)| (k as u32, w / total));
            let law = OffspringLaw::from_pmf(pmf).unwrap();
            prop_assert!(law.m2() + 1e-12 >= law.m1() * law.m1());
            prop_assert!((law.pgf(1.0) - 1.0).abs() < 1e-12);
        }
    }
}
