//! Kolmogorov–Smirnov distances.

use std::cmp::Ordering;

use crate::real::{lit, Real};

fn sort_weighted<R: Real>(samples: &[R], weights: Option<&[R]>) -> (Vec<(R, R)>, R) {
    let mut pairs: Vec<(R, R)> = match weights {
        Some(w) => samples.iter().copied().zip(w.iter().copied()).collect(),
        None => samples.iter().map(|&x| (x, R::one())).collect(),
    };
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let total = pairs.iter().map(|p| p.1).sum();
    (pairs, total)
}

fn just_below<R: Real>(v: R) -> R {
    v - (v.abs() * R::epsilon()).max(R::min_positive_value())
}

/// Sup distance between the (optionally weighted) empirical cdf of
/// `samples` and `cdf`. Handles reference laws with atoms by comparing left
/// limits as well.
pub fn ks_distance<R: Real>(samples: &[R], weights: Option<&[R]>, cdf: impl Fn(R) -> R) -> R {
    if samples.is_empty() {
        return R::one();
    }
    let (pairs, total) = sort_weighted(samples, weights);
    if total <= R::zero() {
        return R::one();
    }
    let mut d = R::zero();
    let mut acc = R::zero();
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let before = acc / total;
        while i < pairs.len() && pairs[i].0 == v {
            acc = acc + pairs[i].1;
            i += 1;
        }
        let after = acc / total;
        let f = cdf(v);
        let f_left = cdf(just_below(v));
        d = d.max((after - f).abs()).max((before - f_left).abs());
    }
    d
}

/// Two-sample KS statistic between unweighted samples.
pub fn ks_two_sample<R: Real>(a: &[R], b: &[R]) -> R {
    if a.is_empty() || b.is_empty() {
        return R::one();
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap_or(Ordering::Equal));
    y.sort_by(|p, q| p.partial_cmp(q).unwrap_or(Ordering::Equal));
    let (na, nb): (R, R) = (lit(x.len() as f64), lit(y.len() as f64));
    let (mut i, mut j) = (0, 0);
    let mut d = R::zero();
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        let fa: R = lit::<R>(i as f64) / na;
        let fb: R = lit::<R>(j as f64) / nb;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(K > λ)`, `λ = sqrt(n_eff) · D`.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value of a two-sample KS statistic using the asymptotic law with the
/// small-sample correction of Stephens.
pub fn ks_two_sample_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    kolmogorov_pvalue((en + 0.12 + 0.11 / en) * d)
}
