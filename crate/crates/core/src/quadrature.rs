//! Adaptive Gauss–Kronrod quadrature on finite and infinite ranges.

use crate::real::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 400;
const MAX_PANELS: usize = 20_000;
const SCAN_LIMIT: usize = 4_000;

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<R> {
    pub value: R,
    pub error: R,
}

fn gk15<R: Real>(f: &mut dyn FnMut(R) -> R, a: R, b: R) -> Integral<R> {
    let half: R = (b - a) * lit(0.5);
    let mid: R = (a + b) * lit(0.5);
    let fc = f(mid);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let pair = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + pair * lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * lit(WG[j / 2]);
        }
    }
    Integral { value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

fn effective_rel_tol<R: Real>(rel_tol: R) -> R {
    rel_tol.max(R::epsilon() * lit(100.0))
}

/// Globally adaptive G7–K15 on `[a, b]`: bisects the worst interval until the
/// summed error meets `max(abs_tol, rel_tol·|value|)`.
pub fn integrate<R: Real>(mut f: impl FnMut(R) -> R, a: R, b: R, abs_tol: R, rel_tol: R) -> Integral<R> {
    if a == b {
        return Integral { value: R::zero(), error: R::zero() };
    }
    let rel_tol = effective_rel_tol(rel_tol);
    let first = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, first)];
    let (mut value, mut error) = (first.value, first.error);
    while error > abs_tol.max(rel_tol * value.abs()) && pieces.len() < MAX_INTERVALS {
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.partial_cmp(&y.1 .2.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, old) = pieces.swap_remove(worst);
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            pieces.push((lo, hi, old));
            break;
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        value = value - old.value + left.value + right.value;
        error = error - old.error + left.error + right.error;
        pieces.push((lo, mid, left));
        pieces.push((mid, hi, right));
    }
    // Resum to avoid drift from the incremental updates.
    let value = pieces.iter().map(|p| p.2.value).sum();
    let error = pieces.iter().map(|p| p.2.error).sum();
    Integral { value, error }
}

/// Integrates `f` over `[lo, ∞)` (or the whole line when `lo = −∞`).
///
/// `center` and `scale` locate the bulk of the integrand; the routine first
/// scans for the peak of `|f|`, then marches panels of width `scale` outward
/// until consecutive panels are both negligible and shrinking.
pub fn integrate_to_infinity<R: Real>(mut f: impl FnMut(R) -> R, lo: R, center: R, scale: R, rel_tol: R) -> Integral<R> {
    let rel_tol = effective_rel_tol(rel_tol);
    let scale = if scale > R::zero() && scale.is_finite() { scale } else { R::one() };
    let start = if lo.is_finite() { center.max(lo) } else { center };
    let peak = scan_peak(&mut f, lo, start, scale);

    let mut total = Integral { value: R::zero(), error: R::zero() };
    let add = |piece: Integral<R>, total: &mut Integral<R>| {
        total.value = total.value + piece.value;
        total.error = total.error + piece.error;
    };

    // Upward.
    let mut prev = R::infinity();
    let mut quiet = 0;
    for k in 0..MAX_PANELS {
        let a = peak + scale * lit(k as f64);
        let piece = integrate(&mut f, a, a + scale, R::zero(), rel_tol);
        add(piece, &mut total);
        let size = piece.value.abs();
        if size <= rel_tol * total.value.abs() * lit(1e-2) && size <= prev {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        prev = size;
    }

    // Downward.
    let mut prev = R::infinity();
    let mut quiet = 0;
    for k in 0..MAX_PANELS {
        let b = peak - scale * lit(k as f64);
        if lo.is_finite() && b <= lo {
            break;
        }
        let a = if lo.is_finite() { (b - scale).max(lo) } else { b - scale };
        let piece = integrate(&mut f, a, b, R::zero(), rel_tol);
        add(piece, &mut total);
        let size = piece.value.abs();
        if size <= rel_tol * total.value.abs() * lit(1e-2) && size <= prev {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        prev = size;
    }
    total
}

fn scan_peak<R: Real>(f: &mut dyn FnMut(R) -> R, lo: R, start: R, scale: R) -> R {
    let mut best = start;
    let mut best_val = f(start).abs();
    let mut falling = 0;
    for k in 1..SCAN_LIMIT {
        let x = start + scale * lit(k as f64);
        let v = f(x).abs();
        if v > best_val {
            best = x;
            best_val = v;
            falling = 0;
        } else {
            falling += 1;
            if best_val > R::zero() && falling >= 8 && v < best_val * lit(1e-12) {
                break;
            }
        }
    }
    let mut falling = 0;
    for k in 1..SCAN_LIMIT {
        let x = start - scale * lit(k as f64);
        if lo.is_finite() && x <= lo {
            break;
        }
        let v = f(x).abs();
        if v > best_val {
            best = x;
            best_val = v;
            falling = 0;
        } else {
            falling += 1;
            if best_val > R::zero() && falling >= 8 && v < best_val * lit(1e-12) {
                break;
            }
        }
    }
    best
}
