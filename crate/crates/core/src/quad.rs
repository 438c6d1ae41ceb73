//! Adaptive Simpson quadrature.

use crate::{Error, Result};

/// Upper bound on the number of panels before giving up.
pub const MAX_PANELS: usize = 1 << 20;

/// `∫_a^b f` to relative tolerance `rel_tol`, starting from the given
/// pre-split points (which must lie in `[a, b]`, sorted).
///
/// The absolute target is `rel_tol` times a 64-panel composite estimate of
/// `∫|f|`, so integrands that vanish on most of the interval are handled.
pub fn simpson_with_splits(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::InvalidInterval(a, b));
    }
    if b == a {
        return Ok(0.0);
    }
    let mut pts = vec![a];
    pts.extend(splits.iter().copied().filter(|&s| s > a && s < b));
    pts.push(b);

    let coarse = composite_abs(&f, a, b, 64);
    let abs_tol = (rel_tol * coarse).max(f64::MIN_POSITIVE);
    let total_width = b - a;

    let mut stack = Vec::new();
    for w in pts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let m = 0.5 * (l + r);
        let (fl, fm, fr) = (f(l), f(m), f(r));
        stack.push(Panel { l, r, fl, fm, fr, whole: simpson(l, r, fl, fm, fr) });
    }

    let mut total = 0.0;
    let mut panels = stack.len();
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.l + p.r);
        let lm = 0.5 * (p.l + m);
        let rm = 0.5 * (m + p.r);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.l, m, p.fl, flm, p.fm);
        let right = simpson(m, p.r, p.fm, frm, p.fr);
        let delta = left + right - p.whole;
        let local_tol = abs_tol * (p.r - p.l) / total_width;
        if delta.abs() <= 15.0 * local_tol || m <= p.l || m >= p.r {
            total += left + right + delta / 15.0;
            continue;
        }
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::QuadratureDiverged(MAX_PANELS));
        }
        stack.push(Panel { l: p.l, r: m, fl: p.fl, fm: flm, fr: p.fm, whole: left });
        stack.push(Panel { l: m, r: p.r, fl: p.fm, fm: frm, fr: p.fr, whole: right });
    }
    if !total.is_finite() {
        return Err(Error::QuadratureDiverged(panels));
    }
    Ok(total)
}

/// `∫_a^b f` to relative tolerance `rel_tol`.
pub fn simpson_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    simpson_with_splits(f, a, b, &[], rel_tol)
}

struct Panel {
    l: f64,
    r: f64,
    fl: f64,
    fm: f64,
    fr: f64,
    whole: f64,
}

fn simpson(l: f64, r: f64, fl: f64, fm: f64, fr: f64) -> f64 {
    (r - l) / 6.0 * (fl + 4.0 * fm + fr)
}

fn composite_abs(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let l = a + i as f64 * h;
            let r = l + h;
            simpson(l, r, f(l).abs(), f(0.5 * (l + r)).abs(), f(r).abs())
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let v = simpson_adaptive(|x| x * x, 0.0, 3.0, 1e-10).unwrap();
        assert!((v - 9.0).abs() < 1e-9);
        let e = simpson_adaptive(f64::exp, 0.0, 1.0, 1e-10).unwrap();
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn sharp_peak_with_split() {
        let f = |x: f64| (-1e4 * (x - 0.3) * (x - 0.3)).exp();
        let v = simpson_with_splits(f, 0.0, 1.0, &[0.3], 1e-9).unwrap();
        let exact = (std::f64::consts::PI / 1e4).sqrt();
        assert!((v / exact - 1.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_reversed_interval() {
        assert!(simpson_adaptive(|x| x, 1.0, 0.0, 1e-8).is_err());
    }
}
