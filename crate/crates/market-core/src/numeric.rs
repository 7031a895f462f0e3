//! Small numerical utilities: adaptive Simpson quadrature.
//!
//! Good enough for the smooth, rapidly decaying one-dimensional
//! integrands this crate meets (Gaussian-tailed posteriors); not a
//! general-purpose integration library.

/// Adaptive Simpson integration of `f` over `[a, b]` with absolute
/// tolerance `eps`.
pub fn integrate<F>(f: F, a: f64, b: f64, eps: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, eps, 60)
}

/// Two-pass relative-tolerance wrapper: a coarse pass estimates the
/// magnitude, the refined pass targets `rel * magnitude` absolute error.
pub fn integrate_rel<F>(f: F, a: f64, b: f64, rel: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let rough: f64 = (0..=64)
        .map(|i| {
            let x = a + (b - a) * (i as f64) / 64.0;
            f(x)
        })
        .sum::<f64>()
        * (b - a)
        / 65.0;
    let scale = rough.abs().max(f64::MIN_POSITIVE);
    integrate(f, a, b, rel * scale)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        // Richardson extrapolation term
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}
