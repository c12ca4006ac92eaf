//! Composite Simpson quadrature, 1-D and 2-D.
//!
//! Used as the numeric cross-check route against closed-form integrals
//! elsewhere in the crate; the panel counts are chosen by the caller to
//! hit the tolerance they assert.

/// Composite Simpson on `[a,b]` with `panels` panels (must be even and
/// >= 2; rounded up if odd). Exact for cubics.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// Tensor-product Simpson on `[a,b] x [c,d]`.
pub fn simpson2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    panels: usize,
) -> f64 {
    simpson(|t| simpson(|u| f(t, u), c, d, panels), a, b, panels)
}
