//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use quadrature::double_exponential::integrate;

const TOL: f64 = 1e-15;

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, TOL).integral
}

/// `∫_{r}^{r + len} z^{-1-α} dz` by quadrature after `z = r e^v`, which
/// flattens the peak at the near end.
fn ray(r: f64, len: f64, alpha: f64) -> f64 {
    let vmax = (1.0 + len / r).ln();
    r.powf(-alpha) * quad(|v| (-alpha * v).exp(), 0.0, vmax)
}

/// `∬_{[0,h] × [dh,(d+1)h]} |x - y|^{-1-α} dy dx` by nested quadrature.
pub fn pair_integral(h: f64, d: usize, alpha: f64) -> f64 {
    assert!(d >= 1);
    if d == 1 {
        // r = distance of x to the shared edge; r = h t^q removes the r^{-α}
        // endpoint singularity of the inner integral
        let q = 1.0 / (1.0 - alpha);
        quad(
            |t| {
                if t <= 0.0 {
                    return 0.0;
                }
                let r = h * t.powf(q);
                ray(r, h, alpha) * h * q * t.powf(q - 1.0)
            },
            0.0,
            1.0,
        )
    } else {
        let lo = d as f64 * h;
        quad(
            |x| quad(|y| (y - x).powf(-1.0 - alpha), lo, lo + h),
            0.0,
            h,
        )
    }
}

/// `∫_{r0}^{r1} g(ρ) dρ` over a distance to the boundary, graded by `ρ = r0 + (r1 - r0) t^q`
/// so that a `ρ^{-α}` singularity at `r0 = 0` becomes smooth.
fn graded(g: impl Fn(f64) -> f64, r0: f64, r1: f64, alpha: f64) -> f64 {
    let q = 1.0 / (1.0 - alpha);
    quad(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            g(r0 + (r1 - r0) * t.powf(q)) * (r1 - r0) * q * t.powf(q - 1.0)
        },
        0.0,
        1.0,
    )
}

/// `∫_{[l,r]} ∫_{CΩ ∩ [a-R, b+R]} |x - y|^{-1-α} dy dx`, one boundary at a time.
pub fn truncated_tail(a: f64, b: f64, l: f64, r: f64, alpha: f64, radius: f64) -> f64 {
    let side = |r0: f64, r1: f64| graded(|rho| ray(rho, radius, alpha), r0, r1, alpha);
    side(b - r, b - l) + side(l - a, r - a)
}

/// The part of the exterior beyond radius `R`, `∫ [(b-x+R)^{-α} + (x-a+R)^{-α}]/α dx`.
pub fn tail_remainder(a: f64, b: f64, l: f64, r: f64, alpha: f64, radius: f64) -> f64 {
    quad(
        |x| ((b - x + radius).powf(-alpha) + (x - a + radius).powf(-alpha)) / alpha,
        l,
        r,
    )
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
