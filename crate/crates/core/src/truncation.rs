//! Truncation calculus used by every energy estimate: the clamp `T_k`, its
//! primitive `Theta_k`, the complement `G_k` and the smooth cut-off `S_sigma`.

/// `T_k(r) = min(k, max(r, -k))`.
pub fn truncate(k: f64, r: f64) -> f64 {
    debug_assert!(k >= 0.0);
    r.clamp(-k, k)
}

/// Primitive of `T_k` vanishing at zero.
pub fn theta(k: f64, r: f64) -> f64 {
    debug_assert!(k >= 0.0);
    let a = r.abs();
    if a <= k {
        0.5 * r * r
    } else {
        k * a - 0.5 * k * k
    }
}

/// `G_k(r) = r - T_k(r)`, zero on `[-k, k]`.
pub fn g_tail(k: f64, r: f64) -> f64 {
    r - truncate(k, r)
}

/// Odd, 1-Lipschitz cut-off equal to the identity on `(-sigma, sigma)`,
/// quadratic on `sigma <= |r| <= sigma + 1` and saturated at `±(sigma + 1/2)`.
pub fn s_sigma(sigma: f64, r: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    let a = r.abs();
    let mag = if a < sigma {
        a
    } else if a <= sigma + 1.0 {
        let d = a - (sigma + 1.0);
        (sigma + 0.5) - 0.5 * d * d
    } else {
        sigma + 0.5
    };
    mag.copysign(r)
}

/// Derivative of [`s_sigma`]; supported in `[-sigma - 1, sigma + 1]`.
pub fn s_sigma_prime(sigma: f64, r: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    let a = r.abs();
    if a < sigma {
        1.0
    } else if a <= sigma + 1.0 {
        sigma + 1.0 - a
    } else {
        0.0
    }
}
