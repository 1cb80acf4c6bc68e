//! Modified Bessel function of the second kind, order one.
//!
//! `k1` is the only special function the covariance model needs and is
//! implemented from scratch: the ascending power series below the switch
//! point, Steed's continued fraction (CF2) above it. Relative error is
//! below 1e-12 over the full positive axis (see the quadrature oracle in
//! the tests, which is accurate to machine precision).

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Switch point between the power series and the continued fraction.
const SERIES_MAX: f64 = 2.0;

const CF_EPS: f64 = 1e-16;
const CF_MAX_ITER: usize = 10_000;

/// K₁(x) for x > 0.
///
/// Returns `+inf` at `x == 0` (K₁ diverges like 1/x) and NaN for
/// negative or NaN input.
pub fn k1(x: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x <= SERIES_MAX {
        k1_series(x)
    } else {
        k1_continued_fraction(x)
    }
}

/// Ascending series, valid for small x:
///
///   K₁(x) = 1/x + ln(x/2)·I₁(x) − (x/4)·Σₖ [ψ(k+1)+ψ(k+2)]·qᵏ/(k!(k+1)!)
///
/// with q = x²/4 and I₁(x) = (x/2)·Σₖ qᵏ/(k!(k+1)!).
fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let log_half_x = (0.5 * x).ln();

    // psi(1) = -gamma, psi(2) = 1 - gamma
    let mut psi_a = -EULER_GAMMA;
    let mut psi_b = 1.0 - EULER_GAMMA;
    let mut term = 1.0; // q^k / (k!(k+1)!)
    let mut i1_sum = 0.0;
    let mut k1_sum = 0.0;
    for k in 0..64 {
        i1_sum += term;
        k1_sum += (psi_a + psi_b) * term;
        let next = term * q / ((k + 1) as f64 * (k + 2) as f64);
        if next < f64::EPSILON * i1_sum.abs() * 1e-2 {
            break;
        }
        term = next;
        psi_a += 1.0 / (k + 1) as f64;
        psi_b += 1.0 / (k + 2) as f64;
    }
    let i1 = 0.5 * x * i1_sum;
    1.0 / x + log_half_x * i1 - 0.25 * x * k1_sum
}

/// Steed's CF2 evaluated at order μ = 0, which yields K₀ and the
/// recurrence factor for K₁ simultaneously:
///
///   K₀(x) = sqrt(π/(2x))·e⁻ˣ / S,   K₁(x) = K₀(x)·(x + 1/2 − h)/x.
fn k1_continued_fraction(x: f64) -> f64 {
    let a1 = 0.25; // 1/4 - mu^2 with mu = 0
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delta_h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delta_h;
    let mut converged = false;
    for i in 2..=CF_MAX_ITER {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let q_new = (q1 - b * q2) / a;
        q1 = q2;
        q2 = q_new;
        q += c * q_new;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delta_h = (b * d - 1.0) * delta_h;
        h += delta_h;
        let delta_s = q * delta_h;
        s += delta_s;
        if (delta_s / s).abs() < CF_EPS {
            converged = true;
            break;
        }
    }
    debug_assert!(converged, "CF2 failed to converge at x = {x}");
    h = a1 * h;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - h) / x
}
