//! Exact closed-form integral identities and nilpotent-exponential norm
//! constants, kept as standalone exactly-testable kernels.

use crate::error::{MixError, Result};
use crate::lie::{exp_sl2, op_norm, sample::random_nilpotent, GroupElement, LieVector};
use crate::rng::stream_rng;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// J(T, a) = int_0^{2T} (2T - u) max(1, u)^a du in closed form, T >= 1.
///
/// Direct symbolic integration gives a positive middle term
/// +2aT/(a+1); the quadrature route in `real_integral_j_quadrature`
/// arbitrates.
pub fn real_integral_j(t: f64, a: f64) -> Result<f64> {
    check_real_domain(t, a)?;
    let two_t = 2.0 * t;
    Ok(two_t.powf(a + 2.0) / ((a + 1.0) * (a + 2.0)) + 2.0 * a * t / (a + 1.0)
        - a / (2.0 * (a + 2.0)))
}

fn check_real_domain(t: f64, a: f64) -> Result<()> {
    if !(t.is_finite() && a.is_finite()) {
        return Err(MixError::InvalidInput("non-finite integral parameters".into()));
    }
    if t < 1.0 {
        return Err(MixError::InvalidInput(format!("T = {t} must be >= 1")));
    }
    if a <= -0.5 {
        return Err(MixError::InvalidInput(format!("a = {a} must exceed -1/2")));
    }
    Ok(())
}

/// Adaptive Simpson quadrature for the same integrand, split at the kink
/// u = 1. Serves as the independent arbiter for the closed form.
pub fn real_integral_j_quadrature(t: f64, a: f64) -> Result<f64> {
    check_real_domain(t, a)?;
    let f = |u: f64| (2.0 * t - u) * u.max(1.0).powf(a);
    Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-12, 50)
        + adaptive_simpson(&f, 1.0, 2.0 * t, 1e-12, 50))
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    let mid = 0.5 * (a + b);
    let left = simpson(f, a, mid);
    let right = simpson(f, mid, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps * (1.0 + whole.abs()) {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, mid, eps / 2.0, depth - 1)
            + adaptive_simpson(f, mid, b, eps / 2.0, depth - 1)
    }
}

/// Uniform envelope constant: the leading coefficient of I(T) is
/// 2/((a+1)(a+2)), whose supremum over a > -1/2 is 8/3 (attained as
/// a -> -1/2), so C = 8/3 is the sharp uniform constant; C = 2 already
/// fails for a near -1/2 at large T.
pub const ENVELOPE_CONSTANT: f64 = 8.0 / 3.0;

/// The double integral I(T) = int int_{[-T,T]^2} max(1, |s-t|)^a ds dt and
/// the envelope (2T)^{a+2}; I(T) <= C * envelope on the admissible domain.
pub fn real_integral_i_bound(t: f64, a: f64) -> Result<(f64, f64)> {
    let value = 2.0 * real_integral_j(t, a)?;
    let bound = (2.0 * t).powf(a + 2.0);
    assert!(value <= ENVELOPE_CONSTANT * bound * (1.0 + 1e-12), "envelope violated");
    Ok((value, bound))
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= p {
        if p.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// p^e as an exact rational, with e possibly negative.
fn prime_power(p: u64, e: i64) -> BigRational {
    let base = BigInt::from(p);
    if e >= 0 {
        BigRational::from_integer(base.pow(e as u32))
    } else {
        BigRational::new(BigInt::one(), base.pow((-e) as u32))
    }
}

/// Exact p-adic integral I(p^n) = sum_{s,t < p^n} max(1, p^n |s-t|_p)^a
/// by the valuation-count closed form, as an exact rational.
pub fn padic_integral_i(p: u64, n: u32, a: i64) -> Result<BigRational> {
    if !is_prime(p) {
        return Err(MixError::InvalidInput(format!("{p} is not prime")));
    }
    let mut inner = BigRational::one();
    for j in 1..=n as i64 {
        let count = prime_power(p, j) - prime_power(p, j - 1);
        inner += count * prime_power(p, j * a);
    }
    Ok(prime_power(p, n as i64) * inner)
}

/// Brute-force double sum over s, t in [0, p^n) with exact p-adic
/// absolute values. Independent of the closed form above.
pub fn padic_integral_brute(p: u64, n: u32, a: i64) -> Result<BigRational> {
    if !is_prime(p) {
        return Err(MixError::InvalidInput(format!("{p} is not prime")));
    }
    let modulus = (p as i64).pow(n);
    let mut total = BigRational::zero();
    for s in 0..modulus {
        for t in 0..modulus {
            if s == t {
                total += BigRational::one();
                continue;
            }
            let mut d = (s - t).unsigned_abs();
            let mut v: i64 = 0;
            while d % p == 0 {
                d /= p;
                v += 1;
            }
            // p^n |s - t|_p = p^{n - v} > 1 here.
            total += prime_power(p, (n as i64 - v) * a);
        }
    }
    Ok(total)
}

/// Worst-case constants for the nilpotent exponential bounds over random
/// nilpotent 2x2 matrices (conjugates of t E, t log-uniform in
/// [1e-3, 1e3]):
/// c0_hat = min ||exp X||_F / ||X||_F restricted to ||X|| >= 1, and
/// c3_hat = the smallest constant closing both envelope inequalities
/// max(1, ||X||)/c3 <= ||exp X||_op <= c3 max(1, ||X||)^3.
pub fn nilpotent_exp_constants(samples: u64, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(MixError::InvalidInput("need at least one sample".into()));
    }
    let mut c0 = f64::INFINITY;
    let mut c3 = 1.0f64;
    for i in 0..samples {
        let mut rng = stream_rng(seed, 0x4e49_4c50, i);
        let x = random_nilpotent(&mut rng, 1e-3, 1e3);
        let norm = x.frobenius_norm();
        let expx = exp_sl2(&x)?;
        if norm >= 1.0 {
            c0 = c0.min(expx.frobenius_norm() / norm);
        }
        let opn = op_norm(&expx);
        let floor = norm.max(1.0);
        c3 = c3.max(floor / opn).max(opn / floor.powi(3));
    }
    if !c0.is_finite() {
        c0 = 1.0;
    }
    Ok((c0, c3))
}

/// Convenience: op_norm of exp(t E); used by the envelope diagnostics.
pub fn unipotent_op_norm(t: f64) -> Result<f64> {
    Ok(op_norm(&exp_sl2(&LieVector::E.scale(t))?))
}

/// ||exp X||_F for nilpotent X reduces to sqrt(2 + ||X||^2); exposed for
/// the exactness checks.
pub fn nilpotent_exp_frobenius(x: &LieVector) -> Result<f64> {
    let g: GroupElement = exp_sl2(x)?;
    Ok(g.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_traits::ToPrimitive;

    #[test]
    fn j_examples() {
        assert_relative_eq!(real_integral_j(1.0, 0.0).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            real_integral_j(1.0, 1.0).unwrap(),
            13.0 / 6.0,
            max_relative = 1e-12
        );
        for t in [1.0, 5.0, 10.0] {
            assert_relative_eq!(
                real_integral_j(t, 0.0).unwrap(),
                2.0 * t * t,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn j_matches_quadrature() {
        for &(t, a) in &[(1.0, 0.5), (2.0, 1.7), (7.5, -0.3), (20.0, 3.0)] {
            let cf = real_integral_j(t, a).unwrap();
            let q = real_integral_j_quadrature(t, a).unwrap();
            assert_relative_eq!(cf, q, max_relative = 1e-9);
        }
    }

    #[test]
    fn j_domain_errors() {
        assert!(real_integral_j(0.5, 0.0).is_err());
        assert!(real_integral_j(1.0, -0.5).is_err());
        assert!(real_integral_j(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn i_bound_examples() {
        let (v, b) = real_integral_i_bound(1.0, 0.0).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-12);
        assert_relative_eq!(b, 4.0, max_relative = 1e-12);
        let (v, _) = real_integral_i_bound(1.0, 1.0).unwrap();
        assert_relative_eq!(v, 13.0 / 3.0, max_relative = 1e-12);
        let (v, b) = real_integral_i_bound(10.0, 0.0).unwrap();
        assert_relative_eq!(v, 400.0, max_relative = 1e-12);
        assert_relative_eq!(b, 400.0, max_relative = 1e-12);
    }

    #[test]
    fn envelope_ratio_uniform() {
        for &t in &[1.0, 2.0, 5.0, 10.0, 50.0] {
            for &a in &[-0.49, -0.25, 0.0, 0.5, 1.0, 2.0, 3.0] {
                let (v, b) = real_integral_i_bound(t, a).unwrap();
                assert!(v <= ENVELOPE_CONSTANT * b * (1.0 + 1e-12));
                if a >= 0.0 {
                    // For nonnegative exponents the ratio stays below 2.
                    assert!(v <= 2.0 * b * (1.0 + 1e-12), "T={t} a={a}: {v} vs {b}");
                }
            }
        }
    }

    #[test]
    fn padic_examples() {
        assert_eq!(padic_integral_i(2, 1, 0).unwrap().to_f64().unwrap(), 4.0);
        assert_eq!(padic_integral_i(2, 1, 1).unwrap().to_f64().unwrap(), 6.0);
        let closed = padic_integral_i(3, 2, 1).unwrap();
        let brute = padic_integral_brute(3, 2, 1).unwrap();
        assert_eq!(closed, brute);
    }

    #[test]
    fn padic_rejects_composites() {
        assert!(padic_integral_i(4, 1, 0).is_err());
        assert!(padic_integral_brute(1, 1, 0).is_err());
    }

    #[test]
    fn nilpotent_frobenius_closed_form() {
        for t in [0.5, 1.0, 10.0, 1000.0] {
            let x = LieVector::E.scale(t);
            assert_relative_eq!(
                nilpotent_exp_frobenius(&x).unwrap(),
                (2.0 + t * t).sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn constants_certify_the_family() {
        let (c0, c3) = nilpotent_exp_constants(2_000, 99).unwrap();
        assert!(c0 >= 1.0, "c0_hat = {c0}");
        assert!(c3 < 10.0, "c3_hat = {c3}");
    }

    #[test]
    fn unipotent_envelope_spot_checks() {
        for t in [0.1, 1.0, 100.0] {
            let opn = unipotent_op_norm(t).unwrap();
            let floor = t.max(1.0);
            assert!(opn >= floor / 10.0);
            assert!(opn <= 10.0 * floor.powi(3));
        }
    }
}
