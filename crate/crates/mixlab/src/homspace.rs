//! The probability space (X, m) with X = SL2(Z)\SL2(R): reduced Iwasawa
//! coordinates, exact Haar sampling, the right-translation action
//! l . x = x l^{-1}, and the injectivity-radius proxy.

use crate::error::{MixError, Result};
use crate::hyperbolic::{self, HPoint, LatticeElement};
use crate::lie::GroupElement;
use crate::rng::stream_rng;
use crate::util::par_map_indexed;
use rand::Rng;
use serde::{Deserialize, Serialize};

const PI: f64 = std::f64::consts::PI;

/// A point of X in reduced coordinates: (x, y) in the closed standard
/// fundamental domain, frame angle theta in [0, pi) (PSL convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl XPoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(MixError::InvalidInput("non-finite coordinates".into()));
        }
        if x.abs() > 0.5 + 1e-9 || x * x + y * y < 1.0 - 1e-9 {
            return Err(MixError::InvalidInput(format!(
                "({x}, {y}) outside the fundamental domain"
            )));
        }
        Ok(Self { x, y, theta: theta.rem_euclid(PI) })
    }

    pub fn base() -> Self {
        Self { x: 0.0, y: 1.0, theta: 0.0 }
    }

    pub fn position(&self) -> HPoint {
        HPoint { x: self.x, y: self.y }
    }
}

/// Configuration for the Haar sampler.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub count: u64,
}

impl SamplerConfig {
    pub fn new(seed: u64, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(MixError::InvalidInput("sample count must be >= 1".into()));
        }
        Ok(Self { seed, count })
    }
}

const HAAR_STREAM: u64 = 0x4841_4152;

/// Exact Haar sample number `index` for the given seed.
///
/// Proposal: x uniform on [-1/2, 1/2], y by inverse CDF of the density
/// proportional to y^{-2} on [sqrt3/2, inf), theta uniform on [0, pi);
/// the pair (x, y) is rejected against the circular boundary x^2+y^2 >= 1,
/// which makes the accepted law exactly the normalized dx dy / y^2 dtheta.
pub fn haar_point(seed: u64, index: u64) -> XPoint {
    let mut rng = stream_rng(seed, HAAR_STREAM, index);
    let y_floor = 3f64.sqrt() / 2.0;
    loop {
        let x: f64 = rng.gen::<f64>() - 0.5;
        let u: f64 = rng.gen();
        let y = y_floor / (1.0 - u);
        if x * x + y * y >= 1.0 {
            let theta = rng.gen::<f64>() * PI;
            return XPoint { x, y, theta };
        }
    }
}

/// i.i.d. samples from m; deterministic for a given seed and independent of
/// the parallel schedule.
pub fn sample_haar(cfg: &SamplerConfig) -> Vec<XPoint> {
    par_map_indexed(cfg.count, |i| haar_point(cfg.seed, i))
}

/// Iwasawa lift n_x a_y k_theta of a reduced point; lift(p) . i = x + i y.
pub fn lift(p: &XPoint) -> GroupElement {
    let sq = p.y.sqrt();
    GroupElement::upper(p.x) * GroupElement::new(sq, 0.0, 0.0, 1.0 / sq).unwrap()
        * GroupElement::rotation(p.theta)
}

/// Reduced coordinates of the coset containing g.
pub fn from_group(g: &GroupElement) -> Result<XPoint> {
    let z = hyperbolic::mobius_act_group(g, &HPoint::i());
    let (z0, gamma) = hyperbolic::reduce_to_fundamental(&z)?;
    let m = gamma.to_group().checked_mul(g)?;
    // Peel off n_x a_y; the remainder is the frame rotation.
    let sq = z0.y.sqrt();
    let k = GroupElement::new(1.0 / sq, 0.0, 0.0, sq)?
        .checked_mul(&GroupElement::upper(-z0.x))?
        .checked_mul(&m)?;
    let [ka, _, kc, _] = k.entries();
    let theta = kc.atan2(ka).rem_euclid(PI);
    // Clamp reduction round-off back onto the closed domain.
    let x = z0.x.clamp(-0.5, 0.5);
    let y = z0.y.max((1.0 - x * x).sqrt());
    XPoint::new(x, y, theta)
}

/// Right-translation action g . p: lifts p to s, forms s g^{-1}, reduces.
/// Translates of test functions then obey (g . phi)(x) = phi(g^{-1} . x).
pub fn act(g: &GroupElement, p: &XPoint) -> Result<XPoint> {
    let m = lift(p).checked_mul(&g.inverse())?;
    from_group(&m)
}

/// The reducing lattice element realizing `from_group`; exposed for
/// diagnostics.
pub fn reducing_element(g: &GroupElement) -> Result<LatticeElement> {
    let z = hyperbolic::mobius_act_group(g, &HPoint::i());
    Ok(hyperbolic::reduce_to_fundamental(&z)?.1)
}

/// min(1, 1/y): decays into the cusp like the true injectivity radius.
pub fn injectivity_proxy(p: &XPoint) -> f64 {
    (1.0 / p.y).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_projects_back() {
        let p = XPoint::new(0.3, 1.7, 0.9).unwrap();
        let q = from_group(&lift(&p)).unwrap();
        assert_relative_eq!(q.x, p.x, epsilon = 1e-10);
        assert_relative_eq!(q.y, p.y, epsilon = 1e-10);
        assert_relative_eq!(q.theta, p.theta, epsilon = 1e-10);
    }

    #[test]
    fn act_identity_and_inverse() {
        let p = XPoint::new(-0.2, 2.4, 1.2).unwrap();
        let q = act(&GroupElement::identity(), &p).unwrap();
        assert_relative_eq!(q.x, p.x, epsilon = 1e-10);
        assert_relative_eq!(q.y, p.y, epsilon = 1e-10);

        let g = GroupElement::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let r = act(&g, &act(&g.inverse(), &p).unwrap()).unwrap();
        assert_relative_eq!(r.x, p.x, epsilon = 1e-8);
        assert_relative_eq!(r.y, p.y, epsilon = 1e-8);
        assert_relative_eq!(r.theta, p.theta, epsilon = 1e-8);
    }

    #[test]
    fn act_is_an_action() {
        let p = XPoint::new(0.1, 1.3, 0.4).unwrap();
        let g = GroupElement::diagonal(1.5);
        let h = GroupElement::upper(0.8);
        let lhs = act(&(g * h), &p).unwrap();
        let rhs = act(&g, &act(&h, &p).unwrap()).unwrap();
        assert_relative_eq!(lhs.x, rhs.x, epsilon = 1e-8);
        assert_relative_eq!(lhs.y, rhs.y, epsilon = 1e-8);
        assert_relative_eq!(lhs.theta, rhs.theta, epsilon = 1e-8);
    }

    #[test]
    fn sampler_is_deterministic() {
        let cfg = SamplerConfig::new(11, 64).unwrap();
        let a = sample_haar(&cfg);
        let b = sample_haar(&cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn samples_respect_domain() {
        for p in sample_haar(&SamplerConfig::new(5, 500).unwrap()) {
            assert!(p.x.abs() <= 0.5);
            assert!(p.x * p.x + p.y * p.y >= 1.0);
            assert!((0.0..PI).contains(&p.theta));
        }
    }

    #[test]
    fn cusp_tail_probability() {
        // P(y > 2) = 3 / (2 pi); 2e4 samples keeps this a quick smoke test.
        let n = 20_000u64;
        let hits = sample_haar(&SamplerConfig::new(17, n).unwrap())
            .iter()
            .filter(|p| p.y > 2.0)
            .count() as f64;
        let p_hat = hits / n as f64;
        let p_true = 3.0 / (2.0 * PI);
        let se = (p_true * (1.0 - p_true) / n as f64).sqrt();
        assert!((p_hat - p_true).abs() < 3.0 * se, "p_hat = {p_hat}");
    }

    #[test]
    fn proxy_monotone_into_cusp() {
        let low = XPoint::new(0.0, 1.0, 0.0).unwrap();
        let high = XPoint::new(0.0, 10.0, 0.0).unwrap();
        assert_relative_eq!(injectivity_proxy(&high), 0.1);
        assert!(injectivity_proxy(&low) >= injectivity_proxy(&high));
        assert_relative_eq!(injectivity_proxy(&XPoint::new(0.3, 0.96, 0.0).unwrap()), 1.0);
    }

    #[test]
    fn zero_count_rejected() {
        assert!(SamplerConfig::new(1, 0).is_err());
    }
}
