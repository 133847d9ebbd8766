//! Smooth compactly supported bump test functions on X, numerical Sobolev
//! norms, the norm-axiom harness, and projective tensor norms.
//!
//! A bump is radial in the Cartan pseudo-distance, hence theta-invariant;
//! evaluation sums the finitely many lattice translates whose support
//! reaches the sample point.

use crate::error::{MixError, Result};
use crate::homspace::{self, haar_point, XPoint};
use crate::hyperbolic::{self, HPoint, LatticeElement};
use crate::lie::{cartan_distance, exp_sl2, op_norm, GroupElement, LieVector};
use crate::util::{integrate_gl, linear_fit, mean_stderr, par_map_indexed};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Smooth cutoff profile: exp(-1/(1-u)) for u < 1, else 0.
pub fn profile(u: f64) -> f64 {
    if u < 1.0 {
        (-1.0 / (1.0 - u)).exp()
    } else {
        0.0
    }
}

/// Largest admissible bump radius (Cartan pseudo-distance units).
pub const MAX_RADIUS: f64 = 1.0;
/// Largest admissible center height; together with `MAX_RADIUS` this keeps
/// the static translate table complete for support queries.
pub const MAX_CENTER_Y: f64 = 4.0;

/// Lattice translates consulted during evaluation, together with the
/// cusp translations T^n chosen per query. Radius 4 covers every
/// non-translation element that can move one admissible support point
/// within reach of another.
fn translate_table() -> &'static [LatticeElement] {
    static TABLE: OnceLock<Vec<LatticeElement>> = OnceLock::new();
    TABLE.get_or_init(|| hyperbolic::enumerate_ball(4.0).expect("static ball"))
}

/// A radial bump on X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: XPoint,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: XPoint, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= MAX_RADIUS) {
            return Err(MixError::InvalidInput(format!(
                "bump radius {radius} outside (0, {MAX_RADIUS}]"
            )));
        }
        if center.y > MAX_CENTER_Y {
            return Err(MixError::InvalidInput(format!(
                "bump center height {} above {MAX_CENTER_Y}",
                center.y
            )));
        }
        if !amplitude.is_finite() {
            return Err(MixError::InvalidInput("non-finite amplitude".into()));
        }
        Ok(Self { center, radius, amplitude })
    }

    /// Bump normalized to unit mass: m(phi) = 1.
    pub fn unit_mass(center: XPoint, radius: f64) -> Result<Self> {
        let raw = Bump::new(center, radius, 1.0)?;
        let mass = raw.mass();
        Bump::new(center, radius, 1.0 / mass)
    }

    /// Analytic m-mass via radial quadrature. The sum over lattice
    /// translates integrates to the plain ball integral regardless of
    /// overlaps, so this is exact for any admissible center.
    pub fn mass(&self) -> f64 {
        let hyper_radius = SQRT2 * self.radius;
        let integral = integrate_gl(
            |rho| profile((rho / hyper_radius).powi(2)) * rho.sinh(),
            0.0,
            hyper_radius,
            64,
        );
        // m = (3/pi) * area; the angular integral contributes 2 pi.
        self.amplitude * 6.0 * integral
    }

    /// Pointwise evaluation: sum of the profile over all contributing
    /// lattice translates of the lifted center.
    pub fn eval(&self, p: &XPoint) -> f64 {
        let z = p.position();
        let c = self.center.position();
        let hyper_radius = SQRT2 * self.radius;
        let ratio_lo = (-hyper_radius).exp();
        let ratio_hi = hyper_radius.exp();
        let cosh_r = hyper_radius.cosh();
        let mut seen: Vec<[i64; 4]> = Vec::new();
        let mut total = 0.0;
        for gamma in translate_table() {
            let w = hyperbolic::mobius_act(gamma, &z);
            // Translations T^n keep the height; prune on it first.
            if w.y < c.y * ratio_lo || w.y > c.y * ratio_hi {
                continue;
            }
            // |Re difference| reach at these heights.
            let dx_max = (2.0 * w.y * c.y * (cosh_r - 1.0)).max(0.0).sqrt();
            let shift = c.x - w.x;
            let n_lo = (shift - dx_max).ceil() as i64;
            let n_hi = (shift + dx_max).floor() as i64;
            for n in n_lo..=n_hi {
                let moved = HPoint { x: w.x + n as f64, y: w.y };
                let d = hyperbolic::hyp_dist(&moved, &c);
                if d >= hyper_radius {
                    continue;
                }
                let full = LatticeElement::t_pow(n).mul(gamma);
                if seen.contains(&full.entries()) {
                    continue;
                }
                seen.push(full.entries());
                total += self.amplitude * profile((d / hyper_radius).powi(2));
            }
        }
        total
    }
}

/// Test functions closed under translation, scaling, constant shifts, and
/// pointwise products.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TestFn {
    Bump(Bump),
    /// (g . f)(x) = f(g^{-1} . x).
    Translated(GroupElement, Box<TestFn>),
    Scaled(f64, Box<TestFn>),
    /// f + constant.
    Shifted(Box<TestFn>, f64),
    Sum(Box<TestFn>, Box<TestFn>),
    Product(Box<TestFn>, Box<TestFn>),
}

impl TestFn {
    pub fn bump(b: Bump) -> Self {
        TestFn::Bump(b)
    }

    pub fn translated(g: GroupElement, f: TestFn) -> Self {
        TestFn::Translated(g, Box::new(f))
    }

    pub fn scaled(s: f64, f: TestFn) -> Self {
        TestFn::Scaled(s, Box::new(f))
    }

    /// f - m(f) for a bump with known mass.
    pub fn mean_normalized(b: Bump) -> Self {
        let m = b.mass();
        TestFn::Shifted(Box::new(TestFn::Bump(b)), -m)
    }

    pub fn eval(&self, p: &XPoint) -> Result<f64> {
        match self {
            TestFn::Bump(b) => Ok(b.eval(p)),
            TestFn::Translated(g, f) => f.eval(&homspace::act(&g.inverse(), p)?),
            TestFn::Scaled(s, f) => Ok(s * f.eval(p)?),
            TestFn::Shifted(f, c) => Ok(f.eval(p)? + c),
            TestFn::Sum(f, g) => Ok(f.eval(p)? + g.eval(p)?),
            TestFn::Product(f, g) => Ok(f.eval(p)? * g.eval(p)?),
        }
    }
}

/// Sobolev-norm estimation parameters. kappa is fixed to zero: all test
/// families live in a fixed compact part where the weighted norms are
/// equivalent to the unweighted ones.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SobolevConfig {
    pub d: u32,
    pub kappa: f64,
    pub mc_samples: u64,
    pub fd_step: f64,
    pub seed: u64,
}

impl SobolevConfig {
    pub fn new(d: u32, mc_samples: u64, fd_step: f64, seed: u64) -> Result<Self> {
        if d > 3 {
            return Err(MixError::InvalidInput(
                "finite-difference stability budget caps d at 3".into(),
            ));
        }
        if !(1e-5..=1e-2).contains(&fd_step) {
            return Err(MixError::InvalidInput(format!(
                "fd_step {fd_step} outside [1e-5, 1e-2]"
            )));
        }
        if mc_samples == 0 {
            return Err(MixError::InvalidInput("mc_samples must be >= 1".into()));
        }
        Ok(Self { d, kappa: 0.0, mc_samples, fd_step, seed })
    }
}

/// A Sobolev norm estimate with its Monte Carlo standard error and the
/// finite-difference stability flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub value: f64,
    pub stderr: f64,
    pub unstable: bool,
}

const BASIS: [LieVector; 3] = [LieVector::H, LieVector::E, LieVector::F];

/// Iterated central difference along the basis monomial (m_h, m_e, m_f).
fn monomial_derivative(f: &TestFn, p: &XPoint, orders: [u32; 3], h: f64) -> Result<f64> {
    for (i, &m) in orders.iter().enumerate() {
        if m > 0 {
            let mut rest = orders;
            rest[i] -= 1;
            let step = BASIS[i].scale(h);
            let fwd = homspace::act(&exp_sl2(&step)?, p)?;
            let bwd = homspace::act(&exp_sl2(&step.scale(-1.0))?, p)?;
            return Ok((monomial_derivative(f, &fwd, rest, h)?
                - monomial_derivative(f, &bwd, rest, h)?)
                / (2.0 * h));
        }
    }
    f.eval(p)
}

fn monomials(d: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for mh in 0..=d {
        for me in 0..=(d - mh) {
            for mf in 0..=(d - mh - me) {
                out.push([mh, me, mf]);
            }
        }
    }
    out
}

/// Monte Carlo Sobolev norm S_d: the L2 aggregate of derivatives through
/// degree d along the ordered basis (H, E, F).
pub fn sobolev_norm(f: &TestFn, cfg: &SobolevConfig) -> Result<SobolevEstimate> {
    let words = monomials(cfg.d);
    let rows = par_map_indexed(cfg.mc_samples, |i| {
        let p = haar_point(cfg.seed, i);
        let mut s = 0.0;
        let mut s_coarse = 0.0;
        for w in &words {
            let v = monomial_derivative(f, &p, *w, cfg.fd_step)?;
            let vc = monomial_derivative(f, &p, *w, 2.0 * cfg.fd_step)?;
            s += v * v;
            s_coarse += vc * vc;
        }
        Ok::<(f64, f64), MixError>((s, s_coarse))
    });
    let mut fine = Vec::with_capacity(rows.len());
    let mut coarse = Vec::with_capacity(rows.len());
    for r in rows {
        let (a, b) = r?;
        fine.push(a);
        coarse.push(b);
    }
    let (mean, se) = mean_stderr(&fine);
    let (mean_coarse, _) = mean_stderr(&coarse);
    let value = mean.max(0.0).sqrt();
    let value_coarse = mean_coarse.max(0.0).sqrt();
    let unstable = value > 0.0 && ((value - value_coarse).abs() / value) > 0.10;
    let stderr = if value > 0.0 { se / (2.0 * value) } else { se.sqrt() };
    Ok(SobolevEstimate { value, stderr, unstable })
}

/// A finite sum of elementary tensors on X^k, kept as explicit
/// representations (lists of terms, each a factor list of bumps).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFunction {
    reps: Vec<Vec<Vec<Bump>>>,
    arity: usize,
}

impl TensorFunction {
    /// Start from a single representation.
    pub fn new(terms: Vec<Vec<Bump>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(MixError::InvalidInput("empty tensor term list".into()));
        }
        let arity = terms[0].len();
        if arity == 0 || terms.iter().any(|t| t.len() != arity) {
            return Err(MixError::InvalidInput(
                "tensor terms must share a positive arity".into(),
            ));
        }
        Ok(Self { reps: vec![terms], arity })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Record an alternative representation of the same function. The
    /// caller asserts pointwise equality; the norm only improves.
    pub fn push_representation(&mut self, terms: Vec<Vec<Bump>>) -> Result<()> {
        if terms.iter().any(|t| t.len() != self.arity) || terms.is_empty() {
            return Err(MixError::InvalidInput("representation arity mismatch".into()));
        }
        self.reps.push(terms);
        Ok(())
    }

    pub fn eval(&self, points: &[XPoint]) -> Result<f64> {
        if points.len() != self.arity {
            return Err(MixError::InvalidInput("tensor arity mismatch at eval".into()));
        }
        let terms = &self.reps[0];
        let mut total = 0.0;
        for term in terms {
            let mut prod = 1.0;
            for (factor, p) in term.iter().zip(points) {
                prod *= factor.eval(p);
            }
            total += prod;
        }
        Ok(total)
    }
}

/// Projective tensor norm upper bound: the minimum over stored
/// representations of the sum over terms of the product of factor norms.
/// No search over equivalent representations is attempted.
pub fn projective_norm(t: &TensorFunction, cfg: &SobolevConfig) -> Result<f64> {
    let mut best = f64::INFINITY;
    for rep in &t.reps {
        let mut sum = 0.0;
        for term in rep {
            let mut prod = 1.0;
            for factor in term {
                prod *= sobolev_norm(&TestFn::Bump(*factor), cfg)?.value;
            }
            sum += prod;
        }
        best = best.min(sum);
    }
    Ok(best)
}

/// Empirical constants for the norm axioms N1-N4 over a bump dictionary
/// and a probe set; finite entries constitute a pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormAxiomReport {
    /// sup ||phi||_inf / S_d(phi) over the dictionary.
    pub n1_max_ratio: f64,
    /// (rho_G(g, e), sup_phi ||phi - g phi||_inf / S_d(phi)) per probe.
    pub n2_points: Vec<(f64, f64)>,
    pub n2_slope: f64,
    pub n2_r_squared: f64,
    /// (log ||g||_op, log sup_phi S_d(g phi) / S_d(phi)) per probe.
    pub n3_points: Vec<(f64, f64)>,
    pub n3_sigma_hat: f64,
    pub n3_r_squared: f64,
    /// sup over dictionary pairs of S_d(phi psi) / (S_{d+1}(phi) S_{d+1}(psi)),
    /// present when d + 1 stays within the stability cap.
    pub n4_max_ratio: Option<f64>,
}

const SUP_SAMPLES: u64 = 4_000;
const SUP_STREAM: u64 = 0x0053_5550;

/// Estimate the uniform norm of f by maximizing over Haar samples plus
/// perturbations of the dictionary centers.
fn sup_norm(f: &TestFn, centers: &[XPoint], seed: u64) -> Result<f64> {
    let vals = par_map_indexed(SUP_SAMPLES, |i| {
        let p = if (i as usize) < centers.len() {
            centers[i as usize]
        } else {
            haar_point(seed ^ SUP_STREAM, i)
        };
        f.eval(&p).map(f64::abs)
    });
    let mut best = 0.0f64;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

pub fn verify_norm_axioms(
    dictionary: &[Bump],
    probes: &[GroupElement],
    cfg: &SobolevConfig,
) -> Result<NormAxiomReport> {
    if dictionary.is_empty() || probes.is_empty() {
        return Err(MixError::InvalidInput(
            "norm-axiom harness needs a dictionary and probes".into(),
        ));
    }
    let centers: Vec<XPoint> = dictionary.iter().map(|b| b.center).collect();
    let norms: Vec<f64> = dictionary
        .iter()
        .map(|b| Ok(sobolev_norm(&TestFn::Bump(*b), cfg)?.value))
        .collect::<Result<_>>()?;

    let mut n1 = 0.0f64;
    for (b, s) in dictionary.iter().zip(&norms) {
        // Radial profile peaks at the center: ||phi||_inf = |amp| e^{-1}
        // for an embedded support; confirmed against sampling.
        let sup = sup_norm(&TestFn::Bump(*b), &centers, cfg.seed)?
            .max(b.amplitude.abs() * (-1.0f64).exp());
        n1 = n1.max(sup / s);
    }

    let id = GroupElement::identity();
    let mut n2_points = Vec::new();
    let mut n3_points = Vec::new();
    for g in probes {
        let dist = cartan_distance(&id, g)?;
        let mut worst2 = 0.0f64;
        let mut worst3 = 0.0f64;
        for (b, s) in dictionary.iter().zip(&norms) {
            let phi = TestFn::Bump(*b);
            let moved = TestFn::translated(*g, phi.clone());
            let diff = TestFn::Sum(
                Box::new(phi.clone()),
                Box::new(TestFn::Scaled(-1.0, Box::new(moved.clone()))),
            );
            let sup = sup_norm(&diff, &centers, cfg.seed)?;
            worst2 = worst2.max(sup / s);
            let s_moved = sobolev_norm(&moved, cfg)?.value;
            worst3 = worst3.max(s_moved / s);
        }
        n2_points.push((dist, worst2));
        n3_points.push((op_norm(g).ln(), worst3.max(1e-300).ln()));
    }
    let (n2_slope, _, n2_r2) = linear_fit(&n2_points);
    let (n3_sigma_hat, _, n3_r2) = linear_fit(&n3_points);

    let n4 = if cfg.d < 3 {
        let up = SobolevConfig { d: cfg.d + 1, ..*cfg };
        let mut worst = 0.0f64;
        for b1 in dictionary {
            for b2 in dictionary {
                let prod = TestFn::Product(
                    Box::new(TestFn::Bump(*b1)),
                    Box::new(TestFn::Bump(*b2)),
                );
                let num = sobolev_norm(&prod, cfg)?.value;
                let den = sobolev_norm(&TestFn::Bump(*b1), &up)?.value
                    * sobolev_norm(&TestFn::Bump(*b2), &up)?.value;
                if den > 0.0 {
                    worst = worst.max(num / den);
                }
            }
        }
        Some(worst)
    } else {
        None
    };

    Ok(NormAxiomReport {
        n1_max_ratio: n1,
        n2_points,
        n2_slope,
        n2_r_squared: n2_r2,
        n3_points,
        n3_sigma_hat,
        n3_r_squared: n3_r2,
        n4_max_ratio: n4,
    })
}
