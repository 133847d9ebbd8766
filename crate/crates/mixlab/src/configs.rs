//! Configuration search: realize a target tuple, up to a global isometry
//! and error epsilon, on a single lattice orbit; plus the epsilon-density
//! check for the orbit distance set.

use crate::error::{MixError, Result};
use crate::hyperbolic::{self, HPoint, LatticeElement};
use crate::lie::{cartan_distance, GroupElement};
use crate::rng::stream_rng;
use crate::util::linear_fit;
use rand::Rng;
use serde::{Deserialize, Serialize};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Target tuple, either as points of the hyperbolic plane or as group
/// elements (compared through the bi-K-invariant Cartan distance, which is
/// the plane distance of the base-point orbit scaled by 1/sqrt 2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Targets {
    Points(Vec<HPoint>),
    Groups(Vec<GroupElement>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Points(v) => v.len(),
            Targets::Groups(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plane positions of the targets; the common currency of the search.
    fn positions(&self) -> Vec<HPoint> {
        match self {
            Targets::Points(v) => v.clone(),
            Targets::Groups(v) => {
                v.iter().map(|g| hyperbolic::mobius_act_group(g, &HPoint::i())).collect()
            }
        }
    }

    /// Factor converting plane distances to the distance reported for this
    /// target kind.
    fn distance_scale(&self) -> f64 {
        match self {
            Targets::Points(_) => 1.0,
            Targets::Groups(_) => 1.0 / SQRT2,
        }
    }
}

/// Minimal pairwise distance of the target tuple.
pub fn width(targets: &Targets) -> Result<f64> {
    if targets.len() < 2 {
        return Err(MixError::InvalidInput("width needs at least two targets".into()));
    }
    let mut best = f64::INFINITY;
    match targets {
        Targets::Points(v) => {
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    best = best.min(hyperbolic::hyp_dist(&v[i], &v[j]));
                }
            }
        }
        Targets::Groups(v) => {
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    best = best.min(cartan_distance(&v[i], &v[j])?);
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigRequest {
    pub targets: Targets,
    pub epsilon: f64,
    pub search_radius: f64,
    pub seed: u64,
    /// Also scan the first lattice element over the ball instead of pinning
    /// it to the identity; the slow oracle mode for small tuples.
    pub exhaustive: bool,
}

impl ConfigRequest {
    pub fn new(targets: Targets, epsilon: f64, search_radius: f64, seed: u64) -> Result<Self> {
        if targets.is_empty() {
            return Err(MixError::InvalidInput("empty target tuple".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MixError::InvalidInput(format!("epsilon = {epsilon} must be > 0")));
        }
        if !(search_radius >= 0.0 && search_radius.is_finite()) {
            return Err(MixError::InvalidInput("bad search radius".into()));
        }
        Ok(Self { targets, epsilon, search_radius, seed, exhaustive: false })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigResult {
    pub gammas: Vec<LatticeElement>,
    pub g: GroupElement,
    pub max_error: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub found: bool,
    pub best: ConfigResult,
}

/// Upper-triangular isometry mapping i to z.
fn translation_to(z: &HPoint) -> GroupElement {
    let s = z.y.sqrt();
    GroupElement::upper(z.x) * GroupElement::new(s, 0.0, 0.0, 1.0 / s).expect("y > 0")
}

/// Recompute all target distances from scratch for a candidate.
pub fn verify_result(targets: &Targets, gammas: &[LatticeElement], g: &GroupElement) -> Result<f64> {
    let positions = targets.positions();
    if positions.len() != gammas.len() {
        return Err(MixError::InvalidInput("tuple length mismatch".into()));
    }
    let scale = targets.distance_scale();
    let mut worst = 0.0f64;
    for (v, gamma) in positions.iter().zip(gammas) {
        let moved = hyperbolic::mobius_act_group(&g.checked_mul(&gamma.to_group())?, &HPoint::i());
        worst = worst.max(scale * hyperbolic::hyp_dist(v, &moved));
    }
    Ok(worst)
}

/// Searches for lattice elements and a global isometry realizing the
/// targets within epsilon.
///
/// The first lattice element is pinned to the identity (any other choice is
/// absorbed into g), the isometry is constrained to map the base point
/// exactly onto the first target with a free rotation angle, the angle is
/// scanned on a grid and refined by golden-section, and the remaining
/// lattice elements are chosen greedily per index (exact given the
/// isometry).
pub fn find_configuration(req: &ConfigRequest) -> Result<SearchOutcome> {
    let positions = req.targets.positions();
    let scale = req.targets.distance_scale();
    let k = positions.len();
    let tuple_width = if k >= 2 { width(&req.targets)? } else { 0.0 };

    let align = translation_to(&positions[0]);
    if k == 1 {
        let best = ConfigResult {
            gammas: vec![LatticeElement::identity()],
            g: align,
            max_error: 0.0,
            width: 0.0,
        };
        return Ok(SearchOutcome { found: true, best });
    }

    // The search radius must at least reach the farthest target from the
    // first; clamp the enumeration to a sane budget-bounded value.
    let ball = hyperbolic::enumerate_ball(req.search_radius)?;
    let orbit: Vec<HPoint> =
        ball.iter().map(|gamma| hyperbolic::mobius_act(gamma, &HPoint::i())).collect();
    // Targets pulled back through the exact first alignment.
    let pulled: Vec<HPoint> = positions
        .iter()
        .skip(1)
        .map(|v| hyperbolic::mobius_act_group(&align.inverse(), v))
        .collect();

    let gamma1_candidates: Vec<usize> = if req.exhaustive {
        (0..ball.len()).collect()
    } else {
        vec![ball.iter().position(|g| *g == LatticeElement::identity()).unwrap_or(0)]
    };

    let objective = |phi: f64, g1: usize| -> (f64, Vec<usize>) {
        // g = align . R_phi . (gamma_1 orbit alignment); the base stays on
        // target 1 only when gamma_1 = I, otherwise the pre-translation
        // moves gamma_1 . i back to i first.
        let pre = translation_to(&orbit[g1]).inverse();
        let rot = GroupElement::rotation(phi);
        let mut worst = 0.0f64;
        let mut picks = Vec::with_capacity(pulled.len());
        for u in &pulled {
            let target = hyperbolic::mobius_act_group(&rot.inverse(), u);
            let mut best = (f64::INFINITY, 0usize);
            for (idx, w) in orbit.iter().enumerate() {
                let moved = hyperbolic::mobius_act_group(&pre, w);
                let d = hyperbolic::hyp_dist(&moved, &target);
                if d < best.0 {
                    best = (d, idx);
                }
            }
            worst = worst.max(best.0);
            picks.push(best.1);
        }
        (worst, picks)
    };

    let mut champion: Option<(f64, f64, usize, Vec<usize>)> = None;
    const PHI_GRID: usize = 128;
    for &g1 in &gamma1_candidates {
        let mut local: Option<(f64, f64)> = None;
        for step in 0..PHI_GRID {
            let phi = std::f64::consts::PI * step as f64 / PHI_GRID as f64;
            let (err, _) = objective(phi, g1);
            if local.is_none_or(|l| err < l.0) {
                local = Some((err, phi));
            }
        }
        let (_, phi0) = local.unwrap();
        // Golden-section refinement around the best grid angle.
        let span = std::f64::consts::PI / PHI_GRID as f64;
        let (mut lo, mut hi) = (phi0 - span, phi0 + span);
        let inv_gold = 0.618_033_988_749_895;
        for _ in 0..40 {
            let m1 = hi - inv_gold * (hi - lo);
            let m2 = lo + inv_gold * (hi - lo);
            if objective(m1, g1).0 <= objective(m2, g1).0 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let phi = 0.5 * (lo + hi);
        let (err, picks) = objective(phi, g1);
        if champion.as_ref().is_none_or(|c| err < c.0) {
            champion = Some((err, phi, g1, picks));
        }
    }

    let (err, phi, g1, picks) = champion.expect("nonempty candidate set");
    let pre = translation_to(&orbit[g1]).inverse();
    let g = align
        .checked_mul(&GroupElement::rotation(phi))?
        .checked_mul(&pre)?;
    let mut gammas = vec![ball[g1]];
    gammas.extend(picks.iter().map(|&idx| ball[idx]));
    let max_error = scale * err;
    let verified = verify_result(&req.targets, &gammas, &g)?;
    debug_assert!((verified - max_error).abs() < 1e-9, "verification drift");
    let best = ConfigResult { gammas, g, max_error: verified, width: tuple_width };
    Ok(SearchOutcome { found: verified < req.epsilon, best })
}

/// Report of the epsilon-density check on the orbit distance set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub interval: (f64, f64),
    pub max_gap: f64,
    pub gap_location: (f64, f64),
    pub dense: bool,
    pub degenerate: bool,
}

/// Enumerates the orbit distance set up to `upper` and reports the maximal
/// gap inside [c log(1/epsilon), upper] together with the verdict
/// gap <= 2 epsilon.
pub fn density_check(epsilon: f64, c: f64, upper: f64) -> Result<DensityReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MixError::InvalidInput("epsilon must lie in (0, 1)".into()));
    }
    let lower = c * (1.0 / epsilon).ln();
    if upper <= lower {
        return Err(MixError::InvalidInput(format!(
            "upper = {upper} must exceed c log(1/eps) = {lower}"
        )));
    }
    let distances = hyperbolic::distance_set(upper)?;
    // Anchor the gap scan at the last value at or below the interval start
    // (or the start itself) and close it at the interval end.
    let mut nodes = vec![lower];
    nodes.extend(distances.iter().copied().filter(|&d| d > lower && d <= upper));
    nodes.push(upper);
    let degenerate = nodes.len() == 2 && !distances.iter().any(|&d| d > lower && d <= upper);
    let mut max_gap = 0.0f64;
    let mut gap_location = (lower, upper);
    for pair in nodes.windows(2) {
        let gap = pair[1] - pair[0];
        if gap > max_gap {
            max_gap = gap;
            gap_location = (pair[0], pair[1]);
        }
    }
    Ok(DensityReport {
        interval: (lower, upper),
        max_gap,
        gap_location,
        dense: max_gap <= 2.0 * epsilon,
        degenerate,
    })
}

/// One cell of the success table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub epsilon: f64,
    pub width: f64,
    pub trials: u64,
    pub successes: u64,
    pub mean_error: f64,
}

impl CellRecord {
    pub fn csv_header() -> &'static str {
        "epsilon,width,trials,successes,mean_error"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epsilon, self.width, self.trials, self.successes, self.mean_error
        )
    }
}

/// Runs randomized pair-target searches over an (epsilon, width) grid and
/// fits the success boundary width ~ c_hat log(1/epsilon).
pub fn estimate_constants(
    epsilons: &[f64],
    widths: &[f64],
    trials: u64,
    search_radius: f64,
    seed: u64,
) -> Result<(f64, Vec<CellRecord>)> {
    if epsilons.is_empty() || widths.is_empty() || trials == 0 {
        return Err(MixError::InvalidInput("empty experiment grid".into()));
    }
    let mut table = Vec::new();
    for (ei, &eps) in epsilons.iter().enumerate() {
        for (wi, &w) in widths.iter().enumerate() {
            let mut successes = 0u64;
            let mut err_sum = 0.0;
            for trial in 0..trials {
                // Common random numbers across epsilons: the target tuple
                // depends only on (width cell, trial).
                let mut rng = stream_rng(seed, wi as u64, trial);
                let alpha: f64 = rng.gen::<f64>() * std::f64::consts::PI;
                let tip = HPoint { x: 0.0, y: w.exp() };
                let v2 = hyperbolic::mobius_act_group(&GroupElement::rotation(alpha), &tip);
                let targets = Targets::Points(vec![HPoint::i(), v2]);
                let req = ConfigRequest::new(targets, eps, search_radius, seed)?;
                let out = find_configuration(&req)?;
                if out.found {
                    successes += 1;
                }
                err_sum += out.best.max_error;
            }
            table.push(CellRecord {
                epsilon: eps,
                width: w,
                trials,
                successes,
                mean_error: err_sum / trials as f64,
            });
            let _ = ei;
        }
    }
    // Success-boundary fit: per epsilon, the largest width still succeeding
    // in at least half the trials; regress against log(1/epsilon).
    let mut boundary = Vec::new();
    for &eps in epsilons {
        let best_w = table
            .iter()
            .filter(|c| c.epsilon == eps && 2 * c.successes >= c.trials)
            .map(|c| c.width)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_w.is_finite() {
            boundary.push(((1.0 / eps).ln(), best_w));
        }
    }
    let c_hat = if boundary.len() >= 2 {
        linear_fit(&boundary).0
    } else {
        0.0
    };
    Ok((c_hat, table))
}
