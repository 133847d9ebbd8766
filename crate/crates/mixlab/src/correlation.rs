//! Monte Carlo estimation of k-point correlations m((g1 . phi1) ... (gk . phik)),
//! product baselines, and the decay-exponent regression against the
//! separation statistic M_hat.

use crate::error::{MixError, Result};
use crate::homspace::{self, haar_point};
use crate::lie::{separation_stats, GroupElement};
use crate::rng::splitmix64;
use crate::testfn::TestFn;
use crate::util::{linear_fit, mean_stderr, par_map_indexed};
use serde::{Deserialize, Serialize};

/// How the k sample points are coupled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Coupling {
    /// All factors evaluated at the same Haar point.
    Diagonal,
    /// Each factor estimated from an independent Haar stream.
    Product,
    /// Diagonal measure pushed forward by a fixed offset tuple before the
    /// translated functions are applied.
    TranslatedDiagonal(Vec<GroupElement>),
}

impl Coupling {
    pub fn label(&self) -> &'static str {
        match self {
            Coupling::Diagonal => "diagonal",
            Coupling::Product => "product",
            Coupling::TranslatedDiagonal(_) => "translated-diagonal",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRequest {
    pub elements: Vec<GroupElement>,
    pub functions: Vec<TestFn>,
    pub samples: u64,
    pub seed: u64,
    pub coupling: Coupling,
    /// Free-form scalar recorded with the request (e.g. the geodesic time
    /// parametrizing a family); carried through to the CSV row.
    pub t_param: f64,
}

impl CorrelationRequest {
    pub fn new(
        elements: Vec<GroupElement>,
        functions: Vec<TestFn>,
        samples: u64,
        seed: u64,
        coupling: Coupling,
    ) -> Result<Self> {
        if elements.is_empty() || elements.len() != functions.len() {
            return Err(MixError::InvalidInput(
                "element and function lists must be nonempty and of equal length".into(),
            ));
        }
        if samples == 0 {
            return Err(MixError::InvalidInput("sample count must be >= 1".into()));
        }
        if let Coupling::TranslatedDiagonal(offsets) = &coupling {
            if offsets.len() != elements.len() {
                return Err(MixError::InvalidInput(
                    "offset tuple length must equal k".into(),
                ));
            }
        }
        Ok(Self { elements, functions, samples, seed, coupling, t_param: 0.0 })
    }

    pub fn with_t_param(mut self, t: f64) -> Self {
        self.t_param = t;
        self
    }

    pub fn k(&self) -> usize {
        self.elements.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub k: usize,
    pub samples: u64,
    pub seed: u64,
    pub coupling: String,
    pub t_param: f64,
    pub estimate: f64,
    /// Standard error of estimate - baseline (the quantity abs_error bands).
    pub stderr: f64,
    pub baseline: f64,
    pub abs_error: f64,
    pub m_hat: f64,
    pub q: f64,
}

impl CorrelationRecord {
    pub fn csv_header() -> &'static str {
        "k,samples,seed,coupling,t_params,estimate,stderr,baseline,abs_error,M_hat,q"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.samples,
            self.seed,
            self.coupling,
            self.t_param,
            self.estimate,
            self.stderr,
            self.baseline,
            self.abs_error,
            self.m_hat,
            self.q
        )
    }
}

/// Seed for the independent Haar stream of factor j; factor 0 shares the
/// request stream so the k = 1 diagonal estimate and its baseline follow
/// the identical sample path.
fn factor_seed(seed: u64, j: usize) -> u64 {
    if j == 0 {
        seed
    } else {
        splitmix64(seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

/// Independent MC estimates of each m(phi_j), multiplied, with first-order
/// error propagation.
pub fn product_baseline(functions: &[TestFn], samples: u64, seed: u64) -> Result<(f64, f64)> {
    if functions.is_empty() {
        return Err(MixError::InvalidInput("empty function list".into()));
    }
    if samples == 0 {
        return Err(MixError::InvalidInput("sample count must be >= 1".into()));
    }
    let mut means = Vec::with_capacity(functions.len());
    let mut errs = Vec::with_capacity(functions.len());
    for (j, f) in functions.iter().enumerate() {
        let s = factor_seed(seed, j);
        let values =
            par_map_indexed(samples, |i| f.eval(&haar_point(s, i)).expect("bump evaluation"));
        let (m, se) = mean_stderr(&values);
        means.push(m);
        errs.push(se);
    }
    let value: f64 = means.iter().product();
    let mut var = 0.0;
    for (j, err) in errs.iter().enumerate() {
        let others: f64 = means
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, m)| m * m)
            .product();
        var += err * err * others;
    }
    Ok((value, var.sqrt()))
}

/// Estimate the k-point correlation for the requested coupling and compare
/// it with the product baseline.
pub fn correlate(req: &CorrelationRequest) -> Result<CorrelationRecord> {
    let k = req.k();
    let inverses: Vec<GroupElement> = req.elements.iter().map(|g| g.inverse()).collect();

    let (estimate, est_stderr) = match &req.coupling {
        Coupling::Diagonal => {
            let values = diagonal_values(req, &inverses, None)?;
            mean_stderr(&values)
        }
        Coupling::TranslatedDiagonal(offsets) => {
            let values = diagonal_values(req, &inverses, Some(offsets))?;
            mean_stderr(&values)
        }
        Coupling::Product => {
            // Each translated factor from its own stream; same propagation
            // as the baseline.
            let translated: Vec<TestFn> = req
                .functions
                .iter()
                .zip(&req.elements)
                .map(|(f, g)| TestFn::translated(*g, f.clone()))
                .collect();
            product_baseline(&translated, req.samples, req.seed)?
        }
    };

    let (baseline, base_stderr) = product_baseline(&req.functions, req.samples, req.seed)?;
    let (m_hat, q) = if k >= 2 {
        let (m, q, _) = separation_stats(&req.elements)?;
        (m, q)
    } else {
        (1.0, 1.0)
    };
    let stderr = if matches!(req.coupling, Coupling::Diagonal) && k == 1 {
        // Identical estimator path: the difference is exactly zero.
        0.0
    } else {
        (est_stderr * est_stderr + base_stderr * base_stderr).sqrt()
    };
    Ok(CorrelationRecord {
        k,
        samples: req.samples,
        seed: req.seed,
        coupling: req.coupling.label().to_string(),
        t_param: req.t_param,
        estimate,
        stderr,
        baseline,
        abs_error: (estimate - baseline).abs(),
        m_hat,
        q,
    })
}

fn diagonal_values(
    req: &CorrelationRequest,
    inverses: &[GroupElement],
    offsets: Option<&[GroupElement]>,
) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = par_map_indexed(req.samples, |i| {
        let x = haar_point(req.seed, i);
        let mut product = 1.0;
        for (j, f) in req.functions.iter().enumerate() {
            let xj = match offsets {
                Some(off) => homspace::act(&off[j], &x)?,
                None => x,
            };
            product *= f.eval(&homspace::act(&inverses[j], &xj)?)?;
        }
        Ok(product)
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub delta_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Records dropped because |estimate - baseline| <= 2 stderr.
    pub excluded: usize,
}

/// Least-squares fit of log abs_error against log M_hat; slope is -delta.
/// Noise-dominated records are excluded by the 2-stderr rule and counted.
pub fn decay_fit(records: &[CorrelationRecord]) -> Result<DecayFit> {
    let usable: Vec<&CorrelationRecord> = records
        .iter()
        .filter(|r| r.abs_error > 2.0 * r.stderr && r.abs_error > 0.0 && r.m_hat > 0.0)
        .collect();
    let excluded = records.len() - usable.len();
    let mut m_hats: Vec<f64> = usable.iter().map(|r| r.m_hat).collect();
    m_hats.sort_by(f64::total_cmp);
    m_hats.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if usable.len() < 3 || m_hats.len() < 3 {
        return Err(MixError::InsufficientData(format!(
            "{} usable records over {} distinct separations (need 3)",
            usable.len(),
            m_hats.len()
        )));
    }
    let points: Vec<(f64, f64)> = usable
        .iter()
        .map(|r| (r.m_hat.ln(), r.abs_error.ln()))
        .collect();
    let (slope, intercept, r2) = linear_fit(&points);
    Ok(DecayFit { delta_hat: -slope, intercept, r_squared: r2, excluded })
}

/// (log M_hat, log abs_error) pairs for the usable records, in input order.
pub fn decay_plot_points(records: &[CorrelationRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.abs_error > 2.0 * r.stderr && r.abs_error > 0.0 && r.m_hat > 0.0)
        .map(|r| (r.m_hat.ln(), r.abs_error.ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homspace::XPoint;
    use crate::testfn::Bump;
    use approx::assert_relative_eq;

    fn unit_bump() -> Bump {
        Bump::unit_mass(XPoint::new(0.0, 1.2, 0.0).unwrap(), 0.6).unwrap()
    }

    fn synthetic(m_hat: f64, abs_error: f64, stderr: f64) -> CorrelationRecord {
        CorrelationRecord {
            k: 2,
            samples: 1,
            seed: 0,
            coupling: "diagonal".into(),
            t_param: 0.0,
            estimate: abs_error,
            stderr,
            baseline: 0.0,
            abs_error,
            m_hat,
            q: m_hat,
        }
    }

    #[test]
    fn k1_estimate_matches_baseline_exactly() {
        let req = CorrelationRequest::new(
            vec![GroupElement::identity()],
            vec![TestFn::bump(unit_bump())],
            2_000,
            7,
            Coupling::Diagonal,
        )
        .unwrap();
        let rec = correlate(&req).unwrap();
        assert_relative_eq!(rec.estimate, rec.baseline, max_relative = 1e-12);
        assert_eq!(rec.abs_error, 0.0);
        assert_eq!(rec.stderr, 0.0);
    }

    #[test]
    fn identity_translates_collapse_to_power_mean() {
        let phi = TestFn::bump(unit_bump());
        let req = CorrelationRequest::new(
            vec![GroupElement::identity(); 2],
            vec![phi.clone(), phi.clone()],
            4_000,
            13,
            Coupling::Diagonal,
        )
        .unwrap();
        let rec = correlate(&req).unwrap();
        // Direct estimate of m(phi^2) on the same stream.
        let direct = mean_stderr(&par_map_indexed(4_000, |i| {
            let x = haar_point(13, i);
            phi.eval(&x).unwrap().powi(2)
        }))
        .0;
        assert_relative_eq!(rec.estimate, direct, max_relative = 1e-10);
    }

    #[test]
    fn baseline_matches_analytic_mass() {
        let b = unit_bump();
        let (value, se) = product_baseline(&[TestFn::bump(b)], 40_000, 3).unwrap();
        assert!((value - b.mass()).abs() < 3.0 * se, "value {value} mass {}", b.mass());
    }

    #[test]
    fn mean_normalized_baseline_vanishes() {
        let f = TestFn::mean_normalized(unit_bump());
        let (value, se) = product_baseline(&[f], 20_000, 21).unwrap();
        assert!(value.abs() < 3.0 * se.max(1e-12), "value {value} se {se}");
    }

    #[test]
    fn repeated_factor_baseline_is_power() {
        let phi = TestFn::bump(unit_bump());
        let (single, _) = product_baseline(std::slice::from_ref(&phi), 5_000, 5).unwrap();
        let (triple, _) =
            product_baseline(&[phi.clone(), phi.clone(), phi.clone()], 5_000, 5).unwrap();
        // Factors use independent streams, so compare within propagated error.
        let (s1, _) = product_baseline(std::slice::from_ref(&phi), 5_000, 5).unwrap();
        assert_relative_eq!(s1, single);
        assert!((triple - single.powi(3)).abs() < 0.1 * single.powi(3).abs().max(0.01),
            "triple {triple} vs {}", single.powi(3));
    }

    #[test]
    fn decay_fit_exact_power_law() {
        let recs: Vec<CorrelationRecord> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&m| synthetic(m, m.powf(-0.5), 1e-9))
            .collect();
        let fit = decay_fit(&recs).unwrap();
        assert_relative_eq!(fit.delta_hat, 0.5, max_relative = 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-9);
        assert_eq!(fit.excluded, 0);
    }

    #[test]
    fn decay_fit_noisy_power_law() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(1, 2, 3);
        let recs: Vec<CorrelationRecord> = (0..20)
            .map(|i| {
                let m = 1.5f64.powi(i + 1);
                let noise = 1.0 + 0.05 * (rng.gen::<f64>() - 0.5);
                synthetic(m, m.powf(-0.5) * noise, 1e-12)
            })
            .collect();
        let fit = decay_fit(&recs).unwrap();
        assert!((fit.delta_hat - 0.5).abs() < 0.1, "delta {}", fit.delta_hat);
    }

    #[test]
    fn decay_fit_constant_error_gives_zero() {
        let recs: Vec<CorrelationRecord> =
            [2.0, 4.0, 8.0].iter().map(|&m| synthetic(m, 0.25, 1e-9)).collect();
        let fit = decay_fit(&recs).unwrap();
        assert_relative_eq!(fit.delta_hat, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_fit_requires_three_usable() {
        let recs = vec![synthetic(2.0, 0.1, 0.2), synthetic(4.0, 0.05, 0.2)];
        assert!(matches!(decay_fit(&recs), Err(MixError::InsufficientData(_))));
    }

    #[test]
    fn translated_diagonal_needs_matching_offsets() {
        let phi = TestFn::bump(unit_bump());
        let err = CorrelationRequest::new(
            vec![GroupElement::identity(); 2],
            vec![phi.clone(), phi],
            10,
            0,
            Coupling::TranslatedDiagonal(vec![GroupElement::identity()]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn csv_row_roundtrip_shape() {
        let r = synthetic(2.0, 0.1, 0.01);
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), CorrelationRecord::csv_header().split(',').count());
    }
}
