//! Tensorization of convex transport inequalities: if `α_i(𝒯_{c_i}) ≤ H`
//! holds on each factor, the inf-convolution `α₁□α₂` works on the product
//! space under the sum cost. The n-fold self-convolution collapses to
//! `n·α(t/n)`, which is dimension-free exactly for linear rates.

use crate::duality::{best_alpha, primal_check, PotentialFamily, PrimalReport, TransportFunctional};
use crate::measures::{product_measure, ProbMeasure};
use crate::ratefn::{inf_convolution, RateFunction};
use crate::transport::{tensor_cost, CostMatrix};
use crate::{Error, Result};

/// The product-space rate for two factor rates: their inf-convolution.
pub fn tensorize_alpha(a1: &RateFunction, a2: &RateFunction) -> Result<RateFunction> {
    inf_convolution(a1, a2)
}

/// The n-fold self-convolution `α^{□n}(t) = n·α(t/n)`.
pub fn tensorize_n(alpha: &RateFunction, n: u32) -> Result<RateFunction> {
    alpha.require_class_c()?;
    if n < 1 {
        return Err(Error::Domain("tensorize_n needs n >= 1".into()));
    }
    if n == 1 {
        return Ok(alpha.clone());
    }
    RateFunction::scaled(n as f64, 1.0 / n as f64, alpha.clone())
}

/// Sweeps the product simplex checking
/// `α₁□α₂(𝒯_{c₁⊕c₂}(μ₁⊗μ₂, ν)) ≤ H(ν|μ₁⊗μ₂)`. The verdict is meaningful
/// when the factor inequalities themselves hold.
pub fn verify_product_tci(
    mu1: &ProbMeasure,
    mu2: &ProbMeasure,
    c1: &CostMatrix,
    c2: &CostMatrix,
    a1: &RateFunction,
    a2: &RateFunction,
    h: f64,
) -> Result<PrimalReport> {
    if c1.rows() != mu1.len() || c1.cols() != mu1.len() {
        return Err(Error::DimensionMismatch(c1.rows(), mu1.len()));
    }
    if c2.rows() != mu2.len() || c2.cols() != mu2.len() {
        return Err(Error::DimensionMismatch(c2.rows(), mu2.len()));
    }
    let prod = product_measure(mu1, mu2)?;
    if prod.len() > 4 {
        return Err(Error::BudgetExceeded(format!(
            "product sweep limited to 4 points, got {}",
            prod.len()
        )));
    }
    let cost = tensor_cost(c1, c2)?;
    let conv = tensorize_alpha(a1, a2)?;
    primal_check(&conv, &prod, &TransportFunctional::Cost(cost), h)
}

/// Dimension-free tensorization diagnostic for a metric cost: the property
/// forces `α = 0` or a Dirac base measure, so the report records whether μ
/// is Dirac, whether the best rate vanishes identically, and the fitted
/// slope of the best rate near zero (a nonzero linear rate would keep the
/// slope bounded away from zero).
#[derive(Debug, Clone)]
pub struct DimensionFreeReport {
    pub is_dirac: bool,
    pub best_alpha_zero: bool,
    /// max of `best_alpha(t)/t` over probe points near zero.
    pub small_t_slope: f64,
    /// For non-Dirac μ: the slope at zero vanishes, excluding nonzero
    /// linear rates.
    pub linear_rate_excluded: bool,
}

pub fn dimension_free_diagnostic(
    mu: &ProbMeasure,
    d: &CostMatrix,
) -> Result<DimensionFreeReport> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("dimension_free_diagnostic needs a metric".into()));
    }
    let is_dirac = mu.weights().iter().filter(|&&w| w > 0.0).count() == 1;
    let family = PotentialFamily::lipschitz_ball(d, mu)?;
    let alpha = best_alpha(&family, mu)?;
    let sup = alpha.domain_sup();
    let best_alpha_zero = if sup.is_finite() && sup > 0.0 {
        (0..=64).all(|i| alpha.eval(sup * i as f64 / 64.0) <= 1e-10)
    } else {
        alpha.eval(0.0) <= 1e-10 && sup == 0.0
    };
    let probe: [f64; 2] = [1e-3, 1e-2];
    let small_t_slope = probe
        .iter()
        .map(|&t| {
            let v = alpha.eval(t.min(sup.max(1e-300)));
            if v.is_finite() { v / t } else { f64::INFINITY }
        })
        .fold(0.0f64, f64::max);
    Ok(DimensionFreeReport {
        is_dirac,
        best_alpha_zero,
        small_t_slope,
        linear_rate_excluded: !is_dirac && small_t_slope < 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::FiniteSpace;
    use crate::transport::ot_value;

    fn measure(w: &[f64]) -> ProbMeasure {
        let space = FiniteSpace::new(w.len()).unwrap();
        ProbMeasure::from_unnormalized(space, w.to_vec()).unwrap()
    }

    #[test]
    fn tensorize_alpha_cases() {
        let zero = RateFunction::zero();
        let p = RateFunction::pinsker();
        let r = tensorize_alpha(&p, &zero).unwrap();
        assert_eq!(r.eval(1.3), 0.0);
        let q = RateFunction::quadratic(1.0).unwrap();
        let r = tensorize_alpha(&q, &q).unwrap();
        assert!((r.eval(2.0) - 2.0).abs() < 1e-12);
        let r = tensorize_alpha(&p, &p).unwrap();
        assert!((r.eval(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensorize_n_cases() {
        let p = RateFunction::pinsker();
        let one = tensorize_n(&p, 1).unwrap();
        assert_eq!(one.eval(2.0), p.eval(2.0));

        // Linear rates are fixed points for every n.
        let lin = RateFunction::linear(0.7).unwrap();
        for n in [2u32, 5, 9] {
            let r = tensorize_n(&lin, n).unwrap();
            for k in 0..10 {
                let t = k as f64 / 2.0;
                assert!((r.eval(t) - lin.eval(t)).abs() < 1e-12);
            }
        }

        // Quadratic a t² becomes (a/n) t².
        let q = RateFunction::quadratic(2.0).unwrap();
        let r = tensorize_n(&q, 4).unwrap();
        assert!((r.eval(3.0) - 0.5 * 9.0).abs() < 1e-12);

        // n α(t/n) evaluated at n t is n α(t), exactly at dyadic points.
        let sq = RateFunction::sqrt_form(0.8).unwrap();
        let r = tensorize_n(&sq, 4).unwrap();
        for k in 0..12 {
            let t = k as f64 / 8.0;
            assert_eq!(r.eval(4.0 * t), 4.0 * sq.eval(t));
        }
        assert!(tensorize_n(&q, 0).is_err());
    }

    #[test]
    fn product_sweep_passes_with_best_rates() {
        let mu = measure(&[0.5, 0.5]);
        let d = CostMatrix::hamming(2);
        let fam = PotentialFamily::lipschitz_ball(&d, &mu).unwrap();
        let alpha = best_alpha(&fam, &mu).unwrap();
        let rep = verify_product_tci(&mu, &mu, &d, &d, &alpha, &alpha, 0.05).unwrap();
        assert!(rep.holds, "gap {}", rep.worst_gap);

        // Inflating a factor rate produces a witnessed violation.
        let inflated = RateFunction::scaled(3.0, 1.0, alpha.clone()).unwrap();
        let rep = verify_product_tci(&mu, &mu, &d, &d, &inflated, &alpha, 0.05).unwrap();
        assert!(!rep.holds);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn product_cost_subadditive_on_product_measures() {
        // 𝒯_{c⊕c}(μ1⊗μ2, ν1⊗ν2) ≤ 𝒯_c(μ1,ν1) + 𝒯_c(μ2,ν2).
        let d = CostMatrix::hamming(2);
        let dd = tensor_cost(&d, &d).unwrap();
        let cases = [
            ([0.5, 0.5], [0.8, 0.2], [0.3, 0.7], [0.6, 0.4]),
            ([0.9, 0.1], [0.2, 0.8], [0.5, 0.5], [0.5, 0.5]),
        ];
        for (m1, n1, m2, n2) in cases {
            let mu1 = measure(&m1);
            let nu1 = measure(&n1);
            let mu2 = measure(&m2);
            let nu2 = measure(&n2);
            let lhs = ot_value(
                &product_measure(&mu1, &mu2).unwrap(),
                &product_measure(&nu1, &nu2).unwrap(),
                &dd,
            )
            .unwrap();
            let rhs = ot_value(&mu1, &nu1, &d).unwrap() + ot_value(&mu2, &nu2, &d).unwrap();
            assert!(lhs <= rhs + 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn dimension_free_branches() {
        let d = CostMatrix::hamming(2);
        let dirac = measure(&[1.0, 0.0]);
        let rep = dimension_free_diagnostic(&dirac, &d).unwrap();
        assert!(rep.is_dirac);
        assert!(rep.best_alpha_zero);

        let uniform = measure(&[0.5, 0.5]);
        let rep = dimension_free_diagnostic(&uniform, &d).unwrap();
        assert!(!rep.is_dirac);
        assert!(!rep.best_alpha_zero);
        assert!(rep.small_t_slope < 0.05, "slope {}", rep.small_t_slope);
        assert!(rep.linear_rate_excluded);

        // A nonzero linear rate fails the primal sweep near zero for a
        // non-Dirac base measure.
        let lin = RateFunction::linear(1.0).unwrap();
        let rep = primal_check(&lin, &uniform, &TransportFunctional::Cost(d), 1e-3).unwrap();
        assert!(!rep.holds);
    }
}
