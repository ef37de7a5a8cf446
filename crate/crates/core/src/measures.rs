//! Finite probability spaces, measures, entropy, variation norms, products
//! and conditionals.
//!
//! Conventions: `0·log 0 = 0`, and a failure of absolute continuity makes
//! the relative entropy `+∞` (an ordinary extended value, never an error).
//! The total variation norm here is the *sum* norm `Σ|ν_i − μ_i|`, i.e. the
//! supremum of `∫φ d(ν−μ)` over `|φ| ≤ 1`; it takes values in `[0, 2]`.

use std::sync::Arc;

use crate::{Error, Result};

/// Weight vectors must sum to one within this tolerance at construction.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// An indexed finite point set, optionally labelled and optionally embedded
/// in ℝ^q (coordinates feed norm-induced metrics).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    n: usize,
    labels: Option<Vec<String>>,
    coords: Option<Vec<Vec<f64>>>,
    /// Set when the space was built as a product; `(n1, n2)` with row-major
    /// index order `(i, j) ↦ i·n2 + j`.
    product: Option<(usize, usize)>,
}

impl FiniteSpace {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        Self::with_parts(n, None, None, None)
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Arc<Self>> {
        let n = labels.len();
        Self::with_parts(n, Some(labels), None, None)
    }

    pub fn with_coords(coords: Vec<Vec<f64>>) -> Result<Arc<Self>> {
        let n = coords.len();
        Self::with_parts(n, None, Some(coords), None)
    }

    pub fn with_parts(
        n: usize,
        labels: Option<Vec<String>>,
        coords: Option<Vec<Vec<f64>>>,
        product: Option<(usize, usize)>,
    ) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidSpace("point count must be >= 1".into()));
        }
        if let Some(ref ls) = labels {
            if ls.len() != n {
                return Err(Error::DimensionMismatch(ls.len(), n));
            }
            let mut seen = std::collections::HashSet::new();
            for l in ls {
                if !seen.insert(l) {
                    return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
                }
            }
        }
        if let Some(ref cs) = coords {
            if cs.len() != n {
                return Err(Error::DimensionMismatch(cs.len(), n));
            }
            let q = cs.first().map_or(0, |c| c.len());
            if cs.iter().any(|c| c.len() != q) {
                return Err(Error::InvalidSpace("ragged coordinate rows".into()));
            }
        }
        if let Some((n1, n2)) = product {
            if n1 * n2 != n {
                return Err(Error::InvalidSpace(format!(
                    "product declaration {n1}x{n2} != {n}"
                )));
            }
        }
        Ok(Arc::new(FiniteSpace { n, labels, coords, product }))
    }

    /// Product of two spaces, points ordered row-major.
    pub fn product(a: &Arc<Self>, b: &Arc<Self>) -> Result<Arc<Self>> {
        let labels = match (&a.labels, &b.labels) {
            (Some(la), Some(lb)) => Some(
                la.iter()
                    .flat_map(|x| lb.iter().map(move |y| format!("({x},{y})")))
                    .collect(),
            ),
            _ => None,
        };
        Self::with_parts(a.n * b.n, labels, None, Some((a.n, b.n)))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn product_factors(&self) -> Option<(usize, usize)> {
        self.product
    }
}

/// A probability measure on a [`FiniteSpace`]: nonnegative weights summing
/// to one. Weights are renormalized exactly once at construction so that
/// downstream linear programs see consistent marginals.
#[derive(Debug, Clone)]
pub struct ProbMeasure {
    space: Arc<FiniteSpace>,
    w: Vec<f64>,
}

impl ProbMeasure {
    pub fn new(space: Arc<FiniteSpace>, w: Vec<f64>) -> Result<Self> {
        if w.len() != space.len() {
            return Err(Error::DimensionMismatch(w.len(), space.len()));
        }
        let mut sum = 0.0;
        for (i, &x) in w.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Negative { idx: i, value: x });
            }
            sum += x;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        let w = w.into_iter().map(|x| x / sum).collect();
        Ok(ProbMeasure { space, w })
    }

    /// Normalizes an arbitrary nonnegative weight vector (used by samplers
    /// and grid sweeps where the raw weights are counts).
    pub fn from_unnormalized(space: Arc<FiniteSpace>, w: Vec<f64>) -> Result<Self> {
        if w.len() != space.len() {
            return Err(Error::DimensionMismatch(w.len(), space.len()));
        }
        let mut sum = 0.0;
        for (i, &x) in w.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Negative { idx: i, value: x });
            }
            sum += x;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let w = w.into_iter().map(|x| x / sum).collect();
        Ok(ProbMeasure { space, w })
    }

    pub fn uniform(space: Arc<FiniteSpace>) -> Self {
        let n = space.len();
        ProbMeasure { space, w: vec![1.0 / n as f64; n] }
    }

    pub fn dirac(space: Arc<FiniteSpace>, at: usize) -> Result<Self> {
        if at >= space.len() {
            return Err(Error::Domain(format!("point {at} outside space")));
        }
        let mut w = vec![0.0; space.len()];
        w[at] = 1.0;
        Ok(ProbMeasure { space, w })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    /// Expectation of a function given by its values on the points.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn mass(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.w[i]).sum()
    }

    pub fn same_space(&self, other: &ProbMeasure) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || self.space == other.space
    }

    fn check_same_space(&self, other: &ProbMeasure) -> Result<()> {
        if !self.same_space(other) {
            return Err(Error::DimensionMismatch(self.len(), other.len()));
        }
        Ok(())
    }
}

/// Relative entropy `H(ν|μ) = Σ_{ν_i>0} ν_i log(ν_i/μ_i)`, `+∞` when ν is
/// not absolutely continuous with respect to μ.
pub fn relative_entropy(nu: &ProbMeasure, mu: &ProbMeasure) -> Result<f64> {
    nu.check_same_space(mu)?;
    let mut h = 0.0;
    for (&n, &m) in nu.w.iter().zip(&mu.w) {
        if n > 0.0 {
            if m <= 0.0 {
                return Ok(f64::INFINITY);
            }
            h += n * (n / m).ln();
        }
    }
    // Tiny negatives are rounding on near-equal measures.
    Ok(h.max(0.0))
}

/// Total variation `Σ|ν_i − μ_i|` (the sup of `∫φ d(ν−μ)` over `|φ| ≤ 1`).
pub fn tv_norm(nu: &ProbMeasure, mu: &ProbMeasure) -> Result<f64> {
    nu.check_same_space(mu)?;
    Ok(nu.w.iter().zip(&mu.w).map(|(n, m)| (n - m).abs()).sum())
}

/// Weighted total variation `Σ χ_i |ν_i − μ_i|` for nonnegative χ.
pub fn weighted_tv(nu: &ProbMeasure, mu: &ProbMeasure, chi: &[f64]) -> Result<f64> {
    nu.check_same_space(mu)?;
    if chi.len() != nu.len() {
        return Err(Error::DimensionMismatch(chi.len(), nu.len()));
    }
    for (i, &c) in chi.iter().enumerate() {
        if !(c >= 0.0) {
            return Err(Error::Negative { idx: i, value: c });
        }
    }
    Ok(nu
        .w
        .iter()
        .zip(&mu.w)
        .zip(chi)
        .map(|((n, m), c)| c * (n - m).abs())
        .sum())
}

/// Product measure `μ1 ⊗ μ2` on the product space, row-major index order.
pub fn product_measure(mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<ProbMeasure> {
    let space = FiniteSpace::product(mu1.space(), mu2.space())?;
    let mut w = Vec::with_capacity(mu1.len() * mu2.len());
    for &a in &mu1.w {
        for &b in &mu2.w {
            w.push(a * b);
        }
    }
    ProbMeasure::from_unnormalized(space, w)
}

/// Disintegration of a measure on a declared product space: the first
/// marginal together with the conditional kernel at each first-factor point.
#[derive(Debug, Clone)]
pub struct Disintegration {
    pub marginal: ProbMeasure,
    pub kernels: Vec<ProbMeasure>,
    /// `true` at rows with zero marginal mass, where the kernel is an
    /// arbitrary (uniform) placeholder.
    pub zero_mass: Vec<bool>,
}

/// Splits ν on `X1 × X2` as `ν(i,j) = ν1(i) · ν2^i(j)`. The entropy chain
/// rule `H(ν|μ1⊗μ2) = H(ν1|μ1) + Σ_i ν1_i H(ν2^i|μ2)` holds exactly.
pub fn disintegrate(nu: &ProbMeasure) -> Result<Disintegration> {
    let (n1, n2) = nu
        .space()
        .product_factors()
        .ok_or_else(|| Error::Domain("measure does not live on a product space".into()))?;
    let factor1 = FiniteSpace::new(n1)?;
    let factor2 = FiniteSpace::new(n2)?;
    let mut marginal = vec![0.0; n1];
    for i in 0..n1 {
        for j in 0..n2 {
            marginal[i] += nu.w[i * n2 + j];
        }
    }
    let mut kernels = Vec::with_capacity(n1);
    let mut zero_mass = Vec::with_capacity(n1);
    for i in 0..n1 {
        if marginal[i] > 0.0 {
            let row: Vec<f64> = (0..n2).map(|j| nu.w[i * n2 + j]).collect();
            kernels.push(ProbMeasure::from_unnormalized(factor2.clone(), row)?);
            zero_mass.push(false);
        } else {
            kernels.push(ProbMeasure::uniform(factor2.clone()));
            zero_mass.push(true);
        }
    }
    let marginal = ProbMeasure::from_unnormalized(factor1, marginal)?;
    Ok(Disintegration { marginal, kernels, zero_mass })
}

/// Conditioning on a subset: `μ_A = 1_A μ / μ(A)`. Satisfies
/// `H(μ_A|μ) = −log μ(A)` and is the entropy minimizer among measures
/// supported on A (Csiszár's I-projection).
pub fn restrict(mu: &ProbMeasure, subset: &[usize]) -> Result<ProbMeasure> {
    if subset.is_empty() {
        return Err(Error::Empty("subset"));
    }
    let mut w = vec![0.0; mu.len()];
    for &i in subset {
        if i >= mu.len() {
            return Err(Error::Domain(format!("point {i} outside space")));
        }
        w[i] = mu.w[i];
    }
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Domain("subset has zero mass".into()));
    }
    ProbMeasure::from_unnormalized(mu.space.clone(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn measure(w: &[f64]) -> ProbMeasure {
        let space = FiniteSpace::new(w.len()).unwrap();
        ProbMeasure::new(space, w.to_vec()).unwrap()
    }

    fn pair(a: &[f64], b: &[f64]) -> (ProbMeasure, ProbMeasure) {
        let space = FiniteSpace::new(a.len()).unwrap();
        (
            ProbMeasure::new(space.clone(), a.to_vec()).unwrap(),
            ProbMeasure::new(space, b.to_vec()).unwrap(),
        )
    }

    #[test]
    fn entropy_identity_is_zero() {
        let mu = measure(&[0.3, 0.2, 0.5]);
        assert_eq!(relative_entropy(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn entropy_single_term_closed_form() {
        // nu = (1,0) against uniform: 1·log(1/(1/2)) = log 2.
        let (mu, nu) = pair(&[0.5, 0.5], &[1.0, 0.0]);
        let h = relative_entropy(&nu, &mu).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn entropy_absolute_continuity_failure() {
        let (mu, nu) = pair(&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0]);
        assert_eq!(relative_entropy(&nu, &mu).unwrap(), f64::INFINITY);
    }

    #[test]
    fn entropy_dimension_mismatch() {
        let mu = measure(&[1.0]);
        let nu = measure(&[0.5, 0.5]);
        assert!(relative_entropy(&nu, &mu).is_err());
    }

    // The sup-over-sign-patterns oracle for the TV norm on small spaces.
    fn tv_oracle(nu: &ProbMeasure, mu: &ProbMeasure) -> f64 {
        let n = nu.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << n) {
            let mut s = 0.0;
            for i in 0..n {
                let phi = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                s += phi * (nu.weight(i) - mu.weight(i));
            }
            best = best.max(s);
        }
        best
    }

    #[test]
    fn tv_matches_sign_pattern_oracle() {
        let (mu, nu) = pair(&[0.5, 0.5], &[0.75, 0.25]);
        assert_eq!(tv_norm(&nu, &mu).unwrap(), 0.5);
        assert!((tv_norm(&nu, &mu).unwrap() - tv_oracle(&nu, &mu)).abs() < 1e-15);
    }

    #[test]
    fn tv_extremes() {
        let mu = measure(&[0.3, 0.7]);
        assert_eq!(tv_norm(&mu, &mu).unwrap(), 0.0);
        let (a, b) = pair(&[1.0, 0.0], &[0.0, 1.0]);
        assert_eq!(tv_norm(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn weighted_tv_cases() {
        let (mu, nu) = pair(&[0.5, 0.5], &[0.75, 0.25]);
        let ones = vec![1.0; 2];
        assert_eq!(
            weighted_tv(&nu, &mu, &ones).unwrap(),
            tv_norm(&nu, &mu).unwrap()
        );
        assert_eq!(weighted_tv(&nu, &mu, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((weighted_tv(&nu, &mu, &[2.0, 4.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(weighted_tv(&nu, &mu, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn product_measure_cases() {
        let a = measure(&[1.0, 0.0]);
        let b = measure(&[0.0, 1.0]);
        let d = product_measure(&a, &b).unwrap();
        assert_eq!(d.weights(), &[0.0, 1.0, 0.0, 0.0]);

        let u = measure(&[0.5, 0.5]);
        assert_eq!(product_measure(&u, &u).unwrap().weights(), &[0.25; 4]);

        let p = product_measure(&measure(&[0.25, 0.75]), &measure(&[1.0 / 3.0, 2.0 / 3.0])).unwrap();
        let expect = [1.0 / 12.0, 2.0 / 12.0, 3.0 / 12.0, 6.0 / 12.0];
        for (got, want) in p.weights().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn disintegrate_product_and_dirac() {
        let m1 = measure(&[0.25, 0.75]);
        let m2 = measure(&[0.4, 0.6]);
        let p = product_measure(&m1, &m2).unwrap();
        let d = disintegrate(&p).unwrap();
        for (k, flag) in d.kernels.iter().zip(&d.zero_mass) {
            assert!(!flag);
            for (a, b) in k.weights().iter().zip(m2.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        let da = measure(&[1.0, 0.0]);
        let db = measure(&[0.0, 1.0]);
        let dd = disintegrate(&product_measure(&da, &db).unwrap()).unwrap();
        assert_eq!(dd.marginal.weights(), &[1.0, 0.0]);
        assert_eq!(dd.kernels[0].weights(), &[0.0, 1.0]);
        assert!(dd.zero_mass[1]);
    }

    #[test]
    fn disintegrate_requires_product_space() {
        let mu = measure(&[0.5, 0.5]);
        assert!(disintegrate(&mu).is_err());
    }

    #[test]
    fn entropy_chain_rule() {
        // Both sides computed independently on a random-ish 2x2 measure.
        let m1 = measure(&[0.3, 0.7]);
        let m2 = measure(&[0.6, 0.4]);
        let prod = product_measure(&m1, &m2).unwrap();
        let nu = ProbMeasure::new(prod.space().clone(), vec![0.1, 0.3, 0.2, 0.4]).unwrap();
        let direct = relative_entropy(&nu, &prod).unwrap();
        let d = disintegrate(&nu).unwrap();
        let mut chained = relative_entropy(&d.marginal, &m1).unwrap();
        for (i, k) in d.kernels.iter().enumerate() {
            if d.marginal.weight(i) > 0.0 {
                chained += d.marginal.weight(i) * relative_entropy(k, &m2).unwrap();
            }
        }
        assert!((direct - chained).abs() <= 1e-10);
    }

    #[test]
    fn restrict_cases() {
        let space = FiniteSpace::new(4).unwrap();
        let mu = ProbMeasure::uniform(space);
        let full = restrict(&mu, &[0, 1, 2, 3]).unwrap();
        assert_eq!(full.weights(), mu.weights());

        let half = restrict(&mu, &[0, 1]).unwrap();
        assert_eq!(half.weights(), &[0.5, 0.5, 0.0, 0.0]);
        let h = relative_entropy(&half, &mu).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);

        let single = restrict(&mu, &[2]).unwrap();
        let h1 = relative_entropy(&single, &mu).unwrap();
        assert!((h1 - 4.0f64.ln()).abs() < 1e-12);
        assert!((h1 + mu.mass(&[2]).ln()).abs() < 1e-12);
    }

    #[test]
    fn restrict_zero_mass_errors() {
        let (mu, _) = pair(&[1.0, 0.0], &[0.5, 0.5]);
        assert!(restrict(&mu, &[1]).is_err());
        assert!(restrict(&mu, &[]).is_err());
    }

    #[test]
    fn restriction_is_entropy_projection() {
        // For every nu with nu(A)=1: H(nu|mu) = H(nu|mu_A) + H(mu_A|mu),
        // checked by a brute-force grid over measures supported on A.
        let space = FiniteSpace::new(3).unwrap();
        let mu = ProbMeasure::new(space.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let a = [0usize, 2];
        let mu_a = restrict(&mu, &a).unwrap();
        let h_a = relative_entropy(&mu_a, &mu).unwrap();
        let k = 50;
        for i in 0..=k {
            let p = i as f64 / k as f64;
            let nu = ProbMeasure::new(space.clone(), vec![p, 0.0, 1.0 - p]).unwrap();
            let lhs = relative_entropy(&nu, &mu).unwrap();
            let rhs = relative_entropy(&nu, &mu_a).unwrap() + h_a;
            assert!((lhs - rhs).abs() < 1e-10, "p={p}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(FiniteSpace::with_labels(vec!["a".into(), "a".into()]).is_err());
    }

    prop_compose! {
        fn simplex(n: usize)(raw in prop::collection::vec(0.0f64..1.0, n)) -> Vec<f64> {
            let s: f64 = raw.iter().sum();
            if s == 0.0 {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                v
            } else {
                raw.iter().map(|x| x / s).collect()
            }
        }
    }

    proptest! {
        #[test]
        fn entropy_nonnegative_and_zero_iff_equal(a in simplex(6), b in simplex(6)) {
            let (mu, nu) = pair(&a, &b);
            let h = relative_entropy(&nu, &mu).unwrap();
            prop_assert!(h >= 0.0);
            if tv_norm(&nu, &mu).unwrap() > 1e-6 {
                prop_assert!(h > 0.0);
            }
        }

        #[test]
        fn tv_is_a_metric(a in simplex(5), b in simplex(5), c in simplex(5)) {
            let space = FiniteSpace::new(5).unwrap();
            let pa = ProbMeasure::new(space.clone(), a).unwrap();
            let pb = ProbMeasure::new(space.clone(), b).unwrap();
            let pc = ProbMeasure::new(space, c).unwrap();
            let ab = tv_norm(&pa, &pb).unwrap();
            let ba = tv_norm(&pb, &pa).unwrap();
            prop_assert!((ab - ba).abs() < 1e-14);
            let ac = tv_norm(&pa, &pc).unwrap();
            let cb = tv_norm(&pc, &pb).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!(tv_norm(&pa, &pa).unwrap() == 0.0);
        }

        #[test]
        fn chain_rule_on_random_products(a in simplex(2), b in simplex(3), nu_raw in simplex(6)) {
            let m1 = measure(&a);
            let m2 = measure(&b);
            let prod = product_measure(&m1, &m2).unwrap();
            let nu = ProbMeasure::new(prod.space().clone(), nu_raw).unwrap();
            let direct = relative_entropy(&nu, &prod).unwrap();
            let d = disintegrate(&nu).unwrap();
            let mut chained = relative_entropy(&d.marginal, &m1).unwrap();
            for (i, k) in d.kernels.iter().enumerate() {
                if d.marginal.weight(i) > 0.0 {
                    chained += d.marginal.weight(i) * relative_entropy(k, &m2).unwrap();
                }
            }
            if direct.is_finite() {
                prop_assert!((direct - chained).abs() <= 1e-10);
            } else {
                prop_assert!(chained.is_infinite());
            }
        }
    }
}
