//! Integral criteria: Orlicz norms for the Young function `ρ(s) = e^|s| − 1`,
//! the Bernstein-type log-Laplace bound, and the constructors that turn
//! integrability data into rate functions (weighted Pinsker-type bounds,
//! moment criteria, small-t and large-t envelopes and their combination).
//!
//! All integrals are finite sums over the support of μ; zero-mass atoms
//! never contribute.

use crate::duality::{log_laplace, PotentialFamily};
use crate::measures::{relative_entropy, ProbMeasure};
use crate::ratefn::RateFunction;
use crate::transport::CostMatrix;
use crate::{Error, Result};

/// An Orlicz-norm value together with the integral it certifies:
/// `∫ e^{|φ|/b} dμ` evaluated at `b = value`, which sits at 2 whenever the
/// value is positive and finite.
#[derive(Debug, Clone, Copy)]
pub struct OrliczEstimate {
    pub value: f64,
    pub certificate: f64,
}

/// Shared bisection for `inf{b > 0 : Σ w_i e^{v_i / b} ≤ 2}` over atoms
/// with nonnegative values `v` and weights summing to one.
fn orlicz_from_atoms(vals: &[f64], weights: &[f64]) -> OrliczEstimate {
    let integral = |b: f64| -> f64 {
        vals.iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, &w)| w * (v / b).exp())
            .sum()
    };
    let vmax = vals
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(0.0f64, f64::max);
    if vmax == 0.0 {
        return OrliczEstimate { value: 0.0, certificate: 1.0 };
    }
    // e^{v/b} ≤ 2^{v/vmax} at b = vmax/log 2, so the integral is ≤ 2 there.
    let mut hi = vmax / std::f64::consts::LN_2;
    debug_assert!(integral(hi) <= 2.0 + 1e-12);
    let mut lo = hi * 1e-3;
    let mut guard = 0;
    while integral(lo) <= 2.0 {
        hi = lo;
        lo *= 1e-3;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if integral(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-13 * hi {
            break;
        }
    }
    OrliczEstimate { value: hi, certificate: integral(hi) }
}

/// Orlicz norm `‖φ‖_ρ = inf{b > 0 : ∫ e^{|φ|/b} dμ ≤ 2}`.
pub fn orlicz_norm(phi: &[f64], mu: &ProbMeasure) -> Result<OrliczEstimate> {
    if phi.len() != mu.len() {
        return Err(Error::DimensionMismatch(phi.len(), mu.len()));
    }
    let vals: Vec<f64> = phi.iter().map(|x| x.abs()).collect();
    Ok(orlicz_from_atoms(&vals, mu.weights()))
}

/// Orlicz norm of a metric under the product measure:
/// `‖d‖_{ρ,μ⊗²} = inf{b > 0 : ∫∫ e^{d(x,y)/b} dμ dμ ≤ 2}`.
pub fn orlicz_norm_pair(d: &CostMatrix, mu: &ProbMeasure) -> Result<OrliczEstimate> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("orlicz_norm_pair needs a metric".into()));
    }
    if d.rows() != mu.len() {
        return Err(Error::DimensionMismatch(d.rows(), mu.len()));
    }
    let n = mu.len();
    let mut vals = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            vals.push(d.at(i, j));
            weights.push(mu.weight(i) * mu.weight(j));
        }
    }
    Ok(orlicz_from_atoms(&vals, &weights))
}

/// Dual Orlicz norm `‖f‖_ρ^* = sup{∫ fφ dμ : ∫ e^{|φ|} dμ ≤ 2}`. The inner
/// problem is separable: at multiplier λ the maximizer is
/// `φ_i = sign(f_i)·max(0, log(|f_i|/λ))`, and λ is driven to the active
/// constraint by bisection.
pub fn orlicz_dual_norm(f: &[f64], mu: &ProbMeasure) -> Result<f64> {
    if f.len() != mu.len() {
        return Err(Error::DimensionMismatch(f.len(), mu.len()));
    }
    let fabs: Vec<f64> = f.iter().map(|x| x.abs()).collect();
    let fmax = fabs
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(0.0f64, f64::max);
    if fmax == 0.0 {
        return Ok(0.0);
    }
    let constraint = |lam: f64| -> f64 {
        fabs.iter()
            .zip(mu.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, &w)| w * (v / lam).max(1.0))
            .sum()
    };
    let mut hi = fmax;
    let mut lo = fmax * 1e-3;
    let mut guard = 0;
    while constraint(lo) <= 2.0 {
        hi = lo;
        lo *= 1e-3;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if constraint(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let lam = hi;
    Ok(fabs
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| w * v * (v / lam).ln().max(0.0))
        .sum())
}

/// Checks the Bernstein-type bound `Λ_φ(s) ≤ M²s²/(1 − Ms)` on a grid in
/// `[0, 1/M)`, where `M = ‖φ‖_ρ` and `Λ_φ` centers φ.
pub fn bernstein_bound_check(phi: &[f64], mu: &ProbMeasure) -> Result<bool> {
    let m = orlicz_norm(phi, mu)?.value;
    if m == 0.0 {
        return Ok(true);
    }
    let psi: Vec<f64> = phi.iter().map(|x| -x).collect();
    let steps = 2000;
    for k in 0..steps {
        let s = (k as f64 / steps as f64) / m;
        let lam = log_laplace(phi, &psi, mu, s)?;
        let bound = (m * s).powi(2) / (1.0 - m * s);
        if lam > bound + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Weighted Pinsker-type rate `α(t) = (√(t/‖χ‖_ρ + 1) − 1)²` for the
/// weighted total variation `‖χ·(ν−μ)‖_TV`.
pub fn alpha_weighted_ckp(chi: &[f64], mu: &ProbMeasure) -> Result<RateFunction> {
    for (i, &x) in chi.iter().enumerate() {
        if !(x >= 0.0) {
            return Err(Error::Negative { idx: i, value: x });
        }
    }
    let m = orlicz_norm(chi, mu)?.value;
    if m == 0.0 {
        return Err(Error::Domain("chi vanishes mu-a.e., its Orlicz norm is 0".into()));
    }
    RateFunction::sqrt_form(m)
}

/// The norm-entropy rate `α₁(t) = (√(t+1) − 1)²` paired with the dual
/// Orlicz norm of `dν/dμ − 1`.
pub fn alpha_orlicz_nei() -> RateFunction {
    RateFunction::sqrt_form(1.0).expect("unit scale")
}

/// Checks `α₁(‖dν/dμ − 1‖_ρ^*) ≤ H(ν|μ)`; requires ν ≪ μ.
pub fn orlicz_nei_check(nu: &ProbMeasure, mu: &ProbMeasure) -> Result<bool> {
    if nu.len() != mu.len() {
        return Err(Error::DimensionMismatch(nu.len(), mu.len()));
    }
    let mut f = vec![0.0; mu.len()];
    for i in 0..mu.len() {
        if mu.weight(i) > 0.0 {
            f[i] = nu.weight(i) / mu.weight(i) - 1.0;
        } else if nu.weight(i) > 0.0 {
            return Err(Error::Domain("nu not absolutely continuous wrt mu".into()));
        }
    }
    let norm = orlicz_dual_norm(&f, mu)?;
    let h = relative_entropy(nu, mu)?;
    Ok(alpha_orlicz_nei().eval(norm) <= h + 1e-9)
}

/// Integral criterion for a metric cost: with `∫ e^{a·d(x_o,x)} dμ ≤ 2`
/// (some base point, checked) and `∫ e^{γ(d(x1,x))} dμ ≤ B`, the rate
/// `max((√(at+1)−1)², 2γ(t/2) − 2 log B)` applies; the first branch is
/// sharp near zero, the second away from it.
pub fn alpha_t1_integral(
    d: &CostMatrix,
    mu: &ProbMeasure,
    a: f64,
    gamma: &RateFunction,
    x1: usize,
) -> Result<RateFunction> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("alpha_t1_integral needs a metric".into()));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("a must be >= 0, got {a}")));
    }
    gamma.require_class_c()?;
    if x1 >= mu.len() {
        return Err(Error::Domain(format!("base point {x1} outside space")));
    }
    // The a-condition must hold at some base point.
    if a > 0.0 {
        let ok = (0..mu.len()).any(|xo| {
            mu.weight(xo) > 0.0 && {
                let integral: f64 = (0..mu.len())
                    .filter(|&i| mu.weight(i) > 0.0)
                    .map(|i| mu.weight(i) * (a * d.at(xo, i)).exp())
                    .sum();
                integral <= 2.0 + 1e-9
            }
        });
        if !ok {
            return Err(Error::Domain(format!(
                "exp({a}·d(x_o,·)) integrates above 2 at every base point"
            )));
        }
    }
    let small = if a == 0.0 { RateFunction::zero() } else { RateFunction::sqrt_form(1.0 / a)? };
    let b: f64 = (0..mu.len())
        .filter(|&i| mu.weight(i) > 0.0)
        .map(|i| mu.weight(i) * gamma.eval(d.at(x1, i)).exp())
        .sum();
    let large = if b.is_finite() {
        RateFunction::floor_shift(2.0, 0.5, 2.0 * b.ln(), gamma.clone())?
    } else {
        RateFunction::zero()
    };
    Ok(RateFunction::pointwise_max(small, large))
}

/// Large-t criterion for the power cost `c = d^p`: with
/// `∫ e^{γ(d^p(x_o,x))} dμ ≤ B`, the rate `max(0, 2γ(2^{−p}t) − 2 log B)`
/// applies.
pub fn alpha_dp(
    d: &CostMatrix,
    p: f64,
    mu: &ProbMeasure,
    gamma: &RateFunction,
    x_o: usize,
) -> Result<RateFunction> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("alpha_dp needs a metric".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    gamma.require_class_c()?;
    if x_o >= mu.len() {
        return Err(Error::Domain(format!("base point {x_o} outside space")));
    }
    let b: f64 = (0..mu.len())
        .filter(|&i| mu.weight(i) > 0.0)
        .map(|i| mu.weight(i) * gamma.eval(d.at(x_o, i).powf(p)).exp())
        .sum();
    if !b.is_finite() {
        return Ok(RateFunction::zero());
    }
    RateFunction::floor_shift(2.0, 0.5f64.powf(p), 2.0 * b.ln(), gamma.clone())
}

/// Envelope criterion for a cost dominated by `χ ⊕ χ`: with
/// `∫ e^{γ∘χ} dμ ≤ B`, the rate `2·max(0, 2γ(t/4) − γ(χ(x_o)) − log B)`
/// applies.
pub fn alpha_chi_envelope(
    chi: &[f64],
    mu: &ProbMeasure,
    gamma: &RateFunction,
    x_o: usize,
) -> Result<RateFunction> {
    if chi.len() != mu.len() {
        return Err(Error::DimensionMismatch(chi.len(), mu.len()));
    }
    for (i, &x) in chi.iter().enumerate() {
        if !(x >= 0.0) {
            return Err(Error::Negative { idx: i, value: x });
        }
    }
    gamma.require_class_c()?;
    if x_o >= mu.len() {
        return Err(Error::Domain(format!("base point {x_o} outside space")));
    }
    let b: f64 = chi
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| w * gamma.eval(x).exp())
        .sum();
    let gxo = gamma.eval(chi[x_o]);
    if !b.is_finite() || !gxo.is_finite() {
        return Ok(RateFunction::zero());
    }
    // 2·max(0, 2γ(t/4) − k) = max(0, 4γ(t/4) − 2k)
    RateFunction::floor_shift(4.0, 0.25, 2.0 * (gxo + b.ln()), gamma.clone())
}

/// Small-t rate for a cost dominated by `χ ⊕ χ`: the square-root form at
/// scale `‖χ‖_ρ`, quadratic `(t/(2M))²`-like near zero.
pub fn alpha_small_t(chi: &[f64], mu: &ProbMeasure) -> Result<RateFunction> {
    alpha_weighted_ckp(chi, mu)
}

/// Moment criterion: with `A = ∫ exp[β(∫ c(x,y) μ(dy))] μ(dx)`, the rate
/// `max(0, β(t) − log A)` applies under the cost `c`.
pub fn alpha_moment(cost: &CostMatrix, mu: &ProbMeasure, beta: &RateFunction) -> Result<RateFunction> {
    if cost.rows() != mu.len() || cost.cols() != mu.len() {
        return Err(Error::DimensionMismatch(cost.rows(), mu.len()));
    }
    beta.require_class_c()?;
    let mut a = 0.0f64;
    for i in 0..mu.len() {
        if mu.weight(i) == 0.0 {
            continue;
        }
        let c_mu: f64 = (0..mu.len()).map(|j| cost.at(i, j) * mu.weight(j)).sum();
        a += mu.weight(i) * beta.eval(c_mu).exp();
    }
    if !a.is_finite() {
        return Ok(RateFunction::zero());
    }
    RateFunction::floor_shift(1.0, 1.0, a.ln(), beta.clone())
}

/// One cell of the companion moment check of a necessity report.
#[derive(Debug, Clone)]
pub struct CompanionCell {
    pub member: usize,
    pub delta: f64,
    pub lhs: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Values recorded by the necessity direction of the integral criteria.
/// On finite spaces every integral is finite, so the base integrals carry
/// no pass/fail semantics; the companion cells check the moment bound
/// `∫ exp[δ α(φ + ⟨ψ,μ⟩)] dμ ≤ (1+δ)/(1−δ)` for family members.
#[derive(Debug, Clone)]
pub struct NecessityReport {
    /// Per base point: `∫ exp[u·α(2^{−p} d^p(x_o,x))] dμ`.
    pub base_integrals: Vec<f64>,
    pub companion: Vec<CompanionCell>,
}

pub fn necessity_check(
    alpha: &RateFunction,
    d: &CostMatrix,
    p: f64,
    mu: &ProbMeasure,
    u: f64,
    family: Option<&PotentialFamily>,
    deltas: &[f64],
) -> Result<NecessityReport> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("necessity_check needs a metric".into()));
    }
    if !(0.0..2.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0,2), got {u}")));
    }
    alpha.require_class_c()?;
    let scale = 0.5f64.powf(p);
    let base_integrals: Vec<f64> = (0..mu.len())
        .map(|xo| {
            (0..mu.len())
                .filter(|&i| mu.weight(i) > 0.0)
                .map(|i| mu.weight(i) * (u * alpha.eval(scale * d.at(xo, i).powf(p))).exp())
                .sum()
        })
        .collect();
    let mut companion = Vec::new();
    if let Some(fam) = family {
        for &delta in deltas {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::Domain(format!("delta must lie in [0,1), got {delta}")));
            }
            for (mi, pair) in fam.members().iter().enumerate() {
                let mean_psi = mu.expect(&pair.psi);
                let lhs: f64 = pair
                    .phi
                    .iter()
                    .zip(mu.weights())
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&f, &w)| {
                        // α extends by 0 on the negative axis.
                        let t = (f + mean_psi).max(0.0);
                        w * (delta * alpha.eval(t)).exp()
                    })
                    .sum();
                let bound = (1.0 + delta) / (1.0 - delta);
                companion.push(CompanionCell { member: mi, delta, lhs, bound, ok: lhs <= bound + 1e-9 });
            }
        }
    }
    Ok(NecessityReport { base_integrals, companion })
}

/// The moment bound for the two-sided Cramér transform: with `h` the
/// Cramér transform of Z under μ, `E e^{δh(Z)} ≤ (1+δ)/(1−δ)` for every
/// `δ ∈ [0,1)`.
pub fn cramer_moment_check(z: &[f64], mu: &ProbMeasure, delta: f64) -> Result<bool> {
    if z.len() != mu.len() {
        return Err(Error::DimensionMismatch(z.len(), mu.len()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta must lie in [0,1), got {delta}")));
    }
    let h = two_sided_cramer_at_atoms(z, mu);
    let lhs: f64 = z
        .iter()
        .zip(mu.weights())
        .zip(&h)
        .filter(|((_, &w), _)| w > 0.0)
        .map(|((_, &w), &hz)| w * (delta * hz).exp())
        .sum();
    Ok(lhs <= (1.0 + delta) / (1.0 - delta) + 1e-9)
}

/// `h(z_i) = sup_{s∈ℝ}{s z_i − Λ(s)}` at each support atom; the extreme
/// atoms take their exact limit values `−log μ(argmax)`.
pub fn two_sided_cramer_at_atoms(z: &[f64], mu: &ProbMeasure) -> Vec<f64> {
    let supp: Vec<usize> = (0..mu.len()).filter(|&i| mu.weight(i) > 0.0).collect();
    let zmax = supp.iter().map(|&i| z[i]).fold(f64::NEG_INFINITY, f64::max);
    let zmin = supp.iter().map(|&i| z[i]).fold(f64::INFINITY, f64::min);
    let mass_at = |target: f64| -> f64 {
        supp.iter()
            .filter(|&&i| (z[i] - target).abs() <= 1e-12 * (1.0 + target.abs()))
            .map(|&i| mu.weight(i))
            .sum()
    };
    let lam = |s: f64| -> f64 {
        let shift = supp.iter().map(|&i| s * z[i]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = supp.iter().map(|&i| mu.weight(i) * (s * z[i] - shift).exp()).sum();
        sum.ln() + shift
    };
    let lam_prime = |s: f64| -> f64 {
        let shift = supp.iter().map(|&i| s * z[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut zs = 0.0;
        let mut zx = 0.0;
        for &i in &supp {
            let e = mu.weight(i) * (s * z[i] - shift).exp();
            zs += e;
            zx += e * z[i];
        }
        zx / zs
    };
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            if mu.weight(i) == 0.0 {
                return 0.0;
            }
            let tol = 1e-12 * (1.0 + zi.abs());
            if (zi - zmax).abs() <= tol && (zi - zmin).abs() <= tol {
                // Constant variable.
                0.0
            } else if (zi - zmax).abs() <= tol {
                -mass_at(zmax).ln()
            } else if (zi - zmin).abs() <= tol {
                -mass_at(zmin).ln()
            } else {
                // Interior atom: solve Λ'(s) = z_i.
                let mut lo = -1.0;
                let mut hi = 1.0;
                let mut guard = 0;
                while lam_prime(lo) > zi && guard < 200 {
                    lo *= 2.0;
                    guard += 1;
                }
                guard = 0;
                while lam_prime(hi) < zi && guard < 200 {
                    hi *= 2.0;
                    guard += 1;
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if lam_prime(mid) < zi {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                (s * zi - lam(s)).max(0.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{primal_check, TransportFunctional};
    use crate::measures::{tv_norm, FiniteSpace};
    use crate::transport::chi_metric;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn measure(w: &[f64]) -> ProbMeasure {
        let space = FiniteSpace::new(w.len()).unwrap();
        ProbMeasure::from_unnormalized(space, w.to_vec()).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> ProbMeasure {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        measure(&w)
    }

    #[test]
    fn orlicz_norm_examples() {
        let mu = measure(&[0.5, 0.5]);
        let est = orlicz_norm(&[0.0, 0.0], &mu).unwrap();
        assert_eq!(est.value, 0.0);

        // Constant c: the norm is c/log 2.
        let est = orlicz_norm(&[3.0, 3.0], &mu).unwrap();
        assert!((est.value - 3.0 / std::f64::consts::LN_2).abs() < 1e-10);
        assert!((est.certificate - 2.0).abs() <= 1e-9);

        // (0,1) under the uniform measure: solve (1+e^{1/b})/2 = 2.
        let est = orlicz_norm(&[0.0, 1.0], &mu).unwrap();
        assert!((est.value - 1.0 / 3.0f64.ln()).abs() < 1e-10, "{}", est.value);
        assert!((est.certificate - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn orlicz_norm_pair_examples() {
        let single = measure(&[1.0]);
        let d0 = CostMatrix::hamming(1);
        assert_eq!(orlicz_norm_pair(&d0, &single).unwrap().value, 0.0);

        // Two-point Hamming uniform: (2 + 2 e^{1/b})/4 = 2 gives b = 1/log 3.
        let mu = measure(&[0.5, 0.5]);
        let est = orlicz_norm_pair(&CostMatrix::hamming(2), &mu).unwrap();
        assert!((est.value - 1.0 / 3.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn orlicz_norm_homogeneity_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..=6);
            let mu = random_measure(&mut rng, n);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c = rng.gen_range(0.1..5.0);
            let nf = orlicz_norm(&f, &mu).unwrap().value;
            let ng = orlicz_norm(&g, &mu).unwrap().value;
            let scaled: Vec<f64> = f.iter().map(|x| c * x).collect();
            let nsc = orlicz_norm(&scaled, &mu).unwrap().value;
            assert!((nsc - c * nf).abs() < 1e-8 * (1.0 + c * nf));
            let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
            let nsum = orlicz_norm(&sum, &mu).unwrap().value;
            assert!(nsum <= nf + ng + 1e-8);
        }
    }

    // Dense 2-D grid oracle for the dual norm on two points.
    fn dual_norm_oracle_2(f: &[f64], mu: &ProbMeasure) -> f64 {
        let mut best = 0.0f64;
        let steps = 3000;
        let hi = 3.0;
        for i in 0..=steps {
            for j in 0..=steps {
                let p0 = hi * i as f64 / steps as f64;
                let p1 = hi * j as f64 / steps as f64;
                let c = mu.weight(0) * p0.exp() + mu.weight(1) * p1.exp();
                if c <= 2.0 {
                    let v = mu.weight(0) * f[0].abs() * p0 + mu.weight(1) * f[1].abs() * p1;
                    best = best.max(v);
                }
            }
        }
        best
    }

    #[test]
    fn dual_norm_examples() {
        let mu = measure(&[0.5, 0.5]);
        assert_eq!(orlicz_dual_norm(&[0.0, 0.0], &mu).unwrap(), 0.0);

        let v = orlicz_dual_norm(&[1.0, -1.0], &mu).unwrap();
        let oracle = dual_norm_oracle_2(&[1.0, -1.0], &mu);
        assert!((v - oracle).abs() < 2e-3, "{v} vs {oracle}");

        // Homogeneity.
        let w = orlicz_dual_norm(&[3.0, -3.0], &mu).unwrap();
        assert!((w - 3.0 * v).abs() < 1e-9);

        // Single atom: value is |f| log 2.
        let single = measure(&[1.0]);
        let v = orlicz_dual_norm(&[2.0], &single).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn bernstein_bound_on_random_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = measure(&[0.3, 0.7]);
        assert!(bernstein_bound_check(&[5.0, 5.0], &mu).unwrap());
        for _ in 0..60 {
            let n = rng.gen_range(2..=6);
            let mu = random_measure(&mut rng, n);
            let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert!(bernstein_bound_check(&phi, &mu).unwrap());
        }
    }

    #[test]
    fn weighted_ckp_constructor_and_sweep() {
        let mu = measure(&[0.4, 0.6]);
        // chi ≡ 1: M = 1/log 2.
        let alpha = alpha_weighted_ckp(&[1.0, 1.0], &mu).unwrap();
        let t = 0.37;
        let expect = ((t * std::f64::consts::LN_2 + 1.0).sqrt() - 1.0).powi(2);
        assert!((alpha.eval(t) - expect).abs() < 1e-10);
        assert_eq!(alpha.eval(0.0), 0.0);
        assert!(alpha_weighted_ckp(&[0.0, 0.0], &mu).is_err());

        // Primal verification against the weighted variation norm.
        let chi = vec![0.5, 2.0];
        let alpha = alpha_weighted_ckp(&chi, &mu).unwrap();
        let rep = primal_check(&alpha, &mu, &TransportFunctional::ChiNorm(chi), 1e-3).unwrap();
        assert!(rep.holds, "gap {}", rep.worst_gap);
    }

    #[test]
    fn orlicz_nei_cases() {
        let mu = measure(&[0.55, 0.45]);
        assert!(orlicz_nei_check(&mu, &mu).unwrap());
        assert!((alpha_orlicz_nei().eval(3.0) - 1.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(2..=4);
            let mu = random_measure(&mut rng, n);
            let nu = random_measure(&mut rng, n);
            assert!(orlicz_nei_check(&nu, &mu).unwrap());
        }
    }

    #[test]
    fn tv_remark_bound_holds() {
        // ‖ν−μ‖_TV ≤ (1/log2)(2√H + H), weaker than Pinsker but same order.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..300 {
            let n = rng.gen_range(2..=6);
            let mu = random_measure(&mut rng, n);
            let nu = random_measure(&mut rng, n);
            let h = relative_entropy(&nu, &mu).unwrap();
            let tv = tv_norm(&nu, &mu).unwrap();
            assert!(tv <= (2.0 * h.sqrt() + h) / std::f64::consts::LN_2 + 1e-9);
        }
    }

    #[test]
    fn lipschitz_centered_norms_below_pair_norm() {
        // sup over 1-Lipschitz φ of ‖φ − ⟨φ,μ⟩‖_ρ ≤ ‖d‖_{ρ,μ⊗²}, checked on
        // vertex potentials of small metric spaces.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4);
            let mu = random_measure(&mut rng, n);
            let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = (pts[i] - pts[j]).abs();
                }
            }
            let d = CostMatrix::new(n, n, c, crate::transport::CostKind::Metric).unwrap();
            let pair_norm = orlicz_norm_pair(&d, &mu).unwrap().value;
            let fam = crate::duality::PotentialFamily::lipschitz_ball(&d, &mu).unwrap();
            for p in fam.members() {
                let mean = mu.expect(&p.phi);
                let centered: Vec<f64> = p.phi.iter().map(|x| x - mean).collect();
                let nn = orlicz_norm(&centered, &mu).unwrap().value;
                assert!(nn <= pair_norm + 1e-8, "{nn} vs {pair_norm}");
            }
        }
    }

    #[test]
    fn t1_integral_constructor() {
        let mu = measure(&[0.5, 0.3, 0.2]);
        let d = CostMatrix::line_metric(3);
        // a = 0 and γ = 0 degenerate to the zero rate.
        let alpha = alpha_t1_integral(&d, &mu, 0.0, &RateFunction::zero(), 0).unwrap();
        assert_eq!(alpha.eval(5.0), 0.0);

        // Near zero the sqrt branch is quadratic: ratio to a²t²/4 within 1%.
        let a = 0.4;
        let alpha = alpha_t1_integral(&d, &mu, a, &RateFunction::zero(), 0).unwrap();
        let t = 1e-4;
        let ratio = alpha.eval(t) / (a * a * t * t / 4.0);
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");

        // Primal verification on the three-point line.
        let gamma = RateFunction::linear(0.3).unwrap();
        let alpha = alpha_t1_integral(&d, &mu, a, &gamma, 0).unwrap();
        let rep = primal_check(&alpha, &mu, &TransportFunctional::Cost(d.clone()), 5e-3).unwrap();
        assert!(rep.holds, "gap {}", rep.worst_gap);

        // The a-condition is enforced.
        assert!(alpha_t1_integral(&d, &mu, 50.0, &RateFunction::zero(), 0).is_err());
    }

    #[test]
    fn dp_constructor() {
        let mu = measure(&[0.5, 0.3, 0.2]);
        let d = CostMatrix::line_metric(3);
        let alpha = alpha_dp(&d, 2.0, &mu, &RateFunction::zero(), 0).unwrap();
        assert_eq!(alpha.eval(3.0), 0.0);

        let gamma = RateFunction::linear(0.2).unwrap();
        let alpha = alpha_dp(&d, 2.0, &mu, &gamma, 0).unwrap();
        let c = d.power(2.0).unwrap();
        let rep = primal_check(&alpha, &mu, &TransportFunctional::Cost(c), 5e-3).unwrap();
        assert!(rep.holds, "gap {}", rep.worst_gap);
        assert!(alpha_dp(&d, 0.5, &mu, &gamma, 0).is_err());

        // p = 1 agrees with the large-t branch of the metric criterion
        // (doubled-argument convention).
        let a1 = alpha_dp(&d, 1.0, &mu, &gamma, 0).unwrap();
        let t1 = alpha_t1_integral(&d, &mu, 0.0, &gamma, 0).unwrap();
        for k in 0..=40 {
            let t = 6.0 * k as f64 / 40.0;
            assert!((a1.eval(t) - t1.eval(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn chi_envelope_constructor() {
        let mu = measure(&[0.5, 0.3, 0.2]);
        let chi = vec![0.0, 1.0, 2.0];
        let alpha = alpha_chi_envelope(&chi, &mu, &RateFunction::zero(), 0).unwrap();
        assert_eq!(alpha.eval(4.0), 0.0);

        let gamma = RateFunction::linear(0.25).unwrap();
        let alpha = alpha_chi_envelope(&chi, &mu, &gamma, 0).unwrap();
        let d = chi_metric(&chi).unwrap();
        let rep = primal_check(&alpha, &mu, &TransportFunctional::Cost(d), 5e-3).unwrap();
        assert!(rep.holds, "gap {}", rep.worst_gap);
    }

    #[test]
    fn small_t_matches_weighted_ckp() {
        let mu = measure(&[0.6, 0.4]);
        let chi = vec![1.0, 3.0];
        let a = alpha_small_t(&chi, &mu).unwrap();
        let b = alpha_weighted_ckp(&chi, &mu).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 4.0;
            assert_eq!(a.eval(t), b.eval(t));
        }
        // Quadratic behaviour near zero at rate a²/4 with a = 1/M.
        let m = orlicz_norm(&chi, &mu).unwrap().value;
        let t = 1e-4;
        let ratio = a.eval(t) / (t * t / (4.0 * m * m));
        assert!((ratio - 1.0).abs() < 0.01);
        // Primal verification under the weighted discrete metric.
        let rep = primal_check(&a, &mu, &TransportFunctional::ChiNorm(chi), 1e-3).unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn moment_constructor() {
        let mu = measure(&[0.5, 0.3, 0.2]);
        let d = CostMatrix::line_metric(3);
        let alpha = alpha_moment(&d, &mu, &RateFunction::zero()).unwrap();
        assert_eq!(alpha.eval(2.0), 0.0);

        // Bounded metric: a steep indicator recovers 0 below the diameter,
        // +∞ above.
        let diam = 2.0;
        let beta = RateFunction::threshold(diam).unwrap();
        let alpha = alpha_moment(&d, &mu, &beta).unwrap();
        assert_eq!(alpha.eval(diam), 0.0);
        assert_eq!(alpha.eval(diam + 1e-6), f64::INFINITY);

        // Random instances pass the primal sweep.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = rng.gen_range(2..=3);
            let mu = random_measure(&mut rng, n);
            let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = (pts[i] - pts[j]).abs();
                }
            }
            let d = CostMatrix::new(n, n, c, crate::transport::CostKind::Metric).unwrap();
            let beta = RateFunction::linear(rng.gen_range(0.1..0.6)).unwrap();
            let alpha = alpha_moment(&d, &mu, &beta).unwrap();
            let rep = primal_check(&alpha, &mu, &TransportFunctional::Cost(d), 5e-3).unwrap();
            assert!(rep.holds, "gap {}", rep.worst_gap);
        }
    }

    #[test]
    fn necessity_report_trivial_cases() {
        let mu = measure(&[0.5, 0.5]);
        let d = CostMatrix::hamming(2);
        let fam = crate::duality::PotentialFamily::lipschitz_ball(&d, &mu).unwrap();
        let rep = necessity_check(
            &RateFunction::zero(),
            &d,
            1.0,
            &mu,
            1.0,
            Some(&fam),
            &[0.0, 0.5],
        )
        .unwrap();
        for v in &rep.base_integrals {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for cell in &rep.companion {
            assert!(cell.ok);
            if cell.delta == 0.0 {
                assert!((cell.lhs - 1.0).abs() < 1e-12);
                assert!((cell.bound - 1.0).abs() < 1e-12);
            }
        }
        assert!(necessity_check(&RateFunction::zero(), &d, 1.0, &mu, 2.0, None, &[]).is_err());
    }

    #[test]
    fn cramer_moment_examples() {
        let mu = measure(&[0.5, 0.5]);
        // Constant variable: expectation 1 below every bound.
        assert!(cramer_moment_check(&[2.0, 2.0], &mu, 0.9).unwrap());

        // Fair ±1 coin at δ = 1/2: h(±1) = log 2, lhs = 2^{1/2} < 3.
        let h = two_sided_cramer_at_atoms(&[-1.0, 1.0], &mu);
        assert!((h[0] - 2.0f64.ln()).abs() < 1e-10);
        assert!((h[1] - 2.0f64.ln()).abs() < 1e-10);
        assert!(cramer_moment_check(&[-1.0, 1.0], &mu, 0.5).unwrap());

        // Interior atoms against a dense grid conjugate.
        let mu3 = measure(&[0.25, 0.5, 0.25]);
        let z = [-1.0, 0.0, 2.0];
        let h = two_sided_cramer_at_atoms(&z, &mu3);
        let oracle = |t: f64| {
            let mut best = f64::NEG_INFINITY;
            for i in -200_000..=200_000 {
                let s = 30.0 * i as f64 / 200_000.0;
                let z0 = 0.25 * (s * -1.0).exp() + 0.5 * 1.0 + 0.25 * (s * 2.0).exp();
                best = best.max(s * t - z0.ln());
            }
            best
        };
        assert!((h[1] - oracle(0.0)).abs() < 1e-6);

        // Random sweep.
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..100 {
            let n = rng.gen_range(2..=6);
            let mu = random_measure(&mut rng, n);
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            for &delta in &[0.25, 0.5, 0.9] {
                assert!(cramer_moment_check(&z, &mu, delta).unwrap());
            }
        }
    }
}
