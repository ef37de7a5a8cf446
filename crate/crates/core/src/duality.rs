//! The Bobkov–Götze dual machinery: log-Laplace transforms over potential
//! families, Cramér transforms, the family curve `Λ_Φ` and its conjugate
//! (the best rate function in the convex class), the non-convex best
//! function `J_Φ`, and brute-force simplex sweeps.
//!
//! A potential family Φ is a finite set of pairs `(ψ, φ)` standing in for
//! the worst case over an infinite class. For the box-like classes (unit
//! sup ball, weighted ball, Lipschitz ball of a weighted discrete metric)
//! the vertex set is exhaustive because `φ ↦ Λ_φ(s)` is convex, so the
//! `exact` flag is set; general Lipschitz balls are exact up to four
//! points (polytope vertex enumeration) and a multi-start coordinate
//! ascent takes over beyond that, flagged `exact = false`.

use crate::grid;
use crate::measures::{relative_entropy, tv_norm, weighted_tv, ProbMeasure};
use crate::ratefn::{IncreasingFunction, PiecewiseLinear, RateFunction, Tail};
use crate::transport::{ot_value, CostMatrix};
use crate::{Error, Result};

/// Tolerance for inequality checks on grids.
pub const CHECK_TOL: f64 = 1e-9;

/// A pair of potentials `(ψ, φ)`; for norm-entropy families `ψ = −φ`.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PotentialPair {
    pub fn zero(n: usize) -> Self {
        PotentialPair { psi: vec![0.0; n], phi: vec![0.0; n] }
    }

    /// Norm-entropy pair `(−φ, φ)`.
    pub fn nei(phi: Vec<f64>) -> Self {
        let psi = phi.iter().map(|x| -x).collect();
        PotentialPair { psi, phi }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// The infimal cost transform `Q^c φ(y) = min_x {φ(x) + c(x,y)}`; the pair
/// `(−φ, Q^c φ)` is always feasible for the cost `c`.
pub fn c_transform(phi: &[f64], cost: &CostMatrix) -> Vec<f64> {
    let n = cost.rows();
    let m = cost.cols();
    (0..m)
        .map(|j| (0..n).map(|i| phi[i] + cost.at(i, j)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Which transport-like functional `𝒯` a family's supremum realizes.
#[derive(Debug, Clone)]
pub enum TransportFunctional {
    /// Optimal transport cost under a cost matrix.
    Cost(CostMatrix),
    /// `Σ|ν−μ|`, the sup over the unit sup-norm ball.
    SupNorm,
    /// `Σ χ|ν−μ|`, the sup over `{|φ| ≤ χ}`.
    ChiNorm(Vec<f64>),
}

impl TransportFunctional {
    pub fn eval(&self, mu: &ProbMeasure, nu: &ProbMeasure) -> Result<f64> {
        match self {
            TransportFunctional::Cost(c) => ot_value(mu, nu, c),
            TransportFunctional::SupNorm => tv_norm(nu, mu),
            TransportFunctional::ChiNorm(chi) => weighted_tv(nu, mu, chi),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    LipschitzBall,
    UnitSupBall,
    ChiBall,
    Explicit,
}

/// A finite stand-in for a class of potential pairs. Always contains the
/// pair `(0, 0)`.
#[derive(Debug, Clone)]
pub struct PotentialFamily {
    kind: FamilyKind,
    members: Vec<PotentialPair>,
    exact: bool,
    functional: TransportFunctional,
}

const ENUM_BUDGET_LOG2: usize = 20;

fn sign_patterns(bounds: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = bounds.len();
    if n > ENUM_BUDGET_LOG2 {
        return Err(Error::BudgetExceeded(format!(
            "2^{n} vertex potentials exceed the enumeration budget"
        )));
    }
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        out.push(
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { bounds[i] } else { -bounds[i] })
                .collect(),
        );
    }
    Ok(out)
}

/// Recovers χ with `d(x,y) = χ(x)+χ(y)` off the diagonal, when possible.
/// Such metrics have box-shaped Lipschitz balls (modulo constants), so
/// their vertex potentials can be enumerated exactly at any size.
fn chi_decomposition(d: &CostMatrix) -> Option<Vec<f64>> {
    let n = d.rows();
    if n < 3 {
        return None;
    }
    let mut chi = vec![0.0; n];
    for i in 0..n {
        let j = if i == 0 { 1 } else { 0 };
        let k = if i <= 1 { 2 } else { 1 };
        chi[i] = 0.5 * (d.at(i, j) + d.at(i, k) - d.at(j, k));
        if chi[i] < 0.0 {
            return None;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && (d.at(i, j) - chi[i] - chi[j]).abs() > 1e-9 {
                return None;
            }
        }
    }
    Some(chi)
}

fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Vertices of `{φ : φ_i − φ_j ≤ d_ij, φ_0 = 0}` by brute-force basis
/// enumeration (n ≤ 4).
fn lipschitz_polytope_vertices(d: &CostMatrix) -> Vec<Vec<f64>> {
    let n = d.rows();
    let dim = n - 1;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut a = vec![0.0; dim];
            if i > 0 {
                a[i - 1] += 1.0;
            }
            if j > 0 {
                a[j - 1] -= 1.0;
            }
            rows.push((a, d.at(i, j)));
        }
    }
    let m = rows.len();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut combo: Vec<usize> = vec![0; dim];
    enumerate_bases(&rows, m, dim, &mut combo, 0, 0, &mut verts);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in verts {
        let full: Vec<f64> = std::iter::once(0.0).chain(v).collect();
        if !out
            .iter()
            .any(|u: &Vec<f64>| u.iter().zip(&full).all(|(a, b)| (a - b).abs() < 1e-7))
        {
            out.push(full);
        }
    }
    out
}

fn enumerate_bases(
    rows: &[(Vec<f64>, f64)],
    m: usize,
    dim: usize,
    combo: &mut Vec<usize>,
    pos: usize,
    start: usize,
    verts: &mut Vec<Vec<f64>>,
) {
    if pos == dim {
        let mut a: Vec<Vec<f64>> = combo.iter().map(|&i| rows[i].0.clone()).collect();
        let mut b: Vec<f64> = combo.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_dense(&mut a, &mut b) {
            if rows
                .iter()
                .all(|(ar, br)| ar.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= br + 1e-8)
            {
                verts.push(x);
            }
        }
        return;
    }
    for i in start..m {
        combo[pos] = i;
        enumerate_bases(rows, m, dim, combo, pos + 1, i + 1, verts);
    }
}

/// Multi-start coordinate ascent over the Lipschitz polytope at a few probe
/// values of s; each 1-D restriction of `Λ_φ(s)` is convex, so coordinates
/// move to interval endpoints.
fn lipschitz_ascent_members(d: &CostMatrix, mu: &ProbMeasure) -> Vec<Vec<f64>> {
    use rand::prelude::*;
    let n = d.rows();
    let scale = d.max_entry().max(1e-9);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x4c49_5053);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let lam = |phi: &[f64], s: f64| {
        let m: f64 = mu.expect(phi);
        let shift = phi
            .iter()
            .zip(mu.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, _)| s * (p - m))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0f64;
        for (p, &w) in phi.iter().zip(mu.weights()) {
            if w > 0.0 {
                z += w * (s * (p - m) - shift).exp();
            }
        }
        z.ln() + shift
    };
    for &s in &[0.5 / scale, 1.0 / scale, 2.0 / scale, 6.0 / scale] {
        for _ in 0..24 {
            let mut phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
            for _ in 0..200 {
                let mut moved = false;
                for i in 0..n {
                    let lo = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| phi[j] - d.at(j, i))
                        .fold(f64::NEG_INFINITY, f64::max);
                    let hi = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| phi[j] + d.at(i, j))
                        .fold(f64::INFINITY, f64::min);
                    let old = phi[i];
                    phi[i] = lo;
                    let vlo = lam(&phi, s);
                    phi[i] = hi;
                    let vhi = lam(&phi, s);
                    phi[i] = if vlo >= vhi { lo } else { hi };
                    if (phi[i] - old).abs() > 1e-12 {
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
            let base = phi[0];
            let centered: Vec<f64> = phi.iter().map(|x| x - base).collect();
            if !found
                .iter()
                .any(|u: &Vec<f64>| u.iter().zip(&centered).all(|(a, b)| (a - b).abs() < 1e-7))
            {
                found.push(centered);
            }
        }
    }
    found
}

impl PotentialFamily {
    /// `{φ : sup|φ| ≤ 1}` via its sign-pattern vertices.
    pub fn unit_sup_ball(n: usize) -> Result<Self> {
        let phis = sign_patterns(&vec![1.0; n])?;
        Ok(Self::from_nei(FamilyKind::UnitSupBall, phis, true, TransportFunctional::SupNorm))
    }

    /// `{φ : |φ| ≤ χ}` via its sign-pattern vertices.
    pub fn chi_ball(chi: &[f64]) -> Result<Self> {
        for (i, &x) in chi.iter().enumerate() {
            if !(x >= 0.0) {
                return Err(Error::Negative { idx: i, value: x });
            }
        }
        let phis = sign_patterns(chi)?;
        Ok(Self::from_nei(
            FamilyKind::ChiBall,
            phis,
            true,
            TransportFunctional::ChiNorm(chi.to_vec()),
        ))
    }

    /// The 1-Lipschitz ball of a metric. Exact for two-point spaces, for
    /// metrics of the form `d(x,y) = χ(x)+χ(y)` (box-shaped balls) and by
    /// polytope vertex enumeration up to four points; beyond that a
    /// multi-start coordinate ascent provides a certified lower envelope
    /// (`exact = false`).
    pub fn lipschitz_ball(d: &CostMatrix, mu: &ProbMeasure) -> Result<Self> {
        if !d.is_metric() {
            return Err(Error::MetricRequired("lipschitz_ball needs a metric".into()));
        }
        if d.rows() != mu.len() {
            return Err(Error::DimensionMismatch(d.rows(), mu.len()));
        }
        let n = d.rows();
        let functional = TransportFunctional::Cost(d.clone());
        if n == 1 {
            return Ok(Self::from_nei(FamilyKind::LipschitzBall, vec![], true, functional));
        }
        if n == 2 {
            let r = 0.5 * d.at(0, 1);
            let phis = sign_patterns(&[r, r])?;
            return Ok(Self::from_nei(FamilyKind::LipschitzBall, phis, true, functional));
        }
        if let Some(chi) = chi_decomposition(d) {
            if n <= ENUM_BUDGET_LOG2 {
                let phis = sign_patterns(&chi)?;
                return Ok(Self::from_nei(FamilyKind::LipschitzBall, phis, true, functional));
            }
        }
        if n <= 4 {
            let phis = lipschitz_polytope_vertices(d);
            return Ok(Self::from_nei(FamilyKind::LipschitzBall, phis, true, functional));
        }
        let phis = lipschitz_ascent_members(d, mu);
        Ok(Self::from_nei(FamilyKind::LipschitzBall, phis, false, functional))
    }

    /// Explicit list of pairs on an `n`-point space realizing the
    /// supplied functional.
    pub fn explicit(
        n: usize,
        pairs: Vec<PotentialPair>,
        functional: TransportFunctional,
        exact: bool,
    ) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| p.len() != n || p.psi.len() != p.phi.len()) {
            return Err(Error::DimensionMismatch(p.len(), n));
        }
        let mut members = vec![PotentialPair::zero(n)];
        members.extend(pairs);
        Ok(PotentialFamily { kind: FamilyKind::Explicit, members, exact, functional })
    }

    /// Feasible pairs `(−φ, Q^c φ)` for a general cost, generated from
    /// sign-pattern and random potentials. Never exhaustive.
    pub fn cost_ball(c: &CostMatrix, random_members: usize, seed: u64) -> Result<Self> {
        use rand::prelude::*;
        if c.rows() != c.cols() {
            return Err(Error::InvalidCost("cost_ball needs a square cost".into()));
        }
        let n = c.rows();
        let scale = 0.5 * c.max_entry().max(1e-9);
        let mut phis = if n <= 12 { sign_patterns(&vec![scale; n])? } else { vec![] };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_members {
            phis.push((0..n).map(|_| rng.gen_range(-scale..scale)).collect());
        }
        let members: Vec<PotentialPair> = phis
            .into_iter()
            .map(|phi| {
                let q = c_transform(&phi, c);
                let psi = phi.iter().map(|x| -x).collect();
                PotentialPair { psi, phi: q }
            })
            .collect();
        let mut all = vec![PotentialPair::zero(n)];
        all.extend(members);
        Ok(PotentialFamily {
            kind: FamilyKind::Explicit,
            members: all,
            exact: false,
            functional: TransportFunctional::Cost(c.clone()),
        })
    }

    fn from_nei(
        kind: FamilyKind,
        phis: Vec<Vec<f64>>,
        exact: bool,
        functional: TransportFunctional,
    ) -> Self {
        let n = phis.first().map(|p| p.len()).unwrap_or(1);
        let mut members = vec![PotentialPair::zero(n)];
        members.extend(phis.into_iter().map(PotentialPair::nei));
        PotentialFamily { kind, members, exact, functional }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn members(&self) -> &[PotentialPair] {
        &self.members
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn functional(&self) -> &TransportFunctional {
        &self.functional
    }

    /// Largest value of `Σ μ(φ + ψ)` over members; nonpositive for every
    /// admissible family.
    pub fn mean_defect(&self, mu: &ProbMeasure) -> f64 {
        self.members
            .iter()
            .map(|p| {
                p.phi
                    .iter()
                    .zip(&p.psi)
                    .zip(mu.weights())
                    .map(|((a, b), w)| (a + b) * w)
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Log-Laplace transform `Λ_{ψ,φ}(s) = log Σ_i μ_i exp[s(φ_i + ⟨ψ,μ⟩)]`,
/// evaluated after centering φ for conditioning (the shift is restored in
/// the linear term).
pub fn log_laplace(phi: &[f64], psi: &[f64], mu: &ProbMeasure, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("log-Laplace needs s >= 0, got {s}")));
    }
    if phi.len() != mu.len() || psi.len() != mu.len() {
        return Err(Error::DimensionMismatch(phi.len(), mu.len()));
    }
    let mean_psi: f64 = mu.expect(psi);
    let mean_phi: f64 = mu.expect(phi);
    let mut z = 0.0f64;
    let shift = phi
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(p, _)| s * (p - mean_phi))
        .fold(f64::NEG_INFINITY, f64::max);
    for (p, &w) in phi.iter().zip(mu.weights()) {
        if w > 0.0 {
            z += w * (s * (p - mean_phi) - shift).exp();
        }
    }
    Ok(z.ln() + shift + s * (mean_phi + mean_psi))
}

/// The exact large-s behaviour of one member's log-Laplace transform:
/// `Λ(s) = t_sup·s + log_mass + o(1)`.
fn member_asymptote(phi: &[f64], psi: &[f64], mu: &ProbMeasure) -> (f64, f64) {
    let mean_psi: f64 = mu.expect(psi);
    let mut t_sup = f64::NEG_INFINITY;
    for (p, &w) in phi.iter().zip(mu.weights()) {
        if w > 0.0 {
            t_sup = t_sup.max(p + mean_psi);
        }
    }
    let mut mass = 0.0;
    for (p, &w) in phi.iter().zip(mu.weights()) {
        if w > 0.0 && (p + mean_psi - t_sup).abs() <= 1e-12 * (1.0 + t_sup.abs()) {
            mass += w;
        }
    }
    (t_sup, mass.ln())
}

/// Cramér transform of `φ(X) + ⟨ψ,μ⟩` under μ, restricted to `t ≥ 0`:
/// `J(t) = sup_{s≥0}{st − Λ(s)}`, sampled on `[0, t_sup]` with the exact
/// endpoint value `−log μ(argmax)` and `+∞` beyond.
pub fn cramer_transform(phi: &[f64], psi: &[f64], mu: &ProbMeasure) -> Result<RateFunction> {
    if phi.len() != mu.len() || psi.len() != mu.len() {
        return Err(Error::DimensionMismatch(phi.len(), mu.len()));
    }
    let (t_sup, log_mass) = member_asymptote(phi, psi, mu);
    if t_sup < 0.0 {
        // The variable is almost surely negative: the restricted transform
        // is +∞ on all of [0,∞); a capped value stands in for +∞ at 0.
        let pl = PiecewiseLinear::new(vec![0.0], vec![1e12], Tail::Infinite)?;
        return Ok(RateFunction::from_piecewise(pl));
    }
    if t_sup <= 1e-14 {
        let pl = PiecewiseLinear::new(vec![0.0], vec![-log_mass], Tail::Infinite)?;
        return Ok(RateFunction::from_piecewise(pl));
    }
    let mean_psi: f64 = mu.expect(psi);
    let lam = |s: f64| log_laplace(phi, psi, mu, s).expect("s >= 0");
    let lam_prime = |s: f64| {
        let shift = phi
            .iter()
            .zip(mu.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, _)| s * (p + mean_psi))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut zx = 0.0;
        for (p, &w) in phi.iter().zip(mu.weights()) {
            if w > 0.0 {
                let x = p + mean_psi;
                let e = w * (s * x - shift).exp();
                z += e;
                zx += e * x;
            }
        }
        zx / z
    };

    let grid_n = 1024usize;
    let mut t = Vec::with_capacity(grid_n + 1);
    let mut v = Vec::with_capacity(grid_n + 1);
    let mut s_warm = 0.0f64;
    for i in 0..grid_n {
        let tt = t_sup * i as f64 / grid_n as f64;
        // The argmax solves Λ'(s) = t; Λ' increases to t_sup.
        let value = if tt <= lam_prime(0.0) {
            0.0
        } else {
            let mut lo = s_warm;
            let mut hi = lo.max(1e-6);
            let mut guard = 0;
            while lam_prime(hi) < tt {
                lo = hi;
                hi *= 2.0;
                guard += 1;
                if guard > 300 || hi > 1e14 {
                    break;
                }
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if lam_prime(mid) < tt {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s_star = 0.5 * (lo + hi);
            s_warm = lo;
            (s_star * tt - lam(s_star)).max(v.last().copied().unwrap_or(0.0))
        };
        t.push(tt);
        v.push(value);
    }
    t.push(t_sup);
    v.push((-log_mass).max(v.last().copied().unwrap_or(0.0)));
    let pl = PiecewiseLinear::new(t, v, Tail::Infinite)?;
    Ok(RateFunction::from_piecewise(pl))
}

/// The family curve `Λ_Φ(s) = sup over members of Λ_{ψ,φ}(s)`, a convex
/// increasing function vanishing at 0, with its exact asymptote attached.
#[derive(Debug, Clone)]
pub struct LambdaCurve {
    pub pl: PiecewiseLinear,
    pub exact: bool,
    /// Asymptotic slope: the family-wide `max_i(φ_i + ⟨ψ,μ⟩)`.
    pub t_sup: f64,
    /// Asymptote offset: `Λ_Φ(s) → t_sup·s + log_mass`.
    pub log_mass: f64,
}

impl LambdaCurve {
    pub fn eval(&self, s: f64) -> f64 {
        self.pl.eval(s)
    }
}

fn family_asymptote(family: &PotentialFamily, mu: &ProbMeasure) -> (f64, f64) {
    let mut t_sup = f64::NEG_INFINITY;
    let mut log_mass = f64::NEG_INFINITY;
    for p in family.members() {
        let (ts, lm) = member_asymptote(&p.phi, &p.psi, mu);
        if ts > t_sup + 1e-12 * (1.0 + ts.abs()) {
            t_sup = ts;
            log_mass = lm;
        } else if (ts - t_sup).abs() <= 1e-12 * (1.0 + ts.abs()) {
            log_mass = log_mass.max(lm);
        }
    }
    (t_sup, log_mass)
}

fn family_sup(family: &PotentialFamily, mu: &ProbMeasure, s: f64) -> f64 {
    family
        .members()
        .iter()
        .map(|p| log_laplace(&p.phi, &p.psi, mu, s).expect("s >= 0"))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Samples `Λ_Φ` on a caller-supplied s-grid (extended to start at 0).
pub fn lambda_family(
    family: &PotentialFamily,
    mu: &ProbMeasure,
    s_grid: &[f64],
) -> Result<LambdaCurve> {
    if family.members().is_empty() {
        return Err(Error::Empty("potential family"));
    }
    let mut grid: Vec<f64> = s_grid.iter().copied().filter(|&s| s > 0.0).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let mut t = vec![0.0];
    let mut v = vec![0.0];
    for s in grid {
        t.push(s);
        v.push(family_sup(family, mu, s));
    }
    let (t_sup, log_mass) = family_asymptote(family, mu);
    let pl = PiecewiseLinear::new(t, v, Tail::Linear(t_sup.max(0.0)))?;
    Ok(LambdaCurve { pl, exact: family.is_exact(), t_sup, log_mass })
}

/// Samples `Λ_Φ` adaptively until its exact asymptote `t_sup·s + log_mass`
/// is reached, so the conjugate is accurate over its whole domain
/// `[0, t_sup]`.
pub fn lambda_family_adaptive(family: &PotentialFamily, mu: &ProbMeasure) -> Result<LambdaCurve> {
    if family.members().is_empty() {
        return Err(Error::Empty("potential family"));
    }
    let (t_sup, log_mass) = family_asymptote(family, mu);
    if t_sup <= 1e-14 {
        // Every member is degenerate: Λ_Φ ≡ 0.
        let pl = PiecewiseLinear::constant_zero();
        return Ok(LambdaCurve { pl, exact: family.is_exact(), t_sup: 0.0, log_mass });
    }
    let f = |s: f64| family_sup(family, mu, s);
    let mut s_max = 1.0 / t_sup;
    let mut guard = 0;
    while f(s_max) - (t_sup * s_max + log_mass) > 1e-12 * (1.0 + log_mass.abs()) {
        s_max *= 2.0;
        guard += 1;
        if guard > 80 {
            break;
        }
    }
    let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut s = s_max / 2f64.powi(40);
    while s < s_max {
        knots.push((s, f(s)));
        s *= 2.0;
    }
    knots.push((s_max, f(s_max)));
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = knots
        .windows(2)
        .map(|w| (w[0].0, w[0].1, w[1].0, w[1].1, 0u32))
        .collect();
    let mut refined: Vec<(f64, f64)> = vec![*knots.last().unwrap()];
    while let Some((s0, v0, s1, v1, depth)) = stack.pop() {
        let sm = 0.5 * (s0 + s1);
        let vm = f(sm);
        let chord = 0.5 * (v0 + v1);
        if depth < 26
            && (vm - chord).abs() > 1e-11 * (1.0 + vm * vm)
            && s1 - s0 > 1e-14 * (1.0 + s1)
            && refined.len() + stack.len() < 300_000
        {
            stack.push((s0, v0, sm, vm, depth + 1));
            stack.push((sm, vm, s1, v1, depth + 1));
        } else {
            refined.push((s0, v0));
        }
    }
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    refined.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-15 * (1.0 + b.0.abs()));
    let (t, v): (Vec<f64>, Vec<f64>) = refined.into_iter().unzip();
    let pl = PiecewiseLinear::new(t, v, Tail::Linear(t_sup))?;
    Ok(LambdaCurve { pl, exact: family.is_exact(), t_sup, log_mass })
}

/// The best rate function in the convex class for this family: the
/// monotone conjugate of `Λ_Φ`. Its finite domain is `[0, t_sup]` with the
/// exact endpoint value `−log_mass`.
pub fn best_alpha(family: &PotentialFamily, mu: &ProbMeasure) -> Result<RateFunction> {
    let curve = lambda_family_adaptive(family, mu)?;
    if curve.t_sup <= 1e-14 {
        return RateFunction::threshold(0.0);
    }
    let conj = curve.pl.monotone_conjugate()?;
    Ok(RateFunction::from_piecewise(conj))
}

/// The left-continuous increasing function `J_Φ(t)`: the infimum over
/// members of the member Cramér transform at t. Pointwise at least the
/// conjugate of `Λ_Φ`, and equal to the brute-force best transportation
/// function when the functional is continuous.
pub fn j_phi(family: &PotentialFamily, mu: &ProbMeasure) -> Result<IncreasingFunction> {
    if family.members().is_empty() {
        return Err(Error::Empty("potential family"));
    }
    let (t_sup, log_mass) = family_asymptote(family, mu);
    if t_sup <= 1e-14 {
        return IncreasingFunction::new(PiecewiseLinear::new(vec![0.0], vec![0.0], Tail::Infinite)?);
    }
    let transforms: Vec<RateFunction> = family
        .members()
        .iter()
        .map(|p| cramer_transform(&p.phi, &p.psi, mu))
        .collect::<Result<_>>()?;
    let grid_n = 2048usize;
    let mut t = Vec::with_capacity(grid_n + 1);
    let mut v = Vec::with_capacity(grid_n + 1);
    for i in 0..=grid_n {
        let tt = t_sup * i as f64 / grid_n as f64;
        let inf = transforms.iter().map(|j| j.eval(tt)).fold(f64::INFINITY, f64::min);
        t.push(tt);
        v.push(inf);
    }
    let k = v.len() - 1;
    v[k] = v[k].min(-log_mass);
    // Monotone cleanup of rounding noise.
    for i in 1..v.len() {
        if v[i] < v[i - 1] {
            v[i] = v[i - 1];
        }
    }
    IncreasingFunction::from_samples(t, v, Tail::Infinite)
}

/// Brute-force best transportation function: sweeps the barycentric grid
/// of step `h` and tabulates `t ↦ min{H(ν|μ) : 𝒯(ν) ≥ t}`. A certified
/// within-grid oracle, limited to four points.
pub fn best_transport_brute(
    mu: &ProbMeasure,
    functional: &TransportFunctional,
    h: f64,
) -> Result<IncreasingFunction> {
    let n = mu.len();
    if n > 4 {
        return Err(Error::BudgetExceeded(format!(
            "brute-force sweep limited to 4 points, got {n}"
        )));
    }
    let k = grid::steps_from_h(h);
    let space = mu.space().clone();
    let mut pairs: Vec<(f64, f64)> = grid::par_fold_grid(
        n,
        k,
        Vec::new(),
        |mut acc: Vec<(f64, f64)>, w| {
            let nu = ProbMeasure::from_unnormalized(space.clone(), w.to_vec()).expect("grid point");
            let t = functional.eval(mu, &nu).expect("functional");
            let hrel = relative_entropy(&nu, mu).expect("entropy");
            if hrel.is_finite() {
                acc.push((t, hrel));
            }
            acc
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut suffix = vec![0.0f64; pairs.len()];
    let mut cur = f64::INFINITY;
    for i in (0..pairs.len()).rev() {
        cur = cur.min(pairs[i].1);
        suffix[i] = cur;
    }
    let mut t: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    for i in 0..pairs.len() {
        if i + 1 < pairs.len() && (pairs[i + 1].0 - pairs[i].0).abs() < 1e-12 {
            continue;
        }
        let tt = pairs[i].0.max(0.0);
        if t.last().is_some_and(|&last| tt <= last) {
            continue;
        }
        t.push(tt);
        v.push(suffix[i]);
    }
    if t.first() != Some(&0.0) {
        t.insert(0, 0.0);
        v.insert(0, 0.0);
    }
    v[0] = 0.0;
    IncreasingFunction::from_samples(t, v, Tail::Infinite)
}

/// Outcome of the dual criterion `Λ_{ψ,φ}(s) ≤ α^⊛(s)` over a family.
#[derive(Debug, Clone)]
pub struct BgReport {
    pub holds: bool,
    /// Largest `Λ − α^⊛` seen (negative values are the margin).
    pub worst_gap: f64,
    /// `(s, member index)` attaining the worst violation, when one exists.
    pub witness: Option<(f64, usize)>,
    pub exact: bool,
}

/// Checks `Λ_{ψ,φ}(s) ≤ α^⊛(s)` for every member over an adaptive
/// geometric s-grid, with the large-s regime settled by comparing exact
/// asymptotic slopes.
pub fn bg_check(
    alpha: &RateFunction,
    family: &PotentialFamily,
    mu: &ProbMeasure,
) -> Result<BgReport> {
    alpha.require_class_c()?;
    if family.members().is_empty() {
        return Err(Error::Empty("potential family"));
    }
    let conj = alpha.monotone_conjugate()?;
    let (sigma, _) = family_asymptote(family, mu);
    let tau = alpha.domain_sup(); // asymptotic slope of α^⊛

    let mut worst_gap = f64::NEG_INFINITY;
    let mut witness = None;

    let scale = 1.0 / (1.0 + sigma.abs().max(if tau.is_finite() { tau } else { 0.0 }));
    let mut s = 1e-6 * scale;
    let mut s_end = scale;
    let mut settled = false;
    let mut steps = 0usize;
    while !settled && steps < 6000 {
        let ca = conj.eval(s);
        if ca.is_infinite() {
            // α^⊛ = +∞ from here on: nothing can violate.
            break;
        }
        for (mi, p) in family.members().iter().enumerate() {
            let lam = log_laplace(&p.phi, &p.psi, mu, s)?;
            let gap = lam - ca;
            if gap > worst_gap {
                worst_gap = gap;
                witness = Some((s, mi));
            }
        }
        // Λ_Φ(s) ≤ σ·s always; once α^⊛ exceeds σ·s by a margin and keeps
        // at least that slope, larger s cannot violate.
        if ca - sigma * s > 1.0 && tau >= sigma - 1e-12 {
            settled = true;
        }
        s *= 1.06;
        steps += 1;
        if s > s_end {
            if sigma > tau + 1e-12 && worst_gap <= CHECK_TOL {
                // The family slope exceeds α's domain end: a violation is
                // guaranteed at large s; keep growing until it appears.
                s_end *= 4.0;
                if s_end > 1e18 {
                    break;
                }
            } else {
                break;
            }
        }
    }
    let holds = worst_gap <= CHECK_TOL;
    Ok(BgReport {
        holds,
        worst_gap,
        witness: if holds { None } else { witness },
        exact: family.is_exact(),
    })
}

/// Outcome of the primal sweep `α(𝒯(ν)) ≤ H(ν|μ)` over a barycentric grid.
#[derive(Debug, Clone)]
pub struct PrimalReport {
    pub holds: bool,
    /// Largest `α(𝒯(ν)) − H(ν|μ)` over the grid.
    pub worst_gap: f64,
    /// Violating weights and their gap, when one exists.
    pub witness: Option<(Vec<f64>, f64)>,
    pub points: u128,
}

/// Sweeps the simplex grid of step `h` checking the primal inequality for
/// the given transport functional (n ≤ 4).
pub fn primal_check(
    alpha: &RateFunction,
    mu: &ProbMeasure,
    functional: &TransportFunctional,
    h: f64,
) -> Result<PrimalReport> {
    let n = mu.len();
    if n > 4 {
        return Err(Error::BudgetExceeded(format!(
            "primal sweep limited to 4 points, got {n}"
        )));
    }
    let k = grid::steps_from_h(h);
    let space = mu.space().clone();

    type Acc = (f64, Option<Vec<f64>>);
    let (worst_gap, witness_w) = grid::par_fold_grid(
        n,
        k,
        (f64::NEG_INFINITY, None) as Acc,
        |acc: Acc, w| {
            let nu = ProbMeasure::from_unnormalized(space.clone(), w.to_vec()).expect("grid point");
            let hrel = relative_entropy(&nu, mu).expect("entropy");
            let t = functional.eval(mu, &nu).expect("functional");
            let a = alpha.eval(t.max(0.0));
            let gap = if !hrel.is_finite() {
                f64::NEG_INFINITY
            } else if a.is_infinite() {
                f64::INFINITY
            } else {
                a - hrel
            };
            if gap > acc.0 {
                (gap, Some(w.to_vec()))
            } else {
                acc
            }
        },
        |a: Acc, b: Acc| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    );
    let holds = worst_gap <= CHECK_TOL;
    Ok(PrimalReport {
        holds,
        worst_gap,
        witness: if holds { None } else { witness_w.map(|w| (w, worst_gap)) },
        points: grid::grid_size(n, k),
    })
}
