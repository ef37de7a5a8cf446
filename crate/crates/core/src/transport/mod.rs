//! Exact discrete optimal transport: primal couplings, the Kantorovich
//! dual, the Kantorovich–Rubinstein Lipschitz dual norm, and derived cost
//! constructions.
//!
//! The solver is a transportation simplex on the dense polytope; an exact
//! rational re-solve of the same pivoting is available as a test oracle for
//! small instances. Zero-mass rows and columns are eliminated before
//! solving and their dual potentials reconstructed afterwards.

mod lp;
mod simplex;

use num::{BigRational, ToPrimitive};

use crate::measures::{weighted_tv, ProbMeasure};
use crate::{Error, Result};

/// Feasibility tolerance for couplings (marginal residuals).
pub const FEAS_TOL: f64 = 1e-9;
/// Duality-gap tolerance between primal and dual values.
pub const DUALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    GeneralCost,
    Metric,
}

/// Nonnegative cost values `c(x_i, y_j)` on a finite space (or a pair of
/// spaces). Square costs must vanish on the diagonal; the metric kind also
/// requires symmetry and the triangle inequality entrywise.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
    kind: CostKind,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>, kind: CostKind) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidCost("empty cost matrix".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(entries.len(), rows * cols));
        }
        for (idx, &x) in entries.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidCost(format!("entry {idx} is {x}")));
            }
        }
        let square = rows == cols;
        if square {
            for i in 0..rows {
                if entries[i * cols + i] != 0.0 {
                    return Err(Error::InvalidCost(format!(
                        "diagonal entry ({i},{i}) must be 0"
                    )));
                }
            }
        }
        if kind == CostKind::Metric {
            if !square {
                return Err(Error::InvalidCost("metric cost must be square".into()));
            }
            for i in 0..rows {
                for j in 0..cols {
                    let dij = entries[i * cols + j];
                    if (dij - entries[j * cols + i]).abs() > 1e-12 {
                        return Err(Error::InvalidCost(format!(
                            "metric not symmetric at ({i},{j})"
                        )));
                    }
                    for k in 0..rows {
                        if dij > entries[i * cols + k] + entries[k * cols + j] + 1e-12 {
                            return Err(Error::InvalidCost(format!(
                                "triangle inequality fails at ({i},{k},{j})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(CostMatrix { rows, cols, c: entries, kind })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, kind: CostKind) -> Result<Self> {
        let r = rows.len();
        let cjs = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != cjs) {
            return Err(Error::InvalidCost("ragged cost rows".into()));
        }
        Self::new(r, cjs, rows.into_iter().flatten().collect(), kind)
    }

    /// The discrete metric `1_{x≠y}`.
    pub fn hamming(n: usize) -> Self {
        let mut c = vec![1.0; n * n];
        for i in 0..n {
            c[i * n + i] = 0.0;
        }
        CostMatrix { rows: n, cols: n, c, kind: CostKind::Metric }
    }

    /// The path metric `|i − j|` on indexed points.
    pub fn line_metric(n: usize) -> Self {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = (i as f64 - j as f64).abs();
            }
        }
        CostMatrix { rows: n, cols: n, c, kind: CostKind::Metric }
    }

    /// Euclidean distances between embedded points.
    pub fn euclidean(coords: &[Vec<f64>]) -> Result<Self> {
        let n = coords.len();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d: f64 = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                c[i * n + j] = d;
            }
        }
        Self::new(n, n, c, CostKind::Metric)
    }

    /// Entrywise power `c^p` of a metric (a general cost for `p > 1`).
    pub fn power(&self, p: f64) -> Result<Self> {
        let c = self.c.iter().map(|x| x.powf(p)).collect();
        Self::new(self.rows, self.cols, c, CostKind::GeneralCost)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn is_metric(&self) -> bool {
        self.kind == CostKind::Metric
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.c
    }

    pub fn max_entry(&self) -> f64 {
        self.c.iter().copied().fold(0.0, f64::max)
    }

    /// Distance from a point to a subset (metric kind).
    pub fn dist_to_set(&self, x: usize, subset: &[usize]) -> f64 {
        subset.iter().map(|&a| self.at(x, a)).fold(f64::INFINITY, f64::min)
    }
}

/// A feasible transport plan together with its realized cost.
#[derive(Debug, Clone)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    pi: Vec<f64>,
    pub cost: f64,
}

impl Coupling {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }

    pub fn plan(&self) -> &[f64] {
        &self.pi
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Largest violation of nonnegativity or of the marginal constraints.
    pub fn feasibility_residual(&self, mu: &ProbMeasure, nu: &ProbMeasure) -> f64 {
        let mut worst: f64 = 0.0;
        for &x in &self.pi {
            worst = worst.max(-x);
        }
        for i in 0..self.rows {
            let s: f64 = (0..self.cols).map(|j| self.at(i, j)).sum();
            worst = worst.max((s - mu.weight(i)).abs());
        }
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self.at(i, j)).sum();
            worst = worst.max((s - nu.weight(j)).abs());
        }
        worst
    }
}

/// Kantorovich dual potentials `(ψ, φ)` with `ψ_i + φ_j ≤ c_ij` and value
/// `Σψμ + Σφν`.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub value: f64,
}

impl DualPotentials {
    /// Largest constraint violation `ψ_i + φ_j − c_ij`.
    pub fn constraint_residual(&self, cost: &CostMatrix) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                worst = worst.max(self.psi[i] + self.phi[j] - cost.at(i, j));
            }
        }
        worst
    }
}

fn check_dims(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<()> {
    if mu.len() != cost.rows() {
        return Err(Error::DimensionMismatch(mu.len(), cost.rows()));
    }
    if nu.len() != cost.cols() {
        return Err(Error::DimensionMismatch(nu.len(), cost.cols()));
    }
    Ok(())
}

struct FullSolution {
    value: f64,
    plan: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

/// Runs the transportation simplex after eliminating zero-mass rows and
/// columns, then reconstructs full-size plan and potentials.
fn solve_full(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<FullSolution> {
    let n = mu.len();
    let m = nu.len();
    let keep_r: Vec<usize> = (0..n).filter(|&i| mu.weight(i) > 0.0).collect();
    let keep_c: Vec<usize> = (0..m).filter(|&j| nu.weight(j) > 0.0).collect();
    let supply: Vec<f64> = keep_r.iter().map(|&i| mu.weight(i)).collect();
    let demand: Vec<f64> = keep_c.iter().map(|&j| nu.weight(j)).collect();
    let mut sub = Vec::with_capacity(keep_r.len() * keep_c.len());
    for &i in &keep_r {
        for &j in &keep_c {
            sub.push(cost.at(i, j));
        }
    }
    let sol = simplex::solve(&supply, &demand, &sub)?;

    let mut plan = vec![0.0; n * m];
    for (a, &i) in keep_r.iter().enumerate() {
        for (b, &j) in keep_c.iter().enumerate() {
            plan[i * m + j] = sol.flow[a * keep_c.len() + b].max(0.0);
        }
    }
    let mut psi = vec![f64::NAN; n];
    let mut phi = vec![f64::NAN; m];
    for (a, &i) in keep_r.iter().enumerate() {
        psi[i] = sol.u[a];
    }
    for (b, &j) in keep_c.iter().enumerate() {
        phi[j] = sol.v[b];
    }
    // Zero-mass columns first (from kept rows), then zero-mass rows against
    // every column, so all constraints hold.
    for j in 0..m {
        if phi[j].is_nan() {
            phi[j] = keep_r
                .iter()
                .map(|&i| cost.at(i, j) - psi[i])
                .fold(f64::INFINITY, f64::min);
        }
    }
    for i in 0..n {
        if psi[i].is_nan() {
            psi[i] = (0..m)
                .map(|j| cost.at(i, j) - phi[j])
                .fold(f64::INFINITY, f64::min);
        }
    }
    Ok(FullSolution { value: sol.value, plan, psi, phi })
}

/// Minimal-cost coupling of μ and ν under the given cost.
pub fn solve_ot(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<(f64, Coupling)> {
    check_dims(mu, nu, cost)?;
    let sol = solve_full(mu, nu, cost)?;
    Ok((
        sol.value,
        Coupling { rows: mu.len(), cols: nu.len(), pi: sol.plan, cost: sol.value },
    ))
}

/// Transport cost value only.
pub fn ot_value(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<f64> {
    check_dims(mu, nu, cost)?;
    Ok(solve_full(mu, nu, cost)?.value)
}

/// Optimal Kantorovich potentials; by strong duality on finite spaces the
/// dual value matches the primal one.
pub fn solve_dual(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<DualPotentials> {
    check_dims(mu, nu, cost)?;
    let sol = solve_full(mu, nu, cost)?;
    let value = mu.expect(&sol.psi) + nu.expect(&sol.phi);
    Ok(DualPotentials { psi: sol.psi, phi: sol.phi, value })
}

/// Exact-rational optimal value (oracle for small instances): the same
/// pivoting over `BigRational` after converting the f64 inputs exactly.
pub fn solve_ot_rational(mu: &ProbMeasure, nu: &ProbMeasure, cost: &CostMatrix) -> Result<BigRational> {
    check_dims(mu, nu, cost)?;
    let rat = |x: f64| BigRational::from_float(x).expect("finite");
    let total = |xs: &[f64]| -> BigRational {
        xs.iter().map(|&x| rat(x)).fold(num::Zero::zero(), |a: BigRational, b| a + b)
    };
    let tm = total(mu.weights());
    let tn = total(nu.weights());
    let keep_r: Vec<usize> = (0..mu.len()).filter(|&i| mu.weight(i) > 0.0).collect();
    let keep_c: Vec<usize> = (0..nu.len()).filter(|&j| nu.weight(j) > 0.0).collect();
    // Normalize both sides to total mass exactly 1.
    let supply: Vec<BigRational> = keep_r.iter().map(|&i| rat(mu.weight(i)) / tm.clone()).collect();
    let demand: Vec<BigRational> = keep_c.iter().map(|&j| rat(nu.weight(j)) / tn.clone()).collect();
    let mut sub = Vec::with_capacity(keep_r.len() * keep_c.len());
    for &i in &keep_r {
        for &j in &keep_c {
            sub.push(rat(cost.at(i, j)));
        }
    }
    Ok(simplex::solve(&supply, &demand, &sub)?.value)
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Kantorovich–Rubinstein dual norm: the supremum of `Σ φ (ν − μ)` over
/// 1-Lipschitz φ, solved as a linear program (gauge `φ_0 = 0`, free
/// variables split into positive parts). Coincides with the transport cost
/// under the same metric.
pub fn kr_dual_norm(nu: &ProbMeasure, mu: &ProbMeasure, metric: &CostMatrix) -> Result<f64> {
    if !metric.is_metric() {
        return Err(Error::MetricRequired("kr_dual_norm needs a metric cost".into()));
    }
    check_dims(mu, nu, metric)?;
    let n = mu.len();
    if n == 1 {
        return Ok(0.0);
    }
    // Variables: phi_1..phi_{n-1} split as p - q  →  2(n-1) columns.
    let nv = 2 * (n - 1);
    let col_p = |i: usize| i - 1;
    let col_q = |i: usize| (n - 1) + i - 1;
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(n * (n - 1));
    let mut b: Vec<f64> = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut row = vec![0.0; nv];
            if i > 0 {
                row[col_p(i)] += 1.0;
                row[col_q(i)] -= 1.0;
            }
            if j > 0 {
                row[col_p(j)] -= 1.0;
                row[col_q(j)] += 1.0;
            }
            a.push(row);
            b.push(metric.at(i, j));
        }
    }
    let mut c = vec![0.0; nv];
    for i in 1..n {
        let w = nu.weight(i) - mu.weight(i);
        c[col_p(i)] = w;
        c[col_q(i)] = -w;
    }
    let (value, _) = lp::simplex_max(&a, &b, &c)?;
    Ok(value.max(0.0))
}

/// The weighted discrete cost `d_χ(x,y) = 1_{x≠y}(χ(x)+χ(y))`: a metric
/// when χ has at most one zero, a semimetric otherwise (flagged as a
/// general cost).
pub fn chi_metric(chi: &[f64]) -> Result<CostMatrix> {
    let n = chi.len();
    if n == 0 {
        return Err(Error::Empty("chi"));
    }
    for (i, &x) in chi.iter().enumerate() {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Negative { idx: i, value: x });
        }
    }
    let zeros = chi.iter().filter(|&&x| x == 0.0).count();
    let kind = if zeros <= 1 { CostKind::Metric } else { CostKind::GeneralCost };
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c[i * n + j] = chi[i] + chi[j];
            }
        }
    }
    CostMatrix::new(n, n, c, kind)
}

/// Sum cost on the product space (row-major): `(c₁⊕c₂)((i,j),(k,l)) =
/// c₁(i,k) + c₂(j,l)`. A sum of metrics is again a metric.
pub fn tensor_cost(c1: &CostMatrix, c2: &CostMatrix) -> Result<CostMatrix> {
    if c1.rows() != c1.cols() || c2.rows() != c2.cols() {
        return Err(Error::InvalidCost("tensor_cost needs square factors".into()));
    }
    let (n1, n2) = (c1.rows(), c2.rows());
    let n = n1 * n2;
    let mut c = vec![0.0; n * n];
    for i1 in 0..n1 {
        for j1 in 0..n2 {
            for i2 in 0..n1 {
                for j2 in 0..n2 {
                    c[(i1 * n2 + j1) * n + (i2 * n2 + j2)] = c1.at(i1, i2) + c2.at(j1, j2);
                }
            }
        }
    }
    let kind = if c1.is_metric() && c2.is_metric() { CostKind::Metric } else { CostKind::GeneralCost };
    CostMatrix::new(n, n, c, kind)
}

/// Checks the identity `𝒯_{d_χ}(μ,ν) = ‖χ·(μ−ν)‖_TV` by computing both
/// sides independently.
pub fn chi_tv_identity_check(mu: &ProbMeasure, nu: &ProbMeasure, chi: &[f64]) -> Result<bool> {
    let d = chi_metric(chi)?;
    let ot = ot_value(mu, nu, &d)?;
    let wtv = weighted_tv(nu, mu, chi)?;
    Ok((ot - wtv).abs() <= DUALITY_TOL)
}
