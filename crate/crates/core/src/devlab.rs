//! Monte Carlo and exact-enumeration laboratory: empirical-measure tail
//! bounds, concentration of measure over enumerated subsets, empirical
//! processes over Lipschitz classes, and deviations of empirical means in
//! coordinate spaces.
//!
//! Randomness comes from counter-based deterministic streams keyed by
//! `(seed, purpose, sample-size index, replica)`, so reports are
//! bit-identical regardless of the parallel schedule: per-replica results
//! are merged by integer counts or order-preserving collection.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{orlicz_norm, orlicz_norm_pair};
use crate::duality::PotentialFamily;
use crate::measures::ProbMeasure;
use crate::ratefn::RateFunction;
use crate::transport::{ot_value, CostMatrix};
use crate::{Error, Result};

/// Experiment frame: seed, replica count, sample sizes and the tail grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: usize,
    pub sample_sizes: Vec<usize>,
    pub t_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicas < 1 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        if self.sample_sizes.iter().any(|&n| n < 1) {
            return Err(Error::Config("sample sizes must be >= 1".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("t grid must be sorted ascending".into()));
        }
        if self.t_grid.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::Config("t grid must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Stream purposes keep tail replicas and expectation-estimation replicas
/// independent.
#[derive(Clone, Copy)]
enum Purpose {
    Tail = 0,
    Expectation = 1,
}

fn stream_rng(seed: u64, purpose: Purpose, n_index: usize, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((purpose as u64) << 56) | ((n_index as u64 & 0xffff) << 40) | replica as u64;
    rng.set_stream(id);
    rng
}

/// Draws the empirical measure of an n-sample by inverse-CDF lookups on a
/// deterministic stream.
pub fn sample_empirical(mu: &ProbMeasure, n: usize, rng: &mut impl Rng) -> Result<ProbMeasure> {
    if n < 1 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    let counts = sample_counts(mu, n, rng);
    let w: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    ProbMeasure::from_unnormalized(mu.space().clone(), w)
}

fn cdf_of(mu: &ProbMeasure) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(mu.len());
    for &w in mu.weights() {
        acc += w;
        cdf.push(acc);
    }
    let k = cdf.len();
    cdf[k - 1] = 1.0;
    cdf
}

fn sample_counts(mu: &ProbMeasure, n: usize, rng: &mut impl Rng) -> Vec<u32> {
    let cdf = cdf_of(mu);
    let mut counts = vec![0u32; mu.len()];
    for _ in 0..n {
        let u: f64 = rng.gen();
        let idx = cdf.partition_point(|&c| c <= u).min(mu.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// One `(n, t)` cell of a tail comparison: the empirical tail probability,
/// its binomial standard error, the analytic bound `e^{−nα(t)}` and the
/// one-sided verdict `p̂ ≤ bound + 3·stderr`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCell {
    pub n: usize,
    pub t: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub bound: f64,
    pub pass: bool,
}

fn make_cell(n: usize, t: f64, count: u64, replicas: usize, bound: f64) -> TailCell {
    let p_hat = count as f64 / replicas as f64;
    let std_err = (p_hat * (1.0 - p_hat) / replicas as f64).sqrt();
    TailCell { n, t, p_hat, std_err, bound, pass: p_hat <= bound + 3.0 * std_err }
}

/// A per-member cell of the fixed-n statement: for a potential pair,
/// `P(⟨φ,L_n⟩+⟨ψ,μ⟩ ≥ t) ≤ e^{−nα(t)}` at every n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberTailCell {
    pub member: usize,
    pub cell: TailCell,
}

/// Full tail report with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub seed: u64,
    pub replicas: usize,
    pub cells: Vec<TailCell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub member_cells: Vec<MemberTailCell>,
    pub all_pass: bool,
}

impl TailReport {
    pub fn failing_cells(&self) -> Vec<&TailCell> {
        self.cells.iter().filter(|c| !c.pass).collect()
    }

    /// One CSV row per `(n, t)` cell (member cells carry their index).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "member,n,t,p_hat,std_err,bound,pass")?;
        for c in &self.cells {
            writeln!(
                w,
                ",{},{},{},{},{},{}",
                c.n, c.t, c.p_hat, c.std_err, c.bound, c.pass
            )?;
        }
        for m in &self.member_cells {
            let c = &m.cell;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                m.member, c.n, c.t, c.p_hat, c.std_err, c.bound, c.pass
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo validation of a deviation bound: for each sample size n and
/// threshold t, the empirical tail of `𝒯_C(μ, L_n)` is compared to
/// `e^{−nα(t)}`. With a family supplied, the per-member fixed-n statement
/// is checked as well.
pub fn deviation_tail(
    config: &ExperimentConfig,
    mu: &ProbMeasure,
    alpha: &RateFunction,
    cost: &CostMatrix,
    family: Option<&PotentialFamily>,
) -> Result<TailReport> {
    config.validate()?;
    if cost.rows() != mu.len() || cost.cols() != mu.len() {
        return Err(Error::DimensionMismatch(cost.rows(), mu.len()));
    }
    let nt = config.t_grid.len();
    let n_members = family.map_or(0, |f| f.members().len());
    let mut cells = Vec::new();
    let mut member_cells = Vec::new();

    for (n_idx, &n) in config.sample_sizes.iter().enumerate() {
        let member_means: Vec<f64> = family
            .map(|f| f.members().iter().map(|p| mu.expect(&p.psi)).collect())
            .unwrap_or_default();
        let counts: Vec<u64> = (0..config.replicas)
            .into_par_iter()
            .map(|replica| {
                let mut rng = stream_rng(config.seed, Purpose::Tail, n_idx, replica);
                let ln = sample_empirical(mu, n, &mut rng).expect("sample");
                let t_value = ot_value(mu, &ln, cost).expect("transport");
                let mut local = vec![0u64; nt * (1 + n_members)];
                for (k, &t) in config.t_grid.iter().enumerate() {
                    if t_value >= t {
                        local[k] = 1;
                    }
                }
                if let Some(fam) = family {
                    for (mi, p) in fam.members().iter().enumerate() {
                        let tm = ln.expect(&p.phi) + member_means[mi];
                        for (k, &t) in config.t_grid.iter().enumerate() {
                            if tm >= t {
                                local[nt * (1 + mi) + k] = 1;
                            }
                        }
                    }
                }
                local
            })
            .reduce(
                || vec![0u64; nt * (1 + n_members)],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        for (k, &t) in config.t_grid.iter().enumerate() {
            let bound = (-(n as f64) * alpha.eval(t)).exp();
            cells.push(make_cell(n, t, counts[k], config.replicas, bound));
        }
        if family.is_some() {
            for mi in 0..n_members {
                for (k, &t) in config.t_grid.iter().enumerate() {
                    let bound = (-(n as f64) * alpha.eval(t)).exp();
                    member_cells.push(MemberTailCell {
                        member: mi,
                        cell: make_cell(n, t, counts[nt * (1 + mi) + k], config.replicas, bound),
                    });
                }
            }
        }
    }
    let all_pass =
        cells.iter().all(|c| c.pass) && member_cells.iter().all(|m| m.cell.pass);
    Ok(TailReport { seed: config.seed, replicas: config.replicas, cells, member_cells, all_pass })
}

/// The r-enlargement `A^r = {x : d(x, A) ≤ r}` of a subset.
pub fn enlargement(subset: &[usize], r: f64, d: &CostMatrix) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::Empty("subset"));
    }
    if !d.is_metric() {
        return Err(Error::MetricRequired("enlargement needs a metric".into()));
    }
    Ok((0..d.rows()).filter(|&x| d.dist_to_set(x, subset) <= r).collect())
}

/// The concentration function `θ_μ(r) = sup{1 − μ(A^r) : μ(A) ≥ 1/2}`,
/// exactly over all enumerated subsets (n ≤ 20).
pub fn concentration_function(
    mu: &ProbMeasure,
    d: &CostMatrix,
    r_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("concentration_function needs a metric".into()));
    }
    let n = mu.len();
    if d.rows() != n {
        return Err(Error::DimensionMismatch(d.rows(), n));
    }
    if n > 20 {
        return Err(Error::BudgetExceeded(format!(
            "subset enumeration limited to 20 points, got {n}"
        )));
    }
    let masks: Vec<u32> = (1u32..(1 << n))
        .filter(|&mask| {
            let m: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| mu.weight(i)).sum();
            m >= 0.5
        })
        .collect();
    let mut out = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let theta = masks
            .par_iter()
            .map(|&mask| {
                let subset: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let outside: f64 = (0..n)
                    .filter(|&x| d.dist_to_set(x, &subset) > r)
                    .map(|x| mu.weight(x))
                    .sum();
                outside
            })
            .reduce(|| 0.0, f64::max);
        out.push((r, theta));
    }
    Ok(out)
}

/// Verdict of the concentration sweep: for every subset A and every radius
/// past `r_A = α^{-1}(−log μ(A))`, the enlargement keeps mass
/// `μ(A^r) ≥ 1 − e^{−α(r − r_A)}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartonReport {
    pub holds: bool,
    /// Smallest slack `μ(A^r) − (1 − e^{−α(r−r_A)})` over all cells.
    pub worst_slack: f64,
    /// `(subset mask, r)` attaining a violation, if any.
    pub witness: Option<(u32, f64)>,
    pub subsets: usize,
    /// The Lipschitz tail bound `μ(φ ≥ ⟨φ,μ⟩ + t) ≤ e^{−α(t)}` over the
    /// supplied vertex potentials.
    pub lipschitz_holds: bool,
    pub lipschitz_worst: f64,
}

pub fn marton_bound_check(
    mu: &ProbMeasure,
    d: &CostMatrix,
    alpha: &RateFunction,
    r_points: usize,
) -> Result<MartonReport> {
    if !d.is_metric() {
        return Err(Error::MetricRequired("marton_bound_check needs a metric".into()));
    }
    let n = mu.len();
    if d.rows() != n {
        return Err(Error::DimensionMismatch(d.rows(), n));
    }
    if n > 12 {
        return Err(Error::BudgetExceeded(format!(
            "subset enumeration limited to 12 points, got {n}"
        )));
    }
    alpha.require_class_c()?;
    let diam = d.max_entry();

    let masks: Vec<u32> = (1u32..(1 << n))
        .filter(|&mask| (0..n).any(|i| mask >> i & 1 == 1 && mu.weight(i) > 0.0))
        .collect();
    // Radii where the bound could fail must be reachable by the inverse.
    for &mask in &masks {
        let m: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| mu.weight(i)).sum();
        alpha.generalized_inverse(-m.ln())?;
    }

    type Acc = (f64, Option<(u32, f64)>);
    let (worst_slack, witness) = masks
        .par_iter()
        .map(|&mask| {
            let subset: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let mass = mu.mass(&subset);
            let r_a = alpha.generalized_inverse(-mass.ln()).expect("checked above");
            let mut local: Acc = (f64::INFINITY, None);
            for k in 0..=r_points {
                let r = r_a + diam * k as f64 / r_points as f64;
                let enlarged: f64 = (0..n)
                    .filter(|&x| d.dist_to_set(x, &subset) <= r)
                    .map(|x| mu.weight(x))
                    .sum();
                let bound = 1.0 - (-alpha.eval((r - r_a).max(0.0))).exp();
                let slack = enlarged - bound;
                if slack < local.0 {
                    local = (slack, Some((mask, r)));
                }
            }
            local
        })
        .reduce(
            || (f64::INFINITY, None),
            |a: Acc, b: Acc| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );

    // Companion check: the tail bound for 1-Lipschitz vertex potentials.
    let fam = PotentialFamily::lipschitz_ball(d, mu)?;
    let mut lipschitz_worst = f64::NEG_INFINITY;
    for p in fam.members() {
        let mean = mu.expect(&p.phi);
        for k in 1..=r_points {
            let t = diam * k as f64 / r_points as f64;
            let tail: f64 = (0..n)
                .filter(|&i| p.phi[i] >= mean + t)
                .map(|i| mu.weight(i))
                .sum();
            let bound = (-alpha.eval(t)).exp();
            lipschitz_worst = lipschitz_worst.max(tail - bound);
        }
    }
    let holds = worst_slack >= -1e-9;
    Ok(MartonReport {
        holds,
        worst_slack,
        witness: if holds { None } else { witness },
        subsets: masks.len(),
        lipschitz_holds: lipschitz_worst <= 1e-9,
        lipschitz_worst,
    })
}

/// Tail validation for the empirical process
/// `Z_n = max_g |⟨g, L_n − μ⟩|` over a finite class of 1-Lipschitz
/// potentials: `P(Z_n ≥ Ê[Z_n] + t) ≤ e^{−nα(t)}`, with the expectation
/// estimated on an independent batch of a tenth of the replicas.
pub fn empirical_process(
    config: &ExperimentConfig,
    mu: &ProbMeasure,
    d: &CostMatrix,
    class: &[Vec<f64>],
    alpha: &RateFunction,
) -> Result<TailReport> {
    config.validate()?;
    for g in class {
        if g.len() != mu.len() {
            return Err(Error::DimensionMismatch(g.len(), mu.len()));
        }
        for i in 0..g.len() {
            for j in 0..g.len() {
                if (g[i] - g[j]).abs() > d.at(i, j) + 1e-9 {
                    return Err(Error::Domain(format!(
                        "class member is not 1-Lipschitz at ({i},{j})"
                    )));
                }
            }
        }
    }
    let means: Vec<f64> = class.iter().map(|g| mu.expect(g)).collect();
    let z_of = |ln: &ProbMeasure| -> f64 {
        class
            .iter()
            .zip(&means)
            .map(|(g, m)| (ln.expect(g) - m).abs())
            .fold(0.0, f64::max)
    };

    let mut cells = Vec::new();
    for (n_idx, &n) in config.sample_sizes.iter().enumerate() {
        let est_batch = (config.replicas / 10).max(1);
        let zs: Vec<f64> = (0..est_batch)
            .into_par_iter()
            .map(|replica| {
                let mut rng = stream_rng(config.seed, Purpose::Expectation, n_idx, replica);
                let ln = sample_empirical(mu, n, &mut rng).expect("sample");
                z_of(&ln)
            })
            .collect();
        let e_z: f64 = zs.iter().sum::<f64>() / est_batch as f64;

        let counts: Vec<u64> = (0..config.replicas)
            .into_par_iter()
            .map(|replica| {
                let mut rng = stream_rng(config.seed, Purpose::Tail, n_idx, replica);
                let ln = sample_empirical(mu, n, &mut rng).expect("sample");
                let z = z_of(&ln);
                config
                    .t_grid
                    .iter()
                    .map(|&t| u64::from(z >= e_z + t))
                    .collect::<Vec<u64>>()
            })
            .reduce(
                || vec![0u64; config.t_grid.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        for (k, &t) in config.t_grid.iter().enumerate() {
            let bound = (-(n as f64) * alpha.eval(t)).exp();
            cells.push(make_cell(n, t, counts[k], config.replicas, bound));
        }
    }
    let all_pass = cells.iter().all(|c| c.pass);
    Ok(TailReport {
        seed: config.seed,
        replicas: config.replicas,
        cells,
        member_cells: vec![],
        all_pass,
    })
}

/// Report for deviations of the empirical mean in a coordinate space,
/// carrying both the square-root-form bound at the pair norm M and the
/// weaker classical curve at the base norm M₀.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BanachReport {
    pub tail: TailReport,
    /// Orlicz norm of the distance under μ⊗μ.
    pub m_pair: f64,
    /// Orlicz norm of the point norms under μ.
    pub m_base: f64,
    /// The classical comparison curve `exp(−(1/8) n t²/(2M₀²+tM₀))` per cell.
    pub weaker_bounds: Vec<f64>,
    /// `(√(1+t/M)−1)² ≥ t²/(8(2M₀²+tM₀))` on the grid, plus `M ≤ 2M₀`.
    pub ordering_holds: bool,
}

/// Monte Carlo tails of `Z_n = ‖(1/n)ΣX_i − E X‖₂` for a measure with
/// coordinates, against `e^{−n(√(1+t/M)−1)²}`.
pub fn banach_mean_deviation(
    config: &ExperimentConfig,
    mu: &ProbMeasure,
) -> Result<BanachReport> {
    config.validate()?;
    let coords = mu
        .space()
        .coords()
        .ok_or_else(|| Error::Domain("banach_mean_deviation needs coordinates".into()))?
        .to_vec();
    let q = coords.first().map_or(0, |c| c.len());
    let d = CostMatrix::euclidean(&coords)?;
    let m_pair = orlicz_norm_pair(&d, mu)?.value;
    let norms: Vec<f64> = coords
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let m_base = orlicz_norm(&norms, mu)?.value;

    let mean: Vec<f64> = (0..q)
        .map(|k| coords.iter().zip(mu.weights()).map(|(c, &w)| w * c[k]).sum())
        .collect();
    let alpha = if m_pair > 0.0 {
        RateFunction::sqrt_form(m_pair)?
    } else {
        RateFunction::threshold(0.0)?
    };

    let z_of = |counts: &[u32], n: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..q {
            let mut xk = 0.0;
            for (i, &c) in counts.iter().enumerate() {
                xk += c as f64 * coords[i][k];
            }
            let diff = xk / n as f64 - mean[k];
            s += diff * diff;
        }
        s.sqrt()
    };

    let mut cells = Vec::new();
    let mut weaker_bounds = Vec::new();
    for (n_idx, &n) in config.sample_sizes.iter().enumerate() {
        let est_batch = (config.replicas / 10).max(1);
        let zs: Vec<f64> = (0..est_batch)
            .into_par_iter()
            .map(|replica| {
                let mut rng = stream_rng(config.seed, Purpose::Expectation, n_idx, replica);
                let counts = sample_counts(mu, n, &mut rng);
                z_of(&counts, n)
            })
            .collect();
        let e_z: f64 = zs.iter().sum::<f64>() / est_batch as f64;

        let counts: Vec<u64> = (0..config.replicas)
            .into_par_iter()
            .map(|replica| {
                let mut rng = stream_rng(config.seed, Purpose::Tail, n_idx, replica);
                let c = sample_counts(mu, n, &mut rng);
                let z = z_of(&c, n);
                config
                    .t_grid
                    .iter()
                    .map(|&t| u64::from(z >= e_z + t))
                    .collect::<Vec<u64>>()
            })
            .reduce(
                || vec![0u64; config.t_grid.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        for (k, &t) in config.t_grid.iter().enumerate() {
            let bound = (-(n as f64) * alpha.eval(t)).exp();
            cells.push(make_cell(n, t, counts[k], config.replicas, bound));
            let weaker = if m_base > 0.0 {
                (-(n as f64) * t * t / (8.0 * (2.0 * m_base * m_base + t * m_base))).exp()
            } else {
                f64::from(t <= 0.0)
            };
            weaker_bounds.push(weaker);
        }
    }

    // Exponent ordering on the grid plus the norm comparison M ≤ 2M₀.
    let mut ordering_holds = m_pair <= 2.0 * m_base + 1e-9;
    if m_pair > 0.0 && m_base > 0.0 {
        for &t in &config.t_grid {
            if t <= 0.0 {
                continue;
            }
            let strong = ((1.0 + t / m_pair).sqrt() - 1.0).powi(2);
            let weak = t * t / (8.0 * (2.0 * m_base * m_base + t * m_base));
            if strong < weak - 1e-12 {
                ordering_holds = false;
            }
        }
    }
    let all_pass = cells.iter().all(|c| c.pass);
    Ok(BanachReport {
        tail: TailReport {
            seed: config.seed,
            replicas: config.replicas,
            cells,
            member_cells: vec![],
            all_pass,
        },
        m_pair,
        m_base,
        weaker_bounds,
        ordering_holds,
    })
}
