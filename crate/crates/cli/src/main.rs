//! Batch front end: load spaces/measures/costs/rate specs, dispatch the
//! computations and emit reports.
//!
//! Exit codes: 0 on success (inequalities hold), 2 when an inequality is
//! falsified (the report carries a witness), 1 on usage or config errors.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tci::config::{CostFile, FamilySpec, RateSpec, SpaceFile};
use tci::criteria;
use tci::devlab::{self, ExperimentConfig};
use tci::duality::{self, PotentialFamily, TransportFunctional};
use tci::measures::{relative_entropy, ProbMeasure};
use tci::ratefn::RateFunction;
use tci::tensor;
use tci::transport::{self, CostMatrix};

#[derive(Parser)]
#[command(name = "tci", version, about = "Transport and entropy inequalities on finite spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Report file; stdout summaries are printed either way.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an optimal transport problem (first measure to second).
    Ot {
        /// Measure files: μ then ν.
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        measure: Vec<PathBuf>,
        #[arg(long)]
        cost: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Relative entropy H(ν|μ) of the second measure against the first.
    Entropy {
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        measure: Vec<PathBuf>,
    },
    /// Monotone conjugate of a rate function.
    Conjugate {
        #[arg(long)]
        alpha: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Inf-convolution of two rate functions.
    Infconv {
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        alpha: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a rate-function constructor by name.
    Alpha {
        /// weighted-ckp | orlicz-nei | small-t | t1-integral | dp |
        /// chi-envelope | moment | best
        constructor: String,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: Option<PathBuf>,
        /// Comma-separated nonnegative weights.
        #[arg(long, value_delimiter = ',')]
        chi: Vec<f64>,
        /// Rate spec file for the γ or β input.
        #[arg(long)]
        gamma: Option<PathBuf>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value = "0")]
        base_point: usize,
        #[arg(long)]
        family: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Dual criterion: Λ over the family stays below the conjugate rate.
    BgCheck {
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The best increasing function J_Φ of a family.
    Jphi {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Brute-force best transportation function over a simplex grid.
    BruteJ {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        /// Barycentric grid step h.
        #[arg(long, default_value = "1e-3")]
        grid: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Product-space sweep of the tensorized inequality.
    TensorCheck {
        /// Factor measures: μ1 then μ2.
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        measure: Vec<PathBuf>,
        /// Factor costs: c1 then c2.
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        cost: Vec<PathBuf>,
        /// Factor rates: α1 then α2.
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        alpha: Vec<PathBuf>,
        #[arg(long, default_value = "5.6e-3")]
        grid: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Concentration bound over all subsets and an r-grid.
    Marton {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        /// Number of radii past r_A per subset.
        #[arg(long, default_value = "100")]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact concentration function over enumerated subsets.
    Concentration {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        /// Number of radii on [0, diameter].
        #[arg(long, default_value = "100")]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo tail of the transport cost of empirical measures.
    Deviate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo tail of an empirical process over a Lipschitz class.
    EmpProcess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        /// Family file supplying the class (its member potentials);
        /// defaults to the Lipschitz ball of the cost.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo deviations of the empirical mean in coordinates.
    BanachDev {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
}

fn load_measure(path: &Path) -> Result<ProbMeasure> {
    let file: SpaceFile = read_json(path)?;
    Ok(file.to_measure().with_context(|| format!("in {}", path.display()))?)
}

fn load_cost(path: &Path) -> Result<CostMatrix> {
    let file: CostFile = read_json(path)?;
    Ok(file.to_cost().with_context(|| format!("in {}", path.display()))?)
}

fn load_rate(path: &Path) -> Result<RateFunction> {
    let spec: RateSpec = read_json(path)?;
    Ok(spec.to_rate().with_context(|| format!("in {}", path.display()))?)
}

fn load_family(
    path: &Path,
    mu: &ProbMeasure,
    cost: Option<&CostMatrix>,
) -> Result<PotentialFamily> {
    let spec: FamilySpec = read_json(path)?;
    Ok(spec.build(mu, cost).with_context(|| format!("in {}", path.display()))?)
}

fn two_measures(paths: &[PathBuf], what: &str) -> Result<(ProbMeasure, ProbMeasure)> {
    if paths.len() != 2 {
        bail!("{what} needs exactly two --measure files (μ then ν), got {}", paths.len());
    }
    Ok((load_measure(&paths[0])?, load_measure(&paths[1])?))
}

fn write_out(output: &OutputArgs, report: &serde_json::Value, csv: Option<String>) -> Result<()> {
    let Some(path) = &output.out else { return Ok(()) };
    let body = match (output.format, csv) {
        (Format::Csv, Some(text)) => text,
        (Format::Csv, None) => {
            bail!("this subcommand has no CSV form; use --format json")
        }
        (Format::Json, _) => serde_json::to_string_pretty(report)?,
    };
    fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn curve_csv(t: &[f64], v: &[f64]) -> String {
    let mut s = String::from("t,value\n");
    for (a, b) in t.iter().zip(v) {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

fn rate_report(rate: &RateFunction, output: &OutputArgs) -> Result<()> {
    let spec = RateSpec::sampled_from(rate, None)?;
    let report = serde_json::to_value(&spec)?;
    let csv = if let RateSpec::Sampled { ref t, ref v, .. } = spec {
        Some(curve_csv(t, v))
    } else {
        None
    };
    if let RateSpec::Sampled { ref t, ref v, .. } = spec {
        let mid = t.len() / 2;
        println!(
            "rate sampled on [0, {:.6}] ({} knots), e.g. alpha({:.4}) = {:.6}",
            t.last().unwrap(),
            t.len(),
            t[mid],
            v[mid]
        );
    }
    write_out(output, &report, csv)
}

fn tail_report_out(report: &devlab::TailReport, output: &OutputArgs) -> Result<bool> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let value = serde_json::to_value(report)?;
    write_out(output, &value, Some(String::from_utf8(csv)?))?;
    let fails = report.failing_cells();
    if report.all_pass {
        println!("all {} cells pass", report.cells.len());
    } else {
        println!("{} of {} cells FAIL; first witness: {:?}", fails.len(), report.cells.len(), fails.first());
    }
    Ok(report.all_pass)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ot { measure, cost, output } => {
            let (mu, nu) = two_measures(&measure, "ot")?;
            let c = load_cost(&cost)?;
            let (value, plan) = transport::solve_ot(&mu, &nu, &c)?;
            let dual = transport::solve_dual(&mu, &nu, &c)?;
            println!("transport cost = {value:.12}");
            let rows: Vec<Vec<f64>> = (0..mu.len())
                .map(|i| (0..nu.len()).map(|j| plan.at(i, j)).collect())
                .collect();
            let report = json!({
                "value": value,
                "plan": rows,
                "dual": {"psi": dual.psi, "phi": dual.phi, "value": dual.value},
                "feasibility_residual": plan.feasibility_residual(&mu, &nu),
            });
            write_out(&output, &report, None)?;
            Ok(true)
        }
        Command::Entropy { measure } => {
            let (mu, nu) = two_measures(&measure, "entropy")?;
            let h = relative_entropy(&nu, &mu)?;
            if h.is_finite() {
                println!("{h:.12}");
            } else {
                println!("inf");
            }
            Ok(true)
        }
        Command::Conjugate { alpha, output } => {
            let rate = load_rate(&alpha)?;
            let conj = rate.monotone_conjugate()?;
            rate_report(&conj, &output)?;
            Ok(true)
        }
        Command::Infconv { alpha, output } => {
            if alpha.len() != 2 {
                bail!("infconv needs exactly two --alpha files, got {}", alpha.len());
            }
            let a = load_rate(&alpha[0])?;
            let b = load_rate(&alpha[1])?;
            let conv = tci::ratefn::inf_convolution(&a, &b)?;
            rate_report(&conv, &output)?;
            Ok(true)
        }
        Command::Alpha {
            constructor,
            measure,
            cost,
            chi,
            gamma,
            a,
            p,
            base_point,
            family,
            output,
        } => {
            let mu = load_measure(&measure)?;
            let cost = cost.map(|p| load_cost(&p)).transpose()?;
            let gamma = gamma.map(|p| load_rate(&p)).transpose()?;
            let need_cost = || {
                cost.clone()
                    .ok_or_else(|| anyhow::anyhow!("constructor {constructor} needs --cost"))
            };
            let need_gamma =
                || gamma.clone().unwrap_or_else(RateFunction::zero);
            let rate = match constructor.as_str() {
                "weighted-ckp" => criteria::alpha_weighted_ckp(&chi, &mu)?,
                "small-t" => criteria::alpha_small_t(&chi, &mu)?,
                "orlicz-nei" => criteria::alpha_orlicz_nei(),
                "t1-integral" => criteria::alpha_t1_integral(
                    &need_cost()?,
                    &mu,
                    a.unwrap_or(0.0),
                    &need_gamma(),
                    base_point,
                )?,
                "dp" => criteria::alpha_dp(
                    &need_cost()?,
                    p.unwrap_or(1.0),
                    &mu,
                    &need_gamma(),
                    base_point,
                )?,
                "chi-envelope" => {
                    criteria::alpha_chi_envelope(&chi, &mu, &need_gamma(), base_point)?
                }
                "moment" => criteria::alpha_moment(&need_cost()?, &mu, &need_gamma())?,
                "best" => {
                    let fam_path = family
                        .ok_or_else(|| anyhow::anyhow!("constructor best needs --family"))?;
                    let fam = load_family(&fam_path, &mu, cost.as_ref())?;
                    duality::best_alpha(&fam, &mu)?
                }
                other => bail!("unknown constructor {other:?}"),
            };
            rate_report(&rate, &output)?;
            Ok(true)
        }
        Command::BgCheck { alpha, family, measure, cost, output } => {
            let mu = load_measure(&measure)?;
            let cost = cost.map(|p| load_cost(&p)).transpose()?;
            let fam = load_family(&family, &mu, cost.as_ref())?;
            let rate = load_rate(&alpha)?;
            let rep = duality::bg_check(&rate, &fam, &mu)?;
            let witness = rep.witness.map(|(s, mi)| {
                let m = &fam.members()[mi];
                json!({"s": s, "member": mi, "psi": m.psi, "phi": m.phi})
            });
            let report = json!({
                "holds": rep.holds,
                "worst_gap": rep.worst_gap,
                "exact_family": rep.exact,
                "witness": witness,
            });
            println!(
                "dual criterion {} (worst gap {:.3e})",
                if rep.holds { "holds" } else { "FAILS" },
                rep.worst_gap
            );
            write_out(&output, &report, None)?;
            Ok(rep.holds)
        }
        Command::Jphi { family, measure, cost, output } => {
            let mu = load_measure(&measure)?;
            let cost = cost.map(|p| load_cost(&p)).transpose()?;
            let fam = load_family(&family, &mu, cost.as_ref())?;
            let j = duality::j_phi(&fam, &mu)?;
            let (t, v) = j.piecewise().knots();
            let report = json!({"t": t, "v": v, "exact_family": fam.is_exact()});
            println!("J_Phi sampled on [0, {:.6}] ({} knots)", t.last().unwrap(), t.len());
            write_out(&output, &report, Some(curve_csv(t, v)))?;
            Ok(true)
        }
        Command::BruteJ { measure, cost, grid, output } => {
            let mu = load_measure(&measure)?;
            let c = load_cost(&cost)?;
            let j = duality::best_transport_brute(&mu, &TransportFunctional::Cost(c), grid)?;
            let (t, v) = j.piecewise().knots();
            let report = json!({"t": t, "v": v, "grid_step": grid});
            println!("brute J sampled on [0, {:.6}] ({} knots)", t.last().unwrap(), t.len());
            write_out(&output, &report, Some(curve_csv(t, v)))?;
            Ok(true)
        }
        Command::TensorCheck { measure, cost, alpha, grid, output } => {
            let (mu1, mu2) = two_measures(&measure, "tensor-check")?;
            if cost.len() != 2 || alpha.len() != 2 {
                bail!("tensor-check needs two --cost and two --alpha files");
            }
            let c1 = load_cost(&cost[0])?;
            let c2 = load_cost(&cost[1])?;
            let a1 = load_rate(&alpha[0])?;
            let a2 = load_rate(&alpha[1])?;
            let rep = tensor::verify_product_tci(&mu1, &mu2, &c1, &c2, &a1, &a2, grid)?;
            let report = json!({
                "holds": rep.holds,
                "worst_gap": rep.worst_gap,
                "grid_points": rep.points.to_string(),
                "witness": rep.witness.map(|(w, gap)| json!({"nu": w, "gap": gap})),
            });
            println!(
                "product inequality {} over {} grid points (worst gap {:.3e})",
                if rep.holds { "holds" } else { "FAILS" },
                rep.points,
                rep.worst_gap
            );
            write_out(&output, &report, None)?;
            Ok(rep.holds)
        }
        Command::Marton { measure, cost, alpha, grid, output } => {
            let mu = load_measure(&measure)?;
            let c = load_cost(&cost)?;
            let rate = load_rate(&alpha)?;
            let rep = devlab::marton_bound_check(&mu, &c, &rate, grid)?;
            let report = serde_json::to_value(&rep)?;
            println!(
                "concentration bound {} over {} subsets (worst slack {:.3e})",
                if rep.holds { "holds" } else { "FAILS" },
                rep.subsets,
                rep.worst_slack
            );
            write_out(&output, &report, None)?;
            Ok(rep.holds && rep.lipschitz_holds)
        }
        Command::Concentration { measure, cost, grid, output } => {
            let mu = load_measure(&measure)?;
            let c = load_cost(&cost)?;
            let diam = c.max_entry();
            let r_grid: Vec<f64> =
                (0..=grid).map(|k| diam * k as f64 / grid.max(1) as f64).collect();
            let curve = devlab::concentration_function(&mu, &c, &r_grid)?;
            let (r, th): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
            let report = json!({"r": r, "theta": th});
            write_out(&output, &report, Some(curve_csv(&r, &th)))?;
            println!("concentration curve over {} radii (max {:.6})", r.len(), th.first().unwrap());
            Ok(true)
        }
        Command::Deviate { config, measure, cost, alpha, family, seed, replicas, output } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            let mu = load_measure(&measure)?;
            let c = load_cost(&cost)?;
            let rate = load_rate(&alpha)?;
            let fam = family
                .map(|p| load_family(&p, &mu, Some(&c)))
                .transpose()?;
            let rep = devlab::deviation_tail(&cfg, &mu, &rate, &c, fam.as_ref())?;
            tail_report_out(&rep, &output)
        }
        Command::EmpProcess { config, measure, cost, alpha, family, seed, replicas, output } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            let mu = load_measure(&measure)?;
            let c = load_cost(&cost)?;
            let rate = load_rate(&alpha)?;
            let fam = match family {
                Some(p) => load_family(&p, &mu, Some(&c))?,
                None => PotentialFamily::lipschitz_ball(&c, &mu)?,
            };
            let class: Vec<Vec<f64>> =
                fam.members().iter().map(|p| p.phi.clone()).collect();
            let rep = devlab::empirical_process(&cfg, &mu, &c, &class, &rate)?;
            tail_report_out(&rep, &output)
        }
        Command::BanachDev { config, measure, seed, replicas, output } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            let mu = load_measure(&measure)?;
            let rep = devlab::banach_mean_deviation(&cfg, &mu)?;
            let value = serde_json::to_value(&rep)?;
            let mut csv = Vec::new();
            rep.tail.write_csv(&mut csv)?;
            write_out(&output, &value, Some(String::from_utf8(csv)?))?;
            println!(
                "M = {:.6}, M0 = {:.6}, ordering {}",
                rep.m_pair,
                rep.m_base,
                if rep.ordering_holds { "holds" } else { "FAILS" }
            );
            Ok(rep.tail.all_pass && rep.ordering_holds)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}
