//! `tridis` command line: self-energy cell formulas, recovery strains,
//! energy minimization, scaling studies, and the thin-annulus diagnostic.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! non-convergence, 1 anything else.

mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::{parse_config, RunConfig};
use tridis::elasticity::{phi, psi, psi_annulus, DEFAULT_PROFILE_MODES};
use tridis::energy::{linearized_tensor, total_energy, PotentialPair};
use tridis::io::{fmt_f64, write_loglog_svg, CsvTable};
use tridis::lattice::{build_domain, LatticeSpec};
use tridis::minimize::{minimize, MinimizeProblem};
use tridis::recovery::{build_recovery, snap_positions, RecoveryInput};
use tridis::strain::{lattice_vector, strain_to_csv, DislocationMeasure};
use tridis::study::{
    demo_rows_to_csv, run_scaling, scaling_rows_to_csv, thin_annulus_demo, ScalingStudy,
    SolverSettings,
};

const EXIT_VALIDATION: i32 = 2;
const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "tridis",
    version,
    about = "Edge dislocations on a triangular lattice"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path (overrides [output] csv in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel assembly (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized test utilities; recorded in the manifest and
    /// never used by the physics paths.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Domain polygon file (overrides [lattice] domain in the config).
    #[arg(long, global = true)]
    domain: Option<PathBuf>,

    /// Lattice spacing (overrides [lattice] epsilon in the config).
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-energy prefactor ψ(b) by angular-profile minimization,
    /// optionally with a finite-annulus value.
    Selfenergy {
        /// Burgers vector in lattice coordinates, e.g. `1,0`.
        #[arg(long)]
        burgers: String,
        #[arg(long, default_value_t = 2.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha2: f64,
        /// Also minimize over the annulus `r1,r2`.
        #[arg(long)]
        annulus: Option<String>,
    },
    /// Relaxed self-energy φ(b) with its optimal decomposition.
    Phi {
        #[arg(long)]
        burgers: String,
        #[arg(long, default_value_t = 2.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha2: f64,
    },
    /// Build the recovery strain for the configured dislocations.
    Recover,
    /// Minimize the energy starting from the recovery strain.
    Minimize,
    /// Run the ε-ladder scaling study.
    Scaling {
        /// Also write a log-log plot of the normalized energies.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Thin-annulus rotating-ramp diagnostic.
    DemoThinAnnulus {
        /// Ramp position factor M (ramp on [Mε, 2Mε]).
        #[arg(long, default_value_t = 4.0)]
        m: f64,
        /// ε ladder, comma separated.
        #[arg(long, default_value = "0.03125,0.015625,0.0078125,0.00390625")]
        epsilons: String,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(message: String) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message,
        }
    }

    fn other(message: String) -> Self {
        Failure { code: 1, message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::other(e.to_string())
    }
}

impl From<tridis::Error> for Failure {
    fn from(e: tridis::Error) -> Self {
        let code = match &e {
            tridis::Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            tridis::Error::Io(_) | tridis::Error::LinearSolve(_) => 1,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let started = Instant::now();
    match run(&cli, started) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn parse_pair_i32(s: &str, what: &str) -> Result<(i32, i32), Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Failure::validation(format!(
            "{what}: expected two comma-separated values, got {s:?}"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|e| Failure::validation(format!("{what}: {e}")))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|e| Failure::validation(format!("{what}: {e}")))?;
    Ok((a, b))
}

fn parse_pair_f64(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Failure::validation(format!(
            "{what}: expected two comma-separated values, got {s:?}"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|e| Failure::validation(format!("{what}: {e}")))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|e| Failure::validation(format!("{what}: {e}")))?;
    Ok((a, b))
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::validation("this subcommand requires --config <file>".into()))?;
    let mut cfg = parse_config(path).map_err(|errs| {
        let mut msg = String::from("invalid configuration:\n");
        for e in errs {
            msg.push_str(&format!("  {e}\n"));
        }
        Failure::validation(msg.trim_end().to_string())
    })?;
    if let Some(eps) = cli.epsilon {
        if !(eps > 0.0) {
            return Err(Failure::validation(format!(
                "--epsilon must be positive, got {eps}"
            )));
        }
        cfg.epsilon = eps;
    }
    if let Some(domain) = &cli.domain {
        let text = std::fs::read_to_string(domain)
            .map_err(|e| Failure::validation(format!("--domain {}: {e}", domain.display())))?;
        cfg.domain = config::parse_polygon(&text)
            .map_err(|e| Failure::validation(format!("--domain {}: {e}", domain.display())))?;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, cfg: Option<&RunConfig>, default_name: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_csv.clone()))
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn write_manifest(cli: &Cli, out: &Path, started: Instant, extra: &[(&str, String)]) {
    let mut items: Vec<(String, String)> = vec![
        (
            "tool".into(),
            format!("tridis {}", env!("CARGO_PKG_VERSION")),
        ),
        (
            "elapsed_seconds".into(),
            format!("{:.3}", started.elapsed().as_secs_f64()),
        ),
    ];
    if let Some(cfg) = &cli.config {
        if let Ok(bytes) = std::fs::read(cfg) {
            let mut h = Sha256::new();
            h.update(&bytes);
            items.push(("config".into(), cfg.display().to_string()));
            items.push(("config_sha256".into(), format!("{:x}", h.finalize())));
        }
    }
    if let Some(seed) = cli.seed {
        items.push(("seed".into(), seed.to_string()));
    }
    if let Some(threads) = cli.threads {
        items.push(("threads".into(), threads.to_string()));
    }
    for (k, v) in extra {
        items.push((k.to_string(), v.clone()));
    }
    let mut text = String::new();
    for (k, v) in items {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let manifest = out.with_extension(format!(
        "{}manifest.txt",
        out.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    if let Err(e) = std::fs::write(&manifest, text) {
        eprintln!("warning: cannot write manifest {}: {e}", manifest.display());
    }
}

fn run(cli: &Cli, started: Instant) -> Result<(), Failure> {
    match &cli.command {
        Command::Selfenergy {
            burgers,
            alpha1,
            alpha2,
            annulus,
        } => {
            let b = parse_pair_i32(burgers, "--burgers")?;
            let pot = PotentialPair::quadratic(*alpha1, *alpha2).map_err(Failure::from)?;
            let tensor = linearized_tensor(&pot);
            let zeta = lattice_vector(b.0, b.1);
            let value = psi(zeta, &tensor, DEFAULT_PROFILE_MODES)?;
            let mut table = CsvTable::new(&["quantity", "value", "certificate"]);
            table.push_row(vec![
                format!("psi({};{})", b.0, b.1),
                fmt_f64(value),
                String::new(),
            ]);
            if let Some(ann) = annulus {
                let (r1, r2) = parse_pair_f64(ann, "--annulus")?;
                let v = psi_annulus(zeta, &tensor, r1, r2, None)?;
                table.push_row(vec![
                    format!("psi_annulus({};{})[{r1};{r2}]", b.0, b.1),
                    fmt_f64(v),
                    String::new(),
                ]);
            }
            let out = out_path(cli, None, "selfenergy.csv");
            table.write(&out)?;
            write_manifest(cli, &out, started, &[("subcommand", "selfenergy".into())]);
            println!("{}", table.to_csv().trim_end());
            Ok(())
        }
        Command::Phi {
            burgers,
            alpha1,
            alpha2,
        } => {
            let b = parse_pair_i32(burgers, "--burgers")?;
            let pot = PotentialPair::quadratic(*alpha1, *alpha2).map_err(Failure::from)?;
            let tensor = linearized_tensor(&pot);
            let result = phi(b, &tensor, None, DEFAULT_PROFILE_MODES)?;
            let cert = result
                .certificate
                .iter()
                .map(|s| format!("{}*({};{})", s.count, s.vector.0, s.vector.1))
                .collect::<Vec<_>>()
                .join(" + ");
            let mut table = CsvTable::new(&["quantity", "value", "certificate"]);
            table.push_row(vec![
                format!("phi({};{})", b.0, b.1),
                fmt_f64(result.value),
                cert,
            ]);
            let out = out_path(cli, None, "phi.csv");
            table.write(&out)?;
            write_manifest(cli, &out, started, &[("subcommand", "phi".into())]);
            println!("{}", table.to_csv().trim_end());
            Ok(())
        }
        Command::Recover => {
            let cfg = load_config(cli)?;
            let dom = build_domain(LatticeSpec::new(cfg.epsilon, cfg.domain.clone())?)?;
            let mu = snap_positions(&cfg.measure()?, &dom)?;
            let tensor = linearized_tensor(&cfg.pot);
            let out_rec = build_recovery(
                &RecoveryInput {
                    mu: mu.clone(),
                    rotation_angle: cfg.rotation_angle,
                    far_field: cfg.far_field,
                    tensor,
                },
                &dom,
            )?;
            let energy = total_energy(&dom, &out_rec.beta, &cfg.pot);
            let report = tridis::strain::check_admissible(&dom, &out_rec.beta, &mu, None);
            let out = out_path(cli, Some(&cfg), "recover.csv");
            std::fs::write(&out, strain_to_csv(&dom, &out_rec.beta))?;
            let summary = summary_json(&dom, &mu, energy, &report, None);
            let spath = out.with_extension("summary.json");
            std::fs::write(&spath, summary)?;
            std::fs::write(
                out.with_extension("measure.csv"),
                tridis::strain::measure_to_csv(&mu),
            )?;
            write_manifest(cli, &out, started, &[("subcommand", "recover".into())]);
            println!(
                "recovery strain on {} bonds written to {}; energy {}",
                dom.num_bonds(),
                out.display(),
                fmt_f64(energy)
            );
            Ok(())
        }
        Command::Minimize => {
            let cfg = load_config(cli)?;
            let dom = build_domain(LatticeSpec::new(cfg.epsilon, cfg.domain.clone())?)?;
            let mu = snap_positions(&cfg.measure()?, &dom)?;
            let tensor = linearized_tensor(&cfg.pot);
            let rec = build_recovery(
                &RecoveryInput {
                    mu: mu.clone(),
                    rotation_angle: cfg.rotation_angle,
                    far_field: cfg.far_field,
                    tensor,
                },
                &dom,
            )?;
            let mut problem = MinimizeProblem::new(
                &dom,
                cfg.pot,
                rec.slip,
                cfg.rotation_angle,
                rec.displacement,
            );
            problem.grad_tol = cfg.grad_tol_rel * cfg.epsilon;
            problem.max_iter = cfg.max_iter;
            problem.mu = Some(mu.clone());
            let res = minimize(&problem)?;
            let out = out_path(cli, Some(&cfg), "minimize.csv");
            let beta = problem.beta_for(&res.u, res.rotation_angle);
            std::fs::write(&out, strain_to_csv(&dom, &beta))?;
            let mut iters = CsvTable::new(&["iter", "energy", "grad_norm"]);
            for (it, e, g) in &res.trace {
                iters.push_row(vec![it.to_string(), fmt_f64(*e), fmt_f64(*g)]);
            }
            iters.write(&out.with_extension("iterations.csv"))?;
            let report = res.admissibility.clone().expect("mu was provided");
            let summary = summary_json(&dom, &mu, res.energy, &report, Some(&res));
            std::fs::write(out.with_extension("summary.json"), summary)?;
            write_manifest(cli, &out, started, &[("subcommand", "minimize".into())]);
            println!(
                "minimized energy {} in {} iterations (converged: {})",
                fmt_f64(res.energy),
                res.iterations,
                res.converged
            );
            if !res.converged {
                return Err(Failure {
                    code: EXIT_NONCONVERGENCE,
                    message: format!(
                        "gradient norm {} above tolerance {} after {} iterations",
                        fmt_f64(res.grad_norm),
                        fmt_f64(problem.grad_tol),
                        res.iterations
                    ),
                });
            }
            Ok(())
        }
        Command::Scaling { svg } => {
            let cfg = load_config(cli)?;
            // default ladder: 2^-5 .. 2^-9
            let epsilons = if cfg.scaling_epsilons.is_empty() {
                (5..=9).map(|k| 0.5f64.powi(k)).collect()
            } else {
                cfg.scaling_epsilons.clone()
            };
            let study = ScalingStudy {
                domain: cfg.domain.clone(),
                layout: cfg
                    .dislocations
                    .iter()
                    .map(|d| (d.position, d.burgers))
                    .collect(),
                rotation_angle: cfg.rotation_angle,
                far_field: cfg.far_field,
                epsilons,
                gamma: cfg.gamma,
                pot: cfg.pot,
                solver: SolverSettings {
                    grad_tol_rel: cfg.grad_tol_rel,
                    max_iter: cfg.max_iter,
                },
            };
            let rows = run_scaling(&study)?;
            let out = out_path(cli, Some(&cfg), "scaling.csv");
            scaling_rows_to_csv(&rows).write(&out)?;
            let svg_path = svg.clone().or_else(|| cfg.out_svg.clone());
            if let Some(svg_path) = svg_path {
                let minimized: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|r| (r.epsilon, r.normalized_minimized))
                    .collect();
                let recovery: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|r| (r.epsilon, r.normalized_recovery))
                    .collect();
                let reference: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|r| (r.epsilon, r.gamma_limit_reference))
                    .collect();
                write_loglog_svg(
                    &svg_path,
                    "normalized energy vs lattice spacing",
                    "epsilon",
                    "E / (eps^2 |log eps|)",
                    &[
                        ("minimized", minimized),
                        ("recovery", recovery),
                        ("reference", reference),
                    ],
                )?;
            }
            write_manifest(cli, &out, started, &[("subcommand", "scaling".into())]);
            println!("{}", scaling_rows_to_csv(&rows).to_csv().trim_end());
            if rows.iter().any(|r| !r.converged) {
                return Err(Failure {
                    code: EXIT_NONCONVERGENCE,
                    message: "one or more ladder minimizations did not converge".into(),
                });
            }
            Ok(())
        }
        Command::DemoThinAnnulus { m, epsilons, gamma } => {
            let ladder: Vec<f64> = epsilons
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::validation(format!("--epsilons: {e}")))?;
            let demo = thin_annulus_demo(*m, &ladder, *gamma)?;
            let out = out_path(cli, None, "thin_annulus.csv");
            demo_rows_to_csv(&demo).write(&out)?;
            write_manifest(
                cli,
                &out,
                started,
                &[
                    ("subcommand", "demo-thin-annulus".into()),
                    ("energy_exponent", fmt_f64(demo.energy_exponent)),
                ],
            );
            println!("{}", demo_rows_to_csv(&demo).to_csv().trim_end());
            println!("energy exponent: {}", fmt_f64(demo.energy_exponent));
            Ok(())
        }
    }
}

fn summary_json(
    dom: &tridis::lattice::LatticeDomain,
    mu: &DislocationMeasure,
    energy: f64,
    report: &tridis::strain::AdmissibilityReport,
    res: Option<&tridis::minimize::MinimizeResult>,
) -> String {
    let mut s = String::from("{\n");
    s.push_str(&format!("  \"epsilon\": {},\n", fmt_f64(dom.epsilon())));
    s.push_str(&format!("  \"nodes\": {},\n", dom.num_nodes()));
    s.push_str(&format!("  \"energy\": {},\n", fmt_f64(energy)));
    s.push_str("  \"atoms\": [\n");
    for (k, d) in mu.entries.iter().enumerate() {
        let w = d.weight(mu.epsilon);
        s.push_str(&format!(
            "    {{\"x\": {}, \"y\": {}, \"burgers\": [{}, {}], \"weight\": [{}, {}]}}{}\n",
            fmt_f64(d.position.x),
            fmt_f64(d.position.y),
            d.burgers.0,
            d.burgers.1,
            fmt_f64(w.x),
            fmt_f64(w.y),
            if k + 1 < mu.entries.len() { "," } else { "" }
        ));
    }
    s.push_str("  ],\n");
    s.push_str(&format!("  \"atoms_match\": {},\n", report.atoms_match));
    s.push_str("  \"annulus_distances\": [");
    let dists: Vec<String> = report
        .annulus_checks
        .iter()
        .map(|c| fmt_f64(c.distance))
        .collect();
    s.push_str(&dists.join(", "));
    s.push_str("],\n");
    s.push_str(&format!("  \"delta\": {},\n", fmt_f64(report.delta)));
    if let Some(r) = res {
        s.push_str(&format!("  \"iterations\": {},\n", r.iterations));
        s.push_str(&format!("  \"grad_norm\": {},\n", fmt_f64(r.grad_norm)));
        s.push_str(&format!("  \"converged\": {},\n", r.converged));
    }
    s.push_str(&format!("  \"pass\": {}\n", report.pass));
    s.push('}');
    s
}
