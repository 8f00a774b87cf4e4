//! `rotform` — derivations, dispersion sweeps and circulation simulations
//! as reproducible runs with structured output.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 input error.

mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use rotform::kelvin::{
    advect_chain, advect_circuit_sampled, chain_integral, chain_invariant, circulation,
    compiled_chain_integrand, flow_catalog, projection_areas, Chain3, Circuit,
};
use rotform::selfcheck::run_all;
use rotform::spectral::{block_diagonalize, classify_fastness, RotationSpec, SkewMatrix};
use rotform::tpt::{classify_reduction, derive_constraints, BalanceMode};
use rotform::waves::{build_matrix, dispersion_roots, e5_dispersion_reference};
use rotform::{rat_from_str, Rat};

use scenario::{parse_scenario, ObjectKind, Scenario};

#[derive(Parser)]
#[command(
    name = "rotform",
    version,
    about = "Geometric toolkit for rotating flows in d-dimensional Euclidean space"
)]
struct Cli {
    /// Seed recorded in every output header; drives sampled sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Block-diagonalize a skew-symmetric matrix into rotation planes.
    Decompose {
        /// Matrix file: rows of whitespace-separated numbers, or JSON.
        matrix: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive the constraint set forced by fast rotation.
    Tpt(TptArgs),
    /// Solve inertial-wave dispersion relations over wavevectors.
    Dispersion(DispersionArgs),
    /// Run a circulation-invariant scenario (circuit or 3-chain).
    Kelvin {
        scenario: PathBuf,
        /// Directory for the CSV series and JSON summary (stdout if absent).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the acceptance suite and report per-criterion results.
    Selfcheck {
        /// Only run criteria whose name contains this substring.
        #[arg(long)]
        filter: Option<String>,
        /// Deliberately perturb a named criterion's expected data
        /// (failure-path exercise).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Args)]
struct TptArgs {
    #[arg(long)]
    dim: u32,
    /// Comma-separated plane rates, exact rationals or decimals.
    #[arg(long)]
    rates: String,
    /// Comma-separated asymptotic order classes (default: classified from
    /// the rates).
    #[arg(long)]
    orders: Option<String>,
    #[arg(long, default_value_t = 1)]
    kelvin_order: u32,
    #[arg(long, default_value = "dominant")]
    balance: String,
    /// Append the total-incompressibility completion to the report.
    #[arg(long)]
    incompressible: bool,
    /// Successive-ratio gap separating asymptotic orders.
    #[arg(long, default_value_t = 10.0)]
    ratio_threshold: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DispersionArgs {
    #[arg(long)]
    dim: u32,
    #[arg(long)]
    rates: String,
    /// Single wavevector, comma-separated.
    #[arg(long)]
    k: Option<String>,
    /// Number of seeded random wavevectors to sweep.
    #[arg(long)]
    k_grid: Option<usize>,
    /// Cross-check the roots against the published E⁵ closed form.
    #[arg(long)]
    verify_e5_formula: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output path (stdout if absent).
    #[arg(long)]
    emit: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn config_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    digest[..8].iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

fn header_json(hash: &str, seed: u64) -> serde_json::Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "seed": seed,
    })
}

fn csv_header(hash: &str, seed: u64) -> String {
    format!(
        "# rotform {} config_hash={hash} seed={seed}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn parse_rat_list(s: &str) -> Result<Vec<Rat>> {
    s.split(',')
        .map(|x| rat_from_str(x.trim()).map_err(|e| anyhow!(e)))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Decompose { matrix, format, out } => cmd_decompose(&matrix, format, &out, cli.seed),
        Command::Tpt(args) => cmd_tpt(args, cli.seed),
        Command::Dispersion(args) => cmd_dispersion(args, cli.seed),
        Command::Kelvin { scenario, out_dir } => cmd_kelvin(&scenario, &out_dir, cli.seed),
        Command::Selfcheck { filter, inject_fault, format } => {
            cmd_selfcheck(filter.as_deref(), inject_fault.as_deref(), format)
        }
    }
}

// ---------------------------------------------------------------------------

fn cmd_decompose(
    path: &Path,
    format: Format,
    out: &Option<PathBuf>,
    seed: u64,
) -> Result<ExitCode> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading matrix {}", path.display()))?;
    let matrix = if text.trim_start().starts_with('[') {
        SkewMatrix::from_json(&text)
    } else {
        SkewMatrix::from_text(&text)
    }
    .map_err(|e| anyhow!("{e}"))?;
    let dec = block_diagonalize(&matrix).map_err(|e| anyhow!("{e}"))?;
    if dec.planes.is_empty() {
        eprintln!("warning: no rotation planes (all axes fixed)");
    }
    let hash = config_hash(&["decompose", &text]);
    let content = match format {
        Format::Json => {
            let mut v = dec.to_json();
            v["header"] = header_json(&hash, seed);
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        _ => {
            let mut s = csv_header(&hash, seed);
            let _ = writeln!(s, "planes: {:?}", dec.planes);
            let _ = writeln!(s, "rates: {:?}", dec.rates);
            let _ = writeln!(s, "zero_axes: {:?}", dec.zero_axes);
            let _ = writeln!(s, "residual: {:.3e}", dec.residual);
            s
        }
    };
    emit(out, &content)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn cmd_tpt(args: TptArgs, seed: u64) -> Result<ExitCode> {
    let rates = parse_rat_list(&args.rates)?;
    if 2 * rates.len() > args.dim as usize {
        bail!("{} planes do not fit in dimension {}", rates.len(), args.dim);
    }
    let orders: Vec<u32> = match &args.orders {
        Some(o) => o
            .split(',')
            .map(|x| x.trim().parse::<u32>().context("orders"))
            .collect::<Result<_>>()?,
        None => {
            let f: Vec<f64> = rates.iter().map(|r| r.to_f64().unwrap()).collect();
            classify_fastness(&f, args.ratio_threshold).map_err(|e| anyhow!("{e}"))?
        }
    };
    if orders.len() != rates.len() {
        bail!("orders and rates must have the same length");
    }
    let balance = match args.balance.as_str() {
        "dominant" | "dominant_balance" => BalanceMode::DominantBalance,
        "combined" => BalanceMode::Combined,
        other => bail!("unknown balance mode '{other}' (use combined|dominant)"),
    };
    let spec = RotationSpec::canonical_values_with_orders(args.dim, &rates, &orders)
        .map_err(|e| anyhow!("{e}"))?;
    let cs = derive_constraints(&spec, args.kelvin_order, balance).map_err(|e| anyhow!("{e}"))?;
    let report = if args.kelvin_order == 1 {
        Some(classify_reduction(&cs, args.incompressible).map_err(|e| anyhow!("{e}"))?)
    } else {
        None
    };

    let hash = config_hash(&[
        "tpt",
        &args.dim.to_string(),
        &args.rates,
        &format!("{orders:?}"),
        &args.kelvin_order.to_string(),
        &args.balance,
        &args.incompressible.to_string(),
    ]);
    let content = match args.format {
        Format::Json => {
            let v = serde_json::json!({
                "header": header_json(&hash, seed),
                "constraints": cs,
                "reduction": report,
            });
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        _ => {
            let mut s = csv_header(&hash, seed);
            let _ = writeln!(
                s,
                "# constraints (k={}, {} mode, {} relations)",
                args.kelvin_order,
                match balance {
                    BalanceMode::Combined => "combined",
                    BalanceMode::DominantBalance => "dominant-balance",
                },
                cs.len()
            );
            s.push_str(&cs.render_text());
            if let Some(rep) = &report {
                s.push_str("# reduction\n");
                s.push_str(&rep.render_text());
            }
            s
        }
    };
    emit(&args.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn cmd_dispersion(args: DispersionArgs, seed: u64) -> Result<ExitCode> {
    let rates = parse_rat_list(&args.rates)?;
    if 2 * rates.len() > args.dim as usize {
        bail!("{} planes do not fit in dimension {}", rates.len(), args.dim);
    }
    let orders: Vec<u32> = rates.iter().map(|r| u32::from(!r.is_zero())).collect();
    let spec = RotationSpec::canonical_values_with_orders(args.dim, &rates, &orders)
        .map_err(|e| anyhow!("{e}"))?;

    let wavevectors: Vec<Vec<Rat>> = match (&args.k, args.k_grid) {
        (Some(k), None) => {
            let k = parse_rat_list(k)?;
            if k.len() != args.dim as usize {
                bail!("wavevector has {} components, dimension is {}", k.len(), args.dim);
            }
            vec![k]
        }
        (None, Some(count)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let k: Vec<Rat> = (0..args.dim)
                    .map(|_| Rat::new(rng.gen_range(-24i64..=24).into(), 8.into()))
                    .collect();
                if !k.iter().all(Zero::is_zero) {
                    out.push(k);
                }
            }
            out
        }
        _ => bail!("provide exactly one of --k or --k-grid"),
    };

    let hash = config_hash(&[
        "dispersion",
        &args.dim.to_string(),
        &args.rates,
        &format!("{:?}", args.k),
        &format!("{:?}", args.k_grid),
        &seed.to_string(),
    ]);

    let mut rows: Vec<serde_json::Value> = Vec::new();
    let mut csv = csv_header(&hash, seed);
    let axes: Vec<String> = (1..=args.dim).map(|i| format!("k{i}")).collect();
    let _ = writeln!(csv, "{},root,branch,nullspace_residual", axes.join(","));
    let mut e5_worst = 0.0f64;

    for k in &wavevectors {
        let m = build_matrix(&spec, k).map_err(|e| anyhow!("{e}"))?;
        let res = dispersion_roots(&m).map_err(|e| anyhow!("{e}"))?;
        let kf: Vec<f64> = k.iter().map(|x| x.to_f64().unwrap()).collect();
        if args.verify_e5_formula {
            if args.dim != 5 || rates.len() != 2 {
                bail!("--verify-e5-formula needs dim 5 with two rates");
            }
            let want = e5_dispersion_reference(
                rates[0].to_f64().unwrap(),
                rates[1].to_f64().unwrap(),
                &kf.clone().try_into().expect("dim 5"),
            );
            let max_root = res.roots.iter().map(|r| r.value).fold(f64::MIN, f64::max);
            e5_worst = e5_worst.max((max_root - want).abs() / want.max(1e-300));
        }
        let kstr = kf
            .iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",");
        for root in &res.roots {
            let _ = writeln!(
                csv,
                "{kstr},{},{},{:.3e}",
                root.value,
                root.branch.label(),
                root.residual
            );
        }
        rows.push(serde_json::json!({
            "k": kf,
            "poly": res.poly.coeff_strings(),
            "roots": res.roots.iter().map(|r| serde_json::json!({
                "value": r.value,
                "multiplicity": r.multiplicity,
                "branch": r.branch.label(),
                "nullspace_residual": r.residual,
            })).collect::<Vec<_>>(),
        }));
    }

    if args.verify_e5_formula {
        let _ = writeln!(csv, "# e5_formula_max_relative_deviation={e5_worst:.3e}");
    }
    let content = match args.format {
        Format::Json => {
            let v = serde_json::json!({
                "header": header_json(&hash, seed),
                "e5_formula_max_relative_deviation":
                    args.verify_e5_formula.then_some(e5_worst),
                "results": rows,
            });
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        _ => csv,
    };
    emit(&args.emit, &content)?;
    if args.verify_e5_formula && e5_worst > 1e-10 {
        eprintln!("e5 formula deviation {e5_worst:.3e} exceeds 1e-10");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn cmd_kelvin(path: &Path, out_dir: &Option<PathBuf>, seed: u64) -> Result<ExitCode> {
    let sc = parse_scenario(path)?;
    let spec = sc.spec()?;
    let flow = flow_catalog(&sc.flow, &spec).map_err(|e| anyhow!("{e}"))?;
    let hash = config_hash(&["kelvin", &sc.canonical]);

    let (csv, summary, pass) = match sc.object {
        ObjectKind::Circuit => run_circuit_scenario(&sc, &spec, &flow, &hash, seed)?,
        ObjectKind::Chain3 => run_chain_scenario(&sc, &spec, &flow, &hash, seed)?,
    };

    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("series.csv"), &csv)?;
            std::fs::write(
                dir.join("summary.json"),
                format!("{}\n", serde_json::to_string_pretty(&summary)?),
            )?;
        }
        None => {
            print!("{csv}");
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    if pass {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("conservation assertion failed on a flow flagged as an Euler solution");
        Ok(ExitCode::from(1))
    }
}

fn run_circuit_scenario(
    sc: &Scenario,
    spec: &RotationSpec,
    flow: &rotform::kelvin::FlowField,
    hash: &str,
    seed: u64,
) -> Result<(String, serde_json::Value, bool)> {
    let d = sc.dim as usize;
    let circuit = if let Some(file) = &sc.nodes_file {
        let text = std::fs::read_to_string(file)
            .with_context(|| format!("reading nodes file {file}"))?;
        let nodes: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|x| x.parse::<f64>().map_err(|e| anyhow!("{e}")))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        if nodes.iter().any(|p| p.len() != d) {
            bail!("node rows must have {d} coordinates");
        }
        Circuit::from_nodes(nodes)
    } else if let Some((e, f)) = &sc.frame {
        Circuit::tilted_circle(d, &sc.center, sc.radius, e, f, sc.nodes)
            .map_err(|e| anyhow!("{e}"))?
    } else {
        if sc.plane.0 == 0 || sc.plane.1 > sc.dim || sc.plane.0 >= sc.plane.1 {
            bail!("bad circuit plane {:?}", sc.plane);
        }
        Circuit::circle(d, &sc.center, sc.radius, sc.plane, sc.nodes)
    };

    let reach = circuit
        .nodes
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if reach > 10.0 {
        eprintln!(
            "warning: circuit reaches |x| = {reach:.1} > 10; the frame velocity grows linearly              and conditioning degrades"
        );
    }
    let gamma0 = circulation(&circuit, flow, spec).map_err(|e| anyhow!("{e}"))?;
    let areas0 = projection_areas(&circuit, spec).map_err(|e| anyhow!("{e}"))?;

    let mut csv = csv_header(hash, seed);
    let area_cols: Vec<String> = (1..=spec.planes.len()).map(|i| format!("A{i}")).collect();
    let _ = writeln!(csv, "t,circulation,{},drift", area_cols.join(","));
    let scale = gamma0.abs().max(f64::MIN_POSITIVE);
    let mut rows = vec![(0.0f64, gamma0, areas0.areas.clone(), 0.0f64)];

    let sample_every = sc.sample_every.max(1);
    let mut step = 0usize;
    let mut sampled: Vec<(f64, Circuit)> = Vec::new();
    let advected = advect_circuit_sampled(&circuit, flow, sc.t_end, sc.dt, |t, c| {
        step += 1;
        if step.is_multiple_of(sample_every) {
            sampled.push((t, c.clone()));
        }
    })
    .map_err(|e| anyhow!("{e}"))?;
    if sampled.last().map(|(t, _)| *t) != Some(sc.t_end) {
        sampled.push((sc.t_end, advected));
    }
    for (t, c) in &sampled {
        let g = circulation(c, flow, spec).map_err(|e| anyhow!("{e}"))?;
        let areas = projection_areas(c, spec).map_err(|e| anyhow!("{e}"))?;
        rows.push((*t, g, areas.areas, (g - gamma0) / scale));
    }
    for (t, g, areas, drift) in &rows {
        let astr = areas
            .iter()
            .map(|a| format!("{a}"))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(csv, "{t},{g},{astr},{drift}");
    }

    let final_drift = rows.last().map(|r| r.3.abs()).unwrap_or(0.0);
    let pass = !flow.is_rotating_frame_euler_solution || final_drift < sc.drift_tol;
    let summary = serde_json::json!({
        "header": header_json(hash, seed),
        "object": "circuit",
        "flow": flow.name,
        "is_rotating_frame_euler_solution": flow.is_rotating_frame_euler_solution,
        "nodes": sc.nodes,
        "dt": sc.dt,
        "t_end": sc.t_end,
        "circulation_initial": gamma0,
        "circulation_final": rows.last().map(|r| r.1),
        "relative_drift": final_drift,
        "drift_tol": sc.drift_tol,
        "pass": pass,
    });
    Ok((csv, summary, pass))
}

fn run_chain_scenario(
    sc: &Scenario,
    spec: &RotationSpec,
    flow: &rotform::kelvin::FlowField,
    hash: &str,
    seed: u64,
) -> Result<(String, serde_json::Value, bool)> {
    let (r1, r2, r3) = sc.chain_radii;
    let chain = Chain3::torus(sc.dim as usize, sc.chain_m, r1, r2, r3)
        .map_err(|e| anyhow!("{e}"))?;
    let report = chain_invariant(&chain, flow, spec, 1, sc.t_end, sc.dt)
        .map_err(|e| anyhow!("{e}"))?;

    let mut csv = csv_header(hash, seed);
    let _ = writeln!(csv, "t,invariant,drift");
    let _ = writeln!(csv, "0,{},0", report.initial);
    let _ = writeln!(csv, "{},{},{}", sc.t_end, report.final_value, report.drift_rel);
    // spot-check the invariant midway as well
    let form = compiled_chain_integrand(spec, 1).map_err(|e| anyhow!("{e}"))?;
    let half = advect_chain(&chain, flow, sc.t_end / 2.0, sc.dt).map_err(|e| anyhow!("{e}"))?;
    let mid = chain_integral(&half, &form, flow).map_err(|e| anyhow!("{e}"))?;
    let _ = writeln!(
        csv,
        "{},{},{}",
        sc.t_end / 2.0,
        mid,
        (mid - report.initial).abs() / report.initial.abs().max(f64::MIN_POSITIVE)
    );

    let pass = !flow.is_rotating_frame_euler_solution || report.drift_rel < sc.drift_tol;
    let summary = serde_json::json!({
        "header": header_json(hash, seed),
        "object": "chain3",
        "flow": flow.name,
        "is_rotating_frame_euler_solution": flow.is_rotating_frame_euler_solution,
        "m": sc.chain_m,
        "dt": sc.dt,
        "t_end": sc.t_end,
        "invariant_initial": report.initial,
        "invariant_final": report.final_value,
        "relative_drift": report.drift_rel,
        "drift_tol": sc.drift_tol,
        "pass": pass,
    });
    Ok((csv, summary, pass))
}

// ---------------------------------------------------------------------------

fn cmd_selfcheck(
    filter: Option<&str>,
    fault: Option<&str>,
    format: Format,
) -> Result<ExitCode> {
    let results = run_all(filter, fault);
    if results.is_empty() {
        bail!("no acceptance criterion matches the filter");
    }
    let all_passed = results.iter().all(|r| r.passed);
    match format {
        Format::Json => {
            let v = serde_json::json!({
                "header": header_json(&config_hash(&["selfcheck", &format!("{filter:?}")]), 0),
                "results": results,
                "pass": all_passed,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        _ => {
            for r in &results {
                println!(
                    "[{}] {:>2}. {:<28} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.id,
                    r.name,
                    r.seconds,
                    r.detail
                );
            }
            println!(
                "{}: {}/{} criteria passed",
                if all_passed { "ok" } else { "FAILED" },
                results.iter().filter(|r| r.passed).count(),
                results.len()
            );
        }
    }
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
