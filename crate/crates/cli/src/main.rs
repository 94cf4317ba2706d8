//! Deterministic command-line front end: every pipeline of the library is
//! reachable here, and identical invocations produce byte-identical JSON
//! and CSV artifacts.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use capstek::assembly::MetricField;
use capstek::dtn;
use capstek::family;
use capstek::io::{csv_line, fmt_f64, to_json_string};
use capstek::mesh::Mesh;
use capstek::radial;
use capstek::theta::{self, OptimizeParams};

#[derive(Parser)]
#[command(name = "capstek", version, about = "Steklov-with-frequency spectral laboratory")]
struct Cli {
    /// Interpret angle arguments as degrees instead of radians.
    #[arg(long, global = true)]
    degrees: bool,

    /// Worker threads for parallel sweeps (default 1; CAPSTEK_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a mesh JSON artifact.
    Mesh(MeshArgs),
    /// Solve the Steklov-with-frequency spectrum of (mesh, metric, alpha).
    Spectrum(SpectrumArgs),
    /// Verify the cap eigenvalues sigma0 = -tan r, sigma1 = cot r by the
    /// radial solver and the FEM pipeline.
    CapVerify(CapVerifyArgs),
    /// Solve the rotational free-boundary annulus family.
    AnnulusFamily(AnnulusFamilyArgs),
    /// Evaluate the theta functional on one metric.
    Theta(ThetaArgs),
    /// Maximize theta over conformal factors by projected gradient ascent.
    Optimize(OptimizeArgs),
    /// Tabulate theta over a grid of radii and a metric family.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Disk,
    Cylinder,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, value_enum)]
    shape: Shape,
    #[arg(long, default_value_t = 40)]
    n_rings: usize,
    #[arg(long, default_value_t = 80)]
    n_angular: usize,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long, default_value_t = 30)]
    n_s: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MeshSource {
    /// Mesh JSON file.
    #[arg(long, group = "mesh_src")]
    mesh: Option<PathBuf>,
    /// Disk mesh resolution as N_RINGS,N_ANGULAR.
    #[arg(long, group = "mesh_src", value_parser = parse_two)]
    disk: Option<(usize, usize)>,
    /// Cylinder mesh as S0,N_S,N_ANGULAR.
    #[arg(long, group = "mesh_src", value_parser = parse_cylinder)]
    cylinder: Option<(f64, usize, usize)>,
}

#[derive(Args)]
struct MetricSource {
    /// Metric JSON file.
    #[arg(long, group = "metric_src")]
    metric: Option<PathBuf>,
    /// Flat reference metric.
    #[arg(long, group = "metric_src")]
    flat: bool,
    /// Spherical-cap metric of the given radius (radians unless --degrees).
    #[arg(long, group = "metric_src")]
    cap_r: Option<f64>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    mesh: MeshSource,
    #[command(flatten)]
    metric: MetricSource,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 6)]
    count: usize,
    /// Include boundary eigenvectors in the artifact.
    #[arg(long)]
    modes: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CapVerifyArgs {
    /// Cap radius (radians unless --degrees).
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 40)]
    n_rings: usize,
    #[arg(long, default_value_t = 80)]
    n_angular: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnnulusFamilyArgs {
    /// Single cap radius.
    #[arg(long, group = "family_r")]
    r: Option<f64>,
    /// Radius grid as START,END,STEP.
    #[arg(long, group = "family_r", value_parser = parse_three_f64)]
    r_grid: Option<(f64, f64, f64)>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ThetaArgs {
    /// Functional radius (radians unless --degrees).
    #[arg(long)]
    r: f64,
    #[command(flatten)]
    mesh: MeshSource,
    #[command(flatten)]
    metric: MetricSource,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    r: f64,
    /// Disk resolution as N_RINGS,N_ANGULAR.
    #[arg(long, value_parser = parse_two, default_value = "16,32")]
    disk: (usize, usize),
    #[command(flatten)]
    metric: MetricSource,
    #[arg(long, default_value_t = 120)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    step0: f64,
    #[arg(long, default_value_t = 0.1)]
    gap_margin: f64,
    #[arg(long, default_value_t = 0.5)]
    smoothing: f64,
    #[arg(long, default_value_t = dtn::DEFAULT_CLUSTER_TOL)]
    cluster_tol: f64,
    /// Trace CSV path.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Final metric JSON path.
    #[arg(long)]
    metric_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Flat,
    Cap,
    Random,
}

#[derive(Args)]
struct SweepArgs {
    /// Radius grid as START,END,STEP.
    #[arg(long, value_parser = parse_three_f64)]
    r_grid: (f64, f64, f64),
    #[arg(long, value_enum)]
    family: Family,
    /// Random metrics per radius (random family only).
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, value_parser = parse_two, default_value = "20,40")]
    disk: (usize, usize),
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_two(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated integers".into());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_cylinder(s: &str) -> Result<(f64, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected S0,N_S,N_ANGULAR".into());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
        parts[2].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_three_f64(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected START,END,STEP".into());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
        parts[2].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

#[derive(Serialize)]
struct ErrorArtifact {
    error: String,
    message: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("CAPSTEK_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok();

    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let artifact = ErrorArtifact { error: error_kind(&err), message: err.to_string() };
            println!("{}", to_json_string(&artifact).unwrap_or_else(|_| err.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn error_kind(err: &capstek::Error) -> String {
    use capstek::Error::*;
    match err {
        Parameter(_) => "parameter",
        InvalidMesh(_) => "invalid_mesh",
        Assembly { .. } => "assembly",
        NotAdmissible { .. } => "not_admissible",
        Factorization { .. } => "factorization",
        Nonconvergence(_) => "nonconvergence",
        AmbiguousDerivative { .. } => "ambiguous_derivative",
        Continuation { .. } => "continuation",
        Io(_) => "io",
        Json(_) => "json",
    }
    .to_string()
}

fn angle(cli: &Cli, value: f64) -> f64 {
    if cli.degrees {
        value * PI / 180.0
    } else {
        value
    }
}

fn write_artifact(path: &Option<PathBuf>, text: &str) -> capstek::Result<String> {
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            Ok(p.display().to_string())
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok("stdout".to_string())
        }
    }
}

fn load_mesh(src: &MeshSource) -> capstek::Result<Mesh> {
    let mesh = if let Some(path) = &src.mesh {
        let mesh = Mesh::read_json(path)?;
        let diagnostics = mesh.validate();
        if !diagnostics.is_empty() {
            return Err(capstek::Error::InvalidMesh(diagnostics.join("; ")));
        }
        mesh
    } else if let Some((nr, na)) = src.disk {
        Mesh::disk(nr, na)?
    } else if let Some((s0, ns, na)) = src.cylinder {
        Mesh::cylinder(s0, ns, na)?
    } else {
        Mesh::disk(40, 80)?
    };
    Ok(mesh)
}

fn load_metric(cli: &Cli, src: &MetricSource, mesh: &Mesh) -> capstek::Result<MetricField> {
    let metric = if let Some(path) = &src.metric {
        MetricField::read_json(path)?
    } else if let Some(r) = src.cap_r {
        MetricField::cap(mesh, angle(cli, r))?
    } else {
        MetricField::flat(mesh)
    };
    metric.validate(mesh)?;
    Ok(metric)
}

fn grid_values((start, end, step): (f64, f64, f64)) -> capstek::Result<Vec<f64>> {
    if step <= 0.0 || step.is_nan() || end < start {
        return Err(capstek::Error::Parameter("grid requires start <= end and step > 0".into()));
    }
    let mut values = Vec::new();
    let mut r = start;
    while r <= end + 1e-12 {
        values.push(r.min(end));
        r += step;
    }
    Ok(values)
}

fn run(cli: &Cli) -> capstek::Result<String> {
    match &cli.command {
        Command::Mesh(args) => {
            let mesh = match args.shape {
                Shape::Disk => Mesh::disk(args.n_rings, args.n_angular)?,
                Shape::Cylinder => Mesh::cylinder(args.s0, args.n_s, args.n_angular)?,
            };
            let text = to_json_string(&mesh)?;
            let dest = write_artifact(&args.output, &text)?;
            Ok(format!(
                "mesh: {} vertices, {} triangles, {} boundary loops -> {dest}",
                mesh.vertices.len(),
                mesh.triangles.len(),
                mesh.boundary_loops.len()
            ))
        }

        Command::Spectrum(args) => {
            let mesh = load_mesh(&args.mesh)?;
            let metric = load_metric(cli, &args.metric, &mesh)?;
            let spectrum = dtn::steklov_spectrum(&mesh, &metric, args.alpha, args.count)?;

            #[derive(Serialize)]
            struct SpectrumArtifact {
                alpha: f64,
                eigenvalues: Vec<f64>,
                gap: f64,
                admissible: bool,
                #[serde(skip_serializing_if = "Option::is_none")]
                modes: Option<Vec<Vec<f64>>>,
            }
            let artifact = SpectrumArtifact {
                alpha: spectrum.alpha,
                eigenvalues: spectrum.eigenvalues.clone(),
                gap: spectrum.admissibility.gap,
                admissible: spectrum.admissibility.admissible,
                modes: args.modes.then(|| spectrum.boundary_modes.clone()),
            };
            let text = to_json_string(&artifact)?;
            let dest = write_artifact(&args.output, &text)?;
            Ok(format!(
                "spectrum: alpha={} sigma0={:.6} count={} gap={:.4} -> {dest}",
                spectrum.alpha,
                spectrum.eigenvalues[0],
                spectrum.eigenvalues.len(),
                spectrum.admissibility.gap
            ))
        }

        Command::CapVerify(args) => {
            let r = angle(cli, args.r);
            let radial0 = radial::cap_mode_eigs(r, 0, 1, 2.0)?;
            let radial1 = radial::cap_mode_eigs(r, 1, 1, 2.0)?;
            let mesh = Mesh::disk(args.n_rings, args.n_angular)?;
            let metric = MetricField::cap(&mesh, r)?;
            let spectrum = dtn::steklov_spectrum(&mesh, &metric, 2.0, 2)?;

            #[derive(Serialize)]
            struct CapVerifyArtifact {
                r: f64,
                sigma0: f64,
                sigma1: f64,
                expected_sigma0: f64,
                expected_sigma1: f64,
                fem_sigma0: f64,
                fem_sigma1: f64,
                radial_err_sigma0: f64,
                radial_err_sigma1: f64,
                fem_rel_err_sigma0: f64,
                fem_rel_err_sigma1: f64,
            }
            let expected0 = -r.tan();
            let expected1 = 1.0 / r.tan();
            let artifact = CapVerifyArtifact {
                r,
                sigma0: radial0.eigenvalues[0],
                sigma1: radial1.eigenvalues[0],
                expected_sigma0: expected0,
                expected_sigma1: expected1,
                fem_sigma0: spectrum.eigenvalues[0],
                fem_sigma1: spectrum.eigenvalues[1],
                radial_err_sigma0: radial0.eigenvalues[0] - expected0,
                radial_err_sigma1: radial1.eigenvalues[0] - expected1,
                fem_rel_err_sigma0: (spectrum.eigenvalues[0] - expected0).abs() / expected0.abs(),
                fem_rel_err_sigma1: (spectrum.eigenvalues[1] - expected1).abs() / expected1.abs(),
            };
            let text = to_json_string(&artifact)?;
            let dest = write_artifact(&args.output, &text)?;
            Ok(format!(
                "cap-verify: r={r:.9} sigma0={:.9} sigma1={:.9} fem=({:.6}, {:.6}) -> {dest}",
                artifact.sigma0, artifact.sigma1, artifact.fem_sigma0, artifact.fem_sigma1
            ))
        }

        Command::AnnulusFamily(args) => {
            let radii = if let Some(r) = args.r {
                vec![angle(cli, r)]
            } else if let Some(grid) = args.r_grid {
                grid_values(grid)?.into_iter().map(|r| angle(cli, r)).collect()
            } else {
                return Err(capstek::Error::Parameter("provide --r or --r-grid".into()));
            };
            let points = family::solve_family_grid(&radii)?;
            let mut lines = vec![family_csv_header()];
            for point in &points {
                lines.push(family_csv_row(point)?);
            }
            let text = lines.join("\n") + "\n";
            let dest = write_artifact(&args.output, &text)?;
            let last = points.last().expect("at least one radius");
            Ok(format!(
                "annulus-family: {} points, last r={:.6} a={:.9} s0={:.9} mu={:.9} -> {dest}",
                points.len(),
                last.r,
                last.a,
                last.s0,
                last.mu
            ))
        }

        Command::Theta(args) => {
            let r = angle(cli, args.r);
            let mesh = load_mesh(&args.mesh)?;
            let metric = load_metric(cli, &args.metric, &mesh)?;
            let report = theta::theta_eval(&mesh, &metric, r)?;
            let text = to_json_string(&report)?;
            let dest = write_artifact(&args.output, &text)?;
            Ok(format!(
                "theta: r={r:.6} theta={:.6} bound={:.6} slack={:.6} -> {dest}",
                report.theta, report.bound, report.slack
            ))
        }

        Command::Optimize(args) => {
            let r = angle(cli, args.r);
            let mesh = Mesh::disk(args.disk.0, args.disk.1)?;
            let metric0 = load_metric(cli, &args.metric, &mesh)?;
            let params = OptimizeParams {
                max_steps: args.steps,
                step0: args.step0,
                gap_margin: args.gap_margin,
                smoothing: args.smoothing,
                cluster_tol: args.cluster_tol,
            };
            let trace = theta::optimize_conformal(&mesh, &metric0, r, &params)?;
            let mut lines = vec!["step,theta,sigma0,sigma1,gap,step_size".to_string()];
            for it in &trace.iterations {
                lines.push(csv_line(&[
                    it.step.to_string(),
                    fmt_f64(it.theta),
                    fmt_f64(it.sigma0),
                    fmt_f64(it.sigma1),
                    fmt_f64(it.gap),
                    fmt_f64(it.step_size),
                ]));
            }
            let text = lines.join("\n") + "\n";
            let dest = write_artifact(&args.output, &text)?;
            if let Some(path) = &args.metric_out {
                std::fs::write(path, to_json_string(&trace.final_metric)?)?;
            }
            let last = trace.iterations.last().expect("trace has the initial row");
            let bound = theta::theta_bound(mesh.genus, mesh.boundary_count, r);
            Ok(format!(
                "optimize: {} accepted steps, theta {:.6} -> {:.6} ({:.2}% of bound) -> {dest}",
                trace.iterations.len() - 1,
                trace.iterations[0].theta,
                last.theta,
                100.0 * last.theta / bound
            ))
        }

        Command::Sweep(args) => {
            let radii: Vec<f64> =
                grid_values(args.r_grid)?.into_iter().map(|r| angle(cli, r)).collect();
            let mesh = Mesh::disk(args.disk.0, args.disk.1)?;
            let mut lines = vec![
                "family,index,r,sigma0,sigma1,boundary_length,area,theta,bound,slack,res_bc,res_v0"
                    .to_string(),
            ];
            let mut rows = 0usize;
            for &r in &radii {
                match args.family {
                    Family::Flat => {
                        let report = theta::theta_eval(&mesh, &MetricField::flat(&mesh), r)?;
                        lines.push(sweep_csv_row("flat", 0, &report));
                        rows += 1;
                    }
                    Family::Cap => {
                        let report =
                            theta::theta_eval(&mesh, &MetricField::cap(&mesh, r)?, r)?;
                        lines.push(sweep_csv_row("cap", 0, &report));
                        rows += 1;
                    }
                    Family::Random => {
                        let reports = theta::random_metric_sweep(
                            &mesh,
                            r,
                            args.count,
                            args.seed,
                            args.amplitude,
                        )?;
                        for (i, report) in reports.iter().enumerate() {
                            lines.push(sweep_csv_row("random", i, report));
                            rows += 1;
                        }
                    }
                }
            }
            let text = lines.join("\n") + "\n";
            let dest = write_artifact(&args.output, &text)?;
            Ok(format!("sweep: {rows} rows over {} radii -> {dest}", radii.len()))
        }
    }
}

fn family_csv_header() -> String {
    "r,a,s0,mu,res0,res1,res2,res3,embedded,theta,bound,slack".to_string()
}

fn family_csv_row(point: &family::FamilyPoint) -> capstek::Result<String> {
    let ft = family::family_theta(point)?;
    Ok(csv_line(&[
        fmt_f64(point.r),
        fmt_f64(point.a),
        fmt_f64(point.s0),
        fmt_f64(point.mu),
        fmt_f64(point.residuals[0]),
        fmt_f64(point.residuals[1]),
        fmt_f64(point.residuals[2]),
        fmt_f64(point.residuals[3]),
        point.embedded.to_string(),
        fmt_f64(ft.theta),
        fmt_f64(ft.bound),
        fmt_f64(ft.slack),
    ]))
}

fn sweep_csv_row(family: &str, index: usize, report: &theta::ThetaReport) -> String {
    csv_line(&[
        family.to_string(),
        index.to_string(),
        fmt_f64(report.r),
        fmt_f64(report.sigma0),
        fmt_f64(report.sigma1),
        fmt_f64(report.boundary_length),
        fmt_f64(report.area),
        fmt_f64(report.theta),
        fmt_f64(report.bound),
        fmt_f64(report.slack),
        fmt_f64(report.extremality.res_bc),
        fmt_f64(report.extremality.res_v0),
    ])
}
