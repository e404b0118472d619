//! Command-line front end: parse problem files, dispatch to the numeric
//! operations, persist results, and emit plot-ready tables.
//!
//! Exit codes: 2 flag validation, 3 integration failure, 4 non-convergence,
//! 5 annulus exit, 6 I/O.

// negated comparisons of the form `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use delaunay_cmc::error::CoreError;
use delaunay_cmc::shooting::{self, ProblemFile};
use delaunay_cmc::{delaunay, geometry, identities, linearization};

const EXIT_FLAGS: u8 = 2;
const EXIT_INTEGRATION: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;
const EXIT_ANNULUS: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(
    name = "delaunay-cmc",
    version,
    about = "Delaunay CMC profile-curve laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an unforced profile trajectory and detect its minima.
    Delaunay {
        #[arg(long)]
        tau: f64,
        /// Number of periods to integrate.
        #[arg(long, default_value_t = 5.0)]
        periods: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Verify the integral identities over a tau grid.
    Verify {
        /// Comma-separated tau grid.
        #[arg(long, default_value = "0.05,0.10,0.16,0.20,0.24")]
        taus: String,
        /// Largest admissible rel_err before a nonzero exit.
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Match the periodic boundary data of a forced problem.
    Shoot {
        #[arg(long)]
        problem: PathBuf,
        /// Starting-point offset along the geodesic (psi units).
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Scan the starting point delta and locate omega_delta zeros.
    Scan {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Worker threads (0 = available parallelism); DELAUNAY_CMC_JOBS overrides.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Export a surface-of-revolution mesh of a profile trajectory.
    Mesh {
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 3.0)]
        periods: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 32)]
        theta_res: usize,
        /// Bend the axis into a circle (visualization only; not CMC in flat space).
        #[arg(long)]
        tube: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Tabulate the one-period transition matrix over a tau grid.
    Monodromy {
        #[arg(long, default_value = "0.05,0.10,0.16,0.20,0.24")]
        taus: String,
        #[command(flatten)]
        out: OutDir,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Domain(_) => EXIT_FLAGS,
        CoreError::IntegrationFailure { .. }
        | CoreError::Structure { .. }
        | CoreError::Degenerate(_)
        | CoreError::Projection { .. } => EXIT_INTEGRATION,
        CoreError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        CoreError::AnnulusExit { .. } => EXIT_ANNULUS,
        CoreError::Io(_) => EXIT_IO,
    }
}

struct Manifest {
    command: String,
    digest: String,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Manifest {
    fn new(command: &str, config_bytes: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        Self {
            command: command.to_string(),
            digest: format!("{:x}", hasher.finalize()),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    fn add(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        let json = serde_json::json!({
            "command": self.command,
            "config_digest": self.digest,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        std::fs::write(
            out_dir.join(format!("{}_manifest.json", self.command)),
            serde_json::to_string_pretty(&json).expect("manifest serializes"),
        )
    }
}

fn parse_tau_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad tau value '{t}'"))
        })
        .collect()
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &str,
    manifest: &mut Manifest,
) -> Result<(), CoreError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    manifest.add(path);
    Ok(())
}

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Delaunay {
            tau,
            periods,
            tol,
            out,
        } => {
            if !(tau > 0.0 && tau <= 0.25) {
                return Err((
                    EXIT_FLAGS,
                    format!("--tau {tau} outside the (0, 1/4] domain"),
                ));
            }
            if !(periods > 0.0) || !(tol > 0.0) {
                return Err((EXIT_FLAGS, "--periods and --tol must be positive".into()));
            }
            let config = format!("delaunay tau={tau} periods={periods} tol={tol}");
            let mut manifest = Manifest::new("delaunay", config.as_bytes());
            let span_end = if tau == 0.25 {
                std::f64::consts::PI * periods
            } else {
                delaunay::period(tau).map_err(core_err)?.value * periods
            };
            let traj = delaunay::integrate_profile(tau, (0.0, span_end), tol).map_err(core_err)?;
            write_file(
                &out.out_dir,
                "trajectory.csv",
                &traj.to_csv(),
                &mut manifest,
            )
            .map_err(core_err)?;
            write_file(
                &out.out_dir,
                "events.csv",
                &traj.events_to_csv(),
                &mut manifest,
            )
            .map_err(core_err)?;
            manifest.write(&out.out_dir).map_err(io_err)?;
            println!(
                "integrated {} samples over [0, {:.6}], {} minima",
                traj.samples.len(),
                span_end,
                traj.events.len()
            );
            Ok(())
        }
        Command::Verify {
            taus,
            threshold,
            out,
        } => {
            let grid = parse_tau_grid(&taus).map_err(|m| (EXIT_FLAGS, m))?;
            for &tau in &grid {
                if !(tau > delaunay::TAU_FLOOR && tau < 0.25) {
                    return Err((
                        EXIT_FLAGS,
                        format!("tau {tau} outside ({}, 1/4)", delaunay::TAU_FLOOR),
                    ));
                }
            }
            let config = format!("verify taus={taus} threshold={threshold}");
            let mut manifest = Manifest::new("verify", config.as_bytes());
            let reports = identities::verify_grid(&grid).map_err(core_err)?;
            write_file(
                &out.out_dir,
                "identities.csv",
                &identities::reports_to_csv(&reports),
                &mut manifest,
            )
            .map_err(core_err)?;
            manifest.write(&out.out_dir).map_err(io_err)?;
            let worst = reports.iter().map(|r| r.rel_err).fold(0.0, f64::max);
            let failing: Vec<&identities::IdentityReport> =
                reports.iter().filter(|r| r.rel_err > threshold).collect();
            println!(
                "{} identity checks, worst rel_err {:.3e}",
                reports.len(),
                worst
            );
            if !failing.is_empty() {
                for r in &failing {
                    eprintln!(
                        "FAIL {} at tau = {}: rel_err {:.3e}",
                        r.name, r.tau, r.rel_err
                    );
                }
                return Err((
                    1,
                    format!("{} identity checks over threshold", failing.len()),
                ));
            }
            Ok(())
        }
        Command::Shoot {
            problem,
            delta,
            out,
        } => {
            let bytes = std::fs::read(&problem)
                .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", problem.display())))?;
            let mut manifest = Manifest::new("shoot", &bytes);
            let text = String::from_utf8_lossy(&bytes);
            let (spec, newton) = ProblemFile::parse(&text)
                .and_then(|p| p.build())
                .map_err(core_err)?;
            let result = shooting::match_boundary(&spec, delta, &newton).map_err(core_err)?;
            write_file(
                &out.out_dir,
                "shoot_result.json",
                &result.to_json(),
                &mut manifest,
            )
            .map_err(core_err)?;
            write_file(
                &out.out_dir,
                "shoot_trajectory.csv",
                &result.trajectory.base.to_csv(),
                &mut manifest,
            )
            .map_err(core_err)?;
            manifest.write(&out.out_dir).map_err(io_err)?;
            println!(
                "matched omega = {:.6e}, phi0 = {:.12}, residuals ({:.2e}, {:.2e}), {} iterations",
                result.omega,
                result.phi0,
                result.residual_tau,
                result.residual_zeta,
                result.iterations
            );
            Ok(())
        }
        Command::Scan {
            problem,
            points,
            jobs,
            out,
        } => {
            if points < 2 {
                return Err((EXIT_FLAGS, "--points must be at least 2".into()));
            }
            let bytes = std::fs::read(&problem)
                .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", problem.display())))?;
            let mut manifest = Manifest::new("scan", &bytes);
            let text = String::from_utf8_lossy(&bytes);
            let (spec, newton) = ProblemFile::parse(&text)
                .and_then(|p| p.build())
                .map_err(core_err)?;
            let jobs = std::env::var("DELAUNAY_CMC_JOBS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .unwrap_or(jobs);
            let jobs = if jobs == 0 {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            } else {
                jobs
            };
            let t_end = spec.t_end();
            let grid: Vec<f64> = (0..points)
                .map(|i| t_end * i as f64 / points as f64)
                .collect();
            let scan = shooting::scan_start_point(&spec, &grid, &newton, jobs);
            write_file(&out.out_dir, "scan.csv", &scan.to_csv(), &mut manifest)
                .map_err(core_err)?;
            write_file(
                &out.out_dir,
                "zeros.json",
                &scan.zeros_to_json(),
                &mut manifest,
            )
            .map_err(core_err)?;
            manifest.write(&out.out_dir).map_err(io_err)?;
            println!(
                "{} points, {} sign changes, {} refined zeros{}",
                scan.points.len(),
                scan.sign_changes(),
                scan.zeros.len(),
                if scan.all_zero {
                    " (omega = 0 everywhere: infinitely many candidates)"
                } else {
                    ""
                }
            );
            Ok(())
        }
        Command::Mesh {
            tau,
            periods,
            epsilon,
            theta_res,
            tube,
            out,
        } => {
            if !(tau > 0.0 && tau <= 0.25) {
                return Err((
                    EXIT_FLAGS,
                    format!("--tau {tau} outside the (0, 1/4] domain"),
                ));
            }
            if !(epsilon > 0.0) {
                return Err((EXIT_FLAGS, "--epsilon must be positive".into()));
            }
            let config = format!(
                "mesh tau={tau} periods={periods} epsilon={epsilon} theta_res={theta_res} tube={tube}"
            );
            let mut manifest = Manifest::new("mesh", config.as_bytes());
            let span_end = if tau == 0.25 {
                std::f64::consts::PI * periods
            } else {
                delaunay::period(tau).map_err(core_err)?.value * periods
            };
            let traj =
                delaunay::integrate_profile(tau, (0.0, span_end), 1e-10).map_err(core_err)?;
            let mesh = if tube {
                let l_gamma = epsilon * span_end;
                geometry::embed_tube(&traj, epsilon, l_gamma, theta_res).map_err(core_err)?
            } else {
                geometry::embed_unduloid(&traj, epsilon, theta_res).map_err(core_err)?
            };
            std::fs::create_dir_all(&out.out_dir).map_err(io_err)?;
            let obj_path = out.out_dir.join("surface.obj");
            geometry::export_obj(&mesh, &obj_path).map_err(core_err)?;
            manifest.add(obj_path);
            if mesh.per_vertex_h.is_some() {
                manifest.add(out.out_dir.join("surface.h.csv"));
            }
            manifest.write(&out.out_dir).map_err(io_err)?;
            println!(
                "mesh: {} vertices, {} faces{}",
                mesh.vertex_count(),
                mesh.face_count(),
                if mesh.non_cmc_embedding {
                    " (tube embedding: not CMC in flat space)"
                } else {
                    ""
                }
            );
            Ok(())
        }
        Command::Monodromy { taus, out } => {
            let grid = parse_tau_grid(&taus).map_err(|m| (EXIT_FLAGS, m))?;
            let config = format!("monodromy taus={taus}");
            let mut manifest = Manifest::new("monodromy", config.as_bytes());
            let rows = linearization::kappa_grid(&grid).map_err(core_err)?;
            write_file(
                &out.out_dir,
                "kappa.csv",
                &linearization::kappa_grid_to_csv(&rows),
                &mut manifest,
            )
            .map_err(core_err)?;
            let matrices: Vec<serde_json::Value> = grid
                .iter()
                .map(|&tau| {
                    let m = linearization::monodromy(tau).map_err(core_err)?;
                    Ok(serde_json::json!({
                        "tau": tau,
                        "entries": m.entries,
                        "kappa": m.kappa,
                        "structure_defect": m.structure_defect,
                    }))
                })
                .collect::<Result<_, (u8, String)>>()?;
            write_file(
                &out.out_dir,
                "monodromy.json",
                &serde_json::to_string_pretty(&matrices).expect("monodromy serializes"),
                &mut manifest,
            )
            .map_err(core_err)?;
            manifest.write(&out.out_dir).map_err(io_err)?;
            for (tau, kappa, defect) in &rows {
                println!("tau = {tau}: kappa = {kappa:.8e} (structure defect {defect:.2e})");
            }
            Ok(())
        }
    }
}

fn core_err(e: CoreError) -> (u8, String) {
    (exit_code_for(&e), e.to_string())
}

fn io_err(e: std::io::Error) -> (u8, String) {
    (EXIT_IO, e.to_string())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
