//! Command-line front end: config parsing, experiment orchestration, and
//! CSV/JSON emission of kernels, accommodation tables, and verification
//! reports.
//!
//! Every subcommand reads one TOML configuration (`--config`), writes its
//! artifacts under the output directory (`--out` overrides the config),
//! and exits with:
//!
//! * `0` — all requested invariant checks passed their tolerances;
//! * `1` — the run completed but an invariant check failed;
//! * `2` — usage or configuration error;
//! * `3` — numerical failure (non-convergence, step budget, degeneracy).
//!
//! Machine-readable failures go to stderr as one JSON object. Artifacts
//! are byte-identical across runs and `--threads` settings: sampling is
//! deterministic and every parallel reduction is order-preserving. CSV
//! numbers use the shortest representation that round-trips a 64-bit
//! float; each CSV artifact is accompanied by a `.meta.json` sidecar
//! embedding the SHA-256 of the config text.

use crate::config::{self, BcKind, RunConfig};
use crate::error::{Error, Result};
use crate::flat_bc;
use crate::grid::{Axis, VelocityGrid};
use crate::kernel::{verify_kernel_axioms, BoundaryReport};
use crate::kinematics;
use crate::layer;
use crate::phonon::{check_collision_structure, AdmissibleGrid};
use crate::report::ValidationReport;
use crate::rough::{self, RoughRegime};
use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "gasurf",
    version,
    about = "Gas–surface scattering kernels and kinetic boundary conditions \
             from nanoscale wall models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the configured wall potential's shape invariants.
    ValidatePotential,
    /// Tabulate the accommodation fraction a(v) and its Padé variant.
    Accommodation,
    /// Assemble and verify a flat-wall scattering kernel.
    FlatKernel,
    /// Solve the linear kinetic surface-layer problem for the configured
    /// inflow.
    Lksl,
    /// Trace molecules through the periodic surface cell.
    RoughTrace,
    /// Assemble and verify a rough-wall scattering kernel.
    RoughKernel,
    /// Apply the configured boundary condition to the configured inflow.
    ApplyBc,
    /// Run the full verification battery for the configured setup.
    Verify,
}

struct Ctx {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
}

/// Parses arguments and runs the requested subcommand, returning the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("{}", json!({"error": "usage", "message": "--threads must be at least 1"}));
            return 2;
        }
        // A pool may already exist when embedded; the determinism contract
        // makes the thread count irrelevant to outputs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = match load_ctx(&cli) {
        Ok(ctx) => ctx,
        Err(e) => return fail(&e),
    };
    match dispatch(cli.command, &ctx) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    let (kind, code) = match e {
        Error::Domain(_) => ("domain", 2),
        Error::Quadrature { .. } => ("quadrature", 3),
        Error::OdeMaxSteps { .. } => ("ode-max-steps", 3),
        Error::NonConvergence { .. } => ("non-convergence", 3),
        Error::Degenerate(_) => ("degenerate", 3),
        Error::Assembly { .. } => ("assembly", 3),
    };
    eprintln!("{}", json!({ "error": kind, "message": e.to_string() }));
    code
}

fn load_ctx(cli: &Cli) -> Result<Ctx> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::Domain("--config <path> is required for every subcommand".to_string())
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read config {path:?}: {e}")))?;
    let cfg = config::parse_config(&text)?;
    let hash = config::config_hash(&text);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out)
        .map_err(|e| Error::Domain(format!("cannot create output directory {out:?}: {e}")))?;
    Ok(Ctx { cfg, hash, out })
}

fn dispatch(command: Command, ctx: &Ctx) -> Result<i32> {
    match command {
        Command::ValidatePotential => cmd_validate_potential(ctx),
        Command::Accommodation => cmd_accommodation(ctx),
        Command::FlatKernel => cmd_flat_kernel(ctx),
        Command::Lksl => cmd_lksl(ctx),
        Command::RoughTrace => cmd_rough_trace(ctx),
        Command::RoughKernel => cmd_rough_kernel(ctx),
        Command::ApplyBc => cmd_apply_bc(ctx),
        Command::Verify => cmd_verify(ctx),
    }
}

// ---------------------------------------------------------------------
// Artifact plumbing
// ---------------------------------------------------------------------

/// Shortest decimal representation that round-trips the value.
fn num(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Domain(format!("cannot write {path:?}: {e}")))?;
    w.write_record(header)
        .and_then(|()| {
            rows.iter().try_for_each(|r| w.write_record(r))?;
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::Domain(format!("cannot write {path:?}: {e}")))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("cannot serialize {path:?}: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Error::Domain(format!("cannot write {path:?}: {e}")))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn grid_meta(grid: &VelocityGrid) -> serde_json::Value {
    json!({
        "n_vx": grid.x_axis().len(),
        "n_vz_half": grid.z_axis().len() / 2,
        "v_max_x": grid.x_axis().edges().last(),
        "v_max_z": grid.z_axis().edges().last(),
        "half_len": grid.half_len(),
    })
}

fn report_exit(rep: &ValidationReport) -> i32 {
    print!("{rep}");
    if rep.passed {
        println!("all checks passed");
        0
    } else {
        println!("some checks FAILED");
        1
    }
}

// ---------------------------------------------------------------------
// validate-potential
// ---------------------------------------------------------------------

fn potential_checks(cfg: &RunConfig, rep: &mut ValidationReport) {
    let p = match cfg.flat_potential() {
        Ok(p) => {
            rep.push("flat potential constructible", true, format!("{p:?}"));
            p
        }
        Err(e) => {
            rep.push("flat potential constructible", false, e.to_string());
            return;
        }
    };
    let (w_m, l, z_m) = (p.w_m(), p.l(), p.z_m());
    let at = |z: f64| p.eval(z).map(|wv| wv.0).unwrap_or(f64::NAN);
    rep.push_residual("barrier W(0) = W_m", (at(0.0) - w_m).abs() / w_m, 1e-12);
    rep.push_residual("well floor W(z_m) = 0", at(z_m) / w_m, 1e-12);
    let mut shape_ok = true;
    let mut detail = String::new();
    for k in 1..128 {
        let z = l * k as f64 / 128.0;
        if z >= l {
            break;
        }
        let (_, dw) = p.eval(z).unwrap_or((f64::NAN, f64::NAN));
        let want_down = z < z_m;
        if (want_down && dw >= 0.0 && (z_m - z) > 1e-9 * l)
            || (!want_down && dw <= 0.0 && (z - z_m) > 1e-9 * l)
            || !dw.is_finite()
        {
            shape_ok = false;
            detail = format!("W′({z}) = {dw} breaks monotonicity");
            break;
        }
    }
    rep.push(
        "single well: W decreasing below z_m, increasing above",
        shape_ok,
        if shape_ok {
            "monotone on both flanks at 128 probe points".to_string()
        } else {
            detail
        },
    );
    let near = at(l * (1.0 - 1e-6));
    rep.push(
        "blow-up at the solid",
        near > 1e8 * w_m,
        format!("W(L·(1−1e−6)) = {near:.3e}"),
    );
    let mut tp_worst = 0.0f64;
    for rho in [0.4, 0.8, 1.5] {
        let e = rho * p.escape_speed();
        match kinematics::turning_points(&p, e) {
            Ok(tp) => {
                tp_worst = tp_worst.max((at(tp.z_minus) - e * e).abs() / w_m.max(e * e));
                if tp.trapped {
                    tp_worst = tp_worst.max((at(tp.z_plus) - e * e).abs() / w_m.max(e * e));
                }
            }
            Err(err) => {
                rep.push("turning points solvable", false, err.to_string());
                return;
            }
        }
    }
    rep.push_residual("turning points invert the potential", tp_worst, 1e-9);

    match cfg.periodic_potential() {
        Ok(pp) => {
            let mut periodic_worst = 0.0f64;
            let mut flat_below = 0.0f64;
            for k in 0..16 {
                let y = k as f64 / 16.0 + 0.03;
                let z = 0.5 * pp.zeta_inf(y);
                let a = pp.eval(y, z).map(|t| t.0).unwrap_or(f64::NAN);
                let b = pp.eval(y + 1.0, z).map(|t| t.0).unwrap_or(f64::NAN);
                periodic_worst = periodic_worst.max((a - b).abs() / w_m);
                let below = pp.eval(y, -0.2).map(|t| t.0).unwrap_or(f64::NAN);
                flat_below = flat_below.max((below - w_m).abs() / w_m);
            }
            rep.push_residual("periodicity in y", periodic_worst, 1e-12);
            rep.push_residual("constant W_m below the layer", flat_below, 1e-12);
            rep.push(
                "roughness scale bounds",
                pp.zeta_inf_max() <= l * (pp.s0() + cfg.potential.s1) + 1e-15,
                format!("max blow-up height {}", pp.zeta_inf_max()),
            );
        }
        Err(e) => rep.push("periodic potential constructible", false, e.to_string()),
    }
}

fn cmd_validate_potential(ctx: &Ctx) -> Result<i32> {
    let mut rep = ValidationReport::new();
    potential_checks(&ctx.cfg, &mut rep);
    write_json(
        &ctx.out.join("report.json"),
        &json!({
            "command": "validate-potential",
            "config_sha256": ctx.hash,
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

// ---------------------------------------------------------------------
// accommodation
// ---------------------------------------------------------------------

fn cmd_accommodation(ctx: &Ctx) -> Result<i32> {
    let model = ctx.cfg.required_collision_kernel()?;
    let p = ctx.cfg.flat_potential()?;
    let grid = ctx.cfg.velocity_grid()?;
    let n = grid.half_len();

    // One computation per |v_x| column, mirrored, so the table is even in
    // v_x bit-for-bit.
    let computed: Vec<(usize, [f64; 4])> = (0..n)
        .into_par_iter()
        .filter(|&h| grid.vx(h) > 0.0)
        .map(|h| -> Result<(usize, [f64; 4])> {
            let v = (grid.vx(h), grid.vz_mag(h));
            let (tau_z, tau_ms) = flat_bc::entrance_times(&model, &p, v)?;
            Ok((
                h,
                [
                    tau_z,
                    tau_ms,
                    flat_bc::accommodation_from_times(tau_z, tau_ms),
                    flat_bc::pade_from_times(tau_z, tau_ms),
                ],
            ))
        })
        .collect::<Result<_>>()?;
    let mut vals = vec![[f64::NAN; 4]; n];
    for (h, v) in computed {
        vals[h] = v;
        vals[grid.x_flip(h)] = v;
    }

    let rows: Vec<Vec<String>> = (0..n)
        .map(|h| {
            vec![
                num(grid.vx(h)),
                num(grid.vz_mag(h)),
                num(vals[h][0]),
                num(vals[h][1]),
                num(vals[h][2]),
                num(vals[h][3]),
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("a_of_v.csv"),
        &["v_x", "v_z", "tau_z", "tau_ms_bar", "a", "a_pade"],
        &rows,
    )?;

    // Re-check the table invariants on the emitted values.
    let mut rep = ValidationReport::new();
    let inside = vals
        .iter()
        .flat_map(|v| [v[2], v[3]])
        .all(|a| a > 0.0 && a < 1.0);
    rep.push(
        "a and a_pade inside (0, 1)",
        inside,
        "both fractions are strict probabilities".to_string(),
    );
    let even = (0..n).all(|h| vals[h][2] == vals[grid.x_flip(h)][2]);
    rep.push("a even in v_x", even, "bitwise mirror symmetry".to_string());
    let mut monotone = true;
    let half_nz = grid.z_axis().len() / 2;
    for ix in 0..grid.x_axis().len() {
        let mut prev: Option<f64> = None;
        for k in 0..half_nz {
            let h = grid.fuse(ix, k);
            if grid.vz_mag(h) < 1.0 {
                continue;
            }
            if let Some(pv) = prev {
                if vals[h][2] > pv + 1e-12 {
                    monotone = false;
                }
            }
            prev = Some(vals[h][2]);
        }
    }
    rep.push(
        "a decreasing in large v_z",
        monotone,
        "non-increasing along every column for v_z ≥ 1".to_string(),
    );

    write_json(
        &ctx.out.join("a_of_v.meta.json"),
        &json!({
            "command": "accommodation",
            "config_sha256": ctx.hash,
            "grid": grid_meta(&grid),
            "collision": ctx.cfg.collision,
            "potential": ctx.cfg.potential,
            "columns": ["v_x", "v_z", "tau_z", "tau_ms_bar", "a", "a_pade"],
            "v_z_convention": "incoming normal speed |v_z|",
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

// ---------------------------------------------------------------------
// flat-kernel / rough-kernel
// ---------------------------------------------------------------------

fn kernel_rows(n: usize, mass: impl Fn(usize, usize) -> f64) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(vec![i.to_string(), j.to_string(), num(mass(i, j))]);
        }
    }
    rows
}

fn centers_meta(grid: &VelocityGrid) -> serde_json::Value {
    let n = grid.half_len();
    json!({
        "v_x": (0..n).map(|h| grid.vx(h)).collect::<Vec<_>>(),
        "v_z": (0..n).map(|h| grid.vz_mag(h)).collect::<Vec<_>>(),
    })
}

fn cmd_flat_kernel(ctx: &Ctx) -> Result<i32> {
    let regime = match ctx.cfg.bc_kind()? {
        BcKind::Flat(r) => r,
        _ => {
            return Err(Error::Domain(format!(
                "flat-kernel needs a flat bc.regime (got {:?}); use rough-kernel instead",
                ctx.cfg.bc.regime
            )))
        }
    };
    let grid = ctx.cfg.velocity_grid()?;
    let model = ctx.cfg.collision_kernel()?;
    let p = ctx.cfg.flat_potential()?;
    let k = flat_bc::scattering_kernel_r(regime, &grid, model.as_ref(), Some(&p))?;
    let n = grid.half_len();
    write_csv(
        &ctx.out.join("kernel.csv"),
        &["out_index", "in_index", "mass"],
        &kernel_rows(n, |i, j| {
            let mut m = k.dense_entry(i, j) * grid.area(i);
            if i == j {
                m += k.specular_coeff(j);
            }
            m
        }),
    )?;
    let report = verify_kernel_axioms(&k);
    let tol = ctx.cfg.solver.check_tol;
    let passed = report.passed(tol);
    write_json(
        &ctx.out.join("kernel.meta.json"),
        &json!({
            "command": "flat-kernel",
            "config_sha256": ctx.hash,
            "regime": ctx.cfg.bc.regime,
            "grid": grid_meta(&grid),
            "cell_centers": centers_meta(&grid),
            "mass_convention":
                "column j sums to 1: entry = flux fraction of incoming cell j emitted into cell i",
            "report": report,
            "check_tol": tol,
            "passed": passed,
        }),
    )?;
    println!("{report}");
    Ok(if passed { 0 } else { 1 })
}

fn cmd_rough_kernel(ctx: &Ctx) -> Result<i32> {
    let pot = ctx.cfg.periodic_potential()?;
    let grid = ctx.cfg.velocity_grid()?;
    let rcfg = ctx.cfg.rough_config();
    let n = grid.half_len();
    let tol_flux = ctx.cfg.solver.rough_flux_tol;

    // An explicit rough regime wins; under a flat regime the collision
    // model's presence decides, so the default config still assembles.
    let model = match ctx.cfg.bc_kind()? {
        BcKind::RoughSpecular => None,
        BcKind::RoughMaxwellLike => Some(ctx.cfg.required_collision_kernel()?),
        BcKind::Flat(_) => ctx.cfg.collision_kernel()?,
    };
    let regime_name = if model.is_none() { "rough-specular" } else { "rough-maxwell-like" };

    let (report, stats, mirror_min, flux_drift) = match model {
        None => {
            let k = rough::build_specular_kernel(&pot, &grid, &rcfg)?;
            write_csv(
                &ctx.out.join("kernel.csv"),
                &["out_index", "in_index", "mass"],
                &kernel_rows(n, |i, j| k.entry(i, j) * grid.area(i)),
            )?;
            let m = grid.maxwellian_field();
            let out = k.apply(&m)?;
            let drift = (grid.flux(&out) - grid.flux(&m)).abs() / grid.flux(&m);
            (
                rough::verify_rough_kernel(RoughRegime::Specular(&k)),
                k.stats().clone(),
                mirror_mass_min(&grid, |i, j| k.entry(i, j) * grid.area(i)),
                drift,
            )
        }
        Some(model) => {
            let ml = rough::build_maxwell_like_kernel(&pot, &model, &grid, &rcfg)?;
            let k2 = |i: usize, j: usize| {
                if ml.c > 0.0 {
                    ml.a_sharp[i] * ml.a_sharp[grid.x_flip(j)] * grid.vz_mag(j)
                        * grid.maxwellian(i)
                        / ml.c
                } else {
                    0.0
                }
            };
            write_csv(
                &ctx.out.join("kernel.csv"),
                &["out_index", "in_index", "mass"],
                &kernel_rows(n, |i, j| (ml.k1.entry(i, j) + k2(i, j)) * grid.area(i)),
            )?;
            let m = grid.maxwellian_field();
            let out = rough::apply_rough_bc(RoughRegime::MaxwellLike(&ml), &m)?;
            let drift = (grid.flux(&out) - grid.flux(&m)).abs() / grid.flux(&m);
            (
                rough::verify_rough_kernel(RoughRegime::MaxwellLike(&ml)),
                ml.k1.stats().clone(),
                mirror_mass_min(&grid, |i, j| ml.specular.entry(i, j) * grid.area(i)),
                drift,
            )
        }
    };

    let mut rep = ValidationReport::new();
    rep.push_residual("non-negativity", report.nonneg, 0.0);
    rep.push_residual("Maxwellian flux balance", flux_drift, tol_flux);
    if ctx.cfg.potential.s1 == 0.0 {
        rep.push(
            "flat scaling reduces to the mirror kernel",
            mirror_min >= 0.99,
            format!("minimum mirror-cell mass {mirror_min:.6}"),
        );
    }
    write_json(
        &ctx.out.join("kernel.meta.json"),
        &json!({
            "command": "rough-kernel",
            "config_sha256": ctx.hash,
            "regime": regime_name,
            "grid": grid_meta(&grid),
            "cell_centers": centers_meta(&grid),
            "mass_convention":
                "entry = flux fraction of incoming cell j emitted into cell i; \
                 columns of nonzero data sum to ≈1 (binned density); \
                 the column flux identity is exact by construction",
            "report": report,
            "assembly": stats,
            "specular_mirror_cell_mass_min": mirror_min,
            "maxwellian_flux_drift": flux_drift,
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

/// Minimum over nonempty columns of the mass left in the mirror cell.
fn mirror_mass_min(grid: &VelocityGrid, mass: impl Fn(usize, usize) -> f64) -> f64 {
    let n = grid.half_len();
    let mut min = f64::INFINITY;
    for j in 0..n {
        let total: f64 = (0..n).map(|i| mass(i, j)).sum();
        if total > 0.0 {
            min = min.min(mass(j, j) / total);
        }
    }
    if min.is_finite() {
        min
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------
// lksl / apply-bc
// ---------------------------------------------------------------------

fn outgoing_rows(grid: &VelocityGrid, f_in: &[f64], f_out: &[f64]) -> Vec<Vec<String>> {
    (0..grid.half_len())
        .map(|h| {
            vec![
                num(grid.vx(h)),
                num(grid.vz_mag(h)),
                num(f_in[h]),
                num(f_out[h]),
            ]
        })
        .collect()
}

fn cmd_lksl(ctx: &Ctx) -> Result<i32> {
    let model = ctx.cfg.required_collision_kernel()?;
    let p = ctx.cfg.flat_potential()?;
    let grid = ctx.cfg.velocity_grid()?;
    let f_in = ctx.cfg.inflow_field(&grid)?;
    let sol = layer::solve_lksl(&f_in, &model, &p, &grid, &ctx.cfg.layer_config())?;
    write_csv(
        &ctx.out.join("lksl_outgoing.csv"),
        &["v_x", "v_z", "f_in", "f_out"],
        &outgoing_rows(&grid, &f_in, &sol.f_out),
    )?;
    let tol = ctx.cfg.solver.check_tol;
    let rel = sol.flux_residual / sol.flux_in.abs().max(1.0);
    let mut rep = ValidationReport::new();
    rep.push_residual("zero net mass flux", rel, tol);
    rep.push(
        "outgoing trace non-negative",
        sol.f_out.iter().all(|&x| x >= 0.0),
        "positivity preserved".to_string(),
    );
    write_json(
        &ctx.out.join("lksl_outgoing.meta.json"),
        &json!({
            "command": "lksl",
            "config_sha256": ctx.hash,
            "grid": grid_meta(&grid),
            "columns": ["v_x", "v_z", "f_in", "f_out"],
            "v_z_convention": "f_in at incoming (v_x, −v_z), f_out at outgoing (v_x, +v_z)",
            "iterations": sol.iterations,
            "flux_residual": sol.flux_residual,
            "flux_in": sol.flux_in,
            "alpha1": sol.alpha1,
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

fn cmd_apply_bc(ctx: &Ctx) -> Result<i32> {
    let grid = ctx.cfg.velocity_grid()?;
    let f_in = ctx.cfg.inflow_field(&grid)?;
    let (f_out, binned) = match ctx.cfg.bc_kind()? {
        BcKind::Flat(regime) => {
            let model = ctx.cfg.collision_kernel()?;
            let p = ctx.cfg.flat_potential()?;
            (
                flat_bc::apply_boundary(regime, &f_in, &grid, model.as_ref(), Some(&p))?,
                false,
            )
        }
        BcKind::RoughSpecular => {
            let pot = ctx.cfg.periodic_potential()?;
            let k = rough::build_specular_kernel(&pot, &grid, &ctx.cfg.rough_config())?;
            (rough::apply_rough_bc(RoughRegime::Specular(&k), &f_in)?, true)
        }
        BcKind::RoughMaxwellLike => {
            let pot = ctx.cfg.periodic_potential()?;
            let model = ctx.cfg.required_collision_kernel()?;
            let ml = rough::build_maxwell_like_kernel(&pot, &model, &grid, &ctx.cfg.rough_config())?;
            (
                rough::apply_rough_bc(RoughRegime::MaxwellLike(&ml), &f_in)?,
                true,
            )
        }
    };
    write_csv(
        &ctx.out.join("outgoing.csv"),
        &["v_x", "v_z", "f_in", "f_out"],
        &outgoing_rows(&grid, &f_in, &f_out),
    )?;
    let flux_in = grid.flux(&f_in);
    let flux_out = grid.flux(&f_out);
    let rel = (flux_out - flux_in).abs() / flux_in.abs().max(f64::MIN_POSITIVE);
    let tol = if binned {
        ctx.cfg.solver.rough_flux_tol
    } else {
        ctx.cfg.solver.check_tol
    };
    let mut rep = ValidationReport::new();
    rep.push_residual("zero net mass flux", rel, tol);
    write_json(
        &ctx.out.join("outgoing.meta.json"),
        &json!({
            "command": "apply-bc",
            "config_sha256": ctx.hash,
            "regime": ctx.cfg.bc.regime,
            "grid": grid_meta(&grid),
            "columns": ["v_x", "v_z", "f_in", "f_out"],
            "flux_in": flux_in,
            "flux_out": flux_out,
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

// ---------------------------------------------------------------------
// rough-trace
// ---------------------------------------------------------------------

fn cmd_rough_trace(ctx: &Ctx) -> Result<i32> {
    let pot = ctx.cfg.periodic_potential()?;
    let model = ctx.cfg.collision_kernel()?;
    let spec = ctx.cfg.ode_spec();
    let n = ctx.cfg.solver.trace_count;
    let v_min = ctx.cfg.grid.v_min;

    // Deterministic entry states: y uniform, v_x standard normal
    // (Box–Muller), |v_z| flux-weighted (inverse CDF of v e^{−v²/2}).
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.solver.seed);
    let mut entries = Vec::with_capacity(n);
    let mut cutoff_skipped = 0usize;
    for _ in 0..n {
        let y: f64 = rng.random();
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let vx = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let vz = (-2.0 * (1.0 - u3).ln()).sqrt();
        if vz < v_min {
            cutoff_skipped += 1;
            continue;
        }
        entries.push((y, (vx, vz)));
    }

    let traced: Vec<std::result::Result<rough::ExitRecord, Error>> = entries
        .par_iter()
        .map(|&(y, v)| rough::trace_particle(&pot, model.as_ref(), y, v, &spec))
        .collect();

    let mut rows = Vec::new();
    let mut failed = 0usize;
    let mut max_drift = 0.0f64;
    for rec in traced {
        match rec {
            Ok(r) => {
                max_drift = max_drift.max(r.energy_drift.abs());
                rows.push(vec![
                    num(r.y_in),
                    num(r.v_in.0),
                    num(r.v_in.1),
                    num(r.y_out),
                    num(r.v_out.0),
                    num(r.v_out.1),
                    num(r.tau_fl),
                    num(r.r),
                    num(r.energy_drift),
                    r.steps.to_string(),
                ]);
            }
            Err(Error::OdeMaxSteps { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    write_csv(
        &ctx.out.join("trace.csv"),
        &[
            "y_in",
            "v_x_in",
            "v_z_in",
            "y_out",
            "v_x_out",
            "v_z_out",
            "tau_fl",
            "r",
            "energy_drift",
            "steps",
        ],
        &rows,
    )?;
    let mut rep = ValidationReport::new();
    rep.push(
        "step budget holds for ≥ 99% of trajectories",
        failed * 100 <= n,
        format!("{failed} of {n} exhausted the budget"),
    );
    rep.push_residual("energy conservation along traces", max_drift, ctx.cfg.solver.check_tol);
    write_json(
        &ctx.out.join("trace.meta.json"),
        &json!({
            "command": "rough-trace",
            "config_sha256": ctx.hash,
            "requested": n,
            "below_cutoff": cutoff_skipped,
            "traced": rows.len(),
            "failed": failed,
            "max_energy_drift": max_drift,
            "ode_step_tol": spec.step_tol,
            "collision": ctx.cfg.collision.kind,
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}

// ---------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------

fn cmd_verify(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let tol = cfg.solver.check_tol;
    let mut rep = ValidationReport::new();
    potential_checks(cfg, &mut rep);
    let p = cfg.flat_potential()?;
    let grid = cfg.velocity_grid()?;
    let model = cfg.collision_kernel()?;

    let mut collision_report: Option<ValidationReport> = None;

    if let Some(model) = &model {
        // Collision-operator structure on the fullest slice (z = z_m,
        // where the well floor admits every equivalent velocity). The
        // slice resolution is fixed: it tests the model, not the user
        // grid, and the structural tolerances are calibrated for it.
        let vx = Axis::symmetric(6.0, 32)?;
        let vz = Axis::symmetric(6.0, 64)?;
        let slice = AdmissibleGrid::new(&p, p.z_m(), vx, &vz)?;
        let sub = check_collision_structure(model, &slice, 100, cfg.solver.seed)?;
        for c in &sub.checks {
            rep.push(&format!("collision: {}", c.name), c.passed, c.detail.clone());
        }
        collision_report = Some(sub);
    }

    let kernel_report: BoundaryReport = match cfg.bc_kind()? {
        BcKind::Flat(regime) => {
            let k = flat_bc::scattering_kernel_r(regime, &grid, model.as_ref(), Some(&p))?;
            let r = verify_kernel_axioms(&k);
            rep.push_residual("kernel non-negativity", r.nonneg, tol);
            rep.push_residual("kernel normalization", r.normalization, tol);
            rep.push_residual("kernel zero mass flux", r.mass_flux, tol);
            rep.push_residual("kernel reciprocity", r.reciprocity, tol);
            r
        }
        BcKind::RoughSpecular => {
            let pot = cfg.periodic_potential()?;
            let k = rough::build_specular_kernel(&pot, &grid, &cfg.rough_config())?;
            let r = rough::verify_rough_kernel(RoughRegime::Specular(&k));
            rep.push_residual("rough kernel non-negativity", r.nonneg, 0.0);
            rep.push_residual("rough kernel column flux identity", r.mass_flux, tol);
            let m = grid.maxwellian_field();
            let out = k.apply(&m)?;
            let drift = (grid.flux(&out) - grid.flux(&m)).abs() / grid.flux(&m);
            rep.push_residual("rough Maxwellian flux balance", drift, cfg.solver.rough_flux_tol);
            r
        }
        BcKind::RoughMaxwellLike => {
            let pot = cfg.periodic_potential()?;
            let model = cfg.required_collision_kernel()?;
            let ml = rough::build_maxwell_like_kernel(&pot, &model, &grid, &cfg.rough_config())?;
            let r = rough::verify_rough_kernel(RoughRegime::MaxwellLike(&ml));
            rep.push_residual("rough kernel non-negativity", r.nonneg, 0.0);
            // Forward/reverse absorption agreement is stratification
            // limited, not exact.
            rep.push_residual("rough absorption consistency", r.mass_flux, 0.1);
            let m = grid.maxwellian_field();
            let out = rough::apply_rough_bc(RoughRegime::MaxwellLike(&ml), &m)?;
            let mut l1 = 0.0;
            let mut norm = 0.0;
            for h in 0..grid.half_len() {
                l1 += (out[h] - m[h]).abs() * grid.flux_weight(h);
                norm += m[h] * grid.flux_weight(h);
            }
            rep.push_residual(
                "rough equilibrium preservation (L1 flux)",
                l1 / norm,
                cfg.solver.rough_flux_tol,
            );
            let drift = (grid.flux(&out) - grid.flux(&m)).abs() / grid.flux(&m);
            rep.push_residual("rough Maxwellian flux balance", drift, tol);
            r
        }
    };

    write_json(
        &ctx.out.join("report.json"),
        &json!({
            "command": "verify",
            "config_sha256": ctx.hash,
            "regime": cfg.bc.regime,
            "grid": grid_meta(&grid),
            "check_tol": tol,
            "kernel_report": kernel_report,
            "collision_checks": collision_report.map(|r| r.checks),
            "passed": rep.passed,
            "checks": rep.checks,
        }),
    )?;
    Ok(report_exit(&rep))
}
