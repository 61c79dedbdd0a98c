//! Run configuration: one structured TOML document drives every
//! subcommand, chosen over ad-hoc flags so a run is reproducible from a
//! single artifact. Every section has documented defaults; unknown keys
//! are rejected (the parse error names the valid ones); every emitted
//! artifact embeds the SHA-256 of the exact config text.

use crate::error::{Error, Result};
use crate::flat_bc::Regime;
use crate::grid::VelocityGrid;
use crate::layer::LayerConfig;
use crate::numerics::OdeSpec;
use crate::phonon::CollisionKernel;
use crate::potential::{FlatPotential, PeriodicPotential};
use crate::rough::RoughConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Wall-potential parameters (flat profile plus the optional periodic
/// modulation; `s1 = 0` keeps the wall flat).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    /// Escape barrier `W_m > 0`.
    pub w_m: f64,
    /// Layer depth `L > 0` (the potential blows up at `z = L`).
    pub l: f64,
    /// Well minimum `0 < z_m < L`.
    pub z_m: f64,
    /// Tangential stiffness ratio `β* > 0` of the rough characteristics.
    pub beta_star: f64,
    /// Mean height scale `s₀` of the periodic modulation.
    pub s0: f64,
    /// Modulation amplitude `s₁` (`0 ≤ s₁ < s₀`, `s₀ + s₁ ≤ 1`).
    pub s1: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            w_m: 1.0,
            l: 1.0,
            z_m: 0.5,
            beta_star: 1.0,
            s0: 1.0,
            s1: 0.0,
        }
    }
}

/// Molecule–phonon collision kernel selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionSection {
    /// `"constant"`, `"gaussian-smooth"`, or `"none"` (collisionless).
    pub kind: String,
    /// Rate `ν` of the constant kernel.
    pub nu: f64,
    /// Floor rate `ν₀` of the Gaussian-smoothed kernel.
    pub nu0: f64,
    /// Peak rate `ν₁` of the Gaussian-smoothed kernel.
    pub nu1: f64,
    /// Width of the Gaussian factor.
    pub width: f64,
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self {
            kind: "constant".to_string(),
            nu: 1.0,
            nu0: 0.1,
            nu1: 1.0,
            width: 1.0,
        }
    }
}

/// Velocity-grid resolution and extents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Half-width of the symmetric velocity box.
    pub v_max: f64,
    /// Tangential cells.
    pub n_vx: usize,
    /// Normal cells per half-grid (the full signed axis has `2·n_vz`).
    pub n_vz: usize,
    /// Grazing cutoff for rough-wall tracing.
    pub v_min: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            v_max: 6.0,
            n_vx: 32,
            n_vz: 32,
            v_min: 0.05,
        }
    }
}

/// Solver tolerances and sampling resolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Source-iteration convergence tolerance.
    pub tol: f64,
    /// Source-iteration budget.
    pub max_iterations: usize,
    /// Trapped-magnitude cells of the layer discretization.
    pub n_trap: usize,
    /// Base height cells of the layer discretization.
    pub n_z_base: usize,
    /// Traced samples per velocity cell of rough-kernel assembly.
    pub samples_per_cell: usize,
    /// Step tolerance of the trajectory integrator.
    pub ode_step_tol: f64,
    /// Step budget of the trajectory integrator.
    pub ode_max_steps: usize,
    /// Residual tolerance for exact (round-off level) invariant checks.
    pub check_tol: f64,
    /// Flux-balance tolerance for binned rough kernels.
    pub rough_flux_tol: f64,
    /// Trajectories emitted by `rough-trace`.
    pub trace_count: usize,
    /// Seed of every randomized check and sampler.
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 2500,
            n_trap: 12,
            n_z_base: 48,
            samples_per_cell: 200,
            ode_step_tol: 1e-11,
            ode_max_steps: 100_000,
            check_tol: 1e-8,
            rough_flux_tol: 1e-2,
            trace_count: 1000,
            seed: 7,
        }
    }
}

/// Incoming distribution served to `lksl` and `apply-bc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InflowSection {
    /// `"maxwellian"`, `"linear-drift"` (`M·(1 + eps·v_x)`), `"drifted"`
    /// (Maxwellian at bulk velocity `(ux, uz)`), or `"file"`.
    pub kind: String,
    /// Drift slope of `"linear-drift"`.
    pub eps: f64,
    /// Tangential bulk velocity of `"drifted"`.
    pub ux: f64,
    /// Normal bulk velocity of `"drifted"` (positive = toward the wall).
    pub uz: f64,
    /// CSV path of `"file"`: single column `f`, one row per half-grid
    /// index.
    pub path: String,
}

impl Default for InflowSection {
    fn default() -> Self {
        Self {
            kind: "maxwellian".to_string(),
            eps: 0.1,
            ux: 0.0,
            uz: 0.0,
            path: String::new(),
        }
    }
}

/// Boundary-condition selection for `apply-bc`, `flat-kernel`, and
/// `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcSection {
    /// `"specular"`, `"diffuse"`, `"maxwell-like"`, `"lksl-albedo"`,
    /// `"rough-specular"`, or `"rough-maxwell-like"`.
    pub regime: String,
}

impl Default for BcSection {
    fn default() -> Self {
        Self {
            regime: "maxwell-like".to_string(),
        }
    }
}

/// Artifact destination.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory (overridden by `--out`).
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
        }
    }
}

/// The full validated run configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialSection,
    pub collision: CollisionSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub inflow: InflowSection,
    pub bc: BcSection,
    pub output: OutputSection,
}

/// Which wall geometry a regime needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Flat(Regime),
    RoughSpecular,
    RoughMaxwellLike,
}

/// Parses and validates a configuration document.
///
/// # Errors
/// `Domain` with the TOML position for syntax errors, or naming the
/// offending field for semantic ones.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text)
        .map_err(|e| Error::Domain(format!("config parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Hex SHA-256 of the exact configuration text, embedded in every
/// artifact's metadata.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::new_with_prefix(text.as_bytes()).finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive (got {v})")))
    }
}

impl RunConfig {
    /// Semantic validation with field-naming errors; construction of the
    /// actual domain objects revalidates, so this focuses on messages.
    pub fn validate(&self) -> Result<()> {
        positive("potential.w_m", self.potential.w_m)?;
        positive("potential.l", self.potential.l)?;
        positive("potential.z_m", self.potential.z_m)?;
        if self.potential.z_m >= self.potential.l {
            return Err(Error::Domain(format!(
                "potential.z_m must lie below potential.l (got {} ≥ {})",
                self.potential.z_m, self.potential.l
            )));
        }
        positive("potential.beta_star", self.potential.beta_star)?;
        positive("potential.s0", self.potential.s0)?;
        if !(self.potential.s1 >= 0.0) || self.potential.s1 >= self.potential.s0 {
            return Err(Error::Domain(format!(
                "potential.s1 must satisfy 0 ≤ s1 < s0 (got {})",
                self.potential.s1
            )));
        }
        match self.collision.kind.as_str() {
            "constant" => positive("collision.nu", self.collision.nu)?,
            "gaussian-smooth" => {
                positive("collision.nu0", self.collision.nu0)?;
                positive("collision.nu1", self.collision.nu1)?;
                positive("collision.width", self.collision.width)?;
            }
            "none" => {}
            other => {
                return Err(Error::Domain(format!(
                    "collision.kind must be one of constant, gaussian-smooth, none (got {other:?})"
                )))
            }
        }
        positive("grid.v_max", self.grid.v_max)?;
        if self.grid.n_vx == 0 || self.grid.n_vz == 0 {
            return Err(Error::Domain(
                "grid.n_vx and grid.n_vz must be at least 1".to_string(),
            ));
        }
        if !(self.grid.v_min >= 0.0) || self.grid.v_min >= self.grid.v_max {
            return Err(Error::Domain(format!(
                "grid.v_min must satisfy 0 ≤ v_min < v_max (got {})",
                self.grid.v_min
            )));
        }
        positive("solver.tol", self.solver.tol)?;
        positive("solver.ode_step_tol", self.solver.ode_step_tol)?;
        positive("solver.check_tol", self.solver.check_tol)?;
        positive("solver.rough_flux_tol", self.solver.rough_flux_tol)?;
        for (name, v) in [
            ("solver.max_iterations", self.solver.max_iterations),
            ("solver.n_trap", self.solver.n_trap),
            ("solver.n_z_base", self.solver.n_z_base),
            ("solver.samples_per_cell", self.solver.samples_per_cell),
            ("solver.ode_max_steps", self.solver.ode_max_steps),
        ] {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be at least 1")));
            }
        }
        match self.inflow.kind.as_str() {
            "maxwellian" | "linear-drift" | "drifted" => {}
            "file" => {
                if self.inflow.path.is_empty() {
                    return Err(Error::Domain(
                        "inflow.path is required when inflow.kind = \"file\"".to_string(),
                    ));
                }
            }
            other => {
                return Err(Error::Domain(format!(
                    "inflow.kind must be one of maxwellian, linear-drift, drifted, file \
                     (got {other:?})"
                )))
            }
        }
        self.bc_kind()?;
        Ok(())
    }

    /// The flat base potential.
    pub fn flat_potential(&self) -> Result<FlatPotential> {
        FlatPotential::new(self.potential.w_m, self.potential.l, self.potential.z_m)
    }

    /// The periodic (possibly flat-scaled) wall potential.
    pub fn periodic_potential(&self) -> Result<PeriodicPotential> {
        PeriodicPotential::new(
            self.flat_potential()?,
            self.potential.beta_star,
            self.potential.s0,
            self.potential.s1,
        )
    }

    /// The collision kernel, or `None` for `kind = "none"`.
    pub fn collision_kernel(&self) -> Result<Option<CollisionKernel>> {
        match self.collision.kind.as_str() {
            "constant" => Ok(Some(CollisionKernel::constant(self.collision.nu)?)),
            "gaussian-smooth" => Ok(Some(CollisionKernel::gaussian_smooth(
                self.collision.nu0,
                self.collision.nu1,
                self.collision.width,
            )?)),
            "none" => Ok(None),
            other => Err(Error::Domain(format!(
                "collision.kind must be one of constant, gaussian-smooth, none (got {other:?})"
            ))),
        }
    }

    /// The collision kernel, required.
    pub fn required_collision_kernel(&self) -> Result<CollisionKernel> {
        self.collision_kernel()?.ok_or_else(|| {
            Error::Domain(
                "this command needs a collision model (collision.kind is \"none\")".to_string(),
            )
        })
    }

    /// The symmetric velocity grid.
    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(
            self.grid.v_max,
            self.grid.n_vx,
            self.grid.v_max,
            2 * self.grid.n_vz,
        )
    }

    /// The layer-solver resolution.
    pub fn layer_config(&self) -> LayerConfig {
        LayerConfig {
            n_trap: self.solver.n_trap,
            n_z_base: self.solver.n_z_base,
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
        }
    }

    /// The trajectory-integrator tolerances.
    pub fn ode_spec(&self) -> OdeSpec {
        OdeSpec {
            step_tol: self.solver.ode_step_tol,
            max_steps: self.solver.ode_max_steps,
            ..OdeSpec::default()
        }
    }

    /// The rough-kernel assembly resolution.
    pub fn rough_config(&self) -> RoughConfig {
        RoughConfig {
            samples_per_cell: self.solver.samples_per_cell,
            v_min: self.grid.v_min,
            ode: self.ode_spec(),
        }
    }

    /// The selected boundary-condition kind.
    pub fn bc_kind(&self) -> Result<BcKind> {
        Ok(match self.bc.regime.as_str() {
            "specular" => BcKind::Flat(Regime::Specular),
            "diffuse" | "perfect-accommodation" => BcKind::Flat(Regime::PerfectAccommodation),
            "maxwell-like" => BcKind::Flat(Regime::MaxwellLike),
            "lksl-albedo" | "numerical-albedo" => BcKind::Flat(Regime::NumericalAlbedo),
            "rough-specular" => BcKind::RoughSpecular,
            "rough-maxwell-like" => BcKind::RoughMaxwellLike,
            other => {
                return Err(Error::Domain(format!(
                    "bc.regime must be one of specular, diffuse, maxwell-like, lksl-albedo, \
                     rough-specular, rough-maxwell-like (got {other:?})"
                )))
            }
        })
    }

    /// Materializes the configured inflow on the half-grid (incoming
    /// molecules indexed by `(v_x, |v_z|)`).
    ///
    /// # Errors
    /// `Domain` for unreadable or mis-sized inflow files.
    pub fn inflow_field(&self, grid: &VelocityGrid) -> Result<Vec<f64>> {
        let n = grid.half_len();
        match self.inflow.kind.as_str() {
            "maxwellian" => Ok(grid.maxwellian_field()),
            "linear-drift" => Ok((0..n)
                .map(|h| grid.maxwellian(h) * (1.0 + self.inflow.eps * grid.vx(h)))
                .collect()),
            "drifted" => {
                // Incoming molecules move toward the wall (physical
                // v_z = −|v_z|), so a bulk drift uz > 0 toward the wall
                // shifts the stored magnitude by +uz.
                let (ux, uz) = (self.inflow.ux, self.inflow.uz);
                Ok((0..n)
                    .map(|h| {
                        let dx = grid.vx(h) - ux;
                        let dz = grid.vz_mag(h) - uz;
                        (-0.5 * (dx * dx + dz * dz)).exp()
                    })
                    .collect())
            }
            "file" => {
                let text = std::fs::read_to_string(&self.inflow.path).map_err(|e| {
                    Error::Domain(format!("cannot read inflow.path {:?}: {e}", self.inflow.path))
                })?;
                let mut rdr = csv::Reader::from_reader(text.as_bytes());
                let mut f = Vec::with_capacity(n);
                for rec in rdr.records() {
                    let rec = rec
                        .map_err(|e| Error::Domain(format!("inflow file parse error: {e}")))?;
                    let field = rec.get(0).unwrap_or_default();
                    let v: f64 = field.parse().map_err(|_| {
                        Error::Domain(format!("inflow file holds a non-number {field:?}"))
                    })?;
                    f.push(v);
                }
                if f.len() != n {
                    return Err(Error::Domain(format!(
                        "inflow file has {} rows for a half-grid of {n}",
                        f.len()
                    )));
                }
                Ok(f)
            }
            other => Err(Error::Domain(format!(
                "inflow.kind must be one of maxwellian, linear-drift, drifted, file (got {other:?})"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_documented_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.potential.w_m, 1.0);
        assert_eq!(cfg.potential.z_m, 0.5);
        assert_eq!(cfg.collision.kind, "constant");
        assert_eq!(cfg.grid.n_vx, 32);
        assert_eq!(cfg.solver.samples_per_cell, 200);
        assert_eq!(cfg.bc.regime, "maxwell-like");
        let flat = parse_config("[potential]\nw_m = 2.0\n").unwrap();
        assert_eq!(flat.potential.w_m, 2.0);
        assert_eq!(flat.potential.l, 1.0);
    }

    #[test]
    fn negative_barrier_is_rejected_by_name() {
        let err = parse_config("[potential]\nw_m = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("potential.w_m"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_valid_ones() {
        let err = parse_config("[potenial]\nw_m = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("potenial"), "{msg}");
        assert!(msg.contains("potential"), "suggests the valid key: {msg}");
        // Nested sections reject unknown keys too.
        let err = parse_config("[grid]\nvmax = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("v_max"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        let err = parse_config("[potential\nw_m = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_text_sensitive() {
        let a = config_hash("[potential]\nw_m = 1.0\n");
        assert_eq!(a, config_hash("[potential]\nw_m = 1.0\n"));
        assert_ne!(a, config_hash("[potential]\nw_m = 2.0\n"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn builders_assemble_domain_objects() {
        let cfg = parse_config(
            "[potential]\ns0 = 0.7\ns1 = 0.1\n[collision]\nkind = \"gaussian-smooth\"\n\
             [grid]\nv_max = 5.0\nn_vx = 8\nn_vz = 4\n",
        )
        .unwrap();
        let grid = cfg.velocity_grid().unwrap();
        assert_eq!(grid.half_len(), 8 * 4);
        assert!(cfg.collision_kernel().unwrap().is_some());
        assert!(!cfg.collision_kernel().unwrap().unwrap().is_constant());
        let pot = cfg.periodic_potential().unwrap();
        assert_eq!(pot.s0(), 0.7);
        let f = cfg.inflow_field(&grid).unwrap();
        assert_eq!(f, grid.maxwellian_field());
    }

    #[test]
    fn inflow_kinds_materialize() {
        let cfg = parse_config(
            "[grid]\nn_vx = 4\nn_vz = 2\n[inflow]\nkind = \"linear-drift\"\neps = 0.2\n",
        )
        .unwrap();
        let grid = cfg.velocity_grid().unwrap();
        let f = cfg.inflow_field(&grid).unwrap();
        for h in 0..grid.half_len() {
            assert_eq!(f[h], grid.maxwellian(h) * (1.0 + 0.2 * grid.vx(h)));
        }
        let cfg = parse_config("[inflow]\nkind = \"file\"\n").unwrap_err();
        assert!(cfg.to_string().contains("inflow.path"));
    }

    #[test]
    fn bc_regimes_map_to_kinds() {
        for (name, want) in [
            ("specular", BcKind::Flat(Regime::Specular)),
            ("diffuse", BcKind::Flat(Regime::PerfectAccommodation)),
            ("maxwell-like", BcKind::Flat(Regime::MaxwellLike)),
            ("lksl-albedo", BcKind::Flat(Regime::NumericalAlbedo)),
            ("rough-specular", BcKind::RoughSpecular),
            ("rough-maxwell-like", BcKind::RoughMaxwellLike),
        ] {
            let cfg = parse_config(&format!("[bc]\nregime = \"{name}\"\n")).unwrap();
            assert_eq!(cfg.bc_kind().unwrap(), want);
        }
        assert!(parse_config("[bc]\nregime = \"mirror\"\n").is_err());
    }
}
