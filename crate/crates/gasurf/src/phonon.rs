//! The molecule–phonon collision operator inside the surface layer.
//!
//! While a molecule is inside the layer it exchanges energy with the wall's
//! phonon bath. At a fixed height `z` the collision operator acts on
//! distributions over the equivalent velocity `e = (v_x, e_z)` restricted
//! to the admissible set `ℰ(z) = {|e_z| ≥ √W(z)}`:
//!
//! ```text
//! Q[φ](e) = ∫_{ℰ(z)} K(e, e′)·(G(e)φ(e′) − G(e′)φ(e))·J(z, e′_z) de′,
//! ```
//!
//! with `G(e) = exp(−(v_x² + e_z²)/2)`, `J = |e′_z|σ(z, e′_z)`, and a
//! transition kernel `K` that is exchange-symmetric, bounded between
//! `ν₀ > 0` and `ν₁`, and even under the joint reflections
//! `(e_z, e′_z) ↦ (−e_z, −e′_z)` and `(v_x, v′_x) ↦ (−v_x, −v′_x)` — the
//! parities that make the relaxation times even and the accommodation
//! fraction mirror-symmetric.
//!
//! The loss part defines the relaxation time
//! `τ_ms(z, e) = (∫ K G J de′)^{−1}`, and its harmonic mean along a
//! trajectory's accessible interval, weighted by the inverse speed σ,
//! gives the mean relaxation time `τ̄_ms(e)` that competes with the
//! crossing time in the boundary condition.
//!
//! # Discrete representation
//!
//! The measure `J de′` on `ℰ(z)` is exactly the push-forward of `dv′_z`:
//! `∫ X(e′) J de′ = ∫ X(e′(v′)) dv′`. Grid quadrature therefore uses
//! *image cells*: each cell of a symmetric `v_z` axis maps to an `e_z`
//! cell whose measure is the exact cell width `Δv`, and the would-be
//! singular factor σ never appears. The structural identities (mass
//! conservation, symmetry, H-theorem, the BGK reduction for constant `K`)
//! then hold on the grid to round-off, independent of resolution — which
//! is what [`check_collision_structure`] verifies.
//!
//! Smooth (non-grid) evaluations of `1/τ_ms` use the same change of
//! variables analytically: for the constant kernel
//! `1/τ_ms = 2πν·e^{−W(z)/2}` in closed form, and for the gaussian-smooth
//! kernel the `v′_x` convolution is analytic while the `v′_z` factor is a
//! fixed-panel quadrature of a smooth integrand.
//!
//! One caveat is recorded rather than hidden: the harmonic-mean integral
//! runs over `[z_+, z_−]` — for trapped states the accessible interval,
//! not the full layer `[0, z_−]`, is the only domain on which σ is
//! defined, so the lower limit is the inner turning point.

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::kinematics;
use crate::numerics::{self, QuadratureSpec};
use crate::potential::FlatPotential;
use crate::report::ValidationReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// The equilibrium weight `G(e) = exp(−(v_x² + e_z²)/2)` in equivalent
/// velocity variables.
pub fn maxwellian_g(v_x: f64, e_z: f64) -> f64 {
    (-0.5 * (v_x * v_x + e_z * e_z)).exp()
}

/// Molecule–phonon transition kernel `K(e, e′)`.
///
/// Two shipped families:
/// * `Constant` — `K ≡ ν`; the collision operator reduces exactly to a
///   BGK relaxation and every derived quantity has a closed form, which
///   anchors the test suite;
/// * `GaussianSmooth` — `K = ν₀ + (ν₁ − ν₀)·exp(−|e − e′|²/width²)`,
///   a bounded smooth kernel that makes `τ_ms` genuinely velocity
///   dependent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CollisionKernel {
    /// `K ≡ ν`.
    Constant {
        /// The constant transition rate `ν > 0`.
        nu: f64,
    },
    /// `K = ν₀ + (ν₁ − ν₀)·exp(−|e − e′|²/width²)`.
    GaussianSmooth {
        /// Lower bound `ν₀ > 0` (the long-range rate).
        nu0: f64,
        /// Upper bound `ν₁ ≥ ν₀` (the coincidence-peak rate).
        nu1: f64,
        /// Gaussian width of the peak, `> 0`.
        width: f64,
    },
}

impl CollisionKernel {
    /// Validated constant kernel.
    pub fn constant(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!(
                "collision rate nu must be positive and finite (got {nu})"
            )));
        }
        Ok(Self::Constant { nu })
    }

    /// Validated gaussian-smooth kernel.
    pub fn gaussian_smooth(nu0: f64, nu1: f64, width: f64) -> Result<Self> {
        if !(nu0 > 0.0 && nu0.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel floor nu0 must be positive and finite (got {nu0})"
            )));
        }
        if !(nu1 >= nu0 && nu1.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel peak nu1 must satisfy nu1 >= nu0 (got nu0 = {nu0}, nu1 = {nu1})"
            )));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel width must be positive and finite (got {width})"
            )));
        }
        Ok(Self::GaussianSmooth { nu0, nu1, width })
    }

    /// Evaluates `K(e, e′)` with `e = (v_x, e_z)`.
    pub fn eval(&self, e: (f64, f64), ep: (f64, f64)) -> f64 {
        match *self {
            Self::Constant { nu } => nu,
            Self::GaussianSmooth { nu0, nu1, width } => {
                let dx = e.0 - ep.0;
                let dz = e.1 - ep.1;
                nu0 + (nu1 - nu0) * (-(dx * dx + dz * dz) / (width * width)).exp()
            }
        }
    }

    /// Lower kernel bound `ν₀` (the H-theorem constant).
    pub fn nu_min(&self) -> f64 {
        match *self {
            Self::Constant { nu } => nu,
            Self::GaussianSmooth { nu0, .. } => nu0,
        }
    }

    /// Upper kernel bound `ν₁`.
    pub fn nu_max(&self) -> f64 {
        match *self {
            Self::Constant { nu } => nu,
            Self::GaussianSmooth { nu1, .. } => nu1,
        }
    }

    /// Whether the kernel is velocity independent.
    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }
}

/// Loss rate `1/τ_ms(z, e) = ∫_{ℰ(z)} K(e, e′) G(e′) J de′`, evaluated
/// smoothly (not on a grid) through the `v′` change of variables.
///
/// Deterministic and total: the constant kernel is closed-form and the
/// gaussian-smooth kernel uses a fixed-panel Gauss–Kronrod rule on an
/// analytic integrand (verified against adaptive quadrature in the tests),
/// so this can be called inside other integrands.
pub fn loss_rate(kernel: &CollisionKernel, w: f64, v_x: f64, e_z: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    match *kernel {
        CollisionKernel::Constant { nu } => nu * tau * (-0.5 * w).exp(),
        CollisionKernel::GaussianSmooth { nu0, nu1, width } => {
            // ∫ K G J de′ = e^{−W/2}·∫∫ K(e, e′(v′)) e^{−|v′|²/2} dv′ with
            // e′_z(v′_z) = sign(v′_z)√(v′_z² + W). The v′_x convolution of
            // the gaussian bump is analytic; the v′_z factor is integrated
            // per sign branch (the integrand is smooth on each).
            let w2 = width * width;
            let ix = (tau * w2 / (w2 + 2.0)).sqrt() * (-v_x * v_x / (w2 + 2.0)).exp();
            // Joint-reflection parity, made exact by canonicalizing e_z.
            let ez = e_z.abs();
            let branch = |sgn: f64| {
                let g = |v: f64| {
                    let ep = sgn * (v * v + w).sqrt();
                    let d = ez - ep;
                    (-(d * d) / w2 - 0.5 * v * v).exp()
                };
                fixed_gk(&g, 0.0, ez.max(1.0) + 6.0 * width.max(1.0), 12)
            };
            let iz = branch(1.0) + branch(-1.0);
            (-0.5 * w).exp() * (nu0 * tau + (nu1 - nu0) * ix * iz)
        }
    }
}

/// Composite Gauss–Kronrod rule with `panels` equal panels; no adaptivity,
/// no failure path. Adequate only for analytic integrands, which is the
/// single way it is used here.
fn fixed_gk(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| numerics::gk15_estimate(f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// Relaxation time `τ_ms(z, e)` against the phonon bath, smooth in all
/// arguments; even in `e_z` and in `v_x` exactly.
///
/// # Errors
/// Propagates the potential's domain error for `z ≥ L`.
pub fn tau_ms(kernel: &CollisionKernel, p: &FlatPotential, z: f64, v_x: f64, e_z: f64) -> Result<f64> {
    let w = p.value(z)?;
    Ok(1.0 / loss_rate(kernel, w, v_x.abs(), e_z))
}

/// Mean relaxation time `τ̄_ms(e)`: the harmonic mean of `τ_ms(z, e)`
/// along the accessible interval, weighted by the inverse speed,
///
/// ```text
/// 1/τ̄_ms(e) = (∫_{z_+}^{z_−} σ(z, e_z)/τ_ms(z, e) dz) / τ_z(e_z).
/// ```
///
/// For trapped states the lower limit is the inner turning point `z_+`
/// (σ does not exist below it); for free states `z_+ = 0`.
///
/// # Errors
/// `Domain` for `e_z = 0`; `Quadrature` if either layer integral fails.
pub fn mean_tau_ms(
    kernel: &CollisionKernel,
    p: &FlatPotential,
    v_x: f64,
    e_z: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let vx = v_x.abs();
    let ez = e_z.abs();
    let tau_z = kinematics::crossing_time(p, ez, spec)?;
    let weighted = kinematics::layer_integral(
        p,
        ez,
        |z, sigma| {
            let w = p.value(z).expect("accessible interval lies below the blow-up");
            sigma * loss_rate(kernel, w, vx, ez)
        },
        spec,
    )?;
    Ok(tau_z / weighted)
}

/// Quadrature grid over the admissible set `ℰ(z)` at one height.
///
/// Nodes are images of a symmetric velocity grid; each `e_z` cell carries
/// the exact measure `∫_cell J de = Δv` of its preimage, so no singular
/// factor is ever sampled.
#[derive(Debug, Clone)]
pub struct AdmissibleGrid {
    z: f64,
    w: f64,
    vx: Axis,
    /// Signed equivalent-velocity nodes, images of the `v_z` centers.
    ez: Vec<f64>,
    /// Exact cell measures `∫ J de` (the preimage widths `Δv_z`).
    jw: Vec<f64>,
    /// `G(e)` per `e_z` node at `v_x = 0` (full `G` factorizes).
    g_ez: Vec<f64>,
}

impl AdmissibleGrid {
    /// Builds the image grid at height `z` from symmetric `v_x`/`v_z` axes.
    pub fn new(p: &FlatPotential, z: f64, vx: Axis, vz: &Axis) -> Result<Self> {
        let w = p.value(z)?;
        let ez: Vec<f64> = vz
            .centers()
            .iter()
            .map(|&v| {
                let mag = (v * v + w).sqrt();
                if v < 0.0 {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        let jw: Vec<f64> = (0..vz.len()).map(|k| vz.width(k)).collect();
        let g_ez: Vec<f64> = ez.iter().map(|&e| (-0.5 * e * e).exp()).collect();
        Ok(Self {
            z,
            w,
            vx,
            ez,
            jw,
            g_ez,
        })
    }

    /// Height of the slice.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Potential value `W(z)` of the slice.
    pub fn w(&self) -> f64 {
        self.w
    }

    /// Number of `(v_x, e_z)` nodes.
    pub fn len(&self) -> usize {
        self.vx.len() * self.ez.len()
    }

    /// True when the grid has no nodes (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of `e_z` nodes.
    pub fn n_ez(&self) -> usize {
        self.ez.len()
    }

    /// Number of `v_x` nodes.
    pub fn n_vx(&self) -> usize {
        self.vx.len()
    }

    /// Node coordinates `(v_x, e_z)` of flat index `i = ix·n_ez + ie`.
    pub fn node(&self, i: usize) -> (f64, f64) {
        (self.vx.center(i / self.ez.len()), self.ez[i % self.ez.len()])
    }

    /// Quadrature weight `Δv_x · ∫_cell J de` of flat index `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.vx.width(i / self.ez.len()) * self.jw[i % self.ez.len()]
    }

    /// `G(e)` at flat index `i`.
    pub fn g(&self, i: usize) -> f64 {
        let (ix, ie) = (i / self.ez.len(), i % self.ez.len());
        let vx = self.vx.center(ix);
        (-0.5 * vx * vx).exp() * self.g_ez[ie]
    }

    /// Discrete admissible-set integral `Σ f(i)·weight(i)`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len(), "field length must match grid");
        (0..self.len()).map(|i| f[i] * self.weight(i)).sum()
    }

    /// `Σ G·J de` on the grid (the discrete `γ(z)`).
    pub fn gamma(&self) -> f64 {
        (0..self.len()).map(|i| self.g(i) * self.weight(i)).sum()
    }

    /// Field of `G` values on the grid.
    pub fn g_field(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.g(i)).collect()
    }

    /// Widest `v_z` preimage cell (sets the O(Δ²) scale of grid-vs-smooth
    /// comparisons when the integrand jumps at `v_z = 0`).
    pub fn max_vz_width(&self) -> f64 {
        self.jw.iter().cloned().fold(0.0, f64::max)
    }
}

/// Applies the collision operator to a field on one admissible slice.
///
/// Dense grid quadrature of the gain/loss form; linear in `φ`; exact
/// equilibrium (`φ = c·G` returns identically zero because each summand
/// cancels termwise in floating point).
pub fn apply_q(kernel: &CollisionKernel, grid: &AdmissibleGrid, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != grid.len() {
        return Err(Error::Domain(format!(
            "field has {} values but the slice has {} nodes",
            phi.len(),
            grid.len()
        )));
    }
    let n = grid.len();
    let g: Vec<f64> = grid.g_field();
    let wt: Vec<f64> = (0..n).map(|i| grid.weight(i)).collect();
    let nodes: Vec<(f64, f64)> = (0..n).map(|i| grid.node(i)).collect();
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let k = kernel.eval(nodes[i], nodes[j]);
            acc += k * (g[i] * phi[j] - g[j] * phi[i]) * wt[j];
        }
        q[i] = acc;
    }
    Ok(q)
}

/// Verifies the structural properties of the collision operator on one
/// slice with `trials` random fields: mass conservation, equilibrium in
/// both directions, the H-theorem with its coercivity constant, the
/// symmetry of the Dirichlet form, linearity, and — for the constant
/// kernel — the exact BGK reduction and the analytic `γ(z)`.
///
/// Report-valued; the caller decides what a failure means.
pub fn check_collision_structure(
    kernel: &CollisionKernel,
    grid: &AdmissibleGrid,
    trials: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if trials == 0 {
        return Err(Error::Domain("structure check needs at least one trial".into()));
    }
    let mut rep = ValidationReport::new();
    let n = grid.len();
    let g = grid.g_field();
    let wt: Vec<f64> = (0..n).map(|i| grid.weight(i)).collect();
    let gamma = grid.gamma();
    let nu0 = kernel.nu_min();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_field = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|i| g[i] * (1.0 + 0.8 * rng.random_range(-1.0..1.0)))
            .collect()
    };

    // Equilibrium, forward direction: Q[G] vanishes termwise.
    let qg = apply_q(kernel, grid, &g)?;
    let eq_fwd = qg.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    rep.push_residual("equilibrium Q[G] = 0", eq_fwd, 1e-14);

    let mut worst_mass = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_h = f64::NEG_INFINITY;
    let mut worst_coercivity = f64::INFINITY;
    let mut worst_bgk = 0.0f64;
    let mut worst_lin = 0.0f64;

    for _ in 0..trials {
        let phi = random_field(&mut rng);
        let psi = random_field(&mut rng);
        let q_phi = apply_q(kernel, grid, &phi)?;
        let q_psi = apply_q(kernel, grid, &psi)?;
        let scale: f64 = q_phi.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);

        // Mass conservation: ∫ Q[φ] J de = 0.
        let mass = grid.integrate(&q_phi).abs() / (gamma * scale);
        worst_mass = worst_mass.max(mass);

        // Symmetry of the Dirichlet form: ⟨Qφ, ψ/G⟩ = ⟨Qψ, φ/G⟩.
        let pair = |qa: &[f64], b: &[f64]| -> f64 {
            (0..n).map(|i| qa[i] * b[i] * wt[i] / g[i]).sum()
        };
        let s_ab = pair(&q_phi, &psi);
        let s_ba = pair(&q_psi, &phi);
        worst_sym = worst_sym.max((s_ab - s_ba).abs() / (s_ab.abs().max(s_ba.abs()).max(1e-300)));

        // H-theorem: ⟨Qφ, φ/G⟩ ≤ −ν₀·γ·‖w‖² with w = φ − (n̂/γ)G.
        let n_hat = grid.integrate(&phi);
        let w_norm2: f64 = (0..n)
            .map(|i| {
                let wv = phi[i] - (n_hat / gamma) * g[i];
                wv * wv * wt[i] / g[i]
            })
            .sum();
        let lhs = pair(&q_phi, &phi);
        let rhs = -nu0 * gamma * w_norm2;
        let h_scale = lhs.abs().max(rhs.abs()).max(1e-300);
        worst_h = worst_h.max((lhs - rhs) / h_scale);
        // Coercivity (reverse equilibrium): dissipation/(ν₀γ‖w‖²) ≥ 1, so
        // Q[φ] = 0 forces w = 0, i.e. φ ∝ G.
        if w_norm2 > 0.0 {
            worst_coercivity = worst_coercivity.min(-lhs / (nu0 * gamma * w_norm2));
        }

        // Linearity with random coefficients.
        let (ca, cb) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<f64> = (0..n).map(|i| ca * phi[i] + cb * psi[i]).collect();
        let q_combo = apply_q(kernel, grid, &combo)?;
        for i in 0..n {
            let expect = ca * q_phi[i] + cb * q_psi[i];
            worst_lin = worst_lin.max((q_combo[i] - expect).abs() / scale.max(q_psi[i].abs()));
        }

        // Constant kernel: exact BGK form Q = ν(n̂G − γφ).
        if let CollisionKernel::Constant { nu } = *kernel {
            for i in 0..n {
                let expect = nu * (n_hat * g[i] - gamma * phi[i]);
                worst_bgk = worst_bgk.max((q_phi[i] - expect).abs() / scale);
            }
        }
    }

    rep.push_residual("mass conservation", worst_mass, 1e-10);
    rep.push_residual("Dirichlet-form symmetry", worst_sym, 1e-10);
    rep.push(
        "H-theorem",
        worst_h <= 1e-10,
        format!("max (lhs − rhs)/scale = {worst_h:.3e} (must be ≤ 0 up to round-off)"),
    );
    rep.push(
        "coercivity (kernel of Q is span{G})",
        worst_coercivity >= 1.0 - 1e-9,
        format!("min dissipation ratio {worst_coercivity:.12} (≥ 1 up to round-off)"),
    );
    rep.push_residual("linearity", worst_lin, 1e-10);
    if kernel.is_constant() {
        rep.push_residual("BGK reduction", worst_bgk, 1e-10);
        let analytic = std::f64::consts::TAU * (-0.5 * grid.w()).exp();
        rep.push_residual(
            "analytic gamma(z)",
            (gamma - analytic).abs() / analytic,
            1e-7,
        );
    }
    // Tie the grid loss rate to the smooth evaluation at a few nodes. For
    // W > 0 the grid integrand jumps across v′_z = 0 (the sign of e′_z),
    // which costs the midpoint rule O(Δ²); the check exists to catch O(1)
    // factor mistakes between the two representations, so the tolerance
    // tracks that regime instead of pretending to spectral accuracy.
    let mut worst_loss = 0.0f64;
    for &i in &[0, n / 3, n / 2, n - 1] {
        let (vx, ez) = grid.node(i);
        let grid_rate: f64 = (0..n)
            .map(|j| kernel.eval((vx, ez), grid.node(j)) * g[j] * wt[j])
            .sum();
        let smooth = loss_rate(kernel, grid.w(), vx.abs(), ez);
        worst_loss = worst_loss.max((grid_rate - smooth).abs() / smooth);
    }
    let cell = grid.max_vz_width();
    rep.push_residual("grid vs smooth loss rate", worst_loss, 1e-6 + 0.1 * cell * cell);

    Ok(rep)
}

/// A field over the surface layer: values on a `(z, v_x, e_z)` lattice
/// with an admissibility mask (`e_z² ≥ W(z)`); values on masked-out nodes
/// are ignored by every consumer.
#[derive(Debug, Clone)]
pub struct SurfaceField {
    n_z: usize,
    n_vx: usize,
    n_ez: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl SurfaceField {
    /// Zero-initialized field with the given admissibility mask.
    pub fn new(n_z: usize, n_vx: usize, n_ez: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n_z * n_vx * n_ez {
            return Err(Error::Domain(format!(
                "mask has {} entries for a {}×{}×{} field",
                mask.len(),
                n_z,
                n_vx,
                n_ez
            )));
        }
        Ok(Self {
            n_z,
            n_vx,
            n_ez,
            values: vec![0.0; n_z * n_vx * n_ez],
            mask,
        })
    }

    /// Lattice dimensions `(n_z, n_vx, n_ez)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_z, self.n_vx, self.n_ez)
    }

    /// Flat index of `(iz, ix, ie)`.
    pub fn idx(&self, iz: usize, ix: usize, ie: usize) -> usize {
        (iz * self.n_vx + ix) * self.n_ez + ie
    }

    /// Whether the node is admissible.
    pub fn admissible(&self, iz: usize, ix: usize, ie: usize) -> bool {
        self.mask[self.idx(iz, ix, ie)]
    }

    /// Value at a node.
    pub fn get(&self, iz: usize, ix: usize, ie: usize) -> f64 {
        self.values[self.idx(iz, ix, ie)]
    }

    /// Sets a value at a node.
    pub fn set(&mut self, iz: usize, ix: usize, ie: usize, v: f64) {
        let i = self.idx(iz, ix, ie);
        self.values[i] = v;
    }

    /// Raw values (row-major over `(z, v_x, e_z)`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest admissible |value| difference to another field.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let mut m = 0.0f64;
        for i in 0..self.values.len() {
            if self.mask[i] {
                m = m.max((self.values[i] - other.values[i]).abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn canon() -> FlatPotential {
        FlatPotential::canonical()
    }

    fn slice_grid(z: f64) -> AdmissibleGrid {
        let vx = Axis::symmetric(6.0, 14).unwrap();
        let vz = Axis::symmetric(6.0, 28).unwrap();
        AdmissibleGrid::new(&canon(), z, vx, &vz).unwrap()
    }

    #[test]
    fn maxwellian_g_values() {
        assert_eq!(maxwellian_g(0.0, 0.0), 1.0);
        assert_abs_diff_eq!(maxwellian_g(1.0, 1.0), (-1.0f64).exp(), epsilon = 1e-16);
        assert_eq!(maxwellian_g(0.7, -1.3), maxwellian_g(0.7, 1.3));
        assert_eq!(maxwellian_g(-0.7, 1.3), maxwellian_g(0.7, 1.3));
    }

    #[test]
    fn kernel_bounds_symmetry_parity() {
        let k = CollisionKernel::gaussian_smooth(0.2, 1.5, 0.8).unwrap();
        let pts = [(0.0, 1.2), (0.5, -2.0), (-1.7, 3.1), (2.2, 0.4)];
        for &a in &pts {
            for &b in &pts {
                let v = k.eval(a, b);
                assert!(v > 0.2 - 1e-15 && v <= 1.5);
                // Exchange symmetry and the joint reflections are exact in
                // floating point, not just to tolerance.
                assert_eq!(v, k.eval(b, a));
                assert_eq!(v, k.eval((a.0, -a.1), (b.0, -b.1)));
                assert_eq!(v, k.eval((-a.0, a.1), (-b.0, b.1)));
            }
        }
    }

    #[test]
    fn kernel_constructors_reject_bad_parameters() {
        assert!(CollisionKernel::constant(0.0).is_err());
        assert!(CollisionKernel::gaussian_smooth(0.0, 1.0, 0.5).is_err());
        assert!(CollisionKernel::gaussian_smooth(1.0, 0.5, 0.5).is_err());
        assert!(CollisionKernel::gaussian_smooth(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn tau_ms_constant_kernel_closed_forms() {
        let p = canon();
        let k = CollisionKernel::constant(1.0).unwrap();
        // At the well bottom W = 0: τ_ms = 1/(2π).
        let t0 = tau_ms(&k, &p, 0.5, 0.3, 1.7).unwrap();
        assert_abs_diff_eq!(t0, 1.0 / std::f64::consts::TAU, epsilon = 1e-15);
        // At the entrance W = 1: τ_ms = e^{1/2}/(2π).
        let t1 = tau_ms(&k, &p, 0.0, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(
            t1,
            (0.5f64).exp() / std::f64::consts::TAU,
            epsilon = 1e-15
        );
        // Rate scaling.
        let k3 = CollisionKernel::constant(3.0).unwrap();
        assert_abs_diff_eq!(
            tau_ms(&k3, &p, 0.0, 0.0, 2.0).unwrap(),
            t1 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn tau_ms_parity_is_exact() {
        let p = canon();
        let k = CollisionKernel::gaussian_smooth(0.3, 1.2, 0.7).unwrap();
        for &(vx, ez) in &[(0.4, 1.3), (1.1, 2.5), (0.0, 1.01)] {
            let t = tau_ms(&k, &p, 0.2, vx, ez).unwrap();
            assert_eq!(t, tau_ms(&k, &p, 0.2, vx, -ez).unwrap());
            assert_eq!(t, tau_ms(&k, &p, 0.2, -vx, ez).unwrap());
            assert!(t > 0.0);
        }
    }

    #[test]
    fn gaussian_loss_rate_matches_adaptive_quadrature() {
        // The fixed-panel rule inside loss_rate must agree with fully
        // adaptive quadrature of the same integrand.
        let k = CollisionKernel::gaussian_smooth(0.25, 1.4, 0.6).unwrap();
        let spec = QuadratureSpec::default();
        for &(w, vx, ez) in &[(0.0f64, 0.0f64, 1.0f64), (1.0, 0.8, 2.2), (0.3, 1.5, 0.9)] {
            let (nu0, nu1, width) = match k {
                CollisionKernel::GaussianSmooth { nu0, nu1, width } => (nu0, nu1, width),
                _ => unreachable!(),
            };
            let w2 = width * width;
            let tau = std::f64::consts::TAU;
            let ix = (tau * w2 / (w2 + 2.0)).sqrt() * (-vx * vx / (w2 + 2.0)).exp();
            let branch = |sgn: f64| {
                numerics::integrate(
                    |v: f64| {
                        let ep = sgn * (v * v + w).sqrt();
                        let d = ez - sgn * 0.0 - ep; // ez canonical already
                        (-(d * d) / w2 - 0.5 * v * v).exp()
                    },
                    0.0,
                    ez.max(1.0) + 6.0 * width.max(1.0),
                    &spec,
                )
                .unwrap()
            };
            let reference = (-0.5f64 * w).exp() * (nu0 * tau + (nu1 - nu0) * ix * (branch(1.0) + branch(-1.0)));
            let fast = loss_rate(&k, w, vx, ez);
            assert_abs_diff_eq!(fast, reference, epsilon = 1e-10 * reference);
        }
    }

    #[test]
    fn mean_tau_ms_frozen_values_constant_kernel() {
        // Frozen by two independent high-resolution quadratures of the
        // layer integral (canonical potential, K ≡ 1).
        let p = canon();
        let k = CollisionKernel::constant(1.0).unwrap();
        let spec = QuadratureSpec::default();
        let cases = [
            (0.5, 0.169_756_411_142_711_231_26),
            (1.5, 0.208_846_794_656_773_122_16),
            (2.0, 0.220_104_016_995_031_274_08),
        ];
        for &(ez, expected) in &cases {
            let t = mean_tau_ms(&k, &p, 0.0, ez, &spec).unwrap();
            assert_abs_diff_eq!(t, expected, epsilon = 1e-10);
            assert_eq!(t, mean_tau_ms(&k, &p, 0.0, -ez, &spec).unwrap());
        }
    }

    #[test]
    fn mean_tau_ms_is_a_harmonic_mean() {
        // τ̄ must lie between the extremes of τ_ms over the interval, and
        // degenerate trapped intervals collapse to the well-bottom value.
        let p = canon();
        let k = CollisionKernel::constant(1.0).unwrap();
        let spec = QuadratureSpec::default();
        let lo = 1.0 / std::f64::consts::TAU; // τ_ms at W = 0
        let hi = (0.5f64).exp() / std::f64::consts::TAU; // τ_ms at W = 1
        for &ez in &[0.3, 0.9, 1.2, 2.0, 4.0] {
            let t = mean_tau_ms(&k, &p, 0.0, ez, &spec).unwrap();
            assert!(t > lo && t < hi, "τ̄({ez}) = {t} outside [{lo}, {hi}]");
        }
        let t_deep = mean_tau_ms(&k, &p, 0.0, 0.05, &spec).unwrap();
        assert_abs_diff_eq!(t_deep, lo, epsilon = 2e-4);
    }

    #[test]
    fn apply_q_equilibrium_is_exactly_zero() {
        let grid = slice_grid(0.2);
        for kernel in [
            CollisionKernel::constant(0.8).unwrap(),
            CollisionKernel::gaussian_smooth(0.2, 1.1, 0.9).unwrap(),
        ] {
            // φ = G bit-for-bit: every summand g_i·g_j − g_j·g_i cancels
            // termwise, so the result is the exact zero field.
            let q = apply_q(&kernel, &grid, &grid.g_field()).unwrap();
            assert!(q.iter().all(|&x| x == 0.0), "termwise cancellation");
            // A scaled copy is no longer bit-identical (c·g_j rounds), so
            // only round-off-level cancellation is available.
            let scaled: Vec<f64> = (0..grid.len()).map(|i| 2.5 * grid.g(i)).collect();
            let q = apply_q(&kernel, &grid, &scaled).unwrap();
            let worst = q.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            assert!(worst <= 1e-12, "round-off cancellation, got {worst:.3e}");
        }
    }

    #[test]
    fn structure_report_constant_kernel() {
        let grid = slice_grid(0.0);
        let k = CollisionKernel::constant(1.0).unwrap();
        let rep = check_collision_structure(&k, &grid, 8, 42).unwrap();
        assert!(rep.passed, "{rep}");
        assert!(rep.check("BGK reduction").is_some());
    }

    #[test]
    fn structure_report_gaussian_kernel() {
        let grid = slice_grid(0.35);
        let k = CollisionKernel::gaussian_smooth(0.3, 1.5, 0.8).unwrap();
        let rep = check_collision_structure(&k, &grid, 8, 7).unwrap();
        assert!(rep.passed, "{rep}");
        assert!(rep.check("BGK reduction").is_none());
    }

    #[test]
    fn surface_field_round_trip() {
        let mask = vec![true; 2 * 3 * 4];
        let mut f = SurfaceField::new(2, 3, 4, mask).unwrap();
        f.set(1, 2, 3, 7.5);
        assert_eq!(f.get(1, 2, 3), 7.5);
        assert_eq!(f.get(0, 0, 0), 0.0);
        assert_eq!(f.dims(), (2, 3, 4));
        assert!(SurfaceField::new(2, 3, 4, vec![true; 5]).is_err());
    }
}
