//! One-dimensional conservative motion in the surface layer.
//!
//! Inside the layer the normal motion decouples: `v_z² + W(z)` is conserved,
//! so every trajectory is labelled by its *equivalent velocity*
//!
//! ```text
//! e_z = sign(v_z) · √(v_z² + W(z)),
//! ```
//!
//! the normal velocity the molecule has (or would have) where the potential
//! vanishes. The map `v_z ↔ e_z` at fixed `z` is a monotone bijection
//! between `|v_z| > 0` and `|e_z| > √W(z)` on each sign branch, with
//!
//! ```text
//! dv_z = |e_z| · σ(z, e_z) · de_z,      σ = (e_z² − W(z))^{−1/2},
//! ```
//!
//! where `σ` is the inverse speed. Molecules with `|e_z| < √W_m` cannot
//! reach the gas region `z ≤ 0`: they are **trapped**, oscillating between
//! the turning points `z_±` solving `W(z) = e_z²`. Free molecules
//! (`|e_z| ≥ √W_m`) enter at `z = 0`, reflect at `z_−`, and leave again.
//!
//! The *crossing time* `τ_z(e_z) = ∫ σ dz` over one traversal of the
//! accessible interval is the basic time scale that competes with the
//! phonon relaxation time to set the accommodation fraction. The integrand
//! has inverse-square-root singularities at turning points, which the
//! substitution rules in [`crate::numerics`] absorb exactly.
//!
//! For the canonical rational-square potential the turning points solve a
//! linear equation; writing `ρ = |e_z| / √W_m`:
//!
//! ```text
//! z_+ = z_m·L·(1 − ρ) / (L − ρ·z_m)   (trapped; 0 when free),
//! z_− = z_m·L·(1 + ρ) / (L + ρ·z_m).
//! ```

use crate::error::{Error, Result};
use crate::numerics::{self, QuadratureSpec};
use crate::potential::FlatPotential;

/// Accessible interval `[z_plus, z_minus]` of the normal motion at a given
/// equivalent velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPair {
    /// Inner turning point; `0` for free molecules (they exit the layer).
    pub z_plus: f64,
    /// Outer turning point, where the molecule reflects off the wall core.
    pub z_minus: f64,
    /// Whether the molecule is trapped (`|e_z| < √W_m`).
    pub trapped: bool,
}

/// Equivalent velocity `e_z = sign(v_z)·√(v_z² + W(z))`, with
/// `sign(0) = +1` so the map is total.
///
/// # Errors
/// Propagates the potential's domain error for `z ≥ L`.
pub fn equivalent_velocity(p: &FlatPotential, z: f64, v_z: f64) -> Result<f64> {
    let w = p.value(z)?;
    let mag = (v_z * v_z + w).sqrt();
    Ok(if v_z < 0.0 { -mag } else { mag })
}

/// Physical velocity `v_z = sign(e_z)·√(e_z² − W(z))` at height `z`.
///
/// # Errors
/// `Domain` when the state is inaccessible (`e_z² < W(z)`), or for `z ≥ L`.
pub fn physical_velocity(p: &FlatPotential, z: f64, e_z: f64) -> Result<f64> {
    let w = p.value(z)?;
    let ke = e_z * e_z - w;
    if ke < 0.0 {
        return Err(Error::Domain(format!(
            "state (z = {z}, e_z = {e_z}) is classically inaccessible: e_z^2 < W(z) = {w}"
        )));
    }
    let mag = ke.sqrt();
    Ok(if e_z < 0.0 { -mag } else { mag })
}

/// Whether a molecule with this equivalent velocity is trapped in the layer.
pub fn is_trapped(p: &FlatPotential, e_z: f64) -> bool {
    e_z.abs() < p.escape_speed()
}

/// Turning points of the canonical potential, in closed form.
///
/// Solving `W(z) = e_z²` for the rational-square profile reduces to a
/// linear equation per branch; see the module docs. For free molecules the
/// inner turning point is reported as `0` (the layer entrance).
pub fn turning_points(p: &FlatPotential, e_z: f64) -> Result<TurningPair> {
    if !e_z.is_finite() {
        return Err(Error::Domain(format!(
            "equivalent velocity must be finite (got {e_z})"
        )));
    }
    let rho = e_z.abs() / p.escape_speed();
    let (l, z_m) = (p.l(), p.z_m());
    let z_minus = z_m * l * (1.0 + rho) / (l + rho * z_m);
    let trapped = rho < 1.0;
    let z_plus = if trapped {
        z_m * l * (1.0 - rho) / (l - rho * z_m)
    } else {
        0.0
    };
    Ok(TurningPair {
        z_plus,
        z_minus,
        trapped,
    })
}

/// Inverse speed `σ(z, e_z) = (e_z² − W(z))^{−1/2}`.
///
/// # Errors
/// `Domain` at and beyond turning points (`e_z² ≤ W(z)`), or for `z ≥ L`.
pub fn inverse_speed(p: &FlatPotential, z: f64, e_z: f64) -> Result<f64> {
    let w = p.value(z)?;
    let ke = e_z * e_z - w;
    if ke <= 0.0 {
        return Err(Error::Domain(format!(
            "inverse speed diverges at (z = {z}, e_z = {e_z}): e_z^2 - W = {ke}"
        )));
    }
    Ok(1.0 / ke.sqrt())
}

/// Turning-point offsets `δ_± = z_± − z_m` in cancellation-free closed
/// form: `δ_∓ = ±z_m·ρ·(L − z_m)/(L ± ρ·z_m)` with `ρ = |e_z|/√W_m`,
/// clipped to the layer entrance (`δ_+ = −z_m`) for free molecules.
fn turning_offsets(p: &FlatPotential, e_z: f64) -> (f64, f64) {
    let rho = e_z.abs() / p.escape_speed();
    let (l, z_m) = (p.l(), p.z_m());
    let d_minus = z_m * rho * (l - z_m) / (l + rho * z_m);
    let d_plus = if rho < 1.0 {
        -z_m * rho * (l - z_m) / (l - rho * z_m)
    } else {
        -z_m
    };
    (d_plus, d_minus)
}

/// Integrates `g(z, σ(z, e_z))` over the accessible interval
/// `[z_+, z_−]`, treating the inverse-square-root turning-point
/// singularities of `σ` exactly.
///
/// Internally the integration runs in the offset `δ = z − z_m` (see
/// [`FlatPotential::value_from_bottom`]): in the plain `z` variable the
/// evaluation points near a turning point are quantized at `ulp(z_m)`,
/// which for nearly trapped-degenerate `e_z` dominates `e_z² − W(z)` and
/// silently corrupts the integral while looking smooth to the error
/// estimator.
///
/// # Errors
/// `Domain` for `e_z = 0` (degenerate interval); `Quadrature` on tolerance
/// failure.
pub fn layer_integral<G>(
    p: &FlatPotential,
    e_z: f64,
    g: G,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    G: Fn(f64, f64) -> f64,
{
    if e_z == 0.0 {
        return Err(Error::Domain(
            "layer integral at e_z = 0 is a degenerate limit; evaluate at small |e_z| instead"
                .into(),
        ));
    }
    if !e_z.is_finite() {
        return Err(Error::Domain(format!(
            "equivalent velocity must be finite (got {e_z})"
        )));
    }
    let (d_plus, d_minus) = turning_offsets(p, e_z);
    let z_m = p.z_m();
    let e2 = e_z * e_z;
    let f = |d: f64| {
        let w = p
            .value_from_bottom(d)
            .expect("accessible interval lies below the blow-up");
        let ke = e2 - w;
        // Rounding can still push a node an ulp past the turning point,
        // where the exact integrand is +∞; the substitution has already
        // tamed the singularity, so clamp rather than fail.
        if ke <= 0.0 {
            0.0
        } else {
            g(z_m + d, 1.0 / ke.sqrt())
        }
    };
    numerics::integrate_singular(&f, d_plus, d_minus, (true, true), spec)
}

/// Crossing time `τ_z(e_z) = ∫_{z_+}^{z_−} σ(z, e_z) dz` over the
/// accessible interval (one traversal).
///
/// Both endpoints are treated as inverse-square-root singularities; that is
/// exact at true turning points and harmless at the smooth entrance `z = 0`
/// of a free trajectory.
///
/// # Errors
/// `Domain` for `e_z = 0` (the accessible interval degenerates to the well
/// bottom; the limit value `τ_z(0⁺)` is finite but the integral form is
/// not usable there), `Quadrature` if the tolerance cannot be met.
pub fn crossing_time(p: &FlatPotential, e_z: f64, spec: &QuadratureSpec) -> Result<f64> {
    layer_integral(p, e_z, |_, sigma| sigma, spec)
}

/// Integrates `f(v_z)` over `v_z ∈ [v_lo, v_hi]` at fixed height `z`, but
/// through the equivalent-velocity representation:
///
/// ```text
/// ∫ f(v_z) dv_z = ∫ f(v_z(z, e_z)) · |e_z| · σ(z, e_z) de_z
/// ```
///
/// over the image interval on each sign branch. Exercises the change of
/// variables end to end — the Jacobian `|e_z|σ` has an integrable
/// singularity at `v_z = 0` that the direct `v_z` integral does not have,
/// so agreement between the two is a sharp consistency check.
///
/// # Errors
/// `Domain` for an empty interval or `z ≥ L`; `Quadrature` on tolerance
/// failure.
pub fn change_of_variables_integral<F>(
    p: &FlatPotential,
    z: f64,
    v_lo: f64,
    v_hi: f64,
    f: F,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(v_lo < v_hi) {
        return Err(Error::Domain(format!(
            "empty velocity interval [{v_lo}, {v_hi}]"
        )));
    }
    let w = p.value(z)?;
    let e_floor = w.sqrt();
    // One monotone branch: v in [a, b] with 0 <= a < b maps to
    // e in [√(a²+W), √(b²+W)]; the inner endpoint is singular when a = 0.
    let branch = |a: f64, b: f64, sgn: f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let e_a = (a * a + w).sqrt();
        let e_b = (b * b + w).sqrt();
        let g = |e: f64| {
            let ke = e * e - w;
            if ke <= 0.0 {
                return 0.0;
            }
            let v = ke.sqrt();
            f(sgn * v) * e / v
        };
        numerics::integrate_singular(&g, e_a, e_b, (a == 0.0, false), spec)
    };
    let _ = e_floor;
    Ok(branch(0.0, v_hi.max(0.0), 1.0)? + branch(0.0, (-v_lo).max(0.0), -1.0)?)
}
