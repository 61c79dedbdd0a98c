//! Boundary conditions at a flat wall.
//!
//! A molecule that enters the surface layer crosses it, turns around at
//! the repulsive core, and comes back out. Two time scales compete: the
//! crossing time `τ̂_z` of the layer and the mean relaxation time `τ̂_ms`
//! against the phonon bath, both evaluated at the entrance equivalent
//! velocity `ê_z = √(v_z² + W_m)`. Their ratio decides how much memory of
//! the incoming velocity survives:
//!
//! ```text
//! a(v) = 1 − exp(−2·τ̂_z/τ̂_ms) ∈ (0, 1),
//! f_out(v_x, −v_z) = a(v)·β₁·M(v) + (1 − a(v))·f_in(v_x, v_z),
//! ```
//!
//! with `β₁` the accommodation-weighted incoming flux level that makes the
//! net mass flux through the wall vanish identically. The classical
//! specular, diffuse, and constant-coefficient Maxwell conditions are the
//! degenerate cases of this family.
//!
//! All half-grid functions use the half-index convention of
//! [`crate::grid::VelocityGrid`]: the same index addresses `(v_x, |v_z|)`
//! on the incoming (`v_z > 0`) and outgoing (`v_z < 0`) sides, so the
//! specular map is the identity.

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;
use crate::kernel::DiscreteKernel;
use crate::kinematics;
use crate::layer::{self, LayerConfig};
use crate::numerics::QuadratureSpec;
use crate::phonon::{self, CollisionKernel};
use crate::potential::FlatPotential;
use rayon::prelude::*;
use serde::Serialize;

/// Which limit model applies at the wall.
///
/// The choice is a modeling decision set by the ordering of three time
/// scales — the layer crossing time, the in-layer relaxation time, and
/// the macroscopic observation time. When relaxation is negligible over
/// a crossing the wall looks specular; when many relaxation times fit in
/// a crossing the molecule thermalizes completely and leaves diffusely;
/// in between, the partial-memory Maxwell-like condition applies, and
/// `NumericalAlbedo` replaces its closed form with the full linear
/// kinetic surface-layer (LKSL) solve. The scale-separation parameters
/// themselves never appear at runtime: selecting a `Regime` *is* the
/// scaling assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Mirror reflection; no collision model needed.
    Specular,
    /// Complete thermalization: outgoing flux is Maxwellian at the wall
    /// temperature, scaled to balance the incoming flux.
    PerfectAccommodation,
    /// Velocity-dependent partial accommodation `a(v)`; requires a
    /// collision model and a wall potential.
    MaxwellLike,
    /// Exact discrete albedo of the surface layer; requires a collision
    /// model and a wall potential.
    NumericalAlbedo,
}

/// `a = 1 − exp(−2τ_z/τ_ms)` from the two time scales.
pub fn accommodation_from_times(tau_z: f64, tau_ms: f64) -> f64 {
    -(-2.0 * tau_z / tau_ms).exp_m1()
}

/// The rational approximation `â = 1/(1 + τ_ms/(2τ_z))`, which matches
/// `a` to second order in the time-scale ratio while staying below 1.
pub fn pade_from_times(tau_z: f64, tau_ms: f64) -> f64 {
    1.0 / (1.0 + tau_ms / (2.0 * tau_z))
}

/// Both entrance time scales `(τ̂_z, τ̂_ms)` of an incoming velocity:
/// the crossing time and the mean relaxation time at the equivalent
/// velocity `ê_z = √(v_z² + W_m)`.
pub fn entrance_times(
    model: &CollisionKernel,
    p: &FlatPotential,
    v: (f64, f64),
) -> Result<(f64, f64)> {
    let (v_x, v_z) = v;
    if v_z == 0.0 || !v_z.is_finite() {
        return Err(Error::Domain(format!(
            "accommodation needs a nonzero normal velocity (got v_z = {v_z})"
        )));
    }
    let e_hat = (v_z * v_z + p.w_m()).sqrt();
    let spec = QuadratureSpec::default();
    let tau_z = kinematics::crossing_time(p, e_hat, &spec)?;
    let tau_ms = phonon::mean_tau_ms(model, p, v_x, e_hat, &spec)?;
    Ok((tau_z, tau_ms))
}

/// Accommodation fraction `a(v) = 1 − exp(−2τ̂_z/τ̂_ms)`: the probability
/// weight of the thermalized part of the outgoing distribution.
///
/// Even in both velocity components; strictly inside `(0, 1)`.
pub fn accommodation_fraction(
    model: &CollisionKernel,
    p: &FlatPotential,
    v: (f64, f64),
) -> Result<f64> {
    let (tau_z, tau_ms) = entrance_times(model, p, v)?;
    Ok(accommodation_from_times(tau_z, tau_ms))
}

/// Rational (Padé) variant of the accommodation fraction.
pub fn pade_accommodation(
    model: &CollisionKernel,
    p: &FlatPotential,
    v: (f64, f64),
) -> Result<f64> {
    let (tau_z, tau_ms) = entrance_times(model, p, v)?;
    Ok(pade_from_times(tau_z, tau_ms))
}

/// Tabulates the accommodation fraction (or its Padé variant) on the half
/// grid, in parallel, computing each `|v_x|` only once and mirroring — so
/// the table is even in `v_x` bit-for-bit.
pub fn accommodation_table(
    model: &CollisionKernel,
    p: &FlatPotential,
    grid: &VelocityGrid,
    pade: bool,
) -> Result<Vec<f64>> {
    let nx = grid.x_axis().len();
    let nk = grid.half_len() / nx;
    let left: Vec<f64> = (0..nx / 2 * nk)
        .into_par_iter()
        .map(|idx| {
            let h = grid.fuse(idx / nk, idx % nk);
            let v = (grid.vx(h), grid.vz_mag(h));
            if pade {
                pade_accommodation(model, p, v)
            } else {
                accommodation_fraction(model, p, v)
            }
        })
        .collect::<Result<_>>()?;
    let mut a = vec![0.0; grid.half_len()];
    for ix in 0..nx / 2 {
        for k in 0..nk {
            let h = grid.fuse(ix, k);
            a[h] = left[ix * nk + k];
            a[grid.x_flip(h)] = left[ix * nk + k];
        }
    }
    Ok(a)
}

/// Flux level `κ = ∫_{v_z>0} v_z f_in dv / ∫_{v_z>0} v_z M dv` of an
/// incoming distribution, relative to the wall Maxwellian.
pub fn diffuse_kappa(f_in: &[f64], grid: &VelocityGrid) -> Result<f64> {
    check_half(f_in, grid)?;
    Ok(grid.flux(f_in) / grid.flux(&grid.maxwellian_field()))
}

/// Accommodation-weighted flux level
/// `β₁ = ∫ v_z a f_in dv / ∫ v_z a M dv` over the incoming half-space.
///
/// # Errors
/// `Degenerate` when the weight `a` annihilates the Maxwellian flux.
pub fn beta1(f_in: &[f64], a: &[f64], grid: &VelocityGrid) -> Result<f64> {
    check_half(f_in, grid)?;
    check_half(a, grid)?;
    let num: f64 = (0..grid.half_len())
        .map(|h| grid.flux_weight(h) * a[h] * f_in[h])
        .sum();
    let den: f64 = (0..grid.half_len())
        .map(|h| grid.flux_weight(h) * a[h] * grid.maxwellian(h))
        .sum();
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Degenerate(format!(
            "accommodation-weighted Maxwellian flux is {den}; beta1 undefined"
        )));
    }
    Ok(num / den)
}

/// Maxwell-like reflection with an explicit accommodation table:
/// `f_out = a·β₁·M + (1 − a)·mirror(f_in)`.
pub fn apply_maxwell_like(f_in: &[f64], grid: &VelocityGrid, a: &[f64]) -> Result<Vec<f64>> {
    let b1 = beta1(f_in, a, grid)?;
    Ok((0..grid.half_len())
        .map(|h| a[h] * (b1 * grid.maxwellian(h)) + (1.0 - a[h]) * f_in[h])
        .collect())
}

/// Applies the selected boundary condition to an incoming half-grid
/// distribution, returning the outgoing one (same half-index layout).
///
/// `model` and `p` are required for `MaxwellLike` and `NumericalAlbedo`
/// and ignored otherwise.
pub fn apply_boundary(
    regime: Regime,
    f_in: &[f64],
    grid: &VelocityGrid,
    model: Option<&CollisionKernel>,
    p: Option<&FlatPotential>,
) -> Result<Vec<f64>> {
    check_half(f_in, grid)?;
    match regime {
        Regime::Specular => Ok(f_in.to_vec()),
        Regime::PerfectAccommodation => {
            let kappa = diffuse_kappa(f_in, grid)?;
            Ok((0..grid.half_len())
                .map(|h| kappa * grid.maxwellian(h))
                .collect())
        }
        Regime::MaxwellLike => {
            let (model, p) = need_model(regime, model, p)?;
            let a = accommodation_table(model, p, grid, false)?;
            apply_maxwell_like(f_in, grid, &a)
        }
        Regime::NumericalAlbedo => {
            let (model, p) = need_model(regime, model, p)?;
            let sol = layer::solve_lksl(f_in, model, p, grid, &LayerConfig::default())?;
            Ok(sol.f_out)
        }
    }
}

fn need_model<'a>(
    regime: Regime,
    model: Option<&'a CollisionKernel>,
    p: Option<&'a FlatPotential>,
) -> Result<(&'a CollisionKernel, &'a FlatPotential)> {
    match (model, p) {
        (Some(m), Some(p)) => Ok((m, p)),
        _ => Err(Error::Domain(format!(
            "{regime:?} needs both a collision model and a wall potential"
        ))),
    }
}

/// Assembles the Maxwell-like kernel for an explicit accommodation table:
/// δ-part `(1 − a(v′))` at the mirror cell, dense part
/// `a(v)a(v′)·|v_z|M(v)/D` with `D = Σ_w a(w)M(w)|w_z|Δw` taken as the
/// grid sum, so column normalization holds to round-off by construction.
pub fn assemble_maxwell_like(grid: &VelocityGrid, a: &[f64]) -> Result<DiscreteKernel> {
    check_half(a, grid)?;
    let n = grid.half_len();
    let d: f64 = (0..n)
        .map(|h| a[h] * grid.maxwellian(h) * grid.flux_weight(h))
        .sum();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Degenerate(format!(
            "accommodation-weighted Maxwellian flux is {d}; kernel undefined"
        )));
    }
    let spec_coeff: Vec<f64> = (0..n).map(|h| 1.0 - a[h]).collect();
    let row: Vec<f64> = (0..n)
        .map(|i| a[i] * grid.maxwellian(i) * grid.vz_mag(i) / d)
        .collect();
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dense[i * n + j] = row[i] * a[j];
        }
    }
    DiscreteKernel::new(grid.clone(), spec_coeff, dense)
}

/// Assembles the discrete scattering kernel `R(v′ → v)` of a regime.
///
/// `NumericalAlbedo` assembles column by column from impulse responses of
/// the layer solver (parallel over columns); the other regimes have closed
/// forms.
pub fn scattering_kernel_r(
    regime: Regime,
    grid: &VelocityGrid,
    model: Option<&CollisionKernel>,
    p: Option<&FlatPotential>,
) -> Result<DiscreteKernel> {
    let n = grid.half_len();
    match regime {
        Regime::Specular => Ok(DiscreteKernel::specular(grid.clone())),
        Regime::PerfectAccommodation => {
            let phi_m = grid.flux(&grid.maxwellian_field());
            let row: Vec<f64> = (0..n)
                .map(|i| grid.maxwellian(i) * grid.vz_mag(i) / phi_m)
                .collect();
            let mut dense = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    dense[i * n + j] = row[i];
                }
            }
            DiscreteKernel::from_dense(grid.clone(), dense)
        }
        Regime::MaxwellLike => {
            let (model, p) = need_model(regime, model, p)?;
            let a = accommodation_table(model, p, grid, false)?;
            assemble_maxwell_like(grid, &a)
        }
        Regime::NumericalAlbedo => {
            let (model, p) = need_model(regime, model, p)?;
            let cfg = LayerConfig::default();
            let columns: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut impulse = vec![0.0; n];
                    impulse[j] = 1.0;
                    layer::solve_lksl(&impulse, model, p, grid, &cfg).map(|s| s.f_out)
                })
                .collect::<Result<_>>()?;
            let mut dense = vec![0.0; n * n];
            for (j, col) in columns.iter().enumerate() {
                let col_flux = grid.vz_mag(j) * grid.area(j);
                for i in 0..n {
                    dense[i * n + j] = col[i] * grid.vz_mag(i) / col_flux;
                }
            }
            DiscreteKernel::from_dense(grid.clone(), dense)
        }
    }
}

/// Flux-moment weight for accommodation coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Moment {
    /// Tangential momentum, weight `v_x`.
    Tangential,
    /// Normal momentum magnitude, weight `|v_z|`.
    Normal,
    /// Kinetic energy, weight `|v|²/2`.
    Energy,
}

impl Moment {
    fn weight(&self, v_x: f64, v_z_mag: f64) -> f64 {
        match self {
            Moment::Tangential => v_x,
            Moment::Normal => v_z_mag,
            Moment::Energy => 0.5 * (v_x * v_x + v_z_mag * v_z_mag),
        }
    }
}

/// Moment accommodation coefficient
/// `α(φ) = (Φ⁺ − Φ⁻)/(Φ⁺ − J₀·Φ_M)` where `Φ±` are the incoming/outgoing
/// flux moments of the weight, `Φ_M` the Maxwellian one, and
/// `J₀ = β₁(f_in)` the zero-flux thermal level — which depends on the
/// accommodation table `a`, so it is an explicit argument.
///
/// For a constant table `a ≡ α₀` and a Maxwell-like `f_out`, all three
/// moments give exactly `α₀`; velocity dependence of `a` splits them.
///
/// # Errors
/// `Degenerate` when `Φ⁺ − J₀Φ_M` vanishes (the incoming distribution
/// carries no usable contrast in this moment).
pub fn moment_accommodation(
    f_in: &[f64],
    f_out: &[f64],
    grid: &VelocityGrid,
    moment: Moment,
    a: &[f64],
) -> Result<f64> {
    check_half(f_in, grid)?;
    check_half(f_out, grid)?;
    let j0 = beta1(f_in, a, grid)?;
    let flux_moment = |f: &[f64]| -> f64 {
        (0..grid.half_len())
            .map(|h| grid.flux_weight(h) * moment.weight(grid.vx(h), grid.vz_mag(h)) * f[h])
            .sum()
    };
    let phi_in = flux_moment(f_in);
    let phi_out = flux_moment(f_out);
    let phi_m = flux_moment(&grid.maxwellian_field());
    let den = phi_in - j0 * phi_m;
    if den.abs() <= 1e-12 * (phi_in.abs() + (j0 * phi_m).abs()).max(1e-300) {
        return Err(Error::Degenerate(format!(
            "incoming moment flux {phi_in:.6e} equals the thermal level {:.6e}; \
             accommodation coefficient undefined",
            j0 * phi_m
        )));
    }
    Ok((phi_in - phi_out) / den)
}

fn check_half(f: &[f64], grid: &VelocityGrid) -> Result<()> {
    if f.len() != grid.half_len() {
        return Err(Error::Domain(format!(
            "half-grid field has {} values for a grid of {}",
            f.len(),
            grid.half_len()
        )));
    }
    Ok(())
}
