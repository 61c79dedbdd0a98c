//! Wall potential models.
//!
//! All quantities are dimensionless: velocities in units of the thermal
//! speed `v* = √(kT/m)`, energies in units of `m v*²/2`, lengths in units
//! of the surface-layer thickness `L` (so `L = 1` in every shipped
//! configuration, though the parameter is kept explicit).
//!
//! # Flat wall
//!
//! A gas molecule feels the wall only through the normal coordinate `z`,
//! via a potential `W(z)` required to satisfy four hypotheses:
//!
//! * **H1** — `W(z) ≥ 0` everywhere;
//! * **H2** — `W(z) → +∞` as `z → L` (the molecule can never reach `z = L`);
//! * **H3** — `W` is attractive then repulsive: `W′ < 0` on `(0, z_m)`,
//!   `W(z_m) = 0`, `W′ > 0` on `(z_m, L)`;
//! * **H4** — the surface force has finite range: `W(z) = W_m` for `z ≤ 0`.
//!
//! The canonical closed form used throughout is the rational square
//!
//! ```text
//! W(z) = W_m · ((z_m − z)·L / (z_m·(L − z)))²,   0 ≤ z < L,
//! ```
//!
//! which satisfies H1–H4 exactly, grows like `(L − z)^{−2}` at the wall,
//! and — decisively for testing — has turning points solving a *linear*
//! equation. The value matches `W_m` continuously at `z = 0` (the slope is
//! allowed to jump there; H4 constrains the value only).
//!
//! # Rough wall
//!
//! Roughness is modelled by rescaling the flat profile with a 1-periodic
//! modulation of the layer thickness:
//!
//! ```text
//! V#(y, z) = W(z / s(y)),    s(y) = s₀ + s₁·cos(2πy),
//! ```
//!
//! with `0 ≤ s₁ < s₀` and `s₀ + s₁ ≤ 1` so the layer never exceeds the
//! periodic cell. The blow-up curve is `ζ∞(y) = L·s(y)` and the well-bottom
//! curve `ζ₀(y) = z_m·s(y)`; all four flat-wall hypotheses carry over at
//! each fixed `y` by construction. `s₁ = 0` reproduces the flat wall
//! exactly, which the kernel reductions rely on.

use crate::error::{Error, Result};

/// Separable flat-wall potential `W(z)` in canonical rational-square form.
///
/// Immutable value object; construct with [`FlatPotential::new`] (validated)
/// or [`FlatPotential::unchecked`] (diagnostics only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatPotential {
    w_m: f64,
    l: f64,
    z_m: f64,
}

impl FlatPotential {
    /// Validated constructor: `w_m > 0`, `l > 0`, `0 < z_m < l`.
    pub fn new(w_m: f64, l: f64, z_m: f64) -> Result<Self> {
        let p = Self::unchecked(w_m, l, z_m);
        if !(w_m > 0.0 && w_m.is_finite()) {
            return Err(Error::Domain(format!(
                "well depth w_m must be positive and finite (got {w_m})"
            )));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!(
                "layer thickness l must be positive and finite (got {l})"
            )));
        }
        if !(z_m > 0.0 && z_m < l) {
            return Err(Error::Domain(format!(
                "well bottom z_m must lie strictly inside (0, {l}) (got {z_m})"
            )));
        }
        Ok(p)
    }

    /// Builds without validation so diagnostic code can exercise
    /// [`validate_flat_hypotheses`] on deliberately broken parameters.
    pub fn unchecked(w_m: f64, l: f64, z_m: f64) -> Self {
        Self { w_m, l, z_m }
    }

    /// The canonical test configuration: `W_m = 1`, `L = 1`, `z_m = 1/2`.
    pub fn canonical() -> Self {
        Self {
            w_m: 1.0,
            l: 1.0,
            z_m: 0.5,
        }
    }

    /// Dimensionless well depth `W_m` (value of `W` for `z ≤ 0`).
    pub fn w_m(&self) -> f64 {
        self.w_m
    }

    /// Layer thickness `L` (position of the blow-up).
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Well-bottom position `z_m ∈ (0, L)` where `W` vanishes.
    pub fn z_m(&self) -> f64 {
        self.z_m
    }

    /// Escape threshold `√W_m`: equivalent velocities below it in magnitude
    /// are trapped.
    pub fn escape_speed(&self) -> f64 {
        self.w_m.sqrt()
    }

    /// Evaluates `(W(z), W′(z))`.
    ///
    /// For `z ≤ 0` returns `(W_m, 0)` (finite force range). The derivative
    /// is exact, not a finite difference.
    ///
    /// # Errors
    /// `Domain` if `z ≥ L` (beyond the blow-up).
    pub fn eval(&self, z: f64) -> Result<(f64, f64)> {
        if z >= self.l {
            return Err(Error::Domain(format!(
                "potential evaluated at z = {z} beyond the blow-up at L = {}",
                self.l
            )));
        }
        if z <= 0.0 {
            return Ok((self.w_m, 0.0));
        }
        let r = (self.z_m - z) * self.l / (self.z_m * (self.l - z));
        let dr = self.l * (self.z_m - self.l) / (self.z_m * (self.l - z) * (self.l - z));
        Ok((self.w_m * r * r, 2.0 * self.w_m * r * dr))
    }

    /// Value of `W(z)` alone; same domain as [`FlatPotential::eval`].
    pub fn value(&self, z: f64) -> Result<f64> {
        Ok(self.eval(z)?.0)
    }

    /// Value of `W(z_m + δ)` computed directly in the offset `δ` from the
    /// well bottom, with no `z_m − z` subtraction.
    ///
    /// Near the well bottom `W` is quadratically small and the integrals of
    /// `(e_z² − W)^{−1/2}` over nearly degenerate turning intervals would
    /// otherwise be at the mercy of the `ulp(z_m)`-quantization of the
    /// evaluation point; in the offset variable the resolution scales with
    /// the interval itself.
    ///
    /// # Errors
    /// `Domain` if `z_m + δ >= L`.
    pub fn value_from_bottom(&self, delta: f64) -> Result<f64> {
        let span = self.l - self.z_m;
        if delta >= span {
            return Err(Error::Domain(format!(
                "potential evaluated at offset {delta} at or beyond the blow-up (L - z_m = {span})"
            )));
        }
        if delta <= -self.z_m {
            return Ok(self.w_m);
        }
        let r = delta * self.l / (self.z_m * (span - delta));
        Ok(self.w_m * r * r)
    }
}

/// Periodic rough-wall potential `V#(y, z) = W(z / s(y))` with scale
/// profile `s(y) = s₀ + s₁·cos(2πy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicPotential {
    base: FlatPotential,
    beta_star: f64,
    s0: f64,
    s1: f64,
}

impl PeriodicPotential {
    /// Validated constructor: base valid, `beta_star > 0`, `0 ≤ s₁ < s₀`,
    /// `s₀ + s₁ ≤ 1`.
    ///
    /// `s₁ = 0` is explicitly allowed and degenerates to the flat wall; the
    /// smooth-wall reductions of the kernel builders rely on it.
    pub fn new(base: FlatPotential, beta_star: f64, s0: f64, s1: f64) -> Result<Self> {
        if !(beta_star > 0.0 && beta_star.is_finite()) {
            return Err(Error::Domain(format!(
                "roughness period ratio beta_star must be positive (got {beta_star})"
            )));
        }
        if !(s0 > 0.0 && s1 >= 0.0 && s1 < s0) {
            return Err(Error::Domain(format!(
                "scale profile requires 0 <= s1 < s0 (got s0 = {s0}, s1 = {s1})"
            )));
        }
        if s0 + s1 > 1.0 {
            return Err(Error::Domain(format!(
                "surface layer exceeds the periodic cell: s0 + s1 = {} > 1",
                s0 + s1
            )));
        }
        Ok(Self::unchecked(base, beta_star, s0, s1))
    }

    /// Builds without validation (diagnostics only).
    pub fn unchecked(base: FlatPotential, beta_star: f64, s0: f64, s1: f64) -> Self {
        Self {
            base,
            beta_star,
            s0,
            s1,
        }
    }

    /// The underlying flat profile.
    pub fn base(&self) -> &FlatPotential {
        &self.base
    }

    /// Ratio of roughness period to layer thickness scale in the
    /// characteristic equations (`ẏ = v_x / β*`).
    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    /// Mean layer scale `s₀`.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Modulation amplitude `s₁`.
    pub fn s1(&self) -> f64 {
        self.s1
    }

    /// Scale profile `s(y)`, 1-periodic in `y`.
    pub fn scale(&self, y: f64) -> f64 {
        self.s0 + self.s1 * (2.0 * std::f64::consts::PI * y).cos()
    }

    /// Derivative `s′(y)`.
    pub fn scale_prime(&self, y: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        -self.s1 * two_pi * (two_pi * y).sin()
    }

    /// Blow-up curve `ζ∞(y) = L·s(y)`.
    pub fn zeta_inf(&self, y: f64) -> f64 {
        self.base.l * self.scale(y)
    }

    /// Well-bottom curve `ζ₀(y) = z_m·s(y)`.
    pub fn zeta_0(&self, y: f64) -> f64 {
        self.base.z_m * self.scale(y)
    }

    /// Largest height any trajectory can reach: `max_y ζ∞(y) = L·(s₀+s₁)`.
    pub fn zeta_inf_max(&self) -> f64 {
        self.base.l * (self.s0 + self.s1)
    }

    /// Evaluates `(V#, ∂_y V#, ∂_z V#)` at `(y, z)`.
    ///
    /// `y` may be any real; the profile is 1-periodic. For `z ≤ 0` returns
    /// `(W_m, 0, 0)`. Derivatives come from the chain rule on the flat
    /// profile and are exact.
    ///
    /// # Errors
    /// `Domain` if `z ≥ ζ∞(y)`.
    pub fn eval(&self, y: f64, z: f64) -> Result<(f64, f64, f64)> {
        let s = self.scale(y);
        if z >= self.base.l * s {
            return Err(Error::Domain(format!(
                "potential evaluated at z = {z} beyond the blow-up curve zeta_inf({y}) = {}",
                self.base.l * s
            )));
        }
        if z <= 0.0 {
            return Ok((self.base.w_m, 0.0, 0.0));
        }
        let (w, dw) = self.base.eval(z / s)?;
        let dy = -dw * z * self.scale_prime(y) / (s * s);
        Ok((w, dy, dw / s))
    }
}

pub use crate::report::{CheckOutcome, ValidationReport};

/// Samples H1–H4 for a flat potential on `n_samples` points and reports the
/// first violation of each, if any. Report-valued: never errors, so broken
/// parameter sets (built with [`FlatPotential::unchecked`]) produce a
/// readable diagnosis instead of a panic.
///
/// # Errors
/// `Domain` only when `n_samples < 10` (too coarse to mean anything).
pub fn validate_flat_hypotheses(p: &FlatPotential, n_samples: usize) -> Result<ValidationReport> {
    if n_samples < 10 {
        return Err(Error::Domain(format!(
            "validation needs at least 10 samples (got {n_samples})"
        )));
    }
    let mut rep = ValidationReport::new();

    // Structural prerequisites the hypotheses implicitly assume.
    let structural = p.w_m > 0.0 && p.l > 0.0 && p.z_m > 0.0 && p.z_m < p.l;
    rep.push(
        "parameters",
        structural,
        if structural {
            format!("w_m = {}, l = {}, z_m = {}", p.w_m, p.l, p.z_m)
        } else {
            format!(
                "require w_m > 0, l > 0, 0 < z_m < l (got w_m = {}, l = {}, z_m = {})",
                p.w_m, p.l, p.z_m
            )
        },
    );
    if !structural {
        // Sampling a nonsensical profile would only add noise; H3 is the
        // first casualty of a misplaced well bottom.
        rep.push(
            "H3 attractive-repulsive",
            false,
            "not sampled: well bottom is outside the layer".into(),
        );
        return Ok(rep);
    }

    let eps = 1e-9 * p.l;
    let zs: Vec<f64> = (0..n_samples)
        .map(|i| (i as f64 + 0.5) / n_samples as f64 * (p.l - 2.0 * eps) + eps)
        .collect();

    // H1: nonnegative everywhere sampled (including the constant tail).
    let mut h1 = (true, String::from("W >= 0 on all samples"));
    for &z in zs.iter().chain([-0.5 * p.l, 0.0].iter()) {
        let (w, _) = p.eval(z).expect("samples lie below the blow-up");
        if w < 0.0 {
            h1 = (false, format!("W({z}) = {w} < 0"));
            break;
        }
    }
    rep.push("H1 nonnegative", h1.0, h1.1);

    // H2: blow-up approaching z = L. Sampled as strong growth close to L.
    let (w_near, _) = p.eval(p.l - eps).expect("just below the blow-up");
    let h2 = w_near > 1e6 * p.w_m.max(1.0);
    rep.push(
        "H2 blow-up at L",
        h2,
        format!("W(L - {eps:.1e}) = {w_near:.3e}"),
    );

    // H3: W(z_m) = 0, strictly decreasing before z_m, increasing after.
    let (w_bottom, _) = p.eval(p.z_m).expect("well bottom is inside the layer");
    let mut h3 = (
        w_bottom.abs() <= 1e-12 * p.w_m,
        format!("W(z_m) = {w_bottom:.3e}"),
    );
    if h3.0 {
        for &z in &zs {
            let (_, dw) = p.eval(z).expect("samples lie below the blow-up");
            let margin = 1e-9 * p.l;
            if z < p.z_m - margin && dw >= 0.0 {
                h3 = (false, format!("W'({z}) = {dw} >= 0 on the attractive branch"));
                break;
            }
            if z > p.z_m + margin && dw <= 0.0 {
                h3 = (false, format!("W'({z}) = {dw} <= 0 on the repulsive branch"));
                break;
            }
        }
    }
    rep.push("H3 attractive-repulsive", h3.0, h3.1);

    // H4: constant W_m for z <= 0, and continuity of the value at 0.
    let (w_neg, dw_neg) = p.eval(-0.3 * p.l).expect("tail is always evaluable");
    let (w_zero, _) = p.eval(0.0).expect("z = 0 is inside the domain");
    let (w_just_in, _) = p.eval(eps).expect("just inside the layer");
    let h4 = w_neg == p.w_m
        && dw_neg == 0.0
        && w_zero == p.w_m
        && (w_just_in - p.w_m).abs() <= 1e-6 * p.w_m.max(1.0);
    rep.push(
        "H4 finite range",
        h4,
        format!("W(-0.3L) = {w_neg}, W(0) = {w_zero}, W(0+) = {w_just_in}"),
    );

    Ok(rep)
}

/// Samples the rough-wall hypotheses: periodicity, blow-up along `ζ∞(y)`,
/// zero along `ζ₀(y)`, the attractive/repulsive split in `z`, and the
/// finite-range tail. Also checks the cell-containment constraint
/// `s₀ + s₁ ≤ 1`.
///
/// # Errors
/// `Domain` only when `n_samples < 10`.
pub fn validate_periodic_hypotheses(
    p: &PeriodicPotential,
    n_samples: usize,
) -> Result<ValidationReport> {
    if n_samples < 10 {
        return Err(Error::Domain(format!(
            "validation needs at least 10 samples (got {n_samples})"
        )));
    }
    let mut rep = ValidationReport::new();

    let params_ok =
        p.beta_star > 0.0 && p.s0 > 0.0 && p.s1 >= 0.0 && p.s1 < p.s0 && p.s0 + p.s1 <= 1.0;
    rep.push(
        "parameters",
        params_ok,
        if params_ok {
            format!("beta_star = {}, s0 = {}, s1 = {}", p.beta_star, p.s0, p.s1)
        } else {
            format!(
                "require beta_star > 0, 0 <= s1 < s0, s0 + s1 <= 1 \
                 (got beta_star = {}, s0 = {}, s1 = {}; surface layer must fit the cell)",
                p.beta_star, p.s0, p.s1
            )
        },
    );
    let base_ok = validate_flat_hypotheses(&p.base, n_samples)?;
    rep.push(
        "base profile",
        base_ok.passed,
        if base_ok.passed {
            "flat profile satisfies H1-H4".into()
        } else {
            "flat profile fails its own hypotheses".into()
        },
    );
    if !params_ok || !base_ok.passed {
        return Ok(rep);
    }

    let ys: Vec<f64> = (0..n_samples)
        .map(|i| i as f64 / n_samples as f64)
        .collect();

    // Periodicity holds to rounding: cos(2π(y+1)) and cos(2πy) are the
    // same function but not the same float expression.
    let mut per = (true, String::from("V#(y+1, z) == V#(y, z) to rounding"));
    for &y in &ys {
        let z = 0.5 * p.zeta_0(y);
        let a = p.eval(y, z).expect("below the well bottom curve");
        let b = p.eval(y + 1.0, z).expect("periodic image");
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-10 * (1.0 + u.abs());
        if !(close(a.0, b.0) && close(a.1, b.1) && close(a.2, b.2)) {
            per = (
                false,
                format!("V#({y}, {z}) = {a:?} vs V#({}, {z}) = {b:?}", y + 1.0),
            );
            break;
        }
    }
    rep.push("periodicity", per.0, per.1);

    // Blow-up along zeta_inf and zero along zeta_0.
    let mut curves = (true, String::from("blow-up and well-bottom curves check out"));
    for &y in &ys {
        let eps = 1e-9 * p.base.l;
        let near = p
            .eval(y, p.zeta_inf(y) - eps * p.scale(y))
            .expect("just below the blow-up curve");
        if near.0 <= 1e6 * p.base.w_m.max(1.0) {
            curves = (false, format!("V#({y}, zeta_inf-) = {:.3e} is not blowing up", near.0));
            break;
        }
        let bottom = p.eval(y, p.zeta_0(y)).expect("the well bottom is interior");
        if bottom.0.abs() > 1e-12 * p.base.w_m {
            curves = (false, format!("V#({y}, zeta_0) = {:.3e} != 0", bottom.0));
            break;
        }
    }
    rep.push("curves", curves.0, curves.1);

    // Attractive-repulsive split of d/dz at each sampled y.
    let mut split = (true, String::from("dV/dz < 0 below zeta_0, > 0 above"));
    'outer: for &y in &ys {
        for &f in &[0.25, 0.5, 0.75] {
            let zlo = f * p.zeta_0(y);
            let zhi = p.zeta_0(y) + f * (p.zeta_inf(y) - p.zeta_0(y)) * 0.9;
            let (_, _, dz_lo) = p.eval(y, zlo).expect("interior sample");
            let (_, _, dz_hi) = p.eval(y, zhi).expect("interior sample");
            if dz_lo >= 0.0 || dz_hi <= 0.0 {
                split = (
                    false,
                    format!("dV/dz sign wrong at y = {y}: ({dz_lo}, {dz_hi})"),
                );
                break 'outer;
            }
        }
    }
    rep.push("attractive-repulsive in z", split.0, split.1);

    // Finite range: constant V_m for z <= 0.
    let tail = p.eval(0.3, -0.5).expect("tail is always evaluable");
    let h4 = tail == (p.base.w_m, 0.0, 0.0);
    rep.push(
        "finite range",
        h4,
        format!("V#(0.3, -0.5) = {:?}", tail),
    );

    Ok(rep)
}
