//! Self-contained numerical primitives.
//!
//! Three tools, each sized for the needs of the surface-layer geometry:
//!
//! * [`integrate_singular`] — adaptive Gauss–Kronrod (7–15) quadrature on a
//!   finite interval. Either endpoint may be flagged as an
//!   inverse-square-root singularity; flagged ends are removed exactly by
//!   the substitution `u² = distance-to-end`, after which the transformed
//!   integrand is bounded. Crossing-time and optical-depth integrands
//!   diverge like `(z − z₀)^{−1/2}` at turning points `z₀`, which is
//!   precisely this class.
//! * [`find_root_monotone`] — plain bisection for continuous, strictly
//!   monotone functions. Used to invert potentials when no closed form is
//!   available.
//! * [`trace_ode`] — adaptive Dormand–Prince 5(4) integration of an
//!   autonomous system, terminated at the first sign change of an event
//!   functional. The event time is located by bisection, with each probe
//!   re-integrated from the bracket start at full accuracy so the reported
//!   state is as accurate as the trajectory itself.
//!
//! Everything here is pure: no global state, no allocation shared between
//! calls, safe to invoke from many threads at once.

use crate::error::{Error, Result};

// --- Gauss–Kronrod 7–15 nodes and weights (positive half; node 7 is 0) ---

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Weights of the embedded 7-point Gauss rule; they pair with the odd
/// entries of [`XGK`] and the centre node.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral.
    pub abs_tol: f64,
    /// Relative tolerance on the integral.
    pub rel_tol: f64,
    /// Maximum number of interval bisections before giving up.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            max_subdivisions: 400,
        }
    }
}

impl QuadratureSpec {
    /// Checks the invariants: positive tolerances, at least one subdivision.
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Domain(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Domain(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Kronrod estimate of a single 7–15 panel on `[a, b]`, without the error
/// indicator. Only for integrands known to be analytic on the panel, where
/// a fixed composite rule converges faster than adaptivity can confirm.
pub fn gk15_estimate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    gk15(f, a, b).0
}

/// One Gauss–Kronrod 7–15 panel on `[a, b]`: returns the Kronrod estimate
/// and the |Kronrod − Gauss| error indicator. The rule is open, so `f` is
/// never evaluated at the interval ends.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;

    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(center - x) + f(center + x);
        resk += WGK[j] * fsum;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    (resk * half, (resk - resg).abs() * half)
}

/// Adaptive driver: worst-interval-first bisection until the summed error
/// indicator meets the tolerance or the budget runs out.
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    #[derive(Debug)]
    struct Seg {
        err: f64,
        a: f64,
        b: f64,
        val: f64,
    }
    impl PartialEq for Seg {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Seg {}
    impl PartialOrd for Seg {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Seg {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&other.err)
        }
    }

    if a == b {
        return Ok(0.0);
    }

    let (val, err) = gk15(f, a, b);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Seg { err, a, b, val });
    let mut total = val;
    let mut total_err = err;

    for _ in 0..spec.max_subdivisions {
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval no longer splittable in f64; accept what we have.
            heap.push(worst);
            break;
        }
        let (vl, el) = gk15(f, worst.a, mid);
        let (vr, er) = gk15(f, mid, worst.b);
        total += vl + vr - worst.val;
        total_err += el + er - worst.err;
        heap.push(Seg {
            err: el,
            a: worst.a,
            b: mid,
            val: vl,
        });
        heap.push(Seg {
            err: er,
            a: mid,
            b: worst.b,
            val: vr,
        });
    }

    if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Quadrature {
            best: total,
            error_bound: total_err,
            subdivisions: spec.max_subdivisions,
        })
    }
}

/// Integrates `f` over `[a, b]` with no endpoint singularities.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_singular(f, a, b, (false, false), spec)
}

/// Integrates `f` over `[a, b]`, where `f` may diverge like
/// `(distance)^{−1/2}` at the ends flagged in `singular`.
///
/// A flagged end is transformed by `u² = distance-to-end`, which maps an
/// inverse-square-root divergence to a bounded integrand:
/// `∫ₐ f(x) dx = ∫₀ 2u·f(a + u²) du`. When both ends are flagged the
/// interval is split at its midpoint and each half transformed towards its
/// own end. The rule never evaluates `f` at `a` or `b` themselves.
pub fn integrate_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    singular: (bool, bool),
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if a > b {
        return Err(Error::Domain(format!(
            "integration bounds must satisfy a <= b (got {a} > {b})"
        )));
    }
    if a == b {
        return Ok(0.0);
    }

    match singular {
        (false, false) => adaptive(&f, a, b, spec),
        (true, false) => {
            let t = |u: f64| 2.0 * u * f(a + u * u);
            adaptive(&t, 0.0, (b - a).sqrt(), spec)
        }
        (false, true) => {
            let t = |u: f64| 2.0 * u * f(b - u * u);
            adaptive(&t, 0.0, (b - a).sqrt(), spec)
        }
        (true, true) => {
            let mid = 0.5 * (a + b);
            let half_spec = QuadratureSpec {
                abs_tol: 0.5 * spec.abs_tol,
                ..*spec
            };
            let left = |u: f64| 2.0 * u * f(a + u * u);
            let right = |u: f64| 2.0 * u * f(b - u * u);
            let vl = adaptive(&left, 0.0, (mid - a).sqrt(), &half_spec)?;
            let vr = adaptive(&right, 0.0, (b - mid).sqrt(), &half_spec)?;
            Ok(vl + vr)
        }
    }
}

/// Finds the root of a continuous, strictly monotone `g` on `[lo, hi]` by
/// bisection. Returns the midpoint of the final bracket, whose width is at
/// most `tol`.
///
/// # Errors
/// `Domain` if the endpoint values have the same (nonzero) sign, or if the
/// bracket or tolerance is invalid.
pub fn find_root_monotone<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("root tolerance must be positive (got {tol})")));
    }
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "root bracket must satisfy lo < hi (got [{lo}, {hi}])"
        )));
    }
    let glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Domain(format!(
            "endpoints do not bracket a root: g({lo}) = {glo}, g({hi}) = {ghi}"
        )));
    }

    let (mut lo, mut hi) = (lo, hi);
    let mut glo = glo;
    // f64 has 53 mantissa bits; ~200 bisections exhaust any finite bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// --- Dormand–Prince 5(4) ---

// The vector fields integrated here are autonomous, so the stage
// abscissae of the tableau are never needed — only the coupling matrix
// and the two weight rows.
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// 5th-order weights (row 7 of the tableau equals these: FSAL).
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Embedded 4th-order weights.
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Tolerances and budget for event-terminated ODE tracing.
#[derive(Debug, Clone, Copy)]
pub struct OdeSpec {
    /// Local error tolerance per step (used as both absolute and relative).
    pub step_tol: f64,
    /// Maximum number of accepted steps.
    pub max_steps: usize,
    /// Width (in model time) to which the event instant is located.
    pub event_tol: f64,
}

impl Default for OdeSpec {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            max_steps: 100_000,
            event_tol: 1e-12,
        }
    }
}

impl OdeSpec {
    /// Checks the invariants: everything strictly positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.step_tol > 0.0) || !(self.event_tol > 0.0) || self.max_steps == 0 {
            return Err(Error::Domain(format!(
                "OdeSpec fields must be positive (step_tol {}, max_steps {}, event_tol {})",
                self.step_tol, self.max_steps, self.event_tol
            )));
        }
        Ok(())
    }
}

/// Result of an event-terminated trace.
#[derive(Debug, Clone)]
pub struct OdeTrace {
    /// State at the event instant.
    pub state: Vec<f64>,
    /// Model time elapsed from the initial state to the event.
    pub time: f64,
    /// Number of accepted steps.
    pub steps: usize,
}

/// Scratch space for one Dormand–Prince step, reused across steps.
struct DpWork {
    k: [Vec<f64>; 7],
    y_try: Vec<f64>,
}

impl DpWork {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_try: vec![0.0; n],
        }
    }
}

/// One Dormand–Prince step of size `h` from `y` (with `k[0]` already holding
/// the derivative at `y`). On return `k` holds all stages, `y_out` the
/// 5th-order solution, and the result is the scaled error norm.
fn dp_step<F: Fn(&[f64], &mut [f64])>(
    field: &F,
    y: &[f64],
    h: f64,
    w: &mut DpWork,
    y_out: &mut [f64],
    tol: f64,
) -> f64 {
    let n = y.len();
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in DP_A[s - 1].iter().enumerate().take(s) {
                acc += a * w.k[j][i];
            }
            w.y_try[i] = y[i] + h * acc;
        }
        let (done, rest) = w.k.split_at_mut(s);
        let _ = done;
        field(&w.y_try, &mut rest[0]);
    }
    let mut err_sq = 0.0;
    for i in 0..n {
        let mut acc5 = 0.0;
        let mut acc4 = 0.0;
        for s in 0..7 {
            acc5 += DP_B5[s] * w.k[s][i];
            acc4 += DP_B4[s] * w.k[s][i];
        }
        y_out[i] = y[i] + h * acc5;
        let scale = tol + tol * y[i].abs().max(y_out[i].abs());
        let e = h * (acc5 - acc4) / scale;
        err_sq += e * e;
    }
    (err_sq / n as f64).sqrt()
}

/// Initial step-size guess: small relative to the state/derivative scale,
/// refined immediately by the controller.
fn initial_step(y: &[f64], f0: &[f64], tol: f64) -> f64 {
    let ny = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let nf = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = if nf > 0.0 { 0.01 * ny / nf } else { 0.01 };
    h.min(0.1).max(tol.sqrt() * 1e-3)
}

/// Integrates the autonomous system `y' = field(y)` from `t = 0` to exactly
/// `t_end`, with full adaptive error control. Used for event refinement.
fn integrate_to<F: Fn(&[f64], &mut [f64])>(
    field: &F,
    y0: &[f64],
    t_end: f64,
    spec: &OdeSpec,
) -> Result<Vec<f64>> {
    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(y);
    }
    let mut w = DpWork::new(n);
    let mut y_new = vec![0.0; n];
    field(&y, &mut w.k[0]);
    let mut h = initial_step(&y, &w.k[0], spec.step_tol).min(t_end);
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_end {
        if steps >= spec.max_steps {
            return Err(Error::OdeMaxSteps {
                max_steps: spec.max_steps,
                t,
                partial_state: y,
            });
        }
        let h_step = h.min(t_end - t);
        let err = dp_step(field, &y, h_step, &mut w, &mut y_new, spec.step_tol);
        if err <= 1.0 {
            t += h_step;
            y.copy_from_slice(&y_new);
            w.k[0] = w.k[6].clone();
            steps += 1;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h_step * factor).max(f64::EPSILON * t_end.max(1.0));
    }
    Ok(y)
}

/// Traces the autonomous system `y' = field(y)` until the first sign change
/// of `stop(y)`, returning the state, elapsed model time, and step count.
///
/// The event is armed once `stop` becomes nonzero (a zero value at the
/// initial state does not trigger), and fires on the first subsequent sign
/// change. The event instant is bracketed by the step that produced the
/// change and located by bisection; each probe re-integrates from the
/// bracket start with full error control, so the returned state carries the
/// integrator's accuracy, not an interpolant's.
///
/// # Errors
/// `OdeMaxSteps` (carrying the partial state) if the step budget is
/// exhausted before the event fires.
pub fn trace_ode<F, S>(initial: &[f64], field: F, stop: S, spec: &OdeSpec) -> Result<OdeTrace>
where
    F: Fn(&[f64], &mut [f64]),
    S: Fn(&[f64]) -> f64,
{
    // Three-way sign; f64::signum maps ±0.0 to ±1.0, which would arm the
    // event immediately on a trajectory starting exactly on the surface.
    fn sign3(x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
    spec.validate()?;
    let n = initial.len();
    let mut y = initial.to_vec();
    let mut w = DpWork::new(n);
    let mut y_new = vec![0.0; n];
    field(&y, &mut w.k[0]);
    let mut h = initial_step(&y, &w.k[0], spec.step_tol);
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut armed_sign = sign3(stop(&y)); // 0.0 means "not armed yet"

    loop {
        if steps >= spec.max_steps {
            return Err(Error::OdeMaxSteps {
                max_steps: spec.max_steps,
                t,
                partial_state: y,
            });
        }
        let err = dp_step(&field, &y, h, &mut w, &mut y_new, spec.step_tol);
        if err <= 1.0 {
            steps += 1;
            let s_new = sign3(stop(&y_new));
            if armed_sign == 0.0 {
                armed_sign = s_new;
            } else if s_new != armed_sign {
                // Event inside (t, t + h]: bisect on the probe time,
                // restarting each probe from the step's start state.
                let y_start = y.clone();
                let mut lo = 0.0f64;
                let mut hi = h;
                while hi - lo > spec.event_tol {
                    let tm = 0.5 * (lo + hi);
                    let ym = integrate_to(&field, &y_start, tm, spec)?;
                    if sign3(stop(&ym)) != armed_sign {
                        hi = tm;
                    } else {
                        lo = tm;
                    }
                }
                let y_event = integrate_to(&field, &y_start, hi, spec)?;
                return Ok(OdeTrace {
                    state: y_event,
                    time: t + hi,
                    steps,
                });
            }
            t += h;
            y.copy_from_slice(&y_new);
            w.k[0] = w.k[6].clone();
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
}
