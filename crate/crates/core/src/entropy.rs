//! W-entropy, its monotonicity residual, the spectral floor λ₀, and
//! empirical (log-)Sobolev inequality checks on model geometries.
//!
//! Normalizations used throughout:
//!
//! ```text
//!   u = (4πs)^{-n/2} e^{-f},           s > 0 a backward time
//!   W(g, u, s) = ∫ [ s(|∇f|² + R) + f − n ] u dμ
//!   dW/ds      = −2s ∫ |Ric + Hess f − g/(2s)|² u dμ  ≤  0
//!   λ₀         = inf_{‖v‖₂=1} ∫ (4|∇v|² + R v²) dμ
//! ```
//!
//! The log-Sobolev template is checked in the form
//!
//! ```text
//!   ∫ v² ln v² dμ ≤ ε² ∫ (4|∇v|² + R v²) dμ − n ln ε − n(1 + ln√(4π))
//!                     + (t + ε²) β + α,          ‖v‖₂ = 1.
//! ```
//!
//! The constant −n(1 + ln√(4π)) is the sharp flat-space normalization:
//! with α = β = 0 the template is an equality for the Gaussian
//! v² = (4πε²)^{-n/2} e^{-|x|²/(4ε²)}, so fitted α values measure the
//! excess over the Euclidean baseline.
//!
//! Fields on warped spheres are node vectors of length M+1.  Fields on flat
//! tori are flattened row-major grids over Mⁿ cells, axis 0 slowest; the
//! per-node quadrature weight is the uniform cell volume, which is exact for
//! the periodic trapezoid rule.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd;
use crate::flow::{FlowError, FlowTrajectory};
use crate::geometry::{GeometryError, ProfileKind, WarpedProfile};
use crate::kernel::{self, KernelDirection, KernelError, KernelField};
use crate::report::CheckReport;
use crate::soliton::{self, SolitonError};

/// Slack allowed on the unit-mass precondition ∫u dμ ≤ 1.
pub const MASS_TOL: f64 = 1e-6;
/// Density floor for logarithms and the |∇u|²/u gradient form.
pub const U_FLOOR: f64 = 1e-300;
/// Monotonicity slack for W along a trace.
pub const W_MONOTONE_TOL: f64 = 1e-8;
/// Relative and absolute slack for the dW/ds derivative identity.
pub const DERIV_MATCH_REL: f64 = 0.02;
pub const DERIV_MATCH_ABS: f64 = 1e-6;
/// Default caps for the fitted inequality constants.
pub const DEFAULT_ALPHA_CAP: f64 = 10.0;
pub const DEFAULT_SOBOLEV_CAP: f64 = 10.0;

const EIG_TOL: f64 = 1e-8;
const EIG_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("density must be positive, got u[{index}] = {value:e}")]
    PositivityViolation { index: usize, value: f64 },
    #[error("density mass {mass} exceeds 1 + {MASS_TOL:e}")]
    InvalidDensity { mass: f64 },
    #[error("backward time must be positive, got s = {s}")]
    NonpositiveScale { s: f64 },
    #[error("field has {got} entries, the grid wants {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("no stored kernel slice at backward time s = {s}")]
    SliceNotStored { s: f64 },
    #[error("eigenvalue iteration stalled at residual {residual:e}")]
    ConvergenceFailure { residual: f64 },
    #[error("operation needs n >= 3, got n = {n}")]
    UnsupportedDimension { n: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Residual(#[from] Box<SolitonError>),
}

/// Per-s record of W, its two independently computed derivatives, and the
/// statistics of the potential f.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub s_grid: Vec<f64>,
    pub w_values: Vec<f64>,
    /// −2s ∫ |Ric + Hess f − g/(2s)|² u dμ, the signed derivative
    /// contribution; always ≤ 0.
    pub residuals: Vec<f64>,
    /// Central differences of W on the s grid (one-sided at the ends).
    pub dw_numeric: Vec<f64>,
    pub f_min: Vec<f64>,
    pub f_max: Vec<f64>,
    pub f_variance: Vec<f64>,
}

impl EntropyTrace {
    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    /// True when W never increases by more than `tol` between samples.
    pub fn monotone_within(&self, tol: f64) -> bool {
        self.w_values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Worst normalized mismatch |dW_numeric − residual| over the interior
    /// samples, scaled so values ≤ 1 satisfy the derivative identity within
    /// the declared slack.
    pub fn derivative_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.len().saturating_sub(1) {
            let gap = (self.dw_numeric[i] - self.residuals[i]).abs();
            let allow = DERIV_MATCH_REL * self.residuals[i].abs() + DERIV_MATCH_ABS;
            worst = worst.max(gap / allow);
        }
        worst
    }
}

pub(crate) fn torus_node_count(p: &WarpedProfile) -> usize {
    p.grid_m.pow(p.n as u32)
}

pub(crate) fn torus_cell_volume(p: &WarpedProfile) -> f64 {
    p.sides.iter().map(|l| l / p.grid_m as f64).product()
}

/// Flattened product field Π_a v_a(x_a) on the row-major torus grid.
pub(crate) fn torus_product_field(axis_values: &[Vec<f64>]) -> Vec<f64> {
    let m = axis_values[0].len();
    let n_axes = axis_values.len();
    let mut out = vec![1.0; m.pow(n_axes as u32)];
    for (a, vals) in axis_values.iter().enumerate() {
        let stride = m.pow((n_axes - 1 - a) as u32);
        for (idx, v) in out.iter_mut().enumerate() {
            *v *= vals[(idx / stride) % m];
        }
    }
    out
}

/// Partial derivative of a flattened torus field along one axis, using the
/// fourth-order periodic stencil on each grid line.
pub(crate) fn torus_axis_deriv(
    field: &[f64],
    m: usize,
    n_axes: usize,
    axis: usize,
    h: f64,
) -> Vec<f64> {
    let stride = m.pow((n_axes - 1 - axis) as u32);
    let block = stride * m;
    let mut out = vec![0.0; field.len()];
    let mut line = vec![0.0; m];
    for start in (0..field.len()).step_by(block) {
        for off in 0..stride {
            let base = start + off;
            for (j, l) in line.iter_mut().enumerate() {
                *l = field[base + j * stride];
            }
            let d = fd::deriv1_periodic(&line, h);
            for (j, dj) in d.iter().enumerate() {
                out[base + j * stride] = *dj;
            }
        }
    }
    out
}

/// Quadrature weights matching the kernel mass convention: finite-volume
/// cell masses on warped spheres, uniform cell volumes on flat tori.
pub fn quad_weights(p: &WarpedProfile) -> Vec<f64> {
    match p.kind {
        ProfileKind::WarpedSphere => kernel::fv_weights(p),
        ProfileKind::FlatTorus => vec![torus_cell_volume(p); torus_node_count(p)],
    }
}

fn scalar_curvature(p: &WarpedProfile) -> Result<Vec<f64>, EntropyError> {
    match p.kind {
        ProfileKind::WarpedSphere => Ok(p.curvature()?.r),
        ProfileKind::FlatTorus => Ok(vec![0.0; torus_node_count(p)]),
    }
}

/// Pointwise |∇v|² of a node field.
fn grad_sq(p: &WarpedProfile, v: &[f64]) -> Vec<f64> {
    match p.kind {
        ProfileKind::WarpedSphere => {
            let g = p.radial_gradient(v);
            g.iter().map(|x| x * x).collect()
        }
        ProfileKind::FlatTorus => {
            let m = p.grid_m;
            let mut out = vec![0.0; v.len()];
            for a in 0..p.n {
                let h = p.sides[a] / m as f64;
                let d = torus_axis_deriv(v, m, p.n, a, h);
                for (o, di) in out.iter_mut().zip(&d) {
                    *o += di * di;
                }
            }
            out
        }
    }
}

/// ∫ |∇v|² dμ in the discretization matched to [`lambda0`]: the
/// finite-volume Dirichlet form on warped spheres, nodal periodic gradients
/// on flat tori.
fn dirichlet_form(p: &WarpedProfile, v: &[f64]) -> f64 {
    match p.kind {
        ProfileKind::WarpedSphere => kernel::fv_fluxes(p)
            .iter()
            .enumerate()
            .map(|(i, t)| t * (v[i + 1] - v[i]) * (v[i + 1] - v[i]))
            .sum(),
        ProfileKind::FlatTorus => kernel::dot(&grad_sq(p, v), &quad_weights(p)),
    }
}

pub(crate) fn expect_len(p: &WarpedProfile, got: usize) -> Result<usize, EntropyError> {
    let expected = match p.kind {
        ProfileKind::WarpedSphere => p.grid_m + 1,
        ProfileKind::FlatTorus => torus_node_count(p),
    };
    if got != expected {
        return Err(EntropyError::GridMismatch { expected, got });
    }
    Ok(expected)
}

/// Potential of a positive density: f = −ln u − (n/2) ln(4πs).
pub fn f_from_u(u: &[f64], s: f64, n: usize) -> Result<Vec<f64>, EntropyError> {
    if !(s > 0.0) {
        return Err(EntropyError::NonpositiveScale { s });
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(EntropyError::PositivityViolation { index, value });
    }
    let log_norm = 0.5 * n as f64 * (4.0 * PI * s).ln();
    Ok(u.iter().map(|&v| -v.ln() - log_norm).collect())
}

/// W(g, u, s) = ∫ [s(|∇f|² + R) + f − n] u dμ for a density of mass ≤ 1.
///
/// The gradient term is evaluated in the singularity-safe form
/// |∇f|² u = |∇u|²/u with the density floored at [`U_FLOOR`]; nodes at or
/// below the floor contribute nothing (their mass is zero).
pub fn w_entropy(p: &WarpedProfile, u: &[f64], s: f64) -> Result<f64, EntropyError> {
    if !(s > 0.0) {
        return Err(EntropyError::NonpositiveScale { s });
    }
    expect_len(p, u.len())?;
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(EntropyError::PositivityViolation { index, value });
    }
    let w = quad_weights(p);
    let mass = kernel::dot(u, &w);
    if mass > 1.0 + MASS_TOL {
        return Err(EntropyError::InvalidDensity { mass });
    }
    let r = scalar_curvature(p)?;
    let gsq = grad_sq(p, u);
    let nf = p.n as f64;
    let log_norm = 0.5 * nf * (4.0 * PI * s).ln();
    let mut total = 0.0;
    for i in 0..u.len() {
        if u[i] <= U_FLOOR {
            continue;
        }
        let grad_term = gsq[i] / u[i];
        let f = -u[i].ln() - log_norm;
        total += (s * (grad_term + r[i] * u[i]) + (f - nf) * u[i]) * w[i];
    }
    Ok(total)
}

/// Min/max of f over carried nodes and its u dμ-weighted variance.
pub(crate) fn weighted_f_stats(u: &[f64], w: &[f64], f: &[f64]) -> (f64, f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut sq = 0.0;
    for i in 0..u.len() {
        if u[i] <= U_FLOOR {
            continue;
        }
        lo = lo.min(f[i]);
        hi = hi.max(f[i]);
        let uw = u[i] * w[i];
        mass += uw;
        mean += f[i] * uw;
        sq += f[i] * f[i] * uw;
    }
    if mass > 0.0 {
        mean /= mass;
        sq /= mass;
    }
    (lo, hi, (sq - mean * mean).max(0.0))
}

fn floored_potential(u: &[f64], s: f64, n: usize) -> Vec<f64> {
    let log_norm = 0.5 * n as f64 * (4.0 * PI * s).ln();
    u.iter().map(|&v| -v.max(U_FLOOR).ln() - log_norm).collect()
}

/// Entropy trace of a conjugate kernel along increasing backward times.
///
/// The backward time is measured from the kernel source: slice k carries
/// s = t_src − times[k], and every requested s must match a stored slice.
/// W, the residual integral −2s∫|Ric + Hess f − g/2s|²u dμ, and a numeric
/// dW/ds from the W samples are reported side by side; the two derivative
/// columns agree within [`DERIV_MATCH_REL`] on smooth kernels, which checks
/// the entropy quadrature and the curvature/Hessian reduction against each
/// other through entirely different formulas.
pub fn w_monotonicity(
    tr: &FlowTrajectory,
    kf: &KernelField,
    s_grid: &[f64],
) -> Result<EntropyTrace, EntropyError> {
    if kf.direction != KernelDirection::Conjugate {
        return Err(EntropyError::InvalidRequest(
            "monotonicity trace needs a conjugate kernel".into(),
        ));
    }
    if s_grid.is_empty() {
        return Err(EntropyError::InvalidRequest("empty s grid".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EntropyError::InvalidRequest(
            "s grid must be strictly increasing".into(),
        ));
    }
    let n = kf.n;
    let len = s_grid.len();
    let mut w_values = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    let mut f_min = Vec::with_capacity(len);
    let mut f_max = Vec::with_capacity(len);
    let mut f_variance = Vec::with_capacity(len);
    for &s in s_grid {
        if !(s > 0.0) {
            return Err(EntropyError::NonpositiveScale { s });
        }
        let t = kf.source_time - s;
        let k = (0..kf.num_times())
            .min_by(|&i, &j| {
                (kf.times[i] - t)
                    .abs()
                    .total_cmp(&(kf.times[j] - t).abs())
            })
            .ok_or(EntropyError::SliceNotStored { s })?;
        if (kf.times[k] - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(EntropyError::SliceNotStored { s });
        }
        let p = tr.metric_at(t)?;
        let u = soliton::slice_density(kf, k);
        let f = floored_potential(&u, s, n);
        w_values.push(w_entropy(&p, &u, s)?);
        let mismatch = soliton::soliton_residual(&p, &f, s, &u).map_err(Box::new)?;
        residuals.push(-2.0 * s * mismatch);
        let (lo, hi, var) = weighted_f_stats(&u, &quad_weights(&p), &f);
        f_min.push(lo);
        f_max.push(hi);
        f_variance.push(var);
    }
    let mut dw_numeric = vec![0.0; len];
    for i in 0..len {
        let (a, b) = match i {
            0 => (0, 1.min(len - 1)),
            i if i == len - 1 => (len - 2, len - 1),
            i => (i - 1, i + 1),
        };
        if a != b {
            dw_numeric[i] = (w_values[b] - w_values[a]) / (s_grid[b] - s_grid[a]);
        }
    }
    Ok(EntropyTrace {
        s_grid: s_grid.to_vec(),
        w_values,
        residuals,
        dw_numeric,
        f_min,
        f_max,
        f_variance,
    })
}

/// Smallest eigenvalue of −4Δ + R in the measure-weighted inner product,
/// by shifted inverse power iteration on the finite-volume discretization.
///
/// Flat tori return 0 exactly: R vanishes and the constant field is a
/// discrete eigenvector of the periodic Laplacian.  Constant-R spheres are
/// likewise exact, since the flux form annihilates constants.
pub fn lambda0(p: &WarpedProfile) -> Result<f64, EntropyError> {
    if p.kind == ProfileKind::FlatTorus {
        return Ok(0.0);
    }
    let m = p.grid_m;
    let w = kernel::fv_weights(p);
    let t = kernel::fv_fluxes(p);
    let r = p.curvature()?.r;
    let apply_a = |v: &[f64]| -> Vec<f64> {
        (0..=m)
            .map(|i| {
                let mut acc = r[i] * w[i] * v[i];
                if i > 0 {
                    acc += 4.0 * t[i - 1] * (v[i] - v[i - 1]);
                }
                if i < m {
                    acc += 4.0 * t[i] * (v[i] - v[i + 1]);
                }
                acc
            })
            .collect()
    };
    let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
    // λ₀ ≥ min R because the gradient term is nonnegative, so this shift
    // keeps A − σW positive definite.
    let sigma = r_min - 0.1 * (1.0 + r_min.abs());
    let mut sub = vec![0.0; m + 1];
    let mut sup = vec![0.0; m + 1];
    let mut diag = vec![0.0; m + 1];
    for i in 0..=m {
        if i > 0 {
            sub[i] = -4.0 * t[i - 1];
            diag[i] += 4.0 * t[i - 1];
        }
        if i < m {
            sup[i] = -4.0 * t[i];
            diag[i] += 4.0 * t[i];
        }
        diag[i] += (r[i] - sigma) * w[i];
    }
    let mut v = vec![1.0; m + 1];
    let norm = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| xi * xi * wi)
            .sum::<f64>()
            .sqrt()
    };
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut residual = f64::INFINITY;
    for _ in 0..EIG_MAX_ITER {
        let rhs: Vec<f64> = v.iter().zip(&w).map(|(vi, wi)| vi * wi).collect();
        let x = kernel::thomas(&sub, &diag, &sup, &rhs);
        let nx = norm(&x);
        for (vi, xi) in v.iter_mut().zip(&x) {
            *vi = xi / nx;
        }
        let av = apply_a(&v);
        let lam: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        residual = (0..=m)
            .map(|i| {
                let d = av[i] - lam * w[i] * v[i];
                d * d / w[i]
            })
            .sum::<f64>()
            .sqrt();
        if residual <= EIG_TOL * lam.abs().max(1.0) {
            return Ok(lam);
        }
    }
    Err(EntropyError::ConvergenceFailure { residual })
}

fn euclid_offset(n: usize) -> f64 {
    n as f64 * (1.0 + 0.5 * (4.0 * PI).ln())
}

fn normalized_trial(
    v: &[f64],
    w: &[f64],
    touched: &mut bool,
) -> Result<Vec<f64>, EntropyError> {
    let nrm2: f64 = v.iter().zip(w).map(|(vi, wi)| vi * vi * wi).sum();
    if !(nrm2 > 0.0) {
        return Err(EntropyError::InvalidRequest(
            "trial function vanishes identically".into(),
        ));
    }
    if (nrm2 - 1.0).abs() <= 1e-9 {
        return Ok(v.to_vec());
    }
    *touched = true;
    let inv = nrm2.sqrt().recip();
    Ok(v.iter().map(|x| x * inv).collect())
}

/// Empirical check of the uniform log-Sobolev inequality over a trial corpus
/// and an ε sweep, in fitter mode: β is pinned to 0 (the theorem's case
/// λ₀ > 0) and the minimal α making every margin nonnegative is reported
/// against `alpha_cap`.  Fitted α is relative to the sharp Euclidean
/// baseline — see the module header.
pub fn log_sobolev_check(
    p: &WarpedProfile,
    t: f64,
    eps_grid: &[f64],
    trials: &[Vec<f64>],
    alpha_cap: f64,
) -> Result<CheckReport, EntropyError> {
    if !(t >= 0.0) {
        return Err(EntropyError::InvalidRequest(format!(
            "flow time must be nonnegative, got t = {t}"
        )));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(EntropyError::InvalidRequest(
            "epsilon sweep must be nonempty and positive".into(),
        ));
    }
    if trials.is_empty() {
        return Err(EntropyError::InvalidRequest("empty trial corpus".into()));
    }
    let mut rep = CheckReport::new("log_sobolev");
    if p.n < 3 {
        rep.note("n < 3 run: extrapolation beyond the n >= 3 statement");
    }
    let lam0 = lambda0(p)?;
    let beta = 0.0;
    if lam0 <= 1e-12 {
        rep.note("lambda0 <= 0: beta pinned to 0, alpha absorbs the defect");
    }
    let w = quad_weights(p);
    let r = scalar_curvature(p)?;
    let nf = p.n as f64;
    let offset = euclid_offset(p.n);
    let mut touched = false;
    let mut alpha_fit = f64::NEG_INFINITY;
    for v_raw in trials {
        expect_len(p, v_raw.len())?;
        let v = normalized_trial(v_raw, &w, &mut touched)?;
        let lhs: f64 = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| {
                let vv = vi * vi;
                if vv > 0.0 {
                    vv * vv.ln() * wi
                } else {
                    0.0
                }
            })
            .sum();
        let q = 4.0 * dirichlet_form(p, &v)
            + v.iter()
                .zip(&r)
                .zip(&w)
                .map(|((vi, ri), wi)| ri * vi * vi * wi)
                .sum::<f64>();
        for &eps in eps_grid {
            let alpha_req =
                lhs - eps * eps * q + nf * eps.ln() + offset - (t + eps * eps) * beta;
            rep.observe(alpha_req);
            alpha_fit = alpha_fit.max(alpha_req);
        }
    }
    if touched {
        rep.note("trials auto-normalized to unit L2 mass");
    }
    rep.set_constant("lambda0", lam0);
    rep.set_constant("beta", beta);
    rep.set_constant("alpha", alpha_fit);
    rep.observe_margin(alpha_cap - alpha_fit);
    rep.pass = alpha_fit.is_finite() && alpha_fit <= alpha_cap;
    Ok(rep)
}

/// Empirical check of the Sobolev imbedding
/// (∫v^{2n/(n−2)})^{(n−2)/n} ≤ A∫(|∇v|² + ¼Rv²) + B∫v² in fitter mode:
/// B = 0 (which requires R > 0 pointwise) and the minimal A over the corpus
/// is reported against `a_cap`.
pub fn sobolev_check(
    p: &WarpedProfile,
    trials: &[Vec<f64>],
    a_cap: f64,
) -> Result<CheckReport, EntropyError> {
    if p.n < 3 {
        return Err(EntropyError::UnsupportedDimension { n: p.n });
    }
    if trials.is_empty() {
        return Err(EntropyError::InvalidRequest("empty trial corpus".into()));
    }
    let r = scalar_curvature(p)?;
    let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
    if !(r_min > 0.0) {
        return Err(EntropyError::InvalidRequest(format!(
            "fitter mode pins B = 0, which needs R > 0 pointwise (min R = {r_min})"
        )));
    }
    let w = quad_weights(p);
    let nf = p.n as f64;
    let exponent = 2.0 * nf / (nf - 2.0);
    let mut rep = CheckReport::new("sobolev");
    let mut touched = false;
    let mut a_fit = f64::NEG_INFINITY;
    for v_raw in trials {
        expect_len(p, v_raw.len())?;
        let v = normalized_trial(v_raw, &w, &mut touched)?;
        let lhs = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| vi.abs().powf(exponent) * wi)
            .sum::<f64>()
            .powf((nf - 2.0) / nf);
        let q = dirichlet_form(p, &v)
            + 0.25
                * v.iter()
                    .zip(&r)
                    .zip(&w)
                    .map(|((vi, ri), wi)| ri * vi * vi * wi)
                    .sum::<f64>();
        let ratio = lhs / q;
        rep.observe(ratio);
        a_fit = a_fit.max(ratio);
    }
    if touched {
        rep.note("trials auto-normalized to unit L2 mass");
    }
    rep.set_constant("A", a_fit);
    rep.set_constant("B", 0.0);
    rep.observe_margin(a_cap - a_fit);
    rep.pass = a_fit.is_finite() && a_fit <= a_cap;
    Ok(rep)
}

/// Fixed-seed trial corpus on a radial profile: a constant, eight low-mode
/// cosine combinations (polynomials in cos θ, hence Laplace eigenfunction
/// combinations on round spheres), three off-center bumps, and
/// `random_count` band-limited fields with seeded coefficients.
pub fn trial_corpus(
    p: &WarpedProfile,
    random_count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, EntropyError> {
    if p.kind != ProfileKind::WarpedSphere {
        return Err(EntropyError::InvalidRequest(
            "the corpus generator covers radial models".into(),
        ));
    }
    let m = p.grid_m;
    let xs: Vec<f64> = (0..=m).map(|i| i as f64 * p.h()).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    out.push(vec![1.0; m + 1]);
    for k in 1..=8usize {
        let field = if k <= 4 {
            xs.iter().map(|&x| (k as f64 * PI * x).cos()).collect()
        } else {
            let (k1, k2) = ((k - 4) as f64, (k - 3) as f64);
            xs.iter()
                .map(|&x| (k1 * PI * x).cos() + 0.5 * (k2 * PI * x).cos())
                .collect()
        };
        out.push(field);
    }
    for &(c, width) in &[(0.3, 0.08), (0.55, 0.12), (0.8, 0.06)] {
        out.push(
            xs.iter()
                .map(|&x| (-((x - c) / width) * ((x - c) / width)).exp())
                .collect(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_count {
        let coeffs: Vec<f64> = (0..=12)
            .map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64))
            .collect();
        out.push(
            xs.iter()
                .map(|&x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * (k as f64 * PI * x).cos())
                        .sum()
                })
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::exact_sphere_trajectory;
    use crate::geometry::{make_flat_torus, make_round_sphere};

    fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect()
    }

    #[test]
    fn potential_inversion_matches_closed_forms() {
        let s = 0.7;
        let u = vec![1.0 / (4.0 * PI * s); 5];
        for f in f_from_u(&u, s, 2).unwrap() {
            assert!(f.abs() < 1e-12, "flat normalization should give f = 0, got {f}");
        }

        // Uniform density on S²(r): f ≡ ln(r²/s).
        let (r2, s) = (2.0, 0.5);
        let u = vec![1.0 / (4.0 * PI * r2); 9];
        for f in f_from_u(&u, s, 2).unwrap() {
            assert!(
                (f - (r2 / s).ln()).abs() < 1e-12,
                "uniform sphere potential: got {f}, want {}",
                (r2 / s).ln()
            );
        }

        assert!(matches!(
            f_from_u(&[0.3, 0.0, 0.3], 1.0, 2),
            Err(EntropyError::PositivityViolation { index: 1, .. })
        ));
        assert!(matches!(
            f_from_u(&[0.3], 0.0, 2),
            Err(EntropyError::NonpositiveScale { .. })
        ));
    }

    #[test]
    fn w_entropy_of_uniform_densities_on_round_spheres() {
        // W(S²(r), uniform, s) = 2s/r² + ln(r²/s) − 2; at r² = 2s this is
        // ln 2 − 1.  The exact continuum density 1/(4πr²) has discrete mass
        // 1 − O(h²) from the cell-volume quadrature, which bounds the error.
        let cases = [(2.0_f64, 1.0_f64), (3.0, 1.0), (2.0, 0.6)];
        for (r2, s) in cases {
            let p = make_round_sphere(2, r2.sqrt(), 256, 0.0).unwrap();
            let u = vec![1.0 / (4.0 * PI * r2); 257];
            let w = w_entropy(&p, &u, s).unwrap();
            let want = 2.0 * s / r2 + (r2 / s).ln() - 2.0;
            assert!(
                (w - want).abs() < 1e-5,
                "W(r² = {r2}, s = {s}) = {w}, want {want}"
            );
        }
        let p = make_round_sphere(2, 2.0_f64.sqrt(), 256, 0.0).unwrap();
        let heavy = vec![2.1 / (4.0 * PI * 2.0); 257];
        assert!(matches!(
            w_entropy(&p, &heavy, 1.0),
            Err(EntropyError::InvalidDensity { .. })
        ));
    }

    #[test]
    fn gaussian_on_a_large_torus_is_entropy_neutral_at_matched_scale() {
        // u = (4πs)^{-n/2} e^{-|x|²/(4s)} (wrapped) has W(·, u, s) = 0 at the
        // matched scale and W = (n/2)(x − 1 + ln x) at scale ratio x.
        let s = 1.0;
        let p = make_flat_torus(&[20.0, 20.0], 64, 0.0).unwrap();
        let h = 20.0 / 64.0;
        let axis: Vec<f64> = (0..64)
            .map(|j| kernel::wrapped_gauss_1d(j as f64 * h, 20.0, s))
            .collect();
        let u = torus_product_field(&[axis.clone(), axis]);

        let w0 = w_entropy(&p, &u, s).unwrap();
        assert!(w0.abs() < 1e-3, "matched-scale Gaussian entropy {w0} not ~ 0");

        // Evaluating the same density at scale s·x gives
        // W = (n/2)(x − 1 − ln x) ≥ 0; here n = 2.
        let x = 1.3;
        let w1 = w_entropy(&p, &u, s * x).unwrap();
        let closed = x - 1.0 - x.ln();
        assert!(
            (w1 - closed).abs() < 1e-3,
            "mismatched-scale entropy {w1}, want {closed}"
        );
    }

    #[test]
    fn monotonicity_trace_on_the_ancient_sphere_kernel() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-10.0, -0.5], 256).unwrap();
        let s_grid: Vec<f64> = (0..13).map(|i| 1.0 + 0.25 * i as f64).collect();
        let times: Vec<f64> = s_grid.iter().map(|s| -s).collect();
        let kf = kernel::spectral_conjugate_field(&tr, 0.0, 0.0, &times).unwrap();
        let trace = w_monotonicity(&tr, &kf, &s_grid).unwrap();

        assert_eq!(trace.len(), 13);
        for k in 0..trace.len() {
            assert!(
                trace.w_values[k] < 0.0,
                "sphere kernel entropy W({}) = {} should be negative",
                s_grid[k],
                trace.w_values[k]
            );
            assert!(trace.residuals[k] <= 0.0, "residuals are signed ≤ 0");
            assert!(trace.f_variance[k] > 0.0);
        }
        for k in 1..trace.len() {
            assert!(
                trace.w_values[k] < trace.w_values[k - 1],
                "W must decrease strictly along s on the shrinking sphere"
            );
        }
        let mismatch = trace.derivative_mismatch();
        assert!(
            mismatch <= 1.0,
            "numeric dW/ds disagrees with the residual integral: worst {mismatch:.3} x allowance"
        );
    }

    #[test]
    fn monotonicity_trace_on_the_flat_control_is_null() {
        let tr = crate::flow::exact_torus_trajectory(&[40.0, 40.0], &[-4.0, 0.5], 128).unwrap();
        let s_grid = [0.5, 1.0, 1.5, 2.0, 2.5];
        let times: Vec<f64> = s_grid.iter().map(|s| -s).collect();
        let kf =
            kernel::exact_torus_kernel_field(&tr, 0.0, &times, KernelDirection::Conjugate)
                .unwrap();
        let trace = w_monotonicity(&tr, &kf, &s_grid).unwrap();
        for k in 0..trace.len() {
            assert!(
                trace.w_values[k].abs() < 2e-4,
                "flat-control W({}) = {} should vanish",
                s_grid[k],
                trace.w_values[k]
            );
            assert!(
                trace.residuals[k].abs() < 1e-6,
                "flat-control residual {} should vanish",
                trace.residuals[k]
            );
        }
    }

    #[test]
    fn lambda0_reproduces_constant_curvature_values() {
        let s2 = make_round_sphere(2, 1.0, 256, 0.0).unwrap();
        let got = lambda0(&s2).unwrap();
        assert!((got - 2.0).abs() < 1e-6, "lambda0(S2(1)) = {got}, want 2");

        let s3 = make_round_sphere(3, 2.0, 256, 0.0).unwrap();
        let got = lambda0(&s3).unwrap();
        assert!((got - 1.5).abs() < 1e-6, "lambda0(S3(2)) = {got}, want 1.5");

        let torus = make_flat_torus(&[5.0, 7.0], 32, 0.0).unwrap();
        assert_eq!(lambda0(&torus).unwrap(), 0.0);

        // A perturbed profile: λ₀ stays inside [min R, volume average of R].
        let p = crate::flow::make_perturbed_sphere(2, 1.0, 128, 0.05, 0.0).unwrap();
        let r = p.curvature().unwrap().r;
        let w = quad_weights(&p);
        let (r_min, mean) = (
            r.iter().copied().fold(f64::INFINITY, f64::min),
            kernel::dot(&r, &w) / w.iter().sum::<f64>(),
        );
        let got = lambda0(&p).unwrap();
        assert!(
            got >= r_min - 1e-9 && got <= mean + 1e-9,
            "lambda0 = {got} outside [{r_min}, {mean}]"
        );
    }

    #[test]
    fn log_sobolev_alpha_matches_the_constant_trial_closed_form() {
        // Constant trial on S³(1): LHS = −ln(2π²), Q = 6, so the required
        // α(ε) = −ln(2π²) − 6ε² + 3 ln ε + 3(1 + ln√(4π)) relative to the
        // Euclidean baseline.  The fitted α is the max over the sweep.
        let p = make_round_sphere(3, 1.0, 128, 0.0).unwrap();
        let eps_grid = log_grid(1e-2, 0.5, 9);
        let trials = vec![vec![1.0; 129]];
        let rep = log_sobolev_check(&p, 0.05, &eps_grid, &trials, DEFAULT_ALPHA_CAP).unwrap();

        // The discrete closed form is exact: the normalized constant trial
        // has LHS = −ln(discrete volume) and Q = 6.  The discrete volume
        // itself must sit within the quadrature bias of 2π².
        let vol: f64 = quad_weights(&p).iter().sum();
        assert!(
            (vol / (2.0 * PI * PI) - 1.0).abs() < 2e-4,
            "discrete S³ volume {vol} vs 2π² = {}",
            2.0 * PI * PI
        );
        let closed = |v: f64| {
            eps_grid
                .iter()
                .map(|&e| -v.ln() - 6.0 * e * e + 3.0 * e.ln() + euclid_offset(3))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let alpha = rep.constant("alpha").unwrap();
        let want = closed(vol);
        assert!(
            (alpha - want).abs() < 1e-6,
            "fitted alpha {alpha}, discrete closed form {want}"
        );
        let continuum = closed(2.0 * PI * PI);
        assert!(
            (alpha - continuum).abs() < 1e-3,
            "fitted alpha {alpha}, continuum closed form {continuum}"
        );
        assert_eq!(rep.constant("beta"), Some(0.0));
        assert!((rep.constant("lambda0").unwrap() - 6.0).abs() < 1e-3);
        assert!(rep.pass && rep.margin > 0.0);
    }

    #[test]
    fn log_sobolev_full_corpus_and_extrapolation_label() {
        let p = make_round_sphere(3, 1.0, 128, 0.0).unwrap();
        let trials = trial_corpus(&p, 4, 7).unwrap();
        let eps_grid = log_grid(1e-2, 0.5, 9);
        let rep = log_sobolev_check(&p, 0.05, &eps_grid, &trials, DEFAULT_ALPHA_CAP).unwrap();
        assert!(rep.pass, "corpus run failed: {rep}");
        assert_eq!(rep.samples, trials.len() * eps_grid.len());

        let s2 = make_round_sphere(2, 1.0, 64, 0.0).unwrap();
        let rep2 = log_sobolev_check(&s2, 0.0, &[0.1], &[vec![1.0; 65]], 50.0).unwrap();
        assert!(
            rep2.notes.contains("extrapolation"),
            "n = 2 runs must be labeled: {}",
            rep2.notes
        );
    }

    #[test]
    fn gaussian_trial_saturates_the_euclidean_baseline() {
        // On a flat model the fitted α is 0 (sharp) when the sweep contains
        // the optimum ε² = s of a matched Gaussian trial.
        let s0 = 1.25;
        let p = make_flat_torus(&[20.0, 20.0, 20.0], 48, 0.0).unwrap();
        let h = 20.0 / 48.0;
        let axis: Vec<f64> = (0..48)
            .map(|j| kernel::wrapped_gauss_1d(j as f64 * h, 20.0, s0))
            .collect();
        let u = torus_product_field(&[axis.clone(), axis.clone(), axis]);
        let v: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();

        let eps_grid = [0.6, 0.9, s0.sqrt(), 1.4, 2.0];
        let rep = log_sobolev_check(&p, 0.1, &eps_grid, &[v], 0.01).unwrap();
        let alpha = rep.constant("alpha").unwrap();
        assert!(
            alpha.abs() < 1e-3,
            "Gaussian sharpness: fitted alpha {alpha} should vanish"
        );
        assert!(rep.pass);
        assert!(
            rep.notes.contains("beta pinned"),
            "flat model has lambda0 = 0: {}",
            rep.notes
        );
    }

    #[test]
    fn sobolev_fitter_matches_the_constant_trial_and_is_scale_stable() {
        let p = make_round_sphere(3, 1.0, 128, 0.0).unwrap();
        let rep = sobolev_check(&p, &[vec![1.0; 129]], DEFAULT_SOBOLEV_CAP).unwrap();
        let want = (2.0 * PI * PI).powf(-2.0 / 3.0) / 1.5;
        let a = rep.constant("A").unwrap();
        assert!(
            (a - want).abs() < 1e-5,
            "constant-trial A = {a}, closed form {want}"
        );
        assert_eq!(rep.constant("B"), Some(0.0));

        // Homogeneity: scaling a trial must not move the fitted constant.
        let scaled: Vec<f64> = vec![3.0; 129];
        let rep2 = sobolev_check(&p, &[vec![1.0; 129], scaled], DEFAULT_SOBOLEV_CAP).unwrap();
        assert!(
            (rep2.ratio_max - rep2.ratio_min).abs() < 1e-12,
            "scaled copies must give identical ratios"
        );

        // Uniformity along the flow: the fitted A over a fixed corpus stays
        // within 20% between snapshots of the shrinking sphere.
        let tr = exact_sphere_trajectory(3, 0.25, &[-0.001, 0.12], 128).unwrap();
        let corpus = trial_corpus(&tr.profiles[0], 4, 11).unwrap();
        let a0 = sobolev_check(&tr.metric_at(0.0).unwrap(), &corpus, 100.0)
            .unwrap()
            .constant("A")
            .unwrap();
        let a1 = sobolev_check(&tr.metric_at(0.12).unwrap(), &corpus, 100.0)
            .unwrap()
            .constant("A")
            .unwrap();
        assert!(
            (a0 / a1 - 1.0).abs() < 0.2,
            "fitted A drifted: {a0} at t = 0 vs {a1} at t = 0.12"
        );

        assert!(matches!(
            sobolev_check(&make_round_sphere(2, 1.0, 64, 0.0).unwrap(), &[vec![1.0; 65]], 1.0),
            Err(EntropyError::UnsupportedDimension { n: 2 })
        ));
    }

    #[test]
    fn trial_corpus_is_deterministic_and_sized() {
        let p = make_round_sphere(2, 1.0, 64, 0.0).unwrap();
        let a = trial_corpus(&p, 5, 42).unwrap();
        let b = trial_corpus(&p, 5, 42).unwrap();
        assert_eq!(a.len(), 1 + 8 + 3 + 5);
        assert_eq!(a, b, "same seed must reproduce the corpus exactly");
        let c = trial_corpus(&p, 5, 43).unwrap();
        assert_ne!(a, c, "different seeds must vary the random family");
    }
}
