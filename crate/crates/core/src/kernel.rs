//! Fundamental solutions of the heat and conjugate heat equations along a
//! flow of model geometries.
//!
//! The kernel G(x₀,l; y,t) is treated in two slots. As a function of (y,t),
//! t > l, it solves the forward heat equation on the evolving geometry,
//! `∂t u = Δ_{g(t)} u`; its mass ∫u dμ_{g(t)} then obeys
//! `d/dt ∫u dμ = -∫R u dμ` because the Ricci-flow measure shrinks at rate R.
//! As a function of the first slot at earlier times it solves the conjugate
//! equation `∂t v = -Δv + Rv`, whose mass ∫v dμ is conserved — the
//! normalization ∫G(x,l;y,t) dμ_{g(l)}(x) = 1.
//!
//! Two independent routes compute the same kernels:
//!
//! * a spectral series on exact round shrinking spheres (n = 2, 3), where
//!   eigenfunctions are carried along the flow and the eigenvalue integral
//!   collapses to `Θ = ∫ r(τ)⁻² dτ = ln(r_l²/r_t²) / (2(n-1))`,
//! * a finite-volume Crank–Nicolson march on the reduced radial profile
//!   (or per torus axis), usable on any trajectory.
//!
//! The FV scheme is built for exact discrete conservation: node weights are
//! cell masses, interface fluxes telescope, and the conjugate reaction term
//! is the discrete measure-change rate `(w' - w)/(dτ·w̄)` rather than the
//! pointwise scalar curvature. On round trajectories the weights at
//! different times are proportional, which makes the forward-mass law
//! m(t) = (r_t/r_l)ⁿ and the conjugate conservation law exact to rounding.
//!
//! Delta seeding: the march starts at `source ± ε` from the cell-averaged
//! exact kernel (spectral series or wrapped Gaussian) — a Gaussian surrogate
//! of width √(2ε) on non-exact trajectories — scaled so the conserved mass
//! is exactly 1. ε defaults to 50 grid cells of diffusion time, keeping the
//! seed resolved; re-running at ε/2 is the standard sensitivity audit.

use crate::fd;
use crate::flow::{FlowError, FlowTrajectory};
use crate::geometry::{unit_sphere_area, GeometryError, ProfileKind, WarpedProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed offset in units of the squared arclength spacing.
pub const SEED_EPS_CELLS: f64 = 50.0;
/// Relative undershoot beyond which a solve is declared unstable.
pub const UNDERSHOOT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid interval: need source time {l} < evaluation time {t}")]
    InvalidInterval { l: f64, t: f64 },
    #[error("series not convergent: Θ = {big_theta:.3e} (zero-span kernel is a delta)")]
    SeriesNotConvergent { big_theta: f64 },
    #[error("solver instability at t = {time}: undershoot {undershoot:.3e} of max")]
    SolverInstability { time: f64, undershoot: f64 },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which heat equation the stored field solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelDirection {
    /// u(·,t) for t > source time, ∂t u = Δu; mass decays with the measure.
    Forward,
    /// v(·,s) for s < source time, ∂t v = -Δv + Rv; mass is conserved.
    Conjugate,
}

/// Solver knobs; `None` picks the documented defaults.
#[derive(Debug, Clone, Default)]
pub struct KernelOptions {
    /// Seed offset ε; default 50·(arclength spacing)², capped at a quarter
    /// of the gap to the first output time.
    pub seed_eps: Option<f64>,
    /// Initial step; default ε/20.
    pub dt_init: Option<f64>,
    /// Step-size cap after the geometric ramp; default span/400.
    pub dt_max: Option<f64>,
}

/// Kernel values on the model grid at a list of output times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelField {
    pub n: usize,
    pub direction: KernelDirection,
    /// Source pole coordinate (0 or 1) on spheres; 0 on tori (the origin).
    pub source_x: f64,
    pub source_time: f64,
    pub seed_eps: f64,
    /// Output times: increasing for forward fields, decreasing for
    /// conjugate fields.
    pub times: Vec<f64>,
    pub data: KernelData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelData {
    Radial {
        grid_m: usize,
        /// values[k][i]: kernel at node i, time k. Raw solver output —
        /// negatives within the undershoot tolerance are kept for audits.
        values: Vec<Vec<f64>>,
        /// Finite-volume cell masses of g(times[k]).
        measures: Vec<Vec<f64>>,
        /// Cell masses of g(source_time), the conjugate-conservation weights.
        source_measures: Vec<f64>,
    },
    TorusProduct {
        sides: Vec<f64>,
        cells: usize,
        /// axes[a][k][j]: 1-D factor on axis a at time k, node j (the node
        /// coordinate is j·side/cells, displacement from the source).
        axes: Vec<Vec<Vec<f64>>>,
    },
}

impl KernelField {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    /// Mass in the evaluation-time measure Σ u dμ_{g(t_k)}.
    pub fn forward_mass(&self, k: usize) -> f64 {
        match &self.data {
            KernelData::Radial {
                values, measures, ..
            } => dot(&values[k], &measures[k]),
            KernelData::TorusProduct {
                sides,
                cells,
                axes,
            } => axes
                .iter()
                .zip(sides)
                .map(|(ax, side)| ax[k].iter().sum::<f64>() * side / *cells as f64)
                .product(),
        }
    }

    /// Mass in the measure in which the field is conserved: the source-time
    /// measure for forward fields (the conjugate-conservation audit), the
    /// evaluation-time measure for conjugate fields. Equals 1 by seed
    /// construction; exactly conserved on homogeneous models.
    pub fn backward_mass(&self, k: usize) -> f64 {
        match &self.data {
            KernelData::Radial {
                values,
                measures,
                source_measures,
                ..
            } => match self.direction {
                KernelDirection::Forward => dot(&values[k], source_measures),
                KernelDirection::Conjugate => dot(&values[k], &measures[k]),
            },
            KernelData::TorusProduct { .. } => self.forward_mass(k),
        }
    }

    /// Node values at output time k (radial fields).
    pub fn radial_values(&self, k: usize) -> &[f64] {
        match &self.data {
            KernelData::Radial { values, .. } => &values[k],
            KernelData::TorusProduct { .. } => panic!("radial_values on a torus field"),
        }
    }

    /// Cell masses at output time k (radial fields).
    pub fn radial_measures(&self, k: usize) -> &[f64] {
        match &self.data {
            KernelData::Radial { measures, .. } => &measures[k],
            KernelData::TorusProduct { .. } => panic!("radial_measures on a torus field"),
        }
    }

    /// Values clamped to zero for reporting; the raw field may undershoot
    /// within the declared tolerance.
    pub fn clamped_values(&self, k: usize) -> Vec<f64> {
        self.radial_values(k).iter().map(|v| v.max(0.0)).collect()
    }

    /// Kernel at polar angle θ from the source (round profiles, where the
    /// node angle is π·x). Linear interpolation between nodes.
    pub fn value_at_angle(&self, k: usize, theta: f64) -> f64 {
        let values = self.radial_values(k);
        let m = values.len() - 1;
        let pos = (theta / std::f64::consts::PI).clamp(0.0, 1.0) * m as f64;
        let i = (pos.floor() as usize).min(m - 1);
        let frac = pos - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }

    /// Torus kernel at a displacement from the source, as the product of
    /// per-axis factors (periodic linear interpolation on each axis).
    pub fn torus_value_at(&self, k: usize, displacement: &[f64]) -> f64 {
        match &self.data {
            KernelData::TorusProduct {
                sides,
                cells,
                axes,
            } => {
                assert_eq!(displacement.len(), axes.len());
                let mut prod = 1.0;
                for (a, ax) in axes.iter().enumerate() {
                    let h = sides[a] / *cells as f64;
                    let pos = displacement[a].rem_euclid(sides[a]) / h;
                    let j = (pos.floor() as usize).min(*cells - 1);
                    let frac = pos - j as f64;
                    let next = (j + 1) % *cells;
                    prod *= ax[k][j] * (1.0 - frac) + ax[k][next] * frac;
                }
                prod
            }
            KernelData::Radial { .. } => panic!("torus_value_at on a radial field"),
        }
    }
}

pub(crate) fn dot(u: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(w).map(|(a, b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// Spectral series on exact round spheres
// ---------------------------------------------------------------------------

/// Eigenvalue integral Θ = ∫_l^t r(τ)⁻² dτ on the exact shrinking sphere.
pub fn spectral_big_theta(tr: &FlowTrajectory, l: f64, t: f64) -> Result<f64, KernelError> {
    let (rl2, rt2) = exact_radii_sq(tr, l, t)?;
    Ok((rl2 / rt2).ln() / (2.0 * (tr.n() as f64 - 1.0)))
}

fn exact_radii_sq(tr: &FlowTrajectory, l: f64, t: f64) -> Result<(f64, f64), KernelError> {
    if !tr.exact || tr.kind() != ProfileKind::WarpedSphere {
        return Err(KernelError::UnsupportedModel(
            "spectral kernel needs an exact round-sphere trajectory".into(),
        ));
    }
    if !(l < t) {
        return Err(KernelError::InvalidInterval { l, t });
    }
    let nf = tr.n() as f64;
    let rt2 = 2.0 * (nf - 1.0) * (tr.t0 - t);
    if rt2 <= 0.0 {
        return Err(KernelError::InvalidInterval { l, t });
    }
    let rl2 = 2.0 * (nf - 1.0) * (tr.t0 - l);
    Ok((rl2, rt2))
}

/// Multiplicity-weighted eigenfunction series Σ_k c_k(θ) e^{-λ_k Θ} with
/// λ_k = k(k+n-1); the kernel is this sum divided by Vol(g(l)).
fn series_sum(n: usize, theta: f64, big_theta: f64) -> Result<f64, KernelError> {
    if big_theta < 1e-12 {
        return Err(KernelError::SeriesNotConvergent { big_theta });
    }
    let c = theta.cos();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    // P_{k-1}, P_k (n = 2) or U_{k-1}, U_k (n = 3) recurrences.
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..400_000usize {
        if k >= 1 {
            let kf = k as f64;
            let next = match n {
                2 => ((2.0 * kf - 1.0) * c * cur - (kf - 1.0) * prev) / kf,
                3 => {
                    if k == 1 {
                        2.0 * c
                    } else {
                        2.0 * c * cur - prev
                    }
                }
                _ => {
                    return Err(KernelError::UnsupportedModel(format!(
                        "spectral series implemented for n in {{2, 3}}, got {n}"
                    )))
                }
            };
            prev = cur;
            cur = next;
        }
        let kf = k as f64;
        let decay = (-(kf * (kf + n as f64 - 1.0)) * big_theta).exp();
        let (term, bound) = match n {
            2 => ((2.0 * kf + 1.0) * cur * decay, (2.0 * kf + 1.0) * decay),
            _ => ((kf + 1.0) * cur * decay, (kf + 1.0) * (kf + 1.0) * decay),
        };
        sum += term;
        abs_sum += bound;
        if k > 3 && bound < 1e-15 * abs_sum {
            return Ok(sum);
        }
    }
    Err(KernelError::SeriesNotConvergent { big_theta })
}

/// Exact kernel on the round shrinking n-sphere (n = 2, 3) at polar angle θ
/// from the source:
///
/// ```text
/// n=2:  G = (4π r_l²)⁻¹ Σ_k (2k+1) P_k(cos θ) e^{-k(k+1)Θ}
/// n=3:  G = (2π² r_l³)⁻¹ Σ_k (k+1) U_k(cos θ) e^{-k(k+2)Θ}
/// ```
///
/// with U_k(cos θ) = sin((k+1)θ)/sin θ. The same formula serves both slots:
/// the conjugate kernel based at (x₀, t) evaluated at the earlier time l is
/// this function of (l, t, θ).
pub fn spectral_kernel_sphere(
    tr: &FlowTrajectory,
    l: f64,
    t: f64,
    theta: f64,
) -> Result<f64, KernelError> {
    let (rl2, _) = exact_radii_sq(tr, l, t)?;
    let big_theta = spectral_big_theta(tr, l, t)?;
    let n = tr.n();
    let vol_l = unit_sphere_area(n) * rl2.powf(n as f64 / 2.0);
    Ok(series_sum(n, theta, big_theta)? / vol_l)
}

/// Spectral kernel sampled at the grid nodes θ_i = π·i/M.
pub fn spectral_field(
    tr: &FlowTrajectory,
    l: f64,
    t: f64,
) -> Result<Vec<f64>, KernelError> {
    let m = tr.profiles[0].grid_m;
    (0..=m)
        .map(|i| spectral_kernel_sphere(tr, l, t, std::f64::consts::PI * i as f64 / m as f64))
        .collect()
}

// ---------------------------------------------------------------------------
// Exact torus kernel (image sums)
// ---------------------------------------------------------------------------

/// Heat kernel on a circle of the given circumference: the wrapped Gaussian
/// Σ_m (4πτ)^{-1/2} exp(-(x+m·L)²/4τ).
pub fn wrapped_gauss_1d(x: f64, side: f64, tau: f64) -> f64 {
    assert!(tau > 0.0 && side > 0.0);
    let x0 = x - side * (x / side).round();
    let phi = |y: f64| (-y * y / (4.0 * tau)).exp();
    let mut sum = phi(x0);
    for m in 1..10_000 {
        let inc = phi(x0 + m as f64 * side) + phi(x0 - m as f64 * side);
        sum += inc;
        if inc < 1e-18 * sum {
            break;
        }
    }
    sum / (4.0 * std::f64::consts::PI * tau).sqrt()
}

/// Flat-torus heat kernel: the product of per-axis wrapped Gaussians.
pub fn torus_heat_kernel(sides: &[f64], displacement: &[f64], tau: f64) -> f64 {
    assert_eq!(sides.len(), displacement.len());
    sides
        .iter()
        .zip(displacement)
        .map(|(&l, &d)| wrapped_gauss_1d(d, l, tau))
        .product()
}

// ---------------------------------------------------------------------------
// Finite-volume machinery
// ---------------------------------------------------------------------------

/// Finite-volume cell masses: w_i = ∫_cell ω b^{n-1} a dx with the fields
/// interpolated linearly inside each cell and half-cells at the poles. The
/// pole cells carry positive weight (≈ ω aⁿhⁿ/(2ⁿn)), unlike the trapezoid
/// weights of `WarpedProfile::measure_weights`, so pole kernel values enter
/// masses and quadratures.
pub fn fv_weights(p: &WarpedProfile) -> Vec<f64> {
    assert_eq!(p.kind, ProfileKind::WarpedSphere);
    let m = p.grid_m;
    let h = p.h();
    let area = unit_sphere_area(p.n - 1);
    let dens = |i: usize, j: usize, x: f64| {
        // density on the segment [x_i, x_j] with linear a, b
        let frac = (x - i as f64 * h) / h * if j > i { 1.0 } else { 0.0 };
        let b = p.b[i] + (p.b[j] - p.b[i]) * frac;
        let a = p.a[i] + (p.a[j] - p.a[i]) * frac;
        area * b.powi(p.n as i32 - 1) * a
    };
    (0..=m)
        .map(|i| {
            let mut w = 0.0;
            if i > 0 {
                let (lo, hi) = ((i as f64 - 0.5) * h, i as f64 * h);
                w += gauss_on(lo, hi, |x| dens(i - 1, i, x));
            }
            if i < m {
                let (lo, hi) = (i as f64 * h, (i as f64 + 0.5) * h);
                w += gauss_on(lo, hi, |x| dens(i, i + 1, x));
            }
            w
        })
        .collect()
}

/// Interface transmissibilities T_{i+1/2} = ω b_mid^{n-1} / (a_mid h), with
/// a and b averaged to the midpoint before powers are taken (averaging
/// b^{n-1} itself is first-order wrong at the pole for n ≥ 3).
pub(crate) fn fv_fluxes(p: &WarpedProfile) -> Vec<f64> {
    let m = p.grid_m;
    let h = p.h();
    let area = unit_sphere_area(p.n - 1);
    (0..m)
        .map(|i| {
            let b_mid = 0.5 * (p.b[i] + p.b[i + 1]);
            let a_mid = 0.5 * (p.a[i] + p.a[i + 1]);
            area * b_mid.powi(p.n as i32 - 1) / (a_mid * h)
        })
        .collect()
}

fn gauss_on(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let hw = 0.5 * (hi - lo);
    fd::gauss_legendre_5()
        .iter()
        .map(|&(x, w)| w * f(c + hw * x))
        .sum::<f64>()
        * hw
}

/// Net divergence flux Σ_faces into each cell (not yet divided by weights).
fn net_flux(u: &[f64], t: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { t[i - 1] * (u[i - 1] - u[i]) } else { 0.0 };
            let right = if i < n - 1 { t[i] * (u[i + 1] - u[i]) } else { 0.0 };
            left + right
        })
        .collect()
}

pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i < n - 1 { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Tridiagonal solve with periodic corner entries, by rank-one correction.
fn cyclic_thomas(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    corner_top: f64,
    corner_bottom: f64,
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    let gamma = -diag[0];
    let mut dd = diag.to_vec();
    dd[0] -= gamma;
    dd[n - 1] -= corner_top * corner_bottom / gamma;
    let y = thomas(sub, &dd, sup, rhs);
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = corner_bottom;
    let z = thomas(sub, &dd, sup, &uvec);
    let fact = (y[0] + corner_top * y[n - 1] / gamma)
        / (1.0 + z[0] + corner_top * z[n - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - fact * zi).collect()
}

// ---------------------------------------------------------------------------
// Radial Crank–Nicolson march
// ---------------------------------------------------------------------------

struct Ops {
    w: Vec<f64>,
    t: Vec<f64>,
}

fn ops_of(p: &WarpedProfile) -> Ops {
    Ops {
        w: fv_weights(p),
        t: fv_fluxes(p),
    }
}

/// One CN step of the forward equation ∂t u = Δu from (w0,t0) to (w1,t1).
fn cn_forward(u: &[f64], o0: &Ops, o1: &Ops, dt: f64) -> Vec<f64> {
    let n = u.len();
    let f0 = net_flux(u, &o0.t);
    let rhs: Vec<f64> = (0..n).map(|i| u[i] + 0.5 * dt * f0[i] / o0.w[i]).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let tl = if i > 0 { o1.t[i - 1] } else { 0.0 };
        let tr = if i < n - 1 { o1.t[i] } else { 0.0 };
        diag[i] = 1.0 + 0.5 * dt * (tl + tr) / o1.w[i];
        if i > 0 {
            sub[i] = -0.5 * dt * tl / o1.w[i];
        }
        if i < n - 1 {
            sup[i] = -0.5 * dt * tr / o1.w[i];
        }
    }
    thomas(&sub, &diag, &sup, &rhs)
}

/// One CN step of the conjugate equation in backward time, with the discrete
/// measure-change reaction R̃ = (w' - w)/(dτ·w̄); the choice makes
/// Σ w' v' = Σ w v exact whenever w' ∝ w (round or static models).
fn cn_conjugate(v: &[f64], o0: &Ops, o1: &Ops, dtau: f64) -> Vec<f64> {
    let n = v.len();
    let f0 = net_flux(v, &o0.t);
    let rt: Vec<f64> = (0..n)
        .map(|i| (o1.w[i] - o0.w[i]) / (dtau * 0.5 * (o0.w[i] + o1.w[i])))
        .collect();
    let rhs: Vec<f64> = (0..n)
        .map(|i| (1.0 - 0.5 * dtau * rt[i]) * v[i] + 0.5 * dtau * f0[i] / o0.w[i])
        .collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let tl = if i > 0 { o1.t[i - 1] } else { 0.0 };
        let tr = if i < n - 1 { o1.t[i] } else { 0.0 };
        diag[i] = 1.0 + 0.5 * dtau * ((tl + tr) / o1.w[i] + rt[i]);
        if i > 0 {
            sub[i] = -0.5 * dtau * tl / o1.w[i];
        }
        if i < n - 1 {
            sup[i] = -0.5 * dtau * tr / o1.w[i];
        }
    }
    thomas(&sub, &diag, &sup, &rhs)
}

fn flipped(mut p: WarpedProfile) -> WarpedProfile {
    p.a.reverse();
    p.b.reverse();
    p
}

fn check_undershoot(u: &[f64], time: f64) -> Result<(), KernelError> {
    let mx = u.iter().fold(0.0f64, |m, v| m.max(*v));
    let mn = u.iter().fold(0.0f64, |m, v| m.min(*v));
    if mn < -UNDERSHOOT_TOL * mx {
        return Err(KernelError::SolverInstability {
            time,
            undershoot: mn / mx.max(1e-300),
        });
    }
    Ok(())
}

/// Cell averages of a pointwise function against the linear-in-cell measure
/// density, matching `fv_weights` exactly: Σ (avg_i · w_i) = ∫ g dμ.
fn cell_average(p: &WarpedProfile, w: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let m = p.grid_m;
    let h = p.h();
    let area = unit_sphere_area(p.n - 1);
    let dens = |i: usize, j: usize, x: f64| {
        let frac = (x - i as f64 * h) / h * if j > i { 1.0 } else { 0.0 };
        let b = p.b[i] + (p.b[j] - p.b[i]) * frac;
        let a = p.a[i] + (p.a[j] - p.a[i]) * frac;
        area * b.powi(p.n as i32 - 1) * a
    };
    (0..=m)
        .map(|i| {
            let mut int = 0.0;
            if i > 0 {
                let (lo, hi) = ((i as f64 - 0.5) * h, i as f64 * h);
                int += gauss_on(lo, hi, |x| g(x) * dens(i - 1, i, x));
            }
            if i < m {
                let (lo, hi) = (i as f64 * h, (i as f64 + 0.5) * h);
                int += gauss_on(lo, hi, |x| g(x) * dens(i, i + 1, x));
            }
            int / w[i]
        })
        .collect()
}

struct RadialSolve {
    eps: f64,
    values: Vec<Vec<f64>>,
    measures: Vec<Vec<f64>>,
    source_measures: Vec<f64>,
}

fn march_sphere(
    tr: &FlowTrajectory,
    x0: f64,
    source_time: f64,
    targets: &[f64],
    conjugate: bool,
    opts: &KernelOptions,
) -> Result<RadialSolve, KernelError> {
    if x0 != 0.0 && x0 != 1.0 {
        return Err(KernelError::Geometry(GeometryError::NotAPole(x0)));
    }
    let flip = x0 == 1.0;
    let sign = if conjugate { -1.0 } else { 1.0 };
    if targets.is_empty() {
        return Err(KernelError::InvalidRequest("no output times".into()));
    }
    for w in targets.windows(2) {
        if sign * (w[1] - w[0]) <= 0.0 {
            return Err(KernelError::InvalidRequest(
                "output times must move monotonically away from the source".into(),
            ));
        }
    }
    if sign * (targets[0] - source_time) <= 0.0 {
        return Err(KernelError::InvalidInterval {
            l: source_time.min(targets[0]),
            t: source_time.max(targets[0]),
        });
    }
    let met = |t: f64| -> Result<WarpedProfile, KernelError> {
        let p = tr.metric_at(t)?;
        Ok(if flip { flipped(p) } else { p })
    };

    let p_src = met(source_time)?;
    let h_s = p_src.total_arclength() * p_src.h();
    let gap = (targets[0] - source_time).abs();
    let eps = opts
        .seed_eps
        .unwrap_or(SEED_EPS_CELLS * h_s * h_s)
        .min(0.25 * gap);
    let span = (targets[targets.len() - 1] - source_time).abs();
    let dt_init = opts.dt_init.unwrap_or(eps / 20.0);
    let dt_max = opts.dt_max.unwrap_or(span / 400.0).max(dt_init);

    let t_seed = source_time + sign * eps;
    let p_seed = met(t_seed)?;
    let w_seed = fv_weights(&p_seed);
    let w_src = fv_weights(&p_src);

    // Seed: cell averages of the exact (or surrogate) kernel at the offset
    // time, scaled so the conserved mass is exactly one.
    let mut u = if tr.exact {
        let (l, t) = if conjugate {
            (t_seed, source_time)
        } else {
            (source_time, t_seed)
        };
        let big_theta = spectral_big_theta(tr, l, t)?;
        let n = tr.n();
        let rl2 = exact_radii_sq(tr, l, t)?.0;
        let vol_l = unit_sphere_area(n) * rl2.powf(n as f64 / 2.0);
        cell_average(&p_seed, &w_seed, |x| {
            series_sum(n, std::f64::consts::PI * x, big_theta).unwrap_or(0.0) / vol_l
        })
    } else {
        let s = p_seed.arclength();
        let h = p_seed.h();
        let nf = p_seed.n as f64;
        let norm = (4.0 * std::f64::consts::PI * eps).powf(-nf / 2.0);
        cell_average(&p_seed, &w_seed, |x| {
            let idx = (x / h).floor().min((p_seed.grid_m - 1) as f64);
            let frac = x / h - idx;
            let d = s[idx as usize] * (1.0 - frac) + s[idx as usize + 1] * frac;
            norm * (-d * d / (4.0 * eps)).exp()
        })
    };
    let conserved = if conjugate { &w_seed } else { &w_src };
    let mass = dot(&u, conserved);
    if !(mass > 0.0) {
        return Err(KernelError::InvalidRequest(format!(
            "degenerate seed mass {mass}"
        )));
    }
    for v in &mut u {
        *v /= mass;
    }

    let mut values = Vec::with_capacity(targets.len());
    let mut measures = Vec::with_capacity(targets.len());
    let mut t_cur = t_seed;
    let mut o_cur = ops_of(&p_seed);
    let mut dt_cur = dt_init;
    for &target in targets {
        while (target - t_cur).abs() > 1e-14 * span.max(1.0) {
            let dt = dt_cur.min((target - t_cur).abs());
            let t_next = t_cur + sign * dt;
            let o_next = ops_of(&met(t_next)?);
            u = if conjugate {
                cn_conjugate(&u, &o_cur, &o_next, dt)
            } else {
                cn_forward(&u, &o_cur, &o_next, dt)
            };
            check_undershoot(&u, t_next)?;
            t_cur = t_next;
            o_cur = o_next;
            dt_cur = (dt_cur * 1.1).min(dt_max);
        }
        let mut stored_u = u.clone();
        let mut stored_w = o_cur.w.clone();
        if flip {
            stored_u.reverse();
            stored_w.reverse();
        }
        values.push(stored_u);
        measures.push(stored_w);
    }
    let mut source_measures = w_src;
    if flip {
        source_measures.reverse();
    }
    Ok(RadialSolve {
        eps,
        values,
        measures,
        source_measures,
    })
}

// ---------------------------------------------------------------------------
// Torus product march
// ---------------------------------------------------------------------------

fn march_torus(
    tr: &FlowTrajectory,
    source_time: f64,
    targets: &[f64],
    conjugate: bool,
    opts: &KernelOptions,
) -> Result<(f64, Vec<Vec<Vec<f64>>>), KernelError> {
    let p = &tr.profiles[0];
    let sides = p.sides.clone();
    let m = p.grid_m;
    let sign = if conjugate { -1.0 } else { 1.0 };
    if targets.is_empty() || sign * (targets[0] - source_time) <= 0.0 {
        return Err(KernelError::InvalidRequest(
            "output times must lie beyond the source time".into(),
        ));
    }
    let h_min = sides.iter().copied().fold(f64::INFINITY, f64::min) / m as f64;
    let gap = (targets[0] - source_time).abs();
    let eps = opts
        .seed_eps
        .unwrap_or(SEED_EPS_CELLS * h_min * h_min)
        .min(0.25 * gap);
    let span = (targets[targets.len() - 1] - source_time).abs();
    let dt_init = opts.dt_init.unwrap_or(eps / 20.0);
    let dt_max = opts.dt_max.unwrap_or(span / 400.0).max(dt_init);

    // Per-axis seed: cell averages of the wrapped Gaussian, normalized to
    // unit axis mass.
    let mut axes_u: Vec<Vec<f64>> = sides
        .iter()
        .map(|&side| {
            let h = side / m as f64;
            let mut u: Vec<f64> = (0..m)
                .map(|j| {
                    let c = j as f64 * h;
                    gauss_on(c - 0.5 * h, c + 0.5 * h, |x| wrapped_gauss_1d(x, side, eps)) / h
                })
                .collect();
            let mass: f64 = u.iter().sum::<f64>() * h;
            for v in &mut u {
                *v /= mass;
            }
            u
        })
        .collect();

    let mut axes: Vec<Vec<Vec<f64>>> = vec![Vec::new(); sides.len()];
    let mut tau_cur = eps;
    let mut dt_cur = dt_init;
    for &target in targets {
        let tau_target = (target - source_time).abs();
        while tau_target - tau_cur > 1e-14 * span.max(1.0) {
            let dt = dt_cur.min(tau_target - tau_cur);
            for (a, u) in axes_u.iter_mut().enumerate() {
                let h = sides[a] / m as f64;
                let alpha = 0.5 * dt / (h * h);
                let rhs: Vec<f64> = (0..m)
                    .map(|j| {
                        let jm = (j + m - 1) % m;
                        let jp = (j + 1) % m;
                        u[j] + alpha * (u[jm] - 2.0 * u[j] + u[jp])
                    })
                    .collect();
                let sub = vec![-alpha; m];
                let diag = vec![1.0 + 2.0 * alpha; m];
                let sup = vec![-alpha; m];
                *u = cyclic_thomas(&sub, &diag, &sup, -alpha, -alpha, &rhs);
            }
            tau_cur += dt;
            dt_cur = (dt_cur * 1.1).min(dt_max);
        }
        for (a, u) in axes_u.iter().enumerate() {
            check_undershoot(u, source_time + sign * tau_cur)?;
            axes[a].push(u.clone());
        }
    }
    Ok((eps, axes))
}

// ---------------------------------------------------------------------------
// Public solvers and audits
// ---------------------------------------------------------------------------

/// Kernel G(x₀, l; ·, ·) as a field over the listed output times, computed
/// by marching the forward heat equation from a seeded delta.
pub fn solve_forward_kernel(
    tr: &FlowTrajectory,
    x0: f64,
    l: f64,
    t_grid: &[f64],
    opts: &KernelOptions,
) -> Result<KernelField, KernelError> {
    let field = match tr.kind() {
        ProfileKind::WarpedSphere => {
            let s = march_sphere(tr, x0, l, t_grid, false, opts)?;
            KernelField {
                n: tr.n(),
                direction: KernelDirection::Forward,
                source_x: x0,
                source_time: l,
                seed_eps: s.eps,
                times: t_grid.to_vec(),
                data: KernelData::Radial {
                    grid_m: tr.profiles[0].grid_m,
                    values: s.values,
                    measures: s.measures,
                    source_measures: s.source_measures,
                },
            }
        }
        ProfileKind::FlatTorus => {
            let (eps, axes) = march_torus(tr, l, t_grid, false, opts)?;
            KernelField {
                n: tr.n(),
                direction: KernelDirection::Forward,
                source_x: 0.0,
                source_time: l,
                seed_eps: eps,
                times: t_grid.to_vec(),
                data: KernelData::TorusProduct {
                    sides: tr.profiles[0].sides.clone(),
                    cells: tr.profiles[0].grid_m,
                    axes,
                },
            }
        }
    };
    Ok(field)
}

/// Conjugate kernel based at (x₀, t_src), evaluated at earlier times
/// (s_grid strictly decreasing, all < t_src): the solution of
/// ∂t v = -Δv + Rv marched backward from a seeded delta. Its mass in the
/// current measure is the conserved quantity.
pub fn solve_conjugate_kernel(
    tr: &FlowTrajectory,
    x0: f64,
    t_src: f64,
    s_grid: &[f64],
    opts: &KernelOptions,
) -> Result<KernelField, KernelError> {
    let field = match tr.kind() {
        ProfileKind::WarpedSphere => {
            let s = march_sphere(tr, x0, t_src, s_grid, true, opts)?;
            KernelField {
                n: tr.n(),
                direction: KernelDirection::Conjugate,
                source_x: x0,
                source_time: t_src,
                seed_eps: s.eps,
                times: s_grid.to_vec(),
                data: KernelData::Radial {
                    grid_m: tr.profiles[0].grid_m,
                    values: s.values,
                    measures: s.measures,
                    source_measures: s.source_measures,
                },
            }
        }
        ProfileKind::FlatTorus => {
            let (eps, axes) = march_torus(tr, t_src, s_grid, true, opts)?;
            KernelField {
                n: tr.n(),
                direction: KernelDirection::Conjugate,
                source_x: 0.0,
                source_time: t_src,
                seed_eps: eps,
                times: s_grid.to_vec(),
                data: KernelData::TorusProduct {
                    sides: tr.profiles[0].sides.clone(),
                    cells: tr.profiles[0].grid_m,
                    axes,
                },
            }
        }
    };
    Ok(field)
}

/// Residual of the field's own equation at output time k, from a centered
/// time difference across the neighboring stored slices and the fourth-order
/// spatial operators: forward fields against ∂t u - Δu, conjugate fields
/// against ∂t v + Δv - Rv. Returned relative to max |Δu|. The FV march is
/// second-order, so the residual shrinks at O(h²) under grid refinement.
pub fn equation_residual(
    kf: &KernelField,
    tr: &FlowTrajectory,
    k: usize,
) -> Result<f64, KernelError> {
    if k == 0 || k + 1 >= kf.times.len() {
        return Err(KernelError::InvalidRequest(
            "residual needs stored neighbors on both sides".into(),
        ));
    }
    let u = kf.radial_values(k);
    let p = tr.metric_at(kf.times[k])?;
    let lap = p.radial_laplacian(u);
    let du: Vec<f64> = kf
        .radial_values(k + 1)
        .iter()
        .zip(kf.radial_values(k - 1))
        .map(|(a, b)| (a - b) / (kf.times[k + 1] - kf.times[k - 1]))
        .collect();
    let scale = lap.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let res = match kf.direction {
        KernelDirection::Forward => (0..u.len())
            .map(|i| (du[i] - lap[i]).abs())
            .fold(0.0f64, f64::max),
        KernelDirection::Conjugate => {
            let r = p.curvature()?.r;
            (0..u.len())
                .map(|i| (du[i] + lap[i] - r[i] * u[i]).abs())
                .fold(0.0f64, f64::max)
        }
    };
    Ok(res / scale)
}

/// KernelField assembled from the spectral series on an exact round
/// trajectory — the oracle route, sharing the finite-volume measures so the
/// two routes are comparable slot by slot.
pub fn spectral_kernel_field(
    tr: &FlowTrajectory,
    x0: f64,
    l: f64,
    t_grid: &[f64],
) -> Result<KernelField, KernelError> {
    if x0 != 0.0 && x0 != 1.0 {
        return Err(KernelError::Geometry(GeometryError::NotAPole(x0)));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let mut measures = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut v = spectral_field(tr, l, t)?;
        if x0 == 1.0 {
            v.reverse();
        }
        values.push(v);
        measures.push(fv_weights(&tr.metric_at(t)?));
    }
    Ok(KernelField {
        n: tr.n(),
        direction: KernelDirection::Forward,
        source_x: x0,
        source_time: l,
        seed_eps: 0.0,
        times: t_grid.to_vec(),
        data: KernelData::Radial {
            grid_m: tr.profiles[0].grid_m,
            values,
            measures,
            source_measures: fv_weights(&tr.metric_at(l)?),
        },
    })
}

/// Conjugate twin of `spectral_kernel_field`: the field v(·, s) =
/// G(·, s; x₀, t_src) over decreasing earlier times s.
pub fn spectral_conjugate_field(
    tr: &FlowTrajectory,
    x0: f64,
    t_src: f64,
    s_grid: &[f64],
) -> Result<KernelField, KernelError> {
    if x0 != 0.0 && x0 != 1.0 {
        return Err(KernelError::Geometry(GeometryError::NotAPole(x0)));
    }
    let mut values = Vec::with_capacity(s_grid.len());
    let mut measures = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut v = spectral_field(tr, s, t_src)?;
        if x0 == 1.0 {
            v.reverse();
        }
        values.push(v);
        measures.push(fv_weights(&tr.metric_at(s)?));
    }
    Ok(KernelField {
        n: tr.n(),
        direction: KernelDirection::Conjugate,
        source_x: x0,
        source_time: t_src,
        seed_eps: 0.0,
        times: s_grid.to_vec(),
        data: KernelData::Radial {
            grid_m: tr.profiles[0].grid_m,
            values,
            measures,
            source_measures: fv_weights(&tr.metric_at(t_src)?),
        },
    })
}

/// KernelField assembled from the exact image-sum kernel on a static torus.
pub fn exact_torus_kernel_field(
    tr: &FlowTrajectory,
    source_time: f64,
    t_grid: &[f64],
    direction: KernelDirection,
) -> Result<KernelField, KernelError> {
    if tr.kind() != ProfileKind::FlatTorus {
        return Err(KernelError::UnsupportedModel(
            "exact torus field needs a flat-torus trajectory".into(),
        ));
    }
    let p = &tr.profiles[0];
    let m = p.grid_m;
    let mut axes: Vec<Vec<Vec<f64>>> = vec![Vec::new(); p.sides.len()];
    for &t in t_grid {
        let tau = (t - source_time).abs();
        if tau <= 0.0 {
            return Err(KernelError::InvalidInterval {
                l: source_time.min(t),
                t: source_time.max(t),
            });
        }
        for (a, &side) in p.sides.iter().enumerate() {
            let h = side / m as f64;
            axes[a].push(
                (0..m)
                    .map(|j| wrapped_gauss_1d(j as f64 * h, side, tau))
                    .collect(),
            );
        }
    }
    Ok(KernelField {
        n: tr.n(),
        direction,
        source_x: 0.0,
        source_time,
        seed_eps: 0.0,
        times: t_grid.to_vec(),
        data: KernelData::TorusProduct {
            sides: p.sides.clone(),
            cells: m,
            axes,
        },
    })
}

/// Norm-relative sup distance between two node fields:
/// max_i |u_i - v_i| / max_i |v_i|.
pub fn rel_sup_distance(u: &[f64], reference: &[f64]) -> f64 {
    let scale = reference
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    u.iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{exact_sphere_trajectory, exact_torus_trajectory, integrate, StepControl};
    use crate::geometry::make_round_sphere;
    use std::f64::consts::PI;

    fn s2_trajectory(m: usize) -> FlowTrajectory {
        exact_sphere_trajectory(2, 1.0, &[-1.0, 0.0], m).unwrap()
    }

    #[test]
    fn on_diagonal_series_value_is_frozen() {
        // Θ = ½ ln 2, G(θ=0) = (16π)⁻¹ Σ (2k+1) 2^{-k(k+1)/2} ≈ 0.0645275.
        let tr = s2_trajectory(64);
        let g = spectral_kernel_sphere(&tr, -1.0, 0.0, 0.0).unwrap();
        assert!(
            (g - 0.0645275).abs() < 1e-6,
            "on-diagonal spectral value {g}"
        );
        let theta = spectral_big_theta(&tr, -1.0, 0.0).unwrap();
        assert!((theta - 0.5 * 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn spectral_masses_follow_the_measure_laws() {
        // Forward mass ∫G dμ_{g(t)} = (r_t/r_l)ⁿ (equals e^{-∫R}); the
        // source-measure mass is 1 (k = 0 coefficient). Quadrature against
        // the trapezoid weights of dense round profiles.
        for (n, l, want_fwd) in [(2usize, -1.0, 0.5), (3, -3.0, 0.125)] {
            let tr = exact_sphere_trajectory(n, 1.0, &[l, 0.0], 2048).unwrap();
            let g = spectral_field(&tr, l, 0.0).unwrap();
            let p_t = tr.metric_at(0.0).unwrap();
            let p_l = tr.metric_at(l).unwrap();
            let fwd = dot(&g, &p_t.measure_weights());
            let bwd = dot(&g, &p_l.measure_weights());
            assert!(
                (fwd - want_fwd).abs() < 1e-6,
                "n={n}: forward mass {fwd}, want {want_fwd}"
            );
            assert!((bwd - 1.0).abs() < 1e-6, "n={n}: source-measure mass {bwd}");
        }
    }

    #[test]
    fn spectral_errors_cover_degenerate_intervals() {
        let tr = s2_trajectory(32);
        assert!(matches!(
            spectral_kernel_sphere(&tr, 0.0, -1.0, 0.0),
            Err(KernelError::InvalidInterval { .. })
        ));
        assert!(matches!(
            spectral_kernel_sphere(&tr, -1.0, 2.0, 0.0),
            Err(KernelError::InvalidInterval { .. })
        ));
        // Zero-span request: the kernel degenerates to a delta.
        let tiny = exact_sphere_trajectory(2, 1.0, &[-1.0, 0.0], 32).unwrap();
        assert!(matches!(
            spectral_kernel_sphere(&tiny, -1.0, -1.0 + 1e-15, 0.5),
            Err(KernelError::SeriesNotConvergent { .. })
        ));
        let numeric = integrate(
            &make_round_sphere(2, 2.0, 32, 0.0).unwrap(),
            0.0,
            0.1,
            &StepControl::default(),
        )
        .unwrap();
        assert!(matches!(
            spectral_kernel_sphere(&numeric, 0.0, 0.1, 0.0),
            Err(KernelError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn wrapped_gaussian_limits() {
        // Wide circle: images negligible, Euclidean value.
        let v = wrapped_gauss_1d(0.0, 10.0, 0.1);
        assert!((v - 1.0 / (4.0 * PI * 0.1).sqrt()).abs() < 1e-12);
        // Long times: the kernel flattens to the uniform density 1/L.
        let u = wrapped_gauss_1d(0.3, 1.0, 5.0);
        assert!((u - 1.0).abs() < 1e-12, "flattened kernel {u}");
        // Product form at the source on a (10,10) torus.
        let k2 = torus_heat_kernel(&[10.0, 10.0], &[0.0, 0.0], 0.1);
        assert!((k2 - 1.0 / (4.0 * PI * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn fv_weights_total_volume_and_pole_cell() {
        let p = make_round_sphere(3, 1.0, 128, 0.0).unwrap();
        let w = fv_weights(&p);
        let total: f64 = w.iter().sum();
        assert!((total - p.volume()).abs() < 1e-3 * total);
        // Pole cell mass ≈ ω aⁿ hⁿ / (2ⁿ n) for linear b near the axis.
        let h = p.h();
        let expect = unit_sphere_area(2) * (PI * h).powi(3) / (8.0 * 3.0);
        assert!(
            (w[0] - expect).abs() < 1e-2 * expect,
            "pole cell {} vs {expect}",
            w[0]
        );
        assert!(w.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn forward_solver_matches_spectral_oracle() {
        let tr = s2_trajectory(256);
        let kf = solve_forward_kernel(&tr, 0.0, -1.0, &[0.0], &KernelOptions::default()).unwrap();
        let oracle = spectral_field(&tr, -1.0, 0.0).unwrap();
        let err = rel_sup_distance(kf.radial_values(0), &oracle);
        assert!(err < 1e-3, "rel-sup error {err} at M=256");
        // Positivity within the undershoot tolerance; clamped view is clean.
        let mx = kf.radial_values(0).iter().fold(0.0f64, |m, v| m.max(*v));
        let mn = kf.radial_values(0).iter().fold(0.0f64, |m, v| m.min(*v));
        assert!(mn > -UNDERSHOOT_TOL * mx);
        assert!(kf.clamped_values(0).iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn forward_solver_refines_at_second_order() {
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&m| {
                let tr = s2_trajectory(m);
                let kf =
                    solve_forward_kernel(&tr, 0.0, -1.0, &[0.0], &KernelOptions::default())
                        .unwrap();
                let oracle = spectral_field(&tr, -1.0, 0.0).unwrap();
                rel_sup_distance(kf.radial_values(0), &oracle)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(
            (2.5..6.5).contains(&ratio),
            "refinement ratio {ratio} (errors {errs:?})"
        );
    }

    #[test]
    fn discrete_mass_laws_are_exact_on_the_round_sphere() {
        // Proportional weights across times make both discrete mass laws
        // exact to rounding: backward (source-measure) mass ≡ 1 and forward
        // mass = (r_t/r_l)ⁿ.
        let tr = s2_trajectory(128);
        let kf = solve_forward_kernel(
            &tr,
            0.0,
            -1.0,
            &[-0.5, 0.0, 0.25],
            &KernelOptions::default(),
        )
        .unwrap();
        for (k, &t) in kf.times.iter().enumerate() {
            let want = (1.0 - t) / 2.0; // r_t²/r_l² with r_l² = 4
            assert!(
                (kf.forward_mass(k) - want).abs() < 1e-11,
                "forward mass at t={t}: {} vs {want}",
                kf.forward_mass(k)
            );
            assert!(
                (kf.backward_mass(k) - 1.0).abs() < 1e-11,
                "backward mass at t={t}: {}",
                kf.backward_mass(k)
            );
        }
    }

    #[test]
    fn far_pole_source_mirrors_the_near_pole() {
        let tr = s2_trajectory(64);
        let near =
            solve_forward_kernel(&tr, 0.0, -1.0, &[0.0], &KernelOptions::default()).unwrap();
        let far = solve_forward_kernel(&tr, 1.0, -1.0, &[0.0], &KernelOptions::default()).unwrap();
        let mut mirrored = far.radial_values(0).to_vec();
        mirrored.reverse();
        let diff = rel_sup_distance(&mirrored, near.radial_values(0));
        assert!(diff < 1e-12, "mirror asymmetry {diff}");
    }

    #[test]
    fn torus_kernel_value_and_mass() {
        let tr = exact_torus_trajectory(&[10.0, 10.0], &[0.0, 1.0], 256).unwrap();
        let kf = solve_forward_kernel(&tr, 0.0, 0.0, &[0.1], &KernelOptions::default()).unwrap();
        let at_source = kf.torus_value_at(0, &[0.0, 0.0]);
        let want = 1.0 / (4.0 * PI * 0.1);
        assert!(
            (at_source - want).abs() < 1e-3 * want,
            "torus kernel at source {at_source}, Euclidean {want}"
        );
        assert!((kf.forward_mass(0) - 1.0).abs() < 1e-12);
        assert!((kf.backward_mass(0) - 1.0).abs() < 1e-12);
        // Off-source sample against the exact image sum.
        let d = [2.5, 1.25];
        let got = kf.torus_value_at(0, &d);
        let exact = torus_heat_kernel(&[10.0, 10.0], &d, 0.1);
        assert!(
            (got - exact).abs() < 1e-3 * want,
            "off-source {got} vs exact {exact}"
        );
    }

    #[test]
    fn conjugate_solver_conserves_and_matches_series() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-2.0, 0.5], 256).unwrap();
        let s_grid = [-0.25, -0.5, -1.0];
        let kf =
            solve_conjugate_kernel(&tr, 0.0, 0.0, &s_grid, &KernelOptions::default()).unwrap();
        for k in 0..s_grid.len() {
            assert!(
                (kf.backward_mass(k) - 1.0).abs() < 1e-11,
                "conjugate mass at s={}: {}",
                s_grid[k],
                kf.backward_mass(k)
            );
        }
        // The same series covers the source slot: v(x, s) = G(x,s; x₀,0).
        let oracle = spectral_field(&tr, -1.0, 0.0).unwrap();
        let err = rel_sup_distance(kf.radial_values(2), &oracle);
        assert!(err < 1e-3, "conjugate vs series error {err}");
    }

    #[test]
    fn equation_residuals_shrink_at_discretization_order() {
        let resid_at = |m: usize| {
            let tr = s2_trajectory(m);
            let delta = 2e-3;
            let kf = solve_forward_kernel(
                &tr,
                0.0,
                -1.0,
                &[-delta, 0.0, delta],
                &KernelOptions::default(),
            )
            .unwrap();
            equation_residual(&kf, &tr, 1).unwrap()
        };
        let (r64, r128) = (resid_at(64), resid_at(128));
        let ratio = r64 / r128;
        assert!(
            (2.0..8.0).contains(&ratio),
            "forward residual ratio {ratio} ({r64} → {r128})"
        );

        let tr = s2_trajectory(128);
        let delta = 2e-3;
        let kc = solve_conjugate_kernel(
            &tr,
            0.0,
            0.0,
            &[-0.5 + delta, -0.5, -0.5 - delta],
            &KernelOptions::default(),
        )
        .unwrap();
        let rc = equation_residual(&kc, &tr, 1).unwrap();
        assert!(rc < 0.05, "conjugate residual {rc} too large");
    }

    #[test]
    fn seed_offset_sensitivity_is_small() {
        // Halving ε moves the solution by well under the 0.5% audit budget.
        let tr = s2_trajectory(128);
        let base =
            solve_forward_kernel(&tr, 0.0, -1.0, &[0.0], &KernelOptions::default()).unwrap();
        let half = solve_forward_kernel(
            &tr,
            0.0,
            -1.0,
            &[0.0],
            &KernelOptions {
                seed_eps: Some(0.5 * base.seed_eps),
                ..KernelOptions::default()
            },
        )
        .unwrap();
        let shift = rel_sup_distance(half.radial_values(0), base.radial_values(0));
        assert!(shift < 5e-3, "seed sensitivity {shift}");
    }

    #[test]
    fn forward_solve_works_on_numeric_trajectories() {
        // A numerically integrated round sphere must agree with the series
        // on its exact twin: same geometry, snapshot-interpolated metric.
        let start = make_round_sphere(2, 2.0, 128, -1.0).unwrap();
        let numeric = integrate(&start, -1.0, 0.2, &StepControl::default()).unwrap();
        let kf =
            solve_forward_kernel(&numeric, 0.0, -1.0, &[0.0], &KernelOptions::default()).unwrap();
        let exact = s2_trajectory(128);
        let oracle = spectral_field(&exact, -1.0, 0.0).unwrap();
        let err = rel_sup_distance(kf.radial_values(0), &oracle);
        assert!(err < 5e-3, "numeric-trajectory kernel error {err}");
        let m = kf.forward_mass(0);
        assert!((m - 0.5).abs() < 1e-3, "forward mass on numeric run {m}");
    }

    #[test]
    fn cyclic_solver_handles_a_dense_reference() {
        // 4x4 cyclic system checked against direct substitution.
        let sub = vec![-1.0; 4];
        let diag = vec![4.0; 4];
        let sup = vec![-1.0; 4];
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let x = cyclic_thomas(&sub, &diag, &sup, -1.0, -1.0, &rhs);
        for i in 0..4 {
            let im = (i + 3) % 4;
            let ip = (i + 1) % 4;
            let lhs = 4.0 * x[i] - x[im] - x[ip];
            assert!((lhs - rhs[i]).abs() < 1e-12, "row {i}: {lhs} vs {}", rhs[i]);
        }
    }
}
