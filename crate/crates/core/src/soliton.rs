//! Parabolic rescaling toward backward limits and the shrinking-soliton
//! residual that certifies them.
//!
//! For a trajectory g(t) ending at t = 0 and a conjugate kernel G based
//! there, each scale τ in an increasing list produces
//!
//! ```text
//!   g_k(·, s) = τ⁻¹ g(·, −s τ)          (lengths shrink by τ^{-1/2})
//!   u_k(·, s) = τ^{n/2} G(·, −s τ)      (mass is preserved exactly)
//!   f_k       = −ln u_k − (n/2) ln(4πs)
//! ```
//!
//! and the residual of the gradient shrinking-soliton equation
//!
//! ```text
//!   Ric + Hess f − g/(2s) = 0
//! ```
//!
//! is integrated against u_k dμ.  On rotationally symmetric models the
//! tensor has one radial and one spherical eigenvalue,
//!
//! ```text
//!   A_r = Ric_rad + f_ss − 1/(2s),   A_σ = Ric_sph + (b_s/b) f_s − 1/(2s),
//!   residual = ∫ (A_r² + (n−1) A_σ²) u dμ,
//! ```
//!
//! with the angular Hessian continued to f_ss at the poles.  A limit is
//! certified non-flat when the rescaled entropy stays negative (flat limits
//! force W ≥ 0) or the rescaled curvature refuses to vanish.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{self, EntropyError};
use crate::fd::{self, Parity};
use crate::flow::{FlowError, FlowTrajectory};
use crate::geometry::{GeometryError, ProfileKind, WarpedProfile};
use crate::kernel::{
    self, KernelData, KernelDirection, KernelError, KernelField, KernelOptions,
};

/// Entropy level below which the flat-limit alternative is excluded.
pub const NONFLAT_W_TOL: f64 = 1e-4;
/// Rescaled scalar-curvature level with the same role.
pub const NONFLAT_R_TOL: f64 = 1e-6;
/// Slack for the non-increasing rescaled-entropy requirement.
pub const W_SEQ_TOL: f64 = 1e-8;

const SLICE_REL_TOL: f64 = 5e-3;

#[derive(Debug, Error)]
pub enum SolitonError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no stored kernel slice near time {t}")]
    MissingSlice { t: f64 },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Outcome of a backward-limit experiment across an increasing τ list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitReport {
    pub tau_list: Vec<f64>,
    pub residual_seq: Vec<f64>,
    /// Rescaled entropy per scale, at s_ref and at s_ref + 1.
    #[serde(rename = "W_seq")]
    pub w_seq: Vec<[f64; 2]>,
    pub f_variance_seq: Vec<f64>,
    pub nonflat: bool,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// The trajectory's metric at t = −s·τ, with lengths rescaled by τ^{-1/2}
/// and the clock restarted at the backward time −s.
pub fn rescale(tr: &FlowTrajectory, tau: f64, s: f64) -> Result<WarpedProfile, SolitonError> {
    if !(tau > 0.0) || !(s > 0.0) {
        return Err(SolitonError::InvalidParameter(format!(
            "parabolic rescaling needs tau > 0 and s > 0, got tau = {tau}, s = {s}"
        )));
    }
    let p = tr.metric_at(-s * tau)?;
    let mut q = p.rescaled(tau.sqrt().recip());
    q.time = -s;
    Ok(q)
}

/// Stored slice k as a dense node field: radial slices are clamped at 0,
/// torus product slices expanded onto the flattened grid.
pub(crate) fn slice_density(kf: &KernelField, k: usize) -> Vec<f64> {
    match &kf.data {
        KernelData::Radial { .. } => kf.clamped_values(k),
        KernelData::TorusProduct { axes, .. } => {
            let per_axis: Vec<Vec<f64>> = axes.iter().map(|ax| ax[k].clone()).collect();
            entropy::torus_product_field(&per_axis)
        }
    }
}

fn nearest_slice(kf: &KernelField, t: f64) -> Result<usize, SolitonError> {
    let k = (0..kf.num_times())
        .min_by(|&i, &j| {
            (kf.times[i] - t)
                .abs()
                .total_cmp(&(kf.times[j] - t).abs())
        })
        .ok_or(SolitonError::MissingSlice { t })?;
    if (kf.times[k] - t).abs() > SLICE_REL_TOL * t.abs().max(1.0) {
        return Err(SolitonError::MissingSlice { t });
    }
    Ok(k)
}

/// Density and potential of the τ-rescaled kernel at backward time s:
/// u_k = τ^{n/2} G(·, −sτ) read off the nearest stored slice, and
/// f_k = −ln u_k − (n/2) ln(4πs).  Rescaling preserves the discrete mass
/// exactly, since the cell measures carry the inverse factor.
pub fn rescaled_kernel(
    tr: &FlowTrajectory,
    kf: &KernelField,
    tau: f64,
    s: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolitonError> {
    if !(tau > 0.0) || !(s > 0.0) {
        return Err(SolitonError::InvalidParameter(format!(
            "kernel rescaling needs tau > 0 and s > 0, got tau = {tau}, s = {s}"
        )));
    }
    if kf.direction != KernelDirection::Conjugate {
        return Err(SolitonError::InvalidParameter(
            "kernel rescaling needs a conjugate field".into(),
        ));
    }
    if kf.n != tr.n() {
        return Err(SolitonError::InvalidParameter(format!(
            "kernel dimension {} does not match the trajectory dimension {}",
            kf.n,
            tr.n()
        )));
    }
    if kf.source_time.abs() > 1e-12 {
        return Err(SolitonError::InvalidParameter(format!(
            "the backward-limit convention sources the kernel at time 0, got {}",
            kf.source_time
        )));
    }
    let k = nearest_slice(kf, -s * tau)?;
    let scale = tau.powf(0.5 * kf.n as f64);
    let u: Vec<f64> = slice_density(kf, k).iter().map(|v| v * scale).collect();
    let f = entropy::f_from_u(&u, s, kf.n)?;
    Ok((u, f))
}

/// ∫ |Ric + Hess f − g/(2s)|² u dμ on one profile, the squared L²(u dμ)
/// defect of the gradient shrinking-soliton equation.
pub fn soliton_residual(
    p: &WarpedProfile,
    f: &[f64],
    s: f64,
    u: &[f64],
) -> Result<f64, SolitonError> {
    if !(s > 0.0) {
        return Err(SolitonError::InvalidParameter(format!(
            "backward time must be positive, got s = {s}"
        )));
    }
    entropy::expect_len(p, f.len())?;
    entropy::expect_len(p, u.len())?;
    match p.kind {
        ProfileKind::WarpedSphere => radial_residual(p, f, s, u),
        ProfileKind::FlatTorus => Ok(torus_residual(p, f, s, u)),
    }
}

fn radial_residual(
    p: &WarpedProfile,
    f: &[f64],
    s: f64,
    u: &[f64],
) -> Result<f64, SolitonError> {
    let m = p.grid_m;
    let h = p.h();
    let curv = p.curvature()?;
    let w = kernel::fv_weights(p);
    let f_s = p.radial_gradient(f);
    let d = fd::deriv1(&f_s, h, Parity::Odd, Parity::Odd);
    let db = fd::deriv1(&p.b, h, Parity::Odd, Parity::Odd);
    let half = 1.0 / (2.0 * s);
    let nf = p.n as f64;
    let mut acc = 0.0;
    for i in 0..=m {
        let f_ss = d[i] / p.a[i];
        let a_rad = curv.ric_rad[i] + f_ss - half;
        let hess_sph = if i == 0 || i == m {
            f_ss
        } else {
            db[i] / p.a[i] / p.b[i] * f_s[i]
        };
        let a_sph = curv.ric_sph[i] + hess_sph - half;
        acc += (a_rad * a_rad + (nf - 1.0) * a_sph * a_sph) * u[i] * w[i];
    }
    Ok(acc)
}

fn torus_residual(p: &WarpedProfile, f: &[f64], s: f64, u: &[f64]) -> f64 {
    let m = p.grid_m;
    let cell = entropy::torus_cell_volume(p);
    let half = 1.0 / (2.0 * s);
    let mut acc = vec![0.0; f.len()];
    for a_ax in 0..p.n {
        let ha = p.sides[a_ax] / m as f64;
        let da = entropy::torus_axis_deriv(f, m, p.n, a_ax, ha);
        for b_ax in a_ax..p.n {
            let hb = p.sides[b_ax] / m as f64;
            let dab = entropy::torus_axis_deriv(&da, m, p.n, b_ax, hb);
            if a_ax == b_ax {
                for (q, dq) in acc.iter_mut().zip(&dab) {
                    let dev = dq - half;
                    *q += dev * dev;
                }
            } else {
                // Off-diagonal entries enter twice by symmetry.
                for (q, dq) in acc.iter_mut().zip(&dab) {
                    *q += 2.0 * dq * dq;
                }
            }
        }
    }
    acc.iter().zip(u).map(|(q, ui)| q * ui).sum::<f64>() * cell
}

fn build_kernel(tr: &FlowTrajectory, times: &[f64]) -> Result<KernelField, KernelError> {
    match tr.kind() {
        ProfileKind::FlatTorus => {
            kernel::exact_torus_kernel_field(tr, 0.0, times, KernelDirection::Conjugate)
        }
        ProfileKind::WarpedSphere if tr.exact => {
            kernel::spectral_conjugate_field(tr, 0.0, 0.0, times)
        }
        ProfileKind::WarpedSphere => {
            kernel::solve_conjugate_kernel(tr, 0.0, 0.0, times, &KernelOptions::default())
        }
    }
}

fn limit_step(
    tr: &FlowTrajectory,
    kf: &KernelField,
    tau: f64,
    s_ref: f64,
) -> Result<(f64, [f64; 2], f64), SolitonError> {
    let p_ref = rescale(tr, tau, s_ref)?;
    let (u_ref, f_ref) = rescaled_kernel(tr, kf, tau, s_ref)?;
    let residual = soliton_residual(&p_ref, &f_ref, s_ref, &u_ref)?;
    let w_ref = entropy::w_entropy(&p_ref, &u_ref, s_ref)?;

    let s_next = s_ref + 1.0;
    let p_next = rescale(tr, tau, s_next)?;
    let (u_next, _) = rescaled_kernel(tr, kf, tau, s_next)?;
    let w_next = entropy::w_entropy(&p_next, &u_next, s_next)?;

    let (_, _, f_var) =
        entropy::weighted_f_stats(&u_ref, &entropy::quad_weights(&p_ref), &f_ref);
    Ok((residual, [w_ref, w_next], f_var))
}

/// Runs the rescaling experiment over an increasing τ list at the reference
/// backward time s_ref.  Per scale it records the soliton residual, the
/// entropy pair (s_ref, s_ref + 1), and the u-weighted variance of the
/// potential.  The verdict passes only when every scale completed, the
/// residual decreased strictly over the last three scales, the entropy
/// sequence was non-increasing, and the non-flatness certificate held;
/// failed scales or a flat control are reported in `notes` rather than
/// aborting the experiment.
pub fn backward_limit_experiment(
    tr: &FlowTrajectory,
    tau_list: &[f64],
    s_ref: f64,
) -> Result<LimitReport, SolitonError> {
    if tau_list.is_empty() {
        return Err(SolitonError::InvalidParameter("empty tau list".into()));
    }
    if tau_list.iter().any(|&t| !(t > 0.0)) || tau_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolitonError::InvalidParameter(
            "tau list must be positive and strictly increasing".into(),
        ));
    }
    if !(s_ref > 0.0) {
        return Err(SolitonError::InvalidParameter(format!(
            "reference backward time must be positive, got s_ref = {s_ref}"
        )));
    }

    let mut report = LimitReport {
        tau_list: tau_list.to_vec(),
        residual_seq: Vec::new(),
        w_seq: Vec::new(),
        f_variance_seq: Vec::new(),
        nonflat: false,
        verdict: Verdict::Fail,
        notes: Vec::new(),
    };

    // One kernel covers every (τ, s) pair: exact models through their
    // closed forms, numeric trajectories through a single backward march
    // whose stored slices land exactly on the requested times.
    let mut times: Vec<f64> = tau_list
        .iter()
        .flat_map(|&tau| [-s_ref * tau, -(s_ref + 1.0) * tau])
        .collect();
    times.sort_by(|x, y| y.total_cmp(x));
    times.dedup();
    let kf = match build_kernel(tr, &times) {
        Ok(kf) => kf,
        Err(e) => {
            report.notes.push(format!("kernel construction failed: {e}"));
            return Ok(report);
        }
    };

    let mut complete = true;
    for &tau in tau_list {
        match limit_step(tr, &kf, tau, s_ref) {
            Ok((residual, w_pair, f_var)) => {
                report.residual_seq.push(residual);
                report.w_seq.push(w_pair);
                report.f_variance_seq.push(f_var);
            }
            Err(e) => {
                report.notes.push(format!("stopped at tau = {tau}: {e}"));
                complete = false;
                break;
            }
        }
    }

    if complete {
        // Certificate on the farthest scale: a flat limit forces W ≥ 0 and
        // vanishing curvature, so either signal excludes it.
        let p_last = rescale(tr, *tau_list.last().unwrap(), s_ref)?;
        let max_r = match p_last.kind {
            ProfileKind::WarpedSphere => p_last
                .curvature()?
                .r
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            ProfileKind::FlatTorus => 0.0,
        };
        let w_last = report.w_seq.last().map_or(0.0, |w| w[0]);
        report.nonflat = w_last < -NONFLAT_W_TOL || max_r > NONFLAT_R_TOL;
        if !report.nonflat {
            report.notes.push(format!(
                "flat control: non-flatness certificate not met (W = {w_last:.3e}, max R = {max_r:.3e})"
            ));
        }
    }

    let k = report.residual_seq.len();
    let residual_ok = k >= 3
        && report.residual_seq[k - 3] > report.residual_seq[k - 2]
        && report.residual_seq[k - 2] > report.residual_seq[k - 1];
    if complete && !residual_ok {
        report
            .notes
            .push("soliton residual is not strictly decreasing over the last three scales".into());
    }
    let w_ok = report
        .w_seq
        .windows(2)
        .all(|w| w[1][0] <= w[0][0] + W_SEQ_TOL);
    if complete && !w_ok {
        report
            .notes
            .push("rescaled entropy sequence is not non-increasing".into());
    }
    if complete && residual_ok && w_ok && report.nonflat {
        report.verdict = Verdict::Pass;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{exact_sphere_trajectory, exact_torus_trajectory};
    use crate::geometry::{make_flat_torus, make_round_sphere};
    use std::f64::consts::PI;

    #[test]
    fn rescaling_follows_the_closed_form() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-0.5, 0.0], 128).unwrap();

        // r_k² = 2(n−1)(T0 + sτ)/τ → 2(n−1)s as τ → ∞.
        let q = rescale(&tr, 100.0, 1.0).unwrap();
        let r2 = q.round_radius_estimate().powi(2);
        assert!((r2 - 2.02).abs() < 1e-10, "rescaled r² = {r2}, want 2.02");
        assert_eq!(q.time, -1.0);

        let q = rescale(&tr, 1e8, 1.0).unwrap();
        let r2 = q.round_radius_estimate().powi(2);
        assert!((r2 - (2.0 + 2e-8)).abs() < 1e-12, "deep limit r² = {r2}");

        // The excess (r_k²/s − 2(n−1))·τ = 2(n−1)T0/s is scale-free.
        for tau in [10.0, 100.0, 1000.0] {
            let q = rescale(&tr, tau, 1.0).unwrap();
            let excess = (q.round_radius_estimate().powi(2) - 2.0) * tau;
            assert!(
                (excess - 2.0).abs() < 1e-9,
                "excess at tau = {tau}: {excess}, want 2"
            );
        }

        let torus = exact_torus_trajectory(&[20.0, 20.0], &[-5.0, 0.5], 32).unwrap();
        let q = rescale(&torus, 4.0, 1.0).unwrap();
        assert_eq!(q.sides, vec![10.0, 10.0]);

        assert!(matches!(
            rescale(&tr, 0.0, 1.0),
            Err(SolitonError::InvalidParameter(_))
        ));
        assert!(matches!(
            rescale(&tr, 10.0, -1.0),
            Err(SolitonError::InvalidParameter(_))
        ));
    }

    #[test]
    fn residual_vanishes_on_the_model_solitons() {
        // Gaussian soliton: Hess f = g/(2s) exactly; f is quadratic where u
        // carries mass, so the periodic stencils are exact on it.
        let s = 0.5;
        let p = make_flat_torus(&[20.0, 20.0], 64, 0.0).unwrap();
        let h = 20.0 / 64.0;
        let axis: Vec<f64> = (0..64)
            .map(|j| kernel::wrapped_gauss_1d(j as f64 * h, 20.0, s))
            .collect();
        let u = entropy::torus_product_field(&[axis.clone(), axis]);
        let f = entropy::f_from_u(&u, s, 2).unwrap();
        let res = soliton_residual(&p, &f, s, &u).unwrap();
        assert!(res < 1e-10, "Gaussian residual {res:e} should vanish");

        // Round shrinkers r² = 2(n−1)s with the uniform density.
        for (n, s, m) in [(2usize, 1.5f64, 128usize), (3, 0.8, 128)] {
            let r2 = 2.0 * (n - 1) as f64 * s;
            let p = make_round_sphere(n, r2.sqrt(), m, 0.0).unwrap();
            let vol = if n == 2 {
                4.0 * PI * r2
            } else {
                2.0 * PI * PI * r2.powf(1.5)
            };
            let u = vec![1.0 / vol; m + 1];
            let f = entropy::f_from_u(&u, s, n).unwrap();
            let res = soliton_residual(&p, &f, s, &u).unwrap();
            assert!(
                res < 1e-10,
                "round shrinker residual {res:e} at n = {n} should vanish"
            );
        }
    }

    #[test]
    fn residual_matches_the_frozen_mismatch_value() {
        // S²(r² = 2.2) at s = 1 with the uniform density: both eigenvalues
        // equal δ = 1/2.2 − 1/2, so the residual is 2δ² = 0.004132231404959.
        let p = make_round_sphere(2, 2.2f64.sqrt(), 256, 0.0).unwrap();
        let u = vec![1.0 / (4.0 * PI * 2.2); 257];
        let f = entropy::f_from_u(&u, 1.0, 2).unwrap();
        let res = soliton_residual(&p, &f, 1.0, &u).unwrap();
        let want = 0.004_132_231_404_959;
        assert!(
            (res - want).abs() < 1e-6,
            "frozen mismatch: residual {res}, want {want}"
        );

        assert!(matches!(
            soliton_residual(&p, &f, 0.0, &u),
            Err(SolitonError::InvalidParameter(_))
        ));
    }

    #[test]
    fn rescaled_kernel_satisfies_the_uniform_bounds() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-1.0, 0.0], 256).unwrap();
        let n = 2usize;

        // On-diagonal sweep fitting the two-sided coefficients: a₁ from the
        // lower bound G ≥ 1/(a₁ τ^{n/2}) for τ ≥ 1, and the upper envelope
        // of G·(4πτ)^{n/2} (the kernel peaks at the source).
        let sweep: Vec<f64> = (0..25)
            .map(|i| 4000f64.powf(i as f64 / 24.0))
            .collect();
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for &tau in &sweep {
            let g = kernel::spectral_kernel_sphere(&tr, -tau, 0.0, 0.0).unwrap();
            lower = lower.min(g * tau.powf(0.5 * n as f64));
            upper = upper.max(g * (4.0 * PI * tau).powf(0.5 * n as f64));
        }
        let a1 = 1.0 / lower;

        let taus = [10.0, 100.0];
        let s_vals = [1.0, 2.0, 4.0];
        let times: Vec<f64> = taus
            .iter()
            .flat_map(|&tau| s_vals.iter().map(move |&s| -s * tau))
            .collect();
        let mut sorted = times.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let kf = kernel::spectral_conjugate_field(&tr, 0.0, 0.0, &sorted).unwrap();

        for &tau in &taus {
            for &s in &s_vals {
                let (u, f) = rescaled_kernel(&tr, &kf, tau, s).unwrap();
                let p = rescale(&tr, tau, s).unwrap();
                let w = entropy::quad_weights(&p);
                let mass = u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                assert!(
                    (mass - 1.0).abs() < 1e-4,
                    "rescaled mass {mass} at tau = {tau}, s = {s}"
                );

                // u_k(x₀, s) ≥ 1/(2ⁿ a₁) for s ∈ [1, 4].
                let floor = 1.0 / (2f64.powi(n as i32) * a1);
                assert!(
                    u[0] >= floor * (1.0 - 1e-12),
                    "kernel value {} below the uniform floor {floor}",
                    u[0]
                );

                // f_k ≥ −ln(sup G·(4πτ)^{n/2}) uniformly.
                let f_min = f.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(
                    f_min >= -upper.ln() - 1e-9,
                    "potential minimum {f_min} below the floor {}",
                    -upper.ln()
                );
            }
        }

        // Rescaling preserves both the discrete mass and the entropy.
        let (tau, s) = (100.0, 1.0);
        let (u_k, _) = rescaled_kernel(&tr, &kf, tau, s).unwrap();
        let p_k = rescale(&tr, tau, s).unwrap();
        let slice = nearest_slice(&kf, -s * tau).unwrap();
        let u_raw = kf.clamped_values(slice);
        let p_raw = tr.metric_at(-s * tau).unwrap();
        let w_k = entropy::w_entropy(&p_k, &u_k, s).unwrap();
        let w_raw = entropy::w_entropy(&p_raw, &u_raw, s * tau).unwrap();
        assert!(
            (w_k - w_raw).abs() < 1e-9,
            "entropy scaling identity: {w_k} vs {w_raw}"
        );
        let mass_k: f64 = u_k
            .iter()
            .zip(&entropy::quad_weights(&p_k))
            .map(|(a, b)| a * b)
            .sum();
        let mass_raw: f64 = u_raw
            .iter()
            .zip(&entropy::quad_weights(&p_raw))
            .map(|(a, b)| a * b)
            .sum();
        assert!(
            (mass_k - mass_raw).abs() < 1e-12,
            "mass must be scale-invariant: {mass_k} vs {mass_raw}"
        );

        assert!(matches!(
            rescaled_kernel(&tr, &kf, 100.0, 7.0),
            Err(SolitonError::MissingSlice { .. })
        ));
    }

    #[test]
    fn backward_limit_certifies_the_ancient_sphere() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-1.0, 0.0], 256).unwrap();
        let report = backward_limit_experiment(&tr, &[10.0, 100.0, 1000.0], 1.0).unwrap();

        assert_eq!(report.verdict, Verdict::Pass, "notes: {:?}", report.notes);
        assert!(report.nonflat);
        assert_eq!(report.residual_seq.len(), 3);
        for r in &report.residual_seq {
            assert!(*r > 0.0);
        }
        assert!(
            report.residual_seq[2] < 0.1 * report.residual_seq[0],
            "residuals {:?} should collapse by 10x over two decades",
            report.residual_seq
        );

        // The entropy gap between s_ref and s_ref + 1 closes as τ grows —
        // the limit's entropy is becoming scale-independent.
        let gaps: Vec<f64> = report.w_seq.iter().map(|w| w[0] - w[1]).collect();
        for g in &gaps {
            assert!(*g > -1e-9, "W must not increase in s: gaps {gaps:?}");
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps {gaps:?}");
        assert!(gaps[2] < 0.1 * gaps[0], "gaps {gaps:?}");

        // W_k(s_ref) approaches ln 2 − 1, the round shrinker's entropy.
        let w_last = report.w_seq[2][0];
        assert!(
            (w_last - (2f64.ln() - 1.0)).abs() < 5e-3,
            "limit entropy {w_last}, want ln 2 − 1 = {}",
            2f64.ln() - 1.0
        );

        let fv = &report.f_variance_seq;
        assert!(fv[1] < fv[0] && fv[2] < fv[1], "variances {fv:?}");
        assert!(fv[2] < 1e-3 * fv[0] && fv[2] < 1e-4, "variances {fv:?}");
    }

    #[test]
    fn backward_limit_flat_control_fails_with_note() {
        let tr = exact_torus_trajectory(&[40.0, 40.0], &[-10.0, 0.5], 128).unwrap();
        let report = backward_limit_experiment(&tr, &[0.5, 1.0, 2.0], 1.0).unwrap();

        assert_eq!(report.verdict, Verdict::Fail);
        assert!(!report.nonflat);
        assert!(
            report.notes.iter().any(|n| n.contains("flat control")),
            "notes: {:?}",
            report.notes
        );
        for w in &report.w_seq {
            assert!(
                w[0].abs() < 1e-4 && w[1].abs() < 1e-4,
                "flat entropies should vanish: {:?}",
                report.w_seq
            );
        }
        for r in &report.residual_seq {
            assert!(*r < 1e-6, "flat residuals should vanish: {r:e}");
        }
    }

    #[test]
    fn experiment_rejects_malformed_scale_lists() {
        let tr = exact_sphere_trajectory(2, 1.0, &[-1.0, 0.0], 64).unwrap();
        assert!(matches!(
            backward_limit_experiment(&tr, &[], 1.0),
            Err(SolitonError::InvalidParameter(_))
        ));
        assert!(matches!(
            backward_limit_experiment(&tr, &[10.0, 10.0], 1.0),
            Err(SolitonError::InvalidParameter(_))
        ));
        assert!(matches!(
            backward_limit_experiment(&tr, &[10.0, 100.0], 0.0),
            Err(SolitonError::InvalidParameter(_))
        ));
    }
}
