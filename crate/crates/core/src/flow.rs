//! Ricci flow on the model families.
//!
//! In the fixed coordinate gauge the flow `∂t g = -2 Ric` of a warped product
//! reduces to the coupled system
//!
//! ```text
//! ∂t a = (n-1) (b_ss / b) a,
//! ∂t b = b_ss + (n-2)(b_s² - 1) / b,
//! ```
//!
//! with `∂t b = 0` at the poles (both right-hand sides have smooth limits
//! there). Round spheres evolve exactly by `r(t)² = r(t₀)² - 2(n-1)(t - t₀)`,
//! which serves as the integration oracle throughout; flat tori are fixed
//! points.
//!
//! Time stepping is explicit RK4. The reduced system is 1-D parabolic, so
//! steps obey a diffusion bound `dt ≤ C·(min_i a_i Δx)²`: the default cadence
//! uses `C = 0.2`, and steps beyond `C = 0.5` (the RK4 stability edge for the
//! fourth-order second-difference operator) are rejected outright. Adaptive
//! runs halve the step on rejection and declare a singularity when the step
//! size collapses; fixed-step runs exist for integrator-order measurements.

use crate::geometry::{
    make_round_sphere, GeometryError, ProfileKind, WarpedProfile,
};
use crate::report::CheckReport;
use thiserror::Error;

/// Default diffusion number for accepted steps: dt ≤ CFL_DEFAULT·(min a Δx)².
pub const CFL_DEFAULT: f64 = 0.2;
/// Stability edge; steps beyond this diffusion number are rejected.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("step rejected: dt exceeds stability bound, suggested dt = {suggested_dt:.3e}")]
    StepRejected { suggested_dt: f64 },
    #[error("singularity detected at t = {time}")]
    SingularityDetected {
        time: f64,
        /// Snapshots accepted before the singularity, when integration
        /// produced any.
        partial: Option<Box<FlowTrajectory>>,
    },
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no admissible scale: every sample violates the curvature condition")]
    NoAdmissibleScale,
}

/// Step-size policy for `integrate`.
#[derive(Debug, Clone)]
pub struct StepControl {
    /// Diffusion number for adaptive steps.
    pub cfl: f64,
    /// Fixed step size; disables adaptivity (used for order studies).
    pub fixed_dt: Option<f64>,
    /// Snapshot storage cap; the kept cadence is thinned by doubling.
    pub max_snapshots: usize,
    /// Fraction of the requested span below which a collapsing adaptive step
    /// is reported as a singularity.
    pub min_dt_fraction: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: CFL_DEFAULT,
            fixed_dt: None,
            max_snapshots: 512,
            min_dt_fraction: 1e-9,
        }
    }
}

/// Time-ordered flow history.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    /// Snapshots with strictly increasing time stamps, all < `t0`.
    pub profiles: Vec<WarpedProfile>,
    /// Final (singular) time; `f64::INFINITY` when the flow never vanishes.
    pub t0: f64,
    /// True when the snapshots come from a closed-form solution, in which
    /// case `metric_at` evaluates the closed form instead of interpolating.
    pub exact: bool,
    /// Fitted Type I constant, once computed.
    pub d0: Option<f64>,
    /// Fitted non-collapsing constant, once computed.
    pub kappa: Option<f64>,
    /// A-posteriori step-doubling error estimate from the final accepted
    /// step (sup-norm, relative to the field scale).
    pub error_estimate: Option<f64>,
}

/// Exact ancient shrinking round sphere: r(t)² = 2(n-1)(T0 - t).
pub fn exact_sphere_trajectory(
    n: usize,
    t0: f64,
    t_list: &[f64],
    grid_m: usize,
) -> Result<FlowTrajectory, FlowError> {
    if t_list.is_empty() {
        return Err(FlowError::InvalidState("empty snapshot time list".into()));
    }
    if t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FlowError::InvalidState(
            "snapshot times must be strictly increasing".into(),
        ));
    }
    let mut profiles = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if t >= t0 {
            return Err(FlowError::OutOfDomain(format!(
                "snapshot time {t} is not before the final time {t0}"
            )));
        }
        let r = (2.0 * (n as f64 - 1.0) * (t0 - t)).sqrt();
        profiles.push(make_round_sphere(n, r, grid_m, t)?);
    }
    Ok(FlowTrajectory {
        profiles,
        t0,
        exact: true,
        d0: None,
        kappa: None,
        error_estimate: None,
    })
}

/// Static flat torus viewed as a (constant) trajectory.
pub fn exact_torus_trajectory(
    sides: &[f64],
    t_list: &[f64],
    grid_m: usize,
) -> Result<FlowTrajectory, FlowError> {
    if t_list.is_empty() || t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FlowError::InvalidState(
            "snapshot times must be nonempty and strictly increasing".into(),
        ));
    }
    let base = crate::geometry::make_flat_torus(sides, grid_m, t_list[0])?;
    let profiles = t_list
        .iter()
        .map(|&t| {
            let mut p = base.clone();
            p.time = t;
            p
        })
        .collect();
    Ok(FlowTrajectory {
        profiles,
        t0: f64::INFINITY,
        exact: true,
        d0: None,
        kappa: None,
        error_estimate: None,
    })
}

/// Round sphere with a pole-regular equatorial perturbation:
/// b = r sin(πx) (1 + amp sin²(πx)).
pub fn make_perturbed_sphere(
    n: usize,
    r: f64,
    grid_m: usize,
    amp: f64,
    time: f64,
) -> Result<WarpedProfile, FlowError> {
    if amp.abs() >= 0.5 {
        return Err(FlowError::InvalidState(format!(
            "perturbation amplitude {amp} too large for a valid profile"
        )));
    }
    let mut p = make_round_sphere(n, r, grid_m, time)?;
    let h = p.h();
    for i in 0..=grid_m {
        let s = (std::f64::consts::PI * i as f64 * h).sin();
        p.b[i] *= 1.0 + amp * s * s;
    }
    p.validate()?;
    Ok(p)
}

/// Flow right-hand side (∂t a, ∂t b); zero at the poles of b.
fn ricci_rhs(p: &WarpedProfile) -> (Vec<f64>, Vec<f64>) {
    let m = p.grid_m;
    let nf = p.n as f64;
    let q = p.b_ss_over_b();
    let b_s = p.b_s();
    let mut da = vec![0.0; m + 1];
    let mut db = vec![0.0; m + 1];
    for i in 0..=m {
        da[i] = (nf - 1.0) * q[i] * p.a[i];
    }
    for i in 1..m {
        db[i] = q[i] * p.b[i] + (nf - 2.0) * (b_s[i] * b_s[i] - 1.0) / p.b[i];
    }
    (da, db)
}

/// Reconstructs the two pole-adjacent nodes of `a` from the interior by
/// even-parity quartic extrapolation (exact on the round family).  The
/// reduced system transports `a` without diffusing it, and for n ≥ 3 the
/// free evolution of these nodes couples through the 1/b reaction in ∂t b
/// into a grid-scale mode that grows regardless of the step size; axis
/// smoothness determines them from the interior instead.
fn enforce_axis_regularity(a: &mut [f64], m: usize) {
    const AT_POLE: [f64; 3] = [12.0 / 5.0, -64.0 / 35.0, 3.0 / 7.0];
    const NEXT_TO_POLE: [f64; 3] = [2.0, -9.0 / 7.0, 2.0 / 7.0];
    let fit = |w: &[f64; 3], x: [f64; 3]| w[0] * x[0] + w[1] * x[1] + w[2] * x[2];
    a[0] = fit(&AT_POLE, [a[2], a[3], a[4]]);
    a[1] = fit(&NEXT_TO_POLE, [a[2], a[3], a[4]]);
    a[m] = fit(&AT_POLE, [a[m - 2], a[m - 3], a[m - 4]]);
    a[m - 1] = fit(&NEXT_TO_POLE, [a[m - 2], a[m - 3], a[m - 4]]);
}

fn state_ok(p: &WarpedProfile) -> bool {
    let m = p.grid_m;
    p.a.iter().all(|v| v.is_finite() && *v > 0.0)
        && p.b.iter().all(|v| v.is_finite())
        && p.b[1..m].iter().all(|v| *v > 0.0)
}

/// One classical RK4 step of the reduced system; `None` when the result
/// leaves the admissible cone (a sign the step crossed a singularity).
fn rk4(p: &WarpedProfile, dt: f64) -> Option<WarpedProfile> {
    let stage = |ka: &[f64], kb: &[f64], c: f64| -> WarpedProfile {
        let mut q = p.clone();
        for i in 0..q.a.len() {
            q.a[i] = p.a[i] + c * ka[i];
            q.b[i] = p.b[i] + c * kb[i];
        }
        q
    };
    let (k1a, k1b) = ricci_rhs(p);
    let y2 = stage(&k1a, &k1b, 0.5 * dt);
    if !state_ok(&y2) {
        return None;
    }
    let (k2a, k2b) = ricci_rhs(&y2);
    let y3 = stage(&k2a, &k2b, 0.5 * dt);
    if !state_ok(&y3) {
        return None;
    }
    let (k3a, k3b) = ricci_rhs(&y3);
    let y4 = stage(&k3a, &k3b, dt);
    if !state_ok(&y4) {
        return None;
    }
    let (k4a, k4b) = ricci_rhs(&y4);
    let mut out = p.clone();
    for i in 0..out.a.len() {
        out.a[i] = p.a[i] + dt / 6.0 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i]);
        out.b[i] = p.b[i] + dt / 6.0 * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i]);
    }
    if state_ok(&out) {
        Some(out)
    } else {
        None
    }
}

fn diffusion_dt(p: &WarpedProfile, c: f64) -> f64 {
    let a_min = p.a.iter().copied().fold(f64::INFINITY, f64::min);
    let hs = a_min * p.h();
    c * hs * hs
}

/// One flow step. Tori are fixed points; sphere steps are rejected beyond
/// the stability bound and report a singularity if the profile degenerates.
pub fn step_ricci_flow(p: &WarpedProfile, dt: f64) -> Result<WarpedProfile, FlowError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::InvalidState(format!("step size {dt} invalid")));
    }
    if p.kind == ProfileKind::FlatTorus {
        let mut q = p.clone();
        q.time += dt;
        return Ok(q);
    }
    let stab = diffusion_dt(p, CFL_LIMIT);
    if dt > stab {
        return Err(FlowError::StepRejected {
            suggested_dt: diffusion_dt(p, CFL_DEFAULT),
        });
    }
    match rk4(p, dt) {
        Some(mut q) => {
            q.time = p.time + dt;
            enforce_axis_regularity(&mut q.a, q.grid_m);
            debug_assert!(q.b[0] == 0.0 && q.b[p.grid_m] == 0.0, "pole values drifted");
            Ok(q)
        }
        None => Err(FlowError::SingularityDetected {
            time: p.time,
            partial: None,
        }),
    }
}

/// Integrate from `t0` to `t1`, storing a thinned snapshot history.
///
/// The returned trajectory carries an a-posteriori error estimate from
/// re-running the final step at half size, and — for shrinking profiles — a
/// vanishing-time estimate extrapolated from the last snapshots.
pub fn integrate(
    start: &WarpedProfile,
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
) -> Result<FlowTrajectory, FlowError> {
    start.validate()?;
    if !(t1 > t0) {
        return Err(FlowError::OutOfDomain(format!(
            "integration span [{t0}, {t1}] is empty"
        )));
    }
    if start.kind == ProfileKind::FlatTorus {
        return exact_torus_trajectory(&start.sides, &[t0, t1], start.grid_m);
    }

    let span = t1 - t0;
    let mut p = start.clone();
    p.time = t0;
    let mut snaps = vec![p.clone()];
    let mut keep_every: usize = 1;
    let mut step_index: usize = 0;
    let mut last_step: Option<(WarpedProfile, f64)> = None;

    let mut t = t0;
    while t < t1 - 1e-13 * span {
        let mut dt = match ctrl.fixed_dt {
            Some(fixed) => fixed.min(t1 - t),
            None => diffusion_dt(&p, ctrl.cfl).min(t1 - t),
        };
        if ctrl.fixed_dt.is_none() && dt < ctrl.min_dt_fraction * span {
            return Err(singularity(t, snaps, ctrl));
        }
        let is_final = dt >= t1 - t - 1e-13 * span;
        if is_final {
            last_step = Some((p.clone(), dt));
        }
        let mut halvings = 0;
        let next = loop {
            match step_ricci_flow(&p, dt) {
                Ok(q) => break q,
                Err(FlowError::StepRejected { suggested_dt }) if ctrl.fixed_dt.is_none() => {
                    dt = suggested_dt;
                }
                Err(FlowError::SingularityDetected { .. }) if ctrl.fixed_dt.is_none() => {
                    halvings += 1;
                    dt *= 0.5;
                    if halvings > 48 || dt < ctrl.min_dt_fraction * span {
                        return Err(singularity(t, snaps, ctrl));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        p = next;
        t = p.time;
        step_index += 1;
        if step_index % keep_every == 0 {
            snaps.push(p.clone());
            if snaps.len() >= 2 * ctrl.max_snapshots {
                snaps = snaps.into_iter().step_by(2).collect();
                keep_every *= 2;
            }
        }
    }
    if snaps.last().map(|q| q.time) != Some(p.time) {
        snaps.push(p.clone());
    }

    let error_estimate = last_step.and_then(|(pre, dt)| {
        let half = rk4(&pre, 0.5 * dt)?;
        let quarter = rk4(&half, 0.5 * dt)?;
        let full = rk4(&pre, dt)?;
        let scale = full.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = full
            .b
            .iter()
            .zip(&quarter.b)
            .chain(full.a.iter().zip(&quarter.a))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Some(diff / scale)
    });

    let mut tr = FlowTrajectory {
        profiles: snaps,
        t0: f64::INFINITY,
        exact: false,
        d0: None,
        kappa: None,
        error_estimate,
    };
    if let Ok(est) = tr.estimate_vanishing_time() {
        if est > t1 {
            tr.t0 = est;
        }
    }
    Ok(tr)
}

fn singularity(t: f64, snaps: Vec<WarpedProfile>, _ctrl: &StepControl) -> FlowError {
    let partial = (!snaps.is_empty()).then(|| {
        Box::new(FlowTrajectory {
            profiles: snaps,
            t0: t,
            exact: false,
            d0: None,
            kappa: None,
            error_estimate: None,
        })
    });
    FlowError::SingularityDetected { time: t, partial }
}

impl FlowTrajectory {
    pub fn n(&self) -> usize {
        self.profiles[0].n
    }

    pub fn kind(&self) -> ProfileKind {
        self.profiles[0].kind
    }

    pub fn time_range(&self) -> (f64, f64) {
        (
            self.profiles[0].time,
            self.profiles[self.profiles.len() - 1].time,
        )
    }

    /// Structural invariants: ordered times below the final time, valid
    /// snapshots, and — for exact spheres — the closed-form radius law.
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.profiles.is_empty() {
            return Err(FlowError::InvalidState("trajectory has no snapshots".into()));
        }
        for w in self.profiles.windows(2) {
            if w[0].time >= w[1].time {
                return Err(FlowError::InvalidState(format!(
                    "snapshot times not increasing: {} then {}",
                    w[0].time, w[1].time
                )));
            }
        }
        for p in &self.profiles {
            p.validate()?;
            if p.time >= self.t0 {
                return Err(FlowError::InvalidState(format!(
                    "snapshot at t = {} is not before the final time {}",
                    p.time, self.t0
                )));
            }
        }
        if self.exact && self.kind() == ProfileKind::WarpedSphere {
            let nf = self.n() as f64;
            for p in &self.profiles {
                let m = p.grid_m;
                let r2 = p.b[m / 2] * p.b[m / 2];
                let want = 2.0 * (nf - 1.0) * (self.t0 - p.time);
                if (r2 - want).abs() > 1e-12 * want {
                    return Err(FlowError::InvalidState(format!(
                        "exact radius law violated at t = {}: r² = {r2}, want {want}",
                        p.time
                    )));
                }
            }
        }
        Ok(())
    }

    /// Metric at an arbitrary time: closed form for exact trajectories,
    /// snapshot interpolation (linear in each field) otherwise.
    pub fn metric_at(&self, t: f64) -> Result<WarpedProfile, FlowError> {
        let first = self
            .profiles
            .first()
            .ok_or_else(|| FlowError::InvalidState("trajectory has no snapshots".into()))?;
        if self.exact {
            return match first.kind {
                ProfileKind::WarpedSphere => {
                    let r2 = 2.0 * (first.n as f64 - 1.0) * (self.t0 - t);
                    if r2 <= 0.0 {
                        return Err(FlowError::OutOfDomain(format!(
                            "time {t} is not before the final time {}",
                            self.t0
                        )));
                    }
                    Ok(make_round_sphere(first.n, r2.sqrt(), first.grid_m, t)?)
                }
                ProfileKind::FlatTorus => {
                    let mut p = first.clone();
                    p.time = t;
                    Ok(p)
                }
            };
        }
        let last = self.profiles.last().unwrap();
        let span = (last.time - first.time).max(1e-300);
        if t < first.time - 1e-12 * span || t > last.time + 1e-12 * span {
            return Err(FlowError::OutOfDomain(format!(
                "time {t} outside the snapshot range [{}, {}]",
                first.time, last.time
            )));
        }
        let t = t.clamp(first.time, last.time);
        let idx = self.profiles.partition_point(|p| p.time <= t);
        if idx == 0 {
            return Ok(first.clone());
        }
        if idx == self.profiles.len() {
            return Ok(last.clone());
        }
        let (p0, p1) = (&self.profiles[idx - 1], &self.profiles[idx]);
        let theta = (t - p0.time) / (p1.time - p0.time);
        let mut out = p0.clone();
        out.time = t;
        for i in 0..out.a.len() {
            out.a[i] += theta * (p1.a[i] - p0.a[i]);
            out.b[i] += theta * (p1.b[i] - p0.b[i]);
        }
        Ok(out)
    }

    /// Vanishing-time estimate: least-squares linear fit of (min interior b)²
    /// against t over the last snapshots, extrapolated to zero.
    pub fn estimate_vanishing_time(&self) -> Result<f64, FlowError> {
        if self.kind() != ProfileKind::WarpedSphere {
            return Err(FlowError::InvalidState(
                "vanishing-time fit requires a shrinking sphere family".into(),
            ));
        }
        if self.profiles.len() < 2 {
            return Err(FlowError::InvalidState(
                "vanishing-time fit needs at least two snapshots".into(),
            ));
        }
        let k = self.profiles.len().min(8);
        let window = &self.profiles[self.profiles.len() - k..];
        let pts: Vec<(f64, f64)> = window
            .iter()
            .map(|p| {
                let bmin = p.b[1..p.grid_m]
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                (p.time, bmin * bmin)
            })
            .collect();
        let nf = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
        let (tm, ym) = (st / nf, sy / nf);
        let (cov, var) = pts.iter().fold((0.0, 0.0), |(c, v), (t, y)| {
            (c + (t - tm) * (y - ym), v + (t - tm) * (t - tm))
        });
        if var == 0.0 {
            return Err(FlowError::InvalidState("degenerate fit window".into()));
        }
        let slope = cov / var;
        if slope >= 0.0 {
            return Err(FlowError::InvalidState(
                "profile is not shrinking; no vanishing time".into(),
            ));
        }
        Ok(tm - ym / slope)
    }

    /// Fitted Type I constant D0 = sup over snapshots of |Rm|·(T0 - t).
    pub fn type_one_constant(&self) -> Result<f64, FlowError> {
        if !self.t0.is_finite() && self.kind() == ProfileKind::WarpedSphere {
            return Err(FlowError::InvalidState(
                "Type I constant needs a finite final time".into(),
            ));
        }
        if self.profiles.len() < 2 {
            return Err(FlowError::InvalidState(
                "Type I fit needs at least two snapshots".into(),
            ));
        }
        let mut d0 = 0.0f64;
        for p in &self.profiles {
            let c = p.curvature()?;
            d0 = d0.max(c.max_rm() * (self.t0 - p.time));
        }
        Ok(d0)
    }

    /// Fitted non-collapsing constant: the minimum of |B(pole, ρ)|/ρⁿ over
    /// snapshots and scales ρ with |Rm| ≤ ρ⁻² on the ball. Curvature is
    /// checked on the time slice; on the model families |Rm| is nondecreasing
    /// in t, so the backward parabolic window is implied.
    pub fn kappa_estimate(&self, scales: &[f64]) -> Result<f64, FlowError> {
        if scales.is_empty() {
            return Err(FlowError::NoAdmissibleScale);
        }
        let mut best: Option<f64> = None;
        for p in &self.profiles {
            let c = p.curvature()?;
            let rm = c.max_rm();
            let rho_max = if rm > 0.0 { rm.powf(-0.5) } else { f64::INFINITY };
            for &rho in scales {
                if !(rho > 0.0) || rho > rho_max {
                    continue;
                }
                let poles: &[f64] = match p.kind {
                    ProfileKind::WarpedSphere => &[0.0, 1.0],
                    ProfileKind::FlatTorus => &[0.0],
                };
                for &pole in poles {
                    let v = p.ball_volume(pole, rho)? / rho.powi(p.n as i32);
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        best.ok_or(FlowError::NoAdmissibleScale)
    }

    /// Distance and ball-volume doubling exponents between two negative
    /// times: exponent = log(d(t1)/d(t2)) / log(|t1|/|t2|). The comparability
    /// constant multiplying D0 is not explicit, so the pass cap on the
    /// exponent magnitude is the structural value 1.
    pub fn doubling_checks(
        &self,
        pairs: &[(f64, f64)],
        t1: f64,
        t2: f64,
    ) -> Result<CheckReport, FlowError> {
        if !(t2 < t1 && t1 < 0.0) {
            return Err(FlowError::OutOfDomain(format!(
                "need t2 < t1 < 0, got t1 = {t1}, t2 = {t2}"
            )));
        }
        let p1 = self.metric_at(t1)?;
        let p2 = self.metric_at(t2)?;
        let log_time = (t1.abs() / t2.abs()).ln();
        let mut report = CheckReport::new("doubling");
        let mut worst: f64 = 0.0;
        for &(x, y) in pairs {
            let (d1, d2) = match self.kind() {
                ProfileKind::WarpedSphere => (p1.axis_distance(x, y)?, p2.axis_distance(x, y)?),
                ProfileKind::FlatTorus => {
                    let mut u = vec![0.0; self.n()];
                    let mut v = vec![0.0; self.n()];
                    u[0] = x;
                    v[0] = y;
                    (p1.torus_distance(&u, &v)?, p2.torus_distance(&u, &v)?)
                }
            };
            if d1 == 0.0 || d2 == 0.0 {
                report.note(format!("pair ({x}, {y}) degenerate, skipped"));
                continue;
            }
            let exp_d = (d1 / d2).ln() / log_time;
            report.observe(exp_d);
            worst = worst.max(exp_d.abs());

            // Comparability of ball volumes at a fixed radius: the ratio
            // should stay near 1 across the two times. Reported, not gated.
            let rho = 0.5 * d1;
            let v1 = p1.ball_volume(0.0, rho)?;
            let v2 = p2.ball_volume(0.0, rho)?;
            if v1 > 0.0 && v2 > 0.0 {
                let ratio = v1 / v2;
                let prev = report.constant("volume_ratio").unwrap_or(1.0);
                if ratio.ln().abs() >= prev.ln().abs() {
                    report.set_constant("volume_ratio", ratio);
                }
            }
        }
        if report.samples == 0 {
            report.note("no nondegenerate pairs");
        }
        report.set_constant("distance_exponent", report.ratio_max);
        let cap = 1.0;
        report.set_constant("exponent_cap", cap);
        report.margin = cap - worst;
        report.pass = report.margin >= 0.0;
        Ok(report)
    }

    /// Rescaled flow g̃(t̃) = g(t)/(T0 - t), t̃ = -ln(T0 - t), for T0 = 1.
    /// The exact shrinking sphere becomes a static round sphere.
    pub fn normalize_type_one(&self) -> Result<FlowTrajectory, FlowError> {
        if (self.t0 - 1.0).abs() > 1e-12 {
            return Err(FlowError::InvalidState(format!(
                "normalization assumes final time 1, trajectory has {}",
                self.t0
            )));
        }
        let mut profiles = Vec::with_capacity(self.profiles.len());
        for p in &self.profiles {
            if p.time >= 1.0 {
                return Err(FlowError::OutOfDomain(format!(
                    "snapshot at t = {} is not before 1",
                    p.time
                )));
            }
            let lam = 1.0 / (1.0 - p.time).sqrt();
            let mut q = p.rescaled(lam);
            q.time = -(1.0 - p.time).ln();
            profiles.push(q);
        }
        Ok(FlowTrajectory {
            profiles,
            t0: f64::INFINITY,
            exact: false,
            d0: None,
            kappa: None,
            error_estimate: None,
        })
    }
}
