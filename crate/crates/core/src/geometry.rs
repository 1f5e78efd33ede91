//! Model geometries: rotationally symmetric warped products and flat tori.
//!
//! A warped-product metric on the n-sphere is written in a fixed coordinate
//! gauge on `x ∈ [0, 1]` as
//!
//! ```text
//! g = a(x)² dx² + b(x)² g_{S^{n-1}},
//! ```
//!
//! where `g_{S^{n-1}}` is the round unit metric on the orbit spheres. The axis
//! endpoints `x = 0, 1` are the two poles: `b` vanishes there and the smooth
//! closing of the metric forces `∂b/∂s → ±1`, with `s` the arclength
//! `ds = a dx`. All curvature quantities reduce to `b` and its arclength
//! derivatives:
//!
//! ```text
//! K_rad = -b_ss / b                    (planes containing the axis direction)
//! K_sph = (1 - b_s²) / b²              (planes tangent to the orbit spheres)
//! Ric_rad = (n-1) K_rad
//! Ric_sph = K_rad + (n-2) K_sph
//! R = 2(n-1) K_rad + (n-1)(n-2) K_sph
//! ```
//!
//! at every interior node; at the poles both sectional curvatures share the
//! common limit `-lim b_ss/b`, recovered by Richardson extrapolation from the
//! first interior nodes. The curvature magnitude `|Rm|` is reported as the
//! larger of the two sectional curvature magnitudes.
//!
//! Flat tori `∏ [0, L_i)` serve as static, scalar-flat control models; their
//! curvature fields are identically zero.

use crate::fd::{self, Parity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discriminates the two supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    WarpedSphere,
    FlatTorus,
}

/// Snapshot of a model geometry at one time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarpedProfile {
    /// Dimension of the manifold (n ≥ 2).
    pub n: usize,
    pub kind: ProfileKind,
    /// Flow time the snapshot belongs to.
    pub time: f64,
    /// Number of grid cells M; warped profiles store M+1 nodes.
    pub grid_m: usize,
    /// Radial metric coefficient a(x_i) > 0 (warped spheres only).
    pub a: Vec<f64>,
    /// Warping function b(x_i) ≥ 0, zero exactly at the poles (warped spheres only).
    pub b: Vec<f64>,
    /// Side lengths L_1..L_n (flat tori only).
    pub sides: Vec<f64>,
}

/// Pointwise curvature data for one profile.
///
/// For flat tori every field is constant zero and stored with a single entry.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    /// Sectional curvature of planes containing the radial direction.
    pub k_rad: Vec<f64>,
    /// Sectional curvature of planes tangent to the orbit spheres.
    pub k_sph: Vec<f64>,
    /// Ricci eigenvalue in the radial direction.
    pub ric_rad: Vec<f64>,
    /// Ricci eigenvalue in each spherical direction.
    pub ric_sph: Vec<f64>,
    /// Scalar curvature.
    pub r: Vec<f64>,
    /// Curvature magnitude max(|K_rad|, |K_sph|).
    pub rm: Vec<f64>,
}

impl CurvatureField {
    pub fn max_rm(&self) -> f64 {
        self.rm.iter().copied().fold(0.0, f64::max)
    }

    pub fn r_range(&self) -> (f64, f64) {
        let lo = self.r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate metric: b = {b} at interior node {index}")]
    DegenerateMetric { index: usize, b: f64 },
    #[error("operation requires a pole coordinate (x = 0 or 1), got {0}")]
    NotAPole(f64),
    #[error("operation not supported for kind {0:?}")]
    UnsupportedKind(ProfileKind),
}

/// Surface area of the unit d-sphere: A_0 = 2, A_1 = 2π, A_d = 2π A_{d-2}/(d-1).
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => std::f64::consts::TAU,
        _ => std::f64::consts::TAU * unit_sphere_area(d - 2) / (d - 1) as f64,
    }
}

/// Volume of the unit ball in R^n: A_{n-1} / n.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n - 1) / n as f64
}

/// Round n-sphere of radius r: a ≡ π r, b = r sin(π x).
pub fn make_round_sphere(
    n: usize,
    r: f64,
    grid_m: usize,
    time: f64,
) -> Result<WarpedProfile, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidParameter(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(GeometryError::InvalidParameter(format!(
            "radius must be positive and finite, got {r}"
        )));
    }
    if grid_m < 16 || grid_m % 2 != 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "grid size must be an even number ≥ 16, got {grid_m}"
        )));
    }
    let h = 1.0 / grid_m as f64;
    let a = vec![std::f64::consts::PI * r; grid_m + 1];
    let mut b: Vec<f64> = (0..=grid_m)
        .map(|i| r * (std::f64::consts::PI * i as f64 * h).sin())
        .collect();
    b[0] = 0.0;
    b[grid_m] = 0.0;
    Ok(WarpedProfile {
        n,
        kind: ProfileKind::WarpedSphere,
        time,
        grid_m,
        a,
        b,
        sides: Vec::new(),
    })
}

/// Flat torus with the given side lengths (one per dimension).
pub fn make_flat_torus(sides: &[f64], grid_m: usize, time: f64) -> Result<WarpedProfile, GeometryError> {
    let n = sides.len();
    if n < 2 {
        return Err(GeometryError::InvalidParameter(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    if sides.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(GeometryError::InvalidParameter(
            "all side lengths must be positive and finite".into(),
        ));
    }
    if grid_m < 16 {
        return Err(GeometryError::InvalidParameter(format!(
            "grid size must be at least 16, got {grid_m}"
        )));
    }
    Ok(WarpedProfile {
        n,
        kind: ProfileKind::FlatTorus,
        time,
        grid_m,
        a: Vec::new(),
        b: Vec::new(),
        sides: sides.to_vec(),
    })
}

impl WarpedProfile {
    /// Grid spacing in the coordinate x.
    pub fn h(&self) -> f64 {
        1.0 / self.grid_m as f64
    }

    /// Structural sanity of the stored fields. Tolerances here are loose
    /// integrity checks, not accuracy statements.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.n < 2 {
            return Err(GeometryError::InvalidParameter(format!(
                "dimension must be at least 2, got {}",
                self.n
            )));
        }
        match self.kind {
            ProfileKind::WarpedSphere => {
                let m = self.grid_m;
                if self.a.len() != m + 1 || self.b.len() != m + 1 {
                    return Err(GeometryError::InvalidParameter(format!(
                        "field lengths {}/{} do not match grid {}",
                        self.a.len(),
                        self.b.len(),
                        m + 1
                    )));
                }
                if self.a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(GeometryError::InvalidParameter(
                        "metric coefficient a must be positive and finite".into(),
                    ));
                }
                for i in 1..m {
                    if !(self.b[i] > 0.0) || !self.b[i].is_finite() {
                        return Err(GeometryError::DegenerateMetric {
                            index: i,
                            b: self.b[i],
                        });
                    }
                }
                let scale = self.b.iter().copied().fold(0.0, f64::max);
                if self.b[0].abs() > 1e-12 * scale || self.b[m].abs() > 1e-12 * scale {
                    return Err(GeometryError::InvalidParameter(
                        "warping function must vanish at both poles".into(),
                    ));
                }
                let bs = self.b_s();
                if (bs[0] - 1.0).abs() > 0.05 || (bs[m] + 1.0).abs() > 0.05 {
                    return Err(GeometryError::InvalidParameter(format!(
                        "pole regularity broken: b_s = {} at x=0, {} at x=1",
                        bs[0], bs[m]
                    )));
                }
                Ok(())
            }
            ProfileKind::FlatTorus => {
                if self.sides.len() != self.n {
                    return Err(GeometryError::InvalidParameter(format!(
                        "torus stores {} side lengths for dimension {}",
                        self.sides.len(),
                        self.n
                    )));
                }
                if self.sides.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(GeometryError::InvalidParameter(
                        "all side lengths must be positive and finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Arclength derivative b_s = (1/a) ∂b/∂x at every node.
    pub fn b_s(&self) -> Vec<f64> {
        let h = self.h();
        let bx = fd::deriv1(&self.b, h, Parity::Odd, Parity::Odd);
        bx.iter().zip(&self.a).map(|(d, a)| d / a).collect()
    }

    /// Second arclength derivative b_ss = (b_xx - b_x a_x / a) / a².
    pub fn b_ss(&self) -> Vec<f64> {
        let h = self.h();
        let bx = fd::deriv1(&self.b, h, Parity::Odd, Parity::Odd);
        let bxx = fd::deriv2(&self.b, h, Parity::Odd, Parity::Odd);
        let ax = fd::deriv1(&self.a, h, Parity::Even, Parity::Even);
        (0..=self.grid_m)
            .map(|i| (bxx[i] - bx[i] * ax[i] / self.a[i]) / (self.a[i] * self.a[i]))
            .collect()
    }

    /// Arclength from the x=0 pole to every node.
    pub fn arclength(&self) -> Vec<f64> {
        fd::cumulative_trapezoid(&self.a, self.h())
    }

    /// Total arclength of the axis (pole-to-pole distance).
    pub fn total_arclength(&self) -> f64 {
        fd::trapezoid(&self.a, self.h())
    }

    /// The ratio b_ss / b, finite everywhere including the poles, where the
    /// smooth limit is recovered from the first two interior nodes.
    pub fn b_ss_over_b(&self) -> Vec<f64> {
        let m = self.grid_m;
        let b_ss = self.b_ss();
        let s = self.arclength();
        let mut q = vec![0.0; m + 1];
        for i in 1..m {
            q[i] = b_ss[i] / self.b[i];
        }
        q[0] = fd::axis_limit(q[1], s[1], q[2], s[2]);
        let l = s[m];
        q[m] = fd::axis_limit(q[m - 1], l - s[m - 1], q[m - 2], l - s[m - 2]);
        q
    }

    /// Pointwise curvature of the profile.
    pub fn curvature(&self) -> Result<CurvatureField, GeometryError> {
        match self.kind {
            ProfileKind::FlatTorus => Ok(CurvatureField {
                k_rad: vec![0.0],
                k_sph: vec![0.0],
                ric_rad: vec![0.0],
                ric_sph: vec![0.0],
                r: vec![0.0],
                rm: vec![0.0],
            }),
            ProfileKind::WarpedSphere => {
                self.validate()?;
                let m = self.grid_m;
                let nf = self.n as f64;
                let b_s = self.b_s();
                let q = self.b_ss_over_b();
                let mut k_rad = vec![0.0; m + 1];
                let mut k_sph = vec![0.0; m + 1];
                for i in 0..=m {
                    k_rad[i] = -q[i];
                }
                for i in 1..m {
                    k_sph[i] = (1.0 - b_s[i] * b_s[i]) / (self.b[i] * self.b[i]);
                }
                // At a smooth pole all sectional curvatures coincide.
                k_sph[0] = k_rad[0];
                k_sph[m] = k_rad[m];
                let mut ric_rad = vec![0.0; m + 1];
                let mut ric_sph = vec![0.0; m + 1];
                let mut r = vec![0.0; m + 1];
                let mut rm = vec![0.0; m + 1];
                for i in 0..=m {
                    ric_rad[i] = (nf - 1.0) * k_rad[i];
                    ric_sph[i] = k_rad[i] + (nf - 2.0) * k_sph[i];
                    r[i] = 2.0 * (nf - 1.0) * k_rad[i] + (nf - 1.0) * (nf - 2.0) * k_sph[i];
                    rm[i] = k_rad[i].abs().max(k_sph[i].abs());
                }
                Ok(CurvatureField {
                    k_rad,
                    k_sph,
                    ric_rad,
                    ric_sph,
                    r,
                    rm,
                })
            }
        }
    }

    /// Trapezoid measure weights w_i with Σ w_i f_i ≈ ∫ f dμ for radial
    /// fields. The pole rows carry weight zero because b vanishes there.
    pub fn measure_weights(&self) -> Vec<f64> {
        assert_eq!(self.kind, ProfileKind::WarpedSphere);
        let m = self.grid_m;
        let h = self.h();
        let area = unit_sphere_area(self.n - 1);
        (0..=m)
            .map(|i| {
                let end = if i == 0 || i == m { 0.5 } else { 1.0 };
                end * area * self.b[i].powi(self.n as i32 - 1) * self.a[i] * h
            })
            .collect()
    }

    /// Total Riemannian volume.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ProfileKind::WarpedSphere => self.measure_weights().iter().sum(),
            ProfileKind::FlatTorus => self.sides.iter().product(),
        }
    }

    /// Volume of the geodesic ball of radius `rho` about a pole
    /// (`pole_x` must be 0.0 or 1.0). Nondecreasing in `rho`, saturating at
    /// the total volume.
    pub fn ball_volume(&self, pole_x: f64, rho: f64) -> Result<f64, GeometryError> {
        match self.kind {
            ProfileKind::WarpedSphere => {
                if pole_x != 0.0 && pole_x != 1.0 {
                    return Err(GeometryError::NotAPole(pole_x));
                }
                if rho <= 0.0 {
                    return Ok(0.0);
                }
                let m = self.grid_m;
                let h = self.h();
                let area = unit_sphere_area(self.n - 1);
                let mut integrand: Vec<f64> = (0..=m)
                    .map(|i| area * self.b[i].powi(self.n as i32 - 1) * self.a[i])
                    .collect();
                let mut s = self.arclength();
                if pole_x == 1.0 {
                    integrand.reverse();
                    let total = s[m];
                    s = s.iter().rev().map(|v| total - v).collect();
                }
                if rho >= s[m] {
                    return Ok(fd::trapezoid(&integrand, h));
                }
                // Fractional node index where arclength reaches rho.
                let mut idx = 0;
                while idx < m && s[idx + 1] < rho {
                    idx += 1;
                }
                let span = s[idx + 1] - s[idx];
                let frac = idx as f64 + (rho - s[idx]) / span;
                Ok(fd::trapezoid_partial(&integrand, h, frac))
            }
            ProfileKind::FlatTorus => {
                if rho <= 0.0 {
                    return Ok(0.0);
                }
                let total = self.volume();
                let min_side = self.sides.iter().copied().fold(f64::INFINITY, f64::min);
                let euclid = unit_ball_volume(self.n) * rho.powi(self.n as i32);
                if 2.0 * rho <= min_side {
                    Ok(euclid)
                } else {
                    // Beyond the injectivity radius the ball self-overlaps;
                    // the Euclidean value capped at the total volume keeps the
                    // monotone/saturating contract and is exact in both limits.
                    Ok(euclid.min(total))
                }
            }
        }
    }

    /// Geodesic distance between two axis coordinates (warped spheres).
    pub fn axis_distance(&self, x1: f64, x2: f64) -> Result<f64, GeometryError> {
        if self.kind != ProfileKind::WarpedSphere {
            return Err(GeometryError::UnsupportedKind(self.kind));
        }
        if !(0.0..=1.0).contains(&x1) || !(0.0..=1.0).contains(&x2) {
            return Err(GeometryError::InvalidParameter(format!(
                "axis coordinates must lie in [0,1], got {x1}, {x2}"
            )));
        }
        let h = self.h();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let upper = fd::trapezoid_partial(&self.a, h, hi / h);
        let lower = fd::trapezoid_partial(&self.a, h, lo / h);
        Ok(upper - lower)
    }

    /// Geodesic distance on the flat torus: the shortest lattice-shifted
    /// Euclidean displacement.
    pub fn torus_distance(&self, p1: &[f64], p2: &[f64]) -> Result<f64, GeometryError> {
        if self.kind != ProfileKind::FlatTorus {
            return Err(GeometryError::UnsupportedKind(self.kind));
        }
        if p1.len() != self.n || p2.len() != self.n {
            return Err(GeometryError::InvalidParameter(format!(
                "points must have {} coordinates",
                self.n
            )));
        }
        let mut d2 = 0.0;
        for i in 0..self.n {
            let l = self.sides[i];
            let raw = (p1[i] - p2[i]).rem_euclid(l);
            let d = raw.min(l - raw);
            d2 += d * d;
        }
        Ok(d2.sqrt())
    }

    /// Uniform rescaling of all lengths: g → λ² g.
    pub fn rescaled(&self, lambda: f64) -> WarpedProfile {
        let mut p = self.clone();
        for v in &mut p.a {
            *v *= lambda;
        }
        for v in &mut p.b {
            *v *= lambda;
        }
        for v in &mut p.sides {
            *v *= lambda;
        }
        p
    }

    /// Arclength gradient u_s of a radial (even-parity) field.
    pub fn radial_gradient(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(self.kind, ProfileKind::WarpedSphere);
        assert_eq!(u.len(), self.grid_m + 1);
        let ux = fd::deriv1(u, self.h(), Parity::Even, Parity::Even);
        ux.iter().zip(&self.a).map(|(d, a)| d / a).collect()
    }

    /// Laplace–Beltrami operator of a radial field:
    /// Δu = u_ss + (n-1)(b_s/b) u_s, with the pole limit Δu = n·u_ss.
    pub fn radial_laplacian(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(self.kind, ProfileKind::WarpedSphere);
        assert_eq!(u.len(), self.grid_m + 1);
        let m = self.grid_m;
        let h = self.h();
        let nf = self.n as f64;
        let ux = fd::deriv1(u, h, Parity::Even, Parity::Even);
        let uxx = fd::deriv2(u, h, Parity::Even, Parity::Even);
        let ax = fd::deriv1(&self.a, h, Parity::Even, Parity::Even);
        let b_s = self.b_s();
        let mut out = vec![0.0; m + 1];
        for i in 0..=m {
            let u_ss = (uxx[i] - ux[i] * ax[i] / self.a[i]) / (self.a[i] * self.a[i]);
            if i == 0 || i == m {
                out[i] = nf * u_ss;
            } else {
                let u_s = ux[i] / self.a[i];
                out[i] = u_ss + (nf - 1.0) * (b_s[i] / self.b[i]) * u_s;
            }
        }
        out
    }

    /// Radius estimate for profiles expected to be round: total arclength / π.
    pub fn round_radius_estimate(&self) -> f64 {
        self.total_arclength() / std::f64::consts::PI
    }

    /// Sup-norm deviation of b_s from the round-sphere profile cos(π s / L),
    /// a gauge-invariant roundness measure.
    pub fn roundness_deviation(&self) -> f64 {
        let b_s = self.b_s();
        let s = self.arclength();
        let l = s[self.grid_m];
        b_s.iter()
            .zip(&s)
            .map(|(v, si)| (v - (std::f64::consts::PI * si / l).cos()).abs())
            .fold(0.0, f64::max)
    }
}
