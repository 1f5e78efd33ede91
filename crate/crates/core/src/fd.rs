//! Finite-difference stencils on the uniform profile grid.
//!
//! All radial fields live on the closed interval `x ∈ [0, 1]` sampled at
//! `M + 1` uniform nodes. Fields extend through the axis endpoints with a
//! definite parity: rotationally symmetric scalars (metric coefficient `a`,
//! scalar curvature, kernel densities) are even, while the warping function
//! `b` and arclength derivatives of even fields are odd. Ghost nodes obtained
//! by parity reflection let the same fourth-order central stencils run all the
//! way to the endpoints:
//!
//! ```text
//! f'(x_i)  = (f_{i-2} - 8 f_{i-1} + 8 f_{i+1} - f_{i+2}) / (12 h)
//! f''(x_i) = (-f_{i-2} + 16 f_{i-1} - 30 f_i + 16 f_{i+1} - f_{i+2}) / (12 h²)
//! ```
//!
//! Fourth order matters here: ratios such as `(1 - b_s²)/b²` lose two powers
//! of `h` to cancellation near the axis, so second-order first derivatives
//! would leave an O(1) relative error at the first interior node.

/// Reflection symmetry of a radial field across an axis endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `f(-x) = f(x)`; derivative vanishes at the endpoint.
    Even,
    /// `f(-x) = -f(x)`; the field itself vanishes at the endpoint.
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// Parity of the derivative of a field with this parity.
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Value at signed node index `i` (which may stick out past either end),
/// extended by parity reflection about both endpoints.
#[inline]
fn ghost(f: &[f64], i: isize, p0: Parity, p1: Parity) -> f64 {
    let m = (f.len() - 1) as isize;
    if i < 0 {
        p0.sign() * f[(-i) as usize]
    } else if i > m {
        p1.sign() * f[(2 * m - i) as usize]
    } else {
        f[i as usize]
    }
}

/// Fourth-order first derivative with respect to the grid coordinate `x`.
pub fn deriv1(f: &[f64], h: f64, p0: Parity, p1: Parity) -> Vec<f64> {
    let m = f.len() - 1;
    let mut out = vec![0.0; m + 1];
    for i in 0..=m {
        let j = i as isize;
        let fm2 = ghost(f, j - 2, p0, p1);
        let fm1 = ghost(f, j - 1, p0, p1);
        let fp1 = ghost(f, j + 1, p0, p1);
        let fp2 = ghost(f, j + 2, p0, p1);
        out[i] = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    }
    out
}

/// Fourth-order second derivative with respect to the grid coordinate `x`.
pub fn deriv2(f: &[f64], h: f64, p0: Parity, p1: Parity) -> Vec<f64> {
    let m = f.len() - 1;
    let mut out = vec![0.0; m + 1];
    for i in 0..=m {
        let j = i as isize;
        let fm2 = ghost(f, j - 2, p0, p1);
        let fm1 = ghost(f, j - 1, p0, p1);
        let fp1 = ghost(f, j + 1, p0, p1);
        let fp2 = ghost(f, j + 2, p0, p1);
        out[i] = (-fm2 + 16.0 * fm1 - 30.0 * f[i] + 16.0 * fp1 - fp2) / (12.0 * h * h);
    }
    out
}

/// Fourth-order first derivative on a periodic grid of `m` cells
/// (`f.len() == m`, node `m` identified with node `0`).
pub fn deriv1_periodic(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let at = |k: isize| f[(i as isize + k).rem_euclid(m as isize) as usize];
        out[i] = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
    }
    out
}

/// Trapezoid rule over the full grid with spacing `h`.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    let m = f.len() - 1;
    let mut sum = 0.5 * (f[0] + f[m]);
    for v in &f[1..m] {
        sum += v;
    }
    sum * h
}

/// Trapezoid rule from node 0 up to the fractional node position `x_frac`
/// (in units of `h`), interpolating the integrand linearly inside the
/// partial final cell. Used for ball volumes and partial distances, where a
/// whole-cell cutoff would cost an order of accuracy.
pub fn trapezoid_partial(f: &[f64], h: f64, x_frac: f64) -> f64 {
    let m = f.len() - 1;
    if x_frac <= 0.0 {
        return 0.0;
    }
    let full = (x_frac.floor() as usize).min(m);
    let mut sum = 0.0;
    for i in 0..full {
        sum += 0.5 * (f[i] + f[i + 1]);
    }
    if full < m {
        let frac = (x_frac - full as f64).min(1.0);
        let f_end = f[full] + frac * (f[full + 1] - f[full]);
        sum += 0.5 * frac * (f[full] + f_end);
    }
    sum * h
}

/// Cumulative trapezoid: `out[i] = ∫_0^{x_i} f dx`.
pub fn cumulative_trapezoid(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 1..f.len() {
        out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    out
}

/// Even-function limit at the axis by Richardson extrapolation.
///
/// For a smooth even quantity `q(s) = q₀ + q₂ s² + O(s⁴)` known at arclengths
/// `s₁, s₂` from the endpoint, eliminate the `s²` term:
/// `q₀ = (s₂² q₁ - s₁² q₂) / (s₂² - s₁²)`.
pub fn axis_limit(q1: f64, s1: f64, q2: f64, s2: f64) -> f64 {
    let w1 = s2 * s2;
    let w2 = s1 * s1;
    (w1 * q1 - w2 * q2) / (w1 - w2)
}

/// Nodes of the `k`-point Gauss–Legendre rule on [-1, 1], with weights.
/// Only the 5-point rule is needed (cell averages of kernel seeds).
pub fn gauss_legendre_5() -> [(f64, f64); 5] {
    let a = (245.0 - 14.0 * 70.0_f64.sqrt()).sqrt() / 21.0;
    let b = (245.0 + 14.0 * 70.0_f64.sqrt()).sqrt() / 21.0;
    let wa = (322.0 + 13.0 * 70.0_f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0_f64.sqrt()) / 900.0;
    [
        (-b, wb),
        (-a, wa),
        (0.0, 128.0 / 225.0),
        (a, wa),
        (b, wb),
    ]
}
