//! Closed-form Stokes solutions used as benchmarks.

use std::f64::consts::PI;

use crate::mesh::Point;

/// An exact Stokes solution `(u, p)` with body force `f = -ν∆u + ∇p`.
///
/// `hint` is a point inside the cell (or on the side of the face) from which the
/// evaluation is made; it selects the branch of multi-valued traces on a crack.
pub trait ExactSolution: Sync {
    fn velocity(&self, x: Point, hint: Option<Point>) -> [f64; 2];

    /// `g[i][j] = ∂u_i / ∂x_j`
    fn velocity_gradient(&self, x: Point, hint: Option<Point>) -> [[f64; 2]; 2];

    fn pressure(&self, x: Point, hint: Option<Point>) -> f64;

    fn body_force(&self, x: Point) -> [f64; 2];

    fn viscosity(&self) -> f64 {
        1.0
    }

    /// Points where the gradient or pressure blow up.
    fn singular_points(&self) -> &[Point] {
        &[]
    }

    /// Range of the polar angle on the domain, for solutions written in polar form.
    fn angular_branch(&self) -> Option<(f64, f64)> {
        None
    }

    /// True when the body force is a gradient, so its Helmholtz projection is zero.
    fn helmholtz_projection_is_zero(&self) -> bool;
}

const ORIGIN: [Point; 1] = [[0.0, 0.0]];

/// Polar coordinates `(r, θ)` with `θ ∈ [0, 2π)`. On the positive x-axis the
/// hint decides between `θ = 0` (hint above) and `θ = 2π` (hint below) when
/// `cut_on_positive_x` is set.
fn polar(x: Point, hint: Option<Point>, cut_on_positive_x: bool) -> (f64, f64) {
    let r = x[0].hypot(x[1]);
    if x[1] == 0.0 && x[0] > 0.0 {
        let below = cut_on_positive_x && hint.is_some_and(|h| h[1] < 0.0);
        return (r, if below { 2.0 * PI } else { 0.0 });
    }
    let mut theta = x[1].atan2(x[0]);
    if theta < 0.0 {
        theta += 2.0 * PI;
    }
    (r, theta)
}

/// Chain rule for `u_i = r^a G_i(θ)`: returns `∂u_i/∂x_j` given
/// `∂_r u_i` and `r^{-1} ∂_θ u_i`.
fn cartesian_gradient(theta: f64, dr: [f64; 2], dtheta_over_r: [f64; 2]) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        g[i][0] = c * dr[i] - s * dtheta_over_r[i];
        g[i][1] = s * dr[i] + c * dtheta_over_r[i];
    }
    g
}

/// `u = (3/2)√r (cos(θ/2) − cos(3θ/2), 3 sin(θ/2) − sin(3θ/2))`,
/// `p = −6 r^{−1/2} cos(θ/2)`, `f = 0`.
///
/// On the unit square the angle stays in `[0, π/2]`; on the cracked square it
/// covers `[0, 2π]` and the slit carries two traces.
#[derive(Debug, Clone, Copy)]
pub struct CornerSingularFlow {
    crack: bool,
    nu: f64,
}

impl CornerSingularFlow {
    pub fn unit_square() -> Self {
        CornerSingularFlow { crack: false, nu: 1.0 }
    }

    pub fn cracked_square() -> Self {
        CornerSingularFlow { crack: true, nu: 1.0 }
    }

    /// Same velocity with pressure `ν p`, which keeps `f = 0`.
    pub fn with_viscosity(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }
}

impl ExactSolution for CornerSingularFlow {
    fn velocity(&self, x: Point, hint: Option<Point>) -> [f64; 2] {
        let (r, t) = polar(x, hint, self.crack);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = 1.5 * r.sqrt();
        [
            s * ((t / 2.0).cos() - (1.5 * t).cos()),
            s * (3.0 * (t / 2.0).sin() - (1.5 * t).sin()),
        ]
    }

    fn velocity_gradient(&self, x: Point, hint: Option<Point>) -> [[f64; 2]; 2] {
        let (r, t) = polar(x, hint, self.crack);
        if r == 0.0 {
            return [[f64::NAN; 2]; 2];
        }
        let g = [(t / 2.0).cos() - (1.5 * t).cos(), 3.0 * (t / 2.0).sin() - (1.5 * t).sin()];
        let dg = [
            -0.5 * (t / 2.0).sin() + 1.5 * (1.5 * t).sin(),
            1.5 * (t / 2.0).cos() - 1.5 * (1.5 * t).cos(),
        ];
        let rs = r.sqrt();
        let dr = [0.75 / rs * g[0], 0.75 / rs * g[1]];
        let dt = [1.5 / rs * dg[0], 1.5 / rs * dg[1]];
        cartesian_gradient(t, dr, dt)
    }

    fn pressure(&self, x: Point, hint: Option<Point>) -> f64 {
        let (r, t) = polar(x, hint, self.crack);
        if r == 0.0 {
            return f64::NAN;
        }
        -6.0 * self.nu / r.sqrt() * (t / 2.0).cos()
    }

    fn body_force(&self, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn viscosity(&self) -> f64 {
        self.nu
    }

    fn singular_points(&self) -> &[Point] {
        &ORIGIN
    }

    fn angular_branch(&self) -> Option<(f64, f64)> {
        Some(if self.crack { (0.0, 2.0 * PI) } else { (0.0, 0.5 * PI) })
    }

    fn helmholtz_projection_is_zero(&self) -> bool {
        true
    }
}

/// Singular exponent of the re-entrant corner, stored as the exact rational.
pub const LSHAPE_LAMBDA: f64 = 856399.0 / 1572864.0;
/// Interior angle of the re-entrant corner.
pub const LSHAPE_OMEGA: f64 = 1.5 * PI;

/// Corner flow on the L-shape: `u = r^λ (…)`, `p = ν p₁ + x³ + y³` and
/// `f = ∇(x³ + y³)`, with `−∆u + ∇p₁ = 0`.
#[derive(Debug, Clone, Copy)]
pub struct LShapeFlow {
    nu: f64,
    lambda: f64,
    cos_lw: f64,
}

/// `ψ` and its first three derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Psi {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl LShapeFlow {
    pub fn new(nu: f64) -> Self {
        LShapeFlow {
            nu,
            lambda: LSHAPE_LAMBDA,
            cos_lw: (LSHAPE_LAMBDA * LSHAPE_OMEGA).cos(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn psi(&self, t: f64) -> Psi {
        let (l, c) = (self.lambda, self.cos_lw);
        let (a, b) = (1.0 + l, 1.0 - l);
        let (sa, ca) = (a * t).sin_cos();
        let (sb, cb) = (b * t).sin_cos();
        Psi {
            value: sa * c / a - ca - sb * c / b + cb,
            d1: ca * c + a * sa - cb * c - b * sb,
            d2: -a * sa * c + a * a * ca + b * sb * c - b * b * cb,
            d3: -a * a * ca * c - a * a * a * sa + b * b * cb * c + b * b * b * sb,
        }
    }

    /// Viscosity-independent part `p₁` of the pressure.
    pub fn p1(&self, x: Point) -> f64 {
        let (r, t) = polar(x, None, false);
        if r == 0.0 {
            return f64::NAN;
        }
        let l = self.lambda;
        let ps = self.psi(t);
        -r.powf(l - 1.0) * ((1.0 + l) * (1.0 + l) * ps.d1 + ps.d3) / (1.0 - l)
    }
}

impl ExactSolution for LShapeFlow {
    fn velocity(&self, x: Point, _hint: Option<Point>) -> [f64; 2] {
        let (r, t) = polar(x, None, false);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let l = self.lambda;
        let ps = self.psi(t);
        let (s, c) = t.sin_cos();
        let rl = r.powf(l);
        [
            rl * ((1.0 + l) * s * ps.value + c * ps.d1),
            rl * (-(1.0 + l) * c * ps.value + s * ps.d1),
        ]
    }

    fn velocity_gradient(&self, x: Point, _hint: Option<Point>) -> [[f64; 2]; 2] {
        let (r, t) = polar(x, None, false);
        if r == 0.0 {
            return [[f64::NAN; 2]; 2];
        }
        let l = self.lambda;
        let ps = self.psi(t);
        let (s, c) = t.sin_cos();
        let g = [
            (1.0 + l) * s * ps.value + c * ps.d1,
            -(1.0 + l) * c * ps.value + s * ps.d1,
        ];
        let dg = [
            (1.0 + l) * (c * ps.value + s * ps.d1) - s * ps.d1 + c * ps.d2,
            (1.0 + l) * (s * ps.value - c * ps.d1) + c * ps.d1 + s * ps.d2,
        ];
        let rl1 = r.powf(l - 1.0);
        let dr = [l * rl1 * g[0], l * rl1 * g[1]];
        let dt = [rl1 * dg[0], rl1 * dg[1]];
        cartesian_gradient(t, dr, dt)
    }

    fn pressure(&self, x: Point, _hint: Option<Point>) -> f64 {
        self.nu * self.p1(x) + x[0].powi(3) + x[1].powi(3)
    }

    fn body_force(&self, x: Point) -> [f64; 2] {
        [3.0 * x[0] * x[0], 3.0 * x[1] * x[1]]
    }

    fn viscosity(&self) -> f64 {
        self.nu
    }

    fn singular_points(&self) -> &[Point] {
        &ORIGIN
    }

    fn angular_branch(&self) -> Option<(f64, f64)> {
        Some((0.0, LSHAPE_OMEGA))
    }

    fn helmholtz_projection_is_zero(&self) -> bool {
        true
    }
}

/// Affine divergence-free flow `u = A x + b` (trace-free `A`) with constant
/// pressure and zero body force; reproduced exactly by every method.
#[derive(Debug, Clone, Copy)]
pub struct LinearFlow {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub pressure: f64,
}

impl LinearFlow {
    /// `u = (x + 2y, −x − y)`, `p = 0`.
    pub fn patch() -> Self {
        LinearFlow {
            a: [[1.0, 2.0], [-1.0, -1.0]],
            b: [0.0, 0.0],
            pressure: 0.0,
        }
    }
}

impl ExactSolution for LinearFlow {
    fn velocity(&self, x: Point, _hint: Option<Point>) -> [f64; 2] {
        let a = &self.a;
        [
            a[0][0] * x[0] + a[0][1] * x[1] + self.b[0],
            a[1][0] * x[0] + a[1][1] * x[1] + self.b[1],
        ]
    }

    fn velocity_gradient(&self, _x: Point, _hint: Option<Point>) -> [[f64; 2]; 2] {
        self.a
    }

    fn pressure(&self, _x: Point, _hint: Option<Point>) -> f64 {
        self.pressure
    }

    fn body_force(&self, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn helmholtz_projection_is_zero(&self) -> bool {
        true
    }
}
