//! Space-time lattice plumbing shared by the integral-equation solver and the
//! finite-difference oracle.
//!
//! The continuous problem lives on all of ℝ; the artifact truncates to
//! `[-L, L]` and extends profiles by their edge values beyond it. Everything
//! downstream (kernel quadrature, solver, oracle, checks) works on the same
//! [`GridSpec`] so trajectories are directly comparable.

use crate::{Error, Result};

/// Truncated space-time lattice description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    /// Spatial truncation radius: nodes cover `[-half_width, half_width]`.
    pub half_width: f64,
    /// Number of spatial nodes (endpoints included).
    pub nx: usize,
    /// Window length in time units.
    pub t_window: f64,
    /// Number of time levels including `t = 0`.
    pub nt: usize,
    /// Lebesgue exponent used for norm tracking.
    pub p: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, nx: usize, t_window: f64, nt: usize, p: f64) -> Result<Self> {
        if nx < 16 {
            return Err(Error::Config(format!("nx must be >= 16, got {nx}")));
        }
        if nt < 4 {
            return Err(Error::Config(format!("nt must be >= 4, got {nt}")));
        }
        if half_width <= 0.0 {
            return Err(Error::NonPositive { name: "half_width", value: half_width });
        }
        if t_window <= 0.0 {
            return Err(Error::NonPositive { name: "t_window", value: t_window });
        }
        if p <= 1.0 {
            return Err(Error::Config(format!("Lebesgue exponent p must be > 1, got {p}")));
        }
        Ok(Self { half_width, nx, t_window, nt, p })
    }

    /// Spatial mesh spacing.
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }

    /// Time level spacing.
    pub fn dt(&self) -> f64 {
        self.t_window / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + self.dx() * i as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.dt() * k as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.t(k)).collect()
    }

    /// Grid refined by an integer factor in both directions (node counts
    /// scale so that the original nodes stay on the refined lattice).
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            half_width: self.half_width,
            nx: (self.nx - 1) * factor + 1,
            t_window: self.t_window,
            nt: (self.nt - 1) * factor + 1,
            p: self.p,
        }
    }
}

/// Scalar field sampled on a space-time lattice, stored level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub nx: usize,
    pub nt: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(nt: usize, nx: usize) -> Self {
        Self { nx, nt, data: vec![0.0; nx * nt] }
    }

    pub fn from_profile(nt: usize, profile: &[f64]) -> Self {
        let nx = profile.len();
        let mut data = Vec::with_capacity(nx * nt);
        for _ in 0..nt {
            data.extend_from_slice(profile);
        }
        Self { nx, nt, data }
    }

    pub fn from_fn(nt: usize, nx: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nx * nt);
        for k in 0..nt {
            for i in 0..nx {
                data.push(f(k, i));
            }
        }
        Self { nx, nt, data }
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, v: f64) {
        self.data[k * self.nx + i] = v;
    }

    /// One time level as a slice.
    pub fn level(&self, k: usize) -> &[f64] {
        &self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Supremum of |self - other| over the lattice.
    pub fn sup_gap(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Solved (or in-flight) trajectory of the coupled system: temperatures,
/// cumulative reaction integrals and the fuel fields derived from them.
///
/// `times` is carried explicitly because chained continuation windows may
/// have been shrunk individually, leaving a non-uniform global time axis.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub grid: GridSpec,
    /// Time coordinate of each stored level.
    pub times: Vec<f64>,
    /// Layer temperatures u₁, u₂.
    pub u: [Field; 2],
    /// Cumulative reaction integrals ∫₀ᵗ f̃(uᵢ) dτ per node.
    pub cum: [Field; 2],
    /// Fuel fields yᵢ = y₀ᵢ·exp(-Aᵢ·cumᵢ).
    pub fuel: [Field; 2],
}

impl SystemState {
    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    /// Final-time profile of layer `i`'s temperature.
    pub fn final_u(&self, i: usize) -> &[f64] {
        self.u[i].level(self.times.len() - 1)
    }

    /// Discrete Lᵖ norm of one temperature level (trapezoid in space).
    pub fn lp_norm(&self, i: usize, level: usize, p: f64) -> f64 {
        lp_norm(self.u[i].level(level), self.grid.dx(), p)
    }

    /// Sup of |∂ₓ uᵢ| at one level by central differences.
    pub fn sup_dx(&self, i: usize, level: usize) -> f64 {
        sup_dx(self.u[i].level(level), self.grid.dx())
    }
}

/// Trapezoid Lᵖ norm of a profile.
pub fn lp_norm(profile: &[f64], dx: f64, p: f64) -> f64 {
    let n = profile.len();
    let mut acc = 0.0;
    for (i, v) in profile.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * v.abs().powf(p);
    }
    (acc * dx).powf(1.0 / p)
}

/// Sup of the central difference quotient of a profile (one-sided at edges).
pub fn sup_dx(profile: &[f64], dx: f64) -> f64 {
    let n = profile.len();
    let mut m = 0.0f64;
    for i in 0..n {
        let d = if i == 0 {
            (profile[1] - profile[0]) / dx
        } else if i == n - 1 {
            (profile[n - 1] - profile[n - 2]) / dx
        } else {
            (profile[i + 1] - profile[i - 1]) / (2.0 * dx)
        };
        m = m.max(d.abs());
    }
    m
}

/// Max difference quotient |Δv|/|Δx| over adjacent nodes of a profile.
pub fn discrete_lipschitz(profile: &[f64], dx: f64) -> f64 {
    profile
        .windows(2)
        .fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / dx))
}

/// Sup + Lipschitz-quotient norm of a profile (the ‖·‖₁ norm used for
/// initial data and coefficient radii).
pub fn lip_norm(profile: &[f64], dx: f64) -> f64 {
    let sup = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sup + discrete_lipschitz(profile, dx)
}

/// Piecewise-cubic (4-point Lagrange) interpolation of a uniformly sampled
/// profile, extended by its edge values beyond the sampled range.
///
/// Falls back to linear near the edges where a full stencil does not fit.
pub fn interp_profile(xs_start: f64, dx: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let s = (x - xs_start) / dx;
    if s <= 0.0 {
        return values[0];
    }
    if s >= (n - 1) as f64 {
        return values[n - 1];
    }
    let j = (s.floor() as usize).min(n - 2);
    let frac = s - j as f64;
    if j == 0 || j + 2 >= n {
        return values[j] * (1.0 - frac) + values[j + 1] * frac;
    }
    // Lagrange basis on nodes {-1, 0, 1, 2} evaluated at `frac`.
    let u = frac;
    let w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    let w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    let w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    let w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    w0 * values[j - 1] + w1 * values[j] + w2 * values[j + 1] + w3 * values[j + 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_nodes() {
        let g = GridSpec::new(4.0, 17, 0.5, 6, 2.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.t(5), 0.5);
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.x(16), 4.0);
        let r = g.refined(4);
        assert_eq!(r.nx, 65);
        assert_eq!(r.dx(), 0.125);
    }

    #[test]
    fn grid_rejects_bad_config() {
        assert!(GridSpec::new(4.0, 8, 0.5, 6, 2.0).is_err());
        assert!(GridSpec::new(4.0, 17, 0.5, 2, 2.0).is_err());
        assert!(GridSpec::new(-1.0, 17, 0.5, 6, 2.0).is_err());
        assert!(GridSpec::new(4.0, 17, 0.5, 6, 1.0).is_err());
    }

    #[test]
    fn lp_norm_of_constant_profile() {
        // ∫|c|^p over [-L, L] = c^p · 2L.
        let profile = vec![3.0; 21];
        let dx = 0.1;
        let got = lp_norm(&profile, dx, 2.0);
        let expected = (9.0f64 * 2.0).sqrt(); // L = 1
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn interp_reproduces_cubics() {
        let xs_start = -1.0;
        let dx = 0.25;
        let f = |x: f64| 0.3 * x * x * x - x * x + 0.5 * x + 2.0;
        let values: Vec<f64> = (0..9).map(|i| f(xs_start + dx * i as f64)).collect();
        for k in 0..40 {
            let x = -0.7 + 0.035 * k as f64;
            let got = interp_profile(xs_start, dx, &values, x);
            assert!((got - f(x)).abs() < 1e-12, "x={x}: {got} vs {}", f(x));
        }
        // constant extension outside
        assert_eq!(interp_profile(xs_start, dx, &values, -5.0), values[0]);
        assert_eq!(interp_profile(xs_start, dx, &values, 5.0), values[8]);
    }

    #[test]
    fn lip_norm_of_linear_profile() {
        let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        assert!((lip_norm(&xs, 0.2) - 2.0).abs() < 1e-12); // sup 1 + slope 1
    }
}
