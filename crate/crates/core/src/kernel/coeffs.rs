//! Evaluable coefficient fields and the uniformly parabolic coefficient
//! triple v = (a, b, c).
//!
//! Fields are closures over (x, t) so that analytic test coefficients and
//! solver-produced lattice fields go through one interface. Lattice-backed
//! fields use piecewise-linear interpolation in x and t and extend
//! constantly outside the sampled window, matching how profiles are extended
//! beyond the truncated domain.

use std::sync::Arc;

use crate::grid::{Field, GridSpec};
use crate::{Error, Result};

/// Shared evaluable scalar field over space-time.
#[derive(Clone)]
pub struct CoeffField {
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for CoeffField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CoeffField(..)")
    }
}

impl CoeffField {
    pub fn constant(v: f64) -> Self {
        Self { eval: Arc::new(move |_, _| v) }
    }

    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f) }
    }

    /// Bilinear interpolation of lattice samples; clamped (constant) beyond
    /// the sampled rectangle.
    pub fn from_grid(grid: &GridSpec, samples: Field) -> Self {
        let x0 = -grid.half_width;
        let dx = grid.dx();
        let dt = grid.dt();
        let nx = samples.nx;
        let nt = samples.nt;
        Self {
            eval: Arc::new(move |x, t| {
                let sx = ((x - x0) / dx).clamp(0.0, (nx - 1) as f64);
                let st = (t / dt).clamp(0.0, (nt - 1) as f64);
                let i = (sx.floor() as usize).min(nx - 2);
                let k = (st.floor() as usize).min(nt - 2);
                let fx = sx - i as f64;
                let ft = st - k as f64;
                let v00 = samples.get(k, i);
                let v01 = samples.get(k, i + 1);
                let v10 = samples.get(k + 1, i);
                let v11 = samples.get(k + 1, i + 1);
                (1.0 - ft) * ((1.0 - fx) * v00 + fx * v01) + ft * ((1.0 - fx) * v10 + fx * v11)
            }),
        }
    }

    #[inline]
    pub fn at(&self, x: f64, t: f64) -> f64 {
        (self.eval)(x, t)
    }
}

/// Coefficient triple of a uniformly parabolic operator
/// ℒu = ∂ₜu - a∂ₓₓu + b∂ₓu + cu on ℝ×[0, T], together with its declared
/// ellipticity window and Hölder class.
#[derive(Debug, Clone)]
pub struct ParabolicCoefficients {
    pub a: CoeffField,
    pub b: CoeffField,
    pub c: CoeffField,
    /// Ellipticity floor λ₀ ≤ a.
    pub lambda0: f64,
    /// Diffusion ceiling a ≤ λ₁.
    pub lambda1: f64,
    /// Hölder exponent α ∈ (0, 1] of the coefficient class.
    pub holder_alpha: f64,
    /// Bound on the C^{α,α/2} norms of a, b, c (the B(R, λ, α) radius).
    pub holder_r: f64,
}

impl ParabolicCoefficients {
    pub fn new(
        a: CoeffField,
        b: CoeffField,
        c: CoeffField,
        lambda0: f64,
        lambda1: f64,
        holder_alpha: f64,
        holder_r: f64,
    ) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::NonPositive { name: "lambda0", value: lambda0 });
        }
        if lambda1 < lambda0 {
            return Err(Error::CoefficientBounds(format!(
                "lambda1 = {lambda1} below lambda0 = {lambda0}"
            )));
        }
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) {
            return Err(Error::CoefficientBounds(format!(
                "holder_alpha must lie in (0, 1], got {holder_alpha}"
            )));
        }
        if !(holder_r > 0.0) {
            return Err(Error::NonPositive { name: "holder_r", value: holder_r });
        }
        Ok(Self { a, b, c, lambda0, lambda1, holder_alpha, holder_r })
    }

    /// Constant-coefficient triple; the Hölder radius only needs to cover
    /// the sup norms.
    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self> {
        let r = (a.abs().max(b.abs()).max(c.abs()) * 1.5).max(1.0);
        Self::new(
            CoeffField::constant(a),
            CoeffField::constant(b),
            CoeffField::constant(c),
            a,
            a,
            1.0,
            r,
        )
    }

    /// Checks the declared invariants on a sampling lattice: ellipticity of
    /// `a` at every probe node and the discrete C^{α,α/2} quotients of all
    /// three fields on axis-adjacent probe pairs.
    pub fn validate_on(&self, half_width: f64, horizon: f64, nx: usize, nt: usize) -> Result<()> {
        let dx = 2.0 * half_width / (nx - 1) as f64;
        let dt = horizon / (nt - 1) as f64;
        let alpha = self.holder_alpha;
        let fields: [(&str, &CoeffField); 3] =
            [("a", &self.a), ("b", &self.b), ("c", &self.c)];
        for (name, field) in fields {
            let mut sup = 0.0f64;
            let mut quot = 0.0f64;
            for k in 0..nt {
                let t = dt * k as f64;
                for i in 0..nx {
                    let x = -half_width + dx * i as f64;
                    let v = field.at(x, t);
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("coefficient {name} at ({x},{t})")));
                    }
                    sup = sup.max(v.abs());
                    if name == "a" && !(v >= self.lambda0 - 1e-12 && v <= self.lambda1 + 1e-12) {
                        return Err(Error::CoefficientBounds(format!(
                            "a({x},{t}) = {v} outside [{}, {}]",
                            self.lambda0, self.lambda1
                        )));
                    }
                    if i + 1 < nx {
                        let d = (field.at(x + dx, t) - v).abs() / dx.powf(alpha);
                        quot = quot.max(d);
                    }
                    if k + 1 < nt {
                        let d = (field.at(x, t + dt) - v).abs() / dt.powf(alpha / 2.0);
                        quot = quot.max(d);
                    }
                }
            }
            if sup + quot > self.holder_r * (1.0 + 1e-9) {
                return Err(Error::CoefficientBounds(format!(
                    "C^{{α,α/2}} norm of {name} is {} > declared radius {}",
                    sup + quot,
                    self.holder_r
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_backed_field_interpolates_and_extends() {
        let grid = GridSpec::new(2.0, 17, 1.0, 5, 2.0).unwrap();
        let samples = Field::from_fn(grid.nt, grid.nx, |k, i| {
            1.0 + 0.5 * grid.x(i) + 0.25 * grid.t(k)
        });
        let f = CoeffField::from_grid(&grid, samples);
        // bilinear reproduces affine functions on the lattice interior
        assert!((f.at(0.33, 0.41) - (1.0 + 0.5 * 0.33 + 0.25 * 0.41)).abs() < 1e-12);
        // constant extension outside
        assert!((f.at(10.0, 0.5) - f.at(2.0, 0.5)).abs() < 1e-12);
        assert!((f.at(0.5, 9.0) - f.at(0.5, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_ellipticity_breach() {
        let coeffs = ParabolicCoefficients::new(
            CoeffField::from_fn(|x, _| 1.0 + 0.4 * x.sin()),
            CoeffField::constant(0.0),
            CoeffField::constant(0.0),
            0.8, // floor above the true minimum 0.6
            1.4,
            1.0,
            3.0,
        )
        .unwrap();
        assert!(coeffs.validate_on(4.0, 1.0, 65, 9).is_err());
        let ok = ParabolicCoefficients::new(
            CoeffField::from_fn(|x, _| 1.0 + 0.4 * x.sin()),
            CoeffField::constant(0.0),
            CoeffField::constant(0.0),
            0.6,
            1.4,
            1.0,
            3.0,
        )
        .unwrap();
        assert!(ok.validate_on(4.0, 1.0, 65, 9).is_ok());
    }

    #[test]
    fn holder_radius_enforced() {
        let steep = ParabolicCoefficients::new(
            CoeffField::from_fn(|x, _| 1.0 + 0.9 * (5.0 * x).sin()),
            CoeffField::constant(0.0),
            CoeffField::constant(0.0),
            0.05,
            2.0,
            1.0,
            2.0, // sup ≈ 1.9 plus slope 4.5 exceeds this
        )
        .unwrap();
        assert!(steep.validate_on(4.0, 1.0, 129, 9).is_err());
    }
}
