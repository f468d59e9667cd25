//! Constitutive functions of the two-layer combustion system.
//!
//! The system couples two temperatures u₁, u₂ and two fuel concentrations
//! y₁, y₂:
//!
//! ```text
//!   ∂ₜuᵢ - αᵢ(yᵢ) ∂ₓₓuᵢ + βᵢ(yᵢ) ∂ₓuᵢ = fᵢ(yᵢ, u₁, u₂)
//!   ∂ₜyᵢ = -Aᵢ yᵢ f̃(uᵢ)
//! ```
//!
//! with αᵢ(y) = λᵢ/(aᵢ+bᵢy), βᵢ(y) = cᵢ/(aᵢ+bᵢy), the zero-extended
//! Arrhenius rate f̃(s) = e^{-E/s} (s > 0), and
//!
//! ```text
//!   fᵢ(y, u₁, u₂) = (bᵢAᵢuᵢ + dᵢ)/(aᵢ+bᵢy) · y f̃(uᵢ)
//!                   + (-1)ⁱ q (u₁-u₂)/(aᵢ+bᵢy).
//! ```
//!
//! The fuel ODE closes exactly: yᵢ(x,t) = y₀ᵢ(x)·exp(-Aᵢ ∫₀ᵗ f̃(uᵢ) dτ),
//! so the solver only ever tracks the cumulative integral.
//!
//! Everything here is a pure function of its arguments; both the integral
//! solver and the finite-difference oracle build exclusively on this module.

use crate::grid::{discrete_lipschitz, lip_norm, GridSpec};
use crate::{Error, Result};

/// Layer index newtype: the system has exactly two layers, 0 and 1.
///
/// Sign conventions in the coupling term use the paper-side 1-based index
/// (`(-1)^i` with i ∈ {1,2}), which `sign()` reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    One,
    Two,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::One, Layer::Two];

    pub fn index(self) -> usize {
        match self {
            Layer::One => 0,
            Layer::Two => 1,
        }
    }

    pub fn other(self) -> Layer {
        match self {
            Layer::One => Layer::Two,
            Layer::Two => Layer::One,
        }
    }

    /// (-1)^i for the 1-based layer index i.
    fn sign(self) -> f64 {
        match self {
            Layer::One => -1.0,
            Layer::Two => 1.0,
        }
    }
}

/// Physical constants of the model. All strictly positive.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    /// Thermal diffusivity numerators λᵢ.
    pub lambda: [f64; 2],
    /// Heat-capacity offsets aᵢ.
    pub a: [f64; 2],
    /// Heat-capacity fuel couplings bᵢ.
    pub b: [f64; 2],
    /// Convection coefficients cᵢ.
    pub c: [f64; 2],
    /// Reaction offsets dᵢ.
    pub d: [f64; 2],
    /// Fuel consumption rates Aᵢ.
    pub big_a: [f64; 2],
    /// Inter-layer heat transfer coefficient q.
    pub q: f64,
    /// Activation energy E.
    pub e: f64,
}

impl ModelParams {
    /// Validates strict positivity of every constant.
    pub fn validate(&self) -> Result<()> {
        let named: [(&'static str, &[f64]); 6] = [
            ("lambda", &self.lambda),
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("d", &self.d),
            ("A", &self.big_a),
        ];
        for (name, vals) in named {
            for &v in vals {
                if !(v > 0.0) {
                    return Err(Error::NonPositive { name, value: v });
                }
            }
        }
        if !(self.q > 0.0) {
            return Err(Error::NonPositive { name: "q", value: self.q });
        }
        if !(self.e > 0.0) {
            return Err(Error::NonPositive { name: "E", value: self.e });
        }
        Ok(())
    }

    /// Representative order-1 synthetic constants. The model never pins
    /// physical magnitudes, so defaults are labeled synthetic throughout.
    pub fn synthetic() -> Self {
        Self {
            lambda: [1.0, 0.8],
            a: [1.0, 1.2],
            b: [1.0, 0.9],
            c: [0.5, 0.4],
            d: [0.5, 0.6],
            big_a: [1.0, 1.1],
            q: 0.5,
            e: 1.0,
        }
    }
}

/// Initial data sampled on the spatial lattice: temperature and fuel
/// profiles per layer plus a Lipschitz-constant certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: [Vec<f64>; 2],
    pub y0: [Vec<f64>; 2],
    /// Upper bound certified for the discrete Lipschitz quotient of every
    /// profile.
    pub lip_bound: f64,
}

impl InitialData {
    /// Builds from sampled profiles, computing the Lipschitz certificate
    /// from the discrete difference quotients.
    pub fn from_profiles(
        grid: &GridSpec,
        u0: [Vec<f64>; 2],
        y0: [Vec<f64>; 2],
    ) -> Result<Self> {
        let dx = grid.dx();
        for profile in u0.iter().chain(y0.iter()) {
            if profile.len() != grid.nx {
                return Err(Error::GridMismatch(format!(
                    "profile has {} samples, grid has {} nodes",
                    profile.len(),
                    grid.nx
                )));
            }
            if let Some(&v) = profile.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::Config(format!(
                    "initial profiles must be nonnegative, found {v}"
                )));
            }
        }
        let lip_bound = u0
            .iter()
            .chain(y0.iter())
            .map(|p| discrete_lipschitz(p, dx))
            .fold(0.0f64, f64::max);
        Ok(Self { u0, y0, lip_bound })
    }

    /// Sup norm of layer `i`'s initial fuel.
    pub fn y0_sup(&self, i: usize) -> f64 {
        self.y0[i].iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Sup + Lipschitz norm of layer `i`'s initial fuel.
    pub fn y0_lip_norm(&self, i: usize, grid: &GridSpec) -> f64 {
        lip_norm(&self.y0[i], grid.dx())
    }

    /// Sup + Lipschitz norm of layer `i`'s initial temperature.
    pub fn u0_lip_norm(&self, i: usize, grid: &GridSpec) -> f64 {
        lip_norm(&self.u0[i], grid.dx())
    }
}

/// The explicit upper-solution envelope φ(t) = (M+β)e^{αt} - β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperSolution {
    /// Max sup-norm of the initial temperatures.
    pub big_m: f64,
    /// maxᵢ Aᵢbᵢ‖y₀ᵢ‖_∞ / aᵢ.
    pub alpha: f64,
    /// maxᵢ dᵢ/(Aᵢbᵢ).
    pub beta: f64,
}

impl UpperSolution {
    pub fn from_data(data: &InitialData, params: &ModelParams) -> Self {
        let big_m = data.u0.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
        let mut alpha = 0.0f64;
        let mut beta = 0.0f64;
        for i in 0..2 {
            alpha = alpha.max(params.big_a[i] * params.b[i] * data.y0_sup(i) / params.a[i]);
            beta = beta.max(params.d[i] / (params.big_a[i] * params.b[i]));
        }
        Self { big_m, alpha, beta }
    }
}

/// Zero-extended Arrhenius rate: e^{-E/s} for s > 0, and 0 for s ≤ 0.
///
/// Total and continuous on ℝ; every one-sided derivative vanishes at 0, so
/// the zero extension is the unique smooth one from the right.
#[inline]
pub fn arrhenius_tilde(s: f64, e: f64) -> f64 {
    if s > 0.0 {
        (-e / s).exp()
    } else {
        0.0
    }
}

/// Derivative of [`arrhenius_tilde`]: (E/s²)e^{-E/s} for s > 0, else 0.
#[inline]
pub fn arrhenius_tilde_deriv(s: f64, e: f64) -> f64 {
    if s > 0.0 {
        (e / (s * s)) * (-e / s).exp()
    } else {
        0.0
    }
}

/// Diffusion coefficient αᵢ(y) = λᵢ/(aᵢ + bᵢ y).
pub fn alpha_coeff(layer: Layer, y: f64, p: &ModelParams) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::NegativeFuel { value: y });
    }
    let i = layer.index();
    Ok(p.lambda[i] / (p.a[i] + p.b[i] * y))
}

/// Convection coefficient βᵢ(y) = cᵢ/(aᵢ + bᵢ y).
pub fn beta_coeff(layer: Layer, y: f64, p: &ModelParams) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::NegativeFuel { value: y });
    }
    let i = layer.index();
    Ok(p.c[i] / (p.a[i] + p.b[i] * y))
}

/// Reaction term
/// fᵢ(y,u₁,u₂) = (bᵢAᵢuᵢ+dᵢ)/(aᵢ+bᵢy)·y·f̃(uᵢ) + (-1)ⁱq(u₁-u₂)/(aᵢ+bᵢy),
/// with the zero-extended Arrhenius factor.
pub fn reaction_f(layer: Layer, y: f64, u1: f64, u2: f64, p: &ModelParams) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::NegativeFuel { value: y });
    }
    let i = layer.index();
    let ui = if i == 0 { u1 } else { u2 };
    let denom = p.a[i] + p.b[i] * y;
    let burn = (p.b[i] * p.big_a[i] * ui + p.d[i]) / denom * y * arrhenius_tilde(ui, p.e);
    let exchange = layer.sign() * p.q * (u1 - u2) / denom;
    Ok(burn + exchange)
}

/// Closed-form fuel value y₀·e^{-Aᵢ·I} from the cumulative reaction
/// integral I = ∫₀ᵗ f̃(uᵢ) dτ.
pub fn fuel_from_history(layer: Layer, y0: f64, cumulative: f64, p: &ModelParams) -> Result<f64> {
    if y0 < 0.0 {
        return Err(Error::NegativeFuel { value: y0 });
    }
    if cumulative < 0.0 {
        return Err(Error::NegativeHistory { value: cumulative });
    }
    Ok(y0 * (-p.big_a[layer.index()] * cumulative).exp())
}

/// Upper-solution envelope φ(t) = (M+β)e^{αt} - β.
pub fn phi_upper(t: f64, env: &UpperSolution) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime { value: t });
    }
    Ok((env.big_m + env.beta) * (env.alpha * t).exp() - env.beta)
}
