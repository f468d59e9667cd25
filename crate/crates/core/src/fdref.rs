//! Independent finite-difference oracle for the combustion system.
//!
//! A θ-weighted central scheme for the diffusion term, explicit first-order
//! upwinding for convection, explicit reaction, and the exact exponential
//! fuel update. Deliberately plain so it is easy to audit; its only job is
//! to cross-validate the integral-representation solver.
//!
//! This module builds on [`crate::model`] and [`crate::grid`] only — it must
//! never touch the kernel or solver machinery, otherwise the
//! cross-validation would be circular.

use crate::grid::{Field, GridSpec, SystemState};
use crate::model::{
    alpha_coeff, arrhenius_tilde, beta_coeff, fuel_from_history, reaction_f, InitialData, Layer,
    ModelParams,
};
use crate::{Error, Result};

/// Oracle configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FdConfig {
    /// Spatial nodes of the oracle lattice.
    pub nx: usize,
    /// Time levels of the oracle lattice.
    pub nt: usize,
    /// Implicitness of the diffusion term: 0 explicit, 1/2 trapezoidal,
    /// 1 backward Euler.
    pub theta: f64,
}

impl FdConfig {
    /// Oracle at `factor`× the resolution of a solver grid.
    pub fn refined_from(grid: &GridSpec, factor: usize) -> Self {
        Self { nx: (grid.nx - 1) * factor + 1, nt: (grid.nt - 1) * factor + 1, theta: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.nt < 4 {
            return Err(Error::Config(format!(
                "fd oracle needs nx >= 16 and nt >= 4, got nx={}, nt={}",
                self.nx, self.nt
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0,1], got {}", self.theta)));
        }
        Ok(())
    }

    pub fn oracle_grid(&self, grid: &GridSpec) -> GridSpec {
        GridSpec {
            half_width: grid.half_width,
            nx: self.nx,
            t_window: grid.t_window,
            nt: self.nt,
            p: grid.p,
        }
    }
}

/// One time level of the oracle march.
#[derive(Debug, Clone)]
pub struct FdLevel {
    pub u: [Vec<f64>; 2],
    pub cum: [Vec<f64>; 2],
    pub fuel: [Vec<f64>; 2],
}

/// Thomas elimination for a tridiagonal system (sub, diag, sup) · x = rhs.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Advances one time level: θ-weighted diffusion with coefficients frozen
/// at the current fuel, explicit upwind convection, explicit reaction, then
/// the trapezoid update of the cumulative integral and the exact fuel
/// formula.
pub fn fd_step(
    level: &FdLevel,
    data: &InitialData,
    params: &ModelParams,
    grid: &GridSpec,
    cfg: &FdConfig,
    dt: f64,
    source_offset: f64,
) -> Result<FdLevel> {
    let nx = cfg.nx;
    let dx = 2.0 * grid.half_width / (nx - 1) as f64;
    let mut next = level.clone();

    for layer in Layer::BOTH {
        let i = layer.index();
        let u = &level.u[i];
        let y = &level.fuel[i];

        // stability of the explicit part
        let mut max_alpha = 0.0f64;
        let mut max_beta = 0.0f64;
        for j in 0..nx {
            max_alpha = max_alpha.max(alpha_coeff(layer, y[j], params)?);
            max_beta = max_beta.max(beta_coeff(layer, y[j], params)?);
        }
        if cfg.theta == 0.0 && dt > dx * dx / (2.0 * max_alpha) {
            return Err(Error::Unstable(format!(
                "explicit diffusion needs dt <= {}, got {dt}",
                dx * dx / (2.0 * max_alpha)
            )));
        }
        if max_beta * dt / dx > 1.0 {
            return Err(Error::Unstable(format!(
                "upwind CFL violated: beta*dt/dx = {}",
                max_beta * dt / dx
            )));
        }

        // explicit part: (1-θ) diffusion + upwind convection + reaction
        let at = |v: &[f64], j: isize| -> f64 {
            // constant extension at the edges
            let j = j.clamp(0, nx as isize - 1) as usize;
            v[j]
        };
        let mut rhs = vec![0.0; nx];
        for j in 0..nx {
            let a_j = alpha_coeff(layer, y[j], params)?;
            let b_j = beta_coeff(layer, y[j], params)?;
            let lap =
                (at(u, j as isize - 1) - 2.0 * u[j] + at(u, j as isize + 1)) / (dx * dx);
            // βᵢ > 0 by positivity of the constants: upwind looks left
            let adv = b_j * (u[j] - at(u, j as isize - 1)) / dx;
            let f = reaction_f(layer, y[j], level.u[0][j], level.u[1][j], params)?
                + source_offset;
            rhs[j] = u[j] + dt * ((1.0 - cfg.theta) * a_j * lap - adv + f);
        }

        // implicit part: (I - θ dt αᵢ ∂ₓₓ) with Neumann-flavored edges
        // (the ghost node copies the edge value, matching the constant
        // extension used everywhere else)
        let mut sub = vec![0.0; nx];
        let mut diag = vec![0.0; nx];
        let mut sup = vec![0.0; nx];
        for j in 0..nx {
            let a_j = alpha_coeff(layer, y[j], params)?;
            let r = cfg.theta * dt * a_j / (dx * dx);
            if j == 0 {
                diag[j] = 1.0 + r;
                sup[j] = -r;
            } else if j == nx - 1 {
                diag[j] = 1.0 + r;
                sub[j] = -r;
            } else {
                sub[j] = -r;
                diag[j] = 1.0 + 2.0 * r;
                sup[j] = -r;
            }
        }
        let u_next = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        if u_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fd_step temperature".into()));
        }
        next.u[i] = u_next;
    }

    // trapezoid update of the cumulative integrals, then the exact fuel
    // formula (one fewer discretization error source in the oracle)
    for layer in Layer::BOTH {
        let i = layer.index();
        for j in 0..nx {
            let f_old = arrhenius_tilde(level.u[i][j], params.e);
            let f_new = arrhenius_tilde(next.u[i][j], params.e);
            next.cum[i][j] = level.cum[i][j] + 0.5 * dt * (f_old + f_new);
            next.fuel[i][j] = fuel_from_history(layer, data.y0[i][j], next.cum[i][j], params)?;
        }
    }
    Ok(next)
}

/// Full trajectory by repeated [`fd_step`], in the same state shape as the
/// integral solver.
pub fn fd_solve(
    data: &InitialData,
    params: &ModelParams,
    grid: &GridSpec,
    cfg: &FdConfig,
) -> Result<SystemState> {
    fd_solve_offset(data, params, grid, cfg, 0.0)
}

/// [`fd_solve`] with a constant offset added to both reaction terms
/// (the ±δ perturbed systems of the comparison check).
pub fn fd_solve_offset(
    data: &InitialData,
    params: &ModelParams,
    grid: &GridSpec,
    cfg: &FdConfig,
    source_offset: f64,
) -> Result<SystemState> {
    params.validate()?;
    cfg.validate()?;
    let ogrid = cfg.oracle_grid(grid);
    if data.u0[0].len() != ogrid.nx {
        return Err(Error::GridMismatch(format!(
            "initial data sampled on {} nodes, oracle lattice has {}",
            data.u0[0].len(),
            ogrid.nx
        )));
    }
    let dt = ogrid.dt();

    let mut level = FdLevel {
        u: [data.u0[0].clone(), data.u0[1].clone()],
        cum: [vec![0.0; ogrid.nx], vec![0.0; ogrid.nx]],
        fuel: [data.y0[0].clone(), data.y0[1].clone()],
    };
    let mut u = [Field::zeros(ogrid.nt, ogrid.nx), Field::zeros(ogrid.nt, ogrid.nx)];
    let mut cum = [Field::zeros(ogrid.nt, ogrid.nx), Field::zeros(ogrid.nt, ogrid.nx)];
    let mut fuel = [Field::zeros(ogrid.nt, ogrid.nx), Field::zeros(ogrid.nt, ogrid.nx)];
    for i in 0..2 {
        u[i].level_mut(0).copy_from_slice(&level.u[i]);
        cum[i].level_mut(0).copy_from_slice(&level.cum[i]);
        fuel[i].level_mut(0).copy_from_slice(&level.fuel[i]);
    }

    for k in 1..ogrid.nt {
        level = fd_step(&level, data, params, &ogrid, cfg, dt, source_offset)?;
        for i in 0..2 {
            u[i].level_mut(k).copy_from_slice(&level.u[i]);
            cum[i].level_mut(k).copy_from_slice(&level.cum[i]);
            fuel[i].level_mut(k).copy_from_slice(&level.fuel[i]);
        }
    }

    Ok(SystemState { grid: ogrid.clone(), times: ogrid.ts(), u, cum, fuel })
}
