//! Scenario ingestion, pipeline orchestration and CSV emission.
//!
//! Scenarios are TOML files mapping 1:1 onto the configuration types:
//! model constants, grid, named initial-profile families, Picard and
//! finite-difference settings, and the list of verification checks to run.
//! Every command writes plot-ready CSV files (full 17-significant-digit
//! floats) plus a sibling `run_metadata.txt` carrying the run timestamp, so
//! data files of identical runs stay byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::fdref::{fd_solve, FdConfig};
use crate::grid::{interp_profile, GridSpec};
use crate::kernel::{
    self, apply_gamma, eval_gamma, eval_z, fmt_float, CoeffField, KernelHandle,
    ParabolicCoefficients,
};
use crate::model::{phi_upper, InitialData, ModelParams, UpperSolution};
use crate::solver::{continue_global, picard_solve, PicardConfig};
use crate::verify::{
    check_comparison, check_fuel, check_gradient_bound, check_lp_envelope, check_sector,
    check_solution_stability, corrupt_node, CheckReport,
};
use crate::{Error, Result};

/// Known check names, in canonical execution order.
pub const CHECK_NAMES: [&str; 6] = [
    "sector",
    "fuel",
    "comparison",
    "lp-envelope",
    "gradient-bound",
    "solution-stability",
];

/// One named initial-profile family.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Identically zero.
    Zero,
    /// Constant level.
    Constant { value: f64 },
    /// gaussian-bump(center, width, height): h·exp(-(x-c)²/(2w²)).
    GaussianBump { center: f64, width: f64, height: f64 },
    /// Smooth plateau of the given half-width with cosine ramps.
    Plateau { center: f64, halfwidth: f64, height: f64, ramp: f64 },
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Error::Config(format!("profile {what} invalid: {v}"));
        match *self {
            ProfileSpec::Zero => Ok(()),
            ProfileSpec::Constant { value } if value >= 0.0 => Ok(()),
            ProfileSpec::Constant { value } => Err(bad("constant value", value)),
            ProfileSpec::GaussianBump { width, height, .. } => {
                if width <= 0.0 {
                    Err(bad("gaussian width", width))
                } else if height < 0.0 {
                    Err(bad("gaussian height", height))
                } else {
                    Ok(())
                }
            }
            ProfileSpec::Plateau { halfwidth, height, ramp, .. } => {
                if halfwidth <= 0.0 {
                    Err(bad("plateau halfwidth", halfwidth))
                } else if height < 0.0 {
                    Err(bad("plateau height", height))
                } else if ramp <= 0.0 {
                    Err(bad("plateau ramp", ramp))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ProfileSpec::Zero => 0.0,
            ProfileSpec::Constant { value } => value,
            ProfileSpec::GaussianBump { center, width, height } => {
                height * (-(x - center).powi(2) / (2.0 * width * width)).exp()
            }
            ProfileSpec::Plateau { center, halfwidth, height, ramp } => {
                let d = (x - center).abs();
                if d <= halfwidth {
                    height
                } else if d >= halfwidth + ramp {
                    0.0
                } else {
                    0.5 * height
                        * (1.0 + (std::f64::consts::PI * (d - halfwidth) / ramp).cos())
                }
            }
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// The four initial profiles.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub u0_1: ProfileSpec,
    pub u0_2: ProfileSpec,
    pub y0_1: ProfileSpec,
    pub y0_2: ProfileSpec,
}

impl DataSpec {
    pub fn sample(&self, grid: &GridSpec) -> Result<InitialData> {
        let xs = grid.xs();
        InitialData::from_profiles(
            grid,
            [self.u0_1.sample(&xs), self.u0_2.sample(&xs)],
            [self.y0_1.sample(&xs), self.y0_2.sample(&xs)],
        )
    }
}

/// Finite-difference oracle settings: either an explicit lattice or a
/// refinement factor over the solver grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdSpec {
    pub refine: usize,
    pub theta: f64,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
}

impl Default for FdSpec {
    fn default() -> Self {
        Self { refine: 4, theta: 0.5, nx: None, nt: None }
    }
}

impl FdSpec {
    pub fn config(&self, grid: &GridSpec) -> FdConfig {
        let mut cfg = FdConfig::refined_from(grid, self.refine.max(1));
        cfg.theta = self.theta;
        if let Some(nx) = self.nx {
            cfg.nx = nx;
        }
        if let Some(nt) = self.nt {
            cfg.nt = nt;
        }
        cfg
    }
}

/// Tolerances and probe sizes of the verification checks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckParams {
    /// Reaction offset of the ±δ comparison systems.
    pub delta: f64,
    /// Coefficient perturbation of the stability check.
    pub eps: f64,
    /// Nodewise tolerance of the sector/fuel/comparison checks.
    pub tol: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self { delta: 1e-3, eps: 0.1, tol: 1e-8 }
    }
}

/// A full run description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Seed for the sampled Hölder quotients (reproducibility).
    #[serde(default)]
    pub seed: u64,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub fd: FdSpec,
    /// March horizon for `solve`/`verify`; defaults to one window.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Deliberately corrupts one node before running checks (the checks
    /// must then fail — the fault-injection contract).
    #[serde(default)]
    pub inject_fault: bool,
    #[serde(default)]
    pub check_params: CheckParams,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut scenario: Scenario =
            toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?;
        scenario.picard.pair_seed = scenario.seed;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        GridSpec::new(
            self.grid.half_width,
            self.grid.nx,
            self.grid.t_window,
            self.grid.nt,
            self.grid.p,
        )?;
        self.picard.validate()?;
        for profile in [&self.data.u0_1, &self.data.u0_2, &self.data.y0_1, &self.data.y0_2] {
            profile.validate()?;
        }
        self.fd.config(&self.grid).validate()?;
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::NonPositive { name: "horizon", value: h });
            }
        }
        for name in &self.checks {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown check `{name}` (known: {})",
                    CHECK_NAMES.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.grid.t_window)
    }

    /// The default synthetic combustion scenario (order-1 constants,
    /// Gaussian-bump data).
    pub fn synthetic_default() -> Self {
        Scenario {
            seed: 0,
            params: ModelParams::synthetic(),
            grid: GridSpec::new(8.0, 161, 0.1, 9, 2.0).unwrap(),
            data: DataSpec {
                u0_1: ProfileSpec::GaussianBump { center: 0.0, width: 1.0, height: 1.0 },
                u0_2: ProfileSpec::GaussianBump { center: 0.0, width: 1.0, height: 0.8 },
                y0_1: ProfileSpec::GaussianBump { center: 0.0, width: 2.0, height: 0.5 },
                y0_2: ProfileSpec::GaussianBump { center: 0.0, width: 2.0, height: 0.5 },
            },
            picard: PicardConfig::default(),
            fd: FdSpec::default(),
            horizon: None,
            checks: CHECK_NAMES.iter().map(|s| s.to_string()).collect(),
            output_dir: None,
            inject_fault: false,
            check_params: CheckParams::default(),
        }
    }
}

/// CSV writer that pins the shared formatting conventions.
struct CsvFile {
    out: std::io::BufWriter<fs::File>,
}

impl CsvFile {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut out = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    fn raw(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")?;
        Ok(())
    }
}

/// Writes the sibling metadata file (timestamp lives here, never in the
/// data files).
fn write_metadata(dir: &Path, scenario_desc: &str, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = fs::File::create(dir.join("run_metadata.txt"))?;
    writeln!(out, "timestamp: {}", chrono::Utc::now().to_rfc3339())?;
    writeln!(out, "scenario: {scenario_desc}")?;
    writeln!(out, "seed: {seed}")?;
    Ok(())
}

/// Exit status conventions: 0 success, 1 numerical/check failure,
/// 2 configuration error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Toml(_)
        | Error::NonPositive { .. }
        | Error::GridMismatch(_)
        | Error::CoefficientBounds(_) => 2,
        _ => 1,
    }
}

/// Kernel self-test battery: constant-coefficient exactness, the advection
/// closed form, kernel mass, the delta family and the PDE residual, at desk
/// scale. Writes `kernel_selftest.csv`; returns 0 iff every row passed.
pub fn cmd_kernel_selftest(scenario: &Scenario, out_dir: &Path, verbose: bool) -> Result<i32> {
    let mut rows: Vec<CheckReport> = Vec::new();
    let quad = scenario.picard.quad.clone();
    let depth = scenario.picard.levi_depth;

    // 1. constant coefficients: Γ coincides with the frozen-coefficient Z
    {
        let mut worst = 0.0f64;
        let mut loc = String::from("-");
        for a in [0.5, 1.0, 2.0] {
            let coeffs = ParabolicCoefficients::constant(a, 0.0, 0.0)?;
            let handle = KernelHandle::new(coeffs, depth, quad.clone(), 4.0, 0.6)?;
            for (x, xi, dt) in [(0.0, 0.4, 0.1), (0.8, -0.7, 0.35), (1.5, 1.0, 0.55)] {
                let g = eval_gamma(&handle, x, 0.05 + dt, xi, 0.05)?;
                let z = eval_z(&handle.coeffs, x, 0.05 + dt, xi, 0.05)?;
                if (g - z).abs() > worst {
                    worst = (g - z).abs();
                    loc = format!("a={a} x={x} xi={xi} dt={dt}");
                }
            }
        }
        rows.push(CheckReport {
            name: "constant-exactness".into(),
            passed: worst <= 1e-12,
            worst_violation: worst,
            location: loc,
            tolerance: 1e-12,
            notes: "parametrix exact for frozen coefficients".into(),
        });
    }

    // 2. drift shift: a=1, b=1.5 against the closed-form advected Gaussian
    {
        let b = 1.5;
        let coeffs = ParabolicCoefficients::constant(1.0, b, 0.0)?;
        let handle = KernelHandle::new(coeffs, depth.max(14), quad.clone(), 4.0, 0.3)?;
        let mut worst = 0.0f64;
        let mut loc = String::from("-");
        for (x, xi, dt) in [(0.3, 0.0, 0.12), (-0.4, 0.1, 0.25), (0.9, -0.2, 0.3)] {
            let g = eval_gamma(&handle, x, dt, xi, 0.0)?;
            let arg = x - xi - b * dt;
            let exact = (4.0 * std::f64::consts::PI * dt).sqrt().recip()
                * (-arg * arg / (4.0 * dt)).exp();
            if (g - exact).abs() > worst {
                worst = (g - exact).abs();
                loc = format!("x={x} xi={xi} dt={dt}");
            }
        }
        rows.push(CheckReport {
            name: "advection-shift".into(),
            passed: worst <= 1e-6,
            worst_violation: worst,
            location: loc,
            tolerance: 1e-6,
            notes: format!("drift b={b} vs shifted Gaussian"),
        });
    }

    // 3. mass: variable coefficients with c = 0 conserve unit mass
    let smooth = || -> Result<KernelHandle> {
        let coeffs = ParabolicCoefficients::new(
            CoeffField::from_fn(|x: f64, t: f64| 1.0 + 0.3 * x.sin() * (-t).exp()),
            CoeffField::from_fn(|x: f64, _| 0.2 * x.cos()),
            CoeffField::constant(0.0),
            0.65,
            1.35,
            1.0,
            4.0,
        )?;
        KernelHandle::new(coeffs, depth, quad.clone(), scenario.grid.half_width, 0.55)
    };
    {
        let handle = smooth()?;
        let one = |_x: f64| 1.0;
        let mut worst = 0.0f64;
        let mut loc = String::from("-");
        for dt in [0.02, 0.1, 0.3, 0.5] {
            let profile = apply_gamma(&handle, &one, &scenario.grid, dt, 0.0)?;
            for (j, v) in profile.iter().enumerate() {
                // skip the outer margin where truncation bites by design
                let x = scenario.grid.x(j);
                if x.abs() > scenario.grid.half_width - 1.0 {
                    continue;
                }
                if (v - 1.0).abs() > worst {
                    worst = (v - 1.0).abs();
                    loc = format!("x={x:.2} dt={dt}");
                }
            }
        }
        rows.push(CheckReport {
            name: "kernel-mass".into(),
            passed: worst <= 1e-3,
            worst_violation: worst,
            location: loc,
            tolerance: 1e-3,
            notes: "|∫Γ dξ - 1| for c ≡ 0".into(),
        });
    }

    // 4. delta family: Γ-convolution reproduces cos(x) as dt → 0
    {
        let handle = smooth()?;
        let psi = |x: f64| x.cos();
        let mut errs = Vec::new();
        for dt in [0.1, 0.05, 0.025] {
            let profile = apply_gamma(&handle, &psi, &scenario.grid, dt, 0.0)?;
            let mut sup = 0.0f64;
            for (j, v) in profile.iter().enumerate() {
                let x = scenario.grid.x(j);
                if x.abs() > scenario.grid.half_width - 1.0 {
                    continue;
                }
                sup = sup.max((v - psi(x)).abs());
            }
            errs.push(sup);
        }
        let decreasing = errs[0] > errs[1] && errs[1] > errs[2];
        let passed = decreasing && errs[2] <= 0.05;
        rows.push(CheckReport {
            name: "delta-family".into(),
            passed,
            worst_violation: errs[2],
            location: "dt=0.025".into(),
            tolerance: 0.05,
            notes: format!("sup errors {:?} (must decrease)", errs),
        });
    }

    // 5. PDE residual under grid refinement (finite differences on Γ)
    {
        let handle = smooth()?;
        let (xi, tau, x0, t0) = (0.2, 0.0, 0.5, 0.3);
        let residual = |h: f64| -> Result<f64> {
            let ht = h * h;
            let g = |x: f64, t: f64| eval_gamma(&handle, x, t, xi, tau);
            let du_dt = (g(x0, t0 + ht)? - g(x0, t0 - ht)?) / (2.0 * ht);
            let u_xx = (g(x0 + h, t0)? - 2.0 * g(x0, t0)? + g(x0 - h, t0)?) / (h * h);
            let u_x = (g(x0 + h, t0)? - g(x0 - h, t0)?) / (2.0 * h);
            let a = handle.coeffs.a.at(x0, t0);
            let b = handle.coeffs.b.at(x0, t0);
            let c = handle.coeffs.c.at(x0, t0);
            Ok((du_dt - a * u_xx + b * u_x + c * g(x0, t0)?).abs())
        };
        let r1 = residual(0.08)?;
        let r2 = residual(0.04)?;
        let ratio = r1 / r2.max(1e-14);
        rows.push(CheckReport {
            name: "pde-residual".into(),
            passed: ratio >= 2.0,
            worst_violation: -ratio,
            location: format!("x={x0} t={t0}"),
            tolerance: -2.0,
            notes: format!("residual {r1:.3e} -> {r2:.3e}, refinement ratio {ratio:.2}"),
        });
    }

    let mut csv = CsvFile::create(
        out_dir,
        "kernel_selftest.csv",
        "name,passed,worst_violation,location,tolerance,notes",
    )?;
    let mut all_ok = true;
    for row in &rows {
        csv.raw(&row.csv_row())?;
        all_ok &= row.passed;
        if verbose {
            eprintln!("{}", row.summary_line());
        }
    }
    write_metadata(out_dir, "kernel-selftest", scenario.seed)?;
    Ok(if all_ok { 0 } else { 1 })
}

/// Full march: continuation over the horizon plus trajectory/norm dumps.
pub fn cmd_solve(scenario: &Scenario, out_dir: &Path, verbose: bool) -> Result<i32> {
    let grid = &scenario.grid;
    let data = scenario.data.sample(grid)?;
    let env = UpperSolution::from_data(&data, &scenario.params);
    let (state, report) =
        continue_global(&data, &scenario.params, grid, &scenario.picard, scenario.horizon())?;

    let mut traj = CsvFile::create(out_dir, "trajectory.csv", "t,x,u1,u2,y1,y2")?;
    for (k, &t) in state.times.iter().enumerate() {
        for j in 0..grid.nx {
            traj.row(&[
                fmt_float(t),
                fmt_float(grid.x(j)),
                fmt_float(state.u[0].get(k, j)),
                fmt_float(state.u[1].get(k, j)),
                fmt_float(state.fuel[0].get(k, j)),
                fmt_float(state.fuel[1].get(k, j)),
            ])?;
        }
    }

    let mut norms = CsvFile::create(
        out_dir,
        "norms.csv",
        "t,sup_u1,sup_u2,lp_u1,lp_u2,sup_dx_u1,sup_dx_u2,phi",
    )?;
    for (k, &t) in state.times.iter().enumerate() {
        let sup = |i: usize| state.u[i].level(k).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        norms.row(&[
            fmt_float(t),
            fmt_float(sup(0)),
            fmt_float(sup(1)),
            fmt_float(state.lp_norm(0, k, grid.p)),
            fmt_float(state.lp_norm(1, k, grid.p)),
            fmt_float(state.sup_dx(0, k)),
            fmt_float(state.sup_dx(1, k)),
            fmt_float(phi_upper(t, &env)?),
        ])?;
    }

    if verbose {
        let mut iters = CsvFile::create(
            out_dir,
            "picard_iters.csv",
            "window,iteration,sup_gap,holder_u1,holder_u2,min_u,max_u",
        )?;
        for (w, local) in report.locals.iter().enumerate() {
            for rec in &local.iterations {
                iters.row(&[
                    w.to_string(),
                    rec.iteration.to_string(),
                    fmt_float(rec.sup_gap),
                    fmt_float(rec.holder_norm[0]),
                    fmt_float(rec.holder_norm[1]),
                    fmt_float(rec.min_u),
                    fmt_float(rec.max_u),
                ])?;
            }
        }
        for w in &report.windows {
            eprintln!(
                "window @ t={:.4}: length {:.4}, {} sweeps, {} shrinks",
                w.start, w.length, w.iterations, w.shrink_count
            );
        }
    }
    write_metadata(out_dir, "solve", scenario.seed)?;
    Ok(0)
}

/// Cross-validation: the Picard solve against the finite-difference oracle
/// on one window, compared at the final time.
pub fn cmd_compare(scenario: &Scenario, out_dir: &Path, verbose: bool) -> Result<i32> {
    let grid = &scenario.grid;
    let data = scenario.data.sample(grid)?;
    let (p_state, _) = picard_solve(&data, &scenario.params, grid, &scenario.picard)?;

    // the oracle runs at its own (refined) resolution on the same window,
    // shortened if the Picard window had to shrink
    let fd_cfg = scenario.fd.config(grid);
    let window = *p_state.times.last().unwrap();
    let fd_grid_base = GridSpec { t_window: window, ..grid.clone() };
    let ogrid = fd_cfg.oracle_grid(&fd_grid_base);
    let fd_data = scenario.data.sample(&ogrid)?;
    let f_state = fd_solve(&fd_data, &scenario.params, &fd_grid_base, &fd_cfg)?;

    let last_p = p_state.times.len() - 1;
    let last_f = f_state.times.len() - 1;
    let mut csv =
        CsvFile::create(out_dir, "compare.csv", "x,u1_picard,u1_fd,u2_picard,u2_fd")?;
    let mut sup_gap = [0.0f64; 2];
    let mut sup_val = [0.0f64; 2];
    let fd_x0 = -ogrid.half_width;
    let fd_dx = ogrid.dx();
    for j in 0..grid.nx {
        let x = grid.x(j);
        let mut row = vec![fmt_float(x)];
        for i in 0..2 {
            let up = p_state.u[i].get(last_p, j);
            let uf = interp_profile(fd_x0, fd_dx, f_state.u[i].level(last_f), x);
            sup_gap[i] = sup_gap[i].max((up - uf).abs());
            sup_val[i] = sup_val[i].max(uf.abs());
            row.push(fmt_float(up));
            row.push(fmt_float(uf));
        }
        csv.row(&row)?;
    }
    let rel = [
        sup_gap[0] / sup_val[0].max(1e-300),
        sup_gap[1] / sup_val[1].max(1e-300),
    ];
    csv.raw(&format!("summary,{},{},,", fmt_float(rel[0]), fmt_float(rel[1])))?;
    if verbose {
        eprintln!(
            "relative sup gaps at t={window:.4}: u1 {:.3e}, u2 {:.3e}",
            rel[0], rel[1]
        );
    }
    write_metadata(out_dir, "compare", scenario.seed)?;
    Ok(0)
}

/// Solve pipeline plus the requested verification checks.
pub fn cmd_verify(scenario: &Scenario, out_dir: &Path, verbose: bool) -> Result<i32> {
    let grid = &scenario.grid;
    let data = scenario.data.sample(grid)?;
    let env = UpperSolution::from_data(&data, &scenario.params);
    let (mut state, _) =
        continue_global(&data, &scenario.params, grid, &scenario.picard, scenario.horizon())?;
    if scenario.inject_fault {
        corrupt_node(&mut state, 0, -1.0);
    }

    let cp = &scenario.check_params;
    let mut reports: Vec<CheckReport> = Vec::new();
    for name in &scenario.checks {
        let report = match name.as_str() {
            "sector" => check_sector(&state, &env, cp.tol)?,
            "fuel" => check_fuel(&state, &data, cp.tol)?,
            "comparison" => {
                check_comparison(&data, &scenario.params, grid, &scenario.picard, cp.delta, cp.tol)?
            }
            "lp-envelope" => {
                check_lp_envelope(&state, &data, &scenario.params, grid.p, 0.05)?
            }
            "gradient-bound" => check_gradient_bound(&state, &state.grid)?,
            "solution-stability" => {
                check_solution_stability(&data, &scenario.params, grid, &scenario.picard, cp.eps)?
            }
            other => return Err(Error::Config(format!("unknown check `{other}`"))),
        };
        if verbose {
            eprintln!("{}", report.summary_line());
        }
        reports.push(report);
    }

    let mut csv = CsvFile::create(
        out_dir,
        "checks.csv",
        "name,passed,worst_violation,location,tolerance,notes",
    )?;
    let mut summary = String::new();
    let mut all_ok = true;
    for r in &reports {
        csv.raw(&r.csv_row())?;
        summary.push_str(&r.summary_line());
        summary.push('\n');
        all_ok &= r.passed;
    }
    fs::write(out_dir.join("checks_summary.txt"), summary)?;
    write_metadata(out_dir, "verify", scenario.seed)?;
    Ok(if all_ok { 0 } else { 1 })
}

/// Writes a Γ debug dump for the scenario's first-layer coefficients, as
/// sampled CSV columns.
pub fn dump_kernel_debug(scenario: &Scenario, out_dir: &Path) -> Result<()> {
    let grid = &scenario.grid;
    let data = scenario.data.sample(grid)?;
    let fuel = crate::grid::Field::from_profile(grid.nt, &data.y0[0]);
    let coeffs = crate::solver::assemble_coefficients(
        &fuel,
        crate::model::Layer::One,
        &scenario.params,
        grid,
        &data,
    )?;
    let handle = KernelHandle::new(
        coeffs,
        scenario.picard.levi_depth,
        scenario.picard.quad.clone(),
        grid.half_width,
        grid.t_window,
    )?;
    let mut samples = Vec::new();
    for xi in [-1.0, 0.0, 1.0] {
        for dx in [-0.5, 0.0, 0.5] {
            samples.push(kernel::GapSample {
                x: xi + dx,
                t: grid.t_window * 0.7,
                xi,
                tau: 0.0,
            });
        }
    }
    fs::create_dir_all(out_dir)?;
    kernel::dump_gamma_csv(&handle, &samples, &out_dir.join("gamma_debug.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_families_evaluate() {
        let g = ProfileSpec::GaussianBump { center: 1.0, width: 0.5, height: 2.0 };
        assert!((g.eval(1.0) - 2.0).abs() < 1e-15);
        assert!(g.eval(3.0) < 2.0 * (-8.0f64).exp() + 1e-12);
        let p = ProfileSpec::Plateau { center: 0.0, halfwidth: 1.0, height: 1.0, ramp: 0.5 };
        assert_eq!(p.eval(0.3), 1.0);
        assert_eq!(p.eval(2.0), 0.0);
        assert!(p.eval(1.25) > 0.0 && p.eval(1.25) < 1.0);
        assert!(ProfileSpec::GaussianBump { center: 0.0, width: -1.0, height: 1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn scenario_roundtrip_and_validation() {
        let s = Scenario::synthetic_default();
        let text = toml::to_string(&s).unwrap();
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(s, back);
        assert!(s.validate().is_ok());

        let mut bad = s.clone();
        bad.checks.push("not-a-check".into());
        assert!(bad.validate().is_err());

        let mut bad_depth = s;
        bad_depth.picard.levi_depth = 0;
        assert!(matches!(bad_depth.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes_distinguish_config_errors() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), 2);
        assert_eq!(exit_code_for(&Error::Toml("x".into())), 2);
        assert_eq!(exit_code_for(&Error::NonFinite("x".into())), 1);
        assert_eq!(
            exit_code_for(&Error::LocalExistence { window: 0.0, floor: 0.0 }),
            1
        );
    }
}
