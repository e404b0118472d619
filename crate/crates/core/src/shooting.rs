//! The 0th-mode construction: the rho-forced profile ODE, tau-drift
//! tracking inside the phase-plane annulus, Newton matching of the periodic
//! boundary data on (omega, phi(0)), the starting-point scan over delta,
//! and the energy-derivative integral whose zeros mark exact CMC candidates.

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, ForcingPoint};
use crate::delaunay::{self, ProfileState, Trajectory};
use crate::error::{CoreError, Result};
use crate::linearization;
use crate::ode::{self, OdeOptions};
use crate::profiles::{Profile, ProfileSpec};
use crate::quadrature;

/// Newton matching controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_integrator_tol")]
    pub integrator_tol: f64,
}

fn default_integrator_tol() -> f64 {
    1e-13
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            integrator_tol: 1e-13,
        }
    }
}

/// Full forcing data for the 0th-mode ODE.
///
/// `epsilon` is always a proper size: construction snaps the requested value
/// to the nearest `L_Gamma / (N psi_1(tau0))` and records the original in
/// `snapped_from` when the adjustment was material.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    pub epsilon: f64,
    pub tau0: f64,
    pub l_gamma: f64,
    /// Theta-average of the normal-normal curvature along the geodesic.
    pub a_profile: Profile,
    /// Theta-average of the tangential curvature along the geodesic.
    pub b_profile: Profile,
    /// xi(x0), the prescribed 1st-mode feedback surrogate.
    pub xi: Profile,
    /// mu(psi), periodic over [0, L_Gamma/epsilon].
    pub mu: Profile,
    pub omega: f64,
    pub phi0: f64,
    /// Half-width of the admissible tau band around tau0.
    pub delta1: f64,
    pub snapped_from: Option<f64>,
    /// Cached unforced period psi_1(tau0).
    pub psi1: f64,
}

impl ForcingSpec {
    /// Build with `epsilon` snapped to the nearest proper size.
    pub fn new(
        l_gamma: f64,
        tau0: f64,
        epsilon_request: f64,
        a_profile: Profile,
        b_profile: Profile,
        xi: Profile,
        mu: Profile,
    ) -> Result<Self> {
        if !(epsilon_request > 0.0) {
            return Err(CoreError::Domain(format!(
                "epsilon = {epsilon_request} must be positive"
            )));
        }
        let psi1 = delaunay::period(tau0)?.value;
        let n = (l_gamma / (epsilon_request * psi1)).round().max(1.0);
        let epsilon = l_gamma / (n * psi1);
        let snapped_from = if (epsilon - epsilon_request).abs() > 1e-9 * epsilon {
            Some(epsilon_request)
        } else {
            None
        };
        Self::with_epsilon(
            l_gamma,
            tau0,
            epsilon,
            snapped_from,
            a_profile,
            b_profile,
            xi,
            mu,
            psi1,
        )
    }

    /// Build from the period count N directly: epsilon = L_Gamma / (N psi_1).
    pub fn with_periods(
        l_gamma: f64,
        tau0: f64,
        n: u32,
        a_profile: Profile,
        b_profile: Profile,
        xi: Profile,
        mu: Profile,
    ) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::Domain("period count N must be positive".into()));
        }
        let psi1 = delaunay::period(tau0)?.value;
        let epsilon = l_gamma / (n as f64 * psi1);
        Self::with_epsilon(
            l_gamma, tau0, epsilon, None, a_profile, b_profile, xi, mu, psi1,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn with_epsilon(
        l_gamma: f64,
        tau0: f64,
        epsilon: f64,
        snapped_from: Option<f64>,
        a_profile: Profile,
        b_profile: Profile,
        xi: Profile,
        mu: Profile,
        psi1: f64,
    ) -> Result<Self> {
        if !(l_gamma > 0.0) {
            return Err(CoreError::Domain(format!(
                "L_Gamma = {l_gamma} must be positive"
            )));
        }
        let params = delaunay::delaunay_params(tau0)?;
        let ratio = l_gamma / (epsilon * psi1);
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(CoreError::Domain(format!(
                "epsilon = {epsilon} is not a proper size: L/(eps psi1) = {ratio}"
            )));
        }
        Ok(Self {
            epsilon,
            tau0,
            l_gamma,
            a_profile,
            b_profile,
            xi,
            mu,
            omega: 0.0,
            phi0: params.phi_min,
            delta1: 0.5 * tau0.min(0.25 - tau0),
            snapped_from,
            psi1,
        })
    }

    /// Length of the psi interval, L_Gamma / epsilon.
    pub fn t_end(&self) -> f64 {
        self.l_gamma / self.epsilon
    }

    /// Number of unforced periods fitting along the geodesic.
    pub fn n_periods(&self) -> usize {
        (self.t_end() / self.psi1).round() as usize
    }

    /// Pointwise forcing data at psi with start offset delta.
    pub fn forcing_point(&self, psi: f64, delta: f64, omega: f64) -> ForcingPoint {
        let x0 = self.epsilon * (psi + delta);
        ForcingPoint {
            epsilon: self.epsilon,
            a: self.a_profile.eval(x0),
            b: self.b_profile.eval(x0),
            xi: self.xi.eval(x0),
            mu: self.mu.eval(psi),
            omega,
        }
    }

    /// Annulus membership of a phase-plane point.
    pub fn in_annulus(&self, phi: f64, zeta: f64) -> bool {
        let tau = coefficients::first_integral(phi, zeta);
        (tau - self.tau0).abs() <= self.delta1
    }
}

/// The forcing term rho of the 0th-mode ODE at one state.
pub fn rho(state: &ProfileState, x0: f64, forcing: &ForcingSpec) -> f64 {
    let point = ForcingPoint {
        epsilon: forcing.epsilon,
        a: forcing.a_profile.eval(x0),
        b: forcing.b_profile.eval(x0),
        xi: forcing.xi.eval(x0),
        mu: forcing.mu.eval(state.psi),
        omega: forcing.omega,
    };
    coefficients::rho_eval(state.phi, state.zeta, &point).rho
}

/// Forced forward solution with tau and x0 tracking.
#[derive(Debug, Clone)]
pub struct ForcedTrajectory {
    pub base: Trajectory,
    /// x0 = epsilon * psi at every sample.
    pub x0_track: Vec<f64>,
    /// Whether (phi, zeta) stayed inside the annulus A(tau0, delta1).
    pub annulus_flag: bool,
    /// Exit point when the annulus was left.
    pub exit_psi: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub omega: f64,
    pub phi0: f64,
}

impl ForcedTrajectory {
    pub fn end_state(&self) -> ProfileState {
        self.base.state_at(self.base.solution.t_end)
    }

    /// tau(end) - tau(0).
    pub fn tau_defect(&self) -> f64 {
        let end = self.end_state();
        coefficients::first_integral(end.phi, end.zeta)
            - coefficients::first_integral(self.phi0, 0.0)
    }
}

fn forced_rhs<'a>(
    spec: &'a ForcingSpec,
    delta: f64,
    omega: f64,
) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    move |psi: f64, y: &[f64; 2]| {
        let point = spec.forcing_point(psi, delta, omega);
        let rho = coefficients::rho_eval(y[0], y[1], &point).rho;
        let u = 1.0 + y[1] * y[1];
        [y[1], u / y[0] - (2.0 + rho) * u.powf(1.5)]
    }
}

/// Integrate the forced profile over [0, L_Gamma/epsilon] from (phi0, 0).
///
/// The trajectory is returned even when the annulus guard trips
/// (`annulus_flag` false, `exit_psi` set); use [`integrate_forced`] for the
/// erroring variant.
pub fn integrate_forced_lenient(
    spec: &ForcingSpec,
    delta: f64,
    omega: f64,
    phi0: f64,
    tol: f64,
) -> Result<ForcedTrajectory> {
    let t_end = spec.t_end();
    let opts = OdeOptions::with_tol(tol);
    let mut inside = true;
    let solution = ode::integrate(
        forced_rhs(spec, delta, omega),
        0.0,
        t_end,
        [phi0, 0.0],
        &opts,
        Some(&mut |_psi, y: &[f64; 2]| {
            inside = spec.in_annulus(y[0], y[1]);
            inside
        }),
    )?;
    let exit_psi = solution.stopped_at;
    let mut samples = Vec::with_capacity(solution.steps.len() + 1);
    for step in &solution.steps {
        let st = ProfileState {
            psi: step.t0,
            phi: step.y0[0],
            zeta: step.y0[1],
        };
        samples.push((st, st.first_integral()));
    }
    let end = ProfileState {
        psi: solution.t_end,
        phi: solution.y_end[0],
        zeta: solution.y_end[1],
    };
    samples.push((end, end.first_integral()));
    let events = {
        let mut ev = Vec::new();
        for step in &solution.steps {
            let z0 = step.y0[1];
            let z1 = step.eval(1.0)[1];
            if z0 < 0.0 && z1 >= 0.0 {
                ev.push(ode::bisect_root(
                    |p| step.eval_at(p)[1],
                    step.t0,
                    step.t1(),
                    delaunay::EVENT_TOL,
                ));
            }
        }
        ev
    };
    let x0_track = samples.iter().map(|(s, _)| spec.epsilon * s.psi).collect();
    let base = Trajectory {
        samples,
        events,
        span: (0.0, t_end),
        tolerance: tol,
        solution,
    };
    Ok(ForcedTrajectory {
        base,
        x0_track,
        annulus_flag: exit_psi.is_none(),
        exit_psi,
        epsilon: spec.epsilon,
        delta,
        omega,
        phi0,
    })
}

/// Erroring variant of the forced integration: annulus exit is a failure.
pub fn integrate_forced(spec: &ForcingSpec, delta: f64) -> Result<ForcedTrajectory> {
    let traj = integrate_forced_lenient(spec, delta, spec.omega, spec.phi0, 1e-12)?;
    match traj.exit_psi {
        Some(psi) => Err(CoreError::AnnulusExit { psi }),
        None => Ok(traj),
    }
}

/// Matched boundary data and the trajectory realizing it.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub omega: f64,
    pub phi0: f64,
    /// tau(L_Gamma/eps) - tau(0) at the match.
    pub residual_tau: f64,
    /// zeta(L_Gamma/eps) at the match.
    pub residual_zeta: f64,
    pub iterations: usize,
    pub trajectory: ForcedTrajectory,
}

impl ShootingResult {
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "omega": self.omega,
            "phi0": self.phi0,
            "residual_tau": self.residual_tau,
            "residual_zeta": self.residual_zeta,
            "iterations": self.iterations,
            "epsilon": self.trajectory.epsilon,
            "delta": self.trajectory.delta,
        })
        .to_string()
    }
}

/// End-of-interval data of one forced run, with variational derivatives.
struct EndData {
    residual_tau: f64,
    residual_zeta: f64,
    jacobian: [[f64; 2]; 2],
    exited: Option<f64>,
}

/// One augmented integration: base flow plus the variational solutions
/// beta_omega and beta_1, giving residuals and their exact Jacobian.
fn forced_run_with_jacobian(
    spec: &ForcingSpec,
    delta: f64,
    omega: f64,
    phi0: f64,
    tol: f64,
) -> Result<EndData> {
    let rhs = linearization::augmented_jacobian_rhs(spec, delta, omega);
    let opts = OdeOptions::with_tol(tol);
    let mut y0 = [0.0; 6];
    y0[0] = phi0;
    y0[2] = 0.0; // beta_omega
    y0[3] = 0.0;
    y0[4] = 1.0; // beta_1 = d phi / d phi(0)
    y0[5] = 0.0;
    let sol = ode::integrate(
        rhs,
        0.0,
        spec.t_end(),
        y0,
        &opts,
        Some(&mut |_psi, y: &[f64; 6]| spec.in_annulus(y[0], y[1])),
    )?;
    if let Some(psi) = sol.stopped_at {
        return Ok(EndData {
            residual_tau: f64::NAN,
            residual_zeta: f64::NAN,
            jacobian: [[f64::NAN; 2]; 2],
            exited: Some(psi),
        });
    }
    let y = sol.y_end;
    let (tau_phi, tau_zeta) = coefficients::first_integral_gradient(y[0], y[1]);
    let tau_phi0 = coefficients::first_integral_gradient(phi0, 0.0).0;
    Ok(EndData {
        residual_tau: coefficients::first_integral(y[0], y[1])
            - coefficients::first_integral(phi0, 0.0),
        residual_zeta: y[1],
        jacobian: [
            [
                tau_phi * y[2] + tau_zeta * y[3],
                tau_phi * y[4] + tau_zeta * y[5] - tau_phi0,
            ],
            [y[3], y[5]],
        ],
        exited: sol.stopped_at,
    })
}

/// Residuals only (no variational columns); used by the damping line search.
fn forced_residuals(
    spec: &ForcingSpec,
    delta: f64,
    omega: f64,
    phi0: f64,
    tol: f64,
) -> Result<(f64, f64, Option<f64>)> {
    let opts = OdeOptions::with_tol(tol);
    let sol = ode::integrate(
        forced_rhs(spec, delta, omega),
        0.0,
        spec.t_end(),
        [phi0, 0.0],
        &opts,
        Some(&mut |_psi, y: &[f64; 2]| spec.in_annulus(y[0], y[1])),
    )?;
    if let Some(psi) = sol.stopped_at {
        return Ok((f64::NAN, f64::NAN, Some(psi)));
    }
    let y = sol.y_end;
    let dt = coefficients::first_integral(y[0], y[1]) - coefficients::first_integral(phi0, 0.0);
    Ok((dt, y[1], None))
}

/// Newton iteration on (omega, phi(0)) driving (Delta tau, zeta_end) to zero.
///
/// The Jacobian comes from the variational solutions integrated alongside
/// the base flow; steps are halved (up to 6 times) when a trial point exits
/// the annulus or increases the residual norm.
pub fn match_boundary(
    spec: &ForcingSpec,
    delta: f64,
    newton: &NewtonOptions,
) -> Result<ShootingResult> {
    let mut omega = spec.omega;
    let mut phi0 = spec.phi0;
    let mut history = Vec::new();

    for iter in 0..=newton.max_iter {
        let end = forced_run_with_jacobian(spec, delta, omega, phi0, newton.integrator_tol)?;
        if let Some(psi) = end.exited {
            return Err(CoreError::AnnulusExit { psi });
        }
        let norm = end.residual_tau.abs().max(end.residual_zeta.abs());
        history.push(norm);
        if norm <= newton.tol {
            let trajectory =
                integrate_forced_lenient(spec, delta, omega, phi0, newton.integrator_tol)?;
            return Ok(ShootingResult {
                omega,
                phi0,
                residual_tau: end.residual_tau,
                residual_zeta: end.residual_zeta,
                iterations: iter,
                trajectory,
            });
        }
        if iter == newton.max_iter {
            break;
        }

        let j = end.jacobian;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(CoreError::NonConvergence {
                iterations: iter,
                history,
            });
        }
        let step_omega = -(j[1][1] * end.residual_tau - j[0][1] * end.residual_zeta) / det;
        let step_phi0 = -(-j[1][0] * end.residual_tau + j[0][0] * end.residual_zeta) / det;

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=6 {
            let trial_omega = omega + lambda * step_omega;
            let trial_phi0 = phi0 + lambda * step_phi0;
            if trial_phi0 > 0.0 {
                let (dt, zt, exited) =
                    forced_residuals(spec, delta, trial_omega, trial_phi0, newton.integrator_tol)?;
                if exited.is_none() {
                    let trial_norm = dt.abs().max(zt.abs());
                    if trial_norm < norm || trial_norm <= newton.tol {
                        omega = trial_omega;
                        phi0 = trial_phi0;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(CoreError::NonConvergence {
                iterations: iter,
                history,
            });
        }
    }
    Err(CoreError::NonConvergence {
        iterations: newton.max_iter,
        history,
    })
}

/// The positive weight integral of the energy derivative,
/// `I = 2 pi eps^2 int zeta^2 psi_dot dpsi` over the matched interval.
pub fn energy_integral(traj: &ForcedTrajectory) -> f64 {
    let (a, b) = traj.base.span;
    let panels = (8 * traj.base.events.len().max(1)).max(32);
    let integral = quadrature::integrate(
        |psi| {
            let st = traj.base.state_at(psi);
            let psi_dot = st.phi / (1.0 + st.zeta * st.zeta).sqrt();
            st.zeta * st.zeta * psi_dot
        },
        a,
        b,
        panels,
    );
    2.0 * std::f64::consts::PI * traj.epsilon * traj.epsilon * integral
}

/// dE/d delta = -eps^3 omega I, with I > 0 by the orientation convention.
pub fn energy_derivative(result: &ShootingResult) -> f64 {
    let eps = result.trajectory.epsilon;
    -eps.powi(3) * result.omega * energy_integral(&result.trajectory)
}

/// Classification of the scanned forcing data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryClass {
    Constant,
    Generic,
}

/// One scanned starting point; failures are carried, not fatal.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub delta: f64,
    pub omega: f64,
    pub phi0: f64,
    pub residual_tau: f64,
    pub residual_zeta: f64,
    pub energy_integral: f64,
    pub error: Option<String>,
}

/// A refined zero crossing of omega(delta).
#[derive(Debug, Clone, Serialize)]
pub struct ScanZero {
    pub delta: f64,
    pub omega_residual: f64,
    pub bracket: (f64, f64),
}

/// Starting-point scan output.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub zeros: Vec<ScanZero>,
    pub symmetry_class: SymmetryClass,
    /// True when |omega_delta| <= 1e-10 uniformly: every starting point is
    /// a CMC candidate ("infinitely many candidates").
    pub all_zero: bool,
}

impl ScanResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,omega,phi0,residual_tau,residual_zeta,energy_integral\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                p.delta, p.omega, p.phi0, p.residual_tau, p.residual_zeta, p.energy_integral
            ));
        }
        out
    }

    pub fn zeros_to_json(&self) -> String {
        let classification = match (self.all_zero, self.symmetry_class) {
            (true, _) => "infinitely many candidates",
            (false, SymmetryClass::Constant) => "constant",
            (false, SymmetryClass::Generic) => "generic",
        };
        serde_json::json!({
            "classification": classification,
            "all_zero": self.all_zero,
            "zeros": self.zeros.iter().map(|z| {
                serde_json::json!({
                    "delta": z.delta,
                    "omega_residual": z.omega_residual,
                    "bracket": [z.bracket.0, z.bracket.1],
                })
            }).collect::<Vec<_>>(),
        })
        .to_string()
    }

    /// Count of sign changes of omega over the scanned grid (wrap included).
    pub fn sign_changes(&self) -> usize {
        let omegas: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.error.is_none())
            .map(|p| p.omega)
            .collect();
        if omegas.len() < 2 {
            return 0;
        }
        let mut count = 0;
        for i in 0..omegas.len() {
            let a = omegas[i];
            let b = omegas[(i + 1) % omegas.len()];
            if a * b < 0.0 {
                count += 1;
            }
        }
        count
    }
}

const SCAN_ZERO_TOL: f64 = 1e-10;

fn scan_one(spec: &ForcingSpec, delta: f64, newton: &NewtonOptions) -> ScanPoint {
    match match_boundary(spec, delta, newton) {
        Ok(result) => ScanPoint {
            delta,
            omega: result.omega,
            phi0: result.phi0,
            residual_tau: result.residual_tau,
            residual_zeta: result.residual_zeta,
            energy_integral: energy_integral(&result.trajectory),
            error: None,
        },
        Err(e) => ScanPoint {
            delta,
            omega: f64::NAN,
            phi0: f64::NAN,
            residual_tau: f64::NAN,
            residual_zeta: f64::NAN,
            energy_integral: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Scan omega_delta over the grid; bracket its sign changes and refine each
/// zero by bisection on delta until |omega| <= 1e-10.
///
/// Grid points are independent; with `jobs > 1` they run on a local thread
/// pool and results are merged by grid index, so output is deterministic.
pub fn scan_start_point(
    spec: &ForcingSpec,
    delta_grid: &[f64],
    newton: &NewtonOptions,
    jobs: usize,
) -> ScanResult {
    let points: Vec<ScanPoint> = if jobs == 1 || delta_grid.len() < 2 {
        delta_grid
            .iter()
            .map(|&d| scan_one(spec, d, newton))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("scan thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            delta_grid
                .par_iter()
                .map(|&d| scan_one(spec, d, newton))
                .collect()
        })
    };

    let matched: Vec<&ScanPoint> = points.iter().filter(|p| p.error.is_none()).collect();
    let all_zero = !matched.is_empty() && matched.iter().all(|p| p.omega.abs() <= SCAN_ZERO_TOL);
    let symmetry_class = if spec.a_profile.is_constant()
        && spec.b_profile.is_constant()
        && spec.xi.is_constant()
        && spec.mu.is_constant()
    {
        SymmetryClass::Constant
    } else {
        SymmetryClass::Generic
    };

    let mut zeros = Vec::new();
    if !all_zero {
        let period = spec.t_end();
        for i in 0..matched.len() {
            let lo = matched[i];
            let hi = matched[(i + 1) % matched.len()];
            let hi_delta = if i + 1 == matched.len() {
                hi.delta + period
            } else {
                hi.delta
            };
            if lo.omega * hi.omega < 0.0 {
                if let Some(z) = refine_zero(spec, newton, lo, hi, hi_delta) {
                    zeros.push(z);
                }
            }
        }
    }

    ScanResult {
        points,
        zeros,
        symmetry_class,
        all_zero,
    }
}

fn refine_zero(
    spec: &ForcingSpec,
    newton: &NewtonOptions,
    lo: &ScanPoint,
    hi: &ScanPoint,
    hi_delta: f64,
) -> Option<ScanZero> {
    let bracket = (lo.delta, hi_delta);
    let (mut a, mut b) = bracket;
    let (mut fa, mut warm) = (lo.omega, (lo.omega, lo.phi0));
    let mut best = (lo.delta, lo.omega);
    if hi.omega.abs() < lo.omega.abs() {
        best = (hi_delta, hi.omega);
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let mut mid_spec = spec.clone();
        mid_spec.omega = warm.0;
        mid_spec.phi0 = warm.1;
        let Ok(result) = match_boundary(&mid_spec, mid, newton) else {
            return Some(ScanZero {
                delta: best.0,
                omega_residual: best.1,
                bracket,
            });
        };
        if result.omega.abs() < best.1.abs() {
            best = (mid, result.omega);
        }
        if result.omega.abs() <= SCAN_ZERO_TOL {
            return Some(ScanZero {
                delta: mid,
                omega_residual: result.omega,
                bracket,
            });
        }
        if fa * result.omega < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = result.omega;
        }
        warm = (result.omega, result.phi0);
    }
    Some(ScanZero {
        delta: best.0,
        omega_residual: best.1,
        bracket,
    })
}

/// Problem definition file (JSON) for the shoot and scan commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub l_gamma: f64,
    pub tau0: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default, rename = "N")]
    pub n: Option<u32>,
    pub profiles: ProblemProfiles,
    #[serde(default)]
    pub newton: Option<NewtonOptions>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemProfiles {
    pub a: ProfileSpec,
    pub b: ProfileSpec,
    pub xi: ProfileSpec,
    pub mu: ProfileSpec,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| CoreError::Domain(format!("problem file parse error: {e}")))
    }

    pub fn build(&self) -> Result<(ForcingSpec, NewtonOptions)> {
        let psi1 = delaunay::period(self.tau0)?.value;
        // resolve the proper size first so the mu profile spans exactly
        // [0, L/eps] after snapping
        let n = match (self.epsilon, self.n) {
            (Some(e), _) => {
                if !(e > 0.0) {
                    return Err(CoreError::Domain(format!("epsilon = {e} must be positive")));
                }
                (self.l_gamma / (e * psi1)).round().max(1.0) as u32
            }
            (None, Some(n)) => n,
            (None, None) => {
                return Err(CoreError::Domain(
                    "problem file needs either epsilon or N".into(),
                ))
            }
        };
        let t_end = n as f64 * psi1;
        let a = self.profiles.a.build(self.l_gamma)?;
        let b = self.profiles.b.build(self.l_gamma)?;
        let xi = self.profiles.xi.build(self.l_gamma)?;
        let mu = self.profiles.mu.build(t_end)?;
        let mut spec = ForcingSpec::with_periods(self.l_gamma, self.tau0, n, a, b, xi, mu)?;
        if let Some(e) = self.epsilon {
            if (spec.epsilon - e).abs() > 1e-9 * spec.epsilon {
                spec.snapped_from = Some(e);
            }
        }
        Ok((spec, self.newton.unwrap_or_default()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_spec(tau0: f64, n: u32, l_gamma: f64) -> ForcingSpec {
        let t = l_gamma / (l_gamma / (n as f64 * delaunay::period(tau0).unwrap().value));
        ForcingSpec::with_periods(
            l_gamma,
            tau0,
            n,
            Profile::zero(l_gamma),
            Profile::zero(l_gamma),
            Profile::zero(l_gamma),
            Profile::zero(t),
        )
        .unwrap()
    }

    #[test]
    fn epsilon_snapping() {
        let l = 2.0;
        let tau0 = 0.16;
        let psi1 = delaunay::period(tau0).unwrap().value;
        let spec = ForcingSpec::new(
            l,
            tau0,
            0.1,
            Profile::zero(l),
            Profile::zero(l),
            Profile::zero(l),
            Profile::zero(l / 0.1),
        )
        .unwrap();
        let ratio = l / (spec.epsilon * psi1);
        assert!((ratio - ratio.round()).abs() < 1e-12);
        assert!(spec.snapped_from.is_some());
        assert!((spec.epsilon - 0.1).abs() < 0.05);
    }

    #[test]
    fn rho_examples() {
        let spec = zero_spec(0.16, 4, 2.0);
        let st = ProfileState {
            psi: 0.3,
            phi: 0.4,
            zeta: 0.2,
        };
        assert_eq!(rho(&st, 0.1, &spec), 0.0);
        // zeta = 0 kills the omega term
        let mut spec2 = zero_spec(0.16, 4, 2.0);
        spec2.omega = 5.0;
        let st0 = ProfileState {
            psi: 0.0,
            phi: 0.4,
            zeta: 0.0,
        };
        assert_eq!(rho(&st0, 0.0, &spec2), 0.0);
    }

    #[test]
    fn rho_epsilon_power_scaling() {
        // halving eps with fixed profiles scales the xi term by 1/2 and the
        // mu, omega terms by 1/8
        let l = 2.0;
        let tau0 = 0.16;
        let mk = |n: u32, xi_v: f64, mu_v: f64, om: f64| {
            let psi1 = delaunay::period(tau0).unwrap().value;
            let mut s = ForcingSpec::with_periods(
                l,
                tau0,
                n,
                Profile::zero(l),
                Profile::zero(l),
                Profile::constant(xi_v, l),
                Profile::constant(mu_v, n as f64 * psi1),
            )
            .unwrap();
            s.omega = om;
            s
        };
        let st = ProfileState {
            psi: 0.5,
            phi: 0.5,
            zeta: 0.3,
        };
        let (s1, s2) = (mk(4, 1.0, 0.0, 0.0), mk(8, 1.0, 0.0, 0.0));
        assert!((rho(&st, 0.2, &s2) / rho(&st, 0.2, &s1) - 0.5).abs() < 1e-12);
        let (s1, s2) = (mk(4, 0.0, 1.0, 0.0), mk(8, 0.0, 1.0, 0.0));
        assert!((rho(&st, 0.2, &s2) / rho(&st, 0.2, &s1) - 0.125).abs() < 1e-12);
        let (s1, s2) = (mk(4, 0.0, 0.0, 1.0), mk(8, 0.0, 0.0, 1.0));
        assert!((rho(&st, 0.2, &s2) / rho(&st, 0.2, &s1) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_coincides_with_unforced() {
        let spec = zero_spec(0.16, 3, 1.0);
        let forced = integrate_forced(&spec, 0.0).unwrap();
        let unforced = delaunay::integrate_profile(0.16, (0.0, spec.t_end()), 1e-12).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..200 {
            let psi = spec.t_end() * k as f64 / 200.0;
            let a = forced.base.state_at(psi);
            let b = unforced.state_at(psi);
            worst = worst
                .max((a.phi - b.phi).abs())
                .max((a.zeta - b.zeta).abs());
        }
        assert!(worst <= 1e-9, "zero-forcing deviation {worst:.3e}");
        assert!(forced.annulus_flag);
    }

    #[test]
    fn x0_track_is_exact() {
        let spec = zero_spec(0.2, 2, 1.5);
        let forced = integrate_forced(&spec, 0.0).unwrap();
        for ((s, _), x0) in forced.base.samples.iter().zip(&forced.x0_track) {
            assert_eq!(*x0, spec.epsilon * s.psi);
        }
    }

    #[test]
    fn annulus_exit_reported_for_oversized_forcing() {
        let l = 2.0;
        let tau0 = 0.16;
        let psi1 = delaunay::period(tau0).unwrap().value;
        let spec = ForcingSpec::with_periods(
            l,
            tau0,
            2,
            Profile::constant(80.0, l),
            Profile::zero(l),
            Profile::zero(l),
            Profile::zero(2.0 * psi1),
        )
        .unwrap();
        match integrate_forced(&spec, 0.0) {
            Err(CoreError::AnnulusExit { psi }) => assert!(psi > 0.0 && psi <= spec.t_end()),
            other => panic!("expected annulus exit, got {other:?}"),
        }
    }

    #[test]
    fn zero_forcing_matches_immediately() {
        // one period at a tight tolerance: the unforced orbit is exactly periodic
        let spec = zero_spec(0.16, 1, 0.3);
        let newton = NewtonOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let result = match_boundary(&spec, 0.0, &newton).unwrap();
        assert!(result.iterations <= 2);
        assert_eq!(result.omega, 0.0);
        assert_eq!(
            result.phi0,
            delaunay::delaunay_params(0.16).unwrap().phi_min
        );
        assert!(result.residual_tau.abs() <= 1e-12);
        assert!(result.residual_zeta.abs() <= 1e-12);
        // several periods at the default tolerance: still an immediate match
        let spec = zero_spec(0.16, 4, 2.0);
        let result = match_boundary(&spec, 0.0, &NewtonOptions::default()).unwrap();
        assert_eq!(result.omega, 0.0);
        assert!(result.residual_tau.abs() <= 1e-10);
        assert!(result.residual_zeta.abs() <= 1e-10);
    }

    #[test]
    fn energy_derivative_zero_when_omega_zero() {
        let spec = zero_spec(0.16, 3, 2.0);
        let result = match_boundary(&spec, 0.0, &NewtonOptions::default()).unwrap();
        assert_eq!(energy_derivative(&result), 0.0);
        assert!(energy_integral(&result.trajectory) > 0.0);
    }

    #[test]
    fn problem_file_parses_and_builds() {
        let text = r#"{
            "l_gamma": 0.2836,
            "tau0": 0.16,
            "N": 1,
            "profiles": {"a": "sin:0.05,1", "b": "zero", "xi": "zero", "mu": "zero"},
            "newton": {"tol": 1e-12, "max_iter": 25}
        }"#;
        let pf = ProblemFile::parse(text).unwrap();
        let (spec, newton) = pf.build().unwrap();
        assert_eq!(spec.n_periods(), 1);
        assert_eq!(newton.max_iter, 25);
        assert!(ProblemFile::parse("{").is_err());
    }
}
