//! The unforced Delaunay profile ODE in both parametrizations, its first
//! integral, periods, limit profiles, and admissible size sequences.
//!
//! The profile radius phi(psi) of an unduloid with necksize parameter
//! tau in (0, 1/4] solves
//!
//! ```text
//!   phi_psipsi - phi^-1 (1 + phi_psi^2) + 2 (1 + phi_psi^2)^{3/2} = 0,
//!   phi(0) = (1 - sqrt(1 - 4 tau)) / 2,  phi_psi(0) = 0,
//! ```
//!
//! oscillating between the two roots of phi^2 - phi + tau = 0. tau = 1/4 is
//! the cylinder of radius 1/2; tau -> 0 degenerates to a chain of unit
//! spheres touching at the poles.

use crate::coefficients;
use crate::error::{CoreError, Result};
use crate::ode::{self, OdeOptions, OdeSolution};

/// Lower guard on tau; numerics degenerate near the sphere-chain limit.
pub const TAU_FLOOR: f64 = 1e-3;

/// Above this the orbit amplitude ~ sqrt(1/4 - tau) is below useful
/// resolution and `period` switches to the flagged analytic limit pi.
pub const TAU_CYLINDER_GUARD: f64 = 0.2499;

/// Events are refined until |zeta| drops below this.
pub const EVENT_TOL: f64 = 1e-13;

/// Orbit data derived from the necksize parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaunayParameter {
    pub tau: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

/// A point (psi, phi, zeta = dphi/dpsi) of the profile-curve system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileState {
    pub psi: f64,
    pub phi: f64,
    pub zeta: f64,
}

impl ProfileState {
    pub fn first_integral(&self) -> f64 {
        coefficients::first_integral(self.phi, self.zeta)
    }
}

/// Densely sampled forward solution with detected minima and per-sample tau.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// (state, tau value) at every accepted integrator step.
    pub samples: Vec<(ProfileState, f64)>,
    /// psi_i where zeta crosses zero from negative to positive (minima of phi).
    pub events: Vec<f64>,
    pub span: (f64, f64),
    pub tolerance: f64,
    /// Dense interpolant backing the samples.
    pub solution: OdeSolution<2>,
}

impl Trajectory {
    pub fn state_at(&self, psi: f64) -> ProfileState {
        let y = self.solution.eval(psi);
        ProfileState {
            psi,
            phi: y[0],
            zeta: y[1],
        }
    }

    pub fn tau_start(&self) -> f64 {
        self.samples.first().map(|(_, t)| *t).unwrap_or(f64::NAN)
    }

    /// sup over samples of |tau(psi) - tau(start)|.
    pub fn max_tau_drift(&self) -> f64 {
        let t0 = self.tau_start();
        self.samples
            .iter()
            .map(|(_, t)| (t - t0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `psi,phi,zeta,tau`, one row per sample, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("psi,phi,zeta,tau\n");
        for (s, tau) in &self.samples {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.psi, s.phi, s.zeta, tau
            ));
        }
        out
    }

    /// Sidecar CSV of detected minima: `index,psi_i`.
    pub fn events_to_csv(&self) -> String {
        let mut out = String::from("index,psi_i\n");
        for (i, psi) in self.events.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}\n", i, psi));
        }
        out
    }
}

/// A point of the arc-length parametrization (phi(s), psi(s)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParamState {
    pub s: f64,
    pub phi: f64,
    pub psi: f64,
    pub phi_dot: f64,
}

/// Arc-length trajectory with its dense interpolant; state order (phi, phi_dot, psi).
#[derive(Debug, Clone)]
pub struct SParamTrajectory {
    pub tau: f64,
    pub states: Vec<SParamState>,
    pub solution: OdeSolution<3>,
}

impl SParamTrajectory {
    pub fn state_at(&self, s: f64) -> SParamState {
        let y = self.solution.eval(s);
        SParamState {
            s,
            phi: y[0],
            phi_dot: y[1],
            psi: y[2],
        }
    }

    /// Residual of the defining constraint phi_dot^2 + (phi^2 + tau)^2 = phi^2.
    pub fn constraint_residual(&self, st: &SParamState) -> f64 {
        let q = st.phi * st.phi + self.tau;
        st.phi_dot * st.phi_dot + q * q - st.phi * st.phi
    }
}

/// Root pair of phi^2 - phi + tau = 0.
pub fn delaunay_params(tau: f64) -> Result<DelaunayParameter> {
    if !(tau > 0.0 && tau <= 0.25) {
        return Err(CoreError::Domain(format!("tau = {tau} outside (0, 1/4]")));
    }
    let disc = (1.0 - 4.0 * tau).max(0.0).sqrt();
    Ok(DelaunayParameter {
        tau,
        phi_min: 0.5 * (1.0 - disc),
        phi_max: 0.5 * (1.0 + disc),
    })
}

/// First integral tau(phi, zeta); exact formula, no integration.
pub fn first_integral(phi: f64, zeta: f64) -> f64 {
    coefficients::first_integral(phi, zeta)
}

/// phi_psipsi of the unforced profile ODE at the given state.
pub fn profile_rhs(state: &ProfileState) -> f64 {
    coefficients::profile_rhs(state.phi, state.zeta)
}

fn unforced_rhs(_psi: f64, y: &[f64; 2]) -> [f64; 2] {
    [y[1], coefficients::profile_rhs(y[0], y[1])]
}

fn check_tau_open_range(tau: f64, include_quarter: bool) -> Result<()> {
    let hi_ok = if include_quarter {
        tau <= 0.25
    } else {
        tau < 0.25
    };
    if !(tau > TAU_FLOOR && hi_ok) {
        let hi = if include_quarter { "1/4]" } else { "1/4)" };
        return Err(CoreError::Domain(format!(
            "tau = {tau} outside ({TAU_FLOOR}, {hi}"
        )));
    }
    Ok(())
}

/// Locate minima of phi: zero crossings of zeta from - to +, refined by
/// bisection on the dense output to |zeta| < `EVENT_TOL`.
fn detect_minima(solution: &OdeSolution<2>) -> Vec<f64> {
    let mut events = Vec::new();
    for step in &solution.steps {
        let z0 = step.y0[1];
        let z1 = step.eval(1.0)[1];
        if z0 < 0.0 && z1 >= 0.0 {
            let psi = ode::bisect_root(|p| step.eval_at(p)[1], step.t0, step.t1(), EVENT_TOL);
            events.push(psi);
        }
    }
    events
}

fn build_trajectory(solution: OdeSolution<2>, span: (f64, f64), tol: f64) -> Trajectory {
    let mut samples = Vec::with_capacity(solution.steps.len() + 1);
    for step in &solution.steps {
        let st = ProfileState {
            psi: step.t0,
            phi: step.y0[0],
            zeta: step.y0[1],
        };
        samples.push((st, st.first_integral()));
    }
    let st = ProfileState {
        psi: solution.t_end,
        phi: solution.y_end[0],
        zeta: solution.y_end[1],
    };
    samples.push((st, st.first_integral()));
    let events = detect_minima(&solution);
    Trajectory {
        samples,
        events,
        span,
        tolerance: tol,
        solution,
    }
}

/// Adaptive integration of the unforced profile from (phi_min(tau), 0).
pub fn integrate_profile(tau: f64, span: (f64, f64), tol: f64) -> Result<Trajectory> {
    check_tau_open_range(tau, true)?;
    if !(span.1 > span.0) || !span.0.is_finite() || !span.1.is_finite() {
        return Err(CoreError::Domain(format!(
            "bad span [{}, {}]",
            span.0, span.1
        )));
    }
    let params = delaunay_params(tau)?;
    let opts = OdeOptions::with_tol(tol);
    let solution = ode::integrate(
        unforced_rhs,
        span.0,
        span.1,
        [params.phi_min, 0.0],
        &opts,
        None,
    )?;
    Ok(build_trajectory(solution, span, tol))
}

/// Period of phi(psi) with the near-cylinder guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Period {
    pub value: f64,
    /// True when the analytic limit pi was returned instead of a measurement.
    pub cylinder_limit: bool,
}

/// psi-distance between consecutive local minima of phi.
///
/// Errors at tau = 1/4 exactly (the cylinder has no intrinsic period); for
/// tau above `TAU_CYLINDER_GUARD` the constant-coefficient limit pi is
/// returned with `cylinder_limit` set.
pub fn period(tau: f64) -> Result<Period> {
    check_tau_open_range(tau, false)?;
    if tau > TAU_CYLINDER_GUARD {
        return Ok(Period {
            value: std::f64::consts::PI,
            cylinder_limit: true,
        });
    }
    // psi = 0 is itself a minimum, so the first detected event is one period
    // away; periods lie in (2, pi), so a span of 3.5 always contains it.
    let traj = integrate_profile(tau, (0.0, 3.5), 1e-13)?;
    if traj.events.is_empty() {
        return Err(CoreError::IntegrationFailure {
            psi: traj.span.1,
            detail: "expected a minimum in the span, found none".into(),
        });
    }
    Ok(Period {
        value: traj.events[0],
        cylinder_limit: false,
    })
}

/// Integrate the arc-length system (phi, phi_dot, psi) over `span` in s.
pub fn integrate_s_param(tau: f64, span: (f64, f64), tol: f64) -> Result<SParamTrajectory> {
    check_tau_open_range(tau, true)?;
    let params = delaunay_params(tau)?;
    let rhs = move |_s: f64, y: &[f64; 3]| {
        let q = y[0] * y[0] + tau;
        [y[1], y[0] - 2.0 * y[0] * q, q]
    };
    let opts = OdeOptions::with_tol(tol);
    let solution = ode::integrate(rhs, span.0, span.1, [params.phi_min, 0.0, 0.0], &opts, None)?;
    let mut states: Vec<SParamState> = solution
        .steps
        .iter()
        .map(|st| SParamState {
            s: st.t0,
            phi: st.y0[0],
            phi_dot: st.y0[1],
            psi: st.y0[2],
        })
        .collect();
    states.push(SParamState {
        s: solution.t_end,
        phi: solution.y_end[0],
        phi_dot: solution.y_end[1],
        psi: solution.y_end[2],
    });
    Ok(SParamTrajectory {
        tau,
        states,
        solution,
    })
}

/// Proper sizes eps_N = L_Gamma / (N psi_1(tau0)) for N = 1..=n_max.
pub fn proper_sizes(l_gamma: f64, tau0: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(l_gamma > 0.0) {
        return Err(CoreError::Domain(format!(
            "L_Gamma = {l_gamma} must be positive"
        )));
    }
    if n_max < 1 {
        return Err(CoreError::Domain("n_max must be at least 1".into()));
    }
    let p = period(tau0)?.value;
    Ok((1..=n_max).map(|n| l_gamma / (n as f64 * p)).collect())
}
