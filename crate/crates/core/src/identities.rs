//! Quadrature verification of the integral and pointwise profile identities:
//! mean curvature = 2, the "average 1" product lemma, the "average 0"
//! cancellation lemma, Wronskian neutrality over a period, and the
//! sigma-substitution relations of the arc-length parametrization.

use serde::Serialize;

use crate::coefficients::{self, f4};
use crate::delaunay::{self, Trajectory};
use crate::error::{CoreError, Result};
use crate::quadrature;

/// Default panel count for the composite GL-16 rule (16 nodes per panel).
pub const DEFAULT_PANELS: usize = 64;

/// Outcome of one identity check at one tau.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    #[serde(rename = "nodes")]
    pub n_quadrature_nodes: usize,
}

impl IdentityReport {
    fn new(name: &str, tau: f64, lhs: f64, rhs: f64, nodes: usize) -> Self {
        let abs_err = (lhs - rhs).abs();
        let rel_err = abs_err / rhs.abs().max(1.0);
        Self {
            name: name.to_string(),
            tau,
            lhs,
            rhs,
            abs_err,
            rel_err,
            n_quadrature_nodes: nodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("identity report serializes")
    }
}

/// Summary CSV, one row per report.
pub fn reports_to_csv(reports: &[IdentityReport]) -> String {
    let mut out = String::from("name,tau,lhs,rhs,abs_err,rel_err,nodes\n");
    for r in reports {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.name, r.tau, r.lhs, r.rhs, r.abs_err, r.rel_err, r.n_quadrature_nodes
        ));
    }
    out
}

/// Averaged coefficient data of the "average 1" lemma.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AverageOneData {
    /// Mean of phi^2 / psi_dot^3 over one period.
    pub i1: f64,
    /// The averaged second coefficient.
    pub i2: f64,
    /// I1^2 * I2; the lemma asserts this equals 1.
    pub product_check: f64,
}

fn one_period_trajectory(tau: f64) -> Result<(Trajectory, f64, f64)> {
    let traj = delaunay::integrate_profile(tau, (0.0, 7.0), 1e-12)?;
    if traj.events.len() < 2 {
        return Err(CoreError::IntegrationFailure {
            psi: traj.span.1,
            detail: "could not bracket one period".into(),
        });
    }
    let (a, b) = (traj.events[0], traj.events[1]);
    Ok((traj, a, b))
}

/// Mean curvature along a trajectory, with phi_psipsi taken from the ODE
/// right-hand side rather than finite differences.
pub fn mean_curvature_profile(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples
        .iter()
        .map(|(s, _)| {
            let u = 1.0 + s.zeta * s.zeta;
            let h = -delaunay::profile_rhs(s) * u.powf(-1.5) + u.powf(-0.5) / s.phi;
            (s.psi, h)
        })
        .collect()
}

/// The "average 1" lemma: the product of the two period integrals equals
/// the squared period, equivalently I1^2 I2 = 1.
pub fn average_one_check(tau: f64) -> Result<(AverageOneData, IdentityReport)> {
    average_one_check_with(tau, DEFAULT_PANELS)
}

pub fn average_one_check_with(tau: f64, panels: usize) -> Result<(AverageOneData, IdentityReport)> {
    let (traj, a, b) = one_period_trajectory(tau)?;
    let first = quadrature::integrate(
        |psi| {
            let st = traj.state_at(psi);
            coefficients::average_one_first_integrand(st.phi, st.zeta)
        },
        a,
        b,
        panels,
    );
    let second = quadrature::integrate(
        |psi| {
            let st = traj.state_at(psi);
            coefficients::average_one_second_integrand(st.phi, st.zeta)
        },
        a,
        b,
        panels,
    );
    let period = b - a;
    let i1 = second / period;
    let i2 = first / second;
    let data = AverageOneData {
        i1,
        i2,
        product_check: i1 * i1 * i2,
    };
    let report = IdentityReport::new(
        "average_one",
        tau,
        first * second,
        period * period,
        panels * quadrature::NODES_PER_PANEL,
    );
    Ok((data, report))
}

/// The "average 0" lemma: the period integral of phi phi_psi F4 vanishes.
///
/// The report's lhs is the integral normalized by the scale
/// `int |phi zeta F4| dpsi`, so `rel_err <= tol` is the meaningful check.
pub fn average_zero_check(tau: f64) -> Result<IdentityReport> {
    average_zero_check_shifted(tau, 0.0, DEFAULT_PANELS)
}

pub fn average_zero_check_shifted(tau: f64, shift: f64, panels: usize) -> Result<IdentityReport> {
    let span_end = 7.0 + shift.max(0.0) + 1.0;
    let traj = delaunay::integrate_profile(tau, (0.0, span_end), 1e-12)?;
    if traj.events.len() < 2 {
        return Err(CoreError::IntegrationFailure {
            psi: span_end,
            detail: "could not bracket one period".into(),
        });
    }
    let (a, b) = (traj.events[0], traj.events[1]);
    if a + shift < traj.span.0 {
        return Err(CoreError::Domain(format!(
            "window shift {shift} leaves the integrated span"
        )));
    }
    let integrand = |psi: f64| {
        let st = traj.state_at(psi);
        st.phi * st.zeta * f4(st.phi, st.zeta)
    };
    let raw = quadrature::integrate(integrand, a + shift, b + shift, panels);
    let scale = quadrature::integrate(|psi| integrand(psi).abs(), a + shift, b + shift, panels);
    Ok(IdentityReport::new(
        "average_zero",
        tau,
        raw / scale.max(f64::MIN_POSITIVE),
        0.0,
        panels * quadrature::NODES_PER_PANEL,
    ))
}

/// Arc length of one profile period: s advances by dpsi / psi_dot.
fn s_period_estimate(tau: f64) -> Result<f64> {
    let (traj, a, b) = one_period_trajectory(tau)?;
    Ok(quadrature::integrate(
        |psi| {
            let st = traj.state_at(psi);
            (1.0 + st.zeta * st.zeta).sqrt() / st.phi
        },
        a,
        b,
        DEFAULT_PANELS,
    ))
}

/// Arc-length form of the "average 0" lemma:
/// `int sigma_s^2 (phi phi_ddot + phi_dot^2 - 2 (phi^2+tau)(phi^2-tau)) ds = 0`.
pub fn average_zero_sigma_form(tau: f64) -> Result<IdentityReport> {
    let s_span = 2.4 * s_period_estimate(tau)?;
    let straj = delaunay::integrate_s_param(tau, (0.0, s_span), 1e-12)?;
    let (a, b) = s_period_window(&straj)?;
    let integrand = |s: f64| {
        let st = straj.state_at(s);
        let sigma_s = st.phi_dot / st.phi;
        let q = st.phi * st.phi + tau;
        let phi_ddot = st.phi - 2.0 * st.phi * q;
        sigma_s
            * sigma_s
            * (st.phi * phi_ddot + st.phi_dot * st.phi_dot - 2.0 * q * (st.phi * st.phi - tau))
    };
    let raw = quadrature::integrate(integrand, a, b, DEFAULT_PANELS);
    let scale = quadrature::integrate(|s| integrand(s).abs(), a, b, DEFAULT_PANELS);
    Ok(IdentityReport::new(
        "average_zero_sigma",
        tau,
        raw / scale.max(f64::MIN_POSITIVE),
        0.0,
        DEFAULT_PANELS * quadrature::NODES_PER_PANEL,
    ))
}

/// Wronskian neutrality: the log-Wronskian coefficient of the unforced
/// linearized operator integrates to zero over one period, so R(b1)/R(a1) = 1.
pub fn wronskian_drift(tau: f64) -> Result<IdentityReport> {
    let (traj, a, b) = one_period_trajectory(tau)?;
    let integral = quadrature::integrate(
        |psi| {
            let st = traj.state_at(psi);
            coefficients::wronskian_coefficient(st.phi, st.zeta)
        },
        a,
        b,
        DEFAULT_PANELS,
    );
    Ok(IdentityReport::new(
        "wronskian_drift",
        tau,
        (-integral).exp(),
        1.0,
        DEFAULT_PANELS * quadrature::NODES_PER_PANEL,
    ))
}

fn s_period_window(straj: &delaunay::SParamTrajectory) -> Result<(f64, f64)> {
    // minima of phi(s): phi_dot crosses - to +
    let mut events = Vec::new();
    for step in &straj.solution.steps {
        let d0 = step.y0[1];
        let d1 = step.eval(1.0)[1];
        if d0 < 0.0 && d1 >= 0.0 {
            events.push(crate::ode::bisect_root(
                |s| step.eval_at(s)[1],
                step.t0,
                step.t1(),
                1e-13,
            ));
        }
    }
    if events.len() < 2 {
        return Err(CoreError::IntegrationFailure {
            psi: straj.solution.t_end,
            detail: "could not bracket one arc-length period".into(),
        });
    }
    Ok((events[0], events[1]))
}

/// Residuals of the sigma-substitution relations along one arc-length period:
/// with phi = sqrt(tau) e^sigma, both `1 - sigma_s^2 = 4 tau cosh^2 sigma`
/// and `sigma_ss = -2 tau sinh 2 sigma` must hold, and sigma is odd about
/// its mid-period zero crossing.
pub fn sigma_identity_check(tau: f64) -> Result<IdentityReport> {
    let sqrt_tau = tau.sqrt();
    let n = DEFAULT_PANELS * quadrature::NODES_PER_PANEL;
    if tau == 0.25 {
        // cylinder: sigma = 0 identically, residuals vanish without a period
        return Ok(IdentityReport::new("sigma_substitution", tau, 0.0, 0.0, n));
    }
    let s_span = 2.4 * s_period_estimate(tau)?;
    let straj = delaunay::integrate_s_param(tau, (0.0, s_span), 1e-12)?;
    let (a, b) = s_period_window(&straj)?;
    let mut max_resid: f64 = 0.0;
    for k in 0..=n {
        let s = a + (b - a) * k as f64 / n as f64;
        let st = straj.state_at(s);
        let sigma = (st.phi / sqrt_tau).ln();
        let sigma_s = st.phi_dot / st.phi;
        let q = st.phi * st.phi + tau;
        let phi_ddot = st.phi - 2.0 * st.phi * q;
        let sigma_ss = phi_ddot / st.phi - sigma_s * sigma_s;
        let r1 = (1.0 - sigma_s * sigma_s) - 4.0 * tau * sigma.cosh().powi(2);
        let r2 = sigma_ss + 2.0 * tau * (2.0 * sigma).sinh();
        max_resid = max_resid.max(r1.abs()).max(r2.abs());
    }

    // reflection about the descending zero of sigma inside the period
    let mut s2 = None;
    let fine = 2048;
    let g = |s: f64| (straj.state_at(s).phi / sqrt_tau).ln();
    for k in 0..fine {
        let s_lo = a + (b - a) * k as f64 / fine as f64;
        let s_hi = a + (b - a) * (k + 1) as f64 / fine as f64;
        if g(s_lo) > 0.0 && g(s_hi) <= 0.0 {
            s2 = Some(crate::ode::bisect_root(g, s_lo, s_hi, 1e-14));
            break;
        }
    }
    let s2 = s2.ok_or_else(|| CoreError::IntegrationFailure {
        psi: b,
        detail: "no descending sigma zero found in one period".into(),
    })?;
    let reach = (s2 - a).min(b - s2);
    for k in 1..=64 {
        let t = reach * k as f64 / 64.0;
        max_resid = max_resid.max((g(s2 - t) + g(s2 + t)).abs());
    }

    Ok(IdentityReport::new(
        "sigma_substitution",
        tau,
        max_resid,
        0.0,
        n,
    ))
}

/// Mean curvature as an identity report: lhs is the sampled H value
/// farthest from 2 over ten periods.
pub fn mean_curvature_report(tau: f64) -> Result<IdentityReport> {
    let period_est = if tau == 0.25 {
        std::f64::consts::PI
    } else {
        delaunay::period(tau)?.value
    };
    let traj = delaunay::integrate_profile(tau, (0.0, 10.0 * period_est), 1e-12)?;
    let mut worst: f64 = 2.0;
    let mut n = 0;
    for (_, h) in mean_curvature_profile(&traj) {
        if (h - 2.0).abs() > (worst - 2.0).abs() {
            worst = h;
        }
        n += 1;
    }
    Ok(IdentityReport::new("mean_curvature", tau, worst, 2.0, n))
}

/// The five identity reports (mean curvature, average-1, average-0,
/// Wronskian neutrality, sigma substitution) over a tau grid.
pub fn verify_grid(taus: &[f64]) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for &tau in taus {
        out.push(mean_curvature_report(tau)?);
        let (_, avg1) = average_one_check(tau)?;
        out.push(avg1);
        out.push(average_zero_check(tau)?);
        out.push(wronskian_drift(tau)?);
        out.push(sigma_identity_check(tau)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU_GRID: [f64; 5] = [0.05, 0.10, 0.16, 0.20, 0.24];

    #[test]
    fn cylinder_mean_curvature_exact() {
        let traj = delaunay::integrate_profile(0.25, (0.0, 5.0), 1e-10).unwrap();
        for (_, h) in mean_curvature_profile(&traj) {
            assert!((h - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_curvature_identity_on_grid() {
        for tau in TAU_GRID {
            let traj = delaunay::integrate_profile(tau, (0.0, 10.0), 1e-12).unwrap();
            for (psi, h) in mean_curvature_profile(&traj) {
                assert!(
                    (h - 2.0).abs() <= 1e-9,
                    "H = {h} at psi = {psi}, tau = {tau}"
                );
            }
        }
    }

    #[test]
    fn average_one_product_and_i1i2() {
        for tau in TAU_GRID {
            let (data, report) = average_one_check(tau).unwrap();
            assert!(
                report.rel_err <= 1e-6,
                "tau = {tau}: rel_err = {:.3e}",
                report.rel_err
            );
            assert!(
                (data.product_check - 1.0).abs() <= 1e-6,
                "tau = {tau}: I1^2 I2 = {}",
                data.product_check
            );
        }
    }

    #[test]
    fn average_one_cylinder_limit_values() {
        // integrands at the cylinder are exactly 1/2 and 2, so I1 -> 2, I2 -> 1/4
        let (near, _) = average_one_check(0.2495).unwrap();
        let (far, _) = average_one_check(0.24).unwrap();
        assert!((near.i1 - 2.0).abs() < (far.i1 - 2.0).abs());
        assert!((near.i1 - 2.0).abs() < 0.05);
        assert!((near.i2 - 0.25).abs() < 0.05);
    }

    #[test]
    fn average_zero_on_grid_and_window_shift() {
        for tau in TAU_GRID {
            let report = average_zero_check(tau).unwrap();
            assert!(
                report.rel_err <= 1e-6,
                "tau = {tau}: {:.3e}",
                report.rel_err
            );
        }
        let base = average_zero_check_shifted(0.16, 0.0, DEFAULT_PANELS).unwrap();
        for shift in [0.3, 0.9, 1.7] {
            let shifted = average_zero_check_shifted(0.16, shift, DEFAULT_PANELS).unwrap();
            assert!((shifted.lhs - base.lhs).abs() <= 1e-6);
        }
    }

    #[test]
    fn average_zero_sigma_form_on_grid() {
        for tau in TAU_GRID {
            let report = average_zero_sigma_form(tau).unwrap();
            assert!(
                report.rel_err <= 1e-6,
                "tau = {tau}: {:.3e}",
                report.rel_err
            );
        }
    }

    #[test]
    fn wronskian_neutral_over_period() {
        for tau in TAU_GRID {
            let report = wronskian_drift(tau).unwrap();
            assert!(
                (report.lhs - 1.0).abs() <= 1e-8,
                "tau = {tau}: R drift {}",
                report.lhs
            );
        }
    }

    #[test]
    fn sigma_relations_and_reflection() {
        assert!(sigma_identity_check(0.25).unwrap().lhs < 1e-10);
        for tau in TAU_GRID {
            let report = sigma_identity_check(tau).unwrap();
            assert!(
                report.lhs <= 1e-7,
                "tau = {tau}: max residual {:.3e}",
                report.lhs
            );
        }
    }

    #[test]
    fn quadrature_convergence_until_integrator_floor() {
        let tau = 0.16;
        let mut errs = Vec::new();
        for panels in [1usize, 2, 4, 8] {
            let (_, r) = average_one_check_with(tau, panels).unwrap();
            errs.push(r.abs_err);
        }
        let floor = 1e-11 * errs[0].max(1.0);
        for w in errs.windows(2) {
            assert!(
                w[1] <= w[0] / 4.0 || w[1] <= floor,
                "convergence stalled: {errs:?}"
            );
        }
    }

    #[test]
    fn csv_and_json_shapes() {
        let reports = verify_grid(&[0.16]).unwrap();
        assert_eq!(reports.len(), 5);
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "mean_curvature",
                "average_one",
                "average_zero",
                "wronskian_drift",
                "sigma_substitution"
            ]
        );
        let csv = reports_to_csv(&reports);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("name,tau,lhs,rhs,abs_err,rel_err,nodes\n"));
        let json = reports[1].to_json();
        assert!(json.contains("\"name\":\"average_one\""));
        assert!(json.contains("\"nodes\":"));
    }
}
