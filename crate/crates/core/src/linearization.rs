//! Fundamental solutions and period (monodromy) matrices of the linearized
//! profile operator, transfer-matrix products over many periods, sensitivity
//! solutions for the forcing parameters, and the boundary Jacobian
//! d(Delta tau, zeta_end) / d(omega, phi(0)).
//!
//! The linearized operator along a base solution is
//! `beta'' + p beta' + q beta = 0` with
//! `p = 6 (1+zeta^2)^{1/2} zeta - 2 zeta/phi + Fbar1` and
//! `q = (1+zeta^2)/phi^2 + Fbar2`; the forced corrections come from the
//! analytic partials of rho in (phi, zeta).

use serde::Serialize;

use crate::coefficients::{self, rho_eval};
use crate::delaunay::{self, ProfileState};
use crate::error::{CoreError, Result};
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::profiles::Profile;
use crate::shooting::ForcingSpec;

/// Structure tolerance for the unforced one-period matrix.
pub const STRUCTURE_TOL: f64 = 1e-6;

/// Coefficients (p, q) of the linearized operator at a state; `forcing`
/// adds the corrections from differentiating rho.
pub fn linearized_coefficients(
    state: &ProfileState,
    forcing: Option<(&ForcingSpec, f64)>,
) -> (f64, f64) {
    let (phi, zeta) = (state.phi, state.zeta);
    let u = 1.0 + zeta * zeta;
    let mut p = coefficients::wronskian_coefficient(phi, zeta);
    let mut q = u / (phi * phi);
    if let Some((spec, delta)) = forcing {
        let point = spec.forcing_point(state.psi, delta, spec.omega);
        let re = rho_eval(phi, zeta, &point);
        p += 3.0 * re.rho * zeta * u.sqrt() + re.d_zeta * u.powf(1.5);
        q += re.d_phi * u.powf(1.5);
    }
    (p, q)
}

fn pq_unforced(phi: f64, zeta: f64) -> (f64, f64) {
    (
        coefficients::wronskian_coefficient(phi, zeta),
        (1.0 + zeta * zeta) / (phi * phi),
    )
}

fn pq_forced(
    spec: &ForcingSpec,
    delta: f64,
    omega: f64,
    psi: f64,
    phi: f64,
    zeta: f64,
) -> (f64, f64, f64) {
    let u = 1.0 + zeta * zeta;
    let point = spec.forcing_point(psi, delta, omega);
    let re = rho_eval(phi, zeta, &point);
    let p = coefficients::wronskian_coefficient(phi, zeta)
        + 3.0 * re.rho * zeta * u.sqrt()
        + re.d_zeta * u.powf(1.5);
    let q = u / (phi * phi) + re.d_phi * u.powf(1.5);
    (p, q, re.rho)
}

/// Base flow plus the variational pair (beta_omega, beta_1); order
/// (phi, zeta, b_om, b_om', b_1, b_1'). Used for boundary Jacobians.
pub(crate) fn augmented_jacobian_rhs<'a>(
    spec: &'a ForcingSpec,
    delta: f64,
    omega: f64,
) -> impl Fn(f64, &[f64; 6]) -> [f64; 6] + 'a {
    move |psi: f64, y: &[f64; 6]| {
        let (phi, zeta) = (y[0], y[1]);
        let u = 1.0 + zeta * zeta;
        let (p, q, rho) = pq_forced(spec, delta, omega, psi, phi, zeta);
        let zeta_prime = u / phi - (2.0 + rho) * u.powf(1.5);
        let omega_source = -spec.epsilon.powi(3) * (zeta / phi) * u.powf(1.5);
        [
            zeta,
            zeta_prime,
            y[3],
            -p * y[3] - q * y[2] + omega_source,
            y[5],
            -p * y[5] - q * y[4],
        ]
    }
}

/// Fundamental pair of the linearized operator over a window, integrated
/// alongside the base flow with the identity initial matrix.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub window: (f64, f64),
    /// Samples of (psi, beta1, beta1', beta2, beta2').
    pub samples: Vec<(f64, f64, f64, f64, f64)>,
    /// Wronskian at each sample.
    pub wronskian: Vec<f64>,
    pub solution: OdeSolution<6>,
}

impl FundamentalPair {
    pub fn end_matrix(&self) -> [[f64; 2]; 2] {
        let y = self.solution.y_end;
        [[y[2], y[4]], [y[3], y[5]]]
    }

    pub fn eval(&self, psi: f64) -> (f64, f64, f64, f64) {
        let y = self.solution.eval(psi);
        (y[2], y[3], y[4], y[5])
    }

    fn from_solution(window: (f64, f64), solution: OdeSolution<6>) -> Self {
        let mut samples = Vec::with_capacity(solution.steps.len() + 1);
        let mut wronskian = Vec::with_capacity(solution.steps.len() + 1);
        let mut push = |psi: f64, y: &[f64; 6]| {
            samples.push((psi, y[2], y[3], y[4], y[5]));
            wronskian.push(y[2] * y[5] - y[3] * y[4]);
        };
        for step in &solution.steps {
            push(step.t0, &step.y0);
        }
        push(solution.t_end, &solution.y_end);
        Self {
            window,
            samples,
            wronskian,
            solution,
        }
    }
}

fn base_state_unforced(tau: f64, psi: f64) -> Result<[f64; 2]> {
    if psi == 0.0 {
        let p = delaunay::delaunay_params(tau)?;
        return Ok([p.phi_min, 0.0]);
    }
    let traj = delaunay::integrate_profile(tau, (0.0, psi), 1e-13)?;
    let st = traj.state_at(psi);
    Ok([st.phi, st.zeta])
}

/// Fundamental pair of the unforced operator on `window`.
pub fn fundamental_pair(tau: f64, window: (f64, f64)) -> Result<FundamentalPair> {
    let y_base = base_state_unforced(tau, window.0)?;
    let rhs = |_psi: f64, y: &[f64; 6]| {
        let (phi, zeta) = (y[0], y[1]);
        let (p, q) = pq_unforced(phi, zeta);
        [
            zeta,
            coefficients::profile_rhs(phi, zeta),
            y[3],
            -p * y[3] - q * y[2],
            y[5],
            -p * y[5] - q * y[4],
        ]
    };
    let y0 = [y_base[0], y_base[1], 1.0, 0.0, 0.0, 1.0];
    let opts = OdeOptions::with_tol(1e-12);
    let solution = ode::integrate(rhs, window.0, window.1, y0, &opts, None)?;
    Ok(FundamentalPair::from_solution(window, solution))
}

/// Fundamental pair of the forced operator on `window`, starting the base
/// flow from (spec.phi0, 0) at psi = 0.
pub fn fundamental_pair_forced(
    spec: &ForcingSpec,
    delta: f64,
    window: (f64, f64),
) -> Result<FundamentalPair> {
    let base = if window.0 == 0.0 {
        [spec.phi0, 0.0]
    } else {
        let traj =
            crate::shooting::integrate_forced_lenient(spec, delta, spec.omega, spec.phi0, 1e-13)?;
        if let Some(psi) = traj.exit_psi {
            if psi < window.0 {
                return Err(CoreError::AnnulusExit { psi });
            }
        }
        let st = traj.base.state_at(window.0);
        [st.phi, st.zeta]
    };
    let omega = spec.omega;
    let rhs = move |psi: f64, y: &[f64; 6]| {
        let (phi, zeta) = (y[0], y[1]);
        let u = 1.0 + zeta * zeta;
        let (p, q, rho) = pq_forced(spec, delta, omega, psi, phi, zeta);
        [
            zeta,
            u / phi - (2.0 + rho) * u.powf(1.5),
            y[3],
            -p * y[3] - q * y[2],
            y[5],
            -p * y[5] - q * y[4],
        ]
    };
    let y0 = [base[0], base[1], 1.0, 0.0, 0.0, 1.0];
    let opts = OdeOptions::with_tol(1e-12);
    let solution = ode::integrate(rhs, window.0, window.1, y0, &opts, None)?;
    Ok(FundamentalPair::from_solution(window, solution))
}

/// 2x2 transition matrix over one period with its structure diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodMatrix {
    pub entries: [[f64; 2]; 2],
    /// The lower-left entry when the unipotent structure check passes.
    pub kappa: f64,
    /// max(|m11 - 1|, |m22 - 1|, |m12|).
    pub structure_defect: f64,
}

impl PeriodMatrix {
    pub fn from_entries(entries: [[f64; 2]; 2]) -> Self {
        let structure_defect = (entries[0][0] - 1.0)
            .abs()
            .max((entries[1][1] - 1.0).abs())
            .max(entries[0][1].abs());
        Self {
            entries,
            kappa: entries[1][0],
            structure_defect,
        }
    }

    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    pub fn matmul(&self, rhs: &PeriodMatrix) -> PeriodMatrix {
        let a = &self.entries;
        let b = &rhs.entries;
        PeriodMatrix::from_entries([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Unforced one-period transition matrix; errors when the unipotent
/// structure defect exceeds `STRUCTURE_TOL` (period misdetection).
pub fn monodromy(tau: f64) -> Result<PeriodMatrix> {
    let period = delaunay::period(tau)?;
    if period.cylinder_limit {
        return Err(CoreError::Degenerate(
            "monodromy at the cylinder limit is the identity; use tau <= 0.2499".into(),
        ));
    }
    let pair = fundamental_pair(tau, (0.0, period.value))?;
    let m = PeriodMatrix::from_entries(pair.end_matrix());
    if m.structure_defect > STRUCTURE_TOL {
        return Err(CoreError::Structure {
            defect: m.structure_defect,
            limit: STRUCTURE_TOL,
        });
    }
    Ok(m)
}

/// kappa(tau) over a grid: rows (tau, kappa, structure_defect).
pub fn kappa_grid(taus: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    taus.iter()
        .map(|&tau| monodromy(tau).map(|m| (tau, m.kappa, m.structure_defect)))
        .collect()
}

pub fn kappa_grid_to_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("tau,kappa,structure_defect\n");
    for (tau, kappa, defect) in rows {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", tau, kappa, defect));
    }
    out
}

/// The periodic fundamental branch and its normalizations.
#[derive(Debug, Clone)]
pub struct PeriodicSolutionData {
    /// Samples (psi, v, v') over one period; v(0) = 1, v'(0) = 0.
    pub samples: Vec<(f64, f64, f64)>,
    pub h1: f64,
    pub h2: f64,
    pub period: f64,
    /// |v(period) - v(0)| and |v'(period) - v'(0)|.
    pub periodicity_defect: (f64, f64),
    /// sup over the second period of |beta1 - (h1 psi phi_psi + v)|.
    pub decomposition_residual: f64,
}

/// Extract the periodic branch v and the normalizations h1, h2 of the two
/// fundamental solutions W1 = h1 psi phi_psi + v, W2 = h2 phi_psi.
pub fn periodic_solution(tau: f64) -> Result<PeriodicSolutionData> {
    let params = delaunay::delaunay_params(tau)?;
    let curvature0 = coefficients::profile_rhs(params.phi_min, 0.0);
    if curvature0.abs() < 1e-10 {
        return Err(CoreError::Degenerate(
            "phi_psipsi(0) vanishes at the cylinder; no oscillation to normalize".into(),
        ));
    }
    let h2 = 1.0 / curvature0;
    let period = delaunay::period(tau)?.value;
    let pair = fundamental_pair(tau, (0.0, 2.0 * period))?;
    let base = |psi: f64| {
        let y = pair.solution.eval(psi);
        (y[0], y[1])
    };

    // h1 from beta1(psi + P) - beta1(psi) = h1 P phi_psi(psi), least squares
    let grid: usize = 512;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=grid {
        let psi = period * k as f64 / grid as f64;
        let (b1a, _, _, _) = pair.eval(psi);
        let (b1b, _, _, _) = pair.eval(psi + period);
        let (_, zeta) = base(psi);
        let x = period * zeta;
        num += (b1b - b1a) * x;
        den += x * x;
    }
    let h1 = num / den;

    let mut samples = Vec::with_capacity(grid + 1);
    for k in 0..=grid {
        let psi = period * k as f64 / grid as f64;
        let (b1, b1p, _, _) = pair.eval(psi);
        let (phi, zeta) = base(psi);
        let v = b1 - h1 * psi * zeta;
        let vp = b1p - h1 * (zeta + psi * coefficients::profile_rhs(phi, zeta));
        samples.push((psi, v, vp));
    }
    let periodicity_defect = (
        (samples[grid].1 - samples[0].1).abs(),
        (samples[grid].2 - samples[0].2).abs(),
    );

    let mut decomposition_residual: f64 = 0.0;
    for k in 0..=grid {
        let psi = period + period * k as f64 / grid as f64;
        let (b1, _, _, _) = pair.eval(psi);
        let (_, zeta) = base(psi);
        let v = samples[k].1; // periodic extension
        decomposition_residual = decomposition_residual.max((b1 - (h1 * psi * zeta + v)).abs());
    }

    Ok(PeriodicSolutionData {
        samples,
        h1,
        h2,
        period,
        periodicity_defect,
        decomposition_residual,
    })
}

/// Cumulative transfer-matrix products A^i over the first `n` periods of a
/// forced trajectory (per-period fundamental matrices multiplied left to
/// right). Period boundaries are psi = 0 and the detected minima.
pub fn transfer_products(spec: &ForcingSpec, delta: f64, n: usize) -> Result<Vec<PeriodMatrix>> {
    let traj =
        crate::shooting::integrate_forced_lenient(spec, delta, spec.omega, spec.phi0, 1e-13)?;
    if let Some(psi) = traj.exit_psi {
        return Err(CoreError::AnnulusExit { psi });
    }
    let mut boundaries = vec![0.0];
    boundaries.extend(traj.base.events.iter().copied());
    if boundaries.len() < n + 1 {
        return Err(CoreError::Domain(format!(
            "trajectory holds {} full periods, {n} requested",
            boundaries.len() - 1
        )));
    }
    let mut cumulative: Option<PeriodMatrix> = None;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let window = (boundaries[i], boundaries[i + 1]);
        let pair = fundamental_pair_forced(spec, delta, window)?;
        let m = PeriodMatrix::from_entries(pair.end_matrix());
        let acc = match cumulative {
            None => m,
            Some(prev) => m.matmul(&prev),
        };
        out.push(acc);
        cumulative = Some(acc);
    }
    Ok(out)
}

/// Which forcing datum is perturbed in a sensitivity solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityKind {
    Mu,
    Xi,
    Omega,
}

/// Solution of the inhomogeneous variational ODE with zero initial data.
#[derive(Debug, Clone)]
pub struct SensitivitySolution {
    pub which: SensitivityKind,
    /// Samples (psi, beta, beta').
    pub samples: Vec<(f64, f64, f64)>,
    pub sup_norm: f64,
    /// epsilon * sup |beta'|, the scaled-derivative norm.
    pub sup_deriv_norm: f64,
    pub solution: OdeSolution<4>,
}

/// Integrate the sensitivity ODE for `which` along the forced base flow.
///
/// `perturbation` is the direction Delta mu (over psi) or Delta xi (over
/// x0); it is ignored for the omega sensitivity.
pub fn sensitivity(
    spec: &ForcingSpec,
    delta: f64,
    which: SensitivityKind,
    perturbation: Option<&Profile>,
) -> Result<SensitivitySolution> {
    if which != SensitivityKind::Omega && perturbation.is_none() {
        return Err(CoreError::Domain(
            "mu/xi sensitivities need a perturbation profile".into(),
        ));
    }
    let omega = spec.omega;
    let eps = spec.epsilon;
    let rhs = |psi: f64, y: &[f64; 4]| {
        let (phi, zeta) = (y[0], y[1]);
        let u = 1.0 + zeta * zeta;
        let (p, q, rho) = pq_forced(spec, delta, omega, psi, phi, zeta);
        let source = match which {
            SensitivityKind::Mu => -eps.powi(3) * u.powf(1.5) * perturbation.unwrap().eval(psi),
            SensitivityKind::Xi => {
                let x0 = eps * (psi + delta);
                -eps * coefficients::f4(phi, zeta) * u.powf(1.5) * perturbation.unwrap().eval(x0)
            }
            SensitivityKind::Omega => -eps.powi(3) * (zeta / phi) * u.powf(1.5),
        };
        [
            zeta,
            u / phi - (2.0 + rho) * u.powf(1.5),
            y[3],
            -p * y[3] - q * y[2] + source,
        ]
    };
    let opts = OdeOptions::with_tol(1e-12);
    let solution = ode::integrate(
        rhs,
        0.0,
        spec.t_end(),
        [spec.phi0, 0.0, 0.0, 0.0],
        &opts,
        None,
    )?;
    let mut samples = Vec::with_capacity(solution.steps.len() + 1);
    let mut sup_norm: f64 = 0.0;
    let mut sup_deriv: f64 = 0.0;
    for step in solution
        .steps
        .iter()
        .map(|s| (s.t0, s.y0))
        .chain([(solution.t_end, solution.y_end)])
    {
        let (psi, y) = step;
        samples.push((psi, y[2], y[3]));
        sup_norm = sup_norm.max(y[2].abs());
        sup_deriv = sup_deriv.max(y[3].abs());
    }
    Ok(SensitivitySolution {
        which,
        samples,
        sup_norm,
        sup_deriv_norm: eps * sup_deriv,
        solution,
    })
}

/// The boundary Jacobian d(Delta tau, zeta_end)/d(omega, phi(0)), computed
/// variationally with a finite-difference cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryJacobian {
    pub matrix: [[f64; 2]; 2],
    pub fd_matrix: [[f64; 2]; 2],
    /// max relative disagreement between the two routes.
    pub fd_agreement: f64,
    /// Set when the disagreement exceeds 1e-3.
    pub diagnostics_flag: bool,
}

const FD_OMEGA_STEP: f64 = 1e-5;
const FD_PHI0_STEP: f64 = 1e-7;

/// Compute the boundary Jacobian at (spec.omega, spec.phi0).
pub fn boundary_jacobian(spec: &ForcingSpec, delta: f64) -> Result<BoundaryJacobian> {
    let tol = 1e-13;
    let run = |omega: f64, phi0: f64| -> Result<(f64, f64)> {
        let opts = OdeOptions::with_tol(tol);
        let sol = ode::integrate(
            augmented_jacobian_rhs(spec, delta, omega),
            0.0,
            spec.t_end(),
            [phi0, 0.0, 0.0, 0.0, 1.0, 0.0],
            &opts,
            Some(&mut |_psi, y: &[f64; 6]| spec.in_annulus(y[0], y[1])),
        )?;
        if let Some(psi) = sol.stopped_at {
            return Err(CoreError::AnnulusExit { psi });
        }
        let y = sol.y_end;
        Ok((
            coefficients::first_integral(y[0], y[1]) - coefficients::first_integral(phi0, 0.0),
            y[1],
        ))
    };

    // variational entries from one augmented run
    let opts = OdeOptions::with_tol(tol);
    let sol = ode::integrate(
        augmented_jacobian_rhs(spec, delta, spec.omega),
        0.0,
        spec.t_end(),
        [spec.phi0, 0.0, 0.0, 0.0, 1.0, 0.0],
        &opts,
        Some(&mut |_psi, y: &[f64; 6]| spec.in_annulus(y[0], y[1])),
    )?;
    if let Some(psi) = sol.stopped_at {
        return Err(CoreError::AnnulusExit { psi });
    }
    let y = sol.y_end;
    let (tau_phi, tau_zeta) = coefficients::first_integral_gradient(y[0], y[1]);
    let tau_phi0 = coefficients::first_integral_gradient(spec.phi0, 0.0).0;
    let matrix = [
        [
            tau_phi * y[2] + tau_zeta * y[3],
            tau_phi * y[4] + tau_zeta * y[5] - tau_phi0,
        ],
        [y[3], y[5]],
    ];

    // central finite differences as the independent route
    let (tp, zp) = run(spec.omega + FD_OMEGA_STEP, spec.phi0)?;
    let (tm, zm) = run(spec.omega - FD_OMEGA_STEP, spec.phi0)?;
    let (tp2, zp2) = run(spec.omega, spec.phi0 + FD_PHI0_STEP)?;
    let (tm2, zm2) = run(spec.omega, spec.phi0 - FD_PHI0_STEP)?;
    let fd_matrix = [
        [
            (tp - tm) / (2.0 * FD_OMEGA_STEP),
            (tp2 - tm2) / (2.0 * FD_PHI0_STEP),
        ],
        [
            (zp - zm) / (2.0 * FD_OMEGA_STEP),
            (zp2 - zm2) / (2.0 * FD_PHI0_STEP),
        ],
    ];

    // the FD route carries residual noise ~1e-11 amplified by 1/h, so
    // entries below that floor are compared against the floor itself
    const RESIDUAL_NOISE: f64 = 1e-11;
    let noise_floor = [
        RESIDUAL_NOISE / FD_OMEGA_STEP,
        RESIDUAL_NOISE / FD_PHI0_STEP,
    ];
    let mut fd_agreement: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let scale = matrix[r][c]
                .abs()
                .max(fd_matrix[r][c].abs())
                .max(noise_floor[c]);
            fd_agreement = fd_agreement.max((matrix[r][c] - fd_matrix[r][c]).abs() / scale);
        }
    }
    Ok(BoundaryJacobian {
        matrix,
        fd_matrix,
        fd_agreement,
        diagnostics_flag: fd_agreement > 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_spec(tau0: f64, n: u32, l_gamma: f64) -> ForcingSpec {
        let psi1 = delaunay::period(tau0).unwrap().value;
        ForcingSpec::with_periods(
            l_gamma,
            tau0,
            n,
            Profile::zero(l_gamma),
            Profile::zero(l_gamma),
            Profile::zero(l_gamma),
            Profile::zero(n as f64 * psi1),
        )
        .unwrap()
    }

    #[test]
    fn linearized_coefficients_cylinder() {
        let st = ProfileState {
            psi: 0.0,
            phi: 0.5,
            zeta: 0.0,
        };
        let (p, q) = linearized_coefficients(&st, None);
        assert_eq!(p, 0.0);
        assert!((q - 4.0).abs() < 1e-15);
        // zeta = 0 kills p for any phi
        for i in 1..10 {
            let st = ProfileState {
                psi: 0.0,
                phi: 0.1 * i as f64,
                zeta: 0.0,
            };
            assert_eq!(linearized_coefficients(&st, None).0, 0.0);
        }
    }

    #[test]
    fn fundamental_pair_wronskian_unit_over_period() {
        for tau in [0.1, 0.16, 0.24] {
            let period = delaunay::period(tau).unwrap().value;
            let pair = fundamental_pair(tau, (0.0, period)).unwrap();
            assert!((pair.wronskian[0] - 1.0).abs() < 1e-14);
            for w in &pair.wronskian {
                assert!(*w > 0.0);
            }
            let m = pair.end_matrix();
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!((det - 1.0).abs() <= 1e-8, "det = {det}");
        }
    }

    #[test]
    fn wronskian_matches_exponential_formula() {
        let tau = 0.16;
        let period = delaunay::period(tau).unwrap().value;
        let pair = fundamental_pair(tau, (0.0, period)).unwrap();
        let traj = delaunay::integrate_profile(tau, (0.0, period), 1e-12).unwrap();
        for k in [50usize, 120, 200] {
            let frac = k as f64 / 256.0;
            let psi = period * frac;
            let integral = crate::quadrature::integrate(
                |x| {
                    let st = traj.state_at(x);
                    coefficients::wronskian_coefficient(st.phi, st.zeta)
                },
                0.0,
                psi,
                48,
            );
            let y = pair.solution.eval(psi);
            let r = y[2] * y[5] - y[3] * y[4];
            assert!((r - (-integral).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn monodromy_structure_and_kappa() {
        // frozen cross-implementation anchor: kappa(0.16) = -6.653408...
        let m = monodromy(0.16).unwrap();
        assert!(m.structure_defect <= 1e-6);
        assert!((m.kappa - (-6.6534082)).abs() < 1e-4, "kappa = {}", m.kappa);
        assert!((m.det() - 1.0).abs() < 1e-8);

        // kappa -> 0 toward the cylinder
        let taus = [0.05, 0.16, 0.2, 0.24, 0.249];
        let grid = kappa_grid(&taus).unwrap();
        for w in grid.windows(2) {
            assert!(
                w[1].1.abs() < w[0].1.abs(),
                "kappa magnitude not decreasing: {grid:?}"
            );
        }
        assert!(grid.last().unwrap().1.abs() < 0.05);
    }

    #[test]
    fn monodromy_kappa_against_finite_difference() {
        for tau in [0.1, 0.16, 0.24] {
            let m = monodromy(tau).unwrap();
            let period = delaunay::period(tau).unwrap().value;
            let p = delaunay::delaunay_params(tau).unwrap();
            let h = 1e-6;
            let run = |phi0: f64| {
                let opts = OdeOptions::with_tol(1e-13);
                let sol = ode::integrate(
                    |_psi, y: &[f64; 2]| [y[1], coefficients::profile_rhs(y[0], y[1])],
                    0.0,
                    period,
                    [phi0, 0.0],
                    &opts,
                    None,
                )
                .unwrap();
                sol.y_end[1]
            };
            let fd = (run(p.phi_min + h) - run(p.phi_min - h)) / (2.0 * h);
            assert!(
                (m.kappa - fd).abs() <= 1e-4 * fd.abs(),
                "tau = {tau}: kappa {} vs fd {}",
                m.kappa,
                fd
            );
        }
    }

    #[test]
    fn periodic_solution_normalizations() {
        let tau = 0.16;
        let data = periodic_solution(tau).unwrap();
        let params = delaunay::delaunay_params(tau).unwrap();
        assert!((data.h2 * coefficients::profile_rhs(params.phi_min, 0.0) - 1.0).abs() < 1e-14);
        assert_eq!(data.samples[0].1, 1.0);
        assert_eq!(data.samples[0].2, 0.0);
        assert!(
            data.periodicity_defect.0 <= 1e-7,
            "v defect {:?}",
            data.periodicity_defect
        );
        assert!(data.periodicity_defect.1 <= 1e-7);
        assert!(
            data.decomposition_residual <= 1e-6,
            "{}",
            data.decomposition_residual
        );
        // kappa = h1 * period / h2 ties the decomposition to the monodromy
        let m = monodromy(tau).unwrap();
        let predicted = data.h1 * data.period / data.h2;
        assert!((predicted - m.kappa).abs() <= 1e-5 * m.kappa.abs());
        assert!(periodic_solution(0.25).is_err());
    }

    #[test]
    fn translation_symmetry_direction_solves_linearization() {
        // L(h2 phi_psi) = 0 along one period
        let tau = 0.16;
        let period = delaunay::period(tau).unwrap().value;
        let traj = delaunay::integrate_profile(tau, (0.0, period), 1e-13).unwrap();
        let h2 =
            1.0 / coefficients::profile_rhs(delaunay::delaunay_params(tau).unwrap().phi_min, 0.0);
        let mut worst: f64 = 0.0;
        for k in 0..=300 {
            let psi = period * k as f64 / 300.0;
            let st = traj.state_at(psi);
            let (p, q) = linearized_coefficients(&st, None);
            let u = 1.0 + st.zeta * st.zeta;
            let rhs = coefficients::profile_rhs(st.phi, st.zeta);
            // d(rhs)/dpsi along the flow
            let rhs_phi = -u / (st.phi * st.phi);
            let rhs_zeta = 2.0 * st.zeta / st.phi - 6.0 * st.zeta * u.sqrt();
            let w2 = h2 * st.zeta;
            let w2p = h2 * rhs;
            let w2pp = h2 * (rhs_phi * st.zeta + rhs_zeta * rhs);
            worst = worst.max((w2pp + p * w2p + q * w2).abs());
        }
        assert!(worst <= 1e-8, "translation residual {worst:.3e}");
    }

    #[test]
    fn unforced_transfer_products_are_kappa_ladder() {
        let tau = 0.16;
        let n = 6;
        let spec = zero_spec(tau, n as u32, 2.0);
        let products = transfer_products(&spec, 0.0, n).unwrap();
        let kappa = monodromy(tau).unwrap().kappa;
        for (i, m) in products.iter().enumerate() {
            let steps = (i + 1) as f64;
            let tol = 1e-5 * steps;
            assert!((m.entries[0][0] - 1.0).abs() <= tol);
            assert!((m.entries[1][1] - 1.0).abs() <= tol);
            assert!(m.entries[0][1].abs() <= tol);
            assert!(
                (m.entries[1][0] - steps * kappa).abs() <= tol * kappa.abs().max(1.0),
                "A^{} lower-left {} vs {}",
                i + 1,
                m.entries[1][0],
                steps * kappa
            );
        }
    }

    #[test]
    fn sensitivity_zero_direction_is_zero() {
        let spec = zero_spec(0.16, 3, 2.0);
        let psi1 = delaunay::period(0.16).unwrap().value;
        let zero_dir = Profile::zero(3.0 * psi1);
        let s = sensitivity(&spec, 0.0, SensitivityKind::Mu, Some(&zero_dir)).unwrap();
        assert_eq!(s.sup_norm, 0.0);
        assert_eq!(s.sup_deriv_norm, 0.0);
        assert!(sensitivity(&spec, 0.0, SensitivityKind::Mu, None).is_err());
    }

    #[test]
    fn boundary_jacobian_routes_agree() {
        let spec = zero_spec(0.16, 4, 2.0);
        let j = boundary_jacobian(&spec, 0.0).unwrap();
        assert!(
            !j.diagnostics_flag,
            "routes disagree: {:.3e}",
            j.fd_agreement
        );
        assert!(j.matrix[0][0] > 0.0, "d tau / d omega must be positive");
        // measured sign of the kappa ladder: zeta_end sensitivity is negative
        assert!(j.matrix[1][1] < 0.0);
    }
}
