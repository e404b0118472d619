//! Phase alignment of a (possibly forced) trajectory against a reference
//! orbit: each sample is projected to the nearest point of the reference
//! orbit in the (phi, zeta) plane, and the arc position of that point,
//! unwrapped by continuity, defines the map Phi with Phi(0) = 0.

use crate::coefficients;
use crate::delaunay::{self, Trajectory};
use crate::error::{CoreError, Result};
use crate::ode::OdeSolution;

/// Maximum admissible distance from a sample to the reference orbit.
const PROJECTION_LIMIT: f64 = 0.2;

/// The reference orbit at a fixed tau, parametrized by its own psi.
pub struct ReferenceOrbit {
    pub tau: f64,
    pub period: f64,
    solution: OdeSolution<2>,
}

impl ReferenceOrbit {
    pub fn new(tau: f64) -> Result<Self> {
        let period = delaunay::period(tau)?;
        if period.cylinder_limit {
            return Err(CoreError::Degenerate(
                "phase alignment against the cylinder orbit is ill-posed".into(),
            ));
        }
        let traj = delaunay::integrate_profile(tau, (0.0, 1.05 * period.value), 1e-13)?;
        Ok(Self {
            tau,
            period: period.value,
            solution: traj.solution,
        })
    }

    /// (phi, zeta) at reference position `pos` (any real, wrapped).
    pub fn state(&self, pos: f64) -> (f64, f64) {
        let wrapped = pos.rem_euclid(self.period);
        let y = self.solution.eval(wrapped);
        (y[0], y[1])
    }

    /// Project `point` onto the orbit near reference position `hint`;
    /// returns the unwrapped position and the distance.
    fn project(&self, point: (f64, f64), hint: f64) -> (f64, f64) {
        // g(pos) = (X(pos) - p) . X'(pos) vanishes at the nearest point
        let g_and_slope = |pos: f64| {
            let (phi, zeta) = self.state(pos);
            let dphi = zeta;
            let dzeta = coefficients::profile_rhs(phi, zeta);
            let ex = phi - point.0;
            let ez = zeta - point.1;
            let g = ex * dphi + ez * dzeta;
            // second derivatives of the orbit along itself
            let u = 1.0 + zeta * zeta;
            let rhs_phi = -u / (phi * phi);
            let rhs_zeta = 2.0 * zeta / phi - 6.0 * zeta * u.sqrt();
            let ddphi = dzeta;
            let ddzeta = rhs_phi * dphi + rhs_zeta * dzeta;
            let gp = dphi * dphi + dzeta * dzeta + ex * ddphi + ez * ddzeta;
            (g, gp)
        };
        let mut pos = hint;
        for _ in 0..30 {
            let (g, gp) = g_and_slope(pos);
            if gp.abs() < 1e-300 {
                break;
            }
            let step = g / gp;
            // keep the projection on the branch nearest the hint
            let clamped = step.clamp(-0.25 * self.period, 0.25 * self.period);
            pos -= clamped;
            if clamped.abs() < 1e-14 {
                break;
            }
        }
        let (phi, zeta) = self.state(pos);
        let dist = ((phi - point.0).powi(2) + (zeta - point.1).powi(2)).sqrt();
        (pos, dist)
    }
}

/// The sampled alignment map and its diagnostics.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub tau_ref: f64,
    pub period_ref: f64,
    /// Sample points psi of the aligned trajectory.
    pub psi: Vec<f64>,
    /// Phi(psi) at the samples, unwrapped and increasing.
    pub map: Vec<f64>,
    /// sup over samples of |Phi(psi) - psi|.
    pub sup_identity_dev: f64,
    /// sup of |Phi' - 1| by centered differences on the sample grid.
    pub sup_derivative_dev: f64,
    /// sup of |phi - phi_ref(Phi)| + sup of |zeta - zeta_ref(Phi)|.
    pub closeness: f64,
}

/// Align `traj` with the reference orbit of parameter `tau_ref`.
pub fn phase_align(traj: &Trajectory, tau_ref: f64) -> Result<PhaseMap> {
    let orbit = ReferenceOrbit::new(tau_ref)?;
    let n = traj.samples.len();
    if n < 3 {
        return Err(CoreError::Domain(
            "phase alignment needs at least 3 samples".into(),
        ));
    }
    let mut psi = Vec::with_capacity(n);
    let mut map = Vec::with_capacity(n);
    let mut sup_phi_dev: f64 = 0.0;
    let mut sup_zeta_dev: f64 = 0.0;
    let mut prev_psi = 0.0;
    let mut prev_pos = 0.0;
    for (k, (st, _)) in traj.samples.iter().enumerate() {
        let hint = if k == 0 {
            0.0
        } else {
            prev_pos + (st.psi - prev_psi)
        };
        let (pos, dist) = orbit.project((st.phi, st.zeta), hint);
        if dist > PROJECTION_LIMIT {
            return Err(CoreError::Projection {
                psi: st.psi,
                distance: dist,
                limit: PROJECTION_LIMIT,
            });
        }
        let (phi_ref, zeta_ref) = orbit.state(pos);
        sup_phi_dev = sup_phi_dev.max((st.phi - phi_ref).abs());
        sup_zeta_dev = sup_zeta_dev.max((st.zeta - zeta_ref).abs());
        psi.push(st.psi);
        map.push(pos);
        prev_psi = st.psi;
        prev_pos = pos;
    }

    let mut sup_identity_dev: f64 = 0.0;
    for (p, m) in psi.iter().zip(&map) {
        sup_identity_dev = sup_identity_dev.max((m - p).abs());
    }
    let mut sup_derivative_dev: f64 = 0.0;
    for k in 1..n - 1 {
        let slope = (map[k + 1] - map[k - 1]) / (psi[k + 1] - psi[k - 1]);
        sup_derivative_dev = sup_derivative_dev.max((slope - 1.0).abs());
    }

    Ok(PhaseMap {
        tau_ref,
        period_ref: orbit.period,
        psi,
        map,
        sup_identity_dev,
        sup_derivative_dev,
        closeness: sup_phi_dev + sup_zeta_dev,
    })
}

impl PhaseMap {
    /// Phi evaluated at the trajectory minima, paired with the nearest
    /// reference minima (integer multiples of the reference period).
    pub fn minima_alignment(&self, events: &[f64]) -> Vec<(f64, f64)> {
        events
            .iter()
            .map(|&e| {
                // linear interpolation of the sampled map
                let idx = self
                    .psi
                    .partition_point(|p| *p < e)
                    .min(self.psi.len() - 1)
                    .max(1);
                let (p0, p1) = (self.psi[idx - 1], self.psi[idx]);
                let (m0, m1) = (self.map[idx - 1], self.map[idx]);
                let t = if p1 > p0 { (e - p0) / (p1 - p0) } else { 0.0 };
                let phi_e = m0 + t * (m1 - m0);
                let nearest = (phi_e / self.period_ref).round() * self.period_ref;
                (phi_e, nearest)
            })
            .collect()
    }
}
