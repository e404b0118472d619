//! Shared coefficient table for the profile dynamics.
//!
//! Everything here is a closed-form function of the profile point (phi, zeta).
//! Arc-length ("dotted") quantities are eliminated through the substitution
//! list: with tau the instantaneous first integral,
//!
//! ```text
//!   psi_dot = phi^2 + tau = phi / sqrt(1 + zeta^2)
//!   phi_dot = zeta * psi_dot
//!   psi_ddot = 2 phi zeta psi_dot
//!   phi_ddot = phi - 2 phi psi_dot
//! ```
//!
//! so the forcing coefficients F1*, F4, the averaged-coefficient integrands
//! and the linearized-operator coefficients never need the s parametrization.

/// First integral tau(phi, zeta) = -phi^2 + phi / sqrt(1 + zeta^2).
pub fn first_integral(phi: f64, zeta: f64) -> f64 {
    -phi * phi + phi / (1.0 + zeta * zeta).sqrt()
}

/// Partial derivatives of the first integral, (d tau/d phi, d tau/d zeta).
pub fn first_integral_gradient(phi: f64, zeta: f64) -> (f64, f64) {
    let u = 1.0 + zeta * zeta;
    let s = u.sqrt();
    (-2.0 * phi + 1.0 / s, -phi * zeta / (s * u))
}

/// Right-hand side of the unforced profile ODE: phi_psipsi as a function of the state.
pub fn profile_rhs(phi: f64, zeta: f64) -> f64 {
    let u = 1.0 + zeta * zeta;
    u / phi - 2.0 * u.powf(1.5)
}

/// Arc-length quantities rewritten in (phi, zeta).
#[derive(Debug, Clone, Copy)]
pub struct Dots {
    pub u: f64,
    pub tau: f64,
    pub psi_dot: f64,
    pub phi_dot: f64,
    pub psi_ddot: f64,
    pub phi_ddot: f64,
}

pub fn dots(phi: f64, zeta: f64) -> Dots {
    let u = 1.0 + zeta * zeta;
    let tau = first_integral(phi, zeta);
    let psi_dot = phi / u.sqrt();
    let phi_dot = zeta * psi_dot;
    let psi_ddot = 2.0 * phi * zeta * psi_dot;
    let phi_ddot = phi - 2.0 * phi * psi_dot;
    Dots {
        u,
        tau,
        psi_dot,
        phi_dot,
        psi_ddot,
        phi_ddot,
    }
}

/// The coefficient multiplying xi in the forcing, odd in zeta.
pub fn f4(phi: f64, zeta: f64) -> f64 {
    let d = dots(phi, zeta);
    ((2.0 / 3.0) * d.phi_dot * d.phi_ddot + (2.0 / 3.0) * d.phi_dot.powi(3) / phi
        - (2.0 / 3.0) * d.psi_dot * d.psi_ddot
        - (4.0 / 3.0) * (phi * phi - d.tau) * d.phi_dot * d.psi_dot / phi
        + (4.0 / 3.0) * phi * d.phi_dot * d.psi_dot)
        / (phi * phi)
}

/// The theta-averaged curvature forcing: coefficient contraction against the
/// two curvature scalars a (normal-normal) and b (tangential) along the axis.
pub fn f1_pi0_r1(phi: f64, zeta: f64, a: f64, b: f64) -> f64 {
    let d = dots(phi, zeta);
    let bracket =
        phi * d.phi_dot * d.psi_ddot + 2.0 * d.phi_dot * d.phi_dot * d.psi_dot + d.psi_dot.powi(3)
            - (phi * phi - d.tau) * d.psi_dot * d.psi_dot
            - phi * phi * d.phi_dot * d.phi_dot;
    (1.0 / 3.0) * d.psi_dot * b + bracket / (phi * phi) * a
}

/// Integrand of the averaged second coefficient (the "Psi_1" average).
pub fn average_one_first_integrand(phi: f64, zeta: f64) -> f64 {
    let d = dots(phi, zeta);
    (2.0 * d.phi_dot * d.psi_ddot
        + 2.0 * d.phi_dot * d.phi_dot * d.psi_dot / phi
        + d.psi_dot.powi(3) / phi
        - 2.0 * d.psi_dot * d.psi_dot * (phi * phi - d.tau) / phi
        - 2.0 * phi * d.phi_dot * d.phi_dot)
        / phi
}

/// Integrand phi^2 / psi_dot^3 of the coordinate-stretch average.
pub fn average_one_second_integrand(phi: f64, zeta: f64) -> f64 {
    let d = dots(phi, zeta);
    phi * phi / d.psi_dot.powi(3)
}

/// First-order coefficient of the unforced linearized operator.
pub fn wronskian_coefficient(phi: f64, zeta: f64) -> f64 {
    let u = 1.0 + zeta * zeta;
    6.0 * u.sqrt() * zeta - 2.0 * zeta / phi
}

/// Value of rho together with its analytic partials in (phi, zeta).
#[derive(Debug, Clone, Copy, Default)]
pub struct RhoEval {
    pub rho: f64,
    pub d_phi: f64,
    pub d_zeta: f64,
}

/// Pointwise forcing data entering rho at one sample.
#[derive(Debug, Clone, Copy)]
pub struct ForcingPoint {
    pub epsilon: f64,
    /// a(x0): theta-average of the normal-normal curvature.
    pub a: f64,
    /// b(x0): theta-average of the tangential curvature.
    pub b: f64,
    pub xi: f64,
    pub mu: f64,
    pub omega: f64,
}

/// rho = -eps^2 F1*Pi0(R1) + eps F4 xi + eps^3 mu + eps^3 omega zeta/phi,
/// with partials taken at fixed profile values.
pub fn rho_eval(phi: f64, zeta: f64, f: &ForcingPoint) -> RhoEval {
    let u = 1.0 + zeta * zeta;
    let s = u.sqrt();
    let e = f.epsilon;
    let e2 = e * e;
    let e3 = e2 * e;

    // F1*Pi0(R1) = (1/3) psi_dot b + C_a a with
    // C_a = phi^2 (zeta^2 - 2)/u + 2 phi/sqrt(u)
    let psi_dot = phi / s;
    let c_a = phi * phi * (zeta * zeta - 2.0) / u + 2.0 * phi / s;
    let f1 = (1.0 / 3.0) * psi_dot * f.b + c_a * f.a;
    let d_psi_dot_phi = 1.0 / s;
    let d_psi_dot_zeta = -phi * zeta / (s * u);
    let d_ca_phi = 2.0 * phi * (zeta * zeta - 2.0) / u + 2.0 / s;
    let d_ca_zeta = 6.0 * zeta * phi * phi / (u * u) - 2.0 * phi * zeta / (s * u);
    let d_f1_phi = (1.0 / 3.0) * d_psi_dot_phi * f.b + d_ca_phi * f.a;
    let d_f1_zeta = (1.0 / 3.0) * d_psi_dot_zeta * f.b + d_ca_zeta * f.a;

    // F4 = (2/3) zeta (2u + 1) u^{-3/2} - 4 zeta phi / u
    let f4v = (2.0 / 3.0) * zeta * (2.0 * u + 1.0) / (u * s) - 4.0 * zeta * phi / u;
    let d_f4_phi = -4.0 * zeta / u;
    let d_f4_zeta = (2.0 / 3.0) / (u * u * s)
        * ((2.0 * u + 1.0) * u + 4.0 * zeta * zeta * u - 3.0 * zeta * zeta * (2.0 * u + 1.0))
        - 4.0 * phi * (u - 2.0 * zeta * zeta) / (u * u);

    RhoEval {
        rho: -e2 * f1 + e * f4v * f.xi + e3 * f.mu + e3 * f.omega * zeta / phi,
        d_phi: -e2 * d_f1_phi + e * d_f4_phi * f.xi - e3 * f.omega * zeta / (phi * phi),
        d_zeta: -e2 * d_f1_zeta + e * d_f4_zeta * f.xi + e3 * f.omega / phi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f4_raw(phi: f64, zeta: f64) -> f64 {
        f4(phi, zeta)
    }

    #[test]
    fn closed_forms_match_dotted_displays() {
        // The simplified forms inside rho_eval against the raw dotted expressions.
        for i in 0..40 {
            let phi = 0.15 + 0.02 * i as f64;
            for j in 0..21 {
                let zeta = -1.0 + 0.1 * j as f64;
                let f = ForcingPoint {
                    epsilon: 1.0,
                    a: 1.0,
                    b: 0.0,
                    xi: 0.0,
                    mu: 0.0,
                    omega: 0.0,
                };
                let simplified = -rho_eval(phi, zeta, &f).rho;
                let raw = f1_pi0_r1(phi, zeta, 1.0, 0.0);
                assert!((simplified - raw).abs() < 1e-12 * raw.abs().max(1.0));

                let f = ForcingPoint {
                    epsilon: 1.0,
                    a: 0.0,
                    b: 1.0,
                    xi: 0.0,
                    mu: 0.0,
                    omega: 0.0,
                };
                let simplified = -rho_eval(phi, zeta, &f).rho;
                let raw = f1_pi0_r1(phi, zeta, 0.0, 1.0);
                assert!((simplified - raw).abs() < 1e-13 * raw.abs().max(1.0));

                let f = ForcingPoint {
                    epsilon: 1.0,
                    a: 0.0,
                    b: 0.0,
                    xi: 1.0,
                    mu: 0.0,
                    omega: 0.0,
                };
                let simplified = rho_eval(phi, zeta, &f).rho;
                assert!((simplified - f4_raw(phi, zeta)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rho_partials_match_central_differences() {
        let f = ForcingPoint {
            epsilon: 0.3,
            a: 0.7,
            b: -0.4,
            xi: 0.9,
            mu: 0.2,
            omega: 1.3,
        };
        let h = 1e-6;
        for i in 0..15 {
            let phi = 0.2 + 0.04 * i as f64;
            for j in 0..9 {
                let zeta = -0.8 + 0.2 * j as f64;
                let e = rho_eval(phi, zeta, &f);
                let fd_phi =
                    (rho_eval(phi + h, zeta, &f).rho - rho_eval(phi - h, zeta, &f).rho) / (2.0 * h);
                let fd_zeta =
                    (rho_eval(phi, zeta + h, &f).rho - rho_eval(phi, zeta - h, &f).rho) / (2.0 * h);
                assert!(
                    (e.d_phi - fd_phi).abs() < 1e-7 * fd_phi.abs().max(1.0),
                    "d_phi at ({phi},{zeta})"
                );
                assert!(
                    (e.d_zeta - fd_zeta).abs() < 1e-7 * fd_zeta.abs().max(1.0),
                    "d_zeta at ({phi},{zeta})"
                );
            }
        }
    }

    #[test]
    fn f4_is_odd_in_zeta_and_vanishes_on_cylinder() {
        assert_eq!(f4(0.5, 0.0), 0.0);
        for j in 1..10 {
            let z = 0.1 * j as f64;
            assert!((f4(0.3, z) + f4(0.3, -z)).abs() < 1e-14);
        }
    }

    #[test]
    fn cylinder_values_of_average_one_integrands() {
        // phi = 1/2, zeta = 0: psi_dot = 1/2, first integrand = 1/2, second = 2
        assert!((average_one_first_integrand(0.5, 0.0) - 0.5).abs() < 1e-15);
        assert!((average_one_second_integrand(0.5, 0.0) - 2.0).abs() < 1e-15);
    }
}
