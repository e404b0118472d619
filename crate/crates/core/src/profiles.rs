//! Periodic scalar profiles for the forcing data.
//!
//! Profiles are uniform tabulations with exact periodic wrap, interpolated by
//! a periodic cubic spline; derivatives come from spline differentiation.
//! Named presets cover the test inputs: "zero", "constant:<v>",
//! "sin:<A>,<k>" and "cos:<A>,<k>" (k full waves over the profile's span).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

const PRESET_NODES: usize = 256;

/// A periodic tabulated profile over `[0, length)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile {
    values: Vec<f64>,
    length: f64,
    /// Second derivatives at the nodes of the periodic cubic spline.
    #[serde(skip)]
    curvatures: Vec<f64>,
}

impl Profile {
    pub fn from_nodes(values: Vec<f64>, length: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(CoreError::Domain(
                "a tabulated profile needs at least 3 nodes".into(),
            ));
        }
        if !(length > 0.0) {
            return Err(CoreError::Domain(format!(
                "profile length {length} must be positive"
            )));
        }
        let curvatures = periodic_spline_curvatures(&values, length / values.len() as f64);
        Ok(Self {
            values,
            length,
            curvatures,
        })
    }

    pub fn zero(length: f64) -> Self {
        Self::constant(0.0, length)
    }

    pub fn constant(v: f64, length: f64) -> Self {
        Self::from_nodes(vec![v; 8], length).expect("constant profile construction")
    }

    pub fn sin(amplitude: f64, waves: u32, length: f64) -> Self {
        let n = PRESET_NODES;
        let values = (0..n)
            .map(|i| {
                amplitude * (2.0 * std::f64::consts::PI * waves as f64 * i as f64 / n as f64).sin()
            })
            .collect();
        Self::from_nodes(values, length).expect("sin profile construction")
    }

    pub fn cos(amplitude: f64, waves: u32, length: f64) -> Self {
        let n = PRESET_NODES;
        let values = (0..n)
            .map(|i| {
                amplitude * (2.0 * std::f64::consts::PI * waves as f64 * i as f64 / n as f64).cos()
            })
            .collect();
        Self::from_nodes(values, length).expect("cos profile construction")
    }

    /// Parse a preset: "zero" | "constant:<v>" | "sin:<A>,<k>" | "cos:<A>,<k>".
    pub fn from_preset(spec: &str, length: f64) -> Result<Self> {
        let bad = |s: &str| CoreError::Domain(format!("unrecognized profile preset '{s}'"));
        if spec == "zero" {
            return Ok(Self::zero(length));
        }
        if let Some(v) = spec.strip_prefix("constant:") {
            let v: f64 = v.trim().parse().map_err(|_| bad(spec))?;
            return Ok(Self::constant(v, length));
        }
        for (prefix, is_sin) in [("sin:", true), ("cos:", false)] {
            if let Some(rest) = spec.strip_prefix(prefix) {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(bad(spec));
                }
                let amp: f64 = parts[0].parse().map_err(|_| bad(spec))?;
                let waves: u32 = parts[1].parse().map_err(|_| bad(spec))?;
                return Ok(if is_sin {
                    Self::sin(amp, waves, length)
                } else {
                    Self::cos(amp, waves, length)
                });
            }
        }
        Err(bad(spec))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.values.len();
        let h = self.length / n as f64;
        let xw = x.rem_euclid(self.length);
        let mut j = (xw / h) as usize;
        if j >= n {
            j = n - 1;
        }
        (j, xw - j as f64 * h, h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.is_constant() {
            return self.values[0];
        }
        let n = self.values.len();
        let (j, t, h) = self.locate(x);
        let jp = (j + 1) % n;
        let (va, vb) = (self.values[j], self.values[jp]);
        let (ma, mb) = (self.curvatures[j], self.curvatures[jp]);
        let u = h - t;
        va * u / h
            + vb * t / h
            + (u * u * u / h - h * u) * ma / 6.0
            + (t * t * t / h - h * t) * mb / 6.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let n = self.values.len();
        let (j, t, h) = self.locate(x);
        let jp = (j + 1) % n;
        let (va, vb) = (self.values[j], self.values[jp]);
        let (ma, mb) = (self.curvatures[j], self.curvatures[jp]);
        let u = h - t;
        (vb - va) / h + (-3.0 * u * u / h + h) * ma / 6.0 + (3.0 * t * t / h - h) * mb / 6.0
    }

    /// Rebuild spline data (after deserialization, where curvatures are skipped).
    pub fn refresh(&mut self) {
        let n = self.values.len();
        self.curvatures = periodic_spline_curvatures(&self.values, self.length / n as f64);
    }
}

/// Node spec accepted in problem files: either a preset string or raw values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Preset(String),
    Nodes(Vec<f64>),
}

impl ProfileSpec {
    pub fn build(&self, length: f64) -> Result<Profile> {
        match self {
            ProfileSpec::Preset(s) => Profile::from_preset(s, length),
            ProfileSpec::Nodes(v) => Profile::from_nodes(v.clone(), length),
        }
    }
}

/// Periodic natural cubic spline second derivatives on a uniform grid.
///
/// Solves the cyclic tridiagonal system (1, 4, 1) M = 6 d2 via the
/// Sherman-Morrison splitting of the corner entries.
fn periodic_spline_curvatures(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let prev = values[(i + n - 1) % n];
        let next = values[(i + 1) % n];
        rhs[i] = 6.0 * (next - 2.0 * values[i] + prev) / (h * h);
    }

    // system: M[i-1] + 4 M[i] + M[i+1] = rhs[i], cyclic
    let gamma = -4.0;
    let solve_tridiag = |b: &[f64]| -> Vec<f64> {
        // non-cyclic (diag modified at both ends per Sherman-Morrison)
        let mut diag = vec![4.0; n];
        diag[0] -= gamma;
        diag[n - 1] -= 1.0 / gamma;
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut beta = diag[0];
        x[0] = b[0] / beta;
        for i in 1..n {
            c[i] = 1.0 / beta;
            beta = diag[i] - c[i];
            x[i] = (b[i] - x[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            let xn = x[i + 1];
            x[i] -= c[i + 1] * xn;
        }
        x
    };

    let x = solve_tridiag(&rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = solve_tridiag(&u);
    let factor = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    (0..n).map(|i| x[i] - factor * z[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_is_exact() {
        let p = Profile::constant(0.3, 5.0);
        for i in 0..50 {
            let x = -3.0 + 0.31 * i as f64;
            assert_eq!(p.eval(x), 0.3);
            assert_eq!(p.deriv(x), 0.0);
        }
        assert!(p.is_constant());
        assert!(!p.is_identically_zero());
    }

    #[test]
    fn sin_preset_interpolates_accurately() {
        let length = 2.0;
        let p = Profile::sin(1.5, 3, length);
        let mut worst: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        for i in 0..1000 {
            let x = length * i as f64 / 1000.0;
            let exact = 1.5 * (2.0 * std::f64::consts::PI * 3.0 * x / length).sin();
            let exact_d = 1.5
                * (2.0 * std::f64::consts::PI * 3.0 / length)
                * (2.0 * std::f64::consts::PI * 3.0 * x / length).cos();
            worst = worst.max((p.eval(x) - exact).abs());
            worst_d = worst_d.max((p.deriv(x) - exact_d).abs());
        }
        assert!(worst < 3e-7, "value error {worst:.3e}");
        assert!(worst_d < 1e-4, "derivative error {worst_d:.3e}");
    }

    #[test]
    fn periodic_wrap_is_exact() {
        let p = Profile::from_nodes(vec![1.0, -2.0, 0.5, 3.0, -1.0], 1.0).unwrap();
        for i in 0..20 {
            let x = 0.05 * i as f64;
            assert!((p.eval(x) - p.eval(x + 1.0)).abs() < 1e-14);
            assert!((p.eval(x) - p.eval(x - 3.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn cos_preset_even_sin_preset_odd() {
        let p = Profile::cos(0.7, 1, 4.0);
        let q = Profile::sin(0.7, 1, 4.0);
        for i in 1..40 {
            let x = 0.1 * i as f64;
            assert!((p.eval(-x) - p.eval(x)).abs() < 1e-13);
            assert!((q.eval(-x) + q.eval(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn presets_parse() {
        assert!(Profile::from_preset("zero", 1.0)
            .unwrap()
            .is_identically_zero());
        assert_eq!(
            Profile::from_preset("constant:0.25", 1.0)
                .unwrap()
                .eval(0.3),
            0.25
        );
        assert!(Profile::from_preset("sin:0.05,2", 1.0).is_ok());
        assert!(Profile::from_preset("cos:1.0,8", 1.0).is_ok());
        assert!(Profile::from_preset("tanh:1", 1.0).is_err());
        assert!(Profile::from_preset("sin:abc,2", 1.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_node_values() {
        let vals = vec![0.3, -0.1, 0.8, 0.2, -0.6, 0.05, 0.4];
        let p = Profile::from_nodes(vals.clone(), 2.0).unwrap();
        let h = 2.0 / vals.len() as f64;
        for (i, v) in vals.iter().enumerate() {
            assert!((p.eval(i as f64 * h) - v).abs() < 1e-12);
        }
    }
}
