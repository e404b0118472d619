//! Surface realization and diagnostics: Fermi-coordinate metric expansion,
//! surface-of-revolution embeddings of profile curves, mean curvature from
//! fundamental forms, and Wavefront OBJ export.

use std::io::Write;
use std::path::Path;

use crate::delaunay::Trajectory;
use crate::error::{CoreError, Result};
use crate::shooting::{ForcedTrajectory, ForcingSpec};

/// Riemann tensor values at a point of the geodesic, in the orthonormal
/// frame (X0, X1, X2). Stored as the symmetric matrix over the
/// antisymmetric index pairs [01], [02], [12].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureAtPoint {
    pairs: [[f64; 3]; 3],
}

impl CurvatureAtPoint {
    pub fn zero() -> Self {
        Self {
            pairs: [[0.0; 3]; 3],
        }
    }

    /// Build from the six independent components
    /// R0101, R0102, R0112, R0202, R0212, R1212.
    pub fn from_components(
        r0101: f64,
        r0102: f64,
        r0112: f64,
        r0202: f64,
        r0212: f64,
        r1212: f64,
    ) -> Self {
        Self {
            pairs: [
                [r0101, r0102, r0112],
                [r0102, r0202, r0212],
                [r0112, r0212, r1212],
            ],
        }
    }

    fn pair_index(a: usize, b: usize) -> Option<(usize, f64)> {
        match (a, b) {
            (0, 1) => Some((0, 1.0)),
            (1, 0) => Some((0, -1.0)),
            (0, 2) => Some((1, 1.0)),
            (2, 0) => Some((1, -1.0)),
            (1, 2) => Some((2, 1.0)),
            (2, 1) => Some((2, -1.0)),
            _ => None,
        }
    }

    /// R(X_a, X_b, X_c, X_d) with the full tensor symmetries.
    pub fn component(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        match (Self::pair_index(a, b), Self::pair_index(c, d)) {
            (Some((i, si)), Some((j, sj))) => si * sj * self.pairs[i][j],
            _ => 0.0,
        }
    }
}

/// Metric coefficients at one Fermi-coordinate point, through quadratic order.
#[derive(Debug, Clone)]
pub struct FermiMetricSample {
    pub x: [f64; 3],
    pub g: [[f64; 3]; 3],
    pub curvature_input: CurvatureAtPoint,
}

/// Evaluate the Fermi metric expansion at x = (x0, x1, x2):
/// `g_ij = delta_ij + (1/3) R(Xk, Xi, Xl, Xj) xk xl`,
/// `g_0i = (2/3) R(Xk, X0, Xl, Xi) xk xl`,
/// `g_00 = 1 + R(Xk, X0, Xl, X0) xk xl`, dropping O(r^3).
pub fn fermi_metric(x: [f64; 3], curvature: &CurvatureAtPoint) -> FermiMetricSample {
    let mut g = [[0.0; 3]; 3];
    let xs = [x[1], x[2]];
    let idx = [1usize, 2];
    for a in 0..3 {
        g[a][a] = 1.0;
    }
    for (ki, &k) in idx.iter().enumerate() {
        for (li, &l) in idx.iter().enumerate() {
            let w = xs[ki] * xs[li];
            g[0][0] += curvature.component(k, 0, l, 0) * w;
            for &i in &idx {
                g[0][i] += (2.0 / 3.0) * curvature.component(k, 0, l, i) * w;
                for &j in &idx {
                    g[i][j] += (1.0 / 3.0) * curvature.component(k, i, l, j) * w;
                }
            }
        }
    }
    g[1][0] = g[0][1];
    g[2][0] = g[0][2];
    FermiMetricSample {
        x,
        g,
        curvature_input: *curvature,
    }
}

/// Triangle mesh of an embedded surface of revolution.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    /// Vertex index triples, consistently oriented (outward normals).
    pub faces: Vec<[usize; 3]>,
    pub per_vertex_h: Option<Vec<f64>>,
    pub closed_in_theta: bool,
    /// True for visualization-only embeddings that are not CMC in flat space.
    pub non_cmc_embedding: bool,
}

impl SurfaceMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Edge count of the triangle mesh (each undirected edge once).
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    pub fn euler_characteristic(&self) -> isize {
        self.vertex_count() as isize - self.edge_count() as isize + self.face_count() as isize
    }

    /// Wavefront OBJ text: `v x y z` lines then 1-based `f i j k` lines.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        out
    }

    /// Sidecar CSV `vertex_index,H` when per-vertex curvature is attached.
    pub fn h_csv(&self) -> Option<String> {
        self.per_vertex_h.as_ref().map(|hs| {
            let mut out = String::from("vertex_index,H\n");
            for (i, h) in hs.iter().enumerate() {
                out.push_str(&format!("{},{:.16e}\n", i, h));
            }
            out
        })
    }
}

/// Rings of the embedding: trajectory samples, one ring per sample.
fn rings(traj: &Trajectory) -> Vec<(f64, f64, f64)> {
    traj.samples
        .iter()
        .map(|(s, _)| (s.psi, s.phi, s.zeta))
        .collect()
}

/// Mesh of the epsilon-scaled unduloid of revolution around the straight
/// axis; theta rings are seam-identified (no duplicated vertex column).
pub fn embed_unduloid(traj: &Trajectory, epsilon: f64, theta_res: usize) -> Result<SurfaceMesh> {
    if theta_res < 8 {
        return Err(CoreError::Domain(format!(
            "theta_res = {theta_res} below the minimum of 8"
        )));
    }
    let rings = rings(traj);
    let mut vertices = Vec::with_capacity(rings.len() * theta_res);
    let mut per_vertex_h = Vec::with_capacity(rings.len() * theta_res);
    for &(psi, phi, zeta) in &rings {
        let u = 1.0 + zeta * zeta;
        let h_profile =
            -crate::coefficients::profile_rhs(phi, zeta) * u.powf(-1.5) + u.powf(-0.5) / phi;
        for j in 0..theta_res {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / theta_res as f64;
            vertices.push([
                epsilon * phi * theta.cos(),
                epsilon * phi * theta.sin(),
                epsilon * psi,
            ]);
            per_vertex_h.push(h_profile / epsilon);
        }
    }
    let faces = revolution_faces(rings.len(), theta_res);
    Ok(SurfaceMesh {
        vertices,
        faces,
        per_vertex_h: Some(per_vertex_h),
        closed_in_theta: true,
        non_cmc_embedding: false,
    })
}

/// Visualization-only embedding around a circular axis of circumference
/// `l_gamma` in flat space; not CMC there (the construction's ambient
/// metric is not flat along a closed geodesic), so it is labeled as such.
pub fn embed_tube(
    traj: &Trajectory,
    epsilon: f64,
    l_gamma: f64,
    theta_res: usize,
) -> Result<SurfaceMesh> {
    if theta_res < 8 {
        return Err(CoreError::Domain(format!(
            "theta_res = {theta_res} below the minimum of 8"
        )));
    }
    let r0 = l_gamma / (2.0 * std::f64::consts::PI);
    let rings = rings(traj);
    let mut vertices = Vec::with_capacity(rings.len() * theta_res);
    for &(psi, phi, _) in &rings {
        let alpha = epsilon * psi / r0;
        let (ca, sa) = (alpha.cos(), alpha.sin());
        for j in 0..theta_res {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / theta_res as f64;
            let radial = r0 + epsilon * phi * theta.cos();
            vertices.push([radial * ca, radial * sa, epsilon * phi * theta.sin()]);
        }
    }
    let faces = revolution_faces(rings.len(), theta_res);
    Ok(SurfaceMesh {
        vertices,
        faces,
        per_vertex_h: None,
        closed_in_theta: true,
        non_cmc_embedding: true,
    })
}

fn revolution_faces(n_rings: usize, theta_res: usize) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * theta_res * n_rings.saturating_sub(1));
    for r in 0..n_rings.saturating_sub(1) {
        for j in 0..theta_res {
            let jn = (j + 1) % theta_res;
            let a = r * theta_res + j;
            let b = r * theta_res + jn;
            let c = (r + 1) * theta_res + j;
            let d = (r + 1) * theta_res + jn;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    faces
}

/// Mean curvature of the epsilon-scaled surface: (1/epsilon) times the
/// profile identity value, evaluated per sample.
pub fn surface_mean_curvature(traj: &Trajectory, epsilon: f64) -> Vec<(f64, f64)> {
    crate::identities::mean_curvature_profile(traj)
        .into_iter()
        .map(|(psi, h)| (psi, h / epsilon))
        .collect()
}

/// Mean curvature of a forced trajectory's surface together with the
/// matched-point prediction `2/eps + eps^2 omega zeta / phi`:
/// rows (psi, H, predicted H).
pub fn forced_surface_mean_curvature(
    traj: &ForcedTrajectory,
    spec: &ForcingSpec,
) -> Vec<(f64, f64, f64)> {
    let eps = spec.epsilon;
    traj.base
        .samples
        .iter()
        .map(|(s, _)| {
            let x0 = eps * (s.psi + traj.delta);
            let mut forcing = spec.clone();
            forcing.omega = traj.omega;
            let rho = crate::shooting::rho(s, x0, &forcing);
            let h = (2.0 + rho) / eps;
            let predicted = 2.0 / eps + eps * eps * traj.omega * s.zeta / s.phi;
            (s.psi, h, predicted)
        })
        .collect()
}

/// Write the OBJ text to `destination`; the per-vertex H CSV, when present,
/// goes next to it with extension `.h.csv`.
pub fn export_obj(mesh: &SurfaceMesh, destination: &Path) -> Result<()> {
    let mut file = std::fs::File::create(destination)?;
    file.write_all(mesh.to_obj().as_bytes())?;
    if let Some(csv) = mesh.h_csv() {
        let sidecar = destination.with_extension("h.csv");
        std::fs::write(sidecar, csv)?;
    }
    Ok(())
}
