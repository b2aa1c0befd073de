//! Disk-shaped tank meshes with equiangular boundary electrodes.

use std::collections::HashSet;
use std::f64::consts::PI;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::electrodes::ElectrodeSet;
use super::mesh::{Mesh, Point};
use crate::error::{EitError, Result};

const MIN_ANGLE_DEG: f64 = 25.0;

/// Boundary spacing controls near the electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGrading {
    /// Spacing at an electrode endpoint, relative to `target_h`.
    pub endpoint: f64,
    /// Absolute cap on the endpoint spacing, relative to the electrode half-width.
    pub endpoint_cap: f64,
    /// Growth of spacing per unit arclength away from an endpoint.
    pub growth: f64,
    /// Cap on spacing along an electrode, relative to `target_h`.
    pub electrode: f64,
}

impl Default for BoundaryGrading {
    fn default() -> Self {
        Self { endpoint: 0.2, endpoint_cap: 0.1, growth: 0.25, electrode: 0.5 }
    }
}

/// Parameters of [`generate_disk_mesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskSpec {
    pub radius: f64,
    pub n_electrodes: usize,
    pub electrode_half_width: f64,
    pub target_h: f64,
}

impl DiskSpec {
    /// Center angle of electrode `m`.
    pub fn electrode_angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.n_electrodes as f64
    }

    fn validate(&self) -> Result<()> {
        let DiskSpec { radius, n_electrodes, electrode_half_width: r, target_h } = *self;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(EitError::Parameter(format!("radius must be positive, got {radius}")));
        }
        if n_electrodes < 2 {
            return Err(EitError::Parameter(format!("need at least 2 electrodes, got {n_electrodes}")));
        }
        if !(r > 0.0) {
            return Err(EitError::Parameter(format!("electrode half-width must be positive, got {r}")));
        }
        if 2.0 * r * n_electrodes as f64 >= 2.0 * PI * radius {
            return Err(EitError::Parameter(format!(
                "{n_electrodes} electrodes of width {} overlap on a circle of radius {radius}",
                2.0 * r
            )));
        }
        if !(target_h > 0.0) || target_h > radius {
            return Err(EitError::Parameter(format!(
                "target_h must lie in (0, radius], got {target_h}"
            )));
        }
        Ok(())
    }
}

/// Meshes the disk of the given radius, with `n_electrodes` arcs of
/// arclength `2 * electrode_half_width` centred at angles `2πk/M`.
///
/// Boundary nodes are graded towards the electrode endpoints, where the
/// spacing is at most `target_h / 4`. The interior is filled by constrained
/// Delaunay refinement with a minimum angle of 25°.
pub fn generate_disk_mesh(
    radius: f64,
    n_electrodes: usize,
    electrode_half_width: f64,
    target_h: f64,
) -> Result<(Mesh, ElectrodeSet)> {
    let spec = DiskSpec { radius, n_electrodes, electrode_half_width, target_h };
    generate_disk_mesh_graded(&spec, &BoundaryGrading::default())
}

/// [`generate_disk_mesh`] with explicit boundary grading.
pub fn generate_disk_mesh_graded(spec: &DiskSpec, grading: &BoundaryGrading) -> Result<(Mesh, ElectrodeSet)> {
    spec.validate()?;
    let DiskSpec { radius, target_h, .. } = *spec;
    let spec = *spec;

    let boundary = boundary_angles(&spec, grading);
    let vertices: Vec<Point2<f64>> = boundary
        .iter()
        .map(|&t| Point2::new(radius * t.cos(), radius * t.sin()))
        .collect();
    let nb = vertices.len();
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| EitError::Meshing(format!("constrained triangulation failed: {e:?}")))?;

    let max_area = 3f64.sqrt() / 4.0 * target_h * target_h;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(50 * (PI * radius * radius / max_area) as usize + 10_000),
    );
    if !result.refinement_complete {
        return Err(EitError::Meshing("refinement did not complete".into()));
    }
    let excluded: HashSet<usize> = result.excluded_faces.iter().map(|f| f.index()).collect();

    let mut index = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes: Vec<Point> = Vec::with_capacity(cdt.num_vertices());
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let vi = v.fix().index();
            if index[vi] == usize::MAX {
                index[vi] = nodes.len();
                let p = v.position();
                nodes.push([p.x, p.y]);
            }
            tri[k] = index[vi];
        }
        triangles.push(tri);
    }

    // Orient counterclockwise.
    for tri in &mut triangles {
        let [a, b, c] = tri.map(|i| nodes[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det < 0.0 {
            tri.swap(1, 2);
        }
    }

    // Points inserted on boundary chords during refinement are moved onto the circle.
    let topo = Mesh::new(nodes.clone(), triangles.clone())?;
    for &[a, _] in topo.boundary_edges() {
        let [x, y] = nodes[a];
        let r = x.hypot(y);
        nodes[a] = [x * radius / r, y * radius / r];
    }
    let mesh = Mesh::new(nodes, triangles)?;

    let electrodes = electrodes_by_angle(&mesh, &spec)?;
    Ok((mesh, electrodes))
}

/// Assigns boundary edges to electrodes by the angle of their midpoints.
fn electrodes_by_angle(mesh: &Mesh, spec: &DiskSpec) -> Result<ElectrodeSet> {
    let half_angle = spec.electrode_half_width / spec.radius;
    let mut arcs = vec![Vec::new(); spec.n_electrodes];
    for (k, &[a, b]) in mesh.boundary_edges().iter().enumerate() {
        let pa = mesh.node(a);
        let pb = mesh.node(b);
        let theta = (pa[1] + pb[1]).atan2(pa[0] + pb[0]);
        for (m, arc) in arcs.iter_mut().enumerate() {
            if angle_diff(theta, spec.electrode_angle(m)).abs() < half_angle {
                arc.push(k);
            }
        }
    }
    ElectrodeSet::new(mesh, arcs, spec.electrode_half_width)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Graded boundary node angles in [0, 2π), including all electrode endpoints.
fn boundary_angles(spec: &DiskSpec, grading: &BoundaryGrading) -> Vec<f64> {
    let m = spec.n_electrodes;
    let rho = spec.radius;
    let half = spec.electrode_half_width / rho;
    let h = spec.target_h;

    // Key angles: electrode endpoints, in increasing order starting just below 0.
    let mut keys = Vec::with_capacity(2 * m + 1);
    for k in 0..m {
        let c = spec.electrode_angle(k);
        keys.push(c - half);
        keys.push(c + half);
    }
    keys.push(keys[0] + 2.0 * PI);

    let spacing = |theta: f64| -> f64 {
        // arclength to the nearest endpoint
        let d = keys
            .iter()
            .map(|&k| angle_diff(theta, k).abs())
            .fold(f64::INFINITY, f64::min)
            * rho;
        let on_electrode = (0..m).any(|k| angle_diff(theta, spec.electrode_angle(k)).abs() < half);
        let cap = if on_electrode { grading.electrode * h } else { h };
        let end = (grading.endpoint * h).min(grading.endpoint_cap * spec.electrode_half_width);
        (end + grading.growth * d).min(cap)
    };

    let mut out = Vec::new();
    for w in keys.windows(2) {
        let (a, b) = (w[0], w[1]);
        // cumulative ∫ ds / h over the segment
        let samples = 400;
        let dt = (b - a) / samples as f64;
        let mut cum = vec![0.0; samples + 1];
        for i in 0..samples {
            let t0 = a + i as f64 * dt;
            let f0 = 1.0 / spacing(t0);
            let f1 = 1.0 / spacing(t0 + dt);
            cum[i + 1] = cum[i] + 0.5 * (f0 + f1) * dt * rho;
        }
        let total = cum[samples];
        let n_seg = (total.ceil() as usize).max(1);
        out.push(a);
        let mut j = 0;
        for s in 1..n_seg {
            let target = total * s as f64 / n_seg as f64;
            while cum[j + 1] < target {
                j += 1;
            }
            let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
            out.push(a + (j as f64 + frac) * dt);
        }
    }
    out.iter().map(|t| t.rem_euclid(2.0 * PI)).collect()
}
