use std::collections::HashMap;

use crate::error::{EitError, Result};
use crate::sparse::{SparseSym, TripletBuilder};

pub type Point = [f64; 2];

/// Area and barycentric-coordinate gradients of one P1 triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// Constant gradient of the hat function of each local vertex.
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [Point; 3]) -> Self {
        let [a, b, c] = p;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * det;
        // grad(lambda_i) = rot90(opposite edge) / (2 area)
        let g = |p: Point, q: Point| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
        Self { area, grads: [g(b, c), g(c, a), g(a, b)] }
    }

    /// Gradient of the P1 interpolant with nodal values `v`.
    pub fn gradient(&self, v: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, gk) in self.grads.iter().enumerate() {
            g[0] += v[k] * gk[0];
            g[1] += v[k] * gk[1];
        }
        g
    }

    /// Local stiffness `∫ ∇φ_i·∇φ_j`.
    pub fn stiffness(&self) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = self.area * dot(self.grads[i], self.grads[j]);
            }
        }
        k
    }

    /// Local mass `∫ φ_i φ_j`.
    pub fn mass(&self) -> [[f64; 3]; 3] {
        let mut m = [[self.area / 12.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = self.area / 6.0;
        }
        m
    }
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// 2D triangular P1 mesh.
///
/// Triangles are counterclockwise; `boundary_edges` is the boundary loop in
/// counterclockwise order, so the outward normal of edge `[a, b]` points to
/// its right.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
}

impl Mesh {
    /// Builds a mesh and derives its boundary loop from the triangle topology.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        check_triangles(&nodes, &triangles)?;
        let boundary_edges = boundary_loop(nodes.len(), &triangles)?;
        Ok(Self { nodes, triangles, boundary_edges })
    }

    /// Builds a mesh from stored parts and checks that the given boundary
    /// loop is the one implied by the triangles.
    pub fn from_parts(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
    ) -> Result<Self> {
        check_triangles(&nodes, &triangles)?;
        let expected = boundary_loop(nodes.len(), &triangles)?;
        let mut a: Vec<[usize; 2]> = expected.clone();
        let mut b = boundary_edges.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(EitError::Format(
                "boundary_edges do not match the topological boundary of the triangles".into(),
            ));
        }
        for w in boundary_edges.windows(2) {
            if w[0][1] != w[1][0] {
                return Err(EitError::Format("boundary_edges are not a connected loop".into()));
            }
        }
        if let (Some(f), Some(l)) = (boundary_edges.first(), boundary_edges.last()) {
            if l[1] != f[0] {
                return Err(EitError::Format("boundary_edges loop is not closed".into()));
            }
        }
        Ok(Self { nodes, triangles, boundary_edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn element(&self, t: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[t];
        ElementGeometry::new([self.nodes[a], self.nodes[b], self.nodes[c]])
    }

    pub fn elements(&self) -> impl Iterator<Item = ([usize; 3], ElementGeometry)> + '_ {
        (0..self.triangles.len()).map(|t| (self.triangles[t], self.element(t)))
    }

    pub fn area(&self) -> f64 {
        self.elements().map(|(_, e)| e.area).sum()
    }

    pub fn edge_length(&self, e: [usize; 2]) -> f64 {
        dist(self.nodes[e[0]], self.nodes[e[1]])
    }

    /// Indicator of nodes lying on the boundary.
    pub fn boundary_node_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for e in &self.boundary_edges {
            m[e[0]] = true;
            m[e[1]] = true;
        }
        m
    }

    /// Smallest interior angle of triangle `t`, in degrees.
    pub fn min_angle_deg(&self, t: usize) -> f64 {
        let p = self.triangles[t].map(|i| self.nodes[i]);
        (0..3)
            .map(|k| {
                let a = p[k];
                let b = p[(k + 1) % 3];
                let c = p[(k + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = dot(u, v) / (dist(a, b) * dist(a, c));
                cos.clamp(-1.0, 1.0).acos().to_degrees()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Full P1 mass matrix `∫ φ_i φ_j`.
    pub fn mass_matrix(&self) -> SparseSym {
        let mut b = TripletBuilder::with_capacity(self.n_nodes(), 9 * self.triangles.len());
        for (tri, el) in self.elements() {
            let m = el.mass();
            for i in 0..3 {
                for j in 0..=i {
                    b.push_sym(tri[i], tri[j], m[i][j]);
                }
            }
        }
        b.build()
    }

    /// P1 stiffness matrix with one scalar coefficient per triangle.
    pub fn stiffness_matrix(&self, coeff: impl Fn(usize) -> f64) -> SparseSym {
        let mut b = TripletBuilder::with_capacity(self.n_nodes(), 9 * self.triangles.len());
        for (t, (tri, el)) in self.elements().enumerate() {
            let c = coeff(t);
            let k = el.stiffness();
            for i in 0..3 {
                for j in 0..=i {
                    b.push_sym(tri[i], tri[j], c * k[i][j]);
                }
            }
        }
        b.build()
    }

    /// Node-to-node adjacency (sorted, without self loops).
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for tri in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        adj[tri[i]].push(tri[j]);
                    }
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Longest boundary edge length.
    pub fn max_boundary_edge(&self) -> f64 {
        self.boundary_edges.iter().map(|&e| self.edge_length(e)).fold(0.0, f64::max)
    }

    /// Returns the same mesh with nodes renumbered: new node `k` is old node `order[k]`.
    pub fn renumbered(&self, order: &[usize]) -> Result<Mesh> {
        let n = self.n_nodes();
        if order.len() != n {
            return Err(EitError::Shape("renumbering has wrong length".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (k, &o) in order.iter().enumerate() {
            inv[o] = k;
        }
        if inv.contains(&usize::MAX) {
            return Err(EitError::Input("renumbering is not a permutation".into()));
        }
        let nodes = order.iter().map(|&o| self.nodes[o]).collect();
        let triangles = self.triangles.iter().map(|t| t.map(|i| inv[i])).collect();
        let boundary_edges = self.boundary_edges.iter().map(|e| e.map(|i| inv[i])).collect();
        Ok(Mesh { nodes, triangles, boundary_edges })
    }
}

fn check_triangles(nodes: &[Point], triangles: &[[usize; 3]]) -> Result<()> {
    if triangles.is_empty() {
        return Err(EitError::Meshing("mesh has no triangles".into()));
    }
    let n = nodes.len();
    let mut used = vec![false; n];
    for (t, tri) in triangles.iter().enumerate() {
        if tri.iter().any(|&i| i >= n) {
            return Err(EitError::Meshing(format!("triangle {t} references a node >= {n}")));
        }
        for &i in tri {
            used[i] = true;
        }
        let el = ElementGeometry::new(tri.map(|i| nodes[i]));
        if !(el.area > 0.0) {
            return Err(EitError::Meshing(format!(
                "triangle {t} has non-positive signed area {:e}",
                el.area
            )));
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(EitError::Meshing(format!("node {i} belongs to no triangle")));
    }
    Ok(())
}

/// Oriented boundary edges chained into one closed counterclockwise loop.
fn boundary_loop(n: usize, triangles: &[[usize; 3]]) -> Result<Vec<[usize; 2]>> {
    let mut count: HashMap<[usize; 2], (usize, [usize; 2])> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = [a.min(b), a.max(b)];
            let entry = count.entry(key).or_insert((0, [a, b]));
            entry.0 += 1;
        }
    }
    let mut next = vec![usize::MAX; n];
    let mut n_edges = 0;
    let mut start = usize::MAX;
    let mut keys: Vec<_> = count.into_iter().collect();
    keys.sort_unstable_by_key(|(k, _)| *k);
    for (_, (c, [a, b])) in keys {
        match c {
            1 => {
                if next[a] != usize::MAX {
                    return Err(EitError::Meshing(format!("boundary is not manifold at node {a}")));
                }
                next[a] = b;
                n_edges += 1;
                start = start.min(a);
            }
            2 => {}
            _ => return Err(EitError::Meshing("edge shared by more than two triangles".into())),
        }
    }
    if n_edges == 0 {
        return Err(EitError::Meshing("mesh has no boundary".into()));
    }
    let mut loop_edges = Vec::with_capacity(n_edges);
    let mut a = start;
    loop {
        let b = next[a];
        if b == usize::MAX {
            return Err(EitError::Meshing("boundary loop is open".into()));
        }
        loop_edges.push([a, b]);
        a = b;
        if a == start || loop_edges.len() > n_edges {
            break;
        }
    }
    if loop_edges.len() != n_edges {
        return Err(EitError::Meshing(format!(
            "boundary consists of more than one loop ({} of {n_edges} edges reached)",
            loop_edges.len()
        )));
    }
    Ok(loop_edges)
}
