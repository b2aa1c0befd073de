use super::mesh::{Mesh, Point};
use crate::error::{EitError, Result};

/// One boundary edge of an electrode arc with its arclength span measured
/// from the start of the arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcEdge {
    /// Index into [`Mesh::boundary_edges`].
    pub edge: usize,
    pub nodes: [usize; 2],
    pub s_start: f64,
    pub s_end: f64,
}

/// Electrodes as connected arcs of boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeSet {
    half_width: f64,
    arcs: Vec<Vec<ArcEdge>>,
    arc_lengths: Vec<f64>,
    midpoints: Vec<Point>,
}

impl ElectrodeSet {
    /// Validates the arcs (given as boundary-edge indices, any order) against the mesh.
    pub fn new(mesh: &Mesh, arcs: Vec<Vec<usize>>, half_width: f64) -> Result<Self> {
        if arcs.len() < 2 {
            return Err(EitError::Parameter(format!("need at least 2 electrodes, got {}", arcs.len())));
        }
        if !(half_width > 0.0) {
            return Err(EitError::Parameter("electrode half-width must be positive".into()));
        }
        let nb = mesh.boundary_edges().len();
        let mut owner = vec![usize::MAX; mesh.n_nodes()];
        let mut out_arcs = Vec::with_capacity(arcs.len());
        let mut arc_lengths = Vec::with_capacity(arcs.len());
        let mut midpoints = Vec::with_capacity(arcs.len());

        for (m, mut idx) in arcs.into_iter().enumerate() {
            if idx.is_empty() {
                return Err(EitError::Meshing(format!("electrode {m} covers no boundary edge")));
            }
            if let Some(&bad) = idx.iter().find(|&&e| e >= nb) {
                return Err(EitError::Input(format!("electrode {m} references boundary edge {bad} >= {nb}")));
            }
            idx.sort_unstable();
            idx.dedup();
            // Rotate so that an arc wrapping past the loop start is contiguous.
            if let Some(gap) = idx.windows(2).position(|w| w[1] != w[0] + 1) {
                idx.rotate_left(gap + 1);
            }
            let edges: Vec<[usize; 2]> = idx.iter().map(|&e| mesh.boundary_edges()[e]).collect();
            if edges.windows(2).any(|w| w[0][1] != w[1][0]) {
                return Err(EitError::Meshing(format!("electrode {m} is not a connected arc")));
            }
            if edges.len() == nb {
                return Err(EitError::Meshing(format!("electrode {m} covers the whole boundary")));
            }
            for e in &edges {
                for &v in e {
                    if owner[v] != usize::MAX && owner[v] != m {
                        return Err(EitError::Meshing(format!(
                            "electrodes {} and {m} share node {v}",
                            owner[v]
                        )));
                    }
                    owner[v] = m;
                }
            }

            let mut s = 0.0;
            let mut arc = Vec::with_capacity(idx.len());
            let mut longest: f64 = 0.0;
            for (&e, &nodes) in idx.iter().zip(&edges) {
                let len = mesh.edge_length(nodes);
                longest = longest.max(len);
                arc.push(ArcEdge { edge: e, nodes, s_start: s, s_end: s + len });
                s += len;
            }
            // neighbouring edges count towards the tolerance as well
            let prev = mesh.boundary_edges()[(idx[0] + nb - 1) % nb];
            let next = mesh.boundary_edges()[(idx[idx.len() - 1] + 1) % nb];
            longest = longest.max(mesh.edge_length(prev)).max(mesh.edge_length(next));
            if (s - 2.0 * half_width).abs() > longest {
                return Err(EitError::Meshing(format!(
                    "electrode {m} has arclength {s} but expected {} within {longest}",
                    2.0 * half_width
                )));
            }
            midpoints.push(point_at(mesh, &arc, 0.5 * s));
            arc_lengths.push(s);
            out_arcs.push(arc);
        }
        Ok(Self { half_width, arcs: out_arcs, arc_lengths, midpoints })
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn arc(&self, m: usize) -> &[ArcEdge] {
        &self.arcs[m]
    }

    /// Boundary-edge indices of electrode `m` in arc order.
    pub fn edge_indices(&self, m: usize) -> Vec<usize> {
        self.arcs[m].iter().map(|a| a.edge).collect()
    }

    pub fn arc_length(&self, m: usize) -> f64 {
        self.arc_lengths[m]
    }

    pub fn midpoint(&self, m: usize) -> Point {
        self.midpoints[m]
    }

    /// Distance from the arc midpoint in the contact-profile coordinate:
    /// arclength rescaled so the arc ends sit at `contact_radius`.
    pub fn contact_coordinate(&self, m: usize, s: f64, contact_radius: f64) -> f64 {
        let len = self.arc_lengths[m];
        (s - 0.5 * len).abs() * 2.0 * contact_radius / len
    }
}

fn point_at(mesh: &Mesh, arc: &[ArcEdge], s: f64) -> Point {
    let e = arc
        .iter()
        .find(|e| s <= e.s_end)
        .unwrap_or_else(|| arc.last().expect("arc is nonempty"));
    let t = (s - e.s_start) / (e.s_end - e.s_start);
    let a = mesh.node(e.nodes[0]);
    let b = mesh.node(e.nodes[1]);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}
