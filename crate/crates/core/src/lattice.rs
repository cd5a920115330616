//! Triangular lattice geometry restricted to a polygonal domain.
//!
//! The lattice is spanned by e1 = (1, 0) and ν = (1/2, √3/2); integer
//! coordinates (p, q) are the source of truth and Cartesian positions are
//! derived as ε(p·e1 + q·ν). Cells come in two orientations,
//!
//!   up   (base b): b, b + e1, b + ν           (counter-clockwise)
//!   down (base b): b, b + e1 − ν, b + e1      (counter-clockwise)
//!
//! and a domain is the family of all ε-cells contained in the polygon,
//! together with the nodes and nearest-neighbor bonds they induce. A cell
//! counts as contained when its three vertices and barycenter lie in the
//! polygon up to a tolerance of 1e-12 times the polygon diameter, so
//! boundary-grazing is deterministic and closed polygons admit cells that
//! touch their boundary.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};

pub const SQRT3: f64 = 1.732050807568877293527446341505872367_f64;

/// The six nearest-neighbor steps in counter-clockwise order starting
/// from +e1: e1, ν, η, -e1, -ν, -η with η = ν - e1.
pub const NEIGHBOR_STEPS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Integer lattice coordinates (p, q) of the node ε(p·e1 + q·ν).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub p: i32,
    pub q: i32,
}

impl NodeId {
    pub fn new(p: i32, q: i32) -> Self {
        NodeId { p, q }
    }

    pub fn position(self, epsilon: f64) -> Vec2 {
        Vec2::new(
            epsilon * (self.p as f64 + 0.5 * self.q as f64),
            epsilon * (SQRT3 / 2.0) * self.q as f64,
        )
    }

    fn offset(self, d: (i32, i32)) -> NodeId {
        NodeId::new(self.p + d.0, self.q + d.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Up,
    Down,
}

/// A lattice cell: ε-translate of T+ or T- based at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleId {
    pub base: NodeId,
    pub orientation: Orientation,
}

impl TriangleId {
    pub fn up(p: i32, q: i32) -> Self {
        TriangleId {
            base: NodeId::new(p, q),
            orientation: Orientation::Up,
        }
    }

    pub fn down(p: i32, q: i32) -> Self {
        TriangleId {
            base: NodeId::new(p, q),
            orientation: Orientation::Down,
        }
    }

    /// Vertices in counter-clockwise order (positive signed area); the base
    /// node comes first for both orientations.
    pub fn vertices(self) -> [NodeId; 3] {
        let b = self.base;
        match self.orientation {
            Orientation::Up => [b, b.offset((1, 0)), b.offset((0, 1))],
            Orientation::Down => [b, b.offset((1, -1)), b.offset((1, 0))],
        }
    }

    pub fn barycenter(self, epsilon: f64) -> Vec2 {
        let b = self.base.position(epsilon);
        let dy = match self.orientation {
            Orientation::Up => SQRT3 / 6.0,
            Orientation::Down => -SQRT3 / 6.0,
        };
        Vec2::new(b.x + 0.5 * epsilon, b.y + dy * epsilon)
    }
}

#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub epsilon: f64,
    pub domain: Polygon,
}

impl LatticeSpec {
    pub fn new(epsilon: f64, domain: Polygon) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lattice spacing must be positive and finite, got {epsilon}"
            )));
        }
        Ok(LatticeSpec { epsilon, domain })
    }

    /// Containment tolerance used for every membership test of this domain.
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.domain.diameter()
    }
}

/// Immutable lattice domain: nodes, bonds, cells and derived index tables.
///
/// All index sets are sorted by their id types, so two builds from equal
/// specs produce identical orderings.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    spec: LatticeSpec,
    nodes: Vec<NodeId>,
    positions: Vec<Vec2>,
    node_index: HashMap<NodeId, u32>,
    /// Canonical bonds (a, b) with `nodes[a] < nodes[b]`.
    bonds: Vec<(u32, u32)>,
    /// Bond index per node and neighbor step, -1 when the bond is absent.
    neighbor_bonds: Vec<[i32; 6]>,
    /// Number of domain cells incident to each bond (1 or 2).
    bond_cell_count: Vec<u8>,
    triangles: Vec<TriangleId>,
    tri_verts: Vec<[u32; 3]>,
    barycenters: Vec<Vec2>,
    triangle_index: HashMap<TriangleId, u32>,
}

pub fn build_domain(spec: LatticeSpec) -> Result<LatticeDomain> {
    let eps = spec.epsilon;
    let tol = spec.tolerance();
    let (lo, hi) = spec.domain.bounding_box();

    let row_h = eps * SQRT3 / 2.0;
    let q_min = (lo.y / row_h).floor() as i64 - 2;
    let q_max = (hi.y / row_h).ceil() as i64 + 2;

    let mut triangles = Vec::new();
    for q in q_min..=q_max {
        let p_min = (lo.x / eps - 0.5 * q as f64).floor() as i64 - 2;
        let p_max = (hi.x / eps - 0.5 * q as f64).ceil() as i64 + 2;
        for p in p_min..=p_max {
            if p < i32::MIN as i64
                || p > i32::MAX as i64
                || q < i32::MIN as i64
                || q > i32::MAX as i64
            {
                return Err(Error::InvalidArgument(
                    "domain too large relative to the lattice spacing".into(),
                ));
            }
            for orientation in [Orientation::Up, Orientation::Down] {
                let t = TriangleId {
                    base: NodeId::new(p as i32, q as i32),
                    orientation,
                };
                let inside = t
                    .vertices()
                    .iter()
                    .all(|v| spec.domain.contains(v.position(eps), tol))
                    && spec.domain.contains(t.barycenter(eps), tol);
                if inside {
                    triangles.push(t);
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyDomain { epsilon: eps });
    }
    triangles.sort_unstable();

    let mut nodes: Vec<NodeId> = triangles.iter().flat_map(|t| t.vertices()).collect();
    nodes.sort_unstable();
    nodes.dedup();

    let node_index: HashMap<NodeId, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i as u32))
        .collect();
    let positions: Vec<Vec2> = nodes.iter().map(|n| n.position(eps)).collect();

    let mut tri_verts = Vec::with_capacity(triangles.len());
    let mut edge_set: Vec<(u32, u32)> = Vec::with_capacity(3 * triangles.len());
    for t in &triangles {
        let vs = t.vertices().map(|v| node_index[&v]);
        for k in 0..3 {
            let (a, b) = (vs[k], vs[(k + 1) % 3]);
            edge_set.push((a.min(b), a.max(b)));
        }
        tri_verts.push(vs);
    }
    edge_set.sort_unstable();
    let mut bonds: Vec<(u32, u32)> = Vec::new();
    let mut bond_cell_count: Vec<u8> = Vec::new();
    for e in edge_set {
        if bonds.last() == Some(&e) {
            *bond_cell_count.last_mut().unwrap() += 1;
        } else {
            bonds.push(e);
            bond_cell_count.push(1);
        }
    }

    let mut neighbor_bonds = vec![[-1i32; 6]; nodes.len()];
    for (bi, &(a, b)) in bonds.iter().enumerate() {
        let (na, nb) = (nodes[a as usize], nodes[b as usize]);
        let d = (nb.p - na.p, nb.q - na.q);
        let da = NEIGHBOR_STEPS
            .iter()
            .position(|&s| s == d)
            .expect("bond step");
        neighbor_bonds[a as usize][da] = bi as i32;
        neighbor_bonds[b as usize][(da + 3) % 6] = bi as i32;
    }

    let barycenters: Vec<Vec2> = triangles.iter().map(|t| t.barycenter(eps)).collect();
    let triangle_index: HashMap<TriangleId, u32> = triangles
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, i as u32))
        .collect();

    Ok(LatticeDomain {
        spec,
        nodes,
        positions,
        node_index,
        bonds,
        neighbor_bonds,
        bond_cell_count,
        triangles,
        tri_verts,
        barycenters,
        triangle_index,
    })
}

impl LatticeDomain {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn polygon(&self) -> &Polygon {
        &self.spec.domain
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn node_position(&self, idx: u32) -> Vec2 {
        self.positions[idx as usize]
    }

    pub fn node_idx(&self, n: NodeId) -> Option<u32> {
        self.node_index.get(&n).copied()
    }

    /// Canonical bond list; each unordered bond appears once with the
    /// lexicographically smaller node first.
    pub fn bonds(&self) -> &[(u32, u32)] {
        &self.bonds
    }

    pub fn bond_nodes(&self, bond: u32) -> (NodeId, NodeId) {
        let (a, b) = self.bonds[bond as usize];
        (self.nodes[a as usize], self.nodes[b as usize])
    }

    /// Index of the bond from node `idx` along neighbor step `dir` (0..6).
    pub fn bond_at(&self, idx: u32, dir: usize) -> Option<u32> {
        let b = self.neighbor_bonds[idx as usize][dir];
        (b >= 0).then_some(b as u32)
    }

    pub fn neighbor_table(&self) -> &[[i32; 6]] {
        &self.neighbor_bonds
    }

    /// Number of domain cells containing the bond (interior bonds have 2).
    pub fn bond_cell_count(&self, bond: u32) -> u8 {
        self.bond_cell_count[bond as usize]
    }

    pub fn triangles(&self) -> &[TriangleId] {
        &self.triangles
    }

    pub fn triangle_idx(&self, t: TriangleId) -> Option<u32> {
        self.triangle_index.get(&t).copied()
    }

    /// CCW vertex indices of cell `ti`.
    pub fn triangle_vertex_indices(&self, ti: u32) -> [u32; 3] {
        self.tri_verts[ti as usize]
    }

    /// CCW vertices of a cell, checked to be part of the domain.
    pub fn triangle_vertices(&self, t: TriangleId) -> Result<[NodeId; 3]> {
        if self.triangle_index.contains_key(&t) {
            Ok(t.vertices())
        } else {
            Err(Error::InvalidArgument(format!(
                "triangle {t:?} is not part of the domain"
            )))
        }
    }

    pub fn barycenters(&self) -> &[Vec2] {
        &self.barycenters
    }

    pub fn barycenter(&self, ti: u32) -> Vec2 {
        self.barycenters[ti as usize]
    }

    /// Nodes with r < |x - center| < R, sorted by id.
    pub fn nodes_in_annulus(&self, center: Vec2, r: f64, big_r: f64) -> Result<Vec<NodeId>> {
        if !(0.0 <= r && r < big_r) {
            return Err(Error::BadAnnulus { r, big_r });
        }
        let (r2, big_r2) = (r * r, big_r * big_r);
        Ok(self
            .nodes
            .iter()
            .zip(&self.positions)
            .filter(|(_, x)| {
                let d2 = (**x - center).norm_sq();
                d2 > r2 && d2 < big_r2
            })
            .map(|(n, _)| *n)
            .collect())
    }

    /// Triangle whose barycenter is nearest to `x`; ties broken by the
    /// lexicographically smallest triangle id (the scan order).
    pub fn nearest_barycenter(&self, x: Vec2) -> u32 {
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (i, b) in self.barycenters.iter().enumerate() {
            let d = (*b - x).norm_sq();
            if d < best_d {
                best_d = d;
                best = i as u32;
            }
        }
        best
    }

    /// Enumerates counter-clockwise wedges: for every node, the pairs of
    /// bonds along adjacent neighbor steps (d, d+1). Each wedge corresponds
    /// to one (cell, vertex) pair in the interior.
    pub fn for_each_wedge(&self, mut f: impl FnMut(u32, u32, u32, usize)) {
        for n in 0..self.nodes.len() {
            let nb = &self.neighbor_bonds[n];
            for d in 0..6 {
                let b1 = nb[d];
                let b2 = nb[(d + 1) % 6];
                if b1 >= 0 && b2 >= 0 {
                    f(n as u32, b1 as u32, b2 as u32, d);
                }
            }
        }
    }

    pub fn count_wedges(&self) -> usize {
        let mut c = 0;
        self.for_each_wedge(|_, _, _, _| c += 1);
        c
    }
}
