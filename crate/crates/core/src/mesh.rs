//! Uniform triangulations of the unit square.
//!
//! `T_1` splits the square along the diagonal from (0,0) to (1,1); every
//! further level is a red refinement (each triangle cut into four similar
//! children through its edge midpoints). The resulting meshes are uniform:
//! the two triangles sharing any interior edge form a parallelogram.
//!
//! Local numbering follows the usual convention: local edge `i` is the edge
//! opposite local vertex `i`. Both triangle orientations of the mesh use the
//! same local numbering up to a point reflection, so per-element constants
//! indexed by local edge agree on all elements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Vec2;

/// Tolerance used by geometric consistency checks.
const GEOM_TOL: f64 = 1e-13;

/// Triangles adjacent to an edge, lower global index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTriangles {
    pub first: usize,
    pub second: Option<usize>,
}

impl EdgeTriangles {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }

    /// The neighbor of `k` across this edge, if any.
    pub fn other(&self, k: usize) -> Option<usize> {
        if self.first == k {
            self.second
        } else if self.second == Some(k) {
            Some(self.first)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    level: u32,
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_tris: Vec<EdgeTriangles>,
    tri_edges: Vec<[usize; 3]>,
    tri_signs: Vec<[f64; 3]>,
    boundary: Vec<bool>,
    parent: Option<Vec<usize>>,
    h: f64,
}

/// Geometric quantities of one triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub vertices: [Vec2; 3],
    pub area: f64,
    pub centroid: Vec2,
    pub diameter: f64,
    /// `|e_i|`, edge opposite vertex `i`.
    pub edge_lengths: [f64; 3],
    /// Unit outward normals `n_i`.
    pub normals: [Vec2; 3],
    /// Unit tangents `t_i`, counterclockwise along the boundary of the element.
    pub tangents: [Vec2; 3],
    pub midpoints: [Vec2; 3],
    /// Distance from vertex `i` to edge `e_i`.
    pub heights: [f64; 3],
    /// Gradients of the barycentric coordinates.
    pub bary_grads: [Vec2; 3],
}

impl ElementGeometry {
    pub fn from_vertices(vertices: [Vec2; 3]) -> Option<Self> {
        let [p0, p1, p2] = vertices;
        let d1 = p1 - p0;
        let d2 = p2 - p0;
        let signed = 0.5 * (d1.x * d2.y - d1.y * d2.x);
        let scale = d1.norm_squared().max(d2.norm_squared());
        if !(signed > GEOM_TOL * scale) {
            return None;
        }
        let area = signed;
        let centroid = (p0 + p1 + p2) / 3.0;
        let mut edge_lengths = [0.0; 3];
        let mut normals = [Vec2::zeros(); 3];
        let mut tangents = [Vec2::zeros(); 3];
        let mut midpoints = [Vec2::zeros(); 3];
        let mut heights = [0.0; 3];
        let mut bary_grads = [Vec2::zeros(); 3];
        for i in 0..3 {
            let a = vertices[(i + 1) % 3];
            let b = vertices[(i + 2) % 3];
            let d = b - a;
            let len = d.norm();
            let t = d / len;
            // CCW orientation: rotating the tangent clockwise points outward.
            let n = Vec2::new(t.y, -t.x);
            edge_lengths[i] = len;
            tangents[i] = t;
            normals[i] = n;
            midpoints[i] = 0.5 * (a + b);
            heights[i] = 2.0 * area / len;
            bary_grads[i] = -n / heights[i];
        }
        let diameter = edge_lengths.iter().cloned().fold(0.0, f64::max);
        Some(Self {
            vertices,
            area,
            centroid,
            diameter,
            edge_lengths,
            normals,
            tangents,
            midpoints,
            heights,
            bary_grads,
        })
    }

    /// Barycentric coordinates of `x`.
    pub fn barycentric(&self, x: Vec2) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, psi) in out.iter_mut().enumerate() {
            *psi = self.bary_grads[i].dot(&(x - self.vertices[(i + 1) % 3]));
        }
        out
    }

    /// Point with the given barycentric coordinates.
    pub fn point(&self, bary: [f64; 3]) -> Vec2 {
        self.vertices[0] * bary[0] + self.vertices[1] * bary[1] + self.vertices[2] * bary[2]
    }

    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        self.barycentric(x).iter().all(|&b| b >= -tol)
    }
}

/// Data returned by [`Triangulation::boundary_companion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryCompanion {
    /// Triangle containing the boundary edge.
    pub element: usize,
    /// Neighbor of `element` across `interior_edge`.
    pub neighbor: usize,
    /// Interior edge shared by `element` and `neighbor`.
    pub interior_edge: usize,
    /// Edge of `neighbor` sharing no vertex with the boundary edge.
    pub far_edge: usize,
}

/// Plain-index mesh dump.
#[derive(Debug, Clone, Serialize)]
pub struct MeshDump {
    pub level: u32,
    pub h: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub boundary_edges: Vec<usize>,
}

impl Triangulation {
    /// Uniform triangulation `T_level` of the unit square.
    pub fn build_uniform(level: u32) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidLevel(level));
        }
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        // The second triangle is the point reflection of the first through
        // (1/2, 1/2), with vertices listed in reflected order.
        let triangles = vec![[0, 1, 2], [2, 3, 0]];
        let mut mesh = Self::from_parts(1, vertices, triangles, None)?;
        for _ in 1..level {
            mesh = mesh.refine();
        }
        Ok(mesh)
    }

    /// Builds the connectivity of a mesh from vertices and CCW triangles.
    pub fn from_parts(
        level: u32,
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        parent: Option<Vec<usize>>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut h: f64 = 0.0;
        for (k, t) in triangles.iter().enumerate() {
            let pts = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            match ElementGeometry::from_vertices(pts) {
                Some(g) => h = h.max(g.diameter),
                None => {
                    let d1 = pts[1] - pts[0];
                    let d2 = pts[2] - pts[0];
                    return Err(Error::DegenerateTriangle(
                        k,
                        0.5 * (d1.x * d2.y - d1.y * d2.x),
                    ));
                }
            }
        }

        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| sorted_pair(t[(i + 1) % 3], t[(i + 2) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::with_capacity(2); edges.len()];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let key = sorted_pair(t[(i + 1) % 3], t[(i + 2) % 3]);
                let e = edges.binary_search(&key).expect("edge collected above");
                tri_edges[k][i] = e;
                adjacency[e].push(k);
            }
        }
        let mut edge_tris = Vec::with_capacity(edges.len());
        for (e, adj) in adjacency.iter().enumerate() {
            let et = match adj.as_slice() {
                [a] => EdgeTriangles {
                    first: *a,
                    second: None,
                },
                [a, b] => EdgeTriangles {
                    first: (*a).min(*b),
                    second: Some((*a).max(*b)),
                },
                _ => {
                    return Err(Error::NonUniformMesh(format!(
                        "edge {e} has {} adjacent triangles",
                        adj.len()
                    )))
                }
            };
            edge_tris.push(et);
        }
        let boundary = edge_tris.iter().map(EdgeTriangles::is_boundary).collect();
        let tri_signs = tri_edges
            .iter()
            .enumerate()
            .map(|(k, te)| te.map(|e| if edge_tris[e].first == k { 1.0 } else { -1.0 }))
            .collect();

        Ok(Self {
            level,
            vertices,
            triangles,
            edges,
            edge_tris,
            tri_edges,
            tri_signs,
            boundary,
            parent,
            h,
        })
    }

    /// Red refinement: every triangle is split into four half-sized children.
    ///
    /// Child `4k + j` of triangle `k` keeps vertex `j` for `j < 3`; child
    /// `4k + 3` is the inner triangle, point-reflected with respect to the
    /// parent, whose local vertex `i` is the midpoint of parent edge `i`.
    pub fn refine(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(
            self.edges
                .iter()
                .map(|&[a, b]| 0.5 * (self.vertices[a] + self.vertices[b])),
        );
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent = Vec::with_capacity(4 * self.triangles.len());
        for (k, t) in self.triangles.iter().enumerate() {
            let m = self.tri_edges[k].map(|e| nv + e);
            triangles.push([t[0], m[2], m[1]]);
            triangles.push([m[2], t[1], m[0]]);
            triangles.push([m[1], m[0], t[2]]);
            triangles.push([m[0], m[1], m[2]]);
            parent.extend([k; 4]);
        }
        Self::from_parts(self.level + 1, vertices, triangles, Some(parent))
            .expect("red refinement of a valid mesh is valid")
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Mesh size: the largest triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_triangles(&self, e: usize) -> EdgeTriangles {
        self.edge_tris[e]
    }

    /// Global edge indices of triangle `k`, local edge `i` opposite local vertex `i`.
    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.tri_edges[k]
    }

    /// `+1` where the outward normal of `k` on local edge `i` equals the
    /// global edge normal, `-1` otherwise.
    pub fn edge_signs(&self, k: usize) -> [f64; 3] {
        self.tri_signs[k]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary[e]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(e, _)| e)
    }

    /// Parent triangle in the next coarser mesh, absent on `T_1`.
    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent.as_ref().map(|p| p[k])
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec2 {
        let [a, b] = self.edges[e];
        0.5 * (self.vertices[a] + self.vertices[b])
    }

    /// Global unit normal of edge `e`: the outward normal of its lower-index triangle.
    pub fn edge_normal(&self, e: usize) -> Vec2 {
        let k = self.edge_tris[e].first;
        let local = self
            .local_edge_index(k, e)
            .expect("edge belongs to its triangle");
        self.geometry(k).normals[local]
    }

    pub fn local_edge_index(&self, k: usize, e: usize) -> Option<usize> {
        self.tri_edges[k].iter().position(|&x| x == e)
    }

    pub fn geometry(&self, k: usize) -> ElementGeometry {
        let t = self.triangles[k];
        ElementGeometry::from_vertices([
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ])
        .expect("triangles are validated at construction")
    }

    /// Element data for the boundary postprocessing rule of a boundary edge.
    ///
    /// The interior edge is the smallest-index interior edge of the element
    /// holding `e`; the far edge is the edge of the neighbor across it that
    /// shares no vertex with `e`.
    pub fn boundary_companion(&self, e: usize) -> Result<BoundaryCompanion> {
        if e >= self.edges.len() {
            return Err(Error::IndexOutOfRange {
                index: e,
                len: self.edges.len(),
            });
        }
        if !self.boundary[e] {
            return Err(Error::NotBoundaryEdge(e));
        }
        let element = self.edge_tris[e].first;
        let interior_edge = self.tri_edges[element]
            .iter()
            .copied()
            .filter(|&x| !self.boundary[x])
            .min()
            .ok_or(Error::NoInteriorEdge(element))?;
        let neighbor = self.edge_tris[interior_edge]
            .other(element)
            .expect("interior edge has two triangles");
        let [a, b] = self.edges[e];
        let far_edge = self.tri_edges[neighbor]
            .iter()
            .copied()
            .find(|&x| {
                let [c, d] = self.edges[x];
                c != a && c != b && d != a && d != b
            })
            .ok_or_else(|| {
                Error::NonUniformMesh(format!(
                    "no edge of triangle {neighbor} is disjoint from edge {e}"
                ))
            })?;
        Ok(BoundaryCompanion {
            element,
            neighbor,
            interior_edge,
            far_edge,
        })
    }

    /// Checks that every pair of triangles sharing an interior edge forms a
    /// parallelogram.
    pub fn check_uniform(&self) -> Result<()> {
        for (e, et) in self.edge_tris.iter().enumerate() {
            let Some(k2) = et.second else { continue };
            let k1 = et.first;
            let mid = self.edge_midpoint(e);
            let opp = |k: usize| {
                let i = self.local_edge_index(k, e).expect("edge in triangle");
                self.vertices[self.triangles[k][i]]
            };
            let reflected = 2.0 * mid - opp(k1);
            if (reflected - opp(k2)).norm() > GEOM_TOL * self.h.max(1.0) {
                return Err(Error::NonUniformMesh(format!(
                    "triangles {k1} and {k2} do not form a parallelogram"
                )));
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> MeshDump {
        MeshDump {
            level: self.level,
            h: self.h,
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
            triangles: self.triangles.clone(),
            edges: self.edges.clone(),
            boundary_edges: self.boundary_edges().collect(),
        }
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn level_zero_rejected() {
        assert_eq!(
            Triangulation::build_uniform(0).unwrap_err(),
            Error::InvalidLevel(0)
        );
    }

    #[test]
    fn small_meshes_have_expected_counts() {
        let t1 = Triangulation::build_uniform(1).unwrap();
        assert_eq!(
            (t1.num_triangles(), t1.num_vertices(), t1.num_edges()),
            (2, 4, 5)
        );
        let t2 = Triangulation::build_uniform(2).unwrap();
        assert_eq!(
            (t2.num_triangles(), t2.num_vertices(), t2.num_edges()),
            (8, 9, 16)
        );
        let t4 = Triangulation::build_uniform(4).unwrap();
        assert_eq!(t4.num_triangles(), 128);
        assert_relative_eq!(t4.h(), 2f64.sqrt() / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn refinement_halves_h_and_tracks_parents() {
        let t2 = Triangulation::build_uniform(2).unwrap();
        let t3 = t2.refine();
        assert_eq!(t3.level(), 3);
        assert_eq!(t3.h(), t2.h() / 2.0);
        for k in 0..t3.num_triangles() {
            let p = t3.parent(k).unwrap();
            let g = t2.geometry(p);
            assert!(g.contains(t3.geometry(k).centroid, 1e-12));
        }
        assert!(t2.parent(0).is_some());
        assert!(Triangulation::build_uniform(1).unwrap().parent(0).is_none());
    }

    #[test]
    fn structural_invariants_through_level_eight() {
        let mut mesh = Triangulation::build_uniform(1).unwrap();
        for level in 1..=8u32 {
            assert_eq!(mesh.level(), level);
            let euler =
                mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_triangles() as i64;
            assert_eq!(euler, 1);
            assert_eq!(mesh.num_triangles(), 2 * 4usize.pow(level - 1));
            assert_eq!(mesh.h(), 2f64.sqrt() * 2f64.powi(1 - level as i32));
            mesh.check_uniform().unwrap();
            for e in 0..mesh.num_edges() {
                let et = mesh.edge_triangles(e);
                assert_eq!(et.is_boundary(), mesh.is_boundary_edge(e));
                if let Some(s) = et.second {
                    assert!(et.first < s);
                }
            }
            for k in 0..mesh.num_triangles() {
                assert!(mesh.geometry(k).area > 0.0);
            }
            if level < 8 {
                mesh = mesh.refine();
            }
        }
    }

    #[test]
    fn reference_triangle_geometry() {
        let g = ElementGeometry::from_vertices([
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_relative_eq!(g.area, 0.5);
        assert_relative_eq!(g.centroid, Vec2::new(1.0 / 3.0, 1.0 / 3.0));
        assert_relative_eq!(g.edge_lengths[0], 2f64.sqrt());
        assert_relative_eq!(g.heights[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g.heights[0] * g.edge_lengths[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.bary_grads[0], Vec2::new(-1.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ];
        let err = Triangulation::from_parts(1, verts, vec![[0, 1, 2]], None).unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle(0, _)));
    }

    #[test]
    fn element_identities_hold_on_every_element() {
        let mesh = Triangulation::build_uniform(5).unwrap();
        for k in 0..mesh.num_triangles() {
            let g = mesh.geometry(k);
            let sum = g.bary_grads[0] + g.bary_grads[1] + g.bary_grads[2];
            assert!(sum.norm() < 1e-13 / mesh.h());
            for i in 0..3 {
                assert_relative_eq!(
                    g.heights[i] * g.edge_lengths[i],
                    2.0 * g.area,
                    max_relative = 1e-13
                );
                assert_relative_eq!(
                    g.bary_grads[i],
                    -g.normals[i] / g.heights[i],
                    max_relative = 1e-13
                );
                let psi = g.barycentric(g.vertices[i]);
                assert_relative_eq!(psi[i], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn local_edge_directions_agree_across_elements() {
        let mesh = Triangulation::build_uniform(4).unwrap();
        let reference = mesh.geometry(0);
        for k in 0..mesh.num_triangles() {
            let g = mesh.geometry(k);
            for i in 0..3 {
                let cross = g.tangents[i].perp(&reference.tangents[i]);
                assert!(cross.abs() < 1e-13, "element {k} edge {i}");
                assert_relative_eq!(
                    g.edge_lengths[i] / g.diameter,
                    reference.edge_lengths[i] / reference.diameter
                );
            }
        }
    }

    #[test]
    fn boundary_companion_properties() {
        for level in 2..=5 {
            let mesh = Triangulation::build_uniform(level).unwrap();
            for e in mesh.boundary_edges() {
                let c = mesh.boundary_companion(e).unwrap();
                assert_eq!(c, mesh.boundary_companion(e).unwrap());
                assert_ne!(c.element, c.neighbor);
                assert!(!mesh.is_boundary_edge(c.interior_edge));
                assert!(!mesh.is_boundary_edge(c.far_edge));
                let shared: Vec<_> = mesh
                    .triangle_edges(c.element)
                    .into_iter()
                    .filter(|x| mesh.triangle_edges(c.neighbor).contains(x))
                    .collect();
                assert_eq!(shared, vec![c.interior_edge]);
                let [a, b] = mesh.edges()[e];
                let [p, q] = mesh.edges()[c.far_edge];
                assert!(![a, b].contains(&p) && ![a, b].contains(&q));
                // The three midpoints are collinear and equally spaced.
                let m = mesh.edge_midpoint(e);
                let m1 = mesh.edge_midpoint(c.interior_edge);
                let m2 = mesh.edge_midpoint(c.far_edge);
                assert!((2.0 * m1 - m2 - m).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_companion_rejects_interior_edges() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let interior = (0..mesh.num_edges())
            .find(|&e| !mesh.is_boundary_edge(e))
            .unwrap();
        assert_eq!(
            mesh.boundary_companion(interior).unwrap_err(),
            Error::NotBoundaryEdge(interior)
        );
        // On the coarsest mesh every far edge lies on the boundary.
        let t1 = Triangulation::build_uniform(1).unwrap();
        for e in t1.boundary_edges() {
            assert!(t1.is_boundary_edge(t1.boundary_companion(e).unwrap().far_edge));
        }
    }

    #[test]
    fn edge_normals_point_from_lower_to_higher_triangle() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        for e in 0..mesh.num_edges() {
            let et = mesh.edge_triangles(e);
            let n = mesh.edge_normal(e);
            let m = mesh.edge_midpoint(e);
            let c1 = mesh.geometry(et.first).centroid;
            assert!(n.dot(&(m - c1)) > 0.0);
            if let Some(k2) = et.second {
                let c2 = mesh.geometry(k2).centroid;
                assert!(n.dot(&(c2 - m)) > 0.0);
                let i = mesh.local_edge_index(k2, e).unwrap();
                assert_eq!(mesh.edge_signs(k2)[i], -1.0);
            }
        }
    }

    #[test]
    fn dump_has_zero_based_indices() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let dump = mesh.dump();
        let json = serde_json::to_value(&dump).unwrap();
        assert_eq!(json["vertices"].as_array().unwrap().len(), 9);
        assert_eq!(json["boundary_edges"].as_array().unwrap().len(), 8);
        assert!(dump.triangles.iter().flatten().all(|&v| v < 9));
    }
}
