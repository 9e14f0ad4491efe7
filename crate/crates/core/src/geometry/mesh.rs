//! Triangulation of the ρ–z computational domain.
//!
//! The domain is a rectangle in the half-plane `ρ ≥ 0`: a physical region
//! (air plus the body) wrapped by a perfectly matched layer on the outer side
//! and on the top (and bottom, in free-space mode). With a ground plane the
//! rectangle starts at `z = 0`.

use serde::{Deserialize, Serialize};
use spade::{
    handles::FixedVertexHandle, AngleLimit, ConstrainedDelaunayTriangulation, Point2,
    RefinementParameters, Triangulation,
};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::profile::{point_in_polygon, point_segment_distance, BoRProfile};
use crate::constants::wavelength;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Body,
    Air,
    Pml,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Axis,
    Ground,
    PmlOuter,
}

/// Extent of the physical region and the absorbing layer around it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBounds {
    /// Outer radius of the physical region.
    pub air_radius: f64,
    /// Top of the physical region.
    pub air_top: f64,
    /// Bottom of the physical region (0 with a ground plane).
    pub air_bottom: f64,
    pub pml_thickness: f64,
    pub ground: bool,
}

impl DomainBounds {
    pub fn rho_max(&self) -> f64 {
        self.air_radius + self.pml_thickness
    }

    pub fn z_max(&self) -> f64 {
        self.air_top + self.pml_thickness
    }

    pub fn z_min(&self) -> f64 {
        if self.ground {
            0.0
        } else {
            self.air_bottom - self.pml_thickness
        }
    }

    pub fn in_physical(&self, p: [f64; 2]) -> bool {
        p[0] >= 0.0 && p[0] <= self.air_radius && p[1] <= self.air_top && p[1] >= self.air_bottom
    }
}

/// Everything the mesher needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub body: BoRProfile,
    pub bounds: DomainBounds,
    /// Target edge length in air and PML (m).
    pub target_edge_length: f64,
    /// Target edge length inside the body (m).
    pub body_edge_length: f64,
}

/// Body edge length is `λ_body / BODY_CELLS_PER_WAVELENGTH` with
/// `λ_body = λ₀ / √|ε_r|`; second-order elements resolve that comfortably.
pub const BODY_CELLS_PER_WAVELENGTH: f64 = 4.0;
/// Air cells per free-space wavelength.
pub const AIR_CELLS_PER_WAVELENGTH: f64 = 10.0;
/// Air clearance between the body and the PML, in wavelengths.
pub const AIR_CLEARANCE_WAVELENGTHS: f64 = 0.5;
/// Default PML thickness, in wavelengths.
pub const PML_THICKNESS_WAVELENGTHS: f64 = 0.5;
/// Interior seed spacing relative to the target edge length.
const LATTICE_FILL: f64 = 0.95;

impl DomainSpec {
    /// Default domain around `body`: half a wavelength of air, half a wavelength
    /// of PML, λ₀/10 cells in air and λ_body/4 cells in the body.
    pub fn around(body: BoRProfile, freq: f64, body_eps: C64, ground: bool) -> Result<Self> {
        let lambda = wavelength(freq);
        let clearance = AIR_CLEARANCE_WAVELENGTHS * lambda;
        let h_air = lambda / AIR_CELLS_PER_WAVELENGTH;
        let h_body = (lambda / (BODY_CELLS_PER_WAVELENGTH * body_eps.norm().sqrt())).min(h_air);
        let bounds = DomainBounds {
            air_radius: body.max_rho() + clearance,
            air_top: body.max_z() + clearance,
            air_bottom: if ground { 0.0 } else { body.min_z() - clearance },
            pml_thickness: PML_THICKNESS_WAVELENGTHS * lambda,
            ground,
        };
        let spec = DomainSpec {
            body,
            bounds,
            target_edge_length: h_air,
            body_edge_length: h_body,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Multiplies both target edge lengths by `factor`.
    pub fn with_mesh_scale(mut self, factor: f64) -> Self {
        self.target_edge_length *= factor;
        self.body_edge_length *= factor;
        self
    }

    /// Grows the physical region so that it reaches `rho` and `z_top`.
    pub fn enlarged_to(mut self, rho: f64, z_top: f64) -> Self {
        self.bounds.air_radius = self.bounds.air_radius.max(rho);
        self.bounds.air_top = self.bounds.air_top.max(z_top);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.pml_thickness > 0.0) {
            return Err(Error::Parameter("PML thickness must be positive".into()));
        }
        if !(self.target_edge_length > 0.0 && self.body_edge_length > 0.0) {
            return Err(Error::Parameter("target edge lengths must be positive".into()));
        }
        if self.body.touches_ground() && !b.ground {
            return Err(Error::Geometry("body stands on z = 0 but the domain has no ground".into()));
        }
        let clearance = 2.0 * self.target_edge_length;
        let rho_gap = b.air_radius - self.body.max_rho();
        let top_gap = b.air_top - self.body.max_z();
        let bottom_gap = if b.ground { f64::INFINITY } else { self.body.min_z() - b.air_bottom };
        if b.ground && self.body.min_z() < -1e-12 {
            return Err(Error::Geometry("body extends below the ground".into()));
        }
        if rho_gap < clearance || top_gap < clearance || bottom_gap < clearance {
            return Err(Error::Geometry(format!(
                "body needs a clearance of at least {clearance} m to the PML (got ρ: {rho_gap}, top: {top_gap}, bottom: {bottom_gap})"
            )));
        }
        Ok(())
    }
}

/// Conforming triangulation of the ρ–z domain with region and boundary tags.
///
/// Degrees of freedom for the second-order mixed elements:
/// * in-plane (curl-conforming) unknowns: two per edge followed by two per
///   triangle, `Q = 2E + 2T`;
/// * out-of-plane (nodal, for `ρE_φ`) unknowns: one per node followed by one
///   per edge, `Q' = N + E`.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    boundary: Vec<(usize, BoundaryTag)>,
    bounds: DomainBounds,
    locator: Locator,
}

impl Mesh2D {
    /// Builds the mesh topology from raw parts. Triangles are reoriented
    /// counter-clockwise; boundary edges are tagged from their position.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        bounds: DomainBounds,
    ) -> Result<Self> {
        if regions.len() != triangles.len() {
            return Err(Error::Consistency("one region tag per triangle required".into()));
        }
        for t in &mut triangles {
            let a = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if a.abs() <= 1e-300 {
                return Err(Error::Mesh {
                    a: nodes[t[0]],
                    b: nodes[t[1]],
                    reason: format!("degenerate triangle with third vertex {:?}", nodes[t[2]]),
                });
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_count: Vec<u8> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[idx] += 1;
                te[k] = idx;
            }
            tri_edges.push(te);
        }
        let mut boundary = Vec::new();
        for (e, &count) in edge_count.iter().enumerate() {
            match count {
                1 => {
                    let [a, b] = edges[e];
                    let (pa, pb) = (nodes[a], nodes[b]);
                    let tag = if pa[0].abs() <= 1e-12 && pb[0].abs() <= 1e-12 {
                        BoundaryTag::Axis
                    } else if bounds.ground && pa[1].abs() <= 1e-12 && pb[1].abs() <= 1e-12 {
                        BoundaryTag::Ground
                    } else {
                        BoundaryTag::PmlOuter
                    };
                    boundary.push((e, tag));
                }
                2 => {}
                _ => {
                    let [a, b] = edges[e];
                    return Err(Error::Mesh {
                        a: nodes[a],
                        b: nodes[b],
                        reason: format!("edge shared by {count} triangles"),
                    });
                }
            }
        }
        let locator = Locator::build(&nodes, &triangles);
        Ok(Mesh2D {
            nodes,
            triangles,
            regions,
            edges,
            tri_edges,
            boundary,
            bounds,
            locator,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, t: usize) -> Region {
        self.regions[t]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn boundary_edges(&self) -> &[(usize, BoundaryTag)] {
        &self.boundary
    }

    pub fn bounds(&self) -> &DomainBounds {
        &self.bounds
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of in-plane (edge-element) unknowns `Q`.
    pub fn num_t_dofs(&self) -> usize {
        2 * self.edges.len() + 2 * self.triangles.len()
    }

    /// Number of nodal unknowns `Q'` for `ρE_φ`.
    pub fn num_phi_dofs(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_t_dofs() + self.num_phi_dofs()
    }

    /// Global indices of the 8 in-plane unknowns of triangle `t`, in local
    /// order: (Whitney, gradient) for local edges 0, 1, 2, then the two face
    /// functions.
    pub fn t_dofs(&self, t: usize) -> [usize; 8] {
        let e = self.tri_edges[t];
        let f = 2 * self.edges.len() + 2 * t;
        [
            2 * e[0],
            2 * e[0] + 1,
            2 * e[1],
            2 * e[1] + 1,
            2 * e[2],
            2 * e[2] + 1,
            f,
            f + 1,
        ]
    }

    /// Global indices (offset by `Q`) of the 6 nodal unknowns of triangle `t`:
    /// three vertices then three edge midpoints.
    pub fn phi_dofs(&self, t: usize) -> [usize; 6] {
        let q = self.num_t_dofs();
        let n = self.nodes.len();
        let v = self.triangles[t];
        let e = self.tri_edges[t];
        [q + v[0], q + v[1], q + v[2], q + n + e[0], q + n + e[1], q + n + e[2]]
    }

    /// +1 when local edge `k` of triangle `t` runs from the lower to the
    /// higher global node index, -1 otherwise.
    pub fn edge_sign(&self, t: usize, k: usize) -> f64 {
        let v = self.triangles[t];
        if v[k] < v[(k + 1) % 3] {
            1.0
        } else {
            -1.0
        }
    }

    pub fn area(&self, t: usize) -> f64 {
        let v = self.triangles[t];
        signed_area(self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]])
    }

    pub fn longest_edge(&self, t: usize) -> f64 {
        let v = self.triangles[t];
        (0..3)
            .map(|k| dist(self.nodes[v[k]], self.nodes[v[(k + 1) % 3]]))
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let v = self.triangles[t];
        let p = [self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]]];
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn count_region(&self, r: Region) -> usize {
        self.regions.iter().filter(|&&x| x == r).count()
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.nodes, &self.triangles, p)
    }

    /// Writes the plain-text mesh format (see the repository docs).
    pub fn export_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# borfem mesh v1");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (i, (t, r)) in self.triangles.iter().zip(&self.regions).enumerate() {
            let tag = match r {
                Region::Body => "BODY",
                Region::Air => "AIR",
                Region::Pml => "PML",
            };
            let _ = writeln!(s, "{i} {} {} {} {tag}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for &(e, tag) in &self.boundary {
            let tag = match tag {
                BoundaryTag::Axis => "AXIS",
                BoundaryTag::Ground => "GROUND",
                BoundaryTag::PmlOuter => "PML_OUTER",
            };
            let [a, b] = self.edges[e];
            let _ = writeln!(s, "{a} {b} {tag}");
        }
        s
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)`.
pub fn barycentric(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> [f64; 3] {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Clone, Debug)]
struct Locator {
    origin: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn build(nodes: &[[f64; 2]], triangles: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if triangles.is_empty() {
            return Locator {
                origin: lo,
                cell: 1.0,
                dims: [0, 0],
                buckets: Vec::new(),
            };
        }
        let area = (hi[0] - lo[0]).max(1e-12) * (hi[1] - lo[1]).max(1e-12);
        let cell = (area / triangles.len() as f64).sqrt() * 2.0;
        let dims = [
            ((hi[0] - lo[0]) / cell).ceil() as usize + 1,
            ((hi[1] - lo[1]) / cell).ceil() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (ti, t) in triangles.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in t {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(nodes[v][d]);
                    thi[d] = thi[d].max(nodes[v][d]);
                }
            }
            let i0 = ((tlo[0] - lo[0]) / cell).floor() as usize;
            let i1 = (((thi[0] - lo[0]) / cell).floor() as usize).min(dims[0] - 1);
            let j0 = ((tlo[1] - lo[1]) / cell).floor() as usize;
            let j1 = (((thi[1] - lo[1]) / cell).floor() as usize).min(dims[1] - 1);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[j * dims[0] + i].push(ti as u32);
                }
            }
        }
        Locator {
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn locate(
        &self,
        nodes: &[[f64; 2]],
        triangles: &[[usize; 3]],
        p: [f64; 2],
    ) -> Option<(usize, [f64; 3])> {
        if self.dims[0] == 0 {
            return None;
        }
        let fi = (p[0] - self.origin[0]) / self.cell;
        let fj = (p[1] - self.origin[1]) / self.cell;
        if fi < -1e-9 || fj < -1e-9 {
            return None;
        }
        let i = (fi.max(0.0).floor() as usize).min(self.dims[0] - 1);
        let j = (fj.max(0.0).floor() as usize).min(self.dims[1] - 1);
        if fi.floor() as usize > self.dims[0] || fj.floor() as usize > self.dims[1] {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &ti in &self.buckets[j * self.dims[0] + i] {
            let t = triangles[ti as usize];
            let l = barycentric(nodes[t[0]], nodes[t[1]], nodes[t[2]], p);
            let min = l[0].min(l[1]).min(l[2]);
            if min >= 0.0 {
                return Some((ti as usize, l));
            }
            if best.as_ref().map_or(true, |b| min > b.2) {
                best = Some((ti as usize, l, min));
            }
        }
        // Points on shared edges may fall marginally outside every candidate.
        best.filter(|b| b.2 > -1e-10).map(|b| (b.0, b.1))
    }
}

/// An axis-aligned constraint line split at breakpoints, each interval with
/// its own maximum spacing.
struct Polyline {
    points: Vec<[f64; 2]>,
}

fn line_with_breaks(a: [f64; 2], b: [f64; 2], breaks: &[(f64, f64)], default_h: f64) -> Polyline {
    // Axis-aligned line; `breaks` lists (coordinate along the line, spacing of
    // the interval ending there). Break points are reproduced bit-exactly.
    let d = if a[0] == b[0] { 1 } else { 0 };
    let (lo, hi) = (a[d].min(b[d]), a[d].max(b[d]));
    let mut stops: Vec<(f64, f64)> = breaks
        .iter()
        .copied()
        .filter(|&(c, _)| c > lo && c < hi)
        .collect();
    stops.sort_by(|x, y| x.0.total_cmp(&y.0));
    stops.push((hi, default_h));
    let at = |c: f64| {
        let mut p = a;
        p[d] = c;
        p
    };
    let mut pts = vec![at(lo)];
    let mut c0 = lo;
    for &(c1, h) in &stops {
        let n = (((c1 - c0) / h).ceil() as usize).max(1);
        for i in 1..n {
            pts.push(at(c0 + (c1 - c0) * i as f64 / n as f64));
        }
        pts.push(at(c1));
        c0 = c1;
    }
    Polyline { points: pts }
}

/// Meshes coarser than this fraction of the air clearance and PML thickness
/// are never produced directly; finer targets come from uniform refinement.
const COARSEST_CELLS_PER_GAP: f64 = 2.5;
/// Base meshes aim slightly below the target so that projecting refined
/// boundary points onto curved generatrices keeps every edge within it.
const SIZE_MARGIN: f64 = 0.98;

/// Triangulates the domain described by `spec`.
///
/// A constrained Delaunay mesh is generated at `2^L` times the target sizes,
/// with `L` fixed by the domain geometry, and then split uniformly `L` times
/// (each triangle into four, new boundary points projected onto the body
/// generatrix). Halving the targets therefore quadruples the element count.
pub fn triangulate(spec: &DomainSpec) -> Result<Mesh2D> {
    spec.validate()?;
    let levels = refinement_levels(spec);
    let scale = f64::from(1u32 << levels);
    let mut base = base_triangulation(
        spec,
        spec.target_edge_length * scale,
        spec.body_edge_length * scale,
    )?;
    for _ in 0..levels {
        base = red_refine(base, &spec.body);
    }
    let BaseMesh {
        nodes,
        triangles,
        regions,
        ..
    } = base;
    let b = spec.bounds;
    // Renumber nodes in a geometric order for a deterministic, banded layout.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| nodes[i][1].total_cmp(&nodes[j][1]).then(nodes[i][0].total_cmp(&nodes[j][0])));
    let mut inverse = vec![0; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        inverse[old] = new;
    }
    let nodes: Vec<[f64; 2]> = order.iter().map(|&i| nodes[i]).collect();
    let mut tagged: Vec<([usize; 3], Region)> = triangles
        .into_iter()
        .zip(regions)
        .map(|(t, r)| (t.map(|v| inverse[v]), r))
        .collect();
    tagged.sort_by(|(s, _), (t, _)| {
        let cs = centroid3(&nodes, s);
        let ct = centroid3(&nodes, t);
        cs[1].total_cmp(&ct[1]).then(cs[0].total_cmp(&ct[0]))
    });
    let (triangles, regions): (Vec<_>, Vec<_>) = tagged.into_iter().unzip();
    let mesh = Mesh2D::from_parts(nodes, triangles, regions, b)?;
    log::debug!(
        "mesh: {} nodes, {} triangles ({} body, {} refinement levels), Q = {}, Q' = {}",
        mesh.num_nodes(),
        mesh.num_triangles(),
        mesh.count_region(Region::Body),
        levels,
        mesh.num_t_dofs(),
        mesh.num_phi_dofs()
    );
    Ok(mesh)
}

/// Number of uniform refinement passes applied after the base triangulation.
pub fn refinement_levels(spec: &DomainSpec) -> u32 {
    let b = &spec.bounds;
    let mut gap = (b.air_radius - spec.body.max_rho())
        .min(b.air_top - spec.body.max_z())
        .min(b.pml_thickness);
    if !b.ground {
        gap = gap.min(spec.body.min_z() - b.air_bottom);
    }
    let coarsest = gap / COARSEST_CELLS_PER_GAP;
    let mut levels = 0;
    while levels < 16 && spec.target_edge_length * f64::from(2u32 << levels) <= coarsest * (1.0 + 1e-9) {
        levels += 1;
    }
    levels
}

struct BaseMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    /// Nodes on the body generatrix: (segment index, curve parameter) for every
    /// segment the node belongs to.
    on_curve: HashMap<usize, Vec<(usize, f64)>>,
}

/// Splits every triangle into four. Midpoints of edges on the body generatrix
/// are placed on the curve itself.
fn red_refine(mesh: BaseMesh, body: &BoRProfile) -> BaseMesh {
    let BaseMesh {
        mut nodes,
        triangles,
        regions,
        mut on_curve,
    } = mesh;
    let mut interface: HashMap<[usize; 2], bool> = HashMap::new();
    for (t, r) in triangles.iter().zip(&regions) {
        for k in 0..3 {
            let (a, c) = (t[k], t[(k + 1) % 3]);
            let key = [a.min(c), a.max(c)];
            let in_body = *r == Region::Body;
            interface
                .entry(key)
                .and_modify(|x| *x = *x != in_body)
                .or_insert(in_body);
        }
    }
    let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
    let mut new_tris = Vec::with_capacity(4 * triangles.len());
    let mut new_regions = Vec::with_capacity(4 * triangles.len());
    for (t, &r) in triangles.iter().zip(&regions) {
        let mut m = [0usize; 3];
        for k in 0..3 {
            let (a, c) = (t[k], t[(k + 1) % 3]);
            let key = [a.min(c), a.max(c)];
            m[k] = *midpoint.entry(key).or_insert_with(|| {
                let (pa, pc) = (nodes[key[0]], nodes[key[1]]);
                let mut p = [0.5 * (pa[0] + pc[0]), 0.5 * (pa[1] + pc[1])];
                let mut membership = None;
                if interface.get(&key) == Some(&true) {
                    if let (Some(ma), Some(mc)) = (on_curve.get(&key[0]), on_curve.get(&key[1])) {
                        if let Some((seg, ta, tc)) = shared_segment(ma, mc) {
                            let tm = 0.5 * (ta + tc);
                            p = body.segments()[seg].point_at(tm);
                            membership = Some(vec![(seg, tm)]);
                        }
                    }
                }
                if pa[0] == 0.0 && pc[0] == 0.0 {
                    p[0] = 0.0;
                }
                if pa[1] == 0.0 && pc[1] == 0.0 {
                    p[1] = 0.0;
                }
                nodes.push(p);
                if let Some(mem) = membership {
                    on_curve.insert(nodes.len() - 1, mem);
                }
                nodes.len() - 1
            });
        }
        let [a, b, c] = *t;
        for child in [[a, m[0], m[2]], [m[0], b, m[1]], [m[2], m[1], c], [m[0], m[1], m[2]]] {
            new_tris.push(child);
            new_regions.push(r);
        }
    }
    BaseMesh {
        nodes,
        triangles: new_tris,
        regions: new_regions,
        on_curve,
    }
}

fn shared_segment(a: &[(usize, f64)], b: &[(usize, f64)]) -> Option<(usize, f64, f64)> {
    a.iter()
        .find_map(|&(sa, ta)| b.iter().find(|&&(sb, _)| sb == sa).map(|&(_, tb)| (sa, ta, tb)))
}

/// Curve membership of a point lying on the discretized body polygon.
fn curve_membership(
    chain: &[([f64; 2], &Vec<(usize, f64)>)],
    pieces: &[Option<usize>],
    p: [f64; 2],
) -> Option<Vec<(usize, f64)>> {
    let n = chain.len();
    if let Some(&(_, m)) = chain.iter().find(|(q, _)| *q == p) {
        return (!m.is_empty()).then(|| m.clone());
    }
    for (i, &(q, m)) in chain.iter().enumerate() {
        let Some(seg) = pieces[i] else { continue };
        let (r, mr) = chain[(i + 1) % n];
        let len = dist(q, r);
        if point_segment_distance(p, q, r) > 1e-12 * len.max(1e-3) {
            continue;
        }
        let tq = m.iter().find(|x| x.0 == seg)?.1;
        let tr = mr.iter().find(|x| x.0 == seg)?.1;
        let f = dist(q, p) / len;
        return Some(vec![(seg, tq + f * (tr - tq))]);
    }
    None
}

/// Body polygon at spacing `h`.
struct BodyPolygon {
    points: Vec<[f64; 2]>,
    /// Generatrix segments each vertex lies on, with the curve parameter there.
    members: Vec<Vec<(usize, f64)>>,
    /// Segment that polygon edge `i -> i+1` discretizes; `None` for the
    /// closure along the axis or the ground.
    pieces: Vec<Option<usize>>,
}

fn body_polygon(body: &BoRProfile, h: f64, ground: bool) -> BodyPolygon {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut members: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut pieces: Vec<Option<usize>> = Vec::new();
    if body.touches_ground() {
        pts.push([0.0, 0.0]);
        members.push(Vec::new());
    }
    for (si, seg) in body.segments().iter().enumerate() {
        for t in seg.discretize_params(h) {
            let mut p = seg.point_at(t);
            if p[0].abs() <= super::profile::ON_BOUNDARY_TOL {
                p[0] = 0.0;
            }
            if ground && p[1].abs() <= super::profile::ON_BOUNDARY_TOL {
                p[1] = 0.0;
            }
            if let Some(&last) = pts.last() {
                if dist(last, p) <= 1e-14 {
                    members.last_mut().unwrap().push((si, t));
                    continue;
                }
            }
            if !pts.is_empty() {
                pieces.push((t > 0.0).then_some(si));
            }
            pts.push(p);
            members.push(vec![(si, t)]);
        }
    }
    if pts.len() > 1 && dist(pts[0], *pts.last().unwrap()) <= 1e-14 {
        pts.pop();
        let m = members.pop().unwrap();
        members[0].extend(m);
    } else {
        pieces.push(None);
    }
    BodyPolygon {
        points: pts,
        members,
        pieces,
    }
}

/// Constrained Delaunay triangulation at the given sizes, before any
/// uniform refinement.
fn base_triangulation(spec: &DomainSpec, h_air: f64, h_body: f64) -> Result<BaseMesh> {
    let b = spec.bounds;
    let rho_max = b.rho_max();
    let z_max = b.z_max();
    let z_min = b.z_min();

    let BodyPolygon {
        points: body_poly,
        members,
        pieces,
    } = body_polygon(&spec.body, h_body, b.ground);
    let body_top_axis = body_poly
        .iter()
        .filter(|p| p[0] == 0.0)
        .map(|p| p[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let body_bottom_axis = body_poly
        .iter()
        .filter(|p| p[0] == 0.0)
        .map(|p| p[1])
        .fold(f64::INFINITY, f64::min);
    let ground_contact = if spec.body.touches_ground() {
        body_poly
            .iter()
            .filter(|p| p[1] == 0.0)
            .map(|p| p[0])
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    // Constraint polylines: outer boundary, PML interfaces, body generatrix.
    let mut lines: Vec<Polyline> = Vec::new();
    // axis, bottom to top; body part at body resolution
    lines.push(line_with_breaks(
        [0.0, z_min],
        [0.0, z_max],
        &[
            (body_bottom_axis, h_air),
            (body_top_axis, h_body),
            (b.air_bottom, h_air),
            (b.air_top, h_air),
        ],
        h_air,
    ));
    // bottom edge (ground or PML floor)
    lines.push(line_with_breaks(
        [0.0, z_min],
        [rho_max, z_min],
        &[(ground_contact, h_body), (b.air_radius, h_air)],
        h_air,
    ));
    lines.push(line_with_breaks([rho_max, z_min], [rho_max, z_max], &[(b.air_bottom, h_air), (b.air_top, h_air)], h_air));
    lines.push(line_with_breaks([0.0, z_max], [rho_max, z_max], &[(b.air_radius, h_air)], h_air));
    // PML interfaces, running through to the outer boundary
    lines.push(line_with_breaks(
        [b.air_radius, z_min],
        [b.air_radius, z_max],
        &[(b.air_bottom, h_air), (b.air_top, h_air)],
        h_air,
    ));
    lines.push(line_with_breaks([0.0, b.air_top], [rho_max, b.air_top], &[(b.air_radius, h_air)], h_air));
    if !b.ground {
        lines.push(line_with_breaks(
            [0.0, b.air_bottom],
            [rho_max, b.air_bottom],
            &[(b.air_radius, h_air)],
            h_air,
        ));
    }
    // body generatrix edges not lying on the axis or the ground
    let n_body = body_poly.len();
    let mut body_chain = Vec::new();
    for i in 0..n_body {
        let p = body_poly[i];
        let q = body_poly[(i + 1) % n_body];
        let on_axis = p[0] == 0.0 && q[0] == 0.0;
        let on_ground = spec.body.touches_ground() && p[1] == 0.0 && q[1] == 0.0;
        if !on_axis && !on_ground {
            body_chain.push([p, q]);
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles: HashMap<(u64, u64), FixedVertexHandle> = HashMap::new();
    let mut insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: [f64; 2]| -> Result<FixedVertexHandle> {
        let key = (p[0].to_bits(), p[1].to_bits());
        if let Some(&h) = handles.get(&key) {
            return Ok(h);
        }
        let h = cdt.insert(Point2::new(p[0], p[1])).map_err(|e| Error::Mesh {
            a: p,
            b: p,
            reason: format!("vertex insertion failed: {e:?}"),
        })?;
        handles.insert(key, h);
        Ok(h)
    };
    let add_segment = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, ha: FixedVertexHandle, hb: FixedVertexHandle, pa: [f64; 2], pb: [f64; 2]| -> Result<()> {
        if ha == hb {
            return Ok(());
        }
        if !cdt.can_add_constraint(ha, hb) {
            return Err(Error::Mesh {
                a: pa,
                b: pb,
                reason: "constraint segment intersects another boundary".into(),
            });
        }
        cdt.add_constraint(ha, hb);
        Ok(())
    };

    // Shared end points of axis-aligned lines are bit-identical by construction.
    let mut line_handles = Vec::new();
    for l in &lines {
        let hs = l.points.iter().map(|&p| insert(&mut cdt, p)).collect::<Result<Vec<_>>>()?;
        line_handles.push(hs);
    }
    let body_handles: Vec<(FixedVertexHandle, FixedVertexHandle)> = body_chain
        .iter()
        .map(|&[p, q]| Ok((insert(&mut cdt, p)?, insert(&mut cdt, q)?)))
        .collect::<Result<_>>()?;

    // Interior seeds: hexagonal lattices at the local spacing.
    let body_edges: Vec<[[f64; 2]; 2]> = (0..n_body).map(|i| [body_poly[i], body_poly[(i + 1) % n_body]]).collect();
    let dist_to_body = |p: [f64; 2]| {
        body_edges
            .iter()
            .map(|e| point_segment_distance(p, e[0], e[1]))
            .fold(f64::INFINITY, f64::min)
    };
    let (blo, bhi) = bbox(&body_poly);
    for p in hex_lattice(blo, bhi, LATTICE_FILL * h_body) {
        if point_in_polygon(&body_poly, p) && dist_to_body(p) >= 0.5 * h_body {
            insert(&mut cdt, p)?;
        }
    }
    let line_dist = |p: [f64; 2]| {
        let mut d = p[0].min(rho_max - p[0]).min(p[1] - z_min).min(z_max - p[1]);
        d = d.min((p[0] - b.air_radius).abs()).min((p[1] - b.air_top).abs());
        if !b.ground {
            d = d.min((p[1] - b.air_bottom).abs());
        }
        d
    };
    for p in hex_lattice([0.0, z_min], [rho_max, z_max], LATTICE_FILL * h_air) {
        if line_dist(p) < 0.5 * h_air {
            continue;
        }
        if point_in_polygon(&body_poly, p) || dist_to_body(p) < 0.8 * h_air {
            continue;
        }
        insert(&mut cdt, p)?;
    }

    for (l, hs) in lines.iter().zip(&line_handles) {
        for i in 0..hs.len() - 1 {
            add_segment(&mut cdt, hs[i], hs[i + 1], l.points[i], l.points[i + 1])?;
        }
    }
    for (&[p, q], &(ha, hb)) in body_chain.iter().zip(&body_handles) {
        add_segment(&mut cdt, ha, hb, p, q)?;
    }

    let equilateral = 3f64.sqrt() / 4.0;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .with_max_allowed_area(equilateral * h_air * h_air)
        .with_min_required_area(equilateral * h_body * h_body / 16.0)
        .with_max_additional_vertices(4 * cdt.num_vertices() + 1000);
    cdt.refine(params);

    // Split the longest edge of any triangle that still exceeds its target.
    for _ in 0..16 {
        let mut extra: Vec<[f64; 2]> = Vec::new();
        for face in cdt.inner_faces() {
            let p = face.positions().map(|q| [q.x, q.y]);
            let lens = [dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])];
            if lens.iter().all(|&l| l <= SIZE_MARGIN * h_body) {
                continue;
            }
            let c = centroid3(&[p[0], p[1], p[2]], &[0, 1, 2]);
            let limit = SIZE_MARGIN * if point_in_polygon(&body_poly, c) { h_body } else { h_air };
            // Constraint edges are already short enough; split the longest free edge.
            let longest = face
                .adjacent_edges()
                .into_iter()
                .filter(|e| !cdt.is_constraint_edge(e.as_undirected().fix()))
                .map(|e| {
                    let (a, b) = (e.from().position(), e.to().position());
                    ([a.x, a.y], [b.x, b.y])
                })
                .max_by(|x, y| dist(x.0, x.1).total_cmp(&dist(y.0, y.1)));
            if let Some((a, b)) = longest {
                if dist(a, b) > limit {
                    extra.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                }
            }
        }
        if extra.is_empty() {
            break;
        }
        for c in extra {
            insert(&mut cdt, c)?;
        }
    }

    // Extract, dropping unused vertices and snapping axis/ground coordinates.
    let mut remap = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let idx = v.fix().index();
            if remap[idx] == usize::MAX {
                let pos = v.position();
                let mut p = [pos.x, pos.y];
                if p[0].abs() <= 1e-12 {
                    p[0] = 0.0;
                }
                if b.ground && p[1].abs() <= 1e-12 {
                    p[1] = 0.0;
                }
                remap[idx] = nodes.len();
                nodes.push(p);
            }
            tri[k] = remap[idx];
        }
        triangles.push(tri);
    }
    for t in &triangles {
        let c = centroid3(&nodes, t);
        let region = if point_in_polygon(&body_poly, c) {
            Region::Body
        } else if b.in_physical(c) {
            Region::Air
        } else {
            Region::Pml
        };
        regions.push(region);
    }
    // Curve membership of nodes on the body generatrix.
    let chain: Vec<([f64; 2], &Vec<(usize, f64)>)> = body_poly.iter().copied().zip(members.iter()).collect();
    let mut on_curve: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    for (tri, &r) in triangles.iter().zip(&regions) {
        if r != Region::Body {
            continue;
        }
        for &v in tri {
            if on_curve.contains_key(&v) {
                continue;
            }
            if let Some(m) = curve_membership(&chain, &pieces, nodes[v]) {
                // Points added on a chord during refinement move onto the curve.
                if !chain.iter().any(|(q, _)| *q == nodes[v]) {
                    let (seg, t) = m[0];
                    nodes[v] = spec.body.segments()[seg].point_at(t);
                }
                on_curve.insert(v, m);
            }
        }
    }
    Ok(BaseMesh {
        nodes,
        triangles,
        regions,
        on_curve,
    })
}

fn centroid3(nodes: &[[f64; 2]], t: &[usize; 3]) -> [f64; 2] {
    [
        (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0,
        (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0,
    ]
}

fn bbox(poly: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

fn hex_lattice(lo: [f64; 2], hi: [f64; 2], h: f64) -> Vec<[f64; 2]> {
    let dz = h * 3f64.sqrt() / 2.0;
    let rows = ((hi[1] - lo[1]) / dz).floor() as usize;
    let cols = ((hi[0] - lo[0]) / h).floor() as usize + 1;
    let mut out = Vec::new();
    for j in 1..=rows {
        let z = lo[1] + j as f64 * dz;
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..=cols {
            let x = lo[0] + shift + i as f64 * h;
            if x > lo[0] && x < hi[0] {
                out.push([x, z]);
            }
        }
    }
    out
}
