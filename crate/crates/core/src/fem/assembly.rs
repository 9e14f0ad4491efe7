//! Per-harmonic system matrices.
//!
//! All blocks share one sparsity pattern over the full unknown vector
//! `[U_t; U_φ]`. Harmonic `m` has matrix
//! `S + m²·A′ + m·G − k₀²·B + jωμ₀·C` where `S` holds the m-independent curl
//! terms (`A_tt`, `A_φφ`), `A′` is the t-t block scaled by `m²`, `G = −A_tφ`
//! occupies the mixed blocks and `C` lives on ground edges only.

use std::collections::HashMap;
use std::sync::Arc;

use crate::constants::{omega, wavenumber, MU0};
use crate::exec::Exec;
use crate::fem::basis::Element;
use crate::fem::pml::PmlMap;
use crate::fem::quadrature::{GAUSS3, TRI7};
use crate::geometry::{BoundaryTag, Mesh2D, Region};
use crate::{Error, Result, C64};

/// Local unknowns per triangle: eight in-plane then six nodal.
pub const LOCAL: usize = 14;

const CHUNK: usize = 1024;

type Local = [[C64; LOCAL]; LOCAL];

/// Individual integral families, for inspection and debugging.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Att,
    AttPrime,
    AtPhi,
    APhiT,
    APhiPhi,
    Btt,
    BPhiPhi,
    Ctt,
    CPhiPhi,
}

/// Which unknowns are eliminated for a harmonic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintClass {
    /// `m = 0`: the azimuthal field decouples and is dropped entirely.
    Axisymmetric,
    /// `m ≥ 1`.
    Harmonic,
}

impl ConstraintClass {
    pub fn of(m: usize) -> Self {
        if m == 0 {
            ConstraintClass::Axisymmetric
        } else {
            ConstraintClass::Harmonic
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    /// Ground surface impedance in ohms; zero makes the ground a perfect conductor.
    pub zeta: C64,
    pub exec: Exec,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            zeta: C64::new(0.0, 0.0),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug)]
pub struct HarmonicSystem {
    mesh: Arc<Mesh2D>,
    freq: f64,
    body_eps: C64,
    pml: PmlMap,
    zeta: C64,
    n_t: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    stiff: Vec<C64>,
    coupling: Vec<C64>,
    mass: Vec<C64>,
    /// Ground impedance entries as (pattern position, value).
    boundary: Vec<(usize, C64)>,
    /// Eliminated for every harmonic.
    pec: Vec<bool>,
    /// In-plane unknowns on axis edges, eliminated for `m ≥ 1`.
    axis_t: Vec<bool>,
}

struct Weights {
    /// Curl-φ weight ρ̃/(s_ρ s_z).
    curl_phi: C64,
    /// Weights of the ρ and z parts of the transverse curl.
    w_rho: C64,
    w_z: C64,
    /// ε-free mass weights for ρ, z and φ components.
    m_rho: C64,
    m_z: C64,
    m_phi: C64,
}

fn weights(pml: &PmlMap, p: [f64; 2]) -> Result<Weights> {
    if !(p[0] > 0.0) {
        return Err(Error::Assembly(format!(
            "quadrature point at rho = {} meets the axis singularity",
            p[0]
        )));
    }
    let sr = pml.s_rho(p[0]);
    let sz = pml.s_z(p[1]);
    let rt = pml.rho_tilde(p[0]);
    Ok(Weights {
        curl_phi: rt / (sr * sz),
        w_rho: sr / (rt * sz),
        w_z: sz / (rt * sr),
        m_rho: rt * sz / sr,
        m_z: rt * sr / sz,
        m_phi: sr * sz / rt,
    })
}

struct ElementMatrices {
    stiff: Local,
    coupling: Local,
    mass: Local,
}

fn zero_local() -> Local {
    [[C64::new(0.0, 0.0); LOCAL]; LOCAL]
}

fn element_of(mesh: &Mesh2D, t: usize) -> Element {
    let tri = mesh.triangles()[t];
    let nodes = mesh.nodes();
    Element::new(
        [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]],
        [mesh.edge_sign(t, 0), mesh.edge_sign(t, 1), mesh.edge_sign(t, 2)],
    )
}

fn element_matrices(mesh: &Mesh2D, pml: &PmlMap, eps: C64, t: usize) -> Result<ElementMatrices> {
    let e = element_of(mesh, t);
    let mut out = ElementMatrices {
        stiff: zero_local(),
        coupling: zero_local(),
        mass: zero_local(),
    };
    for &(l, w) in TRI7.iter() {
        let w = w * e.area;
        let wt = weights(pml, e.point(l))?;
        let (tau, curl) = e.edge_basis(l);
        let (phi, gphi) = e.nodal_basis(l);
        for i in 0..8 {
            for j in 0..8 {
                out.stiff[i][j] += wt.curl_phi * (w * curl[i] * curl[j]);
                out.coupling[i][j] +=
                    wt.w_rho * (w * tau[i][1] * tau[j][1]) + wt.w_z * (w * tau[i][0] * tau[j][0]);
                out.mass[i][j] += eps
                    * (wt.m_rho * (w * tau[i][0] * tau[j][0]) + wt.m_z * (w * tau[i][1] * tau[j][1]));
            }
            for j in 0..6 {
                let g = wt.w_z * (w * tau[i][0] * gphi[j][0]) + wt.w_rho * (w * tau[i][1] * gphi[j][1]);
                out.coupling[i][8 + j] += g;
                out.coupling[8 + j][i] += g;
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                out.stiff[8 + i][8 + j] += wt.w_rho * (w * gphi[i][1] * gphi[j][1])
                    + wt.w_z * (w * gphi[i][0] * gphi[j][0]);
                out.mass[8 + i][8 + j] += eps * wt.m_phi * (w * phi[i] * phi[j]);
            }
        }
    }
    Ok(out)
}

/// Ground-edge impedance matrix of triangle `t` along local edge `k`, without
/// the `1/ζ` factor.
fn ground_matrix(mesh: &Mesh2D, pml: &PmlMap, t: usize, k: usize) -> Local {
    let e = element_of(mesh, t);
    let (a, b) = (e.vertices[k], e.vertices[(k + 1) % 3]);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut out = zero_local();
    for &(s, w) in GAUSS3.iter() {
        let mut l = [0.0; 3];
        l[k] = 1.0 - s;
        l[(k + 1) % 3] = s;
        let p = e.point(l);
        let (sr, rt) = (pml.s_rho(p[0]), pml.rho_tilde(p[0]));
        let (tau, _) = e.edge_basis(l);
        let (phi, _) = e.nodal_basis(l);
        let w = w * len;
        for i in 0..8 {
            for j in 0..8 {
                out[i][j] += rt / sr * (w * tau[i][0] * tau[j][0]);
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                out[8 + i][8 + j] += sr / rt * (w * phi[i] * phi[j]);
            }
        }
    }
    out
}

fn local_dofs(mesh: &Mesh2D, t: usize) -> [usize; LOCAL] {
    let mut d = [0; LOCAL];
    d[..8].copy_from_slice(&mesh.t_dofs(t));
    d[8..].copy_from_slice(&mesh.phi_dofs(t));
    d
}

impl HarmonicSystem {
    /// Assemble every block for `mesh` with a homogeneous body of relative
    /// permittivity `body_eps`.
    pub fn assemble(
        mesh: Arc<Mesh2D>,
        freq: f64,
        body_eps: C64,
        pml: PmlMap,
        opts: AssemblyOptions,
    ) -> Result<Self> {
        if !(freq > 0.0) {
            return Err(Error::Parameter(format!("frequency must be positive, got {freq}")));
        }
        let n_t = mesh.num_t_dofs();
        let n = mesh.num_dofs();
        let ntri = mesh.num_triangles();
        let (col_ptr, row_idx) = build_pattern(&mesh, n);
        let nnz = row_idx.len();
        let position = |row: usize, col: usize| -> usize {
            let (s, e) = (col_ptr[col], col_ptr[col + 1]);
            s + row_idx[s..e].binary_search(&row).expect("entry in pattern")
        };

        let mut stiff = vec![C64::new(0.0, 0.0); nnz];
        let mut coupling = vec![C64::new(0.0, 0.0); nnz];
        let mut mass = vec![C64::new(0.0, 0.0); nnz];
        let eps_of = |t: usize| match mesh.region(t) {
            Region::Body => body_eps,
            _ => C64::new(1.0, 0.0),
        };
        for start in (0..ntri).step_by(CHUNK) {
            let len = CHUNK.min(ntri - start);
            let locals = opts
                .exec
                .map_range(len, |i| element_matrices(&mesh, &pml, eps_of(start + i), start + i));
            for (i, em) in locals.into_iter().enumerate() {
                let em = em?;
                let dofs = local_dofs(&mesh, start + i);
                for (b, &col) in dofs.iter().enumerate() {
                    for (a, &row) in dofs.iter().enumerate() {
                        let p = position(row, col);
                        stiff[p] += em.stiff[a][b];
                        coupling[p] += em.coupling[a][b];
                        mass[p] += em.mass[a][b];
                    }
                }
            }
        }

        let ground_pec = opts.zeta.norm() == 0.0;
        let mut owner = HashMap::new();
        for t in 0..ntri {
            for (k, e) in mesh.triangle_edges(t).into_iter().enumerate() {
                owner.entry(e).or_insert((t, k));
            }
        }
        let mut pec = vec![false; n];
        let mut axis_t = vec![false; n];
        let mut boundary: Vec<(usize, C64)> = Vec::new();
        let nn = mesh.num_nodes();
        for &(e, tag) in mesh.boundary_edges() {
            let [v0, v1] = mesh.edges()[e];
            let t_pair = [2 * e, 2 * e + 1];
            let phi = [n_t + v0, n_t + v1, n_t + nn + e];
            match tag {
                BoundaryTag::Axis => {
                    for d in t_pair {
                        axis_t[d] = true;
                    }
                    for d in phi {
                        pec[d] = true;
                    }
                }
                BoundaryTag::PmlOuter => {
                    for d in t_pair.into_iter().chain(phi) {
                        pec[d] = true;
                    }
                }
                BoundaryTag::Ground if ground_pec => {
                    for d in t_pair.into_iter().chain(phi) {
                        pec[d] = true;
                    }
                }
                BoundaryTag::Ground => {
                    let (t, k) = owner[&e];
                    let g = ground_matrix(&mesh, &pml, t, k);
                    let dofs = local_dofs(&mesh, t);
                    let inv = 1.0 / opts.zeta;
                    for (b, &col) in dofs.iter().enumerate() {
                        for (a, &row) in dofs.iter().enumerate() {
                            if g[a][b] != C64::new(0.0, 0.0) {
                                boundary.push((position(row, col), inv * g[a][b]));
                            }
                        }
                    }
                }
            }
        }

        Ok(HarmonicSystem {
            mesh,
            freq,
            body_eps,
            pml,
            zeta: opts.zeta,
            n_t,
            col_ptr,
            row_idx,
            stiff,
            coupling,
            mass,
            boundary,
            pec,
            axis_t,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn k0(&self) -> f64 {
        wavenumber(self.freq)
    }

    pub fn omega(&self) -> f64 {
        omega(self.freq)
    }

    pub fn body_eps(&self) -> C64 {
        self.body_eps
    }

    pub fn pml(&self) -> &PmlMap {
        &self.pml
    }

    pub fn zeta(&self) -> C64 {
        self.zeta
    }

    /// Total unknowns `Q + Q′`.
    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn num_t(&self) -> usize {
        self.n_t
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn is_constrained(&self, dof: usize, m: usize) -> bool {
        match ConstraintClass::of(m) {
            ConstraintClass::Axisymmetric => self.pec[dof] || dof >= self.n_t,
            ConstraintClass::Harmonic => self.pec[dof] || self.axis_t[dof],
        }
    }

    /// Values of the full harmonic-`m` matrix over the shared pattern.
    pub fn values(&self, m: usize) -> Vec<C64> {
        let k0 = self.k0();
        let (mf, m2) = (m as f64, (m * m) as f64);
        let mut v = Vec::with_capacity(self.nnz());
        for col in 0..self.dim() {
            for p in self.col_ptr[col]..self.col_ptr[col + 1] {
                let row = self.row_idx[p];
                let scale = if row < self.n_t && col < self.n_t { m2 } else { mf };
                v.push(self.stiff[p] + scale * self.coupling[p] - k0 * k0 * self.mass[p]);
            }
        }
        let jwm = C64::new(0.0, self.omega() * MU0);
        for &(p, c) in &self.boundary {
            v[p] += jwm * c;
        }
        v
    }

    /// Nonzero entries of one block as `(row, col, value)`, indices local to
    /// the block.
    pub fn block(&self, which: Block) -> Vec<(usize, usize, C64)> {
        let nt = self.n_t;
        let (rows_t, cols_t) = match which {
            Block::Att | Block::AttPrime | Block::Btt | Block::Ctt => (true, true),
            Block::AtPhi => (true, false),
            Block::APhiT => (false, true),
            Block::APhiPhi | Block::BPhiPhi | Block::CPhiPhi => (false, false),
        };
        let in_block = |row: usize, col: usize| (row < nt) == rows_t && (col < nt) == cols_t;
        let shift = |i: usize, is_t: bool| if is_t { i } else { i - nt };
        let mut out = Vec::new();
        let mut push = |p: usize, row: usize, col: usize, v: C64| {
            if in_block(row, col) && v != C64::new(0.0, 0.0) {
                out.push((shift(row, rows_t), shift(col, cols_t), v, p));
            }
        };
        match which {
            Block::Ctt | Block::CPhiPhi => {
                let mut acc: Vec<(usize, C64)> = self.boundary.clone();
                acc.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, C64)> = Vec::new();
                for (p, v) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == p => last.1 += v,
                        _ => merged.push((p, v)),
                    }
                }
                for (p, v) in merged {
                    let (row, col) = self.entry(p);
                    push(p, row, col, v);
                }
            }
            _ => {
                let data = match which {
                    Block::Att | Block::APhiPhi => &self.stiff,
                    Block::AttPrime => &self.coupling,
                    Block::AtPhi | Block::APhiT => &self.coupling,
                    _ => &self.mass,
                };
                // A_tφ is stored with the opposite sign.
                let sign = if matches!(which, Block::AtPhi | Block::APhiT) { -1.0 } else { 1.0 };
                for col in 0..self.dim() {
                    for p in self.col_ptr[col]..self.col_ptr[col + 1] {
                        push(p, self.row_idx[p], col, sign * data[p]);
                    }
                }
            }
        }
        out.sort_by_key(|e| e.3);
        out.into_iter().map(|(r, c, v, _)| (r, c, v)).collect()
    }

    fn entry(&self, p: usize) -> (usize, usize) {
        let col = self.col_ptr.partition_point(|&s| s <= p) - 1;
        (self.row_idx[p], col)
    }
}

/// Column-compressed pattern of all element couplings, rows sorted.
fn build_pattern(mesh: &Mesh2D, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut pairs: Vec<u64> = Vec::with_capacity(mesh.num_triangles() * LOCAL * LOCAL);
    for t in 0..mesh.num_triangles() {
        let d = local_dofs(mesh, t);
        for &c in &d {
            for &r in &d {
                pairs.push(((c as u64) << 32) | r as u64);
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut col_ptr = vec![0usize; n + 1];
    let mut row_idx = Vec::with_capacity(pairs.len());
    for &pr in &pairs {
        col_ptr[(pr >> 32) as usize + 1] += 1;
        row_idx.push((pr & 0xffff_ffff) as usize);
    }
    for c in 0..n {
        col_ptr[c + 1] += col_ptr[c];
    }
    (col_ptr, row_idx)
}
