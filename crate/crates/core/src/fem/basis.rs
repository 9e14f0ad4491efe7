//! Second-order basis functions on a straight triangle.
//!
//! In-plane fields use the hierarchical curl-conforming set of the first kind:
//! per local edge `k` (vertices `k`, `k+1`) a Whitney function and the
//! gradient of `λ_a λ_b`, plus two face functions `λ_2 W_01` and `λ_0 W_12`.
//! Scalar fields use quadratic Lagrange functions: three vertex functions then
//! three edge-midpoint functions.
//!
//! Vectors are `[ρ, z]`; the scalar curl is `∂_ρ τ_z − ∂_z τ_ρ`.

#[inline]
pub fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad: [[f64; 2]; 3],
    /// Orientation of each local edge relative to its global direction.
    pub sign: [f64; 3],
}

impl Element {
    pub fn new(vertices: [[f64; 2]; 3], sign: [f64; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let grad = [
            [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
            [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
            [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
        ];
        Element {
            vertices,
            area: 0.5 * twice,
            grad,
            sign,
        }
    }

    pub fn point(&self, l: [f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    fn whitney(&self, l: [f64; 3], a: usize, b: usize) -> [f64; 2] {
        let (ga, gb) = (self.grad[a], self.grad[b]);
        [l[a] * gb[0] - l[b] * ga[0], l[a] * gb[1] - l[b] * ga[1]]
    }

    /// Values and scalar curls of the eight in-plane functions at `l`.
    pub fn edge_basis(&self, l: [f64; 3]) -> ([[f64; 2]; 8], [f64; 8]) {
        let g = &self.grad;
        let mut val = [[0.0; 2]; 8];
        let mut curl = [0.0; 8];
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            let s = self.sign[k];
            let w = self.whitney(l, a, b);
            val[2 * k] = [s * w[0], s * w[1]];
            curl[2 * k] = s * 2.0 * cross(g[a], g[b]);
            val[2 * k + 1] = [
                l[a] * g[b][0] + l[b] * g[a][0],
                l[a] * g[b][1] + l[b] * g[a][1],
            ];
        }
        for (slot, (c, a, b)) in [(2usize, 0usize, 1usize), (0, 1, 2)].into_iter().enumerate() {
            let w = self.whitney(l, a, b);
            val[6 + slot] = [l[c] * w[0], l[c] * w[1]];
            curl[6 + slot] = cross(g[c], w) + l[c] * 2.0 * cross(g[a], g[b]);
        }
        (val, curl)
    }

    /// Values and gradients of the six quadratic Lagrange functions at `l`.
    pub fn nodal_basis(&self, l: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
        let g = &self.grad;
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        for i in 0..3 {
            val[i] = l[i] * (2.0 * l[i] - 1.0);
            let f = 4.0 * l[i] - 1.0;
            grad[i] = [f * g[i][0], f * g[i][1]];
        }
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            val[3 + k] = 4.0 * l[a] * l[b];
            grad[3 + k] = [
                4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
            ];
        }
        (val, grad)
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let v0 = self.vertices[0];
        let d = [p[0] - v0[0], p[1] - v0[1]];
        let l1 = self.grad[1][0] * d[0] + self.grad[1][1] * d[1];
        let l2 = self.grad[2][0] * d[0] + self.grad[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Element {
        Element::new([[1.0, 0.2], [1.7, 0.4], [1.2, 1.1]], [1.0, -1.0, 1.0])
    }

    fn along(_e: &Element, k: usize, t: f64) -> [f64; 3] {
        let mut l = [0.0; 3];
        l[k] = 1.0 - t;
        l[(k + 1) % 3] = t;
        l
    }

    #[test]
    fn lagrange_partition_of_unity_and_interpolation() {
        let e = tri();
        for l in [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [1.0, 0.0, 0.0]] {
            let (v, g) = e.nodal_basis(l);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gs = g.iter().fold([0.0, 0.0], |s, x| [s[0] + x[0], s[1] + x[1]]);
            assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
        }
        let (v, _) = e.nodal_basis([0.5, 0.5, 0.0]);
        assert!((v[3] - 1.0).abs() < 1e-15 && v[0].abs() < 1e-15);
    }

    #[test]
    fn curls_match_finite_differences() {
        let e = tri();
        let l = [0.25, 0.35, 0.4];
        let p = e.point(l);
        let h = 1e-6;
        let at = |q: [f64; 2]| e.edge_basis(e.barycentric(q)).0;
        let (_, curl) = e.edge_basis(l);
        let (px, mx) = (at([p[0] + h, p[1]]), at([p[0] - h, p[1]]));
        let (pz, mz) = (at([p[0], p[1] + h]), at([p[0], p[1] - h]));
        for i in 0..8 {
            let fd = (px[i][1] - mx[i][1]) / (2.0 * h) - (pz[i][0] - mz[i][0]) / (2.0 * h);
            assert!((fd - curl[i]).abs() < 1e-6, "function {i}: {fd} vs {}", curl[i]);
        }
        let (_, grads) = e.nodal_basis(l);
        let atn = |q: [f64; 2]| e.nodal_basis(e.barycentric(q)).0;
        let (px, mx) = (atn([p[0] + h, p[1]]), atn([p[0] - h, p[1]]));
        for i in 0..6 {
            assert!(((px[i] - mx[i]) / (2.0 * h) - grads[i][0]).abs() < 1e-6);
        }
    }

    #[test]
    fn face_functions_have_no_tangential_trace() {
        let e = tri();
        for k in 0..3 {
            let (a, b) = (e.vertices[k], e.vertices[(k + 1) % 3]);
            let t = [b[0] - a[0], b[1] - a[1]];
            for s in [0.1, 0.5, 0.8] {
                let (v, _) = e.edge_basis(along(&e, k, s));
                for f in 6..8 {
                    assert!((v[f][0] * t[0] + v[f][1] * t[1]).abs() < 1e-14);
                }
                // Functions of the other edges vanish tangentially here too.
                for other in (0..3).filter(|&o| o != k) {
                    for f in [2 * other, 2 * other + 1] {
                        assert!((v[f][0] * t[0] + v[f][1] * t[1]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn whitney_circulation_is_signed_unit() {
        let e = tri();
        for k in 0..3 {
            let (a, b) = (e.vertices[k], e.vertices[(k + 1) % 3]);
            let t = [b[0] - a[0], b[1] - a[1]];
            // Tangential component is constant along the edge; its integral is ±1.
            let (v, _) = e.edge_basis(along(&e, k, 0.3));
            let circ = v[2 * k][0] * t[0] + v[2 * k][1] * t[1];
            assert!((circ - e.sign[k]).abs() < 1e-13);
            // The gradient function integrates to zero along the edge.
            let g: f64 = crate::fem::quadrature::GAUSS3
                .iter()
                .map(|&(s, w)| {
                    let (v, _) = e.edge_basis(along(&e, k, s));
                    w * (v[2 * k + 1][0] * t[0] + v[2 * k + 1][1] * t[1])
                })
                .sum();
            assert!(g.abs() < 1e-13);
        }
    }

    #[test]
    fn tangential_continuity_across_shared_edge() {
        // Two triangles sharing the edge between global nodes 1 and 2.
        let n = [[0.0, 0.0], [1.0, 0.0], [0.4, 0.9], [1.3, 1.0]];
        // Triangle A = (0, 1, 2): shared edge is local 1 (1 -> 2), ascending.
        let ea = Element::new([n[0], n[1], n[2]], [1.0, 1.0, -1.0]);
        // Triangle B = (3, 2, 1): shared edge is local 1 (2 -> 1), descending.
        let eb = Element::new([n[3], n[2], n[1]], [-1.0, -1.0, 1.0]);
        let t = [n[2][0] - n[1][0], n[2][1] - n[1][1]];
        for s in [0.2, 0.5, 0.9] {
            let (va, _) = ea.edge_basis(along(&ea, 1, s));
            let (vb, _) = eb.edge_basis(along(&eb, 1, 1.0 - s));
            for f in 0..2 {
                let ta = va[2 + f][0] * t[0] + va[2 + f][1] * t[1];
                let tb = vb[2 + f][0] * t[0] + vb[2 + f][1] * t[1];
                assert!((ta - tb).abs() < 1e-13, "function {f}: {ta} vs {tb}");
            }
        }
    }
}
