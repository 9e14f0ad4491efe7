//! Generatrix curves of bodies of revolution in the ρ–z half-plane.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::{Error, Result};

/// Coordinates below this are treated as lying on the axis or the ground.
pub const ON_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line {
        a: [f64; 2],
        b: [f64; 2],
    },
    /// Elliptic arc `center + (rx cos t, rz sin t)` for `t` from `start` to `end`.
    Arc {
        center: [f64; 2],
        radii: [f64; 2],
        start: f64,
        end: f64,
    },
}

impl Segment {
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        match *self {
            Segment::Line { a, b } => [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
            Segment::Arc {
                center,
                radii,
                start,
                end,
            } => {
                let t = start + s * (end - start);
                [center[0] + radii[0] * t.cos(), center[1] + radii[1] * t.sin()]
            }
        }
    }

    pub fn start(&self) -> [f64; 2] {
        self.point_at(0.0)
    }

    pub fn end(&self) -> [f64; 2] {
        self.point_at(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { a, b } => dist(a, b),
            Segment::Arc {
                radii, start, end, ..
            } if (radii[0] - radii[1]).abs() <= 1e-15 * radii[0].abs().max(1.0) => {
                radii[0] * (end - start).abs()
            }
            Segment::Arc { .. } => {
                let table = self.arc_length_table();
                *table.last().unwrap()
            }
        }
    }

    fn arc_length_table(&self) -> Vec<f64> {
        const STEPS: usize = 2048;
        let mut acc = Vec::with_capacity(STEPS + 1);
        acc.push(0.0);
        let mut prev = self.point_at(0.0);
        let mut total = 0.0;
        for i in 1..=STEPS {
            let p = self.point_at(i as f64 / STEPS as f64);
            total += dist(prev, p);
            acc.push(total);
            prev = p;
        }
        acc
    }

    /// Points splitting the segment into `ceil(length / max_len)` pieces of
    /// (near) equal arc length, including both end points.
    pub fn discretize(&self, max_len: f64) -> Vec<[f64; 2]> {
        let n = ((self.length() / max_len).ceil() as usize).max(1);
        self.discretize_n(n)
    }

    /// `n + 1` points splitting the segment into `n` pieces of equal arc length.
    pub fn discretize_n(&self, n: usize) -> Vec<[f64; 2]> {
        self.params_n(n).into_iter().map(|t| self.point_at(t)).collect()
    }

    /// Curve parameters of the points returned by [`Segment::discretize`].
    pub fn discretize_params(&self, max_len: f64) -> Vec<f64> {
        let n = ((self.length() / max_len).ceil() as usize).max(1);
        self.params_n(n)
    }

    fn params_n(&self, n: usize) -> Vec<f64> {
        match self {
            Segment::Line { .. } => (0..=n).map(|i| i as f64 / n as f64).collect(),
            Segment::Arc { .. } => {
                let table = self.arc_length_table();
                let steps = table.len() - 1;
                let total = table[steps];
                let mut out = Vec::with_capacity(n + 1);
                out.push(0.0);
                let mut j = 0;
                for i in 1..n {
                    let target = total * i as f64 / n as f64;
                    while table[j + 1] < target {
                        j += 1;
                    }
                    let frac = (target - table[j]) / (table[j + 1] - table[j]);
                    out.push((j as f64 + frac) / steps as f64);
                }
                out.push(1.0);
                out
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Open generatrix chain that closes against the axis (and possibly the ground).
///
/// The chain runs counter-clockwise in the (ρ, z) plane: it starts on the
/// ground or on the axis and ends on the axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoRProfile {
    segments: Vec<Segment>,
    touches_axis: bool,
    touches_ground: bool,
}

impl BoRProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Geometry("profile has no segments".into()));
        }
        for w in segments.windows(2) {
            if dist(w[0].end(), w[1].start()) > 1e-9 {
                return Err(Error::Geometry(format!(
                    "profile segments are not contiguous at {:?}",
                    w[0].end()
                )));
            }
        }
        let first = segments[0].start();
        let last = segments.last().unwrap().end();
        if last[0].abs() > ON_BOUNDARY_TOL {
            return Err(Error::Geometry("profile must end on the axis".into()));
        }
        let starts_on_axis = first[0].abs() <= ON_BOUNDARY_TOL;
        let starts_on_ground = first[1].abs() <= ON_BOUNDARY_TOL && first[0] > 0.0;
        if !starts_on_axis && !starts_on_ground {
            return Err(Error::Geometry(
                "profile must start on the axis or on the ground".into(),
            ));
        }
        let profile = BoRProfile {
            segments,
            touches_axis: true,
            touches_ground: starts_on_ground,
        };
        if profile.polygon(f64::INFINITY).iter().any(|p| p[0] < -ON_BOUNDARY_TOL) {
            return Err(Error::Geometry("profile has vertices with ρ < 0".into()));
        }
        Ok(profile)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn touches_axis(&self) -> bool {
        self.touches_axis
    }

    pub fn touches_ground(&self) -> bool {
        self.touches_ground
    }

    /// Closed counter-clockwise polygon of the enclosed region, with every
    /// generatrix segment split into pieces no longer than `max_len`.
    ///
    /// When the profile stands on the ground the polygon starts at the origin.
    pub fn polygon(&self, max_len: f64) -> Vec<[f64; 2]> {
        let mut pts = Vec::new();
        if self.touches_ground {
            pts.push([0.0, 0.0]);
        }
        for seg in &self.segments {
            let d = if max_len.is_finite() {
                seg.discretize(max_len)
            } else {
                match seg {
                    Segment::Line { a, b } => vec![*a, *b],
                    // uniform in the arc parameter so the vertices scale with the radii
                    Segment::Arc { .. } => (0..=64).map(|i| seg.point_at(i as f64 / 64.0)).collect(),
                }
            };
            for p in d {
                if pts.last().map_or(true, |&q| dist(q, p) > 1e-14) {
                    pts.push(p);
                }
            }
        }
        if pts.len() > 1 && dist(pts[0], *pts.last().unwrap()) <= 1e-14 {
            pts.pop();
        }
        for p in &mut pts {
            if p[0].abs() <= ON_BOUNDARY_TOL {
                p[0] = 0.0;
            }
            if p[1].abs() <= ON_BOUNDARY_TOL {
                p[1] = 0.0;
            }
        }
        pts
    }

    /// Area enclosed together with the axis/ground closure.
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon(self.max_rho().max(self.max_z()) / 4096.0))
    }

    /// Length of the generatrix chain (excluding the axis/ground closure).
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn max_rho(&self) -> f64 {
        self.polygon(self.scale() / 2048.0)
            .iter()
            .map(|p| p[0])
            .fold(0.0, f64::max)
    }

    pub fn max_z(&self) -> f64 {
        self.polygon(self.scale() / 2048.0)
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_z(&self) -> f64 {
        self.polygon(self.scale() / 2048.0)
            .iter()
            .map(|p| p[1])
            .fold(f64::INFINITY, f64::min)
    }

    fn scale(&self) -> f64 {
        self.length().max(1e-12)
    }

    /// Profile with every ρ multiplied by `s_rho` and every z by `s_z`.
    pub fn scaled(&self, s_rho: f64, s_z: f64) -> BoRProfile {
        let sc = |p: [f64; 2]| [p[0] * s_rho, p[1] * s_z];
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Line { a, b } => Segment::Line { a: sc(a), b: sc(b) },
                Segment::Arc {
                    center,
                    radii,
                    start,
                    end,
                } => Segment::Arc {
                    center: sc(center),
                    radii: [radii[0] * s_rho, radii[1] * s_z],
                    start,
                    end,
                },
            })
            .collect();
        BoRProfile {
            segments,
            touches_axis: self.touches_axis,
            touches_ground: self.touches_ground,
        }
    }

    /// True when the closed polygon has no self-intersections.
    pub fn is_simple(&self) -> bool {
        polygon_is_simple(&self.polygon(self.scale() / 512.0))
    }

    /// Whether `p` lies strictly inside the enclosed region.
    pub fn contains(&self, p: [f64; 2], max_len: f64) -> bool {
        point_in_polygon(&self.polygon(max_len), p)
    }
}

/// Signed shoelace area (positive for counter-clockwise).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Fixed proportions of the stacked-primitive human generatrix, as fractions
/// of the body height `h` (z values) or girth `R_h` (ρ values).
pub mod human_proportions {
    /// Radius of the merged leg column.
    pub const LEG_RADIUS: f64 = 0.55;
    /// Top of the leg column.
    pub const LEG_TOP: f64 = 0.45;
    /// Height where the torso ellipse reaches `R_h`.
    pub const TORSO_CENTER: f64 = 0.60;
    /// Top of the torso ellipse (symmetric about `TORSO_CENTER`).
    pub const TORSO_TOP: f64 = 0.75;
    /// End of the shoulder taper.
    pub const SHOULDER_TOP: f64 = 0.80;
    pub const NECK_RADIUS: f64 = 0.30;
    /// Horizontal semi-axis of the head.
    pub const HEAD_RADIUS: f64 = 0.55;
    /// Vertical semi-axis of the head (0.065·1.7 m ≈ 0.55·0.2 m: a sphere at the
    /// reference body size).
    pub const HEAD_HALF_HEIGHT: f64 = 0.065;
}

/// Stacked-primitive human generatrix standing on `z = 0`.
///
/// Total height is `h` and maximum radius `r_h`; every z coordinate scales with
/// `h` and every ρ coordinate with `r_h`.
pub fn build_human_profile(h: f64, r_h: f64) -> Result<BoRProfile> {
    use human_proportions::*;
    if !(0.5..=2.5).contains(&h) {
        return Err(Error::Parameter(format!("body height {h} m outside [0.5, 2.5]")));
    }
    if !(0.05..=0.5).contains(&r_h) {
        return Err(Error::Parameter(format!("body girth {r_h} m outside [0.05, 0.5]")));
    }
    let r_leg = LEG_RADIUS * r_h;
    let torso_half = (TORSO_CENTER - LEG_TOP) * h;
    // Semi-height making the torso ellipse meet the leg column radius.
    let torso_rz = torso_half / (1.0 - LEG_RADIUS * LEG_RADIUS).sqrt();
    let t_torso = (torso_half / torso_rz).asin();

    let head_rx = HEAD_RADIUS * r_h;
    let head_rz = HEAD_HALF_HEIGHT * h;
    let head_cz = h - head_rz;
    let r_neck = NECK_RADIUS * r_h;
    let t_neck = -(r_neck / head_rx).acos();
    let neck_top = head_cz + head_rz * t_neck.sin();

    let segments = vec![
        Segment::Line {
            a: [r_leg, 0.0],
            b: [r_leg, LEG_TOP * h],
        },
        Segment::Arc {
            center: [0.0, TORSO_CENTER * h],
            radii: [r_h, torso_rz],
            start: -t_torso,
            end: t_torso,
        },
        Segment::Line {
            a: [r_leg, TORSO_TOP * h],
            b: [r_neck, SHOULDER_TOP * h],
        },
        Segment::Line {
            a: [r_neck, SHOULDER_TOP * h],
            b: [r_neck, neck_top],
        },
        Segment::Arc {
            center: [0.0, head_cz],
            radii: [head_rx, head_rz],
            start: t_neck,
            end: FRAC_PI_2,
        },
    ];
    let mut segments = segments;
    snap_chain(&mut segments);
    BoRProfile::new(segments)
}

/// Removes floating-point drift between consecutive segment end points by
/// turning line end points into the exact neighbouring arc values.
fn snap_chain(segments: &mut [Segment]) {
    for i in 0..segments.len() {
        if i + 1 < segments.len() {
            let next_start = segments[i + 1].start();
            if let Segment::Line { b, .. } = &mut segments[i] {
                *b = next_start;
            }
        }
        if i > 0 {
            let prev_end = segments[i - 1].end();
            if let Segment::Line { a, .. } = &mut segments[i] {
                *a = prev_end;
            }
        }
    }
}

/// Rectangle `[0, r_c] × [0, h_c]` standing on the ground.
pub fn build_cylinder_profile(r_c: f64, h_c: f64) -> Result<BoRProfile> {
    if !(r_c > 0.0 && h_c > 0.0) {
        return Err(Error::Parameter(format!(
            "cylinder dimensions must be positive (r_c = {r_c}, h_c = {h_c})"
        )));
    }
    BoRProfile::new(vec![
        Segment::Line {
            a: [r_c, 0.0],
            b: [r_c, h_c],
        },
        Segment::Line {
            a: [r_c, h_c],
            b: [0.0, h_c],
        },
    ])
}

/// Rectangle `[0, r_c] × [z0, z0 + h_c]` away from any ground.
pub fn build_floating_cylinder_profile(r_c: f64, z0: f64, h_c: f64) -> Result<BoRProfile> {
    if !(r_c > 0.0 && h_c > 0.0) {
        return Err(Error::Parameter("cylinder dimensions must be positive".into()));
    }
    BoRProfile::new(vec![
        Segment::Line {
            a: [0.0, z0],
            b: [r_c, z0],
        },
        Segment::Line {
            a: [r_c, z0],
            b: [r_c, z0 + h_c],
        },
        Segment::Line {
            a: [r_c, z0 + h_c],
            b: [0.0, z0 + h_c],
        },
    ])
}

/// Half-disk generatrix of a sphere centred on the axis at `center_z`.
pub fn build_sphere_profile(radius: f64, center_z: f64, ground: bool) -> Result<BoRProfile> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("sphere radius must be positive, got {radius}")));
    }
    if ground && center_z < radius {
        return Err(Error::Geometry(format!(
            "sphere of radius {radius} m centred at z = {center_z} m pierces the ground"
        )));
    }
    BoRProfile::new(vec![Segment::Arc {
        center: [0.0, center_z],
        radii: [radius, radius],
        start: -FRAC_PI_2,
        end: FRAC_PI_2,
    }])
}
