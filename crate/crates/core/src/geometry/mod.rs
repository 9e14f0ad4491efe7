//! Body generatrices and triangulation of the meridian half-plane.

pub mod mesh;
pub mod profile;

pub use mesh::{triangulate, BoundaryTag, DomainBounds, DomainSpec, Mesh2D, Region};
pub use profile::{
    build_cylinder_profile, build_floating_cylinder_profile, build_human_profile,
    build_sphere_profile, BoRProfile, Segment,
};
