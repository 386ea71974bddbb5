//! The round sphere S² and the flat cone of angle θ.

mod cone;
mod sphere;

pub use cone::{cone_distance, cone_strict_triangle_scan, sample_cone, ConePoint, ConeSpace};
pub use sphere::{
    sample_sphere, sphere_distance, sphere_geodesic_point, sphere_inversion_map, Sphere2, SpherePoint,
};
