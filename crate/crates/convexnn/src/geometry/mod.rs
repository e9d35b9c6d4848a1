//! Convex geometry behind the Frank-Wolfe step: zonotopes, ellipsoids and support
//! functions.
//!
//! For `α = 1` and `p = 2` the step equals the Hausdorff distance between two zonotopes
//! built from the data. For `α ≥ 2` it is a saddle problem over nonnegative coefficient
//! vectors. Ellipsoids enter as approximations of zonotopes through the minimum-volume
//! enclosing ellipsoid.

mod ellipsoid;
mod saddle;
mod zonotope;

pub use ellipsoid::{ellipsoid_hausdorff, ellipsoid_one_sided, mvee, Ellipsoid};
pub use saddle::{alpha2_saddle, SaddleResult};
pub use zonotope::{
    box_least_squares, fw_step_as_hausdorff, hausdorff_by_directions, one_sided_distance,
    zonotope_hausdorff, Zonotope,
};
