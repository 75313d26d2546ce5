//! Exact planar geometry for dyadic squares: projections onto a line, shadow
//! arcs seen from a point, unions of closed intervals, and first-hit ray tests.
//! Every decision is made in exact rationals.

mod direction;
mod project;
mod ray;
mod union;

pub use direction::{ArcFrame, Axis, Direction, Side, Viewpoint};
pub use project::{lattice_depth, lattice_shadow, project_square, shadow_arc};
#[allow(unused_imports)]
pub(crate) use project::{lattice_arc, lattice_corner_coord};
pub use ray::{cells_on_line, ray_first_hit, Point, Ray};
pub use union::{union_insert, uncovered_part, ArcUnion, Interval, IntervalUnion};
