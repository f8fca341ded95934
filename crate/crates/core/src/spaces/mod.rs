//! Finite element spaces: Raviart-Thomas fluxes and discontinuous scalars.

mod dg;
mod field;
mod rt;

pub use dg::{DgSpace, DgTabulation};
pub use field::{DgField, DiscreteField, FunctionSpace, RtField};
pub use rt::{
    face_moment_argument, is_supported, rt_face_dofs, rt_interior_dofs, rt_local_dim,
    FacePermutation, RtReference, RtSpace, RtTabulation,
};
