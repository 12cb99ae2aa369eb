//! Numerical laboratory for the two-weight theory of the Hilbert transform.

pub mod dyadic;
pub mod functionals;
pub mod haar;
pub mod measure;
pub mod transform;
pub mod conditions;
pub mod corona;
pub mod cantor;
pub mod cli;
