//! Test-side oracles. Nothing here calls into the code under test except to
//! read parameters or build inputs; every expected value is recomputed from
//! first principles.

pub mod fd;
pub mod gradcheck;
pub mod reference;
pub mod synth;
pub mod tokcheck;
pub mod wordpiece;
