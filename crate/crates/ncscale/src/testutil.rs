//! Test-side alias for the shared samplers.

pub(crate) use crate::sampling::*;
