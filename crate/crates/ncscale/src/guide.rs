//! Placeholder, filled in module by module.
