//! Certified fixed-point arithmetic and orbits `f_n(x) mod 1`.

mod fixed;
mod orbit;

pub use fixed::{ErrBound, FixedReal};
pub use orbit::{
    eval_family_mod_one, family_bits, mod_one_distance, powers_mod_one, rational_orbit,
    required_bits, required_bits_with_ceiling, OrbitFragment, DEFAULT_BIT_CEILING, DEFAULT_TOL,
    GUARD_BITS, STATISTICS_MAX_ERR,
};
