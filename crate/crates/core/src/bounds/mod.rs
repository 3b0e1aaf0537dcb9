//! Explicit constants, word filters, the filtered exponential sum and the
//! decay experiments built on them.

pub mod constants;
pub mod decay;
pub mod vdc;
pub mod wm;
pub mod words;

pub use constants::{
    compute_constants, compute_m, compute_n_kappa, gamma_kappa, solve_delta_kappa, BundleOptions,
    ConstantsBundle, LogGrouping, MParams, MResult,
};
pub use decay::{eval_decay_terms, fourier_decay, fourier_decay_with_bundle, DecayConfig, DecayReport};
pub use wm::{eval_w_m, l2_norm_w_m, WmParams, WmSum};
pub use words::{bad_set_mass, filter_g_m, fit_eta, FilterMode, WordFilter};
