//! Randers metrics, their stationary spacetimes, geodesics, lightlike lifts
//! and Morse-index bookkeeping on discretized path spaces.

pub mod dual;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod geodesic;
pub mod index;
pub mod lift;
pub mod numeric;
pub mod pathspace;
pub mod probe;
pub mod spacetime;
pub mod trajectory;

pub use dual::{Dual, Real};
pub use error::{GeoError, Result};
pub use expr::Expr;
pub use finsler::{energy, energy_segments, ChartDomain, FinslerJet, OneFormField, RandersMetric, RiemannianField, ValidationReport};
pub use geodesic::{
    el_residual, finsler_geodesic_ivp, lorentz_el_residual, lorentz_geodesic_ivp, reparam_constant_h_speed, shoot_bvp,
    ShootingProblem, ShootingSolution, SprayEvaluator,
};
pub use index::{
    conformal_index_check, conjugate_points, hessian_e, hessian_j, morse_index_cp, reversed_index_check, verify_src_index,
    ConformalCheck, ConjugatePoint, ConjugateScan, DiscreteHessian, IndexMethod, IndexOptions, IndexReport, LinearizedFlow,
    ReversedCheck, SrcIndexVerification,
};
pub use lift::{lightlike_lift, project, psi_prime, uhlenbeck_j, AdmissibleVariation, LiftedPath, VariationField};
pub use pathspace::{first_variation, second_variation, H10Field, PathGridH10, SampledField, SegmentGrid, SegmentedPath};
pub use probe::{
    build_family, find_witness, gateaux_hessian_e, gradient_e, probe, residual, scaling_exponent, EpsilonFamily, ProbeOptions,
    ProbeReport, ResidualCurve, ScalingVerdict,
};
pub use spacetime::{
    conformal_rescale, src_backward, src_forward, CausalClass, LorentzProduct, SpacetimeMetric, SpacetimeVector, StationaryData,
};
pub use trajectory::{Logs, Trajectory};
