//! Curved domains given by level sets, approximated by polygons `Omega_h`
//! inside `Omega`, with boundary data transferred along `x + delta(x) sigma`.

mod correction;
mod levelset;

pub use correction::{
    assemble_bdt_bh, assemble_bdt_nitsche, choose_sigma, correction_blocks, delta, kstar_default,
    recover_multiplier_bdt, tau_report, CorrectionConfig, DeltaRegime, EdgeCorrection, SigmaStrategy, TauReport,
};
pub use levelset::{ray_exit, LevelSet, LevelSetDomain};
