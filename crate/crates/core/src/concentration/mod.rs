//! Anytime high-probability machinery: certified series constants, the
//! bound and its Monte-Carlo coverage, supermartingale traces, and checks of
//! the two concentration lemmas behind them.

mod constants;
mod coverage;
mod lemmas;
mod supermartingale;

pub use constants::{
    anytime_bound, anytime_bound_with_power, gamma_constants, schedule_condition_holds, series_tail, AnytimeConstants,
    Bracket, GammaConstants,
};
pub use coverage::{anytime_coverage, BoundConstants, CoverageEntry, CoverageReport};
pub use lemmas::{
    exp_inequality_scan, mgf_lemma_check, tail_lemma_check, young_inequality_scan, GaussianSampler, InequalityScan,
    MgfEntry, MgfPreconditions, MgfReport, PairSampler, PathSampler, TailEntry, TailReport, ZeroSampler,
};
pub use supermartingale::{
    supermartingale_mc, supermartingale_trace, SupermartingaleMcReport, SupermartingaleTrace, EXPONENT_CLAMP,
};
