//! Histogram estimation and the KLD / JSD / EMD divergences between a real
//! and a synthetic marginal.

mod divergence;
mod histogram;
mod profile;

pub use divergence::{emd_1d, jsd, kld};
pub use histogram::{build_histogram, BinningSpec, Histogram, Sample, Support};
pub use profile::{
    divergence_profile, group_divergence_profile, DivergenceReport, FeatureDivergence, GroupDivergence, GroupEntry,
    SkippedGroup,
};
