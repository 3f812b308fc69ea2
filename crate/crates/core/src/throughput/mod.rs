//! Exact covariance and log-det rate evaluation for NOMA, CoMP, DPC and
//! generalized clusters.

mod decode;
mod precoder;
mod rates;

pub use decode::{
    interference_covariance, received_all, DecodeStructure, DecodeTerm, MessageTerms, ReceivedAt, Scheme,
};
pub use precoder::{sum_power, PrecoderSet};
pub use rates::{
    cluster_rates, comp_rates, covariance_bundle, dpc_rates, evaluate, miso_rates, nats_to_bps_hz,
    noma_rates, rotate_phases, CovarianceBundle, DecoderRate, PairCovariances, RateReport, RateSummary,
    UeRate, UeRateRow,
};
