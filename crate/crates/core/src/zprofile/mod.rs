//! Depth profiles through reconstructed volumes and the two profile
//! detectors: a reconstruction autoencoder trained on baseline profiles
//! only, and a supervised two-class 1D CNN.

mod ae;
mod profile;
mod score;
mod synth;
mod zcnn;

pub use ae::{anomaly_score, build_ae, train_ae, AeConfig, AeModel, ProfileNorm};
pub use profile::{extract_zprofiles, ProfileGrid, ZProfile, DEFAULT_WINDOW};
pub use score::{anomaly_map, calibrate_tau, grid_truth, percentile, roc_auc, AnomalyMap, DEFAULT_PERCENTILE};
pub use synth::{synth_damaged_volume, DamageRegion, LayerBand, SynthVolume, SynthVolumeSpec};
pub use zcnn::{build_zcnn, classify_profile, train_zcnn, ZCnnConfig, ZCnnModel, ZSample, DAMAGED};
