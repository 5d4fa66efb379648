//! Telematics feature pipeline: contract/trip ingestion, trip-to-contract
//! linking, descriptor vectors, handcrafted features, preprocessing recipes,
//! and vehicle-level splitting.

pub mod handcrafted;
pub mod io;
pub mod link;
pub mod prepare;
pub mod recipe;
pub mod records;
pub mod split;
pub mod telvector;

pub use handcrafted::{build_handcrafted, HandcraftedFeatures, HANDCRAFTED_NAMES};
pub use link::{link_trips, LinkedTrips};
pub use prepare::{prepare, PreparedSplits};
pub use recipe::{apply_recipe, fit_recipe, FeatureBundle, PreprocessingRecipe};
pub use records::{ContractRecord, TripRecord};
pub use split::{split_by_vehicle, SplitAssignment};
pub use telvector::{build_telematics_vector, TelematicsVector, TELE_DIM};
