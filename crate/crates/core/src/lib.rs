//! Randomly perforated domains: sampling of marked point processes, the
//! good/bad hole decomposition, explicit capacitary correctors, mesoscopic
//! coverings, rate experiments and a small finite-difference backend.

pub mod corrector;
pub mod covering;
pub mod error;
pub mod export;
pub mod mecke;
pub mod partition;
pub mod pde;
pub mod process;
pub mod rates;
pub mod spatial;

pub use error::{Error, Result};
