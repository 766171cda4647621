//! DPS quantum key distribution link simulator with a micro-ring resonator
//! demodulator.
//!
//! The physics modules are generic over the scalar type ([`scalar::Real`],
//! implemented for `f32` and `f64`). The aliases at the crate root fix the
//! scalar to `f64`; [`single`] has the same set for `f32`.

pub mod config;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod field;
pub mod numeric;
pub mod optics;
pub mod output;
pub mod qkd;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};

pub type RingModel = optics::RingModel<f64>;
pub type MziModel = optics::MziModel<f64>;
pub type Demodulator = optics::Demodulator<f64>;
pub type SpectrumTable = optics::SpectrumTable<f64>;
pub type RingFit = optics::RingFit<f64>;
pub type SymbolFrame = field::SymbolFrame<f64>;
pub type SampledField = field::SampledField<f64>;
pub type SlotEnergies = field::SlotEnergies<f64>;
pub type SpadModel = detector::SpadModel<f64>;
pub type ClickTrain = detector::ClickTrain<f64>;
pub type LinkParams = qkd::LinkParams<f64>;
pub type QberBreakdown = qkd::QberBreakdown<f64>;
pub type KeyRateReport = qkd::KeyRateReport<f64>;

/// `f32` aliases.
pub mod single {
    pub type RingModel = crate::optics::RingModel<f32>;
    pub type MziModel = crate::optics::MziModel<f32>;
    pub type Demodulator = crate::optics::Demodulator<f32>;
    pub type SpectrumTable = crate::optics::SpectrumTable<f32>;
    pub type SymbolFrame = crate::field::SymbolFrame<f32>;
    pub type SampledField = crate::field::SampledField<f32>;
    pub type SlotEnergies = crate::field::SlotEnergies<f32>;
    pub type SpadModel = crate::detector::SpadModel<f32>;
    pub type LinkParams = crate::qkd::LinkParams<f32>;
    pub type QberBreakdown = crate::qkd::QberBreakdown<f32>;
    pub type KeyRateReport = crate::qkd::KeyRateReport<f32>;
}
