//! Demodulator transfer functions: the all-pass micro-ring through port, the
//! reference delay interferometer, and fitting of ring parameters.
//!
//! Detuning (Hz, relative to the filter's reference frequency) is the only
//! frequency axis. Spectra given in wavelength are converted on ingestion.

mod mzi;
mod ring;
mod spectrum;

pub use mzi::{mzi_response, MziModel, MziPort};
pub use ring::{fit_ring_params, ring_response, RingModel};
pub use spectrum::{
    fit_to_measurement, FitOptions, RingFit, SpectrumAxis, SpectrumTable, REFERENCE_WAVELENGTH_NM,
};

use num_complex::Complex;

use crate::scalar::Real;

/// A passive linear filter described by its complex response versus detuning.
pub trait TransferFunction<T: Real>: Sync {
    fn response(&self, detuning_hz: T) -> Complex<T>;

    /// Duration over which the impulse response keeps a memory of the input.
    /// Used to size guard intervals at frame edges.
    fn memory_s(&self) -> T {
        T::zero()
    }
}

impl<T: Real> TransferFunction<T> for RingModel<T> {
    fn response(&self, detuning_hz: T) -> Complex<T> {
        RingModel::response(self, detuning_hz)
    }

    fn memory_s(&self) -> T {
        self.photon_lifetime_s()
    }
}

impl<T: Real> TransferFunction<T> for MziModel<T> {
    fn response(&self, detuning_hz: T) -> Complex<T> {
        MziModel::response(self, detuning_hz)
    }

    fn memory_s(&self) -> T {
        self.delay_s
    }
}

/// The identity filter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unity;

impl<T: Real> TransferFunction<T> for Unity {
    fn response(&self, _detuning_hz: T) -> Complex<T> {
        Complex::from(T::one())
    }
}

/// Adapts a closure into a [`TransferFunction`].
pub struct FnResponse<F>(pub F);

impl<T: Real, F: Fn(T) -> Complex<T> + Sync> TransferFunction<T> for FnResponse<F> {
    fn response(&self, detuning_hz: T) -> Complex<T> {
        (self.0)(detuning_hz)
    }
}

/// Either demodulator family, as used by the link scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demodulator<T> {
    Ring(RingModel<T>),
    Mzi(MziModel<T>),
}

impl<T: Real> Demodulator<T> {
    /// Detuning period of the response (FSR or `1/τ`).
    pub fn period_hz(&self) -> T {
        match self {
            Demodulator::Ring(r) => r.fsr_hz,
            Demodulator::Mzi(m) => m.period_hz(),
        }
    }

    pub fn excess_loss_db(&self) -> T {
        match self {
            Demodulator::Ring(r) => r.excess_loss_db,
            Demodulator::Mzi(m) => m.excess_loss_db,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Demodulator::Ring(_) => "mrr",
            Demodulator::Mzi(_) => "mzi",
        }
    }
}

impl<T: Real> TransferFunction<T> for Demodulator<T> {
    fn response(&self, detuning_hz: T) -> Complex<T> {
        match self {
            Demodulator::Ring(r) => r.response(detuning_hz),
            Demodulator::Mzi(m) => m.response(detuning_hz),
        }
    }

    fn memory_s(&self) -> T {
        match self {
            Demodulator::Ring(r) => r.memory_s(),
            Demodulator::Mzi(m) => m.memory_s(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn both_families_are_passive(
            t in 0.5f64..0.999,
            ratio in 0.5f64..1.0,
            excess in 0.0f64..20.0,
            trim in -3.2f64..3.2,
            d in -500e9f64..500e9,
        ) {
            let ring = RingModel::new(120.1e9, t, t * ratio).unwrap().with_excess_loss(excess).unwrap();
            prop_assert!(ring.response(d).norm_sqr() <= 1.0 + 1e-12);
            for port in [MziPort::Destructive, MziPort::Constructive] {
                let mzi = MziModel::new(1e-9, port).unwrap().with_phase_trim(trim).with_excess_loss(excess).unwrap();
                prop_assert!(mzi.response(d).norm_sqr() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn ring_periodicity_holds_everywhere(
            t in 0.9f64..0.9999,
            ratio in 0.9f64..1.0,
            d in -200e9f64..200e9,
        ) {
            let ring = RingModel::new(120.1e9, t, t * ratio).unwrap();
            let diff = ring.response(d) - ring.response(d + 120.1e9);
            prop_assert!(diff.norm() < 1e-12);
        }

        #[test]
        fn fit_round_trip_on_feasible_grid(
            fwhm_ghz in 0.05f64..5.0,
            ext_db in 3.0f64..45.0,
        ) {
            let m = fit_ring_params(120.1e9, fwhm_ghz * 1e9, ext_db).unwrap();
            prop_assert!((m.fwhm_hz() / (fwhm_ghz * 1e9) - 1.0).abs() < 0.01);
            prop_assert!((m.notch_extinction_db() / ext_db - 1.0).abs() < 0.01);
            prop_assert!(m.a_rt <= m.t_self);
        }
    }
}
