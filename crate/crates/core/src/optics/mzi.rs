use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{loss_amplitude, Real};

/// Output port of the delay interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MziPort {
    Constructive,
    Destructive,
}

/// Unbalanced Mach–Zehnder delay interferometer.
///
/// With `θ = 2π·Δf·τ + trim`, the destructive port is `(1 - e^{iθ})/2` and the
/// constructive port `(1 + e^{iθ})/2`, both scaled by the excess-loss
/// amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziModel<T> {
    pub delay_s: T,
    pub port: MziPort,
    pub phase_trim_rad: T,
    pub excess_loss_db: T,
}

impl<T: Real> MziModel<T> {
    pub fn new(delay_s: T, port: MziPort) -> Result<Self> {
        let m = Self {
            delay_s,
            port,
            phase_trim_rad: T::zero(),
            excess_loss_db: T::zero(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_phase_trim(mut self, trim_rad: T) -> Self {
        self.phase_trim_rad = trim_rad;
        self
    }

    pub fn with_excess_loss(mut self, excess_loss_db: T) -> Result<Self> {
        self.excess_loss_db = excess_loss_db;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s > T::zero() && self.delay_s.is_finite()) {
            return Err(Error::invariant("mzi.delay_s", "must be finite and > 0"));
        }
        if !self.phase_trim_rad.is_finite() {
            return Err(Error::invariant("mzi.phase_trim_rad", "must be finite"));
        }
        if !(self.excess_loss_db >= T::zero() && self.excess_loss_db.is_finite()) {
            return Err(Error::invariant("mzi.excess_loss_db", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Period of the response in detuning, `1/τ`.
    pub fn period_hz(&self) -> T {
        T::one() / self.delay_s
    }

    fn interference_phase(&self, detuning_hz: T) -> T {
        // reduce Δf·τ modulo one before scaling so periodicity survives rounding
        let x = detuning_hz * self.delay_s;
        (x - x.round()) * T::TAU() + self.phase_trim_rad
    }

    pub fn response(&self, detuning_hz: T) -> Complex<T> {
        let e = Complex::from_polar(T::one(), self.interference_phase(detuning_hz));
        let half = T::lit(0.5);
        let h = match self.port {
            MziPort::Destructive => (Complex::from(T::one()) - e) * half,
            MziPort::Constructive => (Complex::from(T::one()) + e) * half,
        };
        h * loss_amplitude(self.excess_loss_db)
    }

    pub fn power(&self, detuning_hz: T) -> T {
        self.response(detuning_hz).norm_sqr()
    }
}

/// Complex amplitude of the selected MZI port at `detuning_hz`.
pub fn mzi_response<T: Real>(model: &MziModel<T>, detuning_hz: T) -> Complex<T> {
    model.response(detuning_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mzi(port: MziPort) -> MziModel<f64> {
        MziModel::new(1e-9, port).unwrap()
    }

    #[test]
    fn destructive_cancels_at_zero() {
        assert!(mzi(MziPort::Destructive).response(0.0).norm() < 1e-15);
    }

    #[test]
    fn destructive_full_transmission_at_half_period() {
        let p = mzi(MziPort::Destructive).power(500e6);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_in_one_over_delay() {
        let m = mzi(MziPort::Destructive).with_phase_trim(0.3);
        for d in [0.0, 0.123e9, -0.77e9] {
            for k in -3..=3 {
                let diff = m.response(d) - m.response(d + k as f64 * 1e9);
                assert!(diff.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ports_are_power_complementary() {
        let d = mzi(MziPort::Destructive).with_phase_trim(0.7);
        let c = mzi(MziPort::Constructive).with_phase_trim(0.7);
        for i in 0..200 {
            let f = -3e9 + i as f64 * 31e6;
            assert!((d.power(f) + c.power(f) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn excess_loss_scales_power() {
        let m = mzi(MziPort::Constructive).with_excess_loss(3.0).unwrap();
        assert!((m.power(0.0) - 10f64.powf(-0.3)).abs() < 1e-12);
    }

    #[test]
    fn invalid_delay_rejected() {
        assert!(MziModel::new(0.0f64, MziPort::Destructive).is_err());
        assert!(MziModel::new(f64::NAN, MziPort::Destructive).is_err());
    }
}
