use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::scalar::{db_to_linear, linear_to_db, loss_amplitude, Real};

/// All-pass micro-ring resonator seen from its through port.
///
/// The complex response is
///
/// ```text
///            t - a·e^{iφ}
///   H(φ) = ---------------- · 10^(-excess/20),   φ = 2π (Δf - offset) / FSR
///           1 - t·a·e^{iφ}
/// ```
///
/// with `t` the bus self-coupling and `a` the round-trip amplitude
/// transmission. Fields follow the physics time convention (`e^{-iωt}`), in
/// which `e^{iφ}` is a delay of one round trip and the filter is causal.
///
/// Under- and over-coupled rings (`a < t` and `a > t`) share the same
/// magnitude response; [`fit_ring_params`] always returns the under-coupled
/// branch `a ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingModel<T> {
    pub fsr_hz: T,
    pub t_self: T,
    pub a_rt: T,
    pub resonance_offset_hz: T,
    pub excess_loss_db: T,
}

impl<T: Real> RingModel<T> {
    pub fn new(fsr_hz: T, t_self: T, a_rt: T) -> Result<Self> {
        let model = Self {
            fsr_hz,
            t_self,
            a_rt,
            resonance_offset_hz: T::zero(),
            excess_loss_db: T::zero(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_resonance_offset(mut self, offset_hz: T) -> Self {
        self.resonance_offset_hz = offset_hz;
        self
    }

    pub fn with_excess_loss(mut self, excess_loss_db: T) -> Result<Self> {
        self.excess_loss_db = excess_loss_db;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fsr_hz > T::zero() && self.fsr_hz.is_finite()) {
            return Err(Error::invariant("ring.fsr_hz", "must be finite and > 0"));
        }
        if !(self.t_self > T::zero() && self.t_self < T::one()) {
            return Err(Error::invariant("ring.t_self", "must lie in (0, 1)"));
        }
        if !(self.a_rt > T::zero() && self.a_rt <= T::one()) {
            return Err(Error::invariant("ring.a_rt", "must lie in (0, 1]"));
        }
        if !self.resonance_offset_hz.is_finite() {
            return Err(Error::invariant("ring.resonance_offset_hz", "must be finite"));
        }
        if !(self.excess_loss_db >= T::zero() && self.excess_loss_db.is_finite()) {
            return Err(Error::invariant("ring.excess_loss_db", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Round-trip phase, wrapped to `[-π, π]`.
    pub fn round_trip_phase(&self, detuning_hz: T) -> T {
        let x = (detuning_hz - self.resonance_offset_hz) / self.fsr_hz;
        (x - x.round()) * T::TAU()
    }

    /// Complex through-port amplitude including the flat excess loss.
    pub fn response(&self, detuning_hz: T) -> Complex<T> {
        let phi = self.round_trip_phase(detuning_hz);
        let (t, a) = (self.t_self, self.a_rt);
        let z = Complex::from_polar(T::one(), phi);
        let h = (Complex::from(t) - z * a) / (Complex::from(T::one()) - z * (t * a));
        h * loss_amplitude(self.excess_loss_db)
    }

    /// Power transmission of the resonator alone (no excess loss) at a given
    /// round-trip phase. Written in terms of `sin²(φ/2)` so it stays accurate
    /// close to critical coupling.
    pub fn intrinsic_power_at_phase(&self, phi: T) -> T {
        let (t, a) = (self.t_self, self.a_rt);
        let s = (phi / T::lit(2.0)).sin().powi(2);
        let four_at_s = T::lit(4.0) * a * t * s;
        ((t - a).powi(2) + four_at_s) / ((T::one() - t * a).powi(2) + four_at_s)
    }

    /// Power transmission `|H|²` including excess loss.
    pub fn power(&self, detuning_hz: T) -> T {
        self.intrinsic_power_at_phase(self.round_trip_phase(detuning_hz))
            * db_to_linear(-self.excess_loss_db)
    }

    /// Intrinsic transmission on resonance.
    pub fn on_resonance_transmission(&self) -> T {
        let (t, a) = (self.t_self, self.a_rt);
        ((t - a) / (T::one() - t * a)).powi(2)
    }

    /// Intrinsic transmission half-way between resonances.
    pub fn anti_resonance_transmission(&self) -> T {
        let (t, a) = (self.t_self, self.a_rt);
        ((t + a) / (T::one() + t * a)).powi(2)
    }

    /// Notch depth relative to the off-resonance level, in dB.
    pub fn notch_extinction_db(&self) -> T {
        linear_to_db(self.anti_resonance_transmission() / self.on_resonance_transmission())
    }

    /// Full width of the notch at half depth, measured on the linear power
    /// scale half-way between the on- and anti-resonance levels.
    pub fn fwhm_hz(&self) -> T {
        let (t, a) = (self.t_self, self.a_rt);
        let t0 = self.on_resonance_transmission();
        let half = (t0 + self.anti_resonance_transmission()) / T::lit(2.0);
        let s_half = (half * (T::one() - t * a).powi(2) - (t - a).powi(2))
            / (T::lit(4.0) * a * t * (T::one() - half));
        let s_half = s_half.max(T::zero()).min(T::one());
        let phi_half = T::lit(2.0) * s_half.sqrt().asin();
        // full width in phase is 2·phi_half; one FSR is 2π
        T::lit(2.0) * phi_half / T::TAU() * self.fsr_hz
    }

    pub fn finesse(&self) -> T {
        self.fsr_hz / self.fwhm_hz()
    }

    /// Amplitude decay time of the resonator field, `1 / (π·FWHM)`.
    pub fn photon_lifetime_s(&self) -> T {
        T::one() / (T::PI() * self.fwhm_hz())
    }

    pub fn is_under_coupled(&self) -> bool {
        self.a_rt <= self.t_self
    }
}

/// Through-port complex amplitude of `model` at `detuning_hz`.
pub fn ring_response<T: Real>(model: &RingModel<T>, detuning_hz: T) -> Complex<T> {
    model.response(detuning_hz)
}

/// `(t, a)` from the loaded round-trip product `p = t·a` and the on-resonance
/// amplitude `g = (t - a)/(1 - t·a)`, under-coupled branch.
fn coupling_from_product<T: Real>(p: T, g: T) -> (T, T) {
    let d = g * (T::one() - p);
    let t = (d + (d * d + T::lit(4.0) * p).sqrt()) / T::lit(2.0);
    (t, t - d)
}

/// For a fixed loaded product `p`, the under-coupled `(t, a)` whose notch
/// depth equals `extinction` (linear). The fixed point converges because the
/// anti-resonance level barely depends on `g`.
fn coupling_for_extinction<T: Real>(p: T, extinction: T) -> (T, T) {
    let mut g = T::zero();
    for _ in 0..200 {
        let (t, a) = coupling_from_product(p, g);
        let t_max = ((t + a) / (T::one() + t * a)).powi(2);
        let next = (t_max / extinction).sqrt();
        let done = (next - g).abs() <= T::eps() * T::lit(4.0);
        g = next;
        if done {
            break;
        }
    }
    coupling_from_product(p, g)
}

/// Solves for the ring that shows the requested FSR, half-depth FWHM and notch
/// extinction. `extinction_db = ∞` yields critical coupling (`t = a`).
///
/// The under-coupled solution (`a_rt ≤ t_self`) is returned.
pub fn fit_ring_params<T: Real>(fsr_hz: T, fwhm_hz: T, extinction_db: T) -> Result<RingModel<T>> {
    if !(fsr_hz > T::zero() && fsr_hz.is_finite()) {
        return Err(Error::invariant("fsr_hz", "must be finite and > 0"));
    }
    if !(fwhm_hz > T::zero() && fwhm_hz < fsr_hz) {
        return Err(Error::invariant("fwhm_hz", "must lie in (0, fsr_hz)"));
    }
    if !(extinction_db > T::zero()) {
        return Err(Error::invariant("extinction_db", "must be > 0"));
    }
    let extinction = db_to_linear(extinction_db);

    // The loaded product is searched through u = ln(1 - p); the width grows
    // monotonically with u.
    let width_at = |u: T| -> T {
        let p = T::one() - u.exp();
        let (t, a) = coupling_for_extinction(p, extinction);
        RingModel {
            fsr_hz,
            t_self: t,
            a_rt: a,
            resonance_offset_hz: T::zero(),
            excess_loss_db: T::zero(),
        }
        .fwhm_hz()
    };
    let u_narrow = T::eps().sqrt().ln();
    let u_wide = (T::one() - T::lit(1e-4)).ln();
    let (w_narrow, w_wide) = (width_at(u_narrow), width_at(u_wide));
    if !(fwhm_hz > w_narrow && fwhm_hz < w_wide) {
        return Err(Error::NoSolution(format!(
            "FWHM {fwhm_hz} Hz with {extinction_db} dB extinction is outside the reachable range \
             [{w_narrow}, {w_wide}] Hz for FSR {fsr_hz} Hz"
        )));
    }
    let u = bisect(|u| width_at(u) - fwhm_hz, u_narrow, u_wide, 300);
    let p = T::one() - u.exp();
    let (t, a) = coupling_for_extinction(p, extinction);
    if !(t > T::zero() && t < T::one() && a > T::zero() && a <= T::one()) {
        return Err(Error::NoSolution(format!("solution t={t}, a={a} is unphysical")));
    }
    RingModel::new(fsr_hz, t, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FSR: f64 = 120.1e9;
    const FWHM: f64 = 0.27e9;
    const EXT: f64 = 23.7;

    fn paper_ring() -> RingModel<f64> {
        fit_ring_params(FSR, FWHM, EXT).unwrap()
    }

    /// Brute-force FWHM: scan the power response on a fine grid and locate the
    /// half-depth crossings by linear interpolation.
    fn scanned_fwhm(m: &RingModel<f64>) -> f64 {
        let half = (m.on_resonance_transmission() + m.anti_resonance_transmission()) / 2.0;
        let n = 2_000_001;
        let span = 10.0 * m.fwhm_hz();
        let step = span / (n - 1) as f64;
        let mut crossings = vec![];
        let mut prev = (-span / 2.0, m.intrinsic_power_at_phase(m.round_trip_phase(-span / 2.0)));
        for i in 1..n {
            let d = -span / 2.0 + i as f64 * step;
            let p = m.intrinsic_power_at_phase(m.round_trip_phase(d));
            if (prev.1 - half).signum() != (p - half).signum() {
                crossings.push(prev.0 + (half - prev.1) / (p - prev.1) * step);
            }
            prev = (d, p);
        }
        assert_eq!(crossings.len(), 2);
        crossings[1] - crossings[0]
    }

    #[test]
    fn paper_figures_round_trip() {
        let m = paper_ring();
        assert!(m.is_under_coupled());
        assert!((m.fwhm_hz() / FWHM - 1.0).abs() < 1e-6);
        assert!((m.notch_extinction_db() / EXT - 1.0).abs() < 1e-6);
        // the closed-form width agrees with a brute-force scan
        assert!((scanned_fwhm(&m) / FWHM - 1.0).abs() < 1e-4);
    }

    #[test]
    fn finesse_of_paper_ring() {
        let m = paper_ring();
        assert!((m.finesse() - 444.814_814_8).abs() < 1e-3);
    }

    #[test]
    fn on_resonance_depth_relative_to_baseline() {
        let m = paper_ring();
        let baseline = m.power(FSR / 2.0);
        let dip = linear_to_db(m.power(0.0) / baseline);
        assert!((dip + 23.7).abs() < 0.3, "dip {dip}");
    }

    #[test]
    fn anti_resonance_close_to_unity() {
        let m = paper_ring().with_excess_loss(16.7).unwrap();
        let p = m.power(FSR / 2.0);
        assert!((linear_to_db(p) + 16.7).abs() < 0.5);
    }

    #[test]
    fn periodic_over_fsr() {
        let m = paper_ring().with_resonance_offset(0.013e9);
        for k in -3..=3 {
            for d in [0.0, 0.1e9, -0.37e9, 5.0e9] {
                let h0 = m.response(d);
                let h1 = m.response(d + k as f64 * FSR);
                assert!((h0 - h1).norm() < 1e-12, "k={k} d={d}");
            }
        }
    }

    #[test]
    fn response_magnitude_matches_power() {
        let m = paper_ring().with_excess_loss(3.0).unwrap();
        for d in [-1e9, -0.1e9, 0.0, 0.05e9, 60e9] {
            assert!((m.response(d).norm_sqr() - m.power(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_coupling_limit() {
        let m = fit_ring_params(FSR, FWHM, f64::INFINITY).unwrap();
        assert!((m.t_self - m.a_rt).abs() < 1e-12);
        assert!(m.on_resonance_transmission() < 1e-20);
    }

    #[test]
    fn f32_fit_is_usable() {
        let m = fit_ring_params(120.1e9f32, 0.27e9, 23.7).unwrap();
        assert!((m.fwhm_hz() / 0.27e9 - 1.0).abs() < 1e-2);
        assert!((m.notch_extinction_db() / 23.7 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_ring_params(FSR, FSR * 1.1, EXT).is_err());
        assert!(fit_ring_params(FSR, FWHM, 0.0).is_err());
        assert!(fit_ring_params(-1.0, FWHM, EXT).is_err());
        assert!(RingModel::new(FSR, 1.0, 0.9).is_err());
        assert!(RingModel::new(FSR, 0.9, 0.0).is_err());
        assert!(RingModel::new(FSR, 0.9, 0.9).unwrap().with_excess_loss(-1.0).is_err());
    }

    #[test]
    fn infeasible_width_reports_no_solution() {
        // almost the whole FSR cannot be a half-depth width of a shallow notch
        match fit_ring_params(FSR, 0.999 * FSR, 0.5) {
            Err(Error::NoSolution(_)) => {}
            other => panic!("expected NoSolution, got {other:?}"),
        }
    }
}
