//! Complex baseband field of a DPS pulse train, frequency-domain filtering
//! through any [`TransferFunction`], and per-slot energy integration.
//!
//! Sample amplitudes are normalised so that `Σ|s|²` over a symbol is its mean
//! photon number. Fields follow the physics time convention (`e^{-iωt}`): a
//! forward-FFT bin at frequency `f` sits at optical detuning `-f` from the
//! carrier, and the carrier itself sits at `carrier_detuning_hz` from the
//! filter reference. The carrier offset is kept as metadata rather than
//! written into the samples as a phase ramp, so offsets of many FSRs do not
//! alias on the sample grid.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::TransferFunction;
use crate::rng::{stream, Purpose};
use crate::scalar::{linear_to_db, Real};

/// Smallest accepted samples-per-symbol.
pub const MIN_OVERSAMPLING: usize = 16;
pub const DEFAULT_OVERSAMPLING: usize = 32;

/// Differentially encoded symbol sequence.
///
/// `phases[0] = π·diff_bits[0]` (relative to an implicit reference symbol at
/// phase 0) and `phases[k] = phases[k-1] + π·diff_bits[k]`, reduced mod 2π.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    diff_bits: Vec<bool>,
    phases: Vec<T>,
}

impl<T: Real> SymbolFrame<T> {
    pub fn from_diff_bits(diff_bits: Vec<bool>) -> Result<Self> {
        if diff_bits.is_empty() {
            return Err(Error::Input("symbol frame is empty".into()));
        }
        let mut flipped = false;
        let phases = diff_bits
            .iter()
            .map(|&b| {
                flipped ^= b;
                if flipped {
                    T::PI()
                } else {
                    T::zero()
                }
            })
            .collect();
        Ok(Self { diff_bits, phases })
    }

    /// Uniformly random differential bits from the `(seed, index)` sub-stream.
    pub fn random(len: usize, seed: u64, index: u64) -> Result<Self> {
        let mut rng = stream(seed, Purpose::SymbolBits, index);
        Self::from_diff_bits((0..len).map(|_| rng.gen::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.diff_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diff_bits.is_empty()
    }

    pub fn diff_bits(&self) -> &[bool] {
        &self.diff_bits
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }
}

/// Intra-symbol envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Constant envelope over the whole symbol (phase-only modulation).
    #[default]
    Rectangular,
    /// `(1 - cos)/2` envelope vanishing at symbol edges.
    RaisedCosine,
}

impl PulseShape {
    fn envelope<T: Real>(self, oversampling: usize, mu: T) -> Vec<T> {
        let raw: Vec<T> = match self {
            PulseShape::Rectangular => vec![T::one(); oversampling],
            PulseShape::RaisedCosine => (0..oversampling)
                .map(|n| {
                    let x = (T::from_count(n) + T::lit(0.5)) / T::from_count(oversampling);
                    (T::one() - (T::TAU() * x).cos()) / T::lit(2.0)
                })
                .collect(),
        };
        let energy: T = raw.iter().map(|&v| v * v).sum();
        let scale = (mu / energy).sqrt();
        raw.into_iter().map(|v| v * scale).collect()
    }
}

/// Sampled complex envelope of a pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate_hz: T,
    pub carrier_detuning_hz: T,
    pub symbol_rate_hz: T,
    pub mu: T,
}

impl<T: Real> SampledField<T> {
    /// Samples per symbol, if the sample rate is an integer multiple of the
    /// symbol rate.
    pub fn oversampling(&self) -> Option<usize> {
        let ratio = self.sample_rate_hz / self.symbol_rate_hz;
        let rounded = ratio.round();
        if rounded >= T::one() && (ratio - rounded).abs() <= T::lit(1e-6) * rounded {
            rounded.to_usize()
        } else {
            None
        }
    }

    /// Total energy in photons.
    pub fn total_energy(&self) -> T {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * factor).collect(),
            ..self.clone()
        }
    }
}

/// Builds the sampled field of `frame`.
///
/// `oversampling` is the number of samples per symbol (at least
/// [`MIN_OVERSAMPLING`]).
pub fn synthesize_field<T: Real>(
    frame: &SymbolFrame<T>,
    pulse_shape: PulseShape,
    mu: T,
    symbol_rate_hz: T,
    oversampling: usize,
    carrier_detuning_hz: T,
) -> Result<SampledField<T>> {
    if frame.is_empty() {
        return Err(Error::Input("symbol frame is empty".into()));
    }
    if oversampling < MIN_OVERSAMPLING {
        return Err(Error::invariant(
            "field.oversampling",
            format!("must be at least {MIN_OVERSAMPLING}"),
        ));
    }
    if !(mu >= T::zero() && mu.is_finite()) {
        return Err(Error::invariant("link.mu", "must be finite and >= 0"));
    }
    if !(symbol_rate_hz > T::zero() && symbol_rate_hz.is_finite()) {
        return Err(Error::invariant("link.symbol_rate_hz", "must be finite and > 0"));
    }
    if !carrier_detuning_hz.is_finite() {
        return Err(Error::invariant("link.carrier_detuning_hz", "must be finite"));
    }
    let envelope = pulse_shape.envelope(oversampling, mu);
    let mut samples = Vec::with_capacity(frame.len() * oversampling);
    for &phase in frame.phases() {
        // phases are exactly 0 or π
        let sign = if phase == T::zero() { T::one() } else { -T::one() };
        samples.extend(envelope.iter().map(|&e| Complex::new(sign * e, T::zero())));
    }
    Ok(SampledField {
        samples,
        sample_rate_hz: symbol_rate_hz * T::from_count(oversampling),
        carrier_detuning_hz,
        symbol_rate_hz,
        mu,
    })
}

/// Precomputed FFT plans and response samples for repeated filtering of
/// equally sized fields.
pub struct FilterPlan<T: Real> {
    len: usize,
    sample_rate_hz: T,
    carrier_detuning_hz: T,
    response: Vec<Complex<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> FilterPlan<T> {
    pub fn new(
        response: &dyn TransferFunction<T>,
        len: usize,
        sample_rate_hz: T,
        carrier_detuning_hz: T,
    ) -> Self {
        let mut planner = FftPlanner::new();
        let n = T::from_count(len);
        let bins = (0..len)
            .map(|k| {
                let signed = if k < len.div_ceil(2) {
                    T::from_count(k)
                } else {
                    -T::from_count(len - k)
                };
                let f = signed * sample_rate_hz / n;
                response.response(carrier_detuning_hz - f)
            })
            .collect();
        Self {
            len,
            sample_rate_hz,
            carrier_detuning_hz,
            response: bins,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn matches(&self, field: &SampledField<T>) -> bool {
        field.samples.len() == self.len
            && field.sample_rate_hz == self.sample_rate_hz
            && field.carrier_detuning_hz == self.carrier_detuning_hz
    }

    /// Filters `samples` in place (circular convolution over the frame).
    pub fn apply_in_place(&self, samples: &mut [Complex<T>]) {
        assert_eq!(samples.len(), self.len, "filter plan built for a different length");
        self.forward.process(samples);
        let norm = T::one() / T::from_count(self.len);
        for (s, h) in samples.iter_mut().zip(&self.response) {
            *s = *s * *h * norm;
        }
        self.inverse.process(samples);
    }
}

/// Filters `field` through `response`: each spectral bin is multiplied by the
/// response evaluated at its optical detuning from the filter reference.
pub fn apply_filter<T: Real>(field: &SampledField<T>, response: &dyn TransferFunction<T>) -> SampledField<T> {
    let plan = FilterPlan::new(response, field.samples.len(), field.sample_rate_hz, field.carrier_detuning_hz);
    let mut out = field.clone();
    plan.apply_in_place(&mut out.samples);
    out
}

/// Mean photon number detected per symbol slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEnergies<T> {
    pub energies: Vec<T>,
    pub slot_duration_s: T,
}

impl<T: Real> SlotEnergies<T> {
    pub fn new(energies: Vec<T>, slot_duration_s: T) -> Result<Self> {
        if energies.iter().any(|e| !(*e >= T::zero() && e.is_finite())) {
            return Err(Error::Input("slot energies must be finite and >= 0".into()));
        }
        if !(slot_duration_s > T::zero()) {
            return Err(Error::Input("slot duration must be > 0".into()));
        }
        Ok(Self {
            energies,
            slot_duration_s,
        })
    }

    /// Uniform energy in every slot.
    pub fn uniform(len: usize, mean_photons: T, slot_duration_s: T) -> Result<Self> {
        Self::new(vec![mean_photons; len], slot_duration_s)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn total(&self) -> T {
        self.energies.iter().copied().sum()
    }

    /// Applies a flat power transmission factor (channel loss).
    pub fn attenuate(&mut self, factor: T) {
        for e in &mut self.energies {
            *e = *e * factor;
        }
    }
}

/// Integrates `|s|²` over a window of `window_fraction` symbol durations
/// centred in each symbol. Samples are treated as constant over their sample
/// interval, so partially covered samples contribute proportionally.
pub fn integrate_slots<T: Real>(field: &SampledField<T>, window_fraction: T) -> Result<SlotEnergies<T>> {
    if !(window_fraction > T::zero() && window_fraction <= T::one()) {
        return Err(Error::invariant("field.window_fraction", "must lie in (0, 1]"));
    }
    let os = field
        .oversampling()
        .ok_or_else(|| Error::Input("sample rate is not an integer multiple of the symbol rate".into()))?;
    if field.samples.len() % os != 0 {
        return Err(Error::Input(format!(
            "field holds {} samples, not a whole number of {os}-sample symbols",
            field.samples.len()
        )));
    }
    let width = window_fraction * T::from_count(os);
    let lo = (T::from_count(os) - width) / T::lit(2.0);
    let hi = lo + width;
    let weights: Vec<T> = (0..os)
        .map(|j| {
            let (a, b) = (T::from_count(j), T::from_count(j + 1));
            (b.min(hi) - a.max(lo)).max(T::zero())
        })
        .collect();
    let energies = field
        .samples
        .chunks_exact(os)
        .map(|sym| sym.iter().zip(&weights).map(|(s, &w)| s.norm_sqr() * w).sum())
        .collect();
    Ok(SlotEnergies {
        energies,
        slot_duration_s: T::one() / field.symbol_rate_hz,
    })
}

/// Slots used for mark/space statistics: the first symbol and a trailing
/// guard of `⌈memory / T_sym⌉` symbols are excluded.
pub fn counted_slots(len: usize, memory_s: f64, symbol_rate_hz: f64) -> Range<usize> {
    let guard = (memory_s * symbol_rate_hz).ceil().max(0.0) as usize;
    1.min(len)..len.saturating_sub(guard).max(1.min(len))
}

/// Knobs shared by the field-level demodulation routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSettings {
    pub oversampling: usize,
    pub pulse_shape: PulseShape,
    pub window_fraction: f64,
    /// Reported extinction when the space energy vanishes.
    pub extinction_ceiling_db: f64,
    /// Symbols per FFT block in Monte-Carlo runs.
    pub block_symbols: usize,
    /// Symbols in the frame used to measure demodulation extinction.
    pub extinction_frame: usize,
}

impl Default for FieldSettings {
    fn default() -> Self {
        Self {
            oversampling: DEFAULT_OVERSAMPLING,
            pulse_shape: PulseShape::Rectangular,
            window_fraction: 1.0,
            extinction_ceiling_db: 60.0,
            block_symbols: 1024,
            extinction_frame: 16_384,
        }
    }
}

/// Mark/space statistics of a demodulated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodExtinction<T> {
    pub extinction_db: T,
    /// True when the ratio hit the configured ceiling.
    pub capped: bool,
    pub mean_mark: T,
    pub mean_space: T,
    /// Mean detected energy per counted slot divided by `mu`.
    pub throughput: T,
}

/// Sub-stream index of the frame used for extinction measurements; disjoint
/// from the block indices used by Monte-Carlo runs.
pub const EXTINCTION_FRAME_INDEX: u64 = 1 << 40;

/// Demodulation extinction `10·log10(mean mark energy / mean space energy)`,
/// with labels taken from the transmitted differential bits (`1` = mark).
pub fn demod_extinction<T: Real>(
    response: &dyn TransferFunction<T>,
    symbol_rate_hz: T,
    carrier_detuning_hz: T,
    mu: T,
    frame_length: usize,
    seed: u64,
    settings: &FieldSettings,
) -> Result<DemodExtinction<T>> {
    if frame_length < 1024 {
        return Err(Error::invariant("field.extinction_frame", "must be at least 1024 symbols"));
    }
    if !(mu > T::zero()) {
        return Err(Error::invariant("link.mu", "must be > 0"));
    }
    let frame = SymbolFrame::<T>::random(frame_length, seed, EXTINCTION_FRAME_INDEX)?;
    let field = synthesize_field(
        &frame,
        settings.pulse_shape,
        mu,
        symbol_rate_hz,
        settings.oversampling,
        carrier_detuning_hz,
    )?;
    let filtered = apply_filter(&field, response);
    let slots = integrate_slots(&filtered, T::lit(settings.window_fraction))?;
    let range = counted_slots(frame.len(), response.memory_s().as_f64(), symbol_rate_hz.as_f64());

    let (mut mark, mut space) = (T::zero(), T::zero());
    let (mut n_mark, mut n_space) = (0usize, 0usize);
    for k in range.clone() {
        if frame.diff_bits()[k] {
            mark = mark + slots.energies[k];
            n_mark += 1;
        } else {
            space = space + slots.energies[k];
            n_space += 1;
        }
    }
    if n_mark == 0 || n_space == 0 {
        return Err(Error::Input("frame has no mark or no space symbols".into()));
    }
    let mean_mark = mark / T::from_count(n_mark);
    let mean_space = space / T::from_count(n_space);
    let ceiling = T::lit(settings.extinction_ceiling_db);
    let (extinction_db, capped) = if mean_space <= T::zero() || linear_to_db(mean_mark / mean_space) >= ceiling {
        (ceiling, true)
    } else {
        (linear_to_db(mean_mark / mean_space), false)
    };
    let throughput = (mark + space) / T::from_count(range.len()) / mu;
    Ok(DemodExtinction {
        extinction_db,
        capped,
        mean_mark,
        mean_space,
        throughput,
    })
}
