use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::levenberg_marquardt;
use crate::optics::ring::{fit_ring_params, RingModel};
use crate::scalar::{linear_to_db, Real};

/// Wavelength that maps to zero detuning when a table is given in nm.
pub const REFERENCE_WAVELENGTH_NM: f64 = 1550.0;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const MIN_ROWS: usize = 8;

/// Abscissa of a measured spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumAxis {
    DetuningGhz,
    WavelengthNm,
}

impl SpectrumAxis {
    pub fn header(self) -> &'static str {
        match self {
            SpectrumAxis::DetuningGhz => "detuning_ghz,transmission_db",
            SpectrumAxis::WavelengthNm => "wavelength_nm,transmission_db",
        }
    }
}

/// Measured (or synthetic) power transmission versus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable<T> {
    pub axis: SpectrumAxis,
    /// Abscissa as given (GHz or nm).
    pub abscissa: Vec<T>,
    pub transmission_db: Vec<T>,
}

fn nm_to_detuning_hz(nm: f64) -> f64 {
    SPEED_OF_LIGHT / (nm * 1e-9) - SPEED_OF_LIGHT / (REFERENCE_WAVELENGTH_NM * 1e-9)
}

impl<T: Real> SpectrumTable<T> {
    pub fn new(axis: SpectrumAxis, abscissa: Vec<T>, transmission_db: Vec<T>) -> Result<Self> {
        let table = Self {
            axis,
            abscissa,
            transmission_db,
        };
        table.validate()?;
        Ok(table)
    }

    /// Builds a detuning-axis table from detunings in Hz.
    pub fn from_detuning_hz(detuning_hz: &[T], transmission_db: Vec<T>) -> Result<Self> {
        let ghz = detuning_hz.iter().map(|&d| d / T::lit(1e9)).collect();
        Self::new(SpectrumAxis::DetuningGhz, ghz, transmission_db)
    }

    pub fn validate(&self) -> Result<()> {
        if self.abscissa.len() != self.transmission_db.len() {
            return Err(Error::Input("spectrum columns differ in length".into()));
        }
        if self.abscissa.len() < MIN_ROWS {
            return Err(Error::Input(format!(
                "spectrum needs at least {MIN_ROWS} rows, got {}",
                self.abscissa.len()
            )));
        }
        if self
            .abscissa
            .iter()
            .chain(&self.transmission_db)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Input("spectrum contains non-finite values".into()));
        }
        let increasing = self.abscissa.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.abscissa.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Input("spectrum abscissa is not strictly monotone".into()));
        }
        Ok(())
    }

    /// Detuning of every row in Hz (wavelengths converted about 1550 nm).
    pub fn detuning_hz(&self) -> Vec<T> {
        match self.axis {
            SpectrumAxis::DetuningGhz => self.abscissa.iter().map(|&g| g * T::lit(1e9)).collect(),
            SpectrumAxis::WavelengthNm => self
                .abscissa
                .iter()
                .map(|&nm| T::lit(nm_to_detuning_hz(nm.as_f64())))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Parses the two-column text format. Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Input("spectrum file is empty".into()))?;
        let header: String = header.chars().filter(|c| !c.is_whitespace()).collect();
        let axis = match header.as_str() {
            "detuning_ghz,transmission_db" => SpectrumAxis::DetuningGhz,
            "wavelength_nm,transmission_db" => SpectrumAxis::WavelengthNm,
            other => {
                return Err(Error::Input(format!(
                    "unrecognised spectrum header `{other}`; expected `detuning_ghz,transmission_db` \
                     or `wavelength_nm,transmission_db`"
                )))
            }
        };
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (line_no, line) in lines {
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Input(format!("line {line_no}: expected two columns")));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Input(format!("line {line_no}: `{s}` is not a number")))
            };
            x.push(T::lit(parse(a)?));
            y.push(T::lit(parse(b)?));
        }
        Self::new(axis, x, y)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.axis.header());
        for (x, y) in self.abscissa.iter().zip(&self.transmission_db) {
            let _ = writeln!(out, "{},{}", x.as_f64(), y.as_f64());
        }
        out
    }
}

/// Knobs for [`fit_to_measurement`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// Free spectral range. When `None` it is taken from the median spacing of
    /// the visible notches, which needs at least two of them.
    pub fsr_hz: Option<T>,
    /// Fits with a larger RMS residual are rejected.
    pub max_residual_rms_db: T,
    /// A dip shallower than this (below the baseline estimate) is not a notch.
    pub min_notch_depth_db: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            fsr_hz: None,
            max_residual_rms_db: T::lit(1.0),
            min_notch_depth_db: T::lit(3.0),
        }
    }
}

/// Result of fitting a ring plus a flat baseline to a spectrum.
#[derive(Debug, Clone, Copy)]
pub struct RingFit<T> {
    /// Fitted ring; its excess loss is `max(0, -baseline_db)`.
    pub model: RingModel<T>,
    /// Off-resonance fiber-to-fiber level.
    pub baseline_db: T,
    pub residual_rms_db: T,
    pub iterations: usize,
}

fn quantile<T: Real>(values: &[T], q: f64) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx]
}

/// Local minima deeper than `threshold_db`, at most one per contiguous dip.
fn notch_positions<T: Real>(x: &[T], y: &[T], threshold_db: T) -> Vec<(usize, T)> {
    let mut notches = Vec::new();
    let mut i = 0;
    while i < y.len() {
        if y[i] < threshold_db {
            let start = i;
            while i < y.len() && y[i] < threshold_db {
                i += 1;
            }
            let (k, _) = (start..i)
                .map(|k| (k, y[k]))
                .fold((start, y[start]), |best, cur| if cur.1 < best.1 { cur } else { best });
            notches.push((k, x[k]));
        } else {
            i += 1;
        }
    }
    notches
}

/// Width of the dip around `k` at the linear half-depth between `floor_db`
/// and `baseline_db`.
fn half_depth_width<T: Real>(x: &[T], y: &[T], k: usize, baseline_db: T) -> Option<T> {
    let lin = |db: T| T::lit(10.0).powf(db / T::lit(10.0));
    let level = linear_to_db((lin(y[k]) + lin(baseline_db)) / T::lit(2.0));
    let crossing = |i: usize, j: usize| x[i] + (level - y[i]) / (y[j] - y[i]) * (x[j] - x[i]);
    let left = (1..=k).rev().find(|&i| y[i - 1] >= level).map(|i| crossing(i - 1, i))?;
    let right = (k..y.len() - 1).find(|&i| y[i + 1] >= level).map(|i| crossing(i, i + 1))?;
    Some(right - left)
}

/// Least-squares fit of the all-pass through-port magnitude (in dB) plus a
/// flat baseline to a measured spectrum.
///
/// Parameters are the baseline, the resonance offset, `ln(1 - t·a)` and the
/// on-resonance amplitude `g = (t - a)/(1 - t·a)` (kept in `[0, 1)`), which
/// pins the under-coupled branch.
pub fn fit_to_measurement<T: Real>(
    table: &SpectrumTable<T>,
    options: &FitOptions<T>,
) -> Result<RingFit<T>> {
    table.validate()?;
    let mut pairs: Vec<(T, T)> = table
        .detuning_hz()
        .into_iter()
        .zip(table.transmission_db.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let (x, y): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();

    let baseline0 = quantile(&y, 0.8);
    let notches = notch_positions(&x, &y, baseline0 - options.min_notch_depth_db);
    let Some(&(k_min, offset0)) = notches
        .iter()
        .min_by(|a, b| y[a.0].partial_cmp(&y[b.0]).unwrap_or(std::cmp::Ordering::Equal))
    else {
        return Err(Error::FitFailure(format!(
            "no notch deeper than {} dB below the baseline",
            options.min_notch_depth_db
        )));
    };

    let fsr = match options.fsr_hz {
        Some(f) if f > T::zero() => f,
        Some(_) => return Err(Error::invariant("fsr_hz", "must be > 0")),
        None if notches.len() >= 2 => {
            let gaps: Vec<T> = notches.windows(2).map(|w| w[1].1 - w[0].1).collect();
            quantile(&gaps, 0.5)
        }
        None => {
            return Err(Error::FitFailure(
                "only one notch visible; the free spectral range must be supplied".into(),
            ))
        }
    };

    let depth0 = baseline0 - y[k_min];
    let span = x[x.len() - 1] - x[0];
    let fwhm0 = half_depth_width(&x, &y, k_min, baseline0)
        .filter(|w| *w > T::zero() && *w < fsr)
        .unwrap_or(span / T::lit(20.0))
        .min(fsr / T::lit(4.0));
    let start = fit_ring_params(fsr, fwhm0, depth0.max(T::lit(0.5)))
        .map_err(|e| Error::FitFailure(format!("cannot seed fit: {e}")))?;
    let (t0, a0) = (start.t_self, start.a_rt);
    let g0 = (t0 - a0) / (T::one() - t0 * a0);
    let u0 = (T::one() - t0 * a0).ln();
    let w0 = (g0 / (T::one() - g0)).sqrt();
    let offset_scale = fwhm0;

    let unpack = |p: &[T; 4]| -> (T, T, T, T) {
        let baseline = p[0];
        let offset = p[1] * offset_scale;
        let prod = T::one() - p[2].min(-T::eps()).exp();
        let g = p[3] * p[3] / (T::one() + p[3] * p[3]);
        let d = g * (T::one() - prod);
        let t = (d + (d * d + T::lit(4.0) * prod).sqrt()) / T::lit(2.0);
        (baseline, offset, t, t - d)
    };
    let residuals = |p: &[T; 4], r: &mut Vec<T>| {
        let (baseline, offset, t, a) = unpack(p);
        let ring = RingModel {
            fsr_hz: fsr,
            t_self: t,
            a_rt: a.max(T::min_positive_value()),
            resonance_offset_hz: offset,
            excess_loss_db: T::zero(),
        };
        r.clear();
        r.extend(x.iter().zip(&y).map(|(&d, &meas)| {
            baseline + linear_to_db(ring.intrinsic_power_at_phase(ring.round_trip_phase(d))) - meas
        }));
    };
    let fit = levenberg_marquardt(residuals, [baseline0, offset0 / offset_scale, u0, w0], 500);
    let rms = (fit.cost / T::from_count(x.len())).sqrt();
    if !rms.is_finite() || rms > options.max_residual_rms_db {
        return Err(Error::FitFailure(format!(
            "residual RMS {rms} dB exceeds {} dB",
            options.max_residual_rms_db
        )));
    }
    let (baseline, offset, t, a) = unpack(&fit.params);
    // report the resonance nearest zero detuning
    let offset = offset - (offset / fsr).round() * fsr;
    let model = RingModel::new(fsr, t, a)
        .map_err(|e| Error::FitFailure(format!("fitted ring is unphysical: {e}")))?
        .with_resonance_offset(offset)
        .with_excess_loss((-baseline).max(T::zero()))?;
    Ok(RingFit {
        model,
        baseline_db: baseline,
        residual_rms_db: rms,
        iterations: fit.iterations,
    })
}
