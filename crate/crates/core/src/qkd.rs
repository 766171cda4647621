//! Analytic QBER, secure-key fraction and rate, loss-optimum search and
//! link-budget arithmetic for a single-SPAD DPS receiver.
//!
//! Every detected click is a sifted bit. A click in a mark slot is correct;
//! signal leaking into space slots is always wrong, while dark counts and
//! afterpulses land on either label with probability 1/2.

use serde::{Deserialize, Serialize};

use crate::detector::SpadModel;
use crate::error::{Error, Result};
use crate::numeric::golden_section;
use crate::scalar::{db_to_linear, Real};

/// Default error-correction inefficiency.
pub const DEFAULT_F_EC: f64 = 1.16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams<T> {
    pub mu: T,
    pub symbol_rate_hz: T,
    /// Transmitter-to-SPAD loss, demodulator included (dB).
    pub total_loss_db: T,
    pub demod_insertion_db: T,
    pub extinction_db: T,
}

impl<T: Real> Default for LinkParams<T> {
    fn default() -> Self {
        Self {
            mu: T::lit(0.1),
            symbol_rate_hz: T::lit(1e9),
            total_loss_db: T::lit(23.5),
            demod_insertion_db: T::lit(16.7),
            extinction_db: T::lit(18.0),
        }
    }
}

impl<T: Real> LinkParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero() && self.mu.is_finite()) {
            return Err(Error::invariant("link.mu", "must be finite and > 0"));
        }
        if !(self.symbol_rate_hz > T::zero() && self.symbol_rate_hz.is_finite()) {
            return Err(Error::invariant("link.symbol_rate_hz", "must be finite and > 0"));
        }
        if !(self.total_loss_db >= T::zero() && self.total_loss_db.is_finite()) {
            return Err(Error::invariant("link.total_loss_db", "must be finite and >= 0"));
        }
        if !(self.demod_insertion_db >= T::zero() && self.demod_insertion_db.is_finite()) {
            return Err(Error::invariant("link.demod_insertion_db", "must be finite and >= 0"));
        }
        if !(self.extinction_db > T::zero() && !self.extinction_db.is_nan()) {
            return Err(Error::invariant("link.extinction_db", "must be > 0"));
        }
        Ok(())
    }

    /// Mean photons per symbol reaching the SPAD.
    pub fn photons_at_detector(&self) -> T {
        self.mu * db_to_linear(-self.total_loss_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberBreakdown<T> {
    pub qber: T,
    pub e_leak: T,
    pub e_dark: T,
    pub e_afterpulse: T,
    /// Registered click rate after dead-time compression.
    pub raw_rate_cps: T,
    /// Detected signal photon rate `μ·Rsym·10^(-L/10)·η`.
    pub signal_rate_cps: T,
    pub afterpulse_rate_cps: T,
}

/// Closed-form QBER.
///
/// The afterpulse rate solves `A = afterpulse_rate(R_click)` with
/// `R_click = R_in / (1 + R_in·dead_time)` and `R_in = S + δ + A`. Dead-time
/// compression is label-blind, so it cancels in the error ratio.
pub fn qber_analytic<T: Real>(link: &LinkParams<T>, spad: &SpadModel<T>) -> Result<QberBreakdown<T>> {
    link.validate()?;
    spad.validate()?;
    let signal = link.photons_at_detector() * link.symbol_rate_hz * spad.eta;
    let eps = db_to_linear(link.extinction_db);
    let dark = spad.dark_cps;

    let mut ap = T::zero();
    for _ in 0..500 {
        let next = spad.afterpulse_rate(spad.dead_time_compressed(signal + dark + ap));
        let done = (next - ap).abs() <= T::eps() * T::lit(4.0) * next.max(T::min_positive_value());
        ap = next;
        if done {
            break;
        }
    }
    let incident = signal + dark + ap;
    let raw = spad.dead_time_compressed(incident);
    let half = T::lit(0.5);
    let (e_leak, e_dark, e_ap) = if incident > T::zero() {
        // signal share first: with no dark or afterpulse counts it is exactly 1
        let leak = if eps.is_infinite() { T::zero() } else { signal / incident / (T::one() + eps) };
        (leak, dark * half / incident, ap * half / incident)
    } else {
        (T::zero(), T::zero(), T::zero())
    };
    Ok(QberBreakdown {
        qber: e_leak + e_dark + e_ap,
        e_leak,
        e_dark,
        e_afterpulse: e_ap,
        raw_rate_cps: raw,
        signal_rate_cps: signal,
        afterpulse_rate_cps: ap,
    })
}

/// Binary entropy in bits.
pub fn binary_entropy<T: Real>(p: T) -> T {
    if p <= T::zero() || p >= T::one() {
        return T::zero();
    }
    let q = T::one() - p;
    -(p * p.log2() + q * q.log2())
}

/// Secret bits per sifted bit under the individual-attack collision bound,
/// `-log2(1 - e² - (1 - 6e)²/2) - f_ec·h2(e)`. May be negative.
pub fn secure_fraction<T: Real>(qber: T, f_ec: T) -> T {
    let e = qber;
    let six = T::lit(6.0);
    let p_c = T::one() - e * e - (T::one() - six * e).powi(2) / T::lit(2.0);
    -p_c.log2() - f_ec * binary_entropy(e)
}

/// QBER at which [`secure_fraction`] changes sign, searched on `[0, 1/6]`.
pub fn secure_threshold<T: Real>(f_ec: T) -> T {
    crate::numeric::bisect(|e| secure_fraction(e, f_ec), T::zero(), T::one() / T::lit(6.0), 200)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport<T> {
    pub sifted_rate_bps: T,
    pub secure_fraction: T,
    pub secure_rate_bps: T,
    pub secure_bits_per_symbol: T,
    pub qber_used: T,
}

/// Secure key rate. The sifted rate is the full registered click rate, since
/// DPS keeps every detection.
pub fn secure_rate<T: Real>(link: &LinkParams<T>, spad: &SpadModel<T>, qber: T, f_ec: T) -> Result<KeyRateReport<T>> {
    if !(qber >= T::zero() && qber < T::lit(0.5)) {
        return Err(Error::invariant("qber", "must lie in [0, 0.5)"));
    }
    if !(f_ec >= T::one() && f_ec.is_finite()) {
        return Err(Error::invariant("f_ec", "must be finite and >= 1"));
    }
    let sifted = qber_analytic(link, spad)?.raw_rate_cps;
    Ok(key_rate_from_sifted(sifted, link.symbol_rate_hz, qber, f_ec))
}

/// Key rate for a known sifted rate (e.g. a Monte-Carlo click rate).
pub fn key_rate_from_sifted<T: Real>(sifted_rate_bps: T, symbol_rate_hz: T, qber: T, f_ec: T) -> KeyRateReport<T> {
    let fraction = secure_fraction(qber, f_ec);
    let clamped = if fraction > T::zero() { fraction } else { T::zero() };
    let rate = sifted_rate_bps * clamped;
    KeyRateReport {
        sifted_rate_bps,
        secure_fraction: fraction,
        secure_rate_bps: rate,
        secure_bits_per_symbol: rate / symbol_rate_hz,
        qber_used: qber,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalLoss<T> {
    pub loss_db: T,
    pub qber: T,
    /// QBER varies by less than 1e-6 over the searched range.
    pub flat: bool,
}

/// Minimises analytic QBER over `total_loss_db ∈ [lo, hi]`: a 0.1 dB grid
/// locates the best cell, golden-section refines inside its neighbours.
pub fn optimal_loss<T: Real>(template: &LinkParams<T>, spad: &SpadModel<T>, lo_db: T, hi_db: T) -> Result<OptimalLoss<T>> {
    if !(hi_db - lo_db >= T::lit(20.0)) || lo_db < T::zero() || !hi_db.is_finite() {
        return Err(Error::invariant("search range", "must be within [0, ∞) and span at least 20 dB"));
    }
    let eval = |l: T| -> Result<T> {
        let link = LinkParams { total_loss_db: l, ..*template };
        Ok(qber_analytic(&link, spad)?.qber)
    };
    let steps = ((hi_db - lo_db) / T::lit(0.1)).ceil().to_usize().unwrap_or(1).max(1);
    let step = (hi_db - lo_db) / T::from_count(steps);
    let mut grid = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let l = lo_db + step * T::from_count(i);
        grid.push((l, eval(l)?));
    }
    let (best_i, _) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("grid is non-empty");
    let (min_q, max_q) = grid.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &(_, q)| (a.min(q), b.max(q)));
    let flat = max_q - min_q < T::lit(1e-6);

    let a = grid[best_i.saturating_sub(1)].0;
    let b = grid[(best_i + 1).min(steps)].0;
    let refined = golden_section(|l| eval(l).unwrap_or(T::infinity()), a, b, T::lit(1e-6));
    let q = eval(refined)?;
    let (loss_db, qber) = if q <= grid[best_i].1 { (refined, q) } else { grid[best_i] };
    Ok(OptimalLoss { loss_db, qber, flat })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T> {
    pub budget_db: T,
    pub feasible: bool,
}

/// Quantum of the budget arithmetic, in dB.
const BUDGET_QUANTUM: f64 = 1e-9;

/// Channel budget `total - insertion + saving`.
///
/// Inputs are quantised to 1e-9 dB and summed as integers, so decimal
/// figures combine exactly (26.6 − 16.7 gives the same value as the literal
/// 9.9).
pub fn link_budget<T: Real>(total_loss_db: T, demod_insertion_db: T, receiver_coupling_saving_db: T) -> Result<LinkBudget<T>> {
    let quantise = |v: T, key: &str| -> Result<i128> {
        if !(v >= T::zero() && v.is_finite()) {
            return Err(Error::invariant(key, "must be finite and >= 0"));
        }
        Ok((v.as_f64() / BUDGET_QUANTUM).round() as i128)
    };
    let units = quantise(total_loss_db, "total_loss_db")? - quantise(demod_insertion_db, "demod_insertion_db")?
        + quantise(receiver_coupling_saving_db, "receiver_coupling_saving_db")?;
    Ok(LinkBudget {
        budget_db: T::lit(units as f64 / 1e9),
        feasible: units >= 0,
    })
}
