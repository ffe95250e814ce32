//! Link budget: log-distance path loss, SNR, PHY rate selection and a
//! per-rate logistic packet-error model.
//!
//! Everything here is a pure function over immutable inputs and is generic
//! over the [`Scalar`] type. The crate root re-exports f64 aliases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::network::{ApId, StationId};
use crate::scalar::Scalar;

/// Signal-to-noise ratio in dB.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Snr<T>(pub T);

impl<T: Scalar> Snr<T> {
    pub fn new(db: T) -> Result<Self> {
        if db.is_finite() {
            Ok(Snr(db))
        } else {
            Err(Error::Domain(format!("SNR must be finite, got {db}")))
        }
    }

    pub fn db(self) -> T {
        self.0
    }
}

/// Transmitter and propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct RadioParams<T> {
    pub tx_power_dbm: T,
    pub noise_floor_dbm: T,
    /// Loss at the 1 m reference distance.
    pub ref_loss_db: T,
    pub pathloss_exponent: T,
}

impl<T: Scalar> Default for RadioParams<T> {
    fn default() -> Self {
        RadioParams {
            tx_power_dbm: T::lit(20.0),
            noise_floor_dbm: T::lit(-90.0),
            ref_loss_db: T::lit(40.0),
            pathloss_exponent: T::lit(3.0),
        }
    }
}

impl<T: Scalar> RadioParams<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tx_power_dbm,
            self.noise_floor_dbm,
            self.ref_loss_db,
            self.pathloss_exponent,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("radio parameters must be finite".into()));
        }
        if self.noise_floor_dbm >= self.tx_power_dbm {
            return Err(Error::Domain(format!(
                "noise floor {} dBm must be below tx power {} dBm",
                self.noise_floor_dbm, self.tx_power_dbm
            )));
        }
        if self.pathloss_exponent < T::lit(1.5) || self.pathloss_exponent > T::lit(6.0) {
            return Err(Error::Domain(format!(
                "path-loss exponent {} outside [1.5, 6.0]",
                self.pathloss_exponent
            )));
        }
        if self.ref_loss_db <= T::zero() {
            return Err(Error::Domain(format!(
                "reference loss {} dB must be positive",
                self.ref_loss_db
            )));
        }
        Ok(())
    }
}

/// Log-distance path loss in dB.
pub fn path_loss_db<T: Scalar>(distance_m: T, params: &RadioParams<T>) -> Result<T> {
    if !(distance_m > T::zero()) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "distance must be positive and finite, got {distance_m} m"
        )));
    }
    Ok(params.ref_loss_db + T::lit(10.0) * params.pathloss_exponent * distance_m.log10())
}

/// SNR of a link of the given length, from geometry alone.
pub fn geometric_snr<T: Scalar>(distance_m: T, params: &RadioParams<T>) -> Result<Snr<T>> {
    let loss = path_loss_db(distance_m, params)?;
    Snr::new(params.tx_power_dbm - loss - params.noise_floor_dbm)
}

/// SNR seen by `station` from `ap`. An explicit override in the scenario wins;
/// geometry is consulted only when no override exists.
pub fn snr_db(scenario: &Scenario, ap: &ApId, station: &StationId) -> Result<Snr<f64>> {
    let ap_def = scenario.ap(ap)?;
    let sta_def = scenario.station(station)?;
    if let Some(v) = scenario.snr_override(ap, station) {
        return Ok(Snr(v));
    }
    let dx = ap_def.x - sta_def.x;
    let dy = ap_def.y - sta_def.y;
    geometric_snr(dx.hypot(dy), &scenario.radio)
}

/// One rate-adaptation tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTier<T> {
    pub min_snr_db: T,
    pub rate_kbps: T,
}

/// Ordered SNR thresholds to PHY rates, highest tier first. Below the last
/// threshold the link carries nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<T> {
    tiers: Vec<RateTier<T>>,
}

impl<T: Scalar> RateTable<T> {
    pub fn new(tiers: Vec<RateTier<T>>) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::Domain("rate table needs at least one tier".into()));
        }
        for t in &tiers {
            if !t.min_snr_db.is_finite() || !t.rate_kbps.is_finite() {
                return Err(Error::Domain("rate tier values must be finite".into()));
            }
            if t.rate_kbps <= T::zero() {
                return Err(Error::Domain(format!(
                    "tier rate {} kbps must be positive",
                    t.rate_kbps
                )));
            }
        }
        for w in tiers.windows(2) {
            if !(w[0].min_snr_db > w[1].min_snr_db) {
                return Err(Error::Domain(
                    "tier SNR thresholds must be strictly decreasing".into(),
                ));
            }
            if !(w[0].rate_kbps > w[1].rate_kbps) {
                return Err(Error::Domain("tier rates must be strictly decreasing".into()));
            }
        }
        Ok(RateTable { tiers })
    }

    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let tiers = pairs
            .iter()
            .map(|&(s, r)| RateTier {
                min_snr_db: T::lit(s),
                rate_kbps: T::lit(r),
            })
            .collect();
        RateTable::new(tiers).expect("built-in rate table is valid")
    }

    /// 802.11b-like: 11 / 5.5 / 2 / 1 Mbps.
    pub fn dot11b() -> Self {
        Self::from_pairs(&[(25.0, 11000.0), (18.0, 5500.0), (10.0, 2000.0), (4.0, 1000.0)])
    }

    /// 802.11g-like OFDM ladder, 54 down to 6 Mbps.
    pub fn dot11g() -> Self {
        Self::from_pairs(&[
            (25.0, 54000.0),
            (24.0, 48000.0),
            (18.0, 36000.0),
            (17.0, 24000.0),
            (12.0, 18000.0),
            (9.0, 12000.0),
            (8.0, 9000.0),
            (6.0, 6000.0),
        ])
    }

    pub fn tiers(&self) -> &[RateTier<T>] {
        &self.tiers
    }

    /// Index of the highest tier whose threshold is met, if any.
    pub fn tier_index(&self, snr: Snr<T>) -> Option<usize> {
        self.tiers.iter().position(|t| t.min_snr_db <= snr.0)
    }

    pub fn phy_rate_kbps(&self, snr: Snr<T>) -> T {
        self.tier_index(snr)
            .map_or(T::zero(), |i| self.tiers[i].rate_kbps)
    }

    /// Threshold of the slowest tier; below it a link is down.
    pub fn lowest_min_snr(&self) -> T {
        self.tiers[self.tiers.len() - 1].min_snr_db
    }
}

/// Free-function form of [`RateTable::phy_rate_kbps`].
pub fn phy_rate_kbps<T: Scalar>(snr: Snr<T>, table: &RateTable<T>) -> T {
    table.phy_rate_kbps(snr)
}

/// Logistic PER curve for one rate tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerCurve<T> {
    pub midpoint_db: T,
    pub slope_per_db: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerModel<T> {
    curves: Vec<PerCurve<T>>,
    reference_packet_bits: T,
}

pub const DEFAULT_PER_MARGIN_DB: f64 = 5.0;
pub const DEFAULT_PER_SLOPE: f64 = 1.0;
pub const DEFAULT_REFERENCE_PACKET_BITS: f64 = 12_000.0;

impl<T: Scalar> PerModel<T> {
    pub fn new(curves: Vec<PerCurve<T>>, reference_packet_bits: T) -> Result<Self> {
        if !(reference_packet_bits > T::zero()) {
            return Err(Error::Domain("reference packet must be positive".into()));
        }
        if curves.iter().any(|c| !(c.slope_per_db > T::zero())) {
            return Err(Error::Domain("PER slope must be positive".into()));
        }
        Ok(PerModel {
            curves,
            reference_packet_bits,
        })
    }

    /// Default model: each tier's midpoint sits 5 dB under its selection
    /// threshold with slope 1/dB, referenced to a 1500-byte packet.
    pub fn for_table(table: &RateTable<T>) -> Self {
        let curves = table
            .tiers()
            .iter()
            .map(|t| PerCurve {
                midpoint_db: t.min_snr_db - T::lit(DEFAULT_PER_MARGIN_DB),
                slope_per_db: T::lit(DEFAULT_PER_SLOPE),
            })
            .collect();
        PerModel::new(curves, T::lit(DEFAULT_REFERENCE_PACKET_BITS))
            .expect("default PER model is valid")
    }

    /// Checks that every tier has a curve with its midpoint below the tier's
    /// threshold, so a selected rate never has reference PER ≥ 0.5.
    pub fn validate_against(&self, table: &RateTable<T>) -> Result<()> {
        if self.curves.len() != table.tiers().len() {
            return Err(Error::Domain(format!(
                "PER model has {} curves for {} rate tiers",
                self.curves.len(),
                table.tiers().len()
            )));
        }
        for (i, (c, t)) in self.curves.iter().zip(table.tiers()).enumerate() {
            if !(c.midpoint_db < t.min_snr_db) {
                return Err(Error::Domain(format!(
                    "tier {i}: PER midpoint {} dB not below threshold {} dB",
                    c.midpoint_db, t.min_snr_db
                )));
            }
        }
        Ok(())
    }

    pub fn curves(&self) -> &[PerCurve<T>] {
        &self.curves
    }

    pub fn reference_packet_bits(&self) -> T {
        self.reference_packet_bits
    }
}

/// Per-attempt error probability of a `packet_bits` transmission at `tier`.
pub fn packet_error_prob<T: Scalar>(
    snr: Snr<T>,
    tier: usize,
    packet_bits: T,
    model: &PerModel<T>,
) -> Result<T> {
    let curve = model.curves.get(tier).ok_or(Error::UnknownTier(tier))?;
    if !(packet_bits > T::zero()) {
        return Err(Error::Domain(format!(
            "packet size must be positive, got {packet_bits} bits"
        )));
    }
    let base = T::one() / (T::one() + (curve.slope_per_db * (snr.0 - curve.midpoint_db)).exp());
    if base >= T::one() {
        return Ok(T::one());
    }
    // 1 - (1 - base)^k without cancellation for tiny base
    let k = packet_bits / model.reference_packet_bits;
    let per = -(k * (-base).ln_1p()).exp_m1();
    Ok(per.max(T::zero()).min(T::one()))
}
