//! Topology, association state and per-AP load accounting.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::radio::{snr_db, Snr};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub String);

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ApId {
    fn from(s: &str) -> Self {
        ApId(s.to_owned())
    }
}

impl From<&str> for StationId {
    fn from(s: &str) -> Self {
        StationId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoint {
    pub id: ApId,
    pub x: f64,
    pub y: f64,
    pub channel: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub id: StationId,
    pub x: f64,
    pub y: f64,
    /// Name of the traffic profile this station sinks, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<String>,
    /// Initial association; strongest-SNR when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<ApId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandoffReason {
    LoadBalance,
}

/// A reassociation decided by a load-balancing policy. Both SNRs are the
/// values read when the decision was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handoff {
    pub station: StationId,
    pub from_ap: ApId,
    pub to_ap: ApId,
    pub snr_old: f64,
    pub snr_new: f64,
    pub reason: HandoffReason,
}

/// Station → AP association plus the per-AP offered-load cache.
///
/// `loads[ap]` is always the sum of the offered rates of the stations
/// associated to `ap`, summed in station-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    offered: BTreeMap<StationId, f64>,
    association: BTreeMap<StationId, ApId>,
    loads: BTreeMap<ApId, f64>,
}

impl NetworkState {
    pub fn new(
        aps: impl IntoIterator<Item = ApId>,
        offered: impl IntoIterator<Item = (StationId, f64)>,
    ) -> Result<Self> {
        let loads: BTreeMap<ApId, f64> = aps.into_iter().map(|a| (a, 0.0)).collect();
        let mut map = BTreeMap::new();
        for (s, kbps) in offered {
            if !(kbps >= 0.0) || !kbps.is_finite() {
                return Err(Error::Domain(format!(
                    "offered load of `{s}` must be finite and non-negative"
                )));
            }
            if map.insert(s.clone(), kbps).is_some() {
                return Err(Error::Domain(format!("duplicate station `{s}`")));
            }
        }
        Ok(NetworkState {
            offered: map,
            association: BTreeMap::new(),
            loads,
        })
    }

    /// Empty association over the scenario's APs and stations.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let offered = scenario
            .stations
            .iter()
            .map(|s| Ok((s.id.clone(), scenario.offered_kbps(&s.id)?)))
            .collect::<Result<Vec<_>>>()?;
        NetworkState::new(scenario.aps.iter().map(|a| a.id.clone()), offered)
    }

    pub fn aps(&self) -> impl Iterator<Item = &ApId> {
        self.loads.keys()
    }

    pub fn ap_count(&self) -> usize {
        self.loads.len()
    }

    pub fn stations(&self) -> impl Iterator<Item = &StationId> {
        self.offered.keys()
    }

    pub fn offered(&self, station: &StationId) -> Result<f64> {
        self.offered
            .get(station)
            .copied()
            .ok_or_else(|| Error::UnknownStation(station.0.clone()))
    }

    pub fn ap_of(&self, station: &StationId) -> Option<&ApId> {
        self.association.get(station)
    }

    pub fn association(&self) -> &BTreeMap<StationId, ApId> {
        &self.association
    }

    pub fn loads(&self) -> &BTreeMap<ApId, f64> {
        &self.loads
    }

    /// Stations currently on `ap`, ascending id.
    pub fn stations_on<'a>(&'a self, ap: &'a ApId) -> impl Iterator<Item = &'a StationId> + 'a {
        self.association
            .iter()
            .filter(move |(_, a)| *a == ap)
            .map(|(s, _)| s)
    }

    pub fn ap_load(&self, ap: &ApId) -> Result<f64> {
        self.loads
            .get(ap)
            .copied()
            .ok_or_else(|| Error::UnknownAp(ap.0.clone()))
    }

    /// Moves (or attaches) `station` to `ap`, updating both affected caches.
    pub fn associate(&mut self, station: &StationId, ap: &ApId) -> Result<()> {
        if !self.offered.contains_key(station) {
            return Err(Error::UnknownStation(station.0.clone()));
        }
        if !self.loads.contains_key(ap) {
            return Err(Error::UnknownAp(ap.0.clone()));
        }
        let prev = self.association.insert(station.clone(), ap.clone());
        if prev.as_ref() == Some(ap) {
            return Ok(());
        }
        if let Some(p) = prev {
            self.refresh_load(&p);
        }
        self.refresh_load(ap);
        Ok(())
    }

    /// Consuming form of [`associate`](Self::associate).
    pub fn with_association(mut self, station: &StationId, ap: &ApId) -> Result<Self> {
        self.associate(station, ap)?;
        Ok(self)
    }

    fn refresh_load(&mut self, ap: &ApId) {
        let sum = self.sum_for(ap);
        self.loads.insert(ap.clone(), sum);
    }

    fn sum_for(&self, ap: &ApId) -> f64 {
        self.association
            .iter()
            .filter(|(_, a)| *a == ap)
            .map(|(s, _)| self.offered[s])
            .sum()
    }

    /// Loads recomputed from scratch; equals [`loads`](Self::loads).
    pub fn recompute_loads(&self) -> BTreeMap<ApId, f64> {
        self.loads.keys().map(|a| (a.clone(), self.sum_for(a))).collect()
    }

    /// Max minus min AP load.
    pub fn spread(&self) -> f64 {
        let mut it = self.loads.values();
        let Some(&first) = it.next() else { return 0.0 };
        let (lo, hi) = it.fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Same association with every offered rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.offered.values_mut() {
            *v *= factor;
        }
        let aps: Vec<ApId> = out.loads.keys().cloned().collect();
        for a in aps {
            out.refresh_load(&a);
        }
        out
    }
}

/// Free-function form of [`NetworkState::ap_load`].
pub fn ap_load(state: &NetworkState, ap: &ApId) -> Result<f64> {
    state.ap_load(ap)
}

/// APs `station` hears at or above `threshold_db`, strongest first, ties by
/// ascending AP id.
pub fn audible_aps(
    scenario: &Scenario,
    station: &StationId,
    threshold_db: f64,
) -> Result<Vec<(ApId, Snr<f64>)>> {
    scenario.station(station)?;
    let mut out = Vec::new();
    for ap in &scenario.aps {
        let snr = snr_db(scenario, &ap.id, station)?;
        if snr.db() >= threshold_db {
            out.push((ap.id.clone(), snr));
        }
    }
    out.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
