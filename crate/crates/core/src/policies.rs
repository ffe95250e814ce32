//! Association and load-balancing decisions.
//!
//! Three policies share this module: strongest-SNR association, bit-rate
//! load balancing (a selection step picks a station on an overloaded AP and
//! an underloaded target, a distribution step checks the move against the
//! balancing criterion β), and the same load balancing with an SNR guard
//! that refuses targets whose SNR falls below half of the current AP's.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::network::{audible_aps, ApId, Handoff, HandoffReason, NetworkState, StationId};
use crate::radio::snr_db;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    StrongestSnr,
    Lba,
    #[serde(rename = "snr-lba")]
    SnrAwareLba,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::StrongestSnr => "strongest-snr",
            PolicyKind::Lba => "lba",
            PolicyKind::SnrAwareLba => "snr-lba",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strongest-snr" => Ok(PolicyKind::StrongestSnr),
            "lba" => Ok(PolicyKind::Lba),
            "snr-lba" => Ok(PolicyKind::SnrAwareLba),
            other => Err(Error::Usage(format!(
                "unknown policy `{other}` (expected strongest-snr, lba or snr-lba)"
            ))),
        }
    }
}

/// Whether a target at exactly half the old SNR passes the guard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardBoundary {
    /// `snr_new >= snr_old / 2`
    #[default]
    Inclusive,
    /// `snr_new > snr_old / 2`
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    /// Load-balancing criterion: APs more than β above (below) the mean load
    /// are overloaded (underloaded).
    pub beta: f64,
    pub assoc_threshold_db: f64,
    pub guard_enabled: bool,
    #[serde(default)]
    pub guard_boundary: GuardBoundary,
    /// Cap on handoffs per rebalance; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_handoffs: Option<usize>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            beta: 0.2,
            assoc_threshold_db: 4.0,
            guard_enabled: false,
            guard_boundary: GuardBoundary::Inclusive,
            max_handoffs: None,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.assoc_threshold_db.is_finite() {
            return Err(Error::Domain("association threshold must be finite".into()));
        }
        Ok(())
    }

    /// Parameters as used by `kind`: the guard is on exactly for
    /// [`PolicyKind::SnrAwareLba`].
    pub fn for_kind(&self, kind: PolicyKind) -> Self {
        PolicyParams {
            guard_enabled: kind == PolicyKind::SnrAwareLba,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceClass {
    Overloaded,
    Balanced,
    Underloaded,
}

/// A single-station reassociation under consideration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub station: StationId,
    pub from: ApId,
    pub to: ApId,
}

pub fn strongest_snr_associate(
    scenario: &Scenario,
    station: &StationId,
    params: &PolicyParams,
) -> Result<Option<ApId>> {
    Ok(audible_aps(scenario, station, params.assoc_threshold_db)?
        .into_iter()
        .next()
        .map(|(ap, _)| ap))
}

fn class_of(load: f64, mean: f64, beta: f64) -> BalanceClass {
    if mean == 0.0 {
        BalanceClass::Balanced
    } else if load > (1.0 + beta) * mean {
        BalanceClass::Overloaded
    } else if load < (1.0 - beta) * mean {
        BalanceClass::Underloaded
    } else {
        BalanceClass::Balanced
    }
}

fn mean_load(state: &NetworkState) -> f64 {
    let n = state.ap_count();
    if n == 0 {
        return 0.0;
    }
    state.loads().values().sum::<f64>() / n as f64
}

pub fn classify_load(state: &NetworkState, params: &PolicyParams) -> BTreeMap<ApId, BalanceClass> {
    let m = mean_load(state);
    state
        .loads()
        .iter()
        .map(|(ap, &l)| (ap.clone(), class_of(l, m, params.beta)))
        .collect()
}

/// An AP admits new stations unless it is overloaded.
pub fn admission_check(state: &NetworkState, ap: &ApId, params: &PolicyParams) -> Result<bool> {
    let load = state.ap_load(ap)?;
    Ok(class_of(load, mean_load(state), params.beta) != BalanceClass::Overloaded)
}

/// The target must keep at least half of the current SNR (values in dB).
pub fn snr_guard(snr_old: f64, snr_new: f64) -> bool {
    snr_guard_with(GuardBoundary::Inclusive, snr_old, snr_new)
}

pub fn snr_guard_with(boundary: GuardBoundary, snr_old: f64, snr_new: f64) -> bool {
    let half = snr_old / 2.0;
    match boundary {
        GuardBoundary::Inclusive => snr_new >= half,
        GuardBoundary::Strict => snr_new > half,
    }
}

/// Distribution policy: the move must strictly shrink the global load spread
/// and must not leave its target overloaded.
pub fn distribution_check(state: &NetworkState, mv: &Move, params: &PolicyParams) -> Result<bool> {
    let after = apply(state, mv)?;
    if !(after.spread() < state.spread()) {
        return Ok(false);
    }
    admission_check(&after, &mv.to, params)
}

fn apply(state: &NetworkState, mv: &Move) -> Result<NetworkState> {
    if state.ap_of(&mv.station) != Some(&mv.from) {
        return Err(Error::Domain(format!(
            "station `{}` is not on `{}`",
            mv.station, mv.from
        )));
    }
    state.ap_load(&mv.from)?;
    state.clone().with_association(&mv.station, &mv.to)
}

/// Selection policy: the admissible move minimizing the post-move spread;
/// ties prefer the stronger target SNR, then the smaller station id, then
/// the smaller target id.
pub fn select_candidate(
    state: &NetworkState,
    scenario: &Scenario,
    params: &PolicyParams,
    guard: bool,
) -> Result<Option<(Move, f64, f64)>> {
    let classes = classify_load(state, params);
    let over: Vec<&ApId> = classes
        .iter()
        .filter(|(_, c)| **c == BalanceClass::Overloaded)
        .map(|(a, _)| a)
        .collect();
    if over.is_empty() {
        return Ok(None);
    }
    let under: Vec<&ApId> = classes
        .iter()
        .filter(|(_, c)| **c == BalanceClass::Underloaded)
        .map(|(a, _)| a)
        .collect();

    // (spread, -snr_new, station, target) ordered ascending
    let mut best: Option<(f64, f64, Move, f64)> = None;
    for from in over {
        for station in state.stations_on(from) {
            let snr_old = snr_db(scenario, from, station)?.db();
            for &to in &under {
                let snr_new = snr_db(scenario, to, station)?.db();
                if snr_new < params.assoc_threshold_db {
                    continue;
                }
                let mv = Move {
                    station: station.clone(),
                    from: from.clone(),
                    to: to.clone(),
                };
                if !distribution_check(state, &mv, params)? {
                    continue;
                }
                if guard && !snr_guard_with(params.guard_boundary, snr_old, snr_new) {
                    continue;
                }
                let spread = apply(state, &mv)?.spread();
                let better = match &best {
                    None => true,
                    Some((bs, bsnr, bm, _)) => spread
                        .total_cmp(bs)
                        .then_with(|| bsnr.total_cmp(&snr_new))
                        .then_with(|| mv.station.cmp(&bm.station))
                        .then_with(|| mv.to.cmp(&bm.to))
                        .is_lt(),
                };
                if better {
                    best = Some((spread, snr_new, mv, snr_old));
                }
            }
        }
    }
    Ok(best.map(|(_, snr_new, mv, snr_old)| (mv, snr_old, snr_new)))
}

/// Runs selection and distribution until no admissible move remains or the
/// handoff cap is reached.
pub fn rebalance(
    state: &NetworkState,
    scenario: &Scenario,
    params: &PolicyParams,
    kind: PolicyKind,
) -> Result<(NetworkState, Vec<Handoff>)> {
    if kind == PolicyKind::StrongestSnr {
        return Err(Error::Usage(
            "rebalance is defined only for lba and snr-lba".into(),
        ));
    }
    let guard = kind == PolicyKind::SnrAwareLba;
    let cap = params.max_handoffs.unwrap_or(usize::MAX);
    let mut current = state.clone();
    let mut handoffs = Vec::new();
    while handoffs.len() < cap {
        let Some((mv, snr_old, snr_new)) = select_candidate(&current, scenario, params, guard)? else {
            break;
        };
        current.associate(&mv.station, &mv.to)?;
        handoffs.push(Handoff {
            station: mv.station,
            from_ap: mv.from,
            to_ap: mv.to,
            snr_old,
            snr_new,
            reason: HandoffReason::LoadBalance,
        });
    }
    Ok((current, handoffs))
}

/// Initial association of every station: explicit `ap` from the scenario when
/// given, otherwise the strongest audible AP. Stations hearing nothing stay
/// unassociated.
pub fn initial_association(scenario: &Scenario, params: &PolicyParams) -> Result<NetworkState> {
    let mut state = NetworkState::from_scenario(scenario)?;
    for sta in &scenario.stations {
        let target = match &sta.ap {
            Some(ap) => Some(ap.clone()),
            None => strongest_snr_associate(scenario, &sta.id, params)?,
        };
        if let Some(ap) = target {
            state.associate(&sta.id, &ap)?;
        }
    }
    Ok(state)
}

/// Association produced by `kind`: initial association, then a rebalance
/// for the load-balancing kinds.
pub fn associate_with_policy(
    scenario: &Scenario,
    params: &PolicyParams,
    kind: PolicyKind,
) -> Result<(NetworkState, Vec<Handoff>)> {
    let state = initial_association(scenario, params)?;
    match kind {
        PolicyKind::StrongestSnr => Ok((state, Vec::new())),
        _ => rebalance(&state, scenario, &params.for_kind(kind), kind),
    }
}
