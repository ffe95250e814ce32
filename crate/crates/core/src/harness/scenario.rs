//! Scenario files: strict TOML schema, validation and lookups.
//!
//! ```toml
//! name = "two-cells"
//!
//! [radio]                 # optional, log-distance defaults
//! tx_power_dbm = 20.0
//!
//! [rate_table]            # optional: `preset = "dot11b" | "dot11g"` or inline `tiers`
//! preset = "dot11b"
//!
//! [policy]                # optional
//! kind = "lba"
//! beta = 0.2
//!
//! [sim]                   # optional
//! duration_s = 60.0
//!
//! [profiles.cam]
//! kind = "video"
//! fps = 25.0
//! mean_frame_bits = 24000.0
//! gop_len = 10
//! i_frame_scale = 4.0
//! mtu_bytes = 1500
//!
//! [[ap]]
//! id = "ap1"
//! x = 0.0
//! y = 0.0
//! channel = 1
//!
//! [[station]]
//! id = "viewer"
//! x = 3.0
//! y = 0.0
//! traffic = "cam"
//!
//! [[snr_override]]
//! ap = "ap1"
//! station = "viewer"
//! snr_db = 50.0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScenarioError};
use crate::macsim::SimConfig;
use crate::metrics::PsnrParams;
use crate::network::{AccessPoint, ApId, Station, StationId};
use crate::policies::{GuardBoundary, PolicyKind, PolicyParams};
use crate::radio::{RadioParams, RateTable, RateTier};
use crate::traffic::TrafficProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTableSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<Vec<RateTier<f64>>>,
}

impl Default for RateTableSpec {
    fn default() -> Self {
        RateTableSpec {
            preset: Some("dot11b".into()),
            tiers: None,
        }
    }
}

impl RateTableSpec {
    pub fn resolve(&self) -> Result<RateTable<f64>> {
        match (&self.preset, &self.tiers) {
            (Some(p), None) => match p.as_str() {
                "dot11b" => Ok(RateTable::dot11b()),
                "dot11g" => Ok(RateTable::dot11g()),
                other => Err(ScenarioError::invalid(
                    "rate_table.preset",
                    format!("unknown preset `{other}` (expected dot11b or dot11g)"),
                )
                .into()),
            },
            (None, Some(t)) => RateTable::new(t.clone())
                .map_err(|e| ScenarioError::invalid("rate_table.tiers", e.to_string()).into()),
            _ => Err(ScenarioError::invalid(
                "rate_table",
                "give exactly one of `preset` or `tiers`",
            )
            .into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub beta: f64,
    /// Defaults to the slowest rate tier's threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assoc_threshold_db: Option<f64>,
    pub guard_boundary: GuardBoundary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_handoffs: Option<usize>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::StrongestSnr,
            beta: PolicyParams::default().beta,
            assoc_threshold_db: None,
            guard_boundary: GuardBoundary::Inclusive,
            max_handoffs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrOverride {
    pub ap: ApId,
    pub station: StationId,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_radio")]
    pub radio: RadioParams<f64>,
    #[serde(default)]
    pub rate_table: RateTableSpec,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_psnr")]
    pub psnr: PsnrParams<f64>,
    #[serde(default)]
    pub profiles: BTreeMap<String, TrafficProfile>,
    #[serde(rename = "ap")]
    pub aps: Vec<AccessPoint>,
    #[serde(rename = "station", default)]
    pub stations: Vec<Station>,
    #[serde(rename = "snr_override", default, skip_serializing_if = "Vec::is_empty")]
    pub snr_overrides: Vec<SnrOverride>,
}

fn default_radio() -> RadioParams<f64> {
    RadioParams::default()
}

fn default_psnr() -> PsnrParams<f64> {
    PsnrParams::default()
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| diagnose(&e, text))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            ScenarioError::invalid("file", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Canonical TOML echo; parses back to an equal scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let inv = |field: String, e: Error| -> Error {
            ScenarioError::invalid(field, e.to_string()).into()
        };
        self.radio.validate().map_err(|e| inv("radio".into(), e))?;
        self.rate_table.resolve()?;
        self.sim.validate().map_err(|e| inv("sim".into(), e))?;
        self.psnr.validate().map_err(|e| inv("psnr".into(), e))?;
        self.policy_params()
            .validate()
            .map_err(|e| inv("policy".into(), e))?;

        if self.aps.is_empty() {
            return Err(ScenarioError::invalid("ap", "at least one access point is required").into());
        }
        let mut ap_ids = BTreeSet::new();
        for (i, ap) in self.aps.iter().enumerate() {
            if !ap_ids.insert(&ap.id) {
                return Err(ScenarioError::invalid(
                    format!("ap[{i}].id"),
                    format!("duplicate id `{}`", ap.id),
                )
                .into());
            }
            if ap.channel == 0 {
                return Err(ScenarioError::invalid(format!("ap[{i}].channel"), "must be > 0").into());
            }
            if !(ap.x.is_finite() && ap.y.is_finite()) {
                return Err(ScenarioError::invalid(format!("ap[{i}]"), "position must be finite").into());
            }
        }
        for (name, p) in &self.profiles {
            p.validate().map_err(|e| inv(format!("profiles.{name}"), e))?;
        }
        let mut st_ids = BTreeSet::new();
        let mut video_sinks: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, st) in self.stations.iter().enumerate() {
            if !st_ids.insert(&st.id) {
                return Err(ScenarioError::invalid(
                    format!("station[{i}].id"),
                    format!("duplicate id `{}`", st.id),
                )
                .into());
            }
            if !(st.x.is_finite() && st.y.is_finite()) {
                return Err(ScenarioError::invalid(format!("station[{i}]"), "position must be finite").into());
            }
            if let Some(t) = &st.traffic {
                match self.profiles.get(t) {
                    None => {
                        return Err(ScenarioError::invalid(
                            format!("station[{i}].traffic"),
                            format!("no profile named `{t}`"),
                        )
                        .into())
                    }
                    Some(TrafficProfile::Video(_)) => *video_sinks.entry(t).or_default() += 1,
                    Some(TrafficProfile::Cbr(_)) => {}
                }
            }
            if let Some(ap) = &st.ap {
                if !ap_ids.contains(ap) {
                    return Err(ScenarioError::invalid(
                        format!("station[{i}].ap"),
                        format!("no access point `{ap}`"),
                    )
                    .into());
                }
            }
        }
        for (name, p) in &self.profiles {
            if p.as_video().is_some() && video_sinks.get(name.as_str()).copied().unwrap_or(0) != 1 {
                return Err(ScenarioError::invalid(
                    format!("profiles.{name}"),
                    "a video profile needs exactly one sink station",
                )
                .into());
            }
        }
        let mut pairs = BTreeSet::new();
        for (i, o) in self.snr_overrides.iter().enumerate() {
            if !ap_ids.contains(&o.ap) {
                return Err(ScenarioError::invalid(
                    format!("snr_override[{i}].ap"),
                    format!("no access point `{}`", o.ap),
                )
                .into());
            }
            if !st_ids.contains(&o.station) {
                return Err(ScenarioError::invalid(
                    format!("snr_override[{i}].station"),
                    format!("no station `{}`", o.station),
                )
                .into());
            }
            if !o.snr_db.is_finite() {
                return Err(ScenarioError::invalid(format!("snr_override[{i}].snr_db"), "must be finite").into());
            }
            if !pairs.insert((&o.ap, &o.station)) {
                return Err(ScenarioError::invalid(
                    format!("snr_override[{i}]"),
                    format!("duplicate override for ({}, {})", o.ap, o.station),
                )
                .into());
            }
        }
        Ok(())
    }

    pub fn ap(&self, id: &ApId) -> Result<&AccessPoint> {
        self.aps
            .iter()
            .find(|a| &a.id == id)
            .ok_or_else(|| Error::UnknownAp(id.0.clone()))
    }

    pub fn station(&self, id: &StationId) -> Result<&Station> {
        self.stations
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| Error::UnknownStation(id.0.clone()))
    }

    pub fn snr_override(&self, ap: &ApId, station: &StationId) -> Option<f64> {
        self.snr_overrides
            .iter()
            .find(|o| &o.ap == ap && &o.station == station)
            .map(|o| o.snr_db)
    }

    /// Installs or replaces the override for `(ap, station)`.
    pub fn set_snr_override(&mut self, ap: &ApId, station: &StationId, snr_db: f64) {
        match self
            .snr_overrides
            .iter_mut()
            .find(|o| &o.ap == ap && &o.station == station)
        {
            Some(o) => o.snr_db = snr_db,
            None => self.snr_overrides.push(SnrOverride {
                ap: ap.clone(),
                station: station.clone(),
                snr_db,
            }),
        }
    }

    pub fn profile_of(&self, station: &StationId) -> Result<Option<&TrafficProfile>> {
        let st = self.station(station)?;
        match &st.traffic {
            None => Ok(None),
            Some(name) => self
                .profiles
                .get(name)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("no profile named `{name}`"))),
        }
    }

    pub fn offered_kbps(&self, station: &StationId) -> Result<f64> {
        Ok(self.profile_of(station)?.map_or(0.0, TrafficProfile::offered_kbps))
    }

    pub fn rate_table(&self) -> Result<RateTable<f64>> {
        self.rate_table.resolve()
    }

    pub fn policy_kind(&self) -> PolicyKind {
        self.policy.kind
    }

    pub fn policy_params(&self) -> PolicyParams {
        let threshold = self.policy.assoc_threshold_db.unwrap_or_else(|| {
            self.rate_table
                .resolve()
                .map(|t| t.lowest_min_snr())
                .unwrap_or(PolicyParams::default().assoc_threshold_db)
        });
        PolicyParams {
            beta: self.policy.beta,
            assoc_threshold_db: threshold,
            guard_enabled: self.policy.kind == PolicyKind::SnrAwareLba,
            guard_boundary: self.policy.guard_boundary,
            max_handoffs: self.policy.max_handoffs,
        }
    }

    /// Stations sinking a video profile, in file order.
    pub fn video_stations(&self) -> Vec<&Station> {
        self.stations_where(|p| p.as_video().is_some())
    }

    /// Stations sinking a CBR profile, in file order.
    pub fn cbr_stations(&self) -> Vec<&Station> {
        self.stations_where(|p| matches!(p, TrafficProfile::Cbr(_)))
    }

    fn stations_where(&self, pred: impl Fn(&TrafficProfile) -> bool) -> Vec<&Station> {
        self.stations
            .iter()
            .filter(|s| {
                s.traffic
                    .as_ref()
                    .and_then(|t| self.profiles.get(t))
                    .is_some_and(&pred)
            })
            .collect()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn diagnose(err: &toml::de::Error, text: &str) -> Error {
    let (line, column) = match err.span() {
        Some(span) => {
            let (l, c) = line_col(text, span.start);
            (Some(l), Some(c))
        }
        None => (None, None),
    };
    let message = err.message().to_owned();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return ScenarioError::UnknownField {
                field: rest[..end].to_owned(),
                line,
                column,
            }
            .into();
        }
    }
    ScenarioError::Syntax {
        message,
        line,
        column,
    }
    .into()
}
