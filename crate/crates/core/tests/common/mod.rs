#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use lbsim::{ApId, BalanceClass, GuardBoundary, NetworkState, Row, Scenario, StationId};
use proptest::prelude::*;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

pub fn shipped(name: &str) -> Scenario {
    Scenario::from_file(scenario_path(name)).expect("shipped scenario parses")
}

/// The median row for `station` under `policy` in the cell `label`.
pub fn median_row<'a>(rows: &'a [Row], label: &str, policy: &str, station: &str) -> &'a Row {
    rows.iter()
        .find(|r| r.is_median() && r.scenario == label && r.policy == policy && r.station == station)
        .unwrap_or_else(|| panic!("no median row for {label} {policy} {station}"))
}

pub fn seed_rows<'a>(rows: &'a [Row], label: &str, policy: &str, station: &str) -> Vec<&'a Row> {
    rows.iter()
        .filter(|r| !r.is_median() && r.scenario == label && r.policy == policy && r.station == station)
        .collect()
}

pub const LOADS: [f64; 5] = [0.0, 300.0, 600.0, 1200.0, 12237.0];
pub const BETAS: [f64; 3] = [0.1, 0.2, 0.5];
const SNRS: [f64; 9] = [0.0, 3.0, 4.0, 10.0, 20.0, 25.0, 40.0, 50.0, 80.0];

/// A small random network: every SNR is pinned, every station starts on
/// some AP (audible or not).
#[derive(Debug, Clone)]
pub struct Instance {
    pub n_aps: usize,
    pub loads: Vec<f64>,
    pub snr: Vec<Vec<f64>>,
    pub assoc: Vec<usize>,
    pub beta: f64,
    pub max_handoffs: Option<usize>,
    pub boundary: GuardBoundary,
}

pub fn instances() -> impl Strategy<Value = Instance> {
    (1usize..=4, 1usize..=6).prop_flat_map(|(n_aps, n_sta)| {
        (
            proptest::collection::vec(proptest::sample::select(LOADS.to_vec()), n_sta),
            proptest::collection::vec(
                proptest::collection::vec(proptest::sample::select(SNRS.to_vec()), n_aps),
                n_sta,
            ),
            proptest::collection::vec(0..n_aps, n_sta),
            proptest::sample::select(BETAS.to_vec()),
            proptest::option::of(1usize..=3),
            prop_oneof![Just(GuardBoundary::Inclusive), Just(GuardBoundary::Strict)],
        )
            .prop_map(move |(loads, snr, assoc, beta, max_handoffs, boundary)| Instance {
                n_aps,
                loads,
                snr,
                assoc,
                beta,
                max_handoffs,
                boundary,
            })
    })
}

pub fn ap_name(i: usize) -> String {
    format!("ap{i}")
}

pub fn sta_name(i: usize) -> String {
    format!("s{i}")
}

impl Instance {
    pub fn scenario(&self) -> Scenario {
        let mut t = String::from("name = \"oracle\"\n\n[policy]\nkind = \"lba\"\n");
        writeln!(t, "beta = {:?}", self.beta).unwrap();
        let boundary = match self.boundary {
            GuardBoundary::Inclusive => "inclusive",
            GuardBoundary::Strict => "strict",
        };
        writeln!(t, "guard_boundary = \"{boundary}\"").unwrap();
        if let Some(m) = self.max_handoffs {
            writeln!(t, "max_handoffs = {m}").unwrap();
        }
        for (i, l) in LOADS.iter().enumerate().skip(1) {
            writeln!(t, "\n[profiles.l{i}]\nkind = \"cbr\"\nrate_kbps = {l:?}\npacket_bytes = 1500").unwrap();
        }
        for a in 0..self.n_aps {
            writeln!(t, "\n[[ap]]\nid = \"{}\"\nx = 0.0\ny = 0.0\nchannel = 1", ap_name(a)).unwrap();
        }
        for (s, l) in self.loads.iter().enumerate() {
            writeln!(t, "\n[[station]]\nid = \"{}\"\nx = 0.0\ny = 0.0", sta_name(s)).unwrap();
            if let Some(i) = LOADS.iter().position(|v| v == l).filter(|&i| i > 0) {
                writeln!(t, "traffic = \"l{i}\"").unwrap();
            }
        }
        for (s, row) in self.snr.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                writeln!(
                    t,
                    "\n[[snr_override]]\nap = \"{}\"\nstation = \"{}\"\nsnr_db = {v:?}",
                    ap_name(a),
                    sta_name(s)
                )
                .unwrap();
            }
        }
        Scenario::parse(&t).expect("generated scenario is valid")
    }

    pub fn state(&self, sc: &Scenario) -> NetworkState {
        let mut st = NetworkState::from_scenario(sc).unwrap();
        for (s, &a) in self.assoc.iter().enumerate() {
            st.associate(&StationId(sta_name(s)), &ApId(ap_name(a))).unwrap();
        }
        st
    }
}

/// Flat model the oracle works on: per-station load, SNR row and AP index.
#[derive(Debug, Clone)]
pub struct Flat {
    pub n_aps: usize,
    pub loads: Vec<f64>,
    pub snr: Vec<Vec<f64>>,
    pub assoc: Vec<usize>,
}

impl Flat {
    pub fn of(inst: &Instance) -> Self {
        Flat {
            n_aps: inst.n_aps,
            loads: inst.loads.clone(),
            snr: inst.snr.clone(),
            assoc: inst.assoc.clone(),
        }
    }

    pub fn ap_loads(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_aps];
        for (s, &a) in self.assoc.iter().enumerate() {
            out[a] += self.loads[s];
        }
        out
    }
}

/// Station and AP names sort lexicographically; with at most 6 stations and
/// 4 APs that equals index order.
pub fn oracle_classes(loads: &[f64], beta: f64) -> Vec<BalanceClass> {
    let mean = loads.iter().sum::<f64>() / loads.len() as f64;
    loads
        .iter()
        .map(|&l| {
            if mean == 0.0 {
                BalanceClass::Balanced
            } else if l > (1.0 + beta) * mean {
                BalanceClass::Overloaded
            } else if l < (1.0 - beta) * mean {
                BalanceClass::Underloaded
            } else {
                BalanceClass::Balanced
            }
        })
        .collect()
}

fn spread(loads: &[f64]) -> f64 {
    let hi = loads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = loads.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Every single-station move, filtered by the selection and distribution
/// rules, then the lexicographic minimum of
/// (spread after, -snr_new, station, target).
pub fn oracle_select(
    f: &Flat,
    beta: f64,
    threshold: f64,
    guard: Option<GuardBoundary>,
) -> Option<(usize, usize, usize, f64, f64)> {
    let before = f.ap_loads();
    let classes = oracle_classes(&before, beta);
    let mut best: Option<(f64, f64, usize, usize, usize, f64)> = None;
    for s in 0..f.loads.len() {
        let from = f.assoc[s];
        for to in 0..f.n_aps {
            if to == from
                || classes[from] != BalanceClass::Overloaded
                || classes[to] != BalanceClass::Underloaded
            {
                continue;
            }
            let (old, new) = (f.snr[s][from], f.snr[s][to]);
            if new < threshold {
                continue;
            }
            let mut after = f.clone();
            after.assoc[s] = to;
            let loads = after.ap_loads();
            if !(spread(&loads) < spread(&before)) {
                continue;
            }
            if oracle_classes(&loads, beta)[to] == BalanceClass::Overloaded {
                continue;
            }
            let ok = match guard {
                None => true,
                Some(GuardBoundary::Inclusive) => new >= old / 2.0,
                Some(GuardBoundary::Strict) => new > old / 2.0,
            };
            if !ok {
                continue;
            }
            let key = (spread(&loads), -new, s, to);
            let better = match &best {
                None => true,
                Some(b) => {
                    key.0 < b.0
                        || (key.0 == b.0
                            && (key.1 < b.1 || (key.1 == b.1 && (s, to) < (b.2, b.3))))
                }
            };
            if better {
                best = Some((key.0, key.1, s, to, from, old));
            }
        }
    }
    best.map(|(_, neg_new, s, to, from, old)| (s, from, to, old, -neg_new))
}

/// Repeated oracle selection; returns (station, from, to) per handoff and the
/// final association.
pub fn oracle_rebalance(
    f: &Flat,
    beta: f64,
    threshold: f64,
    guard: Option<GuardBoundary>,
    cap: Option<usize>,
) -> (Vec<(usize, usize, usize)>, Vec<usize>) {
    let mut cur = f.clone();
    let mut moves = Vec::new();
    while moves.len() < cap.unwrap_or(usize::MAX) {
        let Some((s, from, to, _, _)) = oracle_select(&cur, beta, threshold, guard) else {
            break;
        };
        cur.assoc[s] = to;
        moves.push((s, from, to));
    }
    (moves, cur.assoc)
}

pub fn index_of(id: &str) -> usize {
    id[id.find(|c: char| c.is_ascii_digit()).unwrap()..].parse().unwrap()
}

pub fn class_vec(map: &BTreeMap<ApId, BalanceClass>) -> Vec<BalanceClass> {
    map.values().copied().collect()
}
