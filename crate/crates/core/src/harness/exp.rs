//! Single runs and the two sweep experiments.
//!
//! Sweeps fan out over (cell, seed) jobs on a rayon pool. Results are
//! collected in job order, so worker count never changes the output.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::output::{fmt_num, Row};
use crate::harness::scenario::Scenario;
use crate::macsim::{self, SimResult};
use crate::metrics::{qos_report, QosReport};
use crate::network::{ApId, Handoff, NetworkState, StationId};
use crate::policies::{associate_with_policy, classify_load, initial_association, rebalance, BalanceClass, PolicyKind};
use crate::radio::snr_db;

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    None,
    BalancedVsUnbalanced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: Scenario,
    pub snr_db: Vec<f64>,
    pub load_kbps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub comparison: Comparison,
}

/// Everything produced by one simulation.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: NetworkState,
    pub result: SimResult,
    /// Traffic sinks in id order.
    pub reports: Vec<(StationId, QosReport<f64>)>,
}

/// Simulates `scenario` under a fixed association.
pub fn simulate(
    scenario: &Scenario,
    state: &NetworkState,
    handoffs: &[Handoff],
    seed: u64,
) -> Result<RunOutput> {
    let mut config = scenario.sim.clone();
    config.seed = seed;
    let mut result = macsim::run(scenario, state, &config)?;
    result.handoffs = handoffs.to_vec();

    let mut sinks: Vec<&StationId> = scenario
        .stations
        .iter()
        .filter(|s| s.traffic.is_some())
        .map(|s| &s.id)
        .collect();
    sinks.sort();
    let mut reports = Vec::with_capacity(sinks.len());
    for id in sinks {
        let recs: Vec<_> = result.records_for(id).collect();
        let video = scenario.profile_of(id)?.and_then(|p| p.as_video());
        let rep = qos_report(&recs, video, config.duration_s, &scenario.psnr)?;
        reports.push((id.clone(), rep));
    }
    Ok(RunOutput {
        state: state.clone(),
        result,
        reports,
    })
}

fn rows_for(
    label: &str,
    policy: &str,
    seed: u64,
    scenario: &Scenario,
    out: &RunOutput,
) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(out.reports.len());
    for (id, rep) in &out.reports {
        let ap = out
            .state
            .ap_of(id)
            .ok_or_else(|| Error::Config(format!("station `{id}` unassociated")))?;
        let mut generated = 0;
        let mut delivered = 0;
        for r in out.result.records_for(id) {
            generated += 1;
            if r.delivered_at().is_some() {
                delivered += 1;
            }
        }
        rows.push(Row::from_report(
            label,
            policy,
            seed,
            snr_db(scenario, ap, id)?.db(),
            out.state.offered(id)?,
            &id.0,
            rep,
            generated,
            delivered,
            out.result.handoffs.len(),
        ));
    }
    Ok(rows)
}

/// Applies the scenario's policy, simulates, and returns one row per sink.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<Vec<Row>> {
    let kind = scenario.policy_kind();
    let (state, handoffs) = associate_with_policy(scenario, &scenario.policy_params(), kind)?;
    let out = simulate(scenario, &state, &handoffs, seed)?;
    rows_for(&scenario.name, kind.label(), seed, scenario, &out)
}

fn par_collect<J, R, F>(jobs: &[J], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R> + Sync + Send,
{
    match workers {
        None => jobs.par_iter().map(&f).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| jobs.par_iter().map(&f).collect()),
    }
}

/// Appends median rows for every (policy, station) present in `cell`.
fn push_cell(out: &mut Vec<Row>, cell: Vec<Row>) {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in &cell {
        let k = (r.policy.clone(), r.station.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let medians: Vec<Row> = keys
        .iter()
        .map(|(p, s)| {
            let group: Vec<&Row> = cell
                .iter()
                .filter(|r| &r.policy == p && &r.station == s)
                .collect();
            Row::median_of(&group)
        })
        .collect();
    out.extend(cell);
    out.extend(medians);
}

fn unique_station<'a>(stations: Vec<&'a crate::network::Station>, what: &str) -> Result<&'a StationId> {
    match stations.as_slice() {
        [one] => Ok(&one.id),
        [] => Err(Error::Spec(format!("scenario has no {what} station"))),
        _ => Err(Error::Spec(format!("scenario has more than one {what} station"))),
    }
}

fn check_common(spec: &ExperimentSpec) -> Result<()> {
    if spec.seeds.is_empty() {
        return Err(Error::Spec("seed list is empty".into()));
    }
    if spec.snr_db.is_empty() {
        return Err(Error::Spec("SNR axis is empty".into()));
    }
    if spec.snr_db.iter().any(|v| !v.is_finite()) {
        return Err(Error::Spec("SNR axis values must be finite".into()));
    }
    Ok(())
}

pub fn exp1_label(name: &str, snr: f64, load: f64) -> String {
    format!("{name}:snr={}:load={}", fmt_num(snr), fmt_num(load))
}

pub fn exp2_label(name: &str, target_snr: f64) -> String {
    format!("{name}:target_snr={}", fmt_num(target_snr))
}

pub fn run_exp1(spec: &ExperimentSpec) -> Result<Vec<Row>> {
    run_exp1_with_workers(spec, None)
}

/// Sweeps the video station's SNR and the background CBR rate; one row per
/// sink per seed, then per-cell medians.
pub fn run_exp1_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<Row>> {
    if spec.comparison != Comparison::None {
        return Err(Error::Spec("exp1 takes no comparison mode".into()));
    }
    check_common(spec)?;
    if spec.load_kbps.is_empty() {
        return Err(Error::Spec("load axis is empty".into()));
    }
    if spec.load_kbps.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Spec("load axis values must be finite and non-negative".into()));
    }
    let base = &spec.base;
    let video = unique_station(base.video_stations(), "video")?.clone();
    let background = unique_station(base.cbr_stations(), "background CBR")?.clone();
    let bg_profile = base
        .station(&background)?
        .traffic
        .clone()
        .expect("CBR station has a profile");

    let cells: Vec<(f64, f64)> = spec
        .snr_db
        .iter()
        .flat_map(|&s| spec.load_kbps.iter().map(move |&l| (s, l)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();

    let kind = base.policy_kind();
    let results = par_collect(&jobs, workers, |&(c, seed)| {
        let (snr, load) = cells[c];
        let mut sc = base.clone();
        for ap in &base.aps {
            sc.set_snr_override(&ap.id, &video, snr);
        }
        if let Some(crate::traffic::TrafficProfile::Cbr(p)) = sc.profiles.get_mut(&bg_profile) {
            p.rate_kbps = load;
        }
        let (state, handoffs) = associate_with_policy(&sc, &sc.policy_params(), kind)?;
        let out = simulate(&sc, &state, &handoffs, seed)?;
        rows_for(&exp1_label(&base.name, snr, load), kind.label(), seed, &sc, &out)
    })?;

    let mut rows = Vec::new();
    for (c, chunk) in results.chunks(spec.seeds.len()).enumerate() {
        debug_assert_eq!(jobs[c * spec.seeds.len()].0, c);
        push_cell(&mut rows, chunk.concat());
    }
    Ok(rows)
}

pub const EXP2_VARIANTS: [&str; 3] = ["unbalanced", "lba", "snr-lba"];

/// The scenario of one exp2 cell: the mover hears every AP other than its
/// home at `target_snr`.
pub fn exp2_cell_scenario(base: &Scenario, mover: &StationId, home: &ApId, target_snr: f64) -> Scenario {
    let mut sc = base.clone();
    for ap in &base.aps {
        if &ap.id != home {
            sc.set_snr_override(&ap.id, mover, target_snr);
        }
    }
    sc
}

/// Association for one exp2 variant of a cell scenario.
pub fn exp2_association(sc: &Scenario, variant: &str) -> Result<(NetworkState, Vec<Handoff>)> {
    let params = sc.policy_params();
    let state = initial_association(sc, &params)?;
    let kind = match variant {
        "unbalanced" => return Ok((state, Vec::new())),
        "lba" => PolicyKind::Lba,
        "snr-lba" => PolicyKind::SnrAwareLba,
        other => return Err(Error::Usage(format!("unknown exp2 variant `{other}`"))),
    };
    rebalance(&state, sc, &params.for_kind(kind), kind)
}

/// The video station and the AP it starts on, after checking the base
/// scenario really is unbalanced.
pub fn exp2_mover(base: &Scenario) -> Result<(StationId, ApId)> {
    if base.aps.len() < 2 {
        return Err(Error::Spec("exp2 needs at least two access points".into()));
    }
    let params = base.policy_params();
    let state = initial_association(base, &params)?;
    if !classify_load(&state, &params)
        .values()
        .any(|c| *c == BalanceClass::Overloaded)
    {
        return Err(Error::Spec("base scenario is not unbalanced (no overloaded AP)".into()));
    }
    let mover = unique_station(base.video_stations(), "video")?.clone();
    let home = state
        .ap_of(&mover)
        .cloned()
        .ok_or_else(|| Error::Spec(format!("video station `{mover}` hears no AP")))?;
    Ok((mover, home))
}

pub fn run_exp2(spec: &ExperimentSpec) -> Result<Vec<Row>> {
    run_exp2_with_workers(spec, None)
}

/// For each target SNR: the unbalanced association, plain LBA and
/// SNR-guarded LBA, each simulated under every seed.
pub fn run_exp2_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<Row>> {
    if spec.comparison != Comparison::BalancedVsUnbalanced {
        return Err(Error::Spec("exp2 requires the balanced-vs-unbalanced comparison".into()));
    }
    check_common(spec)?;
    let base = &spec.base;
    let (mover, home) = exp2_mover(base)?;

    let jobs: Vec<(usize, u64, &str)> = (0..spec.snr_db.len())
        .flat_map(|c| {
            spec.seeds
                .iter()
                .flat_map(move |&s| EXP2_VARIANTS.iter().map(move |&v| (c, s, v)))
        })
        .collect();
    let results = par_collect(&jobs, workers, |&(c, seed, variant)| {
        let target = spec.snr_db[c];
        let sc = exp2_cell_scenario(base, &mover, &home, target);
        let (state, handoffs) = exp2_association(&sc, variant)?;
        let out = simulate(&sc, &state, &handoffs, seed)?;
        rows_for(&exp2_label(&base.name, target), variant, seed, &sc, &out)
    })?;

    let per_cell = spec.seeds.len() * EXP2_VARIANTS.len();
    let mut rows = Vec::new();
    for chunk in results.chunks(per_cell) {
        push_cell(&mut rows, chunk.concat());
    }
    Ok(rows)
}
