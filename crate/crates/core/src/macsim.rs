//! Downlink MAC simulator.
//!
//! Every AP owns one tail-drop FIFO of `queue_capacity` packets (the packet
//! in service counts). The AP grants transmit opportunities round-robin over
//! destinations that have backlog and a non-zero PHY rate, serving each
//! destination head-of-line. An attempt occupies `bits / rate + overhead` of
//! the AP's airtime and fails with the link's packet-error probability;
//! failed packets are retried back to back up to `retry_limit` times.
//!
//! APs share no medium in this model, so each AP is simulated as its own
//! event loop. Time is integer microseconds. The only randomness is the loss
//! draw, which is a hash of `(seed, station, packet, attempt)`, so a run is a
//! pure function of its inputs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::network::{ApId, Handoff, NetworkState, StationId};
use crate::radio::{packet_error_prob, snr_db, PerModel, RateTable};
use crate::traffic::generate_packets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub queue_capacity: usize,
    pub retry_limit: u32,
    pub per_packet_overhead_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: 60.0,
            seed: 1,
            queue_capacity: 500,
            retry_limit: 4,
            per_packet_overhead_s: 0.0008,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue capacity must be at least 1".into()));
        }
        if !(self.per_packet_overhead_s >= 0.0 && self.per_packet_overhead_s.is_finite()) {
            return Err(Error::Config("per-packet overhead must be non-negative".into()));
        }
        Ok(())
    }

    pub fn duration_us(&self) -> u64 {
        secs_to_us(self.duration_s)
    }
}

pub fn secs_to_us(s: f64) -> u64 {
    (s * 1e6).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Delivered { at_us: u64, attempts: u32 },
    DroppedQueueFull,
    DroppedRetryLimit,
    ResidualInQueue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub station: StationId,
    pub ap: ApId,
    pub frame_id: Option<u32>,
    pub packet_id: u32,
    pub size_bits: u64,
    pub birth_us: u64,
    pub enqueue_us: u64,
    pub outcome: Outcome,
}

impl PacketRecord {
    pub fn delivered_at(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Delivered { at_us, .. } => Some(at_us),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_retry: u64,
    pub residual: u64,
}

impl Counters {
    pub fn tally<'a>(records: impl IntoIterator<Item = &'a PacketRecord>) -> Self {
        let mut c = Counters::default();
        for r in records {
            c.generated += 1;
            match r.outcome {
                Outcome::Delivered { .. } => c.delivered += 1,
                Outcome::DroppedQueueFull => c.dropped_queue += 1,
                Outcome::DroppedRetryLimit => c.dropped_retry += 1,
                Outcome::ResidualInQueue => c.residual += 1,
            }
        }
        c
    }

    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped_queue + self.dropped_retry + self.residual
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Sorted by station id, then packet id.
    pub records: Vec<PacketRecord>,
    pub handoffs: Vec<Handoff>,
    pub config: SimConfig,
    pub counters: Counters,
}

impl SimResult {
    pub fn records_for<'a>(&'a self, station: &'a StationId) -> impl Iterator<Item = &'a PacketRecord> + 'a {
        self.records.iter().filter(move |r| &r.station == station)
    }
}

/// Per-destination link state on its AP.
struct Link {
    rate_kbps: f64,
    tier: Option<usize>,
    snr: f64,
    key: u64,
}

pub fn run(scenario: &Scenario, state: &NetworkState, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let table: RateTable<f64> = scenario.rate_table()?;
    let per = PerModel::for_table(&table);
    let horizon = config.duration_us();

    let mut records: Vec<PacketRecord> = Vec::new();
    // per AP: (link table, station slots, arrivals)
    let mut per_ap: Vec<(Vec<Link>, Vec<(u64, usize, u32, usize)>)> =
        scenario.aps.iter().map(|_| (Vec::new(), Vec::new())).collect();

    let mut stations: Vec<_> = scenario.stations.iter().collect();
    stations.sort_by(|a, b| a.id.cmp(&b.id));
    for sta in stations {
        let Some(profile) = scenario.profile_of(&sta.id)? else { continue };
        let ap = state.ap_of(&sta.id).ok_or_else(|| {
            Error::Config(format!("traffic sink `{}` is not associated", sta.id))
        })?;
        let ap_idx = scenario
            .aps
            .iter()
            .position(|a| &a.id == ap)
            .ok_or_else(|| Error::UnknownAp(ap.0.clone()))?;
        let snr = snr_db(scenario, ap, &sta.id)?;
        let (links, arrivals) = &mut per_ap[ap_idx];
        let slot = links.len();
        links.push(Link {
            rate_kbps: table.phy_rate_kbps(snr),
            tier: table.tier_index(snr),
            snr: snr.db(),
            key: fnv1a(sta.id.0.as_bytes()),
        });
        for p in generate_packets(profile, config.duration_s, &sta.id)? {
            let birth = secs_to_us(p.birth_s);
            arrivals.push((birth, slot, p.id, records.len()));
            records.push(PacketRecord {
                station: sta.id.clone(),
                ap: ap.clone(),
                frame_id: p.frame_id,
                packet_id: p.id,
                size_bits: p.size_bits,
                birth_us: birth,
                enqueue_us: birth,
                outcome: Outcome::ResidualInQueue,
            });
        }
    }

    for (links, mut arrivals) in per_ap {
        if arrivals.is_empty() {
            continue;
        }
        // slots were assigned in station-id order
        arrivals.sort_unstable_by_key(|&(t, slot, pid, _)| (t, slot, pid));
        let mut ap = ApLoop {
            links: &links,
            queues: links.iter().map(|_| VecDeque::new()).collect(),
            in_queue: 0,
            cursor: None,
            busy: None,
            config,
            per: &per,
        };
        ap.simulate(&arrivals, &mut records, horizon)?;
    }

    let counters = Counters::tally(&records);
    Ok(SimResult {
        records,
        handoffs: Vec::new(),
        config: config.clone(),
        counters,
    })
}

struct InService {
    done_us: u64,
    record: usize,
    outcome: Outcome,
}

struct ApLoop<'a> {
    links: &'a [Link],
    queues: Vec<VecDeque<usize>>,
    in_queue: usize,
    cursor: Option<usize>,
    busy: Option<InService>,
    config: &'a SimConfig,
    per: &'a PerModel<f64>,
}

impl ApLoop<'_> {
    fn simulate(
        &mut self,
        arrivals: &[(u64, usize, u32, usize)],
        records: &mut [PacketRecord],
        horizon: u64,
    ) -> Result<()> {
        let mut next = 0;
        loop {
            let arrival_t = arrivals.get(next).map(|a| a.0);
            let completion = self.busy.as_ref().map(|b| b.done_us);
            match (completion, arrival_t) {
                // completions win ties so the freed slot is visible to the arrival
                (Some(done), a) if a.map_or(true, |t| done <= t) => {
                    if done > horizon {
                        break;
                    }
                    let svc = self.busy.take().expect("busy");
                    records[svc.record].outcome = svc.outcome;
                    self.in_queue -= 1;
                    self.start_next(done, records)?;
                }
                (_, Some(t)) => {
                    let (_, slot, _, rec) = arrivals[next];
                    next += 1;
                    if self.in_queue >= self.config.queue_capacity {
                        records[rec].outcome = Outcome::DroppedQueueFull;
                        continue;
                    }
                    self.queues[slot].push_back(rec);
                    self.in_queue += 1;
                    if self.busy.is_none() {
                        self.start_next(t, records)?;
                    }
                }
                (_, None) => break,
            }
        }
        Ok(())
    }

    /// Round-robin pick of the next servable destination after the cursor.
    fn pick(&self) -> Option<usize> {
        let n = self.links.len();
        let start = self.cursor.map_or(0, |c| c + 1);
        (0..n)
            .map(|k| (start + k) % n)
            .find(|&s| !self.queues[s].is_empty() && self.links[s].rate_kbps > 0.0)
    }

    fn start_next(&mut self, now: u64, records: &[PacketRecord]) -> Result<()> {
        let Some(slot) = self.pick() else { return Ok(()) };
        self.cursor = Some(slot);
        let rec = self.queues[slot].pop_front().expect("backlog");
        let link = &self.links[slot];
        let r = &records[rec];
        let tier = link.tier.expect("servable link has a tier");
        let per = packet_error_prob(
            crate::radio::Snr(link.snr),
            tier,
            r.size_bits as f64,
            self.per,
        )?;
        let attempt_us = airtime_us(r.size_bits, link.rate_kbps, self.config.per_packet_overhead_s);
        let mut elapsed = 0u64;
        let mut outcome = Outcome::DroppedRetryLimit;
        for attempt in 1..=self.config.retry_limit + 1 {
            elapsed += attempt_us;
            if loss_draw(self.config.seed, link.key, r.packet_id, attempt) >= per {
                outcome = Outcome::Delivered {
                    at_us: now + elapsed,
                    attempts: attempt,
                };
                break;
            }
        }
        self.busy = Some(InService {
            done_us: now + elapsed,
            record: rec,
            outcome,
        });
        Ok(())
    }
}

/// Airtime of one attempt, rounded to the microsecond (never zero).
pub fn airtime_us(bits: u64, rate_kbps: f64, overhead_s: f64) -> u64 {
    let us = bits as f64 * 1000.0 / rate_kbps + overhead_s * 1e6;
    (us.round() as u64).max(1)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) keyed by packet identity and attempt number.
fn loss_draw(seed: u64, station_key: u64, packet: u32, attempt: u32) -> f64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ station_key);
    h = splitmix(h ^ u64::from(packet));
    h = splitmix(h ^ u64::from(attempt));
    (h >> 11) as f64 / (1u64 << 53) as f64
}
