//! QoS panel computed from a packet trace: throughput, packet delay, RFC 3550
//! packet jitter, frame rate/delay/jitter, loss ratio and a PSNR proxy.
//!
//! Frame jitter is the population standard deviation of complete-frame
//! delays. Packet jitter is the RFC 3550 interarrival estimator over
//! successive deliveries. The PSNR proxy is linear in the fraction of source
//! frames that arrive complete and within the playout deadline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::macsim::{Outcome, PacketRecord};
use crate::scalar::Scalar;
use crate::traffic::VideoProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct PsnrParams<T> {
    pub psnr_max_db: T,
    pub psnr_min_db: T,
    pub playout_deadline_ms: T,
}

impl<T: Scalar> Default for PsnrParams<T> {
    fn default() -> Self {
        PsnrParams {
            psnr_max_db: T::lit(40.0),
            psnr_min_db: T::lit(10.0),
            playout_deadline_ms: T::lit(400.0),
        }
    }
}

impl<T: Scalar> PsnrParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.psnr_max_db > self.psnr_min_db && self.psnr_min_db >= T::zero()) {
            return Err(Error::Domain("need psnr_max > psnr_min >= 0".into()));
        }
        if !(self.playout_deadline_ms > T::zero()) {
            return Err(Error::Domain("playout deadline must be positive".into()));
        }
        Ok(())
    }
}

/// Per-station QoS summary. Not-applicable or undefined quantities are zero,
/// with the reason carried in the flags.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QosReport<T> {
    pub throughput_kbps: T,
    pub delay_mean_ms: T,
    pub delay_p95_ms: T,
    pub packet_jitter_ms: T,
    pub frame_jitter_ms: T,
    pub frame_rate_fps: T,
    pub frame_delay_mean_ms: T,
    pub loss_ratio: T,
    pub psnr_db: T,
    pub is_video: bool,
    pub no_deliveries: bool,
    pub no_complete_frames: bool,
}

// ---- scalar statistics -------------------------------------------------

pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let n = T::from_usize(xs.len())?;
    Some(xs.iter().fold(T::zero(), |a, &b| a + b) / n)
}

/// Nearest-rank percentile (`p` in (0, 100]).
pub fn nearest_rank<T: Scalar>(xs: &[T], p: T) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = T::from_usize(sorted.len())?;
    let rank = (p / T::lit(100.0) * n).ceil().to_usize()?.clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

pub fn population_std<T: Scalar>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let n = T::from_usize(xs.len())?;
    let var = xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m)) / n;
    Some(var.sqrt())
}

/// RFC 3550 interarrival jitter over a sequence of transit times:
/// `J += (|T_i - T_{i-1}| - J) / 16`, starting from zero.
pub fn rfc3550_jitter<T: Scalar>(transits: &[T]) -> Option<T> {
    if transits.len() < 2 {
        return None;
    }
    let sixteen = T::lit(16.0);
    Some(transits.windows(2).fold(T::zero(), |j, w| {
        let d = (w[1] - w[0]).abs();
        j + (d - j) / sixteen
    }))
}

pub fn psnr_proxy<T: Scalar>(
    frame_rate: T,
    on_time_ratio: T,
    source_fps: T,
    params: &PsnrParams<T>,
) -> Result<T> {
    if !(source_fps > T::zero()) {
        return Err(Error::Domain("source fps must be positive".into()));
    }
    let ratio = (frame_rate / source_fps).max(T::zero()).min(T::one());
    let q = ratio * on_time_ratio.max(T::zero()).min(T::one());
    Ok(params.psnr_min_db + (params.psnr_max_db - params.psnr_min_db) * q)
}

// ---- trace metrics -----------------------------------------------------

fn us_to_ms(us: u64) -> f64 {
    us as f64 / 1000.0
}

pub fn throughput_kbps<'a>(
    records: impl IntoIterator<Item = &'a PacketRecord>,
    duration_s: f64,
) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::Domain("duration must be positive".into()));
    }
    let bits: u64 = records
        .into_iter()
        .filter(|r| r.delivered_at().is_some())
        .map(|r| r.size_bits)
        .sum();
    Ok(bits as f64 / duration_s / 1000.0)
}

/// Per-packet delays in ms, in delivery order.
fn delivered_delays(records: &[&PacketRecord]) -> Vec<f64> {
    let mut d: Vec<(u64, u32, f64)> = records
        .iter()
        .filter_map(|r| r.delivered_at().map(|t| (t, r.packet_id, us_to_ms(t - r.birth_us))))
        .collect();
    d.sort_by_key(|&(t, id, _)| (t, id));
    d.into_iter().map(|(_, _, ms)| ms).collect()
}

/// Mean and 95th-percentile (nearest-rank) packet delay in ms.
pub fn delay_stats<'a>(records: impl IntoIterator<Item = &'a PacketRecord>) -> Result<(f64, f64)> {
    let recs: Vec<&PacketRecord> = records.into_iter().collect();
    let d = delivered_delays(&recs);
    match (mean(&d), nearest_rank(&d, 95.0)) {
        (Some(m), Some(p)) => Ok((m, p)),
        _ => Err(Error::UndefinedStat("delay of zero deliveries")),
    }
}

pub fn packet_jitter_ms<'a>(records: impl IntoIterator<Item = &'a PacketRecord>) -> Result<f64> {
    let recs: Vec<&PacketRecord> = records.into_iter().collect();
    rfc3550_jitter(&delivered_delays(&recs))
        .ok_or(Error::UndefinedStat("packet jitter needs two deliveries"))
}

pub fn loss_ratio<'a>(records: impl IntoIterator<Item = &'a PacketRecord>) -> Result<f64> {
    let (mut total, mut lost) = (0u64, 0u64);
    for r in records {
        total += 1;
        if !matches!(r.outcome, Outcome::Delivered { .. }) {
            lost += 1;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedStat("loss ratio of zero generated packets"));
    }
    Ok(lost as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStats {
    pub frame_rate_fps: f64,
    pub frame_delay_mean_ms: f64,
    pub frame_jitter_ms: f64,
    pub complete_frames: usize,
    /// Delays of complete frames, ascending frame id.
    pub frame_delays_ms: Vec<f64>,
}

impl FrameStats {
    pub fn is_empty(&self) -> bool {
        self.complete_frames == 0
    }

    pub fn on_time_ratio(&self, deadline_ms: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let ok = self.frame_delays_ms.iter().filter(|&&d| d <= deadline_ms).count();
        ok as f64 / self.complete_frames as f64
    }
}

/// Frame-level statistics. A frame is complete when every one of its
/// packets was delivered; its delivery time is that of its last packet.
pub fn frame_stats<'a>(
    records: impl IntoIterator<Item = &'a PacketRecord>,
    profile: &VideoProfile,
    duration_s: f64,
) -> Result<FrameStats> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::Domain("duration must be positive".into()));
    }
    // frame id -> (birth, latest delivery, complete so far)
    let mut frames: BTreeMap<u32, (u64, u64, bool)> = BTreeMap::new();
    for r in records {
        let Some(fid) = r.frame_id else { continue };
        let e = frames.entry(fid).or_insert((r.birth_us, 0, true));
        match r.delivered_at() {
            Some(t) => e.1 = e.1.max(t),
            None => e.2 = false,
        }
    }
    let delays: Vec<f64> = frames
        .values()
        .filter(|(_, _, complete)| *complete)
        .map(|&(birth, done, _)| us_to_ms(done - birth))
        .collect();
    let complete = delays.len();
    Ok(FrameStats {
        frame_rate_fps: complete as f64 / duration_s,
        frame_delay_mean_ms: mean(&delays).unwrap_or(0.0),
        frame_jitter_ms: population_std(&delays).unwrap_or(0.0),
        complete_frames: complete,
        frame_delays_ms: delays,
    })
}

/// Full QoS panel for one station's records. `video` is the station's
/// source profile when it sinks video.
pub fn qos_report(
    records: &[&PacketRecord],
    video: Option<&VideoProfile>,
    duration_s: f64,
    psnr: &PsnrParams<f64>,
) -> Result<QosReport<f64>> {
    let mut rep = QosReport::<f64> {
        throughput_kbps: throughput_kbps(records.iter().copied(), duration_s)?,
        ..QosReport::default()
    };
    match delay_stats(records.iter().copied()) {
        Ok((m, p)) => {
            rep.delay_mean_ms = m;
            rep.delay_p95_ms = p;
        }
        Err(Error::UndefinedStat(_)) => rep.no_deliveries = true,
        Err(e) => return Err(e),
    }
    rep.packet_jitter_ms = packet_jitter_ms(records.iter().copied()).unwrap_or(0.0);
    rep.loss_ratio = loss_ratio(records.iter().copied()).unwrap_or(0.0);
    if let Some(profile) = video {
        rep.is_video = true;
        let fs = frame_stats(records.iter().copied(), profile, duration_s)?;
        rep.frame_rate_fps = fs.frame_rate_fps.min(profile.fps);
        rep.frame_delay_mean_ms = fs.frame_delay_mean_ms;
        rep.frame_jitter_ms = fs.frame_jitter_ms;
        rep.no_complete_frames = fs.is_empty();
        rep.psnr_db = psnr_proxy(
            rep.frame_rate_fps,
            fs.on_time_ratio(psnr.playout_deadline_ms),
            profile.fps,
            psnr,
        )?;
    }
    Ok(rep)
}
