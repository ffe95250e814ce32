//! Downlink sources: a deterministic I/P video source and constant-bit-rate
//! background traffic, plus MTU packetization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::StationId;

/// Slack used when flooring/ceiling `duration × rate` products so that
/// exact multiples are not lost to float representation.
const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoProfile {
    pub fps: f64,
    pub mean_frame_bits: f64,
    /// GOP length N: every N-th frame is an I-frame.
    pub gop_len: u32,
    /// I-frame size as a multiple k of the P-frame size.
    pub i_frame_scale: f64,
    pub mtu_bytes: u32,
}

impl Default for VideoProfile {
    fn default() -> Self {
        VideoProfile {
            fps: 25.0,
            mean_frame_bits: 24_000.0,
            gop_len: 10,
            i_frame_scale: 4.0,
            mtu_bytes: 1500,
        }
    }
}

impl VideoProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Domain(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.mean_frame_bits > 0.0 && self.mean_frame_bits.is_finite()) {
            return Err(Error::Domain("mean frame size must be positive".into()));
        }
        if self.gop_len == 0 {
            return Err(Error::Domain("GOP length must be at least 1".into()));
        }
        if !(self.i_frame_scale >= 1.0 && self.i_frame_scale.is_finite()) {
            return Err(Error::Domain("I-frame scale must be ≥ 1".into()));
        }
        if self.mtu_bytes < 100 {
            return Err(Error::Domain(format!("mtu {} below 100 bytes", self.mtu_bytes)));
        }
        Ok(())
    }

    pub fn offered_kbps(&self) -> f64 {
        self.fps * self.mean_frame_bits / 1000.0
    }

    /// P-frame size s solving (k + N − 1)·s = N·mean.
    pub fn p_frame_bits(&self) -> f64 {
        let n = f64::from(self.gop_len);
        n * self.mean_frame_bits / (self.i_frame_scale + n - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbrProfile {
    pub rate_kbps: f64,
    pub packet_bytes: u32,
}

impl CbrProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_kbps >= 0.0 && self.rate_kbps.is_finite()) {
            return Err(Error::Domain("CBR rate must be non-negative".into()));
        }
        if self.packet_bytes < 100 {
            return Err(Error::Domain(format!(
                "CBR packet {} below 100 bytes",
                self.packet_bytes
            )));
        }
        Ok(())
    }
}

/// A traffic source attached to a sink station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrafficProfile {
    Video(VideoProfile),
    Cbr(CbrProfile),
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrafficProfile::Video(v) => v.validate(),
            TrafficProfile::Cbr(c) => c.validate(),
        }
    }

    pub fn offered_kbps(&self) -> f64 {
        match self {
            TrafficProfile::Video(v) => v.offered_kbps(),
            TrafficProfile::Cbr(c) => c.rate_kbps,
        }
    }

    pub fn as_video(&self) -> Option<&VideoProfile> {
        match self {
            TrafficProfile::Video(v) => Some(v),
            TrafficProfile::Cbr(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    I,
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u32,
    pub birth_s: f64,
    pub size_bits: u64,
    pub kind: FrameKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    /// Sequence number within the destination's stream.
    pub id: u32,
    pub frame_id: Option<u32>,
    pub birth_s: f64,
    pub size_bits: u64,
    pub dst: StationId,
}

pub fn generate_video(profile: &VideoProfile, duration_s: f64) -> Result<Vec<Frame>> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration_s}")));
    }
    let count = (duration_s * profile.fps + COUNT_EPS).floor() as u32;
    let p_bits = profile.p_frame_bits();
    let i_bits = (profile.i_frame_scale * p_bits).floor().max(1.0) as u64;
    let p_bits = p_bits.floor().max(1.0) as u64;
    Ok((0..count)
        .map(|i| {
            let kind = if i % profile.gop_len == 0 { FrameKind::I } else { FrameKind::P };
            Frame {
                id: i,
                birth_s: f64::from(i) / profile.fps,
                size_bits: if kind == FrameKind::I { i_bits } else { p_bits },
                kind,
            }
        })
        .collect())
}

/// Splits a frame into MTU-sized fragments; the last carries the remainder.
/// `first_id` numbers the fragments consecutively.
pub fn packetize(frame: &Frame, mtu_bytes: u32, dst: &StationId, first_id: u32) -> Vec<Packet> {
    let mtu_bits = u64::from(mtu_bytes.max(1)) * 8;
    let size = frame.size_bits.max(1);
    let n = size.div_ceil(mtu_bits);
    (0..n)
        .map(|k| Packet {
            id: first_id + k as u32,
            frame_id: Some(frame.id),
            birth_s: frame.birth_s,
            size_bits: if k + 1 < n { mtu_bits } else { size - mtu_bits * (n - 1) },
            dst: dst.clone(),
        })
        .collect()
}

pub fn generate_cbr(profile: &CbrProfile, duration_s: f64, dst: &StationId) -> Result<Vec<Packet>> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration_s}")));
    }
    if profile.rate_kbps == 0.0 {
        return Ok(Vec::new());
    }
    let bits = u64::from(profile.packet_bytes) * 8;
    let spacing = bits as f64 / (profile.rate_kbps * 1000.0);
    let count = (duration_s / spacing - COUNT_EPS).ceil().max(0.0) as u32;
    Ok((0..count)
        .map(|k| Packet {
            id: k,
            frame_id: None,
            birth_s: f64::from(k) * spacing,
            size_bits: bits,
            dst: dst.clone(),
        })
        .collect())
}

/// All packets a station receives over `duration_s`, in generation order.
pub fn generate_packets(
    profile: &TrafficProfile,
    duration_s: f64,
    dst: &StationId,
) -> Result<Vec<Packet>> {
    match profile {
        TrafficProfile::Cbr(c) => generate_cbr(c, duration_s, dst),
        TrafficProfile::Video(v) => {
            let mut out = Vec::new();
            for f in generate_video(v, duration_s)? {
                let next = out.len() as u32;
                out.extend(packetize(&f, v.mtu_bytes, dst, next));
            }
            Ok(out)
        }
    }
}
