//! Result rows and their CSV encoding.

use crate::metrics::QosReport;

pub const CSV_HEADER: &str = "scenario,policy,seed,snr_db,offered_kbps,station,throughput_kbps,\
delay_mean_ms,delay_p95_ms,packet_jitter_ms,frame_jitter_ms,frame_rate_fps,loss_ratio,psnr_db,handoffs";

/// One station's QoS in one run (or the median over seeds when `seed` is
/// `None`). Metrics that are undefined or not applicable are `None` and
/// serialize as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub policy: String,
    pub seed: Option<u64>,
    pub snr_db: f64,
    pub offered_kbps: f64,
    pub station: String,
    pub throughput_kbps: f64,
    pub delay_mean_ms: Option<f64>,
    pub delay_p95_ms: Option<f64>,
    pub packet_jitter_ms: Option<f64>,
    pub frame_jitter_ms: Option<f64>,
    pub frame_rate_fps: Option<f64>,
    pub loss_ratio: Option<f64>,
    pub psnr_db: Option<f64>,
    pub handoffs: f64,
    /// Mean complete-frame delay; kept for analysis, not part of the CSV.
    pub frame_delay_mean_ms: Option<f64>,
}

impl Row {
    #[allow(clippy::too_many_arguments)]
    pub fn from_report(
        scenario: &str,
        policy: &str,
        seed: u64,
        snr_db: f64,
        offered_kbps: f64,
        station: &str,
        rep: &QosReport<f64>,
        generated: u64,
        deliveries: u64,
        handoffs: usize,
    ) -> Self {
        let delivered = |v: f64| (!rep.no_deliveries).then_some(v);
        let video = |v: f64| rep.is_video.then_some(v);
        Row {
            scenario: scenario.to_owned(),
            policy: policy.to_owned(),
            seed: Some(seed),
            snr_db,
            offered_kbps,
            station: station.to_owned(),
            throughput_kbps: rep.throughput_kbps,
            delay_mean_ms: delivered(rep.delay_mean_ms),
            delay_p95_ms: delivered(rep.delay_p95_ms),
            packet_jitter_ms: (deliveries >= 2).then_some(rep.packet_jitter_ms),
            frame_jitter_ms: video(rep.frame_jitter_ms),
            frame_rate_fps: video(rep.frame_rate_fps),
            loss_ratio: (generated > 0).then_some(rep.loss_ratio),
            psnr_db: video(rep.psnr_db),
            handoffs: handoffs as f64,
            frame_delay_mean_ms: (rep.is_video && !rep.no_complete_frames)
                .then_some(rep.frame_delay_mean_ms),
        }
    }

    /// Field-wise median of `rows`, which must share their key columns.
    pub fn median_of(rows: &[&Row]) -> Row {
        let first = rows[0];
        let opt = |f: fn(&Row) -> Option<f64>| median(rows.iter().filter_map(|r| f(r)).collect());
        let req = |f: fn(&Row) -> f64| median(rows.iter().map(|r| f(r)).collect()).unwrap_or(0.0);
        Row {
            scenario: first.scenario.clone(),
            policy: first.policy.clone(),
            seed: None,
            snr_db: req(|r| r.snr_db),
            offered_kbps: req(|r| r.offered_kbps),
            station: first.station.clone(),
            throughput_kbps: req(|r| r.throughput_kbps),
            delay_mean_ms: opt(|r| r.delay_mean_ms),
            delay_p95_ms: opt(|r| r.delay_p95_ms),
            packet_jitter_ms: opt(|r| r.packet_jitter_ms),
            frame_jitter_ms: opt(|r| r.frame_jitter_ms),
            frame_rate_fps: opt(|r| r.frame_rate_fps),
            loss_ratio: opt(|r| r.loss_ratio),
            psnr_db: opt(|r| r.psnr_db),
            handoffs: req(|r| r.handoffs),
            frame_delay_mean_ms: opt(|r| r.frame_delay_mean_ms),
        }
    }

    pub fn is_median(&self) -> bool {
        self.seed.is_none()
    }

    fn fields(&self) -> [String; 15] {
        let o = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        [
            self.scenario.clone(),
            self.policy.clone(),
            self.seed.map_or_else(|| "median".to_owned(), |s| s.to_string()),
            fmt_num(self.snr_db),
            fmt_num(self.offered_kbps),
            self.station.clone(),
            fmt_num(self.throughput_kbps),
            o(self.delay_mean_ms),
            o(self.delay_p95_ms),
            o(self.packet_jitter_ms),
            o(self.frame_jitter_ms),
            o(self.frame_rate_fps),
            o(self.loss_ratio),
            o(self.psnr_db),
            fmt_num(self.handoffs),
        ]
    }
}

/// Median; the mean of the two middle values for even counts.
pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    })
}

/// Formats with 6 significant digits, `%g` style.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}"))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s.to_owned()
    }
}

/// CSV text: the fixed header, then one line per row in the given order.
pub fn emit_csv(rows: &[Row]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(Vec::new());
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    format!("{CSV_HEADER}\n{body}")
}
