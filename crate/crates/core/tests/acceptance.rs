//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;

use common::*;
use lbsim::harness::exp::{
    exp2_association, exp2_cell_scenario, exp2_label, exp2_mover, exp1_label, run_exp1_with_workers,
    run_exp2_with_workers, simulate,
};
use lbsim::harness::{emit_csv, Comparison, ExperimentSpec, DEFAULT_SEEDS};
use lbsim::macsim::{self, airtime_us, Outcome};
use lbsim::policies::{classify_load, rebalance, select_candidate};
use lbsim::{NetworkState, PolicyKind, Row, Scenario, SimConfig, StationId};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exp1_rows(snr: &[f64], load: &[f64], workers: Option<usize>) -> Vec<Row> {
    let spec = ExperimentSpec {
        base: shipped("exp1"),
        snr_db: snr.to_vec(),
        load_kbps: load.to_vec(),
        seeds: DEFAULT_SEEDS.to_vec(),
        comparison: Comparison::None,
    };
    run_exp1_with_workers(&spec, workers).expect("exp1 runs")
}

/// The shipped exp2 scenario with the viewer's home-AP SNR set to `source`.
fn exp2_base(source: f64) -> Scenario {
    let mut sc = shipped("exp2");
    let (mover, home) = exp2_mover(&sc).unwrap();
    sc.set_snr_override(&home, &mover, source);
    sc
}

fn exp2_rows(base: Scenario, targets: &[f64], workers: Option<usize>) -> Vec<Row> {
    let spec = ExperimentSpec {
        base,
        snr_db: targets.to_vec(),
        load_kbps: Vec::new(),
        seeds: DEFAULT_SEEDS.to_vec(),
        comparison: Comparison::BalancedVsUnbalanced,
    };
    run_exp2_with_workers(&spec, workers).expect("exp2 runs")
}

fn opt(v: Option<f64>, what: &str) -> Result<f64, String> {
    v.ok_or_else(|| format!("{what} undefined"))
}

fn criterion1() -> Check {
    let rows = exp1_rows(&[30.0, 50.0], &[480.0, 12237.0], None);
    let light = median_row(&rows, &exp1_label("exp1", 30.0, 480.0), "strongest-snr", "viewer");
    let loaded = median_row(&rows, &exp1_label("exp1", 50.0, 12237.0), "strongest-snr", "viewer");
    let (ld, hd) = (opt(light.delay_mean_ms, "delay")?, opt(loaded.delay_mean_ms, "delay")?);
    let (lj, hj) = (opt(light.frame_jitter_ms, "frame jitter")?, opt(loaded.frame_jitter_ms, "frame jitter")?);
    let (lf, hf) = (opt(light.frame_rate_fps, "frame rate")?, opt(loaded.frame_rate_fps, "frame rate")?);
    ensure(loaded.throughput_kbps < light.throughput_kbps, || {
        format!("throughput {} !< {}", loaded.throughput_kbps, light.throughput_kbps)
    })?;
    ensure(hd > ld, || format!("delay {hd} !> {ld}"))?;
    ensure(hj > lj, || format!("frame jitter {hj} !> {lj}"))?;
    ensure(hf < lf, || format!("frame rate {hf} !< {lf}"))?;
    Ok(format!(
        "throughput {:.1}<{:.1} kbps, delay {hd:.1}>{ld:.1} ms, frame jitter {hj:.1}>{lj:.1} ms, frame rate {hf:.2}<{lf:.2} fps",
        loaded.throughput_kbps, light.throughput_kbps
    ))
}

fn criterion2() -> Check {
    let snrs = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
    let rows = exp1_rows(&snrs, &[480.0], None);
    let cells: Vec<&Row> = snrs
        .iter()
        .map(|&s| median_row(&rows, &exp1_label("exp1", s, 480.0), "strongest-snr", "viewer"))
        .collect();
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        ensure(b.throughput_kbps >= a.throughput_kbps * 0.98, || {
            format!("throughput falls {} -> {} between {} and {} dB", a.throughput_kbps, b.throughput_kbps, a.snr_db, b.snr_db)
        })?;
        let (la, lb) = (opt(a.loss_ratio, "loss")?, opt(b.loss_ratio, "loss")?);
        ensure(lb <= la * 1.02, || format!("loss rises {la} -> {lb} between {} and {} dB", a.snr_db, b.snr_db))?;
    }
    Ok(format!(
        "throughput {:.1}..{:.1} kbps, loss {:.4}..{:.4} over 10..70 dB",
        cells[0].throughput_kbps,
        cells[6].throughput_kbps,
        cells[0].loss_ratio.unwrap(),
        cells[6].loss_ratio.unwrap()
    ))
}

fn criterion3() -> Check {
    let rows = exp2_rows(exp2_base(80.0), &[80.0], None);
    let label = exp2_label("exp2", 80.0);
    let u = median_row(&rows, &label, "unbalanced", "viewer");
    let l = median_row(&rows, &label, "lba", "viewer");
    let gain = l.throughput_kbps / u.throughput_kbps - 1.0;
    ensure(gain >= 0.10, || format!("lba gain {:.1}% < 10%", gain * 100.0))?;
    let (ud, ld) = (opt(u.frame_delay_mean_ms, "frame delay")?, opt(l.frame_delay_mean_ms, "frame delay")?);
    let (uj, lj) = (opt(u.frame_jitter_ms, "frame jitter")?, opt(l.frame_jitter_ms, "frame jitter")?);
    ensure(ld < ud, || format!("frame delay {ld} !< {ud}"))?;
    ensure(lj < uj, || format!("frame jitter {lj} !< {uj}"))?;
    Ok(format!(
        "throughput {:.1}->{:.1} kbps (+{:.0}%), frame delay {ud:.1}->{ld:.1} ms, frame jitter {uj:.1}->{lj:.1} ms",
        u.throughput_kbps,
        l.throughput_kbps,
        gain * 100.0
    ))
}

const HALF_PAIRS: [(f64, f64); 3] = [(80.0, 40.0), (60.0, 30.0), (40.0, 20.0)];

fn criterion4() -> Check {
    let mut out = Vec::new();
    for (src, tgt) in HALF_PAIRS {
        let rows = exp2_rows(exp2_base(src), &[tgt], None);
        let label = exp2_label("exp2", tgt);
        let u = median_row(&rows, &label, "unbalanced", "viewer");
        let l = median_row(&rows, &label, "lba", "viewer");
        ensure(l.handoffs == 1.0, || format!("{src}->{tgt}: lba made {} handoffs", l.handoffs))?;
        ensure(l.throughput_kbps < u.throughput_kbps, || {
            format!("{src}->{tgt}: lba {} !< unbalanced {}", l.throughput_kbps, u.throughput_kbps)
        })?;
        out.push(format!("{src}->{tgt}: {:.1}<{:.1}", l.throughput_kbps, u.throughput_kbps));
    }
    Ok(format!("lba vs unbalanced kbps {}", out.join(", ")))
}

/// QoS fields only; policy label and handoff count are compared separately.
fn same_qos(a: &Row, b: &Row) -> bool {
    let strip = |r: &Row| Row { policy: String::new(), handoffs: 0.0, ..r.clone() };
    strip(a) == strip(b)
}

fn criterion5() -> Check {
    let mut out = Vec::new();
    for (src, tgt) in HALF_PAIRS {
        let rows = exp2_rows(exp2_base(src), &[tgt], None);
        let label = exp2_label("exp2", tgt);
        let guarded: Vec<&Row> = rows.iter().filter(|r| r.scenario == label && r.policy == "snr-lba").collect();
        ensure(guarded.iter().all(|r| r.handoffs == 0.0), || format!("{src}->{tgt}: snr-lba handed off"))?;
        for st in ["viewer", "bulk1", "bulk2"] {
            let g = seed_rows(&rows, &label, "snr-lba", st);
            let u = seed_rows(&rows, &label, "unbalanced", st);
            ensure(g.len() == DEFAULT_SEEDS.len() && g.len() == u.len(), || "missing seed rows".into())?;
            ensure(g.iter().zip(&u).all(|(a, b)| same_qos(a, b)), || {
                format!("{src}->{tgt}: snr-lba differs from unbalanced for {st}")
            })?;
        }
        let g = median_row(&rows, &label, "snr-lba", "viewer");
        let l = median_row(&rows, &label, "lba", "viewer");
        ensure(g.throughput_kbps > l.throughput_kbps, || {
            format!("{src}->{tgt}: snr-lba {} !> lba {}", g.throughput_kbps, l.throughput_kbps)
        })?;
    }
    out.push("0 handoffs and unbalanced QoS at 80->40, 60->30, 40->20".to_owned());

    let base = exp2_base(80.0);
    let (mover, home) = exp2_mover(&base).unwrap();
    let sc = exp2_cell_scenario(&base, &mover, &home, 80.0);
    let (_, hl) = exp2_association(&sc, "lba").unwrap();
    let (_, hg) = exp2_association(&sc, "snr-lba").unwrap();
    ensure(hl.len() == 1 && hl == hg, || format!("80/80 handoffs differ: {hl:?} vs {hg:?}"))?;
    let rows = exp2_rows(base, &[80.0], None);
    let label = exp2_label("exp2", 80.0);
    for st in ["viewer", "bulk1", "bulk2"] {
        let g = seed_rows(&rows, &label, "snr-lba", st);
        let l = seed_rows(&rows, &label, "lba", st);
        ensure(g.iter().zip(&l).all(|(a, b)| same_qos(a, b) && a.handoffs == b.handoffs), || {
            format!("80/80: snr-lba differs from lba for {st}")
        })?;
    }
    out.push(format!("80/80 same handoff {}->{} as lba", hl[0].from_ap, hl[0].to_ap));
    Ok(out.join("; "))
}

fn criterion6() -> Check {
    let cases = 3000;
    let moved = std::cell::Cell::new(0u32);
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let result = runner.run(&instances(), |inst| {
        let sc = inst.scenario();
        let params = sc.policy_params();
        let state = inst.state(&sc);
        let flat = Flat::of(&inst);
        let fail = |m: String| Err(TestCaseError::fail(m));

        if class_vec(&classify_load(&state, &params)) != oracle_classes(&flat.ap_loads(), inst.beta) {
            return fail("classify_load".into());
        }
        for kind in [PolicyKind::Lba, PolicyKind::SnrAwareLba] {
            let guard = (kind == PolicyKind::SnrAwareLba).then_some(inst.boundary);
            let p = params.for_kind(kind);
            let got = select_candidate(&state, &sc, &p, guard.is_some()).unwrap().map(|(m, o, n)| {
                (index_of(&m.station.0), index_of(&m.from.0), index_of(&m.to.0), o, n)
            });
            let want = oracle_select(&flat, inst.beta, params.assoc_threshold_db, guard);
            if got != want {
                return fail(format!("select_candidate {kind}: got {got:?}, want {want:?}"));
            }
            let (after, handoffs) = rebalance(&state, &sc, &p, kind).unwrap();
            let got: Vec<_> = handoffs
                .iter()
                .map(|h| (index_of(&h.station.0), index_of(&h.from_ap.0), index_of(&h.to_ap.0)))
                .collect();
            let (want, assoc) = oracle_rebalance(&flat, inst.beta, params.assoc_threshold_db, guard, inst.max_handoffs);
            if got != want {
                return fail(format!("rebalance {kind}: got {got:?}, want {want:?}"));
            }
            if kind == PolicyKind::Lba && !want.is_empty() {
                moved.set(moved.get() + 1);
            }
            let final_assoc: Vec<usize> = after.association().values().map(|a| index_of(&a.0)).collect();
            if final_assoc != assoc {
                return fail(format!("rebalance {kind} final association"));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!(
            "{cases} random instances ({} with lba handoffs), 100% agreement on classify/select/rebalance",
            moved.get()
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn criterion7() -> Check {
    let mut runs = 0;
    let mut check = |rows_from: &str, sc: &Scenario, state: &NetworkState| -> Result<(), String> {
        let cfg = SimConfig { seed: 7, ..sc.sim.clone() };
        let a = macsim::run(sc, state, &cfg).map_err(|e| e.to_string())?;
        let b = macsim::run(sc, state, &cfg).map_err(|e| e.to_string())?;
        runs += 1;
        ensure(a.counters.is_conserved(), || format!("{rows_from}: counters not conserved"))?;
        ensure(a == b, || format!("{rows_from}: repeated run differs"))
    };
    for name in ["exp1", "exp2"] {
        let sc = shipped(name);
        for variant in ["unbalanced", "lba", "snr-lba"] {
            let (state, _) = exp2_association(&sc, variant).map_err(|e| e.to_string())?;
            check(name, &sc, &state)?;
        }
    }
    let mut sat = shipped("exp1");
    if let Some(lbsim::traffic::TrafficProfile::Cbr(p)) = sat.profiles.get_mut("background") {
        p.rate_kbps = 12237.0;
    }
    let (state, _) = exp2_association(&sat, "unbalanced").map_err(|e| e.to_string())?;
    check("exp1 saturated", &sat, &state)?;

    let one = exp1_rows(&[10.0, 50.0], &[480.0, 12237.0], Some(1));
    let eight = exp1_rows(&[10.0, 50.0], &[480.0, 12237.0], Some(8));
    ensure(emit_csv(&one) == emit_csv(&eight), || "exp1 CSV differs between 1 and 8 workers".into())?;
    let one = exp2_rows(exp2_base(80.0), &[80.0, 40.0], Some(1));
    let eight = exp2_rows(exp2_base(80.0), &[80.0, 40.0], Some(8));
    ensure(emit_csv(&one) == emit_csv(&eight), || "exp2 CSV differs between 1 and 8 workers".into())?;

    let sc = exp2_base(80.0);
    let (mover, home) = exp2_mover(&sc).unwrap();
    for t in [80.0, 40.0] {
        let cell = exp2_cell_scenario(&sc, &mover, &home, t);
        for variant in ["unbalanced", "lba", "snr-lba"] {
            let (state, h) = exp2_association(&cell, variant).unwrap();
            for seed in DEFAULT_SEEDS {
                let out = simulate(&cell, &state, &h, seed).unwrap();
                runs += 1;
                ensure(out.result.counters.is_conserved(), || format!("target {t} {variant} seed {seed}: not conserved"))?;
            }
        }
    }
    Ok(format!("{runs} runs conserved and repeatable; exp1/exp2 CSV identical with 1 and 8 workers"))
}

/// Single FIFO, deterministic arrivals and service, completion before
/// arrival on ties; returns the delivery time of each packet, if any.
fn replay_queue(arrivals: &[u64], service: u64, capacity: usize, horizon: u64) -> Vec<Option<u64>> {
    let mut out = vec![None; arrivals.len()];
    let mut queue: std::collections::VecDeque<usize> = Default::default();
    let mut busy_until: Option<u64> = None;
    for (i, &t) in arrivals.iter().enumerate() {
        // finish everything completing at or before t
        while let Some(done) = busy_until {
            if done > t {
                break;
            }
            let head = queue.pop_front().unwrap();
            if done <= horizon {
                out[head] = Some(done);
            }
            busy_until = if queue.is_empty() { None } else { Some(done + service) };
        }
        if queue.len() < capacity {
            queue.push_back(i);
            if busy_until.is_none() {
                busy_until = Some(t + service);
            }
        }
    }
    while let Some(done) = busy_until {
        if done > horizon {
            break;
        }
        let head = queue.pop_front().unwrap();
        out[head] = Some(done);
        busy_until = if queue.is_empty() { None } else { Some(done + service) };
    }
    out
}

fn criterion8() -> Check {
    let text = r#"
name = "saturation"

[profiles.flood]
kind = "cbr"
rate_kbps = 12000.0
packet_bytes = 1500

[[ap]]
id = "ap1"
x = 0.0
y = 0.0
channel = 1

[[station]]
id = "sta"
x = 0.0
y = 0.0
traffic = "flood"
ap = "ap1"

[[snr_override]]
ap = "ap1"
station = "sta"
snr_db = 50.0
"#;
    let sc = Scenario::parse(text).map_err(|e| e.to_string())?;
    let state = exp2_association(&sc, "unbalanced").unwrap().0;
    let cfg = SimConfig { duration_s: 60.0, ..SimConfig::default() };
    let res = macsim::run(&sc, &state, &cfg).map_err(|e| e.to_string())?;
    let sta = StationId::from("sta");
    let recs: Vec<_> = res.records_for(&sta).collect();
    let rep = lbsim::metrics::qos_report(&recs, None, cfg.duration_s, &sc.psnr).map_err(|e| e.to_string())?;

    let analytic_pps = 1.0 / (12000.0 / 11_000_000.0 + 0.0008);
    let analytic = analytic_pps * 12000.0 / 1000.0;
    let rel = (rep.throughput_kbps - analytic).abs() / analytic;
    ensure(rel <= 0.01, || format!("throughput {} vs analytic {analytic} ({:.2}%)", rep.throughput_kbps, rel * 100.0))?;
    ensure((rep.loss_ratio - 0.47).abs() < 0.01, || format!("loss {} not ~0.47", rep.loss_ratio))?;

    let mut arrivals: Vec<u64> = recs.iter().map(|r| r.birth_us).collect();
    arrivals.sort_unstable();
    let service = airtime_us(12000, 11000.0, 0.0008);
    let want = replay_queue(&arrivals, service, cfg.queue_capacity, cfg.duration_us());
    let mut by_birth: Vec<_> = recs.clone();
    by_birth.sort_by_key(|r| (r.birth_us, r.packet_id));
    for (r, w) in by_birth.iter().zip(&want) {
        let got = match r.outcome {
            Outcome::Delivered { at_us, attempts } => {
                ensure(attempts == 1, || "retry at 50 dB".into())?;
                Some(at_us)
            }
            _ => None,
        };
        ensure(got == *w, || format!("packet {}: simulator {got:?}, replay {w:?}", r.packet_id))?;
    }
    Ok(format!(
        "{:.1} kbps vs analytic {analytic:.1} ({:.3}%), loss {:.3}, {} packets match the queue replay",
        rep.throughput_kbps,
        rel * 100.0,
        rep.loss_ratio,
        by_birth.len()
    ))
}

fn criterion9() -> Check {
    let mut checked = 0;
    for source in [80.0, 60.0, 40.0] {
        let base = exp2_base(source);
        let (mover, home) = exp2_mover(&base).unwrap();
        for target in [80.0, 60.0, 40.0, 30.0, 20.0, 10.0] {
            let sc = exp2_cell_scenario(&base, &mover, &home, target);
            let params = sc.policy_params();
            let state = lbsim::policies::initial_association(&sc, &params).unwrap();
            let big = state.scaled(7.0);
            ensure(classify_load(&state, &params) == classify_load(&big, &params), || {
                format!("classification changes at {source}->{target}")
            })?;
            for kind in [PolicyKind::Lba, PolicyKind::SnrAwareLba] {
                let p = params.for_kind(kind);
                let guard = kind == PolicyKind::SnrAwareLba;
                let a = select_candidate(&state, &sc, &p, guard).unwrap();
                let b = select_candidate(&big, &sc, &p, guard).unwrap();
                ensure(a == b, || format!("selection changes at {source}->{target} {kind}"))?;
                let (sa, ha) = rebalance(&state, &sc, &p, kind).unwrap();
                let (sb, hb) = rebalance(&big, &sc, &p, kind).unwrap();
                ensure(ha == hb && sa.association() == sb.association(), || {
                    format!("handoffs change at {source}->{target} {kind}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} exp2 decision sets identical under x7 load"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("load dominates SNR in exp1", criterion1),
        ("SNR monotonicity at light load", criterion2),
        ("LBA benefit at 80/80 dB", criterion3),
        ("half-SNR crossover", criterion4),
        ("SNR guard effectiveness", criterion5),
        ("policy brute-force oracles", criterion6),
        ("conservation and determinism", criterion7),
        ("MAC capacity oracle", criterion8),
        ("scale invariance x7", criterion9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
