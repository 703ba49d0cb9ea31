//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use beamtrain::array::{beam_gain, bin_center};
use beamtrain::channel::{
    snr_to_noise, AngleMode, ChannelRealization, MeasurementModel, PathComponent,
};
use beamtrain::codebook::{alignment_phase, bottom_codeword, midpoint_phase_check, CodebookState};
use beamtrain::experiment::{
    overhead, run_monte_carlo, true_bin, CurvePoint, ExperimentConfig, Method, OverheadMethod,
};
use beamtrain::training::{
    descend_one_path, exhaustive_sweep, train_baseline_subtraction, train_dynamic,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("{verdict} {criterion}: {detail}");
    assert!(pass, "{criterion}: {detail}");
}

/// On-grid channel with pairwise-distinct departure bins and arrival bins.
fn draw_side_distinct(nt: usize, nr: usize, l: usize, rng: &mut ChaCha8Rng) -> ChannelRealization {
    let mut tx: Vec<usize> = Vec::new();
    let mut rx: Vec<usize> = Vec::new();
    while tx.len() < l {
        let i = rng.random_range(1..=nt);
        if !tx.contains(&i) {
            tx.push(i);
        }
    }
    while rx.len() < l {
        let j = rng.random_range(1..=nr);
        if !rx.contains(&j) {
            rx.push(j);
        }
    }
    let half = 0.5f64.sqrt();
    let paths = (0..l)
        .map(|k| PathComponent {
            gain: Complex64::new(
                half * rng.sample::<f64, _>(rand_distr::StandardNormal),
                half * rng.sample::<f64, _>(rand_distr::StandardNormal),
            ),
            aod: bin_center(nt, tx[k]),
            aoa: bin_center(nr, rx[k]),
        })
        .collect();
    ChannelRealization::new(nt, nr, paths).unwrap()
}

fn sorted_true_bins(ch: &ChannelRealization) -> Vec<(usize, usize)> {
    let mut bins: Vec<(usize, usize)> = ch
        .paths()
        .iter()
        .map(|p| {
            (
                true_bin(p.aod, ch.nt()).unwrap(),
                true_bin(p.aoa, ch.nr()).unwrap(),
            )
        })
        .collect();
    bins.sort_unstable();
    bins
}

#[test]
fn criterion_1_overhead_table() {
    let values = [
        (OverheadMethod::Dynamic, 84),
        (OverheadMethod::Hs, 84),
        (OverheadMethod::Mdr, 111),
        (OverheadMethod::Acs, 540),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for (method, expect) in values {
        let v = overhead(method, 32, 3, 2, 2).unwrap();
        got.push(format!("{}={v}", method.name()));
        ok &= v == expect;
    }
    report(
        "criterion 1 (overhead table)",
        ok,
        &format!("Nt=32 Ld=3 S0=2 K=2 -> {}", got.join(" ")),
    );
}

#[test]
fn criterion_2_simulated_count_equals_closed_form() {
    let noise = snr_to_noise(7.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_dynamic = (84u64, 84u64);
    let mut worst_baseline = (84u64, 84u64);
    for trial in 0..1000u64 {
        let ch = beamtrain::channel::draw_channel(32, 32, 3, AngleMode::Continuous, &mut rng)
            .unwrap();
        let mut mm = MeasurementModel::from_seed(1.0, noise, trial).unwrap();
        let outcome = train_dynamic(32, 32, 3, 2, &ch, &mut mm).unwrap();
        worst_dynamic = (
            worst_dynamic.0.min(mm.count()),
            worst_dynamic.1.max(mm.count()),
        );
        assert_eq!(outcome.total_measurements, mm.count());

        let mut mm = MeasurementModel::from_seed(1.0, noise, trial + 1_000_000).unwrap();
        let outcome = train_baseline_subtraction(32, 32, 3, 2, &ch, &mut mm).unwrap();
        worst_baseline = (
            worst_baseline.0.min(mm.count()),
            worst_baseline.1.max(mm.count()),
        );
        assert_eq!(outcome.total_measurements, mm.count());
    }
    let ok = worst_dynamic == (84, 84) && worst_baseline == (84, 84);
    report(
        "criterion 2 (simulated count = closed form)",
        ok,
        &format!(
            "1000 trials each: dynamic count range {worst_dynamic:?}, baseline count range {worst_baseline:?}"
        ),
    );
}

#[test]
fn criterion_3_null_placement() {
    // Worked example: N=16, S0=1, remove 12, codeword (1,2) nulls 7/16.
    let mut state = CodebookState::new(16, 1).unwrap();
    state.remove_index(12).unwrap();
    let cw = state.codeword_at(1, 2).unwrap();
    let g = beam_gain(cw.weights(), 7.0 / 16.0).unwrap().norm();
    let example_ok = g < 1e-10 * 16f64.sqrt();

    // 200 random removal sequences on N=32: every codeword of the updated
    // state is null toward every removed bin center.
    let mut rng = ChaCha8Rng::seed_from_u64(3030);
    let bound = 1e-10 * 32f64.sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut state = CodebookState::new(32, 1).unwrap();
        let count = rng.random_range(1..=8);
        for _ in 0..count {
            state.remove_index(rng.random_range(1..=32)).unwrap();
        }
        let removed: Vec<usize> = state.removed().iter().copied().collect();
        for s in 1..=5u32 {
            for m in 1..=(1usize << s) {
                let cw = state.codeword_at(s, m).unwrap();
                for &p in &removed {
                    let g = beam_gain(cw.weights(), bin_center(32, p)).unwrap().norm();
                    worst = worst.max(g);
                }
            }
        }
    }
    let ok = example_ok && worst < bound;
    report(
        "criterion 3 (null placement)",
        ok,
        &format!("|G| at 7/16 = {g:.3e}; worst removed-center gain over 200 sequences = {worst:.3e} (bound {bound:.3e})"),
    );
}

#[test]
fn criterion_4_coverage_flatness_and_alignment() {
    let mut worst_flat: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for &n in &[16usize, 32, 64] {
        let mut state = CodebookState::new(n, 0).unwrap();
        for s in 0..=state.total_layers() {
            for m in 1..=(1usize << s) {
                let set = state.set_at(s, m).unwrap().clone();
                let expect = (n as f64 / set.len() as f64).sqrt();
                let cw = state.codeword_at(s, m).unwrap();
                for i in set.iter() {
                    let g = beam_gain(cw.weights(), bin_center(n, i)).unwrap().norm();
                    worst_flat = worst_flat.max((g - expect).abs());
                }
            }
        }
        for i in 1..n {
            let mid = -1.0 + 2.0 * i as f64 / n as f64;
            let fi = bottom_codeword(n, i).unwrap();
            let fj = bottom_codeword(n, i + 1).unwrap();
            let lhs = Complex64::from_polar(1.0, alignment_phase(n, i))
                * beam_gain(fi.weights(), mid).unwrap();
            let rhs = Complex64::from_polar(1.0, alignment_phase(n, i + 1))
                * beam_gain(fj.weights(), mid).unwrap();
            worst_residual = worst_residual.max((lhs - rhs).norm());
            let delta = midpoint_phase_check(n, i).unwrap();
            assert!((delta - PI * (-1.0 + 1.0 / n as f64)).abs() < 1e-12);
        }
    }
    let ok = worst_flat < 1e-9 && worst_residual < 1e-10;
    report(
        "criterion 4 (coverage flatness + midpoint alignment)",
        ok,
        &format!(
            "N in {{16,32,64}}: worst |G - sqrt(N/|set|)| = {worst_flat:.3e}, worst alignment residual = {worst_residual:.3e}"
        ),
    );
}

#[test]
fn criterion_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5055);
    let mut agree = 0u32;
    for seed in 0..500u64 {
        let ch = beamtrain::channel::draw_channel(32, 32, 1, AngleMode::OnGrid, &mut rng).unwrap();
        let mut mm = MeasurementModel::from_seed(1.0, 0.0, seed).unwrap();
        let mut tx = CodebookState::new(32, 2).unwrap();
        let mut rx = CodebookState::new(32, 2).unwrap();
        let (p, q, _) = descend_one_path(&mut tx, &mut rx, &ch, &mut mm, 2).unwrap();
        let mut oracle_mm = MeasurementModel::from_seed(1.0, 0.0, seed).unwrap();
        let oracle = exhaustive_sweep(&ch, &mut oracle_mm).unwrap();
        assert_eq!(oracle_mm.count(), 1024);
        if (p, q) == oracle {
            agree += 1;
        }
    }

    let cfg = ExperimentConfig {
        l: 1,
        l_d: 1,
        snr_db_list: vec![200.0],
        trials: 500,
        angle_mode: AngleMode::OnGrid,
        seed: 505,
        ..ExperimentConfig::default()
    };
    let points = run_monte_carlo(&cfg).unwrap();
    let ok = agree == 500 && points[0].success_rate == 1.0;
    report(
        "criterion 5 (oracle equivalence)",
        ok,
        &format!(
            "descent matched exhaustive sweep on {agree}/500 noiseless trials; Monte Carlo success rate {}",
            points[0].success_rate
        ),
    );
}

#[test]
fn criterion_6_multipath_noiseless_on_grid() {
    let noise = snr_to_noise(200.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6066);
    let trials = 500u64;
    let mut ok_dynamic = 0u64;
    let mut ok_baseline = 0u64;
    for trial in 0..trials {
        let ch = draw_side_distinct(32, 32, 3, &mut rng);
        let truth = sorted_true_bins(&ch);

        let mut mm = MeasurementModel::from_seed(1.0, noise, trial).unwrap();
        let outcome = train_dynamic(32, 32, 3, 2, &ch, &mut mm).unwrap();
        let mut got = outcome.detected.clone();
        got.sort_unstable();
        if got == truth {
            ok_dynamic += 1;
        } else {
            println!(
                "criterion 6 log: dynamic failure on trial {trial}: truth {truth:?}, detected {got:?}"
            );
        }

        let mut mm = MeasurementModel::from_seed(1.0, noise, trial).unwrap();
        let outcome = train_baseline_subtraction(32, 32, 3, 2, &ch, &mut mm).unwrap();
        let mut got = outcome.detected.clone();
        got.sort_unstable();
        if got == truth {
            ok_baseline += 1;
        } else {
            println!(
                "criterion 6 log: baseline failure on trial {trial}: truth {truth:?}, detected {got:?}"
            );
        }
    }
    let rate_dynamic = ok_dynamic as f64 / trials as f64;
    let rate_baseline = ok_baseline as f64 / trials as f64;
    let ok = rate_dynamic >= 0.99 && rate_baseline >= 0.99;
    report(
        "criterion 6 (multipath noiseless on-grid)",
        ok,
        &format!("dynamic success {rate_dynamic}, baseline success {rate_baseline} over {trials} trials"),
    );
}

struct ReferenceSweep {
    elapsed: Duration,
    dynamic: Vec<CurvePoint>,
    baseline: Vec<CurvePoint>,
}

static SWEEP: OnceLock<ReferenceSweep> = OnceLock::new();

/// The reference sweep shared by criteria 7 and 9: both methods, 11 SNR
/// points, 2000 trials per point, continuous angles.
fn reference_sweep() -> &'static ReferenceSweep {
    SWEEP.get_or_init(|| {
        let base = ExperimentConfig {
            trials: 2000,
            seed: 7077,
            ..ExperimentConfig::default()
        };
        let start = Instant::now();
        let dynamic = run_monte_carlo(&base).unwrap();
        let baseline = run_monte_carlo(&ExperimentConfig {
            method: Method::BaselineSubtraction,
            ..base.clone()
        })
        .unwrap();
        ReferenceSweep {
            elapsed: start.elapsed(),
            dynamic,
            baseline,
        }
    })
}

#[test]
fn criterion_7_statistical_curve_properties() {
    let sweep = reference_sweep();
    let dynamic = &sweep.dynamic;
    let baseline = &sweep.baseline;

    for p in dynamic.iter().chain(baseline.iter()) {
        assert_eq!(p.mean_measurements, 84.0, "overhead must be data-independent");
    }

    let mut monotone_ok = true;
    for pair in dynamic.windows(2) {
        let slack = 2.0 * (pair[0].wilson_halfwidth + pair[1].wilson_halfwidth);
        if pair[1].success_rate < pair[0].success_rate - slack {
            monotone_ok = false;
            println!(
                "criterion 7 log: non-monotone step {} dB -> {} dB: {} -> {}",
                pair[0].snr_db, pair[1].snr_db, pair[0].success_rate, pair[1].success_rate
            );
        }
    }

    let mut dominance_ok = true;
    for (d, b) in dynamic.iter().zip(baseline.iter()) {
        assert_eq!(d.snr_db, b.snr_db);
        if d.snr_db < 0.0 || d.snr_db > 15.0 {
            continue;
        }
        if d.success_rate + d.wilson_halfwidth < b.success_rate - b.wilson_halfwidth {
            dominance_ok = false;
            println!(
                "criterion 7 log: baseline above dynamic at {} dB: {} vs {}",
                d.snr_db, d.success_rate, b.success_rate
            );
        }
    }

    let curve: Vec<String> = dynamic
        .iter()
        .zip(baseline.iter())
        .map(|(d, b)| format!("{}dB {:.3}/{:.3}", d.snr_db, d.success_rate, b.success_rate))
        .collect();
    println!("criterion 7 curve (dynamic/baseline): {}", curve.join(", "));
    report(
        "criterion 7 (statistical curve properties)",
        monotone_ok && dominance_ok,
        &format!("monotone within Wilson slack: {monotone_ok}; dynamic >= baseline on [0,15] dB within Wilson slack: {dominance_ok}"),
    );
}

#[test]
fn criterion_8_sweep_reproducibility() {
    // Via the installed binary, as a user would run it.
    let exe = env!("CARGO_BIN_EXE_beamtrain");
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = std::process::Command::new(exe)
            .args([
                "sweep",
                "--trials",
                "150",
                "--seed",
                "42",
                "--snr",
                "-5..20 step 2.5",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    let ok = !a.is_empty() && a == b;
    report(
        "criterion 8 (byte-identical sweep reruns)",
        ok,
        &format!("two sweep runs wrote {} identical bytes", a.len()),
    );
}

#[test]
fn criterion_9_desk_scale_runtime() {
    let sweep = reference_sweep();
    let ok = sweep.elapsed < Duration::from_secs(300);
    report(
        "criterion 9 (desk-scale runtime)",
        ok,
        &format!(
            "full 2-method x 11-point x 2000-trial sweep took {:.1} s (budget 300 s)",
            sweep.elapsed.as_secs_f64()
        ),
    );
}
