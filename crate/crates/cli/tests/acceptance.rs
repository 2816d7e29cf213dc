//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use tandem_core::bounds::{escape_bound_hom, success_bound_hom, TimeTransform};
use tandem_core::converse::{
    fano_error_floor, g_table, g_value, geometric_sum_cdf, slots_for_velocity,
};
use tandem_core::lpp::{geometric_weights, lpp_passage, queue_from_services};
use tandem_core::model::generate_states;
use tandem_core::simnet::{
    ftlr_deadline, message_bits, run_bit_separation_blocks, run_ftlr_single_bit, run_gsi_control,
    verify_departure_recursion, GsiOptions, MessageKind, RecordOptions,
};
use tandem_core::wavefront::{
    compare_fronts, extract_fronts_from_network, martingale_step, simulate_fronts_coupled,
    stream_events,
};
use tandem_core::{ErasureProfile, RandomnessSpec, Regime, Schedule};
use tandem_iv::montecarlo::{run_experiment_on, Experiment, ProfileSpec, Scheme, Verdict};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn regime_of(p: &ErasureProfile) -> Regime {
    if p.is_homogeneous() {
        Regime::Homogeneous
    } else {
        Regime::Heterogeneous
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        Err(format!("took {t:.1?}, limit {limit:?}"))
    } else {
        Ok(t)
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

fn random_profile<R: Rng>(rng: &mut R, k: usize) -> ErasureProfile {
    match rng.random_range(0..3) {
        0 => ErasureProfile::homogeneous(k, rng.random_range(0.0..0.9)).unwrap(),
        1 => {
            let len = rng.random_range(2..=4);
            let pattern: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..0.9)).collect();
            ErasureProfile::periodic(k, &pattern).unwrap()
        }
        _ => {
            ErasureProfile::explicit((0..k).map(|_| rng.random_range(0.0..0.9)).collect()).unwrap()
        }
    }
}

fn dual_dp_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomnessSpec::new(101, 0).rng();
    let mut profiles = Vec::new();
    for eps in [0.0, 0.1, 0.5, 0.9] {
        profiles.push(ErasureProfile::homogeneous(30, eps).unwrap());
    }
    profiles.push(ErasureProfile::periodic(30, &[0.2, 0.4]).unwrap());
    profiles.push(ErasureProfile::periodic(30, &[0.7, 0.05, 0.3]).unwrap());
    for _ in 0..4 {
        profiles.push(
            ErasureProfile::explicit((0..30).map(|_| rng.random_range(0.0..0.9)).collect())
                .unwrap(),
        );
    }
    let mut worst = 0.0f64;
    for p in &profiles {
        let table = g_table(p, 30, 100).map_err(|e| e.to_string())?;
        for i in 1..=30 {
            for n in 0..=100 {
                let g = table.get(i, n).unwrap();
                let cdf = geometric_sum_cdf(p, i, (i + n) as u64).map_err(|e| e.to_string())?;
                worst = worst.max((g - cdf).abs());
            }
        }
    }
    let t = within(Duration::from_secs(10), start)?;
    if worst <= 1e-12 {
        Ok(format!(
            "{} profiles, max |g - cdf| = {worst:e}, {t:.1?}",
            profiles.len()
        ))
    } else {
        Err(format!("max |g - cdf| = {worst:e}"))
    }
}

fn lpp_queue_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomnessSpec::new(102, 0).rng();
    for x in 0..1000 {
        let (k, m) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let eps = rng.random_range(0.0..0.9);
        let w = geometric_weights(k, m, eps, &mut rng).unwrap();
        if queue_from_services(&w).unwrap() != lpp_passage(&w).unwrap() {
            return Err(format!("small grid {x} ({k} x {m}) differs"));
        }
    }
    for x in 0..50 {
        let w = geometric_weights(200, 200, 0.5, &mut rng).unwrap();
        if queue_from_services(&w).unwrap() != lpp_passage(&w).unwrap() {
            return Err(format!("200 x 200 grid {x} differs"));
        }
    }
    let mut gsi = 0;
    for t in 0..300u64 {
        let k = rng.random_range(1..=60);
        let m = rng.random_range(1..=40);
        let p = random_profile(&mut rng, k);
        let spec = RandomnessSpec::new(103, t);
        let bits = message_bits(MessageKind::Uniform, m, &mut spec.rng());
        let horizon = rng.random_range(1..=2000);
        let states = generate_states(&p, horizon, &spec).unwrap();
        let rec = run_gsi_control(&p, &bits, &states, GsiOptions::default())
            .map_err(|e| e.to_string())?;
        if let Err(v) = verify_departure_recursion(&rec, &states) {
            return Err(format!("GSI trial {t}: {v:?}"));
        }
        gsi += 1;
    }
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("1000 small + 50 grids at 200 x 200 equal, {gsi} GSI records satisfy the recursion, {t:.1?}"))
}

fn ftlr_exact_law() -> Outcome {
    let start = Instant::now();
    let p = ErasureProfile::homogeneous(400, 0.2).unwrap();
    let tau = ftlr_deadline(&p, 1.0, 0.2);
    if tau != 567 {
        return Err(format!(
            "decode slot {tau}, expected ceil(500 + 400^0.7) = 567"
        ));
    }
    let mut exp = Experiment::new(Scheme::Ftlr, ProfileSpec::Homogeneous(0.2), vec![400]);
    exp.trials = 10_000;
    exp.master_seed = 3;
    exp.c = vec![1.0];
    exp.delta_sep = vec![0.2];
    // bit 1: an error is exactly a late arrival
    exp.message = MessageKind::Alternating;
    let row = run_experiment_on(&exp, &pool(1))
        .map_err(|e| e.to_string())?
        .rows
        .remove(0);
    let exact_tail = 1.0 - geometric_sum_cdf(&p, 400, tau + 1).unwrap();
    let error = 1.0 - row.empirical;
    let se = (exact_tail * (1.0 - exact_tail) / 10_000.0).sqrt();
    let t = within(Duration::from_secs(60), start)?;
    let detail = format!(
        "tau = {tau}, empirical error {error:e} vs exact tail {exact_tail:e} (3 SE = {:e}), {t:.1?}",
        3.0 * se
    );
    if (error - exact_tail).abs() <= 3.0 * se + 1e-12 && row.verdict == Verdict::Pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bitsep_dominance() -> Outcome {
    let start = Instant::now();
    let (k, m, eps, c, delta) = (100_000, 4, 0.5, 1.0, 0.25);
    let bound = success_bound_hom(k, m, eps, c, delta)
        .unwrap()
        .success_lower_bound;
    let p = ErasureProfile::homogeneous(k, eps).unwrap();
    let s = Schedule::new(&p, m, c, delta).unwrap();
    let trials = 1000u64;
    let (mut events, mut decoded, mut checked) = (0u64, 0u64, 0u64);
    for t in 0..trials {
        let spec = RandomnessSpec::new(104, t);
        let bits = message_bits(MessageKind::Uniform, m, &mut spec.rng());
        let states = generate_states(&p, s.horizon(), &spec).unwrap();
        let ev = stream_events(&p, &s, &states).unwrap();
        events += ev.overall as u64;
        // full network on every tenth trial
        let record_fronts = t % 10 == 0;
        let rec = run_bit_separation_blocks(
            &p,
            &bits,
            &s,
            &states,
            RecordOptions {
                fronts: record_fronts,
            },
        )
        .unwrap();
        decoded += rec.all_correct() as u64;
        if rec.events != ev {
            return Err(format!("trial {t}: network and wave-front events differ"));
        }
        if ev.overall && !rec.all_correct() {
            return Err(format!("trial {t}: success event held but a bit was lost"));
        }
        if record_fronts {
            let network = extract_fronts_from_network(&rec, &s).unwrap();
            let coupled = simulate_fronts_coupled(&p, &s, &states).unwrap();
            if !rec.collision_detected {
                if let Some(d) = compare_fronts(&network, &coupled, k) {
                    return Err(format!("trial {t}: fronts diverge {d:?}"));
                }
            }
            checked += 1;
        }
    }
    let t = within(Duration::from_secs(600), start)?;
    let (ev_rate, success) = (
        events as f64 / trials as f64,
        decoded as f64 / trials as f64,
    );
    let detail = format!(
        "event rate {ev_rate}, decoded {success} vs bound {bound:.6}, {checked} full-network cross-checks, {t:.1?}"
    );
    if ev_rate >= bound && success >= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomnessSpec::new(105, 0).rng();
    let trials = 100_000u64;
    let (mut held, mut clean) = (0u64, 0u64);
    for t in 0..trials {
        let k = rng.random_range(1..=150);
        let m = rng.random_range(1..=6);
        let p = random_profile(&mut rng, k);
        let c = rng.random_range(0.5..3.0);
        let delta = rng.random_range(0.05..0.45);
        let s = Schedule::new(&p, m, c, delta).unwrap();
        let kind = if rng.random_bool(0.5) {
            MessageKind::Uniform
        } else {
            MessageKind::Alternating
        };
        let spec = RandomnessSpec::new(106, t);
        let bits = message_bits(kind, m, &mut spec.rng());
        let states = generate_states(&p, s.horizon(), &spec).unwrap();
        let rec =
            run_bit_separation_blocks(&p, &bits, &s, &states, RecordOptions::default()).unwrap();
        if rec.events.overall {
            held += 1;
            if !rec.all_correct() {
                return Err(format!(
                    "trial {t}: k={k} m={m} c={c} delta={delta}: event held, decode failed"
                ));
            }
        }
        clean += rec.all_correct() as u64;
    }
    let t = within(Duration::from_secs(600), start)?;
    Ok(format!(
        "0 violations in {trials} trials (event held in {held}, all bits correct in {clean}), {t:.1?}"
    ))
}

fn martingale_checks() -> Outcome {
    let mut rng = RandomnessSpec::new(107, 0).rng();
    let (mut worst_mean, mut states_checked) = (0.0f64, 0usize);
    let mut worst_empirical = 0.0f64;
    for x in 0..20 {
        let k = rng.random_range(20..=200);
        // alternate so both regimes are covered
        let p = if x % 2 == 0 {
            ErasureProfile::homogeneous(k, rng.random_range(0.0..0.9)).unwrap()
        } else {
            let pattern: Vec<f64> = (0..rng.random_range(2..=5))
                .map(|_| rng.random_range(0.0..0.9))
                .collect();
            ErasureProfile::periodic(k, &pattern).unwrap()
        };
        let regime = regime_of(&p);
        let limit = match regime {
            Regime::Homogeneous => {
                let e = p.eps_at(0);
                e.max(1.0 - e)
            }
            Regime::Heterogeneous => (1.0 / p.v_min() - 1.0).max(1.0),
        };
        if regime == Regime::Homogeneous && limit > 1.0 {
            return Err(format!("profile {x}: homogeneous bound {limit} > 1"));
        }
        for pos in 0..=(2 * k as u64) {
            let st = martingale_step(&p, regime, pos);
            worst_mean = worst_mean.max(st.mean().abs());
            if st.mean().abs() > 1e-12 {
                return Err(format!("profile {x}, position {pos}: mean {}", st.mean()));
            }
            if st.max_abs() > limit + 1e-12 {
                return Err(format!(
                    "profile {x}, position {pos}: |increment| {} > {limit}",
                    st.max_abs()
                ));
            }
            states_checked += 1;
        }

        // the realised increments of simulated fronts follow the same law
        let s = Schedule::new(&p, 1, 1.0, 0.25).unwrap();
        let tt = TimeTransform::new(&p);
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
        for t in 0..200 {
            let states =
                generate_states(&p, s.horizon(), &RandomnessSpec::new(108 + x, t)).unwrap();
            let f = &simulate_fronts_coupled(&p, &s, &states).unwrap()[0];
            for w in f.positions.windows(2) {
                let d = match regime {
                    Regime::Homogeneous => (w[1] - w[0]) as f64 - (1.0 - p.eps_at(0)),
                    Regime::Heterogeneous => tt.at(w[1] as u64) - tt.at(w[0] as u64) - 1.0,
                };
                if d.abs() > limit + 1e-9 {
                    return Err(format!("profile {x}: realised increment {d} > {limit}"));
                }
                sum += d;
                sq += d * d;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / n).sqrt();
        if mean.abs() > 4.0 * se + 1e-12 {
            return Err(format!(
                "profile {x}: realised mean increment {mean} (se {se})"
            ));
        }
        worst_empirical = worst_empirical.max(mean.abs() / se.max(1e-300));
    }
    Ok(format!(
        "{states_checked} states, max |mean| = {worst_mean:e}, worst realised mean {worst_empirical:.2} SE"
    ))
}

fn hom_identity_grid() -> Outcome {
    let mut worst = 0.0f64;
    let mut points = 0;
    for k in [100, 1_000, 10_000, 100_000, 1_000_000] {
        for m in [1, 4] {
            for eps in [0.1, 0.5] {
                for (c, delta) in [(1.0, 0.25), (2.0, 0.1), (0.5, 0.4), (3.0, 0.2), (1.5, 0.3)] {
                    let s = success_bound_hom(k, m, eps, c, delta).unwrap().raw_success;
                    let e = escape_bound_hom(k, eps, c, delta).unwrap().ln;
                    let rhs = 1.0 - m as f64 * e.exp();
                    let rel = (s - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(rel);
                    points += 1;
                }
            }
        }
    }
    if points == 100 && worst <= 1e-12 {
        Ok(format!("{points} points, max relative gap {worst:e}"))
    } else {
        Err(format!("{points} points, max relative gap {worst:e}"))
    }
}

fn heterogeneous_velocity() -> Outcome {
    let start = Instant::now();
    let p = ErasureProfile::periodic(1000, &[0.2, 0.4]).unwrap();
    let zeta = p.zeta();
    let trials = 2000u64;
    let mut total = 0.0;
    for t in 0..trials {
        let spec = RandomnessSpec::new(109, t);
        let states = generate_states(&p, 10_000, &spec).unwrap();
        let out = run_ftlr_single_bit(&p, 1, 1, &states).map_err(|e| e.to_string())?;
        let arrival = out
            .arrival_time
            .ok_or(format!("trial {t} did not arrive in 10000 slots"))?;
        total += arrival as f64 / 1000.0;
    }
    let mean = total / trials as f64;
    let gap = (mean / zeta - 1.0).abs();
    let t = start.elapsed();
    let detail = format!(
        "mean arrival/k {mean:.5} vs zeta {zeta:.5} ({:.3}% off), {t:.1?}",
        100.0 * gap
    );
    if (zeta - 1.458_33).abs() < 1e-5 && gap <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn converse_thresholds() -> Outcome {
    let p = ErasureProfile::homogeneous(100, 0.5).unwrap();
    let low = g_value(&p, 100, 61).unwrap();
    let n_high = slots_for_velocity(0.4, 100) as usize;
    let high = g_value(&p, 100, n_high).unwrap();
    let low_oracle = geometric_sum_cdf(&p, 100, 161).unwrap();
    let high_oracle = geometric_sum_cdf(&p, 100, 100 + n_high as u64).unwrap();
    let floor = fano_error_floor(&p, 100, 160).unwrap();
    let detail =
        format!("g(100, 61) = {low:.3e}, g(100, {n_high}) = {high:.6}, Fano floor {floor:.4}");
    let agree = (low - low_oracle).abs() <= 1e-12 && (high - high_oracle).abs() <= 1e-12;
    if low < 0.01 && high > 0.99 && floor > 0.41 && agree && slots_for_velocity(0.625, 100) == 61 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gsi_linear_regime() -> Outcome {
    let start = Instant::now();
    let mut devs = Vec::new();
    let mut detail = String::new();
    for (x, k) in [75usize, 150, 300].into_iter().enumerate() {
        let m = k / 2;
        let p = ErasureProfile::homogeneous(k, 0.5).unwrap();
        let mut total = 0.0;
        for t in 0..200u64 {
            let spec = RandomnessSpec::new(110 + x as u64, t);
            let bits = message_bits(MessageKind::Uniform, m, &mut spec.rng());
            let states = generate_states(&p, 20 * k as u64, &spec).unwrap();
            let rec = run_gsi_control(&p, &bits, &states, GsiOptions::default()).unwrap();
            let done = rec
                .completion_time
                .ok_or(format!("k={k} trial {t} incomplete"))?;
            total += done as f64 / k as f64;
        }
        let mean = total / 200.0;
        devs.push((mean / 5.0 - 1.0).abs());
        detail += &format!("k={k}: {mean:.4} ({:.2}%) ", 100.0 * devs[x]);
    }
    let t = within(Duration::from_secs(300), start)?;
    detail += &format!("{t:.1?}");
    if devs[2] <= 0.05 && devs[0] > devs[1] && devs[1] > devs[2] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DETERMINISM_CONFIG: &str = r#"
master_seed = 11

[[experiment]]
scheme = "bitsep"
profile = { kind = "homogeneous", epsilon = 0.5 }
k = [200, 1000]
m = [2, 4]
c = [1.0, 2.0]
trials = 300

[[experiment]]
scheme = "bitsep"
profile = { kind = "periodic", pattern = [0.2, 0.4] }
k = 500
rho = 0.25
c = 2.0
trials = 300
message = "alternating"

[[experiment]]
scheme = "ftlr"
profile = { kind = "homogeneous", epsilon = 0.3 }
k = 100
c = 0.2
trials = 500

[[experiment]]
scheme = "gsi"
profile = { kind = "homogeneous", epsilon = 0.5 }
k = 60
alpha = 0.5
trials = 200

[[lpp]]
epsilon = 0.5
k = [30, 60]
alpha = 0.5
trials = 100
"#;

fn simulate_with(threads: &str, config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tandem-iv"))
        .args(["simulate", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("TANDEM_IV_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!(
            "simulate failed: {}",
            String::from_utf8_lossy(&status.stderr)
        ))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("grid.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    let runs = [("1", "a"), ("4", "b"), ("1", "c")];
    for (threads, name) in runs {
        simulate_with(threads, &config, &dir.path().join(name))?;
    }
    let files = [
        "results.csv",
        "summary.txt",
        "lpp_trials.csv",
        "lpp_summary.csv",
    ];
    let mut bytes = 0;
    for f in files {
        let a = std::fs::read(dir.path().join("a").join(f)).map_err(|e| format!("{f}: {e}"))?;
        for (_, name) in &runs[1..] {
            let b =
                std::fs::read(dir.path().join(name).join(f)).map_err(|e| format!("{f}: {e}"))?;
            if a != b {
                return Err(format!("{f} differs between runs a and {name}"));
            }
        }
        bytes += a.len();
    }
    Ok(format!(
        "{} files ({bytes} bytes) identical across 1, 4 and 1 threads",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 dual-DP converse identity", dual_dp_identity),
        (
            "2 LPP/queue equivalence and GSI recursion",
            lpp_queue_equivalence,
        ),
        ("3 FTLR exact law", ftlr_exact_law),
        ("4 bit-separation bound dominance", bitsep_dominance),
        ("5 sufficient-condition soundness", soundness),
        ("6 martingale increments", martingale_checks),
        ("7 success/escape bound identity", hom_identity_grid),
        ("8 heterogeneous velocity", heterogeneous_velocity),
        ("9 converse threshold diagnostics", converse_thresholds),
        ("10 GSI linear-regime delay", gsi_linear_regime),
        ("11 thread-count determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
