//! Monte Carlo checks against independently computed laws. Every tolerance is
//! three standard errors unless stated otherwise.

use tandem_core::bounds::{escape_bound_het, escape_bound_hom, success_bound_hom};
use tandem_core::converse::{fano_error_floor, geometric_sum_cdf, slots_for_velocity};
use tandem_core::model::{generate_states, geometric_gap};
use tandem_core::simnet::{
    message_bits, run_bit_separation_blocks, run_ftlr_single_bit, run_gsi_control, GsiOptions,
    MessageKind, RecordOptions,
};
use tandem_core::wavefront::{simulate_fronts_coupled, stream_events};
use tandem_core::{ErasureProfile, RandomnessSpec, Regime, Schedule};

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn within_binomial(hits: u64, n: u64, p: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (hits as f64 / n as f64 - p).abs() <= 3.0 * se + 1e-12
}

#[test]
fn clear_rate_matches_marginal() {
    let p = ErasureProfile::homogeneous(1, 0.5).unwrap();
    let st = generate_states(&p, 1_000_000, &RandomnessSpec::new(1, 0)).unwrap();
    let clear = st.row(0).iter().filter(|&&c| c).count() as u64;
    assert!(within_binomial(clear, 1_000_000, 0.5), "{clear}");

    let p = ErasureProfile::periodic(4, &[0.2, 0.4, 0.0, 0.9]).unwrap();
    let st = generate_states(&p, 200_000, &RandomnessSpec::new(2, 3)).unwrap();
    for hop in 0..5 {
        let clear = st.row(hop).iter().filter(|&&c| c).count() as u64;
        assert!(
            within_binomial(clear, 200_000, 1.0 - p.eps_at(hop)),
            "hop {hop}"
        );
    }
}

#[test]
fn distinct_cells_are_uncorrelated() {
    let p = ErasureProfile::periodic(3, &[0.3, 0.6]).unwrap();
    let cells = [(0usize, 1u64), (0, 2), (1, 1), (2, 7), (1, 2)];
    let trials = 100_000;
    let mut samples = vec![Vec::with_capacity(trials); cells.len()];
    for t in 0..trials as u64 {
        let st = generate_states(&p, 10, &RandomnessSpec::new(99, t)).unwrap();
        for (c, &(hop, slot)) in cells.iter().enumerate() {
            samples[c].push(st.is_clear(hop, slot) as u8 as f64);
        }
    }
    let se = 1.0 / (trials as f64).sqrt();
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            let (ma, va) = mean_var(&samples[a]);
            let (mb, vb) = mean_var(&samples[b]);
            let cov = samples[a]
                .iter()
                .zip(&samples[b])
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / (trials as f64 - 1.0);
            let corr = cov / (va * vb).sqrt();
            assert!(
                corr.abs() <= 3.0 * se,
                "{:?} {:?}: {corr}",
                cells[a],
                cells[b]
            );
        }
    }
}

#[test]
fn trial_streams_differ() {
    let p = ErasureProfile::homogeneous(2, 0.5).unwrap();
    let a = generate_states(&p, 256, &RandomnessSpec::new(5, 0)).unwrap();
    let b = generate_states(&p, 256, &RandomnessSpec::new(5, 1)).unwrap();
    let c = generate_states(&p, 256, &RandomnessSpec::new(6, 0)).unwrap();
    assert_ne!(a.row(0), b.row(0));
    assert_ne!(a.row(0), c.row(0));
}

#[test]
fn geometric_gap_moments_and_pmf() {
    let mut rng = RandomnessSpec::new(17, 0).rng();
    assert!((0..1000).all(|_| geometric_gap(&mut rng, 1.0).unwrap() == 1));
    assert!(geometric_gap(&mut rng, 0.0).is_err());
    assert!(geometric_gap(&mut rng, -0.5).is_err());

    let n = 1_000_000;
    let draws: Vec<u64> = (0..n)
        .map(|_| geometric_gap(&mut rng, 0.5).unwrap())
        .collect();
    assert!(draws.iter().all(|&g| g >= 1));
    let mean = draws.iter().sum::<u64>() as f64 / n as f64;
    // Var = (1 - p) / p^2 = 2
    assert!(
        (mean - 2.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(),
        "{mean}"
    );
    let threes = draws.iter().filter(|&&g| g == 3).count() as u64;
    assert!(within_binomial(threes, n as u64, 0.125), "{threes}");
}

#[test]
fn front_increments_are_binomial() {
    let eps = 0.3;
    let p = ErasureProfile::homogeneous(40, eps).unwrap();
    let s = Schedule::new(&p, 1, 1.0, 0.25).unwrap();
    let t = 50u64;
    assert!(s.tau(0) >= t);
    let trials = 100_000;
    let xs: Vec<f64> = (0..trials)
        .map(|tr| {
            let st = generate_states(&p, s.horizon(), &RandomnessSpec::new(8, tr)).unwrap();
            simulate_fronts_coupled(&p, &s, &st).unwrap()[0].at(t) as f64
        })
        .collect();
    let (mean, var) = mean_var(&xs);
    let (mu, sigma2) = (t as f64 * (1.0 - eps), t as f64 * eps * (1.0 - eps));
    let n = trials as f64;
    assert!(
        (mean - mu).abs() <= 3.0 * (sigma2 / n).sqrt(),
        "mean {mean}"
    );
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var_se = ((m4 - var * var) / n).sqrt();
    assert!((var - sigma2).abs() <= 3.0 * var_se, "var {var}");
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<u64>, mut b: Vec<u64>) -> f64 {
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn arrival_time_is_a_sum_of_geometric_gaps() {
    let p = ErasureProfile::homogeneous(20, 0.5).unwrap();
    let trials = 10_000;
    let mut arrivals = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let st = generate_states(&p, 10_000, &RandomnessSpec::new(3, t)).unwrap();
        let out = run_ftlr_single_bit(&p, 1, 1, &st).unwrap();
        let arrival = out.arrival_time.unwrap();
        // the front's hitting time, read off the same states
        let mut slot = 0;
        for hop in 0..20 {
            slot = st.next_clear_after(hop, slot);
        }
        assert_eq!(arrival, slot);
        arrivals.push(arrival);
    }
    let mut rng = RandomnessSpec::new(4, 0).rng();
    let sums: Vec<u64> = (0..trials)
        .map(|_| (0..20).map(|_| geometric_gap(&mut rng, 0.5).unwrap()).sum())
        .collect();
    let d = ks_statistic(arrivals, sums);
    let critical = 1.628 * (2.0 / trials as f64).sqrt();
    assert!(d < critical, "KS {d} vs {critical}");
}

#[test]
fn ftlr_arrival_cdf_matches_convolution() {
    let p = ErasureProfile::homogeneous(100, 0.2).unwrap();
    let trials = 5_000u64;
    let arrivals: Vec<u64> = (0..trials)
        .map(|t| {
            let st = generate_states(&p, 100_000, &RandomnessSpec::new(12, t)).unwrap();
            run_ftlr_single_bit(&p, 1, 1, &st)
                .unwrap()
                .arrival_time
                .unwrap()
        })
        .collect();
    for q in [118u64, 125, 133] {
        let exact = geometric_sum_cdf(&p, 100, q + 1).unwrap();
        let hits = arrivals.iter().filter(|&&a| a <= q).count() as u64;
        assert!(
            within_binomial(hits, trials, exact),
            "q {q}: {hits} vs {exact}"
        );
    }
}

#[test]
fn single_customer_gsi_equals_ftlr_arrival() {
    let p = ErasureProfile::homogeneous(30, 0.4).unwrap();
    for t in 0..500 {
        let st = generate_states(&p, 100_000, &RandomnessSpec::new(13, t)).unwrap();
        let f = run_ftlr_single_bit(&p, 1, 1, &st).unwrap();
        let g = run_gsi_control(&p, &[1], &st, GsiOptions::default()).unwrap();
        assert_eq!(g.completion_time, f.arrival_time);
    }
}

#[test]
fn escape_frequencies_respect_their_bounds() {
    let trials = 1_500u64;
    let cases = [
        (ErasureProfile::homogeneous(10_000, 0.5).unwrap(), 1.0),
        (ErasureProfile::periodic(10_000, &[0.2, 0.4]).unwrap(), 2.0),
    ];
    for (p, c) in cases {
        let s = Schedule::new(&p, 2, c, 0.25).unwrap();
        let bound = match s.regime() {
            Regime::Homogeneous => escape_bound_hom(p.hops(), p.eps_at(0), c, 0.25).unwrap(),
            Regime::Heterogeneous => escape_bound_het(&p, &s, 0).unwrap(),
        };
        assert!(!bound.vacuous(), "{bound:?}");
        let mut escapes = [0u64; 2];
        for t in 0..trials {
            let st = generate_states(&p, s.horizon(), &RandomnessSpec::new(21, t)).unwrap();
            let ev = stream_events(&p, &s, &st).unwrap();
            for (j, &e) in ev.escape.iter().enumerate() {
                escapes[j] += e as u64;
            }
        }
        for hits in escapes {
            let rate = hits as f64 / trials as f64;
            let se = (rate * (1.0 - rate) / trials as f64).sqrt();
            assert!(
                rate <= bound.value() + 3.0 * se,
                "{rate} vs {}",
                bound.value()
            );
        }
    }
}

#[test]
fn bit_separation_beats_its_bound_at_moderate_k() {
    let (k, m, eps) = (10_000, 2, 0.5);
    let p = ErasureProfile::homogeneous(k, eps).unwrap();
    let s = Schedule::new(&p, m, 1.0, 0.25).unwrap();
    let bound = success_bound_hom(k, m, eps, 1.0, 0.25).unwrap();
    assert!(!bound.vacuous);
    let trials = 500u64;
    let mut ok = 0;
    for t in 0..trials {
        let spec = RandomnessSpec::new(31, t);
        let st = generate_states(&p, s.horizon(), &spec).unwrap();
        let bits = message_bits(MessageKind::Alternating, m, &mut spec.rng());
        let r = run_bit_separation_blocks(&p, &bits, &s, &st, RecordOptions::default()).unwrap();
        if r.success_event_held() {
            assert!(r.all_correct());
        }
        ok += r.all_correct() as u64;
    }
    let rate = ok as f64 / trials as f64;
    let se = (rate * (1.0 - rate) / trials as f64).sqrt();
    assert!(
        rate >= bound.success_lower_bound - 3.0 * se,
        "{rate} vs {}",
        bound.success_lower_bound
    );
}

#[test]
fn soundness_and_front_equality_on_random_trials() {
    use tandem_core::wavefront::{compare_fronts, extract_fronts_from_network};
    let mut rng = RandomnessSpec::new(41, 0).rng();
    let mut held = 0;
    for t in 0..10_000u64 {
        use rand::Rng;
        let k = rng.random_range(5..60);
        let p = if rng.random::<bool>() {
            ErasureProfile::homogeneous(k, rng.random_range(0.0..0.7)).unwrap()
        } else {
            ErasureProfile::periodic(k, &[rng.random_range(0.0..0.5), rng.random_range(0.0..0.8)])
                .unwrap()
        };
        let m = rng.random_range(1..5);
        let s = Schedule::new(&p, m, rng.random_range(0.5..2.0), 0.25).unwrap();
        let spec = RandomnessSpec::new(42, t);
        let st = generate_states(&p, s.horizon(), &spec).unwrap();
        let bits = message_bits(MessageKind::Uniform, m, &mut spec.rng());
        let r =
            run_bit_separation_blocks(&p, &bits, &s, &st, RecordOptions { fronts: true }).unwrap();
        if r.success_event_held() {
            held += 1;
            assert!(r.all_correct(), "trial {t}");
            let net = extract_fronts_from_network(&r, &s).unwrap();
            let cpl = simulate_fronts_coupled(&p, &s, &st).unwrap();
            assert_eq!(compare_fronts(&net, &cpl, k), None, "trial {t}");
        }
    }
    assert!(held > 1000);
}

#[test]
fn no_scheme_beats_the_fano_floor() {
    let eps = 0.5;
    let trials = 2_000u64;
    for (i, alpha) in [(50usize, 0.6), (100, 0.625), (100, 0.7)] {
        let p = ErasureProfile::homogeneous(i, eps).unwrap();
        assert!(alpha > 1.0 / p.zeta());
        let slot = i as u64 + slots_for_velocity(alpha, i) - 1;
        let floor = fano_error_floor(&p, i, slot).unwrap();
        let mut errors = 0;
        for t in 0..trials {
            let spec = RandomnessSpec::new(51, t);
            let st = generate_states(&p, slot, &spec).unwrap();
            let bit = message_bits(MessageKind::Uniform, 1, &mut spec.rng())[0];
            errors += !run_ftlr_single_bit(&p, bit, slot, &st).unwrap().correct as u64;
        }
        let rate = errors as f64 / trials as f64;
        let se = (rate * (1.0 - rate) / trials as f64).sqrt();
        assert!(
            rate >= floor - 3.0 * se,
            "i {i} alpha {alpha}: {rate} vs {floor}"
        );
    }
}
