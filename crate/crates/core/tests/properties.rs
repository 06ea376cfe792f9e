use nalgebra::Vector5;
use proptest::prelude::*;

use recency_core::assay::{RitaCharacteristics, TestRecentFunction};
use recency_core::estimators::{
    confidence_interval, estimate, lambda_of, log_lambda_gradient, pt_recency_indicator, CrossSectionRecord,
    Method, PriorTriple, Sample,
};
use recency_core::io::{read_sample_csv, write_sample_csv};
use recency_core::rng::{substream, Purpose};
use recency_core::simulate::{
    apply_recall_bias, draw_infection_duration, simulate_cross_section, solve_ct, EpidemicParams,
    GeneralizedGamma, PriorTestingSpec, RecallBiasSpec, TrueAssay,
};

fn epidemic() -> impl Strategy<Value = EpidemicParams> {
    (0.005f64..0.1, 0.05f64..0.6, prop_oneof![Just(0.0), 0.0f64..0.02], 0.5f64..3.0).prop_map(
        |(lambda, prevalence, rho, cutoff)| EpidemicParams {
            lambda,
            prevalence,
            rho,
            cutoff,
            t_cs: 0.0,
        },
    )
}

fn truth() -> impl Strategy<Value = TestRecentFunction> {
    (60.0f64..300.0, 0.0f64..0.05, -5.0f64..-1.5).prop_map(|(mdri_days, frr, log_slope)| {
        TrueAssay { mdri_days, frr, log_slope, cutoff: 2.0 }.phi().unwrap()
    })
}

fn prior() -> impl Strategy<Value = PriorTriple> {
    prop_oneof![
        Just(PriorTriple::NONE),
        (0.0f64..6.0, any::<bool>()).prop_map(|(t, d)| PriorTriple::tested(t, d)),
        any::<bool>().prop_map(|d| PriorTriple::tested(2.0, d)),
    ]
}

fn records(with_priors: bool) -> impl Strategy<Value = Vec<CrossSectionRecord>> {
    let pos = (any::<bool>(), prior()).prop_map(move |(r, p)| {
        CrossSectionRecord::positive(r, if with_priors { p } else { PriorTriple::NONE })
    });
    (prop::collection::vec(pos, 1..60), 1usize..300).prop_map(|(mut v, n_neg)| {
        v.extend(std::iter::repeat_n(CrossSectionRecord::negative(), n_neg));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn durations_stay_in_support_and_decrease(params in epidemic(), e1 in 1e-6f64..0.999999, e2 in 1e-6f64..0.999999) {
        let c_t = solve_ct(&params).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let u_lo = draw_infection_duration(&params, lo).unwrap();
        let u_hi = draw_infection_duration(&params, hi).unwrap();
        prop_assert!(u_hi >= 0.0 && u_lo <= c_t * (1.0 + 1e-12));
        prop_assert!(u_lo >= u_hi);
        // the sampler inverts the target CDF
        prop_assert!((params.duration_cdf(u_lo) - (1.0 - lo)).abs() < 1e-9);
    }

    #[test]
    fn sampler_is_continuous_at_threshold(params in epidemic()) {
        let es = params.e_star();
        prop_assume!(es > 1e-6 && es < 1.0 - 1e-6);
        let a = draw_infection_duration(&params, es - 1e-9).unwrap();
        let b = draw_infection_duration(&params, es + 1e-9).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn indicator_matches_definition(r: bool, p in prior(), cutoff in 0.5f64..4.0) {
        let got = pt_recency_indicator(r, p.has_prior, p.time, p.result, cutoff).unwrap();
        let (a, b, d) = match (p.time, p.result) {
            (Some(t), Some(d)) => (t <= cutoff, t >= cutoff, d),
            _ => (false, false, false),
        };
        let expected = (r && !(b && d)) || (!r && a && !d);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn prior_results_follow_infection_time(u in 0.0f64..15.0, seed: u64, q in 0.0f64..1.0, which in 0usize..3) {
        let spec = match which {
            0 => PriorTestingSpec::Uniform { q, a: 0.0, b: 6.0 },
            1 => PriorTestingSpec::InfectionDriven { delay: GeneralizedGamma::default() },
            _ => PriorTestingSpec::Mixed { q_prime: q, a_prime: 0.0, b_prime: 4.0, delay: GeneralizedGamma::default() },
        };
        let mut rng = substream(seed, 0, Purpose::Oracle, 0);
        for _ in 0..20 {
            let p = spec.draw(u, &mut rng);
            if let (Some(t), Some(d)) = (p.time, p.result) {
                prop_assert!(t >= 0.0);
                prop_assert_eq!(d, t <= u);
            } else {
                prop_assert!(!p.has_prior);
            }
        }
    }

    #[test]
    fn recall_bias_only_touches_positive_results(p in prior(), seed: u64, g in 0.0f64..1.0, nr in 0.0f64..1.0, fl in 0.0f64..1.0) {
        let spec = RecallBiasSpec { time_jitter_sd: g, nonreport_positive_prob: nr, flip_positive_prob: fl };
        let mut rng = substream(seed, 0, Purpose::Oracle, 0);
        let out = apply_recall_bias(p, &spec, &mut rng);
        match p.result {
            None => prop_assert_eq!(out, p),
            Some(false) => {
                prop_assert_eq!(out.result, Some(false));
                prop_assert!(out.time.unwrap() >= 0.0);
            }
            Some(true) => prop_assert!(out == PriorTriple::NONE || out.time.unwrap() >= 0.0),
        }
    }

    #[test]
    fn enhanced_equals_standard_without_priors(recs in records(false), f in truth(), s2o in 0.0f64..1e-4, s2b in 0.0f64..1e-5) {
        let chars = RitaCharacteristics::new(f.mdri(), s2o, f.frr_tail(), s2b, 2.0).unwrap();
        let sample = Sample::new(recs).unwrap();
        let s = estimate(&sample, &f, &chars, Method::Standard, 0.95);
        let e = estimate(&sample, &f, &chars, Method::Enhanced, 0.95);
        match (s, e) {
            (Ok(s), Ok(e)) => prop_assert!((s.lambda - e.lambda).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            (s, e) => prop_assert!(false, "{:?} vs {:?}", s, e),
        }
    }

    #[test]
    fn only_recent_filter_removes_old_tests(recs in records(true)) {
        let sample = Sample::new(recs).unwrap();
        let filtered = sample.only_recent_priors(2.0);
        prop_assert!(filtered.records().iter().all(|r| r.prior_time.is_none_or(|t| t <= 2.0)));
        prop_assert_eq!(filtered.counts(2.0).n_rec, sample.counts(2.0).n_rec);
    }

    #[test]
    fn sample_csv_round_trip(recs in records(true)) {
        let sample = Sample::new(recs).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &sample).unwrap();
        let back = read_sample_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records(), sample.records());
    }

    #[test]
    fn mdri_plus_residual_is_cutoff(f in truth(), t in 0.01f64..2.0) {
        prop_assert!((f.residual_integral(2.0).unwrap() + f.mdri() - 2.0).abs() < 1e-10);
        let r = f.residual_integral(t).unwrap();
        prop_assert!(r >= -1e-12 && r <= t + 1e-12);
    }

    #[test]
    fn log_gradient_matches_differences(n in 2000usize..20000, a in 0.02f64..0.2, frac in 0.1f64..0.5, w3 in 0.1f64..0.5, b in 0.0f64..0.5, c in 0.0f64..0.05) {
        let w2 = n as f64 * frac;
        let w = Vector5::new(w2 * a, w2, w3, w2 * b, w2 * c);
        let g = log_lambda_gradient(&w, n).unwrap();
        for i in 0..5 {
            let h = 1e-5 * w[i].abs().max(1e-3);
            let (mut up, mut dn) = (w, w);
            up[i] += h;
            dn[i] -= h;
            let fd = (lambda_of(&up, n).ln() - lambda_of(&dn, n).ln()) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-6 * g[i].abs().max(fd.abs()).max(1e-12));
        }
    }

    #[test]
    fn intervals_contain_estimate(lambda in -0.05f64..0.2, var in 0.0f64..1e-3, level in 0.5f64..0.999) {
        let (lo, hi, wald) = confidence_interval(lambda, var, level).unwrap();
        prop_assert!(lo <= lambda && lambda <= hi);
        prop_assert_eq!(wald, lambda <= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_is_reproducible(seed: u64, q in 0.0f64..1.0) {
        let f = TrueAssay::default().phi().unwrap();
        let params = EpidemicParams::constant(0.032, 0.29, 2.0);
        let spec = PriorTestingSpec::Uniform { q, a: 0.0, b: 4.0 };
        let a = simulate_cross_section(500, &params, &f, &spec, None, seed).unwrap();
        let b = simulate_cross_section(500, &params, &f, &spec, None, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
