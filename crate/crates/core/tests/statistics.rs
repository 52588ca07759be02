mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use cvdiscord_core::marginals::*;
use cvdiscord_core::numeric::derive_seed;
use cvdiscord_core::sampler::*;
use cvdiscord_core::states::*;
use cvdiscord_core::verifier::*;
use nalgebra::Matrix4;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const GOF_BINS: usize = 50;
const GOF_ALPHA: f64 = 1e-3;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Pearson goodness of fit of the records against `density` on a 50×50
/// grid plus one cell for everything outside it. Cells are merged in
/// raster order until each group expects at least 5 counts.
fn gof_2d<F: Fn(f64, f64) -> f64 + Sync>(rs: &RecordSet, density: F) -> f64 {
    let (xa, xb) = (rs.x_a(), rs.x_b());
    let n = xa.len() as f64;
    let (ma, sa) = mean_sd(&xa);
    let (mb, sb) = mean_sd(&xb);
    let (a0, wa) = (ma - 5.0 * sa, 10.0 * sa / GOF_BINS as f64);
    let (b0, wb) = (mb - 5.0 * sb, 10.0 * sb / GOF_BINS as f64);

    let mut observed = vec![0u64; GOF_BINS * GOF_BINS];
    let mut outside = 0u64;
    for (&a, &b) in xa.iter().zip(&xb) {
        let (i, j) = (((a - a0) / wa).floor(), ((b - b0) / wb).floor());
        if (0.0..GOF_BINS as f64).contains(&i) && (0.0..GOF_BINS as f64).contains(&j) {
            observed[i as usize * GOF_BINS + j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let expected: Vec<f64> = (0..GOF_BINS * GOF_BINS)
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k / GOF_BINS) as f64, (k % GOF_BINS) as f64);
            let xr = (a0 + i * wa, a0 + (i + 1.0) * wa);
            let yr = (b0 + j * wb, b0 + (j + 1.0) * wb);
            n * common::cell_integral(&density, xr, yr)
        })
        .collect();
    let out_expected = (n - expected.iter().sum::<f64>()).max(0.0);

    let cells = observed
        .iter()
        .map(|&o| o as f64)
        .zip(expected.iter().copied())
        .chain(std::iter::once((outside as f64, out_expected)));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in cells {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            groups.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if let Some(last) = groups.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let stat: f64 = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (groups.len() - 1) as f64;
    ChiSquared::new(dof).unwrap().sf(stat)
}

fn scheme_gof(scheme: ModulationScheme, seed: u64) -> f64 {
    let cfg = SimulationConfig::new(scheme, 1_000_000, seed);
    let rs = sample_scheme(&cfg).unwrap();
    let pm = scheme.p_mixture(cfg.eta, cfg.v0).unwrap().unwrap();
    assert_eq!(cfg.theta_a, cfg.theta_b);
    let d1 = input_marginal_at(pm.components(), pm.v0(), cfg.theta_a).unwrap();
    gof_2d(&rs, |a, b| output_joint_with(&d1, &pm, a, b))
}

#[test]
fn gaussian_state_samples_fit_their_density() {
    let mut rng = common::rng(11);
    for i in 0..3 {
        let st = common::random_state(&mut rng, 1.0, 0.8, true);
        let (ta, tb) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let form = joint_marginal_form(&st, ta, tb).unwrap();
        let rs = sample_gaussian(&st, ta, tb, 1_000_000, 100 + i).unwrap();
        let p = gof_2d(&rs, |a, b| form.density(a, b));
        assert!(p > GOF_ALPHA, "state {i}: p = {p}");
    }
}

#[test]
fn gaussian_scheme_fits_thermal_mixture() {
    let p = scheme_gof(ModulationScheme::gaussian(3.0), 1);
    assert!(p > GOF_ALPHA, "p = {p}");
}

#[test]
fn switched_noise_fits_its_mixture() {
    let p = scheme_gof(ModulationScheme::switched_noise(4.5), 2);
    assert!(p > GOF_ALPHA, "p = {p}");
}

#[test]
fn switched_phase_fits_its_mixture() {
    let p = scheme_gof(ModulationScheme::switched_phase_for(FRAC_1_SQRT_2), 3);
    assert!(p > GOF_ALPHA, "p = {p}");
}

#[test]
fn async_sine_fits_arcsine_mixture() {
    let p = scheme_gof(ModulationScheme::async_sine(4.5), 4);
    assert!(p > GOF_ALPHA, "p = {p}");
}

#[test]
fn full_duty_switched_noise_matches_gaussian() {
    let full = ModulationScheme::SwitchedNoise {
        depth_x: 2.5,
        depth_p: 2.5,
        duty: 1.0,
    };
    let g = ModulationScheme::gaussian(2.5);
    let pf = full.p_mixture(FRAC_1_SQRT_2, 1.0).unwrap().unwrap();
    let pg = g.p_mixture(FRAC_1_SQRT_2, 1.0).unwrap().unwrap();
    for &(a, b) in &[(0.0, 0.0), (1.3, -0.4), (-2.0, 3.1)] {
        let (x, y) = (output_joint_density(&pf, a, b), output_joint_density(&pg, a, b));
        assert!((x - y).abs() < 1e-15, "{x} vs {y}");
    }
    let rf = sample_scheme(&SimulationConfig::new(full, 200_000, 5)).unwrap();
    let rg = sample_scheme(&SimulationConfig::new(g, 200_000, 6)).unwrap();
    for (u, v) in [(rf.x_a(), rg.x_a()), (rf.x_b(), rg.x_b())] {
        let mut pooled = u.clone();
        pooled.extend_from_slice(&v);
        let edges = bin_edges(&pooled, &Binning::FreedmanDiaconis).unwrap();
        let r = chi_square_two_sample(
            &Histogram::from_edges(edges.clone(), &u).unwrap(),
            &Histogram::from_edges(edges, &v).unwrap(),
        )
        .unwrap();
        assert!(r.p_value > GOF_ALPHA, "p = {}", r.p_value);
    }
}

#[test]
fn switched_phase_splits_by_duty() {
    let scheme = ModulationScheme::switched_phase_for(FRAC_1_SQRT_2);
    let cfg = SimulationConfig::new(scheme, 1_000_000, 7);
    let rs = sample_scheme(&cfg).unwrap();
    let (plus, minus) = split_by_threshold(&rs, scheme.default_threshold()).unwrap();
    let n = rs.len() as f64;
    // Peaks at 0 and −12 with unit width: the threshold at −6 misassigns
    // a negligible fraction.
    let p = 0.5;
    let tol = 5.0 * (p * (1.0 - p) / n).sqrt();
    assert!((plus.len() as f64 / n - p).abs() < tol);
    assert_eq!(plus.len() + minus.len(), rs.len());
    let (m_minus, _) = mean_sd(&minus.x_a());
    assert!((m_minus + 12.0).abs() < 0.01, "{m_minus}");
}

#[test]
fn async_station_a_matches_arcsine_convolution_per_bin() {
    let depth = 4.5;
    let cfg = SimulationConfig::new(ModulationScheme::async_sine(depth), 1_000_000, 8);
    let rs = sample_scheme(&cfg).unwrap();
    let amp = cfg.eta * depth;
    let comps = [PComponent::Arcsine {
        weight: 1.0,
        amplitude: amp / 2.0,
    }];
    let marginal = input_marginal_d1(&comps, 1.0).unwrap();
    let h = estimate_density(&rs.x_a(), &Binning::Count { bins: 60 }).unwrap();
    let n = rs.len() as f64;
    for (e, &c) in h.edges().windows(2).zip(h.counts()) {
        let expected = n * common::trapezoid(|x| marginal.density(x), e[0], e[1], 16);
        if expected < 20.0 {
            continue;
        }
        let z = (c as f64 - expected) / expected.sqrt();
        assert!(z.abs() < 5.0, "bin [{}, {}): {c} vs {expected}", e[0], e[1]);
    }
}

#[test]
fn chi_square_p_values_are_uniform_under_null() {
    let p: Vec<f64> = (0..500u64)
        .into_par_iter()
        .map(|trial| {
            let draw = |seed: u64| -> Vec<f64> {
                let mut rng = cvdiscord_core::numeric::stream_rng(seed, trial);
                (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            };
            let (u, v) = (draw(1), draw(2));
            let mut pooled = u.clone();
            pooled.extend_from_slice(&v);
            let edges = bin_edges(&pooled, &Binning::FreedmanDiaconis).unwrap();
            chi_square_two_sample(
                &Histogram::from_edges(edges.clone(), &u).unwrap(),
                &Histogram::from_edges(edges, &v).unwrap(),
            )
            .unwrap()
            .p_value
        })
        .collect();
    let (d, ks_p) = ks_uniform(&p);
    assert!(ks_p > 0.01, "KS D = {d}, p = {ks_p}");
}

fn strongly_correlated<R: Rng>(rng: &mut R) -> GaussianBipartiteState {
    loop {
        let st = common::random_state(rng, 1.0, 0.8, false);
        if st.cov().block_c().amax() >= 0.5 {
            return st;
        }
    }
}

#[test]
fn product_states_rarely_flagged() {
    let mut rng = common::rng(21);
    let states: Vec<_> = (0..100).map(|_| common::random_product(&mut rng, 1.0, 0.8)).collect();
    let flagged = states
        .par_iter()
        .enumerate()
        .filter(|(i, st)| {
            let rs = sample_gaussian_pairs(st, 100_000, derive_seed(300, *i as u64)).unwrap();
            let opts = VerifyOptions {
                seed: *i as u64,
                ..Default::default()
            };
            verdict_gaussian(&rs, 0.0, &opts).unwrap().decision == Decision::Discordant
        })
        .count();
    assert!(flagged <= 5, "{flagged}/100 product states flagged");
}

#[test]
fn correlated_states_detected() {
    let mut rng = common::rng(22);
    let states: Vec<_> = (0..30).map(|_| strongly_correlated(&mut rng)).collect();
    let detected = states
        .iter()
        .enumerate()
        .filter(|(i, st)| {
            let rs = sample_gaussian_pairs(st, 1_000_000, derive_seed(400, *i as u64)).unwrap();
            let v = verdict_gaussian(&rs, 0.0, &VerifyOptions::default()).unwrap();
            v.decision == Decision::Discordant
        })
        .count();
    assert!(detected * 100 >= 95 * states.len(), "{detected}/{} detected", states.len());
}

#[test]
fn peak_error_shrinks_with_sample_size() {
    let st = phase_modulated_state(3.0, FRAC_1_SQRT_2, 1.0).unwrap();
    let form = joint_marginal_form(&st, FRAC_PI_2, FRAC_PI_2).unwrap();
    let truth = ConditionalMarginal::new(form, 0.0).peak(Side::Plus).unwrap();
    let median_err = |n: usize| {
        let mut errs: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|s| {
                let rs = sample_gaussian(&st, FRAC_PI_2, FRAC_PI_2, n, derive_seed(500 + n as u64, s)).unwrap();
                let opts = VerifyOptions {
                    replicates: 2,
                    ..Default::default()
                };
                let sep = separation_statistic(&rs, 0.0, FRAC_PI_2, FRAC_PI_2, &opts).unwrap();
                (sep.plus.location - truth).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[9] + errs[10])
    };
    let e: Vec<f64> = [10_000, 100_000, 1_000_000].into_iter().map(median_err).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn product_state_has_no_separation() {
    let mut rng = common::rng(31);
    let st = common::random_product(&mut rng, 1.0, 0.5);
    let rs = sample_gaussian(&st, 0.0, 0.0, 1_000_000, 31).unwrap();
    let sep = separation_statistic(&rs, 0.0, 0.0, 0.0, &VerifyOptions::default()).unwrap();
    assert!(sep.significance() < 4.0, "{sep:?}");
}

#[test]
fn modulated_separation_matches_analytic() {
    let st = phase_modulated_state(4.5, FRAC_1_SQRT_2, 1.0).unwrap();
    let form = joint_marginal_form(&st, FRAC_PI_2, FRAC_PI_2).unwrap();
    let analytic = analytic_peak_separation(&form).unwrap();
    let rs = sample_gaussian(&st, FRAC_PI_2, FRAC_PI_2, 1_000_000, 41).unwrap();
    let sep = separation_statistic(&rs, 0.0, FRAC_PI_2, FRAC_PI_2, &VerifyOptions::default()).unwrap();
    assert!(
        (sep.delta - analytic).abs() < 4.0 * sep.sigma_delta,
        "{} ± {} vs {analytic}",
        sep.delta,
        sep.sigma_delta
    );

    // Swapping the stations swaps λ and μ.
    let swapped = MarginalForm::new(form.mu, form.lambda, form.nu, FRAC_PI_2, FRAC_PI_2).unwrap();
    let analytic_sw = analytic_peak_separation(&swapped).unwrap();
    let sep_sw = separation_statistic(&rs.swapped(), 0.0, FRAC_PI_2, FRAC_PI_2, &VerifyOptions::default()).unwrap();
    assert!(
        (sep_sw.delta - analytic_sw).abs() < 4.0 * sep_sw.sigma_delta,
        "{} ± {} vs {analytic_sw}",
        sep_sw.delta,
        sep_sw.sigma_delta
    );
}

#[test]
fn known_mean_peak_recovered() {
    let mut rng = common::rng(51);
    let v: Vec<f64> = (0..100_000).map(|_| 1.7 + rng.sample::<f64, _>(StandardNormal)).collect();
    let h = estimate_density(&v, &Binning::FreedmanDiaconis).unwrap();
    let pk = estimate_peak(&h, PeakMethod::LogPolyFit, 200, 1).unwrap();
    assert!(pk.std_error > 0.0);
    assert!((pk.location - 1.7).abs() < 4.0 * pk.std_error, "{pk:?}");
    assert!(!pk.boundary);
}

#[test]
fn bootstrap_error_tracks_repeat_spread() {
    let st = phase_modulated_state(2.0, FRAC_1_SQRT_2, 1.0).unwrap();
    let runs: Vec<Separation> = (0..40u64)
        .into_par_iter()
        .map(|s| {
            let rs = sample_gaussian(&st, FRAC_PI_2, FRAC_PI_2, 100_000, derive_seed(600, s)).unwrap();
            let opts = VerifyOptions {
                seed: s,
                ..Default::default()
            };
            separation_statistic(&rs, 0.0, FRAC_PI_2, FRAC_PI_2, &opts).unwrap()
        })
        .collect();
    let deltas: Vec<f64> = runs.iter().map(|r| r.delta).collect();
    let (_, spread) = mean_sd(&deltas);
    let mean_sigma = runs.iter().map(|r| r.sigma_delta).sum::<f64>() / runs.len() as f64;
    let ratio = mean_sigma / spread;
    assert!((0.5..2.0).contains(&ratio), "bootstrap {mean_sigma} vs spread {spread}");
}

#[test]
fn reference_state_verdict() {
    let st = common::reference_state();
    let rs = sample_gaussian_pairs(&st, 1_000_000, 61).unwrap();
    let v = verdict_gaussian(&rs, 0.0, &VerifyOptions::default()).unwrap();
    assert_eq!(v.decision, Decision::Discordant);
    assert!(v.pair(0.0, 0.0).unwrap().k >= 3.0);
    assert!(v.pair(FRAC_PI_2, FRAC_PI_2).unwrap().k >= 3.0);
    let json: serde_json::Value = serde_json::from_str(&v.to_json().unwrap()).unwrap();
    for key in ["theta_A", "theta_B", "delta", "sigma_delta", "k", "chi2_p"] {
        assert!(json["per_pair"][0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn cross_correlation_only_detected_at_cross_pair() {
    let m = Matrix4::new(
        3.0, 0.0, 0.0, 1.5, //
        0.0, 3.0, 0.0, 0.0, //
        0.0, 0.0, 3.0, 0.0, //
        1.5, 0.0, 0.0, 3.0,
    );
    let st = GaussianBipartiteState::zero_mean(CovarianceMatrix::new(m, 1.0).unwrap());
    let t = nu_table(&st).unwrap();
    assert!(t.nu_0_90.abs() > 0.01);
    assert!(t.nu_00.abs() < 1e-15 && t.nu_90_0.abs() < 1e-15 && t.nu_90_90.abs() < 1e-15);
    let rs = sample_gaussian_pairs(&st, 1_000_000, 71).unwrap();
    let v = verdict_gaussian(&rs, 0.0, &VerifyOptions::default()).unwrap();
    assert_eq!(v.decision, Decision::Discordant);
    assert_eq!(v.triggering_pairs(), vec![(0.0, FRAC_PI_2)]);
}

#[test]
fn product_state_verdict_not_detected() {
    let mut rng = common::rng(81);
    let st = common::random_product(&mut rng, 1.0, 0.6);
    let rs = sample_gaussian_pairs(&st, 1_000_000, 81).unwrap();
    let v = verdict_gaussian(&rs, 0.0, &VerifyOptions::default()).unwrap();
    assert_eq!(v.decision, Decision::NotDetected, "{:?}", v.triggering_pairs());
}

#[test]
fn mixtures_are_flagged_and_coherent_control_is_not() {
    let schemes = [
        ModulationScheme::switched_noise(4.5),
        ModulationScheme::switched_phase_for(FRAC_1_SQRT_2),
        ModulationScheme::async_sine(4.5),
    ];
    for (i, s) in schemes.into_iter().enumerate() {
        let rs = sample_scheme(&SimulationConfig::new(s, 1_000_000, 90 + i as u64)).unwrap();
        let r = verdict_mixture(&rs, s.default_threshold(), &VerifyOptions::default()).unwrap();
        assert_eq!(r.decision, Decision::Discordant, "{}", s.name());
        assert!(r.min_p() < 1e-6, "{}: p = {}", s.name(), r.min_p());
    }
    let control = sample_scheme(&SimulationConfig::new(ModulationScheme::gaussian(0.0), 1_000_000, 99)).unwrap();
    let r = verdict_mixture(&control, 0.0, &VerifyOptions::default()).unwrap();
    assert_eq!(r.decision, Decision::NotDetected);
}
