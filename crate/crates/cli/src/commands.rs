use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cvdiscord_core::fock::{
    build_ce_hidden_discord, build_ce_zero_discord, certify_hidden_discord, certify_zero_discord, CounterexampleReport,
    HiddenDiscordConfig,
};
use cvdiscord_core::numeric::derive_seed;
use cvdiscord_core::sampler::{
    read_records, sample_gaussian, sample_scheme, sidecar_json, sidecar_path, write_records_to, Provenance,
    QUADRATURE_PAIRS,
};
use cvdiscord_core::verifier::{
    conditional_histograms, parse_depths, sweep_modulation, verdict_gaussian_pairs, verdict_mixture, write_sweep_csv,
    Binning, PeakMethod, SweepConfig, VerifyOptions,
};
use cvdiscord_core::{GaussianBipartiteState, ModulationScheme, RecordSet, SimulationConfig};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{CommandName, Example, MethodName, Mode, RunConfig, SchemeName};
use crate::error::CliError;
use crate::output::{OutputEntry, Outputs, Timing};
use crate::plotdata;

pub const DEFAULT_N: usize = 100_000;
pub const DEFAULT_DEPTHS: &str = "0:5:22";
pub const DEFAULT_RECORDS: &str = "records.csv";
pub const DEFAULT_VERDICT: &str = "verdict.json";
pub const DEFAULT_SWEEP: &str = "sweep.csv";

/// Wall-clock time per stage of a command.
#[derive(Default)]
pub struct Timer {
    pub stages: Vec<Timing>,
}

impl Timer {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(Timing {
            stage: stage.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

pub struct Ran {
    pub outputs: Vec<OutputEntry>,
    /// One-line result for the terminal.
    pub summary: String,
}

pub fn dispatch(cfg: &RunConfig, timer: &mut Timer) -> Result<Ran, CliError> {
    match cfg.command {
        CommandName::Simulate => simulate(cfg, timer),
        CommandName::Verify => verify(cfg, timer),
        CommandName::Sweep => sweep(cfg, timer),
        CommandName::Counterexample => counterexample(cfg, timer),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    let value = if let Some(rest) = body.strip_prefix("pi") {
        match rest.trim().strip_prefix('/') {
            Some(d) => PI / d.trim().parse::<f64>().ok()?,
            None if rest.trim().is_empty() => PI,
            None => return None,
        }
    } else {
        body.parse::<f64>().ok()?
    };
    value.is_finite().then_some(sign * value)
}

/// `all`, or `θA,θB` items separated by `;`.
pub fn parse_pairs(spec: &str) -> Result<Vec<(f64, f64)>, CliError> {
    if spec.trim() == "all" {
        return Ok(QUADRATURE_PAIRS.to_vec());
    }
    spec.split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(',').collect();
            match parts.as_slice() {
                [a, b] => match (parse_angle(a), parse_angle(b)) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(invalid(format!("cannot parse phase pair {item:?}"))),
                },
                _ => Err(invalid(format!("phase pair {item:?} must be `θA,θB`"))),
            }
        })
        .collect()
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn sample_count(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.n.unwrap_or(DEFAULT_N) {
        0 => Err(invalid("n must be at least 1")),
        n => Ok(n),
    }
}

fn build_scheme(cfg: &RunConfig, name: SchemeName, eta: f64) -> Result<ModulationScheme, CliError> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| invalid(format!("scheme {name:?} needs --{what}")));
    let duty = cfg.duty.unwrap_or(ModulationScheme::DEFAULT_DUTY);
    let scheme = match name {
        SchemeName::Gaussian | SchemeName::SwitchedNoise => {
            let dx = cfg.depth_x.or(cfg.depth);
            let dp = cfg.depth_p.or(cfg.depth);
            let (depth_x, depth_p) = (need(dx, "depth")?, need(dp, "depth")?);
            if name == SchemeName::Gaussian {
                ModulationScheme::Gaussian { depth_x, depth_p }
            } else {
                ModulationScheme::SwitchedNoise { depth_x, depth_p, duty }
            }
        }
        SchemeName::SwitchedPhase => {
            let depth_p = cfg
                .depth_p
                .or(cfg.depth)
                .unwrap_or(ModulationScheme::SWITCHED_PHASE_PEAK_GAP / eta);
            ModulationScheme::SwitchedPhase {
                depth_p,
                duty,
                threshold_hint: cfg.threshold.unwrap_or(-eta * depth_p / 2.0),
            }
        }
        SchemeName::AsyncSine => ModulationScheme::AsyncSine {
            depth: need(cfg.depth, "depth")?,
        },
    };
    scheme.validate()?;
    Ok(scheme)
}

fn load_state(path: &Path) -> Result<GaussianBipartiteState, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read state {}: {e}", path.display())))?;
    Ok(GaussianBipartiteState::from_json(&text)?)
}

/// One record set per pair; several pairs draw from derived seeds.
fn sample_pairs(
    pairs: &[(f64, f64)],
    seed: u64,
    draw: impl Fn(f64, f64, u64) -> cvdiscord_core::Result<RecordSet>,
) -> Result<RecordSet, CliError> {
    if let [(a, b)] = pairs {
        return Ok(draw(*a, *b, seed)?);
    }
    let mut all = RecordSet::default();
    for (i, &(a, b)) in pairs.iter().enumerate() {
        all.extend(draw(a, b, derive_seed(seed, i as u64))?);
    }
    Ok(all)
}

fn simulate(cfg: &RunConfig, timer: &mut Timer) -> Result<Ran, CliError> {
    let n = sample_count(cfg)?;
    let eta = cfg.eta.unwrap_or(FRAC_1_SQRT_2);
    let v0 = positive("v0", cfg.v0.unwrap_or(1.0))?;
    let target = cfg.output_path(cfg.out.as_deref().unwrap_or(Path::new(DEFAULT_RECORDS)));

    let (mut rs, source, threshold, pairs, model) = match (&cfg.state, cfg.scheme) {
        (Some(_), Some(_)) => return Err(invalid("give either --state or --scheme, not both")),
        (None, None) => return Err(invalid("simulate needs --scheme or --state")),
        (Some(path), None) => {
            let state = load_state(path)?;
            let pairs = parse_pairs(cfg.pairs.as_deref().unwrap_or("all"))?;
            let rs = timer.time("sample", || {
                sample_pairs(&pairs, cfg.seed, |a, b, s| sample_gaussian(&state, a, b, n, s))
            })?;
            let model = serde_json::from_str::<serde_json::Value>(&state.to_json()?)?;
            (rs, "gaussian_state", 0.0, pairs, json!({ "state": model }))
        }
        (None, Some(name)) => {
            let scheme = build_scheme(cfg, name, eta)?;
            let pairs = match cfg.pairs.as_deref() {
                // Gaussian modulation yields a Gaussian state, tested on all four pairs.
                None if name == SchemeName::Gaussian => QUADRATURE_PAIRS.to_vec(),
                None | Some("default") => vec![scheme.default_pair()],
                Some(spec) => parse_pairs(spec)?,
            };
            let base = SimulationConfig {
                scheme,
                eta,
                n_samples: n,
                seed: cfg.seed,
                theta_a: 0.0,
                theta_b: 0.0,
                v0,
            };
            base.validate()?;
            let rs = timer.time("sample", || {
                sample_pairs(&pairs, cfg.seed, |a, b, s| {
                    sample_scheme(&SimulationConfig {
                        seed: s,
                        ..base.clone().with_pair(a, b)
                    })
                })
            })?;
            let model = json!({ "scheme": scheme, "eta": eta, "v0": v0 });
            (rs, scheme.name(), scheme.default_threshold(), pairs, model)
        }
    };
    let mut config = model;
    config["n_per_pair"] = n.into();
    config["pairs"] = json!(pairs);
    config["threshold"] = threshold.into();
    rs.provenance = Provenance {
        source: source.into(),
        seed: Some(cfg.seed),
        config: Some(config),
    };

    let mut out = Outputs::new(&cfg.out_dir);
    timer.time("write", || -> Result<(), CliError> {
        out.stage_with(&target, |w| Ok(write_records_to(&rs, w)?))?;
        if cfg.emit.json() {
            out.stage(&sidecar_path(&target), sidecar_json(&rs)?.as_bytes())?;
        }
        Ok(())
    })?;
    Ok(Ran {
        outputs: out.commit()?,
        summary: format!("wrote {} records ({} pair(s)) to {}", rs.len(), pairs.len(), target.display()),
    })
}

/// Distinct phase pairs in order of first appearance.
fn present_pairs(rs: &RecordSet) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for r in &rs.records {
        if !pairs.iter().any(|&(a, b)| r.matches_pair(a, b)) {
            pairs.push((r.theta_a, r.theta_b));
        }
    }
    pairs
}

fn verify_options(cfg: &RunConfig) -> VerifyOptions {
    let d = VerifyOptions::default();
    VerifyOptions {
        k_min: cfg.k_min.unwrap_or(d.k_min),
        alpha: cfg.alpha.unwrap_or(d.alpha),
        replicates: cfg.replicates.unwrap_or(d.replicates),
        method: match cfg.method {
            Some(MethodName::BinParabolic) => PeakMethod::BinParabolic,
            Some(MethodName::LogPolyFit) => PeakMethod::LogPolyFit,
            None => d.method,
        },
        binning: match cfg.bins {
            Some(bins) => Binning::Count { bins },
            None => d.binning,
        },
        seed: cfg.seed,
    }
}

fn with_suffix(target: &Path, suffix: &str) -> PathBuf {
    let stem = target.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    target.with_file_name(format!("{stem}{suffix}"))
}

fn verify(cfg: &RunConfig, timer: &mut Timer) -> Result<Ran, CliError> {
    let path = cfg.records.as_ref().ok_or_else(|| invalid("verify needs --records"))?;
    if !path.is_file() {
        return Err(invalid(format!("record file {} does not exist", path.display())));
    }
    let rs = timer.time("read", || read_records(path))?;
    if rs.is_empty() {
        return Err(invalid(format!("{} contains no records", path.display())));
    }
    let stored_threshold = rs
        .provenance
        .config
        .as_ref()
        .and_then(|c| c.get("threshold"))
        .and_then(|v| v.as_f64());
    let t = cfg.threshold.or(stored_threshold).unwrap_or(0.0);
    let opts = verify_options(cfg);
    opts.validate()?;
    let pairs = match cfg.pairs.as_deref() {
        None | Some("present") => present_pairs(&rs),
        Some(spec) => parse_pairs(spec)?,
    };
    let target = cfg.output_path(cfg.out.as_deref().unwrap_or(Path::new(DEFAULT_VERDICT)));
    let mut out = Outputs::new(&cfg.out_dir);

    let summary = match cfg.mode.unwrap_or_default() {
        Mode::Gaussian => {
            let v = timer.time("verdict", || verdict_gaussian_pairs(&rs, t, &pairs, &opts))?;
            out.stage(&target, v.to_json()?.as_bytes())?;
            if cfg.emit.csv() {
                if v.per_pair.is_empty() {
                    return Err(CliError::Runtime("verdict has no pairs to plot".into()));
                }
                timer.time("plotdata", || -> Result<(), CliError> {
                    for (i, p) in v.per_pair.iter().enumerate() {
                        let sub = rs.for_pair(p.theta_a, p.theta_b);
                        let h = conditional_histograms(&sub, t, &opts.binning)?;
                        stage_histograms(&mut out, &target, &format!(".pair{i}"), &h, None)?;
                    }
                    Ok(())
                })?;
            }
            let triggered = v.triggering_pairs().len();
            format!("decision: {} ({} of {} pairs triggered)", decision_name(&v.decision), triggered, v.per_pair.len())
        }
        Mode::Mixture => {
            let (a, b) = match pairs.as_slice() {
                [p] => *p,
                _ => return Err(invalid(format!("mixture mode needs exactly one phase pair, found {}", pairs.len()))),
            };
            let sub = rs.for_pair(a, b);
            if sub.is_empty() {
                return Err(invalid(format!("no records at phase pair ({a}, {b})")));
            }
            let r = timer.time("verdict", || verdict_mixture(&sub, t, &opts))?;
            out.stage(&target, r.to_json()?.as_bytes())?;
            if cfg.emit.csv() {
                timer.time("plotdata", || -> Result<(), CliError> {
                    let h = conditional_histograms(&sub, t, &opts.binning)?;
                    let avg = (r.unconditional_mean, r.plus.variance, r.minus.variance);
                    stage_histograms(&mut out, &target, "", &h, Some(avg))
                })?;
            }
            format!("decision: {} (min p = {:.3e})", decision_name(&r.decision), r.min_p())
        }
    };
    Ok(Ran {
        outputs: out.commit()?,
        summary,
    })
}

fn decision_name(d: &cvdiscord_core::Decision) -> String {
    serde_json::to_value(d)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn stage_histograms(
    out: &mut Outputs,
    target: &Path,
    tag: &str,
    h: &cvdiscord_core::verifier::ConditionalHistograms,
    average: Option<(f64, f64, f64)>,
) -> Result<(), CliError> {
    let mut pd = plotdata::from_histograms(h);
    if let Some((mean, vp, vm)) = average {
        pd = plotdata::with_average_variance(pd, mean, vp, vm);
    }
    out.stage_with(&with_suffix(target, &format!("{tag}.plot.csv")), |w| pd.write(w))?;
    for (name, hist) in [("unconditional", &h.unconditional), ("plus", &h.plus), ("minus", &h.minus)] {
        out.stage_with(&with_suffix(target, &format!("{tag}.{name}.hist.csv")), |w| Ok(hist.write_csv(w)?))?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, timer: &mut Timer) -> Result<Ran, CliError> {
    let depths = parse_depths(cfg.depths.as_deref().unwrap_or(DEFAULT_DEPTHS))?;
    let sc = SweepConfig {
        depths,
        n: sample_count(cfg)?,
        seed: cfg.seed,
        eta: cfg.eta.unwrap_or(FRAC_1_SQRT_2),
        v0: positive("v0", cfg.v0.unwrap_or(1.0))?,
    };
    let opts = verify_options(cfg);
    let rows = timer.time("sweep", || sweep_modulation(&sc, &opts))?;
    let target = cfg.output_path(cfg.out.as_deref().unwrap_or(Path::new(DEFAULT_SWEEP)));
    let mut out = Outputs::new(&cfg.out_dir);
    out.stage_with(&target, |w| Ok(write_sweep_csv(&rows, w)?))?;
    if cfg.emit.json() {
        let doc = json!({ "config": sc, "options": opts, "rows": rows });
        out.stage(&with_suffix(&target, ".json"), serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    let within = rows.iter().filter(|r| r.within(3.0)).count();
    Ok(Ran {
        outputs: out.commit()?,
        summary: format!("{} depths, {} within 3σ of the analytic separation", rows.len(), within),
    })
}

fn stage_counterexample(
    out: &mut Outputs,
    cfg: &RunConfig,
    rep: &CounterexampleReport,
    fock_json: impl FnOnce() -> Result<String, CliError>,
) -> Result<(), CliError> {
    let base = cfg.output_path(Path::new(rep.name.as_str()));
    out.stage(&base.with_extension("json"), serde_json::to_string_pretty(rep)?.as_bytes())?;
    if cfg.emit.csv() {
        let pd = plotdata::from_counterexample(rep)?;
        out.stage_with(&with_suffix(&base, ".plot.csv"), |w| pd.write(w))?;
    }
    if cfg.emit.json() {
        out.stage(&with_suffix(&base, ".fock.json"), fock_json()?.as_bytes())?;
    }
    Ok(())
}

fn counterexample(cfg: &RunConfig, timer: &mut Timer) -> Result<Ran, CliError> {
    let v0 = positive("v0", cfg.v0.unwrap_or(1.0))?;
    let example = cfg.example.unwrap_or_default();
    let mut out = Outputs::new(&cfg.out_dir);
    let mut lines = Vec::new();
    if matches!(example, Example::ZeroDiscord | Example::Both) {
        let alpha = Complex64::new(cfg.amplitude.unwrap_or(1.0), 0.0);
        let rep = timer.time("zero_discord", || certify_zero_discord(alpha, v0))?;
        stage_counterexample(&mut out, cfg, &rep, || Ok(build_ce_zero_discord(alpha, None)?.to_json()?))?;
        lines.push(format!(
            "{}: separation {:.4}, classical on B: {}",
            rep.name,
            rep.peak_separation,
            rep.classical_on_b.unwrap_or(false)
        ));
    }
    if matches!(example, Example::HiddenDiscord | Example::Both) {
        let hc = HiddenDiscordConfig {
            dim_b: cfg.dim_b,
            ..HiddenDiscordConfig::new(cfg.nbar.unwrap_or(1.0), cfg.r.unwrap_or(0.5))
        };
        let rep = timer.time("hidden_discord", || certify_hidden_discord(&hc, v0))?;
        stage_counterexample(&mut out, cfg, &rep, || Ok(build_ce_hidden_discord(&hc)?.to_json()?))?;
        lines.push(format!(
            "{}: separation {:.2e}, variance ratio {:.3}, commutator {:.3e}",
            rep.name,
            rep.peak_separation,
            rep.variance_ratio,
            rep.commutator_norm.unwrap_or(0.0)
        ));
    }
    Ok(Ran {
        outputs: out.commit()?,
        summary: lines.join("\n"),
    })
}
