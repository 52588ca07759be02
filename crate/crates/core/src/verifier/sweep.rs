use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use super::verdict::{separation_statistic, VerifyOptions};
use crate::error::{Error, Result};
use crate::marginals::{analytic_peak_separation, joint_marginal_form};
use crate::numeric::derive_seed;
use crate::sampler::{format_f64, sample_scheme, ModulationScheme, SimulationConfig};
use crate::states::{apply_beam_splitter, modulated_beam_v0, BeamSplitter, GaussianBipartiteState, SingleModeState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: f64,
    pub delta: f64,
    pub sigma_delta: f64,
    pub delta_analytic: f64,
}

impl SweepRow {
    pub fn within(&self, k: f64) -> bool {
        (self.delta - self.delta_analytic).abs() <= k * self.sigma_delta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub depths: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub eta: f64,
    pub v0: f64,
}

/// Output state for phase-quadrature Gaussian modulation of depth `d`.
pub fn phase_modulated_state(depth: f64, eta: f64, v0: f64) -> Result<GaussianBipartiteState> {
    let input = modulated_beam_v0(0.0, depth, v0)?;
    let joint = GaussianBipartiteState::product(&input, &SingleModeState::vacuum(v0))?;
    apply_beam_splitter(&joint, &BeamSplitter::new(eta)?)
}

/// Per depth: simulate phase-modulated records, measure the phase-quadrature
/// peak separation and attach its analytic value.
pub fn sweep_modulation(cfg: &SweepConfig, opts: &VerifyOptions) -> Result<Vec<SweepRow>> {
    if let Some(d) = cfg.depths.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::Domain(format!("depths must be non-negative, got {d}")));
    }
    opts.validate()?;
    cfg.depths
        .iter()
        .enumerate()
        .map(|(i, &depth)| {
            let seed = derive_seed(cfg.seed, i as u64);
            let sim = SimulationConfig {
                scheme: ModulationScheme::Gaussian {
                    depth_x: 0.0,
                    depth_p: depth,
                },
                eta: cfg.eta,
                n_samples: cfg.n,
                seed,
                theta_a: FRAC_PI_2,
                theta_b: FRAC_PI_2,
                v0: cfg.v0,
            };
            let rs = sample_scheme(&sim)?;
            let sep = separation_statistic(&rs, 0.0, FRAC_PI_2, FRAC_PI_2, &VerifyOptions { seed, ..opts.clone() })?;
            let form = joint_marginal_form(&phase_modulated_state(depth, cfg.eta, cfg.v0)?, FRAC_PI_2, FRAC_PI_2)?;
            Ok(SweepRow {
                depth,
                delta: sep.delta,
                sigma_delta: sep.sigma_delta,
                delta_analytic: analytic_peak_separation(&form)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "depth,delta,sigma_delta,delta_analytic")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            format_f64(r.depth),
            format_f64(r.delta),
            format_f64(r.sigma_delta),
            format_f64(r.delta_analytic)
        )?;
    }
    Ok(())
}

/// `a:b:n` → `n` evenly spaced values from `a` to `b` inclusive. A bare
/// number or comma-separated list is also accepted.
pub fn parse_depths(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::MalformedInput(format!("cannot parse depth range {spec:?}"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, n] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            Ok(crate::marginals::linspace(a, b, n))
        }
        [list] => list.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect(),
        _ => Err(bad()),
    }
}
