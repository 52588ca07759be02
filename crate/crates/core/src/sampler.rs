//! Synthetic dual-homodyne records for Gaussian states and for the three
//! switched/asynchronous modulation schemes, plus record-file I/O.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, TAU};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::marginals::{joint_marginal_form, PComponent, PMixtureState};
use crate::numeric::{derive_seed, stream_rng};
use crate::states::{GaussianBipartiteState, DEFAULT_V0};

/// Records per parallel chunk. Part of the reproducibility contract: the
/// chunk index selects the random substream.
pub const CHUNK_SIZE: usize = 1 << 16;

pub const RECORD_HEADER: [&str; 4] = ["theta_A", "theta_B", "x_A", "x_B"];

/// Tolerance used when matching a record's phase settings to a pair.
pub const ANGLE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    #[serde(rename = "theta_A")]
    pub theta_a: f64,
    #[serde(rename = "theta_B")]
    pub theta_b: f64,
    #[serde(rename = "x_A")]
    pub x_a: f64,
    #[serde(rename = "x_B")]
    pub x_b: f64,
}

impl HomodyneRecord {
    pub fn is_finite(&self) -> bool {
        self.theta_a.is_finite() && self.theta_b.is_finite() && self.x_a.is_finite() && self.x_b.is_finite()
    }

    pub fn matches_pair(&self, theta_a: f64, theta_b: f64) -> bool {
        (self.theta_a - theta_a).abs() < ANGLE_TOL && (self.theta_b - theta_b).abs() < ANGLE_TOL
    }
}

/// Where a record set came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordSet {
    pub records: Vec<HomodyneRecord>,
    pub provenance: Provenance,
}

impl RecordSet {
    pub fn new(records: Vec<HomodyneRecord>, provenance: Provenance) -> Result<Self> {
        if let Some(i) = records.iter().position(|r| !r.is_finite()) {
            return Err(Error::Domain(format!("record {i} has a non-finite field")));
        }
        Ok(RecordSet { records, provenance })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn x_a(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x_a).collect()
    }

    pub fn x_b(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x_b).collect()
    }

    /// Records taken at the given phase settings, in original order.
    pub fn for_pair(&self, theta_a: f64, theta_b: f64) -> RecordSet {
        RecordSet {
            records: self.records.iter().copied().filter(|r| r.matches_pair(theta_a, theta_b)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Exchanges the roles of the two stations.
    pub fn swapped(&self) -> RecordSet {
        RecordSet {
            records: self
                .records
                .iter()
                .map(|r| HomodyneRecord {
                    theta_a: r.theta_b,
                    theta_b: r.theta_a,
                    x_a: r.x_b,
                    x_b: r.x_a,
                })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn extend(&mut self, other: RecordSet) {
        self.records.extend(other.records);
    }
}

/// How the signal beam is displaced before the beam splitter. Depths are
/// in units of the vacuum standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModulationScheme {
    /// Independent Gaussian displacements on both quadratures.
    Gaussian { depth_x: f64, depth_p: f64 },
    /// Gaussian displacement gated on with probability `duty`.
    SwitchedNoise { depth_x: f64, depth_p: f64, duty: f64 },
    /// Fixed phase-quadrature displacement `−depth_p` gated on with
    /// probability `duty`.
    SwitchedPhase { depth_p: f64, duty: f64, threshold_hint: f64 },
    /// Amplitude-quadrature displacement `depth·cos φ` with φ uniform.
    AsyncSine { depth: f64 },
}

impl ModulationScheme {
    pub const DEFAULT_DUTY: f64 = 0.5;
    /// Separation between the two switched-phase peaks on station A.
    pub const SWITCHED_PHASE_PEAK_GAP: f64 = 12.0;

    pub fn gaussian(depth: f64) -> Self {
        ModulationScheme::Gaussian {
            depth_x: depth,
            depth_p: depth,
        }
    }

    pub fn switched_noise(depth: f64) -> Self {
        ModulationScheme::SwitchedNoise {
            depth_x: depth,
            depth_p: depth,
            duty: Self::DEFAULT_DUTY,
        }
    }

    /// Switched-phase scheme whose displaced peak on station A sits
    /// [`Self::SWITCHED_PHASE_PEAK_GAP`] below the vacuum peak, so the
    /// threshold hint falls halfway between them.
    pub fn switched_phase_for(eta: f64) -> Self {
        ModulationScheme::SwitchedPhase {
            depth_p: Self::SWITCHED_PHASE_PEAK_GAP / eta,
            duty: Self::DEFAULT_DUTY,
            threshold_hint: -Self::SWITCHED_PHASE_PEAK_GAP / 2.0,
        }
    }

    pub fn async_sine(depth: f64) -> Self {
        ModulationScheme::AsyncSine { depth }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModulationScheme::Gaussian { .. } => "gaussian",
            ModulationScheme::SwitchedNoise { .. } => "switched_noise",
            ModulationScheme::SwitchedPhase { .. } => "switched_phase",
            ModulationScheme::AsyncSine { .. } => "async_sine",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let depth_ok = |d: f64, name: &str| {
            if d >= 0.0 && d.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be a finite non-negative depth, got {d}")))
            }
        };
        let duty_ok = |d: f64| {
            if d > 0.0 && d <= 1.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("duty must lie in (0, 1], got {d}")))
            }
        };
        match *self {
            ModulationScheme::Gaussian { depth_x, depth_p } => {
                depth_ok(depth_x, "depth_x")?;
                depth_ok(depth_p, "depth_p")
            }
            ModulationScheme::SwitchedNoise { depth_x, depth_p, duty } => {
                depth_ok(depth_x, "depth_x")?;
                depth_ok(depth_p, "depth_p")?;
                duty_ok(duty)
            }
            ModulationScheme::SwitchedPhase {
                depth_p,
                duty,
                threshold_hint,
            } => {
                depth_ok(depth_p, "depth_p")?;
                duty_ok(duty)?;
                if threshold_hint.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain("threshold_hint must be finite".into()))
                }
            }
            ModulationScheme::AsyncSine { depth } => depth_ok(depth, "depth"),
        }
    }

    /// Threshold on Alice's outcome used to split records.
    pub fn default_threshold(&self) -> f64 {
        match *self {
            ModulationScheme::SwitchedPhase { threshold_hint, .. } => threshold_hint,
            _ => 0.0,
        }
    }

    /// Phase settings at which the scheme's modulation is visible on both
    /// stations.
    pub fn default_pair(&self) -> (f64, f64) {
        match self {
            ModulationScheme::SwitchedPhase { .. } => (FRAC_PI_2, FRAC_PI_2),
            _ => (0.0, 0.0),
        }
    }

    /// P-function of the displaced input beam, when it is a mixture of the
    /// supported component kinds. Anisotropic Gaussian modulation has no
    /// such representation here.
    pub fn p_mixture(&self, eta: f64, v0: f64) -> Result<Option<PMixtureState>> {
        self.validate()?;
        let zero = Complex64::new(0.0, 0.0);
        let components = match *self {
            ModulationScheme::Gaussian { depth_x, depth_p } if depth_x == depth_p => {
                vec![PComponent::Thermal {
                    weight: 1.0,
                    nbar: depth_x * depth_x / 2.0,
                }]
            }
            ModulationScheme::SwitchedNoise { depth_x, depth_p, duty } if depth_x == depth_p => vec![
                PComponent::Thermal {
                    weight: duty,
                    nbar: depth_x * depth_x / 2.0,
                },
                PComponent::Coherent {
                    weight: 1.0 - duty,
                    alpha: zero,
                },
            ],
            ModulationScheme::SwitchedPhase { depth_p, duty, .. } => vec![
                PComponent::Coherent {
                    weight: duty,
                    alpha: Complex64::new(0.0, -depth_p / 2.0),
                },
                PComponent::Coherent {
                    weight: 1.0 - duty,
                    alpha: zero,
                },
            ],
            ModulationScheme::AsyncSine { depth } if depth > 0.0 => vec![PComponent::Arcsine {
                weight: 1.0,
                amplitude: depth / 2.0,
            }],
            ModulationScheme::AsyncSine { .. } => vec![PComponent::Coherent { weight: 1.0, alpha: zero }],
            _ => return Ok(None),
        };
        PMixtureState::new(components, eta, v0).map(Some)
    }

    /// Pre-splitter displacement `(D_x, D_p)` in units of √v0.
    fn draw_displacement(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            ModulationScheme::Gaussian { depth_x, depth_p } => (
                depth_x * rng.sample::<f64, _>(StandardNormal),
                depth_p * rng.sample::<f64, _>(StandardNormal),
            ),
            ModulationScheme::SwitchedNoise { depth_x, depth_p, duty } => {
                let on = rng.random::<f64>() < duty;
                let zx: f64 = rng.sample(StandardNormal);
                let zp: f64 = rng.sample(StandardNormal);
                if on {
                    (depth_x * zx, depth_p * zp)
                } else {
                    (0.0, 0.0)
                }
            }
            ModulationScheme::SwitchedPhase { depth_p, duty, .. } => {
                let on = rng.random::<f64>() < duty;
                (0.0, if on { -depth_p } else { 0.0 })
            }
            ModulationScheme::AsyncSine { depth } => {
                let phi = TAU * rng.random::<f64>();
                (depth * phi.cos(), 0.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scheme: ModulationScheme,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default, rename = "theta_A")]
    pub theta_a: f64,
    #[serde(default, rename = "theta_B")]
    pub theta_b: f64,
    #[serde(default = "default_v0")]
    pub v0: f64,
}

fn default_eta() -> f64 {
    FRAC_1_SQRT_2
}

fn default_v0() -> f64 {
    DEFAULT_V0
}

impl SimulationConfig {
    pub fn new(scheme: ModulationScheme, n_samples: usize, seed: u64) -> Self {
        let (theta_a, theta_b) = scheme.default_pair();
        SimulationConfig {
            scheme,
            eta: default_eta(),
            n_samples,
            seed,
            theta_a,
            theta_b,
            v0: DEFAULT_V0,
        }
    }

    pub fn with_pair(mut self, theta_a: f64, theta_b: f64) -> Self {
        self.theta_a = theta_a;
        self.theta_b = theta_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Domain(format!("transmissivity must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(Error::Domain(format!("vacuum variance must be positive, got {}", self.v0)));
        }
        if !(self.theta_a.is_finite() && self.theta_b.is_finite()) {
            return Err(Error::Domain("phase settings must be finite".into()));
        }
        Ok(())
    }
}

/// Runs `draw` for every index in `0..n`, chunked so that chunk `k` always
/// uses substream `k` of `seed`; output order is global index order.
fn chunked<F>(n: usize, seed: u64, draw: F) -> Vec<HomodyneRecord>
where
    F: Fn(&mut ChaCha8Rng) -> HomodyneRecord + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<HomodyneRecord>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let len = CHUNK_SIZE.min(n - k * CHUNK_SIZE);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.concat()
}

/// Independent draws of `(x_A, x_B)` from the bivariate normal of the
/// rotated state.
pub fn sample_gaussian(
    state: &GaussianBipartiteState,
    theta_a: f64,
    theta_b: f64,
    n: usize,
    seed: u64,
) -> Result<RecordSet> {
    let form = joint_marginal_form(state, theta_a, theta_b)?;
    let (va, vb, c) = form.covariance();
    let sa = va.sqrt();
    let slope = c / sa;
    let resid = (vb - slope * slope).max(0.0).sqrt();
    let records = chunked(n, seed, |rng| {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        HomodyneRecord {
            theta_a,
            theta_b,
            x_a: form.mean_a + sa * z1,
            x_b: form.mean_b + slope * z1 + resid * z2,
        }
    });
    RecordSet::new(
        records,
        Provenance {
            source: "gaussian_state".into(),
            seed: Some(seed),
            config: Some(serde_json::json!({
                "state": serde_json::from_str::<serde_json::Value>(&state.to_json()?)?,
                "theta_A": theta_a,
                "theta_B": theta_b,
                "n": n,
            })),
        },
    )
}

/// Draws the latent displacement, mixes it with vacuum through the beam
/// splitter and adds each output's vacuum noise.
pub fn sample_scheme(config: &SimulationConfig) -> Result<RecordSet> {
    config.validate()?;
    let eta = config.eta;
    let eta_t = (1.0 - eta * eta).max(0.0).sqrt();
    let s0 = config.v0.sqrt();
    let (sa, ca) = config.theta_a.sin_cos();
    let (sb, cb) = config.theta_b.sin_cos();
    let scheme = config.scheme;
    let records = chunked(config.n_samples, config.seed, |rng| {
        let (dx, dp) = scheme.draw_displacement(rng);
        let na: f64 = rng.sample(StandardNormal);
        let nb: f64 = rng.sample(StandardNormal);
        HomodyneRecord {
            theta_a: config.theta_a,
            theta_b: config.theta_b,
            x_a: s0 * (eta * (dx * ca + dp * sa) + na),
            x_b: s0 * (eta_t * (dx * cb + dp * sb) + nb),
        }
    });
    RecordSet::new(
        records,
        Provenance {
            source: scheme.name().into(),
            seed: Some(config.seed),
            config: Some(serde_json::to_value(config)?),
        },
    )
}

/// The four phase pairs `{0, π/2}²` in canonical order.
pub const QUADRATURE_PAIRS: [(f64, f64); 4] = [(0.0, 0.0), (0.0, FRAC_PI_2), (FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_2)];

/// Gaussian-state records at all four phase pairs, each from its own
/// derived seed.
pub fn sample_gaussian_pairs(state: &GaussianBipartiteState, n_per_pair: usize, seed: u64) -> Result<RecordSet> {
    let mut all = RecordSet {
        records: Vec::with_capacity(4 * n_per_pair),
        provenance: Provenance {
            source: "gaussian_state".into(),
            seed: Some(seed),
            config: Some(serde_json::json!({
                "state": serde_json::from_str::<serde_json::Value>(&state.to_json()?)?,
                "n_per_pair": n_per_pair,
                "pairs": "all",
            })),
        },
    };
    for (i, &(ta, tb)) in QUADRATURE_PAIRS.iter().enumerate() {
        all.extend(sample_gaussian(state, ta, tb, n_per_pair, derive_seed(seed, i as u64))?);
    }
    Ok(all)
}

/// Scheme records at all four phase pairs, each from its own derived seed.
pub fn sample_scheme_pairs(config: &SimulationConfig) -> Result<RecordSet> {
    config.validate()?;
    let mut all = RecordSet {
        records: Vec::with_capacity(4 * config.n_samples),
        provenance: Provenance {
            source: config.scheme.name().into(),
            seed: Some(config.seed),
            config: Some(serde_json::to_value(config)?),
        },
    };
    for (i, &(ta, tb)) in QUADRATURE_PAIRS.iter().enumerate() {
        let cfg = SimulationConfig {
            seed: derive_seed(config.seed, i as u64),
            ..config.clone().with_pair(ta, tb)
        };
        all.extend(sample_scheme(&cfg)?);
    }
    Ok(all)
}

/// Fixed-format float: 17 significant digits, which round-trips every f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_records_to<W: Write>(rs: &RecordSet, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", RECORD_HEADER.join(","))?;
    for r in &rs.records {
        writeln!(
            w,
            "{},{},{},{}",
            format_f64(r.theta_a),
            format_f64(r.theta_b),
            format_f64(r.x_a),
            format_f64(r.x_b)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records(rs: &RecordSet, path: &Path) -> Result<()> {
    write_records_to(rs, File::create(path)?)
}

pub fn read_records_from<R: Read>(r: R) -> Result<RecordSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != RECORD_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}, found {}", RECORD_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let mut v = [0.0; 4];
        for (i, name) in RECORD_HEADER.iter().enumerate() {
            let field = row.get(i).unwrap_or("");
            v[i] = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("{name} is not a finite number: {field:?}"),
                })?;
        }
        records.push(HomodyneRecord {
            theta_a: v[0],
            theta_b: v[1],
            x_a: v[2],
            x_b: v[3],
        });
    }
    Ok(RecordSet {
        records,
        provenance: Provenance::default(),
    })
}

/// Reads a record file, attaching its sidecar provenance when present.
pub fn read_records(path: &Path) -> Result<RecordSet> {
    let mut rs = read_records_from(File::open(path)?)?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        rs.provenance = serde_json::from_reader(File::open(sidecar)?)?;
    } else {
        rs.provenance.source = path.display().to_string();
    }
    Ok(rs)
}

/// `rec.csv` → `rec.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sidecar_json(rs: &RecordSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&rs.provenance)?)
}
