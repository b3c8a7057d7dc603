//! JSON configuration: schema, defaults, validation, and the conversion
//! into a solver-ready problem description.
//!
//! Every section is optional; a minimal document like
//! `{"time": {"T": 0.25, "h": 0.001}}` parses into a fully defaulted
//! configuration. Unknown keys are rejected so typos fail loudly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialKind, Proliferation, ProliferationKind, YosidaLevel};
use crate::scheme::{Forcing, NewtonParams, ProblemConfig};
use crate::spectral::{BoundaryKind, EigenBasis, Field, FractionalOperator};

fn default_dim() -> usize {
    1
}
fn default_lengths() -> Vec<f64> {
    vec![1.0]
}
fn default_n_modes() -> usize {
    32
}
fn default_oversample() -> usize {
    2
}

/// Spatial discretization section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

impl Default for SpaceSection {
    fn default() -> Self {
        SpaceSection {
            dim: default_dim(),
            lengths: default_lengths(),
            n_modes: default_n_modes(),
            oversample: default_oversample(),
        }
    }
}

fn default_boundary() -> BoundaryKind {
    BoundaryKind::Neumann
}
fn default_exponent() -> f64 {
    0.5
}

/// One fractional operator: eigenfamily plus exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryKind,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// Mode count override; defaults to the shared space section value.
    #[serde(default)]
    pub n_modes: Option<usize>,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection {
            boundary: default_boundary(),
            exponent: default_exponent(),
            n_modes: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorsSection {
    #[serde(default, rename = "A")]
    pub a: OperatorSection,
    #[serde(default, rename = "B")]
    pub b: OperatorSection,
    #[serde(default, rename = "C")]
    pub c: OperatorSection,
}

fn default_c1() -> f64 {
    2.0
}
fn default_c2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default = "default_potential_kind")]
    pub kind: PotentialKind,
    /// Logarithmic coefficient, must exceed 1.
    #[serde(default = "default_c1")]
    pub c1: f64,
    /// Obstacle coefficient, must be positive.
    #[serde(default = "default_c2")]
    pub c2: f64,
}

fn default_potential_kind() -> PotentialKind {
    PotentialKind::Regular
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: default_potential_kind(),
            c1: default_c1(),
            c2: default_c2(),
        }
    }
}

fn default_lambda() -> f64 {
    1e-2
}
fn default_cap() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YosidaSection {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_cap")]
    pub cap: f64,
}

impl Default for YosidaSection {
    fn default() -> Self {
        YosidaSection {
            lambda: default_lambda(),
            cap: default_cap(),
        }
    }
}

fn default_p0() -> f64 {
    0.5
}
fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProliferationSection {
    #[serde(default = "default_proliferation_kind")]
    pub kind: ProliferationKind,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_proliferation_kind() -> ProliferationKind {
    ProliferationKind::Constant
}

impl Default for ProliferationSection {
    fn default() -> Self {
        ProliferationSection {
            kind: default_proliferation_kind(),
            p0: default_p0(),
            width: default_width(),
        }
    }
}

/// Initial-data preset for one field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPreset {
    #[default]
    Zero,
    /// `amplitude * e_mode` (1-based mode index).
    SingleMode {
        mode: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// `amplitude * tanh((x - L/2) / width)`, band-limited projection.
    TanhInterface {
        #[serde(default = "default_tanh_amplitude")]
        amplitude: f64,
        #[serde(default = "default_tanh_width")]
        width: f64,
    },
    /// Seeded random coefficients with a `1/(1 + lambda_j)` decay.
    RandomBandlimited {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_tanh_amplitude() -> f64 {
    0.9
}
fn default_tanh_width() -> f64 {
    0.1
}

impl InitialPreset {
    /// Realize the preset in a basis. `global_seed` feeds the random
    /// preset when it carries no seed of its own.
    pub fn realize(&self, basis: &Arc<EigenBasis>, global_seed: u64) -> Result<Field> {
        match self {
            InitialPreset::Zero => Ok(Field::zero(Arc::clone(basis))),
            InitialPreset::SingleMode { mode, amplitude } => {
                if *mode < 1 || *mode > basis.n_modes() {
                    return Err(Error::config(format!(
                        "single_mode preset index {mode} outside 1..={}",
                        basis.n_modes()
                    )));
                }
                let mut coeffs = vec![0.0; basis.n_modes()];
                coeffs[mode - 1] = *amplitude;
                Field::new(Arc::clone(basis), coeffs)
            }
            InitialPreset::TanhInterface { amplitude, width } => {
                if !(*width > 0.0) {
                    return Err(Error::config("tanh_interface width must be positive"));
                }
                let grid = basis.grid();
                let mid: Vec<f64> = basis.lengths().iter().map(|l| 0.5 * l).collect();
                let values: Vec<f64> = (0..grid.len())
                    .map(|m| {
                        let p = grid.point(m);
                        // interface along the first axis
                        amplitude * ((p[0] - mid[0]) / width).tanh()
                    })
                    .collect();
                Ok(Field::from_grid_values(Arc::clone(basis), &values))
            }
            InitialPreset::RandomBandlimited { seed, amplitude } => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(global_seed));
                let coeffs: Vec<f64> = basis
                    .eigenvalues()
                    .iter()
                    .map(|&l| amplitude * rng.random_range(-1.0..1.0) / (1.0 + l))
                    .collect();
                Field::new(Arc::clone(basis), coeffs)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub mu: InitialPreset,
    #[serde(default = "default_phi_preset")]
    pub phi: InitialPreset,
    #[serde(default)]
    pub s: InitialPreset,
}

// Must agree with the per-field serde defaults; a derived Default would
// silently zero the phi data when the whole section is omitted.
impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            mu: InitialPreset::Zero,
            phi: default_phi_preset(),
            s: InitialPreset::Zero,
        }
    }
}

fn default_phi_preset() -> InitialPreset {
    InitialPreset::TanhInterface {
        amplitude: default_tanh_amplitude(),
        width: default_tanh_width(),
    }
}

/// Forcing preset for one equation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSection {
    #[default]
    Zero,
    SingleMode {
        mode: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        frequency: f64,
    },
    Samples {
        times: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
}

impl ForcingSection {
    fn realize(&self) -> Result<Forcing> {
        match self {
            ForcingSection::Zero => Ok(Forcing::Zero),
            ForcingSection::SingleMode {
                mode,
                amplitude,
                frequency,
            } => Ok(Forcing::SingleMode {
                mode: *mode,
                amplitude: *amplitude,
                frequency: *frequency,
            }),
            ForcingSection::Samples { times, coeffs } => {
                if times.len() != coeffs.len() {
                    return Err(Error::config(
                        "forcing samples need matching times and coefficient rows",
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("forcing sample times must increase"));
                }
                Ok(Forcing::Samples {
                    times: times.clone(),
                    coeffs: coeffs.clone(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingsSection {
    #[serde(default)]
    pub mu: ForcingSection,
    #[serde(default)]
    pub phi: ForcingSection,
    #[serde(default)]
    pub s: ForcingSection,
}

fn default_t_end() -> f64 {
    0.25
}
fn default_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T", default = "default_t_end")]
    pub t_end: f64,
    #[serde(rename = "h", default = "default_step")]
    pub step: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t_end: default_t_end(),
            step: default_step(),
        }
    }
}

fn default_newton() -> NewtonParams {
    NewtonParams::default()
}
fn default_alpha() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    0.5
}

/// Sweep section consumed by the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub regime: crate::asymptotics::Regime,
    /// Value of the non-vanishing parameter (ignored for the joint regime).
    #[serde(default = "default_alpha")]
    pub fixed: f64,
    /// Strictly decreasing values of the vanishing parameter; defaults to
    /// `2^{-1} .. 2^{-6}`.
    #[serde(default = "default_sweep_values")]
    pub values: Vec<f64>,
    #[serde(default = "default_reference")]
    pub reference: crate::asymptotics::ReferenceChoice,
}

fn default_sweep_values() -> Vec<f64> {
    (1..=6).map(|n| 0.5_f64.powi(n)).collect()
}

fn default_reference() -> crate::asymptotics::ReferenceChoice {
    crate::asymptotics::ReferenceChoice::LimitProblem
}

/// Stability section consumed by the `stability` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default = "default_stability_delta")]
    pub delta: f64,
    pub pair1: RelaxationPair,
    pub pair2: RelaxationPair,
}

fn default_stability_delta() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationPair {
    pub alpha: f64,
    pub beta: f64,
}

/// The whole configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub operators: OperatorsSection,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub yosida: YosidaSection,
    #[serde(default)]
    pub proliferation: ProliferationSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub forcing: ForcingsSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default = "default_newton")]
    pub newton: NewtonParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub stability: Option<StabilitySection>,
}

// alpha/beta serde defaults collide with the struct Default derive; keep
// them aligned by hand.
impl ConfigFile {
    pub fn with_defaults() -> ConfigFile {
        ConfigFile {
            alpha: default_alpha(),
            beta: default_beta(),
            newton: default_newton(),
            ..Default::default()
        }
    }
}

/// A parsed configuration: the normalized document plus the solver-ready
/// problem.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub problem: ProblemConfig,
}

/// Parse and validate a JSON configuration document.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| {
        Error::config(format!(
            "malformed configuration document at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let problem = build_problem(&file)?;
    Ok(LoadedConfig { file, problem })
}

/// Build the solver configuration from a parsed document, enforcing the
/// structural constraints with assumption-citing messages.
pub fn build_problem(file: &ConfigFile) -> Result<ProblemConfig> {
    let space = &file.space;
    if space.dim != space.lengths.len() {
        return Err(Error::config(format!(
            "space.dim = {} does not match {} domain lengths",
            space.dim,
            space.lengths.len()
        )));
    }

    let build_op = |sec: &OperatorSection, name: &str| -> Result<FractionalOperator> {
        if !(sec.exponent > 0.0) {
            return Err(Error::config(format!(
                "operator {name} exponent {} is invalid: fractional exponents \
                 must be positive",
                sec.exponent
            )));
        }
        let n = sec.n_modes.unwrap_or(space.n_modes);
        let basis =
            EigenBasis::with_oversampling(sec.boundary, n, &space.lengths, space.oversample)?;
        FractionalOperator::new(basis, sec.exponent)
    };
    let op_a = build_op(&file.operators.a, "A")?;
    let op_b = build_op(&file.operators.b, "B")?;
    let op_c = build_op(&file.operators.c, "C")?;

    if file.alpha < 0.0 || file.beta < 0.0 {
        return Err(Error::config(format!(
            "relaxation parameters must be nonnegative, got alpha = {}, beta = {}",
            file.alpha, file.beta
        )));
    }

    let potential = match file.potential.kind {
        PotentialKind::Regular => Potential::regular(),
        PotentialKind::QuadraticTest => Potential::quadratic_test(),
        PotentialKind::Logarithmic => Potential::logarithmic(file.potential.c1).map_err(|_| {
            Error::config(format!(
                "logarithmic potential requires c1 > 1 (got c1 = {})",
                file.potential.c1
            ))
        })?,
        PotentialKind::DoubleObstacle => {
            Potential::double_obstacle(file.potential.c2).map_err(|_| {
                Error::config(format!(
                    "double obstacle potential requires c2 > 0 (got c2 = {})",
                    file.potential.c2
                ))
            })?
        }
    };

    let yosida = YosidaLevel::new(file.yosida.lambda, file.yosida.cap)?;

    let proliferation = match file.proliferation.kind {
        ProliferationKind::Constant => Proliferation::constant(file.proliferation.p0)?,
        ProliferationKind::SmoothBump => {
            Proliferation::smooth_bump(file.proliferation.p0, file.proliferation.width)?
        }
    };

    let mu0 = file.initial.mu.realize(op_a.basis(), file.seed)?;
    let phi0 = file.initial.phi.realize(op_b.basis(), file.seed)?;
    let s0 = file.initial.s.realize(op_c.basis(), file.seed)?;

    let problem = ProblemConfig {
        op_a,
        op_b,
        op_c,
        alpha: file.alpha,
        beta: file.beta,
        potential,
        yosida,
        proliferation,
        mu0,
        phi0,
        s0,
        forcing_mu: file.forcing.mu.realize()?,
        forcing_phi: file.forcing.phi.realize()?,
        forcing_s: file.forcing.s.realize()?,
        t_end: file.time.t_end,
        step: file.time.step,
        newton: file.newton,
        newton_seed: None,
    };
    problem.validate()?;
    Ok(problem)
}
