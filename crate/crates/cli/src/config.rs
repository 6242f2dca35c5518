//! Run configuration: TOML with dotted `key=value` overrides, checked into
//! the library's types.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use nematic::control::{OptimizerOptions, Parametrization};
use nematic::energy::QForm;
use nematic::fields::{BoundaryMode, DirectorProjection, Grid, SpectralCutoff};
use nematic::material::{build_params, MaterialInputs, MaterialParams};
use nematic::relative_energy::PairingVariant;
use nematic::scheme::{prepare_initial_state, FieldState, Integrator, SchemeConfig};
use nematic::tensor::Vec3;
use nematic::VectorField;

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the randomized initial-data preset.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub material: MaterialSpec,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: Vec<usize>,
    /// Box side lengths; `2π` per axis when absent.
    pub extents: Option<Vec<f64>>,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub frank: [f64; 3],
    pub mu: [f64; 6],
    pub chi_par: f64,
    pub chi_perp: f64,
    #[serde(default)]
    pub gamma_shift: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec {
            frank: [2.0, 1.0, 3.0],
            mu: [1.0, 1.0, 0.5, 1.0, 2.0, 1.0],
            chi_par: -0.1,
            chi_perp: -0.3,
            gamma_shift: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QFormSpec {
    Explicit,
    #[default]
    Tensor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Uniform magnetic field.
    #[serde(default)]
    pub field: [f64; 3],
    /// Spectral director space `|m_a| ≤ cutoff`; collocation when absent.
    pub director_cutoff: Option<usize>,
    pub velocity_cutoff: Option<usize>,
    #[serde(default)]
    pub q_form: QFormSpec,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
}

fn one() -> usize {
    1
}

fn default_blowup() -> f64 {
    1e8
}

fn e3() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Constant director and constant velocity.
    Constant {
        #[serde(default = "e3")]
        director: [f64; 3],
        #[serde(default)]
        velocity: [f64; 3],
    },
    /// `d = (cos k x_a, sin k x_a, 0)` at rest.
    Twist {
        #[serde(default = "one")]
        axis: usize,
        #[serde(default = "unit_wavenumber")]
        wavenumber: f64,
    },
    /// `normalize(director + smooth noise)` and smooth solenoidal velocity,
    /// drawn from `seed` and `seed + 1`.
    RandomPerturbed {
        #[serde(default = "e3")]
        director: [f64; 3],
        #[serde(default = "half")]
        amplitude: f64,
        #[serde(default = "half")]
        velocity_amplitude: f64,
        #[serde(default = "three")]
        max_mode: usize,
    },
}

fn unit_wavenumber() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn three() -> usize {
    3
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::RandomPerturbed { director: e3(), amplitude: 0.5, velocity_amplitude: 0.5, max_mode: 3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    /// `ṽ = 0`, constant unit `d̃`, `H̃ = 0`.
    Equilibrium {
        #[serde(default = "e3")]
        director: [f64; 3],
    },
    /// The trace itself, rates from the semi-discrete equations.
    #[serde(rename = "self")]
    SelfTrace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySpec {
    pub test: TestSpec,
    pub variant: PairingVariant,
    pub tol: f64,
    /// Fixed Gronwall constant; searched when absent.
    pub c: Option<f64>,
    pub c_max: f64,
    pub extra_terms: bool,
    /// Output directory of an earlier `simulate` whose checkpoints form the
    /// trace; the run is recomputed from this config when absent.
    pub trace_dir: Option<PathBuf>,
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec {
            test: TestSpec::Equilibrium { director: e3() },
            variant: PairingVariant::Continuous,
            tol: 1e-6,
            c: None,
            c_max: 1e6,
            extra_terms: false,
            trace_dir: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub gamma: f64,
    /// Bound on `‖H‖_{L³}`.
    pub c_h: f64,
    /// Uniform field that generates the manufactured targets.
    pub target_field: [f64; 3],
    #[serde(default = "uniform")]
    pub parametrization: Parametrization,
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub options: OptimizerOptions,
}

fn uniform() -> Parametrization {
    Parametrization::Uniform
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Checkpoint every n-th recorded sample; 0 keeps the final state only.
    pub checkpoint_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), checkpoint_every: 0 }
    }
}

/// Reads `path`, applies `key.path=value` overrides and deserializes with
/// key paths in errors.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.message().to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let de = toml::Value::Table(table);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config { key: e.path().to_string(), message: e.inner().message().trim().to_string() })
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), CliError> {
    let (key, raw) = ov.split_once('=').ok_or_else(|| CliError::Config {
        key: ov.to_string(),
        message: "override must have the form key.path=value".into(),
    })?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config { key: key.into(), message: "empty key segment".into() });
    }
    let mut cur = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config {
            key: parts[..=i].join("."),
            message: "not a table, cannot descend into it".into(),
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// A TOML literal when it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Library-level objects built from a config.
pub struct Setup {
    pub grid: Arc<Grid<f64>>,
    pub params: MaterialParams<f64>,
    pub scheme: SchemeConfig<f64>,
    pub initial: FieldState<f64>,
}

fn at(key: &str) -> impl Fn(String) -> CliError + '_ {
    move |message| CliError::Config { key: key.to_string(), message }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<Grid<f64>>, CliError> {
        let g = &self.grid;
        let extents = g.extents.clone().unwrap_or_else(|| vec![2.0 * PI; g.points.len()]);
        let mode = match g.boundary {
            Boundary::Periodic => BoundaryMode::Periodic,
            Boundary::Dirichlet => BoundaryMode::Dirichlet,
        };
        Grid::new(&g.points, &extents, mode).map_err(|e| at("grid")(e.to_string()))
    }

    pub fn params(&self) -> Result<MaterialParams<f64>, CliError> {
        let m = &self.material;
        let p = build_params(MaterialInputs { frank: m.frank, mu: m.mu, chi_par: m.chi_par, chi_perp: m.chi_perp })
            .map_err(|e| at("material")(e.to_string()))?;
        Ok(p.with_gamma_shift(m.gamma_shift))
    }

    pub fn scheme(&self, grid: &Arc<Grid<f64>>) -> Result<SchemeConfig<f64>, CliError> {
        let s = &self.scheme;
        let mut cfg = SchemeConfig::new(grid, s.dt, s.t_end);
        cfg.integrator = s.integrator;
        cfg.record_every = s.record_every;
        cfg.h = VectorField::constant(grid, Vec3(s.field));
        cfg.q_form = match s.q_form {
            QFormSpec::Explicit => QForm::Explicit,
            QFormSpec::Tensor => QForm::Tensor,
        };
        cfg.blowup_threshold = s.blowup_threshold;
        if let Some(m) = s.director_cutoff {
            let c = SpectralCutoff::uniform(grid, m).map_err(|e| at("scheme.director_cutoff")(e.to_string()))?;
            cfg.director_projection = DirectorProjection::Spectral(c);
        }
        if let Some(m) = s.velocity_cutoff {
            let c = SpectralCutoff::uniform(grid, m).map_err(|e| at("scheme.velocity_cutoff")(e.to_string()))?;
            cfg.velocity_cutoff = Some(c);
        }
        cfg.validate().map_err(|e| at("scheme")(e.to_string()))?;
        Ok(cfg)
    }

    /// Raw `(v, d)` of the chosen preset, before projection.
    pub fn raw_initial(&self, grid: &Arc<Grid<f64>>) -> Result<(VectorField, VectorField), CliError> {
        let unit = |d: [f64; 3]| {
            let v = Vec3(d);
            let n = v.norm();
            if n > 0.0 && n.is_finite() {
                Ok(v * (1.0 / n))
            } else {
                Err(at("initial.director")("director must be a nonzero finite vector".into()))
            }
        };
        Ok(match &self.initial {
            InitialSpec::Constant { director, velocity } => {
                (VectorField::constant(grid, Vec3(*velocity)), VectorField::constant(grid, unit(*director)?))
            }
            InitialSpec::Twist { axis, wavenumber } => {
                if *axis >= grid.dims() {
                    return Err(at("initial.axis")(format!("axis must be below the grid dimension {}", grid.dims())));
                }
                let (a, k) = (*axis, *wavenumber);
                let d = VectorField::from_fn(grid, |x| Vec3::new((k * x[a]).cos(), (k * x[a]).sin(), 0.0));
                (VectorField::zeros(grid), d)
            }
            InitialSpec::RandomPerturbed { director, amplitude, velocity_amplitude, max_mode } => {
                let base = unit(*director)?;
                let noise = nematic::fields::random_smooth_field(grid, *max_mode, *amplitude, self.seed);
                let d = noise.map(|x| *x + base);
                if d.data().iter().any(|x| x.norm() < 1e-8) {
                    return Err(at("initial.amplitude")("perturbation cancels the director at a node".into()));
                }
                let v = nematic::fields::random_smooth_field(grid, *max_mode, *velocity_amplitude, self.seed.wrapping_add(1));
                (v, d.normalized())
            }
        })
    }

    pub fn setup(&self) -> Result<Setup, CliError> {
        let grid = self.grid()?;
        let params = self.params()?;
        let scheme = self.scheme(&grid)?;
        let (v, d) = self.raw_initial(&grid)?;
        let initial = prepare_initial_state(&v, &d, &params, &scheme).map_err(|e| at("initial")(e.to_string()))?;
        Ok(Setup { grid, params, scheme, initial })
    }
}
