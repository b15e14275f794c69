//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1          # optional, only 1 is accepted
//! group = "su3"               # su2 | su3
//! coupling = 1.0              # g > 0, default 1
//! volume = 1.0                # V > 0, default 1
//! mode = "curvature"          # curvature | ambrose-singer
//!
//! [field]                     # either a named ansatz ...
//! ansatz = "SU3_IV"
//! params = [1.0, 0.5]
//! # coefficients = [[...], [...], [...]]   # ... or an explicit 3 x dim table
//!
//! [lattice]                   # qc-check, splittings, symmetries
//! size = 3
//! spacing = 1.0
//! seed = 7
//! stencil = "central"         # central | forward
//! background = "random"       # zero | random | constant | explicit
//! tangent = "random"          # zero | random | explicit
//! amplitude = 1.0
//!
//! [scan]                      # scan
//! cap = 1000000
//! [scan.axes]
//! a2 = { min = 0.0, max = 2.0, steps = 101 }
//! a3 = { min = 0.0, max = 2.0, steps = 101 }
//! a1 = 0.0
//!
//! [tolerances]
//! membership = 1e-8
//! quadrature_rel = 1e-10
//! max_nodes = 10000
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gauge_strata::constraints::{Lattice, LatticeBackground, Stencil, TangentPair, DEFAULT_MEMBERSHIP_TOL};
use gauge_strata::groundstate::{Axis, QuadratureConfig, ScanSpec, DEFAULT_GRID_CAP};
use gauge_strata::{Ansatz, AlgebraElement, ConstantField, GroupId, HolonomyMode};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub group: GroupId,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub mode: HolonomyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A named ansatz with parameters, or explicit `A_i^a` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<Ansatz>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    #[default]
    Zero,
    Random,
    /// `A` from `[field]`, `E` from `lattice.electric` (default zero).
    Constant,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TangentKind {
    #[default]
    Zero,
    Random,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub size: usize,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub background: BackgroundKind,
    #[serde(default)]
    pub tangent: TangentKind,
    /// Half-width of the uniform distribution for random data.
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electric: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_e: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent_e: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Axes keyed by parameter name; unlisted parameters take `field.params`.
    #[serde(default)]
    pub axes: BTreeMap<String, Axis>,
}

fn default_cap() -> usize {
    DEFAULT_GRID_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_membership")]
    pub membership: f64,
    #[serde(default = "default_quadrature_rel")]
    pub quadrature_rel: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_membership() -> f64 {
    DEFAULT_MEMBERSHIP_TOL
}

fn default_quadrature_rel() -> f64 {
    QuadratureConfig::default().rel_tol
}

fn default_max_nodes() -> usize {
    QuadratureConfig::default().max_nodes
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            membership: default_membership(),
            quadrature_rel: default_quadrature_rel(),
            max_nodes: default_max_nodes(),
        }
    }
}

impl Tolerances {
    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::validation("--tol", format!("expected key=value, got '{assignment}'")))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |e: &dyn std::fmt::Display| CliError::validation(format!("tolerances.{key}"), e.to_string());
        match key {
            "membership" => self.membership = value.parse().map_err(|e| bad(&e))?,
            "quadrature_rel" => self.quadrature_rel = value.parse().map_err(|e| bad(&e))?,
            "max_nodes" => self.max_nodes = value.parse().map_err(|e| bad(&e))?,
            _ => {
                return Err(CliError::validation(
                    "--tol",
                    format!("unknown tolerance '{key}' (membership, quadrature_rel, max_nodes)"),
                ))
            }
        }
        Ok(())
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: self.quadrature_rel,
            max_nodes: self.max_nodes,
            ..QuadratureConfig::default()
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(name, format!("must be a positive finite number, got {x}")))
    }
}

impl RunConfig {
    /// Minimal configuration for a named ansatz.
    pub fn for_ansatz(ansatz: Ansatz, params: &[f64]) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            group: ansatz.group(),
            coupling: 1.0,
            volume: 1.0,
            mode: HolonomyMode::default(),
            field: Some(FieldSpec {
                ansatz: Some(ansatz),
                params: Some(params.to_vec()),
                coefficients: None,
            }),
            lattice: None,
            scan: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        positive("coupling", self.coupling)?;
        positive("volume", self.volume)?;
        if let Some(field) = &self.field {
            self.validate_field(field)?;
        }
        if let Some(l) = &self.lattice {
            self.validate_lattice(l)?;
        }
        if let Some(scan) = &self.scan {
            self.scan_spec_from(scan)?;
        }
        let t = &self.tolerances;
        if !(t.membership >= 0.0) {
            return Err(CliError::validation("tolerances.membership", "must be >= 0"));
        }
        if !(t.quadrature_rel > 0.0) {
            return Err(CliError::validation("tolerances.quadrature_rel", "must be > 0"));
        }
        if t.max_nodes < 15 {
            return Err(CliError::validation("tolerances.max_nodes", "must be at least 15"));
        }
        Ok(())
    }

    fn validate_field(&self, field: &FieldSpec) -> Result<(), CliError> {
        match (&field.ansatz, &field.coefficients) {
            (Some(ansatz), None) => {
                if ansatz.group() != self.group {
                    return Err(CliError::validation(
                        "field.ansatz",
                        format!("{ansatz} belongs to {}, config group is {}", ansatz.group(), self.group),
                    ));
                }
                if let Some(p) = &field.params {
                    if p.len() != ansatz.arity() {
                        return Err(CliError::validation(
                            "field.params",
                            format!(
                                "{ansatz} takes {} parameters ({}), got {}",
                                ansatz.arity(),
                                ansatz.param_names().join(", "),
                                p.len()
                            ),
                        ));
                    }
                    if p.iter().any(|x| !x.is_finite()) {
                        return Err(CliError::validation("field.params", "values must be finite"));
                    }
                } else if self.scan.is_none() {
                    return Err(CliError::validation("field.params", "required for a named ansatz"));
                }
                Ok(())
            }
            (None, Some(rows)) => {
                if field.params.is_some() {
                    return Err(CliError::validation("field.params", "not used with field.coefficients"));
                }
                let d = self.group.dim();
                if rows.len() != 3 || rows.iter().any(|r| r.len() != d) {
                    return Err(CliError::validation(
                        "field.coefficients",
                        format!("must be 3 rows of {d} numbers for {}", self.group),
                    ));
                }
                if rows.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(CliError::validation("field.coefficients", "values must be finite"));
                }
                Ok(())
            }
            (Some(_), Some(_)) => Err(CliError::validation(
                "field",
                "give either ansatz + params or coefficients, not both",
            )),
            (None, None) => Err(CliError::validation("field", "needs ansatz + params or coefficients")),
        }
    }

    fn validate_lattice(&self, l: &LatticeConfig) -> Result<(), CliError> {
        if l.size < 2 {
            return Err(CliError::validation("lattice.size", format!("must be >= 2, got {}", l.size)));
        }
        positive("lattice.spacing", l.spacing)?;
        if !(l.amplitude >= 0.0) || !l.amplitude.is_finite() {
            return Err(CliError::validation("lattice.amplitude", "must be a finite number >= 0"));
        }
        let n = l.size.pow(3) * 3 * self.group.dim();
        let check_len = |name: &str, v: &Option<Vec<f64>>| -> Result<(), CliError> {
            match v {
                Some(v) if v.len() != n => Err(CliError::validation(
                    format!("lattice.{name}"),
                    format!("must have L^3 * 3 * dim = {n} entries, got {}", v.len()),
                )),
                None => Err(CliError::validation(format!("lattice.{name}"), "required for explicit data")),
                _ => Ok(()),
            }
        };
        match l.background {
            BackgroundKind::Explicit => {
                check_len("background_a", &l.background_a)?;
                check_len("background_e", &l.background_e)?;
            }
            BackgroundKind::Constant => {
                if self.field.is_none() {
                    return Err(CliError::validation("field", "required for a constant lattice background"));
                }
                if let Some(rows) = &l.electric {
                    let d = self.group.dim();
                    if rows.len() != 3 || rows.iter().any(|r| r.len() != d) {
                        return Err(CliError::validation(
                            "lattice.electric",
                            format!("must be 3 rows of {d} numbers"),
                        ));
                    }
                }
            }
            _ => {}
        }
        if l.tangent == TangentKind::Explicit {
            check_len("tangent_a", &l.tangent_a)?;
            check_len("tangent_e", &l.tangent_e)?;
        }
        Ok(())
    }

    /// The constant field described by `[field]`, with coupling and volume.
    pub fn constant_field(&self) -> Result<ConstantField, CliError> {
        let field = self
            .field
            .as_ref()
            .ok_or_else(|| CliError::validation("field", "this command needs a [field] section"))?;
        let f = match (&field.ansatz, &field.coefficients) {
            (Some(ansatz), _) => {
                let params = field
                    .params
                    .as_ref()
                    .ok_or_else(|| CliError::validation("field.params", "required for this command"))?;
                ansatz.field(params)?
            }
            (None, Some(rows)) => ConstantField::from_rows(self.group, rows)?,
            (None, None) => return Err(CliError::validation("field", "needs ansatz + params or coefficients")),
        };
        Ok(f.with_coupling(self.coupling).with_volume(self.volume))
    }

    /// Short description of the field source for reports.
    pub fn field_label(&self) -> String {
        match &self.field {
            Some(FieldSpec {
                ansatz: Some(a),
                params: Some(p),
                ..
            }) => format!(
                "{a}({})",
                p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            ),
            Some(FieldSpec { ansatz: Some(a), .. }) => a.to_string(),
            Some(_) => "explicit".into(),
            None => "none".into(),
        }
    }

    pub fn scan_spec(&self) -> Result<ScanSpec, CliError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| CliError::validation("scan", "this command needs a [scan] section"))?;
        self.scan_spec_from(scan)
    }

    fn scan_spec_from(&self, scan: &ScanConfig) -> Result<ScanSpec, CliError> {
        let ansatz = self
            .field
            .as_ref()
            .and_then(|f| f.ansatz)
            .ok_or_else(|| CliError::validation("field.ansatz", "a scan needs a named ansatz"))?;
        let names = ansatz.param_names();
        for key in scan.axes.keys() {
            if !names.contains(&key.as_str()) {
                return Err(CliError::validation(
                    format!("scan.axes.{key}"),
                    format!("{ansatz} has parameters {}", names.join(", ")),
                ));
            }
        }
        let defaults = self.field.as_ref().and_then(|f| f.params.clone());
        let mut axes = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let axis = match (scan.axes.get(*name), &defaults) {
                (Some(axis), _) => *axis,
                (None, Some(p)) => Axis::Fixed(p[i]),
                (None, None) => {
                    return Err(CliError::validation(
                        format!("scan.axes.{name}"),
                        "missing, and no field.params to fall back on",
                    ))
                }
            };
            if let Axis::Range { steps, min, max } = axis {
                if steps < 2 || !min.is_finite() || !max.is_finite() {
                    return Err(CliError::validation(
                        format!("scan.axes.{name}"),
                        "needs finite min, max and steps >= 2",
                    ));
                }
            }
            axes.push(axis);
        }
        Ok(ScanSpec {
            ansatz,
            axes,
            coupling: self.coupling,
            volume: self.volume,
            cap: scan.cap,
        })
    }

    fn lattice_config(&self) -> Result<&LatticeConfig, CliError> {
        self.lattice
            .as_ref()
            .ok_or_else(|| CliError::validation("lattice", "this command needs a [lattice] section"))
    }

    /// Background and tangent pair, drawn from one generator seeded with
    /// `lattice.seed` (background first).
    pub fn lattice_data(&self) -> Result<(LatticeBackground, TangentPair), CliError> {
        let cfg = self.lattice_config()?;
        let lattice = Lattice::new(cfg.size, cfg.spacing)?.with_stencil(cfg.stencil);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let group = self.group;
        let bg = match cfg.background {
            BackgroundKind::Zero => LatticeBackground::zero(group, lattice),
            BackgroundKind::Random => LatticeBackground::random(group, lattice, &mut rng, cfg.amplitude),
            BackgroundKind::Constant => {
                let field = self.constant_field()?;
                let e = match &cfg.electric {
                    Some(rows) => ConstantField::from_rows(group, rows)?.a,
                    None => ConstantField::zero(group).a,
                };
                LatticeBackground::constant(group, lattice, &field.a, &e)?
            }
            BackgroundKind::Explicit => LatticeBackground::new(
                group,
                lattice,
                DVector::from_vec(cfg.background_a.clone().unwrap_or_default()),
                DVector::from_vec(cfg.background_e.clone().unwrap_or_default()),
            )?,
        }
        .with_coupling(self.coupling);
        let t = match cfg.tangent {
            TangentKind::Zero => bg.zero_tangent(),
            TangentKind::Random => bg.random_tangent(&mut rng, cfg.amplitude),
            TangentKind::Explicit => TangentPair::new(
                group,
                DVector::from_vec(cfg.tangent_a.clone().unwrap_or_default()),
                DVector::from_vec(cfg.tangent_e.clone().unwrap_or_default()),
            )?,
        };
        Ok((bg, t))
    }

    pub fn seed(&self) -> Option<u64> {
        self.lattice.as_ref().map(|l| l.seed)
    }
}

/// Rows of a constant field, as accepted by `field.coefficients`.
pub fn coefficient_rows(field: &ConstantField) -> Vec<Vec<f64>> {
    field
        .a
        .iter()
        .map(|x: &AlgebraElement| x.coeffs.iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("group = \"su2\"\n[field]\nansatz = \"SU2_DIAG\"\nparams = [0, 1, 1]\n").unwrap();
        assert_eq!(c.coupling, 1.0);
        assert_eq!(c.volume, 1.0);
        assert_eq!(c.mode, HolonomyMode::CurvatureSpan);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn negative_coupling_is_named() {
        let err = parse_config("group = \"su2\"\ncoupling = -1.0\n").unwrap_err();
        assert!(matches!(&err, CliError::Validation { field, .. } if field == "coupling"));
        assert!(err.to_string().contains("coupling"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("group = \"su2\"\ncoupling = \n").unwrap_err();
        assert!(matches!(err, CliError::Parse(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn arity_and_group_are_checked() {
        let e = parse_config("group = \"su3\"\n[field]\nansatz = \"SU3_IV\"\nparams = [1, 2, 3]\n").unwrap_err();
        assert!(matches!(&e, CliError::Validation { field, .. } if field == "field.params"));
        let e = parse_config("group = \"su3\"\n[field]\nansatz = \"SU2_DIAG\"\nparams = [1, 2, 3]\n").unwrap_err();
        assert!(matches!(&e, CliError::Validation { field, .. } if field == "field.ansatz"));
        let e = parse_config("group = \"su2\"\n[lattice]\nsize = 1\n").unwrap_err();
        assert!(matches!(&e, CliError::Validation { field, .. } if field == "lattice.size"));
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::for_ansatz(Ansatz::Su3III, &[0.5, 1.5, -2.0]);
        c.coupling = 0.75;
        c.mode = HolonomyMode::AmbroseSinger;
        c.lattice = Some(LatticeConfig {
            size: 3,
            spacing: 0.5,
            seed: 11,
            stencil: Stencil::Forward,
            background: BackgroundKind::Constant,
            tangent: TangentKind::Random,
            amplitude: 0.3,
            electric: Some(vec![vec![0.0; 8], vec![1.0; 8], vec![0.5; 8]]),
            background_a: None,
            background_e: None,
            tangent_a: None,
            tangent_e: None,
        });
        let mut axes = BTreeMap::new();
        axes.insert("a4".to_string(), Axis::Range { min: 0.0, max: 1.0, steps: 3 });
        axes.insert("a8".to_string(), Axis::Fixed(0.25));
        c.scan = Some(ScanConfig { cap: 99, axes });
        c.tolerances.membership = 1e-6;
        let text = c.to_toml();
        assert_eq!(parse_config(&text).unwrap(), c, "{text}");
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set("membership=1e-6").unwrap();
        t.set("max_nodes = 500").unwrap();
        assert_eq!((t.membership, t.max_nodes), (1e-6, 500));
        assert!(t.set("bogus=1").is_err());
        assert!(t.set("membership").is_err());
    }
}
