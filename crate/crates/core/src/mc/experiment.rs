use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::estimators::*;
use super::{Estimate, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_Z_MAX};
use crate::cones::{linear_subspace_cone, orthant, weyl_chamber_b, ConeVRep};
use crate::error::{Error, Result};
use crate::exact::{
    default_mgf_grid, default_steiner_grid, orthant_table, steiner_beta_cdf, subspace_table,
    wendel_absorption, weyl_b_table, ExactTable,
};
use crate::linalg::RngStream;

/// Absolute tolerance on recovered intrinsic volumes.
pub const VOLUME_TOLERANCE: f64 = 0.02;

pub const EXPERIMENTS: [&str; 10] = [
    "absorption-wendel",
    "absorption-weyl",
    "grassmann-orthant",
    "theorem-655",
    "solid-angle",
    "persistence-v0",
    "intrinsic-mgf",
    "intrinsic-steiner",
    "simplex-angle-sums",
    "conditional-1151",
];

/// Single-estimator names accepted by [`run_experiment`] next to the
/// experiments, each sharing its logic with one experiment.
pub const ESTIMATE_KINDS: [(&str, &str); 7] = [
    ("absorption", "absorption-weyl"),
    ("grassmann", "grassmann-orthant"),
    ("solid-angle", "solid-angle"),
    ("persistence", "persistence-v0"),
    ("intrinsic-mgf", "intrinsic-mgf"),
    ("intrinsic-steiner", "intrinsic-steiner"),
    ("angle-sums", "simplex-angle-sums"),
];

fn canonical_name(name: &str) -> Option<&'static str> {
    EXPERIMENTS
        .iter()
        .copied()
        .find(|e| *e == name)
        .or_else(|| {
            ESTIMATE_KINDS
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, e)| *e)
        })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConeFamily {
    Orthant {
        n: usize,
    },
    WeylB {
        n: usize,
    },
    /// Span of the first `d` coordinate axes of ℝⁿ.
    Subspace {
        d: usize,
        n: usize,
    },
    /// Tangent cone of the regular simplex with `n` vertices at an `ell`-face.
    SimplexTangent {
        n: usize,
        ell: usize,
    },
    Custom,
}

/// A parsed cone literal: the cone itself plus the family it came from,
/// which decides whether exact references are available.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeLiteral {
    pub family: ConeFamily,
    pub cone: ConeVRep,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomCone {
    ambient_dim: usize,
    generators: Vec<Vec<f64>>,
}

fn parse_counts(body: &str, expected: usize, literal: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != expected {
        return Err(Error::InvalidInput(format!(
            "cone literal `{literal}` needs {expected} comma-separated integers"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<usize>().map_err(|_| {
                Error::InvalidInput(format!("cone literal `{literal}`: `{p}` is not a count"))
            })
        })
        .collect()
}

impl ConeLiteral {
    pub fn from_family(family: ConeFamily) -> Result<Self> {
        let cone = match family {
            ConeFamily::Orthant { n } => orthant(n)?,
            ConeFamily::WeylB { n } => weyl_chamber_b(n)?,
            ConeFamily::Subspace { d, n } => {
                if d == 0 || d > n {
                    return Err(Error::InvalidInput(format!(
                        "subspace literal needs 1 <= d <= n, got d = {d}, n = {n}"
                    )));
                }
                let basis: Vec<Vec<f64>> = (0..d)
                    .map(|i| (0..n).map(|r| (r == i) as u8 as f64).collect())
                    .collect();
                linear_subspace_cone(&basis)?
            }
            ConeFamily::SimplexTangent { n, ell } => {
                if n < 2 || ell + 2 > n {
                    return Err(Error::InvalidInput(format!(
                        "simplex tangent cone needs n >= 2 and ell <= n-2, got n = {n}, ell = {ell}"
                    )));
                }
                regular_simplex_tangent_cone(n, ell)?
            }
            ConeFamily::Custom => {
                return Err(Error::InvalidInput(
                    "custom cones need explicit generators".into(),
                ))
            }
        };
        Ok(Self { family, cone })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => s.parse(),
            Value::Object(_) => {
                let c: CustomCone = serde_json::from_value(value.clone())
                    .map_err(|e| Error::InvalidInput(format!("cone object: {e}")))?;
                Ok(Self {
                    family: ConeFamily::Custom,
                    cone: ConeVRep::new(c.ambient_dim, c.generators)?,
                })
            }
            _ => Err(Error::InvalidInput(
                "cone must be a literal string or an object with ambient_dim and generators".into(),
            )),
        }
    }

    pub fn exact_table(&self) -> Option<ExactTable> {
        match self.family {
            ConeFamily::Orthant { n } => orthant_table(n).ok(),
            ConeFamily::WeylB { n } => weyl_b_table(n).ok(),
            ConeFamily::Subspace { d, n } => subspace_table(d, n).ok(),
            ConeFamily::SimplexTangent { .. } | ConeFamily::Custom => None,
        }
    }

    /// Canonical literal, used in reports.
    pub fn to_json(&self) -> Value {
        match self.family {
            ConeFamily::Custom => json!({
                "ambient_dim": self.cone.ambient_dim(),
                "generators": self.cone.generators(),
            }),
            _ => Value::String(self.to_string()),
        }
    }
}

impl fmt::Display for ConeLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            ConeFamily::Orthant { n } => write!(f, "orthant:{n}"),
            ConeFamily::WeylB { n } => write!(f, "weyl-b:{n}"),
            ConeFamily::Subspace { d, n } => write!(f, "subspace:{d},{n}"),
            ConeFamily::SimplexTangent { n, ell } => write!(f, "simplex-tangent:{n},{ell}"),
            ConeFamily::Custom => write!(f, "{}", self.to_json()),
        }
    }
}

impl FromStr for ConeLiteral {
    type Err = Error;

    /// `orthant:n`, `weyl-b:n`, `subspace:d,n`, `simplex-tangent:n,ell`, or a
    /// JSON object `{"ambient_dim": n, "generators": [[…], …]}`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let v: Value = serde_json::from_str(s)
                .map_err(|e| Error::InvalidInput(format!("cone JSON: {e}")))?;
            return Self::from_json(&v);
        }
        let (name, body) = s.split_once(':').ok_or_else(|| {
            Error::InvalidInput(format!("cone literal `{s}` must look like family:params"))
        })?;
        let family = match name {
            "orthant" => ConeFamily::Orthant {
                n: parse_counts(body, 1, s)?[0],
            },
            "weyl-b" => ConeFamily::WeylB {
                n: parse_counts(body, 1, s)?[0],
            },
            "subspace" => {
                let v = parse_counts(body, 2, s)?;
                ConeFamily::Subspace { d: v[0], n: v[1] }
            }
            "simplex-tangent" => {
                let v = parse_counts(body, 2, s)?;
                ConeFamily::SimplexTangent { n: v[0], ell: v[1] }
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown cone family `{name}` (expected orthant, weyl-b, subspace, simplex-tangent)"
                )))
            }
        };
        Self::from_family(family)
    }
}

fn default_samples() -> u64 {
    DEFAULT_SAMPLES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_z_max() -> f64 {
    DEFAULT_Z_MAX
}

/// Input document for [`run_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: String,
    #[serde(default)]
    pub cone: Option<Value>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub j: Option<usize>,
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    #[serde(default)]
    pub mgf_mode: Option<MgfMode>,
}

impl ExperimentSpec {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            cone: None,
            n: None,
            k: None,
            j: None,
            ell: None,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            r_grid: None,
            z_max: DEFAULT_Z_MAX,
            mgf_mode: None,
        }
    }
}

/// Result of one experiment. Byte-identical for identical specs unless
/// `wall_time_ms` is filled in by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub estimates: Vec<Estimate>,
    /// Sample counts worth surfacing (full-space and degenerate images).
    pub diagnostics: BTreeMap<String, u64>,
    pub pass: bool,
    pub wall_time_ms: Option<u64>,
}

/// Reports for a sequence of experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub reports: Vec<ExperimentReport>,
    pub pass: bool,
}

impl BundleReport {
    pub fn new(reports: Vec<ExperimentReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        Self { reports, pass }
    }
}

struct Run<'a> {
    spec: &'a ExperimentSpec,
    stream: RngStream,
    params: BTreeMap<String, Value>,
    estimates: Vec<Estimate>,
    diagnostics: BTreeMap<String, u64>,
}

impl Run<'_> {
    fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("plain data"),
        );
    }

    fn cone(&mut self, default: &str) -> Result<ConeLiteral> {
        let lit = match &self.spec.cone {
            Some(v) => ConeLiteral::from_json(v)?,
            None => default.parse()?,
        };
        self.param("cone", lit.to_json());
        Ok(lit)
    }

    fn count(&mut self, key: &str, given: Option<usize>, default: usize) -> usize {
        let v = given.unwrap_or(default);
        self.param(key, v);
        v
    }

    fn push(&mut self, e: Estimate, exact: Option<f64>) {
        self.estimates.push(match exact {
            Some(x) => e.with_exact(x),
            None => e,
        });
    }

    fn push_tally(&mut self, prefix: &str, r: &ImageEstimate) {
        *self
            .diagnostics
            .entry(format!("{prefix}full_space_samples"))
            .or_default() += r.tally.full_space;
        *self
            .diagnostics
            .entry(format!("{prefix}degenerate_samples"))
            .or_default() += r.tally.degenerate;
    }

    fn sub(&self, label: &str) -> RngStream {
        self.stream.derive(label)
    }
}

fn gamma(table: &Option<ExactTable>, j: usize) -> Option<f64> {
    table.as_ref().map(|t| t.angle_profile().get(j))
}

/// Runs one named experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let Some(name) = canonical_name(&spec.experiment) else {
        return Err(Error::InvalidInput(format!(
            "unknown experiment `{}`; expected one of {}",
            spec.experiment,
            EXPERIMENTS.join(", ")
        )));
    };
    if spec.z_max.is_nan() || spec.z_max <= 0.0 {
        return Err(Error::InvalidInput("z_max must be positive".into()));
    }
    let mut run = Run {
        spec,
        stream: RngStream::new(spec.seed, 0).derive(&spec.experiment),
        params: BTreeMap::new(),
        estimates: Vec::new(),
        diagnostics: BTreeMap::new(),
    };
    run.param("samples", spec.samples);
    run.param("z_max", spec.z_max);
    let n_samples = spec.samples;

    match name {
        "absorption-wendel" => {
            let n = run.count("n", spec.n, 4);
            let k = run.count("k", spec.k, 2);
            let exact = wendel_absorption(n, k)?;
            let e = estimate_absorption(&orthant(n)?, k, n_samples, run.sub("absorption"))?;
            run.push(e, Some(exact));
        }
        "absorption-weyl" => {
            let lit = run.cone("weyl-b:3")?;
            let k = run.count("k", spec.k, 1);
            let e = estimate_absorption(&lit.cone, k, n_samples, run.sub("absorption"))?;
            run.push(e, gamma(&lit.exact_table(), k));
        }
        "grassmann-orthant" => {
            let lit = run.cone("orthant:3")?;
            let table = lit.exact_table();
            let js: Vec<usize> = match spec.j {
                Some(j) => vec![run.count("j", Some(j), j)],
                None => (1..lit.cone.ambient_dim()).collect(),
            };
            for j in js {
                let e = estimate_grassmann_subspace(
                    &lit.cone,
                    j,
                    n_samples,
                    run.sub(&format!("j={j}")),
                )?;
                run.push(e, gamma(&table, j));
            }
        }
        "theorem-655" => {
            let lit = run.cone("weyl-b:3")?;
            let k = run.count("k", spec.k, 2);
            let j = run.count("j", spec.j, 1);
            let r =
                estimate_expected_grassmann_image(&lit.cone, k, j, n_samples, run.sub("image"))?;
            run.push_tally("", &r);
            run.push(r.estimate, gamma(&lit.exact_table(), j));
        }
        "solid-angle" => {
            let lit = run.cone("orthant:3")?;
            let table = lit.exact_table();
            let alpha = table
                .as_ref()
                .map(|t| *t.intrinsic_volumes().values.last().expect("n >= 1"));
            let e = estimate_solid_angle(&lit.cone, n_samples, run.sub("alpha"))?;
            run.push(e, alpha);
            let ks: Vec<usize> = match spec.k {
                Some(k) => vec![run.count("k", Some(k), k)],
                None => (1..=lit.cone.dim()).collect(),
            };
            for k in ks {
                let r = estimate_expected_solid_angle_image(
                    &lit.cone,
                    k,
                    n_samples,
                    run.sub(&format!("k={k}")),
                )?;
                run.push_tally(&format!("k={k}: "), &r);
                let exact = table.as_ref().map(|_| {
                    0.5 * (gamma(&table, k).unwrap_or(0.0) + gamma(&table, k - 1).unwrap_or(0.0))
                });
                run.push(r.estimate, exact);
            }
        }
        "persistence-v0" => {
            let lit = run.cone("orthant:3")?;
            let exact = lit.exact_table().map(|t| t.intrinsic_volumes().values[0]);
            let e = estimate_persistence_v0(&lit.cone, n_samples, run.sub("persistence"))?;
            run.push(e, exact);
        }
        "intrinsic-mgf" | "intrinsic-steiner" => {
            let lit = run.cone("orthant:3")?;
            let n = lit.cone.ambient_dim();
            let mgf = name == "intrinsic-mgf";
            let grid = spec.r_grid.clone().unwrap_or_else(|| {
                if mgf {
                    default_mgf_grid(n)
                } else {
                    default_steiner_grid()
                }
            });
            run.param("r_grid", &grid);
            let rec = if mgf {
                let mode = spec.mgf_mode.unwrap_or_default();
                run.param("mgf_mode", mode);
                estimate_intrinsic_volumes_mgf(&lit.cone, &grid, n_samples, run.sub("mgf"), mode)?
            } else {
                estimate_intrinsic_volumes_steiner(&lit.cone, &grid, n_samples, run.sub("steiner"))?
            };
            let exact = lit.exact_table().map(|t| t.intrinsic_volumes().values);
            for (row, &r) in rec.rows.into_iter().zip(&grid) {
                let reference = match &exact {
                    Some(v) if mgf => Some(
                        v.iter()
                            .enumerate()
                            .map(|(k, x)| r.powi(k as i32) * x)
                            .sum(),
                    ),
                    Some(v) => Some(
                        v.iter()
                            .enumerate()
                            .map(|(k, x)| Ok(steiner_beta_cdf(k, n, r)? * x))
                            .sum::<Result<f64>>()?,
                    ),
                    None => None,
                };
                run.push(row, reference);
            }
            for (k, &v) in rec.volumes.values.iter().enumerate() {
                let e = Estimate::point(&format!("upsilon_{k}"), v, n_samples);
                match &exact {
                    Some(x) => run.push(e.with_tolerance(VOLUME_TOLERANCE), Some(x[k])),
                    None => run.push(e, None),
                }
            }
        }
        "simplex-angle-sums" => {
            let n = run.count("n", spec.n, 3);
            let k = run.count("k", spec.k, 2);
            let ell = run.count("ell", spec.ell, 0);
            let j = run.count("j", spec.j, 1);
            let r = estimate_face_angle_sums(n, k, ell, j, n_samples, run.sub("angle-sums"))?;
            run.push(r.gaussian, None);
            run.push(r.regular, None);
            run.push(r.difference, None);
        }
        "conditional-1151" => {
            let lit = run.cone("orthant:3")?;
            let k = run.count("k", spec.k, 2);
            let j = run.count("j", spec.j, 1);
            let table = lit.exact_table();
            let exact = gamma(&table, j).zip(gamma(&table, k)).map(|(a, b)| a - b);
            let r =
                estimate_conditional_grassmann_image(&lit.cone, k, j, n_samples, run.sub("image"))?;
            run.push_tally("", &r);
            run.push(r.estimate, exact);
        }
        _ => unreachable!("checked against EXPERIMENTS"),
    }

    let z_max = spec.z_max;
    for e in &mut run.estimates {
        e.check(z_max);
    }
    let pass = run.estimates.iter().all(|e| e.pass);
    Ok(ExperimentReport {
        experiment: spec.experiment.clone(),
        params: run.params,
        seed: spec.seed,
        estimates: run.estimates,
        diagnostics: run.diagnostics,
        pass,
        wall_time_ms: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        for s in [
            "orthant:3",
            "weyl-b:2",
            "subspace:2,3",
            "simplex-tangent:4,1",
        ] {
            let lit: ConeLiteral = s.parse().unwrap();
            assert_eq!(lit.to_string(), s);
        }
        let lit: ConeLiteral = r#"{"ambient_dim": 2, "generators": [[1, 0], [1, 1]]}"#
            .parse()
            .unwrap();
        assert_eq!(lit.family, ConeFamily::Custom);
        assert_eq!(lit.cone.num_generators(), 2);
        assert!(lit.exact_table().is_none());
    }

    #[test]
    fn malformed_literals() {
        for s in [
            "orthant",
            "orthant:x",
            "orthant:0",
            "cube:3",
            "subspace:4,3",
            "weyl-b:2,3",
            "{bad",
        ] {
            assert!(s.parse::<ConeLiteral>().is_err(), "{s}");
        }
    }

    #[test]
    fn spec_defaults_from_json() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"experiment": "theorem-655"}"#).unwrap();
        assert_eq!(spec, ExperimentSpec::new("theorem-655"));
        assert!(
            serde_json::from_str::<ExperimentSpec>(r#"{"experiment": "x", "bogus": 1}"#).is_err()
        );
    }

    #[test]
    fn unknown_experiment() {
        assert!(matches!(
            run_experiment(&ExperimentSpec::new("nope")),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn conditional_orthant() {
        let mut spec = ExperimentSpec::new("conditional-1151");
        spec.samples = 20_000;
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.estimates[0].exact, Some(0.5));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn reports_are_reproducible() {
        let mut spec = ExperimentSpec::new("persistence-v0");
        spec.samples = 20_000;
        spec.seed = 9;
        let a = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
