//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "product"     # product | intertwine | trace | riemann | norm_bound | torus_relations | star_table
//! n = 1
//! k_min = 8
//! k_max = 256
//! k_rule = "powers_of_two"   # or "linear" with k_step
//! order = 1                  # truncation order, or "exact"
//! seed = 7
//! norms = ["l2_operator", "l1_operator", "linf_operator"]
//!
//! [f]
//! random_bandwidth = 1
//!
//! [g]
//! expr = "exp(cos(2*pi*x1))*cos(2*pi*y1)"
//! bandwidth = 12
//! grid = 64
//! ```
//!
//! Unknown keys are rejected. After [`parse_config`] every defaulted field is
//! filled in, so serialising the config gives the canonical echo that reports
//! embed and hash.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{random_trig_poly, NormKind};
use crate::error::{Error, Result};
use crate::func_expr::{self, Expr, ProjectionSpec};
use crate::quantization::{Polarization, MAX_DENSE_DIM};
use crate::star_products::{Orientation, MAX_ORDER};
use crate::trig_poly::{TermRecord, TrigPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Product,
    Intertwine,
    Trace,
    Riemann,
    NormBound,
    TorusRelations,
    StarTable,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Product => "product",
            ExperimentKind::Intertwine => "intertwine",
            ExperimentKind::Trace => "trace",
            ExperimentKind::Riemann => "riemann",
            ExperimentKind::NormBound => "norm_bound",
            ExperimentKind::TorusRelations => "torus_relations",
            ExperimentKind::StarTable => "star_table",
        }
    }

    fn uses_dense(self) -> bool {
        matches!(
            self,
            ExperimentKind::Product
                | ExperimentKind::Intertwine
                | ExperimentKind::NormBound
                | ExperimentKind::TorusRelations
        )
    }

    fn needs_f(self) -> bool {
        !matches!(self, ExperimentKind::TorusRelations)
    }

    fn needs_g(self) -> bool {
        matches!(self, ExperimentKind::Product | ExperimentKind::StarTable)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    #[default]
    PowersOfTwo,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactTag {
    Exact,
}

/// Truncation order `N`, or the closed-form (untruncated) series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Order {
    Truncated(usize),
    Exact(ExactTag),
}

impl Default for Order {
    fn default() -> Self {
        Order::Truncated(0)
    }
}

impl Order {
    pub fn truncation(self) -> Option<usize> {
        match self {
            Order::Truncated(n) => Some(n),
            Order::Exact(_) => None,
        }
    }
}

/// One test function: an expression pair, an explicit coefficient list, or a seeded random draw.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr_im: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_bandwidth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermRecord>>,
}

/// A validated [`FunctionSpec`].
#[derive(Clone, Debug)]
pub enum FunctionSource {
    Poly(TrigPoly),
    Expr {
        re: Expr,
        im: Option<Expr>,
        projection: ProjectionSpec,
    },
    Random {
        bandwidth: usize,
    },
}

impl FunctionSource {
    /// Realises the function as a trigonometric polynomial; random draws consume `rng`.
    pub fn to_poly(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<TrigPoly> {
        match self {
            FunctionSource::Poly(p) => Ok(p.clone()),
            FunctionSource::Expr { re, im, projection } => {
                func_expr::project_complex(re, im.as_ref(), n, projection)
            }
            FunctionSource::Random { bandwidth } => Ok(random_trig_poly(n, *bandwidth, rng)),
        }
    }
}

impl FunctionSpec {
    fn validate(&mut self, path: &str, n: usize) -> Result<FunctionSource> {
        let sources = [self.expr.is_some(), self.terms.is_some(), self.random_bandwidth.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources != 1 {
            return Err(Error::config(
                path,
                "exactly one of `expr`, `terms`, `random_bandwidth` is required",
            ));
        }
        if let Some(terms) = &self.terms {
            for (i, t) in terms.iter().enumerate() {
                if t.p.len() != n || t.q.len() != n {
                    return Err(Error::config(
                        format!("{}.terms[{}]", path, i),
                        format!("frequency vectors must have length n = {}", n),
                    ));
                }
            }
            if self.expr_im.is_some() || self.bandwidth.is_some() || self.grid.is_some() {
                return Err(Error::config(path, "`terms` cannot be combined with expression fields"));
            }
            return Ok(FunctionSource::Poly(TrigPoly::from_records(n, terms)?));
        }
        if let Some(b) = self.random_bandwidth {
            if self.expr_im.is_some() || self.bandwidth.is_some() || self.grid.is_some() {
                return Err(Error::config(
                    path,
                    "`random_bandwidth` cannot be combined with expression fields",
                ));
            }
            return Ok(FunctionSource::Random { bandwidth: b });
        }
        let parse = |field: &str, src: &str| -> Result<Expr> {
            let e = func_expr::parse(src)
                .map_err(|e| Error::config(format!("{}.{}", path, field), e.to_string()))?;
            if e.required_dim() > n {
                return Err(Error::config(
                    format!("{}.{}", path, field),
                    format!("uses a variable beyond n = {}", n),
                ));
            }
            Ok(e)
        };
        let re = parse("expr", self.expr.as_deref().unwrap_or_default())?;
        let im = match &self.expr_im {
            Some(s) => Some(parse("expr_im", s)?),
            None => None,
        };
        let bandwidth = self
            .bandwidth
            .ok_or_else(|| Error::config(format!("{}.bandwidth", path), "required with `expr`"))?;
        let grid = *self
            .grid
            .get_or_insert(ProjectionSpec::with_default_grid(bandwidth).grid);
        let projection = ProjectionSpec::new(bandwidth, grid)
            .map_err(|e| Error::config(format!("{}.grid", path), e.to_string()))?;
        Ok(FunctionSource::Expr { re, im, projection })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_csv")]
    pub csv: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            report: default_report(),
            csv: default_csv(),
        }
    }
}

fn default_report() -> String {
    "report.toml".into()
}

fn default_csv() -> String {
    "errors.csv".into()
}

fn default_n() -> usize {
    1
}

fn default_step() -> usize {
    1
}

fn default_norms() -> Vec<NormKind> {
    vec![NormKind::L2Operator]
}

fn default_orientation() -> Orientation {
    Orientation::Star
}

fn default_polarization() -> Polarization {
    Polarization::PT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub id: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub k_min: usize,
    #[serde(default)]
    pub k_max: usize,
    #[serde(default)]
    pub k_rule: KRule,
    #[serde(default = "default_step")]
    pub k_step: usize,
    #[serde(default)]
    pub order: Order,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    #[serde(default = "default_norms")]
    pub norms: Vec<NormKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_power: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FunctionSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Parses and validates a config, filling defaults.
pub fn parse_config(source: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig =
        toml::from_str(source).map_err(|e| Error::config("<root>", e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Checks every field and fills the defaults that depend on other fields.
    pub fn validate(&mut self) -> Result<()> {
        if self.id.is_empty() {
            self.id = self.experiment.name().to_string();
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        let (default_min, default_max) = match self.n {
            1 => (8, 256),
            2 => (4, 32),
            _ => (2, 16),
        };
        if self.k_min == 0 {
            self.k_min = default_min;
        }
        if self.k_max == 0 {
            self.k_max = default_max.max(self.k_min);
        }
        if self.k_min < 2 {
            return Err(Error::config("k_min", "must be at least 2"));
        }
        if self.k_max < self.k_min {
            return Err(Error::config("k_max", "must be at least k_min"));
        }
        if self.k_step == 0 {
            return Err(Error::config("k_step", "must be positive"));
        }
        if let Order::Truncated(order) = self.order {
            if order > MAX_ORDER {
                return Err(Error::config("order", format!("must be at most {}", MAX_ORDER)));
            }
        }
        if self.norms.is_empty() {
            return Err(Error::config("norms", "at least one norm kind is required"));
        }
        if self.experiment.uses_dense() {
            let dim = (self.k_max as u128).pow(self.n as u32);
            if dim > MAX_DENSE_DIM as u128 {
                return Err(Error::config(
                    "k_max",
                    format!("k_max^n = {} exceeds the dense cap {}", dim, MAX_DENSE_DIM),
                ));
            }
        }
        let n = self.n;
        match (&mut self.f, self.experiment.needs_f()) {
            (Some(f), _) => {
                f.validate("f", n)?;
            }
            (None, true) => return Err(Error::config("f", "required for this experiment")),
            _ => {}
        }
        match (&mut self.g, self.experiment.needs_g()) {
            (Some(g), _) => {
                g.validate("g", n)?;
            }
            (None, true) => return Err(Error::config("g", "required for this experiment")),
            _ => {}
        }
        Ok(())
    }

    /// The `k` values of the sweep, increasing.
    pub fn levels(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut k = self.k_min;
        while k <= self.k_max {
            out.push(k);
            k = match self.k_rule {
                KRule::PowersOfTwo => k * 2,
                KRule::Linear => k + self.k_step,
            };
        }
        out
    }

    pub fn f_source(&self) -> Result<Option<FunctionSource>> {
        let n = self.n;
        self.f.clone().map(|mut f| f.validate("f", n)).transpose()
    }

    pub fn g_source(&self) -> Result<Option<FunctionSource>> {
        let n = self.n;
        self.g.clone().map(|mut g| g.validate("g", n)).transpose()
    }

    /// Realises `f` and `g` in that order from one seeded stream.
    pub fn functions(&self) -> Result<(Option<TrigPoly>, Option<TrigPoly>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let f = self
            .f_source()?
            .map(|s| s.to_poly(self.n, &mut rng))
            .transpose()?;
        let g = self
            .g_source()?
            .map(|s| s.to_poly(self.n, &mut rng))
            .transpose()?;
        Ok((f, g))
    }

    /// Canonical serialisation used for echoing and hashing.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`Self::canonical_toml`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }
}
