//! TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rgcluster::interaction::generate_translation_invariant;
use rgcluster::kernel::MAX_BLOCK_SIZE;
use rgcluster::{
    Blocking, Boundary, Direction, ExactCaps, Generator, Interaction, Kernel, Lattice, PolymerCaps,
    SiteSet,
};

use crate::error::{CliError, CliResult};
use crate::table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Checked against `window.len()` when given.
    #[serde(default)]
    pub dimension: Option<usize>,
    pub window: Vec<usize>,
    pub blocks: Vec<usize>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec>,
    #[serde(default)]
    pub caps: CapsSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn default_r() -> f64 {
    1.0
}

fn default_m() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKindSpec {
    Decimation,
    Majority,
    Constant,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKindSpec,
    /// Decimation position inside the block; defaults to the block origin.
    #[serde(default)]
    pub offset: Option<Vec<usize>>,
    /// Table file for custom kernels, relative to the config file.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// Explicit coupling: sites given by coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub sites: Vec<Vec<usize>>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapsSpec {
    /// Largest link count in enumerated hypergraphs.
    pub n_max: usize,
    /// Largest image support of a polymer.
    pub q_cap: usize,
    /// Largest cluster order.
    pub p_max: usize,
    pub hypergraph_guard: usize,
    pub max_sites: usize,
    pub max_image_sites: usize,
    pub max_range: usize,
}

impl Default for CapsSpec {
    fn default() -> Self {
        Self {
            n_max: 6,
            q_cap: 8,
            p_max: 6,
            hypergraph_guard: 10_000_000,
            max_sites: 24,
            max_image_sites: 20,
            max_range: 8,
        }
    }
}

impl CapsSpec {
    pub fn polymer(&self) -> PolymerCaps {
        PolymerCaps {
            max_links: self.n_max,
            max_support: self.q_cap,
            guard: self.hypergraph_guard,
        }
    }

    pub fn exact(&self) -> ExactCaps {
        ExactCaps {
            max_sites: self.max_sites,
            max_image_sites: self.max_image_sites,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Largest |W| in Jacobian tables.
    pub w_max: usize,
    /// Largest |Z| in coupling and Jacobian tables.
    pub z_max: usize,
    pub band_p: f64,
    pub band_q: f64,
    pub band_kc: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Distances for the sub-exponential profile.
    pub l_values: Vec<f64>,
    /// Direction file for `linearize`, relative to the config file.
    pub direction: Option<PathBuf>,
    pub fd_step: f64,
    /// Random image sets added to the KP general-form check.
    pub spot_samples: usize,
    pub series_tolerance: f64,
    /// Largest distance counted for n(E).
    pub e_max: usize,
    /// Overrides for the norm, D and S that would otherwise come from J.
    pub norm: Option<f64>,
    pub body_bound: Option<usize>,
    pub range: Option<usize>,
    /// Use the cluster expansion for Jacobians in `band-profile`.
    pub expansion: bool,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            w_max: 2,
            z_max: 2,
            band_p: 1.0,
            band_q: 1.0,
            band_kc: 1.0,
            alpha: 0.25,
            beta: 0.5,
            l_values: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            direction: None,
            fd_step: 1e-4,
            spot_samples: 16,
            series_tolerance: 1e-10,
            e_max: 3,
            norm: None,
            body_bound: None,
            range: None,
            expansion: false,
        }
    }
}

/// Overrides from the command line.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub p_max: Option<usize>,
    pub n_max: Option<usize>,
    pub q_cap: Option<usize>,
}

/// Config resolved against the file it came from.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub lattice: Lattice,
    pub blocking: Blocking,
    pub j: Interaction,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    fn check(&self, path: &Path) -> CliResult<()> {
        let bad = |msg: String| CliError::Config {
            path: path.to_path_buf(),
            msg,
        };
        if let Some(d) = self.dimension {
            if d != self.window.len() {
                return Err(bad(format!(
                    "dimension {d} but window has {} extents",
                    self.window.len()
                )));
            }
        }
        let c = &self.caps;
        for (name, v) in [
            ("n_max", c.n_max),
            ("q_cap", c.q_cap),
            ("p_max", c.p_max),
            ("hypergraph_guard", c.hypergraph_guard),
            ("max_sites", c.max_sites),
            ("max_image_sites", c.max_image_sites),
            ("max_range", c.max_range),
        ] {
            if v == 0 {
                return Err(bad(format!("cap {name} must be positive")));
            }
        }
        if !(self.m > 1.0 && self.r > 0.0 && self.m < self.r.exp()) {
            return Err(bad(format!(
                "M = {} must lie in (1, e^r) with r = {}",
                self.m, self.r
            )));
        }
        Ok(())
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

impl Experiment {
    pub fn load(path: &Path, overrides: Overrides) -> CliResult<Self> {
        let mut config = ExperimentConfig::parse(&read(path)?, path)?;
        if let Some(p) = overrides.p_max {
            config.caps.p_max = p;
        }
        if let Some(n) = overrides.n_max {
            config.caps.n_max = n;
        }
        if let Some(q) = overrides.q_cap {
            config.caps.q_cap = q;
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(config, base_dir, path)
    }

    pub fn from_config(
        config: ExperimentConfig,
        base_dir: PathBuf,
        origin: &Path,
    ) -> CliResult<Self> {
        config.check(origin)?;
        let lattice = Lattice::new(config.window.clone())?;
        let blocking = Blocking::new(lattice.clone(), config.blocks.clone())?;
        let mut j = generate_translation_invariant(
            &lattice,
            &config.generators,
            config.boundary,
            config.caps.max_range,
        )?;
        for (i, c) in config.couplings.iter().enumerate() {
            let mut sites = Vec::with_capacity(c.sites.len());
            for coords in &c.sites {
                sites.push(lattice.index(coords).ok_or_else(|| CliError::Config {
                    path: origin.to_path_buf(),
                    msg: format!("coupling {i}: site {coords:?} outside the window"),
                })?);
            }
            j.add(SiteSet::new(sites), c.value)?;
        }
        Ok(Self {
            config,
            base_dir,
            lattice,
            blocking,
            j,
        })
    }

    /// Built on demand so that `validate-kernel` can report a rejected table.
    pub fn kernel(&self) -> CliResult<Kernel> {
        build_kernel(&self.config.kernel, &self.config.blocks, &self.base_dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `||J||_r`, D and S, with config overrides. D and S are at least 1.
    pub fn norm_d_range(&self) -> CliResult<(f64, usize, usize)> {
        let a = &self.config.analysis;
        let norm = match a.norm {
            Some(n) => n,
            None => self.j.norm_r(self.config.r)?,
        };
        let d = a.body_bound.unwrap_or_else(|| self.j.body_bound()).max(1);
        let range = a.range.unwrap_or_else(|| self.j.range()).max(1);
        Ok((norm, d, range))
    }

    /// Reads `set<TAB>value` lines; `path` is used as given.
    pub fn read_direction(&self, path: &Path) -> CliResult<Direction> {
        let text = read(path)?;
        let mut k = Interaction::zero(self.lattice.clone());
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (set, value) = line
                .split_once('\t')
                .ok_or_else(|| rgcluster::Error::Parse {
                    line: n + 1,
                    msg: "expected `set<TAB>value`".into(),
                })?;
            let x = table::parse_set(&self.lattice, set, n + 1)?;
            let v: f64 = value.trim().parse().map_err(|e| rgcluster::Error::Parse {
                line: n + 1,
                msg: format!("bad value {value:?}: {e}"),
            })?;
            k.add(x, v)?;
        }
        Ok(Direction(k))
    }
}

pub fn build_kernel(spec: &KernelSpec, blocks: &[usize], base_dir: &Path) -> CliResult<Kernel> {
    let s: usize = blocks.iter().product();
    let kernel = match spec.kind {
        KernelKindSpec::Decimation => {
            let offset = spec.offset.clone().unwrap_or_else(|| vec![0; blocks.len()]);
            Kernel::decimation(blocks, &offset)?
        }
        KernelKindSpec::Majority => Kernel::majority(s)?,
        KernelKindSpec::Constant => Kernel::constant(s)?,
        KernelKindSpec::Custom => {
            let (ks, table) = read_kernel_table(spec, base_dir)?;
            if ks != s {
                return Err(rgcluster::Error::Config(format!(
                    "kernel table is for blocks of {ks} sites, blocking has {s}"
                ))
                .into());
            }
            Kernel::custom(s, table)?
        }
    };
    Ok(kernel)
}

pub fn read_kernel_table(spec: &KernelSpec, base_dir: &Path) -> CliResult<(usize, Vec<[f64; 2]>)> {
    let path = spec
        .path
        .as_ref()
        .ok_or_else(|| rgcluster::Error::Config("custom kernel needs `path`".into()))?;
    let full = if path.is_absolute() {
        path.clone()
    } else {
        base_dir.join(path)
    };
    let (s, table) = Kernel::parse_table(&read(&full)?)?;
    if s > MAX_BLOCK_SIZE {
        return Err(rgcluster::Error::Config(format!(
            "kernel blocks of {s} sites exceed {MAX_BLOCK_SIZE}"
        ))
        .into());
    }
    Ok((s, table))
}
