//! Experiment configuration: every flag of every subcommand, serialisable so a
//! run can be recorded next to its outputs and replayed with `--config`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use cdi_core::spectra::MatrixKind;
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// k nearest neighbours in the unit box, fixed k.
    Knnr,
    /// k nearest neighbours, each vertex drawing k from kmin..=kmax.
    KnnrVariable,
    /// Uniform random targets, fixed outdegree k.
    Er,
    /// Uniform random targets, outdegree drawn from kmin..=kmax.
    ErVariable,
    /// Nearest neighbours in a 1 x 1 x thickness prism.
    Flock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Influence communities seeding the two-stage optimiser.
    Cdi,
    /// Spectral k-means clusters seeding the same optimiser.
    Kmeans,
    /// Multistart search over the whole simplex.
    Direct,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cdi => "cdi",
            Method::Kmeans => "kmeans",
            Method::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fit {
    Powerlaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Mean number of matching communities (higher is more similar).
    Cdi,
    /// Edge edit distance on the shared voxel grid (lower is more similar).
    Edit,
    /// Frobenius distance on the shared voxel grid (lower is more similar).
    Frobenius,
}

/// A list of vertex counts: `a..b` (step 100), `a..b:step`, or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sizes(pub Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = |_| format!("bad size list {s:?}");
        if let Some((lo, rest)) = s.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, step.parse::<usize>().map_err(bad)?),
                None => (rest, 100),
            };
            let lo: usize = lo.parse().map_err(bad)?;
            let hi: usize = hi.parse().map_err(bad)?;
            if step == 0 || lo > hi {
                return Err(format!("empty size range {s:?}"));
            }
            return Ok(Sizes((lo..=hi).step_by(step).collect()));
        }
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(bad))
            .collect::<std::result::Result<_, _>>()
            .map(Sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "knnr")]
    pub family: Family,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Fixed outdegree (knnr, er, flock).
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Box dimensionality for knnr families (unit sides).
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Smallest-to-largest side ratio of the flock prism.
    #[arg(long, default_value_t = 0.2)]
    pub thickness: f64,
    /// Global edge weight.
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CdiArgs {
    /// Edge list (a `.pos` sidecar is picked up when present).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub vectors: usize,
    #[arg(long, default_value = "laplacian")]
    pub matrix: MatrixKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Edge list to optimise; writes the allocation as JSON.
    #[arg(long = "in", conflicts_with = "flock", required_unless_present = "flock")]
    pub input: Option<PathBuf>,
    /// Flock size for an outdegree sweep; writes a (k, lambda1) CSV.
    #[arg(long)]
    pub flock: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub thickness: f64,
    /// Outdegrees of the flock sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,7,15,25,50")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub fit: Option<Fit>,
    #[arg(long, value_enum, default_value = "cdi")]
    pub method: Method,
    #[arg(long, default_value_t = 3)]
    pub vectors: usize,
    /// Starting points of the direct optimiser.
    #[arg(long, default_value_t = 3)]
    pub multistart: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON with a `c` array, e.g. the output of `optimize`; uniform input
    /// on every vertex when omitted.
    #[arg(long)]
    pub perturbation: Option<PathBuf>,
    /// Consensus target of the perturbed vertices.
    #[arg(long, default_value_t = 1.0)]
    pub target: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    /// Seed of the initial states, uniform in [0, 1).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "knnr")]
    pub family: Family,
    #[arg(long, default_value = "100..1000")]
    pub sizes: Sizes,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = 10)]
    pub per_size: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cdi,kmeans,direct")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    pub vectors: usize,
    #[arg(long, default_value_t = 3)]
    pub multistart: usize,
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MatchArgs {
    /// First scan (edge list with 3D `.pos` sidecar); writes a JSON report.
    #[arg(long, requires = "b", required_unless_present = "synthetic")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Number of synthetic subjects, each scanned twice; writes the
    /// subject-by-subject similarity matrix as CSV.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub synthetic: Option<usize>,
    #[arg(long, value_enum, default_value = "cdi")]
    pub metric: Metric,
    #[arg(long, default_value_t = 8)]
    pub vectors: usize,
    /// Eigenvector entry a voxel needs to stay in its community.
    #[arg(long, default_value_t = 0.01)]
    pub entry_threshold: f64,
    /// Probability that a voxel moves by one grid step in a rescan.
    #[arg(long, default_value_t = 0.2)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.05)]
    pub dropout: f64,
    /// Subject whose second scan loses more voxels.
    #[arg(long)]
    pub heavy_subject: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub heavy_dropout: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BisectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Number of parts, a power of two.
    #[arg(long, default_value_t = 8)]
    pub parts: usize,
    /// Entry magnitude both sides of a final split must reach.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a graph and write it as an edge list.
    Generate(GenerateArgs),
    /// Detect communities of dynamical influence.
    Cdi(CdiArgs),
    /// Optimise a leadership perturbation, or sweep flock outdegrees.
    Optimize(OptimizeArgs),
    /// Integrate the perturbed consensus dynamics.
    Simulate(SimulateArgs),
    /// Speed-ratio sweep of the optimisers over generated graphs.
    Compare(CompareArgs),
    /// Community matching between scans.
    Match(MatchArgs),
    /// Recursive spectral bisection.
    Bisect(BisectArgs),
}

impl Command {
    /// The primary output file of the run.
    pub fn out(&self) -> &Path {
        match self {
            Command::Generate(a) => &a.out,
            Command::Cdi(a) => &a.out,
            Command::Optimize(a) => &a.out,
            Command::Simulate(a) => &a.out,
            Command::Compare(a) => &a.out,
            Command::Match(a) => &a.out,
            Command::Bisect(a) => &a.out,
        }
    }
}

/// A complete, replayable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self { command }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }

    /// `# config: {...}`, the first line of every text output.
    pub fn header_line(&self) -> String {
        format!("# config: {}", self.to_json_line())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Where the config of a run writing `out` is recorded.
    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut s = out.as_os_str().to_owned();
        s.push(".config.json");
        PathBuf::from(s)
    }

    pub fn save_sidecar(&self) -> Result<PathBuf> {
        let path = Self::sidecar_path(self.command.out());
        let mut text = serde_json::to_string_pretty(self).expect("serialisable");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
