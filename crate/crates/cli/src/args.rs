use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "mirror-ot", version, about = "Partial-identification bounds by mirror-penalized optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower and upper bound at a single penalty weight.
    Bounds {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bounds over a grid of penalty weights.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Comma list (`0,1,10`) or log range `start:stop:count`.
        #[arg(long, default_value = "0,1,5,10,50,100")]
        eta: String,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed-form population values for a Gaussian linear model.
    Oracle {
        #[command(flatten)]
        model: GaussianArgs,
        #[arg(long, default_value = "0")]
        eta: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Estimation error against the population value on synthetic data.
    Synth {
        #[arg(long, default_value = "linear-location")]
        preset: String,
        /// Per-arm sample sizes.
        #[arg(long, default_value = "200,800", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value = "10")]
        eta: String,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo draws when the population value has no closed form.
        #[arg(long, default_value_t = 1_000_000)]
        mc_draws: usize,
        /// Also write the first replicate at the first size as a sample file.
        #[arg(long)]
        sample_output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Convergence-rate diagnostic: mean error per size and log-log slope.
    Rate {
        #[command(flatten)]
        model: GaussianArgs,
        #[arg(long, default_value = "100,200,400,800,1600,3200", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        eta: f64,
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tightened variance estimate for the difference in means.
    Neyman {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "0,10,20,30,40,50")]
        eta: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bounds on the correlation between the two potential outcomes.
    Corr {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "0,10,20,30,40,50")]
        eta: String,
        /// Clamp the reported bounds into [-1, 1].
        #[arg(long)]
        clamp: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Sample file with columns w, y1.., z1...
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub input: Option<PathBuf>,
    /// Generate the sample from a named synthetic model.
    #[arg(long)]
    pub preset: Option<String>,
    /// Control-arm size for --preset.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Treated-arm size for --preset.
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverKind::Exact)]
    pub solver: SolverKind,
    /// Entropic regularization for the sinkhorn solver.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Rescale each covariate to mean 0 and variance 1 over the pooled sample.
    #[arg(long)]
    pub standardize_z: bool,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// sq-sum, sq-diff, product, or quadratic:<json | path to json>.
    #[arg(long, default_value = "sq-sum")]
    pub cost: String,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 1.6, allow_negative_numbers = true)]
    pub beta1: f64,
    /// Noise standard deviation, control arm.
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    /// Noise standard deviation, treated arm.
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    /// JSON file with beta0, beta1, sigma0, sigma1 matrices; overrides the scalar flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}
