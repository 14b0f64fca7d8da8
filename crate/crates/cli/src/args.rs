//! Command-line flags. Values are kept as text here and validated in
//! [`crate::settings`], so flags and config-file entries share one parser and
//! one set of error messages.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "rapm",
    version,
    about = "Price European calls under the RAPM transaction-cost model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prices at t = 0 for a set of spots, next to Black–Scholes.
    #[command(allow_negative_numbers = true)]
    Price(CommonArgs),
    /// Prices over a grid of spots and calendar times.
    #[command(allow_negative_numbers = true)]
    Surface {
        #[command(flatten)]
        common: CommonArgs,
        /// Calendar times: list `a,b,c` or range `lo:hi:n`.
        #[arg(long)]
        times: Option<String>,
    },
    /// V(K, 0) over a ladder of mesh sizes for all four method variants.
    #[command(allow_negative_numbers = true)]
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Mesh sizes, comma separated.
        #[arg(long = "dx-ladder")]
        dx_ladder: Option<String>,
    },
    /// Finite elements against the finite difference reference solver.
    #[command(allow_negative_numbers = true)]
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid spacing of the finite difference run (default: --dx).
        #[arg(long = "fdm-dx")]
        fdm_dx: Option<String>,
        /// Time step of the finite difference run (default: fdm-dx²).
        #[arg(long = "fdm-dtau")]
        fdm_dtau: Option<String>,
    },
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Price(c) => c,
            Command::Surface { common, .. } | Command::Converge { common, .. } | Command::Compare { common, .. } => {
                common
            }
        }
    }

    /// Subcommand-specific flags as `(key, value)` pairs.
    pub fn extra_flags(&self) -> Vec<(&'static str, &String)> {
        let pairs: Vec<(&'static str, &Option<String>)> = match self {
            Command::Price(_) => vec![],
            Command::Surface { times, .. } => vec![("times", times)],
            Command::Converge { dx_ladder, .. } => vec![("dx-ladder", dx_ladder)],
            Command::Compare { fdm_dx, fdm_dtau, .. } => vec![("fdm-dx", fdm_dx), ("fdm-dtau", fdm_dtau)],
        };
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Risk-free interest rate r.
    #[arg(long)]
    pub rate: Option<String>,
    /// Volatility σ.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Strike K.
    #[arg(long)]
    pub strike: Option<String>,
    /// Expiry T in years.
    #[arg(long)]
    pub expiry: Option<String>,
    /// Risk premium C (0 gives the linear Black–Scholes model).
    #[arg(long = "risk-premium")]
    pub risk_premium: Option<String>,
    /// Transaction cost measure M.
    #[arg(long = "txn-cost")]
    pub txn_cost: Option<String>,
    /// Half-width R of the log-price domain [-R, R].
    #[arg(long)]
    pub radius: Option<String>,
    /// Element size.
    #[arg(long)]
    pub dx: Option<String>,
    /// Time step in τ.
    #[arg(long)]
    pub dtau: Option<String>,
    /// Time weighting θ in [0, 1].
    #[arg(long)]
    pub theta: Option<String>,
    /// Number of backward Euler substeps replacing the first step.
    #[arg(long)]
    pub rannacher: Option<String>,
    /// Element order: p1 or p2.
    #[arg(long)]
    pub order: Option<String>,
    /// Nonlinear term treatment: group or quadrature.
    #[arg(long)]
    pub nonlinearity: Option<String>,
    /// Mass matrix in the v recovery: lumped or consistent.
    #[arg(long)]
    pub mass: Option<String>,
    /// Power law for negative v: signed or clamped.
    #[arg(long)]
    pub power: Option<String>,
    /// Boundary values of v: copy or linear.
    #[arg(long = "boundary-v")]
    pub boundary_v: Option<String>,
    /// Boundary terms on the right-hand side: consistent or literal.
    #[arg(long = "boundary-weighting")]
    pub boundary_weighting: Option<String>,
    /// Spots: list `a,b,c` or range `lo:hi:n`.
    #[arg(long)]
    pub spots: Option<String>,
    /// Output path prefix.
    #[arg(long)]
    pub out: Option<String>,
}

impl CommonArgs {
    /// Flags given on the command line as `(key, value)` pairs.
    pub fn flags(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 19] = [
            ("rate", &self.rate),
            ("sigma", &self.sigma),
            ("strike", &self.strike),
            ("expiry", &self.expiry),
            ("risk-premium", &self.risk_premium),
            ("txn-cost", &self.txn_cost),
            ("radius", &self.radius),
            ("dx", &self.dx),
            ("dtau", &self.dtau),
            ("theta", &self.theta),
            ("rannacher", &self.rannacher),
            ("order", &self.order),
            ("nonlinearity", &self.nonlinearity),
            ("mass", &self.mass),
            ("power", &self.power),
            ("boundary-v", &self.boundary_v),
            ("boundary-weighting", &self.boundary_weighting),
            ("spots", &self.spots),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }
}
