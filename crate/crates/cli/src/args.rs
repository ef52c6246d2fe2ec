use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Ints, Rate, RateList};

/// Keyword options that parse from flags and config files alike.
macro_rules! choice {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($variant),+
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown value {other:?}, expected one of: {}", [$($text),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
    };
}

choice!(Format { Table => "table", Csv => "csv", Json => "json" });
choice!(Method { Exact => "exact", Ctmc => "ctmc", Simple => "simple" });
choice!(ColdMode { Full => "full", Approx => "approx" });
choice!(Positions { Median => "median", Mean => "mean" });

#[derive(Debug, Parser)]
#[command(name = "durability", version, about = "Durability and availability models for redundant storage")]
pub struct Cli {
    /// flat JSON object of defaults; flags win over file values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// table, csv or json
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// write the report here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MTTDL and durability nines of an (m + c, m) array
    Mttdl(MttdlArgs),
    /// Recompute a reference table and compare cell by cell
    Table(TableArgs),
    /// Simulated cold-storage MTTDU over a range of exchange rates
    Coldsim(ColdsimArgs),
    /// Weibull fit of exchanges-before-failure counts
    Fit(FitArgs),
    /// Node availability model and downtime fit
    Avail(AvailArgs),
    /// Fault-tolerance profile of a code layout
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct MttdlArgs {
    /// data devices
    #[arg(long)]
    pub m: Option<usize>,
    /// tolerated failures
    #[arg(long)]
    pub c: Option<usize>,
    /// device failure rate per hour, e.g. 1/200000
    #[arg(long)]
    pub lambda: Option<Rate>,
    /// repair rate per hour
    #[arg(long)]
    pub mu: Option<Rate>,
    /// mission time in hours [default: 8760]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// exact (closed form, c <= 3), ctmc or simple [default: exact]
    #[arg(long)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// table1, table2, table3, table41-mds, table42 or all
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct ColdsimArgs {
    /// nodes holding the data
    #[arg(long)]
    pub n: Option<usize>,
    /// nodes needed to read the data
    #[arg(long)]
    pub k: Option<usize>,
    /// node failure rate per hour
    #[arg(long)]
    pub lambda: Option<Rate>,
    /// node repair rate per hour
    #[arg(long)]
    pub mu: Option<Rate>,
    /// detection rate per hour
    #[arg(long)]
    pub theta: Option<Rate>,
    /// carrier repair rate per hour
    #[arg(long)]
    pub phi: Option<Rate>,
    /// exchanges per hour: a list like 1,10,100 or decades like 10..1000
    #[arg(long)]
    pub xph: Option<RateList>,
    /// Weibull shape of exchanges before a carrier fails
    #[arg(long)]
    pub weibull_shape: Option<f64>,
    /// Weibull scale in exchanges
    #[arg(long)]
    pub weibull_scale: Option<f64>,
    /// unrecoverable read errors per byte
    #[arg(long)]
    pub ucer: Option<f64>,
    /// bytes per node
    #[arg(long)]
    pub capacity: Option<f64>,
    /// chance a node is statically damaged
    #[arg(long)]
    pub kappa: Option<f64>,
    /// full or approx [default: full]
    #[arg(long)]
    pub mode: Option<ColdMode>,
    /// replicates per point [default: 10000]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// base seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// worker threads; results do not depend on it
    #[arg(long, env = "DURABILITY_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// one exchange count per line
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// median or mean rank plotting positions [default: median]
    #[arg(long)]
    pub positions: Option<Positions>,
}

#[derive(Debug, Args)]
pub struct AvailArgs {
    /// death rate per hour; or give --afr
    #[arg(long)]
    pub lambda: Option<Rate>,
    /// annualized failure rate, read as lambda = afr / 8760
    #[arg(long)]
    pub afr: Option<f64>,
    /// mean offline period in hours
    #[arg(long)]
    pub t_down: Option<f64>,
    /// mean online period in hours; solved for when absent
    #[arg(long)]
    pub t_up: Option<f64>,
    /// timeout multiple of t_down; solved for when absent and --t-up is given
    #[arg(long)]
    pub alpha: Option<Rate>,
    /// offline durations in seconds, one per line, for the binomial fit
    #[arg(long)]
    pub downtimes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// binary generator matrix, one row per line
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// largest erasure weight to enumerate [default: n]
    #[arg(long)]
    pub max_weight: Option<usize>,
    /// pi,n,c: pi independent (n, n - c) MDS arrays
    #[arg(long)]
    pub mds_arrays: Option<Ints>,
    /// n1,c1,n2: n1 mirror groups of n2 replicas tolerating c1 lost groups
    #[arg(long)]
    pub mirrored: Option<Ints>,
    /// n1,m1,n2,m2: product of an (n1, m1) column code and an (n2, m2) row code
    #[arg(long)]
    pub product: Option<Ints>,
}
