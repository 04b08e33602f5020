//! `drinf`: resampled tests, confidence intervals and simulation tables from
//! the command line.
//!
//! Exit codes: 0 on success, 2 on a usage error (bad flags or settings),
//! 1 on a data or numerical error. Results go to standard output; diagnostics
//! and timings go to standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use drinf::applications::{clustering_contrast, parse_edge_list, powerlaw_test, TailSample};
use drinf::equality::{ci_mean, test_equality, CvMode, RnChoice, StatisticKind, TestConfig};
use drinf::inequality::{test_inequality, test_inequality_scalar_asymptotic, IneqConfig};
use drinf::io::{read_csv, write_csv};
use drinf::numkernel::DataMatrix;
use drinf::simharness::{
    generate, network_moments, run_experiment, ClusterLevel, DgpSpec, EffectLevel, ExperimentSpec,
    NetworkStatistic, Procedure, TailFamily, DEFAULT_REPS,
};
use drinf::Error;

#[derive(Parser, Debug)]
#[command(name = "drinf", version, about = "Dependence-robust inference with resampled statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test E[X] = mu with a mean-type or U-type statistic.
    Test(TestArgs),
    /// Confidence interval for a scalar mean.
    Ci(CiArgs),
    /// Test E[X] <= 0 componentwise.
    Ineq(IneqArgs),
    /// Compare a power law against an exponential tail.
    Powerlaw(PowerlawArgs),
    /// Test a network statistic computed from an edge list.
    Netstat(NetstatArgs),
    /// Monte Carlo size and power table.
    Mc(McArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Stat {
    M,
    U,
}

impl From<Stat> for StatisticKind {
    fn from(s: Stat) -> Self {
        match s {
            Stat::M => StatisticKind::MeanType,
            Stat::U => StatisticKind::UType,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Cv {
    Asymptotic,
    Permutation,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args, Debug)]
struct RnArgs {
    /// Explicit number of draws; overrides the rule.
    #[arg(long)]
    rn: Option<usize>,
    /// Use the default rule scaled by --eps (the default behaviour).
    #[arg(long = "rn-rule")]
    _rn_rule: bool,
    /// Multiple of the default number of draws.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Consistency exponent of the sample mean, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

impl RnArgs {
    fn choice(&self) -> Result<RnChoice, CliError> {
        match self.rn {
            Some(0) => Err(CliError::Usage("--rn must be at least 1".into())),
            Some(r) => Ok(RnChoice::Explicit(r)),
            None => {
                if !(self.eps > 0.0 && self.eps.is_finite()) {
                    return Err(CliError::Usage(format!("--eps {} must be positive", self.eps)));
                }
                if !(self.delta > 0.0 && self.delta <= 1.0) {
                    return Err(CliError::Usage(format!("--delta {} is outside (0, 1]", self.delta)));
                }
                Ok(RnChoice::Rule {
                    epsilon: self.eps,
                    delta: self.delta,
                })
            }
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn check(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!("--alpha {} is outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Hypothesised mean, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    mu: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Stat::U)]
    stat: Stat,
    #[arg(long, value_enum, default_value_t = Cv::Asymptotic)]
    cv: Cv,
    /// Draw sets for the permutation critical value.
    #[arg(long = "L", default_value_t = 1000)]
    l: usize,
    #[command(flatten)]
    rn: RnArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CiArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    rn: RnArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct IneqArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "L", default_value_t = 1000)]
    l: usize,
    /// Compare with the normal quantile instead (scalar data only).
    #[arg(long)]
    asymptotic: bool,
    #[command(flatten)]
    rn: RnArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PowerlawArgs {
    /// One column of observations, all at least --xmin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    xmin: f64,
    #[command(flatten)]
    rn: RnArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Moment {
    Clustering,
    Degree,
    /// Clustering minus twice the empirical link density.
    Contrast,
}

#[derive(Args, Debug)]
struct NetstatArgs {
    /// Whitespace-separated edge list.
    #[arg(long)]
    edges: PathBuf,
    /// Node count, for trailing isolated nodes.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, value_enum, default_value_t = Moment::Contrast)]
    moment: Moment,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = Stat::U)]
    stat: Stat,
    #[command(flatten)]
    rn: RnArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Design {
    Cluster,
    Network,
    Spillover,
    Tail,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum McStat {
    M,
    U,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Effects {
    Family,
    City,
    None,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NetStat {
    Clustering,
    Degree,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Tail {
    Exp,
    Powerlaw,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long, value_enum)]
    design: Design,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = McStat::Both)]
    stat: McStat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Cities, families and individuals (cluster design).
    #[arg(long, default_value_t = 20)]
    nc: usize,
    #[arg(long, default_value_t = 100)]
    nf: usize,
    #[arg(long, default_value_t = 200)]
    ni: usize,
    #[arg(long, value_enum, default_value_t = Effects::Family)]
    effects: Effects,
    /// Sample size (network, spillover and tail designs).
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long = "network-stat", value_enum, default_value_t = NetStat::Clustering)]
    network_stat: NetStat,
    /// Networks simulated for the true network statistic.
    #[arg(long = "truth-draws", default_value_t = DEFAULT_REPS)]
    truth_draws: usize,
    #[arg(long, value_enum, default_value_t = Tail::Exp)]
    family: Tail,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
    /// Also write the moments of replication 0 to this CSV file.
    #[arg(long = "write-sample")]
    write_sample: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BadConfig(_) | Error::BadSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<DataMatrix, CliError> {
    Ok(read_csv(&read_text(path)?)?.data)
}

fn render(fields: Map<String, Value>, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&Value::Object(fields)).expect("json") + "\n",
        Format::Tsv => {
            let mut out = String::new();
            for (k, v) in fields {
                let v = match v {
                    Value::Array(items) => items.iter().map(Value::to_string).collect::<Vec<_>>().join(","),
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                out.push_str(&format!("{k}\t{v}\n"));
            }
            out
        }
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("built with json!({{..}})"),
    }
}

fn equality_fields(x: &DataMatrix, mu: &[f64], cfg: &TestConfig, seed: u64) -> Result<Map<String, Value>, CliError> {
    let r = test_equality(x, mu, cfg, seed)?;
    Ok(object(json!({
        "statistic": r.statistic,
        "statistic_value": r.statistic_value,
        "critical_value": r.critical_value,
        "p_value": r.p_value,
        "reject": r.reject,
        "rn": r.rn_used,
        "n": x.nrows(),
        "m": x.ncols(),
        "diagnostics": r.diagnostics,
    })))
}

fn cv_mode(cv: Cv, l: usize) -> Result<CvMode, CliError> {
    match cv {
        Cv::Asymptotic => Ok(CvMode::Asymptotic),
        Cv::Permutation if l < drinf::equality::MIN_PERMUTATION_DRAWS => Err(CliError::Usage(format!(
            "--L {l} is below the minimum of {}",
            drinf::equality::MIN_PERMUTATION_DRAWS
        ))),
        Cv::Permutation => Ok(CvMode::Permutation { l }),
    }
}

fn cmd_test(a: &TestArgs) -> Result<String, CliError> {
    a.common.check()?;
    let cfg = TestConfig::new(a.stat.into())
        .with_alpha(a.common.alpha)
        .with_rn(a.rn.choice()?)
        .with_cv(cv_mode(a.cv, a.l)?);
    let x = read_matrix(&a.input)?;
    let fields = equality_fields(&x, &a.mu, &cfg, a.common.seed)?;
    Ok(render(fields, a.common.format))
}

fn cmd_ci(a: &CiArgs) -> Result<String, CliError> {
    a.common.check()?;
    let choice = a.rn.choice()?;
    let x = read_matrix(&a.input)?;
    let rn = TestConfig::new(StatisticKind::MeanType).with_rn(choice).resolve_rn(x.nrows())?;
    let ci = ci_mean(&x, a.common.alpha, rn, a.common.seed)?;
    Ok(render(object(serde_json::to_value(ci).expect("json")), a.common.format))
}

fn cmd_ineq(a: &IneqArgs) -> Result<String, CliError> {
    a.common.check()?;
    if !a.asymptotic && a.l < drinf::equality::MIN_PERMUTATION_DRAWS {
        return Err(CliError::Usage(format!("--L {} is below the minimum of 100", a.l)));
    }
    let cfg = IneqConfig {
        alpha: a.common.alpha,
        rn: a.rn.choice()?,
        l: a.l,
    };
    let x = read_matrix(&a.input)?;
    let r = if a.asymptotic {
        test_inequality_scalar_asymptotic(&x, &cfg, a.common.seed)?
    } else {
        test_inequality(&x, &cfg, a.common.seed)?
    };
    let fields = object(json!({
        "q_stat": r.q_stat,
        "c": r.critical_value,
        "reject": r.reject,
        "rn": r.rn_used,
        "l": r.l_used,
        "q_components": r.q_components,
        "lambda_hat": r.lambda_hat,
    }));
    Ok(render(fields, a.common.format))
}

fn cmd_powerlaw(a: &PowerlawArgs) -> Result<String, CliError> {
    a.common.check()?;
    if !(a.xmin > 0.0 && a.xmin.is_finite()) {
        return Err(CliError::Usage(format!("--xmin {} must be positive", a.xmin)));
    }
    let choice = a.rn.choice()?;
    let x = read_matrix(&a.input)?;
    if x.ncols() != 1 {
        return Err(CliError::Data(format!("expected one column of observations, got {}", x.ncols())));
    }
    let s = TailSample::new(x.column(0), a.xmin)?;
    let o = powerlaw_test(&s, a.common.alpha, choice, a.common.seed)?;
    Ok(render(object(serde_json::to_value(o).expect("json")), a.common.format))
}

fn cmd_netstat(a: &NetstatArgs) -> Result<String, CliError> {
    a.common.check()?;
    let cfg = TestConfig::new(a.stat.into())
        .with_alpha(a.common.alpha)
        .with_rn(a.rn.choice()?);
    let g = parse_edge_list(&read_text(&a.edges)?, a.nodes)?;
    let x = match a.moment {
        Moment::Clustering => network_moments(&g, NetworkStatistic::AvgClustering)?,
        Moment::Degree => network_moments(&g, NetworkStatistic::AvgDegree)?,
        Moment::Contrast => clustering_contrast(&g)?,
    };
    let estimate = x.as_slice().iter().sum::<f64>() / x.nrows() as f64;
    let mut fields = equality_fields(&x, &[a.mu], &cfg, a.common.seed)?;
    fields.insert("estimate".into(), json!(estimate));
    fields.insert("nodes".into(), json!(g.n()));
    fields.insert("edges".into(), json!(g.edge_count()));
    Ok(render(fields, a.common.format))
}

fn grids(stat: McStat) -> Vec<Procedure> {
    let mut procs = Vec::new();
    if stat != McStat::U {
        procs.extend(Procedure::epsilon_grid(StatisticKind::MeanType));
    }
    if stat != McStat::M {
        procs.extend(Procedure::epsilon_grid(StatisticKind::UType));
    }
    procs
}

fn mc_spec(a: &McArgs) -> ExperimentSpec {
    let mut spec = match a.design {
        Design::Cluster => {
            let effects = match a.effects {
                Effects::Family => EffectLevel::Family,
                Effects::City => EffectLevel::City,
                Effects::None => EffectLevel::None,
            };
            let mut spec = ExperimentSpec::cluster_table(DgpSpec::Cluster {
                n_c: a.nc,
                n_f: a.nf,
                n_i: a.ni,
                theta0: 1.0,
                effects,
            });
            let mut procs = grids(a.stat);
            procs.extend(
                [ClusterLevel::City, ClusterLevel::Family, ClusterLevel::Individual]
                    .map(|level| Procedure::ClusterT { level }),
            );
            spec.procedures = procs;
            spec
        }
        Design::Network => {
            let stat = match a.network_stat {
                NetStat::Clustering => NetworkStatistic::AvgClustering,
                NetStat::Degree => NetworkStatistic::AvgDegree,
            };
            let mut spec = ExperimentSpec::network_table(a.n, stat);
            spec.procedures = grids(a.stat);
            spec.truth_draws = a.truth_draws;
            spec
        }
        Design::Spillover => {
            let mut spec = ExperimentSpec::spillover_table(a.n);
            spec.procedures = grids(a.stat);
            spec
        }
        Design::Tail => ExperimentSpec::tail_table(
            a.n,
            match a.family {
                Tail::Exp => TailFamily::Exponential { rate: a.rate },
                Tail::Powerlaw => TailFamily::PowerLaw { exponent: a.exponent },
            },
        ),
    };
    spec.alpha = a.alpha;
    spec
}

fn cmd_mc(a: &McArgs) -> Result<String, CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha {} is outside (0, 1)", a.alpha)));
    }
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let spec = mc_spec(a);
    spec.validate()?;
    if let Some(path) = &a.write_sample {
        let x = generate(&spec.dgp, a.seed, 0)?.moments()?;
        let names: Vec<String> = (0..x.ncols()).map(|k| format!("x{k}")).collect();
        let text = write_csv(&x, Some(&names))?;
        std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let report = run_experiment(&spec, a.reps, a.seed)?;
    eprintln!("wall-clock: {:.3} s", report.wall_clock_secs);
    Ok(match a.format {
        Format::Json => report.to_json() + "\n",
        Format::Tsv => report.to_tsv(),
    })
}

fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Ci(a) => cmd_ci(a),
        Command::Ineq(a) => cmd_ineq(a),
        Command::Powerlaw(a) => cmd_powerlaw(a),
        Command::Netstat(a) => cmd_netstat(a),
        Command::Mc(a) => cmd_mc(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help / --version
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
