//! Monte Carlo harness: draws replications from a [`DgpSpec`], runs every
//! procedure against every hypothesis, and tallies rejection rates.
//!
//! Replication `r` reads its data from the `Data` stream of `r` and its draw
//! sets from the streams the tests themselves use for `r`, so the report is
//! independent of the worker count. Wall-clock time is kept out of the
//! serialized report to make identical runs byte-identical.

mod dgp;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dgp::{
    generate, network_moments, network_truth, ClusterSample, DgpSpec, EffectLevel, NetworkModel, NetworkSample,
    NetworkStatistic, Sample, SpilloverSample, TailFamily,
};

use crate::applications::powerlaw::powerlaw_test_rep;
use crate::applications::PowerLawDecision;
use crate::equality::{ci_mean_rep, test_equality_rep, CvMode, RnChoice, StatisticKind, TestConfig};
use crate::error::{Error, Result};
use crate::inequality::{test_inequality_rep, IneqConfig};
use crate::numkernel::{dist_quantile, DataMatrix, Distribution};

/// Multiples of the default `R_n` tabulated for each statistic.
pub const EPSILON_GRID: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];

/// Default replication count.
pub const DEFAULT_REPS: usize = 2000;

/// Environment variable capping the worker count; 0 or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "DRINF_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLevel {
    City,
    Family,
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Procedure {
    Equality {
        statistic: StatisticKind,
        rn: RnChoice,
        cv: CvMode,
    },
    /// Two-sided t-test with cluster-robust variance at `level` and normal
    /// critical values.
    ClusterT { level: ClusterLevel },
    /// Tests `E[X] <= null` componentwise.
    Inequality { rn: RnChoice, l: usize },
    /// Rejects when the mean-type interval misses the null.
    Interval { rn: RnChoice },
    /// Counts any decisive outcome as a rejection; the null is unused.
    PowerLaw { rn: RnChoice },
}

impl Procedure {
    /// Asymptotic equality test with `R_n = ε` times the default.
    pub fn scaled(statistic: StatisticKind, epsilon: f64) -> Self {
        Procedure::Equality {
            statistic,
            rn: RnChoice::Rule { epsilon, delta: 1.0 },
            cv: CvMode::Asymptotic,
        }
    }

    /// One procedure per entry of [`EPSILON_GRID`].
    pub fn epsilon_grid(statistic: StatisticKind) -> Vec<Self> {
        EPSILON_GRID.iter().map(|&e| Self::scaled(statistic, e)).collect()
    }

    pub fn label(&self) -> String {
        let rn = |rn: &RnChoice| match rn {
            RnChoice::Explicit(r) => format!("R={r}"),
            RnChoice::Rule { epsilon, delta } if *delta == 1.0 => format!("eps={epsilon}"),
            RnChoice::Rule { epsilon, delta } => format!("eps={epsilon},delta={delta}"),
        };
        match self {
            Procedure::Equality { statistic, rn: r, cv } => {
                let s = match statistic {
                    StatisticKind::MeanType => "M",
                    StatisticKind::UType => "U",
                };
                let cv = match cv {
                    CvMode::Asymptotic => String::new(),
                    CvMode::Permutation { l } => format!(",L={l}"),
                };
                format!("{s} {}{cv}", rn(r))
            }
            Procedure::ClusterT { level } => match level {
                ClusterLevel::City => "t-city".into(),
                ClusterLevel::Family => "t-family".into(),
                ClusterLevel::Individual => "t-individual".into(),
            },
            Procedure::Inequality { rn: r, l } => format!("ineq {},L={l}", rn(r)),
            Procedure::Interval { rn: r } => format!("ci {}", rn(r)),
            Procedure::PowerLaw { rn: r } => format!("powerlaw {}", rn(r)),
        }
    }

    fn rn_used(&self, n: usize) -> Result<Option<usize>> {
        Ok(match *self {
            Procedure::Equality { statistic, rn, cv } => Some(
                TestConfig::new(statistic).with_rn(rn).with_cv(cv).resolve_rn(n)?,
            ),
            Procedure::ClusterT { .. } => None,
            Procedure::Inequality { rn, l } => Some(IneqConfig { alpha: 0.05, rn, l }.resolve_rn(n)?),
            Procedure::Interval { rn } => Some(TestConfig::new(StatisticKind::MeanType).with_rn(rn).resolve_rn(n)?),
            Procedure::PowerLaw { rn } => Some(TestConfig::new(StatisticKind::UType).with_rn(rn).resolve_rn(n)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullValue {
    Value(Vec<f64>),
    /// Simulated expected network statistic plus an offset.
    TruthPlus(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub label: String,
    pub null: NullValue,
}

impl Hypothesis {
    pub fn value(label: &str, v: f64) -> Self {
        Self {
            label: label.into(),
            null: NullValue::Value(vec![v]),
        }
    }

    pub fn truth_plus(label: &str, offset: f64) -> Self {
        Self {
            label: label.into(),
            null: NullValue::TruthPlus(offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dgp: DgpSpec,
    pub procedures: Vec<Procedure>,
    pub hypotheses: Vec<Hypothesis>,
    pub alpha: f64,
    /// Networks simulated for [`NullValue::TruthPlus`].
    pub truth_draws: usize,
}

impl ExperimentSpec {
    pub fn new(dgp: DgpSpec, procedures: Vec<Procedure>, hypotheses: Vec<Hypothesis>) -> Self {
        Self {
            dgp,
            procedures,
            hypotheses,
            alpha: 0.05,
            truth_draws: DEFAULT_REPS,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Both statistics over the `ε` grid and the three t-tests; size at
    /// `θ₀ = 1`, power at `θ₀ = 1.5`.
    pub fn cluster_table(dgp: DgpSpec) -> Self {
        let mut procs = Procedure::epsilon_grid(StatisticKind::MeanType);
        procs.extend(Procedure::epsilon_grid(StatisticKind::UType));
        procs.extend(
            [ClusterLevel::City, ClusterLevel::Family, ClusterLevel::Individual]
                .map(|level| Procedure::ClusterT { level }),
        );
        Self::new(
            dgp,
            procs,
            vec![Hypothesis::value("Size", 1.0), Hypothesis::value("Power", 1.5)],
        )
    }

    /// Size at the simulated truth, power at truth plus 0.08 (clustering) or
    /// 0.8 (degree).
    pub fn network_table(n: usize, statistic: NetworkStatistic) -> Self {
        let offset = match statistic {
            NetworkStatistic::AvgClustering => 0.08,
            NetworkStatistic::AvgDegree => 0.8,
        };
        Self::new(
            DgpSpec::network(n, statistic),
            Self::both_grids(),
            vec![Hypothesis::truth_plus("Size", 0.0), Hypothesis::truth_plus("Power", offset)],
        )
    }

    /// Size at `β₃ = -1`, power at `β₃ = -1.8`.
    pub fn spillover_table(n: usize) -> Self {
        Self::new(
            DgpSpec::spillover(n),
            Self::both_grids(),
            vec![Hypothesis::value("Size", -1.0), Hypothesis::value("Power", -1.8)],
        )
    }

    pub fn tail_table(n: usize, family: TailFamily) -> Self {
        Self::new(
            DgpSpec::Tail { n, family, x_min: 1.0 },
            vec![Procedure::PowerLaw { rn: RnChoice::default() }],
            vec![Hypothesis::value("Decisive", 0.0)],
        )
    }

    fn both_grids() -> Vec<Procedure> {
        let mut procs = Procedure::epsilon_grid(StatisticKind::MeanType);
        procs.extend(Procedure::epsilon_grid(StatisticKind::UType));
        procs
    }

    fn moment_dim(&self) -> usize {
        match &self.dgp {
            DgpSpec::Gaussian { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        crate::equality::check_alpha(self.alpha).map_err(|e| Error::BadSpec(e.to_string()))?;
        if self.procedures.is_empty() || self.hypotheses.is_empty() {
            return Err(Error::BadSpec("need at least one procedure and one hypothesis".into()));
        }
        let m = self.moment_dim();
        for h in &self.hypotheses {
            match &h.null {
                NullValue::Value(v) if v.len() != m || v.iter().any(|x| !x.is_finite()) => {
                    return Err(Error::BadSpec(format!(
                        "hypothesis `{}` needs {m} finite values",
                        h.label
                    )))
                }
                NullValue::TruthPlus(d) if !matches!(self.dgp, DgpSpec::Network { .. }) || !d.is_finite() => {
                    return Err(Error::BadSpec(format!(
                        "hypothesis `{}` is relative to a network truth",
                        h.label
                    )))
                }
                _ => {}
            }
        }
        if self.hypotheses.iter().any(|h| matches!(h.null, NullValue::TruthPlus(_))) && self.truth_draws == 0 {
            return Err(Error::BadSpec("truth_draws must be positive".into()));
        }
        for p in &self.procedures {
            let fits = match p {
                Procedure::ClusterT { .. } => matches!(self.dgp, DgpSpec::Cluster { .. }),
                Procedure::PowerLaw { .. } => matches!(self.dgp, DgpSpec::Tail { .. }),
                Procedure::Interval { .. } => m == 1,
                _ => true,
            };
            if !fits {
                return Err(Error::BadSpec(format!(
                    "procedure `{}` does not apply to the {} design",
                    p.label(),
                    self.dgp.name()
                )));
            }
            p.rn_used(self.dgp.n()).map_err(|e| Error::BadSpec(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub procedure: String,
    pub hypothesis: String,
    pub rn: Option<usize>,
    /// Replications that produced a decision.
    pub valid: usize,
    pub failures: usize,
    pub rejections: usize,
    /// `None` when every replication failed.
    pub rejection_pct: Option<f64>,
    /// Counts by outcome for procedures with more than two outcomes.
    pub outcomes: BTreeMap<String, usize>,
    /// Error of the lowest-numbered failing replication.
    pub first_error: Option<String>,
}

impl CellReport {
    /// Share of valid replications with outcome `tag`, in percent.
    pub fn outcome_pct(&self, tag: &str) -> Option<f64> {
        (self.valid > 0).then(|| 100.0 * *self.outcomes.get(tag).unwrap_or(&0) as f64 / self.valid as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub design: String,
    pub spec: ExperimentSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Simulated expected statistic behind truth-relative nulls.
    pub truth: Option<f64>,
    /// Hypothesis-major: all procedures for the first hypothesis, then the
    /// next.
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn cell(&self, procedure: &str, hypothesis: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.procedure == procedure && c.hypothesis == hypothesis)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One column per procedure; rows are hypotheses (rejection %), extra
    /// outcome shares, failure counts when any, and `R_n`.
    pub fn to_tsv(&self) -> String {
        let procs: Vec<String> = self.spec.procedures.iter().map(Procedure::label).collect();
        let k = procs.len();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# design={} n={} reps={} seed={} alpha={}{}",
            self.design,
            self.n,
            self.reps,
            self.seed,
            self.spec.alpha,
            self.truth.map(|t| format!(" truth={t}")).unwrap_or_default()
        );
        let _ = writeln!(out, "row\t{}", procs.join("\t"));
        let pct = |v: Option<f64>| v.map(|p| format!("{p:.2}")).unwrap_or_else(|| "NA".into());
        for (h, row) in self.spec.hypotheses.iter().zip(self.cells.chunks(k)) {
            let vals: Vec<String> = row.iter().map(|c| pct(c.rejection_pct)).collect();
            let _ = writeln!(out, "{}\t{}", h.label, vals.join("\t"));
            let tags: std::collections::BTreeSet<&String> = row.iter().flat_map(|c| c.outcomes.keys()).collect();
            for tag in tags {
                let vals: Vec<String> = row.iter().map(|c| pct(c.outcome_pct(tag))).collect();
                let _ = writeln!(out, "{}:{tag}\t{}", h.label, vals.join("\t"));
            }
            if row.iter().any(|c| c.failures > 0) {
                let vals: Vec<String> = row.iter().map(|c| c.failures.to_string()).collect();
                let _ = writeln!(out, "{}:failures\t{}", h.label, vals.join("\t"));
            }
        }
        let rns: Vec<String> = self.cells[..k]
            .iter()
            .map(|c| c.rn.map(|r| r.to_string()).unwrap_or_else(|| "-".into()))
            .collect();
        let _ = writeln!(out, "R_n\t{}", rns.join("\t"));
        out
    }
}

/// Cluster-robust t-test of `E[Y] = mu`: `V = Σ_g (Σ_{i∈g} e_i)² / n²` with
/// `e_i = y_i - ȳ`; rejects when `|ȳ - mu| / √V > z_{1-α/2}`.
pub fn cluster_t_test(y: &[f64], groups: &[usize], mu: f64, alpha: f64) -> Result<bool> {
    if y.len() != groups.len() || y.len() < 2 {
        return Err(Error::InvalidData("outcomes and group labels differ in length".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, &g) in y.iter().zip(groups) {
        *sums.entry(g).or_default() += v - mean;
    }
    let var = sums.values().map(|s| s * s).sum::<f64>() / (n * n);
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("clustered variance is zero".into()));
    }
    let z = dist_quantile(Distribution::StdNormal, 1.0 - alpha / 2.0)?;
    Ok(((mean - mu) / var.sqrt()).abs() > z)
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    reject: bool,
    tag: Option<&'static str>,
}

fn decision_tag(d: PowerLawDecision) -> &'static str {
    match d {
        PowerLawDecision::FavorPowerlaw => "favor_powerlaw",
        PowerLawDecision::FavorNull => "favor_null",
        PowerLawDecision::Inconclusive => "inconclusive",
    }
}

fn run_cell(
    p: &Procedure,
    sample: &Sample,
    x: &DataMatrix,
    null: &[f64],
    alpha: f64,
    seed: u64,
    rep: u64,
) -> Result<Outcome> {
    let plain = |reject| Outcome { reject, tag: None };
    match *p {
        Procedure::Equality { statistic, rn, cv } => {
            let cfg = TestConfig::new(statistic).with_alpha(alpha).with_rn(rn).with_cv(cv);
            Ok(plain(test_equality_rep(x, null, &cfg, seed, rep)?.reject))
        }
        Procedure::ClusterT { level } => {
            let Sample::Cluster(c) = sample else {
                return Err(Error::BadSpec("t-test needs cluster data".into()));
            };
            let individual: Vec<usize>;
            let groups = match level {
                ClusterLevel::City => &c.city,
                ClusterLevel::Family => &c.family,
                ClusterLevel::Individual => {
                    individual = (0..c.y.len()).collect();
                    &individual
                }
            };
            Ok(plain(cluster_t_test(&c.y, groups, null[0], alpha)?))
        }
        Procedure::Inequality { rn, l } => {
            let shifted = x.centered_at(null)?;
            let cfg = IneqConfig { alpha, rn, l };
            Ok(plain(test_inequality_rep(&shifted, &cfg, seed, rep)?.reject))
        }
        Procedure::Interval { rn } => {
            let r = TestConfig::new(StatisticKind::MeanType).with_rn(rn).resolve_rn(x.nrows())?;
            Ok(plain(!ci_mean_rep(x, alpha, r, seed, rep)?.contains(null[0])))
        }
        Procedure::PowerLaw { rn } => {
            let Sample::Tail(t) = sample else {
                return Err(Error::BadSpec("power-law test needs a tail sample".into()));
            };
            let d = powerlaw_test_rep(t, alpha, rn, seed, rep)?.decision;
            Ok(Outcome {
                reject: d != PowerLawDecision::Inconclusive,
                tag: Some(decision_tag(d)),
            })
        }
    }
}

/// Worker count from [`THREADS_ENV`]; unset or 0 means automatic.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::BadConfig(format!("{THREADS_ENV}={s} is not a worker count"))),
    }
}

/// Runs `reps` replications with the worker count from [`THREADS_ENV`].
pub fn run_experiment(spec: &ExperimentSpec, reps: usize, seed: u64) -> Result<ExperimentReport> {
    run_experiment_with_threads(spec, reps, seed, threads_from_env()?)
}

/// `threads = 0` uses one worker per core. The report does not depend on
/// `threads`.
pub fn run_experiment_with_threads(
    spec: &ExperimentSpec,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if reps == 0 {
        return Err(Error::BadSpec("rejection rates need at least one replication".into()));
    }
    spec.validate()?;
    let n = spec.dgp.n();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::BadConfig(format!("thread pool: {e}")))?;

    let truth = match &spec.dgp {
        DgpSpec::Network { n, model, statistic }
            if spec.hypotheses.iter().any(|h| matches!(h.null, NullValue::TruthPlus(_))) =>
        {
            Some(pool.install(|| network_truth(*n, model, *statistic, spec.truth_draws, seed))?)
        }
        _ => None,
    };
    let nulls: Vec<Vec<f64>> = spec
        .hypotheses
        .iter()
        .map(|h| match &h.null {
            NullValue::Value(v) => v.clone(),
            NullValue::TruthPlus(d) => vec![truth.expect("computed above") + d],
        })
        .collect();
    let rns: Vec<Option<usize>> = spec
        .procedures
        .iter()
        .map(|p| p.rn_used(n))
        .collect::<Result<_>>()?;

    let per_rep: Vec<Vec<Result<Outcome>>> = pool.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let data = generate(&spec.dgp, seed, rep).and_then(|s| {
                    let x = s.moments()?;
                    Ok((s, x))
                });
                let mut out = Vec::with_capacity(nulls.len() * spec.procedures.len());
                for null in &nulls {
                    for p in &spec.procedures {
                        out.push(match &data {
                            Ok((s, x)) => run_cell(p, s, x, null, spec.alpha, seed, rep),
                            Err(e) => Err(e.clone()),
                        });
                    }
                }
                out
            })
            .collect()
    });

    let mut cells = Vec::new();
    for (h_idx, h) in spec.hypotheses.iter().enumerate() {
        for (p_idx, p) in spec.procedures.iter().enumerate() {
            let k = h_idx * spec.procedures.len() + p_idx;
            let mut cell = CellReport {
                procedure: p.label(),
                hypothesis: h.label.clone(),
                rn: rns[p_idx],
                valid: 0,
                failures: 0,
                rejections: 0,
                rejection_pct: None,
                outcomes: BTreeMap::new(),
                first_error: None,
            };
            for rep in &per_rep {
                match &rep[k] {
                    Ok(o) => {
                        cell.valid += 1;
                        cell.rejections += o.reject as usize;
                        if let Some(tag) = o.tag {
                            *cell.outcomes.entry(tag.to_string()).or_default() += 1;
                        }
                    }
                    Err(e) => {
                        cell.failures += 1;
                        cell.first_error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            cell.rejection_pct = (cell.valid > 0).then(|| 100.0 * cell.rejections as f64 / cell.valid as f64);
            cells.push(cell);
        }
    }

    Ok(ExperimentReport {
        design: spec.dgp.name().into(),
        spec: spec.clone(),
        n,
        reps,
        seed,
        truth,
        cells,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cluster() -> ExperimentSpec {
        ExperimentSpec::cluster_table(DgpSpec::cluster(5, 25, 50, 1.0))
    }

    #[test]
    fn zero_reps_is_bad_spec() {
        assert!(matches!(run_experiment_with_threads(&small_cluster(), 0, 1, 1), Err(Error::BadSpec(_))));
    }

    #[test]
    fn report_is_independent_of_worker_count() {
        let spec = small_cluster();
        let a = run_experiment_with_threads(&spec, 40, 3, 1).unwrap();
        let b = run_experiment_with_threads(&spec, 40, 3, 4).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_tsv(), b.to_tsv());
        assert!(!a.to_json().contains("wall_clock"));
        assert!(a.cells.iter().all(|c| c.valid + c.failures == 40));
        assert!(a
            .cells
            .iter()
            .all(|c| c.rejection_pct.is_some_and(|p| (0.0..=100.0).contains(&p))));
    }

    #[test]
    fn tsv_layout() {
        let r = run_experiment_with_threads(&small_cluster(), 10, 4, 2).unwrap();
        let tsv = r.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert!(lines[0].starts_with("# design=cluster n=50 reps=10 seed=4"));
        assert!(lines[1].starts_with("row\tM eps=0.6\t"));
        assert!(lines[1].ends_with("t-city\tt-family\tt-individual"));
        assert!(lines[2].starts_with("Size\t"));
        assert!(lines[3].starts_with("Power\t"));
        // U-type grid at n = 50: ⌊25^{4/3}⌋ = 73 times ε, rounded
        assert_eq!(lines[4], "R_n\t4\t6\t7\t8\t10\t44\t58\t73\t88\t102\t-\t-\t-");
        assert!(lines.iter().skip(1).all(|l| l.split('\t').count() == 14));
    }

    #[test]
    fn cluster_t_test_by_hand() {
        // groups {0,1}: residuals (-1.5,-0.5) and (0.5,1.5) give V = (4+4)/16
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = [0, 0, 1, 1];
        // |2.5 - mu| / √0.5 > 1.96 ⇔ |2.5 - mu| > 1.386
        assert!(!cluster_t_test(&y, &g, 1.2, 0.05).unwrap());
        assert!(cluster_t_test(&y, &g, 1.1, 0.05).unwrap());
        // individual level: V = 5 / 16
        assert!(cluster_t_test(&y, &[0, 1, 2, 3], 1.4, 0.05).unwrap());
        assert!(!cluster_t_test(&y, &[0, 1, 2, 3], 1.5, 0.05).unwrap());
        assert!(cluster_t_test(&[1.0, 1.0], &[0, 1], 1.0, 0.05).is_err());
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        // a constant moment column cannot be studentized
        let spec = ExperimentSpec::new(
            DgpSpec::Network {
                n: 50,
                model: NetworkModel {
                    theta: [-1e9, 0.0, 0.0, 1.0],
                    radius: None,
                },
                statistic: NetworkStatistic::AvgDegree,
            },
            vec![Procedure::scaled(StatisticKind::UType, 1.0)],
            vec![Hypothesis::value("Size", 0.0)],
        );
        let r = run_experiment_with_threads(&spec, 5, 1, 1).unwrap();
        let c = &r.cells[0];
        assert_eq!((c.valid, c.failures), (0, 5));
        assert!(c.rejection_pct.is_none());
        assert!(c.first_error.as_deref().unwrap().contains("singular"));
        assert!(r.to_tsv().contains("Size\tNA\nSize:failures\t5\n"));
    }

    #[test]
    fn mismatched_procedures_are_rejected() {
        let mut spec = ExperimentSpec::spillover_table(100);
        spec.procedures.push(Procedure::ClusterT {
            level: ClusterLevel::Family,
        });
        assert!(matches!(spec.validate(), Err(Error::BadSpec(_))));
        let mut spec = small_cluster();
        spec.hypotheses.push(Hypothesis::truth_plus("Power", 0.1));
        assert!(matches!(spec.validate(), Err(Error::BadSpec(_))));
        let spec = ExperimentSpec::new(
            DgpSpec::Gaussian { n: 50, mean: vec![0.0, 0.0] },
            vec![Procedure::Interval { rn: RnChoice::Explicit(10) }],
            vec![Hypothesis {
                label: "Cover".into(),
                null: NullValue::Value(vec![0.0, 0.0]),
            }],
        );
        assert!(matches!(spec.validate(), Err(Error::BadSpec(_))));
    }

    #[test]
    fn tail_cells_count_decisions() {
        let spec = ExperimentSpec::tail_table(200, TailFamily::Exponential { rate: 0.5 });
        let r = run_experiment_with_threads(&spec, 20, 2, 2).unwrap();
        let c = &r.cells[0];
        let total: usize = c.outcomes.values().sum();
        assert_eq!(total, 20);
        assert_eq!(c.rejections, 20 - c.outcomes.get("inconclusive").copied().unwrap_or(0));
        assert!(r.to_tsv().contains("Decisive:favor_null\t"));
    }

    #[test]
    fn network_truth_is_used_for_relative_nulls() {
        let mut spec = ExperimentSpec::network_table(100, NetworkStatistic::AvgDegree);
        spec.truth_draws = 50;
        let r = run_experiment_with_threads(&spec, 10, 5, 2).unwrap();
        let t = r.truth.unwrap();
        let direct = network_truth(100, &NetworkModel::default(), NetworkStatistic::AvgDegree, 50, 5).unwrap();
        assert_eq!(t, direct);
        assert!(t > 0.5 && t < 8.0, "truth {t}");
    }
}
