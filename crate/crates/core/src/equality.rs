//! Moment-equality tests built on the resampled mean-type statistic `T_M`
//! and the U-type statistic `T_U`.
//!
//! Both statistics studentize with the full-sample covariance `Σ̂` (divisor
//! `n`). `T_M` averages `R_n` whitened observations drawn with replacement and
//! is compared with a chi-square quantile; `T_U` averages `R_n` cross
//! products over ordered pairs of distinct units and is compared with a
//! standard normal quantile. Validity only needs `√n`-consistency of the
//! sample mean, so the same computation applies whatever the dependence
//! structure of the rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    check_dim, dist_quantile, dist_sf, sample_covariance, sample_mean, CovarianceEstimate,
    DataMatrix, Distribution,
};
use crate::resample::{stream_for, PlanKind, PlanSampler, Purpose, ResamplePlan, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    MeanType,
    UType,
}

impl StatisticKind {
    pub fn plan_kind(self) -> PlanKind {
        match self {
            StatisticKind::MeanType => PlanKind::Single,
            StatisticKind::UType => PlanKind::Pair,
        }
    }

    /// Limit law of the statistic under the null for `m` moments.
    pub fn limit_distribution(self, m: usize) -> Distribution {
        match self {
            StatisticKind::MeanType => Distribution::ChiSquare(m as u32),
            StatisticKind::UType => Distribution::StdNormal,
        }
    }
}

/// How many draws to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnChoice {
    Explicit(usize),
    /// `ε` times the default rate; `delta` is the consistency exponent of the
    /// sample mean (1 for the usual `√n` case).
    Rule { epsilon: f64, delta: f64 },
}

impl Default for RnChoice {
    fn default() -> Self {
        RnChoice::Rule {
            epsilon: 1.0,
            delta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    Asymptotic,
    /// Empirical quantile of the statistic recentred at `X̄` over `l` fresh
    /// draw sets.
    Permutation { l: usize },
}

/// Smallest number of draw sets accepted for resampled critical values.
pub const MIN_PERMUTATION_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub statistic: StatisticKind,
    pub alpha: f64,
    pub rn: RnChoice,
    pub cv: CvMode,
}

impl TestConfig {
    /// Asymptotic test at the 5% level with the default `R_n` rule.
    pub fn new(statistic: StatisticKind) -> Self {
        Self {
            statistic,
            alpha: 0.05,
            rn: RnChoice::default(),
            cv: CvMode::Asymptotic,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_rn(mut self, rn: RnChoice) -> Self {
        self.rn = rn;
        self
    }

    pub fn with_cv(mut self, cv: CvMode) -> Self {
        self.cv = cv;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        match self.rn {
            RnChoice::Explicit(r) if r < 1 => {
                return Err(Error::BadConfig("explicit R_n must be at least 1".into()))
            }
            RnChoice::Rule { epsilon, delta } => check_rule(epsilon, delta)?,
            _ => {}
        }
        if let CvMode::Permutation { l } = self.cv {
            check_draws(l)?;
        }
        Ok(())
    }

    /// Number of draws for a sample of size `n`.
    pub fn resolve_rn(&self, n: usize) -> Result<usize> {
        let rn = match self.rn {
            RnChoice::Explicit(r) => r,
            RnChoice::Rule { epsilon, delta } => {
                check_rule(epsilon, delta)?;
                rn_default(n, self.statistic, epsilon, delta)
            }
        };
        if rn < 1 {
            return Err(Error::BadConfig("R_n must be at least 1".into()));
        }
        Ok(rn)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadConfig(format!("alpha = {alpha} is outside (0, 1)")));
    }
    Ok(())
}

fn check_rule(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::BadConfig(format!("epsilon = {epsilon} must be positive")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadConfig(format!("delta = {delta} is outside (0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_draws(l: usize) -> Result<()> {
    if l < MIN_PERMUTATION_DRAWS {
        return Err(Error::BadConfig(format!(
            "L = {l} draw sets; at least {MIN_PERMUTATION_DRAWS} required"
        )));
    }
    Ok(())
}

/// Rule-of-thumb number of draws.
///
/// The base count is `⌊n^{δ/2}⌋` (mean-type) or `⌊(n^δ / 2)^{4/3}⌋`
/// (U-type); the result is `ε` times the base, rounded to the nearest
/// integer and clamped to at least 2. A relative nudge of `1e-12` before
/// flooring keeps exact bases such as `(2000/2)^{4/3} = 10000` from landing
/// one below.
pub fn rn_default(n: usize, statistic: StatisticKind, epsilon: f64, delta: f64) -> usize {
    let nd = if delta == 1.0 {
        n as f64
    } else {
        (n as f64).powf(delta)
    };
    let base = match statistic {
        StatisticKind::MeanType => nd.sqrt(),
        StatisticKind::UType => {
            let h = nd / 2.0;
            h * h.cbrt()
        }
    };
    let base = (base * (1.0 + 1e-12)).floor();
    ((epsilon * base).round() as usize).max(2)
}

/// `Σ̂^{-1/2}(X_i - μ)` for every row, so that each draw set costs one pass
/// over its indices.
#[derive(Debug, Clone)]
pub(crate) struct Whitened {
    n: usize,
    m: usize,
    rows: Vec<f64>,
}

impl Whitened {
    pub(crate) fn new(x: &DataMatrix, mu: &[f64], cov: &CovarianceEstimate) -> Self {
        let (n, m) = (x.nrows(), x.ncols());
        let s = &cov.inv_sqrt;
        let mut rows = vec![0.0; n * m];
        let mut dev = vec![0.0; m];
        for (i, row) in x.rows().enumerate() {
            for k in 0..m {
                dev[k] = row[k] - mu[k];
            }
            let out = &mut rows[i * m..(i + 1) * m];
            for a in 0..m {
                out[a] = (0..m).map(|b| s[(a, b)] * dev[b]).sum();
            }
        }
        Self { n, m, rows }
    }

    #[inline]
    fn row(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.rows[i * self.m..(i + 1) * self.m]
    }

    pub(crate) fn t_mean(&self, singles: &[u32]) -> (Vec<f64>, f64) {
        let mut tilde = vec![0.0; self.m];
        for &i in singles {
            for (acc, v) in tilde.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        let scale = (singles.len() as f64).sqrt();
        tilde.iter_mut().for_each(|v| *v /= scale);
        let t = tilde.iter().map(|v| v * v).sum();
        (tilde, t)
    }

    pub(crate) fn t_u(&self, pairs: &[[u32; 2]]) -> f64 {
        let sum: f64 = if self.m == 1 {
            pairs
                .iter()
                .map(|&[i, j]| self.rows[i as usize] * self.rows[j as usize])
                .sum()
        } else {
            pairs
                .iter()
                .map(|&[i, j]| self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        sum / ((self.m * pairs.len()) as f64).sqrt()
    }

    /// Statistic value for a plan of the matching kind.
    pub(crate) fn statistic(&self, plan: &ResamplePlan) -> f64 {
        match plan.pairs() {
            Some(p) => self.t_u(p),
            None => self.t_mean(plan.singles().expect("single plan")).1,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }
}

fn check_plan(x: &DataMatrix, plan: &ResamplePlan, kind: PlanKind) -> Result<()> {
    if plan.kind() != kind {
        return Err(Error::BadConfig(format!(
            "statistic needs a {kind:?} plan, got {:?}",
            plan.kind()
        )));
    }
    if plan.n() != x.nrows() {
        return Err(Error::BadConfig(format!(
            "plan indexes {} units but data has {} rows",
            plan.n(),
            x.nrows()
        )));
    }
    Ok(())
}

/// Mean-type statistic: returns `(T̃_M, T_M)` with
/// `T̃_M = R_n^{-1/2} Σ_r Σ̂^{-1/2}(X_{i_r} - μ)` and `T_M = T̃_M'T̃_M`.
pub fn t_mean(x: &DataMatrix, mu: &[f64], plan: &ResamplePlan) -> Result<(Vec<f64>, f64)> {
    check_dim(mu, x.ncols())?;
    check_plan(x, plan, PlanKind::Single)?;
    let cov = sample_covariance(x)?;
    Ok(Whitened::new(x, mu, &cov).t_mean(plan.singles().expect("checked kind")))
}

/// U-type statistic `(m R_n)^{-1/2} Σ_r (X_{i_r} - μ)' Σ̂^{-1} (X_{j_r} - μ)`.
pub fn t_u(x: &DataMatrix, mu: &[f64], plan: &ResamplePlan) -> Result<f64> {
    check_dim(mu, x.ncols())?;
    check_plan(x, plan, PlanKind::Pair)?;
    let cov = sample_covariance(x)?;
    Ok(Whitened::new(x, mu, &cov).t_u(plan.pairs().expect("checked kind")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: StatisticKind,
    pub statistic_value: f64,
    /// `T̃_M` for the mean-type statistic.
    pub tilde_vector: Option<Vec<f64>>,
    pub critical_value: f64,
    /// Reported in asymptotic mode only.
    pub p_value: Option<f64>,
    pub reject: bool,
    pub rn_used: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Two-sided test of `μ_0 = mu` (draw streams for replication 0).
pub fn test_equality(x: &DataMatrix, mu: &[f64], cfg: &TestConfig, seed: u64) -> Result<TestResult> {
    test_equality_rep(x, mu, cfg, seed, 0)
}

/// As [`test_equality`], drawing from the streams of `replication`.
pub fn test_equality_rep(
    x: &DataMatrix,
    mu: &[f64],
    cfg: &TestConfig,
    seed: u64,
    replication: u64,
) -> Result<TestResult> {
    cfg.validate()?;
    check_dim(mu, x.ncols())?;
    let rn = cfg.resolve_rn(x.nrows())?;
    let cov = sample_covariance(x)?;
    let w = Whitened::new(x, mu, &cov);
    let mut sampler = PlanSampler::new(stream_for(seed, replication, Purpose::Statistic));
    let plan = sampler.next_plan(x.nrows(), rn, cfg.statistic.plan_kind())?;
    let (value, tilde) = match cfg.statistic {
        StatisticKind::MeanType => {
            let (tilde, t) = w.t_mean(plan.singles().expect("single plan"));
            (t, Some(tilde))
        }
        StatisticKind::UType => (w.t_u(plan.pairs().expect("pair plan")), None),
    };
    let limit = cfg.statistic.limit_distribution(x.ncols());
    let (critical_value, p_value) = match cfg.cv {
        CvMode::Asymptotic => (
            dist_quantile(limit, 1.0 - cfg.alpha)?,
            Some(dist_sf(limit, value)?),
        ),
        CvMode::Permutation { l } => {
            let stream = stream_for(seed, replication, Purpose::CriticalValue);
            (
                centred_critical_value(x, &cov, cfg.statistic, rn, l, cfg.alpha, stream)?,
                None,
            )
        }
    };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("sigma_condition_number".to_string(), cov.condition_number());
    diagnostics.insert("sigma_min_eigenvalue".to_string(), cov.min_eigenvalue);
    diagnostics.insert("rn".to_string(), rn as f64);
    if let CvMode::Permutation { l } = cfg.cv {
        diagnostics.insert("l".to_string(), l as f64);
    }
    Ok(TestResult {
        statistic: cfg.statistic,
        statistic_value: value,
        tilde_vector: tilde,
        critical_value,
        p_value,
        reject: value > critical_value,
        rn_used: rn,
        diagnostics,
    })
}

/// `inf{c > 0 : L^{-1} #{v_ℓ > c} <= α}`.
///
/// The set is attained at the order statistic `v_(L - ⌊αL⌋)`
/// (equivalently the `⌈(1-α)L⌉`-th smallest value). When that order
/// statistic is not positive every `c > 0` qualifies and the infimum is 0.
pub fn empirical_critical_value(values: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::BadConfig("no resampled statistics".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::BadConfig("resampled statistic is NaN".into()));
    }
    let l = values.len();
    let allowed = ((alpha * l as f64) * (1.0 + 1e-12)).floor() as usize;
    let rank = l - allowed.min(l - 1); // 1-based
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[rank - 1].max(0.0))
}

/// Critical value from the statistic recentred at `X̄`, recomputed over `l`
/// independent draw sets.
pub fn permutation_critical_value(
    x: &DataMatrix,
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    check_draws(l)?;
    check_alpha(alpha)?;
    let cov = sample_covariance(x)?;
    centred_critical_value(
        x,
        &cov,
        statistic,
        rn,
        l,
        alpha,
        stream_for(seed, 0, Purpose::CriticalValue),
    )
}

/// The `l` statistics `T(X̄; π̃_ℓ)` behind [`permutation_critical_value`].
pub(crate) fn centred_statistics(
    x: &DataMatrix,
    cov: &CovarianceEstimate,
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    stream: StreamId,
) -> Result<Vec<f64>> {
    let xbar = sample_mean(x);
    let w = Whitened::new(x, &xbar, cov);
    resampled_values(&w, statistic, rn, l, stream)
}

fn centred_critical_value(
    x: &DataMatrix,
    cov: &CovarianceEstimate,
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    alpha: f64,
    stream: StreamId,
) -> Result<f64> {
    check_draws(l)?;
    let values = centred_statistics(x, cov, statistic, rn, l, stream)?;
    empirical_critical_value(&values, alpha)
}

fn resampled_values(
    w: &Whitened,
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    stream: StreamId,
) -> Result<Vec<f64>> {
    let n = w.n();
    // validates n and rn once
    let mut sampler = PlanSampler::new(stream);
    let first = sampler.next_plan(n, rn, statistic.plan_kind())?;
    let mut out = Vec::with_capacity(l);
    out.push(w.statistic(&first));
    match statistic {
        StatisticKind::MeanType => {
            let mut buf = Vec::with_capacity(rn);
            for _ in 1..l {
                sampler.fill_singles(n, rn, &mut buf);
                out.push(w.t_mean(&buf).1);
            }
        }
        StatisticKind::UType => {
            let mut buf = Vec::with_capacity(rn);
            for _ in 1..l {
                sampler.fill_pairs(n, rn, &mut buf);
                out.push(w.t_u(&buf));
            }
        }
    }
    Ok(out)
}

/// Confidence interval `X̄* ± z_{1-α/2} Σ̂^{1/2} / √R_n` for a scalar mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub half_width: f64,
    pub rn_used: usize,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

pub fn ci_mean(x: &DataMatrix, alpha: f64, rn: usize, seed: u64) -> Result<Interval> {
    ci_mean_rep(x, alpha, rn, seed, 0)
}

pub fn ci_mean_rep(x: &DataMatrix, alpha: f64, rn: usize, seed: u64, replication: u64) -> Result<Interval> {
    let plan = crate::resample::draw_plan(
        x.nrows(),
        rn,
        PlanKind::Single,
        stream_for(seed, replication, Purpose::Statistic),
    )?;
    ci_mean_with_plan(x, alpha, &plan)
}

pub fn ci_mean_with_plan(x: &DataMatrix, alpha: f64, plan: &ResamplePlan) -> Result<Interval> {
    if x.ncols() != 1 {
        return Err(Error::BadConfig(format!(
            "confidence interval needs scalar data, got {} columns",
            x.ncols()
        )));
    }
    check_alpha(alpha)?;
    check_plan(x, plan, PlanKind::Single)?;
    let cov = sample_covariance(x)?;
    let singles = plan.singles().expect("checked kind");
    let rn = singles.len();
    let center = singles.iter().map(|&i| x.get(i as usize, 0)).sum::<f64>() / rn as f64;
    let z = dist_quantile(Distribution::StdNormal, 1.0 - alpha / 2.0)?;
    let half_width = z * cov.sigma_hat[(0, 0)].sqrt() / (rn as f64).sqrt();
    Ok(Interval {
        lower: center - half_width,
        upper: center + half_width,
        center,
        half_width,
        rn_used: rn,
    })
}

fn cutoff(statistic: StatisticKind, m: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    dist_quantile(statistic.limit_distribution(m), 1.0 - alpha)
}

/// `f_L(μ; α)`: share of `l` independent draw sets whose statistic at `mu`
/// does not exceed the asymptotic cutoff.
pub fn randomized_confidence_function(
    x: &DataMatrix,
    mu: &[f64],
    alpha: f64,
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    seed: u64,
) -> Result<f64> {
    if l < 1 {
        return Err(Error::BadConfig("L must be at least 1".into()));
    }
    check_dim(mu, x.ncols())?;
    let c = cutoff(statistic, x.ncols(), alpha)?;
    let cov = sample_covariance(x)?;
    let w = Whitened::new(x, mu, &cov);
    let values = resampled_values(&w, statistic, rn, l, stream_for(seed, 0, Purpose::Confidence))?;
    Ok(values.iter().filter(|&&v| v <= c).count() as f64 / l as f64)
}

/// Per-draw-set sufficient statistics of a scalar sample, centred at `X̄`,
/// from which the statistic at any `μ` follows in O(1).
struct ScalarSummary {
    /// Σ y_i y_j over pairs, or unused for singles.
    cross: f64,
    /// Σ (y_i + y_j) over pairs, or Σ y_i over singles.
    linear: f64,
}

/// Grid points `μ` with `f_L(μ; α - β) >= 1 - α`, one fixed set of draws
/// shared by every grid point.
#[allow(clippy::too_many_arguments)]
pub fn confidence_region_grid(
    x: &DataMatrix,
    alpha: f64,
    beta: f64,
    grid: &[f64],
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    confidence_region_grid_rep(x, alpha, beta, grid, statistic, rn, l, seed, 0)
}

#[allow(clippy::too_many_arguments)]
pub fn confidence_region_grid_rep(
    x: &DataMatrix,
    alpha: f64,
    beta: f64,
    grid: &[f64],
    statistic: StatisticKind,
    rn: usize,
    l: usize,
    seed: u64,
    replication: u64,
) -> Result<Vec<f64>> {
    if x.ncols() != 1 {
        return Err(Error::BadConfig("grid regions need scalar data".into()));
    }
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta < alpha) {
        return Err(Error::BadConfig(format!("beta = {beta} must lie in (0, alpha)")));
    }
    if l < 1 {
        return Err(Error::BadConfig("L must be at least 1".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::BadConfig("grid has non-finite points".into()));
    }
    let c = cutoff(statistic, 1, alpha - beta)?;
    let cov = sample_covariance(x)?;
    let var = cov.sigma_hat[(0, 0)];
    let xbar = sample_mean(x)[0];
    let y: Vec<f64> = x.rows().map(|r| r[0] - xbar).collect();

    let mut sampler = PlanSampler::new(stream_for(seed, replication, Purpose::Confidence));
    let n = x.nrows();
    let first = sampler.next_plan(n, rn, statistic.plan_kind())?;
    let mut summaries = Vec::with_capacity(l);
    let summarize_pairs = |p: &[[u32; 2]]| ScalarSummary {
        cross: p.iter().map(|&[i, j]| y[i as usize] * y[j as usize]).sum(),
        linear: p.iter().map(|&[i, j]| y[i as usize] + y[j as usize]).sum(),
    };
    let summarize_singles = |s: &[u32]| ScalarSummary {
        cross: 0.0,
        linear: s.iter().map(|&i| y[i as usize]).sum(),
    };
    match statistic {
        StatisticKind::UType => {
            summaries.push(summarize_pairs(first.pairs().expect("pair plan")));
            let mut buf = Vec::with_capacity(rn);
            for _ in 1..l {
                sampler.fill_pairs(n, rn, &mut buf);
                summaries.push(summarize_pairs(&buf));
            }
        }
        StatisticKind::MeanType => {
            summaries.push(summarize_singles(first.singles().expect("single plan")));
            let mut buf = Vec::with_capacity(rn);
            for _ in 1..l {
                sampler.fill_singles(n, rn, &mut buf);
                summaries.push(summarize_singles(&buf));
            }
        }
    }

    let r = rn as f64;
    let need = 1.0 - alpha;
    let region = grid
        .iter()
        .copied()
        .filter(|&mu| {
            let d = mu - xbar;
            let covered = summaries
                .iter()
                .filter(|s| {
                    let t = match statistic {
                        // Σ (y_i - d)(y_j - d) = cross - d·linear + R d²
                        StatisticKind::UType => (s.cross - d * s.linear + r * d * d) / (var * r.sqrt()),
                        StatisticKind::MeanType => {
                            let tilde = (s.linear - r * d) / (var.sqrt() * r.sqrt());
                            tilde * tilde
                        }
                    };
                    t <= c
                })
                .count();
            covered as f64 / l as f64 >= need
        })
        .collect();
    Ok(region)
}
