//! Test of the moment inequalities `μ_0 <= 0` (componentwise).
//!
//! Each component enters through the scalar U-type statistic of its column.
//! `Q_n` subtracts the slack `λ̂_k` on components whose sample mean is
//! negative; the critical value is the empirical quantile of the recentred
//! maximum `Q̃_n` over fresh pair draws.

use serde::{Deserialize, Serialize};

use crate::equality::{check_alpha, check_draws, empirical_critical_value, rn_default, RnChoice, StatisticKind};
use crate::error::{Error, Result};
use crate::numkernel::{covariance_matrix, dist_quantile, sample_mean, DataMatrix, Distribution};
use crate::resample::{stream_for, PlanKind, PlanSampler, Purpose, ResamplePlan, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IneqConfig {
    pub alpha: f64,
    /// Rules are evaluated with the U-type rate.
    pub rn: RnChoice,
    /// Draw sets behind the critical value.
    pub l: usize,
}

impl Default for IneqConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            rn: RnChoice::default(),
            l: 1000,
        }
    }
}

impl IneqConfig {
    pub fn resolve_rn(&self, n: usize) -> Result<usize> {
        let cfg = crate::equality::TestConfig::new(StatisticKind::UType).with_rn(self.rn);
        cfg.validate()?;
        cfg.resolve_rn(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IneqResult {
    pub q_stat: f64,
    /// `T_{U,k}(0; π) - λ̂_k 1{X̄_k < 0}` for each component.
    pub q_components: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub critical_value: f64,
    pub reject: bool,
    pub rn_used: usize,
    /// `None` for the asymptotic critical value.
    pub l_used: Option<usize>,
}

/// Column means, inverse variances and centred values of the data.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    n: usize,
    m: usize,
    mean: Vec<f64>,
    inv_var: Vec<f64>,
    /// row-major `X_ik - X̄_k`
    centred: Vec<f64>,
}

impl Columns {
    pub(crate) fn new(x: &DataMatrix) -> Result<Self> {
        let (n, m) = (x.nrows(), x.ncols());
        let mean = sample_mean(x);
        let sigma = covariance_matrix(x);
        let mut inv_var = Vec::with_capacity(m);
        for k in 0..m {
            let var = sigma[(k, k)];
            let scale = x.rows().fold(0.0f64, |a, r| a.max(r[k].abs()));
            let floor = (1e-12 * scale).powi(2);
            if !(var > floor) {
                return Err(Error::SingularCovariance {
                    min_eigenvalue: var,
                    floor,
                });
            }
            inv_var.push(1.0 / var);
        }
        let mut centred = Vec::with_capacity(n * m);
        for r in x.rows() {
            centred.extend(r.iter().zip(&mean).map(|(v, mu)| v - mu));
        }
        Ok(Self {
            n,
            m,
            mean,
            inv_var,
            centred,
        })
    }

    /// Per-column `Σ y_i y_j` and `Σ (y_i + y_j)` over the pairs, `y` centred.
    fn pair_sums(&self, pairs: &[[u32; 2]], cross: &mut [f64], linear: &mut [f64]) {
        cross.iter_mut().for_each(|v| *v = 0.0);
        linear.iter_mut().for_each(|v| *v = 0.0);
        let m = self.m;
        for &[i, j] in pairs {
            let a = &self.centred[i as usize * m..(i as usize + 1) * m];
            let b = &self.centred[j as usize * m..(j as usize + 1) * m];
            for k in 0..m {
                cross[k] += a[k] * b[k];
                linear[k] += a[k] + b[k];
            }
        }
    }

    /// `Q̃_n = max_k T_{U,k}(X̄_k)` for one draw set; `cross` is scratch.
    fn q_tilde(&self, pairs: &[[u32; 2]], cross: &mut [f64]) -> f64 {
        cross.iter_mut().for_each(|v| *v = 0.0);
        let m = self.m;
        for &[i, j] in pairs {
            let a = &self.centred[i as usize * m..(i as usize + 1) * m];
            let b = &self.centred[j as usize * m..(j as usize + 1) * m];
            for k in 0..m {
                cross[k] += a[k] * b[k];
            }
        }
        let root_r = (pairs.len() as f64).sqrt();
        cross
            .iter()
            .zip(&self.inv_var)
            .map(|(c, s)| s * c / root_r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(T_{U,k}(X̄_k), λ̂_k)` for every column, from centred sums.
    ///
    /// With `y = x - X̄`: `λ̂ = s X̄ Σ(y_i + y_j) / √R + √R s X̄²`.
    fn centred_parts(&self, pairs: &[[u32; 2]]) -> (Vec<f64>, Vec<f64>) {
        let mut cross = vec![0.0; self.m];
        let mut linear = vec![0.0; self.m];
        self.pair_sums(pairs, &mut cross, &mut linear);
        let r = pairs.len() as f64;
        let root_r = r.sqrt();
        let t: Vec<f64> = (0..self.m).map(|k| self.inv_var[k] * cross[k] / root_r).collect();
        let lambda = (0..self.m)
            .map(|k| {
                let (s, xb) = (self.inv_var[k], self.mean[k]);
                s * xb * linear[k] / root_r + root_r * s * xb * xb
            })
            .collect();
        (t, lambda)
    }
}

fn check_pair_plan<'a>(x: &DataMatrix, plan: &'a ResamplePlan) -> Result<&'a [[u32; 2]]> {
    if plan.n() != x.nrows() {
        return Err(Error::BadConfig(format!(
            "plan indexes {} units but data has {} rows",
            plan.n(),
            x.nrows()
        )));
    }
    plan.pairs()
        .ok_or_else(|| Error::BadConfig("inequality statistics need a pair plan".into()))
}

/// `λ̂_k = X̄_k Σ̂_kk^{-1} R^{-1/2} Σ_r (X_{i_r,k} + X_{j_r,k}) - √R Σ̂_kk^{-1} X̄_k²`,
/// evaluated literally on the raw column.
pub fn lambda_hat(x: &DataMatrix, plan: &ResamplePlan, k: usize) -> Result<f64> {
    let pairs = check_pair_plan(x, plan)?;
    if k >= x.ncols() {
        return Err(Error::BadConfig(format!("column {k} out of range")));
    }
    let cols = Columns::new(x)?;
    Ok(raw_lambda(x, &cols, pairs, k))
}

fn raw_lambda(x: &DataMatrix, cols: &Columns, pairs: &[[u32; 2]], k: usize) -> f64 {
    let r = pairs.len() as f64;
    let sum: f64 = pairs
        .iter()
        .map(|&[i, j]| x.get(i as usize, k) + x.get(j as usize, k))
        .sum();
    let (s, xb) = (cols.inv_var[k], cols.mean[k]);
    xb * s * sum / r.sqrt() - r.sqrt() * s * xb * xb
}

/// `Q_n(π) = max_k {T_{U,k}(0; π) - λ̂_k 1{X̄_k < 0}}` from its definition.
/// Returns `(Q_n, components, λ̂)`.
pub fn q_stat(x: &DataMatrix, plan: &ResamplePlan) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let pairs = check_pair_plan(x, plan)?;
    let cols = Columns::new(x)?;
    let root_r = (pairs.len() as f64).sqrt();
    let mut comps = Vec::with_capacity(x.ncols());
    let mut lambdas = Vec::with_capacity(x.ncols());
    for k in 0..x.ncols() {
        let t0 = cols.inv_var[k]
            * pairs
                .iter()
                .map(|&[i, j]| x.get(i as usize, k) * x.get(j as usize, k))
                .sum::<f64>()
            / root_r;
        let lam = raw_lambda(x, &cols, pairs, k);
        let slack = if cols.mean[k] < 0.0 { lam } else { 0.0 };
        comps.push(t0 - slack);
        lambdas.push(lam);
    }
    let q = comps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((q, comps, lambdas))
}

/// The same statistic in the recentred form
/// `max_k {T_{U,k}(X̄_k; π) + λ̂_k 1{X̄_k >= 0}}`, the form used for testing.
pub fn q_stat_recentred(x: &DataMatrix, plan: &ResamplePlan) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let pairs = check_pair_plan(x, plan)?;
    let cols = Columns::new(x)?;
    Ok(recentred_q(&cols, pairs))
}

fn recentred_q(cols: &Columns, pairs: &[[u32; 2]]) -> (f64, Vec<f64>, Vec<f64>) {
    let (t, lambda) = cols.centred_parts(pairs);
    let comps: Vec<f64> = (0..cols.m)
        .map(|k| t[k] + if cols.mean[k] >= 0.0 { lambda[k] } else { 0.0 })
        .collect();
    let q = comps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (q, comps, lambda)
}

/// `Q̃_n(π) = max_k T_{U,k}(X̄_k; π)`.
pub fn q_tilde(x: &DataMatrix, plan: &ResamplePlan) -> Result<f64> {
    let pairs = check_pair_plan(x, plan)?;
    let cols = Columns::new(x)?;
    Ok(cols.q_tilde(pairs, &mut vec![0.0; cols.m]))
}

/// `c_{L,1-α}`: empirical quantile of `Q̃_n` over `l` independent pair plans.
pub fn ineq_critical_value(x: &DataMatrix, rn: usize, l: usize, alpha: f64, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    check_draws(l)?;
    let cols = Columns::new(x)?;
    critical_from_columns(&cols, rn, l, alpha, stream_for(seed, 0, Purpose::CriticalValue))
}

fn critical_from_columns(cols: &Columns, rn: usize, l: usize, alpha: f64, stream: StreamId) -> Result<f64> {
    let mut sampler = PlanSampler::new(stream);
    let first = sampler.next_plan(cols.n, rn, PlanKind::Pair)?;
    let mut scratch = vec![0.0; cols.m];
    let mut values = Vec::with_capacity(l);
    values.push(cols.q_tilde(first.pairs().expect("pair plan"), &mut scratch));
    let mut buf = Vec::with_capacity(rn);
    for _ in 1..l {
        sampler.fill_pairs(cols.n, rn, &mut buf);
        values.push(cols.q_tilde(&buf, &mut scratch));
    }
    empirical_critical_value(&values, alpha)
}

pub fn test_inequality(x: &DataMatrix, cfg: &IneqConfig, seed: u64) -> Result<IneqResult> {
    test_inequality_rep(x, cfg, seed, 0)
}

/// Rejects iff `Q_n(π) > c_{L,1-α}`, with `π` and the `L` reference draws
/// taken from independent streams of `replication`.
pub fn test_inequality_rep(x: &DataMatrix, cfg: &IneqConfig, seed: u64, replication: u64) -> Result<IneqResult> {
    check_alpha(cfg.alpha)?;
    check_draws(cfg.l)?;
    let rn = cfg.resolve_rn(x.nrows())?;
    let cols = Columns::new(x)?;
    let plan = PlanSampler::new(stream_for(seed, replication, Purpose::Statistic)).next_plan(
        x.nrows(),
        rn,
        PlanKind::Pair,
    )?;
    let (q, comps, lambda) = recentred_q(&cols, plan.pairs().expect("pair plan"));
    let c = critical_from_columns(
        &cols,
        rn,
        cfg.l,
        cfg.alpha,
        stream_for(seed, replication, Purpose::CriticalValue),
    )?;
    Ok(IneqResult {
        q_stat: q,
        q_components: comps,
        lambda_hat: lambda,
        critical_value: c,
        reject: q > c,
        rn_used: rn,
        l_used: Some(cfg.l),
    })
}

pub fn test_inequality_scalar_asymptotic(x: &DataMatrix, cfg: &IneqConfig, seed: u64) -> Result<IneqResult> {
    test_inequality_scalar_asymptotic_rep(x, cfg, seed, 0)
}

/// Scalar data only: rejects iff `Q_n(π) > z_{1-α}`. For one component
/// `Q_n` already carries the `-λ̂ 1{X̄ < 0}` correction.
pub fn test_inequality_scalar_asymptotic_rep(
    x: &DataMatrix,
    cfg: &IneqConfig,
    seed: u64,
    replication: u64,
) -> Result<IneqResult> {
    if x.ncols() != 1 {
        return Err(Error::BadConfig(format!(
            "asymptotic inequality test needs scalar data, got {} columns",
            x.ncols()
        )));
    }
    check_alpha(cfg.alpha)?;
    let rn = cfg.resolve_rn(x.nrows())?;
    let cols = Columns::new(x)?;
    let plan = PlanSampler::new(stream_for(seed, replication, Purpose::Statistic)).next_plan(
        x.nrows(),
        rn,
        PlanKind::Pair,
    )?;
    let (q, comps, lambda) = recentred_q(&cols, plan.pairs().expect("pair plan"));
    let z = dist_quantile(Distribution::StdNormal, 1.0 - cfg.alpha)?;
    Ok(IneqResult {
        q_stat: q,
        q_components: comps,
        lambda_hat: lambda,
        critical_value: z,
        reject: q > z,
        rn_used: rn,
        l_used: None,
    })
}

/// Default draw count for the inequality test at sample size `n`.
pub fn rn_default_ineq(n: usize) -> usize {
    rn_default(n, StatisticKind::UType, 1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equality::t_u;
    use crate::resample::draw_plan;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_data(seed: u64, n: usize, m: usize, shift: &[f64]) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n * m)
            .map(|i| rng.sample::<f64, _>(StandardNormal) + shift[i % m])
            .collect();
        DataMatrix::from_row_major(n, m, v).unwrap()
    }

    fn pairs(n: usize, r: usize, seed: u64) -> ResamplePlan {
        draw_plan(n, r, PlanKind::Pair, stream_for(seed, 0, Purpose::Statistic)).unwrap()
    }

    #[test]
    fn lambda_hand_examples() {
        let x = DataMatrix::from_column(&[0.0, 2.0]).unwrap();
        let plan = ResamplePlan::from_pairs(2, vec![[0, 1]]).unwrap();
        assert!((lambda_hat(&x, &plan, 0).unwrap() - 1.0).abs() < 1e-15);
        let x = DataMatrix::from_column(&[-1.0, 1.0]).unwrap();
        assert_eq!(lambda_hat(&x, &plan, 0).unwrap(), 0.0);
    }

    #[test]
    fn q_hand_example() {
        let x = DataMatrix::from_column(&[-1.0, 1.0]).unwrap();
        let plan = ResamplePlan::from_pairs(2, vec![[0, 1]]).unwrap();
        let (q, comps, _) = q_stat(&x, &plan).unwrap();
        assert_eq!(q, -1.0);
        assert_eq!(comps, vec![-1.0]);
    }

    #[test]
    fn constant_column_is_an_error() {
        let x = DataMatrix::from_rows(&[[1.0, 0.3], [2.0, 0.3], [0.5, 0.3]]).unwrap();
        let plan = ResamplePlan::from_pairs(3, vec![[0, 1]]).unwrap();
        assert!(matches!(q_stat(&x, &plan), Err(Error::SingularCovariance { .. })));
        assert!(q_tilde(&x, &plan).is_err());
    }

    #[test]
    fn single_plan_is_rejected() {
        let x = normal_data(1, 10, 1, &[0.0]);
        let plan = ResamplePlan::from_singles(10, vec![1, 2]).unwrap();
        assert!(matches!(q_stat(&x, &plan), Err(Error::BadConfig(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn algebraic_identity_holds(
            seed in any::<u64>(),
            n in 3usize..40,
            m in 1usize..5,
            r in 1usize..80,
            shift in -2.0f64..2.0,
        ) {
            let shifts: Vec<f64> = (0..m).map(|k| shift * (k as f64 - 1.0)).collect();
            let x = normal_data(seed, n, m, &shifts);
            let plan = pairs(n, r, seed ^ 0x5a5a);
            let (q1, c1, l1) = q_stat(&x, &plan).unwrap();
            let (q2, _, l2) = q_stat_recentred(&x, &plan).unwrap();
            prop_assert!((q1 - q2).abs() < 1e-10, "{} vs {}", q1, q2);
            for k in 0..m {
                prop_assert!((l1[k] - l2[k]).abs() < 1e-10);
            }
            prop_assert_eq!(q1, c1.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }

        #[test]
        fn column_scaling_leaves_statistics_unchanged(
            seed in any::<u64>(),
            c in 0.01f64..100.0,
            k in 0usize..3,
        ) {
            let x = normal_data(seed, 30, 3, &[0.2, -0.1, 0.0]);
            let plan = pairs(30, 60, seed);
            let y = DataMatrix::from_row_major(
                30,
                3,
                x.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i % 3 == k { c * v } else { *v })
                    .collect(),
            )
            .unwrap();
            let (qa, _, la) = q_stat(&x, &plan).unwrap();
            let (qb, _, lb) = q_stat(&y, &plan).unwrap();
            prop_assert!((qa - qb).abs() < 1e-10);
            prop_assert!((la[k] - lb[k]).abs() < 1e-10);
            prop_assert!((q_tilde(&x, &plan).unwrap() - q_tilde(&y, &plan).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn q_tilde_ignores_column_shifts(seed in any::<u64>(), a in -50.0f64..50.0) {
            let x = normal_data(seed, 25, 2, &[0.0, 0.0]);
            let plan = pairs(25, 40, seed);
            let y = x.centered_at(&[0.0, -a]).unwrap();
            prop_assert!((q_tilde(&x, &plan).unwrap() - q_tilde(&y, &plan).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn column_permutation_invariance() {
        let x = normal_data(3, 40, 3, &[0.3, -0.4, 0.1]);
        let y = x.select_columns(&[2, 0, 1]).unwrap();
        let plan = pairs(40, 100, 8);
        let (qa, _, _) = q_stat(&x, &plan).unwrap();
        let (qb, _, _) = q_stat(&y, &plan).unwrap();
        assert!((qa - qb).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_scalar_data_gives_equal_statistics() {
        let v = [-1.5, 1.5, -0.25, 0.25, -3.0, 3.0, -0.5, 0.5];
        let x = DataMatrix::from_column(&v).unwrap();
        assert_eq!(sample_mean(&x)[0], 0.0);
        for seed in 0..20 {
            let plan = pairs(8, 13, seed);
            let (q, _, _) = q_stat(&x, &plan).unwrap();
            assert!((q - q_tilde(&x, &plan).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_columns_reduce_to_scalar_statistic() {
        let x1 = normal_data(5, 12, 1, &[0.0]);
        let col = x1.column(0);
        let x2 = DataMatrix::from_rows(&col.iter().map(|&v| [v, v]).collect::<Vec<_>>()).unwrap();
        let xbar = sample_mean(&x1);
        for seed in 0..10 {
            let plan = pairs(12, 9, seed);
            let scalar = t_u(&x1, &xbar, &plan).unwrap();
            assert!((q_tilde(&x2, &plan).unwrap() - scalar).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_value_approaches_normal_quantile() {
        let x = normal_data(11, 2000, 1, &[0.0]);
        let c = ineq_critical_value(&x, rn_default_ineq(2000), 5000, 0.05, 3).unwrap();
        assert!((c - 1.6448536).abs() < 0.1, "c = {c}");
    }

    #[test]
    fn critical_value_nonincreasing_in_alpha() {
        let x = normal_data(12, 200, 2, &[0.0, 0.0]);
        let mut prev = f64::INFINITY;
        for a in [0.01, 0.05, 0.1, 0.2, 0.3] {
            let c = ineq_critical_value(&x, 464, 500, a, 4).unwrap();
            assert!(c <= prev);
            prev = c;
        }
        assert!(ineq_critical_value(&x, 464, 99, 0.05, 4).is_err());
    }

    #[test]
    fn deep_null_and_fixed_alternative() {
        let cfg = IneqConfig {
            l: 300,
            ..IneqConfig::default()
        };
        let deep = normal_data(21, 1000, 2, &[-10.0, -10.0]);
        let r = test_inequality(&deep, &cfg, 1).unwrap();
        assert!(!r.reject);
        assert_eq!(r.reject, r.q_stat > r.critical_value);
        let alt = normal_data(22, 1000, 2, &[0.5, 0.0]);
        let r = test_inequality(&alt, &cfg, 1).unwrap();
        assert!(r.reject, "{r:?}");
        assert_eq!(r.rn_used, 3968);
        assert_eq!(r.l_used, Some(300));
    }

    #[test]
    fn scalar_asymptotic_variant() {
        let cfg = IneqConfig::default();
        let neg = normal_data(31, 1000, 1, &[-0.5]);
        let r = test_inequality_scalar_asymptotic(&neg, &cfg, 2).unwrap();
        assert!(r.lambda_hat[0] > 10.0);
        assert!(!r.reject);
        let pos = normal_data(31, 1000, 1, &[0.5]);
        assert!(test_inequality_scalar_asymptotic(&pos, &cfg, 2).unwrap().reject);
        let two = normal_data(1, 50, 2, &[0.0, 0.0]);
        assert!(test_inequality_scalar_asymptotic(&two, &cfg, 2).is_err());
    }
}
