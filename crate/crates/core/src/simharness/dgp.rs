//! Data-generating processes for the simulation designs.
//!
//! Every generator reads only from the `Data` stream of its replication, so a
//! sample is a pure function of `(spec, seed, replication)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::applications::{individual_clustering, Graph, RegressionData, SpilloverData, TailSample};
use crate::error::{Error, Result};
use crate::numkernel::DataMatrix;
use crate::resample::{stream_for, Purpose};

/// Level at which the cluster design draws its random effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectLevel {
    Family,
    City,
    /// No random effect: i.i.d. `N(θ₀, 1)`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    Exponential { rate: f64 },
    /// Density proportional to `z^{-exponent}`.
    PowerLaw { exponent: f64 },
}

/// Node-level quantity whose mean is the network statistic under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkStatistic {
    AvgClustering,
    AvgDegree,
}

/// Parameters of the strategic network model. `radius = None` means
/// `r_n = (3.6 / n)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub theta: [f64; 4],
    pub radius: Option<f64>,
}

impl Default for NetworkModel {
    fn default() -> Self {
        Self {
            theta: [-1.0, 0.25, 0.25, 1.0],
            radius: None,
        }
    }
}

impl NetworkModel {
    pub fn radius_for(&self, n: usize) -> f64 {
        self.radius.unwrap_or_else(|| (3.6 / n as f64).sqrt())
    }

    fn validate(&self) -> Result<()> {
        let [t1, t2, t3, t4] = self.theta;
        if ![t2, t3].iter().all(|v| v.is_finite()) || t1.is_nan() || !(t4 >= 0.0 && t4.is_finite()) {
            return Err(Error::BadSpec(format!("network parameters {:?} out of range", self.theta)));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::BadSpec(format!("radius {r} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum DgpSpec {
    /// `Y = θ₀ + effect + ε`, families nested in cities, `n_i` individuals.
    Cluster {
        n_c: usize,
        n_f: usize,
        n_i: usize,
        theta0: f64,
        effects: EffectLevel,
    },
    Network {
        n: usize,
        model: NetworkModel,
        statistic: NetworkStatistic,
    },
    /// Outcome regression on `(1, D, T, γ)` over a network from `model`.
    Spillover {
        n: usize,
        model: NetworkModel,
        beta: [f64; 4],
        p_treat: f64,
    },
    Tail {
        n: usize,
        family: TailFamily,
        x_min: f64,
    },
    /// i.i.d. `N(mean, I)`.
    Gaussian { n: usize, mean: Vec<f64> },
}

impl DgpSpec {
    /// The family-effect cluster design.
    pub fn cluster(n_c: usize, n_f: usize, n_i: usize, theta0: f64) -> Self {
        DgpSpec::Cluster {
            n_c,
            n_f,
            n_i,
            theta0,
            effects: EffectLevel::Family,
        }
    }

    pub fn network(n: usize, statistic: NetworkStatistic) -> Self {
        DgpSpec::Network {
            n,
            model: NetworkModel::default(),
            statistic,
        }
    }

    pub fn spillover(n: usize) -> Self {
        DgpSpec::Spillover {
            n,
            model: NetworkModel::default(),
            beta: [1.0, 0.5, -1.0, 0.5],
            p_treat: 0.3,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            DgpSpec::Cluster { n_i, .. } => n_i,
            DgpSpec::Network { n, .. }
            | DgpSpec::Spillover { n, .. }
            | DgpSpec::Tail { n, .. }
            | DgpSpec::Gaussian { n, .. } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DgpSpec::Cluster { .. } => "cluster",
            DgpSpec::Network { .. } => "network",
            DgpSpec::Spillover { .. } => "spillover",
            DgpSpec::Tail { .. } => "tail",
            DgpSpec::Gaussian { .. } => "gaussian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        match self {
            &DgpSpec::Cluster {
                n_c, n_f, n_i, theta0, ..
            } => {
                if n_c == 0 || n_f == 0 || n_i < 2 {
                    return bad(format!("cluster sizes ({n_c}, {n_f}, {n_i}) too small"));
                }
                if n_f % n_c != 0 || n_i % n_f != 0 {
                    return bad(format!(
                        "cluster sizes ({n_c}, {n_f}, {n_i}) must nest evenly"
                    ));
                }
                if !theta0.is_finite() {
                    return bad("theta0 must be finite".into());
                }
            }
            DgpSpec::Network { n, model, .. } => {
                if *n < 2 {
                    return bad("network needs at least two nodes".into());
                }
                model.validate()?;
            }
            DgpSpec::Spillover {
                n,
                model,
                beta,
                p_treat,
            } => {
                if *n < 2 {
                    return bad("spillover design needs at least two units".into());
                }
                model.validate()?;
                if !(*p_treat > 0.0 && *p_treat < 1.0) {
                    return bad(format!("p_treat = {p_treat} is outside (0, 1)"));
                }
                if beta.iter().any(|b| !b.is_finite()) {
                    return bad("beta must be finite".into());
                }
            }
            DgpSpec::Tail { n, family, x_min } => {
                if *n < 1 {
                    return bad("tail sample needs at least one draw".into());
                }
                if !(*x_min > 0.0 && x_min.is_finite()) {
                    return bad(format!("x_min = {x_min} must be positive"));
                }
                match *family {
                    TailFamily::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                        return bad(format!("rate = {rate} must be positive"))
                    }
                    TailFamily::PowerLaw { exponent } if !(exponent > 1.0 && exponent.is_finite()) => {
                        return bad(format!("exponent = {exponent} must exceed 1"))
                    }
                    _ => {}
                }
            }
            DgpSpec::Gaussian { n, mean } => {
                if *n < 2 || mean.is_empty() {
                    return bad("gaussian design needs n >= 2 and m >= 1".into());
                }
                if mean.iter().any(|v| !v.is_finite()) {
                    return bad("mean must be finite".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSample {
    pub y: Vec<f64>,
    pub family: Vec<usize>,
    pub city: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    pub graph: Graph,
    pub z: Vec<bool>,
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverSample {
    pub network: NetworkSample,
    pub data: SpilloverData,
    pub regression: RegressionData,
}

/// One replication's data.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Cluster(ClusterSample),
    Network(NetworkSample, NetworkStatistic),
    Spillover(SpilloverSample),
    Tail(TailSample),
    Gaussian(DataMatrix),
}

impl Sample {
    /// Per-unit observations whose mean estimates the tested parameter:
    /// outcomes, node statistics, OLS influence terms for `β₃` (without the
    /// null subtracted), the Vuong contrast, or the raw Gaussian rows.
    pub fn moments(&self) -> Result<DataMatrix> {
        match self {
            Sample::Cluster(c) => DataMatrix::from_column(&c.y),
            Sample::Network(s, stat) => network_moments(&s.graph, *stat),
            Sample::Spillover(s) => crate::applications::influence_ols(&s.regression, 2, 0.0),
            Sample::Tail(t) => crate::applications::vuong_contrast(t),
            Sample::Gaussian(x) => Ok(x.clone()),
        }
    }
}

pub fn network_moments(g: &Graph, stat: NetworkStatistic) -> Result<DataMatrix> {
    let x: Vec<f64> = match stat {
        NetworkStatistic::AvgClustering => (0..g.n()).map(|i| individual_clustering(g, i)).collect(),
        NetworkStatistic::AvgDegree => g.degrees().into_iter().map(|d| d as f64).collect(),
    };
    DataMatrix::from_column(&x)
}

/// Draws the sample of `replication`.
pub fn generate(spec: &DgpSpec, seed: u64, replication: u64) -> Result<Sample> {
    spec.validate()?;
    let mut rng = stream_for(seed, replication, Purpose::Data).rng();
    generate_with(spec, &mut rng)
}

pub(crate) fn generate_with(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Result<Sample> {
    Ok(match spec {
        &DgpSpec::Cluster {
            n_c,
            n_f,
            n_i,
            theta0,
            effects,
        } => Sample::Cluster(cluster_with(n_c, n_f, n_i, theta0, effects, rng)),
        DgpSpec::Network { n, model, statistic } => Sample::Network(network_with(*n, model, rng), *statistic),
        DgpSpec::Spillover {
            n,
            model,
            beta,
            p_treat,
        } => Sample::Spillover(spillover_with(*n, model, beta, *p_treat, rng)?),
        DgpSpec::Tail { n, family, x_min } => Sample::Tail(tail_with(*n, *family, *x_min, rng)?),
        DgpSpec::Gaussian { n, mean } => {
            let m = mean.len();
            let values = (0..n * m)
                .map(|k| mean[k % m] + rng.sample::<f64, _>(StandardNormal))
                .collect();
            Sample::Gaussian(DataMatrix::from_row_major(*n, m, values)?)
        }
    })
}

/// Families `0..n_f` hold `n_i / n_f` consecutive individuals each; cities
/// hold `n_f / n_c` consecutive families. Effects are drawn before the
/// idiosyncratic errors.
fn cluster_with(
    n_c: usize,
    n_f: usize,
    n_i: usize,
    theta0: f64,
    effects: EffectLevel,
    rng: &mut ChaCha8Rng,
) -> ClusterSample {
    let per_family = n_i / n_f;
    let per_city = n_f / n_c;
    let family: Vec<usize> = (0..n_i).map(|i| i / per_family).collect();
    let city: Vec<usize> = family.iter().map(|f| f / per_city).collect();
    let (groups, label) = match effects {
        EffectLevel::Family => (n_f, &family),
        EffectLevel::City => (n_c, &city),
        EffectLevel::None => (0, &family),
    };
    let alpha: Vec<f64> = (0..groups).map(|_| rng.sample(StandardNormal)).collect();
    let y = (0..n_i)
        .map(|i| {
            let a = if groups == 0 { 0.0 } else { alpha[label[i]] };
            theta0 + a + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    ClusterSample { y, family, city }
}

/// Candidate pairs `(i, j)`, `i < j`, within distance `r`, in lexicographic
/// order. A bucket grid of cell width `>= r` keeps this near linear.
fn pairs_within(points: &[[f64; 2]], r: f64) -> Vec<(usize, usize)> {
    let cells = ((1.0 / r).floor() as usize).clamp(1, 4096);
    let cell_of = |v: f64| ((v * cells as f64) as usize).min(cells - 1);
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for (i, p) in points.iter().enumerate() {
        grid[cell_of(p[0]) * cells + cell_of(p[1])].push(i);
    }
    let r2 = r * r;
    let mut out = Vec::new();
    let mut near = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = (cell_of(p[0]), cell_of(p[1]));
        near.clear();
        for gx in cx.saturating_sub(1)..=(cx + 1).min(cells - 1) {
            for gy in cy.saturating_sub(1)..=(cy + 1).min(cells - 1) {
                for &j in &grid[gx * cells + gy] {
                    let q = points[j];
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                    if j > i && d2 <= r2 {
                        near.push(j);
                    }
                }
            }
        }
        near.sort_unstable();
        out.extend(near.iter().map(|&j| (i, j)));
    }
    out
}

fn has_common_neighbour(g: &Graph, i: usize, j: usize) -> bool {
    let (a, b) = (g.neighbours(i), g.neighbours(j));
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Two-round strategic model. Round one links candidate pairs on
/// `θ₁ + (Z_i + Z_j) θ₂ + ζ_ij > 0`; round two adds `θ₃` for pairs with a
/// common round-one neighbour, reusing the same `ζ_ij`. Pairs farther apart
/// than the radius never link.
fn network_with(n: usize, model: &NetworkModel, rng: &mut ChaCha8Rng) -> NetworkSample {
    let [t1, t2, t3, t4] = model.theta;
    let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let z: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let candidates = pairs_within(&positions, model.radius_for(n));
    let zeta = Normal::new(0.0, t4).expect("validated scale");
    let index: Vec<f64> = candidates
        .iter()
        .map(|&(i, j)| t1 + (z[i] as u8 + z[j] as u8) as f64 * t2 + zeta.sample(rng))
        .collect();
    let linked = |pick: &dyn Fn(usize) -> bool| -> Vec<(usize, usize)> {
        candidates.iter().enumerate().filter(|&(k, _)| pick(k)).map(|(_, &e)| e).collect()
    };
    let first = Graph::from_edges(n, &linked(&|k| index[k] > 0.0)).expect("valid candidate pairs");
    let edges = linked(&|k| {
        let (i, j) = candidates[k];
        let bonus = if has_common_neighbour(&first, i, j) { t3 } else { 0.0 };
        index[k] + bonus > 0.0
    });
    NetworkSample {
        graph: Graph::from_edges(n, &edges).expect("valid candidate pairs"),
        z,
        positions,
    }
}

/// `ε_i = ν_i + mean of ν over i's neighbours`, the mean taken as 0 for
/// isolated units.
fn spillover_with(
    n: usize,
    model: &NetworkModel,
    beta: &[f64; 4],
    p_treat: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SpilloverSample> {
    let network = network_with(n, model, rng);
    let g = &network.graph;
    let d: Vec<bool> = (0..n).map(|_| rng.random_bool(p_treat)).collect();
    let nu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let t: Vec<u32> = (0..n)
        .map(|i| g.neighbours(i).iter().filter(|&&j| d[j as usize]).count() as u32)
        .collect();
    let gamma: Vec<u32> = (0..n).map(|i| g.degree(i) as u32).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let nb = g.neighbours(i);
            let peer = if nb.is_empty() {
                0.0
            } else {
                nb.iter().map(|&j| nu[j as usize]).sum::<f64>() / nb.len() as f64
            };
            beta[0] + beta[1] * d[i] as u8 as f64 + beta[2] * t[i] as f64 + beta[3] * gamma[i] as f64 + nu[i] + peer
        })
        .collect();
    let design: Vec<[f64; 4]> = (0..n)
        .map(|i| [1.0, d[i] as u8 as f64, t[i] as f64, gamma[i] as f64])
        .collect();
    let regression = RegressionData::new(y.clone(), &design)?;
    let data = SpilloverData::new(y, d, t, gamma)?;
    Ok(SpilloverSample {
        network,
        data,
        regression,
    })
}

/// Inverse-CDF draws with `U ∈ (0, 1]`.
fn tail_with(n: usize, family: TailFamily, x_min: f64, rng: &mut ChaCha8Rng) -> Result<TailSample> {
    let z = (0..n)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            match family {
                TailFamily::Exponential { rate } => x_min - u.ln() / rate,
                TailFamily::PowerLaw { exponent } => x_min * u.powf(-1.0 / (exponent - 1.0)),
            }
        })
        .collect();
    TailSample::new(z, x_min)
}

/// Monte Carlo estimate of the expected network statistic from `draws`
/// networks on the `Truth` streams of `seed`.
pub fn network_truth(n: usize, model: &NetworkModel, statistic: NetworkStatistic, draws: usize, seed: u64) -> Result<f64> {
    use rayon::prelude::*;
    DgpSpec::Network {
        n,
        model: *model,
        statistic,
    }
    .validate()?;
    if draws == 0 {
        return Err(Error::BadSpec("truth needs at least one draw".into()));
    }
    let means: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream_for(seed, d, Purpose::Truth).rng();
            let g = network_with(n, model, &mut rng).graph;
            let x = network_moments(&g, statistic).expect("n >= 2");
            x.as_slice().iter().sum::<f64>() / n as f64
        })
        .collect();
    Ok(means.iter().sum::<f64>() / draws as f64)
}
