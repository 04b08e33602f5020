//! Seeded index draws for the resampled statistics.
//!
//! A uniformly random permutation contributes only its first coordinate to
//! the mean-type statistic and its first two coordinates to the U-type
//! statistic. The first coordinate of a uniform permutation is uniform on
//! `{0..n-1}` and the first two form a uniform ordered pair of distinct
//! indices, so plans sample those directly instead of materialising
//! permutations. The induced law is exactly the same.
//!
//! Random streams come from ChaCha8, a counter-based generator: the master
//! seed fixes the key and [`stream_for`] maps `(replication, purpose)` to the
//! 64-bit stream selector `replication << 4 | purpose`. Distinct selectors
//! never share keystream, so replications can be generated in any order or
//! on any number of workers with identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanKind {
    /// One index per draw (mean-type statistic).
    Single,
    /// One ordered pair of distinct indices per draw (U-type statistic).
    Pair,
}

/// What a random stream is used for. The discriminant is part of the stream
/// selector and must stay below 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Purpose {
    Data = 0,
    Statistic = 1,
    CriticalValue = 2,
    Confidence = 3,
    Truth = 4,
}

/// Largest replication index accepted by [`stream_for`].
pub const MAX_REPLICATION: u64 = (1 << 60) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub master_seed: u64,
    pub replication: u64,
    pub purpose: Purpose,
}

impl StreamId {
    /// ChaCha stream selector: `replication << 4 | purpose`.
    pub fn selector(&self) -> u64 {
        (self.replication << 4) | self.purpose as u64
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.selector());
        rng
    }
}

/// # Panics
///
/// If `replication > MAX_REPLICATION`.
pub fn stream_for(master_seed: u64, replication: u64, purpose: Purpose) -> StreamId {
    assert!(
        replication <= MAX_REPLICATION,
        "replication index {replication} exceeds 2^60 - 1"
    );
    StreamId {
        master_seed,
        replication,
        purpose,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Indices {
    Single(Vec<u32>),
    Pair(Vec<[u32; 2]>),
}

/// `R_n` index draws into a sample of size `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    n: usize,
    indices: Indices,
    stream: Option<StreamId>,
}

impl ResamplePlan {
    /// Builds a plan from explicit single indices.
    pub fn from_singles(n: usize, indices: Vec<u32>) -> Result<Self> {
        check_sizes(n, indices.len(), PlanKind::Single)?;
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= n) {
            return Err(Error::BadSize(format!("index {bad} out of range for n = {n}")));
        }
        Ok(Self {
            n,
            indices: Indices::Single(indices),
            stream: None,
        })
    }

    /// Builds a plan from explicit ordered pairs.
    pub fn from_pairs(n: usize, pairs: Vec<[u32; 2]>) -> Result<Self> {
        check_sizes(n, pairs.len(), PlanKind::Pair)?;
        for &[i, j] in &pairs {
            if i as usize >= n || j as usize >= n {
                return Err(Error::BadSize(format!("pair ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::BadSize(format!("pair ({i}, {j}) repeats an index")));
            }
        }
        Ok(Self {
            n,
            indices: Indices::Pair(pairs),
            stream: None,
        })
    }

    pub fn kind(&self) -> PlanKind {
        match self.indices {
            Indices::Single(_) => PlanKind::Single,
            Indices::Pair(_) => PlanKind::Pair,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of draws `R_n`.
    pub fn len(&self) -> usize {
        match &self.indices {
            Indices::Single(v) => v.len(),
            Indices::Pair(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn singles(&self) -> Option<&[u32]> {
        match &self.indices {
            Indices::Single(v) => Some(v),
            Indices::Pair(_) => None,
        }
    }

    pub fn pairs(&self) -> Option<&[[u32; 2]]> {
        match &self.indices {
            Indices::Pair(v) => Some(v),
            Indices::Single(_) => None,
        }
    }

    /// Stream the plan was drawn from, if any.
    pub fn stream(&self) -> Option<StreamId> {
        self.stream
    }
}

fn check_sizes(n: usize, rn: usize, kind: PlanKind) -> Result<()> {
    let min_n = match kind {
        PlanKind::Single => 1,
        PlanKind::Pair => 2,
    };
    if n < min_n {
        return Err(Error::BadSize(format!(
            "{kind:?} plans need n >= {min_n}, got {n}"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::BadSize(format!("n = {n} exceeds the 32-bit index range")));
    }
    if rn < 1 {
        return Err(Error::BadSize("R_n must be at least 1".into()));
    }
    Ok(())
}

/// Draws successive independent plans from one stream.
#[derive(Debug, Clone)]
pub struct PlanSampler {
    rng: ChaCha8Rng,
    stream: StreamId,
}

impl PlanSampler {
    pub fn new(stream: StreamId) -> Self {
        Self {
            rng: stream.rng(),
            stream,
        }
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn next_plan(&mut self, n: usize, rn: usize, kind: PlanKind) -> Result<ResamplePlan> {
        check_sizes(n, rn, kind)?;
        let indices = match kind {
            PlanKind::Single => {
                let mut v = Vec::with_capacity(rn);
                self.fill_singles(n, rn, &mut v);
                Indices::Single(v)
            }
            PlanKind::Pair => {
                let mut v = Vec::with_capacity(rn);
                self.fill_pairs(n, rn, &mut v);
                Indices::Pair(v)
            }
        };
        Ok(ResamplePlan {
            n,
            indices,
            stream: Some(self.stream),
        })
    }

    /// Overwrites `buf` with `rn` uniform indices. Callers must have checked
    /// `1 <= n <= u32::MAX`.
    pub(crate) fn fill_singles(&mut self, n: usize, rn: usize, buf: &mut Vec<u32>) {
        let n = n as u32;
        buf.clear();
        buf.extend((0..rn).map(|_| self.rng.random_range(0..n)));
    }

    /// Overwrites `buf` with `rn` uniform ordered pairs of distinct indices.
    /// Callers must have checked `2 <= n <= u32::MAX`.
    pub(crate) fn fill_pairs(&mut self, n: usize, rn: usize, buf: &mut Vec<[u32; 2]>) {
        let n = n as u32;
        buf.clear();
        buf.extend((0..rn).map(|_| {
            let i = self.rng.random_range(0..n);
            let j = self.rng.random_range(0..n - 1);
            [i, if j >= i { j + 1 } else { j }]
        }));
    }
}

/// Draws one plan from `stream`.
pub fn draw_plan(n: usize, rn: usize, kind: PlanKind, stream: StreamId) -> Result<ResamplePlan> {
    PlanSampler::new(stream).next_plan(n, rn, kind)
}

/// Exact law of a single draw: every index with probability `1/n`.
pub fn enumerate_singles(n: usize) -> Vec<(u32, f64)> {
    let p = 1.0 / n as f64;
    (0..n as u32).map(|i| (i, p)).collect()
}

/// Exact law of a pair draw: every ordered pair `i != j` with probability
/// `1/(n(n-1))`.
pub fn enumerate_pairs(n: usize) -> Vec<([u32; 2], f64)> {
    if n < 2 {
        return Vec::new();
    }
    let p = 1.0 / (n * (n - 1)) as f64;
    let n = n as u32;
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| ([i, j], p)))
        .collect()
}
