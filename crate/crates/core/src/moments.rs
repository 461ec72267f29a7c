//! Ensemble moment estimates shared by the positive-P and wave-function
//! engines, with deterministic parallel accumulation.
//!
//! Trajectories are processed in fixed-size blocks; each block accumulates
//! sequentially and blocks are merged in a fixed pairwise tree, so the result
//! is bit-identical for any thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-trajectory observables recorded at every sample time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(usize)]
pub enum Observable {
    /// `<a^dagger a>`
    Na,
    /// `<b^dagger b>`
    Nb,
    Alpha,
    AlphaPlus,
    Beta,
    BetaPlus,
    Xa,
    Ya,
    /// `<X_a^2>`
    Xa2,
    Ya2,
    Xb,
    Yb,
    Xb2,
    Yb2,
    /// Trajectory amplitude magnitude `sqrt|alpha alpha+|`.
    AbsAlpha,
}

pub const N_OBSERVABLES: usize = 15;

pub type ObservableRecord = [Complex64; N_OBSERVABLES];

/// Trajectories per deterministic accumulation block.
pub const BLOCK_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl ComplexEstimate {
    pub fn exact(mean: Complex64) -> Self {
        Self {
            mean,
            stderr_re: 0.0,
            stderr_im: 0.0,
        }
    }
}

/// Welford/Chan running moments for one sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotAccumulator {
    count: u64,
    mean: ObservableRecord,
    m2_re: [f64; N_OBSERVABLES],
    m2_im: [f64; N_OBSERVABLES],
}

impl Default for SnapshotAccumulator {
    fn default() -> Self {
        Self {
            count: 0,
            mean: [Complex64::new(0.0, 0.0); N_OBSERVABLES],
            m2_re: [0.0; N_OBSERVABLES],
            m2_im: [0.0; N_OBSERVABLES],
        }
    }
}

impl SnapshotAccumulator {
    pub fn push(&mut self, x: &ObservableRecord) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &xi) in x.iter().enumerate() {
            let delta = xi - self.mean[i];
            self.mean[i] += delta / n;
            let after = xi - self.mean[i];
            self.m2_re[i] += delta.re * after.re;
            self.m2_im[i] += delta.im * after.im;
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return self.clone();
        }
        if self.count == 0 {
            return other.clone();
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut out = Self {
            count: self.count + other.count,
            ..Default::default()
        };
        for i in 0..N_OBSERVABLES {
            let delta = other.mean[i] - self.mean[i];
            out.mean[i] = self.mean[i] + delta * (nb / n);
            out.m2_re[i] = self.m2_re[i] + other.m2_re[i] + delta.re * delta.re * na * nb / n;
            out.m2_im[i] = self.m2_im[i] + other.m2_im[i] + delta.im * delta.im * na * nb / n;
        }
        out
    }

    pub fn finish(&self) -> MomentSnapshot {
        let n = self.count as f64;
        let se = |m2: f64| {
            if self.count > 1 {
                (m2.max(0.0) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            }
        };
        let mut estimates = [ComplexEstimate::default(); N_OBSERVABLES];
        for (i, e) in estimates.iter_mut().enumerate() {
            *e = ComplexEstimate {
                mean: self.mean[i],
                stderr_re: se(self.m2_re[i]),
                stderr_im: se(self.m2_im[i]),
            };
        }
        MomentSnapshot {
            count: self.count,
            estimates,
        }
    }
}

/// Ensemble estimates at one sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSnapshot {
    pub count: u64,
    pub estimates: [ComplexEstimate; N_OBSERVABLES],
}

impl MomentSnapshot {
    #[inline]
    pub fn get(&self, obs: Observable) -> &ComplexEstimate {
        &self.estimates[obs as usize]
    }

    /// Real part of the mean with its standard error.
    pub fn real(&self, obs: Observable) -> (f64, f64) {
        let e = self.get(obs);
        (e.mean.re, e.stderr_re)
    }
}

/// Time-gridded ensemble moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub snapshots: Vec<MomentSnapshot>,
    /// Trajectories launched.
    pub n_traj: u64,
    /// Trajectories discarded for exceeding the divergence bound.
    pub n_diverged: u64,
    /// False when more than 1% of trajectories diverged.
    pub valid: bool,
}

/// Fraction of diverged trajectories above which a run is marked invalid.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

impl MomentSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&MomentSnapshot> {
        self.snapshots.last()
    }

    pub fn real_series(&self, obs: Observable) -> Vec<(f64, f64)> {
        self.snapshots.iter().map(|s| s.real(obs)).collect()
    }
}

/// Accumulated moments over a set of trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesAccumulator {
    pub samples: Vec<SnapshotAccumulator>,
    pub n_traj: u64,
    pub n_diverged: u64,
}

impl SeriesAccumulator {
    pub fn new(n_samples: usize) -> Self {
        Self {
            samples: vec![SnapshotAccumulator::default(); n_samples],
            n_traj: 0,
            n_diverged: 0,
        }
    }

    /// Adds one trajectory; `None` marks a diverged trajectory, which is
    /// counted and excluded from every sample time.
    pub fn push(&mut self, path: Option<&[ObservableRecord]>) {
        self.n_traj += 1;
        match path {
            Some(records) => {
                for (acc, rec) in self.samples.iter_mut().zip(records) {
                    acc.push(rec);
                }
            }
            None => self.n_diverged += 1,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a.merge(b))
                .collect(),
            n_traj: self.n_traj + other.n_traj,
            n_diverged: self.n_diverged + other.n_diverged,
        }
    }

    pub fn finish(&self, times: Vec<f64>) -> MomentSeries {
        let valid = (self.n_diverged as f64) <= MAX_DIVERGED_FRACTION * self.n_traj as f64;
        MomentSeries {
            times,
            snapshots: self.samples.iter().map(SnapshotAccumulator::finish).collect(),
            n_traj: self.n_traj,
            n_diverged: self.n_diverged,
            valid,
        }
    }
}

/// Every `stride`-th step index in `0..=n_steps`, always including the last.
pub fn sample_step_indices(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n_steps).step_by(stride.max(1)).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

/// Pairwise merge in a fixed tree order.
pub fn tree_reduce<T: Clone>(mut items: Vec<T>, merge: impl Fn(&T, &T) -> T) -> Option<T> {
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        items = items
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => merge(a, b),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    items.pop()
}

/// Runs `n_traj` trajectories in parallel blocks and reduces them
/// deterministically. `run` returns the observable records for one stream id,
/// or `None` if the trajectory diverged; it may fail, in which case the first
/// error in stream order is returned.
pub fn accumulate_ensemble<E, F>(n_traj: u64, n_samples: usize, run: F) -> Result<SeriesAccumulator, E>
where
    E: Send,
    F: Fn(u64) -> Result<Option<Vec<ObservableRecord>>, E> + Sync,
{
    let n_blocks = n_traj.div_ceil(BLOCK_SIZE as u64);
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = SeriesAccumulator::new(n_samples);
            let start = b * BLOCK_SIZE as u64;
            let end = (start + BLOCK_SIZE as u64).min(n_traj);
            for id in start..end {
                let path = run(id)?;
                acc.push(path.as_deref());
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, E>>()?;
    Ok(tree_reduce(blocks, SeriesAccumulator::merge).unwrap_or_else(|| SeriesAccumulator::new(n_samples)))
}
