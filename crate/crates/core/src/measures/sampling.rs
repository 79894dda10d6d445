//! Seeded sampling of finite paths and empirical frequency checks.
//!
//! Markov paths start at `w ~ q` and follow `p^(n)`. IFS paths start at
//! `w ~ q_w / sum q` and move along `e` with probability `p_e q_{r(e)} / q_w`,
//! a distribution because `M q = q`. Either way the probability of a cylinder
//! is its measure divided by the total mass.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::path::{enumerate_paths, FinitePath};
use crate::sparse::Window;
use crate::spectral::TotalMass;

use super::{IfsMeasure, MarkovMeasure, MeasureError, PathMeasure};

#[derive(Debug, Clone, Copy)]
pub enum Sampleable<'a> {
    Markov(&'a MarkovMeasure),
    /// With an optional fixed start vertex, required when the mass is infinite.
    Ifs(&'a IfsMeasure, Option<i64>),
}

/// Owns its random state; clone with [`PathSampler::fork`] for independent streams.
#[derive(Debug, Clone)]
pub struct PathSampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl PathSampler {
    pub fn new(seed: u64) -> Self {
        PathSampler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A sampler on stream `stream` of the same seed.
    pub fn fork(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        PathSampler { seed: self.seed, rng }
    }

    fn pick<T: Copy>(&mut self, options: &[(T, f64)]) -> Result<T, MeasureError> {
        let dist = WeightedIndex::new(options.iter().map(|o| o.1)).map_err(|_| MeasureError::EmptySupport)?;
        Ok(options[dist.sample(&mut self.rng)].0)
    }

    pub fn sample(&mut self, measure: Sampleable<'_>, len: usize) -> Result<FinitePath, MeasureError> {
        match measure {
            Sampleable::Markov(m) => self.sample_markov(m, len),
            Sampleable::Ifs(m, start) => self.sample_ifs(m, len, start),
        }
    }

    fn sample_markov(&mut self, m: &MarkovMeasure, len: usize) -> Result<FinitePath, MeasureError> {
        let starts: Vec<(i64, f64)> = m.q().iter().map(|(&v, &x)| (v, x)).collect();
        let mut path = FinitePath::root(self.pick(&starts)?);
        let d = m.diagram();
        for level in 0..len {
            let options = d
                .out_edges(level, path.end())
                .into_iter()
                .map(|e| Ok((e, m.transition(level, &e)?)))
                .collect::<Result<Vec<_>, MeasureError>>()?;
            path = path.extended(self.pick(&options)?);
        }
        Ok(path)
    }

    fn sample_ifs(&mut self, m: &IfsMeasure, len: usize, start: Option<i64>) -> Result<FinitePath, MeasureError> {
        let q = |v: i64| {
            m.q(v).ok_or(MeasureError::OutsideWindow {
                vertex: v,
                window: m.window(),
            })
        };
        let first = match (start, m.total_mass()) {
            (Some(v), _) => v,
            (None, TotalMass::Finite(_)) => {
                let starts: Vec<(i64, f64)> = m.harmonic().q.iter().collect();
                self.pick(&starts)?
            }
            (None, TotalMass::Infinite) => return Err(MeasureError::InfiniteMass),
        };
        let mut path = FinitePath::root(first);
        let d = m.diagram();
        for level in 0..len {
            let w = path.end();
            let qw = q(w)?;
            let options = d
                .out_edges(level, w)
                .into_iter()
                .map(|e| Ok((e, m.weight(&e) * q(e.target)? / qw)))
                .collect::<Result<Vec<_>, MeasureError>>()?;
            path = path.extended(self.pick(&options)?);
        }
        Ok(path)
    }
}

/// One path of `len` edges from a fresh sampler seeded with `seed`.
pub fn sample_path(measure: Sampleable<'_>, len: usize, seed: u64) -> Result<FinitePath, MeasureError> {
    PathSampler::new(seed).sample(measure, len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRow {
    pub cylinder: String,
    pub exact: f64,
    pub empirical: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub len: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub rows: Vec<EmpiricalRow>,
    pub max_abs_z: f64,
    /// Every `|z| < 4`.
    pub pass: bool,
}

/// Sample `n_samples` paths of `len` edges and compare cylinder frequencies
/// with exact probabilities using binomial standard errors.
pub fn empirical_check(
    measure: Sampleable<'_>,
    len: usize,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalReport, MeasureError> {
    let (pm, starts, total): (&dyn PathMeasure, Window, f64) = match measure {
        Sampleable::Markov(m) => (m, m.window(), m.q().values().sum()),
        Sampleable::Ifs(m, Some(v)) => (m, Window::new(v, v), m.q(v).unwrap_or(0.0)),
        Sampleable::Ifs(m, None) => match m.total_mass() {
            TotalMass::Finite(t) => (m, m.window(), t),
            TotalMass::Infinite => return Err(MeasureError::InfiniteMass),
        },
    };
    if !(total > 0.0) {
        return Err(MeasureError::EmptySupport);
    }
    let mut sampler = PathSampler::new(seed);
    let mut counts: HashMap<FinitePath, usize> = HashMap::new();
    for _ in 0..n_samples {
        *counts.entry(sampler.sample(measure, len)?).or_default() += 1;
    }
    let n = n_samples as f64;
    let mut rows = Vec::new();
    for c in enumerate_paths(pm.diagram(), len, starts) {
        let exact = pm.value(&c)? / total;
        let k = counts.get(&c).copied().unwrap_or(0) as f64;
        let empirical = k / n;
        let se = (exact * (1.0 - exact) / n).sqrt();
        let z = if se > 0.0 {
            (empirical - exact) / se
        } else if empirical == exact {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(EmpiricalRow {
            cylinder: c.to_string(),
            exact,
            empirical,
            z,
        });
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(EmpiricalReport {
        len,
        n_samples,
        seed,
        rows,
        max_abs_z,
        pass: max_abs_z < 4.0,
    })
}
