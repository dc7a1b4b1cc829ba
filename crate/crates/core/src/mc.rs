//! Monte Carlo plans and the parallel trial runner.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::RandomStream;
use crate::stats;

/// How a Monte Carlo estimate is run.
///
/// Trial `i` draws from `RandomStream::keyed(seed, key, i)`. Estimators that
/// are given the same plan see the same cycle draws, so their per-trial
/// differences are computed pathwise. Statistics are accumulated over the
/// cycles after `burn_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub cycles: u64,
    pub trials: u32,
    pub burn_in: u64,
    pub seed: u64,
    pub key: u64,
}

impl MonteCarlo {
    /// A plan with a 10% burn-in and key 0.
    pub fn new(cycles: u64, trials: u32, seed: u64) -> Self {
        MonteCarlo {
            cycles,
            trials,
            burn_in: cycles / 10,
            seed,
            key: 0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_key(mut self, key: u64) -> Self {
        self.key = key;
        self
    }

    pub fn with_trials(mut self, trials: u32) -> Self {
        self.trials = trials;
        self
    }

    pub fn stream(&self, trial: u32) -> RandomStream {
        RandomStream::keyed(self.seed, self.key, trial as u64)
    }

    /// Number of cycles that enter the statistics.
    pub fn window(&self) -> u64 {
        self.cycles - self.burn_in
    }

    /// Run `f` once per trial on the rayon pool and collect the results in
    /// trial order. The first error (by trial index) wins.
    pub fn run_trials<F>(&self, f: F) -> Result<TrialValues>
    where
        F: Fn(u32) -> Result<f64> + Sync,
    {
        let out: Vec<Result<f64>> = (0..self.trials).into_par_iter().map(&f).collect();
        let values = out.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(TrialValues { values })
    }
}

/// Per-trial values of one estimator, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialValues {
    pub values: Vec<f64>,
}

impl TrialValues {
    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    pub fn stderr(&self) -> f64 {
        stats::std_err(&self.values)
    }

    /// Pathwise difference `self - other`, trial by trial.
    pub fn minus(&self, other: &TrialValues) -> TrialValues {
        assert_eq!(self.values.len(), other.values.len(), "trial count mismatch");
        TrialValues {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_come_back_in_order() {
        let plan = MonteCarlo::new(1000, 8, 3);
        let v = plan.run_trials(|i| Ok(i as f64)).unwrap();
        assert_eq!(v.values, (0..8).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(plan.window(), 900);
    }

    #[test]
    fn pathwise_difference() {
        let a = TrialValues { values: vec![1.0, 2.0] };
        let b = TrialValues { values: vec![0.5, 0.5] };
        assert_eq!(a.minus(&b).values, vec![0.5, 1.5]);
    }
}
