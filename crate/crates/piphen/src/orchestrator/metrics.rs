//! Episode metrics: workload balance and exact binomial confidence
//! intervals on success rates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Fraction of robots that reached their goal.
    pub score: f64,
    pub steps: u64,
    /// Per-agent successful-action counts s_i, agent order.
    pub action_counts: Vec<u64>,
    /// min{s_i} / max{s_i}; 1 when all counts equal.
    pub balance: f64,
    /// Simulated decision latency per control cycle, milliseconds.
    pub latency_ms: Vec<f64>,
    pub bytes_transferred: u64,
    /// Representation bytes / raw observation bytes, averaged over cycles.
    pub compression_ratio: f64,
}

impl EpisodeMetrics {
    pub fn mean_latency_ms(&self) -> f64 {
        if self.latency_ms.is_empty() {
            return 0.0;
        }
        self.latency_ms.iter().sum::<f64>() / self.latency_ms.len() as f64
    }
}

/// Workload balance min{s_i}/max{s_i}. All-zero counts are vacuously
/// balanced and score 1.
pub fn balance(counts: &[u64]) -> Result<f64, OrchestratorError> {
    if counts.is_empty() {
        return Err(OrchestratorError::Invalid("balance needs at least one agent".into()));
    }
    let max = *counts.iter().max().unwrap();
    if max == 0 {
        return Ok(1.0);
    }
    Ok(*counts.iter().min().unwrap() as f64 / max as f64)
}

/// Exact binomial confidence interval from Beta-distribution quantiles.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> Result<(f64, f64), OrchestratorError> {
    if n == 0 || k > n {
        return Err(OrchestratorError::Invalid(format!(
            "need 0 <= k <= n with n >= 1, got k={k} n={n}"
        )));
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(OrchestratorError::Invalid(format!("level {level} outside (0,1)")));
    }
    let alpha = 1.0 - level;
    let lower = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64)
            .map_err(|e| OrchestratorError::Invalid(e.to_string()))?
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64)
            .map_err(|e| OrchestratorError::Invalid(e.to_string()))?
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_examples() {
        assert_eq!(balance(&[5, 5]).unwrap(), 1.0);
        assert!((balance(&[1, 3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(balance(&[0, 0]).unwrap(), 1.0);
        assert!(balance(&[]).is_err());
    }

    #[test]
    fn balance_in_unit_interval_and_tight_iff_equal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let counts: Vec<u64> =
                (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..20)).collect();
            let b = balance(&counts).unwrap();
            assert!((0.0..=1.0).contains(&b));
            let all_equal = counts.windows(2).all(|w| w[0] == w[1]);
            assert_eq!(b == 1.0, all_equal || counts.iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn clopper_pearson_examples() {
        // k=0: upper = 1 - 0.025^(1/n)
        let (lo, hi) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(
            (hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-4,
            "hi {hi} vs {}",
            1.0 - 0.025f64.powf(0.1)
        );
        assert!((hi - 0.3085).abs() < 1e-4);
        // symmetric case
        let (lo, hi) = clopper_pearson(10, 10, 0.95).unwrap();
        assert!((lo - 0.6915).abs() < 1e-4);
        assert_eq!(hi, 1.0);
        // k=n=1 closed form
        let (lo, hi) = clopper_pearson(1, 1, 0.95).unwrap();
        assert!((lo - 0.025).abs() < 1e-4);
        assert_eq!(hi, 1.0);

        assert!(clopper_pearson(2, 1, 0.95).is_err());
        assert!(clopper_pearson(0, 0, 0.95).is_err());
    }

    #[test]
    fn interval_contains_point_estimate_and_shrinks_with_n() {
        for (k, n) in [(0u64, 5u64), (2, 5), (5, 5), (3, 10), (7, 9)] {
            let (lo, hi) = clopper_pearson(k, n, 0.95).unwrap();
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "({lo},{hi}) misses {p}");
        }
        // fixed k/n ratio, growing n: width shrinks monotonically
        let mut last = f64::INFINITY;
        for n in [5u64, 10, 20, 40, 80] {
            let (lo, hi) = clopper_pearson(n * 3 / 5, n, 0.95).unwrap();
            assert!(hi - lo < last);
            last = hi - lo;
        }
    }
}
