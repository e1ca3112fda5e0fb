//! Run-level metrics and their aggregation across replications.

/// Metrics of a single simulation run.
///
/// Means carry their sample counts so replication-level confidence
/// intervals can be computed downstream. Latency and message means cover
/// every arrival with an outcome, successful or not; arrivals still pending
/// when the run ends are reported as `in_progress`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccessMetrics {
    /// Ratio of truly active declared devices to all declared devices. For
    /// the signature protocol this is the per-frame ratio averaged over
    /// frames with at least one declaration; for the baseline it is the
    /// fraction of useful among all issued uplink grants. Runs without any
    /// declaration report 1.0 by convention.
    pub goodput: f64,
    /// Fraction of resolved arrivals that completed access and delivered
    /// their data. 1.0 by convention when nothing was resolved.
    pub reliability: f64,
    /// Mean milliseconds from arrival to access completion (or to failure
    /// declaration for failed arrivals).
    pub mean_latency_ms: f64,
    /// Mean protocol messages per resolved arrival.
    pub mean_messages: f64,
    /// Declared-active devices that were not transmitting (signature), or
    /// phantom grants triggered by false alarms (baseline).
    pub false_positive_count: u64,
    /// Signature collisions among contenders (signature) or connection
    /// request collisions (baseline).
    pub collision_count: u64,
    /// Signature frames simulated, or sub-frames for the baseline.
    pub frames_run: u32,
    pub arrivals: u64,
    pub successes: u64,
    pub failures: u64,
    pub in_progress: u64,
    /// Largest per-contention message count seen in the run.
    pub max_episode_messages: u32,
}

impl AccessMetrics {
    /// Every arrival is eventually a success, a failure, or still pending.
    pub fn conservation_holds(&self) -> bool {
        self.arrivals == self.successes + self.failures + self.in_progress
    }
}

/// Mean with a replication-level 95% confidence half-width. The half-width
/// is undefined (`None`) for a single replication.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci95: Option<f64>,
}

impl MetricSummary {
    /// Normal-approximation interval over replication means.
    pub fn from_samples(samples: &[f64]) -> MetricSummary {
        let n = samples.len();
        assert!(n > 0, "summary of zero samples");
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MetricSummary { mean, ci95: None };
        }
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        MetricSummary {
            mean,
            ci95: Some(1.96 * (var / n as f64).sqrt()),
        }
    }

    /// True when two summaries are compatible within their joint interval;
    /// degenerate intervals fall back to the given slack.
    pub fn overlaps_within(&self, other: &MetricSummary, slack: f64) -> bool {
        let half = self.ci95.unwrap_or(slack) + other.ci95.unwrap_or(slack);
        (self.mean - other.mean).abs() <= half.max(slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_single_sample_has_no_interval() {
        let s = MetricSummary::from_samples(&[0.5]);
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.ci95, None);
    }

    #[test]
    fn summary_interval_shrinks_with_samples() {
        let wide = MetricSummary::from_samples(&[0.0, 1.0]);
        let narrow = MetricSummary::from_samples(&[0.4, 0.5, 0.6, 0.5, 0.5, 0.5, 0.4, 0.6]);
        assert!(wide.ci95.unwrap() > narrow.ci95.unwrap());
    }

    #[test]
    fn conservation_check() {
        let m = AccessMetrics {
            goodput: 1.0,
            reliability: 1.0,
            mean_latency_ms: 0.0,
            mean_messages: 0.0,
            false_positive_count: 0,
            collision_count: 0,
            frames_run: 0,
            arrivals: 10,
            successes: 6,
            failures: 3,
            in_progress: 1,
            max_episode_messages: 0,
        };
        assert!(m.conservation_holds());
    }
}
