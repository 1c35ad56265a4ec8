use serde::Serialize;

/// Mergeable running mean/variance (Welford with Chan's pairwise update).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Mean and standard error of a correlated series by non-overlapping batch
/// means, with about sqrt(n) batches of about sqrt(n) values.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let size = ((n as f64).sqrt().floor() as usize).max(1);
    let batches: Accumulator = values
        .chunks(size)
        .filter(|c| c.len() == size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    (mean, batches.std_error())
}

/// Two-sided standard normal quantile at 99%.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole: Accumulator = xs.iter().copied().collect();
        let mut left: Accumulator = xs[..333].iter().copied().collect();
        let right: Accumulator = xs[333..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count, whole.count);
        assert!((left.mean - whole.mean).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 100), (1, 100), (50, 100), (100, 100), (33_333, 100_000)] {
            let (lo, hi) = wilson_interval(k, n, Z_99);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}: [{lo}, {hi}]");
        }
        // zero successes still gives a positive upper bound, and a zero lower one
        let (lo, hi) = wilson_interval(0, 1000, Z_99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
    }

    #[test]
    fn batch_means_of_iid_matches_naive() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let (m, se) = batch_means(&xs);
        let acc: Accumulator = xs.iter().copied().collect();
        assert!((m - acc.mean).abs() < 1e-9);
        assert!(se > 0.0 && se < 10.0 * acc.std_error());
    }
}
