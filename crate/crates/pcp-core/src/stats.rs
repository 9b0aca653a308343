//! Sample accumulators for the simulation report.
//!
//! Full runs produce ~10^6 relative-price samples per bucket, so percentiles
//! come from a fixed-bin histogram sketch (resolution 1e-4 over [0, 3])
//! rather than stored samples. Mean and standard deviation are exact.
//! Accumulators merge commutatively, which keeps parallel round execution
//! deterministic.

pub const HIST_LO: f64 = 0.0;
pub const HIST_HI: f64 = 3.0;
pub const HIST_BINS: usize = 30_000;

/// Histogram-backed sample summary.
#[derive(Debug, Clone)]
pub struct SampleSketch {
    bins: Vec<u64>,
    underflow: u64,
    overflow: u64,
    count: u64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl Default for SampleSketch {
    fn default() -> Self {
        Self::new()
    }
}

impl SampleSketch {
    pub fn new() -> Self {
        Self {
            bins: vec![0; HIST_BINS],
            underflow: 0,
            overflow: 0,
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        if x < HIST_LO {
            self.underflow += 1;
        } else if x >= HIST_HI {
            self.overflow += 1;
        } else {
            let bin = ((x - HIST_LO) / (HIST_HI - HIST_LO) * HIST_BINS as f64) as usize;
            self.bins[bin.min(HIST_BINS - 1)] += 1;
        }
    }

    pub fn merge(&mut self, other: &SampleSketch) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        var.max(0.0).sqrt()
    }

    /// Percentile via the histogram (bin-midpoint resolution ~1e-4).
    pub fn percentile(&self, p: f64) -> f64 {
        assert!((0.0..=100.0).contains(&p));
        if self.count == 0 {
            return f64::NAN;
        }
        let target = (p / 100.0 * self.count as f64).ceil().max(1.0) as u64;
        let mut seen = self.underflow;
        if seen >= target {
            return self.min;
        }
        let width = (HIST_HI - HIST_LO) / HIST_BINS as f64;
        for (i, &c) in self.bins.iter().enumerate() {
            seen += c;
            if seen >= target {
                return HIST_LO + (i as f64 + 0.5) * width;
            }
        }
        self.max
    }

    pub fn median(&self) -> f64 {
        self.percentile(50.0)
    }
}

/// Spearman rank correlation. Ties get average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Running mean/standard-error accumulator for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sketch_moments_and_percentiles() {
        let mut s = SampleSketch::new();
        for i in 0..10_000 {
            s.push(0.5 + (i as f64 / 9_999.0));
        }
        assert!((s.mean() - 1.0).abs() < 1e-9);
        assert!((s.median() - 1.0).abs() < 2e-4);
        assert!((s.percentile(25.0) - 0.75).abs() < 2e-4);
        assert!((s.percentile(95.0) - 1.45).abs() < 2e-4);
        let expect_std = (1.0f64 / 12.0).sqrt();
        assert!((s.std() - expect_std).abs() < 1e-3);
    }

    #[test]
    fn sketch_merge_matches_single_pass() {
        let mut a = SampleSketch::new();
        let mut b = SampleSketch::new();
        let mut whole = SampleSketch::new();
        for i in 0..1000 {
            let x = (i as f64 * 0.37) % 2.5;
            whole.push(x);
            if i % 2 == 0 {
                a.push(x);
            } else {
                b.push(x);
            }
        }
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        assert_eq!(a.median(), whole.median());
        // Summation order differs between the two paths.
        assert!((a.mean() - whole.mean()).abs() < 1e-12);
    }

    #[test]
    fn spearman_monotone() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 4.0, 9.0, 16.0, 30.0];
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        let dec: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert!((spearman(&xs, &dec) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_accumulator_stderr() {
        let mut m = MeanAccumulator::default();
        for i in 0..100 {
            m.push(if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(m.mean().abs() < 1e-12);
        assert!((m.stderr() - 0.1005).abs() < 1e-3);
    }
}
