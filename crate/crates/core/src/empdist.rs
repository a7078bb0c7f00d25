//! Empirical distributions: binned marginals, conditional tables, sparse
//! joint-conditional tables, quantiles, and the seeded roulette-wheel sampler
//! used by every generator in the crate.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Hours,
    Kw,
    Kwh,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Hours => "h",
            Unit::Kw => "kW",
            Unit::Kwh => "kWh",
        }
    }
}

/// Contiguous half-open bins `[lower + i*width, lower + (i+1)*width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBinSpec")]
pub struct BinSpec {
    lower_edge: f64,
    width: f64,
    count: usize,
    unit: Unit,
}

#[derive(Deserialize)]
struct RawBinSpec {
    lower_edge: f64,
    width: f64,
    count: usize,
    unit: Unit,
}

impl TryFrom<RawBinSpec> for BinSpec {
    type Error = Error;

    fn try_from(raw: RawBinSpec) -> Result<Self> {
        BinSpec::new(raw.lower_edge, raw.width, raw.count, raw.unit)
    }
}

impl BinSpec {
    pub fn new(lower_edge: f64, width: f64, count: usize, unit: Unit) -> Result<Self> {
        if !lower_edge.is_finite() {
            return Err(Error::BinSpec(format!("lower edge {lower_edge} is not finite")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::BinSpec(format!("width {width} must be positive")));
        }
        if count == 0 {
            return Err(Error::BinSpec("bin count must be at least 1".into()));
        }
        Ok(BinSpec {
            lower_edge,
            width,
            count,
            unit,
        })
    }

    pub fn lower_edge(&self) -> f64 {
        self.lower_edge
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn upper_edge(&self) -> f64 {
        self.bin_lower(self.count)
    }

    /// Lower edge of bin `i`. Bin membership is defined against exactly
    /// these edges, so `bin_of(bin_lower(i)) == Some(i)`.
    pub fn bin_lower(&self, i: usize) -> f64 {
        self.lower_edge + i as f64 * self.width
    }

    pub fn bin_upper(&self, i: usize) -> f64 {
        self.bin_lower(i + 1)
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.bin_lower(i) + self.bin_upper(i))
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.count).map(|i| self.bin_lower(i)).collect()
    }

    /// Index of the bin containing `x`, or `None` when `x` is outside
    /// `[lower_edge, upper_edge)` or not finite.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !x.is_finite() || x < self.lower_edge || x >= self.upper_edge() {
            return None;
        }
        let guess = ((x - self.lower_edge) / self.width).floor();
        let mut i = (guess.max(0.0) as usize).min(self.count - 1);
        // floor() of the quotient can land one bin off near an edge
        while i > 0 && x < self.bin_lower(i) {
            i -= 1;
        }
        while i + 1 < self.count && x >= self.bin_lower(i + 1) {
            i += 1;
        }
        Some(i)
    }
}

/// Binned counts of a single variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    spec: BinSpec,
    counts: Vec<u64>,
    total: u64,
    /// Samples that fell outside the spec's range and were not counted.
    out_of_range: u64,
}

impl Histogram1D {
    fn empty(spec: BinSpec) -> Self {
        Histogram1D {
            spec,
            counts: vec![0; spec.count],
            total: 0,
            out_of_range: 0,
        }
    }

    pub fn from_counts(spec: BinSpec, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != spec.count {
            return Err(Error::BinSpec(format!(
                "{} counts for {} bins",
                counts.len(),
                spec.count
            )));
        }
        let total = counts.iter().sum();
        Ok(Histogram1D {
            spec,
            counts,
            total,
            out_of_range: 0,
        })
    }

    fn add_bin(&mut self, bin: usize) {
        self.counts[bin] += 1;
        self.total += 1;
    }

    pub fn spec(&self) -> &BinSpec {
        &self.spec
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Per-bin probabilities; all zero when the histogram is empty.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let total = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn nonempty_bins(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&i| self.counts[i] > 0)
            .collect()
    }

    /// Roulette-wheel selection: the first bin whose cumulative probability
    /// exceeds `u`. `u` must lie in `[0, 1)`; empty bins are never chosen.
    pub fn select_bin(&self, u: f64) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        let threshold = u * self.total as f64;
        let mut cumulative = 0u64;
        let mut last_nonempty = None;
        for (i, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            cumulative += c;
            last_nonempty = Some(i);
            if cumulative as f64 > threshold {
                return Some(i);
            }
        }
        last_nonempty
    }

    /// Value at which the cumulative mass reaches `q`, interpolating
    /// linearly inside the bin.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        check_level(q)?;
        if self.total == 0 {
            return Err(Error::EmptyDistribution("quantile of empty histogram".into()));
        }
        let target = q * self.total as f64;
        let mut cumulative = 0.0;
        let mut last = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            last = i;
            let c = c as f64;
            if cumulative + c >= target {
                let frac = ((target - cumulative) / c).clamp(0.0, 1.0);
                return Ok(self.spec.bin_lower(i) + frac * self.spec.width);
            }
            cumulative += c;
        }
        Ok(self.spec.bin_upper(last))
    }

    pub fn to_table(&self) -> HistogramTable {
        HistogramTable {
            unit: self.spec.unit,
            edges: self.spec.edges(),
            counts: self.counts.clone(),
            probabilities: self.probabilities(),
            out_of_range: self.out_of_range,
        }
    }
}

/// Plain export shape of a histogram: bin edges plus probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramTable {
    pub unit: Unit,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub out_of_range: u64,
}

/// Bin the in-range samples. Out-of-range samples are counted, not clamped.
pub fn build_histogram(samples: &[f64], spec: BinSpec) -> Result<Histogram1D> {
    let mut hist = Histogram1D::empty(spec);
    for &x in samples {
        match spec.bin_of(x) {
            Some(b) => hist.add_bin(b),
            None => hist.out_of_range += 1,
        }
    }
    if hist.total == 0 {
        return Err(Error::EmptyDistribution(format!(
            "no sample of {} within [{}, {})",
            samples.len(),
            spec.lower_edge,
            spec.upper_edge()
        )));
    }
    Ok(hist)
}

/// Counts of a target variable per bin of a conditioning variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    cond_spec: BinSpec,
    target_spec: BinSpec,
    rows: Vec<Histogram1D>,
    out_of_range: u64,
}

impl ConditionalTable {
    pub fn cond_spec(&self) -> &BinSpec {
        &self.cond_spec
    }

    pub fn target_spec(&self) -> &BinSpec {
        &self.target_spec
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn count(&self, cond_bin: usize, target_bin: usize) -> u64 {
        self.rows[cond_bin].counts[target_bin]
    }

    /// Target distribution for a conditioning bin; `None` when no pair fell
    /// in that bin.
    pub fn row(&self, cond_bin: usize) -> Option<&Histogram1D> {
        self.rows.get(cond_bin).filter(|h| !h.is_empty())
    }

    pub fn row_for(&self, x: f64) -> Option<&Histogram1D> {
        self.cond_spec.bin_of(x).and_then(|b| self.row(b))
    }

    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&r| self.rows[r].is_empty())
            .collect()
    }

    /// Number of counted pairs per conditioning bin.
    pub fn cond_marginal(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.total).collect()
    }

    /// Column sums: the target's marginal over the counted pairs.
    pub fn target_marginal(&self) -> Vec<u64> {
        let mut out = vec![0; self.target_spec.count];
        for row in &self.rows {
            for (o, c) in out.iter_mut().zip(&row.counts) {
                *o += c;
            }
        }
        out
    }
}

/// Row `r` of the result is the histogram of `{y : x in bin r}`. Pairs with
/// either coordinate out of range are counted in `out_of_range`.
pub fn build_conditional(
    pairs: &[(f64, f64)],
    cond_spec: BinSpec,
    target_spec: BinSpec,
) -> ConditionalTable {
    let mut rows = vec![Histogram1D::empty(target_spec); cond_spec.count];
    let mut out_of_range = 0;
    for &(x, y) in pairs {
        match (cond_spec.bin_of(x), target_spec.bin_of(y)) {
            (Some(r), Some(t)) => rows[r].add_bin(t),
            _ => out_of_range += 1,
        }
    }
    ConditionalTable {
        cond_spec,
        target_spec,
        rows,
        out_of_range,
    }
}

/// Result of looking up a conditioning tuple in a joint table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointLookup<'a> {
    Found(&'a Histogram1D),
    NoOccurrence,
}

/// Sparse map from a tuple of conditioning bins to the target histogram
/// observed in that cell. Only observed cells are stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConditionalTable {
    cond_specs: Vec<BinSpec>,
    target_spec: BinSpec,
    #[serde(with = "cell_list")]
    cells: BTreeMap<Vec<usize>, Histogram1D>,
    out_of_range: u64,
}

impl JointConditionalTable {
    pub fn cond_specs(&self) -> &[BinSpec] {
        &self.cond_specs
    }

    pub fn target_spec(&self) -> &BinSpec {
        &self.target_spec
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&[usize], &Histogram1D)> {
        self.cells.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn lookup_bins(&self, bins: &[usize]) -> JointLookup<'_> {
        match self.cells.get(bins) {
            Some(h) => JointLookup::Found(h),
            None => JointLookup::NoOccurrence,
        }
    }

    /// Looks up the cell containing `conditions`. Values outside a
    /// conditioning range also yield `NoOccurrence`.
    pub fn lookup(&self, conditions: &[f64]) -> JointLookup<'_> {
        match self.bins_of(conditions) {
            Some(bins) => self.lookup_bins(&bins),
            None => JointLookup::NoOccurrence,
        }
    }

    pub fn bins_of(&self, conditions: &[f64]) -> Option<Vec<usize>> {
        if conditions.len() != self.cond_specs.len() {
            return None;
        }
        self.cond_specs
            .iter()
            .zip(conditions)
            .map(|(s, &x)| s.bin_of(x))
            .collect()
    }
}

mod cell_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Histogram1D;

    #[derive(Serialize, Deserialize)]
    struct Cell {
        bins: Vec<usize>,
        histogram: Histogram1D,
    }

    pub fn serialize<S: Serializer>(
        cells: &BTreeMap<Vec<usize>, Histogram1D>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<Cell> = cells
            .iter()
            .map(|(k, v)| Cell {
                bins: k.clone(),
                histogram: v.clone(),
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Vec<usize>, Histogram1D>, D::Error> {
        let list = Vec::<Cell>::deserialize(d)?;
        Ok(list.into_iter().map(|c| (c.bins, c.histogram)).collect())
    }
}

/// Sparse analogue of [`build_conditional`] over tuples of conditioning bins.
pub fn build_joint_conditional<const N: usize>(
    tuples: &[([f64; N], f64)],
    cond_specs: [BinSpec; N],
    target_spec: BinSpec,
) -> JointConditionalTable {
    let mut cells: BTreeMap<Vec<usize>, Histogram1D> = BTreeMap::new();
    let mut out_of_range = 0;
    for (conditions, target) in tuples {
        let bins: Option<Vec<usize>> = cond_specs
            .iter()
            .zip(conditions)
            .map(|(s, &x)| s.bin_of(x))
            .collect();
        match (bins, target_spec.bin_of(*target)) {
            (Some(bins), Some(t)) => cells
                .entry(bins)
                .or_insert_with(|| Histogram1D::empty(target_spec))
                .add_bin(t),
            _ => out_of_range += 1,
        }
    }
    JointConditionalTable {
        cond_specs: cond_specs.to_vec(),
        target_spec,
        cells,
        out_of_range,
    }
}

/// A reproducible stream of uniform variates. Equal `(seed, stream_id)`
/// pairs produce identical sequences.
#[derive(Clone, Debug)]
pub struct SeededSampler {
    seed: u64,
    stream_id: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl SeededSampler {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededSampler {
            seed,
            stream_id,
            draws: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of variates drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform variate in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Where inside the selected bin a sampled value is placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WithinBin {
    #[default]
    Uniform,
    Midpoint,
}

/// Uniform value inside bin `bin` (or its midpoint). Always consumes one
/// variate so streams stay aligned across modes.
pub fn sample_in_bin(
    spec: &BinSpec,
    bin: usize,
    sampler: &mut SeededSampler,
    within: WithinBin,
) -> f64 {
    let u = sampler.uniform();
    let lo = spec.bin_lower(bin);
    let hi = spec.bin_upper(bin);
    match within {
        WithinBin::Midpoint => spec.midpoint(bin),
        WithinBin::Uniform => {
            let v = lo + u * (hi - lo);
            if v < hi {
                v
            } else {
                lo
            }
        }
    }
}

/// Roulette-wheel sample: pick a bin with one uniform, then a value inside
/// it with a second, independent uniform.
pub fn rws_sample(
    dist: &Histogram1D,
    sampler: &mut SeededSampler,
    within: WithinBin,
) -> Result<f64> {
    rws_sample_bin(dist, sampler, within).map(|(_, v)| v)
}

/// As [`rws_sample`], also returning the selected bin.
pub fn rws_sample_bin(
    dist: &Histogram1D,
    sampler: &mut SeededSampler,
    within: WithinBin,
) -> Result<(usize, f64)> {
    let u = sampler.uniform();
    let bin = dist
        .select_bin(u)
        .ok_or_else(|| Error::EmptyDistribution("roulette wheel over empty histogram".into()))?;
    Ok((bin, sample_in_bin(&dist.spec, bin, sampler, within)))
}

/// Roulette-wheel selection over arbitrary non-negative weights.
pub fn select_weighted(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let threshold = u * total;
    let mut cumulative = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last = Some(i);
        if cumulative > threshold {
            return Some(i);
        }
    }
    last
}

fn check_level(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")))
    }
}

/// Linear-interpolated order statistic (type 7) of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    check_level(q)?;
    let n = sorted.len();
    if n == 0 {
        return Err(Error::EmptyDistribution("quantile of empty sample".into()));
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Linear-interpolated order statistic (type 7) of unsorted samples.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in quantile input".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bins(lower: f64, count: usize) -> BinSpec {
        BinSpec::new(lower, 1.0, count, Unit::Hours).unwrap()
    }

    #[test]
    fn bin_spec_rejects_bad_parameters() {
        assert!(BinSpec::new(0.0, 0.0, 3, Unit::Kw).is_err());
        assert!(BinSpec::new(0.0, -1.0, 3, Unit::Kw).is_err());
        assert!(BinSpec::new(0.0, 1.0, 0, Unit::Kw).is_err());
        assert!(BinSpec::new(f64::NAN, 1.0, 1, Unit::Kw).is_err());
        let json = r#"{"lower_edge":0.0,"width":0.0,"count":2,"unit":"kw"}"#;
        assert!(serde_json::from_str::<BinSpec>(json).is_err());
    }

    #[test]
    fn bin_membership_is_half_open() {
        let spec = unit_bins(1.0, 2);
        assert_eq!(spec.bin_of(1.0), Some(0));
        assert_eq!(spec.bin_of(1.999), Some(0));
        assert_eq!(spec.bin_of(2.0), Some(1));
        assert_eq!(spec.bin_of(3.0), None);
        assert_eq!(spec.bin_of(0.999), None);
        assert_eq!(spec.bin_of(f64::NAN), None);
        let tenths = BinSpec::new(0.0, 0.1, 30, Unit::Kwh).unwrap();
        for i in 0..30 {
            assert_eq!(tenths.bin_of(tenths.bin_lower(i)), Some(i));
        }
    }

    #[test]
    fn histogram_of_three_samples() {
        let h = build_histogram(&[1.0, 1.2, 2.5], unit_bins(1.0, 2)).unwrap();
        assert_eq!(h.counts(), &[2, 1]);
        let p = h.probabilities();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_fill_one_bin() {
        let h = build_histogram(&[4.2; 17], unit_bins(0.0, 10)).unwrap();
        assert_eq!(h.nonempty_bins(), vec![4]);
        assert_eq!(h.probabilities()[4], 1.0);
    }

    #[test]
    fn out_of_range_samples_are_reported() {
        let h = build_histogram(&[-1.0, 0.5, 10.0, f64::NAN], unit_bins(0.0, 10)).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.out_of_range(), 3);
        let err = build_histogram(&[42.0], unit_bins(0.0, 10)).unwrap_err();
        assert!(matches!(err, Error::EmptyDistribution(_)));
        assert!(build_histogram(&[], unit_bins(0.0, 10)).is_err());
    }

    #[test]
    fn seventy_thirty_source_recovered() {
        let mut s = SeededSampler::new(7, 0);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| if s.uniform() < 0.7 { 0.5 } else { 1.5 })
            .collect();
        let h = build_histogram(&samples, unit_bins(0.0, 2)).unwrap();
        let p = h.probabilities();
        let l1 = (p[0] - 0.7).abs() + (p[1] - 0.3).abs();
        assert!(l1 < 0.02, "L1 {l1}");
    }

    #[test]
    fn identity_conditional() {
        let spec = unit_bins(0.0, 5);
        let pairs: Vec<(f64, f64)> = [0.5, 1.5, 1.7, 3.2].iter().map(|&x| (x, x)).collect();
        let t = build_conditional(&pairs, spec, spec);
        for r in 0..5 {
            match t.row(r) {
                Some(h) => {
                    assert_eq!(h.probabilities()[r], 1.0);
                }
                None => assert!(r == 2 || r == 4),
            }
        }
        assert_eq!(t.empty_rows(), vec![2, 4]);
    }

    #[test]
    fn single_pair_conditional() {
        let spec = unit_bins(0.0, 24);
        let t = build_conditional(&[(8.0, 12.0)], spec, spec);
        assert_eq!(t.empty_rows().len(), 23);
        let row = t.row_for(8.3).unwrap();
        assert_eq!(row.nonempty_bins(), vec![12]);
        assert_eq!(row.probabilities()[12], 1.0);
    }

    #[test]
    fn six_pair_conditional_by_hand() {
        // rows: x in [0,1): y = 0.2, 1.5, 1.9 -> (1/3, 2/3, 0)
        //       x in [1,2): none
        //       x in [2,3): y = 2.1, 2.2, 0.0 -> (1/3, 0, 2/3)
        let spec = unit_bins(0.0, 3);
        let pairs = [
            (0.1, 0.2),
            (0.5, 1.5),
            (0.9, 1.9),
            (2.0, 2.1),
            (2.5, 2.2),
            (2.99, 0.0),
        ];
        let t = build_conditional(&pairs, spec, spec);
        assert_eq!(t.row(0).unwrap().counts(), &[1, 2, 0]);
        assert!(t.row(1).is_none());
        assert_eq!(t.row(2).unwrap().counts(), &[1, 0, 2]);
        assert_eq!(t.target_marginal(), vec![2, 2, 2]);
        assert_eq!(t.cond_marginal(), vec![3, 0, 3]);
    }

    #[test]
    fn joint_single_tuple_and_unseen_lookup() {
        let s = unit_bins(0.0, 10);
        let t = build_joint_conditional(&[([1.5, 2.5, 3.5], 4.5)], [s, s, s], s);
        assert_eq!(t.cell_count(), 1);
        match t.lookup(&[1.1, 2.9, 3.0]) {
            JointLookup::Found(h) => assert_eq!(h.probabilities()[4], 1.0),
            JointLookup::NoOccurrence => panic!("cell should exist"),
        }
        assert_eq!(t.lookup(&[0.0, 2.5, 3.5]), JointLookup::NoOccurrence);
        assert_eq!(t.lookup(&[99.0, 2.5, 3.5]), JointLookup::NoOccurrence);
    }

    #[test]
    fn joint_shared_cell_splits_mass() {
        let s = unit_bins(0.0, 10);
        let tuples = [
            ([1.2, 2.2, 3.2], 4.0),
            ([1.8, 2.8, 3.8], 6.0),
            ([5.0, 5.0, 5.0], 5.0),
            ([6.0, 5.0, 5.0], 5.0),
            ([7.0, 5.0, 5.0], 5.0),
        ];
        let t = build_joint_conditional(&tuples, [s, s, s], s);
        assert_eq!(t.cell_count(), 4);
        let JointLookup::Found(h) = t.lookup_bins(&[1, 2, 3]) else {
            panic!("missing shared cell");
        };
        let p = h.probabilities();
        assert_eq!((p[4], p[6]), (0.5, 0.5));
        assert!(t.cells().all(|(_, h)| h.total() > 0));
    }

    #[test]
    fn single_bin_rws_stays_in_bin() {
        let h = build_histogram(&[0.3], BinSpec::new(0.0, 1.0, 1, Unit::Hours).unwrap()).unwrap();
        let mut s = SeededSampler::new(1, 0);
        for _ in 0..1000 {
            let v = rws_sample(&h, &mut s, WithinBin::Uniform).unwrap();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn forced_uniform_selects_by_cumulative_order() {
        let h = Histogram1D::from_counts(unit_bins(0.0, 2), vec![5, 5]).unwrap();
        assert_eq!(h.select_bin(0.25), Some(0));
        assert_eq!(h.select_bin(0.5), Some(1));
        assert_eq!(h.select_bin(0.0), Some(0));
        assert_eq!(h.select_bin(0.999_999), Some(1));
        let gaps = Histogram1D::from_counts(unit_bins(0.0, 4), vec![0, 3, 0, 1]).unwrap();
        assert_eq!(gaps.select_bin(0.0), Some(1));
        assert_eq!(gaps.select_bin(0.75), Some(3));
    }

    #[test]
    fn rws_frequencies_converge() {
        let h = Histogram1D::from_counts(unit_bins(0.0, 3), vec![5, 3, 2]).unwrap();
        let mut s = SeededSampler::new(2024, 3);
        let mut freq = [0u64; 3];
        let n = 100_000;
        for _ in 0..n {
            let (b, v) = rws_sample_bin(&h, &mut s, WithinBin::Uniform).unwrap();
            assert_eq!(h.spec().bin_of(v), Some(b));
            freq[b] += 1;
        }
        let l1: f64 = freq
            .iter()
            .zip([0.5, 0.3, 0.2])
            .map(|(&f, p)| (f as f64 / n as f64 - p).abs())
            .sum();
        assert!(l1 < 0.01, "L1 {l1}");
    }

    #[test]
    fn empty_histogram_cannot_be_sampled() {
        let h = Histogram1D::from_counts(unit_bins(0.0, 2), vec![0, 0]).unwrap();
        let mut s = SeededSampler::new(0, 0);
        assert!(rws_sample(&h, &mut s, WithinBin::Uniform).is_err());
        assert!(h.quantile(0.5).is_err());
    }

    #[test]
    fn midpoint_mode_returns_bin_centres() {
        let h = Histogram1D::from_counts(unit_bins(0.0, 3), vec![0, 1, 0]).unwrap();
        let mut s = SeededSampler::new(0, 0);
        assert_eq!(rws_sample(&h, &mut s, WithinBin::Midpoint).unwrap(), 1.5);
        assert_eq!(s.draws(), 2);
    }

    #[test]
    fn sampler_streams_are_reproducible_and_distinct() {
        let mut a = SeededSampler::new(42, 7);
        let mut b = SeededSampler::new(42, 7);
        let mut c = SeededSampler::new(42, 8);
        let xa: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..16).map(|_| c.uniform()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert!(xa.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn sample_quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&[3.0, 1.0, 4.0, 2.0], 0.5).unwrap(), 2.5);
        for q in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(quantile(&[7.5; 9], q).unwrap(), 7.5);
        }
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&hundred, 0.25).unwrap(), 25.75);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&[1.0], 1.5).is_err());
        assert!(quantile(&[1.0, f64::NAN], 0.5).is_err());
    }

    #[test]
    fn histogram_quantiles_interpolate_within_bins() {
        let h = Histogram1D::from_counts(unit_bins(0.0, 4), vec![1, 0, 2, 1]).unwrap();
        assert_eq!(h.quantile(0.0).unwrap(), 0.0);
        assert_eq!(h.quantile(0.25).unwrap(), 1.0);
        assert_eq!(h.quantile(0.5).unwrap(), 2.5);
        assert_eq!(h.quantile(0.75).unwrap(), 3.0);
        assert_eq!(h.quantile(1.0).unwrap(), 4.0);
    }

    #[test]
    fn weighted_selection() {
        assert_eq!(select_weighted(&[0.0, 2.0, 2.0], 0.49), Some(1));
        assert_eq!(select_weighted(&[0.0, 2.0, 2.0], 0.5), Some(2));
        assert_eq!(select_weighted(&[0.0, 0.0], 0.5), None);
    }

    #[test]
    fn joint_table_serializes() {
        let s = unit_bins(0.0, 4);
        let t = build_joint_conditional(&[([1.0, 2.0], 3.0)], [s, s], s);
        let json = serde_json::to_string(&t).unwrap();
        let back: JointConditionalTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
