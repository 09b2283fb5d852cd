//! Synthetic homodyne data: inverse-CDF sampling of quadrature marginals and
//! the dataset CSV format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::phase_space::marginal_at;

/// Number of tabulation points for the inverse CDF.
pub const TABLE_POINTS: usize = 4096;
/// Half-width of the tabulated quadrature range.
pub const TABLE_HALF_WIDTH: f64 = 8.0;
/// Smallest marginal mass the table must capture.
pub const MIN_TABLE_MASS: f64 = 0.999;
/// Vacuum quadrature variance in the units used throughout.
pub const SHOT_NOISE_VARIANCE: f64 = 0.5;

/// LO phases and samples per phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlan {
    pub phases_deg: Vec<f64>,
    pub samples_per_phase: usize,
}

impl Default for PhasePlan {
    /// −45°, −22.5°, 0°, 22.5°, 45°, 90° with 10⁴ samples each.
    fn default() -> Self {
        Self {
            phases_deg: vec![-45.0, -22.5, 0.0, 22.5, 45.0, 90.0],
            samples_per_phase: 10_000,
        }
    }
}

impl PhasePlan {
    pub fn new(phases_deg: Vec<f64>, samples_per_phase: usize) -> Result<Self> {
        let plan = Self {
            phases_deg,
            samples_per_phase,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases_deg.is_empty() {
            return Err(Error::domain("phase plan has no phases"));
        }
        if self.samples_per_phase == 0 {
            return Err(Error::domain("samples_per_phase must be at least 1"));
        }
        if self.phases_deg.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("phases must be finite"));
        }
        for (i, a) in self.phases_deg.iter().enumerate() {
            if self.phases_deg[..i].contains(a) {
                return Err(Error::domain(format!("phase {a} listed twice")));
            }
        }
        Ok(())
    }
}

/// One homodyne record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomodyneRecord {
    pub theta_deg: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub source: String,
    pub seed: Option<u64>,
    /// `(θ in degrees, record count)` in order of first appearance.
    pub counts: Vec<(f64, usize)>,
    pub shot_noise_variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneDataset {
    pub records: Vec<HomodyneRecord>,
    pub meta: DatasetMeta,
}

fn counts_of(records: &[HomodyneRecord]) -> Vec<(f64, usize)> {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for r in records {
        match counts.iter_mut().find(|(t, _)| *t == r.theta_deg) {
            Some((_, c)) => *c += 1,
            None => counts.push((r.theta_deg, 1)),
        }
    }
    counts
}

impl HomodyneDataset {
    /// Builds a dataset whose metadata counts are taken from the records.
    pub fn from_records(records: Vec<HomodyneRecord>, source: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        let meta = DatasetMeta {
            source: source.into(),
            seed,
            counts: counts_of(&records),
            shot_noise_variance: SHOT_NOISE_VARIANCE,
        };
        let out = Self { records, meta };
        out.validate()?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct phases in order of first appearance.
    pub fn phases(&self) -> Vec<f64> {
        self.meta.counts.iter().map(|(t, _)| *t).collect()
    }

    /// Quadrature values for one phase.
    pub fn samples_at(&self, theta_deg: f64) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.theta_deg == theta_deg)
            .map(|r| r.q)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.records.iter().position(|r| !r.q.is_finite() || !r.theta_deg.is_finite()) {
            return Err(Error::Schema(format!("record {bad} is not finite")));
        }
        let actual = counts_of(&self.records);
        let mut declared = self.meta.counts.clone();
        declared.retain(|(_, c)| *c > 0);
        let sorted = |mut v: Vec<(f64, usize)>| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        if sorted(actual) != sorted(declared) {
            return Err(Error::Schema("per-phase record counts do not match metadata".into()));
        }
        if !(self.meta.shot_noise_variance > 0.0) {
            return Err(Error::Schema("shot_noise_variance must be positive".into()));
        }
        Ok(())
    }

    /// Rescales quadratures so that the vacuum variance becomes 1/2.
    pub fn normalized(&self) -> HomodyneDataset {
        let scale = (SHOT_NOISE_VARIANCE / self.meta.shot_noise_variance).sqrt();
        let mut out = self.clone();
        if scale != 1.0 {
            for r in &mut out.records {
                r.q *= scale;
            }
            out.meta.shot_noise_variance = SHOT_NOISE_VARIANCE;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#source={}", self.meta.source)?;
        if let Some(seed) = self.meta.seed {
            writeln!(out, "#seed={seed}")?;
        }
        let counts: Vec<String> = self
            .meta
            .counts
            .iter()
            .map(|(t, c)| format!("{t:?}:{c}"))
            .collect();
        writeln!(out, "#counts={}", counts.join(";"))?;
        writeln!(out, "#shot_noise_variance={:?}", self.meta.shot_noise_variance)?;
        writeln!(out, "theta_deg,q")?;
        for r in &self.records {
            writeln!(out, "{:?},{:?}", r.theta_deg, r.q)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut header_seen = false;
        let mut records = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    meta.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
                }
                continue;
            }
            if !header_seen {
                if trimmed.replace(' ', "") != "theta_deg,q" {
                    return Err(Error::Schema(format!(
                        "line {line_no}: expected header `theta_deg,q`, got `{trimmed}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let mut fields = trimmed.split(',');
            let (Some(t), Some(q), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected two fields, got `{trimmed}`"),
                });
            };
            let parse = |name: &str, s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad {name} `{}`: {e}", s.trim()),
                })
            };
            let record = HomodyneRecord {
                theta_deg: parse("theta_deg", t)?,
                q: parse("q", q)?,
            };
            if !record.theta_deg.is_finite() || !record.q.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite value".into(),
                });
            }
            records.push(record);
        }
        if !header_seen {
            return Err(Error::Schema("missing header `theta_deg,q`".into()));
        }
        let meta_parse = |key: &str| -> Result<Option<(usize, String)>> { Ok(meta.get(key).cloned()) };
        let seed = match meta_parse("seed")? {
            Some((line, v)) => Some(v.parse::<u64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad seed: {e}"),
            })?),
            None => None,
        };
        let shot_noise_variance = match meta_parse("shot_noise_variance")? {
            Some((line, v)) => v.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad shot_noise_variance: {e}"),
            })?,
            None => SHOT_NOISE_VARIANCE,
        };
        let counts = match meta_parse("counts")? {
            Some((line, v)) if !v.is_empty() => v
                .split(';')
                .map(|pair| {
                    let bad = |m: String| Error::Parse { line, message: m };
                    let (t, c) = pair
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad counts entry `{pair}`")))?;
                    Ok((
                        t.trim().parse::<f64>().map_err(|e| bad(format!("bad counts phase: {e}")))?,
                        c.trim().parse::<usize>().map_err(|e| bad(format!("bad count: {e}")))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => Vec::new(),
            None => counts_of(&records),
        };
        let source = meta
            .get("source")
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| "external".to_string());
        let out = Self {
            records,
            meta: DatasetMeta {
                source,
                seed,
                counts,
                shot_noise_variance,
            },
        };
        out.validate()?;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Tabulated marginal `Pr(q | θ)` with its CDF on `±TABLE_HALF_WIDTH`.
#[derive(Clone, Debug)]
pub struct MarginalTable {
    points: Vec<f64>,
    cdf: Vec<f64>,
}

impl MarginalTable {
    pub fn new(rho: &DensityMatrix, theta_deg: f64) -> Result<Self> {
        let h = 2.0 * TABLE_HALF_WIDTH / (TABLE_POINTS - 1) as f64;
        let points: Vec<f64> = (0..TABLE_POINTS).map(|i| -TABLE_HALF_WIDTH + i as f64 * h).collect();
        let density: Vec<f64> = marginal_at(rho, theta_deg.to_radians(), &points)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let mut cdf = Vec::with_capacity(TABLE_POINTS);
        cdf.push(0.0);
        for i in 1..TABLE_POINTS {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * h * (density[i - 1] + density[i]));
        }
        let mass = cdf[TABLE_POINTS - 1];
        if !(mass >= MIN_TABLE_MASS) {
            return Err(Error::DegenerateDistribution {
                mass,
                required: MIN_TABLE_MASS,
            });
        }
        for c in &mut cdf {
            *c /= mass;
        }
        Ok(Self { points, cdf })
    }

    /// CDF with linear interpolation between table points.
    pub fn cdf(&self, q: f64) -> f64 {
        let n = self.points.len();
        if q <= self.points[0] {
            return 0.0;
        }
        if q >= self.points[n - 1] {
            return 1.0;
        }
        let h = self.points[1] - self.points[0];
        let i = (((q - self.points[0]) / h).floor() as usize).min(n - 2);
        let t = (q - self.points[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF with linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.points[i - 1] + t * (self.points[i] - self.points[i - 1])
    }
}

/// Deterministic mixing of a base seed with a stream label.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `count` i.i.d. draws from `Pr(q | θ)`, θ in degrees.
pub fn sample_phase(rho: &DensityMatrix, theta_deg: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("count must be at least 1"));
    }
    let table = MarginalTable::new(rho, theta_deg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| table.quantile(rng.random::<f64>())).collect())
}

/// Samples every phase of `plan` with a sub-seed derived from the phase value.
pub fn synth_dataset(rho: &DensityMatrix, plan: &PhasePlan, seed: u64, source: &str) -> Result<HomodyneDataset> {
    plan.validate()?;
    let per_phase: Vec<Vec<f64>> = plan
        .phases_deg
        .par_iter()
        .map(|&theta| sample_phase(rho, theta, plan.samples_per_phase, derive_seed(seed, theta.to_bits())))
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(plan.phases_deg.len() * plan.samples_per_phase);
    for (&theta_deg, qs) in plan.phases_deg.iter().zip(&per_phase) {
        records.extend(qs.iter().map(|&q| HomodyneRecord { theta_deg, q }));
    }
    HomodyneDataset::from_records(records, source, Some(seed))
}

/// One-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{herald_subtract, ExperimentParams};
    use crate::fock::{cat_state, squeezed_vacuum, HilbertConfig, Parity, SqueezeSpec};
    use num_complex::Complex64;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn cfg(n: usize) -> HilbertConfig {
        HilbertConfig::new(n).unwrap()
    }

    fn variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn vacuum_variance() {
        let vac = DensityMatrix::vacuum(cfg(4));
        let n = 100_000;
        for theta in [0.0, 37.0, 90.0] {
            let v = variance(&sample_phase(&vac, theta, n, 1).unwrap());
            // Standard error of the sample variance is σ²√(2/(n−1)).
            assert!((v - 0.5).abs() < 3.0 * 0.5 * (2.0 / (n as f64 - 1.0)).sqrt(), "{v}");
        }
    }

    #[test]
    fn squeezed_variance() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.576), cfg(40)).unwrap().to_density();
        let v = variance(&sample_phase(&sq, 0.0, 100_000, 2).unwrap());
        assert!((v / 0.158 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.3), cfg(20)).unwrap().to_density();
        let a = sample_phase(&sq, 22.5, 1000, 77).unwrap();
        let b = sample_phase(&sq, 22.5, 1000, 77).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, sample_phase(&sq, 22.5, 1000, 78).unwrap());
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(sample_phase(&DensityMatrix::vacuum(cfg(2)), 0.0, 0, 1).is_err());
    }

    #[test]
    fn degenerate_distribution() {
        // A coherent state centred far outside the tabulated range.
        let far = crate::fock::coherent_state_with_tolerance(Complex64::new(7.0, 0.0), cfg(120), 1e-6)
            .unwrap()
            .to_density();
        assert!(matches!(
            sample_phase(&far, 0.0, 10, 1),
            Err(Error::DegenerateDistribution { .. })
        ));
    }

    #[test]
    fn ks_against_exact_cdf() {
        let config = cfg(30);
        let herald = herald_subtract(&ExperimentParams::paper_default().with_herald(2), config).unwrap();
        for theta in [0.0, 45.0, 90.0] {
            let samples = sample_phase(&herald.state, theta, 100_000, 5).unwrap();
            // Exact CDF by direct quadrature of the marginal.
            let exact = |q: f64| {
                quadrature::integrate(
                    |t| crate::phase_space::marginal_at(&herald.state, theta.to_radians(), &[t])[0],
                    -12.0,
                    q,
                    1e-12,
                )
                .integral
            };
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            // Evaluate the exact CDF at a subsample of order statistics.
            let n = sorted.len() as f64;
            let d = (0..sorted.len())
                .step_by(97)
                .map(|i| {
                    let f = exact(sorted[i]);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 0.01, "θ={theta}: {d}");
            let table = MarginalTable::new(&herald.state, theta).unwrap();
            assert!(ks_statistic(&samples, |q| table.cdf(q)) < 0.01);
        }
    }

    #[test]
    fn phase_covariance() {
        let herald = herald_subtract(&ExperimentParams::paper_default().with_herald(1), cfg(30)).unwrap();
        let theta = 30.0;
        let direct = MarginalTable::new(&herald.state, theta).unwrap();
        let rotated = herald.state.phase_rotated(theta.to_radians());
        let samples = sample_phase(&rotated, 0.0, 100_000, 9).unwrap();
        assert!(ks_statistic(&samples, |q| direct.cdf(q)) < 0.01);
    }

    #[test]
    fn chi_squared_against_marginal() {
        let herald = herald_subtract(&ExperimentParams::paper_default().with_herald(2), cfg(30)).unwrap();
        let data = synth_dataset(&herald.state, &PhasePlan::default(), 2024, "n2").unwrap();
        let bins = 40;
        for theta in data.phases() {
            let table = MarginalTable::new(&herald.state, theta).unwrap();
            let edges: Vec<f64> = (1..bins).map(|k| table.quantile(k as f64 / bins as f64)).collect();
            let mut observed = vec![0usize; bins];
            for q in data.samples_at(theta) {
                observed[edges.partition_point(|&e| e < q)] += 1;
            }
            let expected = 10_000.0 / bins as f64;
            let chi2: f64 = observed
                .iter()
                .map(|&o| (o as f64 - expected).powi(2) / expected)
                .sum();
            let p = ChiSquared::new((bins - 1) as f64).unwrap().sf(chi2);
            assert!(p > 0.01, "θ={theta}: χ²={chi2} p={p}");
        }
    }

    #[test]
    fn cat_momentum_samples_are_bimodal() {
        let cat = cat_state(Complex64::new(0.0, 2.5), Parity::Even, cfg(40)).unwrap().to_density();
        let s = sample_phase(&cat, 90.0, 20_000, 3).unwrap();
        let pos: Vec<f64> = s.iter().copied().filter(|q| *q > 0.0).collect();
        let neg: Vec<f64> = s.iter().copied().filter(|q| *q < 0.0).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&pos) - 3.536).abs() < 0.05);
        assert!((mean(&neg) + 3.536).abs() < 0.05);
        assert!((pos.len() as f64 / s.len() as f64 - 0.5).abs() < 0.02);
        assert!(s.iter().filter(|q| q.abs() < 1.0).count() < 20);
    }

    #[test]
    fn phase_streams_are_uncorrelated() {
        let vac = DensityMatrix::vacuum(cfg(2));
        let plan = PhasePlan::new(vec![0.0, 90.0], 100_000).unwrap();
        let data = synth_dataset(&vac, &plan, 11, "vac").unwrap();
        let a = data.samples_at(0.0);
        let b = data.samples_at(90.0);
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let corr = cov / (variance(&a) * variance(&b)).sqrt();
        assert!(corr.abs() < 0.01, "{corr}");
    }

    #[test]
    fn sub_seeds_do_not_depend_on_phase_order() {
        let vac = DensityMatrix::vacuum(cfg(2));
        let a = synth_dataset(&vac, &PhasePlan::new(vec![0.0, 45.0], 50).unwrap(), 5, "v").unwrap();
        let b = synth_dataset(&vac, &PhasePlan::new(vec![45.0, 0.0], 50).unwrap(), 5, "v").unwrap();
        assert_eq!(a.samples_at(45.0), b.samples_at(45.0));
        assert_eq!(a.samples_at(0.0), b.samples_at(0.0));
    }

    #[test]
    fn tiny_plan() {
        let vac = DensityMatrix::vacuum(cfg(2));
        let data = synth_dataset(&vac, &PhasePlan::new(vec![10.0], 1).unwrap(), 0, "v").unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.meta.counts, vec![(10.0, 1)]);
    }

    #[test]
    fn plan_validation() {
        assert!(PhasePlan::new(vec![], 10).is_err());
        assert!(PhasePlan::new(vec![0.0], 0).is_err());
        assert!(PhasePlan::new(vec![0.0, 0.0], 1).is_err());
        assert_eq!(PhasePlan::default().phases_deg.len(), 6);
    }

    #[test]
    fn csv_round_trip() {
        let sq = squeezed_vacuum(SqueezeSpec::from_r(0.4), cfg(20)).unwrap().to_density();
        let plan = PhasePlan::new(vec![-22.5, 0.0, 90.0], 200).unwrap();
        let data = synth_dataset(&sq, &plan, 31, "squeezed").unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = HomodyneDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.save(&path).unwrap();
        assert_eq!(HomodyneDataset::load(&path).unwrap(), data);
    }

    #[test]
    fn empty_dataset_file() {
        let empty = HomodyneDataset::from_records(vec![], "none", None).unwrap();
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.ends_with("theta_deg,q\n"));
        assert_eq!(HomodyneDataset::read_csv(buf.as_slice()).unwrap(), empty);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "#seed=1\ntheta_deg,q\n0.0,0.1\nabc,0.2\n";
        match HomodyneDataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "theta_deg,q\n0.0\n";
        assert!(matches!(
            HomodyneDataset::read_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            HomodyneDataset::read_csv("theta,x\n".as_bytes()),
            Err(Error::Schema(_))
        ));
        let text = "#counts=0.0:2\ntheta_deg,q\n0.0,0.1\n";
        assert!(matches!(
            HomodyneDataset::read_csv(text.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn lab_data_without_metadata() {
        let text = "theta_deg,q\n0,1.0\n0,-1.0\n90,0.5\n";
        let data = HomodyneDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(data.meta.counts, vec![(0.0, 2), (90.0, 1)]);
        assert_eq!(data.meta.seed, None);
        let text = "#shot_noise_variance=2.0\ntheta_deg,q\n0,2.0\n";
        let data = HomodyneDataset::read_csv(text.as_bytes()).unwrap().normalized();
        assert_eq!(data.records[0].q, 1.0);
    }
}
