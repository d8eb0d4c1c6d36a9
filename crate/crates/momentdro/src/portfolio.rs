//! Portfolio experiment harness: seeded samplers, box ambiguity sets built
//! from sample batches, the linear and mean-variance model builders, and
//! the in/out-of-sample simulation loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;

use crate::driver::{run, DriverOptions};
use crate::model::{ConeYDescription, DROProblem, YBlock};
use crate::poly::{basis_len, Exponent, GradedBasis, Polynomial};
use crate::{Error, Result};

/// Per-coordinate distribution of the random returns. Truncated laws are
/// sampled by inverse CDF restricted to `[a, b]`, so a fixed seed yields a
/// fixed sample set.
#[derive(Clone, Copy, Debug)]
pub enum DistributionSpec {
    Uniform { a: f64, b: f64 },
    /// Normal with the given mean and *variance*, truncated to `[a, b]`.
    TruncatedNormal { mean: f64, var: f64, a: f64, b: f64 },
    /// Exponential whose untruncated mean is `mean`, truncated to `[a, b]`.
    TruncatedExponential { mean: f64, a: f64, b: f64 },
}

impl DistributionSpec {
    fn quantile(&self, u: f64) -> Result<f64> {
        match *self {
            DistributionSpec::Uniform { a, b } => Ok(a + u * (b - a)),
            DistributionSpec::TruncatedNormal { mean, var, a, b } => {
                let d = statrs::distribution::Normal::new(mean, var.sqrt())
                    .map_err(|e| Error::Semantic(format!("bad normal spec: {e}")))?;
                let (fa, fb) = (d.cdf(a), d.cdf(b));
                Ok(d.inverse_cdf(fa + u * (fb - fa)).clamp(a, b))
            }
            DistributionSpec::TruncatedExponential { mean, a, b } => {
                if mean <= 0.0 {
                    return Err(Error::Semantic("exponential mean must be positive".into()));
                }
                let d = statrs::distribution::Exp::new(1.0 / mean)
                    .map_err(|e| Error::Semantic(format!("bad exponential spec: {e}")))?;
                let (fa, fb) = (d.cdf(a.max(0.0)), d.cdf(b));
                Ok(d.inverse_cdf(fa + u * (fb - fa)).clamp(a.max(0.0), b))
            }
        }
    }

    /// Truncation interval the samples are guaranteed to land in.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            DistributionSpec::Uniform { a, b } => (a, b),
            DistributionSpec::TruncatedNormal { a, b, .. } => (a, b),
            DistributionSpec::TruncatedExponential { a, b, .. } => (a.max(0.0), b),
        }
    }
}

/// A batch of samples of the return vector, row per sample.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub data: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn mean(&self) -> Vec<f64> {
        let p = self.dim();
        let mut nu = vec![0.0; p];
        for row in &self.data {
            for (s, v) in nu.iter_mut().zip(row) {
                *s += v;
            }
        }
        for s in &mut nu {
            *s /= self.len() as f64;
        }
        nu
    }

    /// Empirical moment vector up to degree `d` in graded order.
    pub fn empirical_moments(&self, d: u32) -> Vec<f64> {
        let p = self.dim();
        let basis = GradedBasis::new(p, d);
        let mut m = vec![0.0; basis.len()];
        for row in &self.data {
            for (acc, v) in m.iter_mut().zip(basis.eval_monomials(row)) {
                *acc += v;
            }
        }
        for acc in &mut m {
            *acc /= self.len() as f64;
        }
        m
    }
}

/// Draws `m` independent samples, one coordinate per spec.
pub fn sample_generators(specs: &[DistributionSpec], m: usize, seed: u64) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::with_capacity(specs.len());
        for spec in specs {
            let u: f64 = rng.gen();
            row.push(spec.quantile(u)?);
        }
        data.push(row);
    }
    Ok(SampleSet { data })
}

/// Builds the entrywise moment bounds `l <= y <= u` from `batches` equal
/// batches of the samples: each batch contributes its empirical moment
/// vector, and the bounds are the componentwise extremes. The mass entry is
/// pinned to `l_0 = u_0 = 1`.
pub fn build_box_ambiguity(samples: &SampleSet, d: u32, batches: usize) -> Result<YBlock> {
    if batches < 2 || samples.len() < batches {
        return Err(Error::Semantic(format!(
            "need at least {batches} samples split into at least 2 batches, got {}",
            samples.len()
        )));
    }
    let p = samples.dim();
    let len = basis_len(p, d);
    let mut lower = vec![f64::INFINITY; len];
    let mut upper = vec![f64::NEG_INFINITY; len];
    let size = samples.len() / batches;
    for b in 0..batches {
        let start = b * size;
        let end = if b + 1 == batches {
            samples.len()
        } else {
            start + size
        };
        let batch = SampleSet {
            data: samples.data[start..end].to_vec(),
        };
        for (i, v) in batch.empirical_moments(d).into_iter().enumerate() {
            lower[i] = lower[i].min(v);
            upper[i] = upper[i].max(v);
        }
    }
    lower[0] = 1.0;
    upper[0] = 1.0;
    Ok(YBlock::Box {
        lower: lower.into_iter().map(Some).collect(),
        upper: upper.into_iter().map(Some).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortfolioKind {
    Linear,
    MeanVariance,
}

/// The allocation vector as polynomials in the decision variables
/// `(x_0, xbar)`: the last weight is eliminated by `e'x = 1`.
fn allocation_polys(assets: usize) -> Vec<Polynomial> {
    let n = assets; // decision dims: x_0 plus assets-1 free weights
    let mut xs = Vec::with_capacity(assets);
    for i in 0..assets - 1 {
        let mut e = vec![0u32; n];
        e[1 + i] = 1;
        let mut p = Polynomial::zero(n);
        p.add_term(Exponent(e), 1.0);
        xs.push(p);
    }
    let mut last = Polynomial::constant(n, 1.0);
    for i in 0..assets - 1 {
        let mut e = vec![0u32; n];
        e[1 + i] = 1;
        last.add_term(Exponent(e), -1.0);
    }
    xs.push(last);
    xs
}

/// Builds the epigraph reformulation of the worst-case portfolio model over
/// decisions `(x_0, xbar)`: minimize `x_0` subject to the robust constraint
/// `inf E[x_0 + x' xi] >= 0` (linear) or
/// `inf E[x_0 + x' nu - (x' xi - x' nu)^2] >= 0` (mean-variance), with the
/// allocation on the simplex and `S = [a, b]^assets`.
pub fn build_portfolio_model(
    kind: PortfolioKind,
    nu: Option<&[f64]>,
    y: ConeYDescription,
    support: (f64, f64),
) -> Result<DROProblem> {
    let assets = y.p;
    if assets == 0 {
        return Err(Error::Semantic("portfolio needs at least one asset".into()));
    }
    let n = assets; // x_0 plus assets - 1 weights
    let p = assets;
    let total = n + p;
    let xs = allocation_polys(assets);

    let mut f = Polynomial::zero(n);
    let mut e0 = vec![0u32; n];
    e0[0] = 1;
    f.add_term(Exponent(e0.clone()), 1.0);

    let mut c = Vec::new();
    for i in 0..assets - 1 {
        let mut e = vec![0u32; n];
        e[1 + i] = 1;
        let mut ci = Polynomial::zero(n);
        ci.add_term(Exponent(e), 1.0);
        c.push(ci);
    }
    c.push(xs[assets - 1].clone()); // 1 - e'xbar >= 0

    // h over (x_0, xbar, xi)
    let mut h = Polynomial::zero(total);
    let mut e0_full = vec![0u32; total];
    e0_full[0] = 1;
    h.add_term(Exponent(e0_full), 1.0);
    let xs_full: Vec<Polynomial> = xs.iter().map(|q| q.embed(total, 0)).collect();
    match kind {
        PortfolioKind::Linear => {
            for (i, xi_poly) in xs_full.iter().enumerate() {
                let mut e = vec![0u32; total];
                e[n + i] = 1;
                let mut xi = Polynomial::zero(total);
                xi.add_term(Exponent(e), 1.0);
                h = &h + &(xi_poly * &xi);
            }
        }
        PortfolioKind::MeanVariance => {
            let nu = nu.ok_or_else(|| {
                Error::Semantic("mean-variance model needs the sample mean nu".into())
            })?;
            if nu.len() != assets {
                return Err(Error::DimensionMismatch {
                    expected: assets,
                    got: nu.len(),
                });
            }
            let mut spread = Polynomial::zero(total); // x'xi - x'nu
            for (i, xi_poly) in xs_full.iter().enumerate() {
                let mut e = vec![0u32; total];
                e[n + i] = 1;
                let mut xi = Polynomial::zero(total);
                xi.add_term(Exponent(e), 1.0);
                xi.add_term(Exponent::zeros(total), -nu[i]);
                spread = &spread + &(xi_poly * &xi);
                h = &h + &xi_poly.scale(nu[i]);
            }
            h = &h + &(&spread * &spread).scale(-1.0);
        }
    }

    let (a, b) = support;
    let mut g = Vec::with_capacity(2 * p);
    for j in 0..p {
        let mut e = vec![0u32; p];
        e[j] = 1;
        let mut low = Polynomial::zero(p);
        low.add_term(Exponent(e.clone()), 1.0);
        low.add_term(Exponent::zeros(p), -a);
        let mut high = Polynomial::zero(p);
        high.add_term(Exponent(e), -1.0);
        high.add_term(Exponent::zeros(p), b);
        g.push(low);
        g.push(high);
    }

    DROProblem::new(n, p, f, c, h, g, y)
}

/// Expands the reported decision `(x_0, xbar)` back into the full
/// allocation vector on the simplex.
pub fn allocation_from_decision(decision: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = decision[1..].to_vec();
    let last = 1.0 - x.iter().sum::<f64>();
    x.push(last);
    x
}

/// The mean-variance performance score of an allocation over a sample set:
/// `J(x) = mean(-x'nu_hat + (x'xi - x'nu_hat)^2)` with `nu_hat` the sample
/// mean.
pub fn evaluate_j(x: &[f64], samples: &SampleSet) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Semantic("empty sample set".into()));
    }
    if x.len() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            got: x.len(),
        });
    }
    let nu = samples.mean();
    let x_nu: f64 = x.iter().zip(&nu).map(|(a, b)| a * b).sum();
    let mut j = 0.0;
    for row in &samples.data {
        let x_xi: f64 = x.iter().zip(row).map(|(a, b)| a * b).sum();
        j += -x_nu + (x_xi - x_nu) * (x_xi - x_nu);
    }
    Ok(j / samples.len() as f64)
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub model: PortfolioKind,
    pub specs: Vec<DistributionSpec>,
    /// Samples per simulation; 75% train the ambiguity set, 25% score
    /// out-of-sample performance.
    pub samples: usize,
    /// Moment degree `d` of the ambiguity set.
    pub degree: u32,
    pub sims: usize,
    pub seed: u64,
    pub batches: usize,
    pub support: (f64, f64),
}

/// One aggregated table row.
#[derive(Clone, Debug)]
pub struct SimulationRow {
    pub d: u32,
    pub m: usize,
    pub avg_j_in: f64,
    pub avg_j_out: f64,
    pub avg_time: f64,
}

fn run_one_sim(cfg: &SimulationConfig, sim: usize) -> Result<(f64, f64, f64)> {
    let samples = sample_generators(&cfg.specs, cfg.samples, cfg.seed + sim as u64)?;
    let m_train = (cfg.samples * 3) / 4;
    let train = SampleSet {
        data: samples.data[..m_train].to_vec(),
    };
    let test = SampleSet {
        data: samples.data[m_train..].to_vec(),
    };
    let block = build_box_ambiguity(&train, cfg.degree, cfg.batches)?;
    let y = ConeYDescription::homogenize(train.dim(), cfg.degree, vec![block])?;
    let nu = train.mean();
    let problem = build_portfolio_model(cfg.model, Some(&nu), y, cfg.support)?;
    let deg = problem.degrees();
    // the builders produce SOS-convex models; run at the initial order only
    // and keep the moment extension at its starting size
    let options = DriverOptions {
        max_order: Some(deg.d0),
        max_k1: Some((deg.d + 1).div_ceil(2).max(deg.d2)),
        assume_sos_convex: true,
        seed: cfg.seed + sim as u64,
        ..DriverOptions::default()
    };
    let started = std::time::Instant::now();
    let result = run(&problem, &options)?;
    let elapsed = started.elapsed().as_secs_f64();
    let decision = result
        .x_star
        .ok_or_else(|| Error::Solver("simulation run produced no candidate".into()))?;
    let x = allocation_from_decision(&decision);
    Ok((evaluate_j(&x, &train)?, evaluate_j(&x, &test)?, elapsed))
}

/// Runs `sims` independent simulations concurrently (seed stream
/// `seed + sim`) and averages the scores.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationRow> {
    let results: Vec<Result<(f64, f64, f64)>> = (0..cfg.sims)
        .into_par_iter()
        .map(|sim| run_one_sim(cfg, sim))
        .collect();
    let mut j_in = 0.0;
    let mut j_out = 0.0;
    let mut time = 0.0;
    for r in results {
        let (a, b, t) = r?;
        j_in += a;
        j_out += b;
        time += t;
    }
    let count = cfg.sims.max(1) as f64;
    Ok(SimulationRow {
        d: cfg.degree,
        m: cfg.samples,
        avg_j_in: j_in / count,
        avg_j_out: j_out / count,
        avg_time: time / count,
    })
}

/// Writes rows as `d,M,avg_J_in,avg_J_out,avg_time` CSV.
pub fn write_rows_csv<W: std::io::Write>(out: W, rows: &[SimulationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "M", "avg_J_in", "avg_J_out", "avg_time"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.m.to_string(),
            format!("{:.4}", r.avg_j_in),
            format!("{:.4}", r.avg_j_out),
            format!("{:.2}", r.avg_time),
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample CSV with header `xi1,...,xip`, one sample per line.
pub fn read_samples_csv<R: std::io::Read>(input: R) -> Result<SampleSet> {
    let mut reader = csv::Reader::from_reader(input);
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let row: Vec<f64> = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Semantic(format!("bad sample value `{s}`")))
            })
            .collect::<Result<_>>()?;
        data.push(row);
    }
    if data.is_empty() {
        return Err(Error::Semantic("sample CSV holds no rows".into()));
    }
    Ok(SampleSet { data })
}
