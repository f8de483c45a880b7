//! Verification bench for the stationary-distribution claims behind the
//! rewiring optimizers, on instances small enough for independent oracles:
//! Langevin sampling of toy posteriors, counting of admissible architectures,
//! uniformity of the replenishment operator, and agreement between the
//! hard-budget and soft samplers' architecture frequencies.

use crate::error::{Error, Result};
use crate::mlp::{GradientSet, SoftGradientSet};
use crate::num::Scalar;
use crate::optim::{deep_r_step, soft_deep_r_step, Alpha, HyperParams, OptimizerKind};
use crate::rng::{RngStream, StreamTag};
use crate::store::{ConnectionStore, SoftStore};
use std::collections::HashMap;
use std::fmt::Write as _;

/// 1D toy posterior with an analytic log-density gradient.
pub struct ToyPosterior {
    pub name: String,
    pub temperature: f64,
    pub log_density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub grad_log_density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// CDF of the tempered stationary density, when known in closed form.
    pub stationary_cdf: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ToyPosterior {
    /// Gaussian posterior N(mean, var); the tempered stationary density is
    /// N(mean, var * T).
    pub fn gaussian(mean: f64, var: f64, temperature: f64) -> Self {
        assert!(var > 0.0 && temperature > 0.0);
        let sd = (var * temperature).sqrt();
        let stat = statrs::distribution::Normal::new(mean, sd).unwrap();
        use statrs::distribution::ContinuousCDF;
        ToyPosterior {
            name: format!("gaussian(mean={mean}, var={var})"),
            temperature,
            log_density: Box::new(move |t| -(t - mean) * (t - mean) / (2.0 * var)),
            grad_log_density: Box::new(move |t| -(t - mean) / var),
            stationary_cdf: Some(Box::new(move |t| stat.cdf(t))),
        }
    }

    /// Tilted double well: log p = -(theta^2 - 1)^2 + tilt * theta. No
    /// closed-form CDF; validated through well-mass ratios against
    /// quadrature.
    pub fn double_well(tilt: f64, temperature: f64) -> Self {
        assert!(temperature > 0.0);
        ToyPosterior {
            name: format!("double_well(tilt={tilt})"),
            temperature,
            log_density: Box::new(move |t| {
                let u = t * t - 1.0;
                -u * u + tilt * t
            }),
            grad_log_density: Box::new(move |t| -4.0 * t * (t * t - 1.0) + tilt),
            stationary_cdf: None,
        }
    }
}

const DIVERGENCE_BOUND: f64 = 1e6;

/// Simulate `theta' = theta + eta * grad_log_p(theta) + sqrt(2 eta T) * nu`,
/// keeping every `thin`-th post-burn-in state until `samples` are collected.
/// Thinning controls autocorrelation: at the default eta = 1e-3 a stride of
/// 100 leaves an integrated autocorrelation time around 20 steps.
pub fn langevin_samples(
    toy: &ToyPosterior,
    eta: f64,
    samples: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if eta <= 0.0 {
        return Err(Error::Config("eta must be > 0".into()));
    }
    if thin == 0 {
        return Err(Error::Config("thin must be >= 1".into()));
    }
    let noise_scale = (2.0 * eta * toy.temperature).sqrt();
    let mut theta = 0.0;
    let mut out = Vec::with_capacity(samples);
    let total = burn_in + samples * thin;
    for i in 0..total {
        theta += eta * (toy.grad_log_density)(theta) + noise_scale * rng.gauss_one::<f64>();
        if theta.abs() > DIVERGENCE_BOUND || !theta.is_finite() {
            return Err(Error::Numerical(format!(
                "langevin chain diverged at iteration {i}: theta = {theta} (toy {}, eta {eta})",
                toy.name
            )));
        }
        if i >= burn_in && (i - burn_in) % thin == thin - 1 {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Kolmogorov-Smirnov statistic of a sample against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// KS distance between the empirical stationary distribution of the
/// discretized chain and the tempered analytic density.
pub fn langevin_stationary_test(
    toy: &ToyPosterior,
    eta: f64,
    samples: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let cdf = toy
        .stationary_cdf
        .as_ref()
        .ok_or_else(|| Error::Contract("toy has no closed-form stationary CDF".into()))?;
    let samples = langevin_samples(toy, eta, samples, burn_in, thin, rng)?;
    Ok(ks_statistic(&samples, |x| cdf(x)))
}

/// Fraction of stationary mass in the `theta < 0` well vs the `theta > 0`
/// well, by trapezoid quadrature of the tempered density on [-3, 3].
pub fn double_well_mass_ratio_quadrature(toy: &ToyPosterior, points: usize) -> f64 {
    let (lo, hi) = (-3.0, 3.0);
    let h = (hi - lo) / points as f64;
    let mut neg = 0.0;
    let mut pos = 0.0;
    for i in 0..=points {
        let x = lo + i as f64 * h;
        let mut w = ((toy.log_density)(x) / toy.temperature).exp();
        if i == 0 || i == points {
            w *= 0.5;
        }
        if x < 0.0 {
            neg += w;
        } else {
            pos += w;
        }
    }
    neg / pos
}

/// Number of K-sized architectures compatible with `n_active` already-active
/// connections out of M: binomial(M - n_active, K - n_active).
pub fn mu_count(m: usize, k: usize, n_active: usize) -> Result<u128> {
    if n_active > k || k > m {
        return Err(Error::Contract(format!(
            "mu_count requires n_active <= K <= M, got ({m}, {k}, {n_active})"
        )));
    }
    Ok(binomial(m - n_active, k - n_active))
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// True iff every constraint-dormant position has a strictly negative
/// amplitude: `c_k = 0` implies `theta_k < 0`.
pub fn constraint_check<F: Scalar>(theta: &[F], c: &[bool]) -> Result<bool> {
    if theta.len() != c.len() {
        return Err(Error::Contract(format!(
            "constraint length {} vs {} amplitudes",
            c.len(),
            theta.len()
        )));
    }
    Ok(theta
        .iter()
        .zip(c)
        .all(|(&t, &ck)| ck || t < F::zero()))
}

/// Visit counts over architectures, keyed by the active-set bitmask (bit k
/// set iff connection k is active). Supports at most 64 connections.
#[derive(Clone, Debug, Default)]
pub struct ArchitectureHistogram {
    counts: HashMap<u64, u64>,
    total: u64,
}

impl ArchitectureHistogram {
    pub fn record(&mut self, mask: u64) {
        *self.counts.entry(mask).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> impl Iterator<Item = (&u64, &u64)> {
        self.counts.iter()
    }

    pub fn frequency(&self, mask: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(&mask).unwrap_or(&0) as f64 / self.total as f64
    }

    /// Total-variation distance between the two normalized histograms.
    pub fn tv_distance(&self, other: &ArchitectureHistogram) -> f64 {
        let mut keys: Vec<u64> = self.counts.keys().chain(other.counts.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|&k| (self.frequency(k) - other.frequency(k)).abs())
            .sum::<f64>()
    }

    /// TV distance to the uniform distribution over `n` architectures
    /// (assumes the support is contained in those n).
    pub fn tv_to_uniform(&self, n: usize) -> f64 {
        let u = 1.0 / n as f64;
        let seen: f64 = self
            .counts
            .values()
            .map(|&c| (c as f64 / self.total as f64 - u).abs())
            .sum();
        let unseen = (n - self.counts.len()) as f64 * u;
        0.5 * (seen + unseen)
    }
}

fn store_mask<F: Scalar>(store: &ConnectionStore<F>) -> u64 {
    let mut mask = 0u64;
    for &k in store.active() {
        mask |= 1 << k;
    }
    mask
}

fn soft_mask<F: Scalar>(store: &SoftStore<F>) -> u64 {
    let mut mask = 0u64;
    for k in 0..store.m() {
        if store.is_active(k) {
            mask |= 1 << k;
        }
    }
    mask
}

/// Per-connection energy model driving the tiny architecture samplers: the
/// gradient of the data term with respect to an active amplitude.
pub trait EnergyModel {
    fn grad(&self, k: usize, theta: f64) -> f64;
}

/// Quadratic per-connection energy `lambda_k / 2 * (theta_k - mu_k)^2`. All
/// connections with `lambda = 0` feel the prior only, which makes them
/// exchangeable.
pub struct QuadraticEnergy {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl QuadraticEnergy {
    /// Pure prior: zero gradient everywhere.
    pub fn pure_prior(m: usize) -> Self {
        QuadraticEnergy {
            mu: vec![0.0; m],
            lambda: vec![0.0; m],
        }
    }

    /// Two essential connections pulled toward a positive amplitude.
    pub fn essential_pair(m: usize, essential: [usize; 2], target: f64, stiffness: f64) -> Self {
        let mut e = Self::pure_prior(m);
        for k in essential {
            e.mu[k] = target;
            e.lambda[k] = stiffness;
        }
        e
    }
}

impl EnergyModel for QuadraticEnergy {
    fn grad(&self, k: usize, theta: f64) -> f64 {
        self.lambda[k] * (theta - self.mu[k])
    }
}

/// Sampler configuration for [`architecture_frequency_test`].
#[derive(Clone, Debug)]
pub struct FrequencyTestConfig {
    pub layer_sizes: Vec<usize>,
    pub fractions: Vec<f64>,
    pub eta: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub theta_min: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub snapshot_every: usize,
    pub seed: u64,
}

impl FrequencyTestConfig {
    /// 2-2-1 network, M = 6, K = 3, 20 admissible architectures. The
    /// temperature/penalty ratio T/alpha equals |theta_min| so the soft
    /// sampler holds each connection active with probability 1/2.
    pub fn tiny_default(seed: u64) -> Self {
        FrequencyTestConfig {
            layer_sizes: vec![2, 2, 1],
            fractions: vec![0.5, 0.5],
            eta: 0.01,
            alpha: 0.05,
            temperature: 0.01,
            theta_min: -0.2,
            iterations: 4_000_000,
            burn_in: 20_000,
            snapshot_every: 50,
            seed,
        }
    }
}

/// Outcome of comparing the two samplers' architecture frequencies.
#[derive(Clone, Debug)]
pub struct FrequencyTestResult {
    pub hard: ArchitectureHistogram,
    pub soft: ArchitectureHistogram,
    /// Soft-sampler snapshots with exactly K active connections.
    pub admissible_snapshots: u64,
    /// Autocorrelation-adjusted effective sample size of the soft chain.
    pub effective_samples: f64,
    pub tv_distance: f64,
    /// False when too few admissible snapshots were collected to decide.
    pub conclusive: bool,
}

/// Run the hard-budget sampler and the soft sampler on the same energy model
/// and compare their architecture frequencies; the soft histogram keeps only
/// snapshots with exactly K active connections.
pub fn architecture_frequency_test(
    energy: &dyn EnergyModel,
    cfg: &FrequencyTestConfig,
) -> Result<FrequencyTestResult> {
    let hp = HyperParams {
        eta: cfg.eta,
        eta_decay: 1.0,
        alpha: Alpha::Scalar(cfg.alpha),
        temperature: cfg.temperature,
        temperature_follows_eta: false,
        theta_min: Some(cfg.theta_min),
        batch: 1,
        epochs: 1,
        optimizer: OptimizerKind::DeepR,
    };
    let zero_bias = |sizes: &[usize]| -> Vec<Vec<f64>> {
        sizes[1..].iter().map(|&n| vec![0.0; n]).collect()
    };

    // hard-budget sampler
    let mut init = RngStream::new(cfg.seed, StreamTag::Init);
    let mut store =
        ConnectionStore::<f64>::init_connectivity(&cfg.layer_sizes, &cfg.fractions, &mut init)?;
    let k_budget = store.budget();
    let mut noise = RngStream::new(cfg.seed, StreamTag::Noise);
    let mut rewire = RngStream::new(cfg.seed, StreamTag::Rewire);
    let mut hard = ArchitectureHistogram::default();
    for i in 0..cfg.iterations {
        let grads = GradientSet {
            theta: store
                .active()
                .iter()
                .map(|&k| energy.grad(k, store.theta(k)))
                .collect(),
            bias: zero_bias(&cfg.layer_sizes),
        };
        deep_r_step(&mut store, &grads, &hp, 0, &mut noise, &mut rewire)?;
        if i >= cfg.burn_in && i % cfg.snapshot_every == 0 {
            hard.record(store_mask(&store));
        }
    }

    // soft sampler, same energy and hyperparameters
    let mut init = RngStream::new(cfg.seed + 1, StreamTag::Init);
    let mut soft_store = SoftStore::<f64>::init_connectivity(
        &cfg.layer_sizes,
        &cfg.fractions,
        cfg.theta_min,
        &mut init,
    )?;
    let mut hp_soft = hp.clone();
    hp_soft.optimizer = OptimizerKind::SoftDeepR;
    let mut noise = RngStream::new(cfg.seed + 1, StreamTag::Noise);
    let mut soft = ArchitectureHistogram::default();
    let mut admissible_series: Vec<bool> = Vec::new();
    for i in 0..cfg.iterations {
        let grads = SoftGradientSet {
            theta: (0..soft_store.m())
                .map(|k| energy.grad(k, soft_store.theta(k)))
                .collect(),
            bias: zero_bias(&cfg.layer_sizes),
        };
        soft_deep_r_step(&mut soft_store, &grads, &hp_soft, 0, &mut noise)?;
        if i >= cfg.burn_in && i % cfg.snapshot_every == 0 {
            let admissible = soft_store.active_count() == k_budget;
            admissible_series.push(admissible);
            if admissible {
                soft.record(soft_mask(&soft_store));
            }
        }
    }

    let admissible = soft.total();
    let ess = effective_sample_size(&admissible_series) * admissible as f64
        / admissible_series.len().max(1) as f64;
    Ok(FrequencyTestResult {
        tv_distance: hard.tv_distance(&soft),
        admissible_snapshots: admissible,
        effective_samples: ess,
        conclusive: admissible >= 1_000,
        hard,
        soft,
    })
}

/// Lag-1 autocorrelation ESS estimate on a binary series.
fn effective_sample_size(series: &[bool]) -> f64 {
    let n = series.len();
    if n < 3 {
        return n as f64;
    }
    let xs: Vec<f64> = series.iter().map(|&b| b as u8 as f64).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let cov1 = xs
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let rho = (cov1 / var).clamp(0.0, 0.999);
    n as f64 * (1.0 - rho) / (1.0 + rho)
}

/// Outcome of the replenishment-uniformity check.
#[derive(Clone, Debug)]
pub struct ReplenishTestResult {
    pub completions: usize,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Maximum per-cell deviation from 1/mu, in binomial standard errors.
    pub max_cell_sigma: f64,
}

/// Fix a store at `n_active < K`, replenish `trials` times from the same
/// state, and chi-square the observed completions against uniform.
pub fn replenish_operator_test(
    template: &ConnectionStore<f64>,
    trials: usize,
    rng: &mut RngStream,
) -> Result<ReplenishTestResult> {
    let n_active = template.active().len();
    let k = template.budget();
    if n_active >= k {
        return Err(Error::Contract(
            "replenish test needs n_active < K".into(),
        ));
    }
    let mu = mu_count(template.m(), k, n_active)? as usize;
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for _ in 0..trials {
        let mut store = template.clone();
        store.replenish(rng)?;
        *counts.entry(store_mask(&store)).or_insert(0) += 1;
    }
    if counts.len() > mu {
        return Err(Error::Contract(format!(
            "observed {} completions but only {mu} are admissible",
            counts.len()
        )));
    }
    let expected = trials as f64 / mu as f64;
    let mut chi2 = 0.0;
    let mut max_sigma: f64 = 0.0;
    let p = 1.0 / mu as f64;
    let se = (trials as f64 * p * (1.0 - p)).sqrt();
    let mut observed_total = 0u64;
    for &c in counts.values() {
        observed_total += c;
        let d = c as f64 - expected;
        chi2 += d * d / expected;
        if se > 0.0 {
            max_sigma = max_sigma.max(d.abs() / se);
        }
    }
    debug_assert_eq!(observed_total, trials as u64);
    // unvisited admissible completions contribute their full expectation
    chi2 += (mu - counts.len()) as f64 * expected;
    Ok(ReplenishTestResult {
        completions: mu,
        chi_square: chi2,
        degrees_of_freedom: mu - 1,
        max_cell_sigma: max_sigma,
    })
}

/// One line of the plain-text bench report.
#[derive(Clone, Debug)]
pub struct ReportLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// True when the statistic must stay below the threshold.
    pub upper_bound: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct TheoryReport {
    pub lines: Vec<ReportLine>,
}

impl TheoryReport {
    fn push(&mut self, name: &str, value: f64, threshold: f64, upper_bound: bool) {
        let pass = if upper_bound {
            value < threshold
        } else {
            value > threshold
        };
        self.lines.push(ReportLine {
            name: name.to_string(),
            value,
            threshold,
            upper_bound,
            pass,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let rel = if l.upper_bound { "<" } else { ">" };
            let verdict = if l.pass { "pass" } else { "FAIL" };
            writeln!(
                out,
                "{:<44} {:>12.6} {} {:<12.6} {}",
                l.name, l.value, rel, l.threshold, verdict
            )
            .unwrap();
        }
        out
    }
}

/// Named bench suites for the CLI.
pub const SUITES: [&str; 4] = ["langevin", "counting", "replenish", "architecture"];

pub fn run_suite(name: &str, seed: u64) -> Result<TheoryReport> {
    match name {
        "langevin" => langevin_suite(seed),
        "counting" => counting_suite(),
        "replenish" => replenish_suite(seed),
        "architecture" => architecture_suite(seed),
        "all" => {
            let mut report = TheoryReport::default();
            for s in SUITES {
                report.lines.extend(run_suite(s, seed)?.lines);
            }
            Ok(report)
        }
        other => Err(Error::Config(format!(
            "unknown suite '{other}' (available: {}, all)",
            SUITES.join(", ")
        ))),
    }
}

fn langevin_suite(seed: u64) -> Result<TheoryReport> {
    let mut report = TheoryReport::default();
    // tempered Gaussian across 5 seeds
    for s in 0..5 {
        let toy = ToyPosterior::gaussian(1.0, 1.0, 0.5);
        let mut rng = RngStream::new(seed + s, StreamTag::Noise);
        let ks = langevin_stationary_test(&toy, 1e-3, 1_000_000, 10_000, 100, &mut rng)?;
        report.push(&format!("gaussian_ks_seed{s}"), ks, 0.01, true);
    }
    // unit temperature recovers the posterior variance
    let toy = ToyPosterior::gaussian(1.0, 1.0, 1.0);
    let mut rng = RngStream::new(seed + 100, StreamTag::Noise);
    let samples = langevin_samples(&toy, 1e-3, 1_000_000, 10_000, 100, &mut rng)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / samples.len() as f64;
    report.push("unit_temperature_variance_low", var, 0.99, false);
    report.push("unit_temperature_variance_high", var, 1.01, true);
    // double well: empirical well-mass ratio vs quadrature
    let toy = ToyPosterior::double_well(0.5, 1.0);
    let mut rng = RngStream::new(seed + 200, StreamTag::Noise);
    let samples = langevin_samples(&toy, 1e-3, 2_000_000, 50_000, 10, &mut rng)?;
    let neg = samples.iter().filter(|&&x| x < 0.0).count() as f64;
    let pos = samples.len() as f64 - neg;
    let empirical = neg / pos;
    let reference = double_well_mass_ratio_quadrature(&toy, 100_000);
    let rel_err = (empirical - reference).abs() / reference;
    report.push("double_well_mass_ratio_error", rel_err, 0.05, true);
    Ok(report)
}

fn counting_suite() -> Result<TheoryReport> {
    let mut report = TheoryReport::default();
    let mut max_err = 0.0f64;
    let mut rng = RngStream::new(7, StreamTag::Init);
    for m in 1..=12usize {
        for k in 0..=m {
            // random theta with each admissible n_active
            for n in 0..=k {
                let mut theta: Vec<f64> = rng.gauss(m);
                // force exactly n non-negative entries
                let mut idx: Vec<usize> = (0..m).collect();
                rng.shuffle(&mut idx);
                for (pos, &i) in idx.iter().enumerate() {
                    theta[i] = if pos < n {
                        theta[i].abs()
                    } else {
                        -theta[i].abs() - 1e-9
                    };
                }
                let brute = enumerate_admissible(&theta, k);
                let fast = mu_count(m, k, n)?;
                max_err = max_err.max((brute as f64 - fast as f64).abs());
            }
        }
    }
    report.push("mu_count_vs_enumeration_max_error", max_err, 0.5, true);
    report.push(
        "mu_count_example_m4_k2_n2",
        mu_count(4, 2, 2)? as f64,
        0.0,
        false,
    );
    report.push(
        "mu_count_example_m6_k3_n2",
        (mu_count(6, 3, 2)? as f64 - 4.0).abs(),
        0.5,
        true,
    );
    Ok(report)
}

/// Brute force: count bitstrings c with |c| = K satisfying the constraint.
fn enumerate_admissible(theta: &[f64], k: usize) -> u64 {
    let m = theta.len();
    let mut count = 0;
    for mask in 0u64..(1 << m) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let c: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
        if constraint_check(theta, &c).unwrap() {
            count += 1;
        }
    }
    count
}

fn replenish_suite(seed: u64) -> Result<TheoryReport> {
    let mut report = TheoryReport::default();
    // M = 6 (3-2 layers), K = 3, one pinned active connection -> 10 completions
    let mut init = RngStream::new(seed, StreamTag::Init);
    let mut store =
        ConnectionStore::<f64>::init_connectivity(&[3, 2], &[0.5], &mut init)?;
    while store.active().len() > 1 {
        let k = store.active()[0];
        store.set_dormant(k)?;
    }
    let mut rng = RngStream::new(seed, StreamTag::Rewire);
    let result = replenish_operator_test(&store, 100_000, &mut rng)?;
    report.push(
        "replenish_completion_count",
        result.completions as f64,
        9.5,
        false,
    );
    // 99% point of chi-square with df = 9
    report.push("replenish_chi_square_df9", result.chi_square, 21.666, true);
    report.push("replenish_max_cell_sigma", result.max_cell_sigma, 3.0, true);
    Ok(report)
}

fn architecture_suite(seed: u64) -> Result<TheoryReport> {
    let mut report = TheoryReport::default();
    let cfg = FrequencyTestConfig::tiny_default(seed);
    let m = 6;

    let prior = QuadraticEnergy::pure_prior(m);
    let result = architecture_frequency_test(&prior, &cfg)?;
    report.push(
        "prior_admissible_snapshots",
        result.admissible_snapshots as f64,
        1_000.0,
        false,
    );
    report.push("prior_hard_tv_to_uniform", result.hard.tv_to_uniform(20), 0.05, true);
    report.push("prior_soft_tv_to_uniform", result.soft.tv_to_uniform(20), 0.05, true);
    report.push("prior_hard_vs_soft_tv", result.tv_distance, 0.1, true);
    let off_slice = result
        .hard
        .support()
        .filter(|(mask, _)| mask.count_ones() != 3)
        .count();
    report.push("prior_hard_mass_outside_k_slice", off_slice as f64, 0.5, true);

    let essential = QuadraticEnergy::essential_pair(m, [0, 1], 0.5, 1.0);
    let result = architecture_frequency_test(&essential, &cfg)?;
    report.push(
        "essential_admissible_snapshots",
        result.admissible_snapshots as f64,
        1_000.0,
        false,
    );
    let both = 0b11u64;
    let hard_mass: f64 = result
        .hard
        .support()
        .filter(|(mask, _)| *mask & both == both)
        .map(|(mask, _)| result.hard.frequency(*mask))
        .sum();
    report.push("essential_hard_mass_on_pair", hard_mass, 0.95, false);
    report.push("essential_hard_vs_soft_tv", result.tv_distance, 0.1, true);
    Ok(report)
}
