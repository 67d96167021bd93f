//! Monte Carlo estimators over entry states drawn from the Liouville measure
//! on the bounding sphere.
//!
//! Every estimator traces `N` trajectories, collects per-sample records in
//! index order and reduces them sequentially, so results depend only on
//! `(scene, seed, N, caps)` and never on the worker count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{billiard_map, trace, trace_with, CapKind, Caps, PhasePoint, TraceOutcome};
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Scene, UnitVector, Vector};
use crate::measure::{
    lambda_total, mu_total, unit_sphere_area, BoundarySampler, LiouvilleSampler, VolumeEstimate,
    DEFAULT_VOLUME_POINTS,
};
use crate::raycast::RayParams;
use crate::stats::{chi_square_gof, ChiSquareTest, Moments};

/// Degenerate fraction above which an estimate is flagged unreliable.
pub const DEGENERATE_ALARM: f64 = 1e-4;

/// Parameters shared by every estimator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub samples: u64,
    pub seed: u64,
    pub caps: Caps,
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub workers: Option<usize>,
    pub ray: RayParams,
    /// Points for Monte Carlo obstacle volumes.
    pub volume_points: u64,
}

impl RunSettings {
    /// Scene defaults: caps `T_max = 1000 R`, `k_max = 10^4`, stride `0.01 R`.
    pub fn for_scene(scene: &Scene, samples: u64, seed: u64) -> Self {
        RunSettings {
            samples,
            seed,
            caps: Caps::for_scene(scene),
            workers: None,
            ray: RayParams::for_scene(scene),
            volume_points: DEFAULT_VOLUME_POINTS,
        }
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    /// Runs `job` on a pool of the configured size.
    pub fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> T {
        match self.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool")
                .install(job),
            None => job(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Exited,
    TimeCapped,
    ReflectionCapped,
    Degenerate,
}

/// Compact per-trajectory summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub kind: SampleKind,
    /// Travelling time, or elapsed time when censored or degenerate.
    pub elapsed: f64,
    pub reflections: u64,
    /// Chord of the entry state through the empty ball `M`.
    pub chord: f64,
}

impl SampleRecord {
    pub fn new(scene: &Scene, entry: PhasePoint, o: TraceOutcome) -> Self {
        let kind = match o {
            TraceOutcome::Exited { .. } => SampleKind::Exited,
            TraceOutcome::Censored {
                cap: CapKind::Time, ..
            } => SampleKind::TimeCapped,
            TraceOutcome::Censored {
                cap: CapKind::Reflections,
                ..
            } => SampleKind::ReflectionCapped,
            TraceOutcome::Degenerate { .. } => SampleKind::Degenerate,
        };
        SampleRecord {
            kind,
            elapsed: o.elapsed(),
            reflections: o.reflections(),
            chord: -2.0 * entry.v.dot(entry.q - scene.bounding().center),
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(
            self.kind,
            SampleKind::TimeCapped | SampleKind::ReflectionCapped
        )
    }
}

/// Traced records for sample indices `0..N`, in index order.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub records: Vec<SampleRecord>,
    pub settings: RunSettings,
    pub mu_total: f64,
}

impl SampleSet {
    pub fn trace(scene: &Scene, settings: &RunSettings) -> SampleSet {
        let sampler = LiouvilleSampler::new(scene, settings.seed);
        let records = settings.install(|| {
            (0..settings.samples)
                .into_par_iter()
                .map(|i| {
                    let entry = sampler.sample_entry(i);
                    SampleRecord::new(
                        scene,
                        entry,
                        trace(scene, entry, settings.caps, &settings.ray),
                    )
                })
                .collect()
        });
        SampleSet {
            records,
            settings: *settings,
            mu_total: mu_total(scene),
        }
    }

    pub fn n_censored(&self) -> u64 {
        self.records.iter().filter(|r| r.is_censored()).count() as u64
    }

    pub fn n_degenerate(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.kind == SampleKind::Degenerate)
            .count() as u64
    }

    /// `mu_total` times the mean of `h` over non-degenerate records.
    fn estimate(&self, h: impl Fn(&SampleRecord) -> f64) -> Estimate {
        let m: Moments = self
            .records
            .iter()
            .filter(|r| r.kind != SampleKind::Degenerate)
            .map(h)
            .collect();
        self.wrap(self.mu_total * m.mean(), self.mu_total * m.std_error())
    }

    fn wrap(&self, value: f64, std_error: f64) -> Estimate {
        let n_samples = self.records.len() as u64;
        let n_degenerate = self.n_degenerate();
        Estimate {
            value,
            std_error,
            n_samples,
            n_censored: self.n_censored(),
            n_degenerate,
            t_max: self.settings.caps.t_max,
            k_max: self.settings.caps.k_max,
            seed: self.settings.seed,
            unreliable: n_samples > 0 && n_degenerate as f64 > DEGENERATE_ALARM * n_samples as f64,
        }
    }

    /// `∫ t dμ` with censored samples at their elapsed time.
    pub fn travel_time_integral(&self) -> Estimate {
        self.estimate(|r| r.elapsed)
    }

    /// `∫ (t_M - t) dμ / Vol(S^{n-1})`, where `t_M` is the chord through
    /// the empty ball. Equal to `Vol(M) - ∫ t dμ / Vol(S^{n-1})` because
    /// `∫ t_M dμ = Vol(M) Vol(S^{n-1})`; only rays meeting the obstacles
    /// contribute variance.
    pub fn obstacle_volume(&self, dimension: usize) -> Estimate {
        let e = self.estimate(|r| r.chord - r.elapsed);
        let sphere = unit_sphere_area(dimension);
        e.derived(e.value / sphere, e.std_error / sphere)
    }

    /// The same integral as if the time cap were `t_max / 2`.
    pub fn half_cap_integral(&self) -> Estimate {
        let half = 0.5 * self.settings.caps.t_max;
        let m: Moments = self
            .records
            .iter()
            .filter(|r| r.kind != SampleKind::Degenerate || r.elapsed >= half)
            .map(|r| r.elapsed.min(half))
            .collect();
        let mut e = self.wrap(self.mu_total * m.mean(), self.mu_total * m.std_error());
        e.t_max = half;
        e.n_censored = self
            .records
            .iter()
            .filter(|r| r.is_censored() || r.elapsed > half)
            .count() as u64;
        e.n_degenerate = self
            .records
            .iter()
            .filter(|r| r.kind == SampleKind::Degenerate && r.elapsed < half)
            .count() as u64;
        e
    }
}

/// A Monte Carlo estimate with the bookkeeping needed to reproduce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub n_censored: u64,
    pub n_degenerate: u64,
    pub t_max: f64,
    pub k_max: u64,
    pub seed: u64,
    /// Degenerate fraction above [`DEGENERATE_ALARM`].
    pub unreliable: bool,
}

impl Estimate {
    fn derived(&self, value: f64, std_error: f64) -> Estimate {
        Estimate {
            value,
            std_error,
            ..*self
        }
    }
}

/// `∫_{S+(∂M)} t dμ`.
pub fn travel_time_integral(scene: &Scene, settings: &RunSettings) -> Estimate {
    SampleSet::trace(scene, settings).travel_time_integral()
}

/// Travel-time integral against `λ(S(Ω))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SantaloCheck {
    pub integral: Estimate,
    pub lambda_total: VolumeEstimate,
    /// `|integral - lambda_total|` in combined standard errors.
    pub z_score: f64,
    pub pass: bool,
}

pub fn santalo_check(scene: &Scene, settings: &RunSettings) -> SantaloCheck {
    let integral = travel_time_integral(scene, settings);
    let lambda = lambda_total(scene, settings.volume_points, settings.seed);
    let sigma = integral.std_error.hypot(lambda.std_error);
    let diff = (integral.value - lambda.value).abs();
    let z_score = if sigma > 0.0 {
        diff / sigma
    } else {
        f64::INFINITY
    };
    SantaloCheck {
        integral,
        lambda_total: lambda,
        z_score,
        pass: diff <= 3.0 * sigma,
    }
}

/// `Vol_n(K) = Vol_n(M) - ∫ t dμ / Vol_{n-1}(S^{n-1})`.
pub fn recover_volume(scene: &Scene, settings: &RunSettings) -> Estimate {
    SampleSet::trace(scene, settings).obstacle_volume(scene.dimension())
}

/// `Vol(M) - ∫ t dμ / Vol(S^{n-1})` from a travel-time integral alone.
pub fn volume_from_integral(scene: &Scene, integral: &Estimate) -> Estimate {
    let n = scene.dimension();
    let sphere = unit_sphere_area(n);
    integral.derived(
        ball_volume(n, scene.radius()) - integral.value / sphere,
        integral.std_error / sphere,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrappedMeasure {
    /// `λ(S(Ω)) - ∫ t dμ`; an over-estimate when samples are censored.
    pub trapped: Estimate,
    /// The same with the time cap halved.
    pub half_cap: Estimate,
    pub lambda_total: VolumeEstimate,
    /// `mu_total * (censored fraction) * T_max`.
    pub cap_bias_bound: f64,
}

pub fn trapped_measure(scene: &Scene, settings: &RunSettings) -> TrappedMeasure {
    let set = SampleSet::trace(scene, settings);
    let lambda = lambda_total(scene, settings.volume_points, settings.seed);
    trapped_from_samples(&set, lambda)
}

fn trapped_from_samples(set: &SampleSet, lambda: VolumeEstimate) -> TrappedMeasure {
    let full = set.travel_time_integral();
    let half = set.half_cap_integral();
    let subtract =
        |e: &Estimate| e.derived(lambda.value - e.value, e.std_error.hypot(lambda.std_error));
    let n = set.records.len().max(1) as f64;
    TrappedMeasure {
        trapped: subtract(&full),
        half_cap: subtract(&half),
        lambda_total: lambda,
        cap_bias_bound: set.mu_total * (full.n_censored as f64 / n) * set.settings.caps.t_max,
    }
}

/// Exited reflection counts scaled to μ-mass, with the two-sided bounds on
/// `S = Σ (k+1) μ(Γ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionHistogram {
    /// Exited samples with exactly `k` reflections, `k = 0..=max observed`.
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub n_censored: u64,
    pub n_degenerate: u64,
    pub mu_total: f64,
    pub weighted_sum: f64,
    pub weighted_sum_std_error: f64,
    pub lambda_total: VolumeEstimate,
    /// `λ(S(Ω)) / D`, `D = 2R`.
    pub lower_bound: f64,
    /// `λ(S(Ω)) / d`, when the scene declares `d` and convex components.
    pub upper_bound: Option<f64>,
    pub lower_holds: bool,
    pub upper_holds: Option<bool>,
    /// `max_k (k+1) μ(Γ_k)`.
    pub decay_constant: f64,
    pub t_max: f64,
    pub k_max: u64,
    pub seed: u64,
}

impl ReflectionHistogram {
    /// `μ̂(Γ_k)`.
    pub fn mu_gamma(&self, k: usize) -> f64 {
        self.mass(self.counts.get(k).copied().unwrap_or(0))
    }

    pub fn mu_censored(&self) -> f64 {
        self.mass(self.n_censored)
    }

    pub fn mu_degenerate(&self) -> f64 {
        self.mass(self.n_degenerate)
    }

    fn mass(&self, count: u64) -> f64 {
        self.mu_total * count as f64 / self.n_samples as f64
    }

    /// Exited, censored and degenerate counts add up to `N`, so the bucket
    /// masses add up to `mu_total`.
    pub fn bookkeeping_holds(&self) -> bool {
        self.counts.iter().sum::<u64>() + self.n_censored + self.n_degenerate == self.n_samples
    }

    pub fn verify(&self) -> Result<()> {
        if !self.bookkeeping_holds() {
            return Err(Error::BoundViolation(
                "bucket counts do not add up to N".into(),
            ));
        }
        if !self.lower_holds {
            return Err(Error::BoundViolation(format!(
                "S = {} below lambda/D = {}",
                self.weighted_sum, self.lower_bound
            )));
        }
        if self.upper_holds == Some(false) {
            return Err(Error::BoundViolation(format!(
                "S = {} above lambda/d = {}",
                self.weighted_sum,
                self.upper_bound.unwrap_or(f64::NAN)
            )));
        }
        Ok(())
    }
}

pub fn reflection_histogram(scene: &Scene, settings: &RunSettings) -> ReflectionHistogram {
    let set = SampleSet::trace(scene, settings);
    let lambda = lambda_total(scene, settings.volume_points, settings.seed);
    histogram_from_samples(scene, &set, lambda)
}

fn histogram_from_samples(
    scene: &Scene,
    set: &SampleSet,
    lambda: VolumeEstimate,
) -> ReflectionHistogram {
    let mut counts: Vec<u64> = Vec::new();
    for r in set.records.iter().filter(|r| r.kind == SampleKind::Exited) {
        let k = r.reflections as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    let n = set.records.len() as u64;
    let mu = set.mu_total;
    let m: Moments = set
        .records
        .iter()
        .map(|r| match r.kind {
            SampleKind::Exited => (r.reflections + 1) as f64,
            _ => 0.0,
        })
        .collect();
    let weighted_sum = mu * m.mean();
    let weighted_sum_std_error = mu * m.std_error();

    let lower_bound = lambda.value / (2.0 * scene.radius());
    let upper_bound = scene
        .min_separation()
        .filter(|_| scene.strictly_convex_components())
        .map(|d| lambda.value / d);
    let slack_low = 3.0 * weighted_sum_std_error.hypot(lambda.std_error / (2.0 * scene.radius()));
    let lower_holds = lower_bound <= weighted_sum + slack_low;
    let upper_holds = scene.min_separation().zip(upper_bound).map(|(d, ub)| {
        weighted_sum - 3.0 * weighted_sum_std_error.hypot(lambda.std_error / d) <= ub
    });
    let decay_constant = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k + 1) as f64 * mu * c as f64 / n as f64)
        .fold(0.0, f64::max);
    ReflectionHistogram {
        counts,
        n_samples: n,
        n_censored: set.n_censored(),
        n_degenerate: set.n_degenerate(),
        mu_total: mu,
        weighted_sum,
        weighted_sum_std_error,
        lambda_total: lambda,
        lower_bound,
        upper_bound,
        lower_holds,
        upper_holds,
        decay_constant,
        t_max: set.settings.caps.t_max,
        k_max: set.settings.caps.k_max,
        seed: set.settings.seed,
    }
}

/// Number of equal balls of radius `a` matching a recovered volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentCount {
    pub fractional: f64,
    pub rounded: u64,
    pub std_error: f64,
}

pub fn count_components(volume: &Estimate, a: f64, n: usize) -> Result<ComponentCount> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive, got {a}"
        )));
    }
    let unit = ball_volume(n, a);
    let fractional = volume.value / unit;
    Ok(ComponentCount {
        fractional,
        rounded: fractional.round().max(0.0) as u64,
        std_error: volume.std_error / unit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub trapped: TrappedMeasure,
    /// `|trapped(ε) - trapped(0)|`.
    pub deviation: f64,
    /// Standard error of the deviation, treating the rows as independent;
    /// zero on the unperturbed row.
    pub deviation_std_error: f64,
}

/// Trapped measure of the scene's perturbation family at each amplitude,
/// all with the same seed.
pub fn perturbation_sweep(
    scene: &Scene,
    epsilons: &[f64],
    settings: &RunSettings,
) -> Result<Vec<SweepRow>> {
    if scene.perturbation().is_none() {
        return Err(Error::NoPerturbationFamily);
    }
    if !epsilons.contains(&0.0) {
        return Err(Error::InvalidParameter(
            "the amplitude list must contain 0".into(),
        ));
    }
    let base = trapped_measure(scene, settings);
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let trapped = if epsilon == 0.0 {
            base
        } else {
            trapped_measure(&scene.perturbed(epsilon)?, settings)
        };
        rows.push(SweepRow {
            epsilon,
            trapped,
            deviation: (trapped.trapped.value - base.trapped.value).abs(),
            deviation_std_error: if epsilon == 0.0 {
                0.0
            } else {
                trapped.trapped.std_error.hypot(base.trapped.std_error)
            },
        });
    }
    Ok(rows)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, five points.
const GAUSS_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `∫_{S+(∂M)} ∫_0^{t(x)} f(φ_t(x)) dt dμ(x)`, integrating `f` along each
/// free flight with `panels` five-point Gauss–Legendre panels.
///
/// Extension hook for integrands other than `f = 1`; censored samples
/// contribute their truncated path.
pub fn trajectory_integral<F>(
    scene: &Scene,
    settings: &RunSettings,
    panels: usize,
    f: F,
) -> Estimate
where
    F: Fn(Vector, UnitVector) -> f64 + Sync,
{
    let sampler = LiouvilleSampler::new(scene, settings.seed);
    let panels = panels.max(1);
    let values: Vec<(f64, SampleRecord)> = settings.install(|| {
        (0..settings.samples)
            .into_par_iter()
            .map(|i| {
                let mut sum = 0.0;
                let entry = sampler.sample_entry(i);
                let outcome = trace_with(
                    scene,
                    entry,
                    settings.caps,
                    &settings.ray,
                    |seg| {
                        let h = seg.length / panels as f64;
                        let dir = seg.direction.get();
                        for p in 0..panels {
                            let mid = (p as f64 + 0.5) * h;
                            for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                                let t = mid + 0.5 * h * x;
                                sum += 0.5 * h * w * f(seg.start + dir * t, seg.direction);
                            }
                        }
                    },
                    |_| {},
                );
                (sum, SampleRecord::new(scene, entry, outcome))
            })
            .collect()
    });
    let set = SampleSet {
        records: values.iter().map(|(_, r)| *r).collect(),
        settings: *settings,
        mu_total: mu_total(scene),
    };
    let m: Moments = values
        .iter()
        .filter(|(_, r)| r.kind != SampleKind::Degenerate)
        .map(|(v, _)| *v)
        .collect();
    set.wrap(set.mu_total * m.mean(), set.mu_total * m.std_error())
}

/// Binned comparison of μ on the full boundary with its image under the
/// billiard ball map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub position_bins: usize,
    pub cosine_bins: usize,
    pub mapped: u64,
    pub degenerate: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Draws `samples` states from μ on the whole boundary, maps each by the
/// billiard ball map, and tests the images against the analytic cell
/// probabilities of μ by chi-squared. Scenes must have ball obstacles.
pub fn mu_invariance(
    scene: &Scene,
    samples: u64,
    seed: u64,
    position_bins: usize,
    cosine_bins: usize,
    ray: &RayParams,
) -> Result<InvarianceCheck> {
    let sampler = BoundarySampler::new(scene, seed)?;
    let n = scene.dimension();
    let components: Vec<(Vector, f64)> = sampler.components().collect();
    let weights: Vec<f64> = components
        .iter()
        .map(|(_, r)| r.powi(n as i32 - 1))
        .collect();
    let total: f64 = weights.iter().sum();
    let cells: Vec<Option<usize>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = sampler.sample(i).state;
            let y = billiard_map(scene, x, ray).ok()?;
            Some(cell(
                y.q,
                y.v,
                &components,
                &weights,
                total,
                n,
                position_bins,
                cosine_bins,
            ))
        })
        .collect();
    let mut observed = vec![0u64; position_bins * cosine_bins];
    let mut degenerate = 0u64;
    for c in &cells {
        match c {
            Some(c) => observed[*c] += 1,
            None => degenerate += 1,
        }
    }
    let cdf = |c: f64| {
        if n == 2 {
            1.0 - (1.0 - c * c).max(0.0).sqrt()
        } else {
            c * c
        }
    };
    let mut probs = Vec::with_capacity(observed.len());
    for _ in 0..position_bins {
        for j in 0..cosine_bins {
            let lo = j as f64 / cosine_bins as f64;
            let hi = (j + 1) as f64 / cosine_bins as f64;
            probs.push((cdf(hi) - cdf(lo)) / position_bins as f64);
        }
    }
    let ChiSquareTest {
        statistic,
        dof,
        p_value,
    } = chi_square_gof(&observed, &probs);
    Ok(InvarianceCheck {
        position_bins,
        cosine_bins,
        mapped: samples - degenerate,
        degenerate,
        statistic,
        dof,
        p_value,
    })
}

/// Cell of a boundary state: area-uniform position coordinate across all
/// components times the cosine with the inward normal.
#[allow(clippy::too_many_arguments)]
fn cell(
    q: Vector,
    v: UnitVector,
    components: &[(Vector, f64)],
    weights: &[f64],
    total: f64,
    n: usize,
    position_bins: usize,
    cosine_bins: usize,
) -> usize {
    let (index, _) = components
        .iter()
        .enumerate()
        .map(|(i, (c, r))| (i, ((q - *c).norm() - r).abs()))
        .fold(
            (0, f64::INFINITY),
            |best, x| if x.1 < best.1 { x } else { best },
        );
    let (center, radius) = components[index];
    let u = (q - center) / radius;
    let normal = if index == 0 { -u } else { u };
    let local = if n == 2 {
        (u.y().atan2(u.x()) + PI) / (2.0 * PI)
    } else {
        0.5 * (1.0 + u.z())
    };
    let offset: f64 = weights[..index].iter().sum();
    let position = ((offset + local * weights[index]) / total).clamp(0.0, 1.0 - 1e-15);
    let cosine = normal.dot(v.get()).clamp(0.0, 1.0 - 1e-15);
    let p = (position * position_bins as f64) as usize;
    let c = (cosine * cosine_bins as f64) as usize;
    p.min(position_bins - 1) * cosine_bins + c.min(cosine_bins - 1)
}
