//! Arm reward distributions and their ground truth.
//!
//! Means, gaps and moments are computed analytically (or by deterministic
//! quadrature where no closed form exists); nothing here is estimated from
//! samples.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Pareto, StudentT};

use crate::error::{ensure, Error, Result};
use crate::numeric::{integrate, integrate_to_inf};

/// Reward distribution of a single arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmSpec {
    Bernoulli { q: f64 },
    Gaussian { mean: f64, std: f64 },
    Exponential { rate: f64 },
    /// Density `shape * scale^shape / x^(shape + 1)` on `[scale, inf)`.
    Pareto { shape: f64, scale: f64 },
    /// Student's t with `dof` degrees of freedom shifted by `location`.
    StudentT { dof: f64, location: f64 },
}

impl fmt::Display for ArmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ArmSpec::Bernoulli { q } => write!(f, "Bernoulli(q={q})"),
            ArmSpec::Gaussian { mean, std } => write!(f, "Gaussian(mean={mean}, std={std})"),
            ArmSpec::Exponential { rate } => write!(f, "Exponential(rate={rate})"),
            ArmSpec::Pareto { shape, scale } => write!(f, "Pareto(shape={shape}, scale={scale})"),
            ArmSpec::StudentT { dof, location } => {
                write!(f, "StudentT(dof={dof}, location={location})")
            }
        }
    }
}

impl ArmSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmSpec::Bernoulli { q } => ensure((0.0..=1.0).contains(&q), "q", q, "must lie in [0, 1]"),
            ArmSpec::Gaussian { mean, std } => {
                ensure(mean.is_finite(), "mean", mean, "must be finite")?;
                ensure(std > 0.0 && std.is_finite(), "std", std, "must be positive")
            }
            ArmSpec::Exponential { rate } => {
                ensure(rate > 0.0 && rate.is_finite(), "rate", rate, "must be positive")
            }
            ArmSpec::Pareto { shape, scale } => {
                ensure(shape > 1.0 && shape.is_finite(), "shape", shape, "must exceed 1")?;
                ensure(scale > 0.0 && scale.is_finite(), "scale", scale, "must be positive")
            }
            ArmSpec::StudentT { dof, location } => {
                ensure(dof > 1.0 && dof.is_finite(), "dof", dof, "must exceed 1")?;
                ensure(location.is_finite(), "location", location, "must be finite")
            }
        }
    }

    /// Closed-form mean.
    pub fn mean(&self) -> f64 {
        match *self {
            ArmSpec::Bernoulli { q } => q,
            ArmSpec::Gaussian { mean, .. } => mean,
            ArmSpec::Exponential { rate } => 1.0 / rate,
            ArmSpec::Pareto { shape, scale } => shape * scale / (shape - 1.0),
            ArmSpec::StudentT { location, .. } => location,
        }
    }

    /// Whether the moment-generating function exists near zero.
    pub fn is_light_tailed(&self) -> bool {
        !matches!(self, ArmSpec::Pareto { .. } | ArmSpec::StudentT { .. })
    }

    /// `E|X - mean|^p` and `E|X|^p`, or `None` when they are infinite.
    pub fn moments(&self, p: f64) -> Result<Option<Moments>> {
        central_moment_bound(self, p)
    }

    /// Second derivative of the centred moment-generating function,
    /// `M''(u) = E[(X - mean)^2 exp(u (X - mean))]`.
    pub fn centered_mgf_second_derivative(&self, u: f64) -> Result<f64> {
        match *self {
            ArmSpec::Bernoulli { q } => {
                Ok(q * (1.0 - q).powi(2) * (u * (1.0 - q)).exp() + (1.0 - q) * q * q * (-u * q).exp())
            }
            ArmSpec::Gaussian { std, .. } => {
                let var = std * std;
                Ok((var + var * var * u * u) * (0.5 * var * u * u).exp())
            }
            ArmSpec::Exponential { rate } => {
                if u >= rate {
                    return Err(Error::InvalidParameter {
                        name: "u",
                        value: u,
                        reason: "the exponential mgf only exists for u < rate",
                    });
                }
                let m = 1.0 / rate;
                let d = rate - u;
                Ok((-u * m).exp() * rate * (2.0 / d.powi(3) - 2.0 * m / d.powi(2) + m * m / d))
            }
            _ => Err(Error::HeavyTailed(self.to_string())),
        }
    }

    /// `sup { M''(u) : |u| <= u0 }`, the smallest admissible `zeta` for the
    /// sub-Gaussian mgf bound on `[-u0, u0]`.
    ///
    /// `M''` is itself an mgf of a non-negative measure and therefore convex,
    /// so the supremum sits at an endpoint.
    pub fn mgf_curvature_sup(&self, u0: f64) -> Result<f64> {
        ensure(u0 > 0.0 && u0.is_finite(), "u0", u0, "must be positive")?;
        let lo = self.centered_mgf_second_derivative(-u0)?;
        let hi = self.centered_mgf_second_derivative(u0)?;
        Ok(lo.max(hi))
    }

    fn sampler(&self) -> Sampler {
        // Parameters are validated before this is called.
        match *self {
            ArmSpec::Bernoulli { q } => Sampler::Bernoulli(q),
            ArmSpec::Gaussian { mean, std } => Sampler::Gaussian(Normal::new(mean, std).unwrap()),
            ArmSpec::Exponential { rate } => Sampler::Exponential(Exp::new(rate).unwrap()),
            ArmSpec::Pareto { shape, scale } => Sampler::Pareto(Pareto::new(scale, shape).unwrap()),
            ArmSpec::StudentT { dof, location } => {
                Sampler::StudentT(StudentT::new(dof).unwrap(), location)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Bernoulli(f64),
    Gaussian(Normal<f64>),
    Exponential(Exp<f64>),
    Pareto(Pareto<f64>),
    StudentT(StudentT<f64>, f64),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Bernoulli(q) => {
                if rng.random::<f64>() < *q {
                    1.0
                } else {
                    0.0
                }
            }
            Sampler::Gaussian(d) => d.sample(rng),
            Sampler::Exponential(d) => d.sample(rng),
            Sampler::Pareto(d) => d.sample(rng),
            Sampler::StudentT(d, loc) => loc + d.sample(rng),
        }
    }
}

/// Absolute moments of order `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `E|X - mean|^p`
    pub central: f64,
    /// `E|X|^p`
    pub raw: f64,
}

/// Absolute central and raw moments of order `p > 1`, `Ok(None)` when infinite.
pub fn central_moment_bound(spec: &ArmSpec, p: f64) -> Result<Option<Moments>> {
    ensure(p > 1.0 && p.is_finite(), "p", p, "must exceed 1")?;
    spec.validate()?;
    let moments = match *spec {
        ArmSpec::Bernoulli { q } => Moments {
            central: q * (1.0 - q).powf(p) + (1.0 - q) * q.powf(p),
            raw: q,
        },
        ArmSpec::Gaussian { mean, std } => {
            let central = std.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt();
            let raw = if mean == 0.0 {
                central
            } else {
                let density = |x: f64| {
                    let z = (x - mean) / std;
                    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
                };
                integrate_to_inf(|x| x.powf(p) * density(x), 0.0)
                    + integrate_to_inf(|x| x.powf(p) * density(-x), 0.0)
            };
            Moments { central, raw }
        }
        ArmSpec::Exponential { rate } => {
            let m = 1.0 / rate;
            let raw = gamma(p + 1.0) / rate.powf(p);
            // Memorylessness: X - m given X > m is again Exponential(rate).
            let upper = (-1.0f64).exp() * raw;
            let lower = integrate(|x| (m - x).powf(p) * rate * (-rate * x).exp(), 0.0, m);
            Moments {
                central: lower + upper,
                raw,
            }
        }
        ArmSpec::Pareto { shape, scale } => {
            if p >= shape {
                return Ok(None);
            }
            let theta = spec.mean();
            let density = |x: f64| shape * scale.powf(shape) / x.powf(shape + 1.0);
            let lower = integrate(|x| (theta - x).powf(p) * density(x), scale, theta);
            let upper = integrate_to_inf(|y| y.powf(p) * density(theta + y), 0.0);
            Moments {
                central: lower + upper,
                raw: shape * scale.powf(p) / (shape - p),
            }
        }
        ArmSpec::StudentT { dof, location } => {
            if p >= dof {
                return Ok(None);
            }
            let central = dof.powf(p / 2.0)
                * (ln_gamma((p + 1.0) / 2.0) + ln_gamma((dof - p) / 2.0) - ln_gamma(dof / 2.0))
                    .exp()
                / PI.sqrt();
            let raw = if location == 0.0 {
                central
            } else {
                let norm = (ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0)).exp()
                    / (dof * PI).sqrt();
                let density = |x: f64| {
                    let z = x - location;
                    norm * (1.0 + z * z / dof).powf(-(dof + 1.0) / 2.0)
                };
                integrate_to_inf(|x| x.powf(p) * density(x), 0.0)
                    + integrate_to_inf(|x| x.powf(p) * density(-x), 0.0)
            };
            Moments { central, raw }
        }
    };
    Ok(Some(moments))
}

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// An `N`-armed stochastic bandit. Arms are indexed from 0.
#[derive(Debug, Clone)]
pub struct Bandit {
    arms: Vec<ArmSpec>,
    samplers: Vec<Sampler>,
    means: Vec<f64>,
}

impl Bandit {
    pub fn new(arms: Vec<ArmSpec>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::EmptyBandit);
        }
        for arm in &arms {
            arm.validate()?;
        }
        let samplers = arms.iter().map(ArmSpec::sampler).collect();
        let means = arms.iter().map(ArmSpec::mean).collect();
        Ok(Self {
            arms,
            samplers,
            means,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    /// One reward draw from `arm`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let sampler = self.samplers.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            arms: self.arms.len(),
        })?;
        Ok(sampler.draw(rng))
    }

    pub fn true_means(&self) -> &[f64] {
        &self.means
    }

    pub fn gaps(&self) -> GapProfile {
        GapProfile::from_means(&self.means)
    }

    /// Largest `E|X - mean|^p` over the arms, `None` if any is infinite.
    pub fn max_central_moment(&self, p: f64) -> Result<Option<f64>> {
        self.fold_moments(p, |m| m.central)
    }

    /// Largest `E|X|^p` over the arms, `None` if any is infinite.
    pub fn max_raw_moment(&self, p: f64) -> Result<Option<f64>> {
        self.fold_moments(p, |m| m.raw)
    }

    fn fold_moments(&self, p: f64, pick: impl Fn(&Moments) -> f64) -> Result<Option<f64>> {
        let mut best = f64::NEG_INFINITY;
        for arm in &self.arms {
            match central_moment_bound(arm, p)? {
                Some(m) => best = best.max(pick(&m)),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }

    /// Largest per-arm `mgf_curvature_sup`, a `zeta` valid for every arm.
    pub fn mgf_curvature_sup(&self, u0: f64) -> Result<f64> {
        self.arms
            .iter()
            .map(|a| a.mgf_curvature_sup(u0))
            .try_fold(f64::NEG_INFINITY, |acc, z| z.map(|z| acc.max(z)))
    }
}

/// Arms ordered by decreasing mean, and the gap of each rank to the best.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    /// `order[r]` is the arm with rank `r + 1`; ties go to the lower index.
    pub order: Vec<usize>,
    /// `gaps[r] = mean(order[0]) - mean(order[r])`; `gaps[0] == 0`.
    pub gaps: Vec<f64>,
}

impl GapProfile {
    pub fn from_means(means: &[f64]) -> Self {
        let order = descending_order(means);
        let best = order.first().map(|&i| means[i]).unwrap_or(0.0);
        let gaps = order.iter().map(|&i| best - means[i]).collect();
        Self { order, gaps }
    }

    /// 1-based rank of `arm`.
    pub fn rank_of(&self, arm: usize) -> usize {
        self.order.iter().position(|&a| a == arm).map(|r| r + 1).unwrap_or(0)
    }

    /// `rank_of` for every arm at once.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (r, &arm) in self.order.iter().enumerate() {
            ranks[arm] = r + 1;
        }
        ranks
    }

    pub fn best_arm(&self) -> usize {
        self.order[0]
    }

    /// `Delta_N`, the largest gap.
    pub fn max_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(0.0)
    }
}

/// Indices sorted by decreasing value, ties by ascending index.
pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // Stable sort keeps ascending index among equal values.
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}
