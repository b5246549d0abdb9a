//! Conventional samplers: analytic and numeric inversion, rejection, Gaussian
//! mixture and random-walk Metropolis-Hastings.
//!
//! All randomness is drawn as uniforms from the caller's generator; Gaussian
//! variates go through [`normal_quantile`] so that every sampler consumes a
//! single uniform stream.

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::targets::{tabulate, GaussianComponent, TargetDensity};

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Standard normal quantile, Wichura's AS 241 (`PPND16`). Absolute error is
/// around 1e-16 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.014875361290850615025)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// One standard normal variate by inversion.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normal_quantile(open_uniform(rng))
}

/// Analytic inverse CDF of `½ exp(-|y|)`.
pub fn inverse_cdf_laplace(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            value: u,
            domain: "(0, 1)",
        });
    }
    Ok(if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    })
}

/// CDF of `½ exp(-|y|)`.
pub fn laplace_cdf(y: f64) -> f64 {
    if y < 0.0 {
        0.5 * y.exp()
    } else {
        1.0 - 0.5 * (-y).exp()
    }
}

/// Monotone piecewise-linear inverse of a tabulated CDF.
#[derive(Clone, Debug)]
pub struct NumericInverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl NumericInverseCdf {
    /// Cumulative trapezoid of the target on the grid, renormalized to end at 1.
    pub fn new(target: &TargetDensity, grid: &EvalGrid) -> Result<Self> {
        if target.dim() != 1 || grid.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: target.dim().max(grid.dim()),
            });
        }
        let tab = tabulate(target, grid)?;
        Self::from_tabulated(grid.axis(0).coords(), &tab)
    }

    pub fn from_tabulated(nodes: Vec<f64>, density: &[f64]) -> Result<Self> {
        if nodes.len() != density.len() || nodes.len() < 2 {
            return Err(Error::shape("tabulated density needs >= 2 matching nodes"));
        }
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..nodes.len() {
            acc += 0.5 * (density[i] + density[i - 1]) * (nodes[i] - nodes[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::ZeroMass(format!("tabulated mass is {acc}")));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        // Pin the last value so u -> 1 maps to the upper bound, not past it.
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Self { nodes, cdf })
    }

    /// CDF value at `y` by linear interpolation (clamped to [0, 1]).
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.nodes[0] {
            return 0.0;
        }
        if y >= *self.nodes.last().expect("non-empty") {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&x| x <= y);
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        let t = (y - x0) / (x1 - x0);
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Inverse CDF for `u ∈ [0, 1]` by binary search and linear interpolation.
    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // First index whose cdf is >= u.
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.nodes[0];
        }
        if i >= self.cdf.len() {
            return *self.nodes.last().expect("non-empty");
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        if c1 <= c0 {
            return x0;
        }
        x0 + (u - c0) / (c1 - c0) * (x1 - x0)
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        *self.nodes.last().expect("non-empty")
    }
}

/// Builds the numeric inverse CDF of a 1D target on `grid`.
pub fn numeric_inverse_cdf(target: &TargetDensity, grid: &EvalGrid) -> Result<NumericInverseCdf> {
    NumericInverseCdf::new(target, grid)
}

/// `count` i.i.d. draws by pushing open uniforms through the numeric inverse CDF.
pub fn inversion_sample<R: Rng + ?Sized>(
    target: &TargetDensity,
    grid: &EvalGrid,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let inv = NumericInverseCdf::new(target, grid)?;
    Ok((0..count).map(|_| inv.inverse(open_uniform(rng))).collect())
}

/// Laplace draws through the analytic inverse.
pub fn laplace_inversion_sample<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count)
        .map(|_| inverse_cdf_laplace(open_uniform(rng)).expect("open uniform lies in (0, 1)"))
        .collect()
}

/// How proposals are drawn for rejection sampling on a truncated support.
#[derive(Clone, Debug)]
enum ProposalSampler {
    /// Analytic Laplace inverse restricted to `[F(lo), F(hi)]`.
    Laplace { f_lo: f64, f_hi: f64 },
    Numeric(NumericInverseCdf),
}

/// Proposal density plus envelope constant for a target on a bounded interval.
///
/// Target and proposal are renormalized over `[lo, hi]`, so the acceptance
/// rate equals `1/c`.
#[derive(Clone, Debug)]
pub struct RejectionSpec {
    proposal: TargetDensity,
    sampler: ProposalSampler,
    lo: f64,
    hi: f64,
    target_mass: f64,
    proposal_mass: f64,
    c: f64,
}

impl RejectionSpec {
    /// Grid maximum of the truncated density ratio times a 1.01 safety factor.
    pub fn with_grid_envelope(
        target: &TargetDensity,
        proposal: TargetDensity,
        grid: &EvalGrid,
    ) -> Result<Self> {
        let mut spec = Self::build(target, proposal, grid, 1.0)?;
        let ratio_max = grid
            .axis(0)
            .coords()
            .iter()
            .filter_map(|&y| {
                let b = spec.proposal_density(y);
                (b > 0.0).then(|| spec.target_density(target, y) / b)
            })
            .fold(0.0f64, f64::max);
        if !(ratio_max > 0.0 && ratio_max.is_finite()) {
            return Err(Error::invalid(format!(
                "no finite envelope constant on the grid (max ratio {ratio_max})"
            )));
        }
        spec.c = 1.01 * ratio_max;
        Ok(spec)
    }

    /// Explicit envelope constant; the envelope condition is verified on the grid.
    pub fn with_constant(
        target: &TargetDensity,
        proposal: TargetDensity,
        grid: &EvalGrid,
        c: f64,
    ) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("envelope constant must be > 0, got {c}")));
        }
        let spec = Self::build(target, proposal, grid, c)?;
        for y in grid.axis(0).coords() {
            let (t, e) = (spec.target_density(target, y), c * spec.proposal_density(y));
            if t > e {
                return Err(Error::EnvelopeViolation {
                    y,
                    target: t,
                    envelope: e,
                });
            }
        }
        Ok(spec)
    }

    fn build(target: &TargetDensity, proposal: TargetDensity, grid: &EvalGrid, c: f64) -> Result<Self> {
        if target.dim() != 1 || proposal.dim() != 1 || grid.dim() != 1 {
            return Err(Error::invalid("rejection sampling is one-dimensional"));
        }
        let (lo, hi) = grid.bounds();
        let target_mass = grid.integrate(&tabulate(target, grid)?)?;
        let proposal_tab = tabulate(&proposal, grid)?;
        let sampler = if proposal.name() == "laplace" {
            ProposalSampler::Laplace {
                f_lo: laplace_cdf(lo),
                f_hi: laplace_cdf(hi),
            }
        } else {
            ProposalSampler::Numeric(NumericInverseCdf::from_tabulated(
                grid.axis(0).coords(),
                &proposal_tab,
            )?)
        };
        let proposal_mass = match sampler {
            ProposalSampler::Laplace { f_lo, f_hi } => f_hi - f_lo,
            ProposalSampler::Numeric(_) => grid.integrate(&proposal_tab)?,
        };
        if !(target_mass > 0.0 && proposal_mass > 0.0) {
            return Err(Error::ZeroMass("target or proposal has no mass on the grid".into()));
        }
        Ok(Self {
            proposal,
            sampler,
            lo,
            hi,
            target_mass,
            proposal_mass,
            c,
        })
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn proposal_density(&self, y: f64) -> f64 {
        self.proposal.eval_1d(y) / self.proposal_mass
    }

    fn target_density(&self, target: &TargetDensity, y: f64) -> f64 {
        target.eval_1d(y) / self.target_mass
    }

    fn draw_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_uniform(rng);
        match &self.sampler {
            ProposalSampler::Laplace { f_lo, f_hi } => {
                let v = f_lo + u * (f_hi - f_lo);
                inverse_cdf_laplace(v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
                    .expect("clamped into (0, 1)")
                    .clamp(self.lo, self.hi)
            }
            ProposalSampler::Numeric(inv) => inv.inverse(u),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RejectionOutput {
    pub samples: Vec<f64>,
    pub proposed: u64,
    pub acceptance_rate: f64,
}

/// Draws until `count` proposals are accepted.
pub fn rejection_sample<R: Rng + ?Sized>(
    target: &TargetDensity,
    spec: &RejectionSpec,
    count: usize,
    rng: &mut R,
) -> Result<RejectionOutput> {
    let mut samples = Vec::with_capacity(count);
    let mut proposed = 0u64;
    while samples.len() < count {
        let y = spec.draw_proposal(rng);
        proposed += 1;
        let envelope = spec.c * spec.proposal_density(y);
        let rho = spec.target_density(target, y);
        if rho > envelope {
            return Err(Error::EnvelopeViolation {
                y,
                target: rho,
                envelope,
            });
        }
        let r = open_uniform(rng) * envelope;
        if r < rho {
            samples.push(y);
        }
    }
    let acceptance_rate = if proposed == 0 {
        0.0
    } else {
        count as f64 / proposed as f64
    };
    Ok(RejectionOutput {
        samples,
        proposed,
        acceptance_rate,
    })
}

/// Validated 1D Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MixtureSpec {
    /// Components as `(weight, mean, std)`. Weights must be nonnegative and sum
    /// to 1 within 1e-9; stds must be positive.
    pub fn new(components: &[(f64, f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        for &(w, m, s) in components {
            if !(w >= 0.0 && w.is_finite()) || !m.is_finite() || !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!(
                    "bad mixture component (weight {w}, mean {m}, std {s})"
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.0;
                acc
            })
            .collect();
        Ok(Self {
            weights: components.iter().map(|c| c.0).collect(),
            means: components.iter().map(|c| c.1).collect(),
            stds: components.iter().map(|c| c.2).collect(),
            cumulative,
        })
    }

    /// Exact decomposition of a 1D built-in target, when it is a mixture.
    pub fn for_target(target: &TargetDensity) -> Option<Self> {
        let comps = target.gaussian_components()?;
        if target.dim() != 1 {
            return None;
        }
        let raw: Vec<(f64, f64, f64)> = comps.iter().map(|c| (c.weight, c.mean[0], c.std)).collect();
        Self::new(&raw).ok()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn choose(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }
}

/// Categorical mode choice followed by one Gaussian draw, per sample.
pub fn mixture_sample<R: Rng + ?Sized>(spec: &MixtureSpec, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let k = spec.choose(open_uniform(rng));
            spec.means[k] + spec.stds[k] * standard_normal(rng)
        })
        .collect()
}

/// Draws from an isotropic Gaussian mixture in any dimension.
pub fn mixture_sample_nd<R: Rng + ?Sized>(
    components: &[GaussianComponent],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<(f64, f64, f64)> = components.iter().map(|c| (c.weight, 0.0, c.std)).collect();
    let spec = MixtureSpec::new(&raw)?;
    Ok((0..count)
        .map(|_| {
            let c = &components[spec.choose(open_uniform(rng))];
            c.mean
                .iter()
                .map(|m| m + c.std * standard_normal(rng))
                .collect()
        })
        .collect())
}

/// Random-walk Metropolis-Hastings settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MhSpec {
    pub proposal_std: f64,
    /// Starting point; `None` uses the grid argmax of the target.
    pub initial: Option<f64>,
    pub burn_in: usize,
}

impl MhSpec {
    pub fn new(proposal_std: f64, initial: Option<f64>, burn_in: usize) -> Result<Self> {
        if !(proposal_std > 0.0 && proposal_std.is_finite()) {
            return Err(Error::invalid(format!(
                "proposal std must be > 0, got {proposal_std}"
            )));
        }
        Ok(Self {
            proposal_std,
            initial,
            burn_in,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MhOutput<S> {
    pub samples: Vec<S>,
    pub burn_in: usize,
    pub accepted: u64,
    pub acceptance_rate: f64,
}

/// Generic Metropolis-Hastings with a symmetric proposal: accept `y'` when
/// `r <= min(1, ρ(y')/ρ(y))`, otherwise repeat the current state. The first
/// `burn_in` states are discarded.
pub fn metropolis_chain<S, R, D, P>(
    density: D,
    mut propose: P,
    initial: S,
    burn_in: usize,
    count: usize,
    rng: &mut R,
) -> Result<MhOutput<S>>
where
    S: Clone,
    R: Rng + ?Sized,
    D: Fn(&S) -> f64,
    P: FnMut(&S, &mut R) -> S,
{
    let mut current = initial;
    let mut rho = density(&current);
    if !(rho > 0.0) {
        return Err(Error::invalid(format!(
            "initial state has density {rho}; the acceptance ratio is undefined"
        )));
    }
    let mut samples = Vec::with_capacity(count);
    let mut accepted = 0u64;
    let total = burn_in + count;
    for step in 0..total {
        let candidate = propose(&current, rng);
        let rho_new = density(&candidate);
        let r = open_uniform(rng);
        if r <= (rho_new / rho).min(1.0) {
            current = candidate;
            rho = rho_new;
            accepted += 1;
        }
        if step >= burn_in {
            samples.push(current.clone());
        }
    }
    Ok(MhOutput {
        samples,
        burn_in,
        accepted,
        acceptance_rate: accepted as f64 / total.max(1) as f64,
    })
}

/// Grid argmax of a 1D target.
pub fn grid_mode(target: &TargetDensity, grid: &EvalGrid) -> Result<f64> {
    let tab = tabulate(target, grid)?;
    let (k, _) = tab
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
    Ok(grid.point(k)[0])
}

/// Gaussian random-walk chain on a 1D target.
pub fn metropolis_hastings<R: Rng + ?Sized>(
    target: &TargetDensity,
    spec: &MhSpec,
    grid: &EvalGrid,
    count: usize,
    rng: &mut R,
) -> Result<MhOutput<f64>> {
    if target.dim() != 1 {
        return Err(Error::invalid("metropolis_hastings expects a 1D target"));
    }
    let y0 = match spec.initial {
        Some(y) => y,
        None => grid_mode(target, grid)?,
    };
    let sigma = spec.proposal_std;
    metropolis_chain(
        |y: &f64| target.eval_1d(*y),
        |y: &f64, rng: &mut R| y + sigma * standard_normal(rng),
        y0,
        spec.burn_in,
        count,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn normal_quantile_accuracy() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            assert!((normal_quantile(p) - n.inverse_cdf(p)).abs() < 1e-9, "p={p}");
        }
        for p in [1e-12, 1e-8, 1e-5, 1.0 - 1e-8] {
            // Round-trip through the CDF in the tails.
            let x = normal_quantile(p);
            assert!((n.cdf(x) - p).abs() / p.min(1.0 - p) < 1e-8, "p={p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn laplace_inverse_values() {
        assert_eq!(inverse_cdf_laplace(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(inverse_cdf_laplace(0.25).unwrap(), -0.69315, epsilon = 1e-5);
        assert_abs_diff_eq!(inverse_cdf_laplace(0.9).unwrap(), 1.60944, epsilon = 1e-5);
        assert!(inverse_cdf_laplace(0.0).is_err());
        assert!(inverse_cdf_laplace(1.0).is_err());
        assert!(inverse_cdf_laplace(-0.2).is_err());
    }

    #[test]
    fn numeric_inverse_matches_analytic() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 8192).unwrap();
        let inv = numeric_inverse_cdf(&TargetDensity::laplace(), &grid).unwrap();
        let delta = grid.axis(0).spacing();
        assert!(inv.inverse(0.5).abs() <= delta);
        let mut worst = 0.0f64;
        for i in 0..=980 {
            let u = 0.01 + i as f64 * 1e-3;
            worst = worst.max((inv.inverse(u) - inverse_cdf_laplace(u).unwrap()).abs());
        }
        assert!(worst < 1e-3, "sup-norm {worst}");
    }

    #[test]
    fn numeric_inverse_y2exp_median() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 4097).unwrap();
        let inv = numeric_inverse_cdf(&TargetDensity::y2exp(1.0).unwrap(), &grid).unwrap();
        assert!(inv.inverse(0.5).abs() <= grid.axis(0).spacing());
    }

    #[test]
    fn numeric_inverse_zero_mass() {
        let t = TargetDensity::laplace();
        let zero = vec![0.0; 10];
        let nodes: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            NumericInverseCdf::from_tabulated(nodes, &zero),
            Err(Error::ZeroMass(_))
        ));
        let grid2 = EvalGrid::new_2d(-1.0, 1.0, 5).unwrap();
        assert!(numeric_inverse_cdf(&t, &grid2).is_err());
    }

    #[test]
    fn inversion_is_deterministic() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 2048).unwrap();
        let t = TargetDensity::laplace();
        let a = inversion_sample(&t, &grid, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = inversion_sample(&t, &grid, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_with_identical_proposal_accepts_all() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 2049).unwrap();
        let t = TargetDensity::laplace();
        let spec = RejectionSpec::with_constant(&t, TargetDensity::laplace(), &grid, 1.0).unwrap();
        let out = rejection_sample(&t, &spec, 2000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.samples.len(), 2000);
        assert!(out.acceptance_rate > 0.999, "{}", out.acceptance_rate);
    }

    #[test]
    fn rejection_envelope_violation() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 1025).unwrap();
        let t = TargetDensity::y2exp(1.0).unwrap();
        let err = RejectionSpec::with_constant(&t, TargetDensity::laplace(), &grid, 2.0).unwrap_err();
        assert!(matches!(err, Error::EnvelopeViolation { .. }));
    }

    #[test]
    fn y2exp_envelope_constant() {
        let grid = EvalGrid::new_1d(-12.0, 12.0, 4097).unwrap();
        let t = TargetDensity::y2exp(1.0).unwrap();
        let spec = RejectionSpec::with_grid_envelope(&t, TargetDensity::laplace(), &grid).unwrap();
        // ratio of untruncated densities is y²/2, maximal (72) at the bounds
        assert!((spec.constant() / 1.01 - 72.0).abs() < 0.05, "{}", spec.constant());
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureSpec::new(&[(1.0, 0.0, 0.0)]).is_err());
        assert!(MixtureSpec::new(&[(0.5, 0.0, 1.0)]).is_err());
        assert!(MixtureSpec::new(&[(-0.5, 0.0, 1.0), (1.5, 0.0, 1.0)]).is_err());
        assert!(MixtureSpec::new(&[]).is_err());
        let spec = MixtureSpec::for_target(&TargetDensity::bimodal()).unwrap();
        assert_eq!(spec.len(), 2);
        assert!(MixtureSpec::for_target(&TargetDensity::laplace()).is_none());
    }

    #[test]
    fn mixture_two_mode_fraction() {
        let spec = MixtureSpec::new(&[(0.5, -3.0, 1.0), (0.5, 1.0, 1.0)]).unwrap();
        let s = mixture_sample(&spec, 10_000, &mut ChaCha8Rng::seed_from_u64(9));
        let frac = s.iter().filter(|&&y| y < -1.0).count() as f64 / s.len() as f64;
        assert!((frac - 0.5).abs() < 0.015, "{frac}");
    }

    #[test]
    fn mh_always_accepts_uphill() {
        // Monotone increasing "density" on the visited range: every proposal to the right is accepted.
        let out = metropolis_chain(
            |y: &f64| (*y).exp(),
            |y: &f64, _rng: &mut ChaCha8Rng| y + 0.1,
            0.0,
            0,
            50,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(out.accepted, 50);
        assert_abs_diff_eq!(out.samples[49], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn mh_rejects_zero_density_start() {
        let t = TargetDensity::y2exp(1.0).unwrap();
        let grid = EvalGrid::new_1d(-12.0, 12.0, 257).unwrap();
        let spec = MhSpec::new(0.5, Some(0.0), 10).unwrap();
        assert!(metropolis_hastings(&t, &spec, &grid, 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(MhSpec::new(0.0, None, 0).is_err());
    }

    #[test]
    fn mh_chain_length_and_determinism() {
        let t = TargetDensity::y2exp(1.0).unwrap();
        let grid = EvalGrid::new_1d(-12.0, 12.0, 257).unwrap();
        let spec = MhSpec::new(0.5, None, 1000).unwrap();
        let a = metropolis_hastings(&t, &spec, &grid, 500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = metropolis_hastings(&t, &spec, &grid, 500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.samples.len(), 500);
        assert_eq!(a, b);
    }

    /// Three states on a ring with target (0.2, 0.3, 0.5) and a symmetric
    /// left/right proposal. Metropolis kernel: K[i][j] = ½ min(1, π_j/π_i) for
    /// j ≠ i, diagonal takes the remainder.
    #[test]
    fn mh_three_state_kernel() {
        let pi: [f64; 3] = [0.2, 0.3, 0.5];
        let mut kernel = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    kernel[i][j] = 0.5 * (pi[j] / pi[i]).min(1.0);
                }
            }
            kernel[i][i] = 1.0 - kernel[i].iter().sum::<f64>();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let out = metropolis_chain(
            |s: &usize| pi[*s],
            |s: &usize, rng: &mut ChaCha8Rng| {
                if open_uniform(rng) < 0.5 {
                    (s + 1) % 3
                } else {
                    (s + 2) % 3
                }
            },
            0usize,
            100,
            200_000,
            &mut rng,
        )
        .unwrap();
        let mut counts = [[0u64; 3]; 3];
        for w in out.samples.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for i in 0..3 {
            let row: u64 = counts[i].iter().sum();
            for j in 0..3 {
                let emp = counts[i][j] as f64 / row as f64;
                assert!((emp - kernel[i][j]).abs() < 0.02, "K[{i}][{j}] {emp} vs {}", kernel[i][j]);
            }
        }
    }

    proptest! {
        #[test]
        fn numeric_inverse_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let grid = EvalGrid::new_1d(-12.0, 12.0, 1024).unwrap();
            let inv = numeric_inverse_cdf(&TargetDensity::y2exp(1.0).unwrap(), &grid).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(inv.inverse(lo) <= inv.inverse(hi));
        }
    }
}
