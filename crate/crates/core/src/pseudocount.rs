//! Pseudo-counts derived from density models and the closed-form relations
//! between ground pseudo-counts, abstract pseudo-counts and empirical counts.

use crate::abstraction::Aggregation;
use crate::density::{lifted_probe, DensityModel, DensityProbe};
use crate::error::{Error, Result};

/// Value reported for a pseudo-count whose defining denominator vanishes.
pub const SATURATION_CAP: f64 = 1e12;

/// Denominators at or below this are treated as zero.
pub const SATURATION_EPS: f64 = 1e-15;

/// A pseudo-count and whether it hit [`SATURATION_CAP`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoCount {
    pub value: f64,
    pub saturated: bool,
}

impl PseudoCount {
    fn finite(value: f64) -> Self {
        Self {
            value,
            saturated: false,
        }
    }

    fn saturated() -> Self {
        Self {
            value: SATURATION_CAP,
            saturated: true,
        }
    }
}

fn check_increment(rho: f64, rho_prime: f64) -> Result<f64> {
    let step = rho_prime - rho;
    if step < -SATURATION_EPS {
        return Err(Error::NotLearningPositive { rho, rho_prime });
    }
    Ok(step)
}

/// `N = rho (1 - rho') / (rho' - rho)`.
///
/// Count-backed probes are evaluated on their integer form
/// `k (G (n + 1) - k - 1) / (G (n - k))`. With `G = 1` the factor `n - k`
/// cancels and the value is `k` exactly, including `k = n`.
pub fn pseudo_count(probe: &DensityProbe) -> Result<PseudoCount> {
    if let Some(c) = probe.counts {
        if c.class_size == 1 {
            return Ok(PseudoCount::finite(c.hits as f64));
        }
        let (k, g, n) = (c.hits as u128, c.class_size as u128, c.total as u128);
        if k >= n {
            return Ok(PseudoCount::saturated());
        }
        let numerator = k * (g * (n + 1) - k - 1);
        let denominator = g * (n - k);
        return Ok(PseudoCount::finite(numerator as f64 / denominator as f64));
    }
    let step = check_increment(probe.rho, probe.rho_prime)?;
    if step <= SATURATION_EPS {
        return Ok(PseudoCount::saturated());
    }
    Ok(PseudoCount::finite(
        (probe.rho * (1.0 - probe.rho_prime) / step).max(0.0),
    ))
}

/// Pseudo-count total `n = (1 - rho') / (rho' - rho)`.
pub fn pseudo_count_total(probe: &DensityProbe) -> Result<PseudoCount> {
    if let Some(c) = probe.counts {
        if c.class_size == 1 {
            return Ok(PseudoCount::finite(c.total as f64));
        }
        let (k, g, n) = (c.hits as u128, c.class_size as u128, c.total as u128);
        if k >= n {
            return Ok(PseudoCount::saturated());
        }
        // N / rho with rho = k / (G n).
        let numerator = n * (g * (n + 1) - k - 1);
        return Ok(PseudoCount::finite(numerator as f64 / (n - k) as f64));
    }
    let step = check_increment(probe.rho, probe.rho_prime)?;
    if step <= SATURATION_EPS {
        return Ok(PseudoCount::saturated());
    }
    Ok(PseudoCount::finite((1.0 - probe.rho_prime) / step))
}

/// Pseudo-count that credits a visit to every member of the visited state's
/// aggregation: `2 rho t' / (rho'' t - rho t')` with `t = rho' - rho` and
/// `t' = rho'' - rho'`.
///
/// For count-backed probes `rho_j = (k + j) / (G (n + j))` the common factor
/// `(n - k) / (G^2 n (n + 1) (n + 2))` cancels and the value is `k`; the
/// cancelled form is used even at `k = n`.
pub fn corrected_pseudo_count(probe: &DensityProbe) -> Result<PseudoCount> {
    if let Some(c) = probe.counts {
        return Ok(PseudoCount::finite(c.hits as f64));
    }
    let first = check_increment(probe.rho, probe.rho_prime)?;
    let second = check_increment(probe.rho_prime, probe.rho_second)?;
    let denominator = probe.rho_second * first - probe.rho * second;
    if denominator <= SATURATION_EPS {
        return Ok(PseudoCount::saturated());
    }
    Ok(PseudoCount::finite((2.0 * probe.rho * second / denominator).max(0.0)))
}

/// Pseudo-count of the lifted density at `(abstract_state, action)`.
pub fn abstract_pseudo_count<M: DensityModel>(
    model: &M,
    agg: &Aggregation,
    abstract_state: usize,
    action: usize,
) -> Result<PseudoCount> {
    pseudo_count(&lifted_probe(model, agg, abstract_state, action)?)
}

/// Every pseudo-count quantity for one ground pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoCountReport {
    pub n_hat: f64,
    pub n_tilde: f64,
    pub n_hat_abstract: f64,
    pub n_hat_total: f64,
    pub saturated: bool,
}

pub fn pseudo_count_report<M: DensityModel>(
    model: &M,
    agg: &Aggregation,
    state: usize,
    action: usize,
) -> Result<PseudoCountReport> {
    let probe = model.probe(state, action)?;
    let n_hat = pseudo_count(&probe)?;
    let n_tilde = corrected_pseudo_count(&probe)?;
    let n_total = pseudo_count_total(&probe)?;
    let n_abstract = abstract_pseudo_count(model, agg, agg.phi(state), action)?;
    Ok(PseudoCountReport {
        n_hat: n_hat.value,
        n_tilde: n_tilde.value,
        n_hat_abstract: n_abstract.value,
        n_hat_total: n_total.value,
        saturated: n_hat.saturated || n_tilde.saturated || n_total.saturated || n_abstract.saturated,
    })
}

/// Ground pseudo-count under an exact induced abstraction:
/// `N_A (1 + (|G| - 1)(N_A + 1) / (|G| (n_A - N_A)))`.
pub fn exact_abstraction_identity(g_size: usize, n_hat_abstract: f64, n_hat_total: f64) -> Result<f64> {
    if g_size == 0 {
        return Err(Error::Domain("aggregation class cannot be empty".into()));
    }
    if n_hat_abstract < 0.0 {
        return Err(Error::Domain(format!("negative abstract count {n_hat_abstract}")));
    }
    if n_hat_abstract >= n_hat_total {
        return Err(Error::Divergence(format!(
            "abstract count {n_hat_abstract} reaches the total {n_hat_total}"
        )));
    }
    let g = g_size as f64;
    Ok(n_hat_abstract * (1.0 + (g - 1.0) * (n_hat_abstract + 1.0) / (g * (n_hat_total - n_hat_abstract))))
}

/// Bounds `N_A f <= N_hat <= N_A g` on a ground pseudo-count when
/// co-aggregated states receive densities and density increments within a
/// factor `1 +- epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    pub low: f64,
    /// `+inf` when the lower bound on the density increment is not positive.
    pub high: f64,
    pub diverged: bool,
}

pub fn count_sandwich_bounds(
    epsilon: f64,
    g_size: usize,
    n_hat_abstract: f64,
    n_hat_total: f64,
) -> Result<SandwichBounds> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} must lie in [0, 1)")));
    }
    if g_size == 0 {
        return Err(Error::Domain("aggregation class cannot be empty".into()));
    }
    let (na, nt) = (n_hat_abstract, n_hat_total);
    if !(na >= 0.0 && na < nt) {
        return Err(Error::Divergence(format!("abstract count {na} must lie in [0, {nt})")));
    }
    let g = g_size as f64;
    let alpha3 = ((1.0 - epsilon) / (1.0 + epsilon)).powi(3);
    let up3 = (1.0 + epsilon).powi(3);
    let down3 = (1.0 - epsilon).powi(3);

    // Exceeds G (nt - na) > 0 because 1 / alpha^3 >= 1.
    let low_den = g * (nt / alpha3 - na + (1.0 / alpha3 - 1.0) * nt * na);
    let low = na * (g * (nt + 1.0) - up3 * (na + 1.0)) / low_den;
    let high_den = g * (alpha3 * nt - na - (1.0 - alpha3) * nt * na);
    if high_den <= 0.0 {
        return Ok(SandwichBounds {
            low,
            high: f64::INFINITY,
            diverged: true,
        });
    }
    let high = na * (g * (nt + 1.0) - down3 * (na + 1.0)) / high_den;
    Ok(SandwichBounds {
        low,
        high,
        diverged: false,
    })
}

/// Multiplicative cap `1 + 2 / (k - 1)` on `N / N_A` when the abstract
/// pseudo-count stays below `n_A / k` (and `k <= n_A`).
pub fn concentration_cap(k: f64) -> Result<f64> {
    if k.is_nan() || k <= 1.0 {
        return Err(Error::Domain(format!("concentration factor {k} must exceed 1")));
    }
    Ok(1.0 + 2.0 / (k - 1.0))
}

/// Extremal ratios between a lifted density and the abstract empirical
/// density over a history.
///
/// `(a, b)` bound the level ratio `rho_A / mu_A`; `(c, d)` bound the
/// increment ratio `(mu_A' - mu_A) / (rho_A' - rho_A)`. With this orientation
/// `a^2 c N_A <= N_hat_A <= b^2 d N_A` holds whenever the ratios hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioConstants {
    pub a: f64,
    pub b: f64,
    /// `None` when no pair had a usable increment.
    pub increment: Option<(f64, f64)>,
    pub level_samples: usize,
    pub increment_samples: usize,
}

impl RatioConstants {
    pub fn c(&self) -> Option<f64> {
        self.increment.map(|(c, _)| c)
    }

    pub fn d(&self) -> Option<f64> {
        self.increment.map(|(_, d)| d)
    }
}

fn check_history<M: DensityModel>(history: &[(usize, usize)], model: &M, agg: &Aggregation) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Domain("history is empty".into()));
    }
    if agg.num_ground() != model.num_states() {
        return Err(Error::SizeMismatch(format!(
            "aggregation covers {} states, density has {}",
            agg.num_ground(),
            model.num_states()
        )));
    }
    for &(s, a) in history {
        if s >= model.num_states() || a >= model.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "history pair",
                index: s.max(a),
                size: model.num_states().max(model.num_actions()),
            });
        }
    }
    Ok(())
}

/// Trains `model` along `history` and records, at every prefix and for every
/// visited abstract pair, the level and increment ratios of the lifted density
/// against the abstract empirical density.
///
/// Level ratios also include `(1 - rho_A') / (1 - mu_A')`, the ratio of the
/// remaining mass after the hypothetical update. Unvisited pairs contribute
/// nothing.
pub fn estimate_ratio_constants<M: DensityModel>(
    history: &[(usize, usize)],
    mut model: M,
    agg: &Aggregation,
) -> Result<RatioConstants> {
    check_history(history, &model, agg)?;
    let na = model.num_actions();
    let mut counts = vec![0u64; agg.num_abstract() * na];
    let (mut a_min, mut b_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut c_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut level_samples, mut increment_samples) = (0, 0);
    for (t, &(s, a)) in history.iter().enumerate() {
        model.update(s, a);
        counts[agg.phi(s) * na + a] += 1;
        let n = (t + 1) as f64;
        for k in 0..agg.num_abstract() {
            for act in 0..na {
                let hits = counts[k * na + act];
                if hits == 0 {
                    continue;
                }
                let probe = lifted_probe(&model, agg, k, act)?;
                let mu = hits as f64 / n;
                let mu_prime = (hits + 1) as f64 / (n + 1.0);
                let mut level = |r: f64| {
                    a_min = a_min.min(r);
                    b_max = b_max.max(r);
                    level_samples += 1;
                };
                level(probe.rho / mu);
                if mu_prime < 1.0 {
                    level((1.0 - probe.rho_prime) / (1.0 - mu_prime));
                }
                let d_mu = mu_prime - mu;
                let d_rho = probe.rho_prime - probe.rho;
                if d_mu > 0.0 && d_rho > SATURATION_EPS {
                    let r = d_mu / d_rho;
                    c_min = c_min.min(r);
                    d_max = d_max.max(r);
                    increment_samples += 1;
                }
            }
        }
    }
    Ok(RatioConstants {
        a: a_min,
        b: b_max,
        increment: (increment_samples > 0).then_some((c_min, d_max)),
        level_samples,
        increment_samples,
    })
}

/// `a^2 c N_A <= N_hat_A <= b^2 d N_A`, with `1e-9` relative slack.
pub fn theorem2_check(a: f64, b: f64, c: f64, d: f64, n_hat: f64, n_emp: u64) -> bool {
    let n = n_emp as f64;
    let low = a * a * c * n;
    let high = b * b * d * n;
    let slack = 1e-9 * n.max(1.0);
    n_hat >= low - slack && n_hat <= high + slack
}

/// Location of the worst ratio violation found by
/// [`verify_induced_abstraction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Number of observations in the prefix.
    pub prefix: usize,
    pub state: usize,
    pub other: usize,
    pub action: usize,
    pub ratio: f64,
}

/// Outcome of checking the induced-abstraction ratio conditions on a history.
///
/// Passing only certifies the supplied prefixes; it is a necessary condition,
/// never a proof over all histories.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedAbstractionReport {
    pub passed: bool,
    /// Largest distance of a ratio outside `[1 - eps, 1 + eps]`.
    pub worst_violation: f64,
    pub worst: Option<Violation>,
    pub checks: usize,
    /// Comparisons skipped because a denominator was zero.
    pub skipped: usize,
}

/// Checks, at every prefix of `history`, every co-aggregated pair of states and
/// every action, that `rho` and `rho' - rho` agree within a factor `1 +- eps`.
pub fn verify_induced_abstraction<M: DensityModel>(
    history: &[(usize, usize)],
    mut model: M,
    agg: &Aggregation,
    epsilon: f64,
) -> Result<InducedAbstractionReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} must lie in [0, 1)")));
    }
    check_history(history, &model, agg)?;
    let na = model.num_actions();
    let mut report = InducedAbstractionReport {
        passed: true,
        worst_violation: 0.0,
        worst: None,
        checks: 0,
        skipped: 0,
    };
    let (lo, hi) = (1.0 - epsilon, 1.0 + epsilon);
    for (t, &(s, a)) in history.iter().enumerate() {
        model.update(s, a);
        let prefix = t + 1;
        for k in 0..agg.num_abstract() {
            let class = agg.class(k);
            if class.len() < 2 {
                continue;
            }
            for act in 0..na {
                let probes = class.iter().map(|&g| model.probe(g, act)).collect::<Result<Vec<_>>>()?;
                for (i, pi) in probes.iter().enumerate() {
                    for (j, pj) in probes.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        let ratios = [(pi.rho, pj.rho), (pi.rho_prime - pi.rho, pj.rho_prime - pj.rho)];
                        for (num, den) in ratios {
                            if den <= 0.0 {
                                report.skipped += 1;
                                continue;
                            }
                            report.checks += 1;
                            let ratio = num / den;
                            let excess = (ratio - hi).max(lo - ratio).max(0.0);
                            if excess > 0.0 {
                                report.passed = false;
                            }
                            if excess > report.worst_violation {
                                report.worst_violation = excess;
                                report.worst = Some(Violation {
                                    prefix,
                                    state: class[i],
                                    other: class[j],
                                    action: act,
                                    ratio,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}
