//! Power allocation minimizing the average symbol error probability under
//! the average-power equality constraint.
//!
//! [`optimize`] alternates between exact threshold updates and closed-form
//! power updates until the power vector stops moving. [`brute_force`]
//! enumerates a grid of feasible constellations as an oracle, and
//! [`convexity_probe`] checks the convexity of the error probability in the
//! power vector numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{sep_at_optimal_boundaries, Boundaries};
use crate::error::{Error, Result};
use crate::model::{validate_constellation, Constellation, SystemParams};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const MAX_GRID_POINTS: f64 = 1e8;

/// Spacing used when a power update would break strict ordering, relative
/// to the power budget.
pub const MIN_SPACING: f64 = 1e-9;

/// Starting point of the alternating optimizer. Both schemes put the first
/// symbol at zero power and meet the budget with equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Equally spaced powers `2 p_bar (m - 1) / (M - 1)`.
    Ramp,
    /// Powers growing geometrically by `ratio` from the second symbol on.
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub powers: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub sep: f64,
    /// Some power had to be nudged up to keep strict ordering.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub constellation: Constellation,
    pub boundaries: Boundaries,
    pub sep: f64,
    /// Power updates performed. For [`brute_force`] this is the number of
    /// grid candidates evaluated.
    pub iterations: usize,
    /// Iterates starting from the initial constellation.
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

/// Linear ramp starting at zero whose mean is exactly the budget.
pub fn init_powers(params: &SystemParams) -> Result<Constellation> {
    init_with(params, InitScheme::Ramp)
}

pub fn init_with(params: &SystemParams, scheme: InitScheme) -> Result<Constellation> {
    params.validate()?;
    let m = params.m;
    let mut powers: Vec<f64> = match scheme {
        InitScheme::Ramp => (0..m)
            .map(|i| 2.0 * params.p_bar * i as f64 / (m - 1) as f64)
            .collect(),
        InitScheme::Geometric { ratio } => {
            if !(ratio > 1.0) || !ratio.is_finite() {
                return Err(Error::Domain(format!(
                    "geometric ratio must exceed 1, got {ratio}"
                )));
            }
            let raw: Vec<f64> = (0..m)
                .map(|i| {
                    if i == 0 {
                        0.0
                    } else {
                        ratio.powi(i as i32 - 1)
                    }
                })
                .collect();
            let scale = m as f64 * params.p_bar / raw.iter().sum::<f64>();
            raw.into_iter().map(|r| r * scale).collect()
        }
    };
    close_budget(&mut powers, params);
    validate_constellation(&powers, params)
}

/// Sets the last entry so the powers sum to exactly `M p_bar`.
fn close_budget(powers: &mut [f64], params: &SystemParams) {
    let (last, head) = powers.split_last_mut().expect("M >= 2");
    *last = params.m as f64 * params.p_bar - head.iter().sum::<f64>();
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerUpdate {
    pub constellation: Constellation,
    pub clamped: bool,
}

/// Power step for fixed thresholds: the first symbol goes to zero, each
/// interior symbol to the centre of its region (in transmit power), and the
/// last symbol takes the remaining budget. If the residual lands below some
/// interior power the vector is re-sorted.
pub fn update_powers(boundaries: &Boundaries, params: &SystemParams) -> Result<PowerUpdate> {
    params.validate()?;
    let m = params.m;
    let l = boundaries.lambdas();
    if l.len() + 1 != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            got: l.len() + 1,
        });
    }
    let delta = MIN_SPACING * params.p_bar;
    let mut powers = vec![0.0; m];
    let mut clamped = false;
    for i in 1..m - 1 {
        let centre = 0.5 * (l[i] + l[i - 1]) - params.sigma_z2;
        powers[i] = if centre > powers[i - 1] {
            centre
        } else {
            clamped = true;
            powers[i - 1] + delta
        };
    }
    close_budget(&mut powers, params);
    let residual = powers[m - 1];
    if !(residual > 0.0) {
        return Err(Error::InfeasibleBudget { residual });
    }
    if residual <= powers[m - 2] {
        // Interior powers are already sorted; slide the residual down.
        let pos = powers[..m - 1].partition_point(|&p| p < residual);
        powers[pos..].rotate_right(1);
        if powers[pos - 1] == residual || powers[pos + 1] == residual {
            return Err(Error::DegenerateSpacing {
                index: pos,
                rel_gap: 0.0,
            });
        }
    }
    let constellation = validate_constellation(&powers, params)?;
    Ok(PowerUpdate {
        constellation,
        clamped,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Alternating optimizer started from the linear ramp.
pub fn optimize(params: &SystemParams, epsilon: f64, max_iter: usize) -> Result<OptResult> {
    optimize_from(params, InitScheme::Ramp, epsilon, max_iter)
}

pub fn optimize_from(
    params: &SystemParams,
    init: InitScheme,
    epsilon: f64,
    max_iter: usize,
) -> Result<OptResult> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    if max_iter < 1 {
        return Err(Error::Domain("max_iter must be >= 1".into()));
    }
    let mut current = init_with(params, init)?;
    let (mut boundaries, mut sep) = sep_at_optimal_boundaries(&current, params)?;
    let mut trace = vec![IterationRecord {
        powers: current.powers().to_vec(),
        lambdas: boundaries.lambdas().to_vec(),
        sep,
        clamped: false,
    }];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let update = update_powers(&boundaries, params)?;
        iterations += 1;
        let step = squared_distance(current.powers(), update.constellation.powers());
        current = update.constellation;
        (boundaries, sep) = sep_at_optimal_boundaries(&current, params)?;
        trace.push(IterationRecord {
            powers: current.powers().to_vec(),
            lambdas: boundaries.lambdas().to_vec(),
            sep,
            clamped: update.clamped,
        });
        if step < epsilon {
            converged = true;
            break;
        }
    }
    Ok(OptResult {
        constellation: current,
        boundaries,
        sep,
        iterations,
        trace,
        converged,
    })
}

/// Upper bound on the number of candidates visited by [`brute_force`]:
/// `C(n, M - 2)` where `n` grid steps fit below `M p_bar / 2`.
fn grid_size_bound(m: usize, grid_step: f64) -> f64 {
    let n = (m as f64 / (2.0 * grid_step)).floor();
    let k = m - 2;
    (0..k)
        .fold(1.0, |acc, j| acc * (n - j as f64) / (j + 1) as f64)
        .max(1.0)
}

/// Exhaustive search over constellations with `p_1 = 0`, interior powers on
/// a grid of `grid_step * p_bar`, and the last power closing the budget.
/// Ties go to the lexicographically smallest power vector.
pub fn brute_force(params: &SystemParams, grid_step: f64) -> Result<OptResult> {
    params.validate()?;
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::Domain(format!(
            "grid step must be > 0, got {grid_step}"
        )));
    }
    let points = grid_size_bound(params.m, grid_step);
    if points > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge {
            points,
            limit: MAX_GRID_POINTS,
        });
    }
    let m = params.m;
    let budget = m as f64 * params.p_bar;
    let unit = grid_step * params.p_bar;

    if m == 2 {
        let c = validate_constellation(&[0.0, budget], params)?;
        let (boundaries, sep) = sep_at_optimal_boundaries(&c, params)?;
        return Ok(single_candidate(c, boundaries, sep, 1));
    }

    // Split the search on the first interior grid index.
    let first_max = (budget / (2.0 * unit)).ceil() as usize;
    let partials: Vec<(Option<Candidate>, usize)> = (1..=first_max)
        .into_par_iter()
        .map(|first| {
            let mut search = GridSearch {
                params,
                unit,
                budget,
                best: None,
                evaluated: 0,
            };
            let mut idx = vec![first];
            search.descend(&mut idx);
            (search.best, search.evaluated)
        })
        .collect();

    let mut best: Option<Candidate> = None;
    let mut evaluated = 0;
    for (cand, count) in partials {
        evaluated += count;
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.beats(b)) {
                best = Some(c);
            }
        }
    }
    let best =
        best.ok_or_else(|| Error::Domain("no feasible grid point; grid step too coarse".into()))?;
    Ok(single_candidate(
        best.constellation,
        best.boundaries,
        best.sep,
        evaluated,
    ))
}

fn single_candidate(
    constellation: Constellation,
    boundaries: Boundaries,
    sep: f64,
    evaluated: usize,
) -> OptResult {
    OptResult {
        trace: vec![IterationRecord {
            powers: constellation.powers().to_vec(),
            lambdas: boundaries.lambdas().to_vec(),
            sep,
            clamped: false,
        }],
        constellation,
        boundaries,
        sep,
        iterations: evaluated,
        converged: true,
    }
}

struct Candidate {
    grid: Vec<usize>,
    constellation: Constellation,
    boundaries: Boundaries,
    sep: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.sep < other.sep || (self.sep == other.sep && self.grid < other.grid)
    }
}

struct GridSearch<'a> {
    params: &'a SystemParams,
    unit: f64,
    budget: f64,
    best: Option<Candidate>,
    evaluated: usize,
}

impl GridSearch<'_> {
    fn descend(&mut self, idx: &mut Vec<usize>) {
        let interior = self.params.m - 2;
        let used: f64 = idx.iter().map(|&i| i as f64 * self.unit).sum();
        let last = *idx.last().unwrap();
        if idx.len() == interior {
            let top = self.budget - used;
            if top > last as f64 * self.unit {
                self.evaluate(idx, top);
            }
            return;
        }
        // Every remaining power is larger than the next one, so
        // used + (remaining + 1) * next must stay below the budget.
        let remaining = (interior - idx.len()) as f64;
        let mut next = last + 1;
        while used + (remaining + 1.0) * next as f64 * self.unit < self.budget {
            idx.push(next);
            self.descend(idx);
            idx.pop();
            next += 1;
        }
    }

    fn evaluate(&mut self, idx: &[usize], top: f64) {
        let mut powers = Vec::with_capacity(self.params.m);
        powers.push(0.0);
        powers.extend(idx.iter().map(|&i| i as f64 * self.unit));
        powers.push(top);
        let Ok(c) = validate_constellation(&powers, self.params) else {
            return;
        };
        let Ok((boundaries, sep)) = sep_at_optimal_boundaries(&c, self.params) else {
            return;
        };
        self.evaluated += 1;
        let cand = Candidate {
            grid: idx.to_vec(),
            constellation: c,
            boundaries,
            sep,
        };
        if self.best.as_ref().is_none_or(|b| cand.beats(b)) {
            self.best = Some(cand);
        }
    }
}

/// Where the convexity probe draws its power vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbeRegion {
    /// Uniform over all strictly ordered nonnegative vectors with mean
    /// exactly `p_bar`.
    Feasible,
    /// Mean-preserving perturbations of `center`, each coordinate moved by a
    /// uniform amount of at most `radius * p_bar`, kept only when ordered.
    Neighborhood { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub tolerance: f64,
}

pub const CONVEXITY_TOLERANCE: f64 = 1e-10;

/// `P_e(t p + (1 - t) q) - t P_e(p) - (1 - t) P_e(q)`, each evaluated at its
/// own optimal thresholds. Positive values contradict convexity.
pub fn convexity_gap(
    p: &Constellation,
    q: &Constellation,
    t: f64,
    params: &SystemParams,
) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mix: Vec<f64> = p
        .powers()
        .iter()
        .zip(q.powers())
        .map(|(a, b)| t * a + (1.0 - t) * b)
        .collect();
    let mix = validate_constellation(&mix, params)?;
    let (_, pe_p) = sep_at_optimal_boundaries(p, params)?;
    let (_, pe_q) = sep_at_optimal_boundaries(q, params)?;
    let (_, pe_mix) = sep_at_optimal_boundaries(&mix, params)?;
    Ok(pe_mix - (t * pe_p + (1.0 - t) * pe_q))
}

fn draw_feasible(rng: &mut ChaCha8Rng, params: &SystemParams) -> Vec<f64> {
    // Uniform point of the simplex of increments, mapped linearly onto the
    // ordered set: p_k = sum_{j <= k} g_j and sum_k p_k = sum_j (M - j) g_j.
    let m = params.m;
    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let budget = m as f64 * params.p_bar;
    let mut acc = 0.0;
    e.iter()
        .enumerate()
        .map(|(j, x)| {
            acc += budget * x / total / (m - j) as f64;
            acc
        })
        .collect()
}

fn draw_near(
    rng: &mut ChaCha8Rng,
    center: &[f64],
    radius: f64,
    params: &SystemParams,
) -> Option<Vec<f64>> {
    let m = center.len();
    let shifts: Vec<f64> = (0..m)
        .map(|_| rng.gen_range(-1.0..=1.0) * radius * params.p_bar)
        .collect();
    let mean_shift = shifts.iter().sum::<f64>() / m as f64;
    let mut v: Vec<f64> = center
        .iter()
        .zip(&shifts)
        .map(|(c, s)| c + s - mean_shift)
        .collect();
    close_budget(&mut v, params);
    let ordered = v[0] >= 0.0 && v.windows(2).all(|w| w[0] < w[1]);
    ordered.then_some(v)
}

/// Numerical convexity check of the error probability (at optimal
/// thresholds) as a function of the power vector.
pub fn convexity_probe(
    params: &SystemParams,
    trials: usize,
    seed: u64,
    region: &ProbeRegion,
) -> Result<ProbeReport> {
    params.validate()?;
    if trials < 1 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    if let ProbeRegion::Neighborhood { center, radius } = region {
        validate_constellation(center, params)?;
        if !(*radius > 0.0) {
            return Err(Error::Domain(format!("radius must be > 0, got {radius}")));
        }
    }
    // Draws are sequential so the sample is independent of thread count;
    // evaluation is parallel.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<Constellation> {
        loop {
            let v = match region {
                ProbeRegion::Feasible => Some(draw_feasible(rng, params)),
                ProbeRegion::Neighborhood { center, radius } => {
                    draw_near(rng, center, *radius, params)
                }
            };
            if let Some(v) = v {
                if let Ok(c) = validate_constellation(&v, params) {
                    return Ok(c);
                }
            }
        }
    };
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = draw(&mut rng)?;
        let q = draw(&mut rng)?;
        let t: f64 = rng.gen();
        cases.push((p, q, t));
    }
    let gaps = cases
        .par_iter()
        .map(|(p, q, t)| convexity_gap(p, q, *t, params))
        .collect::<Result<Vec<f64>>>()?;
    let violations = gaps.iter().filter(|&&g| g > CONVEXITY_TOLERANCE).count();
    let max_violation = gaps.iter().copied().fold(0.0, f64::max);
    Ok(ProbeReport {
        trials,
        violations,
        max_violation,
        tolerance: CONVEXITY_TOLERANCE,
    })
}
