//! EXIT-chart analysis under the Gaussian approximation.
//!
//! All messages are modelled as symmetric Gaussian LLRs, i.e. `N(s^2/2, s^2)`
//! for some `s >= 0`, and tracked through their mutual information with the
//! code bits, `J(s)`, in bits. Per user the recursion tracks four quantities:
//! state-to-variable (`i_sv`), variable-to-check (`i_vc`), check-to-variable
//! (`i_cv`) and variable-to-state (`i_vs`).
//!
//! The exact [`j_function`] uses 200-node Gauss-Hermite quadrature and
//! [`j_inverse`] bisects it. The chart functions run on a shared table of `J`
//! and `J'` with cubic Hermite interpolation, built once on first use.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::channel::ChannelParams;
use crate::degree::{CodeEnsemble, DegreeDistribution};
use crate::quadrature::{gauss_hermite, GaussHermite};
use crate::{Error, Real, Result, User};

const LN_2: f64 = std::f64::consts::LN_2;
const J_ORDER: usize = 200;
const F_ORDER: usize = 60;

/// Upper end of the tabulated `s` range. `1 - J(s)` is far below `f64`
/// resolution well before this point.
pub const SIGMA_MAX: f64 = 40.0;
const TABLE_INTERVALS: usize = 4096;

pub const DEFAULT_MAX_ITERS: usize = 2000;
pub const DEFAULT_THRESHOLD: f64 = 1.0 - 1e-4;

fn gh_j() -> &'static GaussHermite {
    static GH: OnceLock<&'static GaussHermite> = OnceLock::new();
    GH.get_or_init(|| gauss_hermite(J_ORDER))
}

fn gh_f() -> &'static GaussHermite {
    static GH: OnceLock<&'static GaussHermite> = OnceLock::new();
    GH.get_or_init(|| gauss_hermite(F_ORDER))
}

/// `J(s) = 1 - E[log2(1 + e^{-L})]`, `L ~ N(s^2/2, s^2)`.
pub fn j_function<T: Real>(sigma: T) -> Result<T> {
    if !(sigma >= T::zero()) {
        return Err(Error::Domain(format!("J needs sigma >= 0, got {sigma}")));
    }
    Ok(j_exact(sigma))
}

fn j_exact<T: Real>(sigma: T) -> T {
    if sigma == T::zero() {
        return T::zero();
    }
    let mean = sigma * sigma / T::lit(2.0);
    let loss = gh_j().expect_normal(mean, sigma, |l: T| (-l).softplus());
    T::one() - loss / T::lit(LN_2)
}

/// `dJ/ds`, by differentiating under the integral.
fn j_derivative(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let gh = gh_j();
    let scale = sigma * std::f64::consts::SQRT_2;
    let d: f64 = gh.integrate(|z: f64| {
        let l = sigma * sigma / 2.0 + scale * z;
        // d/ds log(1+e^{-L}) = -(s + sqrt2 z) * sigmoid(-L)
        let sig = 1.0 / (1.0 + l.exp());
        (sigma + std::f64::consts::SQRT_2 * z) * sig
    });
    d / LN_2
}

/// Inverse of [`j_function`] by bisection to `1e-10` in `s` (or the scalar
/// type's resolution, if coarser).
pub fn j_inverse<T: Real>(i: T) -> Result<T> {
    if !(i >= T::zero()) {
        return Err(Error::Domain(format!("J inverse needs i >= 0, got {i}")));
    }
    if i >= T::one() {
        return Err(Error::Domain(format!("J inverse is unbounded at i = {i}")));
    }
    if i == T::zero() {
        return Ok(T::zero());
    }
    let mut hi = T::one();
    while j_exact(hi) < i {
        hi = hi * T::lit(2.0);
        if hi > T::lit(1e3) {
            return Err(Error::Domain(format!(
                "J inverse of {i} is beyond numerical resolution"
            )));
        }
    }
    let mut lo = T::zero();
    let tol = T::lit(1e-10);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        if j_exact(mid) < i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// Tabulated `J` with cubic Hermite interpolation and its inverse.
#[derive(Debug)]
pub struct JTable {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl JTable {
    pub fn build(intervals: usize, sigma_max: f64) -> Self {
        let step = sigma_max / intervals as f64;
        let grid = (0..=intervals).map(|k| k as f64 * step);
        let values: Vec<f64> = grid.clone().map(j_exact).collect();
        let slopes: Vec<f64> = grid.map(j_derivative).collect();
        // Quadrature noise must not break monotonicity at the saturated end.
        let mut values = values;
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        Self {
            step,
            values,
            slopes,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    #[inline]
    fn hermite(&self, k: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    #[inline]
    fn hermite_slope(&self, k: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.step
    }

    /// `J(s)`, saturating at the top of the table.
    #[inline]
    pub fn j(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        let x = sigma / self.step;
        let k = x as usize;
        if k >= self.values.len() - 1 {
            return self.values[self.values.len() - 1];
        }
        self.hermite(k, x - k as f64).clamp(0.0, 1.0)
    }

    /// `J^{-1}(i)`, clamped to `[0, sigma_max]`; never fails.
    pub fn inverse(&self, i: f64) -> f64 {
        if !(i > 0.0) {
            return 0.0;
        }
        let last = self.values.len() - 1;
        if i >= self.values[last] {
            return self.sigma_max();
        }
        // first k with values[k+1] > i
        let k = self
            .values
            .partition_point(|&v| v <= i)
            .saturating_sub(1)
            .min(last - 1);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = if self.values[k + 1] > self.values[k] {
            ((i - self.values[k]) / (self.values[k + 1] - self.values[k])).clamp(0.0, 1.0)
        } else {
            0.5
        };
        for _ in 0..60 {
            let f = self.hermite(k, t) - i;
            if f.abs() <= 1e-16 {
                break;
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = self.hermite_slope(k, t) * self.step;
            let newton = t - f / d;
            t = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        (k as f64 + t) * self.step
    }
}

/// Process-wide table, built on first use. Concurrent first callers block
/// until the single initialisation finishes.
pub fn j_table() -> &'static JTable {
    static TABLE: OnceLock<JTable> = OnceLock::new();
    TABLE.get_or_init(|| JTable::build(TABLE_INTERVALS, SIGMA_MAX))
}

/// Which neighbouring bit of the other user a state node sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Mean of the state-to-variable message towards `target` when the other
/// user's variable-to-state message is symmetric Gaussian with mean `mu`,
/// conditioned on the other user's bit being `+1` (`Plus`) or `-1` (`Minus`)
/// and on the target bit being `+1`.
///
/// Negative `mu` is treated as zero. The result can be negative on the
/// `Minus` branch when the other user is the stronger one.
pub fn f_mean<T: Real>(mu: T, params: &ChannelParams<T>, target: User, branch: Branch) -> T {
    let mu = mu.max(T::zero());
    let two = T::lit(2.0);
    let pt = params.power(target);
    let po = params.power(target.other());
    let cross = T::lit(4.0) * (pt * po).sqrt();
    let scale = (T::lit(4.0) * mu + T::lit(8.0) * po).sqrt();
    let shift = mu + two * po;
    let gh = gh_f();
    match branch {
        Branch::Plus => {
            let integral = gh.integrate(|z: T| {
                let x = scale * z + shift;
                x.softplus() - (-x - cross).softplus()
            });
            integral - mu + two * (pt - po)
        }
        Branch::Minus => {
            let integral = gh.integrate(|z: T| {
                let x = scale * z + shift;
                (-x).softplus() - (x - cross).softplus()
            });
            let d = pt.sqrt() - po.sqrt();
            integral + mu + two * d * d
        }
    }
}

/// `I^i_VC`: output of a degree-`degree` variable node.
#[inline]
pub fn vc_degree_term(degree: u32, i_cv: f64, i_sv: f64) -> f64 {
    let t = j_table();
    let scv = t.inverse(i_cv);
    let ssv = t.inverse(i_sv);
    t.j((((degree - 1) as f64) * scv * scv + ssv * ssv).sqrt())
}

/// `sum_i lambda_i J(sqrt((i-1) J^{-1}(i_cv)^2 + J^{-1}(i_sv)^2))`.
pub fn exit_vc(lambda: &DegreeDistribution<f64>, i_cv: f64, i_sv: f64) -> f64 {
    let t = j_table();
    let scv2 = t.inverse(i_cv).powi(2);
    let ssv2 = t.inverse(i_sv).powi(2);
    lambda
        .iter()
        .map(|(d, w)| w * t.j((((d - 1) as f64) * scv2 + ssv2).sqrt()))
        .sum()
}

/// `sum_i L_i J(sqrt(i) J^{-1}(i_cv))`, averaged over the node perspective.
pub fn exit_vs(lambda: &DegreeDistribution<f64>, i_cv: f64) -> f64 {
    let node = lambda.edge_to_node().expect("edge-perspective lambda");
    let t = j_table();
    let s = t.inverse(i_cv);
    node.iter()
        .map(|(d, w)| w * t.j((d as f64).sqrt() * s))
        .sum()
}

/// Check-node chart for `rho(x) = x^{dc-1}` by duality:
/// `1 - J(sqrt(dc-1) J^{-1}(1 - i_vc))`.
pub fn exit_cv(dc: u32, i_vc: f64) -> f64 {
    let t = j_table();
    if i_vc >= 1.0 {
        return 1.0;
    }
    1.0 - t.j(((dc.max(1) - 1) as f64).sqrt() * t.inverse(1.0 - i_vc))
}

/// Approximate inverse of [`exit_cv`]: `1 - J(J^{-1}(1 - i_cv) / sqrt(dc-1))`.
pub fn exit_cv_inverse(dc: u32, i_cv: f64) -> f64 {
    let t = j_table();
    if i_cv <= 0.0 {
        return 0.0;
    }
    if i_cv >= 1.0 {
        return 1.0;
    }
    1.0 - t.j(t.inverse(1.0 - i_cv) / ((dc.max(2) - 1) as f64).sqrt())
}

/// Mutual information of the state-to-variable messages towards `target`
/// given the other user's variable-to-state information: the average of the
/// two branch Gaussians with means `F_+` and `F_-`. A negative branch mean
/// contributes no information.
///
/// Served from a per-channel table (see [`SvTable`]); [`exit_sv_exact`]
/// evaluates the quadrature directly.
pub fn exit_sv(params: &ChannelParams<f64>, target: User, i_vs_other: f64) -> f64 {
    sv_table(params, target).eval(i_vs_other)
}

pub fn exit_sv_exact(params: &ChannelParams<f64>, target: User, i_vs_other: f64) -> f64 {
    sv_from_sigma(params, target, j_table().inverse(i_vs_other))
}

fn sv_from_sigma(params: &ChannelParams<f64>, target: User, sigma: f64) -> f64 {
    let mu = 0.5 * sigma * sigma;
    sv_from_means(
        f_mean(mu, params, target, Branch::Plus),
        f_mean(mu, params, target, Branch::Minus),
    )
}

#[inline]
fn sv_from_means(plus: f64, minus: f64) -> f64 {
    let t = j_table();
    0.5 * t.j((2.0 * plus.max(0.0)).sqrt()) + 0.5 * t.j((2.0 * minus.max(0.0)).sqrt())
}

/// Both branch means sampled on a uniform grid in `s = J^{-1}(i_vs_other)`
/// and read back with four-point Lagrange interpolation; the clamp and `J`
/// are applied after interpolation.
#[derive(Debug)]
pub struct SvTable {
    step: f64,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl SvTable {
    pub fn build(params: &ChannelParams<f64>, target: User) -> Self {
        let step = SIGMA_MAX / TABLE_INTERVALS as f64;
        let mean = |k: usize, b| f_mean(0.5 * (k as f64 * step).powi(2), params, target, b);
        let plus = (0..=TABLE_INTERVALS)
            .map(|k| mean(k, Branch::Plus))
            .collect();
        let minus = (0..=TABLE_INTERVALS)
            .map(|k| mean(k, Branch::Minus))
            .collect();
        Self { step, plus, minus }
    }

    #[inline]
    pub fn eval(&self, i_vs_other: f64) -> f64 {
        self.at_sigma(j_table().inverse(i_vs_other))
    }

    #[inline]
    pub fn at_sigma(&self, sigma: f64) -> f64 {
        let last = self.plus.len() - 1;
        let x = (sigma / self.step).clamp(0.0, last as f64);
        let k = (x as usize).clamp(1, last - 2);
        let t = x - k as f64;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let interp = |v: &[f64]| w[0] * v[k - 1] + w[1] * v[k] + w[2] * v[k + 1] + w[3] * v[k + 2];
        sv_from_means(interp(&self.plus), interp(&self.minus))
    }
}

/// Shared [`SvTable`] for one channel and target user, built on first use.
pub fn sv_table(params: &ChannelParams<f64>, target: User) -> &'static SvTable {
    type Key = (u64, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, &'static SvTable>>> = OnceLock::new();
    let key = (params.p1().to_bits(), params.p2().to_bits(), target.index());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return t;
    }
    // build outside the lock; a racing duplicate is discarded
    let table: &'static SvTable = Box::leak(Box::new(SvTable::build(params, target)));
    *cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .entry(key)
        .or_insert(table)
}

/// Flat arrays of one user's variable side, for the inner loops.
#[derive(Clone, Debug)]
pub struct VariableProfile {
    degrees: Vec<u32>,
    lambda: Vec<f64>,
    node: Vec<f64>,
}

impl VariableProfile {
    pub fn new(lambda: &DegreeDistribution<f64>) -> Self {
        let node = lambda.edge_to_node().expect("edge-perspective lambda");
        Self {
            degrees: lambda.iter().map(|(d, _)| d).collect(),
            lambda: lambda.iter().map(|(_, w)| w).collect(),
            node: node.iter().map(|(_, w)| w).collect(),
        }
    }

    /// Build from dense `(degree, weight)` pairs without validation; weights
    /// are expected to be non-negative and sum to one.
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Self {
        let degrees: Vec<u32> = pairs.iter().map(|p| p.0).collect();
        let lambda: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let norm: f64 = pairs.iter().map(|&(d, w)| w / d as f64).sum();
        let node = pairs.iter().map(|&(d, w)| w / d as f64 / norm).collect();
        Self {
            degrees,
            lambda,
            node,
        }
    }

    pub fn rate(&self, dc: u32) -> f64 {
        let integral: f64 = self
            .degrees
            .iter()
            .zip(&self.lambda)
            .map(|(&d, &w)| w / d as f64)
            .sum();
        1.0 - 1.0 / (dc as f64 * integral)
    }

    #[inline]
    pub fn vc(&self, i_cv: f64, i_sv: f64) -> f64 {
        let t = j_table();
        let scv2 = t.inverse(i_cv).powi(2);
        let ssv2 = t.inverse(i_sv).powi(2);
        self.degrees
            .iter()
            .zip(&self.lambda)
            .map(|(&d, &w)| w * t.j((((d - 1) as f64) * scv2 + ssv2).sqrt()))
            .sum()
    }

    #[inline]
    pub fn vs(&self, i_cv: f64) -> f64 {
        let t = j_table();
        let s = t.inverse(i_cv);
        self.degrees
            .iter()
            .zip(&self.node)
            .map(|(&d, &w)| w * t.j((d as f64).sqrt() * s))
            .sum()
    }
}

/// One user's four mutual informations at one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UserExit {
    pub i_sv: f64,
    pub i_vc: f64,
    pub i_cv: f64,
    pub i_vs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitState {
    pub iteration: usize,
    pub users: [UserExit; 2],
}

impl ExitState {
    pub fn user(&self, user: User) -> &UserExit {
        &self.users[user.index()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExitTrajectory {
    pub states: Vec<ExitState>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl ExitTrajectory {
    pub fn last(&self) -> Option<&ExitState> {
        self.states.last()
    }
}

/// Order in which the two users' recursions are advanced within an
/// iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Both users read the other's variable-to-state information from the
    /// previous iteration.
    #[default]
    Flooding,
    /// User 1 first; user 2 then reads user 1's fresh value.
    Alternating,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub max_iters: usize,
    pub threshold: f64,
    pub schedule: Schedule,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            threshold: DEFAULT_THRESHOLD,
            schedule: Schedule::Flooding,
        }
    }
}

/// Joint EXIT recursion of both users with the default threshold and
/// flooding schedule.
pub fn simulate_trajectory(
    ensembles: [&CodeEnsemble<f64>; 2],
    params: &ChannelParams<f64>,
    max_iters: usize,
) -> ExitTrajectory {
    simulate_trajectory_with(
        ensembles,
        params,
        &TrajectoryConfig {
            max_iters,
            ..Default::default()
        },
    )
}

pub fn simulate_trajectory_with(
    ensembles: [&CodeEnsemble<f64>; 2],
    params: &ChannelParams<f64>,
    cfg: &TrajectoryConfig,
) -> ExitTrajectory {
    let profiles = [
        VariableProfile::new(ensembles[0].lambda()),
        VariableProfile::new(ensembles[1].lambda()),
    ];
    run_trajectory(
        [&profiles[0], &profiles[1]],
        [ensembles[0].dc(), ensembles[1].dc()],
        params,
        cfg,
    )
}

/// Recursion over raw profiles. Stops early, unconverged, once no quantity
/// moves by more than `1e-13` in an iteration.
pub fn run_trajectory(
    profiles: [&VariableProfile; 2],
    dcs: [u32; 2],
    params: &ChannelParams<f64>,
    cfg: &TrajectoryConfig,
) -> ExitTrajectory {
    let sv = [sv_table(params, User::One), sv_table(params, User::Two)];
    let mut cur = [UserExit::default(); 2];
    let mut states = Vec::new();
    for iteration in 1..=cfg.max_iters {
        let prev = cur;
        for user in User::BOTH {
            let j = user.index();
            let other_vs = match (cfg.schedule, user) {
                (Schedule::Alternating, User::Two) => cur[0].i_vs,
                _ => prev[1 - j].i_vs,
            };
            let i_sv = sv[j].eval(other_vs);
            let i_vc = profiles[j].vc(prev[j].i_cv, i_sv);
            let i_cv = exit_cv(dcs[j], i_vc);
            let i_vs = profiles[j].vs(i_cv);
            cur[j] = UserExit {
                i_sv,
                i_vc,
                i_cv,
                i_vs,
            };
        }
        states.push(ExitState {
            iteration,
            users: cur,
        });
        if cur.iter().all(|u| u.i_vc >= cfg.threshold) {
            return ExitTrajectory {
                states,
                converged: true,
                iterations_used: iteration,
            };
        }
        let moved = cur.iter().zip(&prev).any(|(c, p)| {
            (c.i_sv - p.i_sv).abs() > 1e-13
                || (c.i_vc - p.i_vc).abs() > 1e-13
                || (c.i_cv - p.i_cv).abs() > 1e-13
                || (c.i_vs - p.i_vs).abs() > 1e-13
        });
        if !moved {
            return ExitTrajectory {
                states,
                converged: false,
                iterations_used: iteration,
            };
        }
    }
    ExitTrajectory {
        states,
        converged: false,
        iterations_used: cfg.max_iters,
    }
}
