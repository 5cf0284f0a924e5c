//! Degree-distribution design by alternating linear programs.
//!
//! One user's variable-node distribution is optimised at a time with the
//! other user's ensemble held fixed. The free user's EXIT chart must stay
//! above the inverse check-node chart at a set of operating points taken
//! from the joint trajectory plus a uniform grid in `i_cv`. The sweep repeats
//! this for every check-degree pair and keeps the best sum rate.

use rayon::prelude::*;

use crate::channel::{sum_capacity_bpsk, ChannelParams};
use crate::degree::{
    stability_bound, CodeEnsemble, DegreeDistribution, Perspective, Side, DEFAULT_MAX_DEGREE,
};
use crate::exit::{
    exit_cv_inverse, j_table, run_trajectory, ExitTrajectory, TrajectoryConfig, VariableProfile,
};
use crate::lp::{LinearProgram, Relation};
use crate::{Error, Result, User};

/// Weights below this are dropped from LP solutions.
pub const PRUNE: f64 = 1e-6;
/// Blend factor applied after bisecting the converging start.
const START_BACKOFF: f64 = 0.8;
const MAX_TRAJECTORY_ROWS: usize = 64;
const MAX_CUT_ROUNDS: usize = 30;
const MAX_CUTS: usize = 32;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpec {
    pub params: ChannelParams<f64>,
    pub v_max: u32,
    /// Inclusive check-degree range per user.
    pub dc_range: [(u32, u32); 2],
    pub constraint_grid_size: usize,
    pub slack: f64,
    pub max_alternations: usize,
    pub rate_tol: f64,
    /// Worker threads for the sweep; 0 uses all cores.
    pub workers: usize,
    pub trajectory: TrajectoryConfig,
}

impl DesignSpec {
    pub fn new(params: ChannelParams<f64>) -> Self {
        Self {
            params,
            v_max: DEFAULT_MAX_DEGREE,
            dc_range: [(4, 16), (4, 16)],
            constraint_grid_size: 128,
            slack: 1e-4,
            max_alternations: 50,
            rate_tol: 1e-4,
            workers: 0,
            trajectory: TrajectoryConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if self.v_max < 3 {
            return bad("v_max must be at least 3");
        }
        if self.constraint_grid_size < 16 {
            return bad("constraint grid needs at least 16 points");
        }
        if !(self.slack > 0.0 && self.slack < 1.0) {
            return bad("slack must lie in (0, 1)");
        }
        if !(self.rate_tol >= 0.0) {
            return bad("rate tolerance must be non-negative");
        }
        if !(self.params.p1() > 0.0 && self.params.p2() > 0.0) {
            return bad("design needs both powers positive");
        }
        for (lo, hi) in self.dc_range {
            if lo < 3 || hi < lo {
                return bad("check-degree range must satisfy 3 <= lo <= hi");
            }
        }
        Ok(())
    }

    /// Equal powers: the problem is symmetric in the two users.
    pub fn is_symmetric(&self) -> bool {
        self.params.p1() == self.params.p2()
    }

    /// Check-degree pairs visited by [`sweep`], in sweep order. With equal
    /// powers only the diagonal is visited.
    pub fn dc_pairs(&self) -> Vec<(u32, u32)> {
        let [(a0, a1), (b0, b1)] = self.dc_range;
        if self.is_symmetric() {
            (a0.max(b0)..=a1.min(b1)).map(|d| (d, d)).collect()
        } else {
            (a0..=a1)
                .flat_map(|d1| (b0..=b1).map(move |d2| (d1, d2)))
                .collect()
        }
    }
}

/// One row of the sweep log.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub dc: [u32; 2],
    /// `None` if the pair produced no valid design.
    pub rates: Option<[f64; 2]>,
    pub sum_rate: Option<f64>,
    pub alternations: usize,
    pub note: String,
}

/// Outcome of [`alternate`] for one check-degree pair.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub ensembles: [CodeEnsemble<f64>; 2],
    pub sum_rate: f64,
    pub trajectory: ExitTrajectory,
    /// Sum rate after initialisation and after every accepted LP step.
    pub history: Vec<f64>,
    pub alternations: usize,
}

#[derive(Clone, Debug)]
pub struct DesignResult {
    pub ensembles: [CodeEnsemble<f64>; 2],
    pub sum_rate: f64,
    pub capacity: f64,
    pub gap: f64,
    pub trajectory: ExitTrajectory,
    pub history: Vec<f64>,
    pub sweep_log: Vec<SweepEntry>,
}

impl DesignResult {
    pub fn dc(&self) -> [u32; 2] {
        [self.ensembles[0].dc(), self.ensembles[1].dc()]
    }

    pub fn rates(&self) -> [f64; 2] {
        [self.ensembles[0].rate(), self.ensembles[1].rate()]
    }
}

/// Dense edge-perspective weights indexed by degree (entries 0 and 1 unused).
type Dense = Vec<f64>;

fn profile(lambda: &Dense) -> VariableProfile {
    let pairs: Vec<(u32, f64)> = lambda
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(d, &w)| (d as u32, w))
        .collect();
    VariableProfile::from_pairs(&pairs)
}

fn dense(lambda: &DegreeDistribution<f64>, v_max: u32) -> Dense {
    let mut v = vec![0.0; v_max.max(lambda.max_degree()) as usize + 1];
    for (d, w) in lambda.iter() {
        v[d as usize] = w;
    }
    v
}

fn sparse(lambda: &Dense, v_max: u32) -> Result<DegreeDistribution<f64>> {
    let coeffs = lambda
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(d, &w)| (d as u32, w));
    DegreeDistribution::renormalized(coeffs, 0.0, Perspective::Edge, Side::Variable, v_max)
}

fn rate(lambda: &Dense, dc: u32) -> f64 {
    let integral: f64 = lambda
        .iter()
        .enumerate()
        .skip(2)
        .map(|(d, w)| w / d as f64)
        .sum();
    1.0 - 1.0 / (dc as f64 * integral)
}

struct Problem<'a> {
    spec: &'a DesignSpec,
    dcs: [u32; 2],
}

impl Problem<'_> {
    fn trajectory(&self, lambdas: &[Dense; 2]) -> ExitTrajectory {
        let p = [profile(&lambdas[0]), profile(&lambdas[1])];
        run_trajectory(
            [&p[0], &p[1]],
            self.dcs,
            &self.spec.params,
            &self.spec.trajectory,
        )
    }

    fn sum_rate(&self, lambdas: &[Dense; 2]) -> f64 {
        rate(&lambdas[0], self.dcs[0]) + rate(&lambdas[1], self.dcs[1])
    }

    /// `(i_cv, i_sv)` operating points of `user`: every trajectory step and
    /// then the grid, each grid point paired with the `i_sv` of the step
    /// whose incoming `i_cv` is nearest.
    fn operating_points(
        &self,
        traj: &ExitTrajectory,
        user: User,
    ) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let j = user.index();
        let steps: Vec<(f64, f64)> = traj
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                (
                    if k == 0 {
                        0.0
                    } else {
                        traj.states[k - 1].users[j].i_cv
                    },
                    s.users[j].i_sv,
                )
            })
            .collect();
        let g = self.spec.constraint_grid_size;
        let grid = (0..g)
            .map(|k| {
                let x = k as f64 / (g - 1) as f64 * (1.0 - 1e-5);
                let mut best = (f64::INFINITY, 0.0);
                for &(c, s) in &steps {
                    let d = (c - x).abs();
                    if d < best.0 {
                        best = (d, s);
                    }
                }
                (x, best.1)
            })
            .collect();
        (steps, grid)
    }

    /// Constraint row over degrees `2..=v_max` and its right-hand side.
    fn row(&self, dc: u32, (x, s): (f64, f64)) -> (Vec<f64>, f64) {
        let t = j_table();
        let scv2 = t.inverse(x).powi(2);
        let ssv2 = t.inverse(s).powi(2);
        let coeffs = (2..=self.spec.v_max)
            .map(|d| t.j(((d - 1) as f64 * scv2 + ssv2).sqrt()))
            .collect();
        let target = exit_cv_inverse(dc, x);
        (coeffs, target + self.spec.slack * (1.0 - target))
    }

    /// LP step for `user` against the trajectory of the current pair.
    fn optimise(&self, user: User, traj: &ExitTrajectory) -> Result<Dense> {
        let spec = self.spec;
        let j = user.index();
        let dc = self.dcs[j];
        let n = (spec.v_max - 1) as usize;
        let bound = stability_bound(spec.params.power(user), dc)?;
        let (steps, grid) = self.operating_points(traj, user);

        let mut lp = LinearProgram::maximize((2..=spec.v_max).map(|d| 1.0 / d as f64).collect());
        lp.add(vec![1.0; n], Relation::Eq, 1.0);
        let mut stab = vec![0.0; n];
        stab[0] = 1.0;
        lp.add(stab, Relation::Le, bound - spec.slack);
        for &p in &grid {
            let (c, r) = self.row(dc, p);
            lp.add(c, Relation::Ge, r);
        }
        let rows: Vec<(Vec<f64>, f64)> = steps.iter().map(|&p| self.row(dc, p)).collect();
        let mut used = vec![false; rows.len()];
        let stride = rows.len().div_ceil(MAX_TRAJECTORY_ROWS).max(1);
        for k in (0..rows.len()).step_by(stride) {
            used[k] = true;
            lp.add(rows[k].0.clone(), Relation::Ge, rows[k].1);
        }
        for _ in 0..MAX_CUT_ROUNDS {
            let sol = lp.solve()?;
            let mut violated: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .filter(|&(k, _)| !used[k])
                .map(|(k, (c, r))| (r - c.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>(), k))
                .filter(|&(v, _)| v > FEAS_TOL)
                .collect();
            if violated.is_empty() {
                let mut out = vec![0.0; spec.v_max as usize + 1];
                for (k, &w) in sol.x.iter().enumerate() {
                    if w >= PRUNE {
                        out[k + 2] = w;
                    }
                }
                let total: f64 = out.iter().sum();
                out.iter_mut().for_each(|w| *w /= total);
                return Ok(out);
            }
            violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, k) in violated.iter().take(MAX_CUTS) {
                used[k] = true;
                lp.add(rows[k].0.clone(), Relation::Ge, rows[k].1);
            }
        }
        Err(Error::Solver("constraint generation did not settle".into()))
    }

    /// Heuristic start `{2: min(0.3, bound - slack), 3: 0.3, v_max: rest}`
    /// per user. If the pair does not converge it is blended toward the
    /// degree-`v_max` repetition profile: bisect the largest converging
    /// share of the heuristic, then back off.
    fn start(&self) -> Result<[Dense; 2]> {
        let v = self.spec.v_max as usize;
        let mut heuristic = [vec![0.0; v + 1], vec![0.0; v + 1]];
        for user in User::BOTH {
            let j = user.index();
            let bound = stability_bound(self.spec.params.power(user), self.dcs[j])?;
            let l2 = 0.3f64.min(bound - self.spec.slack).max(0.0);
            heuristic[j][2] += l2;
            heuristic[j][3] += 0.3;
            heuristic[j][v] += 1.0 - l2 - 0.3;
        }
        if self.trajectory(&heuristic).converged {
            return Ok(heuristic);
        }
        let mut top = vec![0.0; v + 1];
        top[v] = 1.0;
        let blend = |t: f64| -> [Dense; 2] {
            let mix = |h: &Dense| {
                h.iter()
                    .zip(&top)
                    .map(|(a, b)| t * a + (1.0 - t) * b)
                    .collect()
            };
            [mix(&heuristic[0]), mix(&heuristic[1])]
        };
        if !self.trajectory(&blend(0.0)).converged {
            return Err(Error::NoFeasibleDesign("no converging start".into()));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if self.trajectory(&blend(mid)).converged {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = lo * START_BACKOFF;
        let start = blend(t);
        Ok(if self.trajectory(&start).converged {
            start
        } else {
            blend(0.0)
        })
    }
}

/// Single LP step: the best distribution for `free_user` with check degree
/// `free_dc`, holding `fixed` (the other user) constant. Operating points
/// come from the joint trajectory with the free user at `current`.
pub fn optimize_user(
    fixed: &CodeEnsemble<f64>,
    current: &DegreeDistribution<f64>,
    free_dc: u32,
    free_user: User,
    spec: &DesignSpec,
) -> Result<DegreeDistribution<f64>> {
    spec.validate()?;
    let mut dcs = [0; 2];
    dcs[free_user.index()] = free_dc;
    dcs[free_user.other().index()] = fixed.dc();
    let problem = Problem { spec, dcs };
    let mut lambdas = [Vec::new(), Vec::new()];
    lambdas[free_user.index()] = dense(current, spec.v_max);
    lambdas[free_user.other().index()] = dense(fixed.lambda(), spec.v_max);
    let traj = problem.trajectory(&lambdas);
    sparse(&problem.optimise(free_user, &traj)?, spec.v_max)
}

/// Alternating optimisation for one check-degree pair. A step is kept only
/// if the joint trajectory still converges and the sum rate does not drop,
/// so `history` is nondecreasing. With equal powers and equal check degrees
/// both users share one distribution throughout.
pub fn alternate(spec: &DesignSpec, dc1: u32, dc2: u32) -> Result<Candidate> {
    spec.validate()?;
    let problem = Problem {
        spec,
        dcs: [dc1, dc2],
    };
    let symmetric = spec.is_symmetric() && dc1 == dc2;
    let mut lambdas = problem.start()?;
    if symmetric {
        lambdas[1] = lambdas[0].clone();
    }
    let mut traj = problem.trajectory(&lambdas);
    let mut best = problem.sum_rate(&lambdas);
    let mut history = vec![best];
    let users: &[User] = if symmetric { &[User::One] } else { &User::BOTH };
    let mut rounds = 0;
    for _ in 0..spec.max_alternations {
        rounds += 1;
        let before = best;
        for &user in users {
            let proposal = match problem.optimise(user, &traj) {
                Ok(l) => l,
                Err(Error::Infeasible) => continue,
                Err(e) => return Err(e),
            };
            let j = user.index();
            // symmetric steps move both users, so damp until the pair converges
            let damping: &[f64] = if symmetric {
                &[1.0, 0.5, 0.25, 0.125, 0.0625]
            } else {
                &[1.0]
            };
            for &a in damping {
                let step: Dense = lambdas[j]
                    .iter()
                    .zip(&proposal)
                    .map(|(o, n)| o + a * (n - o))
                    .collect();
                let mut cand = lambdas.clone();
                cand[j] = step;
                if symmetric {
                    cand[1] = cand[0].clone();
                }
                let sr = problem.sum_rate(&cand);
                if sr < best {
                    continue;
                }
                let t = problem.trajectory(&cand);
                if t.converged {
                    lambdas = cand;
                    traj = t;
                    best = sr;
                    history.push(best);
                    break;
                }
            }
        }
        if best - before < spec.rate_tol {
            break;
        }
    }
    let ensembles = [
        CodeEnsemble::new(sparse(&lambdas[0], spec.v_max)?, dc1),
        CodeEnsemble::new(sparse(&lambdas[1], spec.v_max)?, dc2),
    ];
    let [Ok(e1), Ok(e2)] = ensembles else {
        return Err(Error::NoFeasibleDesign(format!(
            "non-positive user rate at dc ({dc1}, {dc2})"
        )));
    };
    Ok(Candidate {
        ensembles: [e1, e2],
        sum_rate: best,
        trajectory: traj,
        history,
        alternations: rounds,
    })
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs [`alternate`] for every pair of [`DesignSpec::dc_pairs`] and keeps
/// the best sum rate; ties go to the smaller `dc1 + dc2`, then the smaller
/// `dc1`. The result does not depend on the worker count.
pub fn sweep(spec: &DesignSpec) -> Result<DesignResult> {
    spec.validate()?;
    let pairs = spec.dc_pairs();
    let outcomes: Vec<Result<Candidate>> = with_pool(spec.workers, || {
        pairs
            .par_iter()
            .map(|&(a, b)| alternate(spec, a, b))
            .collect()
    })?;
    let mut log = Vec::with_capacity(pairs.len());
    let mut best: Option<Candidate> = None;
    for (&(d1, d2), outcome) in pairs.iter().zip(outcomes) {
        match outcome {
            Ok(c) => {
                log.push(SweepEntry {
                    dc: [d1, d2],
                    rates: Some([c.ensembles[0].rate(), c.ensembles[1].rate()]),
                    sum_rate: Some(c.sum_rate),
                    alternations: c.alternations,
                    note: String::new(),
                });
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let key = |c: &Candidate| {
                            (
                                c.ensembles[0].dc() + c.ensembles[1].dc(),
                                c.ensembles[0].dc(),
                            )
                        };
                        c.sum_rate > b.sum_rate || (c.sum_rate == b.sum_rate && key(&c) < key(b))
                    }
                };
                if better {
                    best = Some(c);
                }
            }
            Err(e) => log.push(SweepEntry {
                dc: [d1, d2],
                rates: None,
                sum_rate: None,
                alternations: 0,
                note: e.to_string(),
            }),
        }
    }
    let Some(best) = best else {
        let diag: Vec<String> = log
            .iter()
            .map(|e| format!("({}, {}): {}", e.dc[0], e.dc[1], e.note))
            .collect();
        return Err(Error::NoFeasibleDesign(diag.join("; ")));
    };
    let capacity = sum_capacity_bpsk(&spec.params);
    Ok(DesignResult {
        sum_rate: best.sum_rate,
        capacity,
        gap: capacity - best.sum_rate,
        ensembles: best.ensembles,
        trajectory: best.trajectory,
        history: best.history,
        sweep_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p1: f64, p2: f64) -> DesignSpec {
        DesignSpec::new(ChannelParams::new(p1, p2).unwrap())
    }

    #[test]
    fn validation_and_pairs() {
        let mut s = spec(1.5, 1.0);
        assert!(s.validate().is_ok());
        assert_eq!(s.dc_pairs().len(), 169);
        s.dc_range = [(4, 4), (4, 4)];
        assert_eq!(s.dc_pairs(), vec![(4, 4)]);
        s.constraint_grid_size = 8;
        assert!(s.validate().is_err());
        let e = spec(1.0, 1.0);
        assert_eq!(e.dc_pairs().len(), 13);
        assert!(e.dc_pairs().iter().all(|(a, b)| a == b));
    }

    #[test]
    fn dense_round_trip_and_rate() {
        let l = DegreeDistribution::new(
            [(2, 0.25), (3, 0.25), (10, 0.5)],
            Perspective::Edge,
            Side::Variable,
        )
        .unwrap();
        let d = dense(&l, 100);
        assert_eq!(d.len(), 101);
        assert_eq!(sparse(&d, 100).unwrap(), l);
        assert!((rate(&d, 6) - crate::degree::monomial_rate(&l, 6)).abs() < 1e-15);
    }

    #[test]
    fn closed_tunnel_is_infeasible() {
        // weak channel: no distribution with dc=16 opens the tunnel for user 1
        let mut s = spec(0.05, 0.05);
        s.v_max = 20;
        let fixed = CodeEnsemble::new(DegreeDistribution::variable_regular(3).unwrap(), 6).unwrap();
        let current = DegreeDistribution::variable_regular(3).unwrap();
        let r = optimize_user(&fixed, &current, 16, User::One, &s);
        assert!(matches!(r, Err(Error::Infeasible)), "{r:?}");
    }
}
