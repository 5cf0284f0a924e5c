//! Joint belief propagation over both users' Tanner graphs and the shared
//! state nodes, flooding schedule.
//!
//! Every iteration:
//! 1. state nodes: `sv_j = state_to_variable(y, vs_other)` from the other
//!    user's variable-to-state messages of the previous iteration;
//! 2. variable nodes: `vc = sv + sum(cv) - cv` on every edge;
//! 3. check nodes: the tanh rule;
//! 4. variable nodes: `vs = sum(cv)` and the posterior `sv + sum(cv)`.
//!
//! Messages may be kept relative to a per-user reference word `s_j`
//! (`m~ = s_j * m`). With the transmitted codewords as reference this is
//! plain BP with every message multiplied by the codeword sign; with
//! all-ones it is plain BP. The state node converts between the two frames,
//! which lets a frame be decoded against any ±1 reference pattern.

use super::graph::TannerGraph;
use crate::channel::{state_to_variable, ChannelParams};
use crate::{Real, User};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderConfig {
    pub max_iters: usize,
    /// Absolute bound applied to every message after each update.
    pub llr_clamp: f64,
    /// Stop once both users' hard decisions satisfy all checks and did not
    /// change during the last iteration.
    pub early_stop: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            llr_clamp: 50.0,
            early_stop: true,
        }
    }
}

#[inline]
fn clip<T: Real>(x: T, c: T) -> T {
    x.max(-c).min(c)
}

pub struct JointDecoder<'g, T> {
    graph: &'g TannerGraph,
    params: ChannelParams<T>,
    cfg: DecoderConfig,
    clamp: T,
    edge_vars: [Vec<u32>; 2],
    y: Vec<T>,
    reference: [Vec<T>; 2],
    sv: [Vec<T>; 2],
    vs: [Vec<T>; 2],
    total: [Vec<T>; 2],
    v2c: [Vec<T>; 2],
    c2v: [Vec<T>; 2],
    scratch: Vec<T>,
    prefix: Vec<T>,
    iteration: usize,
}

impl<'g, T: Real> JointDecoder<'g, T> {
    pub fn new(graph: &'g TannerGraph, params: &ChannelParams<f64>, cfg: DecoderConfig) -> Self {
        assert!(
            cfg.max_iters >= 1 && cfg.llr_clamp > 0.0,
            "invalid decoder configuration"
        );
        let params =
            ChannelParams::new(T::lit(params.p1()), T::lit(params.p2())).expect("valid powers");
        let n = graph.n();
        let per_var = || [vec![T::zero(); n], vec![T::zero(); n]];
        let per_edge = || {
            [
                vec![T::zero(); graph.user(User::One).num_edges()],
                vec![T::zero(); graph.user(User::Two).num_edges()],
            ]
        };
        Self {
            graph,
            params,
            cfg,
            clamp: T::lit(cfg.llr_clamp),
            edge_vars: [
                graph.user(User::One).edge_vars(),
                graph.user(User::Two).edge_vars(),
            ],
            y: vec![T::zero(); n],
            reference: [vec![T::one(); n], vec![T::one(); n]],
            sv: per_var(),
            vs: per_var(),
            total: per_var(),
            v2c: per_edge(),
            c2v: per_edge(),
            scratch: Vec::new(),
            prefix: Vec::new(),
            iteration: 0,
        }
    }

    /// Loads a received word and clears all messages. `reference` gives the
    /// ±1 word each user's messages are kept relative to (`None`: all-ones,
    /// i.e. plain BP).
    pub fn reset(&mut self, y: &[T], reference: Option<[&[i8]; 2]>) {
        assert_eq!(y.len(), self.graph.n(), "received word length");
        self.y.copy_from_slice(y);
        for j in 0..2 {
            match reference {
                Some(r) => {
                    assert_eq!(r[j].len(), y.len(), "reference length");
                    for (d, &s) in self.reference[j].iter_mut().zip(r[j]) {
                        *d = if s < 0 { -T::one() } else { T::one() };
                    }
                }
                None => self.reference[j].iter_mut().for_each(|d| *d = T::one()),
            }
            for v in [
                &mut self.sv[j],
                &mut self.vs[j],
                &mut self.total[j],
                &mut self.v2c[j],
                &mut self.c2v[j],
            ] {
                v.iter_mut().for_each(|x| *x = T::zero());
            }
        }
        self.iteration = 0;
    }

    #[inline]
    fn clip(&self, x: T) -> T {
        clip(x, self.clamp)
    }

    /// One flooding iteration.
    pub fn step(&mut self) {
        let n = self.graph.n();
        // state nodes, both users from the previous vs
        for i in 0..n {
            for user in User::BOTH {
                let (j, o) = (user.index(), user.other().index());
                let vs_other = self.reference[o][i] * self.vs[o][i];
                let s = state_to_variable(self.y[i], vs_other, &self.params, user);
                self.sv[j][i] = self.clip(self.reference[j][i] * s);
            }
        }
        for user in User::BOTH {
            let j = user.index();
            let comp = self.graph.user(user);
            // variable to check
            for v in 0..n {
                let edges = comp.var_edges(v);
                let sum = self.c2v[j][edges.clone()]
                    .iter()
                    .fold(T::zero(), |a, &b| a + b);
                let base = self.sv[j][v] + sum;
                for e in edges {
                    self.v2c[j][e] = self.clip(base - self.c2v[j][e]);
                }
            }
            // check to variable, tanh rule with prefix/suffix products
            let (half, two, clamp) = (T::lit(0.5), T::lit(2.0), self.clamp);
            for c in 0..comp.num_checks() {
                let ids = comp.check_edge_ids(c);
                let d = ids.len();
                self.scratch.clear();
                self.scratch
                    .extend(ids.iter().map(|&e| (self.v2c[j][e as usize] * half).tanh()));
                self.prefix.clear();
                let mut acc = T::one();
                for &t in &self.scratch {
                    self.prefix.push(acc);
                    acc *= t;
                }
                let mut suffix = T::one();
                for k in (0..d).rev() {
                    let p = self.prefix[k] * suffix;
                    suffix *= self.scratch[k];
                    self.c2v[j][ids[k] as usize] = clip(two * p.atanh(), clamp);
                }
            }
            // variable to state and posterior
            for v in 0..n {
                let sum = self.c2v[j][comp.var_edges(v)]
                    .iter()
                    .fold(T::zero(), |a, &b| a + b);
                self.vs[j][v] = self.clip(sum);
                self.total[j][v] = self.sv[j][v] + sum;
            }
        }
        self.iteration += 1;
    }

    /// Bit decisions relative to the reference word: `true` where the
    /// posterior is not positive.
    pub fn flipped(&self, user: User) -> Vec<bool> {
        self.total[user.index()]
            .iter()
            .map(|&t| !(t > T::zero()))
            .collect()
    }

    /// Hard decisions as ±1 symbols in the channel frame.
    pub fn decisions(&self, user: User) -> Vec<i8> {
        let j = user.index();
        self.total[j]
            .iter()
            .zip(&self.reference[j])
            .map(|(&t, &r)| if (t * r) > T::zero() { 1 } else { -1 })
            .collect()
    }

    /// Parity of the reference-frame decisions over every check.
    pub fn syndrome_is_zero(&self, user: User) -> bool {
        let j = user.index();
        let comp = self.graph.user(user);
        let ev = &self.edge_vars[j];
        let t = &self.total[j];
        (0..comp.num_checks()).all(|c| {
            !comp.check_edge_ids(c).iter().fold(false, |acc, &e| {
                acc ^ !(t[ev[e as usize] as usize] > T::zero())
            })
        })
    }

    /// Iterates until `max_iters` or, with early stopping, until both
    /// syndromes vanish on unchanged decisions. A zero syndrome alone is not
    /// enough: in the first iterations the weaker user's bits at
    /// destructively superposed positions can sit on a nearby codeword.
    /// Returns the number of iterations run.
    pub fn run(&mut self) -> usize {
        let mut previous: Option<[Vec<bool>; 2]> = None;
        while self.iteration < self.cfg.max_iters {
            self.step();
            if !self.cfg.early_stop {
                continue;
            }
            if User::BOTH.iter().all(|&u| self.syndrome_is_zero(u)) {
                let now = [self.flipped(User::One), self.flipped(User::Two)];
                if previous.as_ref() == Some(&now) {
                    break;
                }
                previous = Some(now);
            } else {
                previous = None;
            }
        }
        self.iteration
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn sv(&self, user: User) -> &[T] {
        &self.sv[user.index()]
    }

    pub fn vs(&self, user: User) -> &[T] {
        &self.vs[user.index()]
    }

    /// Variable-to-check messages in edge order (edges grouped by variable).
    pub fn v2c(&self, user: User) -> &[T] {
        &self.v2c[user.index()]
    }

    pub fn c2v(&self, user: User) -> &[T] {
        &self.c2v[user.index()]
    }

    pub fn posterior(&self, user: User) -> &[T] {
        &self.total[user.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{CodeEnsemble, DegreeDistribution};
    use crate::simulate::{channel_output, gf2::Encoder, rng};
    use rand_distr::{Distribution, StandardNormal};

    fn graph(n: usize, dc: u32, seed: u64) -> TannerGraph {
        let e = CodeEnsemble::new(DegreeDistribution::variable_regular(3).unwrap(), dc).unwrap();
        TannerGraph::construct([&e, &e], n, seed).unwrap()
    }

    fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut r = rng(seed, 99, 0);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                sigma * z
            })
            .collect()
    }

    #[test]
    fn codeword_reference_is_sign_factored_plain_bp() {
        let g = graph(240, 6, 2);
        let p = ChannelParams::new(1.3, 0.8).unwrap();
        let mut r = rng(7, 98, 0);
        let x: Vec<Vec<i8>> = User::BOTH
            .iter()
            .map(|&u| {
                let w = Encoder::new(g.user(u)).random_codeword(&mut r);
                w.iter().map(|&b| if b { -1 } else { 1 }).collect()
            })
            .collect();
        let y = channel_output([&x[0], &x[1]], &p, &gaussian(240, 1.0, 3));
        let cfg = DecoderConfig {
            max_iters: 8,
            early_stop: false,
            ..Default::default()
        };
        let mut plain = JointDecoder::<f64>::new(&g, &p, cfg);
        let mut factored = JointDecoder::<f64>::new(&g, &p, cfg);
        plain.reset(&y, None);
        factored.reset(&y, Some([&x[0], &x[1]]));
        for _ in 0..8 {
            plain.step();
            factored.step();
            for u in User::BOTH {
                let s = &x[u.index()];
                for v in 0..240 {
                    let k = s[v] as f64;
                    assert!((factored.sv(u)[v] - k * plain.sv(u)[v]).abs() < 1e-9);
                    assert!((factored.posterior(u)[v] - k * plain.posterior(u)[v]).abs() < 1e-9);
                }
                let ev = g.user(u).edge_vars();
                for (e, &v) in ev.iter().enumerate() {
                    let k = s[v as usize] as f64;
                    assert!((factored.v2c(u)[e] - k * plain.v2c(u)[e]).abs() < 1e-9);
                    assert!((factored.c2v(u)[e] - k * plain.c2v(u)[e]).abs() < 1e-9);
                }
            }
        }
        assert_eq!(plain.decisions(User::One), factored.decisions(User::One));
    }

    #[test]
    fn negated_output_negates_messages_for_even_checks() {
        let g = graph(120, 6, 4);
        for u in User::BOTH {
            let c = g.user(u);
            assert!((0..c.num_checks()).all(|k| c.check_degree(k) % 2 == 0));
        }
        let p = ChannelParams::new(1.5, 1.0).unwrap();
        let y = gaussian(120, 2.0, 5);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let cfg = DecoderConfig {
            max_iters: 6,
            early_stop: false,
            ..Default::default()
        };
        let mut a = JointDecoder::<f64>::new(&g, &p, cfg);
        let mut b = JointDecoder::<f64>::new(&g, &p, cfg);
        a.reset(&y, None);
        b.reset(&neg, None);
        a.run();
        b.run();
        for u in User::BOTH {
            for (s, t) in a.posterior(u).iter().zip(b.posterior(u)) {
                assert!((s + t).abs() < 1e-9, "{s} {t}");
            }
        }
    }

    // Independent single-user BP straight from the check rows.
    fn single_user_bp(rows: &[Vec<u32>], llr: &[f64], iters: usize) -> Vec<f64> {
        let n = llr.len();
        let mut c2v: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut total = llr.to_vec();
        for _ in 0..iters {
            let mut new = c2v.clone();
            for (c, row) in rows.iter().enumerate() {
                for k in 0..row.len() {
                    let mut prod = 1.0;
                    for (m, &v) in row.iter().enumerate() {
                        if m != k {
                            prod *= ((total[v as usize] - c2v[c][m]) / 2.0).tanh();
                        }
                    }
                    new[c][k] = 2.0 * f64::atanh(prod);
                }
            }
            c2v = new;
            total = llr.to_vec();
            for (c, row) in rows.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    total[v as usize] += c2v[c][k];
                }
            }
        }
        assert_eq!(total.len(), n);
        total
    }

    #[test]
    fn vanishing_interferer_reduces_to_single_user_bp() {
        let g = graph(90, 6, 6);
        let p = ChannelParams::new(1.0, 1e-12).unwrap();
        let ones = vec![1i8; 90];
        let y = channel_output([&ones, &ones], &p, &gaussian(90, 1.1, 8));
        let cfg = DecoderConfig {
            max_iters: 5,
            early_stop: false,
            ..Default::default()
        };
        let mut d = JointDecoder::<f64>::new(&g, &p, cfg);
        d.reset(&y, None);
        d.run();
        let llr: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let want = single_user_bp(&g.user(User::One).check_rows(), &llr, 5);
        for (a, b) in d.posterior(User::One).iter().zip(&want) {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} {b}");
        }
        // the weak user learns nothing
        assert!(d.sv(User::Two).iter().all(|v| v.abs() < 1e-4));
    }
}
