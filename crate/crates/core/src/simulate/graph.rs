//! Random Tanner graphs from a degree distribution (configuration model).

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::rng;
use crate::degree::CodeEnsemble;
use crate::{Error, Result, User};

const DOMAIN_GRAPH: u64 = 1;

/// One user's parity-check graph in compressed form. Edges are numbered in
/// variable order, so the edges of variable `v` are
/// `var_offsets[v]..var_offsets[v + 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    n: usize,
    var_offsets: Vec<usize>,
    /// Check endpoint of each edge.
    edge_check: Vec<u32>,
    check_offsets: Vec<usize>,
    /// Edge ids grouped by check.
    check_edges: Vec<u32>,
    /// Check whose degree was changed to match the socket count, if any.
    adjusted_check: Option<(usize, usize)>,
}

impl Component {
    /// Builds a component from per-variable check lists.
    pub fn from_adjacency(checks_of_var: &[Vec<u32>], num_checks: usize) -> Result<Self> {
        let n = checks_of_var.len();
        let mut var_offsets = Vec::with_capacity(n + 1);
        var_offsets.push(0);
        let mut edge_check = Vec::new();
        for (v, cs) in checks_of_var.iter().enumerate() {
            let mut sorted = cs.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Construction(format!(
                    "parallel edge at variable {v}"
                )));
            }
            if let Some(&c) = sorted.last() {
                if c as usize >= num_checks {
                    return Err(Error::Construction(format!("check index {c} out of range")));
                }
            }
            edge_check.extend_from_slice(&sorted);
            var_offsets.push(edge_check.len());
        }
        let mut counts = vec![0usize; num_checks + 1];
        for &c in &edge_check {
            counts[c as usize + 1] += 1;
        }
        for i in 0..num_checks {
            counts[i + 1] += counts[i];
        }
        let check_offsets = counts.clone();
        let mut fill = counts;
        let mut check_edges = vec![0u32; edge_check.len()];
        for (e, &c) in edge_check.iter().enumerate() {
            check_edges[fill[c as usize]] = e as u32;
            fill[c as usize] += 1;
        }
        Ok(Self {
            n,
            var_offsets,
            edge_check,
            check_offsets,
            check_edges,
            adjusted_check: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_checks(&self) -> usize {
        self.check_offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edge_check.len()
    }

    pub fn var_degree(&self, v: usize) -> usize {
        self.var_offsets[v + 1] - self.var_offsets[v]
    }

    pub fn check_degree(&self, c: usize) -> usize {
        self.check_offsets[c + 1] - self.check_offsets[c]
    }

    #[inline]
    pub fn var_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.var_offsets[v]..self.var_offsets[v + 1]
    }

    #[inline]
    pub fn check_edge_ids(&self, c: usize) -> &[u32] {
        &self.check_edges[self.check_offsets[c]..self.check_offsets[c + 1]]
    }

    #[inline]
    pub fn edge_check(&self, e: usize) -> usize {
        self.edge_check[e] as usize
    }

    /// Variable endpoint of every edge.
    pub fn edge_vars(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.num_edges()];
        for v in 0..self.n {
            for e in self.var_edges(v) {
                out[e] = v as u32;
            }
        }
        out
    }

    /// Sorted variable indices of each check.
    pub fn check_rows(&self) -> Vec<Vec<u32>> {
        let ev = self.edge_vars();
        (0..self.num_checks())
            .map(|c| {
                let mut r: Vec<u32> = self
                    .check_edge_ids(c)
                    .iter()
                    .map(|&e| ev[e as usize])
                    .collect();
                r.sort_unstable();
                r
            })
            .collect()
    }

    /// `(check index, new degree)` of the check adjusted during construction.
    pub fn adjusted_check(&self) -> Option<(usize, usize)> {
        self.adjusted_check
    }

    /// Fraction of edges attached to variables of each degree, indexed by
    /// degree.
    pub fn edge_degree_fractions(&self) -> Vec<f64> {
        let mut out = vec![0.0; (0..self.n).map(|v| self.var_degree(v)).max().unwrap_or(0) + 1];
        for v in 0..self.n {
            out[self.var_degree(v)] += self.var_degree(v) as f64;
        }
        let e = self.num_edges() as f64;
        out.iter_mut().for_each(|x| *x /= e);
        out
    }

    /// `1 - checks / variables`.
    pub fn empirical_rate(&self) -> f64 {
        1.0 - self.num_checks() as f64 / self.n as f64
    }

    /// True if every check is satisfied by the hard decisions (`true` = bit 1).
    pub fn syndrome_is_zero(&self, bits: &[bool]) -> bool {
        let ev = self.edge_vars();
        (0..self.num_checks()).all(|c| {
            !self
                .check_edge_ids(c)
                .iter()
                .fold(false, |acc, &e| acc ^ bits[ev[e as usize] as usize])
        })
    }

    /// Adjacency list: one line per check with its sorted variable indices.
    pub fn write_adjacency<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.check_rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Variable-node degree sequence: largest-remainder rounding of `n L_i`.
pub fn variable_degrees(ensemble: &CodeEnsemble<f64>, n: usize) -> Result<Vec<usize>> {
    let node = ensemble.lambda().edge_to_node()?;
    let mut counts: Vec<(u32, usize, f64)> = node
        .iter()
        .map(|(d, w)| {
            let x = w * n as f64;
            (d, x.floor() as usize, x - x.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // largest remainder first; ties to the smaller degree
    order.sort_by(|&a, &b| {
        counts[b]
            .2
            .total_cmp(&counts[a].2)
            .then(counts[a].0.cmp(&counts[b].0))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k].1 += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (d, c, _) in counts {
        out.extend(std::iter::repeat_n(d as usize, c));
    }
    Ok(out)
}

/// Configuration-model graph for one user. The check count is the nearest
/// integer to `edges / dc`; a remaining socket mismatch (at most `dc / 2`)
/// is absorbed by one check of degree `dc + mismatch`. Parallel edges are
/// removed by random edge swaps, at most `100 * edges` attempts.
pub fn construct(
    ensemble: &CodeEnsemble<f64>,
    n: usize,
    seed: u64,
    user: User,
) -> Result<Component> {
    if n == 0 {
        return Err(Error::Construction("block length must be positive".into()));
    }
    let dc = ensemble.dc() as usize;
    let var_deg = variable_degrees(ensemble, n)?;
    let edges: usize = var_deg.iter().sum();
    let m = ((edges as f64 / dc as f64).round() as usize).max(1);
    let mut check_deg = vec![dc; m];
    let mismatch = edges as isize - (m * dc) as isize;
    let mut adjusted = None;
    if mismatch != 0 {
        let d = dc as isize + mismatch;
        if d < 1 {
            return Err(Error::Construction(format!(
                "socket mismatch {mismatch} cannot be absorbed"
            )));
        }
        check_deg[m - 1] = d as usize;
        adjusted = Some((m - 1, d as usize));
    }
    if var_deg.iter().any(|&d| d > m) || check_deg.iter().any(|&d| d > n) {
        return Err(Error::Construction(format!(
            "degrees exceed the opposite side at n = {n}"
        )));
    }

    let mut rng = rng(seed, DOMAIN_GRAPH, user.index() as u64);
    let mut sockets: Vec<u32> = Vec::with_capacity(edges);
    for (c, &d) in check_deg.iter().enumerate() {
        sockets.extend(std::iter::repeat_n(c as u32, d));
    }
    sockets.shuffle(&mut rng);
    let edge_var: Vec<u32> = var_deg
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v as u32, d))
        .collect();

    let mut present: HashSet<(u32, u32)> = HashSet::with_capacity(edges);
    let mut parallel = Vec::new();
    let mut duplicate = vec![false; edges];
    for e in 0..edges {
        if !present.insert((edge_var[e], sockets[e])) {
            parallel.push(e);
            duplicate[e] = true;
        }
    }
    let mut attempts = 0usize;
    let budget = 100 * edges;
    while let Some(&e) = parallel.last() {
        if attempts >= budget {
            return Err(Error::Construction(format!(
                "{} parallel edges left after {budget} swaps",
                parallel.len()
            )));
        }
        attempts += 1;
        let f = rng.random_range(0..edges);
        let (ve, ce) = (edge_var[e], sockets[e]);
        let (vf, cf) = (edge_var[f], sockets[f]);
        if duplicate[f] || ce == cf || present.contains(&(ve, cf)) || present.contains(&(vf, ce)) {
            continue;
        }
        // e is a duplicate, so (ve, ce) stays present through its twin
        present.remove(&(vf, cf));
        present.insert((ve, cf));
        present.insert((vf, ce));
        sockets.swap(e, f);
        duplicate[e] = false;
        parallel.pop();
    }

    let mut checks_of_var = vec![Vec::new(); n];
    for e in 0..edges {
        checks_of_var[edge_var[e] as usize].push(sockets[e]);
    }
    let mut comp = Component::from_adjacency(&checks_of_var, m)?;
    comp.adjusted_check = adjusted;
    Ok(comp)
}

/// Both users' graphs on `n` shared state nodes: position `i` of user 1 and
/// position `i` of user 2 meet at state node `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    users: [Component; 2],
}

impl TannerGraph {
    pub fn new(users: [Component; 2]) -> Result<Self> {
        if users[0].n() != users[1].n() {
            return Err(Error::Construction(
                "users must share the block length".into(),
            ));
        }
        Ok(Self { users })
    }

    pub fn construct(ensembles: [&CodeEnsemble<f64>; 2], n: usize, seed: u64) -> Result<Self> {
        Self::new([
            construct(ensembles[0], n, seed, User::One)?,
            construct(ensembles[1], n, seed, User::Two)?,
        ])
    }

    pub fn n(&self) -> usize {
        self.users[0].n()
    }

    pub fn user(&self, user: User) -> &Component {
        &self.users[user.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{DegreeDistribution, Perspective, Side};

    fn regular(dv: u32, dc: u32) -> CodeEnsemble<f64> {
        CodeEnsemble::new(DegreeDistribution::variable_regular(dv).unwrap(), dc).unwrap()
    }

    #[test]
    fn regular_three_six() {
        let g = construct(&regular(3, 6), 12, 1, User::One).unwrap();
        assert_eq!(g.num_checks(), 6);
        assert_eq!(g.num_edges(), 36);
        assert!((0..12).all(|v| g.var_degree(v) == 3));
        assert!((0..6).all(|c| g.check_degree(c) == 6));
        assert_eq!(g.adjusted_check(), None);
        for v in 0..12 {
            let mut cs: Vec<usize> = g.var_edges(v).map(|e| g.edge_check(e)).collect();
            cs.dedup();
            assert_eq!(cs.len(), 3);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let e = regular(3, 6);
        assert_eq!(
            construct(&e, 600, 9, User::One).unwrap(),
            construct(&e, 600, 9, User::One).unwrap()
        );
        assert_ne!(
            construct(&e, 600, 9, User::One).unwrap(),
            construct(&e, 600, 10, User::One).unwrap()
        );
        assert_ne!(
            construct(&e, 600, 9, User::One).unwrap(),
            construct(&e, 600, 9, User::Two).unwrap()
        );
    }

    #[test]
    fn irregular_fractions_and_adjustment() {
        let l = DegreeDistribution::new(
            [(2, 0.3), (3, 0.3), (20, 0.4)],
            Perspective::Edge,
            Side::Variable,
        )
        .unwrap();
        let e = CodeEnsemble::new(l.clone(), 7).unwrap();
        for n in [1000usize, 10_000] {
            let g = construct(&e, n, 3, User::One).unwrap();
            let f = g.edge_degree_fractions();
            for (d, w) in l.iter() {
                assert!(
                    (f[d as usize] - w).abs() <= 2.0 / (n as f64).sqrt(),
                    "n={n} d={d}"
                );
            }
            let total: usize = (0..g.num_checks()).map(|c| g.check_degree(c)).sum();
            assert_eq!(total, g.num_edges());
            let off: Vec<usize> = (0..g.num_checks())
                .filter(|&c| g.check_degree(c) != 7)
                .collect();
            assert!(off.len() <= 1);
            if let Some((c, d)) = g.adjusted_check() {
                assert_eq!(off, vec![c]);
                assert_eq!(g.check_degree(c), d);
                assert!((d as isize - 7).abs() <= 4);
            }
        }
    }

    #[test]
    fn adjacency_export() {
        let g = construct(&regular(3, 6), 12, 5, User::One).unwrap();
        let mut buf = Vec::new();
        g.write_adjacency(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        for line in text.lines() {
            let v: Vec<u32> = line.split(' ').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 6);
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn dense_degrees_fail_cleanly() {
        // degree-20 variables on a 10-variable block cannot avoid parallel edges
        let l = DegreeDistribution::new([(20, 1.0)], Perspective::Edge, Side::Variable).unwrap();
        let e = CodeEnsemble::new(l, 40).unwrap();
        assert!(matches!(
            construct(&e, 10, 1, User::One),
            Err(Error::Construction(_))
        ));
    }
}
