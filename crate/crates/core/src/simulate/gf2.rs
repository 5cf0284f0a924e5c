//! Systematic encoding from a sparse parity-check matrix by Gaussian
//! elimination over GF(2).

use rand::Rng;

use super::graph::Component;

/// Reduced row echelon form of `H`: codewords are fixed by their free
/// (non-pivot) positions.
#[derive(Clone, Debug)]
pub struct Encoder {
    n: usize,
    words: usize,
    /// One packed row per pivot, in RREF.
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

#[inline]
fn get(row: &[u64], c: usize) -> bool {
    row[c / 64] >> (c % 64) & 1 == 1
}

impl Encoder {
    pub fn new(h: &Component) -> Self {
        let n = h.n();
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = h
            .check_rows()
            .into_iter()
            .map(|vars| {
                let mut r = vec![0u64; words];
                for v in vars {
                    r[v as usize / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..n {
            let Some(p) = (rank..rows.len()).find(|&r| get(&rows[r], c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && get(row, c) {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rows.truncate(rank);
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let free = (0..n).filter(|&c| !is_pivot[c]).collect();
        Self {
            n,
            words,
            rows,
            pivots,
            free,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Code dimension `n - rank`.
    pub fn dimension(&self) -> usize {
        self.free.len()
    }

    /// Codeword with the given free bits (`info.len() == dimension()`).
    pub fn encode(&self, info: &[bool]) -> Vec<bool> {
        assert_eq!(info.len(), self.free.len(), "information length");
        let mut packed = vec![0u64; self.words];
        for (&c, &b) in self.free.iter().zip(info) {
            if b {
                packed[c / 64] |= 1 << (c % 64);
            }
        }
        let mut word = vec![false; self.n];
        for (&c, &b) in self.free.iter().zip(info) {
            word[c] = b;
        }
        // pivot bit = parity of the row over the free positions
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let parity = row
                .iter()
                .zip(&packed)
                .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
                & 1;
            word[p] = parity == 1;
        }
        word
    }

    /// Uniformly random codeword.
    pub fn random_codeword<R: Rng>(&self, rng: &mut R) -> Vec<bool> {
        let info: Vec<bool> = (0..self.free.len()).map(|_| rng.random()).collect();
        self.encode(&info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{CodeEnsemble, DegreeDistribution};
    use crate::simulate::graph::construct;
    use crate::User;
    use rand::SeedableRng;

    #[test]
    fn random_codewords_satisfy_every_check() {
        let e = CodeEnsemble::new(DegreeDistribution::variable_regular(3).unwrap(), 6).unwrap();
        let h = construct(&e, 300, 4, User::One).unwrap();
        let enc = Encoder::new(&h);
        assert!(enc.rank() <= h.num_checks());
        assert_eq!(enc.rank() + enc.dimension(), 300);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut ones = 0;
        for _ in 0..50 {
            let w = enc.random_codeword(&mut rng);
            assert!(h.syndrome_is_zero(&w));
            ones += w.iter().filter(|&&b| b).count();
        }
        let frac = ones as f64 / (50.0 * 300.0);
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
        assert!(enc
            .encode(&vec![false; enc.dimension()])
            .iter()
            .all(|&b| !b));
    }
}
