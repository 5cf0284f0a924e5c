//! Finite-length Monte Carlo validation of a design.
//!
//! Randomness is counter based: every frame draws from its own ChaCha
//! stream keyed by `(seed, frame index)`, frames are processed in fixed-size
//! batches and per-frame results are summed as integers, so results do not
//! depend on the number of worker threads.

pub mod decoder;
pub mod gf2;
pub mod graph;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use decoder::{DecoderConfig, JointDecoder};
pub use gf2::Encoder;
pub use graph::{construct, Component, TannerGraph};

use crate::channel::ChannelParams;
use crate::{Error, Result, User};

const DOMAIN_PATTERN: u64 = 2;
const DOMAIN_NOISE: u64 = 3;
const DOMAIN_CODEWORD: u64 = 4;
/// Frames decoded between two checks of the stopping rule.
pub const BATCH: usize = 32;

/// ChaCha8 keyed by `seed` and a domain tag, positioned on stream `index`.
pub(crate) fn rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(index);
    r
}

/// What the two users transmit in each frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CodewordPolicy {
    /// User 1 sends all-ones; user 2 sends a fixed balanced ±1 pattern and
    /// is decoded relative to it.
    #[default]
    AllOneHalf,
    /// Both users send uniformly random codewords of their codes.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopRule {
    /// Stop once both users have at least this many bit errors.
    pub min_bit_errors: Option<u64>,
    pub max_frames: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameResult {
    pub bit_errors: [usize; 2],
    pub frame_error: [bool; 2],
    /// Zero syndrome but wrong bits.
    pub undetected: [bool; 2],
    pub iterations_used: usize,
    /// Frame index; with the run seed it reproduces the frame.
    pub seed: u64,
}

/// BER/FER of one user at one offset.
#[derive(Clone, Debug, PartialEq)]
pub struct BerRow {
    pub offset_db: f64,
    pub user: u8,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub undetected: u64,
    pub ber: f64,
    pub fer: f64,
    pub avg_iters: f64,
}

/// Balanced ±1 word: the first half `+1`, the rest `-1`, shuffled by `seed`.
pub fn type_one_half(n: usize, seed: u64) -> Vec<i8> {
    let mut w: Vec<i8> = (0..n)
        .map(|i| if i < n.div_ceil(2) { 1 } else { -1 })
        .collect();
    w.shuffle(&mut rng(seed, DOMAIN_PATTERN, 0));
    w
}

fn bpsk(bits: &[bool]) -> Vec<i8> {
    bits.iter().map(|&b| if b { -1 } else { 1 }).collect()
}

/// `sqrt(P1) x1 + sqrt(P2) x2 + w`.
pub fn channel_output(x: [&[i8]; 2], params: &ChannelParams<f64>, noise: &[f64]) -> Vec<f64> {
    let (a1, a2) = (params.p1().sqrt(), params.p2().sqrt());
    x[0].iter()
        .zip(x[1])
        .zip(noise)
        .map(|((&u, &v), &w)| a1 * u as f64 + a2 * v as f64 + w)
        .collect()
}

fn noise(seed: u64, frame: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed, DOMAIN_NOISE, frame);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

fn frame_result(
    dec: &JointDecoder<'_, f64>,
    transmitted: Option<[&[i8]; 2]>,
    iterations: usize,
    frame: u64,
) -> FrameResult {
    let mut r = FrameResult {
        iterations_used: iterations,
        seed: frame,
        ..Default::default()
    };
    for user in User::BOTH {
        let j = user.index();
        r.bit_errors[j] = match transmitted {
            None => dec.flipped(user).iter().filter(|&&f| f).count(),
            Some(x) => dec
                .decisions(user)
                .iter()
                .zip(x[j])
                .filter(|(a, b)| a != b)
                .count(),
        };
        r.frame_error[j] = r.bit_errors[j] > 0;
        r.undetected[j] = r.frame_error[j] && dec.syndrome_is_zero(user);
    }
    r
}

/// Plain joint BP on `y`; errors are counted against `transmitted`.
pub fn decode_joint(
    graph: &TannerGraph,
    y: &[f64],
    params: &ChannelParams<f64>,
    cfg: DecoderConfig,
    transmitted: [&[i8]; 2],
) -> ([Vec<i8>; 2], FrameResult) {
    let mut dec = JointDecoder::<f64>::new(graph, params, cfg);
    dec.reset(y, None);
    let it = dec.run();
    let r = frame_result(&dec, Some(transmitted), it, 0);
    ([dec.decisions(User::One), dec.decisions(User::Two)], r)
}

struct Harness<'a> {
    graph: &'a TannerGraph,
    cfg: DecoderConfig,
    seed: u64,
    pattern: Vec<i8>,
    encoders: Option<[Encoder; 2]>,
}

impl<'a> Harness<'a> {
    fn new(graph: &'a TannerGraph, cfg: DecoderConfig, seed: u64, policy: CodewordPolicy) -> Self {
        let encoders = match policy {
            CodewordPolicy::AllOneHalf => None,
            CodewordPolicy::Random => Some([
                Encoder::new(graph.user(User::One)),
                Encoder::new(graph.user(User::Two)),
            ]),
        };
        Self {
            graph,
            cfg,
            seed,
            pattern: type_one_half(graph.n(), seed),
            encoders,
        }
    }

    fn frame(
        &self,
        dec: &mut JointDecoder<'_, f64>,
        params: &ChannelParams<f64>,
        frame: u64,
    ) -> FrameResult {
        let n = self.graph.n();
        let w = noise(self.seed, frame, n);
        match &self.encoders {
            None => {
                let ones = vec![1i8; n];
                let x = [ones.as_slice(), self.pattern.as_slice()];
                let y = channel_output(x, params, &w);
                dec.reset(&y, Some(x));
                let it = dec.run();
                frame_result(dec, None, it, frame)
            }
            Some(enc) => {
                let mut r = rng(self.seed, DOMAIN_CODEWORD, frame);
                let x1 = bpsk(&enc[0].random_codeword(&mut r));
                let x2 = bpsk(&enc[1].random_codeword(&mut r));
                let x = [x1.as_slice(), x2.as_slice()];
                let y = channel_output(x, params, &w);
                dec.reset(&y, None);
                let it = dec.run();
                frame_result(dec, Some(x), it, frame)
            }
        }
    }

    fn run(&self, params: &ChannelParams<f64>, stop: StopRule) -> Vec<FrameResult> {
        let mut out: Vec<FrameResult> = Vec::new();
        let mut errors = [0u64; 2];
        while (out.len() as u64) < stop.max_frames {
            if let Some(k) = stop.min_bit_errors {
                if !out.is_empty() && errors.iter().all(|&e| e >= k) {
                    break;
                }
            }
            let start = out.len() as u64;
            let end = (start + BATCH as u64).min(stop.max_frames);
            let batch: Vec<FrameResult> = (start..end)
                .into_par_iter()
                .map_init(
                    || JointDecoder::<f64>::new(self.graph, params, self.cfg),
                    |dec, f| self.frame(dec, params, f),
                )
                .collect();
            for r in &batch {
                errors[0] += r.bit_errors[0] as u64;
                errors[1] += r.bit_errors[1] as u64;
            }
            out.extend(batch);
        }
        out
    }
}

fn summarize(offset_db: f64, n: usize, frames: &[FrameResult]) -> Vec<BerRow> {
    User::BOTH
        .iter()
        .map(|&u| {
            let j = u.index();
            let f = frames.len() as u64;
            let bits = f * n as u64;
            let bit_errors: u64 = frames.iter().map(|r| r.bit_errors[j] as u64).sum();
            let frame_errors = frames.iter().filter(|r| r.frame_error[j]).count() as u64;
            let undetected = frames.iter().filter(|r| r.undetected[j]).count() as u64;
            let iters: u64 = frames.iter().map(|r| r.iterations_used as u64).sum();
            let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            BerRow {
                offset_db,
                user: u.number(),
                frames: f,
                bits,
                bit_errors,
                frame_errors,
                undetected,
                ber: ratio(bit_errors, bits),
                fer: ratio(frame_errors, f),
                avg_iters: ratio(iters, f),
            }
        })
        .collect()
}

pub(crate) fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug)]
pub struct BerConfig {
    pub offsets_db: Vec<f64>,
    pub decoder: DecoderConfig,
    pub stop: StopRule,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub policy: CodewordPolicy,
}

/// BER table over common dB offsets of both powers (two rows per offset).
pub fn run_ber(
    graph: &TannerGraph,
    design_params: &ChannelParams<f64>,
    cfg: &BerConfig,
) -> Result<Vec<BerRow>> {
    let harness = Harness::new(graph, cfg.decoder, cfg.seed, cfg.policy);
    with_workers(cfg.workers, || {
        cfg.offsets_db
            .iter()
            .flat_map(|&off| {
                let params = design_params.offset_db(off);
                summarize(off, graph.n(), &harness.run(&params, cfg.stop))
            })
            .collect()
    })
}

/// Matched-noise comparison of the two codeword policies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Proposition1Report {
    pub frames: u64,
    pub bits_per_arm: u64,
    /// Bit errors per user with the all-one / one-half policy.
    pub errors_policy: [u64; 2],
    /// Bit errors per user with random encoded codewords.
    pub errors_random: [u64; 2],
    pub ber_policy: f64,
    pub ber_random: f64,
    /// Two-proportion z-statistic over both users' bits.
    pub z: f64,
    /// Per-user z-statistics.
    pub z_user: [f64; 2],
    /// Failed user-frames per arm.
    pub frame_errors_policy: u64,
    pub frame_errors_random: u64,
    /// Two-proportion z over user-frames; insensitive to error bursts.
    pub z_frame: f64,
    /// Welch statistic on per-frame bit-error counts (both users summed);
    /// treats frames, not bits, as the independent units.
    pub z_cluster: f64,
    /// GF(2) rank of each parity-check matrix.
    pub rank: [usize; 2],
}

/// Two-proportion z-statistic with the pooled variance; 0 when the pooled
/// rate is 0 or 1.
pub fn two_proportion_z(e1: u64, n1: u64, e2: u64, n2: u64) -> f64 {
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let (p1, p2) = (e1 as f64 / n1 as f64, e2 as f64 / n2 as f64);
    let p = (e1 + e2) as f64 / (n1 + n2) as f64;
    let var = p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var <= 0.0 {
        0.0
    } else {
        (p1 - p2) / var.sqrt()
    }
}

/// Welch z for the difference of two sample means.
pub fn welch_z(a: &[f64], b: &[f64]) -> f64 {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (
            m,
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0),
            n,
        )
    };
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let ((ma, va, na), (mb, vb, nb)) = (stats(a), stats(b));
    let se = (va / na + vb / nb).sqrt();
    if se > 0.0 {
        (ma - mb) / se
    } else {
        0.0
    }
}

/// Runs `frames` frames under both codeword policies with identical noise
/// and compares the bit error rates.
pub fn proposition1_check(
    graph: &TannerGraph,
    params: &ChannelParams<f64>,
    decoder: DecoderConfig,
    frames: u64,
    seed: u64,
    workers: usize,
) -> Result<Proposition1Report> {
    if frames == 0 {
        return Ok(Proposition1Report::default());
    }
    let stop = StopRule {
        min_bit_errors: None,
        max_frames: frames,
    };
    let a = Harness::new(graph, decoder, seed, CodewordPolicy::AllOneHalf);
    let b = Harness::new(graph, decoder, seed, CodewordPolicy::Random);
    let (ra, rb) = with_workers(workers, || (a.run(params, stop), b.run(params, stop)))?;
    let count =
        |rs: &[FrameResult], j: usize| rs.iter().map(|r| r.bit_errors[j] as u64).sum::<u64>();
    let errors_policy = [count(&ra, 0), count(&ra, 1)];
    let errors_random = [count(&rb, 0), count(&rb, 1)];
    let bits = frames * graph.n() as u64;
    let failed = |rs: &[FrameResult]| {
        rs.iter()
            .map(|r| r.frame_error.iter().filter(|&&f| f).count() as u64)
            .sum::<u64>()
    };
    let (fa, fb) = (failed(&ra), failed(&rb));
    let per_frame = |rs: &[FrameResult]| {
        rs.iter()
            .map(|r| (r.bit_errors[0] + r.bit_errors[1]) as f64)
            .collect::<Vec<_>>()
    };
    let enc = b.encoders.as_ref().expect("random policy builds encoders");
    let (ea, eb) = (
        errors_policy[0] + errors_policy[1],
        errors_random[0] + errors_random[1],
    );
    Ok(Proposition1Report {
        frames,
        bits_per_arm: 2 * bits,
        errors_policy,
        errors_random,
        ber_policy: ea as f64 / (2 * bits) as f64,
        ber_random: eb as f64 / (2 * bits) as f64,
        z: two_proportion_z(ea, 2 * bits, eb, 2 * bits),
        z_user: [
            two_proportion_z(errors_policy[0], bits, errors_random[0], bits),
            two_proportion_z(errors_policy[1], bits, errors_random[1], bits),
        ],
        frame_errors_policy: fa,
        frame_errors_random: fb,
        z_frame: two_proportion_z(fa, 2 * frames, fb, 2 * frames),
        z_cluster: welch_z(&per_frame(&ra), &per_frame(&rb)),
        rank: [enc[0].rank(), enc[1].rank()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{CodeEnsemble, DegreeDistribution};

    fn graph(n: usize, dc: u32) -> TannerGraph {
        let e = CodeEnsemble::new(DegreeDistribution::variable_regular(3).unwrap(), dc).unwrap();
        TannerGraph::construct([&e, &e], n, 11).unwrap()
    }

    #[test]
    fn pattern_is_balanced_and_seeded() {
        let w = type_one_half(1001, 3);
        assert_eq!(w.iter().filter(|&&x| x == 1).count(), 501);
        assert_eq!(w, type_one_half(1001, 3));
        assert_ne!(w, type_one_half(1001, 4));
    }

    #[test]
    fn noiseless_all_one_decodes_without_errors() {
        let g = graph(120, 6);
        let p = ChannelParams::new(1.5, 1.0).unwrap();
        let ones = vec![1i8; 120];
        let y = channel_output([&ones, &ones], &p, &vec![0.0; 120]);
        let (d, r) = decode_joint(&g, &y, &p, DecoderConfig::default(), [&ones, &ones]);
        // zero syndrome after the first iteration, confirmed by the second
        assert_eq!(r.iterations_used, 2);
        assert_eq!(r.bit_errors, [0, 0]);
        assert_eq!(d[0], ones);
    }

    #[test]
    fn z_statistic() {
        assert_eq!(two_proportion_z(0, 100, 0, 100), 0.0);
        let z = two_proportion_z(60, 1000, 40, 1000);
        let p: f64 = 0.05;
        assert!((z - 0.02 / (p * 0.95 * 0.002).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn welch_statistic() {
        assert_eq!(welch_z(&[], &[1.0]), 0.0);
        assert_eq!(welch_z(&[2.0, 2.0], &[2.0, 2.0]), 0.0);
        // means 2 and 1, variances 1 and 1, three samples each
        let z = welch_z(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]);
        assert!((z - 1.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_proposition_report() {
        let g = graph(60, 6);
        let p = ChannelParams::new(1.5, 1.0).unwrap();
        let r = proposition1_check(&g, &p, DecoderConfig::default(), 0, 1, 1).unwrap();
        assert_eq!(r, Proposition1Report::default());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let g = graph(300, 6);
        let p = ChannelParams::new(1.5, 1.0).unwrap();
        let mut cfg = BerConfig {
            offsets_db: vec![-2.0, 0.0],
            decoder: DecoderConfig {
                max_iters: 20,
                ..Default::default()
            },
            stop: StopRule {
                min_bit_errors: Some(200),
                max_frames: 100,
            },
            seed: 5,
            workers: 1,
            policy: CodewordPolicy::AllOneHalf,
        };
        let a = run_ber(&g, &p, &cfg).unwrap();
        cfg.workers = 3;
        assert_eq!(a, run_ber(&g, &p, &cfg).unwrap());
        cfg.policy = CodewordPolicy::Random;
        let b = run_ber(&g, &p, &cfg).unwrap();
        cfg.workers = 1;
        assert_eq!(b, run_ber(&g, &p, &cfg).unwrap());
    }
}
