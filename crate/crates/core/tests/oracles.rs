//! Independent oracles for the EXIT-chart building blocks: Monte Carlo over
//! the exact message rules, and direct re-evaluation with the slow
//! quadrature J.

use gmac_ldpc::channel::{state_to_variable, ChannelParams};
use gmac_ldpc::degree::{DegreeDistribution, Perspective, Side};
use gmac_ldpc::exit::{exit_cv, exit_sv, exit_vc, exit_vs, f_mean, j_function, j_inverse, Branch};
use gmac_ldpc::User;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SAMPLES: usize = 200_000;

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

fn table_pairs() -> [ChannelParams<f64>; 2] {
    [
        ChannelParams::new(1.5, 1.0).unwrap(),
        ChannelParams::new(3.0, 1.0).unwrap(),
    ]
}

/// 1 - E[log2(1 + exp(-L))] over LLR samples conditioned on bit +1.
fn mi(llrs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for l in llrs {
        s += if l > 0.0 {
            (-l).exp().ln_1p()
        } else {
            -l + l.exp().ln_1p()
        };
        k += 1;
    }
    1.0 - s / (k as f64 * std::f64::consts::LN_2)
}

#[test]
fn j_matches_monte_carlo() {
    let z = normals(1, SAMPLES);
    for s in [0.3, 1.0, 2.0, 4.0] {
        let est = mi(z.iter().map(|z| s * s / 2.0 + s * z));
        let j = j_function(s).unwrap();
        assert!((est - j).abs() < 4e-3, "s {s}: {est} vs {j}");
    }
}

#[test]
fn f_means_match_monte_carlo() {
    let w = normals(2, SAMPLES);
    let z = normals(3, SAMPLES);
    for p in table_pairs() {
        for target in User::BOTH {
            let (at, ao) = (p.amplitude(target), p.amplitude(target.other()));
            for (branch, b) in [(Branch::Plus, 1.0), (Branch::Minus, -1.0)] {
                for mu in [0.0, 0.5, 2.0, 8.0] {
                    let sd = (2.0f64 * mu).sqrt();
                    let mean = w
                        .iter()
                        .zip(&z)
                        .map(|(w, z)| {
                            state_to_variable(at + b * ao + w, b * (mu + sd * z), &p, target)
                        })
                        .sum::<f64>()
                        / SAMPLES as f64;
                    let f = f_mean(mu, &p, target, branch);
                    assert!(
                        (mean - f).abs() < 0.03 * (1.0 + f.abs()),
                        "{target} {branch:?} mu {mu}: {mean} vs {f}"
                    );
                }
            }
        }
    }
}

#[test]
fn stronger_user_means_are_nonnegative() {
    for p in table_pairs() {
        for k in 0..200 {
            let mu = k as f64 * 0.25;
            for b in [Branch::Plus, Branch::Minus] {
                assert!(f_mean(mu, &p, User::One, b) >= 0.0);
            }
            // the weaker user's minus branch recovers once the other
            // user's message is informative
            if mu >= 4.0 {
                assert!(f_mean(mu, &p, User::Two, Branch::Minus) >= 0.0, "mu {mu}");
            }
        }
    }
}

#[test]
fn exit_sv_is_close_to_true_message_information() {
    let w = normals(4, SAMPLES);
    let z = normals(5, SAMPLES);
    for p in table_pairs() {
        for target in User::BOTH {
            let (at, ao) = (p.amplitude(target), p.amplitude(target.other()));
            for i_vs in [0.0, 0.5, 0.9, 0.999] {
                let s = j_inverse(i_vs).unwrap();
                let est = mi(w.iter().zip(&z).enumerate().map(|(k, (w, z))| {
                    let b = if k % 2 == 0 { 1.0 } else { -1.0 };
                    state_to_variable(at + b * ao + w, b * (s * s / 2.0 + s * z), &p, target)
                }));
                let ga = exit_sv(&p, target, i_vs);
                assert!(
                    (est - ga).abs() < 0.03,
                    "{target} i_vs {i_vs}: {est} vs {ga}"
                );
            }
        }
    }
}

fn lambda() -> DegreeDistribution<f64> {
    DegreeDistribution::new(
        [(2, 0.3), (3, 0.25), (9, 0.15), (30, 0.3)],
        Perspective::Edge,
        Side::Variable,
    )
    .unwrap()
}

#[test]
fn variable_and_check_charts_match_direct_evaluation() {
    let l = lambda();
    let jinv = |i: f64| j_inverse(i).unwrap();
    for &icv in &[0.05, 0.3, 0.6, 0.95] {
        for &isv in &[0.0, 0.2, 0.5] {
            let want: f64 = l
                .iter()
                .map(|(d, w)| {
                    w * j_function(((d - 1) as f64 * jinv(icv).powi(2) + jinv(isv).powi(2)).sqrt())
                        .unwrap()
                })
                .sum();
            assert!((exit_vc(&l, icv, isv) - want).abs() < 1e-7);
        }
        let node = l.edge_to_node().unwrap();
        let want: f64 = node
            .iter()
            .map(|(d, w)| w * j_function((d as f64).sqrt() * jinv(icv)).unwrap())
            .sum();
        assert!((exit_vs(&l, icv) - want).abs() < 1e-7);
    }
    for dc in [4, 7, 13] {
        for &ivc in &[0.1, 0.5, 0.9, 0.999] {
            let want = 1.0 - j_function(((dc - 1) as f64).sqrt() * jinv(1.0 - ivc)).unwrap();
            assert!((exit_cv(dc, ivc) - want).abs() < 1e-7);
        }
    }
}

#[test]
fn charts_are_monotone() {
    let l = lambda();
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    for w in grid.windows(2) {
        assert!(exit_vc(&l, w[1], 0.3) >= exit_vc(&l, w[0], 0.3));
        assert!(exit_vc(&l, 0.3, w[1]) >= exit_vc(&l, 0.3, w[0]));
        assert!(exit_vs(&l, w[1]) >= exit_vs(&l, w[0]));
        assert!(exit_cv(7, w[1]) >= exit_cv(7, w[0]));
        for p in table_pairs() {
            assert!(exit_sv(&p, User::One, w[1]) >= exit_sv(&p, User::One, w[0]) - 1e-12);
        }
    }
    // the weaker user's chart dips slightly before rising
    let p = ChannelParams::new(1.5, 1.0).unwrap();
    assert!(exit_sv(&p, User::Two, 0.01) < exit_sv(&p, User::Two, 0.0));
    assert!(exit_sv(&p, User::Two, 0.5) > exit_sv(&p, User::Two, 0.0));
}

// Both branches approach 2P: the constructive (plus) branch from above, the
// destructive (minus) branch from below.
#[test]
fn f_means_are_monotone_in_mu() {
    for p in table_pairs() {
        for u in User::BOTH {
            let f = |k: usize, b| f_mean(k as f64 * 0.1, &p, u, b);
            for k in 1..400 {
                assert!(
                    f(k, Branch::Plus) <= f(k - 1, Branch::Plus) + 1e-9,
                    "{u} plus mu {}",
                    k as f64 * 0.1
                );
                assert!(
                    f(k, Branch::Minus) >= f(k - 1, Branch::Minus) - 1e-9,
                    "{u} minus mu {}",
                    k as f64 * 0.1
                );
            }
            assert!(f(0, Branch::Plus) > 2.0 * p.power(u));
            assert!(f(0, Branch::Minus) < 2.0 * p.power(u));
        }
    }
}

fn gaussian_llrs(s: f64, seed: u64, n: usize) -> Vec<f64> {
    normals(seed, n)
        .into_iter()
        .map(|z| s * s / 2.0 + s * z)
        .collect()
}

#[test]
fn variable_node_matches_density_evolution_step() {
    // lambda(x) = x^2: two check messages plus the state message
    let (icv, isv) = (0.5, 0.3);
    let (scv, ssv) = (j_inverse(icv).unwrap(), j_inverse(isv).unwrap());
    let a = gaussian_llrs(scv, 6, SAMPLES);
    let b = gaussian_llrs(scv, 7, SAMPLES);
    let c = gaussian_llrs(ssv, 8, SAMPLES);
    let est = mi((0..SAMPLES).map(|k| a[k] + b[k] + c[k]));
    let l = DegreeDistribution::new([(3, 1.0)], Perspective::Edge, Side::Variable).unwrap();
    assert!((est - exit_vc(&l, icv, isv)).abs() < 0.01);
}

#[test]
fn check_node_matches_monte_carlo() {
    let dc = 6;
    let s = j_inverse(0.8).unwrap();
    let inputs: Vec<Vec<f64>> = (0..dc - 1)
        .map(|k| gaussian_llrs(s, 10 + k as u64, SAMPLES))
        .collect();
    let est = mi((0..SAMPLES).map(|n| {
        let prod: f64 = inputs.iter().map(|x| (x[n] / 2.0).tanh()).product();
        2.0 * prod.clamp(-1.0 + 1e-16, 1.0 - 1e-16).atanh()
    }));
    assert!(
        (est - exit_cv(dc, 0.8)).abs() < 0.01,
        "{est} {}",
        exit_cv(dc, 0.8)
    );
}

#[test]
fn node_combining_adds_information() {
    let l = lambda();
    for k in 1..100 {
        let i = k as f64 / 100.0;
        assert!(exit_vs(&l, i) >= i);
    }
}
