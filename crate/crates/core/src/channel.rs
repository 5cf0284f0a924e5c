//! The two-user Gaussian multiple access channel with BPSK inputs and unit
//! noise variance: `y = sqrt(P1) x1 + sqrt(P2) x2 + w`.

use crate::quadrature::gauss_hermite;
use crate::{Error, Real, Result, User};

/// Power pair of the two users. Noise variance is fixed at one, so the
/// powers double as per-user SNRs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams<T> {
    p1: T,
    p2: T,
}

impl<T: Real> ChannelParams<T> {
    pub fn new(p1: T, p2: T) -> Result<Self> {
        for p in [p1, p2] {
            if !p.is_finite() || p < T::zero() {
                return Err(Error::Domain(format!(
                    "power must be finite and non-negative, got {p}"
                )));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn p1(&self) -> T {
        self.p1
    }

    pub fn p2(&self) -> T {
        self.p2
    }

    pub fn power(&self, user: User) -> T {
        match user {
            User::One => self.p1,
            User::Two => self.p2,
        }
    }

    pub fn amplitude(&self, user: User) -> T {
        self.power(user).sqrt()
    }

    /// Both powers scaled by the common factor `10^(offset_db/10)`.
    pub fn offset_db(&self, offset_db: T) -> Self {
        let f = T::lit(10.0).powf(offset_db / T::lit(10.0));
        Self {
            p1: self.p1 * f,
            p2: self.p2 * f,
        }
    }

    /// Parameters with the users' roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

/// Noiseless superposition plus the supplied noise sample.
#[inline]
pub fn transmit<T: Real>(x1: T, x2: T, params: &ChannelParams<T>, noise: T) -> T {
    params.amplitude(User::One) * x1 + params.amplitude(User::Two) * x2 + noise
}

/// Conditional density `p(y | x1, x2)` for unit-variance noise.
pub fn density<T: Real>(y: T, x1: T, x2: T, params: &ChannelParams<T>) -> T {
    let d = y - transmit(x1, x2, params, T::zero());
    (-(d * d) / T::lit(2.0)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

/// State-node message towards `target`: the LLR of the target user's bit
/// given the channel output `y` and the other user's variable-to-state
/// message `vs_other`.
///
/// The four Gaussian exponents are combined with two log-sum-exp reductions.
/// The rule is odd under `(y, vs) -> (-y, -vs)`, so it is evaluated on the
/// half-plane `y >= 0` and mirrored, which makes the antisymmetry exact.
#[inline]
pub fn state_to_variable<T: Real>(y: T, vs_other: T, params: &ChannelParams<T>, target: User) -> T {
    if y < T::zero() || (y == T::zero() && vs_other < T::zero()) {
        return -state_to_variable_raw(-y, -vs_other, params, target);
    }
    state_to_variable_raw(y, vs_other, params, target)
}

#[inline]
fn state_to_variable_raw<T: Real>(y: T, vs: T, params: &ChannelParams<T>, target: User) -> T {
    let t = params.amplitude(target);
    let o = params.amplitude(target.other());
    let half = T::lit(0.5);
    let e = |m: T| -half * (y - m) * (y - m);
    // numerator: target bit +1; denominator: target bit -1.
    // The `+ vs` term carries the other user's +1 hypothesis.
    let num = (e(t + o) + vs).log_add_exp(e(t - o));
    let den = (e(-t + o) + vs).log_add_exp(e(-t - o));
    num - den
}

/// Mutual information `I(X1, X2; Y)` in bits for independent equiprobable
/// BPSK inputs: differential entropy of the four-component Gaussian mixture
/// minus that of the noise.
///
/// Each mixture component is integrated with 120-node Gauss-Hermite
/// quadrature.
pub fn sum_capacity_bpsk<T: Real>(params: &ChannelParams<T>) -> T {
    let means = mixture_means(params);
    let gh = gauss_hermite(120);
    let mut h = T::zero();
    for &m in &means {
        h += gh.expect_normal(m, T::one(), |y| -log_mixture_density(y, &means));
    }
    let quarter = T::lit(0.25);
    let ln2 = T::lit(std::f64::consts::LN_2);
    let noise_entropy = T::lit(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
    (quarter * h - noise_entropy) / ln2
}

/// Same quantity by the trapezoid rule on `[-(a+b+8), a+b+8]` with the given
/// step. Slow; kept as an independent check of the quadrature route.
pub fn sum_capacity_bpsk_trapezoid(params: &ChannelParams<f64>, step: f64) -> f64 {
    let means = mixture_means(params);
    let half_width = params.amplitude(User::One) + params.amplitude(User::Two) + 8.0;
    let n = (2.0 * half_width / step).ceil() as usize;
    let h = 2.0 * half_width / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let y = -half_width + k as f64 * h;
        let lp = log_mixture_density(y, &means);
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * (-lp.exp() * lp);
    }
    let hy = acc * h;
    let noise_entropy = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    (hy - noise_entropy) / std::f64::consts::LN_2
}

fn mixture_means<T: Real>(params: &ChannelParams<T>) -> [T; 4] {
    let a = params.amplitude(User::One);
    let b = params.amplitude(User::Two);
    [a + b, a - b, -a + b, -a - b]
}

fn log_mixture_density<T: Real>(y: T, means: &[T; 4]) -> T {
    let half = T::lit(0.5);
    let lse = means
        .iter()
        .map(|&m| -half * (y - m) * (y - m))
        .fold(T::neg_infinity(), |acc, e| acc.log_add_exp(e));
    lse - T::lit(4.0).ln() - T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
}
