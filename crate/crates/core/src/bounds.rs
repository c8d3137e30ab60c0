//! Closed-form estimates certified by the high-temperature expansion.
//!
//! Everything here is a pure function of a [`BoundsContext`]: the norm
//! parameter `r`, the weight base `M`, the block size `s`, `||J||_r`, the body
//! bound `D` and the range `S`. Derived: `eps = M e^{-r}`, `c = 1/sqrt(eps) - 1`,
//! `rho = 2 s ||J||_r / c^2`.

use serde::Serialize;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{domain, Result};
use crate::lattice::{Blocking, SiteSet};

/// Stop the inner geometric sums once a term drops below this fraction of the
/// partial sum.
const SERIES_CUTOFF: f64 = 1e-17;

/// Bisection stops when the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsContext {
    pub r: f64,
    pub m: f64,
    pub s: usize,
    pub norm: f64,
    pub d: usize,
    pub range: usize,
}

impl BoundsContext {
    pub fn new(r: f64, m: f64, s: usize, norm: f64, d: usize, range: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return domain(format!("norm parameter r must be positive, got {r}"));
        }
        if !(m > 1.0 && m < r.exp()) {
            return domain(format!(
                "weight base M = {m} must lie in (1, e^r) = (1, {})",
                r.exp()
            ));
        }
        if s == 0 {
            return domain("block size must be positive");
        }
        if !(norm >= 0.0) || !norm.is_finite() {
            return domain(format!(
                "||J||_r must be finite and nonnegative, got {norm}"
            ));
        }
        if d == 0 {
            return domain("body bound D must be positive");
        }
        Ok(Self {
            r,
            m,
            s,
            norm,
            d,
            range,
        })
    }

    pub fn eps(&self) -> f64 {
        self.m * (-self.r).exp()
    }

    pub fn c(&self) -> f64 {
        1.0 / self.eps().sqrt() - 1.0
    }

    /// `2 s ||J||_r`, the link weight scale.
    fn scale(&self) -> f64 {
        2.0 * self.s as f64 * self.norm
    }

    pub fn rho(&self) -> f64 {
        self.scale() / (self.c() * self.c())
    }

    /// `log(M) c^2 / (2 s (c + log M))`.
    pub fn threshold(&self) -> f64 {
        let c = self.c();
        let lm = self.m.ln();
        lm * c * c / (2.0 * self.s as f64 * (c + lm))
    }

    pub fn passes_threshold(&self) -> bool {
        self.norm <= self.threshold()
    }

    /// `sum_n c rho^n = c rho / (1 - rho)`, infinite when `rho >= 1`.
    pub fn rooted_series_bound(&self) -> f64 {
        let rho = self.rho();
        if rho >= 1.0 {
            f64::INFINITY
        } else {
            self.c() * rho / (1.0 - rho)
        }
    }

    /// `sum_{m >= max(1, k)} C(m, k) eps^m`, truncated once terms are negligible.
    pub fn binomial_tail(&self, k: usize) -> f64 {
        let eps = self.eps();
        let start = k.max(1);
        // C(start, k) eps^start
        let mut term = (ln_binomial(start, k) + start as f64 * eps.ln()).exp();
        let mut sum = 0.0;
        let mut m = start;
        loop {
            sum += term;
            // C(m+1, k) / C(m, k) = (m + 1) / (m + 1 - k)
            term *= eps * (m + 1) as f64 / (m + 1 - k) as f64;
            m += 1;
            if term <= SERIES_CUTOFF * sum {
                break;
            }
        }
        sum
    }

    /// `a_bar_1 ..= a_bar_n` by the recursion with equality.
    pub fn a_bar_table(&self, n_max: usize) -> Vec<f64> {
        let scale = self.scale();
        let tails: Vec<f64> = (0..n_max).map(|k| self.binomial_tail(k)).collect();
        let mut a = vec![0.0; n_max + 1];
        // comp[k][j]: sum over compositions n_1 + .. + n_k = j of prod a_bar
        let mut comp = vec![vec![0.0; n_max]; n_max];
        if n_max > 0 {
            comp[0][0] = 1.0;
        }
        for n in 1..=n_max {
            let j = n - 1;
            let mut total = 0.0;
            for k in 0..=j {
                total += comp[k][j] * tails[k];
            }
            a[n] = scale * total;
            // a_bar_n now known: extend compositions reaching total n
            if n < n_max {
                for k in 1..=n {
                    let mut sum = 0.0;
                    for i in 1..=n {
                        sum += a[i] * comp[k - 1][n - i];
                    }
                    comp[k][n] = sum;
                }
            }
        }
        a.remove(0);
        a
    }

    pub fn a_bar(&self, n: usize) -> Result<ABar> {
        if n == 0 {
            return domain("a_bar is defined for n >= 1");
        }
        let rho = self.rho();
        Ok(ABar {
            n,
            recursion: self.a_bar_table(n)[n - 1],
            closed: self.c() * rho.powi(n as i32),
            closed_valid: rho < 1.0,
        })
    }

    /// Solve the generating-function identity
    /// `w = z1 eps (1 + w) / (1 - eps (1 + w))`, `z1 = 2 s ||J||_r z`, on `[0, c]`.
    pub fn generating_check(&self, z: f64, n_terms: usize) -> Result<GeneratingCheck> {
        if !(z >= 0.0) {
            return domain(format!("z must be nonnegative, got {z}"));
        }
        let eps = self.eps();
        let c = self.c();
        let z1 = self.scale() * z;
        if z1 > c * c {
            return domain(format!(
                "z = {z} beyond the radius {}",
                if self.scale() > 0.0 {
                    c * c / self.scale()
                } else {
                    f64::INFINITY
                }
            ));
        }
        let inverse = |w: f64| w * (1.0 - eps * (1.0 + w)) / (eps * (1.0 + w));
        let (mut lo, mut hi) = (0.0, c);
        if z1 == 0.0 {
            hi = 0.0;
        }
        while hi - lo > BISECTION_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if inverse(mid) < z1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = 0.5 * (lo + hi);
        let residual = (w - z1 * eps * (1.0 + w) / (1.0 - eps * (1.0 + w))).abs();
        let a = self.a_bar_table(n_terms);
        let mut partial = Vec::with_capacity(n_terms);
        let mut acc = 0.0;
        let mut zn = 1.0;
        for v in a {
            zn *= z;
            acc += v * zn;
            partial.push(acc);
        }
        Ok(GeneratingCheck {
            z,
            w,
            residual,
            partial_sums: partial,
        })
    }

    /// `eps(P) = c rho^{P/D} / (1 - rho)`.
    pub fn eps_tail(&self, p: f64) -> Result<f64> {
        Ok(self.ln_eps_tail(p)?.exp())
    }

    fn ln_eps_tail(&self, p: f64) -> Result<f64> {
        let rho = self.rho();
        if !(rho < 1.0) {
            return domain(format!("rho = {rho} is not below 1"));
        }
        if !(p >= 0.0) {
            return domain(format!("P must be nonnegative, got {p}"));
        }
        if rho == 0.0 {
            return Ok(if p == 0.0 {
                self.c().ln()
            } else {
                f64::NEG_INFINITY
            });
        }
        Ok(self.c().ln() + p / self.d as f64 * rho.ln() - (-rho).ln_1p())
    }

    /// Jacobian bound beyond the activation distance, evaluated in logs.
    pub fn band_bound(&self, w_len: usize, p: f64, q: f64, kc: f64) -> Result<BandBound> {
        if w_len == 0 || !(p > 0.0 && q > 0.0 && kc > 0.0) {
            return domain("band bound needs |W| >= 1 and positive P, Q, K");
        }
        let lm = self.m.ln();
        let d = self.d as f64;
        let prefactor = d * (self.m.ln() + lm.ln_1p());
        let first = self.ln_eps_tail(p)? - lm.ln();
        let second = log_add(self.ln_eps_tail(q)?, self.ln_eps_tail(kc)?)
            + (1.0 + p).ln()
            + d.ln()
            + (1.0 + p) * d * self.m.ln();
        let ln_bound = prefactor + log_add(first, second);
        Ok(BandBound {
            w_len,
            p,
            q,
            kc,
            value: ln_bound.exp(),
            ln_value: ln_bound,
            activation: self.range as f64 * (w_len as f64 * p + q * kc),
            distance: None,
        })
    }

    /// Band bound along `P = (l/2S)^alpha / |W|`, `Q = K = (l/2S)^beta`.
    pub fn subexp_profile(
        &self,
        w_len: usize,
        alpha: f64,
        beta: f64,
        ls: &[f64],
    ) -> Result<Vec<BandBound>> {
        if !(0.0 < alpha && alpha < beta && beta <= 0.5) {
            return domain(format!(
                "need 0 < alpha < beta <= 1/2, got alpha = {alpha}, beta = {beta}"
            ));
        }
        if self.range == 0 {
            return domain("range S must be positive");
        }
        ls.iter()
            .map(|&l| {
                if !(l > 0.0) {
                    return domain(format!("distance must be positive, got {l}"));
                }
                let x = l / (2.0 * self.range as f64);
                let p = x.powf(alpha) / w_len as f64;
                let q = x.powf(beta);
                let mut row = self.band_bound(w_len, p, q, q)?;
                row.distance = Some(l);
                Ok(row)
            })
            .collect()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ABar {
    pub n: usize,
    pub recursion: f64,
    pub closed: f64,
    pub closed_valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratingCheck {
    pub z: f64,
    pub w: f64,
    pub residual: f64,
    /// `sum_{n <= N} a_bar_n z^n` for `N = 1, 2, ..`.
    pub partial_sums: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandBound {
    pub w_len: usize,
    pub p: f64,
    pub q: f64,
    pub kc: f64,
    pub value: f64,
    pub ln_value: f64,
    /// `S (|W| P + Q K)`.
    pub activation: f64,
    /// Image distance this row was evaluated for, in a profile.
    pub distance: Option<f64>,
}

/// Smallest `C` with `bound(l) <= C exp(-l^alpha')` on every profile row.
pub fn domination_constant(profile: &[BandBound], alpha_prime: f64) -> f64 {
    profile
        .iter()
        .filter_map(|row| {
            row.distance
                .map(|l| (row.ln_value + l.powf(alpha_prime)).exp())
        })
        .fold(0.0, f64::max)
}

/// Distance after which the profile never increases again.
pub fn decreasing_from(profile: &[BandBound]) -> Option<f64> {
    let mut knee = profile.last()?.distance;
    for pair in profile.windows(2).rev() {
        if pair[1].ln_value <= pair[0].ln_value {
            knee = pair[0].distance;
        } else {
            break;
        }
    }
    knee
}

/// `n(E)`: supports among `supports` within image distance `E` of `z`.
pub fn count_supports<'a>(
    blocking: &Blocking,
    z: &SiteSet,
    e: usize,
    supports: impl IntoIterator<Item = &'a SiteSet>,
) -> Result<usize> {
    let image = blocking.image_support(z)?;
    if image.len() != z.len() {
        return domain("Z must be a set of image sites");
    }
    let mut n = 0;
    for w in supports {
        if blocking.image_distance(w, z)? <= e {
            n += 1;
        }
    }
    Ok(n)
}

/// Least-squares fit of `log y = log C + k log x` over points with `x, y > 0`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return domain("need two positive points for a power-law fit");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return domain("power-law fit needs distinct abscissae");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let k = sxy / sxx;
    Ok(((my - k * mx).exp(), k))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesSum {
    pub alpha: f64,
    pub d: usize,
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// `sum_{n >= 0} exp(-n^alpha) (n+1)^d`, summed until a rigorous tail bound
/// drops below `tolerance`.
///
/// For `N` beyond the point where the summand decreases,
/// `sum_{n >= N} f(n) <= f(N) + int_N^inf f <= f(N) + 2^d Gamma((d+1)/alpha, N^alpha) / alpha`.
pub fn linearization_series(alpha: f64, d: usize, tolerance: f64) -> Result<SeriesSum> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if !(tolerance > 0.0) {
        return domain("tolerance must be positive");
    }
    let df = d as f64;
    let f = |n: f64| (-n.powf(alpha)).exp() * (n + 1.0).powi(d as i32);
    // f decreases once alpha x^{alpha-1} (x+1) > d; x^alpha alpha > d suffices
    let monotone_from = (df / alpha).powf(1.0 / alpha).ceil().max(1.0);
    let a = (df + 1.0) / alpha;
    let ln_scale = df * std::f64::consts::LN_2 - alpha.ln() + ln_gamma(a);
    let tail = |n: f64| f(n) + (ln_scale).exp() * gamma_ur(a, n.powf(alpha));
    // Neumaier summation
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut n = 0usize;
    loop {
        let x = f(n as f64);
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
        n += 1;
        if n.is_multiple_of(4096) && n as f64 >= monotone_from {
            let tb = tail(n as f64);
            if tb < tolerance {
                return Ok(SeriesSum {
                    alpha,
                    d,
                    value: sum + comp,
                    terms: n,
                    tail_bound: tb,
                });
            }
        }
        if n > 1usize << 36 {
            return domain("linearization series did not reach the tail tolerance");
        }
    }
}

/// Smallest `C` with `|value| <= C exp(-l^alpha)` over measured `(l, value)` pairs.
pub fn decay_constant(entries: &[(usize, f64)], alpha: f64) -> f64 {
    entries
        .iter()
        .map(|&(l, v)| v.abs() * (l as f64).powf(alpha).exp())
        .fold(0.0, f64::max)
}

/// Smallest `C` with `#{W : n <= l(W, Z) < n + 1} <= C (n+1)^d` over the shells.
pub fn shell_constant(shell_counts: &[usize], d: usize) -> f64 {
    shell_counts
        .iter()
        .enumerate()
        .map(|(n, &k)| k as f64 / ((n + 1) as f64).powi(d as i32))
        .fold(0.0, f64::max)
}

/// Linearization majorant `||K||_inf * C * series` with the calibration used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearizationBound {
    pub direction_sup: f64,
    pub fitted_constant: f64,
    pub series: SeriesSum,
    pub value: f64,
}

pub fn linearization_bound(
    direction_sup: f64,
    fitted_constant: f64,
    series: SeriesSum,
) -> Result<LinearizationBound> {
    if !(direction_sup >= 0.0) || !(fitted_constant >= 0.0) {
        return domain("linearization bound needs nonnegative inputs");
    }
    Ok(LinearizationBound {
        direction_sup,
        fitted_constant,
        series,
        value: direction_sup * fitted_constant * series.value,
    })
}
