//! Welch's unequal-variance t-test and the special functions behind its
//! p-value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
    /// Both samples constant and equal; t, p set by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("sample {which} has {n} values; need at least 2")]
    TooSmall { which: char, n: usize },
    #[error("sample {which} contains a non-finite value")]
    NotFinite { which: char },
    #[error("both samples are constant with different values; t is unbounded")]
    ZeroVarianceDistinctMeans,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, ss / (n - 1.0))
}

pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for (which, xs) in [('a', a), ('b', b)] {
        if xs.len() < 2 {
            return Err(StatsError::TooSmall { which, n: xs.len() });
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NotFinite { which });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(WelchResult {
                n_a: a.len(),
                n_b: b.len(),
                mean_a: ma,
                mean_b: mb,
                t: 0.0,
                df: na + nb - 2.0,
                p: 1.0,
                degenerate: true,
            });
        }
        return Err(StatsError::ZeroVarianceDistinctMeans);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchResult {
        n_a: a.len(),
        n_b: b.len(),
        mean_a: ma,
        mean_b: mb,
        t,
        df,
        p: student_t_two_tailed(t, df),
        degenerate: false,
    })
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    reg_inc_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast only on this side.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 10_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_known_points() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        // 10! = 3628800
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a.
        for x in [0.1, 0.37, 0.9] {
            assert!((reg_inc_beta(1.0, 1.0, x) - x).abs() < 1e-13);
            assert!((reg_inc_beta(3.0, 1.0, x) - x.powi(3)).abs() < 1e-13);
        }
    }

    #[test]
    fn cauchy_tail() {
        // df = 1 is Cauchy: P(|T| > t) = 1 - 2 atan(t) / pi.
        for t in [0.3, 1.0, 4.0] {
            let want = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_tailed(t, 1.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn small_example() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((r.t + 1.224_745).abs() < 1e-6);
        assert!((r.df - 4.0).abs() < 1e-12);
        // df = 4 has a closed form: P(|T| > t) = 1 - t(6 + t^2) / (4 + t^2)^(3/2).
        let t = r.t.abs();
        let want = 1.0 - t * (6.0 + t * t) / (4.0 + t * t).powf(1.5);
        assert!((r.p - want).abs() < 1e-10);
        assert!((r.p - 0.2879).abs() < 1e-4);
    }

    #[test]
    fn degenerate_samples() {
        let r = welch_t(&[5.0; 4], &[5.0; 3]).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.t, r.p, r.df), (0.0, 1.0, 5.0));
        assert!(matches!(welch_t(&[5.0; 4], &[6.0; 3]), Err(StatsError::ZeroVarianceDistinctMeans)));
        assert!(matches!(welch_t(&[1.0], &[1.0, 2.0]), Err(StatsError::TooSmall { which: 'a', n: 1 })));
        assert!(matches!(welch_t(&[1.0, f64::NAN], &[1.0, 2.0]), Err(StatsError::NotFinite { .. })));
    }
}
