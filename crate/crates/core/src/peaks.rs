//! Peak detection on sampled traces and least-squares refinement of peak
//! centres.
//!
//! Detection smooths with a quadratic Savitzky-Golay filter, takes local
//! maxima of the smoothed trace (derivative sign changes) and keeps those
//! whose topographic prominence exceeds a fraction of the trace's range.
//! Each surviving peak is refined by fitting a Lorentzian plus offset with
//! Levenberg-Marquardt over the samples above its half-prominence level,
//! with a linear baseline absorbing the tails of neighbouring peaks; a
//! three-point parabola is the fallback.

use nalgebra::{SMatrix, SVector};

type Params = SVector<f64, 5>;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFinder {
    /// Half-width m of the (2m+1)-point smoothing window; 0 disables smoothing.
    pub smooth_half_width: usize,
    /// Minimum prominence as a fraction of max − min of the smoothed trace.
    pub min_prominence: f64,
}

impl Default for PeakFinder {
    fn default() -> Self {
        PeakFinder {
            smooth_half_width: 2,
            min_prominence: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Refined centre on the axis.
    pub center: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Quadratic Savitzky-Golay smoothing; the edges fall back to narrower windows.
pub fn savitzky_golay(y: &[f64], half_width: usize) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let m = half_width.min(i).min(n - 1 - i);
            if m == 0 {
                return y[i];
            }
            let mf = m as f64;
            let norm = (4.0 * mf * mf - 1.0) * (2.0 * mf + 3.0);
            (-(m as isize)..=m as isize)
                .map(|k| {
                    let kf = k as f64;
                    let c = 3.0 * (3.0 * mf * mf + 3.0 * mf - 1.0 - 5.0 * kf * kf) / norm;
                    c * y[(i as isize + k) as usize]
                })
                .sum()
        })
        .collect()
}

/// Prominence of the local maximum at `i`: height above the higher of the
/// two lowest points reached before meeting taller ground on either side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    for j in (0..i).rev() {
        if y[j] > h {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks sorted by axis position.
pub fn find_peaks(x: &[f64], y: &[f64], finder: &PeakFinder) -> Vec<Peak> {
    assert_eq!(x.len(), y.len());
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let s = savitzky_golay(y, finder.smooth_half_width);
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(lo.abs())) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if s[i] > s[i - 1] {
            // walk across a flat top
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[i] {
                j += 1;
            }
            if j + 1 < n && s[j + 1] < s[i] {
                let idx = (i + j) / 2;
                let prom = prominence(&s, idx);
                if prom >= finder.min_prominence * range {
                    peaks.push(Peak {
                        index: idx,
                        center: refine_center(x, &s, y, idx, prom),
                        height: s[idx],
                        prominence: prom,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn refine_center(x: &[f64], smooth: &[f64], raw: &[f64], idx: usize, prom: f64) -> f64 {
    let level = smooth[idx] - 0.5 * prom;
    let mut a = idx;
    while a > 0 && smooth[a - 1] >= level {
        a -= 1;
    }
    let mut b = idx;
    while b + 1 < smooth.len() && smooth[b + 1] >= level {
        b += 1;
    }
    // Widen tiny windows so the five-parameter fit is determined.
    while b - a < 6 && (a > 0 || b + 1 < smooth.len()) {
        a = a.saturating_sub(1);
        b = (b + 1).min(smooth.len() - 1);
    }
    // Extend into the wings, stopping at the lowest point on each side, so
    // the baseline slope is not traded against the centre.
    let span = b - a;
    let lowest = |r: std::ops::RangeInclusive<usize>| {
        r.min_by(|&i, &j| smooth[i].total_cmp(&smooth[j])).expect("non-empty range")
    };
    a = lowest(a.saturating_sub(span)..=a);
    b = lowest(b..=(b + span).min(smooth.len() - 1));
    let parabola = parabolic_center(x, smooth, idx);
    match fit_lorentzian(&x[a..=b], &raw[a..=b], parabola, 0.25 * (x[b] - x[a]).abs(), smooth[idx] - level, level) {
        Some(fit) if fit.center >= x[a].min(x[b]) && fit.center <= x[a].max(x[b]) => fit.center,
        _ => parabola,
    }
}

/// Vertex of the parabola through the three samples around `i`.
pub fn parabolic_center(x: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return x[i];
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a >= 0.0 || !a.is_finite() {
        return x1;
    }
    -b / (2.0 * a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    /// Baseline at the initial centre guess.
    pub offset: f64,
    /// Baseline slope per axis unit.
    pub baseline_slope: f64,
    pub rss: f64,
}

fn lorentzian(p: &Params, x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] / (1.0 + u * u) + p[3] + p[4] * x
}

/// Levenberg-Marquardt fit of `A / (1 + ((x − x₀)/w)²) + c + s·(x − x_g)`
/// where `x_g` is the initial centre guess.
pub fn fit_lorentzian(
    x: &[f64],
    y: &[f64],
    center: f64,
    half_width: f64,
    amplitude: f64,
    offset: f64,
) -> Option<LorentzianFit> {
    if x.len() < 5 || !(half_width > 0.0) {
        return None;
    }
    // Work in a centred, unit-scaled axis for conditioning.
    let x_scale = half_width;
    let y_scale = amplitude.abs().max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = x.iter().map(|&v| (v - center) / x_scale).collect();
    let ys: Vec<f64> = y.iter().map(|&v| v / y_scale).collect();
    let mut p = Params::from([amplitude / y_scale, 0.0, 1.0, offset / y_scale, 0.0]);
    let rss = |p: &Params| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&xi, &yi)| (yi - lorentzian(p, xi)).powi(2))
            .sum()
    };
    let mut cost = rss(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = Params::zeros();
        for (&xi, &yi) in xs.iter().zip(&ys) {
            let u = (xi - p[1]) / p[2];
            let den = 1.0 + u * u;
            let f = p[0] / den;
            let j = Params::from([
                1.0 / den,
                2.0 * f * u / (den * p[2]),
                2.0 * f * u * u / (den * p[2]),
                1.0,
                xi,
            ]);
            let r = yi - (f + p[3] + p[4] * xi);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for k in 0..5 {
                a[(k, k)] *= 1.0 + lambda;
            }
            let step = a.lu().solve(&jtr)?;
            let trial = p + step;
            if trial[2] <= 0.0 || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let c = rss(&trial);
            if c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-15 || step.norm() < 1e-13 {
                    return Some(unscale(p, cost, x_scale, y_scale, center));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(unscale(p, cost, x_scale, y_scale, center))
}

fn unscale(p: Params, rss: f64, xs: f64, ys: f64, x0: f64) -> LorentzianFit {
    LorentzianFit {
        amplitude: p[0] * ys,
        center: x0 + p[1] * xs,
        half_width: p[2].abs() * xs,
        offset: p[3] * ys,
        baseline_slope: p[4] * ys / xs,
        rss: rss * ys * ys,
    }
}
