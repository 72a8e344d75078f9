//! One-dimensional Maxwell-Boltzmann velocity averaging along the beam axis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};

pub const DEFAULT_POINTS: usize = 201;
pub const DEFAULT_SPAN_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
    GaussHermite,
}

/// Quadrature nodes `(velocity m/s, weight)` with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    nodes: Vec<(f64, f64)>,
}

impl VelocityGrid {
    /// Single node at rest; turns every average into a plain evaluation.
    pub fn stationary() -> Self {
        VelocityGrid {
            nodes: vec![(0.0, 1.0)],
        }
    }

    pub fn from_nodes(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::validation("velocity grid needs at least one node"));
        }
        if nodes.iter().any(|&(v, w)| !v.is_finite() || !(w >= 0.0)) {
            return Err(Error::validation("velocity grid weights must be >= 0"));
        }
        let total = compensated_sum(nodes.iter().map(|n| n.1));
        if !(total > 0.0) {
            return Err(Error::validation("velocity grid weights sum to zero"));
        }
        Ok(VelocityGrid {
            nodes: nodes.into_iter().map(|(v, w)| (v, w / total)).collect(),
        })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// One-dimensional thermal velocity spread σ_v = √(k_B T / m).
pub fn thermal_sigma(temperature: f64, mass: f64) -> f64 {
    (BOLTZMANN * temperature / mass).sqrt()
}

/// Trapezoid grid over ±`span_sigmas`·σ_v.
pub fn make_grid(
    temperature: f64,
    mass: f64,
    n_points: usize,
    span_sigmas: f64,
) -> Result<VelocityGrid> {
    make_grid_with(QuadratureRule::Trapezoid, temperature, mass, n_points, span_sigmas)
}

/// Velocity grid with the chosen rule. `span_sigmas` is ignored by Gauss-Hermite.
pub fn make_grid_with(
    rule: QuadratureRule,
    temperature: f64,
    mass: f64,
    n_points: usize,
    span_sigmas: f64,
) -> Result<VelocityGrid> {
    if n_points == 0 {
        return Err(Error::validation("n_points must be >= 1"));
    }
    if !(span_sigmas > 0.0) {
        return Err(Error::validation("span_sigmas must be > 0"));
    }
    if !(temperature > 0.0 && mass > 0.0) {
        return Err(Error::validation("temperature and mass must be > 0"));
    }
    if n_points == 1 {
        return Ok(VelocityGrid::stationary());
    }
    let sigma = thermal_sigma(temperature, mass);
    let unit = match rule {
        QuadratureRule::Trapezoid => trapezoid_unit(n_points, span_sigmas),
        QuadratureRule::GaussHermite => gauss_hermite_unit(n_points),
    };
    VelocityGrid::from_nodes(unit.into_iter().map(|(x, w)| (x * sigma, w)).collect())
}

/// Nodes in units of σ with Gaussian-weighted trapezoid weights, built
/// mirror-symmetric so that odd integrands cancel pairwise.
fn trapezoid_unit(n: usize, span: f64) -> Vec<(f64, f64)> {
    let step = 2.0 * span / (n - 1) as f64;
    let mut nodes = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let x = -span + step * i as f64;
        let x = if 2 * i + 1 == n { 0.0 } else { x };
        let end = if i == 0 { 0.5 } else { 1.0 };
        let w = end * (-0.5 * x * x).exp();
        nodes[i] = (x, w);
        nodes[n - 1 - i] = (-x, w);
    }
    nodes
}

/// Golub-Welsch nodes for the standard normal density.
fn gauss_hermite_unit(n: usize) -> Vec<(f64, f64)> {
    // Jacobi matrix of the physicists' Hermite weight e^{−x²}.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        let x = if i == j { 0.0 } else { x };
        out[i] = (-x * std::f64::consts::SQRT_2, w);
        out[j] = (x * std::f64::consts::SQRT_2, w);
    }
    out
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Weighted average of `f` over the grid. Nodes are evaluated in parallel;
/// the reduction runs in node order so the result does not depend on the
/// number of worker threads.
pub fn doppler_average<F>(f: F, grid: &VelocityGrid) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let values: Vec<f64> = grid.nodes.par_iter().map(|&(v, _)| f(v)).collect();
    weighted_sum(grid, &values)
}

/// Fallible variant of [`doppler_average`]; the first failing node (in grid
/// order) is reported.
pub fn try_doppler_average<F>(f: F, grid: &VelocityGrid) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values: Vec<Result<f64>> = grid.nodes.par_iter().map(|&(v, _)| f(v)).collect();
    let values: Result<Vec<f64>> = values.into_iter().collect();
    Ok(weighted_sum(grid, &values?))
}

/// Σ wᵢ·valuesᵢ with compensated summation in node order.
pub fn weighted_sum(grid: &VelocityGrid, values: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.nodes.len());
    compensated_sum(grid.nodes.iter().zip(values).map(|(&(_, w), &x)| w * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CS133_MASS;

    #[test]
    fn single_point_grid_is_at_rest() {
        let g = make_grid(295.0, CS133_MASS, 1, 4.0).unwrap();
        assert_eq!(g.nodes(), &[(0.0, 1.0)]);
    }

    #[test]
    fn cesium_thermal_width() {
        // √(k_B·300 K / m_Cs) = 137.0 m/s
        let sigma = thermal_sigma(300.0, CS133_MASS);
        assert!((sigma - 137.0).abs() < 0.1, "{sigma}");
    }

    #[test]
    fn weights_normalized_and_symmetric() {
        for rule in [QuadratureRule::Trapezoid, QuadratureRule::GaussHermite] {
            for n in [2, 3, 8, 31, 201] {
                let g = make_grid_with(rule, 295.0, CS133_MASS, n, 4.0).unwrap();
                let total: f64 = compensated_sum(g.nodes().iter().map(|x| x.1));
                assert!((total - 1.0).abs() < 1e-12);
                for i in 0..n {
                    let (a, b) = (g.nodes()[i], g.nodes()[n - 1 - i]);
                    assert_eq!(a.0, -b.0);
                    assert_eq!(a.1, b.1);
                }
            }
        }
    }

    #[test]
    fn constant_and_odd_integrands() {
        let g = make_grid(295.0, CS133_MASS, 201, 4.0).unwrap();
        assert!((doppler_average(|_| 3.5, &g) - 3.5).abs() < 1e-14);
        assert!(doppler_average(|v| v * v * v + 2.0 * v, &g).abs() < 1e-12);
    }

    #[test]
    fn second_moment_matches_thermal_variance() {
        let sigma = thermal_sigma(295.0, CS133_MASS);
        let gh = make_grid_with(QuadratureRule::GaussHermite, 295.0, CS133_MASS, 10, 1.0).unwrap();
        let m2 = doppler_average(|v| v * v, &gh);
        assert!((m2 / (sigma * sigma) - 1.0).abs() < 1e-12);
        let tr = make_grid(295.0, CS133_MASS, 401, 6.0).unwrap();
        let m2 = doppler_average(|v| v * v, &tr);
        assert!((m2 / (sigma * sigma) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_converges_for_smooth_lorentzian() {
        // Voigt-type average of a 2π·5 MHz Lorentzian under the 895 nm Doppler profile.
        let k = crate::constants::TWO_PI / 895e-9;
        let gamma = crate::constants::TWO_PI * 5e6;
        let f = |v: f64| (gamma / 2.0).powi(2) / ((k * v).powi(2) + (gamma / 2.0).powi(2));
        let mut prev: Option<f64> = None;
        let mut diffs = Vec::new();
        for n in [101, 201, 401, 801, 1601] {
            let g = make_grid(295.0, CS133_MASS, n, 4.0).unwrap();
            let avg = doppler_average(f, &g);
            if let Some(p) = prev {
                diffs.push((avg - p).abs());
            }
            prev = Some(avg);
        }
        assert!(diffs.windows(2).all(|w| w[1] <= w[0]), "{diffs:?}");
        assert!(*diffs.last().unwrap() < 1e-5, "{diffs:?}");
    }

    #[test]
    fn linear_in_integrand() {
        let g = make_grid(295.0, CS133_MASS, 51, 3.0).unwrap();
        let f = |v: f64| (v / 100.0).sin() + 1.0;
        let h = |v: f64| (v / 50.0).cos();
        let lhs = doppler_average(|v| 2.0 * f(v) - 3.0 * h(v), &g);
        let rhs = 2.0 * doppler_average(f, &g) - 3.0 * doppler_average(h, &g);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        assert!(make_grid(295.0, CS133_MASS, 0, 4.0).is_err());
        assert!(make_grid(295.0, CS133_MASS, 5, 0.0).is_err());
    }
}
