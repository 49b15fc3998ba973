//! Favard length by midpoint quadrature over `[0, π)` and grid search for
//! the direction of largest projection.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{hull_of_points, ConvexPolygon, Interval, IntervalUnion};
use crate::ifs::Generation;

pub const DEFAULT_GRID: usize = 1024;

/// Smallest accepted grid resolution.
pub const MIN_GRID: usize = 8;

/// Midpoint grid `θ_i = (i + ½)π/G` on `[0, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AngleGrid {
    resolution: usize,
}

impl AngleGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < MIN_GRID {
            return Err(Error::InvalidInput(format!(
                "angle grid needs at least 8 cells, got {resolution}"
            )));
        }
        Ok(AngleGrid { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn step(&self) -> f64 {
        PI / self.resolution as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.step()
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.resolution).map(|i| self.angle(i)).collect()
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid {
            resolution: DEFAULT_GRID,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FavardReport {
    /// Mean projection length over the grid.
    pub value: f64,
    pub per_angle: Vec<(f64, f64)>,
    pub argmax_angle: f64,
    pub argmax_length: f64,
    /// Midpoint-rule error bound from the diameter-Lipschitz projection widths.
    pub quadrature_error_bound: f64,
}

/// `|P_θ(⋃ K_i + B(0, δ))|`: projections inflated by `delta` on both sides.
pub fn projection_length(polys: &[ConvexPolygon], theta: f64, delta: f64) -> f64 {
    projection_union(polys, theta, delta).length()
}

pub fn projection_union(polys: &[ConvexPolygon], theta: f64, delta: f64) -> IntervalUnion {
    let ivs: Vec<Interval> = polys.iter().map(|p| p.project(theta).inflated(delta)).collect();
    IntervalUnion::from_intervals(ivs)
}

fn set_diameter(polys: &[ConvexPolygon]) -> f64 {
    let pts: Vec<_> = polys.iter().flat_map(|p| p.vertices().iter().copied()).collect();
    if pts.is_empty() {
        return 0.0;
    }
    ConvexPolygon::hull(&hull_of_points(&pts))
        .map(|h| h.diameter())
        .unwrap_or(0.0)
}

/// Favard length of a finite union of convex polygons, each inflated by `delta`.
pub fn favard_of_polygons(polys: &[ConvexPolygon], delta: f64, grid: AngleGrid) -> FavardReport {
    let angles = grid.angles();
    let lengths = exec::map_slice(&angles, |&t| projection_length(polys, t, delta));
    let value = exec::compensated_sum(&lengths) / lengths.len() as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &l) in lengths.iter().enumerate() {
        if l > best {
            best = l;
            best_i = i;
        }
    }
    FavardReport {
        value,
        per_angle: angles.iter().copied().zip(lengths.iter().copied()).collect(),
        argmax_angle: angles[best_i],
        argmax_length: best,
        quadrature_error_bound: (set_diameter(polys) + 2.0 * delta) * grid.step() / 4.0,
    }
}

pub fn favard_length(gen: &Generation, grid: AngleGrid) -> FavardReport {
    favard_of_polygons(&gen.polygons(), 0.0, grid)
}

/// Favard length of the `delta`-neighbourhood of a generation.
pub fn favard_of_neighborhood(gen: &Generation, delta: f64, grid: AngleGrid) -> Result<FavardReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("neighbourhood radius must be >= 0, got {delta}")));
    }
    Ok(favard_of_polygons(&gen.polygons(), delta, grid))
}

/// Grid angle with the longest projection; ties go to the smaller angle.
pub fn best_angle(polys: &[ConvexPolygon], grid: AngleGrid) -> (f64, f64) {
    let r = favard_of_polygons(polys, 0.0, grid);
    (r.argmax_angle, r.argmax_length)
}
