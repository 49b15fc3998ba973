//! Dimension lower bounds for nested families of convex pieces and Jones
//! β-number sums as a flatness diagnostic.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{hull_of_points, ConvexPolygon, Point, GEOM_TOL};

/// Per-level data of a nested family: every level-`(n−1)` piece holds at
/// least `v` level-`n` pieces, with diameters in `[d_min, d_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub v: u64,
    pub d_max: f64,
    pub d_min: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NestedStats {
    pub levels: Vec<LevelStats>,
    /// `min_n d_n / D_n`.
    pub b: f64,
    /// `min_n (min width of a level-n piece) / d_n`, when pieces were given.
    pub width_ratio: Option<f64>,
}

impl NestedStats {
    pub fn new(levels: Vec<LevelStats>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("nested family needs at least one level".into()));
        }
        for (k, l) in levels.iter().enumerate() {
            if l.v == 0 || !(l.d_min > 0.0) || l.d_min > l.d_max * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "level {}: need v >= 1 and 0 < d_min <= d_max (v = {}, d_min = {}, d_max = {})",
                    k + 1,
                    l.v,
                    l.d_min,
                    l.d_max
                )));
            }
        }
        let b = levels.iter().map(|l| l.d_min / l.d_max).fold(f64::INFINITY, f64::min);
        Ok(NestedStats {
            levels,
            b,
            width_ratio: None,
        })
    }

    /// Constant branching `v` and diameters `d_n = d₀ ρ^n` at every level.
    pub fn uniform(v: u64, d0: f64, rho: f64, depth: usize) -> Result<Self> {
        NestedStats::new(
            (1..=depth)
                .map(|n| {
                    let d = d0 * rho.powi(n as i32);
                    LevelStats { v, d_max: d, d_min: d }
                })
                .collect(),
        )
    }

    /// Reads branching numbers and diameters off explicit levels. Each child
    /// is assigned to the parent that contains it; `v_1` is the size of the
    /// first level.
    pub fn from_levels(levels: &[Vec<ConvexPolygon>]) -> Result<Self> {
        if levels.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidInput("empty level in nested family".into()));
        }
        let mut stats = Vec::with_capacity(levels.len());
        let mut width_ratio = f64::INFINITY;
        for (k, pieces) in levels.iter().enumerate() {
            let diams = exec::map_slice(pieces, ConvexPolygon::diameter);
            let d_max = diams.iter().copied().fold(0.0, f64::max);
            let d_min = diams.iter().copied().fold(f64::INFINITY, f64::min);
            let w_min = exec::map_slice(pieces, |p| p.min_width().width)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if d_min > 0.0 {
                width_ratio = width_ratio.min(w_min / d_min);
            }
            let v = if k == 0 {
                pieces.len() as u64
            } else {
                min_children(&levels[k - 1], pieces, k + 1)?
            };
            stats.push(LevelStats { v, d_max, d_min });
        }
        let mut out = NestedStats::new(stats)?;
        out.width_ratio = Some(width_ratio);
        Ok(out)
    }
}

fn min_children(parents: &[ConvexPolygon], children: &[ConvexPolygon], level: usize) -> Result<u64> {
    let mut order: Vec<usize> = (0..parents.len()).collect();
    let lo: Vec<f64> = parents.iter().map(|p| p.project(0.0).lo).collect();
    order.sort_by(|&a, &b| lo[a].total_cmp(&lo[b]));
    let sorted_lo: Vec<f64> = order.iter().map(|&i| lo[i]).collect();
    let max_width = parents.iter().map(|p| p.width(0.0)).fold(0.0, f64::max);
    let owners = exec::map_slice(children, |c| {
        let x = c.project(0.0).lo;
        let end = sorted_lo.partition_point(|&v| v <= x + GEOM_TOL);
        (0..end)
            .rev()
            .take_while(|&k| sorted_lo[k] >= x - max_width - GEOM_TOL)
            .map(|k| order[k])
            .find(|&p| parents[p].contains_polygon(c, GEOM_TOL))
    });
    let mut counts = vec![0u64; parents.len()];
    for (index, owner) in owners.into_iter().enumerate() {
        match owner {
            Some(p) => counts[p] += 1,
            None => return Err(Error::NotNested { level, index }),
        }
    }
    Ok(counts.into_iter().min().unwrap_or(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct HataReport {
    /// `log(v₁⋯v_n)/(−log d_n)` for each level `n`.
    pub sequence: Vec<f64>,
    /// Minimum of `sequence` over the last half of the levels.
    pub surrogate: f64,
    /// `log(v₁⋯v_{n−1})/(−log d_n)`, the strictly lagged form.
    pub lagged_sequence: Vec<f64>,
    pub lagged_surrogate: f64,
}

fn last_half_min(seq: &[f64]) -> f64 {
    let start = seq.len() / 2;
    seq[start..].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Finite-depth surrogates for `liminf log(v₁⋯v_n)/(−log d_n)`.
///
/// Both the level-`n` and the lagged product have the same liminf; the
/// level-`n` form converges faster and is the headline value.
pub fn hata_bound(stats: &NestedStats) -> Result<HataReport> {
    let mut sequence = Vec::with_capacity(stats.levels.len());
    let mut lagged_sequence = Vec::with_capacity(stats.levels.len());
    let mut log_prod = 0.0;
    for (k, l) in stats.levels.iter().enumerate() {
        if !(l.d_min < 1.0) {
            return Err(Error::Precondition(format!(
                "level {}: minimal diameter {} must be below 1",
                k + 1,
                l.d_min
            )));
        }
        let denom = -l.d_min.ln();
        lagged_sequence.push(log_prod / denom);
        log_prod += (l.v as f64).ln();
        sequence.push(log_prod / denom);
    }
    Ok(HataReport {
        surrogate: last_half_min(&sequence),
        lagged_surrogate: last_half_min(&lagged_sequence),
        sequence,
        lagged_sequence,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaDepth {
    pub depth: usize,
    pub cubes: usize,
    /// `Σ β²(3Q) diam(Q)` over the occupied cubes at this depth.
    pub increment: f64,
    pub partial_sum: f64,
    pub max_beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaReport {
    /// Lower-left corner and side of the depth-0 cube.
    pub origin: Point,
    pub side: f64,
    pub depths: Vec<BetaDepth>,
    /// Every computed value as `(depth, i, j, β)`.
    pub betas: Vec<(usize, i64, i64, f64)>,
}

impl BetaReport {
    pub fn total(&self) -> f64 {
        self.depths.last().map_or(0.0, |d| d.partial_sum)
    }
}

/// Jones β-numbers of `E = ⋃ pieces` over dyadic cubes.
///
/// The depth-0 cube is the bounding square of `E`. For a cube `Q` meeting
/// `E`, `β(3Q)` is the half-width of the thinnest strip containing `E ∩ 3Q`,
/// divided by `diam(3Q)`; it is exact because `E ∩ 3Q` is a finite union of
/// convex polygons.
pub fn beta_sum(pieces: &[ConvexPolygon], max_depth: usize) -> Result<BetaReport> {
    if pieces.is_empty() {
        return Err(Error::InvalidInput("no pieces for β-numbers".into()));
    }
    if max_depth > 12 {
        return Err(Error::ResourceCap {
            what: "β-number depth",
            requested: max_depth as f64,
            cap: 12.0,
        });
    }
    let xs: Vec<_> = pieces.iter().map(|p| p.project(0.0)).collect();
    let ys: Vec<_> = pieces.iter().map(|p| p.project(std::f64::consts::FRAC_PI_2)).collect();
    let x0 = xs.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min);
    let y0 = ys.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min);
    let x1 = xs.iter().map(|i| i.hi).fold(f64::NEG_INFINITY, f64::max);
    let y1 = ys.iter().map(|i| i.hi).fold(f64::NEG_INFINITY, f64::max);
    let side = (x1 - x0).max(y1 - y0).max(GEOM_TOL);
    let origin = Point::new(x0, y0);

    let mut depths = Vec::with_capacity(max_depth + 1);
    let mut betas = Vec::new();
    let mut partial = 0.0;
    for depth in 0..=max_depth {
        let s = side / (1u64 << depth) as f64;
        let cell = |v: f64, o: f64| ((v - o) / s).floor() as i64;
        // Pieces whose bounding box meets each tripled cube.
        let mut near: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, (xi, yi)) in xs.iter().zip(&ys).enumerate() {
            for i in cell(xi.lo, x0) - 1..=cell(xi.hi, x0) + 1 {
                for j in cell(yi.lo, y0) - 1..=cell(yi.hi, y0) + 1 {
                    near.entry((i, j)).or_default().push(k);
                }
            }
        }
        let mut keys: Vec<(i64, i64)> = near.keys().copied().collect();
        keys.sort_unstable();
        let values = exec::map_slice(&keys, |&(i, j)| {
            let q = ConvexPolygon::square(x0 + i as f64 * s, y0 + j as f64 * s, s);
            let q3 = ConvexPolygon::square(x0 + (i - 1) as f64 * s, y0 + (j - 1) as f64 * s, 3.0 * s);
            let cand = &near[&(i, j)];
            // Half-open cells, so a piece touching a cell's far edge does not occupy it.
            let last = (1i64 << depth) - 1;
            let meets = cand.iter().any(|&k| {
                pieces[k].clip(&q).is_some_and(|c| {
                    let m = c.vertex_mean();
                    cell(m.x, x0).min(last) == i && cell(m.y, y0).min(last) == j
                })
            });
            if !meets {
                return None;
            }
            let pts: Vec<Point> = cand
                .iter()
                .filter_map(|&k| pieces[k].clip(&q3))
                .flat_map(|p| p.vertices().to_vec())
                .collect();
            let hull = ConvexPolygon::hull(&hull_of_points(&pts)).ok()?;
            let beta = (hull.min_width().width / (2.0 * q3.diameter())).clamp(0.0, 1.0);
            Some((i, j, beta, q.diameter()))
        });
        let mut increment_terms = Vec::new();
        let mut max_beta = 0.0f64;
        let mut cubes = 0;
        for (i, j, beta, diam) in values.into_iter().flatten() {
            cubes += 1;
            max_beta = max_beta.max(beta);
            increment_terms.push(beta * beta * diam);
            betas.push((depth, i, j, beta));
        }
        let increment = exec::compensated_sum(&increment_terms);
        partial += increment;
        depths.push(BetaDepth {
            depth,
            cubes,
            increment,
            partial_sum: partial,
            max_beta,
        });
    }
    Ok(BetaReport {
        origin,
        side,
        depths,
        betas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor4::{c4_ifs, generic_family};
    use crate::ifs::generation;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn four_corner_stats_tend_to_one() {
        let st = NestedStats::uniform(4, SQRT_2, 0.25, 20).unwrap();
        let h = hata_bound(&st).unwrap();
        assert!(h.sequence[19] >= 0.97);
        assert!((h.sequence[19] - 1.0).abs() <= 1.0 / 20.0);
        assert!(h.lagged_sequence[19] < 1.0);
    }

    #[test]
    fn generic_m2_stats() {
        let st = NestedStats::uniform(8, SQRT_2, 1.0 / 16.0, 15).unwrap();
        let h = hata_bound(&st).unwrap();
        assert!((h.sequence[14] - 0.75).abs() <= 0.02);
        assert!((h.surrogate - 0.75).abs() <= 0.02);
    }

    #[test]
    fn single_branch_is_zero() {
        let st = NestedStats::uniform(1, 1.0, 0.5, 10).unwrap();
        let h = hata_bound(&st).unwrap();
        assert_eq!(h.surrogate, 0.0);
    }

    #[test]
    fn diameters_at_least_one_rejected() {
        let st = NestedStats::uniform(2, 4.0, 0.5, 3).unwrap();
        assert!(matches!(hata_bound(&st), Err(Error::Precondition(_))));
    }

    #[test]
    fn stats_from_generations() {
        let ifs = c4_ifs();
        let q = ConvexPolygon::unit_square();
        let levels: Vec<_> = (1..=4).map(|n| generation(&ifs, &q, n).unwrap().polygons()).collect();
        let st = NestedStats::from_levels(&levels).unwrap();
        assert!(st.levels.iter().all(|l| l.v == 4));
        assert_abs_diff_eq!(st.b, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.width_ratio.unwrap(), 1.0 / SQRT_2, epsilon = 1e-12);
        let fam = generic_family(2).unwrap();
        let st = NestedStats::from_levels(&fam.levels(2).unwrap()).unwrap();
        assert!(st.levels.iter().all(|l| l.v == 8));
    }

    #[test]
    fn collinear_set_is_flat() {
        let segs: Vec<ConvexPolygon> = (0..8)
            .map(|k| {
                let a = k as f64 / 8.0;
                ConvexPolygon::hull(&[Point::new(a, 0.5 * a), Point::new(a + 0.1, 0.5 * (a + 0.1))]).unwrap()
            })
            .collect();
        let r = beta_sum(&segs, 4).unwrap();
        assert!(r.total() < 1e-12);
        assert!(r.betas.iter().all(|b| b.3 < 1e-12));
    }

    #[test]
    fn unit_square_depth_zero() {
        let r = beta_sum(&[ConvexPolygon::unit_square()], 0).unwrap();
        assert_eq!(r.depths[0].cubes, 1);
        // Thinnest strip has width 1; 3Q has diameter 3√2.
        assert_abs_diff_eq!(r.betas[0].3, 1.0 / (6.0 * SQRT_2), epsilon = 1e-12);
    }

    #[test]
    fn four_corner_beta_profile_is_flat() {
        let g = generation(&c4_ifs(), &ConvexPolygon::unit_square(), 5).unwrap();
        let r = beta_sum(&g.polygons(), 4).unwrap();
        let inc: Vec<f64> = r.depths.iter().skip(1).map(|d| d.increment).collect();
        let lo = inc.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inc.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 10.0, "increments {inc:?}");
    }

    proptest! {
        #[test]
        fn rescaling_diameters_moves_bound_slightly(c in 0.2f64..2.0, v in 2u64..9, depth in 4usize..16) {
            let base = NestedStats::uniform(v, 1.0, 0.25, depth).unwrap();
            let scaled = NestedStats::uniform(v, c, 0.25, depth).unwrap();
            let a = hata_bound(&base).unwrap();
            let b = hata_bound(&scaled).unwrap();
            let d_last = scaled.levels.last().unwrap().d_min;
            let slack = c.ln().abs() / (-d_last.ln()) * (a.sequence.last().unwrap().abs() + 1.0);
            prop_assert!((a.sequence.last().unwrap() - b.sequence.last().unwrap()).abs() <= slack + 1e-12);
        }

        #[test]
        fn beta_monotone_in_the_set(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..6), drop in 0usize..5) {
            let mut pieces: Vec<ConvexPolygon> = pts.iter().map(|&(x, y)| ConvexPolygon::square(x, y, 0.05)).collect();
            // A superset pinned to the same bounding square as the subset.
            pieces.push(ConvexPolygon::square(-0.1, -0.1, 0.01));
            pieces.push(ConvexPolygon::square(1.09, 1.09, 0.01));
            let full = beta_sum(&pieces, 2).unwrap();
            let k = drop % (pieces.len() - 2);
            let mut sub = pieces.clone();
            sub.remove(k);
            let part = beta_sum(&sub, 2).unwrap();
            let lookup: HashMap<(usize, i64, i64), f64> = full.betas.iter().map(|&(d, i, j, b)| ((d, i, j), b)).collect();
            for &(d, i, j, b) in &part.betas {
                prop_assert!(b <= lookup[&(d, i, j)] + 1e-12);
            }
            prop_assert!(full.betas.iter().all(|b| (0.0..=1.0).contains(&b.3)));
        }
    }
}
