//! Similarity maps, iterated function systems, words and generations.

use std::f64::consts::PI;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{ConvexPolygon, Point, GEOM_TOL};

/// Default cap on the number of pieces a generation may enumerate.
pub const DEFAULT_PIECE_CAP: usize = 10_000_000;

/// Relative tolerance for dropping redundant vertices of an iterated hull.
pub const HULL_SIMPLIFY_TOL: f64 = 1e-13;

/// Tolerance on `|Σ r_j^s − 1|` for the similarity dimension root.
pub const DIM_TOL: f64 = 1e-12;

/// A rotation by `p·π/q`, kept exact for class comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalRotation {
    pub p: i64,
    pub q: i64,
}

impl RationalRotation {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::InvalidInput(format!("rotation denominator must be positive, got {q}")));
        }
        let g = p.gcd(&q).max(1);
        let (p, q) = (p / g, q / g);
        // Reduce modulo 2π, i.e. p modulo 2q.
        Ok(RationalRotation { p: p.rem_euclid(2 * q), q })
    }

    pub fn zero() -> Self {
        RationalRotation { p: 0, q: 1 }
    }

    pub fn radians(self) -> f64 {
        self.p as f64 * PI / self.q as f64
    }

    pub fn times(self, k: i64) -> RationalRotation {
        RationalRotation::new(self.p * k, self.q).expect("positive denominator")
    }
}

impl std::ops::Add for RationalRotation {
    type Output = RationalRotation;

    fn add(self, o: RationalRotation) -> RationalRotation {
        let l = self.q.lcm(&o.q);
        RationalRotation::new(self.p * (l / self.q) + o.p * (l / o.q), l).expect("positive denominator")
    }
}

/// A contracting similarity `x ↦ r·A(θ)·x + z` with `A(θ)` a rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub r: f64,
    /// Rotation angle in `[0, 2π)`.
    pub theta: f64,
    pub z: Point,
    /// Exact rotation when the angle is a rational multiple of π.
    pub rot: Option<RationalRotation>,
}

impl SimilarityMap {
    pub fn new(r: f64, theta: f64, z: Point) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidInput(format!("scale must lie in (0, 1), got {r}")));
        }
        if !theta.is_finite() || !z.x.is_finite() || !z.y.is_finite() {
            return Err(Error::InvalidInput("map parameters must be finite".into()));
        }
        let theta = theta.rem_euclid(2.0 * PI);
        let rot = (theta == 0.0).then(RationalRotation::zero);
        Ok(SimilarityMap { r, theta, z, rot })
    }

    /// Map whose rotation is exactly `p·π/q`.
    pub fn with_rational_rotation(r: f64, p: i64, q: i64, z: Point) -> Result<Self> {
        let rot = RationalRotation::new(p, q)?;
        let mut m = SimilarityMap::new(r, rot.radians(), z)?;
        m.rot = Some(rot);
        Ok(m)
    }

    pub fn identity() -> Self {
        SimilarityMap {
            r: 1.0,
            theta: 0.0,
            z: Point::ORIGIN,
            rot: Some(RationalRotation::zero()),
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        p.rotate(self.theta) * self.r + self.z
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityMap) -> SimilarityMap {
        let rot = match (self.rot, other.rot) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        SimilarityMap {
            r: self.r * other.r,
            theta: match rot {
                Some(q) => q.radians(),
                None => (self.theta + other.theta).rem_euclid(2.0 * PI),
            },
            z: self.apply(other.z),
            rot,
        }
    }

    /// True when the rotation is the identity (up to tolerance).
    pub fn is_rotation_free(&self) -> bool {
        match self.rot {
            Some(q) => q.p == 0,
            None => angle_is_multiple_of(self.theta, 2.0 * PI),
        }
    }

    /// Unique fixed point, solving `x = rAx + z`.
    pub fn fixed_point(&self) -> Point {
        let (s, c) = self.theta.sin_cos();
        let a = 1.0 - self.r * c;
        let b = self.r * s;
        // (I − rA) = [[a, b], [−b, a]], determinant a² + b² > 0.
        let det = a * a + b * b;
        Point::new((a * self.z.x - b * self.z.y) / det, (b * self.z.x + a * self.z.y) / det)
    }

    pub fn apply_polygon(&self, poly: &ConvexPolygon) -> ConvexPolygon {
        poly.map_vertices(|p| self.apply(p))
    }
}

fn angle_is_multiple_of(theta: f64, period: f64) -> bool {
    let t = theta.rem_euclid(period);
    t <= 1e-12 || period - t <= 1e-12
}

/// Convenience alias for [`SimilarityMap::fixed_point`].
pub fn fixed_point(map: &SimilarityMap) -> Point {
    map.fixed_point()
}

/// A finite word `(j_1, …, j_n)` of 0-based map indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// 1-based labels as written in the literature.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|j| j + 1).collect()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, ")")
    }
}

/// Solves `Σ r_j^s = 1` by bisection.
pub fn similarity_dimension(scales: &[f64]) -> f64 {
    if scales.len() <= 1 {
        return 0.0;
    }
    let f = |s: f64| scales.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// An iterated function system; maps are kept sorted by scale (stable).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ifs {
    maps: Vec<SimilarityMap>,
    dimension: f64,
    /// Declared open set condition, if any.
    pub osc: Option<bool>,
}

impl Ifs {
    pub fn new(mut maps: Vec<SimilarityMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidInput("an IFS needs at least one map".into()));
        }
        for m in &maps {
            if !(m.r > 0.0 && m.r < 1.0) {
                return Err(Error::InvalidInput(format!("scale must lie in (0, 1), got {}", m.r)));
            }
        }
        maps.sort_by(|a, b| a.r.total_cmp(&b.r));
        let scales: Vec<f64> = maps.iter().map(|m| m.r).collect();
        let dimension = similarity_dimension(&scales);
        Ok(Ifs {
            maps,
            dimension,
            osc: None,
        })
    }

    pub fn with_osc(mut self, osc: bool) -> Self {
        self.osc = Some(osc);
        self
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn similarity_dimension(&self) -> f64 {
        self.dimension
    }

    /// Largest scale `r_N`.
    pub fn max_scale(&self) -> f64 {
        self.maps.last().map(|m| m.r).unwrap_or(0.0)
    }

    pub fn is_rotation_free(&self) -> bool {
        self.maps.iter().all(SimilarityMap::is_rotation_free)
    }

    pub fn has_uniform_scale(&self) -> bool {
        let r0 = self.maps[0].r;
        self.maps.iter().all(|m| (m.r - r0).abs() <= DIM_TOL)
    }

    /// `f_{j_1} ∘ … ∘ f_{j_n}`.
    pub fn compose(&self, w: &Word) -> Result<SimilarityMap> {
        if w.is_empty() {
            return Err(Error::InvalidInput("cannot compose the empty word".into()));
        }
        let mut acc = SimilarityMap::identity();
        for &j in &w.0 {
            let m = self
                .maps
                .get(j)
                .ok_or_else(|| Error::InvalidInput(format!("word letter {} out of range", j + 1)))?;
            acc = acc.compose(m);
        }
        Ok(acc)
    }

    pub fn fixed_points(&self) -> Vec<Point> {
        self.maps.iter().map(SimilarityMap::fixed_point).collect()
    }

    /// Sub-system made of the given maps, in the given order.
    pub fn from_maps_unsorted(maps: Vec<SimilarityMap>) -> Result<Self> {
        let mut ifs = Ifs::new(maps.clone())?;
        ifs.maps = maps;
        Ok(ifs)
    }
}

/// Convex hull approximation of an attractor.
#[derive(Clone, Debug, Serialize)]
pub struct AttractorHull {
    pub polygon: ConvexPolygon,
    /// True when the polygon equals the hull of the attractor.
    pub exact: bool,
    /// Bound on the Hausdorff distance to the true hull.
    pub hausdorff_error: f64,
}

/// Hull of the attractor from fixed points: exact for rotation-free systems;
/// otherwise the hull of fixed points of every word up to length `depth`.
pub fn attractor_hull(ifs: &Ifs, depth: usize) -> Result<AttractorHull> {
    if ifs.is_rotation_free() {
        return Ok(AttractorHull {
            polygon: ConvexPolygon::hull(&ifs.fixed_points())?,
            exact: true,
            hausdorff_error: 0.0,
        });
    }
    if depth == 0 {
        return Err(Error::InvalidInput("rotational hull needs depth >= 1".into()));
    }
    let n = ifs.len();
    let total: f64 = (1..=depth).map(|k| (n as f64).powi(k as i32)).sum();
    if total > DEFAULT_PIECE_CAP as f64 {
        return Err(Error::ResourceCap {
            what: "fixed points for the hull",
            requested: total,
            cap: DEFAULT_PIECE_CAP as f64,
        });
    }
    let mut points = Vec::new();
    let mut frontier: Vec<SimilarityMap> = vec![SimilarityMap::identity()];
    for _ in 0..depth {
        let next: Vec<SimilarityMap> = frontier
            .iter()
            .flat_map(|w| ifs.maps().iter().map(move |m| w.compose(m)))
            .collect();
        points.extend(next.iter().map(SimilarityMap::fixed_point));
        let h = crate::geometry::hull_of_points(&points);
        points = h;
        frontier = next;
    }
    let polygon = ConvexPolygon::hull(&points)?;
    let err = polygon.diameter() * ifs.max_scale().powi(depth as i32);
    Ok(AttractorHull {
        polygon,
        exact: false,
        hausdorff_error: err,
    })
}

/// Outer hull approximation `K` with `f_j(K) ⊆ K` for every map: iterates
/// `K ← conv(⋃ f_j(K))` from an invariant polygon enclosing a ball. The
/// result always contains the attractor.
pub fn invariant_hull(ifs: &Ifs, iterations: usize) -> Result<AttractorHull> {
    if ifs.is_rotation_free() {
        return attractor_hull(ifs, 1);
    }
    let fps = ifs.fixed_points();
    let c = fps.iter().fold(Point::ORIGIN, |a, &p| a + p) * (1.0 / fps.len() as f64);
    const SIDES: usize = 64;
    let inflate = 1.0 / (PI / SIDES as f64).cos();
    let mut radius: f64 = 0.0;
    for m in ifs.maps() {
        let denom = 1.0 - m.r * inflate;
        radius = radius.max(m.apply(c).dist(c) / denom);
    }
    let radius = radius.max(GEOM_TOL) * inflate;
    let start: Vec<Point> = (0..SIDES)
        .map(|k| c + Point::unit(2.0 * PI * k as f64 / SIDES as f64) * radius)
        .collect();
    let mut k = ConvexPolygon::hull(&start)?;
    let d0 = k.diameter();
    for _ in 0..iterations {
        let pts: Vec<Point> = ifs
            .maps()
            .iter()
            .flat_map(|m| k.vertices().iter().map(move |&p| m.apply(p)))
            .collect();
        k = ConvexPolygon::hull(&pts)?.simplified(HULL_SIMPLIFY_TOL);
    }
    Ok(AttractorHull {
        hausdorff_error: d0 * ifs.max_scale().powi(iterations as i32),
        polygon: k,
        exact: false,
    })
}

/// One piece `f_w(K)` of a generation.
#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    pub word: Word,
    pub map: SimilarityMap,
    pub polygon: ConvexPolygon,
}

/// All images of a seed polygon under words of a fixed length.
#[derive(Clone, Debug, Serialize)]
pub struct Generation {
    pub level: usize,
    pub seed: ConvexPolygon,
    pub pieces: Vec<Piece>,
}

impl Generation {
    pub fn polygons(&self) -> Vec<ConvexPolygon> {
        self.pieces.iter().map(|p| p.polygon.clone()).collect()
    }

    /// Generation made of explicit pieces (used for sub-families).
    pub fn from_polygons(level: usize, seed: ConvexPolygon, polys: Vec<ConvexPolygon>) -> Self {
        let pieces = polys
            .into_iter()
            .enumerate()
            .map(|(i, polygon)| Piece {
                word: Word(vec![i]),
                map: SimilarityMap::identity(),
                polygon,
            })
            .collect();
        Generation { level, seed, pieces }
    }
}

/// Number of words of length `n`, checked against `cap`.
pub fn check_piece_count(n_maps: usize, level: usize, cap: usize) -> Result<usize> {
    let count = (n_maps as f64).powi(level as i32);
    if count > cap as f64 {
        return Err(Error::ResourceCap {
            what: "generation pieces",
            requested: count,
            cap: cap as f64,
        });
    }
    Ok(n_maps.pow(level as u32))
}

/// Word with lexicographic rank `idx` among words of length `n` over `base` letters.
pub fn word_from_index(mut idx: usize, base: usize, n: usize) -> Word {
    let mut v = vec![0; n];
    for k in (0..n).rev() {
        v[k] = idx % base;
        idx /= base;
    }
    Word(v)
}

/// Enumerates generation `n` in lexicographic word order.
pub fn generation(ifs: &Ifs, seed: &ConvexPolygon, n: usize) -> Result<Generation> {
    generation_capped(ifs, seed, n, DEFAULT_PIECE_CAP)
}

pub fn generation_capped(ifs: &Ifs, seed: &ConvexPolygon, n: usize, cap: usize) -> Result<Generation> {
    let count = check_piece_count(ifs.len(), n, cap)?;
    if n == 0 {
        return Ok(Generation {
            level: 0,
            seed: seed.clone(),
            pieces: vec![Piece {
                word: Word(vec![]),
                map: SimilarityMap::identity(),
                polygon: seed.clone(),
            }],
        });
    }
    let base = ifs.len();
    let pieces = exec::map_range(count, |idx| {
        let word = word_from_index(idx, base, n);
        let map = ifs.compose(&word).expect("letters in range");
        let polygon = map.apply_polygon(seed);
        Piece { word, map, polygon }
    });
    Ok(Generation {
        level: n,
        seed: seed.clone(),
        pieces,
    })
}

/// Overlap statistics of a generation.
#[derive(Clone, Debug, Serialize)]
pub struct GenerationReport {
    /// Colors used by a greedy proper coloring of the interior-overlap graph.
    pub overlap_index: usize,
    pub overlapping_pairs: usize,
    /// Containment in the previous generation, when one was supplied.
    pub nested: Option<bool>,
}

/// Greedy coloring bound on the overlapping index.
pub fn overlap_index(gen: &Generation, previous: Option<&Generation>) -> GenerationReport {
    let polys: Vec<&ConvexPolygon> = gen.pieces.iter().map(|p| &p.polygon).collect();
    let boxes: Vec<(f64, f64)> = polys.iter().map(|p| {
        let iv = p.project(0.0);
        (iv.lo, iv.hi)
    }).collect();
    let mut order: Vec<usize> = (0..polys.len()).collect();
    order.sort_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0));
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); polys.len()];
    let mut pairs = 0;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].0 >= boxes[i].1 {
                break;
            }
            if let Some(c) = polys[i].clip(polys[j]) {
                let floor = GEOM_TOL * polys[i].area().abs().min(polys[j].area().abs()).max(GEOM_TOL * GEOM_TOL);
                if c.area() > floor {
                    adj[i].push(j);
                    adj[j].push(i);
                    pairs += 1;
                }
            }
        }
    }
    let mut color = vec![usize::MAX; polys.len()];
    let mut used = 0;
    for i in 0..polys.len() {
        let taken: Vec<usize> = adj[i].iter().map(|&j| color[j]).filter(|&c| c != usize::MAX).collect();
        let c = (0..).find(|c| !taken.contains(c)).unwrap();
        color[i] = c;
        used = used.max(c + 1);
    }
    let nested = previous.map(|prev| is_nested(prev, gen, GEOM_TOL));
    GenerationReport {
        overlap_index: used.max(1),
        overlapping_pairs: pairs,
        nested,
    }
}

/// True when every piece of `child` lies inside some piece of `parent`.
pub fn is_nested(parent: &Generation, child: &Generation, tol: f64) -> bool {
    let by_word: std::collections::HashMap<&[usize], usize> = parent
        .pieces
        .iter()
        .enumerate()
        .map(|(i, p)| (p.word.0.as_slice(), i))
        .collect();
    exec::map_slice(&child.pieces, |c| {
        // Words extend their parent's word, so try the prefix first.
        let prefix = &c.word.0[..c.word.len().saturating_sub(1)];
        let direct = by_word
            .get(prefix)
            .map(|&i| parent.pieces[i].polygon.contains_polygon(&c.polygon, tol))
            .unwrap_or(false);
        direct
            || parent
                .pieces
                .iter()
                .any(|p| p.polygon.contains_polygon(&c.polygon, tol))
    })
    .into_iter()
    .all(|b| b)
}

/// A line `{p : p·n = offset}` with direction angle `angle` and unit normal
/// `n = (−sin angle, cos angle)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Line {
    pub angle: f64,
    pub offset: f64,
}

/// Maps that send a line into itself, and the dimension of their attractor.
#[derive(Clone, Debug, Serialize)]
pub struct LineSlice {
    /// 0-based indices of the invariant maps.
    pub indices: Vec<usize>,
    pub dimension: f64,
    pub empty: bool,
}

pub fn line_invariant_subifs(ifs: &Ifs, line: Line) -> LineSlice {
    let normal = Point::new(-line.angle.sin(), line.angle.cos());
    let on_line = normal * line.offset;
    let indices: Vec<usize> = ifs
        .maps()
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let parallel = angle_is_multiple_of(m.theta, PI);
            parallel && (m.apply(on_line).dot(normal) - line.offset).abs() <= GEOM_TOL
        })
        .map(|(i, _)| i)
        .collect();
    let scales: Vec<f64> = indices.iter().map(|&i| ifs.maps()[i].r).collect();
    LineSlice {
        dimension: similarity_dimension(&scales),
        empty: indices.is_empty(),
        indices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c4() -> Ifs {
        let zs = [(0.0, 0.0), (0.0, 0.75), (0.75, 0.0), (0.75, 0.75)];
        Ifs::new(
            zs.iter()
                .map(|&(x, y)| SimilarityMap::new(0.25, 0.0, Point::new(x, y)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    /// Corner squares of side 1/k plus k−4 further squares spread along the
    /// bottom edge.
    fn ck(k: usize) -> Ifs {
        let s = 1.0 / k as f64;
        let mut zs = vec![(0.0, 1.0 - s), (1.0 - s, 1.0 - s)];
        let bottom = k - 2;
        for i in 0..bottom {
            zs.push((i as f64 * (1.0 - s) / (bottom - 1) as f64, 0.0));
        }
        Ifs::new(zs.iter().map(|&(x, y)| SimilarityMap::new(s, 0.0, Point::new(x, y)).unwrap()).collect()).unwrap()
    }

    #[test]
    fn compose_examples() {
        let ifs = c4();
        let f1 = ifs.compose(&Word(vec![0])).unwrap();
        assert_eq!(f1.r, 0.25);
        assert_eq!(f1.z, Point::ORIGIN);
        let f = ifs.compose(&Word(vec![3; 5])).unwrap();
        assert_abs_diff_eq!(f.r, 0.25f64.powi(5));
        let fp = f.fixed_point();
        assert_abs_diff_eq!(fp.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fp.y, 1.0, epsilon = 1e-12);
        let a = ifs.compose(&Word(vec![0, 1])).unwrap();
        let b = ifs.compose(&Word(vec![1, 0])).unwrap();
        assert_eq!(a.r, b.r);
        assert_ne!(a.z, b.z);
        assert!(ifs.compose(&Word(vec![])).is_err());
    }

    #[test]
    fn similarity_dimension_examples() {
        assert_abs_diff_eq!(similarity_dimension(&[0.25; 4]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(similarity_dimension(&[0.25; 3]), 3f64.ln() / 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(similarity_dimension(&[1.0 / 16.0; 8]), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn fixed_point_examples() {
        let m = SimilarityMap::new(0.25, 0.0, Point::new(0.0, 0.75)).unwrap();
        let p = m.fixed_point();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-15);
        let m = SimilarityMap::new(0.3, 1.234, Point::ORIGIN).unwrap();
        assert_eq!(m.fixed_point(), Point::ORIGIN);
        let m = SimilarityMap::with_rational_rotation(0.5, 1, 1, Point::new(1.5, 0.0)).unwrap();
        let p = m.fixed_point();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn attractor_hull_examples() {
        let h = attractor_hull(&c4(), 1).unwrap();
        assert!(h.exact);
        assert_abs_diff_eq!(h.polygon.area(), 1.0, epsilon = 1e-12);
        let one = Ifs::new(vec![SimilarityMap::new(0.5, 0.0, Point::new(1.0, 2.0)).unwrap()]).unwrap();
        let h = attractor_hull(&one, 1).unwrap();
        assert_eq!(h.polygon.vertices(), &[Point::new(2.0, 4.0)]);
    }

    #[test]
    fn rotational_hulls_refine() {
        let ifs = Ifs::new(vec![
            SimilarityMap::with_rational_rotation(0.4, 1, 3, Point::new(0.0, 0.0)).unwrap(),
            SimilarityMap::with_rational_rotation(0.4, 2, 3, Point::new(1.0, 0.0)).unwrap(),
            SimilarityMap::with_rational_rotation(0.4, 1, 1, Point::new(0.5, 0.8)).unwrap(),
        ])
        .unwrap();
        let h5 = attractor_hull(&ifs, 5).unwrap();
        let h6 = attractor_hull(&ifs, 6).unwrap();
        assert!(h6.polygon.contains_polygon(&h5.polygon, 1e-9));
        let outer = invariant_hull(&ifs, 14).unwrap();
        assert!(outer.polygon.contains_polygon(&h6.polygon, 1e-9));
        for m in ifs.maps() {
            assert!(outer.polygon.contains_polygon(&m.apply_polygon(&outer.polygon), 1e-9));
        }
        // The inner and outer approximations agree up to their error bounds.
        let gap = outer.polygon.width(0.3) - h6.polygon.width(0.3);
        assert!(gap >= -1e-12 && gap <= 2.0 * (outer.hausdorff_error + h6.hausdorff_error));
    }

    #[test]
    fn generation_examples() {
        let ifs = c4();
        let q = ConvexPolygon::unit_square();
        let g0 = generation(&ifs, &q, 0).unwrap();
        assert_eq!(g0.pieces.len(), 1);
        let g1 = generation(&ifs, &q, 1).unwrap();
        assert_eq!(g1.pieces.len(), 4);
        for p in &g1.pieces {
            assert_abs_diff_eq!(p.polygon.area(), 1.0 / 16.0, epsilon = 1e-15);
        }
        let g2 = generation(&ifs, &q, 2).unwrap();
        assert_eq!(g2.pieces.len(), 16);
        assert!(is_nested(&g1, &g2, GEOM_TOL));
        assert!(matches!(
            generation_capped(&ifs, &q, 12, 1000),
            Err(Error::ResourceCap { .. })
        ));
        // lexicographic order
        assert_eq!(g2.pieces[5].word, Word(vec![1, 1]));
    }

    #[test]
    fn overlap_index_examples() {
        let q = ConvexPolygon::unit_square();
        let g1 = generation(&c4(), &q, 1).unwrap();
        assert_eq!(overlap_index(&g1, None).overlap_index, 1);
        let twin = Generation::from_polygons(1, q.clone(), vec![q.clone(), q.clone()]);
        assert_eq!(overlap_index(&twin, None).overlap_index, 2);
        let g6 = generation(&ck(6), &q, 1).unwrap();
        assert_eq!(g6.pieces.len(), 6);
        assert_eq!(overlap_index(&g6, None).overlap_index, 1);
    }

    #[test]
    fn line_slices() {
        let x_axis = Line { angle: 0.0, offset: 0.0 };
        let s6 = line_invariant_subifs(&ck(6), x_axis);
        assert_eq!(s6.indices.len(), 4);
        assert_abs_diff_eq!(s6.dimension, 4f64.ln() / 6f64.ln(), epsilon = 1e-12);
        let s4 = line_invariant_subifs(&c4(), x_axis);
        assert_eq!(s4.indices.len(), 2);
        assert_abs_diff_eq!(s4.dimension, 0.5, epsilon = 1e-12);
        let mid = line_invariant_subifs(&c4(), Line { angle: 0.0, offset: 0.5 });
        assert!(mid.empty);
    }

    fn arb_map() -> impl Strategy<Value = SimilarityMap> {
        (0.05f64..0.9, 0.0f64..std::f64::consts::TAU, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(r, t, x, y)| SimilarityMap::new(r, t, Point::new(x, y)).unwrap())
    }

    proptest! {
        #[test]
        fn dimension_monotone_in_maps(scales in prop::collection::vec(0.05f64..0.9, 2..8), extra in 0.05f64..0.9) {
            let s = similarity_dimension(&scales);
            let mut more = scales.clone();
            more.push(extra);
            prop_assert!(similarity_dimension(&more) > s);
            let residual: f64 = scales.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
            prop_assert!(residual.abs() <= DIM_TOL);
        }

        #[test]
        fn composition_is_associative(maps in prop::collection::vec(arb_map(), 2..5), split in 1usize..4, pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 20)) {
            let ifs = Ifs::from_maps_unsorted(maps.clone()).unwrap();
            let n = ifs.len();
            let split = split.min(n - 1).max(1);
            let w: Vec<usize> = (0..n).collect();
            let (a, b) = w.split_at(split);
            let whole = ifs.compose(&Word(w.clone())).unwrap();
            let left = ifs.compose(&Word(a.to_vec())).unwrap();
            let right = ifs.compose(&Word(b.to_vec())).unwrap();
            for (x, y) in pts {
                let p = Point::new(x, y);
                let q1 = whole.apply(p);
                let q2 = left.apply(right.apply(p));
                prop_assert!(q1.dist(q2) <= 1e-12 * (1.0 + q1.norm()));
            }
        }

        #[test]
        fn uniform_generation_diameters(n in 1usize..5) {
            let ifs = c4();
            let q = ConvexPolygon::unit_square();
            let g = generation(&ifs, &q, n).unwrap();
            let expect = 0.25f64.powi(n as i32) * q.diameter();
            for p in &g.pieces {
                prop_assert!((p.polygon.diameter() - expect).abs() <= 1e-12);
            }
            let prev = generation(&ifs, &q, n - 1).unwrap();
            prop_assert!(is_nested(&prev, &g, GEOM_TOL));
        }
    }
}
