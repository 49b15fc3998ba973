//! Piecewise-linear graphs over a rotated frame that thread nested families
//! of convex pieces.
//!
//! At each level the graph runs across every piece from its leftmost to its
//! rightmost point (in frame coordinates), joins consecutive pieces by
//! chords and is constant outside the first and last piece. When the pieces
//! shrink geometrically and the slopes stay bounded, these graphs converge
//! uniformly to a Lipschitz graph containing the limit set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{ConvexPolygon, Interval, Point, GEOM_TOL};

/// Smallest piece scale (relative to the seed) used when building graphs.
pub const GRAPH_MIN_SCALE: f64 = 1e-7;
/// Largest number of pieces in one graph level.
pub const GRAPH_PIECE_CAP: usize = 200_000;

/// Deepest level `d ≤ max_depth` whose pieces keep scale `≥ GRAPH_MIN_SCALE`
/// and number at most `GRAPH_PIECE_CAP`; never below 1.
pub fn graph_depth(scale: f64, n_maps: usize, max_depth: usize) -> usize {
    let mut d = 1;
    while d < max_depth
        && scale.powi(d as i32 + 1) >= GRAPH_MIN_SCALE
        && (n_maps as f64).powi(d as i32 + 1) <= GRAPH_PIECE_CAP as f64
    {
        d += 1;
    }
    d
}

/// Orthonormal frame `ω₁ = (cos θ, sin θ)`, `ω₂ = (−sin θ, cos θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub theta: f64,
}

impl Frame {
    pub fn new(theta: f64) -> Self {
        Frame { theta }
    }

    pub fn x_axis(&self) -> Point {
        Point::unit(self.theta)
    }

    pub fn y_axis(&self) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(-s, c)
    }

    /// Frame coordinates `(P_θ p, P_{θ+π/2} p)`.
    pub fn to_frame(&self, p: Point) -> (f64, f64) {
        (p.dot(self.x_axis()), p.dot(self.y_axis()))
    }

    pub fn to_world(&self, x: f64, y: f64) -> Point {
        self.x_axis() * x + self.y_axis() * y
    }
}

/// Frame data of one convex piece.
#[derive(Clone, Copy, Debug)]
struct PieceFrame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    /// Frame height of the leftmost and rightmost support points.
    y_left: f64,
    y_right: f64,
    left: Point,
    right: Point,
}

impl PieceFrame {
    fn of(poly: &ConvexPolygon, frame: &Frame) -> Self {
        let tol = GEOM_TOL * poly.diameter().max(f64::MIN_POSITIVE);
        let x_axis = frame.x_axis();
        let left_pt = poly.extreme_point(-x_axis, tol);
        let right_pt = poly.extreme_point(x_axis, tol);
        let left = frame.to_frame(left_pt);
        let right = frame.to_frame(right_pt);
        let xi = poly.project(frame.theta);
        let yi = poly.project(frame.theta + std::f64::consts::FRAC_PI_2);
        PieceFrame {
            x_lo: xi.lo,
            x_hi: xi.hi,
            y_lo: yi.lo,
            y_hi: yi.hi,
            y_left: left.1,
            y_right: right.1,
            left: left_pt,
            right: right_pt,
        }
    }

    fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }
}

/// Slope, diameter and ratio constants for a nested family.
#[derive(Clone, Debug, Serialize)]
pub struct GraphHypotheses {
    /// Slope bound λ (maximum of the two components below).
    pub lambda: f64,
    /// Largest frame height-to-width ratio of a single piece.
    pub lambda_piece: f64,
    /// Largest slope between the right point of a piece and the left point of the next.
    pub lambda_connector: f64,
    pub c: f64,
    pub sigma: f64,
    /// Largest diameter per level.
    pub max_diameters: Vec<f64>,
}

fn frames_sorted(pieces: &[ConvexPolygon], frame: &Frame) -> Vec<(usize, PieceFrame)> {
    let mut v: Vec<(usize, PieceFrame)> = exec::map_range(pieces.len(), |i| (i, PieceFrame::of(&pieces[i], frame)));
    v.sort_by(|a, b| a.1.x_lo.total_cmp(&b.1.x_lo).then(a.0.cmp(&b.0)));
    v
}

/// Slope data of one level; errors on vertical, overlapping or
/// discontinuously abutting pieces.
fn level_slopes(level: usize, sorted: &[(usize, PieceFrame)], frame: &Frame) -> Result<(f64, f64)> {
    let mut piece = 0.0f64;
    let mut connector = 0.0f64;
    for &(i, pf) in sorted {
        if pf.width() <= GEOM_TOL {
            if pf.height() <= GEOM_TOL {
                continue;
            }
            return Err(Error::VerticalPiece { level, index: i });
        }
        piece = piece.max(pf.height() / pf.width());
    }
    for w in sorted.windows(2) {
        let ((i, a), (j, b)) = (w[0], w[1]);
        let dx = b.x_lo - a.x_hi;
        let dy = b.y_left - a.y_right;
        if dx < -GEOM_TOL {
            return Err(Error::OverlappingPieces { level, left: i, right: j });
        }
        if dx <= GEOM_TOL {
            if dy.abs() > GEOM_TOL {
                return Err(Error::Discontinuity {
                    x: a.x_hi,
                    left: a.y_right,
                    right: b.y_left,
                });
            }
            continue;
        }
        // Project the difference vector rather than differencing projections,
        // which loses all precision once the gap is tiny.
        let (gx, gy) = frame.to_frame(b.left - a.right);
        connector = connector.max(gy.abs() / gx);
    }
    Ok((piece, connector))
}

fn check_nested(level: usize, parents: &[ConvexPolygon], parent_frames: &[(usize, PieceFrame)], children: &[ConvexPolygon], child_frames: &[(usize, PieceFrame)]) -> Result<()> {
    let starts: Vec<f64> = parent_frames.iter().map(|(_, f)| f.x_lo).collect();
    let bad = exec::map_slice(child_frames, |&(ci, cf)| {
        let k = starts.partition_point(|&x| x <= cf.x_lo + GEOM_TOL);
        let lo = k.saturating_sub(2);
        let hi = (k + 1).min(parent_frames.len());
        let ok = (lo..hi).any(|p| parents[parent_frames[p].0].contains_polygon(&children[ci], GEOM_TOL));
        (!ok).then_some(ci)
    });
    match bad.into_iter().flatten().next() {
        Some(index) => Err(Error::NotNested { level, index }),
        None => Ok(()),
    }
}

/// Computes λ from the pieces and fits `c`, `σ` from the per-level maximal
/// diameters (`D_n ≤ c σ^n`, with `levels[0]` as level 1).
pub fn verify_hypotheses(levels: &[Vec<ConvexPolygon>], frame: Frame) -> Result<GraphHypotheses> {
    verify_hypotheses_with(levels, frame, None)
}

/// As [`verify_hypotheses`], with known `(c, σ)` replacing the fit.
pub fn verify_hypotheses_with(levels: &[Vec<ConvexPolygon>], frame: Frame, known: Option<(f64, f64)>) -> Result<GraphHypotheses> {
    if levels.is_empty() || levels.iter().any(|l| l.is_empty()) {
        return Err(Error::InvalidInput("every level needs at least one piece".into()));
    }
    let mut lambda_piece = 0.0f64;
    let mut lambda_connector = 0.0f64;
    let mut prev: Option<Vec<(usize, PieceFrame)>> = None;
    let mut max_diameters = Vec::with_capacity(levels.len());
    for (k, pieces) in levels.iter().enumerate() {
        let level = k + 1;
        let sorted = frames_sorted(pieces, &frame);
        let (p, c) = level_slopes(level, &sorted, &frame)?;
        lambda_piece = lambda_piece.max(p);
        lambda_connector = lambda_connector.max(c);
        if let Some(pf) = &prev {
            check_nested(level, &levels[k - 1], pf, pieces, &sorted)?;
        }
        max_diameters.push(pieces.iter().map(ConvexPolygon::diameter).fold(0.0, f64::max));
        prev = Some(sorted);
    }
    let (c, sigma) = match known {
        Some((c, s)) => (c, s),
        None => fit_geometric(&max_diameters, &levels[0])?,
    };
    if !(sigma > 0.0 && sigma < 1.0 && c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "diameter constants must satisfy c > 0 and 0 < σ < 1 (c = {c}, σ = {sigma})"
        )));
    }
    Ok(GraphHypotheses {
        lambda: lambda_piece.max(lambda_connector),
        lambda_piece,
        lambda_connector,
        c,
        sigma,
        max_diameters,
    })
}

fn fit_geometric(d: &[f64], first: &[ConvexPolygon]) -> Result<(f64, f64)> {
    let sigma = if d.len() >= 2 {
        d.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    } else {
        let pts: Vec<Point> = first.iter().flat_map(|p| p.vertices().iter().copied()).collect();
        let whole = ConvexPolygon::hull(&pts)?.diameter();
        let s = if whole > 0.0 { d[0] / whole } else { 0.5 };
        if s > 0.0 && s < 1.0 {
            s
        } else {
            0.5
        }
    };
    if !(sigma < 1.0) {
        return Err(Error::InvalidInput(format!(
            "piece diameters do not shrink (ratio {sigma})"
        )));
    }
    let c = d
        .iter()
        .enumerate()
        .map(|(k, &dk)| dk / sigma.powi(k as i32 + 1))
        .fold(0.0, f64::max);
    Ok((c, sigma))
}

/// A continuous piecewise-linear function in frame coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PLGraph {
    pub frame: Frame,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// World position of each breakpoint, kept for accurate slopes.
    #[serde(skip)]
    points: Vec<Point>,
}

impl PLGraph {
    pub fn domain(&self) -> Interval {
        Interval::new(self.xs[0], *self.xs.last().unwrap())
    }

    /// Value at `x`, constant beyond the breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x).max(1);
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest segment slope.
    pub fn lipschitz(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| {
                let (dx, dy) = self.frame.to_frame(p[1] - p[0]);
                dy.abs() / dx
            })
            .fold(0.0, f64::max)
    }

    /// `sup |f − g|` over the union of both domains: exact at the merged
    /// breakpoints, plus 10³ uniform samples.
    pub fn sup_distance(&self, other: &PLGraph) -> f64 {
        let mut xs: Vec<f64> = self.xs.iter().chain(other.xs.iter()).copied().collect();
        let lo = self.xs[0].min(other.xs[0]);
        let hi = self.xs.last().unwrap().max(*other.xs.last().unwrap());
        xs.extend((0..=1000).map(|i| lo + (hi - lo) * i as f64 / 1000.0));
        xs.iter()
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn world_polyline(&self) -> Vec<Point> {
        self.points.clone()
    }
}

/// Graph `g_n` of one level over `domain`.
pub fn build_level(pieces: &[ConvexPolygon], frame: Frame, domain: Interval) -> Result<PLGraph> {
    if pieces.is_empty() {
        return Err(Error::InvalidInput("cannot build a graph over no pieces".into()));
    }
    let sorted = frames_sorted(pieces, &frame);
    level_slopes(0, &sorted, &frame)?;
    let mut xs: Vec<f64> = Vec::with_capacity(2 * sorted.len() + 2);
    let mut ys: Vec<f64> = Vec::with_capacity(2 * sorted.len() + 2);
    let mut points: Vec<Point> = Vec::with_capacity(2 * sorted.len() + 2);
    let mut push = |x: f64, y: f64, p: Point| {
        if let Some(&last) = xs.last() {
            if x <= last + GEOM_TOL {
                return;
            }
        }
        xs.push(x);
        ys.push(y);
        points.push(p);
    };
    let first = sorted[0].1;
    if domain.lo < first.x_lo - GEOM_TOL {
        push(domain.lo, first.y_left, frame.to_world(domain.lo, first.y_left));
    }
    for &(_, pf) in &sorted {
        push(pf.x_lo, pf.y_left, pf.left);
        push(pf.x_hi, pf.y_right, pf.right);
    }
    let last = sorted[sorted.len() - 1].1;
    if domain.hi > last.x_hi + GEOM_TOL {
        push(domain.hi, last.y_right, frame.to_world(domain.hi, last.y_right));
    }
    if xs.len() == 1 {
        let x = xs[0] + GEOM_TOL;
        let y = ys[0];
        xs.push(x);
        ys.push(y);
        points.push(frame.to_world(x, y));
    }
    Ok(PLGraph { frame, xs, ys, points })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub pieces: usize,
    pub breakpoints: usize,
    pub lipschitz: f64,
    /// `sup |g_n − g_{n−1}|`, absent at the first level.
    pub cauchy_sup: Option<f64>,
    /// `cσ^{n−1}`.
    pub cauchy_bound: Option<f64>,
    /// Whether `cauchy_sup ≤ cσ^{n−1}`.
    pub cauchy_pass: Option<bool>,
    pub containment: ContainmentReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphBuild {
    pub hypotheses: GraphHypotheses,
    pub graphs: Vec<PLGraph>,
    pub levels: Vec<LevelReport>,
    /// Largest measured slope over all levels.
    pub lipschitz: f64,
    /// Every level met `sup |g_n − g_{n−1}| ≤ cσ^{n−1}`.
    pub cauchy_pass: bool,
    /// Bound `(1+2λ)cσ^L/(1−σ)` on the distance from the deepest graph to the limit.
    pub tail_bound: f64,
}

/// Factor `1 + 2λ` in the unconditional estimate `|g_n − g_m| ≤ (1+2λ)cσ^m`.
///
/// The sharper `cσ^m` needs the children of each piece to reach its leftmost
/// and rightmost frame points. Otherwise, between a parent's edge and its
/// first child `g_n` follows a connector of slope up to λ across a width of
/// at most `cσ^m`, which costs the extra `2λcσ^m`.
pub fn cauchy_factor(lambda: f64) -> f64 {
    1.0 + 2.0 * lambda
}

impl GraphBuild {
    pub fn deepest(&self) -> &PLGraph {
        self.graphs.last().expect("at least one level")
    }
}

/// Builds `g_1, …, g_L` and checks the Cauchy and covering estimates.
pub fn build_graph(levels: &[Vec<ConvexPolygon>], frame: Frame, hyp: &GraphHypotheses) -> Result<GraphBuild> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no levels to build".into()));
    }
    let first = frames_sorted(&levels[0], &frame);
    let domain = Interval::new(
        first.iter().map(|(_, f)| f.x_lo).fold(f64::INFINITY, f64::min),
        first.iter().map(|(_, f)| f.x_hi).fold(f64::NEG_INFINITY, f64::max),
    );
    let mut graphs: Vec<PLGraph> = Vec::with_capacity(levels.len());
    let mut reports = Vec::with_capacity(levels.len());
    for (k, pieces) in levels.iter().enumerate() {
        let n = k + 1;
        let g = build_level(pieces, frame, domain).map_err(|e| relevel(e, n))?;
        let (cauchy_sup, cauchy_bound, cauchy_pass) = match graphs.last() {
            Some(prev) => {
                let sup = g.sup_distance(prev);
                let bound = hyp.c * hyp.sigma.powi(n as i32 - 1);
                let hard = cauchy_factor(hyp.lambda) * bound;
                if sup > hard + GEOM_TOL {
                    return Err(Error::HypothesisInconsistency { level: n, sup, bound: hard });
                }
                (Some(sup), Some(bound), Some(sup <= bound + GEOM_TOL))
            }
            None => (None, None, None),
        };
        let containment = containment_check(pieces, &g, hyp.c * hyp.sigma.powi(n as i32));
        reports.push(LevelReport {
            level: n,
            pieces: pieces.len(),
            breakpoints: g.xs.len(),
            lipschitz: g.lipschitz(),
            cauchy_sup,
            cauchy_bound,
            cauchy_pass,
            containment,
        });
        graphs.push(g);
    }
    let lipschitz = reports.iter().map(|r| r.lipschitz).fold(0.0, f64::max);
    let cauchy_pass = reports.iter().all(|r| r.cauchy_pass != Some(false));
    let depth = levels.len() as i32;
    Ok(GraphBuild {
        hypotheses: hyp.clone(),
        graphs,
        levels: reports,
        lipschitz,
        cauchy_pass,
        tail_bound: cauchy_factor(hyp.lambda) * hyp.c * hyp.sigma.powi(depth) / (1.0 - hyp.sigma),
    })
}

fn relevel(e: Error, level: usize) -> Error {
    match e {
        Error::VerticalPiece { index, .. } => Error::VerticalPiece { level, index },
        Error::OverlappingPieces { left, right, .. } => Error::OverlappingPieces { level, left, right },
        other => other,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainmentReport {
    pub pass: bool,
    pub radius: f64,
    /// Largest vertical (frame) distance from a vertex to the graph.
    pub max_distance: f64,
    /// Piece index and vertex attaining the maximum.
    pub witness: Option<(usize, Point)>,
}

/// Checks that every vertex lies within `radius` (frame-vertically) of the graph.
pub fn containment_check(pieces: &[ConvexPolygon], graph: &PLGraph, radius: f64) -> ContainmentReport {
    let per_piece = exec::map_range(pieces.len(), |i| {
        pieces[i]
            .vertices()
            .iter()
            .map(|&v| {
                let (x, y) = graph.frame.to_frame(v);
                ((y - graph.eval(x)).abs(), v)
            })
            .fold((0.0f64, Point::ORIGIN), |a, b| if b.0 > a.0 { b } else { a })
    });
    let mut max_distance = 0.0;
    let mut witness = None;
    for (i, (d, v)) in per_piece.into_iter().enumerate() {
        if d > max_distance {
            max_distance = d;
            witness = Some((i, v));
        }
    }
    ContainmentReport {
        pass: max_distance <= radius + GEOM_TOL,
        radius,
        max_distance,
        witness,
    }
}
