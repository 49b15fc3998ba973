//! The four-corner Cantor set `C₄`, its two graph-friendly sub-systems and
//! the m-functional used to compute its length.
//!
//! The ad hoc family keeps the corners 1, 2, 4 and zooms into corner 3 with
//! alternating letters; the generic family keeps every word of length `m`
//! ending in 1 or 3. Both come with closed-form frame angles and slope
//! bounds, which the graph builder confirms on generated levels.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{union_length, ConvexPolygon, Point};
use crate::graph::Frame;
use crate::ifs::{generation, Ifs, SimilarityMap, Word};

/// Lower-left corners of the four first-level squares, in the usual order.
pub const C4_OFFSETS: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 0.75), (0.75, 0.0), (0.75, 0.75)];

/// Angle `arctan(1/2)` onto which every generation projects to a full interval.
pub fn full_projection_angle() -> f64 {
    0.5f64.atan()
}

pub fn c4_ifs() -> Ifs {
    let maps = C4_OFFSETS
        .iter()
        .map(|&(x, y)| SimilarityMap::new(0.25, 0.0, Point::new(x, y)).expect("scale 1/4"))
        .collect();
    Ifs::from_maps_unsorted(maps).expect("four maps").with_osc(true)
}

/// `k`-map corner system: the two top corners plus `k − 2` evenly spaced
/// bottom squares, each of side `1/k`.
pub fn ck_ifs(k: usize) -> Result<Ifs> {
    if k < 3 {
        return Err(Error::InvalidInput(format!("corner system needs k >= 3, got {k}")));
    }
    let r = 1.0 / k as f64;
    let top = 1.0 - r;
    let mut maps = vec![
        SimilarityMap::new(r, 0.0, Point::new(0.0, top))?,
        SimilarityMap::new(r, 0.0, Point::new(top, top))?,
    ];
    for i in 0..k - 2 {
        let x = if k == 3 { 0.0 } else { top * i as f64 / (k - 3) as f64 };
        maps.push(SimilarityMap::new(r, 0.0, Point::new(x, 0.0))?);
    }
    Ok(Ifs::from_maps_unsorted(maps)?.with_osc(true))
}

fn word(letters: &[usize]) -> Word {
    Word(letters.iter().map(|&l| l - 1).collect())
}

/// A sub-system of `C₄` given by finitely many words, with its frame data.
#[derive(Clone, Debug, Serialize)]
pub struct Family {
    pub m: usize,
    /// Words (0-based letters) in lexicographic order.
    pub words: Vec<Word>,
    pub theta: f64,
    pub lambda: f64,
    /// Similarity dimension of the sub-system.
    pub s: f64,
    /// Known diameter constants `(c, σ)` with `diam ≤ cσ^n` at level `n`.
    pub c: f64,
    pub sigma: f64,
}

impl Family {
    pub fn frame(&self) -> Frame {
        Frame::new(self.theta)
    }

    pub fn ifs(&self) -> Ifs {
        let base = c4_ifs();
        let maps = self
            .words
            .iter()
            .map(|w| base.compose(w).expect("nonempty word"))
            .collect();
        Ifs::from_maps_unsorted(maps).expect("nonempty family").with_osc(true)
    }

    /// Levels `E_1, …, E_depth` of the nested family.
    pub fn levels(&self, depth: usize) -> Result<Vec<Vec<ConvexPolygon>>> {
        let ifs = self.ifs();
        let q = ConvexPolygon::unit_square();
        (1..=depth).map(|n| Ok(generation(&ifs, &q, n)?.polygons())).collect()
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("family index m must be >= 1".into()));
    }
    if m > 30 {
        return Err(Error::ResourceCap {
            what: "family index m",
            requested: m as f64,
            cap: 30.0,
        });
    }
    Ok(())
}

/// Words `{(1),(2),(4)} ∪ {(3, k₂, …, k_j) : k_i ∈ {1,3}, k_j ∈ {2,4}, 2 ≤ j ≤ m}`.
pub fn adhoc_words(m: usize) -> Vec<Word> {
    let mut words = vec![word(&[1]), word(&[2]), word(&[4])];
    for len in 2..=m {
        let middle = len - 2;
        for bits in 0..1usize << middle {
            for last in [2usize, 4] {
                let mut w = vec![3usize];
                w.extend((0..middle).map(|i| if bits >> (middle - 1 - i) & 1 == 0 { 1 } else { 3 }));
                w.push(last);
                words.push(word(&w));
            }
        }
    }
    words.sort();
    words
}

/// Solves `2x + x Σ_{k<m} (2x)^k = 1` for `s` where `x = 4^{−s}`.
pub fn adhoc_dimension(m: usize) -> f64 {
    let f = |s: f64| {
        let x = 4f64.powf(-s);
        let geo: f64 = (0..m).map(|k| (2.0 * x).powi(k as i32)).sum();
        2.0 * x + x * geo - 1.0
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn adhoc_root(m: usize) -> f64 {
    let q = 4f64.powi(m as i32);
    (1.0 - 24.0 / (5.0 * q) + 36.0 / (5.0 * q * q)).sqrt()
}

pub fn adhoc_tan_theta(m: usize) -> f64 {
    let q = 4f64.powi(m as i32);
    (-3.0 + 12.0 / q + 5.0 * adhoc_root(m)) / (4.0 - 6.0 / q)
}

pub fn adhoc_lambda(m: usize) -> f64 {
    let q = 4f64.powi(m as i32);
    5.0 * q / 6.0 * (1.0 + adhoc_root(m) - 12.0 / (5.0 * q))
}

pub fn adhoc_family(m: usize) -> Result<Family> {
    check_m(m)?;
    Ok(Family {
        m,
        words: adhoc_words(m),
        theta: adhoc_tan_theta(m).atan(),
        lambda: adhoc_lambda(m),
        s: adhoc_dimension(m),
        c: SQRT_2,
        sigma: 0.25,
    })
}

/// All words of length `m` whose last letter is 1 or 3.
pub fn generic_words(m: usize) -> Vec<Word> {
    let count = 1usize << (2 * m - 1);
    (0..count)
        .map(|i| {
            let last = if i % 2 == 0 { 0 } else { 2 };
            let mut rest = i / 2;
            let mut w = vec![0usize; m];
            w[m - 1] = last;
            for slot in (0..m - 1).rev() {
                w[slot] = rest % 4;
                rest /= 4;
            }
            Word(w)
        })
        .collect()
}

pub fn generic_theta(m: usize) -> f64 {
    let q = 4f64.powi(m as i32);
    FRAC_PI_2 - 0.5 * ((2.0 + 12.0 / q).atan() + (2.0 - 6.0 / q).atan())
}

pub fn generic_lambda(m: usize) -> f64 {
    let a = 5.0 / 18.0 * 4f64.powi(m as i32) + 2.0 / 3.0 - 4f64.powi(1 - m as i32);
    a + (a * a + 1.0).sqrt()
}

pub fn generic_family(m: usize) -> Result<Family> {
    check_m(m)?;
    if m > 10 {
        return Err(Error::ResourceCap {
            what: "generic family word count",
            requested: 2f64.powi(2 * m as i32 - 1),
            cap: 2f64.powi(19),
        });
    }
    Ok(Family {
        m,
        words: generic_words(m),
        theta: generic_theta(m),
        lambda: generic_lambda(m),
        s: 1.0 - 1.0 / (2.0 * m as f64),
        c: SQRT_2,
        sigma: 4f64.powi(-(m as i32)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SimDimRow {
    pub m: usize,
    pub s: f64,
    /// `2^m (1 − s_m)`.
    pub scaled_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimDimTable {
    pub rows: Vec<SimDimRow>,
    /// `c = max_m 2^m (1 − s_m)`.
    pub c: f64,
    pub increasing: bool,
    pub below_one: bool,
    /// Consecutive scaled gaps differ by a factor in `[0.5, 2]`.
    pub stable: bool,
}

impl SimDimTable {
    pub fn pass(&self) -> bool {
        self.increasing && self.below_one && self.stable
    }
}

/// Tabulates `s_m` of the ad hoc family and the constant in `s_m ≥ 1 − c/2^m`.
pub fn simdim_bound_check(ms: std::ops::RangeInclusive<usize>) -> Result<SimDimTable> {
    if *ms.start() == 0 || ms.is_empty() {
        return Err(Error::InvalidInput("m range must be nonempty and start at 1 or above".into()));
    }
    let rows: Vec<SimDimRow> = ms
        .map(|m| {
            let s = adhoc_dimension(m);
            SimDimRow {
                m,
                s,
                scaled_gap: 2f64.powi(m as i32) * (1.0 - s),
            }
        })
        .collect();
    let c = rows.iter().map(|r| r.scaled_gap).fold(0.0, f64::max);
    let increasing = rows.windows(2).all(|w| w[1].s > w[0].s);
    let below_one = rows.iter().all(|r| r.s < 1.0);
    let stable = rows.windows(2).all(|w| {
        let q = w[1].scaled_gap / w[0].scaled_gap;
        (0.5..=2.0).contains(&q)
    });
    Ok(SimDimTable {
        rows,
        c,
        increasing,
        below_one,
        stable,
    })
}

/// A rectangle with sides parallel to `y = ±x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DaviesRect {
    pub center: Point,
    /// Half-width along the direction `(1, 1)/√2`.
    pub half_plus: f64,
    /// Half-width along the direction `(1, −1)/√2`.
    pub half_minus: f64,
}

impl DaviesRect {
    pub fn new(center: Point, half_plus: f64, half_minus: f64) -> Result<Self> {
        if !(half_plus >= 0.0 && half_minus >= 0.0) {
            return Err(Error::InvalidInput("half-widths must be nonnegative".into()));
        }
        Ok(DaviesRect {
            center,
            half_plus,
            half_minus,
        })
    }

    /// Smallest such rectangle containing the given points.
    pub fn enclosing(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("no points to enclose".into()));
        }
        let (u, v) = axes();
        let range = |d: Point| {
            points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.dot(d)), hi.max(p.dot(d))))
        };
        let (ul, uh) = range(u);
        let (vl, vh) = range(v);
        let center = u * (0.5 * (ul + uh)) + v * (0.5 * (vl + vh));
        DaviesRect::new(center, 0.5 * (uh - ul), 0.5 * (vh - vl))
    }

    pub fn polygon(&self) -> ConvexPolygon {
        let (u, v) = axes();
        let (a, b) = (u * self.half_plus, v * self.half_minus);
        let c = self.center;
        ConvexPolygon::hull(&[c - a - b, c + a - b, c + a + b, c - a + b]).expect("four points")
    }
}

fn axes() -> (Point, Point) {
    (Point::unit(FRAC_PI_4), Point::unit(-FRAC_PI_4))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DaviesM {
    pub m_plus: f64,
    pub m_minus: f64,
    pub m: f64,
}

/// `mE = ½(m⁺E + m⁻E)` from the projections onto `y = x` and `y = −x`.
pub fn davies_m(e: &ConvexPolygon) -> DaviesM {
    let m_plus = e.width(FRAC_PI_4);
    let m_minus = e.width(3.0 * FRAC_PI_4);
    DaviesM {
        m_plus,
        m_minus,
        m: 0.5 * (m_plus + m_minus),
    }
}

/// The four corner squares of side `ℓ/4` inside the square `q`.
pub fn corner_children(q: &ConvexPolygon) -> [ConvexPolygon; 4] {
    let xs = q.project(0.0);
    let ys = q.project(FRAC_PI_2);
    let side = xs.len();
    C4_OFFSETS.map(|(dx, dy)| ConvexPolygon::square(xs.lo + dx * side, ys.lo + dy * side, side / 4.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct DaviesCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

pub const DAVIES_TOL: f64 = 1e-9;

/// Compares `mE` with `Σ m(E ∩ Qⁱ)` over the corner children of `q`.
pub fn davies_inequality_check(e: &DaviesRect, q: &ConvexPolygon) -> DaviesCheck {
    let poly = e.polygon();
    let lhs = davies_m(&poly).m;
    let rhs: f64 = corner_children(q)
        .iter()
        .filter_map(|child| poly.clip(child))
        .map(|piece| davies_m(&piece).m)
        .sum();
    let margin = lhs - rhs;
    DaviesCheck {
        lhs,
        rhs,
        margin,
        pass: margin >= -DAVIES_TOL,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DaviesRandomReport {
    pub trials: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst_rect: Option<DaviesRect>,
}

/// Random rectangles around the unit square; trial `i` uses stream `i` of a
/// ChaCha generator seeded with `seed`, so results do not depend on threading.
pub fn davies_random_check(trials: usize, seed: u64) -> DaviesRandomReport {
    let q = ConvexPolygon::unit_square();
    let results = exec::map_range(trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let center = Point::new(rng.gen_range(-0.25..1.25), rng.gen_range(-0.25..1.25));
        let rect = DaviesRect {
            center,
            half_plus: rng.gen_range(0.0..0.8),
            half_minus: rng.gen_range(0.0..0.8),
        };
        (davies_inequality_check(&rect, &q), rect)
    });
    let mut worst_margin = f64::INFINITY;
    let mut worst_rect = None;
    let mut violations = 0;
    for (check, rect) in results {
        if !check.pass {
            violations += 1;
        }
        if check.margin < worst_margin {
            worst_margin = check.margin;
            worst_rect = Some(rect);
        }
    }
    DaviesRandomReport {
        trials,
        violations,
        worst_margin,
        worst_rect,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasureBracket {
    pub n: usize,
    /// `|P_{arctan(1/2)}(C_n)|`.
    pub lower: f64,
    /// `Σ diam` over the squares of `C_n`.
    pub upper: f64,
}

/// Lower and upper bounds for the length of `C₄` from generation `n`.
pub fn c4_measure_bracket(n: usize) -> Result<MeasureBracket> {
    if n == 0 {
        return Err(Error::InvalidInput("generation must be >= 1".into()));
    }
    let gen = generation(&c4_ifs(), &ConvexPolygon::unit_square(), n)?;
    let polys = gen.polygons();
    let diameters: Vec<f64> = exec::map_slice(&polys, ConvexPolygon::diameter);
    let upper = exec::compensated_sum(&diameters);
    let theta = full_projection_angle();
    let lower = union_length(&polys.iter().map(|p| p.project(theta)).collect::<Vec<_>>());
    Ok(MeasureBracket { n, lower, upper })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeRow {
    pub family: &'static str,
    pub m: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub envelope: f64,
    pub pass: bool,
}

/// Compares closed-form slopes with the growth envelopes `cε^{−2}` (ad hoc,
/// `ε = 1 − s_m`) and `c·2^{1/ε}` (generic, `ε = 1/(2m)`), `c` fitted at `m = 1`.
pub fn envelope_check(ms: std::ops::RangeInclusive<usize>) -> Vec<EnvelopeRow> {
    let eps_adhoc = |m: usize| 1.0 - adhoc_dimension(m);
    let c_adhoc = adhoc_lambda(1) * eps_adhoc(1).powi(2);
    let c_generic = generic_lambda(1) / 4.0;
    let mut rows = Vec::new();
    for m in ms {
        let e = eps_adhoc(m);
        let env = c_adhoc / (e * e);
        let l = adhoc_lambda(m);
        rows.push(EnvelopeRow {
            family: "adhoc",
            m,
            lambda: l,
            epsilon: e,
            envelope: env,
            pass: l <= env * (1.0 + 1e-12),
        });
        let e = 1.0 / (2.0 * m as f64);
        let env = c_generic * 2f64.powf(1.0 / e);
        let l = generic_lambda(m);
        rows.push(EnvelopeRow {
            family: "generic",
            m,
            lambda: l,
            epsilon: e,
            envelope: env,
            pass: l <= env * (1.0 + 1e-12),
        });
    }
    rows
}
