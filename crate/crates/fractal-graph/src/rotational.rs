//! Rotational pipeline: reduce a rotational IFS to a uniform one, find the
//! directions in which generation pieces project to many separated
//! intervals, follow the rotation orbit of a persistent direction and build
//! nested subsets whose projections stay separated at every level.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::dimension::{hata_bound, HataReport, NestedStats};
use crate::error::{Error, Result};
use crate::exec;
use crate::favard::AngleGrid;
use crate::geometry::{Angle, ConvexPolygon, Interval};
use crate::graph::{build_graph, graph_depth, verify_hypotheses_with, Frame, GraphBuild, GRAPH_MIN_SCALE, GRAPH_PIECE_CAP};
use crate::ifs::{check_piece_count, generation, invariant_hull, Ifs, RationalRotation, SimilarityMap, Word, DEFAULT_PIECE_CAP};

/// Tolerance on equal scales and angles inside a [`Uifs`].
pub const UIFS_TOL: f64 = 1e-12;

/// Largest κ tried by [`uniformize`].
pub const KAPPA_WINDOW: usize = 65;

/// Cap on the number of candidate words composed per κ.
pub const UNIFORMIZE_WORD_CAP: usize = 1_000_000;

/// Above this many parents, separation is checked on an evenly spaced sample.
pub const EXPLICIT_PARENT_CAP: usize = 4096;

/// Relative tolerance of the separation assertions.
pub const SEPARATION_TOL: f64 = 1e-9;

/// Regularity constants entering the threshold `δ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationalConstants {
    /// Constant of the separated-projection estimate.
    pub c_e: f64,
    /// Lower Ahlfors constant.
    pub a: f64,
    /// Upper Ahlfors constant.
    pub b: f64,
    /// Overlapping index.
    pub omega: f64,
}

impl Default for RotationalConstants {
    fn default() -> Self {
        RotationalConstants {
            c_e: 1.0,
            a: 1.0,
            b: 1.0,
            omega: 1.0,
        }
    }
}

/// Where `r` and `κ` sit relative to the dimension-drop brackets
/// `c₁(c₂η)^{c₃/η} ≤ r ≤ (1.5c₂η)^{c₃/(3η)}` and `κ₁ ≤ κ ≤ κ₂`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DropBrackets {
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    pub r_in_bracket: bool,
    /// `T = Σ r_k^s log(1/r_k)`.
    pub t: f64,
    /// `g⁻¹(M/(2Tη))` with `g(x) = x/log x`, when the argument exceeds `e`.
    pub kappa1: Option<f64>,
    /// `g⁻¹(3M/(4Tη))`, when the argument exceeds `e`.
    pub kappa2: Option<f64>,
    pub kappa_in_bracket: Option<bool>,
}

/// Inverse of `g(x) = x/log x` on `(e, ∞)`.
pub fn g_inverse(y: f64) -> Option<f64> {
    if !(y > E) || !y.is_finite() {
        return None;
    }
    let g = |x: f64| x / x.ln();
    let mut lo = E;
    let mut hi = (2.0 * y * y.ln()).max(E + 1.0);
    while g(hi) < y {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn drop_brackets(source_scales: &[f64], dim: f64, eta: f64, r: f64, kappa: usize) -> DropBrackets {
    let m = source_scales.len() as f64;
    let c1: f64 = source_scales.iter().product();
    let t: f64 = source_scales.iter().map(|&rk| rk.powf(dim) * (1.0 / rk).ln()).sum();
    let c2 = 4.0 * t / (3.0 * m);
    let c3 = 1.5 * m;
    let r_lower = c1 * (c2 * eta).powf(c3 / eta);
    let r_upper = (1.5 * c2 * eta).powf(c3 / (3.0 * eta));
    let kappa1 = g_inverse(m / (2.0 * t * eta));
    let kappa2 = g_inverse(3.0 * m / (4.0 * t * eta));
    let kappa_in_bracket = match (kappa1, kappa2) {
        (Some(k1), Some(k2)) => Some(k1 <= kappa as f64 && kappa as f64 <= k2),
        _ => None,
    };
    DropBrackets {
        eta,
        c1,
        c2,
        c3,
        r_lower,
        r_upper,
        r_in_bracket: r_lower <= r && r <= r_upper,
        t,
        kappa1,
        kappa2,
        kappa_in_bracket,
    }
}

/// A uniform IFS `x ↦ rAx + z_j` made of compositions of a parent system.
#[derive(Clone, Debug, Serialize)]
pub struct Uifs {
    pub maps: Ifs,
    /// Common scale factor.
    pub r: f64,
    /// Common rotation `A`.
    pub rotation: RationalRotation,
    /// Similarity dimension `log N / log(1/r)`.
    pub gamma: f64,
    /// Parent words `k^(κ)` behind each map.
    pub source_words: Vec<Word>,
    pub kappa: usize,
    /// Scales of the parent system.
    pub source_scales: Vec<f64>,
    /// Size of the rotation class the maps were drawn from.
    pub class_size: usize,
    pub brackets: Option<DropBrackets>,
}

impl Uifs {
    /// Checks that all maps share one scale and one exact rotation.
    pub fn new(maps: Ifs, source_words: Vec<Word>, kappa: usize, source_scales: Vec<f64>) -> Result<Self> {
        let first = maps.maps()[0];
        let rotation = first
            .rot
            .ok_or_else(|| Error::Unsupported("uniform systems need rational rotations".into()))?;
        for m in maps.maps() {
            if (m.r - first.r).abs() > UIFS_TOL {
                return Err(Error::InvalidInput(format!("scales {} and {} differ", first.r, m.r)));
            }
            if m.rot != Some(rotation) {
                return Err(Error::InvalidInput("maps of a uniform system must share one rotation".into()));
            }
        }
        let r = first.r;
        let n = maps.len();
        let gamma = (n as f64).ln() / (1.0 / r).ln();
        Ok(Uifs {
            maps,
            r,
            rotation,
            gamma,
            source_words,
            kappa,
            source_scales,
            class_size: n,
            brackets: None,
        })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Rotation angle α of `A` in radians.
    pub fn alpha(&self) -> f64 {
        self.rotation.radians()
    }

    /// `T_A^k(θ) = θ − kα (mod π)`, the direction in which `P_θ ∘ A^k` projects.
    pub fn rotated_direction(&self, theta: f64, k: usize) -> f64 {
        let q = self.rotation.q;
        let shift = (-(k as i128) * self.rotation.p as i128).rem_euclid(q as i128) as f64 / q as f64;
        reduce_unit(theta / PI + shift) * PI
    }
}

fn reduce_unit(t: f64) -> f64 {
    let f = t - t.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// All words with exactly `counts[k]` copies of letter `k`, in lexicographic order.
fn multiset_words(counts: &[usize]) -> Vec<Word> {
    fn rec(counts: &mut [usize], cur: &mut Vec<usize>, len: usize, out: &mut Vec<Word>) {
        if cur.len() == len {
            out.push(Word(cur.clone()));
            return;
        }
        for k in 0..counts.len() {
            if counts[k] > 0 {
                counts[k] -= 1;
                cur.push(k);
                rec(counts, cur, len, out);
                cur.pop();
                counts[k] += 1;
            }
        }
    }
    let len = counts.iter().sum();
    let mut out = Vec::new();
    rec(&mut counts.to_vec(), &mut Vec::with_capacity(len), len, &mut out);
    out
}

fn multinomial(counts: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut log = 0.0;
    for &c in counts {
        for i in 1..=c {
            total += 1;
            log += (total as f64).ln() - (i as f64).ln();
        }
    }
    log.exp()
}

fn rotation_cmp(a: RationalRotation, b: RationalRotation) -> Ordering {
    (a.p as i128 * b.q as i128).cmp(&(b.p as i128 * a.q as i128))
}

/// Reduces a rotational IFS of dimension one to a uniform sub-system whose
/// dimension `γ` lies in `[1 − η, 1 − η/2]`.
///
/// For each `κ = 1, 2, …` the candidate words are all words of length κ
/// (uniform scales) or the words with letter counts `v_k = ⌈κ r_k^s⌉`
/// (otherwise). Candidates are grouped by exact rotation; the largest class
/// is kept, and the first `N` of its words are used, with `N` the largest
/// integer in `[r^{−(1−η)}, r^{−(1−η/2)}]` the class can supply.
pub fn uniformize(ifs: &Ifs, eta: f64) -> Result<Uifs> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    if ifs.maps().iter().any(|m| m.rot.is_none()) {
        return Err(Error::Unsupported(
            "uniformization needs every rotation declared as a rational multiple of pi".into(),
        ));
    }
    let dim = ifs.similarity_dimension();
    if (dim - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("similarity dimension must be 1, got {dim}")));
    }
    let n = ifs.len();
    let scales: Vec<f64> = ifs.maps().iter().map(|m| m.r).collect();
    let uniform = ifs.has_uniform_scale();
    for kappa in 1..=KAPPA_WINDOW {
        let words = if uniform {
            let count = (n as f64).powi(kappa as i32);
            if count > UNIFORMIZE_WORD_CAP as f64 {
                break;
            }
            (0..count as usize).map(|i| crate::ifs::word_from_index(i, n, kappa)).collect::<Vec<_>>()
        } else {
            let counts: Vec<usize> = scales.iter().map(|r| (kappa as f64 * r.powf(dim)).ceil() as usize).collect();
            if multinomial(&counts) > UNIFORMIZE_WORD_CAP as f64 {
                break;
            }
            multiset_words(&counts)
        };
        let composed: Vec<SimilarityMap> = exec::map_slice(&words, |w| ifs.compose(w).expect("letters in range"));
        let mut classes: HashMap<RationalRotation, Vec<usize>> = HashMap::new();
        for (i, m) in composed.iter().enumerate() {
            classes.entry(m.rot.expect("rational rotations compose")).or_default().push(i);
        }
        let (rotation, members) = classes
            .into_iter()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(rotation_cmp(b.0, a.0)))
            .expect("at least one word");
        let r = composed[members[0]].r;
        let lo = r.powf(-(1.0 - eta));
        let hi = r.powf(-(1.0 - eta / 2.0));
        let keep = ((hi * (1.0 + UIFS_TOL)).floor() as usize).min(members.len());
        if keep == 0 || (keep as f64) < lo * (1.0 - UIFS_TOL) {
            continue;
        }
        let chosen = &members[..keep];
        let maps: Vec<SimilarityMap> = chosen
            .iter()
            .map(|&i| SimilarityMap { r, ..composed[i] })
            .collect();
        let source_words = chosen.iter().map(|&i| words[i].clone()).collect();
        let mut u = Uifs::new(Ifs::from_maps_unsorted(maps)?, source_words, kappa, scales.clone())?;
        debug_assert_eq!(u.rotation, rotation);
        u.class_size = members.len();
        u.brackets = Some(drop_brackets(&scales, dim, eta, r, kappa));
        return Ok(u);
    }
    Err(Error::UniformizationFailed(format!(
        "no kappa up to {KAPPA_WINDOW} gives a rotation class of size in [r^-(1-eta), r^-(1-eta/2)] for eta = {eta}"
    )))
}

/// A finite union of disjoint arcs of `[0, π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleSet {
    arcs: Vec<(f64, f64)>,
    measure: f64,
}

impl AngleSet {
    /// Normalizes the arcs: clips to `[0, π]`, drops empty ones, merges overlaps.
    pub fn new(mut arcs: Vec<(f64, f64)>) -> Self {
        arcs.retain(|&(a, b)| b > a);
        for a in arcs.iter_mut() {
            *a = (a.0.max(0.0), a.1.min(PI));
        }
        arcs.retain(|&(a, b)| b > a);
        arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(arcs.len());
        for (a, b) in arcs {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let measure = merged.iter().map(|(a, b)| b - a).sum();
        AngleSet { arcs: merged, measure }
    }

    pub fn full() -> Self {
        AngleSet::new(vec![(0.0, PI)])
    }

    pub fn empty() -> Self {
        AngleSet::new(Vec::new())
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// `|[0, π) ∖ J|`.
    pub fn complement_measure(&self) -> f64 {
        (PI - self.measure).max(0.0)
    }

    /// Membership of `θ mod π`, with arcs read as half-open `[a, b)`.
    pub fn contains(&self, theta: f64) -> bool {
        let t = Angle::new(theta).radians();
        let i = self.arcs.partition_point(|&(a, _)| a <= t);
        i > 0 && t < self.arcs[i - 1].1
    }
}

/// Indices of a greedy maximal `sep`-separated subfamily: intervals are
/// scanned by left endpoint and kept when their gap to the last kept one
/// exceeds `sep`. The result is sorted by left endpoint.
pub fn greedy_separated(intervals: &[Interval], sep: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&a, &b| {
        intervals[a]
            .lo
            .total_cmp(&intervals[b].lo)
            .then(intervals[a].hi.total_cmp(&intervals[b].hi))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        match kept.last() {
            Some(&l) if intervals[i].lo - intervals[l].hi <= sep => {}
            _ => kept.push(i),
        }
    }
    kept
}

/// Smallest gap between consecutive selected intervals (∞ for fewer than two).
pub fn selected_min_gap(intervals: &[Interval], selected: &[usize]) -> f64 {
    let mut sel: Vec<Interval> = selected.iter().map(|&i| intervals[i]).collect();
    sel.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    sel.windows(2).map(|w| w[1].lo - w[0].hi).fold(f64::INFINITY, f64::min)
}

/// True when no unselected interval is more than `sep` away from every selected one.
pub fn is_maximal(intervals: &[Interval], selected: &[usize], sep: f64) -> bool {
    (0..intervals.len())
        .filter(|i| !selected.contains(i))
        .all(|i| selected.iter().any(|&s| intervals[i].gap(&intervals[s]) <= sep))
}

/// The threshold constant `δ₀` and the quantities behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Delta0 {
    pub nu: f64,
    pub diam: f64,
    /// `max{diam/2, 4/ν, 1}`.
    pub alpha0: f64,
    /// Upper regularity constant `8ωb·diam/(aν)·r^{γ−1}` of the sub-attractor.
    pub b0: f64,
    /// Lower bound `aν/(8ωb·diam^{1−γ})·r^{1−γ}` used for the `γ`-measure.
    pub measure_lower: f64,
    pub delta0: f64,
}

pub fn delta0(uifs: &Uifs, k: &ConvexPolygon, consts: RotationalConstants) -> Delta0 {
    let nu = k.min_width().width;
    let diam = k.diameter();
    let (r, g) = (uifs.r, uifs.gamma);
    let RotationalConstants { c_e, a, b, omega } = consts;
    let alpha0 = (diam / 2.0).max(4.0 / nu).max(1.0);
    let b0 = 8.0 * omega * b * diam / (a * nu) * r.powf(g - 1.0);
    let measure_lower = a * nu / (8.0 * omega * b * diam.powf(1.0 - g)) * r.powf(1.0 - g);
    let delta0 = measure_lower * (1.0 - (-(1.0 - g)).exp())
        / (15.0 * c_e * alpha0.powi(4) * (alpha0 + 1.0) * omega * omega * b0 * (2.0 + 4.0 * alpha0).powf(g));
    Delta0 {
        nu,
        diam,
        alpha0,
        b0,
        measure_lower,
        delta0,
    }
}

/// Separated-projection counts of one generation over an angle grid.
#[derive(Clone, Debug, Serialize)]
pub struct GoodAngles {
    pub level: usize,
    pub grid: usize,
    /// Greedy `r^n`-separated count at each grid angle.
    pub counts: Vec<usize>,
    /// `ε δ₀ r^{−nγ}`.
    pub threshold: f64,
    pub delta0: Delta0,
    /// Grid cells whose count reaches the threshold.
    pub j: AngleSet,
    pub complement_measure: f64,
}

impl GoodAngles {
    /// Count at the grid cell containing `theta`.
    pub fn count_at(&self, theta: f64) -> usize {
        let g = self.counts.len();
        let i = ((Angle::new(theta).radians() / PI) * g as f64).floor() as usize;
        self.counts[i.min(g - 1)]
    }
}

/// Counts, for each grid angle, a greedy maximal family of generation-`n`
/// pieces whose projections are `r^n`-separated, and collects the cells
/// reaching `ε δ₀ r^{−nγ}` into `J`.
pub fn good_angle_set(
    uifs: &Uifs,
    n: usize,
    epsilon: f64,
    grid: AngleGrid,
    k: &ConvexPolygon,
    consts: RotationalConstants,
) -> Result<GoodAngles> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    check_piece_count(uifs.len(), n, DEFAULT_PIECE_CAP)?;
    let polys = if n == 0 {
        vec![k.clone()]
    } else {
        generation(&uifs.maps, k, n)?.polygons()
    };
    let sep = uifs.r.powi(n as i32);
    let counts = exec::map_range(grid.resolution(), |i| {
        let theta = grid.angle(i);
        let iv: Vec<Interval> = polys.iter().map(|p| p.project(theta)).collect();
        greedy_separated(&iv, sep).len()
    });
    let d0 = delta0(uifs, k, consts);
    let threshold = epsilon * d0.delta0 * uifs.r.powf(-(n as f64) * uifs.gamma);
    let step = grid.step();
    let arcs = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c as f64 >= threshold)
        .map(|(i, _)| (i as f64 * step, (i + 1) as f64 * step))
        .collect();
    let j = AngleSet::new(arcs);
    Ok(GoodAngles {
        level: n,
        grid: grid.resolution(),
        counts,
        threshold,
        delta0: d0,
        complement_measure: j.complement_measure(),
        j,
    })
}

/// A rotation step, in units of π.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    /// `−p/q` for a rotation `A` by `pπ/q`.
    Rational { p: i64, q: i64 },
    Real(f64),
}

/// `frac(t₀ + k·x)`, with the product split exactly into `hi + lo`.
fn orbit_unit(t0: f64, step: Step, k: usize) -> f64 {
    match step {
        Step::Rational { p, q } => {
            let m = (-(k as i128) * p as i128).rem_euclid(q as i128) as f64 / q as f64;
            reduce_unit(t0 + m)
        }
        Step::Real(x) => {
            let kf = k as f64;
            let hi = kf * x;
            let lo = kf.mul_add(x, -hi);
            let hf = hi - hi.floor();
            let s = t0 + hf;
            let err = if t0.abs() >= hf.abs() { (t0 - s) + hf } else { (hf - s) + t0 };
            reduce_unit(reduce_unit(s) + (lo + err))
        }
    }
}

/// `T_φ^k(θ) = θ + kφ (mod π)`, computed without accumulating rounding error.
pub fn orbit_angle(theta: f64, phi: f64, k: usize) -> f64 {
    let t0 = Angle::new(theta).radians() / PI;
    let x = Angle::new(phi).radians() / PI;
    orbit_unit(t0, Step::Real(x), k) * PI
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRecord {
    pub theta: f64,
    pub phi: f64,
    /// `D(n; θ)` for `n = 1..=n_max`: the fraction of `k < n` with `T_φ^k(θ) ∈ J`.
    pub per_n: Vec<f64>,
}

impl DensityRecord {
    pub fn min(&self) -> f64 {
        self.per_n.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn density_along(t0: f64, step: Step, sets: &[AngleSet], n_max: usize) -> Vec<f64> {
    let mut hits = 0usize;
    (0..n_max)
        .map(|k| {
            let set = &sets[k.min(sets.len() - 1)];
            if set.contains(orbit_unit(t0, step, k) * PI) {
                hits += 1;
            }
            hits as f64 / (k + 1) as f64
        })
        .collect()
}

/// Orbit density of `θ` under `T_φ(θ) = θ + φ (mod π)` relative to `J`.
pub fn rotation_density(theta: f64, phi: f64, j: &AngleSet, n_max: usize) -> Result<DensityRecord> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let t0 = Angle::new(theta).radians() / PI;
    let x = Angle::new(phi).radians() / PI;
    Ok(DensityRecord {
        theta,
        phi,
        per_n: density_along(t0, Step::Real(x), std::slice::from_ref(j), n_max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PersistentAngle {
    pub theta: f64,
    pub density: DensityRecord,
    pub min_density: f64,
    /// `Σ_k log count(T_A^k θ)` over the orbit, the tie-break score.
    pub log_count_sum: f64,
    pub floor: f64,
}

/// Picks the grid angle whose `T_A` orbit visits the good sets most
/// persistently: level `k` checks `T_A^{k−1}(θ) ∈ J_k`, reusing the last set
/// when fewer than `n_max` are given. Ties go to the larger sum of log
/// counts along the orbit, then to the smaller angle.
pub fn find_persistent_angle(
    uifs: &Uifs,
    j_per_level: &[AngleSet],
    counts: Option<&GoodAngles>,
    epsilon: f64,
    n_max: usize,
    grid: AngleGrid,
) -> Result<PersistentAngle> {
    if j_per_level.is_empty() || n_max == 0 {
        return Err(Error::InvalidInput("need at least one good set and n_max >= 1".into()));
    }
    let step = Step::Rational {
        p: uifs.rotation.p,
        q: uifs.rotation.q,
    };
    let phi = Angle::new(-uifs.alpha()).radians();
    let scored = exec::map_range(grid.resolution(), |i| {
        let t0 = grid.angle(i) / PI;
        let per_n = density_along(t0, step, j_per_level, n_max);
        let min = per_n.iter().copied().fold(f64::INFINITY, f64::min);
        let log_sum: f64 = match counts {
            Some(g) => (0..n_max).map(|k| (g.count_at(orbit_unit(t0, step, k) * PI).max(1) as f64).ln()).sum(),
            None => 0.0,
        };
        (min, log_sum, per_n)
    });
    let (best, (min, log_sum, per_n)) = scored
        .into_iter()
        .enumerate()
        .reduce(|a, b| {
            let better = b.1 .0 > a.1 .0 || (b.1 .0 == a.1 .0 && b.1 .1 > a.1 .1);
            if better {
                b
            } else {
                a
            }
        })
        .expect("grid is nonempty");
    let floor = 1.0 - epsilon / 2.0;
    if min < floor - UIFS_TOL {
        return Err(Error::PersistentAngleNotFound { floor, best: min });
    }
    let theta = grid.angle(best);
    Ok(PersistentAngle {
        theta,
        density: DensityRecord { theta, phi, per_n },
        min_density: min,
        log_count_sum: log_sum,
        floor,
    })
}

/// How the separation of one plan level was verified.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparationCheck {
    /// Real pieces of `E_n` inside each checked parent, projected onto θ.
    Explicit {
        parents_checked: usize,
        sampled: bool,
        /// Smallest gap divided by `r^n`.
        min_gap_ratio: f64,
    },
    /// The single-cell system in the rotated frame, gap divided by `r`.
    Normalized { min_gap_ratio: f64 },
}

impl SeparationCheck {
    pub fn min_gap_ratio(&self) -> f64 {
        match *self {
            SeparationCheck::Explicit { min_gap_ratio, .. } | SeparationCheck::Normalized { min_gap_ratio } => min_gap_ratio,
        }
    }

    pub fn pass(&self) -> bool {
        self.min_gap_ratio() >= 1.0 - SEPARATION_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanLevel {
    pub n: usize,
    /// Direction `T_A^{n−1}(θ)` in which the children are selected.
    pub phi: f64,
    /// Selected children `ℐ_n`, as 0-based map indices in increasing order.
    pub indices: Vec<usize>,
    pub count: usize,
    /// `N_n ≥ r^{−(1−ε/2)}`.
    pub good: bool,
    /// `M_n = N_1 ⋯ N_n`.
    pub components: f64,
    pub log_components: f64,
    pub check: SeparationCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct NestedPlan {
    pub theta: f64,
    pub r: f64,
    pub diam: f64,
    pub levels: Vec<PlanLevel>,
}

impl NestedPlan {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `M_n`, with `M_0 = 1`.
    pub fn components(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.levels[n - 1].components
        }
    }

    pub fn all_separated(&self) -> bool {
        self.levels.iter().all(|l| l.check.pass())
    }

    pub fn good_levels(&self) -> usize {
        self.levels.iter().filter(|l| l.good).count()
    }

    /// Map of the `idx`-th level-`n` component, in mixed-radix order over the plan's index sets.
    pub fn component_map(&self, uifs: &Uifs, n: usize, mut idx: usize) -> SimilarityMap {
        let mut letters = vec![0usize; n];
        for k in (0..n).rev() {
            let set = &self.levels[k].indices;
            letters[k] = set[idx % set.len()];
            idx /= set.len();
        }
        letters
            .iter()
            .fold(SimilarityMap::identity(), |acc, &j| acc.compose(&uifs.maps.maps()[j]))
    }

    /// Polygons of `E_n`, capped at `cap` pieces.
    pub fn pieces(&self, uifs: &Uifs, k: &ConvexPolygon, n: usize, cap: usize) -> Result<Vec<ConvexPolygon>> {
        let m = self.components(n);
        if m > cap as f64 {
            return Err(Error::ResourceCap {
                what: "nested plan pieces",
                requested: m,
                cap: cap as f64,
            });
        }
        Ok(exec::map_range(m as usize, |i| self.component_map(uifs, n, i).apply_polygon(k)))
    }
}

/// Selects, level by level, a maximal `r`-separated family of children of
/// the single-cell system projected in direction `T_A^{n−1}(θ)`. The same
/// index set applies inside every parent. Separation of the real pieces
/// is asserted explicitly while `r^n ≥ 10⁻⁷`, on at most 4096 parents.
pub fn build_nested_plan(uifs: &Uifs, theta: f64, epsilon: f64, depth: usize, k: &ConvexPolygon) -> Result<NestedPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let r = uifs.r;
    let cells: Vec<ConvexPolygon> = uifs.maps.maps().iter().map(|m| m.apply_polygon(k)).collect();
    let floor = r.powf(-(1.0 - epsilon / 2.0));
    let mut plan = NestedPlan {
        theta: Angle::new(theta).radians(),
        r,
        diam: k.diameter(),
        levels: Vec::with_capacity(depth),
    };
    let mut log_components = 0.0;
    let mut components = 1.0;
    for n in 1..=depth {
        let phi = uifs.rotated_direction(plan.theta, n - 1);
        let iv: Vec<Interval> = cells.iter().map(|c| c.project(phi)).collect();
        let mut indices = greedy_separated(&iv, r);
        let normalized_gap = selected_min_gap(&iv, &indices) / r;
        indices.sort_unstable();
        let count = indices.len();
        log_components += (count as f64).ln();
        components *= count as f64;
        let scale = r.powi(n as i32);
        let explicit = scale >= GRAPH_MIN_SCALE;
        plan.levels.push(PlanLevel {
            n,
            phi,
            good: count as f64 >= floor * (1.0 - UIFS_TOL),
            indices,
            count,
            components,
            log_components,
            check: SeparationCheck::Normalized {
                min_gap_ratio: normalized_gap,
            },
        });
        if explicit {
            plan.levels[n - 1].check = explicit_check(&plan, uifs, k, n);
        }
    }
    Ok(plan)
}

fn explicit_check(plan: &NestedPlan, uifs: &Uifs, k: &ConvexPolygon, n: usize) -> SeparationCheck {
    let parents = plan.components(n - 1);
    let sampled = parents > EXPLICIT_PARENT_CAP as f64;
    let checked = if sampled { EXPLICIT_PARENT_CAP } else { parents as usize };
    let stride = parents / checked as f64;
    let children = &plan.levels[n - 1].indices;
    let scale = uifs.r.powi(n as i32);
    let gaps = exec::map_range(checked, |i| {
        let idx = (i as f64 * stride).floor() as usize;
        let parent = plan.component_map(uifs, n - 1, idx);
        let iv: Vec<Interval> = children
            .iter()
            .map(|&j| parent.compose(&uifs.maps.maps()[j]).apply_polygon(k).project(plan.theta))
            .collect();
        let all: Vec<usize> = (0..iv.len()).collect();
        selected_min_gap(&iv, &all)
    });
    SeparationCheck::Explicit {
        parents_checked: checked,
        sampled,
        min_gap_ratio: gaps.into_iter().fold(f64::INFINITY, f64::min) / scale,
    }
}

/// Dimension and Lipschitz certificate of a nested plan.
#[derive(Clone, Debug, Serialize)]
pub struct RotationalCertificate {
    pub epsilon: f64,
    /// Hata sequences from `(M_n, d_n = r^n diam(K))`.
    pub hata: HataReport,
    /// Realized bound: the lagged surrogate `log M_{n−1}/(−log d_n)`.
    pub realized_hata: f64,
    /// `realized_hata − (1 − ε)`.
    pub hata_margin: f64,
    /// Every level has `M_n ≥ r^{−(1−ε)n}`.
    pub components_pass: bool,
    pub separation_pass: bool,
    /// `diam(K)/r · max{1/ν, 1}`.
    pub lipschitz_realized: f64,
    /// `diam(K)/∏r_k · max{1/ν, 1} · exp(20M ε⁻¹ log ε⁻¹)`.
    pub lipschitz_theorem: f64,
    pub lipschitz_pass: bool,
    /// `c₁ ε^{20M/ε}`.
    pub r_floor: f64,
    pub r_floor_pass: bool,
}

impl RotationalCertificate {
    pub fn pass(&self) -> bool {
        self.components_pass && self.separation_pass && self.lipschitz_pass
    }
}

pub fn certify_rotational(plan: &NestedPlan, uifs: &Uifs, epsilon: f64, k: &ConvexPolygon) -> Result<RotationalCertificate> {
    if plan.levels.is_empty() {
        return Err(Error::InvalidInput("cannot certify an empty plan".into()));
    }
    let diam = k.diameter();
    let levels = plan
        .levels
        .iter()
        .map(|l| {
            let d = diam * plan.r.powi(l.n as i32);
            crate::dimension::LevelStats {
                v: l.count as u64,
                d_max: d,
                d_min: d,
            }
        })
        .collect();
    let hata = hata_bound(&NestedStats::new(levels)?)?;
    let log_inv_r = (1.0 / plan.r).ln();
    let components_pass = plan
        .levels
        .iter()
        .all(|l| l.log_components >= (1.0 - epsilon) * l.n as f64 * log_inv_r - SEPARATION_TOL);
    let nu = k.min_width().width;
    let shape = (1.0 / nu).max(1.0);
    let m = uifs.source_scales.len() as f64;
    let c1: f64 = uifs.source_scales.iter().product();
    let lipschitz_realized = diam / plan.r * shape;
    let lipschitz_theorem = diam / c1 * shape * (20.0 * m / epsilon * (1.0 / epsilon).ln()).exp();
    let r_floor = c1 * epsilon.powf(20.0 * m / epsilon);
    Ok(RotationalCertificate {
        epsilon,
        realized_hata: hata.lagged_surrogate,
        hata_margin: hata.lagged_surrogate - (1.0 - epsilon),
        hata,
        components_pass,
        separation_pass: plan.all_separated(),
        lipschitz_pass: lipschitz_realized <= lipschitz_theorem * (1.0 + SEPARATION_TOL),
        lipschitz_realized,
        lipschitz_theorem,
        r_floor_pass: plan.r >= r_floor,
        r_floor,
    })
}

/// Settings of [`run_rotational`].
#[derive(Clone, Debug)]
pub struct RotationalSettings {
    pub epsilon: f64,
    pub eta: f64,
    pub grid: AngleGrid,
    pub consts: RotationalConstants,
    /// Levels of the nested plan.
    pub depth: usize,
    /// Orbit length checked by the persistent-angle search.
    pub n_max: usize,
    /// Explicit invariant polygon; defaults to the outer invariant hull.
    pub seed: Option<ConvexPolygon>,
    /// Levels of the graph built through the plan (0 skips it).
    pub graph_levels: usize,
}

impl RotationalSettings {
    pub fn new(epsilon: f64) -> Self {
        RotationalSettings {
            epsilon,
            eta: epsilon / 10.0,
            grid: AngleGrid::default(),
            consts: RotationalConstants::default(),
            depth: 20,
            n_max: 20,
            seed: None,
            graph_levels: 6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationalRun {
    pub uifs: Uifs,
    pub hull: ConvexPolygon,
    pub good: GoodAngles,
    pub persistent: PersistentAngle,
    pub plan: NestedPlan,
    pub certificate: RotationalCertificate,
    pub graph: Option<GraphBuild>,
}

/// Full pipeline: uniformize, good angles at level 1, persistent angle,
/// nested plan, certificate and (optionally) a graph through the plan.
pub fn run_rotational(ifs: &Ifs, s: &RotationalSettings) -> Result<RotationalRun> {
    let uifs = uniformize(ifs, s.eta)?;
    let hull = match &s.seed {
        Some(p) => p.clone(),
        None => invariant_hull(ifs, 60)?.polygon,
    };
    let good = good_angle_set(&uifs, 1, s.epsilon, s.grid, &hull, s.consts)?;
    let persistent = find_persistent_angle(&uifs, std::slice::from_ref(&good.j), Some(&good), s.epsilon, s.n_max, s.grid)?;
    let plan = build_nested_plan(&uifs, persistent.theta, s.epsilon, s.depth, &hull)?;
    let certificate = certify_rotational(&plan, &uifs, s.epsilon, &hull)?;
    let graph = if s.graph_levels == 0 {
        None
    } else {
        let max_count = plan.levels.iter().map(|l| l.count).max().unwrap_or(1);
        let depth = graph_depth(uifs.r, max_count, s.graph_levels.min(plan.depth()));
        if depth == 0 {
            None
        } else {
            let levels = (1..=depth)
                .map(|n| plan.pieces(&uifs, &hull, n, GRAPH_PIECE_CAP))
                .collect::<Result<Vec<_>>>()?;
            let frame = Frame::new(plan.theta);
            let hyp = verify_hypotheses_with(&levels, frame, Some((hull.diameter(), uifs.r)))?;
            Some(build_graph(&levels, frame, &hyp)?)
        }
    };
    Ok(RotationalRun {
        uifs,
        hull,
        good,
        persistent,
        plan,
        certificate,
        graph,
    })
}

/// The 4-map rotational test system: scale 1/4, one unrotated corner map
/// and three maps rotating by π/2, each sending the unit square onto one
/// of its corner squares. Its hull is the unit square.
pub fn quarter_turn_system() -> Ifs {
    let corner = |a: f64, b: f64, quarter: bool| {
        if quarter {
            SimilarityMap::with_rational_rotation(0.25, 1, 2, crate::geometry::Point::new(a + 0.25, b))
        } else {
            SimilarityMap::with_rational_rotation(0.25, 0, 1, crate::geometry::Point::new(a, b))
        }
        .expect("valid map")
    };
    Ifs::new(vec![
        corner(0.0, 0.0, false),
        corner(0.0, 0.75, true),
        corner(0.75, 0.0, true),
        corner(0.75, 0.75, true),
    ])
    .expect("valid system")
    .with_osc(true)
}
