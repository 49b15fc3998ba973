//! Rotation-free pipeline: iterate the IFS `m` times, pick the direction of
//! largest projection, keep a separated Vitali family of long projected
//! intervals and certify the resulting sub-system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::favard::{best_angle, AngleGrid};
use crate::geometry::{min_pairwise_gap, vitali_cover_factor, vitali_extract, ConvexPolygon, Interval, GEOM_TOL};
use crate::graph::{build_graph, graph_depth, verify_hypotheses_with, Frame, GraphBuild};
use crate::ifs::{attractor_hull, generation, similarity_dimension, Ifs, Word, DEFAULT_PIECE_CAP};

/// Iteration depth `m = ⌈c₂ ε⁻¹ log ε⁻¹⌉` and the constants around it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DepthChoice {
    pub m: usize,
    /// `max{1, 3/log(1/r_N)}`.
    pub c2: f64,
    /// `c₂ log(4N/r_N)`, the exponent constant of the Lipschitz bound.
    pub c0: f64,
}

pub fn choose_depth(epsilon: f64, n_maps: usize, r_n: f64) -> Result<DepthChoice> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n_maps == 0 || !(r_n > 0.0 && r_n < 1.0) {
        return Err(Error::InvalidInput("need at least one map with scale in (0, 1)".into()));
    }
    let c2 = (3.0 / (1.0 / r_n).ln()).max(1.0);
    let c0 = c2 * (4.0 * n_maps as f64 / r_n).ln();
    let x = c2 / epsilon * (1.0 / epsilon).ln();
    // Values within rounding of an integer count as that integer.
    let m = ((x - 1e-9).ceil().max(1.0)) as usize;
    Ok(DepthChoice { m, c2, c0 })
}

/// Constants entering the theoretical dimension bound `s₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotFreeConstants {
    /// Projection constant from the lower Favard estimate.
    pub c_m: f64,
    /// Ahlfors regularity constant of the attractor.
    pub b: f64,
}

impl Default for RotFreeConstants {
    fn default() -> Self {
        RotFreeConstants { c_m: 1.0, b: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubIfsReport {
    pub m: usize,
    pub theta: f64,
    /// Separation `δ_m = ν (r_N/(4N))^m`.
    pub delta: f64,
    pub nu: f64,
    pub diam: f64,
    pub n_maps: usize,
    pub r_n: f64,
    /// Selected words, in lexicographic order.
    pub sub_words: Vec<Word>,
    pub sub_scales: Vec<f64>,
    pub sim_dim: f64,
    /// `1 − (log m + log c₁)/(m log(1/r_N))`.
    pub s0_bound: f64,
    /// `diam(K)/δ_m`.
    pub lipschitz_bound: f64,
    /// Pieces discarded for projecting shorter than `δ_m`.
    pub discarded_short: usize,
    pub min_gap: f64,
    pub cover_factor: f64,
    /// A single selected word gives a point attractor.
    pub degenerate: bool,
}

impl SubIfsReport {
    pub fn sub_ifs(&self, ifs: &Ifs) -> Result<Ifs> {
        let maps = self.sub_words.iter().map(|w| ifs.compose(w)).collect::<Result<Vec<_>>>()?;
        Ok(Ifs::from_maps_unsorted(maps)?.with_osc(true))
    }
}

/// Extracts a `δ_m`-separated sub-system from generation `m`.
pub fn extract_separated_subifs(ifs: &Ifs, m: usize, grid: AngleGrid, consts: RotFreeConstants) -> Result<SubIfsReport> {
    if !ifs.is_rotation_free() {
        return Err(Error::Unsupported("extraction needs a rotation-free IFS".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("iteration depth must be >= 1".into()));
    }
    let hull = attractor_hull(ifs, 1)?;
    let k = hull.polygon;
    let nu = k.min_width().width;
    let diam = k.diameter();
    let n_maps = ifs.len();
    let r_n = ifs.max_scale();
    let gen = generation(ifs, &k, m)?;
    let polys = gen.polygons();
    let (theta, _) = best_angle(&polys, grid);
    let delta = nu * (r_n / (4.0 * n_maps as f64)).powi(m as i32);
    if !(delta > 0.0) {
        return Err(Error::Precondition("the attractor hull is degenerate (zero width)".into()));
    }
    let projected: Vec<Interval> = polys.iter().map(|p| p.project(theta)).collect();
    let long: Vec<usize> = (0..projected.len())
        .filter(|&i| projected[i].len() >= delta)
        .collect();
    if long.is_empty() {
        return Err(Error::ExtractionFailed { theta, delta });
    }
    let candidates: Vec<Interval> = long.iter().map(|&i| projected[i]).collect();
    let picked = vitali_extract(&candidates, delta, delta)?;
    let min_gap = min_pairwise_gap(&candidates, &picked);
    let cover_factor = vitali_cover_factor(&candidates, &picked);
    let mut chosen: Vec<usize> = picked.iter().map(|&j| long[j]).collect();
    chosen.sort_by(|&a, &b| gen.pieces[a].word.cmp(&gen.pieces[b].word));
    let sub_words: Vec<Word> = chosen.iter().map(|&i| gen.pieces[i].word.clone()).collect();
    let sub_scales: Vec<f64> = chosen.iter().map(|&i| gen.pieces[i].map.r).collect();
    let sim_dim = if sub_scales.len() > 1 { similarity_dimension(&sub_scales) } else { 0.0 };
    let c1 = 16.0 / (3.0 * consts.c_m) * consts.b * (4.0 * n_maps as f64 / r_n).ln() * diam;
    let s0_bound = 1.0 - ((m as f64).ln() + c1.ln()) / (m as f64 * (1.0 / r_n).ln());
    Ok(SubIfsReport {
        m,
        theta,
        delta,
        nu,
        diam,
        n_maps,
        r_n,
        degenerate: sub_words.len() < 2,
        sub_words,
        sub_scales,
        sim_dim,
        s0_bound,
        lipschitz_bound: diam / delta,
        discarded_short: projected.len() - long.len(),
        min_gap,
        cover_factor,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub epsilon: f64,
    /// `sim_dim − (1 − ε)`.
    pub dimension_margin: f64,
    /// `(diam/ν) exp(c₀ ε⁻¹ log ε⁻¹)`.
    pub lipschitz_formula: f64,
    /// `lipschitz_formula − lipschitz_bound`.
    pub lipschitz_margin: f64,
    pub dimension_pass: bool,
    pub lipschitz_pass: bool,
    /// Whether the measured dimension also clears `s₀`.
    pub s0_pass: bool,
    pub note: Option<String>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.dimension_pass && self.lipschitz_pass
    }
}

/// Relative slack for comparing values that agree in exact arithmetic.
const REL_TOL: f64 = 1e-9;

pub fn certify(report: &SubIfsReport, epsilon: f64) -> Result<Certificate> {
    let depth = choose_depth(epsilon, report.n_maps, report.r_n)?;
    let lipschitz_formula = report.diam / report.nu * (depth.c0 / epsilon * (1.0 / epsilon).ln()).exp();
    let lipschitz_margin = lipschitz_formula - report.lipschitz_bound;
    let dimension_margin = report.sim_dim - (1.0 - epsilon);
    let dimension_pass = dimension_margin >= 0.0;
    let s0_pass = report.sim_dim >= report.s0_bound;
    let note = match (dimension_pass, s0_pass) {
        (true, false) => Some(format!(
            "measured dimension {} passes although the bound s0 = {} is not met",
            report.sim_dim, report.s0_bound
        )),
        _ if report.degenerate => Some("single selected word; the sub-attractor is a point".into()),
        _ => None,
    };
    Ok(Certificate {
        epsilon,
        dimension_margin,
        lipschitz_formula,
        lipschitz_margin,
        dimension_pass,
        lipschitz_pass: lipschitz_margin >= -REL_TOL * lipschitz_formula,
        s0_pass,
        note,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RotFreeRun {
    pub depth: DepthChoice,
    pub report: SubIfsReport,
    pub certificate: Certificate,
    pub graph: Option<GraphBuild>,
}

/// Full pipeline: depth choice, extraction, certification and (for
/// non-degenerate output) a graph through up to `graph_levels` levels of
/// the sub-system.
pub fn run_rotfree(ifs: &Ifs, epsilon: f64, grid: AngleGrid, consts: RotFreeConstants, graph_levels: usize) -> Result<RotFreeRun> {
    let depth = choose_depth(epsilon, ifs.len(), ifs.max_scale())?;
    crate::ifs::check_piece_count(ifs.len(), depth.m, DEFAULT_PIECE_CAP)?;
    let report = extract_separated_subifs(ifs, depth.m, grid, consts)?;
    let certificate = certify(&report, epsilon)?;
    let graph = if report.degenerate || graph_levels == 0 {
        None
    } else {
        let sub = report.sub_ifs(ifs)?;
        let seed = attractor_hull(ifs, 1)?.polygon;
        let levels = sub_levels(&sub, &seed, graph_levels)?;
        let frame = Frame::new(report.theta);
        let c = seed.diameter();
        let sigma = sub.max_scale();
        let hyp = verify_hypotheses_with(&levels, frame, Some((c, sigma)))?;
        Some(build_graph(&levels, frame, &hyp)?)
    };
    Ok(RotFreeRun {
        depth,
        report,
        certificate,
        graph,
    })
}

fn sub_levels(sub: &Ifs, seed: &ConvexPolygon, max_levels: usize) -> Result<Vec<Vec<ConvexPolygon>>> {
    let depth = graph_depth(sub.max_scale(), sub.len(), max_levels);
    (1..=depth).map(|n| Ok(generation(sub, seed, n)?.polygons())).collect()
}

/// Checks the separation invariant on a report: every pair of selected
/// projections is at least `δ_m` apart.
pub fn separation_holds(report: &SubIfsReport) -> bool {
    report.min_gap >= report.delta - GEOM_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor4::c4_ifs;
    use crate::geometry::Point;
    use crate::ifs::SimilarityMap;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn depth_examples() {
        let d = choose_depth(0.5, 4, 0.25).unwrap();
        assert_abs_diff_eq!(d.c2, 3.0 / 4f64.ln(), epsilon = 1e-15);
        assert_eq!(d.m, 3);
        assert_eq!(choose_depth(1.0 - 1e-15, 4, 0.25).unwrap().m, 1);
        assert_eq!(choose_depth(0.5, 4, (-3.0f64).exp()).unwrap().c2, 1.0);
        assert!(choose_depth(1.0, 4, 0.25).is_err());
    }

    #[test]
    fn c4_level_one() {
        let r = extract_separated_subifs(&c4_ifs(), 1, AngleGrid::default(), RotFreeConstants::default()).unwrap();
        // ν (r_N/(4N)) = 1 · (1/4)/16.
        assert_abs_diff_eq!(r.delta, 1.0 / 64.0, epsilon = 1e-15);
        assert!(r.sub_words.len() >= 2);
        assert!(r.sim_dim >= 0.5 - 1e-12);
        assert!(separation_holds(&r));
    }

    #[test]
    fn c4_full_projection_angle_level_two() {
        // At arctan(1/2) the 16 projections abut; the greedy family must
        // still be δ₂-separated and cover within factor 4.
        let ifs = c4_ifs();
        let g = generation(&ifs, &ConvexPolygon::unit_square(), 2).unwrap();
        let t = 0.5f64.atan();
        let ivs: Vec<Interval> = g.polygons().iter().map(|p| p.project(t)).collect();
        for iv in &ivs {
            assert_abs_diff_eq!(iv.len(), 3.0 / (16.0 * 5f64.sqrt()), epsilon = 1e-12);
        }
        let d = 1.0 / 256.0;
        let sel = vitali_extract(&ivs, d, d).unwrap();
        assert!(min_pairwise_gap(&ivs, &sel) > d);
        assert!(vitali_cover_factor(&ivs, &sel) <= 4.0 + 1e-9);
        let covered: f64 = sel.iter().map(|&i| ivs[i].len()).sum();
        assert!(covered >= 0.25 * 3.0 / 5f64.sqrt() - 1e-12);
    }

    #[test]
    fn single_map_is_degenerate() {
        let ifs = Ifs::new(vec![SimilarityMap::new(0.5, 0.0, Point::new(0.1, 0.2)).unwrap()]).unwrap();
        // The attractor is a point, so its hull has no width.
        assert!(extract_separated_subifs(&ifs, 2, AngleGrid::default(), RotFreeConstants::default()).is_err());
    }

    fn fake_report(sim_dim: f64, lipschitz_bound: f64) -> SubIfsReport {
        SubIfsReport {
            m: 1,
            theta: 0.0,
            delta: 0.1,
            nu: 1.0,
            diam: 2f64.sqrt(),
            n_maps: 4,
            r_n: 0.25,
            sub_words: vec![],
            sub_scales: vec![],
            sim_dim,
            s0_bound: 0.0,
            lipschitz_bound,
            discarded_short: 0,
            min_gap: 1.0,
            cover_factor: 1.0,
            degenerate: false,
        }
    }

    #[test]
    fn certify_examples() {
        let s1 = 3f64.ln() / 4f64.ln();
        assert!(certify(&fake_report(s1, 1.0), 0.21).unwrap().dimension_pass);
        let c = certify(&fake_report(0.4, 1.0), 0.5).unwrap();
        assert!(!c.dimension_pass);
        assert_abs_diff_eq!(c.dimension_margin, -0.1, epsilon = 1e-12);
        let formula = certify(&fake_report(0.4, 1.0), 0.5).unwrap().lipschitz_formula;
        assert!(certify(&fake_report(0.9, formula), 0.5).unwrap().lipschitz_pass);
    }

    #[test]
    fn c4_pipeline_at_half() {
        let run = run_rotfree(&c4_ifs(), 0.5, AngleGrid::new(256).unwrap(), RotFreeConstants::default(), 3).unwrap();
        assert_eq!(run.depth.m, 3);
        assert!(separation_holds(&run.report));
        assert_abs_diff_eq!(run.report.lipschitz_bound, 2f64.sqrt() * 64f64.powi(3), epsilon = 1e-6);
        assert!(run.certificate.lipschitz_pass);
        let g = run.graph.unwrap();
        assert!(g.levels.iter().all(|l| l.containment.pass));
        assert!(g.lipschitz <= g.hypotheses.lambda + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn extraction_invariants(xs in prop::collection::vec((0.0f64..0.7, 0.0f64..0.7), 3..5), m in 1usize..3) {
            let maps: Vec<SimilarityMap> = xs.iter().map(|&(x, y)| SimilarityMap::new(0.3, 0.0, Point::new(x, y)).unwrap()).collect();
            let ifs = Ifs::new(maps).unwrap();
            let grid = AngleGrid::new(64).unwrap();
            if let Ok(r) = extract_separated_subifs(&ifs, m, grid, RotFreeConstants::default()) {
                prop_assert!(separation_holds(&r));
                let k = attractor_hull(&ifs, 1).unwrap().polygon;
                for w in &r.sub_words {
                    let map = ifs.compose(w).unwrap();
                    prop_assert!(map.apply_polygon(&k).width(r.theta) >= r.delta * (1.0 - 1e-12));
                    prop_assert!((map.r - 0.3f64.powi(m as i32)).abs() <= 1e-12);
                }
                let again = extract_separated_subifs(&ifs, m, grid, RotFreeConstants::default()).unwrap();
                prop_assert_eq!(r.sub_words, again.sub_words);
            }
        }
    }
}
