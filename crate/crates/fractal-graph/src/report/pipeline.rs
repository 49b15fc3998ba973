//! Pipeline orchestration and the run report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use super::config::{Pipeline, RunConfig};
use super::json::to_canonical_json;
use super::svg::{render_svg, Scene};
use crate::cantor4::{adhoc_dimension, adhoc_family, c4_ifs, davies_random_check, generic_family, simdim_bound_check, Family};
use crate::dimension::{hata_bound, HataReport, NestedStats};
use crate::error::{Error, Result};
use crate::favard::favard_length;
use crate::geometry::ConvexPolygon;
use crate::graph::{build_graph, containment_check, graph_depth, verify_hypotheses_with, GraphBuild};
use crate::ifs::{attractor_hull, generation, invariant_hull, Ifs, Word};
use crate::rotational::{run_rotational, RotationalSettings};
use crate::subifs::run_rotfree;

pub const SCHEMA_VERSION: u32 = 1;

/// Trials of the randomized Davies check attached to the 4-corner pipelines.
pub const DAVIES_TRIALS: usize = 1000;

/// Largest family index tried when deriving `m` from ε.
const MAX_FAMILY: usize = 30;

/// A number together with the formula or measurement that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub source: String,
}

fn formula(value: f64, what: &str) -> Quantity {
    Quantity {
        value,
        source: format!("formula: {what}"),
    }
}

fn measured(value: f64, what: &str) -> Quantity {
    Quantity {
        value,
        source: format!("measured: {what}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateLine {
    pub name: String,
    pub pass: bool,
    /// Whether this line counts towards the overall verdict.
    pub required: bool,
    pub detail: String,
}

fn line(name: &str, pass: bool, required: bool, detail: String) -> CertificateLine {
    CertificateLine {
        name: name.into(),
        pass,
        required,
        detail,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub pipeline: Pipeline,
    pub epsilon: f64,
    pub seed: u64,
    pub grid: usize,
    pub depth: usize,
    pub quantities: BTreeMap<String, Quantity>,
    /// Selected words, 1-based.
    pub words: Vec<Vec<usize>>,
    pub certificates: Vec<CertificateLine>,
    pub pass: bool,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub json: String,
    pub svg: Option<String>,
    pub scene: Scene,
}

impl RunOutcome {
    /// 0 when every required certificate passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            1
        }
    }

    /// Writes the JSON report and, when configured, the SVG figure into `dir`.
    pub fn write(&self, cfg: &RunConfig, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json_path = dir.join(&cfg.output.json);
        std::fs::write(&json_path, &self.json)?;
        written.push(json_path);
        if let (Some(name), Some(svg)) = (&cfg.output.svg, &self.svg) {
            let p = dir.join(name);
            std::fs::write(&p, svg)?;
            written.push(p);
        }
        Ok(written)
    }
}

struct Timer {
    enabled: bool,
    start: Instant,
    laps: BTreeMap<String, f64>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Timer {
            enabled,
            start: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            self.laps.insert(name.into(), (now - self.start).as_secs_f64() * 1e3);
            self.start = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.laps)
    }
}

/// What a pipeline hands back before the report is assembled.
struct Stage {
    quantities: BTreeMap<String, Quantity>,
    words: Vec<Word>,
    certificates: Vec<CertificateLine>,
    details: Value,
    scene: Scene,
}

fn context(pipeline: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{pipeline}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{pipeline}: {m}")),
        Error::UniformizationFailed(m) => Error::UniformizationFailed(format!("{pipeline}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{pipeline}: {m}")),
        other => other,
    }
}

/// Runs the configured pipeline end to end and renders the outputs.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut timer = Timer::new(cfg.output.timings);
    let stage = match cfg.pipeline {
        Pipeline::Rotfree => rotfree(cfg, &mut timer).map_err(|e| context("rotfree", e))?,
        Pipeline::Rotational => rotational(cfg, &mut timer).map_err(|e| context("rotational", e))?,
        Pipeline::Cantor4Adhoc | Pipeline::Cantor4Generic => cantor4(cfg, &mut timer).map_err(|e| context("cantor4", e))?,
    };
    let svg = match cfg.output.svg {
        Some(_) => Some(render_svg(&stage.scene)?),
        None => None,
    };
    timer.lap("render");
    let pass = stage.certificates.iter().filter(|c| c.required).all(|c| c.pass);
    let report = RunReport {
        schema: SCHEMA_VERSION,
        pipeline: cfg.pipeline,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        grid: cfg.grid,
        depth: cfg.depth,
        quantities: stage.quantities,
        words: stage.words.iter().map(Word::one_based).collect(),
        certificates: stage.certificates,
        pass,
        details: stage.details,
        timings_ms: timer.finish(),
    };
    let json = to_canonical_json(&report)?;
    Ok(RunOutcome {
        report,
        json,
        svg,
        scene: stage.scene,
    })
}

fn hata_of_levels(levels: &[Vec<ConvexPolygon>]) -> Result<HataReport> {
    hata_bound(&NestedStats::from_levels(levels)?)
}

fn rotfree(cfg: &RunConfig, timer: &mut Timer) -> Result<Stage> {
    let ifs = cfg.ifs()?;
    let grid = cfg.angle_grid()?;
    let run = run_rotfree(&ifs, cfg.epsilon, grid, cfg.constants.rotfree(), cfg.depth)?;
    timer.lap("rotfree");
    let r = &run.report;
    let mut q = BTreeMap::new();
    q.insert("theta".into(), measured(r.theta, "grid argmax of the projection length of generation m"));
    q.insert("m".into(), formula(run.depth.m as f64, "ceil(c2 / eps * log(1/eps))"));
    q.insert("delta".into(), formula(r.delta, "nu * (r_N / (4N))^m"));
    q.insert("sim_dim".into(), formula(r.sim_dim, "root of sum r_j^s = 1 over the selected words"));
    q.insert("s0_bound".into(), formula(r.s0_bound, "1 - (log m + log c1) / (m log(1/r_N))"));
    q.insert("lipschitz_bound".into(), formula(r.lipschitz_bound, "diam(K) / delta_m"));
    q.insert(
        "lipschitz_theorem".into(),
        formula(run.certificate.lipschitz_formula, "(diam/nu) exp(c0 eps^-1 log eps^-1)"),
    );
    let mut certs = vec![
        line(
            "dimension",
            run.certificate.dimension_pass,
            true,
            format!("sim_dim - (1 - eps) = {}", run.certificate.dimension_margin),
        ),
        line(
            "lipschitz_theorem",
            run.certificate.lipschitz_pass,
            true,
            format!("theorem bound - diam/delta_m = {}", run.certificate.lipschitz_margin),
        ),
        line("s0", run.certificate.s0_pass, false, format!("sim_dim >= s0 = {}", r.s0_bound)),
    ];
    let seed = attractor_hull(&ifs, 1)?.polygon;
    let mut scene = Scene {
        frame: Some(crate::graph::Frame::new(r.theta)),
        title: Some(format!("rotation-free sub-system, eps = {}", cfg.epsilon)),
        ..Scene::default()
    };
    if let Some(g) = &run.graph {
        let sub = r.sub_ifs(&ifs)?;
        let depth = g.graphs.len();
        let levels: Vec<Vec<ConvexPolygon>> = (1..=depth).map(|n| Ok(generation(&sub, &seed, n)?.polygons())).collect::<Result<_>>()?;
        let hata = hata_of_levels(&levels)?;
        q.insert("hata".into(), measured(hata.surrogate, "min over the last half of log(v1...vn)/(-log d_n)"));
        add_graph_quantities(&mut q, g);
        certs.push(line(
            "graph_lipschitz",
            g.lipschitz <= r.lipschitz_bound * (1.0 + 1e-9),
            true,
            format!("measured {} <= diam/delta_m = {}", g.lipschitz, r.lipschitz_bound),
        ));
        certs.push(cauchy_line(g));
        scene.pieces = levels.last().cloned().unwrap_or_default();
        scene.graph = Some(g.deepest().world_polyline());
    } else {
        let sub = r.sub_ifs(&ifs)?;
        scene.pieces = generation(&sub, &seed, 1)?.polygons();
    }
    timer.lap("report");
    Ok(Stage {
        quantities: q,
        words: r.sub_words.clone(),
        certificates: certs,
        details: serde_json::to_value(&run)?,
        scene,
    })
}

fn add_graph_quantities(q: &mut BTreeMap<String, Quantity>, g: &GraphBuild) {
    q.insert("lipschitz_measured".into(), measured(g.lipschitz, "largest slope of the graphs g_1..g_L"));
    q.insert("lambda".into(), measured(g.hypotheses.lambda, "largest piece or connector slope over all levels"));
    q.insert("tail_bound".into(), formula(g.tail_bound, "(1 + 2 lambda) c sigma^L / (1 - sigma)"));
}

fn cauchy_line(g: &GraphBuild) -> CertificateLine {
    line(
        "cauchy_c_sigma",
        g.cauchy_pass,
        false,
        "sup |g_n - g_(n-1)| <= c sigma^(n-1) at every level".into(),
    )
}

fn rotational(cfg: &RunConfig, timer: &mut Timer) -> Result<Stage> {
    let ifs = cfg.ifs()?;
    let mut s = RotationalSettings::new(cfg.epsilon);
    if let Some(eta) = cfg.eta {
        s.eta = eta;
    }
    s.grid = cfg.angle_grid()?;
    s.consts = cfg.constants.rotational();
    s.depth = cfg.plan_depth;
    s.n_max = cfg.n_max;
    s.seed = cfg.seed_polygon.polygon()?;
    s.graph_levels = cfg.depth;
    let run = run_rotational(&ifs, &s)?;
    timer.lap("rotational");
    let c = &run.certificate;
    let mut q = BTreeMap::new();
    q.insert("theta".into(), measured(run.persistent.theta, "grid angle maximizing the minimal orbit density"));
    q.insert("kappa".into(), measured(run.uifs.kappa as f64, "smallest kappa admitting a class of the right size"));
    q.insert("r".into(), formula(run.uifs.r, "product of the scales along a selected word"));
    q.insert("sim_dim".into(), formula(run.uifs.gamma, "log N / log(1/r)"));
    q.insert("eta".into(), Quantity { value: s.eta, source: "input: dimension drop".into() });
    q.insert("hata".into(), measured(c.realized_hata, "min over the last half of log(M_(n-1))/(-log(r^n diam K))"));
    q.insert("hata_level".into(), measured(c.hata.surrogate, "min over the last half of log(M_n)/(-log(r^n diam K))"));
    q.insert("min_density".into(), measured(run.persistent.min_density, "min over n <= n_max of D(n; theta)"));
    q.insert("good_set_measure".into(), measured(run.good.j.measure(), "measure of the level-1 good angle set"));
    q.insert("delta0".into(), formula(run.good.delta0.delta0, "H(1 - e^-(1-gamma)) / (15 c_e a0^4 (a0+1) w^2 b0 (2+4a0)^gamma)"));
    q.insert("lipschitz_bound".into(), formula(c.lipschitz_realized, "diam(K)/r * max(1/nu, 1)"));
    q.insert(
        "lipschitz_theorem".into(),
        formula(c.lipschitz_theorem, "diam(K)/prod r_k * max(1/nu, 1) * exp(20M eps^-1 log eps^-1)"),
    );
    let mut certs = vec![
        line("separation", c.separation_pass, true, "selected children r^n-separated at every level".into()),
        line("components", c.components_pass, true, "M_n >= r^-(1-eps)n at every level".into()),
        line(
            "lipschitz_theorem",
            c.lipschitz_pass,
            true,
            format!("diam/r * max(1/nu,1) = {} <= {}", c.lipschitz_realized, c.lipschitz_theorem),
        ),
        line("r_floor", c.r_floor_pass, false, format!("r = {} >= c1 eps^(20M/eps) = {}", run.uifs.r, c.r_floor)),
        line("hata_margin", c.hata_margin >= 0.0, false, format!("realized hata - (1 - eps) = {}", c.hata_margin)),
    ];
    let mut scene = Scene {
        frame: Some(crate::graph::Frame::new(run.plan.theta)),
        title: Some(format!("rotational nested plan, eps = {}", cfg.epsilon)),
        ..Scene::default()
    };
    if let Some(g) = &run.graph {
        add_graph_quantities(&mut q, g);
        certs.push(line(
            "graph_lipschitz",
            g.lipschitz <= c.lipschitz_realized * (1.0 + 1e-9),
            true,
            format!("measured {} <= diam/r * max(1/nu,1) = {}", g.lipschitz, c.lipschitz_realized),
        ));
        certs.push(cauchy_line(g));
        scene.pieces = run.plan.pieces(&run.uifs, &run.hull, g.graphs.len(), crate::graph::GRAPH_PIECE_CAP)?;
        scene.graph = Some(g.deepest().world_polyline());
    } else {
        scene.pieces = run.plan.pieces(&run.uifs, &run.hull, 1, crate::graph::GRAPH_PIECE_CAP)?;
    }
    timer.lap("report");
    Ok(Stage {
        quantities: q,
        words: run.uifs.source_words.clone(),
        certificates: certs,
        details: serde_json::to_value(&run)?,
        scene,
    })
}

/// Smallest ad hoc index with `1 − s_m ≤ ε`.
pub fn adhoc_index_for(epsilon: f64) -> Result<usize> {
    (1..=MAX_FAMILY)
        .find(|&m| 1.0 - adhoc_dimension(m) <= epsilon)
        .ok_or(Error::ResourceCap {
            what: "ad hoc family index",
            requested: f64::INFINITY,
            cap: MAX_FAMILY as f64,
        })
}

/// Smallest generic index with `1/(2m) ≤ ε`.
pub fn generic_index_for(epsilon: f64) -> usize {
    ((1.0 / (2.0 * epsilon) - 1e-9).ceil() as usize).max(1)
}

#[derive(Serialize)]
struct Cantor4Details<'a> {
    family: &'a Family,
    graph: &'a GraphBuild,
    hata: &'a HataReport,
    containment: &'a crate::graph::ContainmentReport,
    davies: &'a crate::cantor4::DaviesRandomReport,
}

fn cantor4(cfg: &RunConfig, timer: &mut Timer) -> Result<Stage> {
    let generic = cfg.pipeline == Pipeline::Cantor4Generic;
    let m = match cfg.family {
        Some(m) => m,
        None if generic => generic_index_for(cfg.epsilon),
        None => adhoc_index_for(cfg.epsilon)?,
    };
    let family = if generic { generic_family(m)? } else { adhoc_family(m)? };
    let ifs = family.ifs();
    let depth = graph_depth(ifs.maps()[0].r, ifs.len(), cfg.depth);
    let levels = family.levels(depth)?;
    let frame = family.frame();
    let hyp = verify_hypotheses_with(&levels, frame, Some((family.c, family.sigma)))?;
    let graph = build_graph(&levels, frame, &hyp)?;
    timer.lap("graph");
    let hata = hata_of_levels(&levels)?;
    let radius = family.c * family.sigma.powi(depth as i32);
    let deepest = levels.last().expect("depth >= 1");
    let containment = containment_check(deepest, graph.deepest(), radius);
    let davies = davies_random_check(DAVIES_TRIALS, cfg.seed);
    timer.lap("checks");
    let name = if generic { "generic" } else { "ad hoc" };
    let mut q = BTreeMap::new();
    q.insert("theta".into(), formula(family.theta, &format!("{name} family frame angle")));
    q.insert("m".into(), formula(m as f64, "smallest family index with 1 - s_m <= eps"));
    q.insert("sim_dim".into(), formula(family.s, &format!("{name} family similarity dimension")));
    q.insert("hata".into(), measured(hata.surrogate, "min over the last half of log(v1...vn)/(-log d_n)"));
    q.insert("lipschitz_bound".into(), formula(family.lambda, &format!("{name} family closed-form lambda_m")));
    add_graph_quantities(&mut q, &graph);
    let certs = vec![
        line(
            "dimension",
            family.s >= 1.0 - cfg.epsilon,
            true,
            format!("s_m - (1 - eps) = {}", family.s - (1.0 - cfg.epsilon)),
        ),
        line(
            "lipschitz_closed_form",
            graph.lipschitz <= family.lambda * (1.0 + 1e-9),
            true,
            format!("measured {} <= lambda_m = {}", graph.lipschitz, family.lambda),
        ),
        line(
            "containment",
            containment.pass,
            true,
            format!("max distance {} <= c sigma^L = {}", containment.max_distance, radius),
        ),
        cauchy_line(&graph),
        line(
            "davies_random",
            davies.violations == 0,
            true,
            format!("{} violations in {} seeded rectangles", davies.violations, davies.trials),
        ),
    ];
    let scene = Scene {
        pieces: deepest.clone(),
        graph: Some(graph.deepest().world_polyline()),
        frame: Some(frame),
        title: Some(format!("{name} family m = {m}, depth {depth}")),
    };
    let details = serde_json::to_value(Cantor4Details {
        family: &family,
        graph: &graph,
        hata: &hata,
        containment: &containment,
        davies: &davies,
    })?;
    Ok(Stage {
        quantities: q,
        words: family.words.clone(),
        certificates: certs,
        details,
        scene,
    })
}

/// The IFS a config describes; the 4-corner pipelines use `C₄` itself.
pub fn config_ifs(cfg: &RunConfig) -> Result<Ifs> {
    match cfg.pipeline {
        Pipeline::Cantor4Adhoc | Pipeline::Cantor4Generic => Ok(c4_ifs()),
        _ => cfg.ifs(),
    }
}

fn config_seed(cfg: &RunConfig, ifs: &Ifs) -> Result<ConvexPolygon> {
    if let Some(p) = cfg.seed_polygon.polygon()? {
        return Ok(p);
    }
    if ifs.is_rotation_free() {
        Ok(attractor_hull(ifs, 1)?.polygon)
    } else {
        Ok(invariant_hull(ifs, 60)?.polygon)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FavardRow {
    pub n: usize,
    pub favard: f64,
    pub n_times_favard: f64,
    pub argmax_angle: f64,
    pub quadrature_error_bound: f64,
}

/// Favard length of generations `1..=depth` of the configured system.
pub fn favard_table(cfg: &RunConfig) -> Result<Vec<FavardRow>> {
    let ifs = config_ifs(cfg)?;
    let seed = config_seed(cfg, &ifs)?;
    let grid = cfg.angle_grid()?;
    (1..=cfg.depth)
        .map(|n| {
            let f = favard_length(&generation(&ifs, &seed, n)?, grid);
            Ok(FavardRow {
                n,
                favard: f.value,
                n_times_favard: n as f64 * f.value,
                argmax_angle: f.argmax_angle,
                quadrature_error_bound: f.quadrature_error_bound,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DimsReport {
    pub similarity_dimension: Quantity,
    pub hata: HataReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adhoc_table: Option<crate::cantor4::SimDimTable>,
}

/// Similarity dimension and Hata surrogate of the configured system.
pub fn dims_report(cfg: &RunConfig) -> Result<DimsReport> {
    let ifs = config_ifs(cfg)?;
    let seed = config_seed(cfg, &ifs)?;
    let depth = graph_depth(ifs.maps()[0].r, ifs.len(), cfg.depth);
    let levels: Vec<Vec<ConvexPolygon>> = (1..=depth).map(|n| Ok(generation(&ifs, &seed, n)?.polygons())).collect::<Result<_>>()?;
    Ok(DimsReport {
        similarity_dimension: formula(ifs.similarity_dimension(), "root of sum r_j^s = 1"),
        hata: hata_of_levels(&levels)?,
        adhoc_table: match cfg.pipeline {
            Pipeline::Cantor4Adhoc => Some(simdim_bound_check(1..=6)?),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> RunConfig {
        RunConfig::from_toml_str(s).unwrap()
    }

    const C4: &str = r#"
pipeline = "rotfree"
epsilon = 0.5
depth = 3
grid = 256
maps = [
  { r = 0.25, z = [0.0, 0.0] },
  { r = 0.25, z = [0.0, 0.75] },
  { r = 0.25, z = [0.75, 0.0] },
  { r = 0.25, z = [0.75, 0.75] },
]
[output]
svg = "figure.svg"
"#;

    #[test]
    fn adhoc_m1_run_passes() {
        let out = run(&cfg("pipeline = \"cantor4-adhoc\"\nepsilon = 0.21\ndepth = 4\n")).unwrap();
        let q = &out.report.quantities;
        assert_eq!(q["m"].value, 1.0);
        assert!((q["sim_dim"].value - 3f64.ln() / 4f64.ln()).abs() < 1e-12);
        assert!(q["lipschitz_measured"].value <= 3.0 + 1e-9);
        assert!(out.report.pass, "{:?}", out.report.certificates);
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn rotfree_c4_run_picks_m3_and_full_projection_angle() {
        let c = cfg(C4);
        let out = run(&c).unwrap();
        let q = &out.report.quantities;
        assert_eq!(q["m"].value, 3.0);
        let step = std::f64::consts::PI / 256.0;
        let theta = q["theta"].value;
        let targets = [0.5f64.atan(), 2f64.atan(), std::f64::consts::PI - 0.5f64.atan(), std::f64::consts::PI - 2f64.atan()];
        assert!(targets.iter().any(|t| (theta - t).abs() <= step), "theta {theta}");
        assert!(out.svg.is_some());
        let v: Value = serde_json::from_str(&out.json).unwrap();
        assert_eq!(v["schema"], 1);
        assert!(v["quantities"]["sim_dim"]["source"].as_str().unwrap().starts_with("formula"));
    }

    #[test]
    fn runs_are_byte_identical() {
        let c = cfg(C4);
        let a = run(&c).unwrap();
        let b = crate::exec::sequential(|| run(&c)).unwrap();
        assert_eq!(a.json, b.json);
        assert_eq!(a.svg, b.svg);
    }

    #[test]
    fn family_index_from_epsilon() {
        assert_eq!(adhoc_index_for(0.21).unwrap(), 1);
        assert_eq!(adhoc_index_for(0.2).unwrap(), 2);
        assert_eq!(generic_index_for(0.5), 1);
        assert_eq!(generic_index_for(0.25), 2);
        assert_eq!(generic_index_for(0.2), 3);
    }

    #[test]
    fn favard_and_dims_tables() {
        let c = cfg(C4);
        let f = favard_table(&c).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.windows(2).all(|w| w[1].favard <= w[0].favard + 1e-12));
        let d = dims_report(&c).unwrap();
        assert!((d.similarity_dimension.value - 1.0).abs() < 1e-12);
    }
}
