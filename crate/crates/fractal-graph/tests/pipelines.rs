use fractal_graph::cantor4::{adhoc_family, c4_ifs};
use fractal_graph::favard::AngleGrid;
use fractal_graph::graph::{build_graph, build_level, verify_hypotheses};
use fractal_graph::report::{self, render_svg, Pipeline, RunConfig, Scene};
use fractal_graph::rotational::{quarter_turn_system, run_rotational, RotationalSettings};
use fractal_graph::subifs::{run_rotfree, RotFreeConstants};
use fractal_graph::Error;

const C4_ROTFREE: &str = r#"
pipeline = "rotfree"
epsilon = 0.5
depth = 3
grid = 512
osc = true

[[map]]
r = 0.25
z = [0.0, 0.0]

[[map]]
r = 0.25
z = [0.0, 0.75]

[[map]]
r = 0.25
z = [0.75, 0.0]

[[map]]
r = 0.25
z = [0.75, 0.75]
"#;

#[test]
fn adhoc_depth_two_svg_polyline_matches_build_level() {
    let fam = adhoc_family(1).unwrap();
    let levels = fam.levels(2).unwrap();
    let frame = fam.frame();
    let hyp = verify_hypotheses(&levels, frame).unwrap();
    let built = build_graph(&levels, frame, &hyp).unwrap();
    let g = build_level(&levels[1], frame, built.graphs[1].domain()).unwrap();
    assert_eq!(g.xs, built.graphs[1].xs);
    let scene = Scene {
        pieces: levels[1].clone(),
        graph: Some(g.world_polyline()),
        frame: Some(frame),
        title: None,
    };
    let svg = render_svg(&scene).unwrap();
    let start = svg.find("<polyline").unwrap();
    let points = &svg[start..];
    let points = &points[points.find("points=\"").unwrap() + 8..];
    let points = &points[..points.find('"').unwrap()];
    assert_eq!(points.split_whitespace().count(), g.xs.len());
    assert_eq!(svg.matches("<polygon").count(), 9);
}

#[test]
fn rotfree_config_matches_direct_call() {
    let cfg = RunConfig::from_toml_str(C4_ROTFREE).unwrap();
    let out = report::run(&cfg).unwrap();
    let direct = run_rotfree(&c4_ifs(), 0.5, AngleGrid::new(512).unwrap(), RotFreeConstants::default(), 3).unwrap();
    assert_eq!(out.report.quantities["m"].value, direct.depth.m as f64);
    assert_eq!(out.report.quantities["theta"].value, direct.report.theta);
    assert_eq!(out.report.words.len(), direct.report.sub_words.len());
    assert!(out.report.words.iter().flatten().all(|&l| (1..=4).contains(&l)));
    assert!(out.report.pass);
}

#[test]
fn every_quantity_names_its_source() {
    for text in [
        C4_ROTFREE.to_string(),
        "pipeline = \"cantor4-generic\"\nepsilon = 0.3\ndepth = 2\n".to_string(),
    ] {
        let out = report::run(&RunConfig::from_toml_str(&text).unwrap()).unwrap();
        for (name, q) in &out.report.quantities {
            assert!(
                q.source.starts_with("formula: ") || q.source.starts_with("measured: ") || q.source.starts_with("input: "),
                "{name}: {}",
                q.source
            );
        }
    }
}

#[test]
fn generic_epsilon_selects_family_index() {
    let out = report::run(&RunConfig::from_toml_str("pipeline = \"cantor4-generic\"\nepsilon = 0.3\ndepth = 2\n").unwrap()).unwrap();
    assert_eq!(out.report.pipeline, Pipeline::Cantor4Generic);
    assert_eq!(out.report.quantities["m"].value, 2.0);
    assert_eq!(out.report.words.len(), 8);
    assert!(out.report.pass);
}

#[test]
fn default_eta_cannot_uniformize_the_quarter_turn_system() {
    let s = RotationalSettings::new(0.5);
    let err = run_rotational(&quarter_turn_system(), &s).unwrap_err();
    assert!(matches!(err, Error::UniformizationFailed(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn irrational_rotation_is_unsupported_by_the_rotational_pipeline() {
    let text = C4_ROTFREE.replace("pipeline = \"rotfree\"", "pipeline = \"rotational\"\neta = 0.5").replacen(
        "z = [0.0, 0.75]",
        "z = [0.0, 0.75]\ntheta = 1.0",
        1,
    );
    let err = report::run(&RunConfig::from_toml_str(&text).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn deep_adhoc_graph_stays_within_closed_form() {
    for m in 1..=3 {
        let fam = adhoc_family(m).unwrap();
        let levels = fam.levels(3).unwrap();
        let hyp = verify_hypotheses(&levels, fam.frame()).unwrap();
        let g = build_graph(&levels, fam.frame(), &hyp).unwrap();
        assert!(g.lipschitz <= fam.lambda * (1.0 + 1e-9), "m = {m}");
    }
}
