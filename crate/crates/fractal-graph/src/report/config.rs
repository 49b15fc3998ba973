//! Run configuration read from TOML.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::favard::AngleGrid;
use crate::geometry::{ConvexPolygon, Point};
use crate::ifs::{Ifs, SimilarityMap};
use crate::rotational::RotationalConstants;
use crate::subifs::RotFreeConstants;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Rotfree,
    Rotational,
    Cantor4Adhoc,
    Cantor4Generic,
}

/// One similarity `x ↦ r·A·x + z`. The rotation is either `theta` in
/// radians or `rot_pi = [p, q]` for the exact angle `pπ/q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub r: f64,
    pub z: [f64; 2],
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub rot_pi: Option<[i64; 2]>,
}

impl MapSpec {
    pub fn to_map(&self) -> Result<SimilarityMap> {
        let z = Point::new(self.z[0], self.z[1]);
        match (self.theta, self.rot_pi) {
            (Some(_), Some(_)) => Err(Error::Config("a map may set theta or rot_pi, not both".into())),
            (_, Some([p, q])) => SimilarityMap::with_rational_rotation(self.r, p, q, z),
            (theta, None) => SimilarityMap::new(self.r, theta.unwrap_or(0.0), z),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    /// Hull of the attractor: exact for rotation-free systems, the outer
    /// invariant hull otherwise.
    Hull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Named(SeedKind),
    Polygon(Vec<[f64; 2]>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Named(SeedKind::Hull)
    }
}

impl SeedSpec {
    pub fn polygon(&self) -> Result<Option<ConvexPolygon>> {
        match self {
            SeedSpec::Named(SeedKind::Hull) => Ok(None),
            SeedSpec::Polygon(pts) => {
                let pts: Vec<Point> = pts.iter().map(|p| Point::new(p[0], p[1])).collect();
                Ok(Some(ConvexPolygon::new(pts).map_err(|e| Error::Config(format!("seed_polygon: {e}")))?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "one")]
    pub c_m: f64,
    #[serde(default = "one")]
    pub c_e: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            c_m: 1.0,
            c_e: 1.0,
            a: 1.0,
            b: 1.0,
            omega: 1.0,
        }
    }
}

impl Constants {
    pub fn rotfree(&self) -> RotFreeConstants {
        RotFreeConstants { c_m: self.c_m, b: self.b }
    }

    pub fn rotational(&self) -> RotationalConstants {
        RotationalConstants {
            c_e: self.c_e,
            a: self.a,
            b: self.b,
            omega: self.omega,
        }
    }
}

/// Output file names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default)]
    pub svg: Option<String>,
    /// Adds wall-clock timings to the report, which makes it non-reproducible.
    #[serde(default)]
    pub timings: bool,
}

fn default_json() -> String {
    "report.json".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            json: default_json(),
            svg: None,
            timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub epsilon: f64,
    /// One entry per `[[map]]` table.
    #[serde(default, rename = "map", alias = "maps")]
    pub maps: Vec<MapSpec>,
    #[serde(default)]
    pub osc: Option<bool>,
    /// Starting polygon for the rotational pipeline. Other pipelines reject it.
    #[serde(default)]
    pub seed_polygon: SeedSpec,
    /// Family index for the 4-corner pipelines; derived from ε when absent.
    #[serde(default)]
    pub family: Option<usize>,
    /// Dimension drop of the rotational reduction; defaults to ε/10.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Graph levels.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Levels of the rotational nested plan.
    #[serde(default = "default_plan_depth")]
    pub plan_depth: usize,
    /// Orbit length checked by the persistent-angle search.
    #[serde(default = "default_plan_depth")]
    pub n_max: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub output: Outputs,
}

fn default_depth() -> usize {
    4
}

fn default_plan_depth() -> usize {
    20
}

fn default_grid() -> usize {
    crate::favard::DEFAULT_GRID
}

/// Deepest graph level a config may request.
pub const MAX_DEPTH: usize = 12;

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        RunConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::Config(format!("eta must lie in (0, 1), got {eta}")));
            }
        }
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(Error::Config(format!("depth must lie in 1..={MAX_DEPTH}, got {}", self.depth)));
        }
        if self.plan_depth == 0 || self.n_max == 0 {
            return Err(Error::Config("plan_depth and n_max must be at least 1".into()));
        }
        if self.grid < crate::favard::MIN_GRID {
            return Err(Error::Config(format!("grid must be at least {}, got {}", crate::favard::MIN_GRID, self.grid)));
        }
        if self.family == Some(0) {
            return Err(Error::Config("family index must be at least 1".into()));
        }
        match self.pipeline {
            Pipeline::Rotfree | Pipeline::Rotational => {
                if self.maps.is_empty() {
                    return Err(Error::Config("this pipeline needs at least one [[map]] entry".into()));
                }
                self.ifs()?;
            }
            Pipeline::Cantor4Adhoc | Pipeline::Cantor4Generic => {
                if !self.maps.is_empty() {
                    return Err(Error::Config("the 4-corner pipelines use the built-in system; remove [[map]]".into()));
                }
            }
        }
        if self.pipeline != Pipeline::Rotational && self.seed_polygon != SeedSpec::Named(SeedKind::Hull) {
            return Err(Error::Config("seed_polygon is only used by the rotational pipeline".into()));
        }
        self.seed_polygon.polygon()?;
        Ok(())
    }

    pub fn ifs(&self) -> Result<Ifs> {
        let maps = self
            .maps
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_map().map_err(|e| Error::Config(format!("map {}: {e}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        let ifs = Ifs::new(maps)?;
        Ok(match self.osc {
            Some(osc) => ifs.with_osc(osc),
            None => ifs,
        })
    }

    pub fn angle_grid(&self) -> Result<AngleGrid> {
        AngleGrid::new(self.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C4: &str = r#"
pipeline = "rotfree"
epsilon = 0.5
maps = [
  { r = 0.25, z = [0.0, 0.0] },
  { r = 0.25, z = [0.0, 0.75] },
  { r = 0.25, z = [0.75, 0.0] },
  { r = 0.25, z = [0.75, 0.75] },
]
"#;

    #[test]
    fn parses_defaults() {
        let c = RunConfig::from_toml_str(C4).unwrap();
        assert_eq!(c.pipeline, Pipeline::Rotfree);
        assert_eq!(c.grid, 1024);
        assert_eq!(c.constants, Constants::default());
        assert_eq!(c.seed_polygon, SeedSpec::Named(SeedKind::Hull));
        assert_eq!(c.ifs().unwrap().len(), 4);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{C4}\nbogus = 1\n");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Toml(_))));
        let bad = C4.replace("z = [0.0, 0.0]", "z = [0.0, 0.0], spin = 1");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn map_tables_are_accepted() {
        let s = "pipeline = \"rotfree\"\nepsilon = 0.5\nosc = true\n\
                 [[map]]\nr = 0.25\ntheta = 0.0\nz = [0.0, 0.0]\n\
                 [[map]]\nr = 0.25\nz = [0.75, 0.75]\n";
        assert_eq!(RunConfig::from_toml_str(s).unwrap().maps.len(), 2);
    }

    #[test]
    fn malformed_toml_exits_two() {
        let e = RunConfig::from_toml_str("pipeline = [").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let e = RunConfig::from_toml_str(&C4.replace("epsilon = 0.5", "epsilon = 1.5")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = RunConfig::from_toml_str("pipeline = \"rotational\"\nepsilon = 0.5\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let both = C4.replace("z = [0.0, 0.0] }", "z = [0.0, 0.0], theta = 0.1, rot_pi = [1, 2] }");
        assert!(matches!(RunConfig::from_toml_str(&both), Err(Error::Config(_))));
        let seeded = C4.to_string() + "seed_polygon = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\n";
        assert!(matches!(RunConfig::from_toml_str(&seeded), Err(Error::Config(_))));
    }

    #[test]
    fn rational_rotation_and_polygon_seed() {
        let s = C4
            .replace("z = [0.75, 0.75] }", "z = [1.0, 0.75], rot_pi = [1, 2] }")
            .replace("\"rotfree\"", "\"rotational\"")
            + "seed_polygon = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]\n";
        let c = RunConfig::from_toml_str(&s).unwrap();
        assert!(c.ifs().unwrap().maps().iter().any(|m| m.rot.map(|q| (q.p, q.q)) == Some((1, 2))));
        assert_eq!(c.seed_polygon.polygon().unwrap().unwrap().vertices().len(), 4);
    }
}
