//! JSON file formats for spaces, measures, lines and point maps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::approxgh::GhMap;
use crate::error::{Error, Result};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, WeightedGraph};
use crate::smooth1d::{LineConfig, WeightedLine};

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|error| Error::File { path: path.display().to_string(), error })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// `{vertices, edges: [[a, b, length]], nu: {id: weight}, subdivision}`.
/// `nu` may name subdivision points; without `nu` the vertices are uniform.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    #[serde(default)]
    pub nu: Option<BTreeMap<String, f64>>,
    #[serde(default = "one")]
    pub subdivision: usize,
}

fn one() -> usize {
    1
}

impl SpaceFile {
    pub fn build(&self) -> Result<FiniteMetricMeasureSpace> {
        let graph = WeightedGraph { vertices: self.vertices.clone(), edges: self.edges.clone() };
        let Some(nu) = &self.nu else {
            return FiniteMetricMeasureSpace::build(&graph, &vec![1.0; self.vertices.len()], self.subdivision);
        };
        if nu.keys().all(|k| self.vertices.contains(k)) {
            let on_vertices: Vec<f64> = self.vertices.iter().map(|v| nu.get(v).copied().unwrap_or(0.0)).collect();
            return FiniteMetricMeasureSpace::build(&graph, &on_vertices, self.subdivision);
        }
        // nu reaches subdivision points: build with a placeholder, then replace
        let space = FiniteMetricMeasureSpace::build(&graph, &vec![1.0; self.vertices.len()], self.subdivision)?;
        let weights = weights_by_id(&space, nu)?;
        space.with_nu(DiscreteMeasure::from_unnormalized(weights)?)
    }

    /// Unit-length cycle or path files for tests and examples.
    pub fn cycle(n: usize, edge_length: f64) -> Self {
        Self::from_graph(&WeightedGraph::cycle(n, edge_length))
    }

    pub fn path(n: usize, edge_length: f64) -> Self {
        Self::from_graph(&WeightedGraph::path(n, edge_length))
    }

    fn from_graph(g: &WeightedGraph) -> Self {
        Self { vertices: g.vertices.clone(), edges: g.edges.clone(), nu: None, subdivision: 1 }
    }
}

fn weights_by_id(space: &FiniteMetricMeasureSpace, table: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let mut weights = vec![0.0; space.len()];
    for (id, w) in table {
        weights[space.index_of(id)?] = *w;
    }
    Ok(weights)
}

pub fn load_space(path: impl AsRef<Path>) -> Result<FiniteMetricMeasureSpace> {
    read_json::<SpaceFile>(path)?.build()
}

/// Reads `{id: weight}`; weights are renormalized with a warning if they do
/// not already sum to 1.
pub fn measure_from_table(space: &FiniteMetricMeasureSpace, table: &BTreeMap<String, f64>) -> Result<DiscreteMeasure> {
    let weights = weights_by_id(space, table)?;
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        warn!("measure weights sum to {total}; renormalizing");
    }
    DiscreteMeasure::from_unnormalized(weights)
}

pub fn load_measure(space: &FiniteMetricMeasureSpace, path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    measure_from_table(space, &read_json(path)?)
}

/// Nonzero weights keyed by point id.
pub fn measure_to_table(space: &FiniteMetricMeasureSpace, mu: &DiscreteMeasure) -> BTreeMap<String, f64> {
    (0..mu.len()).filter(|&i| mu.mass(i) > 0.0).map(|i| (space.id(i).to_string(), mu.mass(i))).collect()
}

/// Line file. A relative `table:` path is resolved against the file's
/// directory.
pub fn load_line(path: impl AsRef<Path>) -> Result<WeightedLine> {
    let path = path.as_ref();
    let mut config: LineConfig = read_json(path)?;
    if let Some(file) = config.psi.strip_prefix("table:") {
        let file = Path::new(file.trim());
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                config.psi = format!("table:{}", dir.join(file).display());
            }
        }
    }
    WeightedLine::from_config(&config)
}

/// `{table: {x1_id: x2_id}, epsilon}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GhMapFile {
    pub table: BTreeMap<String, String>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

pub fn load_gh_map(
    source: &FiniteMetricMeasureSpace,
    target: &FiniteMetricMeasureSpace,
    path: impl AsRef<Path>,
) -> Result<GhMap> {
    let file: GhMapFile = read_json(path)?;
    GhMap::from_table(source, target, &file.table, file.epsilon)
}

/// Reads a JSON array of numbers, or `{id: value}` keyed by point id.
pub fn load_function(space: &FiniteMetricMeasureSpace, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let value: serde_json::Value = read_json(path)?;
    match value {
        serde_json::Value::Array(_) => {
            let f: Vec<f64> = serde_json::from_value(value)?;
            if f.len() != space.len() {
                return Err(Error::InvalidArgument(format!(
                    "function has {} values for {} points",
                    f.len(),
                    space.len()
                )));
            }
            Ok(f)
        }
        serde_json::Value::Object(_) => {
            let table: BTreeMap<String, f64> = serde_json::from_value(value)?;
            let mut f = vec![0.0; space.len()];
            for (id, v) in table {
                f[space.index_of(&id)?] = v;
            }
            Ok(f)
        }
        _ => Err(Error::Parse("a function file is a JSON array or an id -> value object".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_round_trip() {
        let text =
            r#"{"vertices":["a","b","c"],"edges":[["a","b",1.0],["b","c",2.0]],"nu":{"a":1,"c":3},"subdivision":2}"#;
        let file: SpaceFile = serde_json::from_str(text).unwrap();
        let s = file.build().unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.dist(s.index_of("a").unwrap(), s.index_of("c").unwrap()), 3.0);
        assert_eq!(s.nu().mass(s.index_of("c").unwrap()), 0.75);
        assert_eq!(s.nu().mass(s.index_of("b").unwrap()), 0.0);
    }

    #[test]
    fn nu_on_subdivision_points() {
        let text = r#"{"vertices":["a","b"],"edges":[["a","b",1.0]],"nu":{"a":1,"a~b#1":1},"subdivision":2}"#;
        let s = serde_json::from_str::<SpaceFile>(text).unwrap().build().unwrap();
        assert_eq!(s.nu().mass(s.index_of("a~b#1").unwrap()), 0.5);
        let bad = r#"{"vertices":["a","b"],"edges":[["a","b",1.0]],"nu":{"z":1}}"#;
        assert!(matches!(serde_json::from_str::<SpaceFile>(bad).unwrap().build(), Err(Error::UnknownPoint(_))));
    }

    #[test]
    fn measure_tables() {
        let s = SpaceFile::path(3, 1.0).build().unwrap();
        let mu = measure_from_table(&s, &BTreeMap::from([("0".to_string(), 0.25), ("2".to_string(), 0.75)])).unwrap();
        assert_eq!(mu.weights(), &[0.25, 0.0, 0.75]);
        let back = measure_to_table(&s, &mu);
        assert_eq!(back.len(), 2);
        assert!(measure_from_table(&s, &BTreeMap::from([("9".to_string(), 1.0)])).is_err());
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("psi.csv"), "x,psi\n-1,0.5\n1,0.5\n").unwrap();
        fs::write(
            dir.path().join("line.json"),
            r#"{"topology":"interval","a":-1,"b":1,"psi":"table:psi.csv","grid_n":9}"#,
        )
        .unwrap();
        let line = load_line(dir.path().join("line.json")).unwrap();
        assert_eq!(line.len(), 9);
        fs::write(dir.path().join("s.json"), serde_json::to_string(&SpaceFile::cycle(4, 1.0)).unwrap()).unwrap();
        let s = load_space(dir.path().join("s.json")).unwrap();
        fs::write(dir.path().join("f.json"), "[1, 2, 3, 4]").unwrap();
        assert_eq!(load_function(&s, dir.path().join("f.json")).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        fs::write(dir.path().join("g.json"), r#"{"1": 5}"#).unwrap();
        assert_eq!(load_function(&s, dir.path().join("g.json")).unwrap(), vec![0.0, 5.0, 0.0, 0.0]);
        fs::write(dir.path().join("m.json"), r#"{"table":{"0":"0","1":"1","2":"2","3":"3"},"epsilon":0.5}"#).unwrap();
        assert_eq!(load_gh_map(&s, &s, dir.path().join("m.json")).unwrap().epsilon, 0.5);
    }
}
