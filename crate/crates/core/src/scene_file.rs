//! Scene files: a JSON document of expression strings describing a
//! (g, gbar, P, Q, eps) bundle on a box chart. Deserialization followed by
//! serialization is idempotent, and every expression string must parse under
//! the declared coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{metric_from_strings, tensor_from_strings, ChartDomain};
use crate::scene::PQScene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub dimension: usize,
    pub epsilon: f64,
    pub coords: Vec<String>,
    pub domain: DomainSpec,
    pub g: Vec<Vec<String>>,
    pub gbar: Vec<Vec<String>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<String>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<String>>,
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<SceneFile> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("scene file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene files always serialize")
    }

    /// Parse all expressions and assemble a structurally valid scene.
    pub fn to_scene(&self) -> Result<PQScene> {
        let m = self.dimension;
        if self.coords.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.coords.len() });
        }
        if self.domain.min.len() != m || self.domain.max.len() != m {
            return Err(Error::InvalidArgument("domain min/max arrays must have length m".into()));
        }
        let box_: Vec<(f64, f64)> = self
            .domain
            .min
            .iter()
            .zip(&self.domain.max)
            .map(|(&lo, &hi)| (lo, hi))
            .collect();
        let chart = ChartDomain::new(box_)?;
        let g = metric_from_strings(&self.g, &self.coords)?;
        let gbar = metric_from_strings(&self.gbar, &self.coords)?;
        let p = tensor_from_strings(&self.p, &self.coords)?;
        let q = tensor_from_strings(&self.q, &self.coords)?;
        let mut scene = PQScene::new(chart, self.coords.clone(), self.epsilon, g, gbar, p, q)?;
        scene.name = self.name.clone();
        Ok(scene)
    }

    /// Format a scene back to expression strings.
    pub fn from_scene(scene: &PQScene) -> SceneFile {
        let fmt_rows = |rows: Vec<Vec<crate::expr::ScalarExpr>>| -> Vec<Vec<String>> {
            rows.into_iter()
                .map(|row| row.into_iter().map(|e| e.to_string()).collect())
                .collect()
        };
        let (min, max): (Vec<f64>, Vec<f64>) =
            scene.chart.intervals().iter().cloned().unzip();
        SceneFile {
            name: scene.name.clone(),
            notes: None,
            dimension: scene.dim(),
            epsilon: scene.epsilon,
            coords: scene.coords.clone(),
            domain: DomainSpec { min, max },
            g: fmt_rows(scene.g.components()),
            gbar: fmt_rows(scene.gbar.components()),
            p: fmt_rows(scene.p.components()),
            q: fmt_rows(scene.q.components()),
        }
    }
}
