//! Atlas JSON: `{"model_id", "points": [{"id", "x", "y"}], "range": {...}}`.

use std::path::Path;

use latentseq_core::atlas::{compute_range, LatentPoint, LatentRange};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeJson {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub suggested_ui_min: f64,
    pub suggested_ui_max: f64,
}

impl From<LatentRange> for RangeJson {
    fn from(r: LatentRange) -> Self {
        Self {
            min_x: r.min_x,
            max_x: r.max_x,
            min_y: r.min_y,
            max_y: r.max_y,
            suggested_ui_min: r.suggested_ui_min,
            suggested_ui_max: r.suggested_ui_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasFile {
    pub model_id: String,
    pub points: Vec<PointJson>,
    pub range: RangeJson,
}

impl AtlasFile {
    pub fn new(model_id: &str, points: &[LatentPoint]) -> Result<Self> {
        let range = compute_range(points)?;
        Ok(Self {
            model_id: model_id.into(),
            points: points.iter().map(|p| PointJson { id: p.id.clone(), x: p.x, y: p.y }).collect(),
            range: range.into(),
        })
    }

    pub fn latent_points(&self) -> Vec<LatentPoint> {
        self.points.iter().map(|p| LatentPoint { id: p.id.clone(), x: p.x, y: p.y }).collect()
    }
}

pub fn export_atlas(atlas: &AtlasFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(atlas).expect("atlas serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_atlas(path: &Path) -> Result<AtlasFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let atlas: AtlasFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if atlas.points.is_empty() {
        return Err(Error::format(path, "atlas has no points"));
    }
    Ok(atlas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_full_precision() {
        let pts = vec![
            LatentPoint { id: "a".into(), x: 0.1 + 0.2, y: 1.0 / 3.0 },
            LatentPoint { id: "b".into(), x: 4.999_999_999_999_999, y: 0.0 },
        ];
        let atlas = AtlasFile::new("m", &pts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        export_atlas(&atlas, &p).unwrap();
        let back = load_atlas(&p).unwrap();
        assert_eq!(back, atlas);
        assert_eq!(back.latent_points(), pts);
        assert_eq!(back.range.suggested_ui_max, 2.0 * 4.999_999_999_999_999);
    }

    #[test]
    fn empty_atlas_is_an_error() {
        assert!(AtlasFile::new("m", &[]).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let atlas = AtlasFile::new("m", &[LatentPoint { id: "a".into(), x: 0.0, y: 0.0 }]).unwrap();
        assert!(matches!(export_atlas(&atlas, Path::new("/nonexistent/dir/a.json")), Err(Error::Io { .. })));
    }
}
