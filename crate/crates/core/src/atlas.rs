//! Latent coordinates of a training corpus and the control ranges derived
//! from them.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::Encoder;
use crate::pattern::ManyHotPattern;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Bounding box of an atlas plus the symmetric control range to expose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentRange {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub suggested_ui_min: f64,
    pub suggested_ui_max: f64,
}

impl LatentRange {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.suggested_ui_min..=self.suggested_ui_max).contains(&x)
            && (self.suggested_ui_min..=self.suggested_ui_max).contains(&y)
    }
}

/// Encodes every record, preserving order.
pub fn build_atlas<'a, I>(encoder: &Encoder, records: I) -> Result<Vec<LatentPoint>>
where
    I: IntoIterator<Item = (&'a str, &'a ManyHotPattern)>,
{
    records
        .into_iter()
        .map(|(id, pattern)| {
            let [x, y] = encoder.encode(&pattern.to_f64())?;
            Ok(LatentPoint { id: id.into(), x, y })
        })
        .collect()
}

/// Axis-aligned bounds and a UI range of `±max(2 * max|coord|, 1)`.
pub fn compute_range(points: &[LatentPoint]) -> Result<LatentRange> {
    let first = points.first().ok_or(Error::EmptyAtlas)?;
    let mut r = LatentRange {
        min_x: first.x,
        max_x: first.x,
        min_y: first.y,
        max_y: first.y,
        suggested_ui_min: 0.0,
        suggested_ui_max: 0.0,
    };
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidModel(alloc::format!("non-finite latent point `{}`", p.id)));
        }
        r.min_x = r.min_x.min(p.x);
        r.max_x = r.max_x.max(p.x);
        r.min_y = r.min_y.min(p.y);
        r.max_y = r.max_y.max(p.y);
    }
    let max_abs = [r.min_x, r.max_x, r.min_y, r.max_y].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let half = (2.0 * max_abs).max(1.0);
    r.suggested_ui_min = -half;
    r.suggested_ui_max = half;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, Autoencoder};
    use alloc::format;
    use alloc::vec;

    fn pt(x: f64, y: f64) -> LatentPoint {
        LatentPoint { id: "p".into(), x, y }
    }

    #[test]
    fn single_origin_point_floors_at_one() {
        let r = compute_range(&[pt(0.0, 0.0)]).unwrap();
        assert_eq!((r.min_x, r.max_x, r.min_y, r.max_y), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.suggested_ui_min, r.suggested_ui_max), (-1.0, 1.0));
    }

    #[test]
    fn published_control_ranges() {
        let r = compute_range(&[pt(0.0, 0.0), pt(5.0, 2.5), pt(1.0, 5.0)]).unwrap();
        assert_eq!((r.suggested_ui_min, r.suggested_ui_max), (-10.0, 10.0));
        let r = compute_range(&[pt(0.0, 0.3), pt(1.0, 1.0)]).unwrap();
        assert_eq!((r.suggested_ui_min, r.suggested_ui_max), (-2.0, 2.0));
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(compute_range(&[]), Err(Error::EmptyAtlas));
    }

    #[test]
    fn zero_encoder_maps_everything_to_origin() {
        let (enc, _) = Autoencoder::zeros(Architecture::Model1).split();
        let pats: Vec<_> = (0..5).map(|i| ManyHotPattern::from_steps([i, i * 3]).unwrap()).collect();
        let ids: Vec<String> = (0..5).map(|i| format!("r{i}")).collect();
        let atlas = build_atlas(&enc, ids.iter().map(String::as_str).zip(&pats)).unwrap();
        assert_eq!(atlas.len(), 5);
        assert!(atlas.iter().all(|p| p.x == 0.0 && p.y == 0.0));
        assert_eq!(atlas.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), vec!["r0", "r1", "r2", "r3", "r4"]);
    }
}
