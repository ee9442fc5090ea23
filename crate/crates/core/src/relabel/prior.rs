use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classes::{FACADE, GROUND, ROOF, VEGETATION};
use crate::error::{Error, Result};
use crate::mesh::{Label, Vec3};

/// Admissible band of normal directions for one class: the angle between the
/// face normal and the gravity axis must lie within `alpha` of `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleBand {
    /// Half width in degrees.
    pub alpha: f64,
    /// Center in degrees.
    pub beta: f64,
}

/// Class-dependent normal-direction prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeoPriorParams {
    /// Bands per label; labels without an entry are never penalized.
    pub bands: BTreeMap<Label, AngleBand>,
    /// Upward gravity axis.
    pub gravity: [f64; 3],
}

impl Default for GeoPriorParams {
    fn default() -> Self {
        let bands = [
            (GROUND, 30.0, 0.0),
            (FACADE, 30.0, 90.0),
            (ROOF, 60.0, 0.0),
            (VEGETATION, 180.0, 0.0),
        ]
        .into_iter()
        .map(|(l, alpha, beta)| (l, AngleBand { alpha, beta }))
        .collect();
        GeoPriorParams {
            bands,
            gravity: [0.0, 0.0, 1.0],
        }
    }
}

impl GeoPriorParams {
    pub fn validate(&self) -> Result<()> {
        for (l, b) in &self.bands {
            if !(0.0..=180.0).contains(&b.alpha) || !(0.0..=180.0).contains(&b.beta) {
                return Err(Error::Config(format!(
                    "geometric prior for label {l}: alpha and beta must lie in [0, 180], got {} and {}",
                    b.alpha, b.beta
                )));
            }
        }
        let g = Vec3::from(self.gravity);
        if !(g.norm() > 0.0 && g.norm().is_finite()) {
            return Err(Error::Config("gravity axis must be a non-zero vector".into()));
        }
        Ok(())
    }

    pub fn band(&self, label: Label) -> AngleBand {
        self.bands.get(&label).copied().unwrap_or(AngleBand {
            alpha: 180.0,
            beta: 0.0,
        })
    }

    pub fn gravity_axis(&self) -> Vec3 {
        Vec3::from(self.gravity).normalize()
    }
}

/// Angle slack in degrees so that normals sitting exactly on a band edge are
/// not penalized by rounding.
const BAND_SLACK: f64 = 1e-9;

/// Penalty `area` when the normal leaves the class band, else 0.
pub fn geo_prior(normal: &Vec3, label: Label, area: f64, params: &GeoPriorParams) -> f64 {
    let band = params.band(label);
    let cos = normal.normalize().dot(&params.gravity_axis()).clamp(-1.0, 1.0);
    let angle = cos.acos().to_degrees();
    if (angle - band.beta).abs() > band.alpha + BAND_SLACK {
        area
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands() {
        let p = GeoPriorParams::default();
        let b = p.band(FACADE);
        assert_eq!((b.alpha, b.beta), (30.0, 90.0));
        assert_eq!(p.band(ROOF).alpha, 60.0);
        assert_eq!(p.band(GROUND).alpha, 30.0);
        assert_eq!(p.band(VEGETATION).alpha, 180.0);
        assert_eq!(p.band(9).alpha, 180.0);
    }

    #[test]
    fn facade_examples() {
        let p = GeoPriorParams::default();
        assert_eq!(geo_prior(&Vec3::x(), FACADE, 2.0, &p), 0.0);
        assert_eq!(geo_prior(&Vec3::z(), FACADE, 2.0, &p), 2.0);
        // 30 degrees off the horizontal is still on the band edge
        let n = Vec3::new(60f64.to_radians().sin(), 0.0, 60f64.to_radians().cos());
        assert_eq!(geo_prior(&n, FACADE, 2.0, &p), 0.0);
    }

    #[test]
    fn vegetation_never_penalized() {
        let p = GeoPriorParams::default();
        for n in [Vec3::z(), -Vec3::z(), Vec3::new(1.0, 1.0, 0.3)] {
            assert_eq!(geo_prior(&n, VEGETATION, 5.0, &p), 0.0);
        }
    }

    #[test]
    fn ground_and_roof() {
        let p = GeoPriorParams::default();
        let tilted = |deg: f64| Vec3::new(deg.to_radians().sin(), 0.0, deg.to_radians().cos());
        assert_eq!(geo_prior(&tilted(20.0), GROUND, 1.0, &p), 0.0);
        assert_eq!(geo_prior(&tilted(40.0), GROUND, 1.0, &p), 1.0);
        assert_eq!(geo_prior(&tilted(40.0), ROOF, 1.0, &p), 0.0);
        assert_eq!(geo_prior(&tilted(70.0), ROOF, 1.0, &p), 1.0);
        assert_eq!(geo_prior(&-Vec3::z(), GROUND, 1.0, &p), 1.0);
    }
}
