//! Synthetic objective landscapes with a hidden ground truth.
//!
//! All objectives are minimized.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform box `[lo, hi]` applied to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty bounds [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn check(&self, coords: &[f64]) -> Result<()> {
        match coords.iter().position(|&x| !self.contains(x)) {
            None => Ok(()),
            Some(index) => Err(Error::OutOfBounds {
                index,
                value: coords[index],
                lo: self.lo,
                hi: self.hi,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandscapeKind {
    Sphere,
    Rastrigin,
    TwoWells,
}

impl LandscapeKind {
    pub const ALL: [LandscapeKind; 3] = [Self::Sphere, Self::Rastrigin, Self::TwoWells];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Rastrigin => "rastrigin",
            Self::TwoWells => "two_wells",
        }
    }
}

impl fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownLandscape(s.to_string()))
    }
}

/// A named objective with its box and, for reference landscapes, the optimal
/// objective vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    kind: LandscapeKind,
    dimension: usize,
    bounds: Bounds,
    optimum: Option<Vec<f64>>,
}

pub fn make_landscape(name: &str, dimension: usize) -> Result<Landscape> {
    let kind: LandscapeKind = name.parse()?;
    Landscape::new(kind, dimension)
}

impl Landscape {
    pub fn new(kind: LandscapeKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        let (bounds, optimum) = match kind {
            LandscapeKind::Sphere | LandscapeKind::Rastrigin => {
                (Bounds::new(-5.12, 5.12), Some(vec![0.0]))
            }
            // the two wells compete; no single objective vector is attainable
            LandscapeKind::TwoWells => (Bounds::new(-3.0, 3.0), None),
        };
        Ok(Self {
            kind,
            dimension,
            bounds,
            optimum,
        })
    }

    /// The same landscape with its ground truth hidden from fitness.
    pub fn without_reference(mut self) -> Self {
        self.optimum = None;
        self
    }

    pub fn kind(&self) -> LandscapeKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn objective_count(&self) -> usize {
        match self.kind {
            LandscapeKind::TwoWells => 2,
            _ => 1,
        }
    }

    pub fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    pub fn has_reference(&self) -> bool {
        self.optimum.is_some()
    }

    pub fn evaluate(&self, position: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dimension, position.len())?;
        self.bounds.check(position)?;
        Ok(self.evaluate_unchecked(position))
    }

    fn evaluate_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            LandscapeKind::Sphere => vec![x.iter().map(|v| v * v).sum()],
            LandscapeKind::Rastrigin => {
                let d = x.len() as f64;
                let sum: f64 = x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum();
                vec![10.0 * d + sum]
            }
            LandscapeKind::TwoWells => {
                let well = |center: f64| {
                    x.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let c = if j == 0 { center } else { 0.0 };
                            (v - c) * (v - c)
                        })
                        .sum::<f64>()
                };
                vec![well(-1.0), well(1.0)]
            }
        }
    }

    /// Distance between an objective vector and the optimum.
    pub fn reference_error(&self, objectives: &[f64]) -> Result<f64> {
        let optimum = self
            .optimum
            .as_ref()
            .ok_or_else(|| Error::NoReference(self.name().to_string()))?;
        Error::check_dim(optimum.len(), objectives.len())?;
        Ok(objectives
            .iter()
            .zip(optimum)
            .map(|(f, o)| (f - o) * (f - o))
            .sum::<f64>()
            .sqrt())
    }

    /// Hidden ground-truth error of a position: reference error when a
    /// reference exists.
    pub fn hidden_error(&self, position: &[f64]) -> Result<f64> {
        let f = self.evaluate(position)?;
        self.reference_error(&f)
    }

    /// Componentwise worst objective value over the whole box.
    pub fn objective_upper_bounds(&self) -> Vec<f64> {
        let Bounds { lo, hi } = self.bounds;
        let d = self.dimension as f64;
        let far = |c: f64| (lo - c).abs().max((hi - c).abs());
        match self.kind {
            LandscapeKind::Sphere => vec![d * far(0.0).powi(2)],
            LandscapeKind::Rastrigin => vec![10.0 * d + d * (far(0.0).powi(2) + 10.0)],
            LandscapeKind::TwoWells => {
                let rest = (d - 1.0) * far(0.0).powi(2);
                vec![far(-1.0).powi(2) + rest, far(1.0).powi(2) + rest]
            }
        }
    }
}
