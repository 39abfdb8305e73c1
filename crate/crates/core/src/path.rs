//! Observed time series on the grid `t_i = t_start + i (t_end - t_start) / N`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PathKind {
    #[cfg_attr(feature = "serde", serde(rename = "fbm"))]
    Fbm,
    #[cfg_attr(feature = "serde", serde(rename = "perturbed"))]
    Perturbed,
    #[cfg_attr(feature = "serde", serde(rename = "u0-exact"))]
    U0Exact,
    #[cfg_attr(feature = "serde", serde(rename = "spde-numeric"))]
    SpdeNumeric,
}

impl PathKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathKind::Fbm => "fbm",
            PathKind::Perturbed => "perturbed",
            PathKind::U0Exact => "u0-exact",
            PathKind::SpdeNumeric => "spde-numeric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fbm" => Some(PathKind::Fbm),
            "perturbed" => Some(PathKind::Perturbed),
            "u0-exact" => Some(PathKind::U0Exact),
            "spde-numeric" => Some(PathKind::SpdeNumeric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Path {
    values: Vec<f64>,
    grid_n: usize,
    pub spatial_point: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub kind: PathKind,
}

impl Path {
    /// Path on `[0, 1]`.
    pub fn new(values: Vec<f64>, spatial_point: f64, kind: PathKind) -> Result<Self> {
        Self::on_interval(values, spatial_point, 0.0, 1.0, kind)
    }

    pub fn on_interval(
        values: Vec<f64>,
        spatial_point: f64,
        t_start: f64,
        t_end: f64,
        kind: PathKind,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "a path needs at least two grid values, got {}",
                values.len()
            )));
        }
        if !(t_end > t_start) {
            return Err(Error::invalid(format!(
                "empty time interval [{t_start}, {t_end}]"
            )));
        }
        Ok(Self {
            grid_n: values.len() - 1,
            values,
            spatial_point,
            t_start,
            t_end,
            kind,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + (self.t_end - self.t_start) * (i as f64) / (self.grid_n as f64)
    }

    pub fn is_unit_interval(&self) -> bool {
        self.t_start == 0.0 && self.t_end == 1.0
    }

    /// Every `factor`-th value, i.e. the path on the grid of size `N / factor`.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid_n.is_multiple_of(factor) || self.grid_n / factor < 1 {
            return Err(Error::invalid(format!(
                "cannot subsample grid N={} by {factor}",
                self.grid_n
            )));
        }
        let values = self.values.iter().step_by(factor).copied().collect();
        Self::on_interval(values, self.spatial_point, self.t_start, self.t_end, self.kind)
    }

    /// Multiplies all values by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut p = self.clone();
        for v in p.values.iter_mut() {
            *v *= c;
        }
        p
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}
