use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniformly spaced class-centre angles of a grid classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    pub start_deg: f64,
    pub step_deg: f64,
    pub count: usize,
}

impl DoaGrid {
    pub fn new(start_deg: f64, step_deg: f64, count: usize) -> Result<Self> {
        if count == 0 || !(step_deg > 0.0) || !start_deg.is_finite() {
            return Err(domain("grid needs count > 0 and a positive step"));
        }
        Ok(Self {
            start_deg,
            step_deg,
            count,
        })
    }

    /// Inclusive `start..=stop` at `step`.
    pub fn spanning(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0) || stop_deg < start_deg {
            return Err(domain("grid span needs stop >= start and a positive step"));
        }
        let n = ((stop_deg - start_deg) / step_deg + 1e-9).floor() as usize + 1;
        Self::new(start_deg, step_deg, n)
    }

    /// 181 classes, -90..=90 at 1 degree.
    pub fn single_source() -> Self {
        Self::new(-90.0, 1.0, 181).expect("static grid")
    }

    /// 121 classes, -60..=60 at 1 degree.
    pub fn dual_source() -> Self {
        Self::new(-60.0, 1.0, 121).expect("static grid")
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn angle(&self, index: usize) -> f64 {
        self.start_deg + index as f64 * self.step_deg
    }

    pub fn stop_deg(&self) -> f64 {
        self.angle(self.count - 1)
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.angle(i)).collect()
    }

    /// Closest class centre, clamped to the grid; ties go to the lower index.
    pub fn nearest_index(&self, theta_deg: f64) -> usize {
        let x = (theta_deg - self.start_deg) / self.step_deg;
        let i = (x - 0.5).ceil();
        i.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let g = DoaGrid::single_source();
        assert_eq!(g.len(), 181);
        assert_eq!(g.angle(0), -90.0);
        assert_eq!(g.stop_deg(), 90.0);
        let g = DoaGrid::dual_source();
        assert_eq!(g.len(), 121);
        assert_eq!(g.stop_deg(), 60.0);
        assert_eq!(DoaGrid::spanning(-20.0, 20.0, 1.0).unwrap().len(), 41);
    }

    #[test]
    fn nearest_index_ties_low() {
        let g = DoaGrid::single_source();
        assert_eq!(g.nearest_index(0.0), 90);
        assert_eq!(g.nearest_index(0.5), 90);
        assert_eq!(g.nearest_index(0.51), 91);
        assert_eq!(g.nearest_index(-200.0), 0);
        assert_eq!(g.nearest_index(200.0), 180);
    }
}
