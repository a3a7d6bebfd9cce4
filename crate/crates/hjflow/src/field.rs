//! Scalar and vector data attached to the active nodes of a grid.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One real value per active node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field {
            grid_id: grid.id(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Field {
        Field {
            grid_id: grid.id(),
            values: vec![value; grid.node_count()],
        }
    }

    /// Sample a function of position; the second coordinate is 0 in 1D.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|a| {
                let p = grid.node_pos(a);
                f(p[0], p[1])
            })
            .collect();
        Field {
            grid_id: grid.id(),
            values,
        }
    }

    /// Wrap raw values, checking length and finiteness.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(Field {
            grid_id: grid.id(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.node_count());
        Field {
            grid_id: grid.id(),
            values,
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid_id != grid.id() || self.values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn weighted_mean(&self, grid: &Grid) -> Result<f64> {
        self.check_grid(grid)?;
        Ok(grid.mean_w(&self.values))
    }

    /// Sup norm of the difference with another field on the same grid.
    pub fn sup_diff(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One d-vector per active node, stored by component.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid_id: u64,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub(crate) fn from_comps(grid: &Grid, comps: Vec<Vec<f64>>) -> VectorField {
        debug_assert_eq!(comps.len(), grid.dim());
        VectorField {
            grid_id: grid.id(),
            comps,
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid_id != grid.id() || self.comps.len() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn node_count(&self) -> usize {
        self.comps.first().map_or(0, Vec::len)
    }

    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    /// Euclidean norm of the vector at one node.
    pub fn norm_at(&self, node: usize) -> f64 {
        self.comps
            .iter()
            .map(|c| c[node] * c[node])
            .sum::<f64>()
            .sqrt()
    }

    /// Max over nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.node_count())
            .map(|a| self.norm_at(a))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_interval;

    #[test]
    fn grid_mismatch_detected() {
        let a = build_interval(1.0, 11).unwrap();
        let b = build_interval(1.0, 11).unwrap();
        let f = Field::zeros(&a);
        assert!(f.check_grid(&a).is_ok());
        assert!(matches!(f.check_grid(&b), Err(Error::GridMismatch)));
    }

    #[test]
    fn non_finite_rejected() {
        let g = build_interval(1.0, 5).unwrap();
        let bad = vec![0.0, 1.0, f64::NAN, 0.0, 0.0];
        assert!(matches!(
            Field::from_values(&g, bad),
            Err(Error::NonFiniteField)
        ));
    }
}
