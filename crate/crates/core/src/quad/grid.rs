//! Midpoint rule on axis-aligned boxes.

use crate::error::{Error, Result};
use crate::group::{Aabb, MAX_DIM};
use crate::quad::sum::{chunked_sum, CHUNK};
use crate::scalar::Scalar;

/// Uniform cell decomposition of a box, sampled at cell midpoints so that
/// no node lies on a coordinate hyperplane through a cell corner.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid<T> {
    pub bounds: Aabb<T>,
    pub resolution: Vec<usize>,
}

impl<T: Scalar> BoxGrid<T> {
    pub fn new(bounds: Aabb<T>, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != bounds.dim() {
            return Err(Error::DimensionMismatch { expected: bounds.dim(), got: resolution.len() });
        }
        if bounds.dim() > MAX_DIM {
            return Err(Error::InvalidParameter(format!("grid dimension exceeds {MAX_DIM}")));
        }
        if resolution.iter().any(|&r| r == 0) {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        Ok(Self { bounds, resolution })
    }

    /// Same resolution along every axis.
    pub fn uniform(bounds: Aabb<T>, per_axis: usize) -> Result<Self> {
        let n = bounds.dim();
        Self::new(bounds, vec![per_axis; n])
    }

    /// Resolution proportional to the side lengths, with `total` cells
    /// overall (rounded).
    pub fn with_total_cells(bounds: Aabb<T>, total: usize) -> Result<Self> {
        let n = bounds.dim();
        let sides: Vec<f64> = bounds.lo.iter().zip(&bounds.hi).map(|(&a, &b)| (b - a).as_f64()).collect();
        let vol: f64 = sides.iter().product();
        if !(vol > 0.0) {
            return Self::uniform(bounds, 1);
        }
        let h = (vol / total as f64).powf(1.0 / n as f64);
        let res = sides.iter().map(|&s| ((s / h).round() as usize).max(2)).collect();
        Self::new(bounds, res)
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_widths(&self) -> Vec<T> {
        self.bounds
            .lo
            .iter()
            .zip(&self.bounds.hi)
            .zip(&self.resolution)
            .map(|((&a, &b), &r)| (b - a) / T::from_usize_lossy(r))
            .collect()
    }

    pub fn cell_volume(&self) -> T {
        self.cell_widths().into_iter().fold(T::one(), |a, b| a * b)
    }

    /// Midpoint of cell `idx` (row-major, last axis fastest).
    #[inline]
    pub fn node_into(&self, idx: usize, widths: &[T], out: &mut [T]) {
        let mut rem = idx;
        for d in (0..self.resolution.len()).rev() {
            let r = self.resolution[d];
            let k = rem % r;
            rem /= r;
            out[d] = self.bounds.lo[d] + (T::from_usize_lossy(k) + T::lit(0.5)) * widths[d];
        }
    }

    pub fn nodes(&self) -> Vec<Vec<T>> {
        let w = self.cell_widths();
        let n = self.dim();
        (0..self.n_cells())
            .map(|i| {
                let mut x = vec![T::zero(); n];
                self.node_into(i, &w, &mut x);
                x
            })
            .collect()
    }
}

/// `k`-component midpoint integral: `f(x, out)` writes the integrand values
/// at node `x`. Non-finite values abort with the offending node.
pub fn integrate_box_multi<T, F>(grid: &BoxGrid<T>, k: usize, f: F) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> Result<()> + Sync,
{
    let widths = grid.cell_widths();
    let n = grid.dim();
    let sums = chunked_sum(grid.n_cells(), k, CHUNK, |i, acc: &mut [T]| {
        let mut x = [T::zero(); MAX_DIM];
        let mut vals = vec![T::zero(); k];
        grid.node_into(i, &widths, &mut x[..n]);
        f(&x[..n], &mut vals)?;
        for (a, v) in acc.iter_mut().zip(&vals) {
            if !v.is_finite() {
                return Err(Error::NonFinite { value: v.as_f64(), location: x[..n].iter().map(|t| t.as_f64()).collect() });
            }
            *a = *a + *v;
        }
        Ok(())
    })?;
    let cv = grid.cell_volume();
    Ok(sums.into_iter().map(|s| s * cv).collect())
}

/// Midpoint-rule integral of a scalar function over the grid's box.
pub fn integrate_box<T, F>(f: F, grid: &BoxGrid<T>) -> Result<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    Ok(integrate_box_multi(grid, 1, |x, out| {
        out[0] = f(x);
        Ok(())
    })?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_on_unit_box() {
        let g = BoxGrid::uniform(Aabb::new(vec![0.0; 3], vec![1.0; 3]).unwrap(), 7).unwrap();
        assert_abs_diff_eq!(integrate_box(|_| 1.0, &g).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_over_symmetric_box_vanishes() {
        let g = BoxGrid::uniform(Aabb::symmetric(vec![1.0, 2.0]), 10).unwrap();
        assert_abs_diff_eq!(integrate_box(|x| 3.0 * x[0] - x[1], &g).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nodes_avoid_axes() {
        let g = BoxGrid::uniform(Aabb::symmetric(vec![1.0, 1.0]), 4).unwrap();
        assert!(g.nodes().iter().all(|x| x.iter().all(|&v| v != 0.0)));
    }

    #[test]
    fn non_finite_reports_location() {
        let g = BoxGrid::uniform(Aabb::symmetric(vec![1.0]), 2).unwrap();
        match integrate_box(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &g) {
            Err(Error::NonFinite { location, .. }) => assert_eq!(location, vec![0.5]),
            other => panic!("{other:?}"),
        }
    }
}
