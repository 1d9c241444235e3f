//! Linear summaries of persistence diagrams: MTD, persistence entropy,
//! persistence images and empirical expected-diagram densities.

use serde::{Deserialize, Serialize};

use crate::persistence::PersistenceDiagram;
use crate::stats::silverman_bandwidth;
use crate::{Error, Result};

/// Sum of lifetimes of the finite, positive-length pairs.
pub fn mtd(diagram: &PersistenceDiagram) -> f64 {
    diagram.proper_pairs().fold(0.0, |acc, p| acc + p.lifetime())
}

/// Shannon entropy (natural log) of the normalized lifetimes; 0 for at most
/// one finite positive pair.
pub fn persistence_entropy(diagram: &PersistenceDiagram) -> f64 {
    let lifetimes: Vec<f64> = diagram.proper_pairs().map(|p| p.lifetime()).collect();
    if lifetimes.len() <= 1 {
        return 0.0;
    }
    let total: f64 = lifetimes.iter().sum();
    -lifetimes
        .iter()
        .map(|l| {
            let p = l / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Rectangle `[x_min, x_max] x [y_min, y_max]` split into `nx x ny` cells;
/// x is birth, y is death. A grid with `nx == 1` is a line along the death
/// axis, used for dimension-0 cross diagrams whose births are all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        if !(x_min <= x_max && y_min <= y_max) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite and ordered"));
        }
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    /// Line grid along the death axis.
    pub fn death_line(y_min: f64, y_max: f64, ny: usize) -> Result<Self> {
        Self::new(0.0, 0.0, y_min, y_max, 1, ny)
    }

    /// One-row grid along x, the layout of 1-D density curves.
    pub fn line(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        Self::new(x_min, x_max, 0.0, 0.0, nx, 1)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_death_line(&self) -> bool {
        self.nx == 1
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * (self.y_max - self.y_min) / self.ny as f64
    }
}

/// Nonnegative values on a [`GridSpec`], row-major (`values[j * nx + i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl DensityGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.cells()], normalized: false }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("grid values must be nonnegative"));
        }
        let normalized = (values.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        Ok(Self { spec, values, normalized })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales values to sum to 1; fails on an all-zero grid.
    pub fn normalize(&mut self) -> Result<()> {
        let s = self.sum();
        if !(s > 0.0) {
            return Err(Error::invalid("cannot normalize an all-zero grid"));
        }
        self.values.iter_mut().for_each(|v| *v /= s);
        self.normalized = true;
        Ok(())
    }

    /// `(i, j)` of the largest cell (first on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best % self.spec.nx, best / self.spec.nx)
    }

    pub(crate) fn check_same_shape(&self, other: &DensityGrid) -> Result<()> {
        if self.spec.nx != other.spec.nx || self.spec.ny != other.spec.ny {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.spec.nx, self.spec.ny, other.spec.nx, other.spec.ny
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Constant,
    /// Linear in `death - birth`.
    Lifetime,
}

impl Weighting {
    fn weight(self, birth: f64, death: f64) -> f64 {
        match self {
            Weighting::Constant => 1.0,
            Weighting::Lifetime => death - birth,
        }
    }

    /// Constant for dimension 0 (the vertical-line case), lifetime otherwise.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim == 0 {
            Weighting::Constant
        } else {
            Weighting::Lifetime
        }
    }
}

/// Sum of Gaussian bumps (standard deviation `bandwidth`) centered at the
/// finite positive pairs, evaluated at cell centers.
pub fn persistence_image(
    diagram: &PersistenceDiagram,
    spec: &GridSpec,
    bandwidth: f64,
    weighting: Weighting,
) -> Result<DensityGrid> {
    if !(bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let mut grid = DensityGrid::zeros(*spec);
    add_image(&mut grid, diagram, bandwidth, weighting, 1.0);
    Ok(grid)
}

fn add_image(grid: &mut DensityGrid, diagram: &PersistenceDiagram, h: f64, weighting: Weighting, scale: f64) {
    let spec = grid.spec;
    let inv = 1.0 / (2.0 * h * h);
    let xs: Vec<f64> = (0..spec.nx).map(|i| spec.x_center(i)).collect();
    let ys: Vec<f64> = (0..spec.ny).map(|j| spec.y_center(j)).collect();
    let line = spec.is_death_line();
    let norm = if line {
        1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h)
    } else {
        1.0 / (2.0 * std::f64::consts::PI * h * h)
    };
    for p in diagram.proper_pairs() {
        let w = scale * norm * weighting.weight(p.birth, p.death);
        let gy: Vec<f64> = ys.iter().map(|y| (-(y - p.death).powi(2) * inv).exp()).collect();
        if line {
            for (j, g) in gy.iter().enumerate() {
                grid.values[j] += w * g;
            }
        } else {
            let gx: Vec<f64> = xs.iter().map(|x| (-(x - p.birth).powi(2) * inv).exp()).collect();
            for (j, g) in gy.iter().enumerate() {
                let row = &mut grid.values[j * spec.nx..(j + 1) * spec.nx];
                for (cell, gx) in row.iter_mut().zip(&gx) {
                    *cell += w * g * gx;
                }
            }
        }
    }
}

/// Mean of per-diagram persistence images, optionally normalized to sum 1.
pub fn expected_density(
    diagrams: &[PersistenceDiagram],
    spec: &GridSpec,
    bandwidth: f64,
    weighting: Weighting,
    normalize: bool,
) -> Result<DensityGrid> {
    if diagrams.is_empty() {
        return Err(Error::Empty("diagram list"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let mut grid = DensityGrid::zeros(*spec);
    for d in diagrams {
        let mut one = DensityGrid::zeros(*spec);
        add_image(&mut one, d, bandwidth, weighting, 1.0);
        for (acc, v) in grid.values.iter_mut().zip(&one.values) {
            *acc += v;
        }
    }
    let n = diagrams.len() as f64;
    grid.values.iter_mut().for_each(|v| *v /= n);
    if normalize {
        grid.normalize()?;
    }
    Ok(grid)
}

fn pooled_points(diagrams: &[PersistenceDiagram]) -> Vec<(f64, f64)> {
    diagrams
        .iter()
        .flat_map(|d| d.proper_pairs().map(|p| (p.birth, p.death)))
        .collect()
}

/// Silverman-style bandwidth on the pooled finite pairs. When every birth is
/// zero the 1-D rule on deaths is used; otherwise `sigma * n^(-1/6)` with
/// `sigma` the root mean of the birth and death variances.
pub fn diagram_bandwidth(diagrams: &[PersistenceDiagram]) -> Result<f64> {
    let pts = pooled_points(diagrams);
    if pts.is_empty() {
        return Err(Error::Empty("finite persistence pairs"));
    }
    let deaths: Vec<f64> = pts.iter().map(|p| p.1).collect();
    if pts.iter().all(|p| p.0 == 0.0) {
        return Ok(silverman_bandwidth(&deaths));
    }
    let births: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64
    };
    let sigma = ((var(&births) + var(&deaths)) / 2.0).sqrt();
    let h = sigma * (pts.len() as f64).powf(-1.0 / 6.0);
    if h > 0.0 {
        Ok(h)
    } else {
        Ok(silverman_bandwidth(&deaths))
    }
}

/// Bounding box of all pooled pairs padded by `3 * bandwidth`. If every birth
/// is zero the grid is a death-axis line with `ny` cells.
pub fn fit_grid(diagrams: &[PersistenceDiagram], bandwidth: f64, nx: usize, ny: usize) -> Result<GridSpec> {
    let pts = pooled_points(diagrams);
    if pts.is_empty() {
        return Err(Error::Empty("finite persistence pairs"));
    }
    let pad = 3.0 * bandwidth;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(b, d) in &pts {
        x0 = x0.min(b);
        x1 = x1.max(b);
        y0 = y0.min(d);
        y1 = y1.max(d);
    }
    if pts.iter().all(|p| p.0 == 0.0) {
        GridSpec::death_line(y0 - pad, y1 + pad, ny)
    } else {
        GridSpec::new(x0 - pad, x1 + pad, y0 - pad, y1 + pad, nx, ny)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistencePair;

    fn diagram(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(1, pairs.iter().map(|&(b, d)| PersistencePair::new(b, d)).collect())
    }

    #[test]
    fn mtd_examples() {
        assert_eq!(mtd(&diagram(&[])), 0.0);
        assert_eq!(mtd(&diagram(&[(0.0, 1.0), (0.5, 2.0)])), 2.5);
        assert_eq!(mtd(&diagram(&[(0.0, 1.0), (0.3, f64::INFINITY), (0.2, 0.2)])), 1.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(persistence_entropy(&diagram(&[(0.0, 4.0)])), 0.0);
        let k = 5;
        let eq: Vec<(f64, f64)> = (0..k).map(|i| (i as f64, i as f64 + 2.0)).collect();
        assert!((persistence_entropy(&diagram(&eq)) - (k as f64).ln()).abs() < 1e-12);
        let want = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((persistence_entropy(&diagram(&[(0.0, 1.0), (0.0, 3.0)])) - want).abs() < 1e-15);
        assert!((want - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn empty_diagram_image_is_zero() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.0, 5, 5).unwrap();
        let g = persistence_image(&diagram(&[]), &spec, 0.1, Weighting::Constant).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));
        assert!(persistence_image(&diagram(&[]), &spec, 0.0, Weighting::Constant).is_err());
    }

    #[test]
    fn single_pair_peaks_at_its_cell() {
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 9, 9).unwrap();
        let g = persistence_image(&diagram(&[(1.0, 1.0 + 1e-9)]), &spec, 0.3, Weighting::Constant).unwrap();
        assert_eq!(g.argmax(), (4, 4));
    }

    #[test]
    fn image_is_linear() {
        let spec = GridSpec::new(0.0, 3.0, 0.0, 4.0, 12, 10).unwrap();
        let a = diagram(&[(0.2, 0.9)]);
        let b = diagram(&[(2.0, 3.5)]);
        let ab = diagram(&[(0.2, 0.9), (2.0, 3.5)]);
        for w in [Weighting::Constant, Weighting::Lifetime] {
            let ga = persistence_image(&a, &spec, 0.25, w).unwrap();
            let gb = persistence_image(&b, &spec, 0.25, w).unwrap();
            let gab = persistence_image(&ab, &spec, 0.25, w).unwrap();
            for k in 0..spec.cells() {
                assert!((ga.values[k] + gb.values[k] - gab.values[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn death_line_image_for_h0() {
        let d = PersistenceDiagram::new(0, vec![PersistencePair::new(0.0, 1.0), PersistencePair::new(0.0, 2.0)]);
        let h = diagram_bandwidth(std::slice::from_ref(&d)).unwrap();
        let spec = fit_grid(std::slice::from_ref(&d), h, 10, 40).unwrap();
        assert!(spec.is_death_line());
        let g = persistence_image(&d, &spec, h, Weighting::Constant).unwrap();
        assert_eq!(g.values.len(), 40);
        // integral along the line ~ number of pairs
        let dy = (spec.y_max - spec.y_min) / spec.ny as f64;
        assert!((g.sum() * dy - 2.0).abs() < 0.05);
    }

    #[test]
    fn expected_density_examples() {
        let spec = GridSpec::new(0.0, 3.0, 0.0, 4.0, 8, 8).unwrap();
        let a = diagram(&[(0.2, 0.9), (1.0, 2.0)]);
        let b = diagram(&[(0.5, 3.0)]);
        let ia = persistence_image(&a, &spec, 0.3, Weighting::Lifetime).unwrap();
        let ib = persistence_image(&b, &spec, 0.3, Weighting::Lifetime).unwrap();

        let one = expected_density(std::slice::from_ref(&a), &spec, 0.3, Weighting::Lifetime, false).unwrap();
        assert_eq!(one.values, ia.values);
        let twice = expected_density(&[a.clone(), a.clone()], &spec, 0.3, Weighting::Lifetime, false).unwrap();
        for (x, y) in twice.values.iter().zip(&ia.values) {
            assert!((x - y).abs() < 1e-15);
        }
        let mean = expected_density(&[a, b], &spec, 0.3, Weighting::Lifetime, true).unwrap();
        let raw: Vec<f64> = ia.values.iter().zip(&ib.values).map(|(x, y)| (x + y) / 2.0).collect();
        let s: f64 = raw.iter().sum();
        for (m, r) in mean.values.iter().zip(&raw) {
            assert!((m - r / s).abs() < 1e-12);
        }
        assert!((mean.sum() - 1.0).abs() < 1e-9);
        assert!(mean.normalized);
        assert!(expected_density(&[], &spec, 0.3, Weighting::Lifetime, false).is_err());
    }
}
