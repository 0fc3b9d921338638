//! Truncated lattice hZ² ∩ mask, complex fields on it and the elementary
//! discrete calculus (forward Wirtinger difference, quadrature, balls).
//!
//! Points are numbered lexicographically (x index outer, y index inner). The
//! *interior* holds the unknowns; the *closure* adds the ring of lattice points
//! that are 4-neighbours of the interior but lie outside the mask. Closure
//! indices `0..n` are the interior ones, `n..m` the ring.

use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Disk,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "disk" => Ok(Shape::Disk),
            other => Err(Error::Config(format!("unknown grid shape {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grid2D {
    r: f64,
    h: f64,
    shape: Shape,
    /// Lattice indices run over -half..=half in both directions.
    half: i64,
    points: Vec<(i64, i64)>,
    n: usize,
    lookup: Vec<usize>,
    key: u64,
}

/// Which index set a field lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Interior,
    Closure,
}

/// Builds the lattice {(ih, jh)} masked by `shape`.
///
/// Points on or outside the mask boundary are Dirichlet points and carry no
/// unknown.
pub fn build_grid(r: f64, h: f64, shape: Shape) -> Result<Grid2D> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Config(format!("grid half-width R must be positive, got {r}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("grid spacing h must be positive, got {h}")));
    }
    if h > r / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Config(format!("grid spacing h = {h} exceeds R/2 = {}", r / 2.0)));
    }
    let half = (r / h).ceil() as i64 + 1;
    let tol = 1e-9 * h;
    let inside = |i: i64, j: i64| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        match shape {
            Shape::Square => x.abs() < r - tol && y.abs() < r - tol,
            Shape::Disk => x.hypot(y) < r - tol,
        }
    };
    let side = (2 * half + 1) as usize;
    let mut interior = Vec::new();
    let mut is_in = vec![false; side * side];
    for i in -half..=half {
        for j in -half..=half {
            if inside(i, j) {
                interior.push((i, j));
                is_in[((i + half) as usize) * side + (j + half) as usize] = true;
            }
        }
    }
    let n = interior.len();
    if n == 0 {
        return Err(Error::Config("grid has no interior points".into()));
    }
    let mut ring = Vec::new();
    for i in -half..=half {
        for j in -half..=half {
            let idx = ((i + half) as usize) * side + (j + half) as usize;
            if is_in[idx] {
                continue;
            }
            let touches = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(di, dj)| {
                let (a, b) = (i + di, j + dj);
                a.abs() <= half && b.abs() <= half && is_in[((a + half) as usize) * side + (b + half) as usize]
            });
            if touches {
                ring.push((i, j));
            }
        }
    }
    let mut points = interior;
    points.extend(ring);
    let mut lookup = vec![usize::MAX; side * side];
    for (k, (i, j)) in points.iter().enumerate() {
        lookup[((i + half) as usize) * side + (j + half) as usize] = k;
    }
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    r.to_bits().hash(&mut hasher);
    h.to_bits().hash(&mut hasher);
    shape.hash(&mut hasher);
    let key = hasher.finish();
    Ok(Grid2D { r, h, shape, half, points, n, lookup, key })
}

impl Grid2D {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Number of interior points (unknowns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of closure points.
    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self, support: Support) -> usize {
        match support {
            Support::Interior => self.n,
            Support::Closure => self.m(),
        }
    }

    /// Identifies grids with equal (R, h, shape).
    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn lattice(&self, k: usize) -> (i64, i64) {
        self.points[k]
    }

    pub fn point(&self, k: usize) -> C {
        let (i, j) = self.points[k];
        C::new(i as f64 * self.h, j as f64 * self.h)
    }

    /// Closure index of lattice point (i, j).
    pub fn index_of(&self, i: i64, j: i64) -> Option<usize> {
        if i.abs() > self.half || j.abs() > self.half {
            return None;
        }
        let side = (2 * self.half + 1) as usize;
        let k = self.lookup[((i + self.half) as usize) * side + (j + self.half) as usize];
        (k != usize::MAX).then_some(k)
    }

    /// Interior index of lattice point (i, j).
    pub fn interior_index_of(&self, i: i64, j: i64) -> Option<usize> {
        self.index_of(i, j).filter(|&k| k < self.n)
    }

    pub fn interior_points(&self) -> impl Iterator<Item = C> + '_ {
        (0..self.n).map(move |k| self.point(k))
    }

    /// Distance from z to the complement of the mask.
    pub fn distance_to_boundary(&self, z: C) -> f64 {
        match self.shape {
            Shape::Square => self.r - z.re.abs().max(z.im.abs()),
            Shape::Disk => self.r - z.norm(),
        }
    }

    /// Whether the closed ball B(c, r) lies inside the mask.
    pub fn contains_ball(&self, c: C, r: f64) -> bool {
        self.distance_to_boundary(c) >= r - 1e-12
    }

    fn check(&self, f: &FieldC) -> Result<()> {
        if f.grid_key != self.key || f.values.len() != self.len(f.support) {
            return Err(Error::Usage("field is bound to a different grid".into()));
        }
        Ok(())
    }
}

/// Complex samples on a grid's interior or closure.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldC {
    grid_key: u64,
    support: Support,
    values: Vec<C>,
}

impl FieldC {
    pub fn zeros(grid: &Grid2D, support: Support) -> Self {
        Self { grid_key: grid.key, support, values: vec![C::new(0.0, 0.0); grid.len(support)] }
    }

    pub fn from_fn(grid: &Grid2D, support: Support, f: impl Fn(C) -> C) -> Self {
        let values = (0..grid.len(support)).map(|k| f(grid.point(k))).collect();
        Self { grid_key: grid.key, support, values }
    }

    pub fn from_values(grid: &Grid2D, support: Support, values: Vec<C>) -> Result<Self> {
        if values.len() != grid.len(support) {
            return Err(Error::Usage(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len(support)
            )));
        }
        Ok(Self { grid_key: grid.key, support, values })
    }

    pub(crate) fn from_parts(grid_key: u64, support: Support, values: Vec<C>) -> Self {
        Self { grid_key, support, values }
    }

    pub fn values(&self) -> &[C] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C> {
        self.values
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn grid_key(&self) -> u64 {
        self.grid_key
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Restriction of a closure field to the interior.
    pub fn to_interior(&self, grid: &Grid2D) -> FieldC {
        FieldC { grid_key: self.grid_key, support: Support::Interior, values: self.values[..grid.n()].to_vec() }
    }

    /// Zero extension of an interior field to the closure.
    pub fn to_closure(&self, grid: &Grid2D) -> FieldC {
        match self.support {
            Support::Closure => self.clone(),
            Support::Interior => {
                let mut values = self.values.clone();
                values.resize(grid.m(), C::new(0.0, 0.0));
                FieldC { grid_key: self.grid_key, support: Support::Closure, values }
            }
        }
    }

    pub fn map(&self, f: impl Fn(C) -> C) -> FieldC {
        FieldC { grid_key: self.grid_key, support: self.support, values: self.values.iter().map(|v| f(*v)).collect() }
    }
}

/// ∂_z = ½(∂_x − i∂_y) by forward differences on the interior, with zero
/// Dirichlet values outside.
pub fn dz_forward(grid: &Grid2D) -> CsrMatrix {
    let h = grid.h();
    let mut trip = Vec::with_capacity(3 * grid.n());
    for k in 0..grid.n() {
        let (i, j) = grid.lattice(k);
        trip.push((k, k, C::new(-0.5 / h, 0.5 / h)));
        if let Some(e) = grid.interior_index_of(i + 1, j) {
            trip.push((k, e, C::new(0.5 / h, 0.0)));
        }
        if let Some(n) = grid.interior_index_of(i, j + 1) {
            trip.push((k, n, C::new(0.0, -0.5 / h)));
        }
    }
    CsrMatrix::from_triplets(grid.n(), grid.n(), &trip)
}

/// h²·Σ u_k·conj(v_k).
pub fn integrate(grid: &Grid2D, u: &FieldC, v: &FieldC) -> Result<C> {
    grid.check(u)?;
    grid.check(v)?;
    if u.support != v.support {
        return Err(Error::Usage("fields live on different supports".into()));
    }
    Ok(crate::linalg::cdot(&v.values, &u.values) * (grid.h() * grid.h()))
}

/// Interior indices with |z − center| < radius, ascending.
pub fn ball_subgrid(grid: &Grid2D, center: C, radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(Error::Usage(format!("ball radius must be positive, got {radius}")));
    }
    let idx: Vec<usize> = (0..grid.n()).filter(|&k| (grid.point(k) - center).norm() < radius).collect();
    if idx.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "ball B({}{:+}i, {radius}) contains no interior point",
            center.re, center.im
        )));
    }
    Ok(idx)
}
