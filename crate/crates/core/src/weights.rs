//! Subharmonic weights φ: the radial monomials |z|^m and tabulated samples.
//!
//! Everything downstream needs φ, φ_z, Δφ and the vector potential
//! A = (−φ_y, φ_x), whose curl is Δφ. Tabulated weights are bilinear in
//! their node values; derivatives come from centred differences at the nodes.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

/// Gauss–Legendre nodes and weights on [0, 1].
pub(crate) const GL_NODES: [f64; 4] = [0.069_431_844_202_973_71, 0.330_009_478_207_571_87, 0.669_990_521_792_428_1, 0.930_568_155_797_026_3];
pub(crate) const GL_WEIGHTS: [f64; 4] = [0.173_927_422_568_726_93, 0.326_072_577_431_273_07, 0.326_072_577_431_273_07, 0.173_927_422_568_726_93];

#[derive(Clone, Debug, PartialEq)]
pub enum WeightModel {
    Monomial { m: f64 },
    Tabulated(TabulatedWeight),
}

/// φ sampled on a regular lattice `(x0 + i·dx, y0 + j·dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedWeight {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    phi: Vec<f64>,
    grad: Vec<(f64, f64)>,
    lap: Vec<f64>,
}

/// Tolerance below zero tolerated on tabulated Laplacians, relative to the
/// largest |Δφ| in the table.
const SUBHARMONIC_TOL: f64 = 1e-9;

impl TabulatedWeight {
    /// `phi[i * ny + j]` is the value at `(x0 + i·dx, y0 + j·dy)`.
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64, nx: usize, ny: usize, phi: Vec<f64>) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Config("tabulated weight needs at least 3×3 samples".into()));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Config("tabulated weight spacing must be positive".into()));
        }
        if phi.len() != nx * ny || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tabulated weight has missing or non-finite samples".into()));
        }
        let at = |i: usize, j: usize| phi[i * ny + j];
        let mut grad = vec![(0.0, 0.0); nx * ny];
        let mut lap = vec![0.0; nx * ny];
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                grad[i * ny + j] =
                    ((at(i + 1, j) - at(i - 1, j)) / (2.0 * dx), (at(i, j + 1) - at(i, j - 1)) / (2.0 * dy));
                lap[i * ny + j] = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (dx * dx)
                    + (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (dy * dy);
            }
        }
        Ok(Self { x0, y0, dx, dy, nx, ny, phi, grad, lap })
    }

    /// Reads a CSV with header `x,y,phi` covering a full regular lattice.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            y: f64,
            phi: f64,
        }
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Config(format!("cannot read weight table {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for r in rdr.deserialize() {
            let r: Row = r.map_err(|e| Error::Config(format!("bad weight table row: {e}")))?;
            rows.push(r);
        }
        let axis = |vals: Vec<f64>| -> Result<(f64, f64, usize)> {
            let mut v = vals;
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
            if v.len() < 3 {
                return Err(Error::Config("weight table needs at least 3 distinct x and y values".into()));
            }
            let d = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            for (k, x) in v.iter().enumerate() {
                if (x - (v[0] + k as f64 * d)).abs() > 1e-6 * d {
                    return Err(Error::Config("weight table is not on a uniform lattice".into()));
                }
            }
            Ok((v[0], d, v.len()))
        };
        let (x0, dx, nx) = axis(rows.iter().map(|r| r.x).collect())?;
        let (y0, dy, ny) = axis(rows.iter().map(|r| r.y).collect())?;
        if rows.len() != nx * ny {
            return Err(Error::Config(format!("weight table has {} rows, expected {}", rows.len(), nx * ny)));
        }
        let mut phi = vec![f64::NAN; nx * ny];
        for r in &rows {
            let i = ((r.x - x0) / dx).round() as usize;
            let j = ((r.y - y0) / dy).round() as usize;
            phi[i * ny + j] = r.phi;
        }
        if phi.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("weight table has duplicate or missing lattice points".into()));
        }
        Self::new(x0, y0, dx, dy, nx, ny, phi)
    }

    /// The rectangle on which queries are answered: the table minus its
    /// outer ring, where centred differences are unavailable.
    pub fn query_domain(&self) -> ((f64, f64), (f64, f64)) {
        (
            (self.x0 + self.dx, self.x0 + (self.nx - 2) as f64 * self.dx),
            (self.y0 + self.dy, self.y0 + (self.ny - 2) as f64 * self.dy),
        )
    }

    fn locate(&self, z: C) -> Result<(usize, usize, f64, f64)> {
        let ((xa, xb), (ya, yb)) = self.query_domain();
        let eps = 1e-9 * self.dx.max(self.dy);
        if !(z.re >= xa - eps && z.re <= xb + eps && z.im >= ya - eps && z.im <= yb + eps) {
            return Err(Error::Domain(format!("({}, {}) lies outside [{xa}, {xb}]×[{ya}, {yb}]", z.re, z.im)));
        }
        let fx = ((z.re - self.x0) / self.dx).clamp(1.0, (self.nx - 2) as f64);
        let fy = ((z.im - self.y0) / self.dy).clamp(1.0, (self.ny - 2) as f64);
        let i = (fx.floor() as usize).min(self.nx - 3);
        let j = (fy.floor() as usize).min(self.ny - 3);
        Ok((i, j, fx - i as f64, fy - j as f64))
    }

    fn bilinear<T, F>(&self, z: C, f: F) -> Result<T>
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
        F: Fn(usize) -> T,
    {
        let (i, j, s, t) = self.locate(z)?;
        let k = |a: usize, b: usize| f(a * self.ny + b);
        Ok(k(i, j) * ((1.0 - s) * (1.0 - t)) + k(i + 1, j) * (s * (1.0 - t)) + k(i, j + 1) * ((1.0 - s) * t)
            + k(i + 1, j + 1) * (s * t))
    }

    fn max_abs_laplacian(&self) -> f64 {
        self.lap.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
    }
}

#[derive(Clone, Copy)]
struct Pair(f64, f64);

impl std::ops::Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, s: f64) -> Pair {
        Pair(self.0 * s, self.1 * s)
    }
}

impl std::ops::Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl WeightModel {
    /// |z|^m; exponents below 2 make Δφ unbounded at the origin and are
    /// rejected.
    pub fn monomial(m: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 2.0) {
            return Err(Error::Config(format!("monomial exponent must satisfy m >= 2, got {m}")));
        }
        Ok(WeightModel::Monomial { m })
    }

    /// φ(z) = |z|².
    pub fn fock() -> Self {
        WeightModel::Monomial { m: 2.0 }
    }

    pub fn tabulated(table: TabulatedWeight) -> Self {
        WeightModel::Tabulated(table)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WeightModel::Monomial { .. } => "monomial",
            WeightModel::Tabulated(_) => "tabulated",
        }
    }

    /// A short, stable description used in reports and cache keys.
    pub fn describe(&self) -> WeightDescriptor {
        match self {
            WeightModel::Monomial { m } => WeightDescriptor { kind: "monomial".into(), m: Some(*m), table_digest: None },
            WeightModel::Tabulated(t) => {
                let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
                for v in [t.x0, t.y0, t.dx, t.dy, t.nx as f64, t.ny as f64].iter().chain(&t.phi) {
                    for b in v.to_bits().to_le_bytes() {
                        acc = (acc ^ b as u64).wrapping_mul(0x0100_0000_01b3);
                    }
                }
                WeightDescriptor { kind: "tabulated".into(), m: None, table_digest: Some(format!("{acc:016x}")) }
            }
        }
    }

    fn finite(z: C) -> Result<()> {
        if z.re.is_finite() && z.im.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain("non-finite query point".into()))
        }
    }

    pub fn eval(&self, z: C) -> Result<f64> {
        Self::finite(z)?;
        match self {
            WeightModel::Monomial { m } => Ok(z.norm_sqr().powf(0.5 * m)),
            WeightModel::Tabulated(t) => t.bilinear(z, |k| t.phi[k]),
        }
    }

    /// (φ_x, φ_y)
    pub fn gradient(&self, z: C) -> Result<(f64, f64)> {
        Self::finite(z)?;
        match self {
            WeightModel::Monomial { m } => {
                let c = m * z.norm_sqr().powf(0.5 * (m - 2.0));
                Ok((c * z.re, c * z.im))
            }
            WeightModel::Tabulated(t) => {
                let p = t.bilinear(z, |k| Pair(t.grad[k].0, t.grad[k].1))?;
                Ok((p.0, p.1))
            }
        }
    }

    /// φ_z = ½(φ_x − iφ_y).
    pub fn wirtinger_gradient(&self, z: C) -> Result<C> {
        let (px, py) = self.gradient(z)?;
        Ok(C::new(0.5 * px, -0.5 * py))
    }

    /// Δφ, clamped at zero for round-off on tabulated data.
    pub fn laplacian(&self, z: C) -> Result<f64> {
        Self::finite(z)?;
        match self {
            WeightModel::Monomial { m } => Ok(m * m * z.norm_sqr().powf(0.5 * (m - 2.0))),
            WeightModel::Tabulated(t) => {
                let v = t.bilinear(z, |k| t.lap[k])?;
                if v < -SUBHARMONIC_TOL * t.max_abs_laplacian().max(1.0) {
                    return Err(Error::Subharmonicity { x: z.re, y: z.im, value: v });
                }
                Ok(v.max(0.0))
            }
        }
    }

    /// (A₁, A₂) = (−φ_y, φ_x).
    pub fn vector_potential(&self, z: C) -> Result<(f64, f64)> {
        let (px, py) = self.gradient(z)?;
        Ok((-py, px))
    }

    /// ∫ A·dl along the segment from a to b.
    pub fn link_integral(&self, a: C, b: C) -> Result<f64> {
        let d = b - a;
        let mut s = 0.0;
        for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let (a1, a2) = self.vector_potential(a + d * *t)?;
            s += w * (a1 * d.re + a2 * d.im);
        }
        Ok(s)
    }

    /// Fails with a subharmonicity error if any tabulated node inside the
    /// query domain has Δφ below tolerance.
    pub fn check_subharmonic(&self) -> Result<()> {
        if let WeightModel::Tabulated(t) = self {
            let tol = SUBHARMONIC_TOL * t.max_abs_laplacian().max(1.0);
            for i in 1..t.nx - 1 {
                for j in 1..t.ny - 1 {
                    let v = t.lap[i * t.ny + j];
                    if v < -tol {
                        return Err(Error::Subharmonicity {
                            x: t.x0 + i as f64 * t.dx,
                            y: t.y0 + j as f64 * t.dy,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDescriptor {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingSample {
    pub center: [f64; 2],
    pub radius: f64,
    /// ν(B(z,2r))/ν(B(z,r)); absent when ν(B(z,r)) = 0.
    pub ratio: Option<f64>,
}

/// Sampled audit of the doubling and lower-bound conditions on ν = Δφ dλ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// Largest observed ratio; absent if no ratio was defined.
    pub c_hat: Option<f64>,
    /// Smallest observed ν(B(z,1)).
    pub delta_hat: f64,
    pub resolution: f64,
    pub samples: Vec<DoublingSample>,
}

/// ν(B(c, r)) by the midpoint rule on square cells of side `res` centred
/// on a lattice aligned with c.
pub fn ball_measure(w: &WeightModel, c: C, r: f64, res: f64) -> Result<f64> {
    let k = (r / res).ceil() as i64;
    let mut s = 0.0;
    for i in -k..k {
        let x = (i as f64 + 0.5) * res;
        for j in -k..k {
            let y = (j as f64 + 0.5) * res;
            if x * x + y * y < r * r {
                s += w.laplacian(c + C::new(x, y))?;
            }
        }
    }
    Ok(s * res * res)
}

/// Doubling ratios over all (center, radius) pairs plus ν(B(z,1)) at each
/// center. A sampled check, not a proof of the doubling property.
pub fn doubling_report(w: &WeightModel, centers: &[C], radii: &[f64], resolution: f64) -> Result<DoublingReport> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Usage("doubling radii must be positive".into()));
    }
    let rmin = radii.iter().copied().fold(1.0, f64::min);
    if !(resolution > 0.0) || resolution > rmin {
        return Err(Error::Resolution(format!(
            "quadrature resolution {resolution} is coarser than the smallest radius {rmin}"
        )));
    }
    let mut samples = Vec::new();
    let mut c_hat: Option<f64> = None;
    let mut delta_hat = f64::INFINITY;
    for &c in centers {
        delta_hat = delta_hat.min(ball_measure(w, c, 1.0, resolution)?);
        for &r in radii {
            let inner = ball_measure(w, c, r, resolution)?;
            let outer = ball_measure(w, c, 2.0 * r, resolution)?;
            let ratio = (inner > 0.0).then(|| outer / inner);
            if let Some(q) = ratio {
                c_hat = Some(c_hat.map_or(q, |m| m.max(q)));
            }
            samples.push(DoublingSample { center: [c.re, c.im], radius: r, ratio });
        }
    }
    if centers.is_empty() {
        delta_hat = 0.0;
    }
    Ok(DoublingReport { c_hat, delta_hat, resolution, samples })
}
