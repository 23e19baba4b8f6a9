//! Precomputed grid of `log F` over `(λ₁, λ₂, λ₃)` with trilinear
//! interpolation.
//!
//! Interpolation runs in a warped coordinate per axis,
//! `w(λ) = ln(e^{−d/2} I₀(d/2))` with `d = max − λ`, and the nodes are uniform
//! in `w`. Along one axis with the other two strongly concentrated, `log F`
//! equals `w` up to a constant, so the interpolant is exact there; elsewhere
//! `log F` stays close to linear in `w`. On the default 32³ grid this keeps
//! `F` within about 1e-3 relative.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::normalizer::{LogNormalizer, Normalizer, Quadrature};
use crate::quadrature::GaussLegendre;

/// Leading bytes of the binary table format.
pub const TABLE_MAGIC: [u8; 4] = *b"BNGT";
pub const TABLE_VERSION: u32 = 1;
/// Most negative concentration a table may cover.
pub const MIN_SUPPORTED_LAMBDA: f64 = -500.0;
// enough for ~1e-15 in ln I₀ up to d = 500
const WARP_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("invalid grid axis {axis}: {reason}")]
    InvalidSpec { axis: usize, reason: &'static str },
    #[error("concentration {value} on axis {axis} is outside the table range [{min}, {max}]")]
    OutOfRange {
        axis: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("expected {expected} table values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("table value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("bad table magic")]
    BadMagic,
    #[error("unsupported table format version {0}")]
    UnsupportedVersion(u32),
    #[error("table data truncated")]
    Truncated,
}

/// `ln(e^{−x} I₀(x))` at `x = d/2`, by Gauss–Legendre on
/// `I₀(x) = (1/π) ∫₀^π e^{x cos θ} dθ`.
#[derive(Debug, Clone, PartialEq)]
struct Warp {
    // (cos θ − 1, weight / π)
    rule: Vec<(f64, f64)>,
}

impl Warp {
    fn new() -> Self {
        let gl = GaussLegendre::new(WARP_NODES);
        Self {
            rule: gl
                .on_interval(0.0, PI)
                .map(|(t, w)| (t.cos() - 1.0, w / PI))
                .collect(),
        }
    }

    /// Value and derivative with respect to `d`.
    fn eval(&self, d: f64) -> (f64, f64) {
        let x = 0.5 * d;
        let (mut i0, mut i1) = (0.0, 0.0);
        for &(c, w) in &self.rule {
            let e = w * (x * c).exp();
            i0 += e;
            i1 += (c + 1.0) * e;
        }
        (i0.ln(), 0.5 * (i1 / i0 - 1.0))
    }

    /// Solves `eval(d) = target` for `d ∈ [0, span]`.
    fn inverse(&self, target: f64, span: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid).0 > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// One axis of the grid: `count` nodes from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: u32,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: u32) -> Self {
        Self { min, max, count }
    }

    /// Node positions, ascending, with exact end points.
    pub fn nodes(&self) -> Vec<f64> {
        self.grid(&Warp::new()).nodes
    }

    fn grid(&self, warp: &Warp) -> AxisGrid {
        let n = self.count as usize;
        let span = self.max - self.min;
        let w_min = warp.eval(span).0;
        let mut nodes = Vec::with_capacity(n);
        let mut warped = Vec::with_capacity(n);
        for k in 0..n {
            let (node, w) = if k == 0 {
                (self.min, w_min)
            } else if k + 1 == n {
                (self.max, 0.0)
            } else {
                let d = warp.inverse(w_min * (1.0 - k as f64 / (n - 1) as f64), span);
                (self.max - d, warp.eval(d).0)
            };
            nodes.push(node);
            warped.push(w);
        }
        AxisGrid {
            max: self.max,
            nodes,
            warped,
        }
    }

    fn validate(&self, axis: usize) -> Result<(), TableError> {
        let err = |reason| Err(TableError::InvalidSpec { axis, reason });
        if !(self.min.is_finite() && self.max.is_finite()) {
            return err("bounds must be finite");
        }
        if self.min >= self.max {
            return err("min must be below max");
        }
        if self.max > 0.0 {
            return err("max must be non-positive");
        }
        if self.min < MIN_SUPPORTED_LAMBDA {
            return err("min is below the supported range");
        }
        if self.count < 2 {
            return err("at least two nodes are required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AxisGrid {
    max: f64,
    nodes: Vec<f64>,
    warped: Vec<f64>,
}

impl AxisGrid {
    /// Cell index `k`, fraction `t` within it and `dt/dλ`.
    fn locate(&self, warp: &Warp, value: f64) -> (usize, f64, f64) {
        let last = self.nodes.len() - 1;
        let (w, dw) = warp.eval(self.max - value);
        let w_min = self.warped[0];
        let s = if w_min < 0.0 { 1.0 - w / w_min } else { 0.0 };
        let mut k = ((s * last as f64).floor().max(0.0) as usize).min(last - 1);
        // rounding can land one cell off
        while k > 0 && value < self.nodes[k] {
            k -= 1;
        }
        while k + 1 < last && value > self.nodes[k + 1] {
            k += 1;
        }
        let width = self.warped[k + 1] - self.warped[k];
        let t = ((w - self.warped[k]) / width).clamp(0.0, 1.0);
        // dw/dλ = −dw/dd
        (k, t, -dw / width)
    }
}

/// Grid specification: one [`AxisSpec`] per free concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSpec {
    pub axes: [AxisSpec; 3],
}

impl TableSpec {
    pub fn cube(min: f64, max: f64, count: u32) -> Self {
        Self {
            axes: [AxisSpec::new(min, max, count); 3],
        }
    }

    pub fn validate(&self) -> Result<(), TableError> {
        for (i, a) in self.axes.iter().enumerate() {
            a.validate(i)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index with `λ₁` slowest.
    pub fn index(&self, i: [usize; 3]) -> usize {
        let [_, n2, n3] = self.axes.map(|a| a.count as usize);
        (i[0] * n2 + i[1]) * n3 + i[2]
    }

    /// Inverse of [`index`](Self::index).
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let [_, n2, n3] = self.axes.map(|a| a.count as usize);
        [flat / (n2 * n3), (flat / n3) % n2, flat % n3]
    }

    /// Every node in flat-index order.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let axes = self.axes.map(|a| a.nodes());
        (0..self.len())
            .map(|flat| {
                let i = self.unflatten(flat);
                [axes[0][i[0]], axes[1][i[1]], axes[2][i[2]]]
            })
            .collect()
    }
}

impl Default for TableSpec {
    /// 32³ nodes over `[−100, 0]³`.
    fn default() -> Self {
        Self::cube(-100.0, 0.0, 32)
    }
}

/// `log F` sampled on a [`TableSpec`] grid.
#[derive(Debug, Clone)]
pub struct NormalizationTable {
    spec: TableSpec,
    values: Vec<f64>,
    warp: Warp,
    grids: [AxisGrid; 3],
}

impl PartialEq for NormalizationTable {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.values == other.values
    }
}

impl NormalizationTable {
    /// Evaluates `quadrature` at every node, in flat-index order.
    pub fn build(spec: TableSpec, quadrature: &Quadrature) -> Result<Self, TableError> {
        spec.validate()?;
        let values = spec
            .nodes()
            .into_iter()
            .map(|l| quadrature.log_f(l))
            .collect();
        Self::from_values(spec, values)
    }

    pub fn from_values(spec: TableSpec, values: Vec<f64>) -> Result<Self, TableError> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(TableError::ValueCount {
                expected: spec.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TableError::NonFiniteValue(i));
        }
        let warp = Warp::new();
        let grids = spec.axes.map(|a| a.grid(&warp));
        Ok(Self {
            spec,
            values,
            warp,
            grids,
        })
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, i: [usize; 3]) -> f64 {
        self.values[self.spec.index(i)]
    }

    /// Concentrations at grid index `i`.
    pub fn node(&self, i: [usize; 3]) -> [f64; 3] {
        core::array::from_fn(|a| self.grids[a].nodes[i[a]])
    }

    pub fn contains(&self, lambdas: [f64; 3]) -> bool {
        lambdas
            .iter()
            .zip(&self.spec.axes)
            .all(|(l, a)| *l >= a.min && *l <= a.max)
    }

    /// Trilinear interpolation of `log F` and the exact gradient of the
    /// interpolant.
    pub fn interpolate(&self, lambdas: [f64; 3]) -> Result<(f64, [f64; 3]), TableError> {
        for (axis, (l, a)) in lambdas.iter().zip(&self.spec.axes).enumerate() {
            if !(*l >= a.min && *l <= a.max) {
                return Err(TableError::OutOfRange {
                    axis,
                    value: *l,
                    min: a.min,
                    max: a.max,
                });
            }
        }
        Ok(self.trilinear(lambdas))
    }

    /// Like [`interpolate`](Self::interpolate) but clamps out-of-range
    /// concentrations onto the grid; clamped axes get a zero gradient.
    pub fn interpolate_clamped(&self, lambdas: [f64; 3]) -> LogNormalizer {
        let mut clamped = [false; 3];
        let mut l = lambdas;
        for i in 0..3 {
            let a = self.spec.axes[i];
            if l[i].is_nan() || l[i] < a.min {
                l[i] = a.min;
                clamped[i] = true;
            } else if l[i] > a.max {
                l[i] = a.max;
                clamped[i] = true;
            }
        }
        let (log_f, mut grad) = self.trilinear(l);
        for i in 0..3 {
            if clamped[i] {
                grad[i] = 0.0;
            }
        }
        LogNormalizer {
            log_f,
            grad,
            clamped,
        }
    }

    fn trilinear(&self, l: [f64; 3]) -> (f64, [f64; 3]) {
        let mut lo = [0usize; 3];
        let mut t = [0.0; 3];
        let mut dt = [0.0; 3];
        for i in 0..3 {
            (lo[i], t[i], dt[i]) = self.grids[i].locate(&self.warp, l[i]);
        }
        let mut c = [[[0.0; 2]; 2]; 2];
        for (a, plane) in c.iter_mut().enumerate() {
            for (b, row) in plane.iter_mut().enumerate() {
                for (d, v) in row.iter_mut().enumerate() {
                    *v = self.value_at([lo[0] + a, lo[1] + b, lo[2] + d]);
                }
            }
        }
        let lerp = |x0: f64, x1: f64, s: f64| (1.0 - s) * x0 + s * x1;
        // reduce along axis 3, then 2, then 1, keeping partial derivatives
        let mut c2 = [[0.0; 2]; 2];
        let mut d3 = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                c2[a][b] = lerp(c[a][b][0], c[a][b][1], t[2]);
                d3[a][b] = c[a][b][1] - c[a][b][0];
            }
        }
        let mut c1 = [0.0; 2];
        let mut d2 = [0.0; 2];
        let mut d3b = [0.0; 2];
        for a in 0..2 {
            c1[a] = lerp(c2[a][0], c2[a][1], t[1]);
            d2[a] = c2[a][1] - c2[a][0];
            d3b[a] = lerp(d3[a][0], d3[a][1], t[1]);
        }
        let value = lerp(c1[0], c1[1], t[0]);
        let g1 = (c1[1] - c1[0]) * dt[0];
        let g2 = lerp(d2[0], d2[1], t[0]) * dt[1];
        let g3 = lerp(d3b[0], d3b[1], t[0]) * dt[2];
        (value, [g1, g2, g3])
    }

    /// Serializes to the `BNGT` binary format (little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 3 * 20 + 8 * self.values.len());
        out.extend_from_slice(&TABLE_MAGIC);
        out.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        for a in &self.spec.axes {
            out.extend_from_slice(&a.min.to_le_bytes());
            out.extend_from_slice(&a.max.to_le_bytes());
            out.extend_from_slice(&a.count.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != TABLE_MAGIC {
            return Err(TableError::BadMagic);
        }
        let version = r.u32()?;
        if version != TABLE_VERSION {
            return Err(TableError::UnsupportedVersion(version));
        }
        let mut axes = [AxisSpec::new(0.0, 0.0, 0); 3];
        for a in &mut axes {
            *a = AxisSpec::new(r.f64()?, r.f64()?, r.u32()?);
        }
        let spec = TableSpec { axes };
        spec.validate()?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            values.push(r.f64()?);
        }
        if r.pos != bytes.len() {
            return Err(TableError::ValueCount {
                expected: spec.len(),
                actual: spec.len() + (bytes.len() - r.pos) / 8,
            });
        }
        Self::from_values(spec, values)
    }
}

impl Normalizer for NormalizationTable {
    fn log_normalizer(&self, lambdas: [f64; 3]) -> LogNormalizer {
        self.interpolate_clamped(lambdas)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TableError> {
        let end = self.pos.checked_add(n).ok_or(TableError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(TableError::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, TableError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64, TableError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
