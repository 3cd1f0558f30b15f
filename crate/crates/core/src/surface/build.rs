use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Identification, SurfaceError, TriangulatedSurface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    /// `[width, height]`
    Rectangle,
    /// `[circumference, height]`, periodic in x
    Cylinder,
    /// `[period_x, period_y]`
    FlatTorus,
    /// `[radius]`
    Disk,
}

/// Structured uniform triangulations of the test geometries.
///
/// `resolution` is the number of cells along the first dimension (rings
/// for the disk); the second dimension gets a proportional cell count.
pub fn build_surface(
    kind: SurfaceKind,
    resolution: usize,
    dimensions: &[f64],
) -> Result<TriangulatedSurface, SurfaceError> {
    if resolution < 4 {
        return Err(SurfaceError::Resolution(resolution));
    }
    let expected = if kind == SurfaceKind::Disk { 1 } else { 2 };
    if dimensions.len() != expected || dimensions.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
        return Err(SurfaceError::Dimensions(dimensions.to_vec()));
    }
    match kind {
        SurfaceKind::Disk => disk(resolution, dimensions[0]),
        _ => {
            let (w, h) = (dimensions[0], dimensions[1]);
            let nx = resolution;
            let ny = ((resolution as f64) * h / w).round().max(1.0) as usize;
            let (wrap_x, wrap_y) = match kind {
                SurfaceKind::Rectangle => (false, false),
                SurfaceKind::Cylinder => (true, false),
                _ => (true, true),
            };
            if wrap_y && ny < 4 {
                return Err(SurfaceError::Resolution(ny));
            }
            let ident = match kind {
                SurfaceKind::Rectangle => Identification::None,
                SurfaceKind::Cylinder => Identification::PeriodicX { period: w },
                _ => Identification::PeriodicXY { period_x: w, period_y: h },
            };
            grid(nx, ny, w, h, wrap_x, wrap_y, ident)
        }
    }
}

fn grid(
    nx: usize,
    ny: usize,
    w: f64,
    h: f64,
    wrap_x: bool,
    wrap_y: bool,
    ident: Identification,
) -> Result<TriangulatedSurface, SurfaceError> {
    let cols = if wrap_x { nx } else { nx + 1 };
    let rows = if wrap_y { ny } else { ny + 1 };
    let mut positions = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            positions.push([w * i as f64 / nx as f64, h * j as f64 / ny as f64]);
        }
    }
    let index = |i: usize, j: usize| (j % rows) * cols + (i % cols);
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = index(i, j);
            let b = index(i + 1, j);
            let c = index(i + 1, j + 1);
            let d = index(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangulatedSurface::new(positions, triangles, ident)
}

/// Concentric rings with `6 i` vertices on ring `i`, zipped by angle.
fn disk(rings: usize, radius: f64) -> Result<TriangulatedSurface, SurfaceError> {
    let mut positions = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for i in 1..=rings {
        ring_start.push(positions.len());
        let r = radius * i as f64 / rings as f64;
        let m = 6 * i;
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            positions.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for i in 1..rings {
        let (inner, mi) = (ring_start[i], 6 * i);
        let (outer, mo) = (ring_start[i + 1], 6 * (i + 1));
        let (mut a, mut b) = (0usize, 0usize);
        while a < mi || b < mo {
            // advance along whichever ring has the smaller next angle
            let next_inner = (a + 1) as f64 / mi as f64;
            let next_outer = (b + 1) as f64 / mo as f64;
            if b < mo && (a == mi || next_outer <= next_inner) {
                triangles.push([inner + a % mi, outer + b, outer + (b + 1) % mo]);
                b += 1;
            } else {
                triangles.push([inner + a, outer + b % mo, inner + (a + 1) % mi]);
                a += 1;
            }
        }
    }
    TriangulatedSurface::new(positions, triangles, Identification::None)
}
