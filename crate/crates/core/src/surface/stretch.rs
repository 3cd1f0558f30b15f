use super::{distance_to_boundary, SurfaceError, TriangulatedSurface};

/// Conformally stretches the metric in the boundary band `ζ < ε`:
/// the factor is `Λ (ζ - ε)^2 + 1` there and 1 elsewhere.
///
/// Edge lengths scale by the square root of the endpoint-averaged factor
/// (lengths see `sqrt` of a conformal metric factor). Any existing
/// conformal factor is multiplied in.
pub fn stretch_metric(
    surface: &TriangulatedSurface,
    band_width: f64,
    strength: f64,
) -> Result<TriangulatedSurface, SurfaceError> {
    if !(band_width.is_finite() && band_width > 0.0 && strength.is_finite() && strength >= 0.0) {
        return Err(SurfaceError::StretchParameters { band_width, strength });
    }
    let zeta = distance_to_boundary(surface)?;
    let factor: Vec<f64> = zeta
        .values()
        .iter()
        .map(|&z| if z < band_width { strength * (z - band_width).powi(2) + 1.0 } else { 1.0 })
        .collect();
    let lengths = surface
        .edges()
        .iter()
        .zip(surface.edge_lengths())
        .map(|(&[a, b], &len)| len * (0.5 * (factor[a] + factor[b])).sqrt())
        .collect();
    let combined = match surface.conformal_factor() {
        Some(old) => old.iter().zip(&factor).map(|(a, b)| a * b).collect(),
        None => factor,
    };
    surface.with_metric(combined, lengths)
}
