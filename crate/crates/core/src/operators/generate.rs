use super::CsrMatrix;

/// Upwind five-point discretization of `−Δu + pe·(u_x + u_y)` on the unit square with
/// homogeneous Dirichlet boundaries, on an `nx × ny` interior grid in row-major order.
///
/// Panics if either grid dimension is below 3.
pub fn gen_convection_diffusion(nx: usize, ny: usize, peclet: f64) -> CsrMatrix {
    assert!(nx >= 3 && ny >= 3, "grid must be at least 3x3, got {nx}x{ny}");
    let hx = 1.0 / (nx as f64 + 1.0);
    let hy = 1.0 / (ny as f64 + 1.0);
    let (dx, dy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let (cx, cy) = (peclet / hx, peclet / hy);
    // upwinding: backward differences for positive velocity, forward for negative
    let (west, east) = if peclet >= 0.0 { (-dx - cx, -dx) } else { (-dx, -dx + cx) };
    let (south, north) = if peclet >= 0.0 { (-dy - cy, -dy) } else { (-dy, -dy + cy) };
    let center = 2.0 * dx + 2.0 * dy + cx.abs() + cy.abs();

    let n = nx * ny;
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..ny {
        for i in 0..nx {
            let row = j * nx + i;
            if j > 0 {
                t.push((row, row - nx, south));
            }
            if i > 0 {
                t.push((row, row - 1, west));
            }
            t.push((row, row, center));
            if i + 1 < nx {
                t.push((row, row + 1, east));
            }
            if j + 1 < ny {
                t.push((row, row + nx, north));
            }
        }
    }
    CsrMatrix::from_triplets(n, t).expect("stencil indices are in range")
}
