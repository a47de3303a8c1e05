//! 3×3 Sobel gradients with edge replication, shared by the watershed energy
//! map and the gradient loss. The adjoint operators back the analytic loss
//! gradients.

use crate::grid::Grid;

const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// Horizontal-derivative Sobel response (correlation with Kx).
pub fn sobel_x(map: &Grid<f64>) -> Grid<f64> {
    apply(map, |i, j| KX[i][j])
}

/// Vertical-derivative Sobel response (correlation with Kxᵀ).
pub fn sobel_y(map: &Grid<f64>) -> Grid<f64> {
    apply(map, |i, j| KX[j][i])
}

/// Both Sobel responses of one map.
pub fn sobel_gradients(map: &Grid<f64>) -> (Grid<f64>, Grid<f64>) {
    (sobel_x(map), sobel_y(map))
}

fn apply(map: &Grid<f64>, kernel: impl Fn(usize, usize) -> f64) -> Grid<f64> {
    let (h, w) = map.shape();
    Grid::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let k = kernel(i, j);
                if k != 0.0 {
                    acc += k * map
                        .get_clamped(r as isize + i as isize - 1, c as isize + j as isize - 1);
                }
            }
        }
        acc
    })
}

/// Adjoint of `sobel_x` under the standard inner product: scatters each
/// output residual back through the replicated-border taps.
pub fn sobel_x_adjoint(residual: &Grid<f64>) -> Grid<f64> {
    adjoint(residual, |i, j| KX[i][j])
}

/// Adjoint of `sobel_y`.
pub fn sobel_y_adjoint(residual: &Grid<f64>) -> Grid<f64> {
    adjoint(residual, |i, j| KX[j][i])
}

fn adjoint(residual: &Grid<f64>, kernel: impl Fn(usize, usize) -> f64) -> Grid<f64> {
    let (h, w) = residual.shape();
    let mut out = Grid::filled(h, w, 0.0f64);
    for r in 0..h {
        for c in 0..w {
            let v = residual.get(r, c);
            if v == 0.0 {
                continue;
            }
            for i in 0..3 {
                for j in 0..3 {
                    let k = kernel(i, j);
                    if k != 0.0 {
                        let rr = (r as isize + i as isize - 1).clamp(0, h as isize - 1) as usize;
                        let cc = (c as isize + j as isize - 1).clamp(0, w as isize - 1) as usize;
                        out[(rr, cc)] += k * v;
                    }
                }
            }
        }
    }
    out
}
