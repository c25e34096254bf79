use crate::error::{CoreError, Result};
use crate::riskmap::NormalField;

/// Pitch and roll `ω = (ψ, φ)` of the surface under the robot, with the
/// 2×3 gradient with respect to `(px, py, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub omega: [f64; 2],
    pub grad: [[f64; 3]; 2],
}

/// Rotates the world surface normal into the yaw frame and reads off pitch
/// and roll. Errors if the normal is unknown near `(px, py)`.
pub fn orientation_and_gradient(s: [f64; 3], normals: &NormalField) -> Result<Orientation> {
    let [px, py, th] = s;
    let sample = normals.sample(px, py).ok_or(CoreError::OffMap { x: px, y: py })?;
    let nw = sample.n;
    let (sn, cs) = th.sin_cos();
    let r = [[cs, sn, 0.0], [-sn, cs, 0.0], [0.0, 0.0, 1.0]];
    let dr = [[-sn, cs, 0.0], [-cs, -sn, 0.0], [0.0, 0.0, 0.0]];
    let mul = |m: &[[f64; 3]; 3], v: &[f64; 3]| -> [f64; 3] {
        [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    };
    let nr = mul(&r, &nw);
    let (nx, ny, nz) = (nr[0], nr[1], nr[2]);
    let omega = [nx.atan2(nz), -ny.atan2(nz)];

    let dxz = nx * nx + nz * nz;
    let dyz = ny * ny + nz * nz;
    let dg = [[nz / dxz, 0.0, -nx / dxz], [0.0, -nz / dyz, ny / dyz]];

    let mut grad = [[0.0; 3]; 2];
    for j in 0..2 {
        let dnw = [sample.dn[0][j], sample.dn[1][j], sample.dn[2][j]];
        let dnr = mul(&r, &dnw);
        for i in 0..2 {
            grad[i][j] = dg[i][0] * dnr[0] + dg[i][1] * dnr[1] + dg[i][2] * dnr[2];
        }
    }
    let dnr = mul(&dr, &nw);
    for i in 0..2 {
        grad[i][2] = dg[i][0] * dnr[0] + dg[i][1] * dnr[1] + dg[i][2] * dnr[2];
    }
    Ok(Orientation { omega, grad })
}
