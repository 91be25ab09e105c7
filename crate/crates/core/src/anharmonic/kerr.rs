//! Fourth-order Kerr parameters of the x zigzag mode.
//!
//! Only terms that keep the zigzag occupation and are resonant in the
//! interaction picture survive: the self-interaction `(Ω_SI/2) a†²a²` and
//! cross-Kerr couplings `Ω_d a†a b†b` to every other non-COM mode. Normal
//! ordering the quartic terms also shifts the bare frequencies.

use super::{regime, KerrParams, ModeId, ModeTensors};
use crate::crystal::Crystal;
use crate::error::Result;

pub fn effective_kerr(crystal: &Crystal, tensors: &ModeTensors) -> Result<KerrParams> {
    let (eta, zz) = regime(crystal)?;
    let modes = &crystal.modes;
    let wz = crystal.trap.omega_z;
    let pre = eta * eta * wz;
    let d4 = &tensors.d4;
    let gzz = modes.gamma_x[zz];

    let omega_si = 36.0 * pre * d4[[zz, zz, zz, zz]] / gzz;
    let mut params = KerrParams { omega_si, ..KerrParams::default() };
    for n in 1..modes.n_modes() {
        if n != zz {
            let v = 72.0 * pre * d4[[n, n, zz, zz]] / (modes.gamma_x[n] * gzz).sqrt();
            params.omega_d.insert(ModeId::x(n), v);
        }
        let vy = 24.0 * pre * d4[[zz, zz, n, n]] / (gzz * modes.gamma_y[n]).sqrt();
        params.omega_d.insert(ModeId::y(n), vy);
        let vz = -96.0 * pre * d4[[zz, zz, n, n]] / (gzz * modes.lambda_z[n]).sqrt();
        params.omega_d.insert(ModeId::z(n), vz);
    }
    params.delta_omega = params.omega_d.iter().map(|(k, v)| (*k, v / 2.0)).collect();
    params.delta_omega_zz = omega_si + 0.5 * params.omega_d.values().sum::<f64>();
    Ok(params)
}
