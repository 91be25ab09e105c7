"""Smoke test for the pyion2d bindings.

Build and install first:  pip install --no-build-isolation crates/python
"""

import json
import math
import tempfile

import pyion2d


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    c = pyion2d.Crystal(3, 3.1012e6, 5e6, 2e6)
    check(len(c.positions_m) == 3 and abs(sum(c.positions_m)) < 1e-12, "three-ion chain is centred")
    check(abs(c.zigzag_frequency_hz - 131.95e3) < 200, f"zigzag frequency {c.zigzag_frequency_hz / 1e3:.2f} kHz")
    z, x, y = c.mode_frequencies_hz()
    check(abs(z[0] - 2e6) < 1e-3, "axial COM mode at the trap frequency")
    table = {row[0]: row[1:] for row in c.parameter_table()}
    check(abs(2 * table["omega_si_half"][2] - 5.12) < 0.06, f"Omega_SI = {2 * table['omega_si_half'][2]:.3f} kHz")

    manifolds = pyion2d.resonant_manifolds(1.0, 4)
    k2 = dict(manifolds)[2]
    check(all(abs(abs(e) - math.sqrt(2)) < 1e-12 for e in k2), "K=2 manifold at +-sqrt(2) Omega_T")

    cfg = {"scenario": "kerr", "t_max": 0.5e-3}
    grid = pyion2d.simulate(json.dumps(cfg))
    check(grid.shape == (20, 20), f"kerr grid shape {grid.shape}")
    values = grid.values()
    check(isinstance(values[0][0], complex), "signal values are complex")
    spec = grid.spectrum(window="cosine", zero_pad=2)
    peaks = spec.find_peaks(0.2)
    check(len(peaks) > 0 and peaks[0][3] in ("diagonal", "cross"), f"{len(peaks)} peaks above 20%")
    check(abs(spec.bin_width_hz - 1.0 / (40 * grid.dt)) < 1e-6, "bin width 1/(n dt)")

    loss = pyion2d.contrast_loss([1, -1, -1], 2.5e-3, 2.5e-3, pyion2d.reference_diffusion())
    check(abs(100 * loss - 0.99) < 0.01, f"phase-noise loss {100 * loss:.3f}%")
    model = pyion2d.WienerPhaseModel(pyion2d.reference_diffusion(), seed=3)
    att, err = model.attenuation([1, -1, -1], 2.5e-3, 2.5e-3, 20000)
    check(abs((1 - att) - loss) < 5 * err + 1e-3, f"Monte Carlo attenuation {att:.4f} +- {err:.4f}")

    with tempfile.TemporaryDirectory() as d:
        manifest = json.loads(pyion2d.run_scenario(json.dumps({"scenario": "tables", "out_dir": d})))
        check(manifest["status"] == "ok" and len(manifest["outputs"]) == 3, "tables scenario writes its artifacts")

    try:
        pyion2d.simulate(json.dumps({"scenario": "kerr", "dims": [3]}))
    except ValueError as e:
        check("config" in str(e), "invalid config raises ValueError")
    else:
        raise SystemExit("FAIL: invalid config accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
