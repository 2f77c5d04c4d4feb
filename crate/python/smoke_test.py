"""Smoke test for the nanofiber_trap Python extension.

Build and install first:
    pip install --no-build-isolation -e crates/py
then run:
    python python/smoke_test.py
"""

import math
import sys

import nanofiber_trap as nt


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []

    mode = nt.solve_mode(250.0, 852.35)
    results.append(check("probe mode guided", 1.0 < mode["n_eff"] < mode["n_core"], f"n_eff={mode['n_eff']:.6f}"))

    area = nt.effective_area_um2(250.0, 852.35, 230.0)
    results.append(check("probe mode area", 1.0 < area < 10.0, f"A_eff={area:.3f} um^2"))

    trap = nt.characterize()
    nu_r, nu_z, nu_phi = trap["frequencies_khz"]
    results.append(check("trap minimum", 190.0 < trap["distance_to_surface_nm"] < 270.0,
                         f"d={trap['distance_to_surface_nm']:.1f} nm"))
    results.append(check("frequency ordering", nu_z > nu_r > nu_phi, f"({nu_r:.1f}, {nu_z:.1f}, {nu_phi:.1f}) kHz"))

    try:
        nt.characterize(blue_power_mw=0.0)
        results.append(check("surface crash raises", False))
    except RuntimeError as e:
        results.append(check("surface crash raises", "fiber surface" in str(e)))

    try:
        nt.solve_mode(0.0, 852.0)
        results.append(check("bad radius raises", False))
    except ValueError:
        results.append(check("bad radius raises", True))

    det = [-57.0 + i for i in range(141)]
    t = nt.transmission(det, 13.0, 13.0, 20.0)
    fit = nt.fit_spectrum(det, t)
    results.append(check("spectrum round trip", abs(fit["od"][0] - 13.0) < 1e-6, f"OD={fit['od'][0]:.6f}"))

    fwhm, eta = nt.broadening([1 / 3, 1 / 3, 1 / 3], [5.5, 13.0, 20.5], 5.2)
    results.append(check("broadening pattern", abs(fwhm - 20.0) < 1.0 and 2.0 <= eta <= 3.0,
                         f"FWHM={fwhm:.2f} MHz eta={eta:.3f}"))

    p_cs = nt.power_per_atom()
    results.append(check("power per atom", abs(p_cs * 1e12 - 3.8) < 0.19, f"{p_cs * 1e12:.3f} pW"))

    p_in = [10 ** (-11 + 5 * i / 30) for i in range(31)]
    p_abs = nt.absorbed_power(p_in, 2000.0, 3.6)
    sat = nt.fit_saturation(p_in, p_abs, 3.6)
    results.append(check("saturation round trip", math.isclose(sat["atom_number"][0], 2000.0, rel_tol=1e-4),
                         f"N={sat['atom_number'][0]:.2f}"))

    failed = results.count(False)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
