"""Generate the Tracy-Widom Fredholm-determinant oracle table.

Independent route used only to pin the Painleve implementation: F2 from
the Airy-kernel determinant, F1 from the 1/2 Ai((x+y)/2) kernel, both by
Gauss-Legendre Nystrom discretization of det(I - K) on [s, s+12] with 80
nodes, Airy functions from scipy.special.  Emits tests/data/tw_oracle.json
with CDF values at a few spectral points plus mean/variance of both laws
computed from a dense determinant grid by tail quadrature.

Run from the repository root:  python3 scripts/gen_tw_oracle.py
"""

import json
import pathlib

import numpy as np
from scipy.special import airy

# the GOE kernel decays like Ai(x), not Ai(x)^2, so the domain must reach
# far enough right that int_hi^inf Ai is negligible: hi = 12 gives ~4e-14
WINDOW = 16.0
UPPER_MIN = 12.0
NODES = 160


def _gl_nodes(s: float):
    hi = max(s + WINDOW, UPPER_MIN)
    x, w = np.polynomial.legendre.leggauss(NODES)
    half = 0.5 * (hi - s)
    return s + half * (x + 1.0), half * w


def airy_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    ax, apx = airy(x)[0], airy(x)[1]
    ay, apy = airy(y)[0], airy(y)[1]
    num = ax[:, None] * apy[None, :] - apx[:, None] * ay[None, :]
    den = x[:, None] - y[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = num / den
    diag = apx * apx - x * ax * ax
    k[np.diag_indices_from(k)] = diag
    return k


def goe_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 0.5 * airy(0.5 * (x[:, None] + y[None, :]))[0]


def fredholm_cdf(s: float, kernel) -> float:
    x, w = _gl_nodes(s)
    sw = np.sqrt(w)
    k = kernel(x, x) * sw[:, None] * sw[None, :]
    return float(np.linalg.det(np.eye(len(x)) - k))


def f2(s: float) -> float:
    return fredholm_cdf(s, airy_kernel)


def f1(s: float) -> float:
    return fredholm_cdf(s, goe_kernel)


def moments(cdf, lo=-12.0, hi=8.0, n=4001):
    s = np.linspace(lo, hi, n)
    f = np.array([cdf(v) for v in s])
    pos = s >= 0.0
    neg = s <= 0.0
    mean = np.trapezoid(1.0 - f[pos], s[pos]) - np.trapezoid(f[neg], s[neg])
    # E X^2 = 2 int_0^inf s(1-F) ds - 2 int_-inf^0 s F ds
    second = 2.0 * np.trapezoid(s[pos] * (1.0 - f[pos]), s[pos]) \
        - 2.0 * np.trapezoid(s[neg] * f[neg], s[neg])
    return mean, second - mean * mean


def main():
    points = [-4.0, -2.0, 0.0, 2.0]
    out = {
        "window": WINDOW,
        "nodes": NODES,
        "points": points,
        "F1": {str(s): f1(s) for s in points},
        "F2": {str(s): f2(s) for s in points},
    }
    m1, v1 = moments(f1)
    m2, v2 = moments(f2)
    out["TW1"] = {"mean": m1, "var": v1}
    out["TW2"] = {"mean": m2, "var": v2}
    dest = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "tw_oracle.json"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {dest}")
    print(f"TW1 mean {m1:.10f} var {v1:.10f}")
    print(f"TW2 mean {m2:.10f} var {v2:.10f}")
    for s in points:
        print(f"s={s:+.1f}  F1={out['F1'][str(s)]:.10f}  F2={out['F2'][str(s)]:.10f}")


if __name__ == "__main__":
    main()
