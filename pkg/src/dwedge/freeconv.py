"""Deformed semicircle law via its self-consistent Stieltjes equation.

The central object is the fixed point

    m(z) = integral dnu(v) / (lam*gamma*v - z - gamma^2 m(z)),   Im m >= 0,

whose gamma = 1 case is the free convolution of lam-scaled nu with the
semicircle law, and whose gamma < 1 case is the edge-rescaled variant used
along the matrix flow.  Densities come from Stieltjes inversion, support
endpoints from the defining equation of the rightmost edge:

    integral dnu(v) / (lam v - theta)^2 = 1,   theta > lam v_max,
    E_plus = theta - integral dnu(v) / (lam v - theta).

Iteration scheme: damped fixed point (alpha = 0.5, fallback 0.1 on
stagnation, restart from i when an iterate leaves the closed upper half
plane) with a guarded local-quadratic polish step.  Near the spectral edge
the map's derivative approaches 1 like a square root and plain damping
needs O(1/sqrt(kappa + eta)) iterations; the quadratic model captures the
branch point and cuts this to a handful of steps once the iterate is close.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import measure as ms


class IterationError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance."""

    def __init__(self, msg: str, residual: float, index: int | None = None):
        super().__init__(msg)
        self.residual = residual
        self.index = index


class AssumptionViolatedError(ValueError):
    """The (nu, lam) pair admits no regular square-root edge."""


class InsufficientPointsError(ValueError):
    """Grid too coarse near the edge for a power-law fit."""


@dataclass(frozen=True)
class FreeConvolutionSolution:
    """Solved law on an energy grid at a fixed spectral height eta."""

    nu: ms.Measure
    lam: float
    gamma: float
    grid: np.ndarray
    m: np.ndarray
    eta: float
    support: tuple[float, float]
    density: np.ndarray


def _maps(nu, lam, gamma, z, m, order=2):
    """F(m), F'(m) and optionally F''(m) for the fixed-point map."""
    g2 = gamma * gamma
    s = lam * gamma
    if s < 1e-50:
        # coupling this small is indistinguishable from zero at tolerance
        d = -(z + g2 * m)
        f = 1.0 / d
        fp = g2 / (d * d)
        fpp = 2.0 * g2 * g2 / (d * d * d) if order > 1 else None
        return f, fp, fpp
    # multiply by 1/s one factor at a time: s^2, s^3 can underflow even
    # when the mathematical results are well scaled
    inv = 1.0 / s
    w = (z + g2 * m) * inv
    f = ms.stieltjes_power_array(nu, w, 1) * inv
    fp = g2 * (ms.stieltjes_power_array(nu, w, 2) * inv) * inv
    fpp = None
    if order > 1:
        fpp = 2.0 * g2 * g2 * ((ms.stieltjes_power_array(nu, w, 3) * inv) * inv) * inv
    return f, fp, fpp


def _quad_step(m, f, fp, fpp):
    """Root of the local quadratic model of g(m) = m - F(m) nearest to m.

    Solves g + g'*d + g''*d^2/2 = 0 via the Muller form d = -2g/(g' +- sqrt),
    which stays stable when g'' is tiny (reduces to a Newton step).
    """
    g = m - f
    gp = 1.0 - fp
    gpp = -fpp
    disc = np.sqrt(gp * gp - 2.0 * g * gpp)
    den = np.where(np.abs(gp + disc) >= np.abs(gp - disc), gp + disc, gp - disc)
    bad = np.abs(den) < 1e-300
    den = np.where(bad, 1.0, den)
    d = np.where(bad, 0.0, -2.0 * g / den)
    return m + d, np.abs(d)


def _solve_many(nu, lam, gamma, z, tol, max_iter, m0=None):
    """Vectorized fixed-point solve; returns m with |m - F(m)| < tol."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    m = np.full(z.shape, 1j, dtype=complex) if m0 is None else \
        np.broadcast_to(np.asarray(m0, dtype=complex), z.shape).copy()
    out = np.empty_like(m)
    idx = np.arange(z.size)
    zi, mi = z.ravel().copy(), m.ravel().copy()
    alpha = np.full(zi.shape, 0.5)
    ban = np.zeros(zi.shape, dtype=int)      # iterations until polish re-enabled
    r_prev = np.full(zi.shape, np.inf)
    accel_prev = np.zeros(zi.shape, dtype=bool)
    m_prev, f_prev = mi.copy(), mi.copy()
    r_mark = np.full(zi.shape, np.inf)

    for it in range(max_iter):
        f, fp, fpp = _maps(nu, lam, gamma, zi, mi)
        r = np.abs(mi - f)

        # a polish step that increased the residual gets rolled back to a
        # damped step from the saved previous iterate
        undo = accel_prev & (r > r_prev)
        if undo.any():
            mi[undo] = (1.0 - alpha[undo]) * m_prev[undo] + alpha[undo] * f_prev[undo]
            ban[undo] = 50
            f2, fp2, fpp2 = _maps(nu, lam, gamma, zi[undo], mi[undo])
            f[undo], fp[undo], fpp[undo] = f2, fp2, fpp2
            r[undo] = np.abs(mi[undo] - f2)

        done = r < tol
        if done.any():
            out.ravel()[idx[done]] = mi[done]
            keep = ~done
            idx, zi, mi, alpha, ban = idx[keep], zi[keep], mi[keep], alpha[keep], ban[keep]
            r, f, fp, fpp = r[keep], f[keep], fp[keep], fpp[keep]
            r_prev, r_mark = r_prev[keep], r_mark[keep]
            m_prev, f_prev = m_prev[keep], f_prev[keep]
            accel_prev = accel_prev[keep]
            if idx.size == 0:
                return out, it + 1
        if it % 64 == 63:
            stale = r > 0.9 * r_mark
            alpha[stale] = 0.1
            r_mark = r.copy()

        m_prev, f_prev, r_prev = mi.copy(), f.copy(), r.copy()
        damped = (1.0 - alpha) * mi + alpha * f
        use_acc = (it >= 20) & (r < 0.1) & (ban <= 0)
        ban -= 1
        if use_acc.any():
            acc, step = _quad_step(mi, f, fp, fpp)
            good = use_acc & (step < 1.0) & (acc.imag >= -1e-14) & np.isfinite(acc)
            mi = np.where(good, acc, damped)
            accel_prev = good
        else:
            mi = damped
            accel_prev = np.zeros(zi.shape, dtype=bool)
        # branch guard: restart from i whenever the iterate dips below the axis
        lost = mi.imag < -1e-14
        if lost.any():
            mi[lost] = 1j
            alpha[lost] = 0.1
            accel_prev[lost] = False

    worst = int(np.argmax(r))
    raise IterationError(
        f"no convergence after {max_iter} iterations (residual {r[worst]:.3e})",
        residual=float(r[worst]), index=int(idx[worst]))


def solve_point(nu: ms.Measure, lam: float, gamma: float, z,
                tol: float = 1e-12, max_iter: int = 10_000) -> complex:
    """Solve the self-consistent equation at one spectral point."""
    zc = ms.as_upper_half(z)
    out, _ = _solve_many(nu, lam, gamma, np.array([zc]), tol, max_iter)
    return complex(out[0])


def _outer_roots(nu: ms.Measure, lam: float) -> tuple[float, float, float, float]:
    """(theta_minus, theta_plus, E_minus, E_plus) for the gamma = 1 law."""

    if lam < 1e-50:
        return -1.0, 1.0, -2.0, 2.0

    def phi(theta):
        # integral dnu / (lam v - theta)^2, real theta outside lam * support
        return ms.deformed_power(nu, lam, theta, 2)

    vmin, vmax = ms.support_interval(nu)
    out = []
    for side in (+1, -1):
        edge = lam * (vmax if side > 0 else vmin) if lam > 0 else 0.0
        lo = edge + side * 1e-12
        hi = edge + side * (10.0 + 10.0 * lam)
        if not phi(lo) > 1.0:
            raise AssumptionViolatedError(
                f"no edge root above {edge:.6g}: the deformation is too strong "
                "for a square-root edge on this side")
        # phi decreases monotonically away from the support; bisect phi = 1
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if phi(mid) >= 1.0:
                lo = mid
            else:
                hi = mid
            if abs(hi - lo) < 1e-15 * max(1.0, abs(hi)):
                break
        theta = 0.5 * (lo + hi)
        mval = ms.deformed_power(nu, lam, theta, 1)
        out.append((theta, theta - mval))
    (th_p, e_p), (th_m, e_m) = out
    return th_m, th_p, e_m, e_p


def assumption_margin(nu: ms.Measure, lam: float) -> float:
    """min over the support hull of integral dnu/(v-x)^2 minus lam^2.

    Nonnegative margin is the regularity assumption behind a square-root
    edge; checked on a 10^4-point grid (atoms give +inf at their own
    locations, which never attains the min)."""
    vmin, vmax = ms.support_interval(nu)
    if vmax - vmin < 1e-30:
        return np.inf
    xs = np.linspace(vmin, vmax, 10_000)
    xq, wq = ms._quad_nodes(nu)
    with np.errstate(divide="ignore"):
        vals = np.sum(wq / (xq[None, :] - xs[:, None]) ** 2, axis=1)
    return float(np.min(vals) - lam * lam)


def support_endpoints(nu: ms.Measure, lam: float) -> tuple[float, float]:
    """(E_minus, E_plus) for the gamma = 1 deformed law."""
    if lam < 0:
        raise ValueError("need lam >= 0")
    if lam > 0 and assumption_margin(nu, lam) < 0:
        raise AssumptionViolatedError(
            "min over the support hull of integral dnu/(v-x)^2 is below lam^2")
    _, _, e_m, e_p = _outer_roots(nu, lam)
    return e_m, e_p


def solve_grid(nu: ms.Measure, lam: float, gamma: float, lo: float, hi: float,
               n: int, eta: float, tol: float = 1e-12,
               max_iter: int = 10_000) -> FreeConvolutionSolution:
    """Solve along linspace(lo, hi, n) + i*eta with block warm starts."""
    if not (lo < hi and n >= 2 and eta > 0):
        raise ValueError("need lo < hi, n >= 2, eta > 0")
    grid = np.linspace(lo, hi, n)
    m = np.empty(n, dtype=complex)
    block = 256
    warm = None
    for start in range(0, n, block):
        sl = slice(start, min(start + block, n))
        try:
            m[sl], _ = _solve_many(nu, lam, gamma, grid[sl] + 1j * eta,
                                   tol, max_iter, m0=warm)
        except IterationError as e:
            raise IterationError(str(e), e.residual,
                                 index=start + (e.index or 0)) from e
        warm = m[sl][-1]
    th_m, th_p, e_m, e_p = _outer_roots(nu, lam)
    return FreeConvolutionSolution(
        nu=nu, lam=lam, gamma=gamma, grid=grid, m=m, eta=eta,
        support=(gamma * e_m, gamma * e_p), density=m.imag / np.pi)


def density_at(nu: ms.Measure, lam: float, gamma: float, E: float,
               tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Density by Richardson extrapolation of Im m over eta in {1e-5, 5e-6}.

    Im m(E + i eta) = pi rho(E) + O(eta^2) inside the support and O(eta)
    outside; the two-point combination cancels the leading error both ways.
    """
    m1 = solve_point(nu, lam, gamma, complex(E, 1e-5), tol, max_iter)
    m2 = solve_point(nu, lam, gamma, complex(E, 5e-6), tol, max_iter)
    return (2.0 * m2.imag - m1.imag) / np.pi


def asymptotic_eplus(nu: ms.Measure, lam0: float) -> float:
    """Small-coupling expansion of the upper edge through fourth order."""
    if lam0 < 0:
        raise ValueError("need lam0 >= 0")
    m1 = ms.mean(nu)
    c2 = ms.central_moment(nu, 2)
    c3 = ms.central_moment(nu, 3)
    c4 = ms.central_moment(nu, 4)
    return 2.0 + lam0 * m1 + lam0**2 * c2 + lam0**3 * c3 \
        + lam0**4 * (c4 - 9.0 * c2 * c2 / 4.0)


def edge_exponent_fit(sol: FreeConvolutionSolution,
                      lo: float = 1e-4, hi: float = 1e-2) -> tuple[float, float]:
    """(amplitude, exponent) of density ~ amplitude * kappa^exponent at the
    upper edge, fit by least squares in log-log over kappa in [lo, hi]."""
    e_plus = sol.support[1]
    near = np.abs(sol.grid - e_plus) < 0.05
    if np.count_nonzero(near) < 20:
        raise InsufficientPointsError(
            f"only {np.count_nonzero(near)} grid points within 0.05 of the edge")
    kappa = e_plus - sol.grid
    pick = (kappa >= lo) & (kappa <= hi) & (sol.density > 0)
    if np.count_nonzero(pick) < 5:
        raise InsufficientPointsError("fewer than 5 usable points in the fit window")
    x = np.log(kappa[pick])
    y = np.log(sol.density[pick])
    slope, intercept = np.polyfit(x, y, 1)
    return float(np.exp(intercept)), float(slope)


def solution_to_json(sol: FreeConvolutionSolution) -> dict:
    return {
        "measure": ms.to_json(sol.nu),
        "lam": sol.lam,
        "gamma": sol.gamma,
        "eta": sol.eta,
        "support": [sol.support[0], sol.support[1]],
        "grid": sol.grid.tolist(),
        "m_re": sol.m.real.tolist(),
        "m_im": sol.m.imag.tolist(),
        "density": sol.density.tolist(),
    }


def solution_from_json(obj: dict) -> FreeConvolutionSolution:
    return FreeConvolutionSolution(
        nu=ms.from_json(obj["measure"]), lam=float(obj["lam"]),
        gamma=float(obj["gamma"]),
        grid=np.asarray(obj["grid"], dtype=float),
        m=np.asarray(obj["m_re"], dtype=float) + 1j * np.asarray(obj["m_im"], dtype=float),
        eta=float(obj["eta"]),
        support=(float(obj["support"][0]), float(obj["support"][1])),
        density=np.asarray(obj["density"], dtype=float))


def solution_to_csv(sol: FreeConvolutionSolution) -> str:
    lines = ["E,re_m,im_m,density"]
    for e, mv, d in zip(sol.grid, sol.m, sol.density):
        lines.append(f"{float(e)!r},{float(mv.real)!r},{float(mv.imag)!r},{float(d)!r}")
    return "\n".join(lines) + "\n"


def dump_solution(sol: FreeConvolutionSolution, path: str) -> None:
    if path.endswith(".csv"):
        with open(path, "w") as fh:
            fh.write(solution_to_csv(sol))
    else:
        with open(path, "w") as fh:
            json.dump(solution_to_json(sol), fh)
