"""Ornstein-Uhlenbeck matrix flow toward the zero-diagonal GOE.

The flow dh_ij = dB_ij/sqrt(N) - h_ij dt/2 (no Brownian term on the
diagonal) is linear, so the transition over any time step is sampled
exactly:

    h_ij <- e^{-dt/2} h_ij + sqrt((1 - e^{-dt})/N) xi_ij,   xi_ji = xi_ij,
    h_ii <- e^{-dt/2} h_ii,

with iid standard normal xi.  There is no step-size parameter and no
discretization error; long flows are single jumps.  Entry variances are
constant in time when started from Wigner variances, and the fixed-time
marginal started from the deformed ensemble is the three-component
interpolation that ensemble.sample_interpolated draws directly, which the
tests use as a cross-module oracle.  The canonical terminal time for
"flow to GOE" comparisons is 4 log N, where the initial condition has
decayed to the N^{-2} scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import edgescale as es
from . import ensemble as ens
from . import measure as ms
from . import resolvent as rv

__all__ = [
    "FlowState",
    "start",
    "evolve",
    "flow_edge_track",
    "goe_invariance_check",
    "ks_two_sample",
]

EDGE_EPS = 0.01  # window/eta exponent for edge tracking, as elsewhere


@dataclass
class FlowState:
    """One trajectory of the matrix flow.

    The state owns its rng cursor: evolving mutates the generator, so a
    trajectory must not be shared across workers.  h stays symmetric with
    a noiseless diagonal by construction; evolve asserts neither, it
    preserves them exactly.
    """

    t: float
    h: np.ndarray
    spec: ens.EnsembleSpec
    rng: np.random.Generator


def start(spec: ens.EnsembleSpec, rng: np.random.Generator
          ) -> tuple[FlowState, np.ndarray]:
    """Draw the initial condition; returns the state and the potential."""
    h, v = ens.sample_deformed(spec, rng)
    return FlowState(t=0.0, h=h, spec=spec, rng=rng), v


def evolve(state: FlowState, dt: float) -> FlowState:
    """Exact transition of the flow over dt > 0.

    The noise matrix reuses the Wigner sampler with a zeroed diagonal, so
    the diagonal is damped without noise and bitwise symmetry is free.
    """
    if not dt > 0.0:
        raise ValueError(f"need dt > 0, got {dt}")
    n = state.h.shape[0]
    decay = math.exp(-dt / 2.0)
    fresh = math.sqrt(-math.expm1(-dt))
    xi = ens.sample_wigner(n, ens.GAUSSIAN, 0.0, state.rng, zero_diagonal=True)
    return replace(state, t=state.t + dt, h=decay * state.h + fresh * xi)


def flow_edge_track(spec: ens.EnsembleSpec, times, y: float,
                    rng: np.random.Generator) -> list[tuple[float, complex]]:
    """m(t, z(t)) of the rescaled matrix along one trajectory.

    At each requested time the matrix is gamma(t) H(t) and the spectral
    point is z(t) = L+(t) + y + i eta with eta = N^(-2/3-eps); the
    rescaling constants follow the decayed coupling lam0 e^{-t/2} against
    the empirical potential measure of the realized draw.
    """
    ts = [float(t) for t in times]
    if not ts:
        raise ValueError("need at least one time")
    if ts[0] < 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError(f"times must be nonnegative and strictly increasing, got {ts}")
    ylim = spec.N ** (-2.0 / 3.0 + EDGE_EPS)
    if abs(y) > ylim:
        raise ValueError(f"|y| = {abs(y):.3e} outside the edge window {ylim:.3e}")
    eta = spec.N ** (-2.0 / 3.0 - EDGE_EPS)
    state, v = start(spec, rng)
    nu_hat = ms.empirical_from_values(v)
    out = []
    for t in ts:
        if t > state.t:
            state = evolve(state, t - state.t)
        sc = es.flow_scaling(nu_hat, spec.lam0, t)
        z = sc.l_plus + y + 1j * eta
        out.append((t, rv.green(sc.gamma * state.h, z).m))
    return out


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("need nonempty samples")
    allx = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, allx, side="right") / xa.size
    fb = np.searchsorted(xb, allx, side="right") / xb.size
    return float(np.abs(fa - fb).max())


def goe_invariance_check(n: int, t: float, n_samples: int,
                         rng: np.random.Generator) -> float:
    """KS distance between largest eigenvalues at time 0 and at time t.

    The initial law is the zero-diagonal GOE, the stationary law of the
    flow, so the distance should sit inside the two-sample KS band
    1.36 sqrt(2/n_samples) (plus slack) for every t.  The two batches are
    independent; at t = 0 the check degenerates to two fresh batches of
    the same law.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples per batch")
    if t < 0.0:
        raise ValueError(f"need t >= 0, got {t}")
    spec = ens.EnsembleSpec(N=n, lam0=0.0,
                            potential=ens.Fixed(np.zeros(n)),
                            law=ens.GAUSSIAN, c2=0.0, zero_diagonal=True)
    top0, topt = [], []
    for _ in range(n_samples):
        h0 = ens.sample_wigner(n, ens.GAUSSIAN, 0.0, rng, zero_diagonal=True)
        top0.append(np.linalg.eigvalsh(h0)[-1])
        state = FlowState(t=0.0, h=ens.sample_wigner(n, ens.GAUSSIAN, 0.0, rng,
                                                     zero_diagonal=True),
                          spec=spec, rng=rng)
        if t > 0.0:
            state = evolve(state, t)
        topt.append(np.linalg.eigvalsh(state.h)[-1])
    return ks_two_sample(top0, topt)
