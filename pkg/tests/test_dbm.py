"""Matrix flow: exact transition, stationarity, and cross-module marginals.

The transition is exact, so the tests lean on distributional identities
rather than step-size sweeps: entry variances must be constant along the
flow, the zero-diagonal GOE must be a fixed point in law, and the
fixed-time marginal must agree with the direct three-component draw of
ensemble.sample_interpolated.  KS thresholds sit well inside the bands
measured for these exact streams.
"""

import math

import numpy as np
import pytest

import dwedge.dbm as dbm
import dwedge.ensemble as ens
import dwedge.measure as ms
from dwedge.rngstream import stream

TWO = ms.Atomic(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))


def two_atom_spec(n, lam0=0.5):
    return ens.EnsembleSpec(N=n, lam0=lam0, potential=ens.IIDFrom(TWO),
                            law=ens.GAUSSIAN, c2=0.0, zero_diagonal=True)


def wigner_state(n, seed, label):
    h = ens.sample_wigner(n, ens.GAUSSIAN, 0.0, stream(seed, label))
    return dbm.FlowState(0.0, h, two_atom_spec(n), stream(seed, label + "n"))


# ------------------------------------------------------------- evolve


def test_tiny_step_is_identity():
    state = wigner_state(100, 11, "tiny")
    before = state.h.copy()
    after = dbm.evolve(state, 1e-12)
    assert after.t == pytest.approx(1e-12)
    assert np.abs(after.h - before).max() < 1e-6


def test_evolve_rejects_nonpositive_dt():
    state = wigner_state(10, 12, "baddt")
    with pytest.raises(ValueError):
        dbm.evolve(state, 0.0)
    with pytest.raises(ValueError):
        dbm.evolve(state, -1.0)


def test_stationary_law_from_zero():
    state = dbm.FlowState(0.0, np.zeros((500, 500)), two_atom_spec(500),
                          stream(26, "statn"))
    out = dbm.evolve(state, 50.0)
    off = ~np.eye(500, dtype=bool)
    assert abs(500 * np.mean(out.h[off] ** 2) - 1.0) < 0.02
    # no Brownian term on the diagonal, ever
    assert np.all(np.diag(out.h) == 0.0)


def test_variance_preserved_along_flow():
    h = ens.sample_wigner(500, ens.GAUSSIAN, 0.0, stream(25, "varp"))
    state = dbm.FlowState(0.0, h, two_atom_spec(500), stream(25, "varpn"))
    off = ~np.eye(500, dtype=bool)
    for t in (0.5, 1.0, 4.0):
        state = dbm.evolve(state, t - state.t)
        assert abs(500 * np.mean(state.h[off] ** 2) - 1.0) < 0.01


def test_symmetry_and_zero_diagonal_bitlevel():
    state = wigner_state(80, 13, "bits")
    for _ in range(3):
        state = dbm.evolve(state, 0.7)
        assert np.array_equal(state.h, state.h.T)
        assert np.all(np.diag(state.h) == 0.0)


def test_semigroup_variance_bookkeeping():
    # e^{-b}(1-e^{-a}) + (1-e^{-b}) = 1-e^{-(a+b)}: the two-step noise
    # variance reproduces the one-step one, which is what makes the
    # single-jump transition exact
    for a, b in ((0.3, 0.7), (1e-3, 2.0), (5.0, 5.0)):
        two_step = math.exp(-b) * -math.expm1(-a) - math.expm1(-b)
        assert two_step == pytest.approx(-math.expm1(-(a + b)), rel=1e-14)
    state = dbm.FlowState(0.0, np.zeros((400, 400)), two_atom_spec(400),
                          stream(27, "semig"))
    out = dbm.evolve(dbm.evolve(state, 0.4), 1.1)
    off = ~np.eye(400, dtype=bool)
    assert 400 * np.mean(out.h[off] ** 2) == pytest.approx(-math.expm1(-1.5),
                                                           rel=0.03)


def test_start_diagonal_carries_the_coupling():
    spec = two_atom_spec(60)
    state, v = dbm.start(spec, stream(14, "start"))
    assert state.t == 0.0
    assert np.allclose(np.diag(state.h), 0.5 * v)
    out = dbm.evolve(state, 2.0)
    # diagonal decays deterministically with the coupling
    assert np.allclose(np.diag(out.h), math.exp(-1.0) * 0.5 * v)


# ---------------------------------------------------------- edge track


def test_edge_track_zero_coupling_is_stationary_window():
    spec = two_atom_spec(100, lam0=0.0)
    series = dbm.flow_edge_track(spec, [0.0, 1.0, 2.0], 0.0, stream(15, "track0"))
    assert [t for t, _ in series] == [0.0, 1.0, 2.0]
    for _, m in series:
        assert m.imag > 0
        assert abs(m) < 10


def test_edge_track_deformed_runs_and_validates():
    spec = two_atom_spec(100)
    series = dbm.flow_edge_track(spec, [0.0, 0.5], 0.0, stream(16, "track1"))
    assert len(series) == 2 and all(m.imag > 0 for _, m in series)
    with pytest.raises(ValueError):
        dbm.flow_edge_track(spec, [1.0, 0.5], 0.0, stream(16, "track2"))
    with pytest.raises(ValueError):
        dbm.flow_edge_track(spec, [], 0.0, stream(16, "track3"))
    with pytest.raises(ValueError):
        dbm.flow_edge_track(spec, [0.0], 1.0, stream(16, "track4"))
    with pytest.raises(ValueError):
        dbm.flow_edge_track(spec, [-1.0, 0.0], 0.0, stream(16, "track5"))


# ------------------------------------------------------- distributions


def test_ks_two_sample_basics():
    assert dbm.ks_two_sample([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert dbm.ks_two_sample([0.0, 0.0], [1.0, 1.0]) == 1.0
    with pytest.raises(ValueError):
        dbm.ks_two_sample([], [1.0])


def test_goe_edge_invariant_at_t0():
    ks = dbm.goe_invariance_check(120, 0.0, 200, stream(21, "goe0"))
    assert ks < 1.36 * math.sqrt(2.0 / 200) + 0.02


def test_goe_edge_invariant_under_flow():
    ks = dbm.goe_invariance_check(150, 1.0, 250, stream(21, "goe1"))
    assert ks < 1.36 * math.sqrt(2.0 / 250) + 0.02


def test_terminal_flow_reaches_goe_edge():
    # deformed start, times {0, 1, 2, 4 log N}: terminal largest
    # eigenvalue is GOE within the two-sample band
    n, ntraj = 300, 300
    spec = two_atom_spec(n)
    rng = stream(21, "goeterm")
    times = [0.0, 1.0, 2.0, 4.0 * math.log(n)]
    term, goe = [], []
    for k in range(ntraj):
        state, _ = dbm.start(spec, rng)
        for a, b in zip(times, times[1:]):
            state = dbm.evolve(state, b - a)
        assert state.t == pytest.approx(4.0 * math.log(n))
        term.append(np.linalg.eigvalsh(state.h)[-1])
        goe.append(np.linalg.eigvalsh(
            ens.sample_wigner(n, ens.GAUSSIAN, 0.0, stream(22, "goeref", k),
                              zero_diagonal=True))[-1])
    assert dbm.ks_two_sample(term, goe) < 0.1


def test_marginal_matches_interpolated_draw():
    n, nsamp, t = 150, 300, 1.0
    spec = two_atom_spec(n)
    rng = stream(23, "marg")
    flowed = []
    for _ in range(nsamp):
        state, _ = dbm.start(spec, rng)
        flowed.append(np.linalg.eigvalsh(dbm.evolve(state, t).h)[-1])
    direct = [np.linalg.eigvalsh(ens.sample_interpolated(spec, t, stream(24, "margref", k)))[-1]
              for k in range(nsamp)]
    assert dbm.ks_two_sample(flowed, direct) < 0.1
