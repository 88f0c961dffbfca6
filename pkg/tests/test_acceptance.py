"""Acceptance checks: one test per criterion, at the stated tolerances.

Each test prints a single `criterion NN [PASS|FAIL]` line (shown under
`pytest -s`, or automatically on failure) with the measured quantities,
then asserts the stated gates, including the runtime budget.  Monte Carlo
criteria run the frozen master seeds calibrated in
scripts/pilot_twstats.py; with the counter-based streams every number
here is reproducible bit for bit.

Known honest failures: criterion 9 requires each regime's samples to be
KS > 0.12 from the alternative laws, but the exact distance between TW1
and its unit-variance Tracy-Widom/Gaussian convolution is only 0.064
(computed from the CDF tables), so samples lying within 0.05 of their
own law can never clear 0.12 from the neighbor law.  The two
TW1-vs-convolution rejection clauses therefore fail and are reported as
such; the four Gaussian rejection clauses pass with an order of
magnitude to spare.
"""

import json
import pathlib
import time

import numpy as np
import pytest

from dwedge import cli
from dwedge import dbm
from dwedge import edgescale as es
from dwedge import ensemble as ens
from dwedge import freeconv as fc
from dwedge import measure as ms
from dwedge import resolvent as rv
from dwedge import rngstream
from dwedge import twstats as tw

TWO = ms.Atomic(locations=(-1.0, 1.0), weights=(0.5, 0.5))
ORACLE = json.loads(
    (pathlib.Path(__file__).parent / "data" / "tw_oracle.json").read_text())


def _line(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {detail}")


def _random_atomic(rng: np.random.Generator) -> ms.Atomic:
    n = int(rng.integers(1, 7))
    locs = np.sort(rng.uniform(-1.0, 1.0, size=n))
    locs += np.arange(n) * 1e-6          # break accidental collisions
    w = rng.uniform(0.2, 1.0, size=n)
    return ms.Atomic(locs, w / w.sum())


def _admissible_instances(seed: int, purpose: str, count: int, lam_hi: float):
    """Deterministic stream of (nu_hat, lam) pairs satisfying the edge
    assumption; rejected draws advance the counter so runs stay stable."""
    out = []
    idx = 0
    while len(out) < count:
        rng = rngstream.stream(seed, purpose, idx)
        idx += 1
        nu = _random_atomic(rng)
        lam = float(rng.uniform(0.02, lam_hi))
        if fc.assumption_margin(nu, lam) <= 0.01:
            continue
        out.append((nu, lam))
    return out


# ---------------------------------------------------------------------------

def test_criterion_01_semicircle_recovery(tmp_path):
    t0 = time.time()
    out = tmp_path / "fc"
    code = cli.main(["fc-solve", "--extrapolate", "--lo", "-1.9", "--hi",
                     "1.9", "--points", "761", "--out", str(out)])
    rows = np.loadtxt(out.with_suffix(".csv"), delimiter=",", skiprows=1)
    grid, dens = rows[:, 0], rows[:, 3]
    sup = float(np.max(np.abs(dens - np.sqrt(4.0 - grid**2) / (2.0 * np.pi))))
    el = time.time() - t0
    ok = code == 0 and sup <= 1e-5 and el < 5.0
    _line(1, ok, f"semicircle sup-norm {sup:.2e} (gate 1e-5), {el:.1f}s")
    assert code == 0
    assert sup <= 1e-5
    assert el < 5.0


def test_criterion_02_eplus_asymptotics():
    t0 = time.time()
    lams = np.array([0.02, 0.05, 0.1, 0.2])
    errs = np.array([abs(fc.support_endpoints(TWO, l)[1]
                         - fc.asymptotic_eplus(TWO, l)) for l in lams])
    slope = float(np.polyfit(np.log(lams), np.log(errs), 1)[0])
    ratio = float(np.max(errs / lams**5))
    el = time.time() - t0
    ok = slope >= 5.0 and ratio < 10.0 and el < 10.0
    _line(2, ok, f"E+ expansion slope {slope:.2f} (gate >= 5), "
                 f"max err/lam^5 {ratio:.3f}, {el:.1f}s")
    assert slope >= 5.0
    assert ratio < 10.0
    assert el < 10.0


def test_criterion_03_edge_square_root():
    t0 = time.time()
    fits = {}
    for lam in (0.0, 0.3, 0.5):
        sc = es.build(TWO, lam)
        sol = fc.solve_grid(TWO, lam, sc.gamma, sc.l_plus - 0.05,
                            sc.l_plus - 1e-5, 700, 1e-7)
        amp, expo = fc.edge_exponent_fit(sol)
        fits[lam] = (amp, expo)
    el = time.time() - t0
    ok = all(abs(e - 0.5) <= 0.02 and abs(a * np.pi - 1.0) <= 0.05
             for a, e in fits.values()) and el < 30.0
    detail = ", ".join(f"lam={l}: expo {e:.4f}, amp*pi {a * np.pi:.4f}"
                       for l, (a, e) in fits.items())
    _line(3, ok, f"{detail}, {el:.1f}s")
    for lam, (amp, expo) in fits.items():
        assert expo == pytest.approx(0.5, abs=0.02), f"lam={lam}"
        assert amp == pytest.approx(1.0 / np.pi, rel=0.05), f"lam={lam}"
    assert el < 30.0


def test_criterion_04_scaling_identities():
    t0 = time.time()
    worst = 0.0
    for nu, lam in _admissible_instances(41, "c4ident", 50, 0.6):
        rec = es.to_json(es.build(nu, lam))["residuals"]
        worst = max(worst, max(rec.values()))
    el = time.time() - t0
    ok = worst <= 1e-10 and el < 5.0
    _line(4, ok, f"scaling identities, worst residual {worst:.2e} "
                 f"(gate 1e-10) over 50 instances, {el:.1f}s")
    assert worst <= 1e-10
    assert el < 5.0


def test_criterion_05_coefficient_cancellation():
    t0 = time.time()
    worst_c = worst_fd = 0.0
    for i, (nu, lam0) in enumerate(_admissible_instances(42, "c5coef", 20, 0.5)):
        t = float(rngstream.stream(42, "c5time", i).uniform(0.1, 3.0))
        c2, c3, c0, c0p = es.coefficients(nu, lam0, t)
        worst_c = max(worst_c, abs(c2), abs(c3), abs(c0p))
        h = 1e-5
        a1dot = (es.flow_scaling(nu, lam0, t + h).A[1]
                 - es.flow_scaling(nu, lam0, t - h).A[1]) / (2 * h)
        worst_fd = max(worst_fd, abs(c0 - a1dot))
    el = time.time() - t0
    ok = worst_c < 1e-5 and worst_fd < 1e-5 and el < 10.0
    _line(5, ok, f"flow coefficients: max |C2|,|C3|,|C0'| {worst_c:.2e}, "
                 f"max |C0 - dA1/dt| {worst_fd:.2e} (gates 1e-5), {el:.1f}s")
    assert worst_c < 1e-5
    assert worst_fd < 1e-5
    assert el < 10.0


def test_criterion_06_resolvent_identities():
    t0 = time.time()
    worst = 0.0
    for s in range(100):
        rng = rngstream.stream(43, "c6ident", s)
        h = ens.sample_wigner(30, ens.GAUSSIAN, 1.0, rng, zero_diagonal=False)
        z = complex(rng.uniform(-2.5, 2.5), rng.uniform(0.02, 1.0))
        i, j, k = (int(x) for x in rng.choice(30, size=3, replace=False))
        worst = max(worst, max(rv.verify_identities(h, z, i, j, k).values()))
    el = time.time() - t0
    ok = worst < 1e-9 and el < 5.0
    _line(6, ok, f"resolvent identities, worst residual {worst:.2e} "
                 f"(gate 1e-9) over 100 instances, {el:.1f}s")
    assert worst < 1e-9
    assert el < 5.0


def test_criterion_07_optical_theorem_decay():
    t0 = time.time()
    sizes = (100, 200, 400)
    medians = []
    for n in sizes:
        eta = n ** (-2.0 / 3.0 - 0.05)
        spec = ens.EnsembleSpec(N=n, lam0=0.05, potential=ens.IIDFrom(TWO),
                                law=ens.GAUSSIAN, c2=0.0, zero_diagonal=True)
        vals = []
        for s in range(200):
            h, v = ens.sample_deformed(spec,
                                       rngstream.stream(909, "optc7",
                                                        n * 100000 + s))
            sc = es.build(ms.empirical_from_values(v), 0.05)
            vals.append(rv.optical_window(h, sc, eta, potential=v))
        x = np.asarray(vals)
        medians.append(abs(np.median(x.real) + 1j * np.median(x.imag)))
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
    el = time.time() - t0
    ok = abs(slope + 1.0 / 3.0) <= 0.15 and el < 600.0
    _line(7, ok, f"optical cancellation slope {slope:.3f} "
                 f"(gate -1/3 +- 0.15), medians "
                 f"{[f'{m:.3g}' for m in medians]}, {el:.0f}s")
    assert slope == pytest.approx(-1.0 / 3.0, abs=0.15)
    assert el < 600.0


def test_criterion_08_edge_universality():
    t0 = time.time()
    results = {}
    for law, seed in ((ens.GAUSSIAN, 88), (ens.RADEMACHER, 89)):
        spec = ens.EnsembleSpec(N=500, lam0=0.5, potential=ens.IIDFrom(TWO),
                                law=law, c2=ens.edge_matched_c2(law),
                                zero_diagonal=False, seed=seed)
        results[law] = tw.mc_edge(spec, 2000)
    el = time.time() - t0
    ok = all(r.ks < 0.06 for r in results.values()) and el < 3600.0
    detail = ", ".join(f"{law}: KS {r.ks:.4f}" for law, r in results.items())
    _line(8, ok, f"edge universality N=500 ({detail}; gate 0.06), {el:.0f}s")
    for law, r in results.items():
        assert r.ks < 0.06, law
    assert el < 3600.0


def test_criterion_09_regime_trichotomy():
    t0 = time.time()
    clauses = []

    def clause(name, value, gate, below):
        okc = value < gate if below else value > gate
        clauses.append((name, value, gate, below, okc))

    for sigma0, delta, seed in ((1.0, 1.0 / 3.0, 913), (1.0, 1.0 / 6.0, 916),
                                (0.5, 0.0, 910)):
        out = tw.regime_test(TWO, sigma0, delta, [800], 1500, seed=seed)[0]
        case, samples, lam0 = out["case"], out["samples"], out["lam0"]
        clause(f"case {case} own law ({out['law'].variant})", out["ks"],
               0.08, below=True)
        if case == "iii":
            alts = [tw.LimitLaw(tw.TW1), tw.LimitLaw(tw.TW1_GAUSS_CONV, 1.0)]
        else:
            other = tw.TW1 if case == "ii" else tw.TW1_GAUSS_CONV
            sig2 = 1.0 if other == tw.TW1_GAUSS_CONV else 0.0
            alts = [tw.LimitLaw(other, sig2)]
            # the Gaussian alternative, expressed in this case's
            # N^(2/3)(mu_1 - E_plus) units: sigma^2 = (1 - m_fc(E+)^2) N^(1/3)
            e_plus = out["e_plus"]
            m_edge = fc.solve_point(TWO, lam0, 1.0, complex(e_plus, 1e-12))
            alts.append(tw.LimitLaw(tw.GAUSS,
                                    (1.0 - m_edge.real ** 2) * 800 ** (1.0 / 3.0)))
        for alt in alts:
            label = alt.variant + (f"({alt.sigma2:.3g})"
                                   if alt.variant == tw.GAUSS else "")
            clause(f"case {case} rejects {label}",
                   tw.ks_statistic(samples, alt), 0.12, below=False)

    el = time.time() - t0
    ok = all(c[4] for c in clauses) and el < 5400.0
    detail = "; ".join(f"{n}: {v:.4f} ({'<' if b else '>'}{g}) "
                       f"{'ok' if okc else 'FAIL'}"
                       for n, v, g, b, okc in clauses)
    _line(9, ok, f"regime trichotomy N=800: {detail}, {el:.0f}s")
    failures = [c for c in clauses if not c[4]]
    assert not failures, f"clauses failed: {[c[0] for c in failures]}"
    assert el < 5400.0


def test_criterion_10_dbm_invariance_and_interpolation():
    t0 = time.time()
    band = 1.36 * np.sqrt(2.0 / 400) + 0.02
    inv = {}
    for idx, t in enumerate((1.0, 10.0)):
        inv[t] = dbm.goe_invariance_check(300, t, 400,
                                          rngstream.stream(61, "c10inv", idx))
    spec = ens.EnsembleSpec(N=300, lam0=0.5, potential=ens.IIDFrom(TWO),
                            seed=0)
    rng = rngstream.stream(62, "c10flow")
    flowed = []
    for _ in range(500):
        state, _ = dbm.start(spec, rng)
        flowed.append(np.linalg.eigvalsh(dbm.evolve(state, 1.0).h)[-1])
    direct = [np.linalg.eigvalsh(
        ens.sample_interpolated(spec, 1.0, rngstream.stream(63, "c10ref", k)))[-1]
        for k in range(500)]
    interp = dbm.ks_two_sample(flowed, direct)
    el = time.time() - t0
    ok = all(v < band for v in inv.values()) and interp < 0.08 and el < 1800.0
    _line(10, ok, f"flow invariance KS t=1: {inv[1.0]:.4f}, t=10: "
                  f"{inv[10.0]:.4f} (band {band:.4f}); interpolation KS "
                  f"{interp:.4f} (gate 0.08), {el:.0f}s")
    for t, v in inv.items():
        assert v < band, f"t={t}"
    assert interp < 0.08
    assert el < 1800.0


def test_criterion_11_rigidity():
    t0 = time.time()
    reports = {}
    for lam0, pot, seed in ((0.0, ens.Fixed(np.zeros(500)), 110),
                            (0.5, ens.Fixed(np.tile([1.0, -1.0], 250)), 115)):
        spec = ens.EnsembleSpec(N=500, lam0=lam0, potential=pot, seed=seed)
        reports[lam0] = tw.rigidity_report(spec, 200, 20)
    el = time.time() - t0
    worst = max(float(r["median"].max()) for r in reports.values())
    ok = worst < 3.0 and not any(r["flag"] for r in reports.values()) \
        and el < 1800.0
    _line(11, ok, f"rigidity N=500, worst median "
                  f"{worst:.3f} (gate 3) over k <= 20 at lam0 in {{0, 0.5}}, "
                  f"{el:.0f}s")
    for lam0, rep in reports.items():
        assert float(rep["median"].max()) < 3.0, f"lam0={lam0}"
        assert not rep["flag"], f"lam0={lam0}"
    assert el < 1800.0


def test_criterion_12_tw_evaluation():
    t0 = time.time()
    worst = 0.0
    for beta, key in ((1, "F1"), (2, "F2")):
        for s_str, ref in ORACLE[key].items():
            worst = max(worst, abs(tw.tw_cdf(beta, float(s_str)) - ref))
    table = tw._law_table(tw.TW1, 0.0)
    grid = tw._GRID
    pdf = np.gradient(table, grid)
    mean = float(np.trapezoid(grid * pdf, grid))
    sd = float(np.sqrt(np.trapezoid((grid - mean) ** 2 * pdf, grid)))
    dm = abs(mean - ORACLE["TW1"]["mean"])
    dsd = abs(sd - np.sqrt(ORACLE["TW1"]["var"]))
    el = time.time() - t0
    ok = worst <= 1e-5 and dm <= 1e-3 and dsd <= 1e-3 and el < 60.0
    _line(12, ok, f"Painleve vs Fredholm oracle max diff {worst:.2e} "
                  f"(gate 1e-5); TW1 mean/sd off by {dm:.2e}/{dsd:.2e} "
                  f"(gate 1e-3), {el:.1f}s")
    assert worst <= 1e-5
    assert dm <= 1e-3
    assert dsd <= 1e-3
    assert el < 60.0