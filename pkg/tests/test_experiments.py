import math

import numpy as np
import pytest

from nanomoments import ensembles, experiments
from nanomoments.ensembles import EnsembleSpec, Family
from nanomoments.experiments import (ExperimentConfig, ExperimentError, draw_angles, map_samples, moment_values,
                                     run_decomposition_study, run_moment, run_scan, summarize)
from nanomoments.numkernel import SolverFailure
from nanomoments.oracle import weyl_moment
from nanomoments.theory import ValidityError


def cfg(family="u", n=8, a=(0.2,), k=2.0, samples=500, seed=1, **kw):
    return ExperimentConfig(EnsembleSpec(Family.parse(family), n), a, k, samples, seed, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(samples=99)
    with pytest.raises(ValidityError, match="K>3"):
        cfg(family="usp", k=3.0)
    with pytest.raises(ValueError):
        cfg(a=(8.0,))
    with pytest.raises(ValueError):
        cfg(seed=-1)
    with pytest.raises(ValueError):
        cfg(workers=0)
    with pytest.raises(ValueError, match="no dense backend"):
        cfg(family="usp", k=4, backend="dense")
    assert cfg().backend == "dense"
    assert cfg(family="so-even").backend == "tridiag"


def test_estimate_fields():
    [est] = run_moment(cfg())
    assert est.count == 500
    assert est.stderr >= 0
    assert 0 <= est.max_share <= 1
    assert est.ratio == pytest.approx(est.mean / est.prediction.value)
    assert est.reliable


def test_so_odd_leading_term():
    n, a = 16, 0.01
    [est] = run_moment(cfg("so-odd", n, (a,), 2.0, 1000))
    assert 0.95 <= est.mean / (n / a) ** 2 <= 1.0


def test_unitary_n2_against_oracle():
    [est] = run_moment(cfg("u", 2, (0.3,), 2.0, 100_000, seed=8))
    exact = weyl_moment(Family.UNITARY, 2, 0.3, 2.0).value
    assert abs(est.mean - exact) <= 3 * est.stderr


@pytest.mark.parametrize("family", ["u", "usp"])
def test_workers_do_not_change_results(family):
    k = 4.0 if family == "usp" else 2.5
    one = run_moment(cfg(family, 6, (0.2, 0.1), k, 1500, seed=4, workers=1))
    four = run_moment(cfg(family, 6, (0.2, 0.1), k, 1500, seed=4, workers=4))
    assert one == four


def test_seed_blocks_agree():
    spec = EnsembleSpec(Family.UNITARY, 8)
    lo = moment_values(spec, 3, 3000, [0.3], 2.0)[:, 0]
    hi = moment_values(spec, 3, 3000, [0.3], 2.0, start=3000)[:, 0]
    m1, s1, _ = summarize(lo)
    m2, s2, _ = summarize(hi)
    assert abs(m1 - m2) <= 3 * math.hypot(s1, s2)
    assert not np.array_equal(lo, hi)


def test_precomputed_angles_give_same_estimates():
    c = cfg("so-even", 6, (0.2,), 2.5, 300, seed=2)
    ang = draw_angles(c.ensemble, c.seed, c.samples, c.backend)
    assert run_moment(c, angles=ang) == run_moment(c)
    with pytest.raises(ValueError):
        run_moment(c, angles=ang[:10])


def test_scan_sorts_and_reports_trend():
    res = run_scan(cfg("u", 8, (0.1, 0.4, 0.2), 2.0, 400))
    assert [e.a for e in res.estimates] == [0.4, 0.2, 0.1]
    assert len(res.widened_deviation) == 3
    assert all(d >= 0 for d in res.widened_deviation)
    assert res.non_increasing == all(y <= x for x, y in zip(res.widened_deviation, res.widened_deviation[1:]))


def test_scan_needs_two_offsets():
    with pytest.raises(ValueError):
        run_scan(cfg())


def test_variance_scaling_unitary():
    # relative variance of |P'/P|^K should grow like 1/a
    est = run_moment(cfg("u", 16, (0.4, 0.2, 0.1), 2.0, 20_000, seed=6))
    scaled = [a * (e.stderr**2 * e.count) / e.mean**2 for a, e in zip((0.4, 0.2, 0.1), est)]
    assert max(scaled) / min(scaled) <= 3.0


def test_decomposition_report():
    [rep] = run_decomposition_study(cfg("u", 16, (0.05,), 2.5, 300))
    assert min(rep.mean_full_K, rep.mean_M_K, rep.mean_E_K) >= 0
    assert rep.c_used == pytest.approx(0.05 ** (1.5 / 5))
    assert sum(rep.window_histogram.values()) == pytest.approx(1.0)
    assert rep.max_identity_residual <= 1e-9
    assert rep.ratio_E_over_M == pytest.approx(rep.mean_E_K / rep.mean_M_K)
    assert rep.e_moment_scaled == pytest.approx(rep.mean_E_K * (rep.c_used / 16) ** 2.5)


def test_decomposition_cutoff_override_and_k():
    [rep] = run_decomposition_study(cfg("usp", 16, (0.1,), 4.0, 200, cutoff_override=0.3))
    assert rep.c_used == 0.3
    with pytest.raises(ValueError):
        run_decomposition_study(cfg("so-odd", 16, (0.1,), 0.5, 200))


def test_failure_budget(monkeypatch):
    real = ensembles.sample

    def flaky(spec, stream, backend=None):
        if flaky.calls % 50 == 0:
            flaky.calls += 1
            raise SolverFailure("forced")
        flaky.calls += 1
        return real(spec, stream, backend)

    flaky.calls = 0
    monkeypatch.setattr(ensembles, "sample", flaky)
    with pytest.raises(ExperimentError):
        run_moment(cfg(samples=500))


def test_rare_failures_are_dropped(monkeypatch):
    real = ensembles.sample
    calls = []

    def once(spec, stream, backend=None):
        calls.append(1)
        if len(calls) == 7:
            raise SolverFailure("forced")
        return real(spec, stream, backend)

    monkeypatch.setattr(ensembles, "sample", once)
    rows = map_samples(EnsembleSpec(Family.UNITARY, 4), 0, 2000, lambda s: s.angles)
    assert sum(r is None for r in rows) == 1
