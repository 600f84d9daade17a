"""Self-checks of the library, shared by ``nanomoments verify`` and the test suite.

Each ``check_*`` function runs one acceptance experiment and returns a
:class:`CheckResult`.  Tolerances and sample sizes are fixed here so that the
CLI and the tests agree on what "passing" means.
"""

import contextlib
import io
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import theory
from .densities import (compare_to_exact, density_from_angles, integrated_cluster_bound, near_zero_density,
                        one_level_density, sum_rule, window_count_distribution)
from .ensembles import EnsembleSpec, Family, check_backend
from .experiments import (ExperimentConfig, draw_angles, run_decomposition_study, run_moment,
                          run_scan, summarize)
from .logderiv import cutoff_c, decompose_angles, log_deriv_batch
from .numkernel import log_gamma
from .oracle import second_moment_exact_unitary, weyl_moment
from .theory import MomentQuery, integer_moment, limit_integral, predict, so_even_integer_moment_as_printed

DEFAULT_SEED = 20261014

GAMMA_K_GRID = {
    Family.UNITARY: (1.2, 1.5, 2.0, 2.5, 3.7, 5.0),
    Family.SO_EVEN: (1.2, 1.5, 2.0, 2.5, 3.7, 5.0),
    Family.USP: (3.2, 3.5, 4.0, 6.2),
}
GAMMA_NA_GRID = ((50, 0.1), (50, 0.01), (200, 0.1), (200, 0.01))

ORACLE_K = {Family.UNITARY: (2.0, 2.5), Family.SO_EVEN: (2.0, 2.5), Family.SO_ODD: (2.0, 2.5), Family.USP: (4.0, 4.5)}
ORACLE_A = (0.5, 0.2)

LEMMA_X_CONSTANT = 20.0
LEMMA_X1_CONSTANT = 10.0
PROP_E_CONSTANT = 10.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    @property
    def within_budget(self):
        return self.budget is None or self.seconds <= self.budget

    @property
    def ok(self):
        return self.passed and self.within_budget

    def line(self):
        tag = "PASS" if self.ok else "FAIL"
        timing = f"{self.seconds:.1f}s" + (f"/{self.budget:g}s" if self.budget is not None else "")
        note = "" if self.within_budget else " [over time budget]"
        return f"{tag} {self.name}: {self.summary} ({timing}){note}"

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _timed(name, budget):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, summary, metrics = fn(*args, **kwargs)
            return CheckResult(name, bool(passed), summary, metrics, time.perf_counter() - t0, budget)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.check_name = name
        run.budget = budget
        return run
    return wrap


_angle_cache = {}


def cached_angles(family, n, seed, count, backend=None):
    """Angles of samples ``0 .. count-1``, memoised so that several checks can share draws."""
    fam = Family.parse(family)
    key = (fam, n, seed, count, check_backend(fam, backend))
    if key not in _angle_cache:
        _angle_cache[key] = draw_angles(EnsembleSpec(key[0], n), seed, count, backend)
    return _angle_cache[key]


def clear_cache():
    _angle_cache.clear()


def _rel(x, y):
    return abs(x - y) / abs(y)


# ---------------------------------------------------------------------------
# exact consistency


def _gamma_integral_worst():
    worst = 0.0
    where = None
    for fam, ks in GAMMA_K_GRID.items():
        for n, a in GAMMA_NA_GRID:
            for k in ks:
                q = MomentQuery(fam, n, a, k)
                r = _rel(limit_integral(q), predict(q).value)
                if r > worst:
                    worst, where = r, (fam.value, n, a, k)
    return worst, where


@_timed("gamma_integral", 5.0)
def check_gamma_integral():
    """Quadrature of each limit integral equals its Gamma closed form to 1e-8."""
    worst, where = _gamma_integral_worst()
    return worst <= 1e-8, f"worst relative gap {worst:.2e} at {where}", {"worst": worst, "where": where}


@_timed("gamma_mutation", 5.0)
def check_gamma_mutation():
    """Replacing Gamma(K/2) by Gamma(K) in the unitary formula must be detected."""
    original = theory._unitary_gamma_ratio
    theory._unitary_gamma_ratio = lambda k: math.exp(log_gamma((k - 1.0) / 2.0) - log_gamma(k))
    try:
        worst, where = _gamma_integral_worst()
    finally:
        theory._unitary_gamma_ratio = original
    detected = worst > 1e-8
    return detected, f"mutant worst gap {worst:.2e} ({'detected' if detected else 'missed'})", {"worst": worst}


@_timed("integer_moments", 1.0)
def check_integer_moments():
    """Real-K predictions at integer K equal the integer-moment formulas to 1e-10."""
    worst = 0.0
    for n, a in ((50, 0.1), (200, 0.01)):
        for m in range(1, 7):
            worst = max(worst, _rel(predict(MomentQuery(Family.UNITARY, n, a, 2.0 * m)).value,
                                    integer_moment(Family.UNITARY, m, n, a)))
        for k in range(4, 9):
            worst = max(worst, _rel(predict(MomentQuery(Family.USP, n, a, k)).value,
                                    integer_moment(Family.USP, k, n, a)))
        for k in range(2, 9):
            worst = max(worst, _rel(predict(MomentQuery(Family.SO_EVEN, n, a, k)).value,
                                    integer_moment(Family.SO_EVEN, k, n, a)))
    # the SO(2N) formula with the literal a^(2K-1) is off by a factor a^(-K)
    printed = so_even_integer_moment_as_printed(3, 50, 0.1) / predict(MomentQuery(Family.SO_EVEN, 50, 0.1, 3)).value
    literal_consistent = abs(printed - 1.0) < 1e-6
    ok = worst <= 1e-10 and not literal_consistent
    return ok, f"worst relative gap {worst:.2e}; literal SO(2N) exponent off by factor {printed:.4g}", {
        "worst": worst, "printed_over_predicted": printed}


# ---------------------------------------------------------------------------
# oracles


def _log_derivs(spec, seed, draws, a_list):
    return log_deriv_batch(draw_angles(spec, seed, draws), spec.family, spec.n, a_list)


@_timed("oracle_small_n", 120.0)
def check_oracle_small_n(seed=DEFAULT_SEED, draws=100_000, n_values=(1, 2, 3), families=tuple(Family)):
    """Monte Carlo at tiny N agrees with Weyl-integration oracles within 3 stderr."""
    closed = weyl_moment(Family.UNITARY, 1, 0.3, 2.0).value
    closed_gap = _rel(closed, 1.0 / (2 * 0.3 - 0.3 ** 2))
    rows = []
    worst_z = 0.0
    for fam in families:
        for n in n_values:
            ld = np.abs(_log_derivs(EnsembleSpec(fam, n), seed, draws, ORACLE_A))
            for j, a in enumerate(ORACLE_A):
                for k in ORACLE_K[fam]:
                    mean, se, _ = summarize(ld[:, j] ** k)
                    exact = weyl_moment(fam, n, a, k).value
                    z = abs(mean - exact) / se
                    worst_z = max(worst_z, z)
                    rows.append({"family": fam.value, "n": n, "a": a, "k": k, "mc": mean, "stderr": se,
                                 "oracle": exact, "z": z})
    fails = [r for r in rows if r["z"] > 3.0]
    ok = not fails and closed_gap <= 1e-6
    return ok, (f"{len(rows) - len(fails)}/{len(rows)} within 3 stderr (worst z {worst_z:.2f}); "
                f"n=1 closed form gap {closed_gap:.1e}"), {"rows": rows, "closed_form_gap": closed_gap}


@_timed("second_moment_oracle", 180.0)
def check_second_moment(seed=DEFAULT_SEED, draws=100_000, n=20):
    """Exact finite-N second moment of U(N) against Monte Carlo and against N^2/(2a)."""
    exact = second_moment_exact_unitary(n, 0.5).value
    ld = _log_derivs(EnsembleSpec(Family.UNITARY, n), seed, draws, (0.5,))
    mean, se, _ = summarize(np.abs(ld[:, 0]) ** 2)
    z = abs(mean - exact) / se
    small = second_moment_exact_unitary(n, 0.05).value
    ratio = small / (n * n / (2 * 0.05))
    ok = z <= 3.0 and 0.8 <= ratio <= 1.2
    return ok, f"a=0.5: z={z:.2f}; a=0.05: ratio to N^2/(2a) = {ratio:.4f}", {
        "exact": exact, "mc": mean, "stderr": se, "z": z, "ratio_small_a": ratio}


# ---------------------------------------------------------------------------
# samplers


NEAR_ZERO_WINDOW = {Family.SO_EVEN: 0.1, Family.USP: 0.5}


@_timed("sampler_densities", 300.0)
def check_densities(seed=DEFAULT_SEED, draws=10_000, n_values=(16, 32), bins=400):
    """Histograms of sampled angles against the exact one-level densities, plus backend KS tests."""
    metrics = {"histograms": [], "near_zero": [], "sum_rules": [], "ks": []}
    ok = True
    for fam in Family:
        for n in n_values:
            ang = cached_angles(fam, n, seed, draws)
            curve = density_from_angles(fam, n, ang, bins)
            z = compare_to_exact(curve)
            frac = float(np.mean(np.abs(z) <= 3.0))
            ok &= frac >= 0.99
            metrics["histograms"].append({"family": fam.value, "n": n, "fraction_within_3se": frac})
            sr = sum_rule(fam, n)
            ok &= abs(sr - n) <= 1e-8 * n and abs(curve.total_mass - n) <= 1e-9 * n
            metrics["sum_rules"].append({"family": fam.value, "n": n, "quadrature": sr, "empirical": curve.total_mass})
            if fam in NEAR_ZERO_WINDOW:
                hi = NEAR_ZERO_WINDOW[fam] / n
                obs = int(np.count_nonzero(ang < hi))
                nz = compare_to_exact(density_from_angles(fam, n, ang, np.array([0.0, hi])),
                                      density=lambda t, f=fam, m=n: near_zero_density(f, m, t))
                ok &= abs(nz[0]) <= 3.0
                metrics["near_zero"].append({"family": fam.value, "n": n, "window": hi, "count": obs, "z": float(nz[0])})
    # the exact curves themselves approach the near-zero asymptotics
    for fam, theta in ((Family.SO_EVEN, 1e-3), (Family.USP, 1e-3)):
        r = one_level_density(fam, 32, theta) / near_zero_density(fam, 32, theta)
        ok &= abs(r - 1.0) <= 0.05
        metrics["near_zero"].append({"family": fam.value, "n": 32, "exact_over_asymptotic": float(r)})
    for n in n_values:
        dense = draw_angles(EnsembleSpec(Family.SO_EVEN, n), seed + 1, draws, backend="dense")
        tri = cached_angles(Family.SO_EVEN, n, seed, draws)
        for stat, f in (("min", np.min), ("max", np.max)):
            p = float(stats.ks_2samp(f(dense, axis=1), f(tri, axis=1)).pvalue)
            ok &= p > 1e-3
            metrics["ks"].append({"n": n, "statistic": stat, "p": p})
    worst_frac = min(h["fraction_within_3se"] for h in metrics["histograms"])
    min_p = min(k["p"] for k in metrics["ks"])
    return ok, f"min bin fraction within 3se {worst_frac:.4f}; min KS p {min_p:.3g}", metrics


@_timed("sum_rules", 10.0)
def check_sum_rules(n_values=(16, 32)):
    """The exact one-level densities integrate to the number of stored angles."""
    gaps = [abs(sum_rule(f, n) - n) / n for f in Family for n in n_values]
    return max(gaps) <= 1e-8, f"worst relative sum-rule gap {max(gaps):.1e}", {"worst": max(gaps)}


# ---------------------------------------------------------------------------
# desk-scale theorems


def _trend_check(fam, n, k, a_list, samples, seed, ratio_window, need_share=False):
    cfg = ExperimentConfig(EnsembleSpec(fam, n), a_list, k, samples, seed)
    res = run_scan(cfg, angles=cached_angles(fam, n, seed, samples, cfg.backend))
    last = res.estimates[-1]
    lo, hi = ratio_window
    ok = lo <= last.ratio <= hi and res.non_increasing
    if need_share:
        ok &= all(e.max_share < 0.5 for e in res.estimates)
    rows = [{"a": e.a, "mean": e.mean, "stderr": e.stderr, "prediction": e.prediction.value, "ratio": e.ratio,
             "max_share": e.max_share, "widened": d} for e, d in zip(res.estimates, res.widened_deviation)]
    ratios = ", ".join(f"a={e.a:g}: {e.ratio:.4f}" for e in res.estimates)
    share = max(e.max_share for e in res.estimates)
    return ok, f"ratios {ratios}; trend {'non-increasing' if res.non_increasing else 'broken'}; max_share {share:.3f}", {
        "rows": rows, "non_increasing": res.non_increasing}


@_timed("theorem_unitary", 600.0)
def check_theorem_unitary(seed=DEFAULT_SEED, samples=20_000):
    return _trend_check(Family.UNITARY, 64, 2.5, (0.2, 0.1, 0.05), samples, seed, (0.7, 1.3))


@_timed("theorem_so_even", 180.0)
def check_theorem_so_even(seed=DEFAULT_SEED, samples=20_000):
    return _trend_check(Family.SO_EVEN, 64, 2.5, (0.2, 0.1, 0.05), samples, seed, (0.7, 1.3))


@_timed("theorem_usp", 600.0)
def check_theorem_usp(seed=DEFAULT_SEED, samples=200_000):
    return _trend_check(Family.USP, 64, 4.0, (0.2, 0.1), samples, seed, (0.6, 1.4), need_share=True)


@_timed("so_odd_leading", 10.0)
def check_so_odd(seed=DEFAULT_SEED, samples=1_000):
    n, k, a = 64, 2.0, 0.01
    est = run_moment(ExperimentConfig(EnsembleSpec(Family.SO_ODD, n), (a,), k, samples, seed))[0]
    scaled = est.mean / (n / a) ** k
    target = 1.0 - k * a
    return abs(scaled - target) <= 0.01, f"mean/(N/a)^K = {scaled:.5f}, two-term value {target:.5f}", {
        "scaled": scaled, "stderr_scaled": est.stderr / (n / a) ** k}


# ---------------------------------------------------------------------------
# decomposition


def _lemma_stats(fam, n, seed, draws, a, k):
    c = cutoff_c(a, k).c
    ang = cached_angles(fam, n, seed, draws)
    resid = x2r = x3r = 0.0
    x1sq = []
    for idx, t in enumerate(ang):
        d = decompose_angles(t, fam, n, a, c)
        x1sq.append(abs(d.x1) ** 2 / n ** 2)
        if idx < 1000:
            resid = max(resid, abs(d.full - (d.m_term + d.x1 + d.x2 - d.x3)) / abs(d.full),
                        abs(d.full - (d.m_term + d.e_term)) / abs(d.full))
            den = n + abs(d.x1)
            x2r = max(x2r, abs(d.x2) * c / den)
            x3r = max(x3r, abs(d.x3) / den)
    return {"family": fam.value, "n": n, "identity": resid, "x2_ratio": x2r, "x3_ratio": x3r,
            "mean_x1_sq_over_n2": math.fsum(x1sq) / len(x1sq), "draws": len(x1sq)}


@_timed("decomposition", 600.0)
def check_decomposition(seed=DEFAULT_SEED, samples=20_000, n_values=(32, 64, 128), lemma_draws=1_000, x1_draws=10_000):
    """Exact M/E identity, Prop ME ratios at desk scale, and the lemma bounds."""
    a, k = 0.05, 2.5
    cfg = ExperimentConfig(EnsembleSpec(Family.UNITARY, 64), (a,), k, samples, seed)
    rep = run_decomposition_study(cfg, angles=cached_angles(Family.UNITARY, 64, seed, samples))[0]
    ok = 0.8 <= rep.ratio_M_over_full <= 1.2 and rep.ratio_E_over_M <= 0.3 and rep.max_identity_residual <= 1e-9
    lemma = []
    for fam in Family:
        for n in n_values:
            draws = x1_draws if fam is Family.UNITARY else lemma_draws
            st = _lemma_stats(fam, n, seed, draws, a, k)
            ok &= st["identity"] <= 1e-9 and st["x2_ratio"] <= LEMMA_X_CONSTANT and st["x3_ratio"] <= LEMMA_X_CONSTANT
            if fam is Family.UNITARY:
                ok &= st["mean_x1_sq_over_n2"] <= LEMMA_X1_CONSTANT
            lemma.append(st)
    prop_e = []
    for n in n_values:
        c = cutoff_c(a, k).c
        ang = cached_angles(Family.UNITARY, n, seed, x1_draws)[:lemma_draws]
        ek = [abs(decompose_angles(t, Family.UNITARY, n, a, c).e_term) ** k for t in ang]
        val = math.fsum(ek) / len(ek) * (c / n) ** k
        ok &= val <= PROP_E_CONSTANT
        prop_e.append({"n": n, "scaled_E_moment": val})
    worst = {key: max(s[key] for s in lemma) for key in ("identity", "x2_ratio", "x3_ratio")}
    x1 = max(s["mean_x1_sq_over_n2"] for s in lemma if s["family"] == "u")
    summary = (f"M/full {rep.ratio_M_over_full:.4f}, E/M {rep.ratio_E_over_M:.4f}; identity {worst['identity']:.1e}; "
               f"sup X2 ratio {worst['x2_ratio']:.2f}, sup X3 ratio {worst['x3_ratio']:.2f}, "
               f"mean |X1|^2/N^2 {x1:.3f}; max E-moment scaled {max(p['scaled_E_moment'] for p in prop_e):.3f}")
    return ok, summary, {"prop_me": asdict(rep), "lemmas": lemma, "prop_e": prop_e}


@_timed("cluster_bound", 120.0)
def check_cluster_bound(seed=DEFAULT_SEED, samples=20_000, n=64, c_values=(0.05, 0.1)):
    """Frequencies of two or more angles in the window stay below the integrated cluster bound."""
    ang = cached_angles(Family.UNITARY, n, seed, samples)
    ok = True
    rows = []
    for c in c_values:
        ws = window_count_distribution(ang, c)
        hit = (ws.counts >= 2).astype(float)
        freq, se = float(hit.mean()), float(hit.std(ddof=1) / math.sqrt(ws.draws))
        prob_bound = sum((c / math.pi) ** m for m in range(2, n + 1))
        mass, mass_se = ws.clustered_mass(2)
        mass_bound = sum(integrated_cluster_bound(n, c, m) for m in range(2, n + 1))
        ok &= freq <= prob_bound + 3 * se and mass <= mass_bound + 3 * mass_se
        rows.append({"c": c, "freq_ge2": freq, "stderr": se, "bound": prob_bound, "mass_ge2": mass,
                     "mass_bound": mass_bound, "p_one_given_any": ws.p_exactly_one_given_any})
    summary = "; ".join(f"c={r['c']:g}: freq {r['freq_ge2']:.2e} vs bound {r['bound']:.2e}" for r in rows)
    return ok, summary, {"rows": rows}


# ---------------------------------------------------------------------------
# reproducibility


@_timed("reproducibility", 60.0)
def check_reproducibility(seed=DEFAULT_SEED, samples=2_000):
    """`moments` with 1 and 4 workers writes byte-identical CSV."""
    from .cli import main

    cases = (["--ensemble", "u", "--n", "16", "--a", "0.1", "--a", "0.05", "--k", "2.5"],
             ["--ensemble", "usp", "--n", "16", "--a", "0.2", "--k", "4"])
    same = True
    with tempfile.TemporaryDirectory() as tmp:
        for i, case in enumerate(cases):
            outs = []
            for w in (1, 4):
                path = os.path.join(tmp, f"m{i}_{w}.csv")
                with contextlib.redirect_stdout(io.StringIO()):
                    code = main(["moments", *case, "--samples", str(samples), "--seed", str(seed),
                                 "--workers", str(w), "--out", path])
                if code != 0:
                    return False, f"moments exited with status {code}", {}
                with open(path, "rb") as fh:
                    outs.append(fh.read())
            same &= outs[0] == outs[1]
    return same, "workers=1 and workers=4 outputs are " + ("identical" if same else "different"), {}


@_timed("decomposition_identity", 30.0)
def check_decomposition_identity(seed=DEFAULT_SEED, n=32, draws=1_000):
    """full = M + X1 + X2 - X3 per sample, to 1e-9 relative, for every family."""
    worst = 0.0
    c = cutoff_c(0.05, 2.5).c
    for fam in Family:
        for t in cached_angles(fam, n, seed, draws):
            d = decompose_angles(t, fam, n, 0.05, c)
            worst = max(worst, abs(d.full - (d.m_term + d.x1 + d.x2 - d.x3)) / abs(d.full))
    return worst <= 1e-9, f"worst relative residual {worst:.1e}", {"worst": worst}


@_timed("oracle_quick", 30.0)
def check_oracle_quick(seed=DEFAULT_SEED, draws=20_000):
    """The n=1 closed form, and Monte Carlo against the oracle for U(2), K=2, a=0.3."""
    closed_gap = _rel(weyl_moment(Family.UNITARY, 1, 0.3, 2.0).value, 1.0 / (2 * 0.3 - 0.3 ** 2))
    exact = weyl_moment(Family.UNITARY, 2, 0.3, 2.0).value
    ld = _log_derivs(EnsembleSpec(Family.UNITARY, 2), seed, draws, (0.3,))
    mean, se, _ = summarize(np.abs(ld[:, 0]) ** 2)
    z = abs(mean - exact) / se
    return closed_gap <= 1e-6 and z <= 3.0, f"closed-form gap {closed_gap:.1e}; U(2) z={z:.2f}", {
        "closed_form_gap": closed_gap, "z": z}


ACCEPTANCE = (
    check_gamma_integral,
    check_integer_moments,
    check_oracle_small_n,
    check_second_moment,
    check_densities,
    check_theorem_unitary,
    check_theorem_so_even,
    check_theorem_usp,
    check_so_odd,
    check_decomposition,
    check_cluster_bound,
    check_reproducibility,
)

QUICK = (
    check_gamma_integral,
    check_gamma_mutation,
    check_integer_moments,
    check_oracle_quick,
    check_sum_rules,
    check_so_odd,
    check_decomposition_identity,
    check_reproducibility,
)

FULL = ACCEPTANCE + (check_gamma_mutation,)


def run_checks(quick=False, seed=DEFAULT_SEED, report=None):
    """Run the quick or full set; ``report`` (if given) is called with each result as it arrives."""
    results = []
    for chk in QUICK if quick else FULL:
        if chk in (check_gamma_integral, check_gamma_mutation, check_integer_moments, check_sum_rules):
            res = chk()
        else:
            res = chk(seed=seed)
        results.append(res)
        if report is not None:
            report(res)
    return results
