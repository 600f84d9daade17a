"""Monte Carlo estimation of E|P'/P(1 - a/N)|^K and of the M/E decomposition.

Sample ``i`` is always drawn from the stream keyed by ``(seed, i)``; chunks of
indices go to worker threads and results are reassembled in index order, then
reduced with exactly rounded sums.  The output is therefore bit-identical for
any number of workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ensembles
from .ensembles import EnsembleSpec, Family, SamplerIntegrityError
from .logderiv import cutoff_c, decompose_angles, log_deriv_many
from .numkernel import DegenerateInputError, RngStream, SolverFailure
from .numkernel.rng import MASK64
from .theory import MomentQuery, Prediction, check_k, predict

FAILURE_BUDGET = 1e-3
MAX_SHARE_LIMIT = 0.5
CHUNK = 256

DEFAULT_SAMPLES = {
    Family.UNITARY: 20_000,
    Family.SO_EVEN: 20_000,
    Family.USP: 200_000,
    Family.SO_ODD: 1_000,
}


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleSpec
    a_list: tuple
    k: float
    samples: int
    seed: int = 0
    workers: int = 1
    backend: str | None = None
    cutoff_override: float | None = None

    def __post_init__(self):
        if not isinstance(self.ensemble, EnsembleSpec):
            raise TypeError("ensemble must be an EnsembleSpec")
        a_list = tuple(float(a) for a in np.atleast_1d(self.a_list))
        if not a_list:
            raise ValueError("a_list is empty")
        for a in a_list:
            if not 0 < a < self.ensemble.n:
                raise ValueError(f"a must satisfy 0 < a < N, got {a}")
        object.__setattr__(self, "a_list", a_list)
        object.__setattr__(self, "k", float(self.k))
        check_k(self.ensemble.family, self.k)
        if int(self.samples) != self.samples or self.samples < 100:
            raise ValueError("samples must be an integer >= 100")
        object.__setattr__(self, "samples", int(self.samples))
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        if int(self.workers) < 1:
            raise ValueError("workers must be positive")
        object.__setattr__(self, "backend", ensembles.check_backend(self.ensemble.family, self.backend))
        if self.cutoff_override is not None and not self.cutoff_override > 0:
            raise ValueError("cutoff_override must be positive")

    @property
    def family(self):
        return self.ensemble.family

    @property
    def n(self):
        return self.ensemble.n


@dataclass(frozen=True)
class MomentEstimate:
    a: float
    k: float
    mean: float
    stderr: float
    count: int
    max_share: float
    prediction: Prediction
    ratio: float

    @property
    def reliable(self):
        return self.max_share <= MAX_SHARE_LIMIT


@dataclass(frozen=True)
class ScanResult:
    estimates: list
    widened_deviation: list
    non_increasing: bool


@dataclass
class DecompositionReport:
    a: float
    k: float
    c_used: float
    count: int
    mean_full_K: float
    mean_M_K: float
    mean_E_K: float
    stderr_full_K: float
    stderr_M_K: float
    stderr_E_K: float
    ratio_M_over_full: float
    ratio_E_over_M: float
    window_histogram: dict
    max_identity_residual: float
    sup_x2_ratio: float
    sup_x3_ratio: float
    mean_x1_sq_over_n2: float
    extra: dict = field(default_factory=dict)

    @property
    def e_moment_scaled(self):
        """E|E|^K (c/N)^K, bounded if E|E|^K is of order (N/c)^K."""
        n = self.extra.get("n")
        return self.mean_E_K * (self.c_used / n) ** self.k


# ---------------------------------------------------------------------------
# sampling machinery


def _run_chunk(spec, backend, seed, start, stop, fn):
    out = []
    failures = 0
    stream = RngStream.for_sample(seed, start)
    for i in range(start, stop):
        stream.reset_for_sample(seed, i)
        try:
            s = ensembles.sample(spec, stream, backend)
        except (SolverFailure, SamplerIntegrityError, DegenerateInputError):
            failures += 1
            out.append(None)
            continue
        out.append(fn(s))
    return out, failures


def map_samples(spec, seed, count, fn, backend=None, workers=1, start=0):
    """Apply ``fn`` to samples ``start .. start+count-1``; failed draws map to ``None``."""
    backend = ensembles.check_backend(spec.family, backend)
    bounds = [(i, min(i + CHUNK, start + count)) for i in range(start, start + count, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_chunk(spec, backend, seed, b[0], b[1], fn), bounds))
    else:
        parts = [_run_chunk(spec, backend, seed, lo, hi, fn) for lo, hi in bounds]
    results = [r for part, _ in parts for r in part]
    failures = sum(f for _, f in parts)
    if failures > FAILURE_BUDGET * count:
        raise ExperimentError(f"{failures} of {count} samples failed, above the {FAILURE_BUDGET:.1%} budget")
    return results


def draw_angles(spec, seed, count, backend=None, workers=1, start=0):
    """Angle arrays of ``count`` samples as a 2-D array (failed draws removed)."""
    rows = map_samples(spec, seed, count, lambda s: s.angles, backend, workers, start)
    return np.array([r for r in rows if r is not None])


def moment_values(spec, seed, count, a_list, k, backend=None, workers=1, start=0):
    """Per-sample |P'/P(1 - a/N)|^K, shape (successful samples, len(a_list))."""
    fam, n = spec.family, spec.n
    rows = map_samples(spec, seed, count, lambda s: np.abs(log_deriv_many(s.angles, fam, n, a_list)) ** k,
                       backend, workers, start)
    vals = [r for r in rows if r is not None]
    return np.array(vals).reshape(len(vals), len(a_list))


def summarize(values):
    """(mean, stderr, max_share) with exactly rounded sums."""
    values = np.asarray(values, dtype=np.float64)
    cnt = values.size
    total = math.fsum(values)
    mean = total / cnt
    var = math.fsum((values - mean) ** 2) / (cnt - 1) if cnt > 1 else 0.0
    share = float(values.max() / total) if total > 0 else 0.0
    return mean, math.sqrt(var / cnt), share


# ---------------------------------------------------------------------------
# experiments


def _check_angles(config, angles):
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (config.samples, config.n):
        raise ValueError(f"expected angles of shape {(config.samples, config.n)}, got {angles.shape}")
    return angles


def run_moment(config, angles=None):
    """One :class:`MomentEstimate` per offset in ``config.a_list``.

    ``angles`` may supply the draws for ``config`` precomputed (for instance by
    :func:`draw_angles` with the same seed), so that several experiments can
    share one set of samples.
    """
    if angles is None:
        vals = moment_values(config.ensemble, config.seed, config.samples, config.a_list, config.k,
                             config.backend, config.workers)
    else:
        fam, n = config.family, config.n
        vals = np.array([np.abs(log_deriv_many(t, fam, n, config.a_list)) ** config.k
                         for t in _check_angles(config, angles)])
    out = []
    for j, a in enumerate(config.a_list):
        mean, se, share = summarize(vals[:, j])
        pred = predict(MomentQuery(config.family, config.n, a, config.k))
        out.append(MomentEstimate(a, config.k, mean, se, vals.shape[0], share, pred, mean / pred.value))
    return out


def widened_deviation(est, widen=2.0):
    """|ratio - 1| shrunk by ``widen`` standard errors (floored at 0)."""
    return max(0.0, abs(est.ratio - 1.0) - widen * est.stderr / est.prediction.value)


def run_scan(config, widen=2.0, angles=None):
    """Estimates over a descending list of offsets plus the convergence-trend verdict."""
    if len(config.a_list) < 2:
        raise ValueError("a scan needs at least two values of a")
    a_desc = tuple(sorted(config.a_list, reverse=True))
    if len(set(a_desc)) != len(a_desc):
        raise ValueError("scan offsets must be distinct")
    cfg = ExperimentConfig(config.ensemble, a_desc, config.k, config.samples, config.seed,
                           config.workers, config.backend, config.cutoff_override)
    ests = run_moment(cfg, angles)
    dev = [widened_deviation(e, widen) for e in ests]
    trend = all(d2 <= d1 for d1, d2 in zip(dev[:-1], dev[1:]))
    return ScanResult(ests, dev, trend)


def _decomp_fn(family, n, a_list, cs):
    def fn(s):
        out = []
        for a, c in zip(a_list, cs):
            d = decompose_angles(s.angles, family, n, a, c)
            out.append((d.full, d.m_term, d.e_term, d.x1, d.x2, d.x3, d.window_count))
        return out
    return fn


def run_decomposition_study(config, lemma_samples=None, angles=None):
    """Moments of the full log-derivative, of M and of E, with per-sample diagnostics.

    ``lemma_samples`` limits the sup-type diagnostics (X2, X3 ratios) to the
    first that many samples; by default all samples are used.
    """
    k = config.k
    if not k > 1:
        raise ValueError("the decomposition study needs K>1")
    fam, n = config.family, config.n
    if config.cutoff_override is not None:
        cs = [config.cutoff_override] * len(config.a_list)
    else:
        cs = [cutoff_c(a, k).c for a in config.a_list]
    fn = _decomp_fn(fam, n, config.a_list, cs)
    if angles is None:
        rows = map_samples(config.ensemble, config.seed, config.samples, fn, config.backend, config.workers)
        rows = [r for r in rows if r is not None]
    else:
        rows = [fn(ensembles.AngleSample(fam, n, t)) for t in _check_angles(config, angles)]
    reports = []
    for j, (a, c) in enumerate(zip(config.a_list, cs)):
        arr = np.array([r[j][:6] for r in rows], dtype=np.complex128)
        wc = np.array([r[j][6] for r in rows])
        full, m, e, x1, x2, x3 = arr.T
        fk, mk, ek = np.abs(full) ** k, np.abs(m) ** k, np.abs(e) ** k
        mf, sf, _ = summarize(fk)
        mm, sm, _ = summarize(mk)
        me, se, _ = summarize(ek)
        resid = np.abs(full - (m + x1 + x2 - x3)) / np.abs(full)
        lim = slice(None) if lemma_samples is None else slice(0, lemma_samples)
        denom = n + np.abs(x1[lim])
        vals, freq = np.unique(wc, return_counts=True)
        reports.append(DecompositionReport(
            a=a, k=k, c_used=c, count=len(rows),
            mean_full_K=mf, mean_M_K=mm, mean_E_K=me,
            stderr_full_K=sf, stderr_M_K=sm, stderr_E_K=se,
            ratio_M_over_full=mm / mf if mf > 0 else math.nan,
            ratio_E_over_M=me / mm if mm > 0 else math.inf,
            window_histogram={int(v): float(f) / len(rows) for v, f in zip(vals, freq)},
            max_identity_residual=float(resid.max()),
            sup_x2_ratio=float(np.max(np.abs(x2[lim]) * c / denom)),
            sup_x3_ratio=float(np.max(np.abs(x3[lim]) / denom)),
            mean_x1_sq_over_n2=float(math.fsum(np.abs(x1) ** 2) / len(rows) / n ** 2),
            extra={"n": n, "family": fam.value},
        ))
    return reports
