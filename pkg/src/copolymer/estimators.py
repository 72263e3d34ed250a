"""Monte Carlo estimation over disorder replicas.

Each estimator draws independent replicas through the counter-based
disorder streams, computes exact per-sample quantities with the DP engine,
and aggregates in fixed replica order, so results are bit-identical for a
given (seed, replica count) regardless of the worker-pool size.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .disorder import (DisorderLaw, PathRng, disorder_from_arrays,
                       freeze_zero_disorder, sample_disorder)
from .errors import ConfigError, GuardError, NumericsError
from .logspace import logsumexp, softplus
from .observables import excursion_law, max_excursion, sample_path
from .partition import (forward_tables, log_partition_curve,
                        shifted_log_partition_curve)

VERDICT_BOUNDED = "BoundedGap"
VERDICT_LOG_GROWTH = "LogGrowth"
VERDICT_INCONCLUSIVE = "Inconclusive"

_LOCALIZED_FLOOR = 1e-3


def _draw_disorder(laws, n, h, seed, replica):
    """laws = None runs the homogeneous (zero-disorder) model."""
    if laws is None:
        return freeze_zero_disorder(n, h)
    return sample_disorder(laws[0], laws[1], n, h, seed, replica)


# ---------------------------------------------------------------------------
# replica fan-out

def _chunk_indices(replicas, threads):
    if threads <= 1:
        return [list(range(replicas))]
    n_chunks = min(replicas, threads * 4)
    bounds = np.linspace(0, replicas, n_chunks + 1).astype(int)
    return [list(range(a, b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _fan_out(worker, common, replicas, threads):
    """Run ``worker((common, chunk))`` over replica chunks; flatten results
    back into replica order."""
    chunks = _chunk_indices(replicas, threads)
    tasks = [(common, c) for c in chunks]
    if len(tasks) == 1 or threads <= 1:
        parts = [worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(worker, tasks))
    return [item for part in parts for item in part]


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(np.mean(x)), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _weighted_line_fit(x, y, w):
    """Weighted least squares line y = a + b x; returns (a, b, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if x.size < 2 or total <= 0:
        raise GuardError("need at least two points for a fit")
    xb = float(np.sum(w * x) / total)
    yb = float(np.sum(w * y) / total)
    sxx = float(np.sum(w * (x - xb) ** 2))
    if sxx == 0.0:
        raise GuardError("degenerate fit abscissa")
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    intercept = yb - slope * xb
    resid = y - intercept - slope * x
    ss_res = float(np.sum(w * resid ** 2))
    ss_tot = float(np.sum(w * (y - yb) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return intercept, slope, r2


def _validate_ladder(n_ladder):
    ladder = [int(v) for v in n_ladder]
    if not ladder or any(v < 1 for v in ladder):
        raise ConfigError("n_ladder must contain positive lengths")
    if sorted(ladder) != ladder or len(set(ladder)) != len(ladder):
        raise ConfigError("n_ladder must be strictly increasing")
    return ladder


# ---------------------------------------------------------------------------
# shared replica workers (top level so they pickle)

def _curve_task(task):
    """Per replica: log Z and W at the requested prefix sites."""
    common, chunk = task
    p, kern, laws, seed, sites = (common["p"], common["kern"], common["laws"],
                                  common["seed"], common["sites"])
    n_top = max(sites)
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n_top, p.h, seed, r)
        zf = log_partition_curve(d, p, kern)
        out.append((zf[sites].copy(), d.w_prefix[sites].copy()))
    return out


def _gather_curves(p, kern, laws, n_ladder, replicas, seed, threads):
    sites = np.asarray(_validate_ladder(n_ladder))
    common = dict(p=p, kern=kern, laws=laws, seed=seed, sites=sites)
    rows = _fan_out(_curve_task, common, replicas, threads)
    z = np.stack([r[0] for r in rows])
    w = np.stack([r[1] for r in rows])
    if not np.all(np.isfinite(z)):
        # cannot happen with K(n) > 0; a kernel/table bug would surface here
        raise NumericsError("log Z under/overflowed in a replica build")
    return sites, z, w


# ---------------------------------------------------------------------------
# free energy

@dataclass(frozen=True)
class FreeEnergyEstimate:
    n: int
    replicas: int
    f_hat: float
    stderr: float
    f_extrapolated: float  # 2 f_2N - f_N from the previous rung; NaN if none


def estimate_free_energy(p, kern, laws, n_ladder, replicas, seed,
                         threads=1):
    """Mean and stderr of (1/N) log Z per ladder rung, plus Richardson
    extrapolation across doubling rungs."""
    if replicas < 2:
        raise GuardError("free-energy estimation needs replicas >= 2")
    sites, z, _ = _gather_curves(p, kern, laws, n_ladder, replicas, seed, threads)
    out = []
    prev = None
    for j, n in enumerate(sites):
        f_hat, se = _mean_stderr(z[:, j] / n)
        extrap = math.nan
        if prev is not None and n == 2 * prev[0]:
            extrap = 2.0 * f_hat - prev[1]
        out.append(FreeEnergyEstimate(n=int(n), replicas=replicas,
                                      f_hat=f_hat, stderr=se,
                                      f_extrapolated=extrap))
        prev = (n, f_hat)
    return out


# ---------------------------------------------------------------------------
# inverse-partition decay rate mu

@dataclass(frozen=True)
class MuEstimate:
    n: int
    mu_hat: float
    mu_stderr: float
    mu_hat_symmetric: float
    f_hat: float
    f_stderr: float


def estimate_mu(p, kern, laws, n_ladder, replicas, seed, threads=1):
    """mu_hat = -(1/N) log mean_r (1 + e^{-2 lam W_N}) / Z_N per rung.

    The ratio estimator is heavy-tailed; a few hundred replicas are needed
    before the stderr (delta method on the replica mean) is meaningful.
    ``mu_hat_symmetric`` is the numerator-1 variant, equivalent in the
    limit whenever the omega law is symmetric (all built-in laws are).
    """
    if replicas < 2:
        raise GuardError("mu estimation needs replicas >= 2")
    sites, z, w = _gather_curves(p, kern, laws, n_ladder, replicas, seed, threads)
    log_r = math.log(replicas)
    out = []
    for j, n in enumerate(sites):
        terms = softplus(-2.0 * p.lam * w[:, j]) - z[:, j]
        mu_hat = -(logsumexp(terms) - log_r) / n
        mu_sym = -(logsumexp(-z[:, j]) - log_r) / n
        shift = float(np.max(terms))
        x = np.exp(terms - shift)
        mu_se = float(np.std(x, ddof=1) / (np.mean(x) * math.sqrt(replicas) * n))
        f_hat, f_se = _mean_stderr(z[:, j] / n)
        out.append(MuEstimate(n=int(n), mu_hat=float(mu_hat), mu_stderr=mu_se,
                              mu_hat_symmetric=float(mu_sym),
                              f_hat=f_hat, f_stderr=f_se))
    return out


# ---------------------------------------------------------------------------
# correlation decay

@dataclass(frozen=True)
class DecayFit:
    distances: np.ndarray
    mean_abs_cov: np.ndarray
    stderr: np.ndarray
    c2_hat: float
    c1_hat: float
    r_squared: float
    anchor: int


def _decay_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, anchor, dists = common["n"], common["anchor"], common["distances"]
    stop = anchor + int(dists[-1])
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        tables = forward_tables(d, p, kern)
        seg = shifted_log_partition_curve(anchor, d, p, kern, stop=stop)
        zf, zb = tables.log_zf, tables.log_zb
        log_z = zf[n]
        pj = math.exp(zf[anchor] + zb[anchor] - log_z)
        sites = anchor + dists
        joint = np.exp(zf[anchor] + seg[sites] + zb[sites] - log_z)
        single = np.exp(zf[sites] + zb[sites] - log_z)
        out.append(np.abs(joint - pj * single))
    return out


def fit_correlation_decay(p, kern, laws, n, replicas, distances, seed,
                          threads=1):
    """Disorder-averaged |cov(delta_j, delta_{j+d})| with an exponential
    fit in d; the anchor sits at j = N/4 so one segment pass covers every
    distance. Distances below 4 are excluded from the fit (contact-term
    contamination), as are rows whose mean sits at the floor of exact
    arithmetic (1e-14)."""
    dists = np.asarray(sorted(int(v) for v in distances))
    if dists.size == 0 or dists[0] <= 0 or dists[-1] >= 3 * n / 4:
        raise GuardError("distances must lie strictly inside (0, 3N/4)")
    anchor = n // 4
    if anchor < 1 or anchor + dists[-1] > n:
        raise GuardError("system too short for the requested distances")
    common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n,
                  anchor=anchor, distances=dists)
    rows = np.stack(_fan_out(_decay_task, common, replicas, threads))
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 \
        else np.zeros_like(mean)
    keep = (dists >= 4) & (mean > 1e-14)
    if keep.sum() < 2:
        raise GuardError("not enough usable distances for the decay fit")
    y = np.log(mean[keep])
    rel = np.where(mean[keep] > 0, se[keep] / mean[keep], 0.0)
    wts = 1.0 / np.maximum(rel, 1e-3) ** 2
    intercept, slope, r2 = _weighted_line_fit(dists[keep], y, wts)
    return DecayFit(distances=dists, mean_abs_cov=mean, stderr=se,
                    c2_hat=-slope, c1_hat=math.exp(intercept),
                    r_squared=r2, anchor=anchor)


# ---------------------------------------------------------------------------
# influence of the boundary

@dataclass(frozen=True)
class BoundaryDecay:
    k_values: np.ndarray
    distances: np.ndarray
    mean_abs_diff: np.ndarray
    stderr: np.ndarray
    rate: float
    r_squared: float


def _boundary_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, k_list = common["n"], common["k_list"]
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        tables = forward_tables(d, p, kern)
        zf, zb = tables.log_zf, tables.log_zb
        diffs = np.empty(len(k_list))
        for i, k in enumerate(k_list):
            m = k // 2
            if k == n:
                diffs[i] = 0.0  # same system, identically zero
                continue
            d_k = disorder_from_arrays(d.omega[1:k + 1], d.omega_tilde[1:k + 1],
                                       p.h)
            zb_k = forward_tables(d_k, p, kern).log_zb
            big = math.exp(zf[m] + zb[m] - zf[n])
            small = math.exp(zf[m] + zb_k[m] - zf[k])
            diffs[i] = abs(big - small)
        out.append(diffs)
    return out


def boundary_influence(p, kern, laws, n, k_list, replicas, seed, threads=1):
    """E|E_N(delta_{k/2}) - E_k(delta_{k/2})| for nested system sizes k,
    with an exponential fit against the distance k - k//2 (k = N is allowed
    and contributes an exact zero)."""
    k_list = sorted(int(k) for k in k_list)
    if not k_list or k_list[0] < 2 or k_list[-1] > n:
        raise GuardError("each k must satisfy 2 <= k <= N")
    common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n, k_list=k_list)
    rows = np.stack(_fan_out(_boundary_task, common, replicas, threads))
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 \
        else np.zeros_like(mean)
    dist = np.array([k - k // 2 for k in k_list], dtype=float)
    keep = mean > 1e-14
    if keep.sum() >= 2:
        rel = np.where(mean[keep] > 0, se[keep] / mean[keep], 0.0)
        wts = 1.0 / np.maximum(rel, 1e-3) ** 2
        _, slope, r2 = _weighted_line_fit(dist[keep], np.log(mean[keep]), wts)
        rate = -slope
    else:
        rate, r2 = math.nan, math.nan
    return BoundaryDecay(k_values=np.asarray(k_list), distances=dist,
                         mean_abs_diff=mean, stderr=se, rate=rate,
                         r_squared=r2)


# ---------------------------------------------------------------------------
# maximal excursion

@dataclass(frozen=True)
class MaxExcursionStudy:
    n: int
    replicas: int
    paths_per_replica: int
    mu_hat: float
    f_hat: float
    f_stderr: float
    localized_guard: bool
    deltas: np.ndarray            # (replicas, paths) maximal excursion lengths
    frac_within: dict             # eps -> fraction with Delta/log N in (1±eps)/mu
    tail: dict                    # C -> fraction with Delta > C log N


_DEFAULT_C_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def _maxexc_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, paths = common["n"], common["paths"]
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        tables = forward_tables(d, p, kern)
        deltas = np.empty(paths, dtype=int)
        for i in range(paths):
            rng = PathRng(seed, r, i)
            deltas[i] = max_excursion(sample_path(tables, d, p, kern, rng))
        out.append((float(tables.log_zf[n]),
                    float(softplus(-2.0 * p.lam * d.w_prefix[n])), deltas))
    return out


def max_excursion_study(p, kern, laws, n_ladder, replicas, paths_per_replica,
                        seed, eps_grid=(0.3, 0.5), c_grid=_DEFAULT_C_GRID,
                        threads=1):
    """Sample maximal excursions and report Delta_N / log N concentration.

    Expects localized parameters; the guard flag records whether
    f_hat > 5 stderr held. At mu_hat <= 0 the concentration fractions are
    reported as NaN (out of the theorem's domain)."""
    out = []
    for n in _validate_ladder(n_ladder):
        common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n,
                      paths=paths_per_replica)
        rows = _fan_out(_maxexc_task, common, replicas, threads)
        log_z = np.array([row[0] for row in rows])
        log_num = np.array([row[1] for row in rows])
        deltas = np.stack([row[2] for row in rows])
        f_hat, f_se = _mean_stderr(log_z / n)
        mu_hat = -(logsumexp(log_num - log_z) - math.log(replicas)) / n
        guard = f_hat > 5.0 * f_se
        ratio = deltas / math.log(n)
        frac_within = {}
        tail = {}
        for eps in eps_grid:
            if mu_hat > 0:
                lo, hi = (1.0 - eps) / mu_hat, (1.0 + eps) / mu_hat
                frac_within[eps] = float(np.mean((ratio >= lo) & (ratio <= hi)))
            else:
                frac_within[eps] = math.nan
        for c in c_grid:
            tail[c] = float(np.mean(deltas > c * math.log(n)))
        out.append(MaxExcursionStudy(
            n=n, replicas=replicas, paths_per_replica=paths_per_replica,
            mu_hat=float(mu_hat), f_hat=f_hat, f_stderr=f_se,
            localized_guard=bool(guard), deltas=deltas,
            frac_within=frac_within, tail=tail))
    return out


# ---------------------------------------------------------------------------
# per-excursion rate

@dataclass(frozen=True)
class ExcursionRateCheck:
    k: int
    s_values: np.ndarray
    mean_pmf: np.ndarray
    annealed_rate_raw: float
    annealed_rate: float          # kernel prefactor divided out
    replica_rates: np.ndarray     # kernel-corrected, one per replica
    f_hat: float
    f_stderr: float
    mu_hat: float


def _exc_rate_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, k = common["n"], common["k"]
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        tables = forward_tables(d, p, kern)
        law = excursion_law(k, tables, d, p, kern)
        out.append((float(tables.log_zf[n]),
                    float(softplus(-2.0 * p.lam * d.w_prefix[n])),
                    law.pmf.copy()))
    return out


def excursion_rate_check(p, kern, laws, n, k, replicas, seed,
                         s_min=4, s_max=None, threads=1):
    """Exponential rate of the excursion-length law at a bulk site.

    Per-replica rates estimate the almost-sure (free-energy) exponent; the
    rate of the disorder-averaged pmf estimates the annealed (mu) exponent.
    Fits are done on log(pmf(s) / (K(s) (s+1))): dividing out the kernel and
    the exact multiplicity of (left, right) splits of a bulk excursion
    removes the polynomial bias of the slope at desk scale. The raw-pmf
    slope is reported alongside.
    """
    if not 1 <= k <= n - 1:
        raise GuardError(f"site must satisfy 1 <= k <= n-1, got {k}")
    if s_max is None:
        s_max = min(n // 2, 64, k, n - k)
    if not 1 <= s_min < s_max <= min(k, n - k, n // 2):
        raise GuardError("s fit range must sit in the bulk around k")
    common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n, k=k)
    rows = _fan_out(_exc_rate_task, common, replicas, threads)
    log_z = np.array([row[0] for row in rows])
    log_num = np.array([row[1] for row in rows])
    pmfs = np.stack([row[2] for row in rows])
    s = np.arange(s_min, s_max + 1)
    base = kern.log_k[s] + np.log(s + 1.0)
    ones = np.ones_like(s, dtype=float)
    rates = np.empty(replicas)
    for i in range(replicas):
        _, slope, _ = _weighted_line_fit(s, np.log(pmfs[i, s]) - base, ones)
        rates[i] = -slope
    mean_pmf = pmfs.mean(axis=0)
    _, slope_corr, _ = _weighted_line_fit(s, np.log(mean_pmf[s]) - base, ones)
    _, slope_raw, _ = _weighted_line_fit(s, np.log(mean_pmf[s]), ones)
    f_hat, f_se = _mean_stderr(log_z / n)
    mu_hat = -(logsumexp(log_num - log_z) - math.log(replicas)) / n
    return ExcursionRateCheck(k=k, s_values=s, mean_pmf=mean_pmf,
                              annealed_rate_raw=-slope_raw,
                              annealed_rate=-slope_corr,
                              replica_rates=rates, f_hat=f_hat,
                              f_stderr=f_se, mu_hat=float(mu_hat))


# ---------------------------------------------------------------------------
# CLT for log Z

@dataclass(frozen=True)
class CltReport:
    n_ladder: np.ndarray
    var_over_n: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    ks_statistic: np.ndarray


def _normal_cdf(z):
    return 0.5 * np.array([math.erfc(-v / math.sqrt(2.0)) for v in z])


def clt_study(p, kern, laws, n_ladder, replicas, seed, threads=1):
    """Variance scaling and normality diagnostics of log Z_N over disorder.

    Moment diagnostics stabilize around >= 500 replicas. The KS distance is
    taken against the normal law with fitted mean and variance.
    """
    if replicas < 8:
        raise GuardError("clt study needs replicas >= 8")
    sites, z, _ = _gather_curves(p, kern, laws, n_ladder, replicas, seed, threads)
    var_over_n = np.empty(len(sites))
    skew = np.empty(len(sites))
    kurt = np.empty(len(sites))
    ks = np.empty(len(sites))
    for j, n in enumerate(sites):
        x = z[:, j]
        mean = float(np.mean(x))
        var1 = float(np.var(x, ddof=1))
        var_over_n[j] = var1 / n
        if var1 == 0.0:
            skew[j] = 0.0
            kurt[j] = 0.0
            ks[j] = math.nan
            continue
        c = x - mean
        m2 = float(np.mean(c ** 2))
        skew[j] = float(np.mean(c ** 3)) / m2 ** 1.5
        kurt[j] = float(np.mean(c ** 4)) / m2 ** 2 - 3.0
        std = math.sqrt(var1)
        u = np.sort((x - mean) / std)
        cdf = _normal_cdf(u)
        grid = np.arange(1, replicas + 1) / replicas
        ks[j] = float(np.max(np.maximum(np.abs(cdf - grid),
                                        np.abs(cdf - grid + 1.0 / replicas))))
    return CltReport(n_ladder=sites, var_over_n=var_over_n, skewness=skew,
                     excess_kurtosis=kurt, ks_statistic=ks)


# ---------------------------------------------------------------------------
# finite-size corrections

@dataclass(frozen=True)
class FiniteSizeReport:
    n_ladder: np.ndarray
    f_n: np.ndarray
    f_stderr: np.ndarray
    pair_n: np.ndarray            # pairs (N, 2N) labelled by N
    scaled_gap: np.ndarray        # estimate of N (f_2N - f_N)
    gap_stderr: np.ndarray
    diff_mean: np.ndarray         # per-pair mean of f_2N - f_N (same replicas)
    diff_stderr: np.ndarray
    verdict: str


def _finite_size_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    sites = common["sites"]
    n_top = int(sites[-1])
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n_top, p.h, seed, r)
        zf = log_partition_curve(d, p, kern)
        xis = np.empty(len(sites) - 1)
        for i, n in enumerate(sites[:-1]):
            n = int(n)
            window = disorder_from_arrays(d.omega[n + 1:2 * n + 1],
                                          d.omega_tilde[n + 1:2 * n + 1], p.h)
            z_shift = log_partition_curve(window, p, kern)[n]
            xi = zf[2 * n] - zf[n] - z_shift
            if xi < -1e-8 * max(1.0, abs(zf[2 * n])):
                raise NumericsError(f"superadditivity violated: xi={xi}")
            xis[i] = xi
        out.append((zf[sites].copy(), xis))
    return out


def _finite_size_verdict(gaps, errs):
    if len(gaps) < 3:
        return VERDICT_INCONCLUSIVE
    g = np.asarray(gaps[-3:], dtype=float)
    e = np.asarray(errs[-3:], dtype=float)
    if np.any(g <= 0):
        return VERDICT_INCONCLUSIVE
    tol01 = max(2.0 * math.hypot(e[0], e[1]), 1e-9 * abs(g[1]))
    tol12 = max(2.0 * math.hypot(e[1], e[2]), 1e-9 * abs(g[2]))
    inc01, inc12 = g[1] - g[0], g[2] - g[1]
    within_factor_two = g.max() <= 2.0 * g.min()
    if within_factor_two and inc01 <= tol01 and inc12 <= tol12:
        return VERDICT_BOUNDED
    if inc01 > tol01 and inc12 > tol12:
        return VERDICT_LOG_GROWTH
    return VERDICT_INCONCLUSIVE


def finite_size_study(p, kern, laws, n_ladder, replicas, seed, threads=1):
    """Scaled free-energy gaps N (f_2N - f_N) along a doubling ladder.

    The gap is estimated per replica through the pinned-midpoint identity
    N (f_2N - f_N) = -1/2 E log P_2N(S_N = 0), which has O(1) variance,
    rather than by differencing two independent f estimates."""
    sites = np.asarray(_validate_ladder(n_ladder))
    if np.any(sites[1:] != 2 * sites[:-1]):
        raise GuardError("finite-size ladder must double at every rung")
    if len(sites) < 5:
        raise GuardError("need a ladder of at least 4 doublings")
    common = dict(p=p, kern=kern, laws=laws, seed=seed, sites=sites)
    rows = _fan_out(_finite_size_task, common, replicas, threads)
    z = np.stack([row[0] for row in rows])
    xi = np.stack([row[1] for row in rows])
    f_n = np.empty(len(sites))
    f_se = np.empty(len(sites))
    for j, n in enumerate(sites):
        f_n[j], f_se[j] = _mean_stderr(z[:, j] / n)
    gaps = np.empty(len(sites) - 1)
    gap_se = np.empty(len(sites) - 1)
    diff = np.empty(len(sites) - 1)
    diff_se = np.empty(len(sites) - 1)
    for i, n in enumerate(sites[:-1]):
        gaps[i], gap_se[i] = _mean_stderr(0.5 * xi[:, i])
        per = z[:, i + 1] / (2 * n) - z[:, i] / n
        diff[i], diff_se[i] = _mean_stderr(per)
    verdict = _finite_size_verdict(gaps, gap_se)
    return FiniteSizeReport(n_ladder=sites, f_n=f_n, f_stderr=f_se,
                            pair_n=sites[:-1].copy(), scaled_gap=gaps,
                            gap_stderr=gap_se, diff_mean=diff,
                            diff_stderr=diff_se, verdict=verdict)


# ---------------------------------------------------------------------------
# entropy-shift upper bound on mu

@dataclass(frozen=True)
class EntropyBoundReport:
    epsilon_grid: np.ndarray
    bound_values: np.ndarray
    bound_stderr: np.ndarray
    best_bound: float
    best_epsilon: float
    mu_hat: float
    f_hat: float
    f_stderr: float
    gap: float


def _entropy_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, eps_grid = common["n"], common["eps_grid"]
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        z_eps = np.empty(len(eps_grid))
        for i, eps in enumerate(eps_grid):
            p_eps = p.replace(h_tilde=p.h_tilde - eps)
            z_eps[i] = log_partition_curve(d, p_eps, kern)[n]
        out.append((z_eps, float(softplus(-2.0 * p.lam * d.w_prefix[n]))))
    return out


def entropy_bound(p, kern, laws, replicas, n, epsilon_grid, seed, threads=1):
    """Gaussian-shift upper bound on mu: min_eps eps^2/2 + F(h_tilde - eps).

    The relative entropy per site of shifting a standard Gaussian mean by
    -eps is exactly eps^2/2, so each grid point bounds mu from above; a
    best bound strictly below F witnesses mu < F. The same replicas are
    reused across the grid (the bound curve is smooth in eps)."""
    if laws[1] != DisorderLaw.GAUSSIAN:
        raise ConfigError("entropy bound requires Gaussian omega_tilde")
    if p.lam_tilde <= 0:
        raise ConfigError("entropy bound requires lam_tilde > 0")
    eps_grid = np.asarray(sorted(float(e) for e in epsilon_grid))
    if eps_grid.size == 0:
        raise GuardError("epsilon grid must be non-empty")
    # eps = 0 is always evaluated: it is the base point for f_hat and mu_hat
    eps_full = eps_grid if 0.0 in eps_grid else np.sort(np.append(eps_grid, 0.0))
    common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n, eps_grid=eps_full)
    rows = _fan_out(_entropy_task, common, replicas, threads)
    z = np.stack([row[0] for row in rows])            # (R, |eps_full|)
    log_num = np.array([row[1] for row in rows])
    zero_col = int(np.searchsorted(eps_full, 0.0))
    f_hat, f_se = _mean_stderr(z[:, zero_col] / n)
    mu_hat = -(logsumexp(log_num - z[:, zero_col]) - math.log(replicas)) / n
    cols = np.searchsorted(eps_full, eps_grid)
    bounds = np.empty(eps_grid.size)
    bound_se = np.empty(eps_grid.size)
    for i, (eps, c) in enumerate(zip(eps_grid, cols)):
        f_i, se_i = _mean_stderr(z[:, c] / n)
        bounds[i] = 0.5 * eps * eps + f_i
        bound_se[i] = se_i
    best = int(np.argmin(bounds))
    return EntropyBoundReport(epsilon_grid=eps_grid, bound_values=bounds,
                              bound_stderr=bound_se,
                              best_bound=float(bounds[best]),
                              best_epsilon=float(eps_grid[best]),
                              mu_hat=float(mu_hat), f_hat=f_hat,
                              f_stderr=f_se,
                              gap=float(bounds[best] - mu_hat))


# ---------------------------------------------------------------------------
# two-replica meet probability

@dataclass(frozen=True)
class MeetDecay:
    window_sizes: np.ndarray
    mean_prob: np.ndarray
    stderr: np.ndarray
    rate: float
    r_squared: float


def _meet_task(task):
    common, chunk = task
    p, kern, laws, seed = (common["p"], common["kern"], common["laws"],
                           common["seed"])
    n, windows, pairs = common["n"], common["windows"], common["pairs"]
    out = []
    for r in chunk:
        d = _draw_disorder(laws, n, p.h, seed, r)
        tables = forward_tables(d, p, kern)
        freq = np.zeros(len(windows))
        for i in range(pairs):
            r1 = sample_path(tables, d, p, kern, PathRng(seed, r, 2 * i))
            r2 = sample_path(tables, d, p, kern, PathRng(seed, r, 2 * i + 1))
            shared = sorted(set(r1.returns) & set(r2.returns))
            for wi, s in enumerate(windows):
                a = (n - s) // 2
                b = a + s
                if not any(a < c < b for c in shared):
                    freq[wi] += 1.0
        out.append(freq / pairs)
    return out


def meet_probability(p, kern, laws, n, window_sizes, replicas,
                     paths_per_replica, seed, threads=1):
    """P over two independent paths of never meeting at zero inside a
    centered window, estimated per disorder sample and averaged, with an
    exponential fit in the window size."""
    windows = sorted(int(s) for s in window_sizes)
    if not windows or windows[0] < 1 or windows[-1] > n:
        raise GuardError("window sizes must lie in 1..N")
    if paths_per_replica < 1:
        raise GuardError("need at least one path pair per replica")
    common = dict(p=p, kern=kern, laws=laws, seed=seed, n=n,
                  windows=windows, pairs=paths_per_replica)
    rows = np.stack(_fan_out(_meet_task, common, replicas, threads))
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 \
        else np.zeros_like(mean)
    keep = mean > 0
    warr = np.asarray(windows, dtype=float)
    if keep.sum() >= 2:
        rel = np.where(mean[keep] > 0, se[keep] / np.maximum(mean[keep], 1e-300), 0.0)
        wts = 1.0 / np.maximum(rel, 1e-3) ** 2
        _, slope, r2 = _weighted_line_fit(warr[keep], np.log(mean[keep]), wts)
        rate = -slope
    else:
        rate, r2 = math.nan, math.nan
    return MeetDecay(window_sizes=np.asarray(windows), mean_prob=mean,
                     stderr=se, rate=rate, r_squared=r2)


# ---------------------------------------------------------------------------
# phase scan

_AXES = ("lam", "h", "lam_tilde", "h_tilde")


@dataclass(frozen=True)
class PhasePoint:
    axis1_value: float
    axis2_value: float
    f_hat: float
    stderr: float
    localized: bool


def phase_scan(axis1, axis2, values1, values2, base_params, kern, laws, n,
               replicas, seed, threads=1):
    """Classify grid points as localized via F_hat > max(3 stderr, 1e-3).

    The floor guards near-critical ambiguity; the paper gives no finite-N
    criterion."""
    if axis1 not in _AXES or axis2 not in _AXES or axis1 == axis2:
        raise ConfigError(f"axes must be two distinct of {_AXES}")
    values1 = list(values1)
    values2 = list(values2)
    if not values1 or not values2:
        raise GuardError("phase grid must be non-empty")
    out = []
    for v1 in values1:
        for v2 in values2:
            params = base_params.replace(**{axis1: v1, axis2: v2})
            _, z, _ = _gather_curves(params, kern, laws, [n], replicas, seed,
                                     threads)
            f_hat, se = _mean_stderr(z[:, 0] / n)
            localized = f_hat > max(3.0 * se, _LOCALIZED_FLOOR)
            out.append(PhasePoint(axis1_value=float(v1), axis2_value=float(v2),
                                  f_hat=f_hat, stderr=se,
                                  localized=bool(localized)))
    return out
