"""Exact per-sample polymer-measure quantities.

All probabilities here are exact functionals of the partition tables (no
Monte Carlo): contact profiles, negative-sign occupation, joint and
truncated (connected) correlations, the law of the excursion covering a
site, and exact backward sampling of whole paths from the same tables.

Only the return set and the excursion signs are ever materialized; the
interaction depends on nothing else.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .disorder import DisorderSample, PathRng
from .errors import GuardError, NumericsError
from .kernel import ReturnKernel
from .logspace import sigmoid
from .partition import (ModelParams, PartitionTables, _log_weight_core,
                        segment_tables)


@dataclass(frozen=True)
class ContactProfile:
    """p_contact[k] = P(S_k = 0); p_neg[k] = P(site k sits in a
    negative-sign excursion). Index 0 is the pinned origin."""

    p_contact: np.ndarray
    p_neg: np.ndarray


@dataclass(frozen=True)
class PathSample:
    """One exactly-sampled path: return sites (ascending, ending at n) and
    the sign of the excursion closing at each return."""

    returns: tuple
    signs: tuple


@dataclass(frozen=True)
class ExcursionLaw:
    """pmf[s] = P(the excursion covering site k has length s)."""

    k: int
    pmf: np.ndarray


def _excursion_probability_scan(tables, d, p, kern, weight_neg):
    """Accumulate per-site sums of excursion probabilities, O(N^2).

    For every excursion (u, t] the probability of seeing exactly that
    excursion is Zf[u] * K * coin * zeta_t * Zb[t] / Z_n; the contribution
    (optionally weighted by the excursion's negative-sign fraction) is
    spread over the covered sites u+1..t with a difference array.
    """
    n = tables.n
    zf, zb, lz = tables.log_zf, tables.log_zb, tables.log_zeta_sites
    w = d.w_prefix
    lk = kern.log_k
    diff = np.zeros(n + 2)
    for u in range(n):
        dw = w[u + 1:] - w[u]
        logp = (zf[u] + _log_weight_core(lk[1:n - u + 1], dw, p.lam)
                + lz[u + 1:] + zb[u + 1:] - zf[n])
        contrib = np.exp(logp)
        if weight_neg:
            contrib = contrib * sigmoid(-2.0 * p.lam * dw)
        diff[u + 1] += contrib.sum()
        diff[u + 2:] -= contrib
    return np.cumsum(diff)[:n + 1]


def contact_profile(tables: PartitionTables, d: DisorderSample,
                    p: ModelParams, kern: ReturnKernel) -> ContactProfile:
    """Exact contact and negative-sign profiles for one sample."""
    n = tables.n
    p_contact = np.exp(tables.log_zf + tables.log_zb - tables.log_zf[n])
    p_neg = _excursion_probability_scan(tables, d, p, kern, weight_neg=True)
    return ContactProfile(p_contact=p_contact, p_neg=p_neg)


def excursion_cover(tables: PartitionTables, d: DisorderSample,
                    p: ModelParams, kern: ReturnKernel) -> np.ndarray:
    """Total excursion probability covering each site; identically 1 for
    every site >= 1 (partition of unity over excursions)."""
    return _excursion_probability_scan(tables, d, p, kern, weight_neg=False)


def joint_contact_probability(sites, tables: PartitionTables,
                              d: DisorderSample, p: ModelParams,
                              kern: ReturnKernel) -> float:
    """P(S_site = 0 simultaneously at every listed site), exactly."""
    sites = list(sites)
    if not sites or any(not 1 <= s <= tables.n for s in sites):
        raise GuardError("sites must lie in 1..n")
    if any(b <= a for a, b in zip(sites[:-1], sites[1:])):
        raise GuardError("sites must be strictly increasing")
    log_p = (tables.log_zf[sites[0]] + tables.log_zb[sites[-1]]
             - tables.log_zf[tables.n])
    for a, b in zip(sites[:-1], sites[1:]):
        log_p += segment_tables(a, d, p, kern, tables)[b]
    return float(np.exp(log_p))


def _set_partitions(items):
    if len(items) == 1:
        yield [items]
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]
        yield [[head]] + part


def ursell(sites, joints) -> float:
    """Truncated correlation of the contact indicators at 2..4 sites.

    ``joints`` maps every sorted tuple of a nonempty subset of ``sites`` to
    the joint contact probability. The partition sum
    sum_P (-1)^{|P|-1} (|P|-1)! prod_{B in P} E[prod_B delta] is evaluated
    literally (15 partitions at order 4).
    """
    sites = sorted(sites)
    if not 2 <= len(sites) <= 4:
        raise GuardError("ursell order must be between 2 and 4")
    if len(set(sites)) != len(sites):
        raise GuardError("sites must be distinct")
    fact = (1.0, 1.0, 2.0, 6.0)  # (|P|-1)! for |P| up to 4
    total = 0.0
    for part in _set_partitions(sites):
        prod = 1.0
        for block in part:
            prod *= joints[tuple(sorted(block))]
        total += (-1.0) ** (len(part) - 1) * fact[len(part) - 1] * prod
    return total


def ursell_from_tables(sites, tables, d, p, kern) -> float:
    """Convenience wrapper computing all needed subset joints exactly."""
    sites = sorted(sites)
    joints = {}
    for r in range(1, len(sites) + 1):
        for sub in combinations(sites, r):
            joints[sub] = joint_contact_probability(sub, tables, d, p, kern)
    return ursell(sites, joints)


def excursion_law(k: int, tables: PartitionTables, d: DisorderSample,
                  p: ModelParams, kern: ReturnKernel) -> ExcursionLaw:
    """Exact pmf of the length of the excursion covering site k.

    The covering excursion runs between returns k-l and k+r with l >= 0,
    r >= 1; its probability is the single-excursion bridge through the
    forward and backward tables.
    """
    n = tables.n
    if not 1 <= k <= n - 1:
        raise GuardError(f"site must satisfy 1 <= k <= n-1, got {k}")
    zf, zb, lz = tables.log_zf, tables.log_zb, tables.log_zeta_sites
    w = d.w_prefix
    lk = kern.log_k
    pmf = np.zeros(n + 1)
    t = np.arange(k + 1, n + 1)
    for u in range(k + 1):
        logp = (zf[u] + _log_weight_core(lk[k + 1 - u:n - u + 1],
                                         w[k + 1:] - w[u], p.lam)
                + lz[k + 1:] + zb[k + 1:] - zf[n])
        pmf[t - u] += np.exp(logp)
    total = pmf.sum()
    if abs(total - 1.0) > 1e-9:
        raise NumericsError(f"excursion law at k={k} sums to {total}")
    return ExcursionLaw(k=k, pmf=pmf)


def sample_path(tables: PartitionTables, d: DisorderSample, p: ModelParams,
                kern: ReturnKernel, rng: PathRng) -> PathSample:
    """Draw one path exactly from the polymer measure by backward sampling.

    From the pinned endpoint, the previous return u is drawn with
    probability proportional to Zf[u] * K(t-u) * coin(u, t); each excursion
    sign is then negative with its exact conditional probability.
    """
    n = tables.n
    zf = tables.log_zf
    w = d.w_prefix
    lk = kern.log_k
    t = n
    rev_returns = []
    rev_signs = []
    while t > 0:
        x = zf[:t] + _log_weight_core(lk[t:0:-1], w[t] - w[:t], p.lam)
        m = np.max(x)
        cdf = np.cumsum(np.exp(x - m))
        target = rng.uniform() * cdf[-1]
        u = int(np.searchsorted(cdf, target))
        if u >= t:
            u = t - 1
        frac_neg = sigmoid(-2.0 * p.lam * (w[t] - w[u]))
        sign = -1 if rng.uniform() < frac_neg else 1
        rev_returns.append(t)
        rev_signs.append(sign)
        t = u
    return PathSample(returns=tuple(reversed(rev_returns)),
                      signs=tuple(reversed(rev_signs)))


def max_excursion(path: PathSample) -> int:
    """Largest gap between consecutive elements of {0} union returns."""
    prev = 0
    best = 0
    for r in path.returns:
        best = max(best, r - prev)
        prev = r
    return best


def log_z_gradients(tables: PartitionTables, d: DisorderSample,
                    p: ModelParams, kern: ReturnKernel) -> dict:
    """Analytic gradient of log Z in all four couplings.

    d/dh_tilde = lam_tilde * sum E[delta_n]; d/dlam_tilde =
    sum (omega_tilde + h_tilde) E[delta_n]; d/dh = -2 lam sum E[Delta_n];
    d/dlam = -2 sum (omega + h) E[Delta_n].
    """
    prof = contact_profile(tables, d, p, kern)
    pc = prof.p_contact[1:]
    pn = prof.p_neg[1:]
    return {
        "lam": float(-2.0 * np.sum((d.omega[1:] + p.h) * pn)),
        "h": float(-2.0 * p.lam * np.sum(pn)),
        "lam_tilde": float(np.sum((d.omega_tilde[1:] + p.h_tilde) * pc)),
        "h_tilde": float(p.lam_tilde * np.sum(pc)),
    }
