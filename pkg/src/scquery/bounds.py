"""Sample-size thresholds and query lower bounds.

Thresholds use natural logarithms. Lower bounds count information in bits:
every logarithm there, including log k and log Delta, is base 2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dithered import g_ell, q_function
from .errors import InvalidParams
from .model import Params, binom, overlap_distribution_iid, overlap_distribution_uniform

SCENARIOS = (
    "direct-disjoint",
    "direct-uniform",
    "direct-iid",
    "quantized-uniform",
    "quantized-iid",
    "unknown-q",
    "dithered",
    "worstcase",
    "worstcase-delta2",
)

# Which lower bound applies to each scenario (None: no bound is available).
LOWER_BOUND_OF = {
    "direct-disjoint": None,
    "direct-uniform": ("uniform", "direct"),
    "direct-iid": ("iid", "direct"),
    "quantized-uniform": ("uniform", "quantized"),
    "quantized-iid": ("iid", "quantized"),
    "unknown-q": ("uniform", "quantized"),
    "dithered": ("uniform", "dithered"),
    "worstcase": None,
    "worstcase-delta2": None,
}

# Query accounting mode per scenario: basis (+k per element) or full (+|S|).
ACCOUNTING = {
    "direct-disjoint": "basis",
    "direct-uniform": "basis",
    "direct-iid": "basis",
    "quantized-uniform": "full",
    "quantized-iid": "full",
    "unknown-q": "full",
    "dithered": "full",
    "worstcase": "full",
    "worstcase-delta2": "full",
}


def binary_entropy(x):
    if not 0.0 <= x <= 1.0:
        raise InvalidParams(f"binary entropy argument {x} outside [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def binary_convolution(p, q):
    for v in (p, q):
        if not 0.0 <= v <= 1.0:
            raise InvalidParams(f"convolution argument {v} outside [0, 1]")
    return (1 - p) * q + p * (1 - q)


def _log_conf(n, eps):
    """ln(2 n^(2 + eps))."""
    return math.log(2) + (2 + eps) * math.log(n)


def s_uniform_direct(k, delta, n, c1=2.0, c2=1.0):
    return binom(k, delta) / binom(k - delta, delta - 1) * (1 + c1 * math.log(k) + c2 * math.log(n))


def s_iid_direct(k, p, n, c3=1.0):
    m = max(p, 1 - p)
    if m >= 1.0:
        return math.inf
    return k - 1 - (math.log(k) + c3 * math.log(n)) / math.log(m)


def s_quantized_uniform(k, delta, q, n, eps, factor=2.0):
    sep = binom(k - 2 * delta + 1, delta) - binom(k - 2 * delta, delta)
    if sep == 0 or q >= 0.5:
        return math.inf
    return factor * (1 - 2 * q) ** -4 * binom(k, delta) ** 2 * sep**-2 * _log_conf(n, eps)


def s_quantized_iid(k, p, q, n, eps):
    if p == 0 or p == 1 or q >= 0.5:
        return math.inf
    return 2 * p**-2 * (1 - 2 * q) ** -4 * (1 - p) ** (2 - 2 * k) * _log_conf(n, eps)


def s_dithered(k, delta, sigma, n, eps):
    gap = abs(g_ell(k, delta, sigma, 1) - g_ell(k, delta, sigma, 0))
    if gap < 1e-300:
        return math.inf
    return 2 * _log_conf(n, eps) / gap**2


def s_worstcase(k, n, alpha, delta2=False):
    if alpha <= 0:
        return math.inf
    return ((3 if delta2 else 1) * math.log(k) + math.log(n)) / alpha


def m_disjoint(n, n_min, k, eps):
    return (n / n_min) * (math.log(k) + eps * math.log(n))


def sufficient_S(scenario, params: Params, alpha=None, n_min=None):
    """Sufficient sample size |S| for a scenario (may be inf)."""
    P = params
    if scenario == "direct-disjoint":
        return m_disjoint(P.n, n_min if n_min else P.n / P.k, P.k, P.epsilon)
    if scenario == "direct-uniform":
        return s_uniform_direct(P.k, P.delta, P.n, P.c1, P.c2)
    if scenario == "direct-iid":
        return s_iid_direct(P.k, P.p, P.n, P.c3)
    if scenario == "quantized-uniform":
        return s_quantized_uniform(P.k, P.delta, P.q, P.n, P.epsilon)
    if scenario == "unknown-q":
        return s_quantized_uniform(P.k, P.delta, P.q, P.n, P.epsilon, factor=18.0)
    if scenario == "quantized-iid":
        return s_quantized_iid(P.k, P.p, P.q, P.n, P.epsilon)
    if scenario == "dithered":
        return s_dithered(P.k, P.delta, P.sigma, P.n, P.epsilon)
    if scenario in ("worstcase", "worstcase-delta2"):
        if alpha is None:
            raise InvalidParams("worst-case thresholds need alpha")
        return s_worstcase(P.k, P.n, alpha, scenario == "worstcase-delta2")
    raise InvalidParams(f"unknown scenario {scenario!r}")


def queries_total(s_size, n, k, mode):
    s = int(s_size)
    if not 0 <= s <= n:
        raise InvalidParams(f"|S|={s} outside [0, n={n}]")
    per = k if mode == "basis" else s
    if mode not in ("basis", "full"):
        raise InvalidParams(f"unknown accounting mode {mode!r}")
    return math.comb(s, 2) + per * (n - s)


def sample_size(scenario, params: Params, alpha=None, n_min=None):
    """ceil of the threshold, capped to n (inf maps to n)."""
    s = sufficient_S(scenario, params, alpha, n_min)
    return params.n if not math.isfinite(s) else int(min(params.n, max(1, math.ceil(s))))


# --- lower bounds (bits) ---------------------------------------------------


def _dithered_information(dist, sigma):
    """H2(E Q) - E H2(Q) for an overlap law ``dist`` indexed by overlap value."""
    qs = q_function(np.arange(len(dist)) / sigma)
    mean_q = float(np.dot(dist, qs))
    return binary_entropy(min(max(mean_q, 0.0), 1.0)) - float(
        np.dot(dist, [binary_entropy(float(v)) for v in qs])
    )


def necessary_omega(ensemble, oracle, params: Params, delta_err):
    """Query lower bound for exact recovery with error probability delta_err."""
    n, k = params.n, params.k
    if not 0.0 <= delta_err < 1.0:
        raise InvalidParams(f"target error {delta_err} outside [0, 1)")
    if ensemble == "iid":
        num = binary_entropy(params.p) - delta_err
    elif ensemble == "uniform":
        num = math.log2(binom(k, params.delta)) / k - delta_err
    else:
        raise InvalidParams(f"unknown ensemble {ensemble!r}")
    if num <= 0:
        return 0.0
    if oracle == "direct":
        den = math.log2(k) if ensemble == "iid" else math.log2(params.delta)
    elif oracle == "quantized":
        if ensemble == "iid":
            x = 1 - (1 - params.p**2) ** k
        else:
            x = binom(k - params.delta, params.delta) / binom(k, params.delta)
        den = binary_entropy(binary_convolution(params.q, x)) - binary_entropy(params.q)
    elif oracle == "dithered":
        dist = overlap_distribution_iid(k, params.p) if ensemble == "iid" else overlap_distribution_uniform(k, params.delta)
        den = _dithered_information(dist, params.sigma)
    else:
        raise InvalidParams(f"unknown oracle {oracle!r}")
    if den <= 0:
        raise InvalidParams(f"nonpositive information per query ({den}) for {ensemble}/{oracle}")
    return n * k * num / den


def necessary_for_scenario(scenario, params: Params, delta_err=0.01):
    which = LOWER_BOUND_OF.get(scenario)
    if which is None:
        return None
    return necessary_omega(which[0], which[1], params, delta_err)


@dataclass
class BoundReport:
    scenario: str
    s_sufficient: float
    omega_sufficient: float
    omega_necessary: float | None
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        for key in ("s_sufficient", "omega_sufficient", "omega_necessary"):
            v = d[key]
            if isinstance(v, float) and not math.isfinite(v):
                d[key] = "inf"
        return d


def bound_report(scenario, params: Params, delta_err=0.01, alpha=None, n_min=None) -> BoundReport:
    s = sufficient_S(scenario, params, alpha, n_min)
    if math.isfinite(s):
        s_capped = min(params.n, math.ceil(s))
        omega = float(queries_total(s_capped, params.n, params.k, ACCOUNTING[scenario]))
    else:
        omega = math.inf
    inputs = asdict(params)
    inputs.update({"delta_err": delta_err, "alpha": alpha, "n_min": n_min})
    return BoundReport(scenario, s, omega, necessary_for_scenario(scenario, params, delta_err), inputs)
