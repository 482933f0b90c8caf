"""Seeded experiment sweeps, scoring and result files."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from . import bounds
from .direct import find_membership_disjoint, find_similarity_direct, membership_sample_size
from .dithered import recover_dithered
from .errors import InvalidInput, InvalidParams, ScqError
from .model import (
    EXTERNAL,
    IID,
    UNIFORM,
    ClusteringMatrix,
    Params,
    gram,
    sample_iid,
    sample_planted,
    sample_uniform,
)
from .oracle import LogOracle, OracleHandle, OracleKind
from .quantized import recover_iid_quantized, recover_uniform_quantized, recover_unknown_q
from .worstcase import exclusive_counts, recover_worstcase, verify_separation

STREAMS = {"ensemble": 0, "noise": 1, "sampling": 2}
GRID_KEYS = ("n", "k", "delta", "p", "q", "sigma", "s_size")
CONFIG_KEYS = (
    "scenario", "n", "k", "delta", "p", "q", "sigma", "s_size", "trials", "seed",
    "out", "dataset", "epsilon", "alpha_override", "workers", "format",
)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentConfig:
    """Sweep description; list-valued keys are crossed in ``GRID_KEYS`` order."""

    scenario: str
    n: list = field(default_factory=lambda: [1000])
    k: list = field(default_factory=lambda: [6])
    delta: list = field(default_factory=lambda: [2])
    p: list = field(default_factory=lambda: [0.5])
    q: list = field(default_factory=lambda: [0.0])
    sigma: list = field(default_factory=lambda: [1.0])
    s_size: list = field(default_factory=lambda: ["auto"])
    trials: int = 1
    seed: int = 0
    out: str | None = None
    dataset: str | None = None
    epsilon: float = 1.0
    alpha_override: float | None = None
    workers: int = 1
    format: str = "csv"

    def __post_init__(self):
        if self.scenario not in bounds.SCENARIOS:
            raise InvalidParams(f"unknown scenario {self.scenario!r}; choose from {', '.join(bounds.SCENARIOS)}")
        for key in GRID_KEYS:
            vals = _as_list(getattr(self, key))
            if not vals:
                raise InvalidParams(f"grid key {key!r} is empty")
            setattr(self, key, vals)
        if int(self.trials) < 1:
            raise InvalidParams("trials must be at least 1")
        self.trials = int(self.trials)
        self.seed = int(self.seed)

    @classmethod
    def from_mapping(cls, data):
        unknown = set(data) - set(CONFIG_KEYS)
        if unknown:
            raise InvalidParams(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise InvalidParams("config file must hold a flat mapping")
        return cls.from_mapping(data)

    def grid(self):
        combos = itertools.product(*(getattr(self, key) for key in GRID_KEYS))
        return [dict(zip(GRID_KEYS, c)) for c in combos]


@dataclass
class TrialResult:
    scenario: str
    point: int
    trial: int
    n: int
    k: int
    delta: int
    p: float
    q: float
    sigma: float
    s_size: int
    alpha: float | None
    queries: int
    queries_expected: int | None
    omega_necessary: float | None
    success: bool
    gram_error: int | None
    correct_inferences: int | None
    wrong_inferences: int | None
    support_accuracy: float | None
    failure: str
    wall_time: float = 0.0


RESULT_FIELDS = [f.name for f in fields(TrialResult)]


@dataclass
class TrialContext:
    scenario: str
    point: int
    trial: int
    params: Params
    truth: ClusteringMatrix
    oracle: OracleHandle
    s_size: int
    sample_seed: np.random.SeedSequence
    alpha: float | None
    n_min: int | None = None


def stream(root_seed, point, trial, name):
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=(int(point), int(trial), STREAMS[name]))


def _noise_key(seq):
    a, b = seq.generate_state(2, dtype=np.uint32)
    return (int(a) << 32) | int(b)


def _oracle_kind(scenario, point):
    if scenario.startswith("direct"):
        return OracleKind.direct()
    if scenario == "dithered":
        return OracleKind.dithered(point["sigma"])
    if scenario.startswith("worstcase"):
        return OracleKind.quantized(0.0)
    return OracleKind.quantized(point["q"])


def _disjoint_truth(n, k, rng):
    labels = rng.permutation(np.arange(n) % k)
    a = np.zeros((n, k), dtype=np.uint8)
    a[np.arange(n), labels] = 1
    return ClusteringMatrix(a, ensemble=EXTERNAL, delta=1)


def prepare_trial(scenario, point, root_seed, point_index, trial, epsilon=1.0,
                  alpha_override=None, dataset_truth=None, log=False) -> TrialContext:
    """Truth, oracle and sample size for one trial; every random stream is named."""
    n, k, delta = int(point["n"]), int(point["k"]), int(point["delta"])
    ens_rng = np.random.default_rng(stream(root_seed, point_index, trial, "ensemble"))
    ensemble = IID if scenario.endswith("iid") else UNIFORM
    if dataset_truth is not None:
        truth = dataset_truth
        n, k = truth.n, truth.k
        delta = truth.delta or delta
    elif scenario == "direct-disjoint":
        delta = 1
        truth = _disjoint_truth(n, k, ens_rng)
    elif scenario.startswith("worstcase"):
        truth = sample_planted(n, k, delta, alpha_override if alpha_override else 0.01, ens_rng)
    elif ensemble == IID:
        truth = sample_iid(Params(n=n, k=k, p=point["p"]), ens_rng)
    else:
        truth = sample_uniform(Params(n=n, k=k, delta=delta), ens_rng)
    q = point["q"] if not scenario.startswith(("direct", "worstcase", "dithered")) else 0.0
    params = Params(n=n, k=k, delta=delta, p=point["p"], q=q, sigma=point["sigma"],
                    epsilon=epsilon, ensemble=ensemble)
    oracle = OracleHandle(truth, _oracle_kind(scenario, point),
                          _noise_key(stream(root_seed, point_index, trial, "noise")), log=log)
    alpha = None
    n_min = None
    if scenario.startswith("worstcase"):
        mode = "delta2" if scenario == "worstcase-delta2" else "general"
        alpha = alpha_override if alpha_override else verify_separation(truth, mode)
    if scenario == "direct-disjoint":
        n_min = int(truth.entries.sum(axis=0).min())
    s = point["s_size"]
    if s in (None, "auto"):
        if scenario == "direct-disjoint":
            s = membership_sample_size(n, n_min, k, epsilon)
        else:
            s = bounds.sample_size(scenario, params, alpha=alpha)
    s = int(min(int(s), n))
    return TrialContext(scenario, point_index, trial, params, truth, oracle, s,
                        stream(root_seed, point_index, trial, "sampling"), alpha, n_min)


def run_recovery(ctx: TrialContext):
    """Dispatch to the scenario's algorithm; returns (result, error)."""
    sc, o, P, s, seed = ctx.scenario, ctx.oracle, ctx.params, ctx.s_size, ctx.sample_seed
    try:
        if sc == "direct-disjoint":
            assignment = find_membership_disjoint(o, P.n, P.k, ctx.n_min, P.epsilon, seed)
            return assignment, None
        if sc in ("direct-uniform", "direct-iid"):
            return find_similarity_direct(o, P, s, seed), None
        if sc == "quantized-uniform":
            return recover_uniform_quantized(o, P, s, seed), None
        if sc == "unknown-q":
            return recover_unknown_q(o, P, s, seed), None
        if sc == "quantized-iid":
            return recover_iid_quantized(o, P, s, seed), None
        if sc == "dithered":
            return recover_dithered(o, P, s, seed), None
        if sc in ("worstcase", "worstcase-delta2"):
            return recover_worstcase(o, P.k, s, seed, delta2_mode=sc == "worstcase-delta2"), None
    except ScqError as exc:
        return exc.partial, exc
    raise InvalidParams(f"unknown scenario {sc!r}")


def gram_error(estimate, truth):
    """Number of differing off-diagonal entries (a flipped symmetric pair counts 2)."""
    E, T = np.asarray(estimate), np.asarray(truth)
    if E.shape != T.shape:
        raise InvalidInput(f"shape mismatch {E.shape} vs {T.shape}")
    diff = E != T
    np.fill_diagonal(diff, False)
    return int(diff.sum())


def inference_scores(result, G):
    """(correct, wrong) over inferred S x S pairs (i < j) and rest x S pairs."""
    if result is None or result.within is None:
        return None, None
    S, rest = result.sample, result.rest
    iu = np.triu_indices(S.size, k=1)
    ok = int(np.sum(result.within[iu] == G[np.ix_(S, S)][iu]))
    total = iu[0].size
    if result.cross is not None and rest.size:
        ok += int(np.sum(result.cross == G[np.ix_(rest, S)]))
        total += result.cross.size
    return ok, total - ok


def score_trial(ctx: TrialContext, result, error, wall=0.0) -> TrialResult:
    G = gram(ctx.truth).astype(np.int32)
    P = ctx.params
    sim = None
    if ctx.scenario == "direct-disjoint":
        if error is None:
            sim = gram(result.to_matrix(P.n))
    elif result is not None:
        sim = result.similarity
    gerr = gram_error(sim, G) if sim is not None else None
    correct, wrong = inference_scores(result, G) if ctx.scenario != "direct-disjoint" else (None, None)
    support = None
    if result is not None and getattr(result, "support_sample", None) is not None:
        w = ctx.truth.weights()
        hits = np.sum(result.support_sample == w[result.sample]) + np.sum(result.support_rest == w[result.rest])
        support = float(hits) / P.n
    mode = bounds.ACCOUNTING[ctx.scenario]
    s_used = ctx.s_size if ctx.scenario != "direct-disjoint" else None
    expected = bounds.queries_total(s_used, P.n, P.k, mode) if s_used is not None else None
    try:
        necessary = bounds.necessary_for_scenario(ctx.scenario, P, 0.01)
    except InvalidParams:
        necessary = None
    failure = "" if error is None else error.tag
    success = error is None and gerr == 0
    return TrialResult(
        scenario=ctx.scenario, point=ctx.point, trial=ctx.trial, n=P.n, k=P.k, delta=P.delta,
        p=P.p, q=P.q, sigma=P.sigma, s_size=ctx.s_size, alpha=ctx.alpha,
        queries=ctx.oracle.ledger_size(), queries_expected=expected, omega_necessary=necessary,
        success=bool(success), gram_error=gerr, correct_inferences=correct, wrong_inferences=wrong,
        support_accuracy=support, failure=failure, wall_time=wall,
    )


def run_trial(scenario, point, root_seed, point_index, trial, epsilon=1.0, alpha_override=None,
              dataset_truth=None, keep=False, log_dir=None):
    t0 = time.perf_counter()
    ctx = prepare_trial(scenario, point, root_seed, point_index, trial, epsilon, alpha_override,
                        dataset_truth, log=log_dir is not None)
    result, error = run_recovery(ctx)
    record = score_trial(ctx, result, error, time.perf_counter() - t0)
    if log_dir is not None:
        ctx.oracle.write_log(os.path.join(log_dir, f"trial-{point_index}-{trial}.log"))
    return (record, ctx, result, error) if keep else record


def replay(log_path, scenario, point, root_seed=0, point_index=0, trial=0, epsilon=1.0,
           alpha=None, truth=None):
    """Rerun a trial's recovery on logged answers.

    The sampling stream is rebuilt from (root_seed, point_index, trial), so a
    log written by ``run_trial`` holds every pair the replay asks for.
    Returns (summary dict, result, error).
    """
    n, k, delta = int(point["n"]), int(point["k"]), int(point["delta"])
    ensemble = IID if scenario.endswith("iid") else UNIFORM
    q = point["q"] if not scenario.startswith(("direct", "worstcase", "dithered")) else 0.0
    if scenario == "direct-disjoint":
        delta = 1
    params = Params(n=n, k=k, delta=delta, p=point["p"], q=q, sigma=point["sigma"],
                    epsilon=epsilon, ensemble=ensemble)
    oracle = LogOracle(log_path, n, _oracle_kind(scenario, point))
    n_min = n // k if scenario == "direct-disjoint" else None
    s = point.get("s_size", "auto")
    if s in (None, "auto"):
        if scenario.startswith("worstcase") and alpha is None:
            raise InvalidParams("replaying a worst-case trial with automatic |S| needs alpha")
        s = bounds.sample_size(scenario, params, alpha=alpha, n_min=n_min)
    ctx = TrialContext(scenario, point_index, trial, params, truth, oracle, int(min(int(s), n)),
                       stream(root_seed, point_index, trial, "sampling"), alpha, n_min)
    if scenario == "direct-disjoint" and truth is not None:
        ctx.n_min = int(truth.entries.sum(axis=0).min())
    result, error = run_recovery(ctx)
    summary = {
        "scenario": scenario,
        "s_size": ctx.s_size,
        "queries": oracle.ledger_size(),
        "recovered": error is None,
        "failure": "" if error is None else error.tag,
    }
    if truth is not None:
        record = score_trial(ctx, result, error)
        summary.update(success=record.success, gram_error=record.gram_error)
    return summary, result, error


def _run_task(args):
    *head, log_dir = args
    return run_trial(*head, log_dir=log_dir)


def run_sweep(config: ExperimentConfig, dataset_truth=None, log_dir=None):
    """All grid points x trials in deterministic order."""
    if config.dataset and dataset_truth is None:
        dataset_truth, _ = ingest_labels(config.dataset, delta_max=int(config.delta[0]))
    tasks = [
        (config.scenario, point, config.seed, pi, t, config.epsilon, config.alpha_override, dataset_truth,
         False, log_dir)
        for pi, point in enumerate(config.grid())
        for t in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            yield from pool.map(_run_task, tasks)
    else:
        for task in tasks:
            yield _run_task(task)


# --- emission ---------------------------------------------------------------------


def _row(result: TrialResult, timing):
    d = asdict(result)
    if not timing:
        d.pop("wall_time")
    for key, v in d.items():
        if v is None:
            d[key] = ""
        elif isinstance(v, float):
            d[key] = repr(round(v, 12))
    return d


def results_csv(results, timing=False):
    cols = [f for f in RESULT_FIELDS if timing or f != "wall_time"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(_row(r, timing))
    return buf.getvalue()


def emit_results(results, path, fmt="csv", timing=False):
    results = list(results)
    if fmt == "csv":
        text = results_csv(results, timing)
    elif fmt == "json":
        rows = []
        for r in results:
            d = asdict(r)
            if not timing:
                d.pop("wall_time")
            rows.append(d)
        text = json.dumps(rows, indent=2) + "\n"
    else:
        raise InvalidParams(f"unknown format {fmt!r}")
    if path in (None, "-"):
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return text


def count_table_rows(result, G):
    """Rows (i, j, count, true_ell, inferred_ell) for every inferred pair."""
    S, rest = result.sample, result.rest
    rows = []
    iu = np.triu_indices(S.size, k=1)
    if result.within_counts is not None:
        inferred = result.within if result.within is not None else np.full(result.within_counts.shape, -1)
        for a, b in zip(*iu):
            rows.append((int(S[a]), int(S[b]), int(result.within_counts[a, b]),
                         int(G[S[a], S[b]]), int(inferred[a, b])))
    if result.cross_counts is not None:
        inferred = result.cross if result.cross is not None else np.full(result.cross_counts.shape, -1)
        for r_i, j in enumerate(rest):
            for a, i in enumerate(S):
                rows.append((int(i), int(j), int(result.cross_counts[r_i, a]),
                             int(G[i, j]), int(inferred[r_i, a])))
    return rows


def write_count_table(result, G, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "count", "true_ell", "inferred_ell"])
        w.writerows(count_table_rows(result, G))


def plot_sweep(results, x, y, path):
    """Mean of column ``y`` against column ``x`` as an SVG line plot."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = {}
    for r in results:
        v = getattr(r, y)
        if v is None:
            continue
        groups.setdefault(getattr(r, x), []).append(float(v))
    xs = sorted(groups)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, [np.mean(groups[v]) for v in xs], marker="o")
    ax.set_xlabel(x)
    ax.set_ylabel(f"mean {y}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_histogram(counts, path, bins=60):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(np.asarray(counts).ravel(), bins=bins)
    ax.set_xlabel("triangle count")
    ax.set_ylabel("pairs")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# --- datasets ---------------------------------------------------------------------


def ingest_labels(path, delta_max, labels=None):
    """Build an external ground truth from ``element_id,label`` rows.

    Elements keep only the chosen labels (all by default) and are kept when
    they hold between 1 and ``delta_max`` of them.
    """
    member = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["element_id", "label"]:
            raise InvalidInput("label file must start with the header element_id,label")
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise InvalidInput(f"{path}:{lineno}: malformed row {row!r}")
            member.setdefault(row[0].strip(), set()).add(row[1].strip())
    chosen = set(labels) if labels else None
    kept = {}
    for el, labs in member.items():
        labs = labs & chosen if chosen is not None else labs
        if 1 <= len(labs) <= delta_max:
            kept[el] = labs
    if not kept:
        raise InvalidInput("no element survives the membership filter")
    names = sorted(set().union(*kept.values()))
    elements = sorted(kept, key=_natural_key)
    col = {name: c for c, name in enumerate(names)}
    a = np.zeros((len(elements), len(names)), dtype=np.uint8)
    for r, el in enumerate(elements):
        a[r, [col[x] for x in kept[el]]] = 1
    truth = ClusteringMatrix(a, ensemble=EXTERNAL, delta=delta_max)
    excl = exclusive_counts(truth)
    stats = {
        "n": truth.n,
        "k": truth.k,
        "labels": names,
        "elements": elements,
        "exclusive": dict(zip(names, excl.tolist())),
        "alpha": verify_separation(truth, "general"),
        "alpha_delta2": verify_separation(truth, "delta2"),
    }
    if stats["alpha"] == 0:
        stats["warning"] = "some label has no exclusive element; separation condition fails"
    return truth, stats


def _natural_key(s):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


def write_genre_corpus(path, n=3470, k=5, delta=2, alpha=0.015, seed=0):
    """Synthetic label file with planted exclusive mass, in ``element_id,label`` form."""
    truth = sample_planted(n, k, delta, alpha, np.random.default_rng(seed))
    names = [f"genre{c}" for c in range(k)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element_id", "label"])
        for i, row in enumerate(truth.entries):
            for c in np.flatnonzero(row):
                w.writerow([i, names[c]])
    return truth


def summarize(results):
    results = list(results)
    ok = [r for r in results if r.success]
    errs = [r.gram_error for r in results if r.gram_error is not None]
    return {
        "trials": len(results),
        "successes": len(ok),
        "mean_gram_error": float(np.mean(errs)) if errs else None,
        "mean_queries": float(np.mean([r.queries for r in results])) if results else None,
    }
