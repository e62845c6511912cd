"""Scheme runners, Monte-Carlo sweeps, load statistics and convergence traces.

Every CSV row carries the schema version, the scheme, the seed and a hash of
the full configuration.  Floats are written with 9 significant digits.
"""
import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines
from .channels import draw_network
from .joint import (RunTrace, bcd_outer_loop, initialize, redesign_fixed_association,
                    select_association)
from .rates import AssociationResult, BeamState

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ASSOCIATIONS = ("proposed", "gain_based")
RIS_MODES = ("w_ris", "r_ris", "wo_ris")
SCHEMES = tuple(f"{a}_{r}" for a in ASSOCIATIONS for r in RIS_MODES)
SWEEP_VARS = {"p_max": "p_max_dbm", "n_elements": "N", "k_users": "K"}

# spawn keys separating the solver's random streams from the channel streams
_INIT_STREAM, _RIS_STREAM = 100, 101


@dataclass
class SchemeResult:
    scheme: str
    seed: int
    sum_rate: float
    user_to_bs: np.ndarray
    ris_bs: int | None  # None when no RIS is deployed
    iterations: int
    converged: bool
    wall_time: float
    relaxed_hard_rate: float | None = None  # proposed only: rate before the re-design
    state: BeamState | None = None  # final beams and phases
    trace: RunTrace | None = None  # proposed only: relaxed BCD trace


def _rng(seed, key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def parse_scheme(scheme):
    for assoc in ASSOCIATIONS:
        for mode in RIS_MODES:
            if scheme == f"{assoc}_{mode}":
                return assoc, mode
    raise ValueError(f"unknown scheme '{scheme}'; choose from {', '.join(SCHEMES)}")


def _proposed(system, solver, channels, mode, seed):
    if mode == "wo_ris":
        channels = baselines.no_ris_mode(channels)
    phi = None
    if mode == "r_ris":
        ris_bs, phi = baselines.random_ris_mode(system, _rng(seed, _RIS_STREAM))
    state, aux = initialize(system, channels, solver, _rng(seed, _INIT_STREAM), phi=phi)
    state, aux, trace = bcd_outer_loop(system, channels, solver, state, aux,
                                       optimize_phi=mode == "w_ris")
    assoc = select_association(state, solver.smoothing.delta)
    if mode == "r_ris":
        assoc = AssociationResult(assoc.user_to_bs, ris_bs)
    final, rates = redesign_fixed_association(system, channels, assoc, solver, state=state,
                                              optimize_phi=mode == "w_ris", phi_init=phi)
    ris = None if mode == "wo_ris" else assoc.ris_bs
    return (rates[-1], assoc.user_to_bs, ris, trace.iterations, trace.converged, rates[0],
            final, trace)


def _gain_based(system, solver, channels, mode, seed):
    users = baselines.gain_based_association(channels).user_to_bs
    if mode == "wo_ris":
        assoc = AssociationResult(users, 0)
        final, rates = redesign_fixed_association(system, baselines.no_ris_mode(channels), assoc,
                                                  solver, optimize_phi=False)
        return rates[-1], users, None, len(rates) - 1, True, None, final, None
    if mode == "r_ris":
        ris_bs, phi = baselines.random_ris_mode(system, _rng(seed, _RIS_STREAM))
        final, rates = redesign_fixed_association(system, channels,
                                                  AssociationResult(users, ris_bs), solver,
                                                  optimize_phi=False, phi_init=phi)
        return rates[-1], users, ris_bs, len(rates) - 1, True, None, final, None
    # the RIS goes to whichever BS gains most once its phases are optimized
    best = None
    for j in range(system.J):
        final, rates = redesign_fixed_association(system, channels, AssociationResult(users, j),
                                                  solver)
        if best is None or rates[-1] > best[0]:
            best = (rates[-1], j, len(rates) - 1, final)
    return best[0], users, best[1], best[2], True, None, best[3], None


def run_scheme(run, scheme, seed):
    """One seeded realization under ``scheme``; returns a SchemeResult."""
    assoc, mode = parse_scheme(scheme)
    system = run.system
    _, channels = draw_network(system, seed)
    start = time.perf_counter()
    runner = _proposed if assoc == "proposed" else _gain_based
    rate, users, ris, iters, conv, relaxed, state, trace = runner(system, run.solver, channels,
                                                                  mode, seed)
    return SchemeResult(scheme, int(seed), float(rate), np.asarray(users), ris, iters, conv,
                        time.perf_counter() - start, relaxed, state, trace)


# ---------------------------------------------------------------- CSV output

def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    if value is None:
        return ""
    return str(value)


def write_csv(rows, columns, out=None):
    """Write dict rows; returns the CSV text.  ``out`` may be a path or None."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


RUN_COLUMNS = ("schema", "config_hash", "scheme", "seed", "sum_rate", "association", "ris_bs",
               "iterations", "converged", "wall_time")


def result_row(run, res):
    return {"schema": SCHEMA_VERSION, "config_hash": run.digest(), "scheme": res.scheme,
            "seed": res.seed, "sum_rate": res.sum_rate,
            "association": " ".join(map(str, res.user_to_bs)), "ris_bs": res.ris_bs,
            "iterations": res.iterations, "converged": res.converged,
            "wall_time": res.wall_time}


# ------------------------------------------------------------ Monte-Carlo glue

def _task(args):
    run, scheme, seed = args
    try:
        return run_scheme(run, scheme, seed), None
    except Exception as exc:  # recorded per trial; the batch carries on
        log.warning("%s seed %d failed: %s", scheme, seed, exc)
        return None, f"{type(exc).__name__}: {exc}"


def run_batch(tasks, workers=1):
    """Evaluate ``(run, scheme, seed)`` tasks; output order follows ``tasks``."""
    tasks = list(tasks)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_task, tasks))
    return [_task(t) for t in tasks]


def seeds_for(base_seed, trials):
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return [int(base_seed) + t for t in range(trials)]


def run_single(run, scheme, seed, out=None):
    res = run_scheme(run, scheme, seed)
    write_csv([result_row(run, res)], RUN_COLUMNS, out)
    return res


SWEEP_COLUMNS = ("schema", "config_hash", "scheme", "sweep_var", "value", "trials", "completed",
                 "mean_sum_rate", "stderr_sum_rate", "base_seed", "failures")


def run_sweep(run, sweep_var, values, trials, schemes=SCHEMES, base_seed=0, workers=1,
              out=None):
    """Mean and standard error of the sum-rate per (scheme, value)."""
    if sweep_var not in SWEEP_VARS:
        raise ValueError(f"sweep_var must be one of {', '.join(SWEEP_VARS)}")
    values = list(values)
    if not values:
        raise ValueError("values must be non-empty")
    seeds = seeds_for(base_seed, trials)
    field_name = SWEEP_VARS[sweep_var]
    runs = {v: run.with_system(**{field_name: v}) for v in values}
    keys = [(s, v, seed) for v in values for s in schemes for seed in seeds]
    results = run_batch([(runs[v], s, seed) for s, v, seed in keys], workers)
    rows = []
    for v in values:
        for s in schemes:
            got = [(r, err) for (s2, v2, _), (r, err) in zip(keys, results) if s2 == s and v2 == v]
            rates = np.array([r.sum_rate for r, _ in got if r is not None])
            fails = [err for _, err in got if err is not None]
            stderr = rates.std(ddof=1) / np.sqrt(rates.size) if rates.size > 1 else 0.0
            rows.append({"schema": SCHEMA_VERSION, "config_hash": runs[v].digest(), "scheme": s,
                         "sweep_var": sweep_var, "value": v, "trials": trials,
                         "completed": int(rates.size),
                         "mean_sum_rate": rates.mean() if rates.size else float("nan"),
                         "stderr_sum_rate": stderr, "base_seed": base_seed,
                         "failures": len(fails)})
    write_csv(rows, SWEEP_COLUMNS, out)
    return rows


LOAD_COLUMNS = ("schema", "config_hash", "scheme", "bs", "mean_users", "trials", "completed",
                "base_seed")


def run_load_stats(run, trials, schemes=SCHEMES, base_seed=0, workers=1, out=None):
    """Mean number of users served by each BS per scheme; also returns per-trial loads."""
    seeds = seeds_for(base_seed, trials)
    keys = [(s, seed) for s in schemes for seed in seeds]
    results = run_batch([(run, s, seed) for s, seed in keys], workers)
    J = run.system.J
    rows, loads = [], {}
    for s in schemes:
        per = [np.bincount(r.user_to_bs, minlength=J)
               for (s2, _), (r, _) in zip(keys, results) if s2 == s and r is not None]
        loads[s] = np.array(per).reshape(-1, J)
        mean = loads[s].mean(axis=0) if per else np.full(J, np.nan)
        for j in range(J):
            rows.append({"schema": SCHEMA_VERSION, "config_hash": run.digest(), "scheme": s,
                         "bs": j, "mean_users": float(mean[j]), "trials": trials,
                         "completed": len(per), "base_seed": base_seed})
    write_csv(rows, LOAD_COLUMNS, out)
    return rows, loads


CONVERGENCE_COLUMNS = ("schema", "config_hash", "scheme", "seed", "series", "iteration",
                       "sum_rate", "hard_sum_rate", "objective", "admm_residual",
                       "admm_iterations", "al_objective")


def run_convergence(run, seed, out=None):
    """Outer-loop trace plus the first ADMM inner loop of the proposed scheme.

    Rows with ``series=outer`` hold one BCD iteration each; ``series=admm``
    rows hold one ADMM iteration of the first passive update.
    """
    system, solver = run.system, run.solver
    _, channels = draw_network(system, seed)
    state, aux = initialize(system, channels, solver, _rng(seed, _INIT_STREAM))
    _, _, trace = bcd_outer_loop(system, channels, solver, state, aux)
    base = {"schema": SCHEMA_VERSION, "config_hash": run.digest(), "scheme": "proposed_w_ris",
            "seed": int(seed)}
    rows = [dict(base, series="outer", iteration=r.iteration, sum_rate=r.sum_rate,
                 hard_sum_rate=r.hard_sum_rate, objective=r.objective,
                 admm_residual=r.admm_residual, admm_iterations=r.admm_iterations)
            for r in trace.records]
    first = trace.first_admm
    if first is not None:
        rows += [dict(base, series="admm", iteration=i + 1, admm_residual=res, al_objective=al)
                 for i, (res, al) in enumerate(zip(first.residuals, first.al_objective))]
    write_csv(rows, CONVERGENCE_COLUMNS, out)
    return rows, trace
