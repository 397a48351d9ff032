"""Monte Carlo experiment engine: seeded instance generation, common random
numbers across policies, and plot-ready CSV output.
"""
from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import instances as inst_gen
from .distributions import Instance, sample_many
from .dp import solve_bellman
from .ode import solve_theta
from .phi import PhiTables, build_tables
from .policies import (
    bhk_policy,
    bk_policy,
    bounded_threshold_policy,
    dp_policy,
    median_policy,
    order_agnostic_policy,
    run_policy,
    threshold_greedy_policy,
)

__all__ = ["SimConfig", "SimReport", "evaluate", "experiment", "make_policy", "generate_instance"]

CSV_HEADER = "f,instance_id,policy,mean_net,mean_opt,ratio,stderr,q1,median,q3"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    f_values: tuple[float, ...] = (1.0,)
    n_instances: int = 20
    n_reps: int = 500
    policies: tuple[str, ...] = ("oa", "tg", "median", "bhk", "bk")
    family: str = "gpd"
    out: str | None = None
    boost: bool = True
    alpha: float = 1.0  # bounded family only

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        cfg = cls()
        updates = {}
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key in ("f_values", "policies"):
                    parts = tuple(p.strip() for p in val.split(",") if p.strip())
                    updates[key] = tuple(float(p) for p in parts) if key == "f_values" else parts
                elif key in ("seed", "n_instances", "n_reps"):
                    updates[key] = int(val)
                elif key in ("alpha",):
                    updates[key] = float(val)
                elif key in ("boost",):
                    updates[key] = val.lower() in ("1", "true", "yes")
                elif key in ("family", "out"):
                    updates[key] = val
                else:
                    raise ValueError(f"unknown config key {key!r}")
        return replace(cfg, **updates)


@dataclass
class SimReport:
    rows: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for row in self.rows:
            buf.write(
                "{f:.10g},{instance_id},{policy},{mean_net:.10g},{mean_opt:.10g},"
                "{ratio:.10g},{stderr:.10g},{q1:.10g},{median:.10g},{q3:.10g}\n".format(**row)
            )
        return buf.getvalue()


def generate_instance(family: str, f: float, rng: np.random.Generator, alpha: float = 1.0,
                      tables: PhiTables | None = None) -> Instance:
    if family == "gpd":
        return inst_gen.random_gpd_instance(rng)
    if family == "two":
        return inst_gen.two_var_hard(f)
    if family == "three":
        return inst_gen.three_var_hard(f)
    if family == "indiff":
        tables = tables if tables is not None else build_tables(solve_theta(f))
        return inst_gen.indifference_instance(tables)
    if family == "jitter-indiff":
        tables = tables if tables is not None else build_tables(solve_theta(f))
        return inst_gen.jittered_indifference_instance(tables)
    if family == "multistage":
        return inst_gen.multistage_instance(f)
    if family == "bounded":
        return inst_gen.bounded_instance(rng, alpha, f)
    raise ValueError(f"unknown instance family {family!r}")


def make_policy(name: str, inst: Instance, f: float, tables: PhiTables | None = None,
                boost: bool = True):
    if name == "dp":
        return dp_policy(solve_bellman(inst, f))
    if name == "oa":
        tables = tables if tables is not None else build_tables(solve_theta(f))
        return order_agnostic_policy(tables, inst, boost=boost)
    if name == "tg":
        return threshold_greedy_policy(f, inst)
    if name == "tg-case1":
        return threshold_greedy_policy(f, inst, variant="case1")
    if name == "median":
        return median_policy(inst)
    if name == "bhk":
        return bhk_policy(f)
    if name == "bk":
        return bk_policy(f)
    if name.startswith("bounded-"):
        return bounded_threshold_policy(inst, f, name.removeprefix("bounded-"))
    raise ValueError(f"unknown policy {name!r}")


def _realization_matrix(inst: Instance, reps: int, rng: np.random.Generator) -> np.ndarray:
    return np.column_stack([sample_many(d, rng, reps) for d in inst.dists])


def evaluate(
    policy_name: str,
    inst: Instance,
    f: float,
    reps: int,
    seed: int,
    instance_id: int = 0,
    tables: PhiTables | None = None,
    realizations: np.ndarray | None = None,
    boost: bool = True,
) -> tuple[float, float]:
    """(mean_net / mean_realized_max, standard error of that ratio).

    Realizations derive from (seed, instance_id) and are shared across
    policies; each policy's decision stream derives from
    (seed, instance_id, policy).
    """
    if reps < 1:
        raise ValueError("need reps >= 1")
    if realizations is None:
        rng = np.random.default_rng(np.random.SeedSequence((seed, instance_id, 0xA11CE)))
        realizations = _realization_matrix(inst, reps, rng)
    pol_digest = int(hashlib.sha256(policy_name.encode()).hexdigest()[:12], 16)
    pol_rng = np.random.default_rng(np.random.SeedSequence((seed, instance_id, pol_digest)))
    policy = make_policy(policy_name, inst, f, tables=tables, boost=boost)
    nets = np.empty(reps)
    for r in range(reps):
        nets[r] = run_policy(policy, inst, realizations[r], pol_rng, f).net
    opt = np.maximum.reduce([realizations[:, j] for j in range(inst.n)])
    mean_net = float(nets.mean())
    mean_opt = float(opt.mean())
    ratio = mean_net / mean_opt
    stderr = float(nets.std(ddof=1) / np.sqrt(reps) / mean_opt) if reps > 1 else float("nan")
    return ratio, stderr


def _evaluate_cell(cfg: SimConfig, f: float, instance_id: int, tables: PhiTables | None):
    cell_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, instance_id, 0x1257A9CE)))
    inst = generate_instance(cfg.family, f, cell_rng, cfg.alpha, tables)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, instance_id, 0xA11CE)))
    realizations = _realization_matrix(inst, cfg.n_reps, rng)
    stream_hash = hashlib.sha256(realizations.tobytes()).hexdigest()[:16]
    opt = np.maximum.reduce([realizations[:, j] for j in range(inst.n)])
    mean_opt = float(opt.mean())
    rows = []
    for policy_name in cfg.policies:
        pol_digest = int(hashlib.sha256(policy_name.encode()).hexdigest()[:12], 16)
        pol_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, instance_id, pol_digest)))
        policy = make_policy(policy_name, inst, f, tables=tables, boost=cfg.boost)
        nets = np.empty(cfg.n_reps)
        for r in range(cfg.n_reps):
            nets[r] = run_policy(policy, inst, realizations[r], pol_rng, f).net
        mean_net = float(nets.mean())
        rows.append(
            {
                "f": f,
                "instance_id": instance_id,
                "policy": policy_name,
                "mean_net": mean_net,
                "mean_opt": mean_opt,
                "ratio": mean_net / mean_opt,
                "stderr": float(nets.std(ddof=1) / np.sqrt(cfg.n_reps) / mean_opt)
                if cfg.n_reps > 1
                else float("nan"),
                "stream": stream_hash,
            }
        )
    return rows


def experiment(cfg: SimConfig) -> SimReport:
    """Full protocol: instances x policies x f grid, with per-(f, policy)
    quartiles over instance-level ratios attached to every row."""
    report = SimReport()
    n_threads = int(os.environ.get("BUYBACK_LAB_THREADS", "1") or "1")
    for f in cfg.f_values:
        tables = build_tables(solve_theta(f)) if _needs_tables(cfg.policies, cfg.family) else None
        cells = range(cfg.n_instances)
        if n_threads > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=n_threads) as ex:
                all_rows = list(ex.map(_cell_worker, ((cfg, f, i) for i in cells)))
        else:
            all_rows = [_evaluate_cell(cfg, f, i, tables) for i in cells]
        flat = [row for rows in all_rows for row in rows]
        hashes = {row["stream"] for row in flat}
        if len(hashes) > cfg.n_instances:
            raise AssertionError("realization streams diverged across policies")
        by_policy: dict[str, list[float]] = {}
        for row in flat:
            by_policy.setdefault(row["policy"], []).append(row["ratio"])
        quartiles = {
            name: np.percentile(vals, [25, 50, 75]) for name, vals in by_policy.items()
        }
        for row in flat:
            q1, med, q3 = quartiles[row["policy"]]
            row.pop("stream")
            row.update(q1=float(q1), median=float(med), q3=float(q3))
            report.rows.append(row)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(report.to_csv())
    return report


def _needs_tables(policies, family) -> bool:
    return "oa" in policies or family in ("indiff", "jitter-indiff")


def _cell_worker(args):
    cfg, f, instance_id = args
    tables = build_tables(solve_theta(f)) if _needs_tables(cfg.policies, cfg.family) else None
    return _evaluate_cell(cfg, f, instance_id, tables)
