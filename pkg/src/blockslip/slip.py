"""Trust-region patch algorithm (block-SLIP) and the classic SLIP loop.

Each outer iteration tabulates trust-region steps over all patches with a
per-patch radius ``delta0 * 2**-k``, collects the steps that pass the
sufficient-decrease test, and applies them greedily in order of decreasing
actual reduction for as long as the objective keeps strictly decreasing.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .control import ControlField, ValueSet, splice, tv
from .exceptions import ContractViolation, CoverError, InvalidArgument
from .grid import exact
from .models import Model
from .patches import PatchSet, validate_cover, whole_domain
from .trsub import DFS_CAP, CandidateStep, TrustRegionSubproblem, solve

_log = logging.getLogger(__name__)

STATIONARY = "stationary"
MAX_OUTER_ITERS = "max_outer_iters"


@dataclass
class SlipConfig:
    delta0: float = 0.125
    sigma: float = 1e-4
    max_outer_iters: int = 1000
    k_cap: int | str = "auto"
    lipschitz: float | None = None
    solver: str = "auto"
    dfs_cap: int = DFS_CAP
    workers: int = 1
    strict_cover: bool = True
    check_invariants: bool = True
    keep_iterates: bool = False

    def __post_init__(self):
        if not self.delta0 > 0:
            raise InvalidArgument("delta0 must be positive")
        if not 0 < self.sigma < 1:
            raise InvalidArgument("sigma must be in (0,1)")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 1:
            raise InvalidArgument("max_outer_iters must be a positive integer")
        if self.k_cap != "auto" and (int(self.k_cap) != self.k_cap or self.k_cap < 0):
            raise InvalidArgument("k_cap must be 'auto' or a nonnegative integer")
        if self.lipschitz is not None and not self.lipschitz >= 0:
            raise InvalidArgument("lipschitz constant must be nonnegative")
        if int(self.workers) < 1:
            raise InvalidArgument("workers must be at least 1")

    def resolve_k_cap(self, cell_volume_exact: Fraction) -> int:
        """One past the first level whose radius is below one cell volume.

        From that first level on the only feasible trial is the base point,
        so the extra level is a safety margin that is never refined into.
        """
        if self.k_cap != "auto":
            return int(self.k_cap)
        d = exact(self.delta0)
        k = 0
        while d * Fraction(1, 2**k) >= cell_volume_exact:
            k += 1
        return k + 1


class Objective:
    """``J = F + alpha TV`` returning the decomposition as well."""

    def __init__(self, model: Model, alpha: float):
        self.model = model
        self.alpha = float(alpha)
        self.evaluations = 0

    def __call__(self, w: ControlField) -> tuple:
        self.evaluations += 1
        F = self.model.objective(w)
        TV = tv(w)
        return F + self.alpha * TV, F, TV


@dataclass
class SolveRecord:
    k: int
    patch: int
    pred: float
    ared: float | None
    accepted: bool
    refined: bool
    dominated: bool


@dataclass
class IterationRecord:
    n: int
    J_before: float
    J_after: float
    F: float
    TV: float
    solved: list = field(default_factory=list)
    applied: list = field(default_factory=list)
    terminal: bool = False

    @property
    def n_solves(self) -> int:
        return len(self.solved)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_solves"] = self.n_solves
        return d


@dataclass
class RunResult:
    final: ControlField
    records: list
    reason: str
    J: float
    F: float
    TV: float
    n_subproblems: int
    wall_s: float
    k_cap: int = 0
    lipschitz: float = 0.0
    iterates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "reason": self.reason,
            "J": self.J,
            "F": self.F,
            "TV": self.TV,
            "n_outer": len(self.records),
            "n_subproblems": self.n_subproblems,
            "wall_s": self.wall_s,
            "k_cap": self.k_cap,
            "lipschitz": self.lipschitz,
            "final": self.final.values.tolist(),
        }


def radius(delta0: float, k: int) -> float:
    return delta0 * 2.0**-k


def tabulate(w_n: ControlField, g_n, J_n: float, patches: PatchSet, objective: Objective,
             cfg: SlipConfig, lipschitz: float, k_cap: int, pool=None):
    """Solve patch subproblems level by level until the working set is empty.

    Returns the accepted steps (with ``ared`` set) and one
    :class:`SolveRecord` per subproblem solve.  Within a level, patches are
    processed in index order; the solves of one level do not depend on the
    acceptance set, so they may run on ``pool`` without changing results.
    """
    accepted: list = []
    records: list = []
    pending = [p.id for p in patches]
    h = w_n.grid.cell_volume_exact
    k = 0
    while pending:
        delta = radius(cfg.delta0, k)
        subs = [TrustRegionSubproblem(w_n, g_n, patches[pid], delta, objective.alpha) for pid in pending]

        def _solve(sub, _k=k):
            try:
                return solve(sub, cfg.solver, cfg.dfs_cap)
            except Exception as exc:
                ctx = f"(subproblem k={_k}, patch={sub.patch.id})"
                exc.args = (f"{exc.args[0]} {ctx}",) + exc.args[1:] if exc.args else (ctx,)
                raise

        steps = list(pool.map(_solve, subs)) if pool is not None else [_solve(s) for s in subs]
        nxt = []
        for pid, step in zip(pending, steps):
            step.key = (k, pid)
            if cfg.check_invariants and exact(delta) < h and step.pred != 0:
                raise ContractViolation(f"radius below one cell volume but pred={step.pred} at (k={k}, patch={pid})")
            rec = SolveRecord(k, pid, step.pred, None, False, False, False)
            if step.pred > 0:
                J_trial = objective(step.trial)[0]
                step.ared = J_n - J_trial
                step.stats["J_trial"] = J_trial
                rec.ared = step.ared
                if step.ared >= cfg.sigma * step.pred:
                    accepted.append(step)
                    rec.accepted = True
                else:
                    best = max((a.ared for a in accepted), default=-math.inf)
                    if best < step.pred + lipschitz * delta:
                        if k + 1 <= k_cap:
                            nxt.append(pid)
                            rec.refined = True
                    else:
                        rec.dominated = True
            records.append(rec)
        pending = nxt
        k += 1
    if cfg.check_invariants:
        for a in accepted:
            if not (a.pred > 0 and a.ared >= cfg.sigma * a.pred):
                raise ContractViolation(f"accepted step {a.key} fails the sufficient decrease test")
    return accepted, records


def greedy_apply(w_n: ControlField, accepted: list, objective: Objective, J_n: float, patches: PatchSet,
                 check: bool = True):
    """Apply accepted steps in decreasing order of actual reduction while the
    objective strictly decreases.

    Ties in ``ared`` go to the smaller patch index, then the smaller level.
    Returns ``(w_next, applied, (J, F, TV))`` where ``applied`` lists
    ``(k, patch, J_after)``.
    """
    if not accepted:
        raise InvalidArgument("greedy update needs a nonempty acceptance set")
    order = sorted(accepted, key=lambda s: (-s.ared, s.key[1], s.key[0]))
    w_bar = w_n
    j0 = J_n
    parts = None
    applied = []
    for i, step in enumerate(order):
        k, pid = step.key
        cand = splice(w_bar, patches[pid].cells, step.trial)
        j, F, TV = objective(cand)
        if i == 0 and check and (J_n - j != step.ared):
            raise ContractViolation(f"first greedy step {step.key} realized {J_n - j!r}, tabulated {step.ared!r}")
        if j < j0:
            w_bar, j0, parts = cand, j, (j, F, TV)
            applied.append((k, pid, j))
        else:
            break
    if check and not applied:
        raise ContractViolation("greedy loop applied no update although the acceptance set was nonempty")
    return w_bar, applied, parts


def _default_w0(grid, value_set: ValueSet) -> ControlField:
    return ControlField.constant(grid, value_set.closest_to_zero(), value_set)


def run(model: Model, patches: PatchSet, alpha: float, value_set: ValueSet, cfg: SlipConfig | None = None,
        w0: ControlField | None = None, log=None) -> RunResult:
    """Run the trust-region patch algorithm from ``w0``.

    ``log`` may be a writable text stream; one JSON line per outer iteration
    is written to it.
    """
    cfg = cfg or SlipConfig()
    grid = model.grid
    if not patches.grid.same_as(grid):
        raise InvalidArgument("patches and model use different grids")
    report = validate_cover(patches, grid)
    if not report.ok:
        if cfg.strict_cover:
            raise CoverError(f"patch layout violates the cover requirements: {report.summary()}")
        _log.warning("patch layout violates the cover requirements: %s", report.summary())
    w = w0 if w0 is not None else _default_w0(grid, value_set)
    if not w.grid.same_as(grid):
        raise InvalidArgument("initial control lives on a different grid")
    k_cap = cfg.resolve_k_cap(grid.cell_volume_exact)
    L = cfg.lipschitz if cfg.lipschitz is not None else model.lipschitz_bound(value_set)
    objective = Objective(model, alpha)

    t0 = time.perf_counter()
    J, F, TV = objective(w)
    records = []
    iterates = [w] if cfg.keep_iterates else []
    n_sub = 0
    reason = MAX_OUTER_ITERS
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for n in range(cfg.max_outer_iters):
            g = model.gradient(w)
            accepted, solved = tabulate(w, g, J, patches, objective, cfg, L, k_cap, pool)
            n_sub += len(solved)
            if cfg.check_invariants and len(solved) > len(patches) * (k_cap + 1):
                raise ContractViolation(f"{len(solved)} subproblem solves exceed {len(patches)} * (k_cap + 1)")
            rec = IterationRecord(n, J, J, F, TV, solved=[asdict(s) for s in solved])
            if not accepted:
                rec.terminal = True
                records.append(rec)
                _emit(log, rec)
                reason = STATIONARY
                break
            w, applied, (J_new, F, TV) = greedy_apply(w, accepted, objective, J, patches, cfg.check_invariants)
            if cfg.check_invariants and not J_new < J:
                raise ContractViolation(f"outer iteration {n} did not decrease the objective")
            rec.J_after, rec.F, rec.TV = J_new, F, TV
            rec.applied = [list(a) for a in applied]
            J = J_new
            records.append(rec)
            _emit(log, rec)
            if cfg.keep_iterates:
                iterates.append(w)
            _log.info("outer %d: J=%.10g (F=%.6g TV=%g), %d solves, %d applied", n, J, F, TV, len(solved), len(applied))
    finally:
        if pool is not None:
            pool.shutdown()
    return RunResult(w, records, reason, J, F, TV, n_sub, time.perf_counter() - t0, k_cap, L, iterates)


def _emit(log, rec: IterationRecord):
    if log is not None:
        log.write(json.dumps(rec.to_dict()) + "\n")


def run_slip(model: Model, alpha: float, value_set: ValueSet, cfg: SlipConfig | None = None,
             w0: ControlField | None = None) -> RunResult:
    """Classic SLIP: one trust-region problem on the whole domain, radius
    reset to ``delta0`` each outer iteration and halved on rejection."""
    cfg = cfg or SlipConfig()
    grid = model.grid
    patch = whole_domain(grid)[0]
    w = w0 if w0 is not None else _default_w0(grid, value_set)
    objective = Objective(model, alpha)
    t0 = time.perf_counter()
    J, F, TV = objective(w)
    records, iterates = [], [w]
    n_sub = 0
    reason = MAX_OUTER_ITERS
    for n in range(cfg.max_outer_iters):
        g = model.gradient(w)
        delta = cfg.delta0
        rec = IterationRecord(n, J, J, F, TV)
        while True:
            step = solve(TrustRegionSubproblem(w, g, patch, delta, alpha), cfg.solver, cfg.dfs_cap)
            n_sub += 1
            if step.pred <= 0:
                step = None
                break
            J_trial, F_trial, TV_trial = objective(step.trial)
            if J - J_trial >= cfg.sigma * step.pred:
                break
            delta = delta / 2
        if step is None:
            rec.terminal = True
            records.append(rec)
            reason = STATIONARY
            break
        w, J, F, TV = step.trial, J_trial, F_trial, TV_trial
        rec.J_after, rec.F, rec.TV = J, F, TV
        records.append(rec)
        iterates.append(w)
    return RunResult(w, records, reason, J, F, TV, n_sub, time.perf_counter() - t0, iterates=iterates)
