"""Homotopy solver for assignment-form optimal transport.

The target cloud is first rotated in sample space by the Procrustes
optimum ``Q*``, where the identity plan is optimal. The rotation is then
undone in ``h`` equal steps of ``Q*^(1/h)``; at every step the previous
plan warm-starts a refinement on the partially rotated target. The last
step works on the untouched target, so the final plan solves the original
problem whenever the refinement is exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ._checks import as_cloud_pair
from .assignment import (
    STRATEGIES,
    Permutation,
    apply_permutation,
    compose,
    cost,
    greedysort,
    refine_with_info,
)
from .linalg import RandomizedSVD, SvdMode, gram, orthogonal_root, procrustes

DEFAULT_STEPS = 4


@dataclass(frozen=True)
class HomotopyConfig:
    steps: int = DEFAULT_STEPS
    f_strategy: str = "local"
    svd_mode: SvdMode = "full"
    greedy_init: bool = True
    max_passes: Optional[int] = None

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if self.f_strategy not in STRATEGIES:
            raise ValueError(f"f_strategy must be one of {STRATEGIES}, got {self.f_strategy!r}")
        if not (self.svd_mode == "full" or isinstance(self.svd_mode, RandomizedSVD)):
            raise ValueError(f"unknown svd mode {self.svd_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.svd_mode, RandomizedSVD):
            d["svd_mode"] = f"randomized:{self.svd_mode.k}:{self.svd_mode.seed}"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HomotopyConfig":
        d = dict(d)
        d["svd_mode"] = parse_svd_mode(d.get("svd_mode", "full"))
        return cls(**d)


def parse_svd_mode(text: str) -> SvdMode:
    """Parse ``full`` or ``randomized:K:SEED``."""
    if text == "full":
        return "full"
    parts = text.split(":")
    if len(parts) == 3 and parts[0] == "randomized":
        try:
            return RandomizedSVD(int(parts[1]), int(parts[2]))
        except ValueError:
            pass
    raise ValueError(f"svd mode must be 'full' or 'randomized:K:SEED', got {text!r}")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    path_position: float
    kappa_before: Optional[float]
    kappa_after: float


@dataclass
class HomotopyTrace:
    """Cost before and after refinement at each point of the path.

    Records run from ``i = h`` (rotated target, no refinement) down to
    ``i = 0`` (original target).
    """

    steps: int
    records: list[TraceRecord] = field(default_factory=list)

    def jumps(self) -> list[float]:
        """Cost increase caused by moving along the path before refining."""
        out = []
        for prev, rec in zip(self.records, self.records[1:]):
            if rec.kappa_before is not None:
                out.append(rec.kappa_before - prev.kappa_after)
        return out

    def max_jump(self) -> float:
        jumps = self.jumps()
        return max(jumps) if jumps else 0.0

    def plot_points(self) -> list[tuple[float, float]]:
        """(path_position, kappa) vertices; refinements show as vertical drops."""
        points = []
        for rec in self.records:
            if rec.kappa_before is not None:
                points.append((rec.path_position, rec.kappa_before))
            points.append((rec.path_position, rec.kappa_after))
        return points


@dataclass
class SolveReport:
    plan: Permutation
    kappa: float
    lower_bound: float
    trace: HomotopyTrace
    config: HomotopyConfig
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.tolist(),
            "kappa": self.kappa,
            "lower_bound": self.lower_bound,
            "config": self.config.to_dict(),
            "trace": [asdict(r) for r in self.trace.records],
            "warnings": list(self.warnings),
            "timings": dict(self.timings),
            **self.extras,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        known = {"plan", "kappa", "lower_bound", "config", "trace", "warnings", "timings"}
        config = HomotopyConfig.from_dict(d["config"])
        trace = HomotopyTrace(config.steps, [TraceRecord(**r) for r in d["trace"]])
        return cls(
            plan=Permutation(np.asarray(d["plan"], dtype=np.intp)),
            kappa=float(d["kappa"]),
            lower_bound=float(d["lower_bound"]),
            trace=trace,
            config=config,
            warnings=list(d.get("warnings", [])),
            timings=dict(d.get("timings", {})),
            extras={k: v for k, v in d.items() if k not in known},
        )


def lower_bound(x, y, svd_mode: SvdMode = "full") -> float:
    """``||x - y Q*||_F``: the cost under the best orthogonal relaxation."""
    x, y = as_cloud_pair(x, y)
    q = procrustes(gram(x, y), svd_mode)
    return float(np.linalg.norm(x - y @ q.entries))


def solve(x, y, config: HomotopyConfig | None = None) -> SolveReport:
    config = config or HomotopyConfig()
    x, y = as_cloud_pair(x, y)
    n = x.shape[1]
    h = int(config.steps)
    timings = {}
    clock = time.perf_counter()
    start = clock

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    g = greedysort(x, y) if config.greedy_init else Permutation.identity(n)
    y_g = apply_permutation(y, g)
    lap("greedy")

    q_star = procrustes(gram(x, y_g), config.svd_mode)
    lap("procrustes")
    t_delta = orthogonal_root(q_star, h)
    warnings = list(t_delta.warnings)
    lap("root")

    # walk down from y_g Q* using T^i = T^(i+1) T^H; i = 0 is y_g exactly
    step_back = t_delta.entries.conj().T
    rotated = y_g @ q_star.entries
    bound = float(np.linalg.norm(x - rotated))
    trace = HomotopyTrace(h, [TraceRecord(h, 0.0, None, bound)])
    plan = Permutation.identity(n)
    for i in range(h - 1, -1, -1):
        if i == 0:
            y_i = y_g
        else:
            rotated = rotated @ step_back
            y_i = np.ascontiguousarray(rotated.real)
        before = cost(x, y_i, plan)
        plan, info = refine_with_info(x, y_i, plan, config.f_strategy, config.max_passes)
        if info.get("converged") is False:
            warnings.append(f"local refinement hit its pass cap at iteration {i}")
        trace.records.append(TraceRecord(i, (h - i) / h, before, cost(x, y_i, plan)))
    lap("path")

    final = compose(g, plan)
    kappa = cost(x, y, final)
    timings["total"] = time.perf_counter() - start
    return SolveReport(final, kappa, bound, trace, config, warnings, timings)


def step_study(x, y, h_values, f_strategy: str = "local", svd_mode: SvdMode = "full",
               greedy_init: bool = True) -> list[tuple[int, HomotopyTrace]]:
    """Solve the same instance for several step counts.

    Every trace is keyed by normalized path position in ``[0, 1]``, so the
    results overlay directly.
    """
    h_values = list(h_values)
    if not h_values:
        raise ValueError("h_values must not be empty")
    out = []
    for h in h_values:
        cfg = HomotopyConfig(steps=h, f_strategy=f_strategy, svd_mode=svd_mode,
                             greedy_init=greedy_init)
        out.append((h, solve(x, y, cfg).trace))
    return out


def is_power_of_two(h: int) -> bool:
    return h >= 1 and (h & (h - 1)) == 0


def relative_close(a: float, b: float, rel: float, scale: float = 0.0) -> bool:
    """``|a - b| <= rel * max(|a|, |b|, scale)``."""
    return math.fabs(a - b) <= rel * max(abs(a), abs(b), scale)
