"""Monte Carlo construction of the service process S(t) = sum_n C(t_n) dtau.

Each round draws i.i.d. power gains from its own stream (base_seed, round),
accumulates increments with compensated summation and records S at evenly
spaced checkpoints.  Rounds are independent, so they may run on a thread
pool; the result does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import RNG_ALGORITHM, Deterministic, LinkBudget, RngStream, sample_power_gain
from .errors import BudgetExceeded, DomainError, InsufficientData

DEFAULT_SAMPLE_BUDGET = 10 ** 10
CHUNK_STEPS = 1 << 18


class CompensatedSum:
    """Running sum with Neumaier's correction term."""

    __slots__ = ("_sum", "_comp")

    def __init__(self, value=0.0):
        self._sum = float(value)
        self._comp = 0.0

    def add(self, x):
        x = float(x)
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._comp += (self._sum - t) + x
        else:
            self._comp += (x - t) + self._sum
        self._sum = t

    @property
    def value(self):
        return self._sum + self._comp


@dataclass(frozen=True)
class SimConfig:
    delta_tau_s: float
    horizon_s: float
    rounds: int
    base_seed: int = 2012
    checkpoints: int = 100
    sample_budget: int = DEFAULT_SAMPLE_BUDGET

    def __post_init__(self):
        if not (math.isfinite(self.delta_tau_s) and self.delta_tau_s > 0):
            raise DomainError(f"delta_tau_s must be > 0, got {self.delta_tau_s}")
        if not (math.isfinite(self.horizon_s) and self.horizon_s >= self.delta_tau_s):
            raise DomainError("horizon_s must be >= delta_tau_s")
        if int(self.rounds) < 1:
            raise DomainError(f"rounds must be >= 1, got {self.rounds}")
        if self.steps < 10:
            raise DomainError(f"need at least 10 steps per round, got {self.steps}")
        if not (1 <= int(self.checkpoints) <= self.steps):
            raise DomainError(f"checkpoints must lie in [1, {self.steps}], got {self.checkpoints}")

    @property
    def steps(self) -> int:
        return int(round(self.horizon_s / self.delta_tau_s))

    @property
    def checkpoint_steps(self) -> np.ndarray:
        k = np.arange(1, self.checkpoints + 1)
        return np.rint(k * self.steps / self.checkpoints).astype(np.int64)

    def check_budget(self):
        total = self.steps * int(self.rounds)
        if total > self.sample_budget:
            raise BudgetExceeded(
                f"{self.rounds} rounds x {self.steps} steps = {total:.3g} samples exceeds the "
                f"budget of {self.sample_budget:.3g}; use fewer rounds, a shorter horizon or a "
                "coarser delta_tau (or raise sample_budget deliberately)"
            )


def capacity_chunks(model, link: LinkBudget, stream: RngStream, n_steps: int, chunk: int = CHUNK_STEPS):
    """Yield per-step capacities C(gamma_n) in nats/s, ``chunk`` steps at a time.

    The chunking is fixed so that every consumer of a stream sees the same draws.
    """
    gen = stream.generator()
    done = 0
    while done < n_steps:
        n = min(chunk, n_steps - done)
        if isinstance(model, Deterministic):
            gamma = np.full(n, float(link.pr))
        else:
            gamma = sample_power_gain(model, link.pr, gen, size=n)
        yield link.w_hz * np.log1p(gamma * link.snr_scale)
        done += n


def _run_round(model, link, cfg, r, marks):
    acc = CompensatedSum()
    out = np.empty(marks.size)
    pos = 0
    mark_i = 0
    dtau = cfg.delta_tau_s
    for cap in capacity_chunks(model, link, RngStream(cfg.base_seed, r), cfg.steps):
        start = 0
        end = cap.size
        while mark_i < marks.size and marks[mark_i] <= pos + end:
            cut = int(marks[mark_i] - pos)
            acc.add(np.sum(cap[start:cut]) * dtau)
            out[mark_i] = acc.value
            start = cut
            mark_i += 1
        if start < end:
            acc.add(np.sum(cap[start:end]) * dtau)
        pos += end
    return out


@dataclass
class ServiceTrace:
    """Cumulative service at checkpoints, one row per round (nats)."""

    times: np.ndarray
    s_cum: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def finals(self) -> np.ndarray:
        return self.s_cum[:, -1]

    @property
    def rounds(self) -> int:
        return self.s_cum.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "t_s", "s_nats"])
        for r, row in enumerate(self.s_cum):
            for t, s in zip(self.times, row):
                w.writerow([r, repr(float(t)), repr(float(s))])
        return buf.getvalue()


def simulate_service(model, link: LinkBudget, cfg: SimConfig, threads: int = 1) -> ServiceTrace:
    """Simulate ``cfg.rounds`` independent realisations of S(t)."""
    cfg.check_budget()
    marks = cfg.checkpoint_steps

    def one(r):
        return _run_round(model, link, cfg, r, marks)

    if threads > 1 and cfg.rounds > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(cfg.rounds)))
    else:
        rows = [one(r) for r in range(cfg.rounds)]
    return ServiceTrace(
        times=marks * cfg.delta_tau_s,
        s_cum=np.vstack(rows),
        metadata={
            "model": describe_model(model),
            "link": asdict(link),
            "config": asdict(cfg),
            "rng_algorithm": RNG_ALGORITHM,
        },
    )


def describe_model(model) -> dict:
    name = type(model).__name__.lower()
    out = {"kind": name}
    for attr in ("m", "k"):
        if hasattr(model, attr) and not callable(getattr(model, attr)):
            out[attr] = getattr(model, attr)
    if name == "generic":
        out["support_hint"] = list(model.support_hint)
    return out


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearityStats:
    mean_final: float
    std_final: float
    max_dev_ratio: float
    max_dev_ratio_vs_cstar: float
    slope_fit: float
    intercept_fit: float
    r_squared: float
    c_star: float

    @property
    def slope_rel_error(self) -> float:
        return abs(self.slope_fit - self.c_star) / self.c_star if self.c_star else abs(self.slope_fit)


def linearity_stats(trace: ServiceTrace, c_star: float) -> LinearityStats:
    """Across-round spread of S(T) and a pooled least-squares line through all checkpoints."""
    if trace.rounds < 2:
        raise InsufficientData("linearity statistics need at least 2 rounds")
    if trace.times.size < 2:
        raise InsufficientData("linearity statistics need at least 2 checkpoints")
    finals = trace.finals
    mean = float(np.mean(finals))
    std = float(np.std(finals, ddof=1))
    dev = np.abs(finals - mean)
    max_dev = float(dev.max() / mean) if mean > 0 else float(dev.max())
    horizon = float(trace.times[-1])
    target = c_star * horizon
    dev_c = np.abs(finals - target)
    max_dev_c = float(dev_c.max() / target) if target > 0 else float(dev_c.max())

    x = np.tile(trace.times, trace.rounds)
    y = trace.s_cum.ravel()
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sxy = float(np.sum((x - xm) * (y - ym)))
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearityStats(
        mean_final=mean,
        std_final=std,
        max_dev_ratio=max_dev,
        max_dev_ratio_vs_cstar=max_dev_c,
        slope_fit=slope,
        intercept_fit=intercept,
        r_squared=min(max(r2, 0.0), 1.0),
        c_star=float(c_star),
    )


def empirical_cf(finals: Sequence[float], c_star: float, horizon_s: float, lambda_grid: Sequence[float]):
    """Distance between the empirical CF of S(T) and that of the constant c* T.

    Returns ``[(lam, |phi_hat(lam) - exp(i lam c* T)|), ...]``.
    """
    finals = np.asarray(finals, dtype=float)
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise DomainError("lambda grid is empty")
    if finals.size < 30:
        raise InsufficientData(f"empirical CF needs at least 30 rounds, got {finals.size}")
    target = c_star * horizon_s
    out = []
    for lam in grid:
        if abs(lam * target) > 1e3:
            raise DomainError(f"|lambda c* T| = {abs(lam * target):.3g} exceeds 1e3")
        # |mean(e^{i lam S}) - e^{i lam c T}| == |mean(e^{i lam (S - cT)}) - 1|
        phase = lam * (finals - target)
        dev = abs(complex(np.mean(np.cos(phase)) - 1.0, np.mean(np.sin(phase))))
        out.append((lam, dev))
    return out


# ---------------------------------------------------------------------------
# Increment scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IncrementRow:
    delta_tau_s: float
    steps: int
    max_increment: float
    tail_fraction: float


@dataclass(frozen=True)
class IncrementScan:
    epsilon: float
    rows: tuple

    def _by_decreasing_dtau(self):
        return sorted(self.rows, key=lambda r: -r.delta_tau_s)

    @property
    def max_nonincreasing(self) -> bool:
        v = [r.max_increment for r in self._by_decreasing_dtau()]
        return all(b <= a for a, b in zip(v, v[1:]))

    @property
    def tail_nonincreasing(self) -> bool:
        v = [r.tail_fraction for r in self._by_decreasing_dtau()]
        return all(b <= a for a, b in zip(v, v[1:]))


def max_increment_scan(
    model,
    link: LinkBudget,
    delta_tau_list: Sequence[float],
    horizon_s: float,
    seed: int,
    epsilon: Optional[float] = None,
    c_star: Optional[float] = None,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
) -> IncrementScan:
    """Largest single increment and P(increment > epsilon) for each sampling interval.

    ``epsilon`` defaults to c* * 1e-4 * horizon.
    """
    if epsilon is None:
        if c_star is None:
            from .service_rate import service_rate

            c_star = service_rate(model, link).c_star
        epsilon = c_star * 1e-4 * horizon_s
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    rows = []
    for i, dtau in enumerate(delta_tau_list):
        n = int(round(horizon_s / dtau))
        if n < 1 or abs(n * dtau - horizon_s) > 1e-9 * horizon_s:
            raise DomainError(f"delta_tau {dtau} does not divide the horizon {horizon_s}")
        if n > sample_budget:
            raise BudgetExceeded(f"{n} samples for delta_tau={dtau} exceeds the budget {sample_budget}")
        biggest = 0.0
        above = 0
        for cap in capacity_chunks(model, link, RngStream(seed, i), n):
            inc = cap * dtau
            biggest = max(biggest, float(inc.max()))
            above += int(np.count_nonzero(inc > epsilon))
        rows.append(IncrementRow(float(dtau), n, biggest, above / n))
    return IncrementScan(epsilon=float(epsilon), rows=tuple(rows))
