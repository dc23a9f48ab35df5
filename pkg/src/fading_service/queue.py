"""Fluid FIFO queue fed at constant rate R and drained by the fading channel.

With arrivals A(t) = B0 + R t and offered service S(t), the utilised service
and the backlog follow the min-plus form

    S~(t_n) = min(S(t_n), min_{1<=k<=n} [A(t_k) + S(t_n) - S(t_k)]),
    B(t_n)  = A(t_n) - S~(t_n),

which is the Lindley recursion B <- max(B + R dtau - dS, 0) with arrivals
credited before service in each step.  It is evaluated chunk by chunk with
running minima, so no per-step Python loop is needed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .channel import RNG_ALGORITHM, LinkBudget, RngStream
from .errors import BudgetExceeded, DomainError, InsufficientData
from .mcsim import DEFAULT_SAMPLE_BUDGET, capacity_chunks, describe_model

DEFAULT_RECORD_POINTS = 200_000


@dataclass(frozen=True)
class QueueConfig:
    source_rate_r: float
    horizon_s: float
    delta_tau_s: float
    initial_backlog: float = 0.0
    record_every: Optional[int] = None
    sample_budget: int = DEFAULT_SAMPLE_BUDGET

    def __post_init__(self):
        if not (math.isfinite(self.source_rate_r) and self.source_rate_r >= 0):
            raise DomainError(f"source_rate_r must be >= 0, got {self.source_rate_r}")
        if not (math.isfinite(self.initial_backlog) and self.initial_backlog >= 0):
            raise DomainError(f"initial_backlog must be >= 0, got {self.initial_backlog}")
        if not (math.isfinite(self.delta_tau_s) and self.delta_tau_s > 0):
            raise DomainError(f"delta_tau_s must be > 0, got {self.delta_tau_s}")
        if not (math.isfinite(self.horizon_s) and self.horizon_s >= self.delta_tau_s):
            raise DomainError("horizon_s must be >= delta_tau_s")
        if self.record_every is not None and int(self.record_every) < 1:
            raise DomainError(f"record_every must be >= 1, got {self.record_every}")

    @property
    def steps(self) -> int:
        return int(round(self.horizon_s / self.delta_tau_s))

    @property
    def stride(self) -> int:
        if self.record_every is not None:
            return int(self.record_every)
        return max(1, -(-self.steps // DEFAULT_RECORD_POINTS))


@dataclass
class QueueTrace:
    """Queue state at the recorded steps, starting with t = 0.

    ``service_s`` is the offered service S(t) of the same stream, kept for
    comparison with ``s_tilde``.  ``delay`` and ``censored`` are filled by
    :func:`run_fluid_queue` from :func:`virtual_delays`.
    """

    t: np.ndarray
    backlog: np.ndarray
    s_tilde: np.ndarray
    service_s: np.ndarray
    delay: np.ndarray
    censored: np.ndarray
    source_rate_r: float
    initial_backlog: float
    metadata: dict

    @property
    def arrivals(self) -> np.ndarray:
        return self.initial_backlog + self.source_rate_r * self.t

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_s", "backlog_nats", "s_tilde_nats", "delay_s"])
        for row in zip(self.t, self.backlog, self.s_tilde, self.delay):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def run_fluid_queue(model, link: LinkBudget, qcfg: QueueConfig, seed: int) -> QueueTrace:
    """Simulate the queue over ``qcfg.horizon_s`` using stream (seed, 0).

    The stream and chunking match round 0 of :func:`mcsim.simulate_service`
    with the same seed, so ``service_s`` is that round's S(t).
    """
    n_steps = qcfg.steps
    if n_steps > qcfg.sample_budget:
        raise BudgetExceeded(
            f"{n_steps:.3g} steps exceeds the sample budget {qcfg.sample_budget:.3g}; "
            "shorten the horizon or coarsen delta_tau"
        )
    dtau = qcfg.delta_tau_s
    r_step = qcfg.source_rate_r * dtau
    stride = qcfg.stride

    rec_idx = [np.zeros(1, dtype=np.int64)]
    rec_d = [np.array([qcfg.initial_backlog])]
    rec_m = [np.array([np.inf])]
    rec_s = [np.zeros(1)]

    d_carry = float(qcfg.initial_backlog)  # A - S
    m_carry = math.inf  # running min of A - S over steps >= 1
    s_carry = 0.0
    pos = 0
    for cap in capacity_chunks(model, link, RngStream(seed, 0), n_steps):
        ds = cap * dtau
        d = d_carry + np.cumsum(r_step - ds)
        m = np.minimum(np.minimum.accumulate(d), m_carry)
        s = s_carry + np.cumsum(ds)
        steps = np.arange(pos + 1, pos + 1 + cap.size)
        keep = (steps % stride == 0) | (steps == n_steps)
        rec_idx.append(steps[keep])
        rec_d.append(d[keep])
        rec_m.append(m[keep])
        rec_s.append(s[keep])
        d_carry, m_carry, s_carry = float(d[-1]), float(m[-1]), float(s[-1])
        pos += cap.size

    idx = np.concatenate(rec_idx)
    d = np.concatenate(rec_d)
    m = np.concatenate(rec_m)
    t = idx * dtau
    backlog = d - np.minimum(m, 0.0)
    arrivals = qcfg.initial_backlog + qcfg.source_rate_r * t
    # rounding can dent monotonicity by an ulp
    s_tilde = np.maximum.accumulate(np.maximum(arrivals - backlog, 0.0))
    trace = QueueTrace(
        t=t,
        backlog=backlog,
        s_tilde=s_tilde,
        service_s=np.concatenate(rec_s),
        delay=np.zeros_like(t),
        censored=np.zeros(t.size, dtype=bool),
        source_rate_r=float(qcfg.source_rate_r),
        initial_backlog=float(qcfg.initial_backlog),
        metadata={
            "model": describe_model(model),
            "link": asdict(link),
            "config": asdict(qcfg),
            "seed": int(seed),
            "rng_algorithm": RNG_ALGORITHM,
        },
    )
    trace.delay, trace.censored = virtual_delays(trace)
    return trace


def virtual_delays(trace: QueueTrace):
    """Virtual delay at every recorded time.

    D(t) = inf{d >= 0 : S~(t + d) >= A(t)}, found by search over the recorded
    S~ and linear interpolation between records.  When S~ never reaches A(t)
    within the trace, the delay is clamped to horizon - t and flagged.
    """
    st = trace.s_tilde
    t = trace.t
    target = trace.arrivals
    j = np.searchsorted(st, target, side="left")
    j = np.maximum(j, np.arange(t.size))
    censored = j >= t.size
    jc = np.minimum(j, t.size - 1)
    jp = np.maximum(jc - 1, 0)
    span = st[jc] - st[jp]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(span > 0, (target - st[jp]) / span, 1.0)
    frac = np.clip(frac, 0.0, 1.0)
    hit = np.where(jc > jp, t[jp] + frac * (t[jc] - t[jp]), t[jc])
    delay = np.maximum(hit - t, 0.0)
    delay = np.where(censored, t[-1] - t, delay)
    delay = np.where(trace.backlog <= 0.0, 0.0, delay)
    censored &= trace.backlog > 0.0
    return delay, censored


def virtual_delay(trace: QueueTrace, t: float) -> float:
    """Virtual delay for data arriving at time ``t`` (0 <= t <= horizon).

    Censored values come back clamped to horizon - t; :func:`virtual_delay_ex`
    also returns the censoring flag.
    """
    return virtual_delay_ex(trace, t)[0]


def virtual_delay_ex(trace: QueueTrace, t: float):
    """(delay, censored) for data arriving at time ``t``."""
    t = float(t)
    if not (trace.t[0] <= t <= trace.t[-1]):
        raise DomainError(f"t={t} lies outside the trace [0, {trace.t[-1]}]")
    backlog = float(np.interp(t, trace.t, trace.backlog))
    if backlog <= 0.0:
        return 0.0, False
    target = trace.initial_backlog + trace.source_rate_r * t
    st = trace.s_tilde
    j = int(np.searchsorted(st, target, side="left"))
    if j >= st.size:
        return float(trace.t[-1] - t), True
    if j == 0 or st[j] == st[j - 1]:
        hit = float(trace.t[j])
    else:
        frac = (target - st[j - 1]) / (st[j] - st[j - 1])
        hit = float(trace.t[j - 1] + frac * (trace.t[j] - trace.t[j - 1]))
    return max(hit - t, 0.0), False


def drain_time(trace: QueueTrace, t: float = 0.0) -> float:
    """Time from ``t`` until the backlog first empties; ``inf`` if it never does."""
    after = np.nonzero((trace.t >= t) & (trace.backlog <= 0.0))[0]
    if after.size == 0:
        return math.inf
    k = after[0]
    if k == 0 or trace.t[k - 1] < t:
        return float(trace.t[k] - t)
    # interpolate the zero crossing of B between the two records
    b0, b1 = trace.backlog[k - 1], trace.backlog[k]
    t0, t1 = trace.t[k - 1], trace.t[k]
    return float(t0 + (t1 - t0) * b0 / (b0 - b1) - t)


@dataclass(frozen=True)
class QueueSummary:
    max_backlog: float
    max_backlog_after_settle: float
    settle_s: float
    mean_backlog: float
    mean_delay: float
    max_delay: float
    censored_count: int
    growth_slope: float
    growth_intercept: float

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(trace: QueueTrace, settle_s: float = 0.1) -> QueueSummary:
    """Backlog and delay statistics; ``growth_slope`` is an OLS fit of B against t."""
    if trace.t.size < 2:
        raise InsufficientData("queue summary needs at least 2 recorded points")
    after = trace.t >= settle_s
    b_after = trace.backlog[after]
    t = trace.t
    tm = t.mean()
    slope = float(np.sum((t - tm) * (trace.backlog - trace.backlog.mean())) / np.sum((t - tm) ** 2))
    return QueueSummary(
        max_backlog=float(trace.backlog.max()),
        max_backlog_after_settle=float(b_after.max()) if b_after.size else 0.0,
        settle_s=float(settle_s),
        mean_backlog=float(trace.backlog.mean()),
        mean_delay=float(trace.delay.mean()),
        max_delay=float(trace.delay.max()),
        censored_count=int(trace.censored.sum()),
        growth_slope=slope,
        growth_intercept=float(trace.backlog.mean() - slope * tm),
    )
