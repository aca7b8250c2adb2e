"""Python front end of the kinetic Monte Carlo simulator."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import EventBudgetExceeded, NonFiniteRate, OverflowRisk, ValidationError
from ..lattice import DensityPath, InitialProfile, Perturbation, ReactionSpec, TorusGrid
from . import _fallback

log = logging.getLogger(__name__)

try:
    if os.environ.get("HDLDEV_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure Python backend forced")
    from . import _kernel as _backend
    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised only without a compiler
    _backend = _fallback
    BACKEND = "python"

# event kinds in the log
JUMP_RIGHT, JUMP_LEFT, BIRTH, DEATH = 0, 1, 2, 3
KIND_NAMES = ("JumpRight", "JumpLeft", "Birth", "Death")

REBUILD_EVERY = 1 << 16
DEFAULT_BUDGET = 10**9
# events are kept when the expected count is at most this
RECORD_THRESHOLD = 10**6
# largest (events x sites) table materialised as an exact DensityPath
PATH_ENTRY_LIMIT = 2 * 10**7


@dataclass(frozen=True)
class SimParams:
    grid: TorusGrid
    ell: int
    reaction: ReactionSpec
    perturbation: Perturbation = field(default_factory=Perturbation.zero)

    @property
    def n_sites(self) -> int:
        return self.grid.n_sites


@dataclass
class ParticleState:
    """Occupation counts with the matching rate table.

    ``rate_table`` has shape (N, 4): jump right, jump left, birth, death.
    """

    time: float
    counts: np.ndarray
    rate_table: np.ndarray
    total_rate: float


def tilt_profile(h: Perturbation, grid: TorusGrid, t: float) -> np.ndarray:
    """H(t, k/N) on the lattice."""
    return np.asarray(h.H(t, grid.points()), dtype=float)


def build_rates(counts, h: Perturbation, t: float, params: SimParams) -> ParticleState:
    """Rate table of the (possibly tilted) chain in state ``counts`` at time t."""
    eta = np.asarray(counts, dtype=np.int64)
    n = params.n_sites
    if eta.shape != (n,):
        raise ValidationError(f"counts must have length {n}")
    if np.any(eta < 0):
        raise ValidationError("counts must be non-negative")
    ell = float(params.ell)
    hk = tilt_profile(h, params.grid, t)
    with np.errstate(over="ignore", invalid="ignore"):
        up = np.exp(np.roll(hk, -1) - hk)
        down = np.exp(np.roll(hk, 1) - hk)
        eb = np.exp(hk)
        ed = np.exp(-hk)
        x = eta / ell
        table = np.empty((n, 4))
        table[:, 0] = n * n * eta * up
        table[:, 1] = n * n * eta * down
        table[:, 2] = ell * params.reaction.birth(x) * eb
        table[:, 3] = ell * params.reaction.death(x) * ed
    if not np.all(np.isfinite(table)):
        raise NonFiniteRate("rate table contains non-finite entries")
    return ParticleState(float(t), eta.copy(), table, float(table.sum()))


@dataclass
class WeightAccumulator:
    """Running log Radon-Nikodym weight log(dP / dP^H) = -compensator + event_sum."""

    event_sum: float = 0.0
    compensator: float = 0.0

    @property
    def log_weight(self) -> float:
        return -self.compensator + self.event_sum


def log_rn_weight_exact(acc: WeightAccumulator) -> float:
    return acc.log_weight


@dataclass
class EventLog:
    """Accepted events of one trajectory (times, kinds, origin sites)."""

    n_sites: int
    times: np.ndarray
    kinds: np.ndarray
    sites: np.ndarray

    def __len__(self):
        return len(self.times)

    def targets(self) -> np.ndarray:
        """Site that gains a particle (jumps) or the event site (birth/death)."""
        n = self.n_sites
        s = self.sites.astype(np.int64)
        out = s.copy()
        out[self.kinds == JUMP_RIGHT] = (s[self.kinds == JUMP_RIGHT] + 1) % n
        out[self.kinds == JUMP_LEFT] = (s[self.kinds == JUMP_LEFT] - 1) % n
        return out

    def increments(self) -> np.ndarray:
        """(events, N) array of count changes, one row per event."""
        m, n = len(self), self.n_sites
        inc = np.zeros((m, n), dtype=np.int64)
        rows = np.arange(m)
        s = self.sites.astype(np.int64)
        jump = (self.kinds == JUMP_RIGHT) | (self.kinds == JUMP_LEFT)
        inc[rows[jump], s[jump]] -= 1
        tg = self.targets()
        inc[rows[jump], tg[jump]] += 1
        inc[rows[self.kinds == BIRTH], s[self.kinds == BIRTH]] += 1
        inc[rows[self.kinds == DEATH], s[self.kinds == DEATH]] -= 1
        return inc


@dataclass
class SimResult:
    params: SimParams
    initial_counts: np.ndarray
    t_final: float
    t_end: float
    path: DensityPath
    events: Optional[EventLog]
    weights: WeightAccumulator
    sup_error: Optional[float]
    n_events: int
    n_rejected: int
    max_drift: float
    seed: int = 0
    replica: int = 0

    @property
    def complete(self) -> bool:
        return self.t_end >= self.t_final

    @property
    def final_counts(self) -> np.ndarray:
        return np.asarray(self.path.counts[-1])

    def states(self) -> np.ndarray:
        """(events + 1, N) counts: the initial state then the state after each event."""
        if self.events is None:
            raise ValidationError("trajectory was run without an event log")
        inc = self.events.increments()
        return np.vstack([self.initial_counts, self.initial_counts + np.cumsum(inc, axis=0)])


def replica_stream(seed: int, replica: int) -> np.random.Philox:
    """Counter-based stream for replica ``replica`` of run ``seed``."""
    return np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(replica),)))


def initial_counts(params: SimParams, profile: InitialProfile) -> np.ndarray:
    return profile.counts(params.grid, params.ell)


def _hflag(h: Perturbation) -> int:
    if h.is_zero:
        return 0
    return 2 if h.time_dependent else 1


def simulate(params: SimParams, counts0, t_final: float, seed: int = 0, replica: int = 0, *,
             record="auto", reference=None, weights: bool = True,
             budget: int = DEFAULT_BUDGET, n_snapshots: int = 1001,
             backend=None, allow_partial: bool = False) -> SimResult:
    """Simulate one trajectory of the chain tilted by ``params.perturbation``.

    Parameters
    ----------
    params : SimParams
    counts0 : array_like
        Initial occupation numbers.
    t_final : float
    seed, replica : int
        Select the random stream (see :func:`replica_stream`).
    record : bool or "auto"
        Keep the full event log. ``"auto"`` keeps it when the expected event
        count (initial total rate times ``t_final``) is at most 10**6.
    reference : (psi, dt) or None
        Lattice values of a deterministic profile on the uniform time grid
        ``0, dt, 2 dt, ...`` covering ``[0, t_final]``; when given, the exact
        sup over the trajectory of ``max_k |X_k(t) - psi_k(t)|`` is tracked
        online, with psi linear in time between grid points.
    weights : bool
        Accumulate the exact log Radon-Nikodym weight against the untilted chain.
    budget : int
        Event cap; exceeding it raises ``EventBudgetExceeded`` unless
        ``allow_partial`` is set.

    Returns
    -------
    SimResult
    """
    if not t_final > 0:
        raise ValidationError("t_final must be positive")
    n = params.n_sites
    eta0 = np.asarray(counts0, dtype=np.int64)
    if eta0.shape != (n,) or np.any(eta0 < 0):
        raise ValidationError("initial counts must be a non-negative vector of length N")
    h = params.perturbation
    hflag = _hflag(h)
    a = h.spatial(params.grid.points()) if hflag else np.zeros(n)
    t_code, t_rate = h.kernel_params()
    if hflag:
        c_max = 2.0 * float(np.max(np.abs(a))) * h.g_sup(t_final)
        if c_max > 700.0:
            raise NonFiniteRate(f"tilt exponent {c_max:g} overflows double precision")
    if record == "auto":
        lam0 = build_rates(eta0, h, 0.0, params).total_rate
        record = lam0 * t_final <= RECORD_THRESHOLD
    ref, ref_dt = None, 1.0
    if reference is not None:
        ref, ref_dt = reference
        ref = np.ascontiguousarray(ref, dtype=float)
        if ref.ndim != 2 or ref.shape[1] != n or (ref.shape[0] - 1) * ref_dt < t_final * (1 - 1e-12):
            raise ValidationError("reference must be (n_times, N) covering [0, t_final]")
    snap_times = np.linspace(0.0, t_final, n_snapshots)
    kernel = _backend if backend is None else backend
    out = kernel.run(n, int(params.ell), eta0, float(t_final),
                     params.reaction.birth.code, params.reaction.birth.kernel_params(),
                     params.reaction.death.code, params.reaction.death.kernel_params(),
                     np.ascontiguousarray(a, dtype=float), t_code, t_rate, hflag,
                     0.1 / (n * n), bool(record), snap_times, ref, float(ref_dt),
                     bool(weights), int(budget), REBUILD_EVERY, 1.0 / (n * n),
                     replica_stream(seed, replica))
    status = out["status"]
    if status == 2:
        raise NonFiniteRate("total rate became non-finite")
    if status == 3:
        raise OverflowRisk("site count reached the 64-bit guard")

    events = None
    if record:
        events = EventLog(n, out["ev_t"], out["ev_kind"], out["ev_site"])
    t_end = float(out["t_end"])
    if events is not None and len(events) * n <= PATH_ENTRY_LIMIT:
        inc = events.increments()
        counts = np.vstack([eta0, eta0 + np.cumsum(inc, axis=0)])
        times = np.concatenate([[0.0], events.times])
        path = DensityPath(params.ell, times, counts, t_end, exact=True)
    else:
        snaps = out["snaps"]
        path = DensityPath(params.ell, snap_times[: len(snaps)], snaps, t_end, exact=False)
        if path.times[-1] < t_end:
            path = DensityPath(params.ell, np.append(path.times, t_end),
                               np.vstack([snaps, out["counts"]]), t_end, exact=False)
    sup_err = out["sup_err"] if ref is not None else None
    path.running_sup_error = sup_err
    res = SimResult(params, eta0.copy(), float(t_final), t_end, path, events,
                    WeightAccumulator(out["event_sum"], out["compensator"]), sup_err,
                    int(out["n_events"]), int(out["n_rejected"]), float(out["max_drift"]),
                    int(seed), int(replica))
    if status == 1 and not allow_partial:
        exc = EventBudgetExceeded(f"event budget {budget} exhausted at t={t_end:g}")
        exc.result = res
        raise exc
    return res
