"""Self-contained model of the online reorganization problem.

A run lasts N rounds. At round i a strategy either rebuilds (pays the fixed
cost S) or pays the incremental cost c[s][i], where s is its last rebuild
round (round 0 counts as an initial free organization point). Cost matrices
are monotone by default: rebuilding more recently never raises a later round's
cost. The module provides the threshold (ski-rental) strategy, an exact
optimal schedule via dynamic programming, adversarial lower-bound families,
and the non-monotone construction under which no bounded ratio is possible.

Convention: the diagonal c[i][i] is the residual cost a schedule still pays at
its own rebuild round. Physical instances have c[i][i] = 0 (a fresh rebuild
leaves nothing to reclassify) and all generators here produce zero diagonals;
the threshold runner likewise pays only S in a rebuild round.
"""

from __future__ import annotations

import io
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .policy import alpha_from_scan_ratio


@dataclass(frozen=True)
class Schedule:
    """Strictly increasing rebuild rounds starting at the implicit round 0."""

    rounds: tuple[int, ...]

    def __post_init__(self):
        if not self.rounds or self.rounds[0] != 0:
            raise ValueError("a schedule starts at round 0")
        if any(b <= a for a, b in zip(self.rounds, self.rounds[1:])):
            raise ValueError("schedule rounds must be strictly increasing")

    @property
    def reorg_count(self) -> int:
        return len(self.rounds) - 1

    def to_text(self) -> str:
        return " ".join(str(u) for u in self.rounds)

    @classmethod
    def from_text(cls, text: str) -> "Schedule":
        return cls(tuple(int(tok) for tok in text.split()))


def last_reorg_before(schedule: Schedule, i: int) -> int:
    """Largest schedule element <= i (round 0 guarantees one exists)."""
    if i < 0:
        raise ValueError("round index must be non-negative")
    pos = bisect_right(schedule.rounds, i)
    return schedule.rounds[pos - 1]


class CostMatrix:
    """Dense cost table c[s][i] for 0 <= s <= i <= N, with 0 <= c <= S.

    sigma is the scan-to-rebuild time ratio of the modeled system; instances
    that honor it keep per-round incremental costs at or below sigma * S.
    Monotonicity (c[s][i] >= c[s'][i] for s <= s') is checked at construction
    unless allow_nonmonotone is set, which exists only for the counterexample
    demonstration.
    """

    def __init__(
        self,
        costs: np.ndarray,
        reorg_cost: float,
        sigma: float = 0.0,
        allow_nonmonotone: bool = False,
        enforce_cap: bool = True,
    ):
        c = np.asarray(costs, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("costs must be a square (N+1) x (N+1) array")
        if reorg_cost <= 0:
            raise ValueError("rebuild cost must be positive")
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        n = c.shape[0] - 1
        iu = np.triu_indices(n + 1)
        vals = c[iu]
        if np.any(vals < -1e-12):
            raise ValueError("costs must be non-negative")
        # the competitive analysis presumes c <= S; opt out for bookkeeping-only use
        if enforce_cap and np.any(vals > reorg_cost + 1e-12):
            raise ValueError("costs must lie in [0, S]")
        if not allow_nonmonotone:
            for i in range(1, n + 1):
                col = c[: i + 1, i]
                if np.any(np.diff(col) > 1e-12):
                    raise ValueError(f"costs not monotone in the rebuild round at column {i}")
        self._c = c
        self.N = n
        self.S = float(reorg_cost)
        self.sigma = float(sigma)

    def cost(self, s: int, i: int) -> float:
        if not (0 <= s <= i <= self.N):
            raise ValueError(f"cost is defined for 0 <= s <= i <= N, got ({s}, {i})")
        return float(self._c[s, i])

    def row_tail(self, s: int) -> np.ndarray:
        """c[s][s+1 .. N] as a contiguous array (length N - s)."""
        return self._c[s, s + 1 :]

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self._c).copy()

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.N} {self.S!r} {self.sigma!r}\n")
        for s in range(self.N + 1):
            buf.write(" ".join(repr(float(v)) for v in self._c[s, s:]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, allow_nonmonotone: bool = False) -> "CostMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n_str, s_str, sig_str = lines[0].split()
        n = int(n_str)
        c = np.zeros((n + 1, n + 1), dtype=np.float64)
        for s in range(n + 1):
            row = [float(tok) for tok in lines[1 + s].split()]
            c[s, s:] = row
        return cls(c, float(s_str), float(sig_str), allow_nonmonotone=allow_nonmonotone)


class StructuredCosts:
    """Cost table given by a rule instead of a dense array; used for long horizons.

    rule(s, i) must be vectorizable over i via row_rule(s) -> array of
    c[s][s+1 .. N]. Subclasses define the two accessors.
    """

    N: int
    S: float
    sigma: float

    def cost(self, s: int, i: int) -> float:
        raise NotImplementedError

    def row_tail(self, s: int) -> np.ndarray:
        raise NotImplementedError

    def diagonal(self) -> np.ndarray:
        return np.array([self.cost(u, u) for u in range(self.N + 1)])


class DripCosts(StructuredCosts):
    """Constant drip of eps per round until the store was rebuilt at or after
    round `escape`; rebuilds at earlier rounds do not stop the drip.

    escape = None is the pure drip (no rebuild ever helps). Monotone: the cost
    of a round never increases when the last rebuild is more recent.
    """

    def __init__(self, n: int, reorg_cost: float, eps: float, escape: int | None, sigma: float = 0.0):
        if eps < 0 or eps > reorg_cost:
            raise ValueError("eps must lie in [0, S]")
        self.N = int(n)
        self.S = float(reorg_cost)
        self.sigma = float(sigma)
        self.eps = float(eps)
        self.escape = escape

    def cost(self, s: int, i: int) -> float:
        if not (0 <= s <= i <= self.N):
            raise ValueError(f"cost is defined for 0 <= s <= i <= N, got ({s}, {i})")
        if self.escape is not None and s >= self.escape:
            return 0.0
        return self.eps

    def row_tail(self, s: int) -> np.ndarray:
        n = self.N - s
        if self.escape is not None and s >= self.escape:
            return np.zeros(n)
        return np.full(n, self.eps)

    def diagonal(self) -> np.ndarray:
        d = np.full(self.N + 1, self.eps)
        if self.escape is not None:
            d[self.escape :] = 0.0
        return d


class StubbornCosts(StructuredCosts):
    """Non-monotone counterexample: every round costs `unit` no matter when the
    store was rebuilt, except that a rebuild at exactly round `magic` zeroes all
    later costs. Rebuilding later than `magic` is worse than rebuilding at it,
    so the monotonicity premise fails and no strategy has a bounded ratio.
    """

    def __init__(self, n: int, reorg_cost: float, magic: int, unit: float = 1.0):
        self.N = int(n)
        self.S = float(reorg_cost)
        self.sigma = 0.0
        self.magic = int(magic)
        self.unit = float(min(unit, reorg_cost))

    def cost(self, s: int, i: int) -> float:
        if not (0 <= s <= i <= self.N):
            raise ValueError(f"cost is defined for 0 <= s <= i <= N, got ({s}, {i})")
        return 0.0 if s == self.magic else self.unit

    def row_tail(self, s: int) -> np.ndarray:
        n = self.N - s
        return np.zeros(n) if s == self.magic else np.full(n, self.unit)

    def diagonal(self) -> np.ndarray:
        d = np.full(self.N + 1, self.unit)
        d[self.magic] = 0.0
        return d


def schedule_cost(schedule: Schedule, costs) -> float:
    """Sum over rounds 1..N of c[[i]_u][i], plus S per rebuild after round 0."""
    if schedule.rounds[-1] > costs.N:
        raise ValueError("schedule extends past the horizon")
    total = 0.0
    for i in range(1, costs.N + 1):
        total += costs.cost(last_reorg_before(schedule, i), i)
    return total + schedule.reorg_count * costs.S


def opt_schedule(costs) -> tuple[Schedule, float]:
    """Exact minimum-cost schedule by dynamic programming over suffixes.

    h[s] is the best completion cost given the last rebuild happened at s.
    Ties break toward fewer rebuilds, then the lexicographically smallest
    schedule (reconstructed left to right, so the smallest next rebuild round
    wins among optimal continuations). O(N^2) time, O(N) extra space.
    """
    n = costs.N
    s_cost = costs.S
    diag = np.asarray(costs.diagonal(), dtype=np.float64)
    h_cost = np.zeros(n + 1, dtype=np.float64)
    h_count = np.zeros(n + 1, dtype=np.int64)
    h_next = np.full(n + 1, -1, dtype=np.int64)  # -1 means "never rebuild again"
    for s in range(n, -1, -1):
        tail = np.asarray(costs.row_tail(s), dtype=np.float64)  # c[s][s+1..N]
        best_cost = float(tail.sum())
        best_count = 0
        best_next = -1
        if s < n:
            # drip[k] = cost of rounds s+1 .. s+k under state s (k = 0 .. N-s-1)
            drip = np.concatenate(([0.0], np.cumsum(tail[:-1])))
            cand = drip + s_cost + diag[s + 1 :] + h_cost[s + 1 :]
            u_rel = int(np.argmin(cand))
            c_min = float(cand[u_rel])
            if c_min < best_cost:
                ties = np.flatnonzero(cand == c_min)
                counts = h_count[s + 1 :][ties] + 1
                order = np.lexsort((ties, counts))
                pick = ties[order[0]]
                best_cost = c_min
                best_count = int(h_count[s + 1 + pick]) + 1
                best_next = s + 1 + int(pick)
            elif c_min == best_cost:
                # a tie against "stop" resolves toward stopping (fewer rebuilds)
                pass
        h_cost[s] = best_cost
        h_count[s] = best_count
        h_next[s] = best_next
    rounds = [0]
    s = 0
    while h_next[s] != -1:
        s = int(h_next[s])
        rounds.append(s)
    return Schedule(tuple(rounds)), float(h_cost[0])


def run_threshold(costs, alpha: float | None = None) -> tuple[Schedule, float]:
    """Online threshold strategy: rebuild when accumulated paid cost >= alpha*S.

    Decisions at round i use only costs already paid; c[s][i] is revealed after
    the round's choice. A rebuild round pays S only and resets the accumulator.
    """
    if alpha is None:
        alpha = alpha_from_scan_ratio(costs.sigma)
    a = 0.0
    s = 0
    total = 0.0
    rounds = [0]
    threshold = alpha * costs.S
    for i in range(1, costs.N + 1):
        if a >= threshold:
            total += costs.S
            rounds.append(i)
            s = i
            a = 0.0
        else:
            c = costs.cost(s, i)
            total += c
            a += c
    return Schedule(tuple(rounds)), total


def run_never(costs) -> tuple[Schedule, float]:
    sched = Schedule((0,))
    return sched, schedule_cost(sched, costs)


def run_always(costs) -> tuple[Schedule, float]:
    """Rebuild every round; pays S per round and no incremental costs."""
    return Schedule(tuple(range(costs.N + 1))), costs.N * costs.S


Strategy = Callable[[object], tuple[Schedule, float]]


def measured_ratio(strategy: Strategy, family: Iterable) -> float:
    """Worst cost ratio of a strategy against the optimum over a cost family."""
    worst = 0.0
    for costs in family:
        _, paid = strategy(costs)
        _, best = opt_schedule(costs)
        if best <= 0:
            if paid > 0:
                return math.inf
            continue
        worst = max(worst, paid / best)
    return worst


def random_monotone_costs(
    n: int, reorg_cost: float, sigma: float, rng: np.random.Generator
) -> CostMatrix:
    """Random monotone instance with per-round costs in [0, sigma*S] and zero diagonal.

    Monotonicity is enforced by a running maximum toward older rebuild rounds,
    matching systems where a staler organization never costs less.
    """
    cap = sigma * reorg_cost
    c = rng.uniform(0.0, cap, size=(n + 1, n + 1))
    np.fill_diagonal(c, 0.0)
    # make each column non-increasing in s by accumulating maxima upward
    c = np.flipud(np.maximum.accumulate(np.flipud(c), axis=0))
    np.fill_diagonal(c, 0.0)
    c = np.triu(c)
    return CostMatrix(c, reorg_cost, sigma=sigma)


def adversarial_family(
    beta: float, sigma: float, eps: float, horizon: int, reorg_cost: float = 1.0
) -> list[DripCosts]:
    """Two-member lower-bound family for a threshold strategy with parameter beta.

    Against an eps-per-round drip, such a strategy commits to its first rebuild
    at round t = ceil(beta*S/eps) + 1. Member one is the pure drip truncated at
    t, where the optimum never rebuilds: the strategy pays about (1 + beta)S
    against beta*S. Member two keeps dripping past t (the rebuild bought
    nothing) and only a rebuild at or after t + 1 stops the charges, so the
    strategy pays a second full cycle while the optimum pays one rebuild plus
    the unavoidable drip. As eps -> 0 the worst ratio approaches
    max{(1 + beta)/beta, 1 + sigma + beta}, realized here in the sigma -> 0
    regime where post-rebuild residual costs vanish.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = math.ceil(beta * reorg_cost / eps) + 1
    if horizon <= t + 1:
        raise ValueError(f"horizon must exceed the commitment round {t}")
    member_drip = DripCosts(t, reorg_cost, eps, escape=None, sigma=sigma)
    member_escape = DripCosts(horizon, reorg_cost, eps, escape=t + 1, sigma=sigma)
    return [member_drip, member_escape]


def nonmonotone_demo(
    horizons: Sequence[int] = (10, 100, 1000), reorg_cost: float = 4.0
) -> dict:
    """Demonstration that without monotone costs no bounded ratio exists.

    For each strategy the adversary places the single useful rebuild round
    where the strategy will not rebuild; the optimum rebuilds exactly there and
    pays S, while the strategy keeps paying the unit cost every round. Returns
    the measured ratios per horizon; they grow linearly with the horizon.
    """
    report: dict = {"reorg_cost": reorg_cost, "ratios": {}}

    def single_midpoint(costs):
        mid = max(1, costs.N // 2)
        sched = Schedule((0, mid))
        total = 0.0
        for i in range(1, costs.N + 1):
            if i == mid:
                total += costs.S
            else:
                total += costs.cost(last_reorg_before(sched, i), i)
        return sched, total

    strategies: dict[str, Strategy] = {
        "never": run_never,
        "single_midpoint": single_midpoint,
        "threshold_alpha1": lambda c: run_threshold(c, alpha=1.0),
    }
    for name, strat in strategies.items():
        per_horizon = []
        for n in horizons:
            # the accumulator starts at zero, so the threshold strategy never
            # rebuilds at round 1; for the midpoint strategy dodge its one
            # rebuild round instead
            magic = 1
            if name == "single_midpoint" and max(1, n // 2) == 1:
                magic = 2
            costs = StubbornCosts(n, reorg_cost, magic=magic)
            _, paid = strat(costs)
            _, best = opt_schedule(costs)
            per_horizon.append((n, paid / best if best > 0 else math.inf))
        report["ratios"][name] = per_horizon
    report["summary"] = (
        "with non-monotone costs every deterministic strategy's ratio grows "
        "without bound; the optimum rebuilds once at the adversarially chosen "
        "round and pays a fixed cost"
    )
    return report
