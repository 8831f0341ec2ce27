"""Comparison schemes: random allocation, half-duplex coalition formation and
exhaustive search."""

from __future__ import annotations

import enum
from dataclasses import replace
from functools import lru_cache

import numpy as np

from .game import (FD, HD, GameConfig, GameResult, Partition, _conflicts,
                   random_partition, run_coalition_formation)
from .scenario import Scenario


class SchemeId(str, enum.Enum):
    FD_COALITION = "fd-coalition"
    HD_COALITION = "hd-coalition"
    RANDOM = "random"
    OPTIMAL = "optimal"

    def __str__(self) -> str:
        return self.value


class SearchTooLarge(RuntimeError):
    """Exhaustive search would exceed its work bound."""


class NoFeasibleAssignment(RuntimeError):
    pass


def random_allocation(s: Scenario, seed: int, duplex: str = FD) -> Partition:
    return random_partition(s, np.random.default_rng(seed), duplex)


def hd_coalition_formation(s: Scenario, cfg: GameConfig) -> GameResult:
    return run_coalition_formation(s, replace(cfg, duplex=HD))


@lru_cache(maxsize=None)
def _labelings(n: int, k: int) -> int:
    """Assignments of n links to at most k interchangeable channels (sum of Stirling numbers)."""
    # S(n, j) by the standard recurrence
    row = [1] + [0] * k
    for _ in range(n):
        new = [0] * (k + 1)
        for j in range(1, k + 1):
            new[j] = j * row[j] + row[j - 1]
        row = new
    return sum(row[1:]) if n else 1


def search_work(s: Scenario) -> int:
    """Rate evaluations an exhaustive search may need, before pruning."""
    n = len(s.links)
    return _labelings(n, s.num_channels) * max(n, 1)


def feasible_assignments(s: Scenario, duplex: str = FD) -> np.ndarray:
    """Every feasible assignment in lexicographic order, one per set of
    channel relabelings.

    Channels are identical, so only canonical labelings are generated: a
    link may open channel ``c`` only if channels ``0..c-1`` are already in
    use. The canonical form of an assignment is also its lexicographically
    smallest relabeling.
    """
    n, C = len(s.links), s.num_channels
    out: list[tuple[int, ...]] = []
    members: list[list[int]] = [[] for _ in range(C)]
    current = [0] * n

    def dfs(i: int, used: int) -> None:
        if i == n:
            out.append(tuple(current))
            return
        for c in range(min(used + 1, C)):
            if _conflicts(i, members[c], s, duplex):
                continue
            members[c].append(i)
            current[i] = c
            dfs(i + 1, max(used, c + 1))
            members[c].pop()

    dfs(0, 0)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def _batch_rates(assignments: np.ndarray, s: Scenario) -> np.ndarray:
    m = s.model
    same = assignments[:, :, None] == assignments[:, None, :]
    denom = m.noise + np.einsum("kji,ji->ki", same, m.interference)
    return m.rate_scale * np.log1p(m.signal[None, :] / denom)


def exhaustive_optimal(
    s: Scenario,
    cfg: GameConfig,
    enforce_rmin: bool = True,
    work_bound: float = 1e8,
    batch: int = 4096,
) -> Partition:
    """Feasible partition with the largest sum rate.

    With ``enforce_rmin`` every link must reach ``cfg.r_min``. Ties go to
    the lexicographically smallest assignment.
    """
    work = search_work(s)
    if work > work_bound:
        raise SearchTooLarge(f"exhaustive search needs ~{work:.3g} rate evaluations "
                             f"(bound {work_bound:.3g})")
    n = len(s.links)
    if n == 0:
        return Partition((), s.num_channels)
    cands = feasible_assignments(s, cfg.duplex)
    best_val, best_row = -np.inf, None
    for start in range(0, len(cands), batch):
        chunk = cands[start:start + batch]
        rates = _batch_rates(chunk, s)
        totals = rates.sum(axis=1)
        if enforce_rmin:
            totals = np.where(rates.min(axis=1) >= cfg.r_min, totals, -np.inf)
        k = int(np.argmax(totals))
        if totals[k] > best_val:
            best_val, best_row = totals[k], chunk[k]
    if best_row is None:
        what = "meeting r_min " if enforce_rmin else ""
        raise NoFeasibleAssignment(f"no feasible assignment {what}exists")
    return Partition(tuple(int(c) for c in best_row), s.num_channels)
