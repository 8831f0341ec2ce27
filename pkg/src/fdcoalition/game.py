"""Coalition formation over sub-channels.

Links are the players and each sub-channel hosts one coalition, so a
partition is simply a channel index per link (channels are numbered from 0
here). A link switches when the two coalitions it touches gain utility in
total and nobody in the destination falls under ``r_min``; once single
switches stall, a random two-switch lookahead is tried and kept only if
the system sum rate improves.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scenario import Link, Scenario, Violation

FD = "fd"
HD = "hd"
SINGLE = "single"
TWO_STEP = "two-step"

_INIT_RESTARTS = 200


class InitializationError(RuntimeError):
    """No feasible starting partition could be drawn."""


@dataclass(frozen=True)
class Partition:
    """Channel index for every link, in the order of ``Scenario.links``."""

    assignment: tuple[int, ...]
    num_channels: int

    def __post_init__(self) -> None:
        for c in self.assignment:
            if not 0 <= c < self.num_channels:
                raise ValueError(f"channel {c} outside 0..{self.num_channels - 1}")

    def members(self, channel: int) -> list[int]:
        return [i for i, c in enumerate(self.assignment) if c == channel]

    def coalitions(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_channels)]
        for i, c in enumerate(self.assignment):
            out[c].append(i)
        return out

    def __getitem__(self, link_pos: int) -> int:
        return self.assignment[link_pos]

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class SwitchRecord:
    link: int
    from_channel: int
    to_channel: int
    kind: str
    utility_before: float
    utility_after: float


@dataclass(frozen=True)
class GameConfig:
    r_min: float = 400e6
    max_iterations: int = 100_000
    stability_scan_interval: Optional[int] = None  # None: 50 x number of links
    duplex: str = FD
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stability_scan_interval is not None and self.stability_scan_interval < 1:
            raise ValueError("stability_scan_interval must be >= 1")
        if self.duplex not in (FD, HD):
            raise ValueError(f"duplex must be 'fd' or 'hd', got {self.duplex!r}")
        if self.r_min < 0:
            raise ValueError("r_min must be >= 0")

    def scan_interval(self, n_links: int) -> int:
        if self.stability_scan_interval is not None:
            return self.stability_scan_interval
        return max(1, 50 * n_links)


@dataclass
class GameResult:
    partition: Partition
    switches: list[SwitchRecord]
    stable: bool
    attempts: int = 0
    # assignment after every accepted operation, starting partition first
    trajectory: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter((self.partition, self.switches, self.stable))


def _link_pos(link, s: Scenario) -> int:
    return link if isinstance(link, (int, np.integer)) else s.link_index[link.id]


def _conflicts(i: int, others: Sequence[int], s: Scenario, duplex: str) -> bool:
    a = s.links[i]
    for j in others:
        if j == i:
            continue
        b = s.links[j]
        if a.tx == b.tx or a.rx == b.rx:
            return True
        if duplex == HD and (a.tx == b.rx or a.rx == b.tx):
            return True
    return False


def is_feasible_join(link, channel: int, p: Partition, s: Scenario, cfg: GameConfig) -> bool:
    """Whether ``link`` may share ``channel`` with its current members.

    No node may transmit on two co-channel links or receive on two; this
    covers the access same-BS rule and the D2D distinct-endpoint rule. Under
    half duplex a node may not appear in two co-channel links at all.
    """
    i = _link_pos(link, s)
    return not _conflicts(i, p.members(channel), s, cfg.duplex)


def audit_partition(p: Partition, s: Scenario, duplex: str = FD) -> list[Violation]:
    out = []
    if len(p) != len(s.links):
        out.append(Violation("partition-size", (), f"{len(p)} entries for {len(s.links)} links"))
        return out
    for c, members in enumerate(p.coalitions()):
        for k, i in enumerate(members):
            if _conflicts(i, members[k + 1:], s, duplex):
                bad = [j for j in members[k + 1:] if _conflicts(i, [j], s, duplex)]
                out.append(Violation("co-channel-conflict",
                                     (s.links[i].id, *(s.links[j].id for j in bad)),
                                     f"channel {c}, {duplex}"))
    return out


def coalition_utility(channel: int, p: Partition, s: Scenario) -> float:
    return s.params.alpha * s.model.sum_rate(p.members(channel))


def total_utility(p: Partition, s: Scenario) -> float:
    return sum(coalition_utility(c, p, s) for c in range(p.num_channels))


def partition_rates(p: Partition, s: Scenario) -> dict[int, float]:
    """Rate of every link under ``p``, keyed by link id."""
    out = {}
    for members in p.coalitions():
        for i, r in zip(members, s.model.rates(members)):
            out[s.links[i].id] = float(r)
    return {link.id: out[link.id] for link in s.links}


def apply_switch(p: Partition, link, to_channel: int, s: Optional[Scenario] = None) -> Partition:
    if not 0 <= to_channel < p.num_channels:
        raise ValueError(f"channel {to_channel} outside 0..{p.num_channels - 1}")
    i = link if s is None else _link_pos(link, s)
    a = list(p.assignment)
    a[i] = to_channel
    return Partition(tuple(a), p.num_channels)


def rmin_ok(link, channel: int, p: Partition, s: Scenario, cfg: GameConfig) -> bool:
    i = _link_pos(link, s)
    joined = sorted(set(p.members(channel)) | {i})
    return bool(np.all(s.model.rates(joined) >= cfg.r_min))


def prefers(link, to_channel: int, p: Partition, s: Scenario) -> bool:
    i = _link_pos(link, s)
    origin = p[i]
    after = apply_switch(p, i, to_channel)
    gain = coalition_utility(to_channel, after, s) + coalition_utility(origin, after, s)
    base = coalition_utility(to_channel, p, s) + coalition_utility(origin, p, s)
    return gain > base


def is_nash_stable(p: Partition, s: Scenario, cfg: GameConfig) -> bool:
    for i in range(len(s.links)):
        for c in range(p.num_channels):
            if c == p[i]:
                continue
            if (is_feasible_join(i, c, p, s, cfg) and rmin_ok(i, c, p, s, cfg)
                    and prefers(i, c, p, s)):
                return False
    return True


def random_partition(s: Scenario, rng: np.random.Generator, duplex: str = FD) -> Partition:
    """Uniform channel per link, with conflicting links moved to a random free channel."""
    n, C = len(s.links), s.num_channels
    for _ in range(_INIT_RESTARTS):
        draw = rng.integers(C, size=n)
        members: list[list[int]] = [[] for _ in range(C)]
        assignment = []
        ok = True
        for i in range(n):
            c = int(draw[i])
            if _conflicts(i, members[c], s, duplex):
                for alt in rng.permutation(C):
                    if not _conflicts(i, members[alt], s, duplex):
                        c = int(alt)
                        break
                else:
                    ok = False
                    break
            members[c].append(i)
            assignment.append(c)
        if ok:
            return Partition(tuple(assignment), C)
    raise InitializationError(
        f"no feasible {duplex} partition found after {_INIT_RESTARTS} restarts"
    )


class _Search:
    """Mutable state of one run: members per channel and cached coalition rates."""

    def __init__(self, s: Scenario, cfg: GameConfig, rng: np.random.Generator, start: Partition):
        self.s = s
        self.cfg = cfg
        self.rng = rng
        self.model = s.model
        self.alpha = s.params.alpha
        self.C = s.num_channels
        self.assignment = list(start.assignment)
        self.members: list[list[int]] = start.coalitions()
        self.sums = [self.model.sum_rate(m) for m in self.members]

    def partition(self) -> Partition:
        return Partition(tuple(self.assignment), self.C)

    def _gate(self, i: int, dest: list[int]):
        """Rates of ``dest`` plus ``i`` if the join is feasible and respects r_min."""
        if _conflicts(i, dest, self.s, self.cfg.duplex):
            return None
        joined = dest.copy()
        bisect.insort(joined, i)
        rates = self.model.rates(joined)
        if rates.min() < self.cfg.r_min:
            return None
        return joined, float(rates.sum())

    def _pick_target(self, i: int, members, assignment):
        """Gated destination for link ``i``; rejected targets are replaced by
        the other channels in random order, at most C - 1 tries in total."""
        here = assignment[i]
        for c in self.rng.permutation(self.C - 1):
            c = int(c) + (int(c) >= here)
            gated = self._gate(i, members[c])
            if gated is not None:
                return c, gated
        return None

    def step(self) -> list[SwitchRecord]:
        """One attempt; returns the records of whatever was accepted."""
        rng = self.rng
        i = int(rng.integers(len(self.assignment)))
        if self.C < 2:
            return []
        target = self._pick_target(i, self.members, self.assignment)
        if target is None:
            return []
        q, (joined, joined_sum) = target
        p = self.assignment[i]
        left = [m for m in self.members[p] if m != i]
        left_sum = self.model.sum_rate(left)
        before = self.alpha * self.sums[p] + self.alpha * self.sums[q]
        after = self.alpha * joined_sum + self.alpha * left_sum
        if after > before:
            self._commit(i, q, joined, joined_sum, left, left_sum)
            return [SwitchRecord(self.s.links[i].id, p, q, SINGLE, before, after)]

        # lookahead: keep the failed move tentatively and try one more
        members = list(self.members)
        members[p], members[q] = left, joined
        sums = list(self.sums)
        sums[p], sums[q] = left_sum, joined_sum
        assignment = list(self.assignment)
        assignment[i] = q
        k = int(rng.integers(len(assignment)))
        second = self._pick_target(k, members, assignment)
        if second is None:
            return []
        q2, (joined2, joined2_sum) = second
        p2 = assignment[k]
        left2 = [m for m in members[p2] if m != k]
        sums[p2] = self.model.sum_rate(left2)
        sums[q2] = joined2_sum
        members[p2], members[q2] = left2, joined2
        total_before = sum(self.sums)
        total_after = sum(sums)
        if not total_after > total_before:
            return []
        assignment[k] = q2
        self.assignment = assignment
        self.members = members
        self.sums = sums
        u0, u1 = self.alpha * total_before, self.alpha * total_after
        return [SwitchRecord(self.s.links[i].id, p, q, TWO_STEP, u0, u1),
                SwitchRecord(self.s.links[k].id, p2, q2, TWO_STEP, u0, u1)]

    def _commit(self, i, q, joined, joined_sum, left, left_sum) -> None:
        p = self.assignment[i]
        self.assignment[i] = q
        self.members[p], self.members[q] = left, joined
        self.sums[p], self.sums[q] = left_sum, joined_sum

    def improving_switch_exists(self) -> bool:
        for i in range(len(self.assignment)):
            p = self.assignment[i]
            left = [m for m in self.members[p] if m != i]
            left_sum = None
            for q in range(self.C):
                if q == p:
                    continue
                gated = self._gate(i, self.members[q])
                if gated is None:
                    continue
                if left_sum is None:
                    left_sum = self.model.sum_rate(left)
                if (self.alpha * gated[1] + self.alpha * left_sum
                        > self.alpha * self.sums[p] + self.alpha * self.sums[q]):
                    return True
        return False


def run_coalition_formation(s: Scenario, cfg: GameConfig) -> GameResult:
    """Random-order switch dynamics from a random feasible start.

    Every ``scan_interval`` consecutive fruitless attempts the partition is
    scanned exhaustively for an improving single switch; the run stops when
    none exists or after ``max_iterations`` attempts.
    """
    rng = np.random.default_rng(cfg.seed)
    if not s.links:
        return GameResult(Partition((), s.num_channels), [], True)
    start = random_partition(s, rng, cfg.duplex)
    search = _Search(s, cfg, rng, start)
    interval = cfg.scan_interval(len(s.links))
    records: list[SwitchRecord] = []
    trajectory = [tuple(search.assignment)]
    if not search.improving_switch_exists():
        return GameResult(search.partition(), records, True, 0, trajectory)
    idle = 0
    stable = False
    attempts = 0
    while attempts < cfg.max_iterations:
        attempts += 1
        accepted = search.step()
        if accepted:
            records.extend(accepted)
            trajectory.append(tuple(search.assignment))
            idle = 0
            continue
        idle += 1
        if idle >= interval:
            idle = 0
            if not search.improving_switch_exists():
                stable = True
                break
    else:
        stable = not search.improving_switch_exists()
    return GameResult(search.partition(), records, stable, attempts, trajectory)
