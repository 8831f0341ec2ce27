"""Random deployments of base stations, access links and D2D links.

All equipment is dropped uniformly in a square area. Access users attach to
their nearest BS; D2D receivers are placed within ``d2d_max_dist`` of the
transmitter. Scenarios are immutable and fully determined by the generator
arguments, so one scenario can be shared by every scheme in a trial.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

BS = "bs"
USER = "user"

UPLINK = "uplink"
DOWNLINK = "downlink"
D2D = "d2d"
ACCESS_KINDS = (UPLINK, DOWNLINK)

SPEED_OF_LIGHT = 299_792_458.0

# Rejection-sampling budgets; generous enough that only impossible
# requests exhaust them.
_MAX_PLACEMENT_TRIES = 10_000


class ScenarioError(ValueError):
    """Raised when a deployment cannot be generated."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1000.0)


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer and deployment constants, stored in SI units.

    ``beta`` for every node is drawn from ``si_range`` scaled by
    ``10 ** -si_magnitude``. ``k0`` is the path-gain constant; ``None``
    selects the free-space value (lambda / 4 pi)^2 for ``carrier_freq``.
    ``isotropic`` replaces the directional pattern with 0 dB everywhere.
    """

    tx_power: float = dbm_to_watts(30.0)
    eta: float = 0.5
    path_loss_exp: float = 2.0
    bandwidth: float = 540e6
    noise_psd: float = dbm_to_watts(-134.0) / 1e6
    mui_factor: float = 1.0
    carrier_freq: float = 60e9
    beamwidth: float = 30.0
    r_min: float = 400e6
    si_range: tuple[float, float] = (0.5, 1.5)
    si_magnitude: float = 8.0
    area_side: float = 100.0
    d2d_max_dist: float = 5.0
    alpha: float = 1.0
    d2d_reuse: float = 1.0
    k0: Optional[float] = 1.0
    isotropic: bool = False
    g0_log_base: float = 10.0
    gsl_log_base: float = math.e

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not 0.0 < self.eta < 1.0:
            out.append(f"eta must lie in (0, 1), got {self.eta}")
        for name in ("tx_power", "bandwidth", "carrier_freq", "beamwidth",
                     "area_side", "d2d_max_dist", "path_loss_exp", "alpha"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("noise_psd", "mui_factor", "r_min"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0, got {getattr(self, name)}")
        low, high = self.si_range
        if not 0 <= low <= high:
            out.append(f"si_range must satisfy 0 <= low <= high, got {self.si_range}")
        if not 0.0 <= self.d2d_reuse <= 1.0:
            out.append(f"d2d_reuse must lie in [0, 1], got {self.d2d_reuse}")
        if self.k0 is not None and not self.k0 > 0:
            out.append(f"k0 must be > 0, got {self.k0}")
        return out

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def path_gain_const(self) -> float:
        """k0; the free-space (lambda / 4 pi)^2 when ``k0`` is None."""
        if self.k0 is not None:
            return self.k0
        return (self.wavelength / (4.0 * math.pi)) ** 2

    @property
    def beta_bounds(self) -> tuple[float, float]:
        scale = 10.0 ** (-self.si_magnitude)
        return self.si_range[0] * scale, self.si_range[1] * scale


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    position: tuple[float, float]
    beta: float


@dataclass(frozen=True)
class Link:
    id: int
    tx: int
    rx: int
    kind: str
    length: float
    tx_power: float

    @property
    def is_access(self) -> bool:
        return self.kind in ACCESS_KINDS


@dataclass(frozen=True)
class Violation:
    invariant: str
    ids: tuple
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.invariant} {self.ids}: {self.detail}"


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    num_channels: int
    params: RadioParams = field(default_factory=RadioParams)

    @cached_property
    def node_by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_index(self) -> dict[int, int]:
        """Map link id to its position in ``links``."""
        return {link.id: i for i, link in enumerate(self.links)}

    def node(self, node_id: int) -> Node:
        return self.node_by_id[node_id]

    def link(self, link_id: int) -> Link:
        return self.links[self.link_index[link_id]]

    def position(self, node_id: int) -> np.ndarray:
        return np.asarray(self.node_by_id[node_id].position, dtype=float)

    @property
    def base_stations(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == BS]

    @cached_property
    def model(self):
        """Precomputed gain/interference tables (see ``radio.ChannelModel``)."""
        from .radio import ChannelModel

        return ChannelModel(self)

    def digest(self) -> str:
        """Content hash, used to check that paired schemes saw one deployment."""
        h = hashlib.sha256()
        h.update(repr((self.nodes, self.links, self.num_channels, self.params)).encode())
        return h.hexdigest()

    def with_params(self, params: RadioParams) -> "Scenario":
        return Scenario(self.nodes, self.links, self.num_channels, params)


def _distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def nearest_bs(p: Sequence[float], nodes: Iterable[Node]) -> int:
    """Id of the BS closest to ``p``; ties go to the smallest id."""
    best = None
    for n in nodes:
        if n.kind != BS:
            continue
        key = (_distance(p, n.position), n.id)
        if best is None or key < best:
            best = key
    if best is None:
        raise ScenarioError("no base station present")
    return best[1]


def generate_scenario(
    params: RadioParams,
    n_bs: int,
    n_access: int,
    n_d2d: int,
    num_channels: int,
    seed: int,
) -> Scenario:
    """Draw a random deployment.

    D2D endpoints may be reused: with probability ``params.d2d_reuse`` a new
    link's transmitter is an existing D2D device that only receives so far,
    and likewise its receiver may be an in-range device that only transmits.
    This is what creates full-duplex relay chains and bidirectional pairs.
    """
    for name, value in (("n_bs", n_bs), ("n_access", n_access), ("n_d2d", n_d2d)):
        if value < 0:
            raise ScenarioError(f"{name} must be >= 0, got {value}")
    if num_channels < 1:
        raise ScenarioError(f"num_channels must be >= 1, got {num_channels}")
    if n_access > 0 and n_bs == 0:
        raise ScenarioError("access links need at least one BS")
    if n_access > n_bs * num_channels:
        raise ScenarioError(
            f"bs-oversubscription: {n_access} access links exceed "
            f"{n_bs} BS x {num_channels} channels"
        )

    rng = np.random.default_rng(seed)
    side = params.area_side
    beta_lo, beta_hi = params.beta_bounds
    nodes: list[Node] = []
    links: list[Link] = []

    def add_node(kind: str, pos) -> Node:
        node = Node(len(nodes), kind, (float(pos[0]), float(pos[1])),
                    float(rng.uniform(beta_lo, beta_hi)))
        nodes.append(node)
        return node

    def add_link(tx: Node, rx: Node, kind: str) -> None:
        links.append(Link(len(links), tx.id, rx.id, kind,
                          _distance(tx.position, rx.position), params.tx_power))

    for _ in range(n_bs):
        add_node(BS, rng.uniform(0.0, side, 2))
    bs_nodes = list(nodes)

    load = {b.id: 0 for b in bs_nodes}
    for _ in range(n_access):
        for _ in range(_MAX_PLACEMENT_TRIES):
            pos = rng.uniform(0.0, side, 2)
            home = nearest_bs(pos, bs_nodes)
            if load[home] < num_channels:
                break
        else:
            raise ScenarioError("bs-oversubscription: could not place access user "
                                "near a BS with spare capacity")
        load[home] += 1
        user = add_node(USER, pos)
        bs = nodes[home]
        if rng.random() < 0.5:
            add_link(user, bs, UPLINK)
        else:
            add_link(bs, user, DOWNLINK)

    # D2D devices that still have a free transmit / receive antenna.
    free_tx: list[Node] = []
    free_rx: list[Node] = []
    d = params.d2d_max_dist
    for _ in range(n_d2d):
        if free_tx and rng.random() < params.d2d_reuse:
            tx = free_tx.pop(int(rng.integers(len(free_tx))))
        else:
            tx = add_node(USER, rng.uniform(0.0, side, 2))
            free_rx.append(tx)
        in_range = [n for n in free_rx
                    if n.id != tx.id and _distance(n.position, tx.position) <= d]
        if in_range and rng.random() < params.d2d_reuse:
            rx = in_range[int(rng.integers(len(in_range)))]
            free_rx.remove(rx)
        else:
            rx = add_node(USER, _point_in_disk(rng, tx.position, d, side))
            free_tx.append(rx)
        add_link(tx, rx, D2D)

    return Scenario(tuple(nodes), tuple(links), num_channels, params)


def _point_in_disk(rng: np.random.Generator, centre, radius: float, side: float):
    for _ in range(_MAX_PLACEMENT_TRIES):
        r = radius * math.sqrt(rng.random())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        x = centre[0] + r * math.cos(phi)
        y = centre[1] + r * math.sin(phi)
        if 0.0 <= x <= side and 0.0 <= y <= side and r > 0.0:
            return x, y
    raise ScenarioError("could not place a D2D receiver inside the area")


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every deployment invariant; an empty list means well formed."""
    out: list[Violation] = []
    p = s.params
    if s.num_channels < 1:
        out.append(Violation("num-channels", (), f"{s.num_channels} < 1"))

    seen_nodes: set[int] = set()
    beta_lo, beta_hi = p.beta_bounds
    tol = 1e-12 * max(beta_hi, 1e-300)
    for n in s.nodes:
        if n.id in seen_nodes:
            out.append(Violation("duplicate-node-id", (n.id,)))
        seen_nodes.add(n.id)
        if n.kind not in (BS, USER):
            out.append(Violation("node-kind", (n.id,), n.kind))
        x, y = n.position
        if not (0.0 <= x <= p.area_side and 0.0 <= y <= p.area_side):
            out.append(Violation("node-position", (n.id,), f"{n.position} outside area"))
        if n.beta < 0 or not (beta_lo - tol <= n.beta <= beta_hi + tol):
            out.append(Violation("node-beta", (n.id,),
                                 f"{n.beta:g} outside [{beta_lo:g}, {beta_hi:g}]"))

    tx_count: dict[int, list[int]] = {}
    rx_count: dict[int, list[int]] = {}
    bs_load: dict[int, list[int]] = {}
    access_users: set[int] = set()
    d2d_users: set[int] = set()
    seen_links: set[int] = set()
    for link in s.links:
        if link.id in seen_links:
            out.append(Violation("duplicate-link-id", (link.id,)))
        seen_links.add(link.id)
        if link.tx not in s.node_by_id or link.rx not in s.node_by_id:
            out.append(Violation("dangling-endpoint", (link.id,),
                                 f"tx={link.tx} rx={link.rx}"))
            continue
        if link.tx == link.rx:
            out.append(Violation("self-link", (link.id,)))
            continue
        tx, rx = s.node(link.tx), s.node(link.rx)
        geo = _distance(tx.position, rx.position)
        if not math.isclose(geo, link.length, rel_tol=1e-9, abs_tol=1e-12):
            out.append(Violation("link-length", (link.id,),
                                 f"cached {link.length} vs geometric {geo}"))
        if not link.tx_power > 0:
            out.append(Violation("tx-power", (link.id,), f"{link.tx_power}"))
        if link.kind == D2D:
            if tx.kind != USER or rx.kind != USER:
                out.append(Violation("d2d-endpoints", (link.id,), "needs two users"))
            if geo > p.d2d_max_dist + 1e-9:
                out.append(Violation("d2d-length", (link.id,),
                                     f"{geo:.3f} m > {p.d2d_max_dist} m"))
            d2d_users.update((tx.id, rx.id))
        elif link.kind in ACCESS_KINDS:
            bs, user = (rx, tx) if link.kind == UPLINK else (tx, rx)
            if bs.kind != BS or user.kind != USER:
                out.append(Violation("access-endpoints", (link.id,),
                                     f"{link.kind} needs BS on the "
                                     f"{'rx' if link.kind == UPLINK else 'tx'} side"))
            else:
                bs_load.setdefault(bs.id, []).append(link.id)
                access_users.add(user.id)
                home = nearest_bs(user.position, s.nodes)
                if home != bs.id:
                    out.append(Violation("nearest-bs", (link.id,),
                                         f"user {user.id} attached to {bs.id}, nearest is {home}"))
        else:
            out.append(Violation("link-kind", (link.id,), link.kind))
        if tx.kind == USER:
            tx_count.setdefault(tx.id, []).append(link.id)
        if rx.kind == USER:
            rx_count.setdefault(rx.id, []).append(link.id)

    for role, table in (("tx", tx_count), ("rx", rx_count)):
        for node_id, ids in table.items():
            if len(ids) > 1:
                out.append(Violation("endpoint-multiplicity", (node_id, *ids),
                                     f"user is {role} of {len(ids)} links"))
    for node_id in sorted(access_users & d2d_users):
        out.append(Violation("access-d2d-overlap", (node_id,),
                             "user serves both an access and a D2D link"))
    for bs_id, ids in bs_load.items():
        if len(ids) > s.num_channels:
            out.append(Violation("bs-oversubscription", (bs_id, *ids),
                                 f"{len(ids)} access links > {s.num_channels} channels"))
    return out
