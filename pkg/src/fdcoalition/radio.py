"""Directional antenna gains, interference terms and Shannon link rates.

Every quantity here is linear (watts, Hz, bit/s) except antenna gains,
which the reference pattern defines in dB. Two routes compute rates: the
per-link functions (``received_power``, ``mui_power``, ``rsi_power``,
``link_rate``) evaluate each term from geometry, and ``ChannelModel``
tabulates the same terms once per scenario for the hot loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Iterable

import numpy as np

from .scenario import Link, RadioParams, Scenario


class GeometryError(ValueError):
    """Coincident points where a direction or distance is required."""


class FeasibilityError(ValueError):
    """A co-channel set that the game constraints should have ruled out."""


@dataclass(frozen=True)
class GainPattern:
    theta_3db: float
    g0: float
    g_sl: float

    @property
    def theta_ml(self) -> float:
        return 2.6 * self.theta_3db

    @classmethod
    def reference(cls, theta_3db: float, g0_log_base: float = 10.0,
                  gsl_log_base: float = math.e) -> "GainPattern":
        """Reference mainlobe/sidelobe pattern for a half-power beamwidth in degrees."""
        half = math.radians(theta_3db) / 2.0
        g0 = 10.0 * math.log((1.6162 / math.sin(half)) ** 2, g0_log_base)
        g_sl = -0.4111 * math.log(theta_3db, gsl_log_base) - 10.579
        return cls(theta_3db, g0, g_sl)

    @classmethod
    def isotropic(cls) -> "GainPattern":
        # infinite beamwidth keeps every angle on the flat mainlobe at 0 dB
        return cls(math.inf, 0.0, 0.0)

    @classmethod
    def for_params(cls, params: RadioParams) -> "GainPattern":
        if params.isotropic:
            return cls.isotropic()
        return cls.reference(params.beamwidth, params.g0_log_base, params.gsl_log_base)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def antenna_gain_db(theta: float, pattern: GainPattern) -> float:
    if not 0.0 <= theta <= 180.0:
        raise ValueError(f"angle {theta} outside [0, 180] degrees")
    if theta <= pattern.theta_ml / 2.0:
        return pattern.g0 - 3.01 * (2.0 * theta / pattern.theta_3db) ** 2
    return pattern.g_sl


def _gain_db_array(theta: np.ndarray, pattern: GainPattern) -> np.ndarray:
    main = pattern.g0 - 3.01 * (2.0 * theta / pattern.theta_3db) ** 2
    return np.where(theta <= pattern.theta_ml / 2.0, main, pattern.g_sl)


def offset_angle(origin, boresight_target, toward) -> float:
    """Angle in degrees between origin->boresight_target and origin->toward."""
    o = np.asarray(origin, dtype=float)
    a = np.asarray(boresight_target, dtype=float) - o
    b = np.asarray(toward, dtype=float) - o
    na, nb = math.hypot(*a), math.hypot(*b)
    if na == 0.0 or nb == 0.0:
        raise GeometryError("offset angle undefined for coincident points")
    # atan2 of cross/dot is accurate at 0 and 180 where acos is not
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a[0] * b[0] + a[1] * b[1]
    return math.degrees(abs(math.atan2(cross, dot)))


def noise_power(params: RadioParams) -> float:
    return params.noise_psd * params.bandwidth


def _gain(theta: float, s: Scenario) -> float:
    return 10.0 ** (antenna_gain_db(theta, GainPattern.for_params(s.params)) / 10.0)


def received_power(link: Link, s: Scenario) -> float:
    """Desired-signal power at the receiver, both beams on boresight."""
    if not link.length > 0:
        raise GeometryError(f"link {link.id} has zero length")
    p = s.params
    g = _gain(0.0, s)
    return p.path_gain_const * g * g * link.length ** (-p.path_loss_exp) * link.tx_power


def mui_power(interferer: Link, victim: Link, s: Scenario) -> float:
    """Interference from the interferer's transmitter at the victim's receiver."""
    if interferer.tx == victim.rx:
        raise FeasibilityError(
            f"link {interferer.id} transmits from the receiver of {victim.id}; "
            "that is self-interference, see rsi_power"
        )
    p = s.params
    tx = s.position(interferer.tx)
    rx = s.position(victim.rx)
    dist = math.hypot(*(rx - tx))
    if dist == 0.0:
        raise GeometryError(f"transmitter of {interferer.id} sits on receiver of {victim.id}")
    theta_t = offset_angle(tx, s.position(interferer.rx), rx)
    theta_r = offset_angle(rx, s.position(victim.tx), tx)
    return (p.mui_factor * p.path_gain_const * _gain(theta_t, s) * _gain(theta_r, s)
            * dist ** (-p.path_loss_exp) * interferer.tx_power)


def rsi_power(victim: Link, co_set: Iterable[int], s: Scenario, duplex: str = "fd") -> float:
    """Residual self-interference at the victim's receiver.

    ``co_set`` holds link ids; the victim itself may or may not be included.
    """
    if duplex == "hd":
        return 0.0
    partners = [s.link(j) for j in co_set if j != victim.id and s.link(j).tx == victim.rx]
    if not partners:
        return 0.0
    if len(partners) > 1:
        raise FeasibilityError(
            f"node {victim.rx} transmits on {len(partners)} co-channel links"
        )
    return s.node(victim.rx).beta * partners[0].tx_power


@dataclass(frozen=True)
class RateBreakdown:
    signal: float
    noise: float
    rsi: float
    mui: float
    rate: float

    @property
    def denominator(self) -> float:
        return self.noise + self.rsi + self.mui


def link_rate(link: Link, co_set: Collection[int], s: Scenario, duplex: str = "fd") -> RateBreakdown:
    if link.id not in co_set:
        raise ValueError(f"link {link.id} is not a member of the co-channel set")
    p = s.params
    signal = received_power(link, s)
    noise = noise_power(p)
    rsi = rsi_power(link, co_set, s, duplex)
    mui = 0.0
    for j in co_set:
        other = s.link(j)
        if j == link.id or other.tx == link.rx:
            continue
        mui += mui_power(other, link, s)
    rate = p.eta * p.bandwidth * math.log(1.0 + signal / (noise + rsi + mui)) / math.log(2.0)
    return RateBreakdown(signal, noise, rsi, mui, rate)


def coalition_sum_rate(co_set: Collection[int], s: Scenario, duplex: str = "fd") -> float:
    return sum(link_rate(s.link(j), co_set, s, duplex).rate for j in co_set)


class ChannelModel:
    """Per-scenario tables indexed by link position in ``s.links``.

    ``interference[j, i]`` is the power link ``j`` adds to link ``i``'s
    denominator when both share a channel: RSI if ``j`` transmits from
    ``i``'s receiver, MUI otherwise, zero on the diagonal.
    """

    def __init__(self, s: Scenario):
        p = s.params
        self.params = p
        self.noise = noise_power(p)
        self.rate_scale = p.eta * p.bandwidth / math.log(2.0)
        n = len(s.links)
        self.size = n
        if n == 0:
            self.signal = np.zeros(0)
            self.mui = self.rsi = self.interference = np.zeros((0, 0))
            self.tx = self.rx = np.zeros(0, dtype=int)
            return

        pattern = GainPattern.for_params(p)
        tx_pos = np.array([s.node(l.tx).position for l in s.links], dtype=float)
        rx_pos = np.array([s.node(l.rx).position for l in s.links], dtype=float)
        power = np.array([l.tx_power for l in s.links], dtype=float)
        length = np.array([l.length for l in s.links], dtype=float)
        if np.any(length <= 0):
            raise GeometryError("zero-length link in scenario")
        self.tx = np.array([l.tx for l in s.links])
        self.rx = np.array([l.rx for l in s.links])

        g0 = 10.0 ** (_gain_db_array(np.zeros(1), pattern)[0] / 10.0)
        self.signal = p.path_gain_const * g0 * g0 * length ** (-p.path_loss_exp) * power

        # [j, i]: interferer j's transmitter to victim i's receiver
        vec = rx_pos[None, :, :] - tx_pos[:, None, :]
        dist = np.hypot(vec[..., 0], vec[..., 1])
        own_tx = rx_pos - tx_pos            # beam of j: s_j -> r_j
        own_rx = tx_pos - rx_pos            # beam of i: r_i -> s_i
        theta_t = _angles(own_tx[:, None, :], vec)
        theta_r = _angles(own_rx[None, :, :], -vec)
        gt = 10.0 ** (_gain_db_array(theta_t, pattern) / 10.0)
        gr = 10.0 ** (_gain_db_array(theta_r, pattern) / 10.0)

        shares_rx = self.tx[:, None] == self.rx[None, :]
        with np.errstate(divide="ignore"):
            mui = p.mui_factor * p.path_gain_const * gt * gr * dist ** (-p.path_loss_exp) * power[:, None]
        np.fill_diagonal(mui, 0.0)
        mui[shares_rx] = 0.0
        if not np.all(np.isfinite(mui)):
            raise GeometryError("a transmitter coincides with another link's receiver")
        beta_rx = np.array([s.node(r).beta for r in self.rx], dtype=float)
        rsi = np.where(shares_rx, beta_rx[None, :] * power[:, None], 0.0)
        self.mui = mui
        self.rsi = rsi
        self.interference = mui + rsi

    def rates(self, members) -> np.ndarray:
        """Rates of ``members`` (link positions) when they share one channel."""
        idx = np.asarray(members, dtype=np.intp)
        if idx.size == 0:
            return np.zeros(0)
        denom = self.noise + self.interference[idx][:, idx].sum(axis=0)
        return self.rate_scale * np.log1p(self.signal[idx] / denom)

    def sum_rate(self, members) -> float:
        if len(members) == 0:
            return 0.0
        return float(self.rates(members).sum())


def _angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
    return np.degrees(np.abs(np.arctan2(cross, dot)))
