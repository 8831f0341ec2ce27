import pytest

from fdcoalition.scenario import BS, D2D, DOWNLINK, UPLINK, USER, Link, Node, RadioParams, Scenario

ACCEPTANCE_LINES: list[str] = []


def build(positions, links, num_channels=2, params=None, kinds=None, betas=None):
    """Hand-built scenario.

    ``positions`` maps node id -> (x, y); ``links`` is a list of (tx, rx) or
    (tx, rx, kind) tuples. Nodes listed in ``kinds`` as "bs" become base
    stations, everything else is a user.
    """
    params = params or RadioParams()
    kinds = kinds or {}
    betas = betas or {}
    lo, hi = params.beta_bounds
    nodes = tuple(Node(i, kinds.get(i, USER), tuple(map(float, p)), betas.get(i, (lo + hi) / 2))
                  for i, p in sorted(positions.items()))
    pos = dict(positions)
    out = []
    for k, entry in enumerate(links):
        tx, rx = entry[0], entry[1]
        kind = entry[2] if len(entry) > 2 else D2D
        (x0, y0), (x1, y1) = pos[tx], pos[rx]
        length = ((x0 - x1) ** 2 + (y0 - y1) ** 2) ** 0.5
        out.append(Link(k, tx, rx, kind, length, params.tx_power))
    return Scenario(nodes, tuple(out), num_channels, params)


@pytest.fixture
def two_interfering_d2d():
    """Two D2D links sharing no node, each receiver on the other's boresight.

    Link 0: (2,0) -> (0,0). Link 1: (3,0) -> (0.5,0.2). Receiver (0,0)
    looks along +x straight at both transmitters.
    """
    return build({0: (2, 0), 1: (0, 0), 2: (3, 0), 3: (0.5, 0.2)}, [(0, 1), (2, 3)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


__all__ = ["build", "BS", "USER", "UPLINK", "DOWNLINK", "D2D"]
