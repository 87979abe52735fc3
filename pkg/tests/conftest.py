import math

import numpy as np
import pytest

from quasiresponse import DIRICHLET, PERIODIC, Frequency, ModelSpec, Nonlinearity, SpectralField, Truncation

S2 = 1.0 / math.sqrt(2.0)

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE = {}


def cubic():
    return Nonlinearity.polynomial(0.0, 1.0, 0.0, 0.1)


def benchmark(variant="A", K=16, N=16, amp=0.1, avg=0.0, h=None, bc=DIRICHLET):
    """f = amp cos(2 pi theta) sin(pi x) + avg sin(pi x), h = u + u^3/10, omega = (1)."""
    tr = Truncation(K, N, bc)
    if bc == PERIODIC:
        modes = [((1,), 0, amp / 2), ((-1,), 0, amp / 2)]
        if avg:
            modes.append(((0,), 0, avg))
    else:
        modes = [((1,), 0, amp / 2 * S2), ((-1,), 0, amp / 2 * S2)]
        if avg:
            modes.append(((0,), 0, avg * S2))
    f = SpectralField.from_modes(tr, modes)
    return ModelSpec(variant, h or cubic(), f, Frequency((1.0,)))


def random_field(trunc, rng, decay=1.0):
    shape = trunc.shape
    k = np.abs(trunc.mode_vectors()).sum(axis=-1)[..., None]
    n = np.arange(1, trunc.N_x + 1)
    scale = np.exp(-decay * k) / n**2
    c = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) * scale
    return SpectralField(c, trunc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
