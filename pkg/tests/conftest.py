import pytest

from kisssim import trace


def make_inv(ts, fid, mem, warm=10, init=10):
    return trace.Invocation(ts, fid, float(mem), warm, init)


@pytest.fixture(scope="session")
def default_events():
    """The stock 2-hour edge trace used by the directional acceptance runs."""
    return trace.synthesize_edge_trace(trace.default_edge_config(seed=42))
