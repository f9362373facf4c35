import ctypes

import numpy as np
import pytest


def pytest_configure(config):
    # Conv workspaces are tens of MB; raising the mmap threshold lets glibc
    # recycle them warm instead of page-faulting fresh mappings every batch.
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except OSError:
        pass


@pytest.fixture
def rng():
    return np.random.default_rng(42)
