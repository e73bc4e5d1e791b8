import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exlasso import kernels

needs_ext = pytest.mark.skipif(kernels.compiled is None, reason="extension not built")

sizes = st.lists(st.integers(0, 8), min_size=1, max_size=6)


def _case(seed, group_sizes):
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(group_sizes)]).astype(np.int64)
    n = int(offsets[-1])
    a = rng.standard_normal(n) * rng.choice([1e-3, 1.0, 1e3], n)
    return a, rng.uniform(0.1, 3.0, n), offsets


@needs_ext
@given(st.integers(0, 2**32 - 1), sizes, st.floats(0.0, 100.0))
def test_group_prox_backends_agree_bitwise(seed, group_sizes, rho):
    a, w, offsets = _case(seed, group_sizes)
    out_c = kernels.compiled.group_prox(a, w, offsets, rho)
    out_p = kernels.fallback.group_prox(a, w, offsets, rho)
    for c, p in zip(out_c, out_p):
        np.testing.assert_array_equal(np.asarray(c), p)


@needs_ext
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.floats(1e-6, 1e4))
def test_logistic_prox_backends_agree(seed, m, nu):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m) * rng.choice([1e-2, 1.0, 50.0], m)
    b = rng.choice([-1.0, 1.0], m)
    np.testing.assert_allclose(kernels.compiled.logistic_prox(v, b, nu),
                               kernels.fallback.logistic_prox(v, b, nu), rtol=1e-12, atol=1e-14)


def test_pure_python_switch():
    env = dict(os.environ, EXLASSO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import exlasso; print(exlasso.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_name_matches_selection():
    expected = "cython" if kernels.compiled is not None else "python"
    assert kernels.BACKEND == expected
