import numpy as np
import pytest

from avtree import _kernels
from avtree.errors import ConfigError, EvenKernel

from oracles import label_components_ref, median_filter_ref, zhang_suen_ref


def _random_blobs(rng, size=28, n=4):
    mask = np.zeros((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(n):
        cy, cx = rng.uniform(4, size - 4, 2)
        r = rng.uniform(2.0, 5.0)
        mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    return mask


def test_backend_env_selection(monkeypatch):
    monkeypatch.setenv(_kernels.BACKEND_ENV, "numpy")
    assert _kernels.active_backend() == "numpy"
    monkeypatch.setenv(_kernels.BACKEND_ENV, "numba")
    assert _kernels.active_backend() == "numba"
    monkeypatch.setenv(_kernels.BACKEND_ENV, "auto")
    assert _kernels.active_backend() in ("numba", "numpy")
    monkeypatch.setenv(_kernels.BACKEND_ENV, "cuda")
    with pytest.raises(ConfigError):
        _kernels.active_backend()


def test_median_filter_rejects_even_kernel():
    with pytest.raises(EvenKernel):
        _kernels.median_filter(np.zeros((5, 5), dtype=np.float32), 4)
    with pytest.raises(EvenKernel):
        _kernels.median_filter(np.zeros((5, 5), dtype=np.float32), 0)


def test_median_filter_matches_sorted_window_oracle(monkeypatch):
    rng = np.random.default_rng(0)
    for backend in ("numpy", "numba"):
        monkeypatch.setenv(_kernels.BACKEND_ENV, backend)
        for trial in range(4):
            img = rng.uniform(0, 255, size=(15, 12)).astype(np.float32)
            for k in (1, 3, 5):
                got = _kernels.median_filter(img, k)
                assert got.dtype == np.float32
                assert np.array_equal(got, median_filter_ref(img, k))


def test_zhang_suen_matches_reference(monkeypatch):
    rng = np.random.default_rng(1)
    for backend in ("numpy", "numba"):
        monkeypatch.setenv(_kernels.BACKEND_ENV, backend)
        for trial in range(5):
            mask = _random_blobs(np.random.default_rng(100 + trial))
            got = _kernels.zhang_suen(mask)
            assert np.array_equal(got, zhang_suen_ref(mask))


def test_label_components_matches_flood_fill(monkeypatch):
    for backend in ("numpy", "numba"):
        monkeypatch.setenv(_kernels.BACKEND_ENV, backend)
        for trial in range(6):
            rng = np.random.default_rng(200 + trial)
            mask = rng.uniform(size=(20, 20)) < 0.35
            got, n_got = _kernels.label_components(mask)
            want, n_want = label_components_ref(mask)
            assert n_got == n_want
            assert np.array_equal(got, want)
        monkeypatch.setenv(_kernels.BACKEND_ENV, backend)
        empty, n = _kernels.label_components(np.zeros((5, 5), dtype=bool))
        assert n == 0 and not empty.any()


def test_backends_bit_identical(monkeypatch):
    # the JIT backend must not drift from the reference by a single bit
    rng = np.random.default_rng(2)
    for trial in range(4):
        img = rng.normal(128, 40, size=(31, 27)).astype(np.float32)
        mask = _random_blobs(np.random.default_rng(300 + trial), size=40, n=6)
        monkeypatch.setenv(_kernels.BACKEND_ENV, "numpy")
        med_np = _kernels.median_filter(img, 5)
        skel_np = _kernels.zhang_suen(mask)
        lab_np, n_np = _kernels.label_components(mask)
        monkeypatch.setenv(_kernels.BACKEND_ENV, "numba")
        med_nb = _kernels.median_filter(img, 5)
        skel_nb = _kernels.zhang_suen(mask)
        lab_nb, n_nb = _kernels.label_components(mask)
        assert np.array_equal(med_np.view(np.uint32), med_nb.view(np.uint32))
        assert np.array_equal(skel_np, skel_nb)
        assert n_np == n_nb
        assert np.array_equal(lab_np, lab_nb)
