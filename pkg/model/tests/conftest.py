import subprocess
import sys

import pytest


def _run(args):
    proc = subprocess.run([sys.executable, "-m", "avtree", *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def bundle_dirs(tmp_path_factory):
    # two labeled fundus phantoms with six-channel stacks, produced by
    # the labeling pipeline's command line (file-format interop only)
    root = tmp_path_factory.mktemp("bundles")
    dirs = []
    for seed in (1, 2):
        d = root / f"b{seed}"
        _run(["phantom", "--seed", str(seed), "--size", "320", "--out-dir", str(d)])
        _run(["preprocess", "--image", str(d / "image.png"), "--fov", str(d / "fov.png"), "--out-dir", str(d)])
        dirs.append(d)
    return dirs


@pytest.fixture(scope="session")
def crossing_truth(tmp_path_factory):
    # interleaved artery and vein trees, the realistic layout for
    # class-presence checks
    d = tmp_path_factory.mktemp("crossing") / "b"
    _run(["phantom", "--seed", "5", "--size", "256", "--crossings", "--out-dir", str(d)])
    from avmodel import read_label_png

    return read_label_png(d / "truth.png")
