"""Builds the extension module and exercises it from Python.

Usage: python3 python/smoke_test.py [--no-build]
"""

import importlib.util
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module(build: bool):
    if build:
        subprocess.run(
            ["cargo", "build", "-p", "adascal-python", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    lib = ROOT / "target" / "debug" / "libpyadascal.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "pyadascal.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("pyadascal", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    ada = load_module("--no-build" not in sys.argv)
    h = math.sqrt(2) / 2

    cone = ada.PolyhedralCone.orthant(4)
    assert cone.contains([1.0, 0.0, 2.0, 0.0])
    assert not cone.contains([1.0, -1.0, 0.0, 0.0])
    assert cone.order_strict([0.0] * 4, [1.0] * 4)

    w = ada.WeightVector([1.0, 1.0, 0.0, 0.0])
    assert abs(w.coords[0] - h) < 1e-12
    assert abs(w.scalarize([1.0, 1.0, 1.0, 0.0]) - math.sqrt(2)) < 1e-12

    game = ada.VectorGame.bos4d()
    opp = ada.WeightVector([0.0, 0.0, 1.0, 1.0])
    ne = [game.profile_label(p) for p in game.pure_nash([w, opp])]
    assert ne == ["BB", "SS"], ne
    prime = ada.WeightVector([1.0, 0.0, 0.0, -1.0])
    assert [game.profile_label(p) for p in game.pure_nash([prime, opp])] == ["BB"]
    assert game.is_weak_nash([cone, cone], [0, 0])

    g = ada.ix_estimate([0.5, 0.5], 0, math.sqrt(2), 0.2)
    assert abs(g[0] + math.sqrt(2) / 0.7) < 1e-12 and g[1] == 0.0
    q = ada.omd_entropy_step([0.5, 0.5], [-1.0, 0.0], 0.1)
    assert abs(q[0] - 1 / (1 + math.exp(-0.1))) < 1e-12
    assert ada.expix_step([0.5, 0.5], 1, 0.0, 0.1, 0.2) == [0.5, 0.5]

    config = (ROOT / "configs" / "scenario2.toml").read_text()
    small = ["runs=5", "rounds=1000", "window=200", "block_len=100"]
    result = ada.run_scenario(config, small)
    total = sum(e["fraction"] for e in result["histogram"]["entries"])
    assert abs(total - 1.0) < 1e-12
    assert len(result["records"]) == 5
    assert result["audit"]["runs_with_violations"] == []

    history = ada.simulate_run(config, 0, small)
    assert len(history["rounds"]) == 1000
    report = ada.audit_history(json.dumps(history))
    assert report["violations"] == 0 and report["log_integrity"]

    try:
        ada.run_scenario(config, ["window=0"])
    except ValueError as e:
        assert "window" in str(e)
    else:
        raise AssertionError("invalid config accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
