"""Build the extension, import it and check a few known results.

Usage: python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "pvbs-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libpvbs.so"
    if not lib.exists():
        lib = ROOT / "target" / "release" / "libpvbs.dylib"
    out = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, out / "pvbs.so")
    sys.path.insert(0, str(out))


def main():
    build()
    import pvbs

    p = pvbs.Params("10", "0.1", dim=1)
    assert p.dim == 1 and p.classify() == "gapped"
    assert pvbs.Params("1,1", "2,3").classify() == "gapless"

    vol = pvbs.Volume("box:2x3")
    assert len(vol) == 6 and vol.is_connected()

    h = pvbs.edge_projection(2.0, 0.5)
    trace = sum(h[i][i] for i in range(9))
    assert abs(trace - 5.0) < 1e-12, trace

    report = pvbs.total_gap(pvbs.Volume("box:4"), pvbs.Params("2", "0.5"))
    assert report["kernel_total"] == 4 and not report["partial"]
    assert report["total_gap"] > 0.0

    configs, amps = pvbs.ground_state(pvbs.Volume("box:3"), pvbs.Params("2", "0.5"), "a")
    assert len(configs) == 3 and abs(math.fsum(a * a for a in amps) - 1.0) < 1e-12

    ell, eps = pvbs.choose_ell(p)
    assert ell == 7 and abs(eps - 0.2080) < 1e-4

    cert = pvbs.certify(p)
    assert cert["ell"] == 7 and all(c["pass"] for c in cert["conditions"])

    try:
        pvbs.certify(pvbs.Params("1", "2"))
    except ValueError:
        pass
    else:
        raise AssertionError("gapless parameters must not certify")

    try:
        pvbs.certify(pvbs.Params("10", "0.1", dim=2), ell_cap=4)
    except pvbs.BudgetError:
        pass
    else:
        raise AssertionError("ell cap should be exceeded")

    print(f"pvbs {pvbs.__version__}: smoke test passed (final bound {cert['final_bound']:.6f})")


if __name__ == "__main__":
    main()
