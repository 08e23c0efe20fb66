"""Smoke test for the oscillab Python module.

Uses an installed `oscillab` if present (e.g. after `maturin develop`);
otherwise loads the cdylib from target/release, so building with
`cargo build -p oscillab-py --release` is enough.
"""

import importlib.machinery
import importlib.util
import sys
from fractions import Fraction
from pathlib import Path


def load():
    try:
        import oscillab

        return oscillab
    except ImportError:
        pass
    root = Path(__file__).resolve().parent.parent
    for name in ("liboscillab_py.so", "liboscillab_py.dylib", "oscillab_py.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("oscillab", str(lib))
            spec = importlib.util.spec_from_loader("oscillab", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["oscillab"] = module
            return module
    sys.exit("oscillab not importable; run `cargo build -p oscillab-py --release` first")


def main():
    osc = load()

    cross = osc.WPoly([(2, 1, 1, 2), (1, 2, -1, 2)])
    assert cross.weights() == (1, 1, 3), cross.weights()
    assert str(cross.hessian()) == "-y + x"
    c, m, n, roots = cross.hessian().factorize()
    assert (m, n) == (0, 0) and len(roots) == 1 and abs(roots[0] - 1) < 1e-12

    assert osc.sharp_lp(2, 1) == (Fraction(3, 2), Fraction(1, 3))
    assert osc.lp_from_damping(0, 0, 1, 1) == (Fraction(3, 2), Fraction(1, 3))
    report = osc.analyze(osc.WPoly.from_json({"terms": [{"k": 1, "l": 1, "a": 1}]}))
    assert report["sharp_lp"][0]["decay"] == {"num": 1, "den": 2, "decimal": 0.5}

    lo, up = osc.opnorm_l2([[3, 0], [0, 1j]])
    assert abs(lo - 3) < 1e-12 and abs(up - 3) < 1e-12
    lo, up = osc.opnorm_lp([[1, 2], [3, 4]], 1.0)
    assert lo == up == 6.0
    assert osc.schur_bound([[1, 1], [1, 1]]) == 2.0

    try:
        osc.WPoly([(1, 0, 1, 1), (2, 1, 1, 1)]).weights()
    except osc.OscillabError as e:
        assert "weighted homogeneous" in str(e)
    else:
        raise AssertionError("expected OscillabError")

    sweep = osc.decay_sweep(
        {
            "phase": {"kind": "poly", "poly": {"terms": [{"k": 1, "l": 1, "a": 1}]}},
            "cutoff": {"kind": "tensor_bump", "support": {"x": [-1.0, 1.0], "y": [-1.0, 1.0]}},
            "p": {"num": 2, "den": 1},
            "lambda": {"min": 16.0, "max": 128.0, "count": 4},
            "record_timing": False,
        }
    )
    assert sweep["verdict"] == "consistent", sweep["verdict"]
    assert len(sweep["points"]) == 4

    growth = osc.counterexample_growth({"a": 1.0, "b": 0.5, "n": 1, "eps0": 0.1, "ks": [16.0, 64.0, 256.0]})
    assert abs(growth["fit"]["slope"] - 0.5) < 0.1

    suites = osc.run_selftest(seed=3)
    assert all(s["failures"] == 0 for s in suites), suites

    print(f"oscillab {osc.__version__}: python smoke test passed")


if __name__ == "__main__":
    main()
