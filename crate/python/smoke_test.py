"""Smoke test for the Python bindings: python python/smoke_test.py"""

import pathlib

import hardy_factor as hf

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def main():
    f, g = hf.exponential_problem(6)
    result = hf.complete(f, g, 6)
    assert result["success"], result["residuals"]
    assert result["dimCheck"]["dimEa"] == 2
    assert max(result["residuals"].values()) <= 1e-10

    theta = hf.random_inner_symbol(3)
    inner, info = hf.extract_inner(theta, 5)
    assert inner.cols == theta.cols
    assert info["rangeDistance"] <= 1e-8 and info["certificate"]["pass"]

    z1 = hf.Symbol(2, 1, 1, [([1, 0], [[1]])])
    z2 = hf.Symbol(2, 1, 1, [([0, 1], [[1]])])
    pair = hf.Symbol(2, 1, 2, [([1, 0], [[1, 0]]), ([0, 1], [[0, 1]])])
    report = hf.commutator_report(pair, 4)
    assert not report["verdict"] and report["pairNorms"][0]["norm"] > 1 - 1e-10
    assert (z1 @ z2).terms() == [([1, 1], [[1 + 0j]])]

    try:
        column = hf.Symbol(2, 2, 1, [([1, 0], [[1], [0]]), ([0, 1], [[0], [1]])])
        hf.complete(column, hf.Symbol(2, 1, 2, [([0, 0], [[1, 1]])]), 2)
    except hf.StageError as e:
        assert e.args[0] == 1
    else:
        raise AssertionError("stage 1 should fail")

    assert hf.local_rank(g)["rank"] == 1

    code, rep = hf.run("analyze", input=str(FIXTURES / "non_dc_z1_z2.json"))
    assert code == 1 and rep["status"] == "fail"
    code, rep = hf.run("selftest", seed=2)
    assert code == 0, [c for c in rep["checks"] if not c["pass"]]

    print(f"hardy_factor {hf.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
