"""Quick check of the Python bindings.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/gadi_py-*.whl
"""

import math
import os
import tempfile

import gadi_py as g


def main():
    assert g.round_to(1.0 + 2.0**-12, "half") == 1.0
    assert g.round_to(70000.0, "half") == math.inf
    assert g.unit_roundoff("single") == 2.0**-24

    x, rep = g.solve("convdiff3d:n=6", alpha=0.5)
    assert rep.converged, rep
    exact = g.exact_solution("convdiff3d:n=6")
    assert max(abs(a - b) for a, b in zip(x, exact)) < 1e-10

    _, rep = g.solve("convdiff3d:n=6", alpha=0.5, prec="half,double,double", max_iters=300)
    print("half,double,double:", rep)
    assert rep.final_rres < 1e-3

    _, rep = g.solve("sylvester:n=8,r=0.1", alpha=0.1, prec="single,double,double")
    assert rep.converged, rep
    try:
        g.solve("sylvester:n=8,r=0.1", alpha=0.1, inner="gmres")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    b = g.bounds("convdiff3d:n=4", alpha=1.0)
    assert b["alpha_f"] > 0 and b["kappa_hat"] >= 1

    model = g.GprModel([(64, 0.4), (216, 0.25), (512, 0.18), (1728, 0.12)])
    alpha, std = model.predict(4096)
    assert 0 < alpha < 1 and std >= 0
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "train.csv")
        model.save(path)
        again = g.GprModel.load(path)
        assert abs(again.predict(4096)[0] - alpha) < 1e-12

    print("ok")


if __name__ == "__main__":
    main()
