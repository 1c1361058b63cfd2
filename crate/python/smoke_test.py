"""Smoke test for the Python module. Build it first, e.g.

    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release
"""

import math

import bistab


def main():
    p = bistab.SystemParams.collective(1.2, 0.0022, 200_000, n_eta=12100.0)
    d = p.derived()
    assert abs(d["upsilon_n"] - 2620) < 15, d["upsilon_n"]

    # Saturated root on resonance lies near the empty-cavity value.
    roots = bistab.photon_numbers(p, 0.0, 0.0)
    assert len(roots) == 3 and roots[-1] > 0.9 * p.n_eta, roots

    b = bistab.boundaries(p)
    assert len(b) == 7 and abs(b["center_onset_n_eta"] / 411 - 1) < 2e-3

    grid = [-0.3 + 0.6 * i / 400 for i in range(401)]
    spec = bistab.scan(p, "delta_a", grid)
    counts = dict(spec.root_counts())
    assert counts[0.0] == 3
    trace = spec.follow("up", "highest")
    assert trace["direction"] == "up" and trace["samples"]

    # Empty cavity: Lorentzian in Δ_c.
    e = bistab.SystemParams(0.0, 1.0, 0, n_eta=4.0, delta_a=0.5, delta_c=0.5)
    assert math.isclose(bistab.photon_numbers(e)[0], 4.0 / 1.25, rel_tol=1e-12)

    q = bistab.SystemParams.collective(3.0, 1.0, 1000, n_eta=50.0, delta_a=1.0, delta_c=0.5)
    states = bistab.steady_states(q)
    tr = bistab.integrate(q, 200.0, start=0, sample_interval=50.0)
    n_end = abs(complex(*tr["states"][-1]["alpha_plus"])) ** 2
    assert math.isclose(n_end, states[0]["n"], rel_tol=1e-6), (n_end, states[0]["n"])
    assert bistab.stability(q, states[0]["n"])["stability"] == "stable"

    cell = bistab.classify(bistab.SystemParams.collective(12.4, 2.0, 10_000, n_eta=1e4))
    assert cell["label"] == "NMBW", cell

    diagram = bistab.phase_diagram(p, [0.01, 0.1], [10.0, 1e4], cell_points=201)
    assert len(diagram["cells"]) == 4

    try:
        bistab.SystemParams(0.1, -1.0, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("negative decay rate accepted")

    print("python smoke test ok", bistab.__version__)


if __name__ == "__main__":
    main()
