"""Smoke test for the leadlag extension: python python/smoke_test.py"""
import math

import leadlag

SPEC = """
seed = 3
grid.points = 13
group.a.signal = sinusoid(1.5, 8, 0)
group.a.genes = a1, a2, a3
group.b.signal = pulse(3, 1, 1.5)
group.b.genes = b1, b2, b3
defaults.noise_sd = 0.02
"""


def main():
    matrix, truth = leadlag.simulate(SPEC)
    assert len(matrix) == 6 and len(matrix.times) == 13
    assert truth.count("1") == 6
    again, _ = leadlag.simulate(SPEC)
    assert [matrix.row(i) for i in range(6)] == [again.row(i) for i in range(6)]

    sim, pairs = leadlag.compute_pairs(matrix, truth)
    assert len(pairs) == 15
    for p in pairs:
        assert 0.0 <= p.llr2_sym <= 1.0
        assert p.w_status in ("1", "0", "NA")
        assert sim.get(p.i, p.j) == max(p.llr2_ij, p.llr2_ji)
    _, serial = leadlag.compute_pairs(matrix, truth, workers=1)
    assert [p.llr2_sym for p in serial] == [p.llr2_sym for p in pairs]

    labels = leadlag.ward_clusters(sim, 2)
    groups = {}
    for gene, label in zip(matrix.gene_ids, labels):
        groups.setdefault(label, set()).add(gene[0])
    assert all(len(g) == 1 for g in groups.values()), groups

    # integral of t from 0 is t^2 / 2
    times = [0.0, 0.5, 1.0, 1.5, 2.0]
    integral = leadlag.spline_integral(times, times)
    assert all(abs(v - t * t / 2) < 1e-12 for v, t in zip(integral, times))

    x = [[t, t * t, 1.0] for t in range(8)]
    y = [2.0 + 0.5 * t for t in range(8)]
    fit = leadlag.fit_posterior(x, y, [0.0, 0.0, 0.0], g=3.0)
    assert all(abs(b - 0.75 * e) < 1e-9 for b, e in zip(fit["beta_star"], [0.5, 0.0, 2.0]))
    assert 0.0 <= fit["r2"] <= 1.0

    p = leadlag.hypergeom_tail(2, 10, 3, 4)
    assert abs(p - (3 * 21 + 7) / 210) < 1e-12
    adjusted = leadlag.benjamini_hochberg([0.01, 0.02, 0.04])
    assert all(math.isclose(a, b) for a, b in zip(adjusted, [0.03, 0.03, 0.04]))

    terms = [("term_a", g) for g in ("a1", "a2", "a3")] + [("term_b", g) for g in ("b1", "b2", "b3")]
    rows = leadlag.enrich(matrix.gene_ids, labels, terms)
    assert any(sig for *_, sig in rows)

    print("leadlag smoke test ok")


if __name__ == "__main__":
    main()
