"""Smoke test for the bosample_py extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import math

import bosample_py as bs


def check(name, cond):
    print(f"{'ok  ' if cond else 'FAIL'} {name}")
    return cond


def main():
    results = []

    x = [[0.0], [1.0], [2.0], [3.0]]
    y = [0.0, 1.0, 0.5, -0.5]
    gp = bs.GaussianProcess(x, y, length_scale=1.0, noise_variance=0.01)
    means, sds = gp.predict([[1.0], [10.0]])
    results.append(check("gp interpolates a training point", abs(means[0] - 1.0) < 0.1))
    results.append(check("gp reverts to prior far away", abs(means[1]) < 1e-6 and sds[1] > sds[0]))

    ei = bs.expected_improvement(0.0, 1.0, 0.0)
    results.append(check("EI(0, 1, 0) = 1/sqrt(2 pi)", abs(ei - 1.0 / math.sqrt(2.0 * math.pi)) < 1e-12))

    pi = bs.minmax_pi([1.0, 2.0, 3.0], 0.01)
    results.append(check("min-max pi", pi == [0.01, 0.5, 0.99]))

    u, p, exact = bs.mann_whitney_u([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    results.append(check("mann-whitney exact p", exact and u == 0.0 and abs(p - 0.05) < 1e-12))

    yy = [4.0, 2.0, 10.0, 1.0]
    yh = [3.0, 2.0, 8.0, 1.0]
    pis = [0.5, 0.25, 0.5, 0.25]
    de = bs.difference_total(yy, yh, pis, [0, 2])
    results.append(check("difference total", de == 14.0 + 2.0 + 4.0))

    sample = bs.draw_sample([0.5] * 10, "fixed-size-weighted", 4, seed=3)
    results.append(check("fixed-size draw", len(sample) == 4 and sample == sorted(sample)))

    feats, resp = bs.synthetic_population(size=60, dim=2, seed=1)
    results.append(check("synthetic population shape", len(feats) == 60 and len(feats[0]) == 2 and len(resp) == 60))

    scores = bs.acquisition_scores(feats[20:], feats[:20], resp[:20], "pu")
    results.append(check("PU scores positive", all(s > 0 for s in scores)))

    report = bs.simulate(
        'population = "synthetic"\nsynthetic_size = 120\nsynthetic_dim = 2\n'
        'prior_size = 20\nsample_size = 10\nrepeats = 3\ndesigns = ["srs", "bo-pu"]\n',
        threads=2,
    )
    results.append(check("simulate records", len(report["records"]) == 6 and not report["degraded"]))
    results.append(check("simulate p-values", 0.0 < report["p_values"]["BO-PU"]["mean_abs_diff"] <= 1.0))

    if not all(results):
        raise SystemExit(1)
    print("smoke test passed")


if __name__ == "__main__":
    main()
