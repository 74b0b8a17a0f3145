"""Smoke test for the pyfeedresponse extension module."""

import math

import pyfeedresponse as fr


def main():
    params = fr.ModelParams()
    assert params.views_per_post == 38.0

    total = sum(fr.marginal_response_pmf(k, 3, 5, 50, 0.4) for k in range(51))
    assert abs(total - 1.0) < 1e-10, total
    assert abs(fr.list_position_pmf(0, 1.0) - 0.5) < 1e-15

    users, pop = fr.simulate(user_count=200, advocate_post_count=400, seed=4)
    assert len(users) == 200 and pop.advocate_post_count == 400

    fit = fr.fit_mle(users, pop)
    low, high = fit["intervals"]["p_act"]
    assert fit["converged"] and low <= fit["params"].p_act <= high
    print(f"fit: {fit['params']!r}, p_act CI [{low:.4f}, {high:.4f}]")

    beta0, beta1, se0, se1 = fr.fit_logistic(users, pop)
    assert math.isfinite(beta0) and se1 > 0

    model = fr.ResponseModel(pop, fit["params"])
    preds = model.predict(users)
    rho, p = fr.spearman_rho([m for _, m, _, _ in preds], [float(o) for *_, o in preds])
    assert rho > 0.5, rho
    print(f"spearman rho = {rho:.3f} (p = {p:.2e})")

    cls = fr.classify_top_responders(preds, pop, 0.25)
    assert cls["predicted_count"] == 50
    print(f"precision = {cls['precision']:.3f}, fisher p = {cls['fisher_p']:.2e}")

    assert abs(fr.fisher_exact([[10, 0], [0, 10]]) - 2 / 184756) < 1e-15

    user = fr.UserRecord("x", 1.0, 100, "supporter", 3, 5, 3)
    grid, prior, post = model.posterior_interest(user)
    area = sum(0.5 * (grid[i + 1] - grid[i]) * (post[i] + post[i + 1]) for i in range(len(grid) - 1))
    assert abs(area - 1.0) < 1e-6

    try:
        fr.UserRecord("y", 1.0, 10, "sometimes", 0, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("bad stance accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
