"""Resolving 0 * infinity: the width ratio R for shrinking regularizations.

Replace a perfectly sharp correlation y1 + y2 = 0 by a Gaussian of finite
initial width dy_i. The packet spreads, and the spreading ratio
R = dy_f / dy_i grows like 1/dy_i^2 as the width shrinks, so the naive
"dy_i -> 0 with R -> infinity" limit is the indeterminate product 0 * inf.
For every finite width the product is simply dy_f = R * dy_i, a perfectly
finite number, and the ensemble stays in quantum equilibrium (KS column).
"""

from bohm_equilibrium import IntegratorConfig, TwoParticleState, regularization_sweep


def main():
    state = TwoParticleState.from_widths(sigma_narrow=0.05, sigma_wide=1.0)
    # the adaptive integrator handles the stiff early stretch of the
    # narrowest widths without a warning
    config = IntegratorConfig(method="rk45", tolerance=1e-9, t_final=2.0)
    widths = (0.8, 0.4, 0.2, 0.1, 0.05, 0.025)
    n = 10_000

    result = regularization_sweep(state, widths, n, 42, config)
    print(f"t_final = {config.t_final}, n = {n} per row")
    print(
        f"{'dy_i':>8} {'R':>12} {'dy_f = R*dy_i':>14} {'empirical':>11} {'KS':>9}"
    )
    for row in result.rows:
        print(
            f"{row.delta_y_i:8.3f} {row.r:12.3f} {row.delta_y_f:14.5f} "
            f"{row.delta_y_f_empirical:11.5f} {row.ks:9.4f}"
        )

    print()
    print("(the rows share one random stream, so their empirical columns")
    print("deviate from the prediction in the same correlated direction)")
    print()
    print("R doubles whenever dy_i halves... squared: R ~ t/(m*dy_i^2), so")
    print("dy_f = R*dy_i ~ t/(m*dy_i) diverges only in the exact delta limit,")
    print("which is the one initial condition the theory never has to accept.")


if __name__ == "__main__":
    main()
