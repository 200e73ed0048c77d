"""Measure how the stepped-vs-continuous T-operator gap shrinks with the step.

Builds the standard hopping-ring test model, prints the certified step
threshold m* with its bound constants, then halves the step from m*
downward and fits the log-log slope of ||T~ - T||.  The certified bound
is first order in tau; the measured decay is what it is.
"""

import argparse

from dtscatter.trotter import convergence_sweep, hopping_ring_model, tau_threshold


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--halvings", type=int, default=5,
                    help="number of grid points (tau = m* / 2^j)")
    args = ap.parse_args()

    model = hopping_ring_model()
    report = tau_threshold(model)
    print(f"gamma        = {report.gamma:.12f}")
    print(f"m*           = {report.m_star:.12f}")
    print(f"gamma'       = {report.gamma_prime:.12f}")
    print(f"gamma''      = {report.gamma_double_prime:.12f}")
    print(f"bound at m*  = {report.gamma + report.tau * report.gamma_prime + report.tau**2 * report.gamma_double_prime:.12f}")
    print()

    taus = [report.m_star * 0.5**j for j in range(args.halvings)]
    sweep = convergence_sweep(model, taus)
    print(f"{'tau':>12}  {'||T~ - T||':>14}")
    for tau, gap in zip(sweep.taus, sweep.gaps):
        print(f"{tau:12.6f}  {gap:14.6e}")
    print()
    print(f"fitted slope     = {sweep.slope:.6f}")
    print(f"fitted prefactor = {sweep.prefactor:.6e}")


if __name__ == "__main__":
    main()
