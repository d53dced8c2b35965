#!/usr/bin/env python3
"""Plan one protocol instance and stress it against every device model.

Runs the honest device at a few visibilities plus the whole adversary
suite, printing abort rates and the empirical bias of the emitted bit.
A sound protocol either aborts a cheating device or keeps its bias under
the certified target.
"""

import argparse
import math
import time

from randamp.protocol import plan_protocol
from randamp.simulator import (
    AdversarialDevice,
    HonestDevice,
    attack_suite,
    estimate_output_bias,
)
from randamp.strategies import NoiseModel, ghz_mermin_strategy


def describe(name: str, est, target: float) -> str:
    if est.no_data:
        return f"{name:24s} abort_rate=1.000  (no bit ever emitted)"
    sigma = math.sqrt(0.25 / est.emitted)
    verdict = "ok" if est.abort_rate >= 0.95 or est.bias <= target + 3 * sigma else "LEAK"
    return (
        f"{name:24s} abort_rate={est.abort_rate:.3f}  "
        f"bias={est.bias:.4f} (ci {est.bias_interval[0]:.4f}..{est.bias_interval[1]:.4f})  {verdict}"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epsilon", type=float, default=0.3)
    parser.add_argument("--eps-prime", type=float, default=0.29)
    parser.add_argument("--delta", type=float, default=0.9)
    parser.add_argument("--runs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    t0 = time.perf_counter()
    params = plan_protocol(args.epsilon, args.eps_prime, args.delta)
    print(
        f"plan: N={params.n_rounds}  x={params.x:.3e}  "
        f"p_crit={params.p_crit:.6f}  threshold={params.p_threshold:.9f}  "
        f"({time.perf_counter() - t0:.1f}s)"
    )

    # the planned threshold sits just below 1, so the honest device only
    # tolerates noise up to roughly the planner's slack
    ghz = ghz_mermin_strategy()
    for visibility in (1.0, 0.99999, 0.9999):
        est = estimate_output_bias(
            params, HonestDevice(ghz, NoiseModel(visibility)), args.runs, args.seed
        )
        print(describe(f"honest v={visibility}", est, args.eps_prime))

    for name, adversary in attack_suite().items():
        est = estimate_output_bias(params, AdversarialDevice(adversary), args.runs, args.seed)
        print(describe(name, est, args.eps_prime))


if __name__ == "__main__":
    main()
