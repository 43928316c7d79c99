"""Regenerate ``frozen/oracle_values.json`` from the oracles (run by hand, output is committed)."""

import json
import math
from pathlib import Path

import oracles

OUT = Path(__file__).parent / "frozen" / "oracle_values.json"


def main():
    vals = {}
    mats = {
        "sym2": [[1, -1], [-1, 1]],
        "star3": [[2, -1, -1], [-1, 1, 0], [-1, 0, 1]],
        "cycle3": [[1, -1, 0], [0, 2, -2], [-3, 0, 3]],
    }
    vals["left_null"] = {k: [str(v) for v in oracles.left_null_exact(M)] for k, M in mats.items()}
    vals["pi"] = {
        "sym2_lam20": str(oracles.pi_direct(mats["sym2"], [2, 0])),
        "star3_lam033": str(oracles.pi_direct(mats["star3"], [0, 3, 3])),
        "sym2_lam0307": str(oracles.pi_direct(mats["sym2"], ["3/10", "7/10"])),
    }
    vals["torus_distance_2d"] = oracles.torus_distance_shifts((0.9, 0.9), (0.1, 0.1))
    vals["arc_integral_half"] = oracles.arc_integral(lambda s: 1 - math.cos(2 * math.pi * s), 0.0, 0.5)
    vals["sin_pi_half_squared"] = math.sin(math.pi * 0.5) ** 2
    vals["power_L_a2_V1_q1"] = 0.5 * (1 / 2) ** 2 + 1
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(vals, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
