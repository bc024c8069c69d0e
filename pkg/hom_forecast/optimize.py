"""Derivative-free line search used by the coordinate ascent."""

import math
from typing import Callable

INV_PHI = (math.sqrt(5) - 1) / 2  # 1/phi
INV_PHI_SQ = (3 - math.sqrt(5)) / 2  # 1/phi^2


def golden_section_max(
    objective: Callable[[float], float], low: float, high: float, tol: float
) -> tuple[float, float]:
    """Golden section search for the maximum of `objective` on [low, high].

    Returns the best interior point evaluated and its objective value once the
    bracket is narrower than `tol`.
    """
    if not high >= low:
        raise ValueError(f"Invalid bracket [{low}, {high}].")
    dist = high - low
    if dist <= tol:
        x = (low + high) / 2
        return x, objective(x)

    n = int(math.ceil(math.log(tol / dist) / math.log(INV_PHI)))

    c = low + INV_PHI_SQ * dist
    d = low + INV_PHI * dist
    yc = objective(c)
    yd = objective(d)

    for _ in range(n - 1):
        if yc > yd:
            high = d
            d, yd = c, yc
            dist = INV_PHI * dist
            c = low + INV_PHI_SQ * dist
            yc = objective(c)
        else:
            low = c
            c, yc = d, yd
            dist = INV_PHI * dist
            d = low + INV_PHI * dist
            yd = objective(d)

    return (c, yc) if yc > yd else (d, yd)
