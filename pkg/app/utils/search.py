import math
from typing import Callable, Tuple

import numpy as np

from app.utils.errors import DomainError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> Tuple[float, float, int]:
    """Maximize a unimodal function on [lo, hi]; returns (x, f(x), evaluations)."""
    if not hi > lo:
        raise DomainError("Golden-section bracket is empty", {"lo": lo, "hi": hi})
    
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evaluations = 2
    
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evaluations += 1
    
    candidates = [(fc, c), (fd, d)]
    best_value, best_x = max(candidates)
    return best_x, best_value, evaluations


def golden_section_min(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> Tuple[float, float, int]:
    """Minimize a unimodal function on [lo, hi]."""
    x, value, evaluations = golden_section_max(lambda s: -f(s), lo, hi, tol, max_iter)
    return x, -value, evaluations


def scan_then_refine_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    grid: int,
    tol: float = 1e-10,
) -> Tuple[float, float, int]:
    """Grid scan followed by golden-section refinement around the best node.

    The refinement only ever replaces the grid winner when it improves on it,
    so non-unimodal functions still get the grid maximum.
    """
    nodes = np.linspace(lo, hi, grid)
    values = np.array([f(float(x)) for x in nodes])
    k = int(np.argmax(values))
    best_x, best_value = float(nodes[k]), float(values[k])
    
    left = float(nodes[max(k - 1, 0)])
    right = float(nodes[min(k + 1, grid - 1)])
    evaluations = grid
    if right > left:
        x, value, extra = golden_section_max(f, left, right, tol)
        evaluations += extra
        if value > best_value:
            best_x, best_value = x, value
    
    return best_x, best_value, evaluations
