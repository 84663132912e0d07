"""Limited-memory BFGS with Armijo backtracking.

The implementation is the standard two-loop recursion (history of
``memory`` curvature pairs, most-recent-pair scaling of the implicit
initial Hessian) over a flattened float64 copy of the iterate.  The line
search only ever accepts steps that satisfy the Armijo condition, so with
a fixed objective an accepted step never increases the value.

Callers that alternate minimisation with a discrete reassignment step
(patch matching) pass ``on_iteration``; the hook runs at the top of every
iteration and may mutate the objective's captured state, in which case the
value and gradient are recomputed before the step is taken.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteLossError

ARMIJO_C1 = 1e-4
BACKTRACK_SHRINK = 0.5
MAX_BACKTRACKS = 20

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]
IterationHook = Callable[[int, np.ndarray], bool | None]
StepHook = Callable[[int, float, float], None]


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    loss: float
    grad_norm: float
    iterations: int
    stop_reason: str  # "iterations" | "converged" | "line_search" | "cancelled"


def _evaluate(objective: Objective, x: np.ndarray, shape) -> tuple[float, np.ndarray]:
    value, grad = objective(x.reshape(shape))
    value = float(value)
    grad = np.asarray(grad, dtype=np.float64).reshape(-1)
    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteLossError(f"objective returned non-finite value {value!r}")
    return value, grad


def lbfgs_minimize(
    objective: Objective,
    x0: np.ndarray,
    iterations: int,
    memory: int = 8,
    tol: float = 1e-8,
    on_iteration: IterationHook | None = None,
    on_step: StepHook | None = None,
) -> MinimizeResult:
    """Minimise ``objective`` starting from ``x0``.

    ``objective`` maps an array shaped like ``x0`` to ``(value, grad)``.
    Stops after ``iterations`` accepted steps, when the gradient infinity
    norm drops to ``tol``, when the line search cannot find a decrease, or
    when ``on_iteration`` returns False.  ``on_step(k, before, after)``
    fires after each accepted step with the values bracketing it.
    """
    shape = np.asarray(x0).shape
    x = np.asarray(x0, dtype=np.float64).reshape(-1).copy()
    history: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=max(1, memory))

    f, g = _evaluate(objective, x, shape)
    reason = "iterations"
    done = 0
    for k in range(iterations):
        if on_iteration is not None:
            if on_iteration(k, x.reshape(shape)) is False:
                reason = "cancelled"
                break
            # The hook may have changed the objective under us.
            f, g = _evaluate(objective, x, shape)
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol:
            reason = "converged"
            break

        d = _two_loop_direction(g, history)
        slope = float(d @ g)
        if slope >= 0.0:
            d = -g
            slope = float(d @ g)

        t = 1.0 if history else min(1.0, 1.0 / max(1.0, math.sqrt(float(g @ g))))
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = x + t * d
            value, grad = objective(x_new.reshape(shape))
            value = float(value)
            if math.isfinite(value) and value <= f + ARMIJO_C1 * t * slope:
                grad = np.asarray(grad, dtype=np.float64).reshape(-1)
                if not np.all(np.isfinite(grad)):
                    raise NonFiniteLossError("gradient non-finite at accepted step")
                accepted = True
                break
            t *= BACKTRACK_SHRINK
        if not accepted:
            reason = "line_search"
            break

        if on_step is not None:
            on_step(k, f, value)
        s = x_new - x
        y = grad - g
        sy = float(s @ y)
        if sy > 1e-10 * math.sqrt(float(s @ s)) * math.sqrt(float(y @ y)):
            history.append((s, y, 1.0 / sy))
        x, f, g = x_new, value, grad
        done = k + 1
    else:
        reason = "iterations"

    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return MinimizeResult(
        x=x.reshape(shape), loss=f, grad_norm=gnorm, iterations=done, stop_reason=reason
    )


def _two_loop_direction(
    g: np.ndarray, history: deque[tuple[np.ndarray, np.ndarray, float]]
) -> np.ndarray:
    """Apply the implicit inverse-Hessian estimate to -g."""
    q = -g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if history:
        s, y, _ = history[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q
