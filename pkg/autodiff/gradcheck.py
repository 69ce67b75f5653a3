"""
Central finite-difference oracle for the analytic gradients
"""
from typing import Callable, Sequence

import numpy as np

from autodiff.tensor import Parameter, Tape, Tensor, backward, zero_grads
from errors import ConfigurationError, OraclePreconditionError


def finite_difference_check(f: Callable[[Sequence[Parameter]], Tensor],
                            params: Sequence[Parameter],
                            h: float = 1e-5,
                            abs_floor: float = 1e-12) -> float:
    """
    Compares backward() against (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h for every
    coordinate of every parameter.

    Returns max |analytic − numeric| / max(abs_floor, |analytic| + |numeric|).
    f must be deterministic; it is evaluated twice at θ to confirm that.
    Parameter grads are left holding the analytic gradient.
    """
    if h <= 0:
        raise ConfigurationError(f"finite-difference step must be positive, got {h}")

    first, second = f(params).item(), f(params).item()
    if first != second:
        raise OraclePreconditionError(
            f"function is not deterministic: {first!r} then {second!r} at the same point"
        )

    zero_grads(params)
    with Tape() as tape:
        loss = f(params)
    backward(tape, loss)

    worst = 0.0
    originals = [p.value.values.copy() for p in params]
    try:
        for p, base in zip(params, originals):
            analytic = p.grad.copy()
            for idx in np.ndindex(*p.shape):
                shifted = base.copy()
                shifted[idx] = base[idx] + h
                p.assign(shifted)
                f_plus = f(params).item()
                shifted[idx] = base[idx] - h
                p.assign(shifted)
                f_minus = f(params).item()
                p.assign(base)

                numeric = (f_plus - f_minus) / (2.0 * h)
                a = analytic[idx]
                err = abs(a - numeric) / max(abs_floor, abs(a) + abs(numeric))
                worst = max(worst, err)
    finally:
        for p, base in zip(params, originals):
            p.assign(base)
    return worst
