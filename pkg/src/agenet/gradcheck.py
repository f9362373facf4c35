"""Finite-difference verification of analytic gradients.

The checker compares the backward pass of a scalar-valued function against
central differences. Error for one element is |analytic - numeric| divided
by max(|analytic|, |numeric|, 1): relative for large gradients, absolute
near zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad

__all__ = ["GradCheckReport", "gradcheck"]


@dataclass
class GradCheckReport:
    name: str
    max_rel_err: float
    per_input: list[float]
    failures: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_err < tolerance

    def describe(self, tolerance: float) -> str:
        status = "pass" if self.ok(tolerance) else "FAIL"
        msg = f"{status} {self.name}: max rel err {self.max_rel_err:.3e} (tol {tolerance:.0e})"
        for inp, elem, a, n, err in self.failures[:5]:
            msg += f"\n  input {inp} element {elem}: analytic {a:.6e} numeric {n:.6e} err {err:.3e}"
        return msg


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1.0)


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], *,
              step: float = 1e-5, tolerance: float = 1e-6,
              sample: int | None = None, rng: np.random.Generator | None = None,
              name: str = "fn") -> GradCheckReport:
    """Check d fn(*inputs) / d input against central differences.

    ``fn`` must return a scalar Tensor. Every element of every input marked
    requires_grad is perturbed by +-step*max(1,|x|) unless ``sample`` caps
    the number of elements checked per input (chosen by ``rng``).
    """
    for t in inputs:
        t.grad = None
    out = fn(*inputs)
    backward(out)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs]

    max_err = 0.0
    per_input = []
    failures = []
    for idx, t in enumerate(inputs):
        if not t.requires_grad:
            per_input.append(0.0)
            continue
        flat = t.data.reshape(-1)
        n_el = flat.size
        if sample is not None and sample < n_el:
            if rng is None:
                rng = np.random.default_rng(0)
            elems = rng.choice(n_el, size=sample, replace=False)
        else:
            elems = range(n_el)
        worst = 0.0
        for e in elems:
            orig = flat[e]
            h = step * max(1.0, abs(orig))
            with no_grad():
                flat[e] = orig + h
                f_plus = float(fn(*inputs).data)
                flat[e] = orig - h
                f_minus = float(fn(*inputs).data)
                flat[e] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[idx].reshape(-1)[e])
            err = _rel_err(a, numeric)
            if err > worst:
                worst = err
            if err >= tolerance:
                failures.append((idx, int(e), a, numeric, err))
        per_input.append(worst)
        max_err = max(max_err, worst)
    return GradCheckReport(name=name, max_rel_err=max_err, per_input=per_input, failures=failures)
