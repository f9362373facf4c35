#!/usr/bin/env python3
"""Tour of the autodiff engine: build a small graph, differentiate it, and
verify every primitive against central finite differences."""

import numpy as np

from agenet.tensor import Tensor, backward, mul, relu, sigmoid, tsum
from agenet.ops import affine, conv2d
from agenet.gradcheck import gradcheck
from agenet.checksuite import check_ops

rng = np.random.default_rng(0)

# --- a tiny expression graph -------------------------------------------------
x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
b = Tensor(np.zeros(2), requires_grad=True)

y = affine(x, w, b)          # (2, 2)
z = sigmoid(y)
loss = tsum(mul(z, z))       # sum of squared sigmoids
backward(loss)

print("loss       :", float(loss.data))
print("dL/dx      :\n", x.grad)
print("dL/dw      :\n", w.grad)

# A tensor feeding two consumers accumulates both contributions.
h = Tensor([1.0, -2.0], requires_grad=True)
backward(tsum(mul(relu(h), h)))   # d/dh [relu(h) * h]
print("shared-node grad (expect [2, 0]):", h.grad)

# --- gradient checking -------------------------------------------------------
# One op by hand: conv2d input/kernel/bias against central differences.
xi = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
ki = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.3, requires_grad=True)
bi = Tensor(np.zeros(3), requires_grad=True)
r = Tensor(rng.standard_normal((1, 3, 3, 3)))
rep = gradcheck(lambda *t: tsum(mul(conv2d(*t, stride=2, padding=1), r)), [xi, ki, bi])
print("\nconv2d gradcheck:", rep.describe(1e-6))

# The bundled suite covers every primitive (here with a few seeds; the
# acceptance run uses 100 per op).
print("\nprimitive suite (5 seeds each):")
for rep in check_ops(n_seeds=5):
    tol = 1e-8 if rep.name == "ecr_loss" else 1e-6
    print(" ", rep.describe(tol))
