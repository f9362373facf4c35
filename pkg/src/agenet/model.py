"""Full age-estimation model: backbone features into the attribute head.

The complete parameter set (attribute branches included) is always allocated
in a fixed order from the seed, so runs with and without attribute guidance
start from identical shared weights. The guidance flag only changes which
path the forward pass takes and which parameters train.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .tensor import Tensor
from .network import NetworkConfig, build_backbone
from .attributes import AttributeHead, AttributeSchema

__all__ = ["AgeModel"]


class AgeModel:
    def __init__(self, net_cfg: NetworkConfig, schema: AttributeSchema,
                 seed: int, out_dim: int = 1, fuse_kernel: int = 3):
        rng = np.random.default_rng([seed, 0])
        self.net_cfg = net_cfg
        self.schema = schema
        self.out_dim = out_dim
        self.backbone, self.trace = build_backbone(net_cfg, rng)
        self.head = AttributeHead(rng, self.backbone.feature_dim, schema,
                                  out_dim=out_dim, fuse_kernel=fuse_kernel)
        # Age-range midpoint lands in the final bias at init so the
        # regression output starts inside the label range (scalar head only).
        self._mid_bias = 0.0

    def init_output_bias(self, value: float) -> None:
        if self.out_dim == 1:
            self.head.final.bias.data[:] = float(value)
            self._mid_bias = float(value)

    def forward(self, images: Tensor, guided: bool):
        """Returns (output, branch_logits or None)."""
        features = self.backbone(images)
        return self.head(features, guided)

    def parameters(self) -> "OrderedDict[str, Tensor]":
        params = OrderedDict()
        for name, t in self.backbone.named_params("backbone"):
            params[name] = t
        for name, t in self.head.named_params("head"):
            params[name] = t
        return params

    def trainable_parameters(self, guided: bool) -> "OrderedDict[str, Tensor]":
        params = self.parameters()
        if guided:
            return params
        frozen = self.head.attribute_param_names("head")
        return OrderedDict((n, t) for n, t in params.items() if n not in frozen)

    def param_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        unknown = set(state) - set(params)
        if unknown:
            raise ValueError(f"unknown parameter names: {sorted(unknown)[:3]}")
        missing = set(params) - set(state)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)[:3]}")
        for name, arr in state.items():
            t = params[name]
            if t.data.shape != arr.shape:
                raise ValueError(
                    f"shape mismatch for {name}: model {t.data.shape}, state {arr.shape}")
            t.data = np.array(arr, dtype=np.float64)

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, t.data.copy()) for n, t in self.parameters().items())
