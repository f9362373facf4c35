"""Demographic attribute guidance.

Three classification branches (gender, age group, ethnicity) hang off the
pooled feature vector, one affine map each. Their logits are spliced in that
fixed order, passed through a shared short 1-d convolution to form a second
attribute layer of the same width, and that layer is concatenated with the
global feature map before the final regression head. The attribute loss is
the coefficient-weighted sum of the three branch cross-entropies; the total
training loss adds it to the ranking loss.

When guidance is off the attribute path is skipped entirely: the final head
sees zeros in the attribute slots, so its extra columns and the branch
parameters stay frozen at their initial values and the model computes exactly
the backbone-plus-ranking baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, concat_cols, reshape, scale
from .ops import conv1d, softmax_xent
from .network import AffineUnit, uniform_init

__all__ = [
    "AttributeSchema",
    "AttributeLabels",
    "SCHEMAS",
    "age_group_bin",
    "AttributeHead",
    "attr_loss",
    "total_loss",
]


@dataclass(frozen=True)
class AttributeSchema:
    """Class counts per attribute; ethnicity_classes = 0 disables that branch.

    group_boundaries are inclusive lower bounds of the age groups, strictly
    increasing, one per group.
    """

    gender_classes: int
    ethnicity_classes: int
    age_groups: int
    group_boundaries: tuple[int, ...]

    def __post_init__(self):
        if self.gender_classes < 2:
            raise ValueError("need at least two gender classes")
        if self.ethnicity_classes < 0:
            raise ValueError("ethnicity_classes must be >= 0")
        if self.age_groups != len(self.group_boundaries):
            raise ValueError(
                f"age_groups={self.age_groups} but {len(self.group_boundaries)} boundaries")
        bs = self.group_boundaries
        if any(bs[i] >= bs[i + 1] for i in range(len(bs) - 1)):
            raise ValueError(f"group boundaries must be strictly increasing: {bs}")

    @property
    def has_ethnicity(self) -> bool:
        return self.ethnicity_classes > 0

    @property
    def fused_dim(self) -> int:
        return self.gender_classes + self.age_groups + self.ethnicity_classes


SCHEMAS: dict[str, AttributeSchema] = {
    # Morph: ages 16-77, three age groups, four ethnicities.
    "morph": AttributeSchema(2, 4, 3, (16, 45, 60)),
    # UTKFace: ages 1-100, six age groups, four ethnicities.
    "utkface": AttributeSchema(2, 4, 6, (1, 18, 45, 60, 75, 90)),
    # LAP2016: ages 3-80, five age groups, ethnicity branch disabled.
    "lap2016": AttributeSchema(2, 0, 5, (3, 18, 45, 60, 75)),
}


def age_group_bin(age: int, schema: AttributeSchema) -> int:
    """Index of the unique age group containing ``age``."""
    bs = schema.group_boundaries
    if age < bs[0]:
        raise ValueError(f"age {age} below the first group boundary {bs[0]}")
    return int(np.searchsorted(bs, age, side="right")) - 1


@dataclass(frozen=True)
class AttributeLabels:
    gender: int
    ethnicity: int
    age_group: int

    def validate(self, schema: AttributeSchema) -> "AttributeLabels":
        if not 0 <= self.gender < schema.gender_classes:
            raise ValueError(f"gender label {self.gender} out of range")
        if schema.has_ethnicity and not 0 <= self.ethnicity < schema.ethnicity_classes:
            raise ValueError(f"ethnicity label {self.ethnicity} out of range")
        if not 0 <= self.age_group < schema.age_groups:
            raise ValueError(f"age group label {self.age_group} out of range")
        return self


class AttributeHead:
    """Attribute branches, fused second layer, and the final regression head."""

    def __init__(self, rng: np.random.Generator, feature_dim: int,
                 schema: AttributeSchema, out_dim: int = 1, fuse_kernel: int = 3):
        self.schema = schema
        self.feature_dim = feature_dim
        self.out_dim = out_dim
        f = feature_dim
        self.global_fc = AffineUnit(rng, f, f)
        self.gender = AffineUnit(rng, f, schema.gender_classes)
        self.agegroup = AffineUnit(rng, f, schema.age_groups)
        self.ethnicity = AffineUnit(rng, f, schema.ethnicity_classes) if schema.has_ethnicity else None
        self.fuse_kernel = Tensor(uniform_init(rng, (fuse_kernel,), fuse_kernel),
                                  requires_grad=True)
        self.final = AffineUnit(rng, f + schema.fused_dim, out_dim)

    def branches(self, features: Tensor):
        """Per-attribute logits from the shared feature vector."""
        gl = self.gender(features)
        al = self.agegroup(features)
        el = self.ethnicity(features) if self.ethnicity is not None else None
        return gl, al, el

    def fuse(self, gl: Tensor, al: Tensor, el: Tensor | None) -> Tensor:
        parts = [gl, al] + ([el] if el is not None else [])
        return conv1d(concat_cols(parts), self.fuse_kernel)

    def __call__(self, features: Tensor, guided: bool):
        """Returns (output, branch logits or None). ``output`` has shape (N,)
        when out_dim == 1, else (N, out_dim)."""
        g = self.global_fc(features)
        n = features.data.shape[0]
        if guided:
            gl, al, el = self.branches(features)
            second = self.fuse(gl, al, el)
            out = self.final(concat_cols([g, second]))
            logits = (gl, al, el)
        else:
            # Zero attribute slots: the final head's extra columns contribute
            # nothing and receive no gradient.
            pad = Tensor(np.zeros((n, self.schema.fused_dim)))
            out = self.final(concat_cols([g, pad]))
            logits = None
        if self.out_dim == 1:
            out = reshape(out, (n,))
        return out, logits

    def named_params(self, prefix: str = "head"):
        yield from self.global_fc.named_params(f"{prefix}.global")
        yield from self.gender.named_params(f"{prefix}.gender")
        yield from self.agegroup.named_params(f"{prefix}.agegroup")
        if self.ethnicity is not None:
            yield from self.ethnicity.named_params(f"{prefix}.ethnicity")
        yield f"{prefix}.fuse.kernel", self.fuse_kernel
        yield from self.final.named_params(f"{prefix}.final")

    def attribute_param_names(self, prefix: str = "head") -> set[str]:
        """Names of the parameters that only the guided path exercises."""
        names = {f"{prefix}.fuse.kernel"}
        for unit, sub in ((self.gender, "gender"), (self.agegroup, "agegroup"),
                          (self.ethnicity, "ethnicity")):
            if unit is not None:
                names |= {f"{prefix}.{sub}.weight", f"{prefix}.{sub}.bias"}
        return names


def attr_loss(branch_logits, labels: list[AttributeLabels], schema: AttributeSchema,
              alpha: float = 1.0, beta: float = 1.0, gamma: float = 1.0) -> Tensor:
    """alpha * CE(age group) + beta * CE(gender) + gamma * CE(ethnicity),
    each a summed softmax cross-entropy over the batch."""
    gl, al, el = branch_logits
    for lab in labels:
        lab.validate(schema)
    gender = np.array([lab.gender for lab in labels])
    group = np.array([lab.age_group for lab in labels])
    loss = add(scale(softmax_xent(al, group), alpha),
               scale(softmax_xent(gl, gender), beta))
    if schema.has_ethnicity and el is not None:
        eth = np.array([lab.ethnicity for lab in labels])
        loss = add(loss, scale(softmax_xent(el, eth), gamma))
    return loss


def total_loss(ecr: Tensor, attr: Tensor) -> Tensor:
    """Joint objective: ranking loss plus attribute loss."""
    return add(ecr, attr)
