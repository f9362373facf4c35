"""Attribute schemas, age-group binning, the guidance head, and its losses."""

import math

import numpy as np
import pytest

from agenet.tensor import Tensor, backward, tsum
from agenet.gradcheck import gradcheck
from agenet.attributes import (SCHEMAS, AttributeHead, AttributeLabels,
                               AttributeSchema, age_group_bin, attr_loss,
                               total_loss)

class TestSchema:
    def test_named_schemas_shape(self):
        assert SCHEMAS["morph"].gender_classes == 2
        assert SCHEMAS["morph"].ethnicity_classes == 4
        assert SCHEMAS["morph"].age_groups == 3
        assert SCHEMAS["utkface"].age_groups == 6
        assert SCHEMAS["lap2016"].ethnicity_classes == 0
        assert SCHEMAS["lap2016"].age_groups == 5

    def test_boundaries_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            AttributeSchema(2, 4, 3, (16, 16, 60))

    def test_group_count_must_match_boundaries(self):
        with pytest.raises(ValueError, match="boundaries"):
            AttributeSchema(2, 4, 4, (16, 45, 60))

    def test_fused_dim(self):
        assert SCHEMAS["morph"].fused_dim == 2 + 3 + 4
        assert SCHEMAS["lap2016"].fused_dim == 2 + 5


class TestAgeGroupBin:
    @pytest.mark.parametrize("age,expect", [(17, 0), (44, 1), (45, 2), (95, 5), (90, 5), (89, 4)])
    def test_utkface_boundaries(self, age, expect):
        assert age_group_bin(age, SCHEMAS["utkface"]) == expect

    @pytest.mark.parametrize("age,expect", [(16, 0), (44, 0), (45, 1), (59, 1), (60, 2), (77, 2)])
    def test_morph_three_groups(self, age, expect):
        assert age_group_bin(age, SCHEMAS["morph"]) == expect

    def test_below_range_rejected(self):
        with pytest.raises(ValueError, match="below"):
            age_group_bin(15, SCHEMAS["morph"])

    @pytest.mark.parametrize("name,a_min,a_max", [("morph", 16, 77), ("utkface", 1, 100),
                                                  ("lap2016", 3, 80)])
    def test_total_and_single_valued_over_range(self, name, a_min, a_max):
        schema = SCHEMAS[name]
        seen = set()
        prev = 0
        for age in range(a_min, a_max + 1):
            g = age_group_bin(age, schema)
            assert 0 <= g < schema.age_groups
            assert g >= prev  # monotone in age, so bins cannot overlap
            prev = g
            seen.add(g)
        assert seen == set(range(schema.age_groups))


class TestLabels:
    def test_validate_ranges(self):
        schema = SCHEMAS["morph"]
        AttributeLabels(0, 3, 2).validate(schema)
        with pytest.raises(ValueError, match="gender"):
            AttributeLabels(2, 0, 0).validate(schema)
        with pytest.raises(ValueError, match="ethnicity"):
            AttributeLabels(0, 4, 0).validate(schema)
        with pytest.raises(ValueError, match="age group"):
            AttributeLabels(0, 0, 3).validate(schema)

    def test_ethnicity_ignored_when_branch_disabled(self):
        AttributeLabels(1, 99, 4).validate(SCHEMAS["lap2016"])


class TestHead:
    def test_branch_dims_morph(self, rng):
        head = AttributeHead(rng, 16, SCHEMAS["morph"])
        gl, al, el = head.branches(Tensor(rng.standard_normal((5, 16))))
        assert gl.shape == (5, 2) and al.shape == (5, 3) and el.shape == (5, 4)

    def test_branch_dims_utkface(self, rng):
        head = AttributeHead(rng, 16, SCHEMAS["utkface"])
        gl, al, el = head.branches(Tensor(rng.standard_normal((2, 16))))
        assert gl.shape == (2, 2) and al.shape == (2, 6) and el.shape == (2, 4)

    def test_zero_weights_give_uniform_softmax(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["morph"])
        head.gender.weight.data[:] = 0.0
        head.gender.bias.data[:] = 0.0
        gl, _, _ = head.branches(Tensor(rng.standard_normal((3, 8))))
        assert np.all(gl.data == 0.0)

    def test_fuse_delta_kernel_is_identity(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["morph"])
        head.fuse_kernel.data[:] = [0.0, 1.0, 0.0]
        gl, al, el = head.branches(Tensor(rng.standard_normal((4, 8))))
        second = head.fuse(gl, al, el)
        cat = np.concatenate([gl.data, al.data, el.data], axis=1)
        assert np.allclose(second.data, cat)
        assert second.shape == (4, 9)

    def test_final_head_input_dim(self, rng):
        head = AttributeHead(rng, 128, SCHEMAS["morph"])
        assert head.final.weight.shape == (128 + 9, 1)

    def test_constant_bias_with_zero_weights(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["morph"])
        head.final.weight.data[:] = 0.0
        head.final.bias.data[:] = 41.5
        out, _ = head(Tensor(rng.standard_normal((6, 8))), guided=True)
        assert np.allclose(out.data, 41.5)
        out, _ = head(Tensor(rng.standard_normal((6, 8))), guided=False)
        assert np.allclose(out.data, 41.5)

    def test_unguided_equals_global_path_only(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["morph"])
        feats = Tensor(rng.standard_normal((4, 8)))
        out, logits = head(feats, guided=False)
        assert logits is None
        g = head.global_fc(feats)
        manual = g.data @ head.final.weight.data[:8] + head.final.bias.data
        assert np.array_equal(out.data, manual[:, 0])

    def test_lap_schema_drops_ethnicity_branch(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["lap2016"])
        assert head.ethnicity is None
        gl, al, el = head.branches(Tensor(rng.standard_normal((2, 8))))
        assert el is None
        second = head.fuse(gl, al, el)
        assert second.shape == (2, 7)

    def test_gradient_reaches_all_branches_through_fused_layer(self, rng):
        head = AttributeHead(rng, 8, SCHEMAS["morph"])
        feats = Tensor(rng.standard_normal((4, 8)), requires_grad=True)
        out, _ = head(feats, guided=True)
        backward(tsum(out))
        for unit in (head.gender, head.agegroup, head.ethnicity):
            assert unit.weight.grad is not None
            assert np.any(unit.weight.grad != 0.0)
        assert head.fuse_kernel.grad is not None

    def test_final_head_gradcheck(self, rng):
        head = AttributeHead(rng, 6, SCHEMAS["morph"])
        feats = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
        params = [feats, head.global_fc.weight, head.final.weight, head.fuse_kernel]
        rep = gradcheck(lambda *t: tsum(head(feats, guided=True)[0]), params)
        assert rep.max_rel_err < 1e-6, rep.describe(1e-6)


class TestAttrLoss:
    def _uniform_logits(self, schema, n=1):
        gl = Tensor(np.zeros((n, schema.gender_classes)))
        al = Tensor(np.zeros((n, schema.age_groups)))
        el = Tensor(np.zeros((n, schema.ethnicity_classes))) if schema.has_ethnicity else None
        return gl, al, el

    def test_uniform_logits_morph_spot_value(self):
        schema = SCHEMAS["morph"]
        labels = [AttributeLabels(0, 0, 0)]
        loss = attr_loss(self._uniform_logits(schema), labels, schema)
        expect = math.log(3) + math.log(2) + math.log(4)
        assert abs(float(loss.data) - expect) < 1e-9

    def test_zero_coefficients_give_zero(self):
        schema = SCHEMAS["morph"]
        labels = [AttributeLabels(1, 2, 1)]
        loss = attr_loss(self._uniform_logits(schema), labels, schema,
                         alpha=0.0, beta=0.0, gamma=0.0)
        assert float(loss.data) == 0.0

    def test_saturated_correct_predictions_vanish(self):
        schema = SCHEMAS["morph"]
        labels = [AttributeLabels(0, 0, 0)]
        big = 200.0
        gl = Tensor(np.array([[big, 0.0]]))
        al = Tensor(np.array([[big, 0.0, 0.0]]))
        el = Tensor(np.array([[big, 0.0, 0.0, 0.0]]))
        loss = attr_loss((gl, al, el), labels, schema)
        assert 0.0 <= float(loss.data) < 1e-8

    def test_loss_nonnegative(self, rng):
        schema = SCHEMAS["morph"]
        for _ in range(20):
            gl = Tensor(rng.standard_normal((3, 2)))
            al = Tensor(rng.standard_normal((3, 3)))
            el = Tensor(rng.standard_normal((3, 4)))
            labels = [AttributeLabels(int(rng.integers(2)), int(rng.integers(4)),
                                      int(rng.integers(3))) for _ in range(3)]
            assert float(attr_loss((gl, al, el), labels, schema).data) >= 0.0

    def test_out_of_range_label_rejected(self):
        schema = SCHEMAS["morph"]
        with pytest.raises(ValueError):
            attr_loss(self._uniform_logits(schema), [AttributeLabels(0, 9, 0)], schema)

    def test_lap_schema_drops_gamma_term(self):
        schema = SCHEMAS["lap2016"]
        labels = [AttributeLabels(0, 0, 0)]
        loss = attr_loss(self._uniform_logits(schema), labels, schema, gamma=123.0)
        expect = math.log(5) + math.log(2)
        assert abs(float(loss.data) - expect) < 1e-9


class TestTotalLoss:
    def test_sum_of_parts(self):
        total = total_loss(Tensor(np.asarray(0.7)), Tensor(np.asarray(0.3)))
        assert abs(float(total.data) - 1.0) < 1e-12

    def test_zero_attr_reduces_to_ranking_term(self):
        total = total_loss(Tensor(np.asarray(2.5)), Tensor(np.asarray(0.0)))
        assert float(total.data) == 2.5

    def test_gradient_sums_both_paths(self):
        shared = Tensor(np.asarray(1.0), requires_grad=True)
        from agenet.tensor import scale
        total = total_loss(scale(shared, 2.0), scale(shared, 3.0))
        backward(total)
        assert float(shared.grad) == 5.0
