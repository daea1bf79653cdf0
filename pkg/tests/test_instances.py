import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from owp import distributions as D
from owp.exceptions import ConfigurationError, DomainError, InstanceFormatError
from owp.instances import (MODES, dumps, from_distributions, generate, instance_to_dict,
                           load_instance, loads, radii_of, recipe_radii, save_instance)


def pairwise_ok(inst):
    c, R = inst.centers, radii_of(inst)
    for i in range(inst.n):
        for j in range(i + 1, inst.n):
            # gaussians carry sigma = R/2, so compare the recipe radius
            if R[i] + R[j] > np.linalg.norm(c[i] - c[j]) + 1e-12:
                return False
    return True


def recipe_R(inst):
    out = []
    for s in inst.distributions:
        out.append(s.params["R"] if "R" in s.params else 2 * s.params["sigma"])
    return np.array(out)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(2, 5), st.integers(0, 10**6), st.sampled_from(MODES))
def test_generated_invariants(n, d, seed, mode):
    inst = generate(n, d, seed, mode)
    assert inst.n == n and inst.d == d
    w = inst.weights
    assert np.all((w >= 1) & (w <= 10))
    R = recipe_R(inst)
    c = inst.centers
    assert np.all((c >= 0) & (c <= 10))
    gaps = [np.linalg.norm(c[i] - c[j]) - R[i] - R[j] for i in range(n) for j in range(i + 1, n)]
    if gaps:
        assert min(gaps) >= -1e-12
        # alpha is the minimum, so at least one pair touches
        assert min(gaps) == pytest.approx(0.0, abs=1e-9)
        assert w.min() == 1.0 and w.max() == 10.0
    np.testing.assert_allclose(R, (w * inst.extra["alpha"]) ** (1 / d), rtol=1e-12)
    for s in inst.distributions:
        if s.kind == "shell":
            assert s.params["r"] == pytest.approx(0.8 * s.params["R"])
    skewed = [s.skew_direction is not None for s in inst.distributions]
    if mode == "sym":
        assert not any(skewed)
    elif mode == "asym":
        assert all(skewed)


def test_kinds_are_recipe_kinds():
    kinds = {s.kind for seed in range(10) for s in generate(20, 2, seed).distributions}
    assert kinds == {"ball", "shell", "gaussian"}


def test_mixed_mode_skews_about_half():
    flags = [s.skew_direction is not None for seed in range(20)
             for s in generate(20, 2, seed, "mixed").distributions]
    assert 0.4 < np.mean(flags) < 0.6


def test_equal_weights_equal_radii():
    rng = np.random.default_rng(0)
    c = rng.uniform(0, 10, size=(6, 3))
    R, alpha = recipe_radii(c, np.full(6, 4.0))
    np.testing.assert_allclose(R, (4.0 * alpha) ** (1 / 3), rtol=1e-14)


@pytest.mark.parametrize("s", [0.1, 2.0, 37.0])
def test_radii_scale_with_centers(s):
    inst = generate(8, 2, 5)
    R, _ = recipe_radii(inst.centers, inst.weights)
    R2, _ = recipe_radii(s * inst.centers, inst.weights)
    np.testing.assert_allclose(R2, s * R, rtol=1e-12)


def test_single_demand():
    inst = generate(1, 3, 0)
    assert inst.weights[0] == 1.0
    assert recipe_R(inst)[0] == pytest.approx(1.0)


def test_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_instance(generate(7, 3, 42, "mixed"), a)
    save_instance(generate(7, 3, 42, "mixed"), b)
    assert a.read_bytes() == b.read_bytes()
    assert dumps(generate(7, 3, 43, "mixed")) != a.read_text()


@pytest.mark.parametrize("mode", MODES)
def test_round_trip(tmp_path, mode):
    inst = generate(6, 2, 3, mode, kinds=("ball", "shell", "gaussian", "sphere", "tstudent"))
    p = tmp_path / "x" / "inst.json"
    save_instance(inst, p)
    back = load_instance(p)
    assert back == inst
    assert instance_to_dict(back) == instance_to_dict(inst)


def test_round_trip_hand_built():
    inst = from_distributions([D.point((0.0, 1.0)), D.tstudent((2.0, 2.0), 1.5, 0.3)], [0.0, 2.5])
    assert loads(dumps(inst)) == inst


def _doc():
    return json.loads(dumps(generate(3, 2, 0, kinds=("shell",))))


def test_negative_weight_names_field():
    doc = _doc()
    doc["demands"][1]["weight"] = -1
    with pytest.raises(InstanceFormatError, match=r"demands\[1\]\.weight"):
        loads(json.dumps(doc))


def test_shell_radii_order():
    doc = _doc()
    doc["demands"][0]["params"]["r"] = doc["demands"][0]["params"]["R"]
    with pytest.raises(InstanceFormatError, match=r"demands\[0\]"):
        loads(json.dumps(doc))


@pytest.mark.parametrize("mutate, pattern", [
    (lambda d: d.pop("id"), "missing field 'id'"),
    (lambda d: d.update(n=5), "declares 5"),
    (lambda d: d["demands"][2].update(center=[1.0]), r"demands\[2\]\.center"),
    (lambda d: d.update(lambda_preset="nope"), "lambda_preset"),
    (lambda d: d["demands"][0].update(kind="cube"), r"demands\[0\]"),
])
def test_malformed(mutate, pattern):
    doc = _doc()
    mutate(doc)
    with pytest.raises(InstanceFormatError, match=pattern):
        loads(json.dumps(doc))


def test_syntax_error_reports_line():
    text = dumps(generate(2, 2, 0)).replace('"d": 2,', '"d": 2,,', 1)
    with pytest.raises(InstanceFormatError, match="line 3"):
        loads(text)


@pytest.mark.parametrize("kw", [dict(n=0, d=2), dict(n=3, d=1)])
def test_generate_domain(kw):
    with pytest.raises(DomainError):
        generate(seed=0, **kw)


def test_generate_config():
    with pytest.raises(ConfigurationError):
        generate(3, 2, 0, mode="skewed")
    with pytest.raises(ConfigurationError):
        generate(3, 2, 0, kinds=("point",))
