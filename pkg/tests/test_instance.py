import json

import numpy as np
import pytest

from ballqcqp.errors import ConfigError, SchemaError, ShapeError
from ballqcqp.instance import (BallQcqpInstance, ball_residuals, contains, dumps, evaluate_q,
                               from_dict, generate, load, save)


def test_evaluate_q_examples(e1):
    assert evaluate_q(e1, [1.0]) == -1.0
    inst = generate(3, 4, 2)
    assert evaluate_q(inst, np.zeros(4)) == inst.c0


def test_evaluate_q_matches_lifted_form(rng):
    inst = generate(11, 5, 3)
    for _ in range(50):
        x = rng.normal(size=5)
        lifted = np.sum(inst.A * np.outer(x, x)) + 2 * inst.b @ x + inst.c0
        assert evaluate_q(inst, x) == pytest.approx(lifted, rel=1e-12, abs=1e-12)


def test_evaluate_q_shape_error(e1):
    with pytest.raises(ShapeError):
        evaluate_q(e1, [1.0, 2.0])


def test_contains_e1(e1):
    assert contains(e1, [0.5])[0]
    assert contains(e1, [0.0])[0]
    assert not contains(e1, [2.0])[0]
    assert np.allclose(ball_residuals(e1, [0.5]), [0.75, 0.75])


def test_generate_deterministic():
    a, b = generate(7, 3, 3), generate(7, 3, 3)
    assert a == b
    assert dumps(a) == dumps(b)
    assert not (generate(8, 3, 3) == a)


def test_witness_strictly_inside():
    for seed in range(1000):
        inst = generate(seed, 1 + seed % 5, 2 + seed % 3)
        assert np.all(ball_residuals(inst, inst.witness) > 0)


def test_generate_rejects_bad_config():
    with pytest.raises(ConfigError):
        generate(1, 3, 1)
    with pytest.raises(ConfigError):
        generate(1, 0, 2)
    with pytest.raises(ConfigError):
        generate(1, 2, 2, radius_range=(0, 1))


def test_construction_invariants():
    with pytest.raises(ConfigError):
        BallQcqpInstance(centers=[[0.0]], radii=[1.0], A=[[1.0]], b=[0.0])
    with pytest.raises(SchemaError):
        BallQcqpInstance(centers=[[0.0], [1.0]], radii=[1.0, 0.0], A=[[1.0]], b=[0.0])
    with pytest.raises(ShapeError):
        BallQcqpInstance(centers=[[0.0], [1.0]], radii=[1.0, 1.0], A=np.eye(2), b=[0.0])
    inst = BallQcqpInstance(centers=[[0.0, 0], [1, 0]], radii=[1.0, 1.0], A=[[1, 2], [0, 1]], b=[0, 0])
    assert np.array_equal(inst.A, inst.A.T)
    with pytest.raises(ValueError):
        inst.A[0, 0] = 5.0


def test_json_roundtrip_bitwise(tmp_path):
    inst = generate(42, 4, 3)
    path = tmp_path / "i.json"
    save(inst, path)
    back = load(path)
    assert back == inst
    assert dumps(back) == path.read_text()


def test_json_schema_errors(tmp_path):
    good = generate(1, 2, 2).to_dict()
    for key in ("n", "centers", "objective"):
        bad = dict(good)
        del bad[key]
        with pytest.raises(SchemaError, match=key):
            from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["objective"]["A"] = [[1.0, 2.0], [0.0, 1.0]]
    with pytest.raises(SchemaError, match="symmetric"):
        from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["radii"] = [1.0, -1.0]
    with pytest.raises(SchemaError):
        from_dict(bad)
    bad = json.loads(json.dumps(good))
    bad["m"] = 1
    bad["centers"] = bad["centers"][:1]
    bad["radii"] = bad["radii"][:1]
    with pytest.raises(SchemaError):
        from_dict(bad)
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load(p)
