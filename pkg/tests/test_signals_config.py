import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ouflow import config
from ouflow.errors import ValidationError
from ouflow.signals import MatrixSignal, VectorSignal, precessing_axis, scalar_function


def test_scalar_functions():
    assert scalar_function(2.5)(np.array([0.0, 3.0])).tolist() == [2.5, 2.5]
    s = scalar_function({"kind": "sinusoid", "mean": 1, "amplitude": 2, "frequency": 3, "phase": 0.5})
    assert s(1.0) == pytest.approx(1 + 2 * math.sin(3.5))
    p = scalar_function({"kind": "polynomial", "coeffs": [1, 0, 2]})
    assert p(2.0) == pytest.approx(9.0)
    assert scalar_function(p.to_dict())(2.0) == pytest.approx(9.0)
    with pytest.raises(ValidationError):
        scalar_function({"kind": "exp"})
    with pytest.raises(ValidationError):
        scalar_function("fast")


def test_signals_evaluate_vectorized():
    M = MatrixSignal.rotation3d(precessing_axis(0.3, 1.0), 2.0)
    vals = M(np.linspace(0, 1, 5))
    assert vals.shape == (5, 3, 3)
    assert_allclose(vals + np.swapaxes(vals, 1, 2), 0, atol=1e-15)
    axis = precessing_axis(0.3, 1.0)(0.7)
    assert_allclose(M(0.7) @ axis, 0, atol=1e-14)
    f = VectorSignal.sinusoidal([1.0, 2.0], 2.0, 0.1)
    assert_allclose(f(0.5), math.sin(1.1) * np.array([1.0, 2.0]))
    assert VectorSignal.zero(3).is_zero and not f.is_zero


def test_sampled_signals():
    times = np.linspace(0, 2, 11)
    vals = np.array([[[np.cos(t), 0], [0, t]] for t in times])
    M = MatrixSignal.sampled(times, vals)
    assert M.t_max == 2.0
    assert M(1.05)[0, 0] == pytest.approx(math.cos(1.05), abs=1e-4)
    lin = VectorSignal.sampled(times, np.stack([times, -times], axis=1), order=1)
    assert_allclose(lin(0.33), [0.33, -0.33])
    with pytest.raises(ValidationError):
        MatrixSignal.sampled(times, np.zeros((11, 2)))


def test_signal_validation():
    with pytest.raises(ValidationError):
        MatrixSignal.constant(np.zeros((4, 4)))
    with pytest.raises(ValidationError):
        MatrixSignal.constant([1.0, 2.0])
    with pytest.raises(ValidationError):
        MatrixSignal.rotation3d([1.0, 0.0], 1.0)


BASE = {"dimension": 2, "box": {"L": 8.0, "N": 32}, "signal_M": {"kind": "rotation2d", "omega": 1.0}}


def test_config_builds_everything():
    doc = dict(BASE, signal_f={"kind": "sinusoidal", "amplitude": [1, 0], "frequency": 2},
               exponents={"p": 2, "q": "inf"}, times={"s": 0, "t": 1},
               data={"kind": "vortices", "items": [{"sigma": 1, "amplitude": 1}]})
    config.validate(doc)
    cfg = config.build(doc)
    assert cfg.q == math.inf and cfg.grid.N == 32 and cfg.M.is_skew
    assert cfg.data().grid == cfg.grid


def test_config_3d_axis_forms():
    for axis in ([0, 0, 1], [{"kind": "sinusoid", "amplitude": 0.2}, 0, 1],
                 {"kind": "precessing", "tilt": 0.2, "rate": 1.0}):
        doc = {"dimension": 3, "box": {"L": 8.0, "N": 16},
               "signal_M": {"kind": "rotation3d", "axis": axis, "speed": 1.5}}
        config.validate(doc)
        assert config.build(doc).M.is_skew


def test_config_errors_name_the_field():
    bad = dict(BASE, box={"L": -1, "N": 32}, seed=-3)
    with pytest.raises(ValidationError) as info:
        config.validate(bad)
    msg = str(info.value)
    assert "config.box.L" in msg and "config.seed" in msg
    with pytest.raises(ValidationError) as info:
        config.parse('{"dimension": 2,\n "box": }', "x.json")
    assert "line 2" in str(info.value)
    with pytest.raises(ValidationError) as info:
        config.build(dict(BASE, box={"L": 8.0, "N": 48}))
    assert "config.box" in str(info.value)
    with pytest.raises(ValidationError):
        config.build(dict(BASE, signal_M={"kind": "constant", "matrix": np.eye(3).tolist()}))
    with pytest.raises(ValidationError):
        config.validate(dict(BASE, extra=1))


def test_canned_configs_load():
    for name in config.CANNED:
        cfg = config.canned(name)
        assert cfg.name == name
    with pytest.raises(ValidationError):
        config.canned("nope")


def test_file_data(tmp_path):
    from ouflow.field_grid import write_field
    from ouflow.initial_data import vortex
    cfg = config.build(BASE)
    write_field(tmp_path / "u.bin", vortex(cfg.grid, 1.0))
    doc = dict(BASE, data={"kind": "file", "path": "u.bin"})
    (tmp_path / "c.json").write_text(json.dumps(doc))
    loaded = config.load(tmp_path / "c.json")
    assert loaded.data().solenoidal
