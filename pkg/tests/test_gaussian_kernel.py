import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ouflow.errors import ValidationError
from ouflow.gaussian_kernel import (
    fourier_symbol, gram_scaling_report, kernel_eval, make_params, peak_value, scalar_factor,
)
from ouflow.signals import MatrixSignal, VectorSignal

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_make_params_examples():
    p = make_params(MatrixSignal.zero(2), VectorSignal.zero(2), 0, 1)
    assert_allclose(p.U_ts, np.eye(2)); assert_allclose(p.Q.matrix, np.eye(2)); assert_allclose(p.g, 0)
    p = make_params(MatrixSignal.constant(J), VectorSignal.zero(2), 0, math.pi / 2)
    assert_allclose(p.U_ts, [[0, 1], [-1, 0]], atol=1e-10)
    assert_allclose(p.U_st, [[0, -1], [1, 0]], atol=1e-10)
    assert_allclose(p.Q.matrix, math.pi / 2 * np.eye(2), atol=1e-10)
    p = make_params(MatrixSignal.zero(2), VectorSignal.constant([1.0, 0.0]), 0, 2)
    assert_allclose(p.Q.matrix, 2 * np.eye(2), atol=1e-13); assert_allclose(p.g, [2, 0], atol=1e-13)
    assert p.consistency_defect() < 1e-12
    with pytest.raises(ValidationError):
        make_params(MatrixSignal.zero(2), VectorSignal.zero(2), 1, 1)


def test_kernel_values():
    tau = 0.7
    p = make_params(MatrixSignal.zero(2), VectorSignal.zero(2), 0, tau)
    assert_allclose(kernel_eval(p, [0.0, 0.0]), np.eye(2) / (4 * math.pi * tau), rtol=1e-12)
    M = MatrixSignal.constant([[0.2, -1.0], [0.8, -0.1]])
    p = make_params(M, VectorSignal.zero(2), 0.1, 1.3)
    # a point with <Q^-1 x, x> = 4
    v = np.array([0.6, -0.8])
    x = 2 * v / math.sqrt(v @ np.linalg.solve(p.Q.matrix, v))
    assert_allclose(kernel_eval(p, x), math.exp(-1) * peak_value(p) * p.U_ts, rtol=1e-12)
    p = make_params(MatrixSignal.constant(J), VectorSignal.zero(2), 0, math.pi / 2)
    assert_allclose(kernel_eval(p, [0, 0]), np.array([[0, 1], [-1, 0]]) / (2 * math.pi ** 2), atol=1e-10)


def test_kernel_normalization_and_symbol():
    M = MatrixSignal.constant([[0.3, -1.0], [1.0, -0.2]])
    p = make_params(M, VectorSignal.zero(2), 0.0, 0.8)
    R = 8 * math.sqrt(np.linalg.eigvalsh(p.Q.matrix).max())
    n = 256
    h = 2 * R / n
    ax = -R + h * np.arange(n)
    X = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1)
    K = kernel_eval(p, X)
    total = K.sum(axis=(0, 1)) * h * h
    assert_allclose(total @ p.U_st, np.eye(2), atol=1e-6)
    # discrete Fourier transform of the samples against the analytic symbol
    phi = scalar_factor(p, X)
    xi = np.array([[0.0, 0.0], [0.5, -0.3], [1.2, 0.4]])
    for k in xi:
        ft = (phi * np.exp(-1j * (X @ k))).sum() * h * h
        assert_allclose(ft * p.U_ts, fourier_symbol(p, k), atol=1e-8)
    assert_allclose(fourier_symbol(p, [0.0, 0.0]), p.U_ts)


def test_heat_symbol():
    p = make_params(MatrixSignal.zero(3), VectorSignal.zero(3), 0, 0.5)
    xi = np.array([1.0, 2.0, -1.0])
    assert_allclose(fourier_symbol(p, xi), np.exp(-0.5 * 6) * np.eye(3), rtol=1e-13)


def test_peak_decreases_in_time():
    M = MatrixSignal.constant([[1.0, -1.0], [1.0, -1.0]])
    peaks = [peak_value(make_params(M, VectorSignal.zero(2), 0.2, t)) for t in np.linspace(0.3, 3, 10)]
    assert np.all(np.diff(peaks) < 0)


def test_gram_scaling_report():
    taus = np.logspace(-4, 1, 6)
    for M in (MatrixSignal.zero(2), MatrixSignal.rotation2d(2.0)):
        r = gram_scaling_report(M, 0.0, taus)
        assert_allclose(r["inv_sqrt"], 1.0, rtol=1e-8)
        assert_allclose(r["sqrt_det"], 1.0, rtol=1e-8)
    r = gram_scaling_report(MatrixSignal.constant(np.diag([1.0, -1.0])), 0.0, [1e-4, 1e-3])
    assert_allclose(r["inv_sqrt"], 1.0, atol=2e-3)
    assert_allclose(r["sqrt_det"], 1.0, atol=2e-3)
    with pytest.raises(ValidationError):
        gram_scaling_report(MatrixSignal.zero(2), 0.0, [0.0, 1.0])
