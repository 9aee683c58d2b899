import numpy as np
import pytest

from src.losses.regression_loss import conf_loss, scale_loss, total_loss
from src.utils.errors import EmptyInputError

STEP = 1e-6
REL_TOL = 1e-5
HINGE_MARGIN = 1e-4


def _rel_error(analytic, numeric):
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / scale


def _numeric_grad(fn, x):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        plus = x.copy()
        minus = x.copy()
        plus[idx] += STEP
        minus[idx] -= STEP
        grad[idx] = (fn(plus) - fn(minus)) / (2 * STEP)
    return grad


def _s(points):
    return float(np.mean(np.linalg.norm(points, axis=-1)))


def test_conf_loss_examples():
    gt = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]])
    ones = np.ones(2)
    assert conf_loss(gt, ones, gt, alpha=0.0)[0] == 0.0
    assert conf_loss(gt, ones, gt, alpha=1.0)[0] == 0.0

    value, _, _, residuals = conf_loss([[1.0, 0.0, 0.0]], [2.0], [[1.1, 0.0, 0.0]], alpha=1.0, normalize=False)
    assert value == pytest.approx(2 * 0.1 - np.log(2.0), abs=1e-6)
    assert value == pytest.approx(-0.4931, abs=1e-4)
    assert residuals == pytest.approx([0.1], abs=1e-12)


def test_scale_loss_examples(rng):
    gt = rng.normal(size=(20, 3))
    gt /= np.linalg.norm(gt, axis=1, keepdims=True)
    assert scale_loss(gt, gt)[0] == 0.0
    assert scale_loss(0.5 * gt, gt)[0] == 0.0
    assert scale_loss(2.0 * gt, gt)[0] == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(scale_loss(0.5 * gt, gt)[1], np.zeros_like(gt))


def test_empty_input_errors():
    points = np.ones((3, 3))
    with pytest.raises(EmptyInputError):
        conf_loss(points, np.ones(3), points, valid=np.zeros(3, dtype=bool))
    with pytest.raises(EmptyInputError):
        scale_loss(points, points, valid=np.zeros(3, dtype=bool))


def test_total_is_sum_of_parts(rng):
    pred = rng.normal(size=(4, 5, 3))
    gt = rng.normal(size=(4, 5, 3))
    conf = rng.uniform(1.0, 3.0, size=(4, 5))
    report = total_loss(pred, conf, gt, alpha=0.2, normalize=True)
    assert report.total == report.conf_loss + report.scale_loss

    # 独立重算两部分
    zp, zg = _s(pred.reshape(-1, 3)), _s(gt.reshape(-1, 3))
    e = np.linalg.norm(pred / zp - gt / zg, axis=-1)
    assert report.conf_loss == pytest.approx(np.mean(conf * e - 0.2 * np.log(conf)), abs=1e-12)
    assert report.scale_loss == pytest.approx(max(0.0, zp - zg), abs=1e-12)

    zero = total_loss(gt, np.ones((4, 5)), gt, alpha=0.0)
    assert zero.total == 0.0


def test_gradients_match_finite_differences(rng):
    checked = 0
    while checked < 120:
        n = int(rng.integers(2, 33))
        pred = rng.normal(size=(n, 3))
        gt = pred * rng.uniform(0.6, 1.4) + rng.normal(scale=0.3, size=(n, 3))
        conf = rng.uniform(1.0, 3.0, size=n)
        valid = rng.uniform(size=n) < 0.85
        valid[0] = True
        alpha = float(rng.uniform(0.0, 1.0))
        normalize = bool(checked % 2 == 0)

        if abs(_s(pred[valid]) - _s(gt[valid])) < HINGE_MARGIN:
            continue

        report = total_loss(pred, conf, gt, valid, alpha, normalize)
        numeric_points = _numeric_grad(lambda x: total_loss(x, conf, gt, valid, alpha, normalize).total, pred)
        numeric_conf = _numeric_grad(lambda c: total_loss(pred, c, gt, valid, alpha, normalize).total, conf)

        assert _rel_error(report.grad_points, numeric_points) <= REL_TOL
        assert _rel_error(report.grad_confidence, numeric_conf) <= REL_TOL
        assert np.all(report.grad_points[~valid] == 0.0)
        checked += 1


def test_conf_loss_joint_scale_invariance(rng):
    for _ in range(20):
        pred = rng.normal(size=(16, 3))
        gt = rng.normal(size=(16, 3))
        conf = rng.uniform(1.0, 2.0, size=16)
        base = conf_loss(pred, conf, gt, alpha=0.2, normalize=True)[0]
        for lam in (0.1, 2.0, 37.5):
            scaled = conf_loss(pred * lam, conf, gt * lam, alpha=0.2, normalize=True)[0]
            assert abs(scaled - base) <= 1e-9


def test_scale_loss_is_nonnegative(rng):
    for _ in range(100):
        pred = rng.normal(scale=rng.uniform(0.1, 3.0), size=(10, 3))
        gt = rng.normal(size=(10, 3))
        value, _ = scale_loss(pred, gt)
        assert value >= 0.0
        assert (value == 0.0) == (_s(pred) <= _s(gt))
