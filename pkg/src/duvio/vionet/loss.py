"""Pose regression loss: mean over steps of squared translation error
plus alpha times squared rotation error (both full squared 2-norms)."""

import numpy as np

from ..errors import ValidationError
from ..nn import autograd as ag


def _to_array(deltas):
    if isinstance(deltas, np.ndarray):
        return np.asarray(deltas, dtype=np.float64)
    return np.stack([d.as_array() for d in deltas])


def pose_loss(predictions, targets, alpha):
    """Scalar loss over aligned prediction/target lists (PoseDelta or (T,6))."""
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    p = _to_array(predictions)
    t = _to_array(targets)
    if p.shape != t.shape or p.ndim != 2 or p.shape[0] < 1 or p.shape[1] != 6:
        raise ValidationError(
            f"predictions {p.shape} and targets {t.shape} must both be (T, 6), T >= 1")
    err = p - t
    per_step = np.sum(err[:, :3] ** 2, axis=1) + alpha * np.sum(err[:, 3:] ** 2, axis=1)
    return float(np.mean(per_step))


def pose_loss_t(pred, target, alpha):
    """Autograd version: pred Tensor (B, T, 6), target array (B, T, 6)."""
    err = ag.sub(pred, ag.as_tensor(target))
    sq = ag.mul(err, err)
    v_term = ag.sum_(sq[:, :, 0:3], axis=2)
    phi_term = ag.sum_(sq[:, :, 3:6], axis=2)
    return ag.mean(ag.add(v_term, ag.mul(phi_term, alpha)))
