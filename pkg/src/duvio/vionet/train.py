"""Training loop for the pose network.

Training items are contiguous subsequences of ``seq_len`` windows; the
LSTM state is zero-initialized per subsequence and the loss is the mean
per-step pose error.  A frozen dehazer, when given, enhances every frame
before the visual encoder (inference only, never updated).
"""

import numpy as np

from ..dataio import SampleWindow
from ..errors import ValidationError
from ..nn.optim import Adam
from .loss import pose_loss_t
from .model import VioNet, windows_to_arrays


def _as_sequences(windows):
    """Normalize input to a list of per-sequence window lists."""
    if not windows:
        return []
    if isinstance(windows[0], SampleWindow):
        return [list(windows)]
    return [list(seq) for seq in windows]


def _chunks(seq_windows, seq_len):
    """Non-overlapping subsequence chunks; a trailing remainder is kept."""
    out = []
    for seq in seq_windows:
        for start in range(0, len(seq), seq_len):
            chunk = seq[start:start + seq_len]
            if chunk:
                out.append(chunk)
    return out


def _prepare(chunks, cfg, dehazer):
    """Group equal-length chunks into array triples, preserving order."""
    arrays = [windows_to_arrays(c, cfg, dehazer=dehazer) for c in chunks]
    groups = {}
    for frames, imu, targets in arrays:
        groups.setdefault(frames.shape[0], []).append((frames, imu, targets))
    return groups


def _epoch_batches(groups, batch, rng):
    """Deterministically shuffled batches of same-length chunks."""
    batches = []
    for length in sorted(groups):
        items = groups[length]
        order = rng.permutation(len(items))
        for start in range(0, len(items), batch):
            sel = order[start:start + batch]
            frames = np.stack([items[i][0] for i in sel])
            imu = np.stack([items[i][1] for i in sel])
            targets = np.stack([items[i][2] for i in sel])
            batches.append((frames, imu, targets))
    return batches


def train_vio(train_windows, cfg, val_windows=None, dehazer=None, model=None):
    """Train a VioNet; returns (model, per-epoch loss log).

    ``train_windows``/``val_windows`` are either flat SampleWindow lists
    (one sequence) or lists of per-sequence lists.  ``dehazer`` is an
    optional frozen Generator applied to frames before the visual
    encoder.
    """
    seqs = _as_sequences(train_windows)
    if not seqs or not any(seqs):
        raise ValidationError("train_vio needs a nonempty training window set")
    model = model or VioNet(cfg)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr, betas=cfg.adam_betas,
               grad_clip=cfg.grad_clip or None)

    train_groups = _prepare(_chunks(seqs, cfg.seq_len), cfg, dehazer)
    val_groups = None
    if val_windows:
        val_groups = _prepare(_chunks(_as_sequences(val_windows), cfg.seq_len),
                              cfg, dehazer)

    log = []
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr * (cfg.lr_decay ** epoch)
        total, count = 0.0, 0
        for frames, imu, targets in _epoch_batches(train_groups, cfg.batch, rng):
            preds, _ = model.forward_windows(frames, imu)
            loss = pose_loss_t(preds, targets, cfg.alpha)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * frames.shape[0]
            count += frames.shape[0]
        entry = {"epoch": epoch, "train_loss": total / count}
        if val_groups is not None:
            entry["val_loss"] = evaluate_loss(model, val_groups, cfg)
        log.append(entry)
    return model, log


def evaluate_loss(model, groups, cfg):
    total, count = 0.0, 0
    for items in groups.values():
        for frames, imu, targets in items:
            preds, _ = model.forward_windows(frames[None], imu[None])
            loss = pose_loss_t(preds, targets[None], cfg.alpha)
            total += loss.item()
            count += 1
    return total / max(count, 1)
