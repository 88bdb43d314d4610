"""Adversarial training of the visibility-enhancement generator.

Non-saturating GAN loss plus a weighted L1 reconstruction term; the
discriminator sees single images (no conditioning).  Everything is
seeded, so a fixed seed gives a bit-reproducible loss curve.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..nn import autograd as ag
from ..nn.optim import Adam
from .metrics import mse_255, psnr_from_mse
from .models import Discriminator, Generator


@dataclass(frozen=True)
class DehazeTrainConfig:
    epochs: int = 50
    data_fraction: float = 0.8   # share of pairs used for fitting; rest is val
    batch: int = 4
    lr: float = 2e-4
    lr_decay: float = 1.0        # per-epoch multiplier on the learning rate
    adam_betas: tuple = (0.5, 0.999)
    recon_weight: float = 100.0  # L1 weight against the adversarial term
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValidationError(f"data_fraction must be in (0,1], got {self.data_fraction}")

    def as_dict(self):
        return {"epochs": self.epochs, "data_fraction": self.data_fraction,
                "batch": self.batch, "lr": self.lr, "lr_decay": self.lr_decay,
                "adam_betas": list(self.adam_betas),
                "recon_weight": self.recon_weight, "seed": self.seed}


def _stack(pairs, idx):
    hazy = np.stack([pairs[i][0] for i in idx])[:, None]
    clean = np.stack([pairs[i][1] for i in idx])[:, None]
    return ag.Tensor(hazy), ag.Tensor(clean)


def train_dehazer(pairs, gen_cfg, disc_cfg, train_cfg=None):
    """Train generator+discriminator on (hazy, clean) raster pairs.

    Returns ``(state, log)`` where state maps ``gen.*`` / ``disc.*`` tensor
    names to arrays and log holds one dict per epoch: generator loss
    (total / adversarial / reconstruction), discriminator loss, and
    validation PSNR of the enhanced output.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("train_dehazer needs at least one (hazy, clean) pair")
    cfg = train_cfg or DehazeTrainConfig()
    rng = np.random.default_rng(cfg.seed)

    gen = Generator(gen_cfg)
    disc = Discriminator(disc_cfg)
    opt_g = Adam(gen.parameters(), lr=cfg.lr, betas=cfg.adam_betas)
    opt_d = Adam(disc.parameters(), lr=cfg.lr, betas=cfg.adam_betas)

    n_fit = max(1, int(round(len(pairs) * cfg.data_fraction)))
    fit_idx = np.arange(n_fit)
    val_idx = np.arange(n_fit, len(pairs))
    if val_idx.size == 0:
        val_idx = fit_idx

    log = []
    for epoch in range(cfg.epochs):
        opt_g.lr = opt_d.lr = cfg.lr * (cfg.lr_decay ** epoch)
        order = rng.permutation(fit_idx)
        g_total = g_adv = g_rec = d_total = 0.0
        n_batches = 0
        for start in range(0, order.size, cfg.batch):
            idx = order[start:start + cfg.batch]
            hazy, clean = _stack(pairs, idx)

            gen.train()
            disc.train()
            fake = gen(hazy)

            # discriminator: real up, detached fake down
            real_logit = disc.logits(clean)
            fake_logit = disc.logits(ag.Tensor(fake.data))
            loss_d = ag.add(ag.mean(ag.softplus(ag.mul(real_logit, -1.0))),
                            ag.mean(ag.softplus(fake_logit)))
            opt_d.zero_grad()
            opt_g.zero_grad()
            loss_d.backward()
            opt_d.step()

            # generator: non-saturating adversarial + weighted L1
            adv_logit = disc.logits(fake)
            loss_adv = ag.mean(ag.softplus(ag.mul(adv_logit, -1.0)))
            loss_rec = ag.mean(ag.absolute(ag.sub(fake, clean)))
            loss_g = ag.add(loss_adv, ag.mul(loss_rec, cfg.recon_weight))
            opt_d.zero_grad()
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            g_total += loss_g.item()
            g_adv += loss_adv.item()
            g_rec += loss_rec.item()
            d_total += loss_d.item()
            n_batches += 1

        gen.eval()
        val_psnr = float(np.mean([
            min(psnr_from_mse(mse_255(pairs[i][1], gen.enhance(pairs[i][0]))), 99.0)
            for i in val_idx]))
        log.append({"epoch": epoch,
                    "gen_loss": g_total / n_batches,
                    "gen_adv": g_adv / n_batches,
                    "gen_recon": g_rec / n_batches,
                    "disc_loss": d_total / n_batches,
                    "val_psnr": val_psnr})

    state = {f"gen.{k}": v for k, v in gen.state_dict().items()}
    state.update({f"disc.{k}": v for k, v in disc.state_dict().items()})
    return state, log


def split_state(state):
    """Split a combined dehazer state into (generator, discriminator) dicts."""
    gen = {k[4:]: v for k, v in state.items() if k.startswith("gen.")}
    disc = {k[5:]: v for k, v in state.items() if k.startswith("disc.")}
    return gen, disc
