"""Visibility-enhancement GAN: encoder-decoder generator + conv discriminator.

The generator is a U-shaped encoder-decoder with optional skip
connections; the per-stage block topology is switchable between five
backbone families (dense connectivity, residual, attention, depthwise
and plain conv stacks) so they can be ablated against each other under
one contract: output raster shape equals input raster shape, values in
[0, 1] (sigmoid head).
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError
from ..nn import autograd as ag
from ..nn.layers import (BatchNorm2d, Conv2d, ConvTranspose2d, DepthwiseConv2d,
                         Linear, Module)

BACKBONES = ("dense", "resnet", "vit", "mobile", "vgg")
_SLOPE = 0.2


@dataclass(frozen=True)
class GeneratorConfig:
    backbone: str = "dense"
    base_channels: int = 8
    depth: int = 2              # encoder stages (each halves H and W)
    skip_connections: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValidationError(f"backbone {self.backbone!r} not in {BACKBONES}")
        if self.depth < 2:
            raise ValidationError(f"depth must be >= 2, got {self.depth}")
        if self.base_channels < 8:
            raise ValidationError(f"base_channels must be >= 8, got {self.base_channels}")

    def as_dict(self):
        return {"backbone": self.backbone, "base_channels": self.base_channels,
                "depth": self.depth, "skip_connections": self.skip_connections,
                "seed": self.seed}


@dataclass(frozen=True)
class DiscriminatorConfig:
    layers: int = 3
    base_channels: int = 16
    norm: bool = True           # batch normalization between convs
    slope: float = 0.2          # LeakyReLU negative slope
    seed: int = 0

    def __post_init__(self):
        if self.layers < 3:
            raise ValidationError(f"layers must be >= 3, got {self.layers}")

    def as_dict(self):
        return {"layers": self.layers, "base_channels": self.base_channels,
                "norm": self.norm, "slope": self.slope, "seed": self.seed}


def _act(x):
    return ag.leaky_relu(x, _SLOPE)


class DenseBlock(Module):
    """Two growth convs with concatenated inputs, then a 1x1 transition."""

    def __init__(self, ch, rng):
        super().__init__()
        g = max(4, ch // 2)
        self.c1 = Conv2d(ch, g, 3, rng=rng, slope=_SLOPE)
        self.c2 = Conv2d(ch + g, g, 3, rng=rng, slope=_SLOPE)
        self.fuse = Conv2d(ch + 2 * g, ch, 1, rng=rng, slope=_SLOPE)

    def forward(self, x):
        y1 = _act(self.c1(x))
        y2 = _act(self.c2(ag.concat([x, y1], axis=1)))
        return _act(self.fuse(ag.concat([x, y1, y2], axis=1)))


class ResBlock(Module):
    def __init__(self, ch, rng):
        super().__init__()
        self.c1 = Conv2d(ch, ch, 3, rng=rng, slope=_SLOPE)
        self.c2 = Conv2d(ch, ch, 3, rng=rng, slope=_SLOPE)

    def forward(self, x):
        y = self.c2(_act(self.c1(x)))
        return _act(ag.add(x, y))


class VggBlock(Module):
    def __init__(self, ch, rng):
        super().__init__()
        self.c1 = Conv2d(ch, ch, 3, rng=rng, slope=_SLOPE)
        self.c2 = Conv2d(ch, ch, 3, rng=rng, slope=_SLOPE)

    def forward(self, x):
        return _act(self.c2(_act(self.c1(x))))


class MobileBlock(Module):
    """Inverted bottleneck: 1x1 expand, depthwise 3x3, 1x1 project, residual."""

    def __init__(self, ch, rng):
        super().__init__()
        self.expand = Conv2d(ch, 2 * ch, 1, rng=rng, slope=_SLOPE)
        self.dw = DepthwiseConv2d(2 * ch, 3, rng=rng, slope=_SLOPE)
        self.project = Conv2d(2 * ch, ch, 1, rng=rng, slope=_SLOPE)

    def forward(self, x):
        y = self.project(_act(self.dw(_act(self.expand(x)))))
        return ag.add(x, y)


class AttentionBlock(Module):
    """Single-head self-attention over flattened spatial tokens + MLP."""

    def __init__(self, ch, rng):
        super().__init__()
        self.q = Linear(ch, ch, rng=rng)
        self.k = Linear(ch, ch, rng=rng)
        self.v = Linear(ch, ch, rng=rng)
        self.proj = Linear(ch, ch, rng=rng)
        self.m1 = Linear(ch, 2 * ch, rng=rng)
        self.m2 = Linear(2 * ch, ch, rng=rng)
        self.ch = ch

    def forward(self, x):
        b, c, h, w = x.shape
        tokens = ag.swapaxes(ag.reshape(x, (b, c, h * w)), 1, 2)  # (B, L, C)
        q, k, v = self.q(tokens), self.k(tokens), self.v(tokens)
        attn = ag.softmax(ag.mul(ag.matmul(q, ag.swapaxes(k, 1, 2)),
                                 1.0 / np.sqrt(self.ch)), axis=-1)
        y = ag.add(tokens, self.proj(ag.matmul(attn, v)))
        y = ag.add(y, self.m2(_act(self.m1(y))))
        return ag.reshape(ag.swapaxes(y, 1, 2), (b, c, h, w))


_BLOCKS = {"dense": DenseBlock, "resnet": ResBlock, "vgg": VggBlock,
           "mobile": MobileBlock, "vit": AttentionBlock}


class Generator(Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(config.seed)
        block = _BLOCKS[config.backbone]
        base, depth = config.base_channels, config.depth
        self.stem = Conv2d(1, base, 3, rng=rng, slope=_SLOPE)
        self.enc_blocks, self.downs = [], []
        ch = base
        for _ in range(depth):
            self.enc_blocks.append(block(ch, rng))
            self.downs.append(Conv2d(ch, 2 * ch, 3, stride=2, rng=rng, slope=_SLOPE))
            ch *= 2
        self.bottleneck = block(ch, rng)
        self.ups, self.merges = [], []
        for _ in range(depth):
            self.ups.append(ConvTranspose2d(ch, ch // 2, 4, stride=2, pad=1,
                                            rng=rng, slope=_SLOPE))
            in_ch = ch if config.skip_connections else ch // 2
            self.merges.append(Conv2d(in_ch, ch // 2, 3, rng=rng, slope=_SLOPE))
            ch //= 2
        self.head = Conv2d(base, 1, 3, rng=rng, slope=_SLOPE)

    def check_shape(self, h, w):
        m = 2 ** self.config.depth
        if h % m or w % m:
            raise ShapeError((f"multiple of {m}", f"multiple of {m}"), (h, w),
                             what="generator input")

    def forward(self, x):
        b, c, h, w = x.shape
        self.check_shape(h, w)
        y = _act(self.stem(x))
        skips = []
        for blk, down in zip(self.enc_blocks, self.downs):
            y = blk(y)
            skips.append(y)
            y = _act(down(y))
        y = self.bottleneck(y)
        for up, merge, skip in zip(self.ups, self.merges, reversed(skips)):
            y = _act(up(y))
            if self.config.skip_connections:
                y = ag.concat([y, skip], axis=1)
            y = _act(merge(y))
        return ag.sigmoid(self.head(y))

    def enhance(self, raster):
        """Inference on a single (H, W) raster in [0, 1]."""
        x = ag.Tensor(np.asarray(raster, dtype=np.float64)[None, None])
        return self.forward(x).data[0, 0]


class Discriminator(Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(config.seed + 1)
        ch_in, ch = 1, config.base_channels
        self.convs, self.norms = [], []
        for i in range(config.layers):
            self.convs.append(Conv2d(ch_in, ch, 3, stride=2, rng=rng,
                                     slope=config.slope))
            self.norms.append(BatchNorm2d(ch) if (config.norm and i > 0) else None)
            ch_in, ch = ch, min(2 * ch, 8 * config.base_channels)
        self.head = Conv2d(ch_in, 1, 3, rng=rng, slope=config.slope)

    def logits(self, x):
        y = x
        for conv, norm in zip(self.convs, self.norms):
            y = conv(y)
            if norm is not None:
                y = norm(y)
            y = ag.leaky_relu(y, self.config.slope)
        y = self.head(y)
        return ag.mean(y, axis=(2, 3))  # (B, 1) global average pooled logit

    def forward(self, x):
        return ag.sigmoid(self.logits(x))

    def probability(self, raster):
        """Scalar real-image probability for a single (H, W) raster."""
        x = ag.Tensor(np.asarray(raster, dtype=np.float64)[None, None])
        return float(self.forward(x).data[0, 0])


def generate(raster, config, weights):
    """Run the generator described by (config, weights) on one raster."""
    model = Generator(config)
    model.load_state_dict(weights)
    model.eval()
    return model.enhance(raster)


def discriminate(raster, config, weights):
    """Probability in (0, 1) that the raster is a real (clean) image."""
    model = Discriminator(config)
    model.load_state_dict(weights)
    model.eval()
    return model.probability(raster)
