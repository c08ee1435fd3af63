"""Coarse-stage network blocks.

The anisotropic unit runs three parallel 1D convolutions (along x, y, z),
mixes them with a learned softmax-normalized modulation vector, squashes,
then applies a pointwise convolution with a residual connection.  Channel
attention reweights channels from global-average-pooled statistics through
a two-layer bottleneck and a sigmoid gate.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import dense_ops as dops
from .autodiff import ParameterStore, Tape, Var
from .grid import DenseVoxelTensor, GridShape
from .sparse import ConvKernel3D


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def conv_weight(rng: np.random.Generator, extent, cin: int, cout: int) -> np.ndarray:
    kx, ky, kz = extent
    taps = kx * ky * kz
    return glorot_uniform(rng, (kx, ky, kz, cin, cout), taps * cin, taps * cout)


class AICModule:
    """One anisotropic unit: directional convs + learned mix + pointwise."""

    def __init__(self, store: ParameterStore, prefix: str, channels: int,
                 rng: np.random.Generator):
        self.extents = ((3, 1, 1), (1, 3, 1), (1, 1, 3))
        self.branches = []
        for name, extent in zip("xyz", self.extents):
            w = store.add(f"{prefix}.dir_{name}.w", conv_weight(rng, extent, channels, channels))
            b = store.add(f"{prefix}.dir_{name}.b", np.zeros(channels))
            self.branches.append((w, b))
        self.mix = store.add(f"{prefix}.mix", np.zeros(3))
        self.pw_w = store.add(f"{prefix}.pw.w",
                              conv_weight(rng, (1, 1, 1), channels, channels))
        self.pw_b = store.add(f"{prefix}.pw.b", np.zeros(channels))

    def apply(self, tape: Tape, x: Var) -> Var:
        alpha = ad.softmax_rows(self.mix.leaf(tape))
        combined = None
        for i, ((w, b), extent) in enumerate(zip(self.branches, self.extents)):
            branch = dops.conv3d(x, w.leaf(tape), b.leaf(tape), extent)
            coef = ad.reshape(ad.gather_rows(alpha, np.array([i])), ())
            term = ad.mul(branch, coef)
            combined = term if combined is None else combined + term
        squashed = ad.tanh(combined)
        out = dops.conv3d(squashed, self.pw_w.leaf(tape), self.pw_b.leaf(tape), (1, 1, 1))
        return x + out


class AICBlock:
    """Stack of four anisotropic units."""

    def __init__(self, store: ParameterStore, prefix: str, channels: int,
                 rng: np.random.Generator, num_modules: int = 4):
        self.modules = [
            AICModule(store, f"{prefix}.m{i}", channels, rng) for i in range(num_modules)
        ]

    def apply(self, tape: Tape, x: Var) -> Var:
        for m in self.modules:
            x = m.apply(tape, x)
        return x


class ChannelAttention:
    """Per-channel sigmoid gates from global-average-pooled statistics."""

    def __init__(self, store: ParameterStore, prefix: str, channels: int,
                 rng: np.random.Generator, reduction: int = 4):
        mid = max(1, channels // reduction)
        self.w1 = store.add(f"{prefix}.w1", glorot_uniform(rng, (channels, mid), channels, mid))
        self.b1 = store.add(f"{prefix}.b1", np.zeros(mid))
        self.w2 = store.add(f"{prefix}.w2", glorot_uniform(rng, (mid, channels), mid, channels))
        self.b2 = store.add(f"{prefix}.b2", np.zeros(channels))

    def gates(self, tape: Tape, x: Var) -> Var:
        pooled = ad.vmean(x, axis=(0, 1, 2))  # (C,)
        row = ad.reshape(pooled, (1, -1))
        hidden = ad.tanh(ad.matmul(row, self.w1.leaf(tape)) + self.b1.leaf(tape))
        return ad.sigmoid(ad.matmul(hidden, self.w2.leaf(tape)) + self.b2.leaf(tape))

    def apply(self, tape: Tape, x: Var) -> Var:
        g = self.gates(tape, x)
        return ad.mul(x, ad.reshape(g, (1, 1, 1, -1)))


class Deconv:
    """Stride-2 transposed convolution block (doubles spatial extents)."""

    def __init__(self, store: ParameterStore, prefix: str, cin: int, cout: int,
                 rng: np.random.Generator):
        self.w = store.add(f"{prefix}.w", conv_weight(rng, (3, 3, 3), cin, cout))
        self.b = store.add(f"{prefix}.b", np.zeros(cout))

    def apply(self, tape: Tape, x: Var) -> Var:
        return dops.deconv3d_up2(x, self.w.leaf(tape), self.b.leaf(tape))


class SSCHead:
    """Pointwise projection of voxel features onto class logits.

    Channel 0 is the empty class; its bias starts positive so that fresh
    models predict mostly free space, matching the occupancy prior.
    """

    def __init__(self, store: ParameterStore, prefix: str, channels: int,
                 num_classes: int, rng: np.random.Generator, empty_bias: float = 1.5):
        cout = num_classes + 1
        self.w = store.add(f"{prefix}.w", conv_weight(rng, (1, 1, 1), channels, cout))
        bias = np.zeros(cout)
        bias[0] = empty_bias
        self.b = store.add(f"{prefix}.b", bias)

    def apply(self, tape: Tape, x: Var) -> Var:
        return dops.conv3d(x, self.w.leaf(tape), self.b.leaf(tape), (1, 1, 1))


# ---------------------------------------------------------------------------
# value-level wrappers over the tape blocks
# ---------------------------------------------------------------------------


def _run_dense(block_apply, x: DenseVoxelTensor) -> DenseVoxelTensor:
    tape = Tape()
    out = block_apply(tape, tape.const(x.values))
    shape = GridShape(*out.value.shape)
    return DenseVoxelTensor(shape, out.value)


def aic_block(x: DenseVoxelTensor, params: AICBlock) -> DenseVoxelTensor:
    return _run_dense(params.apply, x)


def channel_attention(x: DenseVoxelTensor, params: ChannelAttention) -> DenseVoxelTensor:
    return _run_dense(params.apply, x)


def deconv3d_up2(x: DenseVoxelTensor, k: ConvKernel3D) -> DenseVoxelTensor:
    tape = Tape()
    out = dops.deconv3d_up2(tape.const(x.values), tape.const(k.weights), tape.const(k.bias))
    return DenseVoxelTensor(GridShape(*out.value.shape), out.value)


def ssc_head(x: DenseVoxelTensor, params: SSCHead) -> DenseVoxelTensor:
    return _run_dense(params.apply, x)
