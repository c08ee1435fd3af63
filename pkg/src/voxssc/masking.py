"""Binary voxel masks: initialization, the updating head, and top-K edits."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import dense_ops as dops
from .autodiff import ParameterStore, Tape, Var
from .blocks import conv_weight
from .errors import ContractViolationError

IGNORE_LABEL = 255


@dataclass
class VoxelMask:
    """Per-voxel binary occupancy indicator."""

    values: np.ndarray  # (X, Y, Z) bool

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype != np.bool_:
            if not np.isin(v, (0, 1)).all():
                raise ContractViolationError("mask values must be exactly 0 or 1")
            v = v.astype(bool)
        self.values = v

    @property
    def count(self) -> int:
        return int(self.values.sum())

    def coords(self) -> np.ndarray:
        return np.argwhere(self.values)


def occupancy_score(logits: np.ndarray) -> np.ndarray:
    """1 - P(empty) per voxel from (X, Y, Z, classes+1) logits."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p_empty = e[..., 0] / e.sum(axis=-1)
    return 1.0 - p_empty


def init_mask(score: np.ndarray, threshold: float) -> VoxelMask:
    """Mask on wherever the occupancy score reaches the threshold (inclusive)."""
    if not 0.0 < threshold < 1.0:
        raise ContractViolationError("threshold must lie in (0, 1)")
    return VoxelMask(score >= threshold)


def mask_gt(labels: np.ndarray, ignore_label: int = IGNORE_LABEL) -> VoxelMask:
    """Ground-truth occupancy: any non-empty, non-ignored label."""
    return VoxelMask((labels != 0) & (labels != ignore_label))


class MaskHead:
    """Occupied/empty probability head over the class logits.

    conv 3x3x3 -> stride-2 average pooling -> dropout (training only) ->
    conv 3x3x3 -> nearest-neighbor upsample -> two-way softmax.
    """

    def __init__(self, store: ParameterStore, prefix: str, in_channels: int,
                 rng: np.random.Generator, mid_channels: int = 8,
                 dropout_rate: float = 0.1):
        if not 0.0 <= dropout_rate < 1.0:
            raise ContractViolationError("dropout rate must lie in [0, 1)")
        self.dropout_rate = dropout_rate
        self.w1 = store.add(f"{prefix}.conv1.w",
                            conv_weight(rng, (3, 3, 3), in_channels, mid_channels))
        self.b1 = store.add(f"{prefix}.conv1.b", np.zeros(mid_channels))
        self.w2 = store.add(f"{prefix}.conv2.w",
                            conv_weight(rng, (3, 3, 3), mid_channels, 2))
        self.b2 = store.add(f"{prefix}.conv2.b", np.zeros(2))

    def apply(self, tape: Tape, ssc_logits: Var, training: bool = False,
              rng: np.random.Generator | None = None) -> tuple[Var, Var]:
        """Return (m_o, m_e) probability fields at full resolution."""
        dims = ssc_logits.value.shape[:3]
        h = dops.conv3d(ssc_logits, self.w1.leaf(tape), self.b1.leaf(tape), (3, 3, 3))
        pads = tuple(d % 2 for d in dims)
        h = dops.pad_spatial_edge(h, pads)
        h = dops.avg_pool2(h)
        if training and self.dropout_rate > 0:
            if rng is None:
                raise ContractViolationError("training-mode dropout needs an rng")
            h = ad.dropout(h, self.dropout_rate, rng)
        h = dops.conv3d(h, self.w2.leaf(tape), self.b2.leaf(tape), (3, 3, 3))
        h = dops.upsample_nearest2(h)
        h = dops.crop_spatial(h, dims)
        probs = ad.softmax_rows(h)
        return ad.take_channel(probs, 0), ad.take_channel(probs, 1)


def mask_head_forward(ssc_logits: np.ndarray, head: MaskHead, training: bool = False,
                      rng: np.random.Generator | None = None):
    """Value-level head evaluation; returns (m_o, m_e) arrays."""
    tape = Tape()
    m_o, m_e = head.apply(tape, tape.const(ssc_logits), training, rng)
    return m_o.value, m_e.value


def _topk(scores: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores among candidates.

    Ties break toward the lexicographically smaller voxel coordinate
    (equivalently the smaller linear index), so selection is deterministic.
    """
    idx = np.flatnonzero(candidates)
    if k <= 0 or idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((idx, -scores.ravel()[idx]))
    return idx[order[:k]]


def apply_topk_update(m_prev: VoxelMask, m_o: np.ndarray, m_e: np.ndarray,
                      k: int) -> VoxelMask:
    """Add the top-k occupancy scorers among unmasked voxels and remove the
    top-k emptiness scorers among masked ones (fewer if candidates run out)."""
    if k < 0:
        raise ContractViolationError("k must be >= 0")
    flat = m_prev.values.ravel()
    adds = _topk(m_o, ~flat, k)
    rems = _topk(m_e, flat, k)
    out = flat.copy()
    out[adds] = True
    out[rems] = False
    return VoxelMask(out.reshape(m_prev.values.shape))


# ---------------------------------------------------------------------------
# run-length encoding for mask serialization
# ---------------------------------------------------------------------------

_RLE_MAGIC = b"VRLE"


def rle_encode(mask: VoxelMask) -> np.ndarray:
    """Run lengths of the flattened mask, alternating and starting with zeros."""
    flat = mask.values.ravel().astype(np.uint8)
    if flat.size == 0:
        return np.zeros(0, dtype=np.uint32)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds)
    if flat[0] == 1:  # leading zero-run of length 0 keeps parity fixed
        runs = np.concatenate([[0], runs])
    return runs.astype(np.uint32)


def rle_decode(runs: np.ndarray, dims: tuple[int, int, int]) -> VoxelMask:
    total = int(np.prod(dims))
    flat = np.zeros(total, dtype=bool)
    pos = 0
    val = False
    for r in runs:
        if val:
            flat[pos:pos + int(r)] = True
        pos += int(r)
        val = not val
    if pos != total:
        raise ContractViolationError(f"run lengths sum to {pos}, expected {total}")
    return VoxelMask(flat.reshape(dims))


def save_mask_rle(mask: VoxelMask, path: str | Path) -> None:
    runs = rle_encode(mask)
    dims = mask.values.shape
    with open(path, "wb") as fh:
        fh.write(_RLE_MAGIC)
        fh.write(struct.pack("<3II", dims[0], dims[1], dims[2], len(runs)))
        fh.write(runs.astype("<u4").tobytes())


def load_mask_rle(path: str | Path) -> VoxelMask:
    raw = Path(path).read_bytes()
    if raw[:4] != _RLE_MAGIC:
        raise ContractViolationError(f"{path} is not an RLE mask file")
    dx, dy, dz, n = struct.unpack("<3II", raw[4:20])
    runs = np.frombuffer(raw[20:20 + 4 * n], dtype="<u4")
    return rle_decode(runs, (dx, dy, dz))
