"""Shaped network primitives with registered backward rules.

Convolution uses cross-correlation semantics (no kernel flip) in both the
forward pass and the backward rules. All math is float64.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, accumulate_grad, make_op

__all__ = [
    "affine",
    "conv2d",
    "conv1d",
    "maxpool2d",
    "global_avg_pool",
    "softmax_xent",
    "conv2d_output_size",
]


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out[n,j] = sum_i x[n,i] * weight[i,j] + bias[j]."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or bias.data.ndim != 1:
        raise ValueError(
            f"affine expects 2-d input, 2-d weight, 1-d bias; got "
            f"{x.data.shape}, {weight.data.shape}, {bias.data.shape}"
        )
    if x.data.shape[1] != weight.data.shape[0] or weight.data.shape[1] != bias.data.shape[0]:
        raise ValueError(
            f"affine dimension mismatch: input {x.data.shape} x weight "
            f"{weight.data.shape} + bias {bias.data.shape}"
        )
    out_data = x.data @ weight.data + bias.data

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, go @ weight.data.T)
        accumulate_grad(weight, x.data.T @ go)
        accumulate_grad(bias, go.sum(axis=0))

    return make_op(out_data, (x, weight, bias), bw)


def conv2d_output_size(extent: int, k: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - k) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Gather (N, C*kh*kw, H_out*W_out) patch columns from the padded input.

    Copies one kernel offset at a time: both sides of each copy then run in
    whole output rows, which is several times faster than flattening a
    strided window view.
    """
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = np.empty((n, c, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * kh * kw, ho * wo)


def _col2im(cols: np.ndarray, x_shape: tuple, kh: int, kw: int, stride: int) -> np.ndarray:
    """Scatter-add patch columns back onto the padded input grid."""
    n, c, hp, wp = x_shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros(x_shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Strided 2-d cross-correlation of N×C×H×W input with C_out×C×k×k kernel."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input and kernel, got {x.data.shape}, {kernel.data.shape}")
    n, c, h, w = x.data.shape
    c_out, c_k, kh, kw = kernel.data.shape
    if c_k != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {c_k}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d kernel extents must be odd, got {kh}x{kw}")
    if bias.data.shape != (c_out,):
        raise ValueError(f"conv2d bias must have shape ({c_out},), got {bias.data.shape}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} larger than padded input "
            f"{h + 2 * padding}x{w + 2 * padding}"
        )

    if padding > 0:
        xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
        xp[:, :, padding:padding + h, padding:padding + w] = x.data
    else:
        xp = x.data
    ho = conv2d_output_size(h, kh, stride, padding)
    wo = conv2d_output_size(w, kw, stride, padding)

    wmat = kernel.data.reshape(c_out, -1)
    if kh == 1 and kw == 1 and stride == 1:
        cols = xp.reshape(n, c, ho * wo)  # 1x1 fast path: no gather
    else:
        cols = _im2col(xp, kh, kw, stride)  # (N, C*kh*kw, Ho*Wo)
    out_data = np.matmul(wmat, cols).reshape(n, c_out, ho, wo) + bias.data[None, :, None, None]

    def bw(go: np.ndarray) -> None:
        gof = go.reshape(n, c_out, ho * wo)
        accumulate_grad(bias, go.sum(axis=(0, 2, 3)))
        gw = np.matmul(gof, cols.transpose(0, 2, 1)).sum(axis=0)
        accumulate_grad(kernel, gw.reshape(kernel.data.shape))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, gof)
            gxp = _col2im(gcols, xp.shape, kh, kw, stride)
            if padding > 0:
                gxp = gxp[:, :, padding:padding + h, padding:padding + w]
            accumulate_grad(x, gxp)

    return make_op(out_data, (x, kernel, bias), bw)


def conv1d(x: Tensor, kernel: Tensor, padding: int | None = None) -> Tensor:
    """Length-preserving 1-d cross-correlation of each row of N×L with a shared
    k-vector kernel, zero padded; padding defaults to (k-1)/2."""
    if x.data.ndim != 2 or kernel.data.ndim != 1:
        raise ValueError(f"conv1d expects 2-d input and 1-d kernel, got {x.data.shape}, {kernel.data.shape}")
    k = kernel.data.shape[0]
    if k % 2 == 0:
        raise ValueError(f"conv1d kernel size must be odd, got {k}")
    if padding is None:
        padding = (k - 1) // 2
    if padding != (k - 1) // 2:
        raise ValueError(f"conv1d requires padding {(k - 1) // 2} for kernel size {k}, got {padding}")
    n, length = x.data.shape
    xp = np.pad(x.data, ((0, 0), (padding, padding)))
    out_data = np.zeros_like(x.data)
    for j in range(k):
        out_data += kernel.data[j] * xp[:, j:j + length]

    def bw(go: np.ndarray) -> None:
        gk = np.array([np.sum(go * xp[:, j:j + length]) for j in range(k)])
        accumulate_grad(kernel, gk)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, j:j + length] += kernel.data[j] * go
            accumulate_grad(x, gxp[:, padding:padding + length])

    return make_op(out_data, (x, kernel), bw)


def maxpool2d(x: Tensor, k: int, stride: int, padding: int = 0) -> Tensor:
    """Windowed maximum; padded positions count as -inf. The gradient routes to
    the first maximal element of each window in row-major order."""
    if x.data.ndim != 4:
        raise ValueError(f"maxpool2d expects 4-d input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ValueError(f"maxpool2d window {k} larger than padded input")
    if padding > 0:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                    constant_values=-np.inf)
    else:
        xp = x.data
    hp, wp = xp.shape[2], xp.shape[3]
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    sn, sc, sh, sw = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, ho, wo, k, k),
        strides=(sn, sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    ).reshape(n, c, ho, wo, k * k)
    arg = np.argmax(windows, axis=-1)  # first max in row-major window order
    out_data = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    def bw(go: np.ndarray) -> None:
        gxp = np.zeros((n, c, hp, wp))
        if stride >= k:
            # Non-overlapping windows: scatter with plain strided adds.
            for i in range(k):
                for j in range(k):
                    sel = arg == i * k + j
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.where(sel, go, 0.0)
        else:
            gi, gj = np.divmod(arg, k)
            oh = np.arange(ho)[None, None, :, None]
            ow = np.arange(wo)[None, None, None, :]
            flat = ((oh * stride + gi) * wp + (ow * stride + gj)).reshape(n * c, ho * wo)
            gf = gxp.reshape(n * c, hp * wp)
            np.add.at(gf, (np.arange(n * c)[:, None], flat), go.reshape(n * c, ho * wo))
        if padding > 0:
            gxp = gxp[:, :, padding:padding + h, padding:padding + w]
        accumulate_grad(x, gxp)

    return make_op(out_data, (x,), bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean: N×C×H×W -> N×C."""
    if x.data.ndim != 4:
        raise ValueError(f"global_avg_pool expects 4-d input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    out_data = x.data.mean(axis=(2, 3))

    def bw(go: np.ndarray) -> None:
        accumulate_grad(x, np.broadcast_to(go[:, :, None, None] / (h * w), x.data.shape).copy())

    return make_op(out_data, (x,), bw)


def softmax_xent(logits: Tensor, true_class: np.ndarray) -> Tensor:
    """Summed cross-entropy of softmax(logits) against integer class targets,
    computed in log-sum-exp form; gradient is softmax minus one-hot."""
    if logits.data.ndim != 2:
        raise ValueError(f"softmax_xent expects N x C logits, got {logits.data.shape}")
    n, c = logits.data.shape
    cls = np.asarray(true_class, dtype=np.int64)
    if cls.shape != (n,):
        raise ValueError(f"softmax_xent expects {n} class indices, got shape {cls.shape}")
    if np.any(cls < 0) or np.any(cls >= c):
        bad = int(np.argmax((cls < 0) | (cls >= c)))
        raise ValueError(f"class index {cls[bad]} out of range [0, {c}) at sample {bad}")
    m = logits.data.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits.data - m).sum(axis=1))
    out_data = np.asarray(np.sum(lse - logits.data[np.arange(n), cls]))

    def bw(go: np.ndarray) -> None:
        soft = np.exp(logits.data - lse[:, None])
        soft[np.arange(n), cls] -= 1.0
        accumulate_grad(logits, float(go) * soft)

    return make_op(out_data, (logits,), bw)
