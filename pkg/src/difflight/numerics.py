"""Software reference kernels for every computation the accelerator maps.

These are the functional ground truth that compiled schedules are replayed
against, and double as a toy-scale diffusion engine. Tensors are plain
float64 ``numpy.ndarray`` values; feature maps are (C, H, W) row-major,
attention operates on (seq, d_model) matrices.

Conventions:
  * conv kernels are (C_out, C_in, kh, kw); transposed-conv kernels are
    (C_in, C_out, kh, kw), matching the gradient-of-conv definition.
  * noise draws are passed in by the caller, never generated here, so all
    operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DomainError


def _as_tensor(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains non-finite values")
    return arr


# --------------------------------------------------------------------------
# diffusion steps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionParams:
    """Noise schedules of a diffusion process over T timesteps."""

    betas: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self) -> None:
        betas = _as_tensor(self.betas)
        sigmas = _as_tensor(self.sigmas)
        if betas.ndim != 1 or sigmas.shape != betas.shape:
            raise DomainError("beta and sigma schedules must be 1-D with equal length")
        if not np.all((betas > 0) & (betas < 1)):
            raise DomainError("every beta must lie in (0, 1)")
        if not np.all(sigmas >= 0):
            raise DomainError("every sigma must be >= 0")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def timesteps(self) -> int:
        return int(self.betas.shape[0])


def forward_diffusion_step(x_prev: np.ndarray, beta_t: float, eps: np.ndarray) -> np.ndarray:
    """One noising step: sqrt(1-beta)*x_prev + sqrt(beta)*eps."""
    x_prev = _as_tensor(x_prev)
    eps = _as_tensor(eps)
    if x_prev.shape != eps.shape:
        raise DomainError(f"shape mismatch: x_prev {x_prev.shape} vs eps {eps.shape}")
    if not 0.0 < beta_t < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta_t}")
    return math.sqrt(1.0 - beta_t) * x_prev + math.sqrt(beta_t) * eps


def reverse_diffusion_step(x_t: np.ndarray, mu: np.ndarray, sigma_t: float, z: np.ndarray) -> np.ndarray:
    """One denoising step: mu + sigma*z. The denoiser mean is caller-supplied."""
    x_t = _as_tensor(x_t)
    mu = _as_tensor(mu)
    z = _as_tensor(z)
    if not (x_t.shape == mu.shape == z.shape):
        raise DomainError(f"shape mismatch: x_t {x_t.shape}, mu {mu.shape}, z {z.shape}")
    if sigma_t < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma_t}")
    return mu + sigma_t * z


# --------------------------------------------------------------------------
# convolution and its GEMM lowering
# --------------------------------------------------------------------------

def _pad_pair(padding) -> tuple[int, int]:
    if isinstance(padding, tuple):
        ph, pw = padding
    else:
        ph = pw = int(padding)
    if ph < 0 or pw < 0:
        raise DomainError("padding must be >= 0")
    return ph, pw


def conv_out_extent(extent: int, k: int, stride: int, pad: int) -> int:
    out = (extent + 2 * pad - k) // stride + 1
    if out <= 0:
        raise DomainError(f"non-positive conv output extent for extent={extent}, k={k}, "
                          f"stride={stride}, pad={pad}")
    return out


@dataclass(frozen=True)
class GemmView:
    """im2col lowering of a convolution: output = patches @ weights.T."""

    patches: np.ndarray        # (positions, C_in*kh*kw)
    weights: np.ndarray        # (C_out, C_in*kh*kw)
    out_shape: tuple[int, int, int]

    def compute(self) -> np.ndarray:
        flat = self.patches @ self.weights.T
        c_out, h, w = self.out_shape
        return flat.T.reshape(c_out, h, w)


def conv2d_gemm_view(x: np.ndarray, kernel: np.ndarray, stride: int = 1, padding=0) -> GemmView:
    """Lower a conv to its flattened-patch x flattened-kernel GEMM form."""
    x = _as_tensor(x)
    kernel = _as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise DomainError("conv2d expects a (C,H,W) input and a (C_out,C_in,kh,kw) kernel")
    c_out, c_in, kh, kw = kernel.shape
    if x.shape[0] != c_in:
        raise DomainError(f"channel mismatch: input has {x.shape[0]} channels, kernel expects {c_in}")
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    ph, pw = _pad_pair(padding)
    h_out = conv_out_extent(x.shape[1], kh, stride, ph)
    w_out = conv_out_extent(x.shape[2], kw, stride, pw)
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    patches = backend.im2col(padded, kh, kw, stride)
    weights = kernel.reshape(c_out, c_in * kh * kw)
    return GemmView(patches, weights, (c_out, h_out, w_out))


def conv2d(x: np.ndarray, kernel: np.ndarray, stride: int = 1, padding=0) -> np.ndarray:
    """Standard cross-correlation of a (C,H,W) map with a (C_out,C_in,kh,kw) kernel."""
    return conv2d_gemm_view(x, kernel, stride, padding).compute()


def zero_insert(x: np.ndarray, stride: int) -> np.ndarray:
    """Expand a (C,H,W) map by inserting stride-1 zeros between elements."""
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    c, h, w = x.shape
    if stride == 1:
        return np.array(x, dtype=np.float64)
    expanded = np.zeros((c, (h - 1) * stride + 1, (w - 1) * stride + 1), dtype=np.float64)
    expanded[:, ::stride, ::stride] = x
    return expanded


def _transpose_conv_as_conv(kernel: np.ndarray) -> np.ndarray:
    """Spatially flipped, channel-swapped kernel of the equivalent conv."""
    return np.ascontiguousarray(kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))


def conv_transpose2d_gemm_view(x: np.ndarray, kernel: np.ndarray, stride: int) -> GemmView:
    """Dense lowering of a transposed conv: zero-insert, full-pad, conv."""
    kernel = _as_tensor(kernel)
    if kernel.ndim != 4:
        raise DomainError("transposed conv expects a (C_in,C_out,kh,kw) kernel")
    kh, kw = kernel.shape[2], kernel.shape[3]
    expanded = zero_insert(_as_tensor(x), stride)
    return conv2d_gemm_view(expanded, _transpose_conv_as_conv(kernel), 1, (kh - 1, kw - 1))


def conv_transpose2d(x: np.ndarray, kernel: np.ndarray, stride: int) -> np.ndarray:
    """Transposed convolution (gradient-of-conv) via zero insertion."""
    return conv_transpose2d_gemm_view(x, kernel, stride).compute()


def transpose_conv_out_shape(in_shape: tuple[int, int, int], kernel_shape, stride: int) -> tuple[int, int, int]:
    c_in, c_out, kh, kw = kernel_shape
    if in_shape[0] != c_in:
        raise DomainError(f"channel mismatch: input has {in_shape[0]} channels, kernel expects {c_in}")
    return (c_out, (in_shape[1] - 1) * stride + kh, (in_shape[2] - 1) * stride + kw)


# --------------------------------------------------------------------------
# sparsity-aware transposed-conv lowering
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseGroup:
    """One stride-phase class of output positions and its surviving columns."""

    positions: np.ndarray  # row indices into the flattened output positions
    kept_cols: np.ndarray  # surviving column indices of the flattened patches


@dataclass(frozen=True)
class SparseStructure:
    """Data-independent structure of the sparsity-aware lowering."""

    groups: tuple[PhaseGroup, ...]
    out_shape: tuple[int, int, int]
    inner_dense: int
    positions_total: int
    dense_mac_count: int
    reduced_mac_count: int
    eliminated_mac_count: int


def sparse_lowering_structure(in_shape: tuple[int, int, int],
                              kernel_shape: tuple[int, int, int, int],
                              stride: int) -> SparseStructure:
    """Identify structurally all-zero patch columns of a zero-inserted input.

    Output positions split into stride^2 phase classes; within a class a
    patch column either always aligns with inserted/padding zeros (deleted,
    together with the corresponding flattened-kernel elements) or can carry
    data (kept). The reduced per-class operands reproduce the dense result
    exactly because only always-zero products are removed.
    """
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    c_in, c_out, kh, kw = kernel_shape
    out_shape = transpose_conv_out_shape(in_shape, kernel_shape, stride)
    _, h_out, w_out = out_shape

    # indicator of real-data sites in the expanded + fully padded map
    indicator = zero_insert(np.ones(in_shape, dtype=np.float64), stride)
    indicator = np.pad(indicator, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    mask = backend.im2col(indicator, kh, kw, 1) > 0.5  # (positions, C_in*kh*kw)

    rows = np.arange(h_out * w_out)
    row_phase = (rows // w_out) % stride
    col_phase = rows % w_out % stride
    inner_dense = c_in * kh * kw

    groups = []
    reduced = 0
    for a in range(stride):
        for b in range(stride):
            members = rows[(row_phase == a) & (col_phase == b)]
            if members.size == 0:
                continue
            kept = np.flatnonzero(mask[members].any(axis=0))
            groups.append(PhaseGroup(members, kept))
            reduced += int(members.size) * int(kept.size) * c_out

    dense = h_out * w_out * inner_dense * c_out
    return SparseStructure(tuple(groups), out_shape, inner_dense, h_out * w_out,
                           dense, reduced, dense - reduced)


@dataclass(frozen=True)
class SparseLowering:
    """Reduced GEMM operands of a sparsity-aware transposed convolution."""

    structure: SparseStructure
    patches: np.ndarray   # dense flattened patches (positions, inner_dense)
    weights: np.ndarray   # dense flattened kernel (C_out, inner_dense)

    @property
    def eliminated_mac_count(self) -> int:
        return self.structure.eliminated_mac_count

    def group_operands(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        group = self.structure.groups[index]
        return (self.patches[group.positions][:, group.kept_cols],
                self.weights[:, group.kept_cols])

    def compute(self) -> np.ndarray:
        c_out, h, w = self.structure.out_shape
        flat = np.zeros((h * w, c_out), dtype=np.float64)
        for group in self.structure.groups:
            flat[group.positions] = (self.patches[group.positions][:, group.kept_cols]
                                     @ self.weights[:, group.kept_cols].T)
        return flat.T.reshape(c_out, h, w)


def sparse_transpose_conv_lowering(x: np.ndarray, kernel: np.ndarray, stride: int) -> SparseLowering:
    """Sparsity-aware lowering of a transposed conv (see sparse_lowering_structure)."""
    x = _as_tensor(x)
    kernel = _as_tensor(kernel)
    view = conv_transpose2d_gemm_view(x, kernel, stride)
    structure = sparse_lowering_structure(x.shape, kernel.shape, stride)
    return SparseLowering(structure, view.patches, view.weights)


# --------------------------------------------------------------------------
# normalization and activation
# --------------------------------------------------------------------------

def group_norm(x: np.ndarray, groups: int, gamma: np.ndarray, beta: np.ndarray,
               eps: float = 1e-5) -> np.ndarray:
    """Per-group standardization followed by a per-channel affine transform."""
    x = _as_tensor(x)
    gamma = _as_tensor(gamma)
    beta = _as_tensor(beta)
    channels = x.shape[0]
    if groups < 1 or channels % groups != 0:
        raise DomainError(f"{channels} channels not divisible into {groups} groups")
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DomainError("gamma and beta must be per-channel vectors")
    if eps <= 0:
        raise DomainError("eps must be > 0")
    grouped = x.reshape(groups, -1)
    mean = grouped.mean(axis=1, keepdims=True)
    var = grouped.var(axis=1, keepdims=True)
    normed = ((grouped - mean) / np.sqrt(var + eps)).reshape(x.shape)
    shape = (channels,) + (1,) * (x.ndim - 1)
    return normed * gamma.reshape(shape) + beta.reshape(shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x):
    """Elementwise x * sigmoid(x)."""
    x = _as_tensor(x)
    if x.ndim == 0:
        return float(x * sigmoid(x))
    return x * sigmoid(x)


# --------------------------------------------------------------------------
# log-sum-exp softmax and attention
# --------------------------------------------------------------------------

class LutMath:
    """Quantized lookup-table ln/exp for ECU precision studies.

    Linear interpolation over a fixed number of entries; the functional
    oracle path uses exact ln/exp (pass ``lut=None``).
    """

    def __init__(self, entries: int = 256, exp_domain: tuple[float, float] = (-30.0, 0.0),
                 ln_domain: tuple[float, float] = (1.0, 4096.0)):
        if entries < 2:
            raise DomainError("LUT needs at least 2 entries")
        self.entries = entries
        self._exp_x = np.linspace(exp_domain[0], exp_domain[1], entries)
        self._exp_y = np.exp(self._exp_x)
        self._ln_x = np.linspace(ln_domain[0], ln_domain[1], entries)
        self._ln_y = np.log(self._ln_x)

    def exp(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, self._exp_x[0], self._exp_x[-1])
        return np.interp(x, self._exp_x, self._exp_y)

    def ln(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, self._ln_x[0], self._ln_x[-1])
        return np.interp(x, self._ln_x, self._ln_y)


def softmax_lse_rows(logits: np.ndarray, lut: LutMath | None = None) -> np.ndarray:
    """Row-wise softmax via the log-sum-exp decomposition.

    Four sub-operations per row: (1) gamma_max, (2) ln of the summed
    exponentials of the shifted entries, (3) subtraction of the ln term from
    the shifted entries, (4) exponentiation.
    """
    logits = _as_tensor(logits)
    if logits.size == 0:
        raise DomainError("softmax of an empty vector is undefined")
    exp = lut.exp if lut is not None else np.exp
    ln = lut.ln if lut is not None else np.log
    gamma_max = logits.max(axis=-1, keepdims=True)            # (1) track the maximum
    shifted = logits - gamma_max
    lse = ln(exp(shifted).sum(axis=-1, keepdims=True))        # (2) ln-sum-exp
    return exp(shifted - lse)                                 # (3) subtract, (4) exp


def softmax_lse(gamma: np.ndarray, lut: LutMath | None = None) -> np.ndarray:
    """Log-sum-exp softmax of a vector of logits."""
    gamma = _as_tensor(gamma)
    if gamma.ndim != 1:
        raise DomainError("softmax_lse expects a 1-D vector")
    return softmax_lse_rows(gamma, lut)


@dataclass(frozen=True)
class AttentionSpec:
    """Projection weights of one self-attention head."""

    w_q: np.ndarray  # (d_model, d_k)
    w_k: np.ndarray  # (d_model, d_k)
    w_v: np.ndarray  # (d_model, d_v)
    heads: int = 1

    def __post_init__(self) -> None:
        w_q, w_k, w_v = map(_as_tensor, (self.w_q, self.w_k, self.w_v))
        if w_q.ndim != 2 or w_k.ndim != 2 or w_v.ndim != 2:
            raise DomainError("attention weights must be matrices")
        if w_q.shape != w_k.shape:
            raise DomainError("W_Q and W_K must share the (d_model, d_k) shape")
        if w_v.shape[0] != w_q.shape[0]:
            raise DomainError("W_V row count must match d_model")
        if self.heads < 1:
            raise DomainError("heads must be >= 1")
        object.__setattr__(self, "w_q", w_q)
        object.__setattr__(self, "w_k", w_k)
        object.__setattr__(self, "w_v", w_v)

    @property
    def d_model(self) -> int:
        return int(self.w_q.shape[0])

    @property
    def d_k(self) -> int:
        return int(self.w_q.shape[1])

    @property
    def d_v(self) -> int:
        return int(self.w_v.shape[1])


def _check_attention_input(x: np.ndarray, spec: AttentionSpec) -> np.ndarray:
    x = _as_tensor(x)
    if x.ndim != 2 or x.shape[1] != spec.d_model:
        raise DomainError(f"input must be (seq, {spec.d_model}), got {x.shape}")
    return x


def attention_head(x: np.ndarray, spec: AttentionSpec) -> np.ndarray:
    """Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V."""
    x = _check_attention_input(x, spec)
    q = x @ spec.w_q
    k = x @ spec.w_k
    v = x @ spec.w_v
    logits = (q @ k.T) / math.sqrt(spec.d_k)
    return softmax_lse_rows(logits) @ v


def attention_head_decomposed(x: np.ndarray, spec: AttentionSpec) -> np.ndarray:
    """Attention with the key matrix never materialized.

    Q K^T is rewritten as (Q W_K^T) X^T, with the 1/sqrt(d_k) scaling folded
    into the key weights, so the scaling costs nothing at run time.
    """
    x = _check_attention_input(x, spec)
    q = x @ spec.w_q
    w_k_folded = spec.w_k / math.sqrt(spec.d_k)
    logits = (q @ w_k_folded.T) @ x.T
    return softmax_lse_rows(logits) @ (x @ spec.w_v)


# --------------------------------------------------------------------------
# quantization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantScheme:
    weight_bits: int = 8
    activation_bits: int = 8
    per_channel: bool = False


@dataclass(frozen=True)
class Quantized:
    codes: np.ndarray
    scale: np.ndarray | float


def quantize_w8a8(t: np.ndarray, scheme: QuantScheme = QuantScheme()) -> Quantized:
    """Symmetric 8-bit quantization; scale = max(|t|) / 127."""
    t = _as_tensor(t)
    if t.size == 0:
        raise DomainError("cannot quantize an empty tensor")
    qmax = 2 ** (scheme.weight_bits - 1) - 1
    if scheme.per_channel and t.ndim > 1:
        axes = tuple(range(1, t.ndim))
        scale = np.abs(t).max(axis=axes, keepdims=True) / qmax
        safe = np.where(scale > 0, scale, 1.0)
        codes = np.clip(np.rint(t / safe), -qmax - 1, qmax).astype(np.int8)
        codes = np.where(scale > 0, codes, 0).astype(np.int8)
        return Quantized(codes, scale)
    scale = float(np.abs(t).max()) / qmax
    if scale == 0.0:
        return Quantized(np.zeros(t.shape, dtype=np.int8), 0.0)
    codes = np.clip(np.rint(t / scale), -qmax - 1, qmax).astype(np.int8)
    return Quantized(codes, scale)


def dequantize(codes: np.ndarray, scale) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * scale


# --------------------------------------------------------------------------
# tensor serialization (golden tests)
# --------------------------------------------------------------------------

_TENSOR_MAGIC = b"DLT1"


def save_tensor(path, x: np.ndarray) -> None:
    """Write a tensor as a row-major binary with a shape header."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    with open(path, "wb") as handle:
        handle.write(_TENSOR_MAGIC)
        handle.write(np.int64(x.ndim).tobytes())
        handle.write(np.asarray(x.shape, dtype=np.int64).tobytes())
        handle.write(x.tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as handle:
        if handle.read(4) != _TENSOR_MAGIC:
            raise DomainError(f"{path}: not a tensor file")
        ndim = int(np.frombuffer(handle.read(8), dtype=np.int64)[0])
        shape = tuple(np.frombuffer(handle.read(8 * ndim), dtype=np.int64))
        data = np.frombuffer(handle.read(), dtype=np.float64)
    return data.reshape(shape).copy()
