"""A small convolutional classifier with hand-written forward/backward passes.

Two stride-1 'same' convolutions, each followed by ReLU and 2x2 average
pooling, then a dense layer to class logits. The post-pool activations of
conv1 ("L1") and conv2 ("L2") are exposed as probe tensors for downstream
pooled-representation analysis. Everything is float64 numpy; gradients are
exact (ReLU subgradient at 0 taken as 0), which keeps them checkable
against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidArgumentError

PROBE_TAGS = ("L1", "L2")

_RNET_MAGIC = b"RNET"
_RNET_VERSION = 1
_PARAM_FIELDS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b")


@dataclass
class RefNet:
    """Parameters of the two-conv classifier, all float64.

    conv weights are (c_out, c_in, k, k); the dense layer maps the
    flattened post-pool conv2 activations to n_classes logits.
    """

    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    input_size: int
    n_classes: int

    def __post_init__(self):
        for name in _PARAM_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        c1, cin, k, k2 = self.conv1_w.shape
        if cin != 1 or k != k2 or k % 2 == 0:
            raise InvalidArgumentError(
                f"conv1 weights must be (c1, 1, k, k) with odd k, got "
                f"{self.conv1_w.shape}"
            )
        c2 = self.conv2_w.shape[0]
        if self.conv2_w.shape != (c2, c1, k, k):
            raise InvalidArgumentError(
                f"conv2 weights {self.conv2_w.shape} do not match conv1 ({c1} "
                f"channels, kernel {k})"
            )
        if self.input_size % 4 != 0 or self.input_size < 4:
            raise InvalidArgumentError(
                f"input_size must be a positive multiple of 4, got {self.input_size}"
            )
        s2 = self.input_size // 4
        flat = c2 * s2 * s2
        if self.dense_w.shape != (flat, self.n_classes):
            raise InvalidArgumentError(
                f"dense weights {self.dense_w.shape} do not match ({flat}, "
                f"{self.n_classes})"
            )
        if self.conv1_b.shape != (c1,) or self.conv2_b.shape != (c2,):
            raise InvalidArgumentError("conv bias shapes do not match filter counts")
        if self.dense_b.shape != (self.n_classes,):
            raise InvalidArgumentError("dense bias shape does not match n_classes")

    @property
    def c1(self) -> int:
        return self.conv1_w.shape[0]

    @property
    def c2(self) -> int:
        return self.conv2_w.shape[0]

    @property
    def kernel(self) -> int:
        return self.conv1_w.shape[2]

    def copy(self) -> "RefNet":
        return RefNet(
            *(getattr(self, f).copy() for f in _PARAM_FIELDS),
            input_size=self.input_size,
            n_classes=self.n_classes,
        )


@dataclass(frozen=True)
class CrossEntropyLoss:
    """Softmax cross-entropy against one target class."""

    target_class: int


@dataclass(frozen=True)
class CodeLoss:
    """Cosine distance between a probe layer's pooled vector and a target code."""

    layer_tag: str
    target: np.ndarray


def probe_dim(net: RefNet, layer_tag: str) -> int:
    """Length of the pooled vector produced by a probe layer."""
    if layer_tag == "L1":
        return net.c1
    if layer_tag == "L2":
        return net.c2
    raise InvalidArgumentError(
        f"unknown probe layer {layer_tag!r}; valid tags: {', '.join(PROBE_TAGS)}"
    )


def init_refnet(
    c1: int = 8,
    c2: int = 16,
    k: int = 3,
    input_size: int = 16,
    n_classes: int = 8,
    seed: int = 0,
) -> RefNet:
    """He-initialized network, deterministic per seed; biases start at zero."""
    if c1 < 1 or c2 < 1 or n_classes < 2:
        raise InvalidArgumentError("need c1 >= 1, c2 >= 1, n_classes >= 2")
    rng = np.random.default_rng(seed)
    s2 = input_size // 4
    flat = c2 * s2 * s2
    return RefNet(
        conv1_w=rng.normal(0.0, np.sqrt(2.0 / (k * k)), (c1, 1, k, k)),
        conv1_b=np.zeros(c1),
        conv2_w=rng.normal(0.0, np.sqrt(2.0 / (c1 * k * k)), (c2, c1, k, k)),
        conv2_b=np.zeros(c2),
        dense_w=rng.normal(0.0, np.sqrt(2.0 / flat), (flat, n_classes)),
        dense_b=np.zeros(n_classes),
        input_size=input_size,
        n_classes=n_classes,
    )


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(n, c, h, w) -> (n, h*w, c*k*k) patches for stride-1 'same' convolution."""
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    n, c, h, w = x.shape
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n, h * w, c * k * k
    )


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Stride-1 'same' cross-correlation; returns (pre-activation, patch cache)."""
    n, _, h, width = x.shape
    c_out = w.shape[0]
    cols = _im2col(x, w.shape[2])
    out = cols @ w.reshape(c_out, -1).T + b
    return out.transpose(0, 2, 1).reshape(n, c_out, h, width), cols


def _conv_input_grad(dpre: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the convolution input, as a convolution with the
    channel-swapped, spatially flipped kernel."""
    w_flip = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    out, _ = _conv_forward(dpre, w_flip, np.zeros(w_flip.shape[0]))
    return out


def _conv_param_grads(dpre: np.ndarray, cols: np.ndarray):
    n, c_out = dpre.shape[0], dpre.shape[1]
    dflat = dpre.reshape(n, c_out, -1).transpose(0, 2, 1)
    dw = np.einsum("nhc,nhk->ck", dflat, cols)
    return dw, dpre.sum(axis=(0, 2, 3))


def _avgpool(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def _avgpool_grad(dout: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(dout, 2, axis=2), 2, axis=3) * 0.25


def _as_batch(net: RefNet, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (net.input_size, net.input_size):
        raise InvalidArgumentError(
            f"expected ({net.input_size}, {net.input_size}) images, got shape "
            f"{x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input contains non-finite values")
    return x[:, None, :, :], single


def _forward_full(net: RefNet, x4: np.ndarray) -> dict:
    pre1, cols1 = _conv_forward(x4, net.conv1_w, net.conv1_b)
    relu1 = np.maximum(pre1, 0.0)
    pool1 = _avgpool(relu1)
    pre2, cols2 = _conv_forward(pool1, net.conv2_w, net.conv2_b)
    relu2 = np.maximum(pre2, 0.0)
    pool2 = _avgpool(relu2)
    flat = pool2.reshape(pool2.shape[0], -1)
    logits = flat @ net.dense_w + net.dense_b
    return {
        "pre1": pre1,
        "cols1": cols1,
        "pool1": pool1,
        "pre2": pre2,
        "cols2": cols2,
        "pool2": pool2,
        "flat": flat,
        "logits": logits,
    }


def forward(net: RefNet, x: np.ndarray):
    """Class logits plus the two probe tensors.

    Accepts one (h, w) image or an (n, h, w) batch; probe tensors are the
    post-pool conv activations, shaped (n, channels, h', w') (or without
    the leading axis for a single image).
    """
    x4, single = _as_batch(net, x)
    cache = _forward_full(net, x4)
    logits, l1, l2 = cache["logits"], cache["pool1"], cache["pool2"]
    if single:
        return logits[0], {"L1": l1[0], "L2": l2[0]}
    return logits, {"L1": l1, "L2": l2}


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _backward_from_pool2(net: RefNet, cache: dict, dpool2, dpool1_extra=None):
    """Input gradient from upstream gradients at pool2 (and optionally pool1)."""
    drelu2 = _avgpool_grad(dpool2)
    dpre2 = drelu2 * (cache["pre2"] > 0)
    dpool1 = _conv_input_grad(dpre2, net.conv2_w)
    if dpool1_extra is not None:
        dpool1 = dpool1 + dpool1_extra
    drelu1 = _avgpool_grad(dpool1)
    dpre1 = drelu1 * (cache["pre1"] > 0)
    return _conv_input_grad(dpre1, net.conv1_w)


def backward_input(net: RefNet, x: np.ndarray, loss) -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to one input image.

    ``loss`` is a CrossEntropyLoss or a CodeLoss; the returned gradient has
    the image's shape.
    """
    x4, _ = _as_batch(net, x)
    if x4.shape[0] != 1:
        raise InvalidArgumentError("backward_input expects a single image")
    cache = _forward_full(net, x4)

    if isinstance(loss, CrossEntropyLoss):
        t = loss.target_class
        if not (0 <= t < net.n_classes):
            raise InvalidArgumentError(
                f"target class {t} out of range 0..{net.n_classes - 1}"
            )
        logits = cache["logits"]
        z = logits - logits.max()
        lse = np.log(np.exp(z).sum())
        value = float(lse - z[0, t])
        dlogits = _softmax(logits)
        dlogits[0, t] -= 1.0
        dflat = dlogits @ net.dense_w.T
        dpool2 = dflat.reshape(cache["pool2"].shape)
        grad = _backward_from_pool2(net, cache, dpool2)
        return value, grad[0, 0]

    if isinstance(loss, CodeLoss):
        if loss.layer_tag not in PROBE_TAGS:
            raise InvalidArgumentError(
                f"unknown probe layer {loss.layer_tag!r}; valid tags: "
                f"{', '.join(PROBE_TAGS)}"
            )
        target = np.asarray(loss.target, dtype=np.float64)
        probe = cache["pool1"] if loss.layer_tag == "L1" else cache["pool2"]
        c = probe.shape[1]
        if target.shape != (c,):
            raise InvalidArgumentError(
                f"target code has shape {target.shape}, layer {loss.layer_tag} "
                f"pools to ({c},)"
            )
        tn = np.linalg.norm(target)
        if tn == 0.0:
            raise InvalidArgumentError("target code must be nonzero")
        p = probe[0].mean(axis=(1, 2))
        pn = np.linalg.norm(p)
        if pn == 0.0:
            # every probe activation is dead: the loss is locally constant
            return 1.0, np.zeros((net.input_size, net.input_size))
        cos = float(p @ target) / (pn * tn)
        value = 1.0 - cos
        dp = -target / (pn * tn) + cos * p / (pn * pn)
        dprobe = np.zeros_like(probe)
        hw = probe.shape[2] * probe.shape[3]
        dprobe[0] = dp[:, None, None] / hw
        if loss.layer_tag == "L2":
            grad = _backward_from_pool2(net, cache, dprobe)
        else:
            grad = _backward_from_pool2(
                net, cache, np.zeros_like(cache["pool2"]), dpool1_extra=dprobe
            )
        return value, grad[0, 0]

    raise InvalidArgumentError(f"unknown loss spec {type(loss).__name__}")


def _param_grads(net: RefNet, x4: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy over the batch plus gradients for every parameter."""
    cache = _forward_full(net, x4)
    n = x4.shape[0]
    logits = cache["logits"]
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    value = float(np.mean(lse - z[np.arange(n), targets]))

    dlogits = _softmax(logits)
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n

    grads = {}
    grads["dense_w"] = cache["flat"].T @ dlogits
    grads["dense_b"] = dlogits.sum(axis=0)
    dpool2 = (dlogits @ net.dense_w.T).reshape(cache["pool2"].shape)
    dpre2 = _avgpool_grad(dpool2) * (cache["pre2"] > 0)
    dw2, db2 = _conv_param_grads(dpre2, cache["cols2"])
    grads["conv2_w"] = dw2.reshape(net.conv2_w.shape)
    grads["conv2_b"] = db2
    dpool1 = _conv_input_grad(dpre2, net.conv2_w)
    dpre1 = _avgpool_grad(dpool1) * (cache["pre1"] > 0)
    dw1, db1 = _conv_param_grads(dpre1, cache["cols1"])
    grads["conv1_w"] = dw1.reshape(net.conv1_w.shape)
    grads["conv1_b"] = db1
    return value, grads


def accuracy(net: RefNet, images: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of images whose argmax logit equals the label."""
    x4, _ = _as_batch(net, images)
    hits = 0
    for start in range(0, x4.shape[0], 256):
        chunk = x4[start : start + 256]
        logits = _forward_full(net, chunk)["logits"]
        pred = logits.argmax(axis=1)
        hits += int((pred == labels[start : start + chunk.shape[0]]).sum())
    return hits / x4.shape[0]


def train_refnet(
    net: RefNet,
    data,
    steps: int = 600,
    lr: float = 0.05,
    momentum: float = 0.9,
    batch_size: int = 32,
    seed: int = 0,
) -> tuple[RefNet, float]:
    """SGD with momentum on cross-entropy; returns (net, final train accuracy).

    Batches are drawn with replacement from a generator seeded by ``seed``,
    so runs are deterministic. The net is updated in place.
    """
    if steps < 1:
        raise InvalidArgumentError(f"steps must be >= 1, got {steps}")
    if lr <= 0:
        raise InvalidArgumentError(f"lr must be > 0, got {lr}")
    images = np.asarray(data.images, dtype=np.float64)
    labels = np.asarray(data.labels, dtype=np.int64)
    if images.shape[0] == 0:
        raise InvalidArgumentError("training dataset is empty")
    n = images.shape[0]
    rng = np.random.default_rng(seed)
    velocity = {f: np.zeros_like(getattr(net, f)) for f in _PARAM_FIELDS}
    for _ in range(steps):
        idx = rng.integers(0, n, size=min(batch_size, n))
        x4 = images[idx][:, None, :, :]
        _, grads = _param_grads(net, x4, labels[idx])
        for f in _PARAM_FIELDS:
            velocity[f] = momentum * velocity[f] - lr * grads[f]
            param = getattr(net, f)
            param += velocity[f]
    return net, accuracy(net, images, labels)


def save_refnet(net: RefNet, path) -> None:
    """Write the checkpoint: magic, version, layer dims, f32 parameters."""
    header = _RNET_MAGIC + struct.pack(
        "<IIIIII",
        _RNET_VERSION,
        net.c1,
        net.c2,
        net.kernel,
        net.input_size,
        net.n_classes,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for f in _PARAM_FIELDS:
            fh.write(getattr(net, f).astype("<f4").tobytes())


def load_refnet(path) -> RefNet:
    """Read a checkpoint written by save_refnet."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fixed = 4 + struct.calcsize("<IIIIII")
    if len(blob) < fixed:
        raise FormatError("truncated header: file shorter than the fixed fields")
    if blob[:4] != _RNET_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {_RNET_MAGIC!r}")
    version, c1, c2, k, input_size, n_classes = struct.unpack(
        "<IIIIII", blob[4:fixed]
    )
    if version != _RNET_VERSION:
        raise FormatError(f"unsupported version {version}, expected {_RNET_VERSION}")
    if min(c1, c2, k, input_size, n_classes) < 1 or input_size % 4 or k % 2 == 0:
        raise FormatError(
            f"invalid dimensions c1={c1} c2={c2} k={k} input_size={input_size} "
            f"n_classes={n_classes}"
        )
    s2 = input_size // 4
    shapes = (
        (c1, 1, k, k),
        (c1,),
        (c2, c1, k, k),
        (c2,),
        (c2 * s2 * s2, n_classes),
        (n_classes,),
    )
    n_values = sum(int(np.prod(s)) for s in shapes)
    if n_values > 2**28:
        raise FormatError(f"declared parameter count {n_values} overflows sane bounds")
    body = blob[fixed:]
    if len(body) < n_values * 4:
        raise FormatError(
            f"truncated parameters: expected {n_values * 4} bytes, found {len(body)}"
        )
    if len(body) > n_values * 4:
        raise FormatError(
            f"trailing data after parameters ({len(body) - n_values * 4} bytes)"
        )
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    params = []
    offset = 0
    for s in shapes:
        size = int(np.prod(s))
        params.append(values[offset : offset + size].reshape(s))
        offset += size
    return RefNet(*params, input_size=input_size, n_classes=n_classes)
