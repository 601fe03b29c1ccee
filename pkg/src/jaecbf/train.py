"""End-to-end training: scale-invariant SNR plus spectral MSE, Adam with
global-norm gradient clipping, and bit-exact checkpoints."""

import json
import os
import struct
import zlib
from dataclasses import dataclass, asdict

import numpy as np

from .audio import AudioClip
from .nnkit import Tensor, AdamState, adam_step, clip_grad_norm
from .model import ModelConfig, build_params, enhance_to_tensor, stft_config
from .stft import stft

SI_SNR_CAP_DB = 60.0


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def si_snr_value(est, ref, cap=SI_SNR_CAP_DB):
    """Scale-invariant SNR in dB on numpy arrays, capped at +-cap."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if not np.any(ref):
        raise ValueError("all-zero reference")
    est = est - est.mean()
    ref = ref - ref.mean()
    alpha = np.dot(est, ref) / np.dot(ref, ref)
    target = alpha * ref
    noise = est - target
    num = np.sum(target * target)
    den = np.sum(noise * noise)
    if den <= 0.0:
        return cap
    val = 10.0 * np.log10(max(num, 1e-30) / den)
    return float(np.clip(val, -cap, cap))


def si_snr_loss(est, ref, cap=SI_SNR_CAP_DB):
    """Negated Si-SNR; `est` is a Tensor [T], `ref` a numpy array."""
    ref = np.asarray(ref, dtype=np.float64)
    if not np.any(ref):
        raise ValueError("all-zero reference")
    ref = ref - ref.mean()
    refc = ref.astype(str(est.dtype))
    est = est - est.mean()
    denom = float(np.dot(ref, ref))
    alpha = (est * refc).sum() * (1.0 / denom)
    target_pow = alpha.square() * denom
    noise = est - alpha.reshape(1) * refc
    noise_pow = noise.square().sum() + 1e-10
    ratio = target_pow / noise_pow
    value = float(10.0 * np.log10(max(ratio.data, 1e-30)))
    if value >= cap or value <= -cap:
        return Tensor(np.asarray(-np.clip(value, -cap, cap), dtype=est.dtype))
    return (ratio.log() * (-10.0 / np.log(10.0)))


def spectral_mse_loss(est_re, est_im, ref_spec):
    """Mean over TF bins of |est - ref|^2; ref_spec complex [N, F]."""
    if est_re.shape != ref_spec.shape:
        raise ValueError(f"shape mismatch: {est_re.shape} vs {ref_spec.shape}")
    rr = np.ascontiguousarray(ref_spec.real).astype(str(est_re.dtype))
    ri = np.ascontiguousarray(ref_spec.imag).astype(str(est_re.dtype))
    return ((est_re - rr).square() + (est_im - ri).square()).mean()


# ---------------------------------------------------------------------------
# configuration / stepping
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch: int = 4
    epochs: int = 5
    chunk_seconds: float = 4.0
    grad_clip: float = 10.0
    alpha_sisnr: float = 1.0
    alpha_mse: float = 1.0
    seed: int = 0
    dtd: bool = True
    warmup_steps: int = 0
    lr_decay: str = "none"
    decay_steps: int = 0

    def __post_init__(self):
        if min(self.lr, self.batch, self.epochs, self.chunk_seconds, self.grad_clip) <= 0:
            raise ValueError("training config values must be positive")
        if self.alpha_sisnr < 0 or self.alpha_mse < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.warmup_steps < 0 or self.decay_steps < 0:
            raise ValueError("schedule step counts must be nonnegative")
        if self.lr_decay not in ("none", "cosine"):
            raise ValueError(f"unknown lr_decay {self.lr_decay!r}")


def lr_at(train_cfg, step):
    """Learning rate for 1-based update `step`: linear warmup, then an
    optional cosine ramp down to 5% of the base rate at `decay_steps`."""
    lr = train_cfg.lr
    if train_cfg.warmup_steps > 0 and step <= train_cfg.warmup_steps:
        return lr * step / train_cfg.warmup_steps
    if train_cfg.lr_decay == "cosine" and train_cfg.decay_steps > train_cfg.warmup_steps:
        t = min(step, train_cfg.decay_steps) - train_cfg.warmup_steps
        span = train_cfg.decay_steps - train_cfg.warmup_steps
        return lr * (0.05 + 0.95 * 0.5 * (1.0 + np.cos(np.pi * t / span)))
    return lr


def scene_loss(mixture, far_end, target, params, model_cfg, train_cfg):
    """Forward one scene and return (loss Tensor, sisnr_term, mse_term)."""
    sig, (s_re, s_im), _ = enhance_to_tensor(mixture, far_end, params, model_cfg,
                                             dtd=train_cfg.dtd)
    ref = target.data[0]
    loss_t = si_snr_loss(sig, ref)
    ref_spec = stft(target, stft_config(model_cfg)).data[0]
    loss_f = spectral_mse_loss(s_re, s_im, ref_spec)
    total = loss_t * train_cfg.alpha_sisnr + loss_f * train_cfg.alpha_mse
    return total, float(loss_t.data), float(loss_f.data)


def train_step(batch, params, model_cfg, train_cfg, adam):
    """One update over a batch of (mixture, far_end, target) scenes.

    Returns a dict with loss, per-term means, and the gradient norm.
    """
    params.zero_grad()
    total = None
    sisnr_terms, mse_terms = [], []
    for mixture, far_end, target in batch:
        loss, lt, lf = scene_loss(mixture, far_end, target, params, model_cfg, train_cfg)
        sisnr_terms.append(lt)
        mse_terms.append(lf)
        total = loss if total is None else total + loss
    total = total * (1.0 / len(batch))
    if not np.isfinite(total.data):
        raise FloatingPointError(f"non-finite loss: {total.data}")
    total.backward()
    pre_norm = np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2))
                           for _, p in params))
    clip_grad_norm(params, train_cfg.grad_clip)
    adam_step(params, adam)
    return {
        "loss": float(total.data),
        "sisnr_term": float(np.mean(sisnr_terms)),
        "mse_term": float(np.mean(mse_terms)),
        "grad_norm": float(pre_norm),
    }


def chunk_scene(mixture, far_end, target, chunk_seconds, start=0):
    n = int(round(chunk_seconds * mixture.rate))
    if mixture.samples < n:
        raise ValueError("scene shorter than one training chunk")
    sl = slice(start, start + n)
    return (AudioClip(mixture.data[:, sl], mixture.rate),
            AudioClip(far_end.data[:, sl], far_end.rate),
            AudioClip(target.data[:, sl], target.rate))


def load_scene_audio(root, record):
    """Read (mixture, far_end, target) clips for one manifest record."""
    from .audio import read_wav
    w = record["wavs"]
    return (read_wav(os.path.join(root, w["mixture"])),
            read_wav(os.path.join(root, w["farend"])),
            read_wav(os.path.join(root, w["target"])))


def train_loop(records, data_root, params, model_cfg, train_cfg, adam,
               checkpoint_path=None, log_path=None, start_step=0, max_steps=None,
               progress=None):
    """Epochs of fixed-order batches over `records`; logs a CSV row per step.

    Scenes are chunked deterministically (chunk start varies by epoch via the
    seeded rng).  On a non-finite loss the last completed checkpoint is left
    in place and FloatingPointError propagates.  Returns the final step count.
    """
    rng = np.random.default_rng([train_cfg.seed, start_step])
    log = open(log_path, "a") if log_path else None
    if log and log.tell() == 0:
        log.write("step,loss,sisnr_term,mse_term,grad_norm\n")
    step = start_step
    try:
        for _ in range(train_cfg.epochs):
            order = rng.permutation(len(records))
            for lo in range(0, len(order), train_cfg.batch):
                idx = order[lo:lo + train_cfg.batch]
                batch = []
                for j in idx:
                    mix, far, tgt = load_scene_audio(data_root, records[j])
                    n = int(round(train_cfg.chunk_seconds * mix.rate))
                    start = int(rng.integers(0, max(mix.samples - n, 0) + 1))
                    batch.append(chunk_scene(mix, far, tgt, train_cfg.chunk_seconds, start))
                adam.lr = lr_at(train_cfg, step + 1)
                stats = train_step(batch, params, model_cfg, train_cfg, adam)
                step += 1
                if log:
                    log.write("%d,%.6f,%.6f,%.6f,%.6f\n" % (
                        step, stats["loss"], stats["sisnr_term"],
                        stats["mse_term"], stats["grad_norm"]))
                    log.flush()
                if progress:
                    progress(step, stats)
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, params, model_cfg, train_cfg,
                                    adam, step)
                if max_steps is not None and step >= max_steps:
                    return step
    finally:
        if log:
            log.close()
    return step


# ---------------------------------------------------------------------------
# checkpoints: magic "JBF1", JSON header, float32 payload
# ---------------------------------------------------------------------------

MAGIC = b"JBF1"
CKPT_VERSION = 1


def save_checkpoint(path, params, model_cfg, train_cfg, adam, step):
    tensors = []
    blobs = []
    offset = 0

    def push(name, arr):
        nonlocal offset
        raw = np.ascontiguousarray(arr, dtype=np.float32).tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "crc32": zlib.crc32(raw)})
        blobs.append(raw)
        offset += len(raw)

    for name, p in params:
        push(name, p.data)
    for name, _ in params:
        push("adam.m." + name, adam.m[name])
        push("adam.v." + name, adam.v[name])

    header = {
        "version": CKPT_VERSION,
        "model_config": model_cfg.to_dict(),
        "train_config": asdict(train_cfg),
        "step": step,
        "adam": {"lr": adam.lr, "betas": list(adam.betas), "eps": adam.eps, "t": adam.t},
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path, expected_model_cfg=None):
    """Returns (params, model_cfg, train_cfg, adam, step)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        if header["version"] != CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        payload = f.read()

    model_cfg = ModelConfig.from_dict(header["model_config"])
    if expected_model_cfg is not None and model_cfg != expected_model_cfg:
        raise ValueError("checkpoint model config does not match the requested model")
    train_cfg = TrainConfig(**header["train_config"])

    arrays = {}
    for rec in header["tensors"]:
        size = int(np.prod(rec["shape"])) if rec["shape"] else 1
        raw = payload[rec["offset"]:rec["offset"] + 4 * size]
        if zlib.crc32(raw) != rec["crc32"]:
            raise ValueError(f"checksum mismatch for tensor {rec['name']}")
        arrays[rec["name"]] = np.frombuffer(raw, dtype=np.float32).reshape(rec["shape"]).copy()

    params = build_params(model_cfg, seed=train_cfg.seed)
    params.load_values({k: v for k, v in arrays.items() if not k.startswith("adam.")})
    adam_h = header["adam"]
    adam = AdamState(params, lr=adam_h["lr"], betas=tuple(adam_h["betas"]), eps=adam_h["eps"])
    adam.t = adam_h["t"]
    for name, _ in params:
        adam.m[name] = arrays["adam.m." + name].astype(params.dtype)
        adam.v[name] = arrays["adam.v." + name].astype(params.dtype)
    return params, model_cfg, train_cfg, adam, header["step"]
