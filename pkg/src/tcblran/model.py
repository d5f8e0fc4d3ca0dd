"""Bilinear recurrent autoencoder: encoder, latent recurrence, decoder.

The latent update is the Euler discretization of a bilinear continuous
form: z' = (A + sum_i u_i B_i) z, where A is initialized to the identity
and the B_i to zero, so an untrained model holds its latent state still.
Encoder and decoder are single-hidden-layer tanh networks with linear
output; a hidden width of 0 selects an exactly linear map, which is what
the algebraic exactness tests use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "Architecture",
    "ModelParams",
    "init_params",
    "encode",
    "decode",
    "bilinear_step",
    "rollout_latent",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_SCHEMA = "tcblran/checkpoint-v1"


@dataclass(frozen=True)
class Architecture:
    """Shapes of the encoder, decoder, and bilinear latent maps."""

    input_dim: int = 64
    latent_dim: int = 12
    encoder_hidden: int = 128
    decoder_hidden: int = 128
    input_count: int = 1

    def __post_init__(self):
        if min(self.input_dim, self.latent_dim, self.input_count) < 1:
            raise ConfigError("input_dim, latent_dim, input_count must be >= 1")
        if self.encoder_hidden < 0 or self.decoder_hidden < 0:
            raise ConfigError("hidden widths must be >= 0 (0 selects a linear map)")


@dataclass
class ModelParams:
    """All trainable arrays. Hidden-layer fields are None for linear maps.

    Weight matrices are stored (fan_in, fan_out) so application is x @ W + b.
    ``b_tilde`` holds one (latent, latent) matrix per control input.
    """

    arch: Architecture
    enc_w1: np.ndarray | None
    enc_b1: np.ndarray | None
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    dec_w1: np.ndarray | None
    dec_b1: np.ndarray | None
    dec_w2: np.ndarray
    dec_b2: np.ndarray
    a_tilde: np.ndarray
    b_tilde: list[np.ndarray] = field(default_factory=list)

    def flat(self) -> dict[str, np.ndarray]:
        """Name -> array view of every trainable parameter, fixed order."""
        out: dict[str, np.ndarray] = {}
        for name in ("enc_w1", "enc_b1", "enc_w2", "enc_b2",
                     "dec_w1", "dec_b1", "dec_w2", "dec_b2", "a_tilde"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        for i, b in enumerate(self.b_tilde):
            out[f"b_tilde_{i}"] = b
        return out

    def replace_flat(self, values: dict[str, np.ndarray]) -> "ModelParams":
        """Rebuild with the arrays in ``values`` (same keys as flat())."""
        kwargs = {}
        for name in ("enc_w1", "enc_b1", "enc_w2", "enc_b2",
                     "dec_w1", "dec_b1", "dec_w2", "dec_b2", "a_tilde"):
            kwargs[name] = values.get(name, getattr(self, name))
        b_tilde = [values.get(f"b_tilde_{i}", b) for i, b in enumerate(self.b_tilde)]
        return ModelParams(arch=self.arch, b_tilde=b_tilde, **kwargs)

    def copy(self) -> "ModelParams":
        return self.replace_flat({k: v.copy() for k, v in self.flat().items()})


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(seed: int, arch: Architecture) -> ModelParams:
    """Glorot-uniform weights, zero biases, A = I, B_i = 0.

    Draw order is fixed (encoder then decoder, weights only), so a given
    (seed, arch) pair always produces the same parameters.
    """
    rng = np.random.default_rng(seed)
    d, nl = arch.input_dim, arch.latent_dim
    he, hd = arch.encoder_hidden, arch.decoder_hidden
    if he > 0:
        enc_w1, enc_b1 = _glorot(rng, d, he), np.zeros(he)
        enc_w2, enc_b2 = _glorot(rng, he, nl), np.zeros(nl)
    else:
        enc_w1 = enc_b1 = None
        enc_w2, enc_b2 = _glorot(rng, d, nl), np.zeros(nl)
    if hd > 0:
        dec_w1, dec_b1 = _glorot(rng, nl, hd), np.zeros(hd)
        dec_w2, dec_b2 = _glorot(rng, hd, d), np.zeros(d)
    else:
        dec_w1 = dec_b1 = None
        dec_w2, dec_b2 = _glorot(rng, nl, d), np.zeros(d)
    return ModelParams(arch=arch, enc_w1=enc_w1, enc_b1=enc_b1, enc_w2=enc_w2,
                       enc_b2=enc_b2, dec_w1=dec_w1, dec_b1=dec_b1,
                       dec_w2=dec_w2, dec_b2=dec_b2, a_tilde=np.eye(nl),
                       b_tilde=[np.zeros((nl, nl)) for _ in range(arch.input_count)])


def encode(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Lifted state(s) -> latent state(s); works on (d,) or (n, d) input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.arch.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != {params.arch.input_dim}")
    if params.enc_w1 is not None:
        x = np.tanh(x @ params.enc_w1 + params.enc_b1)
    return x @ params.enc_w2 + params.enc_b2


def decode(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Latent state(s) -> lifted state(s); works on (nl,) or (n, nl) input."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != params.arch.latent_dim:
        raise ValueError(f"latent dim {z.shape[-1]} != {params.arch.latent_dim}")
    if params.dec_w1 is not None:
        z = np.tanh(z @ params.dec_w1 + params.dec_b1)
    return z @ params.dec_w2 + params.dec_b2


def bilinear_step(params: ModelParams, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One latent step z' = (A + sum_i u_i B_i) z."""
    z = np.asarray(z, dtype=np.float64)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.shape != (params.arch.input_count,):
        raise ValueError(f"control shape {u.shape} != ({params.arch.input_count},)")
    out = params.a_tilde @ z
    for ui, bi in zip(u, params.b_tilde):
        out = out + ui * (bi @ z)
    return out


def rollout_latent(params: ModelParams, z0: np.ndarray,
                   controls: np.ndarray) -> np.ndarray:
    """Iterate the bilinear step; row k is the latent after k+1 steps."""
    controls = np.asarray(controls, dtype=np.float64)
    if controls.ndim == 1:
        controls = controls[:, None]
    out = np.empty((len(controls), params.arch.latent_dim))
    z = np.asarray(z0, dtype=np.float64)
    for k in range(len(controls)):
        z = bilinear_step(params, z, controls[k])
        out[k] = z
    return out


def predict(params: ModelParams, x0: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Encode, roll the latent forward, decode every step.

    Returns one decoded state per control, so row k is the prediction
    k+1 steps past x0. The reconstruction decode(encode(x0)) is not
    included; evaluation prepends it when a k=0 entry is wanted.
    """
    z0 = encode(params, x0)
    latents = rollout_latent(params, z0, controls)
    return decode(params, latents)


def save_checkpoint(path, params: ModelParams, *, seed: int, epoch: int,
                    extra: dict | None = None) -> None:
    """Write parameters plus provenance metadata to an .npz file."""
    arch = params.arch
    meta = {
        "schema": CHECKPOINT_SCHEMA,
        "seed": seed,
        "epoch": epoch,
        "arch": {
            "input_dim": arch.input_dim,
            "latent_dim": arch.latent_dim,
            "encoder_hidden": arch.encoder_hidden,
            "decoder_hidden": arch.decoder_hidden,
            "input_count": arch.input_count,
        },
        "extra": extra or {},
    }
    arrays = {f"param_{k}": v for k, v in params.flat().items()}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint; exact numeric round trip of every parameter."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("schema") != CHECKPOINT_SCHEMA:
            raise ConfigError(f"unsupported checkpoint schema {meta.get('schema')!r}")
        arch = Architecture(**meta["arch"])
        values = {k[len("param_"):]: z[k] for k in z.files if k.startswith("param_")}
    template = init_params(0, arch)
    params = template.replace_flat(values)
    missing = set(template.flat()) - set(values)
    if missing:
        raise ConfigError(f"checkpoint missing parameters: {sorted(missing)}")
    return params, meta
