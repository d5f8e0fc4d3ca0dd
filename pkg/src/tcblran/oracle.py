"""Reference implementations used only by the test suite.

Everything here trades speed for being easy to inspect: the loss oracle
is a literal transcription of the loss definitions with explicit nested
loops and per-sample vectors, the fine-step integrator cross-checks one
RK4 step against many substeps, and the synthetic system provides an
exactly-bilinear discrete truth with a known optimal model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset, LiftMap, random_piecewise_control
from .dynamics import ControlAffineSystem, Trajectory, rk4_step
from .errors import NumericError
from .losses import Batch, LossWeights
from .model import Architecture, ModelParams

__all__ = [
    "fine_step_reference",
    "loss_oracle",
    "SyntheticBilinearSystem",
    "make_synthetic",
    "synthetic_dataset",
]


def fine_step_reference(system: ControlAffineSystem, x0: np.ndarray,
                        controls: np.ndarray, dt: float,
                        substeps: int = 100) -> Trajectory:
    """Trajectory on the coarse grid, each interval taken as RK4 substeps.

    With substeps=1 this is exactly simulate(); larger values serve as the
    ground truth for integrator accuracy tests.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    controls = np.asarray(controls, dtype=np.float64)
    if controls.ndim == 1:
        controls = controls[:, None]
    h = dt / substeps
    states = np.empty((len(controls) + 1, system.state_dim))
    states[0] = np.asarray(x0, dtype=np.float64)
    for k in range(len(controls)):
        x = states[k]
        for _ in range(substeps):
            x = rk4_step(system, x, controls[k], h)
        states[k + 1] = x
    return Trajectory(states=states, controls=controls.copy(), dt=dt)


def loss_oracle(params: ModelParams, batch: Batch, weights: LossWeights) -> dict:
    """Loss terms computed sample by sample with explicit loops."""
    x, u = batch.states, batch.controls
    m, k_m, k_tm = batch.m, weights.k_m, weights.k_tm

    def enc(v):
        if params.enc_w1 is not None:
            v = np.tanh(v @ params.enc_w1 + params.enc_b1)
        return v @ params.enc_w2 + params.enc_b2

    def dec(v):
        if params.dec_w1 is not None:
            v = np.tanh(v @ params.dec_w1 + params.dec_b1)
        return v @ params.dec_w2 + params.dec_b2

    def step(z, uk):
        out = params.a_tilde @ z
        for i, bi in enumerate(params.b_tilde):
            out = out + uk[i] * (bi @ z)
        return out

    def roll(z, pos, k):
        # Advance z from window position pos by k steps under the stored controls.
        for j in range(k):
            z = step(z, u[pos + j])
        return z

    def ssq(v) -> float:
        return float(np.dot(v, v))

    l_id = 0.0
    for n in range(m):
        l_id += ssq(dec(enc(x[n])) - x[n])
    l_id /= 2.0 * m

    l_fwd = 0.0
    for k in range(1, k_m + 1):
        for n in range(m):
            l_fwd += ssq(dec(roll(enc(x[n]), n, k)) - x[n + k])
    l_fwd /= 2.0 * k_m * m

    acc = 0.0
    for q in range(1, k_tm):
        l_q = 0.0
        for k in range(1, k_tm - q + 1):
            l_k = 0.0
            for p in range(q, m):
                z_short = roll(enc(x[p]), p, k)
                z_long = roll(enc(x[p - q]), p - q, k + q)
                l_k += ssq(z_short - z_long)
            l_q += l_k / (m - q)
        acc += l_q / (k_tm - q)
    l_tc = acc / (2.0 * (k_tm - 1))

    total = (weights.gamma_id * l_id + weights.gamma_fwd * l_fwd
             + weights.gamma_tc * l_tc)
    return {"L_id": l_id, "L_fwd": l_fwd, "L_tc": l_tc, "L_tot": total}


@dataclass(frozen=True)
class SyntheticBilinearSystem:
    """A system whose exact discrete dynamics are bilinear in (state, input).

    ``a_tilde`` and ``b_tilde`` are the exact one-step propagator pieces:
    x' = a_tilde @ x + sum_i u_i * (b_tilde[i] @ x). The continuous
    matrices they discretize (a_tilde = I + a_cont * dt) are kept for
    reference. ``propagate`` applies the same arithmetic as the model's
    bilinear step, so a model holding these matrices is exact.
    """

    a_cont: np.ndarray
    b_cont: tuple[np.ndarray, ...]
    dt: float
    seed: int

    @property
    def state_dim(self) -> int:
        return self.a_cont.shape[0]

    @property
    def input_dim(self) -> int:
        return len(self.b_cont)

    @property
    def a_tilde(self) -> np.ndarray:
        return np.eye(self.state_dim) + self.a_cont * self.dt

    @property
    def b_tilde(self) -> list[np.ndarray]:
        return [b * self.dt for b in self.b_cont]

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = self.a_tilde @ x
        for ui, bi in zip(np.atleast_1d(u), self.b_tilde):
            out = out + ui * (bi @ x)
        return out

    def propagate(self, x0: np.ndarray, controls: np.ndarray) -> np.ndarray:
        controls = np.asarray(controls, dtype=np.float64)
        if controls.ndim == 1:
            controls = controls[:, None]
        states = np.empty((len(controls) + 1, self.state_dim))
        states[0] = np.asarray(x0, dtype=np.float64)
        for k in range(len(controls)):
            states[k + 1] = self.step(states[k], controls[k])
        return states

    def true_params(self) -> ModelParams:
        """Exact model: identity linear encoder/decoder, true latent maps."""
        n = self.state_dim
        arch = Architecture(input_dim=n, latent_dim=n, encoder_hidden=0,
                            decoder_hidden=0, input_count=self.input_dim)
        eye = np.eye(n)
        return ModelParams(arch=arch, enc_w1=None, enc_b1=None, enc_w2=eye.copy(),
                           enc_b2=np.zeros(n), dec_w1=None, dec_b1=None,
                           dec_w2=eye.copy(), dec_b2=np.zeros(n),
                           a_tilde=self.a_tilde, b_tilde=self.b_tilde)


def make_synthetic(seed: int, n: int = 4, dt: float = 0.1, *,
                   input_dim: int = 1, n_samples: int = 500,
                   n_train: int | None = None
                   ) -> tuple[SyntheticBilinearSystem, Dataset]:
    """Draw a stable synthetic system and a dataset generated by it.

    Stability means spectral radius of (I + A dt) < 1. A is a lightly
    damped random skew form, so draws are almost always stable; an
    unstable draw is resampled with the seed incremented.
    """
    if n < 2 or dt <= 0:
        raise ValueError("need n >= 2 and dt > 0")
    system = None
    for attempt in range(100):
        rng = np.random.default_rng(seed + attempt)
        g = rng.standard_normal((n, n))
        a = (g - g.T) * (0.15 / np.sqrt(n)) - 0.01 * np.eye(n)
        radius = float(np.max(np.abs(np.linalg.eigvals(np.eye(n) + a * dt))))
        if radius < 1.0:
            b = tuple(rng.standard_normal((n, n)) * (0.8 / np.sqrt(n))
                      for _ in range(input_dim))
            system = SyntheticBilinearSystem(a_cont=a, b_cont=b, dt=dt,
                                             seed=seed + attempt)
            break
    if system is None:
        raise NumericError(f"no stable synthetic draw within 100 attempts of seed {seed}")
    dataset = synthetic_dataset(system, control_seed=seed + 1000,
                                n_train=n_samples if n_train is None else n_train,
                                n_samples=n_samples)
    return system, dataset


def synthetic_dataset(system: SyntheticBilinearSystem, *, control_seed: int,
                      n_train: int, n_samples: int = 500,
                      control_range: tuple[float, float] = (-0.15, 0.15)) -> Dataset:
    """Exact-propagator dataset in the system's own coordinates (lift = I)."""
    rng = np.random.default_rng((system.seed, 17))
    x0 = rng.standard_normal(system.state_dim)
    x0 /= np.linalg.norm(x0)
    controls = random_piecewise_control(control_seed, n_samples - 1,
                                        control_range[0], control_range[1],
                                        system.input_dim)
    states = system.propagate(x0, controls)
    lift_map = LiftMap(q=np.eye(system.state_dim), seed=-1)
    return Dataset(lift_map=lift_map, clean_states=states,
                   lifted_states=states.copy(), controls=controls, dt=system.dt,
                   n_train=n_train, snr_db=None, noise_seed=0,
                   control_seed=control_seed, system_name="synthetic", x0=x0)
