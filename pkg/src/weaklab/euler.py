"""Euler scheme simulation: single-resolution paths, coupled ladders sharing
one Brownian motion, exact Gaussian laws for affine models, and moment
estimation.

Monte-Carlo reductions are chunked over fixed-size substreams and merged
in stream order with compensated summation, so results are bit-identical
regardless of how many workers run the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gaussian import AffineGaussianDensity, GaussianLaw
from .models import SdeModel
from .rng import RngStream, normals_from

CHUNK = 1 << 16


class SimulationBlowup(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


def _check_finite(x: np.ndarray, step: int):
    if not np.all(np.isfinite(x)):
        raise SimulationBlowup(step)


def _steps(n: int, t: float) -> tuple[int, float]:
    """Full step count floor(n t) and the trailing partial step length."""
    k = int(math.floor(n * t + 1e-12))
    return k, t - k / n


def simulate_euler(model: SdeModel, x, n: int, t: float, rng: RngStream,
                   size: int) -> np.ndarray:
    """Endpoints X_t^{n,x} for `size` independent paths, shape (size, d)."""
    if n < 1:
        raise ValueError("n >= 1 required")
    gen = rng.generator()
    d, r = model.dim_d, model.dim_r
    x0 = np.broadcast_to(np.atleast_1d(np.asarray(x, dtype=float)), (size, d)).copy()
    k, dt_last = _steps(n, t)
    dt = 1.0 / n
    state = x0
    for step in range(k):
        dB = math.sqrt(dt) * normals_from(gen, (size, r))
        state = state + model.drift(state) * dt + np.einsum(
            "nij,nj->ni", model.diffusion(state), dB)
        _check_finite(state, step)
    if dt_last > 1e-14:
        dB = math.sqrt(dt_last) * normals_from(gen, (size, r))
        state = state + model.drift(state) * dt_last + np.einsum(
            "nij,nj->ni", model.diffusion(state), dB)
        _check_finite(state, k)
    return state


def simulate_ladder(model: SdeModel, x, ns, t: float, rng: RngStream,
                    size: int) -> dict[int, np.ndarray]:
    """Endpoints at every resolution in `ns`, driven by one Brownian motion.

    Every n must divide max(ns); coarse increments are the exact sums of
    the fine increments they span.
    """
    ns = sorted(set(int(n) for n in ns))
    n_fine = ns[-1]
    for n in ns:
        if n_fine % n:
            raise ValueError(f"resolution {n} does not divide finest {n_fine}")
    gen = rng.generator()
    d, r = model.dim_d, model.dim_r
    x0 = np.broadcast_to(np.atleast_1d(np.asarray(x, dtype=float)), (size, d)).copy()
    kf, dtp = _steps(n_fine, t)
    dt_fine = 1.0 / n_fine
    states = {n: x0.copy() for n in ns}
    buffers = {n: np.zeros((size, r)) for n in ns}
    done = {n: 0 for n in ns}  # full coarse steps taken

    def coarse_step(n, dt):
        dB = buffers[n]
        states[n] = states[n] + model.drift(states[n]) * dt + np.einsum(
            "nij,nj->ni", model.diffusion(states[n]), dB)
        _check_finite(states[n], done[n])
        buffers[n] = np.zeros((size, r))

    for j in range(1, kf + 1):
        dB = math.sqrt(dt_fine) * normals_from(gen, (size, r))
        for n in ns:
            buffers[n] += dB
            if j % (n_fine // n) == 0:
                coarse_step(n, 1.0 / n)
                done[n] += 1
    if dtp > 1e-14:
        dB = math.sqrt(dtp) * normals_from(gen, (size, r))
        for n in ns:
            buffers[n] += dB
    for n in ns:
        dt_last = t - done[n] / n
        if dt_last > 1e-14:
            coarse_step(n, dt_last)
    return states


def simulate_coupled(model: SdeModel, x, n: int, t: float, rng: RngStream,
                     size: int) -> tuple[np.ndarray, np.ndarray]:
    """(coarse X^{n}, fine X^{2n}) endpoints sharing one Brownian motion."""
    out = simulate_ladder(model, x, [n, 2 * n], t, rng, size)
    return out[n], out[2 * n]


def euler_affine_transport(model: SdeModel, n: int, t: float):
    """(A, c, V) with law of X_t^{n,x} = N(A x + c, V) for affine models."""
    if model.affine is None:
        raise ValueError(f"model {model.name!r} is not affine with constant diffusion")
    M, cvec, S = model.affine
    d = model.dim_d
    a = S @ S.T
    A = np.eye(d)
    cacc = np.zeros(d)
    V = np.zeros((d, d))
    k, dt_last = _steps(n, t)
    for dt in [1.0 / n] * k + ([dt_last] if dt_last > 1e-14 else []):
        G = np.eye(d) + M * dt
        A = G @ A
        cacc = G @ cacc + cvec * dt
        V = G @ V @ G.T + a * dt
    return A, cacc, V


def euler_exact_law_affine(model: SdeModel, x, n: int, t: float) -> GaussianLaw:
    A, c, V = euler_affine_transport(model, n, t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return GaussianLaw(A @ x + c, V)


def gbm_euler_mean(mu: float, x: float, n: int, t: float) -> float:
    """Exact E[X_t^{n,x}] for geometric Brownian motion: the mean gains a
    factor (1 + mu dt) per Euler step."""
    k, dt_last = _steps(n, t)
    m = float(x) * (1.0 + mu / n) ** k
    if dt_last > 1e-14:
        m *= 1.0 + mu * dt_last
    return m


def euler_density_1d(model: SdeModel, n: int) -> AffineGaussianDensity:
    """Exact transition density of the 1-D Euler chain of an affine model."""
    if model.affine is None or model.dim_d != 1:
        raise ValueError("exact Euler density requires a 1-D affine model")

    @lru_cache(maxsize=None)
    def coef(t: float) -> tuple[float, float, float]:
        A, c, V = euler_affine_transport(model, n, t)
        return float(A[0, 0]), float(c[0]), float(V[0, 0])

    return AffineGaussianDensity(lambda t: coef(t)[0], lambda t: coef(t)[1],
                                 lambda t: coef(t)[2])


@dataclass
class MeanAccumulator:
    """Deterministic streaming mean/variance over ordered chunks."""

    total: int = 0
    parts_sum: list = None
    parts_sq: list = None

    def __post_init__(self):
        self.parts_sum, self.parts_sq = [], []

    def add(self, values: np.ndarray):
        self.total += values.size
        self.parts_sum.append(float(np.sum(values)))
        self.parts_sq.append(float(np.sum(values * values)))

    def result(self) -> tuple[float, float]:
        s = math.fsum(self.parts_sum)
        sq = math.fsum(self.parts_sq)
        mean = s / self.total
        var = max(sq / self.total - mean * mean, 0.0)
        se = math.sqrt(var / self.total)
        return mean, se


def worker_count() -> int:
    return max(1, int(os.environ.get("WEAKLAB_WORKERS", "1")))


def mc_reduce(chunk_fn, N: int, rng: RngStream) -> tuple[float, float]:
    """Mean and standard error of chunk_fn(stream, size) over N samples.

    Chunk boundaries are fixed by CHUNK, and partial results are merged in
    substream order, so the value is independent of the worker count.
    """
    sizes = [CHUNK] * (N // CHUNK) + ([N % CHUNK] if N % CHUNK else [])
    streams = [rng.substream(i) for i in range(len(sizes))]
    acc = MeanAccumulator()
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for vals in pool.map(chunk_fn, streams, sizes):
                acc.add(vals)
    else:
        for st, sz in zip(streams, sizes):
            acc.add(chunk_fn(st, sz))
    return acc.result()


def mc_reduce_multi(chunk_fn, N: int, rng: RngStream, k: int):
    """Columnwise mean/standard error of chunk_fn(stream, size) -> (size, k).

    Same chunking and merge order as mc_reduce, so each column is
    bit-identical to a standalone run on the same stream.
    """
    sizes = [CHUNK] * (N // CHUNK) + ([N % CHUNK] if N % CHUNK else [])
    streams = [rng.substream(i) for i in range(len(sizes))]
    accs = [MeanAccumulator() for _ in range(k)]

    def absorb(vals):
        for j in range(k):
            accs[j].add(vals[:, j])

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for vals in pool.map(chunk_fn, streams, sizes):
                absorb(vals)
    else:
        for st, sz in zip(streams, sizes):
            absorb(chunk_fn(st, sz))
    out = [a.result() for a in accs]
    return np.array([m for m, _ in out]), np.array([s for _, s in out])


def empirical_moment(model: SdeModel, x, n: int, t: float, q: int, N: int,
                     rng: RngStream):
    """Monte-Carlo estimate of E ||X_t^{n,x}||^q with standard error."""
    if q % 2 or q > 8:
        raise ValueError("q must be an even integer <= 8")

    def chunk(stream, size):
        pts = simulate_euler(model, x, n, t, stream, size)
        return np.linalg.norm(pts, axis=1) ** q

    return mc_reduce(chunk, N, rng)
