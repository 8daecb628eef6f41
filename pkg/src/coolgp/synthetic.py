"""Synthetic cross-domain datasets.

Two streams are warped views of one shared latent function over the
standardized domain: f_s(x) = sigma_s * u(W_s x).  The latent values are an
exact joint GP draw over all pooled projected inputs (chunked conditional
sampling keeps memory bounded), so the generator doubles as ground truth for
RMSE evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .kernels import _sqdist

GEN_JITTER = 1e-8

Block = Tuple[np.ndarray, np.ndarray]


def random_projection(d: int, scale: float, seed: int) -> np.ndarray:
    """Random orthogonal d x d matrix scaled by a variation factor."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return scale * q


@dataclass
class SyntheticSpec:
    d: int = 6
    W1: Optional[np.ndarray] = None  # defaults: seeded orthogonal, scales 1.5 / 0.7
    W2: Optional[np.ndarray] = None
    sigma_s: float = 1.0
    sigma_n: float = 0.1
    n_blocks: int = 100  # per stream
    block_size: int = 20
    n_test: int = 400  # total, split across both domains
    seed: int = 0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")
        if self.n_test < 1:
            raise ValueError("n_test must be at least 1")
        if self.sigma_s <= 0 or self.sigma_n < 0:
            raise ValueError("sigma_s must be positive and sigma_n nonnegative")
        if self.W1 is None:
            self.W1 = random_projection(self.d, 1.5, self.seed + 101)
        if self.W2 is None:
            self.W2 = random_projection(self.d, 0.7, self.seed + 202)


def _gp_draw(T: np.ndarray, rng: np.random.Generator, chunk: int = 2000) -> np.ndarray:
    """Exact joint draw from N(0, k_uu(T, T) + jitter I) at the rows of T.

    Chunks are drawn conditionally on all previous ones by extending the
    Cholesky factor blockwise, so the draw stays exact at paper scale without
    factorizing the full pooled Gram matrix in one shot.
    """
    n = T.shape[0]
    z_all = np.zeros(0)
    f = np.zeros(n)
    L = np.zeros((n, n))
    done = 0
    while done < n:
        hi = min(done + chunk, n)
        new = T[done:hi]
        K_new = np.exp(-0.5 * _sqdist(new, new)) + GEN_JITTER * np.eye(hi - done)
        if done > 0:
            K_cross = np.exp(-0.5 * _sqdist(new, T[:done]))
            B = sla.solve_triangular(L[:done, :done], K_cross.T, lower=True).T
            L[done:hi, :done] = B
            S = K_new - B @ B.T
        else:
            S = K_new
        try:
            L_new = np.linalg.cholesky(0.5 * (S + S.T))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "joint kernel not positive definite after jitter; increase the "
                "jitter or reduce the number of pooled points"
            ) from exc
        L[done:hi, done:hi] = L_new
        z = rng.standard_normal(hi - done)
        f[done:hi] = L[done:hi, :done] @ z_all + L_new @ z
        z_all = np.concatenate([z_all, z])
        done = hi
    return f


def generate(spec: SyntheticSpec) -> tuple[List[Block], List[Block], List[Block]]:
    """Draw both streams and the mixed test set from one latent function.

    Returns (stream1 blocks, stream2 blocks, testsets) where testsets holds
    one (X, y_true) pair per domain; test targets are the noiseless latent
    values.  Fully reproducible from spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    n_train = spec.n_blocks * spec.block_size
    X1 = rng.uniform(-1.0, 1.0, size=(n_train, spec.d))
    X2 = rng.uniform(-1.0, 1.0, size=(n_train, spec.d))
    n_test_1 = spec.n_test // 2
    n_test_2 = spec.n_test - n_test_1
    Xt1 = rng.uniform(-1.0, 1.0, size=(n_test_1, spec.d))
    Xt2 = rng.uniform(-1.0, 1.0, size=(n_test_2, spec.d))

    T = np.vstack(
        [X1 @ spec.W1.T, X2 @ spec.W2.T, Xt1 @ spec.W1.T, Xt2 @ spec.W2.T]
    )
    f = spec.sigma_s * _gp_draw(T, rng)
    f1, f2, ft1, ft2 = np.split(
        f, np.cumsum([n_train, n_train, n_test_1])
    )
    y1 = f1 + spec.sigma_n * rng.standard_normal(n_train)
    y2 = f2 + spec.sigma_n * rng.standard_normal(n_train)

    def to_blocks(X: np.ndarray, y: np.ndarray) -> List[Block]:
        return [
            (
                X[i * spec.block_size : (i + 1) * spec.block_size],
                y[i * spec.block_size : (i + 1) * spec.block_size],
            )
            for i in range(spec.n_blocks)
        ]

    streams1 = to_blocks(X1, y1)
    streams2 = to_blocks(X2, y2)
    testsets = [(Xt1, ft1), (Xt2, ft2)]
    return streams1, streams2, testsets


# -- on-disk format ----------------------------------------------------------


def write_dataset(blocks: Sequence[Block], path) -> None:
    """Comma-separated file with header block_id,x1,...,xd,y."""
    d = None
    for X, _ in blocks:
        d = np.atleast_2d(X).shape[1]
        break
    with open(path, "w") as fh:
        if d is None:
            fh.write("block_id,y\n")
            return
        fh.write("block_id," + ",".join(f"x{i + 1}" for i in range(d)) + ",y\n")
        for block_id, (X, y) in enumerate(blocks):
            X = np.atleast_2d(X)
            y = np.asarray(y).ravel()
            for row, target in zip(X, y):
                vals = ",".join(f"{v:.17g}" for v in row)
                fh.write(f"{block_id},{vals},{target:.17g}\n")


def read_dataset(path) -> List[Block]:
    """Parse a dataset file back into blocks; rejects malformed rows."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if cols[0] != "block_id" or cols[-1] != "y":
            raise ValueError(f"{path}:1: malformed header {header!r}")
        d = len(cols) - 2
        rows_by_block: dict[int, list] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != d + 2:
                raise ValueError(
                    f"{path}:{lineno}: expected {d + 2} fields, got {len(parts)}"
                )
            try:
                block_id = int(parts[0])
                vals = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            rows_by_block.setdefault(block_id, []).append(vals)
    blocks = []
    for block_id in sorted(rows_by_block):
        arr = np.array(rows_by_block[block_id])
        blocks.append((arr[:, :d], arr[:, d]))
    return blocks
