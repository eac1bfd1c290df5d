"""Dense small-matrix kernels with analytic gradients.

Forward/backward pairs for the layers used by the communication agents, an
Adam optimizer, a Gumbel-Softmax sampler, PCA over message clouds, and a
central-difference gradient checker. Everything operates on plain numpy
arrays (row-major, float32 working precision; float64 inputs stay float64 so
the gradient checker can run in double precision). No global state: RNGs are
always explicit arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .validation import check_matrix, check_vector

GUMBEL_EPS = 1e-10


# ---------------------------------------------------------------------------
# linear layer


def linear_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Y[i] = W @ X[i] + b for each row i of X. Output shape (X.rows, W.rows)."""
    W = check_matrix(W, "W")
    b = check_vector(b, "b")
    X = check_matrix(X, "X")
    if X.shape[1] != W.shape[1]:
        raise ShapeError(
            f"linear_forward: X has {X.shape[1]} columns but W is {W.shape}"
        )
    if b.shape[0] != W.shape[0]:
        raise ShapeError(f"linear_forward: b has length {b.shape[0]}, W is {W.shape}")
    return X @ W.T + b


def linear_backward(grad_out: np.ndarray, X: np.ndarray, W: np.ndarray):
    """Reverse-mode rule for linear_forward.

    grad_W = grad_out.T @ X, grad_b = column-sum of grad_out,
    grad_X = grad_out @ W.
    """
    grad_out = check_matrix(grad_out, "grad_out")
    X = check_matrix(X, "X")
    W = check_matrix(W, "W")
    if grad_out.shape != (X.shape[0], W.shape[0]):
        raise ShapeError(
            f"linear_backward: grad_out {grad_out.shape} does not match "
            f"forward output {(X.shape[0], W.shape[0])}"
        )
    grad_W = grad_out.T @ X
    grad_b = grad_out.sum(axis=0)
    grad_X = grad_out @ W
    return grad_W, grad_b, grad_X


def relu(X: np.ndarray) -> np.ndarray:
    return np.maximum(X, 0)


def relu_backward(grad_out: np.ndarray, X: np.ndarray) -> np.ndarray:
    # gradient is masked where the pre-activation was <= 0
    if grad_out.shape != X.shape:
        raise ShapeError(f"relu_backward: grad {grad_out.shape} vs input {X.shape}")
    return grad_out * (X > 0)


# ---------------------------------------------------------------------------
# cosine similarity


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = check_vector(u, "u")
    v = check_vector(v, "v")
    if u.shape != v.shape:
        raise ShapeError(f"cosine_similarity: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("cosine_similarity: zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def cosine_similarity_backward(u: np.ndarray, v: np.ndarray, grad: float = 1.0):
    """d cos(u,v) / du and / dv, scaled by the upstream scalar grad."""
    u = check_vector(u, "u")
    v = check_vector(v, "v")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("cosine_similarity: zero-norm vector")
    uh = u / nu
    vh = v / nv
    c = float(uh @ vh)
    grad_u = grad * (vh - c * uh) / nu
    grad_v = grad * (uh - c * vh) / nv
    return grad_u, grad_v


def cosine_matrix(U: np.ndarray, V: np.ndarray):
    """Pairwise cosine similarities between rows of U and rows of V.

    Returns (C, cache); C[i, j] = cos(U[i], V[j]). The cache feeds
    cosine_matrix_backward.
    """
    U = check_matrix(U, "U")
    V = check_matrix(V, "V")
    if U.shape[1] != V.shape[1]:
        raise ShapeError(f"cosine_matrix: {U.shape} vs {V.shape}")
    nu = np.linalg.norm(U, axis=1, keepdims=True)
    nv = np.linalg.norm(V, axis=1, keepdims=True)
    if np.any(nu == 0):
        raise DegenerateInputError("cosine_matrix: zero-norm row in U")
    if np.any(nv == 0):
        raise DegenerateInputError("cosine_matrix: zero-norm row in V")
    Uh = U / nu
    Vh = V / nv
    C = Uh @ Vh.T
    return C, (Uh, Vh, nu, nv, C)


def cosine_matrix_backward(grad_C: np.ndarray, cache):
    """Gradients of sum(grad_C * C) w.r.t. the original U and V rows."""
    Uh, Vh, nu, nv, C = cache
    if grad_C.shape != C.shape:
        raise ShapeError(f"cosine_matrix_backward: {grad_C.shape} vs {C.shape}")
    # dC_ij/dU_i = (Vh_j - C_ij Uh_i) / |U_i|
    row_inner = (grad_C * C).sum(axis=1, keepdims=True)
    grad_U = (grad_C @ Vh - row_inner * Uh) / nu
    col_inner = (grad_C * C).sum(axis=0)[:, None]
    grad_V = (grad_C.T @ Uh - col_inner * Vh) / nv
    return grad_U, grad_V


# ---------------------------------------------------------------------------
# softmax / cross-entropy


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stabilized softmax (max subtraction is mandatory)."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy over rows plus the gradient w.r.t. logits.

    loss = mean_i -log softmax(logits)[i, targets[i]]
    grad = (softmax - one_hot) / rows
    """
    logits = check_matrix(logits, "logits")
    targets = np.asarray(targets)
    n, k = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"targets must have shape ({n},), got {targets.shape}")
    if np.any(targets < 0) or np.any(targets >= k):
        bad = int(targets[(targets < 0) | (targets >= k)][0])
        raise IndexError(f"target index {bad} out of range for {k} columns")
    shifted = logits.astype(np.float64) - np.max(logits, axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logz - shifted[rows, targets]))
    probs = softmax(logits, axis=1)
    grad = probs.copy()
    grad[rows, targets] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


# ---------------------------------------------------------------------------
# gumbel-softmax


def gumbel_noise(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Standard Gumbel(0,1) draws: -log(-log(U)), U clipped away from {0,1}."""
    u = rng.random(size=shape)
    u = np.clip(u, GUMBEL_EPS, 1.0 - GUMBEL_EPS)
    return (-np.log(-np.log(u))).astype(dtype)


def gumbel_softmax_sample(
    logits: np.ndarray,
    tau: float,
    rng: np.random.Generator | None = None,
    hard: bool = False,
    noise: np.ndarray | None = None,
):
    """Gumbel-Softmax relaxation of a categorical sample.

    Soft mode returns softmax((logits + g)/tau); hard mode returns the one-hot
    at the soft argmax while the returned cache still backpropagates through
    the soft relaxation (straight-through). Pass `noise` to freeze the Gumbel
    draw (gradient checking).
    """
    if tau <= 0:
        raise ParameterError(f"gumbel tau must be > 0, got {tau}")
    logits = np.asarray(logits)
    if noise is None:
        if rng is None:
            raise ParameterError("gumbel_softmax_sample needs an rng or frozen noise")
        noise = gumbel_noise(logits.shape, rng, dtype=logits.dtype)
    elif noise.shape != logits.shape:
        raise ShapeError(f"noise shape {noise.shape} vs logits {logits.shape}")
    y = softmax((logits + noise) / tau, axis=-1)
    if hard:
        idx = np.argmax(y, axis=-1)
        sample = np.zeros_like(y)
        if y.ndim == 1:
            sample[idx] = 1.0
        else:
            sample[np.arange(y.shape[0]), idx] = 1.0
    else:
        sample = y
    return sample, GumbelCache(soft=y, tau=tau)


@dataclass
class GumbelCache:
    soft: np.ndarray
    tau: float


def gumbel_softmax_backward(grad_sample: np.ndarray, cache: GumbelCache) -> np.ndarray:
    """Gradient w.r.t. the logits, always through the soft relaxation."""
    y = cache.soft
    if grad_sample.shape != y.shape:
        raise ShapeError(f"gumbel backward: {grad_sample.shape} vs {y.shape}")
    inner = (grad_sample * y).sum(axis=-1, keepdims=True)
    return y * (grad_sample - inner) / cache.tau


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter first/second moments plus hyperparameters.

    Moments are allocated lazily on the first step so the state can be
    declared before parameter shapes are known.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One Adam update with bias correction, in place over `params`."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam_step: grad {g.shape} vs param {p.shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        p -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# PCA (cyclic Jacobi eigendecomposition; covariance is at most message_dim²)


def jacobi_eigh(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 50):
    """Eigenvalues/vectors of a small symmetric matrix via cyclic Jacobi rotations.

    Returns eigenvalues in descending order and eigenvectors as columns.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ShapeError(f"jacobi_eigh: matrix must be square, got {A.shape}")
    V = np.eye(n)
    scale = np.max(np.abs(A)) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = A[:, p].copy()
                rot_q = A[:, q].copy()
                A[:, p] = c * rot_p - s * rot_q
                A[:, q] = s * rot_p + c * rot_q
                rot_p = A[p, :].copy()
                rot_q = A[q, :].copy()
                A[p, :] = c * rot_p - s * rot_q
                A[q, :] = s * rot_p + c * rot_q
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w)
    return w[order], V[:, order]


@dataclass
class PcaResult:
    eigenvalues: np.ndarray  # descending
    ratios: np.ndarray  # explained-variance ratios, sum to 1
    components: np.ndarray  # rows are principal axes
    correlation: np.ndarray  # Pearson correlations of raw dimensions


def pca(rows: np.ndarray) -> PcaResult:
    """PCA of mean-centered rows plus the raw-dimension correlation matrix."""
    rows = check_matrix(rows, "rows")
    n, d = rows.shape
    if n < 2:
        raise InsufficientDataError(f"pca needs at least 2 rows, got {n}")
    X = rows.astype(np.float64)
    X -= X.mean(axis=0)
    cov = (X.T @ X) / (n - 1)
    w, V = jacobi_eigh(cov)
    w = np.maximum(w, 0.0)
    total = w.sum()
    if total == 0.0:
        raise DegenerateInputError("pca: all rows identical, zero covariance")
    ratios = w / total
    std = np.sqrt(np.diag(cov))
    denom = np.outer(std, std)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, cov / np.where(denom == 0, 1, denom), 0.0)
    np.fill_diagonal(corr, 1.0)
    return PcaResult(
        eigenvalues=w, ratios=ratios, components=V.T, correlation=corr
    )


# ---------------------------------------------------------------------------
# gradient checker


def grad_check(computation, inputs: dict, h: float = 1e-3) -> float:
    """Worst relative error between analytic and central-difference gradients.

    `computation(inputs) -> (loss, grads)` must be deterministic (freeze any
    noise) and scalar-valued. Arrays are promoted to float64 for the check.
    """
    inputs = {k: np.asarray(v, dtype=np.float64).copy() for k, v in inputs.items()}
    _, analytic = computation(inputs)
    worst = 0.0
    for name, arr in inputs.items():
        a = np.asarray(analytic[name], dtype=np.float64)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            loss_plus, _ = computation(inputs)
            flat[i] = orig - h
            loss_minus, _ = computation(inputs)
            flat[i] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            ai = a.reshape(-1)[i]
            denom = max(abs(ai), abs(numeric))
            if denom < 1e-8:
                err = abs(ai - numeric)
            else:
                err = abs(ai - numeric) / denom
            worst = max(worst, err)
    return worst
