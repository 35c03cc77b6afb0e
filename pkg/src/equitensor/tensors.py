"""Symmetric-tensor algebra over Mandel components.

Symmetric d x d tensors (d in {2, 3}) are represented throughout the
library by their Mandel component vectors:

    d=2: (s11, s22, sqrt(2)*s12)
    d=3: (s11, s22, s33, sqrt(2)*s23, sqrt(2)*s13, sqrt(2)*s12)

This orthonormal convention makes the Euclidean norm of the vector equal
to the Frobenius norm of the tensor, and the double contraction of two
symmetric tensors equal to the dot product of their vectors.  Fourth-order
tensors with minor symmetries are square Mandel matrices acting on these
vectors.  The Mandel vector is the canonical storage form: values are
passed around and serialized as-is, so round trips through the library
are bitwise exact.  Conversion to and from dense d x d matrices
(`from_mandel` / `to_mandel`) costs one floating-point rounding on the
off-diagonal entries and is used only at algorithmic boundaries
(eigensolvers, rotation sampling).

All functions accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

import numpy as np

SQRT2 = float(np.sqrt(2.0))

_MANDEL_OFFDIAG = {2: [(0, 1)], 3: [(1, 2), (0, 2), (0, 1)]}


def mandel_size(dim: int) -> int:
    """Number of independent components of a symmetric dim x dim tensor."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return dim * (dim + 1) // 2


def dim_of_mandel(m: int) -> int:
    """Inverse of mandel_size."""
    if m == 3:
        return 2
    if m == 6:
        return 3
    raise ValueError(f"not a Mandel vector length: {m}")


def mandel_basis(dim: int) -> np.ndarray:
    """Orthonormal basis matrices B_k with mandel(S)_k = <B_k, S>_F.

    Returns an array of shape (m, dim, dim).
    """
    m = mandel_size(dim)
    basis = np.zeros((m, dim, dim))
    for k in range(dim):
        basis[k, k, k] = 1.0
    for k, (i, j) in enumerate(_MANDEL_OFFDIAG[dim]):
        basis[dim + k, i, j] = basis[dim + k, j, i] = 1.0 / SQRT2
    return basis


def mandel_identity(dim: int) -> np.ndarray:
    """Mandel components of the identity tensor."""
    v = np.zeros(mandel_size(dim))
    v[:dim] = 1.0
    return v


def to_mandel(S: np.ndarray) -> np.ndarray:
    """Mandel components of symmetric matrices with shape (..., d, d)."""
    d = S.shape[-1]
    m = mandel_size(d)
    v = np.empty(S.shape[:-2] + (m,))
    for k in range(d):
        v[..., k] = S[..., k, k]
    for k, (i, j) in enumerate(_MANDEL_OFFDIAG[d]):
        v[..., d + k] = SQRT2 * S[..., i, j]
    return v


def from_mandel(v: np.ndarray) -> np.ndarray:
    """Dense symmetric matrices, shape (..., d, d), from Mandel components."""
    v = np.asarray(v)
    d = dim_of_mandel(v.shape[-1])
    S = np.zeros(v.shape[:-1] + (d, d))
    for k in range(d):
        S[..., k, k] = v[..., k]
    for k, (i, j) in enumerate(_MANDEL_OFFDIAG[d]):
        off = v[..., d + k] / SQRT2
        S[..., i, j] = off
        S[..., j, i] = off
    return S


def trace_mandel(v: np.ndarray) -> np.ndarray:
    """Trace of the tensors represented by Mandel vectors."""
    d = dim_of_mandel(np.asarray(v).shape[-1])
    return np.asarray(v)[..., :d].sum(axis=-1)


def trace_pair(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """tr(w x) for symmetric tensors = dot product of Mandel vectors."""
    w, x = np.asarray(w), np.asarray(x)
    if w.shape[-1] != x.shape[-1]:
        raise ValueError("Mandel dimension mismatch")
    return np.einsum("...a,...a->...", w, x)


def contract_weight(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Double contraction W : x of a 4th-order tensor (Mandel matrix) with
    a symmetric tensor (Mandel vector)."""
    W, x = np.asarray(W), np.asarray(x)
    if W.shape[-1] != x.shape[-1]:
        raise ValueError("Mandel dimension mismatch")
    return np.einsum("...ab,...b->...a", W, x)


def mandel_rotation(Q: np.ndarray) -> np.ndarray:
    """Mandel matrix A(Q) of the conjugation map S -> Q^T S Q.

    A(Q) is orthogonal; column b equals mandel(Q^T B_b Q).  Accepts
    batched Q with shape (..., d, d) and returns (..., m, m).
    """
    Q = np.asarray(Q)
    d = Q.shape[-1]
    B = mandel_basis(d)
    # Q^T B_b Q for every basis matrix, then read off Mandel components.
    QtBQ = np.einsum("...ji,kjl,...lm->k...im", Q, B, Q)
    cols = to_mandel(QtBQ)  # (m, ..., m): cols[b, ..., a] = A[..., a, b]
    return np.moveaxis(cols, 0, -1)


def rotate_sym(v: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Group action S -> Q^T S Q on Mandel vectors.

    Q may be batched; its batch shape must broadcast against v's.
    """
    v = np.asarray(v)
    if mandel_size(np.asarray(Q).shape[-1]) != v.shape[-1]:
        raise ValueError("dimension mismatch between tensor and rotation")
    return contract_weight(mandel_rotation(Q), v)


def rotation_2d(theta) -> np.ndarray:
    """Proper rotation matrix for angle theta (batched over theta's shape)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    Q = np.empty(theta.shape + (2, 2))
    Q[..., 0, 0] = c
    Q[..., 0, 1] = -s
    Q[..., 1, 0] = s
    Q[..., 1, 1] = c
    return Q


def mandel_rotation_tangent(Q: np.ndarray, dQ: np.ndarray) -> np.ndarray:
    """Directional derivative of mandel_rotation at Q along dQ.

    Column b of the result is mandel(dQ^T B_b Q + Q^T B_b dQ).  dQ may
    carry extra leading axes (e.g. one per rotation parameter).
    """
    Q, dQ = np.asarray(Q), np.asarray(dQ)
    B = mandel_basis(Q.shape[-1])
    t1 = np.einsum("...ji,kjl,lm->k...im", dQ, B, Q)
    t2 = np.einsum("ji,kjl,...lm->k...im", Q, B, dQ)
    cols = to_mandel(t1 + t2)
    return np.moveaxis(cols, 0, -1)


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotation_jacobian(q: np.ndarray):
    """Rotation matrix of q (any nonzero norm) and its Jacobian.

    The quaternion is normalized internally; the returned jacobian, shape
    (4, 3, 3), is the derivative with respect to the raw (unnormalized)
    parameters, chain rule through the normalization included.
    """
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("quaternion norm too small to normalize")
    u = q / n
    w, x, y, z = u
    R = quat_to_rotation(u)
    # dR/du for a unit quaternion u
    dR = np.empty((4, 3, 3))
    dR[0] = 2 * np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)
    dR[1] = 2 * np.array([[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]], dtype=float)
    dR[2] = 2 * np.array([[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]], dtype=float)
    dR[3] = 2 * np.array([[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]], dtype=float)
    # du/dq = (I - u u^T) / n
    du = (np.eye(4) - np.outer(u, u)) / n
    return R, np.einsum("ij,jab->iab", du, dR)


def rotation_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues formula for a proper 3D rotation."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random proper rotation: uniform angle (d=2); uniform axis on the
    sphere and uniform angle (d=3)."""
    if dim == 2:
        return rotation_2d(rng.uniform(0.0, 2.0 * np.pi))
    if dim == 3:
        axis = rng.standard_normal(3)
        while np.linalg.norm(axis) < 1e-12:
            axis = rng.standard_normal(3)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        return rotation_from_axis_angle(axis, angle)
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def random_deformation(
    dim: int,
    eig_low: float = 0.7,
    eig_high: float = 1.3,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Random deformation gradient F = D R with positive principal
    stretches drawn i.i.d. uniform on [eig_low, eig_high] and a random
    rotation R.

    det F > 0 always.  The stretch factor multiplies on the left so that
    C = F^T F = R^T D^2 R carries a random orientation; a right-side
    stretch would make C diagonal for every draw.  Stretches are drawn
    before the rotation (fixed consumption order for reproducibility).
    """
    if not (0.0 < eig_low <= eig_high):
        raise ValueError(f"invalid stretch range [{eig_low}, {eig_high}]")
    rng = rng if rng is not None else np.random.default_rng()
    stretches = rng.uniform(eig_low, eig_high, size=dim)
    R = random_rotation(dim, rng)
    return stretches[:, None] * R


# ---------------------------------------------------------------------------
# symmetric eigendecompositions, batched
# ---------------------------------------------------------------------------


def _fix_eigvec_signs(U: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the first nonzero component is positive."""
    nz = U != 0.0
    first = np.argmax(nz, axis=-2)  # index of first nonzero row per column
    lead = np.take_along_axis(U, first[..., None, :], axis=-2)[..., 0, :]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return U * sign[..., None, :]


def _eig_sym_2(v: np.ndarray):
    """Closed-form eigendecomposition of symmetric 2x2 tensors in Mandel
    form.  Safe at s12 = 0 and at repeated eigenvalues."""
    a, b = v[..., 0], v[..., 1]
    s12 = v[..., 2] / SQRT2
    t = 0.5 * (a + b)
    h = 0.5 * (a - b)
    r = np.hypot(h, s12)
    lam = np.stack([t - r, t + r], axis=-1)

    # Eigenvector for the larger eigenvalue: pick the better-conditioned of
    # (s12, lam2 - a) and (lam2 - b, s12); at r ~ 0 fall back to the axes.
    lam2 = lam[..., 1]
    c1, c2 = s12, lam2 - a
    d1, d2 = lam2 - b, s12
    use_first = np.abs(c2) >= np.abs(d1)
    vx = np.where(use_first, c1, d1)
    vy = np.where(use_first, c2, d2)
    n = np.hypot(vx, vy)
    degenerate = n <= 1e-300
    n = np.where(degenerate, 1.0, n)
    # Degenerate (including diagonal with a <= b): larger eigenvalue along y
    # when b >= a, along x otherwise.
    vx = np.where(degenerate, np.where(b >= a, 0.0, 1.0), vx / n)
    vy = np.where(degenerate, np.where(b >= a, 1.0, 0.0), vy / n)
    U = np.empty(v.shape[:-1] + (2, 2))
    U[..., 0, 1] = vx
    U[..., 1, 1] = vy
    U[..., 0, 0] = -vy
    U[..., 1, 0] = vx
    return lam, _fix_eigvec_signs(U)


def _jacobi_rotate(A, V, p, q, r):
    """One vectorized Jacobi rotation zeroing A[..., p, q] (r = third index)."""
    apq = A[..., p, q].copy()
    active = apq != 0.0
    # tiny apq can overflow theta to inf; the big-theta branch below yields
    # the correct zero-rotation limit, so the overflow itself is benign
    with np.errstate(over="ignore"):
        theta = (A[..., q, q] - A[..., p, p]) / np.where(active, 2.0 * apq, 1.0)
    # Stable tangent: t = sign(theta) / (|theta| + sqrt(theta^2 + 1)); for
    # huge theta the square overflows, where t = 1/(2 theta) is exact enough.
    big = np.abs(theta) > 1e150
    theta_c = np.where(big, 0.0, theta)
    t = np.sign(theta) / (np.abs(theta_c) + np.sqrt(theta_c * theta_c + 1.0))
    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
    t = np.where(theta == 0.0, 1.0, t)  # sign(0) = 0; take t = 1 there
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    tdiag = t * apq
    A[..., p, p] -= tdiag
    A[..., q, q] += tdiag
    A[..., p, q] = 0.0
    A[..., q, p] = 0.0
    arp = A[..., r, p].copy()
    arq = A[..., r, q].copy()
    new_rp = c * arp - s * arq
    new_rq = s * arp + c * arq
    A[..., r, p] = new_rp
    A[..., p, r] = new_rp
    A[..., r, q] = new_rq
    A[..., q, r] = new_rq

    Vp = V[..., :, p].copy()
    Vq = V[..., :, q].copy()
    cc, ss = c[..., None], s[..., None]
    V[..., :, p] = cc * Vp - ss * Vq
    V[..., :, q] = ss * Vp + cc * Vq


def _eig_sym_3(v: np.ndarray, tol: float = 1e-14, max_sweeps: int = 30):
    """Cyclic Jacobi eigendecomposition of symmetric 3x3 tensors.

    Sweeps the (0,1), (0,2), (1,2) pairs until the off-diagonal Frobenius
    mass drops below tol * ||S||_F.  Robust at repeated eigenvalues, where
    closed-form (Cardano) solutions lose eigenvector orthogonality.
    """
    A = from_mandel(v)
    scale = np.maximum(np.linalg.norm(v, axis=-1), 1e-300)
    batch = A.shape[:-2]
    V = np.broadcast_to(np.eye(3), batch + (3, 3)).copy()
    for _ in range(max_sweeps):
        off2 = 2.0 * (A[..., 0, 1] ** 2 + A[..., 0, 2] ** 2 + A[..., 1, 2] ** 2)
        if np.all(off2 <= (tol * scale) ** 2):
            break
        for p, q, r in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            _jacobi_rotate(A, V, p, q, r)
    lam = np.stack([A[..., 0, 0], A[..., 1, 1], A[..., 2, 2]], axis=-1)
    order = np.argsort(lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return lam, _fix_eigvec_signs(V)


def eig_sym(v: np.ndarray):
    """Eigendecomposition of symmetric tensors given in Mandel form.

    Returns (lam, U) with eigenvalues sorted ascending and orthonormal
    eigenvector columns, deterministic for a fixed input (each column's
    first nonzero component is made positive).
    """
    v = np.asarray(v, dtype=float)
    d = dim_of_mandel(v.shape[-1])
    if d == 2:
        return _eig_sym_2(v)
    return _eig_sym_3(v)


def eig_assemble(lam: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Mandel components of U diag(lam) U^T."""
    return to_mandel(np.einsum("...ik,...k,...jk->...ij", U, lam, U))
