"""Material-symmetry classes and their equivariant parameter subspaces.

For a symmetry group G (subgroup of the orthogonal group), a layer over
symmetric-tensor features is G-equivariant when

  - every weight 4-tensor W commutes with the group action,
      W : (Q^T x Q) = Q^T (W : x) Q        for all Q in G,
  - every bias tensor b is G-invariant,  b = Q^T b Q.

In Mandel form the first condition says the weight matrix K commutes with
the orthogonal matrix A(Q) of the conjugation action.  The bases below
are hard-coded in the natural symmetry frame (the coordinate frame),
orthonormal under the Frobenius inner product, and verified against the
commutation residuals by the test suite; nothing is solved at runtime.

Classes, with weight/bias subspace dimensions:

    kind          d=2 (w/b)   d=3 (w/b)
    none           9 / 3      36 / 6     minor symmetries only
    triclinic      6 / 3      21 / 6     adds major symmetry
    orthotropic    4 / 2       9 / 3     diagonal sign-flip group
    cubic          3 / 1       3 / 1     signed permutations
    isotropic      2 / 1       2 / 1     full orthogonal group
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product

import numpy as np

from .tensors import (
    SQRT2,
    mandel_identity,
    mandel_size,
    random_rotation,
    rotation_2d,
)

CLASS_KINDS = ("none", "triclinic", "orthotropic", "cubic", "isotropic")


@dataclass(frozen=True)
class SymmetryClass:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in CLASS_KINDS:
            raise ValueError(f"unknown symmetry class {self.kind!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def weight_dim(self) -> int:
        return weight_basis(self).shape[0]

    @property
    def bias_dim(self) -> int:
        return bias_basis(self).shape[0]


def _unit(m: int, a: int, b: int) -> np.ndarray:
    K = np.zeros((m, m))
    K[a, b] = 1.0
    return K


def _sym_unit(m: int, a: int, b: int) -> np.ndarray:
    if a == b:
        return _unit(m, a, a)
    K = np.zeros((m, m))
    K[a, b] = K[b, a] = 1.0 / SQRT2
    return K


@lru_cache(maxsize=None)
def _weight_basis_cached(kind: str, dim: int) -> np.ndarray:
    m = mandel_size(dim)
    if kind == "none":
        mats = [_unit(m, a, b) for a in range(m) for b in range(m)]
    elif kind == "triclinic":
        mats = [_sym_unit(m, a, b) for a in range(m) for b in range(a, m)]
    elif kind == "orthotropic":
        # Free symmetric block coupling the diagonal components, plus
        # independent diagonal entries for each shear component.
        mats = [_sym_unit(m, a, b) for a in range(dim) for b in range(a, dim)]
        mats += [_unit(m, a, a) for a in range(dim, m)]
    elif kind == "cubic":
        diag = sum(_unit(m, a, a) for a in range(dim)) / np.sqrt(dim)
        offs = [(a, b) for a in range(dim) for b in range(dim) if a != b]
        coup = sum(_unit(m, a, b) for a, b in offs) / np.sqrt(len(offs))
        shear = sum(_unit(m, a, a) for a in range(dim, m)) / np.sqrt(m - dim)
        mats = [diag, coup, shear]
    elif kind == "isotropic":
        mi = mandel_identity(dim)
        p_sph = np.outer(mi, mi) / dim  # rank-1 projector, unit Frobenius norm
        p_dev = (np.eye(m) - p_sph) / np.sqrt(m - 1)
        mats = [p_sph, p_dev]
    else:  # pragma: no cover
        raise ValueError(kind)
    out = np.array(mats)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _bias_basis_cached(kind: str, dim: int) -> np.ndarray:
    m = mandel_size(dim)
    if kind in ("none", "triclinic"):
        vecs = np.eye(m)
    elif kind == "orthotropic":
        vecs = np.eye(m)[:dim]  # e_i (x) e_i, already unit Frobenius norm
    else:  # cubic, isotropic: multiples of the identity
        vecs = (mandel_identity(dim) / np.sqrt(dim))[None, :]
    out = np.array(vecs)
    out.setflags(write=False)
    return out


def weight_basis(cls: SymmetryClass) -> np.ndarray:
    """Orthonormal Mandel-matrix basis of the equivariant weight subspace,
    shape (k_W, m, m)."""
    return _weight_basis_cached(cls.kind, cls.dim)


def bias_basis(cls: SymmetryClass) -> np.ndarray:
    """Orthonormal Mandel-vector basis of the invariant bias subspace,
    shape (k_b, m)."""
    return _bias_basis_cached(cls.kind, cls.dim)


def isotropic_weight(lam_hat: float, mu_hat: float, dim: int) -> np.ndarray:
    """Mandel matrix of the isotropic 4-tensor lam*(I(x)I) + 2*mu*I_s,
    whose action is x -> lam*tr(x)*I + 2*mu*x."""
    mi = mandel_identity(dim)
    return lam_hat * np.outer(mi, mi) + 2.0 * mu_hat * np.eye(mandel_size(dim))


def project_weight(K: np.ndarray, cls: SymmetryClass) -> np.ndarray:
    """Orthogonal projection of a Mandel matrix onto span(weight_basis)."""
    basis = weight_basis(cls)
    coeff = np.einsum("kab,...ab->...k", basis, K)
    return np.einsum("...k,kab->...ab", coeff, basis)


# ---------------------------------------------------------------------------
# group elements
# ---------------------------------------------------------------------------


def group_generators(cls: SymmetryClass) -> list[np.ndarray]:
    """Finite generator set sufficient for testing the equivariance
    conditions.  The isotropic group is continuous, so a fixed sample of
    16 random rotations plus one reflection stands in for it."""
    d = cls.dim
    if cls.kind == "none":
        raise ValueError("class 'none' has no nontrivial generators")
    if cls.kind == "triclinic":
        return [-np.eye(d)]  # generates {+I, -I}; conjugation acts trivially
    if cls.kind == "orthotropic":
        g1 = np.diag([-1.0] + [1.0] * (d - 1))
        g2 = np.diag([1.0, -1.0] + [1.0] * (d - 2))
        return [g1, g2]
    if cls.kind == "cubic":
        if d == 2:
            rot90 = np.array([[0.0, -1.0], [1.0, 0.0]])
            reflect = np.diag([1.0, -1.0])
            return [rot90, reflect]
        rot_z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        rot_x = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
        reflect = np.diag([1.0, 1.0, -1.0])
        return [rot_z, rot_x, reflect]
    # isotropic
    rng = np.random.default_rng(20240101)
    gens = [random_rotation(d, rng) for _ in range(16)]
    gens.append(np.diag([1.0] * (d - 1) + [-1.0]))
    return gens


@lru_cache(maxsize=None)
def _finite_group_elements(kind: str, dim: int) -> np.ndarray:
    """Full element list for the finite groups (orthotropic, cubic)."""
    if kind == "orthotropic":
        mats = [np.diag(s) for s in product((1.0, -1.0), repeat=dim)]
    elif kind == "cubic":
        mats = []
        for perm in permutations(range(dim)):
            P = np.zeros((dim, dim))
            for i, j in enumerate(perm):
                P[i, j] = 1.0
            for signs in product((1.0, -1.0), repeat=dim):
                mats.append(np.diag(signs) @ P)
    else:  # pragma: no cover
        raise ValueError(kind)
    out = np.array(mats)
    out.setflags(write=False)
    return out


def sample_group_element(cls: SymmetryClass, rng: np.random.Generator) -> np.ndarray:
    """Random element of the symmetry group.

    Isotropic draws a proper random rotation (the continuous group);
    cubic and orthotropic draw uniformly over all elements of the finite
    group, rotations and reflections alike; none and triclinic act
    trivially, so the identity is returned.
    """
    if cls.kind == "isotropic":
        return random_rotation(cls.dim, rng)
    if cls.kind in ("cubic", "orthotropic"):
        elems = _finite_group_elements(cls.kind, cls.dim)
        return elems[rng.integers(len(elems))]
    return np.eye(cls.dim)
