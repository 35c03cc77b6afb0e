"""Dataset generators and dataset file I/O.

Three generators, all deterministic per seed (per-sample RNG streams are
derived from (seed, sample index) so generation order never matters):

    neo-Hookean      analytic hyperelastic pairs (C = F^T F, S(C))
    tensegrity       2D prestressed bar/cable unit cell with square
                     symmetry; pairs (C, S) obtained by fixing the 12
                     boundary nodes at F*X and relaxing the 8 interior
                     nodes with nonlinear conjugate gradient
    j2 sequences     plane-strain J2 elastoplasticity with linear
                     isotropic hardening, integrated by radial return
                     along smooth random strain paths (path-dependent
                     sequence data for recurrent models)

Files are plain text: one header line of key=value pairs, then one CSV
row per record with %.17g floats (lossless double round trip).  A pair
row holds input then output Mandel components; a sequence row holds
(input, output) blocks for each step, concatenated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import (
    from_mandel,
    mandel_size,
    random_deformation,
    rotation_2d,
    to_mandel,
)

DATASET_MAGIC = "equitensor-dataset"
DATASET_VERSION = 1


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


# ---------------------------------------------------------------------------
# neo-Hookean
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeoHookeanParams:
    """Lame constants; defaults correspond to E=1, nu=0.3.  The stress is
    S = (lambda/2 * log det C - mu) C^-1 + mu I, derived from the
    compressible neo-Hookean strain energy
    W = mu/2 (tr C - 3) - mu log J + lambda/2 (log J)^2 with J = sqrt(det C)
    (W itself is only used in tests)."""

    lam: float = 0.5769
    mu: float = 0.3846

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("Lame parameters must be positive")


def neo_hookean_stress(params: NeoHookeanParams, C: np.ndarray) -> np.ndarray:
    """Second Piola-Kirchhoff stress for Mandel-vector inputs C (..., m).

    Works for d=3 (the physical case) and d=2 (a testing variant using
    the same formula on 2x2 tensors).  Raises on non-SPD inputs.
    """
    C = np.asarray(C, dtype=float)
    Cm = from_mandel(C)
    try:
        np.linalg.cholesky(Cm)
    except np.linalg.LinAlgError:
        raise ValueError("C must be symmetric positive definite") from None
    dim = Cm.shape[-1]
    logdet = np.log(np.linalg.det(Cm))
    Cinv = np.linalg.inv(Cm)
    coef = (0.5 * params.lam * logdet - params.mu)[..., None, None]
    S = coef * Cinv + params.mu * np.eye(dim)
    return to_mandel(0.5 * (S + np.swapaxes(S, -1, -2)))


def gen_neo_hookean(
    params: NeoHookeanParams = NeoHookeanParams(),
    n: int = 1000,
    dim: int = 3,
    eig_low: float = 0.7,
    eig_high: float = 1.3,
    seed: int = 0,
):
    """Pairs (C = F^T F, S(C)); returns a Dataset."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = mandel_size(dim)
    X = np.empty((n, m))
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        F = random_deformation(dim, eig_low, eig_high, rng)
        X[i] = to_mandel(F.T @ F)
    Y = neo_hookean_stress(params, X)
    gen = (
        f"neo-hookean(lambda={params.lam:g},mu={params.mu:g},"
        f"dim={dim},eig_low={eig_low:g},eig_high={eig_high:g})"
    )
    return Dataset(dim=dim, kind="pair", steps=1, generator=gen, seed=seed, X=X, Y=Y)


# ---------------------------------------------------------------------------
# tensegrity unit cell
# ---------------------------------------------------------------------------

BAR, CABLE = 0, 1


@dataclass
class TensegrityCell:
    """2D pin-jointed unit cell: 8 interior nodes, 12 fixed boundary
    nodes, bars (linear springs that buckle at load P_cr, constant
    compressive force beyond) and tension-only cables.  Cable rest
    lengths are alpha times geometric length (prestress for alpha < 1).
    The geometry is invariant under the square symmetry group."""

    nodes: np.ndarray  # (20, 2) rest positions
    interior: np.ndarray  # (8,) node indices
    boundary: np.ndarray  # (12,) node indices
    members: np.ndarray  # (M, 2) node index pairs
    kind: np.ndarray  # (M,) BAR or CABLE
    stiffness: np.ndarray  # (M,)
    rest_length: np.ndarray  # (M,)
    p_cr: float
    area: float  # reference cell area l^2

    @property
    def incidence(self) -> np.ndarray:
        """Signed incidence (M, n_nodes): -1 at the first endpoint, +1 at
        the second, so member vectors are inc @ x."""
        inc = np.zeros((len(self.members), len(self.nodes)))
        rows = np.arange(len(self.members))
        inc[rows, self.members[:, 0]] = -1.0
        inc[rows, self.members[:, 1]] = 1.0
        return inc


def build_tensegrity_cell(
    l: float = 1.0,
    k_bar: float = 100.0,
    k_cable: float = 1.0,
    alpha: float = 0.95,
    p_cr: float = 2.0,
) -> TensegrityCell:
    if min(l, k_bar, k_cable, p_cr) <= 0 or not (0 < alpha <= 1):
        raise ValueError("cell parameters must be positive and 0 < alpha <= 1")
    interior_pts = [(sx / 6, sy / 6) for sx in (-1, 1) for sy in (-1, 1)]
    interior_pts += [(-1 / 3, 0), (1 / 3, 0), (0, -1 / 3), (0, 1 / 3)]
    boundary_pts = [(sx / 2, sy / 6) for sx in (-1, 1) for sy in (-1, 1)]
    boundary_pts += [(sx / 6, sy / 2) for sx in (-1, 1) for sy in (-1, 1)]
    boundary_pts += [(sx / 2, sy / 2) for sx in (-1, 1) for sy in (-1, 1)]
    pts = interior_pts + boundary_pts
    index = {p: i for i, p in enumerate(pts)}

    def node(x, y):
        # exact fractions only; keys are the tuples used to build pts
        return index[(x, y)]

    bars, cables = [], []
    bars.append((node(-1 / 3, 0), node(1 / 3, 0)))
    bars.append((node(0, -1 / 3), node(0, 1 / 3)))
    for sx in (-1, 1):
        for sy in (-1, 1):
            c, m1, m2, f = (
                (sx / 2, sy / 6),
                (sx / 6, sy / 6),
                (sx / 6, sy / 2),
                (sx / 2, sy / 2),
            )
            bars.append((node(*c), node(*m2)))
            bars.append((node(*m1), node(*f)))
            cables += [
                (node(*c), node(*m1)),
                (node(*m1), node(*m2)),
                (node(*m2), node(*f)),
                (node(*f), node(*c)),
                (node(*c), node(sx / 3, 0)),
                (node(sx / 3, 0), node(*m1)),
                (node(*m1), node(0, sy / 3)),
                (node(0, sy / 3), node(*m2)),
            ]

    members = np.array(bars + cables)
    seen = {tuple(sorted(mem)) for mem in members.tolist()}
    if len(seen) != len(members):
        raise AssertionError("duplicate members in cell construction")
    kind = np.array([BAR] * len(bars) + [CABLE] * len(cables))
    nodes = np.array(pts, dtype=float) * l
    geo = np.linalg.norm(nodes[members[:, 1]] - nodes[members[:, 0]], axis=1)
    rest = np.where(kind == BAR, geo, alpha * geo)
    stiff = np.where(kind == BAR, k_bar, k_cable)
    return TensegrityCell(
        nodes=nodes,
        interior=np.arange(8),
        boundary=np.arange(8, 20),
        members=members,
        kind=kind,
        stiffness=stiff,
        rest_length=rest,
        p_cr=p_cr,
        area=l * l,
    )


def member_energy_force(cell: TensegrityCell, lengths: np.ndarray):
    """Energy and axial force of every member at current lengths (..., M).

    Cables carry tension only (zero below rest length).  Bars are linear
    springs clamped in compression at -P_cr, with the energy continued
    linearly past the buckling elongation (C^1 piecewise form).
    """
    e = lengths - cell.rest_length
    k = cell.stiffness
    is_cable = cell.kind == CABLE
    e_cable = np.maximum(0.0, e)
    f_cable = k * e_cable
    E_cable = 0.5 * k * e_cable**2
    e_b = -cell.p_cr / k  # buckling elongation (negative)
    buckled = e < e_b
    f_bar = np.where(buckled, -cell.p_cr, k * e)
    E_bar = np.where(
        buckled, 0.5 * k * e_b**2 - cell.p_cr * (e - e_b), 0.5 * k * e**2
    )
    force = np.where(is_cable, f_cable, f_bar)
    energy = np.where(is_cable, E_cable, E_bar)
    return energy, force


def _energy_grad(cell, inc, x_all):
    """Total energy (B,) and gradient w.r.t. all node positions (B, n, 2)."""
    i0, i1 = cell.members[:, 0], cell.members[:, 1]
    v = x_all[:, i1] - x_all[:, i0]
    lc = np.sqrt(np.sum(v * v, axis=-1))
    energy, force = member_energy_force(cell, lc)
    fu = (force / lc)[..., None] * v
    # scatter member forces to nodes with one GEMM: inc.T @ fu
    B, M = fu.shape[0], fu.shape[1]
    flat = fu.transpose(1, 0, 2).reshape(M, B * 2)
    grad = (inc.T @ flat).reshape(-1, B, 2).transpose(1, 0, 2)
    return energy.sum(axis=-1), grad


def cell_equilibrium(
    cell: TensegrityCell,
    F: np.ndarray,
    max_iter: int = 100_000,
    tol: float = 1e-10,
):
    """Interior node positions minimizing total member energy with the
    boundary fixed at F @ X_b.  Accepts one 2x2 F or a batch (B, 2, 2);
    returns positions of the interior nodes with matching batch shape.

    Two phases.  First, nonlinear conjugate gradient with the
    Polak-Ribiere(+) update, restarted every 2*n_dof iterations or when
    beta < 0, with backtracking Armijo line search; this descends
    reliably but cannot certify residuals much below sqrt(eps), because
    near the minimum the true energy decrease per step (~ |g|^2 / k) is
    smaller than the double-precision resolution of E itself.  A damped
    Newton polish with the analytic member Hessian therefore finishes the
    job: gradient-norm progress is measurable down to ~1e-13, which makes
    the 1e-10 tolerance attainable.  Converged when the infinity norm of
    the gradient falls below tol * max(1, |E|).  Raises ConvergenceError
    after max_iter with the worst residual.
    """
    F = np.asarray(F, dtype=float)
    single = F.ndim == 2
    Fb = F[None] if single else F
    if np.any(np.linalg.det(Fb) <= 0):
        raise ValueError("deformation gradients must have positive determinant")
    B = Fb.shape[0]
    inc = cell.incidence
    n_int = len(cell.interior)
    n_dof = 2 * n_int

    x_all = np.einsum("bij,nj->bni", Fb, cell.nodes)  # affine start everywhere
    free = cell.interior

    def eg(x_int):
        x_all[:, free] = x_int
        E, g = _energy_grad(cell, inc, x_all)
        return E, g[:, free]

    def dot(a, b):
        return np.einsum("bnc,bnc->b", a, b)

    def resid(g):
        return np.abs(g).reshape(B, -1).max(axis=1)

    x = x_all[:, free].copy()
    E, g = eg(x)
    d = -g
    step = np.full(B, 1e-2)
    c1 = 1e-4
    noise = 8.0 * np.finfo(float).eps
    cg_tol = 1e-4  # hand off to the Newton polish below this residual

    cg_budget = min(max_iter, 20 * n_dof)
    for it in range(cg_budget):
        target = np.maximum(tol * np.maximum(1.0, np.abs(E)), cg_tol)
        active = resid(g) > target
        if not active.any():
            break
        # safeguard: fall back to steepest descent when d stops descending
        dphi0 = dot(d, g)
        bad = active & (dphi0 >= 0)
        if bad.any():
            d[bad] = -g[bad]
            dphi0 = dot(d, g)

        # backtracking Armijo with an adaptive initial step and an
        # allowance for roundoff in the energy comparison
        t = step.copy()
        accepted = ~active
        x_new, E_new, g_new = x.copy(), E.copy(), g.copy()
        t_used = np.zeros(B)
        for _ in range(60):
            trial = x + t[:, None, None] * d
            E_t, g_t = eg(trial)
            ok = (
                active
                & ~accepted
                & (E_t <= E + c1 * t * dphi0 + noise * np.maximum(1.0, np.abs(E)))
            )
            x_new = np.where(ok[:, None, None], trial, x_new)
            E_new = np.where(ok, E_t, E_new)
            g_new = np.where(ok[:, None, None], g_t, g_new)
            t_used = np.where(ok, t, t_used)
            accepted |= ok
            if accepted.all():
                break
            t = np.where(accepted, t, 0.5 * t)
        # unaccepted samples keep their position; y = 0 there, so the PR
        # update restarts them from -g on the next iteration
        step = np.where(active & (t_used > 0), np.minimum(2.0 * t_used, 1e2), step)

        g_old = g
        x, E, g = x_new, E_new, g_new
        y = g - g_old
        denom = dot(g_old, g_old)
        beta = dot(g, y) / np.where(denom > 0, denom, 1.0)
        beta = np.maximum(0.0, beta)  # PR+
        if (it + 1) % (2 * n_dof) == 0:
            beta = np.zeros(B)
        d = -g + beta[:, None, None] * d

    # Newton polish with per-sample Levenberg damping: accept a step when
    # it measurably lowers the gradient norm or the energy, grow the
    # damping otherwise (large damping degenerates to small gradient
    # steps, so progress never stops entirely)
    eye = np.eye(n_dof)
    lam = np.zeros(B)
    for it in range(400):
        target = tol * np.maximum(1.0, np.abs(E))
        active = resid(g) > target
        if not active.any():
            break
        x_all[:, free] = x
        H = _interior_hessian(cell, inc, x_all, free)
        H = H + lam[:, None, None] * eye
        gflat = g.reshape(B, n_dof, 1)
        try:
            delta = np.linalg.solve(H, -gflat)
        except np.linalg.LinAlgError:
            delta = np.linalg.solve(H + 1e-6 * eye, -gflat)
        delta = delta.reshape(B, n_int, 2)
        trial = np.where(active[:, None, None], x + delta, x)
        E_t, g_t = eg(trial)
        better = (resid(g_t) < resid(g)) | (
            E_t < E - noise * np.maximum(1.0, np.abs(E))
        )
        ok = active & better & np.isfinite(E_t)
        x = np.where(ok[:, None, None], trial, x)
        E = np.where(ok, E_t, E)
        g = np.where(ok[:, None, None], g_t, g)
        # cap the damping: beyond ~1e16 the step is zero anyway, and an
        # uncapped geometric growth would overflow on hopeless samples
        lam = np.where(ok, lam / 3.0, np.minimum(np.maximum(10.0 * lam, 1e-4), 1e16))
        lam = np.where(lam < 1e-10, 0.0, lam)

    res = resid(g)
    target = tol * np.maximum(1.0, np.abs(E))
    if np.any(res > target):
        raise ConvergenceError(
            f"cell equilibrium: {int((res > target).sum())} of {B} samples above "
            f"tolerance (worst residual {float(res.max()):.3e})"
        )
    x_all[:, free] = x
    out = x_all[:, free]
    return out[0] if single else out


def _interior_hessian(cell, inc, x_all, free):
    """Exact energy Hessian restricted to the interior nodes, (B, n, n)
    with n = 2*len(free).  Per member: k_eff u u^T + (f/l)(I - u u^T)
    with k_eff the slope of the force-elongation law on the current
    branch (zero for slack cables and buckled bars)."""
    v = np.einsum("mn,bnc->bmc", inc, x_all)
    lc = np.linalg.norm(v, axis=-1)
    u = v / lc[..., None]
    e = lc - cell.rest_length
    k = cell.stiffness
    _, force = member_energy_force(cell, lc)
    is_cable = cell.kind == CABLE
    k_eff = np.where(
        is_cable, np.where(e > 0, k, 0.0), np.where(e > -cell.p_cr / k, k, 0.0)
    )
    uu = np.einsum("bmc,bmd->bmcd", u, u)
    eye2 = np.eye(2)
    Km = k_eff[..., None, None] * uu + (force / lc)[..., None, None] * (eye2 - uu)
    inc_f = inc[:, free]
    H = np.einsum("mn,mp,bmcd->bncpd", inc_f, inc_f, Km)
    B = x_all.shape[0]
    n = 2 * len(free)
    return H.reshape(B, n, n)


def cell_stress(cell: TensegrityCell, F: np.ndarray, x_interior: np.ndarray):
    """Second Piola-Kirchhoff-like stress from boundary reactions:
    S = (1/A0) (sum_b X_b f_b^T) F^-T, symmetrized.  f_b is the external
    force holding boundary node b (the energy gradient w.r.t. its
    position); X_b its rest position.  Returns (S Mandel (...,3),
    asymmetry diagnostic ||S - S^T||_F)."""
    F = np.asarray(F, dtype=float)
    single = F.ndim == 2
    Fb = F[None] if single else F
    xi = x_interior[None] if single else x_interior
    B = Fb.shape[0]
    x_all = np.einsum("bij,nj->bni", Fb, cell.nodes)
    x_all[:, cell.interior] = xi
    _, grad = _energy_grad(cell, cell.incidence, x_all)
    f = grad[:, cell.boundary]  # (B, 12, 2)
    Xb = cell.nodes[cell.boundary]
    S = np.einsum("bi,nbj->nij", Xb, f) / cell.area
    S = S @ np.linalg.inv(np.swapaxes(Fb, -1, -2))
    asym = np.linalg.norm(S - np.swapaxes(S, -1, -2), axis=(-2, -1))
    S_sym = to_mandel(0.5 * (S + np.swapaxes(S, -1, -2)))
    return (S_sym[0], float(asym[0])) if single else (S_sym, asym)


@dataclass(frozen=True)
class TensegrityParams:
    l: float = 1.0
    k_bar: float = 100.0
    k_cable: float = 1.0
    alpha: float = 0.95
    p_cr: float = 2.0

    def build(self) -> TensegrityCell:
        return build_tensegrity_cell(
            self.l, self.k_bar, self.k_cable, self.alpha, self.p_cr
        )


def gen_tensegrity(
    params: TensegrityParams = TensegrityParams(),
    n: int = 100,
    eig_low: float = 0.7,
    eig_high: float = 1.3,
    seed: int = 0,
    rotate_deg: float = 0.0,
    chunk: int = 512,
    verify_objectivity: bool = True,
):
    """Pairs (C = F^T F, S) from batched equilibrium solves.

    Non-converged samples are skipped and resampled from fresh per-index
    streams (logged in the provenance string).  rotate_deg != 0 applies
    Q(theta) . Q^T to both tensors, producing the rotated-frame variant
    used for symmetry-basis discovery.  By default the generator spot
    checks objectivity (S from F vs from R F for a random rotation R)
    on the first sample.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cell = params.build()

    def solve(Fs):
        x = cell_equilibrium(cell, Fs)
        S, _asym = cell_stress(cell, Fs, x)
        return S

    X = np.empty((n, 3))
    Y = np.empty((n, 3))
    n_resampled = 0
    for start in range(0, n, chunk):
        idx = range(start, min(start + chunk, n))
        Fs = np.empty((len(idx), 2, 2))
        for j, i in enumerate(idx):
            rng = np.random.default_rng([seed, i])
            Fs[j] = random_deformation(2, eig_low, eig_high, rng)
        try:
            S = solve(Fs)
        except ConvergenceError:
            # fall back to per-sample solves so only genuine failures resample
            S = np.empty((len(idx), 3))
            for j, i in enumerate(idx):
                attempt = 0
                while True:
                    try:
                        S[j] = solve(Fs[j : j + 1])[0]
                        break
                    except ConvergenceError:
                        attempt += 1
                        n_resampled += 1
                        if attempt > 20:
                            raise
                        rng = np.random.default_rng([seed, i, attempt])
                        Fs[j] = random_deformation(2, eig_low, eig_high, rng)
        X[start : start + len(idx)] = to_mandel(
            np.einsum("bji,bjk->bik", Fs, Fs)
        )
        Y[start : start + len(idx)] = S

    if verify_objectivity:
        rng = np.random.default_rng([seed, 2**31])
        theta = rng.uniform(0, 2 * np.pi)
        rng0 = np.random.default_rng([seed, 0])  # regenerate sample 0's F
        F = random_deformation(2, eig_low, eig_high, rng0)
        S_rot = solve((rotation_2d(theta) @ F)[None])[0]
        if np.linalg.norm(S_rot - Y[0]) > 1e-6 * max(1.0, np.linalg.norm(Y[0])):
            raise ConvergenceError(
                "tensegrity response depends on the rotation part of F "
                f"(objectivity residual {np.linalg.norm(S_rot - Y[0]):.3e})"
            )

    if rotate_deg != 0.0:
        Q = rotation_2d(np.deg2rad(rotate_deg))
        # apply S -> Q S Q^T to inputs and outputs (rotated material frame)
        Xm = from_mandel(X)
        Ym = from_mandel(Y)
        X = to_mandel(np.einsum("ij,bjk,lk->bil", Q, Xm, Q))
        Y = to_mandel(np.einsum("ij,bjk,lk->bil", Q, Ym, Q))

    gen = (
        f"tensegrity(l={params.l:g},k_bar={params.k_bar:g},"
        f"k_cable={params.k_cable:g},alpha={params.alpha:g},p_cr={params.p_cr:g},"
        f"eig_low={eig_low:g},eig_high={eig_high:g},rotate_deg={rotate_deg:g},"
        f"resampled={n_resampled})"
    )
    return Dataset(dim=2, kind="pair", steps=1, generator=gen, seed=seed, X=X, Y=Y)


# ---------------------------------------------------------------------------
# J2 plasticity sequences (plane strain)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class J2Params:
    """Elastic Lame constants, initial yield stress, linear isotropic
    hardening modulus.  Defaults put the yield surface well inside the
    stress range of amplitude-0.02 strain paths, so plastic flow and
    path dependence are strongly exercised."""

    lam: float = 0.5769
    mu: float = 0.3846
    sigma_y: float = 0.005
    hardening: float = 0.05

    def __post_init__(self):
        if min(self.lam, self.mu, self.sigma_y) <= 0 or self.hardening < 0:
            raise ValueError("invalid J2 parameters")


def j2_integrate(params: J2Params, strain_path: np.ndarray) -> np.ndarray:
    """Radial-return integration of one or more plane-strain paths.

    strain_path: (..., T, 3) in-plane strain as d=2 Mandel vectors.
    Returns in-plane stress (..., T, 3).  The internal state (plastic
    strain and accumulated plastic strain) is three-dimensional; plane
    strain fixes eps_33 = 0 but sigma_33 and the out-of-plane plastic
    flow are tracked.
    """
    path = np.asarray(strain_path, dtype=float)
    lead = path.shape[:-2]
    T = path.shape[-2]
    flat = path.reshape(-1, T, 3)
    B = flat.shape[0]
    lam, mu, sy, H = params.lam, params.mu, params.sigma_y, params.hardening

    # 3D strain in Mandel-like coordinates (e11, e22, e33, sqrt2*e23,
    # sqrt2*e13, sqrt2*e12); plane strain leaves indices 2..4 zero in eps.
    eps = np.zeros((B, 6))
    eps_p = np.zeros((B, 6))
    alpha = np.zeros(B)
    out = np.empty((B, T, 3))
    sqrt23 = np.sqrt(2.0 / 3.0)
    for t in range(T):
        eps[:, 0] = flat[:, t, 0]
        eps[:, 1] = flat[:, t, 1]
        eps[:, 5] = flat[:, t, 2]
        ee = eps - eps_p
        tr = ee[:, 0] + ee[:, 1] + ee[:, 2]
        sig = 2.0 * mu * ee
        sig[:, :3] += lam * tr[:, None]
        dev = sig.copy()
        dev[:, :3] -= (sig[:, 0] + sig[:, 1] + sig[:, 2])[:, None] / 3.0
        r = np.linalg.norm(dev, axis=1)
        f = r - sqrt23 * (sy + H * alpha)
        plastic = f > 0
        if plastic.any():
            dgam = np.where(plastic, f / (2.0 * mu + (2.0 / 3.0) * H), 0.0)
            nrm = np.where(r > 0, r, 1.0)
            nvec = dev / nrm[:, None]
            sig = sig - 2.0 * mu * dgam[:, None] * nvec
            eps_p = eps_p + dgam[:, None] * nvec
            alpha = alpha + sqrt23 * dgam
        out[:, t, 0] = sig[:, 0]
        out[:, t, 1] = sig[:, 1]
        out[:, t, 2] = sig[:, 5]
    return out.reshape(*lead, T, 3)


def _strain_path(rng, steps: int, amplitude: float) -> np.ndarray:
    """Smooth random path: per Mandel component the sum of 3 sinusoids
    with random frequency/phase/weight, rescaled so the largest absolute
    component over the path equals amplitude times a U(0.5, 1) draw."""
    t = np.arange(steps) / steps
    path = np.zeros((steps, 3))
    for c in range(3):
        freq = rng.uniform(0.5, 2.5, size=3)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        weight = rng.uniform(0.25, 1.0, size=3)
        path[:, c] = np.sum(
            weight[None, :] * np.sin(2.0 * np.pi * freq[None, :] * t[:, None] + phase),
            axis=1,
        )
    peak = np.abs(path).max()
    target = amplitude * rng.uniform(0.5, 1.0)
    return path * (target / peak)


def gen_j2_sequences(
    params: J2Params = J2Params(),
    n: int = 100,
    steps: int = 100,
    amplitude: float = 0.02,
    seed: int = 0,
):
    """Sequences of (strain, stress) pairs under plane-strain J2 flow."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    X = np.empty((n, steps, 3))
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        X[i] = _strain_path(rng, steps, amplitude)
    Y = j2_integrate(params, X)
    gen = (
        f"j2(lambda={params.lam:g},mu={params.mu:g},sigma_y={params.sigma_y:g},"
        f"hardening={params.hardening:g},amplitude={amplitude:g})"
    )
    return Dataset(
        dim=2, kind="sequence", steps=steps, generator=gen, seed=seed, X=X, Y=Y
    )


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    dim: int
    kind: str  # "pair" | "sequence"
    steps: int
    generator: str
    seed: int
    X: np.ndarray  # pair: (n, m); sequence: (n, steps, m)
    Y: np.ndarray

    def __post_init__(self):
        if self.kind not in ("pair", "sequence"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "pair" and self.steps != 1:
            raise ValueError("pair datasets must have steps=1")
        if self.X.shape != self.Y.shape:
            raise ValueError("input/output arrays must have the same shape")
        m = mandel_size(self.dim)
        want = (self.n, self.steps, m) if self.kind == "sequence" else (self.n, m)
        if self.X.shape != want:
            raise ValueError(f"array shape {self.X.shape} does not match header {want}")

    @property
    def n(self) -> int:
        return self.X.shape[0]


def write_dataset(path, ds: Dataset):
    m = mandel_size(ds.dim)
    if " " in ds.generator:
        raise ValueError("generator string must not contain spaces")
    header = (
        f"{DATASET_MAGIC} v{DATASET_VERSION} dim={ds.dim} kind={ds.kind} "
        f"steps={ds.steps} n={ds.n} generator={ds.generator} seed={ds.seed}"
    )
    if ds.kind == "sequence":
        # per-step (input, output) blocks, concatenated along the row
        rows = np.concatenate([ds.X, ds.Y], axis=-1).reshape(ds.n, -1)
    else:
        rows = np.concatenate([ds.X, ds.Y], axis=1)
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_dataset(path) -> Dataset:
    with open(path) as f:
        header = f.readline().strip()
        parts = header.split()
        if (
            len(parts) < 2
            or parts[0] != DATASET_MAGIC
            or parts[1] != f"v{DATASET_VERSION}"
        ):
            raise ValueError(f"{path}: not a dataset file (bad header)")
        kv = {}
        for p in parts[2:]:
            if "=" not in p:
                raise ValueError(f"{path}: malformed header field {p!r}")
            k, v = p.split("=", 1)
            kv[k] = v
        try:
            dim = int(kv["dim"])
            kind = kv["kind"]
            steps = int(kv["steps"])
            n = int(kv["n"])
            seed = int(kv["seed"])
            generator = kv["generator"]
        except KeyError as e:
            raise ValueError(f"{path}: header missing key {e}") from None
        m = mandel_size(dim)
        row_len = 2 * m * (steps if kind == "sequence" else 1)
        data = np.empty((n, row_len))
        for i in range(n):
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: truncated file (row {i} of {n} missing)")
            vals = line.rstrip("\n").split(",")
            if len(vals) != row_len:
                raise ValueError(
                    f"{path}: row {i} has {len(vals)} fields, expected {row_len}"
                )
            data[i] = [float(v) for v in vals]
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values in data rows")
    if kind == "sequence":
        blocks = data.reshape(n, steps, 2 * m)
        X = blocks[:, :, :m].copy()
        Y = blocks[:, :, m:].copy()
    else:
        X = data[:, :m].copy()
        Y = data[:, m:].copy()
    return Dataset(dim=dim, kind=kind, steps=steps, generator=generator, seed=seed, X=X, Y=Y)
