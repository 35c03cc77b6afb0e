import numpy as np
import pytest

from equitensor.datasets import (
    BAR,
    CABLE,
    ConvergenceError,
    Dataset,
    J2Params,
    NeoHookeanParams,
    TensegrityParams,
    build_tensegrity_cell,
    cell_equilibrium,
    cell_stress,
    gen_j2_sequences,
    gen_neo_hookean,
    gen_tensegrity,
    j2_integrate,
    member_energy_force,
    neo_hookean_stress,
    read_dataset,
    write_dataset,
)
from equitensor.tensors import (
    from_mandel,
    mandel_rotation,
    random_deformation,
    random_rotation,
    rotation_2d,
    to_mandel,
)


# ---------------------------------------------------------------------------
# hyperelastic generator
# ---------------------------------------------------------------------------


def test_stress_free_reference():
    # undeformed state carries exactly zero stress
    for dim in (2, 3):
        S = neo_hookean_stress(NeoHookeanParams(), to_mandel(np.eye(dim)))
        assert np.max(np.abs(S)) <= 1e-15


def test_stress_uniform_dilation_closed_form():
    # C = c*I: S = [(0.5*lam*d*log(c) - mu)/c + mu] * I
    p = NeoHookeanParams(lam=0.6, mu=0.35)
    for dim, c in ((2, 1.21), (3, 0.845)):
        got = from_mandel(neo_hookean_stress(p, to_mandel(c * np.eye(dim))))
        coef = (0.5 * p.lam * dim * np.log(c) - p.mu) / c + p.mu
        assert np.allclose(got, coef * np.eye(dim), atol=1e-14)


def test_stress_isotropy(rng):
    # material isotropy: S(Q^T C Q) = Q^T S(C) Q for arbitrary rotations
    p = NeoHookeanParams()
    F = np.stack([random_deformation(3, rng=rng) for _ in range(16)])
    C = to_mandel(np.einsum("nji,njk->nik", F, F))
    A = mandel_rotation(random_rotation(3, rng))
    lhs = neo_hookean_stress(p, C @ A.T)
    rhs = neo_hookean_stress(p, C) @ A.T
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_stress_requires_spd():
    with pytest.raises(ValueError):
        neo_hookean_stress(NeoHookeanParams(), to_mandel(-np.eye(3)))


def test_gen_neo_hookean_regenerates_bitwise():
    a = gen_neo_hookean(NeoHookeanParams(), 50, dim=3, seed=11)
    b = gen_neo_hookean(NeoHookeanParams(), 50, dim=3, seed=11)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    # outputs follow from inputs through the closed form
    assert np.max(np.abs(neo_hookean_stress(NeoHookeanParams(), a.X) - a.Y)) <= 1e-13


def test_gen_neo_hookean_prefix_stability():
    # per-sample seeding: the first k samples do not depend on n
    a = gen_neo_hookean(NeoHookeanParams(), 20, seed=4)
    b = gen_neo_hookean(NeoHookeanParams(), 60, seed=4)
    assert np.array_equal(a.X, b.X[:20])


def test_gen_neo_hookean_metadata():
    ds = gen_neo_hookean(NeoHookeanParams(), 10, dim=2, seed=1)
    assert ds.dim == 2 and ds.kind == "pair" and ds.steps == 1
    assert ds.X.shape == (10, 3) and ds.Y.shape == (10, 3)
    assert "neo-hookean" in ds.generator


# ---------------------------------------------------------------------------
# tensegrity cell
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def cell():
    return build_tensegrity_cell()


def _member_lengths(cell):
    return np.linalg.norm(
        cell.nodes[cell.members[:, 1]] - cell.nodes[cell.members[:, 0]], axis=1
    )


def test_cell_geometry_counts(cell):
    assert cell.nodes.shape == (20, 2)
    assert len(cell.interior) == 8
    assert len(cell.boundary) == 12
    assert np.sum(cell.kind == BAR) == 10
    assert np.sum(cell.kind == CABLE) == 32


def test_cell_geometry_square_symmetric(cell):
    # the member multiset is invariant under the symmetries of the square
    nodes = cell.nodes
    segs = {
        (k,) + tuple(sorted((tuple(np.round(nodes[i], 12)),
                             tuple(np.round(nodes[j], 12)))))
        for (i, j), k in zip(cell.members, cell.kind)
    }
    for Q in (np.array([[0.0, -1.0], [1.0, 0.0]]), np.diag([1.0, -1.0])):
        mapped = {
            (k,) + tuple(sorted((tuple(np.round(Q @ np.array(a), 12)),
                                 tuple(np.round(Q @ np.array(b), 12)))))
            for k, a, b in segs
        }
        assert mapped == segs


def test_cell_prestress_rest_lengths(cell):
    # bars rest at their geometric length; cables are shortened by alpha
    geo = _member_lengths(cell)
    bars = cell.kind == BAR
    assert np.allclose(cell.rest_length[bars], geo[bars])
    assert np.allclose(cell.rest_length[~bars], 0.95 * geo[~bars])


def test_cell_parameter_validation():
    with pytest.raises(ValueError):
        build_tensegrity_cell(alpha=0.0)
    with pytest.raises(ValueError):
        build_tensegrity_cell(k_bar=-1.0)


def test_member_forces_match_energy_derivative(cell):
    # dE/dl matches the reported member force away from the kinks
    lengths = _member_lengths(cell) * 1.04
    h = 1e-7
    _, F0 = member_energy_force(cell, lengths)
    Ep, _ = member_energy_force(cell, lengths + h)
    Em, _ = member_energy_force(cell, lengths - h)
    assert np.allclose(F0, (Ep - Em) / (2 * h), atol=1e-6)


def test_cable_slack_branch(cell):
    short = _member_lengths(cell) * 0.5  # cables shorter than rest go slack
    E, F = member_energy_force(cell, short)
    cables = cell.kind == CABLE
    assert np.all(E[cables] == 0.0)
    assert np.all(F[cables] == 0.0)
    # bars resist compression
    assert np.all(F[~cables] < 0.0)


def test_bar_buckling_plateau(cell):
    bar = np.where(cell.kind == BAR)[0][0]
    geo = _member_lengths(cell)
    # force clamps at -p_cr under deep compression
    deep = geo.copy()
    deep[bar] = geo[bar] * 0.5
    _, F = member_energy_force(cell, deep)
    assert np.isclose(F[bar], -cell.p_cr)
    # and the force law is continuous across the buckling elongation
    l_b = geo[bar] - cell.p_cr / cell.stiffness[bar]
    h = 1e-7
    for l in (l_b - h, l_b + h):
        probe = geo.copy()
        probe[bar] = l
        _, Fp = member_energy_force(cell, probe)
        assert np.isclose(Fp[bar], -cell.p_cr, atol=2e-5)


def test_equilibrium_identity_with_unit_prestress_ratio():
    # alpha = 1: the reference configuration is already in equilibrium at
    # F = I and carries exactly zero stress
    cell = build_tensegrity_cell(alpha=1.0)
    x = cell_equilibrium(cell, np.eye(2))
    assert np.allclose(x, cell.nodes[cell.interior], atol=1e-10)
    S, asym = cell_stress(cell, np.eye(2), x)
    assert np.max(np.abs(S)) <= 1e-12
    assert asym <= 1e-12


def test_equilibrium_stress_finite_and_symmetric(cell):
    rng = np.random.default_rng(0)
    F = np.stack([np.eye(2) + 0.05 * rng.standard_normal((2, 2)) for _ in range(4)])
    x = cell_equilibrium(cell, F)
    S, asym = cell_stress(cell, F, x)
    assert S.shape == (4, 3)
    assert np.max(asym) <= 1e-8
    assert np.all(np.isfinite(S))


def test_equilibrium_objectivity(cell):
    # rotating the boundary data leaves the material stress unchanged:
    # S(QF) = S(F) because member energies depend on lengths only
    rng = np.random.default_rng(1)
    F = np.eye(2) + 0.08 * rng.standard_normal((2, 2))
    Q = rotation_2d(0.7)
    S1, _ = cell_stress(cell, F, cell_equilibrium(cell, F))
    S2, _ = cell_stress(cell, Q @ F, cell_equilibrium(cell, Q @ F))
    assert np.allclose(S1, S2, atol=1e-7)


def test_equilibrium_square_symmetry(cell):
    # material symmetry of the lattice: C -> Q^T C Q conjugates S for the
    # square-group generators, i.e. the generated map is cubic-equivariant
    rng = np.random.default_rng(2)
    F = np.eye(2) + 0.06 * rng.standard_normal((2, 2))
    S1, _ = cell_stress(cell, F, cell_equilibrium(cell, F))
    for Q in (np.array([[0.0, -1.0], [1.0, 0.0]]), np.diag([1.0, -1.0])):
        F2 = F @ Q  # C' = Q^T C Q
        if np.linalg.det(F2) < 0:
            # realize the reflected metric with a proper deformation
            # gradient (objectivity makes the left factor irrelevant)
            F2 = np.diag([1.0, -1.0]) @ F2
        S2, _ = cell_stress(cell, F2, cell_equilibrium(cell, F2))
        expect = Q.T @ from_mandel(S1) @ Q
        assert np.allclose(from_mandel(S2), expect, atol=1e-7)


def test_equilibrium_convergence_error(cell):
    with pytest.raises(ConvergenceError):
        cell_equilibrium(cell, 1.1 * np.eye(2), tol=1e-30)


def test_equilibrium_rejects_inverted_gradient(cell):
    with pytest.raises(ValueError):
        cell_equilibrium(cell, np.diag([1.0, -1.0]))


def test_gen_tensegrity_deterministic_and_rotation():
    base = gen_tensegrity(TensegrityParams(), 6, seed=5)
    assert base.dim == 2 and base.kind == "pair"
    again = gen_tensegrity(TensegrityParams(), 6, seed=5)
    assert np.array_equal(base.X, again.X) and np.array_equal(base.Y, again.Y)
    # explicit zero rotation is bitwise the unrotated dataset
    rot0 = gen_tensegrity(TensegrityParams(), 6, seed=5, rotate_deg=0.0)
    assert np.array_equal(rot0.X, base.X) and np.array_equal(rot0.Y, base.Y)
    # rotating the material frame conjugates both tensors
    rot = gen_tensegrity(TensegrityParams(), 6, seed=5, rotate_deg=20.0)
    Q = rotation_2d(np.deg2rad(20.0))
    Xr = to_mandel(np.einsum("ij,bjk,lk->bil", Q, from_mandel(base.X), Q))
    Yr = to_mandel(np.einsum("ij,bjk,lk->bil", Q, from_mandel(base.Y), Q))
    assert np.allclose(rot.X, Xr, atol=1e-14)
    assert np.allclose(rot.Y, Yr, atol=1e-14)
    assert "tensegrity" in base.generator


# ---------------------------------------------------------------------------
# elastic-plastic sequence generator
# ---------------------------------------------------------------------------


def test_j2_elastic_limit():
    # tiny strain amplitudes never reach the yield surface, so the response
    # is exactly plane-strain linear elasticity
    p = J2Params()
    ds = gen_j2_sequences(p, n=4, steps=30, amplitude=1e-4, seed=3)
    eps = ds.X
    tr = eps[..., 0] + eps[..., 1]
    sig = 2.0 * p.mu * eps
    sig[..., 0] += p.lam * tr
    sig[..., 1] += p.lam * tr
    assert np.max(np.abs(ds.Y - sig)) <= 1e-10


def _reintegrate_with_consistency(p, X):
    """Independent radial-return reintegration; reports the worst
    yield-surface drift and the most negative dissipation increment."""
    B, T, _ = X.shape
    sqrt23 = np.sqrt(2.0 / 3.0)
    eps6 = np.zeros((B, 6))
    eps_p = np.zeros((B, 6))
    alpha = np.zeros(B)
    worst = 0.0
    min_dissipation = np.inf
    out = np.zeros((B, T, 3))
    for t in range(T):
        eps6[:, 0], eps6[:, 1], eps6[:, 5] = X[:, t, 0], X[:, t, 1], X[:, t, 2]
        ee = eps6 - eps_p
        trv = ee[:, 0] + ee[:, 1] + ee[:, 2]
        sig = 2.0 * p.mu * ee
        sig[:, :3] += p.lam * trv[:, None]
        dev = sig.copy()
        dev[:, :3] -= (sig[:, 0] + sig[:, 1] + sig[:, 2])[:, None] / 3.0
        r = np.linalg.norm(dev, axis=1)
        f = r - sqrt23 * (p.sigma_y + p.hardening * alpha)
        plastic = f > 0.0
        if plastic.any():
            dg = np.where(plastic, f / (2.0 * p.mu + (2.0 / 3.0) * p.hardening), 0.0)
            nv = dev / np.where(r > 0.0, r, 1.0)[:, None]
            sig = sig - 2.0 * p.mu * dg[:, None] * nv
            eps_p = eps_p + dg[:, None] * nv
            alpha = alpha + sqrt23 * dg
            dev2 = sig.copy()
            dev2[:, :3] -= (sig[:, 0] + sig[:, 1] + sig[:, 2])[:, None] / 3.0
            rr = np.linalg.norm(dev2, axis=1)
            drift = np.abs(rr - sqrt23 * (p.sigma_y + p.hardening * alpha))
            worst = max(worst, float(drift[plastic].max()))
            inc = np.einsum("bi,bi->b", sig, dg[:, None] * nv)
            min_dissipation = min(min_dissipation, float(inc[plastic].min()))
        out[:, t, 0], out[:, t, 1], out[:, t, 2] = sig[:, 0], sig[:, 1], sig[:, 5]
    return out, worst, min_dissipation


def test_j2_yield_consistency_and_dissipation():
    p = J2Params()
    ds = gen_j2_sequences(p, n=6, steps=80, amplitude=0.02, seed=1)
    out, worst, min_dissipation = _reintegrate_with_consistency(p, ds.X)
    # the reference reintegration reproduces the generator
    assert np.max(np.abs(out - ds.Y)) <= 1e-14
    # updated stress sits on the hardened yield surface after plastic steps
    assert worst <= 1e-10
    # plastic flow never creates energy
    assert min_dissipation >= -1e-12


def test_j2_paths_reach_plasticity():
    p = J2Params()
    ds = gen_j2_sequences(p, n=6, steps=80, amplitude=0.02, seed=1)
    # at the default amplitude the paths must leave the elastic regime,
    # otherwise sequence models would face a nearly linear problem
    elastic = j2_integrate(J2Params(lam=p.lam, mu=p.mu, sigma_y=1e6), ds.X)
    assert np.max(np.abs(elastic - ds.Y)) > p.sigma_y


def test_j2_equivariance():
    # in-plane rotations commute with the plane-strain flow
    p = J2Params()
    ds = gen_j2_sequences(p, n=4, steps=40, amplitude=0.02, seed=2)
    A = mandel_rotation(rotation_2d(0.6))
    out_rot = j2_integrate(p, ds.X @ A.T)
    assert np.max(np.abs(out_rot - ds.Y @ A.T)) <= 1e-10


def test_j2_deterministic():
    a = gen_j2_sequences(J2Params(), n=3, steps=25, seed=9)
    b = gen_j2_sequences(J2Params(), n=3, steps=25, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert a.kind == "sequence" and a.steps == 25


def test_j2_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gen_j2_sequences(J2Params(), n=0)
    with pytest.raises(ValueError):
        gen_j2_sequences(J2Params(), n=1, steps=1)
    with pytest.raises(ValueError):
        J2Params(mu=-1.0)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def test_write_read_roundtrip_pair(tmp_path):
    ds = gen_neo_hookean(NeoHookeanParams(), 20, dim=3, seed=0)
    path = tmp_path / "pairs.ds"
    write_dataset(path, ds)
    back = read_dataset(path)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.Y, ds.Y)
    assert (back.dim, back.kind, back.steps, back.seed) == (3, "pair", 1, 0)
    assert back.generator == ds.generator


def test_write_read_roundtrip_sequence(tmp_path):
    ds = gen_j2_sequences(J2Params(), n=5, steps=12, seed=2)
    path = tmp_path / "seq.ds"
    write_dataset(path, ds)
    back = read_dataset(path)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.Y, ds.Y)
    assert back.steps == 12


def test_dataset_validation(rng):
    X = rng.standard_normal((4, 6))
    with pytest.raises(ValueError):
        Dataset(dim=3, kind="pair", steps=2, generator="g", seed=0, X=X, Y=X)
    with pytest.raises(ValueError):
        Dataset(dim=3, kind="blob", steps=1, generator="g", seed=0, X=X, Y=X)
    with pytest.raises(ValueError):
        Dataset(dim=2, kind="pair", steps=1, generator="g", seed=0, X=X, Y=X)
    with pytest.raises(ValueError):
        Dataset(dim=3, kind="pair", steps=1, generator="g", seed=0,
                X=X, Y=X[:, :5])


def test_write_rejects_generator_with_space(tmp_path):
    ds = gen_neo_hookean(NeoHookeanParams(), 4, dim=2, seed=0)
    ds.generator = "has space"
    with pytest.raises(ValueError):
        write_dataset(tmp_path / "bad.ds", ds)


def test_read_rejects_malformed(tmp_path):
    ds = gen_neo_hookean(NeoHookeanParams(), 8, dim=2, seed=0)
    path = tmp_path / "ok.ds"
    write_dataset(path, ds)
    text = path.read_text()
    lines = text.splitlines()

    bad_magic = tmp_path / "magic.ds"
    bad_magic.write_text(text.replace("equitensor-dataset", "other-format", 1))
    with pytest.raises(ValueError):
        read_dataset(bad_magic)

    truncated = tmp_path / "short.ds"
    truncated.write_text("\n".join(lines[:4]) + "\n")
    with pytest.raises(ValueError):
        read_dataset(truncated)

    wrong_row = tmp_path / "row.ds"
    wrong_row.write_text("\n".join(lines[:1] + [lines[1] + ",0.0"] + lines[2:]) + "\n")
    with pytest.raises(ValueError):
        read_dataset(wrong_row)

    nonfinite = tmp_path / "nan.ds"
    row = lines[1].split(",")
    row[0] = "nan"
    nonfinite.write_text("\n".join(lines[:1] + [",".join(row)] + lines[2:]) + "\n")
    with pytest.raises(ValueError):
        read_dataset(nonfinite)
