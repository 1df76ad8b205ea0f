import json

import numpy as np
import pytest
from oracles import fd_surface_operator, match_multisets

from rbfmol.dense_numerics import solve_spd
from rbfmol.geometry import get_surface, random_surface_points, sample_narrow_band, sample_quasi_uniform, sphere
from rbfmol.mol_core import (
    assemble,
    evaluate_solution,
    integrate,
    interpolate_initial,
    ode_matrix,
    spectrum_report,
    write_step_log,
)
from rbfmol.special_kernels import SobolevKernel, kernel_eval_full
from rbfmol.surface_ops import (
    EllipticProblem,
    anisotropic_tensor_example3,
    example1_exact_solution,
    kernel_column,
    manufactured_forcing,
)
from rbfmol.timestepping import dopri5


def example1_problem(b=3.0):
    S = sphere()
    u = example1_exact_solution()
    pb = EllipticProblem(S, b=b)
    pb.forcing = manufactured_forcing(pb, u)
    pb.initial = lambda x: u.value(x, 0.0)
    return pb, u


@pytest.fixture(scope="module")
def tiny():
    S = sphere()
    Z = random_surface_points(S, 6, np.random.default_rng(11))
    X = random_surface_points(S, 12, np.random.default_rng(12))
    pb, _ = example1_problem()
    return assemble(pb, Z, X, SobolevKernel(4))


def pinv_ode_matrix(sys):
    U, s, Vt = np.linalg.svd(sys.Psi_XZ, full_matrices=False)
    return -(Vt.T @ np.diag(1 / s) @ U.T) @ sys.LPsi_XZ


def test_tiny_system_matches_pinv(tiny):
    assert np.linalg.norm(tiny.Q @ tiny.R - tiny.Psi_XZ[:, tiny.perm]) <= 1e-12 * np.linalg.norm(tiny.Psi_XZ)
    assert tiny.rank == 6 and not tiny.degenerate
    M = ode_matrix(tiny)
    ref = pinv_ode_matrix(tiny)
    assert np.max(np.abs(M - ref) / np.maximum(np.abs(ref), 1e-8 * np.abs(ref).max())) <= 1e-8


def test_similarity_spectrum(tiny):
    M = ode_matrix(tiny)
    P = tiny.Psi_ZZ
    np.testing.assert_array_equal(P, P.T)
    nodal = P @ M @ np.linalg.inv(P)
    ev = spectrum_report(tiny).eigenvalues
    assert match_multisets(ev, np.linalg.eigvals(nodal)) <= 1e-6 * max(1.0, np.abs(ev).max())


def test_pinv_and_qr_residuals_agree(tiny, rng):
    lam = rng.normal(size=6)
    t = 0.37
    dlam = tiny.rhs(t, lam)
    f = tiny.forcing_at(t)
    # QR residual R lambda' - C lambda - Q^T f (perm is the identity here only if unpivoted)
    qr_res = tiny.R @ dlam[tiny.perm] - tiny.C @ lam[tiny.perm] - tiny.Q.T @ f
    # normal equations of the least-squares problem Psi lambda' = -LPsi lambda + f
    ne_res = tiny.Psi_XZ.T @ (tiny.Psi_XZ @ dlam + tiny.LPsi_XZ @ lam - f)
    scale = np.linalg.norm(tiny.Psi_XZ.T @ f) + 1.0
    assert np.linalg.norm(qr_res) <= 1e-8 * scale
    assert np.linalg.norm(ne_res) <= 1e-8 * scale
    U, s, Vt = np.linalg.svd(tiny.Psi_XZ, full_matrices=False)
    ref = Vt.T @ np.diag(1 / s) @ U.T @ (f - tiny.LPsi_XZ @ lam)
    np.testing.assert_allclose(dlam, ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())


def test_square_case_is_symmetric():
    S = sphere()
    Z = random_surface_points(S, 30, np.random.default_rng(4))
    pb, _ = example1_problem()
    sys = assemble(pb, Z, Z, SobolevKernel(4))
    np.testing.assert_array_equal(sys.Psi_XZ, sys.Psi_XZ.T)
    assert sys.Psi_ZZ is sys.Psi_XZ
    np.testing.assert_array_equal(sys.perm, np.arange(30))
    assert np.linalg.norm(sys.Q @ sys.R - sys.Psi_ZZ) <= 1e-12 * np.linalg.norm(sys.Psi_ZZ)


def test_reaction_dominated_limit():
    S = sphere()
    Z = random_surface_points(S, 6, np.random.default_rng(5))
    b = 1e6
    sys = assemble(EllipticProblem(S, b=b), Z, Z, SobolevKernel(4))
    M = ode_matrix(sys)
    assert np.max(np.abs(M + b * np.eye(6))) <= 1e-3 * b
    ev = spectrum_report(sys).eigenvalues
    assert np.max(np.abs(ev + b)) <= 1e-3 * b


def test_entries_bitwise_and_fd_oracle(rng):
    S = get_surface("dupin_cyclide")
    pb = EllipticProblem(S, anisotropic_tensor_example3(S), b=3.0)
    X = random_surface_points(S, 40, rng)
    Z = sample_narrow_band(S, 0.2, 30).points
    kernel = SobolevKernel(5)
    sys = assemble(pb, Z, X, kernel)
    for _ in range(20):
        i, j = rng.integers(40), rng.integers(30)
        assert sys.Psi_XZ[i, j] == kernel_eval_full(kernel, X[i], Z[j])[0]
        ref = fd_surface_operator(pb, kernel_column(kernel, Z[j]), X[i])
        assert abs(sys.LPsi_XZ[i, j] - ref) <= 1e-5 * max(abs(ref), 1.0)


def test_shape_and_policy_errors():
    S = sphere()
    P = random_surface_points(S, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        assemble(EllipticProblem(S), P, P[:5], SobolevKernel(4))
    with pytest.raises(ValueError):
        assemble(EllipticProblem(S), P, P, SobolevKernel(4), rank_policy="nope")


def test_interpolate_initial_examples():
    S = sphere()
    Z = sample_quasi_uniform(S, 100, seed=0, compute_stats=False).points
    kernel = SobolevKernel(4)
    pb, u = example1_problem()
    sys = assemble(pb, Z, Z, kernel)
    e1 = interpolate_initial(sys, lambda x: kernel(x, Z[:1])[:, 0])
    expected = np.zeros(100)
    expected[0] = 1.0
    np.testing.assert_allclose(e1, expected, atol=1e-8)
    np.testing.assert_array_equal(interpolate_initial(sys, lambda x: np.zeros(len(x))), 0)
    lam = interpolate_initial(sys, pb.initial)
    assert sys.notes["initial"] == "interpolation"
    Y = random_surface_points(S, 500, np.random.default_rng(7))
    assert np.max(np.abs(evaluate_solution(sys, lam, Y) - pb.initial(Y))) <= 1e-4
    np.testing.assert_allclose(evaluate_solution(sys, lam, Z), pb.initial(Z), atol=1e-9)
    np.testing.assert_array_equal(evaluate_solution(sys, np.zeros(100), Y), 0)


def test_scalar_like_square_equivalence():
    S = sphere()
    Z = random_surface_points(S, 40, np.random.default_rng(8))
    pb, _ = example1_problem()
    sys = assemble(pb, Z, Z, SobolevKernel(4))
    lam0 = interpolate_initial(sys, pb.initial)
    dt = 1e-3
    ours = integrate(sys, lam0, fixed_dt=dt)

    def direct(t, lam):
        return solve_spd(sys.Psi_ZZ, -sys.LPsi_XZ @ lam + pb.forcing(Z, t))

    ref = dopri5(direct, pb.t_span, lam0, fixed_dt=dt)
    assert ours.completed and ref.completed
    scale = np.abs(ref.states).max()
    assert np.max(np.abs(ours.states - ref.states)) <= 1e-8 * scale


def test_flow_linearity():
    S = sphere()
    Z = random_surface_points(S, 20, np.random.default_rng(9))
    X = random_surface_points(S, 35, np.random.default_rng(10))
    pb, _ = example1_problem()
    base = assemble(pb, Z, X, SobolevKernel(4))
    lam0 = interpolate_initial(base, pb.initial)
    c = -2.5
    scaled_pb = EllipticProblem(S, b=pb.b, forcing=lambda x, t: c * pb.forcing(x, t))
    scaled = assemble(scaled_pb, Z, X, SobolevKernel(4))
    a = integrate(base, lam0, fixed_dt=0.01)
    b = integrate(scaled, c * lam0, fixed_dt=0.01)
    np.testing.assert_allclose(b.states, c * a.states, rtol=1e-12, atol=1e-12 * np.abs(a.states).max())


def test_integrate_and_logs(tmp_path):
    S = sphere()
    Z = random_surface_points(S, 30, np.random.default_rng(13))
    X = random_surface_points(S, 60, np.random.default_rng(14))
    pb, u = example1_problem()
    sys = assemble(pb, Z, X, SobolevKernel(4))
    tr = integrate(sys, interpolate_initial(sys, pb.initial), output_times=[0.5, 1.0])
    assert tr.completed
    assert np.all(np.diff(tr.times) > 0) and tr.accepted_steps == len(tr.times) - 1
    assert tr.flags["n_Z"] == 30 and "degenerate" in tr.flags
    with pytest.raises(ValueError):
        integrate(sys, np.zeros(3))
    write_step_log(tr, tmp_path / "steps.csv")
    lines = (tmp_path / "steps.csv").read_text().splitlines()
    assert lines[0] == "step_index,t,dt" and len(lines) == tr.accepted_steps + 1
    rep = spectrum_report(sys)
    rep.to_csv(tmp_path / "spectrum.csv")
    assert (tmp_path / "spectrum.csv").read_text().splitlines()[0] == "re,im"
    side = json.loads((tmp_path / "spectrum.json").read_text())
    assert set(side) == {"n_Z", "n_X", "m", "max_real_part", "spectral_radius", "zero_count", "stable"}
    assert rep.zero_count <= 30
    assert rep.stable == (rep.max_real_part <= rep.stability_tolerance * max(1.0, rep.spectral_radius))


def test_rank_deficient_system_freezes_coefficients():
    S = sphere()
    Z = random_surface_points(S, 8, np.random.default_rng(15))
    Z = np.vstack([Z, Z[:2]])  # duplicated centers make Psi exactly rank deficient
    X = random_surface_points(S, 20, np.random.default_rng(16))
    pb, _ = example1_problem()
    sys = assemble(pb, Z, X, SobolevKernel(4))
    assert sys.rank == 8 and sys.degenerate
    rep = spectrum_report(sys)
    assert rep.zero_count >= 2
    M = ode_matrix(sys)
    assert np.all(np.isfinite(M))
    lam0 = np.linalg.lstsq(sys.Psi_XZ, pb.initial(X), rcond=None)[0]
    tr = integrate(sys, lam0)
    assert tr.completed
