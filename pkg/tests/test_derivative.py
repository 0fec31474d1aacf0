import numpy as np
import pytest

from elastoscat import derivative as dv, forward as fw, geometry as geo, modal, specfun as sf

R = 1.0
MED = modal.Medium(2.0, 1.0, 2.0)
PW = fw.IncidentWave("p", (0.0, 1.0, 0.0))
OPTS = fw.SolverOptions(n_trunc=12, quad_order=16, residual_tol=1e-3)


@pytest.fixture(scope="module")
def ell_solution():
    ell = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    sol = fw.solve_rigid_scattering(ell, PW, MED, R, OPTS)
    return ell, sol


@pytest.fixture(scope="module")
def meas_points():
    return fw.fibonacci_sphere(50, R)


def test_tangential_derivative_vanishes(ell_solution):
    # u = 0 on the boundary forces grad u = nu (d_nu u); checked at a
    # truncation where the boundary residual is ~2e-6
    ell = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    opts = fw.SolverOptions(n_trunc=14, quad_order=18, residual_tol=1e-4)
    sol = fw.solve_rigid_scattering(ell, PW, MED, R, opts)
    dnu = dv.normal_derivative_total_field(sol, PW, MED)
    grads = fw.incident_field(PW, MED, sol.sample.points)[1] + sol.basis.gradient(sol.coeff_vector)
    _, d_t, d_p = geo.surface_points(ell, sol.sample.theta, sol.sample.phi)
    for tangent in (d_t, d_p):
        tau = tangent / np.linalg.norm(tangent, axis=1, keepdims=True)
        tang = np.einsum("pil,pl->pi", grads, tau)
        assert np.abs(tang).max() < 1e-4 * np.abs(dnu).max()


def test_normal_derivative_vs_fd(ell_solution):
    ell, sol = ell_solution
    sample = sol.sample
    take = slice(0, 40)
    pts = sample.points[take]
    nus = sample.normals[take]

    def total(p):
        return fw.incident_field(PW, MED, p)[0] + sol.evaluate(p)

    h = 1e-6
    fd = (total(pts + h * nus) - total(pts - h * nus)) / (2 * h)
    dnu = dv.normal_derivative_total_field(sol, PW, MED)[take]
    assert np.abs(fd - dnu).max() < 1e-5 * np.abs(dnu).max()


def test_structurally_zero_columns(ell_solution, meas_points):
    ell, sol = ell_solution
    nmodes = (ell.order + 1) ** 2
    # Im Y_n^0 entries contribute nothing: q identically zero
    for block in (1, 3, 5):  # b_1, b_2, b_3 blocks
        i = block * nmodes + sf.flatten_index(0, 0)
        col = dv.domain_derivative(ell, sol, PW, MED, R, i, meas_points)
        assert np.all(col == 0)
        i = block * nmodes + sf.flatten_index(1, 0)
        col = dv.domain_derivative(ell, sol, PW, MED, R, i, meas_points)
        assert np.all(col == 0)


def test_jacobian_column_consistency(ell_solution, meas_points):
    ell, sol = ell_solution
    jac = dv.shape_jacobian(ell, sol, PW, MED, R, meas_points)
    for i in (1, 4, 11, 20):
        col = dv.domain_derivative(ell, sol, PW, MED, R, i, meas_points)
        np.testing.assert_allclose(jac.column(i), col, rtol=0, atol=1e-13 * np.abs(jac.matrix).max())


def test_jacobian_directional_homogeneity(ell_solution, meas_points, rng):
    ell, sol = ell_solution
    jac = dv.shape_jacobian(ell, sol, PW, MED, R, meas_points)
    e = rng.standard_normal(jac.matrix.shape[1])
    lhs = jac.matrix @ (2.5 * e)
    rhs = 2.5 * (jac.matrix @ e)
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()


def test_fd_quotient_decay(ell_solution, meas_points, rng):
    ell, sol = ell_solution
    jac = dv.shape_jacobian(ell, sol, PW, MED, R, meas_points)
    f0 = fw.scattering_operator(ell, PW, MED, R, meas_points, OPTS, solution=sol).u
    nmodes = (ell.order + 1) ** 2
    live = [i for i in range(1, 6 * nmodes + 1) if np.linalg.norm(jac.column(i)) > 0]
    for i in rng.choice(live, size=4, replace=False):
        col = jac.column(i)
        nrm = np.linalg.norm(col)
        quots = []
        for h in (1e-2, 1e-4):
            spp = ell.copy()
            spp.coeffs[i - 1] += h
            fp = fw.scattering_operator(spp, PW, MED, R, meas_points, OPTS).u
            quots.append(np.linalg.norm((fp - f0) / h - col) / nrm)
        assert quots[1] < quots[0] / 5.0


def test_sphere_radial_inflation_matches_radius_derivative(meas_points):
    # the coefficient direction d C(sphere)/d a realizes a uniform radial
    # perturbation; its Jacobian action must match differentiating the
    # analytic sphere solution with respect to the radius
    a = 0.6
    sp = geo.sphere_coeffs(a, 1)
    opts = fw.SolverOptions(n_trunc=10, quad_order=14, residual_tol=1e-6)
    sol = fw.solve_rigid_scattering(sp, PW, MED, R, opts)
    jac = dv.shape_jacobian(sp, sol, PW, MED, R, meas_points)
    direction = geo.sphere_coeffs(1.0, 1).coeffs  # dC/da
    deriv = (jac.matrix @ direction).reshape(-1, 3)
    h = 1e-5
    up = fw.scattering_operator(geo.sphere_coeffs(a + h, 1), PW, MED, R, meas_points, opts).u
    um = fw.scattering_operator(geo.sphere_coeffs(a - h, 1), PW, MED, R, meas_points, opts).u
    fd = (up - um) / (2 * h)
    assert np.abs(fd - deriv).max() < 1e-4 * np.abs(deriv).max()


def test_derivative_fields_satisfy_transparent_condition(ell_solution, meas_points):
    # each u'_i is itself radiating: its trace satisfies the modal boundary
    # identity to high accuracy
    ell, sol = ell_solution
    dnu = dv.normal_derivative_total_field(sol, PW, MED)
    q = geo.perturbation_q_table(ell, sol.sample)[1]  # a_1 block, mode (1, -1)
    assert np.abs(q).max() > 0
    coeff = sol.solve_rhs(-q[:, None] * dnu)
    pot = modal.PotentialCoeffs(sol.order, sol.basis.potentials_from_vector(coeff))
    b_series = modal.traction_from_potentials(pot, MED, R)
    b_dtn = modal.apply_T(modal.potentials_to_displacement(pot, MED, R), MED, R)
    assert np.abs(b_series.data - b_dtn.data).max() < 1e-6 * np.abs(b_series.data).max()


# ---------------------------------------------------------------------------
# Objective and gradient
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def ellipsoid_dataset():
    truth = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    data_opts = fw.SolverOptions(n_trunc=18, quad_order=22, residual_tol=1e-3)
    return fw.scattering_operator(truth, PW, MED, R, fw.fibonacci_sphere(100, R), data_opts)


def test_objective_at_truth_is_residual_floor():
    truth = geo.sphere_coeffs(0.75, 1)
    data_opts = fw.SolverOptions(n_trunc=18, quad_order=22)
    ms = fw.scattering_operator(truth, PW, MED, R, fw.fibonacci_sphere(100, R), data_opts)
    f = dv.objective_and_gradient(truth, [ms], fw.SolverOptions(n_trunc=14, quad_order=18), with_gradient=False)
    assert f < 1e-10


def test_objective_invariant_under_point_relabeling(ellipsoid_dataset, rng):
    ms = ellipsoid_dataset
    c = geo.ellipsoid_coeffs(0.72, 0.74, 0.78, 1)
    f1 = dv.objective_and_gradient(c, [ms], OPTS, with_gradient=False)
    perm = rng.permutation(ms.k)
    ms2 = fw.MeasurementSet(ms.radius, ms.med, ms.incident, ms.points[perm], ms.u[perm])
    f2 = dv.objective_and_gradient(c, [ms2], OPTS, with_gradient=False)
    assert abs(f1 - f2) < 1e-12 * max(1.0, f1)


def test_gradient_matches_central_fd(ellipsoid_dataset, rng):
    ms = ellipsoid_dataset
    c = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    c.coeffs = c.coeffs + 0.03 * rng.standard_normal(c.coeffs.shape)
    f, g = dv.objective_and_gradient(c, [ms], OPTS)
    h = 1e-6
    idx = rng.choice(len(g), size=6, replace=False)
    for i in idx:
        cp, cm = c.copy(), c.copy()
        cp.coeffs[i] += h
        cm.coeffs[i] -= h
        fp = dv.objective_and_gradient(cp, [ms], OPTS, with_gradient=False)
        fm = dv.objective_and_gradient(cm, [ms], OPTS, with_gradient=False)
        fd = (fp - fm) / (2 * h)
        assert abs(g[i] - fd) < 1e-4 * max(abs(fd), 1e-3 * np.abs(g).max())


def test_gradient_fd_at_random_admissible_surfaces(ellipsoid_dataset, rng):
    # consistency away from the truth as well
    ms = ellipsoid_dataset
    h = 1e-6
    for _ in range(3):
        c = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
        c.coeffs = c.coeffs + 0.05 * rng.standard_normal(c.coeffs.shape)
        f, g = dv.objective_and_gradient(c, [ms], OPTS)
        i = int(np.argmax(np.abs(g)))
        cp, cm = c.copy(), c.copy()
        cp.coeffs[i] += h
        cm.coeffs[i] -= h
        fd = (
            dv.objective_and_gradient(cp, [ms], OPTS, with_gradient=False)
            - dv.objective_and_gradient(cm, [ms], OPTS, with_gradient=False)
        ) / (2 * h)
        assert abs(g[i] - fd) < 1e-4 * abs(fd)


def test_objective_failure_raises(ellipsoid_dataset):
    ms = ellipsoid_dataset
    broken = geo.SurfaceParam(1, np.zeros(24))  # degenerate surface
    with pytest.raises(dv.ObjectiveError):
        dv.objective_and_gradient(broken, [ms], OPTS)
    tight = fw.SolverOptions(n_trunc=6, quad_order=10, residual_tol=1e-12)
    c = geo.ellipsoid_coeffs(0.7, 0.75, 0.8, 1)
    with pytest.raises(dv.ObjectiveError):
        dv.objective_and_gradient(c, [ms], tight)


def test_objective_sums_over_bundle(ellipsoid_dataset):
    ms = ellipsoid_dataset
    c = geo.ellipsoid_coeffs(0.72, 0.74, 0.78, 1)
    f1, g1 = dv.objective_and_gradient(c, [ms], OPTS)
    f2, g2 = dv.objective_and_gradient(c, [ms, ms], OPTS)
    assert f2 == pytest.approx(2 * f1, rel=1e-12)
    np.testing.assert_allclose(g2, 2 * g1, rtol=1e-12)
