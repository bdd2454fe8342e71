"""Verification suites: each check returns a (claim, residual, tolerance) record.

The suites mirror the acceptance gate at desk scale (N <= 3, M <= 32,
truncation <= 6) and are reused by the command line driver; the pytest
acceptance module asserts every record.
"""

from __future__ import annotations

import numpy as np

from . import claims, darboux, diffop, dressing,flows, hamiltonian
from .diffop import (ShiftOperator, geometric_kernel, multiplication_operator,
                     mul, operators_close, split, star_apply)
from .dressing import (LaxState, compute_dressing, random_bump_state,
                       random_periodic_state, vacuum_state)
from .flows import FlowSpec
from .lattice import DECAYING, PERIODIC, Lattice, MatrixField


def record(claim: str, residual: float, tolerance: float, **params) -> dict:
    return {"claim": claim, "residual": float(residual),
            "tolerance": float(tolerance),
            "passed": bool(residual < tolerance), "params": params}


def _rand_field(lattice, n, rng, scale=1.0):
    data = (rng.standard_normal((lattice.n_fine, n, n))
            + 1j * rng.standard_normal((lattice.n_fine, n, n))) * scale
    return MatrixField(lattice, data)


def _rand_band(lattice, n, rng, lo, hi, scale=1.0):
    coeffs = {j: _rand_field(lattice, n, rng, scale) for j in range(lo, hi + 1)}
    return ShiftOperator.band(lattice, n, coeffs)


# -- suite: operator algebra ---------------------------------------------------


def operators_suite(seed: int = 0, n: int = 2, m: int = 12,
                    trials: int = 100, tol_scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    lat = Lattice(m, 0.3, 1, PERIODIC)
    depth = m - 4
    k_minus = geometric_kernel(lat, n, depth, "minus")
    k_plus = geometric_kernel(lat, n, depth, "plus")
    worst = {"assoc": 0.0, "split": 0.0, "lemma": 0.0}
    noncomm_ok = True
    for _ in range(trials):
        a = _rand_band(lat, n, rng, -2, 2)
        b = _rand_band(lat, n, rng, -1, 2)
        c = _rand_band(lat, n, rng, -2, 1)
        scale = max(a.norm() * b.norm() * c.norm(), 1.0)
        worst["assoc"] = max(worst["assoc"], operators_close(
            mul(mul(a, b), c), mul(a, mul(b, c))) / scale)
        plus, minus = split(a)
        worst["split"] = max(worst["split"],
                             operators_close(plus + minus, a))
        noncomm_ok &= operators_close(mul(a, b), mul(b, a)) > 1e-6

        b_pos = _rand_band(lat, n, rng, 0, 2)
        c_neg = _rand_band(lat, n, rng, -2, -1)
        f = _rand_field(lat, n, rng)
        g = _rand_field(lat, n, rng)
        f_op, g_op = multiplication_operator(f), multiplication_operator(g)
        sc = max(b_pos.norm(), c_neg.norm(), 1.0) * f.norm() * g.norm() \
            * depth
        lhs1 = split(mul(mul(mul(b_pos, f_op), k_minus), g_op))[1]
        rhs1 = mul(mul(multiplication_operator(b_pos.apply(f)), k_minus),
                   g_op)
        lhs2 = split(mul(mul(mul(f_op, k_minus), g_op), b_pos))[1]
        rhs2 = mul(mul(f_op, k_minus),
                   multiplication_operator(star_apply(b_pos, g)))
        lhs3 = split(mul(mul(mul(c_neg, f_op), k_plus), g_op))[0]
        rhs3 = mul(mul(multiplication_operator(c_neg.apply(f)), k_plus),
                   g_op)
        lhs4 = split(mul(mul(mul(f_op, k_plus), g_op), c_neg))[0]
        rhs4 = mul(mul(f_op, k_plus),
                   multiplication_operator(star_apply(c_neg, g)))
        for lhs, rhs in ((lhs1, rhs1), (lhs2, rhs2), (lhs3, rhs3),
                         (lhs4, rhs4)):
            worst["lemma"] = max(worst["lemma"],
                                 operators_close(lhs, rhs) / sc)
    tol = 1e-12 * tol_scale
    out = [
        record("operator-product-rule", worst["assoc"], tol,
               trials=trials, n=n, m=m),
        record("splitting-projection", worst["split"], tol, trials=trials),
        record("projection-kernel-identities", worst["lemma"], tol,
               trials=trials, kernel_depth=depth),
        record("noncommutativity", 0.0 if noncomm_ok else 1.0, 0.5,
               trials=trials),
    ]
    return out


# -- suite: dressing -----------------------------------------------------------


def dressing_suite(seed: int = 1, n: int = 2, m: int = 24,
                   order: int = 6, tol_scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    lat = Lattice(m, 0.25, 1, DECAYING)
    state = random_bump_state(lat, n, rng, amplitude=0.08)
    margin = order + 2
    pair = compute_dressing(state, order, margin=margin)
    tol = 1e-10 * tol_scale
    out = [record("dressing-defining-equations",
                  max(pair.residuals.values()), tol, n=n, m=m, order=order)]
    # bilinear consistency: dressed shift powers agree on the shared band
    worst = 0.0
    for r in (1, 2):
        left = mul(mul(pair.S, diffop.shift_power(lat, n, r)), pair.S_inv)
        right = mul(mul(pair.Sbar, diffop.shift_power(lat, n, -r)),
                    pair.Sbar_inv)
        exps = range(-r, r + 1)
        worst = max(worst, operators_close(left, right, margin=margin,
                                           exponents=exps))
        if r == 1:
            worst = max(worst, operators_close(
                left, state.operator(), margin=margin, exponents=exps))
    out.append(record("dressing-consistency", worst, tol, orders=(1, 2)))

    # dressed projectors: commutation and resolution of the identity
    l_op = state.operator()
    resolve = None
    comm = 0.0
    for k in range(1, n + 1):
        c = dressing.compute_C(state, k, order=order, pair=pair)
        resolve = c if resolve is None else resolve + c
        comm = max(comm, operators_close(
            mul(c, l_op), mul(l_op, c), margin=margin))
    ident = diffop.identity_operator(lat, n)
    res_defect = operators_close(resolve, ident, margin=margin)
    out.append(record("dressed-projectors", max(comm, res_defect),
                      100 * tol, n=n, order=order))

    # logarithm tails solve the commutation relations [A, L] = -+ eps L_x
    logs = dressing.compute_log(state, order, pair=pair)
    eps = lat.eps
    lx = ShiftOperator.band(lat, n, {0: state.u.dx(), -1: state.v.dx()})
    res_minus = operators_close(diffop.commutator(logs.plus_tail, l_op),
                                lx * (-eps), margin=margin,
                                exponents=range(-order + 1, 1))
    res_plus = operators_close(diffop.commutator(logs.minus_tail, l_op),
                               lx * eps, margin=margin,
                               exponents=range(-1, order - 1))
    deriv_budget = 20.0 * lat.delta ** 2 + tol
    out.append(record("logarithm-cancellation", max(res_minus, res_plus),
                      deriv_budget, order=order, delta=lat.delta))
    return out


# -- suite: explicit densities ---------------------------------------------------


def densities_suite(seed: int = 2, n: int = 2, m: int = 16,
                    tol_scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    lat = Lattice(m, 0.3, 1, DECAYING)
    state = random_bump_state(lat, n, rng, amplitude=0.2)
    sl = lat.core(3)
    worst0 = worst1 = 0.0
    for k in range(1, n + 1):
        h0 = hamiltonian.density(state, "h", 0, k)
        worst0 = max(worst0, float(np.max(np.abs(h0[sl] - 1.0))))
        h1 = hamiltonian.density(state, "h", 1, k)
        ukk = state.u.data[:, k - 1, k - 1]
        worst1 = max(worst1, float(np.max(np.abs(h1[sl] - ukk[sl]))))
    tol = 1e-14 * tol_scale
    return [record("density-values", max(worst0, worst1), tol, n=n, m=m)]


# -- suite: spatial-flow identity -------------------------------------------------


def _sech_state(lattice, n, rng=None, amplitude=0.12, width_fraction=9.0):
    width = lattice.length / width_fraction
    center = lattice.length / 2.0
    amp = np.eye(n) * amplitude
    u = MatrixField.from_function(
        lattice,
        lambda xs: (amplitude / np.cosh((xs - center) / width) ** 2)[
            :, None, None] * np.broadcast_to(np.eye(n), (1, n, n)),
        lambda xs: (-2.0 * amplitude * np.sinh((xs - center) / width)
                    / np.cosh((xs - center) / width) ** 3 / width)[
            :, None, None] * np.broadcast_to(np.eye(n), (1, n, n)))
    dv = MatrixField.from_function(
        lattice,
        lambda xs: (0.5 * amplitude * np.exp(
            -((xs - center) / width) ** 2))[:, None, None]
        * np.broadcast_to(np.eye(n) * 0.5 + 0.1, (1, n, n)),
        lambda xs: (0.5 * amplitude * np.exp(-((xs - center) / width) ** 2)
                    * (-2.0 * (xs - center) / width ** 2))[:, None, None]
        * np.broadcast_to(np.eye(n) * 0.5 + 0.1, (1, n, n)))
    v = MatrixField.identity(lattice, n) + dv
    return LaxState(u, v)


def s0_suite(n: int = 2, m: int = 32, order: int = 3,
             tol_scale: float = 1.0) -> list:
    # gentle analytic seed: the residual is the O(delta^2) stencil error of
    # the marched dressing derivatives, so the profile must keep
    # delta^2 |f'''|/6 under the absolute tolerance at refine = 8
    eps = 0.35
    residuals = {}
    for refine in (4, 8, 16):
        lat = Lattice(m, eps, refine, DECAYING)
        state = _sech_state(lat, n, amplitude=1.5e-3, width_fraction=8.0)
        residuals[refine] = flows.verify_s0(state, order=order)
    out = [record("spatial-flow-identity", residuals[8], 1e-6 * tol_scale,
                  refine=8, order=order)]
    r48 = residuals[4] / max(residuals[8], 1e-300)
    r816 = residuals[8] / max(residuals[16], 1e-300)
    quad_ok = (2.5 < r48 < 6.5) and (2.5 < r816 < 6.5)
    out.append(record("spatial-flow-identity-convergence",
                      0.0 if quad_ok else 1.0, 0.5,
                      ratios=(round(r48, 2), round(r816, 2))))
    return out


# -- suite: darboux ---------------------------------------------------------------


def _soliton_waves(lat, n, zs, seed=3, times=None):
    rng = np.random.default_rng(seed)
    waves = []
    for z in zs:
        a1 = np.eye(n) + 0.1 * rng.standard_normal((n, n))
        a2 = 0.6 * np.eye(n) + 0.1 * rng.standard_normal((n, n))
        t = dict(times or {})
        waves.append(darboux.vacuum_wave(lat, n, [z, 1.0 / z], [a1, a2],
                                         times=t))
    return waves


def darboux_suite(seed: int = 3, n: int = 2, m: int = 24,
                  tol_scale: float = 1.0) -> list:
    lat = Lattice(m, 0.3, 1, DECAYING)
    vac = vacuum_state(lat, n)
    times = {(1, 1): 0.15, (1, 2): -0.1} if n > 1 else {(1, 1): 0.15}
    out = []

    # kernel annihilation and chain/determinant agreement for n = 2, 3
    worst_kernel = 0.0
    worst_equiv = 0.0
    for count, zs in ((2, (1.35, 1.6)), (3, (1.3, 1.55, 1.8))):
        waves = _soliton_waves(lat, n, zs, seed, times)
        nf = darboux.darboux_nfold(vac, waves)
        ch = darboux.darboux_chain(vac, waves)
        worst_kernel = max(worst_kernel, nf.kernel_residual)
        margin = count + 2
        worst_equiv = max(
            worst_equiv,
            (nf.state.u - ch.state.u).norm(margin),
            (nf.state.v - ch.state.v).norm(margin))
        if count == 2:
            perm = darboux.darboux_chain(vac, waves[::-1])
            perm_res = max((perm.state.u - ch.state.u).norm(margin),
                           (perm.state.v - ch.state.v).norm(margin))
            out.append(record("darboux-permutation-covariance", perm_res,
                              1e-8 * tol_scale))
            t1_closed, _ = darboux.twofold_closed_form(vac, *waves)
            closed_res = (t1_closed - nf.t_coefficients[0]).norm(margin)
            out.append(record("darboux-twofold-closed-form", closed_res,
                              1e-10 * tol_scale))
    out.append(record("darboux-kernel", worst_kernel, 1e-10 * tol_scale))
    out.append(record("darboux-chain-equivalence", worst_equiv,
                      1e-8 * tol_scale))

    # generated solutions satisfy the multicomponent Toda system
    worst_toda = 0.0
    for zs in ((1.35,), (1.35, 1.6)):
        waves = _soliton_waves(lat, n, zs, seed, times)
        sol = darboux.DarbouxSolution(lat, n, waves)
        for k in range(1, n + 1):
            worst_toda = max(worst_toda, flows.phi_form(sol, k)["max"])
    out.append(record("darboux-solutions", worst_toda, 1e-6 * tol_scale,
                      n=n))

    # scalar reduction: one component, second-order Toda form
    lat1 = Lattice(m, 0.3, 1, DECAYING)
    w1 = darboux.vacuum_wave(lat1, 1, [1.3, 1.0 / 1.3],
                             [np.eye(1), 0.7 * np.eye(1)],
                             times={(1, 1): 0.2})
    sol1 = darboux.DarbouxSolution(lat1, 1, [w1])
    out.append(record("darboux-scalar-toda",
                      flows.phi_form(sol1, 1)["second_order"],
                      1e-8 * tol_scale))

    # spectral preservation for data carried through the transformation
    waves = _soliton_waves(lat, n, (1.35, 1.6), seed, times)
    extra = _soliton_waves(lat, n, (1.9,), seed + 1, times)[0]
    nf = darboux.darboux_nfold(vac, waves)

    def carried_val(xs, _w=nf.operator, _e=extra):
        acc = None
        for m, c in sorted(_w.coeffs.items()):
            term = c.gen(xs) @ _e.val(xs + m * lat.eps)
            acc = term if acc is None else acc + term
        return acc

    carried = darboux.WaveFunction(lat, n, extra.lam, carried_val, extra.dt)
    res = carried.eigen_residual(nf.state, margin=len(waves) + 3)
    out.append(record("darboux-spectral-preservation", res,
                      1e-8 * tol_scale))
    return out


# -- suite: hamiltonian -------------------------------------------------------------


def hamiltonian_suite(seed: int = 5, n: int = 2, tol_scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    out = []

    # antisymmetry of the assembled structures (periodic, exact kernels)
    lat_p = Lattice(8, 0.35, 1, PERIODIC)
    st_p = random_periodic_state(lat_p, n, rng, amplitude=0.3,
                                 zero_mean_u=False)
    worst = 0.0
    for which in (1, 2):
        mat = hamiltonian.assemble_poisson_matrix(st_p, which)
        scale = max(float(np.max(np.abs(mat))), 1.0)
        worst = max(worst, float(np.max(np.abs(mat + mat.T))) / scale)
    out.append(record("bracket-antisymmetry", worst, 1e-12 * tol_scale,
                      m=lat_p.sites, n=n))

    # first-bracket Jacobi identity, brute force on linear functionals
    lat_j = Lattice(6, 0.4, 1, PERIODIC)
    st_j = random_periodic_state(lat_j, n, rng, amplitude=0.4,
                                 zero_mean_u=False)
    out.append(record("first-bracket-jacobi",
                      _p1_jacobi_defect(st_j, n, rng), 1e-10 * tol_scale,
                      m=lat_j.sites))

    # bracket flow equals Lax flow for the first component flows
    lat_d = Lattice(18, 0.3, 1, DECAYING)
    st_d = random_bump_state(lat_d, n, rng, amplitude=0.15)
    worst = 0.0
    for k in range(1, n + 1):
        worst = max(worst, hamiltonian.verify_flow_hamiltonian(
            st_d, FlowSpec("t", 1, k), order=3))
    out.append(record("flow-hamiltonian-correspondence", worst,
                      1e-8 * tol_scale, flow="t1k", gradient="numeric"))

    # extended flow: bracket flow against the spatial derivative
    lat_s = Lattice(18, 0.25, 8, DECAYING)
    st_s = _sech_state(lat_s, n)
    grad = hamiltonian.analytic_gradient(st_s, "htilde", 1, order=3)
    lhs = hamiltonian.apply_P1(st_s, grad)
    rhs = (st_s.u.dx(), st_s.v.dx())
    out.append(record("flow-hamiltonian-s0",
                      hamiltonian.pair_residual(lhs, rhs, margin=7),
                      1e-6 * tol_scale))

    # bi-Hamiltonian recursion at the first verifiable rung
    worst = 0.0
    for k in range(1, n + 1):
        worst = max(worst, hamiltonian.verify_recursion(st_d, 1, k, order=4))
    out.append(record("bi-hamiltonian-recursion", worst, 1e-6 * tol_scale,
                      rung=1))
    out.append(record("bi-hamiltonian-recursion-extended",
                      hamiltonian.verify_recursion(st_d, 1, tilde=True,
                                                   order=4),
                      1e-5 * tol_scale, rung=1))

    # tau symmetry with quadratic convergence in the time step
    st_t = random_bump_state(Lattice(16, 0.3, 1, DECAYING), n, rng,
                             amplitude=0.2)
    mism = hamiltonian.verify_tau_symmetry(
        st_t, ("t", 1, 1), ("t", 1, 2 if n > 1 else 1), dt=1e-4, order=3)
    out.append(record("tau-symmetry", mism, 1e-6 * tol_scale, dt=1e-4))
    d_two = hamiltonian.verify_tau_symmetry(
        st_t, ("t", 1, 1), ("t", 1, 2 if n > 1 else 1), dt=2e-3, order=3)
    d_one = hamiltonian.verify_tau_symmetry(
        st_t, ("t", 1, 1), ("t", 1, 2 if n > 1 else 1), dt=1e-3, order=3)
    ratio = d_two / max(d_one, 1e-300)
    out.append(record("tau-symmetry-convergence",
                      0.0 if 2.5 < ratio < 6.5 else 1.0, 0.5,
                      ratio=round(ratio, 2)))
    out.append(record("tau-symmetry-extended",
                      hamiltonian.verify_tau_symmetry(
                          st_t, ("s", 0, None), ("t", 1, 1), dt=1e-4,
                          order=3),
                      1e-5 * tol_scale, pair="htilde0-h1k"))
    return out


def _p1_jacobi_defect(state, n, rng):
    """Brute-force Jacobi sum for three random linear functionals."""
    lat = state.lattice

    def const_grad():
        a = MatrixField.constant(lat, rng.standard_normal((n, n))
                                 + 1j * rng.standard_normal((n, n)))
        b = MatrixField.constant(lat, rng.standard_normal((n, n))
                                 + 1j * rng.standard_normal((n, n)))
        return hamiltonian.GradientField(a=a, b=b)

    g1, g2, g3 = const_grad(), const_grad(), const_grad()

    def pairing(grad, pair_uv, st):
        du, dv = pair_uv
        val = np.sum(np.trace(grad.a.data @ du.data, axis1=1, axis2=2)) \
            + np.sum(np.trace(grad.b.data @ dv.data, axis1=1, axis2=2))
        return complex(val * lat.delta)

    def bracket_grad(ga, gb):
        """Gradient of state -> <ga, P1(gb)> (linear, exact differences)."""
        h = 1e-3
        out = []
        for which in (0, 1):
            g = np.zeros((lat.n_fine, n, n), dtype=np.complex128)
            for s in range(lat.n_fine):
                for p in range(n):
                    for q in range(n):
                        up = np.array(state.u.data)
                        vp = np.array(state.v.data)
                        tgt = up if which == 0 else vp
                        tgt[s, p, q] += h
                        stp = LaxState(MatrixField(lat, up),
                                       MatrixField(lat, vp))
                        um = np.array(state.u.data)
                        vm = np.array(state.v.data)
                        tgt = um if which == 0 else vm
                        tgt[s, p, q] -= h
                        stm = LaxState(MatrixField(lat, um),
                                       MatrixField(lat, vm))
                        val = (pairing(ga, hamiltonian.apply_P1(stp, gb), stp)
                               - pairing(ga, hamiltonian.apply_P1(stm, gb),
                                         stm)) / (2 * h)
                        g[s, q, p] = val / lat.delta
            out.append(MatrixField(lat, g))
        return hamiltonian.GradientField(a=out[0], b=out[1])

    total = 0.0 + 0.0j
    scale = 0.0
    for x, y, z in ((g1, g2, g3), (g2, g3, g1), (g3, g1, g2)):
        gxy = bracket_grad(x, y)
        term = pairing(gxy, hamiltonian.apply_P1(state, z), state)
        total += term
        scale = max(scale, abs(term))
    return abs(total) / max(scale, 1.0)


# -- suite: conservation ---------------------------------------------------------


def conservation_suite(seed: int = 7, tol_scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    # scalar case on a periodic lattice
    lat1 = Lattice(16, 0.3, 1, PERIODIC)
    st1 = random_periodic_state(lat1, 1, rng, amplitude=0.2,
                                zero_mean_u=False)
    traj1 = flows.integrate(st1, FlowSpec("t", 1, 1), 1e-3, 100, order=2)
    out.append(record("trace-conservation", traj1.trace_drift(),
                      1e-8 * tol_scale, n=1, boundary="periodic",
                      steps=100, dt=1e-3))
    # matrix case on a decaying window
    lat2 = Lattice(18, 0.3, 1, DECAYING)
    st2 = random_bump_state(lat2, 2, rng, amplitude=0.12)
    traj2 = flows.integrate(st2, FlowSpec("t", 1, 1), 1e-3, 100, order=2)
    out.append(record("trace-conservation-matrix", traj2.trace_drift(),
                      1e-8 * tol_scale, n=2, boundary="decaying",
                      steps=100, dt=1e-3))
    return out


SUITES = {
    "operators": operators_suite,
    "dressing": dressing_suite,
    "densities": densities_suite,
    "s0": s0_suite,
    "darboux": darboux_suite,
    "hamiltonian": hamiltonian_suite,
    "conservation": conservation_suite,
}


def run_suite(name: str, seed: int = None, n: int = None,
              tol_scale: float = 1.0) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; have {sorted(SUITES)}")
    kwargs = {"tol_scale": tol_scale}
    if seed is not None:
        kwargs["seed"] = seed
    if n is not None and name not in ("s0", "conservation"):
        kwargs["n"] = n
    elif n is not None and name == "s0":
        kwargs["n"] = n
    fn = SUITES[name]
    if name == "conservation":
        kwargs.pop("n", None)
    if name == "s0":
        kwargs.pop("seed", None)
    return fn(**kwargs)
