"""Smoke test for the infera Python bindings.

Run after building the extension, e.g.
    maturin develop -m crates/python/Cargo.toml
    python crates/python/python/smoke_test.py
"""

import math

import infera


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    twins = infera.JointDistribution.perfectly_correlated(3, 0.5)
    assert len(twins) == 8 and twins.n == 3
    cert = infera.nu_exact(twins, [0.2], 0)
    assert close(cert.nu, 0.6, 1e-6), cert
    assert len(cert.witness) == 8

    prod = infera.JointDistribution.product([[0.3, 0.7], [0.6, 0.4]])
    assert close(infera.nu_exact(prod, [0.4, 0.9], 1).nu, 0.9, 1e-6)
    nu, _, warning = infera.nu_closed_form(prod, [0.4, 0.9], 0)
    assert close(nu, 0.4, 1e-12) and warning is None

    parity = infera.JointDistribution.parity_constrained(2, 2)
    try:
        infera.nu_closed_form(parity, [0.2], 0)
    except infera.InferaException:
        pass
    else:
        raise AssertionError("parity prior should be rejected")
    forced, _, warning = infera.nu_closed_form(parity, [0.2], 0, force=True)
    assert warning is not None and forced <= 0.36 + 1e-9

    audit = infera.dp_audit([math.exp(-2), math.exp(-1), math.exp(-1), 1.0])
    assert all(close(e, 1.0, 1e-12) for e in audit), audit

    tree = infera.JointDistribution.ising_tree(2, 2, 0.3, 0.0)
    gibbs = infera.nu_gibbs(tree, [0.2], 0)
    assert close(gibbs, infera.nu_exact(tree, [0.2], 0).nu, 1e-6)

    bound = infera.influence_bound(tree, [0.1])
    assert bound.spectral_norm is not None and bound.spectral_norm < 1.0
    assert all(v >= infera.nu_exact(tree, [0.1], a).nu - 1e-6 for a, v in enumerate(bound.nu_bound))

    assert close(infera.critical_coupling(2), math.atanh(0.5), 1e-12)
    assert infera.bethe_fixed_point(0.7, 0.0, 2).x_fixed == 1.0
    assert infera.nu_bethe_limit(0.7, 1e-6, 2) > 0.05
    eps = infera.enforceable_epsilon(0.5, 0.2, 2)
    assert eps is not None and close(infera.nu_bethe_limit(0.2, eps, 2), 0.5, 1e-6)
    profile = infera.sensitivity_profile(3.0, 0.3, 2, [0.2, 1.0])
    assert profile[0][1] / 0.2 < 2 and profile[1][1] / 1.0 > 10

    print("infera smoke test passed")


if __name__ == "__main__":
    main()
