"""High-precision reference values for the thermodynamic layer.

Run with `python3 thermo_oracle.py`. The printed numbers are frozen into
`tests/thermo_oracles.rs`. Everything here is computed with mpmath at 40
digits directly from the single-site tilted density, independently of the
Rust quadrature and Newton code.
"""
import mpmath as mp

mp.mp.dps = 40


def V(r, a):
    return r * r / 2 + a * (mp.sqrt(1 + r * r) - 1)


def moments(a, beta, tau):
    w = lambda r: mp.exp(-beta * V(r, a) + beta * tau * r)
    z = mp.quad(w, [-mp.inf, -5, 0, 5, mp.inf])
    E = lambda f: mp.quad(lambda r: f(r) * w(r), [-mp.inf, -5, 0, 5, mp.inf]) / z
    return z, E


def gibbs(a, beta, tau):
    z, _ = moments(a, beta, tau)
    return mp.log(z) + mp.log(2 * mp.pi / beta) / 2


def means(a, beta, tau):
    _, E = moments(a, beta, tau)
    rbar = E(lambda r: r)
    ebar = 1 / (2 * beta) + E(lambda r: V(r, a))
    return rbar, ebar


def covariance(a, beta, tau):
    _, E = moments(a, beta, tau)
    rbar = E(lambda r: r)
    vbar = E(lambda r: V(r, a))
    var_r = E(lambda r: (r - rbar) ** 2)
    cov_re = E(lambda r: (r - rbar) * (V(r, a) - vbar))
    var_e = 1 / (2 * beta ** 2) + E(lambda r: (V(r, a) - vbar) ** 2)
    return [[1 / beta, 0, 0], [0, var_r, cov_re], [0, cov_re, var_e]]


def multipliers(a, r, e):
    # solve (rbar, ebar)(beta, tau) = (r, e) by mpmath's multidimensional root finder
    f = lambda b, t: means(a, b, t)
    b0 = 1 / (e - V(r, a))
    t0 = r + a * r / mp.sqrt(1 + r * r)
    sol = mp.findroot(lambda b, t: [f(b, t)[0] - r, f(b, t)[1] - e], (b0, t0))
    return sol[0], sol[1]


if __name__ == "__main__":
    print("G(a=0.2, beta=2, tau=0.3) =", mp.nstr(gibbs(0.2, 2, 0.3), 20))
    print("Sigma(a=0.2, beta=1, tau=0.5) =")
    for row in covariance(0.2, 1, 0.5):
        print("   ", [mp.nstr(x, 20) for x in row])
    # linear coefficients at a=0.2, beta=1, tau=0 by central differences of tau(r, e)
    rbar, ebar = means(0.2, 1, 0)
    h = mp.mpf("1e-8")
    tr = (multipliers(0.2, rbar + h, ebar)[1] - multipliers(0.2, rbar - h, ebar)[1]) / (2 * h)
    te = (multipliers(0.2, rbar, ebar + h)[1] - multipliers(0.2, rbar, ebar - h)[1]) / (2 * h)
    print("rbar, ebar (a=0.2, beta=1, tau=0) =", mp.nstr(rbar, 20), mp.nstr(ebar, 20))
    print("tau_r, tau_e, c =", mp.nstr(tr, 15), mp.nstr(te, 15), mp.nstr(mp.sqrt(tr), 15))
    # d^2 G / d beta^2 at a=0.2, beta=1, tau=0.5 by central differences
    hb = mp.mpf("1e-6")
    d2 = (gibbs(0.2, 1 + hb, 0.5) - 2 * gibbs(0.2, 1, 0.5) + gibbs(0.2, 1 - hb, 0.5)) / hb ** 2
    print("d2G/dbeta2 (a=0.2, beta=1, tau=0.5) =", mp.nstr(d2, 15))
