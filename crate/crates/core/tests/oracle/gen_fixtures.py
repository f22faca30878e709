"""High-precision reference values for the closed-form solution.

Independent of the Rust implementation: everything is recomputed from the
defining equations with mpmath at 50 significant digits.  Run with
`python3 gen_fixtures.py` and paste the printed values into the fixture
tables of the Rust tests.
"""
import mpmath as mp

mp.mp.dps = 50


def constants(r, mu, sigma, lam):
    r, mu, sigma, lam = map(mp.mpf, (r, mu, sigma, lam))
    delta = (mu - r) ** 2 / (2 * sigma ** 2)
    b = r - lam + delta
    disc = mp.sqrt(b * b + 4 * delta * lam)
    b1 = (b + disc) / (2 * delta)
    b2 = (b - disc) / (2 * delta)
    return delta, b1, b2, b1 / (b1 - 1)


def ratio_rhs(s, b1, b2):
    return (b1 * (1 - b2) * s ** (b1 - 1) + (b1 - 1) * b2 * s ** (b2 - 1)) / (b1 - b2)


def solve(r, mu, sigma, c, lam, L):
    delta, b1, b2, p = constants(r, mu, sigma, lam)
    r, c, lam, L = map(mp.mpf, (r, c, lam, L))
    target = c / (c + r * L)
    lo, hi = mp.mpf("1e-30"), mp.mpf(1)
    for _ in range(400):
        mid = (lo + hi) / 2
        if ratio_rhs(mid, b1, b2) < target:
            lo = mid
        else:
            hi = mid
    rho = (lo + hi) / 2
    k = c / r + L
    bracket = -(c / r) / b1 + (1 - b2) / (b1 - b2) * k * rho ** (b1 - 1) + (b1 - 1) / (b1 - b2) * k * rho ** (b2 - 1)
    y0 = 1 / (lam * bracket)
    yl = y0 / rho
    return dict(delta=delta, b1=b1, b2=b2, p=p, rho=rho, y0=y0, yl=yl, r=r, c=c, lam=lam, L=L,
                mu=mp.mpf(mu), sigma=mp.mpf(sigma))


def mhat(s, y):
    cr = s["c"] / s["r"]
    b1, b2 = s["b1"], s["b2"]
    if y <= s["y0"]:
        return cr * y * (1 - (y / s["y0"]) ** (b1 - 1) / b1)
    k = cr + s["L"]
    t = y / s["yl"]
    return y * (cr - (1 - b2) / (b1 - b2) * k * t ** (b1 - 1) - (b1 - 1) / (b1 - b2) * k * t ** (b2 - 1)) + 1 / s["lam"]


def value(s, w):
    """m(w) by brute-force Legendre maximisation max_y (mhat(y) - w y)."""
    w = mp.mpf(w)
    f = lambda y: -(mhat(s, y) - w * y)
    # golden-section on [0, yL]; mhat is concave so the objective is unimodal
    a, b = mp.mpf(0), s["yl"]
    g = (mp.sqrt(5) - 1) / 2
    for _ in range(300):
        c1 = b - g * (b - a)
        c2 = a + g * (b - a)
        if f(c1) < f(c2):
            b = c2
        else:
            a = c1
    y = (a + b) / 2
    return -f(y), y


def pi_star(s, w):
    """-(mu-r)/sigma^2 * m'/m'' by finite differences of the brute-force value."""
    h = mp.mpf("1e-12")
    m0, _ = value(s, w)
    mp_, _ = value(s, w + h)
    mm, _ = value(s, w - h)
    d1 = (mp_ - mm) / (2 * h)
    d2 = (mp_ - 2 * m0 + mm) / h ** 2
    return -(s["mu"] - s["r"]) / s["sigma"] ** 2 * d1 / d2


def show(name, r, mu, sigma, c, lam, L, ws=()):
    s = solve(r, mu, sigma, c, lam, L)
    print(f"# {name}: r={r} mu={mu} sigma={sigma} c={c} lambda={lam} L={L}")
    for key in ("delta", "b1", "b2", "p", "rho", "y0", "yl"):
        print(f"{key:6s} = {mp.nstr(s[key], 20)}")
    for w in ws:
        m, y = value(s, w)
        print(f"m({w}) = {mp.nstr(m, 20)}   y = {mp.nstr(y, 20)}")
    return s


if __name__ == "__main__":
    mp.mp.dps = 40
    show("canonical", "0.02", "0.06", "0.20", 1, "0.04", 10, ws=("-1", "0", "10", "-5", "25"))
    show("second", "0.03", "0.08", "0.25", 1, "0.05", 5, ws=("-1", "0"))
    show("r>lambda", "0.06", "0.10", "0.2", 1, "0.02", 10, ws=("-1",))
    for L in (5, 20, 100, 1000):
        show(f"canonical L={L}", "0.02", "0.06", "0.20", 1, "0.04", L)
