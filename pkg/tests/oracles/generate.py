"""Regenerate values.json with mpmath, independently of the bvortex code paths.

Run from the repository root: python3 tests/oracles/generate.py
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30


def f(t):
    return mp.asinh(1 / t) - 1 / (t + mp.sqrt(1 + t * t))


def kh_double(h, r):
    # int_0^1 int_0^1 ds dt / sqrt(r^2 + h^2 (s - t)^2), reduced to one variable
    g = lambda u: 2 * (1 - u) / mp.sqrt(r * r + h * h * u * u)  # noqa: E731
    return mp.quad(g, [0, 1])


def w_pairs(thetas, degrees):
    s = mp.mpf(0)
    for j in range(len(thetas)):
        for k in range(j):
            dist = abs(mp.expj(thetas[j]) - mp.expj(thetas[k]))
            s += degrees[j] * degrees[k] * mp.log(dist)
    return -2 * mp.pi * s


def kh_circle(h):
    # int over the unit circle of (2/h) f(|x - y|/h), chord 2 sin(t/2)
    g = lambda t: (2 / h) * f(2 * mp.sin(t / 2) / h)  # noqa: E731
    pts = [0] + [mp.mpf(10) ** (-k) for k in range(12, 0, -1)] + [mp.pi]
    return 2 * mp.quad(g, pts)


def regime(h, beta, C):
    L = abs(mp.log(h))
    eta2 = C * h * L**beta
    eps = eta2 / (h * L)
    lam = (1 / (eps * abs(mp.log(eps)))) * (mp.log(L) / L)
    return {"eta2": eta2, "eps": eps, "lambda": lam}


def main():
    pi = mp.pi
    out = {
        "gamma0": pi * mp.log(mp.e / (4 * pi)),
        "w_antipodal": -2 * pi * mp.log(2),
        "w_quarter": -pi * mp.log(2),
        "w_plus_2gamma0": 2 * pi * mp.log(mp.e / (8 * pi)),
        "w_four": w_pairs([0, pi / 2, pi, 3 * pi / 2], [1, 1, 1, -1]),
        "psi_half": -(mp.log(0.5) + mp.log(1.5)),
        "f_1": f(mp.mpf(1)),
        "tf_10": 10 * f(mp.mpf(10)),
        "f_1e-4": f(mp.mpf("1e-4")),
        "kh_h0.01_r0.01": kh_double(mp.mpf("0.01"), mp.mpf("0.01")),
        "gamma_ball_R_eq_h": 1 - 1 / (1 + mp.sqrt(2)),
        "poly_kappa_theta0": (1 + mp.mpf("1.2") / mp.mpf("1.6")) / mp.mpf("1.6"),  # (1 + Re z Phi''/Phi')/|Phi'| at z=1
        "counter_term_N2_rho0.01": 2 * pi * mp.log(100),
    }
    for h in ("1e-2", "1e-3", "1e-6"):
        for k, v in regime(mp.mpf(h), mp.mpf("0.5"), 1).items():
            out[f"regime_h{h}_{k}"] = v
    grid = {}
    for i, h in enumerate(["1e-1", "3e-2", "1e-2", "3e-3", "1e-3"]):
        for j, r in enumerate(["1e-4", "1e-3", "3e-3", "1e-2", "3e-2", "0.1", "0.2", "0.5", "1", "2",
                               "5", "10", "0.05", "0.3", "0.7", "1.5", "3", "7", "2e-4", "4e-2"]):
            grid[f"{h}:{r}"] = float(kh_double(mp.mpf(h), mp.mpf(r)))
    for h in ("1e-2", "1e-3", "1e-4", "1e-5"):
        out[f"kh_circle_h{h}"] = kh_circle(mp.mpf(h))
    vals = {k: float(v) for k, v in out.items()}
    vals["kh_grid"] = grid
    path = Path(__file__).with_name("values.json")
    path.write_text(json.dumps(vals, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
