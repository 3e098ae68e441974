"""Independent evaluation of the six-directional radiation balance.

Plain-float arithmetic, written without the package, used to freeze the
expected values in the tests. Run: ``python tests/oracles/radiation_oracle.py``.
"""
SIGMA = 5.670374419e-8
A_K, A_L, A1 = 0.70, 0.97, 0.97
W_UD, W_LAT = 0.06, 0.22


def q_total(s_up, s_down, s_lat, l_up, l_down, l_lat):
    q_ud = W_UD * ((A_K * s_up + A_L * l_up) + (A_K * s_down + A_L * l_down))
    q_lat = W_LAT * sum(A_K * s + A_L * l for s, l in zip(s_lat, l_lat))
    return q_ud + q_lat


def tmrt(q, a1=A1):
    return (q / (a1 * SIGMA)) ** 0.25 - 273.15


if __name__ == "__main__":
    q = q_total(100.0, 50.0, [150.0] * 4, 450.0, 500.0, [430.0] * 4)
    print("mixed case Q =", repr(q), "T =", repr(tmrt(q)))
    l300 = SIGMA * 300.0 ** 4
    print("sigma*300^4 =", repr(l300), "Q =", repr(A_L * l300))
    # zero-initialised network heads: every flux = scale * ln 2
    import math
    for scale in (1.0, 100.0):
        f = scale * math.log(2.0)
        q0 = q_total(f, f, [f] * 4, f, f, [f] * 4)
        print("zero-init scale", scale, "flux", repr(f), "T =", repr(tmrt(q0)))
