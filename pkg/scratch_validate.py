"""Development validation of the core math (not part of the deliverable tests)."""
import itertools
import time

import numpy as np

from amflab import (
    Scenario, make_basis, make_constellation, build_channel, allone_pilot,
    assemble_tx, instantaneous_scnr, expected_quadratic_moment,
    deterministic_avg_scnr, solve_fixed_point, stream_rng, dbm_to_mw,
)
from amflab.signals import sample_symbols, path_gain_variance
from amflab.dpi import trace_gradient, avg_scnr_gradient
from amflab.rmt import clutter_moment_coefficient

rng = np.random.default_rng(7)


def rand_unit(n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v


# ---------------------------------------------------------------------------
# 1. expected_quadratic_moment vs enumeration
# ---------------------------------------------------------------------------
print("=== 1. quartic moment vs enumeration ===")
for n, nbasis, q in [(2, "sc", 1), (2, "ofdm", 1), (3, "ofdm", 2), (3, "afdm", 2), (3, "qam16", 2)]:
    const = make_constellation("qam", 16) if nbasis == "qam16" else make_constellation("psk", 4)
    basis = make_basis("ofdm" if nbasis == "qam16" else nbasis, n)
    bins = [(1 + i) % n for i in range(q)]
    bins = [b for b in bins if b != 0][:q]
    clutter = tuple((complex(rng.standard_normal(), rng.standard_normal()), b) for b in bins)
    sc = Scenario(n=n, sigma_n2=0.5, beta0=1.0, target_bin=0, clutter=clutter,
                  pilot_power=2.0, data_power=1.7)
    ch = build_channel(sc)
    x_p = rand_unit(n)
    pts = const.points
    total = 0.0
    count = 0
    for combo in itertools.product(range(pts.size), repeat=n):
        s = pts[list(combo)]
        x = x_p + np.sqrt(sc.data_power) * (basis.matrix @ s)
        hx = ch.matrix @ x
        total += np.abs(np.vdot(x, hx)) ** 2
        count += 1
    exact = total / count
    formula = expected_quadratic_moment(ch, x_p, basis, const.kurtosis, sc.data_power)
    rel = abs(exact - formula) / exact
    print(f"  N={n} basis={nbasis} Q={q}: enum={exact:.10e} formula={formula:.10e} rel={rel:.2e}")
    assert rel < 1e-12, "quartic moment mismatch"

# ---------------------------------------------------------------------------
# 2. gamma_bar vs Monte Carlo on the single-clutter validation scenario
# ---------------------------------------------------------------------------
print("=== 2. deterministic avg SCNR vs MC (single clutter path) ===")
sigma_n2 = dbm_to_mw(-90.0)
p_p = dbm_to_mw(20.0)
p_d = dbm_to_mw(30.0)
beta0 = np.sqrt(path_gain_variance(50.0))
const = make_constellation("psk", 4)

for n in (12, 32, 128):
    gain = np.sqrt(path_gain_variance(35.0)) * np.exp(1j * 0.4)
    sc = Scenario(n=n, sigma_n2=sigma_n2, beta0=beta0, target_bin=10 % n,
                  clutter=((gain, 12 % n),), pilot_power=p_p, data_power=p_d)
    basis = make_basis("ofdm", n)
    ch = build_channel(sc)
    x_p = allone_pilot(n, p_p)
    t0 = time.time()
    vals = np.empty(4000)
    rng_mc = stream_rng(123, 0)
    for i in range(vals.size):
        s = sample_symbols(const, n, rng_mc)
        x = x_p + np.sqrt(p_d) * (basis.matrix @ s)
        vals[i] = instantaneous_scnr(sc, x, ch).gamma
    mc = vals.mean()
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    for rot in (True, False):
        rep = deterministic_avg_scnr(sc, basis, const.kurtosis, x_p, channel=ch, rotate_pilot=rot)
        print(f"  N={n:4d} rot={rot}: det={rep.value:.6e} mc={mc:.6e}(+-{se:.2e}) "
              f"rel={(rep.value-mc)/mc:+.3%} ub={rep.upper_bound:.4e} t={time.time()-t0:.1f}s "
              f"fp_res={rep.fixed_point.residual:.1e} it={rep.fixed_point.iterations}")

# ---------------------------------------------------------------------------
# 3. rotation variant adjudication at Q = 4
# ---------------------------------------------------------------------------
print("=== 3. rotation adjudication, Q=4 ===")
for n in (32, 64):
    g = stream_rng(9, n)
    bins = [12 % n, 17 % n, 23 % n, 29 % n]
    clutter = tuple(
        (np.sqrt(path_gain_variance(d)) * np.exp(2j * np.pi * g.random()), b)
        for d, b in zip((30.0, 33.0, 36.0, 39.0), bins)
    )
    sc = Scenario(n=n, sigma_n2=sigma_n2, beta0=beta0, target_bin=10,
                  clutter=clutter, pilot_power=p_p, data_power=p_d)
    basis = make_basis("ofdm", n)
    ch = build_channel(sc)
    # random pilot (not all-one) to break flat-spectrum degeneracy harder
    for pname, x_p in (("allone", allone_pilot(n, p_p)),
                       ("random", np.sqrt(p_p * n) * (lambda v: v / np.linalg.norm(v))(g.standard_normal(n) + 1j * g.standard_normal(n)))):
        vals = np.empty(20000)
        rng_mc = stream_rng(321, n)
        for i in range(vals.size):
            s = sample_symbols(const, n, rng_mc)
            x = x_p + np.sqrt(p_d) * (basis.matrix @ s)
            vals[i] = instantaneous_scnr(sc, x, ch).gamma
        mc = vals.mean()
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        line = f"  N={n} pilot={pname}: mc={mc:.6e}(+-{se:.1e})"
        for rot in (True, False):
            rep = deterministic_avg_scnr(sc, basis, const.kurtosis, x_p, channel=ch, rotate_pilot=rot)
            line += f" | rot={rot}: {rep.value:.6e} ({(rep.value-mc)/mc:+.2%})"
        print(line)

# ---------------------------------------------------------------------------
# 4. trace gradient vs finite differences
# ---------------------------------------------------------------------------
print("=== 4. trace gradient FD check ===")
n = 6
gainlist = tuple((0.5 * np.exp(1j * 0.3 * k), (10 + k) % n) for k in (2, 3))
sc = Scenario(n=n, sigma_n2=0.8, beta0=1.0, target_bin=1,
              clutter=(((0.9 + 0.2j), 2), ((0.4 - 0.7j), 4)), pilot_power=1.5, data_power=2.0)
ch = build_channel(sc)
x_p = rand_unit(n)
x_p = np.sqrt(sc.pilot_budget) * x_p / np.linalg.norm(x_p)
omega = np.outer(x_p, x_p.conj())

for rot in (True, False):
    fp = solve_fixed_point(ch, omega, sc.sigma_n2, sc.data_power, rotate_pilot=rot)
    tg = trace_gradient(ch, omega, fp, sc.sigma_n2, sc.data_power, rotate_pilot=rot)

    def tr_t(om):
        return solve_fixed_point(ch, om, sc.sigma_n2, sc.data_power, rotate_pilot=rot,
                                 step_tol=1e-14).resolvent_trace

    errs = []
    for trial in range(6):
        e = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        e = 0.5 * (e + e.conj().T)
        e /= np.linalg.norm(e)
        eps = 1e-3 * np.linalg.norm(omega)
        fd = (tr_t(omega + eps * e) - tr_t(omega - eps * e)) / (2 * eps)
        an = float(np.trace(tg @ e).real)
        errs.append(abs(fd - an) / max(abs(fd), 1e-300))
    print(f"  rot={rot}: max rel err over probes = {max(errs):.2e}")

# ---------------------------------------------------------------------------
# 5. full objective gradient FD
# ---------------------------------------------------------------------------
print("=== 5. avg-SCNR gradient FD check ===")
basis6 = make_basis("ofdm", n)
for rot in (True, False):
    bundle = avg_scnr_gradient(sc, basis6, const.kurtosis, omega, channel=ch, rotate_pilot=rot)

    def gbar(om):
        return deterministic_avg_scnr(sc, basis6, const.kurtosis, om, channel=ch,
                                      rotate_pilot=rot).value

    errs = []
    for trial in range(8):
        e = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        e = 0.5 * (e + e.conj().T)
        e /= np.linalg.norm(e)
        eps = 1e-4 * np.linalg.norm(omega)
        fd = (gbar(omega + eps * e) - gbar(omega - eps * e)) / (2 * eps)
        an = float(np.trace(bundle.gradient @ e).real)
        errs.append(abs(fd - an) / max(abs(fd), 1e-300))
    print(f"  rot={rot}: max rel err over probes = {max(errs):.2e}")

print("ALL SCRATCH CHECKS DONE")
