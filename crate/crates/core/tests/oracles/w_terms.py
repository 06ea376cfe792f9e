"""Independent transcription of the W-statistic means and covariances.

Each term is assembled symbolically from the underlying identities
(law of total covariance over N_pos, product-of-independent variances,
indicator algebra) rather than from the simplified closed forms, then
evaluated at random plug-in moment vectors. Output is frozen into
tests/fixtures/w_moments.json.
"""

import json
import random

import sympy as sp

N, p, Prec, Ppt, PA, PB = sp.symbols("N p P_rec P_pt P_A P_B")
muA, s2A, muB, s2B = sp.symbols("mu_A s2_A mu_B s2_B")
wA, s2w, wstar, r, rp, rstar = sp.symbols("omega_A s2_omega omega_star r r_prime r_star")
Om, s2Om, beta, s2b, Ts = sp.symbols("Omega s2_Omega beta s2_beta T_star")

Np = N * p
W3m = Om - beta * Ts
k = (Prec - beta) / W3m  # lambda (1 - p) / p


def cov_sum(exy, ex, ey):
    # Cov(sum_{D=1} X_i, sum_{D=1} Y_i) for iid data with N_pos ~ Bin(N, p)
    return Np * (exy - p * ex * ey)


def var_sum(ex2, ex):
    return cov_sum(ex2, ex, ex)


# per-individual expectations
E_R = Ppt
E_notB = 1 - PB
E_AT = PA * muA
E_AT2 = PA * (s2A + muA**2)
E_Aw = PA * wA
E_Aw2 = PA * (s2w + wA**2)
E_ATw = PA * wstar
E_BT = PB * muB
E_BT2 = PB * (s2B + muB**2)
E_RB = k * PB * (W3m + muB * beta)
E_RBT = k * PB * (muB * W3m + (s2B + muB**2) * beta)
E_RAT = Prec * PA * muA + k * (E_AT2 - E_ATw)
E_RAw = Prec * PA * wA + k * (E_ATw - E_Aw2)

# means
EW1 = Np * E_R - beta * Np * E_notB
EW2 = Np
EW3 = W3m
EW4 = Np * (E_AT - E_Aw)
EW5 = beta * Np * E_BT

# Var(W1): nested binomial, product with beta-hat, cross term
var_Npt = var_sum(E_R, E_R)
var_notB = var_sum(E_notB, E_notB)
mean_notB = Np * E_notB
II = (s2b + beta**2) * var_notB + s2b * mean_notB**2
III = beta * cov_sum(E_R - E_RB, E_R, E_notB)
V1 = var_Npt + II - 2 * III

V2 = Np * (1 - p)
V3 = s2Om + s2b * Ts**2

# Var(W4): sum A T, sum A int phi-hat (conditional variance + variance of mean), cross term
I4 = var_sum(E_AT2, E_AT)
star = Np * PA * r + PA**2 * rp * (Np**2 + Np * (1 - p) - Np)  # E(N_pos^2 - N_pos) = N^2p^2 - Np^2
starstar = var_sum(E_Aw2, E_Aw)
III4 = cov_sum(E_ATw, E_AT, E_Aw)
V4 = I4 + star + starstar - 2 * III4

# Var(W5): beta-hat times sum B T
var_BT = var_sum(E_BT2, E_BT)
mean_BT = Np * E_BT
V5 = s2b * (mean_BT**2 + var_BT) + beta**2 * var_BT

# covariances
C12 = Np * (1 - p) * E_R - beta * E_notB * Np * (1 - p)
C13 = Ts * s2b * Np * E_notB
C14 = (
    cov_sum(E_RAT, E_R, E_AT)
    - cov_sum(E_RAw, E_R, E_Aw)
    - beta * cov_sum(E_AT, E_notB, E_AT)  # (1 - B) A = A
    + beta * cov_sum(E_Aw, E_notB, E_Aw)
)
C15 = (
    beta * cov_sum(E_RBT, E_R, E_BT)
    - ((s2b + beta**2) * cov_sum(0, E_notB, E_BT) + s2b * mean_notB * mean_BT)
)
C23 = sp.Integer(0)
C24 = Np * (1 - p) * (E_AT - E_Aw)
C25 = Np * (1 - p) * beta * E_BT
C34 = -Np * PA * rstar
C35 = -Ts * s2b * mean_BT
C45 = beta * (cov_sum(0, E_AT, E_BT) - cov_sum(0, E_Aw, E_BT))  # A B = 0

means = [EW1, EW2, EW3, EW4, EW5]
cov = {
    "v1": V1, "v2": V2, "v3": V3, "v4": V4, "v5": V5,
    "c12": C12, "c13": C13, "c14": C14, "c15": C15, "c23": C23,
    "c24": C24, "c25": C25, "c34": C34, "c35": C35, "c45": C45,
}


def draw(rng, empty_groups=False):
    Tstar = 2.0
    pa = 0.0 if empty_groups else rng.uniform(0.0, 0.5)
    pb = 0.0 if empty_groups else rng.uniform(0.0, 0.5)
    mu_a = rng.uniform(0.2, 1.8)
    w_a = mu_a * rng.uniform(0.05, 0.6)
    prec = rng.uniform(0.02, 0.2)
    m = {
        "p": rng.uniform(0.05, 0.6),
        "p_rec": prec,
        "p_rec_pt": prec + rng.uniform(-0.01, 0.08) if not empty_groups else prec,
        "p_a": pa,
        "p_b": pb,
        "mu_ta": mu_a if not empty_groups else 0.0,
        "sigma2_ta": rng.uniform(0.0, 0.4) if not empty_groups else 0.0,
        "mu_tb": rng.uniform(2.0, 6.0) if not empty_groups else 0.0,
        "sigma2_tb": rng.uniform(0.0, 2.0) if not empty_groups else 0.0,
        "omega_ta": w_a if not empty_groups else 0.0,
        "sigma2_omega_ta": rng.uniform(0.0, 0.05) if not empty_groups else 0.0,
        "omega_star_ta": mu_a * w_a * rng.uniform(1.0, 1.3) if not empty_groups else 0.0,
        "r_ta": rng.uniform(0.0, 1e-3) if not empty_groups else 0.0,
        "r_prime_ta": rng.uniform(0.0, 1e-3) if not empty_groups else 0.0,
        "r_star_ta": rng.uniform(0.0, 2e-3) if not empty_groups else 0.0,
        "n_a": 0,
        "n_b": 0,
    }
    chars = {
        "mdri": rng.uniform(0.15, 0.6),
        "mdri_variance": rng.uniform(0.0, 1e-3),
        "frr": rng.uniform(0.0, 0.03),
        "frr_variance": rng.uniform(0.0, 2e-5),
        "cutoff": Tstar,
    }
    n = rng.randint(500, 20000)
    return m, chars, n


def evaluate(m, chars, n):
    subs = {
        N: n, p: m["p"], Prec: m["p_rec"], Ppt: m["p_rec_pt"], PA: m["p_a"], PB: m["p_b"],
        muA: m["mu_ta"], s2A: m["sigma2_ta"], muB: m["mu_tb"], s2B: m["sigma2_tb"],
        wA: m["omega_ta"], s2w: m["sigma2_omega_ta"], wstar: m["omega_star_ta"],
        r: m["r_ta"], rp: m["r_prime_ta"], rstar: m["r_star_ta"],
        Om: chars["mdri"], s2Om: chars["mdri_variance"], beta: chars["frr"],
        s2b: chars["frr_variance"], Ts: chars["cutoff"],
    }
    # exact rational arithmetic, then rounded once
    rsubs = {s: sp.Rational(repr(v)) if isinstance(v, float) else sp.Integer(v) for s, v in subs.items()}
    mean_vals = [float(sp.nsimplify(e.subs(rsubs))) for e in means]
    cov_vals = {key: float(e.subs(rsubs)) for key, e in cov.items()}
    return mean_vals, cov_vals


def main():
    rng = random.Random(20240611)
    cases = []
    for i in range(50):
        m, chars, n = draw(rng)
        mv, cv = evaluate(m, chars, n)
        cases.append({"moments": m, "chars": chars, "n": n, "means": mv, "cov": cv})
    reductions = []
    for i in range(5):
        m, chars, n = draw(rng, empty_groups=True)
        mv, cv = evaluate(m, chars, n)
        reductions.append({"moments": m, "chars": chars, "n": n, "means": mv, "cov": cv})
    with open("crates/core/tests/fixtures/w_moments.json", "w") as fh:
        json.dump({"cases": cases, "reductions": reductions}, fh, indent=1)


if __name__ == "__main__":
    main()
