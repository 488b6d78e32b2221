"""Plain Monte Carlo estimate of the two-saddle prefactor, independent of hetlab.

Chain lambda = (1, 1), mu = (0.5, 1), unit box (R = L = 1), entrance
xi_0 ~ Uniform[-3, 3]. h = E g_c(xi_0) * K E[((-U - N) v 0)^(1/rho)] with
U ~ N(0, 1/(2 lambda_2)) and N ~ N(0, 1/(2 mu_1)).
"""

import numpy as np

N_SAMPLES = 10_000_000
rng = np.random.default_rng(20240611)

lam1, mu1, lam2 = 1.0, 0.5, 1.0
rho = mu1 / lam1
c = 1.0 / (2 * lam1)
K = 1.0  # R / L^(1/rho) with R = L = 1

xi = rng.uniform(-3.0, 3.0, N_SAMPLES)
g = np.exp(-xi ** 2 / (2 * c)) / np.sqrt(2 * np.pi * c)
U = rng.normal(0.0, np.sqrt(1.0 / (2 * lam2)), N_SAMPLES)
N = rng.normal(0.0, np.sqrt(1.0 / (2 * mu1)), N_SAMPLES)
inner = K * np.maximum(-U - N, 0.0) ** (1.0 / rho)

# the two factors are independent, so the product of means is unbiased
h = g.mean() * inner.mean()
rel_se = np.sqrt((g.std() / g.mean()) ** 2 + (inner.std() / inner.mean()) ** 2) / np.sqrt(N_SAMPLES)
print(f"h_mc = {h:.17g}")
print(f"rel_se = {rel_se:.3g}")
