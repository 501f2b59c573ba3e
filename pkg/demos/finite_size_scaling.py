# Optimized peak heights grow faster than N: chi/N fits a positive power.
# Small sizes keep this quick; the shipped tests run the full-size protocol.
import numpy as np

from bjjsense.criticality import scaling_study

sizes = (60, 90, 140, 200)
study = scaling_study(
    sizes, delta_grid=np.logspace(-5, -2, 10), window_points=21
)

print("per-size optimized results (T = 0):")
print(f"{'N':>5} {'lambda_c^(N)':>13} {'delta*_q':>10} {'chi_q':>10} "
      f"{'chi_q/N^(4/3)':>14}")
for i, n in enumerate(study.n_values):
    print(f"{n:5d} {study.lambda_c[i]:13.5f} "
          f"{study.delta_star['quantum'][i]:10.2e} "
          f"{study.chi['quantum'][i]:10.1f} "
          f"{study.chi['quantum'][i] / n ** (4 / 3):14.4f}")

print()
fit = study.shift_fit
print(f"critical shift:  -1 - lambda_c^(N) = {fit.prefactor:.3f} "
      f"* N^({fit.exponent:.3f})   r^2 = {fit.r_squared:.5f}")
for method in ("moment", "classical", "quantum"):
    fit = study.fits[method]
    print(f"chi_{method:9s}/N = {fit.prefactor:.3f} * N^({fit.exponent:.3f})"
          f"   r^2 = {fit.r_squared:.5f}")
print("\nthe chi/N exponents sit above 1/3 at these sizes and drift toward "
      "it as N grows")
