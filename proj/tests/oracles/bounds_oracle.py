"""High-precision reference values for the bound calculators.

Independent of the C++ code: each formula is written out directly with
mpmath at 50 significant digits. The C++ tests freeze the printed values.
Run: python3 tests/oracles/bounds_oracle.py
"""
from mpmath import mp, mpf, log, sqrt, e, ceil

mp.dps = 50


def show(name, value):
    print(f"{name:32s} {mp.nstr(value, 20):>28s}  ceil={int(ceil(value))}")


# ERM-to-multicalibration composition, m(eps, delta) = ln(1/delta)/eps^2, gamma=.5 psi=.3 eps=.3 delta=.2 |G|=|Y|=2
eps_p = mpf("0.3") * mpf("0.3") / 3
delta_p = mpf("0.2") / (4 * 2 * 2)
show("main_log_over_eps2", 2 / mpf("0.5") * log(1 / delta_p) / eps_p**2)

# VC: d=10, |G|=|Y|=2, delta=.05 eps=.1 psi=.5 gamma=.5 C=1
show("vc", (10 + log(4 / mpf("0.05"))) / (mpf("0.1")**2 * mpf("0.5")**2 * mpf("0.5")))

# kernel ERM: B^2=1 lambda=1 delta=.05 eps=.1
show("kernel_erm", (23 + 64 * log(4 / mpf("0.05"))) / mpf("0.1")**2)
show("kernel_erm_bsq0", 64 * log(4 / mpf("0.05")) / mpf("0.1")**2)
show("kernel_erm_lambda_half", (23 * 4 + 64 * log(4 / mpf("0.05"))) / mpf("0.1")**2)

# kernel multicalibration: B^2=1 lambda=1 eps=.3 delta=.1 gamma=psi=.5 |G|=|Y|=2
show("kernel_mc", (1152 * log(16 * 4 / mpf("0.1")) + 414) / (mpf("0.5") * mpf("0.3")**2 * mpf("0.5")**2))

# relu ERM toy: d_max=2 |X|_F=1 s=[1] b=[1] delta=.05 eps=.5
cap = log(4)
show("relu_erm", (7200 * cap**2 + 64 * log(4 / mpf("0.05"))) / mpf("0.5")**2)
# relu multicalibration toy: gamma=psi=.5 eps=.5 delta=.05 |G|=|Y|=2
show("relu_mc", (129600 * cap**2 + 1152 * log(16 * 4 / mpf("0.05"))) / (mpf("0.5") * mpf("0.5")**2 * mpf("0.5")**2))

# hard margin: D=2 rho=.5 gamma=psi=.5 eps=.1 delta=.05 |G|=|Y|=2 C=1
show("hard_margin", 4 * log(4 * 4 / mpf("0.05")) / (mpf("0.5")**2 * mpf("0.5") * mpf("0.5") * mpf("0.1")))

# two-sided gap: R=.1 c=1 delta=.05 n=1000
show("gap_empirical", mpf("0.2") + 4 * sqrt(2 * log(4 / mpf("0.05")) / 1000))
show("gap_expectation", mpf("0.2") + sqrt(2 * log(2 / mpf("0.05")) / 1000))

# occupancy: |G|=4 delta=.1 gamma=.2
show("occupancy", 8 * log(4 / mpf("0.1")) / mpf("0.2"))

# Rademacher closed forms
show("kernel_rad_bsq1_n100", sqrt(23 * e / (22 * 100)))
show("relu_rad_n100", 4 / mpf(100)**mpf(1.5) + 26 * log(100) * log(4) / 100)
