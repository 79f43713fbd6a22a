"""Fixed-point and Newton corrections side by side.

At f = 0 both corrections solve the same linear problem, so the eigenvalues
agree to round-off.  For a strongly nonlinear GPE (zeta = 50) they differ, and
the table shows by how much each deviates from a direct nonlinear solve.
"""

from nlmg import Nonlinearity, ScfConfig, SchemeConfig, build_hierarchy, direct_solve_fine, run_scheme

for name, f, scf in [
    ("f = 0", Nonlinearity.zero(), ScfConfig()),
    ("GPE zeta=50", Nonlinearity.gpe(50.0, v_harmonic=100.0), ScfConfig(damping=0.25, max_iter=400)),
]:
    runs = {}
    for corr in ("fixed_point", "newton"):
        cfg = SchemeConfig(domain="interval01", H=1 / 8, n=4, nonlinearity=f, correction=corr, scf=scf)
        _, traces, _ = run_scheme(cfg)
        runs[corr] = [t.lambda_k for t in traces]
    hier = build_hierarchy("interval01", 1 / 8, 4)
    direct = [direct_solve_fine(hier, k, f, scf).lam for k in range(1, 5)]
    print(name)
    for k, (a, b, d) in enumerate(zip(runs["fixed_point"], runs["newton"], direct), start=1):
        print(f"  level {k}: |fp - direct| {abs(a - d):.2e}   |newton - direct| {abs(b - d):.2e}   |fp - newton| {abs(a - b):.2e}")
