"""How the work of a full run grows with the number of levels.

For each n the total number of V-cycle matvecs is divided by the finest
dof count N_n.  In 2d the coarse levels add a bounded fraction and the ratio
is flat; in 1d the levels below the finest still carry close to half the
dofs, so the ratio creeps up toward its limit.  The dense coarse-space work
grows by the same amount per added level.
"""

from nlmg import parse_config, run_study

for label, base, ns in [
    ("1d GPE", {"domain": "interval01", "H": 0.125, "nonlinearity": {"kind": "gpe", "v_harmonic": 100.0, "zeta": 10.0}}, range(3, 7)),
    ("2d Laplace", {"domain": "square01", "H": 0.25}, range(3, 6)),
]:
    print(label)
    for n in ns:
        report, wall = run_study(parse_config({**base, "n": n}))
        w = report["work"]
        print(f"  n={n}  N_n={w['n_dofs'][-1]:6d}  MG work / N_n {w['total_mg_work_per_fine_dof']:6.2f}  "
              f"dense-eig work {w['dense_eig_work']:6d}  ({wall:.1f} s)")
