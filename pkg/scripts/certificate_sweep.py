"""How conservative are the topology-free design rules on a concrete network?

Scales every load of a scenario by a common factor and records, per factor,
which design rules hold, whether the load flow still has a solution above
v_min, and whether the topology-aware checks pass.

    python3 scripts/certificate_sweep.py --scenario paper_fig3 --max-scale 20
"""
import argparse

import numpy as np

from adhocgrid import certificates as cert
from adhocgrid import loadflow
from adhocgrid.scenario import parse_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="paper_fig3")
    ap.add_argument("--max-scale", type=float, default=20.0)
    ap.add_argument("--points", type=int, default=40)
    args = ap.parse_args()

    sc = parse_scenario(args.scenario)
    p_rated = sc.rated_powers()
    print(f"R_sigma = {sc.graph.R_sigma:.4g} ohm, max Z_kk = "
          f"{loadflow.effective_impedance(sc.graph).z_inf_star:.4g} ohm, v_min = {sc.v_min} V")
    print(f"{'scale':>7}{'p_sigma (W)':>13}  {'rules':<6}{'flow':<6}{'v_min ok':<10}{'topology':<9}")
    last_rules = last_feasible = None
    for s in np.linspace(args.max_scale / args.points, args.max_scale, args.points):
        g = sc.graph.with_load_powers(s * p_rated)
        rules = cert.check_design_rules(cert.DesignEnvelope.from_graph(g, sc.v_ref, sc.v_min)).passed
        sol = loadflow.solve_equilibrium(g, sc.v_ref)
        vmin_ok = sol.converged and loadflow.check_min_voltage(g, sol, sc.v_min)[0]
        topo = sol.converged and all(r.passed for r in cert.check_topology_aware(g, sol.v_star))
        print(f"{s:7.2f}{g.p_sigma:13.1f}  {str(rules):<6}{str(sol.converged):<6}{str(vmin_ok):<10}{str(topo):<9}")
        last_rules = s if rules else last_rules
        last_feasible = s if vmin_ok and topo else last_feasible
    if last_rules and last_feasible:
        print(f"design rules certify up to x{last_rules:.2f}; the network itself stays feasible and "
              f"stable up to at least x{last_feasible:.2f} (conservatism {last_feasible / last_rules:.1f}x)")


if __name__ == "__main__":
    main()
