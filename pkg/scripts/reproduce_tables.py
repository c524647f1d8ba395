#!/usr/bin/env python3
"""Run the simulation studies behind Tables 1, 2, 4, 5, 7 and 8.

Examples::

    python3 scripts/reproduce_tables.py --table 1 --reps 10
    python3 scripts/reproduce_tables.py --table 7 --out-dir results/
    python3 scripts/reproduce_tables.py --dump-specs specs/

Every study is seeded, so a rerun with the same arguments reproduces the
same numbers.  ``--reps`` shrinks the replication count for quick looks.
"""
import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from capreg.simulation import Arm, ExperimentSpec, run_experiment

FACTORS = (0.5, 1.0, 1.5)
SMALL_N = {  # (K, q): (alpha grouped, alpha individual)
    (10, 10): (0.100, 0.300),
    (25, 10): (0.063, 0.190),
    (10, 25): (0.043, 0.190),
}
ANOVA = ("none", "weak", "moderate", "strong", "very_strong")
WAVELET = ("root_only", "one_sided", "complete", "regular", "heavy_leaved")


def _hier_arms():
    return (
        Arm("LASSO", "lasso"),
        Arm("GLASSO", "blasso", "hierarchy", norm=2.0),
        Arm("CAP(4)", "blasso", "hierarchy", norm=4.0),
        Arm("iCAP", "hicap", "hierarchy"),
    )


def studies(table: int) -> dict:
    """Map a row label to its ExperimentSpec."""
    factor = {"n": 80, "k_groups": 10, "group_size": 10, "sigma": 3.0}
    if table == 1:
        arms = [Arm("LASSO", "lasso")]
        for f in FACTORS:
            arms += [
                Arm(f"GLASSO {f}K", "blasso", "pam", f, norm=2.0),
                Arm(f"CAP(4) {f}K", "blasso", "pam", f, norm=4.0),
                Arm(f"iCAP {f}K", "icap", "pam", f),
            ]
        return {"grouping": ExperimentSpec("grouped_factor", factor, 50, 101, arms=tuple(arms))}
    if table == 2:
        arms = [Arm("LASSO aicc", "lasso", selection="aicc"), Arm("LASSO cv", "lasso", selection="cv")]
        for f in FACTORS:
            arms += [Arm(f"iCAP {f}K aicc", "icap", "pam", f, selection="aicc"), Arm(f"iCAP {f}K cv", "icap", "pam", f, selection="cv")]
        return {"grouping": ExperimentSpec("grouped_factor", factor, 50, 101, arms=tuple(arms))}
    if table in (4, 5):
        scheme = "grouped" if table == 4 else "individual"
        arms = (Arm("LASSO", "lasso"),) + tuple(Arm(f"iCAP {f}K", "icap", "pam", f) for f in FACTORS)
        out = {}
        for (K, q), alphas in SMALL_N.items():
            prm = {"n": 80, "k_groups": K, "group_size": q, "scheme": scheme, "alpha": alphas[table - 4], "sigma": 3.7}
            out[f"p={K * q}, q={q}"] = ExperimentSpec("small_n_large_p", prm, 100, 400 + 10 * table + K + q, arms=arms)
        return out
    if table == 7:
        return {lvl: ExperimentSpec("anova", {"interaction_level": lvl}, 50, 700 + i, "cv", arms=_hier_arms()) for i, lvl in enumerate(ANOVA)}
    if table == 8:
        return {
            sc: ExperimentSpec("wavelet", {"scenario": sc}, 200, 800 + i, "cv", 5, "balanced", _hier_arms())
            for i, sc in enumerate(WAVELET)
        }
    raise SystemExit(f"no study for table {table}; choose from 1, 2, 4, 5, 7, 8")


def _print_table(table, rows, reports):
    metrics = ("model_error", "n_selected_vars", "n_selected_groups", "df", "hierarchy_gap")
    arms = list(next(iter(reports.values())).summary)
    for m in metrics:
        if not any(m in rep.summary[a] for rep in reports.values() for a in arms):
            continue
        print(f"\n[{m}]")
        print("row".ljust(16) + "".join(a.rjust(20) for a in arms))
        for row in rows:
            s = reports[row].summary
            cells = [f"{s[a][m]['mean']:.3f} ({s[a][m]['se']:.3f})" if m in s[a] else "-" for a in arms]
            print(row.ljust(16) + "".join(c.rjust(20) for c in cells))
    if table == 2:
        rep = reports["grouping"]
        print("\n[ME(AIC_C) - ME(CV)]")
        for name in ["LASSO"] + [f"iCAP {f}K" for f in FACTORS]:
            mean, se = rep.paired_difference(f"{name} aicc", f"{name} cv")
            print(f"{name:16s}{mean:+.3f} ({se:.3f})")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--table", type=int, action="append", help="table number; repeatable")
    ap.add_argument("--reps", type=int, help="override the replication count")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, help="write one report JSON per row here")
    ap.add_argument("--dump-specs", type=Path, help="write the spec JSONs for `capreg simulate` and exit")
    args = ap.parse_args(argv)
    tables = args.table or [1, 2, 4, 5, 7, 8]

    if args.dump_specs:
        args.dump_specs.mkdir(parents=True, exist_ok=True)
        for t in tables:
            for row, spec in studies(t).items():
                name = f"table{t}_{row.replace(' ', '').replace(',', '_').replace('=', '')}.json"
                (args.dump_specs / name).write_text(json.dumps(spec.to_dict(), indent=1) + "\n")
        return 0

    for t in tables:
        specs = studies(t)
        reports = {}
        for row, spec in specs.items():
            if args.reps:
                spec = replace(spec, replications=args.reps)
            t0 = time.time()
            reports[row] = run_experiment(spec, jobs=args.jobs)
            print(f"table {t} / {row}: {spec.replications} reps in {time.time() - t0:.0f}s", file=sys.stderr)
            if args.out_dir:
                args.out_dir.mkdir(parents=True, exist_ok=True)
                reports[row].to_json(args.out_dir / f"table{t}_{row.replace(' ', '_').replace(',', '')}.json")
        print(f"\n===== Table {t} =====")
        _print_table(t, list(specs), reports)
    return 0


if __name__ == "__main__":
    sys.exit(main())
