//! Emits a matplotlib script that plots run directories side by side.

use ddmpc::synthesis::ConstraintSets;

fn bounds(m: &nalgebra::DMatrix<f64>) -> Vec<Option<f64>> {
    (0..m.nrows())
        .map(|i| (m[(i, i)] > 0.0).then(|| 1.0 / m[(i, i)].sqrt()))
        .collect()
}

fn py_list(v: &[Option<f64>]) -> String {
    let items: Vec<String> = v
        .iter()
        .map(|b| b.map_or("None".to_string(), |x| format!("{x:e}")))
        .collect();
    format!("[{}]", items.join(", "))
}

/// `runs` are `(label, directory relative to the script)`. Bound lines use
/// the diagonal of `S_x` and `S_u` (exact per-axis limits for diagonal weights).
pub fn script(runs: &[(String, String)], cons: &ConstraintSets) -> String {
    let run_list: Vec<String> = runs.iter().map(|(l, d)| format!("({l:?}, {d:?})")).collect();
    format!(
        r#"#!/usr/bin/env python3
import csv
import os
import sys

import matplotlib.pyplot as plt

RUNS = [{runs}]
STATE_BOUNDS = {xb}
INPUT_BOUNDS = {ub}
HERE = os.path.dirname(os.path.abspath(__file__))


def load(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = {{k: [] for k in rows[0].keys()}}
    for r in rows:
        for k, v in r.items():
            cols[k].append(float(v) if v != "" else None)
    return cols


def main():
    data = [(label, load(os.path.join(HERE, d, "trajectory.csv"))) for label, d in RUNS]
    xs = [k for k in data[0][1] if k.startswith("x")]
    us = [k for k in data[0][1] if k.startswith("u")]
    fig, axes = plt.subplots(len(xs) + len(us), 1, sharex=True, figsize=(7, 2.2 * (len(xs) + len(us))))
    for ax, key, bound in zip(axes, xs + us, STATE_BOUNDS + INPUT_BOUNDS):
        for label, cols in data:
            t = [ti for ti, v in zip(cols["t"], cols[key]) if v is not None]
            v = [v for v in cols[key] if v is not None]
            ax.plot(t, v, label=label, drawstyle="steps-post" if key.startswith("u") else "default")
        if bound is not None:
            ax.axhline(bound, color="k", linestyle="--", linewidth=0.8)
            ax.axhline(-bound, color="k", linestyle="--", linewidth=0.8)
        ax.set_ylabel(key)
    axes[0].legend()
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "trajectories.png")
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
"#,
        runs = run_list.join(", "),
        xb = py_list(&bounds(cons.s_x())),
        ub = py_list(&bounds(cons.s_u())),
    )
}
