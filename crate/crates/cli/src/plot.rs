//! Generated matplotlib script: one panel per mode, backlog against slot,
//! one curve per arrival rate (first seed only).

use d2d_relay::policy::PolicyMode;

use crate::experiment::SummaryRow;

const TEMPLATE: &str = r#"#!/usr/bin/env python3
# Generated by d2d-relay. Run from the output directory.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

PANELS = __PANELS__
HERE = os.path.dirname(os.path.abspath(__file__))


def backlog(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.DictReader(f))
    return [int(r["slot"]) for r in rows], [int(r["sumX"]) + int(r["sumY"]) for r in rows]


def main():
    fig, axes = plt.subplots(1, len(PANELS), figsize=(6 * len(PANELS), 4), sharey=True, squeeze=False)
    for ax, (mode, curves) in zip(axes[0], PANELS):
        for rate, name in curves:
            x, y = backlog(name)
            ax.plot(x, y, label=f"lambda = {rate}")
        ax.set_title(mode)
        ax.set_xlabel("slot")
        ax.legend()
    axes[0][0].set_ylabel("total backlog (packets)")
    fig.tight_layout()
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "backlog.png")
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
"#;

fn py_str(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn plot_script(rows: &[SummaryRow]) -> String {
    let mut modes: Vec<PolicyMode> = Vec::new();
    for r in rows {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    // No-relay on the left.
    modes.sort_by_key(|m| *m == PolicyMode::Relay);
    let panels: Vec<String> = modes
        .iter()
        .map(|&mode| {
            let mut curves: Vec<String> = Vec::new();
            let mut seen: Vec<f64> = Vec::new();
            for r in rows.iter().filter(|r| r.mode == mode) {
                if !seen.contains(&r.lambda) {
                    seen.push(r.lambda);
                    curves.push(format!("({}, {})", r.lambda, py_str(&r.trace)));
                }
            }
            format!("({}, [{}])", py_str(&mode.to_string()), curves.join(", "))
        })
        .collect();
    TEMPLATE.replace("__PANELS__", &format!("[{}]", panels.join(", ")))
}
